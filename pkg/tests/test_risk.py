import math

import numpy as np
import pytest
from helpers import egpd_survival, oracle_mean_residual, oracle_proportion, oracle_tail_sum, random_hdegpd_draws

from bmcd.core import TabulatedExitProbs, exit_probs_from_distribution, tabulate_for_simulation
from bmcd.distributions import GeometricParams, GeomMixParams, HdeGpdParams
from bmcd.errors import MeanUndefinedError
from bmcd.risk import (
    BoundStatus,
    _TailSums,
    asymptotic_reward_mc,
    mean_residual_geometric,
    mean_residual_hdegpd,
    mean_residual_tabulated,
    proportion_time_long_dry,
)

HALF = exit_probs_from_distribution(GeometricParams(0.5))


def test_oracle_self_check():
    # kappa = 1, xi = 0: S(m) = exp(-m / sigma), a geometric series
    s = 3.0
    assert oracle_tail_sum(1.0, s, 0.0, 5) == pytest.approx(math.exp(-5 / s) / (1 - math.exp(-1 / s)), rel=1e-12)


# mean residual

def test_saturated_hurdle():
    b = mean_residual_hdegpd(HdeGpdParams(1.0, 1, 1, 0.3), 0)
    assert (b.lower, b.upper, b.width) == (1.0, 1.0, 0.0)


@pytest.mark.parametrize("params", [(0.2, 1.0, 10.0, 0.3), (0.5, 2.0, 3.0, -0.2), (0.1, 0.5, 6.0, 0.0)])
def test_d_zero_is_mean(params):
    b = mean_residual_hdegpd(HdeGpdParams(*params), 0)
    assert oracle_mean_residual(*params, 0) in b
    assert b.width < 1e-5
    assert HdeGpdParams(*params).mean() == pytest.approx(b.value, abs=1e-5)


def test_reference_case_d20():
    b = mean_residual_hdegpd(HdeGpdParams(0.2, 1.0, 10.0, 0.3), 20)
    assert b.width < 1e-5 and b.status is BoundStatus.CONVERGED
    assert abs(b.value - oracle_mean_residual(0.2, 1.0, 10.0, 0.3, 20)) < 1e-5


def test_bounds_contain_oracle_random():
    for f1, k, s, xi in random_hdegpd_draws(101, n=8):
        for d in (1, 5, 20):
            if egpd_survival(k, s, xi, d - 1) == 0:
                with pytest.raises(MeanUndefinedError):
                    mean_residual_hdegpd(HdeGpdParams(f1, k, s, xi), d)
                continue
            b = mean_residual_hdegpd(HdeGpdParams(f1, k, s, xi), d)
            assert oracle_mean_residual(f1, k, s, xi, d) in b
            assert b.width < 1e-5


def test_monotone_tightening():
    sums = _TailSums(HdeGpdParams(0.2, 1.0, 10.0, 0.5).egpd, 19)
    prev = (-math.inf, math.inf)
    for u in (64, 128, 256, 512, 1024, 4096):
        sums.advance_to(u)
        lo, hi, _ = sums.bracket()
        assert lo >= prev[0] - 1e-12 * abs(lo) and hi <= prev[1] + 1e-12 * abs(hi)
        prev = (lo, hi)


def test_heavy_tail_non_convergence_reported():
    b = mean_residual_hdegpd(HdeGpdParams(0.2, 1.0, 10.0, 0.97), 20, precision=1e-9)
    assert b.status is BoundStatus.NON_CONVERGED and b.lower <= b.upper


def test_mean_undefined():
    with pytest.raises(MeanUndefinedError):
        mean_residual_hdegpd(HdeGpdParams(0.2, 1.0, 10.0, 1.0), 20)
    with pytest.raises(MeanUndefinedError):
        mean_residual_hdegpd(HdeGpdParams(0.2, 1.0, 2.0, -0.5), 20)


# geometric and tabulated paths

def test_geometric_residual():
    assert mean_residual_geometric(GeometricParams(0.1), 20) == 10.0
    assert mean_residual_geometric(GeometricParams(1.0), 7) == 1.0
    direct = math.fsum(0.5**k for k in range(1, 200))
    assert mean_residual_geometric(GeometricParams(0.5), 60) == pytest.approx(1 + direct, rel=1e-15)


@pytest.mark.parametrize("p", [0.05, 0.1, 0.5, 1.0])
@pytest.mark.parametrize("d", [0, 20, 40, 60])
def test_tabulated_reproduces_memorylessness(p, d):
    b = mean_residual_tabulated(GeometricParams(p), d)
    assert abs(b.value - 1 / p) < 1e-8


def test_tabulated_matches_hdegpd_bounded():
    p = HdeGpdParams(0.3, 1.4, 20.0, -0.3)
    q = tabulate_for_simulation(exit_probs_from_distribution(p))
    for d in (1, 10, 40):
        assert mean_residual_tabulated(q, d).value in mean_residual_hdegpd(p, d)


def test_tabulated_zero_tail_exit():
    with pytest.raises(MeanUndefinedError):
        mean_residual_tabulated(TabulatedExitProbs([0.5, 0.5], 0.0), 0)


# proportion of time in long dry spells

def test_proportion_geometric_example():
    b = proportion_time_long_dry(GeometricParams(0.5), GeometricParams(0.5), 1)
    assert b.value == 0.25 and b.width == 0


def test_proportion_beyond_support():
    dry = HdeGpdParams(0.2, 1.0, 4.0, -0.5)  # X < 8 so tau <= 9
    b = proportion_time_long_dry(dry, GeometricParams(0.5), 12)
    assert b.value == 0.0 and b.width == 0.0


def dry_days_from(d, h=5000):
    """Reward table for 1{r = 0, d_state > d}, wide enough that the default never matters."""
    w = np.zeros((2, h))
    w[0, d:] = 1.0
    return w


def test_proportion_d_zero_is_dry_fraction():
    dry, wet = HdeGpdParams(0.3, 1.2, 5.0, 0.2), GeomMixParams(0.4, 0.7, 0.15)
    b = proportion_time_long_dry(dry, wet, 0)
    q0 = tabulate_for_simulation(exit_probs_from_distribution(dry))
    q1 = tabulate_for_simulation(exit_probs_from_distribution(wet))
    frac = asymptotic_reward_mc(q0, q1, dry_days_from(0), 10**6, seed=4, default=1.0)
    assert abs(frac - b.value) < 0.005


@pytest.mark.parametrize("d", [1, 20, 60])
def test_proportion_against_oracle(d):
    for f1, k, s, xi in random_hdegpd_draws(202, n=6):
        wet = GeomMixParams(0.4, 0.7, 0.15)
        b = proportion_time_long_dry(HdeGpdParams(f1, k, s, xi), wet, d)
        assert oracle_proportion(f1, k, s, xi, wet.mean(), d) in b
        assert b.width < 1e-5


# Monte Carlo reward averages

def test_reward_constant_one():
    assert asymptotic_reward_mc(HALF, HALF, np.ones((2, 1)), 1000, seed=1, default=1.0) == 1.0


def test_reward_dry_indicator():
    val = asymptotic_reward_mc(HALF, HALF, dry_days_from(0, 200), 10**6, seed=2)
    assert abs(val - 0.5) < 0.005


def test_reward_long_dry_vs_closed_form():
    # days at least 3 deep into a dry spell: E[(tau0 - 2)_+] / E[tau]
    val = asymptotic_reward_mc(HALF, HALF, dry_days_from(2, 200), 10**6, seed=3)
    ref = proportion_time_long_dry(GeometricParams(0.5), GeometricParams(0.5), 2).value
    direct = math.fsum(0.5**k for k in range(2, 200)) / 4
    assert ref == pytest.approx(direct, rel=1e-12)
    assert abs(val - ref) < 0.005


def test_reward_validation():
    with pytest.raises(ValueError):
        asymptotic_reward_mc(HALF, HALF, np.ones(3), 10)
    with pytest.raises(ValueError):
        asymptotic_reward_mc(HALF, HALF, -np.ones((2, 2)), 10)
