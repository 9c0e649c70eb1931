import math

import numpy as np
import pytest
from scipy import stats

from bmcd.core import TabulatedDistribution
from bmcd.diagnostics import (
    AUTO,
    acf_bivariate,
    auto_d_max,
    empirical_exit_probs,
    exit_curve,
    gof_matrices,
    gof_test,
    model_exit_probs,
    qq_envelope,
)
from bmcd.distributions import GeometricParams, GeomMixParams, HdeGpdParams
from bmcd.errors import InsufficientDataError
from bmcd.rng import make_rng

GEO = GeometricParams(0.5)


# exit curves

def test_empirical_exit_example():
    q, n = empirical_exit_probs([1, 2, 2, 3], 3)
    assert n.tolist() == [4, 3, 1]
    assert q.tolist() == pytest.approx([1 / 4, 2 / 3, 1.0])


def test_empirical_exit_all_ones():
    q, n = empirical_exit_probs([1, 1, 1], 2)
    assert q[0] == 1.0 and np.isnan(q[1]) and n.tolist() == [3, 0]


def test_empirical_exit_geometric_band():
    x = GEO.sample(make_rng(1), 100_000)
    curve = exit_curve(x, GEO, 5)
    assert np.all(np.abs(curve.q_emp - 0.5) < 3 * curve.band_sd)
    assert np.all(np.diff(curve.counts) <= 0)


def test_model_exit_delegates():
    assert model_exit_probs(GEO, 4).tolist() == [0.5] * 4
    assert model_exit_probs(HdeGpdParams(0.25, 1, 5, 0), 1)[0] == 0.25


def test_exact_enumeration_agreement():
    counts = np.array([40, 25, 10, 0, 5, 20])
    x = np.repeat(np.arange(1, 7), counts)
    dist = TabulatedDistribution(counts / counts.sum())
    q_emp, _ = empirical_exit_probs(x, 6)
    # equal up to the rounding of counts / total
    assert np.allclose(q_emp, model_exit_probs(dist, 6), rtol=1e-14, atol=0)


# chi-squared test

def test_gof_matrix_structure():
    s = GeomMixParams(0.3, 0.8, 0.1).survival(np.arange(1, 9))
    sigma, t = gof_matrices(s)
    assert np.linalg.eigvalsh(sigma).min() >= -1e-10
    assert t[0].tolist() == [-1.0] + [0.0] * 7
    for i in range(1, 8):
        nz = set(np.flatnonzero(t[i]).tolist())
        assert nz == {i - 1, i}


def test_gof_zero_delta():
    counts = np.array([8, 4, 2, 1, 1])
    x = np.repeat(np.arange(1, 6), counts)
    dist = TabulatedDistribution(counts / counts.sum())
    res = gof_test(x, dist, d_max=4)
    assert res.statistic == 0.0 and res.p_value == 1.0 and res.dof == 3


def test_gof_permutation_invariant():
    x = HdeGpdParams(0.2, 1.0, 4.0, 0.1).sample(make_rng(2), 800)
    dist = HdeGpdParams(0.2, 1.0, 4.0, 0.1)
    a = gof_test(x, dist, d_max=6)
    b = gof_test(make_rng(3).permutation(x), dist, d_max=6)
    assert a.statistic == b.statistic


def test_gof_auto_d_max():
    x = np.repeat(np.arange(1, 8), [50, 40, 30, 20, 19, 5, 1])
    assert auto_d_max(x, 20) == 5
    assert auto_d_max([1, 1, 2], 20) == 3
    res = gof_test(GEO.sample(make_rng(4), 5000), GEO, d_max=AUTO)
    assert res.dof == res.d_max - 1 and res.d_max >= 3


def test_gof_insufficient():
    with pytest.raises(InsufficientDataError):
        gof_test([1, 2, 3], GEO, d_max=3)
    with pytest.raises(InsufficientDataError):
        gof_test([1] * 30, GEO, d_max=4)


def test_gof_singular_flag():
    # the model puts no mass beyond 2 so the covariance of the later exit estimates vanishes
    dist = TabulatedDistribution([0.5, 0.5])
    res = gof_test(np.array([1, 2] * 20 + [3]), dist, d_max=4)
    assert res.singular and math.isnan(res.p_value) and res.status == "SINGULAR"


def test_gof_size_geometric():
    rejections = 0
    reps = 1000
    for b in range(reps):
        x = GEO.sample(make_rng(5, "size", b), 5000)
        rejections += gof_test(x, GEO).p_value < 0.05
    assert 0.03 <= rejections / reps <= 0.07


def test_gof_power_against_mixture():
    x = GeomMixParams(0.5, 0.8, 0.2).sample(make_rng(6), 3000)
    assert gof_test(x, GeometricParams(1 / x.mean())).p_value < 1e-6


# ACF

def brute_acf(years, lag):
    allc = [c for y in years for c in y]
    m = [sum(c[i] for c in allc) / len(allc) for i in range(2)]

    def gamma(lag):
        tot = [[0.0, 0.0], [0.0, 0.0]]
        cnt = 0
        for y in years:
            for k in range(len(y) - lag):
                cnt += 1
                for i in range(2):
                    for j in range(2):
                        tot[i][j] += (y[k][i] - m[i]) * (y[k + lag][j] - m[j])
        return [[v / cnt for v in row] for row in tot], cnt

    g0, _ = gamma(0)
    g, cnt = gamma(lag)
    return [[g[i][j] / math.sqrt(g0[i][i] * g0[j][j]) for j in range(2)] for i in range(2)], cnt


def test_acf_hand_toy():
    years = {1990: [(3, 1), (5, 2), (2, 4)], 1991: [(1, 1), (4, 3)]}
    acf = acf_bivariate(years, 2)
    for lag in (0, 1, 2):
        ref, cnt = brute_acf(list(years.values()), lag)
        assert acf.counts[lag] == cnt
        assert np.max(np.abs(acf.R[lag] - np.array(ref))) < 1e-12
    assert acf.counts.tolist() == [5, 3, 1]
    assert np.allclose(np.diag(acf.R[0]), 1.0) and acf.R[0][0, 1] == pytest.approx(acf.R[0][1, 0])


def test_acf_degenerate():
    assert acf_bivariate({2000: [(2, 3), (2, 3)]}, 1).status == "DEGENERATE"


def test_acf_insufficient():
    with pytest.raises(InsufficientDataError):
        acf_bivariate({2000: [(2, 3)]}, 1)


def test_acf_lags_stop_at_longest_year():
    acf = acf_bivariate({1: [(1, 2), (3, 1), (2, 2)]}, 10)
    assert acf.lags.tolist() == [0, 1, 2]


def test_acf_white_noise():
    rng = make_rng(7)
    dry = GeometricParams(0.3).sample(rng, 1000).reshape(100, 10)
    wet = GeometricParams(0.5).sample(rng, 1000).reshape(100, 10)
    years = {y: list(zip(dry[y].tolist(), wet[y].tolist())) for y in range(100)}
    acf = acf_bivariate(years, 5)
    inside = []
    for lag in acf.lags:
        cells = [(0, 1), (1, 0)] if lag == 0 else [(0, 0), (0, 1), (1, 0), (1, 1)]
        inside += [abs(acf.R[lag][c]) < acf.bound[lag] for c in cells]
    assert np.mean(inside) >= 0.9


# Q-Q envelopes

def test_qq_point_mass():
    env = qq_envelope([1] * 30, GeometricParams(1.0), B=50)
    assert np.all(env.lower == 1) and np.all(env.upper == 1)
    assert env.multiplicity.tolist() == [30] * 30


def test_qq_single_replicate():
    env = qq_envelope(GEO.sample(make_rng(8), 40), GEO, B=1, seed=3)
    assert np.array_equal(env.lower, env.upper)
    assert np.all(np.diff(env.lower) >= 0)


def test_qq_coverage():
    dist = HdeGpdParams(0.3, 1.0, 3.0, 0.1)
    cover = []
    for t in range(200):
        x = dist.sample(make_rng(9, "data", t), 100)
        cover.append(qq_envelope(x, dist, B=1000, seed=t).coverage())
    assert np.mean(cover) >= 1 - 0.05 - 0.03


def test_qq_monotone_and_ordered():
    env = qq_envelope(GEO.sample(make_rng(10), 60), GEO, B=200)
    assert np.all(env.lower <= env.upper)
    assert np.all(np.diff(env.lower) >= 0) and np.all(np.diff(env.upper) >= 0)
    assert stats.spearmanr(env.recorded, env.simulated).correlation > 0.9
