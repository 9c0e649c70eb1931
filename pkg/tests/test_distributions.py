import math

import numpy as np
import pytest
from scipy import integrate, stats

from bmcd.distributions import (
    Egpd1Params,
    GeometricParams,
    GeomMixParams,
    HdeGpdParams,
    egpd1_cdf,
    egpd1_mean,
    egpd1_quantile,
    egpd1_survival,
    egpd1_tail_integral,
    params_from_dict,
)
from bmcd.errors import InvalidParameterError, MeanUndefinedError
from bmcd.rng import make_rng


def quad_tail(p, u):
    bound = -p.sigma / p.xi if p.xi < 0 else np.inf
    val, _ = integrate.quad(lambda z: egpd1_survival(p, z), u, bound, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


# eGPD

def test_cdf_exponential():
    assert egpd1_cdf(Egpd1Params(1, 1, 0), 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert egpd1_cdf(Egpd1Params(2, 1, 0), 1.0) == pytest.approx((1 - math.exp(-1)) ** 2, rel=1e-14)


def test_cdf_gp_case():
    p = Egpd1Params(1, 2, 0.5)
    assert egpd1_cdf(p, 2.0) == pytest.approx(5 / 9, rel=1e-14)
    dens, _ = integrate.quad(lambda z: (1 + 0.5 * z / 2) ** -3 / 2, 0, 2)
    assert dens == pytest.approx(5 / 9, rel=1e-10)


@pytest.mark.parametrize("xi", [-0.4, -0.1, 0.2, 0.7])
def test_kappa_one_is_gp(xi):
    z = np.linspace(0, 30, 61)
    ref = stats.genpareto.cdf(z, xi, scale=3.0)
    assert np.allclose(egpd1_cdf(Egpd1Params(1, 3.0, xi), z), ref, atol=1e-14)


def test_support_bound():
    p = Egpd1Params(1.5, 2.0, -0.5)
    assert egpd1_survival(p, 4.0) == 0.0
    assert egpd1_survival(p, 5.0) == 0.0
    assert egpd1_survival(p, 3.999) > 0


def test_xi_zero_continuity():
    z = np.linspace(0.1, 40, 50)
    ref = egpd1_survival(Egpd1Params(1.7, 4.0, 0.0), z)
    for xi in (1e-9, -1e-9):
        assert np.allclose(egpd1_survival(Egpd1Params(1.7, 4.0, xi), z), ref, rtol=1e-6, atol=0)
    for xi in (2e-8, -2e-8):
        assert np.allclose(egpd1_survival(Egpd1Params(1.7, 4.0, xi), z), ref, rtol=1e-5, atol=0)


def test_quantile_inverts_cdf():
    p = Egpd1Params(0.7, 5.0, 0.3)
    u = np.linspace(0.001, 0.999, 99)
    assert np.allclose(egpd1_cdf(p, egpd1_quantile(p, u)), u, rtol=1e-12)


def test_invalid_params():
    for args in [(0, 1, 0), (1, -1, 0), (1, 1, math.nan), (math.inf, 1, 0)]:
        with pytest.raises(InvalidParameterError):
            Egpd1Params(*args)
    with pytest.raises(InvalidParameterError):
        HdeGpdParams(1.2, 1, 1, 0)
    with pytest.raises(InvalidParameterError):
        GeometricParams(0.0)
    with pytest.raises(InvalidParameterError):
        GeomMixParams(0.5, 0.2, 0.7)


def test_mean_examples():
    assert egpd1_mean(Egpd1Params(1, 1, 0.5)) == pytest.approx(2.0, rel=1e-14)
    assert egpd1_mean(Egpd1Params(1, 3, -1)) == pytest.approx(1.5, rel=1e-14)
    with pytest.raises(MeanUndefinedError):
        egpd1_mean(Egpd1Params(1, 1, 1.0))


@pytest.mark.parametrize("kappa", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("xi", [-0.6, -0.2, 0.0, 0.25, 0.6])
def test_mean_matches_quadrature(kappa, xi):
    p = Egpd1Params(kappa, 2.0, xi)
    assert egpd1_mean(p) == pytest.approx(quad_tail(p, 0.0), rel=1e-8)


def test_tail_integral_examples():
    p = Egpd1Params(1, 1, 0.5)
    assert egpd1_tail_integral(p, 0.0) == egpd1_mean(p)
    assert egpd1_tail_integral(p, 2.0) == pytest.approx(1.0, rel=1e-12)
    q = Egpd1Params(2, 1, 0.25)
    assert egpd1_tail_integral(q, 1.0) == pytest.approx(quad_tail(q, 1.0), abs=1e-8)
    assert egpd1_tail_integral(Egpd1Params(1, 2, -0.5), 4.5) == 0.0


@pytest.mark.parametrize(
    "p", [Egpd1Params(0.4, 3, 0.45), Egpd1Params(3, 1, -0.3), Egpd1Params(1.3, 8, 0.0), Egpd1Params(2, 5, 1e-9)]
)
@pytest.mark.parametrize("u", [0.5, 3.0, 17.0, 90.0])
def test_tail_integral_quadrature_and_derivative(p, u):
    # inside the |xi| < 1e-8 band the exponential formula is used, so agreement is only O(xi)
    rel = 1e-6 if 0 < abs(p.xi) < 1e-8 else 1e-8
    assert egpd1_tail_integral(p, u) == pytest.approx(quad_tail(p, u), rel=rel, abs=1e-12)
    h = 1e-5
    deriv = (egpd1_tail_integral(p, u + h) - egpd1_tail_integral(p, u - h)) / (2 * h)
    assert deriv == pytest.approx(-egpd1_survival(p, u), abs=1e-4)


# hdeGPD

def test_hdegpd_saturated():
    p = HdeGpdParams(1.0, 1, 1, 0)
    assert p.pmf(1) == 1.0
    assert np.all(p.pmf(np.arange(2, 20)) == 0)
    assert p.support_max == 1


def test_hdegpd_pmf2():
    p = HdeGpdParams(0.5, 1, 1, 0)
    assert p.pmf(2) == pytest.approx(0.5 * (1 - math.exp(-1)), rel=1e-14)
    assert p.survival(0) == 1.0
    assert p.survival(1) == 0.5


def test_hdegpd_support_max_bounded():
    p = HdeGpdParams(0.2, 1.0, 4.5, -0.5)  # support of X is [0, 9)
    assert p.support_max == 10
    assert p.pmf(10) > 0 and p.survival(10) == 0


FAMILIES = [
    HdeGpdParams(0.25, 1.0, 10.0, 0.3),
    HdeGpdParams(0.4, 0.6, 3.0, -0.25),
    HdeGpdParams(0.1, 2.0, 5.0, 0.0),
    GeometricParams(0.35),
    GeomMixParams(0.3, 0.9, 0.1),
]


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: type(d).__name__)
def test_normalization_and_consistency(dist):
    H = 10_000
    d = np.arange(1, H + 1)
    pmf = dist.pmf(d)
    assert math.fsum(pmf) + dist.survival(H) == pytest.approx(1.0, abs=1e-10)
    diff = dist.survival(d - 1) - dist.survival(d)
    assert np.allclose(pmf, diff, rtol=0, atol=1e-12)
    assert np.all(np.diff(dist.survival(np.arange(0, 200))) <= 0)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: type(d).__name__)
def test_sampling_law(dist):
    n = 100_000
    x = dist.sample(make_rng(2024, "law", type(dist).__name__), n)
    grid = np.arange(1, int(x.max()) + 1)
    ecdf = np.searchsorted(np.sort(x), grid, side="right") / n
    ks = np.max(np.abs(ecdf - dist.cdf(grid)))
    assert ks < 1.63 / math.sqrt(n)


def test_geommix_examples():
    p = GeomMixParams(1.0, 0.5, 0.3)
    assert p.pmf(1) == 0.5 and p.pmf(2) == 0.25
    assert GeomMixParams(0.5, 0.8, 0.2).pmf(1) == pytest.approx(0.5)
    q = GeomMixParams(0.3, 0.9, 0.1)
    d = np.arange(1, 2000)
    assert q.mean() == pytest.approx(0.3 / 0.9 + 0.7 / 0.1, rel=1e-14)
    assert math.fsum(d * q.pmf(d)) == pytest.approx(q.mean(), abs=1e-9)


def test_geometric_p_one():
    p = GeometricParams(1.0)
    assert p.pmf(1) == 1.0 and p.survival(1) == 0.0 and p.mean() == 1.0
    assert np.all(p.sample(make_rng(0), 100) == 1)


def test_hdegpd_mean_brute_force():
    p = HdeGpdParams(0.3, 1.5, 4.0, 0.2)
    d = np.arange(1, 400_000)
    brute = math.fsum(d * p.pmf(d)) + 400_000 * p.survival(399_999)
    assert p.mean() == pytest.approx(brute, rel=1e-6)


def test_params_round_trip():
    for dist in FAMILIES:
        fam = {"HdeGpdParams": "hdegpd", "GeometricParams": "geometric", "GeomMixParams": "geommix"}
        assert params_from_dict(fam[type(dist).__name__], dist.to_dict()) == dist
