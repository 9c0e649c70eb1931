"""Spell-duration laws: type-1 eGPD, hurdle discretised eGPD, geometric mixture, geometric.

All discrete laws live on {1, 2, ...}. Functions accept scalars or arrays and
return numpy values; the parameter dataclasses double as distribution objects
(``pmf``, ``survival``, ``sample``, ``mean``) so they can be handed straight
to the chain and diagnostics code.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .errors import InvalidParameterError, MeanUndefinedError
from .special import EULER_GAMMA, betaincc, digamma, lbeta

# Below this |xi| the exponential (xi = 0) branch is used.
XI_ZERO_BAND = 1e-8


class DurationDistribution(ABC):
    """A law on the positive integers."""

    @abstractmethod
    def pmf(self, d):
        ...

    @abstractmethod
    def survival(self, d):
        """P(tau > d); equals 1 at d = 0."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        ...

    @abstractmethod
    def mean(self) -> float:
        ...

    @property
    def support_max(self) -> int | None:
        """Largest duration with positive mass, or None when unbounded."""
        return None

    def cdf(self, d):
        return 1.0 - self.survival(d)


# ---------------------------------------------------------------- type-1 eGPD


@dataclass(frozen=True)
class Egpd1Params:
    kappa: float
    sigma: float
    xi: float

    def __post_init__(self):
        _check_egpd(self.kappa, self.sigma, self.xi)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def _check_egpd(kappa, sigma, xi):
    if not (math.isfinite(kappa) and kappa > 0):
        raise InvalidParameterError(f"kappa must be > 0, got {kappa}")
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    if not math.isfinite(xi):
        raise InvalidParameterError(f"xi must be finite, got {xi}")


def egpd1_support_bound(params: Egpd1Params) -> float:
    """Upper end of the support: -sigma/xi for xi < 0, infinity otherwise."""
    if params.xi < -XI_ZERO_BAND:
        return -params.sigma / params.xi
    return math.inf


def _gp_log_survival(params: Egpd1Params, z: np.ndarray) -> np.ndarray:
    """log of the GP survival t = (1 + xi z/sigma)^(-1/xi), for z >= 0 inside the support."""
    sigma, xi = params.sigma, params.xi
    s = z / sigma
    if abs(xi) < XI_ZERO_BAND:
        # log1p(xi s)/xi = s - xi s^2/2 + O(xi^2 s^3)
        return -s * (1.0 - 0.5 * xi * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log1p(xi * s) / xi
    return -y


def _egpd1_parts(params: Egpd1Params, z) -> tuple[np.ndarray, np.ndarray]:
    """Return (cdf, survival) evaluated without cancellation."""
    z = np.asarray(z, dtype=float)
    cdf = np.zeros_like(z)
    surv = np.ones_like(z)
    bound = egpd1_support_bound(params)
    inside = (z > 0) & (z < bound)
    above = z >= bound
    if np.any(inside):
        log_t = _gp_log_survival(params, z[inside])
        log_cdf = params.kappa * np.log1p(-np.exp(log_t))
        cdf[inside] = np.exp(log_cdf)
        surv[inside] = -np.expm1(log_cdf)
    cdf[above] = 1.0
    surv[above] = 0.0
    return cdf, surv


def egpd1_cdf(params: Egpd1Params, z):
    cdf, _ = _egpd1_parts(params, z)
    return cdf if cdf.ndim else float(cdf)


def egpd1_survival(params: Egpd1Params, z):
    _, surv = _egpd1_parts(params, z)
    return surv if surv.ndim else float(surv)


def egpd1_quantile(params: Egpd1Params, p):
    """Inverse cdf: sigma * H_xi^{-1}(p^(1/kappa))."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        # -log(1 - p^(1/kappa)), computed from log p to keep precision as p -> 1
        ell = -np.log(-np.expm1(np.log(p) / params.kappa))
    if abs(params.xi) < XI_ZERO_BAND:
        z = params.sigma * ell
    else:
        z = params.sigma * np.expm1(params.xi * ell) / params.xi
    return z if z.ndim else float(z)


def egpd1_mean(params: Egpd1Params) -> float:
    """Mean of the continuous type-1 eGPD, finite iff xi < 1."""
    kappa, sigma, xi = params.kappa, params.sigma, params.xi
    if xi >= 1:
        raise MeanUndefinedError(f"eGPD mean is infinite for xi >= 1 (xi={xi})")
    if abs(xi) < XI_ZERO_BAND:
        return sigma * (digamma(kappa + 1.0) + EULER_GAMMA)
    # kappa * B(kappa, 1 - xi) - 1 = Gamma(kappa+1)Gamma(1-xi)/Gamma(kappa+1-xi) - 1
    log_kb = math.lgamma(kappa + 1.0) + math.lgamma(1.0 - xi) - math.lgamma(kappa + 1.0 - xi)
    return sigma / xi * math.expm1(log_kb)


def _binom_coeffs(kappa: float, n: int) -> list[float]:
    out = [1.0]
    for j in range(1, n + 1):
        out.append(out[-1] * (kappa - j + 1) / j)
    return out


def _tail_integral_xi0(kappa: float, sigma: float, u: float) -> float:
    """Integral of 1 - (1 - e^{-x/sigma})^kappa over [u, inf)."""
    y = math.exp(-u / sigma)
    if y <= 0.5:
        # sigma * sum_j (-1)^{j+1} C(kappa, j) y^j / j
        total = 0.0
        coef = 1.0
        yj = 1.0
        for j in range(1, 400):
            coef *= (kappa - j + 1) / j
            yj *= y
            term = (-1) ** (j + 1) * coef * yj / j
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
        return sigma * total
    # mean minus the integral over [0, u]; with x = 1 - e^{-u/sigma} <= 1/2,
    # integral_0^u = sigma * sum_n [x^{n+1}/(n+1) - x^{n+kappa+1}/(n+kappa+1)]
    x = -math.expm1(-u / sigma)
    head = 0.0
    xn1 = x
    xk = x**kappa
    for n in range(0, 400):
        term = xn1 / (n + 1) - xk * xn1 / (n + kappa + 1)
        head += term
        xn1 *= x
        if abs(term) <= 1e-17 * abs(head):
            break
    return sigma * (digamma(kappa + 1.0) + EULER_GAMMA) - sigma * head


def egpd1_tail_integral(params: Egpd1Params, u: float) -> float:
    """Integral of the eGPD survival over [u, inf), i.e. E[(X - u)_+]."""
    kappa, sigma, xi = params.kappa, params.sigma, params.xi
    if xi >= 1:
        raise MeanUndefinedError(f"eGPD tail integral is infinite for xi >= 1 (xi={xi})")
    if u < 0:
        raise ValueError(f"tail integral needs u >= 0, got {u}")
    if u == 0:
        return egpd1_mean(params)
    if u >= egpd1_support_bound(params):
        return 0.0
    if abs(xi) < XI_ZERO_BAND:
        return _tail_integral_xi0(kappa, sigma, u)
    log_t = -math.log1p(xi * u / sigma) / xi  # log(1 - a_u)
    a_u = -math.expm1(log_t)
    one_minus_ak = -math.expm1(kappa * math.log(a_u))
    upper_beta = math.exp(lbeta(kappa, 1.0 - xi)) * betaincc(kappa, 1.0 - xi, a_u)
    value = sigma * kappa / xi * upper_beta - (sigma / xi + u) * one_minus_ak
    return max(value, 0.0)


# ---------------------------------------------------------- hurdle discretised


@dataclass(frozen=True)
class HdeGpdParams(DurationDistribution):
    """Point mass f1 at duration 1, then 1 + ceil(X) with X ~ type-1 eGPD."""

    f1: float
    kappa: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not (0.0 <= self.f1 <= 1.0):
            raise InvalidParameterError(f"f1 must lie in [0, 1], got {self.f1}")
        _check_egpd(self.kappa, self.sigma, self.xi)

    @property
    def egpd(self) -> Egpd1Params:
        return Egpd1Params(self.kappa, self.sigma, self.xi)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def pmf(self, d):
        return hdegpd_pmf(self, d)

    def survival(self, d):
        return hdegpd_survival(self, d)

    def sample(self, rng, size):
        return hdegpd_sample(self, rng, size)

    def mean(self):
        return 1.0 + (1.0 - self.f1) * discretised_egpd_mean(self.egpd)

    @property
    def support_max(self):
        if self.f1 == 1.0:
            return 1
        bound = egpd1_support_bound(self.egpd)
        if math.isinf(bound):
            return None
        # X < bound a.s., so ceil(X) <= ceil(bound)
        return 1 + math.ceil(bound)


def hdegpd_survival(params: HdeGpdParams, d):
    d = np.asarray(d, dtype=float)
    out = np.ones_like(d)
    pos = d >= 1
    if np.any(pos):
        out[pos] = (1.0 - params.f1) * egpd1_survival(params.egpd, np.atleast_1d(d[pos] - 1.0))
    return out if out.ndim else float(out)


def hdegpd_pmf(params: HdeGpdParams, d):
    d = np.asarray(d, dtype=float)
    if np.any(d < 1):
        raise ValueError("pmf is defined for d >= 1")
    cdf_hi, surv_hi = _egpd1_parts(params.egpd, np.atleast_1d(d - 1.0))
    cdf_lo, surv_lo = _egpd1_parts(params.egpd, np.atleast_1d(np.maximum(d - 2.0, 0.0)))
    # difference of cdfs in the bulk, of survivals in the tail
    diff = np.where(cdf_hi < 0.5, cdf_hi - cdf_lo, surv_lo - surv_hi)
    out = (1.0 - params.f1) * diff
    out = np.where(np.atleast_1d(d) == 1, params.f1, out)
    return out.reshape(d.shape) if d.ndim else float(out[0])


def hdegpd_sample(params: HdeGpdParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Inversion sampler; consumes exactly 2*size uniforms."""
    u = rng.random((2, size))
    x = egpd1_quantile(params.egpd, np.atleast_1d(u[1]))
    x = np.minimum(x, 1e15)
    tau = 1 + np.ceil(x).astype(np.int64)
    tau = np.maximum(tau, 2)
    return np.where(u[0] < params.f1, 1, tau)


def discretised_egpd_mean(params: Egpd1Params, tol: float = 1e-13) -> float:
    """E[ceil(X)] = sum_{m>=0} P(X > m), by summation with an integral tail remainder.

    Only meant for moderate tails; the risk module has the certified version.
    """
    if params.xi >= 1:
        raise MeanUndefinedError(f"mean is infinite for xi >= 1 (xi={params.xi})")
    bound = egpd1_support_bound(params)
    if math.isfinite(bound):
        m = np.arange(0, math.ceil(bound) + 1, dtype=float)
        return math.fsum(egpd1_survival(params, m))
    total = 0.0
    start = 0
    width = 1024
    while True:
        m = np.arange(start, start + width, dtype=float)
        s = egpd1_survival(params, m)
        total = math.fsum([total, math.fsum(s)])
        start += width
        # sum_{m>=u} S(m) lies in [I(u), I(u) + S(u)]
        tail_lo = egpd1_tail_integral(params, float(start))
        s_u = float(egpd1_survival(params, float(start)))
        if s_u < tol * max(total, 1.0) or width > 2**26:
            return total + tail_lo + 0.5 * s_u
        width *= 2


# ------------------------------------------------------------- geometric laws


@dataclass(frozen=True)
class GeometricParams(DurationDistribution):
    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise InvalidParameterError(f"geometric p must lie in (0, 1], got {self.p}")

    def to_dict(self):
        return asdict(self)

    def pmf(self, d):
        d = np.asarray(d, dtype=float)
        out = self.p * (1.0 - self.p) ** (d - 1.0)
        return out if out.ndim else float(out)

    def survival(self, d):
        d = np.asarray(d, dtype=float)
        out = np.where(d <= 0, 1.0, (1.0 - self.p) ** np.maximum(d, 0.0))
        return out if out.ndim else float(out)

    def sample(self, rng, size):
        return _geometric_inverse(rng.random(size), self.p)

    def mean(self):
        return 1.0 / self.p

    @property
    def support_max(self):
        return 1 if self.p == 1.0 else None


def _geometric_inverse(u: np.ndarray, p) -> np.ndarray:
    p = np.broadcast_to(np.asarray(p, dtype=float), np.shape(u))
    out = np.ones(np.shape(u), dtype=np.int64)
    free = p < 1.0
    if np.any(free):
        # smallest d with 1 - (1-p)^d > u
        k = np.floor(np.log1p(-u[free]) / np.log1p(-p[free]))
        out[free] = 1 + np.minimum(k, 1e15).astype(np.int64)
    return out


@dataclass(frozen=True)
class GeomMixParams(DurationDistribution):
    pi: float
    p1: float
    p2: float

    def __post_init__(self):
        if not (0.0 <= self.pi <= 1.0):
            raise InvalidParameterError(f"pi must lie in [0, 1], got {self.pi}")
        for name, p in (("p1", self.p1), ("p2", self.p2)):
            if not (0.0 < p <= 1.0):
                raise InvalidParameterError(f"{name} must lie in (0, 1], got {p}")
        if self.p1 < self.p2:
            raise InvalidParameterError(f"identifiability requires p1 >= p2, got p1={self.p1} < p2={self.p2}")

    def to_dict(self):
        return asdict(self)

    def pmf(self, d):
        d = np.asarray(d, dtype=float)
        out = self.pi * self.p1 * (1.0 - self.p1) ** (d - 1.0) + (1.0 - self.pi) * self.p2 * (1.0 - self.p2) ** (
            d - 1.0
        )
        return out if out.ndim else float(out)

    def survival(self, d):
        d = np.maximum(np.asarray(d, dtype=float), 0.0)
        out = self.pi * (1.0 - self.p1) ** d + (1.0 - self.pi) * (1.0 - self.p2) ** d
        return out if out.ndim else float(out)

    def sample(self, rng, size):
        u = rng.random((2, size))
        p = np.where(u[0] < self.pi, self.p1, self.p2)
        return _geometric_inverse(u[1], p)

    def mean(self):
        return self.pi / self.p1 + (1.0 - self.pi) / self.p2

    @property
    def support_max(self):
        if self.p2 == 1.0 or (self.pi == 1.0 and self.p1 == 1.0):
            return 1
        return None


# Functional spellings of the methods above.


def geommix_pmf(params: GeomMixParams, d):
    return params.pmf(d)


def geommix_survival(params: GeomMixParams, d):
    return params.survival(d)


def geommix_sample(params: GeomMixParams, rng, size):
    return params.sample(rng, size)


def geommix_mean(params: GeomMixParams) -> float:
    return params.mean()


FAMILIES = {
    "hdegpd": HdeGpdParams,
    "geommix": GeomMixParams,
    "geometric": GeometricParams,
}


def params_from_dict(family: str, data: dict[str, Any]) -> DurationDistribution:
    cls = FAMILIES[family]
    fields = cls.__dataclass_fields__
    return cls(**{k: float(data[k]) for k in fields})
