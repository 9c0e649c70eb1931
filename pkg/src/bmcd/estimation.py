"""Fitting the duration laws.

Dry spells get a hurdle discretised eGPD: f1 is the empirical frequency of
one-day spells and (kappa, sigma, xi) come from probability weighted moments
of the shifted sample {tau - 2 : tau >= 2}. Wet spells get a two-component
geometric mixture fitted by EM. The plain geometric baseline is the MLE
p = 1 / mean.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize
from scipy.special import xlog1py

from .distributions import (
    XI_ZERO_BAND,
    DurationDistribution,
    Egpd1Params,
    GeometricParams,
    GeomMixParams,
    HdeGpdParams,
)
from .errors import InsufficientDataError, NonConvergedError
from .rng import derive_rng
from .special import EULER_GAMMA, digamma

XI_CLAMP = 0.99
PWM_OBJECTIVE_TOL = 1e-10
PWM_STEP_TOL = 1e-9
PWM_KAPPA_STARTS = (0.5, 1.0, 2.0)
PWM_SIGMA_FACTORS = (0.5, 1.0, 2.0)
PWM_XI_STARTS = (-0.3, -0.1, 0.0, 0.2, 0.4)
EM_SLACK = 1e-9


@dataclass
class FitResult:
    params: DurationDistribution
    n_obs: int
    converged: bool = True
    iterations: int = 0
    objective: float = 0.0
    restart: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def family(self) -> str:
        return {HdeGpdParams: "hdegpd", GeomMixParams: "geommix", GeometricParams: "geometric"}[type(self.params)]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params.to_dict(),
            "n_obs": self.n_obs,
            "diagnostics": {
                "converged": self.converged,
                "iterations": self.iterations,
                "objective": self.objective,
                "restart": self.restart,
                **{k: v for k, v in self.extra.items() if k != "loglik_trace"},
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_durations(durations) -> np.ndarray:
    x = np.asarray(durations, dtype=np.int64).ravel()
    if x.size == 0:
        raise ValueError("empty duration sample")
    if np.any(x < 1):
        raise ValueError("durations must be >= 1")
    return x


def estimate_f1(dry_durations) -> float:
    x = _as_durations(dry_durations)
    return float(np.count_nonzero(x == 1)) / x.size


def fit_geometric(durations) -> GeometricParams:
    x = _as_durations(durations)
    return GeometricParams(float(x.size / x.sum()))


# ------------------------------------------------------------------- PWM


def empirical_pwms(x, orders=(0, 1, 2)) -> np.ndarray:
    """Unbiased order-statistic estimates of E[X * (1 - F(X))^s]."""
    xs = np.sort(np.asarray(x, dtype=float))
    m = xs.size
    i = np.arange(1, m + 1, dtype=float)
    out = []
    for s in orders:
        w = np.ones(m)
        for j in range(1, s + 1):
            w *= (m - i - j + 1) / (m - j)
        out.append(float(np.dot(xs, w)) / m)
    return np.array(out)


def _model_pwms_closed(kappa: float, sigma: float, xi: float, orders) -> np.ndarray:
    # With V = F(X) uniform, E[X V^j] = sigma/xi * (kappa * B(kappa(j+1), 1 - xi) - 1/(j+1)),
    # and the xi -> 0 limit is sigma * (psi(kappa(j+1) + 1) + gamma) / (j+1).
    top = max(orders)
    raw = []
    for j in range(top + 1):
        a = kappa * (j + 1)
        if abs(xi) < XI_ZERO_BAND:
            raw.append(sigma * (digamma(a + 1.0) + EULER_GAMMA) / (j + 1))
        else:
            # a B(a, 1 - xi) = Gamma(a+1) Gamma(1-xi) / Gamma(a+1-xi)
            log_ab = math.lgamma(a + 1.0) + math.lgamma(1.0 - xi) - math.lgamma(a + 1.0 - xi)
            raw.append(sigma / xi * math.expm1(log_ab) / (j + 1))
    return np.array([sum(math.comb(s, j) * (-1) ** j * raw[j] for j in range(s + 1)) for s in orders])


def _model_pwms_quad(kappa: float, sigma: float, xi: float, orders) -> np.ndarray:
    # X = sigma * H^{-1}(W) with W = V^{1/kappa}; dV = kappa w^{kappa-1} dw, so the
    # endpoint singularities are algebraic and go into quad's weight function.
    out = []
    for s in orders:
        def tail_factor(w, s=s):
            return kappa * (1.0 - w**kappa) ** s

        if abs(xi) < XI_ZERO_BAND:
            # -log(1 - w) handled by the alg-logb weight
            val, _ = integrate.quad(
                lambda w: -sigma * tail_factor(w), 0, 1, weight="alg-logb", wvar=(kappa - 1.0, 0.0),
                epsabs=1e-10, limit=200,
            )
        elif xi > 0:
            val, _ = integrate.quad(
                lambda w: sigma / xi * (1.0 - (1.0 - w) ** xi) * tail_factor(w),
                0, 1, weight="alg", wvar=(kappa - 1.0, -xi), epsabs=1e-10, limit=200,
            )
        else:
            val, _ = integrate.quad(
                lambda w: sigma / xi * ((1.0 - w) ** (-xi) - 1.0) * tail_factor(w),
                0, 1, weight="alg", wvar=(kappa - 1.0, 0.0), epsabs=1e-10, limit=200,
            )
        out.append(val)
    return np.array(out)


def model_pwms(params: Egpd1Params, orders=(0, 1, 2), method: str = "closed") -> np.ndarray:
    """E[X * (1 - F(X))^s] for X ~ type-1 eGPD; ``method`` is "closed" or "quad"."""
    if method == "closed":
        return _model_pwms_closed(params.kappa, params.sigma, params.xi, orders)
    if method == "quad":
        return _model_pwms_quad(params.kappa, params.sigma, params.xi, orders)
    raise ValueError(f"unknown method {method!r}")


def _decode(theta) -> tuple[float, float, float]:
    return math.exp(theta[0]), math.exp(theta[1]), float(min(max(theta[2], -XI_CLAMP), XI_CLAMP))


def _pwm_objective(theta, target) -> float:
    if abs(theta[0]) > 30 or abs(theta[1]) > 200 or not np.all(np.isfinite(theta)):
        return 1e300
    kappa, sigma, xi = _decode(theta)
    try:
        mu = _model_pwms_closed(kappa, sigma, xi, (0, 1, 2))
    except (OverflowError, ValueError):
        return 1e300
    r = mu - target
    val = float(r @ r)
    return val if math.isfinite(val) else 1e300


def pwm_fit_egpd(dry_durations, min_tail_count: int = 10, shift: float = 2.0) -> FitResult:
    """PWM estimate of (kappa, sigma, xi) from the durations >= 2, shifted down by ``shift``.

    The default shift of 2 maps tau = 1 + ceil(X) to ceil(X) - 1, which sits on
    average half a day below X; ``shift=1.5`` centres the lattice instead.

    Least squares on the three moment equations in (log kappa, log sigma, xi),
    Nelder-Mead from a 3x3x5 grid of starts visited in order of their initial
    objective; the search stops at the first start reaching objective < 1e-10.
    Returns a FitResult whose params are Egpd1Params.
    """
    x = _as_durations(dry_durations)
    tail = x[x >= 2].astype(float) - shift
    if tail.size < min_tail_count:
        raise InsufficientDataError(f"{tail.size} durations >= 2, need {min_tail_count}")
    mean = float(tail.mean())
    if np.all(tail == tail[0]):
        raise NonConvergedError("zero-variance shifted sample has no interior PWM solution", best=None)
    target = empirical_pwms(tail)
    starts = [
        np.array([math.log(k), math.log(f * mean), xi])
        for k, f, xi in itertools.product(PWM_KAPPA_STARTS, PWM_SIGMA_FACTORS, PWM_XI_STARTS)
    ]
    order = sorted(range(len(starts)), key=lambda i: _pwm_objective(starts[i], target))
    best = None
    for idx in order:
        res = optimize.minimize(
            _pwm_objective,
            starts[idx],
            args=(target,),
            method="Nelder-Mead",
            options={"xatol": PWM_STEP_TOL, "fatol": 1e-16, "maxiter": 4000, "maxfev": 8000},
        )
        simplex = res.final_simplex[0]
        step = float(np.max(np.abs(simplex[1:] - simplex[0])) / max(1.0, float(np.max(np.abs(simplex[0])))))
        ok = res.fun < PWM_OBJECTIVE_TOL or step < PWM_STEP_TOL
        cand = (res.fun, ok, idx, res)
        if best is None or (ok, -res.fun) > (best[1], -best[0]):
            best = cand
        if res.fun < PWM_OBJECTIVE_TOL:
            break
    fun, ok, idx, res = best
    kappa, sigma, xi = _decode(res.x)
    result = FitResult(
        Egpd1Params(kappa, sigma, xi),
        n_obs=int(tail.size),
        converged=bool(ok),
        iterations=int(res.nit),
        objective=float(fun),
        restart=int(idx),
        extra={"xi_at_clamp": abs(res.x[2]) >= XI_CLAMP},
    )
    if not ok:
        raise NonConvergedError(f"no PWM start reached tolerance (best objective {fun:.3g})", best=result)
    return result


def fit_hdegpd(dry_durations, min_tail_count: int = 10, shift: float = 2.0) -> FitResult:
    """Empirical f1 plus PWM eGPD on the shifted tail."""
    x = _as_durations(dry_durations)
    f1 = estimate_f1(x)
    try:
        egpd = pwm_fit_egpd(x, min_tail_count, shift)
    except NonConvergedError as exc:
        if exc.best is not None:
            exc.best = _with_f1(exc.best, f1, x.size)
        raise
    return _with_f1(egpd, f1, x.size)


def _with_f1(res: FitResult, f1: float, n: int) -> FitResult:
    e = res.params
    return FitResult(
        HdeGpdParams(f1, e.kappa, e.sigma, e.xi),
        n_obs=n,
        converged=res.converged,
        iterations=res.iterations,
        objective=res.objective,
        restart=res.restart,
        extra=res.extra,
    )


# -------------------------------------------------------------------- EM


def _log_geom(values: np.ndarray, p: float) -> np.ndarray:
    # log p + (d - 1) log(1 - p), with 0 * log 0 = 0 at d = 1, p = 1
    return math.log(p) + xlog1py(values - 1.0, -p)


def _em_loglik(values, counts, pi, p1, p2) -> tuple[float, np.ndarray]:
    with np.errstate(divide="ignore"):
        la = (math.log(pi) if pi > 0 else -math.inf) + _log_geom(values, p1)
        lb = (math.log1p(-pi) if pi < 1 else -math.inf) + _log_geom(values, p2)
    top = np.maximum(la, lb)
    lse = top + np.log(np.exp(la - top) + np.exp(lb - top))
    w = np.exp(la - lse)
    return float(np.dot(counts, lse)), w


def em_step(values, counts, pi: float, p1: float, p2: float) -> tuple[float, float, float]:
    """One E + M update on a (value, multiplicity) sample."""
    _, w = _em_loglik(values, counts, pi, p1, p2)
    return _m_step(values, counts, w, pi, p1, p2)


def _m_step(values, counts, w, pi, p1, p2):
    n = float(counts.sum())
    w1 = float(np.dot(counts, w))
    w2 = float(n - w1)
    new_pi = w1 / n
    new_p1 = w1 / float(np.dot(counts * w, values)) if w1 > 0 else p1
    new_p2 = w2 / float(np.dot(counts * (1.0 - w), values)) if w2 > 0 else p2
    return new_pi, min(new_p1, 1.0), min(new_p2, 1.0)


def _em_run(values, counts, pi, p1, p2, rel_tol, max_iter):
    ll, w = _em_loglik(values, counts, pi, p1, p2)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pi, p1, p2 = _m_step(values, counts, w, pi, p1, p2)
        new_ll, w = _em_loglik(values, counts, pi, p1, p2)
        if new_ll < ll - EM_SLACK * max(1.0, abs(ll)):
            raise RuntimeError(f"EM log-likelihood decreased at iteration {it}: {ll!r} -> {new_ll!r}")
        trace.append(new_ll)
        done = abs(new_ll - ll) <= rel_tol * abs(ll)
        ll = new_ll
        if done:
            converged = True
            break
    return (pi, p1, p2), ll, it, converged, trace


def em_fit_geommix(
    wet_durations,
    n_restarts: int = 10,
    rel_tol: float = 1e-6,
    max_iter: int = 500,
    seed: int = 0,
) -> FitResult:
    """Two-component geometric mixture by EM, best of ``n_restarts`` random starts.

    Restart ``k`` draws its start from ``derive_rng(seed, "em", k)``; the winner is
    relabelled so that p1 >= p2. ``extra["loglik_trace"]`` holds the winner's
    log-likelihood per iteration.
    """
    x = _as_durations(wet_durations)
    uniq, cnt = np.unique(x, return_counts=True)
    values = uniq.astype(float)
    counts = cnt.astype(float)
    best = None
    for k in range(n_restarts):
        rng = derive_rng(seed, "em", k)
        u = rng.random(3)
        pi0 = 0.1 + 0.8 * u[0]
        pa, pb = sorted(0.05 + 0.9 * u[1:], reverse=True)
        theta, ll, its, conv, trace = _em_run(values, counts, pi0, float(pa), float(pb), rel_tol, max_iter)
        if best is None or ll > best[1]:
            best = (theta, ll, its, conv, trace, k)
    (pi, p1, p2), ll, its, conv, trace, k = best
    if p1 < p2:
        pi, p1, p2 = 1.0 - pi, p2, p1
    return FitResult(
        GeomMixParams(pi, p1, p2),
        n_obs=int(x.size),
        converged=conv,
        iterations=its,
        objective=ll,
        restart=k,
        extra={"loglik_trace": trace},
    )
