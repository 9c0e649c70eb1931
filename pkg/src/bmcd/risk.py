"""Dry-spell risk metrics with certified error bounds.

For tau = 1 + ceil(X) with probability 1 - f1 (and tau = 1 otherwise),
P(tau > k) = (1 - f1) P(X > k - 1) for k >= 1, so every quantity below reduces
to tail sums of the eGPD survival S_X over the integers. Since S_X decreases,

    I(u) <= sum_{m >= u} S_X(m) <= I(u) + S_X(u),     I(u) = int_u^inf S_X,

and I(u) has a closed form through the incomplete beta function. The head
sum up to u - 1 is accumulated exactly (``math.fsum``); u doubles from 64
until the reported ratio is pinned down to the requested precision.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import ExitProbabilitySequence, TabulatedExitProbs, exit_probs_from_distribution, simulate_chain
from .distributions import (
    DurationDistribution,
    Egpd1Params,
    GeometricParams,
    GeomMixParams,
    HdeGpdParams,
    egpd1_support_bound,
    egpd1_survival,
    egpd1_tail_integral,
)
from .errors import MeanUndefinedError

U_START = 64
U_MAX = 2**26
# relative allowance for rounding in the special functions and survival evaluations
ROUNDING = 1e-12


class BoundStatus(str, enum.Enum):
    CONVERGED = "CONVERGED"
    EXACT = "EXACT"
    NON_CONVERGED = "NON_CONVERGED"


@dataclass(frozen=True)
class RiskBound:
    lower: float
    upper: float
    u_used: int
    target_precision: float
    status: BoundStatus = BoundStatus.CONVERGED

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def __contains__(self, x: float) -> bool:
        return self.lower <= x <= self.upper


class _TailSums:
    """Running bracket of sum_{m >= start} S_X(m) as u grows."""

    def __init__(self, egpd: Egpd1Params, start: int):
        self.egpd = egpd
        self.start = start
        self.parts: list[float] = []
        self.u = start
        self.bound = egpd1_support_bound(egpd)

    def advance_to(self, u: int) -> None:
        if u <= self.u:
            return
        m = np.arange(self.u, u, dtype=float)
        self.parts.append(math.fsum(egpd1_survival(self.egpd, m)))
        self.u = u

    @property
    def head(self) -> float:
        return math.fsum(self.parts)

    def bracket(self) -> tuple[float, float, float]:
        """(lower, upper, S_X(u)) for the tail sum from ``start``."""
        head = self.head
        s_u = float(egpd1_survival(self.egpd, float(self.u)))
        lo = head + egpd1_tail_integral(self.egpd, float(self.u))
        return lo, lo + s_u, s_u

    def exact(self) -> float:
        """Bounded support: sum every integer below the support end."""
        self.advance_to(max(self.start, math.ceil(self.bound)))
        return self.head


def _check_mean(egpd: Egpd1Params) -> None:
    if egpd.xi >= 1:
        raise MeanUndefinedError(f"dry-spell mean is infinite for xi >= 1 (xi={egpd.xi})")


def _ratio_bound(make_ratio, sums: _TailSums, precision: float) -> RiskBound:
    """Tighten u until make_ratio(lo, hi) is narrower than ``precision``."""
    if math.isfinite(sums.bound):
        s = sums.exact()
        lo, hi = make_ratio(s, s)
        return RiskBound(lo, hi, sums.u, precision, BoundStatus.EXACT)
    u = max(U_START, sums.start + 1)
    prev = None
    while True:
        sums.advance_to(u)
        lo_s, hi_s, _ = sums.bracket()
        lo, hi = make_ratio(lo_s, hi_s)
        if prev is not None:
            # the bracket on the tail sum is nested as u grows; keep the tightest
            lo, hi = max(lo, prev[0]), min(hi, prev[1])
        prev = (lo, hi)
        if hi - lo < precision:
            return RiskBound(lo, hi, u, precision, BoundStatus.CONVERGED)
        if u >= U_MAX:
            return RiskBound(lo, hi, u, precision, BoundStatus.NON_CONVERGED)
        u *= 2


def _pad(lo: float, hi: float, scale: float) -> tuple[float, float]:
    eps = ROUNDING * abs(scale)
    return lo - eps, hi + eps


def mean_residual_hdegpd(params: HdeGpdParams, d: int, precision: float = 1e-5) -> RiskBound:
    """Bounds on E[tau - d | tau > d] for a hurdle discretised eGPD."""
    if d < 0:
        raise ValueError("d must be >= 0")
    egpd = params.egpd
    _check_mean(egpd)
    c = 1.0 - params.f1
    if d == 0:
        if c == 0.0:
            return RiskBound(1.0, 1.0, 0, precision, BoundStatus.EXACT)
        sums = _TailSums(egpd, 0)

        def ratio(lo, hi):
            return _pad(1.0 + c * lo, 1.0 + c * hi, c * hi)

        return _ratio_bound(ratio, sums, precision)
    denom = c * float(egpd1_survival(egpd, float(d - 1)))
    if denom <= 0.0:
        raise MeanUndefinedError(f"P(tau > {d}) = 0; the residual duration is undefined")
    sums = _TailSums(egpd, d - 1)

    def ratio(lo, hi):
        return _pad(c * lo / denom, c * hi / denom, c * hi / denom)

    return _ratio_bound(ratio, sums, precision)


def mean_residual_geometric(params: GeometricParams, d: int = 0) -> float:
    """Memorylessness: E[tau - d | tau > d] = 1/p for every d."""
    if d < 0:
        raise ValueError("d must be >= 0")
    return 1.0 / params.p


def mean_residual_tabulated(q: ExitProbabilitySequence | DurationDistribution, d: int, horizon: int | None = None) -> RiskBound:
    """E[tau - d | tau > d] from tabulated exit probabilities.

    Conditional on reaching duration d, the spell survives j more days with
    probability prod_{k=d+1}^{d+j} (1 - q_k). Beyond the table the exit
    probability stays at the tail value t, so the remainder is geometric and
    sums to (last conditional survival) * (1 - t) / t.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    if isinstance(q, DurationDistribution):
        q = exit_probs_from_distribution(q)
    if not isinstance(q, TabulatedExitProbs):
        q = q.tabulate(horizon or max(4 * (d + 1), 1024))
    t = q.tail
    cond = np.cumprod(1.0 - q.table[d:])  # survival of days d+1..H given day d reached
    last = float(cond[-1]) if cond.size else 1.0
    if last > 0 and t <= 0:
        raise MeanUndefinedError("exit probability 0 beyond the table: infinite mean")
    rest = last * (1.0 - t) / t if last > 0 else 0.0
    value = math.fsum([1.0, *cond.tolist(), rest])
    return RiskBound(value, value, q.table.size, 0.0, BoundStatus.EXACT)


def _wet_mean(wet) -> float:
    if isinstance(wet, (GeomMixParams, GeometricParams)):
        return wet.mean()
    raise TypeError(f"unsupported wet-spell law {type(wet).__name__}")


def proportion_time_long_dry(
    dry: HdeGpdParams | GeometricParams,
    wet: GeomMixParams | GeometricParams,
    d: int,
    precision: float = 1e-5,
) -> RiskBound:
    """Bounds on E[(tau0 - d)_+] / E[tau0 + tau1], the long-run share of days
    spent more than d days into a dry spell."""
    if d < 0:
        raise ValueError("d must be >= 0")
    wet_mean = _wet_mean(wet)
    if isinstance(dry, GeometricParams):
        p = dry.p
        num = (1.0 - p) ** d / p
        val = num / (1.0 / p + wet_mean)
        return RiskBound(val, val, 0, precision, BoundStatus.EXACT)
    if not isinstance(dry, HdeGpdParams):
        raise TypeError(f"unsupported dry-spell law {type(dry).__name__}")
    egpd = dry.egpd
    _check_mean(egpd)
    c = 1.0 - dry.f1
    if c == 0.0:
        val = (1.0 if d == 0 else 0.0) / (1.0 + wet_mean)
        return RiskBound(val, val, 0, precision, BoundStatus.EXACT)
    full = _TailSums(egpd, 0)
    part = full if d <= 1 else _TailSums(egpd, d - 1)
    lead = 1.0 if d == 0 else 0.0
    if math.isfinite(full.bound):
        e_x = full.exact()
        tail = part.exact() if part is not full else e_x
        if d - 1 >= full.bound:
            tail = 0.0
        num = lead + c * tail
        den = 1.0 + c * e_x + wet_mean
        lo, hi = _pad(num / den, num / den, c * tail / den)
        return RiskBound(lo, hi, full.u, precision, BoundStatus.EXACT)
    u = max(U_START, d)
    prev = None
    while True:
        full.advance_to(u)
        part.advance_to(u)
        e_lo, e_hi, _ = full.bracket()
        t_lo, t_hi, _ = part.bracket()
        lo = (lead + c * t_lo) / (1.0 + c * e_hi + wet_mean)
        hi = (lead + c * t_hi) / (1.0 + c * e_lo + wet_mean)
        lo, hi = _pad(lo, hi, hi)
        if prev is not None:
            lo, hi = max(lo, prev[0]), min(hi, prev[1])
        prev = (lo, hi)
        if hi - lo < precision:
            return RiskBound(lo, hi, u, precision, BoundStatus.CONVERGED)
        if u >= U_MAX:
            return RiskBound(lo, hi, u, precision, BoundStatus.NON_CONVERGED)
        u *= 2


def asymptotic_reward_mc(
    q0: ExitProbabilitySequence,
    q1: ExitProbabilitySequence,
    w,
    n_steps: int,
    seed=None,
    default: float = 0.0,
) -> float:
    """Path average of w(r, d) over ``n_steps`` simulated chain states.

    ``w`` is an array of shape (2, H): w[r, d - 1] is the reward in state (r, d);
    states with d > H earn ``default``.
    """
    table = np.asarray(w, dtype=float)
    if table.ndim != 2 or table.shape[0] != 2:
        raise ValueError("reward table must have shape (2, H)")
    if np.any(table < 0) or default < 0:
        raise ValueError("rewards must be nonnegative")
    path = simulate_chain(q0, q1, n_steps, seed)
    h = table.shape[1]
    inside = path.d <= h
    vals = np.full(path.r.shape, float(default))
    vals[inside] = table[path.r[inside], path.d[inside] - 1]
    return float(vals.mean())
