"""The duration-augmented binary chain: exit probabilities, simulation, renewal view.

A chain state is a pair (r, d): regime r (0 dry, 1 wet) and the number of days
d >= 1 already spent in the current spell. From (r, d) the chain moves to
(1 - r, 1) with probability q^(r)_d and to (r, d + 1) otherwise. The
sequence q^(r) and the spell-duration law of regime r determine each other:

    q_d = P(tau = d) / P(tau >= d)        (q_d = 1 when P(tau >= d) = 0)
    P(tau > d) = prod_{k <= d} (1 - q_k)
"""
from __future__ import annotations

import csv
import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import DurationDistribution
from .rng import as_rng

# Tabulation stops once the model survival falls below this floor.
SURVIVAL_FLOOR = 1e-12
MAX_TABULATION = 2**24


class ExitProbabilitySequence(ABC):
    """d -> q_d for d >= 1."""

    @abstractmethod
    def __call__(self, d) -> np.ndarray:
        ...

    def values(self, horizon: int) -> np.ndarray:
        return np.asarray(self(np.arange(1, horizon + 1)), dtype=float)

    def tabulate(self, horizon: int) -> "TabulatedExitProbs":
        """Freeze q_1..q_horizon; beyond the table q stays at its last value."""
        vals = self.values(horizon)
        return TabulatedExitProbs(vals, tail=float(vals[-1]))

    def log_survival(self, n: int) -> float:
        """sum_{d <= n} log(1 - q_d), accumulated in chunks."""
        total = 0.0
        start = 1
        chunk = 1 << 16
        while start <= n:
            stop = min(n, start + chunk - 1)
            q = np.asarray(self(np.arange(start, stop + 1)), dtype=float)
            if np.any(q >= 1.0):
                return -math.inf
            total += float(np.sum(np.log1p(-q)))
            start = stop + 1
        return total


class TabulatedExitProbs(ExitProbabilitySequence):
    """Explicit q_1..q_H plus a constant exit probability ``tail`` for d > H."""

    def __init__(self, values, tail: float):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("need a non-empty 1-d table of exit probabilities")
        if np.any((values < 0) | (values > 1)) or not 0.0 <= tail <= 1.0:
            raise ValueError("exit probabilities must lie in [0, 1]")
        self.table = values
        self.tail = float(tail)

    @property
    def horizon(self) -> int:
        return self.table.size

    def __call__(self, d):
        d = np.asarray(d, dtype=np.int64)
        if np.any(d < 1):
            raise ValueError("exit probabilities are indexed from d = 1")
        out = np.full(d.shape, self.tail, dtype=float)
        inside = d <= self.horizon
        out[inside] = self.table[d[inside] - 1]
        return out if out.ndim else float(out)

    def tabulate(self, horizon: int) -> "TabulatedExitProbs":
        if horizon == self.horizon:
            return self
        if horizon < self.horizon:
            return TabulatedExitProbs(self.table[:horizon], tail=float(self.table[horizon - 1]))
        return TabulatedExitProbs(self.values(horizon), tail=self.tail)

    def log_survival(self, n: int) -> float:
        head = self.table[: min(n, self.horizon)]
        if np.any(head >= 1.0):
            return -math.inf
        total = float(np.sum(np.log1p(-head)))
        extra = n - self.horizon
        if extra > 0:
            if self.tail >= 1.0:
                return -math.inf
            total += extra * math.log1p(-self.tail)
        return total

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d", "q"])
            for d, q in enumerate(self.table, start=1):
                w.writerow([d, repr(float(q))])


class FunctionExitProbs(ExitProbabilitySequence):
    """Wrap a vectorised callable d -> q_d."""

    def __init__(self, func):
        self.func = func

    def __call__(self, d):
        return np.asarray(self.func(np.asarray(d)), dtype=float)


class DistributionExitProbs(ExitProbabilitySequence):
    """Exit probabilities implied by a duration law."""

    def __init__(self, dist: DurationDistribution):
        self.dist = dist

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        scalar = d.ndim == 0
        d = np.atleast_1d(d)
        if np.any(d < 1):
            raise ValueError("exit probabilities are indexed from d = 1")
        prev = np.atleast_1d(self.dist.survival(d - 1.0))
        mass = np.atleast_1d(self.dist.pmf(d))
        q = np.ones_like(d)
        ok = prev > 0
        q[ok] = np.clip(mass[ok] / prev[ok], 0.0, 1.0)
        return float(q[0]) if scalar else q

    def tabulate(self, horizon: int) -> TabulatedExitProbs:
        vals = self.values(horizon)
        bound = self.dist.support_max
        if bound is not None and bound <= horizon:
            tail = 1.0
        else:
            tail = float(vals[-1])
        return TabulatedExitProbs(vals, tail=tail)

    def log_survival(self, n: int) -> float:
        # the partial product telescopes to the survival function
        s = float(self.dist.survival(n))
        return math.log(s) if s > 0 else -math.inf

    def tabulation_horizon(self, floor: float = SURVIVAL_FLOOR, cap: int = MAX_TABULATION) -> int:
        """Smallest d with survival(d) < floor (bounded support: the support end), capped."""
        bound = self.dist.support_max
        if bound is not None:
            return max(1, min(bound, cap))
        h = 64
        while h < cap and float(self.dist.survival(h)) >= floor:
            h *= 2
        h = min(h, cap)
        lo = h // 2
        if lo >= 1 and float(self.dist.survival(h)) < floor:
            # bisection for the first d below the floor
            while h - lo > 1:
                mid = (lo + h) // 2
                if float(self.dist.survival(mid)) < floor:
                    h = mid
                else:
                    lo = mid
        return h


def exit_probs_from_distribution(dist: DurationDistribution) -> DistributionExitProbs:
    return DistributionExitProbs(dist)


def tabulate_for_simulation(q: ExitProbabilitySequence) -> TabulatedExitProbs:
    """Table up to survival < 1e-12, tail rule = last tabulated value (1 for bounded support)."""
    if isinstance(q, TabulatedExitProbs):
        return q
    if isinstance(q, DistributionExitProbs):
        return q.tabulate(q.tabulation_horizon())
    raise TypeError("cannot choose a tabulation horizon for an arbitrary callable; call .tabulate(h)")


class TabulatedDistribution(DurationDistribution):
    """pmf on 1..H, plus residual mass continued geometrically with exit probability ``tail_exit``."""

    def __init__(self, pmf_values, tail_mass: float = 0.0, tail_exit: float = 1.0):
        p = np.asarray(pmf_values, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0):
            raise ValueError("pmf table must be a non-empty nonnegative vector")
        self.table = p
        self.tail_mass = float(max(tail_mass, 0.0))
        self.tail_exit = float(tail_exit)
        # survival on 0..H accumulated from the right to avoid 1 - cumsum cancellation
        rev = np.cumsum(p[::-1])[::-1]
        self._surv = np.concatenate([rev, [0.0]]) + self.tail_mass

    @property
    def horizon(self) -> int:
        return self.table.size

    def pmf(self, d):
        d = np.asarray(d, dtype=np.int64)
        out = np.zeros(d.shape, dtype=float)
        inside = (d >= 1) & (d <= self.horizon)
        out[inside] = self.table[d[inside] - 1]
        beyond = d > self.horizon
        if np.any(beyond) and self.tail_mass > 0:
            k = d[beyond] - self.horizon
            out[beyond] = self.tail_mass * self.tail_exit * (1.0 - self.tail_exit) ** (k - 1)
        return out if out.ndim else float(out)

    def survival(self, d):
        d = np.asarray(d, dtype=np.int64)
        out = np.ones(d.shape, dtype=float)
        inside = (d >= 0) & (d <= self.horizon)
        out[inside] = self._surv[d[inside]]
        beyond = d > self.horizon
        if np.any(beyond):
            k = d[beyond] - self.horizon
            out[beyond] = self.tail_mass * (1.0 - self.tail_exit) ** k
        return out if out.ndim else float(out)

    def sample(self, rng, size):
        u = rng.random(size)
        cdf = 1.0 - self._surv[1:]
        idx = np.searchsorted(cdf, u, side="right")
        out = idx.astype(np.int64) + 1
        over = idx >= self.horizon
        if np.any(over):
            if self.tail_exit <= 0:
                raise ValueError("cannot sample from a law with infinite-duration mass")
            # geometric continuation beyond the table
            v = (u[over] - cdf[-1]) / max(self.tail_mass, 1e-300)
            v = np.clip(v, 0.0, np.nextafter(1.0, 0.0))
            if self.tail_exit >= 1.0:
                k = np.ones(v.shape, dtype=np.int64)
            else:
                k = 1 + np.floor(np.log1p(-v) / math.log1p(-self.tail_exit)).astype(np.int64)
            out[over] = self.horizon + k
        return out

    def mean(self):
        d = np.arange(1, self.horizon + 1, dtype=float)
        head = math.fsum(d * self.table)
        if self.tail_mass == 0:
            return head
        if self.tail_exit <= 0:
            return math.inf
        return head + self.tail_mass * (self.horizon + 1.0 / self.tail_exit)

    @property
    def support_max(self):
        if self.tail_mass > 0:
            return None
        nz = np.flatnonzero(self.table)
        return int(nz[-1]) + 1 if nz.size else 1


def distribution_from_exit_probs(q: ExitProbabilitySequence, horizon: int) -> TabulatedDistribution:
    """Tabulate pmf(d) = q_d prod_{k<d}(1 - q_k) for d <= horizon; keep the residual mass."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    tab = q if isinstance(q, TabulatedExitProbs) and q.horizon >= horizon else q.tabulate(horizon)
    qs = tab.values(horizon)
    surv = np.cumprod(1.0 - qs)
    prev = np.concatenate([[1.0], surv[:-1]])
    pmf = qs * prev
    tail_exit = tab.tail if horizon == tab.horizon else float(tab.table[horizon])
    return TabulatedDistribution(pmf, tail_mass=float(surv[-1]), tail_exit=tail_exit)


class Finiteness(str, enum.Enum):
    CERTIFIED_FINITE = "CERTIFIED_FINITE"
    INCONCLUSIVE = "INCONCLUSIVE"


def check_finiteness(q: ExitProbabilitySequence, budget: int, s_cert: float = 50.0) -> Finiteness:
    """Certify that spells end a.s. from the first ``budget`` exit probabilities.

    The residual mass P(tau > n) equals exp(sum_{d<=n} log(1 - q_d)) <= exp(-sum q_d);
    once that log-sum drops below -s_cert the infinite-duration mass is provably
    below e^{-s_cert}. Divergence of sum q_d can never be refuted from a finite
    prefix, so the answer is never "infinite".
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    return Finiteness.CERTIFIED_FINITE if -q.log_survival(budget) > s_cert else Finiteness.INCONCLUSIVE


@dataclass(frozen=True)
class ChainPath:
    """Regimes and elapsed durations at times 0..n-1."""

    r: np.ndarray
    d: np.ndarray

    def __len__(self):
        return self.r.size

    def states(self) -> list[tuple[int, int]]:
        return list(zip(self.r.tolist(), self.d.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "r", "d"])
            for k, (r, d) in enumerate(zip(self.r.tolist(), self.d.tolist())):
                w.writerow([k, r, d])


def simulate_chain(
    q0: ExitProbabilitySequence,
    q1: ExitProbabilitySequence,
    n_steps: int,
    seed=None,
) -> ChainPath:
    """Run the chain from (0, 1) for ``n_steps`` states, one uniform per transition."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = as_rng(seed)
    # durations never exceed n_steps, so a table of that length is exact
    tables = []
    for q in (q0, q1):
        t = q.tabulate(n_steps) if not isinstance(q, TabulatedExitProbs) or q.horizon < n_steps else q
        tables.append(t.table[:n_steps].tolist())
    u = rng.random(n_steps - 1).tolist()
    r, d = 0, 1
    qa, qb = tables
    rlist = [0] * n_steps
    dlist = [1] * n_steps
    for k in range(1, n_steps):
        qr = qb if r else qa
        if u[k - 1] < qr[d - 1]:
            r = 1 - r
            d = 1
        else:
            d += 1
        rlist[k] = r
        dlist[k] = d
    return ChainPath(np.asarray(rlist, dtype=np.int8), np.asarray(dlist, dtype=np.int64))


def run_lengths(states) -> tuple[np.ndarray, np.ndarray]:
    """(values, lengths) of the maximal constant runs of a 1-d sequence."""
    x = np.asarray(states)
    if x.size == 0:
        return x[:0], np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(x[1:] != x[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [x.size]])
    return x[starts], (ends - starts).astype(np.int64)


def spells_from_path(path: ChainPath) -> tuple[np.ndarray, np.ndarray]:
    """Dry and wet spell durations; the trailing spell is censored and dropped."""
    vals, lens = run_lengths(path.r)
    keep = np.ones(vals.size, dtype=bool)
    if keep.size:
        keep[-1] = False
        if path.d[0] != 1:
            keep[0] = False
    return lens[keep & (vals == 0)], lens[keep & (vals == 1)]


@dataclass(frozen=True)
class RenewalView:
    renewal_times: np.ndarray  # T_0 = 0, T_k = sum of the first k cycle lengths

    def count(self, n):
        """N_n = max{k : T_k <= n}."""
        out = np.searchsorted(self.renewal_times, np.asarray(n), side="right") - 1
        return out if np.ndim(out) else int(out)


def renewal_view(dry, wet) -> RenewalView:
    dry = np.asarray(dry, dtype=np.int64)
    wet = np.asarray(wet, dtype=np.int64)
    if dry.shape != wet.shape:
        raise ValueError(f"need paired dry/wet lists, got lengths {dry.size} and {wet.size}")
    return RenewalView(np.concatenate([[0], np.cumsum(dry + wet)]))


def renewal_count_from_path(path: ChainPath) -> np.ndarray:
    """N_n for every n, from the path: (number of visits to (0, 1) up to n) - 1."""
    hits = (path.r == 0) & (path.d == 1)
    return np.cumsum(hits) - 1


def spells_to_csv(dry, wet, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "index", "duration"])
        for kind, arr in (("dry", dry), ("wet", wet)):
            for i, v in enumerate(np.asarray(arr).tolist()):
                w.writerow([kind, i, v])
