"""Model checks: exit-probability curves, the chi-squared exit-probability test,
pooled bivariate ACF of spell cycles, and parametric-bootstrap Q-Q envelopes."""
from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .core import exit_probs_from_distribution
from .distributions import DurationDistribution
from .errors import InsufficientDataError
from .rng import derive_rng
from .special import chi2_survival

AUTO = "AUTO"
MAX_CONDITION = 1e12
MIN_DMAX = 3


def tail_counts(durations, d_max: int) -> np.ndarray:
    """N(d) = #{tau >= d} for d = 1..d_max + 1."""
    x = np.asarray(durations, dtype=np.int64)
    hist = np.bincount(np.minimum(x, d_max + 2), minlength=d_max + 3)
    return np.cumsum(hist[::-1])[::-1][1 : d_max + 2]


def empirical_exit_probs(durations, d_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(q_emp, counts) on d = 1..d_max; q_emp is NaN where N(d) = 0."""
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    n = tail_counts(durations, d_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = (n[:-1] - n[1:]) / n[:-1]
    q[n[:-1] == 0] = np.nan
    return q, n[:-1].copy()


def model_exit_probs(dist: DurationDistribution, d_max: int) -> np.ndarray:
    return exit_probs_from_distribution(dist).values(d_max)


@dataclass(frozen=True)
class ExitCurve:
    d: np.ndarray
    q_model: np.ndarray
    q_emp: np.ndarray
    band_sd: np.ndarray
    counts: np.ndarray

    def rows(self):
        for i in range(self.d.size):
            yield int(self.d[i]), float(self.q_model[i]), float(self.q_emp[i]), float(self.band_sd[i]), int(self.counts[i])


def exit_curve(durations, dist: DurationDistribution, d_max: int) -> ExitCurve:
    """Model and empirical exit probabilities with binomial bands sqrt(q(1-q)/N(d))."""
    q_emp, counts = empirical_exit_probs(durations, d_max)
    q_mod = model_exit_probs(dist, d_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        sd = np.sqrt(q_mod * (1.0 - q_mod) / counts)
    sd[counts == 0] = np.nan
    return ExitCurve(np.arange(1, d_max + 1), q_mod, q_emp, sd, counts)


# ------------------------------------------------------------ chi-squared


@dataclass(frozen=True)
class GofResult:
    statistic: float
    dof: int
    p_value: float
    d_max: int
    n_spells: int
    singular: bool = False
    condition: float = 0.0

    @property
    def status(self) -> str:
        return "SINGULAR" if self.singular else "OK"


def auto_d_max(durations, min_tail_count: int = 20) -> int:
    """Largest d with at least ``min_tail_count`` spells of duration >= d, floored at 3."""
    x = np.asarray(durations, dtype=np.int64)
    if x.size == 0:
        return MIN_DMAX
    top = int(x.max())
    n = tail_counts(x, top)
    ok = np.flatnonzero(n >= min_tail_count)
    d = int(ok[-1]) + 1 if ok.size else 0
    return max(d, MIN_DMAX)


def gof_matrices(survival: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sigma and T for survival values S(1)..S(k), k = d_max - 1."""
    s = np.asarray(survival, dtype=float)
    k = s.size
    idx = np.arange(k)
    sigma = s[np.maximum.outer(idx, idx)] - np.outer(s, s)
    t = np.zeros((k, k))
    t[0, 0] = -1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(1, k):
            t[i, i - 1] = s[i] / s[i - 1] ** 2
            t[i, i] = -1.0 / s[i - 1]
    return sigma, t


def gof_test(durations, dist: DurationDistribution, d_max=AUTO, min_tail_count: int = 20) -> GofResult:
    """Chi-squared test of fitted exit probabilities against empirical ones on d < d_max.

    Q = N * D' (T S T')^{-1} D with N the number of spells and D the difference
    of empirical and model exit probabilities; Q ~ chi2(d_max - 1) under the model.
    """
    x = np.asarray(durations, dtype=np.int64)
    if d_max == AUTO:
        d_max = auto_d_max(x, min_tail_count)
    d_max = int(d_max)
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    n_spells = int(x.size)
    if n_spells < d_max + 5:
        raise InsufficientDataError(f"{n_spells} spells, need at least d_max + 5 = {d_max + 5}")
    k = d_max - 1
    q_emp, _ = empirical_exit_probs(x, k)
    if np.any(np.isnan(q_emp)):
        raise InsufficientDataError(f"no spell reaches duration {int(np.argmax(np.isnan(q_emp))) + 1}")
    q_mod = model_exit_probs(dist, k)
    surv = np.asarray(dist.survival(np.arange(1, k + 1)), dtype=float)
    sigma, t = gof_matrices(surv)
    cov = t @ sigma @ t.T
    delta = q_emp - q_mod
    if not np.all(np.isfinite(cov)):
        return GofResult(math.nan, k, math.nan, d_max, n_spells, singular=True, condition=math.inf)
    cond = float(np.linalg.cond(cov))
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        return GofResult(math.nan, k, math.nan, d_max, n_spells, singular=True, condition=cond)
    q = float(n_spells * delta @ np.linalg.solve(cov, delta))
    q = max(q, 0.0)
    return GofResult(q, k, chi2_survival(q, k), d_max, n_spells, condition=cond)


# -------------------------------------------------------------------- ACF


@dataclass(frozen=True)
class AcfMatrix:
    """R[l] is the 2x2 (dry, wet) autocorrelation matrix at lag l; ``status`` is OK or DEGENERATE."""

    lags: np.ndarray
    R: np.ndarray
    counts: np.ndarray
    status: str = "OK"

    @property
    def bound(self) -> np.ndarray:
        return 2.0 / np.sqrt(self.counts)


def acf_bivariate(cycles, L: int) -> AcfMatrix:
    """Pooled within-year autocorrelation of (dry, wet) cycle vectors.

    ``cycles`` is a SpellDataset or a mapping year -> ordered (dry, wet) pairs.
    Pairs (k, k + l) are only formed inside one year; the centring uses the
    grand mean over every cycle.
    """
    if not isinstance(cycles, Mapping):
        cycles = cycles.cycles_per_year
    blocks = [np.asarray(v, dtype=float).reshape(-1, 2) for _, v in sorted(cycles.items()) if len(v)]
    total = sum(b.shape[0] for b in blocks)
    if total < 2:
        raise InsufficientDataError(f"{total} cycles, need at least 2")
    mean = np.concatenate(blocks).mean(axis=0)
    centred = [b - mean for b in blocks]
    gammas, counts = [], []
    for lag in range(L + 1):
        c = sum(max(b.shape[0] - lag, 0) for b in centred)
        if c == 0:
            break
        g = sum(b[: b.shape[0] - lag].T @ b[lag:] for b in centred if b.shape[0] > lag)
        gammas.append(g / c)
        counts.append(c)
    gam = np.array(gammas)
    var = np.diag(gam[0])
    lags = np.arange(len(counts))
    if np.any(var <= 0):
        return AcfMatrix(lags, np.full(gam.shape, np.nan), np.array(counts), status="DEGENERATE")
    scale = 1.0 / np.sqrt(var)
    r = gam * scale[None, :, None] * scale[None, None, :]
    return AcfMatrix(lags, r, np.array(counts))


# --------------------------------------------------------------------- QQ


@dataclass(frozen=True)
class QqEnvelope:
    recorded: np.ndarray
    simulated: np.ndarray  # per-rank median over replicates
    lower: np.ndarray
    upper: np.ndarray
    multiplicity: np.ndarray  # number of ranks sharing this (recorded, simulated) pair
    B: int

    def coverage(self) -> float:
        return float(np.mean((self.recorded >= self.lower) & (self.recorded <= self.upper)))


def qq_envelope(durations, dist: DurationDistribution, B: int = 1000, alpha: float = 0.05, seed: int = 0) -> QqEnvelope:
    """Pointwise (1 - alpha) envelope for each order statistic under ``dist``.

    Replicate ``b`` is drawn from ``derive_rng(seed, "qq", b)``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    rec = np.sort(np.asarray(durations, dtype=np.int64))
    n = rec.size
    sims = np.empty((B, n), dtype=np.int64)
    for b in range(B):
        sims[b] = np.sort(dist.sample(derive_rng(seed, "qq", b), n))
    lower = np.quantile(sims, alpha / 2, axis=0)
    upper = np.quantile(sims, 1 - alpha / 2, axis=0)
    mid = np.quantile(sims, 0.5, axis=0)
    pairs = np.stack([rec.astype(float), mid])
    _, inverse, cnt = np.unique(pairs, axis=1, return_inverse=True, return_counts=True)
    mult = cnt[inverse.ravel()]
    return QqEnvelope(rec, mid, lower, upper, mult, B)
