"""Monte Carlo recovery bands for the geometric-mixture fit.

    python scripts/em_prestudy.py

Draws 200 samples of size 5000 from (pi, p1, p2) = (0.4, 0.7, 0.15) with
numpy's own geometric sampler, fits each by direct maximum likelihood
(L-BFGS-B on the logit-transformed parameters, no EM) and writes the 2.5% and
97.5% quantiles of each estimate to tests/data/em_bands.json. The bands are
therefore independent of the package's sampler and of its EM code.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import expit, logsumexp

TRUE = (0.4, 0.7, 0.15)
N = 5000
REPS = 200
SEED = 20240601
OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "em_bands.json"


def draw(rng, n):
    pi, p1, p2 = TRUE
    first = rng.random(n) < pi
    return np.where(first, rng.geometric(p1, n), rng.geometric(p2, n))


def mle(x):
    vals, cnt = np.unique(x, return_counts=True)

    def nll(t):
        pi, p1, p2 = expit(t)
        la = np.log(pi) + np.log(p1) + (vals - 1) * np.log1p(-p1)
        lb = np.log1p(-pi) + np.log(p2) + (vals - 1) * np.log1p(-p2)
        return -float(np.dot(cnt, logsumexp([la, lb], axis=0)))

    best = None
    for start in ([0.0, 1.0, -1.5], [0.5, 0.5, -2.0], [-0.5, 2.0, -1.0]):
        res = optimize.minimize(nll, start, method="L-BFGS-B")
        if best is None or res.fun < best.fun:
            best = res
    pi, p1, p2 = expit(best.x)
    if p1 < p2:
        pi, p1, p2 = 1 - pi, p2, p1
    return pi, p1, p2


def main():
    rng = np.random.default_rng(SEED)
    est = np.array([mle(draw(rng, N)) for _ in range(REPS)])
    bands = {
        name: [float(np.quantile(est[:, i], 0.025)), float(np.quantile(est[:, i], 0.975))]
        for i, name in enumerate(("pi", "p1", "p2"))
    }
    payload = {"true": dict(zip(("pi", "p1", "p2"), TRUE)), "n": N, "replicates": REPS, "seed": SEED,
               "bands": bands}
    OUT.write_text(json.dumps(payload, indent=1) + "\n")
    print(json.dumps(payload, indent=1))


if __name__ == "__main__":
    main()
