"""Monte Carlo and exhaustive checks that the concentration and hashing bounds hold."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import postprocessing as pp
from . import stats

MIN_TRIALS = 10**4


@dataclass(frozen=True)
class CoverageResult:
    name: str
    observed: float
    bound: float
    sigma: float
    trials: int
    status: str  # "pass", "fail" or "insufficient"

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        return (
            f"{self.status.upper():12s} {self.name}: observed={self.observed:.6g} "
            f"bound={self.bound:.6g} (+3 sigma={3 * self.sigma:.3g}, trials={self.trials})"
        )

    def as_dict(self) -> dict:
        return asdict(self)


def _judge(name: str, hits: int, trials: int, bound: float) -> CoverageResult:
    observed = hits / trials
    sigma = math.sqrt(max(bound * (1 - bound), 0.0) / trials)
    if trials < MIN_TRIALS:
        status = "insufficient"
    else:
        status = "pass" if observed <= bound + 3 * sigma else "fail"
    return CoverageResult(name, observed, bound, sigma, trials, status)


def hoeffding_coverage(n: int, p: float, delta: float, trials: int, rng: np.random.Generator) -> CoverageResult:
    """Frequency of ``mean - p >= delta`` for ``n`` i.i.d. Bernoulli(p) samples."""
    means = rng.binomial(n, p, size=trials) / n
    hits = int(np.count_nonzero(means - p >= delta - 1e-12))
    return _judge(f"hoeffding n={n} p={p} delta={delta}", hits, trials, stats.hoeffding_tail(n, delta))


def serfling_coverage(
    values: np.ndarray, k: int, delta: float, trials: int, rng: np.random.Generator, batch: int = 2000
) -> CoverageResult:
    """Draw ``k`` of ``values`` without replacement; frequency of ``mean - mean(values) >= delta``."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    a, b = float(values.min()), float(values.max())
    if b == a:
        b = a + 1.0
    mu_all = values.mean()
    hits = 0
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        idx = np.argsort(rng.random((m, n)), axis=1)[:, :k]
        means = values[idx].mean(axis=1)
        hits += int(np.count_nonzero(means - mu_all >= delta - 1e-12))
        done += m
    bound = stats.serfling_tail(n, k, delta, (a, b))
    return _judge(f"serfling n={n} k={k} delta={delta}", hits, trials, bound)


def complement_coverage(
    n: int, ones: int, t: int, epsilon: float, trials: int, rng: np.random.Generator
) -> CoverageResult:
    """Random size-``t`` subset of a 0/1 list with ``ones`` ones; frequency of rest-minus-sample >= deviation."""
    d = stats.complement_deviation(n, t, epsilon)
    ones_t = rng.hypergeometric(ones, n - ones, t, size=trials)
    gap = (ones - ones_t) / (n - t) - ones_t / t
    hits = int(np.count_nonzero(gap >= d - 1e-12))
    return _judge(f"complement n={n} ones={ones} t={t} eps={epsilon}", hits, trials, epsilon)


def chsh_coverage(m_j: int, win_prob: float, epsilon: float, trials: int, rng: np.random.Generator) -> CoverageResult:
    """Frequency of ``S_test - S >= xi`` with i.i.d. rounds winning with ``win_prob``."""
    s_true = 8 * win_prob - 4
    s_test = 8 * rng.binomial(m_j, win_prob, size=trials) / m_j - 4
    hits = int(np.count_nonzero(s_test - s_true >= stats.xi(m_j, epsilon) - 1e-12))
    return _judge(f"chsh m_j={m_j} win={win_prob:.4f} eps={epsilon}", hits, trials, epsilon)


def toeplitz_exhaustive(n: int, ell: int) -> CoverageResult:
    """Worst exact collision probability over all input pairs; no sampling error."""
    worst = float(pp.exhaustive_collision_probabilities(n, ell).max())
    bound = 2.0**-ell
    status = "pass" if worst <= bound + 1e-15 else "fail"
    return CoverageResult(f"toeplitz exhaustive n={n} ell={ell}", worst, bound, 0.0, 2 ** (n + ell - 1), status)


def toeplitz_estimate(n: int, ell: int, trials: int, rng: np.random.Generator) -> CoverageResult:
    rate = pp.two_universality_estimate(n, ell, trials, rng)
    return _judge(f"toeplitz estimate n={n} ell={ell}", round(rate * trials), trials, 2.0**-ell)


def verify_coverage(n: int, eps_cor: float, trials: int, rng: np.random.Generator) -> CoverageResult:
    x_a = rng.integers(0, 2, size=n, dtype=np.uint8)
    x_b = x_a.copy()
    x_b[rng.integers(n)] ^= 1
    passes, _ = pp.verify_false_pass_rate(x_a, x_b, eps_cor, trials, rng)
    return _judge(f"verify false-pass n={n} eps_cor={eps_cor:.3g}", passes, trials, eps_cor)


def run_bound_checks(trials: int = 10**5, seed: int = 0) -> list[CoverageResult]:
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for n, p, delta in [(20, 0.5, 0.1), (100, 0.3, 0.05), (400, 0.8, 0.03)]:
        out.append(hoeffding_coverage(n, p, delta, trials, rng))
    serfling_lists = [
        (np.repeat([0.0, 1.0], [30, 30]), 40, 0.08),
        (rng.random(80), 20, 0.1),
        (rng.uniform(-1.0, 2.0, size=50), 45, 0.05),
    ]
    for values, k, delta in serfling_lists:
        out.append(serfling_coverage(values, k, delta, trials, rng))
    for n, ones, t, eps in [(200, 100, 100, 0.2), (1000, 300, 200, 0.1), (500, 50, 400, 0.05)]:
        out.append(complement_coverage(n, ones, t, eps, trials, rng))
    out.append(chsh_coverage(1000, (2 + math.sqrt(2)) / 4, 0.1, trials, rng))
    for n, ell in [(8, 1), (8, 3), (12, 2)]:
        out.append(toeplitz_exhaustive(n, ell))
    out.append(toeplitz_estimate(16, 4, trials, rng))
    out.append(verify_coverage(16, 2.0**-10, 10 * trials, rng))
    return out
