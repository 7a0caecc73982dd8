"""Concentration inequalities and the finite-size deviation terms.

Tails are evaluated through their logarithm so that arguments such as
``eps = 1e-300`` or tails of order ``exp(-200)`` stay finite. Each ``*_tail``
has a ``log_*_tail`` twin for callers that need the exponent itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _log_inv(epsilon: float) -> float:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"failure probability must lie in (0, 1], got {epsilon}")
    return -math.log(epsilon)


def _check_size(name: str, value: int) -> None:
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")


def log_hoeffding_tail(n: int, delta: float) -> float:
    _check_size("n", n)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return -2.0 * delta * delta * n


def hoeffding_tail(n: int, delta: float) -> float:
    """Upper bound on ``Pr[mean - E[mean] >= delta]`` for ``n`` independent [0,1] variables."""
    return math.exp(log_hoeffding_tail(n, delta))


def log_serfling_tail(n: int, k: int, delta: float, value_range: tuple[float, float] = (0.0, 1.0)) -> float:
    _check_size("n", n)
    _check_size("k", k)
    if k > n:
        raise ValueError(f"cannot draw k={k} from a list of n={n}")
    a, b = value_range
    if not b > a:
        raise ValueError("value range must satisfy b > a")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return -2.0 * delta * delta * k * n / ((n - k + 1) * (b - a))


def serfling_tail(n: int, k: int, delta: float, value_range: tuple[float, float] = (0.0, 1.0)) -> float:
    """Tail bound for the mean of ``k`` draws without replacement from ``n`` values in ``value_range``."""
    return math.exp(log_serfling_tail(n, k, delta, value_range))


def complement_deviation(n: int, t: int, epsilon: float) -> float:
    """Deviation ``d`` with ``Pr[mean(rest) - mean(sample) >= d] <= epsilon``.

    ``t`` is the size of a uniformly random subset of the ``n`` values in
    [0, 1]; "rest" is its complement. The value grows without bound as ``t``
    approaches ``n`` because the complement becomes a single element.
    """
    _check_size("t", t)
    if t >= n:
        raise ValueError(f"sample size t={t} must be smaller than n={n}")
    n, t = float(n), float(t)
    return math.sqrt(n / (2.0 * (n - t)) * (t + 1) / (t * t) * _log_inv(epsilon))


def xi(m_j: int, epsilon: float) -> float:
    """CHSH estimation deviation for a test sample of ``m_j`` rounds."""
    _check_size("m_j", m_j)
    return math.sqrt(32.0 / float(m_j) * _log_inv(epsilon))


def chsh_sampling_deviation(m_j: int, epsilon: float) -> float:
    """Same as :func:`xi`: ``Pr[S_test - S_J >= xi] <= epsilon``.

    The estimator is ``8 * win_rate - 4``, so a Hoeffding deviation ``d`` on
    the win rate becomes ``8 d`` on the CHSH value.
    """
    return xi(m_j, epsilon)


def zeta(m_x: int, m_j: int, eta: float, epsilon: float) -> float:
    """Deviation between the average overlaps of the key-candidate set and the CHSH set."""
    _check_size("m_x", m_x)
    _check_size("m_j", m_j)
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    m_x, m_j = float(m_x), float(m_j)  # numpy ints would overflow in m_j**2
    return math.sqrt(
        2.0 * (m_x + m_j * eta) / m_x * (m_j + 1) / (m_j * m_j) * _log_inv(epsilon)
    )


def mu(m_x: int, m_z: int, epsilon: float) -> float:
    """Deviation between the error rate on the test set and on the key set."""
    _check_size("m_x", m_x)
    _check_size("m_z", m_z)
    m_x, m_z = float(m_x), float(m_z)
    return math.sqrt((m_x + m_z) / m_x * (m_z + 1) / (m_z * m_z) * _log_inv(epsilon))


@dataclass(frozen=True)
class DeviationParams:
    m_x: int
    m_z: int
    m_j: int
    eta: float
    epsilon: float

    def __post_init__(self):
        for name in ("m_x", "m_z", "m_j"):
            _check_size(name, getattr(self, name))
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")

    def deviations(self) -> tuple[float, float, float]:
        """``(xi, zeta, mu)`` all at the same failure probability."""
        return (
            xi(self.m_j, self.epsilon),
            zeta(self.m_x, self.m_j, self.eta, self.epsilon),
            mu(self.m_x, self.m_z, self.epsilon),
        )
