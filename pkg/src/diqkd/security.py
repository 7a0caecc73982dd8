"""Finite-key length, asymptotic secret fraction and related bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional, Sequence

from . import stats

TSIRELSON = 2.0 * math.sqrt(2.0)
_S_SLACK = 1e-12


class InfeasibleError(ValueError):
    """No positive rate exists for the requested operating point."""


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def _chsh_term(s: float) -> float:
    """``(S/4) sqrt(8 - S^2)``, tolerant of rounding just above 2*sqrt(2)."""
    if s > TSIRELSON + _S_SLACK:
        raise ValueError(f"CHSH value {s} exceeds the quantum maximum")
    return s / 4.0 * math.sqrt(max(8.0 - s * s, 0.0))


def chsh_to_overlap(s: float) -> float:
    """Upper bound on the effective overlap of Alice's key measurements.

    Values below the classical bound 2 carry no information and map to 1.
    """
    if s < 2.0:
        return 1.0
    return 0.5 + _chsh_term(s) / 2.0


def overlap_efficiency_correction(c_tilde: float, eta: float) -> float:
    """Worst-case overlap of the passed rounds when only a fraction ``eta`` passed."""
    if eta <= 0.0 or eta > 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not 0.5 - 1e-12 <= c_tilde <= 1.0 + 1e-12:
        raise ValueError(f"overlap must lie in [1/2, 1], got {c_tilde}")
    return min(0.5 + (c_tilde - 0.5) / eta, 1.0)


def asymptotic_fraction(s_tol: float, eta_tol: float, q_tol: float) -> float:
    """Secret fraction in the limit of infinite block sizes with Shannon-limit reconciliation."""
    if s_tol < 2.0:
        raise ValueError(f"S_tol must be at least 2, got {s_tol}")
    if not 0.0 < eta_tol <= 1.0:
        raise ValueError(f"eta_tol must lie in (0, 1], got {eta_tol}")
    if not 0.0 <= q_tol <= 0.5:
        raise ValueError(f"Q_tol must lie in [0, 1/2], got {q_tol}")
    return 1.0 - math.log2(1.0 + _chsh_term(s_tol) / eta_tol) - 2.0 * binary_entropy(q_tol)


def min_transmission(
    s_tol: float,
    q_tol: float,
    eta_model: Callable[[float], float] = lambda t: t / 2.0,
    tol: float = 1e-4,
) -> float:
    """Smallest channel transmission with a positive asymptotic secret fraction.

    Returns 0.0 when the fraction is already positive as ``t -> 0``. Raises
    :class:`InfeasibleError` if it is not positive even at ``t = 1``.
    """

    def f(t: float) -> float:
        return asymptotic_fraction(s_tol, eta_model(t), q_tol)

    hi = 1.0
    if f(hi) <= 0.0:
        raise InfeasibleError(
            f"no positive fraction for t in (0, 1] at S_tol={s_tol}, Q_tol={q_tol}"
        )
    lo = 1e-12
    if f(lo) > 0.0:
        return 0.0
    while hi - lo > tol / 4:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol and bound parameters.

    ``leak_EC=None`` selects the default reconciliation model
    ``ceil(ec_efficiency * m_x * h(Q_tol + mu))``. ``ell=None`` means "use
    the largest secure length".
    """

    m_x: int
    m_z: int
    m_j: int
    S_tol: float
    Q_tol: float
    eta_tol: float
    eps_cor: float
    eps_sec: float
    leak_EC: Optional[float] = None
    ell: Optional[int] = None
    ec_efficiency: float = 1.1

    def __post_init__(self):
        for name in ("m_x", "m_z", "m_j"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.S_tol <= TSIRELSON + _S_SLACK:
            raise ValueError(f"S_tol must lie in [0, 2*sqrt(2)], got {self.S_tol}")
        if not 0.0 <= self.Q_tol < 0.5:
            raise ValueError(f"Q_tol must lie in [0, 1/2), got {self.Q_tol}")
        if not 0.0 < self.eta_tol <= 1.0:
            raise ValueError(f"eta_tol must lie in (0, 1], got {self.eta_tol}")
        for name in ("eps_cor", "eps_sec"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.leak_EC is not None and self.leak_EC < 0:
            raise ValueError("leak_EC must be nonnegative")
        if self.ell is not None and self.ell < 0:
            raise ValueError("ell must be nonnegative")

    def scaled(self, factor: float) -> "ProtocolParams":
        """Copy with all block sizes multiplied by ``factor`` (leak rescaled too)."""
        return replace(
            self,
            m_x=max(1, round(self.m_x * factor)),
            m_z=max(1, round(self.m_z * factor)),
            m_j=max(1, round(self.m_j * factor)),
            leak_EC=None if self.leak_EC is None else self.leak_EC * factor,
        )


@dataclass(frozen=True)
class EpsilonBudget:
    eps_Q: float
    eps_UCR: float
    eps_PA: float
    eps_cstar: float
    eps_CHSH: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    def total(self) -> float:
        return 4 * self.eps_Q + 2 * self.eps_UCR + self.eps_PA + self.eps_cstar + self.eps_CHSH

    def check(self, eps_sec: float, rtol: float = 1e-12) -> None:
        if self.total() > eps_sec * (1 + rtol):
            raise ValueError(
                f"epsilon budget {self.total():.6g} exceeds eps_sec={eps_sec:.6g}"
            )


def uniform_budget(eps_sec: float) -> EpsilonBudget:
    eps = eps_sec / 9.0
    return EpsilonBudget(eps, eps, eps, eps, eps)


@dataclass(frozen=True)
class SecurityReport:
    key_length: int
    secret_fraction: float
    xi: float
    zeta: float
    mu: float
    S_hat: float
    Q_hat: float
    feasible: bool
    status: str
    penalty: float
    leak_EC: float
    raw_length: float
    m_x: int

    def as_dict(self) -> dict:
        return asdict(self)


def default_leak(m_x: int, q_hat: float, ec_efficiency: float = 1.1) -> float:
    return float(math.ceil(ec_efficiency * m_x * binary_entropy(min(q_hat, 0.5))))


def penalty_bits(eps_cor: float, budget: EpsilonBudget) -> float:
    """``log2(1 / (eps_UCR^2 eps_PA^2 eps_cor))``, in log space."""
    return -(
        2 * math.log2(budget.eps_UCR) + 2 * math.log2(budget.eps_PA) + math.log2(eps_cor)
    )


def key_length(
    params: ProtocolParams,
    budget: Optional[EpsilonBudget] = None,
    eta: Optional[float] = None,
) -> SecurityReport:
    """Largest secure key length for ``params`` under an epsilon split.

    ``eta`` is the efficiency plugged into the overlap deviation ``zeta``;
    it defaults to ``params.eta_tol`` (planning) and may be set to the
    observed efficiency when reporting on a finished run.

    Status is ``"ok"``, ``"negative_length"`` or ``"chsh_insufficient"``
    (the corrected CHSH tolerance fell below 2, so no bound applies).
    """
    budget = uniform_budget(params.eps_sec) if budget is None else budget
    budget.check(params.eps_sec)
    eta_zeta = params.eta_tol if eta is None else eta
    m_x = params.m_x

    xi = stats.xi(params.m_j, budget.eps_CHSH)
    zeta = stats.zeta(m_x, params.m_j, eta_zeta, budget.eps_cstar)
    mu = stats.mu(m_x, params.m_z, budget.eps_Q)
    s_hat = params.S_tol - xi
    q_hat = params.Q_tol + mu
    leak = (
        default_leak(m_x, q_hat, params.ec_efficiency)
        if params.leak_EC is None
        else float(params.leak_EC)
    )
    penalty = penalty_bits(params.eps_cor, budget)

    def report(length: int, raw: float, status: str) -> SecurityReport:
        return SecurityReport(
            key_length=length,
            secret_fraction=length / m_x,
            xi=xi,
            zeta=zeta,
            mu=mu,
            S_hat=s_hat,
            Q_hat=q_hat,
            feasible=length > 0,
            status=status,
            penalty=penalty,
            leak_EC=leak,
            raw_length=raw,
            m_x=m_x,
        )

    if s_hat < 2.0:
        return report(0, -math.inf, "chsh_insufficient")
    if s_hat > TSIRELSON + _S_SLACK:
        raise ValueError(f"corrected CHSH tolerance {s_hat} exceeds 2*sqrt(2)")
    overlap_term = math.log2(1.0 + (_chsh_term(s_hat) + zeta) / params.eta_tol)
    raw = m_x * (1.0 - overlap_term - binary_entropy(min(q_hat, 0.5))) - leak - penalty
    if raw < 0:
        return report(0, raw, "negative_length")
    return report(min(int(math.floor(raw)), m_x), raw, "ok")


def optimize_budget(
    params: ProtocolParams,
    eta: Optional[float] = None,
    grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
    rounds: int = 3,
) -> tuple[EpsilonBudget, SecurityReport]:
    """Coordinate search over the epsilon split, starting from the uniform one.

    Each component is rescaled by factors from ``grid`` and the budget is then
    renormalised to use ``eps_sec`` exactly. Only improvements are accepted,
    so the result is never worse than :func:`uniform_budget`.
    """
    coeffs = (4.0, 2.0, 1.0, 1.0, 1.0)

    def normalise(vals: Sequence[float]) -> EpsilonBudget:
        total = sum(c * v for c, v in zip(coeffs, vals))
        return EpsilonBudget(*(v * params.eps_sec / total for v in vals))

    best_budget = uniform_budget(params.eps_sec)
    best = key_length(params, best_budget, eta)
    for _ in range(rounds):
        improved = False
        for i, factor in itertools.product(range(5), grid):
            vals = list(asdict(best_budget).values())
            vals[i] *= factor
            cand = normalise(vals)
            rep = key_length(params, cand, eta)
            if rep.raw_length > best.raw_length:
                best_budget, best, improved = cand, rep, True
        if not improved:
            break
    return best_budget, best


@dataclass(frozen=True)
class SweepRow:
    eta_tol: float
    fraction_asymptotic: float
    fraction_finite: float
    key_length: int
    xi: float
    zeta: float
    mu: float


def sweep_eta(
    template: ProtocolParams,
    eta_grid: Sequence[float],
    budget: Optional[EpsilonBudget] = None,
) -> list[SweepRow]:
    """Finite-key and asymptotic secret fractions along a grid of ``eta_tol``.

    Infeasible grid points report ``key_length = 0``; the asymptotic column
    may be negative.
    """
    rows = []
    for eta in eta_grid:
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"grid value {eta} outside (0, 1]")
        p = replace(template, eta_tol=float(eta))
        rep = key_length(p, budget)
        s_asym = min(p.S_tol, TSIRELSON)
        asym = asymptotic_fraction(s_asym, p.eta_tol, p.Q_tol) if s_asym >= 2 else -math.inf
        rows.append(
            SweepRow(
                eta_tol=float(eta),
                fraction_asymptotic=asym,
                fraction_finite=rep.secret_fraction,
                key_length=rep.key_length,
                xi=rep.xi,
                zeta=rep.zeta,
                mu=rep.mu,
            )
        )
    return rows
