"""A full protocol session: rounds, sifting, estimation and post-processing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import postprocessing as pp
from .config import RunConfig
from .protocol import EstimationResult, SiftedSets, Transcript, estimate, run_until_sifted
from .security import EpsilonBudget, SecurityReport, key_length, optimize_budget, uniform_budget

log = logging.getLogger(__name__)


def session_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent PCG64 streams per subsystem, derived from one 64-bit seed."""
    rounds, post = np.random.SeedSequence(seed).spawn(2)
    return {
        "rounds": np.random.Generator(np.random.PCG64(rounds)),
        "postprocessing": np.random.Generator(np.random.PCG64(post)),
    }


def resolve_budget(cfg: RunConfig, eta: Optional[float] = None) -> EpsilonBudget:
    if isinstance(cfg.budget, EpsilonBudget):
        return cfg.budget
    if cfg.budget == "optimize":
        return optimize_budget(cfg.params, eta)[0]
    return uniform_budget(cfg.params.eps_sec)


@dataclass
class SessionResult:
    transcript: Transcript
    sets: SiftedSets
    estimation: EstimationResult
    status: str
    report: Optional[SecurityReport] = None
    ell: int = 0
    key_a: Optional[np.ndarray] = None
    key_b: Optional[np.ndarray] = None
    leaked: float = 0.0
    verified: Optional[bool] = None
    pa_seed: Optional[pp.ToeplitzSeed] = None
    selected: Optional[list[int]] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary(self) -> dict:
        est = self.estimation
        out = {
            "status": self.status,
            "rounds": len(self.transcript),
            "S_test": est.S_test,
            "Q_test": est.Q_test,
            "eta": est.eta,
            "abort": est.abort,
            "abort_reason": est.abort_reason,
            "abort_reasons": list(est.abort_reasons),
            "n_X": est.n_X,
            "n_Z": est.n_Z,
            "n_J": est.n_J,
            "n_X_tilde": est.n_X_tilde,
            "ell": self.ell,
            "leaked": self.leaked,
            "verified": self.verified,
            "keys_equal": None
            if self.key_a is None
            else bool(np.array_equal(self.key_a, self.key_b)),
            "pa_seed_fingerprint": None if self.pa_seed is None else self.pa_seed.fingerprint(),
        }
        if self.report is not None:
            out["bound"] = self.report.as_dict()
        return out


def run_session(cfg: RunConfig, exact: bool = False) -> SessionResult:
    if cfg.seed is None:
        raise ValueError("simulation requires a seed")
    params = cfg.params
    streams = session_streams(cfg.seed)
    alice, bob = cfg.devices()
    transcript, sets = run_until_sifted(
        params, alice, bob, cfg.charlie(), streams["rounds"], cfg.max_rounds, exact=exact
    )
    est = estimate(sets, transcript, params)
    log.info("estimation: S=%.4f Q=%.4f eta=%.4f abort=%s", est.S_test, est.Q_test, est.eta, est.abort)
    if est.abort:
        return SessionResult(transcript, sets, est, status=f"abort:{est.abort_reason}")

    eta = est.eta if cfg.eta_source == "observed" else None
    report = key_length(params, resolve_budget(cfg, eta), eta)
    ell = report.key_length if params.ell is None else params.ell
    result = SessionResult(transcript, sets, est, status="ok", report=report, ell=ell)
    if ell <= 0:
        result.status = "infeasible"
        return result

    rng = streams["postprocessing"]
    chosen = sorted(rng.choice(len(sets.X), size=params.m_x, replace=False).tolist())
    selected = [sets.X[i] for i in chosen]
    recs = transcript.records
    x_a = pp.as_bits([recs[i].y for i in selected])
    x_b = pp.as_bits([recs[i].y_prime for i in selected])

    x_b, leaked = pp.reconcile(x_a, x_b, report.leak_EC)
    verified = pp.verify(x_a, x_b, params.eps_cor, rng)
    result.selected, result.leaked, result.verified = selected, leaked, verified
    if not verified:
        result.status = "abort:verification"
        return result
    seed = pp.ToeplitzSeed.random(params.m_x, ell, rng)
    result.pa_seed = seed
    result.key_a = pp.privacy_amplify(x_a, ell, seed)
    result.key_b = pp.privacy_amplify(x_b, ell, seed)
    return result
