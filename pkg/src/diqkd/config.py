"""JSON run configuration.

Top-level keys mirror the protocol parameters (``m_x``, ``m_z``, ``m_j``,
``S_tol``, ``Q_tol``, ``eta_tol``, ``leak_EC``, ``ec_efficiency``,
``eps_cor``, ``eps_sec``, ``ell``) plus the nested ``channel``,
``adversary`` and ``output`` objects, ``seed``, ``budget``, ``eta_source``
and ``max_rounds``. See README.md for the full schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

from .protocol import AliceDevices, BobDevices, CharlieStrategy, werner_devices
from .security import EpsilonBudget, ProtocolParams, TSIRELSON

SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    """Sources, channel noise and Charlie's hardware.

    ``success_prob`` is the probability that both photons reach Charlie's
    analyser; it defaults to ``transmission_t``. In ``linear`` mode only the
    psi outcomes herald, which contributes the extra factor 1/2.
    """

    transmission_t: float = 1.0
    visibility_V: float = 1.0
    depolarize_p: float = 0.0
    bsm_mode: str = "linear"
    success_prob: Optional[float] = None

    def __post_init__(self):
        for name in ("transmission_t", "visibility_V", "depolarize_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"channel.{name} must lie in [0, 1]")
        if self.bsm_mode not in ("full", "linear"):
            raise ConfigError("channel.bsm_mode must be 'full' or 'linear'")
        if self.success_prob is not None and not 0.0 <= self.success_prob <= 1.0:
            raise ConfigError("channel.success_prob must lie in [0, 1]")

    @property
    def herald_prob(self) -> float:
        return self.transmission_t if self.success_prob is None else self.success_prob


@dataclass(frozen=True)
class AdversaryConfig:
    behavior: str = "honest"
    pass_rate: float = 0.1

    def __post_init__(self):
        if self.behavior not in ("honest", "always_pass", "selective"):
            raise ConfigError(f"unknown adversary behavior {self.behavior!r}")


@dataclass(frozen=True)
class RunConfig:
    params: ProtocolParams
    channel: ChannelConfig = ChannelConfig()
    adversary: AdversaryConfig = AdversaryConfig()
    seed: Optional[int] = None
    budget: Union[EpsilonBudget, str] = "uniform"
    eta_source: str = "tol"
    max_rounds: int = 10**8
    output: dict = field(default_factory=dict)

    def devices(self) -> tuple[AliceDevices, BobDevices]:
        return werner_devices(self.channel.visibility_V, self.channel.depolarize_p)

    def charlie(self) -> CharlieStrategy:
        if self.adversary.behavior == "honest":
            return CharlieStrategy.honest(self.channel.herald_prob, self.channel.bsm_mode)
        if self.adversary.behavior == "always_pass":
            return CharlieStrategy.always_pass()
        return CharlieStrategy.biased_pass(self.adversary.pass_rate)


_PARAM_KEYS = {f.name for f in fields(ProtocolParams)}
_TOP_KEYS = _PARAM_KEYS | {"channel", "adversary", "seed", "budget", "eta_source", "max_rounds", "output"}


def _sub(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    channel = _sub(ChannelConfig, data.get("channel"), "channel")
    adversary = _sub(AdversaryConfig, data.get("adversary"), "adversary")

    pdata = {k: data[k] for k in _PARAM_KEYS if k in data}
    for key in ("m_x", "m_z", "m_j", "ell"):
        # JSON writers often emit 1e8 for integer counts
        if isinstance(pdata.get(key), float):
            if not pdata[key].is_integer():
                raise ConfigError(f"{key} must be an integer")
            pdata[key] = int(pdata[key])
    if pdata.get("S_tol") is None:
        # tolerate the CHSH value the Werner sources would produce
        pdata["S_tol"] = min(channel.visibility_V * TSIRELSON, TSIRELSON)
    try:
        params = ProtocolParams(**pdata)
    except TypeError as exc:
        raise ConfigError(f"missing protocol parameter: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    budget = data.get("budget", "uniform")
    if isinstance(budget, dict):
        try:
            budget = EpsilonBudget(**budget)
            budget.check(params.eps_sec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"budget: {exc}") from exc
    elif budget not in ("uniform", "optimize"):
        raise ConfigError("budget must be 'uniform', 'optimize' or an object")

    seed = data.get("seed")
    if seed is not None and not (isinstance(seed, int) and 0 <= seed <= SEED_MAX):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    eta_source = data.get("eta_source", "tol")
    if eta_source not in ("tol", "observed"):
        raise ConfigError("eta_source must be 'tol' or 'observed'")
    max_rounds = data.get("max_rounds", 10**8)
    if not isinstance(max_rounds, int) or max_rounds < 1:
        raise ConfigError("max_rounds must be a positive integer")
    output = data.get("output") or {}
    if not isinstance(output, dict):
        raise ConfigError("output must be an object")

    return RunConfig(
        params=params,
        channel=channel,
        adversary=adversary,
        seed=seed,
        budget=budget,
        eta_source=eta_source,
        max_rounds=max_rounds,
        output=dict(output),
    )


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(data)


def fig2_finite_config(m_x: int = 10**8) -> dict:
    """Finite-key operating point of the efficiency sweep (dashed curve)."""
    return {
        "m_x": m_x,
        "m_z": m_x,
        "m_j": m_x,
        "S_tol": TSIRELSON,
        "Q_tol": 0.01,
        "eta_tol": 1.0,
        "leak_EC": None,
        "ec_efficiency": 1.1,
        "eps_sec": 1e-8,
        "eps_cor": 1e-12,
    }
