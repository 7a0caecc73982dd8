"""Round-by-round protocol engine: devices, Charlie, sifting, estimation.

Each round consumes exactly :data:`UNIFORMS_PER_ROUND` uniforms from the
session stream, in this order::

    0 mode   1 u or a   2 v or b   3 outcome   4 herald   5 charlie aux
    6 second outcome (exact path)   7 Bell outcome (exact path)

so rounds can be drawn in blocks without changing the transcript, and
adding rounds never perturbs earlier ones.

Two equivalent round evaluators exist. ``exact=True`` builds the round's
state and runs the measurements and the Bell-state measurement on it in
sequence. The default samples from outcome tables computed once per device
pair with the same quantum operations; devices are memoryless and every
round starts from a fresh copy of the source state, so both paths yield the
same distribution.
"""

from __future__ import annotations

import bisect
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import quantum as qm
from .security import ProtocolParams

UNIFORMS_PER_ROUND = 8
CHSH, QKD = "CHSH", "QKD"
# u/v bit -> device setting
KEY_SETTING = ("Z", "X")
TEST_SETTING = ("U", "V")
ABORT_REASONS = ("chsh_low", "qber_high", "eta_low")


class RoundBudgetExceeded(RuntimeError):
    """The sifting condition was not met within the allowed number of rounds."""


@dataclass(frozen=True, eq=False)
class AliceDevices:
    """Source S feeding M_key (qubit 0) and M_test / the channel (qubit 1)."""

    source: qm.DensityMatrix
    key_z: qm.BinaryMeasurement = qm.Z_BASIS
    key_x: qm.BinaryMeasurement = qm.X_BASIS
    test_u: qm.BinaryMeasurement = qm.U_OBS.measurement
    test_v: qm.BinaryMeasurement = qm.V_OBS.measurement
    channel_depolarize: float = 0.0

    def key(self, basis: str) -> qm.BinaryMeasurement:
        return {"Z": self.key_z, "X": self.key_x}[basis]

    def test(self, setting: str) -> qm.BinaryMeasurement:
        return {"U": self.test_u, "V": self.test_v}[setting]

    def chsh_observables(self) -> tuple[qm.Observable, ...]:
        return (
            self.key_z.observable,
            self.key_x.observable,
            self.test_u.observable,
            self.test_v.observable,
        )


@dataclass(frozen=True, eq=False)
class BobDevices:
    """Source S' feeding M'_key (qubit 0) and the channel (qubit 1)."""

    source: qm.DensityMatrix
    key_z: qm.BinaryMeasurement = qm.Z_BASIS
    key_x: qm.BinaryMeasurement = qm.X_BASIS
    channel_depolarize: float = 0.0

    def key(self, basis: str) -> qm.BinaryMeasurement:
        return {"Z": self.key_z, "X": self.key_x}[basis]


def werner_devices(visibility: float = 1.0, depolarize_p: float = 0.0) -> tuple[AliceDevices, BobDevices]:
    src = qm.werner_state(visibility)
    return (
        AliceDevices(src, channel_depolarize=depolarize_p),
        BobDevices(src, channel_depolarize=depolarize_p),
    )


@dataclass(frozen=True)
class CharlieView:
    """What a selective Charlie bases his decision on: his own Bell outcome and private randomness."""

    index: int
    bell: str
    aux: float


@dataclass(frozen=True, eq=False)
class CharlieStrategy:
    behavior: str = "honest"
    success_prob: float = 1.0
    bsm_mode: str = "full"
    predicate: Optional[Callable[[CharlieView], bool]] = None

    def __post_init__(self):
        if self.behavior not in ("honest", "always_pass", "selective"):
            raise ValueError(f"unknown Charlie behaviour {self.behavior!r}")
        if self.bsm_mode not in ("full", "linear"):
            raise ValueError(f"unknown BSM mode {self.bsm_mode!r}")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must lie in [0, 1]")
        if self.behavior == "selective" and self.predicate is None:
            raise ValueError("selective Charlie needs a predicate")

    @classmethod
    def honest(cls, success_prob: float = 1.0, bsm_mode: str = "full") -> "CharlieStrategy":
        return cls("honest", success_prob, bsm_mode)

    @classmethod
    def always_pass(cls) -> "CharlieStrategy":
        return cls("always_pass")

    @classmethod
    def selective(cls, predicate: Callable[[CharlieView], bool]) -> "CharlieStrategy":
        return cls("selective", predicate=predicate)

    @classmethod
    def biased_pass(cls, pass_rate: float) -> "CharlieStrategy":
        """Pass only phi-type outcomes, thinned to an overall rate of ``pass_rate``."""
        if not 0.0 <= pass_rate <= 0.5:
            raise ValueError("biased_pass supports pass rates up to 1/2")
        keep = 2.0 * pass_rate
        return cls.selective(lambda view: view.bell in ("phi+", "phi-") and view.aux < keep)

    def decide(self, index: int, bell: str, herald: float, aux: float) -> bool:
        """Pass/fail for a round whose pair would project onto ``bell``."""
        if self.behavior == "always_pass":
            return True
        if self.behavior == "selective":
            return bool(self.predicate(CharlieView(index, bell, aux)))
        if herald >= self.success_prob:
            return False
        return self.bsm_mode == "full" or bell in qm.LINEAR_OPTICS_KINDS


@dataclass(frozen=True)
class SelectionProbs:
    p_s: float
    p_x: float


def selection_probabilities(m_x: int, m_z: int, m_j: int, eta_tol: float) -> SelectionProbs:
    """Mode (CHSH) and basis (X) probabilities balancing the three sample sizes."""
    if min(m_x, m_z, m_j) < 1:
        raise ValueError("sample sizes must be >= 1")
    p_s = eta_tol * m_j / (eta_tol * m_j + (math.sqrt(m_x) + math.sqrt(m_z)) ** 2)
    p_x = 1.0 / (1.0 + math.sqrt(m_z / m_x))
    return SelectionProbs(p_s, p_x)


@dataclass(slots=True)
class RoundRecord:
    index: int
    mode: str
    u: Optional[int] = None
    v: Optional[int] = None
    s: Optional[int] = None
    t: Optional[int] = None
    a: Optional[str] = None
    b: Optional[str] = None
    y: Optional[int] = None
    y_prime: Optional[int] = None
    f: Optional[str] = None
    g: Optional[tuple[int, int]] = None

    def check(self) -> None:
        chsh = (self.u, self.v, self.s, self.t)
        qkd = (self.a, self.b, self.y, self.y_prime, self.f)
        if self.mode == CHSH:
            ok = None not in chsh and all(x is None for x in qkd) and self.g is None
        elif self.mode == QKD:
            ok = (
                None not in qkd
                and all(x is None for x in chsh)
                and (self.g is not None) == (self.f == "pass")
            )
        else:
            ok = False
        if not ok:
            raise ValueError(f"malformed round record {self}")

    @property
    def chsh_win(self) -> bool:
        return (self.s ^ self.t) == (self.u & self.v)

    def to_line(self) -> str:
        def fmt(x):
            if x is None:
                return "-"
            if isinstance(x, tuple):
                return "".join(map(str, x))
            return str(x)

        return " ".join(
            fmt(x)
            for x in (
                self.index, self.mode, self.u, self.v, self.s, self.t,
                self.a, self.b, self.y, self.y_prime, self.f, self.g,
            )
        )

    @classmethod
    def from_line(cls, line: str) -> "RoundRecord":
        parts = line.split()
        if len(parts) != 12:
            raise ValueError(f"expected 12 fields, got {len(parts)}: {line!r}")

        def opt(x, conv=int):
            return None if x == "-" else conv(x)

        index, mode, u, v, s, t, a, b, y, yp, f, g = parts
        return cls(
            index=int(index),
            mode=mode,
            u=opt(u), v=opt(v), s=opt(s), t=opt(t),
            a=opt(a, str), b=opt(b, str),
            y=opt(y), y_prime=opt(yp),
            f=opt(f, str),
            g=None if g == "-" else (int(g[0]), int(g[1])),
        )


TRANSCRIPT_HEADER = "# index mode u v s t a b y y' f g"


@dataclass
class Transcript:
    records: list[RoundRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> RoundRecord:
        return self.records[i]

    def to_text(self, header: Sequence[str] = ()) -> str:
        lines = [f"# {h}" for h in header] + [TRANSCRIPT_HEADER]
        lines.extend(r.to_line() for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        return cls([RoundRecord.from_line(l) for l in text.splitlines() if l and not l.startswith("#")])


@dataclass
class SiftedSets:
    X: list[int] = field(default_factory=list)
    Z: list[int] = field(default_factory=list)
    J: list[int] = field(default_factory=list)
    X_tilde: list[int] = field(default_factory=list)

    def add(self, r: RoundRecord) -> None:
        if r.mode == CHSH:
            self.J.append(r.index)
            return
        if r.a == r.b == "X":
            self.X_tilde.append(r.index)
        if r.f == "pass" and r.a == r.b:
            (self.X if r.a == "X" else self.Z).append(r.index)

    def satisfied(self, m_x: int, m_z: int, m_j: int) -> bool:
        return len(self.X) >= m_x and len(self.Z) >= m_z and len(self.J) >= m_j


def sift(records: Iterable[RoundRecord]) -> SiftedSets:
    sets = SiftedSets()
    for r in records:
        sets.add(r)
    return sets


@functools.lru_cache(maxsize=64)
def chsh_table(alice: AliceDevices, u: int, v: int) -> tuple[float, ...]:
    """Cumulative distribution of ``(s, t)`` (index ``2 s + t``) for CHSH inputs ``(u, v)``."""
    mk = alice.key(KEY_SETTING[u])
    mt = alice.test(TEST_SETTING[v])
    probs = [
        alice.source.expectation(np.kron(mk[s], mt[t])) for s in (0, 1) for t in (0, 1)
    ]
    return tuple(np.cumsum(np.clip(probs, 0, None)) / sum(np.clip(probs, 0, None)))


def round_state(alice: AliceDevices, bob: BobDevices) -> qm.DensityMatrix:
    """Fresh four-qubit state ordered (A_key, A_channel, B_key, B_channel)."""
    ra = qm.depolarize(alice.source, alice.channel_depolarize, 1)
    rb = qm.depolarize(bob.source, bob.channel_depolarize, 1)
    return ra.tensor(rb)


@functools.lru_cache(maxsize=64)
def qkd_table(alice: AliceDevices, bob: BobDevices, a: str, b: str) -> tuple[float, ...]:
    """Cumulative distribution of ``(y, y', bell)`` at index ``8 y + 4 y' + k``.

    ``y`` is Alice's raw outcome and ``k`` indexes :data:`quantum.BELL_KINDS`
    for the channel pair.
    """
    rho = round_state(alice, bob)
    ma, mb = alice.key(a), bob.key(b)
    probs = []
    for y in (0, 1):
        for yp in (0, 1):
            local = qm.embed_operator(np.kron(ma[y], mb[yp]), [0, 2], 4)
            for kind in qm.BELL_KINDS:
                bell = qm.embed_operator(qm.BELL_PROJECTORS[kind], [1, 3], 4)
                probs.append(max(rho.expectation(local @ bell), 0.0))
    total = sum(probs)
    return tuple(np.cumsum(probs) / total)


def _pick(cdf: Sequence[float], u: float) -> int:
    return min(bisect.bisect_right(cdf, u), len(cdf) - 1)


class _Stream:
    """Feeds preset uniforms to code that calls ``rng.random()``."""

    __slots__ = ("_values", "_i")

    def __init__(self, values):
        self._values = values
        self._i = 0

    def random(self) -> float:
        x = self._values[self._i]
        self._i += 1
        return float(x)


def _qkd_record(index, a, b, y_raw, yp, bell, passed) -> RoundRecord:
    if passed:
        g = qm.BELL_BITS[bell]
        return RoundRecord(index, QKD, a=a, b=b, y=y_raw ^ qm.classical_flip(a, g), y_prime=yp, f="pass", g=g)
    return RoundRecord(index, QKD, a=a, b=b, y=y_raw, y_prime=yp, f="fail")


def round_from_uniforms(
    alice: AliceDevices,
    bob: BobDevices,
    charlie: CharlieStrategy,
    probs: SelectionProbs,
    w: Sequence[float],
    index: int = 0,
    exact: bool = False,
) -> RoundRecord:
    if w[0] < probs.p_s:
        u, v = int(w[1] < 0.5), int(w[2] < 0.5)
        if exact:
            rho = alice.source
            s, rho = qm.measure_binary(rho, alice.key(KEY_SETTING[u]), 0, _Stream([w[3]]))
            t, _ = qm.measure_binary(rho, alice.test(TEST_SETTING[v]), 1, _Stream([w[6]]))
        else:
            k = _pick(chsh_table(alice, u, v), w[3])
            s, t = k >> 1, k & 1
        return RoundRecord(index, CHSH, u=u, v=v, s=s, t=t)

    a = "X" if w[1] < probs.p_x else "Z"
    b = "X" if w[2] < probs.p_x else "Z"
    if exact:
        return _exact_qkd_round(alice, bob, charlie, a, b, w, index)
    k = _pick(qkd_table(alice, bob, a, b), w[3])
    y, yp, bell = k >> 3, (k >> 2) & 1, qm.BELL_KINDS[k & 3]
    passed = charlie.decide(index, bell, w[4], w[5])
    return _qkd_record(index, a, b, y, yp, bell, passed)


def _exact_qkd_round(alice, bob, charlie, a, b, w, index) -> RoundRecord:
    rho = round_state(alice, bob)
    y, rho = qm.measure_binary(rho, alice.key(a), 0, _Stream([w[3]]))
    yp, rho = qm.measure_binary(rho, bob.key(b), 2, _Stream([w[6]]))
    if charlie.behavior == "honest":
        outcome, _ = qm.bsm(rho, [1, 3], charlie.success_prob, _Stream([w[4], w[7]]), charlie.bsm_mode)
        return _qkd_record(index, a, b, y, yp, outcome.kind, outcome.passed)
    # dishonest Charlie still measures in the Bell basis, then decides
    outcome, _ = qm.bsm(rho, [1, 3], 1.0, _Stream([0.0, w[7]]), "full")
    passed = charlie.decide(index, outcome.kind, w[4], w[5])
    return _qkd_record(index, a, b, y, yp, outcome.kind, passed)


def run_round(
    alice: AliceDevices,
    bob: BobDevices,
    charlie: CharlieStrategy,
    probs: SelectionProbs,
    rng: np.random.Generator,
    index: int = 0,
    exact: bool = False,
) -> RoundRecord:
    return round_from_uniforms(
        alice, bob, charlie, probs, rng.random(UNIFORMS_PER_ROUND), index, exact
    )


def run_until_sifted(
    params: ProtocolParams,
    alice: AliceDevices,
    bob: BobDevices,
    charlie: CharlieStrategy,
    rng: np.random.Generator,
    max_rounds: int = 10**8,
    exact: bool = False,
    block: int = 4096,
) -> tuple[Transcript, SiftedSets]:
    """Repeat rounds until ``|X| >= m_x``, ``|Z| >= m_z`` and ``|J| >= m_j``."""
    probs = selection_probabilities(params.m_x, params.m_z, params.m_j, params.eta_tol)
    transcript = Transcript()
    sets = SiftedSets()
    index = 0
    while not sets.satisfied(params.m_x, params.m_z, params.m_j):
        if index >= max_rounds:
            raise RoundBudgetExceeded(
                f"sifting incomplete after {max_rounds} rounds "
                f"(|X|={len(sets.X)}, |Z|={len(sets.Z)}, |J|={len(sets.J)})"
            )
        n = min(block, max_rounds - index)
        uniforms = rng.random((n, UNIFORMS_PER_ROUND)).tolist()
        for w in uniforms:
            rec = round_from_uniforms(alice, bob, charlie, probs, w, index, exact)
            transcript.records.append(rec)
            sets.add(rec)
            index += 1
            if sets.satisfied(params.m_x, params.m_z, params.m_j):
                break
    return transcript, sets


@dataclass(frozen=True)
class EstimationResult:
    S_test: float
    Q_test: float
    eta: float
    abort: bool
    abort_reason: str
    abort_reasons: tuple[str, ...] = ()
    n_J: int = 0
    n_Z: int = 0
    n_X: int = 0
    n_X_tilde: int = 0


def estimate(sets: SiftedSets, transcript: Transcript, params: ProtocolParams) -> EstimationResult:
    if not sets.J or not sets.Z or not sets.X_tilde:
        raise ValueError("estimation needs nonempty J, Z and X~")
    recs = transcript.records
    wins = sum(recs[i].chsh_win for i in sets.J)
    s_test = 8.0 * wins / len(sets.J) - 4.0
    errors = sum(recs[i].y ^ recs[i].y_prime for i in sets.Z)
    q_test = errors / len(sets.Z)
    eta = len(sets.X) / len(sets.X_tilde)
    reasons = tuple(
        r
        for r, bad in zip(
            ABORT_REASONS,
            (s_test < params.S_tol, q_test > params.Q_tol, eta < params.eta_tol),
        )
        if bad
    )
    return EstimationResult(
        S_test=s_test,
        Q_test=q_test,
        eta=eta,
        abort=bool(reasons),
        abort_reason=reasons[0] if reasons else "none",
        abort_reasons=reasons,
        n_J=len(sets.J),
        n_Z=len(sets.Z),
        n_X=len(sets.X),
        n_X_tilde=len(sets.X_tilde),
    )


def error_rate(transcript: Transcript, indices: Sequence[int]) -> float:
    recs = transcript.records
    return sum(recs[i].y ^ recs[i].y_prime for i in indices) / len(indices)


def attack_demo_selective_charlie(
    params: ProtocolParams,
    rng: np.random.Generator,
    pass_rate: float = 0.1,
    max_rounds: int = 10**7,
) -> EstimationResult:
    """Ideal devices, Charlie passing a biased ``pass_rate`` fraction of rounds."""
    alice, bob = werner_devices(1.0)
    charlie = CharlieStrategy.biased_pass(pass_rate)
    transcript, sets = run_until_sifted(params, alice, bob, charlie, rng, max_rounds=max_rounds)
    return estimate(sets, transcript, params)
