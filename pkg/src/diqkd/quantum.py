"""Dense density-matrix quantum mechanics for up to four qubits.

Qubit 0 is the most significant tensor factor. Z eigenvectors are the
computational basis, X eigenvectors the Hadamard basis. Bell outcomes are
labelled by two bits ``g = (bit_flip, phase_flip)``::

    phi+ -> (0, 0)   phi- -> (0, 1)   psi+ -> (1, 0)   psi- -> (1, 1)

so that ``X^bit_flip Z^phase_flip`` on the first qubit of phi+ produces the
labelled state, and ``apply_correction`` undoes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TOL = 1e-9
MAX_QUBITS = 4

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

BELL_KINDS = ("phi+", "phi-", "psi+", "psi-")
BELL_BITS = {"phi+": (0, 0), "phi-": (0, 1), "psi+": (1, 0), "psi-": (1, 1)}
BITS_TO_BELL = {bits: kind for kind, bits in BELL_BITS.items()}
# outcomes a linear-optics analyser can tell apart
LINEAR_OPTICS_KINDS = ("psi+", "psi-")


def _n_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class DensityMatrix:
    """Normalised PSD operator on ``n <= 4`` qubits."""

    data: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("density matrix must be square")
        n = _n_qubits(data.shape[0])
        if n > MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits supported, got {n}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.check:
            self.validate()

    def validate(self, tol: float = TOL) -> None:
        d = self.data
        if not np.allclose(d, d.conj().T, atol=tol, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(d).real
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        lo = np.linalg.eigvalsh((d + d.conj().T) / 2).min()
        if lo < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {lo!r}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def expectation(self, op: np.ndarray) -> float:
        return float(np.trace(self.data @ op).real)

    def purity(self) -> float:
        return float(np.trace(self.data @ self.data).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.data, other.data))

    @classmethod
    def from_vector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class BinaryMeasurement:
    """Two-outcome POVM ``{M_0, M_1}``."""

    m0: np.ndarray
    m1: np.ndarray

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=complex)
        m1 = np.asarray(self.m1, dtype=complex)
        if m0.shape != m1.shape or m0.shape[0] != m0.shape[1]:
            raise ValueError("POVM elements must be square and of equal shape")
        if not np.allclose(m0 + m1, np.eye(m0.shape[0]), atol=TOL, rtol=0):
            raise ValueError("POVM elements do not sum to identity")
        for m in (m0, m1):
            if not np.allclose(m, m.conj().T, atol=TOL, rtol=0):
                raise ValueError("POVM element is not Hermitian")
            if np.linalg.eigvalsh(m).min() < -TOL:
                raise ValueError("POVM element is not PSD")
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m1", m1)

    def __getitem__(self, x: int) -> np.ndarray:
        return (self.m0, self.m1)[x]

    @property
    def dim(self) -> int:
        return self.m0.shape[0]

    def is_projective(self, tol: float = TOL) -> bool:
        return all(np.allclose(m @ m, m, atol=tol, rtol=0) for m in (self.m0, self.m1))

    def kraus(self, x: int) -> np.ndarray:
        """Lueders instrument ``sqrt(M_x)``; equals ``M_x`` for projectors."""
        m = self[x]
        if self.is_projective():
            return m
        w, v = np.linalg.eigh(m)
        return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T

    @property
    def observable(self) -> "Observable":
        return Observable(self.m0 - self.m1)


@dataclass(frozen=True)
class Observable:
    """Hermitian operator with spectrum in {+1, -1}."""

    matrix: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.matrix, dtype=complex)
        if not np.allclose(o, o.conj().T, atol=TOL, rtol=0):
            raise ValueError("observable is not Hermitian")
        if not np.allclose(o @ o, np.eye(o.shape[0]), atol=TOL, rtol=0):
            raise ValueError("observable does not square to identity")
        object.__setattr__(self, "matrix", o)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def measurement(self) -> BinaryMeasurement:
        eye = np.eye(self.dim)
        return BinaryMeasurement((eye + self.matrix) / 2, (eye - self.matrix) / 2)


@dataclass(frozen=True)
class BellOutcome:
    passed: bool
    g: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.passed != (self.g is not None):
            raise ValueError("Bell outcome carries g iff it passed")

    @property
    def kind(self) -> Optional[str]:
        return None if self.g is None else BITS_TO_BELL[self.g]


def bloch_observable(vec: Sequence[float]) -> Observable:
    nx, ny, nz = np.asarray(vec, dtype=float) / np.linalg.norm(vec)
    return Observable(nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z)


def bloch_measurement(vec: Sequence[float]) -> BinaryMeasurement:
    return bloch_observable(vec).measurement


def xz_plane_observable(angle: float) -> Observable:
    """``cos(angle) Z + sin(angle) X``; angle 0 is Z, pi/2 is X."""
    return bloch_observable([math.sin(angle), 0.0, math.cos(angle)])


Z_OBS = Observable(PAULI_Z)
X_OBS = Observable(PAULI_X)
U_OBS = Observable((PAULI_Z + PAULI_X) / math.sqrt(2))
V_OBS = Observable((PAULI_Z - PAULI_X) / math.sqrt(2))
Z_BASIS = Z_OBS.measurement
X_BASIS = X_OBS.measurement


def _inv_perm(order: Sequence[int]) -> list[int]:
    return list(np.argsort(order))


def embed_operator(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in that order) to the full register."""
    targets = list(targets)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator size does not match number of targets")
    if len(set(targets)) != k or any(not 0 <= t < n_qubits for t in targets):
        raise IndexError(f"bad qubit targets {targets} for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    order = targets + rest
    if order == list(range(n_qubits)):
        return full
    inv = _inv_perm(order)
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(inv + [n_qubits + i for i in inv])
    return t.reshape(2**n_qubits, 2**n_qubits)


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced operator on ``keep`` (qubits listed in that order)."""
    n = _n_qubits(rho.shape[0])
    keep = list(keep)
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefghijklmnop"
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = 2 ** len(keep)
    return red.reshape(d, d)


def bell_vector(kind: str) -> np.ndarray:
    s = 1 / math.sqrt(2)
    vectors = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    try:
        return np.array(vectors[kind], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Bell state {kind!r}") from None


def bell_state(kind: str) -> DensityMatrix:
    return DensityMatrix.from_vector(bell_vector(kind))


BELL_PROJECTORS = {k: np.outer(bell_vector(k), bell_vector(k).conj()) for k in BELL_KINDS}


def werner_state(visibility: float) -> DensityMatrix:
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    return DensityMatrix(
        visibility * BELL_PROJECTORS["phi+"] + (1 - visibility) * np.eye(4) / 4
    )


def depolarize(rho: DensityMatrix, p: float, qubit: int) -> DensityMatrix:
    """``(1-p) rho + p (I/2 on qubit) (x) Tr_qubit(rho)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarising probability must lie in [0, 1], got {p}")
    n = rho.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")
    if p == 0.0:
        return rho
    rest = [q for q in range(n) if q != qubit]
    if rest:
        reduced = partial_trace(rho.data, rest)
        replaced = embed_operator(I2 / 2, [qubit], n) @ embed_operator(
            reduced, rest, n
        )
    else:
        replaced = I2 / 2
    return DensityMatrix((1 - p) * rho.data + p * replaced)


def outcome_probabilities(
    rho: DensityMatrix, m: BinaryMeasurement, qubit: int
) -> tuple[float, float]:
    if m.dim != 2:
        raise ValueError("measure_binary expects a single-qubit measurement")
    p0 = rho.expectation(embed_operator(m.m0, [qubit], rho.n_qubits))
    p0 = min(max(p0, 0.0), 1.0)
    return p0, 1.0 - p0


def measure_binary(
    rho: DensityMatrix, m: BinaryMeasurement, qubit: int, rng
) -> tuple[int, DensityMatrix]:
    """Sample an outcome of ``m`` on ``qubit`` and return the Lueders post-state.

    ``rng`` is anything with a ``random()`` method returning a uniform float.
    """
    p0, p1 = outcome_probabilities(rho, m, qubit)
    if p0 + p1 <= 0:
        raise ValueError("degenerate outcome distribution")
    x = 0 if rng.random() < p0 else 1
    px = (p0, p1)[x]
    if px <= 0:
        raise ValueError("sampled an outcome of zero probability")
    k = embed_operator(m.kraus(x), [qubit], rho.n_qubits)
    post = k @ rho.data @ k.conj().T / px
    return x, DensityMatrix((post + post.conj().T) / 2)


def bsm_probabilities(rho: DensityMatrix, qubits: Sequence[int]) -> dict[str, float]:
    """Born probabilities of the four Bell outcomes on the pair ``qubits``."""
    n = rho.n_qubits
    return {
        k: max(rho.expectation(embed_operator(BELL_PROJECTORS[k], qubits, n)), 0.0)
        for k in BELL_KINDS
    }


def _sample_index(probs: Sequence[float], u: float) -> int:
    acc = 0.0
    total = sum(probs)
    for i, p in enumerate(probs):
        acc += p / total
        if u < acc:
            return i
    return len(probs) - 1


def bsm(
    rho: DensityMatrix,
    qubits: Sequence[int],
    success_prob: float,
    rng,
    mode: str = "full",
) -> tuple[BellOutcome, Optional[DensityMatrix]]:
    """Heralded Bell-state measurement on ``qubits``.

    Consumes exactly two uniforms (herald, outcome). In ``"linear"`` mode only
    psi+ and psi- herald a pass. On pass the normalised state of the remaining
    qubits is returned (None when nothing remains).
    """
    if mode not in ("full", "linear"):
        raise ValueError(f"unknown BSM mode {mode!r}")
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError("success_prob must lie in [0, 1]")
    qubits = list(qubits)
    n = rho.n_qubits
    if len(qubits) != 2:
        raise ValueError("BSM acts on exactly two qubits")
    if n - 2 not in (0, 2):
        raise ValueError("BSM needs the pair alone or the pair plus two qubits")
    herald = rng.random()
    u = rng.random()
    if herald >= success_prob:
        return BellOutcome(False), None
    probs = bsm_probabilities(rho, qubits)
    kind = BELL_KINDS[_sample_index([probs[k] for k in BELL_KINDS], u)]
    if mode == "linear" and kind not in LINEAR_OPTICS_KINDS:
        return BellOutcome(False), None
    outcome = BellOutcome(True, BELL_BITS[kind])
    rest = [q for q in range(n) if q not in qubits]
    if not rest:
        return outcome, None
    proj = embed_operator(BELL_PROJECTORS[kind], qubits, n)
    post = proj @ rho.data @ proj
    post = partial_trace(post, rest) / probs[kind]
    return outcome, DensityMatrix((post + post.conj().T) / 2)


def correction_unitary(g: tuple[int, int]) -> np.ndarray:
    """``Z^phase X^bit``: maps the Bell state labelled ``g`` back to phi+."""
    bit, phase = g
    if bit not in (0, 1) or phase not in (0, 1):
        raise ValueError(f"invalid correction bits {g}")
    u = I2
    if bit:
        u = PAULI_X @ u
    if phase:
        u = PAULI_Z @ u
    return u


def apply_correction(rho: DensityMatrix, g: tuple[int, int], qubit: int) -> DensityMatrix:
    u = embed_operator(correction_unitary(g), [qubit], rho.n_qubits)
    out = u @ rho.data @ u.conj().T
    return DensityMatrix((out + out.conj().T) / 2)


def classical_flip(basis: str, g: tuple[int, int]) -> int:
    """Outcome flip equivalent to the Pauli correction after a ``basis`` measurement.

    X-basis outcomes are flipped by Z (the phase bit), Z-basis outcomes by X
    (the bit-flip bit).
    """
    if basis == "X":
        return g[1]
    if basis == "Z":
        return g[0]
    raise ValueError(f"unknown basis {basis!r}")


def chsh_operator(
    a0: Observable, a1: Observable, t0: Observable, t1: Observable
) -> np.ndarray:
    """``sum_{u,v} (-1)^(u and v) A_u (x) T_v``."""
    if a0.dim != a1.dim or t0.dim != t1.dim:
        raise ValueError("paired observables must share a dimension")
    a, t = (a0.matrix, a1.matrix), (t0.matrix, t1.matrix)
    return sum(
        (-1) ** (u & v) * np.kron(a[u], t[v]) for u in (0, 1) for v in (0, 1)
    )


def chsh_value(rho: DensityMatrix, obs: Sequence[Observable]) -> float:
    a0, a1, t0, t1 = obs
    beta = chsh_operator(a0, a1, t0, t1)
    if beta.shape[0] != rho.dim:
        raise ValueError(
            f"CHSH operator dimension {beta.shape[0]} != state dimension {rho.dim}"
        )
    return rho.expectation(beta)


def correlator(rho: DensityMatrix, op_a: np.ndarray, op_b: np.ndarray) -> float:
    return rho.expectation(np.kron(op_a, op_b))


def effective_overlap(
    m: BinaryMeasurement, n: BinaryMeasurement, rho: Optional[DensityMatrix] = None
) -> float:
    """``max_x || sum_z N_z M_x N_z ||_inf`` for projective qubit measurements.

    Two distinct rank-1 qubit measurements admit no nontrivial commuting
    projective refinement, so the state only enters through its trace.
    """
    if m.dim != 2 or n.dim != 2:
        raise ValueError("effective_overlap is defined here for single qubits")
    if not (m.is_projective() and n.is_projective()):
        raise ValueError("effective_overlap requires projective measurements")
    if rho is not None and rho.n_qubits != 1:
        raise ValueError("state must be a single qubit")
    weight = 1.0 if rho is None else float(np.trace(rho.data).real)
    best = 0.0
    for x in (0, 1):
        op = sum(n[z] @ m[x] @ n[z] for z in (0, 1))
        best = max(best, float(np.linalg.norm(op, ord=2)))
    return weight * best


def qubit_overlap(theta: float) -> float:
    """Overlap of two projective qubit measurements at Bloch angle ``theta``."""
    return (1 + abs(math.cos(theta))) / 2


def bloch_angle(m: BinaryMeasurement, n: BinaryMeasurement) -> float:
    """Angle in [0, pi] between the Bloch vectors of two qubit measurements."""
    om, on = m.observable.matrix, n.observable.matrix
    c = float(np.trace(om @ on).real) / 2
    return math.acos(min(max(c, -1.0), 1.0))


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre-distributed mixed state (Hilbert-Schmidt measure at full rank)."""
    dim = 2**n_qubits
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
