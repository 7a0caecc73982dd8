"""One-way post-processing: modelled reconciliation, hash verification, Toeplitz privacy amplification.

Bit strings are 1-D ``uint8`` numpy arrays of zeros and ones.

A Toeplitz seed ``d`` of length ``n + ell - 1`` defines the ``ell x n``
matrix ``T[i, j] = d[i - j + n - 1]``. Row ``i`` is therefore
``d[i : i + n]`` reversed, which is what the fast paths exploit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def as_bits(bits: Iterable[int] | str) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint8)
    if arr.ndim != 1 or (arr > 1).any():
        raise ValueError("bit strings must be 1-D arrays of 0/1")
    return arr


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    input_len: int
    output_len: int

    def __post_init__(self):
        bits = as_bits(self.bits)
        if self.input_len < 1 or self.output_len < 0:
            raise ValueError("invalid Toeplitz dimensions")
        if len(bits) != max(self.input_len + self.output_len - 1, 0):
            raise ValueError(
                f"seed has {len(bits)} bits, expected {self.input_len + self.output_len - 1}"
            )
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, input_len: int, output_len: int, rng: np.random.Generator) -> "ToeplitzSeed":
        n_bits = max(input_len + output_len - 1, 0)
        return cls(rng.integers(0, 2, size=n_bits, dtype=np.uint8), input_len, output_len)

    def matrix(self) -> np.ndarray:
        n, ell = self.input_len, self.output_len
        i = np.arange(ell)[:, None]
        j = np.arange(n)[None, :]
        return self.bits[i - j + n - 1]

    def fingerprint(self) -> str:
        return hashlib.sha256(np.packbits(self.bits).tobytes() + str(len(self.bits)).encode()).hexdigest()[:16]


def toeplitz_hash(x: Sequence[int], seed: ToeplitzSeed) -> np.ndarray:
    """``T(seed) @ x`` over GF(2)."""
    x = as_bits(x)
    if len(x) != seed.input_len:
        raise ValueError(f"input has {len(x)} bits, seed expects {seed.input_len}")
    if seed.output_len == 0:
        return np.zeros(0, dtype=np.uint8)
    # out[i] = sum_j d[i + j] * x[n - 1 - j]
    acc = np.correlate(seed.bits.astype(np.int64), x[::-1].astype(np.int64), mode="valid")
    return (acc & 1).astype(np.uint8)


def privacy_amplify(x: Sequence[int], ell: int, seed: ToeplitzSeed) -> np.ndarray:
    x = as_bits(x)
    if ell > len(x):
        raise ValueError(f"cannot extract {ell} bits from {len(x)}")
    if seed.output_len != ell or seed.input_len != len(x):
        raise ValueError("seed dimensions do not match (len(x), ell)")
    return toeplitz_hash(x, seed)


def reconcile(x_a: Sequence[int], x_b: Sequence[int], leak_budget: float) -> tuple[np.ndarray, float]:
    """Ideal reconciliation: Bob ends with Alice's string and ``leak_budget`` bits are charged."""
    x_a, x_b = as_bits(x_a), as_bits(x_b)
    if len(x_a) != len(x_b):
        raise ValueError("strings to reconcile differ in length")
    return x_a.copy(), float(leak_budget)


def verification_hash_length(eps_cor: float) -> int:
    if not 0.0 < eps_cor < 1.0:
        raise ValueError("eps_cor must lie in (0, 1)")
    # guard against log2(2**-k) landing a hair above k
    return math.ceil(round(-math.log2(eps_cor), 9))


def verify(x_a: Sequence[int], x_b: Sequence[int], eps_cor: float, rng: np.random.Generator) -> bool:
    """Compare Toeplitz hashes of length ``ceil(log2(1/eps_cor))`` under a fresh shared seed."""
    x_a, x_b = as_bits(x_a), as_bits(x_b)
    if len(x_a) != len(x_b):
        raise ValueError("strings to verify differ in length")
    seed = ToeplitzSeed.random(len(x_a), verification_hash_length(eps_cor), rng)
    return bool(np.array_equal(toeplitz_hash(x_a, seed), toeplitz_hash(x_b, seed)))


# Packed-integer Toeplitz arithmetic for Monte Carlo and exhaustive checks.
# A seed is a uint64 with bit k = d[k]; requires n + ell - 1 <= 64.

def _parity(v: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(v) & 1).astype(np.uint8)


def packed_hash(seeds: np.ndarray, x: Sequence[int], ell: int) -> np.ndarray:
    """Hashes of ``x`` under many packed seeds; returns shape ``(len(seeds), ell)``."""
    x = as_bits(x)
    n = len(x)
    if n + ell - 1 > 64:
        raise ValueError("packed hashing supports n + ell - 1 <= 64")
    seeds = np.asarray(seeds, dtype=np.uint64)
    # row i selects d[i + j] * x[n - 1 - j]; pack x reversed so bit j is x[n-1-j]
    xr = np.uint64(sum(int(b) << j for j, b in enumerate(x[::-1])))
    mask = np.uint64((1 << n) - 1)
    out = np.empty((len(seeds), ell), dtype=np.uint8)
    for i in range(ell):
        out[:, i] = _parity((seeds >> np.uint64(i)) & mask & xr)
    return out


def random_packed_seeds(count: int, n_bits: int, rng: np.random.Generator) -> np.ndarray:
    if n_bits > 64:
        raise ValueError("at most 64 seed bits can be packed")
    if n_bits == 64:
        return rng.integers(0, 2**64 - 1, size=count, dtype=np.uint64, endpoint=True)
    return rng.integers(0, 1 << n_bits, size=count, dtype=np.uint64)


def packed_seed(seed: ToeplitzSeed) -> np.uint64:
    return np.uint64(sum(int(b) << k for k, b in enumerate(seed.bits)))


def verify_false_pass_rate(
    x_a: Sequence[int],
    x_b: Sequence[int],
    eps_cor: float,
    trials: int,
    rng: np.random.Generator,
    batch: int = 1_000_000,
) -> tuple[int, int]:
    """Count passes of :func:`verify` over ``trials`` independent seeds.

    Vectorised equivalent of calling :func:`verify` repeatedly; returns
    ``(passes, trials)``.
    """
    x_a, x_b = as_bits(x_a), as_bits(x_b)
    ell = verification_hash_length(eps_cor)
    n_bits = len(x_a) + ell - 1
    diff = x_a ^ x_b
    passes = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        seeds = random_packed_seeds(k, n_bits, rng)
        passes += int((packed_hash(seeds, diff, ell) == 0).all(axis=1).sum())
        done += k
    return passes, trials


def two_universality_estimate(
    n: int, ell: int, trials: int, rng: np.random.Generator, x=None, x_prime=None
) -> float:
    """Empirical collision rate of the Toeplitz family for a fixed pair of inputs.

    Draws a random distinct pair unless one is given.
    """
    if n > 32:
        raise ValueError("estimation is meant for n <= 32")
    if x is None or x_prime is None:
        x = rng.integers(0, 2, size=n, dtype=np.uint8)
        x_prime = x.copy()
        flip = rng.integers(0, 2, size=n, dtype=np.uint8)
        flip[rng.integers(n)] = 1
        x_prime ^= flip
    x, x_prime = as_bits(x), as_bits(x_prime)
    seeds = random_packed_seeds(trials, n + ell - 1, rng)
    # collision iff T (x xor x') = 0 by linearity
    collide = (packed_hash(seeds, x ^ x_prime, ell) == 0).all(axis=1)
    return float(collide.mean())


def exhaustive_collision_probabilities(n: int, ell: int) -> np.ndarray:
    """Exact collision probability over all seeds, for every nonzero difference ``x xor x'``.

    Entry ``d - 1`` belongs to the difference whose packed value is ``d``.
    Every pair ``x != x'`` collides exactly when ``T (x xor x') = 0``, so this
    covers all pairs.
    """
    n_bits = n + ell - 1
    if n_bits > 24:
        raise ValueError("exhaustive enumeration limited to n + ell - 1 <= 24")
    seeds = np.arange(1 << n_bits, dtype=np.uint64)
    mask = np.uint64((1 << n) - 1)
    windows = [(seeds >> np.uint64(i)) & mask for i in range(ell)]
    probs = np.empty((1 << n) - 1)
    for d in range(1, 1 << n):
        # T d uses x reversed; enumerating all d covers reversed ones too
        dv = np.uint64(d)
        zero = np.ones(len(seeds), dtype=bool)
        for w in windows:
            zero &= _parity(w & dv) == 0
        probs[d - 1] = zero.mean()
    return probs


def bits_to_hex(bits: Sequence[int]) -> str:
    """Lowercase hex, most significant bit first, zero-padded on the right to a nibble."""
    bits = as_bits(bits)
    pad = (-len(bits)) % 4
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join("0123456789abcdef"[v] for v in nibbles)


def hex_to_bits(text: str, length: int) -> np.ndarray:
    bits = [int(b) for c in text.strip() for b in format(int(c, 16), "04b")]
    return as_bits(bits[:length])


def format_key(bits: Sequence[int], seed: ToeplitzSeed) -> str:
    bits = as_bits(bits)
    return f"# ell={len(bits)} seed_fingerprint={seed.fingerprint()}\n{bits_to_hex(bits)}\n"


def parse_key(text: str) -> np.ndarray:
    header, _, body = text.partition("\n")
    fields = dict(item.split("=", 1) for item in header.lstrip("# ").split())
    return hex_to_bits(body, int(fields["ell"]))
