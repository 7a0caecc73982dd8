"""Independent reference implementations used by the tests.

These use mpmath at 50 digits and share no code with the package.
"""

import itertools

import numpy as np
from mpmath import ceil, floor, log, mp, mpf, sqrt

mp.dps = 50


def h(q):
    q = mpf(q)
    if q <= 0 or q >= 1:
        return mpf(0)
    return -q * log(q, 2) - (1 - q) * log(1 - q, 2)


def key_length_eq1(m_x, m_z, m_j, S_tol, Q_tol, eta_tol, eps_cor, eps_sec, leak=None, ec=1.1):
    """Largest integer l satisfying the main finite-key inequality, or None if S_hat < 2."""
    eps = mpf(eps_sec) / 9
    ln = -log(eps)
    m_x, m_z, m_j = mpf(m_x), mpf(m_z), mpf(m_j)
    xi = sqrt(32 / m_j * ln)
    zeta = sqrt(2 * (m_x + m_j * eta_tol) * (m_j + 1) / (m_x * m_j**2) * ln)
    mu = sqrt((m_x + m_z) * (m_z + 1) / (m_x * m_z**2) * ln)
    s = mpf(S_tol) - xi
    if s < 2:
        return None
    q = mpf(Q_tol) + mu
    if leak is None:
        leak = ceil(mpf(ec) * m_x * h(min(q, mpf(1) / 2)))
    inner = 1 + s / (4 * mpf(eta_tol)) * sqrt(8 - s**2) + zeta / mpf(eta_tol)
    bound = m_x * (1 - log(inner, 2) - h(min(q, mpf(1) / 2))) - mpf(leak) - log(1 / (mpf(eps_cor) * eps**4), 2)
    return max(int(floor(bound)), 0), bound


def toeplitz_matrix(diag_bits, n, ell):
    """T[i, j] = d[i - j + n - 1]; first column is d[n-1:], first row is d[n-1::-1]."""
    d = list(diag_bits)
    assert len(d) == n + ell - 1
    return np.array([[d[i - j + n - 1] for j in range(n)] for i in range(ell)], dtype=np.uint8)


def gf2_matvec(mat, x):
    out = []
    for row in mat:
        acc = 0
        for a, b in zip(row, x):
            acc ^= int(a) & int(b)
        out.append(acc)
    return out


def brute_collision(x, x_prime, ell):
    """Exact collision probability over all Toeplitz seeds, by enumeration."""
    n = len(x)
    hits = 0
    total = 0
    for d in itertools.product((0, 1), repeat=n + ell - 1):
        t = toeplitz_matrix(d, n, ell)
        hits += gf2_matvec(t, x) == gf2_matvec(t, x_prime)
        total += 1
    return hits / total
