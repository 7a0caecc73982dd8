import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diqkd import quantum as qm

SQ2 = math.sqrt(2)
OPT = (qm.Z_OBS, qm.X_OBS, qm.U_OBS, qm.V_OBS)

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def test_density_matrix_rejects_invalid():
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.array([[1, 1], [0, 0]], dtype=complex))  # not Hermitian
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.eye(2, dtype=complex))  # trace 2
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.diag([1.5, -0.5]).astype(complex))  # not PSD


def test_werner_endpoints():
    assert np.allclose(qm.werner_state(1.0).data, qm.BELL_PROJECTORS["phi+"])
    assert np.allclose(qm.werner_state(0.0).data, np.eye(4) / 4)
    with pytest.raises(ValueError):
        qm.werner_state(1.2)


def test_partial_trace_of_bell_is_mixed():
    red = qm.partial_trace(qm.bell_state("psi-").data, [0])
    assert np.allclose(red, np.eye(2) / 2)


def test_embed_operator_reorders_targets():
    # X on qubit 2 of 3 equals I (x) I (x) X
    op = qm.embed_operator(qm.PAULI_X, [2], 3)
    assert np.allclose(op, np.kron(np.eye(4), qm.PAULI_X))
    # CNOT-like swap of target order
    a, b = qm.PAULI_X, qm.PAULI_Z
    assert np.allclose(qm.embed_operator(np.kron(a, b), [1, 0], 2), np.kron(b, a))


class TestChsh:
    def test_tsirelson(self):
        assert abs(qm.chsh_value(qm.bell_state("phi+"), OPT) - 2 * SQ2) < 1e-9

    def test_product_state(self):
        rho = qm.DensityMatrix.from_vector([1, 0, 0, 0])
        assert abs(qm.chsh_value(rho, OPT) - SQ2) < 1e-12

    @pytest.mark.parametrize("v", [0.0, 0.5, 0.99, 1.0])
    def test_werner_scales(self, v):
        assert abs(qm.chsh_value(qm.werner_state(v), OPT) - v * 2 * SQ2) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            qm.chsh_value(qm.DensityMatrix.maximally_mixed(3), OPT)

    def test_tsirelson_bound_random(self, rng):
        worst = -np.inf
        for _ in range(10_000):
            rho = qm.random_density_matrix(2, rng, rank=1 + int(rng.integers(4)))
            obs = [qm.bloch_observable(qm.random_unit_vector(rng)) for _ in range(4)]
            worst = max(worst, qm.chsh_value(rho, obs))
        assert worst <= 2 * SQ2 + 1e-9

    @settings(max_examples=300, deadline=None)
    @given(seeds)
    def test_seevinck_uffink(self, seed):
        # the top eigenvalue of beta is the maximum over all states
        r = _rng(seed)
        a0, a1, t0, t1 = (qm.random_unit_vector(r) for _ in range(4))
        beta = qm.chsh_operator(*(qm.bloch_observable(v) for v in (a0, a1, t0, t1)))
        top = np.linalg.eigvalsh(beta)[-1]
        sin_a = math.sin(math.acos(np.clip(a0 @ a1, -1, 1)))
        sin_b = math.sin(math.acos(np.clip(t0 @ t1, -1, 1)))
        assert top <= 2 * math.sqrt(1 + sin_a * sin_b) + 1e-6


class TestSwapping:
    @pytest.mark.parametrize("kind", qm.BELL_KINDS)
    def test_correction_restores_phi_plus(self, kind):
        # two phi+ pairs; BSM on the middle qubits, conditioned on `kind`
        rho = qm.bell_state("phi+").tensor(qm.bell_state("phi+"))
        n = 4
        proj = qm.embed_operator(qm.BELL_PROJECTORS[kind], [1, 2], n)
        post = proj @ rho.data @ proj
        p = np.trace(post).real
        assert abs(p - 0.25) < 1e-12
        swapped = qm.DensityMatrix(qm.partial_trace(post, [0, 3]) / p)
        assert np.allclose(swapped.data, qm.BELL_PROJECTORS[kind], atol=1e-12)
        fixed = qm.apply_correction(swapped, qm.BELL_BITS[kind], 0)
        assert np.linalg.norm(fixed.data - qm.BELL_PROJECTORS["phi+"]) < 1e-9

    def test_bsm_sampler_matches_oracle(self, rng):
        rho = qm.bell_state("phi+").tensor(qm.bell_state("phi+"))
        for _ in range(20):
            out, post = qm.bsm(rho, [1, 2], 1.0, rng)
            assert out.passed
            fixed = qm.apply_correction(post, out.g, 0)
            assert np.linalg.norm(fixed.data - qm.BELL_PROJECTORS["phi+"]) < 1e-9

    def test_bsm_consumes_two_uniforms(self):
        class Counter:
            n = 0

            def random(self):
                self.n += 1
                return 0.99

        c = Counter()
        qm.bsm(qm.bell_state("phi+"), [0, 1], 0.5, c)
        assert c.n == 2

    def test_linear_mode_only_psi(self, rng):
        rho = qm.bell_state("phi+").tensor(qm.bell_state("phi+"))
        kinds = set()
        for _ in range(200):
            out, _ = qm.bsm(rho, [1, 2], 1.0, rng, mode="linear")
            if out.passed:
                kinds.add(out.kind)
        assert kinds == {"psi+", "psi-"}

    def test_identity_correction(self):
        rho = qm.werner_state(0.7)
        assert np.allclose(qm.apply_correction(rho, (0, 0), 1).data, rho.data)

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.sampled_from(list(qm.BELL_BITS.values())), st.integers(0, 1))
    def test_correction_is_unitary(self, seed, g, qubit):
        rho = qm.random_density_matrix(2, _rng(seed))
        out = qm.apply_correction(rho, g, qubit)
        assert abs(np.trace(out.data) - 1) < 1e-12
        assert np.allclose(np.sort(out.eigenvalues()), np.sort(rho.eigenvalues()), atol=1e-10)

    @pytest.mark.parametrize("kind", qm.BELL_KINDS)
    @pytest.mark.parametrize("basis", ["X", "Z"])
    def test_classical_flip_matches_quantum_correction(self, kind, basis):
        # measuring the swapped state then flipping == correcting then measuring
        m = qm.X_BASIS if basis == "X" else qm.Z_BASIS
        g = qm.BELL_BITS[kind]
        rho = qm.bell_state(kind)
        flip = qm.classical_flip(basis, g)
        for y in (0, 1):
            for yp in (0, 1):
                raw = rho.expectation(np.kron(m[y ^ flip], m[yp]))
                ideal = qm.bell_state("phi+").expectation(np.kron(m[y], m[yp]))
                assert abs(raw - ideal) < 1e-12

    def test_swapped_werner_correlation(self):
        v = 0.9
        rho = qm.werner_state(v).tensor(qm.werner_state(v))
        proj = qm.embed_operator(qm.BELL_PROJECTORS["phi+"], [1, 2], 4)
        post = proj @ rho.data @ proj
        swapped = qm.DensityMatrix(qm.partial_trace(post, [0, 3]) / np.trace(post).real)
        assert abs(qm.correlator(swapped, qm.PAULI_X, qm.PAULI_X) - v * v) < 1e-12


class TestMeasurement:
    def test_born_frequencies(self, rng):
        rho = qm.DensityMatrix.from_vector([math.cos(0.4), math.sin(0.4)])
        p0 = math.cos(0.4) ** 2
        n = 100_000
        ones = sum(qm.measure_binary(rho, qm.Z_BASIS, 0, rng)[0] for _ in range(n))
        sigma = math.sqrt(n * p0 * (1 - p0))
        assert abs((n - ones) - n * p0) < 5 * sigma

    def test_post_state_is_projected(self, rng):
        x, post = qm.measure_binary(qm.bell_state("phi+"), qm.Z_BASIS, 0, rng)
        assert np.allclose(post.data, np.diag([1.0 - x, 0, 0, float(x)]))

    def test_non_projective_rejected(self):
        m = qm.BinaryMeasurement(np.eye(2) * 0.5, np.eye(2) * 0.5)
        with pytest.raises(ValueError):
            qm.effective_overlap(m, qm.Z_BASIS)


class TestOverlap:
    def test_mutually_unbiased(self):
        assert abs(qm.effective_overlap(qm.Z_BASIS, qm.X_BASIS) - 0.5) < 1e-12

    def test_identical(self):
        assert abs(qm.effective_overlap(qm.Z_BASIS, qm.Z_BASIS) - 1.0) < 1e-12

    def test_pi_over_three(self):
        m = qm.xz_plane_observable(0.0).measurement
        n = qm.xz_plane_observable(math.pi / 3).measurement
        assert abs(qm.effective_overlap(m, n) - 0.75) < 1e-12
        assert abs(qm.qubit_overlap(math.pi / 3) - 0.75) < 1e-12

    def test_norm_definition_matches_angle_formula(self, rng):
        for _ in range(1000):
            m = qm.bloch_measurement(qm.random_unit_vector(rng))
            n = qm.bloch_measurement(qm.random_unit_vector(rng))
            theta = qm.bloch_angle(m, n)
            assert abs(qm.effective_overlap(m, n) - (1 + abs(math.cos(theta))) / 2) < 1e-9
