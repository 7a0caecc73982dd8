import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diqkd import security as sec
from diqkd import stats
from oracles import h as h_oracle
from oracles import key_length_eq1

TS = sec.TSIRELSON
BB84_001 = 0.83841372820817765  # 1 - 2 h(0.01), mpmath
FIG2 = sec.ProtocolParams(
    m_x=10**8, m_z=10**8, m_j=10**8, S_tol=TS, Q_tol=0.01, eta_tol=1.0, eps_cor=1e-12, eps_sec=1e-8
)


class TestEntropy:
    @pytest.mark.parametrize("q,expected", [(0.5, 1.0), (0.0, 0.0), (1.0, 0.0), (0.01, 0.080793135895911173)])
    def test_values(self, q, expected):
        assert sec.binary_entropy(q) == pytest.approx(expected, abs=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            sec.binary_entropy(1.1)

    @given(st.floats(1e-12, 1 - 1e-12))
    def test_matches_oracle(self, q):
        assert sec.binary_entropy(q) == pytest.approx(float(h_oracle(q)), abs=1e-13)


class TestOverlap:
    def test_endpoints(self):
        assert sec.chsh_to_overlap(TS) == pytest.approx(0.5, abs=1e-7)
        assert sec.chsh_to_overlap(2.0) == pytest.approx(1.0)
        assert sec.chsh_to_overlap(1.5) == 1.0

    def test_reference(self):
        assert sec.chsh_to_overlap(2.81) == pytest.approx(0.61322024926553554, abs=1e-12)

    def test_unphysical(self):
        with pytest.raises(ValueError):
            sec.chsh_to_overlap(2.9)

    def test_monotone(self):
        s = np.linspace(2, TS, 200)
        c = [sec.chsh_to_overlap(x) for x in s]
        assert all(b <= a for a, b in zip(c, c[1:]))

    def test_efficiency_correction(self):
        assert sec.overlap_efficiency_correction(0.6, 1.0) == pytest.approx(0.6)
        assert sec.overlap_efficiency_correction(0.5, 0.3) == pytest.approx(0.5)
        assert sec.overlap_efficiency_correction(0.6, 0.5) == pytest.approx(0.7)
        assert sec.overlap_efficiency_correction(0.9, 0.1) == 1.0
        with pytest.raises(ValueError):
            sec.overlap_efficiency_correction(0.6, 0.0)

    @given(st.floats(2.0, TS), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_composition_monotone_in_eta(self, s, e1, e2):
        lo, hi = sorted((e1, e2))
        c = sec.chsh_to_overlap(s)
        assert sec.overlap_efficiency_correction(c, hi) <= sec.overlap_efficiency_correction(c, lo) + 1e-15


class TestAsymptotic:
    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_bb84_recovery(self, eta):
        assert sec.asymptotic_fraction(TS, eta, 0.01) == pytest.approx(BB84_001, abs=1e-9)

    def test_classical_bound(self):
        assert sec.asymptotic_fraction(2.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_just_below_threshold(self):
        assert sec.asymptotic_fraction(2.81, 0.225, 0.0) == pytest.approx(-0.0046108464386316216, abs=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            sec.asymptotic_fraction(1.9, 0.5, 0.0)
        with pytest.raises(ValueError):
            sec.asymptotic_fraction(2.5, 0.0, 0.0)

    @given(st.floats(2.0, TS), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0, 0.2))
    def test_nondecreasing_in_eta(self, s, e1, e2, q):
        lo, hi = sorted((e1, e2))
        assert sec.asymptotic_fraction(s, hi, q) >= sec.asymptotic_fraction(s, lo, q) - 1e-12


class TestMinTransmission:
    def test_threshold(self):
        t = sec.min_transmission(2.81, 0.0)
        # closed form: S sqrt(8 - S^2) / 2
        assert t == pytest.approx(2.81 * math.sqrt(8 - 2.81**2) / 2, abs=1e-4)
        assert 0.45 <= t <= 0.46

    def test_tsirelson_any_transmission(self):
        assert sec.min_transmission(TS, 0.0) == 0.0

    def test_noise_raises_threshold(self):
        assert sec.min_transmission(2.81, 0.02) > sec.min_transmission(2.81, 0.0)

    def test_infeasible(self):
        with pytest.raises(sec.InfeasibleError):
            sec.min_transmission(2.1, 0.0)


class TestBudget:
    def test_uniform(self):
        b = sec.uniform_budget(9e-9)
        assert b.eps_Q == pytest.approx(1e-9)
        assert b.total() == pytest.approx(9e-9)
        b.check(9e-9)

    def test_violation(self):
        with pytest.raises(ValueError):
            sec.EpsilonBudget(1e-3, 1e-3, 1e-3, 1e-3, 1e-3).check(1e-3)

    @given(st.floats(1e-100, 0.5))
    def test_penalty_reduces_to_main_result(self, eps_sec):
        eps_cor = 1e-12
        eps = eps_sec / 9
        expected = -(math.log2(eps_cor) + 4 * math.log2(eps))
        assert sec.penalty_bits(eps_cor, sec.uniform_budget(eps_sec)) == pytest.approx(expected, rel=1e-14)

    def test_optimize_not_worse(self):
        p = replace(FIG2, m_x=10**6, m_z=10**6, m_j=10**6)
        budget, rep = sec.optimize_budget(p)
        budget.check(p.eps_sec)
        assert rep.key_length >= sec.key_length(p).key_length


class TestKeyLength:
    def test_fig2_operating_point(self):
        rep = sec.key_length(FIG2)
        assert rep.feasible and rep.status == "ok"
        assert 0 < rep.secret_fraction < 0.8385
        assert rep.leak_EC == math.ceil(1.1 * FIG2.m_x * sec.binary_entropy(0.01 + rep.mu))

    def test_invariants(self):
        rep = sec.key_length(FIG2)
        assert 0 <= rep.key_length <= FIG2.m_x
        assert rep.secret_fraction == rep.key_length / FIG2.m_x

    def test_chsh_insufficient_is_distinct(self):
        rep = sec.key_length(replace(FIG2, S_tol=2.0))
        assert rep.status == "chsh_insufficient" and rep.key_length == 0 and not rep.feasible

    def test_negative_length(self):
        rep = sec.key_length(replace(FIG2, m_x=1000, m_z=1000, m_j=10**6, S_tol=2.8))
        assert rep.status == "negative_length" and rep.key_length == 0

    def test_leak_is_linear(self):
        base = replace(FIG2, leak_EC=5_000_000)
        l0 = sec.key_length(base).key_length
        assert sec.key_length(replace(base, leak_EC=5_001_234)).key_length == l0 - 1234

    def test_matches_eq1_oracle_fig2(self):
        expected, _ = key_length_eq1(10**8, 10**8, 10**8, TS, 0.01, 1.0, 1e-12, 1e-8)
        assert sec.key_length(FIG2).key_length == expected

    @pytest.mark.parametrize("s_tol", [2.7, 2.75, 2.8])
    def test_converges_to_asymptotic(self, s_tol):
        # leak -> m_x h(Q_tol) as all blocks grow
        p = replace(FIG2, S_tol=s_tol, eta_tol=1.0, ec_efficiency=1.0, m_x=10**12, m_z=10**12, m_j=10**12)
        rep = sec.key_length(p)
        assert rep.secret_fraction == pytest.approx(sec.asymptotic_fraction(s_tol, 1.0, 0.01), abs=1e-3)

    def test_convergence_at_tsirelson_is_quartic_root(self):
        # sqrt(8 - S_hat^2) ~ sqrt(xi) ~ m^(-1/4), so the gap shrinks slowly here
        def gap(m):
            p = replace(FIG2, ec_efficiency=1.0, m_x=m, m_z=m, m_j=m)
            return BB84_001 - sec.key_length(p).secret_fraction

        gaps = [gap(10**k) for k in (12, 14, 16)]
        assert gaps[0] > gaps[1] > gaps[2] > 0
        for a, b in zip(gaps, gaps[1:]):
            assert a / b == pytest.approx(math.sqrt(10), rel=0.05)

    def test_monotonicity_grid(self):
        base = replace(FIG2, m_x=10**7, m_z=10**7, m_j=10**7, S_tol=2.8, eta_tol=0.8)
        ell = lambda **kw: sec.key_length(replace(base, **kw)).key_length
        qs = [ell(Q_tol=q) for q in np.linspace(0, 0.05, 11)]
        assert all(b <= a for a, b in zip(qs, qs[1:]))
        ss = [ell(S_tol=s) for s in np.linspace(2.7, TS, 11)]
        assert all(b >= a for a, b in zip(ss, ss[1:]))
        es = [ell(eta_tol=e) for e in np.linspace(0.5, 1.0, 11)]
        assert all(b >= a for a, b in zip(es, es[1:]))
        ls = [ell(leak_EC=l) for l in np.linspace(0, 2e6, 11)]
        assert all(b <= a for a, b in zip(ls, ls[1:]))

    def test_tiny_epsilon_finite(self):
        rep = sec.key_length(replace(FIG2, eps_sec=1e-100, eps_cor=1e-100))
        assert math.isfinite(rep.raw_length) or rep.status == "chsh_insufficient"
        assert math.isfinite(rep.penalty)

    def test_observed_eta_enters_zeta_only(self):
        rep = sec.key_length(FIG2, eta=0.5)
        assert rep.zeta == pytest.approx(stats.zeta(10**8, 10**8, 0.5, 1e-8 / 9))


class TestSweep:
    def test_columns_and_order(self):
        p = replace(FIG2, S_tol=0.999 * TS)
        rows = sec.sweep_eta(p, np.linspace(0.05, 1.0, 40))
        asym = [r.fraction_asymptotic for r in rows]
        assert all(b >= a for a, b in zip(asym, asym[1:]))
        assert asym[0] < 0 < asym[-1]
        assert all(r.fraction_finite <= max(r.fraction_asymptotic, 0) for r in rows)

    def test_single_point(self):
        assert len(sec.sweep_eta(FIG2, [1.0])) == 1

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            sec.sweep_eta(FIG2, [0.0])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(10**4, 10**10),
    st.floats(2.5, TS),
    st.floats(0.0, 0.05),
    st.floats(0.2, 1.0),
    st.floats(1e-12, 1e-3),
)
def test_eq1_oracle_property(m, s_tol, q_tol, eta, eps_sec):
    p = sec.ProtocolParams(m_x=m, m_z=m, m_j=m, S_tol=s_tol, Q_tol=q_tol, eta_tol=eta, eps_cor=1e-10, eps_sec=eps_sec)
    ref = key_length_eq1(m, m, m, s_tol, q_tol, eta, 1e-10, eps_sec)
    rep = sec.key_length(p)
    if ref is None:
        assert rep.status == "chsh_insufficient"
    elif abs(float(ref[1]) - round(float(ref[1]))) > 1e-3:  # skip float ties at integers
        assert rep.key_length == ref[0]
