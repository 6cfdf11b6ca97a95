import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosonaim.aim import ParityChain, decompose_chains, solve
from bosonaim.algebra import ANNIHILATED, OperatorWord, apply_word, build_recurrence
from bosonaim.models import (
    AnharmonicParams,
    BistableParams,
    Su2Model,
    TwoModeParams,
    anharmonic_spec,
    bistable_spec,
    two_mode_to_su2,
)
from bosonaim.oracle import (
    BandedMatrix,
    OracleError,
    convergence_study,
    eig_general,
    single_mode_matrix,
    su2_block,
    two_mode_basis,
    two_mode_block,
    two_mode_charge,
    two_mode_hamiltonian_terms,
)

EVEN = ParityChain(step=2, residue=0, seeds=(0, 2), label="even")
TABLE_II = [(math.sqrt(3) / 2, 0.0), (0.1, 0.1), (0.1, 0.5), (0.5, 0.1)]


def chains(expr):
    return decompose_chains(build_recurrence(expr))


class TestDense:
    def test_diagonal(self):
        rep = eig_general(BandedMatrix.from_dense(np.diag([2.0, 1.0]), symmetric_hint=True))
        np.testing.assert_allclose(rep.real, [1.0, 2.0])

    def test_rotation_generator(self):
        rep = eig_general(BandedMatrix.from_dense(np.array([[0.0, 1.0], [-1.0, 0.0]])))
        np.testing.assert_allclose(rep.eigenvalues, [-1j, 1j], atol=1e-15)
        assert rep.max_imag() == pytest.approx(1.0)

    def test_band_round_trip(self):
        rng = np.random.default_rng(3)
        m = np.triu(np.tril(rng.normal(size=(6, 6)), 2), -1)
        b = BandedMatrix.from_dense(m)
        np.testing.assert_array_equal(b.to_dense(), m)
        assert b.trace() == pytest.approx(np.trace(m))
        assert set(b.bands) <= {-1, 0, 1, 2}

    def test_band_validation(self):
        with pytest.raises(ValueError):
            BandedMatrix(2, {0: np.array([1.0])})
        with pytest.raises(ValueError):
            BandedMatrix(1, {0: np.array([np.nan])})
        with pytest.raises(ValueError):
            BandedMatrix(0, {})


class TestSingleMode:
    def test_harmonic_even_chain(self):
        m = single_mode_matrix(anharmonic_spec(AnharmonicParams(0.0)), EVEN, 8)
        assert m.basis == (0, 2, 4, 6, 8)
        np.testing.assert_allclose(eig_general(m).real, [1, 5, 9, 13, 17])

    def test_quartic_ground_state(self):
        rep = eig_general(single_mode_matrix(anharmonic_spec(AnharmonicParams(0.1)), EVEN, 200))
        assert rep.real[0] == pytest.approx(1.065286, abs=5e-7)
        assert rep.residual_bound < 1e-8

    def test_bistable_odd_listing(self):
        expr = bistable_spec(BistableParams(1.0, 0.1, 0.5))
        odd = chains(expr)[1]
        rep = eig_general(single_mode_matrix(expr, odd, 200))
        assert rep.real[1] == pytest.approx(6.0102248594, abs=1e-9)

    def test_truncation_too_small(self):
        with pytest.raises(ValueError):
            single_mode_matrix(anharmonic_spec(AnharmonicParams(0.1)), EVEN, 4)

    def test_quartic_convergence_study(self):
        study = convergence_study(anharmonic_spec(AnharmonicParams(0.1)), EVEN, [50, 100, 200])
        assert abs(study[2].real[0] - study[1].real[0]) < 1e-10
        assert np.max(np.abs(study[2].real[:3] - study[1].real[:3])) < 1e-10

    def test_harmonic_truncations_exact(self):
        for rep in convergence_study(anharmonic_spec(AnharmonicParams(0.0)), EVEN, [10, 20]):
            assert rep.real[:5] == pytest.approx([1, 5, 9, 13, 17], abs=1e-12)

    def test_bistable_convergence_study(self):
        expr = bistable_spec(BistableParams(1.0, 0.5, 0.1))
        for chain in chains(expr):
            a, b = convergence_study(expr, chain, [100, 200])
            assert np.max(np.abs(a.lowest(3) - b.lowest(3))) < 1e-9

    def test_study_order(self):
        with pytest.raises(ValueError):
            convergence_study(anharmonic_spec(AnharmonicParams(0.1)), EVEN, [200, 100])

    @pytest.mark.parametrize("alpha", [0.1, 1.0])
    def test_variational_monotonicity(self, alpha):
        expr = anharmonic_spec(AnharmonicParams(alpha))
        for chain in chains(expr):
            lows = [r.real[0] for r in convergence_study(expr, chain, range(10, 121, 10))]
            assert all(b <= a + 1e-12 for a, b in zip(lows, lows[1:]))

    @pytest.mark.parametrize("kappa, Omega", TABLE_II)
    def test_reported_levels_are_real(self, kappa, Omega):
        expr = bistable_spec(BistableParams(1.0, kappa, Omega))
        for chain in chains(expr):
            rep = eig_general(single_mode_matrix(expr, chain, 200))
            assert rep.max_imag(6) < 1e-8


class TestSu2Block:
    def test_reference_block(self):
        block = su2_block(Su2Model(j=3, s=2, kappa=0.5))
        six = 2 * math.sqrt(6)
        fifteen = 2 * math.sqrt(15)
        expected = sorted([12, 9 - six, 9 + six, 12 - fifteen, 12 + fifteen, 15 - six, 15 + six])
        np.testing.assert_allclose(eig_general(block).real, expected, atol=1e-12)

    @pytest.mark.parametrize("two_j, s", [(6, 2), (5, 1), (8, 3), (1, 2)])
    def test_trace(self, two_j, s):
        model = Su2Model(j=Fraction(two_j, 2), s=s, omega=1.3, kappa=0.4)
        block = su2_block(model)
        assert block.trace() == pytest.approx((two_j + 1) * 2 * 1.3 * s * two_j / 2, abs=1e-10)
        assert block.trace() == float(np.sum(np.diagonal(block.to_dense())))


class TestTwoMode:
    def test_basis(self):
        assert two_mode_basis(2, 1, 2) == [(0, 2), (1, 0)]
        assert len(two_mode_basis(2, 2, 12)) == 7
        with pytest.raises(ValueError):
            two_mode_basis(1, 1, -1)

    def test_charge_label(self):
        assert two_mode_charge(2, 2, 6) == 12
        assert two_mode_charge(2, 1, 3) == 3

    def test_linear_case(self):
        block = two_mode_block(TwoModeParams(1.0, 0.3, 1, 1), 2)
        np.testing.assert_allclose(eig_general(block).real, [1.4, 2.0, 2.6], atol=1e-12)

    def test_quadratic_formula(self):
        omega, kappa = 1.0, 0.3
        block = two_mode_block(TwoModeParams(omega, kappa, 2, 1), 2)
        # both states carry energy 2 omega; the coupling amplitude is kappa sqrt 2
        np.testing.assert_allclose(
            eig_general(block).real, [2 * omega - kappa * math.sqrt(2), 2 * omega + kappa * math.sqrt(2)], atol=1e-14
        )

    def test_empty_block(self):
        with pytest.raises(ValueError):
            two_mode_block(TwoModeParams(1.0, 0.3, 2, 2), 3)

    @pytest.mark.parametrize("kappa", [0.1, 0.2, 0.5])
    def test_reference_spectra(self, kappa):
        tm = TwoModeParams(1.0, kappa, 2, 2)
        block = eig_general(two_mode_block(tm, two_mode_charge(2, 2, 6))).real
        aim = solve(two_mode_to_su2(tm, 6)).values
        np.testing.assert_allclose(block, aim, atol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 10), st.floats(-1, 1), st.floats(0.1, 2))
    def test_block_completeness(self, s, N, kappa, omega):
        tm = TwoModeParams(omega, kappa, s, s)
        block = eig_general(two_mode_block(tm, two_mode_charge(s, s, N))).real
        aim = solve(two_mode_to_su2(tm, N)).values
        assert len(aim) == len(block) == N + 1
        np.testing.assert_allclose(block, aim, atol=1e-10)

    @pytest.mark.parametrize("r, s", [(1, 1), (2, 1), (1, 3), (2, 3)])
    def test_charge_is_conserved(self, r, s):
        # brute force: the Hamiltonian commutes with r n_a + s n_b on a box of states
        tm = TwoModeParams(1.0, 0.7, r, s)
        states = [(a, b) for a in range(8) for b in range(8)]
        for coeff, wa, wb in two_mode_hamiltonian_terms(tm):
            for na, nb in states:
                x, y = apply_word(wa, na), apply_word(wb, nb)
                if x is ANNIHILATED or y is ANNIHILATED:
                    continue
                assert r * x.occupation + s * y.occupation == r * na + s * nb

    def test_leaky_block_detected(self, monkeypatch):
        import bosonaim.oracle as oracle

        bad = [(1.0, OperatorWord.parse("a+"), OperatorWord())]
        monkeypatch.setattr(oracle, "two_mode_hamiltonian_terms", lambda p: bad)
        with pytest.raises(OracleError):
            oracle.two_mode_block(TwoModeParams(1.0, 0.1, 1, 1), 2)
