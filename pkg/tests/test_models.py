import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bosonaim.algebra import ANNIHILATED, OperatorWord, apply_word, build_recurrence
from bosonaim.models import (
    AnharmonicParams,
    BistableParams,
    Generator,
    Su2Model,
    TwoModeParams,
    UnsupportedReductionError,
    anharmonic_spec,
    bistable_spec,
    exact_reference,
    su2_apply,
    su2_recurrence,
    two_mode_to_su2,
)
from bosonaim.oracle import su2_block


def quartic_closed_form(alpha, delta, n):
    """Five-band ket coefficients of p^2 + x^2 + alpha x^4 written out by hand."""
    if delta == 0:
        return 2 * n + 1 + 1.5 * alpha * (n + n * n + 0.5)
    if delta == 2:
        return alpha * math.sqrt((n + 1) * (n + 2)) * (n + 1.5)
    if delta == -2:
        return alpha * math.sqrt(n * (n - 1)) * (n - 0.5) if n >= 2 else 0.0
    if delta == 4:
        return alpha / 4 * math.sqrt((n + 1) * (n + 2) * (n + 3) * (n + 4))
    if delta == -4:
        return alpha / 4 * math.sqrt(n * (n - 1) * (n - 2) * (n - 3)) if n >= 4 else 0.0
    raise ValueError(delta)


class TestAnharmonic:
    @pytest.mark.parametrize("alpha", [0.01, 0.1, 1.0])
    def test_recurrence_matches_closed_form(self, alpha):
        rec = build_recurrence(anharmonic_spec(AnharmonicParams(alpha)))
        for n in range(31):
            for delta in (-4, -2, 0, 2, 4):
                expected = quartic_closed_form(alpha, delta, n)
                assert abs(rec.coeff(delta, n) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_dense_matrix_oracle(self):
        # x = (a + a+) / sqrt(2) scaled so that p^2 + x^2 = 2 a+ a + 1
        size = 40
        a = np.diag(np.sqrt(np.arange(1, size)), 1)
        x = a + a.T
        h = a.T @ a + a @ a.T + 0.1 / 4 * np.linalg.matrix_power(x, 4)
        rec = build_recurrence(anharmonic_spec(AnharmonicParams(0.1)))
        for n in range(size - 5):
            for delta in (-4, -2, 0, 2, 4):
                if n + delta >= 0:
                    assert rec.coeff(delta, n) == pytest.approx(h[n + delta, n], rel=1e-12, abs=1e-12)

    def test_examples(self):
        rec = build_recurrence(anharmonic_spec(AnharmonicParams(0.1)))
        assert rec.coeff(0, 1) == pytest.approx(3.375, abs=1e-13)
        assert rec.coeff(2, 0) == pytest.approx(0.1 * math.sqrt(2) * 1.5, abs=1e-13)

    def test_nonfinite_alpha(self):
        with pytest.raises(ValueError):
            AnharmonicParams(math.nan)


class TestBistable:
    def test_diagonal(self):
        rec = build_recurrence(bistable_spec(BistableParams(1.0, 0.1, 0.5)))
        assert rec.coeff(0, 3) == pytest.approx(6.0, abs=1e-13)

    def test_band_signs(self):
        k = 0.3
        rec = build_recurrence(bistable_spec(BistableParams(1.0, k, 0.0)))
        for n in range(2, 20):
            assert rec.coeff(2, n) == pytest.approx(-k * math.sqrt((n + 1) * (n + 2)))
            assert rec.coeff(-2, n) == pytest.approx(k * math.sqrt(n * (n - 1)))

    def test_number_operator_limit(self):
        rec = build_recurrence(bistable_spec(BistableParams(1.3, 0.0, 0.0)))
        assert rec.offsets == (0,)
        assert [rec.coeff(0, n) for n in range(5)] == pytest.approx([1.3 * n for n in range(5)])


class TestSu2Action:
    def test_raise_from_bottom(self):
        act = su2_apply(Su2Model(j=3), Generator.J_PLUS, 1, -3)
        assert act.amplitude == pytest.approx(math.sqrt(6))
        assert act.m == -2

    def test_double_raise(self):
        act = su2_apply(Su2Model(j=3), "J+", 2, -3)
        assert act.amplitude == pytest.approx(math.sqrt(60))
        assert act.m == -1

    def test_top_annihilates(self):
        assert su2_apply(Su2Model(j=Fraction(1, 2)), Generator.J_PLUS, 1, Fraction(1, 2)) is ANNIHILATED

    def test_weight(self):
        act = su2_apply(Su2Model(j=Fraction(3, 2)), Generator.J_ZERO, 2, Fraction(-1, 2))
        assert act == (0.25, Fraction(-1, 2))

    def test_invalid_m(self):
        with pytest.raises(ValueError):
            su2_apply(Su2Model(j=1), Generator.J_PLUS, 1, Fraction(1, 2))
        with pytest.raises(ValueError):
            su2_apply(Su2Model(j=1), Generator.J_PLUS, 1, 2)

    def test_invalid_spin(self):
        with pytest.raises(ValueError):
            Su2Model(j=Fraction(1, 3))
        with pytest.raises(ValueError):
            Su2Model(j=-1)

    @given(st.integers(0, 20), st.integers(1, 4), st.data())
    def test_mirror_symmetry(self, two_j, s, data):
        model = Su2Model(j=Fraction(two_j, 2), s=s, kappa=0.7)
        rec = su2_recurrence(model)
        k = data.draw(st.integers(0, two_j))
        # <m+s| J+^s |m> equals <-m-s| J-^s |-m>
        assert rec.coeff(s, k) == pytest.approx(rec.coeff(-s, two_j - k), rel=1e-14)


def schwinger_matrices(N):
    basis = [(na, N - na) for na in range(N + 1)]
    index = {b: i for i, b in enumerate(basis)}
    up, low = OperatorWord.parse("a+"), OperatorWord.parse("a")

    def bilinear(wa, wb):
        m = np.zeros((N + 1, N + 1))
        for col, (na, nb) in enumerate(basis):
            x, y = apply_word(wa, na), apply_word(wb, nb)
            if x is not ANNIHILATED and y is not ANNIHILATED:
                m[index[(x.occupation, y.occupation)], col] = x.amplitude * y.amplitude
        return m

    jp = bilinear(up, low)
    jm = bilinear(low, up)
    j0 = np.diag([(na - nb) / 2 for na, nb in basis])
    return basis, jp, jm, j0


@pytest.mark.parametrize("N", range(7))
def test_schwinger_algebra_and_casimir(N):
    _, jp, jm, j0 = schwinger_matrices(N)
    assert np.max(np.abs(jp @ jm - jm @ jp - 2 * j0), initial=0) <= 1e-12
    assert np.max(np.abs(j0 @ jp - jp @ j0 - jp), initial=0) <= 1e-12
    assert np.max(np.abs(j0 @ jm - jm @ j0 + jm), initial=0) <= 1e-12
    casimir = jm @ jp + j0 @ (j0 + np.eye(N + 1))
    assert np.max(np.abs(casimir - N * (N + 2) / 4 * np.eye(N + 1))) <= 1e-12


@pytest.mark.parametrize("N", range(7))
def test_ladder_action_matches_schwinger_realization(N):
    basis, jp, _, _ = schwinger_matrices(N)
    model = Su2Model(j=Fraction(N, 2))
    for col, (na, nb) in enumerate(basis):
        m = Fraction(na - nb, 2)
        act = su2_apply(model, Generator.J_PLUS, 1, m)
        if act is ANNIHILATED:
            assert not jp[:, col].any()
        else:
            row = basis.index((na + 1, nb - 1))
            assert act.amplitude == pytest.approx(jp[row, col], rel=1e-14)
    assert model.casimir == Fraction(N * (N + 2), 4)


def test_trace_of_reference_block():
    for kappa in (0.1, 0.2, 0.5):
        block = su2_block(Su2Model(j=3, s=2, omega=1.0, kappa=kappa))
        assert np.sum(np.linalg.eigvalsh(block.to_dense())) == pytest.approx(84.0, abs=1e-10)


class TestExactReference:
    def test_bistable_exact_case(self):
        assert exact_reference("bistable", BistableParams(1.0, math.sqrt(3) / 2, 0.0), 2) == pytest.approx(4.5)

    def test_su2_linear_family(self):
        assert exact_reference("su2", Su2Model(j=3, s=1, kappa=0.2), 0) == pytest.approx(4.8)

    def test_su2_without_coupling(self):
        model = Su2Model(j=Fraction(5, 2), s=1, kappa=0.0)
        assert {exact_reference("su2", model, n) for n in range(6)} == {5.0}

    def test_harmonic(self):
        assert [exact_reference("anharmonic", AnharmonicParams(0.0), n) for n in range(3)] == [1, 3, 5]

    def test_outside_family(self):
        with pytest.raises(ValueError):
            exact_reference("anharmonic", AnharmonicParams(0.1), 0)
        with pytest.raises(ValueError):
            exact_reference("bistable", BistableParams(1.0, 0.1, 0.1), 0)
        with pytest.raises(ValueError):
            exact_reference("su2", Su2Model(j=1, s=1), 3)
        with pytest.raises(ValueError):
            exact_reference("nope", None, 0)


class TestTwoModeReduction:
    def test_reference_block(self):
        model = two_mode_to_su2(TwoModeParams(1.0, 0.5, 2, 2), 6)
        assert model.j == 3 and model.s == 2

    def test_trivial_block(self):
        model = two_mode_to_su2(TwoModeParams(2.5, 0.4, 1, 1), 0)
        assert model.dimension == 1
        rec = su2_recurrence(model)
        assert rec.coeff(0, 0) == 0.0

    def test_cubic_couplings_vanish(self):
        model = two_mode_to_su2(TwoModeParams(1.0, 0.7, 3, 3), 2)
        assert model.j == 1
        block = su2_block(model).to_dense()
        np.testing.assert_allclose(block, 6.0 * np.eye(3), atol=1e-14)
        assert su2_recurrence(model).offsets == (0,)

    def test_unequal_exponents(self):
        with pytest.raises(UnsupportedReductionError):
            two_mode_to_su2(TwoModeParams(1.0, 0.5, 2, 1), 3)

    def test_bad_exponents(self):
        with pytest.raises(ValueError):
            TwoModeParams(r=0)
