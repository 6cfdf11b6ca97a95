"""Truncated and finite-block matrix diagonalization, independent of the iteration.

Matrices are assembled straight from operator matrix elements (single mode),
from repeated su(2) ladder steps, or from two-mode ladder actions, and then
handed to LAPACK through numpy.  Non-symmetric input gets the general real
eigensolver with complex output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aim import ParityChain
from .algebra import ANNIHILATED, OperatorExpression, OperatorWord, apply_word, column
from .models import Generator, Su2Model, TwoModeParams, su2_apply

__all__ = [
    "BandedMatrix",
    "OracleError",
    "SpectrumReport",
    "convergence_study",
    "eig_general",
    "single_mode_matrix",
    "su2_block",
    "two_mode_basis",
    "two_mode_block",
]


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class BandedMatrix:
    """Square matrix stored by diagonals; ``bands[k][i]`` is entry ``(i, i + k)``."""

    dimension: int
    bands: dict[int, np.ndarray]
    symmetric_hint: bool = False
    basis: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("matrix dimension must be positive")
        for k, band in self.bands.items():
            if len(band) != self.dimension - abs(k):
                raise ValueError(f"band {k} has length {len(band)}, expected {self.dimension - abs(k)}")
            if not np.all(np.isfinite(band)):
                raise ValueError(f"band {k} has non-finite entries")

    @classmethod
    def from_dense(cls, m: np.ndarray, symmetric_hint: bool = False, basis: Sequence = ()) -> BandedMatrix:
        m = np.asarray(m, dtype=np.float64)
        n = m.shape[0]
        bands = {}
        for k in range(-n + 1, n):
            d = np.diagonal(m, k).copy()
            if k == 0 or np.any(d != 0):
                bands[k] = d
        return cls(n, bands, symmetric_hint, tuple(basis))

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.dimension, self.dimension))
        for k, band in self.bands.items():
            idx = np.arange(len(band))
            if k >= 0:
                m[idx, idx + k] = band
            else:
                m[idx - k, idx] = band
        return m

    def trace(self) -> float:
        return float(np.sum(self.bands.get(0, 0.0)))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    truncation: str
    residual_bound: float

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=complex)
        order = np.lexsort((ev.imag, ev.real))
        object.__setattr__(self, "eigenvalues", ev[order])

    @property
    def real(self) -> np.ndarray:
        return self.eigenvalues.real

    def max_imag(self, k: int | None = None) -> float:
        ev = self.eigenvalues if k is None else self.eigenvalues[:k]
        return float(np.max(np.abs(ev.imag))) if ev.size else 0.0

    def lowest(self, k: int) -> np.ndarray:
        return self.eigenvalues[:k]


def eig_general(matrix: BandedMatrix, truncation: str = "") -> SpectrumReport:
    """All eigenvalues, with the largest eigenpair residual as a quality bound."""
    a = matrix.to_dense()
    try:
        if matrix.symmetric_hint:
            w, v = np.linalg.eigh(a)
        else:
            w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"eigensolver failed on a {matrix.dimension}x{matrix.dimension} matrix: {exc}") from exc
    resid = np.linalg.norm(a @ v - v * w, axis=0) / np.maximum(np.linalg.norm(v, axis=0), 1e-300)
    return SpectrumReport(w, truncation or f"dim={matrix.dimension}", float(np.max(resid)))


def single_mode_matrix(expr: OperatorExpression, chain: ParityChain, n_max: int) -> BandedMatrix:
    """Section of ``expr`` on the chain occupations ``<= n_max``."""
    if n_max < chain.seeds[-1] + 2 * chain.step:
        raise ValueError(
            f"n_max={n_max} is too small for chain {chain.label!r}; need at least {chain.seeds[-1] + 2 * chain.step}"
        )
    occ = list(chain.occupations(n_max))
    index = {n: i for i, n in enumerate(occ)}
    m = np.zeros((len(occ), len(occ)))
    for j, n in enumerate(occ):
        for row, amp in column(expr, n, exact=True).items():
            i = index.get(row)
            if i is not None:
                m[i, j] += amp
    return BandedMatrix.from_dense(m, symmetric_hint=expr.is_hermitian(), basis=occ)


def convergence_study(expr: OperatorExpression, chain: ParityChain, n_max_list: Sequence[int]) -> list[SpectrumReport]:
    if list(n_max_list) != sorted(n_max_list):
        raise ValueError("n_max_list must be ascending")
    return [eig_general(single_mode_matrix(expr, chain, n), f"n_max={n}") for n in n_max_list]


def su2_block(model: Su2Model) -> BandedMatrix:
    """Full ``(2j+1)``-dimensional matrix of the su(2) model in the ``m`` basis."""
    basis = model.basis()
    dim = len(basis)
    m = np.eye(dim) * (2.0 * model.omega * model.s * float(model.j))
    for col, mm in enumerate(basis):
        for gen in (Generator.J_PLUS, Generator.J_MINUS):
            act = su2_apply(model, gen, model.s, mm)
            if act is not ANNIHILATED:
                m[model.index(act.m), col] += model.kappa * act.amplitude
    return BandedMatrix.from_dense(m, symmetric_hint=True, basis=basis)


def two_mode_basis(r: int, s: int, charge: int) -> list[tuple[int, int]]:
    """All ``(n_a, n_b)`` with ``r n_a + s n_b = charge``, ordered by ``n_a``."""
    if charge < 0:
        raise ValueError(f"charge must be nonnegative, got {charge}")
    return [(na, (charge - r * na) // s) for na in range(charge // r + 1) if (charge - r * na) % s == 0]


def _apply_two_mode(word_a: OperatorWord, word_b: OperatorWord, na: int, nb: int):
    # the two modes commute, so each factor acts on its own occupation
    left = apply_word(word_a, na, exact=True)
    right = apply_word(word_b, nb, exact=True)
    if left is ANNIHILATED or right is ANNIHILATED:
        return None
    return left.amplitude * right.amplitude, (left.occupation, right.occupation)


def two_mode_hamiltonian_terms(p: TwoModeParams):
    """``(coeff, word on mode a, word on mode b)`` triples of the two-mode model."""
    raise_a = OperatorWord.parse(" ".join(["a+"] * p.s))
    lower_a = OperatorWord.parse(" ".join(["a"] * p.s))
    raise_b = OperatorWord.parse(" ".join(["a+"] * p.r))
    lower_b = OperatorWord.parse(" ".join(["a"] * p.r))
    number = OperatorWord.parse("a+ a")
    ident = OperatorWord()
    return [
        (p.r * p.omega, number, ident),
        (p.s * p.omega, ident, number),
        (p.kappa, raise_a, lower_b),
        (p.kappa, lower_a, raise_b),
    ]


def two_mode_block(p: TwoModeParams, charge: int) -> BandedMatrix:
    """Matrix of the two-mode model on the block ``r n_a + s n_b = charge``."""
    basis = two_mode_basis(p.r, p.s, charge)
    if not basis:
        raise ValueError(f"no states with {p.r} n_a + {p.s} n_b = {charge}")
    index = {state: i for i, state in enumerate(basis)}
    m = np.zeros((len(basis), len(basis)))
    for col, (na, nb) in enumerate(basis):
        for coeff, wa, wb in two_mode_hamiltonian_terms(p):
            hit = _apply_two_mode(wa, wb, na, nb)
            if hit is None:
                continue
            amp, state = hit
            if state not in index:
                raise OracleError(f"coupling left the charge-{charge} block: {(na, nb)} -> {state}")
            m[index[state], col] += coeff * amp
    return BandedMatrix.from_dense(m, symmetric_hint=True, basis=basis)


def two_mode_charge(r: int, s: int, N: int) -> int:
    """Block charge for the reduced label ``N``: ``gcd(r, s) * N``.

    For ``r == s`` this is the block with total boson number ``N``.
    """
    return math.gcd(r, s) * N
