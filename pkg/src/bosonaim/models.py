"""Concrete Hamiltonians: quartic oscillator, two-photon bistable medium, su(2) models."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

from .algebra import (
    ANNIHILATED,
    OperatorExpression,
    RecurrenceRelation,
    build_recurrence,
    expr_power,
)

__all__ = [
    "AnharmonicParams",
    "BistableParams",
    "Generator",
    "Su2Action",
    "Su2Model",
    "TwoModeParams",
    "UnsupportedReductionError",
    "anharmonic_spec",
    "bistable_spec",
    "exact_reference",
    "su2_apply",
    "su2_recurrence",
    "two_mode_to_su2",
]


class UnsupportedReductionError(ValueError):
    """The two-mode model has no su(2) reduction for the given exponents."""


def _finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class AnharmonicParams:
    alpha: float

    def __post_init__(self):
        _finite(alpha=self.alpha)


@dataclass(frozen=True)
class BistableParams:
    omega: float = 1.0
    kappa: float = 0.0
    Omega_nl: float = 0.0

    def __post_init__(self):
        _finite(omega=self.omega, kappa=self.kappa, Omega_nl=self.Omega_nl)


@dataclass(frozen=True)
class TwoModeParams:
    omega: float = 1.0
    kappa: float = 0.0
    r: int = 1
    s: int = 1

    def __post_init__(self):
        _finite(omega=self.omega, kappa=self.kappa)
        if self.r < 1 or self.s < 1:
            raise ValueError(f"r and s must be positive integers, got r={self.r}, s={self.s}")


def anharmonic_spec(p: AnharmonicParams) -> OperatorExpression:
    """``a+ a + a a+ + (alpha/4) (a + a+)^4``, i.e. ``p^2 + x^2 + alpha x^4``."""
    kinetic = OperatorExpression.from_words([(1.0, "a+ a"), (1.0, "a a+")])
    x = OperatorExpression.from_words([(1.0, "a"), (1.0, "a+")])
    return kinetic + (p.alpha / 4.0) * expr_power(x, 4)


def bistable_spec(p: BistableParams) -> OperatorExpression:
    """Single-mode two-photon Hamiltonian with the band signs of its ket relation.

    The relation reads ``(w n + W n(n-1) - E)|n> + k sqrt(n(n-1))|n-2>
    - k sqrt((n+1)(n+2))|n+2> = 0``, which fixes the word coefficients to
    ``-k`` on ``a+ a+`` and ``+k`` on ``a a``.  Reversing both signs gives
    the same spectrum, since only the product of the two bands enters.
    """
    return OperatorExpression.from_words(
        [
            (p.omega, "a+ a"),
            (-p.kappa, "a+ a+"),
            (p.kappa, "a a"),
            (p.Omega_nl, "a+ a+ a a"),
        ]
    )


class Generator(enum.Enum):
    J_PLUS = "J+"
    J_MINUS = "J-"
    J_ZERO = "J0"


def _half_integer(value) -> Fraction:
    f = Fraction(value)
    if (2 * f).denominator != 1:
        raise ValueError(f"{value!r} is not an integer or half-integer")
    return f


@dataclass(frozen=True)
class Su2Model:
    """``H = w s N + k (J+^s + J-^s)`` in the spin-``j`` irrep (``N = 2j``)."""

    j: Fraction
    s: int = 1
    omega: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        j = _half_integer(self.j)
        if j < 0:
            raise ValueError(f"j must be nonnegative, got {self.j}")
        object.__setattr__(self, "j", j)
        if self.s < 1:
            raise ValueError(f"s must be a positive integer, got {self.s}")
        _finite(omega=self.omega, kappa=self.kappa)

    @property
    def two_j(self) -> int:
        return int(2 * self.j)

    @property
    def N(self) -> int:
        return self.two_j

    @property
    def dimension(self) -> int:
        return self.two_j + 1

    @property
    def casimir(self) -> Fraction:
        return self.j * (self.j + 1)

    def basis(self) -> list[Fraction]:
        """Magnetic quantum numbers ``m = -j, ..., j`` in ascending order."""
        return [Fraction(k - self.two_j, 2) for k in range(0, 2 * self.two_j + 1, 2)]

    def index(self, m) -> int:
        """Position of ``m`` in :meth:`basis`; raises for values outside the irrep."""
        fm = _half_integer(m)
        k = fm + self.j
        if k.denominator != 1 or not 0 <= k <= self.two_j:
            raise ValueError(f"m={m} is not in the spin-{self.j} basis")
        return int(k)


class Su2Action(NamedTuple):
    amplitude: float
    m: Fraction


def su2_apply(model: Su2Model, generator: Generator | str, power: int, m):
    """Apply ``generator**power`` to ``|j, m>``.

    Ladder generators compose ``sqrt((j -+ m)(j +- m + 1))`` factors and return
    ``ANNIHILATED`` once they leave the irrep.  ``J0`` returns ``m**power``
    with the ket unchanged.
    """
    generator = Generator(generator)
    if power < 1:
        raise ValueError(f"power must be positive, got {power}")
    k = model.index(m)
    two_j = model.two_j
    if generator is Generator.J_ZERO:
        mm = Fraction(2 * k - two_j, 2)
        return Su2Action(float(mm**power), mm)
    step = 1 if generator is Generator.J_PLUS else -1
    sq = Fraction(1)
    # work with doubled m so half-integers stay exact
    two_m = 2 * k - two_j
    for _ in range(power):
        if step == 1:
            factor = Fraction((two_j - two_m) * (two_j + two_m + 2), 4)
        else:
            factor = Fraction((two_j + two_m) * (two_j - two_m + 2), 4)
        if factor == 0:
            return ANNIHILATED
        sq *= factor
        two_m += 2 * step
    return Su2Action(math.sqrt(sq), Fraction(two_m, 2))


def su2_recurrence(model: Su2Model) -> RecurrenceRelation:
    """Ket relation of the su(2) model over the basis index ``k = m + j``.

    Amplitudes come from composing single ladder steps ``s`` times; the domain
    is ``0 <= k <= 2j`` so kets beyond either end of the irrep vanish.
    """
    s = model.s
    diag = 2.0 * model.omega * s * float(model.j)
    basis = model.basis()

    @lru_cache(maxsize=None)
    def amplitude(delta: int, k: int) -> float:
        if delta == 0:
            return diag
        gen = Generator.J_PLUS if delta > 0 else Generator.J_MINUS
        act = su2_apply(model, gen, s, basis[k])
        return 0.0 if act is ANNIHILATED else model.kappa * act.amplitude

    offsets = [0]
    if model.kappa != 0.0 and s <= model.two_j:
        offsets = [-s, 0, s]

    def label(k: int) -> str:
        return _fmt_m(Fraction(2 * k - model.two_j, 2))

    return RecurrenceRelation(
        offsets=tuple(offsets), amplitude=amplitude, lower=0, upper=model.two_j, index_label=label
    )


def _fmt_m(m: Fraction) -> str:
    return str(m.numerator) if m.denominator == 1 else f"{m.numerator}/{m.denominator}"


def two_mode_to_su2(p: TwoModeParams, N: int) -> Su2Model:
    """Restrict the two-mode model with ``r == s`` to total boson number ``N``."""
    if p.r != p.s:
        raise UnsupportedReductionError(
            f"r={p.r} != s={p.s} has no su(2) form; use oracle.two_mode_block for the conserved-charge block"
        )
    if N < 0:
        raise ValueError(f"total boson number must be nonnegative, got {N}")
    return Su2Model(j=Fraction(N, 2), s=p.s, omega=p.omega, kappa=p.kappa)


def exact_reference(model: str, params, n: int) -> float:
    """Closed-form eigenvalue for the exactly solvable members of each family.

    * ``"anharmonic"`` with ``alpha == 0``: ``2n + 1``.
    * ``"bistable"`` with ``Omega_nl == 0`` and ``omega > 0``:
      ``sqrt(omega^2 + 4 kappa^2) (n + 1/2) - omega/2``; for ``omega = 1`` and
      ``kappa = sqrt(3)/2`` this is ``2n + 1/2``.
    * ``"su2"`` with ``s == 1``: ``2 omega j + 2 (n - j) kappa`` for
      ``n = 0..2j``.
    """
    if n < 0:
        raise ValueError(f"level must be nonnegative, got {n}")
    if model == "anharmonic":
        if params.alpha != 0.0:
            raise ValueError("anharmonic oscillator has a closed form only for alpha == 0")
        return 2.0 * n + 1.0
    if model == "bistable":
        if params.Omega_nl != 0.0 or params.omega <= 0.0:
            raise ValueError("bistable model has a closed form only for Omega_nl == 0 and omega > 0")
        eps = math.sqrt(params.omega**2 + 4.0 * params.kappa**2)
        return eps * (n + 0.5) - params.omega / 2.0
    if model == "su2":
        if params.s != 1:
            raise ValueError("su(2) model has a closed form only for s == 1")
        if n > params.two_j:
            raise ValueError(f"level {n} exceeds the {params.dimension}-dimensional irrep")
        j = float(params.j)
        return 2.0 * params.omega * j + 2.0 * (n - j) * params.kappa
    raise ValueError(f"no closed form for model {model!r}")


def model_recurrence(model) -> RecurrenceRelation:
    """Recurrence for an operator expression or an :class:`Su2Model`."""
    if isinstance(model, Su2Model):
        return su2_recurrence(model)
    if isinstance(model, RecurrenceRelation):
        return model
    return build_recurrence(model)
