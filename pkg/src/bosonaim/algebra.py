"""Ladder-operator words, their exact Fock-space action, and induced recurrences.

Operators are kept as weighted sums of words over the two letters ``a``
(lowering) and ``a+`` (raising).  Words are applied rightmost-first, so the
word ``a+ a`` is the number operator.  No normal ordering is ever performed:
powers are expanded by formal distribution and every word is evaluated
directly on a ket.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, NamedTuple

__all__ = [
    "ANNIHILATED",
    "CapacityError",
    "LadderAction",
    "Letter",
    "OperatorExpression",
    "OperatorWord",
    "RecurrenceRelation",
    "apply_word",
    "build_recurrence",
    "column",
    "expr_power",
    "matrix_element",
]

DEFAULT_TERM_CAP = 10**6


class CapacityError(RuntimeError):
    """Raised when a formal expansion would exceed the configured term cap."""


class Letter(enum.Enum):
    LOWER = "a"
    RAISE = "a+"

    @property
    def shift(self) -> int:
        return 1 if self is Letter.RAISE else -1

    @property
    def adjoint(self) -> Letter:
        return Letter.LOWER if self is Letter.RAISE else Letter.RAISE


_TOKENS = {"a": Letter.LOWER, "a+": Letter.RAISE, "a^+": Letter.RAISE, "ad": Letter.RAISE}


@dataclass(frozen=True)
class OperatorWord:
    """An ordered product of ladder letters; the empty word is the identity."""

    letters: tuple[Letter, ...] = ()

    @classmethod
    def parse(cls, text: str) -> OperatorWord:
        """Parse a space separated word such as ``"a+ a+ a a"``.

        The tokens ``1`` and the empty string denote the identity.
        """
        letters = []
        for tok in text.split():
            if tok == "1":
                continue
            try:
                letters.append(_TOKENS[tok])
            except KeyError:
                raise ValueError(f"unknown ladder letter {tok!r} in word {text!r}") from None
        return cls(tuple(letters))

    @property
    def net_shift(self) -> int:
        return sum(letter.shift for letter in self.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: OperatorWord) -> OperatorWord:
        # self applied after other
        return OperatorWord(self.letters + other.letters)

    def adjoint(self) -> OperatorWord:
        return OperatorWord(tuple(letter.adjoint for letter in reversed(self.letters)))

    def __str__(self) -> str:
        return " ".join(letter.value for letter in self.letters) or "1"


class _Annihilated:
    """Result of a word that pushes some intermediate occupation below zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "ANNIHILATED"

    def __reduce__(self):
        return (_Annihilated, ())


ANNIHILATED = _Annihilated()


class LadderAction(NamedTuple):
    amplitude: float
    occupation: int


def _squared_amplitude(word: OperatorWord, n: int) -> tuple[int, int] | None:
    """Integer squared amplitude and final occupation, or None if annihilated."""
    sq = 1
    k = n
    for letter in reversed(word.letters):
        if letter is Letter.RAISE:
            k += 1
            sq *= k
        else:
            if k == 0:
                return None
            sq *= k
            k -= 1
    return sq, k


def apply_word(word: OperatorWord, n: int, exact: bool = False) -> LadderAction | _Annihilated:
    """Act with ``word`` on the Fock ket ``|n>``.

    Args:
        word: The operator word, applied rightmost letter first.
        n: Occupation of the ket, ``n >= 0``.
        exact: Accumulate the squared amplitude as an exact integer and take a
            single square root at the end instead of multiplying square roots.

    Returns:
        ``LadderAction(amplitude, occupation)`` or ``ANNIHILATED``.
    """
    if n < 0:
        raise ValueError(f"occupation must be nonnegative, got {n}")
    if exact:
        res = _squared_amplitude(word, n)
        if res is None:
            return ANNIHILATED
        return LadderAction(math.sqrt(res[0]), res[1])
    amp = 1.0
    k = n
    for letter in reversed(word.letters):
        if letter is Letter.RAISE:
            k += 1
            amp *= math.sqrt(k)
        else:
            if k == 0:
                return ANNIHILATED
            amp *= math.sqrt(k)
            k -= 1
    return LadderAction(amp, k)


def _merge(terms: Iterable[tuple[float, OperatorWord]]) -> tuple[tuple[float, OperatorWord], ...]:
    acc: dict[OperatorWord, float] = {}
    for coeff, word in terms:
        if not math.isfinite(coeff):
            raise ValueError(f"non-finite coefficient {coeff!r} for word {word}")
        acc[word] = acc.get(word, 0.0) + coeff
    return tuple((c, w) for w, c in acc.items() if c != 0.0)


@dataclass(frozen=True)
class OperatorExpression:
    """A finite real linear combination of operator words.

    Construction merges terms whose letter sequences are identical and drops
    exact zeros.  Words that are only algebraically equal (``a a+`` versus
    ``a+ a + 1``) are kept apart.
    """

    terms: tuple[tuple[float, OperatorWord], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _merge(self.terms))

    @classmethod
    def from_words(cls, pairs: Iterable[tuple[float, str | OperatorWord]]) -> OperatorExpression:
        return cls(
            tuple(
                (float(c), w if isinstance(w, OperatorWord) else OperatorWord.parse(w))
                for c, w in pairs
            )
        )

    @classmethod
    def identity(cls, coeff: float = 1.0) -> OperatorExpression:
        return cls(((coeff, OperatorWord()),))

    def __iter__(self) -> Iterator[tuple[float, OperatorWord]]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: OperatorExpression) -> OperatorExpression:
        return OperatorExpression(self.terms + other.terms)

    def __sub__(self, other: OperatorExpression) -> OperatorExpression:
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> OperatorExpression:
        return OperatorExpression(tuple((scalar * c, w) for c, w in self.terms))

    def __mul__(self, other):
        if isinstance(other, OperatorExpression):
            return OperatorExpression(
                tuple((c1 * c2, w1 * w2) for c1, w1 in self.terms for c2, w2 in other.terms)
            )
        return other * self

    def adjoint(self) -> OperatorExpression:
        return OperatorExpression(tuple((c, w.adjoint()) for c, w in self.terms))

    def is_hermitian(self) -> bool:
        """True when every word is matched by its adjoint with an equal coefficient."""
        mine = {w: c for c, w in self.terms}
        return all(mine.get(w.adjoint()) == c for c, w in self.terms)

    @property
    def net_shifts(self) -> frozenset[int]:
        return frozenset(w.net_shift for _, w in self.terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{c:g}*[{w}]" for c, w in self.terms)


def expr_power(base: OperatorExpression, k: int, max_terms: int = DEFAULT_TERM_CAP) -> OperatorExpression:
    """Formally distribute ``base**k`` without any commutator rewriting."""
    if k < 0:
        raise ValueError(f"power must be nonnegative, got {k}")
    if len(base) ** k > max_terms:
        raise CapacityError(f"expanding {len(base)} terms to power {k} exceeds the cap of {max_terms} words")
    result = OperatorExpression.identity()
    for _ in range(k):
        result = result * base
    return result


def column(expr: OperatorExpression, col: int, exact: bool = False) -> dict[int, float]:
    """Amplitudes of ``expr |col>`` keyed by resulting occupation."""
    out: dict[int, float] = {}
    for coeff, word in expr.terms:
        act = apply_word(word, col, exact=exact)
        if act is ANNIHILATED:
            continue
        out[act.occupation] = out.get(act.occupation, 0.0) + coeff * act.amplitude
    return out


def matrix_element(expr: OperatorExpression, row: int, col: int, exact: bool = False) -> float:
    """Return ``<row| expr |col>``."""
    if row < 0 or col < 0:
        raise ValueError(f"occupations must be nonnegative, got row={row}, col={col}")
    return column(expr, col, exact=exact).get(row, 0.0)


@dataclass(frozen=True)
class RecurrenceRelation:
    """Banded ket relation ``(H - E)|n> = sum_d coeff(d, n) |n+d> - E |n> = 0``.

    ``coeff(0, n)`` is the energy independent part of the diagonal channel;
    the ``-E`` term is implicit and always carries slope exactly -1.  The
    domain is ``lower <= n`` (and ``n <= upper`` when ``upper`` is set).
    Coefficients pointing outside the domain are reported as zero.
    """

    offsets: tuple[int, ...]
    amplitude: Callable[[int, int], float] = field(repr=False, compare=False)
    lower: int = 0
    upper: int | None = None
    index_label: Callable[[int], str] = field(default=str, repr=False, compare=False)

    def in_domain(self, n: int) -> bool:
        return n >= self.lower and (self.upper is None or n <= self.upper)

    def coeff(self, delta: int, n: int) -> float:
        if delta not in self.offsets or not self.in_domain(n) or not self.in_domain(n + delta):
            return 0.0
        return self.amplitude(delta, n)

    @property
    def finite(self) -> bool:
        return self.upper is not None

    @property
    def coupling_offsets(self) -> tuple[int, ...]:
        return tuple(d for d in self.offsets if d != 0)

    def domain(self) -> range:
        if self.upper is None:
            raise ValueError("unbounded recurrence has no finite domain")
        return range(self.lower, self.upper + 1)


def build_recurrence(expr: OperatorExpression, exact: bool = True) -> RecurrenceRelation:
    """Extract the ket recurrence induced by ``H = expr`` on the Fock chain."""
    if not expr.terms:
        raise ValueError("cannot build a recurrence from an empty expression")
    by_shift: dict[int, list[tuple[float, OperatorWord]]] = {}
    for coeff, word in expr.terms:
        by_shift.setdefault(word.net_shift, []).append((coeff, word))

    @lru_cache(maxsize=None)
    def amplitude(delta: int, n: int) -> float:
        total = 0.0
        for coeff, word in by_shift.get(delta, ()):
            act = apply_word(word, n, exact=exact)
            if act is not ANNIHILATED:
                total += coeff * act.amplitude
        return total

    return RecurrenceRelation(offsets=tuple(sorted(by_shift)), amplitude=amplitude)
