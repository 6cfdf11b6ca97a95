"""Dense polynomials in the energy with power-of-two scaling, and real-root isolation.

Two arithmetic backends share one code path: ``standard`` works on float64
arrays, ``extended`` on object arrays of mpmath numbers drawn from a private
context (about 32 significant digits by default, the reach of double-double
arithmetic).  A polynomial's backend is inferred from its coefficient dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import mpmath
import numpy as np

__all__ = ["Backend", "EPolynomial", "RealRoot", "backend", "real_roots", "sign_change_roots"]

EXTENDED_DIGITS = 32


class Backend:
    """Scalar arithmetic used by the coefficient iteration and root finder."""

    name = "standard"
    dtype: type = np.float64
    eps = float(np.finfo(np.float64).eps)

    def array(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64)

    def zeros(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.float64)

    def scalar(self, x):
        return float(x)

    def exponent(self, x) -> int:
        """Binary exponent ``e`` with ``|x| = f * 2**e``, ``0.5 <= f < 1``."""
        return math.frexp(float(x))[1]

    def ldexp(self, arr: np.ndarray, e: int) -> np.ndarray:
        return np.ldexp(arr, e)

    def to_float(self, x) -> float:
        return float(x)


class ExtendedBackend(Backend):
    name = "extended"
    dtype = object

    def __init__(self, digits: int = EXTENDED_DIGITS):
        self.ctx = mpmath.MPContext()
        self.ctx.dps = digits
        self.digits = digits
        self.eps = float(self.ctx.eps)
        self._zero = self.ctx.mpf(0)

    def array(self, values) -> np.ndarray:
        mpf = self.ctx.mpf
        out = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            out[i] = mpf(v)
        return out

    def zeros(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=object)
        out[:] = self._zero
        return out

    def scalar(self, x):
        return self.ctx.mpf(x)

    def exponent(self, x) -> int:
        return int(self.ctx.frexp(x)[1])

    def ldexp(self, arr: np.ndarray, e: int) -> np.ndarray:
        ld = self.ctx.ldexp
        out = np.empty(len(arr), dtype=object)
        for i, v in enumerate(arr):
            out[i] = ld(v, e)
        return out


STANDARD = Backend()


@lru_cache(maxsize=8)
def _extended(digits: int) -> ExtendedBackend:
    return ExtendedBackend(digits)


def backend(mode: str = "standard", digits: int = EXTENDED_DIGITS) -> Backend:
    if mode == "standard":
        return STANDARD
    if mode == "extended":
        return _extended(digits)
    raise ValueError(f"unknown precision mode {mode!r}; expected 'standard' or 'extended'")


def _backend_of(coeffs: np.ndarray) -> Backend:
    if coeffs.dtype != object:
        return STANDARD
    for c in coeffs:
        ctx = getattr(c, "context", None)
        if ctx is not None:
            return _extended(ctx.dps)
    return _extended(EXTENDED_DIGITS)


@dataclass(frozen=True)
class EPolynomial:
    """``2**scale_exponent * sum_k coefficients[k] E**k``.

    Coefficients are stored lowest power first.  Scaling by a positive power of
    two never changes the roots, so most callers ignore ``scale_exponent``.
    """

    coefficients: np.ndarray
    scale_exponent: int = 0

    def __post_init__(self):
        c = self.coefficients
        if not isinstance(c, np.ndarray):
            c = np.asarray(c, dtype=np.float64)
        nz = np.flatnonzero(c != 0)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        object.__setattr__(self, "coefficients", c)

    @property
    def backend(self) -> Backend:
        return _backend_of(self.coefficients)

    @property
    def is_zero(self) -> bool:
        return self.coefficients.size == 0

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def normalized(self) -> EPolynomial:
        if self.is_zero:
            return self
        b = self.backend
        e = b.exponent(max(abs(c) for c in self.coefficients))
        return EPolynomial(b.ldexp(self.coefficients, -e), self.scale_exponent + e)

    def derivative(self) -> EPolynomial:
        c = self.coefficients
        if c.size <= 1:
            return EPolynomial(c[:0], self.scale_exponent)
        return EPolynomial(c[1:] * np.arange(1, c.size), self.scale_exponent)

    def __call__(self, x):
        """Evaluate the stored (unscaled) coefficients by Horner's rule."""
        return horner(self.coefficients, x)

    def value(self, x) -> float:
        """Evaluate including the power-of-two scale factor."""
        return math.ldexp(float(self(x)), self.scale_exponent)

    def __mul__(self, other: EPolynomial) -> EPolynomial:
        if self.is_zero or other.is_zero:
            return EPolynomial(self.coefficients[:0], 0)
        return EPolynomial(
            np.convolve(self.coefficients, other.coefficients),
            self.scale_exponent + other.scale_exponent,
        )

    def to_numpy(self) -> np.ndarray:
        return np.array([float(c) for c in self.coefficients])


def horner(coeffs: np.ndarray, x):
    acc = 0 * x if coeffs.size == 0 else coeffs[-1] + 0 * x
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


class RealRoot(NamedTuple):
    value: float
    multiplicity: int = 1


def _bisect_secant(f, a, b, fa, fb, xtol_rel: float, max_iter: int = 400):
    """Illinois regula falsi on a sign-changing bracket, bisecting when it stalls."""
    stalled = 0
    for _ in range(max_iter):
        width = abs(b - a)
        if width <= xtol_rel * max(1.0, abs(float(a)), abs(float(b))):
            break
        if stalled >= 2:
            c = (a + b) / 2
            stalled = 0
        else:
            c = b - fb * (b - a) / (fb - fa)
            if not (min(a, b) < c < max(a, b)):
                c = (a + b) / 2
        fc = f(c)
        if fc == 0:
            return c
        if (fc > 0) != (fb > 0):
            a, fa = b, fb
        else:
            fa = fa / 2
        b, fb = c, fc
        stalled = stalled + 1 if abs(b - a) > 0.5 * width else 0
    return (a + b) / 2


def _multiplicity(p: EPolynomial, x, tol: float) -> int:
    m = 1
    q = p.derivative()
    while not q.is_zero:
        bound = horner(np.abs(q.coefficients), abs(x))
        if bound == 0 or abs(q(x)) > tol * bound:
            break
        m += 1
        q = q.derivative()
    return m


def sign_change_roots(
    f_grid: Callable[[np.ndarray], np.ndarray],
    f_point: Callable,
    interval: Sequence[float],
    expected: int | None = None,
    eps: float = STANDARD.eps,
    grid_points: int | None = None,
) -> list[RealRoot]:
    """Simple real roots of a function known only through evaluation.

    ``f_grid`` is evaluated on a float64 grid to bracket sign changes and
    ``f_point`` refines each bracket, possibly in wider arithmetic.  With
    ``expected`` set, the grid is refined until that many roots are bracketed
    or a size cap is reached.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"degenerate root interval [{lo}, {hi}]")
    n = grid_points or max(1024, 16 * (expected or 0))
    while True:
        xs = np.linspace(lo, hi, n + 1)
        vals = np.asarray(f_grid(xs), dtype=np.float64)
        hits = [i for i in range(n + 1) if vals[i] == 0]
        brackets = [i for i in range(n) if vals[i] * vals[i + 1] < 0]
        if expected is None or len(hits) + len(brackets) >= expected or n >= 1 << 15:
            break
        n *= 4
    found = [float(xs[i]) for i in hits]
    for i in brackets:
        a, b = float(xs[i]), float(xs[i + 1])
        fa, fb = f_point(a), f_point(b)
        if fa == 0 or fb == 0:
            found.append(a if fa == 0 else b)
        elif (fa > 0) == (fb > 0):
            found.append((a + b) / 2)
        else:
            found.append(float(_bisect_secant(f_point, a, b, fa, fb, 8 * eps)))
    roots: list[RealRoot] = []
    for x in sorted(found):
        if roots and abs(x - roots[-1].value) <= 1e-12 * max(1.0, abs(x)):
            roots[-1] = RealRoot(roots[-1].value, roots[-1].multiplicity + 1)
        else:
            roots.append(RealRoot(x, 1))
    return roots


def real_roots(
    poly: EPolynomial,
    interval: Sequence[float],
    grid_points: int | None = None,
) -> list[RealRoot]:
    """All real roots of ``poly`` inside ``interval``, ascending.

    Sign changes on a uniform grid bracket the odd-multiplicity roots, which
    are then refined to the working precision.  Grid points where ``|p|``
    has a non-crossing local minimum are checked as candidate even-multiplicity
    roots through the derivative.  Repeated roots are reported once with their
    estimated multiplicity.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"degenerate root interval [{lo}, {hi}]")
    if poly.is_zero:
        raise ValueError("the zero polynomial has no isolated roots")
    if poly.degree == 0:
        return []
    b = poly.backend
    p = poly
    n = grid_points or max(1024, 16 * p.degree)
    grid = np.linspace(lo, hi, n + 1)
    xs = grid if b is STANDARD else b.array(grid)
    vals = p(xs)
    absc = np.abs(p.coefficients)
    xtol = 8 * b.eps
    mult_tol = math.sqrt(b.eps)

    found = []
    sgn = [0 if v == 0 else (1 if v > 0 else -1) for v in vals]
    for i in range(n + 1):
        if sgn[i] == 0:
            found.append((xs[i], 0))
        elif i < n and sgn[i + 1] != 0 and sgn[i] != sgn[i + 1]:
            found.append((_bisect_secant(p, xs[i], xs[i + 1], vals[i], vals[i + 1], xtol), 1))

    dp = None
    for i in range(1, n):
        if sgn[i] == 0 or sgn[i - 1] != sgn[i] or sgn[i + 1] != sgn[i]:
            continue
        if not (abs(vals[i]) < abs(vals[i - 1]) and abs(vals[i]) <= abs(vals[i + 1])):
            continue
        if dp is None:
            dp = p.derivative()
        da, db = dp(xs[i - 1]), dp(xs[i + 1])
        if da == 0 or db == 0 or (da > 0) == (db > 0):
            continue
        x = _bisect_secant(dp, xs[i - 1], xs[i + 1], da, db, xtol)
        bound = horner(absc, abs(x))
        if abs(p(x)) <= 64 * p.degree * b.eps * bound:
            found.append((x, 2))

    roots: list[RealRoot] = []
    # parity: 1 = odd (sign change), 2 = even (touching minimum), 0 = unknown
    for x, parity in sorted(found, key=lambda t: t[0]):
        xf = b.to_float(x)
        if roots and abs(xf - roots[-1].value) <= 1e-12 * max(1.0, abs(xf)):
            continue
        m = _multiplicity(p, x, mult_tol)
        if parity == 1 and m % 2 == 0:
            m += 1
        elif parity == 2 and m % 2 == 1:
            m += 1
        roots.append(RealRoot(xf, m))
    return roots
