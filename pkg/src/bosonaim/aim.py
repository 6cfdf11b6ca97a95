"""Asymptotic iteration on banded ket recurrences.

Every ket of a parity chain is expanded over a few seed kets, with expansion
coefficients that are polynomials in the energy ``E``.  Requiring the two
highest same-chain kets to be proportional (or, with a single seed, the top
ket to vanish) gives a polynomial whose real roots approximate the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator

import numpy as np

from .algebra import OperatorExpression, RecurrenceRelation
from .models import Su2Model, model_recurrence
from .polynomial import EXTENDED_DIGITS, STANDARD, Backend, EPolynomial, backend, real_roots, sign_change_roots

__all__ = [
    "AimOptions",
    "CoefficientTable",
    "EigenResult",
    "EigenRoot",
    "ParityChain",
    "SingularRecurrenceError",
    "UnsupportedSeedDimension",
    "decompose_chains",
    "iterate",
    "solve",
    "termination_function",
    "termination_value",
]


class SingularRecurrenceError(ArithmeticError):
    """The highest-offset coefficient vanishes at a reachable occupation."""

    def __init__(self, n: int, delta: int):
        super().__init__(f"coefficient of |n{delta:+d}> vanishes at n={n}; cannot solve the recurrence forward")
        self.n = n
        self.delta = delta


class UnsupportedSeedDimension(NotImplementedError):
    pass


@dataclass(frozen=True)
class ParityChain:
    """One residue class of occupations, ``n = residue (mod step)``, in the domain."""

    step: int
    residue: int
    seeds: tuple[int, ...]
    lower: int = 0
    upper: int | None = None
    label: str = ""

    @property
    def start(self) -> int:
        return self.lower + (self.residue - self.lower) % self.step

    @property
    def finite(self) -> bool:
        return self.upper is not None

    def occupations(self, limit: int | None = None) -> Iterator[int]:
        stop = self.upper if limit is None else (limit if self.upper is None else min(limit, self.upper))
        if stop is None:
            raise ValueError("an unbounded chain needs an explicit limit")
        return iter(range(self.start, stop + 1, self.step))


def _chain_label(rec: RecurrenceRelation, step: int, residue: int, occupations: list[int]) -> str:
    if rec.finite:
        return "m in {" + ",".join(rec.index_label(n) for n in occupations) + "}"
    if step == 1:
        return "all"
    if step == 2:
        return "even" if residue == 0 else "odd"
    return f"n={residue} mod {step}"


def decompose_chains(rec: RecurrenceRelation) -> list[ParityChain]:
    """Split the domain into decoupled residue classes and pick their seed kets.

    A purely diagonal recurrence has no coupled chains and yields ``[]``.
    """
    offsets = rec.coupling_offsets
    if not offsets:
        return []
    top = max(offsets)
    if top <= 0:
        raise ValueError("recurrence has no raising offset; it cannot be iterated forward")
    step = reduce(math.gcd, (abs(d) for d in offsets))
    per_level = top // step
    chains = []
    for residue in range(step):
        start = rec.lower + (residue - rec.lower) % step
        if rec.finite and start > rec.upper:
            continue
        if rec.finite:
            occ = list(range(start, rec.upper + 1, step))
        else:
            occ = [start + i * step for i in range(per_level)]
        seeds = tuple(occ[:per_level])
        chains.append(
            ParityChain(
                step=step,
                residue=residue % step,
                seeds=seeds,
                lower=rec.lower,
                upper=rec.upper,
                label=_chain_label(rec, step, residue % step, occ),
            )
        )
    return chains


@dataclass
class CoefficientTable:
    """Seed expansions of every generated ket of one chain.

    ``levels[n]`` is the vector of seed coefficients of ``|n>``; all entries of
    one vector share a single power-of-two ``scale_exponent``.  For finite
    chains the relations at the top of the domain have no ket left to solve
    for; their residual combinations are stored under the (out of domain)
    occupation the relation would have produced and listed in ``terminal``.
    """

    chain: ParityChain
    levels: dict[int, tuple[EPolynomial, ...]]
    terminal: tuple[int, ...] = ()
    diagonal: bool = False
    depth: int | None = None
    precision: str = "standard"

    @property
    def seed_dimension(self) -> int:
        return len(self.chain.seeds)

    @property
    def exact(self) -> bool:
        """Finite chains terminate exactly; the table spans the whole block."""
        return bool(self.terminal) or (self.diagonal and self.chain.finite)

    @property
    def top(self) -> int:
        return max(self.levels)


def _vector(b: Backend, dim: int, unit: int | None) -> list[np.ndarray]:
    vec = [b.zeros(1) for _ in range(dim)]
    if unit is not None:
        vec[unit] = b.array([1.0])
    return vec


def _pad(arr: np.ndarray, n: int, b: Backend) -> np.ndarray:
    if arr.size >= n:
        return arr
    out = b.zeros(n)
    out[: arr.size] = arr
    return out


def _normalize(vec: list[np.ndarray], exponent: int, b: Backend) -> tuple[EPolynomial, ...]:
    peak = max((max(abs(c) for c in a) for a in vec if a.size), default=0)
    if peak == 0:
        return tuple(EPolynomial(a, exponent) for a in vec)
    e = b.exponent(peak)
    return tuple(EPolynomial(b.ldexp(a, -e), exponent + e) for a in vec)


def iterate(
    rec: RecurrenceRelation,
    chain: ParityChain,
    depth: int | None,
    precision: str = "standard",
    digits: int = EXTENDED_DIGITS,
) -> CoefficientTable:
    """Run the coefficient recurrence along ``chain``.

    For an unbounded chain, relations are used at every chain occupation
    ``n <= depth``; each one solves for the ket ``|n + max_offset>``.  A
    finite chain is always iterated through its whole domain and ``depth``
    is ignored.
    """
    b = backend(precision, digits)
    if depth is not None and depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if not chain.finite and depth is None:
        raise ValueError("an unbounded chain needs a depth")
    limit = None if chain.finite else depth
    couplings = rec.coupling_offsets

    if not couplings:
        levels = {}
        for n in chain.occupations(limit):
            levels[n] = (EPolynomial(b.array([rec.coeff(0, n), -1.0])),)
        return CoefficientTable(chain, levels, diagonal=True, depth=depth, precision=b.name)

    top = max(couplings)
    lower_offsets = sorted((set(rec.offsets) | {0}) - {top})
    d = len(chain.seeds)
    # store raw arrays with one exponent per level while iterating
    raw: dict[int, tuple[list[np.ndarray], int]] = {
        seed: (_vector(b, d, i), 0) for i, seed in enumerate(chain.seeds)
    }
    terminal = []
    for n in chain.occupations(limit):
        target = n + top
        used = []
        for delta in lower_offsets:
            o = n + delta
            c = rec.coeff(delta, n)
            # the diagonal channel is always kept: it also carries the -E term
            if delta and c == 0.0:
                continue
            if not rec.in_domain(o):
                continue
            used.append((o, c))
        e0 = max(raw[o][1] for o, _ in used)
        width = max(raw[o][0][k].size for o, _ in used for k in range(d)) + 1
        acc = [b.zeros(width) for _ in range(d)]
        for o, c in used:
            vec, e = raw[o]
            cs = b.scalar(c)
            for k in range(d):
                acc[k][: vec[k].size] += b.ldexp(vec[k] * cs, e - e0)
        vec_n, e_n = raw[n]
        for k in range(d):
            shifted = b.ldexp(vec_n[k], e_n - e0)
            acc[k][1 : shifted.size + 1] -= shifted
        if not rec.in_domain(target):
            if not chain.finite:
                raise SingularRecurrenceError(n, top)
            polys = _normalize(acc, e0, b)
            raw[target] = ([p.coefficients for p in polys], polys[0].scale_exponent)
            terminal.append(target)
            continue
        lead = rec.coeff(top, n)
        if lead == 0.0:
            raise SingularRecurrenceError(n, top)
        inv = b.scalar(-1.0) / b.scalar(lead)
        polys = _normalize([a * inv for a in acc], e0, b)
        raw[target] = ([_pad(p.coefficients, 1, b) for p in polys], polys[0].scale_exponent)

    levels = {
        n: tuple(EPolynomial(a, e) for a in vec) for n, (vec, e) in sorted(raw.items())
    }
    return CoefficientTable(chain, levels, terminal=tuple(terminal), depth=depth, precision=b.name)


def termination_function(table: CoefficientTable, m: int) -> EPolynomial:
    """Quantization polynomial at chain level ``m``.

    One seed: the seed coefficient of ``|m>`` itself.  Two seeds: the
    determinant of the coefficient vectors of ``|m>`` and ``|m + step>``.
    On a diagonal chain, the product of the diagonal factors up to ``m``.
    """
    if table.diagonal:
        factors = [v[0] for n, v in table.levels.items() if n <= m]
        if not factors:
            raise KeyError(f"no diagonal level at or below {m}")
        return reduce(lambda x, y: x * y, factors).normalized()
    d = table.seed_dimension
    if d > 2:
        raise UnsupportedSeedDimension(f"seed dimension {d} is not supported (at most 2)")
    if d == 1:
        return table.levels[m][0].normalized()
    step = table.chain.step
    (p0, q0), (p1, q1) = table.levels[m], table.levels[m + step]
    det = _sub(p0 * q1, q0 * p1)
    return det.normalized()


def termination_value(
    rec: RecurrenceRelation,
    chain: ParityChain,
    m: int,
    energy,
    precision: str = "standard",
    digits: int = EXTENDED_DIGITS,
):
    """The termination function at level ``m`` evaluated directly at ``energy``.

    The ket recurrence runs on numbers rather than polynomials, so the result
    matches :func:`termination_function` up to a positive factor: same sign,
    same zeros.  In standard precision ``energy`` may be an array.  On finite
    chains this is the stable way to evaluate the characteristic polynomial,
    whose monomial coefficients are badly conditioned at high degree.
    """
    b = backend(precision, digits)
    couplings = rec.coupling_offsets
    if not couplings:
        raise ValueError("a diagonal recurrence has no termination value")
    d = len(chain.seeds)
    if d > 2:
        raise UnsupportedSeedDimension(f"seed dimension {d} is not supported (at most 2)")
    if b is STANDARD:
        E = np.asarray(energy, dtype=np.float64)
        frexp, ldexp, emax = (lambda x: np.frexp(x)[1]), np.ldexp, np.maximum
        zexp = np.zeros(E.shape, dtype=int)
    else:
        ctx = b.ctx
        E = ctx.mpf(energy)
        frexp, ldexp, emax = (lambda x: int(ctx.frexp(x)[1])), ctx.ldexp, max
        zexp = 0
    zero = E * 0
    top = max(couplings)
    lower_offsets = sorted((set(rec.offsets) | {0}) - {top})
    needed = m + (d - 1) * chain.step
    raw = {seed: ([zero + (1 if k == i else 0) for k in range(d)], zexp) for i, seed in enumerate(chain.seeds)}
    for n in chain.occupations(None if chain.finite else needed - top):
        target = n + top
        if target > needed:
            break
        used = [(n + delta, rec.coeff(delta, n)) for delta in lower_offsets]
        used = [(o, c) for (o, c), delta in zip(used, lower_offsets) if (c != 0.0 or not delta) and rec.in_domain(o)]
        e0 = reduce(emax, (raw[o][1] for o, _ in used))
        acc = [zero for _ in range(d)]
        for o, c in used:
            vec, e = raw[o]
            acc = [a + ldexp(v, e - e0) * c for a, v in zip(acc, vec)]
        vec_n, e_n = raw[n]
        acc = [a - E * ldexp(v, e_n - e0) for a, v in zip(acc, vec_n)]
        if rec.in_domain(target):
            lead = rec.coeff(top, n)
            if lead == 0.0:
                raise SingularRecurrenceError(n, top)
            acc = [a * (-1.0 / b.scalar(lead)) for a in acc]
        elif not chain.finite:
            raise SingularRecurrenceError(n, top)
        peak = reduce(emax, [abs(a) for a in acc])
        e = frexp(peak)
        raw[target] = ([ldexp(a, -e) for a in acc], e0 + e)
    if d == 1:
        return raw[m][0][0]
    (p0, q0), (p1, q1) = raw[m][0], raw[m + chain.step][0]
    return p0 * q1 - q0 * p1


def _sub(x: EPolynomial, y: EPolynomial) -> EPolynomial:
    if x.is_zero:
        return EPolynomial(-y.coefficients, y.scale_exponent)
    if y.is_zero:
        return x
    b = x.backend
    e = max(x.scale_exponent, y.scale_exponent)
    n = max(x.coefficients.size, y.coefficients.size)
    xa = b.ldexp(_pad(x.coefficients, n, b), x.scale_exponent - e)
    ya = b.ldexp(_pad(y.coefficients, n, b), y.scale_exponent - e)
    return EPolynomial(xa - ya, e)


@dataclass(frozen=True)
class AimOptions:
    """Iteration depth, root search window and convergence test.

    ``depth`` counts occupations: relations at ``n <= depth`` are used.  The
    convergence delta of each root compares against the run truncated
    ``stability_window`` chain levels earlier.  ``root_interval=None`` picks
    ``[-10, 10 + 3 depth]`` for unbounded chains and a Gershgorin enclosure
    for finite ones.
    """

    depth: int = 20
    root_interval: tuple[float, float] | None = None
    convergence_tol: float = 1e-6
    stability_window: int = 2
    precision_mode: str = "standard"
    extended_digits: int = EXTENDED_DIGITS

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be positive, got {self.depth}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.stability_window < 1:
            raise ValueError(f"stability_window must be positive, got {self.stability_window}")
        if self.root_interval is not None:
            lo, hi = self.root_interval
            if not lo < hi:
                raise ValueError(f"root_interval must satisfy lo < hi, got {self.root_interval}")
            object.__setattr__(self, "root_interval", (float(lo), float(hi)))
        if self.precision_mode not in ("standard", "extended"):
            raise ValueError(f"precision_mode must be 'standard' or 'extended', got {self.precision_mode!r}")


@dataclass(frozen=True)
class EigenRoot:
    value: float
    delta: float
    converged: bool
    chain: str
    multiplicity: int = 1

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "delta": None if math.isinf(self.delta) else self.delta,
            "converged": self.converged,
            "chain": self.chain,
            "multiplicity": self.multiplicity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EigenRoot:
        delta = math.inf if d["delta"] is None else float(d["delta"])
        return cls(float(d["value"]), delta, bool(d["converged"]), d["chain"], int(d.get("multiplicity", 1)))


@dataclass(frozen=True)
class EigenResult:
    roots: tuple[EigenRoot, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(sorted(self.roots, key=lambda r: (r.value, r.chain))))

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self) -> Iterator[EigenRoot]:
        return iter(self.roots)

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.roots]

    def converged(self) -> list[EigenRoot]:
        return [r for r in self.roots if r.converged]

    def lowest(self, k: int, converged_only: bool = False) -> list[EigenRoot]:
        pool = self.converged() if converged_only else list(self.roots)
        return pool[:k]

    def to_dict(self) -> dict:
        return {"roots": [r.to_dict() for r in self.roots]}

    @classmethod
    def from_dict(cls, d: dict) -> EigenResult:
        return cls(tuple(EigenRoot.from_dict(r) for r in d["roots"]))


def _gershgorin(rec: RecurrenceRelation) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for n in rec.domain():
        radius = sum(abs(rec.coeff(d, n)) for d in rec.coupling_offsets)
        c = rec.coeff(0, n)
        lo, hi = min(lo, c - radius), max(hi, c + radius)
    pad = 1.0 + 1e-3 * max(abs(lo), abs(hi))
    return lo - pad, hi + pad


def _interval(rec: RecurrenceRelation, options: AimOptions) -> tuple[float, float]:
    if options.root_interval is not None:
        return options.root_interval
    if rec.finite:
        return _gershgorin(rec)
    return (-10.0, 10.0 + 3.0 * options.depth)


def _chain_roots(rec, chain, options, interval) -> list[EigenRoot]:
    table = iterate(rec, chain, options.depth, options.precision_mode, options.extended_digits)
    d = table.seed_dimension
    if d > 2:
        raise UnsupportedSeedDimension(f"seed dimension {d} is not supported (at most 2)")
    if table.exact:
        sturm = _sturm_bands(rec, chain)
        if sturm is not None:
            values = _sturm_eigenvalues(*sturm, interval, options)
            return [EigenRoot(v, 0.0, True, chain.label) for v in values]
        m = table.terminal[0]
        degree = termination_function(table, m).degree
        if degree < 1:
            return []
        roots = sign_change_roots(
            lambda x: termination_value(rec, chain, m, x),
            lambda x: termination_value(rec, chain, m, x, options.precision_mode, options.extended_digits),
            interval,
            expected=degree,
            eps=backend(options.precision_mode, options.extended_digits).eps,
        )
        return [EigenRoot(r.value, 0.0, True, chain.label, r.multiplicity) for r in roots]
    if options.depth < 2 * d:
        raise ValueError(f"depth {options.depth} is below twice the seed dimension {d}")
    top = max(chain.occupations(options.depth)) + max(rec.coupling_offsets)
    m = top - (d - 1) * chain.step
    current = real_roots(termination_function(table, m), interval)
    m_prev = m - options.stability_window * chain.step
    previous = []
    if m_prev >= chain.seeds[0] and m_prev in table.levels:
        poly_prev = termination_function(table, m_prev)
        if poly_prev.degree > 0:
            previous = [r.value for r in real_roots(poly_prev, interval)]
    out = []
    for r in current:
        delta = min((abs(r.value - q) for q in previous), default=math.inf)
        out.append(EigenRoot(r.value, delta, delta <= options.convergence_tol, chain.label, r.multiplicity))
    return out


def _sturm_bands(rec: RecurrenceRelation, chain: ParityChain):
    """Diagonal and band products of a finite single-seed chain, if Sturm counting applies.

    The chain relation is tridiagonal in the chain index; when every product
    of the two bands is nonnegative it is similar to a symmetric matrix, so
    signs of the pivots count the eigenvalues below a trial energy.
    """
    if not chain.finite or len(chain.seeds) != 1 or set(rec.coupling_offsets) - {-chain.step, chain.step}:
        return None
    occ = list(chain.occupations())
    diag = [rec.coeff(0, n) for n in occ]
    prods = [rec.coeff(chain.step, n) * rec.coeff(-chain.step, n + chain.step) for n in occ[:-1]]
    if any(p < 0 for p in prods):
        return None
    return diag, prods


def _sturm_eigenvalues(diag, prods, interval, options: AimOptions) -> list[float]:
    b = backend(options.precision_mode, options.extended_digits)
    size = len(diag)
    lo_e, hi_e = interval
    tiny = b.scalar(b.eps) * b.scalar(1e-30)

    def count_below(energies: np.ndarray) -> np.ndarray:
        # pivots of the LDL^T factorization of (T - E); negatives count eigenvalues below E
        piv = b.array([diag[0]] * len(energies)) - energies
        piv = np.where(piv == 0, -tiny, piv)
        count = (piv < 0).astype(int)
        for k in range(1, size):
            piv = b.array([diag[k]] * len(energies)) - energies - b.scalar(prods[k - 1]) / piv
            piv = np.where(piv == 0, -tiny, piv)
            count += (piv < 0).astype(int)
        return count

    ends = count_below(b.array([lo_e, hi_e]))
    first, last = int(ends[0]), int(ends[1])
    idx = np.arange(first, last)
    if idx.size == 0:
        return []
    lo = b.array([lo_e] * idx.size)
    hi = b.array([hi_e] * idx.size)
    for _ in range(4 * int(-math.log2(b.eps)) + 64):
        mid = (lo + hi) / 2
        below = count_below(mid) > idx
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        width = max(abs(h - l) for h, l in zip(hi, lo))
        scale = max(max(abs(x) for x in hi), max(abs(x) for x in lo), 1)
        if width <= 2 * b.eps * scale:
            break
    return [b.to_float((l + h) / 2) for l, h in zip(lo, hi)]


def _diagonal_roots(rec: RecurrenceRelation, options: AimOptions, interval) -> list[EigenRoot]:
    occ = rec.domain() if rec.finite else range(rec.lower, options.depth + 1)
    lo, hi = interval
    out = []
    for n in occ:
        e = rec.coeff(0, n)
        if lo <= e <= hi:
            out.append(EigenRoot(e, 0.0, True, f"n={rec.index_label(n)}"))
    return out


def solve(model: OperatorExpression | Su2Model | RecurrenceRelation, options: AimOptions | None = None) -> EigenResult:
    """Eigenvalues of ``model`` from the asymptotic iteration.

    Each parity chain is iterated independently; roots found in the search
    interval are paired with the roots of the run ``stability_window`` levels
    shallower and flagged converged when they moved by at most
    ``convergence_tol``.  Finite chains terminate exactly and every root is
    converged with delta 0.
    """
    options = options or AimOptions()
    rec = model_recurrence(model)
    interval = _interval(rec, options)
    chains = decompose_chains(rec)
    if not chains:
        return EigenResult(tuple(_diagonal_roots(rec, options, interval)))
    roots = []
    for chain in chains:
        roots.extend(_chain_roots(rec, chain, options, interval))
    return EigenResult(tuple(roots))
