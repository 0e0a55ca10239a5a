"""Sparse multivariate polynomials with real coefficients.

A polynomial is stored as a map from exponent tuples to nonzero floats.
Iteration order is graded lexicographic so that everything built on top
of it (bases, matrices, files) comes out deterministic.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


def degree_of(alpha: Sequence[int]) -> int:
    return sum(alpha)


def grlex_key(alpha: MultiIndex) -> tuple:
    """Sort key: total degree first, then exponents in decreasing lex order.

    With this key the degree-2 monomials in two variables come out as
    x1^2, x1*x2, x2^2.
    """
    return (sum(alpha), tuple(-a for a in alpha))


def add_indices(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(i + j for i, j in zip(a, b))


def unit_index(n: int, j: int) -> MultiIndex:
    return tuple(1 if i == j else 0 for i in range(n))


class DimensionError(ValueError):
    """Raised when objects over different numbers of variables are mixed."""


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables.

    >>> p = Polynomial(2, {(1, 1): 1.0})
    >>> p(np.array([2.0, 3.0]))
    6.0
    """

    __slots__ = ("_nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | None = None):
        if nvars < 1:
            raise ValueError(f"nvars must be positive, got {nvars}")
        clean: dict[MultiIndex, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != nvars:
                raise DimensionError(f"exponent {alpha} has length {len(alpha)}, expected {nvars}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = clean.get(alpha, 0.0) + float(c)
            clean[alpha] = c
        self._nvars = nvars
        self._terms = {a: clean[a] for a in sorted(clean, key=grlex_key) if clean[a] != 0.0}
        self._hash = None

    # constructors

    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c: float) -> Polynomial:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, j: int) -> Polynomial:
        return cls(nvars, {unit_index(nvars, j): 1.0})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: float = 1.0) -> Polynomial:
        return cls(len(alpha), {tuple(alpha): c})

    # accessors

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> dict[MultiIndex, float]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[MultiIndex, float]]:
        return iter(self._terms.items())

    def coeff(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        # zero polynomial has degree 0
        return max((sum(a) for a in self._terms), default=0)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._nvars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({self._nvars}, {self._terms!r})"

    # arithmetic

    def _check(self, other: Polynomial) -> None:
        if self._nvars != other._nvars:
            raise DimensionError(f"nvars mismatch: {self._nvars} vs {other._nvars}")

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._nvars, float(other))
        return NotImplemented

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, other)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return scale_coeffs(self, -1.0)

    def __sub__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, -other)

    def __rsub__(self, other) -> Polynomial:
        return (-self) + other

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, float, np.floating, np.integer)):
            return scale_coeffs(self, float(other))
        if isinstance(other, Polynomial):
            return mul(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self._nvars, 1.0)
        for _ in range(k):
            out = mul(out, self)
        return out

    def __call__(self, x) -> float:
        return evaluate(self, x)


def evaluate(p: Polynomial, x) -> float:
    """Value of ``p`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.nvars,):
        raise DimensionError(f"point has shape {x.shape}, expected ({p.nvars},)")
    total = 0.0
    for alpha, c in p.items():
        total += c * math.prod(float(xi) ** a for xi, a in zip(x, alpha))
    return total


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    p._check(q)
    terms = dict(p._terms)
    for alpha, c in q.items():
        terms[alpha] = terms.get(alpha, 0.0) + c
    return Polynomial(p.nvars, terms)


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    p._check(q)
    terms: dict[MultiIndex, float] = {}
    for a, c in p.items():
        for b, e in q.items():
            k = add_indices(a, b)
            terms[k] = terms.get(k, 0.0) + c * e
    return Polynomial(p.nvars, terms)


def scale_coeffs(p: Polynomial, c: float) -> Polynomial:
    return Polynomial(p.nvars, {a: c * v for a, v in p.items()})


def half_degree_ceil(p: Polynomial) -> int:
    """Smallest integer >= deg(p) / 2."""
    return (p.degree + 1) // 2


def substitute_scale(p: Polynomial, R: float) -> Polynomial:
    """The polynomial ``x -> p(R * x)``."""
    if not R > 0:
        raise ValueError(f"scale factor must be positive, got {R}")
    return Polynomial(p.nvars, {a: c * R ** sum(a) for a, c in p.items()})


def sum_of_squares(nvars: int) -> Polynomial:
    """x_1^2 + ... + x_n^2."""
    return Polynomial(nvars, {tuple(2 * e for e in unit_index(nvars, j)): 1.0 for j in range(nvars)})


def monomials_up_to(n: int, k: int) -> list[MultiIndex]:
    """All exponents in ``n`` variables with total degree <= k, graded-lex."""
    out: list[MultiIndex] = []
    for deg in range(k + 1):
        out.extend(_exact_degree(n, deg))
    return out


def _exact_degree(n: int, deg: int) -> Iterable[MultiIndex]:
    # decreasing lex within a degree: x1^deg first
    if n == 1:
        yield (deg,)
        return
    for first in range(deg, -1, -1):
        for rest in _exact_degree(n - 1, deg - first):
            yield (first,) + rest
