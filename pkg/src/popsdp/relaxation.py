"""Moment/SOS relaxations of polynomial optimization problems.

For a problem ``min f s.t. g_i >= 0`` and an order ``d`` the relaxation is
a block SDP with one block per constraint (block 0 belongs to ``g_0 = 1``).
Each block is the localizing matrix ``M_{d-d_i}(g_i y) = sum_a A_{i,a} y_a``.
The same coefficient data gives two readings:

moment view
    minimize ``sum_a f_a y_a`` subject to ``y_0 = 1`` and every block PSD.
SOS view
    maximize ``f_0 - sum_i <A_{i,0}, Z_i>`` subject to
    ``sum_i <A_{i,a}, Z_i> = f_a`` for ``a != 0`` and ``Z_i`` PSD.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from .polynomial import MultiIndex, Polynomial, add_indices, half_degree_ceil, monomials_up_to
from .pop import Pop


@dataclass(frozen=True)
class MonomialBasis:
    nvars: int
    max_degree: int
    monomials: tuple[MultiIndex, ...]

    @cached_property
    def index(self) -> dict[MultiIndex, int]:
        return {a: k for k, a in enumerate(self.monomials)}

    def __len__(self) -> int:
        return len(self.monomials)

    def __getitem__(self, k: int) -> MultiIndex:
        return self.monomials[k]

    def __iter__(self):
        return iter(self.monomials)

    def evaluate(self, x) -> np.ndarray:
        """The vector ``v_k(x) = (x^a)_{|a| <= k}``."""
        x = np.asarray(x, dtype=float)
        return np.array([np.prod(x ** np.array(a)) for a in self.monomials])


def basis(n: int, k: int) -> MonomialBasis:
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    return MonomialBasis(n, k, tuple(monomials_up_to(n, k)))


class RelaxationOrderError(ValueError):
    """Relaxation order too small for the problem data."""


@dataclass(frozen=True)
class LocalizingStructure:
    """The coefficient matrices ``A_{i,a}`` of one localizing matrix.

    ``entries`` maps a moment index (position in the degree-2d basis) to the
    upper-triangle entries ``(r, c, value)`` of ``A_{i,a}``, ``r <= c``.
    """

    index: int
    g: Polynomial
    order: int
    row_basis: MonomialBasis
    moment_basis: MonomialBasis
    entries: dict[int, tuple[tuple[int, int, float], ...]]

    @property
    def side(self) -> int:
        return len(self.row_basis)

    def dense(self, k: int) -> np.ndarray:
        s = self.side
        A = np.zeros((s, s))
        for r, c, v in self.entries.get(k, ()):
            A[r, c] = v
            A[c, r] = v
        return A

    def matrix(self, y: np.ndarray) -> np.ndarray:
        """``sum_a A_{i,a} y_a``."""
        s = self.side
        M = np.zeros((s, s))
        for k, ents in self.entries.items():
            for r, c, v in ents:
                M[r, c] += v * y[k]
        return np.triu(M) + np.triu(M, 1).T


def localizing_structure(g: Polynomial, d: int, index: int = 0) -> LocalizingStructure:
    di = half_degree_ceil(g)
    if d < di:
        raise RelaxationOrderError(f"order {d} below half-degree {di} of constraint {index}")
    rows = basis(g.nvars, d - di)
    mom = basis(g.nvars, 2 * d)
    pos = mom.index
    acc: dict[int, dict[tuple[int, int], float]] = {}
    for r, beta in enumerate(rows):
        for c in range(r, len(rows)):
            bg = add_indices(beta, rows[c])
            for delta, coef in g.items():
                k = pos[add_indices(bg, delta)]
                cell = acc.setdefault(k, {})
                # several (beta, gamma, delta) can land on the same moment
                cell[(r, c)] = cell.get((r, c), 0.0) + coef
    entries = {
        k: tuple((r, c, v) for (r, c), v in sorted(cell.items()) if v != 0.0)
        for k, cell in sorted(acc.items())
    }
    entries = {k: e for k, e in entries.items() if e}
    return LocalizingStructure(index, g, d, rows, mom, entries)


class BlockSdp:
    """Block-diagonal SDP in SDPA-like sparse storage.

    ``rhs[k]`` is the objective coefficient ``f_a`` of the k-th moment
    (``rhs[0]`` is the constant offset ``f_0``). ``entries`` is an integer
    array of rows ``(k, block, r, c)`` with ``r <= c`` and ``values`` the
    matching coefficients; row ``k = 0`` holds the ``A_{i,0}`` matrices.
    """

    def __init__(
        self,
        block_sizes: Sequence[int],
        rhs: Sequence[float],
        entries: np.ndarray,
        values: np.ndarray,
        nvars: int | None = None,
        order: int | None = None,
        labels: Sequence[str] | None = None,
    ):
        entries = np.asarray(entries, dtype=np.int64).reshape(-1, 4)
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(entries) != len(values):
            raise ValueError("entries and values differ in length")
        self.block_sizes = tuple(int(s) for s in block_sizes)
        self.rhs = np.asarray(rhs, dtype=float).copy()
        if len(entries):
            if np.any(entries[:, 2] > entries[:, 3]):
                raise ValueError("entries must be upper triangular")
            if entries[:, 0].min() < 0 or entries[:, 0].max() >= len(self.rhs):
                raise ValueError("constraint index out of range")
            if entries[:, 1].min() < 0 or entries[:, 1].max() >= len(self.block_sizes):
                raise ValueError("block index out of range")
            sizes = np.array(self.block_sizes)[entries[:, 1]]
            if np.any(entries[:, 3] >= sizes):
                raise ValueError("entry outside its block")
        # canonical order; duplicate positions are summed
        order_ = np.lexsort((entries[:, 3], entries[:, 2], entries[:, 1], entries[:, 0]))
        entries, values = entries[order_], values[order_]
        if len(entries):
            keep = np.ones(len(entries), dtype=bool)
            keep[1:] = np.any(entries[1:] != entries[:-1], axis=1)
            starts = np.flatnonzero(keep)
            values = np.add.reduceat(values, starts)
            entries = entries[starts]
            nz = values != 0.0
            entries, values = entries[nz], values[nz]
        self.entries = entries
        self.values = values
        self.entries.setflags(write=False)
        self.values.setflags(write=False)
        self.rhs.setflags(write=False)
        self.nvars = nvars
        self.order = order
        self.labels = tuple(labels) if labels is not None else tuple(f"block{i}" for i in range(len(self.block_sizes)))

    @property
    def num_constraints(self) -> int:
        """Equality constraints of the SOS view (moments other than y_0)."""
        return len(self.rhs) - 1

    @property
    def offset(self) -> float:
        return float(self.rhs[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockSdp):
            return NotImplemented
        return (
            self.block_sizes == other.block_sizes
            and np.array_equal(self.rhs, other.rhs)
            and np.array_equal(self.entries, other.entries)
            and np.array_equal(self.values, other.values)
            and self.nvars == other.nvars
            and self.order == other.order
            and self.labels == other.labels
        )

    def __repr__(self) -> str:
        return f"BlockSdp(blocks={self.block_sizes}, constraints={self.num_constraints}, nnz={len(self.values)})"

    @cached_property
    def dense_blocks(self) -> list[np.ndarray]:
        """Per block, a stack ``(len(rhs), s, s)`` of the symmetric ``A_{i,a}``."""
        out = [np.zeros((len(self.rhs), s, s)) for s in self.block_sizes]
        for (k, b, r, c), v in zip(self.entries, self.values):
            out[b][k, r, c] = v
            out[b][k, c, r] = v
        for A in out:
            A.setflags(write=False)
        return out

    # moment view

    def moment_matrices(self, y) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        if y.shape != self.rhs.shape:
            raise ValueError(f"moment vector has shape {y.shape}, expected {self.rhs.shape}")
        return [np.tensordot(y, A, axes=1) for A in self.dense_blocks]

    def moment_value(self, y) -> float:
        return float(np.dot(self.rhs, y))

    # SOS view

    def sos_products(self, Z: Sequence[np.ndarray]) -> np.ndarray:
        """``sum_i <A_{i,a}, Z_i>`` for every moment index a."""
        if len(Z) != len(self.block_sizes):
            raise ValueError("one Gram matrix per block required")
        return sum(np.tensordot(A, Zi, axes=([1, 2], [0, 1])) for A, Zi in zip(self.dense_blocks, Z))

    def sos_value(self, Z: Sequence[np.ndarray]) -> float:
        return float(self.rhs[0] - self.sos_products(Z)[0])

    def sos_residual(self, Z: Sequence[np.ndarray]) -> np.ndarray:
        return self.sos_products(Z)[1:] - self.rhs[1:]


def inner(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.tensordot(A, B, axes=2))


def relaxation_order_min(pop: Pop) -> int:
    return max([0, half_degree_ceil(pop.objective)] + [half_degree_ceil(g) for g in pop.constraints])


def localizing_structures(pop: Pop, d: int) -> list[LocalizingStructure]:
    g0 = Polynomial.constant(pop.nvars, 1.0)
    return [localizing_structure(g, d, i) for i, g in enumerate((g0, *pop.constraints))]


def assemble(pop: Pop, d: int) -> BlockSdp:
    """Order-``d`` relaxation of ``pop`` as a :class:`BlockSdp`."""
    dmin = max([0] + [half_degree_ceil(g) for g in pop.constraints])
    if d < dmin:
        raise RelaxationOrderError(f"order {d} below d_min = {dmin}")
    if pop.objective.degree > 2 * d:
        raise RelaxationOrderError(f"objective degree {pop.objective.degree} exceeds 2d = {2 * d}")
    structs = localizing_structures(pop, d)
    mom = basis(pop.nvars, 2 * d)
    rhs = np.zeros(len(mom))
    for alpha, c in pop.objective.items():
        rhs[mom.index[alpha]] = c
    rows, vals = [], []
    for b, st in enumerate(structs):
        for k, ents in st.entries.items():
            for r, c, v in ents:
                rows.append((k, b, r, c))
                vals.append(v)
    labels = ["g0 = 1"] + [f"g{i + 1}" for i in range(len(pop.constraints))]
    if pop.ball_radius is not None:
        labels[-1] = f"ball R={pop.ball_radius!r}"
    return BlockSdp([st.side for st in structs], rhs, np.array(rows).reshape(-1, 4), np.array(vals), pop.nvars, d, labels)


def moment_matrices(y, pop: Pop, d: int) -> list[np.ndarray]:
    """Localizing matrices ``M_{d-d_i}(g_i y)`` for i = 0..m."""
    y = np.asarray(y, dtype=float)
    structs = localizing_structures(pop, d)
    if y.shape != (len(structs[0].moment_basis),):
        raise ValueError(f"moment vector has length {y.size}, expected {len(structs[0].moment_basis)}")
    return [st.matrix(y) for st in structs]


def expected_side(n: int, d: int, di: int) -> int:
    return comb(n + d - di, d - di)
