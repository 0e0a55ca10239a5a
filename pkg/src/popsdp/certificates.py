"""Executable checks on relaxation solutions.

* :func:`trace_bound_check` verifies the trace recursion of the ball
  localizing matrix and the resulting bound on feasible moment vectors.
* :func:`strong_duality_verdict` turns a solver outcome into a gap verdict.
* :func:`extract_sos_certificate` factors the Gram blocks into explicit
  squares and measures how well they reproduce ``f - z``.
* :func:`extract_minimizer` reads a minimizer off a rank-one moment matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .polynomial import MultiIndex, Polynomial
from .pop import Pop, check_feasible
from .relaxation import BlockSdp, MonomialBasis, basis, moment_matrices
from .sdp import SdpSolution, Status, min_eig


def nvars_from_length(length: int, d: int) -> int:
    """Number of variables n with ``binomial(n + 2d, 2d) == length``."""
    n = 1
    while math.comb(n + 2 * d, 2 * d) < length:
        n += 1
    if math.comb(n + 2 * d, 2 * d) != length:
        raise ValueError(f"length {length} is not the size of a degree-{2 * d} moment vector")
    return n


def _doubled(beta: MultiIndex) -> MultiIndex:
    return tuple(2 * b for b in beta)


# ---------------------------------------------------------------------------
# trace bound


@dataclass(frozen=True)
class BoundReport:
    """Trace recursion and norm bound for one moment vector.

    ``traces[k]`` is ``trace M_k(y)`` and ``ball_traces[k - 1]`` is
    ``trace M_{k-1}(g y)`` for the ball polynomial ``g = R^2 - |x|^2``.
    Two residuals are kept per ``k = 1..d``:

    ``recursion_residuals``
        against ``R^2 trace M_{k-1}(y) + 1 - trace M_k(y)``. This form is
        exact only when ``n == 1`` or ``k == 1``; for ``n >= 2`` a moment
        ``y_{2b}`` enters the ball trace once per variable in the support
        of ``b``.
    ``exact_residuals``
        against ``R^2 trace M_{k-1}(y) - sum_{1 <= |b| <= k} |supp b| y_{2b}``,
        which is an identity for every y.

    For feasible y the diagonal moments are nonnegative, so the exact form
    still gives ``trace M_k(y) <= 1 + R^2 trace M_{k-1}(y)`` and the bound.
    """

    R: float
    order: int
    traces: tuple[float, ...]
    ball_traces: tuple[float, ...]
    recursion_residuals: tuple[float, ...]
    exact_residuals: tuple[float, ...]
    bound: float
    norm: float
    tol: float

    @property
    def recursion_ok(self) -> bool:
        return all(r <= 1e-12 * (1.0 + abs(t)) for r, t in zip(self.recursion_residuals, self.ball_traces))

    @property
    def exact_ok(self) -> bool:
        return all(r <= 1e-12 * (1.0 + abs(t)) for r, t in zip(self.exact_residuals, self.ball_traces))

    @property
    def trace_ok(self) -> bool:
        return self.traces[-1] <= self.bound + self.tol

    @property
    def norm_ok(self) -> bool:
        return self.norm <= self.bound + self.tol

    @property
    def passed(self) -> bool:
        return self.exact_ok and self.trace_ok and self.norm_ok

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "order": self.order,
            "traces": list(self.traces),
            "ball_traces": list(self.ball_traces),
            "recursion_residuals": list(self.recursion_residuals),
            "exact_residuals": list(self.exact_residuals),
            "bound": self.bound,
            "norm": self.norm,
            "tol": self.tol,
            "recursion_ok": self.recursion_ok,
            "exact_ok": self.exact_ok,
            "trace_ok": self.trace_ok,
            "norm_ok": self.norm_ok,
            "passed": self.passed,
        }


def trace_bound_check(y, R: float | None, d: int, tol: float = 1e-6) -> BoundReport:
    """Check the ball trace recursion and ``trace M_d(y), |y| <= sum_k R^{2k}``."""
    if R is None:
        raise ValueError("trace bound needs the ball radius R")
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    y = np.asarray(y, dtype=float)
    if abs(y[0] - 1.0) > 1e-8:
        raise ValueError(f"y_0 = {y[0]!r}, expected 1")
    n = nvars_from_length(y.size, d)
    mom = basis(n, 2 * d).index
    R2 = R * R

    def diag(beta):
        return y[mom[_doubled(beta)]]

    traces = [sum(diag(b) for b in basis(n, k)) for k in range(d + 1)]
    ball, lit, exact = [], [], []
    for k in range(1, d + 1):
        # trace M_{k-1}(g y) straight from the definition
        t = 0.0
        for a in basis(n, k - 1):
            t += R2 * diag(a)
            for i in range(n):
                t -= diag(tuple(a[j] + (j == i) for j in range(n)))
        weighted = sum(sum(1 for v in b if v) * diag(b) for b in basis(n, k) if any(b))
        ball.append(t)
        lit.append(abs(t - (R2 * traces[k - 1] + 1.0 - traces[k])))
        exact.append(abs(t - (R2 * traces[k - 1] - weighted)))
    bound = sum(R2**k for k in range(d + 1))
    return BoundReport(
        R=float(R),
        order=d,
        traces=tuple(float(t) for t in traces),
        ball_traces=tuple(float(t) for t in ball),
        recursion_residuals=tuple(float(r) for r in lit),
        exact_residuals=tuple(float(r) for r in exact),
        bound=float(bound),
        norm=float(np.linalg.norm(y)),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# gap verdict


class Verdict(str, enum.Enum):
    NO_GAP = "NoGap"
    GAP = "Gap"
    INCONCLUSIVE = "Inconclusive"


def strong_duality_verdict(sol: SdpSolution, tol: float = 1e-6) -> Verdict:
    """NoGap, Gap or Inconclusive for a solver outcome.

    An infeasible SOS side has value -inf, so a finite (or +inf) moment
    value next to it is a gap. Equal infinite values decide nothing.
    """
    P, D = sol.moment_value, sol.sos_value
    if sol.status == Status.OPTIMAL:
        if abs(P - D) <= tol * (1.0 + abs(P)):
            return Verdict.NO_GAP
        return Verdict.GAP
    if sol.status == Status.SOS_INFEASIBLE and not np.isnan(P) and P > -np.inf:
        return Verdict.GAP
    return Verdict.INCONCLUSIVE


# ---------------------------------------------------------------------------
# SOS certificate


@dataclass(frozen=True)
class SosCertificate:
    """``f - z = sum_i sigma_i g_i`` up to ``residual``.

    ``squares[i]`` lists pairs ``(w, q)`` with ``sigma_i = sum w q^2`` and
    ``w > 0``.
    """

    lower_bound: float
    squares: tuple[tuple[tuple[float, Polynomial], ...], ...]
    residual: float
    order: int

    def sigma(self, i: int) -> Polynomial:
        out = None
        for w, q in self.squares[i]:
            term = (q * q) * w
            out = term if out is None else out + term
        return out if out is not None else Polynomial.zero(self._nvars())

    def _nvars(self) -> int:
        for sq in self.squares:
            for _, q in sq:
                return q.nvars
        return 1


def _row_basis(nvars: int, side: int) -> MonomialBasis:
    k = 0
    while math.comb(nvars + k, k) < side:
        k += 1
    if math.comb(nvars + k, k) != side:
        raise ValueError(f"block side {side} is not a basis size in {nvars} variables")
    return basis(nvars, k)


def extract_sos_certificate(sdp: BlockSdp, sol: SdpSolution, feas_tol: float = 1e-8) -> SosCertificate:
    """Factor each Gram block into explicit squares.

    Eigenvalues below ``feas_tol`` are dropped so every sigma_i is SOS by
    construction; the error this introduces shows up in ``residual``.
    """
    if sol.status != Status.OPTIMAL or sol.Z is None:
        raise ValueError(f"certificate extraction needs an Optimal solution, got {sol.status.value}")
    if sdp.nvars is None:
        raise ValueError("BlockSdp carries no variable count")
    n = sdp.nvars
    clipped, squares = [], []
    for Zi in sol.Z:
        lam, W = np.linalg.eigh(0.5 * (Zi + Zi.T))
        keep = lam > feas_tol
        clipped.append((W[:, keep] * lam[keep]) @ W[:, keep].T)
        rows = _row_basis(n, Zi.shape[0])
        sq = []
        for w, vec in zip(lam[keep], W[:, keep].T):
            q = Polynomial(n, {a: float(c) for a, c in zip(rows, vec)})
            sq.append((float(w), q))
        squares.append(tuple(sq))
    prods = sdp.sos_products(clipped)
    z = float(sdp.rhs[0] - prods[0])
    residual = float(np.max(np.abs(prods[1:] - sdp.rhs[1:]), initial=0.0))
    return SosCertificate(z, tuple(squares), residual, sdp.order if sdp.order is not None else -1)


def polynomial_residual(cert: SosCertificate, pop: Pop) -> float:
    """Largest coefficient of ``f - z - sum_i sigma_i g_i``, expanded directly."""
    gs = (Polynomial.constant(pop.nvars, 1.0),) + pop.constraints
    if len(gs) != len(cert.squares):
        raise ValueError("certificate and problem have different constraint counts")
    diff = pop.objective - cert.lower_bound
    for i, g in enumerate(gs):
        if cert.squares[i]:
            diff = diff - cert.sigma(i) * g
    return max((abs(c) for _, c in diff.items()), default=0.0)


# ---------------------------------------------------------------------------
# minimizer


def extract_minimizer(y, pop: Pop, d: int, rank_tol: float = 1e-6, tol: float = 1e-6) -> np.ndarray | None:
    """The point ``x_j = y_{e_j}`` when ``M_d(y)`` is numerically rank one.

    The candidate is returned only if it is feasible to ``tol`` and its
    objective value matches ``sum_a f_a y_a`` to ``tol`` relative.
    """
    y = np.asarray(y, dtype=float)
    if abs(y[0] - 1.0) > tol:
        return None
    M = moment_matrices(y, pop, d)[0]
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))[::-1]
    if lam[0] <= 0 or (len(lam) > 1 and lam[1] > rank_tol * lam[0]):
        return None
    x = y[1 : pop.nvars + 1].copy()
    if not check_feasible(pop, x, tol):
        return None
    mom = basis(pop.nvars, 2 * d).index
    val = sum(c * y[mom[a]] for a, c in pop.objective.items())
    if abs(pop.objective(x) - val) > tol * (1.0 + abs(val)):
        return None
    return x


def moment_psd_ok(y, pop: Pop, d: int, tol: float) -> bool:
    """All localizing matrices of y have eigenvalues >= -tol."""
    return all(min_eig(M) >= -tol for M in moment_matrices(y, pop, d))
