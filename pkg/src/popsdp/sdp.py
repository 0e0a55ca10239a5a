"""Small dense block SDP solver on the homogeneous self-dual embedding.

The SOS view of a :class:`~popsdp.relaxation.BlockSdp` is treated as the
standard-form primal

    minimize <C, X>  s.t.  <A_k, X> = b_k,  X PSD

with ``C = A_0`` and ``b_k = f_k``; the moment view is its dual

    maximize b'u  s.t.  S = C - sum_k u_k A_k PSD,

with moments ``y = (1, -u)``. Both are embedded in the homogeneous model

    A(X) - b tau = 0,   A'u + S - C tau = 0,   b'u - <C, X> - kappa = 0,

and solved by a Mehrotra predictor-corrector method with Nesterov-Todd
scaling. Besides PSD blocks the core also handles a nonnegative orthant,
which the auxiliary problems below need.

When the embedding drives ``tau`` to zero one side has no solution. Because
the interesting failures (the dual of a relaxation with a degenerate
feasible set) are *weakly* infeasible, no exact Farkas ray exists, so the
embedding's own ray is not used as the certificate. Instead the
eps-relaxed ray problem

    minimize f'r  s.t.  r_0 = 0,  M_i(r) + eps I PSD,  trace M_0(r) <= 1

is solved for two values of ``eps``. Its value is ``O(eps)`` exactly when
the SOS side is feasible (it is bounded below by ``-eps trace Z`` for any
feasible Gram matrix ``Z``) and decays sublinearly otherwise. The mirror
problem on the Gram side certifies an infeasible moment side.
"""

from __future__ import annotations

import enum
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .relaxation import BlockSdp

log = logging.getLogger(__name__)

# epsilon ratio of the two relaxed ray problems, and the decay ratio above
# which the value is deemed sublinear in eps (geometric mean of the linear
# ratio 1e-2 and the square-root ratio 1e-1)
_EPS_RATIO = 1e-2
_SUBLINEAR = 10 ** -1.5
# trace caps for the moment value when the SOS side is infeasible
_TRACE_CAPS = (1e4, 1e6)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    SOS_INFEASIBLE = "SosInfeasible"
    MOMENT_UNBOUNDED = "MomentUnbounded"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    inf_tol: float = 1e-8
    step_fraction: float = 0.99
    regularization: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        for name in ("feas_tol", "gap_tol", "inf_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")


@dataclass
class SdpSolution:
    """Outcome of :func:`solve`.

    ``moment_value`` and ``sos_value`` follow the usual conventions for
    infeasible sides: an infeasible SOS side has value ``-inf`` and an
    infeasible moment side ``+inf``. ``ray`` is the moment-side certificate
    of an infeasible SOS side (``ray[0] == 0``); ``sos_ray`` the Gram-side
    certificate of an infeasible moment side.
    """

    status: Status
    y: np.ndarray | None = None
    Z: list[np.ndarray] | None = None
    moment_value: float = float("nan")
    sos_value: float = float("nan")
    iterations: int = 0
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    ray: np.ndarray | None = None
    sos_ray: list[np.ndarray] | None = None
    info: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.moment_value - self.sos_value)


# ---------------------------------------------------------------------------
# linear algebra helpers


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _nt_scaling(X: np.ndarray, S: np.ndarray):
    """Return ``(G, lam)`` with ``G^{-1} X G^{-T} = G^T S G = diag(lam)``."""
    L = np.linalg.cholesky(X)
    R = np.linalg.cholesky(S)
    _, sv, Vt = np.linalg.svd(R.T @ L)
    G = L @ Vt.T / np.sqrt(sv)
    return G, sv


def _max_step(lam: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with ``diag(lam) + alpha D`` PSD (inf if unrestricted)."""
    r = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(_sym(D * r[:, None] * r[None, :]))[0]
    return np.inf if e >= 0 else -1.0 / e


def _max_step_lp(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    return float(np.min(-v[neg] / dv[neg])) if np.any(neg) else np.inf


def min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_sym(M))[0]) if M.size else np.inf


class _Breakdown(Exception):
    pass


# ---------------------------------------------------------------------------
# standard-form data and the embedding


@dataclass
class _Problem:
    """``blocks[j]`` is a stack ``(m + 1, s, s)`` whose slice 0 is the cost
    matrix and slices 1..m are the constraint matrices; ``lp`` is the
    ``(m + 1, L)`` analogue for a nonnegative orthant of dimension L."""

    blocks: list[np.ndarray]
    lp: np.ndarray
    b: np.ndarray

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def degree(self) -> int:
        return sum(B.shape[1] for B in self.blocks) + self.lp.shape[1]

    def A(self, X, x) -> np.ndarray:
        out = self.lp[1:] @ x
        for B, Xj in zip(self.blocks, X):
            out = out + np.tensordot(B[1:], Xj, axes=([1, 2], [0, 1]))
        return out

    def AT(self, u):
        return [np.tensordot(u, B[1:], axes=1) for B in self.blocks], u @ self.lp[1:]

    def cdot(self, X, x) -> float:
        return float(sum(np.vdot(B[0], Xj) for B, Xj in zip(self.blocks, X)) + self.lp[0] @ x)

    @property
    def cnorm(self) -> float:
        return float(np.sqrt(sum(np.vdot(B[0], B[0]) for B in self.blocks) + self.lp[0] @ self.lp[0]))


@dataclass
class _Iterate:
    X: list[np.ndarray]
    x: np.ndarray
    S: list[np.ndarray]
    s: np.ndarray
    u: np.ndarray
    tau: float
    kappa: float


@dataclass
class _Stats:
    mu: float
    pres: float
    dres: float
    gap: float
    pobj: float
    dobj: float
    rho: float


def _bdot(U, V) -> float:
    return float(sum(np.vdot(a, b) for a, b in zip(U, V)))


def _stats(prob: _Problem, it: _Iterate, offset: float) -> tuple[_Stats, tuple]:
    tau = it.tau
    rp = prob.b * tau - prob.A(it.X, it.x)
    ATu, ATul = prob.AT(it.u)
    rd = [B[0] * tau - a - Sj for B, a, Sj in zip(prob.blocks, ATu, it.S)]
    rdl = prob.lp[0] * tau - ATul - it.s
    cx = prob.cdot(it.X, it.x)
    bu = float(prob.b @ it.u)
    rg = bu - cx - it.kappa
    mu = (_bdot(it.X, it.S) + it.x @ it.s + tau * it.kappa) / (prob.degree + 1)
    pobj, dobj = cx / tau, bu / tau
    dnorm = np.sqrt(sum(np.vdot(r, r) for r in rd) + rdl @ rdl)
    size = max(1.0, float(np.sqrt(sum(np.vdot(Xj, Xj) for Xj in it.X) + it.x @ it.x)), float(np.linalg.norm(it.u)))
    st = _Stats(
        mu=float(mu),
        pres=float(np.linalg.norm(rp) / tau / (1.0 + np.linalg.norm(prob.b))),
        dres=float(dnorm / tau / (1.0 + prob.cnorm)),
        gap=abs(pobj - dobj) / (1.0 + abs(offset - dobj)),
        pobj=pobj,
        dobj=dobj,
        rho=tau / size,
    )
    return st, (rp, rd, rdl, rg)


def _hsd(prob: _Problem, opts: SolverOptions, offset: float = 0.0):
    """Iterate the embedding from the identity point.

    Yields ``(k, iterate, stats)`` for every iterate including the start;
    raises :class:`_Breakdown` when the Newton system cannot be solved.
    """
    sizes = [B.shape[1] for B in prob.blocks]
    L = prob.lp.shape[1]
    N = prob.degree
    b = prob.b
    C = [B[0] for B in prob.blocks]
    cl = prob.lp[0]
    flat = [B.reshape(B.shape[0], -1) for B in prob.blocks]
    it = _Iterate([np.eye(s) for s in sizes], np.ones(L), [np.eye(s) for s in sizes], np.ones(L), np.zeros(prob.m), 1.0, 1.0)

    for k in range(opts.max_iterations + 1):
        st, (rp, rd, rdl, rg) = _stats(prob, it, offset)
        yield k, it, st
        if k == opts.max_iterations:
            return
        X, x, S, s, u, tau, kappa = it.X, it.x, it.S, it.s, it.u, it.tau, it.kappa
        mu = st.mu

        try:
            scal = [_nt_scaling(Xj, Sj) for Xj, Sj in zip(X, S)]
        except np.linalg.LinAlgError as exc:
            raise _Breakdown(f"lost positive definiteness: {exc}") from exc
        Ws = [G @ G.T for G, _ in scal]
        wl = np.sqrt(x / s)
        laml = np.sqrt(x * s)

        # F[k, l] = <A_k, W A_l W>, index 0 being the cost
        F = (prob.lp * wl**2) @ prob.lp.T
        for B, Bf, W in zip(prob.blocks, flat, Ws):
            WBW = np.matmul(np.matmul(W, B), W).reshape(B.shape[0], -1)
            F += Bf @ WBW.T
        F = _sym(F)
        M = F[1:, 1:].copy()
        M[np.diag_indices_from(M)] += opts.regularization
        p = F[1:, 0]
        cwc = F[0, 0]
        try:
            chol = sla.cho_factor(M)
            base = lambda r: sla.cho_solve(chol, r)  # noqa: E731
        except np.linalg.LinAlgError:
            try:
                lu = sla.lu_factor(M)
            except (np.linalg.LinAlgError, ValueError, sla.LinAlgWarning) as exc:
                raise _Breakdown(f"singular Schur complement: {exc}") from exc
            base = lambda r: sla.lu_solve(lu, r)  # noqa: E731

        def msolve(r):
            # iterative refinement recovers digits lost to ill-conditioning
            v = base(r)
            res = r - M @ v
            for _ in range(2):
                w = v + base(res)
                res_w = r - M @ w
                if not np.linalg.norm(res_w) < np.linalg.norm(res):
                    break
                v, res = w, res_w
            return v

        v2 = msolve(p + b)
        WrdW = [W @ r @ W for W, r in zip(Ws, rd)]
        wrdl = wl**2 * rdl
        denom = float((p - b) @ v2) - cwc - kappa / tau
        if not np.isfinite(denom) or denom == 0.0:
            raise _Breakdown("degenerate homogenizing equation")

        def direction(eta, T, tl, rtau):
            Rc = [G @ (2.0 * Tj / (lam[:, None] + lam[None, :])) @ G.T for (G, lam), Tj in zip(scal, T)]
            rcl = wl * tl / laml
            h1 = eta * rp - prob.A(Rc, rcl) + eta * prob.A(WrdW, wrdl)
            h2 = eta * rg - prob.cdot(Rc, rcl) + eta * prob.cdot(WrdW, wrdl) - rtau / tau
            v1 = msolve(h1)
            dtau = (h2 - float((p - b) @ v1)) / denom
            du = v1 + v2 * dtau
            ATdu, ATdul = prob.AT(du)
            dS = [_sym(eta * r - a + Cj * dtau) for r, a, Cj in zip(rd, ATdu, C)]
            dsl = eta * rdl - ATdul + cl * dtau
            dX = [_sym(R - W @ dSj @ W) for R, W, dSj in zip(Rc, Ws, dS)]
            dxl = rcl - wl**2 * dsl
            dkappa = (rtau - kappa * dtau) / tau
            return dX, dxl, dS, dsl, du, dtau, dkappa

        def scaled(dX, dS):
            out = []
            for (G, _), dXj, dSj in zip(scal, dX, dS):
                Gi = np.linalg.inv(G)
                out.append((_sym(Gi @ dXj @ Gi.T), _sym(G.T @ dSj @ G)))
            return out

        def steplen(d, sc):
            dX, dxl, dS, dsl, du, dtau, dkappa = d
            amax = min(_max_step_lp(x, dxl), _max_step_lp(s, dsl))
            for (_, lam), (dXs, dSs) in zip(scal, sc):
                amax = min(amax, _max_step(lam, dXs), _max_step(lam, dSs))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            return amax

        # predictor
        pred = direction(1.0, [-np.diag(lam**2) for _, lam in scal], -(laml**2), -tau * kappa)
        sc_a = scaled(pred[0], pred[2])
        alpha_a = min(1.0, steplen(pred, sc_a))
        dXa, dxa, dSa, dsa, _, dtaua, dkappaa = pred
        mu_a = (
            _bdot([Xj + alpha_a * d for Xj, d in zip(X, dXa)], [Sj + alpha_a * d for Sj, d in zip(S, dSa)])
            + (x + alpha_a * dxa) @ (s + alpha_a * dsa)
            + (tau + alpha_a * dtaua) * (kappa + alpha_a * dkappaa)
        ) / (N + 1)
        sigma = min(1.0, max(0.0, mu_a / mu)) ** 3

        # corrector with the second-order term
        T = [
            sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - _sym(dXs @ dSs)
            for (_, lam), (dXs, dSs) in zip(scal, sc_a)
        ]
        tl = sigma * mu - laml**2 - (dxa / wl) * (dsa * wl)
        rtau = sigma * mu - tau * kappa - dtaua * dkappaa
        corr = direction(1.0 - sigma, T, tl, rtau)
        alpha = min(1.0, opts.step_fraction * steplen(corr, scaled(corr[0], corr[2])))
        if not np.isfinite(alpha) or alpha <= 0:
            raise _Breakdown("no admissible step")
        dX, dxl, dS, dsl, du, dtau, dkappa = corr
        it = _Iterate(
            [_sym(Xj + alpha * d) for Xj, d in zip(X, dX)],
            x + alpha * dxl,
            [_sym(Sj + alpha * d) for Sj, d in zip(S, dS)],
            s + alpha * dsl,
            u + alpha * du,
            tau + alpha * dtau,
            kappa + alpha * dkappa,
        )
        if not (np.isfinite(it.tau) and np.isfinite(it.kappa) and np.all(np.isfinite(it.u))):
            raise _Breakdown("non-finite iterate")


@dataclass
class _Run:
    outcome: str  # "optimal", "infeasible", "stalled"
    iterate: _Iterate
    stats: _Stats
    iterations: int
    message: str = ""


def _merit(st: _Stats) -> float:
    return max(st.pres, st.dres, st.gap)


def _run(prob: _Problem, opts: SolverOptions, offset: float = 0.0, stall: int = 15) -> _Run:
    """Drive the embedding until optimality, a vanishing ``tau`` or a stall.

    A stall is ``stall`` consecutive iterations in which neither the merit
    (worst of the normalized residuals and gap) nor the complementarity
    measure halves. A stalled run returns the iterate with the best merit.
    """
    ref_merit = ref_mu = np.inf
    since = 0
    last = best = None

    def stalled(message):
        k, it, st = best if best is not None else last
        return _Run("stalled", it, st, k, message)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            for k, it, st in _hsd(prob, opts, offset):
                last = (k, it, st)
                if best is None or _merit(st) < _merit(best[2]):
                    best = last
                if st.pres <= opts.feas_tol and st.dres <= opts.feas_tol and st.gap <= opts.gap_tol:
                    return _Run("optimal", it, st, k)
                if st.rho < opts.inf_tol and st.mu < opts.gap_tol:
                    return _Run("infeasible", it, st, k)
                if _merit(st) < 0.5 * ref_merit or st.mu < 0.5 * ref_mu:
                    ref_merit, ref_mu, since = min(ref_merit, _merit(st)), min(ref_mu, st.mu), 0
                else:
                    since += 1
                    if since >= stall:
                        return stalled("no progress")
    except (_Breakdown, sla.LinAlgWarning) as exc:
        log.debug("embedding breakdown: %s", exc)
        return stalled(str(exc))
    return stalled("iteration limit")


def _nearly_optimal(run: _Run, opts: SolverOptions, slack: float = 100.0) -> bool:
    """Optimal, or stalled at an iterate within ``slack`` times the tolerances."""
    if run.outcome == "optimal":
        return True
    st = run.stats
    return (
        run.outcome == "stalled"
        and st.rho >= opts.inf_tol
        and max(st.pres, st.dres) <= slack * opts.feas_tol
        and st.gap <= slack * opts.gap_tol
    )


# ---------------------------------------------------------------------------
# conversions between a BlockSdp and standard form


def _standard_form(sdp: BlockSdp, cost: list[np.ndarray] | None = None, trace_cap: float | None = None) -> _Problem:
    """Moment problem of ``sdp`` in standard dual form.

    ``cost`` replaces the ``A_{i,0}`` slices; ``trace_cap`` appends the
    scalar constraint ``cap - trace M_0(y) >= 0`` as an orthant coordinate.
    """
    blocks = []
    for j, A in enumerate(sdp.dense_blocks):
        B = np.array(A)
        if cost is not None:
            B[0] = cost[j]
        blocks.append(B)
    b = sdp.rhs[1:].copy()
    if trace_cap is None:
        lp = np.zeros((len(b) + 1, 0))
    else:
        tr = np.trace(sdp.dense_blocks[0], axis1=1, axis2=2)
        const = 0.0 if cost is not None else tr[0]
        lp = np.concatenate([[trace_cap - const], -tr[1:]])[:, None]
    return _Problem(blocks, lp, b)


def _moment_vector(it: _Iterate) -> np.ndarray:
    return np.concatenate([[1.0], -it.u / it.tau])


# ---------------------------------------------------------------------------
# infeasibility certificates


def _moment_ray_problem(sdp: BlockSdp, eps: float) -> _Problem:
    cost = [eps * np.eye(s) for s in sdp.block_sizes]
    return _standard_form(sdp, cost=cost, trace_cap=1.0)


def _moment_ray(sdp: BlockSdp, eps: float, opts: SolverOptions):
    """Solve min f'r s.t. r_0 = 0, M_i(r) + eps I PSD, trace M_0(r) <= 1."""
    prob = _moment_ray_problem(sdp, eps)
    run = _run(prob, opts)
    if not _nearly_optimal(run, opts):
        return None, np.nan
    r = np.concatenate([[0.0], -run.iterate.u / run.iterate.tau])
    return r, -run.stats.dobj


def _gram_ray_problem(sdp: BlockSdp, eps: float) -> _Problem:
    """Gram-side mirror of :func:`_moment_ray_problem` in standard form.

    With ``X = X' - eps I``: minimize <C, X'> s.t. A(X') = eps A(I),
    trace X' + t = 1 + eps N, X' PSD, t >= 0.
    """
    m = sdp.num_constraints
    N = sum(sdp.block_sizes)
    blocks = []
    for A in sdp.dense_blocks:
        s = A.shape[1]
        B = np.zeros((m + 2, s, s))
        B[: m + 1] = A
        B[m + 1] = np.eye(s)
        blocks.append(B)
    lp = np.zeros((m + 2, 1))
    lp[m + 1, 0] = 1.0
    AI = sum(np.trace(A[1:], axis1=1, axis2=2) for A in sdp.dense_blocks)
    b = np.concatenate([eps * AI, [1.0 + eps * N]])
    return _Problem(blocks, lp, b)


def _gram_ray(sdp: BlockSdp, eps: float, opts: SolverOptions):
    """Solve min <C, X> s.t. A(X) = 0, X + eps I PSD, trace(X + eps I) <= 1."""
    prob = _gram_ray_problem(sdp, eps)
    run = _run(prob, opts)
    if not _nearly_optimal(run, opts):
        return None, np.nan
    Z = [Xj / run.iterate.tau - eps * np.eye(len(Xj)) for Xj in run.iterate.X]
    trC = sum(np.trace(A[0]) for A in sdp.dense_blocks)
    return Z, run.stats.pobj - eps * trC


def _sublinear(v1: float, v2: float, floor: float) -> bool:
    """True when the relaxed ray value does not shrink linearly with eps."""
    if not (np.isfinite(v1) and np.isfinite(v2)):
        return False
    if v1 >= -floor:
        return False
    return v2 / v1 >= _SUBLINEAR


def check_moment_ray(sdp: BlockSdp, ray: np.ndarray, tol: float) -> bool:
    """Independent check of a moment-side certificate of SOS infeasibility."""
    if ray is None or ray[0] != 0.0:
        return False
    mats = sdp.moment_matrices(ray)
    return all(min_eig(M) >= -tol for M in mats) and sdp.moment_value(ray) < 0


def check_gram_ray(sdp: BlockSdp, Z: list[np.ndarray], tol: float) -> bool:
    """Independent check of a Gram-side certificate of moment infeasibility."""
    if Z is None:
        return False
    prods = sdp.sos_products(Z)
    return (
        all(min_eig(Zj) >= -tol for Zj in Z)
        and float(np.max(np.abs(prods[1:]), initial=0.0)) <= tol
        and prods[0] < 0
    )


@dataclass
class _Reduced:
    """Moment problem restricted to a face: ``y = base + basis @ w``."""

    prob: _Problem
    offset: float
    base: np.ndarray
    basis: np.ndarray

    def moments(self, it: _Iterate) -> np.ndarray:
        return self.base + self.basis @ (-it.u / it.tau)


def _diagonal_certificate(blocks: list[np.ndarray]) -> list[np.ndarray]:
    """Largest support of ``d >= 0`` with ``sum_{i,r} d_ir F_i[k, r, r] = 0`` for all k.

    Such a ``d`` is a diagonal PSD matrix orthogonal to every localizing
    block, so each flagged row of every feasible block vanishes.
    """
    diags = [np.diagonal(B, axis1=1, axis2=2) for B in blocks]
    D = np.concatenate(diags, axis=1)
    nk, n = D.shape
    if n == 0:
        return [np.zeros(0, dtype=bool) for _ in blocks]
    # variables (d, t): maximize sum t, t <= d, 0 <= t <= 1
    c = np.concatenate([np.zeros(n), -np.ones(n)])
    A_eq = np.hstack([D, np.zeros((nk, n))])
    A_ub = np.hstack([-np.eye(n), np.eye(n)])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=np.zeros(nk), bounds=[(0, None)] * n + [(0, 1)] * n)
    flags = res.x[n:] > 0.5 if res.status == 0 else np.zeros(n, dtype=bool)
    out, pos = [], 0
    for dg in diags:
        out.append(flags[pos : pos + dg.shape[1]])
        pos += dg.shape[1]
    return out


def _facial_reduction(sdp: BlockSdp, tol: float = 1e-12) -> _Reduced | None:
    """Restrict the moment problem to the face exposed by diagonal certificates.

    Returns ``None`` when the forced linear equations are inconsistent,
    i.e. the moment side is infeasible.
    """
    prob = _standard_form(sdp)
    m = prob.m
    # in w = -u (the moments y_1..y_m) each block is F[0] + sum_j w_j F[j]
    # and the objective is offset + g'w
    blocks = list(prob.blocks)
    g = prob.b
    base, basis, offset = np.eye(m + 1)[0], np.vstack([np.zeros((1, m)), np.eye(m)]), sdp.offset
    while blocks:
        flags = _diagonal_certificate(blocks)
        if not any(f.any() for f in flags):
            break
        rows = [B[:, f, :].reshape(B.shape[0], -1) for B, f in zip(blocks, flags)]
        E = np.concatenate(rows, axis=1)
        const, lin = E[0], E[1:].T
        if lin.shape[1]:
            wp = np.linalg.lstsq(lin, -const, rcond=None)[0]
            N2 = sla.null_space(lin) if lin.size else np.eye(lin.shape[1])
        else:
            wp, N2 = np.zeros(0), np.zeros((0, 0))
        if np.max(np.abs(lin @ wp + const), initial=0.0) > tol * (1.0 + np.max(np.abs(E), initial=0.0)):
            return None
        new = []
        for B, f in zip(blocks, flags):
            keep = ~f
            if not keep.any():
                continue
            Bk = B[:, keep][:, :, keep]
            F0 = Bk[0] + np.tensordot(wp, Bk[1:], axes=1)
            Fj = np.tensordot(N2.T, Bk[1:], axes=1)
            new.append(np.concatenate([F0[None], Fj]))
        offset += float(g @ wp)
        g = N2.T @ g
        base = base + basis @ wp
        basis = basis @ N2
        blocks = new
    k = basis.shape[1]
    return _Reduced(_Problem(blocks, np.zeros((k + 1, 0)), g), offset, base, basis)


def _with_trace_cap(prob: _Problem, cap: float) -> _Problem:
    tr = sum(np.trace(B, axis1=1, axis2=2) for B in prob.blocks) if prob.blocks else np.zeros(prob.m + 1)
    lp = np.concatenate([[cap - tr[0]], -tr[1:]])[:, None]
    return _Problem(prob.blocks, lp, prob.b)


def _reduced_moment_value(sdp: BlockSdp, opts: SolverOptions) -> tuple[float, np.ndarray | None, dict]:
    """Moment value when the SOS side is infeasible.

    The moment problem is first restricted to the face found by
    :func:`_facial_reduction`. If the restricted pair solves, its value is
    the answer. Otherwise it is re-solved with ``trace <= cap`` for two
    caps; the capped problems have bounded feasible sets and hence no gap.
    Equal values mean the optimum lies inside the smaller cap, a decrease
    means the value is unbounded below.
    """
    red = _facial_reduction(sdp)
    if red is None:
        return float("inf"), None, {"facial_reduction": "inconsistent"}
    info = {"reduced_blocks": [B.shape[1] for B in red.prob.blocks], "reduced_variables": red.prob.m}
    if red.prob.m == 0 or not red.prob.blocks:
        y = red.base
        ok = all(min_eig(M) >= -opts.feas_tol for M in sdp.moment_matrices(y))
        return (sdp.moment_value(y), y, info) if ok else (float("inf"), None, info)
    run = _run(red.prob, opts, offset=red.offset)
    if run.outcome == "optimal":
        return red.offset - run.stats.dobj, red.moments(run.iterate), info
    vals, ys = [], []
    for cap in _TRACE_CAPS:
        run = _run(_with_trace_cap(red.prob, cap), opts, offset=red.offset)
        if run.outcome != "optimal":
            return float("nan"), None, info
        vals.append(red.offset - run.stats.dobj)
        ys.append(red.moments(run.iterate))
    info["capped_values"] = tuple(vals)
    tol = 1e3 * opts.gap_tol * (1.0 + abs(vals[0]))
    if abs(vals[1] - vals[0]) <= tol:
        return vals[0], ys[0], info
    if vals[1] < vals[0]:
        return float("-inf"), None, info
    return float("nan"), None, info


def _classify_infeasible(sdp: BlockSdp, opts: SolverOptions, run: _Run) -> SdpSolution:
    eps1 = opts.feas_tol
    eps2 = eps1 * _EPS_RATIO
    sub_opts = SolverOptions(
        max_iterations=opts.max_iterations,
        feas_tol=min(opts.feas_tol, 1e-9),
        gap_tol=min(opts.gap_tol, 1e-10),
        inf_tol=opts.inf_tol,
        step_fraction=opts.step_fraction,
        regularization=opts.regularization,
    )
    floor = 10 * eps1
    info = {"hsd_outcome": run.outcome, "hsd_message": run.message, "tau": run.iterate.tau, "kappa": run.iterate.kappa}

    ray, v1 = _moment_ray(sdp, 0.5 * eps1, sub_opts)
    _, v2 = _moment_ray(sdp, 0.5 * eps2, sub_opts)
    sos_infeasible = _sublinear(v1, v2, floor) and check_moment_ray(sdp, ray, eps1)
    info["moment_ray_values"] = (v1, v2)

    Zr, w1 = _gram_ray(sdp, 0.5 * eps1, sub_opts)
    _, w2 = _gram_ray(sdp, 0.5 * eps2, sub_opts)
    moment_infeasible = _sublinear(w1, w2, floor) and check_gram_ray(sdp, Zr, eps1)
    info["gram_ray_values"] = (w1, w2)

    common = dict(iterations=run.iterations, primal_residual=run.stats.pres, dual_residual=run.stats.dres, info=info)
    if sos_infeasible and moment_infeasible:
        return SdpSolution(Status.SOS_INFEASIBLE, moment_value=float("inf"), sos_value=float("-inf"), ray=ray, sos_ray=Zr, **common)
    if sos_infeasible:
        val, y, extra = _reduced_moment_value(sdp, sub_opts)
        info.update(extra)
        return SdpSolution(Status.SOS_INFEASIBLE, y=y, moment_value=val, sos_value=float("-inf"), ray=ray, **common)
    if moment_infeasible:
        return SdpSolution(Status.MOMENT_UNBOUNDED, moment_value=float("inf"), sos_value=float("inf"), sos_ray=Zr, **common)
    return SdpSolution(Status.UNKNOWN, **common)


# ---------------------------------------------------------------------------
# public entry points


def solve(sdp: BlockSdp, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve the moment/SOS pair stored in ``sdp``."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    run = _run(_standard_form(sdp), opts, offset=sdp.offset)
    it, st = run.iterate, run.stats
    if run.outcome == "optimal":
        sol = SdpSolution(
            Status.OPTIMAL,
            y=_moment_vector(it),
            Z=[Xj / it.tau for Xj in it.X],
            moment_value=sdp.offset - st.dobj,
            sos_value=sdp.offset - st.pobj,
            iterations=run.iterations,
            primal_residual=st.pres,
            dual_residual=st.dres,
            info={"tau": it.tau, "kappa": it.kappa},
        )
    elif run.outcome == "infeasible" or st.rho < np.sqrt(opts.inf_tol):
        sol = _classify_infeasible(sdp, opts, run)
    else:
        sol = SdpSolution(
            Status.UNKNOWN,
            iterations=run.iterations,
            primal_residual=st.pres,
            dual_residual=st.dres,
            info={"hsd_outcome": run.outcome, "hsd_message": run.message, "tau": it.tau, "kappa": it.kappa},
        )
    sol.info["seconds"] = time.perf_counter() - t0
    return sol


def residuals(sdp: BlockSdp, sol: SdpSolution) -> tuple[float, float, float]:
    """(moment-side residual, SOS-side residual, value gap).

    The moment-side residual is ``|y_0 - 1|`` plus the magnitude of the most
    negative eigenvalue over all localizing blocks; the SOS-side residual is
    the largest coefficient mismatch ``|sum_i <A_{i,a}, Z_i> - f_a|``.
    Missing pieces give ``nan``.
    """
    if sol.y is not None:
        y = np.asarray(sol.y, dtype=float)
        worst = min(min_eig(M) for M in sdp.moment_matrices(y))
        mres = abs(y[0] - 1.0) + max(0.0, -worst)
    else:
        mres = float("nan")
    if sol.Z is not None:
        r = sdp.sos_residual(sol.Z)
        sres = float(np.max(np.abs(r), initial=0.0))
    else:
        sres = float("nan")
    gap = abs(sol.moment_value - sol.sos_value)
    return mres, sres, gap
