"""Acceptance criteria 1-9.

Each criterion test records one line in RESULTS (printed in the terminal
summary by conftest) before asserting, so a failing criterion still shows
its numbers.
"""

import math
import time

import numpy as np
import pytest

from conftest import DATA
from corpus import BY_NAME, CORPUS, random_pop
from oracles import schweighofer_ball_moment_min, univariate_min
from popsdp.certificates import extract_minimizer, extract_sos_certificate, moment_psd_ok, polynomial_residual, trace_bound_check
from popsdp.cli import format_sdpa, parse_pop, parse_sdpa, print_pop
from popsdp.polynomial import Polynomial, evaluate
from popsdp.pop import Pop, add_ball_constraint, lift_point
from popsdp.relaxation import assemble, basis, moment_matrices, relaxation_order_min
from popsdp.sdp import Status, solve

T0 = time.perf_counter()
RESULTS: dict[str, str] = {}
TOL = 1e-6


def record(key: str, ok: bool, text: str) -> bool:
    RESULTS[key] = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {text}"
    return ok


def _d_min(pop: Pop) -> int:
    return max(1, relaxation_order_min(pop))


def _random_y(rng, n, d):
    y = rng.normal(size=math.comb(n + 2 * d, 2 * d))
    y[0] = 1.0
    return y


# solves shared by criteria 5 and 6
_SOLVES: dict = {}


def corpus_solves():
    """Every corpus problem at orders d_min..d_min+2, solved once."""
    if not _SOLVES:
        for case in CORPUS:
            pop = case.pop
            d0 = _d_min(pop)
            for d in (d0, d0 + 1, d0 + 2):
                sdp = assemble(pop, d)
                _SOLVES[case.name, d] = (pop, sdp, solve(sdp))
    return _SOLVES


def test_criterion_1_gap_reproduction(schweighofer):
    t = time.perf_counter()
    sol = solve(assemble(schweighofer, 1))
    secs = time.perf_counter() - t
    ok = sol.status == Status.SOS_INFEASIBLE and abs(sol.moment_value) <= TOL and sol.sos_value == -np.inf and secs < 1.0
    record("1", ok, f"status={sol.status.value} val_P={sol.moment_value:.2e} val_D={sol.sos_value} time={secs:.2f}s")
    assert ok


def test_criterion_2_gap_repair(schweighofer):
    pop = add_ball_constraint(schweighofer, 2.0)
    oracle = schweighofer_ball_moment_min(2.0)
    t = time.perf_counter()
    sols = {d: solve(assemble(pop, d)) for d in (1, 2)}
    secs = time.perf_counter() - t
    parts, ok = [], oracle == 0.0 and secs < 2.0
    for d, sol in sols.items():
        P, D = sol.moment_value, sol.sos_value
        good = sol.status == Status.OPTIMAL and abs(P - D) <= TOL * (1 + abs(P)) and abs(P) <= TOL and abs(D) <= TOL
        ok = ok and good
        parts.append(f"d={d} {sol.status.value} val_P={P:.2e} val_D={D:.2e}")
    record("2", ok, "; ".join(parts) + f"; brute-force d=1 value {oracle:g}; time={secs:.2f}s")
    assert ok


def test_criterion_3_analytic_corpus(unit_disk, disk_x1x2):
    s1 = solve(assemble(unit_disk, 1))
    x = extract_minimizer(s1.y, unit_disk, 1)
    ok1 = abs(s1.moment_value + 1) <= TOL and x is not None and np.allclose(x, [-1.0, 0.0], atol=TOL)

    s2 = solve(assemble(disk_x1x2, 1))
    ok2 = abs(s2.moment_value + 0.5) <= TOL and extract_minimizer(s2.y, disk_x1x2, 1) is None

    quartic = BY_NAME["quartic_interval"].pop
    ref = univariate_min([0.0, 2.0, 1.0, -3.0, 1.0], -2.0, 2.0)
    s3 = solve(assemble(quartic, 2))
    ok3 = abs(s3.moment_value - ref) <= 1e-5

    ok = ok1 and ok2 and ok3
    record(
        "3",
        ok,
        f"disk x1 {s1.moment_value:.7f} x*={None if x is None else (np.round(x, 6) + 0.0).tolist()}; "
        f"disk x1x2 {s2.moment_value:.7f} (no extraction: {ok2}); quartic {s3.moment_value:.7f} vs oracle {ref:.7f}",
    )
    assert ok


LEMMA_GRID = [(n, d, R) for n in (1, 2, 3) for d in (1, 2, 3) for R in (1.0, 2.0)]


def test_criterion_4a_recursion_identity():
    rng = np.random.default_rng(2024)
    worst_lit, worst_exact, bad = 0.0, 0.0, set()
    for n, d, R in LEMMA_GRID:
        for _ in range(1000):
            rep = trace_bound_check(_random_y(rng, n, d), R, d)
            worst_exact = max(worst_exact, max(rep.exact_residuals))
            worst_lit = max(worst_lit, max(rep.recursion_residuals))
            if not rep.recursion_ok:
                bad.add((n, d))
    exact_ok = worst_exact <= 1e-12
    lit_ok = not bad
    record(
        "4a",
        lit_ok and exact_ok,
        f"literal recursion max residual {worst_lit:.3g}, fails for (n, d) in {sorted(bad)}; "
        f"corrected identity max residual {worst_exact:.1e} ({'holds' if exact_ok else 'fails'})",
    )
    # the corrected identity is what the bound rests on; the literal form is checked below
    assert exact_ok


@pytest.mark.parametrize(
    "n,d,R",
    [
        pytest.param(
            n, d, R,
            marks=pytest.mark.xfail(
                n >= 2 and d >= 2,
                reason="literal recursion omits the multiplicity |supp b| of y_2b for n >= 2, k >= 2",
                strict=True,
            ),
        )
        for n, d, R in LEMMA_GRID
    ],
)
def test_criterion_4a_literal_recursion(n, d, R):
    rng = np.random.default_rng(7 * n + d)
    worst = max(max(trace_bound_check(_random_y(rng, n, d), R, d).recursion_residuals) for _ in range(1000))
    assert worst <= 1e-12


def _with_ball(pop: Pop) -> Pop:
    return pop if pop.ball_radius is not None else add_ball_constraint(pop, 2.0)


def test_criterion_4b_trace_bound():
    n_solves, worst, ok = 0, -np.inf, True
    for case in CORPUS:
        pop = _with_ball(case.pop)
        d0 = _d_min(pop)
        for d in (d0, d0 + 1, d0 + 2):
            sol = solve(assemble(pop, d))
            if sol.status != Status.OPTIMAL:
                continue
            rep = trace_bound_check(sol.y, pop.ball_radius, d)
            n_solves += 1
            worst = max(worst, rep.traces[-1] - rep.bound, rep.norm - rep.bound)
            ok = ok and rep.trace_ok and rep.norm_ok
    ok = ok and n_solves >= 25
    record("4b", ok, f"{n_solves} Optimal solves with ball; max(trace or norm - bound) = {worst:.3g}")
    assert ok


def test_criterion_4c_orthogonality():
    ok = True
    for n in (1, 2, 3):
        for d in (1, 2, 3):
            A = assemble(Pop(n, Polynomial.variable(n, 0)), d).dense_blocks[0]
            G = np.tensordot(A, A, axes=([1, 2], [1, 2]))
            diag = np.diag(G)
            ok = ok and np.array_equal(G, np.diag(diag)) and bool(np.all(diag >= 1))
    record("4c", ok, "<A_a, A_b> = 0 for a != b and <A_a, A_a> >= 1, exact, n <= 3, d <= 3")
    assert ok


def test_criterion_5_duality_and_monotonicity():
    rng = np.random.default_rng(5)
    solves = corpus_solves()
    weak, mono, upper = [], [], []
    n_opt = 0
    for case in CORPUS:
        d0 = _d_min(case.pop)
        vals = []
        for d in (d0, d0 + 1, d0 + 2):
            pop, _, sol = solves[case.name, d]
            P = sol.moment_value
            vals.append(P)
            if sol.status == Status.OPTIMAL:
                n_opt += 1
                if not sol.sos_value <= P + TOL * (1 + abs(P)):
                    weak.append((case.name, d))
        if any(np.isnan(v) for v in vals) or not all(a <= b + TOL * (1 + abs(b)) for a, b in zip(vals, vals[1:])):
            mono.append((case.name, vals))
        fmin = min(evaluate(case.pop.objective, x) for x in case.sample(rng, 100))
        if not vals[-1] <= fmin + TOL * (1 + abs(fmin)):
            upper.append((case.name, vals[-1], fmin))
    ok = not weak and not mono and not upper
    record(
        "5",
        ok,
        f"{len(CORPUS)} problems x 3 orders, {n_opt} Optimal; weak duality violations {weak}; "
        f"non-monotone {mono}; val_P > f(x*) {upper}",
    )
    assert ok


def test_criterion_6_certificates(unit_disk, xs):
    x1, x2 = xs
    worst, count = 0.0, 0
    for pop, sdp, sol in corpus_solves().values():
        if sol.status != Status.OPTIMAL:
            continue
        cert = extract_sos_certificate(sdp, sol)
        count += 1
        worst = max(worst, cert.residual, polynomial_residual(cert, pop))

    # x1 + 1 = 1/2 (1 + x1)^2 + 1/2 x2^2 + 1/2 (1 - x1^2 - x2^2)
    g = unit_disk.constraints[0]
    identity = (x1 + 1) - (0.5 * (1 + x1) ** 2 + 0.5 * x2 * x2 + 0.5 * g)
    sdp = assemble(unit_disk, 1)
    cert = extract_sos_certificate(sdp, solve(sdp))
    sigma0 = cert.sigma(0) - (0.5 * (1 + x1) ** 2 + 0.5 * x2 * x2)
    disk_ok = (
        identity.is_zero()
        and abs(cert.lower_bound + 1) <= TOL
        and polynomial_residual(cert, unit_disk) <= TOL
        and max(abs(c) for _, c in sigma0.items()) <= 1e-4
        and abs(cert.sigma(1).coeff((0, 0)) - 0.5) <= 1e-4
    )
    ok = worst <= TOL and disk_ok and count > 0
    record("6", ok, f"{count} certificates, max residual {worst:.2e}; disk identity reproduced: {disk_ok} (residual {cert.residual:.1e})")
    assert ok


def test_criterion_7_lifted_feasibility():
    rng = np.random.default_rng(7)
    worst_eig, worst_rank, ok = 0.0, 0.0, True
    for case in CORPUS:
        pop = case.pop
        d0 = _d_min(pop)
        pts = case.sample(rng, 100)
        for d in (d0, d0 + 1):
            rows = basis(pop.nvars, d)
            for x in pts:
                y = lift_point(x, 2 * d)
                mats = moment_matrices(y, pop, d)
                v = rows.evaluate(x)
                worst_rank = max(worst_rank, float(np.max(np.abs(mats[0] - np.outer(v, v)))))
                worst_eig = min(worst_eig, min(float(np.linalg.eigvalsh(M)[0]) for M in mats))
                ok = ok and moment_psd_ok(y, pop, d, 1e-10)
    ok = ok and worst_rank <= 1e-10
    record("7", ok, f"100 points x {len(CORPUS)} problems x 2 orders; min eigenvalue {worst_eig:.1e}; rank-1 error {worst_rank:.1e}")
    assert ok


def test_criterion_8_io(unit_disk, schweighofer):
    rng = np.random.default_rng(8)
    parse_fail = sum(parse_pop(print_pop(p)) != p for p in (random_pop(rng) for _ in range(500)))

    golden = [
        (assemble(unit_disk, 1), DATA / "unit_disk_d1.dat-s"),
        (assemble(add_ball_constraint(schweighofer, 2.0), 1), DATA / "schweighofer_ball_d1.dat-s"),
    ]
    golden_ok = all(format_sdpa(sdp).encode("ascii") == path.read_bytes() for sdp, path in golden)

    trips = 0
    trip_ok = True
    for case in CORPUS:
        for d in (1, 2):
            if 2 * d < case.pop.objective.degree:
                continue
            sdp = assemble(case.pop, d)
            text = format_sdpa(sdp)
            trip_ok = trip_ok and parse_sdpa(text) == sdp and format_sdpa(parse_sdpa(text)) == text
            trips += 1
    ok = parse_fail == 0 and golden_ok and trip_ok
    record("8", ok, f"parser round trips failed {parse_fail}/500; golden files byte-equal: {golden_ok}; SDPA round trips exact: {trip_ok} ({trips})")
    assert ok


def test_criterion_9_budget():
    secs = time.perf_counter() - T0
    ok = secs < 60.0
    record("9", ok, f"acceptance module ran in {secs:.1f}s (budget 60s)")
    assert ok
