import numpy as np
import pytest

from corpus import CORPUS
from popsdp.pop import Pop, add_ball_constraint, lift_point
from popsdp.relaxation import BlockSdp, assemble
from popsdp.sdp import SdpSolution, SolverOptions, Status, check_gram_ray, check_moment_ray, min_eig, residuals, solve


def _disk_certificate():
    # x1 + 1 = 1/2 (1 + x1)^2 + 1/2 x2^2 + 1/2 (1 - x1^2 - x2^2)
    v = np.array([1.0, 1.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    return [0.5 * np.outer(v, v) + 0.5 * np.outer(e3, e3), np.array([[0.5]])]


def test_scalar_sdp():
    # minimize y1 subject to y1 - y0 >= 0, y0 = 1
    sdp = BlockSdp([1], [0.0, 1.0], [[0, 0, 0, 0], [1, 0, 0, 0]], [-1.0, 1.0])
    sol = solve(sdp)
    assert sol.status == Status.OPTIMAL
    assert abs(sol.moment_value - 1.0) <= 1e-6
    assert abs(sol.sos_value - 1.0) <= 1e-6
    assert abs(sol.Z[0][0, 0] - 1.0) <= 1e-6


def test_unit_disk(unit_disk):
    sol = solve(assemble(unit_disk, 1))
    assert sol.status == Status.OPTIMAL
    assert abs(sol.moment_value + 1.0) <= 1e-6
    assert abs(sol.sos_value + 1.0) <= 1e-6
    assert np.allclose(sol.y, lift_point([-1.0, 0.0], 2), atol=1e-5)


def test_schweighofer_infeasible_sos_side(schweighofer):
    sdp = assemble(schweighofer, 1)
    opts = SolverOptions()
    sol = solve(sdp, opts)
    assert sol.status == Status.SOS_INFEASIBLE
    assert sol.sos_value == -np.inf
    assert abs(sol.moment_value) <= 1e-6
    # ray checked without the solver: ray_0 = 0, blocks PSD, negative objective
    r = sol.ray
    assert r[0] == 0.0
    assert all(min_eig(M) >= -opts.feas_tol for M in sdp.moment_matrices(r))
    assert float(np.dot(sdp.rhs, r)) < 0
    assert check_moment_ray(sdp, r, opts.feas_tol)


def test_empty_moment_side(xs):
    # x1 >= 1 and -x1 >= 0 cannot hold together
    x1, _ = xs
    sdp = assemble(Pop(2, x1, (x1 - 1, -x1)), 1)
    sol = solve(sdp)
    assert sol.status == Status.MOMENT_UNBOUNDED
    assert sol.moment_value == np.inf
    assert check_gram_ray(sdp, sol.sos_ray, 1e-8)


def test_determinism(schweighofer, unit_disk):
    for pop in (schweighofer, add_ball_constraint(schweighofer, 2.0), unit_disk):
        sdp = assemble(pop, 1)
        a, b = solve(sdp), solve(sdp)
        assert a.status == b.status
        assert a.iterations == b.iterations
        assert np.array_equal(a.moment_value, b.moment_value) and np.array_equal(a.sos_value, b.sos_value)
        if a.y is not None:
            assert np.array_equal(a.y, b.y)


def test_ball_never_moment_unbounded():
    for case in CORPUS:
        pop = case.pop
        if pop.ball_radius is None:
            pop = add_ball_constraint(pop, 2.0)
        for d in (1, 2):
            if d * 2 < pop.objective.degree:
                continue
            sol = solve(assemble(pop, d))
            assert sol.status != Status.MOMENT_UNBOUNDED, case.name


def test_optimal_invariants():
    opts = SolverOptions()
    for case in CORPUS:
        pop = case.pop
        d = max(1, (pop.objective.degree + 1) // 2)
        sdp = assemble(pop, d)
        sol = solve(sdp, opts)
        if sol.status != Status.OPTIMAL:
            continue
        assert all(min_eig(Z) >= -opts.feas_tol for Z in sol.Z), case.name
        assert all(min_eig(M) >= -opts.feas_tol for M in sdp.moment_matrices(sol.y)), case.name
        assert abs(sol.y[0] - 1.0) <= opts.feas_tol
        assert sol.gap <= opts.gap_tol * (1 + abs(sol.moment_value)), case.name
        assert sol.sos_value <= sol.moment_value + opts.gap_tol * (1 + abs(sol.moment_value))


def test_residuals_hand_built_certificate(unit_disk):
    sdp = assemble(unit_disk, 1)
    y = lift_point([-1.0, 0.0], 2)
    Z = _disk_certificate()
    sol = SdpSolution(Status.OPTIMAL, y=y, Z=Z, moment_value=sdp.moment_value(y), sos_value=sdp.sos_value(Z))
    mres, sres, gap = residuals(sdp, sol)
    assert mres <= 1e-10 and sres <= 1e-10 and gap <= 1e-10


def test_residuals_lift_only(unit_disk):
    sdp = assemble(unit_disk, 1)
    y = lift_point([0.6, -0.8], 2)
    mres, sres, _ = residuals(sdp, SdpSolution(Status.UNKNOWN, y=y))
    assert mres <= 1e-12
    assert np.isnan(sres)


def test_residuals_reflect_perturbation(unit_disk):
    sdp = assemble(unit_disk, 1)
    y = lift_point([-1.0, 0.0], 2)
    y[3] -= 1e-3  # y_20 now below y_10^2
    mres, _, _ = residuals(sdp, SdpSolution(Status.UNKNOWN, y=y))
    assert 1e-4 <= mres <= 1e-2


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(feas_tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(step_fraction=1.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)


def test_iteration_cap_gives_unknown(unit_disk):
    sol = solve(assemble(unit_disk, 1), SolverOptions(max_iterations=2))
    assert sol.status == Status.UNKNOWN
