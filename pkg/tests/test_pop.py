import numpy as np
import pytest

from corpus import BY_NAME, CORPUS
from popsdp.cli import parse_pop
from popsdp.polynomial import DimensionError, Polynomial
from popsdp.pop import Pop, add_ball_constraint, check_feasible, lift_point, scale_to_unit_ball
from popsdp.relaxation import assemble, basis, moment_matrices
from popsdp.sdp import Status, solve


def test_add_ball_examples(schweighofer, xs):
    x1, x2 = xs
    aug = add_ball_constraint(schweighofer, 2.0)
    assert aug.constraints[-1] == 4 - x1 * x1 - x2 * x2
    assert aug.ball_radius == 2.0
    assert len(schweighofer.constraints) == 3 and schweighofer.ball_radius is None

    x = Polynomial.variable(1, 0)
    one = add_ball_constraint(Pop(1, x), 1.0)
    assert one.constraints == (1 - x * x,)


def test_add_ball_errors(schweighofer):
    with pytest.raises(ValueError):
        add_ball_constraint(schweighofer, -1.0)
    with pytest.raises(ValueError):
        add_ball_constraint(schweighofer, 0.0)
    with pytest.raises(ValueError):
        add_ball_constraint(add_ball_constraint(schweighofer, 2.0), 3.0)


def test_pop_invariants(xs):
    x1, x2 = xs
    with pytest.raises(ValueError):
        Pop(2, x1, (Polynomial.zero(2),))
    with pytest.raises(DimensionError):
        Pop(2, x1, (Polynomial.variable(3, 0),))
    with pytest.raises(ValueError):
        Pop(2, x1, (1 - x1 * x1,), ball_radius=1.0)


def test_scale_examples(xs):
    x1, x2 = xs
    pop = add_ball_constraint(Pop(2, x1, (x1 + 1,)), 2.0)
    scaled, back = scale_to_unit_ball(pop)
    assert scaled.objective == 2 * x1
    assert scaled.constraints == (2 * x1 + 1, 1 - x1 * x1 - x2 * x2)
    assert scaled.ball_radius == 1.0
    assert np.array_equal(back(np.array([0.5, -0.25])), np.array([1.0, -0.5]))
    with pytest.raises(ValueError):
        scale_to_unit_ball(Pop(2, x1))


def test_scale_normalize(xs):
    x1, _ = xs
    pop = add_ball_constraint(Pop(2, x1, (3 - x1 * x1,)), 2.0)
    scaled, _ = scale_to_unit_ball(pop, normalize=True)
    assert scaled.constraints[0] == 0.75 - x1 * x1
    assert scaled.constraints[-1] == 1 - x1 * x1 - Polynomial.variable(2, 1) ** 2


def test_lift_examples():
    assert np.array_equal(lift_point([2.0, 3.0], 2), [1, 2, 3, 4, 6, 9])
    assert np.array_equal(lift_point([0.0, 0.0, 0.0], 2), np.eye(10)[0])
    with pytest.raises(DimensionError):
        lift_point(np.zeros((2, 2)), 2)


def test_check_feasible_examples(schweighofer, unit_disk):
    assert check_feasible(schweighofer, [0.5, 0.0], 0.0)
    assert not check_feasible(schweighofer, [0.0, 0.1], 0.0)
    assert check_feasible(unit_disk, [1.0, 0.0], 0.0)
    with pytest.raises(DimensionError):
        check_feasible(unit_disk, [1.0, 0.0, 0.0])


def test_ball_preserves_feasibility_inside_ball():
    rng = np.random.default_rng(0)
    for case in CORPUS:
        pop = case.pop
        if pop.ball_radius is not None:
            continue
        aug = add_ball_constraint(pop, 2.0)
        for _ in range(200):
            x = rng.normal(size=pop.nvars)
            x *= 2.0 * rng.uniform() ** (1 / pop.nvars) / np.linalg.norm(x)
            assert check_feasible(aug, x) == check_feasible(pop, x)


def test_lift_is_rank_one():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        for d in (1, 2, 3):
            x = rng.uniform(-1.5, 1.5, size=n)
            pop = Pop(n, Polynomial.variable(n, 0))
            M = moment_matrices(lift_point(x, 2 * d), pop, d)[0]
            v = basis(n, d).evaluate(x)
            assert np.max(np.abs(M - np.outer(v, v))) <= 1e-12 * max(1.0, np.max(np.abs(M)))


def test_scale_back_map_feasible():
    rng = np.random.default_rng(2)
    for case in CORPUS:
        pop = case.pop
        if pop.ball_radius is None:
            continue
        scaled, back = scale_to_unit_ball(pop)
        for x in case.sample(rng, 50):
            xs = x / pop.ball_radius
            assert check_feasible(scaled, xs, 1e-10)
            assert check_feasible(pop, back(xs), 1e-10)


@pytest.mark.parametrize("name", ["schweighofer_ball", "box4_chain", "concave_box", "ball3_saddle"])
def test_scaled_optimum_matches(name):
    pop = BY_NAME[name].pop
    scaled, _ = scale_to_unit_ball(pop)
    d = 2
    a = solve(assemble(pop, d))
    b = solve(assemble(scaled, d))
    assert a.status == b.status == Status.OPTIMAL
    assert abs(a.moment_value - b.moment_value) <= 1e-6 * (1 + abs(a.moment_value))


def test_names_do_not_affect_equality():
    a = parse_pop("vars a b\nminimize a*b\nst 1 - a^2 >= 0\n")
    b = parse_pop("vars x1 x2\nminimize x1*x2\nst 1 - x1^2 >= 0\n")
    assert a == b and a.variable_names == ("a", "b")
