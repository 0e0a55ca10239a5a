"""Polynomial optimization problems and the transformations applied to them.

A problem is ``minimize f(x) subject to g_i(x) >= 0``. The helpers here add
the redundant ball constraint ``R^2 - |x|^2 >= 0``, rescale a ball-augmented
problem onto the unit ball, and lift points to moment vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .polynomial import DimensionError, Polynomial, monomials_up_to, substitute_scale, sum_of_squares


def ball_polynomial(nvars: int, R: float) -> Polynomial:
    return Polynomial.constant(nvars, R * R) - sum_of_squares(nvars)


@dataclass(frozen=True)
class Pop:
    """minimize ``objective`` subject to ``g >= 0`` for every g in ``constraints``.

    ``ball_radius`` is set only when the last constraint is a ball
    constraint appended by :func:`add_ball_constraint`.
    """

    nvars: int
    objective: Polynomial
    constraints: tuple[Polynomial, ...] = ()
    ball_radius: float | None = None
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.nvars < 1:
            raise ValueError("a problem needs at least one variable")
        for p in (self.objective, *self.constraints):
            if p.nvars != self.nvars:
                raise DimensionError(f"polynomial over {p.nvars} variables in a {self.nvars}-variable problem")
        for i, g in enumerate(self.constraints):
            if g.is_zero():
                raise ValueError(f"constraint {i + 1} is the zero polynomial")
        if self.ball_radius is not None:
            if not self.ball_radius > 0:
                raise ValueError("ball radius must be positive")
            if not self.constraints or self.constraints[-1] != ball_polynomial(self.nvars, self.ball_radius):
                raise ValueError("ball_radius set but last constraint is not the matching ball")
        if self.names is not None and len(self.names) != self.nvars:
            raise ValueError("one name per variable required")

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.names or tuple(f"x{j + 1}" for j in range(self.nvars))


def add_ball_constraint(pop: Pop, R: float) -> Pop:
    """Append ``R^2 - sum x_i^2 >= 0``; the input problem is left untouched."""
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if pop.ball_radius is not None:
        raise ValueError("problem already carries a ball constraint")
    R = float(R)
    return Pop(pop.nvars, pop.objective, pop.constraints + (ball_polynomial(pop.nvars, R),), R, pop.names)


def _normalize(g: Polynomial) -> Polynomial:
    return g * (1.0 / max(abs(c) for _, c in g.items()))


def scale_to_unit_ball(pop: Pop, normalize: bool = False) -> tuple[Pop, Callable[[np.ndarray], np.ndarray]]:
    """Substitute ``x = R x'`` so the ball constraint becomes ``1 - |x'|^2 >= 0``.

    Returns the scaled problem and a map taking points of the scaled problem
    back to the original coordinates. With ``normalize`` each non-ball
    constraint is divided by its largest absolute coefficient.
    """
    R = pop.ball_radius
    if R is None:
        raise ValueError("scaling requires a ball constraint; call add_ball_constraint first")
    gs = [substitute_scale(g, R) for g in pop.constraints[:-1]]
    if normalize:
        gs = [_normalize(g) for g in gs]
    gs.append(ball_polynomial(pop.nvars, 1.0))
    scaled = Pop(pop.nvars, substitute_scale(pop.objective, R), tuple(gs), 1.0, pop.names)

    def back_map(xs):
        return R * np.asarray(xs, dtype=float)

    return scaled, back_map


def lift_point(x: Sequence[float], k: int) -> np.ndarray:
    """Moment vector ``(x^alpha)`` for all ``|alpha| <= k`` in graded-lex order."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise DimensionError("point must be a nonempty vector")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return np.array([np.prod(x ** np.array(a)) for a in monomials_up_to(x.size, k)])


def check_feasible(pop: Pop, x: Sequence[float], tol: float = 0.0) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (pop.nvars,):
        raise DimensionError(f"point has shape {x.shape}, expected ({pop.nvars},)")
    return all(g(x) >= -tol for g in pop.constraints)
