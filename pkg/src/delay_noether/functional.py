"""Delayed variational problems and their action functional.

A problem of order m and dimension n on [t1, t2] with delay tau consists of
a Lagrangian L(t, q(t), ..., q^(m)(t), q(t-tau), ..., q^(m)(t-tau)), a
prehistory curve pinning q on [t1 - tau, t1], and terminal data pinning
q(t2) and q^(i)(t2) for i = 1..m-1.  The action is the integral of L along
a trajectory over [t1, t2], computed by composite Gauss-Legendre quadrature
split at the trajectory's effective breakpoints so every panel integrates a
smooth function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .trajectory import (
    DelayedArgs,
    PiecewiseTrajectory,
    delayed_args,
    effective_breakpoints,
    subsegments,
)


class FunctionalError(ValueError):
    """Invalid problem data or incompatible trajectory."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule: ``gauss_points`` nodes per panel."""

    gauss_points: int = 8

    def __post_init__(self):
        if not 1 <= self.gauss_points <= 128:
            raise FunctionalError("gauss_points must be in 1..128")


@lru_cache(maxsize=None)
def _leggauss(points: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(points)


@dataclass(frozen=True)
class ActionResult:
    value: float
    warnings: tuple[str, ...] = ()


class Problem:
    """Delayed variational problem with cached symbolic Lagrangian partials.

    ``lagrangian`` and ``prehistory`` are expression trees over the
    canonical vocabulary (t, q{i}_d{k}, q{i}_d{k}_tau); use ``from_sources``
    to build one from strings with alias rewriting and vocabulary checks.
    """

    def __init__(
        self,
        order: int,
        dim: int,
        t1: float,
        t2: float,
        tau: float,
        lagrangian: ex.Expression,
        prehistory: Sequence[ex.Expression],
        terminal_position: Sequence[float],
        terminal_derivatives: Sequence[Sequence[float]] = (),
    ):
        if order < 1:
            raise FunctionalError("order must be >= 1")
        if dim < 1:
            raise FunctionalError("dim must be >= 1")
        if not (math.isfinite(t1) and math.isfinite(t2) and t1 < t2):
            raise FunctionalError("need finite t1 < t2")
        if not (0.0 < tau < t2 - t1):
            raise FunctionalError("need 0 < tau < t2 - t1")
        if len(prehistory) != dim:
            raise FunctionalError(f"prehistory needs {dim} component(s)")

        vocab = ex.lagrangian_vocabulary(dim, order)
        ex.check_vocabulary(lagrangian, vocab, "lagrangian")
        for i, component in enumerate(prehistory):
            ex.check_vocabulary(
                component, frozenset({"t"}), f"prehistory component {i}"
            )

        position = np.asarray(terminal_position, dtype=float)
        if position.shape != (dim,):
            raise FunctionalError(f"terminal position must have {dim} entries")
        derivs = np.asarray(terminal_derivatives, dtype=float)
        if derivs.size == 0:
            derivs = np.zeros((0, dim))
        if derivs.shape != (order - 1, dim):
            raise FunctionalError(
                f"terminal derivatives must be {order - 1} vectors of length {dim}"
            )

        self.order = int(order)
        self.dim = int(dim)
        self.t1 = float(t1)
        self.t2 = float(t2)
        self.tau = float(tau)
        self.lagrangian = lagrangian
        self.prehistory = tuple(prehistory)
        self.terminal_position = position
        self.terminal_derivatives = derivs

        self._partial_t = ex.diff(lagrangian, "t")
        self._partial_u = [
            [ex.diff(lagrangian, ex.coordinate_name(i, k)) for i in range(dim)]
            for k in range(order + 1)
        ]
        self._partial_v = [
            [
                ex.diff(lagrangian, ex.coordinate_name(i, k, delayed=True))
                for i in range(dim)
            ]
            for k in range(order + 1)
        ]

    @classmethod
    def from_sources(
        cls,
        order: int,
        dim: int,
        t1: float,
        t2: float,
        tau: float,
        lagrangian: str,
        prehistory: Sequence[str],
        terminal_position: Sequence[float],
        terminal_derivatives: Sequence[Sequence[float]] = (),
    ) -> "Problem":
        lag = ex.canonicalize(ex.parse(lagrangian))
        pre = [ex.canonicalize(ex.parse(src)) for src in prehistory]
        return cls(
            order, dim, t1, t2, tau, lag, pre, terminal_position, terminal_derivatives
        )

    @property
    def junction(self) -> float:
        """t2 - tau, the boundary between region 1 and region 2."""
        return self.t2 - self.tau

    def prehistory_value(self, t: float) -> np.ndarray:
        return np.array(
            [ex.evaluate(component, {"t": t}) for component in self.prehistory]
        )

    def check_trajectory(self, traj: PiecewiseTrajectory) -> None:
        if traj.dim != self.dim:
            raise FunctionalError(f"trajectory dim {traj.dim} != problem dim {self.dim}")
        if traj.order != self.order:
            raise FunctionalError(
                f"trajectory order {traj.order} != problem order {self.order}"
            )
        lo, hi = traj.domain
        span = self.t2 - (self.t1 - self.tau)
        tol = 1e-9 * max(1.0, span)
        if abs(lo - (self.t1 - self.tau)) > tol or abs(hi - self.t2) > tol:
            raise FunctionalError(
                f"trajectory domain [{lo!r}, {hi!r}] does not match "
                f"[{self.t1 - self.tau!r}, {self.t2!r}]"
            )

    def args(
        self, traj: PiecewiseTrajectory, t: float, side: str = "right"
    ) -> DelayedArgs:
        return delayed_args(traj, t, self.tau, self.order, side)

    def partial(self, block: int, args: DelayedArgs):
        """Evaluate a first-order partial of L at ``args``.

        Block 1 is the t-partial (a float).  Blocks 2..m+2 are the partials
        with respect to q^(k)(t) for k = block - 2, blocks m+3..2m+3 with
        respect to q^(k)(t - tau) for k = block - m - 3 (vectors over
        coordinates).
        """
        m = self.order
        bindings = args.bindings()
        if block == 1:
            return ex.evaluate(self._partial_t, bindings)
        if 2 <= block <= m + 2:
            exprs = self._partial_u[block - 2]
        elif m + 3 <= block <= 2 * m + 3:
            exprs = self._partial_v[block - m - 3]
        else:
            raise FunctionalError(
                f"block must be in 1..{2 * m + 3} for order {m}, got {block}"
            )
        return np.array([ex.evaluate(node, bindings) for node in exprs])

    def lagrangian_value(self, args: DelayedArgs) -> float:
        return ex.evaluate(self.lagrangian, args.bindings())


def partial(problem: Problem, block: int, args: DelayedArgs):
    return problem.partial(block, args)


def integrate(
    problem: Problem,
    traj: PiecewiseTrajectory,
    integrand: Callable[[DelayedArgs], float],
    window: tuple[float, float] | None = None,
    quad: QuadratureSpec | None = None,
) -> float:
    """Integrate ``integrand(args(t))`` over ``window`` (default [t1, t2])
    with composite Gauss-Legendre panels split at effective breakpoints."""
    problem.check_trajectory(traj)
    quad = quad or QuadratureSpec()
    lo, hi = window if window is not None else (problem.t1, problem.t2)
    span = traj.domain[1] - traj.domain[0]
    snap = 1e-12 * span
    if lo < problem.t1 - snap or hi > problem.t2 + snap:
        raise FunctionalError(f"window [{lo!r}, {hi!r}] outside [t1, t2]")
    if hi <= lo:
        return 0.0
    cuts = effective_breakpoints(traj, problem.tau, (lo, hi))
    panels = subsegments(cuts, lo, hi, snap)
    nodes, weights = _leggauss(quad.gauss_points)
    contributions = []
    for a, b in panels:
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        for x, w in zip(nodes, weights):
            t = mid + half * x
            contributions.append(w * half * integrand(problem.args(traj, t)))
    return math.fsum(contributions)


def action(
    problem: Problem,
    traj: PiecewiseTrajectory,
    quad: QuadratureSpec | None = None,
    window: tuple[float, float] | None = None,
) -> ActionResult:
    """Action integral of the Lagrangian along ``traj``.

    Prehistory or terminal mismatches do not fail the computation; they are
    reported as warnings so exploratory trajectories remain usable.
    """
    problem.check_trajectory(traj)
    warnings = []

    # Prehistory match on [t1 - tau, t1], sampled per overlapping segment.
    pre_tol = traj.continuity_tol
    worst = 0.0
    for a, b in subsegments(
        traj.breakpoints, problem.t1 - problem.tau, problem.t1, traj._snap
    ):
        for t in np.linspace(a, b, 9):
            side = "right" if t < b else "left"
            dev = np.max(
                np.abs(traj.eval_derivative(t, 0, side) - problem.prehistory_value(t))
            )
            worst = max(worst, float(dev))
    if worst > pre_tol:
        warnings.append(
            f"trajectory deviates from prehistory by {worst:.3e} on "
            f"[t1 - tau, t1] (tol {pre_tol:.3e})"
        )

    tol_bc = 1e-8
    gap = float(
        np.max(
            np.abs(traj.eval_derivative(problem.t2, 0, "left") - problem.terminal_position)
        )
    )
    if gap > tol_bc:
        warnings.append(f"terminal position misses target by {gap:.3e}")
    for i in range(1, problem.order):
        gap = float(
            np.max(
                np.abs(
                    traj.eval_derivative(problem.t2, i, "left")
                    - problem.terminal_derivatives[i - 1]
                )
            )
        )
        if gap > tol_bc:
            warnings.append(f"terminal derivative {i} misses target by {gap:.3e}")

    value = integrate(problem, traj, problem.lagrangian_value, window, quad)
    return ActionResult(value, tuple(warnings))
