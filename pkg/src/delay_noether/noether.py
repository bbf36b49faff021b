"""Symmetries, invariance checking and Noether-type conservation laws.

A symmetry candidate is a one-parameter family generator: a scalar time
shift eta(t, q), a state shift xi(t, q) per coordinate, and an optional
gauge term Phi over the full delayed vocabulary.  Along a trajectory the
package can evaluate the pointwise invariance residual (zero everywhere,
for every admissible trajectory, iff the family leaves the functional
invariant up to the gauge term) and the conserved charge that invariance
buys on extremals, region by region.  The junction gap |C(junction-) -
C(junction+)| is reported for diagnosis but deliberately excluded from the
verdict: the charge is only guaranteed constant per region.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .conditions import (
    FirstIntegralReport,
    ResidualReport,
    SampleGrid,
    _ABS_MARGIN,
    _EPS_EXCLUSION,
    _FD_MIN_STEP,
    _FD_REL_STEP,
    DEFAULT_FIRST_INTEGRAL_TOL,
    _analyze_samples,
    block_term,
    effective_segment,
    psi,
    region_of,
    sample_times,
    total_derivative,
)
from .functional import Problem
from .trajectory import PiecewiseTrajectory


class SymmetryError(ValueError):
    """Invalid symmetry candidate."""


@dataclass(frozen=True)
class SymmetryCandidate:
    """Generators of a candidate symmetry family.

    ``eta`` and every component of ``xi`` may use only t and current
    positions q{i}; ``gauge`` may use the full vocabulary of the problem
    it will be checked against.
    """

    eta: ex.Expression
    xi: tuple[ex.Expression, ...]
    gauge: ex.Expression
    dim: int
    order: int

    def __post_init__(self):
        if len(self.xi) != self.dim:
            raise SymmetryError(f"xi needs {self.dim} component(s)")
        point = ex.point_vocabulary(self.dim)
        ex.check_vocabulary(self.eta, point, "eta")
        for i, component in enumerate(self.xi):
            ex.check_vocabulary(component, point, f"xi component {i}")
        ex.check_vocabulary(
            self.gauge, ex.lagrangian_vocabulary(self.dim, self.order), "gauge"
        )

    @classmethod
    def from_sources(
        cls,
        dim: int,
        order: int,
        eta: str,
        xi: Sequence[str],
        gauge: str = "0",
    ) -> "SymmetryCandidate":
        return cls(
            ex.canonicalize(ex.parse(eta)),
            tuple(ex.canonicalize(ex.parse(src)) for src in xi),
            ex.canonicalize(ex.parse(gauge)),
            dim,
            order,
        )

    def check_against(self, problem: Problem) -> None:
        if self.dim != problem.dim or self.order != problem.order:
            raise SymmetryError(
                f"symmetry built for dim {self.dim} order {self.order}, "
                f"problem has dim {problem.dim} order {problem.order}"
            )


def _point_bindings(
    traj: PiecewiseTrajectory, t: float, side: str
) -> dict[str, float]:
    q = traj.eval_derivative(t, 0, side)
    bindings = {"t": float(t)}
    for i in range(traj.dim):
        bindings[ex.coordinate_name(i)] = float(q[i])
    return bindings


def eta_value(
    sym: SymmetryCandidate, traj: PiecewiseTrajectory, t: float, side: str = "right"
) -> float:
    return ex.evaluate(sym.eta, _point_bindings(traj, t, side))


def xi_value(
    sym: SymmetryCandidate, traj: PiecewiseTrajectory, t: float, side: str = "right"
) -> np.ndarray:
    bindings = _point_bindings(traj, t, side)
    return np.array([ex.evaluate(component, bindings) for component in sym.xi])


def _adaptive_step(interval: tuple[float, float], t: float) -> float:
    """FD step for quantities smooth on a whole trajectory segment: the
    usual max(1e-5, 1e-3 * length), shrunk when t sits close to a segment
    end so the stencil still fits."""
    a, b = interval
    room = min(t - a, b - t)
    h = max(_FD_MIN_STEP, min(_FD_REL_STEP * (b - a), 0.4 * room))
    return h


def _eta_dot(
    sym: SymmetryCandidate, traj: PiecewiseTrajectory, t: float, side: str
) -> float:
    if not ex.variables(sym.eta):
        return 0.0
    interval = traj.segment_interval(t, side)
    value = total_derivative(
        lambda s: ex.evaluate(sym.eta, _point_bindings(traj, s, side)),
        t,
        1,
        interval,
        step=_adaptive_step(interval, t),
    )
    return float(value)


def rho(
    sym: SymmetryCandidate,
    traj: PiecewiseTrajectory,
    i: int,
    t: float,
    side: str = "right",
) -> np.ndarray:
    """Transformed-derivative generators: rho^0 = xi(t, q),
    rho^i = d/dt rho^(i-1) - q^(i)(t) * d/dt eta."""
    if not 0 <= i <= traj.order:
        raise SymmetryError(f"rho index {i} not in 0..{traj.order}")
    if i == 0:
        return xi_value(sym, traj, t, side)
    interval = traj.segment_interval(t, side)
    previous = total_derivative(
        lambda s: rho(sym, traj, i - 1, s, side),
        t,
        1,
        interval,
        step=_adaptive_step(interval, t),
    )
    return previous - traj.eval_derivative(t, i, side) * _eta_dot(sym, traj, t, side)


def _gauge_dot(
    problem: Problem,
    traj: PiecewiseTrajectory,
    sym: SymmetryCandidate,
    t: float,
    side: str,
) -> float:
    if not ex.variables(sym.gauge):
        return 0.0
    interval = effective_segment(problem, traj, t, side)
    value = total_derivative(
        lambda s: ex.evaluate(sym.gauge, problem.args(traj, s, side).bindings()),
        t,
        1,
        interval,
        step=_adaptive_step(interval, t),
    )
    return float(value)


def invariance_residual(
    problem: Problem,
    traj: PiecewiseTrajectory,
    sym: SymmetryCandidate,
    t: float,
    side: str = "right",
) -> float:
    """Pointwise invariance defect at t (region-aware).

    Zero at every t along every admissible trajectory iff the candidate is
    an invariance family of the functional up to the gauge term.
    """
    sym.check_against(problem)
    region = region_of(problem, t, side)
    args = problem.args(traj, t, side)
    lagrangian = problem.lagrangian_value(args)
    eta = eta_value(sym, traj, t, side)
    eta_dot = _eta_dot(sym, traj, t, side)
    total = -_gauge_dot(problem, traj, sym, t, side)
    total += problem.partial(1, args) * eta
    total += lagrangian * eta_dot
    for i in range(problem.order + 1):
        coeff = block_term(problem, traj, i, t, region, side)
        total += float(coeff @ rho(sym, traj, i, t, side))
    return float(total)


def noether_charge(
    problem: Problem,
    traj: PiecewiseTrajectory,
    sym: SymmetryCandidate,
    t: float,
    side: str = "right",
) -> float:
    """Candidate conserved quantity
    sum_j psi^j . rho^(j-1) + (L - sum_j psi^j . q^(j)) eta - Phi."""
    sym.check_against(problem)
    region = region_of(problem, t, side)
    args = problem.args(traj, t, side)
    momenta = [psi(problem, traj, j, t, region, side) for j in range(1, problem.order + 1)]
    total = 0.0
    kinetic = problem.lagrangian_value(args)
    for j, momentum in enumerate(momenta, start=1):
        total += float(momentum @ rho(sym, traj, j - 1, t, side))
        kinetic -= float(momentum @ args.current[j])
    total += kinetic * eta_value(sym, traj, t, side)
    total -= ex.evaluate(sym.gauge, args.bindings())
    return total


@dataclass(frozen=True)
class ConservationReport:
    """Per-region constancy of the Noether charge plus the junction gap."""

    charge: FirstIntegralReport
    junction_gap: float

    @property
    def verdict(self) -> bool:
        return self.charge.verdict


def check_invariance(
    problem: Problem,
    traj: PiecewiseTrajectory,
    sym: SymmetryCandidate,
    grid: SampleGrid | None = None,
    tol: float | None = None,
) -> ResidualReport:
    tol = DEFAULT_FIRST_INTEGRAL_TOL if tol is None else tol
    samples = sample_times(problem, traj, None, grid)
    values = np.array(
        [invariance_residual(problem, traj, sym, t) for t, _ in samples]
    )
    max_abs = float(np.max(np.abs(values))) if values.size else 0.0
    return ResidualReport(
        "invariance",
        np.array([t for t, _ in samples]),
        values,
        tol,
        max_abs,
        max_abs <= tol,
    )


def _junction_probe(
    problem: Problem, traj: PiecewiseTrajectory, side: str
) -> float:
    """A time just inside the effective segment touching the junction."""
    junction = problem.junction
    a, b = effective_segment(problem, traj, junction, side)
    length = b - a
    eps = _EPS_EXCLUSION * (problem.t2 - problem.t1)
    offset = max(0.05 * length, eps, _ABS_MARGIN)
    if 2 * offset >= length:
        offset = 0.5 * length
    return junction - offset if side == "left" else junction + offset


def check_conservation(
    problem: Problem,
    traj: PiecewiseTrajectory,
    sym: SymmetryCandidate,
    grid: SampleGrid | None = None,
    tol: float | None = None,
) -> ConservationReport:
    """Sample the Noether charge and decide per-region constancy."""
    sym.check_against(problem)
    tol = DEFAULT_FIRST_INTEGRAL_TOL if tol is None else tol
    samples = sample_times(problem, traj, None, grid)
    values = np.array(
        [noether_charge(problem, traj, sym, t) for t, _ in samples]
    )
    report = _analyze_samples(
        "noether", "regional", samples, values, [1, 2], 0, tol, problem.junction
    )
    left = noether_charge(
        problem, traj, sym, _junction_probe(problem, traj, "left"), "left"
    )
    right = noether_charge(
        problem, traj, sym, _junction_probe(problem, traj, "right"), "right"
    )
    return ConservationReport(report, abs(left - right))
