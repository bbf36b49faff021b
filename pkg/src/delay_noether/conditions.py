"""Necessary-condition checks for delayed variational problems.

The delay splits [t1, t2] at the junction t2 - tau into region 1 (where
conditions carry advanced terms evaluated at t + tau) and region 2 (where
they do not).  This module evaluates, along a candidate trajectory:

* psi^j quantities and the pointwise Euler-Lagrange residual (psi^0),
* the Euler-Lagrange condition in integral form, where a nested-integral
  quantity must match a polynomial of degree m - 1 (per region, or globally
  across the junction),
* the DuBois-Reymond first integral, constant per region,

plus the finite-difference total-derivative machinery shared with the
invariance/Noether checks.  All derivatives of sampled quantities use
central stencils confined to one effective segment, so they never straddle
a kink; sample grids keep a margin away from effective breakpoints for the
same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .functional import Problem, QuadratureSpec, _leggauss, integrate
from .trajectory import PiecewiseTrajectory, effective_breakpoints, subsegments


class StencilError(RuntimeError):
    """A finite-difference stencil would cross a breakpoint or the domain."""


_FD_MIN_STEP = 1e-5
_FD_REL_STEP = 1e-3
_EPS_EXCLUSION = 1e-7  # fraction of t2 - t1 kept clear of breakpoints
_ABS_MARGIN = 5e-5  # floor for grid margins, covers nested stencil reach

# 5-point central stencils on offsets (-2h, -h, 0, h, 2h); Richardson
# exponent p is the order of the leading error term.
_STENCILS: dict[int, tuple[dict[int, float], float, int]] = {
    1: ({-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}, 12.0, 4),
    2: ({-2: -1.0, -1: 16.0, 0: -30.0, 1: 16.0, 2: -1.0}, 12.0, 4),
    3: ({-2: -1.0, -1: 2.0, 1: -2.0, 2: 1.0}, 2.0, 2),
    4: ({-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0}, 1.0, 2),
}


def _stencil_apply(
    f: Callable[[float], np.ndarray], t: float, h: float, order: int
) -> np.ndarray:
    weights, denom, _ = _STENCILS[order]
    total = None
    for offset, weight in weights.items():
        value = weight * np.asarray(f(t + offset * h), dtype=float)
        total = value if total is None else total + value
    return total / (denom * h**order)


def total_derivative(
    f: Callable[[float], "np.ndarray | float"],
    t: float,
    order: int,
    interval: tuple[float, float],
    step: float | None = None,
) -> np.ndarray:
    """order-th derivative of f at t by central differences with one
    Richardson extrapolation step.

    ``interval`` is the segment on which f is smooth; the stencil (reach
    2h on each side) must fit inside it, otherwise ``StencilError``.
    Supported orders are 1..4.
    """
    if order == 0:
        return np.asarray(f(t), dtype=float)
    if order not in _STENCILS:
        raise StencilError(f"total derivatives of order {order} are not supported")
    a, b = interval
    if step is not None:
        h = step
    else:
        h = max(_FD_MIN_STEP, _FD_REL_STEP * (b - a))
    if t - 2 * h < a or t + 2 * h > b:
        raise StencilError(
            f"stencil [{t - 2 * h!r}, {t + 2 * h!r}] leaves segment [{a!r}, {b!r}]"
        )
    p = _STENCILS[order][2]
    coarse = _stencil_apply(f, t, h, order)
    fine = _stencil_apply(f, t, h / 2.0, order)
    return (2**p * fine - coarse) / (2**p - 1.0)


def region_of(problem: Problem, t: float, side: str = "right") -> int:
    """1 on [t1, t2 - tau), 2 on (t2 - tau, t2]; the side picks the limit
    taken exactly at the junction."""
    snap = 1e-12 * (problem.t2 - problem.t1)
    if t < problem.junction - snap:
        return 1
    if t > problem.junction + snap:
        return 2
    return 1 if side == "left" else 2


def effective_segment(
    problem: Problem,
    traj: PiecewiseTrajectory,
    t: float,
    side: str = "right",
) -> tuple[float, float]:
    """Effective segment of [t1, t2] containing t (one-sided at cuts)."""
    cuts = effective_breakpoints(traj, problem.tau, (problem.t1, problem.t2))
    snap = 1e-12 * (traj.domain[1] - traj.domain[0])
    if t < cuts[0] - snap or t > cuts[-1] + snap:
        raise StencilError(f"t={t!r} outside [t1, t2]")
    nearest = int(np.argmin(np.abs(cuts - t)))
    if abs(cuts[nearest] - t) <= snap:
        if side == "right":
            index = nearest if nearest < cuts.size - 1 else nearest - 1
        else:
            index = nearest - 1 if nearest > 0 else 0
    else:
        index = int(np.searchsorted(cuts, t)) - 1
    index = min(max(index, 0), cuts.size - 2)
    return float(cuts[index]), float(cuts[index + 1])


def block_term(
    problem: Problem,
    traj: PiecewiseTrajectory,
    k: int,
    t: float,
    region: int,
    side: str = "right",
) -> np.ndarray:
    """The region-dependent coefficient of the conditions:
    dL/dq^(k)(t) plus, in region 1, the advanced term dL/dq^(k)_tau(t + tau)."""
    m = problem.order
    value = problem.partial(k + 2, problem.args(traj, t, side))
    if region == 1:
        value = value + problem.partial(
            k + m + 3, problem.args(traj, t + problem.tau, side)
        )
    return value


def psi(
    problem: Problem,
    traj: PiecewiseTrajectory,
    j: int,
    t: float,
    region: int | None = None,
    side: str = "right",
) -> np.ndarray:
    """psi^j at time t:  sum_{i=0}^{m-j} (-1)^i (d/dt)^i of the block term
    of index i + j.  j = 0 gives the pointwise Euler-Lagrange residual;
    j = 1..m are the momentum-like quantities entering the DuBois-Reymond
    and Noether expressions.
    """
    m = problem.order
    if not 0 <= j <= m:
        raise ValueError(f"j must be in 0..{m}, got {j}")
    if region is None:
        region = region_of(problem, t, side)
    interval = effective_segment(problem, traj, t, side)
    total = np.zeros(problem.dim)
    for i in range(m - j + 1):
        term = lambda s, k=i + j: block_term(problem, traj, k, s, region, side)
        if i == 0:
            value = term(t)
        else:
            value = total_derivative(term, t, i, interval)
        total = total + (-1.0 if i % 2 else 1.0) * value
    return total


@dataclass(frozen=True)
class PsiEvaluation:
    j: int
    region: int
    t: float
    value: np.ndarray


def evaluate_psi(
    problem: Problem,
    traj: PiecewiseTrajectory,
    j: int,
    t: float,
    side: str = "right",
) -> PsiEvaluation:
    region = region_of(problem, t, side)
    return PsiEvaluation(j, region, t, psi(problem, traj, j, t, region, side))


def el_residual_differential(
    problem: Problem,
    traj: PiecewiseTrajectory,
    t: float,
    side: str = "right",
) -> np.ndarray:
    """Pointwise Euler-Lagrange residual (zero along regional extremals)."""
    region = region_of(problem, t, side)
    return psi(problem, traj, 0, t, region, side)


def psi_identity_residual(
    problem: Problem,
    traj: PiecewiseTrajectory,
    j: int,
    t: float,
    side: str = "right",
) -> np.ndarray:
    """Residual of the recurrence d/dt psi^j = block_term(j-1) - psi^(j-1),
    which holds along any admissible trajectory (not only extremals)."""
    m = problem.order
    if not 1 <= j <= m:
        raise ValueError(f"j must be in 1..{m}, got {j}")
    region = region_of(problem, t, side)
    interval = effective_segment(problem, traj, t, side)
    lhs = total_derivative(
        lambda s: psi(problem, traj, j, s, region, side), t, 1, interval
    )
    rhs = block_term(problem, traj, j - 1, t, region, side) - psi(
        problem, traj, j - 1, t, region, side
    )
    return lhs - rhs


@dataclass(frozen=True)
class SampleGrid:
    """Sampling plan: ``points`` samples spread over the effective segments
    of the window, each kept ``margin`` (fraction of segment length, with
    absolute floors) away from segment ends."""

    points: int = 200
    margin: float = 0.05

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if not 0.0 < self.margin < 0.5:
            raise ValueError("margin must be in (0, 0.5)")


def sample_times(
    problem: Problem,
    traj: PiecewiseTrajectory,
    window: tuple[float, float] | None = None,
    grid: SampleGrid | None = None,
) -> list[tuple[float, tuple[float, float]]]:
    """Sample times paired with their effective segment, margins applied."""
    problem.check_trajectory(traj)
    grid = grid or SampleGrid()
    lo, hi = window if window is not None else (problem.t1, problem.t2)
    snap = 1e-12 * (traj.domain[1] - traj.domain[0])
    cuts = effective_breakpoints(traj, problem.tau, (lo, hi))
    spans = subsegments(cuts, lo, hi, snap)
    total = sum(b - a for a, b in spans)
    eps = _EPS_EXCLUSION * (problem.t2 - problem.t1)

    # Largest-remainder apportionment of the sample budget.
    raw = [grid.points * (b - a) / total for a, b in spans]
    counts = [max(1, int(r)) for r in raw]
    leftovers = sorted(
        range(len(spans)), key=lambda i: raw[i] - int(raw[i]), reverse=True
    )
    shortfall = grid.points - sum(counts)
    for i in range(max(0, shortfall)):
        counts[leftovers[i % len(spans)]] += 1

    samples: list[tuple[float, tuple[float, float]]] = []
    for (a, b), count in zip(spans, counts):
        length = b - a
        margin = max(grid.margin * length, eps, _ABS_MARGIN)
        if 2 * margin >= length:
            samples.append((0.5 * (a + b), (a, b)))
            continue
        for t in np.linspace(a + margin, b - margin, count):
            samples.append((float(t), (a, b)))
    return samples


@dataclass(frozen=True)
class SegmentFit:
    """Diagnostic for one effective segment: the mean of the sampled
    quantity there and the worst deviation of the samples from it."""

    interval: tuple[float, float]
    constant: np.ndarray
    max_dev: float


@dataclass(frozen=True)
class RegionFit:
    """Fit of the sampled quantity on one region (or globally when region
    is None) by a polynomial of the admissible degree."""

    region: int | None
    polynomial: np.ndarray  # ascending coefficients, shape (deg + 1, width)
    max_dev: float
    holds: bool

    @property
    def constant(self) -> np.ndarray | None:
        """The fitted value when the admissible polynomial is a constant."""
        if self.polynomial.shape[0] == 1:
            return self.polynomial[0]
        return None


@dataclass(frozen=True)
class FirstIntegralReport:
    quantity: str  # "el-integral" | "dbr"
    mode: str  # "regional" | "global"
    times: np.ndarray
    values: np.ndarray  # shape (samples, width)
    regions: tuple[RegionFit, ...]
    segments: tuple[SegmentFit, ...]
    scale: float
    tol: float
    max_dev: float
    verdict: bool
    failing_segments: tuple[tuple[float, float], ...]


def _fit_polynomial(
    times: np.ndarray, values: np.ndarray, degree: int
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares polynomial fit; returns (coefficients, residuals)."""
    if times.size <= degree:
        degree = max(0, times.size - 1)
    coeffs = np.polynomial.polynomial.polyfit(times, values, degree)
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    fitted = np.polynomial.polynomial.polyval(times, coeffs).T
    return coeffs, values - fitted


def _analyze_samples(
    quantity: str,
    mode: str,
    samples: list[tuple[float, tuple[float, float]]],
    values: np.ndarray,
    regions: list[int | None],
    degree: int,
    tol: float,
    junction: float,
) -> FirstIntegralReport:
    """Shared fit/verdict assembly for first-integral style checks."""
    times = np.array([t for t, _ in samples])
    if values.ndim == 1:
        values = values[:, None]
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 0.0)

    region_fits = []
    max_dev = 0.0
    deviations = np.zeros(times.size)
    for region in regions:
        if region is None:
            mask = np.ones(times.size, dtype=bool)
        else:
            mask = (
                (times <= junction) if region == 1 else (times >= junction)
            )
        if not np.any(mask):
            continue
        coeffs, resid = _fit_polynomial(times[mask], values[mask], degree)
        dev = float(np.max(np.abs(resid)))
        deviations[mask] = np.max(np.abs(resid), axis=1)
        region_fits.append(RegionFit(region, coeffs, dev, dev <= tol * scale))
        max_dev = max(max_dev, dev)

    segment_fits = []
    failing = []
    seen: list[tuple[float, float]] = []
    for interval in [interval for _, interval in samples]:
        if interval in seen:
            continue
        seen.append(interval)
        mask = np.array([iv == interval for _, iv in samples])
        segment_values = values[mask]
        constant = segment_values.mean(axis=0)
        seg_dev = float(np.max(np.abs(segment_values - constant)))
        segment_fits.append(SegmentFit(interval, constant, seg_dev))
        if float(np.max(deviations[mask])) > tol * scale:
            failing.append(interval)

    verdict = all(fit.holds for fit in region_fits)
    return FirstIntegralReport(
        quantity=quantity,
        mode=mode,
        times=times,
        values=values,
        regions=tuple(region_fits),
        segments=tuple(segment_fits),
        scale=scale,
        tol=tol,
        max_dev=max_dev,
        verdict=verdict,
        failing_segments=tuple(failing),
    )


DEFAULT_FIRST_INTEGRAL_TOL = 1e-7


def _oriented_nested_integral(
    problem: Problem,
    traj: PiecewiseTrajectory,
    k: int,
    phi: Callable[[float], np.ndarray],
    t: float,
    quad: QuadratureSpec,
) -> np.ndarray:
    """k-fold nested integral of phi from the junction to t, collapsed to a
    single weighted integral: 1/(k-1)! * int (t - s)^(k-1) phi(s) ds."""
    base = problem.junction
    lo, hi = (t, base) if t < base else (base, t)
    if hi - lo == 0.0:
        return np.zeros(problem.dim)
    sign = 1.0 if t >= base else (1.0 if k % 2 == 0 else -1.0)
    snap = 1e-12 * (traj.domain[1] - traj.domain[0])
    cuts = effective_breakpoints(traj, problem.tau, (lo, hi))
    nodes, weights = _leggauss(quad.gauss_points)
    scale = 1.0 / math.factorial(k - 1)
    pieces = []
    for a, b in subsegments(cuts, lo, hi, snap):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for x, w in zip(nodes, weights):
            s = mid + half * x
            pieces.append(w * half * scale * abs(t - s) ** (k - 1) * phi(s))
    if not pieces:
        return np.zeros(problem.dim)
    total = np.zeros_like(np.asarray(pieces[0], dtype=float))
    for piece in pieces:
        total = total + piece
    return sign * total


def el_first_integral(
    problem: Problem,
    traj: PiecewiseTrajectory,
    mode: str = "regional",
    grid: SampleGrid | None = None,
    quad: QuadratureSpec | None = None,
    tol: float | None = None,
) -> FirstIntegralReport:
    """Euler-Lagrange condition in integral form.

    The quantity sum_i (-1)^(m-i-1) [(m-i)-fold nested integral from the
    junction of the block term of index i] must equal a polynomial of
    degree m - 1: one polynomial per region in ``regional`` mode, a single
    polynomial across [t1, t2] in ``global`` mode.
    """
    if mode not in ("regional", "global"):
        raise ValueError(f"mode must be 'regional' or 'global', got {mode!r}")
    problem.check_trajectory(traj)
    quad = quad or QuadratureSpec()
    tol = DEFAULT_FIRST_INTEGRAL_TOL if tol is None else tol
    m = problem.order

    def phi(i: int) -> Callable[[float], np.ndarray]:
        return lambda s: block_term(problem, traj, i, s, region_of(problem, s))

    samples = sample_times(problem, traj, None, grid)
    values = np.zeros((len(samples), problem.dim))
    for row, (t, _) in enumerate(samples):
        acc = np.zeros(problem.dim)
        for i in range(m + 1):
            fold = m - i
            sign = -1.0 if (m - i - 1) % 2 else 1.0
            if fold == 0:
                term = block_term(problem, traj, i, t, region_of(problem, t))
            else:
                term = _oriented_nested_integral(problem, traj, fold, phi(i), t, quad)
            acc = acc + sign * term
        values[row] = acc

    regions: list[int | None] = [1, 2] if mode == "regional" else [None]
    return _analyze_samples(
        "el-integral", mode, samples, values, regions, m - 1, tol, problem.junction
    )


def dbr_first_integral(
    problem: Problem,
    traj: PiecewiseTrajectory,
    grid: SampleGrid | None = None,
    quad: QuadratureSpec | None = None,
    tol: float | None = None,
) -> FirstIntegralReport:
    """DuBois-Reymond first integral, constant on each region:
    L - sum_j psi^j . q^(j) - int d/dt-partial of L from the region start."""
    problem.check_trajectory(traj)
    quad = quad or QuadratureSpec()
    tol = DEFAULT_FIRST_INTEGRAL_TOL if tol is None else tol
    m = problem.order

    samples = sample_times(problem, traj, None, grid)
    values = np.zeros(len(samples))
    for row, (t, _) in enumerate(samples):
        region = region_of(problem, t)
        start = problem.t1 if region == 1 else problem.junction
        args = problem.args(traj, t)
        total = problem.lagrangian_value(args)
        for j in range(1, m + 1):
            momentum = psi(problem, traj, j, t, region)
            total -= float(momentum @ args.current[j])
        total -= integrate(
            problem,
            traj,
            lambda a: problem.partial(1, a),
            (start, t),
            quad,
        )
        values[row] = total

    return _analyze_samples(
        "dbr", "regional", samples, values, [1, 2], 0, tol, problem.junction
    )


@dataclass(frozen=True)
class ResidualReport:
    """Pointwise residual check (Euler-Lagrange or invariance)."""

    quantity: str
    times: np.ndarray
    values: np.ndarray
    tol: float
    max_abs: float
    verdict: bool


def check_el_differential(
    problem: Problem,
    traj: PiecewiseTrajectory,
    grid: SampleGrid | None = None,
    tol: float | None = None,
) -> ResidualReport:
    tol = DEFAULT_FIRST_INTEGRAL_TOL if tol is None else tol
    samples = sample_times(problem, traj, None, grid)
    values = np.array(
        [el_residual_differential(problem, traj, t) for t, _ in samples]
    )
    max_abs = float(np.max(np.abs(values))) if values.size else 0.0
    return ResidualReport(
        "el-differential",
        np.array([t for t, _ in samples]),
        values,
        tol,
        max_abs,
        max_abs <= tol,
    )
