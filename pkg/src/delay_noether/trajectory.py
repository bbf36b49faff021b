"""Vector-valued piecewise polynomial trajectories with one-sided evaluation.

A trajectory lives on [b_0, b_K] with breakpoints b_0 < ... < b_K; on each
interval every coordinate is a polynomial in the local variable u = t - b_j.
Trajectories back delayed variational problems, so b_0 is conventionally
t1 - tau and b_K is t2, and evaluation is explicitly one-sided: at a
breakpoint the left and right polynomials may disagree in derivatives of
order >= the smoothness class, and callers must say which limit they want.
Values are never averaged across a breakpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import coordinate_name


class TrajectoryError(ValueError):
    """Invalid trajectory data or evaluation request."""


_SNAP_FRACTION = 1e-12  # breakpoint identification tolerance, relative to span
_DEFAULT_DEGREE_CAP = 5


def _poly_derivative_value(coeffs: np.ndarray, u: float, k: int) -> np.ndarray:
    """k-th derivative at local coordinate u; coeffs has shape (dim, L)."""
    length = coeffs.shape[1]
    if k >= length:
        return np.zeros(coeffs.shape[0])
    # Derived coefficients c[j+k] * (j+k)! / j!, evaluated by Horner.
    result = np.zeros(coeffs.shape[0])
    for j in range(length - 1, k - 1, -1):
        factor = 1.0
        for r in range(j, j - k, -1):
            factor *= r
        result = result * u + coeffs[:, j] * factor
    return result


class PiecewiseTrajectory:
    """Piecewise polynomial curve q: [b_0, b_K] -> R^dim.

    Parameters
    ----------
    breakpoints : increasing sequence of K+1 floats.
    coefficients : per-interval, per-coordinate coefficient lists
        (``coefficients[j][i][c]`` multiplies ``(t - b_j)**c``).
    order : smoothness class m; the curve must be C^{m-1} at interior
        breakpoints and k-th derivatives are available for k <= m.
    degree_cap : maximum polynomial degree (default 5).
    continuity_tol : override for the continuity tolerance, which defaults
        to ``1e-9 * (1 + max |coefficient|)``.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        coefficients: Sequence[Sequence[Sequence[float]]],
        order: int,
        *,
        degree_cap: int = _DEFAULT_DEGREE_CAP,
        continuity_tol: float | None = None,
    ):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise TrajectoryError("need at least two breakpoints")
        if not np.all(np.isfinite(bp)):
            raise TrajectoryError("breakpoints must be finite")
        if not np.all(np.diff(bp) > 0):
            raise TrajectoryError("breakpoints must be strictly increasing")
        if order < 1:
            raise TrajectoryError("order must be >= 1")
        if len(coefficients) != bp.size - 1:
            raise TrajectoryError(
                f"expected {bp.size - 1} coefficient blocks, got {len(coefficients)}"
            )
        dims = {len(block) for block in coefficients}
        if len(dims) != 1 or 0 in dims:
            raise TrajectoryError("every interval needs the same nonzero dim")
        dim = dims.pop()
        max_len = 0
        for block in coefficients:
            for coords in block:
                if len(coords) == 0:
                    raise TrajectoryError("empty coefficient list")
                if len(coords) - 1 > degree_cap:
                    raise TrajectoryError(
                        f"degree {len(coords) - 1} exceeds cap {degree_cap}"
                    )
                max_len = max(max_len, len(coords))
        packed = np.zeros((bp.size - 1, dim, max_len))
        for j, block in enumerate(coefficients):
            for i, coords in enumerate(block):
                packed[j, i, : len(coords)] = coords
        if not np.all(np.isfinite(packed)):
            raise TrajectoryError("coefficients must be finite")

        self.breakpoints = bp
        self.coefficients = packed
        self.order = int(order)
        self.dim = dim
        self.degree_cap = int(degree_cap)

        scale = float(np.max(np.abs(packed))) if packed.size else 0.0
        tol = continuity_tol if continuity_tol is not None else 1e-9 * (1.0 + scale)
        self.continuity_tol = float(tol)
        self._check_continuity(self.continuity_tol)

    def _check_continuity(self, tol: float) -> None:
        for j in range(len(self.breakpoints) - 2):
            u_end = self.breakpoints[j + 1] - self.breakpoints[j]
            for k in range(self.order):
                left = _poly_derivative_value(self.coefficients[j], u_end, k)
                right = _poly_derivative_value(self.coefficients[j + 1], 0.0, k)
                gap = float(np.max(np.abs(left - right)))
                if gap > tol:
                    raise TrajectoryError(
                        f"derivative {k} jumps by {gap:.3e} at "
                        f"breakpoint {self.breakpoints[j + 1]!r} (tol {tol:.3e})"
                    )

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def _snap(self) -> float:
        return _SNAP_FRACTION * (self.breakpoints[-1] - self.breakpoints[0])

    def segment_index(self, t: float, side: str = "right") -> int:
        """Index of the interval whose polynomial governs the ``side`` limit at t."""
        if side not in ("left", "right"):
            raise TrajectoryError(f"side must be 'left' or 'right', got {side!r}")
        bp = self.breakpoints
        snap = self._snap
        if t < bp[0] - snap or t > bp[-1] + snap:
            raise TrajectoryError(f"t={t!r} outside domain [{bp[0]!r}, {bp[-1]!r}]")
        hit = int(np.argmin(np.abs(bp - t)))
        if abs(bp[hit] - t) <= snap:
            if side == "right":
                if hit == bp.size - 1:
                    return hit - 1  # right end: only the left limit exists
                return hit
            if hit == 0:
                return 0  # left end: only the right limit exists
            return hit - 1
        return int(np.searchsorted(bp, t)) - 1

    def segment_interval(self, t: float, side: str = "right") -> tuple[float, float]:
        j = self.segment_index(t, side)
        return float(self.breakpoints[j]), float(self.breakpoints[j + 1])

    def eval_derivative(self, t: float, k: int = 0, side: str = "right") -> np.ndarray:
        """k-th derivative vector at t, taking the one-sided limit ``side``."""
        if not 0 <= k <= self.order:
            raise TrajectoryError(
                f"derivative order {k} not available (order is {self.order})"
            )
        j = self.segment_index(t, side)
        return _poly_derivative_value(self.coefficients[j], t - self.breakpoints[j], k)

    @classmethod
    def from_nodes(
        cls,
        times: Sequence[float],
        values: Sequence[Sequence[float]] | Sequence[float] | np.ndarray,
        order: int = 1,
        **kwargs,
    ) -> "PiecewiseTrajectory":
        """Piecewise-linear interpolant of ``values`` at ``times``."""
        ts = np.asarray(times, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if ts.ndim != 1 or vals.shape[0] != ts.size:
            raise TrajectoryError("times and values must have matching length")
        coeffs = []
        for j in range(ts.size - 1):
            width = ts[j + 1] - ts[j]
            block = [
                [float(vals[j, i]), float((vals[j + 1, i] - vals[j, i]) / width)]
                for i in range(vals.shape[1])
            ]
            coeffs.append(block)
        return cls(ts, coeffs, order, **kwargs)

    def to_json_dict(self) -> dict:
        segments = []
        for j in range(self.coefficients.shape[0]):
            block = []
            for i in range(self.dim):
                coords = self.coefficients[j, i]
                last = max(int(np.max(np.nonzero(coords)[0], initial=0)), 0)
                block.append([float(c) for c in coords[: last + 1]])
            segments.append(block)
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "segments": segments,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping, order: int, **kwargs) -> "PiecewiseTrajectory":
        if not isinstance(doc, Mapping):
            raise TrajectoryError("trajectory document must be an object")
        unknown = set(doc) - {"breakpoints", "segments"}
        if unknown:
            raise TrajectoryError(
                f"unknown trajectory keys: {', '.join(sorted(unknown))}"
            )
        if "breakpoints" not in doc or "segments" not in doc:
            raise TrajectoryError("trajectory document needs breakpoints and segments")
        return cls(doc["breakpoints"], doc["segments"], order, **kwargs)


@dataclass(frozen=True)
class DelayedArgs:
    """Arguments of a delayed Lagrangian at one time: t, then the derivative
    stacks q^(k)(t) and q^(k)(t - tau) for k = 0..order."""

    t: float
    current: np.ndarray  # shape (order + 1, dim)
    delayed: np.ndarray  # shape (order + 1, dim)

    @property
    def order(self) -> int:
        return self.current.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.current.shape[1]

    def bindings(self) -> dict[str, float]:
        out = {"t": self.t}
        for k in range(self.current.shape[0]):
            for i in range(self.dim):
                out[coordinate_name(i, k)] = float(self.current[k, i])
                out[coordinate_name(i, k, delayed=True)] = float(self.delayed[k, i])
        return out


def delayed_args(
    traj: PiecewiseTrajectory,
    t: float,
    tau: float,
    order: int | None = None,
    side: str = "right",
) -> DelayedArgs:
    """Assemble ``DelayedArgs`` from ``traj`` at time t with delay tau.

    Both t and t - tau must lie in the trajectory domain; the same one-sided
    limit is used at both times.
    """
    m = traj.order if order is None else order
    if not 1 <= m <= traj.order:
        raise TrajectoryError(f"order {m} not supported by trajectory")
    if tau <= 0:
        raise TrajectoryError("tau must be positive")
    current = np.stack([traj.eval_derivative(t, k, side) for k in range(m + 1)])
    delayed = np.stack(
        [traj.eval_derivative(t - tau, k, side) for k in range(m + 1)]
    )
    return DelayedArgs(float(t), current, delayed)


def effective_breakpoints(
    traj: PiecewiseTrajectory,
    tau: float,
    window: tuple[float, float] | None = None,
) -> np.ndarray:
    """Sorted deduplicated union of B, B + tau and B - tau inside ``window``.

    These are the points where any quantity built from args(t) and
    args(t +- tau) may lose smoothness; b_K - tau (the junction between the
    two regions of a delayed problem) is always among them.
    """
    bp = traj.breakpoints
    lo, hi = window if window is not None else traj.domain
    if hi <= lo:
        raise TrajectoryError("window must have positive length")
    candidates = np.concatenate([bp, bp + tau, bp - tau])
    snap = _SNAP_FRACTION * (bp[-1] - bp[0])
    candidates = candidates[(candidates >= lo - snap) & (candidates <= hi + snap)]
    candidates = np.clip(np.sort(candidates), lo, hi)
    kept: list[float] = []
    for value in candidates:
        if not kept or value - kept[-1] > snap:
            kept.append(float(value))
    return np.asarray(kept)


def subsegments(
    points: Iterable[float], lo: float, hi: float, snap: float
) -> list[tuple[float, float]]:
    """Partition [lo, hi] at the given interior points (used for quadrature
    and sample-grid construction)."""
    interior = sorted(float(p) for p in points if lo + snap < p < hi - snap)
    edges = [float(lo), *interior, float(hi)]
    return [
        (edges[j], edges[j + 1])
        for j in range(len(edges) - 1)
        if edges[j + 1] - edges[j] > snap
    ]
