"""JSON problem documents.

A document bundles one delayed variational problem with optional candidate
trajectories (a default plus named variants), an optional symmetry
candidate, quadrature settings and tolerance overrides.  Validation is
strict: unknown keys anywhere are rejected, so typos fail loudly instead of
silently changing meaning.

The first-integral tolerance resolves in precedence order: document
``tolerances.first_integral``, then the ``DELAY_NOETHER_TOL`` environment
variable, then the built-in default.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .conditions import DEFAULT_FIRST_INTEGRAL_TOL
from .expr import ExpressionError
from .functional import FunctionalError, Problem, QuadratureSpec
from .noether import SymmetryCandidate, SymmetryError
from .trajectory import PiecewiseTrajectory, TrajectoryError

ENV_TOL = "DELAY_NOETHER_TOL"


class DocumentError(ValueError):
    """Malformed problem document."""


@dataclass(frozen=True)
class Tolerances:
    first_integral: float | None = None
    continuity: float | None = None
    gradient: float | None = None


@dataclass
class ProblemDocument:
    problem: Problem
    default_trajectory: PiecewiseTrajectory | None
    trajectories: dict[str, PiecewiseTrajectory]
    symmetry: SymmetryCandidate | None
    quadrature: QuadratureSpec
    tolerances: Tolerances

    def trajectory(self, name: str | None = None) -> PiecewiseTrajectory:
        """Select a trajectory: by variant name, else the default, else the
        single variant if it is unambiguous."""
        if name is not None:
            if name not in self.trajectories:
                available = ", ".join(sorted(self.trajectories)) or "none"
                raise DocumentError(
                    f"no trajectory variant {name!r} (available: {available})"
                )
            return self.trajectories[name]
        if self.default_trajectory is not None:
            return self.default_trajectory
        if len(self.trajectories) == 1:
            return next(iter(self.trajectories.values()))
        raise DocumentError(
            "document has no default trajectory; pick a variant by name"
        )

    def first_integral_tol(self) -> float:
        return resolve_first_integral_tol(self.tolerances.first_integral)


def resolve_first_integral_tol(document_value: float | None) -> float:
    if document_value is not None:
        return document_value
    raw = os.environ.get(ENV_TOL)
    if raw is not None:
        try:
            value = float(raw)
        except ValueError:
            raise DocumentError(f"{ENV_TOL} must be a number, got {raw!r}") from None
        if value <= 0:
            raise DocumentError(f"{ENV_TOL} must be positive, got {raw!r}")
        return value
    return DEFAULT_FIRST_INTEGRAL_TOL


def _require_keys(doc: Mapping, allowed: set[str], required: set[str], where: str):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise DocumentError(f"{where}: unknown keys: {', '.join(unknown)}")
    missing = sorted(required - set(doc))
    if missing:
        raise DocumentError(f"{where}: missing keys: {', '.join(missing)}")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DocumentError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DocumentError(f"{where}: expected an integer, got {value!r}")
    return value


def _string(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise DocumentError(f"{where}: expected a string, got {value!r}")
    return value


def _string_list(value: Any, where: str) -> list[str]:
    if not isinstance(value, list):
        raise DocumentError(f"{where}: expected a list of strings")
    return [_string(item, f"{where}[{i}]") for i, item in enumerate(value)]


def _number_list(value: Any, where: str) -> list[float]:
    if not isinstance(value, list):
        raise DocumentError(f"{where}: expected a list of numbers")
    return [_number(item, f"{where}[{i}]") for i, item in enumerate(value)]


def parse_document(doc: Any, where: str = "document") -> ProblemDocument:
    if not isinstance(doc, Mapping):
        raise DocumentError(f"{where}: expected a JSON object")
    _require_keys(
        doc,
        allowed={
            "order",
            "dim",
            "t1",
            "t2",
            "tau",
            "lagrangian",
            "prehistory",
            "terminal",
            "trajectory",
            "trajectories",
            "symmetry",
            "quadrature",
            "tolerances",
        },
        required={"order", "dim", "t1", "t2", "tau", "lagrangian", "prehistory", "terminal"},
        where=where,
    )

    order = _integer(doc["order"], f"{where}.order")
    dim = _integer(doc["dim"], f"{where}.dim")

    terminal = doc["terminal"]
    if not isinstance(terminal, Mapping):
        raise DocumentError(f"{where}.terminal: expected an object")
    _require_keys(terminal, {"q", "derivatives"}, {"q"}, f"{where}.terminal")
    terminal_q = _number_list(terminal["q"], f"{where}.terminal.q")
    derivatives_raw = terminal.get("derivatives", [])
    if not isinstance(derivatives_raw, list):
        raise DocumentError(f"{where}.terminal.derivatives: expected a list")
    terminal_derivs = [
        _number_list(row, f"{where}.terminal.derivatives[{i}]")
        for i, row in enumerate(derivatives_raw)
    ]

    try:
        problem = Problem.from_sources(
            order,
            dim,
            _number(doc["t1"], f"{where}.t1"),
            _number(doc["t2"], f"{where}.t2"),
            _number(doc["tau"], f"{where}.tau"),
            _string(doc["lagrangian"], f"{where}.lagrangian"),
            _string_list(doc["prehistory"], f"{where}.prehistory"),
            terminal_q,
            terminal_derivs,
        )
    except (ExpressionError, FunctionalError) as exc:
        raise DocumentError(f"{where}: {exc}") from None

    tolerances = Tolerances()
    if "tolerances" in doc:
        tol_doc = doc["tolerances"]
        if not isinstance(tol_doc, Mapping):
            raise DocumentError(f"{where}.tolerances: expected an object")
        _require_keys(
            tol_doc,
            {"first_integral", "continuity", "gradient"},
            set(),
            f"{where}.tolerances",
        )
        values = {}
        for key in ("first_integral", "continuity", "gradient"):
            if key in tol_doc:
                value = _number(tol_doc[key], f"{where}.tolerances.{key}")
                if value <= 0:
                    raise DocumentError(
                        f"{where}.tolerances.{key}: must be positive"
                    )
                values[key] = value
        tolerances = Tolerances(**values)

    quadrature = QuadratureSpec()
    if "quadrature" in doc:
        quad_doc = doc["quadrature"]
        if not isinstance(quad_doc, Mapping):
            raise DocumentError(f"{where}.quadrature: expected an object")
        _require_keys(quad_doc, {"gauss_points"}, {"gauss_points"}, f"{where}.quadrature")
        try:
            quadrature = QuadratureSpec(
                _integer(quad_doc["gauss_points"], f"{where}.quadrature.gauss_points")
            )
        except FunctionalError as exc:
            raise DocumentError(f"{where}.quadrature: {exc}") from None

    def build_trajectory(sub: Any, sub_where: str) -> PiecewiseTrajectory:
        try:
            traj = PiecewiseTrajectory.from_json_dict(
                sub, order, continuity_tol=tolerances.continuity
            )
            problem.check_trajectory(traj)
        except (TrajectoryError, FunctionalError) as exc:
            raise DocumentError(f"{sub_where}: {exc}") from None
        return traj

    default_trajectory = None
    if "trajectory" in doc:
        default_trajectory = build_trajectory(doc["trajectory"], f"{where}.trajectory")

    trajectories: dict[str, PiecewiseTrajectory] = {}
    if "trajectories" in doc:
        variants = doc["trajectories"]
        if not isinstance(variants, Mapping):
            raise DocumentError(f"{where}.trajectories: expected an object")
        for name, sub in variants.items():
            trajectories[_string(name, f"{where}.trajectories key")] = build_trajectory(
                sub, f"{where}.trajectories.{name}"
            )

    symmetry = None
    if "symmetry" in doc:
        sym_doc = doc["symmetry"]
        if not isinstance(sym_doc, Mapping):
            raise DocumentError(f"{where}.symmetry: expected an object")
        _require_keys(sym_doc, {"eta", "xi", "gauge"}, {"eta", "xi"}, f"{where}.symmetry")
        try:
            symmetry = SymmetryCandidate.from_sources(
                dim,
                order,
                _string(sym_doc["eta"], f"{where}.symmetry.eta"),
                _string_list(sym_doc["xi"], f"{where}.symmetry.xi"),
                _string(sym_doc.get("gauge", "0"), f"{where}.symmetry.gauge"),
            )
        except (ExpressionError, SymmetryError) as exc:
            raise DocumentError(f"{where}.symmetry: {exc}") from None

    return ProblemDocument(
        problem=problem,
        default_trajectory=default_trajectory,
        trajectories=trajectories,
        symmetry=symmetry,
        quadrature=quadrature,
        tolerances=tolerances,
    )


def load_document(path: str | os.PathLike) -> ProblemDocument:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path} is not valid JSON: {exc}") from None
    return parse_document(raw, where=str(path))


def bundled_problem_path(name: str = "frederico_section3.json") -> Path:
    """Filesystem path of a problem document shipped with the package."""
    path = resources.files("delay_noether").joinpath("data", name)
    return Path(str(path))


def load_bundled(name: str = "frederico_section3.json") -> ProblemDocument:
    return load_document(bundled_problem_path(name))
