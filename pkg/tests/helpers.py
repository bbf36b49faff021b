"""Shared test utilities: random expression/trajectory generators, finite
difference oracles, small fixture problems built by hand, and the
acceptance-criteria result registry."""

from __future__ import annotations

import functools
import math
import random

import numpy as np

from delay_noether import PiecewiseTrajectory, Problem, evaluate
from delay_noether.expr import Binary, Constant, Expression, Unary, Variable

ACCEPTANCE_LINES: list[str] = []


def acceptance(number: int, description: str):
    """Record one PASS/FAIL line per acceptance criterion; the conftest
    terminal-summary hook prints the collected lines after the run."""

    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                ACCEPTANCE_LINES.append(f"FAIL  criterion {number}: {description}")
                raise
            ACCEPTANCE_LINES.append(f"PASS  criterion {number}: {description}")

        return wrapper

    return decorator

UNARY_OPS = ["neg", "sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh"]
BINARY_OPS = ["add", "sub", "mul", "div"]


def random_tree(rng: random.Random, names: list[str], depth: int) -> Expression:
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Constant(round(rng.uniform(-3.0, 3.0), 4))
        return Variable(rng.choice(names))
    roll = rng.random()
    if roll < 0.35:
        return Unary(rng.choice(UNARY_OPS), random_tree(rng, names, depth - 1))
    if roll < 0.45:
        return Binary(
            "pow",
            random_tree(rng, names, depth - 1),
            Constant(float(rng.choice([2, 3]))),
        )
    return Binary(
        rng.choice(BINARY_OPS),
        random_tree(rng, names, depth - 1),
        random_tree(rng, names, depth - 1),
    )


def fd_derivative(expr: Expression, var: str, bindings: dict, h: float = 1e-5) -> float:
    """Richardson-improved central difference, the oracle for symbolic diff."""

    def at(value: float) -> float:
        shifted = dict(bindings)
        shifted[var] = value
        return evaluate(expr, shifted)

    x = bindings[var]

    def central(step: float) -> float:
        return (at(x + step) - at(x - step)) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def random_diff_pairs(seed: int, count: int, names: list[str] | None = None):
    """Yield ``count`` (expr, var, bindings) triples where the expression is
    finite and numerically tame around the binding point."""
    rng = random.Random(seed)
    names = names or ["t", "q0_d0", "q0_d1", "q0_d0_tau", "q0_d1_tau"]
    produced = 0
    while produced < count:
        tree = random_tree(rng, names, 4)
        var = rng.choice(names)
        bindings = {n: rng.uniform(0.4, 1.6) for n in names}
        try:
            value = evaluate(tree, bindings)
            probes = [
                evaluate(tree, {**bindings, var: bindings[var] + delta})
                for delta in (-2e-5, -1e-5, 1e-5, 2e-5)
            ]
        except Exception:
            continue
        if not all(math.isfinite(p) and abs(p) < 1e6 for p in [value, *probes]):
            continue
        yield tree, var, bindings
        produced += 1


def random_lipschitz_trajectory(
    rng: np.random.Generator,
    lo: float,
    hi: float,
    dim: int = 1,
    kinks: int = 5,
    scale: float = 1.0,
    min_gap: float = 0.15,
) -> PiecewiseTrajectory:
    """Random piecewise-linear curve on [lo, hi] with well-separated kinks."""
    times = [lo, hi]
    attempts = 0
    while len(times) < kinks + 2 and attempts < 200:
        attempts += 1
        candidate = float(rng.uniform(lo + min_gap, hi - min_gap))
        if all(abs(candidate - t) >= min_gap for t in times):
            times.append(candidate)
    times.sort()
    values = rng.uniform(-scale, scale, size=(len(times), dim))
    return PiecewiseTrajectory.from_nodes(times, values, order=1)


def taylor_sin_coefficients(center: float, degree: int) -> list[float]:
    return [
        math.sin(center + 0.5 * math.pi * k) / math.factorial(k)
        for k in range(degree + 1)
    ]


def oscillator(tau: float = 1e-3):
    """Harmonic oscillator with a tiny, irrelevant delay: L = q'^2 - q^2 on
    [0, 3], trajectory sin t as piecewise Taylor polynomials of degree 13."""
    t1, t2 = 0.0, 3.0
    breakpoints = [-tau, 0.75, 1.5, 2.25, 3.0]
    coeffs = [
        [taylor_sin_coefficients(breakpoints[j], 13)]
        for j in range(len(breakpoints) - 1)
    ]
    traj = PiecewiseTrajectory(breakpoints, coeffs, order=1, degree_cap=13)
    problem = Problem.from_sources(
        1, 1, t1, t2, tau,
        "q0_d1^2 - q0_d0^2",
        ["sin(t)"],
        [math.sin(3.0)],
    )
    return problem, traj


def cubic_order2():
    """Order-2, delay-independent L = q''^2 / 2 along q = t^3 on [0, 2]."""
    t1, t2, tau = 0.0, 2.0, 0.5
    # t^3 in the local variable u = t + 0.5.
    coeffs = [[[-0.125, 0.75, -1.5, 1.0]]]
    traj = PiecewiseTrajectory([t1 - tau, t2], coeffs, order=2)
    problem = Problem.from_sources(
        2, 1, t1, t2, tau,
        "q0_d2^2 / 2",
        ["t^3"],
        [8.0],
        [[12.0]],
    )
    return problem, traj
