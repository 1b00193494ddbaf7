"""Random instance generation for benchmarks.

Two families cover the two score-model regimes. The classical family mixes
binary and continuous features, two binary per continuous, with signed
per-unit costs on the binary switches and tight feasibility radii on the
continuous ones. The neural family is fully continuous with free ranges and
nonnegative costs. Budgets are drawn as a fraction of the cost ceiling (the
cost of pushing every feature to its feasible extreme), so a comparable
share of instances is strongly budget-constrained at every size.

Negative binary costs are kept as drawn; they model switches whose deception
direction is cheap enough to refund budget elsewhere. The cost ceiling is
clamped at zero before the budget draw so the budget stays nonnegative.

Everything is deterministic given the spec: one generator, fixed draw order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import FdpInstance, ValidationError

__all__ = ["InstanceGenSpec", "generate_instance", "generate_binary_instance"]

_FAMILIES = ("classical", "neural")


@dataclass(frozen=True)
class InstanceGenSpec:
    n: int
    m: int
    family: str
    seed: int

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}, expected one of {_FAMILIES}")
        if self.n < 1 or self.m < 1:
            raise ValidationError("n and m must be positive")
        if self.family == "classical" and self.m % 3 != 0:
            raise ValidationError(
                "classical family needs m divisible by 3 "
                "(two binary features per continuous one)")


def _classical(spec: InstanceGenSpec, rng: np.random.Generator) -> FdpInstance:
    n, m = spec.n, spec.m
    md = 2 * m // 3
    mc = m - md
    kinds = ("binary",) * md + ("continuous",) * mc
    cost_b = rng.uniform(-3.0, 3.0, (n, md))
    cost_c = rng.uniform(0.0, 3.0, (n, mc))
    tau = rng.uniform(0.0, 0.25, (n, mc))
    actual_b = rng.integers(0, 2, (n, md)).astype(float)
    actual_c = rng.uniform(0.0, 1.0, (n, mc))
    losses = rng.uniform(0.0, 1.0, n)
    # ceiling: flip every binary feature, move every continuous one to the
    # nearest of {its radius, the closest box wall}
    reach_c = np.minimum(np.minimum(actual_c, 1.0 - actual_c), tau)
    ceiling = float(cost_b.sum() + (cost_c * reach_c).sum())
    budget = float(rng.uniform(0.0, 0.2 * max(ceiling, 0.0)))
    return FdpInstance(
        n=n, m=m, kinds=kinds,
        actual=np.hstack([actual_b, actual_c]),
        losses=losses,
        radii=np.hstack([np.ones((n, md)), tau]),
        costs=np.hstack([cost_b, cost_c]),
        budget=budget,
        linear_constraints=())


def _neural(spec: InstanceGenSpec, rng: np.random.Generator) -> FdpInstance:
    n, m = spec.n, spec.m
    return FdpInstance(
        n=n, m=m, kinds=("continuous",) * m,
        actual=rng.uniform(0.0, 1.0, (n, m)),
        losses=rng.uniform(0.0, 1.0, n),
        radii=np.ones((n, m)),
        costs=rng.uniform(0.0, 1.0, (n, m)),
        budget=float(rng.uniform(0.0, 0.2 * n * m)),
        linear_constraints=())


def generate_instance(spec: InstanceGenSpec) -> FdpInstance:
    """Draw one instance from the spec's family, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.family == "classical":
        return _classical(spec, rng)
    return _neural(spec, rng)


def generate_binary_instance(n: int, m: int, seed) -> FdpInstance:
    """All-binary restriction of the classical family.

    Every feature is a free binary switch with a signed cost. These are the
    instances small enough for exhaustive search, so they anchor the planner
    optimality benchmarks.
    """
    rng = np.random.default_rng(seed)
    costs = rng.uniform(-3.0, 3.0, (n, m))
    actual = rng.integers(0, 2, (n, m)).astype(float)
    losses = rng.uniform(0.0, 1.0, n)
    budget = float(rng.uniform(0.0, 0.2 * max(float(costs.sum()), 0.0)))
    return FdpInstance(
        n=n, m=m, kinds=("binary",) * m, actual=actual, losses=losses,
        radii=np.ones((n, m)), costs=costs, budget=budget,
        linear_constraints=())
