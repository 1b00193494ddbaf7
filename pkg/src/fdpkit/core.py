"""Core data model for feature-deception planning.

A deception instance is a set of ``n`` targets, each described by ``m``
observable features. The defender may present feature values that differ from
the actual ones, paying ``eta[i,k] * |x[i,k] - actual[i,k]|`` per entry, subject
to a total budget, per-entry feasibility sets and per-target linear
constraints. An attacker picks a target with probability proportional to a
score of the observed feature vector; the defender's expected loss is the
score-weighted average of the per-target losses.

Everything in this module is a pure function over immutable values; instances
and configs can be shared freely across worker processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TOL",
    "FdpError",
    "DimensionError",
    "ValidationError",
    "FeatureKind",
    "LinearConstraint",
    "FdpInstance",
    "FeatureConfig",
    "FeasibilityReport",
    "deception_cost",
    "check_feasibility",
    "expected_loss",
    "feasible_interval",
    "instance_to_json",
    "instance_from_json",
    "config_to_json",
    "config_from_json",
]

#: Absolute tolerance used by every feasibility and budget comparison.
TOL = 1e-9

_SCHEMA_VERSION = 1


class FdpError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FdpError):
    """An array argument does not match the instance dimensions."""


class ValidationError(FdpError):
    """A value violates an instance or config invariant."""


class FeatureKind:
    """Feature kinds. Plain string constants; a feature is one or the other."""

    CONTINUOUS = "continuous"
    BINARY = "binary"

    ALL = (CONTINUOUS, BINARY)


@dataclass(frozen=True)
class LinearConstraint:
    """A linear constraint over a single target's observed features.

    Represents ``sum_k coef_k * x[target, k] (== | <=) rhs``. Feature indices
    must be distinct within one constraint. Covers one-hot categorical
    restrictions and technical compatibility rules.
    """

    target: int
    terms: tuple[tuple[int, float], ...]
    relation: str  # "eq" or "leq"
    rhs: float

    def __post_init__(self) -> None:
        if self.relation not in ("eq", "leq"):
            raise ValidationError(
                f"constraint relation must be 'eq' or 'leq', got {self.relation!r}"
            )
        ks = [k for k, _ in self.terms]
        if len(set(ks)) != len(ks):
            raise ValidationError(
                f"constraint on target {self.target} repeats a feature index: {ks}"
            )
        object.__setattr__(
            self, "terms", tuple((int(k), float(c)) for k, c in self.terms)
        )

    def evaluate(self, row: np.ndarray) -> float:
        """Left-hand-side value for one target's feature row."""
        return float(sum(c * row[k] for k, c in self.terms))

    def satisfied(self, row: np.ndarray, tol: float = TOL) -> bool:
        lhs = self.evaluate(row)
        if self.relation == "eq":
            return abs(lhs - self.rhs) <= tol
        return lhs <= self.rhs + tol


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FdpInstance:
    """A feature-deception planning instance.

    Attributes
    ----------
    n, m : int
        Number of targets and features.
    kinds : tuple of str
        Per-feature kind, ``FeatureKind.CONTINUOUS`` or ``FeatureKind.BINARY``.
    actual : (n, m) array
        True feature values in [0, 1]; binary columns are 0/1.
    losses : (n,) array
        Defender loss if target i is attacked, in [-1, 1]. Negative entries
        model honeypots.
    radii : (n, m) array
        For continuous features the feasibility radius tau in [0, 1]: observed
        values may lie in [actual - tau, actual + tau] clipped to [0, 1]. For
        binary features a marker: 0.0 = fixed (observed must equal actual),
        1.0 = free (either value allowed).
    costs : (n, m) array
        Per-unit deception cost eta. Nonnegative on continuous features;
        binary features may carry negative rates (a switch then credits the
        budget), which some instance distributions generate.
    budget : float
        Total deception budget, may be ``math.inf``.
    linear_constraints : tuple of LinearConstraint
        Per-target constraints the observed configuration must satisfy.

    The actual configuration must itself be feasible (zero-cost deception is
    always available); this is validated at construction.
    """

    n: int
    m: int
    kinds: tuple[str, ...]
    actual: np.ndarray
    losses: np.ndarray
    radii: np.ndarray
    costs: np.ndarray
    budget: float
    linear_constraints: tuple[LinearConstraint, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "actual", _as_readonly(self.actual))
        object.__setattr__(self, "losses", _as_readonly(self.losses))
        object.__setattr__(self, "radii", _as_readonly(self.radii))
        object.__setattr__(self, "costs", _as_readonly(self.costs))
        object.__setattr__(self, "budget", float(self.budget))
        object.__setattr__(
            self, "linear_constraints", tuple(self.linear_constraints)
        )
        self._validate()

    # -- validation ------------------------------------------------------

    def _validate(self) -> None:
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise ValidationError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        if len(self.kinds) != m:
            raise DimensionError(f"kinds has length {len(self.kinds)}, expected {m}")
        for k, kind in enumerate(self.kinds):
            if kind not in FeatureKind.ALL:
                raise ValidationError(f"feature {k} has unknown kind {kind!r}")
        for name in ("actual", "radii", "costs"):
            arr = getattr(self, name)
            if arr.shape != (n, m):
                raise DimensionError(
                    f"{name} has shape {arr.shape}, expected {(n, m)}"
                )
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite entries")
        if self.losses.shape != (n,):
            raise DimensionError(
                f"losses has shape {self.losses.shape}, expected {(n,)}"
            )
        if not np.isfinite(self.losses).all():
            raise ValidationError("losses contains non-finite entries")
        if np.any(self.losses < -1 - TOL) or np.any(self.losses > 1 + TOL):
            raise ValidationError("losses must lie in [-1, 1]")
        if np.any(self.actual < -TOL) or np.any(self.actual > 1 + TOL):
            raise ValidationError("actual values must lie in [0, 1]")
        if math.isnan(self.budget) or self.budget < 0:
            raise ValidationError(f"budget must be >= 0, got {self.budget}")

        for k, kind in enumerate(self.kinds):
            col_actual = self.actual[:, k]
            col_radii = self.radii[:, k]
            col_costs = self.costs[:, k]
            if kind == FeatureKind.BINARY:
                if not np.all(np.isin(col_actual, (0.0, 1.0))):
                    raise ValidationError(
                        f"binary feature {k} has non-0/1 actual values"
                    )
                if not np.all(np.isin(col_radii, (0.0, 1.0))):
                    raise ValidationError(
                        f"binary feature {k} radii must be the 0/1 fixed/free "
                        f"marker, got {sorted(set(col_radii.tolist()))}"
                    )
            else:
                if np.any(col_radii < 0) or np.any(col_radii > 1):
                    raise ValidationError(
                        f"continuous feature {k} radii must lie in [0, 1]"
                    )
                if np.any(col_costs < 0):
                    # The |x - actual| cost linearization used by the planners
                    # is only sound for nonnegative continuous rates.
                    raise ValidationError(
                        f"continuous feature {k} has negative cost entries"
                    )

        for idx, con in enumerate(self.linear_constraints):
            if not 0 <= con.target < n:
                raise ValidationError(
                    f"constraint {idx} targets index {con.target}, n={n}"
                )
            for k, _ in con.terms:
                if not 0 <= k < m:
                    raise ValidationError(
                        f"constraint {idx} references feature {k}, m={m}"
                    )
            if not con.satisfied(self.actual[con.target]):
                raise ValidationError(
                    f"actual configuration violates constraint {idx} "
                    f"on target {con.target}"
                )

    # -- convenience -----------------------------------------------------

    def is_binary(self, k: int) -> bool:
        return self.kinds[k] == FeatureKind.BINARY

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([kind == FeatureKind.BINARY for kind in self.kinds])

    @property
    def has_continuous(self) -> bool:
        return any(kind == FeatureKind.CONTINUOUS for kind in self.kinds)

    def binary_free(self, i: int, k: int) -> bool:
        """True when binary entry (i, k) may be observed as either value."""
        return self.radii[i, k] == 1.0

    def constraints_for(self, i: int) -> tuple[LinearConstraint, ...]:
        return tuple(c for c in self.linear_constraints if c.target == i)

    def actual_config(self) -> "FeatureConfig":
        return FeatureConfig(self.actual)


def feasible_interval(instance: FdpInstance, i: int, k: int) -> tuple[float, float]:
    """Bounds of the allowed observed values for one continuous entry.

    Returns ``[max(0, actual - tau), min(1, actual + tau)]``. Only meaningful
    for continuous features; binary entries use the fixed/free marker instead.
    """
    if instance.is_binary(k):
        raise ValidationError(f"feature {k} is binary; no interval")
    a = instance.actual[i, k]
    tau = instance.radii[i, k]
    return max(0.0, a - tau), min(1.0, a + tau)


@dataclass(frozen=True)
class FeatureConfig:
    """An observed feature configuration: the defender's decision variable."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_readonly(self.values))
        if self.values.ndim != 2:
            raise DimensionError(
                f"config values must be 2-D, got shape {self.values.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ValidationError("config contains non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


@dataclass(frozen=True)
class FeasibilityReport:
    """What check_feasibility found. Violations are data, not errors."""

    entry_violations: tuple[tuple[int, int, float], ...]
    constraint_violations: tuple[int, ...]
    cost: float
    within_budget: bool

    @property
    def feasible(self) -> bool:
        return (
            not self.entry_violations
            and not self.constraint_violations
            and self.within_budget
        )


def _require_dims(instance: FdpInstance, config: FeatureConfig) -> None:
    if config.values.shape != (instance.n, instance.m):
        raise DimensionError(
            f"config shape {config.values.shape} does not match instance "
            f"{(instance.n, instance.m)}"
        )


def deception_cost(instance: FdpInstance, config: FeatureConfig) -> float:
    """Total deception cost ``sum_ik eta[i,k] * |x[i,k] - actual[i,k]|``.

    Additive across targets and features. Zero when the observed configuration
    equals the actual one.
    """
    _require_dims(instance, config)
    return float(
        np.sum(instance.costs * np.abs(config.values - instance.actual))
    )


def check_feasibility(
    instance: FdpInstance, config: FeatureConfig, tol: float = TOL
) -> FeasibilityReport:
    """Report every feasibility violation of an observed configuration.

    Checks per-entry feasibility sets (radius interval for continuous
    features, fixed/free marker for binary ones), every linear constraint,
    and the budget. Never raises for violations; dimension mismatch is still
    an error.
    """
    _require_dims(instance, config)
    x = config.values
    entry_violations: list[tuple[int, int, float]] = []
    for k in range(instance.m):
        if instance.is_binary(k):
            for i in range(instance.n):
                v = x[i, k]
                if abs(v) > tol and abs(v - 1) > tol:
                    entry_violations.append((i, k, float(v)))
                elif not instance.binary_free(i, k) and abs(
                    v - instance.actual[i, k]
                ) > tol:
                    entry_violations.append((i, k, float(v)))
        else:
            for i in range(instance.n):
                lo, hi = feasible_interval(instance, i, k)
                v = x[i, k]
                if v < lo - tol or v > hi + tol:
                    entry_violations.append((i, k, float(v)))
    constraint_violations = tuple(
        idx
        for idx, con in enumerate(instance.linear_constraints)
        if not con.satisfied(x[con.target], tol)
    )
    cost = deception_cost(instance, config)
    return FeasibilityReport(
        entry_violations=tuple(entry_violations),
        constraint_violations=constraint_violations,
        cost=cost,
        within_budget=cost <= instance.budget + tol,
    )


def expected_loss(instance: FdpInstance, model, config: FeatureConfig) -> float:
    """Defender's expected loss under an attacker score model.

    ``sum_i p_i * u_i`` where ``p`` is the model's attack distribution over
    targets for the observed configuration. For score-proportional models this
    equals ``sum_i f(x_i) u_i / sum_j f(x_j)`` and always lies between the
    smallest and largest loss.
    """
    _require_dims(instance, config)
    p = model.attack_distribution(config)
    if len(p) != instance.n:
        raise DimensionError(
            f"model produced a distribution over {len(p)} targets, "
            f"instance has {instance.n}"
        )
    return float(np.dot(p, instance.losses))


# -- serialization --------------------------------------------------------


def _budget_to_json(budget: float):
    return None if math.isinf(budget) else budget


def _budget_from_json(value) -> float:
    return math.inf if value is None else float(value)


def instance_to_json(instance: FdpInstance) -> str:
    doc = {
        "version": _SCHEMA_VERSION,
        "n": instance.n,
        "m": instance.m,
        "kinds": list(instance.kinds),
        "actual": instance.actual.tolist(),
        "losses": instance.losses.tolist(),
        "radii": instance.radii.tolist(),
        "costs": instance.costs.tolist(),
        "budget": _budget_to_json(instance.budget),
        "constraints": [
            {
                "target": c.target,
                "terms": [[k, coef] for k, coef in c.terms],
                "relation": c.relation,
                "rhs": c.rhs,
            }
            for c in instance.linear_constraints
        ],
    }
    return json.dumps(doc, indent=2)


_INSTANCE_FIELDS = {
    "version",
    "n",
    "m",
    "kinds",
    "actual",
    "losses",
    "radii",
    "costs",
    "budget",
    "constraints",
}


def instance_from_json(text: str) -> FdpInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"instance document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("instance document must be a JSON object")
    unknown = set(doc) - _INSTANCE_FIELDS
    if unknown:
        raise ValidationError(f"unknown instance fields: {sorted(unknown)}")
    missing = _INSTANCE_FIELDS - set(doc)
    if missing:
        raise ValidationError(f"missing instance fields: {sorted(missing)}")
    if doc["version"] != _SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported instance schema version {doc['version']!r}; "
            f"this build reads version {_SCHEMA_VERSION}"
        )
    constraints = []
    for c in doc["constraints"]:
        extra = set(c) - {"target", "terms", "relation", "rhs"}
        if extra:
            raise ValidationError(f"unknown constraint fields: {sorted(extra)}")
        constraints.append(
            LinearConstraint(
                target=int(c["target"]),
                terms=tuple((int(k), float(v)) for k, v in c["terms"]),
                relation=c["relation"],
                rhs=float(c["rhs"]),
            )
        )
    return FdpInstance(
        n=doc["n"],
        m=doc["m"],
        kinds=tuple(doc["kinds"]),
        actual=np.array(doc["actual"], dtype=float),
        losses=np.array(doc["losses"], dtype=float),
        radii=np.array(doc["radii"], dtype=float),
        costs=np.array(doc["costs"], dtype=float),
        budget=_budget_from_json(doc["budget"]),
        linear_constraints=tuple(constraints),
    )


def config_to_json(config: FeatureConfig) -> str:
    return json.dumps({"values": config.values.tolist()}, indent=2)


def config_from_json(text: str) -> FeatureConfig:
    doc = json.loads(text)
    if not isinstance(doc, dict) or set(doc) != {"values"}:
        raise ValidationError("config document must be {'values': [[...]]}")
    return FeatureConfig(np.array(doc["values"], dtype=float))
