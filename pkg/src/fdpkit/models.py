"""Attacker score models, attack distributions, sampling and datasets.

Three model families:

* ``Classical`` -- score exp(w . x), the exponential-linear preference that
  reduces to a logit choice over targets. Captures a boundedly rational
  attacker; hard best-response is the large-|w| limit.
* ``Neural3`` -- a 3-layer tanh MLP (m -> 24 -> 12 -> 1) whose output is
  passed through exp, for attackers whose preferences are not linear in the
  features.
* ``RequirementRule`` -- a hard decision rule: the attacker checks a set of
  (feature, required value) pairs and attacks uniformly at random among the
  targets satisfying the most requirements.

The attack distribution of the score families is score-proportional and is
computed in log space with max-subtraction so large weights cannot overflow.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FdpError, DimensionError, ValidationError, FeatureConfig

__all__ = [
    "ScoreModel",
    "Classical",
    "Neural3",
    "RequirementRule",
    "AttackDataset",
    "DatasetGroup",
    "score",
    "attack_distribution",
    "sample_attacks",
    "log_likelihood",
    "model_to_json",
    "model_from_json",
    "dataset_to_csv",
    "dataset_from_csv",
]

HIDDEN1 = 24
HIDDEN2 = 12


class ScoreModel:
    """Interface shared by all attacker models."""

    m: int

    def score(self, x: np.ndarray) -> float:
        """Score of a single m-dimensional feature vector."""
        raise NotImplementedError

    def log_scores(self, X: np.ndarray) -> np.ndarray:
        """Log-scores for a stack of feature rows, shape (n, m) -> (n,).

        Not defined for the hard rule model, whose induced distribution is not
        score-proportional.
        """
        raise NotImplementedError

    def attack_distribution(self, config: FeatureConfig) -> np.ndarray:
        """Probability that each target is attacked under this model."""
        z = self.log_scores(config.values)
        z = z - z.max()
        p = np.exp(z)
        return p / p.sum()


@dataclass(frozen=True)
class Classical(ScoreModel):
    """Exponential-linear score: f(x) = exp(sum_k w_k x_k)."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionError(f"weights must be a vector, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise ValidationError("weights contain non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def score(self, x: np.ndarray) -> float:
        val = float(np.exp(np.dot(self.weights, x)))
        if not np.isfinite(val):
            raise FdpError("classical score overflowed; weights too large")
        return val

    def log_scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights


@dataclass(frozen=True)
class Neural3(ScoreModel):
    """3-layer tanh MLP score, f(x) = exp(MLP(x)), hidden sizes 24 and 12."""

    w1: np.ndarray  # (m, 24)
    b1: np.ndarray  # (24,)
    w2: np.ndarray  # (24, 12)
    b2: np.ndarray  # (12,)
    w3: np.ndarray  # (12,)
    b3: float

    def __post_init__(self) -> None:
        w1 = np.array(self.w1, dtype=float)
        b1 = np.array(self.b1, dtype=float)
        w2 = np.array(self.w2, dtype=float)
        b2 = np.array(self.b2, dtype=float)
        w3 = np.array(self.w3, dtype=float)
        if w1.ndim != 2 or w1.shape[1] != HIDDEN1:
            raise DimensionError(f"w1 must be (m, {HIDDEN1}), got {w1.shape}")
        if b1.shape != (HIDDEN1,):
            raise DimensionError(f"b1 must be ({HIDDEN1},), got {b1.shape}")
        if w2.shape != (HIDDEN1, HIDDEN2):
            raise DimensionError(f"w2 must be ({HIDDEN1}, {HIDDEN2}), got {w2.shape}")
        if b2.shape != (HIDDEN2,):
            raise DimensionError(f"b2 must be ({HIDDEN2},), got {b2.shape}")
        if w3.shape != (HIDDEN2,):
            raise DimensionError(f"w3 must be ({HIDDEN2},), got {w3.shape}")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2), ("w3", w3)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite entries")
            arr.flags.writeable = False
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "w3", w3)
        object.__setattr__(self, "b3", float(self.b3))

    @property
    def m(self) -> int:
        return self.w1.shape[0]

    @staticmethod
    def random(m: int, seed) -> "Neural3":
        """Parameters drawn i.i.d. uniform on [-0.5, 0.5]."""
        rng = np.random.default_rng(seed)
        return Neural3(
            w1=rng.uniform(-0.5, 0.5, (m, HIDDEN1)),
            b1=rng.uniform(-0.5, 0.5, HIDDEN1),
            w2=rng.uniform(-0.5, 0.5, (HIDDEN1, HIDDEN2)),
            b2=rng.uniform(-0.5, 0.5, HIDDEN2),
            w3=rng.uniform(-0.5, 0.5, HIDDEN2),
            b3=rng.uniform(-0.5, 0.5),
        )

    def forward(self, X: np.ndarray):
        """Full forward pass; returns hidden activations and the output."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        h1 = np.tanh(X @ self.w1 + self.b1)
        h2 = np.tanh(h1 @ self.w2 + self.b2)
        out = h2 @ self.w3 + self.b3
        return h1, h2, out

    def score(self, x: np.ndarray) -> float:
        _, _, out = self.forward(x)
        val = float(np.exp(out[0]))
        if not np.isfinite(val):
            raise FdpError("neural score overflowed")
        return val

    def log_scores(self, X: np.ndarray) -> np.ndarray:
        _, _, out = self.forward(X)
        return out

    def parameters(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, np.array([self.b3])]


@dataclass(frozen=True)
class RequirementRule(ScoreModel):
    """Hard requirement-counting rule used by the case-study attackers.

    ``requirements`` is a set of (feature index, required value) pairs. The
    score of a feature vector is the number of satisfied requirements; the
    induced attack distribution is uniform over the targets attaining the
    maximum count (all ties included) and zero elsewhere.
    """

    requirements: tuple[tuple[int, float], ...]
    #: matching tolerance for "the observed value equals the required one"
    tol: float = 1e-9

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "requirements",
            tuple((int(k), float(v)) for k, v in self.requirements),
        )
        if not self.requirements:
            raise ValidationError("requirement rule needs at least one requirement")
        ks = [k for k, _ in self.requirements]
        if len(set(ks)) != len(ks):
            raise ValidationError("requirement features must be distinct")

    @property
    def m(self) -> int:
        # Rules do not pin down m; they apply to any vector covering their
        # feature indices.
        return max(k for k, _ in self.requirements) + 1

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(
            sum(1 for k, v in self.requirements if abs(x[k] - v) <= self.tol)
        )

    def counts(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for k, v in self.requirements:
            out += np.abs(X[:, k] - v) <= self.tol
        return out

    def attack_distribution(self, config: FeatureConfig) -> np.ndarray:
        counts = self.counts(config.values)
        top = counts == counts.max()
        p = np.zeros(len(counts))
        p[top] = 1.0 / top.sum()
        return p


# -- module-level operation wrappers --------------------------------------


def score(model: ScoreModel, x_i: np.ndarray) -> float:
    return model.score(x_i)


def attack_distribution(model: ScoreModel, config: FeatureConfig) -> np.ndarray:
    return model.attack_distribution(config)


def sample_attacks(
    model: ScoreModel, config: FeatureConfig, count: int, seed
) -> np.ndarray:
    """Draw i.i.d. attacked-target indices; deterministic given the seed."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    p = model.attack_distribution(config)
    rng = np.random.default_rng(seed)
    return rng.choice(len(p), size=count, p=p)


# -- datasets --------------------------------------------------------------


@dataclass(frozen=True)
class DatasetGroup:
    """All attack observations recorded under one feature configuration."""

    config: FeatureConfig
    targets: np.ndarray  # integer indices, one per observation

    def __post_init__(self) -> None:
        t = np.array(self.targets, dtype=int)
        t.flags.writeable = False
        object.__setattr__(self, "targets", t)

    @property
    def size(self) -> int:
        return len(self.targets)

    def counts(self, n: int) -> np.ndarray:
        return np.bincount(self.targets, minlength=n).astype(float)


@dataclass(frozen=True)
class AttackDataset:
    """Attack observations grouped by feature configuration."""

    n: int
    m: int
    groups: tuple[DatasetGroup, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        for g, grp in enumerate(self.groups):
            if grp.config.values.shape != (self.n, self.m):
                raise DimensionError(
                    f"group {g} config shape {grp.config.values.shape} does not "
                    f"match dataset metadata {(self.n, self.m)}"
                )
            if grp.size and (grp.targets.min() < 0 or grp.targets.max() >= self.n):
                raise ValidationError(
                    f"group {g} records a target outside [0, {self.n})"
                )

    @property
    def total_observations(self) -> int:
        return sum(g.size for g in self.groups)


def log_likelihood(model: ScoreModel, dataset: AttackDataset) -> float:
    """Total log-likelihood of the dataset under a differentiable model.

    Per observation: log f(x_y) - log sum_i f(x_i), evaluated with
    max-subtraction. Each term is a log-probability, so the total is <= 0.
    """
    if not isinstance(model, (Classical, Neural3)):
        raise ValidationError("log-likelihood needs a Classical or Neural3 model")
    if dataset.total_observations == 0:
        raise ValidationError("dataset has no observations")
    total = 0.0
    for grp in dataset.groups:
        if grp.size == 0:
            continue
        z = model.log_scores(grp.config.values)
        zmax = z.max()
        lse = zmax + np.log(np.exp(z - zmax).sum())
        cnt = grp.counts(dataset.n)
        total += float(np.dot(cnt, z) - grp.size * lse)
    return total


# -- serialization ----------------------------------------------------------


def model_to_json(model: ScoreModel) -> str:
    if isinstance(model, Classical):
        doc = {"variant": "classical", "weights": model.weights.tolist()}
    elif isinstance(model, Neural3):
        doc = {
            "variant": "neural3",
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2.tolist(),
            "w3": model.w3.tolist(),
            "b3": model.b3,
        }
    elif isinstance(model, RequirementRule):
        doc = {
            "variant": "requirement_rule",
            "requirements": [[k, v] for k, v in model.requirements],
        }
    else:
        raise ValidationError(f"cannot serialize model type {type(model).__name__}")
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> ScoreModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "variant" not in doc:
        raise ValidationError("model document must be an object with a 'variant'")
    variant = doc["variant"]
    if variant == "classical":
        return Classical(np.array(doc["weights"], dtype=float))
    if variant == "neural3":
        return Neural3(
            w1=np.array(doc["w1"], dtype=float),
            b1=np.array(doc["b1"], dtype=float),
            w2=np.array(doc["w2"], dtype=float),
            b2=np.array(doc["b2"], dtype=float),
            w3=np.array(doc["w3"], dtype=float),
            b3=float(doc["b3"]),
        )
    if variant == "requirement_rule":
        return RequirementRule(
            tuple((int(k), float(v)) for k, v in doc["requirements"])
        )
    raise ValidationError(f"unknown model variant {variant!r}")


def dataset_to_csv(dataset: AttackDataset) -> tuple[str, str]:
    """Serialize to the (configs csv, observations csv) file pair.

    configs: config_id, target_id, feature_id, value
    observations: config_id, attacked_target
    """
    configs_buf = io.StringIO()
    cw = csv.writer(configs_buf, lineterminator="\n")
    cw.writerow(["config_id", "target_id", "feature_id", "value"])
    obs_buf = io.StringIO()
    ow = csv.writer(obs_buf, lineterminator="\n")
    ow.writerow(["config_id", "attacked_target"])
    for cid, grp in enumerate(dataset.groups):
        vals = grp.config.values
        for i in range(dataset.n):
            for k in range(dataset.m):
                cw.writerow([cid, i, k, repr(float(vals[i, k]))])
        for t in grp.targets:
            ow.writerow([cid, int(t)])
    return configs_buf.getvalue(), obs_buf.getvalue()


def dataset_from_csv(configs_text: str, observations_text: str) -> AttackDataset:
    configs: dict[int, dict[tuple[int, int], float]] = {}
    reader = csv.reader(io.StringIO(configs_text))
    header = next(reader, None)
    if header != ["config_id", "target_id", "feature_id", "value"]:
        raise ValidationError(f"unexpected configs header: {header}")
    for row in reader:
        if not row:
            continue
        try:
            cid, i, k, v = int(row[0]), int(row[1]), int(row[2]), float(row[3])
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"bad configs row {row!r}: {exc}") from exc
        configs.setdefault(cid, {})[(i, k)] = v
    if not configs:
        raise ValidationError("configs file holds no entries")
    n = 1 + max(i for entries in configs.values() for i, _ in entries)
    m = 1 + max(k for entries in configs.values() for _, k in entries)
    obs: dict[int, list[int]] = {cid: [] for cid in configs}
    reader = csv.reader(io.StringIO(observations_text))
    header = next(reader, None)
    if header != ["config_id", "attacked_target"]:
        raise ValidationError(f"unexpected observations header: {header}")
    for row in reader:
        if not row:
            continue
        try:
            cid, t = int(row[0]), int(row[1])
        except (ValueError, IndexError) as exc:
            raise ValidationError(
                f"bad observations row {row!r}: {exc}") from exc
        if cid not in obs:
            raise ValidationError(f"observation references unknown config {cid}")
        obs[cid].append(t)
    groups = []
    for cid in sorted(configs):
        vals = np.zeros((n, m))
        entries = configs[cid]
        if len(entries) != n * m:
            raise ValidationError(
                f"config {cid} defines {len(entries)} of {n * m} entries"
            )
        for (i, k), v in entries.items():
            vals[i, k] = v
        groups.append(
            DatasetGroup(FeatureConfig(vals), np.array(obs[cid], dtype=int))
        )
    return AttackDataset(n=n, m=m, groups=tuple(groups))
