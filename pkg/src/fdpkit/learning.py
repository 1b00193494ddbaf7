"""Learning attacker score models from attack observations.

Two learners:

* ``closed_form_learn`` solves the linear system A w = b, where row j compares
  a pair of targets (s, t) under the j-th feature configuration:
  a_j = x_s - x_t and b_j = ln(D(s) / D(t)) with D the (empirical) attack
  distribution. With exact distributions the solution recovers the classical
  weights exactly; with sampled data the error is controlled by the induced
  norm of A^{-1}, the minimum attack probability and the sample count.
* ``mle_learn`` runs adaptive-step gradient ascent (RMSProp) on the dataset
  log-likelihood and supports both the classical and the neural family.

Also here: the error metrics used by the experiments (total-variation distance
between induced attack distributions, mean parameter L1 distance, closed-form
multiplicative score error), the dataset-poisoning adversaries, and the
sample-complexity report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import FdpError, ValidationError, FeatureConfig
from .models import (
    AttackDataset,
    Classical,
    DatasetGroup,
    Neural3,
    ScoreModel,
    log_likelihood,
)

__all__ = [
    "SingularSystemError",
    "PairSelectionError",
    "FeatureDifferenceSystem",
    "SampleComplexityReport",
    "LearnResult",
    "MleHyper",
    "build_difference_system",
    "closed_form_from_distributions",
    "closed_form_learn",
    "design_identity_configs",
    "mle_learn",
    "log_likelihood_gradient",
    "tv_error",
    "param_l1_error",
    "multiplicative_error",
    "poison_dataset",
    "sample_complexity",
]

#: condition-number threshold above which a difference system is rejected
SINGULARITY_THRESHOLD = 1e10

#: residual tolerance promised by the closed-form solve
CF_RESIDUAL_TOL = 1e-8


class SingularSystemError(FdpError):
    """The feature-difference matrix is singular or numerically singular."""


class PairSelectionError(FdpError):
    """A chosen target pair has zero empirical attack frequency."""


@dataclass(frozen=True)
class FeatureDifferenceSystem:
    """The linear system A w = b built from paired attack-frequency ratios."""

    A: np.ndarray  # (m, m), entries in [-1, 1]
    b: np.ndarray  # (m,)
    pairs: tuple[tuple[int, int], ...]  # (s, t) used per row
    alpha_hat: float  # induced 1-norm of A^{-1}
    cond: float  # 1-norm condition estimate of A

    def solve(self) -> np.ndarray:
        w = np.linalg.solve(self.A, self.b)
        residual = float(np.max(np.abs(self.A @ w - self.b)))
        if residual > CF_RESIDUAL_TOL:
            raise SingularSystemError(
                f"linear solve residual {residual:.3e} exceeds {CF_RESIDUAL_TOL}"
            )
        return w


@dataclass(frozen=True)
class SampleComplexityReport:
    """Sample-size guidance for the closed-form learner, leading constant 1.

    required_samples = alpha^4 m^4 / (rho eps^2) * ln(n m / delta). The
    underlying guarantee is asymptotic, so the number is meaningful up to
    constant factors; rendered text says so.
    """

    n: int
    m: int
    rho_hat: float
    alpha_hat: float
    eps: float
    delta: float
    required_samples: float
    available_samples: Optional[int] = None

    def to_text(self) -> str:
        lines = [
            f"targets n={self.n}, features m={self.m}",
            f"min attack probability rho={self.rho_hat:.6g}",
            f"inverse-system norm alpha={self.alpha_hat:.6g}",
            f"accuracy eps={self.eps:.6g}, confidence delta={self.delta:.6g}",
            f"required samples (up to constant factors): {self.required_samples:.6g}",
        ]
        if self.available_samples is not None:
            lines.append(f"available samples: {self.available_samples}")
        return "\n".join(lines)


@dataclass(frozen=True)
class LearnResult:
    model: ScoreModel
    diagnostics: dict
    report: Optional[SampleComplexityReport] = None


def sample_complexity(
    n: int, m: int, rho_hat: float, alpha_hat: float, eps: float, delta: float,
    available_samples: Optional[int] = None,
) -> SampleComplexityReport:
    if rho_hat <= 0:
        raise ValidationError(f"rho must be positive, got {rho_hat}")
    if not (0 < eps < 1) or not (0 < delta < 1):
        raise ValidationError("eps and delta must lie in (0, 1)")
    required = (
        alpha_hat ** 4 * m ** 4 / (rho_hat * eps ** 2) * math.log(n * m / delta)
    )
    return SampleComplexityReport(
        n=n, m=m, rho_hat=rho_hat, alpha_hat=alpha_hat, eps=eps, delta=delta,
        required_samples=required, available_samples=available_samples,
    )


# -- closed-form estimator ---------------------------------------------------


def _default_pair(counts: np.ndarray) -> tuple[int, int]:
    """The two most-attacked targets; ties broken by lower index."""
    order = np.lexsort((np.arange(len(counts)), -counts))
    return int(order[0]), int(order[1])


def _describe_dependency(A: np.ndarray) -> str:
    # Rows that participate in the near-null direction of A^T are the ones
    # whose configurations fail to add independent information.
    _, s, _ = np.linalg.svd(A)
    u, s2, _ = np.linalg.svd(A.T)
    null_dir = u[:, -1]
    rows = [j for j, v in enumerate(null_dir) if abs(v) > 1e-3]
    return f"dependent configuration rows {rows} (singular values {s.round(6).tolist()})"


def build_difference_system(
    configs: Sequence[FeatureConfig],
    distributions: Sequence[np.ndarray],
    pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> FeatureDifferenceSystem:
    """Assemble A and b from configurations and attack distributions.

    ``distributions[j]`` may be exact or empirical; rows may use distinct
    target pairs. Raises if any chosen pair has a zero probability (the
    log-ratio would be infinite) or if A is numerically singular.
    """
    m = configs[0].m
    if len(configs) != m:
        raise ValidationError(
            f"need exactly m={m} configurations, got {len(configs)}"
        )
    if len(distributions) != m:
        raise ValidationError("need one distribution per configuration")
    if pairs is None:
        chosen = [_default_pair(np.asarray(d)) for d in distributions]
    else:
        if len(pairs) != m:
            raise ValidationError("need one (s, t) pair per configuration")
        chosen = [(int(s), int(t)) for s, t in pairs]
    A = np.zeros((m, m))
    b = np.zeros(m)
    for j, (cfg, dist, (s, t)) in enumerate(zip(configs, distributions, chosen)):
        dist = np.asarray(dist, dtype=float)
        if s == t:
            raise PairSelectionError(f"row {j}: pair targets must differ")
        if dist[s] <= 0 or dist[t] <= 0:
            raise PairSelectionError(
                f"row {j}: pair ({s}, {t}) has zero empirical frequency; "
                "collect more data, pick another pair, or enable smoothing"
            )
        A[j] = cfg.values[s] - cfg.values[t]
        b[j] = math.log(dist[s] / dist[t])
    cond = float(np.linalg.cond(A, 1))
    if not np.isfinite(cond) or cond > SINGULARITY_THRESHOLD:
        raise SingularSystemError(
            f"difference matrix is numerically singular "
            f"(cond ~ {cond:.3e} > {SINGULARITY_THRESHOLD:.0e}); "
            + _describe_dependency(A)
        )
    alpha_hat = float(np.abs(np.linalg.inv(A)).sum(axis=0).max())
    return FeatureDifferenceSystem(
        A=A, b=b, pairs=tuple(chosen), alpha_hat=alpha_hat, cond=cond
    )


def closed_form_from_distributions(
    configs: Sequence[FeatureConfig],
    distributions: Sequence[np.ndarray],
    pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> LearnResult:
    """Closed-form solve with caller-supplied (possibly exact) distributions."""
    system = build_difference_system(configs, distributions, pairs)
    w = system.solve()
    residual = float(np.max(np.abs(system.A @ w - system.b)))
    return LearnResult(
        model=Classical(w),
        diagnostics={
            "residual_inf": residual,
            "alpha_hat": system.alpha_hat,
            "cond": system.cond,
            "pairs": list(system.pairs),
        },
    )


def closed_form_learn(
    dataset: AttackDataset,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
    smoothing: bool = False,
) -> LearnResult:
    """Learn classical weights from empirical attack frequencies.

    Needs exactly m groups (one configuration per feature). ``smoothing``
    adds one pseudo-count per target before forming frequencies; it biases the
    log-ratios, so it stays off unless requested.
    """
    if len(dataset.groups) != dataset.m:
        raise ValidationError(
            f"closed-form learning needs exactly m={dataset.m} configuration "
            f"groups, got {len(dataset.groups)}"
        )
    configs = []
    dists = []
    rho_hat = math.inf
    for grp in dataset.groups:
        if grp.size == 0:
            raise ValidationError("every group needs at least one observation")
        cnt = grp.counts(dataset.n)
        if smoothing:
            cnt = cnt + 1.0
        freq = cnt / cnt.sum()
        configs.append(grp.config)
        dists.append(freq)
        positive = freq[freq > 0]
        rho_hat = min(rho_hat, float(positive.min()))
    result = closed_form_from_distributions(configs, dists, pairs)
    report = sample_complexity(
        n=dataset.n,
        m=dataset.m,
        rho_hat=rho_hat,
        alpha_hat=result.diagnostics["alpha_hat"],
        eps=0.1,
        delta=0.05,
        available_samples=dataset.total_observations,
    )
    return LearnResult(model=result.model, diagnostics=result.diagnostics, report=report)


def design_identity_configs(n: int, m: int) -> list[FeatureConfig]:
    """Configurations whose difference system is the identity matrix.

    In configuration j, targets 0 and 1 agree on every feature except j, where
    they observe 1 and 0. With the pair (0, 1) on every row, A = I, so the
    closed-form estimate reads the weights off the log-ratios directly and
    alpha = 1, the best possible conditioning.
    """
    if n < 2:
        raise ValidationError("identity design needs at least two targets")
    configs = []
    for j in range(m):
        vals = np.full((n, m), 0.5)
        vals[0, j] = 1.0
        vals[1, j] = 0.0
        configs.append(FeatureConfig(vals))
    return configs


# -- gradient learner --------------------------------------------------------


@dataclass(frozen=True)
class MleHyper:
    """Gradient-ascent hyperparameters. Defaults follow the usual protocol:
    learning rate 0.1, 20 epochs, 10 steps per epoch, batch size |D|/epochs."""

    learning_rate: float = 0.1
    epochs: int = 20
    steps_per_epoch: int = 10
    batch_size: Optional[int] = None
    seed: int = 0
    rmsprop_decay: float = 0.9
    rmsprop_eps: float = 1e-8


def _classical_group_grad(
    w: np.ndarray, X: np.ndarray, cnt: np.ndarray, total: float
) -> np.ndarray:
    z = X @ w
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    return X.T @ (cnt - total * p)


def _neural_group_grad(
    params: list[np.ndarray], X: np.ndarray, cnt: np.ndarray, total: float
) -> list[np.ndarray]:
    w1, b1, w2, b2, w3, b3 = params
    h1 = np.tanh(X @ w1 + b1)
    h2 = np.tanh(h1 @ w2 + b2)
    out = h2 @ w3 + b3[0]
    z = out - out.max()
    p = np.exp(z)
    p /= p.sum()
    dout = cnt - total * p
    dw3 = h2.T @ dout
    db3 = np.array([dout.sum()])
    dh2 = np.outer(dout, w3)
    dpre2 = dh2 * (1.0 - h2 ** 2)
    dw2 = h1.T @ dpre2
    db2 = dpre2.sum(axis=0)
    dh1 = dpre2 @ w2.T
    dpre1 = dh1 * (1.0 - h1 ** 2)
    dw1 = X.T @ dpre1
    db1 = dpre1.sum(axis=0)
    return [dw1, db1, dw2, db2, dw3, db3]


def log_likelihood_gradient(model: ScoreModel, dataset: AttackDataset):
    """Exact gradient of the dataset log-likelihood.

    Returns an (m,) array for the classical family, or the parameter list
    [w1, b1, w2, b2, w3, b3] of gradients for the neural family.
    """
    if isinstance(model, Classical):
        g = np.zeros(dataset.m)
        for grp in dataset.groups:
            if grp.size:
                g += _classical_group_grad(
                    model.weights, grp.config.values, grp.counts(dataset.n), grp.size
                )
        return g
    if isinstance(model, Neural3):
        params = [model.w1, model.b1, model.w2, model.b2, model.w3,
                  np.array([model.b3])]
        grads = [np.zeros_like(p) for p in params]
        for grp in dataset.groups:
            if grp.size == 0:
                continue
            gg = _neural_group_grad(
                params, grp.config.values, grp.counts(dataset.n), grp.size
            )
            for acc, g in zip(grads, gg):
                acc += g
        return grads
    raise ValidationError("gradients exist for Classical and Neural3 models only")


def _batch_counts(
    dataset: AttackDataset, flat_groups: np.ndarray, flat_targets: np.ndarray,
    batch_idx: np.ndarray,
) -> dict[int, np.ndarray]:
    out: dict[int, np.ndarray] = {}
    for g in np.unique(flat_groups[batch_idx]):
        sel = batch_idx[flat_groups[batch_idx] == g]
        out[int(g)] = np.bincount(flat_targets[sel], minlength=dataset.n).astype(float)
    return out


def mle_learn(
    dataset: AttackDataset,
    family: str,
    hyper: MleHyper = MleHyper(),
) -> LearnResult:
    """Maximum-likelihood learning by RMSProp gradient ascent.

    family is "classical" or "neural3". The returned model's full-data
    log-likelihood is never worse than the initialization's: parameters are
    checkpointed at every epoch boundary and the best checkpoint wins.
    Deterministic for a fixed seed.
    """
    family = family.lower()
    if family not in ("classical", "neural3"):
        raise ValidationError(f"unknown family {family!r}")
    if dataset.total_observations == 0:
        raise ValidationError("dataset has no observations")

    rng = np.random.default_rng(hyper.seed)
    if family == "classical":
        params = [np.zeros(dataset.m)]
        make = lambda ps: Classical(ps[0])
    else:
        init = Neural3.random(dataset.m, rng)
        params = [np.array(init.w1), np.array(init.b1), np.array(init.w2),
                  np.array(init.b2), np.array(init.w3), np.array([init.b3])]
        make = lambda ps: Neural3(ps[0], ps[1], ps[2], ps[3], ps[4], float(ps[5][0]))

    flat_groups = np.concatenate(
        [np.full(g.size, gi, dtype=int) for gi, g in enumerate(dataset.groups)]
    )
    flat_targets = np.concatenate([g.targets for g in dataset.groups])
    total = len(flat_targets)
    batch = hyper.batch_size or max(1, total // max(1, hyper.epochs))
    batch = min(batch, total)

    cache = [np.zeros_like(p) for p in params]
    best_model = make(params)
    init_ll = best_ll = log_likelihood(best_model, dataset)

    for _epoch in range(hyper.epochs):
        for _step in range(hyper.steps_per_epoch):
            idx = rng.choice(total, size=batch, replace=False)
            counts = _batch_counts(dataset, flat_groups, flat_targets, idx)
            if family == "classical":
                grad = np.zeros(dataset.m)
                for g, cnt in counts.items():
                    grad += _classical_group_grad(
                        params[0], dataset.groups[g].config.values, cnt, cnt.sum()
                    )
                grads = [grad]
            else:
                grads = [np.zeros_like(p) for p in params]
                for g, cnt in counts.items():
                    gg = _neural_group_grad(
                        params, dataset.groups[g].config.values, cnt, cnt.sum()
                    )
                    for acc, gr in zip(grads, gg):
                        acc += gr
            for p, g, c in zip(params, grads, cache):
                g = g / batch
                c *= hyper.rmsprop_decay
                c += (1.0 - hyper.rmsprop_decay) * g * g
                p += hyper.learning_rate * g / (np.sqrt(c) + hyper.rmsprop_eps)
            if not all(np.isfinite(p).all() for p in params):
                raise FdpError(
                    "training diverged to non-finite parameters "
                    f"(epoch {_epoch}, lr {hyper.learning_rate})"
                )
        model = make(params)
        ll = log_likelihood(model, dataset)
        if ll > best_ll:
            best_ll = ll
            best_model = model

    return LearnResult(
        model=best_model,
        diagnostics={
            "initial_log_likelihood": init_ll,
            "final_log_likelihood": best_ll,
            "epochs": hyper.epochs,
            "batch_size": batch,
            "family": family,
        },
    )


# -- error metrics -----------------------------------------------------------


def tv_error(
    model_a: ScoreModel, model_b: ScoreModel, test_configs: Sequence[FeatureConfig]
) -> float:
    """Mean total-variation distance between induced attack distributions."""
    if not test_configs:
        raise ValidationError("need at least one test configuration")
    acc = 0.0
    for cfg in test_configs:
        pa = model_a.attack_distribution(cfg)
        pb = model_b.attack_distribution(cfg)
        acc += 0.5 * float(np.abs(pa - pb).sum())
    return acc / len(test_configs)


def param_l1_error(model_a: ScoreModel, model_b: ScoreModel) -> float:
    """Mean absolute difference over aligned parameters (same family)."""
    if isinstance(model_a, Classical) and isinstance(model_b, Classical):
        if model_a.weights.shape != model_b.weights.shape:
            raise ValidationError("weight vectors have different lengths")
        return float(np.abs(model_a.weights - model_b.weights).mean())
    if isinstance(model_a, Neural3) and isinstance(model_b, Neural3):
        pa = np.concatenate([p.ravel() for p in model_a.parameters()])
        pb = np.concatenate([p.ravel() for p in model_b.parameters()])
        if pa.shape != pb.shape:
            raise ValidationError("parameter shapes differ")
        return float(np.abs(pa - pb).mean())
    raise ValidationError("parameter distance needs two models of one family")


def multiplicative_error(model_a: Classical, model_b: Classical) -> float:
    """Worst-case multiplicative score deviation over the feature box.

    For classical models, f_a(x)/f_b(x) = exp(sum_k d_k x_k) with
    d = w_a - w_b, so over x in [0,1]^m the supremum of the ratio is
    exp(sum_k max(d_k, 0)) and of its inverse exp(sum_k max(-d_k, 0)).
    Returns max(sup ratio, sup inverse ratio) - 1; exact, no sampling.
    """
    if not isinstance(model_a, Classical) or not isinstance(model_b, Classical):
        raise ValidationError("multiplicative error is defined for classical models")
    d = model_a.weights - model_b.weights
    up = math.exp(float(np.clip(d, 0, None).sum()))
    down = math.exp(float(np.clip(-d, 0, None).sum()))
    return max(up, down) - 1.0


# -- poisoning ---------------------------------------------------------------


def _normalize_strategy(strategy: str) -> str:
    s = strategy.replace("_", "").replace("-", "").lower()
    if s == "worstcasepair":
        return "worst_case_pair"
    if s == "randomflip":
        return "random_flip"
    raise ValidationError(f"unknown poisoning strategy {strategy!r}")


def poison_dataset(
    dataset: AttackDataset, gamma: float, strategy: str, seed
) -> AttackDataset:
    """Relabel exactly floor(gamma * group size) observations in every group.

    worst_case_pair: relabels observations of target t to target s, where
    (s, t) is the pair the closed-form estimator would pick (the two
    most-attacked targets), inflating the log-ratio the estimator relies on.
    random_flip: relabels uniformly over the other targets.
    """
    if not 0 <= gamma <= 1:
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
    strategy = _normalize_strategy(strategy)
    rng = np.random.default_rng(seed)
    groups = []
    for grp in dataset.groups:
        k = int(math.floor(gamma * grp.size))
        if k == 0:
            groups.append(grp)
            continue
        if dataset.n < 2:
            raise ValidationError("cannot relabel with a single target")
        targets = np.array(grp.targets)
        if strategy == "random_flip":
            idx = rng.choice(grp.size, size=k, replace=False)
            for j in idx:
                others = [t for t in range(dataset.n) if t != targets[j]]
                targets[j] = others[rng.integers(len(others))]
        else:
            s, t = _default_pair(grp.counts(dataset.n))
            from_t = np.flatnonzero(targets == t)
            take = min(k, len(from_t))
            chosen = rng.choice(from_t, size=take, replace=False)
            targets[chosen] = s
            if take < k:
                # Degenerate corner: fewer t-labels than the quota; keep the
                # changed-count contract by flipping other non-s labels.
                rest = np.flatnonzero(targets != s)
                extra = rng.choice(rest, size=k - take, replace=False)
                targets[extra] = s
        groups.append(DatasetGroup(grp.config, targets))
    return AttackDataset(n=dataset.n, m=dataset.m, groups=tuple(groups))
