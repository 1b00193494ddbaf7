"""Benchmark pipelines: learning curves, end-to-end gaps, poisoning trials.

Replication r of a run with master seed s draws everything through
default_rng(SeedSequence([s, r])), so replications are independent,
order-free, and reproducible one at a time. Each pipeline accepts jobs > 1
to spread replications over a process pool; results are merged by
replication index, so the output is identical to the sequential run.
Aggregates are means and sample standard deviations over replications.

Result tables are lists of CurvePoint rows; write_csv renders them with the
fixed header (param, mean, std, n_reps) and write_manifest records the
run's inputs next to its outputs.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .. import __version__
from ..core import FdpError, FdpInstance, FeatureConfig, ValidationError, expected_loss
from ..learning import (MleHyper, closed_form_learn, design_identity_configs,
                        mle_learn, multiplicative_error, poison_dataset,
                        sample_complexity, tv_error)
from ..models import (AttackDataset, Classical, DatasetGroup, Neural3,
                      ScoreModel, sample_attacks)
from ..planning import (brute_force_plan, plan_gradient, plan_greedy,
                        plan_milp, plan_milp_bs)
from .generate import InstanceGenSpec, generate_binary_instance, generate_instance

__all__ = ["CurvePoint", "EndToEndResult", "PoisonRow", "run_learning_curve",
           "run_end_to_end", "run_poisoning_experiment", "solution_gap",
           "paired_t_statistic", "write_csv", "write_manifest"]


@dataclass(frozen=True)
class CurvePoint:
    """One aggregated row of a result table."""

    param: float
    mean: float
    std: float
    n_reps: int
    values: tuple = ()


def _aggregate(param: float, values: list[float]) -> CurvePoint:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return CurvePoint(param=float(param), mean=float(arr.mean()), std=std,
                      n_reps=len(arr), values=tuple(float(v) for v in arr))


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


def _map_replications(fn, replications: int, jobs: int) -> list:
    """Run fn(0..replications-1), optionally on a process pool.

    Results come back ordered by replication index either way, so callers
    see identical output regardless of jobs.
    """
    if jobs <= 1 or replications <= 1:
        return [fn(rep) for rep in range(replications)]
    with ProcessPoolExecutor(max_workers=min(jobs, replications)) as pool:
        return list(pool.map(fn, range(replications)))


def _random_configs(rng, count: int, n: int, m: int) -> list[FeatureConfig]:
    return [FeatureConfig(values=rng.uniform(0.0, 1.0, (n, m)))
            for _ in range(count)]


def _sampled_dataset(model: ScoreModel, configs, per_config: int,
                     rng) -> AttackDataset:
    """Multinomial attack counts per configuration, expanded to a dataset."""
    groups = []
    n = configs[0].values.shape[0]
    for cfg in configs:
        p = model.attack_distribution(cfg)
        counts = rng.multinomial(per_config, p)
        groups.append(DatasetGroup(config=cfg,
                                   targets=np.repeat(np.arange(n), counts)))
    return AttackDataset(n=n, m=configs[0].values.shape[1],
                         groups=tuple(groups))


def _single_sample_dataset(truth: ScoreModel, d: int, n: int, m: int,
                           rng) -> AttackDataset:
    cfgs = _random_configs(rng, d, n, m)
    return AttackDataset(n=n, m=m, groups=tuple(
        DatasetGroup(config=c, targets=sample_attacks(truth, c, 1, rng))
        for c in cfgs))


def _learning_rep(family: str, n: int, m: int, grid, seed: int,
                  test_configs: int, rep: int) -> list[float]:
    rng = _rep_rng(seed, rep)
    if family == "classical":
        truth: ScoreModel = Classical(weights=rng.uniform(-0.5, 0.5, m))
        train_configs = _random_configs(rng, m, n, m)
    else:
        truth = Neural3.random(m, rng)
        train_configs = []
    test = _random_configs(rng, test_configs, n, m)
    errors = []
    for d in grid:
        if family == "classical":
            data = _sampled_dataset(truth, train_configs, d, rng)
            learned = closed_form_learn(data).model
        else:
            data = _single_sample_dataset(truth, d, n, m, rng)
            learned = mle_learn(data, "neural3",
                                MleHyper(seed=int(rng.integers(2**31)))).model
        errors.append(tv_error(truth, learned, test))
    return errors


def run_learning_curve(family: str, n: int, m: int, sample_grid,
                       replications: int = 20, seed: int = 0, *,
                       test_configs: int = 2000,
                       jobs: int = 1) -> list[CurvePoint]:
    """Learning error versus sample count.

    classical: the closed-form estimator reads m random configurations with
    `grid` samples each. neural3: gradient ascent on `grid` single-sample
    configurations. Either way the error is the mean total-variation
    distance on a fresh random test set, one test set per replication so
    grid points are paired.
    """
    if family not in ("classical", "neural3"):
        raise ValidationError(f"unknown family {family!r}")
    grid = [int(d) for d in sample_grid]
    if not grid or min(grid) < 1:
        raise ValidationError("sample grid must hold positive counts")
    rows = _map_replications(
        partial(_learning_rep, family, n, m, grid, seed, test_configs),
        replications, jobs)
    return [_aggregate(d, [row[j] for row in rows])
            for j, d in enumerate(grid)]


_PLANNERS = {
    "milp": plan_milp,
    "milp_bs": plan_milp_bs,
    "greedy": plan_greedy,
    "gradient": plan_gradient,
}


def _make_instance(family: str, n: int, m: int, rng) -> FdpInstance:
    if family == "binary":
        return generate_binary_instance(n, m, rng.integers(2**31))
    return generate_instance(InstanceGenSpec(
        n=n, m=m, family="neural" if family == "neural3" else family,
        seed=int(rng.integers(2**31))))


@dataclass(frozen=True)
class EndToEndResult:
    points: list
    trials: list  # per (samples, replication) detail dicts


def _end_to_end_rep(family: str, n: int, m: int, grid, seed: int,
                    planner: str, reference: str, eps: float, eps_bs: float,
                    rep: int) -> list[dict]:
    rng = _rep_rng(seed, rep)
    classical = family != "neural3"
    instance = _make_instance(family, n, m, rng)
    if classical:
        truth: ScoreModel = Classical(weights=rng.uniform(-0.5, 0.5, m))
        train_configs = _random_configs(rng, m, n, m)
    else:
        truth = Neural3.random(m, rng)
        train_configs = []
    if reference == "brute":
        ref = brute_force_plan(instance, truth)
    elif classical:
        ref = plan_milp_bs(instance, truth, eps=eps, eps_bs=eps_bs)
    else:
        ref = plan_gradient(instance, truth)
    trials = []
    for d in grid:
        if classical:
            data = _sampled_dataset(truth, train_configs, d, rng)
            learned = closed_form_learn(data).model
        else:
            data = _single_sample_dataset(truth, d, n, m, rng)
            learned = mle_learn(data, "neural3",
                                MleHyper(seed=int(rng.integers(2**31)))).model
        if planner in ("milp", "milp_bs"):
            planned = _PLANNERS[planner](instance, learned, eps=eps)
        else:
            planned = _PLANNERS[planner](instance, learned)
        u_alg = expected_loss(instance, truth, planned.config)
        gap = solution_gap(u_alg, ref.expected_loss)
        trial = {"samples": d, "replication": rep, "u_alg": u_alg,
                 "u_ref": ref.expected_loss, "gap": gap,
                 "excess": u_alg - ref.expected_loss,
                 "eta": planned.bound}
        if classical and isinstance(learned, Classical):
            err = multiplicative_error(learned, truth)
            trial["score_error"] = err
            trial["certificate_valid"] = err <= 0.25
            if planned.bound is not None:
                trial["certificate"] = 8.0 * err + planned.bound
        trials.append(trial)
    return trials


def run_end_to_end(family: str, n: int, m: int, sample_grid,
                   replications: int = 20, seed: int = 0, *,
                   planner: str = "milp_bs", reference: str = "auto",
                   eps: float = 0.1, eps_bs: float = 1e-4,
                   jobs: int = 1) -> EndToEndResult:
    """Learn from samples, plan on the learned model, score on the truth.

    The gap of a trial is the planned configuration's excess expected loss
    over the reference optimum, relative when the reference loss is
    meaningfully positive and absolute otherwise. reference "auto" plans on
    the true model with the bisection MILP (classical families) or the
    gradient planner (neural); "brute" uses exhaustive search, which also
    enables the additive near-optimality certificate per trial:
    excess <= 8 * (multiplicative score error) + (planner slack), valid
    whenever the measured error is at most 1/4.
    """
    if family not in ("classical", "neural3", "binary"):
        raise ValidationError(f"unknown family {family!r}")
    if planner not in _PLANNERS:
        raise ValidationError(f"unknown planner {planner!r}")
    if reference not in ("auto", "brute"):
        raise ValidationError(f"unknown reference {reference!r}")
    grid = [int(d) for d in sample_grid]
    rows = _map_replications(
        partial(_end_to_end_rep, family, n, m, grid, seed,
                planner, reference, eps, eps_bs),
        replications, jobs)
    trials = [trial for row in rows for trial in row]
    points = [_aggregate(d, [row[j]["gap"] for row in rows])
              for j, d in enumerate(grid)]
    return EndToEndResult(points=points, trials=trials)


@dataclass(frozen=True)
class PoisonRow:
    gamma: float
    n_reps: int
    in_regime_reps: int
    within_bound_reps: int
    mean_error: float
    max_error: float


def _poison_rep(gammas, eps: float, n: int, m: int, seed: int,
                strategy: str, delta: float,
                rep: int) -> list[tuple[bool, float]]:
    rng = _rep_rng(seed, rep)
    truth = Classical(weights=rng.uniform(-0.5, 0.5, m))
    configs = design_identity_configs(n, m)
    rho = min(float(truth.attack_distribution(c).min()) for c in configs)
    threshold = eps * rho / (4.0 * m)
    per_config = int(math.ceil(sample_complexity(
        n=n, m=m, rho_hat=rho, alpha_hat=1.0, eps=eps,
        delta=delta).required_samples / m))
    data = _sampled_dataset(truth, configs, per_config, rng)
    out = []
    for g in gammas:
        poisoned = poison_dataset(data, g, strategy,
                                  seed=int(rng.integers(2**31)))
        learned = closed_form_learn(poisoned).model
        err = multiplicative_error(learned, truth)
        out.append((g <= threshold, err))
    return out


def run_poisoning_experiment(gammas, eps: float, n: int, m: int,
                             replications: int = 100, seed: int = 0, *,
                             strategy: str = "worst_case_pair",
                             delta: float = 0.05,
                             jobs: int = 1) -> list[PoisonRow]:
    """Closed-form learning under label poisoning.

    Each replication draws a truth model, samples the bound's required
    count of observations per identity-design configuration, poisons a
    fraction gamma of every group, relearns, and measures the worst-case
    multiplicative score error. gamma is in regime when it is at most
    eps * rho / (4 * alpha * m); the identity design pins alpha to 1, and
    rho is the true minimum attack probability, so the flag is exact. The
    expected outcome in regime is error at most 3 * eps.
    """
    if not (0 < eps < 1):
        raise ValidationError("eps must lie in (0, 1)")
    gammas = [float(g) for g in gammas]
    reps = _map_replications(
        partial(_poison_rep, gammas, eps, n, m, seed, strategy, delta),
        replications, jobs)
    rows = []
    for j, g in enumerate(gammas):
        pairs = [row[j] for row in reps]
        errs = [e for _, e in pairs]
        in_regime = [e for flag, e in pairs if flag]
        rows.append(PoisonRow(
            gamma=g, n_reps=replications, in_regime_reps=len(in_regime),
            within_bound_reps=sum(1 for e in in_regime if e <= 3.0 * eps),
            mean_error=float(np.mean(errs)), max_error=float(np.max(errs))))
    return rows


def solution_gap(u_alg: float, u_ref: float) -> float:
    """Excess loss of a plan over the reference, relative when scale allows."""
    excess = float(u_alg) - float(u_ref)
    if abs(u_ref) > 1e-12:
        return excess / abs(float(u_ref))
    return excess


def paired_t_statistic(a, b) -> float:
    """t statistic of the mean paired difference a - b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValidationError("need two equal-length vectors of 2+ pairs")
    d = a - b
    s = float(d.std(ddof=1))
    if s == 0.0:
        return 0.0 if float(d.mean()) == 0.0 else math.copysign(math.inf,
                                                                d.mean())
    return float(d.mean() / (s / math.sqrt(len(d))))


def write_csv(path, points) -> None:
    """Fixed-format result table: header (param, mean, std, n_reps)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("param,mean,std,n_reps\n")
        for p in points:
            fh.write(f"{p.param!r},{p.mean!r},{p.std!r},{p.n_reps}\n")


def write_manifest(path, **payload) -> None:
    """Reproducibility record: inputs, seeds, and the library version."""
    doc = {"fdpkit_version": __version__}
    doc.update(payload)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
