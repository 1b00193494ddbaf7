"""Command-line front end for the deception toolkit.

Subcommands cover the whole pipeline: generate an instance, simulate
attacks, learn a score model, plan a feature configuration, evaluate a
configuration, run batch experiments, and reproduce the network case
study. File formats are the library's JSON and CSV schemas, so outputs of
one stage feed the next unmodified (simulate -> learn -> plan -> eval).

Exit codes: 0 success, 1 usage error, 2 data or solver error. Every run
that writes files also writes a manifest (inputs, flags, seed, library
version) next to them. FDPKIT_LOG in {error, info, debug} sets verbosity
on the diagnostic stream; results go to stdout or to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .core import (FdpError, FeatureConfig, check_feasibility,
                   config_from_json, deception_cost, expected_loss,
                   instance_from_json, instance_to_json)
from .learning import (MleHyper, closed_form_learn, design_identity_configs,
                       mle_learn)
from .models import (AttackDataset, DatasetGroup, dataset_from_csv,
                     dataset_to_csv, model_from_json, model_to_json,
                     sample_attacks)
from .planning import (brute_force_plan, plan_exact_discrete_cost,
                       plan_gradient, plan_greedy, plan_milp, plan_milp_bs,
                       plan_result_to_json, plan_unconstrained)
from .experiments import (InstanceGenSpec, generate_binary_instance,
                          generate_instance, run_case_study, run_end_to_end,
                          run_learning_curve, run_poisoning_experiment,
                          write_csv, write_manifest)

log = logging.getLogger("fdpkit")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}


class UsageError(Exception):
    """Bad invocation: unknown flag, missing argument, invalid choice."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here
    # reserves 2 for data/solver failures, so route through an exception
    # and let main() turn it into exit code 1.
    def error(self, message):
        raise UsageError(message)


def _setup_logging() -> None:
    name = os.environ.get("FDPKIT_LOG", "error").lower()
    if name not in _LOG_LEVELS:
        raise UsageError(
            f"FDPKIT_LOG must be one of {sorted(_LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=_LOG_LEVELS[name],
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _emit(text: str, output) -> None:
    if output:
        _write_text(output, text)
    else:
        print(text)


def _manifest(args, argv, inputs, outputs, at=None) -> None:
    """Reproducibility record next to the first output file."""
    if not outputs:
        return
    write_manifest((at or outputs[0]) + ".manifest.json",
                   command=args.command, argv=list(argv),
                   seed=getattr(args, "seed", None),
                   inputs=list(inputs), outputs=list(outputs))


# -- subcommand handlers ----------------------------------------------------


def _cmd_generate(args, argv) -> int:
    if args.family == "binary":
        instance = generate_binary_instance(args.n, args.m, args.seed)
    else:
        instance = generate_instance(InstanceGenSpec(
            n=args.n, m=args.m, family=args.family, seed=args.seed))
    log.info("generated %s instance: n=%d m=%d budget=%g",
             args.family, instance.n, instance.m, instance.budget)
    _emit(instance_to_json(instance), args.output)
    if args.output:
        _manifest(args, argv, [], [args.output])
    return 0


def _cmd_simulate(args, argv) -> int:
    model = model_from_json(_read_text(args.model))
    rng = np.random.default_rng(args.seed)
    if args.design == "identity":
        configs = design_identity_configs(args.n, model.m)
    else:
        if args.configs < 1:
            raise UsageError("--configs must be >= 1 for --design random")
        configs = [FeatureConfig(values=rng.uniform(0.0, 1.0,
                                                    (args.n, model.m)))
                   for _ in range(args.configs)]
    groups = []
    for config in configs:
        targets = sample_attacks(model, config, args.samples, rng)
        groups.append(DatasetGroup(config=config, targets=targets))
    dataset = AttackDataset(n=args.n, m=model.m, groups=tuple(groups))
    configs_text, obs_text = dataset_to_csv(dataset)
    paths = [args.output + ".configs.csv", args.output + ".observations.csv"]
    _write_text(paths[0], configs_text)
    _write_text(paths[1], obs_text)
    log.info("simulated %d groups x %d samples -> %s", len(configs),
             args.samples, args.output)
    _manifest(args, argv, [args.model], paths, at=args.output)
    return 0


def _read_dataset(prefix: str) -> AttackDataset:
    return dataset_from_csv(_read_text(prefix + ".configs.csv"),
                            _read_text(prefix + ".observations.csv"))


def _cmd_learn(args, argv) -> int:
    dataset = _read_dataset(args.input)
    if args.alg == "cf":
        result = closed_form_learn(dataset, smoothing=args.smoothing)
    else:
        result = mle_learn(dataset, args.family, MleHyper(seed=args.seed))
    for key, value in sorted(result.diagnostics.items()):
        log.info("learn %s: %s", key, value)
    if result.report is not None:
        log.info("sample complexity:\n%s", result.report.to_text())
    _emit(model_to_json(result.model), args.output)
    inputs = [args.input + ".configs.csv", args.input + ".observations.csv"]
    if args.output:
        _manifest(args, argv, inputs, [args.output])
    return 0


_PLAN_ALGS = {
    "milp": lambda inst, model, args: plan_milp(inst, model, eps=args.eps),
    "milp-bs": lambda inst, model, args: plan_milp_bs(
        inst, model, eps=args.eps, eps_bs=args.eps_bs),
    "greedy": lambda inst, model, args: plan_greedy(inst, model),
    "gradient": lambda inst, model, args: plan_gradient(inst, model),
    "unconstrained": lambda inst, model, args: plan_unconstrained(inst, model),
    "exact-discrete": lambda inst, model, args: plan_exact_discrete_cost(
        inst, model),
    "brute": lambda inst, model, args: brute_force_plan(inst, model),
}


def _cmd_plan(args, argv) -> int:
    instance = instance_from_json(_read_text(args.input))
    model = model_from_json(_read_text(args.model))
    result = _PLAN_ALGS[args.alg](instance, model, args)
    log.info("plan %s: expected loss %.6g, bound %s", args.alg,
             result.expected_loss, result.bound)
    _emit(plan_result_to_json(result), args.output)
    if args.output:
        _manifest(args, argv, [args.input, args.model], [args.output])
    return 0


def _load_config(path: str) -> FeatureConfig:
    """Accept a bare configuration or a plan result holding one."""
    text = _read_text(path)
    doc = json.loads(text)
    if isinstance(doc, dict) and "config" in doc:
        return FeatureConfig(values=np.array(doc["config"], dtype=float))
    return config_from_json(text)


def _cmd_eval(args, argv) -> int:
    instance = instance_from_json(_read_text(args.input))
    model = model_from_json(_read_text(args.model))
    config = _load_config(args.config)
    report = check_feasibility(instance, config)
    doc = {
        "expected_loss": expected_loss(instance, model, config),
        "cost": deception_cost(instance, config),
        "budget": instance.budget if np.isfinite(instance.budget) else None,
        "feasible": report.feasible,
        "within_budget": report.within_budget,
        "entry_violations": [[i, k, v] for i, k, v in report.entry_violations],
        "constraint_violations": list(report.constraint_violations),
    }
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.output)
    if args.output:
        _manifest(args, argv, [args.input, args.model, args.config],
                  [args.output])
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") \
            from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") \
            from exc


def _cmd_experiment(args, argv) -> int:
    if args.kind == "learning":
        points = run_learning_curve(
            args.family, args.n, args.m, _int_list(args.samples),
            replications=args.reps, seed=args.seed, jobs=args.jobs)
        write_csv(args.output, points)
    elif args.kind == "endtoend":
        result = run_end_to_end(
            args.family, args.n, args.m, _int_list(args.samples),
            replications=args.reps, seed=args.seed,
            planner=args.planner.replace("-", "_"),
            reference=args.reference, eps=args.eps, eps_bs=args.eps_bs,
            jobs=args.jobs)
        write_csv(args.output, result.points)
        if args.trials:
            _write_trials(args.trials, result.trials)
    else:
        rows = run_poisoning_experiment(
            _float_list(args.gammas), args.eps, args.n, args.m,
            replications=args.reps, seed=args.seed, strategy=args.strategy,
            delta=args.delta, jobs=args.jobs)
        _write_poison(args.output, rows)
    log.info("experiment %s -> %s", args.kind, args.output)
    outputs = [args.output]
    if args.kind == "endtoend" and args.trials:
        outputs.append(args.trials)
    _manifest(args, argv, [], outputs)
    return 0


def _write_trials(path: str, trials) -> None:
    cols = ["samples", "replication", "u_alg", "u_ref", "gap", "excess",
            "eta", "score_error", "certificate_valid", "certificate"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for t in trials:
            cells = [t.get(c) for c in cols]
            fh.write(",".join("" if v is None else repr(v)
                              for v in cells) + "\n")


def _write_poison(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,n_reps,in_regime_reps,within_bound_reps,"
                 "mean_error,max_error\n")
        for r in rows:
            fh.write(f"{r.gamma!r},{r.n_reps},{r.in_regime_reps},"
                     f"{r.within_bound_reps},{r.mean_error!r},"
                     f"{r.max_error!r}\n")


def _cmd_casestudy(args, argv) -> int:
    report = run_case_study(args.profile, approx_weight=args.weight,
                            approx_eps=args.eps)
    _emit(report.to_text(), args.output)
    if args.output:
        _manifest(args, argv, [], [args.output])
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdpkit",
                     description="Feature deception planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("generate", help="draw a random instance")
    p.add_argument("--family", required=True,
                   choices=["classical", "neural", "binary"])
    p.add_argument("-n", type=int, required=True, help="number of targets")
    p.add_argument("-m", type=int, required=True, help="number of features")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="instance JSON path (default stdout)")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("simulate", help="sample attacks from a score model")
    p.add_argument("--model", required=True, help="score model JSON")
    p.add_argument("-n", type=int, required=True, help="number of targets")
    p.add_argument("--design", choices=["identity", "random"],
                   default="identity",
                   help="identity: one config per feature; random: uniform")
    p.add_argument("--configs", type=int, default=0,
                   help="random design: number of configurations")
    p.add_argument("--samples", type=int, required=True,
                   help="attacks per configuration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True,
                   help="dataset path prefix (.configs.csv, .observations.csv)")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("learn", help="fit a score model to a dataset")
    p.add_argument("-i", "--input", required=True,
                   help="dataset path prefix from simulate")
    p.add_argument("--alg", choices=["cf", "mle"], default="cf")
    p.add_argument("--family", choices=["classical", "neural3"],
                   default="classical", help="model family for --alg mle")
    p.add_argument("--smoothing", action="store_true",
                   help="cf: add one pseudo-count per target")
    p.add_argument("--seed", type=int, default=0, help="mle initialization")
    p.add_argument("-o", "--output", help="model JSON path (default stdout)")
    p.set_defaults(handler=_cmd_learn)

    p = sub.add_parser("plan", help="optimize the observed configuration")
    p.add_argument("-i", "--input", required=True, help="instance JSON")
    p.add_argument("--model", required=True, help="score model JSON")
    p.add_argument("--alg", choices=sorted(_PLAN_ALGS), default="milp-bs")
    p.add_argument("--eps", type=float, default=0.1,
                   help="score approximation accuracy")
    p.add_argument("--eps-bs", type=float, default=1e-4,
                   help="bisection stopping width (milp-bs)")
    p.add_argument("-o", "--output", help="plan JSON path (default stdout)")
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("eval", help="score a configuration against a model")
    p.add_argument("-i", "--input", required=True, help="instance JSON")
    p.add_argument("--model", required=True, help="score model JSON")
    p.add_argument("--config", required=True,
                   help="configuration JSON, or a plan result holding one")
    p.add_argument("-o", "--output", help="report JSON path (default stdout)")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("experiment", help="batch replications to CSV")
    p.add_argument("--kind", required=True,
                   choices=["learning", "endtoend", "poison"])
    p.add_argument("--family", default="classical",
                   choices=["classical", "neural3", "binary"])
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--samples", default="1000",
                   help="comma-separated sample grid (learning, endtoend)")
    p.add_argument("--gammas", default="0.001",
                   help="comma-separated poisoned fractions (poison)")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--eps-bs", type=float, default=1e-4)
    p.add_argument("--planner", default="milp-bs",
                   choices=["milp", "milp-bs", "greedy", "gradient"])
    p.add_argument("--reference", default="auto", choices=["auto", "brute"])
    p.add_argument("--strategy", default="worst_case_pair",
                   choices=["worst_case_pair", "random_flip"])
    p.add_argument("--delta", type=float, default=0.05,
                   help="poison: failure probability in the sample bound")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes; results merged by replication")
    p.add_argument("--trials", help="endtoend: also write per-trial CSV here")
    p.add_argument("-o", "--output", required=True, help="results CSV path")
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("casestudy", help="network deception walkthrough")
    p.add_argument("--profile", required=True, choices=["apt", "botnet"])
    p.add_argument("--weight", type=float, default=10.0,
                   help="logit scale for the fitted approximation")
    p.add_argument("--eps", type=float, default=0.1,
                   help="planner accuracy for the fitted approximation")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    p.set_defaults(handler=_cmd_casestudy)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        _setup_logging()
        args = parser.parse_args(argv)
        return args.handler(args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(f"run '{parser.prog} --help' for options", file=sys.stderr)
        return 1
    except FdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
