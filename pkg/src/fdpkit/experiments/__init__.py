from .generate import InstanceGenSpec, generate_binary_instance, generate_instance
from .casestudy import (FEATURES, PROFILES, CaseStudyReport, approx_weights,
                        attacker_rule, build_instance, optimal_plan,
                        published_plan, rule_outcome, run_case_study)
from .runs import (CurvePoint, EndToEndResult, PoisonRow, paired_t_statistic,
                   run_end_to_end, run_learning_curve,
                   run_poisoning_experiment, solution_gap, write_csv,
                   write_manifest)

__all__ = [
    "InstanceGenSpec", "generate_instance", "generate_binary_instance",
    "FEATURES", "PROFILES", "CaseStudyReport", "approx_weights",
    "attacker_rule", "build_instance", "optimal_plan", "published_plan",
    "rule_outcome", "run_case_study",
    "CurvePoint", "EndToEndResult", "PoisonRow", "paired_t_statistic",
    "run_end_to_end", "run_learning_curve", "run_poisoning_experiment",
    "solution_gap", "write_csv", "write_manifest",
]
