"""fdpkit: feature-deception modeling, attacker-preference learning, planning."""

__version__ = "0.1.0"

from .core import (
    FdpError,
    DimensionError,
    ValidationError,
    FeatureKind,
    LinearConstraint,
    FdpInstance,
    FeatureConfig,
    FeasibilityReport,
    deception_cost,
    check_feasibility,
    expected_loss,
    instance_to_json,
    instance_from_json,
)
from .models import (
    ScoreModel,
    Classical,
    Neural3,
    RequirementRule,
    AttackDataset,
    DatasetGroup,
    attack_distribution,
    sample_attacks,
    log_likelihood,
    model_to_json,
    model_from_json,
)

__all__ = [
    "__version__",
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
    "instance_to_json",
    "instance_from_json",
    "ScoreModel",
    "Classical",
    "Neural3",
    "RequirementRule",
    "AttackDataset",
    "DatasetGroup",
    "attack_distribution",
    "sample_attacks",
    "log_likelihood",
    "model_to_json",
    "model_from_json",
]
