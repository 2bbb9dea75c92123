"""Game-based behavior identification and transfer between two players."""

from __future__ import annotations

__version__ = "0.1.0"

from .behavior_data import (
    ATTRIBUTE_COLUMNS,
    CLASS_COLUMN,
    DATASET_COLUMNS,
    DOMAINS,
    AttributeId,
    BehaviorRecord,
    DataSet,
    PlayerId,
    SessionLog,
    StimulusContext,
    Violation,
    is_feasible,
    split,
    to_dataset,
    validate_session,
)
from .bayes import (
    BayesNet,
    Cpt,
    Dag,
    LearnConfig,
    accuracy,
    bic_score,
    class_posterior,
    classify,
    fit_cpts,
    learn_structure,
    markov_blanket,
)
from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .errors import ConfigError, DataValidationError
from .game_domain import (
    ConditionKey,
    PlayerProfile,
    Scenario,
    choose_behavior,
    default_scenario,
    run_session,
    sample_context,
    table1_profiles,
)
from .transfer_loop import (
    IdentificationResult,
    StimulusSchedule,
    TerminalReason,
    TransferConfig,
    TransferTrace,
    behavioral_curves,
    build_schedule,
    discriminative_attributes,
    divergence,
    nudge_profile,
    run_identification,
    run_transfer,
)

__all__ = [
    "ATTRIBUTE_COLUMNS",
    "CLASS_COLUMN",
    "DATASET_COLUMNS",
    "DOMAINS",
    "AttributeId",
    "BayesNet",
    "BehaviorRecord",
    "ConditionKey",
    "ConfigError",
    "Cpt",
    "Dag",
    "DataSet",
    "DataValidationError",
    "ExperimentConfig",
    "IdentificationResult",
    "LearnConfig",
    "PlayerId",
    "PlayerProfile",
    "Scenario",
    "SessionLog",
    "StimulusContext",
    "StimulusSchedule",
    "TerminalReason",
    "TransferConfig",
    "TransferTrace",
    "Violation",
    "accuracy",
    "behavioral_curves",
    "bic_score",
    "build_schedule",
    "choose_behavior",
    "class_posterior",
    "classify",
    "default_scenario",
    "discriminative_attributes",
    "divergence",
    "fit_cpts",
    "is_feasible",
    "learn_structure",
    "load_config",
    "markov_blanket",
    "nudge_profile",
    "parse_config",
    "run_identification",
    "run_session",
    "run_transfer",
    "sample_context",
    "serialize_config",
    "split",
    "table1_profiles",
    "to_dataset",
    "validate_session",
]
