"""Oracle-less key recovery attacks and their scoring."""

from .forest import ConstantModel, RandomForest, SingleClassError, train_change_model, train_rf
from .recon import ReconModel
from .redundancy import count_redundant, pin_key, redundancy_attack
from .report import ABSTAIN, REPORT_COLUMNS, AttackReport, score
from .sail import (
    LabeledKey,
    SailModels,
    TrainingCorpus,
    gen_training_data,
    sail_attack,
    train_sail,
    type_decode_attack,
)
from .sweep import SweepModel, key_features, key_window, sweep_attack

__all__ = [
    "ABSTAIN", "REPORT_COLUMNS", "AttackReport", "ConstantModel", "LabeledKey", "RandomForest", "ReconModel",
    "SailModels", "SingleClassError", "SweepModel", "TrainingCorpus", "count_redundant", "gen_training_data",
    "key_features", "key_window", "pin_key", "redundancy_attack", "sail_attack", "score", "sweep_attack",
    "train_change_model", "train_rf", "train_sail", "type_decode_attack",
]
