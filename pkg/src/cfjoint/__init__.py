"""Predicting treatment outcomes from a small trial plus abundant control data.

The joint model fits a treatment predictor ``w_t`` and a control predictor
``w_c = w_t + w_delta`` together, regularizing ``w_delta`` so that the
historical control data informs the treatment predictor.
"""
from .baselines import (fit_benchmark, fit_control_only, fit_disjoint, fit_pooled,
                        fit_treatment_only)
from .closed_form import build_expanded_design, extract_models, fit_joint_ridge, solve_ridge
from .estimators import (ControlOnlyRidge, JointKernelRidge, JointLinear, JointLinearClassifier,
                         JointRidge, PooledRidge, TreatmentOnlyRidge, check_trial_data)
from .experiment import (ResultsTable, SplitConfig, grid_search, run_benchmark,
                         simulate_trial_split)
from .general import SolveConfig, fit_joint_general, gradient, objective_value
from .ingest import (DataError, Dataset, DatasetSchema, HashedTextConfig, Standardizer,
                     hash_text_features, load_csv, standardize)
from .kernel import KernelModel, KernelSpec, expanded_kernel, fit_kernel_joint, kernel_predict
from .metrics import MetricSet, accuracy, mean_effect_abs_diff, r2
from .model import (Condition, Hyperparams, JointLinearModel, Loss, LossSpec, Penalty,
                    TrialDataset)

__version__ = "0.1.0"

__all__ = [
    "fit_benchmark",
    "fit_control_only",
    "fit_disjoint",
    "fit_pooled",
    "fit_treatment_only",
    "build_expanded_design",
    "extract_models",
    "fit_joint_ridge",
    "solve_ridge",
    "ControlOnlyRidge",
    "JointKernelRidge",
    "JointLinear",
    "JointLinearClassifier",
    "JointRidge",
    "PooledRidge",
    "TreatmentOnlyRidge",
    "check_trial_data",
    "ResultsTable",
    "SplitConfig",
    "grid_search",
    "run_benchmark",
    "simulate_trial_split",
    "SolveConfig",
    "fit_joint_general",
    "gradient",
    "objective_value",
    "DataError",
    "Dataset",
    "DatasetSchema",
    "HashedTextConfig",
    "Standardizer",
    "hash_text_features",
    "load_csv",
    "standardize",
    "KernelModel",
    "KernelSpec",
    "expanded_kernel",
    "fit_kernel_joint",
    "kernel_predict",
    "MetricSet",
    "accuracy",
    "mean_effect_abs_diff",
    "r2",
    "Condition",
    "Hyperparams",
    "JointLinearModel",
    "Loss",
    "LossSpec",
    "Penalty",
    "TrialDataset",
]
