"""Attribute-conditioned class Gaussians for zero-shot, transductive,
generalized, and few-shot recognition."""

from .data import (ConfigError, Dataset, LoadError, Split, SyntheticWorldSpec,
                   generate_splits, generate_synthetic, load_attributes, load_dataset,
                   load_labels, load_matrix, load_param_map, load_splits,
                   save_attributes_csv, save_dataset, save_labels, save_matrix,
                   save_param_map, save_splits)
from .em import EmConfig, EmResult, em_refine, gmm_log_likelihood
from .gaussians import (LOG_VARIANCE_FLOOR, VARIANCE_FLOOR, ClassGaussian, EmptyClassError,
                        LabeledBatch, few_shot_update, fit_mle, log_density,
                        log_density_rows, sample, standard_normal)
from .linalg import (DegenerateAttributesError, DimensionError, KernelSpec,
                     SingularPencilError, kernel_matrix, median_bandwidth, ridge_solve,
                     solve_sylvester, sym_eig)
from .metrics import (ExperimentReport, SplitRecord, aggregate_reports, harmonic_mean_gzsl,
                      instance_accuracy, make_report, mean_class_accuracy, report_to_dict,
                      report_to_json)
from .pipelines import (DataValidationError, GzslClassifier, cross_validate, cv_partitions,
                        derived_seed, gzsl_accuracies, run_few_shot, run_gzsl,
                        run_inductive, run_transductive, train_linear_ovr, zsl_classify)
from .regression import (HyperParams, ParamMap, fit_param_map, fit_param_map_linear,
                         predict_unseen, system_residuals)

__version__ = "0.1.0"

__all__ = [
    "ClassGaussian", "ConfigError", "Dataset", "DataValidationError",
    "DegenerateAttributesError", "DimensionError", "EmConfig", "EmptyClassError",
    "EmResult", "ExperimentReport", "GzslClassifier", "HyperParams", "KernelSpec",
    "LabeledBatch", "LoadError", "LOG_VARIANCE_FLOOR", "ParamMap", "SingularPencilError",
    "Split", "SplitRecord", "SyntheticWorldSpec", "VARIANCE_FLOOR",
    "aggregate_reports", "cross_validate", "cv_partitions", "derived_seed",
    "em_refine", "few_shot_update", "fit_mle", "fit_param_map", "fit_param_map_linear",
    "generate_splits", "generate_synthetic", "gmm_log_likelihood", "gzsl_accuracies",
    "harmonic_mean_gzsl", "instance_accuracy", "kernel_matrix", "load_attributes",
    "load_dataset", "load_labels", "load_matrix", "load_param_map", "load_splits",
    "log_density", "log_density_rows", "make_report", "mean_class_accuracy",
    "median_bandwidth", "predict_unseen", "report_to_dict", "report_to_json",
    "ridge_solve", "run_few_shot", "run_gzsl", "run_inductive", "run_transductive",
    "sample", "save_attributes_csv", "save_dataset", "save_labels", "save_matrix",
    "save_param_map", "save_splits", "solve_sylvester", "standard_normal", "sym_eig",
    "system_residuals", "train_linear_ovr", "zsl_classify",
]
