"""Variational quantum regression on an ideal statevector simulator."""

from .circuits import (
    AnsatzKind,
    AnsatzSpec,
    Entanglement,
    FeatureMapKind,
    FeatureMapSpec,
    basis_encode,
    build_ansatz,
    build_feature_map,
    entanglement_pairs,
)
from .data import (
    AngleScaler,
    CsvFormatError,
    JacobiPCA,
    NumericDataset,
    fit_pca,
    jacobi_eigh,
    load_csv,
    prepare,
)
from .optimizers import OptimizerKind, OptimizerSpec, OptimizationTrace, minimize
from .regressor import TrainReport, VQRegressor, evaluate, load_model, save_model, train
from .sim import Circuit, Gate, Observable, Parameter, Statevector, expectation, run_circuit, sample_counts
from .sweep import GridSpec, TrialConfig, TrialResult, enumerate_grid, group_stats, run_sweep, top_k

__version__ = "0.1.0"

__all__ = [
    "AngleScaler", "AnsatzKind", "AnsatzSpec", "Circuit", "CsvFormatError", "Entanglement",
    "FeatureMapKind", "FeatureMapSpec", "Gate", "GridSpec", "JacobiPCA", "NumericDataset",
    "Observable", "OptimizationTrace", "OptimizerKind", "OptimizerSpec", "Parameter",
    "Statevector", "TrainReport", "TrialConfig", "TrialResult", "VQRegressor", "basis_encode",
    "build_ansatz", "build_feature_map", "entanglement_pairs", "enumerate_grid", "evaluate",
    "expectation", "fit_pca", "group_stats", "jacobi_eigh", "load_csv", "load_model", "minimize",
    "prepare", "run_circuit", "run_sweep", "sample_counts", "save_model", "top_k", "train",
]
