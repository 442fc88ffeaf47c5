"""Variational quantum regression.

The model encodes a feature vector with a feature-map circuit, applies a
trainable ansatz, and reads out the all-Z parity ``<Z...Z>``; the prediction
is ``(<Z...Z> + 1) / 2`` so it always lies in ``[0, 1]``. Training minimizes
the mean squared error over the training set with one of the derivative-free
optimizers.

Encoded states do not depend on the trainable angles, so they are computed
once per dataset and reused for every cost evaluation.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .circuits import (
    AnsatzKind,
    AnsatzSpec,
    Entanglement,
    FeatureMapKind,
    FeatureMapSpec,
    build_ansatz,
    build_feature_map,
)
from .optimizers import OptimizationTrace, OptimizerSpec, minimize
from .sim import Circuit, Observable, evolve_batch, run_batch

__all__ = [
    "VQRegressor",
    "TrainReport",
    "mse_cost",
    "evaluate",
    "train",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "vqr-model/1"


@dataclass
class TrainReport:
    initial_cost: float
    final_cost: float
    trace: OptimizationTrace
    wall_time: float
    seed: int
    initial_parameters: np.ndarray = field(default_factory=lambda: np.empty(0))

    def summary(self) -> dict:
        return {
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "evaluations": self.trace.evaluations,
            "iterations": self.trace.iterations,
            "wall_time": self.wall_time,
            "seed": self.seed,
            "message": self.trace.message,
        }


class _Readout:
    """Feature map + ansatz + observable, evaluated on whole batches."""

    def __init__(self, feature_map: Circuit, ansatz: Circuit, observable: Observable):
        if feature_map.num_qubits != ansatz.num_qubits:
            raise ValueError("feature map and ansatz widths differ")
        if observable.num_qubits != ansatz.num_qubits:
            raise ValueError("observable width differs from the circuits")
        self.feature_map = feature_map
        self.ansatz = ansatz
        self.inputs = [p.name for p in feature_map.encoding_parameters]
        self.weights = [p.name for p in ansatz.trainable_parameters]
        self.signs = observable.eigenvalues()

    def encode(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != len(self.inputs):
            raise ValueError(
                f"feature map takes {len(self.inputs)} features, got {X.shape[1]}"
            )
        bindings = {name: X[:, i] for i, name in enumerate(self.inputs)}
        return run_batch(self.feature_map, bindings, X.shape[0])

    def expectations(self, encoded: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if theta.size != len(self.weights):
            raise ValueError(f"ansatz takes {len(self.weights)} parameters, got {theta.size}")
        bindings = dict(zip(self.weights, theta.tolist()))
        states = evolve_batch(encoded.copy(), self.ansatz, bindings)
        probs = states.real ** 2 + states.imag ** 2
        return np.clip(probs @ self.signs, -1.0, 1.0)

    def predict(self, encoded: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return 0.5 * (self.expectations(encoded, theta) + 1.0)


def mse_cost(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.size == 0:
        raise ValueError("cost over an empty set")
    if p.shape != t.shape:
        raise ValueError("predictions and targets differ in length")
    return float(np.mean((p - t) ** 2))


def evaluate(model: "VQRegressor", X, y) -> Tuple[float, float]:
    """(MSE, MAE) of ``model`` on a test set."""
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    pred = model.predict(X)
    err = pred - y
    return float(np.mean(err ** 2)), float(np.mean(np.abs(err)))


class VQRegressor(RegressorMixin, BaseEstimator):
    """Variational quantum regressor.

    Parameters
    ----------
    feature_map : {"ZFeatureMap", "ZZFeatureMap"}, default="ZFeatureMap"
    feature_map_reps : int, default=2
    feature_map_entanglement : str or None, default=None
        Only used by ZZFeatureMap; ``None`` means linear.
    ansatz : {"RealAmplitudes", "EfficientSU2", "TwoLocal", "PauliTwoDesign"}
    ansatz_reps : int, default=3
    entanglement : str or None, default="linear"
        Ansatz entanglement; ignored by PauliTwoDesign.
    optimizer : {"SPSA", "COBYLA", "NelderMead"} or OptimizerSpec, default="SPSA"
    max_iter : int, default=100
        Optimizer iteration budget; ignored when ``optimizer`` is a spec.
        Zero skips optimization and keeps the initial angles.
    num_qubits : int or None, default=None
        Qubit count. ``None`` uses one qubit per input feature; otherwise
        the input must have exactly this many features.
    random_state : int, default=0
        Seeds the initial angles, SPSA perturbations and PauliTwoDesign.

    Attributes
    ----------
    trained_parameters_ : ndarray
    train_report_ : TrainReport
    n_features_in_ : int
    """

    def __init__(
        self,
        feature_map="ZFeatureMap",
        feature_map_reps=2,
        feature_map_entanglement=None,
        ansatz="RealAmplitudes",
        ansatz_reps=3,
        entanglement="linear",
        optimizer="SPSA",
        max_iter=100,
        num_qubits=None,
        random_state=0,
    ):
        self.feature_map = feature_map
        self.feature_map_reps = feature_map_reps
        self.feature_map_entanglement = feature_map_entanglement
        self.ansatz = ansatz
        self.ansatz_reps = ansatz_reps
        self.entanglement = entanglement
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.num_qubits = num_qubits
        self.random_state = random_state

    # -- spec resolution -------------------------------------------------

    def _seed(self) -> int:
        return 0 if self.random_state is None else int(self.random_state)

    def feature_map_spec(self, n: int) -> FeatureMapSpec:
        kind = FeatureMapKind.parse(self.feature_map)
        ent = None
        if kind is FeatureMapKind.ZZ:
            ent = Entanglement.parse(self.feature_map_entanglement or "linear")
        return FeatureMapSpec(kind, n, self.feature_map_reps, ent)

    def ansatz_spec(self, n: int) -> AnsatzSpec:
        kind = AnsatzKind.parse(self.ansatz)
        ent = None
        if kind is not AnsatzKind.PAULI_TWO_DESIGN:
            ent = Entanglement.parse(self.entanglement or "linear")
        return AnsatzSpec(kind, n, self.ansatz_reps, ent, seed=self._seed())

    def optimizer_spec(self) -> OptimizerSpec:
        if isinstance(self.optimizer, OptimizerSpec):
            return self.optimizer
        return OptimizerSpec(self.optimizer, max_iterations=max(1, self.max_iter), seed=self._seed())

    def _width(self, n_features: int) -> int:
        if self.num_qubits is not None and self.num_qubits != n_features:
            raise ValueError(
                f"model has {self.num_qubits} qubits but data has {n_features} features"
            )
        return n_features

    def _readout(self, n: int) -> _Readout:
        return _Readout(
            build_feature_map(self.feature_map_spec(n)),
            build_ansatz(self.ansatz_spec(n)),
            Observable.all_z(n),
        )

    # -- estimator API ---------------------------------------------------

    def cost(self, theta, X, y) -> float:
        """Training MSE at angles ``theta``."""
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        readout = self._readout(self._width(X.shape[1]))
        return mse_cost(readout.predict(readout.encode(X), np.asarray(theta, float)), y)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        n = self._width(X.shape[1])
        readout = self._readout(n)
        spec = self.optimizer_spec()
        seed = self._seed()

        start = time.perf_counter()
        encoded = readout.encode(X)

        def objective(theta: np.ndarray) -> float:
            return mse_cost(readout.predict(encoded, theta), y)

        rng = np.random.default_rng(seed)
        theta0 = rng.uniform(-math.pi, math.pi, size=len(readout.weights))
        if self.max_iter == 0 and not isinstance(self.optimizer, OptimizerSpec):
            f0 = objective(theta0)
            trace = OptimizationTrace(theta0.copy(), f0, 1, 0, [], f0, message="no iterations requested")
        else:
            trace = minimize(objective, theta0, spec)
        elapsed = time.perf_counter() - start

        self.n_features_in_ = n
        self.trained_parameters_ = trace.best_x
        self.train_report_ = TrainReport(
            initial_cost=trace.initial_f,
            final_cost=trace.best_f,
            trace=trace,
            wall_time=elapsed,
            seed=seed,
            initial_parameters=theta0,
        )
        self._readout_cache = readout
        return self

    def _fitted_readout(self) -> _Readout:
        check_is_fitted(self, "trained_parameters_")
        cached = getattr(self, "_readout_cache", None)
        if cached is None:
            cached = self._readout_cache = self._readout(self.n_features_in_)
        return cached

    def predict(self, X):
        readout = self._fitted_readout()
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return readout.predict(readout.encode(X), self.trained_parameters_)

    def set_trained_parameters(self, theta, n_features: int) -> "VQRegressor":
        """Install angles without training (e.g. for inspection or loading)."""
        n = self._width(n_features)
        readout = self._readout(n)
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != len(readout.weights):
            raise ValueError(f"ansatz takes {len(readout.weights)} parameters, got {theta.size}")
        self.n_features_in_ = n
        self.trained_parameters_ = theta
        self._readout_cache = readout
        return self

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_readout_cache", None)
        return state


def train(feature_map: FeatureMapSpec, ansatz: AnsatzSpec, optimizer: OptimizerSpec,
          X, y, seed: int = 0) -> Tuple[VQRegressor, TrainReport]:
    """Build a regressor from explicit specs and fit it."""
    if feature_map.num_qubits != ansatz.num_qubits:
        raise ValueError(
            f"feature map has {feature_map.num_qubits} qubits, ansatz {ansatz.num_qubits}"
        )
    model = VQRegressor(
        feature_map=feature_map.kind.value,
        feature_map_reps=feature_map.reps,
        feature_map_entanglement=None if feature_map.entanglement is None else feature_map.entanglement.value,
        ansatz=ansatz.kind.value,
        ansatz_reps=ansatz.reps,
        entanglement=None if ansatz.entanglement is None else ansatz.entanglement.value,
        optimizer=optimizer,
        max_iter=optimizer.max_iterations,
        num_qubits=feature_map.num_qubits,
        random_state=seed,
    )
    model.fit(X, y)
    return model, model.train_report_


def save_model(model: VQRegressor, path) -> None:
    """Write a JSON record; angles are stored as hex floats for exact reload."""
    check_is_fitted(model, "trained_parameters_")
    n = model.n_features_in_
    record = {
        "format": MODEL_FORMAT,
        "feature_map": model.feature_map_spec(n).to_dict(),
        "ansatz": model.ansatz_spec(n).to_dict(),
        "optimizer": model.optimizer_spec().to_dict(),
        "observable": Observable.all_z(n).label,
        "seed": model._seed(),
        "parameters": [float(v).hex() for v in model.trained_parameters_],
    }
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def load_model(path) -> VQRegressor:
    record = json.loads(Path(path).read_text())
    if record.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} record")
    fm = FeatureMapSpec.from_dict(record["feature_map"])
    an = AnsatzSpec.from_dict(record["ansatz"])
    opt = OptimizerSpec.from_dict(record["optimizer"])
    if set(record["observable"]) != {"Z"}:
        raise ValueError("only the all-Z readout is supported")
    model = VQRegressor(
        feature_map=fm.kind.value,
        feature_map_reps=fm.reps,
        feature_map_entanglement=None if fm.entanglement is None else fm.entanglement.value,
        ansatz=an.kind.value,
        ansatz_reps=an.reps,
        entanglement=None if an.entanglement is None else an.entanglement.value,
        optimizer=opt,
        max_iter=opt.max_iterations,
        num_qubits=fm.num_qubits,
        random_state=record["seed"],
    )
    theta: List[float] = [float.fromhex(v) for v in record["parameters"]]
    return model.set_trained_parameters(theta, fm.num_qubits)
