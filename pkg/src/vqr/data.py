"""Tabular ingestion and preprocessing.

The preparation order is fixed: categorical encoding, target min-max
normalization, PCA on the full matrix, per-column rescale to ``[0, pi/2]``.
The train/test split happens afterwards, at training time, from a seed.

The angle range is half a turn of the encoding phase ``P(2x)``: over
``[0, pi]`` the encodings of ``x`` and ``pi - x`` are complex conjugates, which
real-valued ansatzes such as RealAmplitudes cannot tell apart.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_array, check_is_fitted

logger = logging.getLogger(__name__)

__all__ = [
    "CsvFormatError",
    "RawDataset",
    "NumericDataset",
    "PcaBasis",
    "JacobiPCA",
    "AngleScaler",
    "load_csv",
    "encode_categoricals",
    "normalize_target",
    "jacobi_eigh",
    "fit_pca",
    "transform",
    "split",
    "split_indices",
    "prepare",
    "apply_provenance",
]

MAX_CATEGORIES = 64
_DATE = re.compile(r"^\d{1,4}[/-]\d{1,2}[/-]\d{1,4}$")


class CsvFormatError(ValueError):
    """Malformed input file; ``row`` is 1-based over data rows (header excluded)."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


Cell = Union[int, float, str]


@dataclass
class RawDataset:
    columns: List[str]
    rows: List[List[Cell]]
    target: str
    kinds: Dict[str, str]

    @property
    def attributes(self) -> List[str]:
        return [c for c in self.columns if c != self.target]

    def column(self, name: str) -> List[Cell]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _parse_number(text: str) -> Optional[Cell]:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _read_lines(path: Path) -> List[List[str]]:
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        # the public bike-sharing file ships a Latin-1 degree sign in its header
        logger.warning("%s is not valid UTF-8; decoding as Latin-1", path)
        text = raw.decode("latin-1")
    return list(csv.reader(text.splitlines()))


def load_csv(path, target: str) -> RawDataset:
    """Read a header-first, comma-separated file into typed cells.

    A column's kind (int, float, date, category) is fixed by its first data
    row; any later cell that does not fit is reported with its position.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    lines = [ln for ln in _read_lines(path) if ln]
    if not lines:
        raise CsvFormatError("file is empty")
    header = [h.strip() for h in lines[0]]
    if target not in header:
        raise CsvFormatError(f"target column {target!r} not in header {header}")
    body = lines[1:]
    if not body:
        raise CsvFormatError("file has a header but no data rows")

    kinds: Dict[str, str] = {}
    for j, name in enumerate(header):
        first = body[0][j].strip() if j < len(body[0]) else ""
        num = _parse_number(first)
        if isinstance(num, int):
            kinds[name] = "int"
        elif isinstance(num, float):
            kinds[name] = "float"
        elif _DATE.match(first):
            kinds[name] = "date"
        else:
            kinds[name] = "category"
    # a column that starts integral may still carry decimals further down
    for j, name in enumerate(header):
        if kinds[name] == "int" and any(
            len(r) == len(header) and isinstance(_parse_number(r[j].strip()), float) for r in body
        ):
            kinds[name] = "float"

    rows: List[List[Cell]] = []
    for i, line in enumerate(body, start=1):
        if len(line) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, found {len(line)}", row=i)
        out: List[Cell] = []
        for name, text in zip(header, line):
            text = text.strip()
            kind = kinds[name]
            if text == "":
                raise CsvFormatError("empty cell", row=i, column=name)
            if kind in ("int", "float"):
                value = _parse_number(text)
                if value is None:
                    raise CsvFormatError(f"cannot parse {text!r} as a number", row=i, column=name)
                out.append(value if kind == "int" else float(value))
            elif kind == "date" and not _DATE.match(text):
                raise CsvFormatError(f"cannot parse {text!r} as a date", row=i, column=name)
            else:
                out.append(text)
        rows.append(out)
    if kinds[target] not in ("int", "float"):
        raise CsvFormatError(f"target column {target!r} is not numeric")
    return RawDataset(header, rows, target, kinds)


def encode_categoricals(raw: RawDataset) -> Tuple[np.ndarray, List[str], Dict[str, Dict[str, int]]]:
    """Numeric feature matrix with date columns dropped.

    Categories get ordinal codes in order of first appearance. Returns the
    matrix, the kept column names and the per-column code tables.
    """
    names: List[str] = []
    cols: List[List[float]] = []
    mapping: Dict[str, Dict[str, int]] = {}
    for name in raw.attributes:
        kind = raw.kinds[name]
        values = raw.column(name)
        if kind == "date":
            continue
        if kind == "category":
            codes: Dict[str, int] = {}
            for v in values:
                if v not in codes:
                    codes[v] = len(codes)
            if len(codes) > MAX_CATEGORIES:
                raise ValueError(
                    f"column {name!r} has {len(codes)} categories (limit {MAX_CATEGORIES})"
                )
            mapping[name] = codes
            cols.append([float(codes[v]) for v in values])
        else:
            cols.append([float(v) for v in values])
        names.append(name)
    matrix = np.array(cols, dtype=np.float64).T if cols else np.empty((len(raw), 0))
    return matrix, names, mapping


def normalize_target(targets) -> Tuple[np.ndarray, Tuple[float, float]]:
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ValueError("no targets")
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise ValueError("target is constant; cannot normalize")
    return (y - lo) / (hi - lo), (lo, hi)


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol`` times the matrix norm. Returns eigenvalues in descending order
    and the matching eigenvectors as columns.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff  # theta would overflow; t ~ 1/(2 theta)
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (d, k), orthonormal columns
    explained_variance: np.ndarray
    total_variance: float

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaBasis":
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["components"], dtype=np.float64).reshape(len(d["mean"]), -1),
            np.asarray(d["explained_variance"], dtype=np.float64),
            float(d["total_variance"]),
        )


def fit_pca(matrix, k: int) -> PcaBasis:
    """Top-``k`` principal directions of the mean-centred sample covariance.

    Each component is signed so that its largest-magnitude entry is positive.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    m, d = x.shape
    if m < 2:
        raise ValueError("PCA needs at least two rows")
    if not 1 <= k <= d:
        raise ValueError(f"cannot keep {k} components of {d} columns")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (m - 1)
    values, vectors = jacobi_eigh(cov)
    values = np.maximum(values, 0.0)
    comps = vectors[:, :k].copy()
    for j in range(k):
        if comps[np.argmax(np.abs(comps[:, j])), j] < 0:
            comps[:, j] *= -1.0
    return PcaBasis(mean, comps, values[:k].copy(), float(values.sum()))


def transform(basis: PcaBasis, matrix) -> np.ndarray:
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != basis.mean.size:
        raise ValueError(f"expected {basis.mean.size} columns, got shape {x.shape}")
    return (x - basis.mean) @ basis.components


class JacobiPCA(TransformerMixin, BaseEstimator):
    """PCA transformer backed by :func:`fit_pca`.

    Parameters
    ----------
    n_components : int, default=7
        Number of leading components to keep.

    Attributes
    ----------
    basis_ : PcaBasis
    components_ : ndarray of shape (n_components, n_features)
        Rows are components, as in scikit-learn's PCA.
    """

    def __init__(self, n_components: int = 7):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.basis_ = fit_pca(X, self.n_components)
        self.n_features_in_ = X.shape[1]
        self.components_ = self.basis_.components.T
        self.mean_ = self.basis_.mean
        self.explained_variance_ = self.basis_.explained_variance
        self.explained_variance_ratio_ = self.basis_.explained_variance_ratio
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return transform(self.basis_, check_array(X, dtype=np.float64))

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=np.float64)
        return X @ self.basis_.components.T + self.basis_.mean


class AngleScaler(TransformerMixin, BaseEstimator):
    """Per-column min-max map onto ``feature_range`` (default ``[0, pi/2]``).

    Values outside the fitted range are clamped. A column that is constant
    during ``fit`` maps to the midpoint of the range.
    """

    def __init__(self, feature_range: Tuple[float, float] = (0.0, math.pi / 2)):
        self.feature_range = feature_range

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        lo, hi = self.feature_range
        if not hi > lo:
            raise ValueError("feature_range must be increasing")
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        lo, hi = self.feature_range
        span = self.data_max_ - self.data_min_
        safe = np.where(span > 0, span, 1.0)
        unit = np.clip((X - self.data_min_) / safe, 0.0, 1.0)
        unit = np.where(span > 0, unit, 0.5)
        return lo + (hi - lo) * unit


def make_feature_pipeline(n_components: int) -> Pipeline:
    return Pipeline([("pca", JacobiPCA(n_components)), ("scale", AngleScaler())])


def split_indices(m: int, n_train: int = 400, n_test: int = 250, seed: int = 0):
    if n_train < 1 or n_test < 1:
        raise ValueError("split sizes must be positive")
    if m < n_train + n_test:
        raise ValueError(f"need {n_train + n_test} rows, have {m}")
    perm = np.random.default_rng(seed).permutation(m)
    return perm[:n_train], perm[n_train:n_train + n_test]


def split(dataset: "NumericDataset", n_train: int = 400, n_test: int = 250, seed: int = 0):
    """Seeded shuffle split; returns ``((X_train, y_train), (X_test, y_test))``."""
    tr, te = split_indices(len(dataset), n_train, n_test, seed)
    return (dataset.X[tr], dataset.y[tr]), (dataset.X[te], dataset.y[te])


@dataclass
class NumericDataset:
    X: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)
    feature_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ValueError("feature rows and targets disagree")
        if np.isnan(self.X).any() or np.isnan(self.y).any():
            raise ValueError("dataset contains NaN")
        if self.y.size and (self.y.min() < 0 or self.y.max() > 1):
            raise ValueError("targets must lie in [0, 1]")
        if not self.feature_names:
            self.feature_names = [f"pc{i}" for i in range(self.X.shape[1])]

    def __len__(self) -> int:
        return self.y.size

    def save(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "features.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.feature_names)
            w.writerows([[repr(float(v)) for v in row] for row in self.X])
        with open(out / "targets.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["target"])
            w.writerows([[repr(float(v))] for v in self.y])
        (out / "provenance.json").write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "NumericDataset":
        src = Path(directory)
        for name in ("features.csv", "targets.csv"):
            if not (src / name).is_file():
                raise FileNotFoundError(f"{src / name} missing; run 'prepare' first")
        with open(src / "features.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        names, X = rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
        with open(src / "targets.csv", newline="") as fh:
            y = np.array([float(r[0]) for r in list(csv.reader(fh))[1:]], dtype=np.float64)
        prov_path = src / "provenance.json"
        prov = json.loads(prov_path.read_text()) if prov_path.is_file() else {}
        return cls(X.reshape(len(y), -1), y, prov, names)


def prepare(raw: RawDataset, n_components: int = 7) -> NumericDataset:
    """Encode, normalize the target, project with PCA and rescale to angles."""
    matrix, names, mapping = encode_categoricals(raw)
    y, (lo, hi) = normalize_target(raw.column(raw.target))
    if n_components > matrix.shape[1]:
        raise ValueError(f"cannot reduce {matrix.shape[1]} features to {n_components}")
    pipe = make_feature_pipeline(n_components).fit(matrix)
    X = pipe.transform(matrix)
    pca, scale = pipe.named_steps["pca"], pipe.named_steps["scale"]
    provenance = {
        "target": raw.target,
        "target_min": lo,
        "target_max": hi,
        "dropped_columns": [c for c in raw.attributes if raw.kinds[c] == "date"],
        "feature_columns": names,
        "categories": mapping,
        "pca": pca.basis_.to_dict(),
        "scale_min": scale.data_min_.tolist(),
        "scale_max": scale.data_max_.tolist(),
        "feature_range": list(scale.feature_range),
        "rows": len(raw),
        "attributes": len(raw.attributes),
    }
    return NumericDataset(X, y, provenance, [f"pc{i}" for i in range(n_components)])


def apply_provenance(provenance: dict, raw: RawDataset) -> np.ndarray:
    """Transform raw rows with a stored preparation record."""
    cols = []
    for name in provenance["feature_columns"]:
        values = raw.column(name)
        codes = provenance["categories"].get(name)
        if codes is None:
            cols.append([float(v) for v in values])
        else:
            unknown = sorted({v for v in values if v not in codes})
            if unknown:
                raise ValueError(f"unseen categories in {name!r}: {unknown[:5]}")
            cols.append([float(codes[v]) for v in values])
    matrix = np.array(cols, dtype=np.float64).T
    pca = JacobiPCA(len(provenance["pca"]["explained_variance"]))
    pca.basis_ = PcaBasis.from_dict(provenance["pca"])
    scale = AngleScaler(tuple(provenance["feature_range"]))
    scale.data_min_ = np.asarray(provenance["scale_min"], dtype=np.float64)
    scale.data_max_ = np.asarray(provenance["scale_max"], dtype=np.float64)
    scale.n_features_in_ = scale.data_min_.size
    return scale.transform(pca.transform(matrix))
