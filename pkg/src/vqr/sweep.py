"""Exhaustive hyperparameter sweeps over feature map, ansatz and optimizer.

A sweep writes one JSON record per trial under ``<out>/trials/``, named by a
hash of the trial's canonical configuration. Re-running a sweep into the same
directory skips every trial whose record already exists, so an interrupted
sweep resumes where it stopped.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .circuits import (
    AnsatzKind,
    AnsatzSpec,
    Entanglement,
    FeatureMapKind,
    FeatureMapSpec,
)
from .data import NumericDataset, split
from .optimizers import OptimizerKind, OptimizerSpec
from .regressor import evaluate, train

logger = logging.getLogger(__name__)

__all__ = [
    "GridSpec",
    "TrialConfig",
    "TrialResult",
    "paper_grid",
    "enumerate_grid",
    "run_trial",
    "run_sweep",
    "load_results",
    "top_k",
    "render_table",
    "group_stats",
    "export",
    "read_results_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = [
    "trial_id", "ansatz", "ansatz_entanglement", "feature_map", "fm_entanglement",
    "optimizer", "qubits", "fm_reps", "ansatz_reps", "seed", "mse", "mae", "time_s", "status",
]
METRICS = ("mse", "mae", "time")
AXES = ("feature_map", "ansatz", "optimizer")
ALL_ENTANGLEMENTS = [e.value for e in Entanglement]


@dataclass(frozen=True)
class TrialConfig:
    feature_map: FeatureMapSpec
    ansatz: AnsatzSpec
    optimizer: OptimizerSpec
    seed: int = 0
    index: int = 0

    @property
    def qubits(self) -> int:
        return self.feature_map.num_qubits

    def canonical(self) -> dict:
        return {
            "feature_map": self.feature_map.to_dict(),
            "ansatz": self.ansatz.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "seed": self.seed,
        }

    @property
    def key(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_canonical(cls, d: dict, index: int = 0) -> "TrialConfig":
        return cls(
            FeatureMapSpec.from_dict(d["feature_map"]),
            AnsatzSpec.from_dict(d["ansatz"]),
            OptimizerSpec.from_dict(d["optimizer"]),
            int(d["seed"]),
            index,
        )


@dataclass
class TrialResult:
    trial_id: int
    config: TrialConfig
    mse: float = float("nan")
    mae: float = float("nan")
    time_s: float = float("nan")
    status: str = "ok"
    reason: str = ""
    train: dict = field(default_factory=dict)
    cached: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def ansatz_name(self) -> str:
        return self.config.ansatz.kind.value

    @property
    def feature_map_name(self) -> str:
        return self.config.feature_map.kind.value

    @property
    def optimizer_name(self) -> str:
        return self.config.optimizer.kind.value

    @property
    def entanglement(self) -> str:
        """Display entanglement: the ansatz's, else the feature map's."""
        for ent in (self.config.ansatz.entanglement, self.config.feature_map.entanglement):
            if ent is not None:
                return ent.value
        return "-"

    def status_text(self) -> str:
        return "ok" if self.ok else f"failed({self.reason})"

    def to_record(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "key": self.config.key,
            "config": self.config.canonical(),
            "mse": self.mse,
            "mae": self.mae,
            "time_s": self.time_s,
            "status": self.status,
            "reason": self.reason,
            "train": self.train,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrialResult":
        return cls(
            trial_id=int(rec["trial_id"]),
            config=TrialConfig.from_canonical(rec["config"], int(rec["trial_id"])),
            mse=float(rec["mse"]),
            mae=float(rec["mae"]),
            time_s=float(rec["time_s"]),
            status=rec["status"],
            reason=rec.get("reason", ""),
            train=rec.get("train", {}),
            cached=True,
        )

    def csv_row(self) -> List[str]:
        c = self.config
        fm_ent = c.feature_map.entanglement
        an_ent = c.ansatz.entanglement
        return [
            str(self.trial_id),
            c.ansatz.kind.value,
            "" if an_ent is None else an_ent.value,
            c.feature_map.kind.value,
            "" if fm_ent is None else fm_ent.value,
            c.optimizer.kind.value,
            str(c.qubits),
            str(c.feature_map.reps),
            str(c.ansatz.reps),
            str(c.seed),
            format(self.mse, ".17g"),
            format(self.mae, ".17g"),
            format(self.time_s, ".17g"),
            self.status_text(),
        ]


@dataclass
class GridSpec:
    """Candidate values per axis plus the settings shared by every trial.

    Entanglement axes only multiply kinds that take an entanglement
    strategy (ZZFeatureMap; every ansatz but PauliTwoDesign).
    ``optimizer_options`` are extra :class:`OptimizerSpec` fields.
    """

    feature_maps: List[str] = field(default_factory=lambda: ["ZFeatureMap", "ZZFeatureMap"])
    feature_map_entanglements: List[str] = field(default_factory=lambda: list(ALL_ENTANGLEMENTS))
    ansatzes: List[str] = field(default_factory=lambda: [a.value for a in AnsatzKind])
    ansatz_entanglements: List[str] = field(default_factory=lambda: list(ALL_ENTANGLEMENTS))
    optimizers: List[str] = field(default_factory=lambda: [o.value for o in OptimizerKind])
    feature_map_reps: List[int] = field(default_factory=lambda: [2])
    ansatz_reps: List[int] = field(default_factory=lambda: [3])
    qubits: int = 7
    max_iterations: int = 100
    optimizer_options: Dict[str, object] = field(default_factory=dict)
    repeats: int = 1
    n_train: int = 400
    n_test: int = 250
    base_seed: int = 0

    def __post_init__(self):
        for axis in ("feature_maps", "feature_map_entanglements", "ansatzes",
                     "ansatz_entanglements", "optimizers", "feature_map_reps", "ansatz_reps"):
            if not getattr(self, axis):
                raise ValueError(f"grid axis {axis!r} is empty")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        self.feature_maps = [FeatureMapKind.parse(v).value for v in self.feature_maps]
        self.ansatzes = [AnsatzKind.parse(v).value for v in self.ansatzes]
        self.optimizers = [OptimizerKind.parse(v).value for v in self.optimizers]
        self.feature_map_entanglements = [Entanglement.parse(v).value for v in self.feature_map_entanglements]
        self.ansatz_entanglements = [Entanglement.parse(v).value for v in self.ansatz_entanglements]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "GridSpec":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def paper_grid(qubits: int = 7) -> GridSpec:
    """All paper axes plus an ansatz-reps axis {1, 3}: 6 x 16 x 3 x 2 = 576 trials.

    The published sweep had 672 configurations; its factorization was not
    reported, and no natural reps axis on these kinds lands on 672.
    """
    return GridSpec(qubits=qubits, ansatz_reps=[1, 3])


def enumerate_grid(grid: GridSpec) -> List[TrialConfig]:
    """Cartesian product in axis order, entanglement suppressed where unused."""
    fm_variants = []
    for kind in grid.feature_maps:
        ents = [None] if kind == FeatureMapKind.Z.value else grid.feature_map_entanglements
        for ent, reps in itertools.product(ents, grid.feature_map_reps):
            fm_variants.append((kind, ent, reps))
    an_variants = []
    for kind in grid.ansatzes:
        ents = [None] if kind == AnsatzKind.PAULI_TWO_DESIGN.value else grid.ansatz_entanglements
        for ent, reps in itertools.product(ents, grid.ansatz_reps):
            an_variants.append((kind, ent, reps))

    configs = []
    combos = itertools.product(fm_variants, an_variants, grid.optimizers, range(grid.repeats))
    for index, (fm, an, opt, _) in enumerate(combos):
        seed = grid.base_seed + index
        options = dict(grid.optimizer_options)
        options.update(kind=opt, max_iterations=grid.max_iterations, seed=seed)
        configs.append(
            TrialConfig(
                FeatureMapSpec(fm[0], grid.qubits, fm[2], fm[1]),
                AnsatzSpec(an[0], grid.qubits, an[2], an[1], seed=seed),
                OptimizerSpec(**options),
                seed,
                index,
            )
        )
    return configs


def run_trial(config: TrialConfig, X_train, y_train, X_test, y_test) -> TrialResult:
    """Train and score one configuration; failures are captured, not raised."""
    try:
        if config.feature_map.num_qubits != config.ansatz.num_qubits:
            raise ValueError(
                f"qubit mismatch: feature map {config.feature_map.num_qubits}, "
                f"ansatz {config.ansatz.num_qubits}"
            )
        if X_train.shape[1] != config.qubits:
            raise ValueError(f"{config.qubits} qubits but {X_train.shape[1]} features")
        start = time.monotonic()
        model, report = train(config.feature_map, config.ansatz, config.optimizer,
                              X_train, y_train, seed=config.seed)
        mse, mae = evaluate(model, X_test, y_test)
        elapsed = time.monotonic() - start
        if not (np.isfinite(mse) and np.isfinite(mae)):
            raise FloatingPointError("non-finite test metrics")
        summary = report.summary()
        summary.pop("wall_time")
        return TrialResult(config.index, config, mse, mae, elapsed, "ok", "", summary)
    except Exception as exc:  # a failed trial must never abort the sweep
        return TrialResult(config.index, config, status="failed", reason=f"{type(exc).__name__}: {exc}")


def _record_path(out: Path, config: TrialConfig) -> Path:
    return out / "trials" / f"{config.index:05d}-{config.key}.json"


def _write_record(out: Path, result: TrialResult) -> None:
    path = _record_path(out, result.config)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(result.to_record(), indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def _prepare_out(out: Path) -> None:
    try:
        (out / "trials").mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def run_sweep(grid: GridSpec, dataset: NumericDataset, out_dir, parallelism: int = 1,
              configs: Optional[Sequence[TrialConfig]] = None) -> List[TrialResult]:
    """Run every configuration of ``grid`` (or the explicit ``configs``).

    The split is drawn once from ``grid.base_seed`` so all trials see the same
    rows. Records are written by this process as trials finish; results are
    returned in configuration order. Trials with an existing record are
    loaded instead of re-run and come back with ``cached=True``.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    out = Path(out_dir)
    _prepare_out(out)
    configs = list(enumerate_grid(grid) if configs is None else configs)
    (out / "grid.json").write_text(json.dumps(grid.to_dict(), indent=2, sort_keys=True) + "\n")

    (X_tr, y_tr), (X_te, y_te) = split(dataset, grid.n_train, grid.n_test, grid.base_seed)

    results: Dict[int, TrialResult] = {}
    pending = []
    for pos, cfg in enumerate(configs):
        path = _record_path(out, cfg)
        if path.is_file():
            results[pos] = TrialResult.from_record(json.loads(path.read_text()))
        else:
            pending.append((pos, cfg))
    logger.info("%d trials, %d cached, %d to run", len(configs), len(results), len(pending))

    def done(pos: int, res: TrialResult) -> None:
        _write_record(out, res)
        results[pos] = res
        logger.info("trial %d %s mse=%.6g", res.trial_id, res.status, res.mse)

    if parallelism == 1 or len(pending) <= 1:
        for pos, cfg in pending:
            done(pos, run_trial(cfg, X_tr, y_tr, X_te, y_te))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(run_trial, cfg, X_tr, y_tr, X_te, y_te): (pos, cfg)
                       for pos, cfg in pending}
            for fut in as_completed(futures):
                pos, cfg = futures[fut]
                try:
                    res = fut.result()
                except Exception as exc:
                    res = TrialResult(cfg.index, cfg, status="failed",
                                      reason=f"worker error: {type(exc).__name__}: {exc}")
                done(pos, res)
    ordered = [results[i] for i in range(len(configs))]
    write_csv(ordered, out / "results.csv")
    return ordered


def load_results(directory) -> List[TrialResult]:
    """Results from a sweep directory (trial records) or a results CSV."""
    path = Path(directory)
    if path.is_file():
        return read_results_csv(path)
    records = sorted((path / "trials").glob("*.json")) if (path / "trials").is_dir() else []
    if records:
        out = [TrialResult.from_record(json.loads(p.read_text())) for p in records]
        return sorted(out, key=lambda r: r.trial_id)
    if (path / "results.csv").is_file():
        return read_results_csv(path / "results.csv")
    return []


def _ok(results: Iterable[TrialResult]) -> List[TrialResult]:
    ok = [r for r in results if r.ok]
    if not ok:
        raise ValueError("no successful trials")
    return ok


def top_k(results: Sequence[TrialResult], metric: str = "mse", k: int = 5) -> List[TrialResult]:
    """Best ``k`` ok trials, ascending; ties go to lower MAE, then time, then order."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    attr = "time_s" if metric == "time" else metric
    indexed = list(enumerate(_ok(results)))
    indexed.sort(key=lambda p: (getattr(p[1], attr), p[1].mae, p[1].time_s, p[1].trial_id, p[0]))
    return [r for _, r in indexed[:max(k, 0)]]


def _fmt_time(t: float) -> str:
    return f"{t:.0f}s" if t >= 100 else f"{t:.2f}s"


def render_table(rows: Sequence[TrialResult]) -> str:
    header = ["Ansatz", "Optimizer", "Feature Map", "Entanglement", "MSE", "MAE", "Time"]
    body = [
        [r.ansatz_name, r.optimizer_name, r.feature_map_name, r.entanglement,
         f"{r.mse:.4f}", f"{r.mae:.4f}", _fmt_time(r.time_s)]
        for r in rows
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _axis_value(r: TrialResult, axis: str) -> str:
    if axis == "feature_map":
        return r.feature_map_name
    if axis == "ansatz":
        return r.ansatz_name
    return r.optimizer_name


def group_stats(results: Sequence[TrialResult], axis: str) -> List[dict]:
    """Per-group min/median/mean/max of MSE over ok trials, groups in first-seen order."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    groups: Dict[str, List[float]] = {}
    for r in _ok(results):
        groups.setdefault(_axis_value(r, axis), []).append(r.mse)
    return [
        {"axis": axis, "group": g, "count": len(v), "min": min(v),
         "median": statistics.median(v), "mean": statistics.fmean(v), "max": max(v)}
        for g, v in groups.items()
    ]


def write_csv(results: Sequence[TrialResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow(r.csv_row())


def read_results_csv(path) -> List[TrialResult]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            n = int(row["qubits"])
            cfg = TrialConfig(
                FeatureMapSpec(row["feature_map"], n, int(row["fm_reps"]), row["fm_entanglement"] or None),
                AnsatzSpec(row["ansatz"], n, int(row["ansatz_reps"]), row["ansatz_entanglement"] or None),
                OptimizerSpec(row["optimizer"]),
                int(row["seed"]),
                int(row["trial_id"]),
            )
            status = row["status"]
            reason = ""
            if status != "ok":
                reason = status[len("failed("):-1] if status.startswith("failed(") else status
                status = "failed"
            out.append(TrialResult(int(row["trial_id"]), cfg, float(row["mse"]), float(row["mae"]),
                                   float(row["time_s"]), status, reason, cached=True))
        return out


def _boxplot_svg(results: Sequence[TrialResult], axis: str, path: Path, log: List[str]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "vqr"
    import matplotlib.pyplot as plt

    groups: Dict[str, List[float]] = {}
    for r in results:
        groups.setdefault(_axis_value(r, axis), [])
        if r.ok:
            groups[_axis_value(r, axis)].append(r.mse)
    for g in [g for g, v in groups.items() if not v]:
        log.append(f"{axis}: group {g!r} has no successful trials; omitted from plot")
        del groups[g]
    if not groups:
        log.append(f"{axis}: nothing to plot")
        return
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(groups), 3.6))
    ax.boxplot(list(groups.values()))
    ax.set_xticks(range(1, len(groups) + 1), list(groups.keys()))
    ax.set_ylabel("MSE")
    ax.set_title(f"MSE by {axis.replace('_', ' ')}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def export(results: Sequence[TrialResult], out_dir, formats: Sequence[str] = ("csv", "svg")) -> List[Path]:
    """Write ``results.csv`` and/or one box plot per axis; returns written paths."""
    if not results:
        raise ValueError("nothing to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    if "csv" in formats:
        write_csv(results, out / "results.csv")
        written.append(out / "results.csv")
    if "svg" in formats:
        log: List[str] = []
        for axis in AXES:
            path = out / f"boxplot_{axis}.svg"
            _boxplot_svg(results, axis, path, log)
            if path.is_file():
                written.append(path)
        if log:
            (out / "plots.log").write_text("\n".join(log) + "\n")
            written.append(out / "plots.log")
    return written
