"""Derivative-free minimizers for the variational training loop.

All three methods share :class:`OptimizerSpec` and return an
:class:`OptimizationTrace`. Every objective call goes through a counting
wrapper that remembers the best point seen, so ``best_f`` is always the
minimum over everything evaluated, including calibration probes.

Termination, common to all methods: ``max_iterations`` is reached, or the
best value moved by less than ``f_tolerance`` over the last ``patience``
iterations. Each method also has its own convergence test (simplex size
for Nelder-Mead, final trust radius for COBYLA).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

__all__ = [
    "OptimizerKind",
    "OptimizerSpec",
    "OptimizationTrace",
    "minimize",
    "spsa_minimize",
    "spsa_step",
    "spsa_calibrate",
    "cobyla_minimize",
    "nelder_mead_minimize",
]

Objective = Callable[[np.ndarray], float]


class OptimizerKind(str, enum.Enum):
    SPSA = "SPSA"
    COBYLA = "COBYLA"
    NELDER_MEAD = "NelderMead"

    @classmethod
    def parse(cls, value) -> "OptimizerKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        for m in cls:
            if key == m.value.lower():
                return m
        raise ValueError(f"unknown optimizer {value!r}; expected SPSA, COBYLA or NelderMead")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OptimizerSpec:
    """Optimizer choice and its knobs.

    SPSA gains follow ``a_k = a / (A + k + 1) ** alpha`` and
    ``c_k = c / (k + 1) ** gamma``. Leaving ``a`` as ``None`` calibrates it
    from ``calibration_steps`` probe pairs so the first step moves each
    coordinate by about ``target_step`` radians. ``A`` defaults to a tenth of
    the iteration budget.
    """

    kind: OptimizerKind = OptimizerKind.SPSA
    max_iterations: int = 100
    f_tolerance: float = 1e-6
    x_tolerance: float = 1e-6
    patience: int = 10
    seed: int = 0
    # SPSA
    a: Optional[float] = None
    c: float = 0.1
    A: Optional[float] = None
    alpha: float = 0.602
    gamma: float = 0.101
    calibration_steps: int = 10
    target_step: float = 0.1
    # COBYLA
    rho_begin: float = 1.0
    rho_end: float = 1e-6
    # Nelder-Mead
    restart_step: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", OptimizerKind.parse(self.kind))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.f_tolerance <= 0 or self.x_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if not 0 < self.rho_end <= self.rho_begin:
            raise ValueError("need 0 < rho_end <= rho_begin")
        if self.c <= 0:
            raise ValueError("SPSA perturbation c must be positive")

    @property
    def stability_constant(self) -> float:
        return 0.1 * self.max_iterations if self.A is None else self.A

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["kind"] = self.kind.value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerSpec":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class OptimizationTrace:
    best_x: np.ndarray
    best_f: float
    evaluations: int
    iterations: int
    history: List[float] = field(default_factory=list)
    initial_f: float = math.nan
    radius: List[float] = field(default_factory=list)
    message: str = ""


class _Counted:
    """Objective wrapper: counts calls, rejects non-finite values, keeps the best."""

    def __init__(self, fn: Objective):
        self.fn = fn
        self.calls = 0
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf

    def __call__(self, x: np.ndarray) -> float:
        value = float(self.fn(np.array(x, dtype=np.float64)))
        self.calls += 1
        if not math.isfinite(value):
            raise FloatingPointError(f"objective returned {value} at evaluation {self.calls}")
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=np.float64)
        return value


def _stalled(history: List[float], spec: OptimizerSpec) -> bool:
    if len(history) <= spec.patience:
        return False
    return abs(history[-1 - spec.patience] - history[-1]) < spec.f_tolerance


def _start(objective: Objective, x0) -> tuple:
    x0 = np.array(x0, dtype=np.float64).reshape(-1)
    if x0.size == 0:
        raise ValueError("x0 is empty")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    f = objective if isinstance(objective, _Counted) else _Counted(objective)
    f0 = f(x0)
    return f, x0, f0


def _finish(f: _Counted, iterations: int, history: List[float], f0: float, message: str,
            radius: Optional[List[float]] = None) -> OptimizationTrace:
    return OptimizationTrace(
        best_x=f.best_x.copy(),
        best_f=f.best_f,
        evaluations=f.calls,
        iterations=iterations,
        history=history,
        initial_f=f0,
        radius=radius or [],
        message=message,
    )


# --------------------------------------------------------------------- SPSA


def _rademacher(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=d)


def spsa_calibrate(objective: Objective, x: np.ndarray, spec: OptimizerSpec,
                   rng: np.random.Generator) -> float:
    """Pick ``a`` so the first update has magnitude ``spec.target_step``.

    Uses ``2 * calibration_steps`` evaluations.
    """
    mags = []
    for _ in range(spec.calibration_steps):
        delta = _rademacher(rng, x.size)
        mags.append(abs(objective(x + spec.c * delta) - objective(x - spec.c * delta)))
    avg = float(np.mean(mags)) / (2.0 * spec.c) if mags else 0.0
    scale = (spec.stability_constant + 1.0) ** spec.alpha
    if avg <= 0.0:
        return spec.target_step * scale
    return spec.target_step * scale / avg


def spsa_step(objective: Objective, x: np.ndarray, k: int, spec: OptimizerSpec,
              rng: Optional[np.random.Generator] = None, a: Optional[float] = None) -> np.ndarray:
    """One SPSA update; exactly two objective evaluations."""
    if k < 0:
        raise ValueError("iteration index must be non-negative")
    a = spec.a if a is None else a
    if a is None:
        raise ValueError("SPSA step needs a gain 'a' (calibrate first or set spec.a)")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    x = np.asarray(x, dtype=np.float64)
    ak = a / (spec.stability_constant + k + 1.0) ** spec.alpha
    ck = spec.c / (k + 1.0) ** spec.gamma
    delta = _rademacher(rng, x.size)
    f_plus = float(objective(x + ck * delta))
    f_minus = float(objective(x - ck * delta))
    if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
        raise FloatingPointError("non-finite objective value during SPSA step")
    grad = (f_plus - f_minus) / (2.0 * ck * delta)
    return x - ak * grad


def spsa_minimize(objective: Objective, x0, spec: OptimizerSpec) -> OptimizationTrace:
    """SPSA with optional gain calibration.

    Evaluation count: 1 (start) + 2 * calibration_steps (if ``a`` is unset)
    + 2 per iteration + 1 (final iterate).
    """
    f, x, f0 = _start(objective, x0)
    rng = np.random.default_rng(spec.seed)
    a = spec.a if spec.a is not None else spsa_calibrate(f, x, spec, rng)
    history: List[float] = []
    message = "max_iterations reached"
    k = 0
    for k in range(spec.max_iterations):
        x = spsa_step(f, x, k, spec, rng=rng, a=a)
        history.append(f.best_f)
        if _stalled(history, spec):
            message = "best value stalled"
            break
    f(x)
    if history:
        history[-1] = f.best_f
    return _finish(f, k + 1, history, f0, message)


# ------------------------------------------------------------------- COBYLA


def _vertex_to_drop(lam, vsig, veta, edges, step, rho, improved):
    """Which vertex a trial point replaces, or None to discard it.

    ``lam`` holds the step's coordinates in the edge basis; replacing vertex
    j scales the simplex volume by ``|lam[j]|``. Without improvement the
    point only enters if it enlarges the simplex. Far vertices are preferred
    when dropping them keeps the simplex well shaped.
    """
    weight = np.abs(lam)
    best, jdrop = (0.0 if improved else 1.0), None
    for j, w in enumerate(weight):
        if w > best:
            best, jdrop = w, j
    sigbar = weight * vsig
    edgmax = 1.1 * rho
    far = None
    for j in range(lam.size):
        if sigbar[j] >= 0.25 * rho or sigbar[j] >= vsig[j]:
            dist = np.linalg.norm(step - edges[j]) if improved else veta[j]
            if dist > edgmax:
                far, edgmax = j, dist
    return jdrop if far is None else far


def cobyla_minimize(objective: Objective, x0, spec: OptimizerSpec) -> OptimizationTrace:
    """Powell's linear-interpolation trust-region method, without constraints.

    Keeps ``d + 1`` points, fits the linear model through them, and steps a
    distance ``rho`` down the model gradient from the best point. When a step
    buys little, either the simplex geometry is repaired or ``rho`` is
    halved, until ``rho`` reaches ``rho_end``. One iteration is one new
    evaluation (trial or geometry step); the ``d`` starting evaluations are
    not counted as iterations.
    """
    f, x0, f0 = _start(objective, x0)
    d = x0.size
    rho = spec.rho_begin
    pts = np.vstack([x0, x0 + rho * np.eye(d)])
    fv = np.array([f0] + [f(p) for p in pts[1:]])

    history: List[float] = []
    radius: List[float] = []
    iterations = 0
    poor = False
    message = "max_iterations reached"

    while iterations < spec.max_iterations:
        b = int(np.argmin(fv))
        if b:
            pts[[0, b]] = pts[[b, 0]]
            fv[[0, b]] = fv[[b, 0]]
        edges = pts[1:] - pts[0]
        try:
            inv = np.linalg.inv(edges)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(edges)
        grad = inv @ (fv[1:] - fv[0])
        # distance of each vertex from the opposite face, and from the pivot
        vsig = 1.0 / np.maximum(np.linalg.norm(inv, axis=0), 1e-300)
        veta = np.linalg.norm(edges, axis=1)
        acceptable = bool(np.all(vsig >= 0.25 * rho) and np.all(veta <= 2.1 * rho))

        if poor and not acceptable:
            if np.any(veta > 2.1 * rho):
                j = int(np.argmax(veta))
            else:
                j = int(np.argmin(vsig))
            normal = inv[:, j] * vsig[j]
            sign = -1.0 if normal @ grad > 0 else 1.0
            p = pts[0] + 0.5 * rho * sign * normal
            pts[j + 1], fv[j + 1] = p, f(p)
            poor = False
        elif poor:
            if rho <= spec.rho_end:
                message = "trust radius reached rho_end"
                break
            rho = 0.5 * rho
            if rho <= 1.5 * spec.rho_end:
                rho = spec.rho_end
            poor = False
            continue
        elif not np.any(grad):
            poor = True
            continue
        else:
            gnorm = float(np.linalg.norm(grad))
            step = -rho * grad / gnorm
            xt = pts[0] + step
            ft = f(xt)
            reduction = fv[0] - ft
            poor = reduction < 0.1 * rho * gnorm
            j = _vertex_to_drop(inv.T @ step, vsig, veta, edges, step, rho, reduction > 0)
            if j is not None:
                pts[j + 1], fv[j + 1] = xt, ft
        iterations += 1
        history.append(f.best_f)
        radius.append(rho)

        if _stalled(history, spec):
            message = "best value stalled"
            break
    return _finish(f, iterations, history, f0, message, radius)


# -------------------------------------------------------------- Nelder-Mead


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    sim = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        sim[i + 1, i] = x0[i] * 1.05 if x0[i] != 0 else 0.00025
    return sim


def nelder_mead_minimize(objective: Objective, x0, spec: OptimizerSpec) -> OptimizationTrace:
    """Downhill simplex with reflection 1, expansion 2, contraction 0.5, shrink 0.5.

    A simplex that collapses to lower rank is rebuilt around its best vertex
    with edge ``restart_step``. Evaluation count is at most
    ``(d + 1) + iterations * (d + 2) + restarts * d``.
    """
    f, x0, f0 = _start(objective, x0)
    d = x0.size
    sim = _initial_simplex(x0)
    fs = np.array([f0] + [f(p) for p in sim[1:]])
    history: List[float] = []
    message = "max_iterations reached"
    it = 0
    while it < spec.max_iterations:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        if (np.max(np.abs(fs[1:] - fs[0])) <= spec.f_tolerance
                and np.max(np.abs(sim[1:] - sim[0])) <= spec.x_tolerance):
            message = "simplex converged"
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = centroid + 0.5 * (worst - centroid)
                fc = f(xc)
                accept = fc < fs[-1]
            if accept:
                sim[-1], fs[-1] = xc, fc
            else:
                sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
                fs[1:] = [f(p) for p in sim[1:]]

        if np.linalg.matrix_rank(sim[1:] - sim[0]) < d:
            best = sim[int(np.argmin(fs))].copy()
            sim = np.vstack([best, best + spec.restart_step * np.eye(d)])
            fs = np.array([fs.min()] + [f(p) for p in sim[1:]])

        history.append(f.best_f)
        if _stalled(history, spec):
            message = "best value stalled"
            break
    return _finish(f, it, history, f0, message)


_DISPATCH = {
    OptimizerKind.SPSA: spsa_minimize,
    OptimizerKind.COBYLA: cobyla_minimize,
    OptimizerKind.NELDER_MEAD: nelder_mead_minimize,
}


def minimize(objective: Objective, x0, spec: OptimizerSpec) -> OptimizationTrace:
    """Minimize ``objective`` from ``x0`` with the method named in ``spec``."""
    return _DISPATCH[spec.kind](objective, x0, spec)

