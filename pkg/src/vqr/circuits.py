"""Feature maps, ansatzes and entanglement layouts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .sim import Circuit, Parameter, ParameterExpression, Statevector

__all__ = [
    "Entanglement",
    "FeatureMapKind",
    "AnsatzKind",
    "FeatureMapSpec",
    "AnsatzSpec",
    "entanglement_pairs",
    "build_z_feature_map",
    "build_zz_feature_map",
    "build_feature_map",
    "build_ansatz",
    "basis_encode",
]


class _Named(str, enum.Enum):
    @classmethod
    def parse(cls, value):
        """Accept the enum, its value, or its name in any case."""
        if isinstance(value, cls):
            return value
        def norm(s):
            return str(s).strip().lower().replace("-", "").replace("_", "")

        key = norm(value)
        for member in cls:
            if key in (norm(member.value), norm(member.name)):
                return member
        choices = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown {cls.__name__} {value!r}; expected one of {choices}")

    def __str__(self) -> str:
        return self.value


class Entanglement(_Named):
    FULL = "full"
    LINEAR = "linear"
    CIRCULAR = "circular"
    PAIRWISE = "pairwise"
    SCA = "sca"


class FeatureMapKind(_Named):
    Z = "ZFeatureMap"
    ZZ = "ZZFeatureMap"


class AnsatzKind(_Named):
    EFFICIENT_SU2 = "EfficientSU2"
    TWO_LOCAL = "TwoLocal"
    REAL_AMPLITUDES = "RealAmplitudes"
    PAULI_TWO_DESIGN = "PauliTwoDesign"


Pair = Tuple[int, int]


def entanglement_pairs(n: int, strategy, rep: int = 0) -> List[Pair]:
    """Ordered (control, target) pairs for repetition ``rep`` (0-based).

    ``circular`` puts the wrap-around pair ``(n-1, 0)`` ahead of the linear
    chain. ``sca`` starts from the circular list, moves the wrap pair forward
    by ``rep`` positions and swaps control/target on odd repetitions.
    """
    if n < 2:
        raise ValueError(f"entanglement needs at least 2 qubits, got {n}")
    if rep < 0:
        raise ValueError("repetition index must be non-negative")
    strategy = Entanglement.parse(strategy)
    linear = [(i, i + 1) for i in range(n - 1)]
    if strategy is Entanglement.FULL:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if strategy is Entanglement.LINEAR:
        return linear
    if strategy is Entanglement.CIRCULAR:
        return [(n - 1, 0)] + linear
    if strategy is Entanglement.PAIRWISE:
        return [(i, i + 1) for i in range(rep % 2, n - 1, 2)]
    # sca
    pos = rep % n
    pairs = linear[:pos] + [(n - 1, 0)] + linear[pos:]
    if rep % 2:
        pairs = [(t, c) for c, t in pairs]
    return pairs


@dataclass(frozen=True)
class FeatureMapSpec:
    kind: FeatureMapKind = FeatureMapKind.Z
    num_qubits: int = 2
    reps: int = 2
    entanglement: Optional[Entanglement] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureMapKind.parse(self.kind))
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be at least 1")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.kind is FeatureMapKind.Z:
            if self.entanglement is not None:
                raise ValueError("ZFeatureMap takes no entanglement strategy")
        else:
            if self.num_qubits < 2:
                raise ValueError("ZZFeatureMap needs at least 2 qubits")
            ent = Entanglement.LINEAR if self.entanglement is None else self.entanglement
            object.__setattr__(self, "entanglement", Entanglement.parse(ent))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "num_qubits": self.num_qubits,
            "reps": self.reps,
            "entanglement": None if self.entanglement is None else self.entanglement.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMapSpec":
        return cls(d["kind"], int(d["num_qubits"]), int(d.get("reps", 2)), d.get("entanglement"))


@dataclass(frozen=True)
class AnsatzSpec:
    """Trainable circuit description.

    ``rotation`` and ``entangler`` only matter for TwoLocal; ``seed`` only
    for PauliTwoDesign.
    """

    kind: AnsatzKind = AnsatzKind.REAL_AMPLITUDES
    num_qubits: int = 2
    reps: int = 3
    entanglement: Optional[Entanglement] = None
    seed: int = 0
    rotation: str = "RY"
    entangler: str = "CX"

    def __post_init__(self):
        object.__setattr__(self, "kind", AnsatzKind.parse(self.kind))
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be at least 1")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.kind is AnsatzKind.PAULI_TWO_DESIGN:
            if self.entanglement is not None:
                raise ValueError("PauliTwoDesign takes no entanglement strategy")
        else:
            ent = Entanglement.LINEAR if self.entanglement is None else self.entanglement
            object.__setattr__(self, "entanglement", Entanglement.parse(ent))
        if self.rotation not in ("RX", "RY", "RZ"):
            raise ValueError(f"rotation must be RX, RY or RZ, got {self.rotation!r}")
        if self.entangler not in ("CX", "CZ"):
            raise ValueError(f"entangler must be CX or CZ, got {self.entangler!r}")

    @property
    def num_parameters(self) -> int:
        per_layer = 2 if self.kind is AnsatzKind.EFFICIENT_SU2 else 1
        return per_layer * self.num_qubits * (self.reps + 1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "num_qubits": self.num_qubits,
            "reps": self.reps,
            "entanglement": None if self.entanglement is None else self.entanglement.value,
            "seed": self.seed,
            "rotation": self.rotation,
            "entangler": self.entangler,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzSpec":
        return cls(
            d["kind"],
            int(d["num_qubits"]),
            int(d.get("reps", 3)),
            d.get("entanglement"),
            int(d.get("seed", 0)),
            d.get("rotation", "RY"),
            d.get("entangler", "CX"),
        )


def _inputs(n: int) -> List[Parameter]:
    return [Parameter(f"x[{i}]", "encoding") for i in range(n)]


def _double(p: Parameter) -> ParameterExpression:
    return ParameterExpression((p,), lambda x: 2.0 * x, f"2*{p.name}")


def _zz_phase(a: Parameter, b: Parameter) -> ParameterExpression:
    return ParameterExpression(
        (a, b),
        lambda x, y: 2.0 * (math.pi - x) * (math.pi - y),
        f"2*(pi-{a.name})*(pi-{b.name})",
    )


def _single_layer(circ: Circuit, x: List[Parameter]) -> None:
    for q in range(circ.num_qubits):
        circ.add("H", q)
    for q, p in enumerate(x):
        circ.add("P", q, angle=_double(p))


def build_z_feature_map(spec: FeatureMapSpec) -> Circuit:
    """Per repetition: H on every qubit, then P(2 x_i) on qubit i."""
    if spec.kind is not FeatureMapKind.Z:
        raise ValueError(f"expected a ZFeatureMap spec, got {spec.kind}")
    x = _inputs(spec.num_qubits)
    circ = Circuit(spec.num_qubits)
    for _ in range(spec.reps):
        _single_layer(circ, x)
    return circ


def build_zz_feature_map(spec: FeatureMapSpec) -> Circuit:
    """Z layer plus CX . P(2(pi - x_i)(pi - x_j)) . CX on each entangled pair."""
    if spec.kind is not FeatureMapKind.ZZ:
        raise ValueError(f"expected a ZZFeatureMap spec, got {spec.kind}")
    n = spec.num_qubits
    x = _inputs(n)
    circ = Circuit(n)
    for r in range(spec.reps):
        _single_layer(circ, x)
        for i, j in entanglement_pairs(n, spec.entanglement, r):
            circ.add("CX", i, j)
            circ.add("P", j, angle=_zz_phase(x[i], x[j]))
            circ.add("CX", i, j)
    return circ


def build_feature_map(spec: FeatureMapSpec) -> Circuit:
    if spec.kind is FeatureMapKind.Z:
        return build_z_feature_map(spec)
    return build_zz_feature_map(spec)


class _Theta:
    def __init__(self):
        self.count = 0

    def __call__(self) -> Parameter:
        p = Parameter(f"theta[{self.count}]", "trainable")
        self.count += 1
        return p


def _pauli_two_design(spec: AnsatzSpec) -> Circuit:
    n = spec.num_qubits
    circ = Circuit(n)
    theta = _Theta()
    rng = np.random.default_rng(spec.seed)
    for q in range(n):
        circ.add("RY", q, angle=math.pi / 4)

    def rotations():
        axes = rng.choice(["RX", "RY", "RZ"], size=n)
        for q in range(n):
            circ.add(str(axes[q]), q, angle=theta())

    for r in range(spec.reps):
        rotations()
        for i in range(r % 2, n - 1, 2):
            circ.add("CZ", i, i + 1)
    rotations()
    return circ


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    """Alternating rotation and entangling layers with a closing rotation layer."""
    if spec.kind is AnsatzKind.PAULI_TWO_DESIGN:
        return _pauli_two_design(spec)

    n = spec.num_qubits
    if spec.kind is AnsatzKind.EFFICIENT_SU2:
        rotations, entangler = ("RY", "RZ"), "CX"
    elif spec.kind is AnsatzKind.TWO_LOCAL:
        rotations, entangler = (spec.rotation,), spec.entangler
    else:
        rotations, entangler = ("RY",), "CX"

    circ = Circuit(n)
    theta = _Theta()

    def rotation_layer():
        for kind in rotations:
            for q in range(n):
                circ.add(kind, q, angle=theta())

    for r in range(spec.reps):
        rotation_layer()
        if n >= 2:
            for c, t in entanglement_pairs(n, spec.entanglement, r):
                circ.add(entangler, c, t)
    rotation_layer()
    return circ


def basis_encode(value: int, n: int) -> Statevector:
    """|value> in the computational basis; bit k of ``value`` sets qubit k."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if value < 0 or value >= (1 << n):
        raise ValueError(f"{value} does not fit in {n} qubits")
    data = np.zeros(1 << n, dtype=np.complex128)
    data[value] = 1.0
    return Statevector(data)
