"""Dense statevector simulation of parametrized circuits.

Qubit ordering is little-endian: qubit 0 is the least significant bit of
the amplitude index, so the bitstring ``"101"`` (qubit 2 on the left) is
index 5.

Circuits may be evaluated on a single parameter binding or on a batch, where
each binding maps a parameter to an array of shape ``(B,)``. Batched
evaluation is what makes the regression loop cheap: one pass through the
gate list serves every training sample at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "GATE_KINDS",
    "Parameter",
    "ParameterExpression",
    "Gate",
    "Circuit",
    "Statevector",
    "Observable",
    "gate_matrix",
    "apply_gate",
    "run_circuit",
    "run_batch",
    "evolve_batch",
    "expectation",
    "sample_counts",
]

ONE_QUBIT = ("H", "X", "RX", "RY", "RZ", "P")
TWO_QUBIT = ("CX", "CZ")
PARAMETRIC = ("RX", "RY", "RZ", "P")
GATE_KINDS = ONE_QUBIT + TWO_QUBIT

_SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Parameter:
    """A named free angle. ``role`` is ``"encoding"`` or ``"trainable"``."""

    name: str
    role: str = "trainable"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=False)
class ParameterExpression:
    """An angle computed from one or more parameters.

    ``fn`` receives the parameter values positionally and must work on both
    floats and numpy arrays.
    """

    params: Tuple[Parameter, ...]
    fn: Callable[..., object]
    label: str

    def evaluate(self, values: Mapping[str, object]):
        return self.fn(*(values[p.name] for p in self.params))

    def __str__(self) -> str:
        return self.label

    def __eq__(self, other) -> bool:
        return isinstance(other, ParameterExpression) and (self.params, self.label) == (
            other.params,
            other.label,
        )

    def __hash__(self) -> int:
        return hash((self.params, self.label))


Angle = Union[float, Parameter, ParameterExpression, None]


def _angle_params(angle: Angle) -> Tuple[Parameter, ...]:
    if isinstance(angle, Parameter):
        return (angle,)
    if isinstance(angle, ParameterExpression):
        return angle.params
    return ()


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...]
    angle: Angle = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != arity:
            raise ValueError(f"{self.kind} targets must be distinct, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if (self.kind in PARAMETRIC) != (self.angle is not None):
            raise ValueError(f"{self.kind} angle mismatch: {self.angle!r}")

    @property
    def is_parametrized(self) -> bool:
        return isinstance(self.angle, (Parameter, ParameterExpression))

    def bound_angle(self, bindings: Mapping[str, object]):
        if self.angle is None or isinstance(self.angle, (int, float)):
            return self.angle
        if isinstance(self.angle, Parameter):
            return bindings[self.angle.name]
        return self.angle.evaluate(bindings)

    def __str__(self) -> str:
        qs = ",".join(map(str, self.qubits))
        if self.angle is None:
            return f"{self.kind}({qs})"
        return f"{self.kind}[{self.angle}]({qs})"


@dataclass
class Circuit:
    """Ordered gate list over ``num_qubits`` qubits.

    Parameters are collected in first-use order and split by role; the
    order is stable for a given sequence of ``append`` calls.
    """

    num_qubits: int
    gates: List[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        gates, self.gates = self.gates, []
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> "Circuit":
        if max(gate.qubits) >= self.num_qubits:
            raise ValueError(f"{gate} addresses a qubit outside 0..{self.num_qubits - 1}")
        seen = {p.name: p for p in self.parameters}
        for p in _angle_params(gate.angle):
            if p.name in seen and seen[p.name] != p:
                raise ValueError(f"parameter name {p.name!r} declared twice with different roles")
        self.gates.append(gate)
        return self

    def add(self, kind: str, *qubits: int, angle: Angle = None) -> "Circuit":
        return self.append(Gate(kind, tuple(qubits), angle))

    def compose(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ValueError("cannot compose circuits of different widths")
        out = Circuit(self.num_qubits, list(self.gates))
        for g in other.gates:
            out.append(g)
        return out

    @property
    def parameters(self) -> List[Parameter]:
        out: Dict[str, Parameter] = {}
        for g in self.gates:
            for p in _angle_params(g.angle):
                out.setdefault(p.name, p)
        return list(out.values())

    @property
    def encoding_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters if p.role == "encoding"]

    @property
    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters if p.role == "trainable"]

    def count_ops(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for g in self.gates:
            counts[g.kind] = counts.get(g.kind, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.gates)


class Statevector:
    """Amplitudes of an ``n``-qubit register (length ``2**n``)."""

    def __init__(self, data: Sequence[complex], num_qubits: Optional[int] = None):
        data = np.asarray(data, dtype=np.complex128).reshape(-1)
        n = int(round(math.log2(data.size))) if data.size else 0
        if data.size < 2 or (1 << n) != data.size:
            raise ValueError(f"amplitude count {data.size} is not 2**n for n >= 1")
        if num_qubits is not None and num_qubits != n:
            raise ValueError(f"{data.size} amplitudes do not describe {num_qubits} qubits")
        if not np.all(np.isfinite(data)):
            raise ValueError("amplitudes must be finite")
        self.data = data
        self.num_qubits = n

    @classmethod
    def zero(cls, num_qubits: int) -> "Statevector":
        data = np.zeros(1 << num_qubits, dtype=np.complex128)
        data[0] = 1.0
        return cls(data)

    @classmethod
    def from_label(cls, label: str) -> "Statevector":
        """Basis state from a bitstring; the rightmost character is qubit 0."""
        data = np.zeros(1 << len(label), dtype=np.complex128)
        data[int(label, 2)] = 1.0
        return cls(data)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.probabilities()))

    def equiv(self, other: "Statevector", atol: float = 1e-9) -> bool:
        """Equality up to global phase."""
        if other.num_qubits != self.num_qubits:
            return False
        overlap = np.vdot(self.data, other.data)
        return abs(abs(overlap) - 1.0) < atol and abs(self.norm_squared() - 1.0) < atol

    def __repr__(self) -> str:
        return f"Statevector({np.array2string(self.data, precision=4)})"


@dataclass(frozen=True)
class Observable:
    """Diagonal Pauli-Z tensor product; ``z_qubits[q]`` flags qubit ``q``."""

    z_qubits: Tuple[bool, ...]

    def __post_init__(self):
        if not any(self.z_qubits):
            raise ValueError("observable needs at least one Z factor")

    @classmethod
    def all_z(cls, num_qubits: int) -> "Observable":
        return cls((True,) * num_qubits)

    @classmethod
    def from_label(cls, label: str) -> "Observable":
        """Parse a label such as ``"ZI"``; the rightmost character is qubit 0."""
        if set(label) - {"Z", "I"}:
            raise ValueError(f"only Z and I factors are supported: {label!r}")
        return cls(tuple(c == "Z" for c in reversed(label)))

    @property
    def num_qubits(self) -> int:
        return len(self.z_qubits)

    @property
    def label(self) -> str:
        return "".join("Z" if z else "I" for z in reversed(self.z_qubits))

    def eigenvalues(self) -> np.ndarray:
        """The +/-1 parity of every basis index over the flagged qubits."""
        mask = sum(1 << q for q, z in enumerate(self.z_qubits) if z)
        idx = np.arange(1 << self.num_qubits)
        parity = np.zeros(idx.size, dtype=np.int64)
        bits = idx & mask
        while np.any(bits):
            parity ^= bits & 1
            bits >>= 1
        return 1.0 - 2.0 * parity


def gate_matrix(kind: str, angle: Optional[float] = None) -> np.ndarray:
    """Dense unitary of a gate kind; two-qubit matrices use (target, control)
    little-endian ordering, i.e. basis index = 2*target_bit + control_bit."""
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT1_2
    if kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)
    if kind == "RX":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    if kind == "P":
        return np.diag([1.0, np.exp(1j * angle)]).astype(np.complex128)
    if kind == "CX":
        m = np.eye(4, dtype=np.complex128)
        m[[1, 3]] = m[[3, 1]]
        return m
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(np.complex128)
    raise ValueError(f"unknown gate kind {kind!r}")


def _as_coeff(value, batch: int):
    """Scalars pass through; per-sample angles become (B, 1, 1) for broadcasting."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        if not np.isfinite(arr):
            raise ValueError("angle is not finite")
        return float(arr)
    if arr.shape != (batch,):
        raise ValueError(f"batched angle has shape {arr.shape}, expected ({batch},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("angle is not finite")
    return arr.reshape(batch, 1, 1)


def _apply_inplace(data: np.ndarray, n: int, kind: str, qubits: Tuple[int, ...], theta) -> np.ndarray:
    """Apply one gate to a (B, 2**n) block; may return a new array."""
    batch = data.shape[0]
    if kind in TWO_QUBIT:
        c, t = qubits
        # axis 1 of the tensor view is qubit n-1
        view = data.reshape((batch,) + (2,) * n)
        ca, ta = n - c, n - t
        sel = [slice(None)] * (n + 1)
        sel[ca] = 1
        if kind == "CZ":
            sel[ta] = 1
            view[tuple(sel)] *= -1.0
        else:
            sub = view[tuple(sel)]
            axis = ta if ta < ca else ta - 1
            view[tuple(sel)] = np.flip(sub, axis=axis).copy()
        return data

    q = qubits[0]
    view = data.reshape(batch, -1, 2, 1 << q)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    if kind == "RZ":
        theta = _as_coeff(theta, batch)
        a0 *= np.exp(-0.5j * theta)
        a1 *= np.exp(0.5j * theta)
        return data
    if kind == "P":
        a1 *= np.exp(1j * _as_coeff(theta, batch))
        return data
    if kind == "X":
        tmp = a0.copy()
        a0[...] = a1
        a1[...] = tmp
        return data
    if kind == "H":
        s, d = a0 + a1, a0 - a1
        a0[...] = s * _SQRT1_2
        a1[...] = d * _SQRT1_2
        return data
    theta = _as_coeff(theta, batch)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RY":
        n0 = c * a0 - s * a1
        n1 = s * a0 + c * a1
    else:  # RX
        n0 = c * a0 - 1j * s * a1
        n1 = c * a1 - 1j * s * a0
    a0[...] = n0
    a1[...] = n1
    return data


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    """Return the state after ``gate``; the gate's angle must be a literal."""
    if gate.is_parametrized:
        raise ValueError(f"{gate} has an unbound symbolic angle")
    if max(gate.qubits) >= state.num_qubits:
        raise ValueError(f"{gate} addresses a qubit outside a {state.num_qubits}-qubit state")
    data = state.data.copy().reshape(1, -1)
    data = _apply_inplace(data, state.num_qubits, gate.kind, gate.qubits, gate.angle)
    return Statevector(data.reshape(-1))


def _check_bindings(circuit: Circuit, bindings: Mapping[str, object]) -> None:
    missing = [p.name for p in circuit.parameters if p.name not in bindings]
    if missing:
        raise KeyError(f"missing bindings for {missing}")
    for p in circuit.parameters:
        if not np.all(np.isfinite(np.asarray(bindings[p.name], dtype=np.float64))):
            raise ValueError(f"binding for {p.name} is not finite")


def evolve_batch(data: np.ndarray, circuit: Circuit, bindings: Mapping[str, object]) -> np.ndarray:
    """Apply ``circuit`` to every row of ``data`` (shape (B, 2**n)).

    ``data`` is modified in place where possible; the evolved block is
    returned. Bindings may be scalars or arrays of length B.
    """
    _check_bindings(circuit, bindings)
    n = circuit.num_qubits
    for g in circuit.gates:
        data = _apply_inplace(data, n, g.kind, g.qubits, g.bound_angle(bindings))
    return data


def run_batch(circuit: Circuit, bindings: Mapping[str, object], batch: int) -> np.ndarray:
    """Run from |0...0> for ``batch`` bindings at once; returns (B, 2**n)."""
    data = np.zeros((batch, 1 << circuit.num_qubits), dtype=np.complex128)
    data[:, 0] = 1.0
    return evolve_batch(data, circuit, bindings)


def run_circuit(circuit: Circuit, bindings: Optional[Mapping[str, float]] = None) -> Statevector:
    bindings = {} if bindings is None else bindings
    for name, value in bindings.items():
        if np.ndim(value) != 0:
            raise ValueError(f"binding {name} is not a scalar; use run_batch")
    return Statevector(run_batch(circuit, bindings, 1)[0])


def expectation(state: Statevector, obs: Observable) -> float:
    if obs.num_qubits != state.num_qubits:
        raise ValueError(
            f"observable acts on {obs.num_qubits} qubits, state has {state.num_qubits}"
        )
    value = float(np.dot(obs.eigenvalues(), state.probabilities()))
    return min(1.0, max(-1.0, value))


def sample_counts(state: Statevector, shots: int, seed: int = 0) -> Dict[str, int]:
    """Draw ``shots`` measurement outcomes in the computational basis."""
    if shots < 1:
        raise ValueError("shots must be positive")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    width = state.num_qubits
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(draws) if c}

