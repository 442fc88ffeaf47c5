"""Dense reference simulator built from Kronecker products.

Shares no code with the package: gate matrices are written out here, every
gate is lifted to a full 2^n x 2^n operator, and circuits are matrix products.
Qubit 0 is the least significant bit of the amplitude index.
"""

import numpy as np

I2 = np.eye(2, dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def single(kind, theta=None):
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if kind == "X":
        return X.copy()
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])
    if kind == "P":
        return np.array([[1, 0], [0, np.exp(1j * theta)]])
    raise ValueError(kind)


def lift(ops, n):
    """Kronecker product of per-qubit factors ``ops`` ({qubit: 2x2})."""
    out = np.ones((1, 1), dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def full_operator(kind, qubits, n, theta=None):
    if kind in ("CX", "CZ"):
        c, t = qubits
        inner = X if kind == "CX" else Z
        return lift({c: P0}, n) + lift({c: P1, t: inner}, n)
    return lift({qubits[0]: single(kind, theta)}, n)


def run(gates, n):
    """``gates``: iterable of (kind, qubits, theta). Starts from |0...0>."""
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for kind, qubits, theta in gates:
        psi = full_operator(kind, qubits, n, theta) @ psi
    return psi


def z_expectation(psi, n):
    diag = np.ones(1)
    for _ in range(n):
        diag = np.kron(diag, np.array([1.0, -1.0]))
    return float(np.real(np.vdot(psi, diag * psi)))


KINDS = ("H", "X", "RX", "RY", "RZ", "P", "CX", "CZ")


def random_gates(rng, n, depth):
    """``depth`` random gates over every kind; two-qubit kinds only when n >= 2."""
    kinds = KINDS if n >= 2 else KINDS[:6]
    gates = []
    for _ in range(depth):
        kind = kinds[rng.integers(len(kinds))]
        if kind in ("CX", "CZ"):
            qubits = tuple(int(q) for q in rng.choice(n, size=2, replace=False))
        else:
            qubits = (int(rng.integers(n)),)
        theta = float(rng.uniform(-2 * np.pi, 2 * np.pi)) if kind in ("RX", "RY", "RZ", "P") else None
        gates.append((kind, qubits, theta))
    return gates
