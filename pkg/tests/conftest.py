"""Shared fixtures and independent dense oracles for the test suite.

The oracles here are deliberately written from first principles (explicit
loops over basis indices, no shared code with the package kernels) so that
they stay independent of the paths they verify.
"""

import numpy as np
import pytest

from gatefit import manifold
from gatefit.circuit import Circuit, GateSlot
from gatefit.kernels import Gate


def dense_two_qubit(mat: np.ndarray, t1: int, t2: int, k: int) -> np.ndarray:
    """Dense 2^k x 2^k embedding of a two-qubit operator, by explicit
    enumeration of basis pairs. Qubit 0 is the most significant bit; the
    first target indexes the more significant gate bit."""
    N = 2**k
    out = np.zeros((N, N), dtype=complex)
    for x in range(N):
        for y in range(N):
            env_equal = True
            for q in range(k):
                if q in (t1, t2):
                    continue
                if (x >> (k - 1 - q)) & 1 != (y >> (k - 1 - q)) & 1:
                    env_equal = False
                    break
            if not env_equal:
                continue
            xi = 2 * ((x >> (k - 1 - t1)) & 1) + ((x >> (k - 1 - t2)) & 1)
            yi = 2 * ((y >> (k - 1 - t1)) & 1) + ((y >> (k - 1 - t2)) & 1)
            out[x, y] = mat[xi, yi]
    return out


def dense_circuit_matrix(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a circuit, slot by slot (independent of kernels)."""
    N = 2**circuit.num_qubits
    out = np.eye(N, dtype=complex)
    for slot in circuit.slots:
        g = circuit.logical_gates[slot.logical_id].matrix
        out = dense_two_qubit(g, *slot.targets, circuit.num_qubits) @ out
    return out


class MatrixOracle:
    """Target oracle around an explicit matrix."""

    def __init__(self, u: np.ndarray):
        self.num_qubits = int(np.log2(u.shape[0]) + 0.5)
        self.matrix = u

    def apply(self, state):
        return self.matrix @ state

    def apply_adjoint(self, state):
        return self.matrix.conj().T @ state


class IdentityOracle:
    def __init__(self, num_qubits: int):
        self.num_qubits = num_qubits

    def apply(self, state):
        return state.copy()

    def apply_adjoint(self, state):
        return state.copy()


def random_state(k: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    return psi / np.linalg.norm(psi)


def random_circuit(k: int, num_slots: int, rng: np.random.Generator) -> Circuit:
    """Sequential circuit with independent random gates on random wire pairs."""
    gates, slots = [], []
    for i in range(num_slots):
        t1, t2 = rng.choice(k, size=2, replace=False)
        gates.append(Gate(manifold.random_unitary(4, rng), (int(t1), int(t2))))
        slots.append(GateSlot(i, (int(t1), int(t2))))
    return Circuit(k, slots, gates)


def random_tangent(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape)
    return manifold.project_tangent(v, x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
