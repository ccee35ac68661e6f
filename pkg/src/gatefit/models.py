"""Model Hamiltonians, Trotter initialization circuits, and target oracles.

Spinless and spinful Fermi-Hubbard chains are mapped to qubits in their
hard-core boson form: with sites enumerated along the Jordan-Wigner order
(all spin-up sites first for the spinful model) every kept term is Z-string
free, and the wrap-around strings are dropped to preserve translation
invariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .circuit import BrickwallMeta, Circuit, GateSlot
from .kernels import Gate, apply_gate, num_qubits as _state_qubits

__all__ = [
    "Term",
    "TrotterGroup",
    "HamiltonianSpec",
    "TrotterPlan",
    "build_spinless_fh",
    "build_spinful_fh",
    "trotter_gate",
    "build_trotter_circuit",
    "hamiltonian_apply",
    "dense_hamiltonian",
    "make_oracle",
    "DenseOracle",
    "KrylovOracle",
    "KrylovConvergenceError",
]

# local two-site operators (first site = more significant gate wire)
_OPERATORS = {
    # c_a^dag c_b + c_b^dag c_a
    "hop": np.array(
        [[0, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0]], dtype=np.complex128
    ),
    # n_a n_b
    "nn": np.diag([0.0, 0.0, 0.0, 1.0]).astype(np.complex128),
}


@dataclass(frozen=True)
class Term:
    coefficient: float
    operator: str
    sites: tuple[int, int]


@dataclass(frozen=True)
class TrotterGroup:
    """Internally commuting bond group with a shared local Hamiltonian."""

    bonds: tuple[tuple[int, int], ...]
    hop_coeff: float  # J
    int_coeff: float  # U


@dataclass
class HamiltonianSpec:
    num_qubits: int
    terms: list[Term]
    trotter_groups: list[TrotterGroup]
    brickwall: bool = False
    periodic: bool = False

    def __post_init__(self):
        for t in self.terms:
            a, b = t.sites
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise ValueError(f"invalid term sites {t.sites}")
            if t.operator not in _OPERATORS:
                raise ValueError(f"unknown operator {t.operator!r}")


@dataclass(frozen=True)
class TrotterPlan:
    order: int
    steps: int
    total_time: float

    def __post_init__(self):
        if self.order not in (1, 2, 4):
            raise ValueError(f"unsupported Trotter order {self.order}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def _chain_bonds(L: int, offset: int, periodic: bool) -> tuple[list, list]:
    """Even and odd bond lists of a single chain embedded at ``offset``.

    A periodic wrap-around bond that duplicates an existing bond (L = 2) is
    merged into it: the survivor carries multiplicity 2 and the duplicate's
    parity class stays empty, so no degenerate duplicate gate slots arise.
    Returns ``(even, odd)`` as lists of ``(bond, multiplicity)``.
    """
    even: list = []
    odd: list = []
    seen: dict[tuple[int, int], list] = {}
    for j in range(L):
        if j == L - 1 and not periodic:
            break
        bond = (offset + j, offset + (j + 1) % L)
        key = (min(bond), max(bond))
        if key in seen:
            seen[key][1] += 1
            continue
        entry = [bond, 1]
        seen[key] = entry
        (even if j % 2 == 0 else odd).append(entry)
    return (
        [(bond, mult) for bond, mult in even],
        [(bond, mult) for bond, mult in odd],
    )


def _uniform_multiplicity(merged: list) -> int:
    mults = {m for _, m in merged}
    if len(mults) != 1:
        raise AssertionError("mixed bond multiplicities within one Trotter group")
    return mults.pop()


def build_spinless_fh(L: int, J: float, U: float, periodic: bool = False) -> HamiltonianSpec:
    """Spinless Fermi-Hubbard chain as hard-core bosons, one qubit per site:
    -J sum (c_j^dag c_{j+1} + h.c.) + U sum n_j n_{j+1}."""
    if L < 2:
        raise ValueError("need at least two sites")
    even, odd = _chain_bonds(L, 0, periodic)
    terms = []
    groups = []
    for merged in (even, odd):
        if not merged:
            continue
        mult = _uniform_multiplicity(merged)
        kept = tuple(bond for bond, _ in merged)
        for bond, m in merged:
            terms.append(Term(-J * m, "hop", bond))
            terms.append(Term(U * m, "nn", bond))
        groups.append(TrotterGroup(kept, J * mult, U * mult))
    return HamiltonianSpec(L, terms, groups, brickwall=True, periodic=periodic)


def build_spinful_fh(L: int, J: float, U: float, periodic: bool = False) -> HamiltonianSpec:
    """Spinful Fermi-Hubbard chain on 2L qubits (spin-up sites 0..L-1, then
    spin-down): hopping within each spin chain, on-site interaction as the
    long-range pair (j, j+L)."""
    if L < 2:
        raise ValueError("need at least two sites")
    up_even, up_odd = _chain_bonds(L, 0, periodic)
    dn_even, dn_odd = _chain_bonds(L, L, periodic)
    terms = []
    groups = []
    for merged in (up_even + dn_even, up_odd + dn_odd):
        if not merged:
            continue
        mult = _uniform_multiplicity(merged)
        for bond, m in merged:
            terms.append(Term(-J * m, "hop", bond))
        groups.append(TrotterGroup(tuple(b for b, _ in merged), J * mult, 0.0))
    int_bonds = tuple((j, j + L) for j in range(L))
    for bond in int_bonds:
        terms.append(Term(U, "nn", bond))
    groups.append(TrotterGroup(int_bonds, 0.0, U))
    return HamiltonianSpec(2 * L, terms, groups, brickwall=False, periodic=periodic)


def trotter_gate(J: float, U: float, t: float) -> Gate:
    """Closed-form exponential of the local bond Hamiltonian.

    exp(-i t h) for h = -J (hop) + U (nn): the hopping block rotates the
    odd-parity sector by cos(Jt)/i sin(Jt), the doubly occupied state picks up
    the phase exp(-i t U). Parity sparse by construction.
    """
    c, s = np.cos(J * t), np.sin(J * t)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = 1.0
    m[1, 1] = c
    m[1, 2] = 1j * s
    m[2, 1] = 1j * s
    m[2, 2] = c
    m[3, 3] = np.exp(-1j * t * U)
    return Gate(m, (0, 1), parity_sparse=True)


def _strang_layers(num_groups: int, tau: float) -> list[tuple[int, float]]:
    half = [(g, tau / 2.0) for g in range(num_groups - 1)]
    return half + [(num_groups - 1, tau)] + half[::-1]


def _layer_descriptors(num_groups: int, order: int, steps: int, total_time: float):
    dt = total_time / steps
    if order == 1:
        per_step = [(g, dt) for g in range(num_groups)]
    elif order == 2:
        per_step = _strang_layers(num_groups, dt)
    else:  # order 4: Suzuki composition of Strang steps
        u = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))
        per_step = []
        for coeff in (u, u, 1.0 - 4.0 * u, u, u):
            per_step.extend(_strang_layers(num_groups, coeff * dt))
    layers = per_step * steps
    merged: list[tuple[int, float]] = []
    for g, t in layers:
        if merged and merged[-1][0] == g:
            merged[-1] = (g, merged[-1][1] + t)
        else:
            merged.append((g, t))
    return merged


def build_trotter_circuit(spec: HamiltonianSpec, plan: TrotterPlan) -> Circuit:
    """Trotter splitting of exp(-i H t) over the spec's commuting bond groups.

    Each merged layer becomes one logical gate shared by all bonds of its
    group. Adjacent equal-group layers are merged (their times add), which
    makes the layer count an emergent quantity: 10*groups - 9 for a single
    fourth-order step.
    """
    groups = spec.trotter_groups
    if not groups:
        raise ValueError("hamiltonian spec has no Trotter bond groups")
    layers = _layer_descriptors(len(groups), plan.order, plan.steps, plan.total_time)
    logical = []
    slots = []
    layer_of_slot = []
    for layer_idx, (g, t) in enumerate(layers):
        grp = groups[g]
        gate = trotter_gate(grp.hop_coeff, grp.int_coeff, t)
        logical.append(Gate(gate.matrix, grp.bonds[0], parity_sparse=True))
        for bond in grp.bonds:
            slots.append(GateSlot(layer_idx, bond))
            layer_of_slot.append(layer_idx)
    meta = None
    if spec.brickwall and all(
        layers[i][0] == i % 2 for i in range(len(layers))
    ):
        meta = BrickwallMeta(len(layers), tuple(layer_of_slot), 2, spec.periodic)
    return Circuit(spec.num_qubits, slots, logical, meta)


def hamiltonian_apply(spec: HamiltonianSpec, state: np.ndarray) -> np.ndarray:
    """H |psi> as a sum of two-site term applications (matrix free)."""
    if state.shape[0] != 2**spec.num_qubits:
        raise ValueError("state dimension does not match the Hamiltonian")
    out = np.zeros_like(state, dtype=np.complex128)
    for term in spec.terms:
        mat = term.coefficient * _OPERATORS[term.operator]
        out += apply_gate(state, Gate(mat, term.sites))
    return out


def dense_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """Assembled 2^k x 2^k matrix (small systems only)."""
    k = spec.num_qubits
    if k > 14:
        raise ValueError("dense assembly capped at 14 qubits")
    N = 2**k
    h = np.zeros((N, N), dtype=np.complex128)
    for term in spec.terms:
        mat = term.coefficient * _OPERATORS[term.operator]
        h += _embed_two_site(mat, term.sites, k)
    return h


def _embed_two_site(mat: np.ndarray, sites: tuple[int, int], k: int) -> np.ndarray:
    """Dense embedding of a two-site operator (qubit 0 = most significant)."""
    N = 2**k
    full = np.kron(mat, np.eye(2 ** (k - 2)))
    t = full.reshape((2,) * (2 * k))
    a, b = sites
    perm = _axis_order(k, a, b)
    t = np.transpose(t, perm + [k + p for p in perm])
    return np.ascontiguousarray(t.reshape(N, N))


def _axis_order(k: int, a: int, b: int) -> list[int]:
    """Axis permutation placing tensor legs (0, 1, rest...) at positions (a, b)."""
    order = [0] * k
    rest = iter(range(2, k))
    for q in range(k):
        if q == a:
            order[q] = 0
        elif q == b:
            order[q] = 1
        else:
            order[q] = next(rest)
    return order


# ---------------------------------------------------------------------------
# target unitary oracles
# ---------------------------------------------------------------------------


class KrylovConvergenceError(RuntimeError):
    """Lanczos approximation did not reach the target accuracy."""


class DenseOracle:
    """exp(-i H t) formed densely (scaling and squaring) and applied by
    matrix-vector products. Thread safe: the matrix is read only."""

    def __init__(self, spec: HamiltonianSpec, t: float):
        if spec.num_qubits > 14:
            raise ValueError("dense oracle capped at 14 qubits")
        self.num_qubits = spec.num_qubits
        self._u = scipy.linalg.expm(-1j * t * dense_hamiltonian(spec))

    def apply(self, state: np.ndarray) -> np.ndarray:
        return self._u @ state

    def apply_adjoint(self, state: np.ndarray) -> np.ndarray:
        return self._u.conj().T @ state


class KrylovOracle:
    """exp(-i H t)|psi> by a Lanczos subspace built per call (matrix free).

    The subspace grows adaptively until the residual-based error estimate
    drops below ``tol``; no state is cached between calls, so concurrent
    applies are safe.
    """

    def __init__(self, spec: HamiltonianSpec, t: float, tol: float = 1e-12, max_dim: int = 96):
        self.num_qubits = spec.num_qubits
        self._spec = spec
        self._t = t
        self._tol = tol
        self._max_dim = max_dim

    def apply(self, state: np.ndarray) -> np.ndarray:
        return self._expm_multiply(state, self._t)

    def apply_adjoint(self, state: np.ndarray) -> np.ndarray:
        return self._expm_multiply(state, -self._t)

    def _expm_multiply(self, state: np.ndarray, t: float) -> np.ndarray:
        norm = np.linalg.norm(state)
        if norm == 0.0 or t == 0.0:
            return state.astype(np.complex128)
        v = state / norm
        basis = [v]
        alphas: list[float] = []
        betas: list[float] = []
        prev_approx = None
        for m in range(1, min(self._max_dim, 2**self.num_qubits) + 1):
            w = hamiltonian_apply(self._spec, basis[-1])
            if len(basis) > 1:
                w = w - betas[-1] * basis[-2]
            alpha = float(np.real(np.vdot(basis[-1], w)))
            w = w - alpha * basis[-1]
            # full reorthogonalization; subspaces stay tiny
            for u in basis:
                w = w - np.vdot(u, w) * u
            alphas.append(alpha)
            beta = float(np.linalg.norm(w))
            coeff = self._tridiag_exp_column(alphas, betas, t)
            approx = sum(c * u for c, u in zip(coeff, basis))
            residual = beta * abs(coeff[-1]) * abs(t)
            step = np.inf if prev_approx is None else np.linalg.norm(approx - prev_approx)
            if beta < 1e-14 or max(residual, step) < self._tol:
                return norm * approx
            prev_approx = approx
            betas.append(beta)
            basis.append(w / beta)
        raise KrylovConvergenceError(
            f"no convergence within {self._max_dim} Lanczos vectors "
            f"(error estimate {residual:.3e})"
        )

    @staticmethod
    def _tridiag_exp_column(alphas, betas, t):
        """First column of exp(-i t T) for the Lanczos tridiagonal T."""
        m = len(alphas)
        if m == 1:
            return np.array([np.exp(-1j * t * alphas[0])])
        evals, evecs = scipy.linalg.eigh_tridiagonal(alphas, betas[: m - 1])
        return evecs @ (np.exp(-1j * t * evals) * evecs[0].conj())


def make_oracle(spec: HamiltonianSpec, t: float, method: str = "dense"):
    """Target unitary oracle for exp(-i H t)."""
    if method == "dense":
        return DenseOracle(spec, t)
    if method == "krylov":
        return KrylovOracle(spec, t)
    raise ValueError(f"unknown oracle method {method!r}")
