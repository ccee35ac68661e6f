"""Statevector contraction kernels: gate application, hole contraction, hole application.

Conventions used throughout the package:

* A state vector for ``k`` qubits is a contiguous 1-D ``complex128`` array of
  length ``2**k``. Basis indices are lexicographic with **qubit 0 as the most
  significant bit** (many simulators use the opposite order). For a gate
  acting on qubits ``q1 < q2`` the vector factorizes into five legs of
  dimensions ``(p, 2, q, 2, n)`` with ``p = 2**q1``, ``q = 2**(q2-q1-1)`` and
  ``n = 2**(k-1-q2)``; the last leg is the fastest running.

* A state vector array holds ``arity`` logical vectors interleaved so that the
  logical (arity) index is the fastest running one: stored as a C-contiguous
  array of shape ``(2**k, arity)``, i.e. memory order
  ``(v_1[0], v_2[0], ..., v_1[1], v_2[1], ...)``.

* Gate matrices are 4x4 with row/column index ``2*b(q1) + b(q2)``. Gates given
  with ``q1 > q2`` are normalized by swapping the wires of the matrix
  (permutation 0,2,1,3 of rows and columns), which halves the kernel paths.

All kernels write into caller-supplied output buffers (never in place), so
passes can ping-pong two scratch vectors without allocating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "Gate",
    "WIRE_SWAP",
    "DENSE_SUPPORT",
    "PARITY_SUPPORT",
    "support_table",
    "num_qubits",
    "basis_state",
    "leg_dims",
    "wire_swapped_matrix",
    "apply_gate",
    "hole_contract",
    "hole_apply",
    "apply_gate_to_array",
    "hole_contract_array",
]

#: Row/column permutation that exchanges the two wires of a 4x4 gate.
WIRE_SWAP = np.array([0, 2, 1, 3], dtype=np.int64)

#: Flat gate-entry indices (4*row + col) kept in a dense gate hole.
DENSE_SUPPORT = np.arange(16, dtype=np.int64)

#: On-pattern entries of a parity-conserving gate, row-major. Rows/columns
#: 0 and 3 carry even parity, 1 and 2 odd parity; a parity-conserving gate is
#: zero wherever row and column parity differ.
PARITY_SUPPORT = np.array([0, 3, 5, 6, 9, 10, 12, 15], dtype=np.int64)


@dataclass
class Gate:
    """A two-qubit gate: 4x4 matrix plus the qubit pair it acts on.

    ``targets`` is an ordered pair; the first wire indexes the more
    significant bit of the gate's 4-dimensional basis.
    """

    matrix: np.ndarray
    targets: tuple[int, int]
    parity_sparse: bool = False

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if self.matrix.shape != (4, 4):
            raise ValueError(f"gate matrix must be 4x4, got {self.matrix.shape}")
        t1, t2 = self.targets
        if t1 == t2:
            raise ValueError("gate targets must be distinct qubits")
        self.targets = (int(t1), int(t2))


def num_qubits(state: np.ndarray) -> int:
    k = int(np.log2(state.shape[0]) + 0.5)
    if 2**k != state.shape[0]:
        raise ValueError(f"state length {state.shape[0]} is not a power of two")
    return k


def basis_state(k: int, j: int) -> np.ndarray:
    """Computational basis vector |j> for ``k`` qubits (qubit 0 = MSB)."""
    if not 0 <= j < 2**k:
        raise ValueError(f"basis index {j} out of range for {k} qubits")
    psi = np.zeros(2**k, dtype=np.complex128)
    psi[j] = 1.0
    return psi


def leg_dims(k: int, q1: int, q2: int) -> tuple[int, int, int]:
    """Environment leg dimensions (p, q, n) for a gate on ``q1 < q2``."""
    return 2**q1, 2 ** (q2 - q1 - 1), 2 ** (k - 1 - q2)


def wire_swapped_matrix(matrix: np.ndarray) -> np.ndarray:
    """Gate matrix with the roles of the two wires exchanged."""
    return np.ascontiguousarray(matrix[WIRE_SWAP][:, WIRE_SWAP])


def support_table(support: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split flat entry indices into (row, col) lookup tables."""
    sup = np.asarray(support, dtype=np.int64)
    return sup // 4, sup % 4


def _check_targets(k: int, targets: tuple[int, int]) -> tuple[int, int, bool]:
    """Validate targets; return (q1, q2, swapped) with q1 < q2."""
    t1, t2 = targets
    if t1 == t2:
        raise ValueError("gate targets must be distinct")
    if not (0 <= t1 < k and 0 <= t2 < k):
        raise ValueError(f"targets {targets} out of range for {k} qubits")
    if t1 < t2:
        return t1, t2, False
    return t2, t1, True


# ---------------------------------------------------------------------------
# jitted cores; all require q1 < q2 and non-aliasing output buffers
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _apply_adjacent_kernel(psi, g, p, n, out):
    # Unrolled 4x4 kernel variant: the gate multiplication is the inner kernel,
    # environment legs stream in the outer loops.
    g00, g01, g02, g03 = g[0, 0], g[0, 1], g[0, 2], g[0, 3]
    g10, g11, g12, g13 = g[1, 0], g[1, 1], g[1, 2], g[1, 3]
    g20, g21, g22, g23 = g[2, 0], g[2, 1], g[2, 2], g[2, 3]
    g30, g31, g32, g33 = g[3, 0], g[3, 1], g[3, 2], g[3, 3]
    for i0 in range(p):
        b = i0 * 4 * n
        for i2 in range(n):
            i = b + i2
            x0 = psi[i]
            x1 = psi[i + n]
            x2 = psi[i + 2 * n]
            x3 = psi[i + 3 * n]
            out[i] = g00 * x0 + g01 * x1 + g02 * x2 + g03 * x3
            out[i + n] = g10 * x0 + g11 * x1 + g12 * x2 + g13 * x3
            out[i + 2 * n] = g20 * x0 + g21 * x1 + g22 * x2 + g23 * x3
            out[i + 3 * n] = g30 * x0 + g31 * x1 + g32 * x2 + g33 * x3


@njit(cache=True, nogil=True)
def _apply_adjacent_plain(psi, g, p, n, out):
    # Accumulating variant: out[(i0*4+i1)*n+i2] += g[i1,j] * psi[(i0*4+j)*n+i2].
    # Summation order over j matches the kernel variant, so both agree bitwise.
    out[:] = 0.0
    for i0 in range(p):
        b = i0 * 4 * n
        for i1 in range(4):
            for j in range(4):
                gij = g[i1, j]
                for i2 in range(n):
                    out[b + i1 * n + i2] += gij * psi[b + j * n + i2]


@njit(cache=True, nogil=True)
def _apply_general_kernel(psi, g, p, q, n, out):
    # Five-leg general case: input legs (p, 2, q, 2, n), gate bits split
    # across the two non-adjacent wires. Column index j = 2*j1 + j3.
    g00, g01, g02, g03 = g[0, 0], g[0, 1], g[0, 2], g[0, 3]
    g10, g11, g12, g13 = g[1, 0], g[1, 1], g[1, 2], g[1, 3]
    g20, g21, g22, g23 = g[2, 0], g[2, 1], g[2, 2], g[2, 3]
    g30, g31, g32, g33 = g[3, 0], g[3, 1], g[3, 2], g[3, 3]
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                x0 = psi[b0 + i4]
                x1 = psi[b0 + n + i4]
                x2 = psi[b1 + i4]
                x3 = psi[b1 + n + i4]
                out[b0 + i4] = g00 * x0 + g01 * x1 + g02 * x2 + g03 * x3
                out[b0 + n + i4] = g10 * x0 + g11 * x1 + g12 * x2 + g13 * x3
                out[b1 + i4] = g20 * x0 + g21 * x1 + g22 * x2 + g23 * x3
                out[b1 + n + i4] = g30 * x0 + g31 * x1 + g32 * x2 + g33 * x3


@njit(cache=True, nogil=True)
def _apply_general_plain(psi, g, p, q, n, out):
    out[:] = 0.0
    for i0 in range(p):
        for i2 in range(q):
            base = ((i0 * 2) * q + i2) * 2 * n
            off = ((i0 * 2 + 1) * q + i2) * 2 * n - base
            for i1 in range(4):
                # rows of the output: bit i1>>1 on wire 1, bit i1&1 on wire 2
                o = base + (i1 >> 1) * off + (i1 & 1) * n
                for j in range(4):
                    gij = g[i1, j]
                    s = base + (j >> 1) * off + (j & 1) * n
                    for i4 in range(n):
                        out[o + i4] += gij * psi[s + i4]


@njit(cache=True, nogil=True)
def _hole_contract_core(bra, ket, p, q, n, out):
    # out[i, j] += bra(target bits = i) * ket(target bits = j), summed over the
    # environment legs; neither side is conjugated. Inner kernel is the outer
    # product of two 4-vectors.
    out[:] = 0.0
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                x0 = ket[b0 + i4]
                x1 = ket[b0 + n + i4]
                x2 = ket[b1 + i4]
                x3 = ket[b1 + n + i4]
                y0 = bra[b0 + i4]
                y1 = bra[b0 + n + i4]
                y2 = bra[b1 + i4]
                y3 = bra[b1 + n + i4]
                out[0, 0] += y0 * x0
                out[0, 1] += y0 * x1
                out[0, 2] += y0 * x2
                out[0, 3] += y0 * x3
                out[1, 0] += y1 * x0
                out[1, 1] += y1 * x1
                out[1, 2] += y1 * x2
                out[1, 3] += y1 * x3
                out[2, 0] += y2 * x0
                out[2, 1] += y2 * x1
                out[2, 2] += y2 * x2
                out[2, 3] += y2 * x3
                out[3, 0] += y3 * x0
                out[3, 1] += y3 * x1
                out[3, 2] += y3 * x2
                out[3, 3] += y3 * x3


@njit(cache=True, nogil=True)
def _hole_apply_core(psi, p, q, n, sup_row, sup_col, out):
    # out[phys, a]: logical vector a corresponds to gate entry (i_a, j_a);
    # it equals psi with the target bits replaced by j_a, supported only on
    # physical indices whose target bits equal i_a (outer product with the
    # identity plus leg transpositions).
    arity = sup_row.shape[0]
    out[:] = 0.0
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                x0 = psi[b0 + i4]
                x1 = psi[b0 + n + i4]
                x2 = psi[b1 + i4]
                x3 = psi[b1 + n + i4]
                for a in range(arity):
                    jj = sup_col[a]
                    if jj == 0:
                        v = x0
                    elif jj == 1:
                        v = x1
                    elif jj == 2:
                        v = x2
                    else:
                        v = x3
                    ii = sup_row[a]
                    if ii == 0:
                        out[b0 + i4, a] = v
                    elif ii == 1:
                        out[b0 + n + i4, a] = v
                    elif ii == 2:
                        out[b1 + i4, a] = v
                    else:
                        out[b1 + n + i4, a] = v


@njit(cache=True, nogil=True)
def _apply_adjacent_parity(psi, g, p, n, out):
    # Parity-conserving gate: the 8 structurally zero entries are skipped.
    g00, g03 = g[0, 0], g[0, 3]
    g11, g12 = g[1, 1], g[1, 2]
    g21, g22 = g[2, 1], g[2, 2]
    g30, g33 = g[3, 0], g[3, 3]
    for i0 in range(p):
        b = i0 * 4 * n
        for i2 in range(n):
            i = b + i2
            x0 = psi[i]
            x1 = psi[i + n]
            x2 = psi[i + 2 * n]
            x3 = psi[i + 3 * n]
            out[i] = g00 * x0 + g03 * x3
            out[i + n] = g11 * x1 + g12 * x2
            out[i + 2 * n] = g21 * x1 + g22 * x2
            out[i + 3 * n] = g30 * x0 + g33 * x3


@njit(cache=True, nogil=True)
def _apply_general_parity(psi, g, p, q, n, out):
    g00, g03 = g[0, 0], g[0, 3]
    g11, g12 = g[1, 1], g[1, 2]
    g21, g22 = g[2, 1], g[2, 2]
    g30, g33 = g[3, 0], g[3, 3]
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                x0 = psi[b0 + i4]
                x1 = psi[b0 + n + i4]
                x2 = psi[b1 + i4]
                x3 = psi[b1 + n + i4]
                out[b0 + i4] = g00 * x0 + g03 * x3
                out[b0 + n + i4] = g11 * x1 + g12 * x2
                out[b1 + i4] = g21 * x1 + g22 * x2
                out[b1 + n + i4] = g30 * x0 + g33 * x3


@njit(cache=True, nogil=True)
def _array_apply_adjacent(arr, g, p, n, out):
    # Gate application on every logical vector at once; the contiguous arity
    # index runs in the innermost loop (vectorizable).
    arity = arr.shape[1]
    g00, g01, g02, g03 = g[0, 0], g[0, 1], g[0, 2], g[0, 3]
    g10, g11, g12, g13 = g[1, 0], g[1, 1], g[1, 2], g[1, 3]
    g20, g21, g22, g23 = g[2, 0], g[2, 1], g[2, 2], g[2, 3]
    g30, g31, g32, g33 = g[3, 0], g[3, 1], g[3, 2], g[3, 3]
    for i0 in range(p):
        b = i0 * 4 * n
        for i2 in range(n):
            i = b + i2
            for a in range(arity):
                x0 = arr[i, a]
                x1 = arr[i + n, a]
                x2 = arr[i + 2 * n, a]
                x3 = arr[i + 3 * n, a]
                out[i, a] = g00 * x0 + g01 * x1 + g02 * x2 + g03 * x3
                out[i + n, a] = g10 * x0 + g11 * x1 + g12 * x2 + g13 * x3
                out[i + 2 * n, a] = g20 * x0 + g21 * x1 + g22 * x2 + g23 * x3
                out[i + 3 * n, a] = g30 * x0 + g31 * x1 + g32 * x2 + g33 * x3


@njit(cache=True, nogil=True)
def _array_apply_adjacent_parity(arr, g, p, n, out):
    arity = arr.shape[1]
    g00, g03 = g[0, 0], g[0, 3]
    g11, g12 = g[1, 1], g[1, 2]
    g21, g22 = g[2, 1], g[2, 2]
    g30, g33 = g[3, 0], g[3, 3]
    for i0 in range(p):
        b = i0 * 4 * n
        for i2 in range(n):
            i = b + i2
            for a in range(arity):
                x0 = arr[i, a]
                x1 = arr[i + n, a]
                x2 = arr[i + 2 * n, a]
                x3 = arr[i + 3 * n, a]
                out[i, a] = g00 * x0 + g03 * x3
                out[i + n, a] = g11 * x1 + g12 * x2
                out[i + 2 * n, a] = g21 * x1 + g22 * x2
                out[i + 3 * n, a] = g30 * x0 + g33 * x3


@njit(cache=True, nogil=True)
def _array_apply_general_parity(arr, g, p, q, n, out):
    arity = arr.shape[1]
    g00, g03 = g[0, 0], g[0, 3]
    g11, g12 = g[1, 1], g[1, 2]
    g21, g22 = g[2, 1], g[2, 2]
    g30, g33 = g[3, 0], g[3, 3]
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                for a in range(arity):
                    x0 = arr[b0 + i4, a]
                    x1 = arr[b0 + n + i4, a]
                    x2 = arr[b1 + i4, a]
                    x3 = arr[b1 + n + i4, a]
                    out[b0 + i4, a] = g00 * x0 + g03 * x3
                    out[b0 + n + i4, a] = g11 * x1 + g12 * x2
                    out[b1 + i4, a] = g21 * x1 + g22 * x2
                    out[b1 + n + i4, a] = g30 * x0 + g33 * x3


@njit(cache=True, nogil=True)
def _array_apply_general(arr, g, p, q, n, out):
    arity = arr.shape[1]
    g00, g01, g02, g03 = g[0, 0], g[0, 1], g[0, 2], g[0, 3]
    g10, g11, g12, g13 = g[1, 0], g[1, 1], g[1, 2], g[1, 3]
    g20, g21, g22, g23 = g[2, 0], g[2, 1], g[2, 2], g[2, 3]
    g30, g31, g32, g33 = g[3, 0], g[3, 1], g[3, 2], g[3, 3]
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                for a in range(arity):
                    x0 = arr[b0 + i4, a]
                    x1 = arr[b0 + n + i4, a]
                    x2 = arr[b1 + i4, a]
                    x3 = arr[b1 + n + i4, a]
                    out[b0 + i4, a] = g00 * x0 + g01 * x1 + g02 * x2 + g03 * x3
                    out[b0 + n + i4, a] = g10 * x0 + g11 * x1 + g12 * x2 + g13 * x3
                    out[b1 + i4, a] = g20 * x0 + g21 * x1 + g22 * x2 + g23 * x3
                    out[b1 + n + i4, a] = g30 * x0 + g31 * x1 + g32 * x2 + g33 * x3


@njit(cache=True, nogil=True)
def _hole_contract_array_core(bra, arr, p, q, n, sup_row, sup_col, outT):
    # outT[c, a] += bra(target bits = i_c) * arr(target bits = j_c, slot a);
    # transpose of the (arity x support) block so the arity loop writes
    # contiguously.
    arity = arr.shape[1]
    ncols = sup_row.shape[0]
    outT[:] = 0.0
    for i0 in range(p):
        for i2 in range(q):
            b0 = ((i0 * 2) * q + i2) * 2 * n
            b1 = ((i0 * 2 + 1) * q + i2) * 2 * n
            for i4 in range(n):
                r0 = b0 + i4
                r1 = b0 + n + i4
                r2 = b1 + i4
                r3 = b1 + n + i4
                y0 = bra[r0]
                y1 = bra[r1]
                y2 = bra[r2]
                y3 = bra[r3]
                for c in range(ncols):
                    ii = sup_row[c]
                    if ii == 0:
                        y = y0
                    elif ii == 1:
                        y = y1
                    elif ii == 2:
                        y = y2
                    else:
                        y = y3
                    jj = sup_col[c]
                    if jj == 0:
                        r = r0
                    elif jj == 1:
                        r = r1
                    elif jj == 2:
                        r = r2
                    else:
                        r = r3
                    for a in range(arity):
                        outT[c, a] += y * arr[r, a]


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _as_state(state: np.ndarray) -> np.ndarray:
    s = np.ascontiguousarray(state, dtype=np.complex128)
    if s.ndim != 1:
        raise ValueError("state vector must be one-dimensional")
    return s


def _prepare(state, gate_matrix, targets):
    s = _as_state(state)
    k = num_qubits(s)
    q1, q2, swapped = _check_targets(k, targets)
    g = np.ascontiguousarray(gate_matrix, dtype=np.complex128)
    if swapped:
        g = wire_swapped_matrix(g)
    p, q, n = leg_dims(k, q1, q2)
    return s, g, q1, q2, swapped, p, q, n


def apply_gate(
    state: np.ndarray,
    gate: Gate,
    out: np.ndarray | None = None,
    variant: str = "kernel",
) -> np.ndarray:
    """Apply a two-qubit gate to a state vector.

    ``variant`` selects between the two loop orderings: ``"kernel"`` streams
    the environment legs and runs the unrolled 4x4 multiplication innermost;
    ``"plain"`` accumulates gate entries in an outer loop. Both produce
    bit-identical results.
    """
    s, g, q1, q2, _, p, q, n = _prepare(state, gate.matrix, gate.targets)
    if out is None:
        out = np.empty_like(s)
    elif out is state or np.may_share_memory(out, s):
        raise ValueError("output buffer must not alias the input state")
    adjacent = q2 == q1 + 1
    if variant == "kernel":
        if adjacent:
            _apply_adjacent_kernel(s, g, p, n, out)
        else:
            _apply_general_kernel(s, g, p, q, n, out)
    elif variant == "plain":
        if adjacent:
            _apply_adjacent_plain(s, g, p, n, out)
        else:
            _apply_general_plain(s, g, p, q, n, out)
    else:
        raise ValueError(f"unknown kernel variant {variant!r}")
    return out


def hole_contract(
    bra: np.ndarray, ket: np.ndarray, targets: tuple[int, int]
) -> np.ndarray:
    """Environment of a missing gate between two state vectors.

    Returns D with ``sum_ij G[i,j] * D[i,j] == bra . apply_gate(ket, G)`` for
    every gate G (the reinsertion identity). The bra is *not* conjugated.
    """
    b = _as_state(bra)
    kt = _as_state(ket)
    if b.shape != kt.shape:
        raise ValueError("bra and ket must have the same length")
    k = num_qubits(b)
    q1, q2, swapped = _check_targets(k, targets)
    p, q, n = leg_dims(k, q1, q2)
    out = np.empty((4, 4), dtype=np.complex128)
    _hole_contract_core(b, kt, p, q, n, out)
    if swapped:
        out = out[WIRE_SWAP][:, WIRE_SWAP]
    return out


def hole_apply(
    state: np.ndarray,
    targets: tuple[int, int],
    support: np.ndarray | None = None,
) -> np.ndarray:
    """Apply a gate hole: expand a state vector into a state vector array.

    Slot ``a`` of the result corresponds to gate entry ``support[a]``
    (row-major ``4*i + j``; all 16 entries by default). Contracting the slot
    index with ``vec(G)`` reproduces ``apply_gate(state, G)``. The result has
    shape ``(2**k, arity)`` with the interleaved layout described in the
    module docstring.
    """
    s = _as_state(state)
    k = num_qubits(s)
    q1, q2, swapped = _check_targets(k, targets)
    sup = DENSE_SUPPORT if support is None else np.asarray(support, dtype=np.int64)
    if swapped:
        sup_eff = _swapped_support(sup)
    else:
        sup_eff = sup
    rows, cols = support_table(sup_eff)
    p, q, n = leg_dims(k, q1, q2)
    out = np.empty((s.shape[0], sup.shape[0]), dtype=np.complex128)
    _hole_apply_core(s, p, q, n, rows, cols, out)
    return out


def _swapped_support(support: np.ndarray) -> np.ndarray:
    """Entry indices after exchanging the gate wires: (i,j) -> (sigma i, sigma j)."""
    rows, cols = support_table(support)
    return WIRE_SWAP[rows] * 4 + WIRE_SWAP[cols]


def apply_gate_to_array(
    array: np.ndarray,
    gate: Gate,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Apply a gate to every logical vector of a state vector array."""
    arr = np.ascontiguousarray(array, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError("state vector array must have shape (2**k, arity)")
    k = num_qubits(arr[:, 0])
    q1, q2, swapped = _check_targets(k, gate.targets)
    g = np.ascontiguousarray(gate.matrix, dtype=np.complex128)
    if swapped:
        g = wire_swapped_matrix(g)
    p, q, n = leg_dims(k, q1, q2)
    if out is None:
        out = np.empty_like(arr)
    elif out is array or np.may_share_memory(out, arr):
        raise ValueError("output buffer must not alias the input array")
    if q2 == q1 + 1:
        _array_apply_adjacent(arr, g, p, n, out)
    else:
        _array_apply_general(arr, g, p, q, n, out)
    return out


def hole_contract_array(
    bra: np.ndarray,
    ket_array: np.ndarray,
    targets: tuple[int, int],
    support: np.ndarray | None = None,
) -> np.ndarray:
    """One hole contraction per array slot.

    Returns B of shape ``(arity, len(support))`` with
    ``B[a, c] = hole_contract(bra, ket_array[:, a], targets).flat[support[c]]``.
    """
    b = _as_state(bra)
    arr = np.ascontiguousarray(ket_array, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != b.shape[0]:
        raise ValueError("ket array must have shape (len(bra), arity)")
    k = num_qubits(b)
    q1, q2, swapped = _check_targets(k, targets)
    sup = DENSE_SUPPORT if support is None else np.asarray(support, dtype=np.int64)
    sup_eff = _swapped_support(sup) if swapped else sup
    rows, cols = support_table(sup_eff)
    p, q, n = leg_dims(k, q1, q2)
    outT = np.empty((sup.shape[0], arr.shape[1]), dtype=np.complex128)
    _hole_contract_array_core(b, arr, p, q, n, rows, cols, outT)
    return np.ascontiguousarray(outT.T)
