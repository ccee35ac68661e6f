"""Matrix-free evaluation of the trace objective, its gradient and Hessian.

The target function is f(G) = -Re Tr[U^dag C(G)], evaluated as a sum over all
computational basis states: for each |j> a forward pass applies the circuit to
|j> while phi = conj(U|j>) is propagated backward with transposed gates. The
cached intermediate vectors of both passes yield every per-gate derivative as
a hole contraction, and a second forward pass with hole arrays yields all
Hessian blocks. The summation over basis states is embarrassingly parallel;
chunks are fixed independently of the worker count and combined in ascending
order, so results are bit-identical for any number of workers.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import kernels, manifold
from .circuit import Circuit, accumulate_shared, translation_classes
from .kernels import (
    DENSE_SUPPORT,
    PARITY_SUPPORT,
    WIRE_SWAP,
    Gate,
    apply_gate,
    basis_state,
    hole_contract,
    leg_dims,
    support_table,
    wire_swapped_matrix,
    _apply_adjacent_kernel,
    _apply_adjacent_parity,
    _apply_general_kernel,
    _apply_general_parity,
    _array_apply_adjacent,
    _array_apply_adjacent_parity,
    _array_apply_general,
    _array_apply_general_parity,
    _hole_apply_core,
    _hole_contract_array_core,
    _hole_contract_core,
)

__all__ = [
    "PassCache",
    "HessianBlocks",
    "ObjectiveReport",
    "target_value",
    "summand_gradient",
    "full_gradient",
    "full_hessian",
    "hessian_vector_product",
    "build_pass_cache",
    "parallel_reduce",
    "chunk_bounds",
    "frobenius_error_squared",
    "default_workers",
]

# counter slots shared between the jitted drivers and the report
_C_GATE, _C_ARRAY, _C_HOLE_APPLY, _C_HOLE_CONTRACT, _C_PAIR = range(5)
_COUNT_NAMES = (
    "gate_applications",
    "array_gate_applications",
    "hole_applications",
    "hole_contractions",
    "pair_contractions",
)

_CHUNK_STATES = 64  # basis states per reduction chunk (fixed, never worker-dependent)


def default_workers() -> int:
    """Worker count from the RQCO_WORKERS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("RQCO_WORKERS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# reports and block containers
# ---------------------------------------------------------------------------


@dataclass
class PassCache:
    """Cached intermediate vectors: psi_0..psi_n forward, phi_0..phi_n backward."""

    forward_states: list[np.ndarray]
    backward_states: list[np.ndarray]


@dataclass
class HessianBlocks:
    """Upper-triangular grid of holomorphic second-derivative blocks.

    ``blocks[(a, b)]`` with a <= b holds d^2 f~ / dG_a dG_b restricted to the
    ``support`` entries of each gate (all 16 in dense mode, the 8 on-pattern
    entries in parity mode). Diagonal blocks exist only through shared-slot
    accumulation; the second derivative with respect to a single slot is zero.
    """

    num_logical: int
    support: np.ndarray
    blocks: dict[tuple[int, int], np.ndarray]

    def apply_direction(self, directions: list[np.ndarray]) -> list[np.ndarray]:
        """Complex-linear action H~ . vec(Z), returned as embedded 4x4 matrices."""
        if len(directions) != self.num_logical:
            raise ValueError("need one direction matrix per logical gate")
        sup = self.support
        zvecs = [np.ascontiguousarray(z, dtype=np.complex128).reshape(16)[sup] for z in directions]
        out = [np.zeros(len(sup), dtype=np.complex128) for _ in range(self.num_logical)]
        for (a, b), blk in self.blocks.items():
            if a == b:
                out[a] += blk @ zvecs[a]
            else:
                out[a] += blk @ zvecs[b]
                out[b] += blk.T @ zvecs[a]
        embedded = []
        for vec in out:
            m = np.zeros(16, dtype=np.complex128)
            m[sup] = vec
            embedded.append(m.reshape(4, 4))
        return embedded


@dataclass
class ObjectiveReport:
    """Result of an objective evaluation."""

    value: float
    per_logical_gradient: list[np.ndarray] | None = None
    euclidean_gradients: list[np.ndarray] | None = None
    holomorphic_derivatives: list[np.ndarray] | None = None
    hessian: HessianBlocks | None = None
    wall_time: float = 0.0
    pass_counts: dict[str, int] = field(default_factory=dict)


def frobenius_error_squared(value: float, num_qubits: int) -> float:
    """||C - U||_F^2 recovered from the objective: 2 Tr[I] + 2 f."""
    return 2.0 * 2**num_qubits + 2.0 * value


# ---------------------------------------------------------------------------
# circuit plan: flat arrays consumed by the jitted drivers
# ---------------------------------------------------------------------------


class _Plan:
    def __init__(self, circuit: Circuit, parity_mode: bool):
        k = circuit.num_qubits
        n = circuit.num_slots
        self.circuit = circuit
        self.num_qubits = k
        self.num_slots = n
        self.support = PARITY_SUPPORT if parity_mode else DENSE_SUPPORT
        arity = len(self.support)
        self.mats = np.empty((n, 4, 4), dtype=np.complex128)
        self.mats_t = np.empty((n, 4, 4), dtype=np.complex128)
        self.adjacent = np.empty(n, dtype=np.bool_)
        self.sparse = np.empty(n, dtype=np.bool_)
        self.ps = np.empty(n, dtype=np.int64)
        self.qs = np.empty(n, dtype=np.int64)
        self.ns = np.empty(n, dtype=np.int64)
        self.swapped = np.empty(n, dtype=np.bool_)
        self.logical = np.empty(n, dtype=np.int64)
        self.hole_row = np.empty((n, arity), dtype=np.int64)
        self.hole_col = np.empty((n, arity), dtype=np.int64)
        for i, slot in enumerate(circuit.slots):
            t1, t2 = slot.targets
            swapped = t1 > t2
            q1, q2 = (t2, t1) if swapped else (t1, t2)
            mat = circuit.logical_gates[slot.logical_id].matrix
            if swapped:
                mat = wire_swapped_matrix(mat)
            self.mats[i] = mat
            self.mats_t[i] = mat.T
            self.adjacent[i] = q2 == q1 + 1
            # structurally zero entries can be skipped entirely in parity mode
            self.sparse[i] = parity_mode and _parity_zeros_exact(mat)
            self.ps[i], self.qs[i], self.ns[i] = leg_dims(k, q1, q2)
            self.swapped[i] = swapped
            self.logical[i] = slot.logical_id
            sup = kernels._swapped_support(self.support) if swapped else self.support
            self.hole_row[i], self.hole_col[i] = support_table(sup)

    def unswap(self, d: np.ndarray, slot: int) -> np.ndarray:
        """Per-slot 4x4 derivative back to the slot's own wire order."""
        if self.swapped[slot]:
            return d[WIRE_SWAP][:, WIRE_SWAP]
        return d


_PARITY_OFF = ((0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2))


def _parity_zeros_exact(mat: np.ndarray) -> bool:
    return all(mat[i, j] == 0 for i, j in _PARITY_OFF)


def _pair_csr(circuit: Circuit, dedup: bool):
    """Slot pairs to contract, grouped by first slot, with multiplicity and
    logical-pair routing. Without dedup this is every ordered pair once."""
    nlog = circuit.num_logical
    lids = [s.logical_id for s in circuit.slots]

    def route(a: int, b: int) -> int:
        return a * nlog - a * (a - 1) // 2 + (b - a)

    if dedup:
        pairs = translation_classes(circuit)
    else:
        n = circuit.num_slots
        pairs = [((a, b), 1) for a in range(n) for b in range(a + 1, n)]
    grouped: dict[int, list[tuple[int, int]]] = {}
    for (a, b), mult in pairs:
        grouped.setdefault(a, []).append((b, mult))
    firsts = sorted(grouped)
    first_list = np.array(firsts, dtype=np.int64)
    starts = [0]
    seconds, mults, routes, syms, flips = [], [], [], [], []
    for a in firsts:
        for b, mult in sorted(grouped[a]):
            la, lb = lids[a], lids[b]
            seconds.append(b)
            mults.append(float(mult))
            routes.append(route(min(la, lb), max(la, lb)))
            syms.append(la == lb)
            flips.append(la > lb)
        starts.append(len(seconds))
    return (
        first_list,
        np.array(starts, dtype=np.int64),
        np.array(seconds, dtype=np.int64),
        np.array(mults, dtype=np.float64),
        np.array(routes, dtype=np.int64),
        np.array(syms, dtype=np.bool_),
        np.array(flips, dtype=np.bool_),
    )


# ---------------------------------------------------------------------------
# jitted pass drivers
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _apply_slot(src, g, adjacent, sparse, p, q, n, dst):
    if adjacent:
        if sparse:
            _apply_adjacent_parity(src, g, p, n, dst)
        else:
            _apply_adjacent_kernel(src, g, p, n, dst)
    else:
        if sparse:
            _apply_general_parity(src, g, p, q, n, dst)
        else:
            _apply_general_kernel(src, g, p, q, n, dst)


@njit(cache=True, nogil=True)
def _apply_slot_array(src, g, adjacent, sparse, p, q, n, dst):
    if adjacent:
        if sparse:
            _array_apply_adjacent_parity(src, g, p, n, dst)
        else:
            _array_apply_adjacent(src, g, p, n, dst)
    else:
        if sparse:
            _array_apply_general_parity(src, g, p, q, n, dst)
        else:
            _array_apply_general(src, g, p, q, n, dst)


@njit(cache=True, nogil=True)
def _dot_plain(a, b):
    s = 0.0 + 0.0j
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True, nogil=True)
def _value_chunk(mats, adjacent, sparse, ps, qs, ns, j0, j1, phi0s, buf_a, buf_b, counts):
    n = mats.shape[0]
    value = 0.0 + 0.0j
    for j in range(j0, j1):
        buf_a[:] = 0.0
        buf_a[j] = 1.0
        cur, nxt = buf_a, buf_b
        for l in range(n):
            _apply_slot(cur, mats[l], adjacent[l], sparse[l], ps[l], qs[l], ns[l], nxt)
            cur, nxt = nxt, cur
        counts[_C_GATE] += n
        value += _dot_plain(phi0s[j - j0], cur)
    return value


@njit(cache=True, nogil=True)
def _run_passes(mats, mats_t, adjacent, sparse, ps, qs, ns, j, phi0, psis, phis, counts):
    n = mats.shape[0]
    psis[0, :] = 0.0
    psis[0, j] = 1.0
    for l in range(n):
        _apply_slot(psis[l], mats[l], adjacent[l], sparse[l], ps[l], qs[l], ns[l], psis[l + 1])
    phis[0, :] = phi0
    for m in range(1, n + 1):
        l = n - m
        _apply_slot(phis[m - 1], mats_t[l], adjacent[l], sparse[l], ps[l], qs[l], ns[l], phis[m])
    counts[_C_GATE] += 2 * n
    return _dot_plain(phi0, psis[n])


@njit(cache=True, nogil=True)
def _gradient_chunk(
    mats, mats_t, adjacent, sparse, ps, qs, ns, j0, j1, phi0s, psis, phis, dacc, counts
):
    n = mats.shape[0]
    tmp = np.empty((4, 4), dtype=np.complex128)
    value = 0.0 + 0.0j
    for j in range(j0, j1):
        value += _run_passes(
            mats, mats_t, adjacent, sparse, ps, qs, ns, j, phi0s[j - j0], psis, phis, counts
        )
        for l in range(n):
            _hole_contract_core(phis[n - l - 1], psis[l], ps[l], qs[l], ns[l], tmp)
            dacc[l] += tmp
        counts[_C_HOLE_CONTRACT] += n
    return value


@njit(cache=True, nogil=True)
def _hessian_chunk(
    mats,
    mats_t,
    adjacent,
    sparse,
    ps,
    qs,
    ns,
    hole_row,
    hole_col,
    first_list,
    first_start,
    pair_second,
    pair_mult,
    pair_route,
    pair_sym,
    pair_flip,
    j0,
    j1,
    phi0s,
    psis,
    phis,
    harr,
    harr2,
    dacc,
    block_acc,
    counts,
):
    n = mats.shape[0]
    arity = hole_row.shape[1]
    tmp = np.empty((4, 4), dtype=np.complex128)
    out_t = np.empty((arity, arity), dtype=np.complex128)
    value = 0.0 + 0.0j
    for j in range(j0, j1):
        value += _run_passes(
            mats, mats_t, adjacent, sparse, ps, qs, ns, j, phi0s[j - j0], psis, phis, counts
        )
        for l in range(n):
            _hole_contract_core(phis[n - l - 1], psis[l], ps[l], qs[l], ns[l], tmp)
            dacc[l] += tmp
        counts[_C_HOLE_CONTRACT] += n
        for fi in range(first_list.shape[0]):
            l = first_list[fi]
            lo = first_start[fi]
            hi = first_start[fi + 1]
            last = pair_second[hi - 1]
            _hole_apply_core(psis[l], ps[l], qs[l], ns[l], hole_row[l], hole_col[l], harr)
            counts[_C_HOLE_APPLY] += 1
            cur, nxt = harr, harr2
            pi = lo
            for lp in range(l + 1, last + 1):
                if pi < hi and pair_second[pi] == lp:
                    _hole_contract_array_core(
                        phis[n - lp - 1], cur, ps[lp], qs[lp], ns[lp],
                        hole_row[lp], hole_col[lp], out_t,
                    )
                    counts[_C_PAIR] += 1
                    m = pair_mult[pi]
                    r = pair_route[pi]
                    if pair_sym[pi]:
                        for a in range(arity):
                            for b in range(arity):
                                v = m * out_t[b, a]
                                block_acc[r, a, b] += v
                                block_acc[r, b, a] += v
                    elif pair_flip[pi]:
                        # first slot's logical gate comes later: transpose into
                        # the (lb, la) block
                        for a in range(arity):
                            for b in range(arity):
                                block_acc[r, b, a] += m * out_t[b, a]
                    else:
                        for a in range(arity):
                            for b in range(arity):
                                block_acc[r, a, b] += m * out_t[b, a]
                    pi += 1
                if lp < last:
                    _apply_slot_array(
                        cur, mats[lp], adjacent[lp], sparse[lp], ps[lp], qs[lp], ns[lp], nxt
                    )
                    counts[_C_ARRAY] += 1
                    cur, nxt = nxt, cur
    return value


@njit(cache=True, nogil=True)
def _add_into(dst, src):
    for i in range(dst.shape[0]):
        dst[i] += src[i]


@njit(cache=True, nogil=True)
def _hvp_chunk(
    mats,
    mats_t,
    adjacent,
    sparse,
    ps,
    qs,
    ns,
    zmats,
    zmats_t,
    j0,
    j1,
    phi0s,
    psis,
    phis,
    vbuf,
    tbuf,
    oacc,
    counts,
):
    # Forward-over-reverse Hessian-vector product for one summand at a time:
    # build the directed-gradient graph, then accumulate its derivative with
    # two O(n) recursions (one ascending for the ket side, one descending for
    # the bra side); each branching of the graph becomes a summation.
    n = mats.shape[0]
    tmp = np.empty((4, 4), dtype=np.complex128)
    for j in range(j0, j1):
        _run_passes(mats, mats_t, adjacent, sparse, ps, qs, ns, j, phi0s[j - j0], psis, phis, counts)
        # ascending: v_s = G_{s-1} v_{s-1} + Z_{s-1} psi_{s-1}
        vbuf[:] = 0.0
        for s in range(1, n):
            _apply_slot(vbuf, mats[s - 1], adjacent[s - 1], sparse[s - 1], ps[s - 1], qs[s - 1], ns[s - 1], tbuf)
            vbuf, tbuf = tbuf, vbuf
            _apply_slot(psis[s - 1], zmats[s - 1], adjacent[s - 1], False, ps[s - 1], qs[s - 1], ns[s - 1], tbuf)
            _add_into(vbuf, tbuf)
            counts[_C_GATE] += 2
            _hole_contract_core(phis[n - s - 1], vbuf, ps[s], qs[s], ns[s], tmp)
            counts[_C_HOLE_CONTRACT] += 1
            oacc[s] += tmp
        # descending: chi_s = G_{s+1}^T chi_{s+1} + Z_{s+1}^T phi_{n-s-2}
        vbuf[:] = 0.0
        for s in range(n - 2, -1, -1):
            _apply_slot(vbuf, mats_t[s + 1], adjacent[s + 1], sparse[s + 1], ps[s + 1], qs[s + 1], ns[s + 1], tbuf)
            vbuf, tbuf = tbuf, vbuf
            _apply_slot(phis[n - s - 2], zmats_t[s + 1], adjacent[s + 1], False, ps[s + 1], qs[s + 1], ns[s + 1], tbuf)
            _add_into(vbuf, tbuf)
            counts[_C_GATE] += 2
            _hole_contract_core(vbuf, psis[s], ps[s], qs[s], ns[s], tmp)
            counts[_C_HOLE_CONTRACT] += 1
            oacc[s] += tmp


# ---------------------------------------------------------------------------
# parallel reduction over basis states
# ---------------------------------------------------------------------------


def chunk_bounds(total: int, num_chunks: int | None = None) -> list[tuple[int, int]]:
    """Contiguous chunks covering range(total) exactly once.

    The default chunk count depends only on ``total`` (never on the worker
    count), which keeps reductions bit-identical across worker counts.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if total == 0:
        return []
    if num_chunks is None:
        num_chunks = max(1, total // _CHUNK_STATES)
    num_chunks = max(1, min(num_chunks, total))
    base, extra = divmod(total, num_chunks)
    bounds = []
    start = 0
    for c in range(num_chunks):
        stop = start + base + (1 if c < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def parallel_reduce(num_items: int, evaluate_chunk, worker_count: int = 1):
    """Evaluate ``evaluate_chunk(start, stop)`` over fixed chunks and combine
    the partials with ``+`` in ascending chunk order.

    The combination order is independent of ``worker_count`` and of thread
    scheduling, so floating-point results are reproducible.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    bounds = chunk_bounds(num_items)
    if not bounds:
        return None
    if worker_count == 1:
        partials = [evaluate_chunk(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            partials = list(pool.map(lambda ab: evaluate_chunk(*ab), bounds))
    acc = partials[0]
    for part in partials[1:]:
        acc = acc + part
    return acc


class _Partial:
    """Per-chunk accumulator with field-wise addition."""

    __slots__ = ("value", "dslots", "blocks", "hvp", "counts")

    def __init__(self, value, dslots=None, blocks=None, hvp=None, counts=None):
        self.value = value
        self.dslots = dslots
        self.blocks = blocks
        self.hvp = hvp
        self.counts = counts

    def __add__(self, other):
        def add(a, b):
            return None if a is None else a + b

        return _Partial(
            self.value + other.value,
            add(self.dslots, other.dslots),
            add(self.blocks, other.blocks),
            add(self.hvp, other.hvp),
            add(self.counts, other.counts),
        )


def _phi_block(oracle, k: int, j0: int, j1: int) -> np.ndarray:
    out = np.empty((j1 - j0, 2**k), dtype=np.complex128)
    for idx, j in enumerate(range(j0, j1)):
        out[idx] = np.conj(oracle.apply(basis_state(k, j)))
    return out


def _check_oracle(circuit: Circuit, oracle) -> None:
    if oracle.num_qubits != circuit.num_qubits:
        raise ValueError(
            f"oracle acts on {oracle.num_qubits} qubits, circuit on {circuit.num_qubits}"
        )


def _assert_bounded(value: float, k: int) -> None:
    # Cauchy-Schwarz on the trace: f >= -2^k always.
    if value < -(2**k) * (1.0 + 1e-9) - 1e-9:
        raise FloatingPointError(f"objective {value} below the -2^k trace bound")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def target_value(circuit: Circuit, oracle, workers: int | None = None) -> float:
    """f(G) = -Re Tr[U^dag C(G)] via the basis-state sum."""
    _check_oracle(circuit, oracle)
    workers = default_workers() if workers is None else workers
    plan = _Plan(circuit, parity_mode=False)
    k = plan.num_qubits
    N = 2**k

    def chunk(j0, j1):
        phi0s = _phi_block(oracle, k, j0, j1)
        counts = np.zeros(5, dtype=np.int64)
        buf_a = np.empty(N, dtype=np.complex128)
        buf_b = np.empty(N, dtype=np.complex128)
        val = _value_chunk(
            plan.mats, plan.adjacent, plan.sparse, plan.ps, plan.qs, plan.ns,
            j0, j1, phi0s, buf_a, buf_b, counts,
        )
        return _Partial(val, counts=counts)

    part = parallel_reduce(N, chunk, workers)
    value = float(-part.value.real)
    _assert_bounded(value, k)
    return value


def build_pass_cache(circuit: Circuit, oracle, j: int) -> PassCache:
    """Forward and backward caches for the j-th summand (reference path)."""
    _check_oracle(circuit, oracle)
    k = circuit.num_qubits
    psi = basis_state(k, j)
    forward = [psi]
    for slot in circuit.slots:
        forward.append(apply_gate(forward[-1], Gate(circuit.logical_gates[slot.logical_id].matrix, slot.targets)))
    phi = np.conj(oracle.apply(basis_state(k, j)))
    backward = [phi]
    for slot in reversed(circuit.slots):
        mat = circuit.logical_gates[slot.logical_id].matrix.T
        backward.append(apply_gate(backward[-1], Gate(mat, slot.targets)))
    return PassCache(forward, backward)


def summand_gradient(j: int, circuit: Circuit, oracle):
    """Value and per-slot holomorphic derivatives of one basis-state summand.

    Costs exactly 2n gate applications plus n hole contractions.
    """
    if not 0 <= j < 2**circuit.num_qubits:
        raise ValueError(f"basis index {j} out of range")
    cache = build_pass_cache(circuit, oracle, j)
    n = circuit.num_slots
    value = complex(cache.backward_states[0] @ cache.forward_states[-1])
    derivs = []
    for l, slot in enumerate(circuit.slots):
        derivs.append(
            hole_contract(cache.backward_states[n - l - 1], cache.forward_states[l], slot.targets)
        )
    return value, derivs


def _logical_derivatives(plan: _Plan, circuit: Circuit, dslots: np.ndarray) -> list[np.ndarray]:
    per_slot = [plan.unswap(dslots[i], i) for i in range(circuit.num_slots)]
    return accumulate_shared(per_slot, circuit)


def _riemannian_from_holomorphic(circuit, dlogical, parity_mode):
    euclid = [manifold.euclid_gradient_from_holomorphic(d) for d in dlogical]
    riem = [
        manifold.project_tangent_gate(g.matrix, e, parity_mode)
        for g, e in zip(circuit.logical_gates, euclid)
    ]
    return euclid, riem


def full_gradient(
    circuit: Circuit,
    oracle,
    workers: int | None = None,
    parity_mode: bool = False,
) -> ObjectiveReport:
    """Objective value and Riemannian gradient per logical gate."""
    _check_oracle(circuit, oracle)
    workers = default_workers() if workers is None else workers
    t0 = time.perf_counter()
    plan = _Plan(circuit, parity_mode)
    k = plan.num_qubits
    n = plan.num_slots
    N = 2**k

    def chunk(j0, j1):
        phi0s = _phi_block(oracle, k, j0, j1)
        counts = np.zeros(5, dtype=np.int64)
        psis = np.empty((n + 1, N), dtype=np.complex128)
        phis = np.empty((n + 1, N), dtype=np.complex128)
        dacc = np.zeros((n, 4, 4), dtype=np.complex128)
        val = _gradient_chunk(
            plan.mats, plan.mats_t, plan.adjacent, plan.sparse, plan.ps, plan.qs, plan.ns,
            j0, j1, phi0s, psis, phis, dacc, counts,
        )
        return _Partial(val, dslots=dacc, counts=counts)

    part = parallel_reduce(N, chunk, workers)
    value = float(-part.value.real)
    _assert_bounded(value, k)
    dlogical = _logical_derivatives(plan, circuit, part.dslots)
    euclid, riem = _riemannian_from_holomorphic(circuit, dlogical, parity_mode)
    return ObjectiveReport(
        value=value,
        per_logical_gradient=riem,
        euclidean_gradients=euclid,
        holomorphic_derivatives=dlogical,
        wall_time=time.perf_counter() - t0,
        pass_counts=dict(zip(_COUNT_NAMES, (int(c) for c in part.counts))),
    )


def full_hessian(
    circuit: Circuit,
    oracle,
    use_translation_dedup: bool = False,
    parity_mode: bool = False,
    workers: int | None = None,
) -> ObjectiveReport:
    """Value, gradient and all Hessian blocks in one set of passes.

    For every slot l a hole array is built from the cached forward state and
    propagated forward; at every later slot l' it is contracted with the
    cached backward state, yielding the (l, l') block. With translation
    deduplication only one representative per translation class is contracted
    and scaled by the class multiplicity.
    """
    _check_oracle(circuit, oracle)
    workers = default_workers() if workers is None else workers
    t0 = time.perf_counter()
    plan = _Plan(circuit, parity_mode)
    k = plan.num_qubits
    n = plan.num_slots
    N = 2**k
    arity = len(plan.support)
    csr = _pair_csr(circuit, use_translation_dedup)
    first_list, first_start, pair_second, pair_mult, pair_route, pair_sym, pair_flip = csr
    nlog = circuit.num_logical
    nroutes = nlog * (nlog + 1) // 2

    def chunk(j0, j1):
        phi0s = _phi_block(oracle, k, j0, j1)
        counts = np.zeros(5, dtype=np.int64)
        psis = np.empty((n + 1, N), dtype=np.complex128)
        phis = np.empty((n + 1, N), dtype=np.complex128)
        harr = np.empty((N, arity), dtype=np.complex128)
        harr2 = np.empty((N, arity), dtype=np.complex128)
        dacc = np.zeros((n, 4, 4), dtype=np.complex128)
        blocks = np.zeros((nroutes, arity, arity), dtype=np.complex128)
        val = _hessian_chunk(
            plan.mats, plan.mats_t, plan.adjacent, plan.sparse, plan.ps, plan.qs, plan.ns,
            plan.hole_row, plan.hole_col,
            first_list, first_start, pair_second, pair_mult, pair_route, pair_sym, pair_flip,
            j0, j1, phi0s, psis, phis, harr, harr2, dacc, blocks, counts,
        )
        return _Partial(val, dslots=dacc, blocks=blocks, counts=counts)

    part = parallel_reduce(N, chunk, workers)
    value = float(-part.value.real)
    _assert_bounded(value, k)
    dlogical = _logical_derivatives(plan, circuit, part.dslots)
    euclid, riem = _riemannian_from_holomorphic(circuit, dlogical, parity_mode)
    blocks: dict[tuple[int, int], np.ndarray] = {}
    used = {int(r) for r in pair_route}
    for a in range(nlog):
        for b in range(a, nlog):
            r = a * nlog - a * (a - 1) // 2 + (b - a)
            if r in used:
                blocks[(a, b)] = part.blocks[r]
    hess = HessianBlocks(nlog, np.asarray(plan.support), blocks)
    return ObjectiveReport(
        value=value,
        per_logical_gradient=riem,
        euclidean_gradients=euclid,
        holomorphic_derivatives=dlogical,
        hessian=hess,
        wall_time=time.perf_counter() - t0,
        pass_counts=dict(zip(_COUNT_NAMES, (int(c) for c in part.counts))),
    )


def hessian_vector_product(
    circuit: Circuit,
    oracle,
    directions: list[np.ndarray],
    workers: int | None = None,
) -> list[np.ndarray]:
    """H~ . vec(Z) per logical gate without forming the Hessian.

    ``directions`` holds one 4x4 matrix per logical gate; the result is the
    complex-linear action of the holomorphic Hessian, matching
    ``HessianBlocks.apply_direction`` of :func:`full_hessian`.
    """
    _check_oracle(circuit, oracle)
    if len(directions) != circuit.num_logical:
        raise ValueError("need one direction matrix per logical gate")
    workers = default_workers() if workers is None else workers
    plan = _Plan(circuit, parity_mode=False)
    k = plan.num_qubits
    n = plan.num_slots
    N = 2**k
    zmats = np.empty((n, 4, 4), dtype=np.complex128)
    zmats_t = np.empty((n, 4, 4), dtype=np.complex128)
    for i, slot in enumerate(circuit.slots):
        z = np.ascontiguousarray(directions[slot.logical_id], dtype=np.complex128)
        if plan.swapped[i]:
            z = wire_swapped_matrix(z)
        zmats[i] = z
        zmats_t[i] = z.T

    def chunk(j0, j1):
        phi0s = _phi_block(oracle, k, j0, j1)
        counts = np.zeros(5, dtype=np.int64)
        psis = np.empty((n + 1, N), dtype=np.complex128)
        phis = np.empty((n + 1, N), dtype=np.complex128)
        vbuf = np.empty(N, dtype=np.complex128)
        tbuf = np.empty(N, dtype=np.complex128)
        oacc = np.zeros((n, 4, 4), dtype=np.complex128)
        _hvp_chunk(
            plan.mats, plan.mats_t, plan.adjacent, plan.sparse, plan.ps, plan.qs, plan.ns,
            zmats, zmats_t, j0, j1, phi0s, psis, phis, vbuf, tbuf, oacc, counts,
        )
        return _Partial(0.0 + 0.0j, hvp=oacc, counts=counts)

    part = parallel_reduce(N, chunk, workers)
    return _logical_derivatives(plan, circuit, part.hvp)
