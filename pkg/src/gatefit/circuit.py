"""Circuit topology: sequential slot lists, brick walls, shared-gate bookkeeping.

A circuit is a sequence of slots applied right to left (the slot listed first
acts on the input state first). Several slots may reference the same logical
gate; derivatives computed per slot are accumulated onto the logical gates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .kernels import Gate, apply_gate

__all__ = [
    "GateSlot",
    "BrickwallMeta",
    "Circuit",
    "build_brickwall",
    "circuit_apply",
    "accumulate_shared",
    "translation_classes",
    "save_circuit",
    "load_circuit",
]


@dataclass(frozen=True)
class GateSlot:
    """One gate application: which logical gate, and on which qubit pair."""

    logical_id: int
    targets: tuple[int, int]


@dataclass(frozen=True)
class BrickwallMeta:
    """Brick-wall structure attached to a circuit built from alternating layers."""

    num_layers: int
    layer_of_slot: tuple[int, ...]
    translation_period: int = 2
    periodic: bool = False


@dataclass
class Circuit:
    """Sequential gate list with shared-gate identity map.

    Treat instances as immutable after construction; derive updated circuits
    with :meth:`with_gates`.
    """

    num_qubits: int
    slots: list[GateSlot]
    logical_gates: list[Gate]
    topology: BrickwallMeta | None = None

    def __post_init__(self):
        for slot in self.slots:
            if not 0 <= slot.logical_id < len(self.logical_gates):
                raise ValueError(f"slot references unknown logical gate {slot.logical_id}")
            t1, t2 = slot.targets
            if t1 == t2 or not (0 <= t1 < self.num_qubits and 0 <= t2 < self.num_qubits):
                raise ValueError(f"invalid slot targets {slot.targets}")

    @property
    def num_slots(self) -> int:
        return len(self.slots)

    @property
    def num_logical(self) -> int:
        return len(self.logical_gates)

    def slot_matrix(self, index: int) -> np.ndarray:
        return self.logical_gates[self.slots[index].logical_id].matrix

    def with_gates(self, matrices: list[np.ndarray]) -> "Circuit":
        """Copy of the circuit with replaced logical gate matrices."""
        if len(matrices) != len(self.logical_gates):
            raise ValueError("need one matrix per logical gate")
        gates = [
            Gate(m, g.targets, g.parity_sparse)
            for m, g in zip(matrices, self.logical_gates)
        ]
        return Circuit(self.num_qubits, self.slots, gates, self.topology)


def build_brickwall(
    num_qubits: int,
    num_layers: int,
    initial_gates: list[Gate] | list[np.ndarray],
    periodic: bool = False,
) -> Circuit:
    """Brick-wall circuit: odd layers act on bonds (0,1),(2,3),...; even layers
    on (1,2),(3,4),...,(L-1,0) (the wrap-around bond only when periodic).
    Within a layer every slot shares the layer's single logical gate.
    """
    if num_qubits % 2 != 0 or num_qubits < 2:
        raise ValueError("brick wall requires an even number of qubits >= 2")
    if len(initial_gates) != num_layers:
        raise ValueError("need exactly one initial gate per layer")
    logical = []
    for g in initial_gates:
        if isinstance(g, Gate):
            logical.append(g)
        else:
            logical.append(Gate(g, (0, 1)))
    slots: list[GateSlot] = []
    layer_of_slot: list[int] = []
    for layer in range(num_layers):
        for a, b in _brickwall_bonds(num_qubits, layer, periodic):
            slots.append(GateSlot(layer, (a, b)))
            layer_of_slot.append(layer)
    meta = BrickwallMeta(num_layers, tuple(layer_of_slot), 2, periodic)
    return Circuit(num_qubits, slots, logical, meta)


def _brickwall_bonds(num_qubits: int, layer: int, periodic: bool) -> list[tuple[int, int]]:
    if layer % 2 == 0:
        return [(j, j + 1) for j in range(0, num_qubits, 2)]
    bonds = [(j, j + 1) for j in range(1, num_qubits - 1, 2)]
    if periodic:
        bonds.append((num_qubits - 1, 0))
    return bonds


def circuit_apply(
    circuit: Circuit, state: np.ndarray, direction: str = "forward"
) -> np.ndarray:
    """Apply the circuit to a state vector.

    ``"forward"`` applies the slots in order with their gate matrices;
    ``"backward_transposed"`` applies transposed (not conjugated) matrices in
    reverse slot order, as needed by the chain rule of the backward pass.
    """
    if state.shape[0] != 2**circuit.num_qubits:
        raise ValueError("state dimension does not match circuit qubit count")
    cur = np.ascontiguousarray(state, dtype=np.complex128).copy()
    buf = np.empty_like(cur)
    if direction == "forward":
        order = range(circuit.num_slots)
        transpose = False
    elif direction == "backward_transposed":
        order = range(circuit.num_slots - 1, -1, -1)
        transpose = True
    else:
        raise ValueError(f"unknown direction {direction!r}")
    for i in order:
        slot = circuit.slots[i]
        mat = circuit.logical_gates[slot.logical_id].matrix
        if transpose:
            mat = mat.T
        apply_gate(cur, Gate(mat, slot.targets), out=buf)
        cur, buf = buf, cur
    return cur


def accumulate_shared(
    per_slot_grads: list[np.ndarray], circuit: Circuit
) -> list[np.ndarray]:
    """Sum per-slot gradient matrices onto their logical gates."""
    if len(per_slot_grads) != circuit.num_slots:
        raise ValueError("need exactly one gradient matrix per slot")
    out = [np.zeros((4, 4), dtype=np.complex128) for _ in range(circuit.num_logical)]
    for slot, grad in zip(circuit.slots, per_slot_grads):
        out[slot.logical_id] += grad
    return out


def translation_classes(
    circuit: Circuit, policy: str = "lex_min"
) -> list[tuple[tuple[int, int], int]]:
    """Equivalence classes of ordered slot pairs under cyclic site translation.

    Only defined for periodic brick walls (translations by multiples of the
    two-site period map each layer's bond set onto itself). Returns one
    representative pair per class together with the class size; the
    representative is the lexicographically smallest pair (``"lex_min"``,
    default) or largest (``"lex_max"``, useful for invariance checks).
    """
    meta = circuit.topology
    if meta is None or not meta.periodic:
        raise ValueError("translation classes require a periodic brick-wall circuit")
    L = circuit.num_qubits
    lookup: dict[tuple[int, int], int] = {}
    for idx, slot in enumerate(circuit.slots):
        lookup[(meta.layer_of_slot[idx], slot.targets[0])] = idx
    shifts = range(0, L, meta.translation_period)

    def translate(slot_idx: int, s: int) -> int:
        layer = meta.layer_of_slot[slot_idx]
        start = circuit.slots[slot_idx].targets[0]
        return lookup[(layer, (start + s) % L)]

    pick = min if policy == "lex_min" else max
    if policy not in ("lex_min", "lex_max"):
        raise ValueError(f"unknown representative policy {policy!r}")
    classes: dict[tuple[int, int], int] = {}
    n = circuit.num_slots
    for a in range(n):
        for b in range(a + 1, n):
            orbit = []
            for s in shifts:
                ta, tb = translate(a, s), translate(b, s)
                orbit.append((ta, tb) if ta < tb else (tb, ta))
            rep = pick(orbit)
            classes[rep] = classes.get(rep, 0) + 1
    return sorted(classes.items())


# ---------------------------------------------------------------------------
# checkpoint file
# ---------------------------------------------------------------------------


def _matrix_to_json(m: np.ndarray) -> list[list[list[float]]]:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _matrix_from_json(rows) -> np.ndarray:
    m = np.empty((4, 4), dtype=np.complex128)
    for i, row in enumerate(rows):
        for j, (re, im) in enumerate(row):
            m[i, j] = complex(re, im)
    return m


def save_circuit(circuit: Circuit, path: str) -> None:
    """Write a circuit checkpoint.

    One entry per slot; ``layer`` records the slot's layer so that logical
    gate sharing survives the round trip for non-brick-wall circuits too.
    Floats are emitted with shortest-round-trip decimals (bit exact).
    """
    meta = circuit.topology
    if meta is not None:
        layer_of_slot = meta.layer_of_slot
        num_layers = meta.num_layers
        periodic = meta.periodic
    else:
        layer_of_slot = tuple(s.logical_id for s in circuit.slots)
        num_layers = circuit.num_logical
        periodic = False
    doc = {
        "num_qubits": circuit.num_qubits,
        "layers": num_layers,
        "periodic": periodic,
        "gates": [
            {
                "targets": list(slot.targets),
                "layer": layer_of_slot[i],
                "matrix": _matrix_to_json(circuit.slot_matrix(i)),
            }
            for i, slot in enumerate(circuit.slots)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_circuit(path: str) -> Circuit:
    with open(path) as fh:
        doc = json.load(fh)
    num_qubits = int(doc["num_qubits"])
    num_layers = int(doc["layers"])
    periodic = bool(doc["periodic"])
    entries = doc["gates"]
    logical_mats: dict[int, np.ndarray] = {}
    slots = []
    layer_of_slot = []
    for e in entries:
        layer = int(e["layer"])
        mat = _matrix_from_json(e["matrix"])
        if layer in logical_mats:
            if not np.array_equal(logical_mats[layer], mat):
                raise ValueError(f"inconsistent matrices for shared gate in layer {layer}")
        else:
            logical_mats[layer] = mat
        slots.append(GateSlot(layer, (int(e["targets"][0]), int(e["targets"][1]))))
        layer_of_slot.append(layer)
    if sorted(logical_mats) != list(range(num_layers)):
        raise ValueError("checkpoint layers are not contiguous")
    gates = []
    for layer in range(num_layers):
        first = next(s for s in slots if s.logical_id == layer)
        mat = logical_mats[layer]
        gates.append(Gate(mat, first.targets, parity_sparse=_is_parity_sparse(mat)))
    meta = _match_brickwall(num_qubits, num_layers, periodic, slots, layer_of_slot)
    return Circuit(num_qubits, slots, gates, meta)


def _is_parity_sparse(mat: np.ndarray) -> bool:
    off = [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)]
    return all(mat[i, j] == 0 for i, j in off)


def _match_brickwall(num_qubits, num_layers, periodic, slots, layer_of_slot):
    """Re-attach brick-wall metadata when the slot pattern matches one."""
    if num_qubits % 2 != 0:
        return None
    expected = []
    for layer in range(num_layers):
        for bond in _brickwall_bonds(num_qubits, layer, periodic):
            expected.append((layer, bond))
    actual = [(lay, slot.targets) for lay, slot in zip(layer_of_slot, slots)]
    if actual != expected:
        return None
    return BrickwallMeta(num_layers, tuple(layer_of_slot), 2, periodic)
