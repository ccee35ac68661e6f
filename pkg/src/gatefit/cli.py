"""Command-line driver: optimize from JSON configs, run verification checks,
and run machine-local benchmarks. Artifacts are CSV/JSON files.

Subcommands::

    gatefit optimize --config run.json [--out DIR] [--workers N]
                     [--parity on|off] [--dedup on|off] [--seed N]
    gatefit check    {gradient|hessian|hvp|kernels} [--qubits K] [--layers N] [--seed N]
    gatefit bench    {kernels|gradient|hessian|scaling} [--qubits K ...]
                     [--layers N] [--workers 1,2,4] [--repeats R] [--out DIR]

The default worker count comes from the RQCO_WORKERS environment variable;
numerical results never depend on the worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
import time

import numpy as np

from . import manifold, models, objective
from .circuit import Circuit, build_brickwall, load_circuit, save_circuit
from .kernels import Gate, apply_gate, basis_state, hole_apply, hole_contract
from .models import TrotterPlan, build_spinful_fh, build_spinless_fh, make_oracle
from .objective import default_workers, frobenius_error_squared, full_gradient, full_hessian
from .optimizer import TcgParams, TrustRegionParams, trust_region_optimize

BENCH_SCHEMA = "bench-v1"
SUMMARY_SCHEMA = "summary-v1"

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "circuit"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["model", "L", "J", "U", "periodic", "t"],
            "properties": {
                "model": {"enum": ["spinless_fh", "spinful_fh"]},
                "L": {"type": "integer", "minimum": 2},
                "J": {"type": "number"},
                "U": {"type": "number"},
                "periodic": {"type": "boolean"},
                "t": {"type": "number"},
                "oracle": {"enum": ["dense", "krylov"]},
            },
        },
        "circuit": {
            "type": "object",
            "additionalProperties": False,
            "required": ["init"],
            "properties": {
                "layers": {"type": "integer", "minimum": 1},
                "init": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["trotter", "file", "random"]},
                        "order": {"enum": [1, 2, 4]},
                        "steps": {"type": "integer", "minimum": 1},
                        "path": {"type": "string"},
                        "seed": {"type": "integer"},
                    },
                },
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "initial_radius": {"type": "number"},
                "max_radius": {"type": "number"},
                "accept_threshold": {"type": "number"},
                "shrink_threshold": {"type": "number"},
                "shrink_factor": {"type": "number"},
                "expand_threshold": {"type": "number"},
                "expand_factor": {"type": "number"},
                "max_iterations": {"type": "integer", "minimum": 1},
                "gradient_norm_tolerance": {"type": "number"},
                "min_radius": {"type": "number"},
                "use_hvp": {"type": "boolean"},
                "tcg": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kappa": {"type": "number"},
                        "theta": {"type": "number"},
                        "max_inner": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "execution": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "workers": {"type": "integer", "minimum": 1},
                "parity_mode": {"type": "boolean"},
                "translation_dedup": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": {"type": kind, "message": message}}), file=sys.stderr)
    return code


def load_config(path: str) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{loc}: {e.message}")
        raise ConfigError("; ".join(msgs))
    return cfg


def _build_model(mcfg: dict):
    builder = build_spinless_fh if mcfg["model"] == "spinless_fh" else build_spinful_fh
    spec = builder(mcfg["L"], mcfg["J"], mcfg["U"], mcfg["periodic"])
    oracle = make_oracle(spec, mcfg["t"], mcfg.get("oracle", "dense"))
    return spec, oracle


def _build_circuit(spec, mcfg: dict, ccfg: dict, seed: int | None):
    init = ccfg["init"]
    kind = init["type"]
    if kind == "trotter":
        plan = TrotterPlan(init.get("order", 2), init.get("steps", 1), mcfg["t"])
        return models.build_trotter_circuit(spec, plan)
    if kind == "file":
        if "path" not in init:
            raise ConfigError("circuit.init.path required for file init")
        return load_circuit(init["path"])
    layers = ccfg.get("layers")
    if layers is None:
        raise ConfigError("circuit.layers required for random init")
    rng = np.random.default_rng(init.get("seed", seed or 0))
    gates = [manifold.random_unitary(4, rng) for _ in range(layers)]
    return build_brickwall(spec.num_qubits, layers, gates, mcfg["periodic"])


def _optimizer_params(ocfg: dict) -> TrustRegionParams:
    ocfg = dict(ocfg)
    tcg = TcgParams(**ocfg.pop("tcg", {}))
    return TrustRegionParams(tcg=tcg, **ocfg)


def cmd_optimize(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    execution = cfg.get("execution", {})
    workers = args.workers or execution.get("workers") or default_workers()
    parity = _flag(args.parity, execution.get("parity_mode", False))
    dedup = _flag(args.dedup, execution.get("translation_dedup", False))
    outdir = args.out or cfg.get("output", {}).get("dir", ".")
    os.makedirs(outdir, exist_ok=True)
    try:
        spec, oracle = _build_model(cfg["model"])
        circ = _build_circuit(spec, cfg["model"], cfg["circuit"], args.seed)
        params = _optimizer_params(cfg.get("optimizer", {}))
        f0 = objective.target_value(circ, oracle, workers=workers)
        t0 = time.perf_counter()
        opt, trace = trust_region_optimize(
            circ, oracle, params, parity_mode=parity,
            use_translation_dedup=dedup, workers=workers,
        )
        wall = time.perf_counter() - t0
        f1 = objective.target_value(opt, oracle, workers=workers)
        k = circ.num_qubits
        err0 = math.sqrt(max(frobenius_error_squared(f0, k), 0.0))
        err1 = math.sqrt(max(frobenius_error_squared(f1, k), 0.0))
        trace.write_csv(os.path.join(outdir, "trace.csv"))
        save_circuit(opt, os.path.join(outdir, "gates.json"))
        summary = {
            "schema": SUMMARY_SCHEMA,
            "num_qubits": k,
            "num_layers": circ.num_logical,
            "num_slots": circ.num_slots,
            "initial_f": f0,
            "final_f": f1,
            "initial_error_frobenius": err0,
            "final_error_frobenius": err1,
            "error_reduction": err0 / err1 if err1 > 0 else math.inf,
            "iterations": len(trace.records),
            "accepted_steps": sum(r.accepted for r in trace.records),
            "termination": trace.termination,
            "wall_time_seconds": wall,
            "parity_mode": parity,
            "translation_dedup": dedup,
            "workers": workers,
        }
        with open(os.path.join(outdir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
        print(json.dumps(summary))
        return 0
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


def _flag(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    return value == "on"


# ---------------------------------------------------------------------------
# check command: finite-difference and oracle suites
# ---------------------------------------------------------------------------


def _dense_gate(mat: np.ndarray, t1: int, t2: int, k: int) -> np.ndarray:
    """Small independent dense embedding used only for self checks."""
    N = 2**k
    out = np.zeros((N, N), dtype=complex)
    for x in range(N):
        for y in range(N):
            env_equal = all(
                (x >> (k - 1 - q)) & 1 == (y >> (k - 1 - q)) & 1
                for q in range(k)
                if q not in (t1, t2)
            )
            if not env_equal:
                continue
            xi = 2 * ((x >> (k - 1 - t1)) & 1) + ((x >> (k - 1 - t2)) & 1)
            yi = 2 * ((y >> (k - 1 - t1)) & 1) + ((y >> (k - 1 - t2)) & 1)
            out[x, y] = mat[xi, yi]
    return out


class _MatrixOracle:
    """Oracle wrapping an explicit unitary matrix (checks and benches only)."""

    def __init__(self, u: np.ndarray):
        self.num_qubits = int(np.log2(u.shape[0]) + 0.5)
        self._u = u

    def apply(self, state):
        return self._u @ state

    def apply_adjoint(self, state):
        return self._u.conj().T @ state


class _IdentityOracle:
    def __init__(self, num_qubits: int):
        self.num_qubits = num_qubits

    def apply(self, state):
        return state

    def apply_adjoint(self, state):
        return state


def _random_instance(k: int, num_slots: int, seed: int):
    """Random sequential circuit (one logical gate per slot) and random
    unitary oracle; works for any qubit count >= 2."""
    from .circuit import Circuit, GateSlot

    rng = np.random.default_rng(seed)
    gates = []
    slots = []
    for i in range(num_slots):
        t1, t2 = rng.choice(k, size=2, replace=False)
        gates.append(Gate(manifold.random_unitary(4, rng), (int(t1), int(t2))))
        slots.append(GateSlot(i, (int(t1), int(t2))))
    circ = Circuit(k, slots, gates)
    oracle = _MatrixOracle(manifold.random_unitary(2**k, rng))
    return circ, oracle, rng


def _check_gradient(k: int, layers: int, seed: int) -> tuple[float, float]:
    circ, oracle, rng = _random_instance(k, layers, seed)
    rep = full_gradient(circ, oracle)
    step = 1e-5
    worst = 0.0
    for _ in range(10):
        dirs = [
            manifold.project_tangent(g.matrix, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            for g in circ.logical_gates
        ]
        plus = circ.with_gates([g.matrix + step * d for g, d in zip(circ.logical_gates, dirs)])
        minus = circ.with_gates([g.matrix - step * d for g, d in zip(circ.logical_gates, dirs)])
        fd = (objective.target_value(plus, oracle) - objective.target_value(minus, oracle)) / (2 * step)
        an = sum(manifold.inner(g, d) for g, d in zip(rep.per_logical_gradient, dirs))
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return worst, 1e-6


def _check_hessian(k: int, layers: int, seed: int) -> tuple[float, float]:
    circ, oracle, rng = _random_instance(k, layers, seed)
    rep = full_hessian(circ, oracle)
    from .optimizer import _make_hessian_operator

    op = _make_hessian_operator(circ, rep, False, oracle, False, 1)
    worst = 0.0
    for _ in range(10):
        xs = [
            manifold.project_tangent(g.matrix, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            for g in circ.logical_gates
        ]
        ys = [
            manifold.project_tangent(g.matrix, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            for g in circ.logical_gates
        ]
        hx, hy = op(xs), op(ys)
        sym = sum(manifold.inner(a, y) for a, y in zip(hx, ys)) - sum(
            manifold.inner(x, b) for x, b in zip(xs, hy)
        )
        nx = math.sqrt(sum(manifold.inner(x, x) for x in xs))
        ny = math.sqrt(sum(manifold.inner(y, y) for y in ys))
        worst = max(worst, abs(sym) / (nx * ny))
    return worst, 1e-8


def _check_hvp(k: int, layers: int, seed: int) -> tuple[float, float]:
    circ, oracle, rng = _random_instance(k, layers, seed)
    rep = full_hessian(circ, oracle)
    worst = 0.0
    for _ in range(5):
        z = [rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(circ.num_logical)]
        via_blocks = rep.hessian.apply_direction(z)
        via_pass = objective.hessian_vector_product(circ, oracle, z)
        num = max(np.abs(a - b).max() for a, b in zip(via_blocks, via_pass))
        den = max(max(np.abs(a).max() for a in via_blocks), 1e-12)
        worst = max(worst, num / den)
    return worst, 1e-9


def _check_kernels(k: int, layers: int, seed: int) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t1 in range(k):
        for t2 in range(k):
            if t1 == t2:
                continue
            g = manifold.random_unitary(4, rng)
            dense = _dense_gate(g, t1, t2, k)
            for j in range(2**k):
                psi = basis_state(k, j)
                err = np.abs(apply_gate(psi, Gate(g, (t1, t2))) - dense @ psi).max()
                worst = max(worst, err)
            phi = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
            psi = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
            d = hole_contract(phi, psi, (t1, t2))
            err = abs(np.sum(g * d) - phi @ (dense @ psi))
            worst = max(worst, err)
            arr = hole_apply(psi, (t1, t2))
            err = np.abs(arr @ g.reshape(16) - dense @ psi).max()
            worst = max(worst, err)
    return worst, 1e-12


def cmd_check(args) -> int:
    if args.qubits > 6:
        return _fail("config", "check is capped at 6 qubits", 2)
    kinds = [args.kind] if args.kind != "all" else ["kernels", "gradient", "hessian", "hvp"]
    runners = {
        "gradient": _check_gradient,
        "hessian": _check_hessian,
        "hvp": _check_hvp,
        "kernels": _check_kernels,
    }
    ok = True
    for kind in kinds:
        err, tol = runners[kind](args.qubits, args.layers, args.seed)
        passed = err <= tol
        ok = ok and passed
        print(f"check {kind}: max rel error {err:.3e} (tolerance {tol:.0e}) "
              f"{'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# bench command
# ---------------------------------------------------------------------------


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _bench_rows_kernels(ks, repeats, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for k in ks:
        g = manifold.random_unitary(4, rng)
        psi = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
        out = np.empty_like(psi)
        gate_adj = Gate(g, (0, 1))
        gate_gen = Gate(g, (0, k - 1))
        rows.append((k, "apply_gate_adjacent_seconds",
                     _median_time(lambda: apply_gate(psi, gate_adj, out=out), repeats)))
        rows.append((k, "apply_gate_general_seconds",
                     _median_time(lambda: apply_gate(psi, gate_gen, out=out), repeats)))
        rows.append((k, "hole_contract_seconds",
                     _median_time(lambda: hole_contract(psi, psi, (0, 1)), repeats)))
        rows.append((k, "hole_apply_seconds",
                     _median_time(lambda: hole_apply(psi, (0, 1)), repeats)))
    return rows


def _random_bench_circuit(k, layers, rng):
    gates = [manifold.random_unitary(4, rng) for _ in range(layers)]
    return build_brickwall(k, layers, gates, periodic=True)


def cmd_bench(args) -> int:
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    rows = []
    rng = np.random.default_rng(args.seed)
    if args.kind == "kernels":
        for k, metric, value in _bench_rows_kernels(args.qubits, args.repeats, args.seed):
            rows.append({"kind": "kernels", "qubits": k, "layers": "", "slots": "",
                         "workers": 1, "dedup": "", "metric": metric, "value": repr(value)})
    elif args.kind in ("gradient", "hessian"):
        for k in args.qubits:
            oracle = _IdentityOracle(k)
            medians = []
            for _ in range(args.inits):
                circ = _random_bench_circuit(k, args.layers, rng)
                if args.kind == "gradient":
                    fn = lambda: full_gradient(circ, oracle, workers=args.bench_workers)
                else:
                    fn = lambda: full_hessian(circ, oracle, workers=args.bench_workers,
                                              use_translation_dedup=args.bench_dedup)
                medians.append(_median_time(fn, args.repeats))
            med = statistics.median(medians)
            rep = (full_gradient(circ, oracle) if args.kind == "gradient"
                   else full_hessian(circ, oracle, use_translation_dedup=args.bench_dedup))
            rows.append({"kind": args.kind, "qubits": k, "layers": args.layers,
                         "slots": circ.num_slots, "workers": args.bench_workers,
                         "dedup": args.bench_dedup, "metric": "median_seconds",
                         "value": repr(med)})
            rows.append({"kind": args.kind, "qubits": k, "layers": args.layers,
                         "slots": circ.num_slots, "workers": args.bench_workers,
                         "dedup": args.bench_dedup, "metric": "median_seconds_per_summand",
                         "value": repr(med / 2**k)})
            for name, count in rep.pass_counts.items():
                rows.append({"kind": args.kind, "qubits": k, "layers": args.layers,
                             "slots": circ.num_slots, "workers": args.bench_workers,
                             "dedup": args.bench_dedup, "metric": name, "value": count})
    elif args.kind == "scaling":
        k = args.qubits[0]
        circ = _random_bench_circuit(k, args.layers, rng)
        oracle = _IdentityOracle(k)
        baseline = None
        base_time = None
        for w in args.workers:
            med = _median_time(lambda: full_gradient(circ, oracle, workers=w), args.repeats)
            rep = full_gradient(circ, oracle, workers=w)
            if baseline is None:
                baseline, base_time = rep, med
            else:
                same = rep.value == baseline.value and all(
                    np.array_equal(a, b)
                    for a, b in zip(rep.per_logical_gradient, baseline.per_logical_gradient)
                )
                if not same:
                    return _fail("determinism", f"results differ for workers={w}", 1)
            speedup = base_time / med
            rows.append({"kind": "scaling", "qubits": k, "layers": args.layers,
                         "slots": circ.num_slots, "workers": w, "dedup": "",
                         "metric": "median_seconds", "value": repr(med)})
            rows.append({"kind": "scaling", "qubits": k, "layers": args.layers,
                         "slots": circ.num_slots, "workers": w, "dedup": "",
                         "metric": "speedup_vs_1", "value": repr(speedup)})
        speedups = [float(r["value"]) for r in rows if r["metric"] == "speedup_vs_1"]
        if any(b < a - 0.05 for a, b in zip(speedups, speedups[1:])):
            print("warning: speedup not monotone non-decreasing (machine-local effect)",
                  file=sys.stderr)
    path = os.path.join(outdir, "bench.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["schema", "kind", "qubits", "layers",
                                                "slots", "workers", "dedup", "metric", "value"])
        writer.writeheader()
        for row in rows:
            writer.writerow({"schema": BENCH_SCHEMA, **row})
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gatefit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run an optimization from a JSON config")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--out", default=None)
    p_opt.add_argument("--workers", type=int, default=None)
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.add_argument("--parity", choices=["on", "off"], default=None)
    p_opt.add_argument("--dedup", choices=["on", "off"], default=None)
    p_opt.set_defaults(func=cmd_optimize)

    p_chk = sub.add_parser("check", help="run verification suites")
    p_chk.add_argument("kind", choices=["gradient", "hessian", "hvp", "kernels", "all"])
    p_chk.add_argument("--qubits", type=int, default=3)
    p_chk.add_argument("--layers", type=int, default=3)
    p_chk.add_argument("--seed", type=int, default=12345)
    p_chk.set_defaults(func=cmd_check)

    p_ben = sub.add_parser("bench", help="machine-local benchmarks (never gate CI)")
    p_ben.add_argument("kind", choices=["kernels", "gradient", "hessian", "scaling"])
    p_ben.add_argument("--qubits", type=lambda s: [int(x) for x in s.split(",")],
                       default=[4, 6, 8])
    p_ben.add_argument("--layers", type=int, default=5)
    p_ben.add_argument("--workers", type=lambda s: [int(x) for x in s.split(",")],
                       default=[1, 2, 4])
    p_ben.add_argument("--bench-workers", type=int, default=1)
    p_ben.add_argument("--bench-dedup", action="store_true")
    p_ben.add_argument("--repeats", type=int, default=3)
    p_ben.add_argument("--inits", type=int, default=5,
                       help="random gate initializations per data point")
    p_ben.add_argument("--seed", type=int, default=12345)
    p_ben.add_argument("--out", default=None)
    p_ben.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
