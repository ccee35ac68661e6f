"""Riemannian trust-region optimization over the product of gate manifolds.

Each outer iteration evaluates value, gradient and the full Hessian once; the
trust-region subproblem is solved by the Steihaug truncated conjugate-gradient
method acting on lists of per-gate tangent matrices, and candidates are formed
by the polar retraction (blockwise in parity mode). The quality ratio rho is
computed against the same quadratic model the subproblem used.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import manifold, objective
from .circuit import Circuit

__all__ = [
    "TcgParams",
    "TrustRegionParams",
    "IterationRecord",
    "OptimizationTrace",
    "truncated_cg",
    "trust_region_optimize",
]


@dataclass
class TcgParams:
    """Stopping rule of the inner solver: residual below
    ||r0|| * min(||r0||^theta, kappa), negative curvature, or the boundary."""

    kappa: float = 0.1
    theta: float = 1.0
    max_inner: int | None = None  # default: tangent-space dimension


@dataclass
class TrustRegionParams:
    initial_radius: float | None = None  # default 0.01 * sqrt(16 n)
    max_radius: float | None = None  # default 100 * initial
    accept_threshold: float = 0.1  # rho'
    shrink_threshold: float = 0.25
    shrink_factor: float = 0.25
    expand_threshold: float = 0.75
    expand_factor: float = 2.0
    max_iterations: int = 200
    gradient_norm_tolerance: float = 1e-10
    min_radius: float = 1e-14
    tcg: TcgParams = field(default_factory=TcgParams)
    use_hvp: bool = False  # apply the Hessian via per-direction passes instead

    def __post_init__(self):
        if not 0.0 < self.accept_threshold < self.shrink_threshold < self.expand_threshold < 1.0:
            raise ValueError("need 0 < accept < shrink < expand < 1")
        for name in ("initial_radius", "max_radius"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class IterationRecord:
    iteration: int
    value: float
    error_frobenius: float
    grad_norm: float
    radius: float
    rho: float
    step_norm: float
    inner_iterations: int
    stop_reason: str
    accepted: bool
    seconds: float


@dataclass
class OptimizationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = ""
    total_seconds: float = 0.0

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iter", "f", "error_frobenius", "grad_norm", "radius", "rho",
                 "inner_iters", "accepted", "seconds"]
            )
            for r in self.records:
                writer.writerow(
                    [r.iteration, repr(r.value), repr(r.error_frobenius),
                     repr(r.grad_norm), repr(r.radius), repr(r.rho),
                     r.inner_iterations, int(r.accepted), f"{r.seconds:.6f}"]
                )


# ---- product-tangent helpers (lists of per-gate matrices) ----


def _pinner(xs, ys) -> float:
    # real part of the product-trace metric; unlike manifold.inner this does
    # not insist on a vanishing imaginary part, so the solver also works on
    # synthetic operators whose iterates are not genuine tangent pairs
    return float(sum(np.trace(x.conj().T @ y).real for x, y in zip(xs, ys)))


def _pnorm(xs) -> float:
    return math.sqrt(max(_pinner(xs, xs), 0.0))


def _paxpy(alpha, xs, ys):
    return [alpha * x + y for x, y in zip(xs, ys)]


def _boundary_root(eta, delta, radius):
    """Positive tau with ||eta + tau delta|| = radius."""
    a = _pinner(delta, delta)
    b = _pinner(eta, delta)
    c = _pinner(eta, eta) - radius * radius
    return (-b + math.sqrt(max(b * b - a * c, 0.0))) / a


def truncated_cg(hess_apply, grad, radius: float, params: TcgParams):
    """Steihaug truncated CG for the trust-region subproblem.

    Minimizes <g, s> + 1/2 <s, H s> over ||s|| <= radius starting from s = 0,
    which guarantees at least the Cauchy decrease. Returns
    ``(step, stop_reason, inner_iterations)``.
    """
    gnorm0 = _pnorm(grad)
    if gnorm0 == 0.0:
        return [np.zeros_like(g) for g in grad], "zero_gradient", 0
    dim = sum(2 * g.size for g in grad)
    max_inner = params.max_inner if params.max_inner is not None else dim
    tol = gnorm0 * min(gnorm0**params.theta, params.kappa)

    eta = [np.zeros_like(g) for g in grad]
    r = [g.copy() for g in grad]
    delta = [-g for g in grad]
    rr = _pinner(r, r)
    for it in range(1, max_inner + 1):
        hd = hess_apply(delta)
        if any(not np.all(np.isfinite(h)) for h in hd):
            raise FloatingPointError("Hessian application produced non-finite values")
        curv = _pinner(delta, hd)
        if curv <= 0.0:
            tau = _boundary_root(eta, delta, radius)
            return _paxpy(tau, delta, eta), "negative_curvature", it
        alpha = rr / curv
        eta_next = _paxpy(alpha, delta, eta)
        if _pnorm(eta_next) >= radius:
            tau = _boundary_root(eta, delta, radius)
            return _paxpy(tau, delta, eta), "boundary", it
        eta = eta_next
        r = _paxpy(alpha, hd, r)
        rr_next = _pinner(r, r)
        if math.sqrt(rr_next) <= tol:
            return eta, "converged", it
        delta = _paxpy(rr_next / rr, delta, [-x for x in r])
        rr = rr_next
    return eta, "max_inner", max_inner


def _model_decrease(grad, hx, step) -> float:
    """Predicted decrease -(<g,s> + 1/2 <s,Hs>) of the quadratic model."""
    return -(_pinner(grad, step) + 0.5 * _pinner(step, hx))


def _make_hessian_operator(circuit, report, parity_mode, oracle, use_hvp, workers):
    gates = [g.matrix for g in circuit.logical_gates]
    euclid = report.euclidean_gradients

    def apply_h(xs):
        if use_hvp:
            hvec = objective.hessian_vector_product(circuit, oracle, xs, workers=workers)
        else:
            hvec = report.hessian.apply_direction(xs)
        out = []
        for v, g, hx, x in zip(gates, euclid, hvec, xs):
            dgbar = manifold.euclid_gradient_from_holomorphic(hx)
            out.append(manifold.hessian_apply_gate(v, g, dgbar, x, parity_mode))
        return out

    return apply_h


def trust_region_optimize(
    circuit: Circuit,
    oracle,
    params: TrustRegionParams | None = None,
    parity_mode: bool = False,
    use_translation_dedup: bool = False,
    workers: int | None = None,
    callback=None,
):
    """Optimize the circuit's logical gates against the target oracle.

    Returns ``(optimized_circuit, trace)``. Accepted iterates keep every gate
    unitary (retraction property) and exactly parity sparse in parity mode;
    the accepted objective sequence is non-increasing by construction.

    ``callback(record, circuit)`` runs after every iteration; returning True
    stops the loop early (termination "callback").
    """
    params = params or TrustRegionParams()
    if parity_mode:
        for g in circuit.logical_gates:
            manifold.parity_split(g.matrix)  # validates the sparsity pattern
    n = circuit.num_logical
    radius = params.initial_radius or 0.01 * math.sqrt(16.0 * n)
    max_radius = params.max_radius or 100.0 * radius
    trace = OptimizationTrace()
    current = circuit
    t_start = time.perf_counter()

    for it in range(params.max_iterations):
        t_iter = time.perf_counter()
        report = objective.full_hessian(
            current,
            oracle,
            use_translation_dedup=use_translation_dedup,
            parity_mode=parity_mode,
            workers=workers,
        )
        grad = report.per_logical_gradient
        gnorm = _pnorm(grad)
        err2 = max(objective.frobenius_error_squared(report.value, current.num_qubits), 0.0)
        if gnorm < params.gradient_norm_tolerance:
            trace.records.append(
                IterationRecord(it, report.value, math.sqrt(err2), gnorm, radius,
                                math.nan, 0.0, 0, "gradient_tolerance", False,
                                time.perf_counter() - t_iter)
            )
            trace.termination = "gradient_tolerance"
            break

        hess_op = _make_hessian_operator(
            current, report, parity_mode, oracle, params.use_hvp, workers
        )
        step, reason, inner = truncated_cg(hess_op, grad, radius, params.tcg)
        step_norm = _pnorm(step)
        predicted = _model_decrease(grad, hess_op(step), step)

        gates = [g.matrix for g in current.logical_gates]
        new_gates = [
            manifold.retract_gate(v, x, parity_mode) for v, x in zip(gates, step)
        ]
        candidate = current.with_gates(new_gates)
        f_new = objective.target_value(candidate, oracle, workers=workers)
        rho = (report.value - f_new) / predicted if predicted > 0 else -math.inf
        accepted = rho > params.accept_threshold and predicted > 0

        if accepted:
            current = candidate
        on_boundary = reason in ("negative_curvature", "boundary") or step_norm >= 0.99 * radius
        if rho < params.shrink_threshold:
            radius *= params.shrink_factor
        elif rho > params.expand_threshold and on_boundary:
            radius = min(params.expand_factor * radius, max_radius)

        rec = IterationRecord(
            it, report.value, math.sqrt(err2), gnorm, radius, rho, step_norm,
            inner, reason, accepted, time.perf_counter() - t_iter,
        )
        trace.records.append(rec)
        if callback is not None and callback(rec, current) is True:
            trace.termination = "callback"
            break
        if radius < params.min_radius:
            trace.termination = "radius_underflow"
            break
    if not trace.termination:
        trace.termination = "max_iterations"
    trace.total_seconds = time.perf_counter() - t_start
    return current, trace
