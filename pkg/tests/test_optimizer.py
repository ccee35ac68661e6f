import math

import numpy as np
import pytest

from conftest import MatrixOracle, random_tangent
from gatefit import manifold
from gatefit.circuit import build_brickwall
from gatefit.models import TrotterPlan, build_spinless_fh, build_trotter_circuit, make_oracle
from gatefit.objective import frobenius_error_squared, target_value
from gatefit.optimizer import (
    TcgParams,
    TrustRegionParams,
    trust_region_optimize,
    truncated_cg,
)


def _rand_grad(rng, n=2):
    return [rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(n)]


def _pinner(xs, ys):
    return sum(np.real(np.trace(x.conj().T @ y)) for x, y in zip(xs, ys))


def test_tcg_identity_hessian_gives_newton_step(rng):
    grad = _rand_grad(rng)
    step, reason, _ = truncated_cg(lambda xs: [x.copy() for x in xs], grad, 1e9, TcgParams())
    assert reason == "converged"
    for s, g in zip(step, grad):
        assert np.allclose(s, -g, atol=1e-12)


def test_tcg_negative_curvature_hits_boundary(rng):
    grad = _rand_grad(rng)
    radius = 0.7
    step, reason, _ = truncated_cg(
        lambda xs: [-x for x in xs], grad, radius, TcgParams()
    )
    assert reason == "negative_curvature"
    assert math.sqrt(_pinner(step, step)) == pytest.approx(radius, abs=1e-12)


def test_tcg_zero_gradient_returns_zero(rng):
    step, reason, it = truncated_cg(
        lambda xs: xs, [np.zeros((4, 4), dtype=complex)], 1.0, TcgParams()
    )
    assert reason == "zero_gradient" and it == 0
    assert np.all(step[0] == 0)


def _flatten(xs):
    return np.concatenate([np.concatenate([x.real.ravel(), x.imag.ravel()]) for x in xs])


def _unflatten(v, n):
    out = []
    for i in range(n):
        blk = v[i * 32 : (i + 1) * 32]
        out.append((blk[:16] + 1j * blk[16:]).reshape(4, 4))
    return out


def test_tcg_model_decrease_beats_cauchy_point(rng):
    # on definite and indefinite operators alike, the Steihaug step must be at
    # least as good as the Cauchy point in the quadratic model
    n = 2
    dim = 32 * n
    for trial in range(50):
        b = rng.normal(size=(dim, dim)) / math.sqrt(dim)
        shift = rng.uniform(-0.2, 1.0)
        a = b.T @ b + shift * np.eye(dim)
        grad = _rand_grad(rng, n)
        radius = rng.uniform(0.1, 5.0)

        def hess(xs, a=a):
            return _unflatten(a @ _flatten(xs), n)

        step, reason, _ = truncated_cg(hess, grad, radius, TcgParams())

        def model(xs):
            return _pinner(grad, xs) + 0.5 * _pinner(xs, hess(xs))

        g = _flatten(grad)
        curv = g @ a @ g
        gnorm = np.linalg.norm(g)
        if curv > 0:
            tau = min(gnorm**2 / curv, radius / gnorm)
        else:
            tau = radius / gnorm
        cauchy = _unflatten(-tau * g, n)
        assert model(step) <= model(cauchy) + 1e-10
        assert math.sqrt(_pinner(step, step)) <= radius + 1e-12


def test_tcg_rejects_nonfinite_hessian(rng):
    grad = _rand_grad(rng, 1)

    def bad(xs):
        return [np.full((4, 4), np.nan)]

    with pytest.raises(FloatingPointError):
        truncated_cg(bad, grad, 1.0, TcgParams())


def test_params_validation():
    with pytest.raises(ValueError):
        TrustRegionParams(accept_threshold=0.5, shrink_threshold=0.25)
    with pytest.raises(ValueError):
        TrustRegionParams(initial_radius=-1.0)


def test_optimize_starts_at_representable_optimum():
    spec = build_spinless_fh(4, 0.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.5, "dense")
    circ = build_trotter_circuit(spec, TrotterPlan(2, 1, 0.5))
    params = TrustRegionParams(max_iterations=5, gradient_norm_tolerance=1e-8)
    opt, trace = trust_region_optimize(circ, oracle, params)
    assert trace.termination == "gradient_tolerance"
    assert len(trace.records) == 1
    assert trace.records[0].grad_norm < 1e-8


def test_optimize_monotone_and_unitary(rng):
    spec = build_spinless_fh(4, 1.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.4, "dense")
    circ = build_trotter_circuit(spec, TrotterPlan(2, 1, 0.4))
    opt, trace = trust_region_optimize(
        circ, oracle, TrustRegionParams(max_iterations=25)
    )
    accepted_values = [r.value for r in trace.records if not math.isnan(r.rho)]
    f_after = [r.value for r in trace.records[1:]] + [target_value(opt, oracle)]
    for rec, nxt in zip(trace.records, f_after):
        if rec.accepted:
            assert nxt <= rec.value + 1e-12
        else:
            assert nxt == pytest.approx(rec.value, abs=1e-12)
    for g in opt.logical_gates:
        assert np.abs(g.matrix.conj().T @ g.matrix - np.eye(4)).max() < 1e-10
    # every accepted step had a positive predicted decrease
    for rec in trace.records:
        if rec.accepted:
            assert rec.rho > 0.1
    # frobenius bookkeeping: error^2 = 2*2^k + 2 f
    for rec in trace.records:
        assert rec.error_frobenius**2 == pytest.approx(
            max(frobenius_error_squared(rec.value, 4), 0.0), abs=1e-9
        )


def test_optimize_parity_mode_keeps_sparsity():
    spec = build_spinless_fh(4, 1.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.4, "dense")
    circ = build_trotter_circuit(spec, TrotterPlan(2, 1, 0.4))
    opt, trace = trust_region_optimize(
        circ, oracle, TrustRegionParams(max_iterations=10), parity_mode=True
    )
    off = [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)]
    for g in opt.logical_gates:
        m = g.matrix
        assert all(m[i, j] == 0 for i, j in off)  # exact zeros
        assert np.abs(m.conj().T @ m - np.eye(4)).max() < 1e-10
    assert any(r.accepted for r in trace.records)


def test_optimize_parity_mode_rejects_dense_gates(rng):
    circ = build_brickwall(4, 2, [manifold.random_unitary(4, rng) for _ in range(2)])
    oracle = MatrixOracle(manifold.random_unitary(16, rng))
    with pytest.raises(ValueError):
        trust_region_optimize(circ, oracle, TrustRegionParams(max_iterations=2),
                              parity_mode=True)


def test_optimize_dedup_matches_plain_iterates(rng):
    # compare while steps make clear progress; near convergence the accept
    # threshold sits on a knife edge and 1e-13 Hessian differences could flip it
    spec = build_spinless_fh(6, 1.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.4, "dense")
    circ = build_brickwall(6, 2, [manifold.random_unitary(4, rng) for _ in range(2)],
                           periodic=True)
    params = TrustRegionParams(max_iterations=6)
    opt_a, trace_a = trust_region_optimize(circ, oracle, params)
    opt_b, trace_b = trust_region_optimize(circ, oracle, params,
                                           use_translation_dedup=True)
    assert len(trace_a.records) == len(trace_b.records)
    for ra, rb in zip(trace_a.records, trace_b.records):
        assert rb.value == pytest.approx(ra.value, abs=1e-10)
        assert rb.accepted == ra.accepted
    for ga, gb in zip(opt_a.logical_gates, opt_b.logical_gates):
        assert np.abs(ga.matrix - gb.matrix).max() < 1e-10


def test_optimize_radius_underflow_reported():
    spec = build_spinless_fh(4, 0.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.5, "dense")
    circ = build_trotter_circuit(spec, TrotterPlan(2, 1, 0.5))
    # tolerance 0 can never trigger, so the stall must surface as underflow
    params = TrustRegionParams(max_iterations=300, gradient_norm_tolerance=0.0)
    opt, trace = trust_region_optimize(circ, oracle, params)
    assert trace.termination == "radius_underflow"


def test_trace_csv_roundtrip(tmp_path):
    import csv

    spec = build_spinless_fh(4, 1.0, 4.0, periodic=True)
    oracle = make_oracle(spec, 0.4, "dense")
    circ = build_trotter_circuit(spec, TrotterPlan(2, 1, 0.4))
    _, trace = trust_region_optimize(circ, oracle, TrustRegionParams(max_iterations=5))
    path = tmp_path / "trace.csv"
    trace.write_csv(str(path))
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(trace.records)
    for row, rec in zip(rows, trace.records):
        assert int(row["iter"]) == rec.iteration
        assert float(row["f"]) == rec.value  # repr round-trip is exact
        assert float(row["grad_norm"]) == rec.grad_norm
        assert bool(int(row["accepted"])) == rec.accepted
