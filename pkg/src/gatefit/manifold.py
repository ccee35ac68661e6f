"""Riemannian geometry of the unitary group and its products.

Points are unitary matrices V (4x4 for full gates, 2x2 for parity blocks);
tangent vectors at V are matrices X with V^dag X anti-Hermitian. The metric is
the real part of the Frobenius inner product. Parity-constrained gates are
treated as points of U(2) x U(2) via their two parity blocks, never by masking
U(4) tangents.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DegenerateRetractionError",
    "asym",
    "project_tangent",
    "retract_polar",
    "inner",
    "euclid_gradient_from_holomorphic",
    "riemannian_hessian_apply",
    "parity_split",
    "parity_join",
    "project_tangent_gate",
    "retract_gate",
    "hessian_apply_gate",
    "random_unitary",
]

#: Row/column indices of the odd-parity block of a parity-conserving gate.
PARITY_ODD = (1, 2)
#: Row/column indices of the even-parity block.
PARITY_EVEN = (0, 3)

_PARITY_OFF_PATTERN = [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)]


class DegenerateRetractionError(ValueError):
    """V + X was (numerically) rank deficient; the polar factor is not unique."""


def asym(a: np.ndarray) -> np.ndarray:
    """Anti-Hermitian part (A - A^dag)/2."""
    return 0.5 * (a - a.conj().T)


def project_tangent(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient matrix onto the tangent space at V."""
    return v @ asym(v.conj().T @ x)


def retract_polar(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Polar retraction: unitary factor of V + X.

    Computed from the SVD; a (numerically) zero singular value means the polar
    factor is no longer unique and raises :class:`DegenerateRetractionError`.
    """
    a = v + x
    w, s, yh = np.linalg.svd(a)
    if s[-1] <= 1e-14 * max(s[0], 1.0):
        raise DegenerateRetractionError(
            f"retraction point is rank deficient (smallest singular value {s[-1]:.3e})"
        )
    return w @ yh


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Riemannian metric <X, Y> = Re Tr[X^dag Y].

    For genuine tangent pairs the trace is real; the imaginary part is checked
    and discarded.
    """
    t = np.trace(x.conj().T @ y)
    scale = max(1.0, abs(t))
    if abs(t.imag) > 1e-10 * scale:
        raise ValueError(f"inner product has non-negligible imaginary part {t.imag:.3e}")
    return float(t.real)


def euclid_gradient_from_holomorphic(d: np.ndarray) -> np.ndarray:
    """Euclidean gradient of f = -Re f~ from the holomorphic derivative of f~.

    With the gradient convention grad f = df/dx + i df/dy applied entrywise,
    this is -conj(D); it satisfies d/de f(G + e X) = Re Tr[grad^dag X] for all
    real directions X.
    """
    return -np.conj(d)


def riemannian_hessian_apply(
    v: np.ndarray,
    euclid_grad: np.ndarray,
    euclid_grad_derivative: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Riemannian Hessian applied to a tangent vector X at V.

    ``euclid_grad`` is the ambient gradient g(V) and ``euclid_grad_derivative``
    its directional derivative along X. Differentiating the projected gradient
    field V asym(V^dag g) and projecting back gives

        P_V( X asym(V^dag g) + V asym(X^dag g + V^dag Dg[X]) ).
    """
    vg = asym(v.conj().T @ euclid_grad)
    inner_term = asym(x.conj().T @ euclid_grad + v.conj().T @ euclid_grad_derivative)
    return project_tangent(v, x @ vg + v @ inner_term)


def parity_split(g: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Split a parity-conserving 4x4 gate into its odd and even 2x2 blocks.

    Raises if any off-pattern entry exceeds ``tol``.
    """
    for i, j in _PARITY_OFF_PATTERN:
        if abs(g[i, j]) > tol:
            raise ValueError(
                f"matrix entry ({i},{j}) = {g[i, j]:.3e} violates the parity pattern"
            )
    odd = g[np.ix_(PARITY_ODD, PARITY_ODD)].copy()
    even = g[np.ix_(PARITY_EVEN, PARITY_EVEN)].copy()
    return odd, even


def parity_join(odd: np.ndarray, even: np.ndarray) -> np.ndarray:
    """Embed odd/even 2x2 blocks into a 4x4 gate with exact zeros elsewhere."""
    g = np.zeros((4, 4), dtype=np.complex128)
    g[np.ix_(PARITY_ODD, PARITY_ODD)] = odd
    g[np.ix_(PARITY_EVEN, PARITY_EVEN)] = even
    return g


def _blockwise(op, v: np.ndarray, *mats: np.ndarray) -> np.ndarray:
    vo, ve = parity_split(v)
    parts = [parity_split(m, tol=np.inf) for m in mats]
    odd = op(vo, *[p[0] for p in parts])
    even = op(ve, *[p[1] for p in parts])
    return parity_join(odd, even)


def project_tangent_gate(v: np.ndarray, x: np.ndarray, parity: bool = False) -> np.ndarray:
    """Tangent projection on U(4), or blockwise on U(2) x U(2) in parity mode."""
    if not parity:
        return project_tangent(v, x)
    return _blockwise(project_tangent, v, x)


def retract_gate(v: np.ndarray, x: np.ndarray, parity: bool = False) -> np.ndarray:
    """Polar retraction, blockwise in parity mode (keeps the zeros exact)."""
    if not parity:
        return retract_polar(v, x)
    return _blockwise(retract_polar, v, x)


def hessian_apply_gate(
    v: np.ndarray,
    euclid_grad: np.ndarray,
    euclid_grad_derivative: np.ndarray,
    x: np.ndarray,
    parity: bool = False,
) -> np.ndarray:
    if not parity:
        return riemannian_hessian_apply(v, euclid_grad, euclid_grad_derivative, x)
    return _blockwise(riemannian_hessian_apply, v, euclid_grad, euclid_grad_derivative, x)


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like random unitary: QR of a complex Gaussian matrix with the
    phases fixed so that R has a real positive diagonal."""
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return np.ascontiguousarray(q * (d / np.abs(d)))
