"""Maximally monotone operators presented through their resolvents.

An :class:`Operator` carries the resolvent ``(Id + A)^{-1}`` as a callable,
an optional forward evaluation (single-valued operators only) and a
strong-monotonicity modulus ``sigma >= 0`` such that ``A - sigma*Id`` is
monotone.  The catalog functions below build operators with exact,
closed-form resolvents.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Operator",
    "DimensionError",
    "as_vector",
    "resolvent",
    "reflected_resolvent",
    "inclusion_residual",
    "zero_operator",
    "normal_cone_affine",
    "normal_cone_box",
    "normal_cone_ball",
    "normal_cone_halfspace",
    "normal_cone_point",
    "constant_op",
    "linear_monotone",
    "scaled_projection",
    "prox_l1",
    "prox_quadratic",
    "CATALOG",
]

# symmetric-part eigenvalues above -PSD_TOL count as nonnegative
PSD_TOL = 1e-12


class DimensionError(ValueError):
    pass


def as_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    """Return `x` as a finite 1-d float array, checking its length against `dim`."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-d vector, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise DimensionError(f"{name} has dimension {v.size}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite coordinates")
    return v


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _orthonormal_rows(basis, dim=None, name="basis"):
    """Orthonormal basis (as columns) of the span of the rows of `basis`."""
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B.reshape(1, -1)
    if B.ndim != 2:
        raise DimensionError(f"{name} must be a list of vectors")
    if dim is not None and B.shape[1] != dim:
        raise DimensionError(f"{name} vectors have dimension {B.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(B)):
        raise ValueError(f"{name} has non-finite entries")
    if B.shape[0] == 0:
        return np.zeros((B.shape[1], 0))
    U, s, _ = np.linalg.svd(B.T, full_matrices=False)
    rank = int(np.sum(s > s.max() * max(B.shape) * np.finfo(float).eps)) if s.size else 0
    return U[:, :rank]


@dataclass(frozen=True)
class Operator:
    """A maximally monotone operator on R^dim.

    Parameters
    ----------
    dim : int
        Dimension of the ambient space.
    resolvent_fn : callable
        Maps a vector ``x`` to ``(Id + A)^{-1} x``.  Must be pure.
    modulus : float
        ``sigma >= 0`` such that ``A - sigma*Id`` is monotone.
    forward_fn : callable, optional
        ``x -> A x`` when the operator is single-valued everywhere.
    label : str
        Identifier used in traces and diagnostics.
    is_projection : bool
        True for normal cones, whose resolvent is a projection.
    """

    dim: int
    resolvent_fn: Callable[[np.ndarray], np.ndarray]
    modulus: float = 0.0
    forward_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "operator"
    is_projection: bool = False

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DimensionError(f"dimension must be >= 1, got {self.dim}")
        if not np.isfinite(self.modulus) or self.modulus < 0:
            raise ValueError(f"modulus must be finite and >= 0, got {self.modulus}")

    @property
    def single_valued(self) -> bool:
        return self.forward_fn is not None

    def resolvent(self, x) -> np.ndarray:
        x = as_vector(x, self.dim)
        return self.resolvent_fn(x)

    def reflect(self, x) -> np.ndarray:
        x = as_vector(x, self.dim)
        return 2.0 * self.resolvent_fn(x) - x

    def forward(self, x) -> np.ndarray:
        if self.forward_fn is None:
            raise TypeError(f"{self.label} is set-valued and has no forward evaluation")
        return self.forward_fn(as_vector(x, self.dim))


def resolvent(op: Operator, x) -> np.ndarray:
    """Evaluate ``(Id + op)^{-1} x``."""
    return op.resolvent(x)


def reflected_resolvent(op: Operator, x) -> np.ndarray:
    """Evaluate ``2 (Id + op)^{-1} x - x``."""
    return op.reflect(x)


def inclusion_residual(op: Operator, y, u) -> float:
    """Distance-like residual of the inclusion ``u in op(y)``.

    Uses ``u in A y  <=>  J_A(y + u) = y``, which holds for every maximally
    monotone operator, so it applies to set-valued operators as well.
    For a normal cone this is the projection test ``P_C(y + u) = y``.
    """
    y = as_vector(y, op.dim, "y")
    u = as_vector(u, op.dim, "u")
    return float(np.linalg.norm(op.resolvent_fn(y + u) - y))


# ---------------------------------------------------------------------------
# catalog

def zero_operator(dim: int) -> Operator:
    """The zero operator; its resolvent is the identity."""
    dim = int(dim)
    return Operator(dim, lambda x: x.copy(), 0.0, lambda x: np.zeros_like(x), "zero")


def normal_cone_affine(basis, offset) -> Operator:
    """Normal cone of the affine subspace ``offset + span(rows of basis)``.

    An empty `basis` gives the normal cone of the single point `offset`.
    """
    offset = as_vector(offset, name="offset")
    Q = _orthonormal_rows(np.reshape(basis, (-1, offset.size)), offset.size)

    def project(x):
        d = x - offset
        return offset + Q @ (Q.T @ d)

    return Operator(offset.size, project, 0.0, None,
                    f"normal_cone_affine(rank={Q.shape[1]})", True)


def normal_cone_box(lo, hi) -> Operator:
    lo = as_vector(lo, name="lo")
    hi = as_vector(hi, lo.size, name="hi")
    bad = np.flatnonzero(lo > hi)
    if bad.size:
        raise ValueError(f"box bounds violate lo <= hi at coordinate(s) {bad.tolist()}")
    return Operator(lo.size, lambda x: np.clip(x, lo, hi), 0.0, None, "normal_cone_box", True)


def normal_cone_ball(center, radius) -> Operator:
    center = as_vector(center, name="center")
    radius = float(radius)
    if not radius > 0:
        raise ValueError(f"ball radius must be > 0, got {radius}")

    def project(x):
        d = x - center
        r = np.linalg.norm(d)
        if r <= radius:
            return x.copy()
        return center + (radius / r) * d

    return Operator(center.size, project, 0.0, None, "normal_cone_ball", True)


def normal_cone_halfspace(a, beta) -> Operator:
    """Normal cone of ``{x : <a, x> <= beta}``."""
    a = as_vector(a, name="a")
    beta = float(beta)
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("halfspace normal a must be nonzero")

    def project(x):
        excess = float(a @ x) - beta
        if excess <= 0:
            return x.copy()
        return x - (excess / aa) * a

    return Operator(a.size, project, 0.0, None, "normal_cone_halfspace", True)


def normal_cone_point(w) -> Operator:
    w = as_vector(w, name="w")
    return Operator(w.size, lambda x: w.copy(), 0.0, None, "normal_cone_point", True)


def constant_op(c) -> Operator:
    """The constant operator ``x -> c``; its resolvent is ``x - c``."""
    c = as_vector(c, name="c")
    return Operator(c.size, lambda x: x - c, 0.0, lambda x: c.copy(), "constant_op")


def _check_psd(S, name):
    eig = np.linalg.eigvalsh(S)
    lo = float(eig[0])
    if lo < -PSD_TOL * max(1.0, float(np.abs(eig).max())):
        raise ValueError(
            f"{name} is not monotone: smallest eigenvalue of its symmetric part is "
            f"{lo:.6g} < 0")
    return max(lo, 0.0)


def linear_monotone(M) -> Operator:
    """Linear operator ``x -> M x`` with ``M + M^T`` positive semidefinite."""
    M = _as_matrix(M, "M")
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionError(f"M must be square, got shape {M.shape}")
    sigma = _check_psd(0.5 * (M + M.T), "M")
    # eigenvalues of the symmetric part of I + M are >= 1, so inversion is safe
    inv = np.linalg.inv(np.eye(n) + M)
    return Operator(n, lambda x: inv @ x, sigma, lambda x: M @ x, "linear_monotone")


def scaled_projection(basis, scale=1.0, dim=None) -> Operator:
    """The operator ``scale * P_U`` for ``U = span(rows of basis)``.

    ``(Id + s P_U)^{-1} = Id - s/(1+s) P_U``.  The modulus is 0 unless U is
    the whole space, because ``P_U`` vanishes on the orthogonal complement.
    """
    B = np.asarray(basis, dtype=float)
    if dim is None:
        if B.ndim != 2 or B.shape[1] == 0:
            raise DimensionError("basis must be a non-empty list of vectors when dim is not given")
        dim = B.shape[1]
    dim = int(dim)
    Q = _orthonormal_rows(B.reshape(-1, dim), dim)
    scale = float(scale)
    if not (np.isfinite(scale) and scale >= 0):
        raise ValueError(f"scale must be finite and >= 0, got {scale}")
    shrink = scale / (1.0 + scale)
    sigma = scale if Q.shape[1] == dim else 0.0
    return Operator(
        dim,
        lambda x: x - shrink * (Q @ (Q.T @ x)),
        sigma,
        lambda x: scale * (Q @ (Q.T @ x)),
        f"scaled_projection(rank={Q.shape[1]})",
    )


def prox_l1(weight, dim=None) -> Operator:
    """Subdifferential of ``sum_i weight_i |x_i|``; resolvent is soft thresholding."""
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        if dim is None:
            raise DimensionError("prox_l1 with scalar weight needs dim")
        w = np.full(int(dim), float(w))
    w = as_vector(w, dim, name="weight")
    if np.any(w < 0):
        raise ValueError("prox_l1 weights must be >= 0")
    return Operator(w.size, lambda x: np.sign(x) * np.maximum(np.abs(x) - w, 0.0),
                    0.0, None, "prox_l1")


def prox_quadratic(Q, b) -> Operator:
    """Gradient of ``0.5 x^T Q x + b^T x`` with Q symmetric positive semidefinite."""
    Q = _as_matrix(Q, "Q")
    b = as_vector(b, name="b")
    if Q.shape != (b.size, b.size):
        raise DimensionError(f"Q has shape {Q.shape}, expected {(b.size, b.size)}")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    sigma = _check_psd(Q, "Q")
    inv = np.linalg.inv(np.eye(b.size) + Q)
    return Operator(b.size, lambda x: inv @ (x - b), sigma, lambda x: Q @ x + b,
                    "prox_quadratic")


CATALOG = {
    "zero_operator": zero_operator,
    "normal_cone_affine": normal_cone_affine,
    "normal_cone_box": normal_cone_box,
    "normal_cone_ball": normal_cone_ball,
    "normal_cone_halfspace": normal_cone_halfspace,
    "normal_cone_point": normal_cone_point,
    "constant_op": constant_op,
    "linear_monotone": linear_monotone,
    "scaled_projection": scaled_projection,
    "prox_l1": prox_l1,
    "prox_quadratic": prox_quadratic,
}
