"""AACA (averaged alternating-reflection splitting) at a fixed averaging weight.

For ``gamma in ]0, 1[`` and anchor ``w`` the anchored averages ``A_gamma``
and ``B_gamma`` are strongly monotone, so ``A_gamma + B_gamma`` has exactly
one zero ``z_gamma``.  AACA runs the relaxed Douglas-Rachford map on the
averaged pair, written out explicitly:

    x+ = (1 - lam) x + lam (2g J_B + 2(1-g) w - Id)(2g J_A + 2(1-g) w - Id) x

and reads ``z_gamma`` off the shadow ``g J_A x + (1 - g) w``.

``z_gamma`` is tied to the original operators through
``y = (z_gamma - (1 - g) w) / g``, which solves the Tikhonov-regularized
inclusion ``0 in (A + B) y + delta (y - w)`` with ``delta = 2 (1 - g)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .averaging import AnchoredAverage, averaged_operator
from .operators import DimensionError, Operator, as_vector, inclusion_residual
from .splitting import IterationTrace, SolverConfig, dr_step, fixed_point_iteration

# a converged shadow must also pass its certificate at this multiple of tol
CERT_FACTOR = 100.0

__all__ = [
    "AacaProblem",
    "AacaResult",
    "aaca_step",
    "aaca_step_averaged",
    "solve",
    "certify",
    "regularized_point",
]


@dataclass(frozen=True)
class AacaProblem:
    A: Operator
    B: Operator
    w: np.ndarray
    gamma: float
    cfg: SolverConfig = SolverConfig()
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        gamma = float(self.gamma)
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in ]0, 1[, got {gamma}")
        object.__setattr__(self, "gamma", gamma)
        n = self.A.dim
        if self.B.dim != n:
            raise DimensionError(f"A has dimension {n} but B has dimension {self.B.dim}")
        object.__setattr__(self, "w", as_vector(self.w, n, "w"))
        x0 = self.w.copy() if self.x0 is None else as_vector(self.x0, n, "x0")
        object.__setattr__(self, "x0", x0)

    @property
    def delta(self) -> float:
        return 2.0 * (1.0 - self.gamma)

    @property
    def dim(self) -> int:
        return self.A.dim

    def averaged(self):
        """``(A_gamma, B_gamma)`` as operators."""
        return (averaged_operator(AnchoredAverage(self.A, self.gamma, self.w)),
                averaged_operator(AnchoredAverage(self.B, self.gamma, self.w)))


@dataclass
class AacaResult:
    z_gamma: np.ndarray
    trace: IterationTrace
    certified_residual: float
    gamma: float
    delta: float

    @property
    def status(self):
        return self.trace.status

    @property
    def converged(self) -> bool:
        return self.trace.converged

    @property
    def iterations(self) -> int:
        return self.trace.iterations

    @property
    def x(self) -> np.ndarray:
        """Final governing iterate."""
        return self.trace.x

    def to_record(self) -> dict:
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "z_gamma": [float(v) for v in self.z_gamma],
            "certified_residual": self.certified_residual,
            "iterations": self.iterations,
            "status": self.status.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2) + "\n"


def aaca_step(p: AacaProblem, x) -> np.ndarray:
    """One AACA iteration in its explicit composed form."""
    x = as_vector(x, p.dim)
    g, lam = p.gamma, p.cfg.lam
    c = 2.0 * (1.0 - g) * p.w
    ra = 2.0 * g * p.A.resolvent_fn(x) + c - x
    rb = 2.0 * g * p.B.resolvent_fn(ra) + c - ra
    return (1.0 - lam) * x + lam * rb


def aaca_step_averaged(p: AacaProblem, x) -> np.ndarray:
    """The same iteration as a Douglas-Rachford step on ``(A_gamma, B_gamma)``."""
    Ag, Bg = p.averaged()
    return dr_step(Ag, Bg, p.cfg.lam, x)


def regularized_point(p: AacaProblem, z) -> np.ndarray:
    """``y = (z - (1 - gamma) w) / gamma``."""
    return (np.asarray(z, dtype=float) - (1.0 - p.gamma) * p.w) / p.gamma


def certify(p: AacaProblem, z, x=None) -> float:
    """Residual of ``0 in (A + B) y + delta (y - w)`` at ``y = regularized_point(z)``.

    With both operators single-valued this is
    ``||A y + B y + delta (y - w)||``.  If only one is single-valued, its
    value fixes the multiplier of the other, whose membership is tested
    through its resolvent (see :func:`inclusion_residual`).  If neither is,
    the multipliers come from the governing iterate `x` (``x - z`` lies in
    ``A_gamma(z)``); without `x` the whole regularization term is assigned
    to one operator and then the other, keeping the smaller residual; a
    zero then certifies the point, a positive value only bounds it.
    """
    z = as_vector(z, p.dim, "z")
    A, B, w, g = p.A, p.B, p.w, p.gamma
    y = regularized_point(p, z)
    reg = p.delta * (y - w)
    if A.single_valued and B.single_valued:
        return float(np.linalg.norm(A.forward_fn(y) + B.forward_fn(y) + reg))
    if A.single_valued:
        return inclusion_residual(B, y, -A.forward_fn(y) - reg)
    if B.single_valued:
        return inclusion_residual(A, y, -B.forward_fn(y) - reg)
    if x is not None:
        x = as_vector(x, p.dim, "x")
        # x - z lies in A_gamma(z) = A(y) + (1 - g)(y - w)
        u_a = (x - z) - (1.0 - g) * (y - w)
        u_b = -u_a - reg
        return inclusion_residual(A, y, u_a) + inclusion_residual(B, y, u_b)
    return min(
        inclusion_residual(A, y, -reg) + inclusion_residual(B, y, np.zeros_like(y)),
        inclusion_residual(A, y, np.zeros_like(y)) + inclusion_residual(B, y, -reg),
    )


def solve(p: AacaProblem) -> AacaResult:
    """Run AACA until the shadow ``gamma J_A x_n + (1 - gamma) w`` settles.

    Returns the final shadow as ``z_gamma`` together with the trace and a
    certified residual.  A run that exhausts its budget still returns its
    best iterate, with the trace status saying so.
    """
    g, lam, w = p.gamma, p.cfg.lam, p.w
    JA, JB = p.A.resolvent_fn, p.B.resolvent_fn
    two_g = 2.0 * g
    c = 2.0 * (1.0 - g) * w
    shift = (1.0 - g) * w

    def step(x):
        ja = JA(x)
        ra = two_g * ja + c - x
        rb = two_g * JB(ra) + c - ra
        if lam != 1.0:
            rb = (1.0 - lam) * x + lam * rb
        return rb, g * ja + shift

    def accept(x, s):
        return certify(p, s, x) <= CERT_FACTOR * p.cfg.tol * max(1.0, float(np.linalg.norm(s)))

    trace = fixed_point_iteration(step, p.cfg, p.x0, residual=lambda x, s: certify(p, s, x),
                                  accept=accept)
    z = trace.shadow
    return AacaResult(
        z_gamma=z,
        trace=trace,
        certified_residual=certify(p, z, trace.x),
        gamma=g,
        delta=p.delta,
    )
