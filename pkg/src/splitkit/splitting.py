"""Relaxed Douglas-Rachford / Peaceman-Rachford fixed-point engine.

The governing map is ``T = (1 - lam) Id + lam R_B R_A`` with
``R = 2 J - Id``.  The engine tracks the shadow sequence ``J_A x_n`` and
stops once consecutive shadow points are within
``tol * max(1, ||J_A x_n||)``.  Under ``lam = 1`` the governing sequence
need not settle even when the shadow does, so by default only the shadow
is tested; for ``lam < 1`` the governing step must also fall below
``tol * max(1, ||J_A x_n||)``, which keeps a stalled shadow with a drifting
governing sequence (empty zero set) from passing as converged.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .operators import DimensionError, Operator, as_vector, inclusion_residual

__all__ = [
    "SolverConfig",
    "Status",
    "TraceRecord",
    "IterationTrace",
    "dr_step",
    "fixed_point_iteration",
    "solve_fixed_point",
    "product_lift",
    "diagonal_block",
    "zero_residual",
    "fmt",
]


def fmt(v: float) -> str:
    """Round-trip decimal representation used in every CSV output."""
    return format(float(v), ".17g")


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1.0
    tol: float = 1e-10
    max_iter: int = 100_000
    record_every: int = 1

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in ]0, 1], got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if int(self.record_every) < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")


class Status(str, enum.Enum):
    CONVERGED = "converged"
    BUDGET = "iteration-budget"
    STAGNATION = "stagnation"


@dataclass
class TraceRecord:
    n: int
    x: np.ndarray
    shadow: np.ndarray
    step_norm: float
    shadow_step_norm: float
    residual: Optional[float] = None


@dataclass
class IterationTrace:
    """Recorded iterations of a fixed-point run plus its terminal state.

    ``x`` and ``shadow`` are the final governing iterate and its shadow.
    """

    records: List[TraceRecord] = field(default_factory=list)
    status: Status = Status.BUDGET
    iterations: int = 0
    x: Optional[np.ndarray] = None
    shadow: Optional[np.ndarray] = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_csv(self) -> str:
        dim = self.shadow.size if self.shadow is not None else 0
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "step_norm", "shadow_step_norm", "residual"]
                    + [f"shadow_{i}" for i in range(dim)])
        for r in self.records:
            res = "" if r.residual is None else fmt(r.residual)
            wr.writerow([r.n, fmt(r.step_norm), fmt(r.shadow_step_norm), res]
                        + [fmt(v) for v in r.shadow])
        return buf.getvalue()


def _check_dims(dim, *ops):
    for op in ops:
        if op.dim != dim:
            raise DimensionError(f"operator {op.label} has dimension {op.dim}, expected {dim}")


def dr_step(A: Operator, B: Operator, lam: float, x) -> np.ndarray:
    """One step of ``(1 - lam) x + lam R_B(R_A(x))``."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in ]0, 1], got {lam}")
    x = as_vector(x, A.dim)
    _check_dims(A.dim, B)
    ra = 2.0 * A.resolvent_fn(x) - x
    rb = 2.0 * B.resolvent_fn(ra) - ra
    return (1.0 - lam) * x + lam * rb


def fixed_point_iteration(
    step: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    cfg: SolverConfig,
    x0: np.ndarray,
    residual: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    check_governing: Optional[bool] = None,
    accept: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None,
) -> IterationTrace:
    """Drive ``x_{n+1} = T x_n`` with shadow-based stopping.

    Parameters
    ----------
    step : callable
        ``x -> (T x, shadow(x))``.  Returning both lets callers reuse the
        resolvent evaluation shared by the step and the shadow.
    cfg : SolverConfig
    x0 : ndarray
    residual : callable, optional
        ``(x, shadow) -> float`` evaluated on recorded iterations only.
    check_governing : bool, optional
        Also require the governing step to fall below tolerance.  Defaults
        to ``cfg.lam < 1``.
    accept : callable, optional
        ``(x, shadow) -> bool`` consulted only once the step tests pass; a
        shadow can stall (e.g. on a corner of a box) while ``x`` still moves,
        and this lets the caller reject such points.

    Returns
    -------
    IterationTrace
        Record ``n`` holds ``x_n``, its shadow ``s_n``, ``||x_{n+1} - x_n||``
        and ``||s_{n+1} - s_n||``.  The last iteration is always recorded.
    """
    tol = cfg.tol
    every = int(cfg.record_every)
    blowup = 1.0 / tol
    if check_governing is None:
        check_governing = cfg.lam < 1.0
    trace = IterationTrace()

    with np.errstate(over="ignore", invalid="ignore"):
        x = np.array(x0, dtype=float)
        x_next, s = step(x)
        n = 0
        for n in range(int(cfg.max_iter)):
            x_after, s_next = step(x_next)
            dx = x_next - x
            ds = s_next - s
            step_norm = math.sqrt(dx @ dx)
            shadow_step = math.sqrt(ds @ ds)

            # a non-finite x_after shows up in the norms one iteration later
            if not (math.isfinite(step_norm) and math.isfinite(shadow_step)):
                trace.status = Status.STAGNATION
                trace.message = f"non-finite iterate at n={n + 1}"
            elif step_norm > blowup:
                trace.status = Status.STAGNATION
                trace.message = f"governing step {step_norm:.3e} exceeds 1/tol at n={n}"
            elif shadow_step <= tol * max(1.0, math.sqrt(s @ s)) and (
                    not check_governing or step_norm <= tol * max(1.0, math.sqrt(s @ s))) and (
                    accept is None or accept(x_next, s_next)):
                trace.status = Status.CONVERGED
                trace.message = f"step below tolerance at n={n}"
            last = trace.status is not Status.BUDGET or n == cfg.max_iter - 1

            if last or n % every == 0:
                r = residual(x, s) if residual is not None else None
                trace.records.append(TraceRecord(n, x, s, step_norm, shadow_step, r))
            if last:
                break
            x, x_next, s = x_next, x_after, s_next

    if trace.status is Status.BUDGET:
        trace.message = f"iteration budget of {cfg.max_iter} exhausted"
    if trace.status is Status.STAGNATION:
        # keep the last finite iterate
        trace.x, trace.shadow = x, s
        trace.iterations = n
    else:
        trace.x, trace.shadow = x_next, s_next
        trace.iterations = n + 1
    return trace


def solve_fixed_point(A: Operator, B: Operator, cfg: SolverConfig, x0,
                      residual=None) -> IterationTrace:
    """Relaxed Douglas-Rachford (``lam < 1``) or Peaceman-Rachford (``lam = 1``).

    The shadow ``J_A x_n`` approaches a zero of ``A + B``.  For ``lam = 1``
    this is only guaranteed when A is strongly monotone, so a warning is
    issued otherwise.
    """
    x0 = as_vector(x0, A.dim, "x0")
    _check_dims(A.dim, B)
    if cfg.lam == 1.0 and A.modulus <= 0.0:
        warnings.warn(
            f"lambda=1 with {A.label} not strongly monotone: "
            "shadow convergence is not guaranteed",
            RuntimeWarning,
            stacklevel=2,
        )
    lam = cfg.lam
    JA, JB = A.resolvent_fn, B.resolvent_fn

    def step(x):
        ja = JA(x)
        ra = 2.0 * ja - x
        rb = 2.0 * JB(ra) - ra
        if lam == 1.0:
            return rb, ja
        return (1.0 - lam) * x + lam * rb, ja

    return fixed_point_iteration(step, cfg, x0, residual)


def zero_residual(A: Operator, B: Operator, z, x=None) -> float:
    """Residual of ``0 in A z + B z``.

    ``||A z + B z||`` when both operators are single-valued.  Otherwise the
    set-valued side is tested through its resolvent with the multiplier
    fixed by the other side, or, when neither is single-valued, by the
    governing iterate `x` (``x - z`` lies in ``A z`` when ``z = J_A x``).
    Without `x` both multipliers are taken as 0, which certifies
    feasibility problems (normal cones) but only bounds the residual in
    general.
    """
    z = as_vector(z, A.dim, "z")
    if A.single_valued and B.single_valued:
        return float(np.linalg.norm(A.forward_fn(z) + B.forward_fn(z)))
    if A.single_valued:
        return inclusion_residual(B, z, -A.forward_fn(z))
    if B.single_valued:
        return inclusion_residual(A, z, -B.forward_fn(z))
    u = np.zeros_like(z) if x is None else as_vector(x, A.dim, "x") - z
    return inclusion_residual(A, z, u) + inclusion_residual(B, z, -u)


def product_lift(ops: Sequence[Operator]) -> Tuple[Operator, Operator]:
    """Lift ``A_1 + ... + A_m`` to a two-operator problem on ``R^{m n}``.

    Returns ``(D, P)`` where ``D = A_1 x ... x A_m`` acts blockwise and ``P``
    is the normal cone of the diagonal ``{(x, ..., x)}``, whose resolvent
    replaces every block by the block average.  A zero of ``D + P`` is a
    diagonal point whose common block is a zero of the sum.  Passing ``P``
    as the first operator to :func:`solve_fixed_point` keeps the shadow on
    the diagonal.
    """
    ops = list(ops)
    m = len(ops)
    if m < 2:
        raise ValueError(f"product lift needs at least 2 operators, got {m}")
    n = ops[0].dim
    _check_dims(n, *ops)
    resolvents = [op.resolvent_fn for op in ops]

    def block_res(x):
        xb = x.reshape(m, n)
        return np.concatenate([J(xb[i]) for i, J in enumerate(resolvents)])

    fwd = None
    if all(op.forward_fn is not None for op in ops):
        forwards = [op.forward_fn for op in ops]

        def fwd(x):
            xb = x.reshape(m, n)
            return np.concatenate([F(xb[i]) for i, F in enumerate(forwards)])

    D = Operator(m * n, block_res, min(op.modulus for op in ops), fwd,
                 "product[" + ", ".join(op.label for op in ops) + "]")
    P = Operator(m * n, lambda x: np.tile(x.reshape(m, n).mean(axis=0), m), 0.0, None,
                 f"normal_cone_diagonal(m={m})", True)
    return D, P


def diagonal_block(x, m: int) -> np.ndarray:
    """Average block of a lifted vector; equals every block on the diagonal."""
    x = np.asarray(x, dtype=float)
    if x.size % m:
        raise DimensionError(f"vector of length {x.size} does not split into {m} blocks")
    return x.reshape(m, -1).mean(axis=0)
