"""Sweeping the averaging weight toward 1.

As ``gamma -> 1-`` the AACA points ``z_gamma`` either converge to the
projection of the anchor onto ``zer(A + B)`` (when that set is nonempty)
or blow up in norm (when it is empty).  :func:`sweep` solves along a
schedule of weights and classifies the observed tail.

No finite schedule proves either branch; the classification is an
empirical reading of the tail, and the growth fit is a diagnostic.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .aaca import AacaProblem, AacaResult, solve
from .operators import Operator, as_vector
from .splitting import SolverConfig, fmt

__all__ = [
    "GammaSchedule",
    "default_schedule",
    "Classification",
    "DichotomyReport",
    "sweep",
    "fit_growth",
    "threads_from_env",
]

THETA_FIT = 0.05
TAIL_GAMMA = 0.99
TAIL_SIZE = 3
# per-gamma tolerances below this are not reachable in double precision
TOL_FLOOR = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class GammaSchedule:
    values: Tuple[float, ...]
    warm_start: bool = True

    def __post_init__(self):
        vals = tuple(float(g) for g in self.values)
        if len(vals) < 3:
            raise ValueError(f"a gamma schedule needs at least 3 values, got {len(vals)}")
        for i, g in enumerate(vals):
            if not 0.0 < g < 1.0:
                raise ValueError(f"schedule value #{i} = {g} is outside ]0, 1[")
        for i in range(1, len(vals)):
            if not vals[i] > vals[i - 1]:
                raise ValueError(f"schedule is not strictly increasing at index {i}")
        object.__setattr__(self, "values", vals)


def default_schedule(kmax: int = 17, warm_start: bool = True) -> GammaSchedule:
    """``gamma_k = 1 - 2^-k`` for ``k = 1..kmax``."""
    return GammaSchedule(tuple(1.0 - 2.0 ** -k for k in range(1, kmax + 1)), warm_start)


class Classification(str, enum.Enum):
    FEASIBLE_CONVERGENT = "FEASIBLE_CONVERGENT"
    INFEASIBLE_DIVERGENT = "INFEASIBLE_DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


def fit_growth(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares fit ``norm ~ c / (1 - gamma) + b``.

    Returns the slope ``c`` and the relative residual
    ``||fit - norms|| / ||norms||``.  The intercept absorbs the bounded
    part of the growth, e.g. ``gamma / (2 (1 - gamma)) = 0.5/(1 - gamma) - 0.5``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("fit_growth needs at least 3 (gamma, norm) points")
    gam, norms = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(pts)):
        raise ValueError("fit_growth points must be finite")
    if np.any(gam >= 1.0):
        raise ValueError("gamma values must be < 1")
    t = 1.0 / (1.0 - gam)
    if np.unique(t).size < 2:
        raise ValueError("degenerate design: need at least two distinct gamma values")
    # scale the design column for conditioning
    ts = t.max()
    design = np.column_stack([t / ts, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, norms, rcond=None)
    resid = design @ coef - norms
    scale = np.linalg.norm(norms)
    rel = float(np.linalg.norm(resid) / scale) if scale > 0 else float(np.linalg.norm(resid))
    return float(coef[0] / ts), rel


@dataclass
class DichotomyReport:
    gammas: List[float]
    results: List[AacaResult]
    classification: Classification
    limit_estimate: Optional[np.ndarray]
    growth_rate: Optional[float]
    growth_relative_error: Optional[float]
    theta_conv: float
    theta_fit: float
    tail_spread: float
    notes: List[str] = field(default_factory=list)

    @property
    def z(self) -> np.ndarray:
        return np.array([r.z_gamma for r in self.results])

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.z, axis=1)

    def to_csv(self) -> str:
        dim = self.results[0].z_gamma.size
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["gamma", "norm_z", "residual", "iterations"]
                    + [f"z_{i}" for i in range(dim)])
        for g, r in zip(self.gammas, self.results):
            wr.writerow([fmt(g), fmt(np.linalg.norm(r.z_gamma)), fmt(r.certified_residual),
                         r.iterations] + [fmt(v) for v in r.z_gamma])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "classification": self.classification.value,
            "limit_estimate": (None if self.limit_estimate is None
                               else [float(v) for v in self.limit_estimate]),
            "growth_fit": {
                "slope_vs_inverse_one_minus_gamma": self.growth_rate,
                "relative_error": self.growth_relative_error,
                "note": "diagnostic only; no general growth law is asserted",
            },
            "thresholds": {"theta_conv": self.theta_conv, "theta_fit": self.theta_fit},
            "tail_spread": self.tail_spread,
            "gammas": list(self.gammas),
            "statuses": [r.status.value for r in self.results],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"


def threads_from_env(default: int = 0) -> int:
    """Thread cap from ``SPLITKIT_THREADS`` (0 means sequential)."""
    raw = os.environ.get("SPLITKIT_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        return max(0, int(raw))
    except ValueError:
        raise ValueError(f"SPLITKIT_THREADS must be an integer, got {raw!r}") from None


def _gamma_cfg(cfg: SolverConfig, gamma: float) -> SolverConfig:
    # conditioning degrades like 1 - gamma, so tighten the tolerance with it
    return replace(cfg, tol=max(cfg.tol * (1.0 - gamma), TOL_FLOOR))


def _classify(gammas, results, theta_conv, theta_fit):
    notes = []
    bad = [g for g, r in zip(gammas, results) if not r.converged]
    z = np.array([r.z_gamma for r in results])
    tail = z[-TAIL_SIZE:]
    spread = max(float(np.linalg.norm(a - b)) for i, a in enumerate(tail) for b in tail[i + 1:])
    if bad:
        notes.append("solver did not converge at gamma = " + ", ".join(fmt(g) for g in bad))
        return Classification.INCONCLUSIVE, spread, notes
    if spread <= theta_conv:
        return Classification.FEASIBLE_CONVERGENT, spread, notes
    norms = np.linalg.norm(tail, axis=1)
    increasing = bool(np.all(np.diff(norms) > 0))
    c, rel = fit_growth(list(zip(gammas[-TAIL_SIZE:], norms)))
    if increasing and c > 0 and rel < theta_fit:
        return Classification.INFEASIBLE_DIVERGENT, spread, notes
    notes.append(f"tail neither Cauchy (spread {spread:.3e}) nor growing like 1/(1-gamma) "
                 f"(increasing={increasing}, slope={c:.3e}, rel_err={rel:.3e})")
    return Classification.INCONCLUSIVE, spread, notes


def sweep(A: Operator, B: Operator, w, sched: GammaSchedule, cfg: SolverConfig,
          x0=None, n_jobs: int = 0, theta_conv: Optional[float] = None,
          theta_fit: float = THETA_FIT, tail_gamma: float = TAIL_GAMMA) -> DichotomyReport:
    """Solve AACA along `sched` and classify the behaviour of ``z_gamma``.

    Parameters
    ----------
    A, B : Operator
    w : array_like
        Anchor.
    sched : GammaSchedule
        With ``warm_start`` the final governing iterate at one weight starts
        the next solve; otherwise every solve starts at `x0` (default `w`)
        and, if ``n_jobs > 1``, solves run on a thread pool.
    cfg : SolverConfig
        Base configuration; at weight ``gamma`` the tolerance used is
        ``cfg.tol * (1 - gamma)``.
    theta_conv : float, optional
        Cauchy threshold on the last three points, default
        ``1e-3 * max(1, ||w||)``.
    theta_fit : float
        Largest relative error of the growth fit accepted as divergence.
    tail_gamma : float
        The reported growth fit uses the points with ``gamma >= tail_gamma``
        (or the last three if there are fewer).

    Returns
    -------
    DichotomyReport
    """
    w = as_vector(w, A.dim, "w")
    if theta_conv is None:
        theta_conv = 1e-3 * max(1.0, float(np.linalg.norm(w)))
    gammas = list(sched.values)

    def problem(g, start):
        return AacaProblem(A, B, w, g, _gamma_cfg(cfg, g), start)

    if sched.warm_start:
        results = []
        start = x0
        for g in gammas:
            r = solve(problem(g, start))
            results.append(r)
            start = r.x
    elif n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda g: solve(problem(g, x0)), gammas))
    else:
        results = [solve(problem(g, x0)) for g in gammas]

    cls, spread, notes = _classify(gammas, results, theta_conv, theta_fit)
    norms = [float(np.linalg.norm(r.z_gamma)) for r in results]
    tail = [(g, nz) for g, nz in zip(gammas, norms) if g >= tail_gamma]
    if len(tail) < TAIL_SIZE:
        tail = list(zip(gammas, norms))[-TAIL_SIZE:]
    c, rel = fit_growth(tail)
    return DichotomyReport(
        gammas=gammas,
        results=results,
        classification=cls,
        limit_estimate=(results[-1].z_gamma.copy()
                        if cls is Classification.FEASIBLE_CONVERGENT else None),
        growth_rate=c,
        growth_relative_error=rel,
        theta_conv=float(theta_conv),
        theta_fit=float(theta_fit),
        tail_spread=spread,
        notes=notes,
    )
