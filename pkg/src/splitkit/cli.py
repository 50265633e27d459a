"""Batch front end: read a TOML problem file, run it, write CSV/JSON artifacts.

Problem file schema (TOML)::

    dimension = 2
    mode = "sweep"            # solve | sweep | dr
    w = [0.0, 0.0]            # anchor
    gamma = 0.9               # solve mode
    schedule = [0.5, 0.9, 0.99]   # sweep mode, optional (default 1 - 2^-k, k=1..17)
    warm_start = true
    lambda = 1.0
    tol = 1e-10
    max_iter = 2000000
    record_every = 1
    x0 = [0.0, 0.0]           # optional, defaults to w
    output = "run"            # output path prefix

    [A]
    kind = "scaled_projection"
    basis = [[1.0, 0.0]]

    [B]
    kind = "constant_op"
    c = [0.0, -1.0]

``kind`` names a constructor in :data:`splitkit.operators.CATALOG`; the
remaining keys are passed to it as keyword arguments.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .aaca import AacaProblem, solve
from .dichotomy import Classification, GammaSchedule, default_schedule, sweep, threads_from_env
from .operators import CATALOG, Operator
from .splitting import SolverConfig, solve_fixed_point, zero_residual

MODES = ("solve", "sweep", "dr")
MODE_ALIASES = {"solve-at-gamma": "solve", "plain-dr": "dr"}
KNOWN_KEYS = {"dimension", "mode", "A", "B", "w", "gamma", "schedule", "warm_start",
              "lambda", "tol", "max_iter", "record_every", "x0", "output"}

EXIT_OK, EXIT_FAILED, EXIT_SPEC, EXIT_IO = 0, 1, 2, 3


class SpecError(ValueError):
    """Collects every validation problem found in a problem file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid problem spec:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def build(self) -> Operator:
        return CATALOG[self.kind](**self.params)


@dataclass(frozen=True)
class ProblemSpec:
    dimension: int
    A: OperatorSpec
    B: OperatorSpec
    w: tuple
    mode: str = "solve"
    gamma: Optional[float] = None
    schedule: Optional[tuple] = None
    warm_start: bool = True
    lam: float = 1.0
    tol: float = 1e-10
    max_iter: int = 2_000_000
    record_every: int = 1
    x0: Optional[tuple] = None
    output: str = "splitkit"

    @property
    def config(self) -> SolverConfig:
        return SolverConfig(self.lam, self.tol, self.max_iter, self.record_every)

    @property
    def start(self) -> tuple:
        return self.w if self.x0 is None else self.x0


def _vector(raw, name, dim, errors):
    if not isinstance(raw, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                            for v in raw):
        errors.append(f"{name}: expected an array of numbers")
        return None
    vec = tuple(float(v) for v in raw)
    if not all(np.isfinite(vec)):
        errors.append(f"{name}: non-finite entry")
    if dim is not None and len(vec) != dim:
        errors.append(f"{name}: has {len(vec)} entries, dimension is {dim}")
    return vec


def _number(doc, key, default, errors, kind=float):
    raw = doc.get(key, default)
    if kind is int:
        ok = isinstance(raw, int) and not isinstance(raw, bool)
    else:
        ok = isinstance(raw, (int, float)) and not isinstance(raw, bool)
    if not ok:
        errors.append(f"{key}: expected {'an integer' if kind is int else 'a number'}, got {raw!r}")
        return default
    return kind(raw)


def _operator_spec(doc, key, dim, errors):
    raw = doc.get(key)
    if not isinstance(raw, dict):
        errors.append(f"{key}: missing operator table (needs at least `kind`)")
        return None
    params = dict(raw)
    kind = params.pop("kind", None)
    if kind not in CATALOG:
        errors.append(f"{key}.kind: unknown constructor {kind!r}; known: {', '.join(sorted(CATALOG))}")
        return None
    spec = OperatorSpec(kind, params)
    try:
        op = spec.build()
    except TypeError as exc:
        errors.append(f"{key}: bad parameters for {kind}: {exc}")
        return spec
    except ValueError as exc:
        errors.append(f"{key}: {exc}")
        return spec
    if dim is not None and op.dim != dim:
        errors.append(f"{key}: operator dimension {op.dim} does not match dimension {dim}")
    return spec


def parse_spec(text: str, mode: Optional[str] = None) -> ProblemSpec:
    """Parse and validate a TOML problem file.

    `mode` overrides the file's mode.  All validation errors are reported
    together in a :class:`SpecError`.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError([f"TOML syntax: {exc}"]) from None
    errors = []
    for key in sorted(set(doc) - KNOWN_KEYS):
        errors.append(f"{key}: unknown field")

    dim = doc.get("dimension")
    if not (isinstance(dim, int) and not isinstance(dim, bool) and dim >= 1):
        errors.append(f"dimension: expected an integer >= 1, got {dim!r}")
        dim = None

    mode = mode if mode is not None else doc.get("mode", "solve")
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        errors.append(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")

    A = _operator_spec(doc, "A", dim, errors)
    B = _operator_spec(doc, "B", dim, errors)
    w = _vector(doc.get("w"), "w", dim, errors) if "w" in doc else None
    if w is None and "w" not in doc:
        errors.append("w: missing anchor vector")
    x0 = _vector(doc["x0"], "x0", dim, errors) if "x0" in doc else None

    gamma = None
    if "gamma" in doc:
        gamma = _number(doc, "gamma", None, errors)
        if gamma is not None and mode in ("solve", "sweep") and not 0.0 < gamma < 1.0:
            errors.append(f"gamma: {gamma} is outside the open interval ]0, 1[")
    elif mode == "solve":
        errors.append("gamma: required in solve mode")

    schedule = None
    if "schedule" in doc:
        schedule = _vector(doc["schedule"], "schedule", None, errors)
        if schedule is not None:
            try:
                GammaSchedule(schedule)
            except ValueError as exc:
                errors.append(f"schedule: {exc}")

    warm_start = doc.get("warm_start", True)
    if not isinstance(warm_start, bool):
        errors.append(f"warm_start: expected true/false, got {warm_start!r}")
    lam = _number(doc, "lambda", 1.0, errors)
    if not 0.0 < lam <= 1.0:
        errors.append(f"lambda: {lam} is outside ]0, 1]")
    tol = _number(doc, "tol", 1e-10, errors)
    if not tol > 0:
        errors.append(f"tol: must be > 0, got {tol}")
    max_iter = _number(doc, "max_iter", 2_000_000, errors, int)
    if max_iter < 1:
        errors.append(f"max_iter: must be >= 1, got {max_iter}")
    record_every = _number(doc, "record_every", 1, errors, int)
    if record_every < 1:
        errors.append(f"record_every: must be >= 1, got {record_every}")
    output = doc.get("output", "splitkit")
    if not isinstance(output, str) or not output:
        errors.append(f"output: expected a non-empty string, got {output!r}")

    if errors:
        raise SpecError(errors)
    return ProblemSpec(dim, A, B, w, mode, gamma, schedule, warm_start, lam, tol,
                       max_iter, record_every, x0, output)


def serialize_spec(spec: ProblemSpec) -> str:
    doc = {"dimension": spec.dimension, "mode": spec.mode, "w": list(spec.w)}
    if spec.gamma is not None:
        doc["gamma"] = spec.gamma
    if spec.schedule is not None:
        doc["schedule"] = list(spec.schedule)
    doc.update({"warm_start": spec.warm_start, "lambda": spec.lam, "tol": spec.tol,
                "max_iter": spec.max_iter, "record_every": spec.record_every})
    if spec.x0 is not None:
        doc["x0"] = list(spec.x0)
    doc["output"] = spec.output
    doc["A"] = {"kind": spec.A.kind, **spec.A.params}
    doc["B"] = {"kind": spec.B.kind, **spec.B.params}
    return tomli_w.dumps(doc)


def bundled_spec(name: str) -> str:
    """Text of a bundled problem file, e.g. ``bundled_spec("example_infeasible")``."""
    return resources.files("splitkit").joinpath("bundled", f"{name}.toml").read_text()


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def run(spec: ProblemSpec, out: Optional[str] = None, quiet: bool = False,
        n_jobs: int = 0) -> int:
    """Execute `spec` and write its artifacts under the prefix `out`.

    Returns 0 when the solve converged (solve/dr) or the sweep was
    classified, 1 otherwise.
    """
    prefix = out if out is not None else spec.output
    A, B = spec.A.build(), spec.B.build()
    cfg = spec.config
    w = np.array(spec.w)
    x0 = np.array(spec.start)

    def emit(msg):
        if not quiet:
            print(msg)

    if spec.mode == "solve":
        res = solve(AacaProblem(A, B, w, spec.gamma, cfg, x0))
        _write(Path(f"{prefix}_trace.csv"), res.trace.to_csv())
        _write(Path(f"{prefix}_result.json"), res.to_json())
        emit(f"gamma={spec.gamma} status={res.status.value} iterations={res.iterations} "
             f"z_gamma={np.array2string(res.z_gamma, precision=10)}")
        return EXIT_OK if res.converged else EXIT_FAILED

    if spec.mode == "sweep":
        sched = (GammaSchedule(spec.schedule, spec.warm_start) if spec.schedule is not None
                 else default_schedule(warm_start=spec.warm_start))
        rep = sweep(A, B, w, sched, cfg, x0=x0, n_jobs=n_jobs)
        last = rep.results[-1]
        _write(Path(f"{prefix}_sweep.csv"), rep.to_csv())
        _write(Path(f"{prefix}_summary.json"), rep.to_json())
        _write(Path(f"{prefix}_trace.csv"), last.trace.to_csv())
        _write(Path(f"{prefix}_result.json"), last.to_json())
        emit(f"classification={rep.classification.value} growth_slope={rep.growth_rate:.6g}")
        for note in rep.notes:
            emit(f"note: {note}")
        return EXIT_FAILED if rep.classification is Classification.INCONCLUSIVE else EXIT_OK

    trace = solve_fixed_point(A, B, cfg, x0)
    z = trace.shadow
    record = {
        "mode": "dr",
        "z": [float(v) for v in z],
        "residual": zero_residual(A, B, z, trace.x),
        "iterations": trace.iterations,
        "status": trace.status.value,
    }
    _write(Path(f"{prefix}_trace.csv"), trace.to_csv())
    _write(Path(f"{prefix}_result.json"), json.dumps(record, indent=2) + "\n")
    emit(f"status={trace.status.value} iterations={trace.iterations} "
         f"z={np.array2string(z, precision=10)}")
    return EXIT_OK if trace.converged else EXIT_FAILED


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="splitkit", description=__doc__.splitlines()[0])
    ap.add_argument("--spec", required=True, help="TOML problem file")
    ap.add_argument("--out", help="output path prefix (overrides `output` in the problem file)")
    ap.add_argument("--mode", choices=MODES, help="override the problem file's mode")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary line")
    args = ap.parse_args(argv)

    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    try:
        spec = parse_spec(text, mode=args.mode)
        n_jobs = threads_from_env()
    except (SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    try:
        return run(spec, out=args.out, quiet=args.quiet, n_jobs=n_jobs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
