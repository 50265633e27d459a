"""Acceptance suite: one test per criterion, tolerances fixed below."""
import json
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import null_space, orth

from splitkit import operators as ops
from splitkit.aaca import AacaProblem, aaca_step, aaca_step_averaged, solve
from splitkit.averaging import AnchoredAverage, averaged_operator, averaged_resolvent
from splitkit.cli import bundled_spec, main, parse_spec, serialize_spec
from splitkit.dichotomy import Classification, default_schedule, sweep
from splitkit.splitting import SolverConfig, product_lift, solve_fixed_point

from _instances import catalog_instances

EXAMPLE_ABS_TOL = 1e-6
EXAMPLE_SECONDS = 1.0
LIMIT_TOL = 1e-3
SLOPE_REL_TOL = 0.05
TAIL_GAMMA = 0.99
PATH_TOL = 1e-12
MODULUS_TOL = 1e-9
ROUNDING_ULPS = 4
PROPERTY_PAIRS = 100
UNIQUE_STARTS = 5
MEMBERSHIP_TOL = 1e-6
SWEEP_END = 1 - 1e-5

V = np.array([0.0, 1.0])


def example_problem(gamma, v=V, lam=1.0, tol=1e-10, x0=None, max_iter=1_000_000):
    return AacaProblem(ops.scaled_projection([[1.0, 0.0]]), ops.constant_op(-np.asarray(v)),
                       np.zeros(2), gamma, SolverConfig(lam=lam, tol=tol, max_iter=max_iter), x0)


def example_closed_form(gamma, v=V):
    return gamma * np.asarray(v) / (2 * (1 - gamma))


def intersection_projector(U, V):
    """Projector onto span(U) ∩ span(V), bases as rows, by direct linear algebra."""
    N = null_space(np.hstack([U.T, -V.T]))
    Q = orth(U.T @ N[:U.shape[0]])
    return Q @ Q.T


def random_subspace_pair(seed):
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((2, 5))
    U = np.vstack([common, rng.standard_normal((1, 5))])
    V = np.vstack([common, rng.standard_normal((2, 5))])
    return U, V, rng.standard_normal(5)


# ---------------------------------------------------------------------------

@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
def test_c1_example_closed_form(gamma):
    p = example_problem(gamma)
    t0 = time.perf_counter()
    res = solve(p)
    elapsed = time.perf_counter() - t0
    assert res.converged
    assert np.max(np.abs(res.z_gamma - example_closed_form(gamma))) <= EXAMPLE_ABS_TOL
    assert elapsed <= EXAMPLE_SECONDS


@pytest.mark.parametrize("seed", [0, 1])
def test_c2_subspace_sweep_feasible(seed):
    U, Vb, w = random_subspace_pair(seed)
    assert np.linalg.matrix_rank(U) == 3 and np.linalg.matrix_rank(Vb) == 4
    proj = intersection_projector(U, Vb)
    assert round(np.trace(proj)) == 2
    sched = default_schedule()
    assert sched.values[-1] >= SWEEP_END
    rep = sweep(ops.normal_cone_affine(U, np.zeros(5)), ops.normal_cone_affine(Vb, np.zeros(5)),
                w, sched, SolverConfig(tol=1e-8, max_iter=2_000_000, record_every=10_000))
    assert rep.classification is Classification.FEASIBLE_CONVERGENT
    assert np.linalg.norm(rep.limit_estimate - proj @ w) <= LIMIT_TOL


def test_c3_example_sweep_infeasible():
    v = np.array([0.0, 1.0])
    A, B = ops.scaled_projection([[1.0, 0.0]]), ops.constant_op(-v)
    sched = default_schedule()
    cfg = SolverConfig(tol=1e-8, max_iter=2_000_000, record_every=10_000)
    rep = sweep(A, B, np.zeros(2), sched, cfg, tail_gamma=TAIL_GAMMA)
    assert rep.classification is Classification.INFEASIBLE_DIVERGENT
    assert sum(g >= TAIL_GAMMA for g in rep.gammas) >= 3
    assert abs(rep.growth_rate - np.linalg.norm(v) / 2) <= SLOPE_REL_TOL * np.linalg.norm(v) / 2


def test_c4_path_equivalence():
    rng = np.random.default_rng(4)
    worst, count = 0.0, 0
    for dim in (1, 2, 5, 20):
        inst = catalog_instances(dim, seed=dim)
        names = sorted(inst)
        for _ in range(250):
            a, b = rng.choice(names, 2)
            gamma = rng.uniform(0.01, 0.99)
            lam = rng.uniform(0.05, 1.0)
            p = AacaProblem(inst[a], inst[b], rng.standard_normal(dim), gamma,
                            SolverConfig(lam=lam))
            x = 2 * rng.standard_normal(dim)
            worst = max(worst, np.linalg.norm(aaca_step(p, x) - aaca_step_averaged(p, x)))
            count += 1
    assert count == 1000
    assert worst <= PATH_TOL


def test_c5_average_identity_and_modulus_law():
    rng = np.random.default_rng(5)
    eps = np.finfo(float).eps
    for name, base in catalog_instances(4, seed=11).items():
        for gamma in (0.1, 0.5, 0.9):
            w = rng.standard_normal(4)
            avg = AnchoredAverage(base, gamma, w)
            for x in 2 * rng.standard_normal((20, 4)):
                got = averaged_resolvent(avg, x)
                ref = gamma * base.resolvent(x) + (1 - gamma) * w
                assert np.max(np.abs(got - ref)) <= ROUNDING_ULPS * eps * (1 + np.abs(got).max()), name
            op = averaged_operator(avg)
            assert abs(op.modulus - (base.modulus + 1 - gamma) / gamma) <= MODULUS_TOL
            for _ in range(50):
                x, y = 3 * rng.standard_normal((2, 4))
                d = np.linalg.norm(op.resolvent(x) - op.resolvent(y))
                assert d <= np.linalg.norm(x - y) / (1 + op.modulus) + MODULUS_TOL, name
    # the contraction law is attained along the weakest direction of a linear operator
    for sigma in (0.0, 0.5, 2.0):
        base = ops.linear_monotone(np.diag([sigma, sigma + 1.0, sigma + 2.0, sigma + 5.0]))
        for gamma in (0.1, 0.5, 0.9):
            op = averaged_operator(AnchoredAverage(base, gamma, rng.standard_normal(4)))
            x = rng.standard_normal(4)
            e = np.eye(4)[0]
            ratio = np.linalg.norm(op.resolvent(x + e) - op.resolvent(x))
            assert abs(1 / ratio - 1 - (sigma + 1 - gamma) / gamma) <= MODULUS_TOL


def test_c6_property_suites_and_uniqueness():
    rng = np.random.default_rng(6)
    tol = 1e-10
    for dim in (1, 3, 6):
        for name, op in catalog_instances(dim, seed=dim + 20).items():
            X = 3 * rng.standard_normal((PROPERTY_PAIRS, dim))
            Y = 3 * rng.standard_normal((PROPERTY_PAIRS, dim))
            for x, y in zip(X, Y):
                jx, jy = op.resolvent(x), op.resolvent(y)
                gap = np.dot(x - y, jx - jy) - np.sum((jx - jy) ** 2)
                assert gap >= -10 * tol * max(1.0, np.sum((x - y) ** 2)), name
                if op.is_projection:
                    assert np.linalg.norm(op.resolvent(jx) - jx) <= 10 * tol * max(1.0, np.linalg.norm(x)), name
                if op.single_valued:
                    assert np.linalg.norm(op.resolvent(x + op.forward(x)) - x) <= 10 * tol * max(1.0, np.linalg.norm(x)), name
    for gamma in (0.5, 0.9, 0.99):
        zs = [solve(example_problem(gamma, tol=tol, x0=x0)).z_gamma
              for x0 in 10 * rng.standard_normal((UNIQUE_STARTS, 2))]
        scale = max(1.0, np.linalg.norm(zs[0]))
        for z in zs[1:]:
            assert np.linalg.norm(z - zs[0]) <= 10 * tol * scale


def test_c7_peaceman_rachford(cli_runs):
    pr = solve(example_problem(0.5, lam=1.0))
    dr = solve(example_problem(0.5, lam=0.5))
    print(f"iterations at gamma=0.5: lambda=1 -> {pr.iterations}, lambda=0.5 -> {dr.iterations}")
    assert pr.converged and dr.converged
    assert pr.iterations <= dr.iterations
    for name, (spec, first, _) in cli_runs.items():
        assert spec.lam == 1.0, name
        assert first["rc"] == 0, name
        if spec.mode == "sweep":
            assert set(first["summary"]["statuses"]) == {"converged"}, name
        else:
            assert first["result"]["status"] == "converged", name


def test_c8_product_lift_three_halfspaces():
    normals = np.array([[1.0, 1.0], [-1.0, 0.5], [0.2, -1.0]])
    offsets = np.array([1.0, 0.5, 0.3])
    D, P = product_lift([ops.normal_cone_halfspace(a, b) for a, b in zip(normals, offsets)])
    x0 = np.tile([5.0, -4.0], 3)
    tr = solve_fixed_point(P, D, SolverConfig(lam=0.5, tol=1e-12), x0)
    assert tr.converged
    blocks = tr.shadow.reshape(3, 2)
    assert np.ptp(blocks, axis=0).max() <= MEMBERSHIP_TOL
    y = blocks[0]
    viol = np.maximum(normals @ y - offsets, 0) / np.linalg.norm(normals, axis=1)
    assert viol.max() <= MEMBERSHIP_TOL


# ---------------------------------------------------------------------------
# criterion 9 and the bundled half of criterion 7 share these runs

def _collect(prefix, mode):
    out = {}
    for suffix in ("_trace.csv", "_result.json", "_sweep.csv", "_summary.json"):
        path = prefix.parent / (prefix.name + suffix)
        if path.exists():
            out[suffix] = path.read_bytes()
    out["result"] = json.loads(out["_result.json"])
    if mode == "sweep":
        out["summary"] = json.loads(out["_summary.json"])
    return out


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    specs = {}
    for name in ("example_solve", "example_feasible", "example_infeasible", "subspaces"):
        specs[name] = parse_spec(bundled_spec(name))
    base = specs["example_solve"]
    for gamma in (0.5, 0.99):
        specs[f"example_solve_{gamma}"] = replace(base, gamma=gamma)
    runs = {}
    for name, spec in specs.items():
        path = root / f"{name}.toml"
        path.write_text(serialize_spec(spec))
        outs = []
        for k in (1, 2):
            prefix = root / f"run{k}" / name
            rc = main(["--spec", str(path), "--out", str(prefix), "--quiet"])
            res = _collect(prefix, spec.mode)
            res["rc"] = rc
            outs.append(res)
        runs[name] = (spec, outs[0], outs[1])
    return runs


def test_c9_cli_reproduction(cli_runs):
    for name, (spec, first, second) in cli_runs.items():
        files = [k for k in first if k.startswith("_")]
        assert files, name
        for k in files:
            assert first[k] == second[k], f"{name}{k} differs between runs"

    for name in ("example_solve", "example_solve_0.5", "example_solve_0.99"):
        spec, first, _ = cli_runs[name]
        assert first["rc"] == 0
        z = np.array(first["result"]["z_gamma"])
        assert np.max(np.abs(z - example_closed_form(spec.gamma))) <= EXAMPLE_ABS_TOL

    spec, first, _ = cli_runs["subspaces"]
    assert first["summary"]["classification"] == "FEASIBLE_CONVERGENT"
    proj = intersection_projector(np.array(spec.A.params["basis"]), np.array(spec.B.params["basis"]))
    limit = np.array(first["summary"]["limit_estimate"])
    assert np.linalg.norm(limit - proj @ np.array(spec.w)) <= LIMIT_TOL

    spec, first, _ = cli_runs["example_infeasible"]
    summ = first["summary"]
    assert summ["classification"] == "INFEASIBLE_DIVERGENT"
    v = -np.array(spec.B.params["c"])
    slope = summ["growth_fit"]["slope_vs_inverse_one_minus_gamma"]
    assert abs(slope - np.linalg.norm(v) / 2) <= SLOPE_REL_TOL * np.linalg.norm(v) / 2

    spec, first, _ = cli_runs["example_feasible"]
    assert first["summary"]["classification"] == "FEASIBLE_CONVERGENT"
    assert np.linalg.norm(first["summary"]["limit_estimate"]) <= LIMIT_TOL
