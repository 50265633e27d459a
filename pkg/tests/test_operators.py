import numpy as np
import pytest

from splitkit import operators as ops
from splitkit.operators import reflected_resolvent, resolvent

from _instances import catalog_instances

CATALOG_NAMES = sorted(catalog_instances())


def test_box_resolvent_clamps():
    box = ops.normal_cone_box([0, 0], [1, 1])
    np.testing.assert_array_equal(resolvent(box, [2, -1]), [1, 0])


def test_constant_resolvent():
    B = ops.constant_op([0, -1])
    y = resolvent(B, [3, 3])
    np.testing.assert_allclose(y, [3, 4])
    # forward consistency: y + B y = x
    np.testing.assert_allclose(y + B.forward(y), [3, 3])


def test_projection_operator_resolvent_matches_linear_solve():
    A = ops.scaled_projection([[1, 0]])
    P = np.array([[1.0, 0.0], [0.0, 0.0]])
    x = np.array([2.0, 4.0])
    expected = np.linalg.solve(np.eye(2) + P, x)
    np.testing.assert_allclose(expected, [1, 4])
    np.testing.assert_allclose(resolvent(A, x), expected, atol=1e-15)
    assert A.modulus == 0.0


@pytest.mark.parametrize("op, x, expected", [
    (ops.normal_cone_point([0, 0]), [1, 2], [-1, -2]),
    (ops.zero_operator(2), [1, 2], [1, 2]),
    (ops.normal_cone_box([0, 0], [1, 1]), [2, -1], [0, 1]),
])
def test_reflected_resolvent(op, x, expected):
    np.testing.assert_allclose(reflected_resolvent(op, x), expected)


def test_catalog_examples():
    w = np.array([0.3, -2.0])
    pt = ops.normal_cone_point(w)
    for x in ([5.0, 1.0], [0.0, 0.0]):
        np.testing.assert_array_equal(pt.resolvent(x), w)
    lin = ops.linear_monotone(2 * np.eye(3))
    x = np.array([3.0, -6.0, 1.5])
    np.testing.assert_allclose(lin.resolvent(x), x / 3)
    assert lin.modulus == pytest.approx(2.0)
    hs = ops.normal_cone_halfspace([1, 0], 0)
    np.testing.assert_allclose(hs.resolvent([2, 5]), [0, 5])


def test_moduli():
    M = np.array([[1.0, 3.0], [-3.0, 2.0]])
    assert ops.linear_monotone(M).modulus == pytest.approx(1.0)
    assert ops.prox_quadratic(np.diag([0.5, 4.0]), [0, 0]).modulus == pytest.approx(0.5)
    assert ops.scaled_projection(np.eye(2), scale=3.0).modulus == 3.0
    for op in (ops.normal_cone_ball([0, 0], 1), ops.normal_cone_box([0], [1]),
               ops.prox_l1(1.0, dim=2), ops.constant_op([1, 2])):
        assert op.modulus == 0.0


def test_non_monotone_matrix_rejected_with_eigenvalue():
    with pytest.raises(ValueError, match="smallest eigenvalue .* -1 < 0"):
        ops.linear_monotone([[-1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="smallest eigenvalue"):
        ops.prox_quadratic([[1.0, 0.0], [0.0, -0.5]], [0, 0])


@pytest.mark.parametrize("build", [
    lambda: ops.normal_cone_ball([0, 0], 0.0),
    lambda: ops.normal_cone_ball([0, 0], -1.0),
    lambda: ops.normal_cone_box([0, 2], [1, 1]),
    lambda: ops.normal_cone_halfspace([0, 0], 1.0),
    lambda: ops.prox_quadratic([[1.0, 2.0], [0.0, 1.0]], [0, 0]),
    lambda: ops.prox_l1([-1.0, 1.0]),
    lambda: ops.scaled_projection([[1, 0]], scale=-1),
])
def test_invalid_geometry(build):
    with pytest.raises(ValueError):
        build()


def test_dimension_and_finiteness_errors():
    op = ops.normal_cone_box([0, 0], [1, 1])
    with pytest.raises(ops.DimensionError):
        op.resolvent([1, 2, 3])
    with pytest.raises(ValueError, match="non-finite"):
        op.resolvent([np.nan, 0])
    with pytest.raises(ValueError, match="non-finite"):
        op.reflect([np.inf, 0])
    with pytest.raises(TypeError):
        op.forward([0, 0])


# ---------------------------------------------------------------------------
# properties over the whole catalog

def _pairs(rng, dim, k=120, scale=3.0):
    return scale * rng.standard_normal((k, dim)), scale * rng.standard_normal((k, dim))


@pytest.mark.parametrize("dim", [1, 2, 5])
@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_firmly_nonexpansive(name, dim, rng):
    op = catalog_instances(dim, seed=dim)[name]
    X, Y = _pairs(rng, dim)
    for x, y in zip(X, Y):
        jx, jy = op.resolvent(x), op.resolvent(y)
        lhs = np.sum((jx - jy) ** 2)
        rhs = np.dot(x - y, jx - jy)
        assert lhs <= rhs + 1e-10 * max(1.0, np.sum((x - y) ** 2))


@pytest.mark.parametrize("name", [n for n in CATALOG_NAMES if catalog_instances()[n].single_valued])
def test_forward_consistency(name, rng):
    op = catalog_instances(4, seed=1)[name]
    for y in 3 * rng.standard_normal((100, 4)):
        np.testing.assert_allclose(op.resolvent(y + op.forward(y)), y,
                                   atol=1e-10 * max(1.0, np.linalg.norm(y)))


@pytest.mark.parametrize("name", [n for n in CATALOG_NAMES if catalog_instances()[n].is_projection])
def test_projection_idempotent(name, rng):
    op = catalog_instances(4, seed=2)[name]
    for x in 3 * rng.standard_normal((100, 4)):
        p = op.resolvent(x)
        np.testing.assert_allclose(op.resolvent(p), p, atol=1e-12 * max(1.0, np.linalg.norm(x)))


@pytest.mark.parametrize("name", [n for n in CATALOG_NAMES if catalog_instances()[n].modulus > 0])
def test_modulus_contraction(name, rng):
    op = catalog_instances(3, seed=3)[name]
    X, Y = _pairs(rng, 3)
    for x, y in zip(X, Y):
        d = np.linalg.norm(op.resolvent(x) - op.resolvent(y))
        assert d <= np.linalg.norm(x - y) / (1 + op.modulus) + 1e-12


def test_affine_cone_projects_onto_affine_set(rng):
    basis = rng.standard_normal((2, 4))
    offset = rng.standard_normal(4)
    op = ops.normal_cone_affine(basis, offset)
    x = rng.standard_normal(4)
    p = op.resolvent(x)
    # p - offset lies in span(basis) and x - p is orthogonal to it
    coef, *_ = np.linalg.lstsq(basis.T, p - offset, rcond=None)
    np.testing.assert_allclose(basis.T @ coef, p - offset, atol=1e-12)
    np.testing.assert_allclose(basis @ (x - p), 0, atol=1e-12)
    # empty basis: the point itself
    np.testing.assert_allclose(ops.normal_cone_affine([], offset).resolvent(x), offset)


def test_inclusion_residual():
    hs = ops.normal_cone_halfspace([1, 0], 0)
    # boundary point, outward normal is in the cone, inward is not
    assert ops.inclusion_residual(hs, [0, 3], [2, 0]) == 0.0
    assert ops.inclusion_residual(hs, [0, 3], [-2, 0]) > 0
    lin = ops.linear_monotone(np.eye(2))
    y = np.array([1.0, -2.0])
    assert ops.inclusion_residual(lin, y, lin.forward(y)) < 1e-15
