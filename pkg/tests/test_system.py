"""All-at-once operator assembly: Kronecker consistency, flavor
reductions, nonlinear residual and Jacobian."""

import numpy as np
import pytest

from sincpint import (
    ShapeError,
    SincParams,
    assemble_constant,
    assemble_nonlinear,
    assemble_varying,
    build_grid,
)


def _grid(M=2):
    return build_grid(SincParams(T=2.0, M=M))


def test_zero_operator_is_identity_with_initial_rhs():
    grid = _grid()
    r = np.array([1.0, -2.0, 0.5])
    sys = assemble_constant(np.zeros((3, 3)), grid, None, r)
    y = np.arange(15.0)
    assert np.array_equal(sys.apply(y), y)
    assert np.array_equal(sys.rhs, np.tile(r, 5))


def test_zero_data_gives_zero_rhs():
    grid = _grid()
    sys = assemble_constant(np.eye(2), grid, None, np.zeros(2))
    assert np.array_equal(sys.rhs, np.zeros(10))


def test_constant_matches_dense_kronecker_oracle():
    rng = np.random.default_rng(3)
    for M, n in ((2, 3), (4, 4)):
        grid = _grid(M)
        K = rng.standard_normal((n, n))
        sys = assemble_constant(K, grid, lambda t: rng.standard_normal(n),
                                rng.standard_normal(n))
        dense = sys.dense()
        for _ in range(20):
            y = rng.standard_normal(sys.size)
            ref = dense @ y
            assert np.linalg.norm(sys.apply(y) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_varying_matches_dense_blockdiag_oracle():
    rng = np.random.default_rng(4)
    for M, n in ((2, 2), (4, 3)):
        grid = _grid(M)
        Ks = [rng.standard_normal((n, n)) for _ in range(grid.m)]
        sys = assemble_varying(Ks, grid, None, rng.standard_normal(n))
        dense = sys.dense()
        for _ in range(20):
            y = rng.standard_normal(sys.size)
            ref = dense @ y
            assert np.linalg.norm(sys.apply(y) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_varying_reduces_to_constant():
    rng = np.random.default_rng(5)
    grid = _grid()
    K = rng.standard_normal((3, 3))
    g = lambda t: np.array([t, 1.0, np.sin(t)])  # noqa: E731
    r = rng.standard_normal(3)
    ca = assemble_constant(K, grid, g, r)
    va = assemble_varying([K] * 5, grid, g, r)
    for _ in range(5):
        y = rng.standard_normal(15)
        assert np.linalg.norm(ca.apply(y) - va.apply(y)) <= 1e-13 * np.linalg.norm(y)
    assert np.array_equal(ca.rhs, va.rhs)


def test_zero_varying_operators_identity():
    grid = _grid()
    sys = assemble_varying([np.zeros((2, 2))] * 5, grid, None, np.zeros(2))
    y = np.arange(10.0)
    assert np.array_equal(sys.apply(y), y)


def test_linearity_of_application():
    rng = np.random.default_rng(6)
    grid = _grid()
    sys = assemble_constant(rng.standard_normal((4, 4)), grid, None, rng.standard_normal(4))
    x, y = rng.standard_normal(20), rng.standard_normal(20)
    a, b = 1.7, -0.3
    lhs = sys.apply(a * x + b * y)
    rhs = a * sys.apply(x) + b * sys.apply(y)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(lhs), 1.0)


def test_operator_count_mismatch():
    grid = _grid()
    with pytest.raises(ShapeError):
        assemble_varying([np.eye(2)] * 4, grid, None, np.zeros(2))


def test_vector_shape_checked():
    grid = _grid()
    sys = assemble_constant(np.eye(2), grid, None, np.zeros(2))
    with pytest.raises(ShapeError):
        sys.apply(np.zeros(11))


def test_nonlinear_linear_reduction():
    rng = np.random.default_rng(7)
    grid = _grid()
    K = rng.standard_normal((3, 3))
    g = lambda t: np.array([1.0, t, 0.0])  # noqa: E731
    r = rng.standard_normal(3)
    lin = assemble_constant(K, grid, g, r)
    nl = assemble_nonlinear(lambda t, y: K @ y, lambda t, y: K, grid, g, r)
    for _ in range(5):
        y = rng.standard_normal(15)
        ref = lin.apply(y) - lin.rhs
        assert np.linalg.norm(nl.residual(y) - ref) <= 1e-13 * max(np.linalg.norm(ref), 1.0)


def test_nonlinear_zero_map_residual():
    grid = _grid()
    r = np.ones(2)
    sys = assemble_nonlinear(lambda t, y: np.zeros(2), lambda t, y: np.zeros((2, 2)),
                             grid, None, r)
    assert np.array_equal(sys.residual(sys.rhs), np.zeros(10))


def test_nonlinear_residual_at_solved_linear_instance():
    rng = np.random.default_rng(8)
    grid = _grid()
    K = -np.eye(3) - 0.1 * rng.standard_normal((3, 3))
    lin = assemble_constant(K, grid, None, rng.standard_normal(3))
    y = np.linalg.solve(lin.dense(), lin.rhs)
    nl = assemble_nonlinear(lambda t, v: K @ v, lambda t, v: K, grid, None, lin.initial_state)
    assert np.linalg.norm(nl.residual(y)) <= 1e-10 * np.linalg.norm(lin.rhs)


def test_jacobian_blocks_of_cubic_map():
    rng = np.random.default_rng(9)
    grid = _grid()
    q = lambda t, y: y - y**3  # noqa: E731
    dq = lambda t, y: np.diag(1.0 - 3.0 * y**2)  # noqa: E731
    sys = assemble_nonlinear(q, dq, grid, None, np.zeros(3))
    y = rng.standard_normal(15)
    jac = sys.jacobian(y)
    panel = y.reshape(5, 3)
    for block, row in zip(jac.k_ops, panel):
        assert np.allclose(np.diag(block), 1.0 - 3.0 * row**2)


def test_jacobian_directional_derivative_order():
    rng = np.random.default_rng(10)
    grid = _grid(M=4)  # m = 9
    n = 8
    A = rng.standard_normal((n, n))
    q = lambda t, y: A @ np.tanh(y) + t * y  # noqa: E731
    dq = lambda t, y: A @ np.diag(1.0 / np.cosh(y) ** 2) + t * np.eye(n)  # noqa: E731
    sys = assemble_nonlinear(q, dq, grid, None, np.zeros(n))
    y = rng.standard_normal(sys.size)
    v = rng.standard_normal(sys.size)
    jac = sys.jacobian(y)
    jv = jac.apply(v)
    errs = []
    for eps in (1e-4, 1e-5):
        fd = (sys.residual(y + eps * v) - sys.residual(y - eps * v)) / (2 * eps)
        errs.append(np.linalg.norm(fd - jv))
    order = np.log10(errs[0] / errs[1])
    assert order >= 1.9


def test_linear_map_jacobian_independent_of_state():
    rng = np.random.default_rng(11)
    grid = _grid()
    K = rng.standard_normal((2, 2))
    sys = assemble_nonlinear(lambda t, y: K @ y, lambda t, y: K, grid, None, np.zeros(2))
    j1 = sys.jacobian(rng.standard_normal(10))
    j2 = sys.jacobian(rng.standard_normal(10))
    for a, b in zip(j1.k_ops, j2.k_ops):
        assert np.array_equal(a, b)
