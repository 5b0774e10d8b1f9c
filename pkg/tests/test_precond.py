"""Skew-part preconditioner: structure identities, Kronecker compression,
diagonalization routes, and the three-step inverse application."""

import numpy as np
import pytest

from sincpint import (
    DegenerateOperatorError,
    ParameterError,
    ShiftSolveError,
    SincParams,
    apply_forward,
    apply_inverse,
    average_operator,
    build_damped_skew,
    build_grid,
    build_integration_matrix,
    diagonalize_time_factor,
    kronecker_nkpa,
    make_shift_solvers,
    nkpa_diagonal,
    shift_solvers_from_operator,
)
from sincpint.precond import DiagonalizedPreconditioner


def _setup(M=2, omega=1.0, dhat=None):
    grid = build_grid(SincParams(T=2.0, M=M))
    imat = build_integration_matrix(grid.m)
    s = build_damped_skew(imat, omega)
    return grid, imat, s, diagonalize_time_factor(s, grid, dhat)


def _with_dense_solvers(core, Kbar):
    solvers = shift_solvers_from_operator(Kbar, core.eigenvalues)
    return core.with_shift_solvers(solvers, kbar_apply=Kbar)


def test_undamped_matrix_is_skew():
    _, imat, s, _ = _setup(M=4)
    assert np.linalg.norm(s.matrix + s.matrix.T) <= 1e-14


def test_undamped_matrix_is_rank_one_shift_of_integration_matrix():
    _, imat, s, _ = _setup(M=4)
    m = imat.m
    expected = imat.dense() - 0.5 * np.ones((m, m))
    assert np.linalg.norm(s.matrix - expected) <= 1e-14


def test_damped_matrix_eigenvalues_in_right_half_plane():
    grid = build_grid(SincParams(T=2.0, M=4))
    imat = build_integration_matrix(9)
    s = build_damped_skew(imat, 0.01)
    assert np.min(np.linalg.eigvals(s.matrix).real) > 0


def test_damping_domain_checked():
    imat = build_integration_matrix(9)
    for omega in (0.0, -0.5, 1.5):
        with pytest.raises(ParameterError):
            build_damped_skew(imat, omega)


def test_average_of_identical_operators():
    K = np.arange(9.0).reshape(3, 3)
    assert np.allclose(average_operator([K] * 5), K)


def test_average_of_scalar_multiples():
    rng = np.random.default_rng(0)
    K = rng.standard_normal((3, 3))
    cs = rng.uniform(0.5, 2.0, 7)
    out = average_operator([c * K for c in cs])
    assert np.allclose(out, np.mean(cs) * K, atol=1e-14)


def test_nkpa_constant_family_gives_ones():
    K = np.diag([1.0, 2.0, 3.0])
    approx = kronecker_nkpa([K] * 5)
    assert np.allclose(approx.dhat, 1.0, atol=1e-14)


def test_nkpa_scalar_family_recovers_ratios():
    rng = np.random.default_rng(1)
    K = rng.standard_normal((4, 4))
    cs = rng.uniform(0.2, 3.0, 9)
    dhat = nkpa_diagonal([c * K for c in cs], average_operator([c * K for c in cs]))
    assert np.max(np.abs(dhat - cs / np.mean(cs))) <= 1e-14


def test_nkpa_minimizes_over_random_diagonals():
    rng = np.random.default_rng(2)
    Ks = [rng.standard_normal((3, 3)) for _ in range(5)]
    kbar = average_operator(Ks)
    dhat = nkpa_diagonal(Ks, kbar)

    def fit(dvals):
        return sum(np.linalg.norm(Ks[j] - dvals[j] * kbar) ** 2 for j in range(5))

    best = fit(dhat)
    for _ in range(100):
        assert best <= fit(dhat + 0.5 * rng.standard_normal(5)) + 1e-12


def test_nkpa_rejects_zero_average():
    with pytest.raises(DegenerateOperatorError):
        nkpa_diagonal([np.zeros((2, 2))], np.zeros((2, 2)))


def test_unitary_route_eigenvalues_purely_imaginary():
    grid, _, _, core = _setup(M=16)
    assert core.mode == "exact_skew"
    scale = np.max(np.abs(core.eigenvalues))
    assert np.max(np.abs(core.eigenvalues.real)) <= 1e-12 * scale
    assert core.recon_residual <= 1e-10
    # V = D^(-1/2) W with W unitary
    W = np.sqrt(grid.d)[:, None] * core.V
    assert np.linalg.norm(W.conj().T @ W - np.eye(grid.m)) <= 1e-12


def test_unitary_route_condition_number_closed_form():
    for M in (16, 32):
        grid = build_grid(SincParams(T=2.0, M=M))
        imat = build_integration_matrix(grid.m)
        core = diagonalize_time_factor(build_damped_skew(imat, 1.0), grid)
        Mh = M * grid.h
        closed = np.exp(Mh / 2) * (1 + np.exp(-Mh)) / 2
        assert abs(core.cond2V - closed) / closed <= 1e-8


def test_general_route_reconstruction_residual():
    _, _, _, core = _setup(M=16, omega=0.01)
    assert core.mode == "general"
    assert core.recon_residual <= 1e-10
    assert np.isfinite(core.cond2V)
    assert np.min(core.eigenvalues.real) > 0


def test_signed_scaling_uses_direct_eigensolve():
    grid = build_grid(SincParams(T=2.0, M=2))
    imat = build_integration_matrix(5)
    s = build_damped_skew(imat, 0.5)
    dhat = np.array([1.0, -0.7, 1.3, 0.4, 2.0])
    core = diagonalize_time_factor(s, grid, dhat)
    assert core.recon_residual <= 1e-10


def test_zero_spatial_operator_gives_identity_preconditioner():
    rng = np.random.default_rng(3)
    _, _, _, core = _setup(M=2)
    pc = core.with_shift_solvers([lambda rhs: rhs] * 5, kbar_apply=np.zeros((4, 4)))
    r = rng.standard_normal(20)
    assert np.linalg.norm(apply_inverse(pc, r) - r) <= 1e-12


def test_apply_inverse_matches_dense_lu():
    rng = np.random.default_rng(4)
    _, _, _, core = _setup(M=2)
    A = rng.standard_normal((4, 4))
    Kbar = -(A @ A.T) - 4 * np.eye(4)
    pc = _with_dense_solvers(core, Kbar)
    r = rng.standard_normal(20)
    dense = np.eye(20) - np.kron(core.time_factor, Kbar)
    expected = np.linalg.solve(dense, r)
    assert np.linalg.norm(apply_inverse(pc, r) - expected) <= 1e-10 * np.linalg.norm(expected)


def test_round_trip_forward_inverse():
    rng = np.random.default_rng(5)
    _, _, _, core = _setup(M=16)
    A = rng.standard_normal((64, 64))
    Kbar = -(A @ A.T) / 64 - np.eye(64)
    pc = _with_dense_solvers(core, Kbar)
    r = rng.standard_normal(33 * 64)
    out = apply_forward(pc, apply_inverse(pc, r))
    assert np.linalg.norm(out - r) <= 1e-9 * np.linalg.norm(r)


def test_rank_one_structure_against_all_at_once():
    # P - A = ((omega/2) e e^T D) (x) K for a constant-coefficient system
    from sincpint import assemble_constant

    rng = np.random.default_rng(6)
    grid = build_grid(SincParams(T=2.0, M=2))
    imat = build_integration_matrix(5)
    K = rng.standard_normal((3, 3))
    sys = assemble_constant(K, grid, None, rng.standard_normal(3))
    for omega in (1.0, 0.3):
        s = build_damped_skew(imat, omega)
        P = np.eye(15) - np.kron(s.matrix * grid.d[None, :], K)
        expected = np.kron((omega / 2) * np.outer(np.ones(5), grid.d), K)
        assert np.linalg.norm(P - sys.dense() - expected) <= 1e-12


def test_shift_order_permutation_invariance():
    rng = np.random.default_rng(7)
    _, _, _, core = _setup(M=4)
    Kbar = -np.diag(rng.uniform(0.5, 3.0, 3))
    pc = _with_dense_solvers(core, Kbar)
    r = rng.standard_normal(27)
    base = apply_inverse(pc, r)

    perm = rng.permutation(9)
    permuted = DiagonalizedPreconditioner(
        V=pc.V[:, perm], Vinv=pc.Vinv[perm, :], eigenvalues=pc.eigenvalues[perm],
        cond2V=pc.cond2V, mode=pc.mode, time_factor=pc.time_factor,
        recon_residual=pc.recon_residual, conj_pairs=None,
        shift_solvers=tuple(pc.shift_solvers[j] for j in perm), kbar_apply=pc.kbar_apply,
    )
    out = apply_inverse(permuted, r)
    assert np.linalg.norm(out - base) <= 1e-13 * np.linalg.norm(base)


def test_conjugate_pair_economy_matches_full():
    rng = np.random.default_rng(8)
    for omega, dhat in ((1.0, None), (0.5, None)):
        grid, imat, s, core = _setup(M=8, omega=omega, dhat=dhat)
        A = rng.standard_normal((6, 6))
        Kbar = -(A @ A.T) - np.eye(6)
        pc = _with_dense_solvers(core, Kbar)
        r = rng.standard_normal(17 * 6)
        full = apply_inverse(pc, r, use_conjugate_pairs=False)
        econ = apply_inverse(pc, r, use_conjugate_pairs=True)
        assert np.linalg.norm(full - econ) <= 1e-12 * np.linalg.norm(full)


def test_threaded_application_matches_serial():
    rng = np.random.default_rng(9)
    _, _, _, core = _setup(M=8)
    Kbar = -np.eye(6) * 2.0
    pc = _with_dense_solvers(core, Kbar)
    r = rng.standard_normal(17 * 6)
    serial = apply_inverse(pc, r)
    threaded = apply_inverse(pc, r, threads=4)
    assert np.array_equal(serial, threaded)


def test_condition_number_growth_with_half_width():
    conds = []
    Ms = [16, 32, 64, 128]
    for M in Ms:
        grid = build_grid(SincParams(T=2.0, M=M))
        imat = build_integration_matrix(grid.m)
        conds.append(diagonalize_time_factor(build_damped_skew(imat, 1.0), grid).cond2V)
    # exp(sqrt(M))-type growth: the log-cond curve is near-linear in sqrt(M)
    x, y = np.sqrt(Ms), np.log(conds)
    fit = np.polyval(np.polyfit(x, y, 1), x)
    assert np.max(np.abs(fit - y) / np.abs(y)) <= 0.20


def test_shift_solver_failure_carries_index_and_shift():
    _, _, _, core = _setup(M=2)

    def bad(rhs):
        raise RuntimeError("backend exploded")

    solvers = [bad] * 5
    pc = core.with_shift_solvers(solvers)
    with pytest.raises(ShiftSolveError) as info:
        apply_inverse(pc, np.ones(10))
    assert info.value.index == 0
    assert info.value.shift == core.eigenvalues[0]


def test_missing_solvers_rejected():
    _, _, _, core = _setup(M=2)
    with pytest.raises(ParameterError):
        apply_inverse(core, np.ones(10))


def test_make_shift_solvers_bind_eigenvalues():
    _, _, _, core = _setup(M=2)
    seen = []

    def shifted(lam, rhs):
        seen.append(lam)
        return rhs

    pc = core.with_shift_solvers(make_shift_solvers(shifted, core.eigenvalues))
    apply_inverse(pc, np.ones(5))
    assert np.allclose(np.sort_complex(np.array(seen)), np.sort_complex(core.eigenvalues))
