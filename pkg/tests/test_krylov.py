import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elastodyn.assembly import BlockSystem
from elastodyn.krylov import (EPS_DIAG, SolverConfig, csr, diag_scale, fgmres, gmres,
                              read_matrix_market, scale_matrix, scaling_vector,
                              write_matrix_market)


def _nonsym(n, rng, shift=4.0):
    return sp.csr_matrix(np.eye(n) * shift + rng.standard_normal((n, n)) / np.sqrt(n))


def test_identity_one_iteration(rng):
    b = rng.standard_normal(20)
    res = gmres(sp.identity(20, format="csr"), b)
    assert res.converged and res.iterations == 1
    assert np.allclose(res.x, b, rtol=1e-14)


def test_diagonal_ten_eigenvalues():
    A = sp.diags(np.arange(1.0, 11.0)).tocsr()
    b = np.ones(10)
    res = gmres(A, b, config=SolverConfig(rtol=1e-12))
    assert res.converged and res.iterations <= 10
    assert np.allclose(res.x, 1.0 / np.arange(1.0, 11.0), rtol=1e-10)


def test_zero_rhs_returns_immediately():
    res = gmres(sp.identity(5), np.zeros(5))
    assert res.converged and res.iterations == 0 and np.all(res.x == 0)


def test_residuals_monotone_and_true(rng):
    A = _nonsym(60, rng, 2.0)
    b = rng.standard_normal(60)
    res = gmres(A, b, config=SolverConfig(restart=60, rtol=1e-10))
    h = np.array(res.residuals)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert res.converged
    assert np.linalg.norm(b - A @ res.x) <= 1e-10 * np.linalg.norm(b) * 1.01
    assert len(h) == res.iterations + 1


def test_restarted_converges(rng):
    A = _nonsym(80, rng, 3.0)
    b = rng.standard_normal(80)
    res = gmres(A, b, config=SolverConfig(restart=5, maxiter=500, rtol=1e-10))
    assert res.converged
    assert np.linalg.norm(b - A @ res.x) <= 1e-10 * np.linalg.norm(b)
    assert len(res.hessenberg) >= 2


def test_maxiter_reached_not_converged(rng):
    A = _nonsym(50, rng, 0.5)
    b = rng.standard_normal(50)
    res = gmres(A, b, config=SolverConfig(maxiter=3, rtol=1e-14))
    assert not res.converged and res.iterations == 3
    res0 = gmres(A, b, config=SolverConfig(maxiter=0))
    assert not res0.converged and np.all(res0.x == 0)


def test_fixed_preconditioner_fgmres_equals_gmres(rng):
    A = _nonsym(40, rng, 3.0)
    M = sp.diags(1.0 / (np.abs(A.diagonal()) + 1.0))
    b = rng.standard_normal(40)
    cfg = SolverConfig(restart=40, rtol=1e-10)
    g = gmres(A, b, M, cfg)
    f = fgmres(A, b, M, cfg)
    assert g.iterations == f.iterations
    assert np.allclose(g.residuals, f.residuals, rtol=1e-10)
    assert np.allclose(g.hessenberg[0], f.hessenberg[0], rtol=1e-10, atol=1e-13)
    assert np.allclose(g.x, f.x, rtol=1e-9)


def test_flexible_with_changing_preconditioner(rng):
    A = _nonsym(60, rng, 3.0)
    d = 1.0 / A.diagonal()
    calls = [0]

    def alternating(r):
        calls[0] += 1
        return d * r if calls[0] % 2 else r.copy()

    b = rng.standard_normal(60)
    res = fgmres(A, b, alternating, SolverConfig(restart=60, rtol=1e-10))
    assert res.converged
    assert np.linalg.norm(b - A @ res.x) <= 1.01e-10 * np.linalg.norm(b)


def test_basis_orthogonality(rng):
    # badly scaled nonnormal matrix to stress the orthogonalization
    n = 80
    A = sp.diags(np.logspace(0, 6, n)) @ _nonsym(n, rng, 1.0)
    b = rng.standard_normal(n)
    res = gmres(A, b, config=SolverConfig(restart=60, maxiter=60, rtol=1e-14), keep_basis=True)
    V = res.basis
    G = V @ V.T
    assert np.abs(G - np.eye(len(V))).max() <= 1e-10


def test_matrix_free_operators(rng):
    A = _nonsym(30, rng)
    b = rng.standard_normal(30)
    ref = np.linalg.solve(A.toarray(), b)
    cfg = SolverConfig(rtol=1e-12)
    for op in (A, lambda x: A @ x, spla.aslinearoperator(A)):
        res = gmres(op, b, config=cfg)
        assert res.converged and np.allclose(res.x, ref, rtol=1e-9)


def test_tuple_unpacking(rng):
    A = _nonsym(10, rng)
    x, its, hist = gmres(A, np.ones(10))
    assert its == len(hist) - 1 and x.shape == (10,)


def test_agrees_with_scipy(rng):
    A = _nonsym(100, rng, 2.5)
    b = rng.standard_normal(100)
    ours = gmres(A, b, config=SolverConfig(restart=30, rtol=1e-10, maxiter=1000))
    ref = spla.spsolve(A.tocsc(), b)
    assert np.linalg.norm(ours.x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(restart=0)
    with pytest.raises(ValueError):
        SolverConfig(rtol=0.0)
    assert SolverConfig().with_(rtol=1e-3).rtol == 1e-3


def test_scaling_vector_examples():
    W = scaling_vector(np.array([4.0, -9.0, 0.0, 1e-20, 1.0]))
    assert np.allclose(W, [0.5, 1 / 3, 1.0, 1.0, 1.0], rtol=1e-15)
    assert scaling_vector(np.array([EPS_DIAG]))[0] == pytest.approx(EPS_DIAG ** -0.5)


def _block_system(rng, n_v=12, n_p=5):
    A = sp.csr_matrix(np.diag(rng.uniform(1, 1e4, n_v)) + 0.1 * rng.standard_normal((n_v, n_v)))
    B = sp.csr_matrix(rng.standard_normal((n_v, n_p)))
    C = sp.csr_matrix(rng.standard_normal((n_p, n_v)))
    D = sp.csr_matrix(np.diag(rng.uniform(1e-6, 1e-3, n_p)))
    return BlockSystem(A, B, C, D, rng.standard_normal(n_v), rng.standard_normal(n_p))


def test_diag_scale_unit_diagonal_and_solution(rng):
    s = _block_system(rng)
    scaled, sc = diag_scale(s)
    assert np.allclose(np.abs(scaled.A.diagonal()), 1.0, rtol=1e-14)
    assert np.allclose(np.abs(scaled.D.diagonal()), 1.0, rtol=1e-14)
    rhs = np.concatenate([s.R_m, s.R_p])
    ref = spla.spsolve(s.full_matrix().tocsc(), rhs)
    xs = spla.spsolve(scaled.full_matrix().tocsc(), np.concatenate([scaled.R_m, scaled.R_p]))
    assert np.allclose(sc.W * xs, ref, rtol=1e-9)
    # W K W is exactly the blockwise product
    W = sp.diags(sc.W)
    assert abs(W @ s.full_matrix() @ W - scaled.full_matrix()).max() <= 1e-14 * abs(
        scaled.full_matrix()).max()


def test_diag_scale_zero_pressure_diagonal(rng):
    s = _block_system(rng)
    s.D = sp.csr_matrix(s.D.shape)
    _, sc = diag_scale(s)
    assert np.all(sc.W_p == 1.0)


def test_scale_matrix():
    M = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 16.0]]))
    S, W = scale_matrix(M)
    assert np.allclose(W, [0.5, 0.25])
    assert np.allclose(S.toarray(), [[1.0, 0.125], [0.125, 1.0]])


def test_matrix_market_round_trip(tmp_path, rng):
    M = sp.random(30, 20, density=0.2, random_state=3, format="csr")
    path = tmp_path / "m.mtx"
    write_matrix_market(path, M, comment="test")
    back = read_matrix_market(path)
    assert back.shape == M.shape
    assert abs(back - M).max() == 0.0


def test_csr_canonical(rng):
    coo = sp.coo_matrix((np.array([1.0, 2.0, 3.0, 4.0]),
                         (np.array([0, 0, 1, 0]), np.array([2, 0, 1, 2]))), shape=(2, 3))
    M = csr(coo)
    assert M.has_sorted_indices and M.nnz == 3
    assert np.allclose(M.toarray(), [[2.0, 0.0, 5.0], [0.0, 3.0, 0.0]])
    x = rng.standard_normal(3)
    assert np.allclose(M @ x, M.toarray() @ x, rtol=1e-15)
