"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal."""

import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elastodyn.assembly import Assembler, LinearRamp, Loads
from elastodyn.driver import (AXIAL_DEG, CIRCUMFERENTIAL_DEG, BenchmarkConfig,
                              first_newton_system, run_benchmark, run_tensile_test,
                              tensile_defaults)
from elastodyn.krylov import SolverConfig, diag_scale, fgmres, gmres
from elastodyn.materials import GOH, KPA, MPA, NEO_HOOKEAN, Material, MaterialParams
from elastodyn.mesh import generate_cube_mesh
from elastodyn.precond import ILU0, Jacobi, NestedConfig, SchurOperator, make_solver
from elastodyn.timeint import (NonlinearConfig, factored_tangent,
                               gen_alpha_params, kinematic_residual, newton_step, predict,
                               solve_step, stage_state)

from conftest import CUBE_DIRICHLET, random_state


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- 1. tangent consistency ----------------------------------------------------
def _cube(model):
    if model == NEO_HOOKEAN:
        mat, load = Material(MaterialParams(), NEO_HOOKEAN), 320 * MPA
    else:
        params = MaterialParams.from_fiber_angle(CIRCUMFERENTIAL_DEG, mu=7.64e4, kappa=None,
                                                 k1=996.6 * KPA, k2=524.6, kd=0.226)
        mat, load = Material(params, GOH), 7.64e4
    loads = Loads(tractions={"top-loaded-quarter": [0.0, 0.0, -load]}, ramp=LinearRamp(1e-2),
                  dirichlet=dict(CUBE_DIRICHLET))
    return Assembler(generate_cube_mesh(2), mat, loads), load


def _taylor_remainders(model, eps_list):
    """||F(z + eps d) - F(z) - eps K d|| for the stage residual map of one step."""
    asm, load = _cube(model)
    rng = np.random.default_rng(7)
    ga = gen_alpha_params(0.5, 1e-3)
    fv, n = asm.free_v, asm.n_nodes
    y_n = asm.zero_state()
    scale_u = 1e-3 if model == NEO_HOOKEAN else 3e-3
    y_n.u[fv] = scale_u * rng.standard_normal(len(fv))
    y_n.v[fv] = rng.standard_normal(len(fv))
    y_n.p[:] = 0.1 * load * rng.standard_normal(n)
    y = predict(y_n, ga.gamma)
    stage = stage_state(y_n, y, ga)
    L, U = factored_tangent(asm.tangent(stage, 1e-3, ga.dt, ga.alpha_m, ga.alpha_f, ga.gamma), ga)
    K = L @ U
    nv = len(fv)
    gdt = ga.gamma * ga.dt

    def F(z):
        yy = y.copy()
        du, dp, dv = z[:nv], z[nv:nv + n], z[nv + n:]
        yy.du[fv] += du
        yy.dp += dp
        yy.dv[fv] += dv
        yy.u[fv] += gdt * du
        yy.p += gdt * dp
        yy.v[fv] += gdt * dv
        s = stage_state(y_n, yy, ga)
        R_m, R_p = asm.residuals(s, 1e-3)
        return np.concatenate([kinematic_residual(s, fv), R_p, R_m])

    d = np.concatenate([scale_u / ga.dt * rng.standard_normal(nv),
                        load / ga.dt * rng.standard_normal(n),
                        rng.standard_normal(nv) / ga.dt])
    F0, Kd = F(np.zeros_like(d)), K @ d
    return [np.linalg.norm(F(e * d) - F0 - e * Kd) for e in eps_list]


def _newton_ratios(model):
    asm, _ = _cube(model)
    ga = gen_alpha_params(0.5, 1e-3)
    cfg = NonlinearConfig(tol_R=1e-12, tol_A=1e-30, l_max=8)
    y = asm.zero_state()
    ratios = []
    for k in range(3):
        y, st = solve_step(asm, y, k * ga.dt, ga, make_solver("direct"), cfg, step=k + 1)
        r = np.array(st.residuals) / st.residuals[0]
        # ratios above the round-off floor
        ratios += [r[i + 1] / r[i] ** 2 for i in range(1, len(r) - 1) if r[i + 1] > 1e-10]
    return ratios


def test_criterion_1_tangent_consistency(capsys):
    t0 = time.perf_counter()
    eps = [1e-3, 1e-4, 1e-5]
    lines, ok = [], True
    for model in (NEO_HOOKEAN, GOH):
        e = _taylor_remainders(model, eps)
        slopes = [np.log10(e[i] / e[i + 1]) for i in range(2)]
        ratios = _newton_ratios(model)
        ok &= min(slopes) >= 1.8 and len(ratios) >= 2 and max(ratios) <= 10.0
        lines.append(f"{model}: slopes {slopes[0]:.2f},{slopes[1]:.2f} "
                     f"max |R+|/|R|^2 {max(ratios):.2g}")
    wall = time.perf_counter() - t0
    ok &= wall < 10.0
    report(capsys, 1, ok, "; ".join(lines) + f"; {wall:.1f}s")
    assert ok


# -- 2. exact SCR converges in a few outer iterations ----------------------------
def test_criterion_2_exact_scr(capsys):
    t0 = time.perf_counter()
    exact = dict(A_rtol=1e-12, S_rtol=1e-12, I_rtol=1e-12, outer_rtol=1e-8,
                 A_maxiter=500, S_maxiter=500, I_maxiter=500)
    cases = {"cube": BenchmarkConfig(n=5, **exact),
             "tensile": tensile_defaults(dt=2.0, **exact)}
    counts, ok = {}, True
    for name, cfg in cases.items():
        system, _ = first_newton_system(cfg)
        _, _, st = make_solver("nested", cfg.nested_config())(system)
        counts[name] = (st.n, system.n_v + system.n_p)
        ok &= st.converged and st.n <= 3
    wall = time.perf_counter() - t0
    ok &= wall < 60.0
    report(capsys, 2, ok, ", ".join(f"{k}: n={v[0]} ({v[1]} dofs)" for k, v in counts.items())
           + f"; {wall:.1f}s")
    assert ok


# -- 3. matrix-free Schur action ---------------------------------------------------
def test_criterion_3_schur_fidelity(capsys):
    worst, ok = 0.0, True
    systems = [first_newton_system(BenchmarkConfig(n=2))[0],
               first_newton_system(tensile_defaults(nx=4, ny=2, nz=1))[0],
               first_newton_system(tensile_defaults(nx=4, ny=2, nz=1, dt=2.0))[0]]
    x_rng = np.random.default_rng(0)
    for system in systems:
        s, _ = diag_scale(system)
        assert s.n_v + s.n_p <= 200
        x = x_rng.standard_normal(s.n_p)
        for tol in (1e-4, 1e-6, 1e-8, 1e-10):
            op = SchurOperator(s, SolverConfig(rtol=tol, maxiter=500))
            ref = op.dense() @ x
            err = np.linalg.norm(op.matvec(x) - ref) / np.linalg.norm(ref)
            worst = max(worst, err / tol)
            ok &= err <= 10.0 * tol
    report(capsys, 3, ok, f"max error / inner tolerance = {worst:.2g} (limit 10)")
    assert ok


# -- 4. block factorization and two-stage solve -----------------------------------
def test_criterion_4_factorization(capsys, tet_asm):
    rng = np.random.default_rng(11)
    ga = gen_alpha_params(0.5, dt=1e-3)
    y_n = random_state(4, rng, u=1e-3, p=1e3, v=0.1, du=0.1, dp=1e3, dv=1.0)
    y = predict(y_n, ga.gamma)
    y.u += 1e-4 * rng.standard_normal(12)
    stage = stage_state(y_n, y, ga)
    system = tet_asm.tangent(stage, 0.0, ga.dt, ga.alpha_m, ga.alpha_f, ga.gamma)
    d = tet_asm.derivative_blocks(stage)
    am, c1 = ga.alpha_m, ga.alpha_f * ga.gamma * ga.dt
    n_v, n_p = system.n_v, system.n_p
    K = np.block([
        [am * np.eye(n_v), np.zeros((n_v, n_p)), -c1 * np.eye(n_v)],
        [c1 * d["p_u"].toarray(), (am * d["p_dp"] + c1 * d["p_p"]).toarray(),
         (am * d["p_dv"] + c1 * d["p_v"]).toarray()],
        [c1 * d["m_u"].toarray(), c1 * d["m_p"].toarray(), am * d["m_dv"].toarray()]])
    L, U = factored_tangent(system, ga)
    e_fact = np.abs((L @ U).toarray() - K).max() / np.abs(K).max()
    R_k = kinematic_residual(stage, tet_asm.free_v)
    ref = np.linalg.solve(K, -np.concatenate([R_k, system.R_p, system.R_m]))
    d_dv, d_dp, d_du, _ = newton_step(y_n, y.copy(), system, R_k, ga, make_solver("direct"),
                                      tet_asm.free_v)
    e_solve = np.linalg.norm(np.concatenate([d_du, d_dp, d_dv]) - ref) / np.linalg.norm(ref)
    ok = e_fact <= 1e-12 and e_solve <= 1e-10
    report(capsys, 4, ok, f"factor error {e_fact:.1e}, two-stage error {e_solve:.1e}")
    assert ok


# -- 5. inner tolerance trend -------------------------------------------------------
def test_criterion_5_inner_tolerance(capsys):
    system, _ = first_newton_system(BenchmarkConfig(n=5))
    deltas = [1e0, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
    ns = []
    for dI in deltas:
        _, _, st = make_solver("nested", NestedConfig.uniform(1e-6, dI))(system)
        assert st.converged
        ns.append(st.n)
    ratio = ns[0] / ns[deltas.index(1e-6)]
    ok = all(a >= b for a, b in zip(ns, ns[1:])) and ratio >= 3.0
    report(capsys, 5, ok, f"n over delta_I 1e0..1e-10 = {ns}, ratio {ratio:.1f}")
    assert ok


# -- 6. material robustness -----------------------------------------------------------
def test_criterion_6_material_sweep(capsys):
    nus, etas = [0.0, 0.3, 0.4999], [1e-2, 1.0, 1e2]
    table, ok = {}, True
    for eta in etas:
        for nu in nus:
            cfg = BenchmarkConfig(n=8, n_steps=2, nu=nu, eta=eta, load=320 * MPA * eta,
                                  A_rtol=1e-6, S_rtol=1e-6, I_rtol=1e-4)
            res = run_benchmark(cfg)
            s = res.summary()
            table[eta, nu] = s
            ok &= res.ok and max(it.n for st in res.stats for it in st.iterations) <= 4
        nS = [table[eta, nu]["n_S"] for nu in nus]
        ok &= all(a <= b for a, b in zip(nS, nS[1:]))
    rows = "; ".join(f"eta={eta:g}: n_S " + ",".join(f"{table[eta, nu]['n_S']:.1f}" for nu in nus)
                     for eta in etas)
    n_max = max(t["n"] for t in table.values())
    report(capsys, 6, ok, f"mean n <= {n_max:.2f}; {rows}")
    assert ok


# -- 7. preconditioner ordering ---------------------------------------------------------
def test_criterion_7_preconditioner_ordering(capsys):
    cfg = tensile_defaults(dt=2.0, outer_maxiter=300, A_rtol=1e-6, S_rtol=1e-6, I_rtol=1e-6)
    system, _ = first_newton_system(cfg)
    st = {name: make_solver(name, cfg.nested_config())(system)[2]
          for name in ("nested", "simple", "ilu")}
    n = {k: v.n for k, v in st.items()}
    ilu_ok = (not st["ilu"].converged) or n["ilu"] >= 10 * max(n["nested"], n["simple"])
    ok = st["nested"].converged and st["simple"].converged and n["nested"] < n["simple"] and ilu_ok
    ilu = f"{n['ilu']}" + ("" if st["ilu"].converged else " (NC)")
    report(capsys, 7, ok, f"nested {n['nested']}, SIMPLE {n['simple']}, ILU0 {ilu}")
    assert ok


# -- 8. generalized-alpha self-convergence ------------------------------------------------
def test_criterion_8_time_accuracy(capsys):
    T, us = 4e-3, []
    for dt in (1e-3, 5e-4, 2.5e-4):
        cfg = BenchmarkConfig(n=2, dt=dt, n_steps=int(round(T / dt)), t_ramp=1e-2, load=32e7,
                              solver="direct", tol_R=1e-12, tol_A=1e-20)
        res = run_benchmark(cfg)
        assert res.ok
        us.append(res.final_state.u)
    order = np.log2(np.linalg.norm(us[0] - us[1]) / np.linalg.norm(us[1] - us[2]))
    ok = order >= 1.9
    report(capsys, 8, ok, f"observed order {order:.2f}")
    assert ok


# -- 9. tensile physics --------------------------------------------------------------------
def _displacement_at(load_fraction, **kw):
    res = run_tensile_test(tensile_defaults(nx=8, ny=3, nz=1, solver="direct", **kw))
    assert res.ok, res.message
    curve = res.load_curve
    loads = np.array([c["load"] for c in curve]) / res.config.load
    disp = np.array([c["displacement"] for c in curve])
    return float(np.interp(load_fraction, loads, disp))


def test_criterion_9_tensile_orderings(capsys):
    d = {(phi, kd): _displacement_at(0.5, phi=phi, kd=kd)
         for phi in (CIRCUMFERENTIAL_DEG, AXIAL_DEG) for kd in (0.0, 0.226)}
    axial_first = all(d[AXIAL_DEG, kd] < d[CIRCUMFERENTIAL_DEG, kd] for kd in (0.0, 0.226))
    kd_further = all(d[phi, 0.0] > d[phi, 0.226] for phi in (CIRCUMFERENTIAL_DEG, AXIAL_DEG))
    ok = axial_first and kd_further
    detail = ", ".join(f"phi={phi:g} kd={kd:g}: {v:.4f}" for (phi, kd), v in d.items())
    report(capsys, 9, ok, f"displacement at half load (cm): {detail}")
    assert ok


# -- 10. Krylov correctness -----------------------------------------------------------------
def test_criterion_10_krylov_random(capsys):
    rng = np.random.default_rng(2024)
    worst, failures = 0.0, 0
    for k in range(100):
        n = int(rng.integers(5, 101))
        dense = rng.standard_normal((n, n)) / np.sqrt(n) + np.diag(rng.uniform(2.0, 4.0, n))
        if k % 3 == 0:
            dense[np.abs(dense) < 0.5] = 0.0
            dense += np.diag(rng.uniform(1.0, 2.0, n))
        A = sp.csr_matrix(dense)
        b = rng.standard_normal(n)
        rtol = 10.0 ** -rng.integers(6, 12)
        cfg = SolverConfig(restart=int(rng.integers(5, 60)), maxiter=2000, rtol=rtol)
        op = [A, lambda x, A=A: A @ x, spla.aslinearoperator(A)][k % 3]
        prec = [None, Jacobi(A), ILU0(A)][(k // 3) % 3]
        solve = gmres if k % 2 else fgmres
        res = solve(op, b, prec, cfg)
        x_ref = np.linalg.solve(dense, b)
        r_rel = np.linalg.norm(b - A @ res.x) / np.linalg.norm(b)
        e_rel = np.linalg.norm(res.x - x_ref) / np.linalg.norm(x_ref)
        bound = rtol * np.linalg.cond(dense)
        worst = max(worst, r_rel / rtol)
        if not (res.converged and r_rel <= rtol * (1 + 1e-6) and e_rel <= bound):
            failures += 1
    ok = failures == 0
    report(capsys, 10, ok, f"100 systems, {failures} failures, max residual/rtol {worst:.2f}")
    assert ok
