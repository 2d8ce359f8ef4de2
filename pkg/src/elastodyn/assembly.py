"""VMS residuals and consistent tangent blocks on linear tetrahedra.

All integrals are evaluated on the referential configuration.  Nodal
vectors are laid out as ``3 * node + component`` for displacement and
velocity and ``node`` for pressure.  Returned block systems are restricted
to free (non-Dirichlet) velocity components; pressure carries no Dirichlet
conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .materials import Material
from .mesh import BoundaryTag, Mesh


def _es(*operands):
    return np.einsum(*operands, optimize=True)


# 4-point degree-2 rule on the reference tet
_QA = 0.5854101966249685
_QB = 0.1381966011250105
N_QP = (np.full((4, 4), _QB) + np.eye(4) * (_QA - _QB))  # N_QP[q, A]
_DN_REF = np.array([[-1.0, -1.0, -1.0],
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, 0.0, 1.0]])


@dataclass
class State:
    """Nodal unknowns y = (u, p, v) and their rates."""

    u: np.ndarray
    p: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dp: np.ndarray
    dv: np.ndarray

    @classmethod
    def zeros(cls, n_nodes: int) -> "State":
        z3 = np.zeros(3 * n_nodes)
        z1 = np.zeros(n_nodes)
        return cls(z3.copy(), z1.copy(), z3.copy(), z3.copy(), z1.copy(), z3.copy())

    def copy(self) -> "State":
        return State(*(a.copy() for a in self.values() + self.rates()))

    def values(self):
        return [self.u, self.p, self.v]

    def rates(self):
        return [self.du, self.dp, self.dv]


@dataclass
class StabilizationParams:
    c_m: float
    tau: np.ndarray


def compute_tau(mesh: Mesh, material: Material, c_m: float = 1e-3) -> StabilizationParams:
    """tau_M^e = c_m h^e / (c rho0) with the referential element diameter."""
    c = material.wave_speed()
    rho = material.params.rho0
    if c <= 0 or rho <= 0:
        raise ValueError("wave speed and density must be positive")
    return StabilizationParams(c_m, c_m * mesh.element_diameters / (c * rho))


class LinearRamp:
    """Load factor t / t_ramp, held at 1 after t_ramp."""

    def __init__(self, t_ramp: float):
        self.t_ramp = float(t_ramp)

    def __call__(self, t: float) -> float:
        return min(t / self.t_ramp, 1.0)

    def __repr__(self):
        return f"LinearRamp({self.t_ramp})"


def _unit_ramp(t: float) -> float:
    return 1.0


@dataclass
class Loads:
    """Body force (cm/s^2), dead tractions per tag (dyn/cm^2) and supports.

    ``dirichlet`` maps a boundary tag to the displacement components held
    at zero on that face.
    """

    body_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tractions: dict = field(default_factory=dict)
    ramp: Callable[[float], float] = _unit_ramp
    dirichlet: dict = field(default_factory=dict)


@dataclass
class BlockSystem:
    """Reduced 2x2 tangent [[A, B], [C, D]] with residuals on free DOFs.

    ``Kmu`` and ``Kpu`` are the displacement-rate columns of the full
    tangent; they enter the right-hand side whenever the kinematic residual
    is nonzero.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    R_m: np.ndarray
    R_p: np.ndarray
    Kmu: sp.csr_matrix | None = None
    Kpu: sp.csr_matrix | None = None
    v_dofs: np.ndarray | None = None  # global index of each velocity row
    near_kernel: np.ndarray | None = None  # low-energy modes of A, one per column

    @property
    def n_v(self) -> int:
        return self.A.shape[0]

    @property
    def n_p(self) -> int:
        return self.D.shape[0]

    def full_matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, self.B], [self.C, self.D]], format="csr")


def near_kernel(x: np.ndarray, dofs: np.ndarray) -> np.ndarray:
    """Rigid-body modes plus uniform dilatation about the centroid, on ``dofs``.

    Without a bulk term the deviatoric stiffness leaves dilatation almost
    free, so it is added to the rigid-body set given to AMG.
    """
    x = x - x.mean(axis=0)
    node, comp = dofs // 3, dofs % 3
    xd = x[node]
    rows = np.arange(len(dofs))
    cols = []
    for i in range(3):
        cols.append((comp == i).astype(float))
    for i in range(3):
        w = np.zeros(3)
        w[i] = 1.0
        cols.append(np.cross(w, xd)[rows, comp])
    cols.append(xd[rows, comp])
    return np.column_stack(cols)


class Assembler:
    """Element loops for one mesh/material/load configuration."""

    def __init__(self, mesh: Mesh, material: Material, loads: Loads | None = None,
                 c_m: float = 1e-3, stab: StabilizationParams | None = None):
        self.mesh = mesh
        self.material = material
        self.loads = loads if loads is not None else Loads()
        self.stab = stab if stab is not None else compute_tau(mesh, material, c_m)

        X = mesh.nodes[mesh.tets]
        jac = np.transpose(X[:, 1:] - X[:, :1], (0, 2, 1))  # dX_I / dxi_k
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            raise ValueError("mesh contains non-positively oriented elements")
        self.vol = det / 6.0
        self.grad = _es("Ak,ekI->eAI", _DN_REF, np.linalg.inv(jac))
        self.w = self.vol / 4.0

        tets = mesh.tets
        self.vdofs = (3 * tets[:, :, None] + np.arange(3)).reshape(len(tets), 12)
        self.pdofs = tets

        n3 = 3 * mesh.n_nodes
        fixed = np.zeros(n3, dtype=bool)
        for tag, comps in self.loads.dirichlet.items():
            nodes = mesh.nodes_on(tag)
            for c in comps:
                fixed[3 * nodes + c] = True
        self.fixed = fixed
        self.free_v = np.flatnonzero(~fixed)

        self._traction_facets = {
            BoundaryTag(tag).value: mesh.facets_with(tag) for tag in self.loads.tractions
        }

    # -- helpers ---------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    def zero_state(self) -> State:
        return State.zeros(self.n_nodes)

    def _fields(self, s: State, hessian: bool = True):
        tets = self.mesh.tets
        ue = s.u.reshape(-1, 3)[tets]
        ve = s.v.reshape(-1, 3)[tets]
        F = np.eye(3) + _es("eAi,eAI->eiI", ue, self.grad)
        kin, st = self.material.stress(F, hessian)
        Finv, J = kin.Finv, kin.J
        dNx = _es("eAI,eIi->eAi", self.grad, Finv)
        Lv = _es("eAi,eAj->eij", ve, dNx)
        divv = _es("eii->e", Lv)
        pe = s.p[tets]
        pq = pe @ N_QP.T
        px = _es("eA,eAi->ei", pe, dNx)
        dpq = s.dp[tets] @ N_QP.T
        dvq = _es("qA,eAi->eqi", N_QP, s.dv.reshape(-1, 3)[tets])
        rho, beta, drho, dbeta = self.material.volumetric(pq)
        acc = dvq - np.asarray(self.loads.body_force, dtype=float)
        return dict(F=F, J=J, Finv=Finv, P=st.Ptilde, Aiso=st.Aiso, dNx=dNx, Lv=Lv,
                    divv=divv, pq=pq, px=px, dpq=dpq, acc=acc, rho=rho, beta=beta,
                    drho=drho, dbeta=dbeta)

    def traction_vector(self, t: float) -> np.ndarray:
        f = np.zeros(3 * self.n_nodes)
        scale = self.loads.ramp(t)
        for tag, h in self.loads.tractions.items():
            facets = self._traction_facets[BoundaryTag(tag).value]
            if len(facets) == 0:
                continue
            area = self.mesh.facet_areas(facets)
            contrib = (area / 3.0)[:, None, None] * (scale * np.asarray(h, dtype=float))
            contrib = np.broadcast_to(contrib, (len(facets), 3, 3))
            idx = 3 * facets[:, :, None] + np.arange(3)
            np.add.at(f, idx.ravel(), contrib.ravel())
        return f

    # -- residuals -------------------------------------------------------
    def residuals_full(self, s: State, t: float = 0.0):
        """R_m (all 3n components) and R_p at the given stage state."""
        f = self._fields(s, hessian=False)
        J, w, vol, tau = f["J"], self.w, self.vol, self.stab.tau
        dNx, acc, rho = f["dNx"], f["acc"], f["rho"]
        wJ = w * J

        # momentum
        inertia = _es("e,eq,eqi,qA->eAi", wJ, rho, acc, N_QP)
        stress = vol[:, None, None] * _es("eiI,eAI->eAi", f["P"], self.grad)
        pint = (wJ * f["pq"].sum(axis=1))
        press = pint[:, None, None] * dNx
        Rm_e = inertia + stress - press
        R_m = np.zeros(3 * self.n_nodes)
        np.add.at(R_m, self.vdofs.ravel(), Rm_e.ravel())
        R_m -= self.traction_vector(t)

        # mass
        mass = _es("e,qA,eq->eA", wJ, N_QP,
                         f["beta"] * f["dpq"] + f["divv"][:, None])
        g = rho[..., None] * acc + f["px"][:, None, :]
        stab = _es("e,eAi,eqi->eA", tau * wJ, dNx, g)
        Rp_e = mass + stab
        R_p = np.zeros(self.n_nodes)
        np.add.at(R_p, self.pdofs.ravel(), Rp_e.ravel())
        return R_m, R_p

    def residuals(self, s: State, t: float = 0.0):
        R_m, R_p = self.residuals_full(s, t)
        return R_m[self.free_v], R_p

    # -- tangent pieces ----------------------------------------------------
    def derivative_blocks(self, s: State):
        """Partial derivatives of (R_m, R_p) w.r.t. each field, full size.

        Keys: ``m_dv, m_u, m_p, p_dp, p_p, p_dv, p_v, p_u``.
        """
        f = self._fields(s)
        E = self.mesh.n_elements
        J, w, vol, tau = f["J"], self.w, self.vol, self.stab.tau
        dNx, acc, rho, drho = f["dNx"], f["acc"], f["rho"], f["drho"]
        wJ = w * J
        NN = _es("qA,qB->qAB", N_QP, N_QP)
        eye3 = np.eye(3)

        mvv = _es("e,eq,qAB->eAB", wJ, rho, NN)
        m_dv = _es("eAB,ij->eAiBj", mvv, eye3)

        pint = wJ * f["pq"].sum(axis=1)
        m_u = (vol[:, None, None, None, None]
               * _es("eAI,eiIjJ,eBJ->eAiBj", self.grad, f["Aiso"], self.grad)
               + pint[:, None, None, None, None]
               * (_es("eAj,eBi->eAiBj", dNx, dNx) - _es("eAi,eBj->eAiBj", dNx, dNx))
               + _es("e,eq,eqi,qA,eBj->eAiBj", wJ, rho, acc, N_QP, dNx))

        m_p = (_es("e,eq,eqi,qAB->eAiB", wJ, drho, acc, NN)
               - _es("e,eAi->eAi", wJ, dNx)[..., None] * np.ones(4))

        p_dp = _es("e,eq,qAB->eAB", wJ, f["beta"], NN)
        tJ = tau * J
        p_p = (_es("e,eq,qAB->eAB", wJ, f["dbeta"] * f["dpq"], NN)
               + _es("e,eAi,eBi->eAB", tJ * vol, dNx, dNx)
               + _es("e,eq,eqi,eAi,qB->eAB", tJ * w, drho, acc, dNx, N_QP))

        p_dv = _es("e,eAj,eq,qB->eABj", tJ * w, dNx, rho, N_QP)
        p_v = _es("e,eBj->eBj", wJ, dNx)[:, None, :, :] * np.ones((1, 4, 1, 1))

        g = rho[..., None] * acc + f["px"][:, None, :]
        gsum = _es("e,eqi->ei", tJ * w, g)
        divv, Lv, px = f["divv"], f["Lv"], f["px"]
        bdp = _es("e,eq,qA->eA", wJ, f["beta"] * f["dpq"], N_QP)
        p_u = (_es("eA,eBj->eABj", bdp, dNx)
               + wJ[:, None, None, None]
               * (_es("e,eBj->eBj", divv, dNx) - _es("eij,eBi->eBj", Lv, dNx))[:, None]
               + _es("ei,eAi,eBj->eABj", gsum, dNx, dNx)
               - _es("ei,eAj,eBi->eABj", gsum, dNx, dNx)
               - _es("e,eAi,ej,eBi->eABj", tJ * vol, dNx, px, dNx))

        n3, n1 = 3 * self.n_nodes, self.n_nodes
        vd, pd = self.vdofs, self.pdofs

        def coo(vals, rows, cols, shape):
            r = np.broadcast_to(rows[:, :, None], (E, rows.shape[1], cols.shape[1])).ravel()
            c = np.broadcast_to(cols[:, None, :], (E, rows.shape[1], cols.shape[1])).ravel()
            return sp.coo_matrix((vals.reshape(E, -1).ravel(), (r, c)), shape=shape).tocsr()

        return {
            "m_dv": coo(m_dv, vd, vd, (n3, n3)),
            "m_u": coo(m_u, vd, vd, (n3, n3)),
            "m_p": coo(m_p, vd, pd, (n3, n1)),
            "p_dp": coo(p_dp, pd, pd, (n1, n1)),
            "p_p": coo(p_p, pd, pd, (n1, n1)),
            "p_dv": coo(p_dv, pd, vd, (n1, n3)),
            "p_v": coo(p_v, pd, vd, (n1, n3)),
            "p_u": coo(p_u, pd, vd, (n1, n3)),
        }

    def tangent(self, s: State, t: float, dt: float, alpha_m: float, alpha_f: float,
                gamma: float, with_residuals: bool = True) -> BlockSystem:
        d = self.derivative_blocks(s)
        c1 = alpha_f * gamma * dt
        fv = self.free_v
        A = alpha_m * d["m_dv"] + (c1 * c1 / alpha_m) * d["m_u"]
        B = c1 * d["m_p"]
        C = alpha_m * d["p_dv"] + c1 * d["p_v"] + (c1 * c1 / alpha_m) * d["p_u"]
        D = alpha_m * d["p_dp"] + c1 * d["p_p"]
        Kmu = c1 * d["m_u"]
        Kpu = c1 * d["p_u"]
        if with_residuals:
            R_m, R_p = self.residuals(s, t)
        else:
            R_m, R_p = np.zeros(len(fv)), np.zeros(self.n_nodes)
        return BlockSystem(
            A=_restrict(A, fv, fv), B=_restrict(B, fv, None), C=_restrict(C, None, fv),
            D=D.tocsr(), R_m=R_m, R_p=R_p,
            Kmu=_restrict(Kmu, fv, fv), Kpu=_restrict(Kpu, None, fv), v_dofs=fv,
            near_kernel=near_kernel(self.mesh.nodes + s.u.reshape(-1, 3), fv))

    def mass_matrix(self, s: State) -> sp.csr_matrix:
        """Velocity mass matrix weighted by J rho on free DOFs."""
        m = self.derivative_blocks(s)["m_dv"]
        return _restrict(m, self.free_v, self.free_v)


def _restrict(M, rows, cols) -> sp.csr_matrix:
    M = M.tocsr()
    if rows is not None:
        M = M[rows]
    if cols is not None:
        M = M[:, cols]
    M = M.tocsr()
    M.sort_indices()
    return M


def assemble_residuals(mesh: Mesh, state_at_alpha: State, material: Material,
                       stab: StabilizationParams, loads: Loads, t: float = 0.0):
    """(R_m, R_p) on free DOFs for a state at the intermediate stages."""
    return Assembler(mesh, material, loads, stab=stab).residuals(state_at_alpha, t)


def assemble_tangent(mesh: Mesh, state_at_alpha: State, material: Material,
                     stab: StabilizationParams, loads: Loads, dt: float,
                     alpha_m: float, alpha_f: float, gamma: float, t: float = 0.0) -> BlockSystem:
    return Assembler(mesh, material, loads, stab=stab).tangent(
        state_at_alpha, t, dt, alpha_m, alpha_f, gamma)
