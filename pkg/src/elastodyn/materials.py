"""Gibbs-free-energy constitutive models.

Two models are provided: a compressible Neo-Hookean solid and a fully
incompressible Gasser-Ogden-Holzapfel (GOH) fibre-reinforced solid.  All
stress routines are vectorised over a leading batch axis of deformation
gradients.  Units are CGS (dyn/cm^2, g/cm^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


def _es(*operands):
    return np.einsum(*operands, optimize=True)


MPA = 1.0e7  # dyn/cm^2
KPA = 1.0e4

EXP_CLAMP = 500.0

NEO_HOOKEAN = "neo-hookean"
GOH = "goh"


class ElementInversionError(ValueError):
    """Raised when a deformation gradient with J <= 0 is encountered."""


@dataclass(frozen=True)
class MaterialParams:
    rho0: float = 1.0
    mu: float = 80.194 * MPA
    kappa: float | None = 400889.806 * MPA
    k1: float = 0.0
    k2: float = 0.0
    kd: float = 0.0
    a1: tuple[float, float, float] = (1.0, 0.0, 0.0)
    a2: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.rho0 <= 0 or self.mu <= 0:
            raise ValueError("rho0 and mu must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0.0 <= self.kd <= 1.0 / 3.0:
            raise ValueError(f"kd must lie in [0, 1/3], got {self.kd}")
        for a in (self.a1, self.a2):
            if abs(np.linalg.norm(a) - 1.0) > 1e-12:
                raise ValueError(f"fibre direction {a} is not a unit vector")

    @classmethod
    def from_fiber_angle(cls, phi_deg: float, **kwargs) -> "MaterialParams":
        """Two fibre families at +-phi from the x axis in the x-y plane."""
        phi = math.radians(phi_deg)
        c, s = math.cos(phi), math.sin(phi)
        return cls(a1=(c, s, 0.0), a2=(c, -s, 0.0), **kwargs)

    @classmethod
    def from_poisson(cls, mu: float, nu: float, **kwargs) -> "MaterialParams":
        """Compressible parameters from shear modulus and Poisson's ratio.

        ``nu = 0.5`` yields ``kappa=None`` (incompressible).
        """
        if not 0.0 <= nu <= 0.5:
            raise ValueError(f"Poisson's ratio must lie in [0, 0.5], got {nu}")
        kappa = None if nu == 0.5 else 2.0 * mu * (1.0 + nu) / (3.0 * (1.0 - 2.0 * nu))
        return cls(mu=mu, kappa=kappa, **kwargs)

    def with_(self, **changes) -> "MaterialParams":
        return replace(self, **changes)


@dataclass
class KinematicState:
    F: np.ndarray
    J: np.ndarray
    Ctilde: np.ndarray
    Ftilde: np.ndarray
    Finv: np.ndarray


@dataclass
class StressState:
    Stilde: np.ndarray
    sigma_dev: np.ndarray
    Ptilde: np.ndarray
    Aiso: np.ndarray


def kinematics(F: np.ndarray) -> KinematicState:
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    if np.any(J <= 0.0):
        bad = np.flatnonzero(np.atleast_1d(J) <= 0.0)
        raise ElementInversionError(f"non-positive Jacobian at entries {bad[:10].tolist()}")
    Finv = np.linalg.inv(F)
    C = _es("...ki,...kj->...ij", F, F)
    j23 = J ** (-2.0 / 3.0)
    return KinematicState(F=F, J=J, Ctilde=j23[..., None, None] * C,
                          Ftilde=(J ** (-1.0 / 3.0))[..., None, None] * F, Finv=Finv)


# --- volumetric responses --------------------------------------------------

def neo_hookean_volumetric(p, params: MaterialParams):
    """rho(p), beta(p) and their p-derivatives for the compressible model.

    The volumetric Gibbs energy
    ``G_vol = (p sqrt(p^2+k^2) - p^2)/(2 k rho0) - k/(2 rho0) ln((sqrt(p^2+k^2)-p)/k)``
    has ``dG_vol/dp = (r - p)/(k rho0)`` with ``r = sqrt(p^2 + k^2)``.
    """
    kappa = params.kappa
    if kappa is None:
        raise ValueError("compressible model requires kappa")
    p = np.asarray(p, dtype=float)
    r = np.hypot(p, kappa)
    # r - p without cancellation for large positive p
    r_minus_p = np.where(p > 0, kappa**2 / (r + p), r - p)
    rho = kappa * params.rho0 / r_minus_p
    beta = 1.0 / r
    drho = rho * beta
    dbeta = -p / r**3
    return rho, beta, drho, dbeta


def incompressible_volumetric(p, params: MaterialParams):
    p = np.asarray(p, dtype=float)
    rho = np.full_like(p, params.rho0)
    zero = np.zeros_like(p)
    return rho, zero, zero.copy(), zero.copy()


def neo_hookean_gvol(p, params: MaterialParams):
    """Volumetric Gibbs energy of the compressible model (for diagnostics)."""
    kappa, rho0 = params.kappa, params.rho0
    r = np.hypot(p, kappa)
    return ((p * r - p**2) / (2 * kappa * rho0)
            - kappa / (2 * rho0) * np.log((r - p) / kappa))


# --- isochoric responses ---------------------------------------------------

def _fiber_tensors(params: MaterialParams) -> list[np.ndarray]:
    out = []
    for a in (params.a1, params.a2):
        a = np.asarray(a, dtype=float)
        out.append(params.kd * np.eye(3) + (1.0 - 3.0 * params.kd) * np.outer(a, a))
    return out


def _fictitious(Ct: np.ndarray, params: MaterialParams, model: str):
    """Energy rho0*G_iso, S~ = 2 dW/dC~ and L~ = 4 d2W/dC~dC~."""
    eye = np.eye(3)
    tr = _es("...ii->...", Ct)
    W = 0.5 * params.mu * (tr - 3.0)
    S = params.mu * np.broadcast_to(eye, Ct.shape).copy()
    L = np.zeros(Ct.shape[:-2] + (3, 3, 3, 3))
    if model == GOH and params.k1 != 0.0:
        k1, k2 = params.k1, params.k2
        for H in _fiber_tensors(params):
            E = _es("ij,...ij->...", H, Ct) - 1.0
            arg = np.minimum(k2 * E**2, EXP_CLAMP)
            ex = np.exp(arg)
            W = W + k1 / (2.0 * k2) * (ex - 1.0)
            S = S + (2.0 * k1 * E * ex)[..., None, None] * H
            coef = 4.0 * k1 * ex * (1.0 + 2.0 * k2 * E**2)
            L = L + coef[..., None, None, None, None] * _es("ij,kl->ijkl", H, H)
    elif model not in (NEO_HOOKEAN, GOH):
        raise ValueError(f"unknown material model {model!r}")
    return W, S, L


def isochoric_energy(F: np.ndarray, params: MaterialParams, model: str) -> np.ndarray:
    """rho0 * G_iso evaluated at F."""
    kin = kinematics(F)
    return _fictitious(kin.Ctilde, params, model)[0]


def isochoric_stress(kin: KinematicState, params: MaterialParams, model: str,
                     hessian: bool = True) -> StressState:
    """Fictitious stress, deviatoric Cauchy stress and the F-Hessian.

    ``Aiso[..., i, I, j, J]`` is the full second derivative of
    ``rho0 * G_iso(J^(-2/3) F^T F)`` with respect to ``F_iI`` and ``F_jJ``,
    so that ``d Ptilde_iI = Aiso_iIjJ dF_jJ``.
    """
    F, J, Ct, Finv = kin.F, kin.J, kin.Ctilde, kin.Finv
    _, S, L = _fictitious(Ct, params, model)
    j23 = (J ** (-2.0 / 3.0))[..., None, None]

    s = _es("...ij,...ij->...", S, Ct)
    Ctinv = np.linalg.inv(Ct)
    PS = S - (s / 3.0)[..., None, None] * Ctinv
    FPS = _es("...iI,...IJ->...iJ", F, PS)
    P = j23 * FPS
    sigma = _es("...iI,...jI->...ij", P, F) / J[..., None, None]
    if not hessian:
        return StressState(Stilde=S, sigma_dev=sigma, Ptilde=P, Aiso=None)

    # dC~_IJ / dF_aA
    eye = np.eye(3)
    jF = j23 * F
    dC = (_es("IA,...aJ->...IJaA", eye, jF)
          + _es("...aI,JA->...IJaA", jF, eye)
          - (2.0 / 3.0) * _es("...IJ,...Aa->...IJaA", Ct, Finv))
    dS = 0.5 * _es("...IJKL,...KLbB->...IJbB", L, dC)
    ds = (_es("...IJbB,...IJ->...bB", dS, Ct)
          + _es("...IJ,...IJbB->...bB", S, dC))
    FS = _es("...aI,...IA->...aA", F, S)
    H = (-(2.0 / 3.0) * _es("...aA,...Bb->...aAbB", j23 * FS, Finv)
         + _es("ab,...BA->...aAbB", eye, j23 * S)
         + _es("...aI,...IAbB->...aAbB", jF, dS)
         - (1.0 / 3.0) * _es("...bB,...Aa->...aAbB", ds, Finv)
         + (s / 3.0)[..., None, None, None, None]
         * _es("...Ab,...Ba->...aAbB", Finv, Finv))
    return StressState(Stilde=S, sigma_dev=sigma, Ptilde=P, Aiso=H)


def wave_speed(params: MaterialParams, model: str) -> float:
    """Bulk wave speed for the compressible model, shear wave speed otherwise."""
    if params.rho0 <= 0:
        raise ValueError("rho0 must be positive")
    if model == NEO_HOOKEAN and params.kappa is not None:
        lam = params.kappa - 2.0 * params.mu / 3.0
        return math.sqrt((lam + 2.0 * params.mu) / params.rho0)
    return math.sqrt(params.mu / params.rho0)


class Material:
    """Bundles parameters with a model name; dispatches the volumetric law."""

    def __init__(self, params: MaterialParams, model: str = NEO_HOOKEAN):
        if model not in (NEO_HOOKEAN, GOH):
            raise ValueError(f"unknown material model {model!r}")
        self.params = params
        self.model = model

    @property
    def incompressible(self) -> bool:
        return self.model == GOH or self.params.kappa is None

    def volumetric(self, p):
        if self.incompressible:
            return incompressible_volumetric(p, self.params)
        return neo_hookean_volumetric(p, self.params)

    def stress(self, F: np.ndarray, hessian: bool = True) -> tuple[KinematicState, StressState]:
        kin = kinematics(F)
        return kin, isochoric_stress(kin, self.params, self.model, hessian)

    def wave_speed(self) -> float:
        if self.incompressible:
            return math.sqrt(self.params.mu / self.params.rho0)
        return wave_speed(self.params, self.model)

    def __repr__(self):
        return f"Material({self.model!r}, {self.params!r})"
