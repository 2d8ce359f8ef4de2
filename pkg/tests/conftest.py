import numpy as np
import pytest

from elastodyn.assembly import Assembler, LinearRamp, Loads, State
from elastodyn.materials import GOH, MPA, NEO_HOOKEAN, Material, MaterialParams
from elastodyn.mesh import generate_cube_mesh, single_tet_mesh

CUBE_DIRICHLET = {"symmetry-x": [0], "symmetry-y": [1], "bottom": [2], "top": [0, 1],
                  "top-loaded-quarter": [0, 1]}


def neo_params(**kw):
    kw.setdefault("mu", 1.0e5)
    kw.setdefault("kappa", 5.0e5)
    return MaterialParams(**kw)


def goh_params(**kw):
    base = dict(mu=7.64e4, kappa=None, k1=1.0e5, k2=2.0, kd=0.1)
    base.update(kw)
    return MaterialParams.from_fiber_angle(40.0, **base)


def random_state(n_nodes, rng, u=0.01, p=1e3, v=1.0, du=1.0, dp=1e3, dv=10.0):
    return State(u * rng.standard_normal(3 * n_nodes), p * rng.standard_normal(n_nodes),
                 v * rng.standard_normal(3 * n_nodes), du * rng.standard_normal(3 * n_nodes),
                 dp * rng.standard_normal(n_nodes), dv * rng.standard_normal(3 * n_nodes))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[NEO_HOOKEAN, GOH])
def material(request):
    if request.param == NEO_HOOKEAN:
        return Material(neo_params(), NEO_HOOKEAN)
    return Material(goh_params(), GOH)


@pytest.fixture
def cube_asm():
    mesh = generate_cube_mesh(2)
    loads = Loads(tractions={"top-loaded-quarter": [0.0, 0.0, -320 * MPA]},
                  ramp=LinearRamp(1e-2), dirichlet=dict(CUBE_DIRICHLET))
    return Assembler(mesh, Material(MaterialParams(), NEO_HOOKEAN), loads)


@pytest.fixture
def tet_asm():
    return Assembler(single_tet_mesh(0.1), Material(neo_params(), NEO_HOOKEAN),
                     Loads(body_force=np.array([1.0, -2.0, 3.0])), c_m=0.1)
