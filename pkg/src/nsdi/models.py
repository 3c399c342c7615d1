"""Trajectory models: states, potentials, Hamiltonians, equations of motion.

Three related models of correlated electron escape from a Z = N ion:

sym2e
    Two electrons locked into the symmetric C2v configuration
    r_{1,2} = (x, +-y, 0), p_{1,2} = (px, +-py, 0) with y > 0. Working
    Hamiltonian (kinetic term summed over both electrons, no 1/2):

        H = px^2 + py^2 - 4/r + 1/(2 y) + 2 eps(t) x,   r = |(x, y)|

    so positions evolve as xdot = 2 px, ydot = 2 py.

full3d
    Both electrons unconstrained in 3-D, nucleus fixed at the origin:

        H = |p1|^2/2 + |p2|^2/2 - 2/|r1| - 2/|r2| + 1/|r1 - r2|
            + eps(t) (x1 + x2)

    Restricting to the symmetric configuration reproduces the sym2e
    Hamiltonian value exactly.

ngon
    N electrons on a regular N-gon riding a ring of radius rho at height z
    (field along z), reduced to one representative electron:

        H = N (p_rho^2 + p_z^2)/2 - N^2/r + N(N-1)/(4 rho sin(pi/N))
            + N z eps(t)

    N = 1 has no repulsion term and degenerates to a driven hydrogen atom,
    which doubles as an analytically solvable test case.

All public functions take plain floats / small arrays plus FieldParams;
the compiled versions of the same formulas live in _kernels and are
checked against these in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fields import FieldParams, effective_field, effective_field_rate

MODELS = ("sym2e", "full3d", "ngon")
_MODEL_IDS = {"sym2e": _kernels.MODEL_SYM2E,
              "full3d": _kernels.MODEL_FULL3D,
              "ngon": _kernels.MODEL_NGON}
STATE_DIM = {"sym2e": 4, "full3d": 12, "ngon": 4}


def model_id(model: str) -> int:
    try:
        return _MODEL_IDS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}, expected one of {MODELS}")


@dataclass
class SymState2e:
    """Symmetric-subspace state (x, y, px, py), y > 0."""

    x: float
    y: float
    px: float
    py: float

    def __post_init__(self):
        if self.y <= 0.0:
            raise ValueError("y must be positive (electrons may not cross the field axis)")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.px, self.py])


@dataclass
class FullState2e:
    """Two unconstrained electrons: positions r1, r2 and momenta p1, p2."""

    r1: np.ndarray
    r2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        for name in ("r1", "r2", "p1", "p2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            setattr(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r1, self.r2, self.p1, self.p2])


@dataclass
class NGonState:
    """Ring state (rho, z, p_rho, p_z) of the representative electron."""

    rho: float
    z: float
    prho: float
    pz: float

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, self.z, self.prho, self.pz])


def ngon_repulsion_coef(n: int) -> float:
    """Mutual-repulsion coefficient N(N-1) / (4 sin(pi/N)); zero for N = 1."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n == 1:
        return 0.0
    return n * (n - 1) / (4.0 * math.sin(math.pi / n))


def saddle_indicator_coef(model: str, n: int = 2) -> float:
    """Constant c with r_s(t)^2 |eps(t)| = c at the instantaneous saddle.

    For the two-electron models c = sqrt(3). For the ring model the value
    follows from the saddle geometry; inf when no saddle exists (the ring
    holds together for any field) so the crossing detector stays silent.
    """
    if model in ("sym2e", "full3d"):
        return math.sqrt(3.0)
    b = ngon_repulsion_coef(n) / n  # per-electron repulsion strength
    s = (b / n) ** (1.0 / 3.0)
    if s >= 1.0:
        return math.inf
    return n * math.sqrt(1.0 - s * s)


def pack_params(params: FieldParams, model: str = "sym2e", n: int = 2) -> np.ndarray:
    """Flatten FieldParams + model constants into the kernel vector."""
    if model != "ngon":
        n = 2
    gap = 0.0 if n == 1 else 2.0 * math.sin(math.pi / n)
    return np.array([
        params.F_peak, params.omega, params.phi, params.T_d,
        float(n), ngon_repulsion_coef(n), saddle_indicator_coef(model, n),
        1.0 if params.frozen else 0.0, gap,
    ])


# ---------------------------------------------------------------------------
# symmetric two-electron model

def potential_sym2e(x: float, y: float, t: float, params: FieldParams) -> float:
    """-4/r + 1/(2y) + 2 eps(t) x."""
    if y <= 0.0:
        raise ValueError("y must be positive")
    r = math.hypot(x, y)
    return -4.0 / r + 0.5 / y + 2.0 * effective_field(t, params) * x


def hamiltonian_sym2e(state: SymState2e, t: float, params: FieldParams) -> float:
    return (state.px ** 2 + state.py ** 2
            + potential_sym2e(state.x, state.y, t, params))


def rhs_sym2e(state: SymState2e, t: float, params: FieldParams) -> np.ndarray:
    """(xdot, ydot, pxdot, pydot) of the symmetric-pair reduction.

    The Hamiltonian sums both electrons' energies, so the mirrored pair
    carries symplectic weight 2: the shared coordinates move at the
    per-electron rate xdot = px and the pair force splits evenly,
    pdot = -grad V / 2. Restricting the 3-d two-electron flow to the
    symmetric subspace reproduces exactly this field.
    """
    x, y = state.x, state.y
    r3 = math.hypot(x, y) ** 3
    eps = effective_field(t, params)
    return np.array([
        state.px,
        state.py,
        -(2.0 * x / r3 + eps),
        -(2.0 * y / r3 - 0.25 / (y * y)),
    ])


def grad_potential_sym2e(x: float, y: float, t: float,
                         params: FieldParams) -> np.ndarray:
    """(dV/dx, dV/dy) of the sym2e potential."""
    r3 = math.hypot(x, y) ** 3
    eps = effective_field(t, params)
    return np.array([4.0 * x / r3 + 2.0 * eps,
                     4.0 * y / r3 - 0.5 / (y * y)])


def hessian_sym2e(x: float, y: float, t: float,
                  params: FieldParams) -> np.ndarray:
    """2x2 second-derivative matrix of the sym2e potential."""
    r2 = x * x + y * y
    r5 = r2 ** 2.5
    vxx = 4.0 * (r2 - 3.0 * x * x) / r5
    vyy = 4.0 * (r2 - 3.0 * y * y) / r5 + 1.0 / y ** 3
    vxy = -12.0 * x * y / r5
    return np.array([[vxx, vxy], [vxy, vyy]])


# ---------------------------------------------------------------------------
# full two-electron model

def potential_full3d(r1, r2, t: float, params: FieldParams) -> float:
    """-2/|r1| - 2/|r2| + 1/|r1 - r2| + eps(t) (x1 + x2)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    n1 = np.linalg.norm(r1)
    n2 = np.linalg.norm(r2)
    nd = np.linalg.norm(r1 - r2)
    if n1 == 0.0 or n2 == 0.0 or nd == 0.0:
        raise ValueError("coincident particles")
    return (-2.0 / n1 - 2.0 / n2 + 1.0 / nd
            + effective_field(t, params) * (r1[0] + r2[0]))


def hamiltonian_full3d(state: FullState2e, t: float, params: FieldParams) -> float:
    kin = 0.5 * (state.p1 @ state.p1 + state.p2 @ state.p2)
    return kin + potential_full3d(state.r1, state.r2, t, params)


def rhs_full3d(state: FullState2e, t: float, params: FieldParams) -> np.ndarray:
    """Time derivative of (r1, r2, p1, p2) flattened to length 12."""
    y = np.concatenate([state.r1, state.r2, state.p1, state.p2, [0.0]])
    dy = np.empty(13)
    pars = pack_params(params, "full3d")
    _kernels.rhs(_kernels.MODEL_FULL3D, t, y, dy, pars)
    return dy[:12]


def grad_potential_full3d(r1, r2, t: float, params: FieldParams) -> np.ndarray:
    """Gradient of the full3d potential wrt (r1, r2), flattened to length 6."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    eps = effective_field(t, params)
    n1 = np.linalg.norm(r1)
    n2 = np.linalg.norm(r2)
    d = r1 - r2
    nd = np.linalg.norm(d)
    g = np.empty(6)
    g[:3] = 2.0 * r1 / n1 ** 3 - d / nd ** 3
    g[3:] = 2.0 * r2 / n2 ** 3 + d / nd ** 3
    g[0] += eps
    g[3] += eps
    return g


def hessian_full3d(r1, r2, t: float, params: FieldParams) -> np.ndarray:
    """Analytic 6x6 second-derivative matrix of the full3d potential.

    Block structure: the nuclear attraction contributes (2/n^3)(I - 3 rhat
    rhat^T) on each diagonal block, the mutual repulsion adds
    (3 dhat dhat^T - I)/nd^3 within diagonal blocks and its negative on the
    off-diagonal blocks. The linear field term has no second derivative.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    eye = np.eye(3)

    def attraction(r):
        n = np.linalg.norm(r)
        return (2.0 / n ** 3) * (eye - 3.0 * np.outer(r, r) / n ** 2)

    d = r1 - r2
    nd = np.linalg.norm(d)
    rep = (3.0 * np.outer(d, d) / nd ** 2 - eye) / nd ** 3

    h = np.zeros((6, 6))
    h[:3, :3] = attraction(r1) + rep
    h[3:, 3:] = attraction(r2) + rep
    h[:3, 3:] = -rep
    h[3:, :3] = -rep
    return h


def symmetric_embedding(state: SymState2e) -> FullState2e:
    """Lift a symmetric-subspace state into the full two-electron space."""
    r1 = np.array([state.x, state.y, 0.0])
    r2 = np.array([state.x, -state.y, 0.0])
    p1 = np.array([state.px, state.py, 0.0])
    p2 = np.array([state.px, -state.py, 0.0])
    return FullState2e(r1, r2, p1, p2)


# ---------------------------------------------------------------------------
# N-electron ring model

def potential_ngon(rho: float, z: float, t: float, n: int,
                   params: FieldParams) -> float:
    """-N^2/r + N(N-1)/(4 rho sin(pi/N)) + N z eps(t)."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    r = math.hypot(rho, z)
    return (-n * n / r + ngon_repulsion_coef(n) / rho
            + n * z * effective_field(t, params))


def hamiltonian_ngon(state: NGonState, t: float, n: int,
                     params: FieldParams) -> float:
    return (n * (state.prho ** 2 + state.pz ** 2) * 0.5
            + potential_ngon(state.rho, state.z, t, n, params))


def rhs_ngon(state: NGonState, t: float, n: int,
             params: FieldParams) -> np.ndarray:
    """(rhodot, zdot, prhodot, pzdot) for the ring Hamiltonian.

    Same reduction convention as the two-electron model: the N identical
    electrons give the shared ring coordinates symplectic weight N, so the
    velocities are the per-electron ones and the ring force is divided by N.
    For N=1 this is the plain Kepler-plus-field flow.
    """
    rho, z = state.rho, state.z
    r3 = math.hypot(rho, z) ** 3
    rep = ngon_repulsion_coef(n)
    eps = effective_field(t, params)
    return np.array([
        state.prho,
        state.pz,
        -(n * rho / r3 - rep / (n * rho * rho)),
        -(n * z / r3 + eps),
    ])


def grad_potential_ngon(rho: float, z: float, t: float, n: int,
                        params: FieldParams) -> np.ndarray:
    r3 = math.hypot(rho, z) ** 3
    rep = ngon_repulsion_coef(n)
    eps = effective_field(t, params)
    return np.array([n * n * rho / r3 - rep / (rho * rho),
                     n * n * z / r3 + n * eps])


def hessian_ngon(rho: float, z: float, n: int) -> np.ndarray:
    """2x2 second-derivative matrix of the field-free part wrt (rho, z).

    The field term is linear in z, so this matrix also serves with the
    field on.
    """
    r2 = rho * rho + z * z
    r5 = r2 ** 2.5
    rep = ngon_repulsion_coef(n)
    vrr = n * n * (r2 - 3.0 * rho * rho) / r5 + 2.0 * rep / rho ** 3
    vzz = n * n * (r2 - 3.0 * z * z) / r5
    vrz = -3.0 * n * n * rho * z / r5
    return np.array([[vrr, vrz], [vrz, vzz]])


def ngon_to_sym2e(state: NGonState) -> SymState2e:
    """Relabel an N = 2 ring state to sym2e coordinates (z, rho) -> (x, y)."""
    return SymState2e(x=state.z, y=state.rho, px=state.pz, py=state.prho)


def work_rate(model: str, y: np.ndarray, t: float, params: FieldParams,
              n: int = 2) -> float:
    """Explicit time derivative dH/dt of the driven Hamiltonian at state y."""
    deps = effective_field_rate(t, params)
    if model == "sym2e":
        return 2.0 * y[0] * deps
    if model == "full3d":
        return (y[0] + y[3]) * deps
    return n * y[1] * deps
