"""Trailer-tower multibody model.

Three degrees of freedom: vertical displacement y1 of the suspended
trailer, trailer roll angle phi1, and tilt angle phi2 of the fan tower,
which sits on a torsional joint atop the trailer like an inverted
pendulum. The equations of motion have the quasi-linear form

    M(q) a + N(q) v^2 + C(q) v + K(q) q = g(q) + h(q, e)

where q = (y1, phi1, phi2), v are the velocities, v^2 is the
component-wise square, g collects gravity and the geometric spring terms
that are nonlinear in the angles, and h carries the road excitation
through the left/right suspension elements.

All operations here are pure functions; the compiled hot path lives in
_kernels and is checked against this module in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "PhysicalParams",
    "State",
    "ExcitationSample",
    "SystemMatrices",
    "SingularMassMatrixError",
    "assemble_matrices",
    "assemble_forcing",
    "rhs",
    "make_rhs",
    "static_equilibrium",
    "tower_kinematics",
    "kinetic_energy",
    "potential_energy",
    "mechanical_energy",
]

RCOND_LIMIT = 1e-12


class SingularMassMatrixError(RuntimeError):
    """Mass matrix is numerically singular at the requested configuration."""

    def __init__(self, rcond):
        super().__init__(f"mass matrix reciprocal condition {rcond:.3e} "
                         f"below {RCOND_LIMIT:.0e}")
        self.rcond = rcond


@dataclass(frozen=True)
class PhysicalParams:
    """Mechanical constants of the trailer-tower assembly (SI units)."""

    m1: float   # trailer mass (kg)
    m2: float   # tower mass (kg)
    I1: float   # trailer moment of inertia (kg m^2)
    I2: float   # tower moment of inertia (kg m^2)
    L1: float   # joint height above trailer reference (m)
    L2: float   # tower length joint-to-tip (m)
    k1: float   # left suspension stiffness (N/m)
    k2: float   # right suspension stiffness (N/m)
    c1: float   # left suspension damping (N s/m)
    c2: float   # right suspension damping (N s/m)
    B1: float   # left half-track distance (m)
    B2: float   # right half-track distance (m)
    kT: float   # torsional joint stiffness (N m/rad)
    cT: float   # torsional joint damping (N m s/rad)
    g_acc: float = 9.81

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not math.isfinite(val):
                raise ValueError(f"{f.name} must be finite, got {val!r}")
            if f.name != "g_acc" and val <= 0.0:
                raise ValueError(f"{f.name} must be strictly positive, got {val!r}")

    def as_vector(self) -> np.ndarray:
        """Parameter layout consumed by the compiled kernels."""
        return np.array([self.m1, self.m2, self.I1, self.I2, self.L1, self.L2,
                         self.k1, self.k2, self.c1, self.c2, self.B1, self.B2,
                         self.kT, self.cT, self.g_acc])


@dataclass(frozen=True)
class State:
    y1: float
    phi1: float
    phi2: float
    y1_dot: float = 0.0
    phi1_dot: float = 0.0
    phi2_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.y1, self.phi1, self.phi2,
                         self.y1_dot, self.phi1_dot, self.phi2_dot])

    @staticmethod
    def from_array(arr) -> "State":
        a = np.asarray(arr, dtype=float)
        if a.shape != (6,):
            raise ValueError(f"state must have 6 components, got shape {a.shape}")
        return State(*a.tolist())


@dataclass(frozen=True)
class ExcitationSample:
    """Tire displacements and velocities at one instant."""

    ye1: float = 0.0
    ye2: float = 0.0
    ye1_dot: float = 0.0
    ye2_dot: float = 0.0
    t: float = 0.0


ZERO_EXCITATION = ExcitationSample()


@dataclass(frozen=True)
class SystemMatrices:
    M: np.ndarray
    N: np.ndarray
    C: np.ndarray
    K: np.ndarray


def _state_tuple(s):
    if isinstance(s, State):
        return s.y1, s.phi1, s.phi2, s.y1_dot, s.phi1_dot, s.phi2_dot
    a = np.asarray(s, dtype=float)
    if a.shape != (6,):
        raise ValueError(f"state must have 6 components, got shape {a.shape}")
    return tuple(a.tolist())


def assemble_matrices(p: PhysicalParams, s) -> SystemMatrices:
    """Configuration-dependent system matrices at state s.

    M is the symmetric kinetic-energy metric, N multiplies the squared
    velocities (centrifugal coupling), C the velocities, K the
    coordinates. K is deliberately asymmetric: the stiffness coupling
    that would sit at K[0,1] is nonlinear in phi1 and lives in the load
    vector g instead (see assemble_forcing).
    """
    _, phi1, phi2, _, _, _ = _state_tuple(s)
    sp1, cp1 = math.sin(phi1), math.cos(phi1)
    sp2, cp2 = math.sin(phi2), math.cos(phi2)
    s21 = math.sin(phi2 - phi1)
    c21 = math.cos(phi2 - phi1)

    m1, m2 = p.m1, p.m2
    M = np.array([
        [m1 + m2, -m2 * p.L1 * sp1, -m2 * p.L2 * sp2],
        [-m2 * p.L1 * sp1, p.I1 + m2 * p.L1 ** 2, m2 * p.L1 * p.L2 * c21],
        [-m2 * p.L2 * sp2, m2 * p.L1 * p.L2 * c21, p.I2 + m2 * p.L2 ** 2],
    ])
    N = np.array([
        [0.0, -m2 * p.L1 * cp1, -m2 * p.L2 * cp2],
        [0.0, 0.0, -m2 * p.L1 * p.L2 * s21],
        [0.0, m2 * p.L1 * p.L2 * s21, 0.0],
    ])
    cc = (p.c2 * p.B2 - p.c1 * p.B1) * cp1
    C = np.array([
        [p.c1 + p.c2, cc, 0.0],
        [cc, p.cT + (p.c1 * p.B1 ** 2 + p.c2 * p.B2 ** 2) * cp1 ** 2, -p.cT],
        [0.0, -p.cT, p.cT],
    ])
    K = np.array([
        [p.k1 + p.k2, 0.0, 0.0],
        [(p.k2 * p.B2 - p.k1 * p.B1) * cp1, p.kT, -p.kT],
        [0.0, -p.kT, p.kT],
    ])
    return SystemMatrices(M=M, N=N, C=C, K=K)


def assemble_forcing(p: PhysicalParams, s, e: ExcitationSample | None):
    """Load vectors (g_vec, h_vec) at state s under excitation e.

    g_vec collects gravity and the angle-nonlinear spring terms; with the
    sign convention used here the zero-excitation equilibrium sits below
    the reference level (springs compressed under weight). h_vec carries
    the road input; its third component is identically zero because the
    tower has no direct road contact.
    """
    if e is None:
        e = ZERO_EXCITATION
    _, phi1, phi2, _, _, _ = _state_tuple(s)
    sp1, cp1 = math.sin(phi1), math.cos(phi1)
    sp2 = math.sin(phi2)

    g_vec = np.array([
        -(p.k2 * p.B2 - p.k1 * p.B1) * sp1 - (p.m1 + p.m2) * p.g_acc,
        p.m2 * p.g_acc * p.L1 * sp1
        - (p.k1 * p.B1 ** 2 + p.k2 * p.B2 ** 2) * sp1 * cp1,
        p.m2 * p.g_acc * p.L2 * sp2,
    ])
    h_vec = np.array([
        p.k1 * e.ye1 + p.k2 * e.ye2 + p.c1 * e.ye1_dot + p.c2 * e.ye2_dot,
        cp1 * (-p.k1 * p.B1 * e.ye1 + p.k2 * p.B2 * e.ye2
               - p.c1 * p.B1 * e.ye1_dot + p.c2 * p.B2 * e.ye2_dot),
        0.0,
    ])
    return g_vec, h_vec


def _solve_mass(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    # 3x3 direct solve guarded by a reciprocal-condition estimate
    sv = np.linalg.svd(M, compute_uv=False)
    rcond = sv[-1] / sv[0] if sv[0] > 0 else 0.0
    if not rcond >= RCOND_LIMIT:
        raise SingularMassMatrixError(rcond)
    return np.linalg.solve(M, b)


def rhs(p: PhysicalParams, s, e: ExcitationSample | None = None) -> np.ndarray:
    """State derivative (velocities, accelerations) as a 6-vector."""
    y1, phi1, phi2, v1, v2, v3 = _state_tuple(s)
    sm = assemble_matrices(p, s)
    g_vec, h_vec = assemble_forcing(p, s, e)
    q = np.array([y1, phi1, phi2])
    v = np.array([v1, v2, v3])
    r = sm.N @ (v * v) + sm.C @ v + sm.K @ q - g_vec - h_vec
    acc = _solve_mass(sm.M, -r)
    return np.concatenate([v, acc])


def make_rhs(p: PhysicalParams):
    """Right-hand-side callable f(t, y, e) bound to fixed parameters.

    The returned function carries the parameter set as attributes so the
    integrator can recognize the standard model and route it through the
    compiled fast path.
    """

    def f(t, y, e=None):
        return rhs(p, y, e)

    f.params = p
    f.pvec = p.as_vector()
    return f


def static_equilibrium(p: PhysicalParams) -> State:
    """Rest configuration with no excitation: springs carry the full weight."""
    return State(y1=-(p.m1 + p.m2) * p.g_acc / (p.k1 + p.k2),
                 phi1=0.0, phi2=0.0)


def tower_kinematics(p: PhysicalParams, s):
    """Horizontal and vertical position (x2, y2) of the tower tip."""
    y1, phi1, phi2, _, _, _ = _state_tuple(s)
    x2 = -p.L1 * math.sin(phi1) - p.L2 * math.sin(phi2)
    y2 = y1 + p.L1 * math.cos(phi1) + p.L2 * math.cos(phi2)
    return x2, y2


def kinetic_energy(p: PhysicalParams, s) -> float:
    _, phi1, phi2, y1d, f1d, f2d = _state_tuple(s)
    x2d = -p.L1 * math.cos(phi1) * f1d - p.L2 * math.cos(phi2) * f2d
    y2d = y1d - p.L1 * math.sin(phi1) * f1d - p.L2 * math.sin(phi2) * f2d
    return 0.5 * (p.m1 * y1d ** 2 + p.I1 * f1d ** 2 + p.I2 * f2d ** 2
                  + p.m2 * (x2d ** 2 + y2d ** 2))


def potential_energy(p: PhysicalParams, s, e: ExcitationSample | None = None) -> float:
    if e is None:
        e = ZERO_EXCITATION
    y1, phi1, phi2, _, _, _ = _state_tuple(s)
    y2 = y1 + p.L1 * math.cos(phi1) + p.L2 * math.cos(phi2)
    s1 = y1 - p.B1 * math.sin(phi1) - e.ye1
    s2 = y1 + p.B2 * math.sin(phi1) - e.ye2
    return (p.m1 * p.g_acc * y1 + p.m2 * p.g_acc * y2
            + 0.5 * p.k1 * s1 ** 2 + 0.5 * p.k2 * s2 ** 2
            + 0.5 * p.kT * (phi2 - phi1) ** 2)


def mechanical_energy(p: PhysicalParams, states: np.ndarray,
                      excitation: np.ndarray | None = None) -> np.ndarray:
    """Total energy T + V per row of an (n, 6) state array.

    excitation, when given, is an (n, 4) array of (ye1, ye2, ye1_dot,
    ye2_dot); only the displacements enter the potential.
    """
    st = np.asarray(states, dtype=float)
    if st.ndim != 2 or st.shape[1] != 6:
        raise ValueError(f"states must be (n, 6), got {st.shape}")
    y1, f1, f2 = st[:, 0], st[:, 1], st[:, 2]
    y1d, f1d, f2d = st[:, 3], st[:, 4], st[:, 5]
    if excitation is None:
        ye1 = ye2 = 0.0
    else:
        exc = np.asarray(excitation, dtype=float)
        ye1, ye2 = exc[:, 0], exc[:, 1]

    x2d = -p.L1 * np.cos(f1) * f1d - p.L2 * np.cos(f2) * f2d
    y2d = y1d - p.L1 * np.sin(f1) * f1d - p.L2 * np.sin(f2) * f2d
    kin = 0.5 * (p.m1 * y1d ** 2 + p.I1 * f1d ** 2 + p.I2 * f2d ** 2
                 + p.m2 * (x2d ** 2 + y2d ** 2))
    y2 = y1 + p.L1 * np.cos(f1) + p.L2 * np.cos(f2)
    s1 = y1 - p.B1 * np.sin(f1) - ye1
    s2 = y1 + p.B2 * np.sin(f1) - ye2
    pot = (p.m1 * p.g_acc * y1 + p.m2 * p.g_acc * y2
           + 0.5 * p.k1 * s1 ** 2 + 0.5 * p.k2 * s2 ** 2
           + 0.5 * p.kT * (f2 - f1) ** 2)
    return kin + pot
