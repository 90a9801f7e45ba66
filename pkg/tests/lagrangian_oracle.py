"""Independent Euler-Lagrange oracle for the trailer-tower dynamics.

Derives the accelerations directly from the energy functionals instead of
the assembled matrix form under test:

    d/dt (dT/dv) - dT/dq + dV/dq + dD/dv = 0

with T the kinetic energy, V the potential (gravity + suspension springs +
torsional joint), and D the Rayleigh dissipation function. First
derivatives use complex-step differentiation (exact to machine rounding,
no subtractive cancellation); the velocity Hessian of T and the mixed
velocity/configuration derivatives use central differences, which are
exact here because T and D are quadratic forms in the velocities.

Only geometry and the energy expressions are shared with the package; the
matrix assembly, gravity vector, and forcing vector are not used.
"""

import numpy as np

_CS = 1e-200  # complex-step size
_H = 0.5      # central-difference step; exact for velocity-quadratic forms


def kinetic(p, q, v):
    y1d, f1d, f2d = v[0], v[1], v[2]
    f1, f2 = q[1], q[2]
    x2d = -p.L1 * np.cos(f1) * f1d - p.L2 * np.cos(f2) * f2d
    y2d = y1d - p.L1 * np.sin(f1) * f1d - p.L2 * np.sin(f2) * f2d
    return 0.5 * (p.m1 * y1d ** 2 + p.I1 * f1d ** 2 + p.I2 * f2d ** 2
                  + p.m2 * (x2d ** 2 + y2d ** 2))


def potential(p, q, ye1=0.0, ye2=0.0):
    y1, f1, f2 = q[0], q[1], q[2]
    y2 = y1 + p.L1 * np.cos(f1) + p.L2 * np.cos(f2)
    s1 = y1 - p.B1 * np.sin(f1) - ye1
    s2 = y1 + p.B2 * np.sin(f1) - ye2
    return (p.m1 * p.g_acc * y1 + p.m2 * p.g_acc * y2
            + 0.5 * p.k1 * s1 ** 2 + 0.5 * p.k2 * s2 ** 2
            + 0.5 * p.kT * (f2 - f1) ** 2)


def rayleigh(p, q, v, ye1d=0.0, ye2d=0.0):
    y1d, f1d, f2d = v[0], v[1], v[2]
    f1 = q[1]
    r1 = y1d - p.B1 * f1d * np.cos(f1) - ye1d
    r2 = y1d + p.B2 * f1d * np.cos(f1) - ye2d
    return 0.5 * (p.c1 * r1 ** 2 + p.c2 * r2 ** 2 + p.cT * (f2d - f1d) ** 2)


def _cstep(f, x, i):
    xc = np.asarray(x, dtype=complex).copy()
    xc[i] += 1j * _CS
    return f(xc).imag / _CS


def oracle_accel(p, q, v, ye1=0.0, ye2=0.0, ye1d=0.0, ye2d=0.0):
    """Accelerations (y1_dd, phi1_dd, phi2_dd) from the EL equations."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)

    # velocity Hessian of T (the mass matrix), central cross differences
    A = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            vpp = v.copy(); vpp[i] += _H; vpp[j] += _H
            vpm = v.copy(); vpm[i] += _H; vpm[j] -= _H
            vmp = v.copy(); vmp[i] -= _H; vmp[j] += _H
            vmm = v.copy(); vmm[i] -= _H; vmm[j] -= _H
            A[i, j] = (kinetic(p, q, vpp) - kinetic(p, q, vpm)
                       - kinetic(p, q, vmp) + kinetic(p, q, vmm)) / (4 * _H * _H)

    # d/dt of the momenta at fixed accel: sum_j d2T/(dv_i dq_j) * v_j,
    # complex step in q_j around an exact central difference in v_i
    G = np.zeros(3)
    for i in range(3):
        vp = v.copy(); vp[i] += _H
        vm = v.copy(); vm[i] -= _H

        def momentum_i(qc):
            return (kinetic(p, qc, vp.astype(complex))
                    - kinetic(p, qc, vm.astype(complex))) / (2 * _H)

        for j in range(3):
            G[i] += _cstep(momentum_i, q, j) * v[j]

    rhs = np.empty(3)
    for i in range(3):
        dT_dq = _cstep(lambda qc: kinetic(p, qc, v.astype(complex)), q, i)
        dV_dq = _cstep(lambda qc: potential(p, qc, ye1, ye2), q, i)
        dD_dv = _cstep(lambda vc: rayleigh(p, q.astype(complex), vc, ye1d, ye2d), v, i)
        rhs[i] = -(G[i] - dT_dq + dV_dq + dD_dv)

    return np.linalg.solve(A, rhs)
