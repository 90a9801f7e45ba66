"""Compiled inner loops: road interpolation tables, the 3-DOF right-hand
side, and the adaptive RKF45 stepper.

These kernels exist so a Monte Carlo ensemble of full nonlinear
integrations stays cheap. They must agree bit-for-bit in structure with
the reference implementations in model.rhs and the generic integrator
path; tests cross-check the two routes.
"""

import numpy as np
from numba import njit

__all__ = ["build_table", "road_table_eval", "rhs_kernel", "rkf45_loop",
           "empty_table"]


def empty_table(horizon: float):
    """Zero-excitation stand-in table spanning [0, horizon]."""
    tab = np.zeros((2, 3, 2))
    delta = max(horizon, 1.0) * 2.0
    return delta, tab


@njit(cache=True, nogil=True)
def build_table(omega, parity, norm, coef1, coef2, mu1, mu2, T, delta, m):
    """Quintic-Hermite node tables for both tires.

    out[tire, 0..2, j] holds the series value and first two derivatives
    at t_j = j * delta. Each mode advances by one complex rotation per
    node instead of a trig call per node.
    """
    out = np.zeros((2, 3, m))
    n = omega.shape[0]
    for i in range(n):
        w = omega[i]
        c0 = np.cos(-w * T / 2.0)
        s0 = np.sin(-w * T / 2.0)
        cr = np.cos(w * delta)
        sr = np.sin(w * delta)
        a1 = coef1[i] / norm[i]
        a2 = coef2[i] / norm[i]
        ev = parity[i] == 0
        cj = c0
        sj = s0
        for j in range(m):
            if ev:
                f = cj; d = -w * sj; dd = -w * w * cj
            else:
                f = sj; d = w * cj; dd = -w * w * sj
            out[0, 0, j] += a1 * f
            out[0, 1, j] += a1 * d
            out[0, 2, j] += a1 * dd
            out[1, 0, j] += a2 * f
            out[1, 1, j] += a2 * d
            out[1, 2, j] += a2 * dd
            cn = cj * cr - sj * sr
            sn = sj * cr + cj * sr
            cj = cn
            sj = sn
    for j in range(m):
        out[0, 0, j] += mu1
        out[1, 0, j] += mu2
    return out


@njit(cache=True, nogil=True, inline="always")
def road_table_eval(t, delta, tab):
    """Quintic Hermite interpolation from (f, f', f'') node data."""
    m = tab.shape[2]
    j = int(t / delta)
    if j >= m - 1:
        j = m - 2
    if j < 0:
        j = 0
    s = t / delta - j
    s2 = s * s; s3 = s2 * s; s4 = s3 * s; s5 = s4 * s
    H0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5
    H1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5
    H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5
    H3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5
    H4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5
    H5 = 0.5 * s3 - s4 + 0.5 * s5
    G0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4
    G1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4
    G2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4
    G3 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4
    G4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4
    G5 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4
    ye = np.empty(2)
    yd = np.empty(2)
    for k in range(2):
        f0 = tab[k, 0, j]; d0 = tab[k, 1, j]; a0 = tab[k, 2, j]
        f1 = tab[k, 0, j + 1]; d1 = tab[k, 1, j + 1]; a1 = tab[k, 2, j + 1]
        ye[k] = (f0 * H0 + delta * d0 * H1 + delta * delta * a0 * H2
                 + f1 * H3 + delta * d1 * H4 + delta * delta * a1 * H5)
        yd[k] = (f0 * G0 / delta + d0 * G1 + delta * a0 * G2
                 + f1 * G3 / delta + d1 * G4 + delta * a1 * G5)
    return ye[0], ye[1], yd[0], yd[1]


@njit(cache=True, nogil=True, inline="always")
def rhs_kernel(q1, q2, q3, v1, v2, v3, ye1, ye2, yd1, yd2, p):
    """State derivative for state (y1, phi1, phi2, y1', phi1', phi2').

    p is the 15-component parameter vector from PhysicalParams.as_vector.
    The 3x3 mass solve uses the adjugate; the mass matrix is positive
    definite for physical parameters so det > 0.
    """
    m1 = p[0]; m2 = p[1]; I1 = p[2]; I2 = p[3]; L1 = p[4]; L2 = p[5]
    k1 = p[6]; k2 = p[7]; c1 = p[8]; c2 = p[9]; B1 = p[10]; B2 = p[11]
    kT = p[12]; cT = p[13]; g = p[14]
    sn1 = np.sin(q2); cs1 = np.cos(q2)
    sn2 = np.sin(q3)
    cs2 = np.cos(q3)
    sn21 = np.sin(q3 - q2)
    cs21 = np.cos(q3 - q2)
    M11 = m1 + m2
    M12 = -m2 * L1 * sn1
    M13 = -m2 * L2 * sn2
    M22 = I1 + m2 * L1 * L1
    M23 = m2 * L1 * L2 * cs21
    M33 = I2 + m2 * L2 * L2
    # r = N v^2 + C v + K q - g - h
    ccc = (c2 * B2 - c1 * B1) * cs1
    r1 = (-m2 * L1 * cs1 * v2 * v2 - m2 * L2 * cs2 * v3 * v3
          + (c1 + c2) * v1 + ccc * v2
          + (k1 + k2) * q1)
    r2 = (-m2 * L1 * L2 * sn21 * v3 * v3
          + ccc * v1 + (cT + (c1 * B1 * B1 + c2 * B2 * B2) * cs1 * cs1) * v2 - cT * v3
          + (k2 * B2 - k1 * B1) * cs1 * q1 + kT * q2 - kT * q3)
    r3 = (m2 * L1 * L2 * sn21 * v2 * v2
          - cT * v2 + cT * v3
          - kT * q2 + kT * q3)
    g1 = -(k2 * B2 - k1 * B1) * sn1 - (m1 + m2) * g
    g2 = m2 * g * L1 * sn1 - (k1 * B1 * B1 + k2 * B2 * B2) * sn1 * cs1
    g3 = m2 * g * L2 * sn2
    h1 = k1 * ye1 + k2 * ye2 + c1 * yd1 + c2 * yd2
    h2 = cs1 * (-k1 * B1 * ye1 + k2 * B2 * ye2 - c1 * B1 * yd1 + c2 * B2 * yd2)
    r1 -= g1 + h1
    r2 -= g2 + h2
    r3 -= g3
    A11 = M22 * M33 - M23 * M23
    A12 = M13 * M23 - M12 * M33
    A13 = M12 * M23 - M13 * M22
    A22 = M11 * M33 - M13 * M13
    A23 = M12 * M13 - M11 * M23
    A33 = M11 * M22 - M12 * M12
    det = M11 * A11 + M12 * A12 + M13 * A13
    a1 = -(A11 * r1 + A12 * r2 + A13 * r3) / det
    a2 = -(A12 * r1 + A22 * r2 + A23 * r3) / det
    a3 = -(A13 * r1 + A23 * r2 + A33 * r3) / det
    return v1, v2, v3, a1, a2, a3


@njit(cache=True, nogil=True)
def rkf45_loop(y0, t0, dt_out, rtol, atol, dt_min, dt_init,
               p, delta, tab, out, exc_out, fin):
    """Adaptive RKF45 with dense output by step clipping.

    out has shape (n_out, 6) and receives the state at t0 + k*dt_out;
    exc_out has shape (n_out, 4) and receives (ye1, ye2, ye1', ye2') at
    the same instants. Steps are clipped to land exactly on each output
    time, and a clipped step never lowers the stored step size proposal.
    fin (7 slots) receives the last time and state, for error reporting.

    Returns (status, naccept, nreject, hmin, hmax) with status 0 on
    success, 1 on step underflow, 2 on a non-finite state.
    """
    c2 = 0.25; c3 = 3.0 / 8.0; c4 = 12.0 / 13.0; c5 = 1.0; c6 = 0.5
    a21 = 0.25
    a31 = 3.0 / 32.0; a32 = 9.0 / 32.0
    a41 = 1932.0 / 2197.0; a42 = -7200.0 / 2197.0; a43 = 7296.0 / 2197.0
    a51 = 439.0 / 216.0; a52 = -8.0; a53 = 3680.0 / 513.0; a54 = -845.0 / 4104.0
    a61 = -8.0 / 27.0; a62 = 2.0; a63 = -3544.0 / 2565.0
    a64 = 1859.0 / 4104.0; a65 = -11.0 / 40.0
    b51 = 16.0 / 135.0; b53 = 6656.0 / 12825.0; b54 = 28561.0 / 56430.0
    b55 = -9.0 / 50.0; b56 = 2.0 / 55.0
    e1 = 16.0 / 135.0 - 25.0 / 216.0
    e3 = 6656.0 / 12825.0 - 1408.0 / 2565.0
    e4 = 28561.0 / 56430.0 - 2197.0 / 4104.0
    e5 = -9.0 / 50.0 + 1.0 / 5.0
    e6 = 2.0 / 55.0

    n_out = out.shape[0]
    y = y0.copy()
    t = t0
    out[0, :] = y
    ea, eb, ec, ed = road_table_eval(t0, delta, tab)
    exc_out[0, 0] = ea; exc_out[0, 1] = eb
    exc_out[0, 2] = ec; exc_out[0, 3] = ed
    k_out = 1
    h = dt_init
    naccept = 0
    nreject = 0
    hmin_seen = 1e300
    hmax_seen = 0.0
    y1 = np.empty(6); y2 = np.empty(6); y3 = np.empty(6)
    y4 = np.empty(6); y5 = np.empty(6)
    ynew = np.empty(6)
    while k_out < n_out:
        t_target = t0 + k_out * dt_out
        clipped = False
        hs = h
        if t + hs >= t_target:
            hs = t_target - t
            clipped = True
        if hs < dt_min:
            fin[0] = t
            for i in range(6):
                fin[1 + i] = y[i]
            return 1, naccept, nreject, hmin_seen, hmax_seen
        ye1, ye2, yd1, yd2 = road_table_eval(t, delta, tab)
        f1 = rhs_kernel(y[0], y[1], y[2], y[3], y[4], y[5],
                        ye1, ye2, yd1, yd2, p)
        for i in range(6):
            y1[i] = y[i] + hs * a21 * f1[i]
        ye1, ye2, yd1, yd2 = road_table_eval(t + c2 * hs, delta, tab)
        f2 = rhs_kernel(y1[0], y1[1], y1[2], y1[3], y1[4], y1[5],
                        ye1, ye2, yd1, yd2, p)
        for i in range(6):
            y2[i] = y[i] + hs * (a31 * f1[i] + a32 * f2[i])
        ye1, ye2, yd1, yd2 = road_table_eval(t + c3 * hs, delta, tab)
        f3 = rhs_kernel(y2[0], y2[1], y2[2], y2[3], y2[4], y2[5],
                        ye1, ye2, yd1, yd2, p)
        for i in range(6):
            y3[i] = y[i] + hs * (a41 * f1[i] + a42 * f2[i] + a43 * f3[i])
        ye1, ye2, yd1, yd2 = road_table_eval(t + c4 * hs, delta, tab)
        f4 = rhs_kernel(y3[0], y3[1], y3[2], y3[3], y3[4], y3[5],
                        ye1, ye2, yd1, yd2, p)
        for i in range(6):
            y4[i] = y[i] + hs * (a51 * f1[i] + a52 * f2[i]
                                 + a53 * f3[i] + a54 * f4[i])
        ye1, ye2, yd1, yd2 = road_table_eval(t + c5 * hs, delta, tab)
        f5 = rhs_kernel(y4[0], y4[1], y4[2], y4[3], y4[4], y4[5],
                        ye1, ye2, yd1, yd2, p)
        for i in range(6):
            y5[i] = y[i] + hs * (a61 * f1[i] + a62 * f2[i] + a63 * f3[i]
                                 + a64 * f4[i] + a65 * f5[i])
        ye1, ye2, yd1, yd2 = road_table_eval(t + c6 * hs, delta, tab)
        f6 = rhs_kernel(y5[0], y5[1], y5[2], y5[3], y5[4], y5[5],
                        ye1, ye2, yd1, yd2, p)
        errn = 0.0
        ok = True
        for i in range(6):
            ynew[i] = y[i] + hs * (b51 * f1[i] + b53 * f3[i] + b54 * f4[i]
                                   + b55 * f5[i] + b56 * f6[i])
            if not np.isfinite(ynew[i]):
                ok = False
            E = hs * (e1 * f1[i] + e3 * f3[i] + e4 * f4[i]
                      + e5 * f5[i] + e6 * f6[i])
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            errn += (E / sc) ** 2
        errn = np.sqrt(errn / 6.0)
        if not ok:
            fin[0] = t
            for i in range(6):
                fin[1 + i] = y[i]
            return 2, naccept, nreject, hmin_seen, hmax_seen
        if errn <= 1.0:
            naccept += 1
            if hs < hmin_seen:
                hmin_seen = hs
            if hs > hmax_seen:
                hmax_seen = hs
            if clipped:
                t = t_target
                out[k_out, :] = ynew
                ea, eb, ec, ed = road_table_eval(t_target, delta, tab)
                exc_out[k_out, 0] = ea; exc_out[k_out, 1] = eb
                exc_out[k_out, 2] = ec; exc_out[k_out, 3] = ed
                k_out += 1
            else:
                t = t + hs
            for i in range(6):
                y[i] = ynew[i]
            fac = 5.0
            if errn > 0.0:
                fac = 0.9 * errn ** (-0.2)
                if fac > 5.0:
                    fac = 5.0
                if fac < 0.2:
                    fac = 0.2
            if not clipped:
                h = hs * fac
            else:
                # keep the pre-clip proposal unless the step earned a raise
                hp = hs * fac
                if hp > h:
                    h = hp
        else:
            nreject += 1
            fac = 0.9 * errn ** (-0.2)
            if fac < 0.1:
                fac = 0.1
            h = hs * fac
    fin[0] = t
    for i in range(6):
        fin[1 + i] = y[i]
    return 0, naccept, nreject, hmin_seen, hmax_seen
