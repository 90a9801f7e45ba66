"""Adaptive Runge-Kutta-Fehlberg (4)5 integration on a fixed output grid.

One embedded RKF45 scheme drives two code paths: a compiled loop for the
3-DOF sprayer model under tabulated road excitation, and a plain-Python
loop for arbitrary right-hand sides used in verification. Both share the
same tableau, error norm, and step-size controller, so they must agree to
within interpolation error; tests enforce that. Dense output works by
clipping steps onto the requested grid rather than interpolating, which
keeps the recorded states exactly as integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels, model, road

__all__ = [
    "IntegratorConfig",
    "IntegrationStats",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "energy_audit",
]

# Fehlberg tableau (shared with the compiled loop)
_C = (0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_A = (
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
       -9.0 / 50.0, 2.0 / 55.0)
_E = (16.0 / 135.0 - 25.0 / 216.0, 0.0,
      6656.0 / 12825.0 - 1408.0 / 2565.0,
      28561.0 / 56430.0 - 2197.0 / 4104.0,
      -9.0 / 50.0 + 1.0 / 5.0, 2.0 / 55.0)

# table spacing for the compiled excitation path; finer output grids
# reuse the output spacing itself
_TABLE_DELTA = 2e-3


class IntegrationError(RuntimeError):
    """Integration aborted; carries the last reached time and state."""

    def __init__(self, reason: str, t_last: float, last_state: np.ndarray):
        super().__init__(f"integration failed at t = {t_last:.9g}: {reason}")
        self.reason = reason
        self.t_last = t_last
        self.last_state = np.array(last_state, dtype=float)


@dataclass(frozen=True)
class IntegratorConfig:
    t0: float = 0.0
    tf: float = 30.0
    dt_out: float = 1e-3
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    dt_min: float = 1e-9
    dt_init: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.tf)):
            raise ValueError("t0 and tf must be finite")
        if self.tf <= self.t0:
            raise ValueError("tf must exceed t0")
        if self.dt_out <= 0:
            raise ValueError("dt_out must be positive")
        if self.rel_tol < 0 or self.abs_tol < 0 or (self.rel_tol == 0 and self.abs_tol == 0):
            raise ValueError("tolerances must be non-negative and not both zero")
        if self.dt_min <= 0:
            raise ValueError("dt_min must be positive")
        if self.dt_init is not None and self.dt_init <= 0:
            raise ValueError("dt_init must be positive")
        ratio = (self.tf - self.t0) / self.dt_out
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(
                f"output interval {self.dt_out} does not evenly divide "
                f"the span [{self.t0}, {self.tf}]")

    @property
    def n_out(self) -> int:
        return int(round((self.tf - self.t0) / self.dt_out)) + 1

    def grid(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_out) * self.dt_out

    @property
    def first_step(self) -> float:
        return self.dt_out if self.dt_init is None else self.dt_init


@dataclass(frozen=True)
class IntegrationStats:
    n_accepted: int
    n_rejected: int
    dt_min_used: float
    dt_max_used: float


@dataclass
class Trajectory:
    """States sampled on the output grid, plus tower tip coordinates when
    the integrated system is the sprayer model."""

    grid: np.ndarray
    states: np.ndarray            # (n_out, dim)
    x2: np.ndarray | None         # tower tip horizontal offset
    y2: np.ndarray | None         # tower tip height
    excitation_log: np.ndarray | None   # (n_out, 4): ye1, ye2, ye1', ye2'
    stats: IntegrationStats

    @property
    def y1(self):
        return self.states[:, 0]

    @property
    def phi1(self):
        return self.states[:, 1]

    @property
    def phi2(self):
        return self.states[:, 2]

    @property
    def y1_dot(self):
        return self.states[:, 3]

    @property
    def phi1_dot(self):
        return self.states[:, 4]

    @property
    def phi2_dot(self):
        return self.states[:, 5]

    def channel(self, name: str) -> np.ndarray:
        if name in ("x2", "y2"):
            v = getattr(self, name)
            if v is None:
                raise ValueError(f"channel {name!r} not available")
            return v
        try:
            return getattr(self, name)
        except AttributeError:
            raise ValueError(f"unknown channel {name!r}") from None


def _tower_arrays(params, states):
    y1 = states[:, 0]
    p1 = states[:, 1]
    p2 = states[:, 2]
    x2 = -params.L1 * np.sin(p1) - params.L2 * np.sin(p2)
    y2 = y1 + params.L1 * np.cos(p1) + params.L2 * np.cos(p2)
    return x2, y2


def _excitation_evaluator(excitation) -> Callable[[float], object] | None:
    if excitation is None:
        return None
    if isinstance(excitation, road.RoadRealization):
        return lambda t: road.evaluate(excitation, t)
    if callable(excitation):
        return excitation
    raise TypeError("excitation must be None, a RoadRealization, or a callable")


def integrate(rhs_fn, y0, excitation=None, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate y' = rhs_fn(t, y, excitation_sample) over cfg's grid.

    rhs_fn closures produced by model.make_rhs carry the parameter vector
    and are dispatched to the compiled loop; any other callable runs
    through the generic Python loop with identical stepping logic.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    y0 = np.asarray(y0, dtype=float).ravel()
    fast = (
        getattr(rhs_fn, "pvec", None) is not None
        and y0.size == 6
        and (excitation is None or isinstance(excitation, road.RoadRealization))
    )
    if isinstance(excitation, road.RoadRealization):
        slack = 1e-9 * max(1.0, excitation.T)
        if cfg.t0 < -slack or cfg.tf > excitation.T + slack:
            raise ValueError(
                f"integration span [{cfg.t0}, {cfg.tf}] exceeds the road "
                f"horizon [0, {excitation.T}]")
    if fast:
        return _integrate_fast(rhs_fn, y0, excitation, cfg)
    return _integrate_generic(rhs_fn, y0, excitation, cfg)


def _integrate_fast(rhs_fn, y0, excitation, cfg) -> Trajectory:
    params = rhs_fn.params
    pvec = np.asarray(rhs_fn.pvec, dtype=float)
    if excitation is None:
        delta, tab = _kernels.empty_table(max(abs(cfg.t0), abs(cfg.tf)))
    else:
        delta = min(cfg.dt_out, _TABLE_DELTA)
        tab = excitation.table(delta)
    n_out = cfg.n_out
    out = np.empty((n_out, 6))
    exc = np.empty((n_out, 4))
    fin = np.zeros(7)
    status, nacc, nrej, hmin, hmax = _kernels.rkf45_loop(
        y0, cfg.t0, cfg.dt_out, cfg.rel_tol, cfg.abs_tol, cfg.dt_min,
        cfg.first_step, pvec, delta, tab, out, exc, fin)
    if status != 0:
        reason = "step-underflow" if status == 1 else "non-finite"
        raise IntegrationError(reason, float(fin[0]), fin[1:7])
    stats = IntegrationStats(int(nacc), int(nrej), float(hmin), float(hmax))
    x2, y2 = _tower_arrays(params, out)
    log = exc if excitation is not None else None
    return Trajectory(grid=cfg.grid(), states=out, x2=x2, y2=y2,
                      excitation_log=log, stats=stats)


def _integrate_generic(rhs_fn, y0, excitation, cfg) -> Trajectory:
    eval_exc = _excitation_evaluator(excitation)
    dim = y0.size
    n_out = cfg.n_out
    out = np.empty((n_out, dim))
    y = y0.copy()
    t = cfg.t0
    out[0] = y
    h = cfg.first_step
    nacc = nrej = 0
    hmin_seen = math.inf
    hmax_seen = 0.0
    k_out = 1
    rtol, atol = cfg.rel_tol, cfg.abs_tol

    def f(ti, yi):
        e = eval_exc(ti) if eval_exc is not None else None
        return np.asarray(rhs_fn(ti, yi, e), dtype=float)

    while k_out < n_out:
        t_target = cfg.t0 + k_out * cfg.dt_out
        clipped = False
        hs = h
        if t + hs >= t_target:
            hs = t_target - t
            clipped = True
        if hs < cfg.dt_min:
            raise IntegrationError("step-underflow", t, y)
        k1 = f(t, y)
        k2 = f(t + _C[0] * hs, y + hs * (_A[0][0] * k1))
        k3 = f(t + _C[1] * hs, y + hs * (_A[1][0] * k1 + _A[1][1] * k2))
        k4 = f(t + _C[2] * hs,
               y + hs * (_A[2][0] * k1 + _A[2][1] * k2 + _A[2][2] * k3))
        k5 = f(t + _C[3] * hs,
               y + hs * (_A[3][0] * k1 + _A[3][1] * k2 + _A[3][2] * k3
                         + _A[3][3] * k4))
        k6 = f(t + _C[4] * hs,
               y + hs * (_A[4][0] * k1 + _A[4][1] * k2 + _A[4][2] * k3
                         + _A[4][3] * k4 + _A[4][4] * k5))
        ynew = y + hs * (_B5[0] * k1 + _B5[2] * k3 + _B5[3] * k4
                         + _B5[4] * k5 + _B5[5] * k6)
        E = hs * (_E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5
                  + _E[5] * k6)
        if not np.all(np.isfinite(ynew)):
            raise IntegrationError("non-finite", t, y)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        errn = math.sqrt(float(np.mean((E / sc) ** 2)))
        if errn <= 1.0:
            nacc += 1
            hmin_seen = min(hmin_seen, hs)
            hmax_seen = max(hmax_seen, hs)
            if clipped:
                t = t_target
                out[k_out] = ynew
                k_out += 1
            else:
                t = t + hs
            y = ynew
            fac = 5.0
            if errn > 0.0:
                fac = min(5.0, max(0.2, 0.9 * errn ** -0.2))
            if not clipped:
                h = hs * fac
            else:
                h = max(h, hs * fac)
        else:
            nrej += 1
            fac = max(0.1, 0.9 * errn ** -0.2)
            h = hs * fac

    stats = IntegrationStats(nacc, nrej, hmin_seen, hmax_seen)
    params = getattr(rhs_fn, "params", None)
    x2 = y2 = None
    if params is not None and dim == 6:
        x2, y2 = _tower_arrays(params, out)
    log = None
    if isinstance(excitation, road.RoadRealization):
        g = cfg.grid()
        log = np.column_stack(road.evaluate_grid(excitation, g))
    elif eval_exc is not None:
        samples = [eval_exc(ti) for ti in cfg.grid()]
        log = np.array([[s.ye1, s.ye2, s.ye1_dot, s.ye2_dot] for s in samples])
    return Trajectory(grid=cfg.grid(), states=out, x2=x2, y2=y2,
                      excitation_log=log, stats=stats)


def energy_audit(traj: Trajectory, params: model.PhysicalParams) -> np.ndarray:
    """Total mechanical energy along the trajectory.

    Uses the logged grid excitation for the spring stretch terms; with no
    excitation the springs reference the undeformed road line.
    """
    if traj.states.shape[1] != 6:
        raise ValueError("energy audit requires the 6-component sprayer state")
    return model.mechanical_energy(params, traj.states, traj.excitation_log)
