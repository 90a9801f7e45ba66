"""Monte Carlo ensembles of road-excited trajectories.

Every realization i draws its road from an independent child stream of
one master seed, so the ensemble is reproducible as a whole and each
member is reproducible in isolation. Results are merged strictly in
realization order, which makes ensemble outputs byte-identical for any
thread count. Workers spend almost all their time inside compiled
kernels that release the GIL, so plain threads scale.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import integrator, model, road

__all__ = [
    "CHANNELS",
    "EnsembleConfig",
    "Ensemble",
    "realization_stream",
    "run_ensemble",
    "conv_metric",
    "convergence_study",
]

CHANNELS = ("x2", "y1", "phi1", "phi2")


@dataclass(frozen=True)
class EnsembleConfig:
    n_s: int
    master_seed: int
    physical: model.PhysicalParams
    road: road.RoadParams
    integ: integrator.IntegratorConfig
    keep_trajectories: bool = True

    def __post_init__(self):
        if self.n_s < 1 or self.n_s != int(self.n_s):
            raise ValueError("n_s must be a positive integer")
        if self.master_seed != int(self.master_seed) or self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        slack = 1e-9 * max(1.0, self.road.T_s)
        if self.integ.t0 < -slack or self.integ.tf > self.road.T_s + slack:
            raise ValueError(
                f"integration span [{self.integ.t0}, {self.integ.tf}] exceeds "
                f"the road horizon [0, {self.road.T_s}]")


def realization_stream(master_seed: int, index: int) -> np.random.SeedSequence:
    """Independent child stream for realization `index`.

    Children are identified by spawn key, not by draw order, so the
    stream for a given index never depends on how many realizations run
    or in which order.
    """
    if index < 0:
        raise ValueError("index must be non-negative")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


@dataclass
class Ensemble:
    """Merged ensemble results on a common output grid.

    channels holds the (n_completed, n_out) series per channel when
    trajectories were kept; moments always holds the running mean and sum
    of squared deviations per channel, so summary statistics survive even
    in streaming mode.
    """

    grid: np.ndarray
    channels: dict | None
    moments: dict
    n_completed: int
    seeds: list
    sq_integrals: np.ndarray | None
    conv_curve: np.ndarray | None
    extremes: dict | None
    b1: float
    config: EnsembleConfig | None = None
    failures: list = field(default_factory=list)

    @property
    def kept(self) -> bool:
        return self.channels is not None

    def channel_matrix(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise ValueError(f"unknown channel {name!r}")
        if self.channels is None:
            raise ValueError("trajectories were not kept for this ensemble")
        return self.channels[name]

    def mean(self, name: str) -> np.ndarray:
        return self.moments[name][0]

    def std(self, name: str) -> np.ndarray:
        """Per-time unbiased standard deviation across realizations."""
        if self.n_completed < 2:
            raise ValueError("standard deviation needs at least 2 realizations")
        return np.sqrt(self.moments[name][1] / (self.n_completed - 1))

    @classmethod
    def from_arrays(cls, grid, channels: dict, b1: float) -> "Ensemble":
        """Build an ensemble directly from per-channel sample matrices."""
        grid = np.asarray(grid, dtype=float)
        chans = {}
        n_s = None
        for name in CHANNELS:
            if name not in channels:
                continue
            a = np.asarray(channels[name], dtype=float)
            if a.ndim != 2 or a.shape[1] != len(grid):
                raise ValueError(f"channel {name!r} must be (n_s, {len(grid)})")
            if n_s is None:
                n_s = a.shape[0]
            elif a.shape[0] != n_s:
                raise ValueError("channels disagree on realization count")
            chans[name] = a
        if not chans:
            raise ValueError("at least one channel required")
        for name in CHANNELS:
            chans.setdefault(name, np.zeros((n_s, len(grid))))
        moments = {}
        for name, a in chans.items():
            mean = a.mean(axis=0)
            moments[name] = (mean, ((a - mean) ** 2).sum(axis=0))
        extremes = {name: np.column_stack([a.min(axis=1), a.max(axis=1)])
                    for name, a in chans.items()}
        return cls(grid=grid, channels=chans, moments=moments, n_completed=n_s,
                   seeds=[], sq_integrals=None, conv_curve=None,
                   extremes=extremes, b1=b1)


def _worker_factory(cfg: EnsembleConfig, basis):
    rhs_fn = model.make_rhs(cfg.physical)
    q0 = model.static_equilibrium(cfg.physical).as_array()

    def run_one(i: int):
        stream = realization_stream(cfg.master_seed, i)
        r = road.sample_realization(basis, cfg.road, stream)
        traj = integrator.integrate(rhs_fn, q0, r, cfg.integ)
        series = {
            "x2": traj.x2,
            "y1": traj.states[:, 0],
            "phi1": traj.states[:, 1],
            "phi2": traj.states[:, 2],
        }
        sq = float(np.trapezoid(
            series["y1"] ** 2 + series["phi1"] ** 2 + series["phi2"] ** 2,
            traj.grid))
        ext = {name: (float(v.min()), float(v.max()))
               for name, v in series.items()}
        return r.seed_info, series, sq, ext

    return run_one


def run_ensemble(cfg: EnsembleConfig, n_threads: int = 1,
                 failure_policy: str = "abort") -> Ensemble:
    """Run cfg.n_s realizations and merge them in index order.

    failure_policy "abort" re-raises the first integration failure;
    "skip" records it and continues with the remaining realizations.
    """
    if n_threads < 1:
        raise ValueError("n_threads must be >= 1")
    if failure_policy not in ("abort", "skip"):
        raise ValueError("failure_policy must be 'abort' or 'skip'")
    basis, _ = road.basis_for(cfg.road)
    worker = _worker_factory(cfg, basis)
    grid = cfg.integ.grid()
    n_out = len(grid)

    keep = cfg.keep_trajectories
    channels = ({name: np.empty((cfg.n_s, n_out)) for name in CHANNELS}
                if keep else None)
    mean = {name: np.zeros(n_out) for name in CHANNELS}
    m2 = {name: np.zeros(n_out) for name in CHANNELS}
    seeds = []
    sqs = []
    ext_rows = {name: [] for name in CHANNELS}
    failures = []
    n_done = 0

    def merge(res):
        nonlocal n_done
        seed_info, series, sq, ext = res
        for name in CHANNELS:
            v = series[name]
            if keep:
                channels[name][n_done] = v
            d = v - mean[name]
            mean[name] += d / (n_done + 1)
            m2[name] += d * (v - mean[name])
            ext_rows[name].append(ext[name])
        seeds.append(seed_info)
        sqs.append(sq)
        n_done += 1

    # bounded look-ahead keeps memory flat while the merge stays ordered
    window = max(2 * n_threads, 2)
    with ThreadPoolExecutor(max_workers=n_threads) as ex:
        pending = {}
        idx_iter = iter(range(cfg.n_s))
        for i in itertools.islice(idx_iter, window):
            pending[i] = ex.submit(worker, i)
        for next_idx in range(cfg.n_s):
            fut = pending.pop(next_idx)
            try:
                merge(fut.result())
            except integrator.IntegrationError as err:
                if failure_policy == "abort":
                    raise integrator.IntegrationError(
                        f"realization {next_idx}: {err.reason}",
                        err.t_last, err.last_state) from err
                failures.append((next_idx, err.reason))
            nxt = next(idx_iter, None)
            if nxt is not None:
                pending[nxt] = ex.submit(worker, nxt)

    if keep:
        if n_done < cfg.n_s:
            channels = {name: a[:n_done] for name, a in channels.items()}
        chan_out = channels
    else:
        chan_out = None
    sq_arr = np.asarray(sqs)
    conv = (np.sqrt(np.cumsum(sq_arr) / np.arange(1, n_done + 1))
            if n_done else np.empty(0))
    extremes = {name: np.asarray(rows) if rows else np.empty((0, 2))
                for name, rows in ext_rows.items()}
    return Ensemble(grid=grid, channels=chan_out,
                    moments={name: (mean[name], m2[name]) for name in CHANNELS},
                    n_completed=n_done, seeds=seeds, sq_integrals=sq_arr,
                    conv_curve=conv, extremes=extremes,
                    b1=cfg.physical.B1, config=cfg, failures=failures)


def _ensure_sq_integrals(e: Ensemble) -> np.ndarray:
    if e.sq_integrals is not None and len(e.sq_integrals) == e.n_completed:
        return e.sq_integrals
    if e.channels is None:
        raise ValueError("convergence metric needs stored trajectories")
    y1 = e.channels["y1"]
    p1 = e.channels["phi1"]
    p2 = e.channels["phi2"]
    sq = np.trapezoid(y1 ** 2 + p1 ** 2 + p2 ** 2, e.grid, axis=1)
    e.sq_integrals = sq
    return sq


def conv_metric(e: Ensemble, n: int | None = None) -> float:
    """Root-mean integrated response over the first n realizations.

    conv(n) = sqrt( (1/n) sum_i integral (y1^2 + phi1^2 + phi2^2) dt ),
    the running estimate whose flattening signals ensemble convergence.
    """
    sq = _ensure_sq_integrals(e)
    if n is None:
        n = e.n_completed
    if not 1 <= n <= len(sq):
        raise ValueError(f"n must be in [1, {len(sq)}]")
    return float(np.sqrt(np.mean(sq[:n])))


def convergence_study(cfg: EnsembleConfig, checkpoints, n_threads: int = 1,
                      ensemble: Ensemble | None = None):
    """conv(n) sampled at the given ensemble sizes.

    Returns (checkpoints, values, ensemble); the ensemble is run once at
    the largest checkpoint and reused for every smaller one.
    """
    ck = sorted(int(n) for n in checkpoints)
    if not ck or ck[0] < 1:
        raise ValueError("checkpoints must be positive integers")
    if ensemble is None:
        if ck[-1] > cfg.n_s:
            raise ValueError("largest checkpoint exceeds cfg.n_s")
        ensemble = run_ensemble(cfg, n_threads=n_threads)
    vals = np.array([conv_metric(ensemble, n) for n in ck])
    return np.asarray(ck), vals, ensemble
