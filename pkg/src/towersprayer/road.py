"""Random road excitation via Karhunen-Loeve decomposition.

The left/right tire displacement processes are stationary Gaussian with
mean mu_i, standard deviation sigma_i, and exponential correlation
exp(-|t2 - t1| / t_corr) where t_corr = a_corr / v. Sample paths are
synthesized from the spectral decomposition of the unit-variance
exponential kernel on [0, T]:

    ye_i(t) = mu_i + sigma_i * sum_n sqrt(lambda_n) phi_n(t) Y_{i,n}

with iid standard-normal coefficients Y. The kernel's eigenpairs have a
closed form: cosine/sine eigenfunctions centered on T/2 whose angular
frequencies solve two interleaved transcendental equations. The even
family solves  w*sin(w a) = c*cos(w a)  on (k*pi, k*pi + pi/2) (scaled by
a = T/2), the odd family solves  w*cos(w a) = -c*sin(w a)  on the
complementary half-brackets, and eigenvalues follow as
lambda = 2c / (w^2 + c^2). Each bracket contains exactly one root, so
bisection is exact and the basis needs no dense eigensolve.

The truncated series is smooth, so the tire velocities are defined as its
exact term-wise derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels

__all__ = [
    "RoadParams",
    "KLBasis",
    "RoadRealization",
    "Mode",
    "FredholmBracketError",
    "InsufficientModesError",
    "correlation_kernel",
    "solve_fredholm",
    "truncation_order",
    "basis_for",
    "sample_realization",
    "evaluate",
    "evaluate_grid",
]

# hard cap on automatic basis growth when tau drives the truncation
_MAX_AUTO_MODES = 1 << 22


class FredholmBracketError(RuntimeError):
    """A transcendental-root bracket failed to change sign (internal bug)."""


class InsufficientModesError(ValueError):
    """The computed basis cannot reach the requested energy fraction."""

    def __init__(self, requested, achieved, n_modes):
        super().__init__(
            f"{n_modes} modes reach energy fraction {achieved:.6f} "
            f"< requested {requested}")
        self.requested = requested
        self.achieved = achieved
        self.n_modes = n_modes


@dataclass(frozen=True)
class RoadParams:
    """Stochastic road model parameters (JSON-facing units)."""

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    a_corr_m: float   # correlation length (m)
    v_kmh: float      # vehicle speed (km/h)
    T_s: float        # process horizon (s)
    N_KL: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma must be non-negative")
        if self.a_corr_m <= 0:
            raise ValueError("a_corr_m must be positive")
        if self.v_kmh <= 0:
            raise ValueError("v_kmh must be positive")
        if self.T_s <= 0:
            raise ValueError("T_s must be positive")
        if (self.N_KL is None) == (self.tau is None):
            raise ValueError("exactly one of N_KL and tau must be set")
        if self.N_KL is not None and (self.N_KL != int(self.N_KL) or self.N_KL < 1):
            raise ValueError("N_KL must be a positive integer")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")

    @property
    def v_ms(self) -> float:
        return self.v_kmh / 3.6

    @property
    def c(self) -> float:
        """Inverse correlation time 1/(a_corr / v) in 1/s."""
        return self.v_ms / self.a_corr_m


class Mode(NamedTuple):
    lam: float
    omega: float
    parity: str    # "even" or "odd"
    norm: float


@dataclass(frozen=True)
class KLBasis:
    """Eigenpairs of the unit exponential kernel on [0, T].

    Arrays are ordered by decreasing eigenvalue; parity alternates
    starting even. energy_total is the exact trace of the kernel, T.
    """

    c: float
    T: float
    omega: np.ndarray    # angular frequencies (rad/s)
    lam: np.ndarray      # eigenvalues (s)
    parity: np.ndarray   # 0 even, 1 odd
    norm: np.ndarray     # L2 normalization constants
    energy_total: float

    @property
    def n_modes(self) -> int:
        return len(self.lam)

    @property
    def modes(self) -> list[Mode]:
        return [Mode(float(l), float(w), "even" if p == 0 else "odd", float(n))
                for l, w, p, n in zip(self.lam, self.omega, self.parity, self.norm)]

    def eval_modes(self, t, n: int | None = None):
        """Eigenfunction matrix F and its derivative Fd at times t.

        Shapes (len(t), n). Vectorized exact trig evaluation; the
        compiled integration path uses interpolation tables instead.
        """
        n = self.n_modes if n is None else n
        ts = np.atleast_1d(np.asarray(t, dtype=float)) - self.T / 2.0
        w = self.omega[:n]
        ph = np.outer(ts, w)
        S, Cc = np.sin(ph), np.cos(ph)
        even = self.parity[:n] == 0
        F = np.where(even[None, :], Cc, S) / self.norm[None, :n]
        Fd = np.where(even[None, :], -S * w[None, :], Cc * w[None, :]) / self.norm[None, :n]
        return F, Fd


def correlation_kernel(t1, t2, c: float):
    """Unit-variance exponential correlation exp(-c |t2 - t1|)."""
    if c <= 0:
        raise ValueError("c must be positive")
    return np.exp(-c * np.abs(np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float)))


def _bisect_roots(f, lo, hi, iters=100):
    flo = f(lo)
    fhi = f(hi)
    bad = np.sign(flo) == np.sign(fhi)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise FredholmBracketError(
            f"bracket {i}: f({lo[i]:.6g}) = {flo[i]:.6g} and "
            f"f({hi[i]:.6g}) = {fhi[i]:.6g} do not change sign")
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def solve_fredholm(c: float, T: float, n_modes: int) -> KLBasis:
    """First n_modes eigenpairs of the exponential kernel on [0, T]."""
    if c <= 0 or T <= 0:
        raise ValueError("c and T must be positive")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    a = T / 2.0
    ca = c * a
    k = np.arange((n_modes + 1) // 2, dtype=float)
    # 1e-12 shaves the tangent poles off the bracket ends
    xe = _bisect_roots(lambda x: x * np.sin(x) - ca * np.cos(x),
                       k * np.pi + 1e-300, k * np.pi + np.pi / 2 - 1e-12)
    xo = _bisect_roots(lambda x: x * np.cos(x) + ca * np.sin(x),
                       k * np.pi + np.pi / 2 + 1e-12, (k + 1) * np.pi - 1e-12)
    x = np.empty(2 * len(k))
    x[0::2] = xe
    x[1::2] = xo
    x = x[:n_modes]
    omega = x / a
    lam = 2.0 * c / (omega ** 2 + c ** 2)
    parity = np.zeros(n_modes, dtype=np.uint8)
    parity[1::2] = 1
    half = np.sin(2.0 * omega * a) / (2.0 * omega)
    norm = np.where(parity == 0, np.sqrt(a + half), np.sqrt(a - half))
    return KLBasis(c=c, T=T, omega=omega, lam=lam, parity=parity, norm=norm,
                   energy_total=T)


def truncation_order(basis: KLBasis, tau: float) -> int:
    """Smallest N whose eigenvalue partial sum reaches tau * energy_total."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    cum = np.cumsum(basis.lam) / basis.energy_total
    if cum[-1] < tau:
        raise InsufficientModesError(tau, float(cum[-1]), basis.n_modes)
    return int(np.searchsorted(cum, tau)) + 1


def _estimate_modes_for(c: float, T: float, tau: float) -> int:
    # asymptotic tail: omega_N ~ N pi / T, fraction 1 - (2/pi) acot(w/c)
    n = (T * c / math.pi) * math.tan(math.pi * tau / 2.0)
    return max(8, int(n * 1.05) + 16)


def basis_for(params: RoadParams):
    """Basis sized for the parameter set; returns (basis, n_active_modes).

    When N_KL drives, the basis carries exactly N_KL modes. When tau
    drives, the basis is grown until the partial sum reaches tau.
    """
    c, T = params.c, params.T_s
    if params.N_KL is not None:
        n = int(params.N_KL)
        return solve_fredholm(c, T, n), n
    guess = _estimate_modes_for(c, T, params.tau)
    while True:
        if guess > _MAX_AUTO_MODES:
            raise InsufficientModesError(params.tau, float("nan"), guess)
        basis = solve_fredholm(c, T, guess)
        try:
            return basis, truncation_order(basis, params.tau)
        except InsufficientModesError:
            guess *= 2


def tau_achieved(basis: KLBasis, n: int) -> float:
    """Energy fraction captured by the first n modes."""
    if not 1 <= n <= basis.n_modes:
        raise ValueError("n out of range")
    return float(np.sum(basis.lam[:n]) / basis.energy_total)


@dataclass
class RoadRealization:
    """One sampled left/right road pair on [0, T]."""

    basis: KLBasis
    Y1: np.ndarray
    Y2: np.ndarray
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    seed_info: tuple
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = len(self.Y1)
        if len(self.Y2) != n:
            raise ValueError("coefficient vectors must have equal length")
        if n > self.basis.n_modes:
            raise ValueError("more coefficients than basis modes")
        if not (np.all(np.isfinite(self.Y1)) and np.all(np.isfinite(self.Y2))):
            raise ValueError("coefficients must be finite")

    @property
    def n_modes(self) -> int:
        return len(self.Y1)

    @property
    def T(self) -> float:
        return self.basis.T

    def coefficients(self):
        """Per-tire series coefficients sigma * sqrt(lambda) * Y."""
        n = self.n_modes
        sq = np.sqrt(self.basis.lam[:n])
        return self.sigma1 * sq * self.Y1, self.sigma2 * sq * self.Y2

    def table(self, delta: float) -> np.ndarray:
        """Node table (values and two derivatives) for the compiled path."""
        key = round(delta, 15)
        tab = self._tables.get(key)
        if tab is None:
            n = self.n_modes
            m = int(math.ceil(self.T / delta)) + 1
            c1, c2 = self.coefficients()
            tab = _kernels.build_table(
                self.basis.omega[:n], self.basis.parity[:n].astype(np.uint8),
                self.basis.norm[:n], c1, c2, self.mu1, self.mu2,
                self.T, delta, m)
            self._tables[key] = tab
        return tab


def sample_realization(basis: KLBasis, params: RoadParams, rng_stream) -> RoadRealization:
    """Draw one realization from rng_stream (a numpy SeedSequence).

    The left and right tires use disjoint child substreams so the two
    processes are independent, and the draw depends only on the stream
    identity, never on sampling order elsewhere.
    """
    if params.N_KL is not None:
        n = int(params.N_KL)
        if n > basis.n_modes:
            raise InsufficientModesError(
                float("nan"), float("nan"), basis.n_modes)
    else:
        n = truncation_order(basis, params.tau)
    left, right = rng_stream.spawn(2)
    y1 = np.random.Generator(np.random.Philox(left)).standard_normal(n)
    y2 = np.random.Generator(np.random.Philox(right)).standard_normal(n)
    entropy = rng_stream.entropy
    spawn_key = tuple(int(v) for v in rng_stream.spawn_key)
    return RoadRealization(basis=basis, Y1=y1, Y2=y2,
                           mu1=params.mu1, mu2=params.mu2,
                           sigma1=params.sigma1, sigma2=params.sigma2,
                           seed_info=(entropy, spawn_key))


def _check_horizon(r: RoadRealization, t: np.ndarray):
    slack = 1e-9 * max(1.0, r.T)
    if np.any(t < -slack) or np.any(t > r.T + slack):
        raise ValueError(
            f"time outside the process horizon [0, {r.T}]: "
            f"range [{t.min():.6g}, {t.max():.6g}]")


def evaluate(r: RoadRealization, t: float):
    """Excitation sample at scalar time t (exact series evaluation)."""
    from .model import ExcitationSample

    ta = np.asarray([t], dtype=float)
    _check_horizon(r, ta)
    F, Fd = r.basis.eval_modes(ta, r.n_modes)
    c1, c2 = r.coefficients()
    return ExcitationSample(
        ye1=float(r.mu1 + F[0] @ c1),
        ye2=float(r.mu2 + F[0] @ c2),
        ye1_dot=float(Fd[0] @ c1),
        ye2_dot=float(Fd[0] @ c2),
        t=float(t),
    )


def evaluate_grid(r: RoadRealization, t):
    """Vectorized exact evaluation: arrays (ye1, ye2, ye1_dot, ye2_dot)."""
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    _check_horizon(r, ta)
    c1, c2 = r.coefficients()
    # chunked so long grids do not materialize a huge mode matrix
    ye1 = np.empty(len(ta))
    ye2 = np.empty(len(ta))
    yd1 = np.empty(len(ta))
    yd2 = np.empty(len(ta))
    step = max(1, int(4e6 // max(1, r.n_modes)))
    for i in range(0, len(ta), step):
        F, Fd = r.basis.eval_modes(ta[i:i + step], r.n_modes)
        ye1[i:i + step] = r.mu1 + F @ c1
        ye2[i:i + step] = r.mu2 + F @ c2
        yd1[i:i + step] = Fd @ c1
        yd2[i:i + step] = Fd @ c2
    return ye1, ye2, yd1, yd2
