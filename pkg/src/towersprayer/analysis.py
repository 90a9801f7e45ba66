"""Post-processing: ensemble statistics, density estimates, exceedance
probability, and periodogram spectra.

Everything here is a deterministic function of its inputs. Density
estimation uses a Gaussian kernel with Silverman bandwidth throughout;
the time-averaged PDF pools per-instant standardized samples and applies
one shared kernel, which equals the equal-weight average of per-instant
estimates because standardization makes every instant's bandwidth
identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .montecarlo import Ensemble

__all__ = [
    "BandStatistics",
    "PdfEstimate",
    "PsdEstimate",
    "ProbabilitySeries",
    "SlopeFit",
    "ensemble_statistics",
    "pdf_estimate",
    "time_averaged_pdf",
    "large_vibration_probability",
    "psd_periodogram",
    "spectral_slope",
]

_PDF_POINTS = 512
_PDF_SPAN = 5.0
_MIN_SAMPLES = 30


@dataclass(frozen=True)
class BandStatistics:
    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    confidence: float
    channel: str


@dataclass(frozen=True)
class PdfEstimate:
    abscissa: np.ndarray
    density: np.ndarray
    t: float | str | None      # instant in seconds, or a tag like "time-averaged"
    norm_mean: float
    norm_std: float
    n_samples: int

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.abscissa))


@dataclass(frozen=True)
class PsdEstimate:
    freqs: np.ndarray
    power: np.ndarray
    fs: float
    segment_length: float
    n_segments: int
    window: str = "none"


@dataclass(frozen=True)
class ProbabilitySeries:
    grid: np.ndarray
    prob: np.ndarray
    threshold: float
    fraction: float
    time_average: float
    peak: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    f_lo: float
    f_hi: float
    n_bins: int


def ensemble_statistics(e: Ensemble, channel: str,
                        confidence: float = 0.95) -> BandStatistics:
    """Pointwise mean, unbiased std, and empirical quantile envelope."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if e.n_completed < 2:
        raise ValueError("ensemble statistics need at least 2 realizations")
    samples = e.channel_matrix(channel)
    mean = samples.mean(axis=0)
    std = samples.std(axis=0, ddof=1)
    alpha = (1.0 - confidence) / 2.0
    lower = np.quantile(samples, alpha, axis=0)
    upper = np.quantile(samples, 1.0 - alpha, axis=0)
    return BandStatistics(grid=e.grid, mean=mean, std=std, lower=lower,
                          upper=upper, confidence=confidence, channel=channel)


def _silverman_bandwidth(n: int) -> float:
    # unit-variance data in one dimension
    return (0.75 * n) ** (-0.2)


def pdf_estimate(samples, normalized: bool = True, t=None) -> PdfEstimate:
    """Gaussian-kernel density on a 512-point abscissa.

    With normalized=True the samples are shifted/scaled to zero mean and
    unit standard deviation first and the abscissa spans [-5, 5]; raw
    mode keeps the original units and spans mean +/- 5 std.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < _MIN_SAMPLES:
        raise ValueError(f"need at least {_MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    mu = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise ValueError("degenerate sample: zero variance")
    if normalized:
        z = (x - mu) / sd
        grid = np.linspace(-_PDF_SPAN, _PDF_SPAN, _PDF_POINTS)
        dens = gaussian_kde(z, bw_method="silverman")(grid)
    else:
        grid = np.linspace(mu - _PDF_SPAN * sd, mu + _PDF_SPAN * sd, _PDF_POINTS)
        dens = gaussian_kde(x, bw_method="silverman")(grid)
    return PdfEstimate(abscissa=grid, density=dens, t=t,
                       norm_mean=mu, norm_std=sd, n_samples=int(x.size))


def time_averaged_pdf(e: Ensemble, channel: str) -> PdfEstimate:
    """Equal-weight average over the grid of per-instant normalized PDFs.

    Instants whose cross-realization variance vanishes (the shared
    initial condition, a sigma = 0 road) carry no distributional
    information and are skipped. The pooled standardized samples are
    binned and convolved with the shared Silverman kernel, then the
    result is renormalized on the output abscissa.
    """
    samples = e.channel_matrix(channel)
    n_s = samples.shape[0]
    if n_s < 2:
        raise ValueError("time-averaged PDF needs at least 2 realizations")
    mu = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1)
    live = sd > 0.0
    if not np.any(live):
        raise ValueError("all instants are degenerate (zero variance)")
    z = ((samples[:, live] - mu[live]) / sd[live]).ravel()

    span = 8.0
    n_bins = 8192
    edges = np.linspace(-span, span, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    counts, _ = np.histogram(np.clip(z, -span, span), bins=edges)
    h = _silverman_bandwidth(n_s)
    half = int(np.ceil(6.0 * h / width))
    k = np.exp(-0.5 * (np.arange(-half, half + 1) * width / h) ** 2)
    k /= k.sum()
    smooth = np.convolve(counts.astype(float), k, mode="same")
    dens_centers = smooth / (z.size * width)

    grid = np.linspace(-_PDF_SPAN, _PDF_SPAN, _PDF_POINTS)
    dens = np.interp(grid, centers, dens_centers)
    dens /= np.trapezoid(dens, grid)
    return PdfEstimate(abscissa=grid, density=dens, t="time-averaged",
                       norm_mean=0.0, norm_std=1.0, n_samples=int(z.size))


def large_vibration_probability(e: Ensemble, fraction: float = 0.3,
                                channel: str = "x2") -> ProbabilitySeries:
    """Empirical exceedance probability P(|channel| > fraction * B1).

    Direct counting across realizations at each grid time; with a finite
    ensemble this is the same estimator as integrating the sample PDF
    tails, without kernel bias.
    """
    if fraction < 0:
        raise ValueError("fraction must be non-negative")
    samples = e.channel_matrix(channel)
    threshold = fraction * e.b1
    prob = np.mean(np.abs(samples) > threshold, axis=0)
    return ProbabilitySeries(grid=e.grid, prob=prob, threshold=threshold,
                             fraction=fraction,
                             time_average=float(prob.mean()),
                             peak=float(prob.max()))


def psd_periodogram(signal, fs: float, segment_length: float = 100.0) -> PsdEstimate:
    """One-sided Bartlett PSD over non-overlapping rectangular segments.

    Each segment has its own mean removed before the transform; scaling
    satisfies Parseval, sum(power) * df = mean segment variance.
    """
    x = np.asarray(signal, dtype=float).ravel()
    if fs <= 0:
        raise ValueError("fs must be positive")
    if segment_length <= 0:
        raise ValueError("segment_length must be positive")
    seg_n = int(round(segment_length * fs))
    if seg_n < 2:
        raise ValueError("segment too short for the sampling rate")
    n_seg = x.size // seg_n
    if n_seg < 2:
        raise ValueError(
            f"signal of {x.size} samples gives {n_seg} segment(s) of "
            f"{seg_n}; need at least 2")
    acc = np.zeros(seg_n // 2 + 1)
    for j in range(n_seg):
        seg = x[j * seg_n:(j + 1) * seg_n]
        seg = seg - seg.mean()
        spec = np.abs(np.fft.rfft(seg)) ** 2 / (fs * seg_n)
        spec[1:] *= 2.0
        if seg_n % 2 == 0:
            spec[-1] *= 0.5
        acc += spec
    power = acc / n_seg
    freqs = np.fft.rfftfreq(seg_n, d=1.0 / fs)
    return PsdEstimate(freqs=freqs, power=power, fs=fs,
                       segment_length=seg_n / fs, n_segments=n_seg)


def spectral_slope(psd: PsdEstimate, f_lo: float, f_hi: float) -> SlopeFit:
    """Least-squares log-log slope of the PSD over [f_lo, f_hi]."""
    if not 0 <= f_lo < f_hi:
        raise ValueError("need 0 <= f_lo < f_hi")
    mask = (psd.freqs >= f_lo) & (psd.freqs <= f_hi) & (psd.freqs > 0)
    mask &= psd.power > 0
    n = int(mask.sum())
    if n < 10:
        raise ValueError(f"only {n} usable bins in [{f_lo}, {f_hi}]; need >= 10")
    lx = np.log10(psd.freqs[mask])
    ly = np.log10(psd.power[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(slope=float(slope), intercept=float(intercept),
                    r_squared=r2, f_lo=f_lo, f_hi=f_hi, n_bins=n)
