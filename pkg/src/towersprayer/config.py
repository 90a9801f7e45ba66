"""JSON run configuration with strict validation.

A config file may override any subset of the defaults below; unknown keys
are rejected at every nesting level so typos fail loudly instead of
silently running the default. The road section accepts exactly one of
N_KL (mode count) and tau (energy fraction); supplying tau alone replaces
the default mode count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .integrator import IntegratorConfig
from .model import PhysicalParams
from .road import RoadParams

__all__ = [
    "ConfigError",
    "EnsembleSettings",
    "AnalysisSettings",
    "RunConfig",
    "default_config",
    "parse_config",
    "load_config",
    "resolved_dict",
    "config_hash",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleSettings:
    n_s: int = 256
    master_seed: int = 2026
    keep_trajectories: bool = True
    failure_policy: str = "abort"

    def __post_init__(self):
        if not isinstance(self.n_s, int) or isinstance(self.n_s, bool) or self.n_s < 1:
            raise ConfigError("ensemble.n_s must be a positive integer")
        if (not isinstance(self.master_seed, int)
                or isinstance(self.master_seed, bool) or self.master_seed < 0):
            raise ConfigError("ensemble.master_seed must be a non-negative integer")
        if not isinstance(self.keep_trajectories, bool):
            raise ConfigError("ensemble.keep_trajectories must be a boolean")
        if self.failure_policy not in ("abort", "skip"):
            raise ConfigError("ensemble.failure_policy must be 'abort' or 'skip'")


@dataclass(frozen=True)
class AnalysisSettings:
    confidence: float = 0.95
    threshold_fraction: float = 0.3
    psd_segment_s: float = 100.0
    psd_horizon_s: float = 600.0
    pdf_instants_s: tuple = (7.5, 15.0, 22.5, 30.0)
    slope_band_hz: tuple = (0.3, 4.0)

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError("analysis.confidence must lie in (0, 1)")
        if self.threshold_fraction < 0:
            raise ConfigError("analysis.threshold_fraction must be non-negative")
        if self.psd_segment_s <= 0 or self.psd_horizon_s <= 0:
            raise ConfigError("analysis PSD lengths must be positive")
        inst = tuple(float(t) for t in self.pdf_instants_s)
        object.__setattr__(self, "pdf_instants_s", inst)
        band = tuple(float(f) for f in self.slope_band_hz)
        if len(band) != 2 or not 0 <= band[0] < band[1]:
            raise ConfigError("analysis.slope_band_hz must be [f_lo, f_hi] with 0 <= f_lo < f_hi")
        object.__setattr__(self, "slope_band_hz", band)


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalParams
    road: RoadParams
    integ: IntegratorConfig
    ensemble: EnsembleSettings
    analysis: AnalysisSettings
    output_dir: str = "out"


_PHYSICAL_DEFAULTS = dict(
    m1=6500.0, m2=800.0, I1=6850.0, I2=6250.0, L1=0.2, L2=2.4,
    k1=465.0e3, k2=465.0e3, c1=5.6e3, c2=5.6e3, B1=0.85, B2=0.85,
    kT=100.0e3, cT=40.0e3, g_acc=9.81)
_ROAD_DEFAULTS = dict(
    mu1=0.5, mu2=0.5, sigma1=0.175, sigma2=0.175,
    a_corr_m=1.0, v_kmh=12.0, T_s=30.0, N_KL=403, tau=None)
_INTEG_DEFAULTS = dict(
    t0=0.0, tf=30.0, dt_out=1e-3, rel_tol=1e-6, abs_tol=1e-8,
    dt_min=1e-9, dt_init=None)
_ENSEMBLE_DEFAULTS = dict(
    n_s=256, master_seed=2026, keep_trajectories=True, failure_policy="abort")
_ANALYSIS_DEFAULTS = dict(
    confidence=0.95, threshold_fraction=0.3, psd_segment_s=100.0,
    psd_horizon_s=600.0, pdf_instants_s=[7.5, 15.0, 22.5, 30.0],
    slope_band_hz=[0.3, 4.0])

_SECTIONS = ("physical", "road", "integ", "ensemble", "analysis", "output_dir")


def default_config() -> RunConfig:
    return parse_config({})


def _merge_section(name: str, defaults: dict, user: dict) -> dict:
    if not isinstance(user, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    unknown = sorted(set(user) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    merged = dict(defaults)
    merged.update(user)
    return merged


def _build(cls, name: str, kwargs: dict):
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        raise ConfigError(f"invalid {name} configuration: {err}") from err


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")

    phys = _merge_section("physical", _PHYSICAL_DEFAULTS, data.get("physical", {}))
    road_user = data.get("road", {})
    road = _merge_section("road", _ROAD_DEFAULTS, road_user)
    # a user-supplied tau replaces the default mode count; both together
    # is a contradiction the road model rejects
    if isinstance(road_user, dict) and "tau" in road_user and "N_KL" not in road_user:
        if road_user["tau"] is not None:
            road["N_KL"] = None
    integ = _merge_section("integ", _INTEG_DEFAULTS, data.get("integ", {}))
    ens = _merge_section("ensemble", _ENSEMBLE_DEFAULTS, data.get("ensemble", {}))
    ana = _merge_section("analysis", _ANALYSIS_DEFAULTS, data.get("analysis", {}))
    out_dir = data.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output_dir must be a non-empty string")

    return RunConfig(
        physical=_build(PhysicalParams, "physical", phys),
        road=_build(RoadParams, "road", road),
        integ=_build(IntegratorConfig, "integ", integ),
        ensemble=_build(EnsembleSettings, "ensemble", ens),
        analysis=_build(AnalysisSettings, "analysis", ana),
        output_dir=out_dir,
    )


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return default_config()
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"{path}: malformed JSON at line {err.lineno}, column {err.colno}: "
            f"{err.msg}") from err
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(data)


def with_overrides(cfg: RunConfig, master_seed: int | None = None,
                   output_dir: str | None = None) -> RunConfig:
    if master_seed is not None:
        cfg = dataclasses.replace(
            cfg, ensemble=dataclasses.replace(cfg.ensemble, master_seed=master_seed))
    if output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=output_dir)
    return cfg


def resolved_dict(cfg: RunConfig) -> dict:
    """Fully materialized config (defaults included) for echo files."""
    return {
        "physical": dataclasses.asdict(cfg.physical),
        "road": dataclasses.asdict(cfg.road),
        "integ": dataclasses.asdict(cfg.integ),
        "ensemble": dataclasses.asdict(cfg.ensemble),
        "analysis": {
            "confidence": cfg.analysis.confidence,
            "threshold_fraction": cfg.analysis.threshold_fraction,
            "psd_segment_s": cfg.analysis.psd_segment_s,
            "psd_horizon_s": cfg.analysis.psd_horizon_s,
            "pdf_instants_s": list(cfg.analysis.pdf_instants_s),
            "slope_band_hz": list(cfg.analysis.slope_band_hz),
        },
        "output_dir": cfg.output_dir,
    }


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(resolved_dict(cfg), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
