"""Pipeline configuration, serialisable to a single JSON file."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .dsp import DEFAULT_BANDS, BandDefinition, FilterSpec, WelchParams
from .errors import CohgramError, ConfigError

DIAGONAL_MODES = ("minmax_per_image", "global")


@dataclass(frozen=True)
class PipelineConfig:
    bands: tuple[BandDefinition, ...] = DEFAULT_BANDS
    filter: FilterSpec = field(default_factory=FilterSpec)
    welch: WelchParams = field(default_factory=WelchParams)
    de_window_s: float = 1.0
    edge_fraction: float = 0.05
    # None = one image per trial; otherwise sliding windows (seconds)
    window_s: float | None = None
    stride_s: float | None = None
    diagonal_mode: str = "minmax_per_image"
    diagonal_bounds: tuple[float, float] | None = None
    msc_shared_across_bands: bool = False
    seed: int = 0

    def __post_init__(self):
        if len(self.bands) != 3:
            raise ConfigError(f"a feature image needs exactly 3 bands, got {len(self.bands)}")
        if len({b.name for b in self.bands}) != 3:
            raise ConfigError("band names must be unique")
        if self.de_window_s <= 0:
            raise ConfigError("de_window_s must be positive")
        if not (0 <= self.edge_fraction < 0.5):
            raise ConfigError("edge_fraction must lie in [0, 0.5)")
        if (self.window_s is None) != (self.stride_s is None):
            raise ConfigError("window_s and stride_s must be given together")
        if self.window_s is not None and (self.window_s <= 0 or self.stride_s <= 0):
            raise ConfigError("window_s and stride_s must be positive")
        if self.diagonal_mode not in DIAGONAL_MODES:
            raise ConfigError(f"diagonal_mode must be one of {DIAGONAL_MODES}")
        if self.diagonal_mode == "global":
            if self.diagonal_bounds is None:
                raise ConfigError("global diagonal mode needs diagonal_bounds")
            lo, hi = self.diagonal_bounds
            if not hi > lo:
                raise ConfigError("diagonal_bounds must satisfy lo < hi")

    def check_sample_rate(self, fs: float) -> None:
        for band in self.bands:
            band.check(fs)

    def to_dict(self) -> dict:
        return {
            "bands": [b.to_dict() for b in self.bands],
            "filter": {"order": self.filter.order},
            "welch": {"segment_len": self.welch.segment_len, "overlap": self.welch.overlap},
            "de_window_s": self.de_window_s,
            "edge_fraction": self.edge_fraction,
            "window_s": self.window_s,
            "stride_s": self.stride_s,
            "diagonal_mode": self.diagonal_mode,
            "diagonal_bounds": list(self.diagonal_bounds) if self.diagonal_bounds else None,
            "msc_shared_across_bands": self.msc_shared_across_bands,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "bands" in d:
                kw["bands"] = tuple(BandDefinition(str(b["name"]), float(b["low_hz"]), float(b["high_hz"])) for b in d["bands"])
            if "filter" in d:
                kw["filter"] = FilterSpec(int(d["filter"].get("order", 4)))
            if "welch" in d:
                w = d["welch"]
                kw["welch"] = WelchParams(int(w.get("segment_len", 256)), float(w.get("overlap", 0.5)))
            for key in ("de_window_s", "edge_fraction"):
                if key in d:
                    kw[key] = float(d[key])
            for key in ("window_s", "stride_s"):
                if d.get(key) is not None:
                    kw[key] = float(d[key])
            if "diagonal_mode" in d:
                kw["diagonal_mode"] = str(d["diagonal_mode"])
            if d.get("diagonal_bounds") is not None:
                lo, hi = d["diagonal_bounds"]
                kw["diagonal_bounds"] = (float(lo), float(hi))
            if "msc_shared_across_bands" in d:
                kw["msc_shared_across_bands"] = bool(d["msc_shared_across_bands"])
            if "seed" in d:
                kw["seed"] = int(d["seed"])
            return cls(**kw)
        except CohgramError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"malformed config: {exc!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path) -> PipelineConfig:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError("config file must hold a JSON object")
    return PipelineConfig.from_dict(d)
