"""Connectivity matrices and feature images.

Per band, the C x C matrix holds MPC above the diagonal, band MSC below it and
the channel's mean differential entropy on the diagonal. Three bands stack into
a C x C x 3 image (alpha, beta, gamma as the colour planes) whose diagonal is
rescaled into [0, 1].
"""
from __future__ import annotations

import json
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .config import PipelineConfig
from .dsp import (
    BandDefinition,
    analytic_phase,
    band_bins,
    bandpass,
    segment_spectra,
    trim_edges,
)
from .errors import CohgramError, ConfigError, EmptyBand, InputError, NumericalError, RecordingTooShort
from .features import windowed_de
from .ingestion import (
    FEATURE_TENSOR_SUFFIX,
    MultichannelRecording,
    TrialMeta,
    load_recording,
    save_tensor,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
IMAGE_AXES = ["row_channel", "col_channel", "band"]


@dataclass(frozen=True)
class ConnectivityMatrix:
    values: np.ndarray
    band: BandDefinition
    layout: str = "upper=MPC,lower=MSC,diag=DE"

    @property
    def mpc(self) -> np.ndarray:
        return np.triu(self.values, 1)

    @property
    def msc(self) -> np.ndarray:
        return np.tril(self.values, -1)

    @property
    def de(self) -> np.ndarray:
        return np.diag(self.values).copy()


@dataclass(frozen=True)
class FeatureImage:
    data: np.ndarray  # C x C x 3
    bands: tuple[BandDefinition, ...]
    channel_labels: tuple[str, ...] = ()
    meta: TrialMeta | None = None
    window_index: int | None = None
    raw_diagonal: np.ndarray | None = field(default=None, compare=False)

    @property
    def stem(self) -> str:
        base = self.meta.stem if self.meta is not None else "image"
        return base if self.window_index is None else f"{base}_{self.window_index}"

    def tensor_meta(self) -> dict:
        d = {
            "kind": "feature_image",
            "layout": "upper=MPC,lower=MSC,diag=DE",
            "bands": [b.to_dict() for b in self.bands],
            "channel_labels": list(self.channel_labels),
            "window_index": self.window_index,
        }
        if self.meta is not None:
            d.update(self.meta.to_dict())
        return d


# ------------------------------------------------------------------- matrices


def _band_planes(data: np.ndarray, fs: float, band: BandDefinition, config: PipelineConfig):
    filtered = bandpass(data, band, fs, config.filter)
    phases = trim_edges(analytic_phase(filtered, band).values, config.edge_fraction)
    upper = _kernels.mpc_upper(np.ascontiguousarray(np.cos(phases)), np.ascontiguousarray(np.sin(phases)))
    de = windowed_de(filtered, int(round(config.de_window_s * fs))).mean(axis=1)
    return filtered, upper, de


def band_msc_matrix(signals: np.ndarray, fs: float, band: BandDefinition, config: PipelineConfig) -> np.ndarray:
    """Upper triangle of band-averaged MSC for every channel pair."""
    idx = band_bins(config.welch.frequencies(fs), band)
    if idx.size == 0:
        raise EmptyBand(f"no Welch bin inside {band.name}")
    spec = segment_spectra(signals, config.welch)[..., idx]
    return _kernels.msc_upper(np.ascontiguousarray(spec))


def _shared_band(bands) -> BandDefinition:
    return BandDefinition("shared", min(b.low_hz for b in bands), max(b.high_hz for b in bands))


def _compose(upper_mpc: np.ndarray, upper_msc: np.ndarray, de: np.ndarray) -> np.ndarray:
    out = np.triu(upper_mpc, 1) + np.triu(upper_msc, 1).T
    np.fill_diagonal(out, de)
    return out


def assemble_band(recording: MultichannelRecording, band: BandDefinition, config: PipelineConfig = PipelineConfig()) -> ConnectivityMatrix:
    """MPC / MSC / raw DE matrix of one band (diagonal not yet normalised)."""
    fs = recording.sample_rate_hz
    band.check(fs)
    filtered, upper, de = _band_planes(recording.data, fs, band, config)
    if config.msc_shared_across_bands:
        centred = recording.data - recording.data.mean(axis=1, keepdims=True)
        msc = band_msc_matrix(centred, fs, _shared_band(config.bands), config)
    else:
        msc = band_msc_matrix(filtered, fs, band, config)
    return ConnectivityMatrix(_compose(upper, msc, de), band)


def assemble_planes(recording: MultichannelRecording, config: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """C x C x 3 stack of :func:`assemble_band` outputs, diagonal still in nats."""
    fs = recording.sample_rate_hz
    config.check_sample_rate(fs)
    shared = None
    if config.msc_shared_across_bands:
        centred = recording.data - recording.data.mean(axis=1, keepdims=True)
        shared = band_msc_matrix(centred, fs, _shared_band(config.bands), config)
    planes = []
    for band in config.bands:
        filtered, upper, de = _band_planes(recording.data, fs, band, config)
        msc = shared if shared is not None else band_msc_matrix(filtered, fs, band, config)
        planes.append(_compose(upper, msc, de))
    return np.stack(planes, axis=-1)


def normalize_diagonal(planes, mode: str = "minmax_per_image", bounds=None) -> np.ndarray:
    """Map each plane's diagonal into [0, 1]; off-diagonal entries are untouched.

    ``minmax_per_image`` sends a plane's smallest diagonal value to 0 and its
    largest to 1 (all-equal diagonals become 0.5). ``global`` maps ``bounds``
    ``(lo, hi)`` affinely onto [0, 1] and clips values outside.
    """
    out = np.array(planes, dtype=np.float64, copy=True)
    squeeze = out.ndim == 2
    if squeeze:
        out = out[..., None]
    n = out.shape[0]
    diag = np.arange(n)
    for p in range(out.shape[-1]):
        d = out[diag, diag, p]
        if mode == "minmax_per_image":
            lo, hi = d.min(), d.max()
            out[diag, diag, p] = 0.5 if hi == lo else (d - lo) / (hi - lo)
        elif mode == "global":
            if bounds is None:
                raise ConfigError("global mode needs bounds")
            lo, hi = bounds
            out[diag, diag, p] = np.clip((d - lo) / (hi - lo), 0.0, 1.0)
        else:
            raise ConfigError(f"unknown diagonal mode {mode!r}")
    return out[..., 0] if squeeze else out


def split_windows(recording: MultichannelRecording, config: PipelineConfig) -> list[tuple[int | None, MultichannelRecording]]:
    """Whole-trial recording, or sliding sub-recordings when windowing is on."""
    if config.window_s is None:
        return [(None, recording)]
    fs = recording.sample_rate_hz
    win = int(round(config.window_s * fs))
    stride = int(round(config.stride_s * fs))
    n = recording.n_samples
    if win > n:
        raise RecordingTooShort(f"window of {config.window_s} s exceeds the {recording.duration_s:g} s recording")
    out = []
    for w, start in enumerate(range(0, n - win + 1, stride)):
        sub = MultichannelRecording(recording.data[:, start : start + win], fs, recording.channel_labels, recording.meta)
        out.append((w, sub))
    return out


def build_images(recording: MultichannelRecording, config: PipelineConfig = PipelineConfig()) -> list[FeatureImage]:
    images = []
    for w, sub in split_windows(recording, config):
        planes = assemble_planes(sub, config)
        raw = np.stack([np.diag(planes[..., p]) for p in range(planes.shape[-1])], axis=-1)
        data = normalize_diagonal(planes, config.diagonal_mode, config.diagonal_bounds)
        images.append(FeatureImage(data, tuple(config.bands), recording.channel_labels, recording.meta, w, raw))
    return images


def build_image(recording: MultichannelRecording, config: PipelineConfig = PipelineConfig()) -> FeatureImage:
    """Single feature image for a whole trial (windowing ignored)."""
    if config.window_s is not None:
        config = replace(config, window_s=None, stride_s=None)
    return build_images(recording, config)[0]


# --------------------------------------------------------------------- export


def quantize_u8(values) -> np.ndarray:
    """round(v * 255) with halves rounded up; input must lie in [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def export_image(image: FeatureImage, path, format: str = "tensor") -> Path:
    """Write ``image`` as a COHGRAM1 tensor or an 8-bit RGB PNG (row i = channel i)."""
    path = Path(path)
    data = np.asarray(image.data)
    if not (np.all(np.isfinite(data)) and data.min() >= 0.0 and data.max() <= 1.0):
        raise ValueError("feature image entries must be finite and in [0, 1]")
    try:
        if format == "tensor":
            return save_tensor(path, data, meta=image.tensor_meta(), axes=IMAGE_AXES)
        if format == "png8":
            from PIL import Image

            Image.fromarray(quantize_u8(data), mode="RGB").save(path, format="PNG")
            return path
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    raise ValueError(f"unknown export format {format!r}")


# ----------------------------------------------------------------- batch mode


def _extract_one(path: str, out_dir: str, config_dict: dict, formats: tuple[str, ...]) -> list[dict]:
    config = PipelineConfig.from_dict(config_dict)
    rec = load_recording(path)
    config.check_sample_rate(rec.sample_rate_hz)
    written: list[Path] = []
    entries = []
    try:
        for image in build_images(rec, config):
            files = {}
            for fmt in formats:
                suffix = FEATURE_TENSOR_SUFFIX if fmt == "tensor" else ".png"
                p = export_image(image, Path(out_dir) / f"{image.stem}{suffix}", fmt)
                written.append(p)
                files[fmt] = p.name
            entries.append({
                "file": files.get("tensor") or files.get("png8"),
                "files": files,
                "source": Path(path).name,
                **rec.meta.to_dict(),
                "label_name": rec.meta.label.name.lower(),
                "window_index": image.window_index,
                "status": "ok",
            })
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return entries


def _failure(path, exc: BaseException) -> dict:
    kind = "numerical" if isinstance(exc, NumericalError) else "input"
    return {
        "file": None,
        "source": Path(path).name,
        "status": "failed",
        "error": f"{type(exc).__name__}: {exc}",
        "error_kind": kind,
    }


def extract_dataset(paths, out_dir, config: PipelineConfig = PipelineConfig(), jobs: int | None = None, formats=("tensor",)) -> dict:
    """Turn recording files into feature images plus a manifest.

    Trials are mapped over a process pool of ``jobs`` workers (``None`` means
    one per CPU, ``1`` runs in-process). Output bytes do not depend on ``jobs``.
    A failing trial leaves no files behind and is listed with
    ``status: "failed"``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [str(p) for p in paths]
    cfg = config.to_dict()
    formats = tuple(formats)
    jobs = jobs or os.cpu_count() or 1
    results: list[list[dict]] = []
    if jobs == 1 or len(paths) <= 1:
        for p in paths:
            try:
                results.append(_extract_one(p, str(out_dir), cfg, formats))
            except (CohgramError, OSError) as exc:
                log.error("%s: %s", p, exc)
                results.append([_failure(p, exc)])
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(jobs, len(paths)), mp_context=ctx) as pool:
            futures = [pool.submit(_extract_one, p, str(out_dir), cfg, formats) for p in paths]
            for p, fut in zip(paths, futures):
                try:
                    results.append(fut.result())
                except (CohgramError, OSError) as exc:
                    log.error("%s: %s", p, exc)
                    results.append([_failure(p, exc)])
    entries = [e for group in results for e in group]
    manifest = {
        "kind": "features",
        "version": 1,
        "config": cfg,
        "entries": entries,
        "n_failed": sum(e["status"] == "failed" for e in entries),
    }
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    return manifest


def write_manifest(manifest: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(manifest, dict) or "entries" not in manifest:
        raise InputError(f"{path} is not a manifest")
    return manifest
