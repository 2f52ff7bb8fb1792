"""Pairwise and per-channel features: MPC, band MSC and differential entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import (
    BandDefinition,
    CrossSpectrum,
    PhaseSeries,
    WelchParams,
    band_bins,
    welch_auto,
    welch_cross,
)
from .errors import (
    BandMismatch,
    ConfigError,
    EmptyBand,
    LengthMismatch,
    NonFiniteInput,
    SignalShorterThanWindow,
    SignalTooShort,
    ZeroVariance,
)

LOG_2PIE = np.log(2 * np.pi * np.e)


@dataclass(frozen=True)
class MpcValue:
    value: float
    n_samples: int


@dataclass(frozen=True)
class MscBandValue:
    value: float
    band: BandDefinition
    n_bins: int


@dataclass(frozen=True)
class DeValue:
    value: float
    band: BandDefinition | None = None
    n_windows: int = 1


def mpc(phase_i: PhaseSeries, phase_k: PhaseSeries) -> MpcValue:
    """Mean phase coherence of two phase series.

    Magnitude of the average unit phasor of the phase difference. Swapping the
    arguments negates the imaginary sum exactly, so the result is symmetric
    bit for bit.
    """
    a = np.asarray(getattr(phase_i, "values", phase_i), dtype=np.float64)
    b = np.asarray(getattr(phase_k, "values", phase_k), dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"phase lengths differ: {a.size} vs {b.size}")
    band_i = getattr(phase_i, "source_band", None)
    band_k = getattr(phase_k, "source_band", None)
    if band_i is not None and band_k is not None and band_i != band_k:
        raise BandMismatch(f"phases come from different bands: {band_i.name} vs {band_k.name}")
    n = a.size
    if n == 0:
        raise SignalTooShort("empty phase series")
    d = a - b
    re = np.sum(np.cos(d))
    im = np.sum(np.sin(d))
    return MpcValue(float(np.hypot(re, im) / n), n)


def msc_spectrum(x, y, fs: float, params: WelchParams = WelchParams()) -> CrossSpectrum:
    """Per-bin magnitude squared coherence ``|Sxy|^2 / (Sxx Syy)``.

    Bins with zero auto power are set to 0 and reported in ``flagged``.
    """
    sxy = welch_cross(x, y, fs, params)
    sxx = welch_auto(x, fs, params).values
    syy = welch_auto(y, fs, params).values
    num = sxy.values.real ** 2 + sxy.values.imag ** 2
    den = sxx * syy
    flagged = ~(den > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(flagged, 0.0, num / np.where(flagged, 1.0, den))
    return CrossSpectrum(sxy.frequencies_hz, values, flagged)


def band_msc(spectrum: CrossSpectrum, band: BandDefinition) -> MscBandValue:
    """Mean of the MSC bins whose centre frequency lies in [low, high)."""
    idx = band_bins(spectrum.frequencies_hz, band)
    if idx.size == 0:
        raise EmptyBand(f"no spectral bin falls inside {band.name} [{band.low_hz}, {band.high_hz})")
    return MscBandValue(float(np.mean(spectrum.values[idx])), band, int(idx.size))


def differential_entropy(window) -> float:
    """Gaussian differential entropy ``0.5 ln(2 pi e var)`` in nats (unbiased variance)."""
    w = np.asarray(window, dtype=np.float64)
    if w.size < 8:
        raise SignalTooShort(f"differential entropy needs >= 8 samples, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("window contains NaN or inf")
    var = np.var(w, ddof=1)
    if not var > 0:
        raise ZeroVariance("window has zero variance")
    return float(0.5 * (LOG_2PIE + np.log(var)))


def windowed_de(x, window_len: int) -> np.ndarray:
    """Differential entropy of every non-overlapping window along the last axis.

    ``x`` may be 1-D or C x N. A trailing partial window is dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    n_win = x.shape[-1] // window_len
    if n_win < 1:
        raise SignalShorterThanWindow(f"{x.shape[-1]} samples is shorter than one window of {window_len}")
    if window_len < 8:
        raise SignalTooShort(f"differential entropy needs >= 8 samples per window, got {window_len}")
    wins = x[..., : n_win * window_len].reshape(x.shape[:-1] + (n_win, window_len))
    var = np.var(wins, axis=-1, ddof=1)
    if not np.all(var > 0):
        raise ZeroVariance("a differential-entropy window has zero variance")
    return 0.5 * (LOG_2PIE + np.log(var))


def channel_de(band_signal, fs: float, window_s: float = 1.0, band: BandDefinition | None = None) -> DeValue:
    """Mean differential entropy over consecutive ``window_s``-second windows."""
    if window_s <= 0:
        raise ConfigError(f"window_s must be positive, got {window_s}")
    window_len = int(round(window_s * fs))
    values = windowed_de(np.asarray(band_signal, dtype=np.float64).ravel(), window_len)
    return DeValue(float(values.mean()), band, int(values.size))
