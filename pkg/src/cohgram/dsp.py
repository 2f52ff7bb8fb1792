"""Band-pass filtering, analytic-signal phase and Welch spectra."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import (
    BandExceedsNyquist,
    ConfigError,
    LengthMismatch,
    NonFiniteInput,
    SignalTooShort,
    TooFewSegments,
)

MIN_WELCH_SEGMENTS = 4


@dataclass(frozen=True)
class BandDefinition:
    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not (0 < self.low_hz < self.high_hz):
            raise ConfigError(f"band {self.name!r}: need 0 < low_hz < high_hz, got {self.low_hz}, {self.high_hz}")

    def check(self, fs: float) -> None:
        if self.high_hz >= fs / 2:
            raise BandExceedsNyquist(f"band {self.name!r} upper edge {self.high_hz} Hz >= Nyquist {fs / 2} Hz")

    def to_dict(self) -> dict:
        return {"name": self.name, "low_hz": self.low_hz, "high_hz": self.high_hz}


ALPHA = BandDefinition("alpha", 8.0, 13.0)
BETA = BandDefinition("beta", 13.0, 30.0)
GAMMA = BandDefinition("gamma", 30.0, 70.0)
DEFAULT_BANDS = (ALPHA, BETA, GAMMA)


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth band-pass applied forward and backward.

    ``order`` is the design order handed to the Butterworth prototype; the
    two passes double the effective order.
    """

    order: int = 4

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise ConfigError(f"filter order must be even and >= 2, got {self.order}")

    @property
    def padlen(self) -> int:
        return 3 * (self.order + 1)


@dataclass(frozen=True)
class WelchParams:
    segment_len: int = 256
    overlap: float = 0.5

    def __post_init__(self):
        if self.segment_len < 2:
            raise ConfigError(f"segment_len must be >= 2, got {self.segment_len}")
        if not (0 <= self.overlap < 1):
            raise ConfigError(f"overlap must lie in [0, 1), got {self.overlap}")

    @property
    def nfft(self) -> int:
        return self.segment_len

    @property
    def step(self) -> int:
        return max(1, self.segment_len - int(round(self.overlap * self.segment_len)))

    def n_segments(self, n: int) -> int:
        if n < self.segment_len:
            return 0
        return 1 + (n - self.segment_len) // self.step

    def frequencies(self, fs: float) -> np.ndarray:
        return np.fft.rfftfreq(self.nfft, d=1.0 / fs)


@dataclass(frozen=True)
class PhaseSeries:
    values: np.ndarray
    source_band: BandDefinition | None = None

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class CrossSpectrum:
    frequencies_hz: np.ndarray
    values: np.ndarray
    # bins where a ratio was undefined (MSC with zero auto power)
    flagged: np.ndarray | None = None


# ------------------------------------------------------------------ filtering


@lru_cache(maxsize=64)
def design_bandpass(low_hz: float, high_hz: float, fs: float, order: int) -> np.ndarray:
    return sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")


def bandpass(x, band: BandDefinition, fs: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Zero-phase Butterworth band-pass of one channel (or each row of a 2-D array).

    The channel mean is removed first; edges are padded with an odd reflection of
    ``spec.padlen`` samples.
    """
    band.check(fs)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] <= spec.padlen:
        raise SignalTooShort(f"need more than {spec.padlen} samples to filter, got {x.shape[-1]}")
    sos = design_bandpass(float(band.low_hz), float(band.high_hz), float(fs), spec.order)
    centred = x - x.mean(axis=-1, keepdims=True)
    return sps.sosfiltfilt(sos, centred, axis=-1, padtype="odd", padlen=spec.padlen)


# ---------------------------------------------------------------------- phase


def analytic_signal(x) -> np.ndarray:
    """FFT analytic signal along the last axis: keep DC (and Nyquist), double
    positive frequencies, zero negative ones."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    spectrum = np.fft.fft(x, axis=-1)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1 : n // 2] = 2.0
    else:
        h[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * h, axis=-1)


def wrap_phase(phi) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    phi = np.asarray(phi, dtype=np.float64)
    return np.where(phi <= -np.pi, phi + 2 * np.pi, phi)


def analytic_phase(x, band: BandDefinition | None = None) -> PhaseSeries:
    """Instantaneous phase of the analytic signal, in (-pi, pi]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 4:
        raise SignalTooShort(f"need at least 4 samples for a phase estimate, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("signal contains NaN or inf")
    return PhaseSeries(wrap_phase(np.angle(analytic_signal(x))), band)


def trim_edges(values, fraction: float) -> np.ndarray:
    """Drop ``fraction`` of the samples at each end of the last axis."""
    if not (0 <= fraction < 0.5):
        raise ConfigError(f"edge fraction must lie in [0, 0.5), got {fraction}")
    values = np.asarray(values)
    n = values.shape[-1]
    cut = int(np.floor(fraction * n))
    return values[..., cut : n - cut]


# ---------------------------------------------------------------------- welch


@lru_cache(maxsize=16)
def _hann(n: int) -> np.ndarray:
    w = sps.get_window("hann", n)
    w.setflags(write=False)
    return w


def segment_spectra(x, params: WelchParams) -> np.ndarray:
    """Windowed, mean-detrended one-sided FFTs of every Welch segment.

    ``x`` is 1-D (returns S x K) or C x N (returns C x S x K).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    n_seg = params.n_segments(n)
    if n_seg < MIN_WELCH_SEGMENTS:
        raise TooFewSegments(
            f"{n} samples give {n_seg} segments of {params.segment_len}; need {MIN_WELCH_SEGMENTS}"
        )
    starts = np.arange(n_seg) * params.step
    idx = starts[:, None] + np.arange(params.segment_len)[None, :]
    segs = x[..., idx]
    segs = segs - segs.mean(axis=-1, keepdims=True)
    return np.fft.rfft(segs * _hann(params.segment_len), n=params.nfft, axis=-1)


def _density_scale(fs: float, params: WelchParams) -> np.ndarray:
    w = _hann(params.segment_len)
    k = params.nfft // 2 + 1
    scale = np.full(k, 2.0 / (fs * np.sum(w * w)))
    scale[0] /= 2.0
    if params.nfft % 2 == 0:
        scale[-1] /= 2.0
    return scale


def _average_products(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # conj(a) * b averaged over segments; identical arithmetic for auto and cross
    re = a.real * b.real + a.imag * b.imag
    im = a.real * b.imag - a.imag * b.real
    return re.mean(axis=0) + 1j * im.mean(axis=0)


def welch_auto(x, fs: float, params: WelchParams = WelchParams()) -> CrossSpectrum:
    """One-sided Welch power spectral density (units^2 / Hz)."""
    spec = segment_spectra(np.asarray(x, dtype=np.float64).ravel(), params)
    power = _average_products(spec, spec).real
    return CrossSpectrum(params.frequencies(fs), power * _density_scale(fs, params))


def welch_cross(x, y, fs: float, params: WelchParams = WelchParams()) -> CrossSpectrum:
    """One-sided Welch cross-spectral density ``E[conj(X) Y]``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    sx = segment_spectra(x, params)
    sy = segment_spectra(y, params)
    return CrossSpectrum(params.frequencies(fs), _average_products(sx, sy) * _density_scale(fs, params))


def band_bins(freqs, band: BandDefinition) -> np.ndarray:
    """Indices of bins whose centre frequency lies in [low, high)."""
    freqs = np.asarray(freqs)
    return np.flatnonzero((freqs >= band.low_hz) & (freqs < band.high_hz))
