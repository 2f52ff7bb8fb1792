"""Hot loops: pairwise MPC, pairwise band MSC, oscillator phase integration.

Each kernel exists twice, as a numba ``@njit`` function and as a pure-numpy
fallback with the same signature. The exported names (``mpc_upper``,
``msc_upper``, ``oscillator_phases``) point at the numba versions unless numba
is missing or the environment variable ``COHGRAM_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``. The flag is read once at import.

Rows are distributed over threads and no sum crosses pairs, so results do not
depend on the number of threads numba uses.
"""
from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "COHGRAM_DISABLE_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip() not in ("", "0")


# ----------------------------------------------------------------- numpy path


def mpc_upper_numpy(cos_phi, sin_phi):
    """Upper triangle (i < k) of ``|mean(exp(-j(phi_i - phi_k)))|``.

    ``cos_phi`` and ``sin_phi`` are C x N arrays of the phase cosines and sines.
    """
    n_ch, n = cos_phi.shape
    out = np.zeros((n_ch, n_ch))
    for i in range(n_ch - 1):
        # exp(j(phi_k - phi_i)) has the same magnitude as the conjugate form
        re = np.sum(cos_phi[i] * cos_phi[i + 1 :] + sin_phi[i] * sin_phi[i + 1 :], axis=1)
        im = np.sum(cos_phi[i] * sin_phi[i + 1 :] - sin_phi[i] * cos_phi[i + 1 :], axis=1)
        out[i, i + 1 :] = np.hypot(re, im) / n
    return out


def msc_upper_numpy(spec):
    """Upper triangle of the band-averaged MSC from per-segment spectra.

    ``spec`` is C x S x K: windowed segment FFTs restricted to the K bins of
    one band. Bins with zero auto power contribute 0 to the mean.
    """
    n_ch, _, n_bins = spec.shape
    power = (np.conj(spec) * spec).sum(axis=1).real
    out = np.zeros((n_ch, n_ch))
    for i in range(n_ch - 1):
        cross = (np.conj(spec[i])[None] * spec[i + 1 :]).sum(axis=1)
        num = cross.real * cross.real + cross.imag * cross.imag
        den = power[i] * power[i + 1 :]
        with np.errstate(invalid="ignore", divide="ignore"):
            coh = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        out[i, i + 1 :] = coh.sum(axis=1) / n_bins
    return out


def oscillator_phases_numpy(theta0, omega, noise, leader, strength, gain):
    """Integrate the coupled phase model.

    Uncoupled channel c: ``theta[c, n+1] = theta[c, n] + omega[c] + noise[n, c]``.
    A follower c of leader l with strength k takes the noise mixture
    ``(1-k) noise[n, c] + k noise[n, l]`` and a Kuramoto pull
    ``gain * k * sin(theta[l, n] - theta[c, n])``.
    """
    n_steps, n_ch = noise.shape
    theta = np.empty((n_ch, n_steps))
    cur = np.array(theta0, dtype=np.float64)
    has_leader = leader >= 0
    lead = np.where(has_leader, leader, np.arange(n_ch))
    k = np.where(has_leader, strength, 0.0)
    for n in range(n_steps):
        theta[:, n] = cur
        eta = noise[n]
        cur = cur + omega + (1.0 - k) * eta + k * eta[lead] + gain * k * np.sin(cur[lead] - cur)
    return theta


# ----------------------------------------------------------------- numba path

try:
    import numba
    from numba import njit, prange
except ImportError:  # pragma: no cover
    numba = None
else:
    if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        # omp is thread-safe and avoids the TBB version probe
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


if numba is not None:

    @njit(parallel=True, cache=True)
    def mpc_upper_numba(cos_phi, sin_phi):
        n_ch, n = cos_phi.shape
        out = np.zeros((n_ch, n_ch))
        for i in prange(n_ch - 1):
            for k in range(i + 1, n_ch):
                re = 0.0
                im = 0.0
                for t in range(n):
                    ci = cos_phi[i, t]
                    si = sin_phi[i, t]
                    ck = cos_phi[k, t]
                    sk = sin_phi[k, t]
                    re += ci * ck + si * sk
                    im += ci * sk - si * ck
                out[i, k] = np.sqrt(re * re + im * im) / n
        return out

    @njit(parallel=True, cache=True)
    def msc_upper_numba(spec):
        n_ch, n_seg, n_bins = spec.shape
        power = np.zeros((n_ch, n_bins))
        for c in prange(n_ch):
            for b in range(n_bins):
                acc = 0.0
                for s in range(n_seg):
                    z = spec[c, s, b]
                    acc += z.real * z.real + z.imag * z.imag
                power[c, b] = acc
        out = np.zeros((n_ch, n_ch))
        for i in prange(n_ch - 1):
            for k in range(i + 1, n_ch):
                total = 0.0
                for b in range(n_bins):
                    re = 0.0
                    im = 0.0
                    for s in range(n_seg):
                        x = spec[i, s, b]
                        y = spec[k, s, b]
                        re += x.real * y.real + x.imag * y.imag
                        im += x.real * y.imag - x.imag * y.real
                    den = power[i, b] * power[k, b]
                    if den > 0.0:
                        total += (re * re + im * im) / den
                out[i, k] = total / n_bins
        return out

    @njit(cache=True)
    def oscillator_phases_numba(theta0, omega, noise, leader, strength, gain):
        n_steps, n_ch = noise.shape
        theta = np.empty((n_ch, n_steps))
        cur = theta0.astype(np.float64).copy()
        nxt = np.empty(n_ch)
        for n in range(n_steps):
            for c in range(n_ch):
                theta[c, n] = cur[c]
            for c in range(n_ch):
                l = leader[c]
                if l < 0:
                    nxt[c] = cur[c] + omega[c] + noise[n, c]
                else:
                    k = strength[c]
                    nxt[c] = (
                        cur[c] + omega[c] + (1.0 - k) * noise[n, c] + k * noise[n, l]
                        + gain * k * np.sin(cur[l] - cur[c])
                    )
            for c in range(n_ch):
                cur[c] = nxt[c]
        return theta


if numba is not None and not _numba_disabled():
    BACKEND = "numba"
    mpc_upper = mpc_upper_numba
    msc_upper = msc_upper_numba
    oscillator_phases = oscillator_phases_numba
else:
    BACKEND = "numpy"
    mpc_upper = mpc_upper_numpy
    msc_upper = msc_upper_numpy
    oscillator_phases = oscillator_phases_numpy
