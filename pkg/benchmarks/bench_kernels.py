"""Time the numba kernels against their pure-numpy fallbacks.

Sizes follow a 62-channel montage: one 240 s trial at 200 Hz for the phase
and spectral kernels, and a 16-channel oscillator run of the same length.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from cohgram import _kernels
from cohgram.dsp import WelchParams, segment_spectra


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--channels", type=int, default=62)
    parser.add_argument("--seconds", type=float, default=240.0)
    args = parser.parse_args()

    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    n = int(args.seconds * 200)
    phi = rng.uniform(-np.pi, np.pi, (args.channels, n))
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    spec = segment_spectra(rng.standard_normal((args.channels, n)), WelchParams())[..., 16:27]
    c = 16
    osc = (
        rng.uniform(-np.pi, np.pi, c),
        np.full(c, 2 * np.pi * 10 / 200),
        0.3 * rng.standard_normal((n, c)),
        np.array([-1] + list(range(c - 1))),
        np.full(c, 0.5),
        0.1,
    )
    cases = [
        ("mpc_upper", _kernels.mpc_upper_numba, _kernels.mpc_upper_numpy, (cos_phi, sin_phi)),
        ("msc_upper", _kernels.msc_upper_numba, _kernels.msc_upper_numpy, (spec,)),
        ("oscillator_phases", _kernels.oscillator_phases_numba, _kernels.oscillator_phases_numpy, osc),
    ]
    print(f"{'kernel':<20}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, fast, slow, fargs in cases:
        fast(*fargs)  # compile outside the timed region
        t_fast, a = best_of(fast, fargs, args.repeat)
        t_slow, b = best_of(slow, fargs, args.repeat)
        diff = float(np.max(np.abs(a - b)))
        print(f"{name:<20}{t_fast:>10.4f}{t_slow:>10.4f}{t_slow / t_fast:>8.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
