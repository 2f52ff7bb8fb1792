"""Synthetic recordings with known connectivity.

Two generators: coupled phase oscillators (ground truth for MPC) and linear
mixtures of white sources (closed-form MSC). :func:`gen_labeled_dataset`
builds a three-class dataset whose classes differ only in which channel pairs
are coupled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CohgramError, InvalidSpec
from .ingestion import ClassLabel, MultichannelRecording, TrialMeta, save_recording

# Kuramoto pull per step at full coupling
PULL_GAIN = 0.1


@dataclass(frozen=True)
class OscillatorSpec:
    """Phase-oscillator ensemble.

    ``coupling`` holds ``(leader, follower, strength)`` triples. Strength 1 with
    no phase noise phase-locks the follower to its leader; strength 0 leaves it
    independent. ``snr_db=None`` disables measurement noise.
    """

    base_freq_hz: float = 10.0
    coupling: tuple[tuple[int, int, float], ...] = ()
    phase_noise_std: float = 0.3
    amplitude: float = 1.0
    seed: int = 0
    snr_db: float | None = 10.0

    def validate(self, n_channels: int, fs: float) -> None:
        if not fs > 2 * self.base_freq_hz:
            raise InvalidSpec(f"fs={fs} must exceed twice base_freq_hz={self.base_freq_hz}")
        if self.phase_noise_std < 0 or not self.amplitude > 0:
            raise InvalidSpec("phase_noise_std must be >= 0 and amplitude > 0")
        followers = set()
        for i, k, s in self.coupling:
            if i == k:
                raise InvalidSpec(f"channel {i} cannot couple to itself")
            if not (0 <= i < n_channels and 0 <= k < n_channels):
                raise InvalidSpec(f"coupling ({i}, {k}) outside {n_channels} channels")
            if not (0.0 <= s <= 1.0):
                raise InvalidSpec(f"coupling strength {s} outside [0, 1]")
            if k in followers:
                raise InvalidSpec(f"channel {k} follows more than one leader")
            followers.add(k)


def _channel_labels(n: int) -> tuple[str, ...]:
    return tuple(f"ch{i:02d}" for i in range(n))


def _sensor_noise(rng, clean: np.ndarray, snr_db: float | None) -> np.ndarray:
    if snr_db is None:
        return clean
    power = np.mean(clean**2, axis=1, keepdims=True)
    std = np.sqrt(power / 10 ** (snr_db / 10))
    return clean + std * rng.standard_normal(clean.shape)


def gen_coupled(spec: OscillatorSpec, n_channels: int, duration_s: float, fs: float, meta: TrialMeta | None = None) -> MultichannelRecording:
    """Channels ``amplitude * cos(theta_c)`` from coupled phase oscillators plus sensor noise."""
    spec.validate(n_channels, fs)
    n = int(round(duration_s * fs))
    rng = np.random.default_rng(spec.seed)
    theta0 = rng.uniform(-np.pi, np.pi, n_channels)
    noise = spec.phase_noise_std * rng.standard_normal((n, n_channels))
    leader = np.full(n_channels, -1, dtype=np.int64)
    strength = np.zeros(n_channels)
    for i, k, s in spec.coupling:
        leader[k] = i
        strength[k] = s
    omega = np.full(n_channels, 2 * np.pi * spec.base_freq_hz / fs)
    theta = _kernels.oscillator_phases(theta0, omega, noise, leader, strength, PULL_GAIN)
    data = _sensor_noise(rng, spec.amplitude * np.cos(theta), spec.snr_db)
    return MultichannelRecording(data, fs, _channel_labels(n_channels), meta or TrialMeta("synth"))


def gen_common_source(n_channels: int, mixing, duration_s: float, fs: float, seed: int = 0, noise_std=1.0):
    """Linear mixtures of independent unit-variance white sources plus sensor noise.

    Returns ``(recording, msc)`` where ``msc[i, k]`` is the exact coherence
    ``(m_i . m_k)^2 / ((|m_i|^2 + s_i^2)(|m_k|^2 + s_k^2))``, identical at
    every frequency.
    """
    mixing = np.atleast_2d(np.asarray(mixing, dtype=np.float64))
    if mixing.shape[0] != n_channels:
        raise InvalidSpec(f"mixing has {mixing.shape[0]} rows for {n_channels} channels")
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=np.float64), (n_channels,))
    if np.any(noise_std < 0):
        raise InvalidSpec("noise_std must be nonnegative")
    n = int(round(duration_s * fs))
    rng = np.random.default_rng(seed)
    sources = rng.standard_normal((mixing.shape[1], n))
    data = mixing @ sources + noise_std[:, None] * rng.standard_normal((n_channels, n))
    gram = mixing @ mixing.T
    power = np.diag(gram) + noise_std**2
    with np.errstate(invalid="ignore", divide="ignore"):
        msc = np.where(np.outer(power, power) > 0, gram**2 / np.outer(power, power), 0.0)
    rec = MultichannelRecording(data, fs, _channel_labels(n_channels), TrialMeta("synth"))
    return rec, msc


def disjoint_templates(n_channels: int, pairs_per_class: int = 2, strength: float = 0.8):
    """Per-class coupling maps over non-overlapping channel pairs."""
    need = 2 * 3 * pairs_per_class
    if n_channels < need:
        raise InvalidSpec(f"{pairs_per_class} disjoint pairs per class need {need} channels, got {n_channels}")
    templates = []
    c = 0
    for _ in range(3):
        pairs = []
        for _ in range(pairs_per_class):
            pairs.append((c, c + 1, strength))
            c += 2
        templates.append(tuple(pairs))
    return tuple(templates)


@dataclass(frozen=True)
class SynthDatasetSpec:
    """Three-class synthetic dataset.

    ``class_connectivity_templates[label]`` is the coupling map for
    :class:`ClassLabel` ``label`` (NEGATIVE, NEUTRAL, POSITIVE order). Trials of
    each class are spread round-robin over ``n_subjects`` subjects; each subject
    gets its own base frequency offset of up to ``subject_freq_jitter_hz``.
    """

    n_channels: int = 16
    n_trials_per_class: int = 30
    duration_s: float = 30.0
    fs: float = 200.0
    class_connectivity_templates: tuple = field(default_factory=lambda: disjoint_templates(16))
    seed: int = 0
    n_subjects: int = 15
    base_freq_hz: float = 10.0
    phase_noise_std: float = 0.3
    snr_db: float | None = 10.0
    subject_freq_jitter_hz: float = 0.5

    def __post_init__(self):
        templates = tuple(tuple((int(i), int(k), float(s)) for i, k, s in t) for t in self.class_connectivity_templates)
        object.__setattr__(self, "class_connectivity_templates", templates)
        if self.n_trials_per_class < 1:
            raise InvalidSpec("n_trials_per_class must be >= 1")
        if self.n_subjects < 1:
            raise InvalidSpec("n_subjects must be >= 1")
        if self.n_channels < 2:
            raise InvalidSpec("n_channels must be >= 2")
        if self.duration_s < 2:
            raise InvalidSpec("duration_s must be >= 2")
        if len(templates) != 3:
            raise InvalidSpec(f"need exactly 3 class templates, got {len(templates)}")
        if len({frozenset(t) for t in templates}) != 3:
            raise InvalidSpec("class templates must be distinct")
        for t in templates:
            OscillatorSpec(self.base_freq_hz, t, self.phase_noise_std, snr_db=self.snr_db).validate(self.n_channels, self.fs)

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "n_trials_per_class": self.n_trials_per_class,
            "duration_s": self.duration_s,
            "fs": self.fs,
            "class_connectivity_templates": [[list(c) for c in t] for t in self.class_connectivity_templates],
            "seed": self.seed,
            "n_subjects": self.n_subjects,
            "base_freq_hz": self.base_freq_hz,
            "phase_noise_std": self.phase_noise_std,
            "snr_db": self.snr_db,
            "subject_freq_jitter_hz": self.subject_freq_jitter_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthDatasetSpec":
        if not isinstance(d, dict):
            raise InvalidSpec("synth spec must be a JSON object")
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise InvalidSpec(f"unknown synth spec keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "class_connectivity_templates" not in kw:
                kw["class_connectivity_templates"] = disjoint_templates(int(kw.get("n_channels", 16)))
            return cls(**kw)
        except CohgramError:
            raise
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed synth spec: {exc}") from None


def trial_seed(base_seed: int, trial_index: int) -> int:
    """Independent per-trial seed derived from (base_seed, trial_index)."""
    return int(np.random.SeedSequence([base_seed, trial_index]).generate_state(1)[0])


def _subject_offsets(spec: SynthDatasetSpec) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xFFFF]))
    return rng.uniform(-spec.subject_freq_jitter_hz, spec.subject_freq_jitter_hz, spec.n_subjects)


def gen_labeled_dataset(spec: SynthDatasetSpec):
    """Generate all trials; returns ``(recordings, manifest)``.

    Trial ``t`` of class ``label`` goes to subject ``t mod n_subjects`` and
    session ``t div n_subjects + 1``; within a session the trial index is
    ``label + 1``.
    """
    offsets = _subject_offsets(spec)
    width = max(2, len(str(spec.n_subjects)))
    recordings = []
    entries = []
    flat = 0
    for t in range(spec.n_trials_per_class):
        for label in ClassLabel:
            subj = t % spec.n_subjects
            meta = TrialMeta(f"s{subj + 1:0{width}d}", t // spec.n_subjects + 1, int(label) + 1, label)
            template = spec.class_connectivity_templates[int(label)]
            osc = OscillatorSpec(
                base_freq_hz=spec.base_freq_hz + offsets[subj],
                coupling=template,
                phase_noise_std=spec.phase_noise_std,
                seed=trial_seed(spec.seed, flat),
                snr_db=spec.snr_db,
            )
            recordings.append(gen_coupled(osc, spec.n_channels, spec.duration_s, spec.fs, meta))
            entries.append({
                "file": f"{meta.stem}.csv",
                **meta.to_dict(),
                "label_name": label.name.lower(),
                "coupling": [list(c) for c in template],
                "base_freq_hz": osc.base_freq_hz,
                "seed": osc.seed,
                "status": "ok",
            })
            flat += 1
    manifest = {"kind": "recordings", "version": 1, "spec": spec.to_dict(), "entries": entries}
    return recordings, manifest


def write_dataset(recordings, manifest: dict, out_dir) -> Path:
    """Persist a generated dataset as CSV + sidecars + ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec, entry in zip(recordings, manifest["entries"]):
        save_recording(rec, out_dir / entry["file"], "csv")
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
