"""Recording containers and the on-disk formats.

Two formats are supported:

* CSV recordings, one row per channel and no header row, with a JSON sidecar
  named ``<stem>.meta.json`` carrying ``sample_rate_hz``, ``subject_id``,
  ``session_index``, ``trial_index``, ``label`` and optionally
  ``channel_labels``.
* The ``COHGRAM1`` tensor container::

      8 bytes   magic  b"COHGRAM1"
      4 bytes   header length H, little-endian uint32
      H bytes   UTF-8 JSON header {"dims", "dtype", "axes", "meta"}
      ...       payload, little-endian float32, row-major

All persisted floats are float32; everything in memory is float64.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DuplicateChannelLabel,
    HeaderNotJson,
    MalformedHeader,
    MalformedRecording,
    MissingSidecar,
    NonFiniteSample,
    RecordingTooShort,
    TruncatedPayload,
)

MAGIC = b"COHGRAM1"
SIDECAR_SUFFIX = ".meta.json"
RECORDING_TENSOR_SUFFIX = ".rec.bin"
FEATURE_TENSOR_SUFFIX = ".cohg.bin"


class ClassLabel(enum.IntEnum):
    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @classmethod
    def parse(cls, value) -> "ClassLabel":
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                pass
            try:
                value = int(value)
            except ValueError:
                raise MalformedHeader(f"unknown class label {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise MalformedHeader(f"unknown class label {value!r}")
        try:
            return cls(int(value))
        except ValueError:
            raise MalformedHeader(f"class label out of range: {value!r}") from None


@dataclass(frozen=True)
class TrialMeta:
    subject_id: str
    session_index: int = 1
    trial_index: int = 1
    label: ClassLabel = ClassLabel.NEUTRAL

    def __post_init__(self):
        if self.session_index < 1 or self.trial_index < 1:
            raise MalformedHeader("session_index and trial_index must be >= 1")
        object.__setattr__(self, "label", ClassLabel.parse(self.label))

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.subject_id, self.session_index, self.trial_index)

    @property
    def stem(self) -> str:
        return f"{self.subject_id}_{self.session_index}_{self.trial_index}"

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "session_index": self.session_index,
            "trial_index": self.trial_index,
            "label": int(self.label),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialMeta":
        try:
            return cls(
                subject_id=str(d["subject_id"]),
                session_index=int(d["session_index"]),
                trial_index=int(d["trial_index"]),
                label=ClassLabel.parse(d["label"]),
            )
        except KeyError as exc:
            raise MalformedHeader(f"missing metadata key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise MalformedHeader(f"bad metadata: {exc}") from None


@dataclass(frozen=True)
class MultichannelRecording:
    """A channels x samples signal matrix with its sample rate and trial metadata.

    Construction validates the invariants: at least two channels, at least two
    seconds of data, finite samples and unique channel labels.
    """

    data: np.ndarray
    sample_rate_hz: float
    channel_labels: tuple[str, ...] = ()
    meta: TrialMeta = field(default_factory=lambda: TrialMeta("unknown"))

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise MalformedRecording(f"expected a 2-D channels x samples array, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        fs = float(self.sample_rate_hz)
        if not np.isfinite(fs) or fs <= 0:
            raise MalformedHeader(f"sample_rate_hz must be positive, got {self.sample_rate_hz!r}")
        object.__setattr__(self, "sample_rate_hz", fs)

        n_ch, n = data.shape
        if n_ch < 2:
            raise MalformedRecording(f"need at least 2 channels, got {n_ch}")
        if n < 2 * fs:
            raise RecordingTooShort(f"need at least 2 s of data ({2 * fs:g} samples), got {n}")
        bad = ~np.isfinite(data)
        if bad.any():
            ch, idx = np.argwhere(bad)[0]
            raise NonFiniteSample(ch, idx)

        labels = tuple(str(s) for s in self.channel_labels) or tuple(f"ch{i}" for i in range(n_ch))
        if len(labels) != n_ch:
            raise MalformedHeader(f"{len(labels)} channel labels for {n_ch} channels")
        if len(set(labels)) != n_ch:
            dupes = sorted({s for s in labels if labels.count(s) > 1})
            raise DuplicateChannelLabel(f"duplicate channel labels: {dupes}")
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def sidecar(self) -> dict:
        d = {"sample_rate_hz": self.sample_rate_hz}
        d.update(self.meta.to_dict())
        d["channel_labels"] = list(self.channel_labels)
        return d


# ---------------------------------------------------------------- tensor files


def write_tensor(data, dims=None, meta=None, axes=None) -> bytes:
    """Serialise ``data`` into a COHGRAM1 container.

    ``dims`` defaults to ``data.shape``; when given, the element count must
    match ``prod(dims)``.
    """
    arr = np.asarray(data)
    if dims is None:
        dims = list(arr.shape) or [1]
    dims = [int(d) for d in dims]
    if not dims or any(d <= 0 for d in dims):
        raise DimMismatch(f"dims must be nonempty and positive, got {dims}")
    if arr.size != int(np.prod(dims)):
        raise DimMismatch(f"{arr.size} elements do not fill dims {dims}")
    header = {"dims": dims, "dtype": "float32le", "axes": list(axes) if axes else None, "meta": meta or {}}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(arr, dtype="<f4").reshape(-1).tobytes()
    return MAGIC + struct.pack("<I", len(hbytes)) + hbytes + payload


def read_tensor_header(buf: bytes) -> tuple[dict, int]:
    """Parse magic and header; return ``(header, payload_offset)``."""
    if len(buf) < len(MAGIC) + 4 or buf[: len(MAGIC)] != MAGIC:
        raise BadMagic("not a COHGRAM1 tensor file")
    (hlen,) = struct.unpack_from("<I", buf, len(MAGIC))
    start = len(MAGIC) + 4
    if len(buf) < start + hlen:
        raise TruncatedPayload("header extends past end of data")
    try:
        header = json.loads(buf[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderNotJson(str(exc)) from None
    if not isinstance(header, dict) or "dims" not in header:
        raise HeaderNotJson("header must be a JSON object with a 'dims' key")
    return header, start + hlen


def read_tensor(buf: bytes) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`write_tensor`; returns a float32 array and the meta dict."""
    header, offset = read_tensor_header(buf)
    dims = [int(d) for d in header["dims"]]
    expected = int(np.prod(dims)) * 4
    payload = buf[offset:]
    if len(payload) < expected:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise DimMismatch(f"payload has {len(payload) - expected} trailing bytes")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    meta = header.get("meta") or {}
    if header.get("axes"):
        meta = dict(meta, _axes=header["axes"])
    return arr, meta


def save_tensor(path, data, meta=None, axes=None) -> Path:
    path = Path(path)
    path.write_bytes(write_tensor(data, meta=meta, axes=axes))
    return path


def load_tensor(path) -> tuple[np.ndarray, dict]:
    return read_tensor(Path(path).read_bytes())


# ------------------------------------------------------------------ recordings


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name[: -len(path.suffix)] + SIDECAR_SUFFIX)


def _read_sidecar(path: Path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        raise MissingSidecar(f"no sidecar {side.name} for {path.name}")
    try:
        d = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{side.name}: {exc}") from None
    if not isinstance(d, dict):
        raise MalformedHeader(f"{side.name}: expected a JSON object")
    return d


def _recording_from_dict(data, d: dict) -> MultichannelRecording:
    if "sample_rate_hz" not in d:
        raise MalformedHeader("metadata lacks sample_rate_hz")
    try:
        fs = float(d["sample_rate_hz"])
    except (TypeError, ValueError):
        raise MalformedHeader(f"bad sample_rate_hz {d['sample_rate_hz']!r}") from None
    return MultichannelRecording(
        data=data,
        sample_rate_hz=fs,
        channel_labels=tuple(d.get("channel_labels") or ()),
        meta=TrialMeta.from_dict(d),
    )


def _parse_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(np.array([float(tok) for tok in line.split(",")]))
            except ValueError as exc:
                raise MalformedRecording(f"{path.name} line {lineno + 1}: {exc}") from None
    if not rows:
        raise MalformedRecording(f"{path.name} is empty")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise MalformedRecording(f"{path.name}: ragged rows with lengths {sorted(lengths)}")
    # persisted samples are float32 by contract
    return np.vstack(rows).astype(np.float32).astype(np.float64)


def load_recording(path, format: str | None = None) -> MultichannelRecording:
    """Load and validate a recording from CSV (+ sidecar) or a tensor file.

    Samples are read as float32 (the persisted precision) and widened to float64.

    ``format`` is ``"csv"`` or ``"tensor"``; it is inferred from the file name
    when omitted.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "tensor"
    if format == "csv":
        side = _read_sidecar(path)
        return _recording_from_dict(_parse_csv(path), side)
    if format == "tensor":
        arr, meta = load_tensor(path)
        if arr.ndim != 2:
            raise MalformedHeader(f"recording tensor must be 2-D, got dims {list(arr.shape)}")
        return _recording_from_dict(arr.astype(np.float64), meta)
    raise ValueError(f"unknown recording format {format!r}")


def save_recording(rec: MultichannelRecording, path, format: str | None = None) -> Path:
    """Persist ``rec``. CSV writes float32-exact text and a sidecar."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "tensor"
    if format == "csv":
        values = rec.data.astype(np.float32)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in values:
                fh.write(",".join(f"{v:.9g}" for v in row.tolist()))
                fh.write("\n")
        sidecar_path(path).write_text(json.dumps(rec.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
    if format == "tensor":
        return save_tensor(path, rec.data, meta=rec.sidecar(), axes=["channel", "sample"])
    raise ValueError(f"unknown recording format {format!r}")


def find_recordings(directory) -> list[Path]:
    """Recording files in ``directory`` (CSV and recording tensors), sorted by name."""
    directory = Path(directory)
    found = [p for p in directory.iterdir() if p.is_file() and (p.suffix.lower() == ".csv" or p.name.endswith(RECORDING_TENSOR_SUFFIX))]
    return sorted(found, key=lambda p: p.name)


def check_unique_trials(metas) -> None:
    seen = set()
    for m in metas:
        if m.key in seen:
            raise MalformedHeader(f"duplicate trial {m.key}")
        seen.add(m.key)
