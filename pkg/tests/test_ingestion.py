import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cohgram.errors import (
    BadMagic,
    DimMismatch,
    DuplicateChannelLabel,
    HeaderNotJson,
    MalformedHeader,
    MissingSidecar,
    NonFiniteSample,
    RecordingTooShort,
    TruncatedPayload,
)
from cohgram.ingestion import (
    MAGIC,
    ClassLabel,
    MultichannelRecording,
    TrialMeta,
    load_recording,
    read_tensor,
    save_recording,
    write_tensor,
)


def write_csv(path, data, **side):
    np.savetxt(path, data, delimiter=",")
    meta = {"sample_rate_hz": 200.0, "subject_id": "s01", "session_index": 1, "trial_index": 1, "label": 2}
    meta.update(side)
    path.with_name(path.stem + ".meta.json").write_text(json.dumps(meta))


def test_load_full_montage_csv(tmp_path):
    path = tmp_path / "trial.csv"
    data = np.random.default_rng(0).standard_normal((62, 48000)).astype(np.float32)
    write_csv(path, data)
    rec = load_recording(path, "csv")
    assert (rec.n_channels, rec.n_samples) == (62, 48000)
    assert rec.duration_s == 240.0
    assert rec.meta.label is ClassLabel.POSITIVE


def test_minimal_two_second_recording(tmp_path):
    path = tmp_path / "min.csv"
    write_csv(path, np.ones((2, 400)))
    rec = load_recording(path)
    assert rec.n_samples == 400


def test_shorter_than_two_seconds_rejected():
    with pytest.raises(RecordingTooShort):
        MultichannelRecording(np.zeros((2, 399)), 200.0)


def test_nan_reports_channel_and_index(tmp_path):
    path = tmp_path / "bad.csv"
    data = np.zeros((5, 400))
    write_csv(path, data)
    rows = path.read_text().splitlines()
    cells = rows[3].split(",")
    cells[17] = "NaN"
    rows[3] = ",".join(cells)
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(NonFiniteSample) as info:
        load_recording(path)
    assert (info.value.channel, info.value.index) == (3, 17)


def test_missing_sidecar(tmp_path):
    path = tmp_path / "x.csv"
    np.savetxt(path, np.zeros((2, 400)), delimiter=",")
    with pytest.raises(MissingSidecar):
        load_recording(path)


def test_sidecar_without_rate(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(path, np.zeros((2, 400)))
    side = path.with_name("x.meta.json")
    d = json.loads(side.read_text())
    del d["sample_rate_hz"]
    side.write_text(json.dumps(d))
    with pytest.raises(MalformedHeader):
        load_recording(path)


def test_duplicate_channel_labels(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(path, np.zeros((2, 400)), channel_labels=["Fz", "Fz"])
    with pytest.raises(DuplicateChannelLabel):
        load_recording(path)


def test_label_encoding_is_fixed():
    assert [int(ClassLabel.NEGATIVE), int(ClassLabel.NEUTRAL), int(ClassLabel.POSITIVE)] == [0, 1, 2]
    assert ClassLabel.parse("positive") is ClassLabel.POSITIVE
    with pytest.raises(MalformedHeader):
        ClassLabel.parse(3)


def test_csv_and_tensor_recording_roundtrip(tmp_path):
    data = np.random.default_rng(1).standard_normal((3, 600)).astype(np.float32).astype(np.float64)
    rec = MultichannelRecording(data, 200.0, ("a", "b", "c"), TrialMeta("s7", 2, 5, ClassLabel.NEGATIVE))
    for name in ("r.csv", "r.rec.bin"):
        back = load_recording(save_recording(rec, tmp_path / name))
        np.testing.assert_array_equal(back.data, rec.data)
        assert back.meta == rec.meta
        assert back.channel_labels == rec.channel_labels


def test_loading_is_deterministic(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, np.random.default_rng(3).standard_normal((4, 500)))
    a, b = load_recording(path), load_recording(path)
    assert a.data.tobytes() == b.data.tobytes()


# ---------------------------------------------------------------- tensors


def test_image_payload_size():
    buf = write_tensor(np.zeros((62, 62, 3), np.float32))
    (hlen,) = struct.unpack_from("<I", buf, 8)
    assert buf[:8] == MAGIC
    assert len(buf) - 12 - hlen == 62 * 62 * 3 * 4 == 46128


def test_scalar_tensor():
    buf = write_tensor(np.array([0.0], np.float32), dims=[1])
    (hlen,) = struct.unpack_from("<I", buf, 8)
    header = json.loads(buf[12 : 12 + hlen])
    assert header["dims"] == [1]
    assert len(buf) - 12 - hlen == 4


def test_random_image_roundtrip_bitwise():
    x = np.random.default_rng(7).random((62, 62, 3)).astype(np.float32)
    y, meta = read_tensor(write_tensor(x, meta={"k": 1}))
    assert y.tobytes() == x.tobytes()
    assert meta["k"] == 1


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        write_tensor(np.zeros(5), dims=[2, 3])


def test_corrupt_magic():
    buf = bytearray(write_tensor(np.zeros(4, np.float32)))
    buf[0] ^= 0xFF
    with pytest.raises(BadMagic):
        read_tensor(bytes(buf))


def test_truncated_payload():
    buf = write_tensor(np.zeros((3, 3), np.float32))
    with pytest.raises(TruncatedPayload):
        read_tensor(buf[:-4])


def test_header_not_json():
    bad = MAGIC + struct.pack("<I", 3) + b"{x]" + b"\0" * 4
    with pytest.raises(HeaderNotJson):
        read_tensor(bad)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=4, max_side=6), elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_roundtrip_property(x):
    y, _ = read_tensor(write_tensor(x))
    assert y.shape == x.shape
    assert y.tobytes() == x.tobytes()
