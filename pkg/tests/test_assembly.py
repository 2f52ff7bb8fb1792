from dataclasses import replace

import numpy as np
import pytest
from PIL import Image

from cohgram.assembly import (
    assemble_band,
    assemble_planes,
    build_image,
    build_images,
    export_image,
    normalize_diagonal,
    quantize_u8,
)
from cohgram.config import PipelineConfig
from cohgram.dsp import ALPHA, BETA, WelchParams, analytic_phase, bandpass, trim_edges
from cohgram.features import band_msc, channel_de, mpc, msc_spectrum
from cohgram.ingestion import load_tensor
from cohgram.synth import OscillatorSpec, gen_coupled

from .conftest import FS, make_recording

IU = lambda n: np.triu_indices(n, 1)  # noqa: E731


def test_identical_channels_are_fully_coherent(rng):
    x = rng.standard_normal(int(10 * FS))
    m = assemble_band(make_recording(np.vstack([x, x])), ALPHA)
    assert m.values[0, 1] == pytest.approx(1.0, abs=1e-9)
    assert m.values[1, 0] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.slow
def test_independent_noise_62_channels():
    rec = make_recording(np.random.default_rng(1).standard_normal((62, int(240 * FS))))
    planes = assemble_planes(rec)
    iu = IU(62)
    for p in range(3):
        assert planes[..., p][iu].max() < 0.1
        assert np.median(planes[..., p].T[iu]) < 0.2


def test_coupled_pair_stands_out():
    rec = gen_coupled(OscillatorSpec(coupling=((1, 2, 0.8),), seed=4), 6, 30, FS)
    upper = assemble_band(rec, ALPHA).mpc
    others = [upper[i, k] for i, k in zip(*IU(6)) if (i, k) != (1, 2)]
    assert upper[1, 2] > max(others)


def test_entries_match_single_pair_chain(noise_recording):
    cfg = PipelineConfig()
    m = assemble_band(noise_recording, BETA, cfg)
    f = bandpass(noise_recording.data, BETA, FS, cfg.filter)
    ph = trim_edges(analytic_phase(f).values, cfg.edge_fraction)
    for i, k in [(0, 1), (2, 5), (3, 4)]:
        assert m.values[i, k] == pytest.approx(mpc(ph[i], ph[k]).value, abs=1e-12)
        expected_msc = band_msc(msc_spectrum(f[i], f[k], FS, cfg.welch), BETA).value
        assert m.values[k, i] == pytest.approx(expected_msc, abs=1e-12)
    for c in range(6):
        assert m.values[c, c] == pytest.approx(channel_de(f[c], FS, 1.0).value, abs=1e-12)


def test_not_symmetric(noise_recording):
    v = assemble_band(noise_recording, ALPHA).values
    assert not np.allclose(v, v.T)


def test_image_range_and_shape(noise_recording):
    img = build_image(noise_recording)
    assert img.data.shape == (6, 6, 3)
    assert np.all(np.isfinite(img.data))
    assert img.data.min() >= 0 and img.data.max() <= 1


def test_deterministic(noise_recording):
    a = build_image(noise_recording).data
    b = build_image(noise_recording).data
    assert a.tobytes() == b.tobytes()


def test_triangle_separation(noise_recording):
    base = PipelineConfig()
    a = assemble_planes(noise_recording, base)
    b = assemble_planes(noise_recording, replace(base, welch=WelchParams(128, 0.25)))
    iu = IU(6)
    for p in range(3):
        np.testing.assert_array_equal(a[..., p][iu], b[..., p][iu])
        assert not np.array_equal(a[..., p].T[iu], b[..., p].T[iu])
    c = assemble_planes(noise_recording, replace(base, edge_fraction=0.1))
    for p in range(3):
        np.testing.assert_array_equal(a[..., p].T[iu], c[..., p].T[iu])
        assert not np.array_equal(a[..., p][iu], c[..., p][iu])


def test_channel_permutation_equivariance(noise_recording):
    perm = np.array([3, 0, 5, 1, 4, 2])  # new channel j is old channel perm[j]
    rec_p = make_recording(noise_recording.data[perm])
    a = assemble_planes(noise_recording)
    b = assemble_planes(rec_p)
    for p in range(3):
        sym_a = np.triu(a[..., p], 1) + np.triu(a[..., p], 1).T
        sym_b = np.triu(b[..., p], 1) + np.triu(b[..., p], 1).T
        np.testing.assert_allclose(sym_b, sym_a[np.ix_(perm, perm)], rtol=0, atol=1e-12)


def test_mpc_amplitude_invariance(noise_recording):
    data = noise_recording.data.copy()
    data[2] *= 37.5
    a = assemble_band(noise_recording, ALPHA).mpc
    b = assemble_band(make_recording(data), ALPHA).mpc
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_shared_msc_flag(noise_recording):
    cfg = PipelineConfig(msc_shared_across_bands=True)
    planes = assemble_planes(noise_recording, cfg)
    low = [np.tril(planes[..., p], -1) for p in range(3)]
    np.testing.assert_array_equal(low[0], low[1])
    np.testing.assert_array_equal(low[0], low[2])


class TestNormalizeDiagonal:
    def test_minmax(self):
        out = normalize_diagonal(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(np.diag(out), [0.0, 0.5, 1.0])

    def test_degenerate(self):
        out = normalize_diagonal(np.diag([4.2] * 5))
        np.testing.assert_array_equal(np.diag(out), 0.5)

    def test_global_bounds(self):
        out = normalize_diagonal(np.diag([1.0, 2.0, 3.0]), "global", (0.0, 4.0))
        np.testing.assert_allclose(np.diag(out), [0.25, 0.5, 0.75])

    def test_off_diagonal_untouched(self, rng):
        planes = rng.random((4, 4, 3))
        planes[np.arange(4), np.arange(4)] = rng.normal(0, 5, (4, 3))
        out = normalize_diagonal(planes)
        mask = ~np.eye(4, dtype=bool)
        np.testing.assert_array_equal(out[mask], planes[mask])
        for p in range(3):
            d = np.diag(out[..., p])
            assert d.min() == 0.0 and d.max() == 1.0


def test_windowing_counts():
    rec = make_recording(np.random.default_rng(2).standard_normal((3, int(240 * FS))))
    cfg = PipelineConfig(window_s=20.0, stride_s=20.0)
    from cohgram.assembly import split_windows

    assert len(split_windows(rec, cfg)) == 12
    imgs = build_images(make_recording(rec.data[:, : int(60 * FS)]), cfg)
    assert [im.window_index for im in imgs] == [0, 1, 2]
    assert imgs[1].stem == "s01_1_1_1"


class TestExport:
    def test_quantization_rule(self):
        np.testing.assert_array_equal(quantize_u8([0.0, 1.0, 0.5, 0.25]), [0, 255, 128, 64])

    def test_png(self, noise_recording, tmp_path):
        img = build_image(noise_recording)
        p = export_image(img, tmp_path / "x.png", "png8")
        with Image.open(p) as im:
            assert im.mode == "RGB" and im.size == (6, 6)
            arr = np.asarray(im)
        np.testing.assert_array_equal(arr, quantize_u8(img.data))

    def test_tensor_roundtrip(self, noise_recording, tmp_path):
        img = build_image(noise_recording)
        p = export_image(img, tmp_path / "x.cohg.bin", "tensor")
        back, meta = load_tensor(p)
        assert back.tobytes() == img.data.astype(np.float32).tobytes()
        assert meta["label"] == 1 and meta["bands"][0]["name"] == "alpha"
        again = export_image(replace(img, data=back), tmp_path / "y.cohg.bin", "tensor")
        assert load_tensor(again)[0].tobytes() == back.tobytes()
