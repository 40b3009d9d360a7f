import colorsys

import numpy as np
import pytest

from qrouter.media import (
    FrameSequence,
    MediaError,
    load_frame_dir,
    read_ppm,
    rgb_to_hsv,
    save_frame_dir,
    to_gray,
    to_hsv_histogram,
    write_ppm,
)


def solid(color, h=4, w=4):
    return np.tile(np.array(color, dtype=np.uint8), (h, w, 1))


class TestLoadFrameDir:
    def test_counts_frames_in_numeric_order(self, tmp_path):
        for i, v in [(3, 30), (1, 10), (2, 20)]:
            write_ppm(tmp_path / f"{i:04d}.ppm", solid((v, v, v)))
        seq = load_frame_dir(tmp_path)
        assert len(seq) == 3
        assert [int(f[0, 0, 0]) for f in seq] == [10, 20, 30]

    def test_dimension_mismatch(self, tmp_path):
        write_ppm(tmp_path / "0001.ppm", solid((0, 0, 0), 2, 2))
        write_ppm(tmp_path / "0002.ppm", solid((0, 0, 0), 4, 4))
        with pytest.raises(MediaError, match="dimension mismatch"):
            load_frame_dir(tmp_path)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(MediaError, match="no frames"):
            load_frame_dir(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MediaError, match="missing"):
            load_frame_dir(tmp_path / "nope")

    @pytest.mark.parametrize("payload", [
        b"P3\n2 2\n255\n" + bytes(12),
        b"P6\n2 x\n255\n" + bytes(12),
        b"P6\n2 2\n255\n" + bytes(5),
        b"P6\n2 2\n65535\n" + bytes(24),
    ])
    def test_malformed_header(self, tmp_path, payload):
        (tmp_path / "0001.ppm").write_bytes(payload)
        with pytest.raises(MediaError):
            load_frame_dir(tmp_path)

    def test_header_comments_are_skipped(self, tmp_path):
        raster = bytes(range(12))
        (tmp_path / "0001.ppm").write_bytes(b"P6\n# made by hand\n2 2\n255\n" + raster)
        frame = load_frame_dir(tmp_path).frame(1)
        assert frame.tobytes() == raster


def test_ppm_round_trip_is_bit_exact(tmp_path, rng):
    frame = rng.integers(0, 256, (7, 5, 3), dtype=np.uint8)
    path = write_ppm(tmp_path / "x.ppm", frame)
    first = path.read_bytes()
    again = write_ppm(tmp_path / "y.ppm", read_ppm(path)).read_bytes()
    assert first == again
    assert np.array_equal(read_ppm(path), frame)


def test_save_frame_dir_uses_zero_padded_names(tmp_path):
    save_frame_dir(tmp_path, [solid((1, 2, 3))] * 2)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["0001.ppm", "0002.ppm"]


def test_frame_sequence_rejects_empty():
    with pytest.raises(MediaError):
        FrameSequence([])


class TestGray:
    def test_black(self):
        assert not to_gray(solid((0, 0, 0))).any()

    def test_white(self):
        assert (to_gray(solid((255, 255, 255))) == 255).all()

    def test_pure_red(self):
        # round(0.299 * 255) = round(76.245)
        assert to_gray(solid((255, 0, 0), 1, 1))[0, 0] == 76

    def test_idempotent_on_gray_content(self):
        v = np.arange(256, dtype=np.uint8)
        frame = np.stack([v, v, v], -1)[None]
        assert np.array_equal(to_gray(frame)[0], v)


class TestHsvHistogram:
    def test_single_color_is_single_bin(self):
        hist = to_hsv_histogram(solid((30, 200, 90)))
        assert hist.shape == (8, 4, 4)
        assert np.count_nonzero(hist) == 1
        assert hist.max() == 1.0

    def test_unit_mass(self, rng):
        for _ in range(20):
            hist = to_hsv_histogram(rng.integers(0, 256, (9, 11, 3), dtype=np.uint8))
            assert abs(hist.sum() - 1.0) <= 1e-12
            assert (hist >= 0).all()

    def test_red_and_blue_bins(self):
        frame = np.array([[[255, 0, 0], [0, 0, 255]]], dtype=np.uint8)
        hist = to_hsv_histogram(frame, 8, 1, 1).ravel()
        # hue 0 -> bin 0; hue 240 -> floor(240 / 45) = bin 5
        expected = np.zeros(8)
        expected[0] = expected[5] = 0.5
        assert np.array_equal(hist, expected)

    def test_hsv_matches_colorsys(self, rng):
        px = rng.integers(0, 256, (200, 3))
        ours = rgb_to_hsv(px.reshape(1, -1, 3).astype(np.uint8))[0]
        for (r, g, b), (h, s, v) in zip(px, ours):
            eh, es, ev = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
            assert h == pytest.approx((eh * 360.0) % 360.0, abs=1e-9)
            assert s == pytest.approx(es, abs=1e-12)
            assert v == pytest.approx(ev, abs=1e-12)

    def test_achromatic_hue_is_zero(self):
        assert rgb_to_hsv(solid((77, 77, 77), 1, 1))[0, 0, 0] == 0.0

    def test_rejects_zero_bins(self):
        with pytest.raises(ValueError):
            to_hsv_histogram(solid((1, 1, 1)), 0, 4, 4)
