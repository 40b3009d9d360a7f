import json

import numpy as np
import pytest

from qrouter.clients import ArtifactLabel, MockFrameClassifier
from qrouter.clips import Clip
from qrouter.localization import (
    SUMMARY_NAME,
    block_matching_flow,
    best_pair,
    colormap,
    estimate_flow,
    localize,
    normalize_map,
    perceptual_map,
    proxy_perceptual_map,
    render_overlay,
    restrict_clips,
    run_localization,
    score_pair,
    warp,
)
from qrouter.media import luma, read_pgm, read_ppm

from conftest import burst_video, ramp_frame, seq_of


def gray3(g):
    g = np.asarray(g, dtype=np.uint8)
    return np.stack([g, g, g], -1)


def proxy_oracle(f1, f2):
    """Straight loop version of 0.5*box3|dY| + 0.5*box3|dG| with replicated borders."""
    y1, y2 = luma(f1).tolist(), luma(f2).tolist()
    h, w = len(y1), len(y1[0])

    def at(img, y, x):
        return img[min(max(y, 0), h - 1)][min(max(x, 0), w - 1)]

    def sobel(img):
        out = []
        for y in range(h):
            row = []
            for x in range(w):
                gx = (at(img, y - 1, x + 1) + 2 * at(img, y, x + 1) + at(img, y + 1, x + 1)
                      - at(img, y - 1, x - 1) - 2 * at(img, y, x - 1) - at(img, y + 1, x - 1))
                gy = (at(img, y + 1, x - 1) + 2 * at(img, y + 1, x) + at(img, y + 1, x + 1)
                      - at(img, y - 1, x - 1) - 2 * at(img, y - 1, x) - at(img, y - 1, x + 1))
                row.append((gx * gx + gy * gy) ** 0.5)
            out.append(row)
        return out

    g1, g2 = sobel(y1), sobel(y2)
    dy = [[abs(y1[y][x] - y2[y][x]) for x in range(w)] for y in range(h)]
    dg = [[abs(g1[y][x] - g2[y][x]) for x in range(w)] for y in range(h)]

    def box(img, y, x):
        return sum(at(img, y + i, x + j) for i in (-1, 0, 1) for j in (-1, 0, 1)) / 9

    return np.array([[0.5 * box(dy, y, x) + 0.5 * box(dg, y, x) for x in range(w)] for y in range(h)])


class TestFlow:
    def test_constructed_translation(self, rng):
        h, w, s = 40, 48, 3
        tex = rng.integers(0, 256, (h, w + s, 3), dtype=np.uint8)
        f1 = tex[:, s:]
        f2 = tex[:, :-s]  # f2[y, x + 3] == f1[y, x]
        flow = block_matching_flow(f1, f2)
        for by in range(h // 8):
            for bx in range(w // 8 - 1):  # right-most block column would leave the frame
                assert tuple(flow[by * 8, bx * 8]) == (3.0, 0.0)

    def test_identical_frames_have_zero_flow(self, rng):
        f = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        assert not block_matching_flow(f, f).any()

    def test_ties_prefer_zero_displacement(self):
        f = np.full((16, 16, 3), 90, dtype=np.uint8)
        assert not block_matching_flow(f, f).any()

    def test_backend_shape_is_checked(self):
        f = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            estimate_flow(f, f, lambda a, b: np.zeros((4, 4, 2)))
        with pytest.raises(ValueError):
            estimate_flow(f, f, lambda a, b: np.full((8, 8, 2), np.nan))


class TestWarp:
    def test_integer_shift_duplicates_border(self):
        f2 = gray3(np.arange(12).reshape(3, 4) * 10)
        flow = np.zeros((3, 4, 2))
        flow[..., 0] = 1
        out = warp(f2, flow)[..., 0]
        expected = np.arange(12).reshape(3, 4) * 10
        expected = np.concatenate([expected[:, 1:], expected[:, -1:]], axis=1)
        assert np.array_equal(out, expected)

    def test_fractional_midpoint(self):
        f2 = gray3([[0, 100]])
        flow = np.zeros((1, 2, 2))
        flow[..., 0] = 0.5
        assert warp(f2, flow)[0, 0, 0] == 50

    def test_zero_flow_is_identity(self, rng):
        f = rng.integers(0, 256, (9, 7, 3), dtype=np.uint8)
        assert np.array_equal(warp(f, np.zeros((9, 7, 2))), f)


class TestPerceptualMap:
    def test_single_pixel_change(self):
        f1 = np.full((9, 9, 3), 50, dtype=np.uint8)
        f2 = f1.copy()
        f2[4, 4] = 150
        ours = proxy_perceptual_map(f1, f2)
        assert np.allclose(ours, proxy_oracle(f1, f2), atol=1e-9)
        assert np.unravel_index(np.argmax(ours), ours.shape) == (4, 4)
        # Sobel support 3x3 widened by the 3x3 box -> at most 2 pixels away
        ys, xs = np.nonzero(ours > 1e-12)
        assert np.abs(ys - 4).max() <= 2 and np.abs(xs - 4).max() <= 2

    def test_random_against_oracle(self, rng):
        for _ in range(3):
            a = rng.integers(0, 256, (7, 8, 3), dtype=np.uint8)
            b = rng.integers(0, 256, (7, 8, 3), dtype=np.uint8)
            assert np.allclose(proxy_perceptual_map(a, b), proxy_oracle(a, b), atol=1e-9)

    def test_metric_shape_is_checked(self):
        f = np.zeros((4, 4, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            perceptual_map(f, f, lambda a, b: np.zeros(3))


class TestNormalize:
    def test_constant_map_is_zero(self):
        assert not normalize_map(np.full((3, 3), 7.0)).any()

    def test_range(self, rng):
        for _ in range(50):
            hm = normalize_map(rng.normal(size=(5, 6)) * rng.uniform(0.1, 100))
            assert hm.min() == 0.0 and hm.max() == 1.0

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            normalize_map(np.array([0.0, np.nan]))


class TestOverlay:
    def test_black_frame_zero_heat(self):
        out = render_overlay(np.zeros((3, 3, 3), dtype=np.uint8), np.zeros((3, 3)), 0.5)
        assert (out.reshape(-1, 3) == (0, 0, 128)).all()

    def test_colormap_endpoints(self):
        assert colormap(np.array([0.0, 0.5, 1.0])).tolist() == [[0, 0, 255], [0, 255, 0], [255, 0, 0]]

    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            render_overlay(np.zeros((1, 1, 3), dtype=np.uint8), np.zeros((1, 1)), 1.5)


class TestRestrict:
    def test_flag_in_padded_region_keeps_clip(self):
        clips = [Clip(5, 20), Clip(30, 40)]
        labels = {6: ArtifactLabel.IMAGE_ARTIFACT, 35: ArtifactLabel.NONE}
        assert restrict_clips(clips, labels) == [Clip(5, 20)]

    def test_nothing_flagged(self):
        assert restrict_clips([Clip(1, 9)], {3: ArtifactLabel.NONE}) == []


def single_injection(amplitude, k=6, n=10, noise=None):
    base = ramp_frame(32, 32)
    frames = [base.copy() for _ in range(n)]
    if noise is None:
        noise = np.random.default_rng(0).standard_normal(base.shape)
    frames[k - 1] = np.clip(base + amplitude * noise, 0, 255).astype(np.uint8)
    return seq_of(frames)


class TestInjection:
    def test_winning_pair_touches_corrupted_frame(self):
        k, n = 6, 10
        seq = single_injection(40.0, k, n)
        scores = {t: score_pair(seq, t).severity for t in range(1, n)}
        best = best_pair(seq, Clip(1, n))
        assert best.pair in {(k - 1, k), (k, k + 1)}
        others = [s for t, s in scores.items() if t not in (k - 1, k)]
        assert best.severity > max(others)

    def test_severity_grows_with_amplitude(self):
        noise = np.random.default_rng(1).standard_normal((32, 32, 3))
        sev = [best_pair(single_injection(a, noise=noise), Clip(1, 10)).severity for a in (20, 40, 80)]
        assert sev[0] < sev[1] < sev[2]

    def test_raw_energy_grows_with_amplitude(self):
        # the pooled map before normalization is the scale-sensitive quantity
        noise = np.random.default_rng(1).standard_normal((32, 32, 3))
        energy = []
        for a in (20, 40, 80):
            seq = single_injection(a, noise=noise)
            energy.append(proxy_perceptual_map(seq.frame(5), seq.frame(6)).mean())
        assert energy[0] < energy[1] < energy[2]


class TestLocalize:
    def test_outputs_and_summary(self, tmp_path):
        seq = single_injection(40.0)
        labels = {6: ArtifactLabel.AI_INCONSISTENCY}
        results = localize(seq, [Clip(3, 9), Clip(10, 10)], labels, out_dir=tmp_path)
        assert len(results) == 1
        summary = json.loads((tmp_path / SUMMARY_NAME).read_text())
        clip = summary["clips"][0]
        assert clip["clip"] == [3, 9]
        assert clip["category"] == "ai_inconsistency"
        assert clip["heatmap"] == "clip3-9_heat.pgm"
        assert summary["skipped"] == [{"clip": [10, 10], "reason": "single-frame clip"}]
        heat = read_pgm(tmp_path / clip["heatmap"])
        assert heat.shape == (32, 32) and heat.max() == 255
        assert read_ppm(tmp_path / clip["overlay"]).shape == (32, 32, 3)

    def test_end_to_end_on_burst(self, tmp_path):
        seq = seq_of(burst_video())
        run = run_localization(seq, MockFrameClassifier("2"), tmp_path)
        assert run.results
        for r in run.results:
            assert r.clip.start <= 28 and r.clip.end >= 37
            assert 0.0 <= r.severity <= 1.0
        summary = json.loads((tmp_path / SUMMARY_NAME).read_text())
        assert summary["frames"] == 64
        assert run.summary()["clips"] == summary["clips"]

    def test_nothing_flagged_gives_empty_summary(self, tmp_path):
        seq = seq_of(burst_video())
        run = run_localization(seq, MockFrameClassifier("no"), tmp_path)
        assert run.results == [] and run.retained == []
        assert json.loads((tmp_path / SUMMARY_NAME).read_text())["clips"] == []
