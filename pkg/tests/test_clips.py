import numpy as np
import pytest

from qrouter.clips import Clip, hysteresis_clips, merge_clips, raw_clips


def oracle_clips(p, tau_high, tau_low, l_min, padding):
    """Segment view: a clip is a maximal run with p >= tau_low that starts at its first p >= tau_high."""
    n = len(p)
    runs, t = [], 0
    while t < n:
        if p[t] >= tau_low:
            s = t
            while t < n and p[t] >= tau_low:
                t += 1
            runs.append((s, t - 1))
        else:
            t += 1
    cover = np.zeros(n + 2, dtype=bool)
    for s, e in runs:
        opens = [i for i in range(s, e + 1) if p[i] >= tau_high]
        if not opens:
            continue
        start, end = opens[0] + 1, e + 1
        if end - start + 1 < l_min:
            continue
        cover[max(1, start - padding):min(n, end + padding) + 1] = True
    out, t = [], 1
    while t <= n:
        if cover[t]:
            s = t
            while t <= n and cover[t]:
                t += 1
            out.append(Clip(s, t - 1))
        else:
            t += 1
    return out


class TestHysteresis:
    def test_constant_high(self):
        assert hysteresis_clips([0.7] * 10, l_min=8, padding=0) == [Clip(1, 10)]

    def test_short_run_dropped(self):
        assert hysteresis_clips([0.7, 0.7, 0.7] + [0.3] * 7, l_min=8) == []

    def test_padding_clamped(self):
        p = [0.1] * 8 + [0.9] * 9 + [0.1] * 3
        assert hysteresis_clips(p, padding=4) == [Clip(5, 20)]

    def test_low_threshold_keeps_clip_open(self):
        p = [0.9] + [0.55] * 9 + [0.1]
        assert raw_clips(p, 0.65, 0.5) == [Clip(1, 10)]

    def test_does_not_open_below_high(self):
        assert raw_clips([0.6] * 20, 0.65, 0.5) == []

    def test_padded_clips_merge(self):
        # raw runs [1, 8] and [11, 18]; padding 1 makes them touch at 9/10
        p = [0.9] * 8 + [0.1] * 2 + [0.9] * 8
        assert hysteresis_clips(p, padding=1) == [Clip(1, 18)]
        assert hysteresis_clips(p, padding=0) == [Clip(1, 8), Clip(11, 18)]

    def test_matches_oracle(self, rng):
        for _ in range(2000):
            n = int(rng.integers(1, 65))
            p = rng.random(n)
            lo, hi = np.sort(rng.uniform(0.01, 0.99, 2))
            l_min = int(rng.integers(1, 10))
            pad = int(rng.integers(0, 6))
            assert hysteresis_clips(p, hi, lo, l_min, pad) == oracle_clips(p, hi, lo, l_min, pad)

    def test_invariants(self, rng):
        for _ in range(500):
            n = int(rng.integers(1, 80))
            p = rng.random(n)
            clips = hysteresis_clips(p, l_min=3)
            for a, b in zip(clips, clips[1:]):
                assert a.end + 1 < b.start
            for c in clips:
                assert 1 <= c.start <= c.end <= n
                assert c.length >= 3

    @pytest.mark.parametrize("args", [(0.4, 0.5), (1.0, 0.5), (0.6, 0.0)])
    def test_bad_thresholds(self, args):
        with pytest.raises(ValueError):
            hysteresis_clips([0.5], *args)


class TestClip:
    def test_helpers(self):
        c = Clip(3, 5)
        assert c.length == 3
        assert c.covers(3) and c.covers(5) and not c.covers(6)
        assert c.pairs() == [(3, 4), (4, 5)]

    def test_merge_touching(self):
        assert merge_clips([Clip(5, 8), Clip(1, 4), Clip(10, 12)]) == [Clip(1, 8), Clip(10, 12)]
