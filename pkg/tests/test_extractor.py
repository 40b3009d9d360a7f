import math

import numpy as np
import pytest

from qrouter.extractor import (
    ScoringWeights,
    as_pairs,
    default_weights,
    frame_probabilities,
    logistic_score,
    robust_normalize,
    sigmoid,
)


def percentile7(values, q):
    """Hyndman-Fan type 7 (linear interpolation) by hand."""
    v = sorted(values)
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


class TestRobustNormalize:
    def test_hand_quantiles(self):
        out = robust_normalize(np.array([[1.0], [2], [3], [4], [5]]))
        assert np.allclose(out[:, 0], [-1, -0.5, 0, 0.5, 1], atol=1e-9, rtol=0)

    def test_zero_iqr_guard(self):
        out = robust_normalize(np.array([[0.0], [0], [0], [0], [1000]]))
        assert out[4, 0] == pytest.approx(1e9, abs=1e-9 * 1e9)
        assert np.isfinite(out).all()
        assert not out[:4].any()

    def test_matches_type7_oracle(self, rng):
        for _ in range(40):
            x = rng.normal(size=(int(rng.integers(1, 30)), 3))
            out = robust_normalize(x)
            for j in range(3):
                col = x[:, j].tolist()
                m = percentile7(col, 0.5)
                q = max(percentile7(col, 0.75) - percentile7(col, 0.25), 1e-6)
                assert np.allclose(out[:, j], (x[:, j] - m) / q, rtol=1e-12, atol=1e-9)

    def test_affine_invariance(self, rng):
        for _ in range(20):
            x = rng.normal(size=(15, 2))
            a, c = rng.uniform(0.5, 5), rng.uniform(-10, 10)
            assert np.allclose(robust_normalize(a * x + c), robust_normalize(x), atol=1e-9)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            robust_normalize(np.zeros(5))


class TestLogistic:
    def test_closed_form(self):
        x = np.zeros((1, 7))
        x[0, 0] = 1
        assert logistic_score(x)[0] == pytest.approx(1 / (1 + math.exp(-0.8)), abs=1e-9)
        assert logistic_score(x)[0] == pytest.approx(0.68997, abs=1e-5)

    def test_default_weights(self):
        w = default_weights()
        assert w.b == 0
        assert w.w.tolist() == [0.8, 0, 0.6, 0, 1.0, 0, 0]

    def test_strictly_inside_unit_interval(self, rng):
        for scale in (1, 1e2, 1e6):
            x = rng.normal(size=(50, 7)) * scale
            p = logistic_score(x)
            assert ((p > 0) & (p < 1)).all()

    def test_extreme_inputs_do_not_overflow(self):
        p = logistic_score(np.array([[1e308, 0, 0, 0, 0, 0, 0], [-1e308, 0, 0, 0, 0, 0, 0]]))
        assert 0 < p[1] < p[0] < 1

    def test_monotone_in_score(self, rng):
        z = np.sort(rng.normal(size=200) * 10)
        s = sigmoid(z)
        assert (np.diff(s) >= 0).all()

    def test_median_frame_sits_at_half(self, rng):
        # symmetric data: the median frame has normalized features of zero
        base = rng.normal(size=(10, 7))
        m = np.vstack([base, -base, np.zeros((1, 7))])
        p = frame_probabilities(m)
        assert np.median(p) == pytest.approx(0.5, abs=1e-12)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            logistic_score(np.zeros((3, 6)))


class TestScoringWeights:
    def test_named_weights(self):
        w = ScoringWeights.from_dict({"w": {"lap_var": 2.0}, "b": -1})
        assert w.w[1] == 2.0 and w.w.sum() == 2.0 and w.b == -1.0

    def test_unknown_feature(self):
        with pytest.raises(ValueError):
            ScoringWeights.from_dict({"w": {"sharpness": 1.0}})

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            ScoringWeights(w=[1.0, 2.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            ScoringWeights(b=float("nan"))


def test_pairs_are_one_based():
    assert as_pairs([0.1, 0.9]) == [(1, 0.1), (2, 0.9)]
