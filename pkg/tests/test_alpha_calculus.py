import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from advbound.alpha_calculus import LossSpec, exp_alpha, find_normalizer, log_alpha, loss_value


def simplex_points(k):
    return st.lists(st.floats(0.001, 1.0), min_size=k, max_size=k).map(
        lambda xs: np.array(xs) / np.sum(xs))


class TestLogExpAlpha:
    def test_alpha_zero_is_linear(self):
        assert log_alpha(0.0, 0.4) == pytest.approx(-0.6, abs=1e-15)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0, 1.0 + 1e-10, 2.0, 5.0])
    def test_log_of_one_is_zero(self, alpha):
        assert log_alpha(alpha, 1.0) == 0.0

    def test_alpha_two(self):
        assert log_alpha(2.0, 0.5) == pytest.approx(-1.0, rel=1e-15)

    def test_zero_argument(self):
        assert log_alpha(0.5, 0.0) == pytest.approx(-2.0)
        assert log_alpha(1.0, 0.0) == -math.inf
        assert log_alpha(3.0, 0.0) == -math.inf

    def test_negative_argument_rejected(self):
        with pytest.raises(ValueError):
            log_alpha(0.5, -0.1)

    def test_exp_examples(self):
        assert exp_alpha(0.0, -0.25) == pytest.approx(0.75, abs=1e-15)
        assert exp_alpha(2.0, -2.0) == pytest.approx(1 / 3, rel=1e-14)

    def test_exp_domain(self):
        with pytest.raises(ValueError):
            exp_alpha(0.5, -2.5)
        with pytest.raises(ValueError):
            exp_alpha(2.0, 1.0)

    def test_roundtrip_example(self):
        assert exp_alpha(0.75, log_alpha(0.75, 0.37)) == pytest.approx(0.37, rel=1e-12)

    @given(alpha=st.sampled_from([0.0, 0.25, 0.5, 0.75, 0.999, 1.0, 1.5, 2.0, 4.0]),
           t=st.floats(1e-6, 50.0))
    def test_roundtrip(self, alpha, t):
        # relative condition number of exp_alpha at s = log_alpha(t) is |s| t^(alpha-1);
        # beyond ~1e3 the rounding of s alone exceeds the 1e-12 budget
        assume(abs(log_alpha(alpha, t)) * t ** (alpha - 1) <= 1e3)
        assert exp_alpha(alpha, log_alpha(alpha, t)) == pytest.approx(t, rel=1e-12)

    def test_near_one_routes_to_log(self):
        assert log_alpha(1 + 5e-10, 0.3) == math.log(0.3)

    @given(alpha=st.floats(0.0, 4.0), t=st.floats(0.01, 10.0))
    def test_increasing_and_concave(self, alpha, t):
        h = 1e-3 * t
        lo, mid, hi = log_alpha(alpha, t - h), log_alpha(alpha, t), log_alpha(alpha, t + h)
        assert hi > mid > lo
        assert hi - 2 * mid + lo <= 1e-12 * max(1.0, abs(mid))


class TestLossValue:
    def test_cross_entropy_uniform(self):
        assert loss_value(LossSpec.cross_entropy(), [1 / 3] * 3, 0) == pytest.approx(math.log(3))

    def test_quadratic_zero_at_vertex(self):
        assert loss_value(LossSpec.quadratic(), [0, 0, 1], 2) == 0.0

    def test_zero_one(self):
        assert loss_value(LossSpec.alpha_log(0), [0.7, 0.3], 1) == pytest.approx(0.7)

    def test_ce_at_zero_is_infinite(self):
        assert loss_value(LossSpec.cross_entropy(), [1.0, 0.0], 1) == math.inf

    def test_rejects_non_simplex(self):
        with pytest.raises(ValueError):
            loss_value(LossSpec.cross_entropy(), [0.7, 0.7], 0)

    def test_alpha_one_normalizes(self):
        assert LossSpec.alpha_log(1.0).kind == "cross_entropy"
        assert LossSpec.parse("alpha:0.75") == LossSpec.alpha_log(0.75)
        assert LossSpec.parse("zero_one").alpha == 0.0

    @settings(max_examples=200)
    @given(v=simplex_points(4), i=st.integers(0, 3),
           alphas=st.tuples(st.floats(0, 0.999), st.floats(0, 0.999)).map(sorted))
    def test_ordering_across_alpha(self, v, i, alphas):
        a, b = alphas
        la = loss_value(LossSpec.alpha_log(a), v, i)
        lb = loss_value(LossSpec.alpha_log(b), v, i)
        lce = loss_value(LossSpec.cross_entropy(), v, i)
        assert la <= lb + 1e-12
        assert lb <= lce + 1e-12


class TestNormalizer:
    def test_ce_symmetric(self):
        assert find_normalizer(1.0, [0, 0, 0]) == pytest.approx(math.log(3))

    def test_zero_one_symmetric(self):
        assert find_normalizer(0.0, [0, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_zero_one_clamped(self):
        # max{1 - Z, 0} + max{-4 - Z, 0} = 1 has root Z = 0
        assert find_normalizer(0.0, [0, 5]) == pytest.approx(0.0, abs=1e-12)

    def test_all_infinite_rejected(self):
        with pytest.raises(ValueError):
            find_normalizer(0.5, [math.inf, math.inf])

    @settings(max_examples=150)
    @given(alpha=st.sampled_from([0.0, 0.5, 0.75, 1.0, 1.5, 3.0]),
           a=st.lists(st.floats(-5, 5), min_size=1, max_size=6),
           shift=st.floats(-3, 3))
    def test_sum_to_one_and_shift(self, alpha, a, shift):
        a = np.array(a)
        z = find_normalizer(alpha, a)

        def probs(a, z):
            s = -a - z
            if alpha < 1:
                s = np.maximum(s, -1 / (1 - alpha))
            return exp_alpha(alpha, s)

        assert probs(a, z).sum() == pytest.approx(1.0, abs=1e-12)
        z2 = find_normalizer(alpha, a + shift)
        assert z2 == pytest.approx(z - shift, abs=1e-9)
        np.testing.assert_allclose(probs(a + shift, z2), probs(a, z), atol=1e-9)

    def test_infinite_entries_ignored(self):
        assert find_normalizer(0.5, [0.0, math.inf]) == pytest.approx(find_normalizer(0.5, [0.0]))
