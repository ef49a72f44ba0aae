import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from censim import (
    CensoredSample,
    ContinuousCdf,
    EmptySampleError,
    Observation,
    StepCdf,
    TailTruncationWarning,
    WeightSingularityError,
    c_integral,
    empirical_cdf,
    ideal_weights,
    km_fit,
    km_weights,
)
from censim.simulate import SimulationConfig, dgp_sample

THREE = CensoredSample(np.array([1.0, 2.0, 3.0]), np.array([True, False, True]))


def _loop_km(t, delta):
    """Textbook product-limit survival, one observation at a time.

    Written independently of the vectorised implementation: walk the sorted
    sample (events before censorings at ties) and multiply conditional
    survival factors.
    """
    order = np.lexsort((~delta, t))
    t, delta = t[order], delta[order]
    n = t.size
    surv, out_t, out_f = 1.0, [], []
    i = 0
    while i < n:
        j = i
        d = 0
        while j < n and t[j] == t[i]:
            d += int(delta[j])
            j += 1
        if d:
            surv *= 1.0 - d / (n - i)
            out_t.append(t[i])
            out_f.append(1.0 - surv)
        i = j
    return np.array(out_t), np.array(out_f)


@st.composite
def censored_samples(draw, max_n=40, ties=False):
    n = draw(st.integers(1, max_n))
    if ties:
        t = draw(st.lists(st.integers(0, 6).map(float), min_size=n, max_size=n))
    else:
        t = draw(st.lists(st.floats(-50, 50, allow_nan=False), min_size=n, max_size=n,
                          unique=True))
    d = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return CensoredSample(np.array(t), np.array(d))


class TestCensoredSample:
    def test_from_observations_roundtrip(self):
        obs = [Observation(1.0, True, (0.5, 2.0)), Observation(2.0, False, (1.0, -1.0))]
        s = CensoredSample.from_observations(obs)
        assert s.n == 2 and s.d == 2
        assert list(s) == [Observation(1.0, True, (0.5, 2.0)), Observation(2.0, False, (1.0, -1.0))]

    def test_rejects_nonfinite_time(self):
        with pytest.raises(ValueError):
            CensoredSample(np.array([1.0, np.inf]), np.array([True, True]))

    def test_censoring_fraction(self):
        assert THREE.censoring_fraction == pytest.approx(1 / 3)


class TestStepCdf:
    def test_right_continuous_and_left_limit(self):
        f = StepCdf([1.0, 3.0], [0.25, 1.0])
        assert f.value(0.999) == 0.0
        assert f.value(1.0) == 0.25
        assert f.value_minus(1.0) == 0.0
        assert f.value_minus(3.0) == 0.25
        assert f(10.0) == 1.0
        assert_allclose(f.masses, [0.25, 0.75])

    def test_validation(self):
        with pytest.raises(ValueError):
            StepCdf([2.0, 1.0], [0.5, 1.0])
        with pytest.raises(ValueError):
            StepCdf([1.0, 2.0], [0.6, 0.5])

    @given(censored_samples(ties=True), st.floats(-10, 10))
    def test_monotone_left_limit_below_value(self, s, t0):
        f = km_fit(s)
        assert f.value_minus(t0) <= f.value(t0)
        assert np.all(np.diff(f.cum_mass) >= 0)
        assert f.total_mass <= 1.0 + 1e-15


class TestKmFit:
    def test_hand_example_event(self):
        f = km_fit(THREE, "event")
        assert_allclose(f.jump_times, [1.0, 3.0])
        assert_allclose(f.cum_mass, [1 / 3, 1.0], rtol=0, atol=1e-15)

    def test_hand_example_censoring(self):
        g = km_fit(THREE, "censoring")
        assert_allclose(g.jump_times, [2.0])
        assert_allclose(g.cum_mass, [0.5])

    def test_uncensored_is_empirical(self):
        rng = np.random.default_rng(3)
        t = rng.normal(size=25)
        f = km_fit(CensoredSample(t, np.ones(25, bool)))
        e = empirical_cdf(t)
        assert_array_equal(f.jump_times, e.jump_times)
        assert_array_equal(f.cum_mass, e.cum_mass)

    def test_tie_event_before_censoring(self):
        # the censored point at t=1 is still at risk for the event at t=1
        s = CensoredSample(np.array([1.0, 1.0, 2.0]), np.array([True, False, True]))
        assert km_fit(s).value(1.0) == pytest.approx(1 / 3)
        # and has left the risk set when the censoring law is estimated
        assert km_fit(s, "censoring").value(1.0) == pytest.approx(1 / 2)

    def test_empty(self):
        with pytest.raises(EmptySampleError, match="empty sample"):
            km_fit(CensoredSample(np.empty(0), np.empty(0, bool)))

    @given(censored_samples(ties=True))
    def test_matches_loop_oracle(self, s):
        jt, cm = _loop_km(s.t, s.delta)
        f = km_fit(s)
        assert_allclose(f.jump_times, jt)
        assert_allclose(f.cum_mass, cm, rtol=0, atol=1e-13)

    @given(censored_samples(ties=True))
    def test_censoring_matches_loop_oracle(self, s):
        # flipped indicators, with tied events leaving the risk set first
        t = s.t
        order = np.lexsort((s.delta, t))  # censorings first for the flipped law
        t2, c2 = t[order], ~s.delta[order]
        n = t.size
        surv, out = 1.0, []
        i = 0
        while i < n:
            j, d = i, 0
            while j < n and t2[j] == t2[i]:
                d += int(c2[j])
                j += 1
            if d:
                # at-risk excludes tied events, which left first
                at_risk = n - i - int(np.sum(~c2[i:j]))
                surv *= 1.0 - d / at_risk
                out.append(1.0 - surv)
            i = j
        assert_allclose(km_fit(s, "censoring").cum_mass, out, rtol=0, atol=1e-13)


class TestKmWeights:
    def test_hand_example(self):
        assert_allclose(km_weights(THREE).weights, [1 / 3, 0.0, 2 / 3], rtol=0, atol=1e-15)

    def test_uncensored_equal(self):
        n = 17
        s = CensoredSample(np.arange(n, dtype=float), np.ones(n, bool))
        assert_allclose(km_weights(s).weights, np.full(n, 1 / n), rtol=0, atol=1e-15)

    def test_single_censored(self):
        w = km_weights(CensoredSample(np.array([5.0]), np.array([False])))
        assert_array_equal(w.weights, [0.0])
        assert w.total_mass == 0.0

    def test_tied_events_split(self):
        s = CensoredSample(np.array([1.0, 1.0, 2.0, 3.0]), np.array([True, True, False, True]))
        w = km_weights(s).weights
        assert w[0] == w[1] == pytest.approx(0.25)
        assert w[2] == 0.0
        assert w[3] == pytest.approx(0.5)

    @given(censored_samples())
    @settings(max_examples=200)
    def test_satten_datta_identity(self, s):
        g = km_fit(s, "censoring")
        w = km_weights(s).weights
        expected = s.delta / (s.n * (1.0 - g.value_minus(s.t)))
        assert np.max(np.abs(w - expected)) < 1e-12

    @given(censored_samples(ties=True))
    def test_mass_conservation(self, s):
        ws = km_weights(s)
        assert np.all(ws.weights >= 0)
        assert np.all(ws.weights[~s.delta] == 0)
        f = km_fit(s)
        assert ws.total_mass == pytest.approx(f.total_mass, abs=1e-12)
        assert ws.total_mass <= 1 + 1e-12
        last = s.t == s.t.max()
        if np.all(s.delta[last]):
            assert ws.total_mass == pytest.approx(1.0, abs=1e-12)
        else:
            assert ws.total_mass < 1.0
            assert ws.defect > 0


class TestIdealWeights:
    def test_no_censoring_law(self):
        s = CensoredSample(np.array([1.0, 2.0, 3.0]), np.array([True, False, True]))
        w = ideal_weights(s, StepCdf([], [])).weights
        assert_allclose(w, [1 / 3, 0.0, 1 / 3])

    def test_single_point(self):
        g = StepCdf([0.5], [0.5])
        w = ideal_weights(CensoredSample(np.array([1.0]), np.array([True])), g)
        assert_allclose(w.weights, [2.0])

    def test_singularity(self):
        g = StepCdf([0.5], [1.0])
        with pytest.raises(WeightSingularityError, match="weight singularity"):
            ideal_weights(CensoredSample(np.array([1.0]), np.array([True])), g)

    def test_km_approaches_ideal(self):
        # median over draws of max |W_in - W_i*|, scaled by n, shrinks with n
        def gap(n, seed):
            cfg = SimulationConfig(2, 0.17, n=n)
            draw = dgp_sample(cfg, np.random.default_rng(seed))
            w = km_weights(draw.sample).weights
            w_star = ideal_weights(draw.sample, draw.g_true).weights
            return n * np.max(np.abs(w - w_star))

        small = np.median([gap(200, s) for s in range(30)])
        large = np.median([gap(3200, s) for s in range(30)])
        assert large < small


class TestCIntegral:
    def test_no_censoring(self):
        h = empirical_cdf([1.0, 2.0, 3.0])
        assert_array_equal(c_integral(StepCdf([], []), h, [0.0, 2.0, 9.0]), [0.0, 0.0, 0.0])

    def test_single_jump(self):
        g = StepCdf([2.0], [0.5])
        h = StepCdf([1.0, 2.0, 3.0], [0.25, 0.5, 1.0])
        assert c_integral(g, h, 1.999) == 0.0
        assert c_integral(g, h, 2.0) == pytest.approx(2.0)
        assert c_integral(g, h, 7.0) == pytest.approx(2.0)
        assert c_integral(g, h, 2.0, strict=True) == 0.0

    def test_tail_truncation(self):
        s = CensoredSample(np.array([1.0, 2.0]), np.array([True, False]))
        g, h = km_fit(s, "censoring"), empirical_cdf(s.t)
        with pytest.warns(TailTruncationWarning):
            out = c_integral(g, h, 5.0)
        assert out == 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert c_integral(g, h, 1.5) == 0.0

    @given(censored_samples(ties=True), st.floats(-60, 60), st.floats(0, 30))
    def test_monotone(self, s, y, step):
        g, h = km_fit(s, "censoring"), empirical_cdf(s.t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailTruncationWarning)
            assert c_integral(g, h, y) <= c_integral(g, h, y + step)

    def test_continuous_cdf_left_limit(self):
        g = ContinuousCdf(lambda t: np.clip(t, 0, 1))
        assert g.value_minus(0.3) == g.value(0.3) == pytest.approx(0.3)
