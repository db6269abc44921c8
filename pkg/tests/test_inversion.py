import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from blindinv.channel import FirFilter, TanhSaturation, fir_convolve, wiener_forward
from blindinv.errors import ConfigError, DegenerateInputError
from blindinv.inversion import (
    CostModel,
    HammersteinInverse,
    InversionConfig,
    MonotoneMap,
    cost_terms,
    estimate_inverse,
    filter_log_gain,
    init_inverse,
    inversion_cost,
    marginal_entropy,
    mean_log_derivative,
)
from blindinv.signal import Signal


def log_gain_oracle(taps):
    """(1/2pi) * integral of log|W(theta)| over one period, by adaptive quadrature."""
    def integrand(th):
        return math.log(abs(sum(c * np.exp(-1j * t * th) for t, c in enumerate(taps))))
    val, _ = quad(integrand, 0, 2 * np.pi, limit=200)
    return val / (2 * np.pi)


class TestEntropy:
    def test_uniform(self):
        x = np.random.default_rng(0).uniform(0, 1, 10_000)
        assert marginal_entropy(x) == pytest.approx(0.0, abs=0.05)

    def test_normal(self):
        x = np.random.default_rng(0).normal(size=10_000)
        assert marginal_entropy(x) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=0.05)

    @given(st.floats(1e-3, 1e3))
    @settings(max_examples=30)
    def test_scale_equivariance(self, c):
        x = np.random.default_rng(1).laplace(size=2000)
        assert marginal_entropy(c * x) - marginal_entropy(x) == pytest.approx(math.log(c), abs=1e-12)

    def test_sign_flip_invariant(self, rng):
        x = rng.normal(size=500)
        assert marginal_entropy(-x) == pytest.approx(marginal_entropy(x), abs=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(DegenerateInputError):
            marginal_entropy(np.arange(5.0), m=2)

    def test_ties_are_clamped(self):
        x = np.repeat(np.arange(50.0), 20)
        h, clamped = marginal_entropy(x, m=5, return_clamped=True)
        assert clamped > 0 and math.isfinite(h)

    def test_deterministic(self, rng):
        x = rng.normal(size=300)
        assert marginal_entropy(x) == marginal_entropy(x.copy())


class TestLogGain:
    def test_unit(self):
        assert filter_log_gain(FirFilter([1.0])) == 0.0

    @pytest.mark.parametrize("c", [0.3, 2.0, -5.0])
    def test_constant(self, c):
        assert filter_log_gain(FirFilter([c])) == pytest.approx(math.log(abs(c)), abs=1e-14)

    def test_minimum_phase(self):
        assert log_gain_oracle([1, -0.5]) == pytest.approx(0.0, abs=1e-9)
        assert filter_log_gain(FirFilter([1, -0.5])) == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("taps", [[1, -2.0], [0.3, 1.0, 0.4], [1, 0.9, -0.2, 0.05]])
    def test_against_quadrature(self, taps):
        assert filter_log_gain(FirFilter(taps)) == pytest.approx(log_gain_oracle(taps), abs=1e-6)

    def test_reports_floored_bins(self):
        # [1, 1] has a zero exactly at theta = pi, which is bin N/2
        _, floored = filter_log_gain(FirFilter([1.0, 1.0]), 64, return_floored=True)
        assert floored == 1


class TestMonotoneMap:
    def test_identity_slope(self):
        g = MonotoneMap.from_knots([-1, 0, 1, 2], [-1, 0, 1, 2])
        assert mean_log_derivative(g, np.linspace(-3, 3, 50)) == pytest.approx(0.0, abs=1e-15)

    def test_uniform_slope(self):
        g = MonotoneMap.from_knots([0, 1, 2, 3], [0, 3, 6, 9])
        assert mean_log_derivative(g, np.array([0.5, 1.5, 10.0])) == pytest.approx(math.log(3))

    def test_split_slopes(self):
        g = MonotoneMap.from_knots([0, 1, 2, 3], [0, 1, 1 + math.e, 1 + 2 * math.e])
        e = np.array([0.2, 0.5, 1.5, 2.5])
        assert mean_log_derivative(g, e) == pytest.approx(0.5)

    def test_linear_extension(self):
        g = MonotoneMap.from_knots([0, 1, 2], [0, 2, 3])
        np.testing.assert_allclose(g(np.array([-1.0, 3.0])), [-2.0, 4.0])

    def test_basis_reproduces_map(self, rng):
        g = MonotoneMap(np.sort(rng.normal(size=8)), rng.normal(size=7), 0.3)
        e = rng.normal(scale=2, size=200)
        np.testing.assert_allclose(g.anchor + g.basis(e) @ np.exp(g.log_increments), g(e), atol=1e-12)

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=10))
    def test_always_increasing(self, li):
        g = MonotoneMap(np.arange(len(li) + 1.0), li, 0.0)
        assert np.all(np.diff(g(np.linspace(-2, len(li) + 2, 300))) > 0)

    def test_table_replay(self, rng):
        g = MonotoneMap(np.sort(rng.normal(size=6)), rng.normal(size=5), -1.0)
        e = rng.normal(scale=3, size=100)
        np.testing.assert_allclose(g.to_table()(e), g(e), atol=1e-12)


@pytest.fixture(scope="module")
def uniform_sample():
    return Signal(np.random.default_rng(7).uniform(-1, 1, 4000))


class TestCost:
    cfg = InversionConfig()

    def test_identity_cost_is_entropy(self, uniform_sample):
        inv = init_inverse(uniform_sample, self.cfg)
        # g is the identity on its knots and beyond, w is an impulse
        assert inversion_cost(inv, uniform_sample, self.cfg) == pytest.approx(
            marginal_entropy(uniform_sample.samples), abs=1e-12)

    def test_terms_consistent(self, uniform_sample, rng):
        inv = init_inverse(uniform_sample, self.cfg)
        g = MonotoneMap(inv.g.knots_x, inv.g.log_increments + rng.normal(scale=0.3, size=20), 0.1)
        w = FirFilter(inv.w.taps + rng.normal(scale=0.1, size=21), 10)
        inv = HammersteinInverse(g, w)
        t = cost_terms(inv, uniform_sample, self.cfg)
        y = fir_convolve(Signal(g(uniform_sample.samples)), w).samples
        assert t.entropy == pytest.approx(marginal_entropy(y), abs=1e-12)
        assert t.log_gain == pytest.approx(filter_log_gain(w, 1024), abs=1e-12)
        assert t.mean_log_derivative == pytest.approx(mean_log_derivative(g, uniform_sample.samples), abs=1e-12)
        assert inversion_cost(inv, uniform_sample, self.cfg) == pytest.approx(
            t.entropy - t.log_gain - t.mean_log_derivative, abs=1e-12)

    @pytest.mark.parametrize("c", [0.25, 3.0, 17.0])
    def test_g_scaling_invariance(self, uniform_sample, rng, c):
        inv = init_inverse(uniform_sample, self.cfg)
        g = MonotoneMap(inv.g.knots_x, rng.normal(scale=0.3, size=20), 0.0)
        a = inversion_cost(HammersteinInverse(g, inv.w), uniform_sample, self.cfg)
        b = inversion_cost(HammersteinInverse(g.scaled(c), inv.w), uniform_sample, self.cfg)
        assert b == pytest.approx(a, abs=1e-12)

    @pytest.mark.parametrize("c", [0.1, 2.5, 40.0])
    def test_w_scaling_invariance(self, uniform_sample, rng, c):
        inv = init_inverse(uniform_sample, self.cfg)
        w = rng.normal(size=21)
        a = inversion_cost(HammersteinInverse(inv.g, FirFilter(w, 10)), uniform_sample, self.cfg)
        b = inversion_cost(HammersteinInverse(inv.g, FirFilter(c * w, 10)), uniform_sample, self.cfg)
        assert b == pytest.approx(a, abs=1e-6)

    def test_probes_match_direct(self, uniform_sample, rng):
        inv = init_inverse(uniform_sample, self.cfg)
        model = CostModel(uniform_sample.samples, inv.g.knots_x, self.cfg)
        theta = model.pack(inv) + rng.normal(scale=0.05, size=42)
        for i, step, val in model.probes(theta, 1e-4):
            shifted = theta.copy()
            shifted[i] += step
            assert val == pytest.approx(model(shifted), abs=1e-10)
        assert model(theta) == pytest.approx(inversion_cost(model.unpack(theta), uniform_sample, self.cfg), abs=1e-12)

    def test_gradient_check(self, rng):
        e = Signal(np.tanh(2 * np.random.default_rng(3).uniform(-1, 1, 4000)))
        inv = init_inverse(e, self.cfg)
        model = CostModel(e.samples, inv.g.knots_x, self.cfg)
        for _ in range(3):
            theta = model.pack(inv) + rng.normal(scale=0.2, size=42)
            central = model.gradient(theta, 1e-4)
            forward = model.gradient(theta, 0.5e-4, scheme="forward")
            assert np.linalg.norm(central - forward) < 0.05 * np.linalg.norm(central)


class TestInit:
    cfg = InversionConfig()

    def test_uniform(self, uniform_sample):
        inv = init_inverse(uniform_sample, self.cfg)
        np.testing.assert_allclose(inv.g.knots_x, np.linspace(-0.98, 0.98, 21), atol=0.06)
        np.testing.assert_allclose(inv.g.knots_y, inv.g.knots_x, atol=1e-12)
        assert inversion_cost(inv, uniform_sample, self.cfg) == pytest.approx(
            marginal_entropy(uniform_sample.samples), abs=1e-9)

    def test_collapsed_knots(self):
        e = Signal(np.tile([-1.0, 0.0, 1.0], 400))
        with pytest.raises(DegenerateInputError):
            init_inverse(e, self.cfg)

    def test_constant(self):
        with pytest.raises(DegenerateInputError):
            init_inverse(Signal(np.ones(600)), self.cfg)

    def test_centered_impulse(self, uniform_sample):
        inv = init_inverse(uniform_sample, self.cfg)
        assert inv.w.reference_index == 10 and inv.w.taps[10] == 1 and np.sum(np.abs(inv.w.taps)) == 1
        assert filter_log_gain(inv.w) == 0.0


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(n_knots=3), dict(w_len=4), dict(w_len=21, fft_bins=64),
                                    dict(spacing_m=0), dict(step_init=0)])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            InversionConfig(**kw)


def check_trace(trace):
    c = np.asarray(trace.cost_per_iteration)
    assert np.all(np.diff(c) <= 0)
    assert trace.final_cost == c[-1]
    assert trace.terminated_by in ("tolerance", "max_iters")


class TestEstimate:
    def test_no_distortion(self):
        s = np.random.default_rng(0).uniform(-1, 1, 10_000)
        inv, trace = estimate_inverse(Signal(s))
        check_trace(trace)
        assert abs(trace.final_cost - trace.cost_per_iteration[0]) < 0.02
        lo, hi = np.percentile(s, [5, 95])
        mask = (s >= lo) & (s <= hi)
        x = inv.g(s[mask])
        fit = np.polyval(np.polyfit(s[mask], x, 1), s[mask])
        assert np.sqrt(np.mean((x - fit) ** 2)) < 0.05 * np.std(x)

    def test_wiener_recovery(self):
        s = np.random.default_rng(0).uniform(-1, 1, 10_000)
        e = wiener_forward(Signal(s), FirFilter([1, 0.5]), TanhSaturation(2))
        inv, trace = estimate_inverse(e)
        check_trace(trace)
        assert np.all(inv.g.slopes > 0)
        y = inv.apply(e).samples
        best = max(abs(np.corrcoef(np.roll(y, k)[30:-30], s[30:-30])[0, 1]) for k in range(-21, 22))
        assert best > 0.95

    def test_short_signal(self):
        with pytest.raises(DegenerateInputError):
            estimate_inverse(Signal(np.random.default_rng(0).normal(size=300)))

    def test_deterministic_and_serializable(self):
        e = Signal(np.tanh(2 * np.random.default_rng(5).laplace(size=2000)))
        cfg = InversionConfig(max_iters=15)
        inv1, tr1 = estimate_inverse(e, cfg)
        inv2, tr2 = estimate_inverse(e, cfg)
        assert inv1.to_json() == inv2.to_json()
        assert tr1.cost_per_iteration == tr2.cost_per_iteration
        check_trace(tr1)
        d = json.loads(inv1.to_json())
        assert set(d) == {"g", "w"} and set(d["g"]) == {"knots_x", "knots_y"}
        back = HammersteinInverse.from_json(inv1.to_json())
        np.testing.assert_allclose(back.apply(e).samples, inv1.apply(e).samples, atol=1e-10)
        lines = tr1.to_csv().splitlines()
        assert lines[0] == "iteration,cost" and len(lines) == len(tr1.cost_per_iteration) + 1

    def test_max_iters_zero(self):
        e = Signal(np.random.default_rng(0).laplace(size=1000))
        inv, trace = estimate_inverse(e, InversionConfig(max_iters=0))
        assert trace.terminated_by == "max_iters" and len(trace.cost_per_iteration) == 1
