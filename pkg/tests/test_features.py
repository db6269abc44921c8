import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindinv.errors import ConfigError, NotSPDError, RankDeficiencyError, TooFewFramesError
from blindinv.features import CovarianceModel, covariance_model, mel_filterbank, mfcc, sphericity_distance
from blindinv.signal import FrameSequence, Signal, frame_and_window

from oracles import mfcc_oracle, random_spd, sphericity_oracle


def frames_of(x, fs=16000):
    x = np.atleast_2d(x)
    return FrameSequence(x, x.shape[1], x.shape[1], fs)


class TestMfcc:
    def test_tone_matches_oracle(self):
        t = np.arange(480) / 16000
        frame = np.sin(2 * np.pi * 1000 * t)
        np.testing.assert_allclose(mfcc(frames_of(frame))[0], mfcc_oracle(frame, 16000), atol=1e-6)

    def test_random_frames_match_oracle(self, rng):
        frames = rng.normal(size=(5, 480))
        got = mfcc(frames_of(frames))
        for f, row in zip(frames, got):
            np.testing.assert_allclose(row, mfcc_oracle(f, 16000), atol=1e-6)

    def test_band_limited_matches_oracle(self, rng):
        frame = rng.normal(size=240)
        got = mfcc(frames_of(frame, 8000), fmin=300, fmax=3400)[0]
        np.testing.assert_allclose(got, mfcc_oracle(frame, 8000, n_fft=256, fmin=300, fmax=3400), atol=1e-6)

    @pytest.mark.parametrize("c", [0.01, 0.5, 30.0])
    def test_gain_invariance(self, rng, c):
        frames = rng.normal(size=(4, 480))
        np.testing.assert_allclose(mfcc(frames_of(c * frames)), mfcc(frames_of(frames)), atol=1e-8)

    def test_zero_frame(self):
        np.testing.assert_allclose(mfcc(frames_of(np.zeros(480))), 0.0, atol=1e-8)

    def test_shape(self, rng):
        seq = frame_and_window(Signal(rng.normal(size=16000)))
        assert mfcc(seq).shape == (len(seq), 12)

    def test_needs_enough_filters(self):
        with pytest.raises(ConfigError):
            mfcc(frames_of(np.ones(480)), n_mel=12, l=12)

    def test_filterbank_peaks_at_one(self):
        fb = mel_filterbank(20, 4096, 16000)
        assert np.all(fb.max(axis=1) > 0.95) and np.all(fb <= 1)


class TestCovariance:
    def test_rank_one(self):
        v = np.arange(1.0, 13.0)
        with pytest.raises(RankDeficiencyError):
            covariance_model(np.tile(v, (30, 1)))

    def test_basis(self):
        c = covariance_model(np.eye(12))
        np.testing.assert_allclose(c.matrix, np.eye(12) / 12)
        assert c.n_frames == 12

    def test_brute_force(self, rng):
        x = rng.normal(size=(1000, 12))
        acc = np.zeros((12, 12))
        for row in x:
            for i in range(12):
                for j in range(12):
                    acc[i, j] += row[i] * row[j]
        np.testing.assert_allclose(covariance_model(x).matrix, acc / 1000, atol=1e-12)

    def test_centered_option(self, rng):
        x = rng.normal(loc=3.0, size=(500, 12))
        np.testing.assert_allclose(covariance_model(x, centered=True).matrix, np.cov(x.T, bias=True), atol=1e-12)

    def test_too_few(self, rng):
        with pytest.raises(TooFewFramesError):
            covariance_model(rng.normal(size=(5, 12)))

    def test_json_roundtrip(self, rng):
        c = covariance_model(rng.normal(size=(50, 12)))
        back = CovarianceModel.from_dict(c.to_dict())
        np.testing.assert_array_equal(back.matrix, c.matrix)
        assert back.n_frames == 50 and c.to_dict()["l"] == 12


def model(a):
    return CovarianceModel(a, 100)


class TestSphericity:
    def test_self_distance(self, rng):
        a = random_spd(rng)
        assert sphericity_distance(model(a), model(a)) == pytest.approx(0, abs=1e-9)

    def test_scale(self, rng):
        a = random_spd(rng)
        assert sphericity_distance(model(3.7 * a), model(a)) == pytest.approx(0, abs=1e-9)

    def test_oracle(self, rng):
        a, b = random_spd(rng), random_spd(rng)
        assert sphericity_distance(model(a), model(b)) == pytest.approx(sphericity_oracle(a, b), abs=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_properties(self, seed):
        r = np.random.default_rng(seed)
        a, b = random_spd(r), random_spd(r)
        m = r.normal(size=(12, 12)) + 3 * np.eye(12)
        d = sphericity_distance(model(a), model(b))
        assert d >= -1e-9
        assert sphericity_distance(model(b), model(a)) == pytest.approx(d, abs=1e-9)
        assert sphericity_distance(model(m.T @ a @ m), model(m.T @ b @ m)) == pytest.approx(d, abs=1e-8)

    def test_rejects_non_spd(self, rng):
        a = random_spd(rng)
        bad = a.copy()
        bad[0, 0] = -100
        with pytest.raises(NotSPDError):
            sphericity_distance(model(bad), model(a))
        with pytest.raises(NotSPDError):
            sphericity_distance(model(a + np.triu(np.ones((12, 12)), 1)), model(a))
