"""Synthetic speaker corpus: AR(10) "vocal tracts" driven by Laplacian noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .channel import FirFilter, fir_convolve
from .signal import Signal, normalize_peak

AR_ORDER = 10
POLE_RADIUS = (0.85, 0.98)
BURN_IN = 2000
MIN_SPECTRAL_DISTANCE_DB = 3.0

# Fixed colorations standing in for two different microphones.
MICROPHONES = {
    "mic1": FirFilter([1.0, 0.35, -0.1], 0),
    "mic2": FirFilter([1.0, -0.45, 0.2], 0),
}


@dataclass
class Corpus:
    """Per-microphone training and test material plus the generating AR polynomials."""

    training: dict  # mic -> speaker -> Signal
    tests: dict  # mic -> speaker -> list[Signal]
    ar_polys: dict  # speaker -> denominator coefficients


def random_ar_poly(rng: np.random.Generator, order: int = AR_ORDER) -> np.ndarray:
    """Stable all-pole denominator with conjugate pole pairs of radius in [0.85, 0.98]."""
    poles = []
    for _ in range(order // 2):
        r = rng.uniform(*POLE_RADIUS)
        th = rng.uniform(0.05, np.pi - 0.05)
        poles += [r * np.exp(1j * th), r * np.exp(-1j * th)]
    return np.real(np.poly(poles))


def log_spectrum_db(a: np.ndarray, n_freq: int = 512) -> np.ndarray:
    _, h = sps.freqz([1.0], a, worN=n_freq)
    return 20.0 * np.log10(np.abs(h))


def spectral_distance_db(a1: np.ndarray, a2: np.ndarray) -> float:
    """RMS difference of the two AR log spectra after removing the mean (gain) offset."""
    d = log_spectrum_db(a1) - log_spectrum_db(a2)
    return float(np.sqrt(np.mean((d - d.mean()) ** 2)))


def _ar_signal(a: np.ndarray, n: int, rng: np.random.Generator, fs: int) -> Signal:
    x = sps.lfilter([1.0], a, rng.laplace(size=n + BURN_IN))[BURN_IN:]
    return normalize_peak(Signal(x, fs))


def synth_corpus(n_speakers: int = 10, train_seconds: float = 60.0, n_test_sentences: int = 5,
                 test_seconds: float = 2.0, sample_rate: int = 16000, seed: int = 0) -> Corpus:
    """Generate a deterministic corpus for ``seed``.

    Training and test material of a speaker come from the same AR process
    but from independent excitation streams. Each signal is then colored by
    both microphone filters.
    """
    root = np.random.SeedSequence(seed)
    pole_seq, *speaker_seqs = root.spawn(n_speakers + 1)
    pole_rng = np.random.default_rng(pole_seq)
    polys: dict = {}
    ids = [f"spk{i:02d}" for i in range(n_speakers)]
    for sid in ids:
        while True:
            a = random_ar_poly(pole_rng)
            if all(spectral_distance_db(a, b) > MIN_SPECTRAL_DISTANCE_DB for b in polys.values()):
                break
        polys[sid] = a
    n_train = int(round(train_seconds * sample_rate))
    n_test = int(round(test_seconds * sample_rate))
    raw_train, raw_tests = {}, {}
    for sid, seq in zip(ids, speaker_seqs):
        train_seq, *test_seqs = seq.spawn(n_test_sentences + 1)
        raw_train[sid] = _ar_signal(polys[sid], n_train, np.random.default_rng(train_seq), sample_rate)
        raw_tests[sid] = [_ar_signal(polys[sid], n_test, np.random.default_rng(s), sample_rate)
                          for s in test_seqs]
    training = {mic: {sid: normalize_peak(fir_convolve(x, h)) for sid, x in raw_train.items()}
                for mic, h in MICROPHONES.items()}
    tests = {mic: {sid: [normalize_peak(fir_convolve(x, h)) for x in xs] for sid, xs in raw_tests.items()}
             for mic, h in MICROPHONES.items()}
    return Corpus(training, tests, polys)
