"""MFCC front end, second-moment speaker models and the sphericity distance."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .errors import ConfigError, NotSPDError, RankDeficiencyError, TooFewFramesError
from .signal import FrameSequence

LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mel: int, n_fft: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on an HTK mel scale, shape ``(n_mel, n_fft // 2 + 1)``."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mel + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(frames: FrameSequence, n_mel: int = 20, l: int = 12, n_fft: int | None = None,
         fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Mel-cepstral coefficients ``c1..cl`` for each frame, shape ``(n_frames, l)``.

    Power spectrum -> triangular mel filterbank -> log (floored at 1e-10)
    -> orthonormal DCT-II, dropping the 0th coefficient. Because ``c0`` is
    dropped, a gain applied to a frame changes no output coefficient.
    """
    if frames.frame_len < 2:
        raise ConfigError("frames must hold at least 2 samples")
    if n_mel < l + 1:
        raise ConfigError(f"n_mel ({n_mel}) must exceed the number of coefficients ({l})")
    n_fft = n_fft or int(2 ** np.ceil(np.log2(frames.frame_len)))
    if len(frames) == 0:
        return np.empty((0, l))
    spec = np.abs(np.fft.rfft(frames.frames, n_fft, axis=1)) ** 2
    fb = mel_filterbank(n_mel, n_fft, frames.sample_rate, fmin, fmax)
    logmel = np.log(np.maximum(spec @ fb.T, LOG_FLOOR))
    return dct(logmel, type=2, norm="ortho", axis=1)[:, 1:l + 1]


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    matrix: np.ndarray
    n_frames: int

    @property
    def l(self) -> int:
        return self.matrix.shape[0]

    def check_spd(self) -> None:
        a = self.matrix
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotSPDError("covariance model must be a square matrix")
        if not np.allclose(a, a.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max())):
            raise NotSPDError("covariance model is not symmetric")
        if np.linalg.eigvalsh(a).min() <= 0:
            raise NotSPDError("covariance model is not positive definite")

    def to_dict(self) -> dict:
        return {"l": self.l, "matrix": self.matrix.ravel().tolist(), "n_frames": self.n_frames}

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        l = int(d["l"])
        return cls(np.asarray(d["matrix"], dtype=np.float64).reshape(l, l), int(d["n_frames"]))


def covariance_model(features, centered: bool = False) -> CovarianceModel:
    """Second-moment matrix ``(1/n) sum x_n x_n^T`` of the feature rows.

    With ``centered=True`` the per-dimension mean is removed first.
    """
    x = np.asarray(features, dtype=np.float64)
    n, l = x.shape
    if n < l:
        raise TooFewFramesError(f"need at least l={l} feature vectors, got {n}")
    if centered:
        x = x - x.mean(axis=0)
    c = x.T @ x / n
    c = 0.5 * (c + c.T)
    eig = np.linalg.eigvalsh(c)
    tol = 1e-10 * np.trace(c) / l
    if eig.min() < tol:
        rank = int(np.count_nonzero(eig >= tol))
        raise RankDeficiencyError(f"covariance from {n} frames is rank deficient (rank {rank} < {l})")
    return CovarianceModel(c, n)


def sphericity_distance(c_test: CovarianceModel, c_model: CovarianceModel) -> float:
    """Arithmetic-harmonic sphericity ``log(tr(A B^-1) tr(B A^-1)) - 2 log l``.

    Nonnegative, symmetric, and zero exactly when the matrices are proportional.
    """
    c_test.check_spd()
    c_model.check_spd()
    a, b = c_test.matrix, c_model.matrix
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    l = a.shape[0]
    t1 = np.trace(np.linalg.solve(b, a))  # tr(B^-1 A) = tr(A B^-1)
    t2 = np.trace(np.linalg.solve(a, b))
    return float(np.log(t1 * t2) - 2.0 * np.log(l))


def features_to_csv(features) -> str:
    buf = io.StringIO()
    x = np.asarray(features)
    buf.write(",".join(f"c{i + 1}" for i in range(x.shape[1])) + "\n")
    for row in x:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def model_to_json(model: CovarianceModel) -> str:
    return json.dumps(model.to_dict())
