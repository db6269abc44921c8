"""Waveform container and the fixed front-end preprocessing chain."""
from __future__ import annotations

import csv
import io
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DegenerateInputError

__all__ = [
    "Signal",
    "FrameSequence",
    "normalize_peak",
    "preemphasize",
    "bandlimit_telephone",
    "frame_and_window",
    "hamming",
    "read_wav",
    "write_wav",
    "signal_to_csv",
    "signal_from_csv",
]


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled mono waveform.

    ``samples`` is stored as a read-only float64 array.
    """

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("signal samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Signal):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def replace(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate)


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: np.ndarray  # shape (n_frames, frame_len)
    frame_len: int
    hop: int
    sample_rate: int

    def __len__(self) -> int:
        return self.frames.shape[0]


def normalize_peak(x: Signal) -> Signal:
    """Scale ``x`` so that its largest absolute sample is exactly 1."""
    if len(x) == 0:
        raise DegenerateInputError("cannot normalize an empty signal")
    peak = np.max(np.abs(x.samples))
    if peak == 0:
        raise DegenerateInputError("cannot normalize an all-zero signal")
    return x.replace(x.samples / peak)


def preemphasize(x: Signal, alpha: float = 0.95) -> Signal:
    """First-order pre-emphasis ``y[n] = x[n] - alpha * x[n-1]`` with ``x[-1] = 0``."""
    if not 0 <= alpha < 1:
        raise ConfigError(f"alpha must lie in [0, 1), got {alpha}")
    s = x.samples
    y = s.copy()
    y[1:] -= alpha * s[:-1]
    return x.replace(y)


def bandlimit_telephone(x: Signal, low_hz: float = 300.0, high_hz: float = 3400.0,
                        order: int = 4) -> Signal:
    """Zero-phase Butterworth band-pass approximating a telephone channel.

    This is a plausible narrow-band front end, not a bit-exact G.151 mask.
    """
    fs = x.sample_rate
    if fs < 8000 or high_hz >= fs / 2:
        raise ConfigError(f"sample rate {fs} Hz too low for a {low_hz}-{high_hz} Hz passband")
    if len(x) == 0:
        return x
    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")
    # sosfiltfilt needs some length for its edge padding; fall back to no padding
    padlen = min(3 * (2 * sos.shape[0] + 1), len(x) - 1)
    return x.replace(sps.sosfiltfilt(sos, x.samples, padlen=max(padlen, 0)))


def hamming(length: int) -> np.ndarray:
    """Symmetric Hamming window ``0.54 - 0.46 cos(2 pi n / (L - 1))``."""
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def frame_and_window(x: Signal, frame_ms: float = 30.0, overlap_frac: float = 2.0 / 3.0) -> FrameSequence:
    """Cut ``x`` into Hamming-weighted frames; trailing partial frames are dropped."""
    fs = x.sample_rate
    frame_len = int(round(frame_ms * fs / 1000.0))
    if frame_len < 2:
        raise ConfigError(f"frame of {frame_ms} ms at {fs} Hz is shorter than 2 samples")
    if not 0 <= overlap_frac < 1:
        raise ConfigError(f"overlap_frac must lie in [0, 1), got {overlap_frac}")
    hop = max(frame_len - int(np.floor(overlap_frac * frame_len)), 1)
    n = len(x)
    count = (n - frame_len) // hop + 1 if n >= frame_len else 0
    if count == 0:
        frames = np.empty((0, frame_len))
    else:
        idx = np.arange(frame_len)[None, :] + hop * np.arange(count)[:, None]
        frames = x.samples[idx] * hamming(frame_len)
    return FrameSequence(frames, frame_len, hop, fs)


# -- I/O ------------------------------------------------------------------

def read_wav(path) -> Signal:
    """Read a 16-bit PCM mono WAV file; samples are divided by 32768."""
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise ConfigError(f"{path}: only 16-bit PCM is supported")
        if wf.getnchannels() != 1:
            raise ConfigError(f"{path}: only mono files are supported")
        fs = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Signal(data, fs)


def write_wav(path, x: Signal) -> None:
    q = np.clip(np.round(x.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(x.sample_rate)
        wf.writeframes(q.tobytes())


def signal_to_csv(x: Signal) -> str:
    buf = io.StringIO()
    buf.write("amplitude\n")
    for v in x.samples:
        buf.write(f"{float(v)!r}\n")
    return buf.getvalue()


def signal_from_csv(text, sample_rate: int = 16000) -> Signal:
    if isinstance(text, Path):
        text = text.read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    return Signal([float(r["amplitude"]) for r in rows], sample_rate)
