"""Forward model of the distorting channel: FIR filter then memoryless map."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .signal import Signal, normalize_peak

__all__ = [
    "FirFilter",
    "TanhSaturation",
    "IdentityMap",
    "TableMap",
    "MemorylessMap",
    "fir_convolve",
    "apply_nonlinearity",
    "wiener_forward",
    "make_saturated_testset",
    "channel_to_json",
    "channel_from_json",
]


@dataclass(frozen=True, eq=False)
class FirFilter:
    """Finite impulse response ``taps`` with ``taps[reference_index]`` at lag zero."""

    taps: np.ndarray
    reference_index: int = 0

    def __post_init__(self):
        h = np.array(self.taps, dtype=np.float64).ravel()
        if h.size == 0 or not np.all(np.isfinite(h)):
            raise ValueError("FIR taps must be a nonempty finite vector")
        if not np.any(h != 0):
            raise ValueError("FIR filter needs at least one nonzero tap")
        if not 0 <= self.reference_index < h.size:
            raise ValueError(f"reference_index {self.reference_index} outside 0..{h.size - 1}")
        h.setflags(write=False)
        object.__setattr__(self, "taps", h)
        object.__setattr__(self, "reference_index", int(self.reference_index))

    @classmethod
    def identity(cls) -> "FirFilter":
        return cls(np.ones(1), 0)

    @classmethod
    def centered_impulse(cls, length: int) -> "FirFilter":
        h = np.zeros(length)
        h[length // 2] = 1.0
        return cls(h, length // 2)

    def __len__(self) -> int:
        return self.taps.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, FirFilter):
            return NotImplemented
        return self.reference_index == other.reference_index and np.array_equal(self.taps, other.taps)

    def to_dict(self) -> dict:
        return {"taps": self.taps.tolist(), "reference_index": self.reference_index}

    @classmethod
    def from_dict(cls, d: dict) -> "FirFilter":
        return cls(d["taps"], d.get("reference_index", 0))


@dataclass(frozen=True)
class TanhSaturation:
    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"saturation constant must be positive, got {self.k}")

    def __call__(self, x):
        return np.tanh(self.k * np.asarray(x, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"tanh": self.k}


@dataclass(frozen=True)
class IdentityMap:
    def __call__(self, x):
        return np.asarray(x, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"identity": True}


@dataclass(frozen=True, eq=False)
class TableMap:
    """Strictly increasing piecewise-linear map, extended linearly past the end knots."""

    knots_x: np.ndarray
    knots_y: np.ndarray = field(default=None)

    def __post_init__(self):
        kx = np.array(self.knots_x, dtype=np.float64).ravel()
        ky = np.array(self.knots_y, dtype=np.float64).ravel()
        if kx.size < 2 or kx.size != ky.size:
            raise ValueError("table needs at least two (x, y) knots of equal count")
        if np.any(np.diff(kx) <= 0) or np.any(np.diff(ky) <= 0):
            raise ValueError("table knots must be strictly increasing in x and y")
        object.__setattr__(self, "knots_x", kx)
        object.__setattr__(self, "knots_y", ky)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        kx, ky = self.knots_x, self.knots_y
        slopes = np.diff(ky) / np.diff(kx)
        seg = np.clip(np.searchsorted(kx, x, side="right") - 1, 0, slopes.size - 1)
        return ky[seg] + slopes[seg] * (x - kx[seg])

    def to_dict(self) -> dict:
        return {"table": {"knots_x": self.knots_x.tolist(), "knots_y": self.knots_y.tolist()}}


MemorylessMap = Union[TanhSaturation, IdentityMap, TableMap]


def _map_from_dict(d: dict) -> MemorylessMap:
    if "tanh" in d:
        return TanhSaturation(float(d["tanh"]))
    if "table" in d:
        return TableMap(d["table"]["knots_x"], d["table"]["knots_y"])
    if "identity" in d:
        return IdentityMap()
    raise ValueError(f"unknown nonlinearity record: {d!r}")


def fir_convolve(s: Signal, h: FirFilter) -> Signal:
    """Zero-extended linear convolution truncated to the input length.

    ``out[t] = sum_k h[k] * s[t - k + reference_index]``.
    """
    full = np.convolve(s.samples, h.taps)
    r = h.reference_index
    return s.replace(full[r:r + len(s)])


def apply_nonlinearity(x: Signal, f: MemorylessMap) -> Signal:
    return x.replace(f(x.samples))


def wiener_forward(s: Signal, h: FirFilter, f: MemorylessMap) -> Signal:
    """Filter then distort: ``e = f(h * s)``."""
    return apply_nonlinearity(fir_convolve(s, h), f)


def make_saturated_testset(tests: Sequence[Signal], k: float = 2.0) -> list[Signal]:
    """Peak-normalize each test signal and pass it through ``tanh(k x)``."""
    sat = TanhSaturation(k)
    return [apply_nonlinearity(normalize_peak(t), sat) for t in tests]


def channel_to_json(h: FirFilter, f: MemorylessMap) -> str:
    return json.dumps({**h.to_dict(), "nonlinearity": f.to_dict()})


def channel_from_json(text: str) -> tuple[FirFilter, MemorylessMap]:
    d = json.loads(text)
    return FirFilter.from_dict(d), _map_from_dict(d.get("nonlinearity", {"identity": True}))
