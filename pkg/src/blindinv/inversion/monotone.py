"""Knot-parameterized strictly increasing piecewise-linear maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import TableMap


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Piecewise-linear increasing map parameterized by log ordinate gaps.

    Ordinates are ``anchor + cumsum(exp(log_increments))`` so every finite
    parameter vector gives an invertible map. Outside the end knots the
    first and last segments are extended linearly.
    """

    knots_x: np.ndarray
    log_increments: np.ndarray
    anchor: float = 0.0

    def __post_init__(self):
        kx = np.array(self.knots_x, dtype=np.float64).ravel()
        li = np.array(self.log_increments, dtype=np.float64).ravel()
        if kx.size < 2 or li.size != kx.size - 1:
            raise ValueError("need n_knots >= 2 abscissae and n_knots - 1 log increments")
        if np.any(np.diff(kx) <= 0):
            raise ValueError("knots_x must be strictly increasing")
        if not (np.all(np.isfinite(li)) and np.isfinite(self.anchor)):
            raise ValueError("map parameters must be finite")
        object.__setattr__(self, "knots_x", kx)
        object.__setattr__(self, "log_increments", li)
        object.__setattr__(self, "anchor", float(self.anchor))

    @classmethod
    def from_knots(cls, knots_x, knots_y) -> "MonotoneMap":
        ky = np.asarray(knots_y, dtype=np.float64)
        gaps = np.diff(ky)
        if np.any(gaps <= 0):
            raise ValueError("knots_y must be strictly increasing")
        return cls(knots_x, np.log(gaps), ky[0])

    @property
    def n_knots(self) -> int:
        return self.knots_x.size

    @property
    def knots_y(self) -> np.ndarray:
        return self.anchor + np.concatenate([[0.0], np.cumsum(np.exp(self.log_increments))])

    @property
    def slopes(self) -> np.ndarray:
        return np.exp(self.log_increments) / np.diff(self.knots_x)

    def segment(self, e) -> np.ndarray:
        """Index of the linear piece that governs each point."""
        seg = np.searchsorted(self.knots_x, np.asarray(e, dtype=np.float64), side="right") - 1
        return np.clip(seg, 0, self.n_knots - 2)

    def __call__(self, e):
        e = np.asarray(e, dtype=np.float64)
        seg = self.segment(e)
        return self.knots_y[seg] + self.slopes[seg] * (e - self.knots_x[seg])

    def derivative(self, e):
        return self.slopes[self.segment(e)]

    def basis(self, e) -> np.ndarray:
        """Columns ``b_j`` with ``g(e) = anchor + sum_j exp(log_increments[j]) * b_j(e)``."""
        e = np.asarray(e, dtype=np.float64)
        kx = self.knots_x
        b = (e[:, None] - kx[None, :-1]) / np.diff(kx)[None, :]
        b[:, 1:] = np.maximum(b[:, 1:], 0.0)
        b[:, :-1] = np.minimum(b[:, :-1], 1.0)
        return b

    def scaled(self, c: float, offset: float = 0.0) -> "MonotoneMap":
        """The map ``c * g + offset`` for ``c > 0``."""
        return MonotoneMap(self.knots_x, self.log_increments + np.log(c), c * self.anchor + offset)

    def to_table(self) -> TableMap:
        return TableMap(self.knots_x, self.knots_y)

    def to_dict(self) -> dict:
        return {"knots_x": self.knots_x.tolist(), "knots_y": self.knots_y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MonotoneMap":
        return cls.from_knots(d["knots_x"], d["knots_y"])
