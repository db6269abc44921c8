"""Blind estimation of a Hammerstein inverse by entropy-rate minimization.

The observed signal ``e`` is mapped through a monotone ``g`` and a FIR
filter ``w``; the parameters are chosen to minimize

    H(y) - mean log|W(theta)| - mean log g'(e)

where ``H(y)`` is the marginal entropy of the output. This equals the
output mutual-information rate up to a constant that does not depend on
``(g, w)``, so only differences between cost values are meaningful.
"""
from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Union

import numpy as np

from ..channel import FirFilter, fir_convolve
from ..errors import ConfigError, DegenerateInputError
from ..signal import Signal, preemphasize
from .entropy import marginal_entropy, resolve_spacing, sorted_spacing_entropy
from .monotone import MonotoneMap

log = logging.getLogger(__name__)

GAIN_FLOOR = 1e-12
KNOT_LEVELS = (0.01, 0.99)


@dataclass
class InversionConfig:
    n_knots: int = 21
    w_len: int = 21
    spacing_m: Union[int, str] = "auto"
    max_iters: int = 500
    rel_tol: float = 1e-6
    step_init: float = 0.1
    fft_bins: int = 1024
    seed: int = 0
    fd_step: float = 1e-4
    memory: int = 10  # curvature pairs kept for the quasi-Newton direction
    preemphasis: float | None = None

    def __post_init__(self):
        if self.n_knots < 4:
            raise ConfigError(f"n_knots must be >= 4, got {self.n_knots}")
        if self.w_len < 1 or self.w_len % 2 == 0:
            raise ConfigError(f"w_len must be a positive odd integer, got {self.w_len}")
        if self.spacing_m != "auto" and int(self.spacing_m) < 1:
            raise ConfigError(f"spacing_m must be >= 1 or 'auto', got {self.spacing_m}")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.fft_bins < 4 * self.w_len:
            raise ConfigError(f"fft_bins must be >= 4 * w_len = {4 * self.w_len}")
        if not (self.rel_tol >= 0 and self.step_init > 0 and self.fd_step > 0):
            raise ConfigError("rel_tol must be >= 0; step_init and fd_step must be > 0")
        if self.memory < 0:
            raise ConfigError("memory must be nonnegative")
        if self.preemphasis is not None and not 0 <= self.preemphasis < 1:
            raise ConfigError("preemphasis coefficient must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "InversionConfig":
        return cls(**d)


@dataclass(frozen=True)
class HammersteinInverse:
    """Estimated inverse: monotone map ``g`` followed by filter ``w``."""

    g: MonotoneMap
    w: FirFilter

    def transform(self, e: Signal) -> Signal:
        """Map only: ``x = g(e)``."""
        return e.replace(self.g(e.samples))

    def apply(self, e: Signal) -> Signal:
        """Full inverse: ``y = w * g(e)``."""
        return fir_convolve(self.transform(e), self.w)

    def to_dict(self) -> dict:
        return {"g": self.g.to_dict(), "w": self.w.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "HammersteinInverse":
        return cls(MonotoneMap.from_dict(d["g"]), FirFilter.from_dict(d["w"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "HammersteinInverse":
        return cls.from_dict(json.loads(text))


@dataclass
class InversionTrace:
    cost_per_iteration: list = field(default_factory=list)
    terminated_by: str = "max_iters"
    final_cost: float = float("nan")
    floored_bins: int = 0
    clamped_spacings: int = 0

    @property
    def n_iterations(self) -> int:
        return max(len(self.cost_per_iteration) - 1, 0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,cost\n")
        for i, c in enumerate(self.cost_per_iteration):
            buf.write(f"{i},{float(c)!r}\n")
        return buf.getvalue()


class CostTerms(NamedTuple):
    entropy: float
    log_gain: float
    mean_log_derivative: float

    @property
    def total(self) -> float:
        return self.entropy - self.log_gain - self.mean_log_derivative


def filter_log_gain(w: FirFilter, fft_bins: int = 1024, *, return_floored: bool = False):
    """Mean of ``log|W|`` over ``fft_bins`` equally spaced frequencies.

    A rectangle-rule quadrature of the normalized log-magnitude integral over
    one period; magnitudes below 1e-12 are floored.
    """
    if not isinstance(w, FirFilter):
        w = FirFilter(w, 0)
    if fft_bins < len(w):
        raise ConfigError(f"fft_bins ({fft_bins}) shorter than the filter ({len(w)})")
    # |W| ignores delay; putting the reference tap at lag 0 keeps an impulse exact
    padded = np.zeros(fft_bins)
    padded[:len(w)] = w.taps
    mag = np.abs(np.fft.fft(np.roll(padded, -w.reference_index)))
    floored = int(np.count_nonzero(mag < GAIN_FLOOR))
    val = float(np.mean(np.log(np.maximum(mag, GAIN_FLOOR))))
    return (val, floored) if return_floored else val


def mean_log_derivative(g: MonotoneMap, e) -> float:
    e = np.asarray(e.samples if isinstance(e, Signal) else e, dtype=np.float64)
    if e.size == 0:
        raise DegenerateInputError("mean_log_derivative needs at least one sample")
    return float(np.mean(np.log(g.derivative(e))))


def cost_terms(inv: HammersteinInverse, e: Signal, cfg: InversionConfig) -> CostTerms:
    y = inv.apply(e).samples
    return CostTerms(
        marginal_entropy(y, cfg.spacing_m),
        filter_log_gain(inv.w, cfg.fft_bins),
        mean_log_derivative(inv.g, e.samples),
    )


def inversion_cost(inv: HammersteinInverse, e: Signal, cfg: InversionConfig) -> float:
    return cost_terms(inv, e, cfg).total


def init_inverse(e: Signal, cfg: InversionConfig) -> HammersteinInverse:
    """Start from ``g`` = identity on quantile knots and ``w`` = centered impulse."""
    x = e.samples
    if x.size == 0:
        raise DegenerateInputError("cannot initialize from an empty signal")
    if np.ptp(x) == 0:
        raise DegenerateInputError("observed signal is constant")
    kx = np.quantile(x, np.linspace(*KNOT_LEVELS, cfg.n_knots))
    if np.any(np.diff(kx) <= 0):
        raise DegenerateInputError(
            f"quantile knots collapse: the signal has too few distinct values for {cfg.n_knots} knots")
    return HammersteinInverse(MonotoneMap.from_knots(kx, kx), FirFilter.centered_impulse(cfg.w_len))


# -- optimizer ------------------------------------------------------------

def _shift(x: np.ndarray, lag: int) -> np.ndarray:
    """``out[t] = x[t - lag]`` with zeros outside the support."""
    out = np.zeros_like(x)
    if lag >= 0:
        out[lag:] = x[:x.size - lag]
    else:
        out[:lag] = x[-lag:]
    return out


class CostModel:
    """Cost as a function of the flat vector ``[log_increments, anchor, w]``.

    The knot abscissae are frozen, so ``g(e)`` is linear in the ordinate gaps
    through a fixed basis; finite-difference probes reuse that structure.
    """

    def __init__(self, e: np.ndarray, knots_x: np.ndarray, cfg: InversionConfig):
        self.e = np.asarray(e, dtype=np.float64)
        self.n = self.e.size
        self.cfg = cfg
        self.m = resolve_spacing(cfg.spacing_m, self.n)
        if self.n < 2 * self.m + 2:
            raise DegenerateInputError(f"signal of {self.n} samples too short for spacing m={self.m}")
        self.template = MonotoneMap(knots_x, np.zeros(knots_x.size - 1), 0.0)
        self.n_gaps = knots_x.size - 1
        self.w_len = cfg.w_len
        self.ref = cfg.w_len // 2
        self.basis = self.template.basis(self.e)
        seg = self.template.segment(self.e)
        self.seg_frac = np.bincount(seg, minlength=self.n_gaps) / self.n
        self.log_dx = np.log(np.diff(knots_x))
        self.floored_bins = 0
        self.clamped_spacings = 0

    # parameter packing
    def pack(self, inv: HammersteinInverse) -> np.ndarray:
        return np.concatenate([inv.g.log_increments, [inv.g.anchor], inv.w.taps])

    def unpack(self, theta: np.ndarray) -> HammersteinInverse:
        k = self.n_gaps
        g = MonotoneMap(self.template.knots_x, theta[:k], theta[k])
        return HammersteinInverse(g, FirFilter(theta[k + 1:], self.ref))

    def split(self, theta):
        k = self.n_gaps
        return theta[:k], theta[k], theta[k + 1:]

    # pieces
    def map_output(self, theta) -> np.ndarray:
        li, a, _ = self.split(theta)
        return a + self.basis @ np.exp(li)

    def filt(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        if w.size == 1:
            return w[0] * x
        return np.convolve(x, w)[self.ref:self.ref + self.n]

    def mld(self, li) -> float:
        return float(np.dot(self.seg_frac, li - self.log_dx))

    def log_gain(self, w) -> float:
        val, floored = filter_log_gain(FirFilter(w, self.ref), self.cfg.fft_bins, return_floored=True)
        self.floored_bins = max(self.floored_bins, floored)
        return val

    def entropy(self, y: np.ndarray) -> float:
        h, clamped = sorted_spacing_entropy(np.sort(y), self.m)
        self.clamped_spacings = max(self.clamped_spacings, clamped)
        return h

    def __call__(self, theta) -> float:
        li, _, w = self.split(theta)
        y = self.filt(self.map_output(theta), w)
        return self.entropy(y) - self.log_gain(w) - self.mld(li)

    def terms(self, theta) -> CostTerms:
        li, _, w = self.split(theta)
        y = self.filt(self.map_output(theta), w)
        return CostTerms(self.entropy(y), self.log_gain(w), self.mld(li))

    def probes(self, theta, h: float):
        """Yield ``(index, step, cost(theta + step * unit_index))`` for every coordinate.

        Costs are identical to ``self(theta + ...)`` up to rounding but skip
        the per-probe convolution.
        """
        li, a, w = self.split(theta)
        c = np.exp(li)
        x = a + self.basis @ c
        y = self.filt(x, w)
        gain = self.log_gain(w)
        mld = self.mld(li)
        k = self.n_gaps
        for j in range(k):
            wb = self.filt(self.basis[:, j], w)
            for step in (h, -h):
                dc = c[j] * math.expm1(step)
                val = self.entropy(y + dc * wb) - gain - (mld + step * self.seg_frac[j])
                yield j, step, val
        # truncated convolution: an offset is not constant near the edges
        ones = self.filt(np.ones(self.n), w)
        for step in (h, -h):
            yield k, step, self.entropy(y + step * ones) - gain - mld
        for t in range(self.w_len):
            xs = _shift(x, t - self.ref)
            for step in (h, -h):
                w2 = w.copy()
                w2[t] += step
                yield k + 1 + t, step, self.entropy(y + step * xs) - self.log_gain(w2) - mld

    def gradient(self, theta, h: float | None = None, scheme: str = "central") -> np.ndarray:
        """Finite-difference gradient; ``scheme`` is ``"central"`` or ``"forward"``."""
        h = self.cfg.fd_step if h is None else h
        grad = np.zeros_like(theta)
        if scheme == "central":
            plus = np.zeros_like(theta)
            minus = np.zeros_like(theta)
            for i, step, val in self.probes(theta, h):
                (plus if step > 0 else minus)[i] = val
            return (plus - minus) / (2 * h)
        if scheme == "forward":
            base = self(theta)
            for i, step, val in self.probes(theta, h):
                if step > 0:
                    grad[i] = (val - base) / h
            return grad
        raise ValueError(f"unknown finite-difference scheme {scheme!r}")

    def renormalize(self, theta) -> np.ndarray:
        """Fix the flat directions: zero-mean unit-variance ``g(e)``, unit-norm ``w``."""
        li, a, w = self.split(theta)
        x = self.map_output(theta)
        mu, sd = float(np.mean(x)), float(np.std(x))
        out = theta.copy()
        out[:self.n_gaps] = li - math.log(sd)
        out[self.n_gaps] = (a - mu) / sd
        out[self.n_gaps + 1:] = w / np.linalg.norm(w)
        return out


def _lbfgs_direction(grad, pairs):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _line_search(model, theta, cost, direction, step, max_halvings=20):
    for _ in range(max_halvings + 1):
        cand = model.renormalize(theta + step * direction)
        if np.all(np.isfinite(cand)):
            val = model(cand)
            if val < cost:
                return cand, val
        step *= 0.5
    return None, cost


def estimate_inverse(e: Signal, cfg: InversionConfig | None = None) -> tuple[HammersteinInverse, InversionTrace]:
    """Estimate ``(g, w)`` from the observed signal alone.

    Descent on the finite-difference gradient, preconditioned by a
    limited-memory BFGS estimate of the inverse Hessian, with a halving
    backtracking search. After every accepted step the output of ``g`` is
    standardized and ``w`` is scaled to unit norm.
    """
    cfg = cfg or InversionConfig()
    if len(e) < 512:
        raise DegenerateInputError(f"need at least 512 samples to estimate an inverse, got {len(e)}")
    if cfg.preemphasis is not None:
        e = preemphasize(e, cfg.preemphasis)
    inv0 = init_inverse(e, cfg)
    model = CostModel(e.samples, inv0.g.knots_x, cfg)
    theta = model.renormalize(model.pack(inv0))
    cost = model(theta)
    if not math.isfinite(cost):
        raise DegenerateInputError("cost is not finite at initialization")
    trace = InversionTrace([cost])
    pairs: list = []
    grad = model.gradient(theta)
    terminated = "max_iters"
    for it in range(cfg.max_iters):
        cand = None
        if pairs:
            d = _lbfgs_direction(grad, pairs)
            if np.dot(d, grad) < 0:
                cand, new_cost = _line_search(model, theta, cost, d, 1.0)
        if cand is None:
            pairs.clear()
            cand, new_cost = _line_search(model, theta, cost, -grad, cfg.step_init)
        if cand is None:
            terminated = "tolerance"
            break
        new_grad = model.gradient(cand)
        s, y = cand - theta, new_grad - grad
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.dot(y, y):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > cfg.memory:
                pairs.pop(0)
        decrease = (cost - new_cost) / max(abs(cost), 1.0)
        theta, cost, grad = cand, new_cost, new_grad
        trace.cost_per_iteration.append(cost)
        if decrease < cfg.rel_tol:
            terminated = "tolerance"
            break
    trace.terminated_by = terminated
    trace.final_cost = cost
    trace.floored_bins = model.floored_bins
    trace.clamped_spacings = model.clamped_spacings
    log.debug("inversion stopped by %s after %d iterations, cost %.6f",
              terminated, trace.n_iterations, cost)
    return model.unpack(theta), trace
