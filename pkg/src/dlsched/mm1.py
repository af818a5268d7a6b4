"""M/M/1 background-job model: rate estimation and sample-path simulation."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import BackgroundTrace, HypervisorFunction


@dataclass(frozen=True)
class MM1Params:
    lam: float
    mu: float
    start_state: int = 0

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("arrival and departure rates must be positive")
        if self.start_state < 0:
            raise ValueError("start_state must be >= 0")

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class FadingWindow:
    """Most recent samples with ascending weights (newest sample weighs most)."""

    samples: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        s = tuple(float(x) for x in self.samples)
        w = tuple(float(x) for x in self.weights)
        if not s:
            raise ValueError("fading window is empty")
        if len(s) != len(w):
            raise ValueError("samples and weights differ in length")
        if min(s) <= 0 or min(w) <= 0:
            raise ValueError("samples and weights must be positive")
        if any(b < a for a, b in zip(w, w[1:])):
            raise ValueError("weights must be nondecreasing")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def geometric(cls, samples: Sequence[float], gamma: float = 0.95,
                  size: int | None = 50) -> FadingWindow:
        """Keep the last ``size`` samples, weighting the k-th newest by ``gamma**k``."""
        if not 0 < gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        s = list(samples)[-size:] if size else list(samples)
        n = len(s)
        return cls(tuple(s), tuple(gamma ** (n - 1 - i) for i in range(n)))

    @classmethod
    def uniform(cls, samples: Sequence[float]) -> FadingWindow:
        return cls(tuple(samples), (1.0,) * len(samples))


def _weighted_rate(w: FadingWindow) -> float:
    x = np.asarray(w.samples)
    b = np.asarray(w.weights)
    return float(np.sum(b) / np.sum(b * x))


def estimate_lambda(w: FadingWindow) -> float:
    """Weighted MLE of an exponential rate from inter-arrival times."""
    return _weighted_rate(w)


def estimate_mu(w: FadingWindow) -> float:
    """Weighted MLE of the departure rate from background stay times."""
    return _weighted_rate(w)


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator keyed by an int or a tuple of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class _Uniforms:
    """Buffered stream of U(0, 1) draws from one generator."""

    def __init__(self, rng: np.random.Generator, chunk: int = 32):
        self._rng = rng
        self._chunk = chunk
        self._buf = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(self._chunk).tolist()
            self._pos = 0
            self._chunk = min(self._chunk * 2, 65536)
        u = self._buf[self._pos]
        self._pos += 1
        return u


def simulate_background(params: MM1Params, horizon: float, seed) -> BackgroundTrace:
    """Birth-death sample path of the background job count up to ``horizon``.

    From an empty system the holding time is ``Exp(lam)`` and the next event
    an arrival.  Otherwise it is ``Exp(lam + mu)`` and the next event is an
    arrival with probability ``lam / (lam + mu)``, else a departure.  Times are
    drawn by inverse CDF.  Departures are matched to the oldest job present.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    draw = _Uniforms(make_rng(seed))
    lam, mu = params.lam, params.mu
    total = lam + mu
    p_next = lam / total
    state = params.start_state
    present = deque([None] * state)
    jobs = []
    initial_departures = []
    t = 0.0
    log = math.log
    while True:
        if state == 0:
            t -= log(1.0 - draw()) / lam
            if t >= horizon:
                break
            up = True
        else:
            t -= log(1.0 - draw()) / total
            if t >= horizon:
                break
            up = draw() <= p_next
        if up:
            present.append(t)
            state += 1
        else:
            arrived = present.popleft()
            if arrived is None:
                initial_departures.append(t)
            else:
                jobs.append((arrived, t))
            state -= 1
    jobs.extend((a, math.inf) for a in present if a is not None)
    return BackgroundTrace(tuple(jobs), params.start_state, horizon, tuple(initial_departures))


def baseline_wbar(params: MM1Params, base_w: float,
                  hv: HypervisorFunction | None = None) -> float:
    """Inverse speed from the stationary mean job count ``rho / (1 - rho)``."""
    if params.rho >= 1:
        raise ValueError(f"rho={params.rho:.4g} >= 1: the queue has no stationary mean")
    hv = hv or HypervisorFunction()
    n_bar = params.rho / (1 - params.rho)
    return hv.at(n_bar + 1) * base_w
