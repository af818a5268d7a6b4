"""Domain types and piecewise-constant speed profiles.

Inverse speeds (``W`` for computation, ``Z`` for communication) seen by the
divisible job change in steps whenever a background job arrives or leaves.
:class:`StepProfile` stores such a step function together with the running
integral of its reciprocal, which is all the solvers ever need.
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class ControlMode(enum.Enum):
    TIME_INVARIANT = "time_invariant"
    TIME_VARYING = "time_varying"


@dataclass(frozen=True)
class StepProfile:
    """Piecewise-constant positive function of time.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k + 1])`` and the
    last value extends to +infinity.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    _cum: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if not bps or len(bps) != len(vals):
            raise ValueError("breakpoints and values must be non-empty and of equal length")
        if bps[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not (v > 0.0) or math.isinf(v) for v in vals):
            raise ValueError("profile values must be finite and positive")
        cum = [0.0]
        for k in range(len(bps) - 1):
            cum.append(cum[-1] + (bps[k + 1] - bps[k]) / vals[k])
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_cum", tuple(cum))

    @classmethod
    def constant(cls, value: float) -> StepProfile:
        return cls((0.0,), (value,))

    @property
    def is_constant(self) -> bool:
        return len(self.values) == 1

    def __call__(self, t: float) -> float:
        return self.values[max(bisect_right(self.breakpoints, t) - 1, 0)]

    def scaled(self, factor: float) -> StepProfile:
        return StepProfile(self.breakpoints, tuple(v * factor for v in self.values))

    def primitive(self, t: float) -> float:
        """Integral of ``1/p`` over ``[0, t]``."""
        k = bisect_right(self.breakpoints, t) - 1
        return self._cum[k] + (t - self.breakpoints[k]) / self.values[k]

    def inverse_primitive(self, y: float) -> float:
        """Smallest ``t`` with ``primitive(t) == y`` (``y >= 0``)."""
        if y < 0:
            raise ValueError("target integral must be non-negative")
        k = bisect_right(self._cum, y) - 1
        return self.breakpoints[k] + (y - self._cum[k]) * self.values[k]

    def knots_between(self, a: float, b: float) -> list[float]:
        """Breakpoints strictly inside ``(a, b)``."""
        lo = bisect_right(self.breakpoints, a)
        hi = bisect_right(self.breakpoints, b)
        out = list(self.breakpoints[lo:hi])
        if out and out[-1] == b:
            out.pop()
        return out

    def extremes(self, a: float, b: float) -> tuple[float, float]:
        """Min and max value taken on ``[a, b)``."""
        lo = max(bisect_right(self.breakpoints, a) - 1, 0)
        hi = max(bisect_right(self.breakpoints, b) - 1, lo)
        if hi > lo and self.breakpoints[hi] >= b:
            hi -= 1
        seg = self.values[lo:hi + 1]
        return min(seg), max(seg)


@dataclass(frozen=True)
class HypervisorFunction:
    """Multiplier applied to a base inverse speed when ``n`` jobs share a resource.

    With ``table=None`` the resource is split evenly (``n -> n``).  A table
    maps job counts to factors; counts missing from it are rejected.
    """

    table: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.table is None:
            return
        table = {int(k): float(v) for k, v in self.table.items()}
        if table.get(1) != 1.0:
            raise ValueError("multiplier(1) must equal 1")
        keys = sorted(table)
        if any(table[b] < table[a] for a, b in zip(keys, keys[1:])):
            raise ValueError("multiplier must be nondecreasing in n")
        object.__setattr__(self, "table", dict(sorted(table.items())))

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"job count must be >= 1, got {n}")
        if self.table is None:
            return float(n)
        try:
            return self.table[n]
        except KeyError:
            raise ValueError(f"hypervisor table has no entry for n={n}") from None

    def at(self, x: float) -> float:
        """Linear interpolation of the multiplier at a fractional job count."""
        if self.table is None:
            return float(x)
        lo = math.floor(x)
        if lo == x:
            return self(int(x))
        frac = x - lo
        return (1 - frac) * self(lo) + frac * self(lo + 1)


@dataclass(frozen=True)
class NetworkSpec:
    """Single-level tree: control processor ``P0`` plus ``N`` workers.

    ``base_w`` has ``N + 1`` entries (``W0..WN``), ``base_z`` has ``N``
    (``Z1..ZN``).
    """

    base_w: tuple[float, ...]
    base_z: tuple[float, ...]
    t_cp: float
    t_cm: float
    control_mode: ControlMode = ControlMode.TIME_INVARIANT

    def __post_init__(self):
        object.__setattr__(self, "base_w", tuple(float(w) for w in self.base_w))
        object.__setattr__(self, "base_z", tuple(float(z) for z in self.base_z))
        object.__setattr__(self, "control_mode", ControlMode(self.control_mode))
        if len(self.base_z) < 1:
            raise ValueError("need at least one worker")
        if len(self.base_w) != len(self.base_z) + 1:
            raise ValueError("base_w must hold N + 1 entries for N links")
        if min(self.base_w + self.base_z) <= 0 or self.t_cp <= 0 or self.t_cm <= 0:
            raise ValueError("speeds and intensities must be positive")

    @property
    def worker_count(self) -> int:
        return len(self.base_z)

    def with_mode(self, mode: ControlMode) -> NetworkSpec:
        return NetworkSpec(self.base_w, self.base_z, self.t_cp, self.t_cm, mode)


@dataclass(frozen=True)
class BackgroundTrace:
    """Background jobs on one resource.

    The number of background jobs at time ``t`` is ``initial_jobs``, minus the
    ``initial_departures`` already passed, plus the ``jobs`` pairs with
    ``arrival <= t < departure``.  Departures may be ``inf``.  Nothing after
    ``horizon`` is looked at.
    """

    jobs: tuple[tuple[float, float], ...] = ()
    initial_jobs: int = 0
    horizon: float = math.inf
    initial_departures: tuple[float, ...] = ()

    def __post_init__(self):
        jobs = tuple((float(a), float(d)) for a, d in self.jobs)
        for a, d in jobs:
            if not (0.0 <= a < d):
                raise ValueError(f"invalid background job ({a}, {d})")
        deps = tuple(sorted(float(d) for d in self.initial_departures))
        if self.initial_jobs < 0 or len(deps) > self.initial_jobs:
            raise ValueError("initial_departures exceed initial_jobs")
        if any(d < 0 for d in deps) or self.horizon <= 0:
            raise ValueError("times must be non-negative and horizon positive")
        object.__setattr__(self, "jobs", jobs)
        object.__setattr__(self, "initial_departures", deps)

    def count_path(self) -> tuple[list[float], list[int]]:
        """Job count as a step function: ``(times, counts)`` with ``times[0] == 0``.

        Simultaneous events are merged into one net step and zero-net steps
        are dropped.
        """
        deltas: dict[float, int] = {}
        for a, d in self.jobs:
            if a <= self.horizon:
                deltas[a] = deltas.get(a, 0) + 1
            if d <= self.horizon:
                deltas[d] = deltas.get(d, 0) - 1
        for d in self.initial_departures:
            if d <= self.horizon:
                deltas[d] = deltas.get(d, 0) - 1
        level = self.initial_jobs + deltas.pop(0.0, 0)
        if level < 0:
            raise ValueError("negative job count")
        times, counts = [0.0], [level]
        for t in sorted(deltas):
            step = deltas[t]
            if step == 0:
                continue
            level += step
            if level < 0:
                raise ValueError(f"negative job count at t={t}")
            times.append(t)
            counts.append(level)
        return times, counts


@dataclass(frozen=True)
class Schedule:
    """Load fractions ``alpha_0..alpha_N``, stage times ``T_1..T_N`` and ``T_f``.

    ``bracket`` is set by the sweep solver to the two candidate points that
    straddle a fraction sum of one.
    """

    fractions: tuple[float, ...]
    stage_times: tuple[float, ...]
    finish_time: float
    bracket: tuple[Schedule, Schedule] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(a) for a in self.fractions))
        object.__setattr__(self, "stage_times", tuple(float(t) for t in self.stage_times))
        if len(self.fractions) != len(self.stage_times) + 1:
            raise ValueError("need N + 1 fractions for N stage times")

    @property
    def fraction_sum(self) -> float:
        return math.fsum(self.fractions)

    @property
    def worker_count(self) -> int:
        return len(self.stage_times)

    def check(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` when fractions or stage ordering are out of range."""
        if any(a < -tol or a > 1 + tol for a in self.fractions):
            raise ValueError(f"fraction out of [0, 1]: {self.fractions}")
        times = (0.0,) + self.stage_times + (self.finish_time,)
        if any(t1 < t0 - tol for t0, t1 in zip(times, times[1:])):
            raise ValueError(f"stage times not ordered: {times}")


def trace_to_profile(trace: BackgroundTrace, base: float,
                     hv: HypervisorFunction | None = None) -> StepProfile:
    """Inverse speed seen by the divisible job under ``trace``.

    The job itself counts toward the multiplier, so ``n`` background jobs give
    ``base * hv(n + 1)``.
    """
    hv = hv or HypervisorFunction()
    times, counts = trace.count_path()
    bps, vals = [], []
    for t, n in zip(times, counts):
        v = base * hv(n + 1)
        if vals and v == vals[-1]:
            continue
        bps.append(t)
        vals.append(v)
    return StepProfile(tuple(bps), tuple(vals))


def integrate_reciprocal(p: StepProfile, a: float, b: float) -> float:
    """Exact integral of ``1/p`` over ``[a, b]``."""
    if a < 0 or b < a:
        raise ValueError(f"invalid interval [{a}, {b}]")
    if a == b:
        return 0.0
    lo = bisect_right(p.breakpoints, a) - 1
    hi = bisect_right(p.breakpoints, b) - 1
    if lo == hi:
        return (b - a) / p.values[lo]
    total = (p.breakpoints[lo + 1] - a) / p.values[lo]
    for k in range(lo + 1, hi):
        total += (p.breakpoints[k + 1] - p.breakpoints[k]) / p.values[k]
    return total + (b - p.breakpoints[hi]) / p.values[hi]


def equivalent_w(p: StepProfile, t_start: float, t_finish: float) -> float:
    """Constant inverse compute speed equivalent to ``p`` over ``[t_start, t_finish]``.

    Its reciprocal is the time-average of ``1/p`` on the window.
    """
    if not t_finish > t_start:
        raise ValueError("equivalent speed needs a window of positive length")
    return (t_finish - t_start) / integrate_reciprocal(p, t_start, t_finish)


def equivalent_z(p: StepProfile, t_prev: float, t_i: float) -> float:
    """Constant inverse link speed equivalent to ``p`` over the send window ``[t_prev, t_i]``."""
    return equivalent_w(p, t_prev, t_i)


def constant_profiles(values: Sequence[float]) -> list[StepProfile]:
    return [StepProfile.constant(v) for v in values]
