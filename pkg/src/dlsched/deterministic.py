"""Recursive solvers for known time-varying speed profiles.

For a candidate finishing time ``T_f`` every stage time ``T_i`` follows from
``T_{i-1}`` by a scalar equation, so each fraction is a function of ``T_f``.
The search then looks for the ``T_f`` whose fractions sum to one.
"""
from __future__ import annotations

import enum
import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classic import forward_substitution
from .model import ControlMode, NetworkSpec, Schedule, StepProfile


class SearchMode(enum.Enum):
    SWEEP_DOWN = "sweep"
    BISECTION = "bisect"


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the ``T_f`` search.

    ``stage_grid`` snaps each stage time down onto a grid of that spacing and
    then one further grid step back, the convention of slotted solvers whose
    sweep tables this reproduces.  ``None`` keeps stage times continuous.
    """

    mode: SearchMode = SearchMode.BISECTION
    sweep_step: float = 0.01
    sum_tolerance: float = 1e-6
    stage_tolerance: float = 1e-10
    max_iterations: int = 200
    stage_grid: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", SearchMode(self.mode))
        if self.sweep_step <= 0 or self.sum_tolerance <= 0 or self.stage_tolerance <= 0:
            raise ValueError("steps and tolerances must be positive")
        if self.stage_grid is not None and self.stage_grid <= 0:
            raise ValueError("stage_grid must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def table_reproduction(cls) -> SolverOptions:
        """Sweep at 0.01 with stage times on a 0.001 grid."""
        return cls(mode=SearchMode.SWEEP_DOWN, sweep_step=0.01, stage_grid=0.001)


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    def __init__(self, message: str, processor: int | None = None):
        super().__init__(message)
        self.processor = processor


class NonMonotoneError(SolverError):
    pass


def solve_stage_time(t_f: float, t_prev: float, z_profile: StepProfile,
                     w_profile: StepProfile, spec: NetworkSpec, i: int,
                     stage_grid: float | None = None) -> float:
    """Instant ``T_i`` at which processor ``i`` stops receiving and starts computing.

    Solves ``T_f = T_i + A(T_i) * Wbar(T_i) * T_cp`` where ``A`` is the load
    sent over ``[t_prev, T_i]`` and ``Wbar`` the equivalent inverse speed on
    ``[T_i, T_f]``.  This is the same as equating the load received with the
    load that can be processed by ``T_f``; that difference is increasing and
    piecewise linear in ``T_i``, so the root is found by bisection over the
    breakpoints followed by an exact linear solve inside one segment.
    """
    if not t_prev < t_f:
        raise InfeasibleError(
            f"processor {i}: candidate T_f={t_f:.6g} leaves no time after T_prev={t_prev:.6g}",
            processor=i)
    t_cm, t_cp = spec.t_cm, spec.t_cp
    fz, fw = z_profile.primitive, w_profile.primitive
    target = fz(t_prev) / t_cm + fw(t_f) / t_cp

    def h(t):
        return fz(t) / t_cm + fw(t) / t_cp

    pts = [t_prev]
    kz = z_profile.knots_between(t_prev, t_f)
    kw = w_profile.knots_between(t_prev, t_f)
    if kz or kw:
        pts.extend(sorted(set(kz).union(kw)))
    pts.append(t_f)
    lo, hi = 0, len(pts) - 1
    h_lo, h_hi = h(pts[lo]), h(pts[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        h_mid = h(pts[mid])
        if h_mid <= target:
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
    a, b = pts[lo], pts[hi]
    t = a + (target - h_lo) * (b - a) / (h_hi - h_lo)
    t = min(max(t, t_prev), t_f)
    if stage_grid is not None:
        t = max(math.floor(t / stage_grid + 1e-9) * stage_grid - stage_grid, t_prev)
    return t


def stage_residual(t_f: float, t_prev: float, t_i: float, z_profile: StepProfile,
                   w_profile: StepProfile, spec: NetworkSpec) -> float:
    """Residual of the stage equation in time units (zero at the exact root)."""
    sent = (z_profile.primitive(t_i) - z_profile.primitive(t_prev)) / spec.t_cm
    if t_i >= t_f:
        return t_f - t_i
    w_bar = (t_f - t_i) / (w_profile.primitive(t_f) - w_profile.primitive(t_i))
    return t_f - (t_i + sent * w_bar * spec.t_cp)


def _evaluate(t_f: float, spec: NetworkSpec, w_profiles: Sequence[StepProfile],
              z_profiles: Sequence[StepProfile], stage_grid: float | None) -> Schedule:
    fractions = [w_profiles[0].primitive(t_f) / spec.t_cp]
    stages = []
    t_prev = 0.0
    for i in range(1, len(w_profiles)):
        zp = z_profiles[i - 1]
        t_i = solve_stage_time(t_f, t_prev, zp, w_profiles[i], spec, i, stage_grid)
        fractions.append((zp.primitive(t_i) - zp.primitive(t_prev)) / spec.t_cm)
        stages.append(t_i)
        t_prev = t_i
    return Schedule(fractions, stages, t_f)


def fractions_at(t_f: float, spec: NetworkSpec, w_profiles: Sequence[StepProfile],
                 z_profiles: Sequence[StepProfile],
                 options: SolverOptions | None = None) -> Schedule:
    """Candidate schedule for a given ``T_f``; its fractions need not sum to one."""
    options = options or SolverOptions()
    _check_profiles(spec, w_profiles, z_profiles)
    return _evaluate(t_f, spec, w_profiles, z_profiles, options.stage_grid)


def sweep_curve(spec: NetworkSpec, w_profiles: Sequence[StepProfile],
                z_profiles: Sequence[StepProfile], candidates: Sequence[float],
                options: SolverOptions | None = None) -> list[Schedule]:
    """Candidate schedules for each ``T_f`` in ``candidates``."""
    return [fractions_at(t, spec, w_profiles, z_profiles, options) for t in candidates]


def _check_profiles(spec, w_profiles, z_profiles):
    n = spec.worker_count
    if len(w_profiles) != n + 1 or len(z_profiles) != n:
        raise ValueError(f"expected {n + 1} W profiles and {n} Z profiles, "
                         f"got {len(w_profiles)} and {len(z_profiles)}")


def _monotone_slack(spec: NetworkSpec, options: SolverOptions) -> float:
    if options.stage_grid is None:
        return 1e-9
    return 2 * spec.worker_count * options.stage_grid / (min(spec.base_z) * spec.t_cm)


def _interpolate(lo: Schedule, hi: Schedule) -> float:
    s_lo, s_hi = lo.fraction_sum, hi.fraction_sum
    if s_hi == s_lo:
        return 0.5 * (lo.finish_time + hi.finish_time)
    return lo.finish_time + (1.0 - s_lo) * (hi.finish_time - lo.finish_time) / (s_hi - s_lo)


def _search(spec, w_profiles, z_profiles, upper, options, horizon):
    slack = _monotone_slack(spec, options)

    def ev(t):
        return _evaluate(t, spec, w_profiles, z_profiles, options.stage_grid)

    if options.mode is SearchMode.SWEEP_DOWN:
        prev = ev(upper)
        if prev.fraction_sum < 1.0:
            raise InfeasibleError(f"fraction sum {prev.fraction_sum:.6g} < 1 at the upper bound")
        k = 1
        while True:
            t = upper - k * options.sweep_step
            if t <= 0:
                raise InfeasibleError("sweep reached T_f <= 0 without bracketing a unit sum")
            cur = ev(t)
            if cur.fraction_sum > prev.fraction_sum + slack:
                raise NonMonotoneError(
                    f"fraction sum rose from {prev.fraction_sum:.9g} at T_f={prev.finish_time:.6g} "
                    f"to {cur.fraction_sum:.9g} at T_f={t:.6g}")
            if cur.fraction_sum < 1.0:
                lo, hi = cur, prev
                break
            prev = cur
            k += 1
        result = ev(_interpolate(lo, hi))
        result = Schedule(result.fractions, result.stage_times, result.finish_time,
                          bracket=(lo, hi))
    else:
        # background load only slows processors, so the constant-speed optimum
        # is a lower bound; halve it if the profiles are faster than base
        lo = ev(min(forward_substitution(spec.base_w, spec.base_z, spec.t_cp,
                                         spec.t_cm).finish_time, upper))
        while lo.fraction_sum > 1.0:
            if lo.finish_time < 1e-12:
                raise InfeasibleError("no lower bound with fraction sum below one")
            lo = ev(0.5 * lo.finish_time)
        hi = ev(upper)
        if hi.fraction_sum < 1.0:
            raise InfeasibleError(f"fraction sum {hi.fraction_sum:.6g} < 1 at the upper bound")
        best = lo if abs(lo.fraction_sum - 1) < abs(hi.fraction_sum - 1) else hi
        for _ in range(options.max_iterations):
            if abs(best.fraction_sum - 1.0) <= options.sum_tolerance:
                break
            mid = ev(0.5 * (lo.finish_time + hi.finish_time))
            s = mid.fraction_sum
            if s < lo.fraction_sum - slack or s > hi.fraction_sum + slack:
                raise NonMonotoneError(
                    f"fraction sum {s:.9g} at T_f={mid.finish_time:.9g} outside bracket "
                    f"[{lo.fraction_sum:.9g}, {hi.fraction_sum:.9g}]")
            if s < 1.0:
                lo = mid
            else:
                hi = mid
            best = mid
            if hi.finish_time - lo.finish_time <= options.stage_tolerance:
                break
        else:
            if abs(best.fraction_sum - 1.0) > options.sum_tolerance:
                raise SolverError(f"bisection did not converge in {options.max_iterations} steps")
        # one secant step inside the final bracket; exact when the sum is linear
        if lo.finish_time < hi.finish_time:
            sec = ev(_interpolate(lo, hi))
            if abs(sec.fraction_sum - 1.0) <= abs(best.fraction_sum - 1.0):
                best = sec
        result = best
    if horizon is not None and result.finish_time > horizon:
        warnings.warn(f"T_f={result.finish_time:.6g} exceeds the trace horizon {horizon:.6g}; "
                      "job counts were held constant past the horizon", stacklevel=3)
    result.check(tol=max(slack, 1e-9))
    return result


def network_profiles(spec: NetworkSpec,
                     worker_w_profiles: Sequence[StepProfile]) -> tuple[list[StepProfile], list[StepProfile]]:
    """Full W and Z profile lists for a time-invariant control processor."""
    w = [StepProfile.constant(spec.base_w[0])] + list(worker_w_profiles)
    z = [StepProfile.constant(v) for v in spec.base_z]
    return w, z


def algorithm_one(spec: NetworkSpec, worker_w_profiles: Sequence[StepProfile],
                  options: SolverOptions | None = None,
                  horizon: float | None = None) -> Schedule:
    """Optimal schedule with a constant control processor and constant links.

    Only the ``N`` worker compute profiles vary; the search starts from
    ``T_f = W_0 T_cp`` where ``alpha_0`` alone would be one.
    """
    if spec.control_mode is not ControlMode.TIME_INVARIANT:
        raise ValueError("algorithm_one needs a time-invariant control processor")
    if len(worker_w_profiles) != spec.worker_count:
        raise ValueError(f"expected {spec.worker_count} worker profiles")
    w, z = network_profiles(spec, worker_w_profiles)
    options = options or SolverOptions()
    return _search(spec, w, z, spec.base_w[0] * spec.t_cp, options, horizon)


def algorithm_two(spec: NetworkSpec, w_profiles: Sequence[StepProfile],
                  z_profiles: Sequence[StepProfile], options: SolverOptions | None = None,
                  horizon: float | None = None) -> Schedule:
    """Optimal schedule when control, worker and link speeds all vary."""
    if spec.control_mode is not ControlMode.TIME_VARYING:
        raise ValueError("algorithm_two needs a time-varying control processor")
    _check_profiles(spec, w_profiles, z_profiles)
    options = options or SolverOptions()
    upper = w_profiles[0].inverse_primitive(spec.t_cp)
    return _search(spec, list(w_profiles), list(z_profiles), upper, options, horizon)


def solve(spec: NetworkSpec, w_profiles: Sequence[StepProfile],
          z_profiles: Sequence[StepProfile], options: SolverOptions | None = None,
          horizon: float | None = None) -> Schedule:
    """Dispatch on ``spec.control_mode`` given full ``N + 1`` / ``N`` profile lists."""
    if spec.control_mode is ControlMode.TIME_INVARIANT:
        return algorithm_one(spec, w_profiles[1:], options, horizon)
    return algorithm_two(spec, w_profiles, z_profiles, options, horizon)


@dataclass(frozen=True)
class OracleReport:
    """Slot-by-slot replay of a schedule.

    ``processed[i]`` is the load processor ``i`` computes between its stage
    time and ``T_f``; ``received[i]`` the load it is sent during its window.
    """

    slot: float
    fractions: tuple[float, ...]
    processed: tuple[float, ...]
    received: tuple[float, ...]
    finish_times: tuple[float, ...]

    @property
    def residuals(self) -> tuple[float, ...]:
        return tuple(max(abs(p - a), abs(r - a))
                     for a, p, r in zip(self.fractions, self.processed, self.received))

    def flagged(self, tol: float | None = None) -> list[int]:
        tol = 10 * self.slot if tol is None else tol
        return [i for i, r in enumerate(self.residuals) if r > tol]

    def passed(self, tol: float | None = None) -> bool:
        return not self.flagged(tol)


def _slot_cumulative(p: StepProfile, a: float, b: float, slot: float, intensity: float):
    """Slot edges on ``[a, b]`` and the load accumulated at each edge.

    The rate inside a slot is read at the slot midpoint, so breakpoints that
    fall inside a slot are only resolved to slot accuracy.
    """
    n = max(int(math.ceil((b - a) / slot - 1e-9)), 0)
    if n == 0:
        return np.array([a]), np.zeros(1)
    edges = a + slot * np.arange(n + 1)
    edges[-1] = b
    mids = 0.5 * (edges[:-1] + edges[1:])
    bps = np.asarray(p.breakpoints)
    vals = np.asarray(p.values)[np.searchsorted(bps, mids, side="right") - 1]
    cum = np.concatenate(([0.0], np.cumsum(np.diff(edges) / (vals * intensity))))
    return edges, cum


def _finish_time(edges, cum, target):
    k = int(np.searchsorted(cum, target, side="left"))
    if k >= len(cum):
        return math.inf
    if k == 0:
        return float(edges[0])
    frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1])
    return float(edges[k - 1] + frac * (edges[k] - edges[k - 1]))


def replay_oracle(schedule: Schedule, spec: NetworkSpec, w_profiles: Sequence[StepProfile],
                  z_profiles: Sequence[StepProfile], slot: float = 1e-4) -> OracleReport:
    """Replay communication then computation in slots of width ``slot``."""
    if slot <= 0:
        raise ValueError("slot must be positive")
    _check_profiles(spec, w_profiles, z_profiles)
    t_f = schedule.finish_time
    extra = max(0.25 * t_f, 100 * slot)
    processed, received, finish = [], [], []
    starts = (0.0,) + schedule.stage_times
    for i, alpha in enumerate(schedule.fractions):
        t_i = starts[i]
        if i == 0:
            received.append(alpha)
        else:
            _, cum = _slot_cumulative(z_profiles[i - 1], starts[i - 1], t_i, slot, spec.t_cm)
            received.append(float(cum[-1]))
        edges, cum = _slot_cumulative(w_profiles[i], t_i, t_f, slot, spec.t_cp)
        processed.append(float(cum[-1]))
        if cum[-1] < alpha:
            more_edges, more = _slot_cumulative(w_profiles[i], t_f, t_f + extra, slot, spec.t_cp)
            edges = np.concatenate((edges, more_edges[1:]))
            cum = np.concatenate((cum, cum[-1] + more[1:]))
        finish.append(_finish_time(edges, cum, alpha))
    return OracleReport(slot, schedule.fractions, tuple(processed), tuple(received), tuple(finish))
