"""Scheduling when background arrival and departure times are unknown.

Both methods draw M/M/1 sample paths for every time-varying resource and keep
the trial whose finishing time is the (lower) median over all trials.
``simulation_based`` runs the full recursive solver on every draw;
``iterative`` only re-solves the linear system with equivalent constant
speeds measured on the previous schedule's windows.
"""
from __future__ import annotations

import csv
import enum
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import IO, Sequence

import numpy as np

from .classic import forward_substitution, solve_time_invariant
from .deterministic import SolverError, SolverOptions, solve
from .mm1 import MM1Params, baseline_wbar, simulate_background
from .model import (BackgroundTrace, ControlMode, HypervisorFunction, NetworkSpec,
                    Schedule, StepProfile, equivalent_w, equivalent_z, trace_to_profile)

DEFAULT_HORIZON = 50.0


class InitialGuess(enum.Enum):
    TIME_INVARIANT = "time_invariant"
    BASELINE = "baseline"


@dataclass(frozen=True)
class TraceSet:
    """One draw of background activity.

    ``compute[i]`` is ``None`` for a processor whose speed is constant;
    ``link`` holds the control processor's competing connections.
    """

    compute: tuple[BackgroundTrace | None, ...]
    link: BackgroundTrace | None = None


@dataclass(frozen=True)
class Trial:
    index: int
    traces: TraceSet
    schedule: Schedule


@dataclass
class StochasticOutcome:
    trials: list[Trial]
    finish_times: list[float]
    selected_index: int
    wall_time: float
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def selected(self) -> Trial:
        return self.trials[self.selected_index]

    @property
    def median_finish_time(self) -> float:
        return self.finish_times[self.selected_index]


def lower_median_index(values: Sequence[float]) -> int:
    """Index of the lower median (``ceil(K/2) - 1`` in ascending order, stable)."""
    if not values:
        raise ValueError("no values")
    order = np.argsort(np.asarray(values), kind="stable")
    return int(order[math.ceil(len(values) / 2) - 1])


def _padded(spec: NetworkSpec, mm1: Sequence[MM1Params | None]) -> list[MM1Params | None]:
    mm1 = list(mm1)
    if len(mm1) == spec.worker_count:
        mm1 = [None] + mm1
    if len(mm1) != spec.worker_count + 1:
        raise ValueError(f"expected {spec.worker_count + 1} M/M/1 parameter sets")
    return mm1


def _varies_control(spec: NetworkSpec) -> bool:
    return spec.control_mode is ControlMode.TIME_VARYING


def draw_traces(spec: NetworkSpec, mm1: Sequence[MM1Params | None], seed, trial: int,
                horizon: float = DEFAULT_HORIZON, link: MM1Params | None = None) -> TraceSet:
    """Sample paths for one trial, keyed by ``(seed, trial, processor, stream)``."""
    mm1 = _padded(spec, mm1)
    varies = _varies_control(spec)
    key = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    compute = []
    for i, params in enumerate(mm1):
        if i == 0 and not varies:
            compute.append(None)
            continue
        if params is None:
            raise ValueError(f"processor {i} needs M/M/1 parameters")
        compute.append(simulate_background(params, horizon, key + (trial, i, 0)))
    link_trace = None
    if varies:
        link_trace = simulate_background(link or mm1[0], horizon, key + (trial, 0, 1))
    return TraceSet(tuple(compute), link_trace)


def profiles_for(spec: NetworkSpec, traces: TraceSet,
                 hv: HypervisorFunction | None = None) -> tuple[list[StepProfile], list[StepProfile]]:
    """W profiles for all ``N + 1`` processors and Z profiles for all ``N`` links."""
    w = []
    for i, tr in enumerate(traces.compute):
        w.append(StepProfile.constant(spec.base_w[i]) if tr is None
                 else trace_to_profile(tr, spec.base_w[i], hv))
    if traces.link is None:
        z = [StepProfile.constant(v) for v in spec.base_z]
    else:
        z = [trace_to_profile(traces.link, v, hv) for v in spec.base_z]
    return w, z


def solve_linear_with_bars(spec: NetworkSpec, w_bars: Sequence[float],
                           z_bars: Sequence[float]) -> Schedule:
    """Equal-finish schedule for constant equivalent speeds ``W̄`` and ``Z̄``."""
    if len(w_bars) != spec.worker_count + 1 or len(z_bars) != spec.worker_count:
        raise ValueError("need N + 1 compute bars and N link bars")
    if min(w_bars) <= 0 or min(z_bars) <= 0:
        raise ValueError("equivalent speeds must be positive")
    return forward_substitution(w_bars, z_bars, spec.t_cp, spec.t_cm)


def baseline_schedule(spec: NetworkSpec, mm1: Sequence[MM1Params | None],
                      hv: HypervisorFunction | None = None,
                      link: MM1Params | None = None) -> Schedule:
    """Schedule from stationary mean job counts (the uncorrected estimate)."""
    mm1 = _padded(spec, mm1)
    varies = _varies_control(spec)
    w_bars = [baseline_wbar(mm1[0], spec.base_w[0], hv) if varies else spec.base_w[0]]
    w_bars += [baseline_wbar(p, w, hv) for p, w in zip(mm1[1:], spec.base_w[1:])]
    if varies:
        lp = link or mm1[0]
        z_bars = [baseline_wbar(lp, z, hv) for z in spec.base_z]
    else:
        z_bars = list(spec.base_z)
    return solve_linear_with_bars(spec, w_bars, z_bars)


def _trial(k, spec, mm1, seed, horizon, link, hv, options):
    traces = draw_traces(spec, mm1, seed, k, horizon, link)
    w, z = profiles_for(spec, traces, hv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sched = solve(spec, w, z, options, horizon)
    except SolverError as exc:
        return k, traces, None, str(exc), []
    return k, traces, sched, None, [str(c.message) for c in caught]


def _collect(results, t0) -> StochasticOutcome:
    trials, failures = [], []
    for k, traces, sched, err, notes in results:
        for note in notes:
            warnings.warn(f"trial {k}: {note}", stacklevel=3)
        if sched is None:
            failures.append((k, err))
            warnings.warn(f"trial {k} failed and is excluded: {err}", stacklevel=3)
        else:
            trials.append(Trial(k, traces, sched))
    if not trials:
        raise SolverError("every trial failed")
    finish = [t.schedule.finish_time for t in trials]
    return StochasticOutcome(trials, finish, lower_median_index(finish),
                             time.perf_counter() - t0, failures)


def simulation_based(spec: NetworkSpec, mm1: Sequence[MM1Params | None], trials: int = 1000,
                     seed: int = 0, *, options: SolverOptions | None = None,
                     horizon: float = DEFAULT_HORIZON, link: MM1Params | None = None,
                     hv: HypervisorFunction | None = None, workers: int = 1) -> StochasticOutcome:
    """Solve the deterministic problem on ``trials`` sampled traces; keep the median."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    run = partial(_trial, spec=spec, mm1=mm1, seed=seed, horizon=horizon, link=link,
                  hv=hv, options=options)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(trials), chunksize=max(trials // (4 * workers), 1)))
    else:
        results = [run(k) for k in range(trials)]
    return _collect(results, t0)


def _bars(spec: NetworkSpec, prev: Schedule, w: list[StepProfile], z: list[StepProfile]):
    t_f = prev.finish_time
    starts = (0.0,) + prev.stage_times
    w_bars, z_bars = [], []
    for i, p in enumerate(w):
        if p.is_constant:
            w_bars.append(p.values[0])
        elif t_f > starts[i]:
            w_bars.append(equivalent_w(p, starts[i], t_f))
        else:
            warnings.warn(f"processor {i}: empty compute window, using base speed", stacklevel=3)
            w_bars.append(spec.base_w[i])
    for i, p in enumerate(z, start=1):
        if p.is_constant:
            z_bars.append(p.values[0])
        elif starts[i] > starts[i - 1]:
            z_bars.append(equivalent_z(p, starts[i - 1], starts[i]))
        else:
            warnings.warn(f"link {i}: empty send window, using base speed", stacklevel=3)
            z_bars.append(spec.base_z[i - 1])
    return w_bars, z_bars


def iterative(spec: NetworkSpec, mm1: Sequence[MM1Params | None], trials: int = 1000,
              seed: int = 0, initial: InitialGuess = InitialGuess.TIME_INVARIANT, *,
              horizon: float = DEFAULT_HORIZON, link: MM1Params | None = None,
              hv: HypervisorFunction | None = None) -> StochasticOutcome:
    """Resample traces, measure equivalent speeds on the last schedule's windows, re-solve.

    Each iteration is one trial; the median-``T_f`` trial is returned.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    initial = InitialGuess(initial)
    if initial is InitialGuess.BASELINE:
        sched = baseline_schedule(spec, mm1, hv, link)
    else:
        sched = solve_time_invariant(spec)
    results = []
    for k in range(trials):
        # only [0, T_f] of the previous schedule is read; a shorter path is a prefix
        window = min(horizon, sched.finish_time)
        traces = draw_traces(spec, mm1, seed, k, window, link)
        w, z = profiles_for(spec, traces, hv)
        w_bars, z_bars = _bars(spec, sched, w, z)
        sched = solve_linear_with_bars(spec, w_bars, z_bars)
        results.append((k, traces, sched, None, []))
    return _collect(results, t0)


def box_stats(values: Sequence[float]) -> dict:
    """Box-plot statistics: linear quantiles, 1.5 IQR whiskers and outliers."""
    x = np.sort(np.asarray(values, dtype=float))
    q0, q25, q50, q75, q100 = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0])
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return {
        "min": float(q0), "q25": float(q25), "median": float(q50), "q75": float(q75),
        "max": float(q100),
        "whisker_low": float(inside.min()), "whisker_high": float(inside.max()),
        "outliers": [float(v) for v in x[(x < lo_fence) | (x > hi_fence)]],
    }


def fmt(x: float) -> str:
    return format(x, ".10g")


def write_outcome_csv(outcome: StochasticOutcome, out: IO[str]) -> None:
    """One row per trial, then the quantile summary rows."""
    n = outcome.trials[0].schedule.worker_count
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["trial_id", "T_f"] + [f"alpha_{i}" for i in range(n + 1)])
    for t in outcome.trials:
        w.writerow([t.index, fmt(t.schedule.finish_time)] + [fmt(a) for a in t.schedule.fractions])
    w.writerow([])
    w.writerow(["statistic", "value"])
    stats = box_stats(outcome.finish_times)
    for key in ("min", "q25", "median", "q75", "max", "whisker_low", "whisker_high"):
        w.writerow([key, fmt(stats[key])])
    w.writerow(["outliers", ";".join(fmt(v) for v in stats["outliers"])])
    w.writerow(["selected_trial", outcome.selected.index])
