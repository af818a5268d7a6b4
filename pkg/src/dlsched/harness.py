"""Scenario files, background-trace generation and experiment drivers.

Every driver writes comma-separated files with a header row and a footer of
``#`` lines recording the seed, solver options and the git-style blob hash of
the scenario, so that identical inputs give byte-identical outputs.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .classic import solve_time_invariant
from .deterministic import (SearchMode, SolverOptions, algorithm_one, fractions_at,
                            network_profiles, replay_oracle, solve)
from .mm1 import MM1Params, make_rng
from .model import (BackgroundTrace, ControlMode, HypervisorFunction, NetworkSpec, Schedule,
                    StepProfile)
from .stochastic import (DEFAULT_HORIZON, InitialGuess, TraceSet, baseline_schedule, box_stats,
                         draw_traces, fmt, iterative, profiles_for, simulation_based)

SCHEMA_VERSION = 1
VERIFY_SLOT = 1e-3
BG_COUNTS = tuple(range(0, 81, 10))
WORKER_COUNTS = tuple(range(2, 9))
W_LEVELS = (1.0, 1.5, 2.0)


class ScenarioError(ValueError):
    pass


def default_spec(n_workers: int, w: float = 1.0,
                 control_mode: ControlMode = ControlMode.TIME_INVARIANT) -> NetworkSpec:
    """``T_cm = 1``, ``T_cp = 4``, every ``W_i = w`` and ``Z_i = 1 + 0.1 i``."""
    if n_workers < 1:
        raise ValueError("need at least one worker")
    return NetworkSpec(
        base_w=(w,) * (n_workers + 1),
        base_z=tuple(1.0 + 0.1 * i for i in range(1, n_workers + 1)),
        t_cp=4.0, t_cm=1.0, control_mode=control_mode)


def generate_uniform_trace(count: int, horizon: float, seed) -> BackgroundTrace:
    """``count`` jobs, each spanning two independent ``U(0, horizon)`` points."""
    if count < 0:
        raise ValueError("count must be >= 0")
    pts = np.sort(make_rng(seed).uniform(0.0, horizon, size=(count, 2)), axis=1)
    return BackgroundTrace(tuple((float(a), float(d)) for a, d in pts if a < d),
                           horizon=horizon)


@dataclass(frozen=True)
class UniformPairs:
    count: int = 40
    horizon: float = 50.0
    connections: int | None = None


@dataclass(frozen=True)
class MM1Source:
    params: tuple[MM1Params, ...]
    link: MM1Params | None = None
    horizon: float = DEFAULT_HORIZON


@dataclass(frozen=True)
class Explicit:
    compute: tuple[tuple[tuple[float, float], ...] | None, ...]
    link: tuple[tuple[float, float], ...] | None = None
    horizon: float = 50.0


@dataclass(frozen=True)
class Scenario:
    spec: NetworkSpec
    trace_source: UniformPairs | MM1Source | Explicit = field(default_factory=UniformPairs)
    solver: SolverOptions = field(default_factory=SolverOptions)
    trials: int = 1000
    seed: int = 0
    hypervisor: HypervisorFunction = field(default_factory=HypervisorFunction)

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError("trials must be >= 1")
        src = self.trace_source
        if src.horizon <= 0:
            raise ScenarioError("horizon must be positive")
        if isinstance(src, UniformPairs) and (src.count < 0 or (src.connections or 0) < 0):
            raise ScenarioError("counts must be >= 0")

    @property
    def horizon(self) -> float:
        return self.trace_source.horizon

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    def traces_for(self, trial: int) -> TraceSet:
        """Background traces of trial ``trial`` (deterministic in ``seed``)."""
        spec, src = self.spec, self.trace_source
        varies = spec.control_mode is ControlMode.TIME_VARYING
        if isinstance(src, MM1Source):
            return draw_traces(spec, src.params, self.seed, trial, src.horizon, src.link)
        if isinstance(src, Explicit):
            compute = tuple(None if (i == 0 and not varies) or jobs is None
                            else BackgroundTrace(jobs, horizon=src.horizon)
                            for i, jobs in enumerate(src.compute))
            link = BackgroundTrace(src.link, horizon=src.horizon) if varies and src.link is not None else None
            return TraceSet(compute, link)
        compute = [None if (i == 0 and not varies)
                   else generate_uniform_trace(src.count, src.horizon, (self.seed, trial, i, 0))
                   for i in range(spec.worker_count + 1)]
        link = None
        if varies:
            n_conn = src.count if src.connections is None else src.connections
            link = generate_uniform_trace(n_conn, src.horizon, (self.seed, trial, 0, 1))
        return TraceSet(tuple(compute), link)

    def profiles_for(self, trial: int):
        return profiles_for(self.spec, self.traces_for(trial), self.hypervisor)

    def solve_trial(self, trial: int) -> tuple[Schedule, list[StepProfile], list[StepProfile]]:
        w, z = self.profiles_for(trial)
        return solve(self.spec, w, z, self.solver, self.horizon), w, z

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        spec = self.spec
        src = self.trace_source
        if isinstance(src, UniformPairs):
            traces = {"kind": "uniform_pairs", "count": src.count, "horizon": src.horizon,
                      "connections": src.connections}
        elif isinstance(src, MM1Source):
            traces = {"kind": "mm1", "horizon": src.horizon,
                      "params": [_mm1_dict(p) for p in src.params],
                      "link": _mm1_dict(src.link) if src.link else None}
        else:
            traces = {"kind": "explicit", "horizon": src.horizon,
                      "compute": [None if j is None else [list(p) for p in j] for j in src.compute],
                      "link": None if src.link is None else [list(p) for p in src.link]}
        opts = self.solver
        return {
            "schema_version": SCHEMA_VERSION,
            "network": {"w": list(spec.base_w), "z": list(spec.base_z), "t_cp": spec.t_cp,
                        "t_cm": spec.t_cm, "control_mode": spec.control_mode.value},
            "hypervisor": (None if self.hypervisor.table is None
                           else {str(k): v for k, v in self.hypervisor.table.items()}),
            "traces": traces,
            "solver": {"mode": opts.mode.value, "sweep_step": opts.sweep_step,
                       "sum_tolerance": opts.sum_tolerance,
                       "stage_tolerance": opts.stage_tolerance,
                       "max_iterations": opts.max_iterations, "stage_grid": opts.stage_grid},
            "trials": self.trials,
            "seed": self.seed,
        }

    def content_hash(self) -> str:
        """Git blob SHA-1 of the canonical JSON form."""
        body = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _mm1_dict(p: MM1Params) -> dict:
    return {"lambda": p.lam, "mu": p.mu, "start_state": p.start_state}


def _load_pairs(value, base: Path | None):
    if value is None:
        return None
    if isinstance(value, str):
        path = Path(value) if base is None else base / value
        value = json.loads(path.read_text())
    return tuple((float(a), float(d)) for a, d in value)


def scenario_from_dict(data: dict, base: Path | None = None) -> Scenario:
    """Build a scenario from its JSON form; relative trace files resolve against ``base``."""
    try:
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema_version {version}")
        net = data.get("network", {})
        mode = ControlMode(net.get("control_mode", "time_invariant"))
        if "workers" in net:
            spec = default_spec(int(net["workers"]), float(net.get("w", 1.0)), mode)
        else:
            spec = NetworkSpec(tuple(net["w"]), tuple(net["z"]), float(net.get("t_cp", 4.0)),
                               float(net.get("t_cm", 1.0)), mode)
        tr = data.get("traces", {"kind": "uniform_pairs"})
        kind = tr.get("kind", "uniform_pairs")
        horizon = float(tr.get("horizon", 50.0))
        if kind == "uniform_pairs":
            conn = tr.get("connections")
            source = UniformPairs(int(tr.get("count", 40)), horizon,
                                  None if conn is None else int(conn))
        elif kind == "mm1":
            params = tr["params"]
            if isinstance(params, dict):
                params = [params] * (spec.worker_count + 1)
            mm1 = tuple(MM1Params(float(p["lambda"]), float(p["mu"]), int(p.get("start_state", 0)))
                        for p in params)
            link = tr.get("link")
            link = MM1Params(float(link["lambda"]), float(link["mu"]),
                             int(link.get("start_state", 0))) if link else None
            source = MM1Source(mm1, link, horizon)
        elif kind == "explicit":
            compute = tuple(_load_pairs(v, base) for v in tr["compute"])
            if len(compute) != spec.worker_count + 1:
                raise ScenarioError("explicit traces need one entry per processor (N + 1)")
            source = Explicit(compute, _load_pairs(tr.get("link"), base), horizon)
        else:
            raise ScenarioError(f"unknown trace kind {kind!r}")
        s = data.get("solver", {})
        solver = SolverOptions(
            mode=SearchMode(s.get("mode", "bisect")),
            sweep_step=float(s.get("sweep_step", 0.01)),
            sum_tolerance=float(s.get("sum_tolerance", 1e-6)),
            stage_tolerance=float(s.get("stage_tolerance", 1e-10)),
            max_iterations=int(s.get("max_iterations", 200)),
            stage_grid=s.get("stage_grid"))
        hv = data.get("hypervisor")
        hv = HypervisorFunction({int(k): float(v) for k, v in hv.items()} if hv else None)
        return Scenario(spec, source, solver, int(data.get("trials", 1000)),
                        int(data.get("seed", 0)), hv)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(data, path.parent)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")


# -- CSV helpers ---------------------------------------------------------

def render_csv(header: Sequence[str], rows: Sequence[Sequence], scenario: Scenario,
               extra: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    opts = scenario.solver
    buf.write(f"# seed={scenario.seed}\n")
    buf.write(f"# solver=mode:{opts.mode.value};sweep_step:{opts.sweep_step};"
              f"sum_tolerance:{opts.sum_tolerance};stage_tolerance:{opts.stage_tolerance};"
              f"max_iterations:{opts.max_iterations};stage_grid:{opts.stage_grid}\n")
    for k, v in (extra or {}).items():
        buf.write(f"# {k}={v}\n")
    buf.write(f"# scenario_sha1={scenario.content_hash()}\n")
    return buf.getvalue()


def schedule_header(n: int) -> list[str]:
    return (["T_f"] + [f"alpha_{i}" for i in range(n + 1)] + ["sum"]
            + [f"T_{i}" for i in range(1, n + 1)])


def schedule_row(s: Schedule) -> list[float]:
    return [s.finish_time, *s.fractions, s.fraction_sum, *s.stage_times]


def read_schedule_csv(path: str | Path, point: str = "solution") -> Schedule:
    """Read back the row labelled ``point`` from a schedule CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    for r in body:
        rec = dict(zip(header, r))
        if rec.get("point", point) != point:
            continue
        n = sum(1 for h in header if h.startswith("T_") and h != "T_f")
        return Schedule([float(rec[f"alpha_{i}"]) for i in range(n + 1)],
                        [float(rec[f"T_{i}"]) for i in range(1, n + 1)], float(rec["T_f"]))
    raise ScenarioError(f"no row {point!r} in {path}")


class VerificationError(RuntimeError):
    pass


def verify(schedule: Schedule, spec: NetworkSpec, w, z, slot: float = VERIFY_SLOT) -> None:
    """Refuse a schedule that the slot replay does not reproduce."""
    report = replay_oracle(schedule, spec, w, z, slot)
    if not report.passed():
        raise VerificationError(f"replay residuals {report.residuals} exceed {10 * slot}")


# -- experiments ---------------------------------------------------------

def default_scenario(experiment: str, seed: int = 0, trials: int | None = None) -> Scenario:
    """Built-in setup for each experiment."""
    ti, tv = ControlMode.TIME_INVARIANT, ControlMode.TIME_VARYING
    table = SolverOptions.table_reproduction()
    presets = {
        "table1": (default_spec(3, 1.0, ti), UniformPairs(40), table),
        "table2": (default_spec(3, 1.0, ti), UniformPairs(0), SolverOptions()),
        "table3": (default_spec(3, 1.0, ti), UniformPairs(0), table),
        "table4": (default_spec(3, 1.0, tv), UniformPairs(40), table),
        "table5": (default_spec(3, 1.0, tv), UniformPairs(0), table),
        "sweep-a1": (default_spec(3, 1.0, ti), UniformPairs(40), SolverOptions(mode=SearchMode.SWEEP_DOWN)),
        "sweep-a2": (default_spec(3, 1.0, tv), UniformPairs(40), SolverOptions(mode=SearchMode.SWEEP_DOWN)),
        "trend-bg": (default_spec(3, 1.0, ti), UniformPairs(40), SolverOptions()),
        "trend-n": (default_spec(3, 1.0, ti), UniformPairs(40), SolverOptions()),
        "speedup": (default_spec(3, 1.0, ti), UniformPairs(40), SolverOptions()),
        "stochastic": (default_spec(3, 1.0, ti),
                       MM1Source((MM1Params(0.1, 0.125, 0),) * 4), SolverOptions()),
    }
    if experiment not in presets:
        raise ScenarioError(f"unknown experiment {experiment!r}; choose from {sorted(presets)}")
    spec, src, opts = presets[experiment]
    return Scenario(spec, src, opts, trials or 1000, seed)


def _table_rows(scenario: Scenario) -> tuple[list[str], list[list]]:
    sched, w, z = scenario.solve_trial(0)
    verify(sched, scenario.spec, w, z)
    header = ["point"] + schedule_header(scenario.spec.worker_count)
    rows = []
    if sched.bracket is not None:
        lo, hi = sched.bracket
        for s in (lo, hi):
            verify(s, scenario.spec, w, z)
        closest = lo if abs(lo.fraction_sum - 1) <= abs(hi.fraction_sum - 1) else hi
        rows += [["bracket_low", *schedule_row(lo)], ["bracket_high", *schedule_row(hi)],
                 ["closest", *schedule_row(closest)]]
    rows.append(["solution", *schedule_row(sched)])
    return header, rows


def _classic_rows(scenario: Scenario):
    sched = solve_time_invariant(scenario.spec)
    n = scenario.spec.worker_count
    verify(sched, scenario.spec, *network_profiles(scenario.spec, [StepProfile.constant(w)
                                                                  for w in scenario.spec.base_w[1:]]))
    return ["point"] + schedule_header(n), [["solution", *schedule_row(sched)]]


def _sweep_rows(scenario: Scenario):
    sched, w, z = scenario.solve_trial(0)
    if scenario.spec.control_mode is ControlMode.TIME_INVARIANT:
        upper = scenario.spec.base_w[0] * scenario.spec.t_cp
    else:
        upper = w[0].inverse_primitive(scenario.spec.t_cp)
    step = scenario.solver.sweep_step
    rows = []
    k = 0
    while True:
        t = upper - k * step
        if t <= step / 2:
            break
        cand = fractions_at(t, scenario.spec, w, z, scenario.solver)
        rows.append(schedule_row(cand))
        if cand.fraction_sum < 0.5:
            break
        k += 1
    return schedule_header(scenario.spec.worker_count), rows, {"solution_T_f": fmt(sched.finish_time)}


def mean_finish_time(scenario: Scenario) -> tuple[float, float, float]:
    """Mean and standard deviation of ``T_f`` and mean speedup over ``scenario.trials``."""
    tf, sp = [], []
    spec = scenario.spec
    for k in range(scenario.trials):
        sched, w, z = scenario.solve_trial(k)
        tf.append(sched.finish_time)
        if spec.control_mode is ControlMode.TIME_INVARIANT:
            t_fs = metrics.sequential_time_invariant(spec.base_w[0], spec.t_cp)
        else:
            t_fs = metrics.sequential_time_varying(w[0], spec.t_cp)
        sp.append(metrics.speedup(t_fs, sched.finish_time))
    tf = np.asarray(tf)
    return float(tf.mean()), float(tf.std(ddof=1)) if len(tf) > 1 else 0.0, float(np.mean(sp))


def trend_over_counts(scenario: Scenario, counts: Sequence[int] = BG_COUNTS,
                      w_levels: Sequence[float] = W_LEVELS) -> list[list]:
    """Rows ``(W, count, mean T_f, std T_f, mean speedup)``."""
    rows = []
    n = scenario.spec.worker_count
    for w in w_levels:
        spec = default_spec(n, w, scenario.spec.control_mode)
        for c in counts:
            src = dataclasses.replace(scenario.trace_source, count=c, connections=None)
            m, s, sp = mean_finish_time(scenario.replace(spec=spec, trace_source=src))
            rows.append([w, c, m, s, sp])
    return rows


def trend_over_workers(scenario: Scenario, workers: Sequence[int] = WORKER_COUNTS,
                       w_levels: Sequence[float] = W_LEVELS) -> list[list]:
    """Rows ``(W, N, mean T_f, std T_f, mean speedup)``."""
    rows = []
    for w in w_levels:
        for n in workers:
            spec = default_spec(n, w, scenario.spec.control_mode)
            m, s, sp = mean_finish_time(scenario.replace(spec=spec))
            rows.append([w, n, m, s, sp])
    return rows


def _require_uniform(scenario: Scenario):
    if not isinstance(scenario.trace_source, UniformPairs):
        raise ScenarioError("trend experiments need a uniform_pairs trace source")


def _mm1_source(scenario: Scenario) -> MM1Source:
    src = scenario.trace_source
    if not isinstance(src, MM1Source):
        raise ScenarioError("the stochastic experiment needs an mm1 trace source")
    return src


def stochastic_comparison(scenario: Scenario, initial: InitialGuess = InitialGuess.TIME_INVARIANT):
    """Finishing-time samples for the three schedulers plus a known-trace reference.

    The reference solves the deterministic problem on traces drawn from a
    separate stream, standing in for the actual (unknown) background activity.
    """
    src = _mm1_source(scenario)
    spec, k, seed = scenario.spec, scenario.trials, scenario.seed
    sim = simulation_based(spec, src.params, k, seed, options=scenario.solver,
                           horizon=src.horizon, link=src.link, hv=scenario.hypervisor)
    it = iterative(spec, src.params, k, seed, initial, horizon=src.horizon, link=src.link,
                   hv=scenario.hypervisor)
    base = baseline_schedule(spec, src.params, scenario.hypervisor, src.link)
    ref_seed = (seed, 0x5EED)
    reference = simulation_based(spec, src.params, k, ref_seed, options=scenario.solver,
                                 horizon=src.horizon, link=src.link, hv=scenario.hypervisor)
    return {"simulation-based": sim, "iterative": it, "baseline": base,
            "deterministic-reference": reference}


def _stochastic_files(scenario: Scenario):
    res = stochastic_comparison(scenario)
    samples = {
        "simulation-based": res["simulation-based"].finish_times,
        "iterative": res["iterative"].finish_times,
        "baseline": [res["baseline"].finish_time],
        "deterministic-reference": res["deterministic-reference"].finish_times,
    }
    q_header = ["method", "min", "q25", "median", "q75", "max", "whisker_low", "whisker_high",
                "selected_T_f", "outliers"]
    q_rows = []
    for name, values in samples.items():
        st = box_stats(values)
        selected = (res[name].finish_time if name == "baseline"
                    else res[name].median_finish_time)
        q_rows.append([name, st["min"], st["q25"], st["median"], st["q75"], st["max"],
                       st["whisker_low"], st["whisker_high"], selected,
                       ";".join(fmt(v) for v in st["outliers"])])
    t_header = ["trial_id", "simulation-based", "iterative", "deterministic-reference"]
    by_trial = [{t.index: t.schedule.finish_time for t in res[m].trials}
                for m in ("simulation-based", "iterative", "deterministic-reference")]
    t_rows = [[k] + [d.get(k, "") for d in by_trial] for k in range(scenario.trials)]
    return {"stochastic_quantiles.csv": (q_header, q_rows, {}),
            "stochastic_trials.csv": (t_header, t_rows, {})}


EXPERIMENTS: dict[str, Callable] = {}


def _experiment(name):
    def deco(fn):
        EXPERIMENTS[name] = fn
        return fn
    return deco


for _name in ("table1", "table3", "table4", "table5"):
    EXPERIMENTS[_name] = lambda sc, _n=_name: {f"{_n}.csv": (*_table_rows(sc), {})}


@_experiment("table2")
def _table2(sc):
    return {"table2.csv": (*_classic_rows(sc), {})}


@_experiment("sweep-a1")
def _sweep_a1(sc):
    return {"sweep_a1.csv": _sweep_rows(sc)}


@_experiment("sweep-a2")
def _sweep_a2(sc):
    return {"sweep_a2.csv": _sweep_rows(sc)}


@_experiment("trend-bg")
def _trend_bg(sc):
    _require_uniform(sc)
    return {"trend_bg.csv": (["W", "background_jobs", "mean_T_f", "std_T_f", "mean_speedup"],
                             trend_over_counts(sc), {"trials": sc.trials})}


@_experiment("trend-n")
def _trend_n(sc):
    _require_uniform(sc)
    return {"trend_n.csv": (["W", "workers", "mean_T_f", "std_T_f", "mean_speedup"],
                            trend_over_workers(sc), {"trials": sc.trials})}


@_experiment("speedup")
def _speedup(sc):
    _require_uniform(sc)
    rows = [[w, n, sp] for w, n, _, _, sp in trend_over_workers(sc)]
    return {"speedup.csv": (["W", "workers", "mean_speedup"], rows, {"trials": sc.trials})}


@_experiment("stochastic")
def _stochastic(sc):
    return _stochastic_files(sc)


def run_experiment(scenario: Scenario | None, experiment: str, out_dir: str | Path,
                   seed: int | None = None, trials: int | None = None,
                   mode: SearchMode | None = None) -> list[Path]:
    """Run one experiment and write its CSV files into ``out_dir``."""
    if experiment not in EXPERIMENTS:
        raise ScenarioError(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
    if scenario is None:
        scenario = default_scenario(experiment, seed or 0, trials)
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if trials is not None:
        changes["trials"] = trials
    if mode is not None:
        changes["solver"] = dataclasses.replace(scenario.solver, mode=SearchMode(mode))
    scenario = scenario.replace(**changes)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, (header, rows, extra) in EXPERIMENTS[experiment](scenario).items():
        path = out_dir / fname
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(header, rows, scenario, {"experiment": experiment, **extra}))
        written.append(path)
    return written
