"""Command-line entry point: ``dlsched {solve,simulate,estimate,experiment,oracle}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .deterministic import SearchMode, SolverError, replay_oracle
from .mm1 import FadingWindow, estimate_lambda, estimate_mu
from .stochastic import (InitialGuess, baseline_schedule, fmt, iterative, simulation_based,
                         write_outcome_csv)

MODES = {"sweep": SearchMode.SWEEP_DOWN, "bisect": SearchMode.BISECTION}


def _scenario(args) -> harness.Scenario:
    sc = harness.load_scenario(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "mode", None) is not None:
        changes["solver"] = dataclasses.replace(sc.solver, mode=MODES[args.mode])
    return sc.replace(**changes)


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text, encoding="utf-8")
    print(path / name)


def cmd_solve(args) -> int:
    sc = _scenario(args)
    sched, w, z = sc.solve_trial(args.trial)
    harness.verify(sched, sc.spec, w, z)
    rows = []
    if sched.bracket is not None:
        rows += [["bracket_low", *harness.schedule_row(sched.bracket[0])],
                 ["bracket_high", *harness.schedule_row(sched.bracket[1])]]
    rows.append(["solution", *harness.schedule_row(sched)])
    header = ["point"] + harness.schedule_header(sc.spec.worker_count)
    _emit(harness.render_csv(header, rows, sc, {"trial": args.trial}), args.out, "schedule.csv")
    return 0


def cmd_simulate(args) -> int:
    import io
    sc = _scenario(args)
    src = sc.trace_source
    if not isinstance(src, harness.MM1Source):
        raise harness.ScenarioError("simulate needs an mm1 trace source")
    if args.method == "baseline":
        sched = baseline_schedule(sc.spec, src.params, sc.hypervisor, src.link)
        header = ["point"] + harness.schedule_header(sc.spec.worker_count)
        _emit(harness.render_csv(header, [["baseline", *harness.schedule_row(sched)]], sc),
              args.out, "baseline.csv")
        return 0
    if args.method == "simulation":
        outcome = simulation_based(sc.spec, src.params, sc.trials, sc.seed, options=sc.solver,
                                   horizon=src.horizon, link=src.link, hv=sc.hypervisor,
                                   workers=args.workers)
    else:
        outcome = iterative(sc.spec, src.params, sc.trials, sc.seed, InitialGuess(args.initial),
                            horizon=src.horizon, link=src.link, hv=sc.hypervisor)
    buf = io.StringIO()
    write_outcome_csv(outcome, buf)
    buf.write(f"# seed={sc.seed}\n# method={args.method}\n"
              f"# scenario_sha1={sc.content_hash()}\n")
    _emit(buf.getvalue(), args.out, f"{args.method}.csv")
    print(f"wall_time_s={outcome.wall_time:.3f} failures={len(outcome.failures)}",
          file=sys.stderr)
    return 0


def _window(samples, weights, gamma, size) -> FadingWindow:
    if weights is not None:
        return FadingWindow(tuple(samples), tuple(weights))
    return FadingWindow.geometric(samples, gamma, size)


def cmd_estimate(args) -> int:
    try:
        data = json.loads(Path(args.samples).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise harness.ScenarioError(f"cannot read samples {args.samples}: {exc}") from exc
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["parameter", "estimate", "samples_used"])
    if "inter_arrivals" in data:
        win = _window(data["inter_arrivals"], data.get("arrival_weights"), args.gamma, args.window)
        w.writerow(["lambda", fmt(estimate_lambda(win)), len(win.samples)])
    if "stay_times" in data:
        win = _window(data["stay_times"], data.get("stay_weights"), args.gamma, args.window)
        w.writerow(["mu", fmt(estimate_mu(win)), len(win.samples)])
    return 0


def cmd_experiment(args) -> int:
    args.out = args.out or "results"
    sc = harness.load_scenario(args.scenario) if args.scenario else None
    paths = harness.run_experiment(sc, args.name, args.out, seed=args.seed, trials=args.trials,
                                   mode=MODES[args.mode] if args.mode else None)
    for p in paths:
        print(p)
    return 0


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    sched = harness.read_schedule_csv(args.schedule, args.point)
    w, z = sc.profiles_for(args.trial)
    report = replay_oracle(sched, sc.spec, w, z, args.slot)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["processor", "alpha", "processed", "received", "residual", "finish_time"])
    for i, a in enumerate(report.fractions):
        out.writerow([i, fmt(a), fmt(report.processed[i]), fmt(report.received[i]),
                      fmt(report.residuals[i]), fmt(report.finish_times[i])])
    flagged = report.flagged(args.tol)
    if flagged:
        print(json.dumps({"error": "oracle", "flagged": flagged}), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlsched", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--mode", choices=sorted(MODES))
        sp.add_argument("--out", help="output directory (default: stdout)")

    sp = sub.add_parser("solve", help="solve one scenario trial")
    common(sp)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="stochastic scheduling with M/M/1 traces")
    common(sp)
    sp.add_argument("--method", choices=["simulation", "iterative", "baseline"],
                    default="simulation")
    sp.add_argument("--initial", choices=[g.value for g in InitialGuess],
                    default=InitialGuess.TIME_INVARIANT.value)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="fading-memory rate estimates from a sample file")
    sp.add_argument("samples", help="JSON with inter_arrivals and/or stay_times")
    sp.add_argument("--gamma", type=float, default=0.95)
    sp.add_argument("--window", type=int, default=50)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("experiment", help="reproduce a table or figure as CSV")
    sp.add_argument("name", choices=sorted(harness.EXPERIMENTS))
    sp.add_argument("--scenario")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("oracle", help="replay a schedule slot by slot")
    common(sp)
    sp.add_argument("schedule", help="schedule CSV written by `solve`")
    sp.add_argument("--point", default="solution")
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--slot", type=float, default=1e-3)
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ScenarioError, SolverError, ValueError, harness.VerificationError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
