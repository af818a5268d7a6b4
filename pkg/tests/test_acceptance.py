"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line and the summary is repeated at the end of
the pytest run.
"""
import subprocess
import sys
import time
import timeit
import warnings

import numpy as np

from dlsched import harness
from dlsched.classic import solve_time_invariant
from dlsched.deterministic import (SearchMode, SolverOptions, algorithm_one, algorithm_two,
                                   replay_oracle, solve)
from dlsched.mm1 import FadingWindow, MM1Params, estimate_lambda, make_rng, simulate_background
from dlsched.model import ControlMode, StepProfile, equivalent_w, equivalent_z
from dlsched.stochastic import baseline_schedule, iterative, simulation_based

from helpers import quadrature, random_profile, random_profiles, random_spec

TABLE2 = (1.4070, 0.3517, 0.2759, 0.2122, 0.1602)
TABLE3_ALPHA = (0.3525, 0.2755, 0.2117, 0.1600)
TABLE5_ALPHA = (0.3528, 0.2755, 0.2117, 0.1600)
MM1 = MM1Params(0.1, 0.125, 0)


def _max_diff(a, b):
    return max(abs(x - y) for x, y in zip(a, b))


def test_c01_table2_exact(record):
    spec = harness.default_spec(3)
    s = solve_time_invariant(spec)
    err = _max_diff((s.finish_time,) + s.fractions, TABLE2)
    per_call = min(timeit.repeat(lambda: solve_time_invariant(spec), number=100, repeat=5)) / 100
    ok = err <= 5e-5 and per_call < 1e-3
    record(1, ok, f"max |diff|={err:.2e}, {per_call * 1e6:.1f} us per solve")
    assert ok


def test_c02_table3_sweep(record):
    spec = harness.default_spec(3)
    w = [StepProfile.constant(v) for v in spec.base_w[1:]]
    s = algorithm_one(spec, w, SolverOptions.table_reproduction())
    err = _max_diff(s.fractions, TABLE3_ALPHA)
    ok = abs(s.finish_time - 1.41) <= 5e-3 and err <= 5e-4 and abs(s.fraction_sum - 0.9996) <= 5e-4
    record(2, ok, f"T_f={s.finish_time:.5f}, max alpha diff={err:.2e}, sum={s.fraction_sum:.5f}")
    assert ok


def test_c03_table5_sweep(record):
    spec = harness.default_spec(3, control_mode=ControlMode.TIME_VARYING)
    w = [StepProfile.constant(v) for v in spec.base_w]
    z = [StepProfile.constant(v) for v in spec.base_z]
    s = algorithm_two(spec, w, z, SolverOptions.table_reproduction())
    err = _max_diff(s.fractions, TABLE5_ALPHA)
    ok = abs(s.finish_time - 1.411) <= 5e-3 and err <= 5e-4
    record(3, ok, f"T_f={s.finish_time:.5f}, max alpha diff={err:.2e}")
    assert ok


def test_c04_oracle_equivalence(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for k in range(100):
        mode = ControlMode.TIME_VARYING if k % 2 else ControlMode.TIME_INVARIANT
        spec = random_spec(rng, 6, mode)
        w, z = random_profiles(rng, spec, 60)
        for search in SearchMode:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                s = solve(spec, w, z, SolverOptions(mode=search), horizon=50.0)
            rep = replay_oracle(s, spec, w, z, slot=1e-4)
            worst = max(worst, max(rep.residuals))
            if not rep.passed(1e-3):
                bad.append((k, search.value, rep.flagged(1e-3)))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    record(4, ok, f"200 solves, worst residual={worst:.2e}, failures={len(bad)}, {elapsed:.1f} s")
    assert ok, bad[:5]


def test_c05_reduction(record):
    rng = np.random.default_rng(5)
    worst = 0.0
    opts = SolverOptions(mode=SearchMode.BISECTION)
    for _ in range(50):
        spec = random_spec(rng, 8)
        ref = solve_time_invariant(spec)
        one = algorithm_one(spec, [StepProfile.constant(v) for v in spec.base_w[1:]], opts)
        tv = spec.with_mode(ControlMode.TIME_VARYING)
        two = algorithm_two(tv, [StepProfile.constant(v) for v in spec.base_w],
                            [StepProfile.constant(v) for v in spec.base_z], opts)
        for s in (one, two):
            worst = max(worst, _max_diff((s.finish_time,) + s.fractions,
                                         (ref.finish_time,) + ref.fractions))
    ok = worst <= 1e-6
    record(5, ok, f"max |diff| vs closed form over 50 specs={worst:.2e}")
    assert ok


def test_c06_equivalent_speeds(record):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        p = random_profile(rng, span=10.0)
        a, b = np.sort(rng.uniform(0.0, 12.0, 2))
        if b - a < 1e-3:
            b = a + 1.0
        q = quadrature(p, a, b, 1e-5)
        for got in (equivalent_w(p, a, b), equivalent_z(p, a, b)):
            worst = max(worst, abs(got - (b - a) / q) / ((b - a) / q))
    ok = worst <= 1e-4
    record(6, ok, f"max relative error vs 1e-5 quadrature={worst:.2e}")
    assert ok


def test_c07_wmle(record):
    exact = True
    hits = 0
    for seed in range(100):
        x = make_rng(seed).exponential(1 / 0.1, 10_000)
        est = estimate_lambda(FadingWindow.uniform(x))
        exact &= est == len(x) / np.sum(x)
        hits += abs(est - 0.1) <= 0.005
    ok = exact and hits >= 99
    record(7, ok, f"uniform weights exact={exact}, within 5% in {hits}/100 seeds")
    assert ok


def test_c08_mm1_simulator(record):
    horizon = 1e6
    trace = simulate_background(MM1, horizon, seed=1)
    times, counts = trace.count_path()
    t = np.append(times, horizon)
    c = np.asarray(counts)
    avg = float(np.sum(c * np.diff(t)) / horizon)
    busy_prev = c[:-1] > 0
    ups = np.sum((np.diff(c) > 0) & busy_prev)
    moves = np.sum(busy_prev)
    p = 4 / 9
    freq = ups / moves
    sigma = np.sqrt(p * (1 - p) / moves)
    ok = abs(avg - 4) <= 0.2 and abs(freq - p) <= 3 * sigma
    record(8, ok, f"time-average state={avg:.4f}, up-move freq={freq:.5f} "
                  f"({abs(freq - p) / sigma:.2f} sigma from 4/9)")
    assert ok


def test_c09_stochastic_comparison(record):
    sc = harness.default_scenario("stochastic")
    src = sc.trace_source
    t0 = time.perf_counter()
    below, agree = 0, 0
    base = baseline_schedule(sc.spec, src.params, None, src.link).finish_time
    for seed in range(30):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sim = simulation_based(sc.spec, src.params, 1000, seed, horizon=src.horizon)
            it = iterative(sc.spec, src.params, 1000, seed, horizon=src.horizon)
        m_sim, m_it = sim.median_finish_time, it.median_finish_time
        below += m_sim < base and m_it < base
        agree += abs(m_sim - m_it) <= 0.05 * max(m_sim, m_it)
    elapsed = time.perf_counter() - t0
    ok = below >= 29 and agree == 30 and elapsed < 600
    record(9, ok, f"both below baseline ({base:.4f}) in {below}/30 seeds, medians within 5% "
                  f"in {agree}/30, {elapsed:.1f} s")
    assert ok


def test_c10_trends(record):
    sc = harness.default_scenario("trend-bg", seed=0, trials=1000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        by_count = [r[2] for r in harness.trend_over_counts(sc, (0, 20, 40, 60, 80), (1.0,))]
        grid = harness.trend_over_workers(sc, (2, 4, 6, 8), (1.0, 1.5, 2.0))
    tf_n = [r[2] for r in grid if r[0] == 1.0]
    speed = {(w, n): sp for w, n, _, _, sp in grid}
    inc = all(b > a for a, b in zip(by_count, by_count[1:]))
    dec = all(b < a for a, b in zip(tf_n, tf_n[1:]))
    sp_inc = all(speed[w, b] > speed[w, a] for w in (1.0, 1.5, 2.0)
                 for a, b in zip((2, 4, 6), (4, 6, 8)))
    w_ok = {n: speed[1.0, n] <= speed[1.5, n] <= speed[2.0, n] for n in (2, 4, 6, 8)}
    ok = inc and dec and sp_inc and all(w_ok.values())
    record(10, ok, f"T_f up in count={inc} ({'/'.join(f'{v:.3f}' for v in by_count)}); "
                   f"T_f down in N={dec}; speedup up in N={sp_inc}; speedup nondecreasing in W "
                   + ", ".join(f"N={n}:{w_ok[n]} ("
                               + "/".join(f"{speed[w, n]:.3f}" for w in (1.0, 1.5, 2.0)) + ")"
                               for n in (2, 4, 6, 8)))
    assert ok


def test_c11_performance_ratio(record):
    spec = harness.default_spec(14)
    params = [MM1] * 14
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sim = simulation_based(spec, params, 1000, 0)
        it = iterative(spec, params, 1000, 0)
    ratio = it.wall_time / sim.wall_time
    ok = ratio < 1 / 3
    record(11, ok, f"iterative {it.wall_time:.2f} s vs simulation-based {sim.wall_time:.2f} s "
                   f"(ratio {ratio:.3f})")
    assert ok


def test_c12_determinism(record, tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        subprocess.run([sys.executable, "-m", "dlsched", "experiment", "table2", "--seed", "7",
                        "--out", str(out)], check=True, capture_output=True)
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = bool(outputs[0]) and outputs[0] == outputs[1]
    record(12, ok, f"{len(outputs[0])} CSV file(s) byte-identical={outputs[0] == outputs[1]}")
    assert ok
