"""Median finishing time of the two stochastic schedulers against the stationary baseline.

Runs several harness seeds and prints one line per seed.
"""
import argparse
import warnings

from dlsched import harness
from dlsched.stochastic import baseline_schedule, iterative, simulation_based


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--trials", type=int, default=1000)
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    sc = harness.default_scenario("stochastic")
    src = sc.trace_source
    base = baseline_schedule(sc.spec, src.params, None, src.link).finish_time
    print(f"baseline T_f = {base:.6f}")
    print("seed,simulation_median,iterative_median,sim_wall_s,iter_wall_s")
    for seed in range(args.seeds):
        sim = simulation_based(sc.spec, src.params, args.trials, seed, horizon=src.horizon)
        it = iterative(sc.spec, src.params, args.trials, seed, horizon=src.horizon)
        print(f"{seed},{sim.median_finish_time:.6f},{it.median_finish_time:.6f},"
              f"{sim.wall_time:.2f},{it.wall_time:.2f}")


if __name__ == "__main__":
    main()
