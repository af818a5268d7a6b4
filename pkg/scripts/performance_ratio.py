"""Wall time of the iterative scheduler against the simulation-based one (15 processors)."""
import argparse
import warnings

from dlsched import harness
from dlsched.mm1 import MM1Params
from dlsched.stochastic import iterative, simulation_based


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=14)
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    spec = harness.default_spec(args.workers)
    params = [MM1Params(0.1, 0.125, 0)] * args.workers
    sim = simulation_based(spec, params, args.trials, 0)
    it = iterative(spec, params, args.trials, 0)
    print(f"simulation-based: {sim.wall_time:.2f} s, median T_f {sim.median_finish_time:.6f}")
    print(f"iterative:        {it.wall_time:.2f} s, median T_f {it.median_finish_time:.6f}")
    print(f"ratio:            {it.wall_time / sim.wall_time:.3f}")


if __name__ == "__main__":
    main()
