"""Mean finishing time and speedup versus background load and worker count."""
import argparse
import warnings

from dlsched import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/trends")
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    for name in ("trend-bg", "trend-n", "speedup"):
        for path in harness.run_experiment(None, name, args.out, seed=args.seed,
                                           trials=args.trials):
            print(path)


if __name__ == "__main__":
    main()
