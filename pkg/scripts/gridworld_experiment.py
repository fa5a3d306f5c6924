"""Gridworld learning study: asynchronous advantage actor-critic.

Trains the tabular agent on the default 5x5 gridworld across several
seeds and reports the mean return over the last hundred episodes against
the value-iteration optimum.
"""
import argparse
import sys

from dpsgd.hsa2c import ToyEnv, hsa2c_config, optimal_return, run_hsa2c


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--side", type=int, default=5)
    args = ap.parse_args(argv)

    env = ToyEnv(side=args.side)
    target = optimal_return(env)
    print(f"{args.side}x{args.side} gridworld, value-iteration optimum "
          f"{target:.4f}")
    print(f"{'seed':>6} {'mean return (last 100)':>24} {'episodes':>10} "
          f"{'env steps':>10}")
    for seed in args.seeds:
        cfg = hsa2c_config(env, seed=seed)
        _, result, oracle = run_hsa2c(cfg, env)
        print(f"{seed:>6} {oracle.mean_return_last():>24.4f} "
              f"{len(oracle.episode_returns):>10} {oracle.env_steps:>10}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
