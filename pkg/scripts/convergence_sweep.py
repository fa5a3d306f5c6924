"""Convergence-rate study: mean squared gradient norm vs total work.

Sweeps the iteration budget T on the non-convex sigmoid objective, holding
the shape fixed and scaling the constant aggregation rate like 1/sqrt(T),
then fits a log-log slope. A slope near -0.5 matches the expected
1/sqrt(work) decay of the averaged gradient norm.
"""
import argparse
import sys

from dpsgd.bench import convergence_study
from dpsgd.engine import ProblemSpec, RunConfig


def base_config(seed: int) -> RunConfig:
    return RunConfig(
        T=1000,
        M=1,
        nW=1,
        p=1,
        B=1,
        eta=1.0,
        rho_schedule={"kind": "constant", "value": 0.5},
        seed=seed,
        problem=ProblemSpec(name="sigmoid", n=1000, dim=20, batch_size=10,
                            data_seed=1234),
        execution="simulated",
        grad_norm_every=10,
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-values", type=int, nargs="+",
                    default=[1000, 10000, 100000])
    ap.add_argument("--out-dir", default="bench_out/convergence")
    args = ap.parse_args(argv)

    study = convergence_study(base_config(args.seed), args.t_values,
                              out_dir=args.out_dir)
    print(f"{'T':>8} {'work':>8} {'mean |grad|^2':>14}")
    for row in study["rows"]:
        print(f"{row['T']:>8} {row['work']:>8} {row['mean_grad_norm_sq']:>14.6g}")
    print(f"\nlog-log slope {study['slope']:+.4f}  (R^2 {study['r_squared']:.4f})")
    print(f"per-run files under {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
