"""Throughput scaling study: effective gradients/sec vs workers and threads.

Runs the same quadratic workload with a 1 ms simulated per-gradient cost
over an nW sweep and a p sweep, then prints the throughput ratios against
the single-worker, single-thread reference. Per-run CSVs and the summary
JSON land in --out-dir.
"""
import argparse
import sys

from dpsgd.bench import ExperimentSpec, run_experiment
from dpsgd.engine import DelayModel, ProblemSpec, RunConfig


def base_config(seed: int, compute_cost_s: float) -> RunConfig:
    return RunConfig(
        T=500,
        M=2,
        nW=1,
        p=1,
        B=2,
        eta=0.05,
        rho_schedule={"kind": "constant", "value": 0.05},
        seed=seed,
        problem=ProblemSpec(name="quadratic", n=100, dim=10, batch_size=1,
                            data_seed=77),
        execution="threaded",
        compute_cost_s=compute_cost_s,
        compute_cost_mode="sleep",
        delay=DelayModel(kind="fixed", latency=1e-5),
        grad_norm_every=0,
    )


def print_table(label: str, summary: dict) -> None:
    print(f"\n{label}")
    print(f"{'nW':>4} {'p':>4} {'B':>4} {'grad/s':>10} {'ratio':>8}")
    for rec in summary["runs"]:
        if rec.get("error"):
            print(f"{rec['nW']:>4} {rec['p']:>4} {rec['B']:>4}  FAILED: {rec['error']}")
            continue
        ratio = rec["throughput_ratio_vs_reference"]
        print(f"{rec['nW']:>4} {rec['p']:>4} {rec['B']:>4} "
              f"{rec['gradients_per_s']:>10.1f} {ratio:>8.2f}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--compute-cost-s", type=float, default=1e-3)
    ap.add_argument("--out-dir", default="bench_out/speedup")
    args = ap.parse_args(argv)

    base = base_config(args.seed, args.compute_cost_s)
    nw_spec = ExperimentSpec(base=base, nW_list=[1, 2, 4], name="speedup_nw",
                             out_dir=args.out_dir)
    p_spec = ExperimentSpec(base=base, p_list=[1, 2, 4], name="speedup_p",
                            out_dir=args.out_dir)

    print_table("worker scaling (nW sweep, p=1)", run_experiment(nw_spec))
    print_table("thread scaling (p sweep, nW=1)", run_experiment(p_spec))
    print(f"\nper-run files under {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
