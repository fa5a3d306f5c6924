"""Command-line front end.

Subcommands map onto the library: `run` executes one engine run from a
RunConfig JSON, `sweep` expands an ExperimentSpec, `svi` and `rl` drive
the topic-model and gridworld objectives, `validate-config` parses and
checks a config without running anything.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from ..engine import (
    RunConfig,
    TcpMasterServer,
    build_oracle,
    initial_model,
    run,
    run_tcp,
    run_tcp_master,
    run_tcp_worker,
)
from ..errors import ConfigurationError, DpsgdError
from ..hsa2c import ToyEnv, optimal_return, run_hsa2c
from ..svi_lda import (
    LdaModel,
    heldout_split,
    load_uci_bow,
    perplexity,
    run_dpsvi,
    synthetic_corpus,
    topic_recovery_score,
)
from .experiments import ExperimentSpec, run_experiment
from .metrics import emit_run, result_summary, write_rows_csv, write_summary_json

LDA_SERIES_HEADER = ("wall_clock_s", "effective_docs_seen", "heldout_perplexity")
RL_SERIES_HEADER = ("wall_clock_s", "env_steps", "mean_return_last_100")


def _load_json(path) -> dict:
    """Read a JSON object, mapping file and parse problems to exit code 2."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    return raw


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig.from_dict(_load_json(args.config))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=int(args.seed))
        cfg.validate()
    return cfg


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigurationError(f"address must be HOST:PORT, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigurationError(f"port in {text!r} is not an integer")


def _emit_and_report(out_dir, stem: str, cfg: RunConfig, result) -> None:
    summary = emit_run(out_dir, stem, cfg, result)
    print(
        f"run complete: mode={summary['mode']} T={cfg.T} "
        f"wall_clock_s={result.wall_clock_s:.6g} "
        f"final_model_norm={summary['final_model_norm']:.10g}"
    )
    print(f"wrote {os.path.join(out_dir, summary['metrics_csv'])}")
    print(f"wrote {os.path.join(out_dir, stem + '_summary.json')}")


def _cmd_run(args) -> int:
    cfg = _load_run_config(args)
    if args.trace_overwrites:
        if args.transport == "tcp":
            raise ConfigurationError(
                "overwrite traces are in-process only; drop --transport tcp"
            )
        cfg = replace(cfg, trace_overwrites=True, execution="threaded")
    if args.transport == "inproc":
        cfg = replace(cfg, execution="threaded")
    stem = f"{cfg.problem.name}_seed{cfg.seed}"

    if args.transport == "tcp":
        oracle = build_oracle(cfg.problem, cfg.seed)
        init = initial_model(oracle)
        if args.master_addr:
            if args.worker_id is None:
                raise ConfigurationError("--master-addr requires --worker-id")
            passes = run_tcp_worker(
                cfg, oracle, _parse_address(args.master_addr),
                int(args.worker_id),
            )
            print(f"worker {args.worker_id} completed {passes} passes")
            return 0
        if args.listen:
            host, port = _parse_address(args.listen)
            server = TcpMasterServer(cfg, init, host=host, port=port)
            server.start()
            try:
                print(
                    f"master listening on "
                    f"{server.address[0]}:{server.address[1]}",
                    flush=True,
                )
                result = run_tcp_master(cfg, oracle, init, server=server)
            finally:
                server.close()
        else:
            result = run_tcp(cfg, oracle, init)
    else:
        result = run(cfg)
    _emit_and_report(args.out_dir, stem, cfg, result)
    return 0


def _cmd_sweep(args) -> int:
    spec = ExperimentSpec.from_dict(_load_json(args.config))
    out_dir = args.out_dir if args.out_dir is not None else spec.out_dir
    summary = run_experiment(spec, out_dir=out_dir)
    failures = [r for r in summary["runs"] if r["error"] is not None]
    print(
        f"sweep {spec.name}: {len(summary['runs'])} runs, "
        f"{len(failures)} failed"
    )
    print(f"wrote {os.path.join(out_dir, spec.name + '_summary.json')}")
    return 3 if failures else 0


def _build_corpus(params: dict):
    """Corpus and (optional) planted topics from problem params."""
    source = params.get("corpus")
    if not isinstance(source, dict) or "kind" not in source:
        raise ConfigurationError(
            "problem.params.corpus must be an object with a 'kind' field"
        )
    kind = source["kind"]
    if kind == "synthetic":
        corpus, topics = synthetic_corpus(
            int(source.get("n_docs", 500)),
            int(source.get("vocab_size", 100)),
            int(source.get("k_topics", 5)),
            int(source.get("seed", 42)),
        )
        return corpus, topics
    if kind == "uci":
        for key in ("docword", "vocab"):
            if key not in source:
                raise ConfigurationError(f"uci corpus needs a {key!r} path")
        return load_uci_bow(source["docword"], source["vocab"]), None
    raise ConfigurationError(f"unknown corpus kind {kind!r}")


def _cmd_svi(args) -> int:
    cfg = _load_run_config(args)
    if cfg.problem.name != "lda-svi":
        raise ConfigurationError(
            f"svi expects problem.name 'lda-svi', got {cfg.problem.name!r}"
        )
    params = cfg.problem.params
    if "K" not in params:
        raise ConfigurationError("problem.params must carry K (topic count)")
    K = int(params["K"])
    corpus, true_topics = _build_corpus(params)
    n_heldout = int(params.get("heldout_docs", 0))
    if n_heldout > 0:
        train, heldout = heldout_split(
            corpus, n_heldout, int(params.get("split_seed", 7))
        )
    else:
        train, heldout = corpus, corpus
    if cfg.problem.n != train.n_docs:
        raise ConfigurationError(
            f"problem.n is {cfg.problem.n} but the training corpus has "
            f"{train.n_docs} documents after the heldout split"
        )
    model0 = LdaModel.create(
        K,
        train.vocab_size,
        train.n_docs,
        zeta=float(params.get("zeta", 0.1)),
        alpha_doc=float(params.get("alpha_doc", 0.1)),
        seed=cfg.seed,
    )
    model, result = run_dpsvi(cfg, model0, train)
    perp = perplexity(model, heldout)
    docs_seen = result.counters.gradient_evals_applied * cfg.problem.batch_size

    os.makedirs(args.out_dir, exist_ok=True)
    stem = f"lda_seed{cfg.seed}"
    series_path = os.path.join(args.out_dir, f"{stem}_series.csv")
    write_rows_csv(
        series_path, LDA_SERIES_HEADER, [(result.wall_clock_s, docs_seen, perp)]
    )
    summary = result_summary(cfg, result)
    summary["heldout_perplexity"] = perp
    summary["effective_docs_seen"] = docs_seen
    summary["heldout_docs"] = heldout.n_docs if n_heldout > 0 else 0
    if true_topics is not None:
        summary["topic_recovery"] = topic_recovery_score(
            model.mean_beta(), true_topics
        )
    summary_path = os.path.join(args.out_dir, f"{stem}_summary.json")
    write_summary_json(summary_path, summary)
    print(
        f"svi complete: perplexity={perp:.6g} "
        f"effective_docs_seen={docs_seen}"
    )
    print(f"wrote {series_path}")
    print(f"wrote {summary_path}")
    return 0


def _cmd_rl(args) -> int:
    cfg = _load_run_config(args)
    if cfg.problem.name != "gridworld-a2c":
        raise ConfigurationError(
            f"rl expects problem.name 'gridworld-a2c', got {cfg.problem.name!r}"
        )
    params = cfg.problem.params
    env = ToyEnv(
        side=int(params.get("side", 5)),
        step_reward=float(params.get("step_reward", -0.01)),
        goal_reward=float(params.get("goal_reward", 1.0)),
        gamma_rl=float(params.get("gamma_rl", 0.99)),
        t_max_episode=int(params.get("t_max_episode", 100)),
    )
    _, result, oracle = run_hsa2c(cfg, env)

    os.makedirs(args.out_dir, exist_ok=True)
    stem = f"gridworld_seed{cfg.seed}"
    series_path = os.path.join(args.out_dir, f"{stem}_series.csv")
    write_rows_csv(series_path, RL_SERIES_HEADER, oracle.history)
    summary = result_summary(cfg, result)
    summary["optimal_return"] = optimal_return(env)
    summary["final_mean_return"] = oracle.mean_return_last()
    summary["env_steps"] = oracle.env_steps
    summary["episodes"] = len(oracle.episode_returns)
    summary_path = os.path.join(args.out_dir, f"{stem}_summary.json")
    write_summary_json(summary_path, summary)
    print(
        f"rl complete: mean_return_last_100={summary['final_mean_return']:.6g} "
        f"optimal={summary['optimal_return']:.6g} "
        f"env_steps={oracle.env_steps}"
    )
    print(f"wrote {series_path}")
    print(f"wrote {summary_path}")
    return 0


def _cmd_validate(args) -> int:
    raw = _load_json(args.config)
    if "base" in raw:
        spec = ExperimentSpec.from_dict(raw)
        n_runs = len(spec.nW_list) * len(spec.p_list) * len(spec.B_list)
        print(f"ok: experiment {spec.name!r} with {n_runs} runs")
    else:
        cfg = RunConfig.from_dict(raw)
        print(
            f"ok: run config problem={cfg.problem.name!r} T={cfg.T} "
            f"shape=(nW={cfg.nW}, p={cfg.p}, B={cfg.B}, M={cfg.M})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsgd",
        description="Distributed and parallel asynchronous SGD harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", required=True, help="JSON config path")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
        p.add_argument("--out-dir", default="bench_out",
                       help="directory for CSV/JSON outputs")

    p_run = sub.add_parser("run", help="execute one engine run")
    add_common(p_run)
    p_run.add_argument("--transport", choices=("inproc", "tcp"), default=None,
                       help="inproc forces threaded execution; tcp uses "
                            "the wire protocol")
    p_run.add_argument("--listen", default=None, metavar="HOST:PORT",
                       help="tcp master role: serve on this address")
    p_run.add_argument("--master-addr", default=None, metavar="HOST:PORT",
                       help="tcp worker role: connect to this master")
    p_run.add_argument("--worker-id", type=int, default=None,
                       help="worker index for the tcp worker role")
    p_run.add_argument("--trace-overwrites", action="store_true",
                       help="record overwrite traces (threaded runs only)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    p_sweep.add_argument("--config", required=True, help="ExperimentSpec JSON")
    p_sweep.add_argument("--out-dir", default=None,
                         help="override the experiment's output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_svi = sub.add_parser("svi", help="topic-model run over a corpus")
    add_common(p_svi)
    p_svi.set_defaults(func=_cmd_svi)

    p_rl = sub.add_parser("rl", help="gridworld actor-critic run")
    add_common(p_rl)
    p_rl.set_defaults(func=_cmd_rl)

    p_val = sub.add_parser("validate-config",
                           help="parse and validate a config, run nothing")
    p_val.add_argument("--config", required=True, help="JSON config path")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help; keep its code
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DpsgdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
