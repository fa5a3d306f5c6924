from .api import build_oracle, initial_model, run, run_with_oracle
from .config import DelayModel, ProblemSpec, RunConfig, TheoryParams
from .rates import (
    feasibility_warnings,
    noise_scale_constant,
    rescale_rate,
    theory_constant_rate,
)
from .result import MetricsSeries, RunCounters, RunResult, TraceBundle
from .rng import ROLE_DELAY, ROLE_ENV, ROLE_INIT, ROLE_SAMPLE, draw_indices, substream
from .tcp import TcpMasterServer, run_tcp, run_tcp_master, run_tcp_worker

__all__ = [
    "DelayModel",
    "MetricsSeries",
    "ProblemSpec",
    "ROLE_DELAY",
    "ROLE_ENV",
    "ROLE_INIT",
    "ROLE_SAMPLE",
    "RunConfig",
    "RunCounters",
    "RunResult",
    "TcpMasterServer",
    "TheoryParams",
    "TraceBundle",
    "build_oracle",
    "draw_indices",
    "feasibility_warnings",
    "initial_model",
    "noise_scale_constant",
    "rescale_rate",
    "run",
    "run_tcp",
    "run_tcp_master",
    "run_tcp_worker",
    "run_with_oracle",
    "substream",
    "theory_constant_rate",
]
