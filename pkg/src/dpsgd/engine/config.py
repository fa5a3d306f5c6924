"""Run configuration: dataclasses, JSON round-trip, validation.

Field names here are the JSON schema; configs on disk mirror them exactly.
"""
from __future__ import annotations

import json
import warnings as _warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from ..errors import ConfigurationError
from . import rates

DELAY_KINDS = ("none", "fixed", "uniform", "seeded-jitter")
ENFORCE_POLICIES = ("off", "drop", "block")
EXECUTION_MODES = ("simulated", "threaded")
COST_MODES = ("sleep", "busy")


@dataclass
class DelayModel:
    """Injected transit delay for worker pushes, plus staleness policy.

    kind "none" delivers instantly; "fixed" adds a constant latency;
    "uniform" draws latency from [low, high); "seeded-jitter" additionally
    jitters each pass duration by a draw from [0, jitter). All draws come
    from a dedicated seeded stream, so delays replay with the run seed.

    d_prime_bound is the staleness bound D'. Policy "drop" discards an
    update whose staleness at receipt exceeds D' (counted); "block" makes
    the master wait for stragglers so no applied update ever exceeds D'
    (preserves every update, sacrifices liveness if a worker stalls);
    "off" applies everything and only counts violations.
    """

    kind: str = "none"
    latency: float = 0.0
    low: float = 0.0
    high: float = 0.0
    jitter: float = 0.0
    d_prime_bound: int | None = None
    enforce: str = "off"

    def validate(self) -> None:
        if self.kind not in DELAY_KINDS:
            raise ConfigurationError(
                f"delay kind {self.kind!r} not in {DELAY_KINDS}"
            )
        if self.enforce not in ENFORCE_POLICIES:
            raise ConfigurationError(
                f"enforce policy {self.enforce!r} not in {ENFORCE_POLICIES}"
            )
        if self.latency < 0 or self.low < 0 or self.jitter < 0:
            raise ConfigurationError("latencies must be non-negative")
        if self.kind == "uniform" and self.high < self.low:
            raise ConfigurationError("uniform delay needs high >= low")
        if self.enforce != "off" and self.d_prime_bound is None:
            raise ConfigurationError(
                f"enforce={self.enforce!r} requires d_prime_bound"
            )
        if self.d_prime_bound is not None and self.d_prime_bound < 0:
            raise ConfigurationError("d_prime_bound must be >= 0")


@dataclass
class TheoryParams:
    """Problem constants the caller supplies for the rate law.

    None are estimated from data; runs that use the constant-rate law must
    provide them explicitly.
    """

    f0_minus_fstar: float
    L: float
    V: float
    alpha: float = 1.0
    mu: float = 0.5
    D: int = 0
    D_prime: int = 0

    def noise_scale(self) -> float:
        return rates.noise_scale_constant(self.L, self.V, self.alpha, self.mu)

    def validate(self) -> None:
        if self.f0_minus_fstar <= 0:
            raise ConfigurationError("f0_minus_fstar must be positive")
        if self.L <= 0 or self.V <= 0 or self.alpha <= 0:
            raise ConfigurationError("L, V, alpha must be positive")
        if not 0 < self.mu < 1:
            raise ConfigurationError("mu must lie in (0, 1)")
        if self.D < 0 or self.D_prime < 0:
            raise ConfigurationError("D and D_prime must be >= 0")


@dataclass
class ProblemSpec:
    """Which built-in objective to optimise and how to synthesise its data."""

    name: str = "quadratic"
    n: int = 100
    dim: int = 10
    batch_size: int = 1
    data_seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.n < 1 or self.dim < 1:
            raise ConfigurationError("problem needs n >= 1 and dim >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")


@dataclass
class RunConfig:
    """Everything one engine run needs; JSON configs mirror these fields."""

    T: int = 100            # master iterations
    M: int = 1              # updates combined per master iteration
    nW: int = 1             # workers
    p: int = 1              # local threads per worker
    B: int = 1              # local steps per thread between push/pull
    eta: float = 0.05       # local step size
    rho_schedule: dict[str, Any] = field(
        default_factory=lambda: {"kind": "constant", "value": 0.1}
    )
    seed: int = 0
    delay: DelayModel = field(default_factory=DelayModel)
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    execution: str = "simulated"
    compute_cost_s: float = 0.0
    compute_cost_mode: str = "sleep"
    theory: TheoryParams | None = None
    grad_norm_every: int = 10
    trace_overwrites: bool = False

    @property
    def Btilde(self) -> int:
        return self.p * self.B

    def validate(self) -> None:
        for name in ("T", "M", "nW", "p", "B"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")
        if self.execution not in EXECUTION_MODES:
            raise ConfigurationError(
                f"execution {self.execution!r} not in {EXECUTION_MODES}"
            )
        if self.compute_cost_mode not in COST_MODES:
            raise ConfigurationError(
                f"compute_cost_mode {self.compute_cost_mode!r} not in {COST_MODES}"
            )
        if self.compute_cost_s < 0:
            raise ConfigurationError("compute_cost_s must be >= 0")
        if self.grad_norm_every < 0:
            raise ConfigurationError("grad_norm_every must be >= 0")
        self.delay.validate()
        if self.delay.enforce == "block":
            # A blocked worker holds exactly one unapplied push, so fewer
            # than M workers can never fill a batch, and more than
            # M * (D' + 1) can exceed the bound before the gate can act.
            bound = self.delay.d_prime_bound
            if self.nW < self.M:
                raise ConfigurationError(
                    "enforce='block' needs nW >= M to fill a batch"
                )
            if bound is not None and self.nW > self.M * (bound + 1):
                raise ConfigurationError(
                    "enforce='block' needs nW <= M * (d_prime_bound + 1)"
                )
        self.problem.validate()
        if self.theory is not None:
            self.theory.validate()
        self.resolve_rho()  # raises on malformed schedules

    def resolve_rho(self) -> Callable[[int], float]:
        """Turn the schedule spec into rho(t); validates as a side effect."""
        sched = self.rho_schedule
        kind = sched.get("kind")
        if kind == "constant":
            value = float(sched.get("value", 0.0))
            if value <= 0:
                raise ConfigurationError("constant rho needs value > 0")
            return lambda t: value
        if kind == "power":
            tau0 = float(sched.get("tau0", 1.0))
            kappa = float(sched.get("kappa", 0.5))
            if tau0 <= 0 or not 0.5 <= kappa <= 1.0:
                raise ConfigurationError(
                    "power schedule needs tau0 > 0 and kappa in [0.5, 1]"
                )
            return lambda t: (tau0 + t) ** (-kappa)
        if kind == "theory-constant":
            if self.theory is None:
                raise ConfigurationError(
                    "theory-constant schedule requires theory params"
                )
            value = rates.theory_constant_rate(
                self.theory.f0_minus_fstar,
                self.theory.noise_scale(),
                self.theory.alpha,
                self.T,
                self.M,
                self.Btilde,
            )
            return lambda t: value
        raise ConfigurationError(f"unknown rho schedule kind {kind!r}")

    def theory_warnings(self) -> list[str]:
        """Advisory feasibility check; empty when theory params are absent."""
        if self.theory is None:
            return []
        rho0 = self.resolve_rho()(0)
        msgs = rates.feasibility_warnings(
            eta=self.eta,
            rho=rho0,
            L=self.theory.L,
            mu=self.theory.mu,
            D=self.theory.D,
            D_prime=self.theory.D_prime,
            M=self.M,
            Btilde=self.Btilde,
        )
        for m in msgs:
            _warnings.warn(m, stacklevel=2)
        return msgs

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if self.theory is None:
            out.pop("theory")
        return out

    @staticmethod
    def from_dict(raw: dict[str, Any]) -> "RunConfig":
        data = dict(raw)
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        if "delay" in data and isinstance(data["delay"], dict):
            data["delay"] = _build(DelayModel, data["delay"], "delay")
        if "problem" in data and isinstance(data["problem"], dict):
            data["problem"] = _build(ProblemSpec, data["problem"], "problem")
        if "theory" in data and isinstance(data["theory"], dict):
            data["theory"] = _build(TheoryParams, data["theory"], "theory")
        cfg = RunConfig(**data)
        cfg.validate()
        return cfg

    @staticmethod
    def from_json_file(path) -> "RunConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config {path} must hold a JSON object")
        return RunConfig.from_dict(raw)


def _build(cls, data: dict[str, Any], label: str):
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {label} fields: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"bad {label} section: {exc}")
