import json

import pytest

from dpsgd.engine import DelayModel, ProblemSpec, RunConfig, TheoryParams
from dpsgd.engine.rates import theory_constant_rate
from dpsgd.errors import ConfigurationError


def full_config():
    return RunConfig(
        T=64,
        M=2,
        nW=4,
        p=2,
        B=3,
        eta=0.02,
        rho_schedule={"kind": "power", "tau0": 2.0, "kappa": 0.75},
        seed=7,
        delay=DelayModel(kind="uniform", low=0.0, high=2e-3,
                         d_prime_bound=5, enforce="drop"),
        problem=ProblemSpec(name="sigmoid", n=40, dim=6, data_seed=3),
        execution="simulated",
        compute_cost_s=1e-3,
        theory=TheoryParams(f0_minus_fstar=1.0, L=1.0, V=0.5),
        grad_norm_every=4,
    )


def test_round_trip_through_dict_and_json(tmp_path):
    cfg = full_config()
    cfg.validate()
    back = RunConfig.from_dict(cfg.to_dict())
    assert back == cfg
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.from_json_file(path) == cfg


def test_theory_section_is_optional_in_dict():
    cfg = RunConfig()
    d = cfg.to_dict()
    assert "theory" not in d
    assert RunConfig.from_dict(d) == cfg


def test_unknown_fields_rejected():
    with pytest.raises(ConfigurationError, match="unknown config fields"):
        RunConfig.from_dict({"T": 10, "workers": 3})
    with pytest.raises(ConfigurationError, match="unknown delay fields"):
        RunConfig.from_dict({"delay": {"kind": "none", "lag": 1}})
    with pytest.raises(ConfigurationError, match="unknown problem fields"):
        RunConfig.from_dict({"problem": {"name": "quadratic", "rows": 5}})


def test_malformed_json_file_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        RunConfig.from_json_file(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigurationError, match="JSON object"):
        RunConfig.from_json_file(arr)


@pytest.mark.parametrize("field", ["T", "M", "nW", "p", "B"])
def test_counts_must_be_positive(field):
    cfg = RunConfig(**{field: 0})
    with pytest.raises(ConfigurationError, match=f"{field} must be >= 1"):
        cfg.validate()


def test_scalar_field_validation():
    with pytest.raises(ConfigurationError, match="eta"):
        RunConfig(eta=0.0).validate()
    with pytest.raises(ConfigurationError, match="execution"):
        RunConfig(execution="mpi").validate()
    with pytest.raises(ConfigurationError, match="compute_cost_mode"):
        RunConfig(compute_cost_mode="spin").validate()
    with pytest.raises(ConfigurationError, match="compute_cost_s"):
        RunConfig(compute_cost_s=-1.0).validate()
    with pytest.raises(ConfigurationError, match="grad_norm_every"):
        RunConfig(grad_norm_every=-1).validate()


def test_delay_model_validation():
    with pytest.raises(ConfigurationError, match="delay kind"):
        DelayModel(kind="gamma").validate()
    with pytest.raises(ConfigurationError, match="enforce policy"):
        DelayModel(enforce="retry").validate()
    with pytest.raises(ConfigurationError, match="non-negative"):
        DelayModel(kind="fixed", latency=-1.0).validate()
    with pytest.raises(ConfigurationError, match="high >= low"):
        DelayModel(kind="uniform", low=2.0, high=1.0).validate()
    with pytest.raises(ConfigurationError, match="requires d_prime_bound"):
        DelayModel(enforce="drop").validate()
    with pytest.raises(ConfigurationError, match="d_prime_bound"):
        DelayModel(d_prime_bound=-1).validate()


def test_block_policy_shape_constraints():
    blocked = DelayModel(kind="uniform", high=1e-3,
                         d_prime_bound=1, enforce="block")
    with pytest.raises(ConfigurationError, match="nW >= M"):
        RunConfig(M=3, nW=2, delay=blocked).validate()
    # with D' = 1 each batch drains M of at most 2M outstanding bases
    with pytest.raises(ConfigurationError, match=r"M \* \(d_prime_bound"):
        RunConfig(M=2, nW=5, delay=blocked).validate()
    RunConfig(M=2, nW=4, delay=blocked, compute_cost_s=1e-3).validate()


def test_theory_params_validation():
    with pytest.raises(ConfigurationError, match="f0_minus_fstar"):
        TheoryParams(f0_minus_fstar=0.0, L=1.0, V=1.0).validate()
    with pytest.raises(ConfigurationError, match="positive"):
        TheoryParams(f0_minus_fstar=1.0, L=-1.0, V=1.0).validate()
    with pytest.raises(ConfigurationError, match="mu"):
        TheoryParams(f0_minus_fstar=1.0, L=1.0, V=1.0, mu=1.0).validate()
    with pytest.raises(ConfigurationError, match="D and D_prime"):
        TheoryParams(f0_minus_fstar=1.0, L=1.0, V=1.0, D=-1).validate()


def test_rho_schedule_kinds():
    cfg = RunConfig(rho_schedule={"kind": "constant", "value": 0.25})
    assert cfg.resolve_rho()(17) == 0.25
    cfg = RunConfig(rho_schedule={"kind": "power", "tau0": 1.0, "kappa": 0.5})
    assert cfg.resolve_rho()(3) == 4.0 ** -0.5
    theory = TheoryParams(f0_minus_fstar=2.0, L=1.0, V=0.5, alpha=1.0, mu=0.5)
    cfg = RunConfig(
        T=100, M=2, p=2, B=4, theory=theory,
        rho_schedule={"kind": "theory-constant"},
    )
    want = theory_constant_rate(2.0, theory.noise_scale(), 1.0, 100, 2, 8)
    assert cfg.resolve_rho()(0) == want


def test_rho_schedule_validation():
    with pytest.raises(ConfigurationError, match="value > 0"):
        RunConfig(rho_schedule={"kind": "constant", "value": 0.0}).validate()
    with pytest.raises(ConfigurationError, match="kappa"):
        RunConfig(rho_schedule={"kind": "power", "kappa": 0.3}).validate()
    with pytest.raises(ConfigurationError, match="unknown rho schedule"):
        RunConfig(rho_schedule={"kind": "cosine"}).validate()
    with pytest.raises(ConfigurationError, match="requires theory"):
        RunConfig(rho_schedule={"kind": "theory-constant"}).validate()


def test_btilde_is_local_steps_times_threads():
    assert RunConfig(p=3, B=7).Btilde == 21


def test_theory_warnings_only_with_params():
    assert RunConfig().theory_warnings() == []
    cfg = RunConfig(
        eta=10.0,
        theory=TheoryParams(f0_minus_fstar=1.0, L=5.0, V=1.0, mu=0.5),
    )
    with pytest.warns(UserWarning):
        msgs = cfg.theory_warnings()
    assert msgs
