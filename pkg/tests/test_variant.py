import pytest

from sgail import Algorithm, BetaMode, BetaSchedule, ConfigError, ModelVariant, beta_at


@pytest.mark.parametrize("name", ["sgail", "sgail+erc", "infogail", "infogail+airl", "infogail+airl+erc", "airl",
                                  "airl+erc"])
def test_names_round_trip(name):
    assert ModelVariant.from_name(name).name == name


def test_unknown_algorithm_is_a_config_error():
    with pytest.raises(ConfigError):
        ModelVariant.from_name("gail+erc")
    with pytest.raises(ConfigError):
        ModelVariant(Algorithm.InfoGAIL, info_lambda2=-1.0)


def test_which_networks_read_the_task_code():
    sgail = ModelVariant(Algorithm.SGAIL)
    assert sgail.policy_conditioned and sgail.discriminator_conditioned and sgail.value_conditioned
    info = ModelVariant(Algorithm.InfoGAIL)
    assert info.policy_conditioned and not info.discriminator_conditioned and not info.value_conditioned
    assert info.uses_posterior and not info.airl_head
    hybrid = ModelVariant(Algorithm.InfoGAILplusAIRL)
    assert hybrid.uses_posterior and hybrid.airl_head
    single = ModelVariant(Algorithm.AIRLSingleTask)
    assert single.per_task_learners and not single.policy_conditioned and not single.uses_posterior


def test_constant_schedule():
    schedule = BetaSchedule.constant(0.6)
    assert [beta_at(schedule, e) for e in (0, 10, 10_000)] == [0.6, 0.6, 0.6]
    assert schedule.label == "beta0.6"


def test_linear_schedule_ramps_and_holds():
    schedule = BetaSchedule.linear(0.9, 0.6, 100)
    assert beta_at(schedule, 0) == 0.9
    assert beta_at(schedule, 50) == pytest.approx(0.75)
    assert beta_at(schedule, 100) == pytest.approx(0.6)
    assert beta_at(schedule, 1000) == pytest.approx(0.6)
    assert schedule.mode == BetaMode.Linear
    assert schedule.label == "beta0.9-0.6"


def test_linear_schedule_is_monotone():
    schedule = BetaSchedule.linear(0.9, 0.0, 7)
    values = [beta_at(schedule, e) for e in range(10)]
    assert all(a >= b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("kwargs", [dict(start=1.2), dict(start=0.5, end=-0.1, mode="linear"),
                                    dict(start=0.9, end=0.6), dict(start=0.9, end=0.6, mode="linear", span=0)])
def test_invalid_schedules(kwargs):
    with pytest.raises(ConfigError):
        BetaSchedule(**kwargs)


def test_negative_epoch():
    with pytest.raises(ValueError):
        beta_at(BetaSchedule(), -1)
