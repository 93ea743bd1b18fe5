import pytest
import torch

from core.exceptions import DomainError
from models.training import TrainConfig
from services.schedule import anneal_cos, apply_schedule, schedule_at


def test_anneal_cos_endpoints():
    assert anneal_cos(1.0, 3.0, 0.0) == pytest.approx(1.0)
    assert anneal_cos(1.0, 3.0, 0.5) == pytest.approx(2.0)
    assert anneal_cos(1.0, 3.0, 1.0) == pytest.approx(3.0)


def test_schedule_starts_from_rest():
    lr, beta1 = schedule_at(0, 1000)
    assert lr == 0.0
    assert beta1 == pytest.approx(0.98)


def test_schedule_reaches_peak_after_warmup():
    assert schedule_at(100, 1000) == pytest.approx((0.012, 0.92))
    assert schedule_at(499, 1000) == pytest.approx((0.012, 0.92))


def test_schedule_anneals_to_zero():
    lrs = [schedule_at(step, 1000)[0] for step in range(500, 1000)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))
    assert lrs[-1] < 1e-6
    assert schedule_at(999, 1000)[1] == pytest.approx(0.98, abs=1e-4)


def test_warmup_is_monotone():
    lrs = [schedule_at(step, 1000)[0] for step in range(100)]
    assert all(a < b for a, b in zip(lrs, lrs[1:]))


def test_later_cycles_halve_the_peak():
    assert schedule_at(500, 2000, cycle=1)[0] == pytest.approx(0.006)
    assert TrainConfig().cycle_epochs(2) == 400


@pytest.mark.parametrize("step", [-1, 1000])
def test_step_outside_cycle(step):
    with pytest.raises(DomainError):
        schedule_at(step, 1000)


def test_config_fractions_must_cover_the_cycle():
    with pytest.raises(ValueError):
        TrainConfig(warmup=0.2, hold=0.4, warmdown=0.5)


def test_apply_schedule_updates_parameter_groups():
    optimizer = torch.optim.Adam([torch.zeros(2, requires_grad=True)], betas=(0.9, 0.99))
    apply_schedule(optimizer, 0.005, 0.95)
    group = optimizer.param_groups[0]
    assert group["lr"] == 0.005
    assert group["betas"] == (0.95, 0.99)


def test_schedule_has_no_jumps_within_a_cycle():
    config = TrainConfig()
    steps = 1000
    values = [schedule_at(step, steps, config=config) for step in range(steps)]
    lr_jumps = [abs(b[0] - a[0]) for a, b in zip(values, values[1:])]
    beta_jumps = [abs(b[1] - a[1]) for a, b in zip(values, values[1:])]
    # steepest point is the middle of the warmup ramp
    assert max(lr_jumps) < 2 * config.max_lr / (config.warmup * steps)
    assert max(beta_jumps) < 2 * (config.beta1_max - config.beta1_min) / (config.warmup * steps)


def test_schedule_is_continuous_across_cycles():
    first = schedule_at(999, 1000, cycle=0)
    second = schedule_at(0, 2000, cycle=1)
    assert first[0] == pytest.approx(second[0], abs=1e-6)
    assert first[1] == pytest.approx(second[1], abs=1e-4)
    assert second == (0.0, pytest.approx(0.98))
