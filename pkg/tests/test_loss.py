import math

import pytest
import torch
import torch.nn.functional as F

from core.exceptions import DomainError
from models.network import ModelConfig, Plane, PlaneGroup
from services.loss import (
    LINE_TARGETS,
    PERIOD_TARGETS,
    PIXEL_TARGETS,
    composite_loss,
    log_avg_exp,
    term_name,
)

N, W, H = 2, 4, 8


def _batch(upfacing=(False, True)) -> dict[str, torch.Tensor]:
    lines = torch.tensor([[1, 2, 3, 4], [0, 7, 7, 5]])
    flags = torch.tensor([[True, False, False, True], [False, False, True, False]])
    patches = torch.zeros(N, W, H, dtype=torch.bool)
    patches[0, 1, 3:5] = True
    return {
        "air": lines,
        "air_original": lines,
        "seafloor": lines.flip(1),
        "seafloor_original": lines.flip(1),
        "surface": lines,
        "surface_valid": torch.ones(N, W, dtype=torch.bool),
        "passive": flags,
        "bad_period": ~flags,
        "patches": patches,
        "patches_original": patches,
        "patches_mixed": patches,
        "upfacing": torch.tensor(upfacing),
    }


def _config(conditional: bool) -> ModelConfig:
    return ModelConfig(width=4, depth=1, conditional=conditional, input_width=W, input_height=H)


def test_log_avg_exp():
    assert float(log_avg_exp([0.0, 0.0])) == pytest.approx(0.0)
    assert float(log_avg_exp([0.0, math.log(3.0)])) == pytest.approx(math.log(2.0))
    assert float(log_avg_exp([1000.0, 1000.0])) == pytest.approx(1000.0)


def test_log_avg_exp_of_nothing():
    with pytest.raises(DomainError):
        log_avg_exp(torch.zeros(2, 0))


@pytest.mark.parametrize("conditional", [False, True])
def test_zero_logits_give_uniform_losses(conditional):
    config = _config(conditional)
    loss = composite_loss(torch.zeros(N, config.out_channels, W, H), _batch(), config)

    for plane in (Plane.AIR, Plane.SEAFLOOR, Plane.SURFACE):
        assert float(loss.terms[term_name(plane)]) == pytest.approx(math.log(H))
    for plane in (Plane.PASSIVE, Plane.PATCH_MIXED):
        assert float(loss.terms[term_name(plane)]) == pytest.approx(math.log(2.0))
    assert float(loss.total) == pytest.approx(20 * math.log(2.0))


def test_total_is_sum_of_terms():
    config = _config(True)
    torch.manual_seed(1)
    loss = composite_loss(torch.randn(N, config.out_channels, W, H), _batch(), config)
    assert float(loss.total) == pytest.approx(sum(float(t) for t in loss.terms.values()), rel=1e-6)
    assert set(loss.group_terms) == {"unconditional", "downfacing", "upfacing"}
    assert set(loss.as_floats()) == {term_name(p) for p in Plane} | {"total"}


def test_orientation_groups_only_see_their_samples():
    config = _config(True)
    torch.manual_seed(2)
    logits = torch.randn(N, config.out_channels, W, H)
    batch = _batch(upfacing=(False, False))
    before = composite_loss(logits, batch, config)

    logits[:, 20:] = 100 * torch.randn(N, 10, W, H)
    after = composite_loss(logits, batch, config)

    assert float(after.total) == pytest.approx(float(before.total))
    assert all(float(t) == 0 for t in after.group_terms["upfacing"].values())


def test_masked_surface_pings_do_not_count():
    config = _config(False)
    batch = _batch()
    batch["surface_valid"] = torch.zeros(N, W, dtype=torch.bool)
    loss = composite_loss(torch.randn(N, config.out_channels, W, H), batch, config)
    assert float(loss.terms["surface"]) == 0.0


def test_loss_is_differentiable():
    config = _config(True)
    logits = torch.randn(N, config.out_channels, W, H, requires_grad=True)
    composite_loss(logits, _batch(), config).total.backward()
    assert logits.grad is not None and torch.isfinite(logits.grad).all()


def _perfect_logits(batch: dict[str, torch.Tensor], config: ModelConfig, margin: float = 50.0) -> torch.Tensor:
    planes = torch.zeros(N, config.n_planes, W, H)
    for plane, key in LINE_TARGETS.items():
        planes[:, plane] = margin * F.one_hot(batch[key].long(), H).float()
    for plane, key in PERIOD_TARGETS.items():
        planes[:, plane] = torch.where(batch[key], margin, -margin)[:, :, None].expand(N, W, H)
    for plane, key in PIXEL_TARGETS.items():
        planes[:, plane] = torch.where(batch[key], margin, -margin)
    return planes.repeat(1, config.groups, 1, 1)


@pytest.mark.parametrize("conditional", [False, True])
def test_perfect_prediction_has_no_loss(conditional):
    config = _config(conditional)
    batch = _batch()
    assert float(composite_loss(_perfect_logits(batch, config), batch, config).total) < 1e-5


def test_no_gradient_reaches_the_other_orientation():
    config = _config(True)
    logits = torch.randn(N, config.out_channels, W, H, requires_grad=True)
    composite_loss(logits, _batch(upfacing=(False, False)), config).total.backward()
    upfacing = slice(PlaneGroup.UPFACING * config.n_planes, (PlaneGroup.UPFACING + 1) * config.n_planes)
    assert (logits.grad[:, upfacing] == 0).all()
    assert logits.grad[:, : 2 * config.n_planes].abs().sum() > 0
