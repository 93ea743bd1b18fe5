import pytest
import torch
from torch import nn

from core.exceptions import StructuralError
from models.echogram import Orientation
from models.network import ModelConfig, ModelVariant, PlaneGroup
from nnet.blocks import MBConv, SqueezeExcite
from nnet.unet import EchogramUNet, param_count, select_group, split_planes
from services.loss import composite_loss
from tests.helpers import random_loss_batch


def test_default_bifacing_model_size():
    config = ModelConfig.for_variant(ModelVariant.BIFACING)
    assert config.out_channels == 30
    assert 1_450_000 <= param_count(config) <= 1_800_000


def test_upfacing_variant_has_one_plane_group():
    config = ModelConfig.for_variant(ModelVariant.UPFACING, width=4, depth=2, input_width=16, input_height=32)
    assert config.groups == 1
    assert config.out_channels == 10


def test_bottleneck_resolution_of_default_input():
    model = EchogramUNet(ModelConfig(width=4))
    assert model.bottleneck_shape(128, 512) == (16, 8)


def test_config_rejects_indivisible_input():
    with pytest.raises(ValueError):
        ModelConfig(depth=2, input_width=16, input_height=30)
    with pytest.raises(ValueError):
        ModelConfig(kernel_size=4)


def test_forward_keeps_spatial_shape(tiny_model_config):
    model = EchogramUNet(tiny_model_config).eval()
    logits = model(torch.randn(3, 1, 16, 32))
    assert logits.shape == (3, 30, 16, 32)


def test_forward_rejects_bad_input(tiny_model_config):
    model = EchogramUNet(tiny_model_config)
    with pytest.raises(StructuralError):
        model(torch.randn(1, 2, 16, 32))
    with pytest.raises(StructuralError):
        model(torch.randn(1, 1, 15, 32))


def test_mbconv_projects_channels():
    block = MBConv(4, 6, expansion=2, kernel_size=3)
    assert block(torch.randn(2, 4, 5, 5)).shape == (2, 6, 5, 5)
    with pytest.raises(StructuralError):
        block(torch.randn(2, 3, 5, 5))


def test_squeeze_excite_gates_are_probabilities():
    gates = SqueezeExcite(6).gates(torch.randn(2, 6, 4, 4))
    assert gates.shape == (2, 6, 1, 1)
    assert ((gates > 0) & (gates < 1)).all()


def test_split_and_select_plane_groups(tiny_model_config):
    logits = torch.arange(2 * 30, dtype=torch.float32).view(2, 30, 1, 1)
    groups = split_planes(logits, tiny_model_config)
    assert set(groups) == set(PlaneGroup)
    assert groups[PlaneGroup.UPFACING][0, 0, 0, 0] == 20

    chosen = select_group(logits, tiny_model_config, [Orientation.DOWNFACING, Orientation.UPFACING])
    torch.testing.assert_close(chosen[0], groups[PlaneGroup.DOWNFACING][0])
    torch.testing.assert_close(chosen[1], groups[PlaneGroup.UPFACING][1])

    unconditioned = select_group(logits, tiny_model_config, Orientation.UPFACING, conditioned=False)
    torch.testing.assert_close(unconditioned, groups[PlaneGroup.UNCONDITIONAL])


def test_split_planes_checks_channel_count(tiny_model_config):
    with pytest.raises(StructuralError):
        split_planes(torch.zeros(1, 10, 1, 1), tiny_model_config)


def test_squeeze_excite_with_zero_weights_halves_input():
    se = SqueezeExcite(6)
    for conv in (se.reduce, se.expand):
        nn.init.zeros_(conv.weight)
        nn.init.zeros_(conv.bias)
    x = torch.randn(2, 6, 4, 4)
    torch.testing.assert_close(se(x), 0.5 * x)


def test_toy_parameter_count(tiny_model_config):
    # stem 108, encoder 154 + 380, bottleneck 380, decoder 2 x 984, head 150
    assert param_count(tiny_model_config) == 3140


def test_parameter_gradients_match_central_differences():
    config = ModelConfig(width=4, depth=2, expansion=2, input_width=8, input_height=32)
    torch.manual_seed(0)
    model = EchogramUNet(config).double().eval()
    x = torch.randn(2, 1, 8, 32, dtype=torch.float64)
    batch = random_loss_batch(2, 8, 32)

    def loss() -> torch.Tensor:
        return composite_loss(model(x), batch, config).total

    model.zero_grad()
    loss().backward()

    eps = 1e-6
    mismatches = []
    with torch.no_grad():
        for name, param in model.named_parameters():
            assert param.grad is not None, name
            values, grads = param.view(-1), param.grad.view(-1)
            for i in range(values.numel()):
                original = values[i].item()
                values[i] = original + eps
                up = loss().item()
                values[i] = original - eps
                down = loss().item()
                values[i] = original
                numeric, analytic = (up - down) / (2 * eps), grads[i].item()
                if abs(numeric - analytic) > max(1e-3 * max(abs(numeric), abs(analytic)), 1e-6):
                    mismatches.append((name, i, numeric, analytic))
    assert mismatches == []
