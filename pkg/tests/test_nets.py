"""Tests for the network definitions."""

import pytest
import torch
import torch.nn.functional as F

from realsr.core.models import Preset
from realsr.core.nets import (
    DomainGenerator,
    FeatureExtractor,
    PatchDiscriminator,
    SRCritic,
    SRGenerator,
    color_adjust,
    domain_generator,
    feature_extractor,
    import_esrgan_state,
    lr_generator,
    parameter_checksum,
    sr_generator,
)
from realsr.utils.exceptions import NonFiniteError, ShapeMismatchError, ValidationError


@pytest.fixture(autouse=True)
def seeded():
    torch.manual_seed(0)


def worst_gradient_error(net, x, names, eps=1e-6):
    """Largest relative error between autograd and central differences.

    The loss is a fixed random weighting of the output; each named parameter
    is probed at its largest-gradient entry. Everything runs in float64.
    """
    net.double()
    x = x.double()
    weights = torch.randn_like(net(x))

    def loss():
        with torch.no_grad():
            return float((net(x) * weights).sum())

    net.zero_grad()
    (net(x) * weights).sum().backward()
    params = dict(net.named_parameters())
    worst = 0.0
    for name in names:
        param = params[name]
        index = int(param.grad.abs().argmax())
        analytic = float(param.grad.flatten()[index])
        assert analytic != 0.0, f"{name} gets no gradient"
        flat = param.data.view(-1)
        original = float(flat[index])
        flat[index] = original + eps
        plus = loss()
        flat[index] = original - eps
        minus = loss()
        flat[index] = original
        numeric = (plus - minus) / (2 * eps)
        worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic)))
    return worst


class TestDomainGenerator:
    def test_fresh_generator_is_identity(self):
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            assert torch.equal(domain_generator(Preset.DESK)(x), x)

    def test_shape(self):
        net = domain_generator(Preset.DESK)
        torch.nn.init.normal_(net.head[1].weight, std=0.01)
        with torch.no_grad():
            assert net(torch.rand(1, 3, 32, 32)).shape == (1, 3, 32, 32)
            assert net(torch.rand(2, 3, 24, 40)).shape == (2, 3, 24, 40)

    def test_lr_generator_reduces_by_four(self):
        with torch.no_grad():
            assert lr_generator(Preset.DESK)(torch.rand(1, 3, 64, 64)).shape == (1, 3, 16, 16)

    def test_nan_parameter_is_named(self):
        net = DomainGenerator(n_blocks=1, base=8)
        with torch.no_grad():
            net.stem[1].weight[0, 0, 0, 0] = float("nan")
        with pytest.raises(NonFiniteError, match="stem.1.weight"):
            net(torch.rand(1, 3, 16, 16))

    def test_nan_input(self):
        x = torch.rand(1, 3, 16, 16)
        x[0, 0, 0, 0] = float("nan")
        with pytest.raises(NonFiniteError, match="input"):
            domain_generator(Preset.DESK)(x)

    def test_rejects_wrong_channels(self):
        with pytest.raises(ValidationError):
            domain_generator(Preset.DESK)(torch.rand(1, 1, 16, 16))

    def test_gradients_match_finite_differences(self):
        net = domain_generator(Preset.DESK)
        torch.nn.init.normal_(net.head[1].weight, std=0.05)
        names = ["stem.1.weight", "downs.0.0.weight", "blocks.1.block.1.weight", "ups.1.conv.weight",
                 "head.1.weight", "head.1.bias"]
        assert worst_gradient_error(net, torch.rand(1, 3, 16, 16), names) < 1e-3


class TestPatchDiscriminator:
    def test_score_map_is_patch_level(self):
        with torch.no_grad():
            scores = PatchDiscriminator(base=16)(torch.rand(1, 3, 70, 70))
        assert scores.shape[1] == 1
        assert scores.shape[-1] > 1 and scores.shape[-2] > 1

    def test_identical_inputs(self):
        net = PatchDiscriminator(base=16)
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            assert torch.equal(net(x), net(x.clone()))

    def test_rejects_small_input(self):
        with pytest.raises(ValidationError, match="16x16"):
            PatchDiscriminator(base=16)(torch.rand(1, 3, 8, 8))

    def test_shift_by_one_stride_moves_interior_scores(self):
        net = PatchDiscriminator(base=32)
        x = torch.rand(1, 3, 64, 64)
        with torch.no_grad():
            scores = net(x)
            shifted = net(torch.roll(x, shifts=8, dims=-1))
        assert scores.shape[-1] == 7
        # columns 2 and 3 see no padding and no wrapped pixels in either map
        assert torch.allclose(shifted[..., 3:5], scores[..., 2:4], atol=1e-6)
        assert not torch.allclose(shifted[..., 2:4], scores[..., 2:4], atol=1e-6)


class TestColorAdjust:
    def test_block_means_match_lr(self):
        for _ in range(100):
            lr = torch.rand(2, 3, 4, 5, dtype=torch.float64)
            sr = torch.rand(2, 3, 16, 20, dtype=torch.float64)
            out = color_adjust(sr, lr)
            assert torch.allclose(F.avg_pool2d(out, 4), lr, atol=1e-6)
            assert torch.allclose(color_adjust(out, lr), out, atol=1e-6)

    def test_fixed_point(self):
        lr = torch.rand(1, 3, 4, 4, dtype=torch.float64)
        sr = lr.repeat_interleave(4, dim=-2).repeat_interleave(4, dim=-1)
        assert torch.allclose(color_adjust(sr, lr), sr, atol=1e-12)

    def test_constant_shift(self):
        out = color_adjust(torch.full((1, 3, 8, 8), 0.8), torch.full((1, 3, 2, 2), 0.3))
        assert torch.allclose(out, torch.full_like(out, 0.3), atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            color_adjust(torch.rand(1, 3, 16, 16), torch.rand(1, 3, 5, 4))


class TestSRGenerator:
    def test_quadruples_resolution(self):
        with torch.no_grad():
            assert sr_generator(Preset.DESK)(torch.rand(1, 3, 16, 16)).shape == (1, 3, 64, 64)

    def test_constant_input_gives_constant_output(self):
        x = torch.full((1, 3, 16, 16), 0.42)
        with torch.no_grad():
            out = sr_generator(Preset.DESK)(x)
        assert torch.allclose(out, torch.full_like(out, 0.42), atol=1e-6)

    def test_output_block_means_follow_input(self):
        net = sr_generator(Preset.DESK)
        torch.nn.init.normal_(net.conv_last.weight, std=0.05)
        x = torch.rand(1, 3, 8, 8)
        with torch.no_grad():
            out = net(x)
        assert torch.allclose(F.avg_pool2d(out, 4), x, atol=1e-5)

    def test_gradients_reach_the_trunk(self):
        net = sr_generator(Preset.DESK)
        torch.nn.init.normal_(net.conv_last.weight, std=0.05)
        (net(torch.rand(1, 3, 8, 8)) ** 2).mean().backward()
        assert net.conv_first.weight.grad.abs().sum() > 0

    def test_gradients_match_finite_differences(self):
        net = sr_generator(Preset.DESK)
        torch.nn.init.normal_(net.conv_last.weight, std=0.05)
        names = ["conv_first.weight", "RRDB_trunk.0.RDB1.conv1.weight", "RRDB_trunk.1.RDB3.conv5.weight",
                 "trunk_conv.weight", "upconv1.weight", "HRconv.weight", "conv_last.weight"]
        assert worst_gradient_error(net, torch.rand(1, 3, 8, 8), names) < 1e-3


class TestCritic:
    def test_one_score_per_image(self):
        with torch.no_grad():
            assert SRCritic(nf=8)(torch.rand(3, 3, 64, 64)).shape == (3,)

    def test_rejects_small_input(self):
        with pytest.raises(ValidationError):
            SRCritic(nf=8)(torch.rand(1, 3, 16, 16))


class TestFeatureExtractor:
    def test_identical_inputs(self):
        phi = feature_extractor(Preset.DESK)
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            assert torch.equal(phi(x), phi(x.clone()))

    def test_is_frozen_and_stays_in_eval_mode(self):
        phi = feature_extractor(Preset.DESK)
        phi.train()
        assert not phi.training
        assert not any(p.requires_grad for p in phi.parameters())

    def test_seeded_initialization(self):
        assert parameter_checksum(FeatureExtractor(8, seed=1)) == parameter_checksum(FeatureExtractor(8, seed=1))
        assert parameter_checksum(FeatureExtractor(8, seed=1)) != parameter_checksum(FeatureExtractor(8, seed=2))

    def test_feature_resolution(self):
        with torch.no_grad():
            assert feature_extractor(Preset.DESK)(torch.rand(1, 3, 64, 64)).shape[-2:] == (4, 4)

    def test_rejects_undersized_input(self):
        with pytest.raises(ValidationError):
            feature_extractor(Preset.DESK)(torch.rand(1, 3, 8, 8))

    def test_small_input_change_gives_proportional_feature_change(self):
        phi = feature_extractor(Preset.DESK).double()
        img = torch.rand(1, 3, 64, 64, dtype=torch.float64)
        with torch.no_grad():
            base = phi(img)
            small = (phi(img + 1e-4) - base).norm().item()
            large = (phi(img + 1e-3) - base).norm().item()
        assert large > 0.0
        assert large / small == pytest.approx(10.0, rel=0.2)


class TestEsrganImport:
    def test_body_layout_maps_onto_native_names(self):
        net = SRGenerator(nb=2, nf=8, gc=4)
        renames = {"trunk_conv": "conv_body", "upconv1": "conv_up1", "upconv2": "conv_up2", "HRconv": "conv_hr"}
        published = {}
        for key, value in net.state_dict().items():
            parts = key.split(".")
            if parts[0] == "RRDB_trunk":
                key = f"body.{parts[1]}.{parts[2].lower()}.{'.'.join(parts[3:])}"
            elif parts[0] in renames:
                key = f"{renames[parts[0]]}.{parts[1]}"
            published[key] = value
        mapped = import_esrgan_state({"params_ema": published})
        native = net.state_dict()
        assert set(mapped) == set(native)
        assert all(torch.equal(mapped[k], native[k]) for k in native)

    def test_sequential_layout_maps_onto_native_names(self):
        net = SRGenerator(nb=2, nf=8, gc=4)
        top = {"conv_first": "model.0", "upconv1": "model.3", "upconv2": "model.6", "HRconv": "model.8",
               "conv_last": "model.10", "trunk_conv": "model.1.sub.2"}
        published = {}
        for key, value in net.state_dict().items():
            parts = key.split(".")
            if parts[0] == "RRDB_trunk":
                key = f"model.1.sub.{parts[1]}.{parts[2]}.{parts[3]}.0.{parts[4]}"
            else:
                key = f"{top[parts[0]]}.{parts[1]}"
            published[key] = value
        mapped = import_esrgan_state(published)
        native = net.state_dict()
        assert set(mapped) == set(native)
        assert all(torch.equal(mapped[k], native[k]) for k in native)

    def test_native_layout_is_unchanged(self):
        state = SRGenerator(nb=1, nf=8, gc=4).state_dict()
        assert set(import_esrgan_state(state)) == set(state)
