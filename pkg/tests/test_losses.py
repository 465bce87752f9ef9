"""Tests for the training objectives."""

import math

import pytest
import torch

from realsr.core.losses import (
    cycle_consistency,
    cycle_loss,
    ddl_objective,
    gan_loss_d,
    gan_loss_g,
    l1_loss,
    ragan_loss_d,
    ragan_loss_g,
    relativistic_score,
    sr_total_loss,
    vgg_loss,
)
from realsr.core.imaging import downsample
from realsr.core.models import DdlGan, LossWeights, Preset
from realsr.core.nets import feature_extractor
from realsr.utils.exceptions import NonFiniteError, ShapeMismatchError

LOG2 = math.log(2.0)


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


class TestGanLosses:
    def test_indifference_point(self):
        zeros = torch.zeros(1, 1, 4, 4)
        assert gan_loss_d(zeros, zeros).item() == pytest.approx(2 * LOG2)
        assert gan_loss_g(zeros).item() == pytest.approx(LOG2)

    def test_generator_loss_vanishes_for_confident_fakes(self):
        assert gan_loss_g(torch.full((4,), 50.0)).item() < 1e-12

    def test_hand_evaluated_mixed_scores(self):
        real = torch.tensor([1.0, -2.0], dtype=torch.float64)
        fake = torch.tensor([0.5, 3.0], dtype=torch.float64)
        expected = (
            -(math.log(sigmoid(1.0)) + math.log(sigmoid(-2.0))) / 2
            - (math.log(1 - sigmoid(0.5)) + math.log(1 - sigmoid(3.0))) / 2
        )
        assert gan_loss_d(real, fake).item() == pytest.approx(expected, rel=1e-12)

    def test_least_squares_minimum(self):
        assert gan_loss_d(torch.ones(3), torch.zeros(3), DdlGan.LEAST_SQUARES).item() == 0.0
        assert gan_loss_g(torch.ones(3), DdlGan.LEAST_SQUARES).item() == 0.0

    def test_nan_scores(self):
        with pytest.raises(NonFiniteError):
            gan_loss_d(torch.tensor([float("nan")]), torch.zeros(1))

    def test_gradients_match_finite_differences(self):
        real = torch.randn(2, 1, 3, 3, dtype=torch.float64, requires_grad=True)
        fake = torch.randn(2, 1, 3, 3, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(gan_loss_d, (real, fake))
        assert torch.autograd.gradcheck(gan_loss_g, (fake,))


class TestCycleLoss:
    def test_identity_maps(self):
        x = torch.rand(2, 3, 8, 8)
        y = torch.rand(2, 3, 32, 32)
        identity = lambda t: t  # noqa: E731
        assert cycle_loss(identity, identity, downsample, x, y).item() == 0.0

    def test_exact_inverses(self):
        x = torch.rand(2, 3, 8, 8, dtype=torch.float64)
        y = torch.rand(2, 3, 32, 32, dtype=torch.float64)
        G = lambda t: t + 0.25  # noqa: E731
        F_net = lambda t: t - 0.25  # noqa: E731
        assert cycle_loss(F_net, G, downsample, x, y).item() == pytest.approx(0.0, abs=1e-15)

    def test_affine_maps(self):
        z = torch.tensor([[[[0.1, 0.2], [0.3, 0.4]]]], dtype=torch.float64).expand(1, 3, 2, 2)
        x = torch.tensor([[[[0.5, 0.6], [0.7, 0.8]]]], dtype=torch.float64).expand(1, 3, 2, 2)
        G = lambda t: 2 * t  # noqa: E731
        F_net = lambda t: t + 0.1  # noqa: E731
        # F(G(z)) - z = z + 0.1 ; G(F(x)) - x = x + 0.2
        expected = (z + 0.1).mean().item() + (x + 0.2).mean().item()
        assert cycle_loss(F_net, G, lambda t: t, x, z).item() == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            cycle_consistency(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 4, 4),
                              torch.zeros(1, 3, 4, 4))

    def test_gradients_match_finite_differences(self):
        args = [torch.rand(1, 3, 2, 2, dtype=torch.float64, requires_grad=True) for _ in range(4)]
        assert torch.autograd.gradcheck(cycle_consistency, tuple(args))


class TestDdlObjective:
    def test_zero_cycle_weight(self):
        report = ddl_objective({"gan_G": 1.5, "gan_F": 0.25, "cyc": 3.0}, LossWeights(lambda_cyc=0.0))
        assert report.total == pytest.approx(1.75)

    def test_all_zero(self):
        assert ddl_objective({"gan_G": 0.0, "gan_F": 0.0, "cyc": 0.0}).total == 0.0

    def test_default_weights(self):
        report = ddl_objective({"gan_G": 1.0, "gan_F": 1.0, "cyc": 0.5})
        assert report.weights["cyc"] == 10.0
        assert report.total == pytest.approx(7.0)

    def test_arithmetic(self):
        report = ddl_objective({"gan_G": 1.0, "gan_F": 2.0, "cyc": 0.5}, LossWeights(lambda_cyc=10.0))
        assert report.total == pytest.approx(8.0)
        assert report.components == {"gan_G": 1.0, "gan_F": 2.0, "cyc": 0.5}

    def test_nan_component(self):
        with pytest.raises(NonFiniteError):
            ddl_objective({"gan_G": float("nan"), "gan_F": 0.0, "cyc": 0.0})

    def test_tensor_total_is_differentiable(self):
        value = torch.tensor(2.0, requires_grad=True)
        report = ddl_objective({"gan_G": value, "gan_F": value, "cyc": value}, LossWeights(lambda_cyc=10.0))
        report.tensor.backward()
        assert value.grad.item() == pytest.approx(12.0)


class TestPixelAndFeatureLosses:
    def test_l1_zero_and_offset(self):
        target = torch.rand(1, 3, 4, 4, dtype=torch.float64)
        assert l1_loss(target, target).item() == 0.0
        assert l1_loss(target + 0.1, target).item() == pytest.approx(0.1)

    def test_l1_asymmetric_case(self):
        pred = torch.tensor([[0.0, 1.0], [0.5, 0.25]])
        target = torch.tensor([[0.5, 0.0], [0.5, 1.0]])
        assert l1_loss(pred, target).item() == pytest.approx((0.5 + 1.0 + 0.0 + 0.75) / 4)

    def test_vgg_loss_zero_on_identity(self):
        extractor = lambda t: t * 3  # noqa: E731
        x = torch.rand(1, 3, 16, 16)
        assert vgg_loss(extractor, x, x.clone()).item() == 0.0

    def test_vgg_loss_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        phi = feature_extractor(Preset.DESK).double()
        pred = torch.rand(1, 3, 32, 32, dtype=torch.float64, requires_grad=True)
        target = torch.rand(1, 3, 32, 32, dtype=torch.float64)
        assert torch.autograd.gradcheck(lambda p: vgg_loss(phi, p, target), (pred,), eps=1e-6, rtol=1e-3)


class TestRelativistic:
    def test_equal_scores(self):
        assert relativistic_score(torch.tensor([1.0]), torch.tensor([1.0, 1.0])).item() == pytest.approx(0.5)

    def test_limit(self):
        assert relativistic_score(torch.tensor([1e4]), torch.tensor([0.0])).item() == pytest.approx(1.0)

    def test_scalar_case(self):
        assert relativistic_score(torch.tensor([1.0]), torch.tensor([0.0, 2.0])).item() == pytest.approx(0.5)

    def test_equal_raw_scores(self):
        scores = torch.full((4,), 0.7)
        assert ragan_loss_g(scores, scores.clone()).item() == pytest.approx(2 * LOG2)
        assert ragan_loss_d(scores, scores.clone()).item() == pytest.approx(2 * LOG2)

    def test_fakes_far_above_reals(self):
        assert ragan_loss_g(torch.zeros(3), torch.full((3,), 60.0)).item() < 1e-12

    def test_two_sample_hand_case(self):
        real = torch.tensor([1.0, 3.0], dtype=torch.float64)
        fake = torch.tensor([0.0, 1.0], dtype=torch.float64)
        real_rel = [r - 0.5 for r in (1.0, 3.0)]
        fake_rel = [f - 2.0 for f in (0.0, 1.0)]
        expected = (
            -sum(math.log(1 - sigmoid(v)) for v in real_rel) / 2
            - sum(math.log(sigmoid(v)) for v in fake_rel) / 2
        )
        assert ragan_loss_g(real, fake).item() == pytest.approx(expected, rel=1e-12)

    def test_gradients_match_finite_differences(self):
        real = torch.randn(4, dtype=torch.float64, requires_grad=True)
        fake = torch.randn(4, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(ragan_loss_g, (real, fake))
        assert torch.autograd.gradcheck(ragan_loss_d, (real, fake))


class TestSrTotal:
    def test_only_vgg(self):
        assert sr_total_loss(LossWeights(lambda_gan=0.0, eta_l1=0.0), 0.7, 5.0, 9.0).total == pytest.approx(0.7)

    def test_arithmetic(self):
        assert sr_total_loss(LossWeights(lambda_gan=0.005, eta_l1=0.01), 1.0, 2.0, 3.0).total == pytest.approx(1.04)

    def test_zero_components(self):
        assert sr_total_loss(LossWeights(), 0.0, 0.0, 0.0).total == 0.0
