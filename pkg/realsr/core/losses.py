"""Training objectives for domain distribution learning and SR learning.

Score-based losses take raw (pre-sigmoid) scores and use softplus forms,
so they stay finite for any finite score.
"""

from typing import Callable, Mapping, Optional, Union

import torch
import torch.nn.functional as F

from ..utils.exceptions import NonFiniteError, ShapeMismatchError
from .models import DdlGan, LossReport, LossWeights

Number = Union[float, torch.Tensor]
ImageMap = Callable[[torch.Tensor], torch.Tensor]


def _check_finite(**tensors: torch.Tensor):
    for name, tensor in tensors.items():
        if not torch.isfinite(tensor).all():
            raise NonFiniteError(f"{name} contains non-finite values")


def _check_same_shape(what: str, a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")


def gan_loss_d(real_scores: torch.Tensor, fake_scores: torch.Tensor, kind: DdlGan = DdlGan.LOGISTIC) -> torch.Tensor:
    """Discriminator loss: ``-mean log s(real) - mean log(1 - s(fake))``.

    Args:
        real_scores: Raw scores on real samples
        fake_scores: Raw scores on generated samples
        kind: Logistic (default) or least squares

    Returns:
        Scalar loss
    """
    _check_finite(real_scores=real_scores, fake_scores=fake_scores)
    if kind == DdlGan.LEAST_SQUARES:
        return ((real_scores - 1.0) ** 2).mean() + (fake_scores ** 2).mean()
    return F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()


def gan_loss_g(fake_scores: torch.Tensor, kind: DdlGan = DdlGan.LOGISTIC) -> torch.Tensor:
    """Non-saturating generator loss ``-mean log s(fake)``."""
    _check_finite(fake_scores=fake_scores)
    if kind == DdlGan.LEAST_SQUARES:
        return ((fake_scores - 1.0) ** 2).mean()
    return F.softplus(-fake_scores).mean()


def l1_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over pixels and channels."""
    _check_same_shape("l1 loss", pred, target)
    return (pred - target).abs().mean()


def cycle_consistency(z: torch.Tensor, z_rec: torch.Tensor, x: torch.Tensor, x_rec: torch.Tensor) -> torch.Tensor:
    """``mean|z_rec - z| + mean|x_rec - x|`` for already-computed reconstructions.

    Args:
        z: Bicubic-domain samples B(Y)
        z_rec: F(G(z))
        x: Input-domain samples
        x_rec: G(F(x))
    """
    _check_same_shape("cycle loss (bicubic domain)", z, z_rec)
    _check_same_shape("cycle loss (input domain)", x, x_rec)
    return l1_loss(z_rec, z) + l1_loss(x_rec, x)


def cycle_loss(
    F_net: ImageMap,
    G_net: ImageMap,
    B: ImageMap,
    x_batch: torch.Tensor,
    y_batch: torch.Tensor,
) -> torch.Tensor:
    """Cycle consistency ``|F(G(B(Y))) - B(Y)| + |G(F(X)) - X|`` (mean L1 each).

    Args:
        F_net: Input domain to bicubic domain
        G_net: Bicubic domain to input domain
        B: Bicubic downsampling
        x_batch: Samples of the input domain
        y_batch: Samples of the output domain (HR)
    """
    z = B(y_batch)
    return cycle_consistency(z, F_net(G_net(z)), x_batch, G_net(F_net(x_batch)))


def _as_tensor(value: Number) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    return torch.tensor(float(value), dtype=torch.float64)


def weighted_report(components: Mapping[str, Number], weights: Mapping[str, float]) -> LossReport:
    """Build a LossReport whose total is ``sum(weight * component)``.

    Raises:
        NonFiniteError: A component is NaN or infinite
    """
    tensors = {name: _as_tensor(value) for name, value in components.items()}
    _check_finite(**tensors)
    total = sum(weights[name] * tensors[name] for name in tensors)
    report = LossReport(
        components={name: float(t.detach()) for name, t in tensors.items()},
        weights={name: float(weights[name]) for name in tensors},
        total=float(total.detach()),
    )
    report._tensor = total
    return report


def ddl_objective(components: Mapping[str, Number], weights: Optional[LossWeights] = None) -> LossReport:
    """``gan_G + gan_F + lambda_cyc * cyc``.

    Args:
        components: ``gan_G`` (G vs D_X), ``gan_F`` (F vs D_Z) and ``cyc``
        weights: Loss weights (defaults when omitted)
    """
    weights = weights or LossWeights()
    return weighted_report(
        {"gan_G": components["gan_G"], "gan_F": components["gan_F"], "cyc": components["cyc"]},
        {"gan_G": 1.0, "gan_F": 1.0, "cyc": weights.lambda_cyc},
    )


def vgg_loss(
    extractor: Callable[[torch.Tensor], torch.Tensor], pred: torch.Tensor, target: torch.Tensor
) -> torch.Tensor:
    """Mean squared error between feature maps of ``pred`` and ``target``."""
    _check_same_shape("vgg loss", pred, target)
    return F.mse_loss(extractor(pred), extractor(target))


def relativistic_score(c_a: torch.Tensor, c_b: torch.Tensor) -> torch.Tensor:
    """``sigmoid(c_a - mean(c_b))``: how much more real ``a`` looks than the average ``b``."""
    _check_finite(c_a=c_a, c_b=c_b)
    return torch.sigmoid(c_a - c_b.mean())


def ragan_loss_g(c_real: torch.Tensor, c_fake: torch.Tensor) -> torch.Tensor:
    """Relativistic average generator loss.

    ``-mean log(1 - D(real, fake)) - mean log D(fake, real)`` with
    ``D(a, b) = sigmoid(a - mean b)``.
    """
    _check_finite(c_real=c_real, c_fake=c_fake)
    return F.softplus(c_real - c_fake.mean()).mean() + F.softplus(-(c_fake - c_real.mean())).mean()


def ragan_loss_d(c_real: torch.Tensor, c_fake: torch.Tensor) -> torch.Tensor:
    """Relativistic average critic loss, the mirror image of :func:`ragan_loss_g`."""
    _check_finite(c_real=c_real, c_fake=c_fake)
    return F.softplus(-(c_real - c_fake.mean())).mean() + F.softplus(c_fake - c_real.mean()).mean()


def sr_total_loss(weights: LossWeights, vgg: Number, ragan: Number, l1: Number) -> LossReport:
    """``vgg + lambda_gan * ragan + eta_l1 * l1``."""
    return weighted_report(
        {"vgg": vgg, "ragan": ragan, "l1": l1},
        {"vgg": 1.0, "ragan": weights.lambda_gan, "l1": weights.eta_l1},
    )
