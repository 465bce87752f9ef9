"""Image representation, resampling kernels and reference-quality metrics.

Images are float tensors in [0, 1], channel-first ``(3, H, W)``; batches are
``(N, 3, H, W)``. Every function here is a pure function of its inputs.
"""

import math
from functools import lru_cache
from math import gcd
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image as PILImage

from ..utils.exceptions import DataIOError, DivisibilityError, ShapeMismatchError, ValidationError
from .models import KernelKind, ResampleKernel

BICUBIC = ResampleKernel(kind=KernelKind.BICUBIC, bicubic_a=-0.5)
BILINEAR = ResampleKernel(kind=KernelKind.BILINEAR)

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

PathLike = Union[str, Path]


def kernel_weights(kernel: ResampleKernel, x: torch.Tensor) -> torch.Tensor:
    """Evaluate the continuous kernel at offsets ``x`` (in pixels).

    Args:
        kernel: Kernel definition
        x: Offsets from the sample centre

    Returns:
        Kernel values, same shape as ``x``
    """
    absx = x.abs()
    if kernel.kind == KernelKind.BILINEAR:
        return (1.0 - absx).clamp(min=0.0)

    a = kernel.bicubic_a
    absx2 = absx * absx
    absx3 = absx2 * absx
    near = ((a + 2.0) * absx3 - (a + 3.0) * absx2 + 1.0) * (absx <= 1).to(x.dtype)
    far = (a * absx3 - 5.0 * a * absx2 + 8.0 * a * absx - 4.0 * a) * ((absx > 1) & (absx < 2)).to(x.dtype)
    return near + far


@lru_cache(maxsize=64)
def _axis_matrix(in_len: int, out_len: int, scale_num: int, scale_den: int, kernel: ResampleKernel) -> torch.Tensor:
    """Dense (out_len, in_len) float64 resampling matrix for one axis.

    Half-pixel centres; when shrinking, the kernel is stretched by 1/scale
    (antialiasing); taps outside the image are clamped to the edge pixel.
    """
    scale = scale_num / scale_den
    antialias = scale < 1.0
    half_width = kernel.support / scale if antialias else kernel.support

    centers = (torch.arange(out_len, dtype=torch.float64) + 0.5) / scale - 0.5
    left = torch.floor(centers - half_width)
    taps = int(math.ceil(2 * half_width)) + 2
    indices = left.unsqueeze(1) + torch.arange(taps, dtype=torch.float64).unsqueeze(0)
    distance = centers.unsqueeze(1) - indices

    if antialias:
        weights = scale * kernel_weights(kernel, distance * scale)
    else:
        weights = kernel_weights(kernel, distance)
    weights = weights / weights.sum(dim=1, keepdim=True)

    clamped = indices.clamp(0, in_len - 1).long()
    matrix = torch.zeros(out_len, in_len, dtype=torch.float64)
    matrix.scatter_add_(1, clamped, weights)
    return matrix


def resample(img: torch.Tensor, scale_num: int, scale_den: int, kernel: ResampleKernel = BICUBIC) -> torch.Tensor:
    """Resample an image or batch by the factor ``scale_num / scale_den``.

    Args:
        img: Tensor ``(..., H, W)``
        scale_num: Numerator of the scale factor
        scale_den: Denominator of the scale factor (4 for ×1/4 downsampling)
        kernel: Resampling kernel

    Returns:
        Tensor ``(..., H*num/den, W*num/den)`` clamped to [0, 1]

    Raises:
        ValidationError: Non-positive scale terms
        DivisibilityError: H or W not divisible by the reduced denominator
    """
    if scale_num < 1 or scale_den < 1:
        raise ValidationError(f"scale terms must be >= 1, got {scale_num}/{scale_den}")
    common = gcd(scale_num, scale_den)
    num, den = scale_num // common, scale_den // common

    height, width = img.shape[-2], img.shape[-1]
    if height % den or width % den:
        raise DivisibilityError(
            f"image of size {height}x{width} cannot be resampled by {scale_num}/{scale_den}: "
            f"height and width must be divisible by {den}"
        )
    if num == den:
        return img.clone()

    out_h, out_w = height * num // den, width * num // den
    rows = _axis_matrix(height, out_h, num, den, kernel).to(device=img.device, dtype=img.dtype)
    cols = _axis_matrix(width, out_w, num, den, kernel).to(device=img.device, dtype=img.dtype)
    out = torch.einsum("oh,...hw,pw->...op", rows, img, cols)
    return out.clamp(0.0, 1.0)


def downsample(img: torch.Tensor, scale: int = 4) -> torch.Tensor:
    """Bicubic downsampling B by an integer factor."""
    return resample(img, 1, scale, BICUBIC)


def upsample(img: torch.Tensor, scale: int = 4) -> torch.Tensor:
    """Bicubic upsampling by an integer factor."""
    return resample(img, scale, 1, BICUBIC)


def _check_same_shape(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"images differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in dB with MAX = 1.0.

    Args:
        a: Image or batch
        b: Image or batch of the same shape

    Returns:
        PSNR in decibels, ``math.inf`` for identical inputs
    """
    _check_same_shape(a, b)
    mse = torch.mean((a.double() - b.double()) ** 2).item()
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


@lru_cache(maxsize=4)
def _gaussian_window(size: int, sigma: float) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2.0
    g = torch.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean structural similarity, computed per channel and averaged.

    Uses an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1 and
    valid (unpadded) filtering.

    Args:
        a: Image ``(C, H, W)`` or batch ``(N, C, H, W)``
        b: Same shape as ``a``

    Returns:
        SSIM in (-1, 1]
    """
    _check_same_shape(a, b)
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValidationError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[-2]}x{a.shape[-1]}"
        )
    x = a.double().reshape(-1, 1, a.shape[-2], a.shape[-1])
    y = b.double().reshape(-1, 1, b.shape[-2], b.shape[-1])
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA).to(x.device).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)

    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2

    mu_x = F.conv2d(x, window)
    mu_y = F.conv2d(y, window)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    sigma_xx = F.conv2d(x * x, window) - mu_xx
    sigma_yy = F.conv2d(y * y, window) - mu_yy
    sigma_xy = F.conv2d(x * y, window) - mu_xy

    ssim_map = ((2.0 * mu_xy + c1) * (2.0 * sigma_xy + c2)) / ((mu_xx + mu_yy + c1) * (sigma_xx + sigma_yy + c2))
    per_channel = ssim_map.mean(dim=(1, 2, 3))
    return float(per_channel.mean().item())


def high_pass_energy(img: torch.Tensor) -> float:
    """Mean squared residual between an image and its 3x3 box blur."""
    x = img.double().reshape(-1, 1, img.shape[-2], img.shape[-1])
    padded = F.pad(x, (1, 1, 1, 1), mode="replicate")
    blurred = F.avg_pool2d(padded, kernel_size=3, stride=1)
    return float(((x - blurred) ** 2).mean().item())


def center_crop_to_multiple(img: torch.Tensor, multiple: int) -> Tuple[torch.Tensor, Tuple[int, int, int, int]]:
    """Centre-crop so that height and width are multiples of ``multiple``.

    Returns:
        Cropped image and the crop box ``(top, left, height, width)``
    """
    height, width = img.shape[-2], img.shape[-1]
    new_h, new_w = height - height % multiple, width - width % multiple
    if new_h < multiple or new_w < multiple:
        raise ValidationError(f"image of size {height}x{width} is smaller than the scale factor {multiple}")
    top, left = (height - new_h) // 2, (width - new_w) // 2
    return img[..., top:top + new_h, left:left + new_w].clone(), (top, left, new_h, new_w)


def to_uint8(img: torch.Tensor) -> np.ndarray:
    """Convert ``(3, H, W)`` in [0, 1] to an ``(H, W, 3)`` uint8 array.

    Values are clamped, then rounded half away from zero.
    """
    if img.dim() != 3 or img.shape[0] != 3:
        raise ValidationError(f"expected an RGB image of shape (3, H, W), got {tuple(img.shape)}")
    arr = img.detach().cpu().double().clamp(0.0, 1.0).numpy() * 255.0
    arr = np.floor(arr + 0.5)
    return arr.transpose(1, 2, 0).astype(np.uint8)


def from_uint8(arr: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Convert an ``(H, W, 3)`` uint8 array to ``(3, H, W)`` in [0, 1]."""
    tensor = torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))).to(torch.float64) / 255.0
    return tensor.to(dtype)


def quantize(img: torch.Tensor) -> torch.Tensor:
    """Round-trip an image through 8-bit storage without touching disk."""
    return from_uint8(to_uint8(img), dtype=img.dtype if img.is_floating_point() else torch.float32)


def load_image(path: PathLike, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Read an 8-bit image file as an RGB tensor in [0, 1].

    Args:
        path: Image file path
        dtype: Floating dtype of the result

    Returns:
        Tensor ``(3, H, W)``
    """
    try:
        with PILImage.open(path) as handle:
            arr = np.asarray(handle.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise DataIOError(f"cannot read image '{path}': {e}")
    return from_uint8(arr, dtype=dtype)


def save_image(img: torch.Tensor, path: PathLike):
    """Write an RGB tensor as an 8-bit PNG (clamped and rounded).

    Args:
        img: Tensor ``(3, H, W)``
        path: Destination path; parent directories are created
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(to_uint8(img)).save(path, format="PNG")
    except OSError as e:
        raise DataIOError(f"cannot write image '{path}': {e}")
