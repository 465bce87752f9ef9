"""Network architectures: domain generators, discriminators, SR generator, critic, feature extractor."""

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.models import vgg as tv_vgg

from ..utils.exceptions import CheckpointError, NonFiniteError, ShapeMismatchError, ValidationError
from .models import Preset

SR_SCALE = 4
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
# torchvision vgg19 "E" configuration; the tap sits at features[35] (relu5_4)
VGG19_CFG: List[Union[int, str]] = [
    64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M", 512, 512, 512, 512, "M",
]
VGG_TAP_INDEX = 35


@dataclass(frozen=True)
class ArchPreset:
    """Widths and depths of every network at one preset."""
    domain_blocks: int
    domain_base: int
    disc_base: int
    rrdb_blocks: int
    rrdb_nf: int
    rrdb_gc: int
    critic_nf: int
    vgg_width_div: int


ARCH_PRESETS: Dict[Preset, ArchPreset] = {
    Preset.DESK: ArchPreset(
        domain_blocks=3, domain_base=16, disc_base=32,
        rrdb_blocks=2, rrdb_nf=32, rrdb_gc=16,
        critic_nf=16, vgg_width_div=8,
    ),
    Preset.FULL: ArchPreset(
        domain_blocks=9, domain_base=64, disc_base=64,
        rrdb_blocks=23, rrdb_nf=64, rrdb_gc=32,
        critic_nf=64, vgg_width_div=1,
    ),
}


class RealSRNet(nn.Module):
    """Base class with input and parameter validation shared by every network."""

    min_size: int = 1
    size_multiple: int = 1

    @property
    def architecture_id(self) -> str:
        raise NotImplementedError

    def check_input(self, x: torch.Tensor, name: str = "input"):
        """Validate a batch ``(N, 3, H, W)`` before a forward pass.

        Raises:
            ValidationError: Wrong rank/channels or too small
            NonFiniteError: NaN or infinite values in the input or any parameter
        """
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValidationError(f"{type(self).__name__} expects a batch (N, 3, H, W), got {tuple(x.shape)}")
        height, width = x.shape[-2:]
        if height < self.min_size or width < self.min_size:
            raise ValidationError(
                f"{type(self).__name__} needs inputs of at least {self.min_size}x{self.min_size}, got {height}x{width}"
            )
        if height % self.size_multiple or width % self.size_multiple:
            raise ValidationError(
                f"{type(self).__name__} needs sizes divisible by {self.size_multiple}, got {height}x{width}"
            )
        if not torch.isfinite(x).all():
            raise NonFiniteError(f"{name} of {type(self).__name__} contains non-finite values")
        for param_name, param in self.named_parameters():
            if not torch.isfinite(param).all():
                raise NonFiniteError(f"parameter '{param_name}' of {type(self).__name__} contains non-finite values")


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels),
            nn.ReLU(),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class UpBlock(nn.Module):
    """Bilinear upsampling to an exact size followed by a 3x3 convolution."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.norm = nn.InstanceNorm2d(out_channels)

    def forward(self, x: torch.Tensor, size: Tuple[int, int]) -> torch.Tensor:
        x = F.interpolate(x, size=size, mode="bilinear", align_corners=False)
        return F.relu(self.norm(self.conv(x)))


class DomainGenerator(RealSRNet):
    """ResNet image-to-image generator (G, F and, with ``extra_downs=2``, H).

    7x7 stem, stride-2 downsampling convolutions, residual blocks, then
    bilinear upsampling + convolution back to the recorded sizes. The output
    layer is linear. With ``global_skip`` the network predicts a residual
    over the input (average-pooled when the output is smaller), and the
    output convolution starts at zero so a fresh generator is the identity.

    Args:
        n_blocks: Residual blocks at the bottleneck
        base: Channels after the stem
        extra_downs: Stride-2 stages that are not undone (2 gives a 4x smaller output)
        global_skip: Add the (pooled) input to the output
    """

    def __init__(self, n_blocks: int = 9, base: int = 64, extra_downs: int = 0, global_skip: bool = True):
        super().__init__()
        self.n_blocks = n_blocks
        self.base = base
        self.extra_downs = extra_downs
        self.global_skip = global_skip
        self.min_size = 8 * 2 ** extra_downs
        self.size_multiple = 2 ** extra_downs

        self.stem = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(3, base, 7),
            nn.InstanceNorm2d(base),
            nn.ReLU(),
        )
        channels = [base, base * 2, base * 4] + [base * 4] * extra_downs
        self.downs = nn.ModuleList([
            nn.Sequential(
                nn.Conv2d(channels[i], channels[i + 1], 3, stride=2, padding=1),
                nn.InstanceNorm2d(channels[i + 1]),
                nn.ReLU(),
            )
            for i in range(len(channels) - 1)
        ])
        self.blocks = nn.Sequential(*[ResidualBlock(base * 4) for _ in range(n_blocks)])
        self.ups = nn.ModuleList([UpBlock(base * 4, base * 2), UpBlock(base * 2, base)])
        self.head = nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(base, 3, 7))
        if global_skip:
            nn.init.zeros_(self.head[1].weight)
            nn.init.zeros_(self.head[1].bias)

    @property
    def architecture_id(self) -> str:
        return f"domain_generator-b{self.n_blocks}-c{self.base}-x{self.extra_downs}-s{int(self.global_skip)}"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        sizes = [tuple(x.shape[-2:])]
        h = self.stem(x)
        for down in self.downs:
            h = down(h)
            sizes.append(tuple(h.shape[-2:]))
        h = self.blocks(h)
        h = self.ups[0](h, sizes[-2])
        h = self.ups[1](h, sizes[-3])
        out = self.head(h)
        if self.global_skip:
            skip = F.avg_pool2d(x, 2 ** self.extra_downs) if self.extra_downs else x
            out = out + skip
        return out


class PatchDiscriminator(RealSRNet):
    """Three stride-2 conv stages and a 1-channel score conv, one raw score per patch.

    No normalization layers, so the score map is translation covariant in
    steps of the total stride (8 pixels).
    """

    min_size = 16

    def __init__(self, base: int = 64):
        super().__init__()
        self.base = base
        self.model = nn.Sequential(
            nn.Conv2d(3, base, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(base, base * 2, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(base * 2, base * 4, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(base * 4, 1, 4, padding=1),
        )

    @property
    def architecture_id(self) -> str:
        return f"patch_discriminator-c{self.base}"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        return self.model(x)


class ResidualDenseBlock_5C(nn.Module):
    def __init__(self, nf: int = 64, gc: int = 32):
        super().__init__()
        self.conv1 = nn.Conv2d(nf, gc, 3, 1, 1)
        self.conv2 = nn.Conv2d(nf + gc, gc, 3, 1, 1)
        self.conv3 = nn.Conv2d(nf + 2 * gc, gc, 3, 1, 1)
        self.conv4 = nn.Conv2d(nf + 3 * gc, gc, 3, 1, 1)
        self.conv5 = nn.Conv2d(nf + 4 * gc, nf, 3, 1, 1)
        self.lrelu = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x1 = self.lrelu(self.conv1(x))
        x2 = self.lrelu(self.conv2(torch.cat((x, x1), 1)))
        x3 = self.lrelu(self.conv3(torch.cat((x, x1, x2), 1)))
        x4 = self.lrelu(self.conv4(torch.cat((x, x1, x2, x3), 1)))
        x5 = self.conv5(torch.cat((x, x1, x2, x3, x4), 1))
        return x + x5 * 0.2


class RRDB(nn.Module):
    """Residual in residual dense block."""

    def __init__(self, nf: int, gc: int = 32):
        super().__init__()
        self.RDB1 = ResidualDenseBlock_5C(nf, gc)
        self.RDB2 = ResidualDenseBlock_5C(nf, gc)
        self.RDB3 = ResidualDenseBlock_5C(nf, gc)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.RDB3(self.RDB2(self.RDB1(x)))
        return x + out * 0.2


def color_adjust(sr: torch.Tensor, lr: torch.Tensor, scale: int = SR_SCALE) -> torch.Tensor:
    """Shift every ``scale x scale`` block of ``sr`` so its mean RGB equals the matching ``lr`` pixel.

    Args:
        sr: Super-resolved batch ``(N, 3, sH, sW)``
        lr: Low-resolution batch ``(N, 3, H, W)``
        scale: Block size

    Returns:
        ``sr - up(blockmean(sr)) + up(lr)``

    Raises:
        ShapeMismatchError: ``sr`` is not exactly ``scale`` times ``lr``
    """
    if sr.shape[:-2] != lr.shape[:-2] or sr.shape[-2] != lr.shape[-2] * scale or sr.shape[-1] != lr.shape[-1] * scale:
        raise ShapeMismatchError(
            f"color adjustment needs sr = {scale}x lr, got {tuple(sr.shape)} and {tuple(lr.shape)}"
        )
    block_means = F.avg_pool2d(sr, scale)
    offset = lr - block_means
    return sr + offset.repeat_interleave(scale, dim=-2).repeat_interleave(scale, dim=-1)


class SRGenerator(RealSRNet):
    """RRDB network with nearest-neighbour x2 upsampling twice and a final color adjustment layer.

    Tensor names follow the published ESRGAN layout so pretrained files map
    directly. ``conv_last`` starts at zero: a fresh network outputs the
    nearest-neighbour upsampled input.
    """

    def __init__(self, nb: int = 23, nf: int = 64, gc: int = 32):
        super().__init__()
        self.nb, self.nf, self.gc = nb, nf, gc
        self.conv_first = nn.Conv2d(3, nf, 3, 1, 1)
        self.RRDB_trunk = nn.Sequential(*[RRDB(nf, gc) for _ in range(nb)])
        self.trunk_conv = nn.Conv2d(nf, nf, 3, 1, 1)
        self.upconv1 = nn.Conv2d(nf, nf, 3, 1, 1)
        self.upconv2 = nn.Conv2d(nf, nf, 3, 1, 1)
        self.HRconv = nn.Conv2d(nf, nf, 3, 1, 1)
        self.conv_last = nn.Conv2d(nf, 3, 3, 1, 1)
        self.lrelu = nn.LeakyReLU(0.2)

        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, a=0, mode="fan_in")
                module.weight.data.mul_(0.1)
                nn.init.zeros_(module.bias)
        nn.init.zeros_(self.conv_last.weight)

    @property
    def architecture_id(self) -> str:
        return f"rrdbnet-nb{self.nb}-nf{self.nf}-gc{self.gc}-x{SR_SCALE}-ca"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        fea = self.conv_first(x)
        trunk = self.trunk_conv(self.RRDB_trunk(fea))
        fea = fea + trunk
        fea = self.lrelu(self.upconv1(F.interpolate(fea, scale_factor=2, mode="nearest")))
        fea = self.lrelu(self.upconv2(F.interpolate(fea, scale_factor=2, mode="nearest")))
        out = self.conv_last(self.lrelu(self.HRconv(fea)))
        return color_adjust(out, x)


class SRCritic(RealSRNet):
    """VGG-style critic producing one raw score per image (no batch norm)."""

    min_size = 32

    def __init__(self, nf: int = 64):
        super().__init__()
        self.nf = nf
        widths = [nf, nf * 2, nf * 4, nf * 8, nf * 8]
        layers: List[nn.Module] = []
        in_ch = 3
        for width in widths:
            layers += [
                nn.Conv2d(in_ch, width, 3, 1, 1),
                nn.LeakyReLU(0.2),
                nn.Conv2d(width, width, 4, 2, 1),
                nn.LeakyReLU(0.2),
            ]
            in_ch = width
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(4)
        self.linear1 = nn.Linear(nf * 8 * 16, 100)
        self.linear2 = nn.Linear(100, 1)
        self.lrelu = nn.LeakyReLU(0.2)

    @property
    def architecture_id(self) -> str:
        return f"sr_critic-c{self.nf}"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        fea = self.pool(self.features(x)).flatten(1)
        return self.linear2(self.lrelu(self.linear1(fea))).squeeze(1)


class FeatureExtractor(RealSRNet):
    """Frozen VGG19 trunk tapped after relu5_4, before the fifth max-pool.

    Layer indices match torchvision's ``vgg19().features`` so weight files in
    that layout load directly. Weights default to a seeded random
    initialization and never receive gradients.

    Args:
        width_div: Channel divisor (1 is the real VGG19)
        seed: Initialization seed
    """

    min_size = 16

    def __init__(self, width_div: int = 1, seed: int = 0):
        super().__init__()
        self.width_div = width_div
        cfg = [v if v == "M" else max(1, v // width_div) for v in VGG19_CFG]
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.features = tv_vgg.make_layers(cfg, batch_norm=False)[:VGG_TAP_INDEX + 1]
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))
        self.weights_source = f"random:{seed}"
        self.freeze()

    @property
    def architecture_id(self) -> str:
        return f"vgg19_54-w{self.width_div}"

    def freeze(self):
        for param in self.parameters():
            param.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> "FeatureExtractor":
        # always in inference mode
        return super().train(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        return self.features((x - self.mean) / self.std)

    def extract_features(self, img: torch.Tensor) -> torch.Tensor:
        """Feature map at the tap point; spatial size is input / 16."""
        return self(img)


def domain_generator(preset: Preset) -> DomainGenerator:
    arch = ARCH_PRESETS[preset]
    return DomainGenerator(n_blocks=arch.domain_blocks, base=arch.domain_base)


def lr_generator(preset: Preset) -> DomainGenerator:
    """H: maps SR output (HR) to the LR input domain."""
    arch = ARCH_PRESETS[preset]
    return DomainGenerator(n_blocks=arch.domain_blocks, base=arch.domain_base, extra_downs=2)


def patch_discriminator(preset: Preset) -> PatchDiscriminator:
    return PatchDiscriminator(base=ARCH_PRESETS[preset].disc_base)


def sr_generator(preset: Preset) -> SRGenerator:
    arch = ARCH_PRESETS[preset]
    return SRGenerator(nb=arch.rrdb_blocks, nf=arch.rrdb_nf, gc=arch.rrdb_gc)


def sr_critic(preset: Preset) -> SRCritic:
    return SRCritic(nf=ARCH_PRESETS[preset].critic_nf)


def feature_extractor(preset: Preset, seed: int = 0) -> FeatureExtractor:
    return FeatureExtractor(width_div=ARCH_PRESETS[preset].vgg_width_div, seed=seed)


def _assign_state(net: nn.Module, state: Mapping[str, torch.Tensor], what: str):
    expected = net.state_dict()
    missing = sorted(set(expected) - set(state))
    unexpected = sorted(set(state) - set(expected))
    if missing or unexpected:
        raise CheckpointError(
            f"{what} does not match {type(net).__name__}: "
            f"missing {missing[:5]}{'...' if len(missing) > 5 else ''}, "
            f"unexpected {unexpected[:5]}{'...' if len(unexpected) > 5 else ''}"
        )
    for name, tensor in state.items():
        if tuple(tensor.shape) != tuple(expected[name].shape):
            raise CheckpointError(
                f"{what}: tensor '{name}' has shape {tuple(tensor.shape)}, expected {tuple(expected[name].shape)}"
            )
    net.load_state_dict({k: v.to(expected[k].dtype) for k, v in state.items()})


def load_vgg_weights(extractor: FeatureExtractor, source: Union[str, Path]) -> FeatureExtractor:
    """Load pretrained VGG19 weights into a full-width extractor.

    Args:
        extractor: Extractor built with ``width_div=1``
        source: ``"imagenet"`` (torchvision download) or a ``.pth`` state dict
            in torchvision ``features.N`` (or bare ``N``) layout

    Returns:
        The same extractor, frozen
    """
    if str(source) == "imagenet":
        weights = tv_vgg.VGG19_Weights.IMAGENET1K_V1
        state = tv_vgg.vgg19(weights=weights).features.state_dict()
    else:
        try:
            state = torch.load(source, map_location="cpu", weights_only=True)
        except (OSError, RuntimeError) as e:
            raise CheckpointError(f"cannot load VGG weights from '{source}': {e}")
        state = {k[len("features."):] if k.startswith("features.") else k: v for k, v in state.items()}

    wanted = {}
    for key, value in state.items():
        index = int(key.split(".", 1)[0]) if key.split(".", 1)[0].isdigit() else None
        if index is not None and index <= VGG_TAP_INDEX:
            wanted[key] = value
    _assign_state(extractor.features, wanted, f"VGG weights '{source}'")
    extractor.weights_source = str(source)
    extractor.freeze()
    return extractor


_ESRGAN_NEW_NAMES = {
    "conv_body": "trunk_conv",
    "conv_up1": "upconv1",
    "conv_up2": "upconv2",
    "conv_hr": "HRconv",
}


def import_esrgan_state(state: Mapping[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
    """Map published ESRGAN tensor names onto the :class:`SRGenerator` schema.

    Understands the original ``model.N`` sequential layout, the
    ``RRDB_trunk`` layout (already native), and the later ``body.N.rdbK`` layout.
    Files that wrap the dict under ``params`` / ``params_ema`` are unwrapped.
    """
    if "params_ema" in state:
        state = state["params_ema"]
    elif "params" in state:
        state = state["params"]

    old_top = {
        "model.0": "conv_first", "model.3": "upconv1", "model.6": "upconv2",
        "model.8": "HRconv", "model.10": "conv_last",
    }
    mapped: Dict[str, torch.Tensor] = {}
    trunk_len = None
    sub_ids = [int(k.split(".")[3]) for k in state if k.startswith("model.1.sub.")]
    if sub_ids:
        trunk_len = max(sub_ids)

    for key, value in state.items():
        new_key = key
        if key.startswith("model.1.sub."):
            parts = key.split(".")
            idx = int(parts[3])
            if idx == trunk_len:
                new_key = "trunk_conv." + parts[-1]
            else:
                # model.1.sub.{i}.RDB{k}.conv{j}.0.weight
                new_key = f"RRDB_trunk.{idx}.{parts[4]}.{parts[5]}.{parts[-1]}"
        elif key.rsplit(".", 1)[0] in old_top:
            prefix, leaf = key.rsplit(".", 1)
            new_key = f"{old_top[prefix]}.{leaf}"
        elif key.startswith("body."):
            parts = key.split(".")
            new_key = f"RRDB_trunk.{parts[1]}.{parts[2].upper()}.{'.'.join(parts[3:])}"
        else:
            prefix, _, leaf = key.partition(".")
            if prefix in _ESRGAN_NEW_NAMES:
                new_key = f"{_ESRGAN_NEW_NAMES[prefix]}.{leaf}"
        mapped[new_key] = value
    return mapped


def load_esrgan_weights(net: SRGenerator, path: Union[str, Path]) -> SRGenerator:
    """Initialize an SR generator from a published ESRGAN weight file.

    Raises:
        CheckpointError: Unreadable file or tensor schema mismatch
    """
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError) as e:
        raise CheckpointError(f"cannot load pretrained weights from '{path}': {e}")
    _assign_state(net, import_esrgan_state(state), f"pretrained weights '{path}'")
    return net


def parameter_checksum(net: nn.Module) -> str:
    """SHA-256 over the raw bytes of every parameter, in name order."""
    digest = hashlib.sha256()
    for name, param in sorted(net.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(param.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
