"""Two-stage training: domain distribution learning (G, F, D_X, D_Z) and SR learning (S, C).

Every random choice of step ``t`` comes from a generator seeded with
``(seed, stage, t)``; together with the saved parameters and Adam moments
this makes a resumed run continue exactly like an uninterrupted one.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn
from tqdm import tqdm

from ..utils.exceptions import (
    CheckpointError,
    DataIOError,
    DatasetError,
    NonFiniteError,
    TrainingDivergedError,
    UsageError,
)
from .checkpoint import (
    Checkpoint,
    build_header,
    collect_tensors,
    load_checkpoint,
    restore_network,
    restore_optimizer,
    save_checkpoint,
)
from .degrade import derive_seed, load_manifest, load_role_images
from .imaging import center_crop_to_multiple, downsample
from .losses import (
    cycle_consistency,
    ddl_objective,
    gan_loss_d,
    gan_loss_g,
    l1_loss,
    ragan_loss_d,
    ragan_loss_g,
    sr_total_loss,
    vgg_loss,
)
from .models import DatasetManifest, LossReport, Preset, Role, Stage, TrainConfig, TrainMode
from .nets import (
    DomainGenerator,
    FeatureExtractor,
    SRGenerator,
    domain_generator,
    feature_extractor,
    load_esrgan_weights,
    load_vgg_weights,
    lr_generator,
    patch_discriminator,
    sr_critic,
    sr_generator,
)

LOG_NAME = "train_log.jsonl"
SR_LR_BREAKPOINTS = ((1, 10), (1, 5), (2, 5), (3, 5))

PathLike = Union[str, Path]


def ddl_lr(step: int, total: int, base: float) -> float:
    """Constant ``base`` for the first half of training, then linear decay reaching 0 at ``total``."""
    if 2 * step < total:
        return base
    return max(0.0, base * 2.0 * (total - step) / total)


def sr_lr(step: int, total: int, base: float) -> float:
    """``base * 0.5**k`` where k counts the passed breakpoints at 10, 20, 40 and 60 percent of ``total``."""
    k = sum(1 for num, den in SR_LR_BREAKPOINTS if step * den >= num * total)
    return base * 0.5 ** k


def step_generator(seed: int, stage: Stage, step: int) -> torch.Generator:
    """Random generator for everything sampled at one training step."""
    gen = torch.Generator()
    gen.manual_seed(derive_seed(seed, stage.value, f"step-{step}"))
    return gen


def configure_determinism():
    torch.use_deterministic_algorithms(True, warn_only=True)


def set_requires_grad(nets: Iterable[nn.Module], requires_grad: bool):
    for net in nets:
        for param in net.parameters():
            param.requires_grad_(requires_grad)


def _coin(gen: torch.Generator, enabled: bool) -> bool:
    return enabled and bool(torch.rand(1, generator=gen).item() < 0.5)


def sample_crops(
    images: Sequence[torch.Tensor], gen: torch.Generator, count: int, crop: int, flip: bool
) -> torch.Tensor:
    """Random ``crop x crop`` patches from randomly chosen images (with replacement)."""
    patches = []
    for index in torch.randint(len(images), (count,), generator=gen).tolist():
        img = images[index]
        height, width = img.shape[-2:]
        top = int(torch.randint(height - crop + 1, (1,), generator=gen))
        left = int(torch.randint(width - crop + 1, (1,), generator=gen))
        patch = img[:, top:top + crop, left:left + crop]
        if _coin(gen, flip):
            patch = patch.flip(-1)
        patches.append(patch)
    return torch.stack(patches)


def sample_aligned_crops(
    lr_images: Sequence[torch.Tensor],
    hr_images: Sequence[torch.Tensor],
    gen: torch.Generator,
    count: int,
    lr_crop: int,
    scale: int,
    flip: bool,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Co-located LR/HR patches: the HR offset is ``scale`` times the LR offset."""
    lr_patches, hr_patches = [], []
    hr_crop = lr_crop * scale
    for index in torch.randint(len(lr_images), (count,), generator=gen).tolist():
        lr_img, hr_img = lr_images[index], hr_images[index]
        height, width = lr_img.shape[-2:]
        top = int(torch.randint(height - lr_crop + 1, (1,), generator=gen))
        left = int(torch.randint(width - lr_crop + 1, (1,), generator=gen))
        lr_patch = lr_img[:, top:top + lr_crop, left:left + lr_crop]
        hr_patch = hr_img[:, top * scale:top * scale + hr_crop, left * scale:left * scale + hr_crop]
        if _coin(gen, flip):
            lr_patch, hr_patch = lr_patch.flip(-1), hr_patch.flip(-1)
        lr_patches.append(lr_patch)
        hr_patches.append(hr_patch)
    return torch.stack(lr_patches), torch.stack(hr_patches)


def _require_size(images: Sequence[torch.Tensor], crop: int, what: str, names: Sequence[str]):
    for img, name in zip(images, names):
        if img.shape[-2] < crop or img.shape[-1] < crop:
            raise DatasetError(
                f"{what} image '{name}' is {img.shape[-1]}x{img.shape[-2]}, smaller than the {crop}px crop"
            )


def generate_training_pair(G: DomainGenerator, y: torch.Tensor, scale: int = 4) -> Tuple[torch.Tensor, torch.Tensor]:
    """Build a stage-2 pair ``(G(B(y)), y)`` with G frozen.

    Args:
        G: Trained domain generator
        y: HR image ``(3, H, W)`` or batch, sizes divisible by ``scale``
        scale: Downsampling factor of B

    Returns:
        ``(x_hat, y)`` with ``x_hat`` at 1/scale resolution
    """
    batched = y.dim() == 4
    batch = y if batched else y.unsqueeze(0)
    with torch.no_grad():
        x_hat = G(downsample(batch, scale))
    return (x_hat if batched else x_hat[0]), y


@dataclass
class RunPaths:
    """Files of one training run directory."""
    out_dir: Path
    stage: Stage

    @property
    def latest(self) -> Path:
        return self.out_dir / f"{self.stage.value}_latest.ckpt"

    @property
    def final(self) -> Path:
        return self.out_dir / f"{self.stage.value}_final.ckpt"

    @property
    def log(self) -> Path:
        return self.out_dir / LOG_NAME


@dataclass
class TrainResult:
    """Outcome of a training call."""
    final_checkpoint: Optional[Path]
    latest_checkpoint: Optional[Path]
    steps_done: int
    total_steps: int
    last_report: Optional[LossReport] = None
    log_path: Optional[Path] = None
    warnings: List[str] = field(default_factory=list)


def _open_log(paths: RunPaths, resume_step: Optional[int]):
    """Open the training log; on resume keep only records of completed steps."""
    try:
        paths.out_dir.mkdir(parents=True, exist_ok=True)
        kept: List[str] = []
        if resume_step is not None and paths.log.exists():
            for line in paths.log.read_text(encoding="utf-8").splitlines():
                if line.strip() and json.loads(line).get("step", 0) < resume_step:
                    kept.append(line)
        handle = open(paths.log, "w", encoding="utf-8")
        for line in kept:
            handle.write(line + "\n")
        return handle
    except OSError as e:
        raise DataIOError(f"cannot open training log '{paths.log}': {e}")


def _params_finite(nets: Iterable[nn.Module]) -> bool:
    return all(torch.isfinite(p).all() for net in nets for p in net.parameters())


class _Loop:
    """Shared step loop: schedule, logging, checkpoint cadence and divergence handling."""

    def __init__(
        self,
        config: TrainConfig,
        paths: RunPaths,
        networks: Dict[str, nn.Module],
        optimizers: Dict[str, torch.optim.Optimizer],
        trainable: Sequence[nn.Module],
        schedule: Callable[[int], float],
    ):
        self.config = config
        self.paths = paths
        self.networks = networks
        self.optimizers = optimizers
        self.trainable = trainable
        self.schedule = schedule

    def save(self, path: Path, step: int):
        header = build_header(
            self.config.stage, self.config.mode, self.config.preset, step,
            self.networks, self.config.model_dump(mode="json"),
        )
        save_checkpoint(path, header, collect_tensors(self.networks, self.optimizers))

    def run(
        self,
        step_fn: Callable[[int, torch.Generator], Tuple[LossReport, Dict[str, float]]],
        start: int,
        total: int,
        stop_after: Optional[int],
        progress: bool,
    ) -> TrainResult:
        end = total if stop_after is None else min(total, stop_after)
        log = _open_log(self.paths, start if start > 0 else None)
        last_report = None
        last_good = self.paths.latest if start > 0 and self.paths.latest.exists() else None
        try:
            bar = tqdm(range(start, end), total=end - start, desc=f"train-{self.config.stage.value}",
                       disable=not progress, leave=False)
            for step in bar:
                lr = self.schedule(step)
                for optimizer in self.optimizers.values():
                    for group in optimizer.param_groups:
                        group["lr"] = lr
                gen = step_generator(self.config.seed, self.config.stage, step)
                try:
                    report, extra = step_fn(step, gen)
                except NonFiniteError as e:
                    raise TrainingDivergedError(f"training diverged at step {step}: {e}", last_good=last_good)
                if not _params_finite(self.trainable):
                    raise TrainingDivergedError(
                        f"training diverged at step {step}: parameters became non-finite", last_good=last_good
                    )
                last_report = report
                if step % self.config.log_every == 0 or step == end - 1:
                    log.write(report.to_log_line(step, lr, extra) + "\n")
                    log.flush()
                bar.set_postfix(loss=f"{report.total:.4f}")
                done = step + 1
                if done % self.config.checkpoint_every == 0 or done == end:
                    self.save(self.paths.latest, done)
                    last_good = self.paths.latest
        finally:
            log.close()

        final = None
        if end == total:
            self.save(self.paths.final, total)
            final = self.paths.final
        return TrainResult(
            final_checkpoint=final,
            latest_checkpoint=last_good,
            steps_done=end,
            total_steps=total,
            last_report=last_report,
            log_path=self.paths.log,
        )


def _load_resume(resume: Optional[PathLike], stage: Stage) -> Optional[Checkpoint]:
    if resume is None:
        return None
    checkpoint = load_checkpoint(resume)
    if checkpoint.header.stage != stage:
        raise CheckpointError(f"'{resume}' is a {checkpoint.header.stage.value} checkpoint, not {stage.value}")
    return checkpoint


def _resolve_config(config: TrainConfig, resume: Optional[Checkpoint], total_steps: Optional[int]) -> TrainConfig:
    if resume is not None:
        config = TrainConfig.model_validate(resume.header.config)
    if total_steps is not None:
        config = config.model_copy(update={"total_steps": total_steps})
    return config


def _load_images(bench_dir: Path, manifest: DatasetManifest, role: Role, workers: int):
    entries = manifest.with_role(role)
    return load_role_images(bench_dir, entries, workers), [e.path for e in entries]


def ddl_total_steps(config: TrainConfig, n_x: int, n_y: int) -> int:
    """``epochs`` passes over the larger domain set, unless ``total_steps`` is set."""
    if config.total_steps is not None:
        return config.total_steps
    return config.epochs * math.ceil(max(n_x, n_y) / config.batch_size)


def train_ddl(
    config: TrainConfig,
    bench_dir: PathLike,
    out_dir: PathLike,
    resume: Optional[PathLike] = None,
    total_steps: Optional[int] = None,
    stop_after: Optional[int] = None,
    progress: bool = False,
    device: str = "cpu",
) -> TrainResult:
    """Train G, F, D_X and D_Z on the unpaired domains of a benchmark.

    Each step samples X crops (``lr_crop``) and Y crops (``hr_crop``), forms
    Z = B(Y), updates G and F on the adversarial + cycle objective, then
    updates both discriminators.

    Args:
        config: Stage ``ddl`` configuration
        bench_dir: Benchmark directory containing ``manifest.tsv``
        out_dir: Run directory for checkpoints and the training log
        resume: Checkpoint to continue from (its config snapshot is used)
        total_steps: Override of the total step count
        stop_after: Stop (with a latest checkpoint) after this many steps
        progress: Show a progress bar on stderr
        device: Torch device

    Returns:
        Training result with checkpoint paths

    Raises:
        DatasetError: Empty domain sets or images smaller than the crops
        TrainingDivergedError: A loss or parameter became non-finite
    """
    resume_ckpt = _load_resume(resume, Stage.DDL)
    config = _resolve_config(config, resume_ckpt, total_steps)
    if config.stage != Stage.DDL:
        raise UsageError("train_ddl needs a config with stage 'ddl'")
    configure_determinism()

    bench_dir = Path(bench_dir)
    manifest = load_manifest(bench_dir)
    if not manifest.with_role(Role.TRAIN_INPUT_X):
        raise DatasetError("benchmark has no input-domain (train_input_X) images")
    if not manifest.with_role(Role.TRAIN_OUTPUT_Y):
        raise DatasetError("benchmark has no output-domain (train_output_Y) images")
    x_images, x_names = _load_images(bench_dir, manifest, Role.TRAIN_INPUT_X, config.workers)
    y_images, y_names = _load_images(bench_dir, manifest, Role.TRAIN_OUTPUT_Y, config.workers)
    _require_size(x_images, config.lr_crop, "input-domain", x_names)
    _require_size(y_images, config.hr_crop, "output-domain", y_names)
    x_images = [img.to(device) for img in x_images]
    y_images = [img.to(device) for img in y_images]
    total = ddl_total_steps(config, len(x_images), len(y_images))

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        G, F_net = domain_generator(config.preset), domain_generator(config.preset)
        D_X, D_Z = patch_discriminator(config.preset), patch_discriminator(config.preset)
    for net in (G, F_net, D_X, D_Z):
        net.to(device).train()

    betas = (config.beta1, config.beta2)
    opt_gen = torch.optim.Adam(list(G.parameters()) + list(F_net.parameters()), lr=config.lr, betas=betas)
    opt_disc = torch.optim.Adam(list(D_X.parameters()) + list(D_Z.parameters()), lr=config.lr, betas=betas)
    networks = {"G": G, "F": F_net, "D_X": D_X, "D_Z": D_Z}
    optimizers = {"gen": opt_gen, "disc": opt_disc}

    start = 0
    if resume_ckpt is not None:
        for name, net in networks.items():
            restore_network(resume_ckpt, name, net)
        for name, optimizer in optimizers.items():
            restore_optimizer(resume_ckpt, name, optimizer)
        start = resume_ckpt.header.step

    def step_fn(step: int, gen: torch.Generator):
        x = sample_crops(x_images, gen, config.batch_size, config.lr_crop, config.flip)
        y = sample_crops(y_images, gen, config.batch_size, config.hr_crop, config.flip)
        z = downsample(y, config.scale)

        set_requires_grad((D_X, D_Z), False)
        fake_x = G(z)
        fake_z = F_net(x)
        report = ddl_objective(
            {
                "gan_G": gan_loss_g(D_X(fake_x), config.ddl_gan),
                "gan_F": gan_loss_g(D_Z(fake_z), config.ddl_gan),
                "cyc": cycle_consistency(z, F_net(fake_x), x, G(fake_z)),
            },
            config.weights,
        )
        opt_gen.zero_grad(set_to_none=True)
        report.tensor.backward()
        opt_gen.step()

        set_requires_grad((D_X, D_Z), True)
        d_x = gan_loss_d(D_X(x), D_X(fake_x.detach()), config.ddl_gan)
        d_z = gan_loss_d(D_Z(z), D_Z(fake_z.detach()), config.ddl_gan)
        opt_disc.zero_grad(set_to_none=True)
        (d_x + d_z).backward()
        opt_disc.step()
        return report, {"d_x": float(d_x.detach()), "d_z": float(d_z.detach())}

    loop = _Loop(config, RunPaths(Path(out_dir), Stage.DDL), networks, optimizers,
                 trainable=(G, F_net, D_X, D_Z), schedule=lambda t: ddl_lr(t, total, config.lr))
    return loop.run(step_fn, start, total, stop_after, progress)


def _load_domain_net(checkpoint: Checkpoint, name: str, preset: Preset, device: str) -> DomainGenerator:
    net = restore_network(checkpoint, name, domain_generator(preset)).to(device)
    net.eval()
    set_requires_grad([net], False)
    return net


def build_feature_extractor(preset: Preset, vgg_weights: Optional[PathLike] = None) -> FeatureExtractor:
    """Frozen feature extractor; pretrained weights need the full-width layout."""
    if vgg_weights is None:
        return feature_extractor(preset)
    return load_vgg_weights(feature_extractor(Preset.FULL), vgg_weights)


def train_sr(
    config: TrainConfig,
    bench_dir: PathLike,
    out_dir: PathLike,
    ddl_checkpoint: Optional[PathLike] = None,
    resume: Optional[PathLike] = None,
    pretrained: Optional[PathLike] = None,
    vgg_weights: Optional[PathLike] = None,
    total_steps: Optional[int] = None,
    stop_after: Optional[int] = None,
    progress: bool = False,
    device: str = "cpu",
) -> TrainResult:
    """Train the SR generator S against the relativistic critic C.

    Per mode, the LR input of a step is:
    ``ours`` G(B(y)) with G frozen; ``baseline`` and ``clean_input`` B(y);
    ``lr_supervision`` real X crops, with an extra network H trained so that
    H(S(x)) matches x; ``supervised`` ground-truth degraded pairs.

    Args:
        config: Stage ``sr`` configuration
        bench_dir: Benchmark directory
        out_dir: Run directory
        ddl_checkpoint: Stage-1 checkpoint (needed by ``ours`` and ``clean_input``)
        resume: Checkpoint to continue from
        pretrained: ESRGAN weight file to initialize S
        vgg_weights: ``"imagenet"`` or a VGG19 weight file for the feature loss
        total_steps: Override of ``iterations``
        stop_after: Stop (with a latest checkpoint) after this many steps
        progress: Show a progress bar on stderr
        device: Torch device

    Returns:
        Training result; ``warnings`` lists fallbacks that were taken
    """
    resume_ckpt = _load_resume(resume, Stage.SR)
    config = _resolve_config(config, resume_ckpt, total_steps)
    if config.stage != Stage.SR:
        raise UsageError("train_sr needs a config with stage 'sr'")
    mode = config.mode
    needs_ddl = mode in (TrainMode.OURS, TrainMode.CLEAN_INPUT)
    if needs_ddl and ddl_checkpoint is None and resume_ckpt is None:
        raise UsageError(f"mode '{mode.value}' requires --ddl-checkpoint")
    configure_determinism()
    warnings: List[str] = []

    bench_dir = Path(bench_dir)
    manifest = load_manifest(bench_dir)
    total = config.total_steps if config.total_steps is not None else config.iterations

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        S = sr_generator(config.preset)
        C = sr_critic(config.preset)
        H = lr_generator(config.preset) if mode == TrainMode.LR_SUPERVISION else None
    phi = build_feature_extractor(config.preset, vgg_weights).to(device)

    frozen: Dict[str, DomainGenerator] = {}
    if needs_ddl:
        name = "G" if mode == TrainMode.OURS else "F"
        source = resume_ckpt
        if source is None:
            source = load_checkpoint(ddl_checkpoint)
            if source.header.stage != Stage.DDL:
                raise CheckpointError(f"'{ddl_checkpoint}' is not a ddl checkpoint")
        frozen[name] = _load_domain_net(source, name, config.preset, device)

    if resume_ckpt is None:
        if pretrained is not None:
            load_esrgan_weights(S, pretrained)
        else:
            warnings.append("no pretrained ESRGAN weights given; S starts from scratch")

    trainable_nets = [S] + ([H] if H is not None else [])
    for net in trainable_nets + [C]:
        net.to(device).train()
    betas = (config.beta1, config.beta2)
    gen_params = [p for net in trainable_nets for p in net.parameters()]
    opt_s = torch.optim.Adam(gen_params, lr=config.lr, betas=betas)
    opt_c = torch.optim.Adam(C.parameters(), lr=config.lr, betas=betas)
    networks: Dict[str, nn.Module] = {"S": S, "C": C}
    if H is not None:
        networks["H"] = H
    networks.update(frozen)
    optimizers = {"S": opt_s, "C": opt_c}

    start = 0
    if resume_ckpt is not None:
        for name, net in networks.items():
            if name not in frozen:
                restore_network(resume_ckpt, name, net)
        for name, optimizer in optimizers.items():
            restore_optimizer(resume_ckpt, name, optimizer)
        start = resume_ckpt.header.step

    sampler = _sr_sampler(config, bench_dir, manifest, frozen, device)

    def step_fn(step: int, gen: torch.Generator):
        x, y = sampler(gen)
        set_requires_grad([C], False)
        sr = S(x)
        ragan = ragan_loss_g(C(y), C(sr))
        if H is not None:
            # LR supervision: H maps the SR output back onto the real input
            x_rec = H(sr)
            report = sr_total_loss(config.weights, vgg_loss(phi, x_rec, x), ragan, l1_loss(x_rec, x))
        else:
            report = sr_total_loss(config.weights, vgg_loss(phi, sr, y), ragan, l1_loss(sr, y))
        opt_s.zero_grad(set_to_none=True)
        report.tensor.backward()
        opt_s.step()

        set_requires_grad([C], True)
        d_loss = ragan_loss_d(C(y), C(sr.detach()))
        opt_c.zero_grad(set_to_none=True)
        d_loss.backward()
        opt_c.step()
        return report, {"critic": float(d_loss.detach())}

    loop = _Loop(config, RunPaths(Path(out_dir), Stage.SR), networks, optimizers,
                 trainable=trainable_nets + [C], schedule=lambda t: sr_lr(t, total, config.lr))
    result = loop.run(step_fn, start, total, stop_after, progress)
    result.warnings = warnings
    return result


def _sr_sampler(
    config: TrainConfig,
    bench_dir: Path,
    manifest: DatasetManifest,
    frozen: Dict[str, DomainGenerator],
    device: str,
) -> Callable[[torch.Generator], Tuple[torch.Tensor, torch.Tensor]]:
    """Batch source ``gen -> (x, y)`` for the configured mode."""
    mode, scale, batch = config.mode, config.scale, config.batch_size
    lr_crop, hr_crop, flip = config.lr_crop, config.hr_crop, config.flip

    if mode == TrainMode.SUPERVISED:
        pairs = manifest.train_pairs()
        if not pairs:
            raise DatasetError("supervised mode needs paired training data; regenerate the benchmark with --paired")
        lr_images = load_role_images(bench_dir, [p[0] for p in pairs], config.workers)
        hr_images = load_role_images(bench_dir, [p[1] for p in pairs], config.workers)
        _require_size(lr_images, lr_crop, "paired input", [p[0].path for p in pairs])
        lr_images = [img.to(device) for img in lr_images]
        hr_images = [img.to(device) for img in hr_images]
        return lambda gen: sample_aligned_crops(lr_images, hr_images, gen, batch, lr_crop, scale, flip)

    if not manifest.with_role(Role.TRAIN_OUTPUT_Y):
        raise DatasetError("benchmark has no output-domain (train_output_Y) images")
    y_images, y_names = _load_images(bench_dir, manifest, Role.TRAIN_OUTPUT_Y, config.workers)
    _require_size(y_images, hr_crop, "output-domain", y_names)
    y_images = [center_crop_to_multiple(img, scale)[0].to(device) for img in y_images]

    if mode == TrainMode.LR_SUPERVISION:
        if not manifest.with_role(Role.TRAIN_INPUT_X):
            raise DatasetError("benchmark has no input-domain (train_input_X) images")
        x_images, x_names = _load_images(bench_dir, manifest, Role.TRAIN_INPUT_X, config.workers)
        _require_size(x_images, lr_crop, "input-domain", x_names)
        x_images = [img.to(device) for img in x_images]

        def unpaired(gen: torch.Generator):
            x = sample_crops(x_images, gen, batch, lr_crop, flip)
            y = sample_crops(y_images, gen, batch, hr_crop, flip)
            return x, y

        return unpaired

    if mode == TrainMode.OURS:
        G = frozen["G"]
        if config.materialize_pairs:
            x_full = [generate_training_pair(G, y, scale)[0] for y in y_images]
            return lambda gen: sample_aligned_crops(x_full, y_images, gen, batch, lr_crop, scale, flip)

        def on_the_fly(gen: torch.Generator):
            y = sample_crops(y_images, gen, batch, hr_crop, flip)
            return generate_training_pair(G, y, scale)

        return on_the_fly

    # baseline and clean_input train on bicubic pairs
    def bicubic(gen: torch.Generator):
        y = sample_crops(y_images, gen, batch, hr_crop, flip)
        return downsample(y, scale), y

    return bicubic


class Predictor:
    """SR inference from a stage-2 checkpoint, loaded once.

    Args:
        checkpoint_path: ``sr`` checkpoint
        preset: Expected preset; a mismatch is rejected
        device: Torch device
    """

    def __init__(self, checkpoint_path: PathLike, preset: Optional[Preset] = None, device: str = "cpu"):
        self.checkpoint_path = Path(checkpoint_path)
        checkpoint = load_checkpoint(checkpoint_path)
        header = checkpoint.header
        if header.stage != Stage.SR:
            raise CheckpointError(f"'{checkpoint_path}' is a {header.stage.value} checkpoint; inference needs sr")
        if preset is not None and header.preset != preset:
            raise CheckpointError(
                f"checkpoint preset '{header.preset.value}' does not match runtime preset '{preset.value}'"
            )
        self.mode = header.mode
        self.preset = header.preset
        self.device = device
        self.S: SRGenerator = restore_network(checkpoint, "S", sr_generator(header.preset)).to(device).eval()
        self.F: Optional[DomainGenerator] = None
        if self.mode == TrainMode.CLEAN_INPUT:
            self.F = _load_domain_net(checkpoint, "F", header.preset, device)

    def __call__(self, img: torch.Tensor) -> torch.Tensor:
        """Super-resolve ``(3, H, W)`` to ``(3, 4H, 4W)``; values are not clamped."""
        with torch.no_grad():
            x = img.to(self.device, torch.float32).unsqueeze(0)
            if self.F is not None:
                x = self.F(x)
            return self.S(x)[0].cpu()


def infer(
    checkpoint: PathLike, img: torch.Tensor, mode: Optional[TrainMode] = None, preset: Optional[Preset] = None
) -> torch.Tensor:
    """One-shot inference; ``mode`` and ``preset``, when given, must match the checkpoint."""
    predictor = Predictor(checkpoint, preset=preset)
    if mode is not None and predictor.mode != mode:
        raise CheckpointError(f"checkpoint was trained in mode '{predictor.mode.value}', not '{mode.value}'")
    return predictor(img)


def held_out_l1(
    predict: Callable[[torch.Tensor], torch.Tensor], pairs: Sequence[Tuple[torch.Tensor, torch.Tensor]]
) -> float:
    """Mean L1 between predictions and ground truth over (lr, gt) pairs."""
    if not pairs:
        raise DatasetError("no held-out pairs")
    with torch.no_grad():
        values = [float(l1_loss(predict(lr).double(), gt.double())) for lr, gt in pairs]
    return sum(values) / len(values)
