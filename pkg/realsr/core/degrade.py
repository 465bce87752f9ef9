"""Degradation operators and the DSR/CSR benchmark generator.

Every composite path downsamples first and degrades second; there is no
public function that degrades before downsampling.
"""

import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import PIL
import torch
from PIL import Image as PILImage

from .. import __version__
from ..utils.exceptions import DataIOError, OverlapError, ValidationError
from ..utils.helpers import list_images, sha256_file, zero_padded_name
from .imaging import center_crop_to_multiple, downsample, from_uint8, load_image, save_image, to_uint8
from .models import (
    DatasetManifest,
    DegradationKind,
    DegradationRecipe,
    ManifestEntry,
    Role,
    Scenario,
)

MANIFEST_NAME = "manifest.tsv"
JPEG_SUBSAMPLING = 2  # Pillow's code for 4:2:0

ROLE_DIRS = {
    Role.TRAIN_INPUT_X: "train_input",
    Role.TRAIN_OUTPUT_Y: "train_output",
    Role.EVAL_INPUT: "eval_input",
    Role.EVAL_GT: "eval_gt",
    Role.TRAIN_PAIR_INPUT: "train_pair_input",
    Role.TRAIN_PAIR_GT: "train_pair_gt",
}
BASE_DIRS = ("train_input", "train_output", "eval_input", "eval_gt")


def derive_seed(master_seed: int, image_id: str, role: str) -> int:
    """Per-image 64-bit seed; independent of which other images exist.

    Args:
        master_seed: Benchmark master seed
        image_id: Source image identifier
        role: Role the degraded image plays

    Returns:
        Unsigned 64-bit seed
    """
    digest = hashlib.blake2b(f"{master_seed}:{image_id}:{role}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def apply_sensor_noise(img: torch.Tensor, sigma_8bit: float, seed: int) -> torch.Tensor:
    """Add i.i.d. Gaussian noise of std ``sigma_8bit / 255`` and clamp to [0, 1].

    Args:
        img: Image ``(3, H, W)`` or batch
        sigma_8bit: Noise standard deviation on the 8-bit scale
        seed: Noise seed

    Returns:
        Noisy image with the input's dtype
    """
    if sigma_8bit < 0:
        raise ValidationError(f"noise sigma must be >= 0, got {sigma_8bit}")
    if sigma_8bit == 0:
        return img.clone()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(size=tuple(img.shape)) * (sigma_8bit / 255.0)
    noisy = img.detach().cpu().double() + torch.from_numpy(noise)
    return noisy.clamp(0.0, 1.0).to(dtype=img.dtype, device=img.device)


def apply_jpeg(img: torch.Tensor, quality: int) -> torch.Tensor:
    """Round-trip an image through baseline JPEG at ``quality`` (4:2:0).

    Args:
        img: Image ``(3, H, W)``
        quality: Encoder quality in [1, 100]

    Returns:
        Decoded image, same shape and dtype as the input
    """
    if not 1 <= quality <= 100:
        raise ValidationError(f"JPEG quality must be within [1, 100], got {quality}")
    buffer = io.BytesIO()
    PILImage.fromarray(to_uint8(img)).save(
        buffer, format="JPEG", quality=quality, subsampling=JPEG_SUBSAMPLING, optimize=False, progressive=False
    )
    buffer.seek(0)
    with PILImage.open(buffer) as decoded:
        arr = np.asarray(decoded.convert("RGB"), dtype=np.uint8)
    return from_uint8(arr, dtype=img.dtype).to(img.device)


def apply_recipe(img: torch.Tensor, recipe: DegradationRecipe, seed: int) -> torch.Tensor:
    """Apply the recipe's operator with an explicit per-image seed."""
    if recipe.kind == DegradationKind.SENSOR_NOISE:
        return apply_sensor_noise(img, recipe.sigma_8bit, seed)
    return apply_jpeg(img, recipe.quality)


def codec_description(recipe: DegradationRecipe) -> str:
    """Pinned operator implementation recorded in the manifest."""
    if recipe.kind == DegradationKind.JPEG:
        return f"pillow-{PIL.__version__} baseline-jpeg subsampling=4:2:0 optimize=0"
    return f"numpy-{np.__version__} pcg64 standard_normal"


def _degraded_pair(
    original: torch.Tensor,
    scale: int,
    recipe: DegradationRecipe,
    input_seed: int,
    gt_seed: Optional[int],
) -> Tuple[torch.Tensor, torch.Tensor]:
    low = apply_recipe(downsample(original, scale), recipe, input_seed)
    if gt_seed is None:
        return low, original.clone()
    return low, apply_recipe(original, recipe, gt_seed)


def make_dsr_eval_pair(
    original: torch.Tensor, scale: int, recipe: DegradationRecipe, image_id: str = "0"
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Domain-specific eval pair: (degrade(B(original)), degrade(original)).

    The two degradations use independent seeds derived from ``recipe.seed``.

    Raises:
        DivisibilityError: Original dimensions not divisible by ``scale``
    """
    return _degraded_pair(
        original, scale, recipe,
        derive_seed(recipe.seed, image_id, Role.EVAL_INPUT.value),
        derive_seed(recipe.seed, image_id, Role.EVAL_GT.value),
    )


def make_csr_eval_pair(
    original: torch.Tensor, scale: int, recipe: DegradationRecipe, image_id: str = "0"
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Clean eval pair: (degrade(B(original)), original)."""
    return _degraded_pair(
        original, scale, recipe,
        derive_seed(recipe.seed, image_id, Role.EVAL_INPUT.value),
        None,
    )


@dataclass
class BenchmarkSources:
    """Original images feeding a benchmark."""
    train: List[Path]
    eval: List[Path]
    train_clean: Optional[List[Path]] = None

    @classmethod
    def discover(cls, source_dir: Path) -> "BenchmarkSources":
        """Read ``train/``, ``eval/`` and optional ``train_clean/`` subdirectories.

        Raises:
            DataIOError: Missing directory or empty train/eval sets
        """
        if not source_dir.is_dir():
            raise DataIOError(f"source directory '{source_dir}' does not exist")
        train = list_images(source_dir / "train")
        evals = list_images(source_dir / "eval")
        clean = list_images(source_dir / "train_clean") or None
        if not train:
            raise DataIOError(f"no training originals found in '{source_dir / 'train'}'")
        if not evals:
            raise DataIOError(f"no evaluation originals found in '{source_dir / 'eval'}'")
        return cls(train=train, eval=evals, train_clean=clean)


@dataclass
class RenderJob:
    """Entries produced together by one rendering call."""
    entries: List[ManifestEntry]
    render: Callable[[], List[torch.Tensor]]


@dataclass
class BenchmarkPlan:
    """A manifest plus the jobs that materialize its images."""
    manifest: DatasetManifest
    jobs: List[RenderJob] = field(default_factory=list)

    @property
    def dir_name(self) -> str:
        kind = "noise" if self.manifest.degradation == DegradationKind.SENSOR_NOISE else "jpeg"
        return f"{self.manifest.scenario.value.lower()}_{kind}"


def _source_ids(paths: Sequence[Path], label: str) -> List[str]:
    ids = [p.stem for p in paths]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise ValidationError(f"duplicate source ids in {label} set: {', '.join(duplicates)}")
    return ids


def check_disjoint(train: Sequence[Path], evals: Sequence[Path]):
    """Reject any image appearing in both train and eval sources.

    Identity is checked by source id (file stem) and by file content.

    Raises:
        OverlapError: Shared ids or identical files
    """
    shared = sorted({p.stem for p in train} & {p.stem for p in evals})
    if shared:
        raise OverlapError(f"train and eval sources overlap: {', '.join(shared)}")
    train_hashes = {sha256_file(p): p for p in train}
    for path in evals:
        digest = sha256_file(path)
        if digest in train_hashes:
            raise OverlapError(f"eval image '{path.name}' is identical to train image '{train_hashes[digest].name}'")


def _load_cropped(path: Path, scale: int) -> Tuple[torch.Tensor, str]:
    img, (top, left, height, width) = center_crop_to_multiple(load_image(path, dtype=torch.float64), scale)
    return img, f"{top},{left},{height},{width}"


def _recipe_params(recipe: DegradationRecipe, crop: Optional[str] = None) -> Dict[str, str]:
    params = {k: str(v) for k, v in recipe.params().items()}
    if crop is not None:
        params["crop"] = crop
    return params


def build_training_sets(
    sources: BenchmarkSources,
    scenario: Scenario,
    scale: int,
    recipe: DegradationRecipe,
    paired: bool = False,
) -> BenchmarkPlan:
    """Plan a DSR or CSR benchmark: training domains, eval pairs, optional paired data.

    DSR: one set ``degrade(B(orig))`` tagged as both input and output domain.
    CSR: the same input set plus a clean output set ``B(orig)`` (from
    ``train_clean`` originals when given, otherwise the train originals).
    Every seed is derived from ``recipe.seed``, the image id and its role.

    Args:
        sources: Original images
        scenario: DSR or CSR
        scale: Downsampling factor
        recipe: Degradation recipe; ``recipe.seed`` is the master seed
        paired: Also plan ground-truth training pairs for supervised runs

    Returns:
        Benchmark plan (manifest and render jobs)

    Raises:
        OverlapError: Train and eval sources share images
    """
    if scale < 1:
        raise ValidationError(f"scale must be >= 1, got {scale}")
    train_ids = _source_ids(sources.train, "train")
    eval_ids = _source_ids(sources.eval, "eval")
    clean_paths = sources.train_clean if sources.train_clean else sources.train
    clean_ids = _source_ids(clean_paths, "train_clean")
    check_disjoint(list(sources.train) + list(sources.train_clean or []), sources.eval)

    master = recipe.seed
    kind = recipe.kind.value
    manifest = DatasetManifest(
        scenario=scenario,
        scale=scale,
        degradation=recipe.kind,
        master_seed=master,
        tool_version=__version__,
        codec=codec_description(recipe),
    )
    plan = BenchmarkPlan(manifest=manifest)

    # Input domain {X_i}; in DSR it is the output domain as well.
    x_roles = [Role.TRAIN_INPUT_X, Role.TRAIN_OUTPUT_Y] if scenario == Scenario.DSR else [Role.TRAIN_INPUT_X]
    for index, (path, image_id) in enumerate(zip(sources.train, train_ids)):
        seed = derive_seed(master, image_id, Role.TRAIN_INPUT_X.value)
        entry = ManifestEntry(
            roles=x_roles,
            path=f"train_input/{zero_padded_name(index, len(train_ids))}",
            source_id=image_id,
            recipe_kind=kind,
            params=_recipe_params(recipe),
            seed=seed,
        )

        def render_x(path=path, seed=seed):
            original, _ = _load_cropped(path, scale)
            return [apply_recipe(downsample(original, scale), recipe, seed)]

        plan.jobs.append(RenderJob([entry], render_x))

    if scenario == Scenario.CSR:
        for index, (path, image_id) in enumerate(zip(clean_paths, clean_ids)):
            entry = ManifestEntry(
                roles=[Role.TRAIN_OUTPUT_Y],
                path=f"train_output/{zero_padded_name(index, len(clean_ids))}",
                source_id=image_id,
                recipe_kind="bicubic",
                params={},
                seed=0,
            )

            def render_y(path=path):
                original, _ = _load_cropped(path, scale)
                return [downsample(original, scale)]

            plan.jobs.append(RenderJob([entry], render_y))

    degrade_gt = scenario == Scenario.DSR
    pair_specs = [(Role.EVAL_INPUT, Role.EVAL_GT, sources.eval, eval_ids)]
    if paired:
        pair_specs.append((Role.TRAIN_PAIR_INPUT, Role.TRAIN_PAIR_GT, sources.train, train_ids))

    for input_role, gt_role, paths, ids in pair_specs:
        for index, (path, image_id) in enumerate(zip(paths, ids)):
            crop = center_crop_to_multiple_box(path, scale)
            input_seed = derive_seed(master, image_id, input_role.value)
            gt_seed = derive_seed(master, image_id, gt_role.value) if degrade_gt else None
            name = zero_padded_name(index, len(ids))
            input_entry = ManifestEntry(
                roles=[input_role],
                path=f"{ROLE_DIRS[input_role]}/{name}",
                source_id=image_id,
                recipe_kind=kind,
                params=_recipe_params(recipe, crop),
                seed=input_seed,
            )
            gt_entry = ManifestEntry(
                roles=[gt_role],
                path=f"{ROLE_DIRS[gt_role]}/{name}",
                source_id=image_id,
                recipe_kind=kind if degrade_gt else "none",
                params=_recipe_params(recipe, crop) if degrade_gt else {"crop": crop},
                seed=gt_seed if gt_seed is not None else 0,
            )

            def render_pair(path=path, input_seed=input_seed, gt_seed=gt_seed):
                original, _ = _load_cropped(path, scale)
                return list(_degraded_pair(original, scale, recipe, input_seed, gt_seed))

            plan.jobs.append(RenderJob([input_entry, gt_entry], render_pair))

    manifest.entries = [entry for job in plan.jobs for entry in job.entries]
    return plan


def center_crop_to_multiple_box(path: Path, multiple: int) -> str:
    """Crop box ``top,left,height,width`` that the generator applies to a source file."""
    try:
        with PILImage.open(path) as handle:
            width, height = handle.size
    except OSError as e:
        raise DataIOError(f"cannot read image '{path}': {e}")
    new_h, new_w = height - height % multiple, width - width % multiple
    if new_h < multiple or new_w < multiple:
        raise ValidationError(f"image '{path.name}' ({width}x{height}) is smaller than the scale factor {multiple}")
    return f"{(height - new_h) // 2},{(width - new_w) // 2},{new_h},{new_w}"


@dataclass
class WriteSummary:
    """Outcome of materializing a benchmark plan."""
    bench_dir: Path
    written: int
    up_to_date: bool
    counts: Dict[str, int]


def load_manifest(bench_dir: Path) -> DatasetManifest:
    """Read ``manifest.tsv`` from a benchmark directory.

    Raises:
        DataIOError: Missing or malformed manifest
    """
    manifest_path = bench_dir / MANIFEST_NAME if bench_dir.is_dir() else bench_dir
    try:
        return DatasetManifest.from_text(manifest_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataIOError(f"cannot read manifest '{manifest_path}': {e}")
    except (ValueError, KeyError) as e:
        raise DataIOError(f"malformed manifest '{manifest_path}': {e}")


def _role_counts(manifest: DatasetManifest) -> Dict[str, int]:
    return {role.value: len(manifest.with_role(role)) for role in Role if manifest.with_role(role)}


def write_benchmark(
    root: Path,
    plan: BenchmarkPlan,
    workers: int = 1,
    force: bool = False,
    on_item: Optional[Callable[[], None]] = None,
) -> WriteSummary:
    """Materialize a plan under ``<root>/<scenario>_<degradation>/``.

    Jobs render in a thread pool but results are consumed in plan order, so
    output bytes do not depend on ``workers``. A rerun whose manifest text is
    unchanged and whose files all exist writes nothing.

    Args:
        root: Benchmark root directory
        plan: Plan from :func:`build_training_sets`
        workers: Rendering threads
        force: Rewrite even when up to date
        on_item: Called once per rendered job (progress reporting)

    Returns:
        Write summary
    """
    bench_dir = Path(root) / plan.dir_name
    manifest_path = bench_dir / MANIFEST_NAME
    text = plan.manifest.to_text()
    counts = _role_counts(plan.manifest)

    if not force and manifest_path.exists():
        try:
            existing = manifest_path.read_text(encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot read manifest '{manifest_path}': {e}")
        if existing == text and all((bench_dir / e.path).exists() for e in plan.manifest.entries):
            return WriteSummary(bench_dir=bench_dir, written=0, up_to_date=True, counts=counts)

    try:
        for name in set(BASE_DIRS) | {ROLE_DIRS[r] for e in plan.manifest.entries for r in e.roles}:
            (bench_dir / name).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"cannot create benchmark directory '{bench_dir}': {e}")

    written = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for job, images in zip(plan.jobs, pool.map(lambda j: j.render(), plan.jobs)):
            for entry, image in zip(job.entries, images):
                save_image(image, bench_dir / entry.path)
                written += 1
            if on_item is not None:
                on_item()

    tmp_path = manifest_path.with_suffix(".tsv.tmp")
    try:
        tmp_path.write_text(text, encoding="utf-8")
        os.replace(tmp_path, manifest_path)
    except OSError as e:
        raise DataIOError(f"cannot write manifest '{manifest_path}': {e}")
    return WriteSummary(bench_dir=bench_dir, written=written, up_to_date=False, counts=counts)


def load_role_images(bench_dir: Path, entries: Sequence[ManifestEntry], workers: int = 1) -> List[torch.Tensor]:
    """Load the images of manifest entries in order, optionally in parallel threads."""
    paths = [bench_dir / e.path for e in entries]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(load_image, paths))
