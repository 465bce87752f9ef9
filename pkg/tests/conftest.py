"""Shared fixtures: synthetic images and small benchmarks."""

from pathlib import Path
from typing import Optional

import numpy as np
import pytest
import torch

from realsr.core.config import ConfigManager
from realsr.core.degrade import BenchmarkSources, build_training_sets, write_benchmark
from realsr.core.imaging import save_image
from realsr.core.models import DegradationKind, DegradationRecipe, Preset, Scenario, Stage


def pattern_image(height: int, width: int, seed: int = 0, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Smooth colourful test pattern with some mid-frequency texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij")
    channels = []
    for _ in range(3):
        fy, fx = rng.uniform(1.0, 6.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        wave = 0.5 + 0.3 * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
        ramp = 0.2 * (yy * rng.uniform(-1, 1) + xx * rng.uniform(-1, 1))
        channels.append(np.clip(wave + ramp, 0.0, 1.0))
    return torch.from_numpy(np.stack(channels)).to(dtype)


def write_sources(root: Path, n_train: int, n_eval: int, size: int, n_clean: int = 0) -> Path:
    """Write train/, eval/ and optional train_clean/ originals as PNG files."""
    for index in range(n_train):
        save_image(pattern_image(size, size, seed=100 + index), root / "train" / f"train_{index:02d}.png")
    for index in range(n_eval):
        save_image(pattern_image(size, size, seed=200 + index), root / "eval" / f"eval_{index:02d}.png")
    for index in range(n_clean):
        save_image(pattern_image(size, size, seed=300 + index), root / "train_clean" / f"clean_{index:02d}.png")
    return root


def make_benchmark(
    root: Path,
    scenario: Scenario = Scenario.DSR,
    n_train: int = 3,
    n_eval: int = 2,
    size: int = 64,
    eval_size: Optional[int] = None,
    sigma: float = 8.0,
    scale: int = 4,
    seed: int = 7,
    paired: bool = False,
) -> Path:
    """Generate a benchmark under ``root/bench`` and return its directory."""
    src = write_sources(root / "src", n_train, 0, size)
    write_sources(root / "src", 0, n_eval, eval_size or size)
    recipe = DegradationRecipe(kind=DegradationKind.SENSOR_NOISE, sigma_8bit=sigma, seed=seed)
    plan = build_training_sets(BenchmarkSources.discover(src), scenario, scale, recipe, paired=paired)
    return write_benchmark(root / "bench", plan).bench_dir


def desk_config(stage: Stage, **overrides):
    values = {"seed": 0, "workers": 1}
    values.update(overrides)
    return ConfigManager().build_train_config(stage, Preset.DESK, overrides=values)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Point the weights cache at a per-test directory."""
    monkeypatch.setenv("REALSR_CACHE", str(tmp_path / "cache"))


@pytest.fixture
def small_benchmark(tmp_path) -> Path:
    """DSR benchmark with 64x64 originals (16x16 LR images)."""
    return make_benchmark(tmp_path)


@pytest.fixture
def training_benchmark(tmp_path) -> Path:
    """DSR sigma=8 benchmark whose LR images (64x64) fit the desk crops."""
    return make_benchmark(tmp_path, n_train=8, n_eval=2, size=256, eval_size=64)
