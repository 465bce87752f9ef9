"""Tests for degradation operators and benchmark generation."""

import hashlib
import math

import pytest
import torch

from realsr.core.degrade import (
    MANIFEST_NAME,
    BenchmarkSources,
    apply_jpeg,
    apply_sensor_noise,
    build_training_sets,
    derive_seed,
    load_manifest,
    make_csr_eval_pair,
    make_dsr_eval_pair,
    write_benchmark,
)
from realsr.core.imaging import downsample, load_image, psnr, save_image, ssim
from realsr.core.models import DegradationKind, DegradationRecipe, Role, Scenario
from realsr.utils.exceptions import DataIOError, DivisibilityError, OverlapError, ValidationError

from .conftest import pattern_image, write_sources

NOISE_8 = DegradationRecipe(kind=DegradationKind.SENSOR_NOISE, sigma_8bit=8.0, seed=7)
NOISE_0 = DegradationRecipe(kind=DegradationKind.SENSOR_NOISE, sigma_8bit=0.0, seed=7)
EXPECTED_SIGMA8_PSNR = 10 * math.log10(255 ** 2 / 8 ** 2)


def tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


class TestSensorNoise:
    def test_zero_sigma_is_identity(self):
        img = torch.rand(3, 16, 16)
        assert torch.equal(apply_sensor_noise(img, 0.0, seed=1), img)

    def test_statistics_on_mid_gray(self):
        clean = torch.full((3, 256, 256), 0.5, dtype=torch.float64)
        noisy = apply_sensor_noise(clean, 8.0, seed=11)
        residual = noisy - clean
        assert psnr(clean, noisy) == pytest.approx(EXPECTED_SIGMA8_PSNR, abs=0.3)
        assert abs(residual.mean().item()) < 0.5 / 255
        assert residual.std().item() == pytest.approx(8 / 255, rel=0.02)

    def test_same_seed_is_bit_identical(self):
        img = torch.rand(3, 32, 32)
        assert torch.equal(apply_sensor_noise(img, 8.0, 5), apply_sensor_noise(img, 8.0, 5))
        assert not torch.equal(apply_sensor_noise(img, 8.0, 5), apply_sensor_noise(img, 8.0, 6))

    def test_rejects_negative_sigma(self):
        with pytest.raises(ValidationError):
            apply_sensor_noise(torch.rand(3, 4, 4), -1.0, seed=0)


class TestJpeg:
    def test_high_quality_on_constant_image(self):
        img = torch.full((3, 32, 32), 0.6)
        assert psnr(img, apply_jpeg(img, 100)) > 50

    def test_lower_quality_loses_more_structure(self):
        img = pattern_image(64, 64, seed=4)
        assert ssim(img, apply_jpeg(img, 30)) < ssim(img, apply_jpeg(img, 90))

    def test_recompression_is_stable(self):
        img = pattern_image(64, 64, seed=5)
        once = apply_jpeg(img, 30)
        twice = apply_jpeg(once, 30)
        assert torch.equal(twice, apply_jpeg(once, 30))
        assert psnr(once, twice) > psnr(img, once)

    def test_rejects_out_of_range_quality(self):
        with pytest.raises(ValidationError):
            apply_jpeg(torch.rand(3, 8, 8), 0)
        with pytest.raises(ValidationError):
            apply_jpeg(torch.rand(3, 8, 8), 101)


class TestEvalPairs:
    def test_dsr_shapes(self):
        lr, gt = make_dsr_eval_pair(pattern_image(256, 256, dtype=torch.float64), 4, NOISE_8)
        assert lr.shape == (3, 64, 64)
        assert gt.shape == (3, 256, 256)

    def test_dsr_ground_truth_is_degraded(self):
        original = torch.full((3, 256, 256), 0.5, dtype=torch.float64)
        _, gt = make_dsr_eval_pair(original, 4, NOISE_8)
        assert psnr(gt, original) == pytest.approx(EXPECTED_SIGMA8_PSNR, abs=0.3)

    def test_dsr_zero_sigma(self):
        original = pattern_image(64, 64, dtype=torch.float64)
        lr, gt = make_dsr_eval_pair(original, 4, NOISE_0)
        assert torch.equal(lr, downsample(original, 4))
        assert torch.equal(gt, original)

    def test_csr_ground_truth_is_original(self):
        original = pattern_image(64, 64, dtype=torch.float64)
        lr, gt = make_csr_eval_pair(original, 4, NOISE_8)
        assert torch.equal(gt, original)
        assert torch.equal(make_csr_eval_pair(original, 4, NOISE_0)[0], downsample(original, 4))
        assert lr.shape == (3, 16, 16)

    def test_csr_input_is_noisy_almost_everywhere(self):
        original = 0.1 + 0.8 * torch.rand(3, 64, 64, generator=torch.Generator().manual_seed(4), dtype=torch.float64)
        lr, _ = make_csr_eval_pair(original, 4, NOISE_8)
        changed = (lr != downsample(original, 4)).double().mean().item()
        assert changed >= 0.99

    def test_indivisible_original(self):
        with pytest.raises(DivisibilityError):
            make_dsr_eval_pair(torch.rand(3, 30, 32), 4, NOISE_8)


class TestSeeds:
    def test_derived_seeds_are_independent_of_other_images(self):
        assert derive_seed(7, "a", "eval_input") == derive_seed(7, "a", "eval_input")
        assert derive_seed(7, "a", "eval_input") != derive_seed(7, "a", "eval_gt")
        assert derive_seed(7, "a", "eval_input") != derive_seed(8, "a", "eval_input")
        assert 0 <= derive_seed(7, "a", "eval_input") < 2 ** 64


class TestBenchmark:
    def test_dsr_tags_one_set_with_both_roles(self, tmp_path):
        src = write_sources(tmp_path / "src", 3, 2, 32)
        plan = build_training_sets(BenchmarkSources.discover(src), Scenario.DSR, 4, NOISE_8)
        train = plan.manifest.with_role(Role.TRAIN_INPUT_X)
        assert len(train) == 3
        assert all(entry.has_role(Role.TRAIN_OUTPUT_Y) for entry in train)
        assert plan.manifest.with_role(Role.TRAIN_OUTPUT_Y) == train
        assert plan.dir_name == "dsr_noise"

    def test_csr_cardinalities(self, tmp_path):
        src = write_sources(tmp_path / "src", 3, 2, 32, n_clean=2)
        plan = build_training_sets(BenchmarkSources.discover(src), Scenario.CSR, 4, NOISE_8)
        x_set = plan.manifest.with_role(Role.TRAIN_INPUT_X)
        y_set = plan.manifest.with_role(Role.TRAIN_OUTPUT_Y)
        assert (len(x_set), len(y_set)) == (3, 2)
        assert not {e.path for e in x_set} & {e.path for e in y_set}
        assert all(e.recipe_kind == "bicubic" for e in y_set)

    def test_written_tree(self, tmp_path):
        src = write_sources(tmp_path / "src", 3, 2, 32)
        plan = build_training_sets(BenchmarkSources.discover(src), Scenario.DSR, 4, NOISE_8)
        summary = write_benchmark(tmp_path / "out", plan)
        bench = summary.bench_dir
        for name in ("train_input", "train_output", "eval_input", "eval_gt"):
            assert (bench / name).is_dir()
        assert summary.written == 3 + 2 * 2
        manifest = load_manifest(bench)
        assert manifest.master_seed == 7
        assert manifest.scenario == Scenario.DSR
        lr, gt = manifest.eval_pairs()[0]
        assert load_image(bench / lr.path).shape == (3, 8, 8)
        assert load_image(bench / gt.path).shape == (3, 32, 32)

    def test_rerun_is_byte_identical_and_up_to_date(self, tmp_path):
        src = write_sources(tmp_path / "src", 3, 2, 32)
        sources = BenchmarkSources.discover(src)
        first = write_benchmark(tmp_path / "a", build_training_sets(sources, Scenario.DSR, 4, NOISE_8))
        second = write_benchmark(tmp_path / "b", build_training_sets(sources, Scenario.DSR, 4, NOISE_8), workers=4)
        assert tree_digest(first.bench_dir) == tree_digest(second.bench_dir)

        again = write_benchmark(tmp_path / "a", build_training_sets(sources, Scenario.DSR, 4, NOISE_8))
        assert again.up_to_date
        assert again.written == 0

    def test_paired_data(self, tmp_path):
        src = write_sources(tmp_path / "src", 3, 2, 32)
        plan = build_training_sets(BenchmarkSources.discover(src), Scenario.CSR, 4, NOISE_8, paired=True)
        pairs = plan.manifest.train_pairs()
        assert len(pairs) == 3
        bench = write_benchmark(tmp_path / "out", plan).bench_dir
        lr, gt = pairs[0]
        assert load_image(bench / lr.path).shape == (3, 8, 8)
        assert load_image(bench / gt.path).shape == (3, 32, 32)

    def test_odd_sizes_are_centre_cropped(self, tmp_path):
        save_image(pattern_image(34, 37), tmp_path / "src" / "train" / "a.png")
        save_image(pattern_image(35, 33), tmp_path / "src" / "eval" / "b.png")
        plan = build_training_sets(BenchmarkSources.discover(tmp_path / "src"), Scenario.CSR, 4, NOISE_8)
        bench = write_benchmark(tmp_path / "out", plan).bench_dir
        lr, gt = plan.manifest.eval_pairs()[0]
        assert gt.params["crop"] == "1,0,32,32"
        assert load_image(bench / gt.path).shape == (3, 32, 32)
        assert load_image(bench / lr.path).shape == (3, 8, 8)

    def test_overlap_by_name(self, tmp_path):
        save_image(pattern_image(32, 32, seed=1), tmp_path / "src" / "train" / "same.png")
        save_image(pattern_image(32, 32, seed=2), tmp_path / "src" / "eval" / "same.png")
        with pytest.raises(OverlapError, match="same"):
            build_training_sets(BenchmarkSources.discover(tmp_path / "src"), Scenario.DSR, 4, NOISE_8)

    def test_overlap_by_content(self, tmp_path):
        img = pattern_image(32, 32, seed=1)
        save_image(img, tmp_path / "src" / "train" / "a.png")
        save_image(img, tmp_path / "src" / "eval" / "b.png")
        with pytest.raises(OverlapError, match="identical"):
            build_training_sets(BenchmarkSources.discover(tmp_path / "src"), Scenario.DSR, 4, NOISE_8)

    def test_missing_sources(self, tmp_path):
        with pytest.raises(DataIOError):
            BenchmarkSources.discover(tmp_path / "nope")
        (tmp_path / "empty" / "train").mkdir(parents=True)
        with pytest.raises(DataIOError, match="training originals"):
            BenchmarkSources.discover(tmp_path / "empty")

    def test_manifest_text_round_trip(self, small_benchmark):
        text = (small_benchmark / MANIFEST_NAME).read_text(encoding="utf-8")
        assert load_manifest(small_benchmark).to_text() == text
        assert text.startswith("# format=realsr-manifest/1\n")
