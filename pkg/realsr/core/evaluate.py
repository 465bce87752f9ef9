"""Evaluation harness: PSNR / SSIM / perceptual distance over benchmark eval pairs."""

import copy
import csv
import hashlib
import io
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import torch
from tabulate import tabulate

from ..utils.exceptions import DataIOError, DatasetError, PluginError, ValidationError
from ..utils.helpers import list_images
from .checkpoint import checkpoint_id
from .degrade import MANIFEST_NAME, load_manifest
from .imaging import load_image, psnr, quantize, save_image, ssim
from .models import DatasetManifest, ManifestEntry, MetricReport, MetricRow
from .nets import FeatureExtractor, parameter_checksum
from .train import Predictor

PathLike = Union[str, Path]
Predict = Callable[[torch.Tensor], torch.Tensor]

HEADERS = {"psnr": "PSNR ↑", "ssim": "SSIM ↑", "lpips": "LPIPS ↓"}
NOT_LPIPS_SEED = 20240611
# relu1_2, relu2_2, relu3_4, relu4_4 in torchvision vgg19 indexing
NOT_LPIPS_TAPS = (3, 8, 17, 26)


class ReportFormat(str, Enum):
    TEXT = "text"
    DELIMITED = "csv"


class PerceptualMetricPlugin(ABC):
    """Full-reference perceptual distance: non-negative, zero on identical inputs, symmetric."""

    plugin_id: str = ""

    @property
    @abstractmethod
    def fingerprint(self) -> str:
        """Identifies the weights the distance is computed with."""

    @abstractmethod
    def distance(self, a: torch.Tensor, b: torch.Tensor) -> float:
        """Distance between two images ``(3, H, W)`` in [0, 1]."""

    def replicate(self) -> "PerceptualMetricPlugin":
        """Independent copy for one scoring thread."""
        return copy.deepcopy(self)


class RandomFeatureDistance(PerceptualMetricPlugin):
    """Frozen random-feature stand-in for LPIPS, labelled ``not-lpips``.

    Unit-normalized activations at several VGG depths, squared differences
    averaged over space and summed over taps.
    """

    plugin_id = "not-lpips"

    def __init__(self, seed: int = NOT_LPIPS_SEED):
        self.extractor = FeatureExtractor(width_div=8, seed=seed)
        self._fingerprint = parameter_checksum(self.extractor)[:16]

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def _features(self, img: torch.Tensor) -> List[torch.Tensor]:
        h = (img.unsqueeze(0).float() - self.extractor.mean) / self.extractor.std
        taps = []
        for index, layer in enumerate(self.extractor.features):
            if index > NOT_LPIPS_TAPS[-1]:
                break
            if isinstance(layer, torch.nn.MaxPool2d) and min(h.shape[-2:]) < 2:
                break  # small images only reach the shallower taps
            h = layer(h)
            if index in NOT_LPIPS_TAPS:
                taps.append(h / (h.pow(2).sum(dim=1, keepdim=True).sqrt() + 1e-10))
        return taps

    def distance(self, a: torch.Tensor, b: torch.Tensor) -> float:
        with torch.no_grad():
            total = sum(
                (fa - fb).pow(2).sum(dim=1).mean() for fa, fb in zip(self._features(a), self._features(b))
            )
        return float(total)


class LpipsPlugin(PerceptualMetricPlugin):
    """LPIPS from the ``lpips`` package (AlexNet or VGG backbone).

    Args:
        net: ``"alex"`` or ``"vgg"``
        model_path: Optional linear-layer weight file; the package's bundled weights otherwise
    """

    def __init__(self, net: str = "alex", model_path: Optional[PathLike] = None):
        try:
            import lpips
        except ImportError:
            raise PluginError("the 'lpips' package is not installed (pip install 'realsr[lpips]')")
        if net not in ("alex", "vgg"):
            raise PluginError(f"unknown LPIPS backbone '{net}'")
        try:
            self.model = lpips.LPIPS(net=net, model_path=str(model_path) if model_path else None, verbose=False)
        except Exception as e:
            raise PluginError(f"cannot load LPIPS weights: {e}")
        self.model.eval()
        self.plugin_id = f"lpips:{net}"
        self._fingerprint = parameter_checksum(self.model.lins)[:16]

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def distance(self, a: torch.Tensor, b: torch.Tensor) -> float:
        with torch.no_grad():
            value = self.model(a.unsqueeze(0).float() * 2 - 1, b.unsqueeze(0).float() * 2 - 1)
        return max(0.0, float(value.flatten()[0]))


def load_plugin(name: Optional[str]) -> Optional[PerceptualMetricPlugin]:
    """Resolve a plugin reference.

    Args:
        name: ``None``, ``"not-lpips"``, ``"lpips"``, ``"lpips:alex"``,
            ``"lpips:vgg"`` or a path to an LPIPS linear-layer weight file

    Returns:
        Plugin instance, or ``None`` when ``name`` is ``None``

    Raises:
        PluginError: Unknown reference or unavailable backend
    """
    if name is None:
        return None
    if name == RandomFeatureDistance.plugin_id:
        return RandomFeatureDistance()
    if name in ("lpips", "lpips:alex"):
        return LpipsPlugin("alex")
    if name == "lpips:vgg":
        return LpipsPlugin("vgg")
    path = Path(name).expanduser()
    if path.is_file():
        return LpipsPlugin("vgg" if "vgg" in path.name.lower() else "alex", model_path=path)
    raise PluginError(f"unknown perceptual plugin '{name}'")


def _shave(img: torch.Tensor, border: int) -> torch.Tensor:
    if border <= 0:
        return img
    return img[..., border:-border, border:-border]


def score_pair(
    image_id: str,
    pred: torch.Tensor,
    gt: torch.Tensor,
    plugin: Optional[PerceptualMetricPlugin] = None,
    shave: int = 0,
) -> MetricRow:
    """Score one prediction against its ground truth.

    Args:
        image_id: Row identifier
        pred: Prediction ``(3, H, W)``, already 8-bit quantized
        gt: Ground truth of the same shape
        plugin: Perceptual metric; the row gets ``lpips`` only when given
        shave: Border pixels excluded from every metric
    """
    pred, gt = _shave(pred, shave), _shave(gt, shave)
    lpips_value = plugin.distance(pred, gt) if plugin is not None else None
    return MetricRow(image_id=image_id, psnr=psnr(pred, gt), ssim=ssim(pred, gt), lpips=lpips_value)


def benchmark_id(bench_dir: PathLike) -> str:
    bench_dir = Path(bench_dir)
    digest = hashlib.sha256((bench_dir / MANIFEST_NAME).read_bytes()).hexdigest()[:12]
    return f"{bench_dir.name}@{digest}"


def _eval_entries(manifest: DatasetManifest) -> List[Tuple[ManifestEntry, ManifestEntry]]:
    pairs = manifest.eval_pairs()
    if not pairs:
        raise DatasetError("benchmark has no evaluation pairs")
    missing = [inp.source_id for inp, gt in pairs if gt is None]
    if missing:
        raise DatasetError(f"missing eval_gt for: {', '.join(missing)}")
    return pairs


def _score_all(
    jobs: Sequence[Tuple[str, Callable[[], Tuple[torch.Tensor, torch.Tensor]]]],
    plugin: Optional[PerceptualMetricPlugin],
    shave: int,
    workers: int,
    on_item: Optional[Callable[[], None]],
) -> Tuple[List[MetricRow], Optional[str]]:
    """Score jobs in order; a failing plugin drops the perceptual column for every row.

    With more than one worker every scoring thread gets its own plugin replica.
    """
    warning = None
    per_thread = threading.local()

    def thread_plugin() -> Optional[PerceptualMetricPlugin]:
        if plugin is None or workers <= 1:
            return plugin
        if not hasattr(per_thread, "plugin"):
            per_thread.plugin = plugin.replicate()
        return per_thread.plugin

    def run(job):
        image_id, load = job
        pred, gt = load()
        try:
            row = score_pair(image_id, pred, gt, thread_plugin(), shave)
            failure = None
        except (PluginError, RuntimeError) as e:
            row = score_pair(image_id, pred, gt, None, shave)
            failure = f"{type(e).__name__}: {e}"
        if on_item is not None:
            on_item()
        return row, failure

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, jobs))

    rows = [row for row, _ in results]
    failures = [failure for _, failure in results if failure]
    if failures:
        warning = f"perceptual plugin failed ({failures[0]}); lpips omitted"
        rows = [row.model_copy(update={"lpips": None}) for row in rows]
    return rows, warning


def _report(rows, bench_dir: Path, manifest: DatasetManifest, ckpt: str, plugin, warning) -> MetricReport:
    return MetricReport(
        rows=rows,
        checkpoint_id=ckpt,
        benchmark_id=benchmark_id(bench_dir),
        scenario=manifest.scenario.value,
        degradation=manifest.degradation.value,
        plugin_id=plugin.plugin_id if plugin is not None and not warning else None,
        plugin_fingerprint=plugin.fingerprint if plugin is not None and not warning else None,
        warning=warning,
    )


def evaluate(
    checkpoint: Union[PathLike, Predict],
    bench_dir: PathLike,
    plugin: Optional[PerceptualMetricPlugin] = None,
    shave: int = 0,
    dump_dir: Optional[PathLike] = None,
    workers: int = 1,
    on_item: Optional[Callable[[], None]] = None,
) -> MetricReport:
    """Super-resolve every eval input and score it against its eval_gt.

    Predictions are quantized to 8 bit before scoring, so scoring the dumped
    PNGs with :func:`score_external` gives the same report.

    Args:
        checkpoint: ``sr`` checkpoint path, or any callable ``lr -> sr``
        bench_dir: Benchmark directory
        plugin: Optional perceptual metric
        shave: Border pixels excluded from the metrics
        dump_dir: Write predictions here, named like the eval inputs
        workers: Scoring threads
        on_item: Called once per scored image

    Returns:
        Metric report with one row per eval pair
    """
    bench_dir = Path(bench_dir)
    manifest = load_manifest(bench_dir)
    pairs = _eval_entries(manifest)
    if callable(checkpoint):
        predict, ckpt = checkpoint, "callable"
    else:
        predict, ckpt = Predictor(checkpoint), checkpoint_id(checkpoint)
    dump_path = Path(dump_dir) if dump_dir is not None else None

    def loader(inp: ManifestEntry, gt: ManifestEntry):
        def load():
            pred = quantize(predict(load_image(bench_dir / inp.path)))
            if dump_path is not None:
                save_image(pred, dump_path / Path(inp.path).name)
            return pred, load_image(bench_dir / gt.path)
        return load

    jobs = [(Path(inp.path).stem, loader(inp, gt)) for inp, gt in pairs]
    rows, warning = _score_all(jobs, plugin, shave, workers, on_item)
    return _report(rows, bench_dir, manifest, ckpt, plugin, warning)


def score_external(
    image_dir: PathLike,
    bench_dir: PathLike,
    plugin: Optional[PerceptualMetricPlugin] = None,
    shave: int = 0,
    workers: int = 1,
    on_item: Optional[Callable[[], None]] = None,
) -> MetricReport:
    """Score a directory of externally produced SR images against a benchmark.

    File stems must match the eval ids (the eval_input file stems).

    Raises:
        DatasetError: Missing or extra files, itemized
    """
    image_dir = Path(image_dir)
    bench_dir = Path(bench_dir)
    manifest = load_manifest(bench_dir)
    pairs = _eval_entries(manifest)
    if not image_dir.is_dir():
        raise ValidationError(f"'{image_dir}' is not a directory")

    available: Dict[str, Path] = {p.stem: p for p in list_images(image_dir)}
    expected = [Path(inp.path).stem for inp, _ in pairs]
    missing = [i for i in expected if i not in available]
    extra = sorted(set(available) - set(expected))
    if missing or extra:
        problems = []
        if missing:
            problems.append("missing: " + ", ".join(missing))
        if extra:
            problems.append("unexpected: " + ", ".join(extra))
        raise DatasetError(f"'{image_dir}' does not match the eval set ({'; '.join(problems)})")

    def loader(image_id: str, gt: ManifestEntry):
        return lambda: (load_image(available[image_id]), load_image(bench_dir / gt.path))

    jobs = [(image_id, loader(image_id, gt)) for image_id, (_, gt) in zip(expected, pairs)]
    rows, warning = _score_all(jobs, plugin, shave, workers, on_item)
    return _report(rows, bench_dir, manifest, f"external:{image_dir.name}", plugin, warning)


def _columns(report: MetricReport) -> List[str]:
    return ["psnr", "ssim", "lpips"] if report.has_lpips else ["psnr", "ssim"]


def render_report(report: MetricReport, fmt: ReportFormat = ReportFormat.TEXT) -> bytes:
    """Render a report as a text table or as delimited (CSV) text.

    Column order is PSNR, SSIM, then LPIPS when present. The delimited form
    ends with a ``mean`` row for non-empty reports and writes floats in
    shortest round-trip form.
    """
    columns = _columns(report)
    if fmt == ReportFormat.DELIMITED:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["image_id"] + columns)
        for row in report.rows:
            writer.writerow([row.image_id] + [repr(float(getattr(row, c))) for c in columns])
        if report.rows:
            means = report.aggregates()
            writer.writerow(["mean"] + [repr(float(means[c])) for c in columns])
        return buffer.getvalue().encode("utf-8")

    table = [[row.image_id] + [getattr(row, c) for c in columns] for row in report.rows]
    if report.rows:
        means = report.aggregates()
        table.append(["mean"] + [means[c] for c in columns])
    text = tabulate(table, headers=["Image"] + [HEADERS[c] for c in columns], floatfmt=".4f", tablefmt="simple")
    return (text + "\n").encode("utf-8")


def parse_delimited(data: bytes) -> MetricReport:
    """Read the delimited format back into a report (the ``mean`` row is dropped).

    Raises:
        ValidationError: Malformed header or values
    """
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty report")
    if header[:3] != ["image_id", "psnr", "ssim"] or header[3:] not in ([], ["lpips"]):
        raise ValidationError(f"unexpected report header: {','.join(header)}")
    rows = []
    for line in reader:
        if not line or line[0] == "mean":
            continue
        try:
            values = dict(zip(header[1:], (float(v) for v in line[1:])))
        except ValueError as e:
            raise ValidationError(f"bad value in report row '{line[0]}': {e}")
        rows.append(MetricRow(image_id=line[0], **values))
    return MetricReport(rows=rows)


def load_report(path: PathLike) -> MetricReport:
    """Load a report saved as JSON or in the delimited format."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read report '{path}': {e}")
    if data.lstrip().startswith(b"{"):
        try:
            return MetricReport.from_json(data.decode("utf-8"))
        except ValueError as e:
            raise ValidationError(f"malformed report '{path}': {e}")
    return parse_delimited(data)
