"""Data models for realsr entities."""

import json
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator


class KernelKind(str, Enum):
    """Resampling kernel family."""
    BICUBIC = "bicubic"
    BILINEAR = "bilinear"


class ResampleKernel(BaseModel):
    """Separable resampling kernel."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: KernelKind = KernelKind.BICUBIC
    bicubic_a: float = -0.5

    @property
    def support(self) -> float:
        """Half-width of the kernel in input pixels (before any stretching)."""
        return 2.0 if self.kind == KernelKind.BICUBIC else 1.0


class DegradationKind(str, Enum):
    """Synthetic real-world degradation operator."""
    SENSOR_NOISE = "sensor_noise"
    JPEG = "jpeg"


class DegradationRecipe(BaseModel):
    """Degradation operator plus its parameters and master seed."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DegradationKind
    sigma_8bit: float = Field(8.0, ge=0.0)
    quality: int = Field(30, ge=1, le=100)
    seed: int = Field(0, ge=0, lt=2 ** 64)

    def params(self) -> Dict[str, Any]:
        """Parameters relevant to this kind, in manifest order."""
        if self.kind == DegradationKind.SENSOR_NOISE:
            return {"sigma_8bit": self.sigma_8bit}
        return {"quality": self.quality, "subsampling": "4:2:0"}

    @property
    def short_name(self) -> str:
        """Name used in benchmark directory names."""
        return "noise" if self.kind == DegradationKind.SENSOR_NOISE else "jpeg"


class Scenario(str, Enum):
    """Benchmark scenario: domain-specific or clean super-resolution."""
    DSR = "DSR"
    CSR = "CSR"


class Role(str, Enum):
    """Role tag of an image in a benchmark manifest."""
    TRAIN_INPUT_X = "train_input_X"
    TRAIN_OUTPUT_Y = "train_output_Y"
    EVAL_INPUT = "eval_input"
    EVAL_GT = "eval_gt"
    TRAIN_PAIR_INPUT = "train_pair_input"
    TRAIN_PAIR_GT = "train_pair_gt"


MANIFEST_FORMAT = "realsr-manifest/1"
MANIFEST_COLUMNS = ("role", "path", "source_id", "recipe_kind", "params", "seed")

TRAIN_ROLES = {Role.TRAIN_INPUT_X, Role.TRAIN_OUTPUT_Y, Role.TRAIN_PAIR_INPUT, Role.TRAIN_PAIR_GT}
EVAL_ROLES = {Role.EVAL_INPUT, Role.EVAL_GT}


class ManifestEntry(BaseModel):
    """One image of a benchmark."""
    model_config = ConfigDict(extra="forbid")

    roles: List[Role]
    path: str
    source_id: str
    recipe_kind: str  # degradation kind, "bicubic" or "none"
    params: Dict[str, str] = {}
    seed: int = 0

    def has_role(self, role: Role) -> bool:
        return role in self.roles


class DatasetManifest(BaseModel):
    """Enumeration of benchmark images with roles, recipe and seeds."""
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    scale: int = 4
    degradation: DegradationKind
    master_seed: int = 0
    tool_version: str = ""
    codec: str = ""
    entries: List[ManifestEntry] = []

    def to_text(self) -> str:
        """Serialize as the tab-separated manifest file format."""
        lines = [
            f"# format={MANIFEST_FORMAT}",
            f"# tool_version={self.tool_version}",
            f"# master_seed={self.master_seed}",
            f"# scenario={self.scenario.value}",
            f"# scale={self.scale}",
            f"# degradation={self.degradation.value}",
            f"# codec={self.codec}",
            "\t".join(MANIFEST_COLUMNS),
        ]
        for entry in self.entries:
            params = ";".join(f"{k}={v}" for k, v in entry.params.items())
            lines.append("\t".join([
                "+".join(role.value for role in entry.roles),
                entry.path,
                entry.source_id,
                entry.recipe_kind,
                params,
                str(entry.seed),
            ]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        """Parse the tab-separated manifest file format.

        Raises:
            ValueError: Malformed header or rows
        """
        header: Dict[str, str] = {}
        entries: List[ManifestEntry] = []
        for line_no, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
                continue
            fields = line.split("\t")
            if fields == list(MANIFEST_COLUMNS):
                continue
            if len(fields) != len(MANIFEST_COLUMNS):
                raise ValueError(f"line {line_no}: expected {len(MANIFEST_COLUMNS)} fields, got {len(fields)}")
            roles, path, source_id, kind, params, seed = fields
            param_map = dict(item.split("=", 1) for item in params.split(";") if item)
            entries.append(ManifestEntry(
                roles=[Role(r) for r in roles.split("+")],
                path=path,
                source_id=source_id,
                recipe_kind=kind,
                params=param_map,
                seed=int(seed),
            ))
        if header.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"unsupported manifest format: {header.get('format')!r}")
        return cls(
            scenario=Scenario(header["scenario"]),
            scale=int(header["scale"]),
            degradation=DegradationKind(header["degradation"]),
            master_seed=int(header["master_seed"]),
            tool_version=header.get("tool_version", ""),
            codec=header.get("codec", ""),
            entries=entries,
        )

    def with_role(self, role: Role) -> List[ManifestEntry]:
        """Entries carrying a role tag, in manifest order."""
        return [e for e in self.entries if e.has_role(role)]

    def eval_pairs(self) -> List[Tuple[ManifestEntry, ManifestEntry]]:
        """(eval_input, eval_gt) entries matched by source id, in input order."""
        gts = {e.source_id: e for e in self.with_role(Role.EVAL_GT)}
        return [(e, gts.get(e.source_id)) for e in self.with_role(Role.EVAL_INPUT)]

    def train_pairs(self) -> List[Tuple[ManifestEntry, ManifestEntry]]:
        """(train_pair_input, train_pair_gt) entries matched by source id."""
        gts = {e.source_id: e for e in self.with_role(Role.TRAIN_PAIR_GT)}
        return [(e, gts[e.source_id]) for e in self.with_role(Role.TRAIN_PAIR_INPUT) if e.source_id in gts]


class LossWeights(BaseModel):
    """Weights of the adversarial, cycle and pixel terms."""
    model_config = ConfigDict(extra="forbid")

    lambda_cyc: float = Field(10.0, ge=0.0)
    lambda_gan: float = Field(0.005, ge=0.0)
    eta_l1: float = Field(0.01, ge=0.0)


class LossReport(BaseModel):
    """Named scalar loss components and their weighted total."""

    components: Dict[str, float]
    weights: Dict[str, float]
    total: float

    _tensor: Optional[torch.Tensor] = PrivateAttr(default=None)

    @property
    def tensor(self) -> torch.Tensor:
        """Differentiable total, when the report was built from tensors."""
        if self._tensor is None:
            return torch.tensor(self.total, dtype=torch.float64)
        return self._tensor

    def to_log_line(self, step: int, lr: float, extra: Optional[Dict[str, float]] = None) -> str:
        """One JSON line for the training log.

        Args:
            step: Optimizer step the losses belong to
            lr: Learning rate used at that step
            extra: Additional named values (discriminator losses)
        """
        record: Dict[str, Any] = {"step": step, "lr": lr}
        record.update(self.components)
        if extra:
            record.update(extra)
        record["total"] = self.total
        return json.dumps(record, sort_keys=False)


class Stage(str, Enum):
    DDL = "ddl"
    SR = "sr"


class TrainMode(str, Enum):
    """Stage-2 input construction (ours plus the ablation variants)."""
    OURS = "ours"
    BASELINE = "baseline"
    CLEAN_INPUT = "clean_input"
    LR_SUPERVISION = "lr_supervision"
    SUPERVISED = "supervised"


class Preset(str, Enum):
    DESK = "desk"
    FULL = "full"


class DdlGan(str, Enum):
    LOGISTIC = "logistic"
    LEAST_SQUARES = "least_squares"


class TrainConfig(BaseModel):
    """Hyperparameters of one training stage."""
    model_config = ConfigDict(extra="forbid")

    stage: Stage
    mode: TrainMode = TrainMode.OURS
    preset: Preset = Preset.DESK
    seed: int = Field(0, ge=0)

    lr: float = Field(gt=0.0)
    beta1: float = Field(ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    batch_size: int = Field(ge=1)
    hr_crop: int = Field(ge=16)
    scale: int = Field(4, ge=1)
    epochs: int = Field(200, ge=1)
    iterations: int = Field(50000, ge=1)
    total_steps: Optional[int] = Field(None, ge=1)
    checkpoint_every: int = Field(1000, ge=1)
    log_every: int = Field(1, ge=1)
    ddl_gan: DdlGan = DdlGan.LOGISTIC
    weights: LossWeights = LossWeights()
    materialize_pairs: bool = False
    flip: bool = True
    workers: int = Field(1, ge=1)

    @property
    def lr_crop(self) -> int:
        return self.hr_crop // self.scale

    @property
    def reference_only(self) -> bool:
        """Supervised runs use the ground-truth degradation and are upper bounds only."""
        return self.mode == TrainMode.SUPERVISED

    @model_validator(mode="after")
    def _check_stage_mode(self) -> "TrainConfig":
        if self.stage == Stage.DDL and self.mode != TrainMode.OURS:
            raise ValueError(f"mode '{self.mode.value}' is only valid for stage 'sr'")
        if self.hr_crop % self.scale:
            raise ValueError(f"hr_crop {self.hr_crop} must be divisible by scale {self.scale}")
        return self


class CheckpointHeader(BaseModel):
    """Metadata block stored at the head of every checkpoint file."""
    model_config = ConfigDict(extra="forbid")

    format_version: int = 1
    stage: Stage
    mode: TrainMode = TrainMode.OURS
    preset: Preset
    step: int = 0
    architectures: Dict[str, str]
    config: Dict[str, Any] = {}


class MetricRow(BaseModel):
    """Scores of one evaluated image."""
    model_config = ConfigDict(extra="forbid")

    image_id: str
    psnr: float
    ssim: float
    lpips: Optional[float] = None


class MetricReport(BaseModel):
    """Per-image and aggregate quality scores with provenance."""
    model_config = ConfigDict(extra="forbid")

    rows: List[MetricRow] = []
    checkpoint_id: str = ""
    benchmark_id: str = ""
    scenario: str = ""
    degradation: str = ""
    plugin_id: Optional[str] = None
    plugin_fingerprint: Optional[str] = None
    warning: Optional[str] = None

    @field_validator("rows")
    @classmethod
    def _lpips_all_or_none(cls, rows: List[MetricRow]) -> List[MetricRow]:
        present = {row.lpips is not None for row in rows}
        if len(present) > 1:
            raise ValueError("lpips must be present on every row or on none")
        return rows

    @property
    def has_lpips(self) -> bool:
        return bool(self.rows) and self.rows[0].lpips is not None

    def to_json(self) -> str:
        """Serialize to JSON; infinite PSNR is written as ``Infinity``."""
        return json.dumps(self.model_dump(mode="python"), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls.model_validate(json.loads(text))

    def aggregates(self) -> Dict[str, float]:
        """Arithmetic mean of every metric column."""
        if not self.rows:
            return {}
        n = len(self.rows)
        means = {
            "psnr": sum(r.psnr for r in self.rows) / n,
            "ssim": sum(r.ssim for r in self.rows) / n,
        }
        if self.has_lpips:
            means["lpips"] = sum(r.lpips for r in self.rows) / n
        return means
