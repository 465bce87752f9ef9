"""Core functionality for realsr."""

from .config import ConfigManager, dump_train_config
from .degrade import (
    BenchmarkPlan,
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
from .evaluate import (
    ReportFormat,
    evaluate,
    load_plugin,
    load_report,
    parse_delimited,
    render_report,
    score_external,
)
from .models import *
from .train import Predictor, infer, train_ddl, train_sr
from .weights import WeightsClient, list_cached

__all__ = [
    'ConfigManager',
    'dump_train_config',
    'BenchmarkPlan',
    'BenchmarkSources',
    'apply_jpeg',
    'apply_sensor_noise',
    'build_training_sets',
    'derive_seed',
    'load_manifest',
    'make_csr_eval_pair',
    'make_dsr_eval_pair',
    'write_benchmark',
    'ReportFormat',
    'evaluate',
    'load_plugin',
    'load_report',
    'parse_delimited',
    'render_report',
    'score_external',
    'Predictor',
    'infer',
    'train_ddl',
    'train_sr',
    'WeightsClient',
    'list_cached',
    'DatasetManifest',
    'DegradationKind',
    'DegradationRecipe',
    'LossReport',
    'LossWeights',
    'MetricReport',
    'MetricRow',
    'Preset',
    'Role',
    'Scenario',
    'Stage',
    'TrainConfig',
    'TrainMode',
]
