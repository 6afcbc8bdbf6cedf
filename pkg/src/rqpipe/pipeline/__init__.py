"""Experiment orchestration: codecs, configs, manifests, runner, reports."""

from .codecs import ExternalCodec, MockCodec, mock_encode_decode, quant_step
from .config import (
    CTC_SEQUENCES,
    DEFAULT_QP_PAIRS,
    HALF_RES_QP_OFFSET,
    ExperimentConfig,
    MethodConfig,
    PostprocConfig,
    QpPair,
    SequenceConfig,
    SequencePreset,
    load_experiment,
)
from .manifest import JobRecord, RunManifest, sha256_file
from .report import ReportBundle, assemble_report, dump_patch
from .runner import run_experiment

__all__ = [
    "CTC_SEQUENCES",
    "DEFAULT_QP_PAIRS",
    "HALF_RES_QP_OFFSET",
    "ExperimentConfig",
    "ExternalCodec",
    "JobRecord",
    "MethodConfig",
    "MockCodec",
    "PostprocConfig",
    "QpPair",
    "ReportBundle",
    "RunManifest",
    "SequenceConfig",
    "SequencePreset",
    "assemble_report",
    "dump_patch",
    "load_experiment",
    "mock_encode_decode",
    "quant_step",
    "run_experiment",
    "sha256_file",
]
