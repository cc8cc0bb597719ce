"""Automated seed quality screening.

Tray photos are segmented into per-seed crops, a small CNN classifies each
seed into four quality classes, a conditional GAN balances skewed training
sets, and a batch active-learning loop (entropy ranking + k-means batch
diversification) concentrates human annotation effort where the model is
uncertain.  An HTTP service exposes each cycle's batch to a browser
annotation UI.
"""

from .dataset import (
    CANONICAL_CLASSES,
    IMPURE,
    PURE,
    BalancingPlan,
    ClassStats,
    Dataset,
    DatasetError,
    ImageRecord,
    balancing_plan,
    check_pair_integrity,
    class_stats,
    load_manifest,
    load_pixels,
    physical_purity_map,
    save_manifest,
    stratified_split,
    strip_labels,
)
from .segmentation import SeedCrop, SegmentationConfig, TrayImage, pair_views, segment_tray
from .classifier import (
    ClassifierModel,
    EvalReport,
    ModelSpec,
    TrainConfig,
    evaluate,
    fuse_pair,
    init_model,
    load_model,
    save_model,
    train,
)
from .acquisition import (
    AcquisitionBatch,
    AcquisitionConfig,
    acquire_batch,
    kmeans,
    predictive_entropy,
    top_k_entropy,
)
from .cgan import GanConfig, augment_dataset, interpolate, load_gan, sample, save_gan, train_cgan
from .journal import (LabelEvent, journal_append, journal_repair, journal_replay,
                      replay_partition)
from .oracle import OracleConfig, oracle_annotator, oracle_from_dataset, simulated_annotate
from .loop import (
    CycleRecord,
    LoopConfig,
    LoopState,
    resume,
    run,
    run_cycle,
    start_run,
)

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_CLASSES",
    "IMPURE",
    "PURE",
    "BalancingPlan",
    "ClassStats",
    "Dataset",
    "DatasetError",
    "ImageRecord",
    "balancing_plan",
    "check_pair_integrity",
    "class_stats",
    "load_manifest",
    "load_pixels",
    "physical_purity_map",
    "save_manifest",
    "stratified_split",
    "strip_labels",
    "SeedCrop",
    "SegmentationConfig",
    "TrayImage",
    "pair_views",
    "segment_tray",
    "ClassifierModel",
    "EvalReport",
    "ModelSpec",
    "TrainConfig",
    "evaluate",
    "fuse_pair",
    "init_model",
    "load_model",
    "save_model",
    "train",
    "AcquisitionBatch",
    "AcquisitionConfig",
    "acquire_batch",
    "kmeans",
    "predictive_entropy",
    "top_k_entropy",
    "GanConfig",
    "augment_dataset",
    "interpolate",
    "load_gan",
    "sample",
    "save_gan",
    "train_cgan",
    "LabelEvent",
    "journal_append",
    "journal_repair",
    "journal_replay",
    "replay_partition",
    "OracleConfig",
    "oracle_annotator",
    "oracle_from_dataset",
    "simulated_annotate",
    "CycleRecord",
    "LoopConfig",
    "LoopState",
    "resume",
    "run",
    "run_cycle",
    "start_run",
    "__version__",
]
