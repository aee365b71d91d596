"""Underwater image enhancement: quality scoring, a U-Net GAN, and metrics.

The pieces compose in pipeline order: ``imagecore`` handles decode/resize
into float RGB arrays, ``data`` scans labeled or paired folder trees,
``nets`` holds the generator and classifier with seeded init and
checkpointing, ``losses`` defines the six composite training objectives,
``training`` runs the sessions, ``metrics`` scores the results, and
``cli`` exposes it all as subcommands.
"""

from .errors import (
    AquaganError,
    CheckpointError,
    DataError,
    DecodeError,
    NumericError,
    ShapeError,
    SpecMismatchError,
)
from .imagecore import (
    as_image_f,
    decode_image,
    encode_image,
    load_image_resized,
    quantize,
    resize_to,
    to_float,
)
from .losses import (
    VARIANTS,
    LossVariant,
    LossWeights,
    angular_loss,
    composite_loss,
    gdl_loss,
    get_variant,
    l1_loss,
    l2_loss,
)
from .metrics import (
    ConfusionCounts,
    MetricReport,
    MetricRow,
    UiqmConfig,
    build_report,
    confusion_metrics,
    count_confusion,
    psnr,
    ssim,
    uicm,
    uiconm,
    uiqm,
    uism,
)
from .nets import (
    ClassifierSpec,
    Generator,
    GeneratorSpec,
    SmallCnnClassifier,
    build_classifier,
    init_params,
    load_checkpoint,
    register_backbone,
    restore,
    save_checkpoint,
    state_checksum,
)
from .data import SplitSpec, scan_paired, scan_unpaired, split
from .training import TrainConfig, evaluate_epoch, train_classifier, train_gan

__version__ = "0.1.0"

__all__ = [
    "AquaganError",
    "CheckpointError",
    "ClassifierSpec",
    "ConfusionCounts",
    "DataError",
    "DecodeError",
    "Generator",
    "GeneratorSpec",
    "LossVariant",
    "LossWeights",
    "MetricReport",
    "MetricRow",
    "NumericError",
    "ShapeError",
    "SmallCnnClassifier",
    "SpecMismatchError",
    "SplitSpec",
    "TrainConfig",
    "UiqmConfig",
    "VARIANTS",
    "angular_loss",
    "as_image_f",
    "build_classifier",
    "build_report",
    "composite_loss",
    "confusion_metrics",
    "count_confusion",
    "decode_image",
    "encode_image",
    "evaluate_epoch",
    "gdl_loss",
    "get_variant",
    "init_params",
    "l1_loss",
    "l2_loss",
    "load_checkpoint",
    "load_image_resized",
    "psnr",
    "quantize",
    "register_backbone",
    "resize_to",
    "restore",
    "save_checkpoint",
    "scan_paired",
    "scan_unpaired",
    "split",
    "ssim",
    "state_checksum",
    "to_float",
    "train_classifier",
    "train_gan",
    "uicm",
    "uiconm",
    "uiqm",
    "uism",
]
