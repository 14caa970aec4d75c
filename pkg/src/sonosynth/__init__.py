"""sonosynth: simulated ultrasound phantoms, envelope/B-mode imaging, and
reproducible segmentation datasets with DSC/F2 evaluation."""

from .config import PipelineConfig, RunConfig, UsageError, load_run_config
from .datasets import (
    DatasetManifest,
    ExternalRecord,
    build_dataset,
    evaluate_predictions,
    generate_example,
    ingest_external,
    load_manifest,
    split_counts,
    validate_dataset,
)
from .metrics import (
    ConfusionCounts,
    EvalReport,
    aggregate,
    confusion_counts,
    dice_score,
    dsc_from_counts,
    f2_from_counts,
    f2_score,
    format_report_table,
    score_image,
)
from .phantoms import (
    ClassMask,
    GenerationConfig,
    Lesion,
    PhantomSpec,
    PlacementError,
    RegionExtent,
    ScattererField,
    place_scatterers,
    rasterize_mask,
    sample_phantom_spec,
)
from .pipeline import (
    BmodeImage,
    EnvelopeDetector,
    EnvelopeImage,
    ImageResizer,
    LogCompressor,
    MirrorPadder,
    NetworkInput,
    UnitNormalizer,
    analytic_envelope,
    detect_envelope,
    log_compress,
    make_network_input,
    mirror_pad,
    network_input_pipeline,
    normalize_unit,
    resize_bilinear,
    resize_nearest,
)
from .rf import RfFrame, TransducerConfig, pulse_waveform, synthesize_rf
from .validation import ValidationError

__version__ = "0.1.0"

__all__ = [
    "BmodeImage",
    "ClassMask",
    "ConfusionCounts",
    "DatasetManifest",
    "EnvelopeDetector",
    "EnvelopeImage",
    "EvalReport",
    "ExternalRecord",
    "GenerationConfig",
    "ImageResizer",
    "Lesion",
    "LogCompressor",
    "MirrorPadder",
    "NetworkInput",
    "PhantomSpec",
    "PipelineConfig",
    "PlacementError",
    "RegionExtent",
    "RfFrame",
    "RunConfig",
    "ScattererField",
    "TransducerConfig",
    "UnitNormalizer",
    "UsageError",
    "ValidationError",
    "aggregate",
    "analytic_envelope",
    "build_dataset",
    "confusion_counts",
    "detect_envelope",
    "dice_score",
    "dsc_from_counts",
    "evaluate_predictions",
    "f2_from_counts",
    "f2_score",
    "format_report_table",
    "generate_example",
    "ingest_external",
    "load_manifest",
    "load_run_config",
    "log_compress",
    "make_network_input",
    "mirror_pad",
    "network_input_pipeline",
    "normalize_unit",
    "place_scatterers",
    "pulse_waveform",
    "rasterize_mask",
    "resize_bilinear",
    "resize_nearest",
    "sample_phantom_spec",
    "score_image",
    "split_counts",
    "synthesize_rf",
    "validate_dataset",
]
