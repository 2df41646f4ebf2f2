"""liftkit: skeletal motion images plus a question-conditioned transformer
for exercise detection and repetition counting.

The pipeline runs in three stages, each usable on its own:

1. `skeleton` / `motion_image`: load 3D pose sequences and encode them into
   fixed-size motion images.
2. `labels` / `model` / `training`: normalize free-text exercise labels into
   weighted multi-hot targets and train the from-scratch transformer.
3. `metrics`: once-off-by-one counting accuracy, partial-credit detection,
   and report files with plots.

`synthgen` provides a self-checking synthetic dataset so everything above is
exercisable without recorded data; `cli` wires the stages into subcommands.
"""
from .errors import (
    ConversionError,
    DurationError,
    FormatError,
    LiftError,
    NormalizationError,
    ParseError,
    SchemaError,
    TrainingError,
    ValidationError,
)
from .labels import (
    Label,
    ManifestEntry,
    QASample,
    Vocabulary,
    build_vocabulary,
    encode_target,
    load_categories,
    make_qa_samples,
    normalize_label,
    normalize_question,
    read_manifest,
    word_weight,
    write_manifest,
)
from .metrics import (
    EvalRecord,
    MetricsReport,
    build_report,
    detection_f1,
    exact_match,
    mae,
    obo,
    partial_credit,
    read_records,
    save_report,
    write_records,
)
from .model import (
    Model,
    ModelConfig,
    build_lexicon,
    extract_patches,
    load_checkpoint,
    loss,
    loss_batch,
    predict_count,
    predict_detection,
    save_checkpoint,
    softmax,
    tokenize,
    top_class,
)
from .motion_image import (
    EncoderConfig,
    MotionImage,
    encode,
    load_image,
    save_image,
)
from .skeleton import (
    MediapipeSequence,
    SkeletonSequence,
    load_sequence,
    mediapipe_to_h36m,
    save_mediapipe_sequence,
    save_sequence,
)
from .synthgen import PRIMITIVES, SynthSpec, count_peaks, gen_dataset, gen_motion
from .training import TrainConfig, TrainResult, prepare_samples, split_dataset, train

__version__ = "0.1.0"

__all__ = [
    "ConversionError", "DurationError", "FormatError", "LiftError",
    "NormalizationError", "ParseError", "SchemaError", "TrainingError",
    "ValidationError",
    "Label", "ManifestEntry", "QASample", "Vocabulary", "build_vocabulary",
    "encode_target", "load_categories", "make_qa_samples", "normalize_label",
    "normalize_question", "read_manifest", "word_weight", "write_manifest",
    "EvalRecord", "MetricsReport", "build_report", "detection_f1",
    "exact_match", "mae", "obo", "partial_credit", "read_records",
    "save_report", "write_records",
    "Model", "ModelConfig", "build_lexicon", "extract_patches",
    "load_checkpoint", "loss", "loss_batch", "predict_count",
    "predict_detection", "save_checkpoint", "softmax", "tokenize", "top_class",
    "EncoderConfig", "MotionImage", "encode", "load_image", "save_image",
    "MediapipeSequence", "SkeletonSequence", "load_sequence",
    "mediapipe_to_h36m", "save_mediapipe_sequence", "save_sequence",
    "PRIMITIVES", "SynthSpec", "count_peaks", "gen_dataset", "gen_motion",
    "TrainConfig", "TrainResult", "prepare_samples", "split_dataset", "train",
    "__version__",
]
