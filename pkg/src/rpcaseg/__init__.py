"""Background subtraction for image sequences via robust PCA.

Frames are fused into a texture/color data matrix, decomposed into
low-rank background plus sparse foreground, and the sparse part is cleaned
into binary masks. See the ``cli`` module for the command-line front end.
"""

from .errors import RpcasegError
from .evaluation import ConfusionMatrix, EvalReport, confusion, f_measure, report
from .experiments import (
    ExperimentKind,
    SweepResult,
    SweepRow,
    best_configuration,
    group_sequences,
    run_sweep,
    segment_frames,
    synth_generate,
    synth_sequence,
)
from .features import FeatureMatrix, assemble_matrix, fuse_layers, lbp
from .imgio import (
    FrameEntry,
    SequenceKind,
    SequenceManifest,
    load_image,
    load_manifest,
    load_mask,
    save_mask,
)
from .postprocess import PostprocessConfig, postprocess
from .preprocess import PipelineKind, equalize_histogram, gaussian_blur, run_pipeline
from .rpca import (
    Algorithm,
    Decomposition,
    SolverConfig,
    default_lambda,
    partial_svd,
    soft_threshold,
    solve,
    svt,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "ConfusionMatrix",
    "Decomposition",
    "EvalReport",
    "ExperimentKind",
    "FeatureMatrix",
    "FrameEntry",
    "PipelineKind",
    "PostprocessConfig",
    "RpcasegError",
    "SequenceKind",
    "SequenceManifest",
    "SolverConfig",
    "SweepResult",
    "SweepRow",
    "assemble_matrix",
    "best_configuration",
    "confusion",
    "default_lambda",
    "equalize_histogram",
    "f_measure",
    "fuse_layers",
    "gaussian_blur",
    "group_sequences",
    "lbp",
    "load_image",
    "load_manifest",
    "load_mask",
    "partial_svd",
    "postprocess",
    "report",
    "run_pipeline",
    "run_sweep",
    "save_mask",
    "segment_frames",
    "soft_threshold",
    "solve",
    "svt",
    "synth_generate",
    "synth_sequence",
]
