"""Dynamic mode decomposition from dither-quantized measurements.

Estimate linear propagators (full, reduced, delay-embedded) from
snapshot data that passed through a uniform quantizer with subtractive
dither, quantify how word length moves the estimates, and undo the
quantization-induced ridge bias where that is well posed.
"""

__version__ = "0.1.0"

from .dmd import (FullDMD, RankRule, RecoveryResult, ReducedDMD, SnapshotPair,
                  build_snapshots, dmd_full, dmd_reduced,
                  objective_decomposition_check, predict_full, predict_reduced,
                  rank_truncated_operator, recover_regularized, ridge_dmd)
from .errors import (ConfigError, DivergenceError, FileFormatError,
                     IllConditionedWarning, InsufficientDataError, QdmdError,
                     RankError, ShapeError)
from .experiment import (ExperimentConfig, RecoveryStudy, ReferenceModel,
                         SourceConfig, SweepReport, build_reference,
                         run_recovery_study, run_sweep, run_trial,
                         stable_trial_seed)
from .metrics import (ErrorSample, avg_pred_rel_error, pred_rel_error_detail,
                      rel_matrix_error, summarize)
from .preprocessing import AffineMap, fit_affine, hankel_embed
from .quantizer import (DitherStream, QuantizerSpec, decode, dither_quantize,
                        encode, error_stats, quantize_matrix)
from .systems import (SystemSpec, TrajectoryConfig, linear_system, pendulum,
                      simulate, van_der_pol, vector_field)
from .dataio import read_matrix, read_report, write_matrix, write_report

__all__ = [
    "__version__",
    # errors
    "QdmdError", "ConfigError", "ShapeError", "InsufficientDataError",
    "RankError", "DivergenceError", "FileFormatError", "IllConditionedWarning",
    # quantizer
    "QuantizerSpec", "DitherStream", "encode", "decode", "dither_quantize",
    "quantize_matrix", "error_stats",
    # preprocessing
    "AffineMap", "fit_affine", "hankel_embed",
    # systems
    "SystemSpec", "TrajectoryConfig", "pendulum", "van_der_pol",
    "linear_system", "vector_field", "simulate",
    # dmd
    "SnapshotPair", "FullDMD", "ReducedDMD", "RankRule", "RecoveryResult",
    "build_snapshots", "dmd_full", "dmd_reduced", "rank_truncated_operator",
    "predict_full", "predict_reduced", "ridge_dmd", "recover_regularized",
    "objective_decomposition_check",
    # metrics
    "ErrorSample", "rel_matrix_error", "avg_pred_rel_error",
    "pred_rel_error_detail", "summarize",
    # experiment
    "SourceConfig", "ExperimentConfig", "ReferenceModel", "SweepReport",
    "RecoveryStudy", "stable_trial_seed", "build_reference", "run_trial",
    "run_sweep", "run_recovery_study",
    # dataio
    "read_matrix", "write_matrix", "read_report", "write_report",
]
