"""Error metrics and summary statistics for estimation studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError, ShapeError

__all__ = [
    "ErrorSample",
    "rel_matrix_error",
    "avg_pred_rel_error",
    "pred_rel_error_detail",
    "summarize",
]

_NORMS = ("spectral", "frobenius")


@dataclass(frozen=True)
class ErrorSample:
    """Errors of one Monte Carlo trial at one word length.

    ``full_matrix_rel_err`` is None when the trial only fitted the
    reduced operator. All recorded errors are finite and non-negative.
    """

    bits: int
    trial_index: int
    full_matrix_rel_err: float | None
    reduced_matrix_rel_err: float
    avg_pred_rel_err: float

    def __post_init__(self):
        for name in ("full_matrix_rel_err", "reduced_matrix_rel_err",
                     "avg_pred_rel_err"):
            v = getattr(self, name)
            if v is None:
                if name == "full_matrix_rel_err":
                    continue
                raise ConfigError(f"{name} must be a number")
            if not np.isfinite(v) or v < 0.0:
                raise ConfigError(f"{name} must be finite and non-negative, got {v}")


def _norm(mat: np.ndarray, kind: str) -> float:
    if kind == "spectral":
        return float(np.linalg.norm(mat, 2))
    return float(np.linalg.norm(mat, "fro"))


def rel_matrix_error(reference, estimate, norm: str = "spectral") -> float:
    """Relative operator error ||estimate - reference|| / ||reference||."""
    if norm not in _NORMS:
        raise ConfigError(f"norm must be one of {_NORMS}, got {norm!r}")
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    if ref.ndim != 2 or ref.shape != est.shape:
        raise ShapeError(
            f"matrices must share a 2-D shape, got {ref.shape} and {est.shape}")
    denom = _norm(ref, norm)
    if denom == 0.0:
        num = _norm(est, norm)
        if num == 0.0:
            return 0.0
        raise ConfigError("reference matrix is zero, relative error undefined")
    return _norm(est - ref, norm) / denom


def pred_rel_error_detail(reference, prediction,
                          floor_tol: float = 1e-12) -> tuple[float, int]:
    """Column-averaged relative prediction error plus skip count.

    Column t contributes ||prediction[:, t] - reference[:, t]||_2 /
    ||reference[:, t]||_2. Columns whose reference norm is at or below
    ``floor_tol`` carry no usable scale; they are skipped and counted.
    """
    ref = np.asarray(reference, dtype=float)
    pred = np.asarray(prediction, dtype=float)
    if ref.ndim != 2 or ref.shape != pred.shape:
        raise ShapeError(
            f"trajectories must share a 2-D shape, got {ref.shape} and {pred.shape}")
    if ref.shape[1] == 0:
        raise InsufficientDataError("no prediction columns to compare")
    if not (np.isfinite(floor_tol) and floor_tol >= 0.0):
        raise ConfigError(f"floor_tol must be non-negative, got {floor_tol}")
    scales = np.linalg.norm(ref, axis=0)
    keep = scales > floor_tol
    skipped = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise InsufficientDataError(
            "every reference column is below floor_tol, error undefined")
    diffs = np.linalg.norm(pred[:, keep] - ref[:, keep], axis=0)
    return float(np.mean(diffs / scales[keep])), skipped


def avg_pred_rel_error(reference, prediction, floor_tol: float = 1e-12) -> float:
    """Column-averaged relative prediction error (see pred_rel_error_detail)."""
    return pred_rel_error_detail(reference, prediction, floor_tol)[0]


def summarize(values) -> dict:
    """Box plot statistics of a sample.

    Quartiles use linear interpolation; whiskers reach the most extreme
    sample within 1.5 IQR of the quartiles; everything beyond the
    whiskers is listed in ``outliers`` in ascending order.
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise InsufficientDataError("cannot summarize an empty sample")
    if not np.all(np.isfinite(vals)):
        raise ConfigError("summary input contains non-finite values")
    # sort first so the statistics depend only on the multiset of values,
    # not on summation order
    vals = np.sort(vals)
    q1, med, q3 = (float(v) for v in
                   np.percentile(vals, [25.0, 50.0, 75.0], method="linear"))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    outliers = np.sort(vals[(vals < lo_fence) | (vals > hi_fence)])
    return {
        "count": int(vals.size),
        "mean": float(vals.mean()),
        "median": med,
        "q1": q1,
        "q3": q3,
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "outliers": [float(v) for v in outliers],
    }
