"""Range normalization and delay embedding.

Observables are mapped into the quantizer range by one global affine
map (the same scalar shift and scale for every observable, so relative
amplitudes survive), and optionally lifted by stacking m consecutive
snapshots into each column (a block Hankel arrangement).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError, ShapeError

__all__ = ["AffineMap", "fit_affine", "hankel_embed"]


@dataclass(frozen=True)
class AffineMap:
    """Global affine normalization y = (x + shift) / scale.

    ``scale`` is strictly positive so the map is invertible and
    orientation preserving.
    """

    shift: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.shift) and np.isfinite(self.scale)):
            raise ConfigError("affine map parameters must be finite")
        if self.scale <= 0.0:
            raise ConfigError(f"scale must be positive, got {self.scale}")

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) + self.shift) / self.scale

    def invert(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.scale - self.shift


def fit_affine(data, u_min: float, u_max: float, margin: float = 0.0) -> AffineMap:
    """Fit the affine map sending ``data`` onto [u_min+margin, u_max-margin].

    The extreme values of ``data`` land exactly on the margin-shrunk
    interval ends. Constant data cannot fix a scale; it is sent to the
    interval midpoint with scale 1. Fit the map on training data only,
    then reuse it for anything that must live in the same range.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise InsufficientDataError("cannot fit an affine map to empty data")
    if not np.all(np.isfinite(data)):
        raise ConfigError("affine fit input contains non-finite values")
    if not np.isfinite(margin) or margin < 0.0:
        raise ConfigError(f"margin must be non-negative, got {margin}")
    if u_max - u_min <= 2.0 * margin:
        raise ConfigError(
            f"margin {margin} leaves no room inside [{u_min}, {u_max}]")
    lo = u_min + margin
    hi = u_max - margin
    dmin = float(data.min())
    dmax = float(data.max())
    if dmax == dmin:
        return AffineMap(shift=0.5 * (lo + hi) - dmin, scale=1.0)
    scale = (dmax - dmin) / (hi - lo)
    shift = lo * scale - dmin
    return AffineMap(shift=shift, scale=scale)


def hankel_embed(trajectory, m: int) -> np.ndarray:
    """Stack m consecutive snapshots into each column.

    For an n x L trajectory the result is (n*m) x (L - m + 1) with
    column t equal to the vertical stack of columns t, t+1, ..., t+m-1
    of the input. m = 1 returns a copy of the input.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2:
        raise ShapeError(f"trajectory must be 2-D, got shape {traj.shape}")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ConfigError(f"embedding depth must be a positive integer, got {m!r}")
    n, length = traj.shape
    if length < m:
        raise InsufficientDataError(
            f"need at least m={m} snapshots to embed, got {length}")
    cols = length - m + 1
    return np.vstack([traj[:, k:k + cols] for k in range(m)])
