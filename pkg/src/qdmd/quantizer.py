"""Uniform mid-rise quantizer with subtractive dither.

The quantizer covers [u_min, u_max] with 2**bits equal cells of width
eps = (u_max - u_min) / 2**bits and reconstructs at cell midpoints.
Subtractive dither draws w ~ U[-eps/2, eps/2], quantizes x + w and
subtracts w again; the reconstruction error is then uniform on
[-eps/2, eps/2], zero mean, variance eps**2 / 12, and uncorrelated with
the source and across entries. Inputs outside the range are clamped to
the edge cells and counted as saturated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "QuantizerSpec",
    "DitherStream",
    "encode",
    "decode",
    "dither_quantize",
    "quantize_matrix",
    "error_stats",
]


@dataclass(frozen=True)
class QuantizerSpec:
    """Static description of a uniform quantizer.

    Attributes
    ----------
    u_min, u_max : float
        Lower and upper edge of the covered range, u_min < u_max.
    bits : int
        Word length; the quantizer has 2**bits cells.
    """

    u_min: float
    u_max: float
    bits: int

    def __post_init__(self):
        if not (np.isfinite(self.u_min) and np.isfinite(self.u_max)):
            raise ConfigError("quantizer range must be finite")
        if not self.u_max > self.u_min:
            raise ConfigError(
                f"u_max must exceed u_min, got [{self.u_min}, {self.u_max}]")
        if not isinstance(self.bits, (int, np.integer)) or self.bits < 1:
            raise ConfigError(f"bits must be a positive integer, got {self.bits!r}")

    @property
    def levels(self) -> int:
        return 2 ** int(self.bits)

    @property
    def resolution(self) -> float:
        """Cell width eps = (u_max - u_min) / 2**bits."""
        return (self.u_max - self.u_min) / self.levels


class DitherStream:
    """Reproducible stream of dither draws for one quantizer.

    Draws are i.i.d. uniform on [-eps/2, eps/2) from a PCG64 generator
    seeded with ``seed``. Successive calls consume the stream; a matrix
    request of shape (r, c) consumes r*c draws in row-major order, so a
    given (spec, seed) pair always reproduces the same dither sequence.
    """

    def __init__(self, spec: QuantizerSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def draw(self, shape) -> np.ndarray:
        half = 0.5 * self.spec.resolution
        return self._rng.uniform(-half, half, size=shape)


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ConfigError(f"{what} contains non-finite values")
    return x


def encode(spec: QuantizerSpec, x) -> np.ndarray:
    """Map values to integer cell codes in [0, 2**bits - 1].

    A value exactly on an interior cell edge belongs to the upper cell.
    Values outside [u_min, u_max) clamp to the edge codes.
    """
    x = _check_finite(x, "encode input")
    raw = np.floor((x - spec.u_min) / spec.resolution).astype(np.int64)
    return np.clip(raw, 0, spec.levels - 1)


def decode(spec: QuantizerSpec, codes) -> np.ndarray:
    """Map integer cell codes back to cell-midpoint reconstruction values."""
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() > spec.levels - 1):
        raise ConfigError(
            f"codes outside [0, {spec.levels - 1}] for a {spec.bits}-bit quantizer")
    return spec.resolution * codes.astype(float) + spec.u_min + 0.5 * spec.resolution


def dither_quantize(spec: QuantizerSpec, x, dither) -> tuple[np.ndarray, int]:
    """Subtractively dithered quantization Q(x + w) - w.

    ``dither`` must have the same shape as ``x`` and hold draws from
    [-eps/2, eps/2]. Returns the reconstruction and the number of
    entries whose dithered value fell outside the quantizer range and
    was clamped.
    """
    x = _check_finite(x, "quantizer input")
    w = np.asarray(dither, dtype=float)
    if w.shape != x.shape:
        raise ConfigError(
            f"dither shape {w.shape} does not match input shape {x.shape}")
    shifted = x + w
    raw = np.floor((shifted - spec.u_min) / spec.resolution)
    saturated = int(np.count_nonzero((raw < 0) | (raw > spec.levels - 1)))
    codes = np.clip(raw, 0, spec.levels - 1).astype(np.int64)
    return decode(spec, codes) - w, saturated


def quantize_matrix(spec: QuantizerSpec, matrix,
                    stream: DitherStream) -> tuple[np.ndarray, int]:
    """Quantize every entry of a matrix with fresh dither from ``stream``.

    Returns (reconstructed matrix, saturation count). Dither draws are
    consumed in row-major entry order.
    """
    matrix = np.asarray(matrix, dtype=float)
    if stream.spec != spec:
        raise ConfigError("dither stream was built for a different quantizer")
    w = stream.draw(matrix.shape)
    return dither_quantize(spec, matrix, w)


def error_stats(source, reconstructed) -> dict:
    """First and second order statistics of the reconstruction error.

    Returns a dict with keys ``mean``, ``variance`` (sample variance,
    ddof=1), ``source_correlation`` (Pearson correlation between source
    values and errors) and ``degenerate``. A constant source has no
    defined correlation; then ``degenerate`` is True and the
    correlation is reported as 0.0.
    """
    src = np.asarray(source, dtype=float).ravel()
    rec = np.asarray(reconstructed, dtype=float).ravel()
    if src.shape != rec.shape:
        raise ConfigError("source and reconstruction differ in size")
    if src.size < 2:
        raise ConfigError("need at least two samples for error statistics")
    err = rec - src
    src_var = float(np.var(src))
    degenerate = src_var == 0.0
    if degenerate:
        corr = 0.0
    else:
        err_var = float(np.var(err))
        if err_var == 0.0:
            corr = 0.0
        else:
            corr = float(np.corrcoef(src, err)[0, 1])
    return {
        "mean": float(np.mean(err)),
        "variance": float(np.var(err, ddof=1)),
        "source_correlation": corr,
        "degenerate": degenerate,
    }
