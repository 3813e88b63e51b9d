"""Monte Carlo studies of propagator estimation from quantized data.

One experiment fixes a data source and compares, over many independent
dither realizations and several word lengths, the operators fitted from
quantized measurements against the operators fitted from clean
measurements. The pipeline per trial:

1. Simulate (or load) the raw observable stream and keep the training
   window of T + m samples.
2. Fit one global affine map on that window so it fills the quantizer
   range up to a margin, and map the window.
3. Quantize the mapped stream sample by sample with subtractive dither
   (the transmitted signal is the raw stream; any delay embedding
   happens on the receiving side).
4. Delay-embed with depth m, split into snapshot pairs, and fit the
   reduced rank-r model plus, if requested, the rank-r full operator.
5. Record relative operator errors against the clean-data reference and
   the relative deviation of modal predictions from the clean model's
   predictions over the evaluation horizon.

The clean reference fixes the truncation rank; every quantized fit uses
that same rank so errors measure perturbation of one agreed model order
rather than rank selection jitter.

Reproducibility: each (bits, trial) cell derives its dither seed from
the master seed by hashing, so results do not depend on execution
order, and BLAS pools are pinned to one thread while fitting so reports
are byte-identical across repeat runs and worker counts.
"""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .dmd import (RankRule, SnapshotPair, build_snapshots, dmd_full,
                  dmd_reduced, rank_truncated_operator, predict_reduced,
                  recover_regularized)
from .errors import ConfigError, InsufficientDataError
from .metrics import ErrorSample, pred_rel_error_detail, rel_matrix_error, summarize
from .preprocessing import fit_affine, hankel_embed
from .quantizer import DitherStream, QuantizerSpec, quantize_matrix
from .systems import SystemSpec, TrajectoryConfig, pendulum, simulate, van_der_pol

__all__ = [
    "SourceConfig",
    "ExperimentConfig",
    "ReferenceModel",
    "SweepReport",
    "RecoveryStudy",
    "stable_trial_seed",
    "build_reference",
    "run_trial",
    "run_sweep",
    "run_recovery_study",
]

_MODES = ("full_and_reduced", "reduced_only")
_SYSTEMS = {"pendulum": pendulum, "van_der_pol": van_der_pol}


def stable_trial_seed(master_seed: int, bits: int, trial_index: int,
                      role: str = "dither") -> int:
    """Deterministic per-cell seed, independent of execution order.

    Hashes (master seed, bits, trial, role) with SHA-256 and keeps the
    first 8 digest bytes as a little-endian integer. ``role`` separates
    independent random streams belonging to the same cell.
    """
    msg = (b"qdmd-trial-v1" +
           struct.pack("<qqq", int(master_seed), int(bits), int(trial_index)) +
           role.encode("utf-8"))
    return int.from_bytes(hashlib.sha256(msg).digest()[:8], "little")


@dataclass(frozen=True)
class SourceConfig:
    """Where the observable stream comes from.

    kind = "system" simulates one of the named reference systems with
    the given trajectory settings. kind = "dataset" uses a matrix
    supplied directly (``data``), with ``path`` kept only as a label
    for report echoes. ``embedding`` is the delay depth m applied on
    the receiving side; 1 means no embedding.
    """

    kind: str = "system"
    system: str = "pendulum"
    x0: tuple | None = None
    dt: float = 0.1
    duration: float = 60.0
    substeps: int = 10
    path: str | None = None
    data: np.ndarray | None = None
    embedding: int = 100

    def __post_init__(self):
        if self.kind not in ("system", "dataset"):
            raise ConfigError(f"source kind must be system or dataset, got {self.kind!r}")
        if self.kind == "system" and self.system not in _SYSTEMS:
            raise ConfigError(
                f"system must be one of {sorted(_SYSTEMS)}, got {self.system!r}")
        if self.kind == "dataset" and self.data is None:
            raise ConfigError("dataset source needs a data matrix")
        if not isinstance(self.embedding, (int, np.integer)) or self.embedding < 1:
            raise ConfigError(
                f"embedding depth must be a positive integer, got {self.embedding!r}")

    def trajectory_config(self) -> TrajectoryConfig:
        return TrajectoryConfig(x0=self.x0, dt=self.dt, duration=self.duration,
                                substeps=self.substeps)

    def system_spec(self) -> SystemSpec:
        return _SYSTEMS[self.system]()

    def echo(self) -> dict:
        if self.kind == "system":
            return {
                "kind": "system",
                "system": self.system,
                "x0": None if self.x0 is None else [float(v) for v in self.x0],
                "dt": self.dt,
                "duration": self.duration,
                "substeps": self.substeps,
                "embedding": int(self.embedding),
            }
        return {
            "kind": "dataset",
            "path": self.path if self.path is not None else "inline",
            "shape": list(np.asarray(self.data).shape),
            "embedding": int(self.embedding),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one quantization sweep.

    ``margin`` of None resolves to half the cell width of the coarsest
    quantizer in ``bit_list``, so even the widest cells keep the mapped
    data away from the saturation edges. ``prediction_horizon`` of None
    evaluates predictions over all T training steps.
    """

    source: SourceConfig
    T: int = 500
    bit_list: tuple = (2, 3, 4, 5, 6, 7, 8)
    trials: int = 50
    master_seed: int = 0
    rank_rule: RankRule = field(default_factory=RankRule)
    quantizer_range: tuple = (-1.0, 1.0)
    margin: float | None = None
    norm: str = "spectral"
    mode: str = "full_and_reduced"
    recovery_enabled: bool = False
    prediction_horizon: int | None = None

    def __post_init__(self):
        if not isinstance(self.T, (int, np.integer)) or self.T < 2:
            raise ConfigError(f"T must be an integer >= 2, got {self.T!r}")
        bits = tuple(int(b) for b in self.bit_list)
        if len(bits) == 0 or any(b < 1 for b in bits) or len(set(bits)) != len(bits):
            raise ConfigError(f"bit_list must hold distinct positive integers, got {self.bit_list!r}")
        object.__setattr__(self, "bit_list", tuple(sorted(bits)))
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        lo, hi = (float(v) for v in self.quantizer_range)
        QuantizerSpec(lo, hi, min(bits))  # validates the range
        object.__setattr__(self, "quantizer_range", (lo, hi))
        if self.margin is not None:
            if not (np.isfinite(self.margin) and self.margin >= 0.0):
                raise ConfigError(f"margin must be non-negative, got {self.margin}")
            if 2.0 * self.margin >= hi - lo:
                raise ConfigError(f"margin {self.margin} leaves no usable range")
        if self.norm not in ("spectral", "frobenius"):
            raise ConfigError(f"norm must be spectral or frobenius, got {self.norm!r}")
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.prediction_horizon is not None:
            h = self.prediction_horizon
            if not isinstance(h, (int, np.integer)) or h < 1:
                raise ConfigError(
                    f"prediction_horizon must be a positive integer, got {h!r}")

    def quantizer_spec(self, bits: int) -> QuantizerSpec:
        lo, hi = self.quantizer_range
        return QuantizerSpec(u_min=lo, u_max=hi, bits=int(bits))

    @property
    def resolved_margin(self) -> float:
        if self.margin is not None:
            return float(self.margin)
        return 0.5 * self.quantizer_spec(min(self.bit_list)).resolution

    @property
    def resolved_horizon(self) -> int:
        return int(self.T if self.prediction_horizon is None
                   else self.prediction_horizon)

    def echo(self) -> dict:
        lo, hi = self.quantizer_range
        rule: dict = {"kind": self.rank_rule.kind}
        if self.rank_rule.kind == "fixed":
            rule["r"] = int(self.rank_rule.r)
        elif self.rank_rule.kind == "energy":
            rule["tau"] = float(self.rank_rule.tau)
        else:
            rule["cutoff"] = float(self.rank_rule.cutoff)
        return {
            "source": self.source.echo(),
            "T": int(self.T),
            "bit_list": [int(b) for b in self.bit_list],
            "trials": int(self.trials),
            "master_seed": int(self.master_seed),
            "rank_rule": rule,
            "quantizer_range": [lo, hi],
            "margin": None if self.margin is None else float(self.margin),
            "resolved_margin": self.resolved_margin,
            "norm": self.norm,
            "mode": self.mode,
            "recovery_enabled": bool(self.recovery_enabled),
            "prediction_horizon": (None if self.prediction_horizon is None
                                   else int(self.prediction_horizon)),
            "resolved_horizon": self.resolved_horizon,
            "epsilon": {str(b): self.quantizer_spec(b).resolution
                        for b in self.bit_list},
        }


@dataclass(frozen=True)
class ReferenceModel:
    """Clean-data model every quantized trial is compared against."""

    mapped_window: np.ndarray     # n x (T + m), inside the quantizer range
    pair: SnapshotPair            # clean snapshot pair, N x T
    rank: int
    reduced: object               # ReducedDMD on clean data
    full_operator: np.ndarray | None   # rank-r full operator, None in reduced_only
    x0: np.ndarray                # first embedded snapshot
    predictions: np.ndarray       # clean modal predictions, N x (H + 1)
    singular_values: np.ndarray   # leading singular values of clean Phi


def _raw_stream(cfg: ExperimentConfig) -> np.ndarray:
    src = cfg.source
    if src.kind == "system":
        raw = simulate(src.system_spec(), src.trajectory_config())
    else:
        raw = np.asarray(src.data, dtype=float)
        if raw.ndim != 2:
            raise ConfigError("dataset source must be a 2-D matrix")
    needed = cfg.T + src.embedding
    if raw.shape[1] < needed:
        raise InsufficientDataError(
            f"source provides {raw.shape[1]} samples, need T + m = {needed}")
    return raw[:, :needed]


def build_reference(cfg: ExperimentConfig) -> ReferenceModel:
    """Fit the clean-data models that anchor every trial of a sweep."""
    lo, hi = cfg.quantizer_range
    window = _raw_stream(cfg)
    amap = fit_affine(window, lo, hi, cfg.resolved_margin)
    mapped = amap.apply(window)
    emb = hankel_embed(mapped, cfg.source.embedding)
    pair = build_snapshots(emb)
    reduced = dmd_reduced(pair, cfg.rank_rule)
    full_op = None
    if cfg.mode == "full_and_reduced":
        full_op = rank_truncated_operator(pair, reduced)
    x0 = emb[:, 0].copy()
    preds = predict_reduced(reduced, x0, cfg.resolved_horizon)
    sigma = _leading_singular_values(pair.Phi)
    return ReferenceModel(mapped_window=mapped, pair=pair, rank=reduced.r,
                          reduced=reduced, full_operator=full_op, x0=x0,
                          predictions=preds, singular_values=sigma)


def _leading_singular_values(phi: np.ndarray, count: int = 10) -> np.ndarray:
    sigma = np.linalg.svd(phi, compute_uv=False)
    return sigma[:min(count, sigma.size)]


def _trial_detail(cfg: ExperimentConfig, bits: int, trial_index: int,
                  reference: ReferenceModel):
    spec = cfg.quantizer_spec(bits)
    stream = DitherStream(spec, stable_trial_seed(cfg.master_seed, bits,
                                                  trial_index, "dither"))
    quantized, saturated = quantize_matrix(spec, reference.mapped_window, stream)
    emb = hankel_embed(quantized, cfg.source.embedding)
    pair = build_snapshots(emb)
    reduced = dmd_reduced(pair, RankRule(kind="fixed", r=reference.rank))
    reduced_err = rel_matrix_error(reference.reduced.K_r, reduced.K_r, cfg.norm)
    full_err = None
    if cfg.mode == "full_and_reduced":
        full_op = rank_truncated_operator(pair, reduced)
        full_err = rel_matrix_error(reference.full_operator, full_op, cfg.norm)
    preds = predict_reduced(reduced, reference.x0, cfg.resolved_horizon)
    # column 0 of both prediction arrays is the projection of the same
    # x0; the comparison covers the propagated columns t = 1..H
    pred_err, skipped = pred_rel_error_detail(reference.predictions[:, 1:],
                                              preds[:, 1:])
    sample = ErrorSample(bits=int(bits), trial_index=int(trial_index),
                         full_matrix_rel_err=full_err,
                         reduced_matrix_rel_err=reduced_err,
                         avg_pred_rel_err=pred_err)
    return sample, saturated, skipped


def run_trial(cfg: ExperimentConfig, bits: int, trial_index: int,
              reference: ReferenceModel) -> ErrorSample:
    """Run one dither realization at one word length against the reference."""
    with threadpool_limits(limits=1):
        return _trial_detail(cfg, bits, trial_index, reference)[0]


@dataclass(frozen=True)
class SweepReport:
    """Aggregated outcome of a sweep over word lengths.

    ``samples`` maps bits to the list of successful trial samples in
    trial order; ``saturation`` and ``skipped_columns`` hold the
    matching per-trial counters; ``cell_errors`` maps "bits:trial" to
    the failure message of trials that raised. A report with no
    successful trial at all is rejected.
    """

    config: dict
    rank: int
    reference_singular_values: tuple
    samples: dict
    saturation: dict
    skipped_columns: dict
    cell_errors: dict
    recovery: dict | None = None

    def __post_init__(self):
        if not any(len(v) for v in self.samples.values()):
            raise ConfigError("sweep produced no successful trials")

    def metric_values(self, bits: int, metric: str) -> list:
        return [getattr(s, metric) for s in self.samples[bits]]

    def to_dict(self) -> dict:
        results = {}
        total_completed = 0
        total_saturated = 0
        for bits in sorted(self.samples):
            cell = self.samples[bits]
            total_completed += len(cell)
            total_saturated += int(sum(self.saturation[bits]))
            full_vals = [s.full_matrix_rel_err for s in cell]
            has_full = all(v is not None for v in full_vals) and len(cell) > 0
            reduced_vals = [s.reduced_matrix_rel_err for s in cell]
            pred_vals = [s.avg_pred_rel_err for s in cell]
            stats = {
                "full_matrix_rel_err": summarize(full_vals) if has_full else None,
                "reduced_matrix_rel_err": summarize(reduced_vals) if cell else None,
                "avg_pred_rel_err": summarize(pred_vals) if cell else None,
            }
            results[str(bits)] = {
                "trial_indices": [s.trial_index for s in cell],
                "full_matrix_rel_err": full_vals if has_full else None,
                "reduced_matrix_rel_err": reduced_vals,
                "avg_pred_rel_err": pred_vals,
                "saturation_counts": [int(v) for v in self.saturation[bits]],
                "skipped_columns": [int(v) for v in self.skipped_columns[bits]],
                "stats": stats,
            }
        requested = len(self.config["bit_list"]) * self.config["trials"]
        out = {
            "schema_version": 1,
            "kind": "sweep",
            "config": self.config,
            "rank": int(self.rank),
            "reference_singular_values": list(self.reference_singular_values),
            "results": results,
            "cell_errors": dict(sorted(self.cell_errors.items())),
            "totals": {
                "trials_requested": requested,
                "trials_completed": total_completed,
                "trials_failed": len(self.cell_errors),
                "saturated_entries": total_saturated,
            },
        }
        if self.recovery is not None:
            out["recovery"] = self.recovery
        return out


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepReport:
    """Run the full (bits x trials) grid and aggregate deterministically.

    ``threads`` parallelizes over grid cells; every cell draws its own
    seeded dither stream and BLAS pools are pinned to one thread, so the
    report content does not depend on the worker count.
    """
    if not isinstance(threads, (int, np.integer)) or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")
    with threadpool_limits(limits=1):
        reference = build_reference(cfg)
        cells = [(bits, trial) for bits in cfg.bit_list
                 for trial in range(cfg.trials)]
        outcomes: dict = {}

        def work(cell):
            bits, trial = cell
            return _trial_detail(cfg, bits, trial, reference)

        if threads == 1:
            for cell in cells:
                try:
                    outcomes[cell] = work(cell)
                except Exception as exc:  # recorded per cell, sweep continues
                    outcomes[cell] = exc
        else:
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                futures = {cell: pool.submit(work, cell) for cell in cells}
            for cell, fut in futures.items():
                err = fut.exception()
                outcomes[cell] = err if err is not None else fut.result()

        samples = {bits: [] for bits in cfg.bit_list}
        saturation = {bits: [] for bits in cfg.bit_list}
        skipped = {bits: [] for bits in cfg.bit_list}
        cell_errors = {}
        for cell in cells:  # deterministic order regardless of thread count
            bits, trial = cell
            outcome = outcomes[cell]
            if isinstance(outcome, Exception):
                cell_errors[f"{bits}:{trial}"] = f"{type(outcome).__name__}: {outcome}"
                continue
            sample, sat, skip = outcome
            samples[bits].append(sample)
            saturation[bits].append(sat)
            skipped[bits].append(skip)

        recovery = None
        if cfg.recovery_enabled:
            recovery = {str(bits): _recovery_cell(cfg, bits, reference)
                        for bits in cfg.bit_list}

    return SweepReport(config=cfg.echo(), rank=reference.rank,
                       reference_singular_values=tuple(
                           float(v) for v in reference.singular_values),
                       samples=samples, saturation=saturation,
                       skipped_columns=skipped, cell_errors=cell_errors,
                       recovery=recovery)


@dataclass(frozen=True)
class RecoveryStudy:
    """Paired comparison of plain and bias-corrected quantized estimates.

    Distances are Frobenius distances to the clean-data full operator.
    Trials whose convexity guard tripped use a fallback ridge weight;
    they are flagged and excluded from the paired means.
    """

    bits: int
    epsilon: float
    gamma_target: float
    trials: tuple            # per-trial dicts
    guard_failures: int
    mean_dist_quantized: float | None
    mean_dist_recovered: float | None

    def to_dict(self) -> dict:
        return {
            "bits": int(self.bits),
            "epsilon": float(self.epsilon),
            "gamma_target": float(self.gamma_target),
            "trials": list(self.trials),
            "guard_failures": int(self.guard_failures),
            "trials_used": len(self.trials) - int(self.guard_failures),
            "mean_dist_quantized": self.mean_dist_quantized,
            "mean_dist_recovered": self.mean_dist_recovered,
        }


def _recovery_cell(cfg: ExperimentConfig, bits: int,
                   reference: ReferenceModel) -> dict:
    return _recovery_study(cfg, bits, reference).to_dict()


def _recovery_study(cfg: ExperimentConfig, bits: int,
                    reference: ReferenceModel) -> RecoveryStudy:
    spec = cfg.quantizer_spec(bits)
    eps = spec.resolution
    clean_k = dmd_full(reference.pair).K
    records = []
    used_q = []
    used_r = []
    guard_failures = 0
    for trial in range(cfg.trials):
        stream = DitherStream(spec, stable_trial_seed(cfg.master_seed, bits,
                                                      trial, "dither"))
        quantized, saturated = quantize_matrix(spec, reference.mapped_window,
                                               stream)
        emb = hankel_embed(quantized, cfg.source.embedding)
        pair = build_snapshots(emb)
        plain = dmd_full(pair)
        rec = recover_regularized(pair, eps)
        dist_q = float(np.linalg.norm(plain.K - clean_k, "fro"))
        dist_r = float(np.linalg.norm(rec.K - clean_k, "fro"))
        if rec.guard_ok:
            used_q.append(dist_q)
            used_r.append(dist_r)
        else:
            guard_failures += 1
        records.append({
            "trial_index": trial,
            "dist_quantized": dist_q,
            "dist_recovered": dist_r,
            "guard_ok": bool(rec.guard_ok),
            "gamma_used": float(rec.gamma),
            "lambda_min": float(rec.lambda_min),
            "saturation_count": int(saturated),
        })
    return RecoveryStudy(
        bits=int(bits), epsilon=float(eps), gamma_target=-eps ** 2 / 12.0,
        trials=tuple(records), guard_failures=guard_failures,
        mean_dist_quantized=float(np.mean(used_q)) if used_q else None,
        mean_dist_recovered=float(np.mean(used_r)) if used_r else None)


def run_recovery_study(cfg: ExperimentConfig, bits: int) -> RecoveryStudy:
    """Compare plain quantized full fits with bias-corrected ones.

    Uses the same window, affine map and per-trial dither seeds as
    run_sweep would at this word length; the comparison target is the
    clean-data full least squares operator.
    """
    if bits not in cfg.bit_list:
        raise ConfigError(f"bits {bits} is not part of the configured bit_list")
    with threadpool_limits(limits=1):
        reference = build_reference(cfg)
        return _recovery_study(cfg, int(bits), reference)
