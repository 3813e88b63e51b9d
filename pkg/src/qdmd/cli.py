"""Command line front end.

Subcommands: simulate, quantize, estimate, sweep, recover, report.
Every command prints its resolved configuration (including derived
quantizer cell widths where applicable) before doing work, echoes the
seed it will use, and maps failures to stable exit codes:

0  success
2  configuration or input-format problem
3  simulated trajectory diverged
4  sweep finished but some trials failed
5  bias removal infeasible (convexity guard tripped)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import read_matrix, read_report, write_matrix, write_report
from .dmd import (RankRule, SnapshotPair, dmd_full, dmd_reduced,
                  recover_regularized, ridge_dmd)
from .errors import DivergenceError, QdmdError
from .experiment import ExperimentConfig, SourceConfig, run_sweep
from .preprocessing import fit_affine
from .quantizer import DitherStream, QuantizerSpec, error_stats, quantize_matrix
from .systems import TrajectoryConfig, linear_system, pendulum, simulate, van_der_pol

__all__ = ["main", "entrypoint"]

_SYSTEM_FACTORIES = {"pendulum": pendulum, "van_der_pol": van_der_pol}

_CONFIG_KEYS = {
    "source", "T", "bit_list", "trials", "master_seed", "rank_rule",
    "quantizer_range", "margin", "norm", "mode", "recovery_enabled",
    "prediction_horizon",
}
_SOURCE_KEYS = {"kind", "system", "x0", "dt", "duration", "substeps", "path",
                "embedding"}


def _print_config(payload: dict) -> None:
    print("resolved config:")
    print(json.dumps(payload, sort_keys=True, indent=2, default=str))


def _parse_x0(text: str | None):
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise QdmdError(f"cannot parse initial state {text!r}, expected "
                        "comma-separated numbers") from None


def _rank_rule_from_dict(d: dict) -> RankRule:
    if not isinstance(d, dict) or "kind" not in d:
        raise QdmdError("rank_rule must be an object with a 'kind' key")
    kind = d["kind"]
    extra = set(d) - {"kind", "r", "tau", "cutoff"}
    if extra:
        raise QdmdError(f"unknown rank_rule keys: {sorted(extra)}")
    if kind == "fixed":
        return RankRule(kind="fixed", r=d.get("r"))
    if kind == "energy":
        return RankRule(kind="energy", tau=d.get("tau", 0.9999))
    return RankRule(kind=kind, cutoff=d.get("cutoff"))


def _source_from_dict(d: dict, base_dir: Path) -> SourceConfig:
    if not isinstance(d, dict):
        raise QdmdError("source must be an object")
    extra = set(d) - _SOURCE_KEYS
    if extra:
        raise QdmdError(f"unknown source keys: {sorted(extra)}")
    kind = d.get("kind", "system")
    embedding = d.get("embedding", 1)
    if kind == "dataset":
        path = d.get("path")
        if path is None:
            raise QdmdError("dataset source needs a 'path'")
        resolved = Path(path)
        if not resolved.is_absolute():
            resolved = base_dir / resolved
        data = read_matrix(resolved)
        return SourceConfig(kind="dataset", path=str(path), data=data,
                            embedding=int(embedding))
    x0 = d.get("x0")
    return SourceConfig(kind="system", system=d.get("system", "pendulum"),
                        x0=None if x0 is None else tuple(float(v) for v in x0),
                        dt=float(d.get("dt", 0.1)),
                        duration=float(d.get("duration", 60.0)),
                        substeps=int(d.get("substeps", 10)),
                        embedding=int(embedding))


def config_from_dict(d: dict, base_dir: Path) -> ExperimentConfig:
    """Build an ExperimentConfig from its JSON form (strict key mirror)."""
    if not isinstance(d, dict):
        raise QdmdError("experiment config must be a JSON object")
    extra = set(d) - _CONFIG_KEYS
    if extra:
        raise QdmdError(f"unknown config keys: {sorted(extra)}")
    if "source" not in d:
        raise QdmdError("experiment config needs a 'source' object")
    kwargs: dict = {"source": _source_from_dict(d["source"], base_dir)}
    if "T" in d:
        kwargs["T"] = int(d["T"])
    if "bit_list" in d:
        kwargs["bit_list"] = tuple(int(b) for b in d["bit_list"])
    if "trials" in d:
        kwargs["trials"] = int(d["trials"])
    if "master_seed" in d:
        kwargs["master_seed"] = int(d["master_seed"])
    if "rank_rule" in d:
        kwargs["rank_rule"] = _rank_rule_from_dict(d["rank_rule"])
    if "quantizer_range" in d:
        kwargs["quantizer_range"] = tuple(float(v) for v in d["quantizer_range"])
    if "margin" in d:
        kwargs["margin"] = None if d["margin"] is None else float(d["margin"])
    if "norm" in d:
        kwargs["norm"] = d["norm"]
    if "mode" in d:
        kwargs["mode"] = d["mode"]
    if "recovery_enabled" in d:
        kwargs["recovery_enabled"] = bool(d["recovery_enabled"])
    if "prediction_horizon" in d:
        h = d["prediction_horizon"]
        kwargs["prediction_horizon"] = None if h is None else int(h)
    return ExperimentConfig(**kwargs)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdmd",
        description="dynamic mode decomposition from dither-quantized data")
    parser.add_argument("--version", action="version", version=f"qdmd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a reference system")
    p.add_argument("--system", choices=sorted(_SYSTEM_FACTORIES), default="pendulum")
    p.add_argument("--matrix", help="matrix file for a linear system instead of "
                                    "a named one")
    p.add_argument("--x0", help="comma-separated initial state")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0,
                   help="echoed for provenance; simulation is deterministic")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["auto", "csv", "binary"], default="auto")

    p = sub.add_parser("quantize", help="dither-quantize a matrix file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--range", nargs=2, type=float, default=(-1.0, 1.0),
                   metavar=("U_MIN", "U_MAX"))
    p.add_argument("--normalize", action="store_true",
                   help="first map the data into the range with an affine map")
    p.add_argument("--margin", type=float, default=None,
                   help="margin used with --normalize; default half a cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["auto", "csv", "binary"], default="auto")

    p = sub.add_parser("estimate", help="fit a propagator from snapshot files")
    p.add_argument("--phi", required=True)
    p.add_argument("--phiprime", required=True)
    p.add_argument("--method", choices=["full", "reduced", "ridge"], default="full")
    p.add_argument("--tol", type=float, default=None,
                   help="relative pseudoinverse cutoff for --method full")
    p.add_argument("--rank", type=int, default=None,
                   help="fixed truncation rank for --method reduced")
    p.add_argument("--energy", type=float, default=None,
                   help="energy fraction rank rule for --method reduced")
    p.add_argument("--sv-cutoff", type=float, default=None,
                   help="singular value cutoff rank rule for --method reduced")
    p.add_argument("--gamma", type=float, default=None,
                   help="ridge weight for --method ridge")
    p.add_argument("--seed", type=int, default=0,
                   help="echoed for provenance; estimation is deterministic")
    p.add_argument("--out", required=True)
    p.add_argument("--eigs-out", default=None,
                   help="optional CSV for eigenvalues (rows: real, imag)")
    p.add_argument("--format", choices=["auto", "csv", "binary"], default="auto")

    p = sub.add_parser("sweep", help="run a Monte Carlo word-length sweep")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="override master_seed from the config")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--bits", default=None, help="comma-separated bit list override")

    p = sub.add_parser("recover", help="undo the quantization-induced ridge")
    p.add_argument("--phi", required=True)
    p.add_argument("--phiprime", required=True)
    p.add_argument("--epsilon", type=float, required=True,
                   help="quantizer cell width used when the data was recorded")
    p.add_argument("--seed", type=int, default=0,
                   help="echoed for provenance; recovery is deterministic")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["auto", "csv", "binary"], default="auto")

    p = sub.add_parser("report", help="summarize a sweep report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--seed", type=int, default=0,
                   help="echoed for provenance; summarization is deterministic")
    return parser


def _cmd_simulate(args) -> int:
    if args.matrix is not None:
        spec = linear_system(read_matrix(args.matrix))
        system_name = f"linear:{args.matrix}"
    else:
        spec = _SYSTEM_FACTORIES[args.system]()
        system_name = args.system
    cfg = TrajectoryConfig(x0=_parse_x0(args.x0), dt=args.dt,
                           duration=args.duration, substeps=args.substeps)
    _print_config({
        "command": "simulate", "system": system_name,
        "x0": list(cfg.x0) if cfg.x0 is not None else list(spec.default_state),
        "dt": cfg.dt, "duration": cfg.duration, "substeps": cfg.substeps,
        "samples": cfg.samples, "seed": args.seed, "out": args.out,
    })
    traj = simulate(spec, cfg)
    write_matrix(args.out, traj, fmt=args.format)
    print(f"wrote {traj.shape[0]} x {traj.shape[1]} trajectory to {args.out}")
    return 0


def _cmd_quantize(args) -> int:
    lo, hi = args.range
    spec = QuantizerSpec(u_min=lo, u_max=hi, bits=args.bits)
    margin = args.margin if args.margin is not None else 0.5 * spec.resolution
    _print_config({
        "command": "quantize", "in": args.infile, "bits": args.bits,
        "u_min": lo, "u_max": hi, "epsilon": spec.resolution,
        "normalize": bool(args.normalize),
        "margin": margin if args.normalize else None,
        "seed": args.seed, "out": args.out,
    })
    mat = read_matrix(args.infile)
    if args.normalize:
        mat = fit_affine(mat, lo, hi, margin).apply(mat)
    stream = DitherStream(spec, args.seed)
    quantized, saturated = quantize_matrix(spec, mat, stream)
    stats = error_stats(mat, quantized)
    write_matrix(args.out, quantized, fmt=args.format)
    print(f"saturated entries: {saturated}")
    print(f"error mean {stats['mean']:.3e}, variance {stats['variance']:.3e} "
          f"(eps^2/12 = {spec.resolution ** 2 / 12.0:.3e})")
    return 0


def _cmd_estimate(args) -> int:
    pair = SnapshotPair(Phi=read_matrix(args.phi), PhiPrime=read_matrix(args.phiprime))
    _print_config({
        "command": "estimate", "phi": args.phi, "phiprime": args.phiprime,
        "method": args.method, "tol": args.tol, "rank": args.rank,
        "energy": args.energy, "sv_cutoff": args.sv_cutoff, "gamma": args.gamma,
        "seed": args.seed, "out": args.out,
        "shape": list(pair.Phi.shape),
    })
    eigs = None
    if args.method == "full":
        model = dmd_full(pair, tol=args.tol)
        out = model.K
        print(f"pinv tolerance: {model.pinv_tolerance:.3e}")
        eigs = np.linalg.eigvals(model.K)
        eigs = eigs[np.lexsort((np.angle(eigs), -np.abs(eigs)))]
    elif args.method == "reduced":
        chosen = [v is not None for v in (args.rank, args.energy, args.sv_cutoff)]
        if sum(chosen) > 1:
            raise QdmdError("give at most one of --rank, --energy, --sv-cutoff")
        if args.rank is not None:
            rule = RankRule(kind="fixed", r=args.rank)
        elif args.energy is not None:
            rule = RankRule(kind="energy", tau=args.energy)
        elif args.sv_cutoff is not None:
            rule = RankRule(kind="tolerance", cutoff=args.sv_cutoff)
        else:
            rule = RankRule()
        model = dmd_reduced(pair, rule)
        out = model.K_r
        eigs = model.Lambda
        print(f"rank: {model.r}")
    else:
        if args.gamma is None:
            raise QdmdError("--method ridge needs --gamma")
        out = ridge_dmd(pair, args.gamma)
    write_matrix(args.out, out, fmt=args.format)
    if eigs is not None:
        shown = ", ".join(f"{v:.6g}" for v in eigs[:8])
        print(f"leading eigenvalues: {shown}")
        if args.eigs_out:
            write_matrix(args.eigs_out, np.vstack([eigs.real, eigs.imag]), fmt="csv")
    print(f"wrote {out.shape[0]} x {out.shape[1]} operator to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg_path = Path(args.config)
    try:
        raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise QdmdError(f"config file not found: {cfg_path}") from None
    except json.JSONDecodeError as exc:
        raise QdmdError(f"config file is not valid JSON: {exc}") from None
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.trials is not None:
        raw["trials"] = args.trials
    if args.T is not None:
        raw["T"] = args.T
    if args.bits is not None:
        raw["bit_list"] = [int(b) for b in args.bits.split(",")]
    cfg = config_from_dict(raw, cfg_path.parent)
    payload = cfg.echo()
    payload.update({"command": "sweep", "threads": args.threads, "out": args.out,
                    "seed": cfg.master_seed})
    _print_config(payload)
    report = run_sweep(cfg, threads=args.threads)
    write_report(args.out, report)
    d = report.to_dict()
    for bits in d["config"]["bit_list"]:
        stats = d["results"][str(bits)]["stats"]["avg_pred_rel_err"]
        print(f"bits {bits}: mean prediction error {stats['mean']:.6g} "
              f"over {stats['count']} trials")
    failed = d["totals"]["trials_failed"]
    print(f"report written to {args.out} "
          f"({d['totals']['trials_completed']} trials, {failed} failed)")
    return 4 if failed else 0


def _cmd_recover(args) -> int:
    pair = SnapshotPair(Phi=read_matrix(args.phi), PhiPrime=read_matrix(args.phiprime))
    _print_config({
        "command": "recover", "phi": args.phi, "phiprime": args.phiprime,
        "epsilon": args.epsilon, "gamma_target": -args.epsilon ** 2 / 12.0,
        "seed": args.seed, "out": args.out, "shape": list(pair.Phi.shape),
    })
    result = recover_regularized(pair, args.epsilon)
    write_matrix(args.out, result.K, fmt=args.format)
    status = "ok" if result.guard_ok else "infeasible, fallback used"
    print(f"guard: {status}")
    print(f"lambda_min(Phi Phi^T) / T = {result.lambda_min / pair.n_snapshots:.6e} "
          f"vs eps^2/12 = {args.epsilon ** 2 / 12.0:.6e}")
    print(f"gamma used: {result.gamma:.6e}")
    print(f"wrote operator to {args.out}")
    return 0 if result.guard_ok else 5


def _cmd_report(args) -> int:
    report = read_report(args.infile)
    _print_config({"command": "report", "in": args.infile, "seed": args.seed})
    if report.get("kind") != "sweep":
        raise QdmdError(f"not a sweep report: {args.infile}")
    print(f"rank: {report['rank']}")
    header = f"{'bits':>4}  {'metric':<24} {'mean':>12} {'median':>12} " \
             f"{'q1':>12} {'q3':>12} {'outliers':>8}"
    print(header)
    for bits_key in sorted(report["results"], key=int):
        cell = report["results"][bits_key]
        for metric in ("full_matrix_rel_err", "reduced_matrix_rel_err",
                       "avg_pred_rel_err"):
            stats = cell["stats"][metric]
            if stats is None:
                continue
            print(f"{bits_key:>4}  {metric:<24} {stats['mean']:>12.6g} "
                  f"{stats['median']:>12.6g} {stats['q1']:>12.6g} "
                  f"{stats['q3']:>12.6g} {len(stats['outliers']):>8}")
    totals = report["totals"]
    print(f"trials: {totals['trials_completed']} completed, "
          f"{totals['trials_failed']} failed, "
          f"{totals['saturated_entries']} saturated entries")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "quantize": _cmd_quantize,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "recover": _cmd_recover,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except QdmdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
