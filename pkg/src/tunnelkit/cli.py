"""Command-line entry points.

Every subcommand reads ``--config <path>`` and ``--out <dir>`` (which
overrides ``output.directory``); staged subcommands accept
``--stage-input <manifest>`` to reuse products of an earlier run instead
of recomputing prerequisites.  Exit codes: 0 success, 2 configuration
error, 3 compute error.  Compute errors emit a one-line JSON report on
stderr naming the stage and cause.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import RunConfig, config_digest, load_config, serialize_config
from .errors import ConfigError, MissingProduct, TunnelkitError
from .grids import WavefunctionGrid
from .pipeline import (PipelineResult, SnapshotSet, grid_axes, run_pipeline,
                       snapshot_name, stage_compare, stage_geometry,
                       stage_groundstate, stage_phasespace, stage_propagate,
                       stage_qmf_exit_table, stage_roundtrip,
                       stage_snapshot_metrics, stage_trajectories,
                       stage_detector_batch, _setup)
from .products import ProductWriter, load_manifest_arrays, read_array


def _fail(stage: str, exc: Exception) -> int:
    report = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(report), file=sys.stderr)
    return 3


def _load_ground(cfg: RunConfig, stage_input, grid, pot, pw, summary):
    if stage_input:
        arr, _, meta = read_array(Path(stage_input).parent / "psi_ground.meta")
        wf = WavefunctionGrid(grid, arr, float(meta.get("time", 0.0)))
        from .groundstate import energy_expectation

        e0 = energy_expectation(wf, pot)
        summary["groundstate.energy"] = e0
        summary["groundstate.ip"] = -e0
        return wf, -e0
    return stage_groundstate(cfg, pw, grid, pot, summary)


def _load_snapshots(cfg: RunConfig, stage_input, grid) -> SnapshotSet:
    snaps = SnapshotSet(grid=grid, outdir=Path(stage_input).parent)
    found = load_manifest_arrays(stage_input, "psi_t")
    for name, arr, _, meta in found:
        t_req = float(name[len("psi_t"):])
        snaps.actual_times[t_req] = float(meta.get("time", t_req))
        snaps.in_memory[t_req] = arr
    if not snaps.actual_times:
        raise MissingProduct(f"no psi_t* snapshot products in {stage_input}")
    return snaps


def _writer(cfg: RunConfig, out) -> ProductWriter:
    outdir = Path(out) if out else Path(cfg.output.directory)
    return ProductWriter(outdir, serialize_config(cfg), cfg.output.precision)


def cmd_validate_config(args) -> int:
    load_config(args.config)
    print("configuration valid")
    return 0


def cmd_groundstate(args) -> int:
    cfg = load_config(args.config)
    grid, pot, _ = _setup(cfg)
    pw = _writer(cfg, args.out)
    summary = {"config_sha256": config_digest(cfg)}
    try:
        stage_groundstate(cfg, pw, grid, pot, summary)
    except TunnelkitError as exc:
        return _fail("groundstate", exc)
    pw.summary(summary)
    pw.finish()
    return 0


def cmd_propagate(args) -> int:
    cfg = load_config(args.config)
    grid, pot, pulse = _setup(cfg)
    pw = _writer(cfg, args.out)
    summary = {"config_sha256": config_digest(cfg)}
    try:
        wf0, _ = _load_ground(cfg, args.stage_input, grid, pot, pw, summary)
        if args.stage_input:
            pw.array("psi_ground", wf0.psi, grid_axes(grid), time=0.0)
        stage_propagate(cfg, pw, grid, pot, pulse, wf0, summary)
    except TunnelkitError as exc:
        return _fail("propagate", exc)
    pw.summary(summary)
    pw.finish()
    return 0


def _phasespace_like(args, want_moments: bool) -> int:
    cfg = load_config(args.config)
    grid, pot, pulse = _setup(cfg)
    pw = _writer(cfg, args.out)
    summary = {"config_sha256": config_digest(cfg)}
    stage = "qmf" if want_moments else "wigner"
    try:
        if not args.stage_input:
            raise MissingProduct(f"{stage} requires --stage-input with snapshots")
        snaps = _load_snapshots(cfg, args.stage_input, grid)
        stage_phasespace(cfg, pw, snaps, summary)
    except TunnelkitError as exc:
        return _fail(stage, exc)
    pw.summary(summary)
    pw.finish()
    return 0


def cmd_wigner(args) -> int:
    return _phasespace_like(args, want_moments=False)


def cmd_qmf(args) -> int:
    return _phasespace_like(args, want_moments=True)


def cmd_trajectories(args) -> int:
    cfg = load_config(args.config)
    grid, pot, pulse = _setup(cfg)
    pw = _writer(cfg, args.out)
    summary = {"config_sha256": config_digest(cfg)}
    skipped: dict = {}
    try:
        if not args.stage_input:
            raise MissingProduct("trajectories requires --stage-input with snapshots")
        wf0, ip = _load_ground(cfg, args.stage_input, grid, pot, pw, summary)
        snaps = _load_snapshots(cfg, args.stage_input, grid)
        z_exit = stage_geometry(cfg, pw, grid, pot, pulse, ip, summary, skipped)
        if z_exit is None:
            raise TunnelkitError(skipped.get("geometry", "no exit geometry"))
        analysis = stage_phasespace(cfg, pw, snaps, summary)
        trajs = stage_trajectories(cfg, pw, pot, pulse, z_exit, snaps, analysis,
                                   summary, skipped)
        if trajs:
            stage_compare(cfg, pw, trajs, analysis, snaps, summary)
            stage_roundtrip(cfg, pw, pot, pulse, trajs, summary)
    except TunnelkitError as exc:
        return _fail("trajectories", exc)
    for key, reason in sorted(skipped.items()):
        summary[f"skipped.{key}"] = reason
    pw.summary(summary)
    pw.finish()
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    grid, pot, pulse = _setup(cfg)
    pw = _writer(cfg, args.out)
    summary = {"config_sha256": config_digest(cfg)}
    try:
        if not cfg.reconstruction.detector_table:
            raise ConfigError([("reconstruction.detector_table",
                                "required for the reconstruct subcommand")])
        stage_detector_batch(cfg, pw, pulse, [], summary)
    except ConfigError:
        raise
    except TunnelkitError as exc:
        return _fail("reconstruct", exc)
    pw.summary(summary)
    pw.finish()
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    try:
        result: PipelineResult = run_pipeline(cfg, outdir=args.out)
    except TunnelkitError as exc:
        return _fail("pipeline", exc)
    print(f"manifest: {result.manifest}")
    return 0


_COMMANDS = {
    "groundstate": cmd_groundstate,
    "propagate": cmd_propagate,
    "wigner": cmd_wigner,
    "qmf": cmd_qmf,
    "trajectories": cmd_trajectories,
    "reconstruct": cmd_reconstruct,
    "pipeline": cmd_pipeline,
    "validate-config": cmd_validate_config,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunnelkit",
        description="strong-field tunnel ionization simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--stage-input", default=None,
                       help="manifest of an earlier run to reuse products from")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for path, reason in exc.problems:
            print(f"config error: {path}: {reason}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
