"""Command-line entry points: simulate, track, eval and epd-report.

Every subcommand reads the same YAML configuration.  Values resolve in
this order, later wins: built-in defaults, ``--config`` file, ``--set
section.key=value`` overrides, dedicated flags such as ``--seed``.

Exit codes: 0 on success, 2 on usage, configuration or input errors,
1 on internal errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from importlib import metadata
from pathlib import Path

import yaml

from . import config as C
from .errors import ConfigError, FrameError, OcctrackError, ParseError, SpecInvalid
from .filter import FilterConfig, run_tracker
from .metrics import TgospaParams, TgospaResult, tgospa
from .occlusion import load_camera, load_curve, save_camera, save_curve
from .simio import (
    find_seqinfo,
    generate_scenario,
    ground_truth,
    read_detections,
    read_gt,
    read_results,
    read_seqinfo,
    simulate_detections,
    write_detections,
    write_gt,
    write_results,
    write_seqinfo,
)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def _config(args) -> dict:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "strategy", None) is not None:
        overrides.append(f"filter.strategy={args.strategy}")
    return C.load_config(args.config, overrides)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, **fields) -> None:
    fields.setdefault("tool_version", tool_version())
    with open(out / "manifest.json", "w") as fh:
        json.dump(fields, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _models(cfg: dict, args):
    """Tracker models from config; camera/curve files given on the command line win."""
    cam = load_camera(args.camera) if getattr(args, "camera", None) else C.camera(cfg)
    models = C.tracker_models(cfg, cam)
    if getattr(args, "curve", None):
        models = dataclasses.replace(models, curve=load_curve(args.curve))
    return models


def _detections(path, n_frames: int | None):
    if n_frames is None:
        info = find_seqinfo(path)
        if info is not None:
            n_frames = read_seqinfo(info)["seqLength"]
    return read_detections(path, n_frames)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    cfg = _config(args)
    seed = int(cfg["seed"])
    spec = C.scenario_spec(cfg)
    occ = C.occlusion(cfg)
    curve = C.curve(cfg)
    t0 = time.perf_counter()
    sc = generate_scenario(spec, seed)
    dets = simulate_detections(sc, curve, occ, seed)
    gt = ground_truth(sc, occ)
    out = _out_dir(args.out)
    write_gt(out / "gt.txt", gt)
    write_detections(out / "det.txt", dets)
    save_camera(spec.camera, out / "camera.yaml")
    save_curve(curve, out / "curve.yaml")
    write_seqinfo(out / "seqinfo.ini", sc.n_frames, spec.fps, spec.camera)
    (out / "config.yaml").write_text(C.dump(cfg))
    _write_manifest(
        out,
        command="simulate",
        config=str(args.config) if args.config else None,
        seed=seed,
        outputs=["gt.txt", "det.txt", "camera.yaml", "curve.yaml", "seqinfo.ini", "config.yaml"],
        n_frames=sc.n_frames,
        wall_clock_s=round(time.perf_counter() - t0, 6),
    )
    print(f"wrote {sc.n_frames} frames to {out}")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = _config(args)
    fcfg = FilterConfig(**cfg["filter"])
    models = _models(cfg, args)
    frames = _detections(args.det, args.n_frames)
    seed = int(cfg["seed"])
    t0 = time.perf_counter()
    result = run_tracker(frames, models, fcfg, seed)
    wall = time.perf_counter() - t0
    out = _out_dir(args.out)
    write_results(out / "res.txt", result)
    _write_manifest(
        out,
        command="track",
        config=str(args.config) if args.config else None,
        seed=seed,
        strategy=fcfg.strategy,
        inputs={"det": str(args.det)},
        outputs=["res.txt"],
        n_frames=len(frames),
        wall_clock_s=round(wall, 6),
        fpps=round(len(frames) / wall, 3) if wall > 0 else None,
    )
    print(f"{fcfg.strategy}: {len(frames)} frames in {wall:.2f} s ({len(frames) / max(wall, 1e-9):.1f} fpps)")
    return EXIT_OK


def _tgospa_params(args) -> TgospaParams:
    """Config ``tgospa`` section, then keys from ``--params`` on top."""
    cfg = _config(args)
    if args.params:
        try:
            data = yaml.safe_load(Path(args.params).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read TGOSPA parameters: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("TGOSPA parameter file must hold a mapping")
        for key, value in data.get("tgospa", data).items():
            cfg = C.apply_override(cfg, f"tgospa.{key}={value}")
    try:
        return C.tgospa_params(cfg)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid TGOSPA parameters: {e}") from e


def param_header(params: TgospaParams) -> str:
    return f"# tgospa p={params.p:g} c={params.c:g} gamma={params.gamma:.2f}"


def format_result(result: TgospaResult, params: TgospaParams) -> str:
    row = result.as_row()
    lines = [param_header(params), ",".join(TgospaResult.COLUMNS)]
    lines.append(",".join(f"{row[k]:.6f}" for k in TgospaResult.COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    params = _tgospa_params(args)
    gt = read_gt(args.gt)
    res = read_results(args.res)
    result = tgospa(gt, res, params, approximate=args.approximate)
    text = format_result(result, params)
    if args.out:
        out = _out_dir(args.out)
        (out / "tgospa.txt").write_text(text)
        _write_manifest(
            out,
            command="eval",
            config=str(args.config) if args.config else None,
            inputs={"gt": str(args.gt), "res": str(args.res)},
            outputs=["tgospa.txt"],
            params={"p": params.p, "c": params.c, "gamma": params.gamma},
        )
    sys.stdout.write(text)
    return EXIT_OK


REPORT_COLUMNS = ("frame", "mark", "strategy", "epd", "n_hypotheses", "n_occluders")


def cmd_epd_report(args) -> int:
    cfg = _config(args)
    fcfg = FilterConfig(**cfg["filter"])
    models = _models(cfg, args)
    frames = _detections(args.det, args.n_frames)
    diagnostics: list = []
    run_tracker(frames, models, fcfg, int(cfg["seed"]), diagnostics=diagnostics)
    out = _out_dir(args.out)
    with open(out / "epd_report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for k, diag in diagnostics:
            for d in diag:
                w.writerow([k, d.mark, d.strategy, f"{d.epd:.6f}", d.n_hypotheses, d.n_occluders])
    print(f"wrote EPD diagnostics for {len(diagnostics)} frames to {out / 'epd_report.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config key, e.g. filter.gate_threshold=9 (repeatable)",
    )


def _tracking(p: argparse.ArgumentParser) -> None:
    p.add_argument("--det", required=True, help="detections in MOTChallenge format")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--camera", help="camera YAML (overrides config)")
    p.add_argument("--curve", help="PoD curve YAML (overrides config)")
    p.add_argument("--n-frames", type=int, help="sequence length (default: seqinfo.ini or last frame)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occtrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario with detections")
    _common(p)
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the tracker on a detection file")
    _common(p)
    _tracking(p)
    p.add_argument("--strategy", choices=("constant", "eso", "pro"), help="PoD strategy (overrides config)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="TGOSPA evaluation of tracker results against ground truth")
    _common(p)
    p.add_argument("--gt", required=True, help="ground truth in MOT17 format")
    p.add_argument("--res", required=True, help="tracker results")
    p.add_argument("--params", help="YAML file with p, c and gamma")
    p.add_argument("--approximate", action="store_true", help="frame-wise assignment upper bound")
    p.add_argument("--out", help="output directory (result is always printed)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("epd-report", help="per-frame EPD diagnostics")
    _common(p)
    _tracking(p)
    p.add_argument("--strategy", choices=("constant", "eso", "pro"), help="PoD strategy (overrides config)")
    p.set_defaults(func=cmd_epd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ParseError, SpecInvalid, FileNotFoundError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FrameError as e:
        # Input problems found mid-run still count as bad input.
        if isinstance(e.cause, (ParseError, ConfigError)):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except OcctrackError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001 - report, never traceback at the user
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
