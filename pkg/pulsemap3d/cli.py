from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from .config import AppSettings, get_settings
from .core.errors import CorruptFileError, PulseMapError
from .core.logging import get_logger, setup_logging
from .persistence.workspace import Workspace
from .pipeline import run_aggregate, run_bake, run_eval, run_fit, run_maps, run_report
from .synth.export import write_oracle_workspace
from .synth.scenario import load_scenario

EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_INTERRUPTED = 130


def _settings(args: argparse.Namespace) -> AppSettings:
    return get_settings(args.config)


def _workers(args: argparse.Namespace, settings: AppSettings) -> int:
    return args.workers if args.workers is not None else settings.runtime.workers


def _open_workspace(args: argparse.Namespace) -> Workspace:
    """Workspace of ``--manifest``; ``--seed`` overrides the manifest seed."""
    if args.manifest is None:
        raise SystemExit(f"{args.cmd} requires --manifest")
    ws = Workspace.open(args.manifest)
    if args.seed is not None and args.seed != ws.manifest.seed:
        ws = Workspace(ws.subject_dir, ws.manifest.model_copy(update={"seed": args.seed}))
    return ws


def _print_json(payload: Any) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    print()


def _stage_disabled(ws: Workspace, stage: str) -> bool:
    if getattr(ws.manifest.stages, stage):
        return False
    get_logger("cli").info(f"Stage '{stage}' disabled in manifest, nothing to do")
    print(f"Stage '{stage}' disabled for {ws.manifest.subject}")
    return True


def cmd_synth(args: argparse.Namespace) -> int:
    data: dict[str, Any] = {}
    if args.scenario is not None:
        data = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    scenario = load_scenario(data)
    settings = _settings(args)
    seed = args.seed if args.seed is not None else 0
    ws = write_oracle_workspace(
        scenario, args.root, args.subject, seed, workers=_workers(args, settings)
    )
    print(f"Wrote oracle workspace to {ws.subject_dir} (manifest: {ws.manifest_path})")
    return 0


def cmd_maps(args: argparse.Namespace) -> int:
    ws = _open_workspace(args)
    if _stage_disabled(ws, "maps"):
        return 0
    settings = _settings(args)
    summaries = run_maps(ws, settings, k=args.k, workers=_workers(args, settings))
    _print_json({"subject": ws.manifest.subject, "views": summaries})
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    ws = _open_workspace(args)
    if _stage_disabled(ws, "fit"):
        return 0
    _print_json(run_fit(ws, _settings(args)))
    return 0


def cmd_bake(args: argparse.Namespace) -> int:
    ws = _open_workspace(args)
    if _stage_disabled(ws, "bake"):
        return 0
    settings = _settings(args)
    _print_json(run_bake(ws, settings, workers=_workers(args, settings)))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ws = _open_workspace(args)
    if _stage_disabled(ws, "eval"):
        return 0
    evaluation = run_eval(ws, _settings(args))
    print(f"Wrote {ws.reports_dir / 'eval.json'}")
    if args.json:
        _print_json(evaluation)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.manifest is None and args.aggregate_root is None:
        raise SystemExit("report requires --manifest and/or --aggregate-root")
    if args.manifest is not None:
        print(run_report(_open_workspace(args)))
    if args.aggregate_root is not None:
        result = run_aggregate(args.aggregate_root)
        print(f"Aggregated {len(result['subjects'])} subjects into {args.aggregate_root}/aggregate")
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    cfg = get_settings(args.file or args.config)
    _print_json(cfg.model_dump(mode="json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pm3d", description="Blood pulsation maps from multi-view video, lifted to 3D"
    )
    p.add_argument("--manifest", type=Path, help="Subject run manifest (manifest.json)")
    p.add_argument("--workers", type=int, help="Worker threads (default: runtime.workers)")
    p.add_argument("--seed", type=int, help="Override the manifest seed")
    p.add_argument("--k", type=int, help="Spatial averaging window (3, 5, 7, 9, 13 or 17)")
    p.add_argument("--config", help="Path to TOML config file")
    sub = p.add_subparsers(dest="cmd", required=True)

    ps = sub.add_parser("synth", help="Render a synthetic subject with ground truth")
    ps.add_argument("scenario", nargs="?", help="Scenario JSON (default: built-in head scene)")
    ps.add_argument("--root", type=Path, default=Path("."), help="Workspace root directory")
    ps.add_argument("--subject", default="oracle", help="Subject id")
    ps.set_defaults(func=cmd_synth)

    pm = sub.add_parser("maps", help="Compute per-view pulse maps")
    pm.set_defaults(func=cmd_maps)

    pf = sub.add_parser("fit", help="Fit the morphable model to the scan")
    pf.set_defaults(func=cmd_fit)

    pb = sub.add_parser("bake", help="Bake per-view maps into UV textures")
    pb.set_defaults(func=cmd_bake)

    pe = sub.add_parser("eval", help="Reprojection errors and correlation reports")
    pe.add_argument("--json", action="store_true", help="Also print the report to stdout")
    pe.set_defaults(func=cmd_eval)

    pr = sub.add_parser("report", help="ASCII summary and cross-subject aggregation")
    pr.add_argument("--aggregate-root", type=Path, help="Aggregate textures of all subjects here")
    pr.set_defaults(func=cmd_report)

    pcfg = sub.add_parser("config", help="Load and validate configuration")
    pcfg.add_argument("--file", dest="file", help="Path to TOML config file")
    pcfg.set_defaults(func=cmd_config)

    return p


def _error_path(e: BaseException) -> str | None:
    filename = getattr(e, "filename", None)
    if filename is not None:
        return str(filename)
    if isinstance(e, FileNotFoundError) and e.args:
        return str(e.args[0]).split(" (run", 1)[0]
    return None


def _report_error(e: BaseException, kind: str, code: int) -> int:
    """Log the failure and print one machine-readable JSON line on stderr."""
    get_logger("cli").error(f"Command failed: {kind}: {e}")
    payload = {"error": kind, "message": str(e), "path": _error_path(e)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point with logging setup."""
    setup_logging()
    logger = get_logger("cli")
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.config:
            setup_logging(get_settings(args.config).logging)
            logger = get_logger("cli")
        if args.workers is not None and args.workers < 1:
            raise PulseMapError(f"--workers must be >= 1, got: {args.workers}")

        logger.info(f"Starting command: {args.cmd}")
        result = args.func(args)
        logger.info(f"Command completed successfully: {args.cmd}")
        return int(result)

    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return EXIT_INTERRUPTED

    except CorruptFileError as e:
        return _report_error(e, e.kind, EXIT_IO)

    except OSError as e:
        return _report_error(e, type(e).__name__, EXIT_IO)

    except PulseMapError as e:
        return _report_error(e, e.kind, EXIT_VALIDATION)

    except ValidationError as e:
        return _report_error(e, "ValidationError", EXIT_VALIDATION)

    except ValueError as e:
        return _report_error(e, type(e).__name__, EXIT_VALIDATION)
