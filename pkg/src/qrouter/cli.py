"""``qrouter`` command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from .clients import ClientError
from .config import ConfigError, RunConfig, load_config
from .evaluation import CorrelationError, EvalResult, evaluate_manifest, read_manifest
from .fusion import ReportError
from .localization import SUMMARY_NAME, ensure_writable_dir, run_localization
from .media import MediaError, load_frame_dir
from .pipeline import PipelineError, frame_classifier, score_video
from .routing import RoutingError

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE = 0, 1, 2

log = logging.getLogger("qrouter")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrouter", description="Expert-routed video quality scoring.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="score one frame directory")
    p.add_argument("--video", required=True, help="directory of NNNN.ppm frames")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--tier", type=int, choices=(0, 1, 2))
    p.add_argument("--mock", action="store_true", help="use deterministic mock clients")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("localize", help="run artifact localization only")
    p.add_argument("--video", required=True)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="PLCC/SRCC over a manifest")
    p.add_argument("--manifest", required=True, help="CSV with header video_dir,mos")
    p.add_argument("--config")
    p.add_argument("--tier", type=int, choices=(0, 1, 2))
    p.add_argument("--mock", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        tier=getattr(args, "tier", None),
        seed=getattr(args, "seed", None),
        mock=True if args.mock else None,
    )


def cmd_score(args) -> int:
    cfg = _config(args)
    run = score_video(args.video, cfg, args.out)
    print(run.report_path)
    return EXIT_OK


def cmd_localize(args) -> int:
    cfg = _config(args)
    # fail before any processing when the output cannot be written
    out = ensure_writable_dir(args.out)
    seq = load_frame_dir(args.video)
    run = run_localization(seq, frame_classifier(cfg), out, cfg.localization_params())
    print(f"{len(run.results)} clip(s) localized; summary at {out / SUMMARY_NAME}")
    return EXIT_OK


def run_eval(manifest: str, cfg: RunConfig, out_dir: str,
             pipeline: Optional[Callable[[str], float]] = None) -> EvalResult:
    """Evaluate ``manifest`` and write ``eval.json`` / ``eval.txt`` into ``out_dir``."""
    rows = read_manifest(manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if pipeline is None:
        def pipeline(video: str) -> float:
            dest = out / "videos" / f"{Path(video).name}"
            return float(score_video(video, cfg, dest).report.final_score)
    result = evaluate_manifest(rows, pipeline)
    (out / "eval.json").write_text(json.dumps(result.to_json(), indent=2) + "\n")
    table = result.table()
    (out / "eval.txt").write_text(table)
    print(table, end="")
    return result


def cmd_eval(args) -> int:
    cfg = _config(args)
    if not Path(args.manifest).is_file():
        raise UsageError(f"manifest not found: {args.manifest}")
    run_eval(args.manifest, cfg, args.out)
    return EXIT_OK


COMMANDS = {"score": cmd_score, "localize": cmd_localize, "eval": cmd_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"qrouter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"qrouter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, MediaError, ClientError, RoutingError, ReportError,
            CorrelationError, OSError, ValueError) as exc:
        print(f"qrouter: pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
