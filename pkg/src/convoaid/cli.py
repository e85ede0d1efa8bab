"""Command line interface: serve, replay, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics
from .config import EngineConfig
from .session import event_to_json, read_event_log
from .transcript import load_transcript
from .types import ConvoaidError, ParseError


def _load_config(path: str | None, seed: int | None = None) -> EngineConfig:
    cfg = EngineConfig.load(path) if path else EngineConfig()
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    try:
        cfg = _load_config(args.config)
        if args.backend == "http":
            from .backend import HttpBackend

            HttpBackend(timeout_ms=cfg.backend_timeout_ms)  # fail fast on env
    except (OSError, ValueError) as exc:
        print(f"serve: bad config: {exc}", file=sys.stderr)
        return 1
    app = create_app(cfg, backend_kind=args.backend, log_dir=args.log_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    from .engine import run_replay_session

    path = Path(args.transcript)
    if not path.exists():
        print(f"replay: no such file: {path}", file=sys.stderr)
        return 2
    try:
        transcript = load_transcript(str(path))
    except ParseError as exc:
        print(f"replay: {exc}", file=sys.stderr)
        return 1
    if args.backend != "mock":
        print("replay: only the mock backend is deterministic; use --backend mock",
              file=sys.stderr)
        return 1
    try:
        cfg = _load_config(args.config, seed=args.seed)
    except (OSError, ValueError) as exc:
        print(f"replay: bad config: {exc}", file=sys.stderr)
        return 1

    result = run_replay_session(transcript, cfg, speed=args.speed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for event in result.events:
            fh.write(event_to_json(event) + "\n")

    report = metrics.compute_report(
        result.events, transcript, args.pause_threshold_ms, cfg
    )
    report_path = Path(args.report) if args.report else out.with_suffix(out.suffix + ".report.json")
    report_path.write_text(metrics.serialize_report(report), encoding="utf-8")
    print(f"replay: {len(result.events)} events -> {out}")
    print(f"replay: report -> {report_path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.log)
    if not path.exists():
        print(f"report: no such file: {path}", file=sys.stderr)
        return 2
    try:
        cfg = _load_config(args.config)
        events = read_event_log(path.read_text(encoding="utf-8"))
        report = metrics.compute_report(events, None, args.pause_threshold_ms, cfg)
    except (ConvoaidError, ValueError, KeyError) as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 1
    out = metrics.serialize_report(report)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convoaid", description="Real-time conversation support engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--port", type=int, default=8722)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--backend", choices=["mock", "http"], default="mock")
    serve.add_argument("--config", default=None, help="engine config JSON path")
    serve.add_argument("--log-dir", default=None,
                       help="opt-in: persist event logs and feedback reports here")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="run a transcript headlessly")
    replay.add_argument("--transcript", required=True)
    replay.add_argument("--speed", type=float, default=0.0,
                        help="wall-clock pacing ratio; 0 = as fast as possible")
    replay.add_argument("--backend", choices=["mock"], default="mock")
    replay.add_argument("--seed", type=int, default=0)
    replay.add_argument("--out", required=True, help="event log output path")
    replay.add_argument("--report", default=None,
                        help="report output path (default: <out>.report.json)")
    replay.add_argument("--config", default=None)
    replay.add_argument("--pause-threshold-ms", type=int, default=2000)
    replay.set_defaults(func=cmd_replay)

    report = sub.add_parser("report", help="compute metrics from an event log")
    report.add_argument("--log", required=True)
    report.add_argument("--pause-threshold-ms", type=int, default=2000)
    report.add_argument("--config", default=None)
    report.add_argument("--out", default=None)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"convoaid: bad JSON input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
