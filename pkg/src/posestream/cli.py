"""Command-line entry points: serve, stream, evaluate, bench.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 acceptance-threshold violation in assert mode.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .anchors import load_anchor_config
from .bench import BenchConfig, bench_latency
from .client import ClientConfig, run_client
from .errors import ConfigError
from .evaluate import SUBSAMPLE_MAX_POINTS, SUBSAMPLE_SEED, evaluate
from .geometry import load_intrinsics, load_model_points
from .metrics import write_frame_metrics
from .server import ServerConfig, run_server

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_THRESHOLD = 3


def _parse_host_port(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"expected HOST:PORT, got {value!r}")
    return host or "127.0.0.1", int(port)


def _parse_range(value: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value.split(","))
    except ValueError as e:
        raise ConfigError(f"expected LO,HI, got {value!r}") from e
    return lo, hi


def _cmd_serve(args) -> int:
    config = ServerConfig(
        intrinsics=load_intrinsics(args.intrinsics),
        host=args.host,
        port=args.port,
        backend=args.backend,
        graph_file=args.graph_file,
        anchor_config=load_anchor_config(args.anchor_config) if args.anchor_config
        else ServerConfig.__dataclass_fields__["anchor_config"].default_factory(),
        script_seed=args.seed,
        script_tz_range=_parse_range(args.tz_range),
        score_threshold=args.score_thresh,
        iou_threshold=args.iou_thresh,
        full_range=not args.studio_range,
        infer_delay_ms=args.infer_delay_ms,
        reply_transport=args.reply_transport,
        trace_out=args.trace_out,
        pred_out=args.pred_out,
        model_meta=load_model_points(args.model_meta) if args.model_meta else None,
    )
    run_server(config)
    return EXIT_OK


def _cmd_stream(args) -> int:
    host, port = _parse_host_port(args.server)
    if args.source == "synthetic" and not args.intrinsics:
        raise ConfigError("synthetic source needs --intrinsics")
    model = load_model_points(args.model_meta) if args.model_meta else None
    if args.overlay_dir and model is None:
        raise ConfigError("--overlay-dir needs --model-meta")
    intrinsics = load_intrinsics(args.intrinsics) if args.intrinsics else None
    if intrinsics is None:
        raise ConfigError("--intrinsics is required")
    result = run_client(ClientConfig(
        server_host=host,
        server_port=port,
        intrinsics=intrinsics,
        fps=args.fps,
        frames=args.frames,
        source=args.source,
        script_seed=args.seed,
        script_tz_range=_parse_range(args.tz_range),
        model=model,
        overlay_dir=args.overlay_dir,
        pred_out=args.pred_out,
        gt_out=args.gt_out,
        trace_out=args.trace_out,
        send_delay_ms=args.send_delay_ms,
        loss_rate=args.loss_rate,
        render_delay_ms=args.render_delay_ms,
        reply_transport=args.reply_transport,
        first_reply_timeout_s=args.first_reply_timeout,
    ))
    print(
        f"sent {result.frames_sent} frames, received {len(result.received)} poses "
        f"in {result.elapsed_s:.2f}s"
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model = load_model_points(args.model_meta)
    result = evaluate(
        args.pred, args.gt, model,
        subsample_max=args.subsample_max, subsample_seed=args.subsample_seed,
    )
    text = result.report.format_text()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text + "\n")
        (out / "report.csv").write_text(result.report.to_csv())
        write_frame_metrics(result.per_frame, out / "per_frame.jsonl")
    if args.max_tool_add_mm is not None and result.report.tool_add_mm[0] > args.max_tool_add_mm:
        print(
            f"ASSERT FAILED: tool ADD {result.report.tool_add_mm[0]:.3f} mm "
            f"> {args.max_tool_add_mm} mm",
            file=sys.stderr,
        )
        return EXIT_THRESHOLD
    return EXIT_OK


def _cmd_bench(args) -> int:
    result = bench_latency(BenchConfig(
        frames=args.frames,
        fps=args.fps,
        width=args.width,
        height=args.height,
        seed=args.seed,
        loss_rate=args.loss_rate,
        send_delay_ms=args.delay_ms,
        infer_delay_ms=args.infer_delay_ms,
        render_delay_ms=args.render_delay_ms,
        intrinsics=load_intrinsics(args.intrinsics) if args.intrinsics else None,
        model=load_model_points(args.model_meta) if args.model_meta else None,
        reply_transport=args.reply_transport,
        trace_out=args.trace_out,
    ))
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(result.report.format_text())
    if result.pose_errors_m:
        print(f"max pose error: {result.max_pose_error_m * 1000.0:.6f} mm")
    violations = []
    p2p = result.report.pixel_to_photon_ms[0]
    if args.max_p2p_ms is not None and p2p > args.max_p2p_ms:
        violations.append(f"pixel-to-photon {p2p:.1f} ms > {args.max_p2p_ms} ms")
    if args.min_p2p_ms is not None and p2p < args.min_p2p_ms:
        violations.append(f"pixel-to-photon {p2p:.1f} ms < {args.min_p2p_ms} ms")
    if (
        args.max_pose_err_mm is not None
        and result.max_pose_error_m * 1000.0 > args.max_pose_err_mm
    ):
        violations.append(
            f"max pose error {result.max_pose_error_m * 1000.0:.4f} mm > {args.max_pose_err_mm} mm"
        )
    for v in violations:
        print(f"ASSERT FAILED: {v}", file=sys.stderr)
    return EXIT_THRESHOLD if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posestream",
        description="Marker-less 6DoF tool and hand pose tracking over a streaming link",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the pose-estimation server")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=9750)
    p.add_argument("--intrinsics", required=True, help="capture intrinsics JSON")
    p.add_argument("--model-meta", help="model metadata JSON (validated; unused while serving)")
    p.add_argument("--backend", choices=("synthetic", "graph"), default="synthetic")
    p.add_argument("--graph-file", help="serialized torch.export graph (.pt2) for --backend graph")
    p.add_argument("--anchor-config", help="anchor layout JSON (default: built-in)")
    p.add_argument("--score-thresh", type=float, default=0.5)
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0, help="synthetic script seed")
    p.add_argument("--tz-range", default="0.3,1.5", help="synthetic depth range LO,HI meters")
    p.add_argument("--studio-range", action="store_true", help="treat YUV as studio range")
    p.add_argument("--infer-delay-ms", type=float, default=0.0)
    p.add_argument("--reply-transport", choices=("udp", "tcp"), default="udp")
    p.add_argument("--trace-out", help="write server-side traces (JSON lines)")
    p.add_argument("--pred-out", help="write decoded predictions (JSON lines)")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("stream", help="run the HMD-simulator client")
    p.add_argument("--server", required=True, help="HOST:PORT of the pose server")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--source", default="synthetic", help='"synthetic" or a dataset directory')
    p.add_argument("--intrinsics", help="capture intrinsics JSON")
    p.add_argument("--model-meta", help="model metadata JSON (synthetic content, overlays)")
    p.add_argument("--seed", type=int, default=0, help="synthetic script seed")
    p.add_argument("--tz-range", default="0.3,1.5")
    p.add_argument("--overlay-dir", help="dump overlay PNGs here")
    p.add_argument("--pred-out", help="write received poses (JSON lines)")
    p.add_argument("--gt-out", help="write scripted ground truth (JSON lines)")
    p.add_argument("--trace-out", help="write client-side traces (JSON lines)")
    p.add_argument("--send-delay-ms", type=float, default=0.0)
    p.add_argument("--loss-rate", type=float, default=0.0)
    p.add_argument("--render-delay-ms", type=float, default=0.0)
    p.add_argument("--reply-transport", choices=("udp", "tcp"), default="udp")
    p.add_argument("--first-reply-timeout", type=float, default=5.0)
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--model-meta", required=True)
    p.add_argument("--out", help="directory for report.txt / report.csv / per_frame.jsonl")
    p.add_argument("--subsample-max", type=int, default=SUBSAMPLE_MAX_POINTS)
    p.add_argument("--subsample-seed", type=int, default=SUBSAMPLE_SEED)
    p.add_argument("--max-tool-add-mm", type=float, help="assert mode: exit 3 above this")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="loopback latency benchmark")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--loss-rate", type=float, default=0.0)
    p.add_argument("--delay-ms", type=float, default=0.0, help="injected transmission delay")
    p.add_argument("--infer-delay-ms", type=float, default=0.0)
    p.add_argument("--render-delay-ms", type=float, default=0.0)
    p.add_argument("--width", type=int, default=896)
    p.add_argument("--height", type=int, default=504)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--intrinsics", help="capture intrinsics JSON (default: synthetic camera)")
    p.add_argument("--model-meta", help="model metadata JSON (default: synthetic tool)")
    p.add_argument("--reply-transport", choices=("udp", "tcp"), default="udp")
    p.add_argument("--trace-out", help="write merged traces (JSON lines)")
    p.add_argument("--max-p2p-ms", type=float, help="assert mode: exit 3 above this")
    p.add_argument("--min-p2p-ms", type=float, help="assert mode: exit 3 below this")
    p.add_argument("--max-pose-err-mm", type=float, help="assert mode: exit 3 above this")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
