"""Command-line entry point: the full workflow as subcommands.

Stages mirror the live-use protocol: `synth-session` produces training data
(standing in for cap fitting + recording), `train`/`validate` fit and score
the subject model, and `run` drives the real-time loop with UDP/WebSocket
output. Exit codes: 0 success, 2 usage error, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .classifier import train_model
from .errors import InvalidArgument, InvalidData
from .features import FeatureMatrix
from .formats import Config, load_model, load_session, save_model, save_session
from .geometry import blend, export_mesh
from .selection import mrmr_select
from .signal_core import CLASS_NAMES
from .stream import (
    CollectSink,
    Controller,
    FileReplaySource,
    Pipeline,
    SynthLiveSource,
    UdpSink,
    WebSocketSink,
)
from .synth import SessionProtocol, SubjectProfile, generate_session
from .workflow import (
    preprocess_session,
    sweep_feature_count,
    train_with_report,
    validate_session,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4


def _parse_classes(text: str) -> list[int]:
    try:
        classes = sorted({int(c) for c in text.split(",")})
    except ValueError:
        raise InvalidArgument(f"cannot parse class list {text!r}")
    if len(classes) < 2 or any(not 0 <= c <= 3 for c in classes):
        raise InvalidArgument("classes must be 2+ distinct ids in 0..3")
    return classes


def cmd_synth_session(args) -> int:
    config = Config.load(args.config, {"snr": args.snr, "reps_per_class": args.reps})
    profile = SubjectProfile(seed=args.seed, snr=config.snr, trial_gain_jitter=config.trial_gain_jitter)
    protocol = SessionProtocol(
        reps_per_class=config.reps_per_class,
        trial_s=config.trial_s,
        inter_trial_s=config.inter_trial_s,
        randomize=not args.no_randomize,
    )
    rec, markers = generate_session(protocol, profile)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = save_session(rec, markers, out_dir / "session.json")
    counts = {c: sum(1 for m in markers if m.class_id == c) for c in sorted({m.class_id for m in markers})}
    print(f"wrote {path} ({rec.duration_s:.0f} s, {rec.n_channels} ch)")
    for c, n in counts.items():
        print(f"  class {c} ({CLASS_NAMES[c]}): {n} trials of {config.trial_s:.0f} s")
    return EXIT_OK


def cmd_train(args) -> int:
    config = Config.load(args.config, {"mrmr_k": args.k, "svm_c": args.c})
    rec, markers = load_session(args.session)
    fm = preprocess_session(rec, markers, config)
    classes = _parse_classes(args.classes) if args.classes else None
    model, report = train_with_report(fm, classes=classes, config=config, seed=args.seed)
    save_model(model, args.model_out)
    report_path = Path(args.model_out).with_suffix(".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    print(f"model -> {args.model_out}")
    print(f"report -> {report_path}")
    print(f"classes {model.classes}, {len(model.selected)} features selected")
    print(f"resubstitution accuracy: {report.resubstitution_accuracy:.3f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = Config.load(args.config, {"mrmr_k": args.k, "svm_c": args.c})
    rec, markers = load_session(args.session)
    fm = preprocess_session(rec, markers, config)
    sweep_ks = list(range(args.sweep_min, args.sweep_max + 1)) if args.sweep_csv else None
    report = validate_session(fm, config, seed=args.seed, sweep_ks=sweep_ks)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    for pair, cv in report.pair_reports.items():
        folds = " ".join(f"{f.accuracy:.2f}" for f in cv.folds)
        print(f"pair {pair[0]}v{pair[1]}: mean LOTO accuracy {cv.mean_accuracy:.3f} (folds {folds})")
    print(f"mean 2-class accuracy: {report.mean_pair_accuracy:.3f}")
    if report.four_class:
        print(f"4-class accuracy: {report.four_class.mean_accuracy:.3f}")
    if args.sweep_csv:
        with open(args.sweep_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["k"] + [f"acc_{a}v{b}" for a, b in report.sweep] + ["acc_mean"])
            accs = np.array([report.sweep[p].accuracy for p in report.sweep])
            for i, k in enumerate(sweep_ks):
                writer.writerow([k] + [f"{a:.4f}" for a in accs[:, i]] + [f"{accs[:, i].mean():.4f}"])
        print(f"sweep -> {args.sweep_csv}")
    return EXIT_OK


def cmd_select_features(args) -> int:
    config = Config.load(args.config, {"mrmr_k": args.k})
    rec, markers = load_session(args.session)
    fm = preprocess_session(rec, markers, config)
    classes = _parse_classes(args.classes) if args.classes else sorted(set(fm.labels.tolist()))
    sub = fm.subset_classes(classes)
    std = FeatureMatrix(
        values=(sub.values - sub.values.mean(0)) / np.maximum(sub.values.std(0), 1e-9),
        labels=sub.labels,
        columns=sub.columns,
        trial_ids=sub.trial_ids,
        band_names=sub.band_names,
    )
    result = mrmr_select(std, k=config.mrmr_k)
    doc = {
        "classes": classes,
        "ranked_indices": result.ranked_indices,
        "relevance": result.relevance.tolist(),
        "score_trace": result.score_trace.tolist(),
        "columns": [
            {"column": int(c), "channel": fm.columns[c][0], "band": fm.band_names[fm.columns[c][1]]}
            for c in result.ranked_indices
        ],
    }
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"ranking -> {args.out}")
    if args.sweep_csv:
        ks = list(range(args.sweep_min, args.sweep_max + 1))
        sweep = sweep_feature_count(fm, classes, ks, c=config.svm_c, seed=args.seed)
        with open(args.sweep_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["k", "accuracy"])
            for k, acc in zip(sweep.ks, sweep.accuracy):
                writer.writerow([k, f"{acc:.4f}"])
        print(f"sweep -> {args.sweep_csv}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = Config.load(args.config, {"grid_n": args.grid, "tau": args.tau})
    model = load_model(args.model)
    if args.udp:
        host, _, port = args.udp.rpartition(":")
        config.udp_host, config.udp_port = host or "127.0.0.1", int(port)
    if args.ws is not None:
        config.ws_port = int(args.ws.lstrip(":"))
    if args.source == "replay":
        if not args.session:
            raise InvalidArgument("--source replay requires --session")
        rec, _ = load_session(args.session)
        source = FileReplaySource(rec)
    else:
        profile = SubjectProfile(seed=args.seed, snr=config.snr)
        source = SynthLiveSource(profile)
    controller = Controller()
    collect = CollectSink()
    sinks = [collect, UdpSink(config.udp_host, config.udp_port)]
    ws_sink = None
    if config.ws_port:
        ws_sink = WebSocketSink(config.ws_port, controller.queue)
        sinks.append(ws_sink)
        print(f"websocket on :{ws_sink.port}")
    print(f"udp -> {config.udp_host}:{config.udp_port}")
    pipeline = Pipeline(
        source,
        model,
        sinks,
        controller,
        smooth_alpha=config.smooth_alpha,
        grid_n=config.grid_n,
        tau=config.tau,
        save_dir=args.save_dir,
        pacing=args.pacing,
        max_seconds=args.duration,
    )
    try:
        log = pipeline.run()
    except KeyboardInterrupt:
        log = pipeline.log
    finally:
        for s in sinks:
            s.close()
    print(f"frames: {log.frames}, stalls: {log.stalls}, saves: {len(log.saves)}")
    for name, n in log.drops.items():
        if n:
            print(f"  dropped at {name}: {n}")
    return EXIT_OK


def cmd_export_mesh(args) -> int:
    try:
        weights = np.array([float(w) for w in args.weights.split(",")])
    except ValueError:
        raise InvalidArgument(f"cannot parse weights {args.weights!r}")
    grid = blend(weights, n=args.grid, tau=args.tau)
    export_mesh(grid, args.out)
    print(f"mesh -> {args.out} ({int(grid.occupancy.sum())} voxels)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neurovoxel")
    p.add_argument("--config", default=None, help="JSON config file")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth-session", help="generate a synthetic training session")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--snr", type=float, default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--no-randomize", action="store_true")
    sp.set_defaults(func=cmd_synth_session)

    sp = sub.add_parser("train", help="fit a subject model from a session")
    sp.add_argument("--session", required=True)
    sp.add_argument("--model-out", required=True)
    sp.add_argument("--classes", default=None, help="comma-separated class ids, e.g. 0,1")
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("validate", help="leave-one-trial-out validation")
    sp.add_argument("--session", required=True)
    sp.add_argument("--out", default=None, help="JSON report path")
    sp.add_argument("--sweep-csv", default=None)
    sp.add_argument("--sweep-min", type=int, default=4)
    sp.add_argument("--sweep-max", type=int, default=60)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("select-features", help="mRMR ranking and k sweep")
    sp.add_argument("--session", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--classes", default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--sweep-csv", default=None)
    sp.add_argument("--sweep-min", type=int, default=4)
    sp.add_argument("--sweep-max", type=int, default=60)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_select_features)

    sp = sub.add_parser("run", help="real-time loop with UDP/WebSocket output")
    sp.add_argument("--model", required=True)
    sp.add_argument("--source", choices=["synth", "replay"], default="synth")
    sp.add_argument("--session", default=None, help="session to replay")
    sp.add_argument("--pacing", choices=["realtime", "fast"], default="realtime")
    sp.add_argument("--udp", default=None, help="host:port")
    sp.add_argument("--ws", default=None, help=":port for the UI WebSocket")
    sp.add_argument("--grid", type=int, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--save-dir", default="designs")
    sp.add_argument("--duration", type=float, default=None, help="stop after N seconds")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("export-mesh", help="blend weights into an OBJ mesh")
    sp.add_argument("--weights", required=True, help="w0,w1,w2,w3")
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", type=int, default=24)
    sp.add_argument("--tau", type=float, default=0.5)
    sp.set_defaults(func=cmd_export_mesh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgument as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidData as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
