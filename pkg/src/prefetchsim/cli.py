"""Command line front end.

A thin client over the service: commands build request bodies, post them
(in-process by default, to --server when given), and write any files on the
client side. Outputs carry no timestamps, so identical inputs give
byte-identical output trees.
"""

import argparse
import json
import os
import re
import shutil
import sys
from dataclasses import asdict, replace

from .client import ServiceClient, ServiceError
from .experiment import (
    ExperimentConfig,
    _rebase_source,
    _throughput_from_entry,
    _user_from_entry,
    load_experiment_config,
    resolve_throughput,
    resolve_user_trace,
)
from .metrics import REPORT_METRICS, pivot_csv, report_from_json, report_to_csv
from .model import ValidationError
from .traces import TraceParseError, UserTrace, save_user_trace

OUT_DIR_ENV = "PREFETCHSIM_OUT"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefetchsim",
        description="Trace-driven simulator for segment prefetching in short-video feeds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the policy x trace comparison matrix")
    run.add_argument("config", help="experiment config file (JSON)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument(
        "--out", default=None, help=f"output directory (default: ${OUT_DIR_ENV} or ./out)"
    )
    run.add_argument("--seed", type=int, default=None, help="override the base seed")
    run.add_argument("--server", default=None, help="service URL (default: in-process)")
    run.add_argument("--no-event-logs", action="store_true")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen-trace", help="generate and save a trace file")
    gen.add_argument("kind", choices=("user",))
    gen.add_argument("--mean", type=float, required=True, help="mean watch seconds per video")
    gen.add_argument("--std", type=float, required=True, help="standard deviation, seconds")
    gen.add_argument("--total", type=float, required=True, help="total session seconds")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True, help="output file path")
    gen.add_argument("--server", default=None, help="service URL (default: in-process)")
    gen.set_defaults(func=cmd_gen_trace)

    val = sub.add_parser("validate", help="check a config without simulating")
    val.add_argument("config")
    val.add_argument("--server", default=None, help="service URL (default: in-process)")
    val.set_defaults(func=cmd_validate)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def _experiment_request(config: ExperimentConfig, include_events: bool) -> dict:
    """Turn a parsed config into a request body with every trace inline."""
    policies = []
    for p in config.policies:
        entry: dict = {"name": p.name, "label": p.label}
        for key in ("buffer_target_table", "lookahead_table"):
            table = getattr(p, key)
            if table is not None:
                entry[key] = {"rows": [list(r) for r in table.rows], "otherwise": table.otherwise}
        policies.append(entry)
    thr = []
    for src in config.throughput_traces:
        trace = resolve_throughput(src)
        thr.append(
            {"label": src.label, "wrap": src.wrap, "values_kbps": list(trace.rates_kbps)}
        )
    users = []
    for src in config.user_traces:
        if src.generated:
            entry = {
                "label": src.label,
                "mean_s": src.mean_s,
                "std_s": src.std_s,
                "total_s": src.total_s,
            }
            if src.seed is not None:
                entry["seed"] = src.seed
        else:
            trace, _ = resolve_user_trace(src, 0, config.session.rng_seed)
            entry = {"label": src.label, "durations_s": list(trace.durations_s)}
        users.append(entry)
    return {
        "playlist": asdict(config.playlist),
        "session": asdict(config.session),
        "policies": policies,
        "throughput_traces": thr,
        "user_traces": users,
        "repeats": config.repeats,
        "include_events": include_events,
    }


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


def cmd_run(args) -> int:
    try:
        config, _ = load_experiment_config(args.config)
        if args.seed is not None:
            config = replace(config, session=replace(config.session, rng_seed=args.seed))
        payload = _experiment_request(config, include_events=not args.no_event_logs)
    except (ValidationError, TraceParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    body = ServiceClient(args.server).post("/experiments/run", payload)
    report = report_from_json(body["report"])

    outdir = args.out or os.environ.get(OUT_DIR_ENV) or "out"
    os.makedirs(outdir, exist_ok=True)
    shutil.copyfile(args.config, os.path.join(outdir, "config.json"))
    written = ["config.json", "meta.json"]
    with open(os.path.join(outdir, "meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.meta, fh, indent=2)
        fh.write("\n")
    if args.format == "csv":
        _write_text(outdir, "report.csv", report_to_csv(report))
        written.append("report.csv")
        for metric in REPORT_METRICS:
            name = metric.split("_")[0] + ".csv"
            _write_text(outdir, name, pivot_csv(report, metric))
            written.append(name)
    else:
        with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(body["report"], fh, indent=2)
            fh.write("\n")
        written.append("report.json")

    logs = body.get("event_logs") or []
    if logs:
        events_dir = os.path.join(outdir, "events")
        os.makedirs(events_dir, exist_ok=True)
        for log in logs:
            name = "{}__{}__{}__r{}.jsonl".format(
                _safe_name(log["policy"]),
                _safe_name(log["thru_trace"]),
                _safe_name(log["user_trace"]),
                log["repeat"],
            )
            with open(os.path.join(events_dir, name), "w", encoding="utf-8", newline="\n") as fh:
                for event in log["events"]:
                    fh.write(json.dumps(event) + "\n")
        written.append(f"events/ ({len(logs)} logs)")

    print(f"{len(report.cells)} cells -> {outdir}: {', '.join(written)}")
    return 0


def _write_text(outdir: str, name: str, text: str) -> None:
    with open(os.path.join(outdir, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_gen_trace(args) -> int:
    label = os.path.basename(args.out).rsplit(".", 1)[0]
    body = ServiceClient(args.server).post(
        "/traces/user/generate",
        {
            "mean_s": args.mean,
            "std_s": args.std,
            "total_s": args.total,
            "seed": args.seed,
            "label": label,
        },
    )
    trace = UserTrace(
        durations_s=tuple(body["durations_s"]),
        label=body["label"],
        metadata=body["metadata"],
    )
    try:
        save_user_trace(trace, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{len(trace)} videos, {trace.total_s:.1f} s -> {args.out}")
    return 0


def _inline_traces(raw: dict, base: str) -> tuple[dict, list[str]]:
    """Replace path-based trace entries with inline values, client-side.

    Relative paths resolve against base, the config file's directory.
    Entries that fail to load are dropped and reported, so the server can
    still check everything else; inline and generator entries pass through.
    """
    cfg = json.loads(json.dumps(raw))
    problems: list[str] = []

    entries = cfg.get("throughput_traces")
    if isinstance(entries, list):
        kept = []
        for i, item in enumerate(entries):
            has_path = isinstance(item, str) or (isinstance(item, dict) and item.get("path"))
            if not has_path:
                kept.append(item)
                continue
            try:
                src = _rebase_source(_throughput_from_entry(item, i).validate(), base)
                trace = resolve_throughput(src)
            except (TypeError, ValidationError, TraceParseError, OSError) as exc:
                problems.append(f"throughput_traces[{i}]: {exc}")
                continue
            kept.append(
                {"label": src.label, "wrap": src.wrap, "values_kbps": list(trace.rates_kbps)}
            )
        cfg["throughput_traces"] = kept

    entries = cfg.get("user_traces")
    if isinstance(entries, list):
        kept = []
        for i, item in enumerate(entries):
            has_path = isinstance(item, str) or (isinstance(item, dict) and item.get("path"))
            if not has_path:
                kept.append(item)
                continue
            try:
                src = _rebase_source(_user_from_entry(item, i).validate(), base)
                trace, _ = resolve_user_trace(src, 0, 0)
            except (TypeError, ValidationError, TraceParseError, OSError) as exc:
                problems.append(f"user_traces[{i}]: {exc}")
                continue
            kept.append({"label": src.label, "durations_s": list(trace.durations_s)})
        cfg["user_traces"] = kept
    return cfg, problems


def cmd_validate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: {args.config}: invalid JSON: {exc}", file=sys.stderr)
        return 2

    inlined, problems = _inline_traces(raw, os.path.dirname(args.config))
    body = ServiceClient(args.server).post("/config/validate", {"config": inlined})
    violations = problems + body["violations"]
    for v in violations:
        print(f"violation: {v}")
    for w in body["warnings"]:
        print(f"warning: {w}")
    for key, value in body["derived"].items():
        print(f"derived: {key} = {value}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return 1
    print("ok")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("prefetchsim.service.app:app", host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
