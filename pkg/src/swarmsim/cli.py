"""Command-line entry points: run one trial, run a batch, summarize
records, or serve the results/session service."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigurationError, SchemaError
from .harness import TrialConfig, aggregate_stats, run_batch, run_trial
from .service import RecordStore, create_app, records_to_csv
from .tasks import TaskKind


def _parse_config(data: dict) -> TrialConfig:
    try:
        kind = TaskKind(data["task"])
    except (KeyError, ValueError):
        raise ConfigurationError(f"unknown or missing task in {data!r}") from None
    return TrialConfig(kind=kind,
                       mode=data.get("mode", "random"),
                       seed=int(data.get("seed", 0)),
                       max_steps=int(data.get("max_steps", 18000)),
                       controller_id=data.get("controller", "none"),
                       participant_id=data.get("participant", "headless"))


def _store_records(path: str | None, records) -> None:
    if path is None:
        return
    store = RecordStore(path)
    try:
        for rec in records:
            store.append(rec)
    finally:
        store.close()


def cmd_run(args) -> int:
    config = _parse_config(dict(task=args.task, mode=args.mode, seed=args.seed,
                                max_steps=args.max_steps, controller=args.controller,
                                participant=args.participant))
    record = run_trial(config)
    print(json.dumps(asdict(record), indent=1))
    _store_records(args.out, [record])
    return 0


def cmd_batch(args) -> int:
    configs = [_parse_config(d) for d in json.loads(Path(args.config).read_text())]
    records = run_batch(configs, parallelism=args.parallelism)
    for rec in records:
        print(f"{rec.experiment_name} seed={rec.seed} "
              f"completed={str(rec.completed).lower()} steps={rec.steps}")
    _store_records(args.out, records)
    return 0


def cmd_stats(args) -> int:
    store = RecordStore(args.infile)
    try:
        records = store.records()
    finally:
        store.close()
    if not records:
        print("no records", file=sys.stderr)
        return 1
    rows = aggregate_stats(records, args.group_by)
    cols = ["group", "count", "completed", "completion_rate",
            "min", "q1", "median", "q3", "max"]
    if args.format == "csv":
        print(",".join(cols))
        for row in rows:
            print(",".join(str(row.get(c, "")) for c in cols))
    else:
        widths = {c: max(len(c), *(len(f"{row.get(c, '')}") for row in rows))
                  for c in cols}
        print("  ".join(c.ljust(widths[c]) for c in cols))
        for row in rows:
            print("  ".join(f"{row.get(c, '')}".ljust(widths[c]) for c in cols))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    store = RecordStore(args.store)
    app = create_app(store, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one headless trial")
    run_p.add_argument("--task", required=True,
                       choices=[k.value for k in TaskKind])
    run_p.add_argument("--mode", default="random",
                       help='mode token like n=100, M=0.5, obs=mean, or "random"')
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--controller", default="scripted_push")
    run_p.add_argument("--max-steps", type=int, default=18000)
    run_p.add_argument("--participant", default="headless")
    run_p.add_argument("--out", default=None, help="append record to this store")
    run_p.set_defaults(func=cmd_run)

    batch_p = sub.add_parser("batch", help="run a batch of trials")
    batch_p.add_argument("--config", required=True,
                         help="JSON list of trial configs")
    batch_p.add_argument("--parallelism", type=int, default=1)
    batch_p.add_argument("--out", default=None)
    batch_p.set_defaults(func=cmd_batch)

    stats_p = sub.add_parser("stats", help="summarize a record store")
    stats_p.add_argument("--in", dest="infile", required=True)
    stats_p.add_argument("--group-by", default="mode")
    stats_p.add_argument("--format", choices=["table", "csv"], default="table")
    stats_p.set_defaults(func=cmd_stats)

    serve_p = sub.add_parser("serve", help="serve the results/session API")
    serve_p.add_argument("--store", default="records.jsonl")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--frontend", default=None,
                         help="static directory for the browser client")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, SchemaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
