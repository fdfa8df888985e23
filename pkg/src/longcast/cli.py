"""Command-line client for the pipeline service.

Every subcommand reads local files, calls the service (in-process by
default, or a remote instance via --server/LONGCAST_SERVER), and writes
the returned artifacts back to local files. A JSON configuration file
can predefine any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path
from typing import Optional

EXIT_CODES = {"parse": 2, "schema": 3, "bridge": 4, "metric": 5,
              "config": 64, "usage": 64, "internal": 1}
USAGE_EXIT = 64

SERVER_ENV = "LONGCAST_SERVER"
HOST_CMD_ENV = "LONGCAST_HOST_CMD"


class CliError(Exception):
    def __init__(self, message: str, error_class: str = "config"):
        super().__init__(message)
        self.error_class = error_class


class _Parser(argparse.ArgumentParser):
    def error(self, message):          # usage errors exit 64, not 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


class ServiceClient:
    """POSTs to a running server, or drives the ASGI app in-process."""

    def __init__(self, server: Optional[str] = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        import httpx

        if self.server:
            try:
                response = httpx.post(self.server.rstrip("/") + path,
                                      json=payload, timeout=None)
            except httpx.TransportError as exc:
                raise CliError(f"cannot reach service at {self.server}: "
                               f"{exc}")
        else:
            from .service.app import app

            async def call():
                transport = httpx.ASGITransport(app=app)
                async with httpx.AsyncClient(
                        transport=transport,
                        base_url="http://longcast") as client:
                    return await client.post(path, json=payload, timeout=None)

            response = asyncio.run(call())
        if response.status_code >= 400:
            body = {}
            try:
                body = response.json()
            except ValueError:
                pass
            error_class = body.get("error_class", "config")
            message = body.get("message") or body.get("detail") or response.text
            raise CliError(f"{message}", error_class=error_class)
        return response.json()


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def _parse_hparams(pairs: list[str]) -> dict:
    """key=value pairs; values parse as JSON when possible, else strings."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"--hp expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _parse_map(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"--map expects field=column, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key] = value
    return out


def _parse_seeds(raw: str) -> list[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip() != ""]
    except ValueError:
        raise CliError(f"--seeds expects comma-separated integers, got {raw!r}")


def _parse_horizons(raw: str) -> list[float]:
    try:
        if ":" in raw:
            lo, hi = raw.split(":", 1)
            return [float(h) for h in range(int(lo), int(hi) + 1)]
        return [float(s) for s in raw.split(",") if s.strip() != ""]
    except ValueError:
        raise CliError(f"--horizons expects lo:hi or a comma list, got {raw!r}")


def _predictor_payload(args) -> dict:
    hparams = _parse_hparams(args.hp or [])
    if args.kind == "bridge" and "host_cmd" not in hparams:
        host_cmd = args.host_cmd or os.environ.get(HOST_CMD_ENV)
        if not host_cmd:
            raise CliError("bridge predictor needs --host-cmd or "
                           f"${HOST_CMD_ENV}")
        hparams["host_cmd"] = host_cmd
    if args.kind == "bridge" and args.timeout is not None:
        hparams.setdefault("timeout", args.timeout)
    return {"kind": args.kind, "hyperparameters": hparams,
            "name": args.name or args.kind}


def _cohort_payload_fields(args) -> dict:
    fields = {"column_map": _parse_map(args.map or []),
              "strict": bool(args.strict)}
    if args.sentinels is not None:
        fields["sentinels"] = args.sentinels.split(",")
    return fields


def cmd_synth(client: ServiceClient, args) -> int:
    result = client.post("/v1/synth", {
        "patients": args.patients, "visits": args.visits,
        "max_visits": args.max_visits, "seed": args.seed,
        "missingness": args.missingness, "d2_fraction": args.d2_fraction})
    _write(args.out, result["cohort_csv"])
    print(f"wrote {result['patients']} patients to {args.out}")
    return 0


def cmd_transform(client: ServiceClient, args) -> int:
    payload = {"cohort_csv": _read(args.input), "task": args.task,
               "augment": not args.no_augment, "vent_scale": args.vent_scale,
               "with_test": args.test_out is not None,
               "with_validation": args.val_out is not None,
               "per_target_cutoff": not args.fixed_cutoff,
               "jobs": args.jobs,
               **_cohort_payload_fields(args)}
    result = client.post("/v1/transform", payload)

    def emit(blob, path):
        _write(path, blob["csv"])
        _write(path + ".manifest.json",
               json.dumps(blob["manifest"], indent=2) + "\n")
        print(f"wrote {blob['row_count']} rows to {path}")

    emit(result["train"], args.out)
    if args.test_out:
        emit(result["test"], args.test_out)
    if args.val_out:
        emit(result["validation"], args.val_out)
    return 0


def cmd_split(client: ServiceClient, args) -> int:
    result = client.post("/v1/split", {
        "table_csv": _read(args.input), "task": args.task, "k": args.k,
        "seed": args.seed, "stratified": args.stratified})
    _write(args.out, result["folds_csv"])
    sizes = ", ".join(f"fold {f}: {n}" for f, n in
                      sorted(result["fold_sizes"].items(), key=lambda x: int(x[0])))
    print(f"wrote fold assignment to {args.out} ({sizes})")
    return 0


def _pred_path(stem: str, seed: int, seeds: list[int]) -> str:
    if len(seeds) == 1:
        return stem
    path = Path(stem)
    return str(path.with_name(f"{path.stem}.seed{seed}{path.suffix}"))


def cmd_fit_eval(client: ServiceClient, args) -> int:
    seeds = _parse_seeds(args.seeds)
    payload = {"mode": args.mode, "task": args.task,
               "train_csv": _read(args.train),
               "predictor": _predictor_payload(args), "seeds": seeds,
               "seed_scope": args.seed_scope, "k": args.k,
               "jobs": args.jobs}
    if args.mode == "holdout":
        if not args.test:
            raise CliError("holdout mode requires --test")
        payload["test_csv"] = _read(args.test)
    else:
        if not args.val:
            raise CliError("cv mode requires --val")
        payload["validation_csv"] = _read(args.val)
        if args.folds:
            payload["folds_csv"] = _read(args.folds)
    result = client.post("/v1/fit-eval", payload)

    report_payload = {"reports": result["reports"]}
    _write(args.report_out, json.dumps(report_payload, indent=2) + "\n")
    for report in result["reports"]:
        print(f"{report['task']} {report['metric']} [{report['model']}]: "
              f"{report['mean']:.6g} ± {report['std']:.6g} "
              f"(seeds: {', '.join(format(v, '.6g') for v in report['per_seed'])})")
    print(f"wrote metric report to {args.report_out}")
    if args.pred_out:
        for seed_str, csv_text in result["predictions_by_seed"].items():
            path = _pred_path(args.pred_out, int(seed_str), seeds)
            _write(path, csv_text)
            print(f"wrote predictions for seed {seed_str} to {path}")
    return 0


def cmd_forecast(client: ServiceClient, args) -> int:
    payload = {"cohort_csv": _read(args.cohort), "task": args.task,
               "train_csv": _read(args.train),
               "predictor": _predictor_payload(args),
               "horizons": _parse_horizons(args.horizons) if args.horizons else [],
               "vent_scale": args.vent_scale,
               **_cohort_payload_fields(args)}
    result = client.post("/v1/forecast", payload)
    _write(args.out, result["forecast_csv"])
    print(f"wrote {result['row_count']} forecast rows to {args.out}")
    return 0


def cmd_compare(client: ServiceClient, args) -> int:
    payload = {"a": json.loads(_read(args.a)), "b": json.loads(_read(args.b)),
               "metric": args.metric,
               "alternative": "two-sided" if args.two_sided else "one-sided"}
    result = client.post("/v1/compare", payload)
    print(result["rendered"], end="")
    if args.out:
        _write(args.out, json.dumps(result["report"], indent=2) + "\n")
        print(f"wrote comparison report to {args.out}")
    return 0


def cmd_experiment(client: ServiceClient, args) -> int:
    """Run the ordered steps of a declarative experiment file."""
    path = args.experiment_file or args.config
    if not path:
        raise CliError("experiment needs a file argument or --config")
    try:
        config = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"cannot parse {path}: {exc}")
    steps = config.get("experiment", {}).get("steps")
    if not isinstance(steps, list) or not steps:
        raise CliError(f"{path} has no experiment.steps list")
    for index, step in enumerate(steps):
        if not isinstance(step, dict) or "command" not in step:
            raise CliError(f"step {index} must be an object with a command")
        argv = _step_argv(step)
        if args.server:
            argv = ["--server", args.server, *argv]
        print(f"step {index + 1}/{len(steps)}: {' '.join(argv)}")
        code = main(argv)
        if code != 0:
            print(f"step {index + 1} failed with exit code {code}",
                  file=sys.stderr)
            return code
    return 0


def _step_argv(step: dict) -> list[str]:
    argv = [str(step["command"])]
    for key, value in step.items():
        if key == "command":
            continue
        flag = f"--{key.replace('_', '-')}"
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            for item in value:
                argv.extend([flag, str(item)])
        else:
            argv.extend([flag, str(value)])
    return argv


def cmd_serve(client: ServiceClient, args) -> int:
    try:
        import uvicorn
    except ImportError:
        raise CliError("serve requires uvicorn (pip install longcast[serve])")
    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_cohort_read_flags(parser):
    parser.add_argument("--map", action="append", metavar="FIELD=COLUMN",
                        help="override a column-name mapping (repeatable)")
    parser.add_argument("--sentinels",
                        help="comma-separated missing-value sentinels")
    parser.add_argument("--strict", action="store_true",
                        help="reject out-of-range values and duplicates")


def _add_predictor_flags(parser):
    parser.add_argument("--kind", default="constant-median",
                        choices=["constant-median", "carry-forward", "knn",
                                 "bridge"])
    parser.add_argument("--hp", action="append", metavar="KEY=VALUE",
                        help="predictor hyperparameter (repeatable)")
    parser.add_argument("--host-cmd",
                        help=f"bridge host command line (or ${HOST_CMD_ENV})")
    parser.add_argument("--timeout", type=float, default=None,
                        help="bridge session timeout in seconds")
    parser.add_argument("--name", default="",
                        help="model name used in reports")


def build_parser() -> _Parser:
    parser = _Parser(prog="longcast",
                     description="longitudinal-to-cross-sectional "
                                 "forecasting pipeline")
    parser.add_argument("--server",
                        default=os.environ.get(SERVER_ENV),
                        help=f"service URL (default: in-process; or ${SERVER_ENV})")
    parser.add_argument("--config", help="JSON file with per-subcommand "
                                         "flag defaults")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", parents=[], help="generate a synthetic cohort")
    p.add_argument("--patients", type=int, default=10)
    p.add_argument("--visits", type=int, default=4)
    p.add_argument("--max-visits", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missingness", type=float, default=0.0)
    p.add_argument("--d2-fraction", type=float, default=0.5)
    p.add_argument("--out", default="cohort.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("transform", help="build per-task feature tables")
    p.add_argument("--task")
    p.add_argument("--input", help="cohort CSV")
    p.add_argument("--out", help="training table CSV")
    p.add_argument("--test-out", help="also write the D2 test table here")
    p.add_argument("--val-out", help="also write half-history validation "
                                     "rows here")
    p.add_argument("--no-augment", action="store_true",
                   help="emit only consecutive-visit rows")
    p.add_argument("--fixed-cutoff", action="store_true",
                   help="test rows share one cutoff per patient")
    p.add_argument("--vent-scale", type=float, default=1.0,
                   help="scale applied to the ventricle/ICV target")
    p.add_argument("--jobs", type=int, default=1,
                   help="per-patient parallelism bound")
    _add_cohort_read_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("split", help="assign patients to disjoint folds")
    p.add_argument("--task")
    p.add_argument("--input", help="feature table CSV")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--out", default="folds.csv")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit-eval", help="fit a predictor and report metrics")
    p.add_argument("--task")
    p.add_argument("--mode", choices=["holdout", "cv"], default="holdout")
    p.add_argument("--train", help="training table CSV")
    p.add_argument("--test", help="test table CSV (holdout mode)")
    p.add_argument("--val", help="validation table CSV (cv mode)")
    p.add_argument("--folds", help="fold assignment CSV (cv mode)")
    p.add_argument("--k", type=int, default=5,
                   help="fold count when --folds is not given")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--seed-scope", choices=["folds", "predictor", "both"],
                   default="both")
    p.add_argument("--report-out", default="reports.json")
    p.add_argument("--pred-out", help="write prediction CSVs to this path "
                                      "(per-seed suffix when several seeds)")
    p.add_argument("--jobs", type=int, default=1,
                   help="per-fold parallelism bound (cv mode)")
    _add_predictor_flags(p)
    p.set_defaults(func=cmd_fit_eval)

    p = sub.add_parser("forecast", help="predict over a horizon grid")
    p.add_argument("--task")
    p.add_argument("--cohort", help="cohort CSV")
    p.add_argument("--train", help="training table CSV")
    p.add_argument("--horizons", help="lo:hi or comma list of months "
                                      "(default 1:60)")
    p.add_argument("--vent-scale", type=float, default=1.0)
    p.add_argument("--out", default="forecast.csv")
    _add_cohort_read_flags(p)
    _add_predictor_flags(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("compare", help="Wilcoxon test between two reports")
    p.add_argument("--a", help="first metric report JSON")
    p.add_argument("--b", help="second metric report JSON")
    p.add_argument("--metric", help="metric name when a file holds several")
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--out", help="write the comparison report JSON here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment",
                       help="run the steps of a declarative experiment file")
    p.add_argument("experiment_file", nargs="?",
                   help="JSON file with an experiment.steps list "
                        "(defaults to --config)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


REQUIRED_FLAGS = {
    "transform": ("task", "input", "out"),
    "split": ("task", "input"),
    "fit-eval": ("task", "train"),
    "forecast": ("task", "cohort", "train"),
    "compare": ("a", "b"),
}

_VALUE_GLOBALS = ("--server", "--config")


def _find_command(argv: list[str]) -> Optional[str]:
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token in _VALUE_GLOBALS:
            skip = True
            continue
        if not token.startswith("-"):
            return token
    return None


def _apply_config_defaults(parser: _Parser, argv: list[str]) -> None:
    """Seed subcommand defaults from --config before the real parse, so
    explicit flags still override file values."""
    if "--config" not in argv:
        return
    index = argv.index("--config")
    if index + 1 >= len(argv):
        return
    path = argv[index + 1]
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load config {path}: {exc}")
    if not isinstance(config, dict):
        raise CliError(f"config {path} must be a JSON object")
    command = _find_command(argv)
    section = config.get(command or "", {})
    if not isinstance(section, dict):
        raise CliError(f"config section {command!r} must be a JSON object")
    defaults = {key.replace("-", "_"): value for key, value in section.items()}
    for action in parser._subparsers._group_actions:
        if command in getattr(action, "choices", {}):
            action.choices[command].set_defaults(**defaults)


def _check_required(args) -> None:
    for name in REQUIRED_FLAGS.get(args.command, ()):
        if getattr(args, name.replace("-", "_"), None) in (None, ""):
            raise CliError(f"{args.command} requires --{name} (flag or "
                           "config file)", error_class="usage")


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:       # argparse exits; surface the code
            return exc.code if isinstance(exc.code, int) else USAGE_EXIT
        if not getattr(args, "command", None):
            parser.print_help()
            return USAGE_EXIT
        _check_required(args)
        client = ServiceClient(server=args.server)
        return args.func(client, args)
    except CliError as exc:
        print(f"error ({exc.error_class}): {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.error_class, 1)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error (internal): {exc}", file=sys.stderr)
        return EXIT_CODES["internal"]


if __name__ == "__main__":
    sys.exit(main())
