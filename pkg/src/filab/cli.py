"""Command-line runner: ``filab list | run <experiment> | suite``.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 usage error or
unknown experiment, 3 invalid configuration or resource cap, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema

from . import __version__, schemas
from .errors import FilabError, InvalidConfigError, ResourceLimitError
from .experiments import REGISTRY, run_experiment, suite
from .tolerances import DEFAULT as DEFAULT_TOLERANCES

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4
OUT_ENV = "FILAB_OUT"


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "filab-out"))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, rows: list, out: Path, write_csv: bool = True) -> Path:
    schemas.validate(report, "report")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report['experiment']}.json"
    path.write_text(dump_json(report))
    if write_csv and rows:
        cols = schemas.load("csv_columns")["experiments"].get(report["experiment"]) or list(rows[0])
        with open(out / f"{report['experiment']}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
    return path


def load_config(path) -> dict:
    cfg = json.loads(Path(path).read_text())
    try:
        schemas.validate(cfg, "config")
    except jsonschema.ValidationError as exc:
        raise InvalidConfigError(f"{path}: {exc.message}") from None
    # unknown tolerance names are a config error
    DEFAULT_TOLERANCES.updated(cfg.get("tolerances", {}))
    return cfg


def _line(name: str, report: dict) -> str:
    status = "PASS" if report.get("pass") else "FAIL"
    extra = report.get("error") or ", ".join(a["name"] for a in report.get("assertions", [])
                                             if not a["pass"])
    return f"{status}  {name}" + (f"  ({extra})" if extra else "")


def cmd_list(args) -> int:
    width = max(map(len, REGISTRY))
    for exp in REGISTRY.values():
        tag = "" if exp.primary else "  [extra]"
        print(f"{exp.name:<{width}}  {exp.description}{tag}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    if cfg.get("experiment", args.experiment) != args.experiment:
        print(f"config is for {cfg['experiment']!r}, not {args.experiment!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.experiment not in REGISTRY:
        print(f"unknown experiment {args.experiment!r}; try `filab list`", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else cfg.get("seed")
    trials = args.trials if args.trials is not None else cfg.get("trials")
    workers = args.workers or cfg.get("workers", 1)
    run = run_experiment(args.experiment, cfg.get("params"), seed=seed, trials=trials,
                         workers=workers)
    if cfg.get("tolerances"):
        run.report["tolerances"] = cfg["tolerances"]
    out = Path(args.out or cfg.get("out") or default_out())
    path = write_report(run.report, run.rows, out, write_csv=cfg.get("csv", True))
    print(_line(args.experiment, run.report))
    print(f"report: {path}")
    return EXIT_OK if run.report["pass"] else EXIT_FAIL


def cmd_suite(args) -> int:
    result = suite(seed=args.seed, workers=args.workers or 1)
    out = Path(args.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    for name, rep in result["experiments"].items():
        print(_line(name, rep))
        if "error" not in rep:
            write_report(rep, [], out, write_csv=False)
    summary = {"seed": result["seed"], "pass": result["pass"],
               "experiments": {n: r["pass"] for n, r in result["experiments"].items()}}
    (out / "suite.json").write_text(dump_json(summary))
    print(f"{sum(summary['experiments'].values())}/{len(summary['experiments'])} passed")
    return EXIT_OK if result["pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list experiments").set_defaults(func=cmd_list)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./filab-out)")
    run.set_defaults(func=cmd_run)

    st = sub.add_parser("suite", help="run the acceptance battery")
    st.add_argument("--seed", type=int)
    st.add_argument("--workers", type=int)
    st.add_argument("--out")
    st.set_defaults(func=cmd_suite)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfigError, ResourceLimitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FilabError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
