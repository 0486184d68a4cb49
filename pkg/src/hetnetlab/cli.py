"""Command-line entry point: ``hetnet <command> --spec <file> [--seed N] [--out PATH] [--trials N]``.

Each command writes a CSV and a ``<out>.meta.json`` sidecar holding the
resolved spec, the seed and where it came from, the defaults that were
filled in, library versions and a summary.  Reruns with the same experiment file and
seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
import pydantic

from . import __version__
from .config import COMMANDS, SpecError, defaulted_fields, load_spec, spec_to_jsonable
from .experiments import DEFAULT_TRIALS, RUNNERS

SEED_ENV = "HETNET_SEED"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def resolve_seed(cli_seed, spec_seed) -> tuple[int, str]:
    if cli_seed is not None:
        return cli_seed, "cli"
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            value = int(env)
        except ValueError:
            raise SpecError(f"{SEED_ENV}={env!r} is not an integer") from None
        if not 0 <= value < 2**64:
            raise SpecError(f"{SEED_ENV} must lie in [0, 2^64)")
        return value, "env"
    if spec_seed is not None:
        return spec_seed, "spec"
    return 0, "default"


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetnet", description="Cell-free HetNet experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="JSON experiment file")
        p.add_argument("--seed", type=_u64, default=None)
        p.add_argument("--out", default=None, help="CSV output path")
        p.add_argument("--trials", type=_positive, default=None)
    return parser


def run(command: str, spec_path, seed=None, out=None, trials=None) -> int:
    spec = load_spec(spec_path)
    if spec.command != command:
        raise SpecError(f"{spec_path}: file is for '{spec.command}', not '{command}'")
    seed, seed_source = resolve_seed(seed, spec.seed)
    if trials is None:
        trials = spec.trials if spec.trials is not None else DEFAULT_TRIALS[command]
    out = Path(out or spec.output or f"{command}.csv")

    result = RUNNERS[command](spec, seed, trials)

    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, result.header, result.rows)
    extra = {}
    for suffix, writer in result.extra_files.items():
        path = out.with_name(out.stem + suffix)
        writer(path)
        extra[suffix.lstrip(".")] = path.name
    meta = {
        "command": command,
        "seed": seed,
        "seed_source": seed_source,
        "trials": trials,
        "spec": spec_to_jsonable(spec),
        "defaults_applied": defaulted_fields(spec),
        "versions": {"hetnetlab": __version__, "numpy": np.__version__, "pydantic": pydantic.VERSION},
        "outputs": {"csv": out.name, **extra},
        "summary": result.summary,
    }
    meta_path = out.with_name(out.name + ".meta.json")
    meta_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not result.ok:
        print(f"hetnet {command}: some rows exceed the tolerance, see {out}", file=sys.stderr)
        for row in result.rows:
            if row[-1] == 0:
                print(f"  mismatch: {dict(zip(result.header, row))}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.command, args.spec, args.seed, args.out, args.trials)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
