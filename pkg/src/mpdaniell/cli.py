"""Command-line entry point: ``mpdaniell <subcommand> --config cfg.json``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import experiments as ex
from .mpsolver import NonConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

_COLUMNS = {
    "theorem1": ex.THEOREM1_COLUMNS,
    "prop1": ex.PROP1_COLUMNS,
    "density": ex.DENSITY_COLUMNS,
    "mp-solve": ex.MP_COLUMNS,
    "check-model": ex.SCHEDULE_COLUMNS,
    "wick": ["instance", "seed", "d", "M", "L", "b_norm", "gershgorin", "bound", "exact",
             "inequality", "mc_mean", "mc_stderr", "within_3se", "error"],
}


def _jsonable(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return x


def render_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    columns = list(columns)
    if rows and "runtime_ms" in rows[0]:
        columns.append("runtime_ms")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else ex.fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(payload: Any) -> str:
    return json.dumps(_jsonable(payload), indent=1) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpdaniell", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(_COLUMNS))
    parser.add_argument("--config", type=Path, help="JSON experiment configuration")
    parser.add_argument("--out", type=Path, help="output directory (default: stdout)")
    parser.add_argument("--seed", type=int, help="master seed; overrides the config seeds")
    parser.add_argument("--threads", type=int, help="worker processes")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--timing", action="store_true", help="add a runtime_ms column")
    return parser


def _load_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.timing:
        changes["timing"] = True
    return replace(cfg, **changes) if changes else cfg


def run(args: argparse.Namespace, cfg: ex.ExperimentConfig) -> tuple[str, str, int]:
    """Run a subcommand; returns (rendered output, file extension, exit code)."""
    cmd = args.command
    fmt = args.format or ("json" if cmd == "wick" else "csv")
    status = EXIT_OK
    if cmd == "wick":
        report = ex.run_wick(cfg)
        rows = report["instances"]
        if any(r["error"] for r in rows):
            status = EXIT_NUMERIC
        text = render_json(report) if fmt == "json" else render_csv(rows, _COLUMNS[cmd])
        return text, fmt, status
    runner = {
        "theorem1": ex.run_theorem1,
        "prop1": ex.run_prop1,
        "density": ex.emit_density,
        "mp-solve": ex.run_mp_solve,
        "check-model": ex.check_model,
    }[cmd]
    rows = runner(cfg)
    if any(r.get("error") for r in rows) or (cmd == "mp-solve" and not all(r["converged"] for r in rows)):
        status = EXIT_NUMERIC
    if cmd == "check-model" and not all(r["model_ok"] for r in rows):
        print("warning: model violates the coefficient-decay conditions", file=sys.stderr)
    text = render_json(rows) if fmt == "json" else render_csv(rows, _COLUMNS[cmd])
    return text, fmt, status


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        text, ext, status = run(args, cfg)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out_dir = args.out or (Path(cfg.output_dir) if cfg.output_dir else None)
    if out_dir is None:
        sys.stdout.write(text)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{args.command.replace('-', '_')}.{ext}").write_text(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
