"""Exact Wick trace moments against Monte Carlo and the trace-moment bound on
random factor models.

    python3 scripts/run_wick.py configs/wick.json --out results/
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from mpdaniell.cli import render_json
from mpdaniell.experiments import ExperimentConfig, run_wick


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    cfg = ExperimentConfig.load(args.config)
    cfg = replace(cfg, threads=args.threads)
    report = run_wick(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.config.stem}.json"
    path.write_text(render_json(report))

    for key, value in report["summary"].items():
        print(f"{key:>18}: {value}")
    # how tight is the bound? ratio exact / bound per instance
    ratios = [r["exact"] / r["bound"] for r in report["instances"] if r["exact"] is not None]
    if ratios:
        print(f"{'exact/bound':>18}: min {min(ratios):.3g}, max {max(ratios):.3g}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
