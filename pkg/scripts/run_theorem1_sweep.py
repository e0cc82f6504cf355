"""Convergence sweep: median BL distance between the smoothed-periodogram ESD
and the discretized limit law, per sample size.

    python3 scripts/run_theorem1_sweep.py configs/theorem1_white_noise.json --out results/
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from mpdaniell.cli import render_csv
from mpdaniell.experiments import THEOREM1_COLUMNS, ExperimentConfig, median_by_n, run_theorem1


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    cfg = ExperimentConfig.load(args.config)
    cfg = replace(cfg, threads=args.threads)
    rows = run_theorem1(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.config.stem}.csv"
    path.write_text(render_csv(rows, THEOREM1_COLUMNS))

    print(f"{'n':>8} {'m':>5} {'d':>5} {'median dBL':>12}")
    scheds = {s.n: s for s in cfg.schedules()}
    for n, med in median_by_n(rows).items():
        print(f"{n:8d} {scheds[n].m:5d} {scheds[n].d:5d} {med:12.6f}")
    failed = sum(bool(r["error"]) for r in rows)
    if failed:
        print(f"{failed} rows recorded errors; see {path}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
