"""Distances between the smoothed periodogram and its two simplified versions
(circular process, and transfer function times the innovation periodogram).

    python3 scripts/run_prop1.py configs/prop1_ma2.json
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mpdaniell.cli import render_csv
from mpdaniell.experiments import PROP1_COLUMNS, ExperimentConfig, median_by_n, run_prop1

STATS = ("dbl_s_sprime", "dbl_s_stilde", "dbl_stilde_sprime")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()

    cfg = ExperimentConfig.load(args.config)
    rows = run_prop1(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.config.stem}.csv"
    path.write_text(render_csv(rows, PROP1_COLUMNS))

    medians = {col: median_by_n(rows, col) for col in STATS}
    print(f"{'n':>8} " + " ".join(f"{c:>18}" for c in STATS))
    for n in sorted(medians[STATS[0]]):
        print(f"{n:8d} " + " ".join(f"{medians[c][n]:18.6f}" for c in STATS))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
