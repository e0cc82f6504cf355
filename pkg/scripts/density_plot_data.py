"""Histogram of smoothed-periodogram eigenvalues next to the limiting density,
as CSV plot data; optionally an ASCII sketch for a quick look.

    python3 scripts/density_plot_data.py configs/density_white_noise.json --ascii
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mpdaniell.cli import render_csv
from mpdaniell.experiments import DENSITY_COLUMNS, ExperimentConfig, emit_density


def ascii_plot(rows, width: int = 60, height: int = 16) -> str:
    step = max(1, len(rows) // width)
    cols = rows[::step]
    top = max(max(r["esd_hist_density"], r["mp_density"]) for r in cols)
    lines = []
    for level in range(height, 0, -1):
        cut = top * (level - 0.5) / height
        line = "".join("*" if r["mp_density"] >= cut else ("#" if r["esd_hist_density"] >= cut else " ")
                       for r in cols)
        lines.append("|" + line)
    lines.append("+" + "-" * len(cols))
    lines.append(f" x from {cols[0]['x']:.3g} to {cols[-1]['x']:.3g}   (* limit density, # histogram only)")
    return "\n".join(lines)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--ascii", action="store_true")
    args = parser.parse_args()

    rows = emit_density(ExperimentConfig.load(args.config))
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.config.stem}.csv"
    path.write_text(render_csv(rows, DENSITY_COLUMNS))
    if args.ascii:
        print(ascii_plot(rows))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
