"""Minimal channels per link that keep a repeater line entangled, for several noise levels.

    python3 scripts/run_scaling.py --p 0.05 0.1 0.2 --out results/scaling.csv
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

from echain.chain import format_number
from echain.repeater import ScalingSweepConfig, simulate_scaling


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--p", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    parser.add_argument("--n", type=int, nargs="+", default=[4, 16, 64, 256, 1024])
    parser.add_argument("--m", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32, 64])
    parser.add_argument("--out", type=Path, default=Path("results/scaling.csv"))
    args = parser.parse_args()

    fields = ["p", "n", "m_min", "offset", "bound_value"]
    rows = []
    for p in args.p:
        res = simulate_scaling(ScalingSweepConfig(p, args.n, args.m))
        bounds = {r["n"]: r["bound_value"] for r in res.rows}
        for n in args.n:
            rows.append({"p": p, "n": n, "m_min": res.m_min[n], "offset": res.offsets.get(n), "bound_value": bounds[n]})
        c0 = "none" if res.c0 is None else f"{res.c0:.4f}"
        print(f"p={p}: m_min={res.m_min} nondecreasing={res.nondecreasing} c0={c0}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([format_number(row[f]) for f in fields])


if __name__ == "__main__":
    main()
