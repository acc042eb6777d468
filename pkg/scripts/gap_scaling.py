"""Minimum gap against qubit count for the Grover and GH1 search families.

    python scripts/gap_scaling.py --max-n 12 --out results/gap_scaling

Grover sizes use the full-space iterative sweep; GH1 additionally reports the
(n+1)-dimensional symmetric-subspace minimum, which reaches much larger n.
"""
import argparse
from pathlib import Path

import numpy as np

from aqclab.builders import gh1_family, grover_family, separable_pair
from aqclab.gaps import gap_sweep, reduced_gap_minimum, reduced_search_subspace
from aqclab.io import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min-n", type=int, default=4)
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--max-reduced-n", type=int, default=20)
    ap.add_argument("--grid", type=int, default=101)
    ap.add_argument("--out", type=Path, default=Path("results/gap_scaling"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for n in range(args.min_n, args.max_n + 1):
        p = gap_sweep(grover_family(n), args.grid)
        rows.append((n, p.g_min, p.s_star))
        print(f"grover n={n:2d}  g_min={p.g_min:.6e}  s*={p.s_star:.4f}")
    write_csv(args.out / "grover.csv", ["n", "g_min", "s_star"], rows)
    ns, g = np.array([r[0] for r in rows]), np.array([r[1] for r in rows])
    print(f"grover: log2 g_min slope {np.polyfit(ns, np.log2(g), 1)[0]:.4f}")

    rows = []
    for n in range(args.min_n, args.max_reduced_n + 1):
        s, g = reduced_gap_minimum(reduced_search_subspace(gh1_family(separable_pair(n), 0), 0))
        rows.append((n, g, s))
        print(f"gh1    n={n:2d}  g_min={g:.6e}  s*={s:.4f}")
    write_csv(args.out / "gh1_reduced.csv", ["n", "g_min", "s_star"], rows)
    steps = np.diff(np.log([r[1] for r in rows]))
    print(f"gh1: successive d log g_min from {steps[0]:.3f} to {steps[-1]:.3f}")


if __name__ == "__main__":
    main()
