"""Adiabatic runtime T* reaching a target fidelity, against qubit count.

    python scripts/runtime_scaling.py --family grover --sizes 4 5 6 7 8 9 10
"""
import argparse
from pathlib import Path

from aqclab.builders import grover_family, separable_pair
from aqclab.evolution import runtime_scaling_study

FAMILIES = {"separable": separable_pair, "grover": grover_family}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=sorted(FAMILIES), default="grover")
    ap.add_argument("--sizes", type=int, nargs="+", default=list(range(4, 11)))
    ap.add_argument("--f-star", type=float, default=0.9)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/runtime_scaling"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    study = runtime_scaling_study(FAMILIES[args.family], args.sizes, args.f_star,
                                  workers=args.workers, name=args.family)
    for r in study.rows:
        print(f"n={r.n:2d}  g_min={r.g_min:.5f}  T*={r.T_star:9.2f}  F={r.fidelity:.5f}")
    for name, fit in study.fits().items():
        print(f"{name}: slope {fit['slope']:.4f}")
    study.to_csv(args.out / f"{args.family}.csv")
    study.to_json(args.out / f"{args.family}.json")


if __name__ == "__main__":
    main()
