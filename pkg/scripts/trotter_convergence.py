"""Error of the product approximant of exp(-H(s)) against the dense exponential.

    python scripts/trotter_convergence.py --n 6 --s 0.5
"""
import argparse

import numpy as np
import scipy.linalg as sla

from aqclab.builders import separable_pair
from aqclab.hilbert import to_dense
from aqclab.positivity import trotter_exp_action


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--s", type=float, default=0.5)
    ap.add_argument("--vectors", type=int, default=10)
    ap.add_argument("--max-m", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    fam = separable_pair(args.n)
    vs = np.random.default_rng(args.seed).standard_normal((2**args.n, args.vectors))
    vs /= np.linalg.norm(vs, axis=0)
    ref = sla.expm(-to_dense(fam.at(args.s))) @ vs
    print(f"{'m':>6} {'first order':>12} {'symmetric':>12}")
    m = 16
    while m <= args.max_m:
        e1, e2 = (np.max(np.linalg.norm(trotter_exp_action(fam, args.s, m, vs, sym) - ref, axis=0))
                  for sym in (False, True))
        print(f"{m:6d} {e1:12.4e} {e2:12.4e}")
        m *= 2


if __name__ == "__main__":
    main()
