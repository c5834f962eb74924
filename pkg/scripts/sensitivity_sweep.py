#!/usr/bin/env python3
"""Uniform-sensitivity estimates versus arm count on the weighted star.

Every per-arm map scrambles its own arm, so proximality evidence holds for
all ball pairs, yet the smallest arm caps the uniform diameter bound: the
eta estimate halves with every added arm, so no single eta works for all of
them at once.
"""

import argparse
from fractions import Fraction

from dendro.chaos import SetFamily, verdict
from dendro.gallery import build_counterexample
from dendro.metric_tree import ball


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--arms", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--N", type=int, default=200)
    args = ap.parse_args()

    for arms in args.arms:
        D, Fm = build_counterexample("omega_star_gch", arms=arms,
                                     q=Fraction(1, 2))
        members = []
        for i, e in enumerate(D.edges):
            mid = D.point(i, e.length / 2)
            members.append(ball(D, mid, e.length / 4))
        rep = verdict(Fm, SetFamily("explicit", members=tuple(members)),
                      N=args.N)
        print(
            f"arms={arms:>3}  prox_pass={rep.prox_pass}  "
            f"eta_estimate={rep.eta_estimate}"
        )


if __name__ == "__main__":
    main()
