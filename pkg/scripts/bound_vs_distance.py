"""How loose are the explicit bounds?  Exact distances next to every applicable bound.

    python3 scripts/bound_vs_distance.py --out ratios.csv
"""
import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Tuple

from stein_chisq.bounds import (
    PEARSON_VARIANTS,
    NormBundle,
    bound_kolmogorov_pearson,
    bound_literature,
    bound_pearson_smooth,
    kolmogorov_optimized,
)
from stein_chisq.distances import kolmogorov_distance, smooth_distance
from stein_chisq.statistics import MultinomialModel
from stein_chisq.test_functions import parse_descriptor

FIELDS = ("n", "p", "quantity", "distance", "bound", "ratio")


@dataclass
class StudyConfig:
    h: str = "cos:1"
    ps: Tuple[Tuple[float, ...], ...] = ((0.5, 0.5), (0.2, 0.8), (0.2, 0.3, 0.5), (0.25,) * 4)
    ns: Tuple[int, ...] = (16, 64, 256)


def rows(cfg: StudyConfig):
    h = parse_descriptor(cfg.h)
    norms = NormBundle.of(h)
    for p in cfg.ps:
        for n in cfg.ns:
            model = MultinomialModel(n, p)
            if not model.cells_ok:
                continue
            tag = ",".join(f"{v:g}" for v in p)
            sd = smooth_distance(model, h).value
            for variant in PEARSON_VARIANTS:
                try:
                    b = bound_pearson_smooth(norms, model, variant).value
                except KeyError:
                    continue
                yield dict(n=n, p=tag, quantity=f"smooth/{variant}", distance=sd, bound=b, ratio=sd / b)
            kd = kolmogorov_distance(model).value
            bounds = {"kolmogorov/stated": bound_kolmogorov_pearson(n, p).value,
                      "kolmogorov/optimized": kolmogorov_optimized(n, p)[1]}
            bounds.update(zip(("kolmogorov/literature-m", "kolmogorov/literature-m^1/4"),
                              bound_literature(n, p)))
            for name, b in bounds.items():
                yield dict(n=n, p=tag, quantity=name, distance=kd, bound=b, ratio=kd / b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", default=StudyConfig.h)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=FIELDS)
        writer.writeheader()
        for row in rows(StudyConfig(h=args.h)):
            writer.writerow(row)
    finally:
        if args.out:
            out.close()


if __name__ == "__main__":
    main()
