"""Convergence rates of the Pearson and squared-CLT statistics to chi-square.

Writes one CSV row per (statistic, n) and prints the fitted log-log slopes.

    python3 scripts/rate_study.py --out rates.csv
"""
import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Tuple

from stein_chisq.distances import (
    SquaredCLTConfig,
    kolmogorov_distance,
    rademacher_atom_check,
    rate_slope,
    smooth_distance,
)
from stein_chisq.statistics import MultinomialModel
from stein_chisq.test_functions import parse_descriptor

FIELDS = ("statistic", "n", "smooth", "kolmogorov")


@dataclass
class RateConfig:
    h: str = "cos:1"
    pearson_p: Tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    pearson_ns: Tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    clt_ns: Tuple[int, ...] = (16, 32, 64, 128, 256)
    clt_d: int = 2
    atom_ns: Tuple[int, ...] = (16, 64, 256, 1024, 4096)


def run(cfg: RateConfig, out):
    h = parse_descriptor(cfg.h)
    writer = csv.DictWriter(out, fieldnames=FIELDS)
    writer.writeheader()
    series = {"pearson": [], "squared-clt": [], "atom": []}
    for n in cfg.pearson_ns:
        model = MultinomialModel(n, cfg.pearson_p)
        sd = smooth_distance(model, h).value
        kd = kolmogorov_distance(model).value
        series["pearson"].append((n, sd))
        writer.writerow({"statistic": "pearson", "n": n, "smooth": sd, "kolmogorov": kd})
    for n in cfg.clt_ns:
        model = SquaredCLTConfig(n, cfg.clt_d)
        sd = smooth_distance(model, h).value
        kd = kolmogorov_distance(model).value
        series["squared-clt"].append((n, sd))
        writer.writerow({"statistic": "squared-clt", "n": n, "smooth": sd, "kolmogorov": kd})
    for n in cfg.atom_ns:
        exact, _, _ = rademacher_atom_check(n)
        series["atom"].append((n, exact))
        writer.writerow({"statistic": "atom", "n": n, "smooth": "", "kolmogorov": exact})
    for name, pts in series.items():
        slope, se = rate_slope(pts)
        print(f"{name:12s} slope {slope:+.3f} +- {se:.3f}", file=sys.stderr)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", default=RateConfig.h)
    ap.add_argument("--d", type=int, default=RateConfig.clt_d)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = RateConfig(h=args.h, clt_d=args.d)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            run(cfg, fh)
    else:
        run(cfg, sys.stdout)


if __name__ == "__main__":
    main()
