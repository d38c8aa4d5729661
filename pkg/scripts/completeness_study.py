"""Integrated-gradients completeness over many briefly trained models, at several step counts.

Each model is trained once and then evaluated at every requested step count.

    python scripts/completeness_study.py --steps 256 1024 --no-pooling
"""

import argparse

from lapool_lab.experiments import CompletenessStudy, run_completeness_study
from lapool_lab.pooling import PoolConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--steps", type=int, nargs="+", default=[256])
    ap.add_argument("--no-pooling", action="store_true", help="study the GIN ablation instead of LaPool")
    args = ap.parse_args()

    cfg = CompletenessStudy(
        models=args.models,
        epochs=args.epochs,
        steps=tuple(args.steps),
        pooling=None if args.no_pooling else PoolConfig(),
    )
    result = run_completeness_study(cfg)
    print(f"{'steps':>6}  {'max err':>9}  {'median':>9}  {'< 1%':>6}")
    for steps, r in result["by_steps"].items():
        print(f"{steps:>6}  {r['max_error']:9.3g}  {r['median_error']:9.3g}  {100 * r['fraction_below_1pct']:5.0f}%")

if __name__ == "__main__":
    main()
