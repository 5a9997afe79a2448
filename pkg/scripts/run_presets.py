#!/usr/bin/env python3
"""Run every preset through the full pipeline and print the comparison report."""

import argparse
from pathlib import Path

from bohmivr.cli import STAGES, compare_directory, run_pipeline
from bohmivr.config import PRESETS, preset_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--presets", nargs="+", choices=PRESETS, default=list(PRESETS))
    args = ap.parse_args()
    for name in args.presets:
        out = Path(args.out) / name
        manifest = run_pipeline(preset_config(name), STAGES, workers=args.workers, out=out)
        total = sum(manifest["timings_s"].values())
        print(f"== {name}  ({total:.1f}s, {len(manifest['files'])} files in {out})")
        for metric, value in compare_directory(out):
            print(f"  {metric:40s} {value:.6g}")


if __name__ == "__main__":
    main()
