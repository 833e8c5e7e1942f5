"""Run every figure preset and, when risplot is installed, render the PNGs.

Usage: python scripts/make_figures.py [outdir] [--trials N] [--seed N]
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

from risrsma.cli import PRESETS


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", nargs="?", default="figures")
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        from risplot import PlotSpec, render
    except ImportError:
        render = None
        print("risplot not installed; writing CSVs only", file=sys.stderr)

    for name in PRESETS:
        csv_path = outdir / f"{name}.csv"
        t0 = time.time()
        proc = subprocess.run(
            [
                sys.executable, "-m", "risrsma.cli", "preset", name,
                "--out", str(csv_path),
                "--trials", str(args.trials), "--seed", str(args.seed),
            ]
        )
        if proc.returncode != 0:
            return proc.returncode
        msg = f"{name}: {csv_path} ({time.time() - t0:.1f}s)"
        if render is not None:
            png = outdir / f"{name}.png"
            render(PlotSpec(csv_path=csv_path, preset=name, out_path=png))
            msg += f" -> {png}"
        print(msg, flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
