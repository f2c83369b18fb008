#!/usr/bin/env python3
"""Cost-model figure data: preset comparison tables plus scaling sweeps.

Emits the three preset tables (filling-sweep, femoco, hubbard) and a pair of
epsilon sweeps (adaptive method vs plain sampling) as plot-ready CSV, then
prints the headline ratios: how far ahead method-2 is at each preset.

Usage:
    python3 scripts/run_cost_figures.py --out-dir figures/
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from qgelab import cli, cost


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="figures")
    parser.add_argument("--eps", type=float, default=1e-3)
    args = parser.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for preset in ("filling-sweep", "femoco", "hubbard"):
        code = cli.main(
            ["cost", "--preset", preset, "--eps", f"{args.eps:g}",
             "--out", str(out / preset.replace("-", "_"))]
        )
        if code != 0:
            return code

    for method in ("method-1", "shots"):
        code = cli.main(
            ["sweep", "--N", "4", "--k", "2", "--eta", "2", "--method", method,
             "--out", str(out / f"scaling_{method.replace('-', '_')}")]
        )
        if code != 0:
            return code

    # headline ratios at the chemistry-sized preset
    for k in (1, 2):
        params = cost.CostParams(N=152, k=k, eta=113, epsilon=args.eps)
        totals = {m: cost.total_queries(m, params) for m in cost.QGE_METHODS}
        print(
            f"N=152 k={k}: prior/method-2 = {totals['prior-qge'] / totals['method-2']:.1f}x, "
            f"method-1/method-2 = {totals['method-1'] / totals['method-2']:.1f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
