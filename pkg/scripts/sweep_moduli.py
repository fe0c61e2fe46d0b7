"""Tabulate the moduli and embedded window over tau for several n and print a summary."""
import argparse
from pathlib import Path

import numpy as np

from serrin.cli import SWEEP_HEADER, sweep_rows
from serrin.figures import sweep_figure
from serrin.moduli import bifurcation_loci
from serrin.persist import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--taus", type=int, default=19, help="number of tau values in [0.05, 0.95]")
    ap.add_argument("--loci", action="store_true", help="trace the bifurcation loci too (slower)")
    ap.add_argument("--out", default="sweeps")
    args = ap.parse_args()
    out = Path(args.out)
    taus = list(np.linspace(0.05, 0.95, args.taus))
    for n in args.n:
        rows = sweep_rows(n, taus)
        write_csv(out / f"sweep_n{n}.csv", SWEEP_HEADER, rows)
        ok = [r for r in rows if r[-1] == "ok"]
        loci = bifurcation_loci(n) if args.loci else ()
        sweep_figure([r[0] for r in ok], [r[4] for r in ok], [r[5] for r in ok], out / f"sweep_n{n}.svg", loci,
                     title=f"embedded window, n={n}")
        flips = [(r[0], j + 1) for r in ok for j in (0, 1) if r[13 + j]]
        print(f"n={n}: {len(ok)}/{len(rows)} rows ok, eta range [{min(r[1] for r in ok):.5f}, "
              f"{max(r[1] for r in ok):.5f}], psi sign changes at {[(round(float(t), 3), j) for t, j in flips]}")


if __name__ == "__main__":
    main()
