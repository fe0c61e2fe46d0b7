"""Render the standard figure set: rings for n = 2, 3, 4, a near-tangency ring,
bands at tau = 0.5, 1 and 0.01 (rescaled), and the necklace limit."""
import argparse
import math
from pathlib import Path

import numpy as np

from serrin.band_domain import band_solution, flat_band
from serrin.figures import band_figure, domain_figure, ring_figure, save_svg
from serrin.moduli import embed_bounds_for
from serrin.ring_domain import necklace_circle, ring_domain


def rings(out: Path, tau: float):
    for n in (2, 3, 4):
        fld, (h0, h1) = ring_domain(n, tau, nx=81, ny=161)
        p = ring_figure(fld.dev, fld.s, fld.s_star, out / f"ring_n{n}.svg",
                        title=f"n={n}, tau={tau:g}, s={fld.s:.5g} in ({h0:.4g}, {h1:.4g})")
        print("wrote", p)


def near_tangency(out: Path, n: int, tau: float, frac: float):
    h0, h1 = embed_bounds_for(n, tau)
    s = h0 + frac * (h1 - h0)
    fld, _ = ring_domain(n, tau, s, nx=81, ny=161)
    p = ring_figure(fld.dev, fld.s, fld.s_star, out / f"ring_n{n}_near_tangent.svg",
                    title=f"n={n}, tau={tau:g}, s={s:.6g} near the lower window edge")
    print("wrote", p)


def bands(out: Path):
    sol = band_solution(0.5, nx=81, ny=161)
    print("wrote", band_figure(sol.dev, sol.x_star, sol.vartheta, out / "band_tau0.5.svg", title="tau=0.5"))
    fb = flat_band(41, 81)
    print("wrote", band_figure(fb.dev, fb.x_star, fb.vartheta, out / "band_tau1.svg", periods=1, title="tau=1"))
    tau = 0.01
    sol = band_solution(tau, nx=81, ny=161)
    print("wrote", band_figure(sol.dev, sol.x_star, sol.vartheta, out / "band_tau0.01_rescaled.svg",
                               scale=math.sqrt(tau), disks=True, title="tau=0.01, rescaled by sqrt(tau)"))


def necklace(out: Path, n: int):
    t = np.linspace(0, 2 * np.pi, 513)
    circles = []
    for k in range(n):
        c, r = necklace_circle(n, -math.pi)
        rot = np.exp(2j * np.pi * k / n)
        circles.append(rot * (c + r * np.exp(1j * t)))
    unit = [np.exp(1j * t)]
    fig = domain_figure(circles, highlight=unit, title=f"necklace limit, n={n}")
    print("wrote", save_svg(fig, out / f"necklace_n{n}.svg"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--tangent-frac", type=float, default=0.02, help="position inside the window, 0 = lower edge")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rings(out, args.tau)
    near_tangency(out, 3, args.tau, args.tangent_frac)
    bands(out)
    necklace(out, 3)


if __name__ == "__main__":
    main()
