"""Deterministic SVG figures: boundary curves, conformal parameter curves, moduli sweeps."""
from __future__ import annotations

import io
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .persist import atomic_write  # noqa: E402

SALT = "serrin"
BOUNDARY = dict(color="black", lw=1.6)
PARAM = dict(color="0.55", lw=0.4)
HILITE = dict(color="tab:red", lw=1.0)


def _svg_text(fig) -> str:
    plt.rcParams["svg.hashsalt"] = SALT
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "serrin"})
    plt.close(fig)
    return buf.getvalue()


def save_svg(fig, path) -> Path:
    return atomic_write(path, _svg_text(fig))


def domain_figure(boundary: Sequence, x_curves: Sequence = (), y_curves: Sequence = (),
                  highlight: Sequence = (), title: str = "", extra: Sequence = ()):
    """Boundary polylines stroked, parameter curves thin, highlighted curves in colour."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for c in x_curves:
        ax.plot(np.real(c), np.imag(c), **PARAM)
    for c in y_curves:
        ax.plot(np.real(c), np.imag(c), **PARAM)
    for c in highlight:
        ax.plot(np.real(c), np.imag(c), **HILITE)
    for c in extra:
        ax.plot(np.real(c), np.imag(c), color="tab:blue", lw=0.6, ls="--")
    for c in boundary:
        ax.plot(np.real(c), np.imag(c), **BOUNDARY)
    ax.set_aspect("equal")
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return fig


def ring_figure(dev, s: float, s_star: float, path, nx_lines: int = 9, ny_lines: int = 24, m: int = 2048,
                title: str = "") -> Path:
    period = dev.period
    xs = np.linspace(s, s_star, nx_lines + 2)[1:-1]
    y = period * np.arange(m + 1) / m
    x_curves = [dev.g(x0 + 1j * y) for x0 in xs]
    xx = np.linspace(s, s_star, 257)
    y_curves = [dev.g(xx + 1j * y0) for y0 in period * np.arange(ny_lines) / ny_lines]
    boundary = [dev.g(s + 1j * y), dev.g(s_star + 1j * y)]
    unit = [dev.g(1j * y)] if s < 0 < s_star else []
    return save_svg(domain_figure(boundary, x_curves, y_curves, unit, title), path)


def band_figure(dev, x_star: float, vartheta: float, path, periods: int = 3, scale: float = 1.0,
                nx_lines: int = 7, ny_lines: int = 8, m: int = 1024, disks: bool = False,
                title: str = "") -> Path:
    y0, y1 = -vartheta, -vartheta + 2 * vartheta * periods
    y = np.linspace(y0, y1, m * periods + 1)
    x_curves = [scale * dev.g(x0 + 1j * y) for x0 in np.linspace(-x_star, x_star, nx_lines + 2)[1:-1]]
    xx = np.linspace(-x_star, x_star, 257)
    ys = np.linspace(y0, y1, ny_lines * periods + 1)
    y_curves = [scale * dev.g(xx + 1j * t) for t in ys]
    boundary = [scale * dev.g(-x_star + 1j * y), scale * dev.g(x_star + 1j * y)]
    extra = []
    if disks:
        t = np.linspace(0, 2 * np.pi, 257)
        shift = scale * complex(dev.g(1j * (vartheta * 2)) - dev.g(0j))
        c0 = scale * complex(dev.g(0j))
        extra = [c0 + k * shift + 2 * np.exp(1j * t) for k in range(periods)]
    return save_svg(domain_figure(boundary, x_curves, y_curves, (), title, extra), path)


def payload_figure(data: dict, path, stride: Optional[int] = None) -> Path:
    """Redraw a stored domain or band from its grid samples and boundary curves."""
    arr = data["arrays"]
    g = np.asarray(arr["re_g"]) + 1j * np.asarray(arr["im_g"])
    nx, ny = g.shape
    sx = stride or max(1, nx // 10)
    sy = stride or max(1, ny // 16)
    x_curves = [g[i] for i in range(0, nx, sx)]
    y_curves = [g[:, j] for j in range(0, ny, sy)]
    boundary = [np.asarray(c["re"]) + 1j * np.asarray(c["im"]) for c in data.get("curves", [])]
    if not boundary:
        boundary = [g[0], g[-1]]
    md = data.get("metadata", {})
    title = ", ".join(f"{k}={md[k]:.6g}" for k in ("n", "tau", "s") if isinstance(md.get(k), (int, float)))
    return save_svg(domain_figure(boundary, x_curves, y_curves, (), title), path)


def sweep_figure(taus, h0, h1, path, loci: Sequence = (), title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(h0, taus, color="black", lw=1.2, label="lower bound")
    ax.plot(h1, taus, color="black", lw=1.2, ls="--", label="upper bound")
    for curve in loci:
        pts = np.asarray(curve.as_array())
        if pts.size:
            ax.plot(pts[:, 0], pts[:, 1], lw=1.0, label=curve.name)
    ax.set_xlabel("s")
    ax.set_ylabel("tau")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    return save_svg(fig, path)
