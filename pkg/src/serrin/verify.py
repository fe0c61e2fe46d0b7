"""Finite-difference residuals, boundary statistics, Hopf estimate and polyline simplicity."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import DomainError, FormatError

# one-sided first-derivative stencils on nodes 0..k-1 (forward)
_ONE_SIDED = {
    5: np.array([-25, 48, -36, 16, -3]) / 12.0,
    6: np.array([-137 / 60, 5, -5, 10 / 3, -5 / 4, 1 / 5]),
}
_C1 = np.array([1, -8, 0, 8, -1]) / 12.0
_C2 = np.array([-1, 16, -30, 16, -1]) / 12.0
# one-sided second-derivative stencil, 4th order, nodes 0..5
_C2_EDGE = np.array([15 / 4, -77 / 6, 107 / 6, -13, 61 / 12, -5 / 6])
_C1_EDGE = _ONE_SIDED[5]


def spacing(t) -> float:
    t = np.asarray(t, dtype=float)
    if t.size < 5:
        raise FormatError("need at least 5 nodes per direction")
    d = np.diff(t)
    h = float(d.mean())
    if np.max(np.abs(d - h)) > 1e-9 * max(abs(h), 1e-300) + 1e-13:
        raise FormatError("grid is not uniform")
    return h


def d1(f, h: float, axis: int = 0) -> np.ndarray:
    """4th-order first derivative; centred inside, one-sided on the two edge layers."""
    f = np.asarray(f)
    g = np.moveaxis(f, axis, 0)
    n = g.shape[0]
    out = np.empty_like(g)
    out[2:n - 2] = sum(_C1[j] * g[j:n - 4 + j] for j in range(5))
    for i in (0, 1):
        out[i] = sum(_C1_EDGE[j] * g[j] for j in range(5)) if i == 0 else (
            -3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / 12.0
        out[n - 1 - i] = -(sum(_C1_EDGE[j] * g[n - 1 - j] for j in range(5)) if i == 0 else (
            -3 * g[n - 1] - 10 * g[n - 2] + 18 * g[n - 3] - 6 * g[n - 4] + g[n - 5]) / 12.0)
    return np.moveaxis(out / h, 0, axis)


def d2(f, h: float, axis: int = 0) -> np.ndarray:
    """4th-order second derivative (one-sided 6-point stencils on the edge layers)."""
    f = np.asarray(f)
    g = np.moveaxis(f, axis, 0)
    n = g.shape[0]
    if n < 6:
        raise FormatError("second derivative needs at least 6 nodes")
    out = np.empty_like(g)
    out[2:n - 2] = sum(_C2[j] * g[j:n - 4 + j] for j in range(5))
    out[0] = sum(_C2_EDGE[j] * g[j] for j in range(6))
    out[n - 1] = sum(_C2_EDGE[j] * g[n - 1 - j] for j in range(6))
    # node 1: shifted stencil
    s1 = np.array([5 / 6, -5 / 4, -1 / 3, 7 / 6, -1 / 2, 1 / 12])
    out[1] = sum(s1[j] * g[j] for j in range(6))
    out[n - 2] = sum(s1[j] * g[n - 1 - j] for j in range(6))
    return np.moveaxis(out / (h * h), 0, axis)


def fd_laplacian(f, hx: float, hy: float) -> np.ndarray:
    """4th-order Laplacian on the full grid; use ``interior`` to drop the two edge layers."""
    f = np.asarray(f, dtype=float)
    if min(f.shape) < 6:
        raise FormatError("grid needs at least 6 nodes per direction")
    return d2(f, hx, 0) + d2(f, hy, 1)


def interior(a, k: int = 2):
    return a[k:-k, k:-k]


def boundary_dx(f, h: float, side: int, order: int = 6) -> np.ndarray:
    """One-sided x-derivative on the first (side=0) or last (side=-1) row."""
    c = _ONE_SIDED[order]
    k = len(c)
    if side == 0:
        return np.tensordot(c, f[:k], axes=1) / h
    return -np.tensordot(c, f[::-1][:k], axes=1) / h


def constancy(vals, rel: float = 1e-6, abs_tol: float = 1e-8) -> dict:
    vals = np.asarray(vals, dtype=float)
    m = float(np.mean(vals))
    sd = float(np.std(vals))
    ok = sd / abs(m) < rel if abs(m) > abs_tol else sd < abs_tol
    return {"mean": m, "stdev": sd, "relative": sd / abs(m) if m != 0 else math.inf, "ok": bool(ok)}


def hopf_field(v, omega, hx: float, hy: float) -> np.ndarray:
    """v_zz - 2 omega_z v_z by finite differences."""
    vx, vy = d1(v, hx, 0), d1(v, hy, 1)
    vxx, vyy = d2(v, hx, 0), d2(v, hy, 1)
    vxy = d1(vx, hy, 1)
    wx, wy = d1(omega, hx, 0), d1(omega, hy, 1)
    vzz = 0.25 * (vxx - vyy - 2j * vxy)
    return vzz - 2 * (0.5 * (wx - 1j * wy)) * (0.5 * (vx - 1j * vy))


def hopf_estimate(v, omega, hx: float, hy: float, margin: int = 3) -> tuple:
    """(mean, stdev) of the FD Hopf differential over interior nodes; stdev of the complex deviation."""
    q = hopf_field(v, omega, hx, hy)[margin:-margin, margin:-margin]
    m = complex(np.mean(q))
    return m, float(np.sqrt(np.mean(np.abs(q - m) ** 2)))


def capillary_residual(v_col, vx_col, g_col, gp_col, c=None) -> dict:
    """Fit v = a + c sigma + L and v_x = b e^omega + c sigma_x + L_x along one x0 curve.

    sigma = -|g|^2/2 and L = d1 Re g + d2 Im g.  When ``c`` is given only
    (a, d1, d2) and (b, d1, d2) are fitted.  The returned r1, r2 are the
    standard deviations of the two fit residuals.
    """
    g = np.asarray(g_col)
    gp = np.asarray(gp_col)
    sig = -0.5 * np.abs(g) ** 2
    sig_x = -np.real(np.conj(g) * gp)
    e_om = np.abs(gp)
    one = np.ones_like(sig)
    if c is None:
        A1 = np.column_stack([one, sig, g.real, g.imag])
        A2 = np.column_stack([e_om, sig_x, gp.real, gp.imag])
        y1, y2 = np.asarray(v_col), np.asarray(vx_col)
    else:
        A1 = np.column_stack([one, g.real, g.imag])
        A2 = np.column_stack([e_om, gp.real, gp.imag])
        y1, y2 = np.asarray(v_col) - c * sig, np.asarray(vx_col) - c * sig_x
    out = {}
    for key, A, y in (("r1", A1, y1), ("r2", A2, y2)):
        if np.linalg.cond(A) > 1e12:
            out["skip"] = True
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        out[key] = float(np.std(y - A @ coef))
        out[key + "_coef"] = coef.tolist()
    if c is not None:
        out["a"], out["d1"], out["d2"] = out["r1_coef"]
        out["b"] = out["r2_coef"][0]
    return out


# ---------------------------------------------------------------------------
# polyline simplicity


def _orient_exact(a, b, c) -> int:
    fa = [Fraction(float(t)) for t in (a.real, a.imag, b.real, b.imag, c.real, c.imag)]
    d = (fa[2] - fa[0]) * (fa[5] - fa[1]) - (fa[3] - fa[1]) * (fa[4] - fa[0])
    return (d > 0) - (d < 0)


def orient(a: complex, b: complex, c: complex) -> int:
    """Sign of the orientation determinant, exact via rationals when the float value is unsafe."""
    d = (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)
    mag = (abs(b.real - a.real) * abs(c.imag - a.imag) + abs(b.imag - a.imag) * abs(c.real - a.real))
    if abs(d) > 4 * np.finfo(float).eps * mag:
        return 1 if d > 0 else -1
    return _orient_exact(a, b, c)


def _orient_vec(a, b, c) -> np.ndarray:
    """Vectorised orientation sign; entries with an unsafe float determinant fall back to exact."""
    ux, uy = b.real - a.real, b.imag - a.imag
    wx, wy = c.real - a.real, c.imag - a.imag
    d = ux * wy - uy * wx
    mag = np.abs(ux * wy) + np.abs(uy * wx)
    out = np.sign(d).astype(int)
    bad = np.nonzero(np.abs(d) <= 4 * np.finfo(float).eps * mag)[0]
    if bad.size:
        A, B, C = (np.broadcast_to(t, d.shape) for t in (a, b, c))
        for k in bad:
            out[k] = _orient_exact(A[k], B[k], C[k])
    return out


def _pt_seg(p, a, b):
    ab = b - a
    t = np.clip(((p - a) * np.conj(ab)).real / np.maximum(np.abs(ab) ** 2, 1e-300), 0.0, 1.0)
    return np.abs(p - (a + t * ab))


def _seg_dist(p1, p2, q1, q2):
    return np.minimum(np.minimum(_pt_seg(p1, q1, q2), _pt_seg(p2, q1, q2)),
                      np.minimum(_pt_seg(q1, p1, p2), _pt_seg(q2, p1, p2)))


@dataclass
class CurveVerdict:
    simple: bool
    crossings: list = field(default_factory=list)
    tangents: list = field(default_factory=list)
    min_separation: float = math.inf
    segments: int = 0
    points: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"simple": self.simple, "crossings": len(self.crossings), "tangents": len(self.tangents),
                "min_separation": self.min_separation, "segments": self.segments}


def simple_curve_check(poly, closed: bool = True, tangent_tol: float = 1e-9, near: float = 0.0) -> CurveVerdict:
    """Sweep over x-sorted segment bounding boxes; report proper crossings and near contacts.

    Pairs of non-adjacent segments closer than ``tangent_tol`` (relative to the
    curve diameter) that do not cross properly are reported as tangents.
    ``near`` widens the contact search so the minimum separation of close
    approaches is reported as well.
    """
    P = np.asarray(poly, dtype=complex).ravel()
    if closed and P.size > 1 and P[0] == P[-1]:
        P = P[:-1]
    a = P
    b = np.roll(P, -1) if closed else P[1:]
    if not closed:
        a = P[:-1]
    m = len(a)
    if m < 16:
        raise DomainError("polyline needs at least 16 segments")
    if np.any(np.abs(b - a) == 0):
        raise DomainError("degenerate zero-length segment")
    diam = float(np.max(np.abs(P - P.mean())))
    tol = tangent_tol * max(diam, 1.0)
    pad = max(tol, near * max(diam, 1.0))
    xmin = np.minimum(a.real, b.real) - pad
    xmax = np.maximum(a.real, b.real) + pad
    ymin = np.minimum(a.imag, b.imag) - pad
    ymax = np.maximum(a.imag, b.imag) + pad
    order = np.argsort(xmin, kind="stable")
    xs = xmin[order]
    crossings, tangents, cpts, tpts = [], [], [], []
    min_sep = math.inf
    for r, i in enumerate(order):
        hi = np.searchsorted(xs, xmax[i], side="right")
        cand = order[r + 1:hi]
        if cand.size == 0:
            continue
        cand = cand[(ymin[cand] <= ymax[i]) & (ymax[cand] >= ymin[i])]
        d = np.abs(cand - i)
        cand = cand[(d > 1) & ~(closed & (d == m - 1))]
        if cand.size == 0:
            continue
        p1, p2, q1, q2 = a[i], b[i], a[cand], b[cand]
        cr = ((_orient_vec(p1, p2, q1) * _orient_vec(p1, p2, q2) < 0)
              & (_orient_vec(q1, q2, p1) * _orient_vec(q1, q2, p2) < 0))
        for j in cand[cr]:
            crossings.append((int(min(i, j)), int(max(i, j))))
            cpts.append(complex(0.5 * (a[i] + b[i])))
        if cr.any():
            min_sep = 0.0
        rest = cand[~cr]
        if rest.size:
            sep = _seg_dist(p1, p2, a[rest], b[rest])
            min_sep = min(min_sep, float(sep.min()))
            for j, sp in zip(rest[sep <= tol], sep[sep <= tol]):
                tangents.append((int(min(i, j)), int(max(i, j)), float(sp)))
                tpts.append(complex(0.5 * (a[i] + b[i])))
    return CurveVerdict(not crossings and not tangents, crossings, tangents, min_sep, m, cpts + tpts)


def count_events(v: CurveVerdict, cluster: Optional[int] = None, rel: float = 0.25) -> int:
    """Number of distinct contact events.

    A tangency pushed slightly past contact opens into two nearby crossings.
    Two contacts merge when their segment indices lie within ``cluster``
    (cyclically, default m/64).  Crossings must also satisfy
    |p - q| <= rel (|p| + |q|), close relative to the origin; this suits
    curves winding around 0 and keeps symmetric contacts p, -p apart.
    """
    m = max(v.segments, 1)
    if cluster is None:
        cluster = max(3, m // 64)
    cd = lambda a, b: min(abs(a - b), m - abs(a - b))
    pairs = [c[:2] for c in v.crossings] + [t[:2] for t in v.tangents]
    pts = [None] * len(pairs)
    if len(v.points) == len(pairs):
        pts[:len(v.crossings)] = v.points[:len(v.crossings)]
    groups = []
    for e, pe in sorted(zip(pairs, pts), key=lambda t: t[0]):
        for ge, gp in groups:
            near_idx = (cd(ge[0], e[0]) <= cluster and cd(ge[1], e[1]) <= cluster) or \
                       (cd(ge[0], e[1]) <= cluster and cd(ge[1], e[0]) <= cluster)
            near_pt = pe is None or gp is None or abs(pe - gp) <= rel * (abs(pe) + abs(gp))
            if near_idx and near_pt:
                break
        else:
            groups.append((e, pe))
    return len(groups)


def curvature_stats(poly, closed: bool = True) -> dict:
    """Discrete curvature (turning angle over mean adjacent length) and its relative spread."""
    P = np.asarray(poly, dtype=complex).ravel()
    if closed:
        prev, nxt = np.roll(P, 1), np.roll(P, -1)
    else:
        prev, nxt, P = P[:-2], P[2:], P[1:-1]
    e1, e2 = P - prev, nxt - P
    turn = np.angle(e2 / e1)
    k = 2 * turn / (np.abs(e1) + np.abs(e2))
    mean = float(np.mean(k))
    sd = float(np.std(k))
    return {"mean": mean, "stdev": sd, "rel_stdev": sd / abs(mean) if mean != 0 else math.inf}


# ---------------------------------------------------------------------------
# aggregate report


@dataclass
class VerifyReport:
    pde_residual_max: float
    dirichlet_stdev: tuple
    neumann_stdev: tuple
    hopf_mean: float
    hopf_stdev: float
    harmonicity_omega: float
    embedded: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dirichlet_stdev"] = list(self.dirichlet_stdev)
        d["neumann_stdev"] = list(self.neumann_stdev)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyReport":
        return cls(d["pde_residual_max"], tuple(d["dirichlet_stdev"]), tuple(d["neumann_stdev"]),
                   d["hopf_mean"], d["hopf_stdev"], d["harmonicity_omega"], d["embedded"], d.get("details", {}))


DEFAULT_TOLERANCES = {
    "pde": 1e-5,
    "dirichlet": 1e-7,
    "neumann_rel": 1e-6,
    "hopf_stdev": 1e-6,
    "hopf_mean": 1e-5,
    "harmonic": 1e-6,
}


def verify_samples(x, y, v, omega, g, hopf_target=None, tolerances=None, curves=None,
                   curve_m: int = 4096) -> tuple:
    """Recompute every residual from stored grid samples.

    ``curves`` optionally supplies higher-resolution boundary polylines for the
    simplicity sweep, each either an array (closed) or a pair (array, closed).
    Without curves the embedded flag is left True.  The PDE, Hopf spread and
    harmonicity checks compare residual / S with S = max(1, max 2 e^{2 omega}),
    the size of the terms being balanced; the report keeps absolute values.
    Returns (report, passed).
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    hx, hy = spacing(x), spacing(y)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if v.shape != (len(x), len(y)) or omega.shape != v.shape:
        raise FormatError("array shapes do not match the grid")
    res = interior(fd_laplacian(v, hx, hy) + 2 * np.exp(2 * omega))
    pde = float(np.max(np.abs(res)))
    # second strip derivatives of v scale like the conformal factor; checks use residual / S
    S = max(1.0, float(np.max(2 * np.exp(2 * omega))))
    harm = float(np.max(np.abs(interior(fd_laplacian(omega, hx, hy)))))
    dir1, dir2 = constancy(v[0], abs_tol=tol["dirichlet"]), constancy(v[-1], abs_tol=tol["dirichlet"])
    n1 = np.exp(-omega[0]) * boundary_dx(v, hx, 0)
    n2 = np.exp(-omega[-1]) * boundary_dx(v, hx, -1)
    neu1, neu2 = constancy(n1, tol["neumann_rel"]), constancy(n2, tol["neumann_rel"])
    hm, hs = hopf_estimate(v, omega, hx, hy)
    emb = True
    det = {}
    if curves is not None:
        for k, c in enumerate(curves):
            poly, closed = c if isinstance(c, tuple) else (c, True)
            cv = simple_curve_check(poly, closed=closed)
            det[f"curve{k + 1}"] = cv.summary()
            emb = emb and cv.simple
    det.update({"dirichlet": [dir1, dir2], "neumann": [neu1, neu2], "hopf_imag": hm.imag,
                "tolerances": tol, "scale": S})
    rep = VerifyReport(pde, (dir1["stdev"], dir2["stdev"]), (neu1["stdev"], neu2["stdev"]), hm.real, hs,
                       harm, bool(emb), det)
    checks = {
        "pde": pde / S < tol["pde"],
        "dirichlet": max(dir1["stdev"], dir2["stdev"]) < tol["dirichlet"],
        "neumann": neu1["ok"] and neu2["ok"],
        "hopf_stdev": hs / S < tol["hopf_stdev"],
        "harmonic": harm / S < tol["harmonic"],
        "embedded": emb,
    }
    if hopf_target is not None:
        checks["hopf_mean"] = abs(hm.real - hopf_target) < tol["hopf_mean"]
    det["checks"] = checks
    return rep, all(checks.values())
