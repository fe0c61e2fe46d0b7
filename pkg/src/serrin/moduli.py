"""Period maps, level curves eta_n(tau), the conjugate boundary s -> s*,
embeddedness thresholds and the bifurcation loci of the ring family."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, SolverError
from .special_functions import sin2_quad

TAU_ONE = 1.0 - 1e-8
TAU_ZERO = 1e-8
XTOL = 1e-12


def _check(eta, tau):
    if not eta > 0:
        raise DomainError("eta must be positive")
    if not 0 < tau <= 1:
        raise DomainError("tau must lie in (0, 1]")


def vartheta(eta: float, tau: float) -> float:
    """Half-period in y of the boundary profile z(y)."""
    _check(eta, tau)
    if tau >= TAU_ONE:
        return 2 * math.pi / math.sqrt(1 + eta * eta)
    t2 = tau * tau - 1.0

    def f(t):
        w = 1.0 + t * t2
        return 2.0 / math.sqrt(w * (1.0 + eta * eta * w))

    return sin2_quad(f)


def vartheta_raw(eta: float, tau: float) -> float:
    """Same quantity straight from the profile cubic, for cross-checking."""
    from .special_functions import singular_quad

    lo, hi = 2 / eta, 2 / (eta * tau * tau)

    def p(z):
        return -(eta * tau * tau / 2) * (z - hi) * (z - lo) * (z + 2 * eta)

    return singular_quad(lambda z: 2.0 / math.sqrt(max(p(z), 1e-300)), lo, hi, (0.5, 0.5), tol=1e-11)


def theta_arc(eta: float, tau: float) -> float:
    """Angle swept on the unit circle by g(iy) over one half-period."""
    _check(eta, tau)
    if tau >= TAU_ONE:
        return math.pi * eta / math.sqrt(1 + eta * eta)
    if tau <= TAU_ZERO:
        return 2 * math.atan(eta)
    t2 = tau * tau - 1.0

    def f(t):
        w = 1.0 + t * t2
        return eta * math.sqrt(w) / math.sqrt(1.0 + eta * eta * w)

    return sin2_quad(f)


def per(eta: float, tau: float) -> float:
    return theta_arc(eta, tau) / math.pi


def eta_level(n: int, tau: float) -> float:
    """The unique eta with Per(eta, tau) = 1/n."""
    if n < 2:
        raise DomainError("n must be at least 2")
    if not 0 < tau <= 1:
        raise DomainError("tau must lie in (0, 1]")
    if tau >= TAU_ONE:
        return 1.0 / math.sqrt(n * n - 1.0)
    if tau <= TAU_ZERO:
        return math.tan(math.pi / (2 * n))
    target = 1.0 / n
    f = lambda e: per(e, tau) - target
    lo, hi = 1e-3 / n, 4.0
    while f(hi) < 0:
        hi *= 2
        if hi > 1e6:
            raise SolverError("eta bracket failed")
    if f(lo) > 0:
        raise SolverError("eta bracket failed")
    return brentq(f, lo, hi, xtol=XTOL, rtol=1e-15)


@dataclass
class ModuliPoint:
    n: int
    tau: float
    eta: float
    vartheta: float
    theta_arc: float
    per: float
    s_range: Optional[tuple] = None


def moduli_point(n: int, tau: float, with_bounds: bool = False) -> ModuliPoint:
    eta = eta_level(n, tau)
    th = theta_arc(eta, tau)
    mp = ModuliPoint(n, tau, eta, vartheta(eta, tau) if tau > TAU_ZERO else math.inf, th, th / math.pi)
    if with_bounds:
        mp.s_range = embed_bounds_for(n, tau)
    return mp


# ---------------------------------------------------------------------------
# conjugate boundary


def s_star(coeffs, s: float) -> float:
    """The unique s* in (x_b+, x_a+) with t(s*) = t(s), t = beta / alpha."""
    z = coeffs.zeros
    lo, hi = z["x_b_minus"], 0.0
    if not (lo < s < hi):
        raise DomainError(f"s = {s} outside (x_b-, 0) = ({lo}, 0)")
    target = float(coeffs.t_ratio(s))
    a, b = z["x_b_plus"], z["x_a_plus"]
    if not math.isfinite(b):
        b = coeffs.x_hi
    f = lambda x: float(coeffs.t_ratio(x)) - target
    # t decreases from 0 at x_b+ to -inf at x_a+
    eps = 1e-14 * max(1.0, abs(b))
    lo_x, hi_x = a, b - eps
    while f(hi_x) > 0:
        hi_x = 0.5 * (hi_x + b)
        if b - hi_x < 1e-15 * max(1.0, b):
            raise SolverError("s* bracket failed")
    return brentq(f, lo_x, hi_x, xtol=XTOL, rtol=1e-15)


def s_star_inverse(coeffs, x: float) -> float:
    """The s in (x_b-, 0) with s* = x."""
    z = coeffs.zeros
    if not (z["x_b_plus"] < x < z["x_a_plus"]):
        raise DomainError("x outside (x_b+, x_a+)")
    target = float(coeffs.t_ratio(x))
    f = lambda s: float(coeffs.t_ratio(s)) - target
    xb = z["x_b_minus"]
    # t rises from -inf at 0- to 0 at x_b-, so f > 0 near x_b- and f < 0 near 0-
    lo = xb * (1 - 1e-13)
    hi = 1e-12 * xb
    if not (f(lo) > 0 > f(hi)):
        raise SolverError("s* inverse bracket failed")
    return brentq(f, lo, hi, xtol=XTOL, rtol=1e-15)


# ---------------------------------------------------------------------------
# embeddedness


def _sector_margin(dev, x0: float, ny: int = 513) -> float:
    """Signed distance-like margin of the arc y in (0, vartheta) of g(x0 + iy) to the
    half-lines L0 (negative real axis) and L1 (arg = pi - pi/n).

    Positive while the open arc lies in the open sector between them.
    Each nodal function is divided by sin(pi y / vartheta) so the
    endpoints, which sit on the lines, do not count as contact.
    """
    n = dev.params.n
    th = dev.vartheta
    y = th * (np.arange(1, ny + 1) - 0.5) / ny
    gg = dev.g(x0 + 1j * y)
    rot = np.exp(-1j * (math.pi - math.pi / n))
    w = np.sin(math.pi * y / th)
    phi0 = gg.imag / w
    phi1 = (rot * gg).imag / w
    m0 = _refined_min(dev, x0, y, phi0, lambda yy: dev.g(x0 + 1j * yy).imag / math.sin(math.pi * yy / th), th)
    m1 = _refined_min(dev, x0, y, phi1, lambda yy: (rot * dev.g(x0 + 1j * yy)).imag / math.sin(math.pi * yy / th), th)
    return min(m0, m1)


def _refined_min(dev, x0, y, vals, fn, th):
    i = int(np.argmin(vals))
    lo = y[max(i - 1, 0)] if i > 0 else 0.5 * y[0]
    hi = y[min(i + 1, len(y) - 1)] if i < len(y) - 1 else 0.5 * (y[-1] + th)
    r = minimize_scalar(lambda t: float(np.real(fn(t))), bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-12})
    return min(float(r.fun), float(vals[i]))


def sector_predicate(dev, x0: float) -> bool:
    return _sector_margin(dev, x0) > 0


def embed_xhat(dev, coeffs=None) -> float:
    """Smallest x0 > 0 at which the arc g(x0 + iy), y in (0, vartheta), meets L0 or L1."""
    if coeffs is None:
        coeffs = dev.coeffs
    z = coeffs.zeros
    a, b = z["x_b_plus"], z["x_a_plus"]
    f = lambda x0: _sector_margin(dev, x0)
    if f(a) <= 0:
        raise SolverError("sector predicate fails already at x_b+")
    # march towards x_a+ to bracket the first sign change
    xs = a + (b - a) * (1 - np.geomspace(1.0, 1e-6, 60))
    prev = a
    for x in xs[1:]:
        if f(x) <= 0:
            return brentq(f, prev, x, xtol=XTOL)
        prev = x
    warnings.warn("curve stays in the sector up to x_a+; returning capped value")
    return float(b - 1e-6 * (b - a))


def embed_bounds(dev, coeffs=None) -> tuple:
    """(h0, h1) with h0 = -xhat and h1* = xhat."""
    if coeffs is None:
        coeffs = dev.coeffs
    xh = embed_xhat(dev, coeffs)
    h0 = -xh
    h1 = s_star_inverse(coeffs, xh)
    return h0, h1


def embed_bounds_for(n: int, tau: float) -> tuple:
    """Embedded window for (n, tau); at tau = 1 it is the whole half-line (-inf, 0)."""
    from .ring_domain import build_ring_map

    if tau >= TAU_ONE:
        return (-math.inf, 0.0)
    dev = build_ring_map(n, tau)
    return embed_bounds(dev)


# ---------------------------------------------------------------------------
# bifurcation loci


def boundary_constants(coeffs, s: float) -> dict:
    """a_j and outward-normal b_j of the ring with exterior curve x = s, without building a grid."""
    ss = s_star(coeffs, s)
    p = coeffs.params
    q = 1.0 / (2.0 * float(coeffs.t_ratio(s)))
    k1 = coeffs.kappa1

    def a(x):
        st = coeffs.state(x)
        return float(-(4 * q / k1) * st[5] + (4 * q / k1) * st[1] * (p.c_hat0 + st[4]) / st[0])

    b = lambda x: float(4 * q / coeffs.alpha(x))
    return {"s_star": ss, "q_hopf": q, "a1": a(s), "a2": a(ss), "b1": -b(s), "b2": b(ss),
            "b_s": b(s), "b_s_star": b(ss)}


def psi_functions(coeffs, s: float) -> tuple:
    """(b(s) + b(s*), a(s) - a(s*)); zero sets are the b1 = b2 and a1 = a2 loci."""
    c = boundary_constants(coeffs, s)
    return c["b_s"] + c["b_s_star"], c["a1"] - c["a2"]


@dataclass
class BifurcationCurve:
    name: str
    points: list = field(default_factory=list)
    diagnostic: str = ""

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(-1, 2)


def _s_window(coeffs):
    lo = coeffs.zeros["x_b_minus"]
    if not math.isfinite(lo):
        lo = 0.9 * coeffs.x_lo
    return lo * (1 - 1e-6), -1e-3


def _roots_on(f, lo, hi, m=200):
    xs = np.linspace(lo, hi, m)
    vals = np.array([f(x) for x in xs])
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        out.append(brentq(f, xs[i], xs[i + 1], xtol=XTOL, rtol=1e-15))
    return out


def bifurcation_loci(n: int, taus: Sequence[float] = None) -> tuple:
    """Trace the zero curves of Psi_1 and Psi_2 in (s, tau) from their seeds on tau = 1.

    ``taus`` is the continuation grid (descending from 1).  Each curve is a
    list of (s, tau) points; tracing stops when the root leaves (x_b-, 0).
    """
    from .ode_core import ring_params, solve_coeffs

    if n < 2:
        raise DomainError("n must be at least 2")
    if taus is None:
        taus = np.linspace(1.0, 0.5, 11)
    taus = sorted((float(t) for t in taus), reverse=True)
    curves = (BifurcationCurve("Upsilon1"), BifurcationCurve("Upsilon2"))
    prev = [None, None]
    for k, tau in enumerate(taus):
        cp = solve_coeffs(ring_params(n, tau))
        lo, hi = _s_window(cp)
        for j in (0, 1):
            c = curves[j]
            if c.diagnostic and k:
                continue
            f = lambda s, j=j: psi_functions(cp, s)[j]
            if prev[j] is None:
                roots = _roots_on(f, lo, hi)
                if not roots:
                    c.diagnostic = f"no sign change on the tau = {tau:g} edge"
                    continue
                r = roots[0]
            else:
                w = 0.25 * max(1.0, abs(prev[j]))
                a, b = max(lo, prev[j] - w), min(hi, prev[j] + w)
                roots = _roots_on(f, a, b, 40)
                if not roots:
                    c.diagnostic = f"lost at tau = {tau:g}"
                    continue
                r = min(roots, key=lambda x: abs(x - prev[j]))
            prev[j] = r
            c.points.append((r, tau))
    return curves
