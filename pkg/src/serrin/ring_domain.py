"""Ring domains: developing map, solution field, radial and necklace limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import special_functions as sf
from .errors import DomainError, InconsistencyError, SolverError, SymmetryViolation
from .moduli import TAU_ONE, embed_bounds, eta_level, s_star, vartheta
from .ode_core import (CoeffPair, GridSpec, ModelParams, StripField, omega_field, ring_params,
                       solve_coeffs)


# ---------------------------------------------------------------------------
# developing maps


@dataclass(frozen=True, eq=False)
class DevelopingMap:
    """Holomorphic map g from the strip onto the domain closure, with |g'| = e^omega.

    ``mode`` is one of closed_form, ode_fallback, radial, necklace (rings) or
    band, flat (bands).  ode_fallback interpolates integrated grid samples and
    is only valid inside the sampled rectangle.  ``period`` is the y-period of g itself (2 n vartheta for rings;
    bands are only quasi-periodic and report 2 vartheta).
    """

    params: ModelParams
    mode: str
    vartheta: float
    weier: Optional[sf.WeierstrassData] = None
    coeffs: Optional[CoeffPair] = None
    grid: Optional[GridSpec] = None
    samples: Optional[np.ndarray] = None
    dsamples: Optional[np.ndarray] = None
    _aux: dict = field(default_factory=dict, repr=False)

    @property
    def period(self) -> float:
        if self.params.kind == "ring" and self.params.n:
            return 2 * self.params.n * self.vartheta
        return 2 * self.vartheta

    # evaluation -------------------------------------------------------
    def g(self, z):
        z = np.asarray(z, dtype=complex)
        m = self.mode
        lam = self.params.scale
        if m == "closed_form":
            W, mu, u0 = self.weier, self.weier.mu, self._aux["u0"]
            L = sf.log_sigma(W, z + u0 - mu) - sf.log_sigma(W, z + u0 + mu) + 2 * self._aux["zeta_mu"] * (z + u0)
            return -lam * np.exp(L - self._aux["L0"])
        if m == "radial":
            return -lam * np.exp(-self._aux["c1"] * z)
        if m == "necklace":
            n = self.params.n
            return lam * (-math.cos(math.pi / n) + math.sin(math.pi / n) * np.tan(z / 4 - math.pi / (2 * n)))
        if m == "band":
            W = self.weier
            t = self.params.tau
            return 1j * (-4 * sf.zeta(W, z + W.omega1) + (t + 1 / t) * z / 3 + 4 * W.eta1)
        if m == "flat":
            return 1j * z
        if m == "ode_fallback":
            return self._interp(z, 0)
        raise ValueError(m)

    def dg(self, z):
        z = np.asarray(z, dtype=complex)
        m = self.mode
        lam = self.params.scale
        if m == "closed_form":
            return -self.g(z) / (lam * self.phi(z))
        if m == "radial":
            c1 = self._aux["c1"]
            return lam * c1 * np.exp(-c1 * z)
        if m == "necklace":
            n = self.params.n
            w = z / 4 - math.pi / (2 * n)
            return lam * math.sin(math.pi / n) / (4 * np.cos(w) ** 2)
        if m == "band":
            W = self.weier
            t = self.params.tau
            return 1j * (4 * sf.wp(W, z + W.omega1)[0] + (t + 1 / t) / 3)
        if m == "flat":
            return 1j * np.ones_like(z)
        if m == "ode_fallback":
            return self._interp(z, 1)
        raise ValueError(m)

    def _interp(self, z, which: int):
        x, y = np.real(z), np.imag(z)
        gr = self.grid
        if np.any((x < gr.x[0] - 1e-12) | (x > gr.x[-1] + 1e-12) | (y < gr.y[0] - 1e-12) | (y > gr.y[-1] + 1e-12)):
            raise DomainError("ode_fallback map evaluated outside its sampled rectangle")
        sr, si = self._aux["splines"][which]
        return sr.ev(x, y) + 1j * si.ev(x, y)

    def phi(self, z):
        """exp(-omega) continued holomorphically off x = 0 (ring closed form, unit scale)."""
        A, B = self._aux["A"], self._aux["B"]
        p, _ = sf.wp(self.weier, np.asarray(z, dtype=complex) + self._aux["u0"])
        return A * p + B

    def omega(self, z):
        return np.log(np.abs(self.dg(z)))

    def eta_taylor(self, z0, order: int) -> np.ndarray:
        """Taylor coefficients of eta = g''/(2 g') about z0 (vectorised), from the closed form."""
        from .mkdv import series_div, series_tan

        z0 = np.asarray(z0, dtype=complex)
        N = order + 1
        m = self.mode
        c = np.zeros((N,) + z0.shape, dtype=complex)
        if m == "radial":
            c[0] = -self._aux["c1"] / 2
            return c
        if m == "flat":
            return c
        if m == "necklace":
            # g''/g' = tan(w) / 2, w = z/4 - pi/2n
            n = self.params.n
            return series_tan(z0 / 4 - math.pi / (2 * n), 0.25, N) / 4
        if m == "closed_form":
            P = sf.wp_taylor(self.weier, z0 + self._aux["u0"], N)
            phi = self._aux["A"] * P
            phi[0] = phi[0] + self._aux["B"]
            dphi = np.array([(k + 1) * phi[k + 1] for k in range(N)])
            num = -dphi
            num[0] = num[0] - 1.0
            return series_div(num, 2 * phi[:N])
        if m == "band":
            W = self.weier
            t = self.params.tau
            P = sf.wp_taylor(W, z0 + W.omega1, N)
            den = 4 * P[:N]
            den[0] = den[0] + (t + 1 / t) / 3
            dP = np.array([(k + 1) * P[k + 1] for k in range(N)])
            return series_div(2 * dP, den)
        raise ValueError(m)

    def eta_jet(self, z0, order: int) -> np.ndarray:
        """(eta, eta', ..., eta^(order)) at z0."""
        from .mkdv import jet_of_eta

        return jet_of_eta(self, z0, order)

    def sample(self, grid: GridSpec) -> "DevelopingMap":
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        Z = X + 1j * Y
        return DevelopingMap(self.params, self.mode, self.vartheta, self.weier, self.coeffs, grid,
                             self.g(Z), self.dg(Z), self._aux)

    def curve(self, x0: float, m: int = 4096, turns: float = 1.0) -> np.ndarray:
        """Polyline g(x0 + iy), y in [0, turns * period), without repeated endpoint."""
        y = turns * self.period * np.arange(m) / m
        return self.g(x0 + 1j * y)


def ring_lattice(p: ModelParams) -> tuple:
    """Lattice and constants of the closed form for a ring with tau < 1."""
    eta, tau = p.eta, p.tau
    r1, r2, r3 = 2 / (eta * tau * tau), 2 / eta, -2 * eta
    A = 32 / (eta * tau * tau)
    B = (r1 + r2 + r3) / 3
    W = sf.lattice_from_roots((r1 - B) / A, (r2 - B) / A, (r3 - B) / A)
    c3 = -eta * tau * tau / 8
    bc2 = p.delta / 3
    pmu = bc2 / 4
    w1, w2 = W.omega1, W.omega2
    if not (W.e3 < pmu < W.e2):
        raise SolverError("wp(mu) = b c^2 / 4 not in (e3, e2): mu off the top edge")
    f = lambda t: float(sf.wp(W, w2 + t)[0].real) - pmu
    t0 = brentq(f, 1e-12 * w1, w1 * (1 - 1e-12), xtol=1e-15, rtol=1e-15)
    mu = w2 + t0
    if abs(complex(sf.wp(W, mu)[1]) - c3 / 4) > 1e-8 * max(1.0, abs(c3)):
        mu = w2 - t0
    if abs(complex(sf.wp(W, mu)[1]) - c3 / 4) > 1e-6 * max(1.0, abs(c3)):
        raise SolverError("wp'(mu) = c^3/4 not satisfied on the top edge")
    u0 = w1 + w2
    zeta_mu = complex(sf.zeta(W, mu))
    L0 = complex(sf.log_sigma(W, u0 - mu) - sf.log_sigma(W, u0 + mu) + 2 * zeta_mu * u0)
    g0 = -np.exp(-L0)
    W = sf.with_ring_constants(W, mu=mu, c_cubed=c3, bc2=bc2, g0=complex(g0))
    return W, {"A": A, "B": B, "u0": u0, "zeta_mu": zeta_mu, "L0": L0}


def developing_map(p: ModelParams, coeffs: Optional[CoeffPair] = None, grid: Optional[GridSpec] = None,
                   check: bool = True) -> DevelopingMap:
    if p.kind != "ring":
        raise DomainError("developing_map builds ring maps; use band_domain.band_map")
    if p.tau >= TAU_ONE:
        n = p.n or 2
        c1 = p.eta / 2
        dev = DevelopingMap(p, "radial", 2 * math.pi / math.sqrt(1 + p.eta**2), None, coeffs, _aux={"c1": c1})
        return dev.sample(grid) if grid is not None else dev
    try:
        W, aux = ring_lattice(p)
    except SolverError:
        if coeffs is None or grid is None:
            raise
        return ode_developing_map(p, coeffs, grid)
    dev = DevelopingMap(p, "closed_form", W.omega2.imag, W, coeffs, _aux=aux)
    if grid is not None:
        dev = dev.sample(grid)
    if check and coeffs is not None and grid is not None:
        fld = omega_field(p, coeffs, grid)
        err = float(np.max(np.abs(dev.samples - fld.g)))
        dev._aux["ode_crosscheck"] = err
        if err > 1e-4:
            raise InconsistencyError(f"closed-form g and integrated g differ by {err:.3e}")
    return dev


def build_ring_map(n: int, tau: float, beta0: float = 2.0) -> DevelopingMap:
    p = ring_params(n, tau, beta0=beta0)
    cp = solve_coeffs(p)
    return developing_map(p, cp)


def ode_developing_map(p: ModelParams, coeffs: CoeffPair, grid: GridSpec) -> DevelopingMap:
    """Developing map from integrating g'' / g' = 2 omega_z on a grid, splined for evaluation."""
    fld = omega_field(p, coeffs, grid)
    return ode_map_from_field(fld, coeffs)


def ode_map_from_field(fld: StripField, coeffs: Optional[CoeffPair] = None) -> DevelopingMap:
    from scipy.interpolate import RectBivariateSpline

    grid = fld.grid
    gp = np.exp(-np.log(fld.Z) + 1j * fld.theta)
    spl = [tuple(RectBivariateSpline(grid.x, grid.y, f(arr), kx=3, ky=3) for f in (np.real, np.imag))
           for arr in (fld.g, gp)]
    th = 0.5 * (grid.y[-1] - grid.y[0])
    return DevelopingMap(fld.params, "ode_fallback", th, None, coeffs, grid, fld.g, gp, {"splines": spl})


# ---------------------------------------------------------------------------
# solution field


@dataclass(frozen=True, eq=False)
class DomainField:
    """Solution v(x, y) = a(x) + c(x) sigma(x, y) sampled on [s, s*] x one omega-period."""

    params: ModelParams
    dev: DevelopingMap
    coeffs: CoeffPair
    strip: StripField
    s: float
    s_star: float
    q_hopf: float
    sigma: np.ndarray
    v: np.ndarray
    a_vals: np.ndarray
    boundary: dict

    @property
    def grid(self) -> GridSpec:
        return self.strip.grid

    @property
    def omega(self) -> np.ndarray:
        return self.strip.omega

    def a_of_x(self, x):
        st = self.coeffs.state(x)
        a, b, I2, J = st[0], st[1], st[4], st[5]
        k1 = self.coeffs.kappa1
        q = self.q_hopf
        I = self.params.c_hat0 + I2
        return -(4 * q / k1) * J + (4 * q / k1) * b * I / a

    def b_of_x(self, x):
        return 4 * self.q_hopf / self.coeffs.alpha(x)

    def c_of_x(self, x):
        return 1 - 2 * self.q_hopf * self.coeffs.t_ratio(x)

    def boundary_curves(self, m: int = 4096) -> tuple:
        return self.dev.curve(self.s, m), self.dev.curve(self.s_star, m)


def _v_regular(p: ModelParams, k1: float, q: float, alpha, beta, I2, J, Z):
    """v written without the removable 1/x terms of a and c sigma."""
    a = alpha[:, None]
    b = beta[:, None]
    I = p.c_hat0 + I2[:, None]
    return -(4 * q / k1) * J[:, None] + (2 / k1) * (a / Z + I) - (4 * q / k1) * b / Z


def solution_field(p: ModelParams, dev: DevelopingMap, coeffs: CoeffPair, s: float,
                   nx: int = 201, ny: int = 401, allow_immersed: bool = True) -> DomainField:
    z = coeffs.zeros
    if not (z["x_b_minus"] < s < 0):
        raise DomainError(f"s must lie in (x_b-, 0) = ({z['x_b_minus']:.6g}, 0)")
    ss = s_star(coeffs, s)
    th = dev.vartheta
    grid = GridSpec.uniform(s, ss, -th, th, nx, ny)
    fld = omega_field(p, coeffs, grid)
    t_s = float(coeffs.t_ratio(s))
    q = 1.0 / (2.0 * t_s)
    k1 = coeffs.kappa1
    v = _v_regular(p, k1, q, fld.alpha, fld.beta, fld.int_alpha2, fld.int_alphabeta, fld.Z)
    sigma = (2 / k1) * (fld.alpha[:, None] / fld.Z + p.c_hat0 + fld.int_alpha2[:, None])
    a_vals = v[:, 0] - (1 - 2 * q * fld.beta / np.where(fld.alpha == 0, np.nan, fld.alpha)) * sigma[:, 0]
    dev_s = dev.sample(grid) if dev.samples is None or dev.grid is not grid else dev
    bs, bss = 4 * q / float(coeffs.alpha(s)), 4 * q / float(coeffs.alpha(ss))
    boundary = {
        "a1": float(np.mean(v[0])),
        "a2": float(np.mean(v[-1])),
        # b_j are outward normal derivatives: -exp(-omega) d/dx on the exterior
        # curve x = s, +exp(-omega) d/dx on the interior curve x = s*
        "b1": -bs,
        "b2": bss,
        "neumann1": -bs,
        "neumann2": bss,
    }
    return DomainField(p, dev_s, coeffs, fld, s, ss, q, sigma, v, a_vals, boundary)


def ring_domain(n: int, tau: float, s: Optional[float] = None, nx: int = 201, ny: int = 401,
                beta0: float = 2.0, allow_immersed: bool = False):
    """Build the ring at (n, tau, s); s defaults to the midpoint of the embedded window."""
    p = ring_params(n, tau, beta0=beta0)
    cp = solve_coeffs(p)
    dev = developing_map(p, cp)
    bounds = None
    if tau < TAU_ONE:
        bounds = embed_bounds(dev, cp)
    if s is None:
        if bounds is None:
            raise DomainError("no embedded window at tau = 1; pass s explicitly")
        s = 0.5 * (bounds[0] + bounds[1])
    elif bounds is not None and not allow_immersed and not (bounds[0] < s < bounds[1]):
        raise DomainError(f"s = {s} outside the embedded window ({bounds[0]:.9g}, {bounds[1]:.9g})")
    p = p.with_s(s)
    dev = DevelopingMap(p, dev.mode, dev.vartheta, dev.weier, cp, _aux=dev._aux)
    fld = solution_field(p, dev, cp, s, nx, ny)
    return fld, bounds


# ---------------------------------------------------------------------------
# limits


@dataclass(frozen=True, eq=False)
class RadialAnnulus:
    params: ModelParams
    dev: DevelopingMap
    grid: GridSpec
    g: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    c1: float
    radii: np.ndarray
    boundary: dict

    @property
    def x(self):
        return self.grid.x

    @property
    def y(self):
        return self.grid.y


def radial_limit(n: int, s1: float, s2: float, nx: int = 201, ny: int = 401) -> RadialAnnulus:
    """Closed-form annulus at tau = 1: g = -exp(-c1 z), c1 = 1/(2 sqrt(n^2 - 1))."""
    if not s1 < s2:
        raise DomainError("need s1 < s2")
    c1 = 1.0 / (2 * math.sqrt(n * n - 1.0))
    th = 2 * math.pi / math.sqrt(1 + 4 * c1 * c1)
    grid = GridSpec.uniform(s1, s2, -th, th, nx, ny)
    x = grid.x
    X, Y = np.meshgrid(x, grid.y, indexing="ij")
    omega = -c1 * X + math.log(c1)
    g = -np.exp(-c1 * (X + 1j * Y))
    # radial torsion solution with u = const on |g| = r1, r2: v = A + B log|g| - |g|^2 / 2
    r = np.exp(-c1 * x)
    r1, r2 = r[0], r[-1]
    B = (r1 * r1 - r2 * r2) / (2 * (math.log(r1) - math.log(r2)))
    A = r1 * r1 / 2 - B * math.log(r1)
    v = A + B * np.log(np.abs(g)) - np.abs(g) ** 2 / 2
    p = ModelParams("ring", eta=2 * c1, tau=1.0, n=n, s=s1)
    dev = DevelopingMap(p, "radial", th, _aux={"c1": c1})
    # outward normal derivatives of v: v_r on the outer circle r1, -v_r on the inner circle r2
    vr = lambda rr: B / rr - rr
    bnd = {"a1": float(v[0, 0]), "a2": float(v[-1, 0]), "b1": float(vr(r1)), "b2": float(-vr(r2))}
    return RadialAnnulus(p, dev, grid, g, omega, v, c1, r, bnd)


@dataclass
class NecklaceReport:
    n: int
    s: float
    s_star: float
    center: complex
    radius: float
    p0: complex
    p1: complex
    orthogonality_residual: float
    embedded: bool
    c_hat_printed: float
    q_hopf: float = 0.0
    capillary: dict = field(default_factory=dict)


def necklace_circle(n: int, x: float) -> tuple:
    """Center and radius of the circle g0(x + iy), tau = 0."""
    w = x / 2 - math.pi / n
    cn, sn = math.cos(math.pi / n), math.sin(math.pi / n)
    center = complex(-cn - sn / math.tan(w), 0.0)
    radius = sn / abs(math.sin(w))
    return center, radius


def necklace_curvature(n: int, x: float) -> float:
    return math.sin(x / 2 - math.pi / n) / math.sin(math.pi / n)


def necklace_limit(n: int, s: float, tol: float = 1e-10) -> NecklaceReport:
    if n < 2:
        raise DomainError("n must be at least 2")
    lo, hi = -2 * math.pi + 2 * math.pi / n, 0.0
    if not (lo < s < hi):
        raise DomainError(f"s must lie in ({lo:.6g}, 0)")
    c, R = necklace_circle(n, s)
    res = abs(abs(c) ** 2 - 1 - R * R)
    cn, sn = math.cos(math.pi / n), math.sin(math.pi / n)
    c_hat = -cn - sn * math.tan(s / 2 - math.pi / n)
    eta0 = math.tan(math.pi / (2 * n))
    # limit coefficients: tilde alpha = alpha / tau^2, beta = 2 cos(x/2) + c2 sin(x/2)
    c2 = -2 / math.tan(math.pi / n)
    at = lambda x: (eta0 / 4) * math.sin(x / 2)
    bt = lambda x: 2 * math.cos(x / 2) + c2 * math.sin(x / 2)
    ss = s + 2 * math.pi
    b1 = 2 * at(s) / (bt(s) * at(s))
    b2 = 2 * at(s) / (bt(s) * at(ss))
    cap = {"b1": b1, "b2": b2, "a_equal": True}
    return NecklaceReport(n, s, ss, c, R, complex(-cn, -sn), complex(-cn, sn), res, res < tol, c_hat, 0.0, cap)


# ---------------------------------------------------------------------------
# symmetry


def reflect(points, angle: float):
    """Reflection across the line through 0 at the given angle."""
    return np.exp(2j * angle) * np.conj(points)


def dihedral_check(dev: DevelopingMap, x0s=None, m_per_half: int = 256, tol: float = 1e-8) -> tuple:
    """Verify g(x, k vartheta - y) is the mirror image of g(x, k vartheta + y) for every k.

    Returns (order, residual).  The mirror line for k sits at angle -k pi / n.
    """
    p = dev.params
    n = p.n
    if x0s is None:
        x0s = [p.s] if p.s is not None else [0.0]
        if p.s is not None and dev.coeffs is not None:
            x0s.append(s_star(dev.coeffs, p.s))
    th = dev.vartheta
    y = th * np.arange(0, m_per_half + 1) / m_per_half
    worst = 0.0
    for x0 in x0s:
        scale = float(np.max(np.abs(dev.g(x0 + 1j * y))))
        for k in range(n):
            up = dev.g(x0 + 1j * (k * th + y))
            dn = dev.g(x0 + 1j * (k * th - y))
            ang = -k * math.pi / n
            worst = max(worst, float(np.max(np.abs(reflect(up, ang) - dn))) / max(scale, 1.0))
    if worst > tol:
        raise SymmetryViolation(f"dihedral residual {worst:.3e} exceeds {tol:g}")
    return 2 * n, worst
