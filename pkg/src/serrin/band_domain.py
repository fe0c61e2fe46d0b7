"""Periodic bands foliated by planar capillary curves.

With h'' = (delta + 2 alpha^2) h, h(0) = 2, h'(0) = 0, f = h/alpha and
L = Im g, the solution v = a + f L simplifies to

    v = h(x) exp(omega) + int_{x*}^{x} h alpha,

which is regular at x = 0 and already normalised by a(x*) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import special_functions as sf
from .errors import DomainError, SolverError
from .moduli import TAU_ONE
from .ode_core import ATOL, RTOL, GridSpec, band_params
from .ring_domain import DevelopingMap

X_SHARP_BRACKET = (1.0, 2.0)


def x_sharp(tol: float = 1e-13) -> float:
    """Positive root of x = coth x, by bisection on [1, 2]."""
    f = lambda x: x - 1.0 / math.tanh(x)
    lo, hi = X_SHARP_BRACKET
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def band_lattice(tau: float) -> sf.WeierstrassData:
    if not 0 < tau < 1:
        raise DomainError("band lattice needs tau in (0, 1)")
    e1 = (2 - tau * tau) / (12 * tau)
    e2 = (2 * tau * tau - 1) / (12 * tau)
    e3 = -(tau * tau + 1) / (12 * tau)
    return sf.lattice_from_roots(e1, e2, e3)


def band_vartheta(tau: float) -> float:
    """Half-period in y from the profile integral (independent of the lattice)."""
    if tau >= TAU_ONE:
        return math.pi
    s = math.sqrt(tau)
    return sf.sin2_quad(lambda t: s / math.sqrt(t + tau * tau * (1 - t)))


def band_map(tau: float, grid: Optional[GridSpec] = None) -> DevelopingMap:
    p = band_params(tau)
    if tau >= TAU_ONE:
        dev = DevelopingMap(p, "flat", math.pi)
    else:
        W = band_lattice(tau)
        dev = DevelopingMap(p, "band", W.omega2.imag, W)
    return dev.sample(grid) if grid is not None else dev


# ---------------------------------------------------------------------------
# coefficient functions


def _rhs(delta):
    def rhs(x, u):
        a, da, h, dh = u[0], u[1], u[2], u[3]
        return [da, delta * a + 2 * a**3, dh, (delta + 2 * a * a) * h, a * a, h * a]

    return rhs


@dataclass(frozen=True, eq=False)
class BandCoeffs:
    """alpha, alpha', h, h', int_0^x alpha^2, int_0^x h alpha on [-x_end, x_end] (all odd/even)."""

    tau: float
    sol: object
    x_end: float
    x_a: float
    x_a_ode: float = math.nan

    def state(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        if np.any(ax > self.x_end + 1e-12):
            raise DomainError("x outside the integrated band range")
        st = self.sol.sol(ax.ravel()).reshape((6,) + x.shape)
        sg = np.sign(x)
        # alpha, h' and int alpha^2 are odd; alpha', h and int h alpha are even
        st[0] *= sg
        st[3] *= sg
        st[4] *= sg
        return st

    def alpha(self, x):
        return self.state(x)[0]

    def h(self, x):
        return self.state(x)[2]

    def f(self, x):
        st = self.state(x)
        return st[2] / st[0]

    def wronskian(self, x):
        st = self.state(x)
        return st[1] * st[2] - st[3] * st[0]

    def a_of_x(self, x, x_star: float):
        """a(x) = -f(x) int_0^x alpha^2 + int_{x*}^x h alpha, the even branch with a(x*) = 0."""
        st = self.state(x)
        return -st[2] / st[0] * st[4] + st[5] - float(self.state(x_star)[5])

    def b_of_x(self, x):
        return -2.0 / self.alpha(x)


def band_coeffs(tau: float) -> BandCoeffs:
    delta = -(tau + 1 / tau)
    if tau >= TAU_ONE:
        x_end = 4.0
        x_a = math.inf
    else:
        W = band_lattice(tau)
        x_a = W.omega1
        x_end = 1.02 * x_a
    u0 = [0.0, 1.0, 2.0, 0.0, 0.0, 0.0]
    sol = solve_ivp(_rhs(delta), (0.0, x_end), u0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
    if not sol.success:
        raise SolverError(sol.message)
    bc = BandCoeffs(tau, sol, x_end, x_a)
    if math.isfinite(x_a):
        # first positive zero of alpha should be the real half-period
        xs = np.linspace(0.5 * x_a, x_end, 200)
        al = sol.sol(xs)[0]
        i = np.nonzero(np.sign(al[:-1]) != np.sign(al[1:]))[0]
        if i.size:
            x_a_ode = brentq(lambda t: sol.sol(t)[0], xs[i[0]], xs[i[0] + 1], xtol=1e-14)
            bc = BandCoeffs(tau, sol, x_end, x_a, x_a_ode)
    return bc


def find_x_star(bc: BandCoeffs) -> float:
    """Unique positive zero of f = h/alpha in (0, x_a), i.e. the first zero of h."""
    hi = bc.x_a - 1e-6 if math.isfinite(bc.x_a) else bc.x_end
    xs = np.linspace(1e-6, hi, 4001)
    hv = bc.sol.sol(xs)[2]
    idx = np.nonzero(np.sign(hv[:-1]) != np.sign(hv[1:]))[0]
    if idx.size == 0:
        raise SolverError("zero of f not bracketed in (0, x_a+)")
    i = idx[0]
    return brentq(lambda t: bc.sol.sol(t)[2], xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)


# ---------------------------------------------------------------------------
# solution


@dataclass(frozen=True, eq=False)
class BandSolution:
    tau: float
    dev: DevelopingMap
    coeffs: BandCoeffs
    x_star: float
    vartheta: float
    grid: GridSpec
    g: np.ndarray
    gprime: np.ndarray
    omega: np.ndarray
    L: np.ndarray
    v: np.ndarray
    b_boundary: float
    period_shift: complex
    q_hopf: float = -0.5
    weier: Optional[sf.WeierstrassData] = None
    extra: dict = field(default_factory=dict)

    @property
    def params(self):
        return self.dev.params

    def a_fn(self, x):
        return self.coeffs.a_of_x(x, self.x_star)

    def b_fn(self, x):
        return self.coeffs.b_of_x(x)

    def f_fn(self, x):
        return self.coeffs.f(x)

    def h_fn(self, x):
        return self.coeffs.h(x)

    def boundary_curves(self, m: int = 4096, periods: float = 1.0) -> tuple:
        th = self.vartheta
        y = -th + 2 * th * periods * np.arange(m + 1) / m
        return self.dev.g(-self.x_star + 1j * y), self.dev.g(self.x_star + 1j * y)


def band_solution(tau: float, dev: Optional[DevelopingMap] = None, nx: int = 201, ny: int = 401,
                  y_range: Optional[tuple] = None) -> BandSolution:
    if not 0 < tau <= 1:
        raise DomainError("tau must lie in (0, 1]")
    if dev is None:
        dev = band_map(tau)
    bc = band_coeffs(tau)
    xs = find_x_star(bc)
    th = dev.vartheta
    y0, y1 = y_range if y_range is not None else (-th, th)
    grid = GridSpec.uniform(-xs, xs, y0, y1, nx, ny)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    Zc = X + 1j * Y
    g = dev.g(Zc)
    gp = dev.dg(Zc)
    omega = np.log(np.abs(gp))
    st = bc.state(grid.x)
    H = st[5]
    Hs = float(bc.state(xs)[5])
    v = st[2][:, None] * np.abs(gp) + (H - Hs)[:, None]
    L = st[0][:, None] * np.abs(gp) + st[4][:, None]
    b = float(-2.0 / bc.alpha(xs))
    shift = complex(dev.g(2j * th) - dev.g(0j))
    return BandSolution(tau, dev, bc, xs, th, grid, g, gp, omega, L, v, b, shift, -0.5, dev.weier)


def flat_band(nx: int = 201, ny: int = 401) -> BandSolution:
    return band_solution(1.0, nx=nx, ny=ny)


# ---------------------------------------------------------------------------
# limits and embeddedness


@dataclass
class LimitReport:
    tau: float
    mu: float
    x_star_scaled: float
    hausdorff: float
    radius_estimate: float
    tangency_points: tuple
    gprime_limit_error: float
    rescaled_curves: tuple = ()


def hausdorff(A, B) -> float:
    A = np.column_stack([np.real(A), np.imag(A)])
    B = np.column_stack([np.real(B), np.imag(B)])
    da, _ = cKDTree(B).query(A)
    db, _ = cKDTree(A).query(B)
    return float(max(da.max(), db.max()))


def band_limits(tau: float, m: int = 4096) -> LimitReport:
    """Compare the rescaled band sqrt(tau) * Omega_tau with the chain of radius-2 disks."""
    if not 0 < tau < 1:
        raise DomainError("band_limits needs tau in (0, 1)")
    mu = math.sqrt(tau)
    dev = band_map(tau)
    bc = band_coeffs(tau)
    xs = find_x_star(bc)
    th = dev.vartheta
    y = -th + 2 * th * np.arange(m + 1) / m
    lower = mu * dev.g(-xs + 1j * y)
    upper = mu * dev.g(xs + 1j * y)
    piece = np.concatenate([lower, upper])
    t = 2 * math.pi * np.arange(m) / m
    circle = 2 * np.exp(1j * t)
    hd = hausdorff(piece, circle)
    rad = float(np.max(np.abs(piece)))
    tang = (complex(mu * dev.g(xs - 1j * th)), complex(mu * dev.g(xs + 1j * th)))
    # compare sqrt(tau) g'(sqrt(tau) z) with 2i/(1 + cos z) on a compact grid
    zz = np.linspace(-1.0, 1.0, 21)[:, None] + 1j * np.linspace(-1.0, 1.0, 21)[None, :]
    err = float(np.max(np.abs(tau * dev.dg(mu * zz) - 2j / (1 + np.cos(zz)))))
    return LimitReport(tau, mu, xs / mu, hd, rad, tang, err, (lower, upper))


def band_embedded_check(sol: BandSolution, m: int = 2048) -> dict:
    """Each boundary curve is a graph over the x1-axis and the two lie in opposite half-planes."""
    out = {"graph": True, "critical_points": [], "separated": True}
    th = sol.vartheta
    y = 2 * th * np.arange(m) / m
    for x0 in (-sol.x_star, sol.x_star):
        if sol.dev.mode == "flat":
            gg = sol.dev.g(x0 + 1j * y)
            out["separated"] &= bool(np.all(np.sign(gg.imag) == np.sign(x0)))
            out["critical_points"].append(0)
            continue
        gg = sol.dev.g(x0 + 1j * y)
        re = gg.real
        d = np.diff(re)
        out["graph"] &= bool(np.all(d < 0) or np.all(d > 0))
        # phi'(y) = -4 Im wp(x0 + iy + w1) changes sign only at y = k vartheta
        ph = _phi_prime(sol, x0, y)
        sc = int(np.count_nonzero(np.sign(ph) != np.sign(np.roll(ph, -1))))
        out["critical_points"].append(sc)
        out["separated"] &= bool(np.all(np.sign(gg.imag) == np.sign(x0)))
    out["embedded"] = out["graph"] and out["separated"]
    return out


def _phi_prime(sol, x0, y):
    # d/dy Im g(x0 + iy) = Re g'(x0 + iy); shift by half a sample so critical points at k vartheta are bracketed
    h = 0.5 * (y[1] - y[0])
    return np.real(sol.dev.dg(x0 + 1j * (y + h)))
