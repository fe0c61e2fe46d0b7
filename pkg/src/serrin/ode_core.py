"""Coefficient system for (alpha, beta), the boundary profile and the field omega.

Along every vertical line x = const the curve y -> g(x + iy) is a circle or a
line, and omega = log|g'| obeys the Riccati law

    2 omega_x = -alpha(x) exp(-omega) - beta(x) exp(omega).

The pair (alpha, beta) solves

    alpha'' = delta alpha - 2 alpha^2 beta,   beta'' = delta beta - 2 alpha beta^2,

with first integrals kappa1 = alpha' beta - beta' alpha and
kappa2 = alpha' beta' - delta alpha beta + alpha^2 beta^2.

Everything in the x direction is integrated in the variable Z = exp(-omega),
for which the Riccati law is polynomial: 2 Z_x = alpha Z^2 + beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, HorizonError

RTOL = 1e-12
ATOL = 1e-13
ZERO_XTOL = 1e-13
X_MAX = 400.0


@dataclass(frozen=True)
class ModelParams:
    """A point of moduli space.

    For rings ``eta`` is usually ``eta_n(tau)`` so that the developing map
    closes after ``n`` half-turns; ``s`` is the inner boundary abscissa.
    ``beta0`` is the value of beta at x = 0.  Any positive value is a
    dilation of the default ``2``.
    """

    kind: str
    eta: float
    tau: float
    n: Optional[int] = None
    s: Optional[float] = None
    beta0: float = 2.0
    q_hopf: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("ring", "band"):
            raise DomainError(f"unknown kind {self.kind!r}")
        if not (0 < self.tau <= 1):
            raise DomainError("tau must lie in (0, 1]")
        if self.kind == "ring":
            if not self.eta > 0:
                raise DomainError("eta must be positive")
            if self.n is not None and self.n < 2:
                raise DomainError("n must be at least 2")
            if self.s is not None and not self.s < 0:
                raise DomainError("s must be negative")
            if not self.beta0 > 0:
                raise DomainError("beta0 must be positive")

    @property
    def scale(self) -> float:
        """Dilation factor relative to the beta(0) = 2 normalisation."""
        return 2.0 / self.beta0 if self.kind == "ring" else 1.0

    @property
    def delta(self) -> float:
        if self.kind == "band":
            return -(self.tau + 1.0 / self.tau)
        e, t = self.eta, self.tau
        return (e * e * t * t - t * t - 1.0) / 4.0

    @property
    def initial(self) -> tuple:
        """(alpha(0), beta(0), alpha'(0), beta'(0))."""
        if self.kind == "band":
            return 0.0, 0.0, 1.0, -1.0
        e, t, lam = self.eta, self.tau, self.scale
        da = e * t * t / 8.0
        db = (e * e * t * t + e * e - 1.0) / (2.0 * e)
        return 0.0, self.beta0, lam * da, db / lam

    @property
    def kappa1(self) -> float:
        a, b, da, db = self.initial
        return da * b - db * a

    @property
    def kappa2(self) -> float:
        a, b, da, db = self.initial
        return da * db - self.delta * a * b + a * a * b * b

    @property
    def c_hat0(self) -> float:
        """Integration constant of sigma (ring); equals -kappa1 |g(0)|^2 / 4."""
        return -self.kappa1 * self.scale**2 / 4.0

    def profile_cubic(self) -> np.ndarray:
        """Coefficients (highest first) of P with Z_y^2 = P(Z) on x = 0."""
        a, b, da, db = self.initial
        return np.array([-da, -self.delta, db, -b * b / 4.0])

    def profile_range(self) -> tuple:
        """(Z_min, Z_max): the two positive roots of the profile cubic."""
        if self.kind == "ring":
            lam = self.scale
            return (2.0 / self.eta) / lam, (2.0 / (self.eta * self.tau**2)) / lam
        return self.tau, 1.0 / self.tau

    def with_s(self, s: float) -> "ModelParams":
        return replace(self, s=s)


def ring_params(n: int, tau: float, s: Optional[float] = None, eta: Optional[float] = None,
                beta0: float = 2.0) -> ModelParams:
    if eta is None:
        from .moduli import eta_level

        eta = eta_level(n, tau)
    return ModelParams("ring", eta=eta, tau=tau, n=n, s=s, beta0=beta0)


def band_params(tau: float) -> ModelParams:
    return ModelParams("band", eta=1.0, tau=tau, q_hopf=-0.5)


@dataclass(frozen=True)
class GridSpec:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def uniform(cls, x0: float, x1: float, y0: float, y1: float, nx: int = 201, ny: int = 401):
        if nx < 5 or ny < 5:
            raise DomainError("grid needs at least 5 nodes per direction")
        return cls(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def shape(self) -> tuple:
        return (len(self.x), len(self.y))


def _coeff_rhs(delta):
    def rhs(x, u):
        a, b, da, db = u[0], u[1], u[2], u[3]
        return [da, db, delta * a - 2 * a * a * b, delta * b - 2 * a * b * b, a * a, a * b, a]

    return rhs


def _find_zeros(sol, comp, x_end, sign):
    """Zeros of component ``comp`` on (0, x_end] (sign=+1) or [x_end, 0) (sign=-1), ordered from 0."""
    xs = np.linspace(0.0, x_end, max(2000, int(abs(x_end) * 200)))[1:]
    vals = sol.sol(xs)[comp]
    out = []
    f = lambda t: sol.sol(t)[comp]
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        lo, hi = xs[i], xs[i + 1]
        if vals[i] == 0:
            out.append(float(lo))
            continue
        out.append(brentq(f, lo, hi, xtol=ZERO_XTOL, rtol=1e-15))
    return out


@dataclass(frozen=True, eq=False)
class CoeffPair:
    """Dense solution of the coefficient system on [x_lo, x_hi].

    Stored components: alpha, beta, alpha', beta', int_0^x alpha^2,
    int_0^x alpha beta, int_0^x alpha.
    """

    params: ModelParams
    pos: object
    neg: object
    x_lo: float
    x_hi: float
    zeros: dict = field(default_factory=dict)

    @property
    def kappa1(self) -> float:
        return self.params.kappa1

    @property
    def kappa2(self) -> float:
        return self.params.kappa2

    def state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty((7, flat.size))
        m = flat >= 0
        if np.any(flat > self.x_hi + 1e-12) or np.any(flat < self.x_lo - 1e-12):
            raise HorizonError("x outside the integrated range", last_x=(self.x_lo, self.x_hi))
        if m.any():
            out[:, m] = self.pos.sol(flat[m])
        if (~m).any():
            out[:, ~m] = self.neg.sol(flat[~m])
        return out.reshape((7,) + x.shape)

    def alpha(self, x):
        return self.state(x)[0]

    def beta(self, x):
        return self.state(x)[1]

    def dalpha(self, x):
        return self.state(x)[2]

    def dbeta(self, x):
        return self.state(x)[3]

    def int_alpha2(self, x):
        return self.state(x)[4]

    def int_alphabeta(self, x):
        return self.state(x)[5]

    def t_ratio(self, x):
        st = self.state(x)
        return st[1] / st[0]

    def kappa_drift(self, x) -> tuple:
        """Max relative deviation of (kappa1, kappa2) along the samples x."""
        a, b, da, db = self.state(x)[:4]
        d = self.params.delta
        k1 = da * b - db * a
        k2 = da * db - d * a * b + a * a * b * b
        r1 = np.max(np.abs(k1 - self.kappa1)) / max(abs(self.kappa1), 1e-300)
        r2 = np.max(np.abs(k2 - self.kappa2)) / max(abs(self.kappa2), 1.0)
        return float(r1), float(r2)

    @property
    def x_a_minus(self):
        return self.zeros["x_a_minus"]

    @property
    def x_b_minus(self):
        return self.zeros["x_b_minus"]

    @property
    def x_b_plus(self):
        return self.zeros["x_b_plus"]

    @property
    def x_a_plus(self):
        return self.zeros["x_a_plus"]


def solve_coeffs(p: ModelParams, x_max: float = X_MAX) -> CoeffPair:
    """Integrate the coefficient system outward from x = 0 and locate the zeros.

    The integration range on each side ends a little past x_a (the first zero
    of alpha).  When alpha does not vanish again (tau = 1) it ends at ``x_max``
    or just before |alpha| + |beta| reaches 1e8, whichever comes first.
    """
    rhs = _coeff_rhs(p.delta)
    a0, b0, da0, db0 = p.initial
    u0 = [a0, b0, da0, db0, 0.0, 0.0, 0.0]

    def zero_event(comp, sign):
        # alpha(0) = 0 and sign(alpha) = sign(x) near 0
        def ev(x, u):
            return u[comp] if abs(x) > 1e-6 else float(sign)

        return ev

    def blow(x, u):
        return 1e8 - abs(u[0]) - abs(u[1])

    blow.terminal = True
    sols = {}
    zeros = {}
    for sign, key in ((1, "plus"), (-1, "minus")):
        # first pass: find the first zero of alpha away from 0
        ev_a = zero_event(0, sign)
        ev_a.terminal = True
        ev_a.direction = 0
        first = solve_ivp(rhs, (0.0, sign * x_max), u0, method="DOP853", rtol=RTOL, atol=ATOL,
                          events=[ev_a, blow])
        xa = float(first.t_events[0][0]) if first.t_events[0].size else None
        if first.t_events[1].size:
            x_blow = float(first.t_events[1][0])
            if xa is None and p.tau < 1:
                raise HorizonError("coefficient system blew up", last_x=x_blow)
            # tau = 1: alpha never vanishes again; stop short of the growth horizon
            x_end = 0.95 * x_blow if xa is None else xa + sign * min(1.0, 0.25 * abs(xa))
        else:
            x_end = sign * x_max if xa is None else xa + sign * min(1.0, 0.25 * abs(xa))
        sol = solve_ivp(rhs, (0.0, x_end), u0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
        if not sol.success:
            raise HorizonError(sol.message, last_x=float(sol.t[-1]))
        sols[key] = sol
        za = _find_zeros(sol, 0, x_end, sign)
        zeros[f"x_a_{key}"] = za[0] if za else sign * math.inf
        if p.kind == "ring":
            zb = _find_zeros(sol, 1, x_end, sign)
            zeros[f"x_b_{key}"] = zb[0] if zb else sign * math.inf
        else:
            zeros[f"x_b_{key}"] = zeros[f"x_a_{key}"]
    pos, neg = sols["plus"], sols["minus"]
    cp = CoeffPair(p, pos, neg, float(neg.t[-1]), float(pos.t[-1]), zeros)
    if p.kind == "ring" and p.tau < 1:
        zs = [zeros["x_a_minus"], zeros["x_b_minus"], zeros["x_b_plus"], zeros["x_a_plus"]]
        if not all(math.isfinite(z) for z in zs):
            raise HorizonError("required zeros of alpha, beta not found", last_x=x_max)
    return cp


def _profile_rhs(p: ModelParams):
    a0, b0, da0, db0 = p.initial
    d = p.delta

    def rhs(y, u):
        Z, dZ, th = u[0], u[1], u[2]
        # on x = 0: theta_y = omega_x = -(alpha Z + beta / Z) / 2, g_y = i g'
        thy = -(a0 * Z + b0 / Z) / 2.0
        gp = np.exp(1j * th) / Z
        gy = 1j * gp
        ddZ = (-3 * da0 * Z * Z - 2 * d * Z + db0) / 2.0
        return [dZ, ddZ, thy, gy.real, gy.imag]

    return rhs


def _g_origin(p: ModelParams):
    """(g(0), arg g'(0)) in the normalisation of each family."""
    if p.kind == "ring":
        return complex(-p.scale, 0.0), 0.0
    return 0j, 0.5 * math.pi


@dataclass(frozen=True, eq=False)
class Profile:
    """Cauchy data on x = 0 as functions of y."""

    params: ModelParams
    pos: object
    neg: object
    y_lo: float
    y_hi: float

    def state(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        out = np.empty((5, flat.size))
        m = flat >= 0
        if m.any():
            out[:, m] = self.pos.sol(flat[m]) if self.pos is not None else 0.0
        if (~m).any():
            out[:, ~m] = self.neg.sol(flat[~m]) if self.neg is not None else 0.0
        return out.reshape((5,) + y.shape)

    def Z(self, y):
        return self.state(y)[0]

    def dZ(self, y):
        return self.state(y)[1]

    def theta(self, y):
        return self.state(y)[2]

    def g(self, y):
        st = self.state(y)
        return st[3] + 1j * st[4]


def boundary_profile(p: ModelParams, y_max: float, y_min: Optional[float] = None) -> Profile:
    """Z(y) = exp(-omega(0, y)) with Z(0) at the lower root of the profile cubic.

    For rings this is the inverse of the periodic solution of 4 z'^2 = p(z)
    started at z(0) = 2/eta; for bands it is Z_y^2 = -Z (Z^2 + delta Z + 1)
    with Z(0) = tau.  The profile is constant when tau = 1.
    """
    if y_min is None:
        y_min = -y_max
    zmin, _ = p.profile_range()
    g0, th0 = _g_origin(p)
    u0 = [zmin, 0.0, th0, g0.real, g0.imag]
    rhs = _profile_rhs(p)
    sols = []
    for end in (y_max, y_min):
        if end == 0:
            sols.append(None)
            continue
        s = solve_ivp(rhs, (0.0, end), u0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
        if not s.success:
            raise HorizonError(s.message, last_x=float(s.t[-1]))
        sols.append(s)
    return Profile(p, sols[0], sols[1], y_min, y_max)


@dataclass(frozen=True, eq=False)
class StripField:
    """Grid samples on x-by-y nodes: Z = exp(-omega), W = Z_y, theta = arg g', g.

    Arrays have shape (nx, ny).  omega_y = -W / Z and omega_x follows from
    the Riccati law.
    """

    params: ModelParams
    grid: GridSpec
    Z: np.ndarray
    W: np.ndarray
    theta: np.ndarray
    g: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    dalpha: np.ndarray
    dbeta: np.ndarray
    int_alpha2: np.ndarray
    int_alphabeta: np.ndarray

    @property
    def omega(self) -> np.ndarray:
        return -np.log(self.Z)

    @property
    def omega_y(self) -> np.ndarray:
        return -self.W / self.Z

    @property
    def omega_x(self) -> np.ndarray:
        a = self.alpha[:, None]
        b = self.beta[:, None]
        return -0.5 * (a * self.Z + b / self.Z)

    @property
    def gprime(self) -> np.ndarray:
        return np.exp(1j * self.theta) / self.Z

    def identity_residual(self) -> float:
        """Max of |4 Z_y^2 - Q(x, Z)| / max(1, |Q|) over the grid."""
        a = self.alpha[:, None]
        b = self.beta[:, None]
        da = self.dalpha[:, None]
        db = self.dbeta[:, None]
        d = self.params.delta
        Z = self.Z
        Q = -a * a * Z**4 - 4 * da * Z**3 + (6 * a * b - 4 * d) * Z**2 + 4 * db * Z - b * b
        lhs = 4 * self.W**2
        return float(np.max(np.abs(lhs - Q) / np.maximum(1.0, np.abs(Q))))


def _column_rhs(cp: CoeffPair, ny: int):
    d = cp.params.delta

    def rhs(x, u):
        a, b, da, db = u[0], u[1], u[2], u[3]
        Z = u[7:7 + ny]
        W = u[7 + ny:7 + 2 * ny]
        th = u[7 + 2 * ny:7 + 3 * ny]
        out = np.empty_like(u)
        out[0], out[1] = da, db
        out[2] = d * a - 2 * a * a * b
        out[3] = d * b - 2 * a * b * b
        out[4], out[5], out[6] = a * a, a * b, a
        out[7:7 + ny] = 0.5 * (a * Z * Z + b)
        out[7 + ny:7 + 2 * ny] = a * Z * W
        # theta_x = -omega_y = W / Z
        out[7 + 2 * ny:7 + 3 * ny] = W / Z
        gx = np.exp(1j * th) / Z
        out[7 + 3 * ny:7 + 4 * ny] = gx.real
        out[7 + 4 * ny:] = gx.imag
        return out

    return rhs


def omega_field(p: ModelParams, coeffs: CoeffPair, grid: GridSpec) -> StripField:
    """Integrate the Riccati law in x from the profile on x = 0, one column per grid y.

    The grid must lie strictly inside the maximal strip on which omega exists.
    """
    x = np.asarray(grid.x, dtype=float)
    y = np.asarray(grid.y, dtype=float)
    lo = coeffs.zeros.get("x_b_minus", -math.inf) if p.kind == "ring" else coeffs.zeros["x_a_minus"]
    hi = coeffs.zeros["x_a_plus"]
    if not (x.min() > lo and x.max() < hi):
        raise DomainError(f"grid x-range [{x.min():.6g}, {x.max():.6g}] leaves the strip ({lo:.6g}, {hi:.6g})")
    prof = boundary_profile(p, max(float(y.max()), 0.0), min(float(y.min()), 0.0))
    st = prof.state(y)
    ny = len(y)
    a0, b0, da0, db0 = p.initial
    head = [a0, b0, da0, db0, 0.0, 0.0, 0.0]
    u0 = np.concatenate([head, st[0], st[1], st[2], st[3], st[4]])
    rhs = _column_rhs(coeffs, ny)
    nx = len(x)
    out = np.empty((nx, len(u0)))
    for side in (1, -1):
        idx = np.nonzero(x > 0)[0] if side > 0 else np.nonzero(x < 0)[0][::-1]
        if idx.size == 0:
            continue
        xe = x[idx]
        sol = solve_ivp(rhs, (0.0, xe[-1]), u0, method="DOP853", rtol=RTOL, atol=ATOL, t_eval=xe)
        if not sol.success or sol.y.shape[1] != idx.size:
            raise HorizonError("column integration failed: " + str(sol.message), last_x=float(sol.t[-1]))
        if np.any(sol.y[7:7 + ny] <= 0):
            raise DomainError("omega left its strip of definition inside the grid")
        out[idx] = sol.y.T
    zidx = np.nonzero(x == 0)[0]
    out[zidx] = u0
    Z = out[:, 7:7 + ny]
    W = out[:, 7 + ny:7 + 2 * ny]
    th = out[:, 7 + 2 * ny:7 + 3 * ny]
    g = out[:, 7 + 3 * ny:7 + 4 * ny] + 1j * out[:, 7 + 4 * ny:]
    return StripField(p, grid, Z, W, th, g, out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4], out[:, 5])
