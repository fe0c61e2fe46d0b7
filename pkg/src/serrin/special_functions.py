"""Weierstrass functions on rectangular lattices and singular quadrature.

The lattice is spanned by a real half-period ``omega1`` and a purely
imaginary half-period ``omega2``.  Evaluation reduces the argument to the
fundamental cell and sums the Fourier (nome) expansion in the direction of
the *shorter* half-period, so the nome is at most ``exp(-pi)`` and roughly
a dozen terms reach machine precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DomainError, PoleError, UnsupportedLattice

POLE_RADIUS = 1e-6
_ROOT_TOL = 1e-12


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two positive reals."""
    for _ in range(64):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        if abs(a - b) <= 1e-16 * a:
            break
    return 0.5 * (a + b)


class _Series:
    """Nome expansion on the lattice with real half-period ``a`` <= imaginary ``b``."""

    def __init__(self, a: float, b: float):
        self.a, self.b = a, b
        q = math.exp(-math.pi * b / a)
        n = []
        k = 1
        # terms decay like q**k after cell reduction
        while k < 200 and q**k > 1e-19:
            n.append(k)
            k += 1
        self.n = np.array(n or [1], dtype=float)
        q2n = q ** (2 * self.n)
        self.q2n = q2n
        self.w = self.n * q2n / (1.0 - q2n)
        self.eta_a = math.pi**2 / (12 * a) * (1.0 - 24.0 * float(np.sum(self.w)))
        # Legendre relation eta_a * (i b) - eta_b * a = i pi / 2
        self.eta_b = (self.eta_a * 1j * b - 0.5j * math.pi) / a

    def reduce(self, u):
        m = np.round(u.real / (2 * self.a))
        k = np.round(u.imag / (2 * self.b))
        u0 = u - 2 * m * self.a - 2j * k * self.b
        return u0, m, k

    def _check(self, u0):
        bad = np.abs(u0) < POLE_RADIUS * self.a
        if np.any(bad):
            raise PoleError("argument within pole-exclusion radius of a lattice point")

    def wp(self, u):
        u0, _, _ = self.reduce(u)
        self._check(u0)
        a = self.a
        v = math.pi * u0 / (2 * a)
        s = np.sin(v)
        arg = np.multiply.outer(u0, self.n) * (math.pi / a)
        p = -self.eta_a / a + (math.pi / (2 * a)) ** 2 / s**2 - 2 * math.pi**2 / a**2 * (np.cos(arg) @ self.w)
        dp = (-2 * (math.pi / (2 * a)) ** 3 * np.cos(v) / s**3
              + 2 * math.pi**3 / a**3 * (np.sin(arg) @ (self.n * self.w)))
        return p, dp

    def zeta(self, u):
        u0, m, k = self.reduce(u)
        self._check(u0)
        a = self.a
        arg = np.multiply.outer(u0, self.n) * (math.pi / a)
        z0 = (self.eta_a * u0 / a + math.pi / (2 * a) / np.tan(math.pi * u0 / (2 * a))
              + 2 * math.pi / a * (np.sin(arg) @ (self.q2n / (1 - self.q2n))))
        return z0 + 2 * m * self.eta_a + 2 * k * self.eta_b

    def log_sigma(self, u):
        u0, m, k = self.reduce(u)
        a = self.a
        c2 = np.cos(math.pi * u0 / a)[..., None]
        prod = np.log(1 - 2 * c2 * self.q2n + self.q2n**2) - 2 * np.log1p(-self.q2n)
        s0 = (math.log(2 * a / math.pi) + self.eta_a * u0**2 / (2 * a)
              + np.log(np.sin(math.pi * u0 / (2 * a))) + prod.sum(axis=-1))
        eta_mk = 2 * m * self.eta_a + 2 * k * self.eta_b
        sign = (m + k + m * k) % 2
        return s0 + eta_mk * (u0 + m * a + 1j * k * self.b) + 1j * math.pi * sign


@dataclass(frozen=True)
class WeierstrassData:
    """Rectangular lattice with invariants, roots and half-periods.

    ``e1 > e2 > e3`` with ``wp(omega1) = e1``, ``wp(omega1 + omega2) = e2``
    and ``wp(omega2) = e3``.  A double root is kept as a flagged degenerate
    lattice whose imaginary half-period is infinite.  The ring-only fields
    (``mu``, ``c_cubed``, ``bc2``, ``g0``) stay ``None`` elsewhere.
    """

    g2: float
    g3: float
    e1: float
    e2: float
    e3: float
    omega1: float
    omega2: complex
    degenerate: bool = False
    mu: Optional[complex] = None
    c_cubed: Optional[float] = None
    bc2: Optional[float] = None
    g0: Optional[complex] = None

    @property
    def discriminant(self) -> float:
        return self.g2**3 - 27 * self.g3**2

    @cached_property
    def _series(self) -> tuple:
        if self.degenerate:
            raise UnsupportedLattice("degenerate lattice has no doubly periodic wp; use the elementary closed form")
        a, b = self.omega1, self.omega2.imag
        if b >= a:
            return _Series(a, b), False
        return _Series(b, a), True

    @cached_property
    def eta1(self) -> complex:
        return complex(zeta(self, self.omega1))

    @cached_property
    def eta2(self) -> complex:
        return complex(zeta(self, self.omega2))


def lattice_from_roots(e1: float, e2: float, e3: float) -> WeierstrassData:
    """Half-periods of the lattice whose cubic 4(t-e1)(t-e2)(t-e3) has the given roots."""
    vals = []
    for e in (e1, e2, e3):
        if isinstance(e, complex):
            if abs(e.imag) > _ROOT_TOL:
                raise DomainError("roots must be real")
            e = e.real
        vals.append(float(e))
    if not all(math.isfinite(v) for v in vals):
        raise DomainError("roots must be finite")
    scale = max(1.0, max(abs(v) for v in vals))
    if abs(sum(vals)) > 1e-10 * scale:
        raise DomainError(f"roots must sum to zero (got {sum(vals):.3e})")
    hi, mid, lo = sorted(vals, reverse=True)
    g2 = -4 * (hi * mid + mid * lo + hi * lo)
    g3 = 4 * hi * mid * lo
    if hi - lo <= _ROOT_TOL * scale:
        raise UnsupportedLattice("triple root: lattice collapses")
    if hi - mid <= _ROOT_TOL * scale:
        w1 = math.pi / (2 * math.sqrt(hi - lo))
        return WeierstrassData(g2, g3, hi, mid, lo, w1, complex(0, math.inf), degenerate=True)
    if mid - lo <= _ROOT_TOL * scale:
        w2 = math.pi / (2 * math.sqrt(hi - lo))
        return WeierstrassData(g2, g3, hi, mid, lo, math.inf, complex(0, w2), degenerate=True)
    w1 = math.pi / (2 * agm(math.sqrt(hi - lo), math.sqrt(hi - mid)))
    w2 = math.pi / (2 * agm(math.sqrt(hi - lo), math.sqrt(mid - lo)))
    return WeierstrassData(g2, g3, hi, mid, lo, w1, complex(0, w2))


def lattice_from_invariants(g2: float, g3: float) -> WeierstrassData:
    disc = g2**3 - 27 * g3**2
    if disc < 0:
        raise UnsupportedLattice("negative discriminant: complex roots, lattice is not rectangular")
    roots = np.roots([4.0, 0.0, -g2, -g3]).real
    roots = roots - roots.mean()
    return lattice_from_roots(*roots)


def with_ring_constants(W: WeierstrassData, **kw) -> WeierstrassData:
    return WeierstrassData(W.g2, W.g3, W.e1, W.e2, W.e3, W.omega1, W.omega2, W.degenerate, **kw)


def _asarray(z):
    return np.asarray(z, dtype=complex)


def wp(W: WeierstrassData, z):
    """Return (wp(z), wp'(z)); vectorised over ``z``."""
    ser, rot = W._series
    z = _asarray(z)
    if rot:
        p, dp = ser.wp(-1j * z)
        return -p, 1j * dp
    return ser.wp(z)


def zeta(W: WeierstrassData, z):
    ser, rot = W._series
    z = _asarray(z)
    if rot:
        return -1j * ser.zeta(-1j * z)
    return ser.zeta(z)


def log_sigma(W: WeierstrassData, z):
    """A branch of log sigma(z); only differences and exponentials are meaningful."""
    ser, rot = W._series
    z = _asarray(z)
    if rot:
        return 0.5j * math.pi + ser.log_sigma(-1j * z)
    return ser.log_sigma(z)


def zeta_sigma(W: WeierstrassData, z):
    """Return (zeta(z), sigma(z)) with sigma(z) = z + O(z^5).

    At lattice points sigma is 0 and zeta is complex infinity.
    """
    z = _asarray(z)
    ser, rot = W._series
    u0, _, _ = ser.reduce(-1j * z if rot else z)
    pole = np.abs(u0) < POLE_RADIUS * ser.a
    with np.errstate(all="ignore"):
        sig = np.where(pole, 0.0, np.exp(log_sigma(W, z)))
    zt = np.full(z.shape, complex(math.inf, math.inf))
    if np.any(~pole):
        zt[~pole] = zeta(W, z[~pole])
    return zt, sig


def sigma_ratio(W: WeierstrassData, mu: complex, w):
    """sigma(mu - w) / sigma(mu + w) as one exponential (no overflow in either factor)."""
    w = _asarray(w)
    return np.exp(log_sigma(W, mu - w) - log_sigma(W, mu + w))


def wp_taylor(W: WeierstrassData, z0, order: int) -> np.ndarray:
    """Taylor coefficients c_k of wp about regular points z0, k = 0..order.

    Uses wp'' = 6 wp^2 - g2/2.  The result has shape (order + 1,) + shape(z0).
    """
    z0 = _asarray(z0)
    p, dp = wp(W, z0)
    c = np.zeros((order + 1,) + z0.shape, dtype=complex)
    c[0] = p
    if order >= 1:
        c[1] = dp
    for k in range(0, order - 1):
        conv = sum(c[j] * c[k - j] for j in range(k + 1))
        rhs = 6 * conv - (0.5 * W.g2 if k == 0 else 0.0)
        c[k + 2] = rhs / ((k + 2) * (k + 1))
    return c


def legendre_residual(W: WeierstrassData) -> float:
    return abs(W.eta1 * W.omega2 - W.eta2 * W.omega1 - 0.5j * math.pi)


def singular_quad(f: Callable[[float], float], a: float, b: float,
                  singularity_exponents=(0.5, 0.5), tol: float = 1e-10,
                  limit: int = 400) -> float:
    """Integrate f over [a, b] where f ~ (t-a)^-p and (b-t)^-q at the ends.

    Each declared exponent p in [0, 1) is removed by t - a = (b - a) u^k with
    k = 1/(1 - p) on the corresponding half interval; the cancelled
    integrand is then handed to adaptive Gauss-Kronrod quadrature.
    """
    pa, pb = singularity_exponents
    for p in (pa, pb):
        if not 0 <= p < 1:
            raise DomainError("singularity exponents must lie in [0, 1)")
    if not b > a:
        raise DomainError("need a < b")
    h = 0.5 * (b - a)

    def piece(p, left):
        k = 1.0 / (1.0 - p)

        def g(u):
            d = h * u**k
            t = a + d if left else b - d
            return f(t) * h * k * u ** (k - 1)

        return integrate.quad(g, 0.0, 1.0, epsabs=0.1 * tol, epsrel=0.1 * tol, limit=limit)

    v1, e1 = piece(pa, True)
    v2, e2 = piece(pb, False)
    est, err = v1 + v2, e1 + e2
    if not math.isfinite(est) or err > tol * max(1.0, abs(est)):
        raise AccuracyError(f"quadrature did not reach {tol:g}", estimate=est, bound=err)
    return est


def sin2_quad(f: Callable, tol: float = 1e-12, limit: int = 400) -> float:
    """Integral of f(t) dt / sqrt(t (1 - t)) over [0, 1] via t = sin^2(theta)."""

    def g(th):
        return 2.0 * f(math.sin(th) ** 2)

    val, err = integrate.quad(g, 0.0, 0.5 * math.pi, epsabs=tol, epsrel=tol, limit=limit)
    if err > 10 * tol * max(1.0, abs(val)):
        raise AccuracyError("sin^2 quadrature did not converge", estimate=val, bound=err)
    return val
