"""mKdV operators Q_n as exact differential polynomials, jets of eta = g''/(2g'),
conformal Jacobi fields h_n = Im Q_n[eta] and the spectral genus.

Jet variable u_k stands for eta^(k).  Q_0 = u_0 and Q_{n+1} is the unique
KdV-homogeneous polynomial of weight 2n+3 with

    u_0 D(Q_{n+1}) - u_1 Q_{n+1} = u_0 D^3 Q_n - u_1 D^2 Q_n - 4 u_0^3 D Q_n,

where D is the total derivative and u_k has weight k+1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from .errors import DomainError, InconsistencyError

Mono = Tuple[int, ...]


def _trim(e) -> Mono:
    e = list(e)
    while e and e[-1] == 0:
        e.pop()
    return tuple(e)


class DiffPoly:
    """Polynomial in jet variables u_0, u_1, ... with rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Dict[Mono, Fraction] | None = None):
        t: Dict[Mono, Fraction] = {}
        for k, v in (terms or {}).items():
            v = Fraction(v)
            if v:
                k = _trim(k)
                t[k] = t.get(k, Fraction(0)) + v
                if not t[k]:
                    del t[k]
        self.terms = t

    @classmethod
    def var(cls, k: int) -> "DiffPoly":
        return cls({(0,) * k + (1,): 1})

    @classmethod
    def const(cls, c) -> "DiffPoly":
        return cls({(): c})

    def __add__(self, o):
        o = o if isinstance(o, DiffPoly) else DiffPoly.const(o)
        t = dict(self.terms)
        for k, v in o.terms.items():
            t[k] = t.get(k, 0) + v
        return DiffPoly(t)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, o):
        return self + (-o if isinstance(o, DiffPoly) else DiffPoly.const(-Fraction(o)))

    def __mul__(self, o):
        if not isinstance(o, DiffPoly):
            o = Fraction(o)
            return DiffPoly({k: v * o for k, v in self.terms.items()})
        t: Dict[Mono, Fraction] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in o.terms.items():
                n = max(len(k1), len(k2))
                k = tuple((k1[i] if i < len(k1) else 0) + (k2[i] if i < len(k2) else 0) for i in range(n))
                t[k] = t.get(k, 0) + v1 * v2
        return DiffPoly(t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise DomainError("DiffPoly powers must be non-negative integers")
        out = DiffPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, o):
        if not isinstance(o, DiffPoly):
            o = DiffPoly.const(o)
        return self.terms == o.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def D(self) -> "DiffPoly":
        """Total derivative: sum_k dQ/du_k u_{k+1}."""
        t: Dict[Mono, Fraction] = {}
        for e, c in self.terms.items():
            for k, a in enumerate(e):
                if a == 0:
                    continue
                ne = list(e) + [0]
                ne[k] -= 1
                ne[k + 1] += 1
                ne = _trim(ne)
                t[ne] = t.get(ne, 0) + c * a
        return DiffPoly(t)

    def weights(self) -> set:
        return {sum((k + 1) * a for k, a in enumerate(e)) for e in self.terms}

    @property
    def weight(self) -> int:
        w = self.weights()
        if len(w) != 1:
            raise InconsistencyError("polynomial is not homogeneous")
        return w.pop()

    @property
    def order(self) -> int:
        return max((len(e) - 1 for e in self.terms), default=-1)

    def evaluate(self, jet):
        """Evaluate at jet[k] = u_k; jet may carry trailing array dimensions."""
        jet = np.asarray(jet)
        if jet.shape[0] < self.order + 1:
            raise DomainError(f"jet of length {jet.shape[0]} too short for order {self.order}")
        out = np.zeros(jet.shape[1:], dtype=jet.dtype if jet.dtype.kind == "c" else complex)
        for e, c in self.terms.items():
            term = np.full(jet.shape[1:], float(c), dtype=out.dtype)
            for k, a in enumerate(e):
                if a:
                    term = term * jet[k] ** a
            out = out + term
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (-len(e), tuple(-a for a in reversed(e)))):
            c = self.terms[e]
            vs = "*".join(f"u{k}" + (f"^{a}" if a > 1 else "") for k, a in enumerate(e) if a)
            if not vs:
                parts.append(str(c))
            elif c == 1:
                parts.append(vs)
            elif c == -1:
                parts.append("-" + vs)
            else:
                parts.append(f"{c}*{vs}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def weight_basis(w: int) -> list:
    """All monomials with sum (k+1) a_k = w."""
    out = []

    def rec(rem, maxpart, acc):
        if rem == 0:
            e = [0] * (max(acc) if acc else 0)
            for p in acc:
                e[p - 1] += 1
            out.append(_trim(e))
            return
        for p in range(min(rem, maxpart), 0, -1):
            rec(rem - p, p, acc + [p])

    rec(w, w, [])
    return [DiffPoly({e: 1}) for e in out]


def _solve_exact(A, b):
    """Solve A x = b over the rationals (A may be tall); raise if inconsistent."""
    m, n = len(A), len(A[0])
    M = [row[:] + [bb] for row, bb in zip(A, b)]
    piv = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        inv = 1 / M[r][c]
        M[r] = [v * inv for v in M[r]]
        for i in range(m):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [vi - f * vr for vi, vr in zip(M[i], M[r])]
        piv.append(c)
        r += 1
    if any(M[i][n] != 0 for i in range(r, m)):
        raise InconsistencyError("recursion system is inconsistent")
    if r < n:
        raise InconsistencyError("recursion system is underdetermined")
    x = [Fraction(0)] * n
    for i, c in enumerate(piv):
        x[c] = M[i][n]
    return x


@lru_cache(maxsize=None)
def mkdv_operator(n: int) -> DiffPoly:
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > 8:
        raise DomainError("operators are generated up to n = 8")
    u0, u1 = DiffPoly.var(0), DiffPoly.var(1)
    if n == 0:
        return u0
    Q = mkdv_operator(n - 1)
    dQ = Q.D()
    d2Q = dQ.D()
    rhs = u0 * d2Q.D() - u1 * d2Q - 4 * u0 * u0 * u0 * dQ
    basis = weight_basis(2 * n + 1)
    cols = [u0 * m.D() - u1 * m for m in basis]
    keys = sorted(set().union(*[c.terms for c in cols], rhs.terms))
    A = [[c.terms.get(k, Fraction(0)) for c in cols] for k in keys]
    b = [rhs.terms.get(k, Fraction(0)) for k in keys]
    x = _solve_exact(A, b)
    out = DiffPoly()
    for xi, m in zip(x, basis):
        out = out + m * xi
    if out.weight != 2 * n + 1:
        raise InconsistencyError("generated operator is not homogeneous")
    return out


def evaluate_q(n: int, jet) -> np.ndarray:
    jet = np.asarray(jet)
    if jet.shape[0] < 2 * n + 1:
        raise DomainError(f"Q_{n} needs a jet of length {2 * n + 1}")
    return mkdv_operator(n).evaluate(jet)


def evaluate_dq(n: int, jet) -> np.ndarray:
    """d/dz Q_n[eta], from the total derivative (jet length 2n+2)."""
    jet = np.asarray(jet)
    if jet.shape[0] < 2 * n + 2:
        raise DomainError(f"Q_{n}' needs a jet of length {2 * n + 2}")
    return mkdv_operator(n).D().evaluate(jet)


# ---------------------------------------------------------------------------
# power series helpers (coefficient axis first)


def series_div(num, den) -> np.ndarray:
    num = np.asarray(num, dtype=complex)
    den = np.asarray(den, dtype=complex)
    N = num.shape[0]
    out = np.zeros_like(num)
    for k in range(N):
        acc = num[k] - sum(out[j] * den[k - j] for j in range(k))
        out[k] = acc / den[0]
    return out


def series_tan(w0, eps: float, N: int) -> np.ndarray:
    """Taylor coefficients in t of tan(w0 + eps t)."""
    w0 = np.asarray(w0, dtype=complex)
    s = np.zeros((N,) + w0.shape, dtype=complex)
    c = np.zeros_like(s)
    sv, cv = np.sin(w0), np.cos(w0)
    cyc_s = [sv, cv, -sv, -cv]
    cyc_c = [cv, -sv, -cv, sv]
    for k in range(N):
        f = eps**k / math.factorial(k)
        s[k] = cyc_s[k % 4] * f
        c[k] = cyc_c[k % 4] * f
    return series_div(s, c)


def jet_of_eta(dev, z, order: int) -> np.ndarray:
    """(eta, eta', ..., eta^(order)) at z (vectorised), from the closed-form representation."""
    c = dev.eta_taylor(z, order)
    fac = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
    return c * fac.reshape((-1,) + (1,) * (c.ndim - 1))


# ---------------------------------------------------------------------------
# Jacobi fields


def _domain_data(obj):
    """(dev, grid, omega, alpha pair, beta pair, kind) for a ring DomainField or BandSolution."""
    if hasattr(obj, "x_star") and hasattr(obj, "coeffs") and hasattr(obj.coeffs, "h"):
        xs = obj.x_star
        a = float(obj.coeffs.alpha(xs))
        return obj.dev, obj.grid, obj.omega, (-a, a), (a, -a), "band"
    cp = obj.coeffs
    al = (float(cp.alpha(obj.s)), float(cp.alpha(obj.s_star)))
    be = (float(cp.beta(obj.s)), float(cp.beta(obj.s_star)))
    return obj.dev, obj.grid, obj.omega, al, be, "ring"


def h_field(dev, grid, n: int) -> np.ndarray:
    Z = grid.x[:, None] + 1j * grid.y[None, :]
    return np.imag(evaluate_q(n, jet_of_eta(dev, Z, 2 * n)))


@dataclass
class JacobiReport:
    n: int
    robin_residual: float
    robin_residual_exact: float
    harmonic_residual: float
    h_max: float
    variant: str = "robin"


def jacobi_field_check(field, n: int) -> JacobiReport:
    """Robin residual of h_n = Im Q_n[eta] on the two boundary lines, normalised by max |h_n|.

    The Robin law is d h/d x = (alpha_j e^-omega - beta_j e^omega) h / 2, the
    y-derivative of the capillary condition 2 omega_x = -alpha e^-omega - beta e^omega.
    """
    from .verify import boundary_dx, fd_laplacian, interior

    dev, grid, omega, al, be, kind = _domain_data(field)
    Z = grid.x[:, None] + 1j * grid.y[None, :]
    jet = jet_of_eta(dev, Z, 2 * n + 1)
    h = np.imag(evaluate_q(n, jet))
    hx_exact = np.imag(evaluate_dq(n, jet))
    hmax = float(np.max(np.abs(h)))
    if hmax == 0:
        return JacobiReport(n, 0.0, 0.0, 0.0, 0.0)
    res, res_ex = 0.0, 0.0
    for side, a, b in ((0, al[0], be[0]), (-1, al[1], be[1])):
        om = omega[side]
        rhs = 0.5 * (a * np.exp(-om) - b * np.exp(om)) * h[side]
        res = max(res, float(np.max(np.abs(boundary_dx(h, grid.hx, side) - rhs))))
        res_ex = max(res_ex, float(np.max(np.abs(hx_exact[side] - rhs))))
    harm = float(np.max(np.abs(interior(fd_laplacian(h, grid.hx, grid.hy)))))
    return JacobiReport(n, res / hmax, res_ex / hmax, harm / hmax, hmax)


# ---------------------------------------------------------------------------
# spectral fit


FIT_THRESHOLD = 1e-6


@dataclass
class SpectralFit:
    m: int
    a0: float
    c: list
    residual: float
    grid_points: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"m": self.m, "a0": self.a0, "c": list(self.c), "residual": self.residual,
                "grid_points": self.grid_points}


def sample_points(field, count: int = 256, seed: int = 0, margin: float = 1e-2) -> np.ndarray:
    """Random interior points of the strip avoiding |x| < margin and the strip edges."""
    grid = field.grid
    x0, x1 = grid.x[0] + margin, grid.x[-1] - margin
    y0, y1 = grid.y[0] + margin, grid.y[-1] - margin
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        x = rng.uniform(x0, x1, count)
        y = rng.uniform(y0, y1, count)
        ok = np.abs(x) >= margin
        pts.extend((x[ok] + 1j * y[ok]).tolist())
    return np.array(pts[:count])


def spectral_fit(field, m: int, points=None, count: int = 256) -> SpectralFit:
    """Least squares for real (a0, c_0..c_{m-1}) in Q_m = a0 + sum c_j Q_j."""
    dev = field.dev
    if points is None:
        points = sample_points(field, count)
    pts = np.asarray(points)
    if pts.size < 200:
        raise DomainError("spectral fit needs at least 200 sample points")
    jet = jet_of_eta(dev, pts, 2 * m)
    Q = [evaluate_q(j, jet) for j in range(m + 1)]
    cols = [np.ones(pts.size, dtype=complex)] + Q[:m]
    A = np.vstack([np.concatenate([c.real, c.imag]) for c in cols]).T
    y = np.concatenate([Q[m].real, Q[m].imag])
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    degenerate = rank < A.shape[1]
    if degenerate:
        warnings.warn("rank-deficient spectral fit; minimum-norm solution used")
    r = float(np.linalg.norm(A @ coef - y))
    ny = float(np.linalg.norm(y))
    rel = r / ny if ny > 1e-300 else r
    return SpectralFit(m, float(coef[0]), [float(c) for c in coef[1:]], rel, int(pts.size), bool(degenerate))


@dataclass
class GenusReport:
    genus: int | None
    fits: list
    h_relation_residual: float | None = None
    note: str = ""


def genus_classify(field, m_max: int = 3, threshold: float = FIT_THRESHOLD) -> GenusReport:
    if m_max > 6:
        raise DomainError("m_max must be at most 6")
    pts = sample_points(field)
    fits = []
    for m in range(m_max + 1):
        fit = spectral_fit(field, m, pts)
        fits.append(fit)
        if fit.residual < threshold:
            # h-level check: Im of the relation h_m = sum c_j h_j on the sample set
            jet = jet_of_eta(field.dev, pts, 2 * m)
            hm = np.imag(evaluate_q(m, jet))
            hs = sum(c * np.imag(evaluate_q(j, jet)) for j, c in enumerate(fit.c)) if fit.c else 0.0
            scale = max(float(np.max(np.abs(hm))), 1e-300)
            hr = float(np.max(np.abs(hm - hs))) / scale if np.max(np.abs(hm)) > 0 else float(np.max(np.abs(hs)))
            return GenusReport(m, fits, hr)
    return GenusReport(None, fits, None, note=f"genus > {m_max}")
