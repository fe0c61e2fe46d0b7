"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the summary lines.
"""
import math
import time

import numpy as np
import pytest

from serrin import moduli as M
from serrin.band_domain import band_limits, band_solution, flat_band, x_sharp
from serrin.mkdv import DiffPoly, evaluate_q, genus_classify, jacobi_field_check, jet_of_eta, mkdv_operator
from serrin.moduli import embed_bounds_for
from serrin.ode_core import GridSpec, omega_field
from serrin.ring_domain import dihedral_check, radial_limit, ring_domain
from serrin.verify import (boundary_dx, constancy, d1, d2, hopf_estimate, simple_curve_check, verify_samples)

X_SHARP_REF = 1.1996786402


def report(k: int, ok: bool, msg: str, t0: float, budget: float):
    dt = time.perf_counter() - t0
    ok = bool(ok) and dt < budget
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {msg} [{dt:.2f} s, budget {budget:g} s]")
    assert ok, msg


def limit_to_one(f, h=1e-6):
    # linear extrapolation of the quadrature route from tau = 1 - h, 1 - 2h
    return 2 * f(1 - h) - f(1 - 2 * h)


@pytest.fixture(scope="module")
def ring():
    fld, bounds = ring_domain(3, 0.5, nx=201, ny=401)
    return fld, bounds


def test_criterion_01_tau_one_moduli():
    t0 = time.perf_counter()
    worst = 0.0
    for eta in (0.3, 1.0, 3.0):
        vt = limit_to_one(lambda t: M.vartheta(eta, t))
        th = limit_to_one(lambda t: M.theta_arc(eta, t))
        worst = max(worst, abs(vt - 2 * math.pi / math.sqrt(1 + eta**2)), abs(th - math.pi * eta / math.sqrt(1 + eta**2)))
    report(1, worst < 1e-8, f"tau -> 1 quadrature limits of vartheta, Theta, max error {worst:.2e} < 1e-8", t0, 1.0)


def test_criterion_02_level_curve_endpoints():
    t0 = time.perf_counter()
    e1 = e0 = 0.0
    for n in (2, 3, 4, 6):
        e1 = max(e1, abs(limit_to_one(lambda t: M.eta_level(n, t)) - 1 / math.sqrt(n * n - 1)))
        e0 = max(e0, abs(M.eta_level(n, 1e-3) - math.tan(math.pi / (2 * n))))
    report(2, e1 < 1e-8 and e0 < 1e-3,
           f"eta_n(1) error {e1:.2e}, eta_n(1e-3) - tan(pi/2n) max {e0:.2e} < 1e-3", t0, 5.0)


def test_criterion_03_ring_soundness(ring):
    t0 = time.perf_counter()
    fld, (h0, h1) = ring
    g = fld.grid
    ext, inn = fld.boundary_curves(4096)
    rep, _ = verify_samples(g.x, g.y, fld.v, fld.omega, fld.dev.samples, fld.q_hopf, curves=[ext, inn])
    unit = float(np.max(np.abs(np.abs(fld.dev.g(1j * np.linspace(0, fld.dev.period, 2049))) - 1)))
    order, dres = dihedral_check(fld.dev, [fld.s, fld.s_star], tol=1e-8)
    q_target = 1 / (2 * float(fld.coeffs.t_ratio(fld.s)))
    checks = {
        "pde": rep.pde_residual_max < 1e-5,
        "dirichlet": max(rep.dirichlet_stdev) < 1e-7,
        "neumann": max(rep.neumann_stdev) < 1e-6,
        "unit": unit < 1e-9,
        "hopf": rep.hopf_stdev < 1e-6 and abs(rep.hopf_mean - q_target) < 1e-5,
        "dihedral": order == 6 and dres < 1e-8,
        "simple": rep.embedded,
        "midpoint": abs(fld.s - 0.5 * (h0 + h1)) < 1e-12,
    }
    msg = (f"pde {rep.pde_residual_max:.2e}, dirichlet {max(rep.dirichlet_stdev):.2e}, "
           f"neumann {max(rep.neumann_stdev):.2e}, |g(iy)|-1 {unit:.2e}, hopf {rep.hopf_mean:.8f}"
           f"+-{rep.hopf_stdev:.2e} vs {q_target:.8f}, dihedral {dres:.2e}, simple {rep.embedded}; "
           f"failed: {[k for k, v in checks.items() if not v]}")
    report(3, all(checks.values()), msg, t0, 60.0)


def test_criterion_04_closed_form_vs_ode(ring):
    t0 = time.perf_counter()
    fld, _ = ring
    p, cp, dev = fld.params, fld.coeffs, fld.dev
    th = dev.vartheta
    grid = GridSpec.uniform(fld.s, fld.s_star, -th, th, 101, 201)
    strip = omega_field(p, cp, grid)
    Z = grid.x[:, None] + 1j * grid.y[None, :]
    err = float(np.max(np.abs(dev.g(Z) - strip.g)))
    errp = float(np.max(np.abs(dev.dg(Z) - strip.gprime)))
    report(4, err < 1e-6 and errp < 1e-6, f"closed-form g vs integrated g sup error {err:.2e}, g' {errp:.2e} < 1e-6",
           t0, 30.0)


def test_criterion_05_window_limits():
    t0 = time.perf_counter()
    lo = embed_bounds_for(3, 1e-2)
    near_zero = max(abs(lo[0] + math.pi), abs(lo[1] + math.pi))
    hi = [embed_bounds_for(3, t) for t in (0.9, 0.99, 0.999)]
    h0s = [b[0] for b in hi]
    one = embed_bounds_for(3, 1.0)
    ok = (near_zero < 5e-2 and h0s[0] > h0s[1] > h0s[2] and h0s[2] < -10 and abs(hi[2][1]) < 2e-2
          and one == (-math.inf, 0.0))
    report(5, ok, f"tau=1e-2 window {lo[0]:.5f}, {lo[1]:.5f} (max dist to -pi {near_zero:.3f} < 5e-2); "
                  f"tau=0.9/0.99/0.999 h0 {[round(h, 3) for h in h0s]}, h1 {[round(b[1], 4) for b in hi]}", t0, 120.0)


def test_criterion_06_necklace():
    from serrin.ring_domain import necklace_limit

    t0 = time.perf_counter()
    r = necklace_limit(3, -math.pi)
    off = [necklace_limit(3, -math.pi + d).orthogonality_residual for d in (-0.3, 0.3)]
    ok = r.orthogonality_residual < 1e-10 and min(off) > 1e-2 and abs(r.radius - math.sqrt(3)) < 1e-9
    report(6, ok, f"orthogonality {r.orthogonality_residual:.2e} at -pi, {off[0]:.3f}/{off[1]:.3f} at -pi-+0.3, "
                  f"radius - sqrt3 {r.radius - math.sqrt(3):.2e}", t0, 1.0)


def test_criterion_07_band_soundness():
    t0 = time.perf_counter()
    sol = band_solution(0.5)
    g = sol.grid
    rep, _ = verify_samples(g.x, g.y, sol.v, sol.omega, sol.g, -0.5)
    dir_max = float(max(np.max(np.abs(sol.v[0])), np.max(np.abs(sol.v[-1]))))
    n1 = constancy(np.exp(-sol.omega[0]) * boundary_dx(sol.v, g.hx, 0))
    n2 = constancy(np.exp(-sol.omega[-1]) * boundary_dx(sol.v, g.hx, -1))
    L = float(np.max(np.abs(sol.L - sol.g.imag)))
    wr = float(np.max(np.abs(sol.coeffs.wronskian(g.x) - 2)))
    ok = (rep.pde_residual_max < 1e-5 and dir_max < 1e-9 and n1["ok"] and n2["ok"]
          and abs(rep.hopf_mean + 0.5) < 1e-5 and L < 1e-9 and wr < 1e-9)
    report(7, ok, f"pde {rep.pde_residual_max:.2e}, |u| on boundary {dir_max:.1e}, neumann rel spread "
                  f"{max(n1['relative'], n2['relative']):.1e}, hopf {rep.hopf_mean:.8f}, L {L:.1e}, wronskian {wr:.1e}",
           t0, 30.0)


def test_criterion_08_band_endpoints():
    t0 = time.perf_counter()
    fb = flat_band(81, 161)
    X = fb.grid.x[:, None] + 0 * fb.grid.y[None, :]
    xs = x_sharp()
    flat_err = float(np.max(np.abs(fb.v - (xs**2 - X**2))))
    lim = band_limits(1e-3)
    ok = abs(fb.x_star - X_SHARP_REF) < 1e-9 and flat_err < 1e-9 and lim.hausdorff < 5e-2
    report(8, ok, f"x# {fb.x_star:.12f} (ref {X_SHARP_REF}), flat v error {flat_err:.1e}, "
                  f"tau=1e-3 Hausdorff to disk chain {lim.hausdorff:.3e} < 5e-2", t0, 60.0)


def test_criterion_09_mkdv_layer(ring):
    t0 = time.perf_counter()
    u = [DiffPoly.var(k) for k in range(5)]
    q1 = mkdv_operator(1) == u[2] - 2 * u[0] ** 3
    q2 = mkdv_operator(2) == u[4] - 10 * u[2] * u[0] ** 2 - 10 * u[0] * u[1] ** 2 + 6 * u[0] ** 5
    fld, _ = ring
    om = fld.omega
    g = fld.grid
    Z = g.x[:, None] + 1j * g.y[None, :]
    lhs = 4 * np.imag(evaluate_q(1, jet_of_eta(fld.dev, Z, 2)))
    oy, ox = d1(om, g.hy, 1), d1(om, g.hx, 0)
    rhs = 2 * d1(d2(om, g.hy, 1), g.hy, 1) + 3 * ox**2 * oy - oy**3
    k = 4
    err = float(np.max(np.abs((lhs - rhs)[k:-k, k:-k])))
    report(9, q1 and q2 and err < 1e-5, f"Q1 exact {q1}, Q2 exact {q2}, 4 Im Q1 vs FD display {err:.2e} < 1e-5",
           t0, 10.0)


def test_criterion_10_spectral_genus():
    t0 = time.perf_counter()
    ra = genus_classify(radial_limit(3, -2.0, -0.5, 81, 161))
    fb = genus_classify(flat_band(81, 161))
    rings = [genus_classify(ring_domain(n, 0.5, nx=81, ny=161)[0], m_max=2) for n in (2, 3)]
    band = genus_classify(band_solution(0.5, nx=81, ny=161), m_max=2)
    zero_ok = all(r.genus == 0 and r.fits[0].residual < 1e-12 for r in (ra, fb))
    one = rings + [band]
    one_ok = all(r.genus == 1 and r.fits[1].residual < 1e-6 and r.fits[0].residual > 1e-2 for r in one)
    msg = (f"genus radial {ra.genus} ({ra.fits[0].residual:.1e}), flat {fb.genus} ({fb.fits[0].residual:.1e}); "
           f"ring n=2,3 and band: {[r.genus for r in one]}, m=1 residuals "
           f"{[f'{r.fits[1].residual:.1e}' for r in one]}, m=0 {[f'{r.fits[0].residual:.2f}' for r in one]}")
    report(10, zero_ok and one_ok, msg, t0, 30.0)


def test_criterion_11_jacobi_fields(ring):
    t0 = time.perf_counter()
    fld, _ = ring
    res = [jacobi_field_check(fld, n).robin_residual for n in (0, 1, 2)]
    report(11, max(res) < 1e-4, f"Robin residuals h0, h1, h2: {[f'{r:.2e}' for r in res]} < 1e-4", t0, 30.0)


def test_criterion_12_conservation_and_lattice(ring):
    t0 = time.perf_counter()
    fld, _ = ring
    cp = fld.coeffs
    xs = np.linspace(cp.x_b_minus * 0.99, cp.x_a_plus * 0.99, 500)
    k1, k2 = cp.kappa_drift(xs)
    ident = fld.strip.identity_residual()
    W = fld.dev.weier
    p = fld.params
    # iota vartheta from the period quadrature, omega_1 from the first zero of alpha
    lat2 = abs(1j * M.vartheta(p.eta, p.tau) - W.omega2)
    lat1 = abs(cp.x_a_plus - W.omega1)
    ok = max(k1, k2) < 1e-9 and ident < 1e-7 and lat2 < 1e-8 and lat1 < 1e-8
    report(12, ok, f"kappa drift {k1:.1e}/{k2:.1e}, omega_y^2 identity {ident:.1e}, "
                   f"i vartheta - omega2 {lat2:.1e}, x_a+ - omega1 {lat1:.1e}", t0, 30.0)
