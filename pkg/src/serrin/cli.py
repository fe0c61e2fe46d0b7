"""Command line: ring, band, sweep, verify, plot.

Tolerances are layered: built-in defaults, then a JSON config file, then
SERRIN_TOL_<KEY> environment variables, then --tol flags.  Other config keys
(n, tau, s, grid, format, out) sit under the matching flags.

Exit codes: 0 ok, 1 verification failure, 2 input or format error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import DomainError, FormatError, SerrinError
from .verify import DEFAULT_TOLERANCES, verify_samples

log = logging.getLogger("serrin")

ENV_PREFIX = "SERRIN_TOL_"
CONFIG_ENV = "SERRIN_CONFIG"
MIN_GRID = (33, 65)
ALL_FORMATS = ("json", "csv", "svg")
COMMANDS = ("ring", "band", "sweep", "verify", "plot")
EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    grid: tuple = (201, 401)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: Path = Path("out")
    formats: tuple = ALL_FORMATS
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise DomainError(f"tolerance {k} must be positive, got {v!r}")
        nx, ny = self.grid
        if nx < MIN_GRID[0] or ny < MIN_GRID[1]:
            raise DomainError(f"grid must be at least {MIN_GRID[0]}x{MIN_GRID[1]}")
        bad = set(self.formats) - set(ALL_FORMATS)
        if bad:
            raise DomainError(f"unknown formats {sorted(bad)}")


# ---------------------------------------------------------------------------
# parsing and merging


def parse_grid(text: str) -> tuple:
    try:
        nx, ny = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise DomainError(f"grid must look like NXxNY, got {text!r}")
    return nx, ny


def parse_tol(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise DomainError(f"--tol expects KEY=VAL, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = _tol_value(k, v)
    return out


def _tol_value(k, v) -> float:
    try:
        return float(v)
    except ValueError:
        raise DomainError(f"tolerance {k} is not a number: {v!r}")


def env_tolerances(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key, val in environ.items():
        if key.startswith(ENV_PREFIX):
            k = key[len(ENV_PREFIX):].lower()
            out[k] = _tol_value(k, val)
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"config {path} is not valid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise FormatError("config file must hold a JSON object")
    return data


def parse_tau_grid(text: str) -> list:
    if ":" in text:
        lo, hi, cnt = text.split(":")
        return [float(t) for t in np.linspace(float(lo), float(hi), int(cnt))]
    return [float(t) for t in text.split(",") if t.strip()]


SMALL_TAU_BAND = 0.1


def default_grid(command: str, tau) -> str:
    """Bands near the disk-chain limit need a finer strip grid to hold absolute tolerances."""
    if command == "band" and tau is not None and tau < SMALL_TAU_BAND:
        return "401x1601"
    return "201x401"


def build_config(args, environ=None) -> RunConfig:
    cfg = load_config(getattr(args, "config", None) or (environ or os.environ).get(CONFIG_ENV))
    pick = lambda name, default=None: getattr(args, name, None) if getattr(args, name, None) is not None \
        else cfg.get(name, default)
    tol = dict(DEFAULT_TOLERANCES)
    ctol = cfg.get("tol", {})
    if not isinstance(ctol, dict):
        raise FormatError("config key 'tol' must be an object")
    tol.update({k: _tol_value(k, v) for k, v in ctol.items()})
    tol.update(env_tolerances(environ))
    tol.update(parse_tol(getattr(args, "tol", None)))
    grid = pick("grid", default_grid(args.command, pick("tau")))
    fmt = pick("format", ",".join(ALL_FORMATS))
    params = {k: pick(k) for k in ("n", "tau", "s", "tau_grid", "path") if pick(k) is not None}
    options = {k: bool(pick(k, False)) for k in ("auto_mid", "allow_immersed", "rescaled", "loci")}
    return RunConfig(args.command, params, parse_grid(grid) if isinstance(grid, str) else tuple(grid), tol,
                     Path(pick("out", "out")), tuple(t.strip() for t in fmt.split(",") if t.strip()), options)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="serrin", description="Serrin ring domains and periodic bands")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True, grid=True):
        p.add_argument("--tol", action="append", metavar="KEY=VAL", help="tolerance override (repeatable)")
        p.add_argument("--config", help="JSON config file, merged under flags")
        if out:
            p.add_argument("--out", help="output directory (default out)")
            p.add_argument("--format", help="comma list from json,csv,svg")
        if grid:
            p.add_argument("--grid", help="strip grid NXxNY (default 201x401; 401x1601 for bands with tau < 0.1)")
        p.add_argument("-v", "--verbose", action="store_true")

    r = sub.add_parser("ring", help="build and verify a ring domain")
    r.add_argument("--n", type=int)
    r.add_argument("--tau", type=float)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--s", type=float, help="exterior boundary abscissa")
    g.add_argument("--auto-mid", action="store_true", default=None, help="midpoint of the embedded window")
    r.add_argument("--allow-immersed", action="store_true", default=None)
    common(r)

    b = sub.add_parser("band", help="build and verify a periodic band")
    b.add_argument("--tau", type=float)
    b.add_argument("--rescaled", action="store_true", default=None, help="scale by sqrt(tau) and draw the disk chain")
    common(b)

    s = sub.add_parser("sweep", help="moduli table over a tau grid")
    s.add_argument("--n", type=int)
    s.add_argument("--tau-grid", help="comma list or LO:HI:COUNT (default 0.05:0.95:10)")
    s.add_argument("--loci", action="store_true", default=None, help="also trace the bifurcation loci")
    common(s, grid=False)

    v = sub.add_parser("verify", help="recompute residuals from a stored file")
    v.add_argument("path")
    common(v, out=False, grid=False)
    v.add_argument("--out", help="write the recomputed report here")

    p = sub.add_parser("plot", help="redraw the SVG of a stored file")
    p.add_argument("path")
    p.add_argument("--out", help="output directory (default next to the file)")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# commands


def _report_lines(checks: dict) -> list:
    return [f"  {k:<12} {'ok' if v else 'FAIL'}" for k, v in checks.items()]


def _need(cfg: RunConfig, key: str):
    if key not in cfg.params:
        raise DomainError(f"--{key.replace('_', '-')} is required")
    return cfg.params[key]


def _stem(kind: str, cfg: RunConfig) -> str:
    parts = [kind] + [f"{k}{cfg.params[k]:g}" if isinstance(cfg.params[k], float) else f"{k}{cfg.params[k]}"
                      for k in ("n", "tau", "s") if k in cfg.params]
    return "_".join(parts)


def ring_payload(fld, bounds, cfg: RunConfig, curve_m: int = 4096) -> tuple:
    from .mkdv import genus_classify
    from .persist import DOMAIN_FORMAT, curve_entry
    from .ring_domain import dihedral_check

    p = fld.params
    gr = fld.grid
    g = fld.dev.samples
    ext, inn = fld.boundary_curves(curve_m)
    rep, ok = verify_samples(gr.x, gr.y, fld.v, fld.omega, g, fld.q_hopf, cfg.tolerances, [ext, inn])
    order, dres = dihedral_check(fld.dev, [fld.s, fld.s_star], tol=1.0)
    unit = float(np.max(np.abs(np.abs(fld.dev.g(1j * np.linspace(0, fld.dev.period, 1025))) - 1)))
    with_warn = genus_classify(fld, m_max=2)
    md = {
        "n": p.n, "eta": p.eta, "tau": p.tau, "s": fld.s, "s_star": fld.s_star, "vartheta": fld.dev.vartheta,
        "q_hopf": fld.q_hopf, "mode": fld.dev.mode, "grid": [len(gr.x), len(gr.y)],
        "window": list(bounds) if bounds is not None else None,
        "dihedral_order": order, "dihedral_residual": dres, "unit_circle_residual": unit,
        "ode_crosscheck": fld.dev._aux.get("ode_crosscheck"),
    }
    md.update(fld.boundary)
    payload = {
        "format": DOMAIN_FORMAT, "generator": f"serrin {__version__}", "metadata": md,
        "tolerances": cfg.tolerances,
        "arrays": {"x": gr.x, "y": gr.y, "re_g": g.real, "im_g": g.imag, "v": fld.v, "omega": fld.omega},
        "curves": [curve_entry("exterior", ext, True), curve_entry("interior", inn, True)],
        "verify": {**rep.to_dict(), "passed": ok},
        "mkdv": {"genus": with_warn.genus, "fits": [f.to_dict() for f in with_warn.fits]},
    }
    return payload, rep, ok


def band_payload(sol, cfg: RunConfig, curve_m: int = 2048) -> tuple:
    from .band_domain import band_embedded_check
    from .mkdv import genus_classify
    from .persist import BAND_FORMAT, curve_entry

    gr = sol.grid
    th = sol.vartheta
    y = -th + 2 * th * 3 * np.arange(3 * curve_m + 1) / (3 * curve_m)
    lo, up = sol.dev.g(-sol.x_star + 1j * y), sol.dev.g(sol.x_star + 1j * y)
    rep, ok = verify_samples(gr.x, gr.y, sol.v, sol.omega, sol.g, sol.q_hopf, cfg.tolerances,
                             [(lo, False), (up, False)])
    emb = band_embedded_check(sol)
    gen = genus_classify(sol, m_max=2)
    xs = sol.x_star
    md = {
        "tau": sol.tau, "x_star": xs, "vartheta": th, "q_hopf": sol.q_hopf, "mode": sol.dev.mode,
        "grid": [len(gr.x), len(gr.y)], "a1": 0.0, "a2": 0.0, "b1": sol.b_boundary, "b2": sol.b_boundary,
        "period_shift": [sol.period_shift.real, sol.period_shift.imag],
        "wronskian_residual": float(np.max(np.abs(sol.coeffs.wronskian(gr.x) - 2))),
        "L_residual": float(np.max(np.abs(sol.L - sol.g.imag))),
        "critical_points": emb["critical_points"], "graph": emb["graph"], "separated": emb["separated"],
    }
    payload = {
        "format": BAND_FORMAT, "generator": f"serrin {__version__}", "metadata": md,
        "tolerances": cfg.tolerances,
        "arrays": {"x": gr.x, "y": gr.y, "re_g": sol.g.real, "im_g": sol.g.imag, "v": sol.v, "omega": sol.omega},
        "curves": [curve_entry("lower", lo, False), curve_entry("upper", up, False)],
        "verify": {**rep.to_dict(), "passed": ok},
        "mkdv": {"genus": gen.genus, "fits": [f.to_dict() for f in gen.fits]},
    }
    return payload, rep, ok


def _curve_csv(path, payload):
    from .persist import write_csv

    rows = []
    for c in payload["curves"]:
        for k, (a, b) in enumerate(zip(c["re"], c["im"])):
            rows.append((c["name"], k, a, b))
    return write_csv(path, ["curve [name]", "index [1]", "x1 [length]", "x2 [length]"], rows)


def cmd_ring(cfg: RunConfig) -> int:
    from .figures import ring_figure
    from .persist import write_json
    from .ring_domain import ring_domain

    n, tau = int(_need(cfg, "n")), float(_need(cfg, "tau"))
    s = cfg.params.get("s")
    if s is not None and cfg.options.get("auto_mid"):
        raise DomainError("--s and --auto-mid are exclusive")
    nx, ny = cfg.grid
    fld, bounds = ring_domain(n, tau, s, nx, ny, allow_immersed=cfg.options.get("allow_immersed", False))
    payload, rep, ok = ring_payload(fld, bounds, cfg)
    stem = _stem("ring", cfg)
    out = cfg.output_dir
    written = []
    if "json" in cfg.formats:
        written.append(write_json(out / f"{stem}.json", payload))
    if "csv" in cfg.formats:
        written.append(_curve_csv(out / f"{stem}_boundary.csv", payload))
    if "svg" in cfg.formats:
        written.append(ring_figure(fld.dev, fld.s, fld.s_star, out / f"{stem}.svg",
                                   title=f"n={n}, tau={tau:g}, s={fld.s:.6g}"))
    print(f"ring n={n} tau={tau:g} s={fld.s:.12g} s*={fld.s_star:.12g} window={bounds}")
    print("\n".join(_report_lines(rep.details["checks"])))
    for w in written:
        print("wrote", w)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_band(cfg: RunConfig) -> int:
    from .band_domain import band_solution
    from .figures import band_figure
    from .persist import write_json

    tau = float(_need(cfg, "tau"))
    nx, ny = cfg.grid
    sol = band_solution(tau, nx=nx, ny=ny)
    payload, rep, ok = band_payload(sol, cfg)
    stem = _stem("band", cfg) + ("_rescaled" if cfg.options.get("rescaled") else "")
    out = cfg.output_dir
    written = []
    if "json" in cfg.formats:
        written.append(write_json(out / f"{stem}.json", payload))
    if "csv" in cfg.formats:
        written.append(_curve_csv(out / f"{stem}_boundary.csv", payload))
    if "svg" in cfg.formats:
        resc = bool(cfg.options.get("rescaled"))
        scale = math.sqrt(tau) if resc else 1.0
        written.append(band_figure(sol.dev, sol.x_star, sol.vartheta, out / f"{stem}.svg", periods=3, scale=scale,
                                   disks=resc and tau < 1, title=f"tau={tau:g}" + (" rescaled" if resc else "")))
    print(f"band tau={tau:g} x*={sol.x_star:.12g} b={sol.b_boundary:.12g} "
          f"critical points per period={payload['metadata']['critical_points']}")
    print("\n".join(_report_lines(rep.details["checks"])))
    for w in written:
        print("wrote", w)
    return EXIT_OK if ok else EXIT_VERIFY


SWEEP_HEADER = ["tau [1]", "eta_n [1]", "vartheta [strip y]", "Theta [rad]", "h0 [strip x]", "h1 [strip x]",
                "s_mid [strip x]", "a1 [length^2]", "a2 [length^2]", "b1 [length]", "b2 [length]",
                "psi1 [length]", "psi2 [length^2]", "upsilon1_mark [0/1]", "upsilon2_mark [0/1]", "status [text]"]


def sweep_rows(n: int, taus) -> list:
    """One row per tau; failures are logged, the row is marked and the sweep continues."""
    from .moduli import boundary_constants, embed_bounds, moduli_point, psi_functions
    from .ode_core import ring_params, solve_coeffs
    from .ring_domain import developing_map

    rows = []
    prev = None
    for tau in taus:
        try:
            mp = moduli_point(n, tau)
            cp = solve_coeffs(ring_params(n, tau))
            dev = developing_map(cp.params, cp)
            h0, h1 = embed_bounds(dev, cp)
            sm = 0.5 * (h0 + h1)
            bc = boundary_constants(cp, sm)
            psi = psi_functions(cp, sm)
            marks = [0, 0]
            if prev is not None:
                marks = [int(np.sign(psi[j]) != np.sign(prev[j])) for j in (0, 1)]
            prev = psi
            rows.append([tau, mp.eta, mp.vartheta, mp.theta_arc, h0, h1, sm, bc["a1"], bc["a2"],
                         bc["b1"], bc["b2"], psi[0], psi[1], marks[0], marks[1], "ok"])
        except SerrinError as e:
            log.warning("sweep: tau=%g failed: %s", tau, e)
            rows.append([tau] + [math.nan] * 12 + [0, 0, f"error: {type(e).__name__}"])
    return rows


def cmd_sweep(cfg: RunConfig) -> int:
    from .figures import sweep_figure
    from .moduli import bifurcation_loci
    from .persist import write_csv

    n = int(_need(cfg, "n"))
    if n < 2:
        raise DomainError("n must be at least 2")
    taus = parse_tau_grid(cfg.params.get("tau_grid", "0.05:0.95:10"))
    if not taus or any(not 0 < t < 1 for t in taus):
        raise DomainError("tau grid values must lie in (0, 1)")
    rows = sweep_rows(n, taus)
    out = cfg.output_dir
    stem = f"sweep_n{n}"
    written = []
    if "csv" in cfg.formats or "json" in cfg.formats:
        written.append(write_csv(out / f"{stem}.csv", SWEEP_HEADER, rows))
    loci = ()
    if cfg.options.get("loci"):
        loci = bifurcation_loci(n)
        lrows = [(c.name, s, t) for c in loci for s, t in c.points]
        written.append(write_csv(out / f"{stem}_loci.csv", ["curve [name]", "s [strip x]", "tau [1]"], lrows))
        for c in loci:
            if c.diagnostic:
                log.warning("%s: %s", c.name, c.diagnostic)
    if "svg" in cfg.formats:
        ok_rows = [r for r in rows if r[-1] == "ok"]
        written.append(sweep_figure([r[0] for r in ok_rows], [r[4] for r in ok_rows], [r[5] for r in ok_rows],
                                    out / f"{stem}.svg", loci, title=f"embedded window, n={n}"))
    failed = sum(r[-1] != "ok" for r in rows)
    print(f"sweep n={n}: {len(rows)} rows, {failed} failed")
    for w in written:
        print("wrote", w)
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def cmd_verify(cfg: RunConfig) -> int:
    from .persist import arrays_of, curves_of, read_payload, write_json

    path = _need(cfg, "path")
    data = read_payload(path)
    tol = dict(data["tolerances"])
    # explicit overrides from flags/env/config win over the stored values
    tol.update({k: v for k, v in cfg.tolerances.items() if cfg.options.get("tol_explicit", {}).get(k)})
    a = arrays_of(data)
    q = data["metadata"].get("q_hopf")
    rep, ok = verify_samples(a["x"], a["y"], a["v"], a["omega"], a["g"], q, tol, curves_of(data))
    print(f"verify {path}: {'PASS' if ok else 'FAIL'}")
    print("\n".join(_report_lines(rep.details["checks"])))
    print(f"  pde residual {rep.pde_residual_max:.3e}, hopf {rep.hopf_mean:.9g} +- {rep.hopf_stdev:.2e}")
    if cfg.params.get("out"):
        write_json(Path(cfg.params["out"]), {**rep.to_dict(), "passed": ok})
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_plot(cfg: RunConfig) -> int:
    from .figures import payload_figure
    from .persist import read_payload

    path = Path(_need(cfg, "path"))
    data = read_payload(path)
    out = cfg.params.get("out_dir") or path.parent
    target = Path(out) / (path.stem + ".svg")
    payload_figure(data, target)
    print("wrote", target)
    return EXIT_OK


HANDLERS = {"ring": cmd_ring, "band": cmd_band, "sweep": cmd_sweep, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            cfg = RunConfig("plot", {"path": args.path, **({"out_dir": args.out} if args.out else {})})
        else:
            cfg = build_config(args)
            if args.command == "verify":
                explicit = {**env_tolerances(), **parse_tol(args.tol)}
                explicit.update(load_config(args.config or os.environ.get(CONFIG_ENV)).get("tol", {}))
                cfg.options["tol_explicit"] = {k: True for k in explicit}
                if args.out:
                    cfg.params["out"] = args.out
        return HANDLERS[cfg.command](cfg)
    except SerrinError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
