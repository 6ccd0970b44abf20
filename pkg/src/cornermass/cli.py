"""Command-line front end: scenario selection, pipeline orchestration,
structured report emission and the golden-value regression harness.

Usage:
    corner-mass <constraints|massbound|quasilocal|certificate|regress>
                [--config PATH] [--out PATH] [--csv PATH]
                [--deterministic] [--filter NAME] [--golden PATH]

Config files are flat ``key = value`` text with ``[section]`` headers;
keys are namespaced as ``section.key``.  Reports are versioned JSON
(schema shipped in cornermass/schema/); curves export as CSV with a
header row, comma separator and decimal point.  The environment variable
CORNER_MASS_THREADS caps sweep parallelism.

Exit codes: 0 success / verdict pass, 1 verdict fail, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv as _csv
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, CornerMassError, HypothesisError,
                     IntegrationDivergedError, PicardStagnationError,
                     UnconvergedError)
from . import corner, extension, geometry, masses
from .harmonic import SolveOptions, mass_bound_sweep, solve_spacetime_harmonic

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _parse_value(text):
    low = text.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    parts = low.split()
    if len(parts) > 1:
        return [_parse_value(p) for p in parts]
    try:
        return int(low)
    except ValueError:
        pass
    try:
        return float(low)
    except ValueError:
        pass
    return low


def parse_config(path) -> dict:
    """Flat key-value text with [section] headers -> {'section.key': value}."""
    cfg = {}
    section = ""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value'", line=ln,
                              field=line)
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", line=ln)
        full = f"{section}.{key}" if section else key
        cfg[full] = _parse_value(val)
    return cfg


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}", field=key)
    return default


def _as_list(v):
    if v is None:
        return None
    return v if isinstance(v, list) else [v]


def _scenario_from_config(cfg):
    name = _get(cfg, "run.scenario", required=True)
    params = {}
    for key, val in cfg.items():
        if key.startswith("scenario."):
            params[key.split(".", 1)[1]] = val
    data = corner.scenario_build(name, **params)
    topo = _get(cfg, "run.topology_trivial")
    if topo is not None and bool(topo) != data.topology_trivial:
        data = dataclasses.replace(data, topology_trivial=bool(topo))
    return data


# ---------------------------------------------------------------------------
# Report envelope
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.size > 64:
            return {"n": int(obj.size), "min": float(np.min(obj)),
                    "max": float(np.max(obj))}
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def make_envelope(command, cfg, reports, verdicts, t0, deterministic):
    env = {
        "schema_version": SCHEMA_VERSION,
        "tool": "corner-mass",
        "version": __version__,
        "command": command,
        "config": _jsonable(cfg),
        "reports": _jsonable(reports),
        "verdicts": _jsonable(verdicts),
    }
    if not deterministic:
        env["timing_seconds"] = round(time.time() - t0, 3)
    return env


def emit(envelope, out_path):
    text = json.dumps(envelope, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = _csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_constraints(cfg, args):
    data = _scenario_from_config(cfg)
    samples = int(_get(cfg, "run.samples", 96))
    tol = float(_get(cfg, "run.dec_tolerance", 1e-8))
    per_patch = []
    ok = True
    for patch in data.patches:
        rep = geometry.dec_check(patch, samples=samples, tolerance=tol,
                                 exclude=data.corner_radii)
        lo = patch.r_in if patch.r_in > 0 else 1e-3 * patch.r_out
        rs = np.linspace(lo, patch.r_out, 9)
        rows = []
        for r in rs:
            c = geometry.constraints(patch, float(r))
            rows.append({"radius": c.radius, "R": c.R, "mu": c.mu,
                         "J_radial": c.J_radial,
                         "dec_margin": c.dec_margin})
        per_patch.append({"label": patch.label, "dec": rep,
                          "samples": rows})
        ok = ok and rep.verdict
    jumps = [i.jump for i in data.interfaces]
    reports = {"patches": per_patch, "corner_jumps": jumps,
               "scenario": data.name,
               "expectations": data.expectations}
    return reports, {"dec_ok": ok}, (0 if ok else 1)


def cmd_massbound(cfg, args):
    data = _scenario_from_config(cfg)
    radii = _as_list(_get(cfg, "run.adm_radii", [50.0, 100.0, 200.0]))
    adm = masses.adm_energy_momentum(data, [float(r) for r in radii])
    resolutions = _as_list(_get(cfg, "run.resolutions", [32, 64]))
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ConfigError("resolutions must be strictly increasing",
                          field="run.resolutions")
    delta = float(_get(cfg, "run.delta", 1e-2))
    if delta <= 0 or float(_get(cfg, "run.picard_tol", 1e-9)) <= 0:
        raise ConfigError("tolerances must be positive", field="run.delta")
    opts = SolveOptions(
        delta=delta,
        direction=int(_get(cfg, "run.direction", 1)),
        picard_tol=float(_get(cfg, "run.picard_tol", 1e-9)),
        sor_tol=float(_get(cfg, "run.sor_tol", 5e-10)))
    threads = int(os.environ.get("CORNER_MASS_THREADS", "1"))
    rep = mass_bound_sweep(
        data, adm, resolutions=[int(n) for n in resolutions],
        n_theta=_get(cfg, "run.n_theta"),
        L=float(_get(cfg, "run.truncation", 30.0)),
        r_inner=_get(cfg, "run.r_inner"),
        options=opts, threads=threads)
    verdicts = {
        "slack_nonnegative": rep.verdict,
        "corner_hypothesis_violated": rep.corner_hypothesis_violated,
    }
    reports = {"adm": adm, "massbound": rep, "slack": rep.slack,
               "tolerance": rep.tolerance, "scenario": data.name}
    if args.csv:
        fld = solve_spacetime_harmonic(
            data, n_r=int(resolutions[-1]),
            n_theta=int(_get(cfg, "run.n_theta") or resolutions[-1]),
            L=float(_get(cfg, "run.truncation", 30.0)),
            r_inner=_get(cfg, "run.r_inner"), options=opts)
        fld.to_csv(args.csv)
    return reports, verdicts, (0 if rep.verdict else 1)


def cmd_quasilocal(cfg, args):
    data = _scenario_from_config(cfg)
    r0 = float(_get(cfg, "quasilocal.r0", required=True))
    side = _get(cfg, "quasilocal.side", "auto")
    omega_tan = float(_get(cfg, "quasilocal.omega_tan", 0.0))
    ql = masses.quasilocal(data, r0, side=side, omega_tan=omega_tan)
    reports = {"quasilocal": ql, "scenario": data.name}
    verdicts = {"W_nonnegative": ql.W >= -1e-12}
    pipe = None
    if ql.hypothesis_H_gt_omega:
        pipe = extension.quasilocal_pipeline(
            r0, ql.H, omega_nn=-ql.tr_sigma_k, omega_tan=omega_tan)
        reports["pipeline"] = {
            "W": pipe.W, "E_ext": pipe.E_ext,
            "corner_jump": pipe.corner_jump,
            "lapse0": pipe.extension.lapse0,
            "q_limit": pipe.extension.q_limit,
            "E_ext_far": pipe.extension.E_ext_far,
        }
        verdicts["chain_W_ge_E_ext"] = pipe.chain_ok
        verdicts["corner_jump_zero"] = abs(pipe.corner_jump) <= 1e-10
    hull = _get(cfg, "quasilocal.hull_radii")
    if hull is not None:
        comp = masses.comparison_check(ql, data, [float(r) for r in
                                                  _as_list(hull)])
        reports["comparison"] = comp
        verdicts["comparison_applicable"] = comp.applicable
        verdicts["comparison_ok"] = comp.all_ok
    if args.csv and pipe is not None:
        ext = pipe.extension
        _write_csv(args.csv, ["r", "f", "Q"],
                   zip(ext.radii, ext.f_samples, ext.q_samples))
    ok = all(v for k, v in verdicts.items()
             if k in ("W_nonnegative", "chain_W_ge_E_ext", "comparison_ok"))
    return reports, verdicts, (0 if ok else 1)


def cmd_certificate(cfg, args):
    r0 = float(_get(cfg, "certificate.r0", 1.0))
    H = _get(cfg, "certificate.H")
    tr_alpha = float(_get(cfg, "certificate.tr_alpha", 0.0))
    beta_abs = float(_get(cfg, "certificate.beta", 0.0))
    sweep = _get(cfg, "certificate.h_eff_sweep")
    rows = []
    if sweep is not None:
        lo, hi, n = [float(v) for v in _as_list(sweep)]
        values = np.linspace(lo, hi, int(n))
        for h_eff in values:
            v = extension.fillin_certificate(r0, float(h_eff) + np.hypot(
                tr_alpha, beta_abs), tr_alpha, beta_abs)
            rows.append(v)
    else:
        if H is None:
            raise ConfigError("need certificate.H or certificate.h_eff_sweep",
                              field="certificate.H")
        rows.append(extension.fillin_certificate(r0, float(H), tr_alpha,
                                                 beta_abs))
    n_cert = sum(1 for v in rows if v.certified)
    reports = {"certificates": rows, "n_certified": n_cert,
               "threshold_H_minus_f": 2.0 / r0}
    if args.csv:
        _write_csv(args.csv, ["h_eff", "E_ext", "certified"],
                   [(v.H - v.bartnik_f, v.E_ext, float(v.certified))
                    for v in rows])
    return reports, {"any_certified": n_cert > 0}, 0


def _default_golden_path():
    return Path(__file__).parent / "goldens" / "golden.json"


def compute_golden_values():
    """Fast golden quantities recomputed on every regress run."""
    vals = {}
    sw = corner.scenario_build("schwarzschild", m=1.0)
    adm = masses.adm_energy_momentum(sw, [50.0, 100.0, 200.0])
    vals["schwarzschild.E_flux"] = adm.E
    vals["schwarzschild.E_misner_sharp"] = adm.misner_sharp
    vals["schwarzschild.P_norm"] = adm.P_norm
    vals["schwarzschild.hawking_r5"] = masses.hawking_mass(sw, 5.0)
    vals["schwarzschild.brown_york_r4"] = masses.quasilocal(sw, 4.0).m_BY
    ng = corner.scenario_build("hyperbolic_negschw")
    admn = masses.adm_energy_momentum(ng, [50.0, 100.0, 200.0])
    vals["hyperbolic_negschw.E_flux"] = admn.E
    vals["hyperbolic_negschw.jump"] = ng.interfaces[0].jump
    vals["hyperbolic_negschw.dec_margin"] = min(
        geometry.dec_check(p, exclude=ng.corner_radii).min_margin
        for p in ng.patches)
    iso = corner.scenario_build("isotropic_schwarzschild", m=1.0)
    msph = masses.minimal_sphere(iso)
    vals["isotropic.minimal_sphere_s"] = msph.coordinate
    vals["isotropic.minimal_sphere_area"] = msph.area
    ext = extension.shi_tam_extend(1.0, 3.0)
    vals["shi_tam.E_ext_heff3"] = ext.E_ext
    vals["shi_tam.q_limit_heff3"] = ext.q_limit
    pipe = extension.quasilocal_pipeline(1.0, 2.0, omega_tan=1.0)
    vals["pipeline.W"] = pipe.W
    vals["pipeline.E_ext"] = pipe.E_ext
    vals["pipeline.jump"] = pipe.corner_jump
    cert = extension.fillin_certificate(1.0, 2.0)
    vals["certificate.E_ext_boundary_case"] = cert.E_ext

    from .harmonic import (boundary_formula_check, mass_bound_report,
                           spacetime_hessian)
    from .harmonic.fields import AxisymField
    flat = corner.scenario_build("flat")
    adm0 = masses.adm_energy_momentum(flat, [50.0, 100.0, 200.0])
    fld = solve_spacetime_harmonic(flat, n_r=32, n_theta=32, L=15.0)
    vals["massbound.flat_slack"] = mass_bound_report(flat, fld, adm0).slack
    closures = {
        "u": lambda r, x: r * x,
        "u_r": lambda r, x: np.asarray(x, float),
        "u_x": lambda r, x: np.full_like(np.asarray(x, float), r),
        "u_rr": lambda r, x: np.zeros_like(np.asarray(x, float)),
        "u_rx": lambda r, x: np.ones_like(np.asarray(x, float)),
        "u_xx": lambda r, x: np.zeros_like(np.asarray(x, float)),
    }
    inj = AxisymField(fld.coeffs, fld.values, closures=closures)
    rep5 = boundary_formula_check(flat, inj, 1.0)
    vals["identity.flat_sphere_residual"] = rep5.lhs - rep5.rhs
    fng = solve_spacetime_harmonic(ng, n_r=24, n_theta=24, L=10.0)
    hes = spacetime_hessian(fng)
    gn = fng.grad_norm_plain()
    dev = 0.0
    for comp, kk in (("rr", fng.coeffs.a), ("tt", fng.coeffs.b),
                     ("pp", fng.coeffs.b)):
        dev = max(dev, float(np.max(np.abs(
            hes.full[comp] - hes.pure[comp] - gn * kk[:, None]))))
    vals["hessian.construction_dev"] = dev
    return vals


def cmd_regress(cfg, args):
    golden_path = Path(args.golden) if args.golden else _default_golden_path()
    try:
        golden = json.loads(golden_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read golden file: {exc}")
    vals = compute_golden_values()
    rows = []
    ok = True
    for name, entry in sorted(golden["values"].items()):
        if args.filter and args.filter not in name:
            continue
        if name not in vals:
            rows.append({"name": name, "status": "MISSING"})
            ok = False
            continue
        got = vals[name]
        want = entry["value"]
        tol = entry["tol"]
        passed = abs(got - want) <= tol
        ok = ok and passed
        rows.append({"name": name, "want": want, "got": got, "tol": tol,
                     "diff": got - want,
                     "status": "pass" if passed else "FAIL"})
    width = max((len(r["name"]) for r in rows), default=10)
    for r in rows:
        if "got" in r:
            print(f"{r['name']:<{width}}  {r['status']:>4}  "
                  f"got={r['got']:+.12e}  want={r['want']:+.12e}  "
                  f"tol={r['tol']:.1e}")
        else:
            print(f"{r['name']:<{width}}  {r['status']}")
    print(f"{'-' * width}\n{sum(1 for r in rows if r['status'] == 'pass')}"
          f"/{len(rows)} pass")
    return {"table": rows}, {"all_pass": ok}, (0 if ok else 1)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "constraints": cmd_constraints,
    "massbound": cmd_massbound,
    "quasilocal": cmd_quasilocal,
    "certificate": cmd_certificate,
    "regress": cmd_regress,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="corner-mass",
        description="Numerics for asymptotically flat initial data with "
                    "corners: constraints, the mass inequality, quasilocal "
                    "energies, extensions and fill-in certificates.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="write the JSON report here")
    parser.add_argument("--csv", help="write curve/field CSV here "
                        "(massbound: field (r,theta,u,|grad u|); "
                        "quasilocal: extension (r,f,Q); certificate: sweep)")
    parser.add_argument("--deterministic", action="store_true",
                        help="byte-stable output: no timings")
    parser.add_argument("--filter", help="regress: only names containing this")
    parser.add_argument("--golden", help="regress: alternative golden file")
    args = parser.parse_args(argv)

    t0 = time.time()
    cfg = {}
    try:
        if args.config:
            cfg = parse_config(args.config)
        reports, verdicts, code = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        loc = f" (line {exc.line})" if exc.line else ""
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return 2
    except (UnconvergedError, PicardStagnationError,
            IntegrationDivergedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return 3
    except CornerMassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    envelope = make_envelope(args.command, cfg, reports, verdicts, t0,
                             args.deterministic)
    emit(envelope, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
