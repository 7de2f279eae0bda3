"""Command-line front end: reproduction recipes, CSV/JSON emission, manifests.

Subcommands: soliton dump, modes scan|one, fgr scan|one, profile check,
simulate, statements, report.  Exit codes: 0 pass, 1 check failure,
2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, SchemaError
from .grid import Field, Grid, field_to_csv
from .soliton import derived_scalars, invariants, profile, q_of_omega

EXIT_PASS, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

MODES_CSV_SCHEMA = "modes-scan/1"
FGR_CSV_SCHEMA = "fgr-scan/1"
MONITORS_CSV_SCHEMA = "monitors/1"


# ---------------------------------------------------------------------------
# manifests and flat key=value configs


def make_manifest(command: str, config: dict) -> dict:
    blob = json.dumps({"command": command, "config": config}, sort_keys=True,
                      default=str)
    mid = hashlib.sha256(blob.encode()).hexdigest()[:16]
    return {"id": mid, "command": command, "config": config,
            "version": __version__,
            "provenance": {"float": "IEEE-754 double, numpy/scipy"},
            "timestamps": {"start": time.strftime("%Y-%m-%dT%H:%M:%S")}}


def write_manifest(manifest: dict, outdir: Path) -> None:
    manifest["timestamps"]["end"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def parse_config_value(s: str):
    s = s.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float, complex):
        try:
            return cast(s)
        except ValueError:
            continue
    return s


def load_flat_config(path: str) -> dict:
    cfg = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{ln}: expected key = value")
            key, val = line.split("=", 1)
            cfg[key.strip()] = parse_config_value(val)
    return cfg


def dump_flat_config(cfg: dict) -> str:
    lines = []
    for k, v in cfg.items():
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, schema: str, manifest_id: str,
               header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        fh.write(f"# manifest={manifest_id}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _read_schema_csv(path: str, schema: str) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith(f"# schema={schema}"):
            raise SchemaError(f"{path}: expected schema header {schema}")
        pos = fh.tell()
        second = fh.readline()
        if not second.startswith("# manifest="):
            fh.seek(pos)
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    return header, rows


# ---------------------------------------------------------------------------
# subcommands


def cmd_soliton_dump(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("soliton dump", vars(args))
    grid = Grid(args.L, args.N)
    sol = profile(args.p, args.omega, grid)
    field_to_csv(Field(grid, sol.profile.values.astype(complex)),
                 str(outdir / "profile.csv"))
    E, Q, P = invariants(sol.profile, args.p)
    q1 = q_of_omega(args.p, 1.0, grid)
    expected = args.omega ** (2.0 / (args.p - 1.0) - 0.5) * q1
    payload = {"manifest": manifest["id"], "E": E, "Q": Q, "P": P,
               "q_ratio_check": Q / expected,
               "scalars": derived_scalars(args.p, args.omega, grid)}
    with open(outdir / "invariants.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    write_manifest(manifest, outdir)
    ok = abs(payload["q_ratio_check"] - 1.0) < 1e-6
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_modes_scan(args) -> int:
    from .linearization import scan_modes
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("modes scan", vars(args))
    ps = np.linspace(args.p_min, args.p_max, args.steps)
    reports = scan_modes(ps, omega=args.omega, N=args.N,
                         with_evans=args.evans)
    rows = []
    for r in reports:
        lam = r.gap_eigenvalues[0] if r.gap_eigenvalues else ""
        rows.append([r.p, lam, r.second_mode or "",
                     r.resonance_indicator if r.resonance_indicator is not None else "",
                     r.decay_rate or "", r.tilde_p0_value
                     if r.tilde_p0_value is not None else ""])
    _write_csv(outdir / "modes.csv", MODES_CSV_SCHEMA, manifest["id"],
               ["p", "lambda", "mu_or_blank", "evans_edge", "decay_rate",
                "tilde_p0_value"], rows)
    write_manifest(manifest, outdir)
    n_fail = sum(1 for r in reports if r.error and "guard band" not in r.error)
    return EXIT_PASS if n_fail == 0 else EXIT_CHECK


def cmd_modes_one(args) -> int:
    from .grid import field_to_json
    from .linearization import solve_mode
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("modes one", vars(args))
    mode = solve_mode(args.p, args.omega, N_base=args.N)
    payload = {
        "manifest": manifest["id"],
        "p": mode.p, "omega": mode.omega, "lambda": mode.lam,
        "decay_rate": mode.decay_rate, "residual": mode.residual,
        "sign_ok": mode.sign_ok, "gap_eigenvalues": mode.all_gap_lambdas,
        "xi1": field_to_json(mode.xi1), "xi2_im": field_to_json(mode.xi2_im),
    }
    with open(outdir / "mode.json", "w") as fh:
        json.dump(payload, fh)
    write_manifest(manifest, outdir)
    return EXIT_PASS


def cmd_fgr_scan(args) -> int:
    from .fgr import gamma_scan
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("fgr scan", vars(args))
    ps = np.linspace(args.p_min, args.p_max, args.steps)
    rows_d = gamma_scan(ps)
    rows = [[r["p"], r["lambda"], r["k"], r["gamma"], r["margin"], r["cond"]]
            for r in rows_d]
    _write_csv(outdir / "fgr.csv", FGR_CSV_SCHEMA, manifest["id"],
               ["p", "lambda", "k", "gamma", "margin", "cond"], rows)
    write_manifest(manifest, outdir)
    n_fail = sum(1 for r in rows_d if r["error"])
    return EXIT_PASS if n_fail == 0 else EXIT_CHECK


def cmd_fgr_one(args) -> int:
    from .fgr import integrability_margin, solve_gamma
    from .grid import field_to_json
    from .linearization import solve_mode
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("fgr one", vars(args))
    mode = solve_mode(args.p, N_base=args.N)
    res = solve_gamma(mode)
    payload = {
        "manifest": manifest["id"], "p": args.p, "lambda": mode.lam,
        "k": res.k, "gamma": res.gamma,
        "margin": integrability_margin(mode.p, mode.lam),
        "cond": res.cond, "residual": res.residual,
        "normalization": res.normalization,
        "g1": field_to_json(res.g1), "g2_im": field_to_json(res.g2_im),
    }
    with open(outdir / "fgr_one.json", "w") as fh:
        json.dump(payload, fh)
    write_manifest(manifest, outdir)
    return EXIT_PASS


def cmd_profile_check(args) -> int:
    from .linearization import solve_mode
    from .refined_profile import (hat_R_bound_constant, solve_theta_tilde,
                                  weighted_residual_norm)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("profile check", vars(args))
    mode = solve_mode(args.p, N_base=args.N)
    z = args.z_abs * complex(math.cos(args.z_arg), math.sin(args.z_arg))
    rp = solve_theta_tilde(z, mode)
    ladder = [args.z_abs, 0.5 * args.z_abs, 0.25 * args.z_abs]
    tt = [np.linalg.norm(solve_theta_tilde(a * z / abs(z), mode).theta_tilde)
          for a in ladder]
    wr = [weighted_residual_norm(solve_theta_tilde(a * z / abs(z), mode), 0.2)
          for a in ladder]
    fit_theta = float(np.polyfit(np.log(ladder), np.log(tt), 1)[0])
    fit_R = float(np.polyfit(np.log(ladder), np.log(wr), 1)[0])
    payload = {
        "manifest": manifest["id"], "p": args.p, "z": [z.real, z.imag],
        "theta_tilde": list(map(float, rp.theta_tilde)),
        "norms": {"cosh_R": weighted_residual_norm(rp, 0.2),
                  "hat_R_bound_C": hat_R_bound_constant(z, mode)},
        "fitted_exponents": {"theta_tilde": fit_theta, "cosh_R": fit_R},
        "orth_residuals": list(map(float, rp.orth_residuals)),
        "cond": rp.cond,
    }
    with open(outdir / "profile_check.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    write_manifest(manifest, outdir)
    ok = (abs(fit_theta - 2.0) < 0.1 and abs(fit_R - 2.0) < 0.1
          and max(map(abs, rp.orth_residuals)) < 1e-8)
    return EXIT_PASS if ok else EXIT_CHECK


def _eta_decay_exponents(records) -> dict:
    """Log-log slopes of the radiation norms over the second half of the
    run; null when the signal is too small to fit."""
    out = {}
    ts = np.array([r.t for r in records])
    for name in ("eta_sigma_A", "eta_sigma_tilde", "eta_weighted_h1"):
        vals = np.array([getattr(r, name) for r in records])
        keep = (ts >= 0.5 * ts.max()) & (vals > 1e-14)
        if keep.sum() < 8:
            out[name] = None
            continue
        out[name] = float(np.polyfit(np.log(ts[keep]),
                                     np.log(vals[keep]), 1)[0])
    return out


def cmd_simulate(args) -> int:
    from .dynamics import SimConfig, fgr_balance_check, run_stability_experiment
    from .errors import InsufficientSignal
    from .fgr import solve_gamma
    from .linearization import solve_mode

    file_cfg = load_flat_config(args.config) if args.config else {}
    for override in args.set or []:
        key, val = override.split("=", 1)
        file_cfg[key.strip()] = parse_config_value(val)
    allowed = set(SimConfig.__dataclass_fields__)
    unknown = set(file_cfg) - allowed
    if unknown:
        print(f"unknown config keys: {sorted(unknown)}", file=sys.stderr)
        return EXIT_USAGE
    cfg = SimConfig(**file_cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("simulate", file_cfg)

    mode = solve_mode(cfg.p)    # decomposition rescales from omega = 1
    res = None
    try:
        res = solve_gamma(mode)
    except NumericalError:
        pass

    def snapshot_sink(t: float, u: Field) -> None:
        field_to_csv(u, str(outdir / f"snapshot_t{t:g}.csv"))

    records, summary = run_stability_experiment(cfg, mode, res,
                                                snapshot_sink=snapshot_sink)
    rows = [[r.t, r.E_drift, r.Q_drift, r.P_drift, r.z_abs, r.z.real,
             r.z.imag, r.omega, r.v, r.eta_sigma_A, r.eta_sigma_tilde,
             r.eta_weighted_h1, r.virial_I, r.J_FGR, r.newton_residual]
            for r in records]
    _write_csv(outdir / "monitors.csv", MONITORS_CSV_SCHEMA, manifest["id"],
               ["t", "E_drift", "Q_drift", "P_drift", "z_abs", "z_re", "z_im",
                "omega", "v", "eta_sigma_A", "eta_sigma_tilde",
                "eta_weighted_h1", "virial_I", "J_FGR", "newton_residual"],
               rows)
    balance = None
    if res is not None and res.gamma:
        try:
            balance = fgr_balance_check(records, res.gamma, cfg.p)
        except InsufficientSignal as exc:
            balance = {"error": str(exc)}
    payload = {
        "manifest": manifest["id"],
        "gamma_fit": summary.get("gamma_fit"),
        "decay_exponents": _eta_decay_exponents(records),
        "conservation_drifts": {k: summary[k] for k in
                                ("Q_drift_max", "E_drift_max", "P_drift_max")},
        "limits": summary["limits"],
        "omega_tv_ratio": summary["omega_tv_ratio"],
        "v_tv_ratio": summary["v_tv_ratio"],
        "fgr_balance": balance,
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
    write_manifest(manifest, outdir)
    return EXIT_PASS


def cmd_statements(args) -> int:
    """Canned reproduction suite with a pass/fail table."""
    from .evans import threshold_evans
    from .fgr import gamma_scan
    from .linearization import bracket_p0, scan_modes, tilde_p0_report

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("statements", vars(args))
    checks = []

    def record(name: str, passed: bool, detail) -> None:
        checks.append({"name": name, "passed": bool(passed),
                       "detail": detail})

    # one internal mode above ~1.82, a second below
    try:
        lo, hi = bracket_p0()
        record("second-mode threshold p0 = 1.82 +- 0.05",
               abs(0.5 * (lo + hi) - 1.82) < 0.05, {"bracket": [lo, hi]})
    except Exception as exc:
        record("second-mode threshold p0 = 1.82 +- 0.05", False, str(exc))

    # monotonicity of lambda(p) below and above p = 3
    ps_lo = np.arange(1.9, 2.95, 0.2)
    reps = scan_modes(ps_lo, N=args.N)
    lams = [r.gap_eigenvalues[0] for r in reps if r.gap_eigenvalues]
    mono = all(a < b for a, b in zip(lams, lams[1:]))
    record("lambda increasing on (1.9, 2.9)", mono and len(lams) == len(ps_lo),
           {"lambda": lams})
    record("lambda > 1/2 on (1.87, 2.9)", all(l > 0.5 for l in lams),
           {"min": min(lams) if lams else None})

    # threshold resonance present at p = 3, absent at p = 2
    try:
        ev3 = min(abs(v) for v in threshold_evans(3.0))
        ev2 = min(abs(v) for v in threshold_evans(2.0))
        record("edge resonance at p=3, none at p=2",
               ev3 < 1e-4 and ev2 > 100.0 * ev3 and ev2 > 1e-2,
               {"evans_p3": ev3, "evans_p2": ev2})
    except Exception as exc:
        record("edge resonance at p=3, none at p=2", False, str(exc))

    # sign certificate for the tilde-p0 condition
    try:
        rep = tilde_p0_report(N=args.N // 2)
        ok = rep["all_negative"] or rep["bracket"] is not None
        record("tilde-p0 condition sign over p", ok,
               {"bracket": rep["bracket"],
                "all_negative": rep["all_negative"]})
    except Exception as exc:
        record("tilde-p0 condition sign over p", False, str(exc))

    # gamma nonvanishing on the default window
    rows = gamma_scan(np.linspace(1.9, 2.0, 3))
    gs = [r["gamma"] for r in rows if not r["error"]]
    record("gamma nonzero on (1.9, 2.0)",
           len(gs) == 3 and all(abs(g) > 1e-6 for g in gs), {"gamma": gs})

    with open(outdir / "statements.json", "w") as fh:
        json.dump({"manifest": manifest["id"], "checks": checks}, fh, indent=2)
    write_manifest(manifest, outdir)
    width = max(len(c["name"]) for c in checks)
    for c in checks:
        print(f"{c['name']:<{width}}  {'PASS' if c['passed'] else 'FAIL'}")
    return EXIT_PASS if all(c["passed"] for c in checks) else EXIT_CHECK


def cmd_report(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("report", vars(args))
    merged = {"manifest": manifest["id"], "inputs": {}}
    try:
        if args.modes_csv:
            header, rows = _read_schema_csv(args.modes_csv, MODES_CSV_SCHEMA)
            pairs = sorted((float(r[0]), r[1]) for r in rows if r[1])
            with open(outdir / "lambda_curve.dat", "w") as fh:
                fh.write("# p lambda\n")
                for p, lam in pairs:
                    fh.write(f"{p} {lam}\n")
            merged["inputs"]["modes"] = {"rows": len(rows),
                                         "with_lambda": len(pairs)}
        if args.fgr_csv:
            header, rows = _read_schema_csv(args.fgr_csv, FGR_CSV_SCHEMA)
            with open(outdir / "gamma_curve.dat", "w") as fh:
                fh.write("# p gamma\n")
                for r in sorted(rows, key=lambda r: float(r[0])):
                    if r[3] and r[3] != "nan":
                        fh.write(f"{r[0]} {r[3]}\n")
            merged["inputs"]["fgr"] = {"rows": len(rows)}
        if args.monitors_csv:
            header, rows = _read_schema_csv(args.monitors_csv,
                                            MONITORS_CSV_SCHEMA)
            with open(outdir / "z_envelope.dat", "w") as fh:
                fh.write("# t z_abs\n")
                for r in rows:
                    fh.write(f"{r[0]} {r[4]}\n")
            merged["inputs"]["monitors"] = {"rows": len(rows)}
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    with open(outdir / "summary.json", "w") as fh:
        json.dump(merged, fh, indent=2)
    write_manifest(manifest, outdir)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):   # usage errors must map to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="nlslab")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sol = sub.add_parser("soliton")
    sol_sub = p_sol.add_subparsers(dest="action", required=True, parser_class=_Parser)
    d = sol_sub.add_parser("dump")
    d.add_argument("--p", type=float, required=True)
    d.add_argument("--omega", type=float, default=1.0)
    d.add_argument("--L", type=float, default=30.0)
    d.add_argument("--N", type=int, default=2048)
    d.add_argument("--out", default="out_soliton")
    d.set_defaults(func=cmd_soliton_dump)

    p_modes = sub.add_parser("modes")
    m_sub = p_modes.add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = m_sub.add_parser("scan")
    s.add_argument("--p-min", dest="p_min", type=float, required=True)
    s.add_argument("--p-max", dest="p_max", type=float, required=True)
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--omega", type=float, default=1.0)
    s.add_argument("--L", type=float, default=None)
    s.add_argument("--N", type=int, default=2048)
    s.add_argument("--evans", action="store_true")
    s.add_argument("--out", default="out_modes")
    s.set_defaults(func=cmd_modes_scan)
    o = m_sub.add_parser("one")
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--omega", type=float, default=1.0)
    o.add_argument("--N", type=int, default=2048)
    o.add_argument("--out", default="out_modes")
    o.set_defaults(func=cmd_modes_one)

    p_fgr = sub.add_parser("fgr")
    f_sub = p_fgr.add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = f_sub.add_parser("scan")
    s.add_argument("--p-min", dest="p_min", type=float, required=True)
    s.add_argument("--p-max", dest="p_max", type=float, required=True)
    s.add_argument("--steps", type=int, default=5)
    s.add_argument("--out", default="out_fgr")
    s.set_defaults(func=cmd_fgr_scan)
    o = f_sub.add_parser("one")
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--N", type=int, default=2048)
    o.add_argument("--out", default="out_fgr")
    o.set_defaults(func=cmd_fgr_one)

    p_prof = sub.add_parser("profile")
    pr_sub = p_prof.add_subparsers(dest="action", required=True, parser_class=_Parser)
    c = pr_sub.add_parser("check")
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--z-abs", dest="z_abs", type=float, default=1e-2)
    c.add_argument("--z-arg", dest="z_arg", type=float, default=0.0)
    c.add_argument("--N", type=int, default=2048)
    c.add_argument("--out", default="out_profile")
    c.set_defaults(func=cmd_profile_check)

    sim = sub.add_parser("simulate")
    sim.add_argument("--config", default=None)
    sim.add_argument("--set", action="append", metavar="KEY=VALUE")
    sim.add_argument("--out", default="out_simulate")
    sim.set_defaults(func=cmd_simulate)

    st = sub.add_parser("statements")
    st.add_argument("--N", type=int, default=2048)
    st.add_argument("--out", default="out_statements")
    st.set_defaults(func=cmd_statements)

    rep = sub.add_parser("report")
    rep.add_argument("--modes-csv", dest="modes_csv", default=None)
    rep.add_argument("--fgr-csv", dest="fgr_csv", default=None)
    rep.add_argument("--monitors-csv", dest="monitors_csv", default=None)
    rep.add_argument("--out", default="out_report")
    rep.set_defaults(func=cmd_report)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (FileNotFoundError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
