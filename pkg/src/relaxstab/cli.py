"""Command-line interface: ``relaxstab {check,simulate,tune,audit-bc}``.

Exit codes: 0 success, 1 configuration error, 2 a stability assumption
failed (or infeasible gains), 3 the simulation blew up.
"""

import argparse
import csv
import itertools
import logging
import os
import sys
from pathlib import Path

from . import io
from .boundary import boundary_term, edge_faces
from .config import ConfigError, load_config
from .exceptions import CertificationError, ControlLawError, RelaxStabError
from .saint_venant import GateGains, analytic_bc, audit_inequalities, build_controls, feasible_gains
from .solver import SchemeConfig, gaussian_bumps, run, uniform_random
from .stability import certify

log = logging.getLogger("relaxstab")

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_BLOWUP = 0, 1, 2, 3


def _configure_logging():
    level = os.environ.get("RELAXSTAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _certify(cfg):
    system, A0 = cfg.build_system()
    domain = cfg.build_domain()
    return certify(system, system.r, A0, domain), system, A0, domain


def _scheme(cfg, t_end=None):
    s = cfg.scheme
    return SchemeConfig(cfl=s.cfl, t_end=s.t_end if t_end is None else t_end,
                        source_mode=s.source_mode, record_every=s.record_every, dt=s.dt)


def _initial(cfg, domain, N):
    init = cfg.initial
    nx, ny = cfg.grid.nx, cfg.grid.ny
    if init.kind == "gaussian":
        bumps = [b.model_dump() for b in init.bumps] if init.bumps else cfg.default_bumps(domain)
        for b in bumps:
            if b["component"] >= N:
                raise ConfigError(f"initial.bumps: component {b['component']} >= N={N}")
        return gaussian_bumps(domain, nx, ny, N, bumps)
    if init.kind == "random":
        return uniform_random(nx, ny, N, init.amplitude, cfg.seed)
    if init.path is None:
        raise ConfigError("initial.path is required for kind 'file'")
    U, _ = io.read_snapshot(init.path)
    if U.shape != (nx, ny, N):
        raise ConfigError(f"initial grid has shape {U.shape}, expected {(nx, ny, N)}")
    return U


def _failure_payload(exc):
    return {"passed": False, "assumption": getattr(exc, "assumption", None),
            "error": type(exc).__name__, "message": str(exc)}


def cmd_check(cfg, args):
    out = Path(cfg.output.dir)
    try:
        cert, *_ = _certify(cfg)
    except CertificationError as exc:
        payload = _failure_payload(exc)
        io.write_json(out / "certificate.json", payload)
        print(f"assumption {exc.assumption} failed: {exc}", file=sys.stderr)
        print(io.dumps_json(payload))
        return EXIT_ASSUMPTION
    payload = {"passed": True, **cert.to_dict()}
    io.write_json(out / "certificate.json", payload)
    print(io.dumps_json(payload))
    return EXIT_OK


def _prepare_run(cfg, args):
    try:
        cert, system, A0, domain = _certify(cfg)
    except CertificationError as exc:
        if not getattr(args, "unsafe", False):
            print(f"assumption {exc.assumption} failed: {exc} (use --unsafe to run anyway)",
                  file=sys.stderr)
            return None
        log.warning("running uncertified system: %s", exc)
        system, A0 = cfg.build_system()
        domain, cert = cfg.build_domain(), None
    laws = cfg.build_laws(domain, None if cert is None else cert.weight)
    U0 = _initial(cfg, domain, system.N)
    return cert, system, A0, domain, laws, U0


def cmd_simulate(cfg, args):
    try:
        prep = _prepare_run(cfg, args)
    except ControlLawError as exc:
        print(f"control laws rejected: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    if prep is None:
        return EXIT_ASSUMPTION
    cert, system, A0, domain, laws, U0 = prep
    report = run(system, A0, cert, laws, domain, U0, _scheme(cfg))
    out = Path(cfg.output.dir)
    io.write_timeseries(out / "timeseries.csv", report)
    summary = report.summary()
    summary["unsafe"] = cert is None or any(law.unsafe for law in laws)
    io.write_json(out / "summary.json", summary)
    if cfg.output.snapshots:
        io.write_snapshot(out / "final.bin", report.final.U, domain, report.final.t)
    print(io.dumps_json(summary))
    return EXIT_BLOWUP if report.blew_up else EXIT_OK


TUNE_COLUMNS = ("k1", "k2", "k3", "k4", "feasible", "reason", "nu_hat")


def cmd_tune(cfg, args):
    p = cfg.sv_params
    if p is None:
        raise ConfigError("tune needs the saint-venant preset")
    ranges = feasible_gains(p)
    t = cfg.tune
    rows = []
    grid = itertools.product(t.k1, t.k2, t.k3, t.k4)
    cert = domain = system = A0 = U0 = None
    if t.simulate:
        cert, system, A0, domain = _certify(cfg)
        U0 = _initial(cfg, domain, system.N)
    for k1, k2, k3, k4 in grid:
        gains = GateGains(k1, k2, k3, k4)
        bad = ranges.violations(gains)
        nu_hat = None
        if t.simulate and not bad:
            laws = build_controls(p, gains, weight=cert.weight)
            rep = run(system, A0, cert, laws, domain, U0, _scheme(cfg, t_end=t.t_end))
            nu_hat = rep.fitted_rate
        rows.append((k1, k2, k3, k4, not bad, "; ".join(bad), nu_hat))
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "tune.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TUNE_COLUMNS)
        writer.writerows(rows)
    sys.stdout.write((out / "tune.csv").read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_audit_bc(cfg, args):
    p = cfg.sv_params
    if p is None or cfg.controls.mode != "gains":
        raise ConfigError("audit-bc needs the saint-venant preset with controls.mode 'gains'")
    try:
        prep = _prepare_run(cfg, args)
    except ControlLawError as exc:
        print(f"control laws rejected: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    if prep is None:
        return EXIT_ASSUMPTION
    cert, system, A0, domain, laws, U0 = prep
    weight = p.reference_weight() if cert is None else cert.weight
    g = cfg.controls.gains
    gains = GateGains(g.k1, g.k2, g.k3, g.k4)
    faces = edge_faces(system, A0, domain)
    audits = []

    def on_record(k, state, traces):
        a = audit_inequalities(traces, p, gains, weight=weight)
        a["step"], a["t"] = k, state.t
        a["bc_quadrature"] = boundary_term(traces, faces, A0, weight, domain)
        a["bc_closed_form"] = analytic_bc(traces, p, weight=weight)
        audits.append(a)

    report = run(system, A0, cert, laws, domain, U0, _scheme(cfg), on_record=on_record)
    scale = max(max(abs(a["bc_quadrature"]) for a in audits), 1e-300)
    payload = {
        "gains": gains.astuple(),
        "feasible": feasible_gains(p, weight).feasible(gains),
        "n_records": len(audits),
        "all_right_gate_ok": all(a["right_gate_ok"] for a in audits),
        "all_left_gate_ok": all(a["left_gate_ok"] for a in audits),
        "all_spillway_ok": all(a["spillway_ok"] for a in audits),
        "min_right_gate": min(a["right_gate"] for a in audits),
        "max_left_gate": max(a["left_gate"] for a in audits),
        "max_spillway": max(a["spillway"] for a in audits),
        "right_reduction": audits[0]["right_reduction"],
        "left_reduction": audits[0]["left_reduction"],
        "max_rel_bc_mismatch": max(abs(a["bc_quadrature"] - a["bc_closed_form"])
                                   for a in audits) / scale,
        "blew_up": report.blew_up,
    }
    io.write_json(Path(cfg.output.dir) / "audit.json", payload)
    print(io.dumps_json(payload))
    return EXIT_BLOWUP if report.blew_up else EXIT_OK


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "tune": cmd_tune,
            "audit-bc": cmd_audit_bc}


def build_parser():
    parser = argparse.ArgumentParser(prog="relaxstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="YAML/JSON config file")
        sp.add_argument("--preset", choices=["saint-venant"])
        sp.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                        help="preset parameter override (repeatable)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config key override, e.g. scheme.cfl=0.5 (repeatable)")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        if name in ("simulate", "audit-bc"):
            sp.add_argument("--unsafe", action="store_true",
                            help="run even if certification fails")
    return parser


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.out:
        overrides.append(f"output.dir={args.out}")
    try:
        cfg = load_config(args.config, overrides, preset=args.preset, params=args.param)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"assumption {exc.assumption} failed: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (RelaxStabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
