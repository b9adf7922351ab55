"""Command-line entry point: ``ssqg {certify,solve,kernel,moc-fit}``.

Exit codes: 0 success, 2 certificate or bound failure, 3 numerical
non-convergence, 4 blow-up, 64 usage or configuration error, 74 I/O error.
"""

import argparse
import hashlib
import json
import math
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import (BlowUpError, CertificationError, ConfigError, NumericalError,
                     SSQGError)
from .symbols import Symbol

EXIT_OK, EXIT_FAIL, EXIT_NUMERIC, EXIT_BLOWUP, EXIT_USAGE, EXIT_IO = 0, 2, 3, 4, 64, 74
COMMANDS = ("certify", "solve", "kernel", "moc-fit")


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _real_list(v):
    return isinstance(v, list) and bool(v) and all(_is_real(x) for x in v)


def _pair(v):
    return _real_list(v) and len(v) == 2


def _symbol_entry(v):
    return isinstance(v, (str, dict))


def _modes(v):
    return isinstance(v, list) and all(
        isinstance(m, list) and len(m) == 4 and _is_int(m[0]) and _is_int(m[1])
        and _is_real(m[2]) and _is_real(m[3]) for m in v)


# key: (checker, type name, default)
COMMON = {
    "symbol": (_symbol_entry, "table or string", {"kind": "constant-one"}),
    "A": (_is_real, "real", None),
    "kappa": (_is_real, "real", None),
    "gamma": (_is_real, "real", None),
    "seed": (_is_int, "integer", 0),
    "threads": (_is_int, "integer", None),
}
SECTIONS = {
    "certify": {
        "B_list": (_real_list, "list of reals", [1.0, 10.0, 1e3, 1e6]),
        "xi_decades": (_pair, "pair of reals", [-6.0, 6.0]),
        "points_per_decade": (_is_int, "integer", 50),
        "tol": (_is_real, "real", 1e-10),
        "M": (_is_real, "real", 1e6),
        "margin": (_is_real, "real", 1e-3),
        "limit": (_is_int, "integer", 2000),
        "stability_check": (lambda v: isinstance(v, bool), "boolean", True),
    },
    "solve": {
        "N": (_is_int, "integer", 256),
        "T": (_is_real, "real", 5.0),
        "cfl": (_is_real, "real", 0.5),
        "diag_every": (_is_int, "integer", 10),
        "snapshot_every": (_is_int, "integer", 0),
        "preset": (lambda v: isinstance(v, str), "string", "shear+vortex"),
        "modes": (_modes, "list of [z1, z2, re, im]", None),
        "amplitude": (_is_real, "real", 1.0),
        "dt": (_is_real, "real", None),
        "monitor": (lambda v: isinstance(v, bool), "boolean", False),
        "monitor_B": (_is_real, "real", None),
        "monitor_B_scale": (_is_real, "real", 1.0),
    },
    "kernel": {
        "j": (_is_int, "integer", 1),
        "radii_decades": (_pair, "pair of reals", [-6.0, 2.0]),
        "per_decade": (_is_int, "integer", 4),
        "angles": (_is_int, "integer", 16),
        "truncation": (_is_real, "real", 2000.0),
    },
    "moc-fit": {
        "sup": (_is_real, "real", None),
        "grad": (_is_real, "real", None),
        "preset": (lambda v: isinstance(v, str), "string", "shear+vortex"),
        "amplitude": (_is_real, "real", 1.0),
        "N": (_is_int, "integer", 256),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="ssqg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        s = sub.add_parser(cmd)
        s.add_argument("--config", help="TOML configuration file")
        s.add_argument("--out", default="runs", help="output root directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int, help="worker count (fallback: SSQG_THREADS)")
        s.add_argument("--symbol", choices=("constant-one", "loglog-power"))
        s.add_argument("--beta", type=float)
        s.add_argument("--A", dest="A", type=float)
        s.add_argument("--kappa", type=float)
        s.add_argument("--gamma", type=float)
        if cmd == "certify":
            s.add_argument("--B-list", dest="B_list",
                           help="comma-separated B values, e.g. 1,10,1e3")
            s.add_argument("--tol", type=float)
            s.add_argument("--points-per-decade", dest="points_per_decade", type=int)
        if cmd in ("solve", "moc-fit"):
            s.add_argument("--N", dest="N", type=int)
            s.add_argument("--preset")
            s.add_argument("--amplitude", type=float)
        if cmd == "solve":
            s.add_argument("--T", dest="T", type=float)
            s.add_argument("--monitor", action="store_true", default=None)
            s.add_argument("--monitor-B-scale", dest="monitor_B_scale", type=float)
        if cmd == "moc-fit":
            s.add_argument("--sup", type=float)
            s.add_argument("--grad", type=float)
    return p


def _load_file(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _flag_overrides(ns):
    common, section = {}, {}
    for k in ("seed", "threads", "A", "kappa", "gamma"):
        if getattr(ns, k, None) is not None:
            common[k] = getattr(ns, k)
    if ns.symbol is not None or ns.beta is not None:
        common["symbol"] = {"kind": ns.symbol or "loglog-power"}
        if ns.beta is not None:
            common["symbol"]["beta"] = ns.beta
    for k in SECTIONS[ns.command]:
        v = getattr(ns, k, None)
        if v is not None:
            section[k] = v
    if isinstance(section.get("B_list"), str):
        try:
            section["B_list"] = [float(x) for x in section["B_list"].split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--B-list: cannot parse {ns.B_list!r}") from None
    return common, section


def _check_keys(table, schema, where, problems):
    """Record unknown or mistyped keys and drop them so later checks see defaults."""
    for k, v in list(table.items()):
        if k not in schema:
            problems.append(f"{where}{k}: unknown key")
            del table[k]
        elif v is not None and not schema[k][0](v):
            problems.append(f"{where}{k}: expected {schema[k][1]}, got {type(v).__name__} {v!r}")
            del table[k]


def parse_config(command, raw=None, flags=None):
    """Merge file values, flag overrides and defaults into a validated dict.

    Every offending key is reported together in one ``ConfigError``.
    """
    raw = dict(raw or {})
    common_flags, section_flags = flags or ({}, {})
    problems = []
    top = {k: v for k, v in raw.items() if not isinstance(v, dict) or k == "symbol"}
    sections = {k: v for k, v in raw.items() if isinstance(v, dict) and k != "symbol"}
    for k in sections:
        if k not in SECTIONS:
            problems.append(f"[{k}]: unknown section")
    _check_keys(top, COMMON, "", problems)
    sec = dict(sections.get(command, {}))
    _check_keys(sec, SECTIONS[command], f"[{command}].", problems)
    top.update(common_flags)
    sec.update(section_flags)

    cfg = {k: top.get(k, d) for k, (_, _, d) in COMMON.items()}
    cfg[command] = {k: sec.get(k, d) for k, (_, _, d) in SECTIONS[command].items()}

    try:
        symbol = Symbol.from_config(cfg["symbol"])
    except SSQGError as exc:
        problems.append(f"symbol: {exc}")
        symbol = None
    if cfg["A"] is not None and not cfg["A"] >= 1.0:
        problems.append("A: must be >= 1")
    for k in ("kappa", "gamma"):
        if cfg[k] is not None and not (cfg[k] > 0 and math.isfinite(cfg[k])):
            problems.append(f"{k}: must be positive and finite")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        problems.append("threads: must be >= 1")
    s = cfg[command]
    if command == "certify":
        if any(b < 1 for b in s["B_list"]):
            problems.append("[certify].B_list: every B must be >= 1")
        lo, hi = s["xi_decades"]
        if not lo < 0 < hi:
            problems.append("[certify].xi_decades: need low < 0 < high (decades of xi/delta)")
        if s["points_per_decade"] < 50:
            problems.append("[certify].points_per_decade: must be >= 50")
        if not s["tol"] > 0:
            problems.append("[certify].tol: must be positive")
        if not s["M"] > 1:
            problems.append("[certify].M: must exceed 1")
    elif command == "solve":
        if s["N"] < 16 or s["N"] % 2:
            problems.append("[solve].N: must be even and >= 16")
        if not s["T"] > 0:
            problems.append("[solve].T: must be positive")
        if not 0 < s["cfl"] <= 1:
            problems.append("[solve].cfl: must lie in (0, 1]")
        if s["diag_every"] < 1 or s["snapshot_every"] < 0:
            problems.append("[solve].diag_every must be >= 1, snapshot_every >= 0")
        from .solver import PRESETS
        if s["modes"] is None and s["preset"] not in PRESETS:
            problems.append(f"[solve].preset: unknown preset {s['preset']!r}")
        if s["dt"] is not None and not s["dt"] > 0:
            problems.append("[solve].dt: must be positive")
    elif command == "kernel":
        if s["j"] not in (1, 2):
            problems.append("[kernel].j: must be 1 or 2")
        lo, hi = s["radii_decades"]
        if not lo < hi:
            problems.append("[kernel].radii_decades: need low < high")
        if s["per_decade"] < 1 or s["angles"] < 1:
            problems.append("[kernel].per_decade and angles must be >= 1")
        if s["truncation"] < 1000:
            problems.append("[kernel].truncation: must be >= 1000")
    elif command == "moc-fit":
        for k in ("sup", "grad"):
            if s[k] is not None and not s[k] > 0:
                problems.append(f"[moc-fit].{k}: must be positive")
        from .solver import PRESETS
        if (s["sup"] is None or s["grad"] is None) and s["preset"] not in PRESETS:
            problems.append(f"[moc-fit].preset: unknown preset {s['preset']!r}")
    if cfg["kappa"] is not None and cfg["gamma"] is not None and not cfg["gamma"] < cfg["kappa"]:
        problems.append(f"gamma = {cfg['gamma']!r} violates the condition \"gamma < kappa\" "
                        f"(kappa = {cfg['kappa']!r})")
    if problems:
        raise ConfigError(problems)
    cfg["symbol"] = symbol.to_config()
    cfg["command"] = command
    return cfg


def resolve_constants(cfg):
    """Fill A (kernel estimate), kappa and gamma (default rule); returns the family."""
    from .moduli import ModulusFamily, default_constants
    symbol = Symbol.from_config(cfg["symbol"])
    if cfg["A"] is None:
        from .kernel import estimate_A
        cfg["A"] = estimate_A(symbol)
        cfg["A_source"] = "kernel estimate"
    else:
        cfg["A_source"] = "config"
    kappa, gamma = default_constants(cfg["A"], symbol)
    if cfg["kappa"] is None:
        cfg["kappa"] = kappa
    if cfg["gamma"] is None:
        cfg["gamma"] = min(0.5 * cfg["kappa"], 1.0 / (8.0 * math.pi * cfg["A"]))
    if not cfg["gamma"] < cfg["kappa"]:
        raise ConfigError(f"gamma = {cfg['gamma']!r} violates the condition \"gamma < kappa\"")
    return ModulusFamily(symbol, cfg["A"], cfg["kappa"], cfg["gamma"])


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _run_dir(out, cfg):
    hashed = {k: v for k, v in cfg.items() if k != "threads"}
    d = os.path.join(out, f"{cfg['command']}-{config_hash(hashed)}")
    os.makedirs(d, exist_ok=True)
    return d


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _threads(cfg):
    if cfg["threads"] is not None:
        return cfg["threads"]
    env = os.environ.get("SSQG_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SSQG_THREADS: expected an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SSQG_THREADS: must be >= 1")
        return n
    return 1


def cmd_certify(cfg, out):
    from .certificate import CertificateConfig, verify_negativity, write_report
    from .errors import QuadratureError
    family = resolve_constants(cfg)
    s = cfg["certify"]
    cc = CertificateConfig(B_list=tuple(s["B_list"]), xi_decades=tuple(s["xi_decades"]),
                           points_per_decade=s["points_per_decade"], tol=s["tol"], M=s["M"],
                           margin=s["margin"], limit=s["limit"],
                           stability_check=s["stability_check"], workers=_threads(cfg))
    d = _run_dir(out, cfg)
    try:
        report = verify_negativity(family, cc)
    except QuadratureError as exc:
        _dump(os.path.join(d, "summary.json"),
              {"config": cfg, "error": str(exc), "diagnostics": exc.diagnostics})
        print(f"certify: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    report.summary["config"] = cfg
    write_report(report, d)
    sm = report.summary
    print(f"certify: passed={sm['passed']} worst_margin={sm['worst_margin']:.6g} "
          f"failing_points={sm['failing_points']} -> {d}")
    if not sm["stable"]:
        return EXIT_NUMERIC
    return EXIT_OK if sm["passed"] else EXIT_FAIL


def _solver_config(cfg):
    from .solver import MonitorConfig, SolverConfig
    s = cfg["solve"]
    monitor = None
    if s["monitor"]:
        monitor = MonitorConfig(B=s["monitor_B"], A=cfg["A"], kappa=cfg["kappa"],
                                gamma=cfg["gamma"], B_scale=s["monitor_B_scale"],
                                require_initial_obeyed=s["monitor_B_scale"] >= 1.0)
    initial = s["preset"]
    if s["modes"] is not None:
        initial = [((m[0], m[1]), complex(m[2], m[3])) for m in s["modes"]]
    return SolverConfig(N=s["N"], symbol=Symbol.from_config(cfg["symbol"]), T=s["T"],
                        cfl=s["cfl"], diag_every=s["diag_every"],
                        snapshot_every=s["snapshot_every"], initial=initial, seed=cfg["seed"],
                        amplitude=s["amplitude"], dt=s["dt"], monitor=monitor,
                        workers=_threads(cfg))


def cmd_solve(cfg, out):
    from .solver import run, write_diagnostics, write_snapshots
    if cfg["solve"]["monitor"]:
        resolve_constants(cfg)
    sc = _solver_config(cfg)
    d = _run_dir(out, cfg)
    code, summary = EXIT_OK, {"config": cfg}
    try:
        result = run(sc)
        rows = result.diagnostics
        summary["completed"] = True
        if result.instance is not None:
            summary["monitor"] = {"B": result.instance.B, "delta": result.instance.delta,
                                  "max_ratio": max(r.moc_ratio for r in rows)}
            ev = result.event
            summary["breakthrough"] = None if ev is None else {
                "t": ev.t, "ratio": ev.ratio, "x": list(ev.x), "lag": list(ev.h)}
        write_snapshots(result, os.path.join(d, "snapshots"))
    except BlowUpError as exc:
        rows = exc.diagnostics
        summary.update(completed=False, blowup=str(exc))
        code = EXIT_BLOWUP
    write_diagnostics(rows, os.path.join(d, "report.csv"))
    if rows:
        last = rows[-1]
        summary["final"] = {"t": last.t, "sup_theta": last.sup_theta,
                            "sup_grad_theta": last.sup_grad_theta, "l2": last.l2}
    summary["diagnostics_rows"] = len(rows)
    _dump(os.path.join(d, "summary.json"), summary)
    print(f"solve: completed={summary['completed']} rows={len(rows)} -> {d}")
    return code


def cmd_kernel(cfg, out):
    from .kernel import C_GEO, KernelProbe, verify_kernel_bounds, write_kernel_csv
    s = cfg["kernel"]
    lo, hi = s["radii_decades"]
    radii = tuple(np.logspace(lo, hi, int(round((hi - lo) * s["per_decade"])) + 1))
    probe = KernelProbe(symbol=Symbol.from_config(cfg["symbol"]), j=s["j"], radii=radii,
                        angles=s["angles"], truncation=s["truncation"])
    report = verify_kernel_bounds(probe)
    d = _run_dir(out, cfg)
    write_kernel_csv(report, os.path.join(d, "report.csv"))
    summary = {"config": cfg, "C_K": report.C_K, "C_gradK": report.C_gradK,
               "plateau_variation": list(report.plateau_variation), "stable": report.stable,
               "passed": report.passed, "c_geo": C_GEO,
               "A_estimate": max(1.0, C_GEO * max(report.C_K, report.C_gradK)),
               "flagged_crossover_radii": report.flagged_radii, "note": report.note}
    _dump(os.path.join(d, "summary.json"), summary)
    print(f"kernel: C_K={report.C_K:.6g} C_gradK={report.C_gradK:.6g} "
          f"stable={report.stable} -> {d}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_moc_fit(cfg, out):
    from .moduli import find_B_for_data
    family = resolve_constants(cfg)
    s = cfg["moc-fit"]
    sup, grad = s["sup"], s["grad"]
    if sup is None or grad is None:
        from .solver import SolverConfig, initial_state
        from .spectral import RealField, sup_norms
        sc = SolverConfig(N=s["N"], initial=s["preset"], seed=cfg["seed"], amplitude=s["amplitude"])
        st = initial_state(sc)
        gsup, ggrad = sup_norms(RealField(sc.grid, st.values()))
        sup = gsup if sup is None else sup
        grad = ggrad if grad is None else grad
    d = _run_dir(out, cfg)
    result = {"config": cfg, "sup": sup, "grad": grad}
    try:
        B = find_B_for_data(family, sup, grad)
    except CertificationError as exc:
        result["error"] = str(exc)
        _dump(os.path.join(d, "summary.json"), result)
        print(json.dumps({"error": str(exc), "sup": sup, "grad": grad}))
        return EXIT_FAIL
    inst = family.instance(B)
    a = 2.0 * sup / grad
    result.update(B=B, delta=inst.delta, argument=a, omega_at_argument=inst.omega(a))
    _dump(os.path.join(d, "summary.json"), result)
    print(json.dumps({"B": B, "delta": inst.delta, "sup": sup, "grad": grad}, sort_keys=True))
    return EXIT_OK


HANDLERS = {"certify": cmd_certify, "solve": cmd_solve, "kernel": cmd_kernel,
            "moc-fit": cmd_moc_fit}


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        raw = _load_file(ns.config) if ns.config else {}
        cfg = parse_config(ns.command, raw, _flag_overrides(ns))
        return HANDLERS[ns.command](cfg, ns.out)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"ssqg {ns.command}: config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ssqg {ns.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"ssqg {ns.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SSQGError as exc:
        print(f"ssqg {ns.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
