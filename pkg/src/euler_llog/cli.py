"""Command line entry point: ``euler-llog {run,sweep,verify-membership,report}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .diagnostics import DiagnosticsReport
from .errors import ConfigurationError, DataError, EulerLLogError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("euler_llog")

ES_ENERGY_TOL = 1e-6
ES_MODULAR_TOL = 1e-2
VV_STEP_TOL = 1e-8
VB_MODULAR_FACTOR = 3.0


def _keys_help() -> str:
    lines = ["config keys (file `key = value`, or `--key value` on the command line):"]
    for key, (_, typ, desc) in harness.KEYS.items():
        lines.append(f"  {key:<16} {typ.__name__:<5} {desc}")
    lines.append("")
    lines.append("exit codes: 0 success, 2 configuration error, 3 solver or report failure")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    ap = argparse.ArgumentParser(
        prog="euler-llog", formatter_class=fmt, epilog=_keys_help(),
        description="Vortex-blob, vanishing-viscosity and spectral experiments for 2D Euler "
                    "with L(log L)^alpha vorticity.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress the config echo")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one configuration", formatter_class=fmt, epilog=_keys_help())
    p.add_argument("config")
    p = sub.add_parser("sweep", help="refinement sweep over eps (VB), nu (VV) or delta (ES)",
                       formatter_class=fmt, epilog=_keys_help())
    p.add_argument("config")
    p.add_argument("--levels", required=True, help="comma separated parameter values (>= 3)")
    p.add_argument("--param", default=None, help="swept key (default by method: eps, nu, delta)")
    p = sub.add_parser("verify-membership", help="L(log L)^alpha membership of the preset",
                       formatter_class=fmt, epilog=_keys_help())
    p.add_argument("config")
    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("run_dir")
    return ap


def _split_overrides(extra: list[str]) -> dict:
    """``--key value`` / ``--key=value`` pairs; anything else is a config error."""
    out, problems = {}, []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            problems.append(f"unexpected argument {tok!r}")
            i += 1
            continue
        if "=" in tok:
            k, v = tok[2:].split("=", 1)
            i += 1
        elif i + 1 < len(extra):
            k, v = tok[2:], extra[i + 1]
            i += 2
        else:
            problems.append(f"{tok}: missing value")
            i += 1
            continue
        out[k] = v
    if problems:
        raise ConfigurationError("bad command line:\n  " + "\n  ".join(problems), problems)
    return out


def parse_and_validate(argv=None):
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    overrides = _split_overrides(extra)
    cfg = None
    if args.command != "report":
        cfg = harness.load_config(args.config, overrides)
    elif overrides:
        raise ConfigurationError("report takes no config overrides")
    return args, cfg


# ---------------------------------------------------------------- summary

def _verdict(ok: bool, rule: str) -> str:
    return f"({'PASS' if ok else 'FAIL'} {rule})"


def summarize(run_dir) -> str:
    path = Path(run_dir) / "report.csv"
    if not path.is_file():
        raise DataError(f"{run_dir}: no report.csv")
    rep = DiagnosticsReport.read(path)
    if not rep.rows:
        raise DataError(f"{path}: report has no rows")
    method = rep.metadata.get("method", "?")
    E = rep.column("energy")
    M = rep.column("modular")
    t = rep.column("t")
    drift = np.abs(E - E[0]) / abs(E[0]) if E[0] else np.zeros_like(E)
    mdrift = np.abs(M - M[0]) / abs(M[0]) if M[0] else np.zeros_like(M)
    out = [f"run {run_dir}: method {method}, {len(t)} snapshots, t = {t[0]:.6g} .. {t[-1]:.6g}"]
    if "warning" in rep.metadata:
        out.append(f"warning: {rep.metadata['warning']}")
    out.append(f"energy initial {E[0]:.17g} final {E[-1]:.17g}")
    out.append(f"modular min {M.min():.17g} max {M.max():.17g}")
    out.append(f"serfati residual final {rep.column('serfati_res')[-1]:.6e}")
    if method == "ES":
        out.append(f"energy drift {drift.max():.2e} {_verdict(drift.max() < ES_ENERGY_TOL, f'< {ES_ENERGY_TOL:g}')}")
        out.append(f"modular drift {mdrift.max():.2e} {_verdict(mdrift.max() < ES_MODULAR_TOL, f'< {ES_MODULAR_TOL:g}')}")
    elif method == "VV":
        dE = np.diff(E).max(initial=-np.inf)
        dM = np.diff(M).max(initial=-np.inf)
        out.append(f"energy max increment {dE:.2e} {_verdict(dE <= VV_STEP_TOL, f'<= {VV_STEP_TOL:g}')}")
        out.append(f"modular max increment {dM:.2e} {_verdict(dM <= VV_STEP_TOL, f'<= {VV_STEP_TOL:g}')}")
        if "energy_budget_rel" in rep.metadata:
            b = float(rep.metadata["energy_budget_rel"])
            out.append(f"energy budget residual {b:.2e} {_verdict(b < 1e-6, '< 1e-06')}")
    else:
        ratio = M.max() / M[0] if M[0] else float("nan")
        out.append(f"circulation sum {rep.column('mean_vort')[-1]:.3e}")
        label = "grid energy" if "warning" in rep.metadata else "pairwise energy"
        out.append(f"{label} drift {drift.max():.2e} (recorded)")
        out.append(f"modular ratio sup/initial {ratio:.4f} "
                   f"{_verdict(ratio <= VB_MODULAR_FACTOR, f'<= {VB_MODULAR_FACTOR:g}')}")
    return "\n".join(out)


# ---------------------------------------------------------------- commands

def _cmd_run(cfg, args):
    res = harness.run(cfg)
    print(f"wrote {res.out_dir}")
    print(summarize(res.out_dir))


def _cmd_sweep(cfg, args):
    try:
        levels = [float(v) for v in args.levels.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--levels: cannot parse {args.levels!r}") from None
    if args.param is not None and args.param not in harness.KEYS:
        raise ConfigurationError(f"--param: unknown key {args.param!r}")
    res = harness.refinement_sweep(cfg, levels, args.param)
    print(res.to_csv(), end="")
    print(f"cauchy distances decreasing: {res.cauchy_decreasing}")
    print(f"energy drift decreases across endpoints: {res.drift_endpoints_decrease}")
    if res.failures:
        raise EulerLLogError(f"{len(res.failures)} level(s) failed")


def _cmd_membership(cfg, args):
    res = harness.membership_verifier(cfg.preset_obj(), cfg.alpha)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "membership.csv").write_text(res.to_csv())
    print(res.to_csv(), end="")
    print(f"verdict {res.verdict}")


def main(argv=None) -> int:
    try:
        args, cfg = parse_and_validate(argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if cfg is not None and not args.quiet:
        print("# effective configuration")
        print(cfg.to_text(), end="")
    try:
        if args.command == "run":
            _cmd_run(cfg, args)
        elif args.command == "sweep":
            _cmd_sweep(cfg, args)
        elif args.command == "verify-membership":
            _cmd_membership(cfg, args)
        else:
            print(summarize(args.run_dir))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EulerLLogError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
