"""Command-line front end.

Subcommands: ``synth``, ``estimate``, ``sweep``, ``complexity``, ``selftest``.
Settings come from ``--config FILE`` (JSON), then ``--set section.key=value``,
then the dedicated flags. Angles on the command line are in degrees.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_run_config, parse_set_option, apply_override, read_config_file, RunConfig
from .errors import IrsenseError, ParameterError
from .estimators import ESTIMATORS
from .experiments import (
    complexity_csv,
    complexity_model,
    complexity_sweep,
    draw_truth,
    noise_seed,
    run_sweep,
    truth_seed,
)
from .signal_model import TargetTruth, add_awgn, irs_dft_profile, synthesize_echo
from .tensorio import read_sidecar, read_tensor, write_sidecar, write_tensor

log = logging.getLogger("irsense")

# flag -> (config key, type)
_SYSTEM_FLAGS = {
    "nx": ("system.n_x", int), "ny": ("system.n_y", int), "nc": ("system.n_c", int),
    "q": ("system.q", int), "l": ("system.l", int), "delta_f": ("system.delta_f", float),
    "carrier_freq": ("system.carrier_freq", float), "d1": ("system.d1", float),
    "d2": ("system.d2", float), "sigma_rcs": ("system.sigma_rcs", float),
}
_GRID_FLAGS = {
    "rtau": ("grids.r_tau", int), "rnu": ("grids.r_nu", int),
    "raz": ("grids.r_az", int), "rel": ("grids.r_el", int),
}


def _float_arg(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _float_list(text: str) -> list[float]:
    return [_float_arg(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _common(p: argparse.ArgumentParser, system=True, grids=True) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. system.n_c=32 (repeatable)")
    p.add_argument("--seed", type=int, help="base random seed")
    p.add_argument("--output-dir", type=Path, help="directory for written artifacts")
    if system:
        for flag, (key, typ) in _SYSTEM_FLAGS.items():
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ, help=f"sets {key}")
    if grids:
        for flag, (key, typ) in _GRID_FLAGS.items():
            p.add_argument(f"--{flag}", dest=flag, type=typ, help=f"sets {key}")


def _truth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snr", type=_float_arg, default=math.inf, help="SNR in dB (default: inf, noiseless)")
    p.add_argument("--on-grid", action="store_true", help="draw the target on the search grids")
    p.add_argument("--tau", type=float, help="target delay in seconds")
    p.add_argument("--nu", type=float, help="target Doppler in Hz")
    for name in ("theta-az", "theta-el", "phi-az", "phi-el"):
        p.add_argument(f"--{name}", type=float, help=f"{name.replace('-', ' ')} in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irsense", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write one echo tensor and its truth sidecar")
    _common(p)
    _truth_flags(p)
    p.add_argument("--out", type=Path, help="tensor file (default: OUTPUT_DIR/echo.irst)")

    p = sub.add_parser("estimate", help="run estimators on a tensor file or a fresh synthesis")
    _common(p)
    _truth_flags(p)
    p.add_argument("--input", type=Path, help="tensor file written by 'synth'")
    p.add_argument("--estimator", choices=["hosvd", "baseline", "both"], default="both")

    p = sub.add_parser("sweep", help="Monte-Carlo RMSE sweep, written as CSV and JSON")
    _common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--snrs", type=_float_list, help="comma-separated SNR list in dB")
    p.add_argument("--qs", type=_int_list, help="comma-separated block sizes")
    p.add_argument("--estimators", type=lambda s: [t for t in s.split(",") if t])
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("complexity", help="flop counts per the analytic model")
    p.add_argument("--nc", type=int, default=16)
    p.add_argument("--q", type=int, default=8)
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--rtau", type=int, default=100)
    p.add_argument("--rnu", type=int, default=100)
    p.add_argument("--rtheta", type=int, default=10_000)
    p.add_argument("--sweep", choices=["n_c", "grid_points"], help="sweep one variable")
    p.add_argument("--values", type=_int_list, help="comma-separated sweep values")
    p.add_argument("--range", nargs=3, type=int, metavar=("START", "STOP", "STEP"),
                   help="inclusive sweep range")
    p.add_argument("--out", type=Path, help="CSV output path")

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args) -> RunConfig:
    data = read_config_file(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", []):
        apply_override(data, *parse_set_option(item))
    for flag, (key, _) in {**_SYSTEM_FLAGS, **_GRID_FLAGS}.items():
        value = getattr(args, flag, None)
        if value is not None:
            apply_override(data, key, value)
    if args.seed is not None:
        data["seed"] = args.seed
    for flag, key in (("trials", "montecarlo.trials"), ("snrs", "montecarlo.snr_grid_db"),
                      ("qs", "montecarlo.q_values"), ("estimators", "montecarlo.estimators")):
        value = getattr(args, flag, None)
        if value is not None:
            apply_override(data, key, value)
    if getattr(args, "on_grid", False):
        apply_override(data, "montecarlo.on_grid", True)
    rc = build_run_config(data)
    if args.output_dir is not None:
        rc = RunConfig(rc.system, rc.grids, rc.montecarlo, args.output_dir, rc.seed, rc.raw)
    return rc


def _truth_for(rc: RunConfig, args) -> TargetTruth:
    seed = rc.require_seed()
    truth = draw_truth(rc.system, rc.grids, truth_seed(seed, 0), on_grid=args.on_grid,
                       floor=rc.montecarlo.truth_floor)
    changes = {}
    if args.tau is not None:
        changes["tau"] = args.tau
    if args.nu is not None:
        changes["nu"] = args.nu
    for name in ("theta_az", "theta_el", "phi_az", "phi_el"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = math.radians(value)
    if changes:
        truth = TargetTruth(**{**truth.__dict__, **changes})
    return truth


def _synthesize(rc: RunConfig, args):
    truth = _truth_for(rc, args)
    profile = irs_dft_profile(rc.system.n, rc.system.l, rc.system.q)
    y = synthesize_echo(rc.system, truth, profile)
    y, sigma2 = add_awgn(y, args.snr, noise_seed(rc.seed, args.snr, rc.system.q, 0))
    return y, truth, sigma2


def _truth_json(truth: TargetTruth) -> dict:
    d = truth.to_dict()
    for name in ("theta_az", "theta_el", "phi_az", "phi_el"):
        d[f"{name}_deg"] = math.degrees(d[name])
    return d


def _estimate_json(est) -> dict:
    d = est.to_dict()
    d.pop("g_hat", None)
    d["theta_az_hat_deg"] = math.degrees(est.theta_az_hat)
    d["theta_el_hat_deg"] = math.degrees(est.theta_el_hat)
    return d


def cmd_synth(args) -> int:
    rc = resolve_config(args)
    y, truth, sigma2 = _synthesize(rc, args)
    out = args.out or rc.output_dir / "echo.irst"
    write_tensor(out, y)
    meta = {
        "truth": truth.to_dict(),
        "snr_db": repr(args.snr),
        "noise_variance": sigma2,
        "config": rc.resolved_dict(),
        "config_hash": rc.config_hash(),
    }
    side = write_sidecar(out, meta)
    print(json.dumps({"tensor": str(out), "sidecar": str(side), "truth": _truth_json(truth)}, indent=2))
    return 0


def cmd_estimate(args) -> int:
    if args.input is not None:
        y = read_tensor(args.input)
        meta = read_sidecar(args.input) or {}
        data = read_config_file(args.config) if args.config else dict(meta.get("config", {}))
        for item in args.set:
            apply_override(data, *parse_set_option(item))
        rc = build_run_config(data)
        truth = TargetTruth.from_dict(meta["truth"]) if "truth" in meta else None
        phi_az = math.radians(args.phi_az) if args.phi_az is not None else (truth.phi_az if truth else None)
        phi_el = math.radians(args.phi_el) if args.phi_el is not None else (truth.phi_el if truth else None)
        if phi_az is None or phi_el is None:
            raise ParameterError("BS-IRS angles unknown: pass --phi-az/--phi-el or provide a sidecar")
        if y.shape != (rc.system.n_c, rc.system.q, rc.system.l):
            raise ParameterError(f"tensor shape {y.shape} does not match the config's (n_c, q, l)")
    else:
        rc = resolve_config(args)
        y, truth, _ = _synthesize(rc, args)
        phi_az, phi_el = truth.phi_az, truth.phi_el
    profile = irs_dft_profile(rc.system.n, rc.system.l, rc.system.q)
    names = ["hosvd", "baseline"] if args.estimator == "both" else [args.estimator]
    out = {"config_hash": rc.config_hash()}
    if truth is not None:
        out["truth"] = _truth_json(truth)
    out["estimates"] = {
        name: _estimate_json(ESTIMATORS[name](y, rc.system, profile, (phi_az, phi_el), rc.grids))
        for name in names
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    rc = resolve_config(args)
    rc.require_seed()
    report = run_sweep(rc.montecarlo, workers=args.workers)
    csv_path, json_path = report.write(rc.output_dir)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0


def cmd_complexity(args) -> int:
    fixed = {"n_c": args.nc, "q": args.q, "l": args.l, "r_tau": args.rtau, "r_nu": args.rnu, "r_theta": args.rtheta}
    if args.sweep is None:
        rep = complexity_model(**fixed)
        print(f"baseline flops: {rep.baseline_flops:,}")
        print(f"proposed flops: {rep.proposed_flops:,}")
        print(f"ratio: {rep.ratio:.2f}")
        variable, reports = "n_c", [rep]
    else:
        if args.values:
            values = args.values
        elif args.range:
            start, stop, step = args.range
            values = list(range(start, stop + 1, step))
        else:
            raise ParameterError("--sweep needs --values or --range")
        variable = args.sweep
        reports = complexity_sweep(variable, values, fixed)
        for r in reports:
            x = r.n_c if variable == "n_c" else r.r_tau
            print(f"{variable}={x}: baseline {r.baseline_flops:,}  proposed {r.proposed_flops:,}  ratio {r.ratio:.2f}")
    if args.out:
        header = {"params": json.dumps(fixed, sort_keys=True)}
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(complexity_csv(variable, reports, header))
        print(f"wrote {args.out}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all

    return 0 if run_all(args.seed) else 1


COMMANDS = {
    "synth": cmd_synth,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "complexity": cmd_complexity,
    "selftest": cmd_selftest,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (IrsenseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:  # pragma: no cover
    sys.exit(run_cli())
