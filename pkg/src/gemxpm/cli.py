"""Command-line front end: simulate, sweep, absorption, fit, extrapolate.

Every invocation writes a run manifest carrying the resolved configuration
snapshot and its hash; every data file embeds the same hash so outputs can
be traced back to the exact inputs.  Exit codes: 0 ok, 2 config error,
3 numerical failure, 4 fit non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config_io import (
    RunBundle, bundle_to_snapshot, config_hash, load_config,
)
from .dynamics import run_gem_sequence
from .model_core import ConfigError, FitError, NumericalError, photon_energy
from .observables import absorption_spectrum, recall_efficiency
from .sweeps import (
    SweepResult, SweepRow, SweepSpec, extrapolate_single_photon, fit_impurity,
    fit_waist, run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_FIT = 0, 2, 3, 4

TWO_PI = 2.0 * math.pi

#: CSV header of sweep tables; part of the public contract.
SWEEP_HEADER = ["value", "phase_rad", "efficiency", "model"]
TRACE_HEADER = ["t_s", "ein_re", "ein_im", "eout_re", "eout_im"]
ABSORPTION_HEADER = ["delta_hz", "transmission"]


def _fail(code: int, kind: str, message, details=None) -> int:
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def _write_manifest(outdir: Path, bundle: RunBundle, outputs, t0: float,
                    extra=None) -> Path:
    manifest = {
        "tool": "gemxpm",
        "version": __version__,
        "config_hash": config_hash(bundle),
        "config": bundle_to_snapshot(bundle),
        "runtime_s": time.time() - t0,
        "outputs": [str(p.name) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _csv_with_hash(path: Path, header, rows, chash: str) -> None:
    with open(path, "w", newline="") as f:
        f.write("# config_hash=%s\n" % chash)
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _apply_overrides(bundle: RunBundle, args) -> RunBundle:
    if getattr(args, "purity", None) is not None:
        bundle = replace(bundle, purity=args.purity)
    if getattr(args, "no_signal", False):
        seq = bundle.sequence
        sig = seq.signal
        seq = replace(seq, signal=None if sig is None
                      else replace(sig, energy=0.0))
        bundle = replace(bundle, sequence=seq)
    if getattr(args, "output", None):
        bundle = replace(bundle, output_dir=args.output)
    return bundle


def _outdir(bundle: RunBundle) -> Path:
    out = Path(bundle.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    t0 = time.time()
    bundle = _apply_overrides(load_config(args.config), args)
    outdir = _outdir(bundle)
    rec = run_gem_sequence(bundle.params, bundle.sequence, bundle.control,
                           bundle.solver, bundle.purity)
    chash = config_hash(bundle)

    trace_path = outdir / "timeseries.csv"
    t = rec.times
    rows = zip((repr(float(x)) for x in t),
               (repr(float(x)) for x in rec.input_field.real),
               (repr(float(x)) for x in rec.input_field.imag),
               (repr(float(x)) for x in rec.output_field.real),
               (repr(float(x)) for x in rec.output_field.imag))
    _csv_with_hash(trace_path, TRACE_HEADER, rows, chash)

    summary = {
        "config_hash": chash,
        "signal_on": rec.signal_on,
        "recall_efficiency": recall_efficiency(rec),
        "conservation_max": rec.conservation_max,
        "backend": rec.meta.get("backend"),
    }
    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_manifest(outdir, bundle, [trace_path, summary_path], t0)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _parse_grid(text: str):
    """Either 'start:stop:count' (inclusive linspace) or comma-separated."""
    if ":" in text:
        start, stop, count = text.split(":")
        return list(np.linspace(float(start), float(stop), int(count)))
    return [float(v) for v in text.split(",")]


def _grid_to_internal(variable: str, grid):
    if variable == "signal_energy":
        return [v * 1e-12 for v in grid]       # pJ -> J
    if variable == "signal_detuning":
        return [TWO_PI * v for v in grid]      # Hz -> rad/s
    return list(grid)                          # purity fraction


def _grid_to_boundary(variable: str, value: float) -> float:
    if variable == "signal_energy":
        return value / 1e-12
    if variable == "signal_detuning":
        return value / TWO_PI
    return value


def cmd_sweep(args) -> int:
    t0 = time.time()
    bundle = _apply_overrides(load_config(args.config), args)
    model = {"analytic": "analytic", "mb": "maxwell_bloch",
             "both": "both"}[args.model]
    grid = _grid_to_internal(args.variable, _parse_grid(args.grid))
    spec = SweepSpec(variable=args.variable, grid=tuple(sorted(grid)),
                     base=bundle, model=model)
    result = run_sweep(spec, threads=args.threads)

    outdir = _outdir(bundle)
    chash = config_hash(bundle)
    path = outdir / "sweep.csv"
    rows = [(repr(_grid_to_boundary(args.variable, r.value)), repr(r.phase),
             repr(r.efficiency), r.model) for r in result.rows]
    _csv_with_hash(path, SWEEP_HEADER, rows, chash)
    _write_manifest(outdir, bundle, [path], t0, extra={
        "sweep": result.metadata,
        "failures": [list(f) for f in result.failures],
    })
    print(json.dumps({"rows": len(result.rows),
                      "failures": len(result.failures),
                      "file": str(path)}))
    return EXIT_NUMERICAL if result.failures else EXIT_OK


def cmd_absorption(args) -> int:
    t0 = time.time()
    bundle = _apply_overrides(load_config(args.config), args)
    outdir = _outdir(bundle)
    grid_hz = _parse_grid(args.grid)
    purity = bundle.purity
    curve = absorption_spectrum(purity, [TWO_PI * f for f in grid_hz],
                                bundle.params)
    chash = config_hash(bundle)
    path = outdir / "absorption.csv"
    _csv_with_hash(path, ABSORPTION_HEADER,
                   [(repr(d / TWO_PI), repr(t)) for d, t in curve], chash)
    _write_manifest(outdir, bundle, [path], t0, extra={"purity": purity})
    print(json.dumps({"points": len(curve), "file": str(path)}))
    return EXIT_OK


def _read_csv_data(path: str, n_cols: int):
    rows = []
    try:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(",")
                try:
                    rows.append(tuple(float(p) for p in parts[:n_cols]))
                except ValueError:
                    continue   # header line
    except OSError as exc:
        raise ConfigError(["cannot read data file: %s" % exc])
    if not rows:
        raise ConfigError(["empty or malformed data file: %s" % path])
    return rows


def cmd_fit(args) -> int:
    bundle = load_config(args.config)
    data = _read_csv_data(args.data, 2)
    if args.target == "waist":
        sig = bundle.sequence.signal
        if sig is None:
            raise ConfigError(["waist fit needs a signal section in the config"])
        fit = fit_waist([(e * 1e-12, p) for e, p in data],
                        sig.detuning_delta, bundle.params,
                        tau=sig.duration_tau)
        report = {"fit": "waist", "waist_um": fit.value * 1e6,
                  "sigma_um": fit.sigma * 1e6}
    else:
        fit = fit_impurity([(TWO_PI * d, t) for d, t in data], bundle.params)
        report = {"fit": "impurity", "purity": fit.value,
                  "impurity": 1.0 - fit.value, "sigma": fit.sigma}
    report.update({"physical": fit.physical, "n_points": fit.n_points,
                   "residual_norm": fit.residual_norm,
                   "config_hash": config_hash(bundle)})
    outdir = _outdir(_apply_overrides(bundle, args))
    path = outdir / ("fit_%s.json" % args.target)
    path.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    bundle = load_config(args.config)
    # sweep.csv rows: value(pJ), phase_rad, efficiency, model
    rows = []
    with open(args.data) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("value"):
                continue
            parts = line.split(",")
            try:
                rows.append(SweepRow(value=float(parts[0]) * 1e-12,
                                     phase=float(parts[1]),
                                     efficiency=float(parts[2]),
                                     model=parts[3] if len(parts) > 3 else "analytic"))
            except (ValueError, IndexError):
                continue
    if not rows:
        raise ConfigError(["no sweep rows in %s" % args.data])
    sweep = SweepResult(rows=tuple(rows),
                        metadata={"variable": "signal_energy",
                                  "config_hash": config_hash(bundle)})
    phase, sigma = extrapolate_single_photon(
        sweep, bundle.params.wavelength, energy_cutoff=args.cutoff_pj * 1e-12,
        model=args.model_rows)
    report = {
        "per_photon_phase_rad": phase,
        "per_photon_sigma_rad": sigma,
        "photon_energy_j": photon_energy(bundle.params.wavelength),
        "energy_cutoff_pj": args.cutoff_pj,
        "config_hash": config_hash(bundle),
    }
    outdir = _outdir(_apply_overrides(bundle, args))
    path = outdir / "extrapolation.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gemxpm", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--config", required=True, help="JSON config path")
        if output:
            p.add_argument("--output", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("simulate", help="run one store/recall sequence")
    common(p)
    p.add_argument("--no-signal", action="store_true", dest="no_signal")
    p.add_argument("--purity", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep a variable and tabulate results")
    common(p)
    p.add_argument("--variable", required=True,
                   choices=["signal_energy", "signal_detuning", "purity"])
    p.add_argument("--grid", required=True,
                   help="start:stop:count or comma list (pJ / Hz / fraction)")
    p.add_argument("--model", default="both", choices=["analytic", "mb", "both"])
    p.add_argument("--purity", type=float, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("absorption", help="signal absorption spectrum")
    common(p)
    p.add_argument("--grid", required=True, help="detuning grid in Hz")
    p.add_argument("--purity", type=float, default=None)
    p.set_defaults(func=cmd_absorption)

    p = sub.add_parser("fit", help="fit waist or impurity from a data file")
    p.add_argument("target", choices=["waist", "impurity"])
    common(p)
    p.add_argument("--data", required=True, help="CSV data file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extrapolate", help="per-photon phase from a sweep CSV")
    common(p)
    p.add_argument("--data", required=True, help="sweep.csv from `gemxpm sweep`")
    p.add_argument("--cutoff-pj", type=float, default=5.0)
    p.add_argument("--model-rows", default=None,
                   choices=["analytic", "maxwell_bloch"])
    p.set_defaults(func=cmd_extrapolate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc),
                     details=list(exc.violations))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    except FitError as exc:
        return _fail(EXIT_FIT, "fit", str(exc))


if __name__ == "__main__":
    sys.exit(main())
