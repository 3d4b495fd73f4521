"""Benchmark the compiled stepping kernel against the pure-numpy fallback.

Runs the same store/recall sequence on both backends, reports steps/second
and the speedup, and checks that the two outputs agree.

    python benchmarks/compare_kernels.py [--nz 96] [--span-us 10]
"""
import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from gemxpm.config_io import default_config, bundle_from_config
from gemxpm.dynamics import compiled_kernel_available, run_gem_sequence


def scaled_bundle(nz: int, span_us: float):
    doc = default_config()
    scale = span_us / 30.0
    doc["solver"]["n_z"] = nz
    doc["sequence"] = {
        "reference": {"t_center_us": 1.8 * scale, "width_us": 0.55 * scale,
                      "amplitude": 1e-3},
        "write": {"t_center_us": 6.5 * scale, "width_us": 1.0 * scale,
                  "amplitude": 1e-3},
        "flip_us": 13.0 * scale,
        "storage_us": 13.0 * scale,
        "total_us": span_us,
    }
    doc["control"]["on_windows_us"] = [[4.0 * scale, span_us]]
    doc["signal"].update({"t_start_us": 9.7 * scale, "tau_us": 1.0 * scale})
    return bundle_from_config(doc)


def time_backend(bundle, backend: str):
    b = replace(bundle, solver=replace(bundle.solver, backend=backend))
    t0 = time.time()
    rec = run_gem_sequence(b.params, b.sequence, b.control, b.solver, b.purity)
    return time.time() - t0, rec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nz", type=int, default=96)
    ap.add_argument("--span-us", type=float, default=10.0)
    args = ap.parse_args()

    bundle = scaled_bundle(args.nz, args.span_us)
    n_steps = int(round(bundle.sequence.total_time / bundle.solver.dt))
    print("grid: n_z=%d, %d steps of %.2f ns"
          % (args.nz, n_steps, bundle.solver.dt * 1e9))

    t_py, rec_py = time_backend(bundle, "python")
    print("python   backend: %7.2f s  (%8.0f steps/s)" % (t_py, n_steps / t_py))

    if not compiled_kernel_available():
        print("compiled backend: not built (pip install -e . compiles it)")
        return

    t_c, rec_c = time_backend(bundle, "compiled")
    print("compiled backend: %7.2f s  (%8.0f steps/s)" % (t_c, n_steps / t_c))
    print("speedup: x%.1f" % (t_py / t_c))

    diff = np.max(np.abs(rec_py.output_field - rec_c.output_field))
    scale = np.max(np.abs(rec_py.output_field))
    print("agreement: max|dE| = %.3e (%.2e relative)" % (diff, diff / scale))
    if diff > 1e-9 * scale:
        raise SystemExit("backends disagree beyond tolerance")


if __name__ == "__main__":
    main()
