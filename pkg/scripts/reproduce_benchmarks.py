#!/usr/bin/env python3
"""Analyze the bundled benchmark systems and rerun the synthesis study.

Computes the closed-loop norm and spectral abscissa for the shipped
controllers, then synthesizes fresh controllers of orders 1 and 2 for the
first-order benchmark and order 1 for the fourth-order benchmark.

Usage: python scripts/reproduce_benchmarks.py [--starts 5] [--seed 42] [--skip-synthesis]
"""

import argparse
import time

from delayhinf.benchmarks import (mimo_fourstate_controller,
                                  mimo_fourstate_plant, siso_delay_controller,
                                  siso_delay_plant)
from delayhinf.hinf import hinf_norm
from delayhinf.model import assemble_closed_loop
from delayhinf.optim import SynthesisOptions, synthesize
from delayhinf.stability import spectral_abscissa


def analyze(name, plant, controller):
    cl = assemble_closed_loop(plant, controller)
    report = spectral_abscissa(cl)
    result = hinf_norm(cl, stability_report=report)
    print(f"{name}:")
    print(f"  spectral abscissa = {report.abscissa:.8f}")
    print(f"  H-infinity norm   = {result.norm:.8f}  "
          f"(peaks at {[round(om, 6) for om, _ in result.peaks]}, N={result.N_used})")


def run_synthesis(name, plant, order, opts):
    start = time.perf_counter()
    result = synthesize(plant, order, opts)
    elapsed = time.perf_counter() - start
    c = result.controller
    print(f"{name}, order {order}: norm = {result.norm.norm:.6f}, "
          f"abscissa = {result.abscissa.abscissa:.4f}  [{elapsed:.0f}s]")
    print(f"  AK = {c.AK.tolist()}")
    print(f"  BK = {c.BK.tolist()}")
    print(f"  CK = {c.CK.tolist()}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--starts", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--skip-synthesis", action="store_true")
    args = parser.parse_args()

    print("== bundled controllers ==")
    analyze("first-order benchmark", siso_delay_plant(), siso_delay_controller())
    analyze("fourth-order benchmark", mimo_fourstate_plant(),
            mimo_fourstate_controller())

    if args.skip_synthesis:
        return
    print("\n== synthesis study ==")
    opts = SynthesisOptions(starts=args.starts, seed=args.seed)
    run_synthesis("first-order benchmark", siso_delay_plant(), 1, opts)
    run_synthesis("first-order benchmark", siso_delay_plant(), 2, opts)
    run_synthesis("fourth-order benchmark", mimo_fourstate_plant(), 1, opts)


if __name__ == "__main__":
    main()
