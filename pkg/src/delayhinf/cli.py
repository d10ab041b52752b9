"""Command-line front end.

Subcommands: ``norm``, ``abscissa``, ``synthesize``, ``sigma-plot``. Plant
and controller files are JSON documents; see the README for the schema.
Exit codes: 0 success, 1 input error, 2 unstable closed loop, 3 synthesis
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .benchmarks import controller_to_dict
from .exceptions import (DimensionError, DiscretizationLimitError,
                         StabilizationError, UnstableSystemError)
from .hinf import HinfOptions, hinf_norm
from .model import (ControllerRealization, TimeDelayPlant,
                    assemble_closed_loop, max_singular_value)
from .optim import SynthesisOptions, synthesize
from .stability import spectral_abscissa

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSTABLE = 2
EXIT_SYNTHESIS = 3

_PLANT_FIELDS = ("n", "state_delays", "input_delay", "feedthrough_delay",
                 "A", "B1", "B2", "C1", "C2", "D11", "D12", "D21", "D22")
_CONTROLLER_FIELDS = ("nK", "AK", "BK", "CK")


class InputFileError(Exception):
    pass


def _load_document(path, kind):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputFileError(f"{kind} file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(
            f"{kind} file {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def load_plant(path):
    doc = _load_document(path, "plant")
    for field in _PLANT_FIELDS:
        if field not in doc:
            raise InputFileError(f"plant file {path}: missing field: {field}")
    try:
        plant = TimeDelayPlant(
            A=tuple(np.asarray(a, dtype=float) for a in doc["A"]),
            state_delays=tuple(doc["state_delays"]),
            input_delay=doc["input_delay"],
            feedthrough_delay=doc["feedthrough_delay"],
            B1=doc["B1"], B2=doc["B2"], C1=doc["C1"], C2=doc["C2"],
            D11=doc["D11"], D12=doc["D12"], D21=doc["D21"], D22=doc["D22"],
        )
    except (DimensionError, ValueError, TypeError) as exc:
        raise InputFileError(f"plant file {path}: {exc}") from exc
    if int(doc["n"]) != plant.n:
        raise InputFileError(
            f"plant file {path}: field n = {doc['n']} does not match A[0] "
            f"of size {plant.n}"
        )
    return plant


def load_controller(path):
    doc = _load_document(path, "controller")
    for field in _CONTROLLER_FIELDS:
        if field not in doc:
            raise InputFileError(f"controller file {path}: missing field: {field}")
    try:
        controller = ControllerRealization(AK=doc["AK"], BK=doc["BK"], CK=doc["CK"])
    except (DimensionError, ValueError, TypeError) as exc:
        raise InputFileError(f"controller file {path}: {exc}") from exc
    if int(doc["nK"]) != controller.nK:
        raise InputFileError(
            f"controller file {path}: field nK = {doc['nK']} does not match "
            f"AK of size {controller.nK}"
        )
    return controller


def _norm_report(result):
    return {
        "norm": result.norm,
        "peaks": [{"omega": om, "sigma": t.sigma} for om, t in result.peaks],
        "N_used": result.N_used,
        "corrector_iterations": result.corrector_iterations,
        "converged": result.converged,
    }


def _abscissa_report(report):
    return {
        "abscissa": report.abscissa,
        "rightmost_roots": [{"re": r.lam.real, "im": r.lam.imag,
                             "converged": r.converged}
                            for r in report.rightmost_roots],
        "N_used": report.N_used,
        "converged": report.converged,
        "nonsmooth": report.nonsmooth,
    }


def cmd_norm(args):
    plant = load_plant(args.plant)
    controller = load_controller(args.controller)
    cl = assemble_closed_loop(plant, controller)
    opts = HinfOptions(rel_tol=args.rel_tol)
    try:
        result = hinf_norm(cl, opts)
    except UnstableSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    if args.json:
        print(json.dumps(_norm_report(result)))
    else:
        print(f"norm = {result.norm:.10g}")
        print("peaks (omega, sigma):")
        for om, t in result.peaks:
            print(f"  {om:.10g}  {t.sigma:.10g}")
        print(f"N_used = {result.N_used}")
        print(f"corrector_iterations = {result.corrector_iterations}")
        print(f"converged = {'yes' if result.converged else 'no'}")
    return EXIT_OK


def cmd_abscissa(args):
    plant = load_plant(args.plant)
    if args.controller is not None:
        controller = load_controller(args.controller)
    else:
        controller = ControllerRealization.empty(plant.ny, plant.nu)
    cl = assemble_closed_loop(plant, controller)
    report = spectral_abscissa(cl)
    if args.json:
        print(json.dumps(_abscissa_report(report)))
    else:
        print(f"abscissa = {report.abscissa:.10g}")
        print("rightmost roots:")
        for r in report.rightmost_roots:
            flag = "" if r.converged else "  (discretization accuracy only)"
            print(f"  {r.lam.real:.10g} + {r.lam.imag:.10g}j{flag}")
        print(f"N_used = {report.N_used}")
    return EXIT_OK


def cmd_synthesize(args):
    if args.order < 1:
        print("error: order must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    plant = load_plant(args.plant)
    opts = SynthesisOptions(starts=args.starts, seed=args.seed,
                            margin=args.margin,
                            stabilize_max_iter=args.max_iter,
                            optimize_max_iter=args.max_iter,
                            hinf=HinfOptions(rel_tol=args.tol))
    try:
        result = synthesize(plant, args.order, opts)
    except StabilizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    doc = controller_to_dict(result.controller)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    report = {
        "controller": doc,
        "norm": _norm_report(result.norm),
        "abscissa": _abscissa_report(result.abscissa),
        "starts": [
            {"index": o.index, "stabilized": o.stabilized,
             "abscissa_reached": o.best_abscissa,
             "norm": o.norm}
            for o in result.outcomes
        ],
    }
    if args.json:
        print(json.dumps(report))
    else:
        print(f"norm = {result.norm.norm:.10g}")
        print(f"abscissa = {result.abscissa.abscissa:.10g}")
        print(f"starts_tried = {result.starts_tried}")
        for o in result.outcomes:
            tail = (f"norm = {o.norm:.10g}" if o.stabilized
                    else f"failed, best abscissa {o.best_abscissa:.6g}")
            print(f"  start {o.index}: {tail}")
        if args.out:
            print(f"controller written to {args.out}")
    return EXIT_OK


def cmd_sigma_plot(args):
    if args.points < 2:
        print("error: points must be >= 2", file=sys.stderr)
        return EXIT_INPUT
    if not args.wmin < args.wmax:
        print("error: wmin must be < wmax", file=sys.stderr)
        return EXIT_INPUT
    if args.wmin <= 0:
        print("error: wmin must be positive (log spacing)", file=sys.stderr)
        return EXIT_INPUT
    plant = load_plant(args.plant)
    controller = load_controller(args.controller)
    cl = assemble_closed_loop(plant, controller)
    try:
        result = hinf_norm(cl)
    except UnstableSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    freqs = np.logspace(np.log10(args.wmin), np.log10(args.wmax), args.points)
    lines = ["omega,sigma_max"]
    for w in freqs:
        lines.append(f"{w:.12g},{max_singular_value(cl, w).sigma:.12g}")
    for om, t in result.peaks:
        lines.append("# peak")
        lines.append(f"{om:.12g},{t.sigma:.12g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="delay-hinf",
        description="H-infinity norms, spectral abscissae, and fixed-order "
                    "controller synthesis for linear time-delay systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="closed-loop H-infinity norm")
    p.add_argument("plant")
    p.add_argument("controller")
    p.add_argument("--json", action="store_true")
    p.add_argument("--rel-tol", type=float, default=1e-6, dest="rel_tol")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("abscissa", help="spectral abscissa and rightmost roots")
    p.add_argument("plant")
    p.add_argument("controller", nargs="?", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_abscissa)

    p = sub.add_parser("synthesize", help="fixed-order controller synthesis")
    p.add_argument("plant")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--margin", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("sigma-plot", help="CSV of the top singular value over frequency")
    p.add_argument("plant")
    p.add_argument("controller")
    p.add_argument("--wmin", type=float, default=1e-2)
    p.add_argument("--wmax", type=float, default=1e2)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sigma_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DiscretizationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
