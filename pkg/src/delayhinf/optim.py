"""Nonsmooth, nonconvex local optimization and the two-phase synthesis driver.

The local solver is BFGS with a weak Wolfe bisection line search, which is
reliable on functions that are smooth almost everywhere but nonsmooth at
minimizers, followed by gradient sampling to refine the candidate and give a
rough stationarity measure. Synthesis runs two phases per random start:
first drive the spectral abscissa negative, then minimize the closed-loop
norm while rejecting any step that leaves the stable region.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .exceptions import (DiscretizationLimitError, StabilizationError,
                         UnstableSystemError)
from .grad import hinf_gradient_closed_loop, hinf_gradient_controller
from .hinf import HinfOptions, hinf_norm
from .model import ControllerRealization, assemble_closed_loop
from .stability import StabilityOptions, abscissa_gradient, spectral_abscissa

_ENV_THREADS = "DELAY_HINF_THREADS"


def pack_controller(controller):
    """Flatten (AK, BK, CK) row-major into one decision vector."""
    return np.concatenate([controller.AK.ravel(), controller.BK.ravel(),
                           controller.CK.ravel()])


def unpack_controller(x, nK, ny, nu):
    """Rebuild a controller from a decision vector; inverse of pack_controller."""
    x = np.asarray(x, dtype=float)
    expected = nK * nK + nK * ny + nu * nK
    if x.shape != (expected,):
        raise ValueError(
            f"decision vector has length {x.size}, expected {expected} "
            f"for nK={nK}, ny={ny}, nu={nu}"
        )
    AK = x[:nK * nK].reshape(nK, nK)
    BK = x[nK * nK:nK * nK + nK * ny].reshape(nK, ny)
    CK = x[nK * nK + nK * ny:].reshape(nu, nK)
    return ControllerRealization(AK=AK, BK=BK, CK=CK)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    grad_norm: float
    step: float
    phase: str  # "bfgs" | "sampling"
    # (f_prev, directional_derivative, f_new, new_directional) for BFGS
    # steps, so the weak Wolfe conditions can be rechecked after the run
    wolfe: tuple | None = None


@dataclass(frozen=True)
class OptimizerTrace:
    records: tuple
    status: str  # gradient-small | line-search-fail | max-iter | sampling-converged | target-reached
    evaluations: int


@dataclass(frozen=True)
class OptimizerOptions:
    max_iter: int = 300
    grad_tol: float = 1e-8
    c1: float = 1e-4
    c2: float = 0.9
    ls_max_iter: int = 60
    sample_count: int | None = None  # default 2*dim + 1
    sampling_radii: tuple = (1e-2, 1e-3, 1e-4)
    sampling_max_iter: int = 15
    target: float | None = None  # stop as soon as the objective drops below
    seed: int = 0


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(v) + 1)
    cond = u - css / ks > 0
    theta = css[cond][-1] / ks[cond][-1]
    return np.maximum(v - theta, 0.0)


def _min_norm_in_hull(G, iters=300):
    """Smallest-norm convex combination of gradient rows by projected descent."""
    m = G.shape[0]
    lam = np.full(m, 1.0 / m)
    Q = G @ G.T
    L = np.linalg.norm(Q, 2) + 1e-15
    for _ in range(iters):
        lam = _project_simplex(lam - (Q @ lam) / L)
    return G.T @ lam


def minimize_nonsmooth(objective, x0, opts=None):
    """Local minimization of a nonsmooth objective.

    Parameters
    ----------
    objective : callable
        ``objective(x) -> (value, gradient, smooth)``. A non-finite value
        rejects the trial point; the gradient is a Clarke subgradient
        representative at nonsmooth points.
    x0 : array_like
        Starting point; the objective must be finite there.
    opts : OptimizerOptions

    Returns
    -------
    x : ndarray
        Best point found.
    trace : OptimizerTrace
        Per-iteration records of accepted steps and the final status. The
        objective values along accepted steps are non-increasing.

    BFGS steps use a weak Wolfe line search (sufficient decrease plus a
    directional-derivative condition, bracketed by bisection). The inverse
    Hessian update is skipped when the curvature condition fails. When the
    line search fails or the iteration budget ends, gradient sampling takes
    over: gradients sampled in shrinking balls around the iterate are
    combined into a smallest-norm descent direction until the sampled
    stationarity measure collapses.
    """
    opts = opts or OptimizerOptions()
    x = np.asarray(x0, dtype=float).copy()
    dim = x.size
    evals = 0

    def fg(z):
        nonlocal evals
        evals += 1
        value, gradient, smooth = objective(z)
        return float(value), np.asarray(gradient, dtype=float), bool(smooth)

    f, g, _ = fg(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    records = []
    best_f, best_x = f, x.copy()
    H = np.eye(dim)
    status = "max-iter"

    if opts.target is not None and f < opts.target:
        status = "target-reached"
    else:
        for k in range(1, opts.max_iter + 1):
            p = -H @ g
            gp = float(g @ p)
            if gp >= 0.0:
                H = np.eye(dim)
                p, gp = -g, -float(g @ g)
                if gp >= 0.0:
                    status = "gradient-small"
                    break
            lo, hi, t = 0.0, np.inf, 1.0
            f_new = g_new = None
            accepted = False
            via_target = False
            for _ in range(opts.ls_max_iter):
                ft, gt, _ = fg(x + t * p)
                if (opts.target is not None and np.isfinite(ft)
                        and ft < opts.target):
                    # the target overrides the curvature condition: stop at
                    # any sufficient point instead of searching past it
                    f_new, g_new, accepted, via_target = ft, gt, True, True
                    break
                if not np.isfinite(ft) or ft > f + opts.c1 * t * gp:
                    hi = t
                elif float(gt @ p) < opts.c2 * gp:
                    lo = t
                else:
                    f_new, g_new, accepted = ft, gt, True
                    break
                if hi < np.inf:
                    t = 0.5 * (lo + hi)
                    if (hi - lo) <= 1e-12 * max(hi, 1e-12):
                        break
                else:
                    t *= 2.0
            if not accepted:
                status = "line-search-fail"
                break
            s = t * p
            y = g_new - g
            certificate = None if via_target else (f, gp, f_new, float(g_new @ p))
            x = x + s
            f, g = f_new, g_new
            records.append(TraceRecord(k, f, float(np.linalg.norm(g)), t,
                                       "bfgs", wolfe=certificate))
            if f < best_f:
                best_f, best_x = f, x.copy()
            sy = float(s @ y)
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                rho = 1.0 / sy
                V = np.eye(dim) - rho * np.outer(s, y)
                H = V @ H @ V.T + rho * np.outer(s, s)
            if opts.target is not None and f < opts.target:
                status = "target-reached"
                break
            if np.linalg.norm(g) < opts.grad_tol:
                status = "gradient-small"
                break

    # gradient sampling refinement of the best point found
    if status != "target-reached" and opts.sampling_max_iter > 0:
        rng = np.random.default_rng(opts.seed)
        count = opts.sample_count or 2 * dim + 1
        x, f = best_x.copy(), best_f
        _, g, _ = fg(x)
        scale = 1.0 + float(np.linalg.norm(np.asarray(x0, dtype=float)))
        sampled_ok = False
        for radius in opts.sampling_radii:
            eps = radius * scale
            for it in range(opts.sampling_max_iter):
                grads = [g]
                for _ in range(count - 1):
                    ft, gt, _ = fg(x + eps * rng.uniform(-1.0, 1.0, dim))
                    if np.isfinite(ft) and np.all(np.isfinite(gt)):
                        grads.append(gt)
                d = -_min_norm_in_hull(np.array(grads))
                nd = float(np.linalg.norm(d))
                if nd <= max(opts.grad_tol, 1e-12):
                    sampled_ok = True
                    break
                t, moved = 1.0, False
                for _ in range(30):
                    ft, gt, _ = fg(x + t * d)
                    if np.isfinite(ft) and ft < f - 1e-4 * t * nd * nd:
                        x, f, g = x + t * d, ft, gt
                        moved = True
                        records.append(TraceRecord(len(records) + 1, f, nd, t,
                                                   "sampling"))
                        break
                    t *= 0.5
                if not moved:
                    break
            if f < best_f:
                best_f, best_x = f, x.copy()
        if sampled_ok:
            status = "sampling-converged"

    return best_x, OptimizerTrace(records=tuple(records), status=status,
                                  evaluations=evals)


@dataclass(frozen=True)
class SynthesisOptions:
    starts: int = 5
    seed: int = 0
    init_scale: float = 1.0
    margin: float = 1e-3
    stabilize_max_iter: int = 150
    optimize_max_iter: int = 80
    sampling_max_iter: int = 5
    hinf: HinfOptions = field(default_factory=HinfOptions)
    stability: StabilityOptions = field(default_factory=StabilityOptions)
    threads: int | None = None  # None: read DELAY_HINF_THREADS (0 or unset: auto)


@dataclass(frozen=True)
class StartOutcome:
    index: int
    stabilized: bool
    best_abscissa: float
    norm: float | None
    x: np.ndarray | None
    stabilization_trace: OptimizerTrace
    optimization_trace: OptimizerTrace | None


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    controller: ControllerRealization
    norm: object  # HinfResult for the final controller
    abscissa: object  # StabilityReport for the final controller
    starts_tried: int
    outcomes: tuple


def _worker_count(opts, starts):
    raw = opts.threads
    if raw is None:
        raw = int(os.environ.get(_ENV_THREADS, "0") or "0")
    if raw <= 0:
        raw = min(starts, os.cpu_count() or 1)
    return max(1, min(raw, starts))


def _stabilization_objective(plant, nK, opts):
    guard_opts = replace(opts.stability, max_roots=6)

    def objective(x):
        controller = unpack_controller(x, nK, plant.ny, plant.nu)
        cl = assemble_closed_loop(plant, controller)
        try:
            report = spectral_abscissa(cl, guard_opts)
        except DiscretizationLimitError:
            return np.inf, np.zeros_like(x), False
        try:
            cg = abscissa_gradient(plant, controller, report)
            gvec = pack_controller(
                ControllerRealization(AK=cg.dAK, BK=cg.dBK, CK=cg.dCK))
        except Exception:
            gvec = np.zeros_like(x)
        return report.abscissa, gvec, not report.nonsmooth
    return objective


def _norm_objective(plant, nK, opts):
    # first call runs the full mesh-doubling schedule; later calls reuse the
    # accepted N in single-round mode and seed the predictor with the peak
    # frequencies of the previous iterate
    state = {"N": None, "seeds": ()}
    guard_opts = replace(opts.stability, max_roots=6)

    def objective(x):
        controller = unpack_controller(x, nK, plant.ny, plant.nu)
        cl = assemble_closed_loop(plant, controller)
        try:
            report = spectral_abscissa(cl, guard_opts)
        except DiscretizationLimitError:
            return np.inf, np.zeros_like(x), False
        if report.abscissa >= 0.0:
            return np.inf, np.zeros_like(x), False
        if state["N"] is None:
            hopts = replace(opts.hinf, check_stability=False)
        else:
            hopts = replace(opts.hinf, check_stability=False,
                            single_round=True, N_start=state["N"])
        try:
            result = hinf_norm(cl, hopts, stability_report=report,
                               seed_freqs=state["seeds"])
        except (UnstableSystemError, DiscretizationLimitError):
            return np.inf, np.zeros_like(x), False
        # half the accepted mesh suffices between certificates: the
        # fine-bump verification inside each round catches missed peaks
        state["N"] = max(opts.hinf.N_start, (result.N_used or 0) // 2)
        state["seeds"] = tuple(om for om, _ in result.peaks)
        if not result.peaks:
            # supremum at infinite frequency: locally the norm equals the
            # feedthrough gain, which the controller cannot influence
            return result.norm, np.zeros_like(x), False
        clg = hinf_gradient_closed_loop(cl, result)
        cg = hinf_gradient_controller(plant, controller, clg)
        gvec = pack_controller(
            ControllerRealization(AK=cg.dAK, BK=cg.dBK, CK=cg.dCK))
        return result.norm, gvec, clg.smooth
    return objective


def _run_start(plant, nK, opts, index):
    rng = np.random.default_rng([opts.seed, index])
    dim = nK * nK + nK * plant.ny + plant.nu * nK
    x0 = opts.init_scale * rng.uniform(-1.0, 1.0, dim)

    stab_obj = _stabilization_objective(plant, nK, opts)
    stab_opts = OptimizerOptions(max_iter=opts.stabilize_max_iter,
                                 target=-opts.margin,
                                 sampling_max_iter=opts.sampling_max_iter,
                                 seed=opts.seed + 7919 * index)
    x1, trace1 = minimize_nonsmooth(stab_obj, x0, stab_opts)
    alpha1 = stab_obj(x1)[0]
    if not alpha1 < -opts.margin:
        return StartOutcome(index=index, stabilized=False, best_abscissa=alpha1,
                            norm=None, x=None, stabilization_trace=trace1,
                            optimization_trace=None)

    norm_obj = _norm_objective(plant, nK, opts)
    norm_opts = OptimizerOptions(max_iter=opts.optimize_max_iter,
                                 sampling_max_iter=opts.sampling_max_iter,
                                 seed=opts.seed + 104729 * index)
    x2, trace2 = minimize_nonsmooth(norm_obj, x1, norm_opts)
    value = norm_obj(x2)[0]
    if not np.isfinite(value):
        x2, value = x1, norm_obj(x1)[0]
    return StartOutcome(index=index, stabilized=True, best_abscissa=alpha1,
                        norm=float(value), x=x2, stabilization_trace=trace1,
                        optimization_trace=trace2)


def synthesize(plant, nK, opts=None):
    """Fixed-order controller synthesis by two-phase local optimization.

    Each start draws a random initial controller, minimizes the spectral
    abscissa until the loop is stable with margin, then minimizes the norm
    from there; unstable trial points are rejected inside the line search.
    Starts are independent and may run on a small thread pool
    (``DELAY_HINF_THREADS``; 0 or unset picks a worker per start up to the
    CPU count). The best stable controller across starts is certified with a
    fresh norm computation before being returned.
    """
    if nK < 1:
        raise ValueError(f"controller order must be >= 1, got {nK}")
    opts = opts or SynthesisOptions()
    workers = _worker_count(opts, opts.starts)
    indices = list(range(opts.starts))
    if workers > 1:
        # each start is seeded from (seed, index), so the merge is
        # deterministic regardless of scheduling
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(partial(_run_start, plant, nK, opts),
                                         indices))
        except (OSError, RuntimeError):
            outcomes = [_run_start(plant, nK, opts, i) for i in indices]
    else:
        outcomes = [_run_start(plant, nK, opts, i) for i in indices]

    stabilized = [o for o in outcomes if o.stabilized]
    if not stabilized:
        best = min(o.best_abscissa for o in outcomes)
        raise StabilizationError(
            f"no stabilizing controller found for order nK={nK} "
            f"(best spectral abscissa reached: {best:.6g})",
            best_abscissa=best,
        )
    winner = min(stabilized, key=lambda o: (o.norm, o.index))
    controller = unpack_controller(winner.x, nK, plant.ny, plant.nu)
    cl = assemble_closed_loop(plant, controller)
    report = spectral_abscissa(cl, opts.stability)
    result = hinf_norm(cl, replace(opts.hinf, check_stability=False),
                       stability_report=report)
    return SynthesisResult(controller=controller, norm=result,
                           abscissa=report, starts_tried=opts.starts,
                           outcomes=tuple(outcomes))
