"""H-infinity norm of a stable time-delay closed loop.

Two-step scheme. A prediction step runs a level-set iteration on a
collocation discretization of a delay-Hamiltonian operator whose
imaginary-axis eigenvalues mark frequencies where the transfer matrix has a
singular value equal to the level. A correction step then solves the exact
finite-dimensional nonlinear eigenvalue system by Gauss-Newton, which pins
peak frequency and norm to solver precision independently of the mesh.

A final verification pass rechecks the operator just above the corrected
value with a much smaller level bump, so that near-tied peaks separated by
less than the coarse level increment are not skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import spectral
from .exceptions import (DiscretizationLimitError, LevelSingularityError,
                         UnstableSystemError)
from .model import evaluate_transfer, max_singular_value

_SEED_GRID_POINTS = 40
_LEVEL_MAX_ITER = 60
_VERIFY_ROUNDS = 6
_MAX_CANDIDATES = 10


@dataclass(frozen=True, eq=False)
class HamiltonianTriple:
    """Matrix coefficients of the delay-Hamiltonian eigenvalue problem.

    ``M0`` is Hamiltonian ((J M0)' = J M0 with J = [[0, I], [-I, 0]]); the
    delayed pairs satisfy (J Mi)' = J Mmi. ``Dxi`` is the input-side
    feedthrough Gram matrix Dcl'Dcl - xi^2 I, kept nonsingular by
    construction.
    """

    M0: np.ndarray
    Mi: tuple
    Mmi: tuple
    xi: float
    Dxi: np.ndarray
    delays: tuple


@dataclass(frozen=True, eq=False)
class NepResidual:
    """Evaluator for H(lambda) = lambda*I - M0 - sum(Mi e^{-lam tau} + Mmi e^{lam tau})."""

    triple: HamiltonianTriple

    def value(self, lam):
        t = self.triple
        H = lam * np.eye(t.M0.shape[0]) - t.M0.astype(complex)
        for tau, Mi, Mmi in zip(t.delays, t.Mi, t.Mmi):
            H -= Mi * np.exp(-lam * tau) + Mmi * np.exp(lam * tau)
        return H

    def derivative(self, lam):
        t = self.triple
        Hp = np.eye(t.M0.shape[0], dtype=complex)
        for tau, Mi, Mmi in zip(t.delays, t.Mi, t.Mmi):
            Hp += tau * Mi * np.exp(-lam * tau) - tau * Mmi * np.exp(lam * tau)
        return Hp


@dataclass(frozen=True, eq=False)
class CorrectorState:
    """State of one Gauss-Newton peak correction.

    ``u`` and ``v`` are the two halves of the 2*n_cl eigenvector of the
    Hamiltonian residual; at convergence |u|^2 + |v|^2 = 1 and the stacked
    real residual is below tolerance.
    """

    u: np.ndarray
    v: np.ndarray
    omega: float
    xi: float
    residual_norm: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class HinfResult:
    """Computed norm with its peak data and convergence diagnostics."""

    norm: float
    peaks: tuple  # (omega, SingularTriple) sorted by omega
    N_used: int
    corrector_iterations: int
    converged: bool


@dataclass(frozen=True)
class HinfOptions:
    N_start: int = 10
    N_cap: int = 160
    rel_tol: float = 1e-6
    eps_level: float = 1e-4
    axis_tol: float = 1e-6
    corrector_tol: float = 1e-10
    verify_bump: float = 5e-7
    check_stability: bool = True
    # one predict/correct/verify round at N_start, without the mesh-doubling
    # agreement check; meant for repeated evaluations inside an optimizer
    # loop once an adequate N is known
    single_round: bool = False


def build_hamiltonian_triple(cl, xi):
    """Coefficient matrices of the level-xi Hamiltonian eigenvalue problem.

    Requires xi > 0 away from the singular values of the feedthrough matrix;
    otherwise the two feedthrough Gram matrices become singular and a
    LevelSingularityError asks the caller to perturb the level.
    """
    if not xi > 0:
        raise ValueError(f"level must be positive, got {xi}")
    B, C, D = cl.Bcl, cl.Ccl, cl.Dcl
    nw, nz = B.shape[1], C.shape[0]
    Dxi = D.T @ D - xi**2 * np.eye(nw)
    Sxi = D @ D.T - xi**2 * np.eye(nz)
    tol = 1e-10 * max(1.0, xi**2)
    if min(np.min(np.abs(np.linalg.svd(Dxi, compute_uv=False))),
           np.min(np.abs(np.linalg.svd(Sxi, compute_uv=False)))) < tol:
        raise LevelSingularityError(
            f"level {xi} hits a feedthrough singular value; perturb the level"
        )
    W = np.linalg.inv(Dxi)
    S = np.linalg.inv(Sxi)
    A0 = cl.Acl[0]
    M0 = np.block([
        [A0 - B @ W @ D.T @ C, -B @ W @ B.T],
        [xi**2 * C.T @ S @ C, -A0.T + C.T @ D @ W @ B.T],
    ])
    n = cl.n_cl
    Z = np.zeros((n, n))
    Mi, Mmi = [], []
    for Ai in cl.Acl[1:]:
        Mi.append(np.block([[Ai, Z], [Z, Z]]))
        Mmi.append(np.block([[Z, Z], [Z, -Ai.T]]))
    return HamiltonianTriple(M0=M0, Mi=tuple(Mi), Mmi=tuple(Mmi),
                             xi=float(xi), Dxi=Dxi, delays=cl.delays)


def _dM0_dxi(cl, xi):
    """Analytic level derivative of M0, used by the corrector Jacobian."""
    B, C, D = cl.Bcl, cl.Ccl, cl.Dcl
    nw, nz = B.shape[1], C.shape[0]
    W = np.linalg.inv(D.T @ D - xi**2 * np.eye(nw))
    S = np.linalg.inv(D @ D.T - xi**2 * np.eye(nz))
    W2, S2 = W @ W, S @ S
    return np.block([
        [-2 * xi * (B @ W2 @ D.T @ C), -2 * xi * (B @ W2 @ B.T)],
        [2 * xi * (C.T @ (S + xi**2 * S2) @ C), 2 * xi * (C.T @ D @ W2 @ B.T)],
    ])


def level_operator_matrix(cl, xi, N):
    """Collocation matrix of the level-xi operator on [-tau_max, tau_max].

    For a delay-free loop the operator degenerates to the finite Hamiltonian
    matrix M0 + sum(Mi + Mmi), which is returned directly.
    """
    triple = build_hamiltonian_triple(cl, xi)
    if cl.tau_max == 0.0:
        M = triple.M0.copy()
        for Mi, Mmi in zip(triple.Mi, triple.Mmi):
            M += Mi + Mmi
        return M
    mesh = spectral.build_mesh(N, cl.tau_max)
    diff = spectral.differentiation_matrix(mesh)
    bd = 2 * cl.n_cl
    terms = []
    for tau, Mi, Mmi in zip(triple.delays, triple.Mi, triple.Mmi):
        terms.append((-tau, Mi))
        terms.append((tau, Mmi))
    row = spectral.boundary_block_row(diff, bd, triple.M0, terms,
                                      boundary_index=mesh.zero_index)
    return spectral.discretize_block_operator(diff, bd, row,
                                              boundary_index=mesh.zero_index)


def _axis_crossings(cl, level, N, axis_tol):
    """Nonnegative frequencies of imaginary-axis eigenvalues at a level.

    Nudges the level upward a few times if it lands on a feedthrough
    singular value.
    """
    lvl = level
    for _ in range(4):
        try:
            L = level_operator_matrix(cl, lvl, N)
            break
        except LevelSingularityError:
            lvl *= 1.0 + 3e-8
    else:
        raise LevelSingularityError(
            f"could not move level {level} off a feedthrough singular value"
        )
    ev = np.linalg.eigvals(L)
    on_axis = ev[np.abs(ev.real) <= axis_tol * (1.0 + np.abs(ev))]
    if on_axis.size == 0:
        return np.empty(0)
    om = np.unique(np.round(np.abs(on_axis.imag), 12))
    return om


def _seed_grid(cl, extra=()):
    scale = np.linalg.norm(cl.Acl[0], 2) + sum(np.linalg.norm(A, 2) for A in cl.Acl[1:])
    w_cap = 10.0 * max(scale, 0.1)
    grid = np.concatenate([[0.0],
                           np.logspace(-2.0, np.log10(w_cap), _SEED_GRID_POINTS),
                           np.asarray(list(extra), dtype=float)])
    return np.unique(grid)


def _sigma(cl, omega):
    return max_singular_value(cl, omega).sigma


def predict_norm(cl, N, eps_level=1e-4, axis_tol=1e-6, seed_freqs=()):
    """Level-set estimate of the norm and of candidate peak frequencies.

    Starts from the largest singular value sampled on a coarse seed grid
    (always including omega = 0), then repeatedly raises the level by a
    small bump, collects the imaginary-axis eigenvalue crossings of the
    discretized operator, and re-evaluates the singular value at crossing
    midpoints. Returns the final level (a singular value actually attained,
    hence a lower bound) together with the frequencies of the maximizing
    candidates. A flat response with no crossings returns the seed maximum.
    """
    grid = _seed_grid(cl, seed_freqs)
    vals = np.array([_sigma(cl, w) for w in grid])
    k = int(np.argmax(vals))
    xi, freqs = float(vals[k]), [float(grid[k])]
    if xi <= 0.0:
        return 0.0, [0.0]  # identically zero response
    window = max(100.0 * eps_level, 1e-3)
    for _ in range(_LEVEL_MAX_ITER):
        level = xi * (1.0 + 2.0 * eps_level)
        om = _axis_crossings(cl, level, N, axis_tol)
        if om.size == 0:
            break
        cands = list(om) + [0.5 * (a + b) for a, b in zip(om[:-1], om[1:])]
        cvals = np.array([_sigma(cl, w) for w in cands])
        best = float(np.max(cvals))
        keep = [float(w) for w, v in zip(cands, cvals) if v >= best * (1.0 - window)]
        keep = sorted(keep, key=lambda w: -_sigma(cl, w))[:_MAX_CANDIDATES]
        if best <= xi * (1.0 + eps_level):
            if best > xi:
                xi, freqs = best, keep
            else:
                freqs = sorted(set(freqs + keep))[:_MAX_CANDIDATES]
            break
        xi, freqs = best, keep
    return xi, sorted(set(freqs))


def _gauss_newton_peak(cl, xi0, omega0, tol, max_iter=50):
    """Correct one approximate peak by Gauss-Newton on the real-augmented system.

    Unknowns are the stacked eigenvector halves (u, v), the frequency, and
    the level; the system adds a norm constraint, a phase pin on the largest
    initial eigenvector component, and the tangency condition
    Im{v* (I + sum tau_i Acl_i e^{-j w tau_i}) u} = 0, which is the
    left-times-derivative-times-right scalar of the Hamiltonian residual.
    The system is overdetermined by one and has a zero-residual solution at
    a peak, so convergence is quadratic near it.
    """
    n = cl.n_cl
    n2 = 2 * n
    delays = cl.delays
    Amats = cl.Acl[1:]

    def pieces(xi):
        triple = build_hamiltonian_triple(cl, xi)
        return NepResidual(triple), _dM0_dxi(cl, xi)

    def tangency(x, omega):
        u, v = x[:n], x[n:]
        P = np.eye(n, dtype=complex)
        dP = np.zeros((n, n), dtype=complex)
        for tau, Ai in zip(delays, Amats):
            e = np.exp(-1j * omega * tau)
            P += tau * Ai * e
            dP += -1j * tau**2 * Ai * e
        return P, dP

    def residual(res, x, omega, pin):
        H = res.value(1j * omega)
        Hx = H @ x
        P, dP = tangency(x, omega)
        u, v = x[:n], x[n:]
        g = float(np.imag(v.conj() @ (P @ u)))
        r = np.concatenate([Hx.real, Hx.imag,
                            [float((x.conj() @ x).real - 1.0), float(x[pin].imag), g]])
        return r, H, P, dP

    res, dM0 = pieces(xi0)
    H0 = res.value(1j * omega0)
    _, _, Vh = np.linalg.svd(H0)
    x = Vh[-1].conj()
    u_abs = np.abs(x[:n])
    if np.max(u_abs) > 1e-8:
        pin = int(np.argmax(u_abs))
    else:
        pin = n + int(np.argmax(np.abs(x[n:])))
    x = x * np.exp(-1j * np.angle(x[pin])) if abs(x[pin]) > 0 else x

    xi, omega = float(xi0), float(omega0)
    r, H, P, dP = residual(res, x, omega, pin)
    it = 0
    while np.linalg.norm(r) > tol and it < max_iter:
        it += 1
        Hp = res.derivative(1j * omega)
        dHx_dw = 1j * (Hp @ x)
        dHx_dxi = -(dM0 @ x)
        J = np.zeros((2 * n2 + 3, 2 * n2 + 2))
        J[:n2, :n2] = H.real
        J[:n2, n2:2 * n2] = -H.imag
        J[n2:2 * n2, :n2] = H.imag
        J[n2:2 * n2, n2:2 * n2] = H.real
        J[:n2, -2], J[n2:2 * n2, -2] = dHx_dw.real, dHx_dw.imag
        J[:n2, -1], J[n2:2 * n2, -1] = dHx_dxi.real, dHx_dxi.imag
        J[2 * n2, :n2] = 2.0 * x.real
        J[2 * n2, n2:2 * n2] = 2.0 * x.imag
        J[2 * n2 + 1, n2 + pin] = 1.0
        u, v = x[:n], x[n:]
        row = v.conj() @ P
        q = P @ u
        J[2 * n2 + 2, :n] = row.imag
        J[2 * n2 + 2, n:n2] = q.imag
        J[2 * n2 + 2, n2:n2 + n] = row.real
        J[2 * n2 + 2, n2 + n:2 * n2] = -q.real
        J[2 * n2 + 2, -2] = float(np.imag(v.conj() @ (dP @ u)))
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)

        accepted = False
        t = 1.0
        for _ in range(25):
            x_t = x + t * (step[:n2] + 1j * step[n2:2 * n2])
            omega_t = omega + t * step[-2]
            xi_t = xi + t * step[-1]
            if xi_t > 0:
                try:
                    res_t, dM0_t = pieces(xi_t)
                except LevelSingularityError:
                    t *= 0.5
                    continue
                r_t, H_t, P_t, dP_t = residual(res_t, x_t, omega_t, pin)
                if np.linalg.norm(r_t) < np.linalg.norm(r):
                    x, omega, xi = x_t, omega_t, xi_t
                    r, H, P, dP = r_t, H_t, P_t, dP_t
                    res, dM0 = res_t, dM0_t
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
    rnorm = float(np.linalg.norm(r))
    return CorrectorState(u=x[:n], v=x[n:], omega=float(omega), xi=float(xi),
                          residual_norm=rnorm, iterations=it,
                          converged=rnorm <= tol)


def _scalar_refine(cl, omega0):
    """Fallback local maximization of the top singular value near omega0."""
    width = 0.5 * (1.0 + abs(omega0))
    lo, hi = max(0.0, omega0 - width), omega0 + width
    opt = minimize_scalar(lambda w: -_sigma(cl, w), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return float(opt.x)


def correct_peaks(cl, xi0, freqs, tol=1e-10):
    """Correct candidate peaks to solver precision and assemble the result.

    Each candidate frequency seeds one Gauss-Newton solve started from the
    smallest-singular-value vector of the Hamiltonian residual at that
    frequency. Candidates whose solve fails (or whose level would hit a
    feedthrough singular value) fall back to scalar maximization of the top
    singular value and mark the result unconverged. The returned norm is the
    maximal corrected value; the peak list holds every frequency achieving
    it within tolerance.
    """
    total_iters = 0
    entries = []  # (omega, sigma, gn_converged)
    for w0 in freqs:
        s0 = _sigma(cl, float(w0))
        xi_start = s0 if s0 > 0 else max(xi0, 1e-12)
        try:
            state = _gauss_newton_peak(cl, xi_start, float(w0), tol)
            total_iters += state.iterations
        except LevelSingularityError:
            state = None
        if state is not None and state.converged:
            omega = abs(state.omega)
            entries.append((omega, _sigma(cl, omega), True))
        else:
            omega = _scalar_refine(cl, float(w0))
            entries.append((omega, _sigma(cl, omega), False))
    if not entries:
        raise ValueError("no candidate frequencies to correct")
    norm = max(s for _, s, _ in entries)
    peak_tol = max(tol * (1.0 + norm), 1e-12)
    chosen = {}
    converged = True
    for omega, s, ok in entries:
        if norm - s <= peak_tol:
            key = round(omega / (1.0 + omega), 9)
            if key not in chosen:
                chosen[key] = (omega, ok)
                converged = converged and ok
    peaks = tuple(sorted((om, max_singular_value(cl, om)) for om, _ in chosen.values()))
    return HinfResult(norm=float(norm), peaks=peaks, N_used=0,
                      corrector_iterations=total_iters, converged=converged)


def _correct_and_verify(cl, xi, freqs, N, opts):
    """Corrector plus fine-bump level recheck.

    The coarse level bump can step over a peak whose value lies within the
    bump of the current best; after correction the operator is therefore
    re-examined just above the corrected value, and any improving crossings
    are corrected in turn.
    """
    result = correct_peaks(cl, xi, freqs, tol=opts.corrector_tol)
    for _ in range(_VERIFY_ROUNDS):
        level = result.norm * (1.0 + max(opts.verify_bump, 1e-12))
        om = _axis_crossings(cl, level, N, opts.axis_tol)
        if om.size == 0:
            break
        cands = list(om) + [0.5 * (a + b) for a, b in zip(om[:-1], om[1:])]
        vals = [_sigma(cl, w) for w in cands]
        improving = [w for w, v in zip(cands, vals)
                     if v > result.norm * (1.0 + 1e-12)]
        if not improving:
            break
        improving = sorted(improving, key=lambda w: -_sigma(cl, w))[:_MAX_CANDIDATES]
        nxt = correct_peaks(cl, result.norm, improving, tol=opts.corrector_tol)
        if nxt.norm <= result.norm * (1.0 + 1e-14):
            break
        result = replace(nxt, corrector_iterations=result.corrector_iterations
                         + nxt.corrector_iterations)
    return result


def _flat_result(cl, norm, omega):
    triple = max_singular_value(cl, omega)
    return HinfResult(norm=float(norm), peaks=((float(omega), triple),),
                      N_used=0, corrector_iterations=0, converged=True)


def _apply_feedthrough_floor(result, sigma_d):
    """Classify a supremum that is only approached as omega grows.

    The norm is never below the feedthrough gain (the transfer matrix tends
    to the feedthrough as omega grows); when the best corrected value does
    not exceed that gain, no finite peak attains the supremum and the peak
    list is emptied.
    """
    if result.norm <= sigma_d * (1.0 + 1e-9):
        return HinfResult(norm=max(result.norm, sigma_d), peaks=(),
                          N_used=result.N_used,
                          corrector_iterations=result.corrector_iterations,
                          converged=result.converged)
    return result


def hinf_norm(cl, opts=None, stability_report=None, seed_freqs=()):
    """H-infinity norm of an exponentially stable closed loop.

    Runs the predictor at increasing mesh resolution and accepts once two
    successive corrected norms agree to ``opts.rel_tol`` relative. The
    stability precondition is checked unless a precomputed report is passed
    in. Delay-free loops reduce to a single exact Hamiltonian eigenvalue
    round (``N_used = 0``). ``seed_freqs`` extends the predictor seed grid,
    which saves level iterations when peak frequencies of a nearby system
    are already known.
    """
    opts = opts or HinfOptions()
    if stability_report is None and opts.check_stability:
        from .stability import spectral_abscissa  # deferred to avoid cycle
        stability_report = spectral_abscissa(cl)
    if stability_report is not None and stability_report.abscissa >= 0.0:
        raise UnstableSystemError(
            f"H-infinity norm undefined: spectral abscissa >= 0 "
            f"(alpha = {stability_report.abscissa:.6g})"
        )

    sigma_d = float(np.linalg.svd(cl.Dcl, compute_uv=False)[0]) if cl.Dcl.size else 0.0

    if cl.tau_max == 0.0:
        xi, freqs = predict_norm(cl, 1, opts.eps_level, opts.axis_tol,
                                 seed_freqs=seed_freqs)
        if xi <= sigma_d * (1.0 + 10.0 * opts.eps_level) and xi > 0.0:
            flat = all(abs(_sigma(cl, w) - xi) <= 1e-12 * (1.0 + xi)
                       for w in (0.0, 1.0, 10.0))
            if flat:
                return _flat_result(cl, xi, freqs[0])
        if xi == 0.0:
            return _flat_result(cl, 0.0, 0.0)
        result = _correct_and_verify(cl, xi, freqs, 1, opts)
        return _apply_feedthrough_floor(replace(result, N_used=0), sigma_d)

    N = opts.N_start
    prev = None
    seeds = tuple(seed_freqs)
    while N <= opts.N_cap:
        xi, freqs = predict_norm(cl, N, opts.eps_level, opts.axis_tol,
                                 seed_freqs=seeds)
        if xi == 0.0:
            return _flat_result(cl, 0.0, 0.0)
        if xi <= sigma_d * (1.0 + 10.0 * opts.eps_level):
            probes = (0.0, 1.0, 10.0, 1.0 / cl.tau_max, 10.0 / cl.tau_max)
            if all(abs(_sigma(cl, w) - xi) <= 1e-12 * (1.0 + xi)
                   for w in probes):
                return _flat_result(cl, xi, freqs[0])
        result = _apply_feedthrough_floor(
            _correct_and_verify(cl, xi, freqs, N, opts), sigma_d)
        if opts.single_round or (
                prev is not None
                and abs(result.norm - prev.norm)
                <= opts.rel_tol * max(abs(result.norm), 1e-300)):
            return replace(result, N_used=N)
        prev = replace(result, N_used=N)
        seeds = tuple(om for om, _ in result.peaks)
        N *= 2
    raise DiscretizationLimitError(
        f"corrected norms did not stabilize up to N = {opts.N_cap}", best=prev
    )
