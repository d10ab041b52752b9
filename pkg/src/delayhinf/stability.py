"""Spectral abscissa of a time-delay closed loop.

Discretizes the solution-operator generator on [-tau_max, 0] with the same
Chebyshev collocation machinery used for the norm computation, then corrects
each candidate rightmost root by a bordered Newton iteration on the exact
characteristic matrix. Retarded systems have finitely many characteristic
roots to the right of any vertical line, so a real-part window around the
best candidate is a sound search region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import spectral
from .exceptions import DefectiveRootError, DiscretizationLimitError
from .model import characteristic_matrix

_ROOT_DEDUP_TOL = 1e-6
_TIE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CharacteristicResidual:
    """Evaluator for M(lam) = lam*I - Acl[0] - sum_i Acl[i] exp(-lam*tau_i)."""

    Acl: tuple
    delays: tuple

    @classmethod
    def from_closed_loop(cls, cl):
        return cls(Acl=cl.Acl, delays=cl.delays)

    def value(self, lam):
        M = lam * np.eye(self.Acl[0].shape[0]) - self.Acl[0].astype(complex)
        for tau, Ai in zip(self.delays, self.Acl[1:]):
            M -= Ai * np.exp(-lam * tau)
        return M

    def derivative(self, lam):
        Mp = np.eye(self.Acl[0].shape[0], dtype=complex)
        for tau, Ai in zip(self.delays, self.Acl[1:]):
            Mp += tau * Ai * np.exp(-lam * tau)
        return Mp


@dataclass(frozen=True, eq=False)
class CorrectedRoot:
    """A characteristic root with right/left nullvectors of M(lam).

    ``converged`` is False when the Newton correction diverged and the root
    is only accurate to discretization level.
    """

    lam: complex
    x: np.ndarray
    y: np.ndarray
    converged: bool
    residual: float


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Rightmost characteristic roots and the spectral abscissa.

    ``rightmost_roots`` keeps the representatives with nonnegative imaginary
    part, sorted by descending real part. ``nonsmooth`` marks a tie between
    distinct rightmost roots, where the abscissa is not differentiable.
    """

    abscissa: float
    rightmost_roots: tuple
    N_used: int
    converged: bool
    nonsmooth: bool


@dataclass(frozen=True)
class StabilityOptions:
    abs_tol: float = 1e-8
    N_start: int = 10
    N_cap: int = 160
    max_roots: int = 20


def generator_matrix(cl, N):
    """Collocation matrix of the DDE generator on [-tau_max, 0].

    Interior rows differentiate the interpolant; the row at the right
    endpoint splices in x'(0) = Acl[0] x(0) + sum_i Acl[i] x(-tau_i).
    """
    count = 2 * N + 1
    pts = spectral.chebyshev_points(count, -cl.tau_max, 0.0)
    diff = spectral.differentiation_on(pts)
    boundary = count - 1  # right endpoint is exactly 0
    terms = [(-tau, Ai) for tau, Ai in zip(cl.delays, cl.Acl[1:])]
    row = spectral.boundary_block_row(diff, cl.n_cl, cl.Acl[0], terms,
                                      boundary_index=boundary)
    return spectral.discretize_block_operator(diff, cl.n_cl, row,
                                              boundary_index=boundary)


def newton_correct_root(res, lambda0, tol=1e-12, max_iter=50):
    """Refine an approximate characteristic root by bordered Newton.

    Solves {M(lam) x = 0, c* x = 1} with c fixed to the initial nullvector,
    which keeps the Jacobian square and nonsingular at simple roots. Returns
    the root with right and left nullvectors; divergence is flagged rather
    than raised, keeping the discretization-level estimate.
    """
    lam = complex(lambda0)
    M = res.value(lam)
    scale = max(np.linalg.norm(M), 1.0)
    _, _, Vh = np.linalg.svd(M)
    x = Vh[-1].conj()
    c = x.copy()
    converged = False
    rel = np.linalg.norm(M @ x) / scale
    rel0 = rel
    for _ in range(max_iter):
        if rel <= tol:
            converged = True
            break
        Mp = res.derivative(lam)
        J = np.zeros((res.Acl[0].shape[0] + 1,) * 2, dtype=complex)
        J[:-1, :-1] = M
        J[:-1, -1] = Mp @ x
        J[-1, :-1] = c.conj()
        rhs = np.concatenate([-(M @ x), [1.0 - c.conj() @ x]])
        try:
            d = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        x = x + d[:-1]
        lam = lam + d[-1]
        M = res.value(lam)
        scale = max(np.linalg.norm(M), 1.0)
        rel = np.linalg.norm(M @ x) / (scale * max(np.linalg.norm(x), 1e-300))
        if not np.isfinite(rel) or rel > 1e6 * max(rel0, 1e-16):
            break
    else:
        converged = rel <= tol
    if rel <= 100 * tol:
        converged = True
    U, _, Vh = np.linalg.svd(res.value(lam))
    x = Vh[-1].conj()
    y = U[:, -1]
    rel = float(np.linalg.norm(res.value(lam) @ x) / scale)
    return CorrectedRoot(lam=lam, x=x, y=y, converged=bool(converged), residual=rel)


def _rightmost_from_dense(cl):
    """Delay-free branch: dense eigenvalue problem on the summed matrix."""
    A = cl.Acl[0].copy()
    for Ai in cl.Acl[1:]:
        A = A + Ai
    ev, vl, vr = sla.eig(A, left=True, right=True)
    order = np.argsort(-ev.real)
    res = CharacteristicResidual.from_closed_loop(cl)
    roots = []
    for k in order:
        lam = ev[k]
        if lam.imag < -1e-12:
            continue
        x = vr[:, k] / np.linalg.norm(vr[:, k])
        y = vl[:, k] / np.linalg.norm(vl[:, k])
        rel = float(np.linalg.norm(res.value(lam) @ x) / max(np.linalg.norm(res.value(lam)), 1.0))
        roots.append(CorrectedRoot(lam=lam, x=x, y=y, converged=True, residual=rel))
    return roots


def spectral_abscissa(cl, opts=None):
    """Spectral abscissa with certified rightmost roots.

    Doubles the mesh until the corrected abscissa is stable to
    ``opts.abs_tol``. All delays zero reduces to a dense eigenvalue problem,
    reported with ``N_used = 0``.
    """
    opts = opts or StabilityOptions()
    if cl.tau_max == 0.0:
        roots = _rightmost_from_dense(cl)
        return _make_report(roots, N_used=0, converged=True)

    res = CharacteristicResidual.from_closed_loop(cl)
    N = opts.N_start
    prev_alpha = None
    prev_report = None
    while N <= opts.N_cap:
        G = generator_matrix(cl, N)
        ev = np.linalg.eigvals(G)
        # the system is real, so roots pair under conjugation; fold the
        # candidates into the closed upper half plane before correcting
        ev = np.where(ev.imag < 0, ev.conj(), ev)
        ev = ev[np.argsort(-ev.real)]
        alpha_guess = ev[0].real
        window = ev[ev.real >= alpha_guess - 0.1 * (1.0 + abs(alpha_guess))]
        window = window[:2 * opts.max_roots]
        starts = []
        for lam0 in window:
            if not any(abs(lam0 - s) < 1e-9 * (1 + abs(lam0)) for s in starts):
                starts.append(lam0)
        roots = []
        for lam0 in starts:
            root = newton_correct_root(res, lam0)
            if root.lam.imag < 0:
                root = CorrectedRoot(lam=np.conj(root.lam), x=root.x.conj(),
                                     y=root.y.conj(), converged=root.converged,
                                     residual=root.residual)
            if any(abs(root.lam - r.lam) < _ROOT_DEDUP_TOL * (1 + abs(root.lam))
                   for r in roots):
                continue
            roots.append(root)
        roots = sorted(roots, key=lambda r: -r.lam.real)[:opts.max_roots]
        alpha = max(r.lam.real for r in roots)
        report = _make_report(roots, N_used=N,
                              converged=all(r.converged for r in roots[:3]))
        if prev_alpha is not None and abs(alpha - prev_alpha) <= opts.abs_tol:
            return report
        prev_alpha, prev_report = alpha, report
        N *= 2
    raise DiscretizationLimitError(
        f"spectral abscissa did not stabilize up to N = {opts.N_cap}",
        best=prev_report,
    )


def _make_report(roots, N_used, converged):
    alpha = max(r.lam.real for r in roots)
    top = [r for r in roots if r.lam.real >= alpha - _TIE_TOL * (1.0 + abs(alpha))]
    distinct = {round(abs(r.lam.imag), 9) for r in top}
    nonsmooth = len(distinct) > 1
    roots = tuple(sorted(roots, key=lambda r: (-r.lam.real, -abs(r.lam.imag))))
    return StabilityReport(abscissa=float(alpha), rightmost_roots=roots,
                           N_used=N_used, converged=converged,
                           nonsmooth=nonsmooth)


def abscissa_gradient(plant, controller, report):
    """Gradient of the spectral abscissa with respect to controller matrices.

    Uses the eigenvalue perturbation formula at the reported rightmost root
    (largest |Im| among tied ones; the conjugate gives the same real part),
    then maps the closed-loop derivative blocks through the same selectors
    as the norm gradient chain rule.
    """
    from .grad import ControllerGradient, controller_chain_rule
    from .model import assemble_closed_loop

    alpha = report.abscissa
    top = [r for r in report.rightmost_roots
           if r.lam.real >= alpha - _TIE_TOL * (1.0 + abs(alpha))]
    root = max(top, key=lambda r: abs(r.lam.imag))
    lam, x, y = root.lam, root.x, root.y
    cl = assemble_closed_loop(plant, controller)
    res = CharacteristicResidual.from_closed_loop(cl)
    denom = y.conj() @ (res.derivative(lam) @ x)
    if abs(denom) <= 1e-12 * max(np.linalg.norm(res.derivative(lam)), 1.0):
        raise DefectiveRootError("derivative undefined at defective root")
    outer = np.outer(y.conj(), x) / denom
    dAcl = [np.real(outer)]
    for tau in cl.delays:
        dAcl.append(np.real(outer * np.exp(-lam * tau)))
    dAK, dBK, dCK = controller_chain_rule(plant, controller, dAcl, None, None)
    return ControllerGradient(dAK=dAK, dBK=dBK, dCK=dCK)
