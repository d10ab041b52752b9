"""Exact gradients of the closed-loop H-infinity norm.

At a smooth point (unique peak frequency, simple top singular value) the
norm is differentiable; its derivative with respect to each closed-loop
matrix follows from singular value perturbation of the transfer matrix at
the peak, and block selectors chain those derivatives down to the
controller matrices. The resolvent adjoint actions are obtained from two
complex solves; the resolvent is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .model import characteristic_matrix


@dataclass(frozen=True, eq=False)
class ClosedLoopGradient:
    """Norm derivatives with respect to the closed-loop matrices.

    ``smooth`` is False when the peak is tied or the top singular value is
    numerically multiple; the entries are then one Clarke subgradient
    representative (the gradient of the chosen maximizer).
    """

    dAcl: tuple
    dBcl: np.ndarray
    dCcl: np.ndarray
    dDcl: np.ndarray
    at_peak: tuple  # (omega, xi, w_l, w_r)
    smooth: bool


@dataclass(frozen=True, eq=False)
class ControllerGradient:
    dAK: np.ndarray
    dBK: np.ndarray
    dCK: np.ndarray


def hinf_gradient_closed_loop(cl, result):
    """Gradient blocks of the norm at the computed peak.

    With M the resolvent at the peak frequency and (w_l, w_r) the singular
    vector pair of the top singular value,

        d/dAcl[0] = Re(M* Ccl' w_l  w_r* Bcl' M*) / (w_r* w_r)
        d/dAcl[i] = the same times exp(+j omega tau_i)
        d/dBcl    = Re(M* Ccl' w_l  w_r*) / (w_r* w_r)
        d/dCcl    = Re(w_l  w_r* Bcl' M*) / (w_r* w_r)
        d/dDcl    = Re(w_l  w_r*) / (w_r* w_r)

    The normalization is kept even though the vectors arrive with unit norm.
    """
    if not result.peaks:
        raise ValueError("result carries no peak; gradient undefined")
    omega, triple = max(result.peaks, key=lambda p: p[1].sigma)
    ties = sum(1 for _, t in result.peaks
               if abs(t.sigma - triple.sigma) <= 1e-6 * max(triple.sigma, 1e-300))
    smooth = ties <= 1 and not triple.multiple

    w_l, w_r = triple.w_l, triple.w_r
    K = characteristic_matrix(cl, 1j * omega)
    a = np.linalg.solve(K.conj().T, cl.Ccl.T @ w_l)   # M* Ccl' w_l
    c = np.linalg.solve(K, cl.Bcl @ w_r)              # M Bcl w_r, row is c*
    den = float((w_r.conj() @ w_r).real)
    core = np.outer(a, c.conj())
    dAcl = [np.real(core) / den]
    for tau in cl.delays:
        dAcl.append(np.real(core * np.exp(1j * omega * tau)) / den)
    dBcl = np.real(np.outer(a, w_r.conj())) / den
    dCcl = np.real(np.outer(w_l, c.conj())) / den
    dDcl = np.real(np.outer(w_l, w_r.conj())) / den
    return ClosedLoopGradient(dAcl=tuple(dAcl), dBcl=dBcl, dCcl=dCcl, dDcl=dDcl,
                              at_peak=(float(omega), triple.sigma, w_l, w_r),
                              smooth=smooth)


def controller_chain_rule(plant, controller, dAcl, dBcl, dCcl):
    """Map closed-loop derivative blocks to (dAK, dBK, dCK) selectors.

    The controller matrices enter the closed loop only through fixed block
    positions, so the chain rule reduces to block extraction and constant
    factors. ``dBcl`` and ``dCcl`` may be None for objectives that do not
    depend on them (the spectral abscissa).
    """
    n, nK = plant.n, controller.nK
    m = plant.m
    G0 = dAcl[0]
    Gm1 = dAcl[m + 1]
    Gm2 = dAcl[m + 2]

    dAK = G0[n:, n:]
    dBK = G0[n:, :n] @ plant.C2.T + Gm2[n:, n:] @ controller.CK.T @ plant.D22.T
    if dBcl is not None:
        dBK = dBK + dBcl[n:, :] @ plant.D21.T
    dCK = plant.B2.T @ Gm1[:n, n:] + plant.D22.T @ controller.BK.T @ Gm2[n:, n:]
    if dCcl is not None:
        dCK = dCK + plant.D12.T @ dCcl[:, n:]
    return dAK, dBK, dCK


def hinf_gradient_controller(plant, controller, clg):
    """Norm gradient with respect to the controller matrices."""
    if clg.dAcl[0].shape != (plant.n + controller.nK,) * 2:
        raise DimensionError(
            f"gradient blocks of size {clg.dAcl[0].shape} do not match "
            f"plant order {plant.n} + controller order {controller.nK}"
        )
    dAK, dBK, dCK = controller_chain_rule(plant, controller,
                                          clg.dAcl, clg.dBcl, clg.dCcl)
    return ControllerGradient(dAK=dAK, dBK=dBK, dCK=dCK)
