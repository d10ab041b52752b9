"""State-space types for retarded time-delay systems.

Holds the open-loop plant, the fixed-order dynamic output-feedback
controller, and their interconnection, together with evaluation of the
closed-loop transfer matrix on the imaginary axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, FrequencyResponseError


def _as_matrix(value, name, rows=None, cols=None):
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"{name} has {m.shape[0]} rows, expected {rows}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"{name} has {m.shape[1]} columns, expected {cols}")
    m = m.copy()
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class TimeDelayPlant:
    """Retarded time-delay plant.

    Dynamics::

        x'(t) = A[0] x(t) + sum_i A[i] x(t - state_delays[i-1])
                + B1 w(t) + B2 u(t - input_delay)
        z(t)  = C1 x(t) + D11 w(t) + D12 u(t)
        y(t)  = C2 x(t) + D21 w(t) + D22 u(t - feedthrough_delay)

    ``A`` holds m+1 square matrices; ``state_delays`` holds the m state
    delays. All delays are nonnegative and finite.
    """

    A: tuple
    state_delays: tuple
    input_delay: float
    feedthrough_delay: float
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    D21: np.ndarray
    D22: np.ndarray

    def __post_init__(self):
        A = tuple(_as_matrix(a, f"A[{i}]") for i, a in enumerate(self.A))
        if not A:
            raise DimensionError("A must contain at least A[0]")
        n = A[0].shape[0]
        for i, a in enumerate(A):
            if a.shape != (n, n):
                raise DimensionError(f"A[{i}] has shape {a.shape}, expected ({n}, {n})")
        delays = tuple(float(t) for t in self.state_delays)
        if len(delays) != len(A) - 1:
            raise DimensionError(
                f"state_delays has {len(delays)} entries for {len(A) - 1} "
                f"delayed A matrices"
            )
        for name, value in (("input_delay", self.input_delay),
                            ("feedthrough_delay", self.feedthrough_delay)):
            v = float(value)
            if not np.isfinite(v) or v < 0:
                raise DimensionError(f"{name} must be finite and nonnegative, got {value}")
        for i, t in enumerate(delays):
            if not np.isfinite(t) or t < 0:
                raise DimensionError(f"state_delays[{i}] must be finite and nonnegative, got {t}")

        B1 = _as_matrix(self.B1, "B1", rows=n)
        B2 = _as_matrix(self.B2, "B2", rows=n)
        C1 = _as_matrix(self.C1, "C1", cols=n)
        C2 = _as_matrix(self.C2, "C2", cols=n)
        nw, nu = B1.shape[1], B2.shape[1]
        nz, ny = C1.shape[0], C2.shape[0]
        D11 = _as_matrix(self.D11, "D11", rows=nz, cols=nw)
        D12 = _as_matrix(self.D12, "D12", rows=nz, cols=nu)
        D21 = _as_matrix(self.D21, "D21", rows=ny, cols=nw)
        D22 = _as_matrix(self.D22, "D22", rows=ny, cols=nu)

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "state_delays", delays)
        object.__setattr__(self, "input_delay", float(self.input_delay))
        object.__setattr__(self, "feedthrough_delay", float(self.feedthrough_delay))
        for name, m in (("B1", B1), ("B2", B2), ("C1", C1), ("C2", C2),
                        ("D11", D11), ("D12", D12), ("D21", D21), ("D22", D22)):
            object.__setattr__(self, name, m)

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def m(self):
        return len(self.state_delays)

    @property
    def nw(self):
        return self.B1.shape[1]

    @property
    def nu(self):
        return self.B2.shape[1]

    @property
    def nz(self):
        return self.C1.shape[0]

    @property
    def ny(self):
        return self.C2.shape[0]


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    """Dynamic output-feedback controller of fixed order.

    ``x_K'(t) = AK x_K(t) + BK y(t)`` and ``u(t) = CK x_K(t)``. Order zero is
    permitted and means u = 0 (the controller has no state to feed through).
    """

    AK: np.ndarray
    BK: np.ndarray
    CK: np.ndarray

    def __post_init__(self):
        AK = _as_matrix(self.AK, "AK") if np.size(self.AK) else np.zeros((0, 0))
        nK = AK.shape[0]
        if AK.shape != (nK, nK):
            raise DimensionError(f"AK has shape {AK.shape}, expected square")
        BKa = np.asarray(self.BK, dtype=float)
        CKa = np.asarray(self.CK, dtype=float)
        if nK == 0:
            # zero-size reshape cannot infer the free dimension
            BK = np.zeros((0, BKa.shape[1] if BKa.ndim == 2 else 0))
            CK = np.zeros((CKa.shape[0] if CKa.ndim == 2 else 0, 0))
        else:
            BK = BKa.reshape(nK, -1)
            CK = CKa.reshape(-1, nK)
        for name, m in (("AK", AK), ("BK", BK), ("CK", CK)):
            mm = m.copy()
            mm.setflags(write=False)
            object.__setattr__(self, name, mm)

    @property
    def nK(self):
        return self.AK.shape[0]

    @classmethod
    def empty(cls, ny, nu):
        """Order-zero controller (u = 0)."""
        return cls(np.zeros((0, 0)), np.zeros((0, ny)), np.zeros((nu, 0)))


@dataclass(frozen=True, eq=False)
class ClosedLoopSystem:
    """Closed loop from disturbance w to performance output z.

    ``Acl`` holds m+3 matrices: the undelayed part, the m state-delay parts,
    the input-delay part, and the feedthrough-delay part. ``delays`` holds the
    matching m+2 delays; zero delays are kept as explicit entries so the
    indexing of delay terms (and of the gradients taken with respect to them)
    never shifts.
    """

    Acl: tuple
    delays: tuple
    Bcl: np.ndarray
    Ccl: np.ndarray
    Dcl: np.ndarray
    n: int
    nK: int

    def __post_init__(self):
        Acl = tuple(_as_matrix(a, f"Acl[{i}]") for i, a in enumerate(self.Acl))
        ncl = Acl[0].shape[0]
        for i, a in enumerate(Acl):
            if a.shape != (ncl, ncl):
                raise DimensionError(f"Acl[{i}] has shape {a.shape}, expected ({ncl}, {ncl})")
        delays = tuple(float(t) for t in self.delays)
        if len(delays) != len(Acl) - 1:
            raise DimensionError(
                f"{len(delays)} delays given for {len(Acl) - 1} delayed matrices"
            )
        Bcl = _as_matrix(self.Bcl, "Bcl", rows=ncl)
        Ccl = _as_matrix(self.Ccl, "Ccl", cols=ncl)
        Dcl = _as_matrix(self.Dcl, "Dcl", rows=Ccl.shape[0], cols=Bcl.shape[1])
        object.__setattr__(self, "Acl", Acl)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "Bcl", Bcl)
        object.__setattr__(self, "Ccl", Ccl)
        object.__setattr__(self, "Dcl", Dcl)

    @property
    def n_cl(self):
        return self.Acl[0].shape[0]

    @property
    def nw(self):
        return self.Bcl.shape[1]

    @property
    def nz(self):
        return self.Ccl.shape[0]

    @property
    def tau_max(self):
        return max(self.delays) if self.delays else 0.0


@dataclass(frozen=True, eq=False)
class SingularTriple:
    """A singular value of the transfer matrix with unit singular vectors.

    ``multiple`` is set when the value is numerically repeated (relative gap
    below 1e-8); downstream gradient code treats that as a nonsmooth point.
    """

    sigma: float
    w_l: np.ndarray
    w_r: np.ndarray
    multiple: bool = False


def assemble_closed_loop(plant, controller):
    """Connect plant and controller into the delay-difference-free closed loop.

    The closed-loop state is [x; x_K]. Zero delays are retained as explicit
    entries of ``delays``.
    """
    n, nK = plant.n, controller.nK
    if controller.BK.shape[1] != plant.ny:
        raise DimensionError(
            f"BK has {controller.BK.shape[1]} columns, expected ny={plant.ny}"
        )
    if controller.CK.shape[0] != plant.nu:
        raise DimensionError(
            f"CK has {controller.CK.shape[0]} rows, expected nu={plant.nu}"
        )
    Znn = np.zeros((n, nK))
    Zkn = np.zeros((nK, n))
    Zkk = np.zeros((nK, nK))

    A0 = np.block([[plant.A[0], Znn], [controller.BK @ plant.C2, controller.AK]])
    Acl = [A0]
    for Ai in plant.A[1:]:
        Acl.append(np.block([[Ai, Znn], [Zkn, Zkk]]))
    Acl.append(np.block([[np.zeros((n, n)), plant.B2 @ controller.CK], [Zkn, Zkk]]))
    Acl.append(np.block([[np.zeros((n, n)), Znn],
                         [Zkn, controller.BK @ plant.D22 @ controller.CK]]))
    Bcl = np.vstack([plant.B1, controller.BK @ plant.D21])
    Ccl = np.hstack([plant.C1, plant.D12 @ controller.CK])
    delays = plant.state_delays + (plant.input_delay, plant.feedthrough_delay)
    return ClosedLoopSystem(
        Acl=tuple(Acl), delays=delays, Bcl=Bcl, Ccl=Ccl, Dcl=plant.D11,
        n=n, nK=nK,
    )


def characteristic_matrix(cl, lam):
    """Characteristic matrix lam*I - Acl[0] - sum_i Acl[i] exp(-lam*tau_i)."""
    M = lam * np.eye(cl.n_cl) - cl.Acl[0].astype(complex)
    for tau, Ai in zip(cl.delays, cl.Acl[1:]):
        M -= Ai * np.exp(-lam * tau)
    return M


def evaluate_transfer(cl, omega):
    """Closed-loop transfer matrix T_zw(j*omega).

    One complex linear solve per call; the characteristic matrix is never
    inverted explicitly. Raises FrequencyResponseError when j*omega is a
    characteristic root.
    """
    K = characteristic_matrix(cl, 1j * float(omega))
    try:
        X = np.linalg.solve(K, cl.Bcl.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise FrequencyResponseError(
            f"frequency response undefined at omega={omega}: characteristic "
            f"root on the imaginary axis"
        ) from exc
    resid = np.linalg.norm(K @ X - cl.Bcl)
    scale = np.linalg.norm(K) * max(np.linalg.norm(X), 1.0)
    if not np.all(np.isfinite(X)) or resid > 1e-8 * max(scale, 1.0):
        raise FrequencyResponseError(
            f"frequency response undefined at omega={omega}: characteristic "
            f"matrix is numerically singular"
        )
    return cl.Ccl @ X + cl.Dcl


def max_singular_value(cl, omega):
    """Largest singular value of T_zw(j*omega) with unit singular vectors."""
    T = evaluate_transfer(cl, omega)
    U, s, Vh = np.linalg.svd(T)
    multiple = len(s) > 1 and (s[0] - s[1]) < 1e-8 * max(s[0], 1e-300)
    return SingularTriple(sigma=float(s[0]), w_l=U[:, 0], w_r=Vh[0].conj(),
                          multiple=bool(multiple))
