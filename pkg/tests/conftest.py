"""Shared fixtures: benchmark systems and random stable corpus generators."""

import numpy as np
import pytest

from delayhinf.benchmarks import (mimo_fourstate_controller,
                                  mimo_fourstate_plant, siso_delay_controller,
                                  siso_delay_plant)
from delayhinf.model import (ClosedLoopSystem, ControllerRealization,
                             TimeDelayPlant, assemble_closed_loop)
from delayhinf.stability import spectral_abscissa


def scalar_lag_loop():
    """1/(s+1) as a closed loop (no delays active, order-zero controller)."""
    plant = TimeDelayPlant(
        A=(np.array([[-1.0]]),), state_delays=(), input_delay=0.0,
        feedthrough_delay=0.0, B1=[[1.0]], B2=[[0.0]], C1=[[1.0]],
        C2=[[0.0]], D11=[[0.0]], D12=[[0.0]], D21=[[0.0]], D22=[[0.0]],
    )
    return assemble_closed_loop(plant, ControllerRealization.empty(1, 1))


def delayed_scalar_loop():
    """x'(t) = -x(t-1) + w, z = x. Rightmost roots known via Lambert W."""
    plant = TimeDelayPlant(
        A=(np.array([[0.0]]), np.array([[-1.0]])), state_delays=(1.0,),
        input_delay=0.0, feedthrough_delay=0.0, B1=[[1.0]], B2=[[0.0]],
        C1=[[1.0]], C2=[[0.0]], D11=[[0.0]], D12=[[0.0]], D21=[[0.0]],
        D22=[[0.0]],
    )
    return assemble_closed_loop(plant, ControllerRealization.empty(1, 1))


def random_stable_loop(rng, n_max=4, m_max=2, io_max=2, with_feedthrough=True):
    """Random exponentially stable closed loop, built directly.

    The undelayed matrix is shifted so its logarithmic norm dominates the
    summed norms of the delayed matrices, which guarantees stability for
    every delay value.
    """
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    nw = int(rng.integers(1, io_max + 1))
    nz = int(rng.integers(1, io_max + 1))
    A0 = rng.uniform(-1, 1, (n, n))
    Ais = [0.5 * rng.uniform(-1, 1, (n, n)) for _ in range(m)]
    shift = np.linalg.norm(A0, 2) + sum(np.linalg.norm(a, 2) for a in Ais) + 0.3
    A0 = A0 - shift * np.eye(n)
    delays = tuple(float(t) for t in rng.uniform(0.1, 2.0, m))
    B = rng.uniform(-1, 1, (n, nw))
    C = rng.uniform(-1, 1, (nz, n))
    D = rng.uniform(-0.5, 0.5, (nz, nw)) if with_feedthrough else np.zeros((nz, nw))
    return ClosedLoopSystem(Acl=tuple([A0] + Ais), delays=delays,
                            Bcl=B, Ccl=C, Dcl=D, n=n, nK=0)


def random_stable_pair(rng, n_max=3, m_max=1, nK_max=2, require_margin=0.05):
    """Random (plant, controller) pair with a stable closed loop.

    Rejection sampling against the certified abscissa; the rng sequence makes
    the outcome deterministic.
    """
    for _ in range(200):
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(0, m_max + 1))
        nK = int(rng.integers(1, nK_max + 1))
        nw = int(rng.integers(1, 3))
        nz = int(rng.integers(1, 3))
        ny, nu = 1, 1
        A0 = rng.uniform(-1, 1, (n, n))
        Ais = tuple(0.4 * rng.uniform(-1, 1, (n, n)) for _ in range(m))
        shift = (np.linalg.norm(A0, 2)
                 + sum(np.linalg.norm(a, 2) for a in Ais) + 1.2)
        plant = TimeDelayPlant(
            A=(A0 - shift * np.eye(n),) + Ais,
            state_delays=tuple(float(t) for t in rng.uniform(0.2, 1.5, m)),
            input_delay=float(rng.uniform(0, 0.5)),
            feedthrough_delay=float(rng.uniform(0, 0.5)),
            B1=rng.uniform(-1, 1, (n, nw)),
            B2=rng.uniform(-1, 1, (n, nu)),
            C1=rng.uniform(-1, 1, (nz, n)),
            C2=rng.uniform(-1, 1, (ny, n)),
            D11=0.3 * rng.uniform(-1, 1, (nz, nw)),
            D12=0.3 * rng.uniform(-1, 1, (nz, nu)),
            D21=0.3 * rng.uniform(-1, 1, (ny, nw)),
            D22=0.2 * rng.uniform(-1, 1, (ny, nu)),
        )
        AK = rng.uniform(-0.5, 0.5, (nK, nK)) - (1.0 + rng.uniform(0, 1)) * np.eye(nK)
        controller = ControllerRealization(
            AK=AK, BK=0.4 * rng.uniform(-1, 1, (nK, ny)),
            CK=0.4 * rng.uniform(-1, 1, (nu, nK)),
        )
        cl = assemble_closed_loop(plant, controller)
        if spectral_abscissa(cl).abscissa < -require_margin:
            return plant, controller
    raise RuntimeError("failed to draw a stable random pair")


@pytest.fixture(scope="session")
def siso_loop():
    return assemble_closed_loop(siso_delay_plant(), siso_delay_controller())


@pytest.fixture(scope="session")
def mimo_loop():
    return assemble_closed_loop(mimo_fourstate_plant(), mimo_fourstate_controller())
