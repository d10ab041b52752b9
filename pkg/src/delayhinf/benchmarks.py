"""Bundled benchmark systems used by the test corpus, fixtures, and scripts."""

from __future__ import annotations

import numpy as np

from .model import ControllerRealization, TimeDelayPlant


def siso_delay_plant():
    """First-order SISO plant with one state delay.

    x'(t) = -x(t) - 0.5 x(t-1) + w(t) + u(t);  z = x + u;  y = x + w.
    """
    return TimeDelayPlant(
        A=(np.array([[-1.0]]), np.array([[-0.5]])),
        state_delays=(1.0,),
        input_delay=0.0,
        feedthrough_delay=0.0,
        B1=[[1.0]], B2=[[1.0]],
        C1=[[1.0]], C2=[[1.0]],
        D11=[[0.0]], D12=[[1.0]], D21=[[1.0]], D22=[[0.0]],
    )


def siso_delay_controller():
    """First-order controller for the SISO benchmark (stable realization).

    Note the sign of AK: with AK = +3.61 the closed loop has a real
    characteristic root between 0 and 3.61 and is unstable; the stable
    realization AK = -3.61 reproduces the quoted closed-loop norm of about
    0.065. Tooling never alters user-supplied signs; this constructor simply
    ships the stable variant.
    """
    return ControllerRealization(AK=[[-3.61]], BK=[[1.39]], CK=[[-0.83]])


def mimo_fourstate_plant():
    """Fourth-order two-disturbance plant with three state delays.

    State delays 3.2, 3.4, 3.9 and an input delay of 0.2 that also applies
    to the measured-output feedthrough.
    """
    A0 = np.array([
        [-4.4656, -0.4271, 0.4427, -0.1854],
        [-0.8601, -5.6257, 0.8577, -0.5210],
        [0.9001, -0.7177, -6.5358, 0.0417],
        [-0.6836, 0.0242, 0.4997, -3.5618],
    ])
    A1 = np.array([
        [0.6848, -0.0618, 0.5399, 0.5057],
        [0.3259, -0.3810, 0.6592, -0.0066],
        [0.6325, 0.3752, 0.4122, 0.7303],
        [0.5878, 0.9737, 0.1907, -0.8639],
    ])
    A2 = np.array([
        [0.9371, -0.7859, 0.1332, 0.7429],
        [-0.8025, 0.4483, 0.6226, 0.0152],
        [0.0940, 0.2274, 0.1536, 0.5776],
        [-0.1941, 0.5659, 0.8881, -0.0539],
    ])
    A3 = np.array([
        [0.6576, -0.8543, -0.3460, 0.6415],
        [-0.3550, 0.5024, 0.6081, 0.9038],
        [0.9523, 0.6624, 0.0765, -0.8475],
        [-0.4436, 0.8447, -0.0734, 0.4173],
    ])
    return TimeDelayPlant(
        A=(A0, A1, A2, A3),
        state_delays=(3.2, 3.4, 3.9),
        input_delay=0.2,
        feedthrough_delay=0.2,
        B1=[[1.0, 0.0], [-1.6, 1.0], [0.0, 0.0], [0.0, 0.0]],
        B2=[[0.2], [-1.0], [0.1], [-0.4]],
        C1=[[1.0, 0.0, 0.0, -1.0], [0.0, -1.0, 1.0, 0.0]],
        C2=[[1.0, 0.0, -1.0, 0.0]],
        D11=[[0.1, 1.0], [-1.0, 0.2]],
        D12=[[1.0], [-1.0]],
        D21=[[-2.0, 0.1]],
        D22=[[0.4]],
    )


def mimo_fourstate_controller():
    """First-order controller for the fourth-order benchmark."""
    return ControllerRealization(AK=[[-0.712]], BK=[[-0.1639]], CK=[[-0.2858]])


def plant_to_dict(plant):
    """Plain-dict form of a plant, matching the CLI file schema."""
    return {
        "n": plant.n,
        "state_delays": list(plant.state_delays),
        "input_delay": plant.input_delay,
        "feedthrough_delay": plant.feedthrough_delay,
        "A": [a.tolist() for a in plant.A],
        "B1": plant.B1.tolist(), "B2": plant.B2.tolist(),
        "C1": plant.C1.tolist(), "C2": plant.C2.tolist(),
        "D11": plant.D11.tolist(), "D12": plant.D12.tolist(),
        "D21": plant.D21.tolist(), "D22": plant.D22.tolist(),
    }


def controller_to_dict(controller):
    """Plain-dict form of a controller, matching the CLI file schema."""
    return {
        "nK": controller.nK,
        "AK": controller.AK.tolist(),
        "BK": controller.BK.tolist(),
        "CK": controller.CK.tolist(),
    }
