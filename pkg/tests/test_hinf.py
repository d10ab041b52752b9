import numpy as np
import pytest

from delayhinf.exceptions import LevelSingularityError, UnstableSystemError
from delayhinf.hinf import (HinfOptions, NepResidual, build_hamiltonian_triple,
                            correct_peaks, hinf_norm, level_operator_matrix,
                            predict_norm)
from delayhinf.model import (ClosedLoopSystem, ControllerRealization,
                             TimeDelayPlant, assemble_closed_loop,
                             evaluate_transfer, max_singular_value)
from tests.conftest import random_stable_loop, scalar_lag_loop

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _J(n):
    return np.block([[np.zeros((n, n)), np.eye(n)],
                     [-np.eye(n), np.zeros((n, n))]])


def test_triple_scalar_delay_free():
    # 1/(s+1) at level 1: the norm is attained at omega 0, so the matrix
    # must be singular at lambda 0, here through a double zero eigenvalue
    cl = scalar_lag_loop()
    triple = build_hamiltonian_triple(cl, 1.0)
    np.testing.assert_allclose(triple.Dxi, [[-1.0]])
    np.testing.assert_allclose(triple.M0, [[-1.0, 1.0], [-1.0, 1.0]], atol=1e-14)
    ev = np.linalg.eigvals(triple.M0)
    np.testing.assert_allclose(sorted(np.abs(ev)), [0.0, 0.0], atol=1e-8)


def test_triple_hamiltonian_structure_random():
    rng = np.random.default_rng(5)
    for _ in range(10):
        cl = random_stable_loop(rng)
        sigma_top = max_singular_value(cl, 0.0).sigma
        xi = sigma_top * 1.37 + 0.1
        triple = build_hamiltonian_triple(cl, xi)
        J = _J(cl.n_cl)
        np.testing.assert_allclose((J @ triple.M0).T, J @ triple.M0, atol=1e-10)
        for Mi, Mmi in zip(triple.Mi, triple.Mmi):
            np.testing.assert_allclose((J @ Mi).T, J @ Mmi, atol=1e-12)
            n = cl.n_cl
            assert not Mi[n:, :].any() and not Mi[:, n:].any()
            assert not Mmi[:n, :].any() and not Mmi[:, :n].any()


def test_triple_rejects_feedthrough_singular_value():
    cl = ClosedLoopSystem(Acl=(np.array([[-1.0]]),), delays=(),
                          Bcl=[[1.0]], Ccl=[[1.0]], Dcl=[[0.5]], n=1, nK=0)
    with pytest.raises(LevelSingularityError):
        build_hamiltonian_triple(cl, 0.5)


def test_nep_conjugate_and_hamiltonian_symmetry():
    rng = np.random.default_rng(12)
    for _ in range(8):
        cl = random_stable_loop(rng)
        xi = max_singular_value(cl, 0.0).sigma * 1.2 + 0.2
        res = NepResidual(build_hamiltonian_triple(cl, xi))
        lam = complex(rng.uniform(-1, 1), rng.uniform(-2, 2))
        np.testing.assert_allclose(res.value(np.conj(lam)),
                                   res.value(lam).conj(), atol=1e-12)
        s_pos = np.linalg.svd(res.value(lam), compute_uv=False)
        s_neg = np.linalg.svd(res.value(-lam), compute_uv=False)
        np.testing.assert_allclose(s_pos, s_neg, rtol=1e-10)
        # derivative consistency against a finite difference
        h = 1e-7
        fd = (res.value(lam + h) - res.value(lam - h)) / (2 * h)
        np.testing.assert_allclose(res.derivative(lam), fd, atol=1e-6)


def test_theorem_consistency_every_singular_value():
    # any singular value of the transfer matrix at any frequency makes the
    # residual singular at that frequency
    rng = np.random.default_rng(21)
    for _ in range(10):
        cl = random_stable_loop(rng)
        omega = float(rng.uniform(0, 4))
        svals = np.linalg.svd(evaluate_transfer(cl, omega), compute_uv=False)
        for xi in svals:
            if xi <= 1e-8:
                continue
            try:
                res = NepResidual(build_hamiltonian_triple(cl, float(xi)))
            except LevelSingularityError:
                continue
            H = res.value(1j * omega)
            s = np.linalg.svd(H, compute_uv=False)
            assert s[-1] <= 1e-8 * s[0]


def test_predict_scalar_lag():
    xi, freqs = predict_norm(scalar_lag_loop(), 10)
    assert xi == pytest.approx(1.0, abs=1e-6)
    assert min(freqs) == pytest.approx(0.0, abs=1e-6)


def test_predict_static_system():
    cl = ClosedLoopSystem(Acl=(np.array([[-1.0]]),), delays=(),
                          Bcl=np.zeros((1, 2)), Ccl=np.zeros((2, 1)),
                          Dcl=np.diag([2.0, 1.0]), n=1, nK=0)
    xi, freqs = predict_norm(cl, 5)
    assert xi == pytest.approx(2.0, abs=1e-12)
    assert freqs[0] == pytest.approx(0.0)


def test_predict_example2(mimo_loop):
    xi, freqs = predict_norm(mimo_loop, 20)
    assert xi == pytest.approx(1.2606, abs=1e-2)
    assert freqs


def test_correct_scalar_lag_from_perturbed_start():
    result = correct_peaks(scalar_lag_loop(), 0.98, [0.1])
    assert result.norm == pytest.approx(1.0, abs=1e-10)
    assert result.peaks[0][0] == pytest.approx(0.0, abs=1e-8)
    assert result.converged


def test_correct_exact_input_is_fixed_point():
    result = correct_peaks(scalar_lag_loop(), 1.0, [0.0])
    assert result.corrector_iterations == 0
    assert result.norm == pytest.approx(1.0, abs=1e-12)


def test_correct_example2(mimo_loop):
    xi, freqs = predict_norm(mimo_loop, 20)
    result = correct_peaks(mimo_loop, xi, freqs)
    assert result.norm == pytest.approx(1.2606, abs=2e-3)


def test_hinf_norm_unstable_errors():
    plant = TimeDelayPlant(A=(np.array([[1.0]]),), state_delays=(),
                           input_delay=0.0, feedthrough_delay=0.0,
                           B1=[[1.0]], B2=[[0.0]], C1=[[1.0]], C2=[[0.0]],
                           D11=[[0.0]], D12=[[0.0]], D21=[[0.0]], D22=[[0.0]])
    cl = assemble_closed_loop(plant, ControllerRealization.empty(1, 1))
    with pytest.raises(UnstableSystemError, match="spectral abscissa"):
        hinf_norm(cl)


def test_hinf_norm_scalar_lag():
    result = hinf_norm(scalar_lag_loop())
    assert result.norm == pytest.approx(1.0, abs=1e-8)
    assert result.peaks[0][0] == pytest.approx(0.0, abs=1e-8)
    assert result.converged


def test_hinf_norm_example1(siso_loop):
    result = hinf_norm(siso_loop)
    assert result.norm == pytest.approx(0.064, abs=5e-3)
    assert result.peaks[0][0] == pytest.approx(0.0, abs=1e-8)


def test_hinf_norm_example2_beats_static_frequency(mimo_loop):
    # two near-tied peaks: the fine-bump verification must find the higher
    # one near omega 1.75 rather than stopping at the omega 0 value
    result = hinf_norm(mimo_loop)
    sigma0 = max_singular_value(mimo_loop, 0.0).sigma
    assert result.norm > sigma0
    assert result.peaks[0][0] == pytest.approx(1.7464, abs=1e-3)


def test_level_set_bracketing(siso_loop, mimo_loop):
    for cl in (siso_loop, mimo_loop):
        result = hinf_norm(cl)
        N = max(result.N_used, 10)
        sigma_d = np.linalg.svd(cl.Dcl, compute_uv=False)[0]

        below = result.norm * (1 - 1e-3)
        L = level_operator_matrix(cl, below, N)
        ev = np.linalg.eigvals(L)
        assert np.any(np.abs(ev.real) <= 1e-6 * (1 + np.abs(ev)))

        above = result.norm * (1 + 1e-3)
        if result.norm > sigma_d * (1 + 1e-3):
            L = level_operator_matrix(cl, above, N)
            ev = np.linalg.eigvals(L)
            assert not np.any(np.abs(ev.real) <= 1e-6 * (1 + np.abs(ev)))


def test_oracle_equivalence_dense_grid(siso_loop):
    result = hinf_norm(siso_loop)
    scale = sum(np.linalg.norm(A, 2) for A in siso_loop.Acl)
    grid = np.linspace(0.0, 10 * scale, 2000)
    dense = max(max_singular_value(siso_loop, w).sigma for w in grid)
    assert dense <= result.norm + 1e-6
    assert dense >= result.norm * (1 - 1e-3)


def test_peaks_are_local_maxima(siso_loop, mimo_loop):
    for cl in (siso_loop, mimo_loop):
        result = hinf_norm(cl)
        for omega, triple in result.peaks:
            delta = 1e-4 * (1.0 + omega)
            for w in (omega - delta, omega + delta):
                if w >= 0:
                    assert max_singular_value(cl, w).sigma <= result.norm + 1e-10


def test_hinf_norm_mesh_cap_errors_with_best_estimate():
    from delayhinf.exceptions import DiscretizationLimitError
    from tests.conftest import delayed_scalar_loop
    with pytest.raises(DiscretizationLimitError):
        hinf_norm(delayed_scalar_loop(), HinfOptions(N_start=10, N_cap=5))


def test_multiple_top_singular_value_flagged():
    cl = ClosedLoopSystem(Acl=(np.array([[-1.0]]),), delays=(),
                          Bcl=np.zeros((1, 2)), Ccl=np.zeros((2, 1)),
                          Dcl=np.diag([2.0, 2.0]), n=1, nK=0)
    assert max_singular_value(cl, 0.0).multiple


def test_hinf_norm_random_systems_match_dense_scan():
    rng = np.random.default_rng(17)
    for _ in range(5):
        cl = random_stable_loop(rng, n_max=3, m_max=2)
        result = hinf_norm(cl)
        scale = sum(np.linalg.norm(A, 2) for A in cl.Acl)
        grid = np.linspace(0.0, 10 * scale + 1, 3000)
        dense = max(max_singular_value(cl, w).sigma for w in grid)
        assert dense <= result.norm + 1e-6
        assert dense >= result.norm * (1 - 1e-3)
