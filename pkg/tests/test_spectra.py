import numpy as np
import pytest

from quantcat.errors import ValidationError
from quantcat.quantization import TrigObservable, anti_wick, weyl
from quantcat.spectra import (egorov_drift, eigensystem, husimi_grid, matrix_order_mod,
                              measure_of_state)
from quantcat.symplectic import adapted_frame, ehrenfest_times, lyapunov_data
from quantcat.torus import QuantumTorus, TorusOperator, coherent_state, find_kappa, propagator

from conftest import GOLDEN


def _eig(N):
    qt = QuantumTorus(N, 1, find_kappa(GOLDEN, N)[0])
    M = propagator(GOLDEN, qt)
    return qt, M, eigensystem(M)


def test_identity():
    E = eigensystem(np.eye(7))
    assert np.all(E.eigenphases == 0) and np.max(E.residuals) == 0
    assert len(E.clusters) == 1


def test_rejects_nonunitary():
    with pytest.raises(ValidationError):
        eigensystem(2 * np.eye(3))


def test_golden_decomposition_invariants():
    qt, M, E = _eig(16)
    V = E.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(16)).max() < 1e-8
    assert np.max(E.residuals) <= 1e-8
    assert np.all(np.abs(np.diff(E.eigenphases)) >= -1e-9)


def test_eigenphases_invariant_under_basis_permutation():
    qt, M, E = _eig(16)
    perm = np.random.default_rng(0).permutation(16)
    P = np.eye(16)[perm]
    E2 = eigensystem(P @ M.matrix @ P.T)
    assert np.abs(np.sort(E.eigenphases) - np.sort(E2.eigenphases)).max() < 1e-9


def test_deterministic():
    _, _, E1 = _eig(12)
    _, _, E2 = _eig(12)
    assert np.array_equal(E1.eigenvectors, E2.eigenvectors)


@pytest.mark.parametrize("N", [7, 10, 13, 16, 21, 30])
def test_eigenphases_on_period_lattice(N):
    P = matrix_order_mod(GOLDEN, N)
    assert P <= 200
    _, _, E = _eig(N)
    x = E.eigenphases * P / (2 * np.pi)
    x = x - x[0]
    assert np.abs(x - np.round(x)).max() < 1e-7


def test_matrix_order_oracle():
    # Pisano-type periods of the golden cat, iterated by hand mod N
    assert [matrix_order_mod(GOLDEN, N) for N in (2, 3, 5, 10)] == [3, 4, 10, 30]


def test_constant_observable():
    qt, M, E = _eig(16)
    psi = E.eigenvectors[:, 3]
    one = TrigObservable.constant(1.0)
    fr = adapted_frame(GOLDEN)
    for q in ("weyl", "anti_wick", "op_plus"):
        assert abs(measure_of_state(qt, psi, q, one, fr) - 1) < 1e-12


def test_coherent_state_concentrates():
    qt = QuantumTorus(64)
    rho = np.array([0.3, 0.6])
    psi = coherent_state(qt, rho)
    near = measure_of_state(qt, psi, "anti_wick", TrigObservable.bump(rho, 4)).real
    far = measure_of_state(qt, psi, "anti_wick", TrigObservable.bump(rho + 0.5, 4)).real
    assert near >= 10 * far


def test_husimi_of_coherent_state():
    N, G = 32, 128
    qt = QuantumTorus(N)
    rho = np.array([0.3, 0.6])
    g = husimi_grid(qt, coherent_state(qt, rho), G)
    k = np.unravel_index(np.argmax(g.density), g.density.shape)
    peak = (np.array(k) + 0.5) / G
    assert np.all(np.abs(peak - rho) <= 1 / G)
    assert abs(g.total - 1) < 1e-12
    assert g.density.min() >= -1e-12


def test_husimi_integral_matches_anti_wick():
    qt, M, E = _eig(16)
    psi = E.eigenvectors[:, 5]
    a = TrigObservable.random_nonnegative(np.random.default_rng(2), 4)
    g = husimi_grid(qt, psi, 4 * 16)
    via_grid = g.integrate(a.on_grid(64)) * g.raw_total
    assert abs(via_grid - measure_of_state(qt, psi, "anti_wick", a)) < 1e-4


def test_eigenstate_husimi_normalized():
    qt, M, E = _eig(64)
    g = husimi_grid(qt, E.eigenvectors[:, 10], 256)
    assert abs(g.total - 1) < 1e-6
    assert abs(g.raw_total - 1) < 1e-6


def test_weyl_drift_vanishes_on_eigenstates():
    qt, M, E = _eig(64)
    m_e, _ = ehrenfest_times(64, 0.1, lyapunov_data(GOLDEN))
    a = TrigObservable.random_nonnegative(np.random.default_rng(3), 3)
    for k in (0, 17, 40):
        d = egorov_drift(qt, E.eigenvectors[:, k], a, GOLDEN, "weyl", max(m_e, 2))
        assert d[0] == 0 and max(d) <= 1e-8


def test_eigenvector_invariance():
    qt, M, E = _eig(20)
    X = weyl(qt, TrigObservable.random_nonnegative(np.random.default_rng(4), 2)).matrix
    Mm = M.matrix
    for k in range(0, 20, 3):
        v = E.eigenvectors[:, k]
        diff = abs(v.conj() @ Mm.conj().T @ X @ Mm @ v - v.conj() @ X @ v)
        assert diff <= 4 * E.residuals[k] * np.linalg.norm(X, 2) + 1e-13


def test_quantizer_consistency_bound():
    qt, M, E = _eig(32)
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = TrigObservable.random_nonnegative(rng, 2)
        gap = np.linalg.norm(weyl(qt, a).matrix - anti_wick(qt, a, method="multiplier").matrix, 2)
        v = E.eigenvectors[:, rng.integers(32)]
        diff = abs(measure_of_state(qt, v, "weyl", a) - measure_of_state(qt, v, "anti_wick", a))
        assert diff <= gap + 1e-12
