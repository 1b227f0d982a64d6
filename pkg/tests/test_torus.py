import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantcat.errors import ConsistencyError, ConstructionError, NotQuantizableError
from quantcat.symplectic import diamond
from quantcat.torus import (QuantumTorus, check_intertwining, coherent_state,
                            coherent_states, find_kappa, kappa_consistent, propagator,
                            propagator_twirl, translation, translation_action)

from conftest import GOLDEN


def test_generators_d1():
    qt = QuantumTorus(5, 1, [0.3, 1.1])
    T = translation(qt, [1, 0]).matrix
    M = translation(qt, [0, 1]).matrix
    assert np.isclose(T[0, 4], np.exp(-0.3j))
    assert np.isclose(M[2, 2], np.exp(1j * (1.1 + 2 * np.pi * 2) / 5))


@given(st.integers(2, 12), st.lists(st.integers(-5, 5), min_size=4, max_size=4),
       st.floats(0, 6.28), st.floats(0, 6.28))
def test_group_law_property(N, rs, k1, k2):
    qt = QuantumTorus(N, 1, [k1, k2])
    r, s = np.array(rs[:2]), np.array(rs[2:])
    J = np.array([[0, -1], [1, 0]])
    sig = r @ J @ s
    lhs = translation(qt, r).matrix @ translation(qt, s).matrix
    rhs = np.exp(1j * np.pi * sig / N) * translation(qt, r + s).matrix
    assert np.abs(lhs - rhs).max() < 1e-12


@given(st.integers(2, 9), st.lists(st.integers(-7, 7), min_size=2, max_size=2))
def test_translation_action_matches_dense(N, r):
    qt = QuantumTorus(N, 1, [0.7, 2.2])
    rows, vals = translation_action(qt, np.array([r]))
    dense = np.zeros((N, N), complex)
    dense[rows[0], np.arange(N)] = vals[0]
    assert np.abs(dense - translation(qt, r).matrix).max() < 1e-12


def test_golden_kappa():
    assert all(np.allclose(k, 0) for k in [find_kappa(GOLDEN, 16)[0]])
    assert np.allclose(find_kappa(GOLDEN, 17)[0], [np.pi, np.pi])
    assert len(find_kappa(-np.eye(2, dtype=int), 6)) == 4
    assert kappa_consistent(GOLDEN, QuantumTorus(17, 1, [np.pi, np.pi]))
    assert not kappa_consistent(GOLDEN, QuantumTorus(17, 1, [0, 0]))


def test_propagator_wrong_kappa():
    with pytest.raises(ConsistencyError):
        propagator(GOLDEN, QuantumTorus(17, 1, [0, 0]))
    with pytest.raises(NotQuantizableError):
        propagator([[1, 1], [0, 1]], QuantumTorus(8))


def test_faulty_propagator_detected():
    with pytest.raises(ConstructionError):
        propagator(GOLDEN, QuantumTorus(8), _fault=True)


@pytest.mark.parametrize("A", [GOLDEN, np.array([[3, 2], [4, 3]]), np.array([[5, 2], [2, 1]])])
def test_propagator_all_admissible_kappa(A):
    # regression: kappa values within rounding of 2 pi must wrap to 0
    for N in range(2, 48):
        for k in find_kappa(A, N):
            M = propagator(A, QuantumTorus(N, 1, k))
            assert M.flags["intertwining_defect"] < 1e-8


@pytest.mark.parametrize("N", [5, 8, 9])
def test_propagator_matches_twirl(N):
    qt = QuantumTorus(N, 1, find_kappa(GOLDEN, N)[0])
    M = propagator(GOLDEN, qt).matrix
    Y = propagator_twirl(GOLDEN, qt, seed=3)
    assert np.abs(M - Y).max() < 1e-10


def test_propagator_d2_diamond():
    A = diamond(GOLDEN, np.array([[3, 2], [1, 1]]))
    N = 6
    qt = QuantumTorus(N, 2, find_kappa(A, N)[0])
    M = propagator(A, qt)
    assert M.matrix.shape == (36, 36)
    assert check_intertwining(M, A, qt) < 1e-10


def test_coherent_resolution_of_identity():
    N = 6
    qt = QuantumTorus(N, 1, [0.4, 1.9])
    G = 12 * N
    g = (np.arange(G) + 0.5) / G
    pts = np.array(list(itertools.product(g, g)))
    C = coherent_states(qt, pts, normalize=False)
    S = N * (C.T @ C.conj()) / G ** 2
    assert np.abs(S - np.eye(N)).max() < 1e-12


def test_coherent_covariance():
    N = 10
    qt = QuantumTorus(N, 1, [0.4, 1.9])
    rho = np.array([0.21, 0.63])
    r = np.array([2, -3])
    a = translation(qt, r).matrix @ coherent_state(qt, rho).coeffs
    b = coherent_state(qt, rho + r / N).coeffs
    ov = np.vdot(b, a)
    assert abs(abs(ov) - 1) < 1e-12
