import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantcat.errors import (DimensionError, IllConditionedSpectrumError,
                             UnsupportedFrameError, ValidationError)
from quantcat.symplectic import (adapted_frame, adapted_scaling_matrix, check_quantizable,
                                 check_symplectic, diamond, ehrenfest_times, entropy_bounds,
                                 integer_det, lyapunov_data, pair_blocks, parse_matrix,
                                 standard_j)

from conftest import GOLDEN, LAMBDA_GOLDEN

S = np.array([[0, -1], [1, 0]])
L = np.array([[1, 0], [1, 1]])


def test_golden_symplectic_and_quantizable():
    assert check_symplectic(GOLDEN)
    assert check_quantizable(GOLDEN)
    assert not check_quantizable([[1, 1], [0, 1]])
    assert not check_symplectic([[2, 0], [0, 1]])


def test_odd_size_rejected():
    with pytest.raises(DimensionError):
        check_symplectic(np.eye(3, dtype=int))


def test_parse_matrix():
    assert parse_matrix("2,1;1,1").tolist() == [[2, 1], [1, 1]]
    with pytest.raises(ValidationError):
        parse_matrix("2,x;1,1")


def test_integer_det_matches_exact_cofactor():
    M = np.array([[3, 1, 4], [1, 5, 9], [2, 6, 5]])
    # cofactor expansion by hand: 3(25-54) - 1(5-18) + 4(6-10)
    assert integer_det(M) == 3 * (25 - 54) - 1 * (5 - 18) + 4 * (6 - 10)


def test_golden_lyapunov():
    Ld = lyapunov_data(GOLDEN)
    assert Ld.exponents[0] == pytest.approx(LAMBDA_GOLDEN, abs=1e-12)
    lam0, lamp = entropy_bounds(Ld)
    assert lamp == pytest.approx(0.962424, abs=1e-6)
    assert lam0 == pytest.approx(0.481212, abs=1e-6)


def test_diamond_of_two_cats():
    B = np.array([[3, 2], [1, 1]])
    D = diamond(GOLDEN, B)
    assert check_symplectic(D)
    blocks = pair_blocks(D)
    assert [b.tolist() for b in blocks] == [GOLDEN.tolist(), B.tolist()]
    Ld = lyapunov_data(D)
    lb = float(np.log(2 + np.sqrt(3)))  # root of x^2 - 4x + 1
    assert Ld.lambda_max == pytest.approx(lb, abs=1e-10)
    assert Ld.Lambda_plus == pytest.approx(lb + LAMBDA_GOLDEN, abs=1e-10)
    # Lambda_0 = sum (lambda_j - lambda_max/2)_+
    assert Ld.Lambda_zero == pytest.approx(lb / 2 + max(LAMBDA_GOLDEN - lb / 2, 0), abs=1e-10)


def test_neutral_spectrum_frame_unsupported():
    # -Id is quantizable but has no expansion
    A = -np.eye(2, dtype=int)
    assert check_quantizable(A)
    with pytest.raises(UnsupportedFrameError):
        adapted_frame(A).gammas()


def test_adapted_frame_golden():
    fr = adapted_frame(GOLDEN)
    Q = fr.conjugator_Q
    J = standard_j(1, float)
    assert np.allclose(Q.T @ J @ Q, J, atol=1e-12)
    conj = np.linalg.solve(Q, GOLDEN @ Q)
    assert abs(conj[0, 1]) < 1e-12 and abs(conj[1, 0]) < 1e-12
    hbar = 1 / (2 * np.pi * 64)
    B = adapted_scaling_matrix(fr, hbar)
    # gamma = 1/2 on the single hyperbolic pair: B = hbar^{-1/2} Id
    assert np.allclose(B, hbar ** -0.5 * np.eye(2), atol=1e-9)


def test_ehrenfest_times_golden():
    Ld = lyapunov_data(GOLDEN)
    # floors of 0.9 log N / (2 lambda) and 0.9 log(2 pi N) / lambda
    assert [ehrenfest_times(N, 0.1, Ld) for N in (32, 64, 128)] == [(1, 4), (1, 5), (2, 6)]


def test_ill_conditioned_band(monkeypatch):
    # eigenvalue modulus 1 + 5e-8 lies in the ambiguous band (tol, 10 tol]
    ev = np.array([1 + 5e-8, 1 / (1 + 5e-8)])
    monkeypatch.setattr(np.linalg, "eigvals", lambda M: ev)
    with pytest.raises(IllConditionedSpectrumError):
        lyapunov_data(GOLDEN)


words = st.lists(st.tuples(st.sampled_from(["S", "L"]), st.integers(-3, 3)), min_size=1, max_size=6)


@given(words)
def test_products_of_generators_are_symplectic(w):
    A = np.eye(2, dtype=np.int64)
    for g, k in w:
        G = S if g == "S" else L
        A = A @ np.linalg.matrix_power(G if k >= 0 else np.round(np.linalg.inv(G)).astype(int), abs(k))
    assert check_symplectic(A)
    assert integer_det(A) == 1


@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4))
def test_inverse_formula(a, b, c):
    # upper-triangular unipotent times golden stays symplectic
    U = np.array([[1, a], [0, 1]]) @ GOLDEN @ np.array([[1, 0], [b, 1]]) @ np.array([[1, c], [0, 1]])
    from quantcat.symplectic import as_symplectic
    M = as_symplectic(U)
    assert np.array_equal(M.entries @ M.inverse().entries, np.eye(2, dtype=np.int64))
