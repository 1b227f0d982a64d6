import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantcat.errors import AliasingError, ValidationError
from quantcat.quantization import (GaussianSymbol, TrigObservable, anti_wick,
                                   anti_wick_multiplier, egorov_plus_drift,
                                   moyal_square_multiplier, multiplier_quadrature, op_plus,
                                   periodization_direct, periodization_fourier,
                                   periodized_gaussian_batch, periodized_gaussian_op, weyl)
from quantcat.symplectic import adapted_frame, adapted_scaling_matrix
from quantcat.torus import QuantumTorus, propagator

from conftest import GOLDEN


def test_weyl_constant_and_hermitian():
    qt = QuantumTorus(12)
    assert np.allclose(weyl(qt, TrigObservable.constant(2.0)).matrix, 2 * np.eye(12))
    a = TrigObservable.random_nonnegative(np.random.default_rng(0), 2)
    assert weyl(qt, a).hermitian_defect() < 1e-13


def test_weyl_aliasing_guard():
    qt = QuantumTorus(8)
    with pytest.raises(AliasingError):
        weyl(qt, TrigObservable.cos_x(freq=4))
    weyl(qt, TrigObservable.cos_x(freq=4), allow_alias=True)


def test_cos_x_is_position_multiplication():
    N = 10
    qt = QuantumTorus(N, 1, [0, 0.6])
    op = weyl(qt, TrigObservable.cos_x()).matrix
    x = (np.arange(N) + 0.6 / (2 * np.pi)) / N
    assert np.allclose(op, np.diag(np.cos(2 * np.pi * x)), atol=1e-13)


def test_anti_wick_quadrature_matches_multiplier():
    qt = QuantumTorus(16, 1, [0.4, 1.3])
    a = TrigObservable.random_nonnegative(np.random.default_rng(1), 4)
    Q = anti_wick(qt, a).matrix
    M = anti_wick(qt, a, method="multiplier").matrix
    assert np.abs(Q - M).max() < 1e-12
    with pytest.raises(ValidationError):
        anti_wick(qt, a, G=4 * 16)


def test_moyal_multiplier_against_kernel_quadrature():
    fr = adapted_frame(GOLDEN)
    qt = QuantumTorus(8)
    B = adapted_scaling_matrix(fr, qt.hbar)
    table = moyal_square_multiplier(fr, qt, check=False)
    for r in ([0, 0], [1, 0], [2, -1], [-3, 2]):
        quad = multiplier_quadrature(B, 8, r)
        assert abs(table(r)[0] - quad) < 1e-10


def test_anti_wick_scaling_reproduces_aw_multiplier():
    qt = QuantumTorus(20)
    B = (np.pi * qt.hbar) ** -0.5 * np.eye(2)
    R = np.array([[1, 2], [3, -1], [0, 5]])
    t = moyal_square_multiplier(B, qt, check=False)
    assert np.allclose(t(R), anti_wick_multiplier(qt, R), rtol=0, atol=1e-14)


def test_poisson_matches_fourier():
    fr = adapted_frame(GOLDEN)
    qt = QuantumTorus(16)
    B = adapted_scaling_matrix(fr, qt.hbar)
    rho, rho0 = np.array([0.3, 0.7]), np.array([0.2, 0.55])
    g = (np.arange(6) + 0.5) / 6
    pts = np.array([[x, y] for x in g for y in g])
    d = periodization_direct(GaussianSymbol(B, rho0), rho, pts, 16)
    f = periodization_fourier(qt, rho, rho0, B, pts)
    assert np.abs(d - f).max() < 1e-10


def test_batch_matches_single():
    fr = adapted_frame(GOLDEN)
    qt = QuantumTorus(8)
    rho, rho0 = np.array([0.3, 0.7]), np.array([0.2, 0.55])
    X = periodized_gaussian_op(qt, rho, rho0, fr).matrix
    Xb = periodized_gaussian_batch(qt, rho[None], rho0[None], adapted_scaling_matrix(fr, qt.hbar))[0]
    assert np.abs(X - Xb).max() < 1e-12


@given(st.integers(0, 10_000))
def test_positive_quantizations_are_positive(seed):
    rng = np.random.default_rng(seed)
    qt = QuantumTorus(16)
    a = TrigObservable.random_nonnegative(rng, 2)
    fr = adapted_frame(GOLDEN)
    for op in (anti_wick(qt, a, method="multiplier"), op_plus(qt, a, fr)):
        assert np.linalg.eigvalsh(op.matrix).min() >= -1e-9


@given(st.integers(0, 10_000), st.integers(-2, 2))
def test_weyl_egorov_exact(seed, t):
    N = 16
    qt = QuantumTorus(N)
    rng = np.random.default_rng(seed)
    a = TrigObservable.random_nonnegative(rng, 2)
    M = propagator(GOLDEN, qt).matrix
    Mt = np.linalg.matrix_power(M, t) if t >= 0 else np.linalg.matrix_power(M.conj().T, -t)
    lhs = weyl(qt, a.compose_power(GOLDEN, t), allow_alias=True).matrix
    rhs = Mt.conj().T @ weyl(qt, a).matrix @ Mt
    assert np.abs(lhs - rhs).max() < 1e-10


def test_egorov_plus_drift_zero_at_t0():
    qt = QuantumTorus(16)
    rows = egorov_plus_drift(qt, TrigObservable.cos_x(), adapted_frame(GOLDEN), GOLDEN, [0, 1])
    assert rows[0]["defect"] < 1e-12
    assert rows[1]["defect"] > 0 and np.isfinite(rows[1]["ratio"])


def test_compose_matches_pointwise():
    a = TrigObservable.random_nonnegative(np.random.default_rng(5), 2)
    pts = np.random.default_rng(6).random((20, 2))
    assert np.allclose(a.compose(GOLDEN)(pts), a((pts @ GOLDEN.T) % 1.0), atol=1e-12)
