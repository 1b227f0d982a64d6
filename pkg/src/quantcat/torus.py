"""Finite-dimensional torus Hilbert spaces H_N(kappa).

Basis and conventions
---------------------
For d = 1 the basis vector |j>, j = 0..N-1, is the Dirac comb supported at
x_j = (j + kappa_2/(2 pi)) / N, with coefficients extended to all of Z by
c_{j+N} = exp(i kappa_1) c_j. The translation U(r/N) for r = (a, b) is

    W(a, b) = exp(i pi a b / N) T^a M^b,

where T|j> = |j+1> (with T|N-1> = exp(-i kappa_1)|0>) and
M = diag(exp(i kappa_2 / N) exp(2 pi i j / N)). These satisfy

    W(r) W(r') = exp(i pi sigma(r, r') / N) W(r + r')

exactly, W(N, 0) = exp(-i kappa_1) Id and W(0, N) = exp(i kappa_2) Id.
For d > 1 everything is a tensor product over the coordinate pairs
(x_i, xi_i) with j_1 the most significant index.

kappa is stored as a length-2d vector (kappa_1, kappa_2), kappa_1 in R^d.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import (BudgetError, ConsistencyError, ConstructionError,
                     NotQuantizableError, ValidationError)
from .symplectic import (IntSymplecticMatrix, as_symplectic, check_quantizable,
                         integer_det, pair_blocks, standard_j)

__all__ = [
    "QuantumTorus", "TorusState", "TorusOperator", "translation",
    "translation_action", "coherent_state", "coherent_states", "find_kappa",
    "parity_vector", "kappa_consistent", "propagator", "check_intertwining",
    "sl2_word", "propagator_twirl",
]

TWO_PI = 2 * np.pi


def _wrap(kappa) -> np.ndarray:
    k = np.mod(np.asarray(kappa, dtype=float), TWO_PI)
    # values within rounding of 2 pi go to 0
    k[np.isclose(k, TWO_PI, rtol=0, atol=1e-9)] = 0.0
    k[np.abs(k) < 1e-12] = 0.0
    return k


@dataclass(frozen=True)
class QuantumTorus:
    """The context (N, d, kappa); hbar = 1/(2 pi N) is derived on demand."""

    N: int
    d: int = 1
    kappa: np.ndarray = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d}")
        kappa = np.zeros(2 * self.d) if self.kappa is None else self.kappa
        kappa = np.asarray(kappa, dtype=float).ravel()
        if kappa.shape != (2 * self.d,):
            raise ValidationError(f"kappa must have length {2 * self.d}")
        kappa = _wrap(kappa)
        kappa.setflags(write=False)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "kappa", kappa)

    @property
    def hbar(self) -> float:
        return 1.0 / (TWO_PI * self.N)

    @property
    def dim(self) -> int:
        return self.N ** self.d

    def pair_kappa(self, i: int) -> tuple[float, float]:
        return float(self.kappa[i]), float(self.kappa[self.d + i])

    def with_kappa(self, kappa) -> "QuantumTorus":
        return QuantumTorus(self.N, self.d, kappa)

    def __eq__(self, other):
        return (isinstance(other, QuantumTorus) and self.N == other.N
                and self.d == other.d and np.allclose(self.kappa, other.kappa,
                                                      rtol=0, atol=1e-12))

    def __hash__(self):
        return hash((self.N, self.d, tuple(np.round(self.kappa, 12))))


@dataclass
class TorusState:
    coeffs: np.ndarray
    context: QuantumTorus

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if self.coeffs.shape != (self.context.dim,):
            raise ValidationError("state length does not match N^d")

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "TorusState":
        return TorusState(self.coeffs / self.norm(), self.context)

    def inner(self, other: "TorusState") -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))


@dataclass
class TorusOperator:
    """Dense N^d x N^d matrix acting on H_N(kappa).

    ``flags`` records certified properties (e.g. 'unitary', 'hermitian').
    """

    matrix: np.ndarray
    context: QuantumTorus
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.context.dim
        if self.matrix.shape != (n, n):
            raise ValidationError(f"operator shape {self.matrix.shape} != ({n}, {n})")

    def unitarity_defect(self) -> float:
        U = self.matrix
        return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def certify_unitary(self, tol: float = 1e-10) -> "TorusOperator":
        defect = self.unitarity_defect()
        if defect > tol:
            raise ConstructionError(f"unitarity defect {defect:.3e} exceeds {tol}")
        self.flags["unitary"] = defect
        return self

    @property
    def H(self) -> "TorusOperator":
        return TorusOperator(self.matrix.conj().T, self.context)

    def __matmul__(self, other):
        if isinstance(other, TorusOperator):
            return TorusOperator(self.matrix @ other.matrix, self.context)
        if isinstance(other, TorusState):
            return TorusState(self.matrix @ other.coeffs, self.context)
        return self.matrix @ other

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def apply(self, psi: TorusState) -> TorusState:
        return TorusState(self.matrix @ psi.coeffs, self.context)

    def expectation(self, psi: TorusState) -> complex:
        return complex(np.vdot(psi.coeffs, self.matrix @ psi.coeffs))


# ---------------------------------------------------------------------------
# translations

def _shift_matrix(N: int, kappa1: float) -> np.ndarray:
    T = np.zeros((N, N), dtype=complex)
    T[np.arange(1, N), np.arange(N - 1)] = 1.0
    T[0, N - 1] = np.exp(-1j * kappa1)
    return T


def _clock_matrix(N: int, kappa2: float) -> np.ndarray:
    return np.diag(np.exp(1j * (kappa2 + TWO_PI * np.arange(N)) / N))


def _power(X: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        return np.linalg.matrix_power(X.conj().T, -k)
    return np.linalg.matrix_power(X, k)


def _pair_translation(N, kappa1, kappa2, a, b) -> np.ndarray:
    T = _shift_matrix(N, kappa1)
    M = _clock_matrix(N, kappa2)
    return np.exp(1j * np.pi * a * b / N) * (_power(T, a) @ _power(M, b))


def translation(qt: QuantumTorus, r) -> TorusOperator:
    """The unitary U(r/N) on H_N(kappa) for an integer vector r in Z^{2d}."""
    r = np.asarray(r, dtype=np.int64).ravel()
    if r.shape != (2 * qt.d,):
        raise ValidationError(f"r must have length {2 * qt.d}")
    d = qt.d
    mats = [_pair_translation(qt.N, *qt.pair_kappa(i), int(r[i]), int(r[d + i]))
            for i in range(d)]
    return TorusOperator(reduce(np.kron, mats), qt)


def translation_action(qt: QuantumTorus, R):
    """Monomial form of a batch of translations.

    For integer vectors R of shape (n, 2d) returns ``rows`` and ``vals`` of
    shape (n, N^d) such that W(R[k]) |l> = vals[k, l] |rows[k, l]>.
    This closed form also handles |a| >= N by accumulating boundary phases.
    """
    R = np.atleast_2d(np.asarray(R, dtype=np.int64))
    N, d = qt.N, qt.d
    j = np.arange(N)
    rows = np.zeros((R.shape[0], 1), dtype=np.int64)
    vals = np.ones((R.shape[0], 1), dtype=complex)
    for i in range(d):
        k1, k2 = qt.pair_kappa(i)
        a = R[:, i][:, None]
        b = R[:, d + i][:, None]
        tgt = j[None, :] + a
        wraps = np.floor_divide(tgt, N)
        ph = np.exp(1j * (np.pi * a * b / N - k1 * wraps + b * k2 / N
                          + TWO_PI * np.mod(b * j[None, :], N) / N))
        r_i = np.mod(tgt, N)
        rows = (rows[:, :, None] * N + r_i[:, None, :]).reshape(R.shape[0], -1)
        vals = (vals[:, :, None] * ph[:, None, :]).reshape(R.shape[0], -1)
    return rows, vals


# ---------------------------------------------------------------------------
# coherent states

def _pair_coherent(N, kappa1, kappa2, x0, xi0, tail_tol):
    """Unnormalized pair coherent states, shape (P, N), for points (x0, xi0).

    c_j = N^{-1/2} sum_n exp(i kappa1 n) phi(x_j - n) with the plane state
    phi(x) = (2N)^{1/4} exp(-i pi N x0 xi0) exp(2 i pi N xi0 x) exp(-pi N (x-x0)^2).
    """
    x0 = np.asarray(x0, dtype=float)[:, None]
    xi0 = np.asarray(xi0, dtype=float)[:, None]
    xj = (np.arange(N) + kappa2 / TWO_PI) / N
    width = np.sqrt(np.log(1.0 / tail_tol) / (np.pi * N))
    n_lo = int(np.floor(np.min(xj) - np.max(x0) - width))
    n_hi = int(np.ceil(np.max(xj) - np.min(x0) + width))
    out = np.zeros((x0.shape[0], N), dtype=complex)
    pref = (2 * N) ** 0.25 / np.sqrt(N) * np.exp(-1j * np.pi * N * x0 * xi0)
    for n in range(n_lo, n_hi + 1):
        u = xj[None, :] - n
        out += (np.exp(1j * kappa1 * n + 2j * np.pi * N * xi0 * u)
                * np.exp(-np.pi * N * (u - x0) ** 2))
    return pref * out


def coherent_states(qt: QuantumTorus, points, tail_tol: float = 1e-14,
                    normalize: bool = True) -> np.ndarray:
    """Coherent states |rho, kappa> for points of shape (P, 2d); returns (P, N^d).

    With ``normalize=False`` the states are the exact periodizations, for
    which N^d * integral |rho><rho| d rho = Id holds exactly.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = qt.d
    out = np.ones((pts.shape[0], 1), dtype=complex)
    for i in range(d):
        c = _pair_coherent(qt.N, *qt.pair_kappa(i), pts[:, i], pts[:, d + i], tail_tol)
        out = (out[:, :, None] * c[:, None, :]).reshape(pts.shape[0], -1)
    if normalize:
        out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def coherent_state(qt: QuantumTorus, rho, tail_tol: float = 1e-14,
                   normalize: bool = True) -> TorusState:
    """The toral coherent state |rho, kappa> (normalized by default)."""
    rho = np.asarray(rho, dtype=float).ravel()
    if rho.shape != (2 * qt.d,):
        raise ValidationError(f"rho must have length {2 * qt.d}")
    if tail_tol <= 0:
        raise ValidationError("tail_tol must be positive")
    return TorusState(coherent_states(qt, rho[None, :], tail_tol, normalize)[0], qt)


# ---------------------------------------------------------------------------
# kappa_A

def parity_vector(A) -> np.ndarray:
    """v_k = sum_i A[i, k] A[d+i, k] mod 2 (column x.xi products)."""
    A = as_symplectic(A).entries
    d = A.shape[0] // 2
    return np.mod(np.sum(A[:d, :] * A[d:, :], axis=0), 2)


def _scalar_phase(qt: QuantumTorus, r) -> complex | None:
    rows, vals = translation_action(qt, np.asarray(r)[None, :])
    if not np.array_equal(rows[0], np.arange(qt.dim)):
        return None
    if np.max(np.abs(vals[0] - vals[0, 0])) > 1e-9:
        return None
    return vals[0, 0]


def kappa_consistent(A, qt: QuantumTorus, tol: float = 1e-9) -> bool:
    """True iff r -> A r preserves the central relations W(N e_k) = c_k Id.

    This is necessary and sufficient for an operator M with
    M W(r) M^* = W(A r) to exist on H_N(kappa).
    """
    A = as_symplectic(A).entries
    for k in range(2 * qt.d):
        e = np.zeros(2 * qt.d, dtype=np.int64)
        e[k] = qt.N
        c_in = _scalar_phase(qt, e)
        c_out = _scalar_phase(qt, A @ e)
        if c_out is None or abs(c_in - c_out) > tol:
            return False
    return True


def find_kappa(A, N: int, max_candidates: int = 100000) -> list[np.ndarray]:
    """All kappa in [0, 2 pi)^{2d} for which H_N(kappa) is invariant under A.

    With kappa' = (-kappa_1, kappa_2) the condition reads
    (A^T - Id) kappa' = pi N v_A (mod 2 pi), v_A the parity vector.
    Each solution is verified independently by :func:`kappa_consistent`.
    """
    A = as_symplectic(A)
    if not check_quantizable(A):
        raise NotQuantizableError("1 is an eigenvalue of A")
    d = A.d
    C = (A.entries.T - np.eye(2 * d, dtype=np.int64)).astype(float)
    det = abs(integer_det(A.entries.T - np.eye(2 * d, dtype=np.int64)))
    if det ** (2 * d) > max_candidates:
        raise BudgetError(f"|det(A - Id)|^(2d) = {det ** (2 * d)} candidates")
    Cinv = np.linalg.inv(C)
    v = parity_vector(A).astype(float)
    found: list[np.ndarray] = []
    for m in itertools.product(range(det), repeat=2 * d):
        t = np.mod(Cinv @ (N * v / 2 + np.asarray(m, dtype=float)), 1.0)
        t[np.isclose(t, 1.0, atol=1e-10)] = 0.0
        kp = TWO_PI * t
        kappa = _wrap(np.concatenate([-kp[:d], kp[d:]]))
        if any(np.allclose(kappa, k, atol=1e-9) for k in found):
            continue
        found.append(kappa)
    found = [k for k in found if kappa_consistent(A, QuantumTorus(N, d, k))]
    if not found:
        raise ConsistencyError("no candidate kappa passed verification")
    found.sort(key=lambda k: tuple(np.round(k, 9)))
    return found


# ---------------------------------------------------------------------------
# propagators

S_GEN = np.array([[0, -1], [1, 0]], dtype=np.int64)
L_GEN = np.array([[1, 0], [1, 1]], dtype=np.int64)


def _gen_matrix(g: str, k: int) -> np.ndarray:
    if g == "S":
        return np.linalg.matrix_power(S_GEN, k % 4)
    return np.array([[1, 0], [k, 1]], dtype=np.int64)


def sl2_word(A) -> list[tuple[str, int]]:
    """Write A in SL(2, Z) as a product of S = [[0,-1],[1,0]] and
    L = [[1,0],[1,1]] powers: A = W_1 W_2 ... W_m.

    Euclid's algorithm on the first column.
    """
    A = np.asarray(A, dtype=np.int64)
    if A.shape != (2, 2) or integer_det(A) != 1:
        raise ValidationError("expected a 2x2 integer matrix of determinant 1")
    left: list[tuple[str, int]] = []  # G = left[-1] ... left[0], G A upper
    cur = A.copy()
    while cur[1, 0] != 0:
        a, c = int(cur[0, 0]), int(cur[1, 0])
        if a != 0:
            k = -(c // a)
            if k:
                left.append(("L", k))
                cur = _gen_matrix("L", k) @ cur
        if cur[1, 0] != 0:
            left.append(("S", 1))
            cur = S_GEN @ cur
    # cur = [[s, b], [0, s]], s = +-1
    s, b = int(cur[0, 0]), int(cur[0, 1])
    word = [(g, -k) for g, k in left]  # G^{-1} = left[0]^{-1} left[1]^{-1} ...
    if s == -1:
        word.append(("S", 2))
        b = -b
    if b:
        word += [("S", 1), ("L", -b), ("S", 3)]
    word = [(g, k % 4 if g == "S" else k) for g, k in word]
    word = [(g, k) for g, k in word if k]
    prod = reduce(lambda X, w: X @ _gen_matrix(*w), word, np.eye(2, dtype=np.int64))
    assert np.array_equal(prod, A), "sl2_word reconstruction failed"
    return word


def _chirp(N, k1, k2, k, sign=1.0):
    j = np.arange(N)
    v = np.exp(1j * (sign * np.pi * k * (j * j % (2 * N)) / N + k * k2 * j / N))
    return np.diag(v), (k1 + k * k2 + np.pi * N * k, k2)


def _fourier(N, k1, k2):
    k2_out = float(_wrap([-k1])[0])
    k = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    V = np.exp(1j * (k2 * k / N + (k2_out + TWO_PI * k) * j / N)) / np.sqrt(N)
    return V, (k2, k2_out)


def _pair_propagator(A2, N, k1, k2, _fault=False):
    """M(A) for a 2x2 block mapping H_N(k1, k2) to H_N(kappa_out)."""
    M = np.eye(N, dtype=complex)
    kap = (k1, k2)
    for g, k in reversed(sl2_word(A2)):  # rightmost factor acts first
        if g == "L":
            X, kap = _chirp(N, kap[0], kap[1], k, -1.0 if _fault else 1.0)
        else:
            X = np.eye(N, dtype=complex)
            for _ in range(k):
                F, kap = _fourier(N, *kap)
                X = F @ X
        kap = tuple(float(v) for v in _wrap(kap))
        M = X @ M
    return M, kap


def _fix_phase(M: np.ndarray) -> np.ndarray:
    flat = M.ravel()
    idx = int(np.argmax(np.abs(flat) > 1e-8 * np.max(np.abs(flat))))
    z = flat[idx]
    return M * (abs(z) / z)


def propagator(A, qt: QuantumTorus, frame=None, tol: float = 1e-8,
               _fault: bool = False) -> TorusOperator:
    """Metaplectic propagator M_kappa(A) on H_N(kappa).

    d = 1: product of discrete Fourier matrices and quadratic chirps along
    a word in S and L. d > 1: A must be a product of 2x2 blocks over the
    coordinate pairs and M is the tensor product of the pair propagators.
    The global phase makes the first nonzero entry (row-major) positive.

    Raises
    ------
    ConstructionError
        If the intertwining defect exceeds `tol`.
    """
    A = as_symplectic(A)
    if not check_quantizable(A):
        raise NotQuantizableError("1 is an eigenvalue of A")
    if A.d != qt.d:
        raise ValidationError("matrix and torus dimensions differ")
    blocks = pair_blocks(A.entries)
    if blocks is None:
        raise ValidationError(
            "for d > 1 the matrix must be a product of 2x2 blocks over coordinate pairs")
    mats = []
    for i, blk in enumerate(blocks):
        k1, k2 = qt.pair_kappa(i)
        M, kout = _pair_propagator(blk, qt.N, k1, k2, _fault)
        if not np.allclose(np.exp(1j * np.array(kout)), np.exp(1j * np.array([k1, k2])),
                           atol=1e-9):
            raise ConsistencyError(
                f"kappa = {qt.kappa.tolist()} is not invariant under A "
                f"(pair {i} maps to {list(kout)}); use find_kappa")
        mats.append(M)
    op = TorusOperator(_fix_phase(reduce(np.kron, mats)), qt)
    defect = check_intertwining(op, A, qt)
    op.flags["intertwining_defect"] = defect
    if defect > tol:
        raise ConstructionError(f"intertwining defect {defect:.3e} > {tol}")
    op.certify_unitary()
    return op


def _opnorm(X: np.ndarray) -> float:
    if X.shape[0] <= 1024:
        return float(np.linalg.norm(X, 2))
    return float(np.linalg.norm(X))  # Frobenius, an upper bound


def check_intertwining(M: TorusOperator, A, qt: QuantumTorus) -> float:
    """max_k || M U(e_k/N) M^* - U(A e_k/N) || over the 2d generators."""
    A = np.asarray(A.entries if isinstance(A, IntSymplecticMatrix) else A,
                   dtype=np.int64)
    Mm = M.matrix if isinstance(M, TorusOperator) else np.asarray(M)
    worst = 0.0
    for k in range(2 * qt.d):
        e = np.zeros(2 * qt.d, dtype=np.int64)
        e[k] = 1
        lhs = Mm @ translation(qt, e).matrix @ Mm.conj().T
        rhs = translation(qt, A @ e).matrix
        worst = max(worst, _opnorm(lhs - rhs))
    return worst


def propagator_twirl(A, qt: QuantumTorus, seed: int = 0) -> np.ndarray:
    """Reference propagator by group averaging, for small N only.

    Y = sum_{r mod N} W(A r) X W(r)^* intertwines for any X; a random X
    makes Y nonzero almost surely. Returned normalized to be unitary with
    the same phase convention as :func:`propagator`.
    """
    A = as_symplectic(A).entries
    n = qt.dim
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Y = np.zeros((n, n), dtype=complex)
    for r in itertools.product(range(qt.N), repeat=2 * qt.d):
        r = np.asarray(r, dtype=np.int64)
        Y += translation(qt, A @ r).matrix @ X @ translation(qt, r).matrix.conj().T
    # Y = c M with M unitary
    c = np.sqrt(np.real(np.trace(Y.conj().T @ Y)) / n)
    return _fix_phase(Y / c)
