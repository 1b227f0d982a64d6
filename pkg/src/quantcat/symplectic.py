"""Integer symplectic matrices: checks, Lyapunov data, block assembly and
the Lyapunov-adapted scaling matrix B(hbar).

Coordinates on R^{2d} are ordered (x_1, ..., x_d, xi_1, ..., xi_d) and the
symplectic form is sigma(rho, rho') = <rho, J rho'> with

    J = [[0, -Id], [Id, 0]].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DimensionError, IllConditionedSpectrumError,
                     UnsupportedFrameError, ValidationError)

__all__ = [
    "standard_j", "IntSymplecticMatrix", "LyapunovData", "AdaptedFrame",
    "check_symplectic", "check_quantizable", "integer_det", "lyapunov_data",
    "entropy_bounds", "diamond", "adapted_frame", "adapted_scaling_matrix",
    "ehrenfest_times", "parse_matrix", "pair_blocks",
]

EIG_TOL = 1e-8


def standard_j(d: int, dtype=np.int64) -> np.ndarray:
    """Return the standard symplectic matrix J of size 2d."""
    J = np.zeros((2 * d, 2 * d), dtype=dtype)
    J[:d, d:] = -np.eye(d, dtype=dtype)
    J[d:, :d] = np.eye(d, dtype=dtype)
    return J


def _as_square_even(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise DimensionError(f"side length {M.shape[0]} is odd")
    return M


def _exact_int(M) -> list[list[int]]:
    M = np.asarray(M)
    if not np.issubdtype(M.dtype, np.integer):
        if not np.all(np.equal(np.round(M), M)):
            raise ValidationError("matrix entries must be integers")
    return [[int(v) for v in row] for row in M]


def _matmul_int(A, B):
    n, k, m = len(A), len(B), len(B[0])
    return [[sum(A[i][l] * B[l][j] for l in range(k)) for j in range(m)]
            for i in range(n)]


def integer_det(M) -> int:
    """Exact determinant of an integer matrix (fraction-free Bareiss)."""
    a = _exact_int(M)
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def check_symplectic(M) -> bool:
    """True iff M^T J M = J in exact integer arithmetic.

    Raises
    ------
    DimensionError
        If M is not square with an even side.
    """
    M = _as_square_even(M)
    try:
        a = _exact_int(M)
    except ValidationError:
        return False
    d = len(a) // 2
    J = standard_j(d).tolist()
    At = [list(r) for r in zip(*a)]
    return _matmul_int(_matmul_int(At, J), a) == J


@dataclass(frozen=True)
class IntSymplecticMatrix:
    """Integer matrix in Sp(2d, Z).

    Construction verifies A^T J A = J exactly.
    """

    entries: np.ndarray
    d: int = field(init=False)

    def __post_init__(self):
        M = _as_square_even(self.entries)
        if not check_symplectic(M):
            raise ValidationError("matrix is not symplectic: A^T J A != J")
        M = np.array(_exact_int(M), dtype=np.int64)
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        object.__setattr__(self, "d", M.shape[0] // 2)

    @property
    def A(self) -> np.ndarray:
        return self.entries

    def inverse(self) -> "IntSymplecticMatrix":
        # A^{-1} = -J A^T J for symplectic A
        J = standard_j(self.d)
        return IntSymplecticMatrix(-J @ self.entries.T @ J)

    def power(self, t: int) -> np.ndarray:
        base = self.entries if t >= 0 else self.inverse().entries
        out = np.eye(2 * self.d, dtype=np.int64)
        for _ in range(abs(t)):
            out = base @ out
        return out

    def __matmul__(self, other):
        if isinstance(other, IntSymplecticMatrix):
            return IntSymplecticMatrix(self.entries @ other.entries)
        return self.entries @ np.asarray(other)

    def tolist(self):
        return self.entries.tolist()


def as_symplectic(A) -> IntSymplecticMatrix:
    if isinstance(A, IntSymplecticMatrix):
        return A
    return IntSymplecticMatrix(np.asarray(A))


def parse_matrix(text: str) -> IntSymplecticMatrix:
    """Parse ``"2,1;1,1"`` (rows separated by ';') into a symplectic matrix."""
    try:
        rows = [[int(v) for v in row.split(",")] for row in text.strip().split(";")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse matrix {text!r}: {exc}") from None
    if len({len(r) for r in rows}) != 1:
        raise DimensionError(f"ragged matrix {text!r}")
    return IntSymplecticMatrix(np.array(rows, dtype=np.int64))


def check_quantizable(M) -> bool:
    """True iff det(M - Id) != 0, i.e. 1 is not an eigenvalue."""
    A = as_symplectic(M).entries
    return integer_det(A - np.eye(A.shape[0], dtype=np.int64)) != 0


@dataclass(frozen=True)
class LyapunovData:
    exponents: tuple
    multiplicities: tuple
    neutral_halfdim: int
    lambda_max: float
    Lambda_plus: float
    Lambda_zero: float

    @property
    def r(self) -> int:
        return len(self.exponents)

    @property
    def d(self) -> int:
        return self.neutral_halfdim + sum(self.multiplicities)

    def as_dict(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "multiplicities": list(self.multiplicities),
            "neutral_halfdim": self.neutral_halfdim,
            "lambda_max": self.lambda_max,
            "Lambda_plus": self.Lambda_plus,
            "Lambda_zero": self.Lambda_zero,
        }


def lyapunov_from_exponents(exponents, multiplicities, neutral_halfdim) -> LyapunovData:
    """Assemble LyapunovData from (sorted, distinct, positive) exponents."""
    exps = tuple(float(e) for e in exponents)
    mult = tuple(int(m) for m in multiplicities)
    lmax = exps[-1] if exps else 0.0
    lplus = float(sum(m * e for e, m in zip(exps, mult)))
    lzero = float(sum(m * max(e - lmax / 2, 0.0) for e, m in zip(exps, mult)))
    return LyapunovData(exps, mult, int(neutral_halfdim), lmax, lplus, lzero)


def _cluster(values: np.ndarray, rtol: float) -> list[list[float]]:
    groups: list[list[float]] = []
    for v in np.sort(values):
        if groups and abs(v - groups[-1][0]) <= rtol * max(abs(v), 1.0):
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def lyapunov_data(M, tol: float = EIG_TOL) -> LyapunovData:
    """Lyapunov exponents and the entropy bounds of an integer symplectic matrix.

    Exponents are log|beta| for eigenvalues with modulus > 1, clustered with
    relative tolerance `tol`; multiplicities are counted over the spectrum.

    Raises
    ------
    IllConditionedSpectrumError
        If some modulus lies within 10*tol of 1 without being within tol.
    """
    A = as_symplectic(M)
    ev = np.linalg.eigvals(A.entries.astype(float))
    logmod = np.log(np.abs(ev))
    dist = np.abs(logmod)
    bad = (dist > tol) & (dist <= 10 * tol)
    if np.any(bad):
        raise IllConditionedSpectrumError(
            f"eigenvalue moduli {np.abs(ev[bad])} are ambiguously close to 1")
    n_neutral = int(np.sum(dist <= tol))
    if n_neutral % 2:
        raise IllConditionedSpectrumError("odd number of unit-modulus eigenvalues")
    expanding = logmod[logmod > tol]
    groups = _cluster(expanding, tol)
    exps = [float(np.mean(g)) for g in groups]
    mult = [len(g) for g in groups]
    return lyapunov_from_exponents(exps, mult, n_neutral // 2)


def entropy_bounds(L: LyapunovData) -> tuple[float, float]:
    """Return (Lambda_0, Lambda_+), the lower bound and the Ruelle upper bound."""
    return L.Lambda_zero, L.Lambda_plus


def diamond(M1, M2) -> np.ndarray:
    """Block-interleaving product of two matrices of even side.

    With M_k = [[A_k, B_k], [C_k, D_k]] the result is
    [[diag(A_1, A_2), diag(B_1, B_2)], [diag(C_1, C_2), diag(D_1, D_2)]].
    """
    M1 = _as_square_even(M1)
    M2 = _as_square_even(M2)
    p, q = M1.shape[0] // 2, M2.shape[0] // 2
    n = p + q
    out = np.zeros((2 * n, 2 * n), dtype=np.result_type(M1, M2))
    for bi in range(2):
        for bj in range(2):
            out[bi * n:bi * n + p, bj * n:bj * n + p] = \
                M1[bi * p:(bi + 1) * p, bj * p:(bj + 1) * p]
            out[bi * n + p:(bi + 1) * n, bj * n + p:(bj + 1) * n] = \
                M2[bi * q:(bi + 1) * q, bj * q:(bj + 1) * q]
    return out


def pair_blocks(M, tol: float = 0.0) -> list[np.ndarray] | None:
    """Split M into its 2x2 blocks on the coordinate pairs (x_i, xi_i).

    Returns None if M couples different pairs (beyond `tol`).
    """
    M = _as_square_even(M)
    d = M.shape[0] // 2
    idx = np.arange(2 * d) % d
    if np.any(np.abs(M[idx[:, None] != idx[None, :]]) > tol):
        return None
    return [M[np.ix_([i, d + i], [i, d + i])] for i in range(d)]


@dataclass(frozen=True)
class AdaptedFrame:
    """Symplectic conjugator Q and per-pair growth exponents.

    After conjugation Q^{-1} A Q is a block product, one 2x2 block per
    coordinate pair; ``pair_exponents[i]`` is the Lyapunov exponent of
    pair i (0 for a neutral pair).
    """

    conjugator_Q: np.ndarray
    block_order: tuple
    epsilon0: float = 0.05
    pair_exponents: tuple = ()

    def __post_init__(self):
        Q = np.asarray(self.conjugator_Q, dtype=float)
        d = Q.shape[0] // 2
        J = standard_j(d, float)
        if np.max(np.abs(Q.T @ J @ Q - J)) > 1e-10:
            raise ValidationError("conjugator Q is not symplectic")
        if sum(h for h, _ in self.block_order) != d:
            raise ValidationError("block half-dimensions do not sum to d")
        if self.epsilon0 <= 0:
            raise ValidationError("epsilon0 must be positive")
        if not self.pair_exponents:
            pe = []
            for h, lam in self.block_order:
                pe += [float(lam)] * h
            object.__setattr__(self, "pair_exponents", tuple(pe))
        object.__setattr__(self, "conjugator_Q", Q)

    @property
    def d(self) -> int:
        return self.conjugator_Q.shape[0] // 2

    @property
    def lambda_max(self) -> float:
        return max(self.pair_exponents)

    def gammas(self) -> np.ndarray:
        """Per-pair scaling exponents gamma_j = lambda_j / (2 lambda_max)."""
        lmax = self.lambda_max
        if lmax <= 0:
            raise UnsupportedFrameError(
                "purely neutral spectrum: the entropy bound is trivial")
        lam = np.asarray(self.pair_exponents)
        return np.where(lam > 0, lam, self.epsilon0) / (2 * lmax)


def _pair_exponent(block: np.ndarray) -> float:
    ev = np.linalg.eigvals(block)
    lam = float(np.max(np.log(np.abs(ev))))
    return lam if lam > EIG_TOL else 0.0


def adapted_frame(M, Q=None, epsilon0: float = 0.05) -> AdaptedFrame:
    """Build the adapted frame of A.

    For d = 1 hyperbolic matrices Q is formed from the unstable/stable
    eigenvectors scaled so that Q is symplectic. Otherwise Q defaults to the
    identity and Q^{-1} A Q must already be a block product over coordinate
    pairs.
    """
    A = as_symplectic(M)
    Af = A.entries.astype(float)
    d = A.d
    if Q is None:
        Q = np.eye(2 * d)
        if d == 1:
            ev, vec = np.linalg.eig(Af)
            if np.all(np.isreal(ev)) and abs(abs(ev[0]) - 1) > EIG_TOL:
                order = np.argsort(-np.abs(ev))
                u, s = np.real(vec[:, order[0]]), np.real(vec[:, order[1]])
                sig = u @ standard_j(1, float) @ s
                Q = np.column_stack([u, -s / sig])
    Q = np.asarray(Q, dtype=float)
    conj = np.linalg.solve(Q, Af @ Q)
    blocks = pair_blocks(conj, tol=1e-9)
    if blocks is None:
        raise UnsupportedFrameError(
            "Q^{-1} A Q is not a product of 2x2 blocks over coordinate pairs")
    pe = tuple(_pair_exponent(b) for b in blocks)
    order = []
    for lam in pe:
        if order and abs(order[-1][1] - lam) <= EIG_TOL * max(lam, 1):
            order[-1] = (order[-1][0] + 1, order[-1][1])
        else:
            order.append((1, lam))
    return AdaptedFrame(Q, tuple(order), epsilon0, pe)


def adapted_scaling_matrix(frame: AdaptedFrame, hbar: float) -> np.ndarray:
    """B(hbar) = Q diag(D(hbar), D(hbar)) Q^{-1}, D = diag(hbar^{-gamma_j})."""
    if hbar <= 0:
        raise ValidationError("hbar must be positive")
    g = frame.gammas()
    D = np.concatenate([hbar ** -g, hbar ** -g])
    Q = frame.conjugator_Q
    return Q @ np.diag(D) @ np.linalg.inv(Q)


def ehrenfest_times(N: int, epsilon: float, L: LyapunovData) -> tuple[int, int]:
    """Return (m_E, n_E) = floors of (1-eps) log N / (2 lmax), (1-eps)|log hbar| / lmax."""
    if L.lambda_max <= 0:
        raise UnsupportedFrameError("lambda_max must be positive")
    c = (1 - epsilon) / L.lambda_max
    m_e = int(np.floor(c * np.log(N) / 2))
    n_e = int(np.floor(c * np.log(2 * np.pi * N)))
    return max(m_e, 0), max(n_e, 0)
