"""Eigenstates of M_kappa(A), eigenstate measures and Husimi densities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DecompositionError, ValidationError
from .quantization import (TrigObservable, anti_wick_multiplier,
                           moyal_square_multiplier)
from .symplectic import as_symplectic, standard_j
from .torus import (QuantumTorus, TorusOperator, TorusState, coherent_states,
                    translation_action)

__all__ = [
    "EigenData", "MeasureGrid", "eigensystem", "matrix_order_mod",
    "expectation_table", "measure_of_state", "husimi_grid", "egorov_drift",
    "quantizer_multiplier",
]


@dataclass
class EigenData:
    eigenphases: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    clusters: list = field(default_factory=list)
    context: QuantumTorus = None

    def state(self, k: int) -> TorusState:
        return TorusState(self.eigenvectors[:, k], self.context)

    def cluster_of(self, k: int) -> np.ndarray:
        for c in self.clusters:
            if k in c:
                return c
        raise IndexError(k)


def _circular_clusters(theta: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(theta, kind="stable")
    groups = [[order[0]]]
    for a, b in zip(order[:-1], order[1:]):
        if theta[b] - theta[a] <= tol:
            groups[-1].append(b)
        else:
            groups.append([b])
    if len(groups) > 1 and theta[order[0]] + 2 * np.pi - theta[order[-1]] <= tol:
        groups[0] = groups.pop() + groups[0]
    return [np.array(g) for g in groups]


def _canonical_basis(V: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(V) from the projector V V^*."""
    k = V.shape[1]
    if k == 1:
        Q = V
    else:
        P = V @ V.conj().T
        Q, _, _ = scipy.linalg.qr(P, pivoting=True, mode="economic")
        Q = Q[:, :k]
    out = np.empty_like(Q)
    for i in range(k):
        v = Q[:, i]
        idx = int(np.argmax(np.abs(v) > 1e-8 * np.max(np.abs(v))))
        out[:, i] = v * (abs(v[idx]) / v[idx])
    return out


def eigensystem(M, cluster_tol: float = 1e-9, residual_tol: float = 1e-8) -> EigenData:
    """Spectral decomposition of a unitary via the complex Schur form.

    For a normal matrix the Schur factor is diagonal and the Schur vectors
    are orthonormal eigenvectors. Eigenphases within `cluster_tol` are
    grouped and each group gets a canonical basis; output is ordered by
    eigenphase in (-pi, pi].

    Raises
    ------
    DecompositionError
        If some residual ||M v - lambda v|| exceeds `residual_tol`.
    """
    mat = M.matrix if isinstance(M, TorusOperator) else np.asarray(M, dtype=complex)
    ctx = M.context if isinstance(M, TorusOperator) else None
    n = mat.shape[0]
    if np.linalg.norm(mat.conj().T @ mat - np.eye(n), 2) > 1e-10:
        raise ValidationError("eigensystem expects a unitary matrix")
    T, Z = scipy.linalg.schur(mat, output="complex")
    theta = np.angle(np.diag(T))
    clusters = _circular_clusters(theta, cluster_tol)
    reps = [np.angle(np.mean(np.exp(1j * theta[c]))) for c in clusters]
    order = np.argsort(reps, kind="stable")
    vecs, phases, out_clusters = [], [], []
    pos = 0
    for ci in order:
        c = clusters[ci]
        B = _canonical_basis(Z[:, c])
        vecs.append(B)
        lam = np.einsum("ij,ij->j", B.conj(), mat @ B)
        phases.append(np.angle(lam))
        out_clusters.append(np.arange(pos, pos + len(c)))
        pos += len(c)
    V = np.concatenate(vecs, axis=1)
    ph = np.concatenate(phases)
    res = np.linalg.norm(mat @ V - V * np.exp(1j * ph)[None, :], axis=0)
    if np.max(res) > residual_tol:
        raise DecompositionError(f"eigenvector residual {np.max(res):.3e} > {residual_tol}")
    return EigenData(ph, V, res, out_clusters, ctx)


def matrix_order_mod(A, modulus: int, max_order: int = 100000) -> int:
    """Smallest t >= 1 with A^t = Id (mod modulus)."""
    A = as_symplectic(A).entries
    I = np.eye(A.shape[0], dtype=np.int64)
    P = np.mod(A, modulus)
    for t in range(1, max_order + 1):
        if np.array_equal(P, np.mod(I, modulus)):
            return t
        P = np.mod(P @ A, modulus)
    raise ValidationError(f"order of A mod {modulus} exceeds {max_order}")


# ---------------------------------------------------------------------------
# measures

def expectation_table(qt: QuantumTorus, psi, R) -> np.ndarray:
    """E_r = <psi | U(r/N) | psi> for each row r of R."""
    v = psi.coeffs if isinstance(psi, TorusState) else np.asarray(psi, dtype=complex)
    R = np.atleast_2d(np.asarray(R, dtype=np.int64))
    out = np.empty(R.shape[0], dtype=complex)
    step = max(1, 2_000_000 // qt.dim)
    for s in range(0, R.shape[0], step):
        rows, vals = translation_action(qt, R[s:s + step])
        out[s:s + step] = np.sum(v[rows].conj() * vals * v[None, :], axis=1)
    return out


def quantizer_multiplier(qt: QuantumTorus, quantizer: str, frame=None):
    """Coefficient multiplier r -> m_r of a quantizer (Weyl: 1)."""
    if quantizer == "weyl":
        return lambda R: np.ones(np.atleast_2d(R).shape[0])
    if quantizer == "anti_wick":
        return lambda R: anti_wick_multiplier(qt, R)
    if quantizer == "op_plus":
        if frame is None:
            raise ValidationError("op_plus needs an adapted frame")
        return moyal_square_multiplier(frame, qt, check=False)
    raise ValidationError(f"unknown quantizer {quantizer!r}")


def measure_of_state(qt: QuantumTorus, psi, quantizer: str, a: TrigObservable,
                     frame=None) -> complex:
    """<psi | Op(a) | psi> for quantizer in {'weyl', 'anti_wick', 'op_plus'}.

    Evaluated as sum_r a_r m_r <psi|U(r/N)|psi>, which is exact for
    trigonometric observables (no band restriction needed).
    """
    R, V = a.arrays()
    mult = quantizer_multiplier(qt, quantizer, frame)
    val = complex(np.sum(V * mult(R) * expectation_table(qt, psi, R)))
    return val


@dataclass
class MeasureGrid:
    """Density on the midpoint grid ((k + 1/2)/resolution)^{2d}; total = mean."""

    density: np.ndarray
    resolution: int
    context: QuantumTorus = None
    raw_total: float = 1.0

    @property
    def total(self) -> float:
        return float(np.mean(self.density))

    @property
    def masses(self) -> np.ndarray:
        return self.density / self.density.size

    def integrate(self, values: np.ndarray) -> float:
        return float(np.mean(self.density * values))


def husimi_grid(qt: QuantumTorus, psi, resolution: int,
                normalize: bool = True) -> MeasureGrid:
    """Grid of N^d |<psi | rho, kappa>|^2, normalized to total 1."""
    v = psi.coeffs if isinstance(psi, TorusState) else np.asarray(psi, dtype=complex)
    G = int(resolution)
    d = qt.d
    g = (np.arange(G) + 0.5) / G
    npts = G ** (2 * d)
    dens = np.empty(npts)
    chunk = max(1, 1_000_000 // qt.dim)
    shape = (G,) * (2 * d)
    for s in range(0, npts, chunk):
        idx = np.arange(s, min(npts, s + chunk))
        pts = g[np.stack(np.unravel_index(idx, shape), axis=1)]
        C = coherent_states(qt, pts, normalize=False)
        dens[idx] = qt.dim * np.abs(C.conj() @ v) ** 2
    dens = dens.reshape(shape)
    raw = float(np.mean(dens))
    if normalize:
        dens = dens / raw
    return MeasureGrid(dens, G, qt, raw)


def egorov_drift(qt: QuantumTorus, psi, a: TrigObservable, A, quantizer: str,
                 t_max: int, frame=None) -> list[float]:
    """|mu^N(a o A^t) - mu^N(a)| for t = 0..t_max."""
    base = measure_of_state(qt, psi, quantizer, a, frame)
    out = []
    for t in range(0, t_max + 1):
        val = measure_of_state(qt, psi, quantizer, a.compose_power(A, t), frame)
        out.append(float(abs(val - base)))
    return out
