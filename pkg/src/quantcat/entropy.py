"""Classical and quantum entropies, entropic uncertainty, certificates.

Conventions
-----------
eta(x) = -x log x with eta(0) = 0. Cylinder indices run over
j = -m .. m-1, so a refinement of order m has K^{2m} members; m = 0 is
read as the single-time family {P_i} (j = 0 only).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (BudgetError, CertificateError, CoverageError,
                     InvalidPartitionError, PositivityError,
                     RefinementAliasingError, ValidationError)
from .quantization import periodized_gaussian_batch, _scaling
from .spectra import MeasureGrid, expectation_table, quantizer_multiplier
from .symplectic import (AdaptedFrame, as_symplectic, entropy_bounds,
                         lyapunov_data, standard_j)
from .torus import QuantumTorus, TorusState, propagator

__all__ = [
    "eta", "entropy_of", "SmoothPartition", "build_partition", "trivial_partition",
    "Refinement", "refine", "lebesgue_weights", "quantum_density",
    "quantum_weights", "quantum_entropy", "subadditivity_check", "eup_check",
    "random_eup_triple", "c_bound_estimate", "entropy_certificate",
    "classical_entropy", "EntropyReport",
]

ENUM_BUDGET = 10 ** 6


def eta(x):
    """-x log x, extended by eta(0) = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = -x[pos] * np.log(x[pos])
    return out if out.ndim else float(out)


def entropy_of(weights) -> float:
    return float(np.sum(eta(np.asarray(weights, dtype=float))))


# ---------------------------------------------------------------------------
# smooth partitions

def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, s(u) + s(1-u) = 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(u > 0, np.exp(-1 / np.where(u > 0, u, 1)), 0.0)
        f1 = np.where(u < 1, np.exp(-1 / np.where(u < 1, 1 - u, 1)), 0.0)
    return f0 / (f0 + f1)


def _axis_weights(x: np.ndarray, k: int, delta0: float) -> np.ndarray:
    """chi_i(x), i < k, for k cells of width 1/k with transitions of
    half-width delta0 around each cell boundary; sum_i chi_i = 1."""
    if k == 1:
        return np.ones((1,) + x.shape)
    c = (np.arange(k) + 0.5) / k
    dist = np.abs(((x[None, ...] - c.reshape((k,) + (1,) * x.ndim)) + 0.5) % 1.0 - 0.5)
    return _smooth_step((0.5 / k + delta0 - dist) / (2 * delta0))


@dataclass
class SmoothPartition:
    """P_i = sqrt(chi_i) for a product of per-axis smooth cell covers.

    ``shape[a]`` is the number of cells along coordinate a; members are
    indexed in row-major order over ``shape``. Samples on the G-grid and
    truncated Fourier coefficients are kept for inspection.
    """

    shape: tuple
    delta0: float
    G: int
    samples: np.ndarray = None
    fourier: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.shape) // 2

    @property
    def K(self) -> int:
        return int(np.prod(self.shape))

    @property
    def support_diameter(self) -> float:
        return self.delta0

    def values(self, points) -> np.ndarray:
        """(K, P) array of P_i at points (P, 2d), taken mod 1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)) % 1.0
        chi = np.ones((1, pts.shape[0]))
        for a, k in enumerate(self.shape):
            w = _axis_weights(pts[:, a], k, self.delta0)
            chi = (chi[:, None, :] * w[None, :, :]).reshape(-1, pts.shape[0])
        P = np.sqrt(chi)
        return P / np.sqrt(np.sum(chi, axis=0))[None, :]

    def sum_squares_defect(self) -> float:
        return float(np.max(np.abs(np.sum(self.samples ** 2, axis=0) - 1)))


def _grid_points(G: int, d: int, offset: float = 0.0) -> np.ndarray:
    g = (np.arange(G) + offset) / G
    mesh = np.meshgrid(*([g] * (2 * d)), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build_partition(K: int, delta0: float = 0.1, G: int = 256, d: int = 1,
                    shape=None, fourier_tol: float = 1e-12) -> SmoothPartition:
    """Smooth partition of T^{2d} with sum_i P_i^2 = 1.

    The default cover splits only the first position coordinate into K
    cells; pass ``shape`` (cells per coordinate) for product covers, e.g.
    ``(K, K)`` for square cells in d = 1. ``delta0`` is the half-width of
    the smooth transition between neighbouring cells.

    Raises
    ------
    CoverageError
        If delta0 <= 0, exceeds half a cell width, or the transitions are
        not resolved by the grid (fewer than 4 samples across).
    """
    if shape is None:
        shape = (K,) + (1,) * (2 * d - 1)
    shape = tuple(int(s) for s in shape)
    if len(shape) != 2 * d or min(shape) < 1:
        raise ValidationError(f"bad partition shape {shape} for d={d}")
    if int(np.prod(shape)) != K or K < 2:
        raise ValidationError(f"K={K} inconsistent with shape {shape} (need K >= 2)")
    if not 0 < delta0 < 0.5:
        raise CoverageError(f"delta0={delta0} outside (0, 1/2)")
    kmax = max(shape)
    if delta0 > 0.5 / kmax:
        raise CoverageError(f"delta0={delta0} wider than half a cell (1/{2 * kmax})")
    if 2 * delta0 * G < 4:
        raise CoverageError(f"transition of width {2 * delta0} unresolved at G={G}")
    P = SmoothPartition(shape, float(delta0), int(G))
    P.samples = P.values(_grid_points(G, d)).reshape((K,) + (G,) * (2 * d))
    if P.sum_squares_defect() > 1e-10:
        raise CoverageError("sum of squares defect above 1e-10")
    for i in range(K):
        c = np.fft.fftn(P.samples[i]) / P.samples[i].size
        keep = np.abs(c) > fourier_tol
        P.fourier.append({tuple(int(v) for v in np.where(k > G // 2, k - G, k)): complex(c[tuple(k)])
                          for k in np.argwhere(keep)})
    P.samples = P.samples.reshape(K, -1)
    return P


def trivial_partition(d: int = 1, G: int = 16) -> SmoothPartition:
    """The one-member partition {1}."""
    P = SmoothPartition((1,) * (2 * d), 0.5, G)
    P.samples = np.ones((1, G ** (2 * d)))
    P.fourier = [{(0,) * (2 * d): 1.0 + 0j}]
    return P


# ---------------------------------------------------------------------------
# refinement

def _times(m: int) -> list[int]:
    return [0] if m == 0 else list(range(-m, m))


def _stretch(A, times) -> float:
    A = as_symplectic(A)
    s = 1.0
    for t in times:
        s = max(s, float(np.linalg.norm(A.power(t).astype(float), 2)))
    return s


@dataclass
class Refinement:
    """Cylinder family P_alpha = prod_j P_{alpha_j} o A^{j+p} on a grid."""

    partition: SmoothPartition
    A: object
    m: int
    G: int
    p_shift: int = 0
    times: tuple = ()
    levels: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.partition.K ** len(self.times)

    def alphas(self):
        return itertools.product(range(self.partition.K), repeat=len(self.times))

    def weights(self, density: np.ndarray | None = None, chunk: int = 1 << 15) -> np.ndarray:
        """Grid means of P_alpha^2 * density, in itertools.product order.

        Only the nonzero terms of each product are expanded: a grid point
        contributes to the cylinders allowed by the supports of the levels
        at that point, so the cost follows the overlap of the members.
        """
        K = self.partition.K
        L = len(self.times)
        npts = self.levels[0].shape[1]
        root = np.ones(npts) if density is None else np.asarray(density, float).ravel()
        out = np.zeros(K ** L)
        for s in range(0, npts, chunk):
            pt = np.arange(s, min(npts, s + chunk))
            code = np.zeros(pt.size, dtype=np.int64)
            val = root[pt]
            keep = val != 0
            pt, code, val = pt[keep], code[keep], val[keep]
            for lv in self.levels:
                sub = lv[:, pt]
                i, e = np.nonzero(sub)
                val = val[e] * sub[i, e]
                code = code[e] * K + i
                pt = pt[e]
            out += np.bincount(code, weights=val, minlength=K ** L)
        return out / npts

    def square_sum(self) -> np.ndarray:
        """Pointwise sum_alpha P_alpha^2 (telescopes to 1)."""
        tot = np.ones(self.levels[0].shape[1])
        for lv in self.levels:
            tot = tot * np.sum(lv, axis=0)
        return tot

    def sum_squares_defect(self) -> float:
        """max |sum_alpha P_alpha^2 - 1| computed by explicit enumeration."""
        acc = np.zeros(self.levels[0].shape[1])
        for alpha in self.alphas():
            prod = np.ones_like(acc)
            for lv, i in zip(self.levels, alpha):
                prod = prod * lv[i]
            acc += prod
        return float(np.max(np.abs(acc - 1)))


def refine(P: SmoothPartition, A, m: int, G: int | None = None, p_shift: int = 0,
           check_guard: bool = True) -> Refinement:
    """Evaluate the squared members P_i^2 o A^{j+p} on the G-grid.

    Raises
    ------
    RefinementAliasingError
        If G < 4 K ||A^t|| for the largest stretch among the used times.
    BudgetError
        If K^{2m} exceeds the enumeration budget.
    """
    A = as_symplectic(A)
    if m < 0:
        raise ValidationError("m must be >= 0")
    times = tuple(t + p_shift for t in _times(m))
    if P.K ** len(times) > ENUM_BUDGET:
        raise BudgetError(f"K^(2m) = {P.K ** len(times)} exceeds {ENUM_BUDGET}")
    G = P.G if G is None else int(G)
    need = 4 * P.K * _stretch(A, times)
    if check_guard and P.K > 1 and G < need:
        raise RefinementAliasingError(f"grid G={G} below 4 K ||A^t|| = {need:.1f}")
    pts = _grid_points(G, P.d)
    levels = []
    for t in times:
        img = (pts @ A.power(t).astype(float).T) % 1.0
        levels.append(P.values(img) ** 2)
    return Refinement(P, A, m, G, p_shift, times, levels)


def lebesgue_weights(P: SmoothPartition, A, m: int, G: int | None = None) -> np.ndarray:
    """Leb(P_alpha^2) for all |alpha| = 2m."""
    return refine(P, A, m, G).weights()


# ---------------------------------------------------------------------------
# quantum weights

def _multiplier_support(qt: QuantumTorus, mult, scale: float, cutoff: float = 1e-17):
    d = qt.d
    n = int(np.ceil(scale * np.sqrt(2 * np.log(1 / cutoff) / np.pi))) + 1
    if (2 * n + 1) ** (2 * d) > 5_000_000:
        raise BudgetError(f"multiplier support box of radius {n} too large")
    R = np.array(list(itertools.product(range(-n, n + 1), repeat=2 * d)), dtype=np.int64)
    m = mult(R)
    keep = np.abs(m) > cutoff
    return R[keep], m[keep]


def quantum_density(qt: QuantumTorus, psi, quantizer: str, G: int, frame=None) -> np.ndarray:
    """Density H on the G-grid with mu^N(f) = int f H for every f.

    H(rho) = sum_r m_r <psi|U(r/N)|psi> e^{2 i pi <J r, rho>}, with m_r
    the coefficient multiplier of the quantizer. For anti-Wick this is the
    Husimi function.
    """
    if quantizer not in ("anti_wick", "op_plus"):
        raise ValidationError("quantum weights need a positive quantizer (anti_wick or op_plus)")
    mult = quantizer_multiplier(qt, quantizer, frame)
    if quantizer == "anti_wick":
        scale = np.sqrt(qt.N)
    else:
        scale = np.linalg.norm(_scaling(frame, qt), 2)
    R, m = _multiplier_support(qt, mult, scale)
    E = expectation_table(qt, psi, R)
    d = qt.d
    J = standard_j(d)
    k = np.mod(R @ J.T, G)
    arr = np.zeros((G,) * (2 * d), dtype=complex)
    np.add.at(arr, tuple(k.T), m * E)
    H = np.fft.ifftn(arr) * arr.size
    return H.real


def quantum_weights(qt: QuantumTorus, psi, P: SmoothPartition, A, m: int,
                    quantizer: str = "anti_wick", p_shift: int = 0, frame=None,
                    G: int | None = None, density=None, refinement=None) -> np.ndarray:
    """mu^N(P_alpha^2 o A^p) for all |alpha| = 2m, clipped at -1e-9.

    Raises
    ------
    PositivityError
        If a weight is below -1e-6.
    """
    R = refinement if refinement is not None else refine(P, A, m, G, p_shift)
    H = density if density is not None else quantum_density(qt, psi, quantizer, R.G, frame)
    w = R.weights(H)
    if np.min(w) < -1e-6:
        raise PositivityError(f"weight {np.min(w):.3e} below -1e-6")
    return np.maximum(w, 0.0)


def quantum_entropy(qt: QuantumTorus, psi, P: SmoothPartition, m: int,
                    quantizer: str = "anti_wick", p_shift: int = 0, A=None,
                    frame=None, G: int | None = None, density=None,
                    return_weights: bool = False):
    """h^p_{2m}(psi, P) = sum_alpha eta(mu^N(P_alpha^2 o A^p))."""
    if A is None:
        raise ValidationError("quantum_entropy needs the map A")
    w = quantum_weights(qt, psi, P, A, m, quantizer, p_shift, frame, G, density)
    tot = float(np.sum(w))
    if abs(tot - 1) > 1e-6:
        raise PositivityError(f"weights sum to {tot}, not 1 within 1e-6")
    h = entropy_of(w)
    return (h, w) if return_weights else h


# ---------------------------------------------------------------------------
# subadditivity

def _translated_entropy(cache, key, fn):
    if key not in cache:
        cache[key] = fn()
    return cache[key]


def subadditivity_check(qt: QuantumTorus, psi, P: SmoothPartition, m0: int, A,
                        quantizer: str = "op_plus", frame=None, m_total: int | None = None,
                        triples=None, G: int | None = None, epsilon: float = 0.1,
                        drift_slack: float = 0.0) -> dict:
    """Check h^p_{2(n+m)} <= h^{n+p}_{2m} + h^{-m+p}_{2n} and the chain
    h_{2M} <= h^{-q m0}_{2r} + sum_j h^{-(q+1-2j) m0 + r}_{2 m0}, M = q m0 + r.

    For any positive quantizer these hold exactly, since sum_i P_i^2 = 1
    makes the block weights true marginals; the reported slack is what
    remains of ``1e-6 + drift_slack``.
    """
    A = as_symplectic(A)
    if m_total is None:
        from .symplectic import ehrenfest_times
        m_total, _ = ehrenfest_times(qt.N, epsilon, lyapunov_data(A))
    if m0 < 1:
        raise ValidationError("m0 must be >= 1")
    q, r = divmod(m_total, m0)
    # one grid for every translated family
    times = set()
    if triples is None:
        triples = [(n, m, p) for n in range(0, m_total + 1) for m in range(0, m_total + 1 - n)
                   for p in (-1, 0, 1) if n + m >= 1]
    for n, m, p in triples:
        times |= set(range(-(n + m) + p, n + m + p))
    times |= set(range(-m_total, m_total))
    need = 4 * P.K * _stretch(A, times or {0})
    G = int(G or max(P.G, 2 ** int(np.ceil(np.log2(need)))))
    H = quantum_density(qt, psi, quantizer, G, frame)
    cache = {}

    def h(p, two_m):
        # two_m is even; order m = two_m // 2; empty family has entropy 0
        if two_m == 0:
            return 0.0

        def run():
            mm = two_m // 2
            Rf = refine(P, A, mm, G, p_shift=p, check_guard=False)
            w = Rf.weights(H)
            if np.min(w) < -1e-6:
                raise PositivityError(f"weight {np.min(w):.3e} below -1e-6")
            return entropy_of(np.maximum(w, 0.0))
        return _translated_entropy(cache, (p, two_m), run)

    tol = 1e-6 + drift_slack
    rows = []
    for n, m, p in triples:
        lhs = h(p, 2 * (n + m))
        rhs = h(n + p, 2 * m) + h(-m + p, 2 * n)
        rows.append({"n": n, "m": m, "p": p, "lhs": lhs, "rhs": rhs,
                     "slack": rhs - lhs, "ok": bool(lhs <= rhs + tol)})
    chain_lhs = h(0, 2 * m_total)
    chain_rhs = h(-q * m0, 2 * r) + sum(h(-(q + 1 - 2 * j) * m0 + r, 2 * m0)
                                       for j in range(1, q + 1))
    return {
        "m_total": m_total, "m0": m0, "q": q, "r": r, "grid": G,
        "quantizer": quantizer, "tolerance": tol, "triples": rows,
        "chain": {"lhs": chain_lhs, "rhs": chain_rhs, "slack": chain_rhs - chain_lhs,
                  "ok": bool(chain_lhs <= chain_rhs + tol)},
        "max_violation": float(max([0.0] + [-row["slack"] for row in rows]
                                   + [chain_lhs - chain_rhs])),
        "ok": bool(all(row["ok"] for row in rows) and chain_lhs <= chain_rhs + tol),
    }


# ---------------------------------------------------------------------------
# entropic uncertainty

def _inv_sqrt_psd(S: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    if np.min(w) <= floor * max(1.0, np.max(w)):
        raise InvalidPartitionError(f"frame operator singular (min eigenvalue {np.min(w):.3e})")
    return (V / np.sqrt(w)) @ V.conj().T


def eup_check(pi_family, U, psi, premise_tol: float = 1e-8) -> dict:
    """Maassen-Uffink inequality for a partition of identity.

    Parameters
    ----------
    pi_family : sequence of (k_i, n) arrays
        Operators pi_i with sum_i pi_i^* pi_i = Id. Otherwise the family is
        renormalized by S^{-1/2}, S = sum_i pi_i^* pi_i, and the distance
        ||S^{-1/2} - Id|| is recorded.
    U : (n, n) unitary
    psi : unit vector

    Returns
    -------
    dict with lhs = sum eta(||pi_i psi||^2) + sum eta(||pi_i U psi||^2),
    rhs = -2 log max ||pi_i U pi_j^*|| and margin = lhs - rhs.
    """
    U = np.asarray(getattr(U, "matrix", U), dtype=complex)
    v = np.asarray(getattr(psi, "coeffs", psi), dtype=complex)
    if abs(np.linalg.norm(v) - 1) > 1e-10:
        raise ValidationError("psi must have unit norm")
    pis = [np.atleast_2d(np.asarray(p, dtype=complex)) for p in pi_family]
    n = U.shape[0]
    S = sum(p.conj().T @ p for p in pis)
    defect = float(np.linalg.norm(S - np.eye(n), 2))
    renorm = 0.0
    if defect > premise_tol:
        Sm = _inv_sqrt_psd(S)
        pis = [p @ Sm for p in pis]
        renorm = float(np.linalg.norm(Sm - np.eye(n), 2))
    w1 = np.array([np.linalg.norm(p @ v) ** 2 for p in pis])
    Uv = U @ v
    w2 = np.array([np.linalg.norm(p @ Uv) ** 2 for p in pis])
    c = 0.0
    for pi in pis:
        left = pi @ U
        for pj in pis:
            c = max(c, float(np.linalg.norm(left @ pj.conj().T, 2)))
    lhs = entropy_of(w1) + entropy_of(w2)
    rhs = -2 * np.log(c)
    return {"lhs": float(lhs), "rhs": float(rhs), "margin": float(lhs - rhs),
            "c": c, "premise_defect": defect, "renormalizer_distance": renorm}


def random_eup_triple(rng: np.random.Generator, n: int, k: int, rank: int | None = None):
    """Random (partition, unitary, state) with sum_i pi_i^* pi_i = Id."""
    rank = n if rank is None else max(int(rank), -(-n // k))
    X = [rng.standard_normal((rank, n)) + 1j * rng.standard_normal((rank, n)) for _ in range(k)]
    S = sum(x.conj().T @ x for x in X)
    Sm = _inv_sqrt_psd(S)
    pis = [x @ Sm for x in X]
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Qm, Rm = np.linalg.qr(Z)
    U = Qm * (np.diag(Rm) / np.abs(np.diag(Rm)))[None, :]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return pis, U, v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# c(A, n)

def _sample_ops(qt, pts, B):
    d = qt.d
    return periodized_gaussian_batch(qt, pts[:, :2 * d], pts[:, 2 * d:], B)


def c_bound_estimate(qt: QuantumTorus, frame, A, n: int, samples: int = 64,
                     refine_rounds: int = 2, seed: int = 0, delta: float = 0.01,
                     epsilon: float = 0.1, M=None) -> dict:
    """Sampled lower estimate of c(A, n) and the theorem's right-hand side.

    c_hat is the largest ||X(rho, rho0) M^n X(rho', rho0')^*|| over seeded
    random 4-tuples, followed by ``refine_rounds`` rounds of local search
    around the current maximizer. theorem_rhs is
    |det B| hbar^{-delta - eps Lambda_+/lambda_max} e^{-n Lambda_0}
    without the unspecified constant.
    """
    if samples < 1:
        raise ValidationError("samples must be positive")
    A = as_symplectic(A)
    d = qt.d
    B = _scaling(frame, qt)
    M = propagator(A, qt) if M is None else M
    Mn = np.linalg.matrix_power(M.matrix, n)
    rng = np.random.default_rng(seed)
    tuples = rng.random((samples, 2, 4 * d))  # (sample, side, rho|rho0)
    best, arg = -1.0, None
    chunk = max(1, min(samples, 4_000_000 // qt.dim ** 2))

    def evaluate(tp):
        L = _sample_ops(qt, tp[:, 0], B)
        R = _sample_ops(qt, tp[:, 1], B)
        prods = L @ Mn[None] @ np.conj(np.transpose(R, (0, 2, 1)))
        return np.linalg.norm(prods, ord=2, axis=(1, 2))

    for s in range(0, samples, chunk):
        vals = evaluate(tuples[s:s + chunk])
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), tuples[s + i].copy()
    radius = 0.5 / max(1.0, np.sqrt(qt.N))
    local = np.random.default_rng([seed, 1])
    for _ in range(refine_rounds):
        cand = (arg[None] + radius * (2 * local.random((16, 2, 4 * d)) - 1)) % 1.0
        vals = evaluate(cand)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), cand[i].copy()
        radius /= 2
    L = lyapunov_data(A)
    lam0, lamp = entropy_bounds(L)
    hb = qt.hbar
    rhs = abs(np.linalg.det(B)) * hb ** (-delta - epsilon * lamp / L.lambda_max) * np.exp(-n * lam0)
    return {"c_hat": best, "theorem_rhs": float(rhs), "samples": samples,
            "refine_rounds": refine_rounds, "seed": seed, "n": n,
            "argmax": arg.reshape(-1).tolist(), "log_det_B": float(np.log(abs(np.linalg.det(B)))),
            "Lambda_0": lam0, "Lambda_plus": lamp, "delta": delta, "epsilon": epsilon}


# ---------------------------------------------------------------------------
# certificate

def _frame_family(qt: QuantumTorus, frame, n_rho: int, n_rho0: int):
    d = qt.d
    B = _scaling(frame, qt)
    rg = _grid_points(n_rho, d, 0.5)
    r0 = _grid_points(n_rho0, d, 0.5)
    rho = np.repeat(rg, len(r0), axis=0)
    rho0 = np.tile(r0, (len(rg), 1))
    X = periodized_gaussian_batch(qt, rho, rho0, B)
    w = 1.0 / (len(rg) * len(r0))
    return X, rho0, w


def entropy_certificate(qt: QuantumTorus, psi, P: SmoothPartition, m: int, n: int,
                        frame, A, n_rho: int = 2, n_rho0: int = 12,
                        margin_tol: float = 1e-6, M=None) -> dict:
    """Finite-N entropy lower bound for an eigenvector of M^n.

    The (rho, rho0) integral partition of identity is discretized on
    midpoint grids: pi_alpha psi = (sqrt(w) P_alpha(rho0_g) X_g psi)_g with
    X_g the periodized Gaussian operators. The frame operator
    S = sum_g w X_g^* X_g is inverted so the family is an exact partition
    of identity. With F_alpha = pi_alpha^* pi_alpha the uncertainty
    principle for U = M^n gives

        h_{2m} >= -log max ||F_alpha^{1/2} U F_beta^{1/2}||
               >= -log max Leb_g(P_alpha^2) - log c_disc,

    c_disc = max_{g, g'} ||X~_g U X~_{g'}^*||, X~ = X S^{-1/2}.
    """
    A = as_symplectic(A)
    v = np.asarray(getattr(psi, "coeffs", psi), dtype=complex)
    M = propagator(A, qt) if M is None else M
    U = np.linalg.matrix_power(M.matrix, n)
    X, rho0, w = _frame_family(qt, frame, n_rho, n_rho0)
    ng, dim = X.shape[0], qt.dim
    S = w * np.einsum("gji,gjk->ik", X.conj(), X)
    frame_defect = float(np.linalg.norm(S - np.eye(dim), 2))
    Sm = _inv_sqrt_psd(S)
    Xt = X @ Sm[None]
    renorm = float(np.linalg.norm(Sm - np.eye(dim), 2))
    # cylinder weights on the rho0 grid
    times = _times(m)
    if P.K ** len(times) > ENUM_BUDGET:
        raise BudgetError("enumeration budget exceeded")
    levels = [P.values((rho0 @ A.power(t).astype(float).T) % 1.0) ** 2 for t in times]
    Kn = P.K ** len(times)
    Palpha2 = np.ones((Kn, ng))
    for idx, alpha in enumerate(itertools.product(range(P.K), repeat=len(times))):
        for lv, i in zip(levels, alpha):
            Palpha2[idx] *= lv[i]
    leb = Palpha2.sum(axis=1) * w  # rho part integrates to 1
    leb_max = float(np.max(leb))
    # F_alpha = sum_g w P_alpha^2(g) X~_g^* X~_g
    G_ops = np.einsum("gji,gjk->gik", Xt.conj(), Xt).reshape(ng, -1)
    F = (w * Palpha2 @ G_ops).reshape(Kn, dim, dim)
    weights = np.real(np.einsum("i,aij,j->a", v.conj(), F, v))
    weights = np.where(np.abs(weights) < 1e-15, 0.0, weights)
    if np.min(weights) < -1e-9:
        raise CertificateError("negative cylinder weight in the discretized family")
    h = entropy_of(np.maximum(weights, 0.0))
    roots = [scipy.linalg.sqrtm(0.5 * (Fa + Fa.conj().T)) for Fa in F]
    eup = eup_check([np.asarray(r) for r in roots], U, v / np.linalg.norm(v))
    c_exact = eup["c"]
    # c over the discretized family: all ordered pairs (g, g')
    left = Xt @ U[None]
    c_disc = 0.0
    XtH = np.conj(np.transpose(Xt, (0, 2, 1)))
    step = max(1, 2_000_000 // (dim * dim * ng))
    for s in range(0, ng, step):
        prods = np.einsum("aij,bjk->abik", left[s:s + step], XtH)
        c_disc = max(c_disc, float(np.max(np.linalg.norm(prods, ord=2, axis=(2, 3)))))
    cert = -np.log(leb_max) - np.log(c_disc)
    record = {
        "N": qt.N, "m": m, "n": n, "K": P.K, "delta0": P.delta0,
        "n_rho": n_rho, "n_rho0": n_rho0, "h_2m": h,
        "eup_lower_bound": float(-np.log(c_exact)),
        "certified_lower_bound": float(cert),
        "leb_max": leb_max, "c_disc": c_disc,
        "margin": float(h - cert), "eup_margin": float(h + np.log(c_exact)),
        "frame_defect": frame_defect, "renormalizer_distance": renorm,
        "weights_sum": float(np.sum(weights)), "margin_tol": margin_tol,
    }
    if record["margin"] < -margin_tol:
        raise CertificateError(f"certificate margin {record['margin']:.3e} below -{margin_tol}")
    return record


# ---------------------------------------------------------------------------
# classical entropy

def classical_entropy(mu: MeasureGrid, K: int, A, m_max: int, check_guard: bool = True,
                      atoms=None) -> dict:
    """Cylinder entropies of a grid measure for square cells of side 1/K.

    Each grid cell, represented by its midpoint, is pushed through A^j for
    j = -m .. m-1 and labelled by the visited cells. ``atoms`` is an
    optional list of (point, mass) pairs added to the grid measure.

    Returns per-m values (1/2m) H_{2m} and the increment estimates
    (H_{2m} - H_{2m-2}) / 2.
    """
    A = as_symplectic(A)
    G = mu.resolution
    d = A.d
    stretch = _stretch(A, range(-m_max, m_max))
    if check_guard and G < K * stretch:
        raise RefinementAliasingError(f"grid G={G} below K ||A^m|| = {K * stretch:.1f}")
    pts = _grid_points(G, d, 0.5)
    mass = mu.density.ravel() / mu.density.size
    if atoms:
        pts = np.vstack([pts] + [np.atleast_2d(p) for p, _ in atoms])
        mass = np.concatenate([mass, [float(w) for _, w in atoms]])
    mass = mass / mass.sum()
    keep = mass > 0
    pts, mass = pts[keep], mass[keep]

    def label(t):
        img = (pts @ A.power(t).astype(float).T) % 1.0
        cells = np.minimum(np.floor(img * K).astype(np.int64), K - 1)
        return np.ravel_multi_index(tuple(cells.T), (K,) * (2 * d))

    per_m, H = {}, {0: 0.0}
    for m in range(1, m_max + 1):
        codes = np.stack([label(t) for t in range(-m, m)], axis=1)
        _, inv = np.unique(codes, axis=0, return_inverse=True)
        cyl = np.bincount(inv.ravel(), weights=mass)
        H[m] = entropy_of(cyl)
        per_m[m] = H[m] / (2 * m)
    incr = {m: (H[m] - H[m - 1]) / 2 for m in range(1, m_max + 1)}
    return {"K": K, "m_max": m_max, "grid": G, "H": {m: H[m] for m in per_m},
            "h": per_m, "increment": incr}


# ---------------------------------------------------------------------------
# report

@dataclass
class EntropyReport:
    h_classical: dict = field(default_factory=dict)
    h_quantum: dict = field(default_factory=dict)
    lambda_bounds: tuple = (0.0, 0.0)
    c_estimate: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    eta_convention: str = "eta(x) = -x log x, eta(0) = 0"

    def check(self, K: int | None = None) -> None:
        for key, val in self.h_quantum.items():
            if val < -1e-12:
                raise ValidationError(f"negative entropy at {key}")
        if self.certificate and self.certificate.get("margin", 0.0) < -1e-6:
            raise CertificateError("certificate exceeds quantum entropy")

    def to_dict(self) -> dict:
        return {
            "h_classical": self.h_classical,
            "h_quantum": {str(k): v for k, v in self.h_quantum.items()},
            "lambda_bounds": list(self.lambda_bounds),
            "c_estimate": self.c_estimate,
            "certificate": self.certificate,
            "eta_convention": self.eta_convention,
        }
