"""Weyl, anti-Wick and adapted positive quantizations on H_N(kappa).

Observables are truncated Fourier series

    a(rho) = sum_r a_r exp(-2 i pi <J r, rho>),

and the Weyl quantization is Op^w(a) = sum_r a_r U(r/N). Convolving with a
Gaussian g acts on coefficients as a_r -> a_r * g^(-J r) (Fourier transform
g^(k) = int g(w) exp(-2 i pi <k, w>) dw), so both positive quantizations
are Weyl quantizations of rescaled coefficients:

* anti-Wick:  a_r exp(-pi |r|^2 / (2N)),
* Op^+:       a_r mu_r with mu_r = (G_hbar # G_hbar)^(-J r).

For G_hbar = 2^{d/2} |det B|^{1/2} exp(-pi |B w|^2) the Moyal square has

    mu_r = exp(-pi/2 |B^{-T} J r|^2 - pi/(8 N^2) |B r|^2),

which is real, positive, with mu_0 = 1. The closed form is checked against
quadrature of the kernel integral at construction time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse

from .errors import AliasingError, DerivationError, ValidationError
from .symplectic import (AdaptedFrame, adapted_scaling_matrix, as_symplectic,
                         standard_j)
from .torus import (QuantumTorus, TorusOperator, coherent_states,
                    propagator, translation_action)

__all__ = [
    "TrigObservable", "weyl", "weyl_matrix", "anti_wick", "anti_wick_multiplier",
    "GaussianSymbol", "MultiplierTable", "moyal_square_multiplier",
    "multiplier_quadrature", "op_plus", "periodized_gaussian_coeffs",
    "periodized_gaussian_op", "periodized_gaussian_batch",
    "periodization_direct", "periodization_fourier", "twisted_product_hat",
    "egorov_plus_drift", "plane_norm_oracle", "anti_wick_identity_defect",
    "frame_identity_defect",
]

TRUNC = 1e-15


# ---------------------------------------------------------------------------
# observables

class TrigObservable:
    """Finite Fourier series on T^{2d}.

    Parameters
    ----------
    coeffs : dict
        Map from integer tuples r (length 2d) to complex a_r.
    real : bool, optional
        Declare the observable real-valued; a_{-r} = conj(a_r) is asserted.
    """

    def __init__(self, coeffs: dict, d: int | None = None, real: bool = False,
                 tol: float = 1e-12):
        items = {tuple(int(v) for v in r): complex(c) for r, c in coeffs.items()}
        if d is None:
            if not items:
                raise ValidationError("empty observable needs an explicit d")
            d = len(next(iter(items))) // 2
        self.d = int(d)
        if any(len(r) != 2 * self.d for r in items):
            raise ValidationError("coefficient index length differs from 2d")
        self.coeffs = {r: c for r, c in items.items() if c != 0}
        self.real = bool(real)
        if real:
            for r, c in self.coeffs.items():
                neg = tuple(-v for v in r)
                if abs(self.coeffs.get(neg, 0) - np.conj(c)) > tol * max(1, abs(c)):
                    raise ValidationError(f"real flag set but a_-r != conj(a_r) at {r}")

    # -- construction helpers
    @classmethod
    def constant(cls, c=1.0, d: int = 1):
        return cls({(0,) * (2 * d): c}, d, real=np.isreal(c))

    @classmethod
    def cos_x(cls, d: int = 1, axis: int = 0, freq: int = 1):
        """cos(2 pi freq x_axis)."""
        r = [0] * (2 * d)
        r[d + axis] = freq  # J r has x-component -r_xi
        rn = [-v for v in r]
        return cls({tuple(r): 0.5, tuple(rn): 0.5}, d, real=True)

    @classmethod
    def from_arrays(cls, R, vals, d=None, real=False):
        R = np.atleast_2d(np.asarray(R, dtype=np.int64))
        out: dict = {}
        for r, v in zip(map(tuple, R), np.asarray(vals, dtype=complex)):
            out[r] = out.get(r, 0) + v
        return cls(out, d if d is not None else R.shape[1] // 2, real)

    @classmethod
    def from_grid(cls, values: np.ndarray, band: int, real=None, cutoff=0.0):
        """Fourier coefficients |r|_inf <= band of grid samples at k/G."""
        values = np.asarray(values)
        d = values.ndim // 2
        G = values.shape[0]
        if 2 * band + 1 > G:
            raise AliasingError(f"band {band} needs a grid of at least {2 * band + 1}")
        F = np.fft.fftn(values) / values.size
        out = {}
        rng = range(-band, band + 1)
        J = standard_j(d)
        for k in itertools.product(rng, repeat=2 * d):
            c = F[tuple(np.mod(k, G))]
            if abs(c) > cutoff:
                out[tuple(J @ np.array(k))] = c
        if real is None:
            real = np.isrealobj(values)
        if real:
            out = {r: c for r, c in out.items()}
        return cls(out, d, real=bool(real), tol=1e-9)

    @classmethod
    def bump(cls, center, k: int = 4, d: int = 1):
        """prod_i ((1 + cos 2 pi (rho_i - c_i)) / 2)^k, a nonnegative bump of band k."""
        center = np.asarray(center, dtype=float)
        res = cls.constant(1.0, d)
        J = standard_j(d)
        for i in range(2 * d):
            kk = np.zeros(2 * d, dtype=np.int64)
            kk[i] = 1
            r = tuple(J @ kk)
            ph = np.exp(-2j * np.pi * center[i])
            f = cls({(0,) * (2 * d): 0.5, r: 0.25 * ph,
                     tuple(-v for v in r): 0.25 * np.conj(ph)}, d, real=True)
            for _ in range(k):
                res = res * f
        return res

    @classmethod
    def random_nonnegative(cls, rng: np.random.Generator, band: int = 2, d: int = 1):
        """|p|^2 for a random trig polynomial p with a zero; band <= `band`."""
        h = max(band // 2, 1)
        p = {}
        for r in itertools.product(range(-h, h + 1), repeat=2 * d):
            p[r] = rng.standard_normal() + 1j * rng.standard_normal()
        P = cls(p, d)
        # vanish at a random point so that min a = 0 exactly
        P = P + (-complex(P(rng.random((1, 2 * d)))[0]))
        return (P * P.conj()).realified()

    # -- algebra
    @property
    def band(self) -> int:
        if not self.coeffs:
            return 0
        return int(max(max(abs(v) for v in r) for r in self.coeffs))

    def arrays(self):
        if not self.coeffs:
            return np.zeros((0, 2 * self.d), dtype=np.int64), np.zeros(0, complex)
        R = np.array(list(self.coeffs.keys()), dtype=np.int64)
        V = np.array(list(self.coeffs.values()), dtype=complex)
        return R, V

    def conj(self) -> "TrigObservable":
        return TrigObservable({tuple(-v for v in r): np.conj(c)
                               for r, c in self.coeffs.items()}, self.d, self.real)

    def realified(self) -> "TrigObservable":
        """Symmetrize to exactly satisfy a_{-r} = conj(a_r)."""
        c = self.conj()
        keys = set(self.coeffs) | set(c.coeffs)
        out = {r: 0.5 * (self.coeffs.get(r, 0) + c.coeffs.get(r, 0)) for r in keys}
        return TrigObservable(out, self.d, real=True)

    def __add__(self, other):
        if np.isscalar(other):
            other = TrigObservable.constant(other, self.d)
        out = dict(self.coeffs)
        for r, c in other.coeffs.items():
            out[r] = out.get(r, 0) + c
        return TrigObservable(out, self.d, self.real and other.real)

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            return TrigObservable({r: c * other for r, c in self.coeffs.items()},
                                  self.d, self.real and np.isreal(other))
        out: dict = {}
        for r, c in self.coeffs.items():
            for s, e in other.coeffs.items():
                k = tuple(a + b for a, b in zip(r, s))
                out[k] = out.get(k, 0) + c * e
        return TrigObservable(out, self.d)

    __rmul__ = __mul__

    def multiply_coeffs(self, fn: Callable[[np.ndarray], np.ndarray]) -> "TrigObservable":
        R, V = self.arrays()
        return TrigObservable.from_arrays(R, V * fn(R), self.d, real=False)

    def compose(self, A) -> "TrigObservable":
        """Coefficients of a o A: the coefficient a_r moves to A^{-1} r."""
        A = as_symplectic(A)
        R, V = self.arrays()
        Ainv = A.inverse().entries
        return TrigObservable.from_arrays(R @ Ainv.T, V, self.d, self.real)

    def compose_power(self, A, t: int) -> "TrigObservable":
        A = as_symplectic(A)
        R, V = self.arrays()
        P = A.power(-t)
        return TrigObservable.from_arrays(R @ P.T, V, self.d, self.real)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        R, V = self.arrays()
        J = standard_j(self.d)
        phase = np.exp(-2j * np.pi * pts @ (R @ J.T).T)
        out = phase @ V
        return out.real if self.real else out

    def on_grid(self, G: int, offset: float = 0.5) -> np.ndarray:
        """Values at the points (k + offset)/G, shape (G,)*2d."""
        g = (np.arange(G) + offset) / G
        mesh = np.meshgrid(*([g] * (2 * self.d)), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return self(pts).reshape((G,) * (2 * self.d))

    def to_dict(self) -> dict:
        return {",".join(map(str, r)): [c.real, c.imag] for r, c in sorted(self.coeffs.items())}


# ---------------------------------------------------------------------------
# Weyl

def weyl_matrix(qt: QuantumTorus, R, V) -> np.ndarray:
    """sum_k V[k] U(R[k]/N) as a dense matrix (aliasing handled exactly)."""
    n = qt.dim
    R = np.atleast_2d(np.asarray(R, dtype=np.int64))
    V = np.asarray(V, dtype=complex)
    if R.shape[0] == 0:
        return np.zeros((n, n), dtype=complex)
    out = np.zeros(n * n, dtype=complex)
    step = max(1, 2_000_000 // n)
    for s in range(0, R.shape[0], step):
        rows, vals = translation_action(qt, R[s:s + step])
        flat = (rows * n + np.arange(n)[None, :]).ravel()
        w = (vals * V[s:s + step, None]).ravel()
        out += np.bincount(flat, weights=w.real, minlength=n * n)
        out += 1j * np.bincount(flat, weights=w.imag, minlength=n * n)
    return out.reshape(n, n)


def _check_band(qt: QuantumTorus, a: TrigObservable, allow_alias: bool):
    if a.d != qt.d:
        raise ValidationError("observable and torus dimensions differ")
    if not allow_alias and 2 * a.band >= qt.N:
        raise AliasingError(
            f"band {a.band} >= N/2 = {qt.N / 2}; pass allow_alias=True to accept aliasing")


def weyl(qt: QuantumTorus, a: TrigObservable, allow_alias: bool = False) -> TorusOperator:
    """Op^w(a) = sum_r a_r U(r/N)."""
    _check_band(qt, a, allow_alias)
    op = TorusOperator(weyl_matrix(qt, *a.arrays()), qt)
    if a.real:
        op.flags["hermitian"] = op.hermitian_defect()
    return op


# ---------------------------------------------------------------------------
# anti-Wick

def anti_wick_multiplier(qt: QuantumTorus, R) -> np.ndarray:
    R = np.atleast_2d(R)
    return np.exp(-np.pi * np.sum(R.astype(float) ** 2, axis=1) / (2 * qt.N))


def _grid_values(qt, a, G):
    if isinstance(a, TrigObservable):
        if a.d != qt.d:
            raise ValidationError("observable and torus dimensions differ")
        return a.on_grid(G)
    if callable(a):
        g = (np.arange(G) + 0.5) / G
        mesh = np.meshgrid(*([g] * (2 * qt.d)), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return np.asarray(a(pts)).reshape((G,) * (2 * qt.d))
    vals = np.asarray(a)
    if vals.shape != (G,) * (2 * qt.d):
        raise ValidationError(f"grid function must have shape {(G,) * (2 * qt.d)}")
    return vals


def _aw_quadrature_d1(qt, vals, G, tail_tol):
    """N sum_{x0, xi0} w a |rho><rho| on the midpoint grid, d = 1.

    The coherent state factorizes as a short sum over lattice images of
    (function of xi0, j) x (function of x0, n, j), which avoids evaluating
    exponentials on the full grid.
    """
    N = qt.N
    k1, k2 = qt.pair_kappa(0)
    g = (np.arange(G) + 0.5) / G
    xj = (np.arange(N) + k2 / (2 * np.pi)) / N
    width = np.sqrt(np.log(1.0 / tail_tol) / (np.pi * N))
    ns = np.arange(int(np.floor(-1 - width)), int(np.ceil(1 + width)) + 1)
    # exp(2 i pi N xi0 (x_j - n)) = H[xi0, j] * E[xi0, n]
    H = np.exp(2j * np.pi * N * g[:, None] * xj[None, :])
    E = np.exp(1j * (k1 - 2 * np.pi * N * g[:, None]) * ns[None, :])
    gauss = np.exp(-np.pi * N * (xj[None, None, :] - ns[None, :, None] - g[:, None, None]) ** 2)
    pref = (2 * N) ** 0.25 / np.sqrt(N)
    out = np.zeros((N, N), dtype=complex)
    bx = max(1, 400_000 // (G * N))
    for s in range(0, G, bx):
        xs = slice(s, min(G, s + bx))
        # c[x0, xi0, j]
        c = np.einsum("qn,xnj->xqj", E, gauss[xs])
        c *= H[None, :, :] * pref
        c *= np.exp(-1j * np.pi * N * g[xs, None, None] * g[None, :, None])
        c = c.reshape(-1, N)
        w = vals[xs].reshape(-1)
        out += (c.T * w) @ c.conj()
    return out * N / G ** 2


def anti_wick(qt: QuantumTorus, a, G: int | None = None, method: str = "quadrature",
              tail_tol: float = 1e-14) -> TorusOperator:
    """Anti-Wick quantization N^d int a(rho) |rho,kappa><rho,kappa| d rho.

    method='quadrature' uses the midpoint rule on a G^{2d} grid (default
    G = 12N) with the exact periodized coherent states. method='multiplier'
    uses the closed form a_r -> a_r exp(-pi |r|^2/(2N)) and needs a
    TrigObservable.
    """
    if method == "multiplier":
        if not isinstance(a, TrigObservable):
            raise ValidationError("multiplier method needs a TrigObservable")
        R, V = a.arrays()
        return TorusOperator(weyl_matrix(qt, R, V * anti_wick_multiplier(qt, R)), qt)
    if method != "quadrature":
        raise ValidationError(f"unknown method {method!r}")
    G = 12 * qt.N if G is None else int(G)
    if G < 8 * qt.N:
        raise ValidationError(f"quadrature grid G={G} must be at least 8N = {8 * qt.N}")
    vals = _grid_values(qt, a, G)
    if qt.d == 1:
        mat = _aw_quadrature_d1(qt, vals, G, tail_tol)
    else:
        g = (np.arange(G) + 0.5) / G
        flat = vals.reshape(-1)
        mat = np.zeros((qt.dim, qt.dim), dtype=complex)
        chunk = max(1, 2_000_000 // qt.dim)
        for s in range(0, flat.size, chunk):
            idx = np.arange(s, min(flat.size, s + chunk))
            pts = np.stack(np.unravel_index(idx, vals.shape), axis=1)
            C = coherent_states(qt, g[pts], tail_tol, normalize=False)
            mat += (C.T * flat[idx]) @ C.conj()
        mat *= qt.dim / G ** (2 * qt.d)
    return TorusOperator(mat, qt)


# ---------------------------------------------------------------------------
# adapted Gaussians and Op^+

@dataclass(frozen=True)
class GaussianSymbol:
    """normalization * exp(-pi |B (w - rho0)|^2), optionally with T_rho phase."""

    scaling: np.ndarray
    rho0: np.ndarray
    rho: np.ndarray = None
    normalization: float = None

    def __post_init__(self):
        B = np.asarray(self.scaling, dtype=float)
        d = B.shape[0] // 2
        object.__setattr__(self, "scaling", B)
        object.__setattr__(self, "rho0", np.asarray(self.rho0, dtype=float))
        if self.rho is None:
            object.__setattr__(self, "rho", np.zeros(2 * d))
        if self.normalization is None:
            object.__setattr__(self, "normalization",
                               2 ** (d / 2) * abs(np.linalg.det(B)) ** 0.5)

    def __call__(self, w) -> np.ndarray:
        w = np.atleast_2d(w) - self.rho0
        return self.normalization * np.exp(-np.pi * np.sum((w @ self.scaling.T) ** 2, axis=1))

    def integral(self) -> float:
        return self.normalization / abs(np.linalg.det(self.scaling))

    def hat(self, k) -> np.ndarray:
        """Fourier transform int G(w) exp(-2 i pi <k, w>) dw."""
        k = np.atleast_2d(k)
        Binv_t = np.linalg.inv(self.scaling).T
        q = k @ Binv_t.T
        return (self.integral() * np.exp(-np.pi * np.sum(q ** 2, axis=1))
                * np.exp(-2j * np.pi * k @ self.rho0))


def _scaling(frame, qt) -> np.ndarray:
    if isinstance(frame, AdaptedFrame):
        return adapted_scaling_matrix(frame, qt.hbar)
    return np.asarray(frame, dtype=float)


@dataclass
class MultiplierTable:
    """mu_r = (G_hbar # G_hbar)^(-J r) for the scaling matrix B."""

    scaling: np.ndarray
    N: int
    values: dict = field(default_factory=dict)
    quadrature_check: list = field(default_factory=list)

    def __call__(self, R) -> np.ndarray:
        R = np.atleast_2d(np.asarray(R, dtype=float))
        d = R.shape[1] // 2
        B = self.scaling
        J = standard_j(d, float)
        q = R @ (np.linalg.inv(B).T @ J).T
        Br = R @ B.T
        return np.exp(-np.pi / 2 * np.sum(q ** 2, axis=1)
                      - np.pi / (8 * self.N ** 2) * np.sum(Br ** 2, axis=1))


def multiplier_quadrature(B: np.ndarray, N: int, r, n_outer: int = 241,
                          n_inner: int = 481, L: float = 6.0) -> complex:
    """Numerical value of the kernel transform K^(B^{-T} J r).

    K(rho0) = 2^d int exp(-2 i pi <rho1, rho0>) G(rho1) G(A rho1 - rho0) d rho1
    with A = pi hbar B J B^T. The rho0 Fourier integral is done per
    coordinate by the trapezoid rule, the rho1 integral on a tensor grid.
    """
    B = np.asarray(B, dtype=float)
    d = B.shape[0] // 2
    hbar = 1 / (2 * np.pi * N)
    J = standard_j(d, float)
    Amat = np.pi * hbar * B @ J @ B.T
    q = np.linalg.inv(B).T @ J @ np.asarray(r, dtype=float)
    t1 = np.linspace(-L, L, n_outer)
    h1 = t1[1] - t1[0]
    mesh = np.meshgrid(*([t1] * (2 * d)), indexing="ij")
    rho1 = np.stack([m.ravel() for m in mesh], axis=1)
    c = rho1 @ Amat.T
    f = rho1 + q
    s = np.linspace(-L, L, n_inner)
    hs = s[1] - s[0]
    inner = np.ones(rho1.shape[0], dtype=complex)
    for k in range(2 * d):
        # int exp(-2 i pi f_k t) exp(-pi (c_k - t)^2) dt, t = c_k + s
        ph = np.exp(-2j * np.pi * f[:, k] * c[:, k])
        vals = np.exp(-2j * np.pi * f[:, k, None] * s[None, :] - np.pi * s[None, :] ** 2)
        inner *= ph * vals.sum(axis=1) * hs
    outer = np.exp(-np.pi * np.sum(rho1 ** 2, axis=1)) * inner
    return complex(2 ** d * outer.sum() * h1 ** (2 * d))


def moyal_square_multiplier(frame, qt: QuantumTorus, band: int | None = None,
                            check: bool = True, n_check: int = 3, seed: int = 0,
                            tol: float = 1e-4) -> MultiplierTable:
    """Closed-form multiplier table, cross-checked against quadrature.

    Raises
    ------
    DerivationError
        If closed form and quadrature differ by more than `tol`.
    """
    B = _scaling(frame, qt)
    table = MultiplierTable(B, qt.N)
    d = qt.d
    if band is not None:
        R = np.array(list(itertools.product(range(-band, band + 1), repeat=2 * d)))
        table.values = dict(zip(map(tuple, R), table(R)))
    if check:
        rng = np.random.default_rng(seed)
        R = [np.zeros(2 * d, dtype=np.int64)]
        R += [rng.integers(-3, 4, size=2 * d) for _ in range(n_check)]
        n_outer = 241 if d == 1 else 41
        for r in R:
            closed = table(r)[0]
            quad = multiplier_quadrature(B, qt.N, r, n_outer=n_outer)
            table.quadrature_check.append((tuple(int(v) for v in r), closed, quad))
            if abs(closed - quad) > tol:
                raise DerivationError(
                    f"multiplier at r={tuple(r)}: closed form {closed} vs quadrature {quad}")
    return table


def op_plus(qt: QuantumTorus, a: TrigObservable, frame, allow_alias: bool = False,
            table: MultiplierTable | None = None) -> TorusOperator:
    """Op^+(a) = Op^w(a * (G_hbar # G_hbar)), realized as Weyl of a_r mu_r."""
    _check_band(qt, a, allow_alias)
    if table is None:
        table = moyal_square_multiplier(frame, qt, check=False)
    R, V = a.arrays()
    op = TorusOperator(weyl_matrix(qt, R, V * table(R)), qt)
    return op


# ---------------------------------------------------------------------------
# periodization operators T_rho

def _gauss_band(B: np.ndarray, rho, trunc: float = TRUNC):
    """Indices r whose transform |G^(-rho - J r)| exceeds trunc * max."""
    d = B.shape[0] // 2
    J = standard_j(d, float)
    Binv_t = np.linalg.inv(B).T
    # |B^{-T} k|^2 <= log(1/trunc)/pi  =>  |k| <= sqrt(...) * ||B^T||
    rad = np.sqrt(np.log(1 / trunc) / np.pi) * np.linalg.norm(B, 2) + 2
    n = int(np.ceil(rad))
    grid = np.array(list(itertools.product(range(-n, n + 1), repeat=2 * d)), dtype=np.int64)
    k = -np.asarray(rho, float) - grid @ J.T
    keep = np.sum((k @ Binv_t.T) ** 2, axis=1) <= np.log(1 / trunc) / np.pi
    return grid[keep]


def periodized_gaussian_coeffs(qt: QuantumTorus, rho, rho0, B, R=None):
    """Fourier coefficients of T_rho(G^{rho0}):
    a_r = exp(i pi <r, rho>/N) G^{rho0}^(-rho - J r)."""
    rho = np.asarray(rho, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    if R is None:
        R = _gauss_band(B, rho)
    d = qt.d
    J = standard_j(d, float)
    k = -rho[None, :] - R @ J.T
    G = GaussianSymbol(B, rho0)
    vals = np.exp(1j * np.pi * (R @ rho) / qt.N) * G.hat(k)
    return R, vals


def periodized_gaussian_op(qt: QuantumTorus, rho, rho0, frame) -> TorusOperator:
    """Op^w(T_rho(G_hbar^{rho0})) on H_N(kappa)."""
    B = _scaling(frame, qt)
    for p in (rho, rho0):
        p = np.asarray(p, dtype=float)
        if p.shape != (2 * qt.d,):
            raise ValidationError(f"points must have length {2 * qt.d}")
    R, V = periodized_gaussian_coeffs(qt, rho, rho0, B)
    return TorusOperator(weyl_matrix(qt, R, V), qt)


class _ReducedBasis:
    """Reduces sum_r a_r U(r/N) to sum_{r0 mod N} b_{r0} U(r0/N).

    U(r0 + N n) = c(r0, n) U(r0), with c read off the monomial forms.
    """

    def __init__(self, qt: QuantumTorus, R: np.ndarray):
        N, d = qt.N, qt.d
        self.qt = qt
        R0 = np.mod(R, N)
        self.slot = np.ravel_multi_index(R0.T, (N,) * (2 * d))
        rows, vals = translation_action(qt, R)
        rows0, vals0 = translation_action(qt, R0)
        assert np.array_equal(rows, rows0)
        self.factor = vals[:, 0] / vals0[:, 0]
        base = np.array(list(itertools.product(range(N), repeat=2 * d)), dtype=np.int64)
        self.n_slots = base.shape[0]
        brow, bval = translation_action(qt, base)
        n = qt.dim
        stack = np.zeros((self.n_slots, n, n), dtype=complex)
        stack[np.arange(self.n_slots)[:, None], brow, np.arange(n)[None, :]] = bval
        self.stack = stack.reshape(self.n_slots, n * n)

    def reduce(self, V: np.ndarray) -> np.ndarray:
        """V has shape (P, len(R)); returns (P, N^{2d}) slot coefficients."""
        S = sparse.csr_matrix((self.factor, (self.slot, np.arange(self.slot.size))),
                              shape=(self.n_slots, self.slot.size))
        return np.asarray((S @ V.T).T)

    def matrices(self, b: np.ndarray) -> np.ndarray:
        n = self.qt.dim
        return (b @ self.stack).reshape(-1, n, n)


def periodized_gaussian_batch(qt: QuantumTorus, rhos, rho0s, B):
    """Op^w(T_rho(G^{rho0})) for all pairs (rhos[i], rho0s[i]); shape (P, n, n).

    Intended for small N: uses the N^{2d} reduced translation basis.
    """
    rhos = np.atleast_2d(rhos)
    rho0s = np.atleast_2d(rho0s)
    # a common index set covering every rho in [0,1)^{2d}
    pad = _gauss_band(B, np.zeros(qt.d * 2), TRUNC * 1e-3)
    basis = _ReducedBasis(qt, pad)
    d = qt.d
    J = standard_j(d, float)
    Binv_t = np.linalg.inv(B).T
    Gnorm = GaussianSymbol(B, np.zeros(2 * d)).integral()
    out = []
    chunk = max(1, 4_000_000 // max(pad.shape[0], 1))
    for s in range(0, rhos.shape[0], chunk):
        rh = rhos[s:s + chunk]
        r0 = rho0s[s:s + chunk]
        k = -rh[:, None, :] - (pad @ J.T)[None, :, :]          # (P, R, 2d)
        q = k @ Binv_t.T
        vals = (Gnorm * np.exp(-np.pi * np.sum(q ** 2, axis=2)
                               - 2j * np.pi * np.einsum("prk,pk->pr", k, r0)
                               + 1j * np.pi * (rh @ pad.T) / qt.N))
        out.append(basis.matrices(basis.reduce(vals)))
    return np.concatenate(out, axis=0)


def anti_wick_identity_defect(qt: QuantumTorus, G: int | None = None) -> float:
    """||N^d sum_grid |rho><rho| / G^{2d} - Id|| for the normalized states."""
    op = anti_wick(qt, TrigObservable.constant(1.0, qt.d), G=G)
    return float(np.linalg.norm(op.matrix - np.eye(qt.dim), 2))


def frame_identity_defect(qt: QuantumTorus, frame, n_rho: int, n_rho0: int) -> float:
    """||sum_g w X_g^* X_g - Id|| for the midpoint (rho, rho0) quadrature of
    the periodized-Gaussian partition of identity."""
    B = _scaling(frame, qt)
    d = qt.d
    g1 = (np.arange(n_rho) + 0.5) / n_rho
    g0 = (np.arange(n_rho0) + 0.5) / n_rho0
    rg = np.stack([m.ravel() for m in np.meshgrid(*([g1] * (2 * d)), indexing="ij")], axis=1)
    r0 = np.stack([m.ravel() for m in np.meshgrid(*([g0] * (2 * d)), indexing="ij")], axis=1)
    X = periodized_gaussian_batch(qt, np.repeat(rg, len(r0), axis=0),
                                  np.tile(r0, (len(rg), 1)), B)
    S = np.einsum("pji,pjk->ik", X.conj(), X) / X.shape[0]
    return float(np.linalg.norm(S - np.eye(qt.dim), 2))


def periodization_direct(F: Callable, rho, points, N: int, L: int = 6) -> np.ndarray:
    """T_rho(F)(rho') = sum_r F(rho' + r - J rho/(2N)) exp(2 i pi <r + rho', rho>)."""
    points = np.atleast_2d(points)
    rho = np.asarray(rho, dtype=float)
    d = points.shape[1] // 2
    J = standard_j(d, float)
    out = np.zeros(points.shape[0], dtype=complex)
    for r in itertools.product(range(-L, L + 1), repeat=2 * d):
        r = np.asarray(r, dtype=float)
        arg = points + r[None, :] - (J @ rho)[None, :] / (2 * N)
        out += F(arg) * np.exp(2j * np.pi * (points + r[None, :]) @ rho)
    return out


def periodization_fourier(qt: QuantumTorus, rho, rho0, B, points) -> np.ndarray:
    """T_rho(G^{rho0}) evaluated from its Fourier series."""
    R, V = periodized_gaussian_coeffs(qt, rho, rho0, B)
    J = standard_j(qt.d, float)
    points = np.atleast_2d(points)
    return np.exp(-2j * np.pi * points @ (R @ J.T).T) @ V


def twisted_product_hat(f_hat: Callable, g_hat: Callable, m, N: int,
                        L: float = 8.0, n: int = 321, center=None) -> complex:
    """(f # g)^(m) = int f^(m - l) g^(l) exp(i pi sigma(m, l)/N) dl (d = 1 grid).

    The phase follows from e_k # e_l = exp(i pi sigma(k, l)/N) e_{k+l}, i.e.
    from the Heisenberg group law of the translations.
    """
    m = np.asarray(m, dtype=float)
    d = m.shape[0] // 2
    c = np.zeros(2 * d) if center is None else np.asarray(center, float)
    t = np.linspace(-L, L, n)
    h = t[1] - t[0]
    mesh = np.meshgrid(*([t] * (2 * d)), indexing="ij")
    l = np.stack([x.ravel() for x in mesh], axis=1) + c
    J = standard_j(d, float)
    sig = l @ (J.T @ m)  # sigma(m, l) = <m, J l>
    vals = f_hat(m[None, :] - l) * g_hat(l) * np.exp(1j * np.pi * sig / N)
    return complex(vals.sum() * h ** (2 * d))


# ---------------------------------------------------------------------------
# Egorov for Op^+

def egorov_plus_drift(qt: QuantumTorus, a: TrigObservable, frame, A, t_range,
                      allow_alias: bool = False, M=None) -> list[dict]:
    """Per-t defect ||Op^+(a o A^t) - M^{-t} Op^+(a) M^t|| with the predictor
    ||A^t B(hbar)^{-1}||_inf (max absolute row sum)."""
    A = as_symplectic(A)
    M = propagator(A, qt) if M is None else M
    table = moyal_square_multiplier(frame, qt, check=False)
    B = table.scaling
    Binv = np.linalg.inv(B)
    base = op_plus(qt, a, frame, allow_alias=True, table=table).matrix
    Mm = M.matrix
    out = []
    for t in t_range:
        at = a.compose_power(A, t)
        lhs = op_plus(qt, at, frame, allow_alias=allow_alias, table=table).matrix
        Mt = np.linalg.matrix_power(Mm, abs(t)) if t >= 0 else \
            np.linalg.matrix_power(Mm.conj().T, abs(t))
        rhs = Mt.conj().T @ base @ Mt
        defect = float(np.linalg.norm(lhs - rhs, 2))
        pred = float(np.linalg.norm(A.power(t) @ Binv, np.inf))
        out.append({"t": int(t), "defect": defect, "predictor": pred,
                    "ratio": defect / pred if pred > 0 else float("nan")})
    return out


# ---------------------------------------------------------------------------
# plane oracle

def plane_norm_oracle(a: TrigObservable, N: int, thetas=8, window: int = 400) -> float:
    """Largest norm of the plane Weyl operator restricted to the lattices
    (Z + theta)/N, each truncated to `window` sites (d = 1).

    On L^2(R), U(r/N) maps functions on (Z + theta)/N to themselves, so the
    plane operator is a direct integral of these banded operators; the
    truncation is a compression and gives a lower estimate of the plane norm.
    """
    if a.d != 1:
        raise ValidationError("plane oracle implemented for d = 1")
    R, V = a.arrays()
    best = 0.0
    for theta in np.linspace(0, 1, thetas, endpoint=False):
        x = (np.arange(window) + theta) / N
        Op = np.zeros((window, window), dtype=complex)
        for (ra, rb), c in zip(R, V):
            # (U f)(x) = exp(i pi a b / N) exp(2 i pi b (x - a/N)) f(x - a/N): site j -> j + a
            j = np.arange(max(0, -ra), min(window, window - ra))
            Op[j + ra, j] += c * np.exp(1j * np.pi * ra * rb / N
                                        + 2j * np.pi * rb * x[j])
        best = max(best, float(np.linalg.norm(Op, 2)))
    return best
