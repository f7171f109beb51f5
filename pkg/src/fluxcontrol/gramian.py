"""Reachability Gramians and flux matrices over a finite horizon.

The Gramian ``W = int_0^T exp(tA) B B^T exp(tA^T) dt`` weights the
minimum-energy quadratic form; the flux matrix is the same integral for the
transposed dynamics with a rank-one weighting ``v v^T`` and its top
eigenvector is the optimal single-input placement for the observer ``v^T x``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from ._util import as_vector, canonical_sign
from .errors import InvalidInputError
from .linsys import InputSchematic, LinearSystem

__all__ = [
    "GramianBundle",
    "FluxMatrix",
    "GramianEvaluator",
    "reachability_gramian",
    "flux_matrix",
    "gramian_quadrature",
    "kappa",
]


@dataclass(frozen=True)
class GramianBundle:
    """A finite-horizon Gramian with cached spectral data.

    Attributes:
        W: symmetric positive semidefinite n x n matrix.
        t_star: horizon the integral was taken over.
        kappa: weighted quadratic form v^T W v for the bundle's weighting
            (all-ones by default).
        eigenvalues: eigenvalues of W sorted descending.
        eigenvectors: matching eigenvector columns.
    """

    W: np.ndarray
    t_star: float
    kappa: float
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @classmethod
    def from_matrix(cls, W, t_star: float, weights=None) -> "GramianBundle":
        """Validate, symmetrize, and eigendecompose a computed Gramian."""
        W = np.asarray(W, dtype=float)
        n = W.shape[0]
        scale = max(float(np.abs(W).max()), np.finfo(float).tiny)
        if np.linalg.norm(W - W.T) > 1e-10 * np.linalg.norm(W) + 1e-300:
            raise InvalidInputError("gramian is not symmetric within tolerance")
        W = 0.5 * (W + W.T)
        vals, vecs = np.linalg.eigh(W)
        if vals[0] < -1e-10 * max(vals[-1], 0.0) - 1e-300 * scale:
            raise InvalidInputError("gramian is not positive semidefinite")
        order = np.argsort(vals)[::-1]
        v = np.ones(n) if weights is None else as_vector(weights, n=n, name="weights")
        kap = max(float(v @ W @ v), 0.0)
        return cls(
            W=W,
            t_star=float(t_star),
            kappa=kap,
            eigenvalues=vals[order],
            eigenvectors=vecs[:, order],
        )

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[-1])

    def is_positive_definite(self, rtol: float = 1e-12) -> bool:
        return self.lam_min > rtol * max(self.lam_max, 0.0)


@dataclass(frozen=True)
class FluxMatrix:
    """Integrated outer product of the propagated observer weighting.

    ``Phi = int_0^T exp(tA^T) v v^T exp(tA) dt``; symmetric PSD with a strictly
    positive top eigenvalue whenever v is nonzero.
    """

    Phi: np.ndarray
    v: np.ndarray
    t_star: float
    top_pair: tuple[float, np.ndarray]

    @property
    def n(self) -> int:
        return self.Phi.shape[0]

    @property
    def lam_max(self) -> float:
        return self.top_pair[0]

    @property
    def top_vector(self) -> np.ndarray:
        return self.top_pair[1]


def _van_loan_block(A: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """Single block-exponential evaluation of int_0^t exp(sA) Q exp(sA^T) ds.

    Exponentiates [[-A, Q], [0, A^T]] * t; the integral is the transposed
    lower-right block times the upper-right block.
    """
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = Q
    block[n:, n:] = A.T
    e = expm(block * t)
    return e[n:, n:].T @ e[:n, n:]


def _van_loan_gramian(A: np.ndarray, Q: np.ndarray, t_star: float) -> np.ndarray:
    """Block-exponential Gramian with horizon doubling.

    The raw block form cancels catastrophically when ||A|| t is large (the
    upper-left block carries exp(+||A||t)), so the base step is shrunk until
    the block stays well scaled and the full horizon is rebuilt with the exact
    identity W(2t) = W(t) + exp(tA) W(t) exp(tA^T).
    """
    norm = float(np.linalg.norm(A, 1))
    doublings = 0
    if norm * t_star > 2.0:
        doublings = min(int(np.ceil(np.log2(norm * t_star / 2.0))), 60)
    h = t_star / (2.0**doublings)
    w = _van_loan_block(A, Q, h)
    if doublings:
        e = expm(A * h)
        for _ in range(doublings):
            w = w + e @ w @ e.T
            e = e @ e
    return 0.5 * (w + w.T)


def reachability_gramian(
    system: LinearSystem,
    schematic: InputSchematic,
    t_star: float,
    weights=None,
) -> GramianBundle:
    """Finite-horizon reachability Gramian of (A, B) by the block-exponential method.

    Args:
        system: dynamics.
        schematic: input matrix B.
        t_star: horizon, must be positive.
        weights: observer weighting for the cached ``kappa``; all-ones default.

    Returns:
        GramianBundle with the symmetrized Gramian and its eigendecomposition.
    """
    if not np.isfinite(t_star) or t_star <= 0:
        raise InvalidInputError("t_star must be a positive real")
    if schematic.n != system.n:
        raise InvalidInputError("schematic row count must match system size")
    w = _van_loan_gramian(system.A, schematic.B @ schematic.B.T, float(t_star))
    return GramianBundle.from_matrix(w, t_star, weights=weights)


def flux_matrix(system: LinearSystem, v, t_star: float) -> FluxMatrix:
    """Flux matrix of the observer ``v^T x`` over the horizon.

    Computed as the reachability Gramian of the pair (A^T, v), which is the
    same integral with the roles of propagation and weighting swapped.
    """
    if not np.isfinite(t_star) or t_star <= 0:
        raise InvalidInputError("t_star must be a positive real")
    vv = as_vector(v, n=system.n, name="v")
    if np.linalg.norm(vv) == 0.0:
        raise InvalidInputError("flux weighting v must be nonzero")
    phi = _van_loan_gramian(system.A.T, np.outer(vv, vv), float(t_star))
    vals, vecs = np.linalg.eigh(phi)
    lam = float(vals[-1])
    if lam <= 0.0:
        raise InvalidInputError("flux matrix has no positive eigenvalue")
    top = canonical_sign(vecs[:, -1])
    return FluxMatrix(Phi=phi, v=vv, t_star=float(t_star), top_pair=(lam, top))


def gramian_quadrature(
    system: LinearSystem,
    schematic: InputSchematic,
    t_star: float,
    steps: int,
) -> np.ndarray:
    """Composite Simpson approximation of the reachability Gramian.

    Fourth-order oracle kept independent of the block-exponential path;
    ``steps`` is the (even, >= 2) number of intervals.
    """
    if not np.isfinite(t_star) or t_star <= 0:
        raise InvalidInputError("t_star must be a positive real")
    if steps < 2 or steps % 2 != 0:
        raise InvalidInputError("steps must be an even integer >= 2")
    if schematic.n != system.n:
        raise InvalidInputError("schematic row count must match system size")
    h = float(t_star) / steps
    e_h = expm(system.A * h)
    q = schematic.B @ schematic.B.T

    x = np.eye(system.n)
    acc = np.zeros_like(q)
    for k in range(steps + 1):
        f = x @ q @ x.T
        if k == 0 or k == steps:
            wgt = 1.0
        elif k % 2 == 1:
            wgt = 4.0
        else:
            wgt = 2.0
        acc += wgt * f
        if k < steps:
            x = x @ e_h
    w = acc * (h / 3.0)
    return 0.5 * (w + w.T)


def kappa(bundle: GramianBundle, v) -> float:
    """Quadratic form v^T W v of a Gramian bundle."""
    vv = as_vector(v, n=bundle.n, name="v")
    return float(vv @ bundle.W @ vv)


class GramianEvaluator:
    """Repeated Gramian evaluation at a fixed system and horizon.

    For symmetric dynamics the integral has a closed form in the eigenbasis
    (entrywise ``(exp((a_i + a_j) T) - 1) / (a_i + a_j)`` weights on the
    projected input outer product), which is orders of magnitude faster than
    the block exponential and agrees with it to roundoff. Nonsymmetric
    dynamics fall back to the block-exponential path per call.
    """

    # Below this magnitude the entrywise weight switches to its series limit.
    _SERIES_TOL = 1e-8

    def __init__(self, system: LinearSystem, t_star: float, transpose: bool = False):
        if not np.isfinite(t_star) or t_star <= 0:
            raise InvalidInputError("t_star must be a positive real")
        self.system = system
        self.t_star = float(t_star)
        a = system.A.T if transpose else system.A
        self._A = a
        self._symmetric = system.is_symmetric()
        if self._symmetric:
            eigvals, eigvecs = np.linalg.eigh(a)
            self._eigvals = eigvals
            self._eigvecs = eigvecs
            s = eigvals[:, None] + eigvals[None, :]
            small = np.abs(s) < self._SERIES_TOL
            safe = np.where(small, 1.0, s)
            growth = (np.exp(safe * self.t_star) - 1.0) / safe
            series = self.t_star + 0.5 * self.t_star**2 * s
            self._weights = np.where(small, series, growth)

    def matrix(self, B) -> np.ndarray:
        """Gramian of the fixed (A, t*) for the input matrix ``B``."""
        b = np.asarray(B, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if not self._symmetric:
            return _van_loan_gramian(self._A, b @ b.T, self.t_star)
        bt = self._eigvecs.T @ b
        core = self._weights * (bt @ bt.T)
        w = self._eigvecs @ core @ self._eigvecs.T
        return 0.5 * (w + w.T)

    def bundle(self, B, weights=None) -> GramianBundle:
        return GramianBundle.from_matrix(self.matrix(B), self.t_star, weights=weights)
