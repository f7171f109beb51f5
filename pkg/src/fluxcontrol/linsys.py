"""Linear time-invariant network systems and classical controllability tests.

A system is the dense dynamics matrix ``A`` of ``xdot = A x + B u`` together
with the weighted digraph it encodes (edge (i, j) present iff ``A[i, j] != 0``).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from ._util import as_matrix, as_vector
from .errors import InvalidInputError

__all__ = [
    "LinearSystem",
    "StateVector",
    "InputSchematic",
    "ControllabilityReport",
    "transition_matrix",
    "laplacian_system",
    "controllability_matrix",
    "controllability_report",
    "output_controllable_sufficient",
]

# Relative tolerance for clustering eigenvalues when counting multiplicities.
_EIG_CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class LinearSystem:
    """Dense LTI dynamics matrix with an optional label.

    Attributes:
        A: n x n real dynamics matrix, all entries finite.
        label: optional display name for CLI output.
    """

    A: np.ndarray
    label: str | None = None

    def __post_init__(self):
        a = as_matrix(self.A, name="A")
        if a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"A must be square, got shape {a.shape}")
        object.__setattr__(self, "A", a)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        scale = np.linalg.norm(self.A)
        return bool(np.linalg.norm(self.A - self.A.T) <= rtol * max(scale, 1.0))


@dataclass(frozen=True)
class StateVector:
    """Node states at a time stamp."""

    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, name="x"))
        if not np.isfinite(self.t) or self.t < 0:
            raise InvalidInputError("time stamp must be a nonnegative real")

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class InputSchematic:
    """n x m input matrix routing m control signals to nodes.

    When ``sphere_normalized`` is set the trace constraint
    ``tr(B^T B) = m + epsilon`` is enforced at construction.
    """

    B: np.ndarray
    sphere_normalized: bool = False
    epsilon: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.B, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        b = as_matrix(b, name="B")
        if b.shape[1] < 1:
            raise InvalidInputError("schematic needs at least one controller column")
        object.__setattr__(self, "B", b)
        if self.sphere_normalized:
            m = b.shape[1]
            target = m + self.epsilon
            if abs(float(np.trace(b.T @ b)) - target) > 1e-10 * m:
                raise InvalidInputError(
                    "schematic flagged sphere-normalized but tr(B^T B) is off target"
                )

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def identity(cls, n: int) -> "InputSchematic":
        """Full actuation: one controller per node."""
        return cls(np.eye(n))

    @classmethod
    def single_node(cls, n: int, node: int) -> "InputSchematic":
        """Driver-node form: one controller attached to one node."""
        if not 0 <= node < n:
            raise InvalidInputError(f"node index {node} out of range for n={n}")
        b = np.zeros((n, 1))
        b[node, 0] = 1.0
        return cls(b)


@dataclass(frozen=True)
class ControllabilityReport:
    """Kalman/PBH ranks and the minimum controller count."""

    kalman_rank: int
    controllable: bool
    pbh_ok: bool
    min_drivers: int
    eigenvalues: np.ndarray = field(repr=False, default=None)


def transition_matrix(system: LinearSystem, t: float) -> np.ndarray:
    """State-transition matrix of the autonomous dynamics over a horizon ``t``.

    Scaling-and-squaring Pade evaluation; accurate to machine-level relative
    error for well-conditioned dynamics.
    """
    if not np.isfinite(t):
        raise InvalidInputError("horizon t must be finite")
    return expm(float(t) * system.A)


def laplacian_system(adjacency, label: str | None = None) -> LinearSystem:
    """Diffusive dynamics from a nonnegative symmetric adjacency matrix.

    Returns the system with dynamics matrix equal to minus the graph
    Laplacian (degree matrix minus adjacency), so row sums are zero and the
    all-ones vector is invariant.
    """
    adj = as_matrix(adjacency, name="adjacency")
    if adj.shape[0] != adj.shape[1]:
        raise InvalidInputError("adjacency must be square")
    if np.any(adj < 0):
        raise InvalidInputError("adjacency weights must be nonnegative")
    if np.any(np.diag(adj) != 0):
        raise InvalidInputError("adjacency must have a zero diagonal")
    scale = max(np.abs(adj).max(), 1.0)
    if not np.allclose(adj, adj.T, rtol=0.0, atol=1e-12 * scale):
        raise InvalidInputError("adjacency must be symmetric")
    adj = 0.5 * (adj + adj.T)
    lap = np.diag(adj.sum(axis=1)) - adj
    return LinearSystem(-lap, label=label)


def controllability_matrix(system: LinearSystem, schematic: InputSchematic) -> np.ndarray:
    """Horizontal concatenation [B, AB, ..., A^(n-1) B]."""
    if schematic.n != system.n:
        raise InvalidInputError("schematic row count must match system size")
    n, m = system.n, schematic.m
    ctrb = np.empty((n, n * m))
    block = schematic.B
    for k in range(n):
        ctrb[:, k * m : (k + 1) * m] = block
        if k + 1 < n:
            block = system.A @ block
    return ctrb


def _numeric_rank(mat: np.ndarray, n: int) -> int:
    """Rank with singular values below n * ||mat||_2 * eps treated as zero."""
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > n * s[0] * np.finfo(float).eps))


def _cluster_eigenvalues(eigs: np.ndarray) -> list[complex]:
    """Greedy clustering of (possibly complex) eigenvalues within a shared tolerance."""
    tol = _EIG_CLUSTER_TOL * max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
    reps: list[complex] = []
    for lam in sorted(eigs, key=lambda c: (c.real, c.imag)):
        for i, rep in enumerate(reps):
            if abs(lam - rep) <= tol:
                reps[i] = 0.5 * (rep + lam)
                break
        else:
            reps.append(complex(lam))
    return reps


def controllability_report(
    system: LinearSystem, schematic: InputSchematic
) -> ControllabilityReport:
    """Kalman rank, PBH test, and the minimum number of controllers.

    The minimum controller count is the largest geometric multiplicity over
    the eigenvalues of the dynamics matrix, computed from numerical null-space
    ranks after clustering nearby eigenvalues.
    """
    n = system.n
    ctrb = controllability_matrix(system, schematic)
    kalman_rank = _numeric_rank(ctrb, n)

    eigs = np.linalg.eigvals(system.A)
    pbh_ok = True
    min_drivers = 1
    eye = np.eye(n)
    for lam in _cluster_eigenvalues(eigs):
        shifted = lam * eye - system.A
        geo_mult = n - _numeric_rank(shifted, n)
        min_drivers = max(min_drivers, geo_mult)
        if _numeric_rank(np.hstack([shifted, schematic.B.astype(complex)]), n) < n:
            pbh_ok = False
    return ControllabilityReport(
        kalman_rank=kalman_rank,
        controllable=bool(kalman_rank == n),
        pbh_ok=pbh_ok,
        min_drivers=min_drivers,
        eigenvalues=eigs,
    )


def output_controllable_sufficient(weights, schematic: InputSchematic) -> bool:
    """Sufficient test that the linear observer w^T x can reach any threshold.

    True iff some controller column has a nonzero weighted column sum; a true
    result guarantees the observer is controllable from that schematic alone.
    """
    w = as_vector(weights, n=schematic.n, name="weights")
    wn = np.linalg.norm(w)
    for j in range(schematic.m):
        col = schematic.B[:, j]
        if abs(float(w @ col)) > 1e-12 * wn * np.linalg.norm(col):
            return True
    return False
