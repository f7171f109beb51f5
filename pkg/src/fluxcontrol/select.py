"""Minimum-energy terminal-state selection under moment goals.

Given the autonomous endpoint ``z`` and a Gramian ``W``, each solver picks the
state satisfying its goal at the least value of the energy quadratic form
``(z - x)^T W^{-1} (z - x)``. Linear goals have a closed form; quadratic goals
reduce to a secular equation in the Lagrange multiplier, falling back to an
eigenvector solution when no interior root exists.
"""

from dataclasses import dataclass

import numpy as np

from ._util import as_matrix, as_vector, canonical_sign, centering_matrix, mean_zero_basis
from .errors import (
    GoalUncontrollableError,
    InfeasibleGoalError,
    InvalidInputError,
    RequiresControllabilityError,
)
from .gramian import GramianBundle

__all__ = [
    "LinearGoal",
    "RepulsionGoal",
    "VarianceGoal",
    "mean_goal",
    "StateSelection",
    "binding_check",
    "select_state",
    "select_mean_state",
    "select_repulsion_state",
    "solve_qcls",
    "select_variance_state",
    "variance_energy_bound",
    "repulsion_min_threshold",
    "single_input_scales",
]

# Relative eigenvalue gap below which leading eigenvalues count as tied.
_DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class LinearGoal:
    """Require the observer value ``v^T x`` to reach at least ``c``."""

    v: np.ndarray
    c: float

    def __post_init__(self):
        v = as_vector(self.v, name="v")
        if np.linalg.norm(v) == 0.0:
            raise InvalidInputError("linear goal weighting must be nonzero")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class RepulsionGoal:
    """Pin the ellipsoid statistic ``||O x - d||^2`` to ``eta``.

    ``sense`` is "expand" when the autonomous endpoint starts inside the
    ellipsoid (push away), "contract" when it starts outside (pull closer).
    ``O=None`` means the identity.
    """

    d: np.ndarray
    eta: float
    O: np.ndarray | None = None
    sense: str = "expand"

    def __post_init__(self):
        d = as_vector(self.d, name="d")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "eta", float(self.eta))
        if self.eta < 0:
            raise InvalidInputError("eta must be nonnegative")
        if self.sense not in ("expand", "contract"):
            raise InvalidInputError("sense must be 'expand' or 'contract'")
        if self.O is not None:
            n = d.shape[0]
            object.__setattr__(self, "O", as_matrix(self.O, shape=(n, n), name="O"))


@dataclass(frozen=True)
class VarianceGoal:
    """Require the unnormalized sample variance of the state to reach ``eta``."""

    eta: float

    def __post_init__(self):
        object.__setattr__(self, "eta", float(self.eta))
        if self.eta < 0:
            raise InvalidInputError("eta must be nonnegative")


def mean_goal(n: int, eta: float) -> LinearGoal:
    """Average-state goal: mean of the n node states at least ``eta``."""
    return LinearGoal(np.ones(n), n * float(eta))


@dataclass(frozen=True)
class StateSelection:
    """Solver output: optimal state, shadow price, energy, and bindingness."""

    x_star: np.ndarray
    multiplier: float
    energy: float
    binding: bool


def binding_check(goal, z) -> bool:
    """True iff the autonomous endpoint violates the goal, so control is needed."""
    z = as_vector(z, name="z")
    if isinstance(goal, LinearGoal):
        return float(goal.v @ z) < goal.c
    if isinstance(goal, RepulsionGoal):
        r = (goal.O @ z if goal.O is not None else z) - goal.d
        val = float(r @ r)
        return val < goal.eta if goal.sense == "expand" else val > goal.eta
    if isinstance(goal, VarianceGoal):
        dz = z - z.mean()
        return float(dz @ dz) < goal.eta
    raise InvalidInputError(f"unknown goal type {type(goal).__name__}")


def _corner(z: np.ndarray) -> StateSelection:
    return StateSelection(x_star=z.copy(), multiplier=0.0, energy=0.0, binding=False)


def select_mean_state(W: GramianBundle, z, goal: LinearGoal) -> StateSelection:
    """Closed-form optimal state for a linear observer goal.

    The optimum displaces the autonomous endpoint along ``W v`` by the
    constraint gap over ``v^T W v``; valid whenever that scalar is positive,
    even for singular Gramians.
    """
    z = as_vector(z, n=W.n, name="z")
    if not binding_check(goal, z):
        return _corner(z)
    v = goal.v
    kap = float(v @ W.W @ v)
    if kap <= 1e-12 * float(v @ v) * max(W.lam_max, np.finfo(float).tiny):
        raise GoalUncontrollableError(
            "observer v^T x cannot be moved by this schematic (v^T W v is zero)"
        )
    alpha = float(v @ z) - goal.c
    x_star = z - (alpha / kap) * (W.W @ v)
    return StateSelection(
        x_star=x_star,
        multiplier=2.0 * alpha / kap,
        energy=alpha * alpha / kap,
        binding=True,
    )


def _pick_leading_eigvec(values_desc, vectors, ref) -> np.ndarray:
    """Leading eigenvector; degenerate top eigenvalues resolved deterministically.

    Among eigenvectors tied at the top eigenvalue, prefer the one with the
    largest |inner product with ref|; remaining ties go to the candidate whose
    largest-magnitude entry sits at the lowest index.
    """
    lam0 = values_desc[0]
    top = np.where(values_desc >= lam0 - _DEGENERACY_RTOL * abs(lam0))[0]
    if top.size == 1:
        return vectors[:, top[0]]
    scores = np.abs(vectors[:, top].T @ ref)
    best = scores.max()
    cands = [i for i, s in zip(top, scores) if s >= best - 1e-12 * (1.0 + best)]
    pick = min(cands, key=lambda i: int(np.argmax(np.abs(vectors[:, i]))))
    return vectors[:, pick]


def select_repulsion_state(W: GramianBundle, z, eta: float) -> StateSelection:
    """Push the endpoint a squared distance ``eta`` away from its autonomous value.

    The optimal displacement is the leading eigenvector of the Gramian scaled
    to squared length ``eta``; the energy is ``eta`` over the top eigenvalue.
    """
    z = as_vector(z, n=W.n, name="z")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    if eta == 0.0:
        return _corner(z)
    if not W.is_positive_definite():
        raise RequiresControllabilityError(
            "repulsion state selection requires a positive definite Gramian"
        )
    w = _pick_leading_eigvec(W.eigenvalues, W.eigenvectors, z)
    omega = canonical_sign(w, ref=z) * np.sqrt(eta)
    lam_max = W.lam_max
    return StateSelection(
        x_star=z + omega,
        multiplier=1.0 / lam_max,
        energy=eta / lam_max,
        binding=True,
    )


def _solve_secular(eval_fn, lo, hi, target, lam_tol=1e-10, max_iter=200):
    """Smallest-bracket root of a monotone increasing secular function.

    ``eval_fn`` returns (value, derivative); the caller guarantees
    f(lo) <= target <= f(hi). Newton iterations are safeguarded by bisection
    with the bracket shrinking by at least half on stalls.
    """
    lam = 0.5 * (lo + hi)
    for _ in range(max_iter):
        try:
            f, fp = eval_fn(lam)
        except np.linalg.LinAlgError:
            f, fp = np.inf, np.inf
        if np.isfinite(f) and abs(f - target) <= 1e-12 * (1.0 + abs(target)):
            return lam
        if np.isfinite(f) and f < target:
            lo = lam
        else:
            hi = lam
        if hi - lo <= lam_tol * max(1.0, abs(hi)):
            return 0.5 * (lo + hi)
        nxt = None
        if np.isfinite(f) and np.isfinite(fp) and fp > 0.0:
            cand = lam - (f - target) / fp
            if lo < cand < hi:
                nxt = cand
        lam = nxt if nxt is not None else 0.5 * (lo + hi)
    return lam


def _range_distance_sq(O: np.ndarray, d: np.ndarray) -> float:
    """Squared distance from d to the column space of O."""
    sol, *_ = np.linalg.lstsq(O, d, rcond=None)
    r = d - O @ sol
    return float(r @ r)


def solve_qcls(W: GramianBundle, z, O, d, eta: float, sense: str = "expand") -> StateSelection:
    """Least squares in the energy metric with a quadratic equality constraint.

    Solves the stationary system ``(W^{-1} - lam O^T O) x = W^{-1} z - lam O^T d``
    at the multiplier closest to zero that satisfies ``||O x - d||^2 = eta``
    (smallest nonnegative root for the expand sense, largest nonpositive for
    contract). When no interior root exists below the multiplier's pole, the
    solution on the pole's eigenspace is returned.
    """
    z = as_vector(z, n=W.n, name="z")
    n = W.n
    O = as_matrix(O, shape=(n, n), name="O")
    d = as_vector(d, n=n, name="d")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    if sense not in ("expand", "contract"):
        raise InvalidInputError("sense must be 'expand' or 'contract'")
    if not W.is_positive_definite():
        raise RequiresControllabilityError(
            "quadratically constrained selection requires a positive definite Gramian"
        )

    r0 = O @ z - d
    f0 = float(r0 @ r0)
    if sense == "expand" and not f0 < eta:
        return _corner(z)
    if sense == "contract" and not f0 > eta:
        return _corner(z)

    if sense == "contract":
        eta_min = _range_distance_sq(O, d)
        if eta < eta_min - 1e-12 * (1.0 + eta_min):
            raise InfeasibleGoalError(
                f"contract goal eta={eta} below the reachable minimum {eta_min}",
                min_eta=eta_min,
            )

    owo = O @ W.W @ O.T
    theta = np.linalg.eigvalsh(owo)
    theta_max = float(theta[-1])
    if theta_max <= 1e-12 * max(W.lam_max, np.finfo(float).tiny):
        raise GoalUncontrollableError("O W O^T is zero; the statistic cannot be moved")
    lam_pole = 1.0 / theta_max

    wot = W.W @ O.T
    wotd = wot @ d

    def state_at(lam: float) -> np.ndarray:
        return np.linalg.solve(np.eye(n) - lam * (wot @ O), z - lam * wotd)

    def eval_fn(lam: float):
        k = np.eye(n) - lam * (wot @ O)
        x = np.linalg.solve(k, z - lam * wotd)
        r = O @ x - d
        f = float(r @ r)
        fp = 2.0 * float(r @ (O @ np.linalg.solve(k, wot @ r)))
        return f, fp

    def finish(x: np.ndarray, lam: float) -> StateSelection:
        dx = x - z
        energy = float(dx @ np.linalg.solve(W.W, dx))
        return StateSelection(
            x_star=x, multiplier=lam, energy=max(energy, 0.0), binding=True
        )

    if sense == "contract":
        lo = -max(1.0, lam_pole)
        for _ in range(200):
            try:
                f_lo, _ = eval_fn(lo)
            except np.linalg.LinAlgError:
                f_lo = np.inf
            if f_lo <= eta:
                break
            lo *= 2.0
        else:
            eta_min = _range_distance_sq(O, d)
            if eta >= eta_min - 1e-12 * (1.0 + eta_min):
                # Exact attainment: the multiplier diverges (the constraint
                # gradient vanishes there), so return the limit solution.
                mu = np.linalg.pinv(owo, rcond=1e-12) @ (d - O @ z)
                sel = finish(z + wot @ mu, -np.inf)
                return sel
            raise InfeasibleGoalError(
                f"no contract multiplier reaches eta={eta}; minimum is {eta_min}",
                min_eta=eta_min,
            )
        lam = _solve_secular(eval_fn, lo, 0.0, eta)
        return finish(state_at(lam), lam)

    hi = lam_pole * (1.0 - 1e-9)
    try:
        f_hi, _ = eval_fn(hi)
    except np.linalg.LinAlgError:
        f_hi = np.inf
    if f_hi >= eta:
        lam = _solve_secular(eval_fn, 0.0, hi, eta)
        return finish(state_at(lam), lam)

    # No interior root: the secular function stays below eta up to the pole,
    # so the solution carries a component of the pole's eigenvector.
    vals, vecs = np.linalg.eigh(owo)
    u = _pick_leading_eigvec(vals[::-1], vecs[:, ::-1], z)
    omega = wot @ u
    omega = omega / np.linalg.norm(omega)
    k_pole = np.eye(n) - lam_pole * (wot @ O)
    x_p, *_ = np.linalg.lstsq(k_pole, z - lam_pole * wotd, rcond=None)
    rp = O @ x_p - d
    o_omega = O @ omega
    a = float(o_omega @ o_omega)
    b = 2.0 * float(rp @ o_omega)
    c = float(rp @ rp) - eta
    disc = b * b - 4.0 * a * c
    if disc < 0.0 or a <= 0.0:
        raise InfeasibleGoalError(
            "pole eigenspace cannot reach the requested threshold",
            min_eta=float(rp @ rp),
        )
    sq = np.sqrt(disc)
    candidates = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
    selections = [finish(x_p + rho * omega, lam_pole) for rho in candidates]
    e0, e1 = selections[0].energy, selections[1].energy
    if abs(e0 - e1) > 1e-10 * (1.0 + max(e0, e1)):
        return selections[0] if e0 < e1 else selections[1]
    # Equal-cost pair: orient the displacement deterministically.
    deltas = [sel.x_star - z for sel in selections]
    keyed = canonical_sign(deltas[0], ref=z)
    return selections[0] if np.allclose(keyed, deltas[0]) else selections[1]


def _variance_reduction(W: GramianBundle):
    """Eigen-data of the Gramian restricted to the mean-zero subspace."""
    n = W.n
    q = mean_zero_basis(n)
    t = q.T @ W.W @ q
    theta, y = np.linalg.eigh(0.5 * (t + t.T))
    return q, theta, y


def select_variance_state(W: GramianBundle, z, eta: float) -> StateSelection:
    """Drive the sample variance of the state up to ``eta`` at minimum energy.

    Searches the secular equation below the smallest positive generalized
    eigenvalue of the inverse Gramian against the centering projector; when no
    interior multiplier exists the displacement falls on the corresponding
    generalized eigenvector.
    """
    n = W.n
    if n < 2:
        raise InvalidInputError("variance is undefined for a single node")
    z = as_vector(z, n=n, name="z")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    dz = z - z.mean()
    if not float(dz @ dz) < eta:
        return _corner(z)

    q, theta, y = _variance_reduction(W)
    theta_max = float(theta[-1])
    if theta_max <= 1e-12 * max(W.lam_max, np.finfo(float).tiny):
        raise GoalUncontrollableError(
            "no mean-zero direction is controllable; variance cannot be raised"
        )
    lam_min_plus = 1.0 / theta_max

    d_mat = centering_matrix(n)
    wd = W.W @ d_mat

    def eval_fn(psi: float):
        k = np.eye(n) - psi * wd
        x = np.linalg.solve(k, z)
        dx = x - x.mean()
        g = float(dx @ dx)
        gp = 2.0 * float(dx @ np.linalg.solve(k, W.W @ dx))
        return g, gp

    psi_hi = lam_min_plus * (1.0 - 1e-9)
    try:
        g_hi, _ = eval_fn(psi_hi)
    except np.linalg.LinAlgError:
        g_hi = np.inf
    if g_hi >= eta:
        psi = _solve_secular(eval_fn, 0.0, psi_hi, eta)
        x = np.linalg.solve(np.eye(n) - psi * wd, z)
        dx = x - x.mean()
        energy = psi * psi * float(dx @ (W.W @ dx))
        return StateSelection(
            x_star=x, multiplier=psi, energy=max(energy, 0.0), binding=True
        )

    omega_raw = W.W @ (q @ _pick_leading_eigvec(theta[::-1], y[:, ::-1], q.T @ z))
    s = float(np.linalg.norm(omega_raw))
    omega = canonical_sign(omega_raw / s, ref=z)
    d_omega = omega - omega.mean()
    a = float(d_omega @ d_omega)
    b = -2.0 * float(dz @ d_omega)
    c = float(dz @ dz) - eta
    sq = np.sqrt(b * b - 4.0 * a * c)
    roots = sorted([(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)], key=abs)
    rho = roots[0]
    if abs(abs(roots[0]) - abs(roots[1])) <= 1e-12 * (1.0 + abs(roots[0])):
        rho = abs(roots[0])
    energy = rho * rho * theta_max / (s * s)
    return StateSelection(
        x_star=z - rho * omega,
        multiplier=lam_min_plus,
        energy=max(energy, 0.0),
        binding=True,
    )


def variance_energy_bound(W: GramianBundle, z, eta: float) -> float:
    """Closed-form cap on the variance-goal energy.

    Squared sum of the current deviation norm and the target's square root,
    scaled by the smallest positive generalized eigenvalue of the inverse
    Gramian against the centering projector.
    """
    n = W.n
    if n < 2:
        raise InvalidInputError("variance is undefined for a single node")
    z = as_vector(z, n=n, name="z")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    _, theta, _ = _variance_reduction(W)
    theta_max = float(theta[-1])
    if theta_max <= 1e-12 * max(W.lam_max, np.finfo(float).tiny):
        raise GoalUncontrollableError(
            "no mean-zero direction is controllable; variance cannot be raised"
        )
    dz = z - z.mean()
    return (np.linalg.norm(dz) + np.sqrt(eta)) ** 2 / theta_max


def repulsion_min_threshold(d) -> float:
    """Threshold above which one controller suffices for the repulsion statistic.

    Squared 2-norm of the target minus its squared infinity norm.
    """
    v = as_vector(d, name="d")
    if v.size == 0:
        return 0.0
    return float(v @ v) - float(np.max(np.abs(v)) ** 2)


def single_input_scales(b, d, eta: float):
    """Scales along a single input column reaching ``||x - d||^2 = eta``.

    For states restricted to multiples of ``b``, the constraint is a quadratic
    in the scale; returns its real roots, or None when the discriminant is
    negative (that construction cannot reach the threshold).
    """
    b = as_vector(b, name="b")
    d = as_vector(d, n=b.shape[0], name="d")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    c = float(b @ b)
    if c <= 0.0:
        raise InvalidInputError("input column must be nonzero")
    beta = float(b @ d)
    disc = beta * beta - c * float(d @ d) + c * eta
    # Boundary cases cancel to zero in exact arithmetic; keep them feasible.
    scale = max(beta * beta, c * float(d @ d), c * eta, 1.0)
    if disc < -1e-12 * scale:
        return None
    sq = np.sqrt(max(disc, 0.0))
    return ((beta - sq) / c, (beta + sq) / c)


def select_state(W: GramianBundle, z, goal) -> StateSelection:
    """Dispatch a moment goal to its solver."""
    if isinstance(goal, LinearGoal):
        return select_mean_state(W, z, goal)
    if isinstance(goal, VarianceGoal):
        return select_variance_state(W, z, goal.eta)
    if isinstance(goal, RepulsionGoal):
        z_arr = as_vector(z, n=W.n, name="z")
        plain_o = goal.O is None or np.array_equal(goal.O, np.eye(W.n))
        if plain_o and goal.sense == "expand" and np.array_equal(goal.d, z_arr):
            return select_repulsion_state(W, z_arr, goal.eta)
        o = goal.O if goal.O is not None else np.eye(W.n)
        return solve_qcls(W, z_arr, o, goal.d, goal.eta, sense=goal.sense)
    raise InvalidInputError(f"unknown goal type {type(goal).__name__}")
