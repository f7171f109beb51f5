"""Input-schematic optimization on the trace sphere.

Linear observer goals admit a closed-form optimum (every column on the top
eigenvector of the flux matrix). Quadratic goals are optimized by projected
gradient descent over the schematic with a nested state-selection solve per
candidate, tangent-space projection, and renormalization onto the sphere.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._util import as_vector
from .errors import (
    FluxControlError,
    InvalidInputError,
    PlacementAbortError,
)
from .gramian import GramianEvaluator, flux_matrix
from .linsys import InputSchematic, LinearSystem, transition_matrix
from .select import binding_check, select_state

__all__ = [
    "GpgmConfig",
    "PlacementResult",
    "project_sphere",
    "sphere_norm_gradient",
    "project_tangent",
    "place_mean_optimal",
    "gpgm",
    "gpgm_multistart",
    "ram_baseline",
    "pgme_driver_select",
]

# Step halvings allowed per iteration before declaring the step unusable.
_MAX_HALVINGS = 20


@dataclass(frozen=True)
class GpgmConfig:
    """Projected-gradient settings.

    Attributes:
        sigma: initial step size.
        delta_star: stop once successive iterates align within this tolerance.
        epsilon: sphere-shrink constant keeping the norm gradient nonzero;
            iterates live on tr(B^T B) = m + epsilon.
        max_iters: iteration cap.
        fd_step: base finite-difference step for the energy gradient.
        seed: initialization seed.
    """

    sigma: float = 1e-2
    delta_star: float = 1e-6
    epsilon: float = 1e-6
    max_iters: int = 10_000
    fd_step: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma", "delta_star", "epsilon", "fd_step"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")


@dataclass(frozen=True)
class PlacementResult:
    """Optimized schematic with its energy and convergence record."""

    B_star: InputSchematic
    energy: float
    iterations: int
    converged: bool
    energy_trace: np.ndarray = field(repr=False, default=None)


def project_sphere(B, epsilon: float = 0.0) -> np.ndarray:
    """Rescale a schematic matrix onto the sphere tr(B^T B) = m + epsilon."""
    b = np.asarray(B, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    m = b.shape[1]
    tr = float(np.sum(b * b))
    if tr <= 0.0:
        raise InvalidInputError("cannot project the zero matrix onto the sphere")
    return b * np.sqrt((m + epsilon) / tr)


def sphere_norm_gradient(B, m: int | None = None) -> np.ndarray:
    """Gradient of the squared sphere defect (tr(B^T B) - m)^2 at B."""
    b = np.asarray(B, dtype=float)
    if m is None:
        m = b.shape[1]
    return 2.0 * (float(np.sum(b * b)) - m) * b


def project_tangent(vec, B, m: int | None = None) -> np.ndarray:
    """Remove the component of a vectorized direction along the norm gradient."""
    v = np.asarray(vec, dtype=float).ravel()
    g = sphere_norm_gradient(B, m).ravel()
    gg = float(g @ g)
    if gg == 0.0:
        return v.copy()
    return v - g * (float(g @ v) / gg)


def place_mean_optimal(
    system: LinearSystem,
    v,
    t_star: float,
    m: int,
    x0=None,
    threshold: float | None = None,
) -> PlacementResult:
    """Closed-form optimal schematic for a linear observer goal.

    Every column is the unit top eigenvector of the flux matrix of ``v``, so
    the weighted Gramian sum equals ``m`` times the top flux eigenvalue. The
    reported energy is the constraint-gap-squared over that product when
    ``x0`` and ``threshold`` are given, otherwise the per-unit-gap multiplier.
    """
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    fm = flux_matrix(system, v, t_star)
    lam, top = fm.lam_max, fm.top_vector
    b = np.tile(top[:, None], (1, m))
    schematic = InputSchematic(b, sphere_normalized=True, epsilon=0.0)
    if x0 is not None and threshold is not None:
        z = transition_matrix(system, t_star) @ as_vector(x0, n=system.n, name="x0")
        alpha = float(fm.v @ z) - float(threshold)
        energy = alpha * alpha / (m * lam)
    else:
        energy = 1.0 / (m * lam)
    return PlacementResult(
        B_star=schematic,
        energy=energy,
        iterations=0,
        converged=True,
        energy_trace=np.array([energy]),
    )


class _EnergyObjective:
    """Nested constrained-state energy as a function of the schematic."""

    def __init__(self, system: LinearSystem, t_star: float, z: np.ndarray, goal):
        self._evaluator = GramianEvaluator(system, t_star)
        self._z = z
        self._goal = goal

    def __call__(self, B: np.ndarray) -> float:
        bundle = self._evaluator.bundle(B)
        return select_state(bundle, self._z, self._goal).energy


def _fd_gradient(objective, B: np.ndarray, e_center: float, step: float) -> np.ndarray:
    """Central finite differences entrywise; one-sided when a side is infeasible."""
    grad = np.zeros_like(B)
    for i in range(B.shape[0]):
        for j in range(B.shape[1]):
            h = step * (1.0 + abs(B[i, j]))
            plus = B.copy()
            plus[i, j] += h
            minus = B.copy()
            minus[i, j] -= h
            try:
                ep = objective(plus)
            except FluxControlError:
                ep = None
            try:
                em = objective(minus)
            except FluxControlError:
                em = None
            if ep is not None and em is not None:
                grad[i, j] = (ep - em) / (2.0 * h)
            elif ep is not None:
                grad[i, j] = (ep - e_center) / h
            elif em is not None:
                grad[i, j] = (e_center - em) / h
    return grad


def gpgm(
    system: LinearSystem,
    x0,
    t_star: float,
    goal,
    m: int,
    config: GpgmConfig | None = None,
    B_init=None,
) -> PlacementResult:
    """Projected gradient descent over the schematic for a moment goal.

    Per iteration: finite-difference gradient of the nested state-selection
    energy, tangent projection, step, renormalization onto the shrunken
    sphere, and backtracking halvings when the candidate raises the energy or
    its state selection is infeasible. Stops when successive iterates align
    within ``delta_star`` or no usable step remains; returns the best iterate.
    """
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    cfg = config if config is not None else GpgmConfig()
    x0 = as_vector(x0, n=system.n, name="x0")
    z = transition_matrix(system, t_star) @ x0

    if B_init is None:
        b = np.random.default_rng(cfg.seed).random((system.n, m))
    else:
        b = np.asarray(B_init, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.shape != (system.n, m):
            raise InvalidInputError(f"B_init must have shape {(system.n, m)}")
    b = project_sphere(b, epsilon=cfg.epsilon)

    def result(best_b, best_e, iters, converged, trace):
        schematic = InputSchematic(
            project_sphere(best_b, epsilon=cfg.epsilon),
            sphere_normalized=True,
            epsilon=cfg.epsilon,
        )
        return PlacementResult(
            B_star=schematic,
            energy=best_e,
            iterations=iters,
            converged=converged,
            energy_trace=np.asarray(trace),
        )

    if not binding_check(goal, z):
        return result(b, 0.0, 0, True, [0.0])

    objective = _EnergyObjective(system, t_star, z, goal)
    try:
        e_cur = objective(b)
    except FluxControlError as exc:
        raise PlacementAbortError(
            f"state selection infeasible at the initial schematic: {exc}"
        ) from exc

    trace = [e_cur]
    best_e, best_b = e_cur, b.copy()
    iters = 0
    converged = False
    for k in range(cfg.max_iters):
        iters = k + 1
        grad = _fd_gradient(objective, b, e_cur, cfg.fd_step)
        direction = project_tangent(grad.ravel(), b, m).reshape(b.shape)
        sigma = cfg.sigma
        accepted = False
        infeasible = 0
        cand, e_cand = None, None
        for _ in range(_MAX_HALVINGS + 1):
            cand = project_sphere(b - sigma * direction, epsilon=cfg.epsilon)
            try:
                e_cand = objective(cand)
            except FluxControlError:
                infeasible += 1
                sigma *= 0.5
                continue
            if e_cand <= e_cur * (1.0 + 1e-12) + 1e-15:
                accepted = True
                break
            sigma *= 0.5
        if not accepted:
            if infeasible >= _MAX_HALVINGS + 1:
                raise PlacementAbortError(
                    "every halved step produced an infeasible state selection",
                    partial_result=result(best_b, best_e, iters, False, trace),
                )
            converged = True
            break
        delta = float(np.sum(b * cand)) / (m + cfg.epsilon)
        b, e_cur = cand, e_cand
        trace.append(e_cur)
        if e_cur < best_e:
            best_e, best_b = e_cur, b.copy()
        if 1.0 - delta < cfg.delta_star:
            converged = True
            break
    return result(best_b, best_e, iters, converged, trace)


def gpgm_multistart(
    system: LinearSystem,
    x0,
    t_star: float,
    goal,
    m: int,
    config: GpgmConfig | None = None,
    n_starts: int = 5,
    B_init=None,
) -> PlacementResult:
    """Best of several seeded descents; the energy landscape is non-convex."""
    if n_starts < 1:
        raise InvalidInputError("n_starts must be at least 1")
    cfg = config if config is not None else GpgmConfig()
    best = None
    first_error = None
    for i in range(n_starts):
        start_cfg = replace(cfg, seed=cfg.seed + i)
        init = B_init if i == 0 else None
        try:
            res = gpgm(system, x0, t_star, goal, m, config=start_cfg, B_init=init)
        except PlacementAbortError as exc:
            if first_error is None:
                first_error = exc
            continue
        if best is None or res.energy < best.energy:
            best = res
    if best is None:
        raise first_error
    if first_error is not None:
        warnings.warn(f"some starts aborted: {first_error}", stacklevel=2)
    return best


def ram_baseline(n: int, m: int, seed: int, epsilon: float = 1e-6) -> InputSchematic:
    """Uniform random schematic renormalized onto the shrunken sphere."""
    if n < 1 or m < 1:
        raise InvalidInputError("n and m must be at least 1")
    b = np.random.default_rng(seed).random((n, m))
    return InputSchematic(
        project_sphere(b, epsilon=epsilon), sphere_normalized=True, epsilon=epsilon
    )


def pgme_driver_select(schematic: InputSchematic, k: int):
    """Convert a dense schematic into a driver-node set of size ``k``.

    Walks the first ``k`` columns, taking per column the largest-magnitude row
    not yet chosen (ties to the lowest index). Returns the 0-based node
    indices in column order and the matching canonical-basis schematic.
    """
    if not 1 <= k <= schematic.m:
        raise InvalidInputError("k must satisfy 1 <= k <= m")
    chosen: list[int] = []
    taken = np.zeros(schematic.n, dtype=bool)
    for j in range(k):
        weights = np.abs(schematic.B[:, j]).copy()
        weights[taken] = -np.inf
        row = int(np.argmax(weights))
        chosen.append(row)
        taken[row] = True
    binary = np.zeros((schematic.n, k))
    for j, row in enumerate(chosen):
        binary[row, j] = 1.0
    return chosen, InputSchematic(binary)
