"""Independent reference computations used as test oracles.

These deliberately avoid the library's solution paths: explicit matrix
inverses, KKT linear solves, dense grid searches, and brute-force rank
counting, so agreement is evidence rather than tautology.
"""

import numpy as np
from scipy.linalg import null_space


def random_stable_system(rng, n, max_real=-0.1, scale=1.0):
    """Dense matrix with all eigenvalue real parts at or below ``max_real``."""
    a = scale * rng.standard_normal((n, n)) / np.sqrt(n)
    shift = np.max(np.linalg.eigvals(a).real) - max_real
    if shift > 0:
        a = a - shift * np.eye(n)
    return a


def kkt_mean_oracle(w_mat, z, v, c):
    """Equality-constrained quadratic program solved via its raw KKT system."""
    n = len(z)
    w_inv = np.linalg.inv(w_mat)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = 2.0 * w_inv
    kkt[:n, n] = v
    kkt[n, :n] = v
    rhs = np.concatenate([2.0 * w_inv @ z, [c]])
    sol = np.linalg.solve(kkt, rhs)
    x = sol[:n]
    energy = float((z - x) @ w_inv @ (z - x))
    return x, float(sol[n]), energy


def scalar_min_energy(delta_x, t_star):
    """Minimum input energy moving a single integrator by delta_x in t_star."""
    return delta_x * delta_x / t_star


def sphere_grid_min_energy(w_mat, z, center, radius_sq, samples=10_000):
    """Dense search over the circle ||x - center||^2 = radius_sq (2-D only)."""
    w_inv = np.linalg.inv(w_mat)
    angles = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    r = np.sqrt(radius_sq)
    best = np.inf
    for th in angles:
        x = center + r * np.array([np.cos(th), np.sin(th)])
        e = float((z - x) @ w_inv @ (z - x))
        best = min(best, e)
    return best


def variance_grid_min_energy(w_mat, z, eta, samples=4_000):
    """Dense search over states with fixed sample variance (n = 2 or 3).

    Parameterizes the mean-zero component on its sphere of squared radius
    ``eta`` and minimizes the energy over the mean shift in closed form.
    """
    n = len(z)
    w_inv = np.linalg.inv(w_mat)
    ones = np.ones(n)
    q = null_space(ones[None, :])
    denom = float(ones @ w_inv @ ones)
    if q.shape[1] == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif q.shape[1] == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        raise ValueError("oracle supports n = 2 or 3 only")
    best = np.inf
    r = np.sqrt(eta)
    for w in dirs:
        x_mz = q @ (r * w)
        mu = float(ones @ w_inv @ (z - x_mz)) / denom
        x = x_mz + mu * ones
        e = float((z - x) @ w_inv @ (z - x))
        best = min(best, e)
    return best


def brute_force_min_drivers(a_mat):
    """Largest geometric multiplicity via per-eigenvalue null-space ranks."""
    n = a_mat.shape[0]
    eigs = np.linalg.eigvals(a_mat)
    seen = []
    best = 1
    for lam in eigs:
        if any(abs(lam - s) < 1e-7 * max(1.0, abs(lam)) for s in seen):
            continue
        seen.append(lam)
        gm = n - np.linalg.matrix_rank(lam * np.eye(n) - a_mat)
        best = max(best, int(gm))
    return best


def simpson_scalar_gramian(a, t_star, steps):
    """Composite Simpson for the scalar integral of exp(2 a t)."""
    ts = np.linspace(0.0, t_star, steps + 1)
    f = np.exp(2.0 * a * ts)
    wgt = np.ones(steps + 1)
    wgt[1:-1:2] = 4.0
    wgt[2:-1:2] = 2.0
    return float((t_star / steps) / 3.0 * (wgt @ f))
