"""Stress embeddings: SMACOF, Finsler SMACOF and Adam descent on the Finsler stress."""
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .geometry import EPS_DIST, RandersSpace, pairwise_randers
from .init import Embedding

PINV_CUTOFF = 1e-10
SMACOF_MAX_SIZE = 4000


@dataclass(frozen=True, eq=False)
class StressProblem:
    """Target dissimilarities D (maybe asymmetric), weights W and the space."""

    D: np.ndarray
    W: np.ndarray
    space: RandersSpace

    def __post_init__(self):
        d = np.array(self.D, dtype=np.float64)
        w = np.array(self.W, dtype=np.float64)
        if d.shape != w.shape or d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DataError("D and W must be square matrices of equal shape")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
            raise DataError("D and W must be finite")
        if np.any(w < 0):
            raise DataError("weights must be nonnegative")
        np.fill_diagonal(w, 0.0)
        object.__setattr__(self, "D", d)
        object.__setattr__(self, "W", w)

    @classmethod
    def unit_weights(cls, D, space):
        n = np.asarray(D).shape[0]
        return cls(D, 1.0 - np.eye(n), space)

    @property
    def n(self):
        return self.D.shape[0]


def _coords(y):
    return y.coords if isinstance(y, Embedding) else np.asarray(y, dtype=np.float64)


def stress(Y, problem):
    """sum_ij w_ij (||y_j - y_i|| - D_ij)^2."""
    y = _coords(Y)
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    return float(np.sum(problem.W * (dist - problem.D) ** 2))


def finsler_stress(Y, problem):
    """sum_ij w_ij (d_F(y_i, y_j) - D_ij)^2."""
    y = _coords(Y)
    dist_f, _, _ = pairwise_randers(y, problem.space.omega)
    return float(np.sum(problem.W * (dist_f - problem.D) ** 2))


def finsler_stress_grad(Y, problem):
    """Analytic gradient of :func:`finsler_stress` (N x m)."""
    y = _coords(Y)
    omega = problem.space.omega
    dist_f, dist, _ = pairwise_randers(y, omega)
    r = problem.W * (dist_f - problem.D)
    np.fill_diagonal(r, 0.0)
    ray = (r + r.T) / np.maximum(dist, EPS_DIST)
    np.fill_diagonal(ray, 0.0)
    ray_term = ray.sum(axis=1)[:, None] * y - ray @ y
    drift = (r.T - r).sum(axis=1)
    return 2.0 * (ray_term + drift[:, None] * omega[None, :])


def _v_pinv(w):
    """Pseudo-inverse of V (V_ij = -w_ij, V_ii = sum_j w_ij)."""
    n = w.shape[0]
    off = w[~np.eye(n, dtype=bool)]
    if off.size and np.all(off == off[0]):
        if off[0] == 0.0:
            raise DataError("all weights are zero")
        return None, float(off[0])
    v = -w.copy()
    np.fill_diagonal(v, w.sum(axis=1))
    if not np.array_equal(w, w.T):
        if not np.any(w):
            raise DataError("all weights are zero")
        return np.linalg.pinv(v, rcond=PINV_CUTOFF), None
    vals, vecs = np.linalg.eigh(v)
    keep = vals > PINV_CUTOFF * max(vals.max(), 0.0)
    if not np.any(keep):
        raise DataError("all weights are zero")
    return (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T, None


def _apply_v_pinv(w, x):
    pinv, uniform = _v_pinv(w)
    if pinv is None:
        # V = c N J for uniform weights c, so V^+ = J / (c N)
        return (x - x.mean(axis=0)) / (uniform * w.shape[0])
    return pinv @ x


def _b_matrix(w, d_target, dist):
    b = -w * d_target / np.maximum(dist, EPS_DIST)
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    return b


def smacof_step(Y, problem):
    """One Guttman transform Y' = V^+ B(Y) Y for symmetric D and W."""
    y = _coords(Y)
    if not np.array_equal(problem.D, problem.D.T) or not np.array_equal(problem.W, problem.W.T):
        raise DataError("SMACOF needs symmetric D and W")
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    b = _b_matrix(problem.W, problem.D, dist)
    return _apply_v_pinv(problem.W, b @ y)


def finsler_c_matrix(problem):
    """C = (W*D - W^T*D^T) 1 omega^T."""
    wd = problem.W * problem.D
    return np.outer((wd - wd.T).sum(axis=1), problem.space.omega)


def finsler_smacof_step(Y, problem, max_size=SMACOF_MAX_SIZE, majorize=False):
    """One Finsler SMACOF iterate vec(Y') = K^+ vec(B(Y) Y - C).

    K = (I + omega omega^T) kron V, and B uses Randers distances. The
    Kronecker structure gives Y' = V^+ (B Y - C) (I + omega omega^T)^-1,
    so K is never formed. Refuses when N * m exceeds ``max_size``.
    Stress is not guaranteed to decrease.

    ``majorize=True`` takes the exact minimiser of a majorizer of the
    Finsler stress instead (symmetric W): B is built from Euclidean
    distances and the mean target (D + D^T) / 2, and C enters at half
    weight. That variant decreases the stress monotonically and its fixed
    points are stationary.
    """
    y = _coords(Y)
    n, m = y.shape
    if n * m > max_size:
        raise DataError(
            f"N*m = {n * m} exceeds {max_size}; use run_finsler_mds_gd for larger problems"
        )
    omega = problem.space.omega
    dist_f, dist, _ = pairwise_randers(y, omega)
    if majorize:
        if not np.array_equal(problem.W, problem.W.T):
            raise DataError("the majorizing step needs symmetric W")
        b = _b_matrix(problem.W, 0.5 * (problem.D + problem.D.T), dist)
        rhs = b @ y - 0.5 * finsler_c_matrix(problem)
    else:
        b = _b_matrix(problem.W, problem.D, dist_f)
        rhs = b @ y - finsler_c_matrix(problem)
    m_inv = np.eye(m) - np.outer(omega, omega) / (1.0 + omega @ omega)
    out = _apply_v_pinv(problem.W, rhs) @ m_inv
    if not np.all(np.isfinite(out)):
        v = -problem.W.copy()
        np.fill_diagonal(v, problem.W.sum(axis=1))
        raise NumericalError(f"pseudo-inverse solve failed (condition estimate {np.linalg.cond(v):.3g})")
    return out


@dataclass(frozen=True)
class MdsGdConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    weight_decay: float = 1e-5
    t_max: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def cosine_lr(base, epoch, t_max):
    return base * (1.0 + np.cos(np.pi * epoch / t_max)) / 2.0


def run_finsler_mds_gd(problem, init, config=None):
    """Adam on the Finsler stress with cosine-annealed step size.

    Weight decay is added to the gradient (L2 style). Returns the final
    embedding and the stress trace, one value before each step plus the
    final value.
    """
    config = config or MdsGdConfig()
    y = np.array(_coords(init), dtype=np.float64)
    if y.shape[1] != problem.space.dim:
        raise ValueError("init dimension does not match the problem space")
    m1 = np.zeros_like(y)
    m2 = np.zeros_like(y)
    trace = np.empty(config.epochs + 1)
    for epoch in range(config.epochs):
        trace[epoch] = finsler_stress(y, problem)
        g = finsler_stress_grad(y, problem) + config.weight_decay * y
        if not (np.isfinite(trace[epoch]) and np.all(np.isfinite(g))):
            raise NumericalError(f"non-finite stress or gradient at epoch {epoch}")
        step = epoch + 1
        m1 = config.beta1 * m1 + (1 - config.beta1) * g
        m2 = config.beta2 * m2 + (1 - config.beta2) * g * g
        m_hat = m1 / (1 - config.beta1**step)
        v_hat = m2 / (1 - config.beta2**step)
        lr = cosine_lr(config.learning_rate, epoch, config.t_max)
        y = y - lr * m_hat / (np.sqrt(v_hat) + config.eps)
    trace[-1] = finsler_stress(y, problem)
    if not np.isfinite(trace[-1]):
        raise NumericalError("non-finite final stress")
    return Embedding(y, problem.space), trace


def run_smacof(problem, init, steps=300, tol=1e-9, finsler=False, majorize=False):
    """Iterate (Finsler) SMACOF steps; returns embedding and stress trace."""
    y = np.array(_coords(init), dtype=np.float64)
    if finsler:
        def step_fn(v, prob):
            return finsler_smacof_step(v, prob, majorize=majorize)
    else:
        step_fn = smacof_step
    loss = finsler_stress if finsler else stress
    trace = [loss(y, problem)]
    for _ in range(steps):
        y = step_fn(y, problem)
        trace.append(loss(y, problem))
        if not np.isfinite(trace[-1]):
            raise NumericalError("non-finite stress during SMACOF")
        if abs(trace[-2] - trace[-1]) <= tol * max(trace[-2], 1.0):
            break
    return Embedding(y, problem.space), np.array(trace)
