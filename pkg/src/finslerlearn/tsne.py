"""t-SNE with a Student-t kernel of nu degrees of freedom, and its Finsler variant.

The Finsler kernel replaces the Euclidean distance by the directed Randers
distance, so q_ij and q_ji differ and the loss can fit asymmetric p.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geometry import EPS_DIST, pairwise_randers
from .init import Embedding

Q_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    nu: float | None = None
    epochs: int = 1000
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    early_exaggeration: float = 12.0
    exaggeration_epochs: int = 250
    min_gain: float = 0.01
    plain_gd: bool = False
    seed: int = 0

    def resolved_nu(self, dim):
        return self.nu if self.nu is not None else default_nu(dim)


def default_nu(dim):
    return float(max(dim - 1, 1))


def _coords(y):
    return y.coords if isinstance(y, Embedding) else np.asarray(y, dtype=np.float64)


def _dense(p):
    return p.to_dense() if hasattr(p, "to_dense") else np.asarray(p, dtype=np.float64)


def _kernel(dist, nu):
    """t = (1 + d^2/nu)^-1 and the Student weights t^((nu+1)/2)."""
    t = 1.0 / (1.0 + dist * dist / nu)
    heavy = t ** ((nu + 1.0) / 2.0)
    np.fill_diagonal(heavy, 0.0)
    return t, heavy


def _normalize(heavy):
    z = heavy.sum()
    q = np.maximum(heavy / z, Q_FLOOR)
    np.fill_diagonal(q, 0.0)
    return q, z


def _weighted_sum(coef, y):
    # sum_j coef_ij (y_i - y_j)
    return coef.sum(axis=1)[:, None] * y - coef @ y


def tsne_q(coords, nu):
    """Normalised Student-t similarities q (N x N, zero diagonal) and Z."""
    y = _coords(coords)
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    _, heavy = _kernel(dist, nu)
    return _normalize(heavy)


def finsler_tsne_q(coords, nu, space=None):
    """Student-t similarities of the directed Randers distances."""
    y = _coords(coords)
    space = space or coords.space
    dist_f, _, _ = pairwise_randers(y, space.omega)
    _, heavy = _kernel(dist_f, nu)
    return _normalize(heavy)


def tsne_grad_fixed(p, coords, nu):
    """Gradient of KL(p || q) for symmetric p summing to one."""
    y = _coords(coords)
    q, _ = tsne_q(y, nu)
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    t, _ = _kernel(dist, nu)
    coef = (_dense(p) - q) * t
    np.fill_diagonal(coef, 0.0)
    return 2.0 * (nu + 1.0) / nu * _weighted_sum(coef, y)


def tsne_grad_legacy(p, coords, nu):
    """Long-standing published variant that uses the Student weights
    t^((nu+1)/2) in place of t; it is only correct for nu = 1."""
    y = _coords(coords)
    q, _ = tsne_q(y, nu)
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    _, heavy = _kernel(dist, nu)
    coef = (_dense(p) - q) * heavy
    np.fill_diagonal(coef, 0.0)
    return 2.0 * (nu + 1.0) / nu * _weighted_sum(coef, y)


def _finsler_grad(p, y, omega, nu):
    dist_f, dist, _ = pairwise_randers(y, omega)
    t, heavy = _kernel(dist_f, nu)
    q, _ = _normalize(heavy)
    a = (p - q) * t * dist_f
    np.fill_diagonal(a, 0.0)
    ray = (a + a.T) / np.maximum(dist, EPS_DIST)
    np.fill_diagonal(ray, 0.0)
    drift = (a.T - a).sum(axis=1)
    grad = (nu + 1.0) / nu * (_weighted_sum(ray, y) + drift[:, None] * omega[None, :])
    return grad, q


def finsler_tsne_grad(p, coords, nu, space=None):
    """Gradient of -sum p_ij ln q^F_ij for p (possibly asymmetric) summing to one."""
    y = _coords(coords)
    space = space or coords.space
    grad, _ = _finsler_grad(_dense(p), y, space.omega, nu)
    return grad


def kl_divergence(p, q):
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def _euclidean_step(p, y, nu):
    _, dist, _ = pairwise_randers(y, np.zeros(y.shape[1]))
    t, heavy = _kernel(dist, nu)
    q, _ = _normalize(heavy)
    coef = (p - q) * t
    np.fill_diagonal(coef, 0.0)
    return 2.0 * (nu + 1.0) / nu * _weighted_sum(coef, y), q


def run_tsne(p, config, init, space=None):
    """Momentum gradient descent on KL(p || q) (or q^F for omega != 0).

    Returns the final embedding and the per-epoch KL trace. The trace
    is evaluated with the unexaggerated p at the coordinates before each
    update.
    """
    space = space or init.space
    y = np.array(init.coords, dtype=np.float64)
    if y.shape[1] != space.dim:
        raise ValueError("init dimension does not match the target space")
    nu = config.resolved_nu(space.dim)
    p = _dense(p)
    euclid = space.is_euclidean
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    trace = np.empty(config.epochs)
    for epoch in range(config.epochs):
        exaggerate = not config.plain_gd and epoch < config.exaggeration_epochs
        p_eff = p * config.early_exaggeration if exaggerate else p
        if euclid:
            grad, q = _euclidean_step(p_eff, y, nu)
        else:
            grad, q = _finsler_grad(p_eff, y, space.omega, nu)
        trace[epoch] = kl_divergence(p, q)
        if not np.isfinite(trace[epoch]) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite t-SNE loss or gradient at epoch {epoch}")
        if config.plain_gd:
            y -= config.learning_rate * grad
            continue
        momentum = config.momentum_early if epoch < config.momentum_switch else config.momentum_late
        inc = update * grad < 0.0
        gains[inc] += 0.2
        gains[~inc] *= 0.8
        np.maximum(gains, config.min_gain, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        y += update
    if not np.all(np.isfinite(y)):
        raise NumericalError("t-SNE produced non-finite coordinates")
    return Embedding(y, space), trace


def loss_of(p, coords, nu, space):
    """KL(p || q) at the given coordinates, Euclidean or Randers."""
    y = _coords(coords)
    q, _ = finsler_tsne_q(y, nu, space) if not space.is_euclidean else tsne_q(y, nu)
    return kl_divergence(_dense(p), q)

