"""UMAP and Finsler UMAP with negative-sampling SGD.

With q = (1 + a d_F^(2b))^-1 the attractive cost is -ln q and the repulsive
cost is -ln(1 - q). For both costs the gradient with respect to y_i is the
negative of the gradient with respect to y_j, because d_F depends on the
pair only through y_j - y_i.
"""
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import curve_fit

from .errors import ConvergenceError, NumericalError
from .geometry import EPS_DIST
from .init import Embedding

REPULSION_EPS = 1e-3
# least-squares optimum for min_dist=0.1, spread=1 already has RMS ~0.016
FIT_RMS_MAX = 0.05


@dataclass(frozen=True)
class UmapConfig:
    k: int = 15
    min_dist: float = 0.1
    spread: float = 1.0
    a: float | None = None
    b: float | None = None
    epochs: int = 200
    neg_samples: int = 5
    learning_rate: float = 1.0
    seed: int = 0
    grad_clip: float = 4.0
    symmetric_updates: bool = False
    parallel: bool = False

    def curve(self):
        if self.a is not None and self.b is not None:
            return float(self.a), float(self.b)
        return fit_ab(self.min_dist, self.spread)


def fit_ab(min_dist, spread):
    """Least-squares fit of (1 + a d^(2b))^-1 to the min_dist/spread target."""
    if not 0 < min_dist <= 10 * spread:
        raise ValueError("need 0 < min_dist <= 10 * spread")

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    try:
        params, _ = curve_fit(curve, xv, yv)
    except RuntimeError as exc:
        raise ConvergenceError(f"curve fit failed: {exc}") from None
    a, b = float(params[0]), float(params[1])
    rms = np.sqrt(np.mean((curve(xv, a, b) - yv) ** 2))
    if not (a > 0 and b > 0) or rms >= FIT_RMS_MAX:
        raise ConvergenceError(f"curve fit unusable (a={a:.4g}, b={b:.4g}, rms={rms:.3g})")
    return a, b


@numba.njit(cache=True)
def _pair_terms(yi, yj, omega, a, b):
    # Euclidean and Randers lengths of the pair, plus q^F
    m = yi.shape[0]
    d2 = 0.0
    drift = 0.0
    for t in range(m):
        diff = yj[t] - yi[t]
        d2 += diff * diff
        drift += omega[t] * diff
    d = np.sqrt(d2)
    df = d + drift
    q = 1.0 / (1.0 + a * df ** (2.0 * b))
    return d, df, q


@numba.njit(cache=True)
def _attractive(yi, yj, omega, a, b, out):
    d, df, q = _pair_terms(yi, yj, omega, a, b)
    if d <= EPS_DIST:
        out[:] = 0.0
        return
    c = 2.0 * a * b * df ** (2.0 * b - 1.0) * q
    ray = c / d
    for t in range(yi.shape[0]):
        out[t] = ray * (yi[t] - yj[t]) - c * omega[t]


@numba.njit(cache=True)
def _repulsive(yi, yj, omega, a, b, damping, out):
    d, df, q = _pair_terms(yi, yj, omega, a, b)
    if d <= EPS_DIST:
        out[:] = 0.0
        return
    ray = 2.0 * b * q / (d * df + damping)
    for t in range(yi.shape[0]):
        out[t] = -ray * (yi[t] - yj[t]) + ray * d * omega[t]


def _vec(v):
    return np.ascontiguousarray(v, dtype=np.float64)


def umap_attractive_grad(y_i, y_j, a, b):
    """d(-ln q)/dy_i for q = (1 + a d^(2b))^-1."""
    y_i = _vec(y_i)
    out = np.empty_like(y_i)
    _attractive(y_i, _vec(y_j), np.zeros_like(y_i), a, b, out)
    return out


def umap_repulsive_grad(y_i, y_j, a, b):
    """d(-ln(1 - q))/dy_i for q = (1 + a d^(2b))^-1."""
    y_i = _vec(y_i)
    out = np.empty_like(y_i)
    _repulsive(y_i, _vec(y_j), np.zeros_like(y_i), a, b, 0.0, out)
    return out


def finsler_umap_grads(y_i, y_j, space, a, b):
    """Attractive and repulsive gradients with respect to y_i on a Randers space.

    The gradients with respect to y_j are their exact negatives.
    """
    y_i, y_j = _vec(y_i), _vec(y_j)
    att = np.empty_like(y_i)
    rep = np.empty_like(y_i)
    _attractive(y_i, y_j, space.omega, a, b, att)
    _repulsive(y_i, y_j, space.omega, a, b, 0.0, rep)
    return att, rep


def finsler_umap_tail_grads(y_i, y_j, space, a, b):
    """Gradients of the same two costs with respect to the tail y_j."""
    att, rep = finsler_umap_grads(y_i, y_j, space, a, b)
    return -att, -rep


def finsler_umap_costs(y_i, y_j, space, a, b):
    """(-ln q^F, -ln(1 - q^F)) for the ordered pair (i, j)."""
    _, _, q = _pair_terms(_vec(y_i), _vec(y_j), space.omega, a, b)
    return -np.log(q), -np.log1p(-q)


def epochs_per_sample(weights, epochs):
    """Epoch spacing between updates of each edge: max_p / p_e."""
    weights = np.asarray(weights, dtype=np.float64)
    out = np.full(len(weights), -1.0)
    expected = epochs * weights / weights.max()
    active = expected > 0
    out[active] = epochs / expected[active]
    return out


def expected_updates(weights, epochs):
    """Number of updates each edge receives: round(epochs * p / max_p)."""
    eps = epochs_per_sample(weights, epochs)
    return _count_updates(eps, epochs)


def _count_updates(eps, epochs):
    counts = np.zeros(len(eps), dtype=np.int64)
    for e, step in enumerate(eps):
        if step <= 0:
            continue
        counts[e] = int(np.floor(epochs / step - 0.5)) + 1 if epochs / step >= 0.5 else 0
    return counts


def _clip(v, lim):
    return min(max(v, -lim), lim)


def _sgd_impl(y, heads, tails, eps, omega, a, b, epochs, neg_samples, lr, clip,
              symmetric, seed, counts):
    np.random.seed(seed)
    n, m = y.shape
    n_edges = heads.shape[0]
    next_sample = eps * 0.5
    g = np.empty(m)
    g2 = np.empty(m)
    for n_epoch in range(1, epochs + 1):
        alpha = lr * (1.0 - (n_epoch - 1) / epochs)
        for e in numba.prange(n_edges):
            if eps[e] <= 0.0 or next_sample[e] > n_epoch:
                continue
            i = heads[e]
            j = tails[e]
            counts[e] += 1
            _attractive(y[i], y[j], omega, a, b, g)
            for t in range(m):
                step = alpha * _clip(g[t], clip)
                y[i, t] -= step
                y[j, t] += step
            for _ in range(neg_samples):
                k = np.random.randint(0, n - 1)
                if k >= i:
                    k += 1
                _repulsive(y[i], y[k], omega, a, b, REPULSION_EPS, g)
                if symmetric:
                    _repulsive(y[k], y[i], omega, a, b, REPULSION_EPS, g2)
                    for t in range(m):
                        step = alpha * _clip(g[t] - g2[t], clip)
                        y[i, t] -= step
                        y[k, t] += step
                else:
                    for t in range(m):
                        y[i, t] -= alpha * _clip(g[t], clip)
            next_sample[e] += eps[e]
        for i in range(n):
            for t in range(m):
                if not np.isfinite(y[i, t]):
                    return n_epoch
    return 0


_clip = numba.njit(cache=True)(_clip)
_sgd_serial = numba.njit(cache=True)(_sgd_impl)
_sgd_parallel = numba.njit(cache=True, parallel=True)(_sgd_impl)


def run_umap(p, config, init, space=None, return_counts=False):
    """Negative-sampling SGD over the ordered edges of ``p``.

    Each sampled edge (i, j) pulls y_i and y_j together via the attractive
    gradient, then ``neg_samples`` uniformly drawn k != i push y_i away
    from y_k (and y_k from y_i when ``symmetric_updates`` is set). Edge
    (i, j) is sampled round(epochs * p_ij / max p) times.
    """
    space = space or init.space
    y = np.array(init.coords, dtype=np.float64)
    if y.shape[1] != space.dim:
        raise ValueError("init dimension does not match the target space")
    heads = p.rows().astype(np.int64)
    tails = p.indices.astype(np.int64)
    weights = p.values
    if np.any(weights < 0) or np.any(weights > 1) or len(weights) == 0:
        raise ValueError("p entries must lie in (0, 1]")
    a, b = config.curve()
    eps = epochs_per_sample(weights, config.epochs)
    counts = np.zeros(len(weights), dtype=np.int64)
    sgd = _sgd_parallel if config.parallel else _sgd_serial
    bad = sgd(y, heads, tails, eps, np.ascontiguousarray(space.omega), a, b, int(config.epochs),
              int(config.neg_samples), float(config.learning_rate), float(config.grad_clip),
              bool(config.symmetric_updates), int(config.seed) % (2**32), counts)
    if bad:
        raise NumericalError(f"UMAP coordinates became non-finite by epoch {bad}")
    emb = Embedding(y, space)
    return (emb, counts) if return_counts else emb
