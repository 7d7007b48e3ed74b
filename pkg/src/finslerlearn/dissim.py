"""Local scales and (a)symmetric dissimilarities p_ij."""
import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, GraphError
from .graph import DirectedProximityGraph

SIGMA_LO = 1e-12
SIGMA_HI = 1e6
MAX_BISECT = 100
BISECT_TOL = 1e-5
MIN_K_DIST_SCALE = 1e-3


class Normalization(enum.Enum):
    NONE = "none"
    ROW_STOCHASTIC = "row_stochastic"
    GLOBAL_SUM_1 = "global_sum_1"


class Symmetry(enum.Enum):
    ASYMMETRIC = "asymmetric"
    SYMMETRIC = "symmetric"


class SymRule(enum.Enum):
    MEAN = "mean"
    MAX = "max"
    TSNE_MEAN = "tsne_mean"
    UMAP_FUZZY_UNION = "umap_fuzzy_union"


@dataclass(frozen=True)
class LocalScales:
    """Per-point bandwidths ``sigma`` and offsets ``rho``.

    ``degenerate`` flags rows where the target could not be met and the
    solver fell back to a clamp or midpoint.
    """

    sigma: np.ndarray
    rho: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True, eq=False)
class AsymDissimilarities:
    """Sparse N x N map (i, j) -> p_ij >= 0 in CSR layout, diagonal absent."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    normalization: Normalization = Normalization.NONE
    symmetry: Symmetry = Symmetry.ASYMMETRIC

    @classmethod
    def from_coo(cls, n, rows, cols, values, normalization=Normalization.NONE,
                 symmetry=Symmetry.ASYMMETRIC):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        order = np.lexsort((cols, rows))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(n, np.cumsum(indptr), cols[order], values[order], normalization, symmetry)

    @property
    def nnz(self):
        return len(self.values)

    def rows(self):
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        out[self.rows(), self.indices] = self.values
        return out

    def to_scipy(self):
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=(self.n, self.n))

    def total(self):
        return float(self.values.sum())

    def scaled(self, factor, normalization):
        return AsymDissimilarities(self.n, self.indptr, self.indices, self.values * factor,
                                   normalization, self.symmetry)

    def global_normalized(self):
        """Divide by the total so that all entries sum to one."""
        return self.scaled(1.0 / self.total(), Normalization.GLOBAL_SUM_1)


def _row_slices(graph):
    for i in range(graph.n_nodes):
        lo, hi = graph.indptr[i], graph.indptr[i + 1]
        yield i, graph.weights[lo:hi]


def _row_perplexity(d2, sigma):
    # 2**H of the row softmax of -d^2 / (2 sigma^2), shifted for stability
    logits = -(d2 - d2.min()) / (2.0 * sigma * sigma)
    w = np.exp(logits)
    z = w.sum()
    p = w / z
    h = -np.sum(p[p > 0] * np.log2(p[p > 0]))
    return 2.0 ** h


def perplexity_scales(graph, perplexity):
    """Gaussian bandwidths whose row distributions hit ``perplexity``.

    Rows whose out-distances are all equal have perplexity equal to the
    out-degree for every sigma; they get the search midpoint and a flag.
    """
    deg = graph.out_degree()
    if np.any(perplexity >= deg):
        raise GraphError(
            f"perplexity {perplexity} must be below every out-degree (min {deg.min()})"
        )
    n = graph.n_nodes
    sigma = np.empty(n)
    degenerate = np.zeros(n, bool)
    for i, d in _row_slices(graph):
        d2 = d * d
        lo, hi = SIGMA_LO, SIGMA_HI
        mid = 0.5 * (lo + hi)
        if np.all(d2 == d2[0]):
            sigma[i] = mid
            degenerate[i] = True
            continue
        best, best_err = mid, np.inf
        for _ in range(MAX_BISECT):
            err = _row_perplexity(d2, mid) - perplexity
            if abs(err) < best_err:
                best, best_err = mid, abs(err)
            if abs(err) < BISECT_TOL:
                break
            if err > 0:
                hi = mid
            else:
                lo = mid
            mid = 0.5 * (lo + hi)
        else:
            sigma[i] = best
            raise ConvergenceError(
                f"perplexity search did not converge for row {i} (error {best_err:.3g})",
                best=sigma,
            )
        sigma[i] = best
    return LocalScales(sigma, np.zeros(n), degenerate)


def umap_scales(graph, k):
    """Offsets rho_i (nearest distance) and bandwidths sigma_i.

    sigma_i solves sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k);
    infeasible rows are clamped to 1e-3 times the mean out-distance.
    """
    deg = graph.out_degree()
    if np.any(deg < 1):
        raise GraphError("every node needs at least one out-edge")
    n = graph.n_nodes
    target = np.log2(k)
    sigma = np.empty(n)
    rho = np.empty(n)
    degenerate = np.zeros(n, bool)
    for i, d in _row_slices(graph):
        rho[i] = d.min()
        shifted = np.maximum(d - rho[i], 0.0)
        sigma_min = MIN_K_DIST_SCALE * d.mean()
        lo, hi = SIGMA_LO, SIGMA_HI
        mid = 0.5 * (lo + hi)
        converged = False
        for _ in range(MAX_BISECT):
            psum = np.exp(-shifted / mid).sum()
            if abs(psum - target) < BISECT_TOL:
                converged = True
                break
            if psum > target:
                hi = mid
            else:
                lo = mid
            mid = 0.5 * (lo + hi)
        if not converged or mid < sigma_min:
            degenerate[i] = True
        sigma[i] = min(max(mid, sigma_min), SIGMA_HI)
    return LocalScales(sigma, rho, degenerate)


def _graph_coo(graph):
    return graph.sources(), graph.indices, graph.weights


def tsne_p(graph, scales):
    """Row softmax of -d_ij^2 / (2 sigma_i^2) over out-neighbours."""
    n = graph.n_nodes
    values = np.empty(graph.n_edges)
    for i, d in _row_slices(graph):
        if len(d) == 0:
            continue
        lo, hi = graph.indptr[i], graph.indptr[i + 1]
        d2 = d * d
        w = np.exp(-(d2 - d2.min()) / (2.0 * scales.sigma[i] ** 2))
        values[lo:hi] = w / w.sum()
    return AsymDissimilarities(n, graph.indptr.copy(), graph.indices.copy(), values,
                               Normalization.ROW_STOCHASTIC, Symmetry.ASYMMETRIC)


def umap_p(graph, scales):
    """exp(-max(0, d_ij - rho_i) / sigma_i), entries in (0, 1]."""
    src = graph.sources()
    shifted = np.maximum(graph.weights - scales.rho[src], 0.0)
    values = np.exp(-shifted / scales.sigma[src])
    return AsymDissimilarities(graph.n_nodes, graph.indptr.copy(), graph.indices.copy(),
                               values, Normalization.NONE, Symmetry.ASYMMETRIC)


def raw_p(source):
    """Distances as dissimilarities, from a graph or a dense matrix.

    Dense input keeps every finite off-diagonal entry.
    """
    if isinstance(source, DirectedProximityGraph):
        return AsymDissimilarities(source.n_nodes, source.indptr.copy(), source.indices.copy(),
                                   source.weights.copy())
    dense = np.asarray(source, dtype=np.float64)
    n = dense.shape[0]
    mask = np.isfinite(dense) & ~np.eye(n, dtype=bool)
    rows, cols = np.nonzero(mask)
    return AsymDissimilarities.from_coo(n, rows, cols, dense[rows, cols])


def _pair_values(p):
    """Union support of p and p^T with forward and reverse values (absent = 0)."""
    n = p.n
    rows = p.rows()
    keys = rows * n + p.indices
    rev = p.indices * n + rows
    union = np.union1d(keys, rev)
    fwd = np.zeros(len(union))
    bwd = np.zeros(len(union))
    fwd[np.searchsorted(union, keys)] = p.values
    bwd[np.searchsorted(union, rev)] = p.values
    return union // n, union % n, fwd, bwd


def symmetrise(p, rule):
    """Symmetric combination of p_ij and p_ji; missing entries count as 0."""
    rule = SymRule(rule)
    rows, cols, a, b = _pair_values(p)
    normalization = Normalization.NONE
    if rule is SymRule.MEAN:
        values = 0.5 * (a + b)
    elif rule is SymRule.MAX:
        values = np.maximum(a, b)
    elif rule is SymRule.TSNE_MEAN:
        values = (a + b) / (2.0 * p.n)
        normalization = Normalization.GLOBAL_SUM_1
    else:
        values = a + b - a * b
    return AsymDissimilarities.from_coo(p.n, rows, cols, values, normalization,
                                        Symmetry.SYMMETRIC)


def harmonic_fix(graph, scales, data=None):
    """Rescale edges by the mean inverse scale of both endpoints.

    weight(i, j) = 0.5 * (1/sigma_i + 1/sigma_j) * ||x_j - x_i||. Edge
    weights are taken as the Euclidean lengths unless ``data`` is given.
    """
    src = graph.sources()
    length = graph.weights
    if data is not None:
        length = np.linalg.norm(np.asarray(data)[graph.indices] - np.asarray(data)[src], axis=1)
    inv = 1.0 / scales.sigma
    return graph.with_weights(0.5 * (inv[src] + inv[graph.indices]) * length)


def asymmetry_measure(p):
    """||P - P^T||_F / ||P + P^T||_F over the union support (0 for P = 0)."""
    _, _, a, b = _pair_values(p)
    den = np.sqrt(np.sum((a + b) ** 2))
    if den == 0.0:
        return 0.0
    return float(np.sqrt(np.sum((a - b) ** 2)) / den)


def scale_by_source(graph, scales):
    """Locally rescaled distances d_ij / sigma_i (asymmetric in general)."""
    return graph.with_weights(graph.weights / scales.sigma[graph.sources()])


def write_dissimilarities(p, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes {p.n}\n")
        for i, j, v in zip(p.rows(), p.indices, p.values):
            fh.write(f"{i}\t{j}\t{v:.17g}\n")
