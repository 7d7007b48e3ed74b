"""Directed proximity graphs: kNN construction, geodesic extension, repair."""
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

from .errors import DataError, GraphError

_BLOCK = 256


def as_data_matrix(data):
    """Validate a point cloud: 2-D, float64, all entries finite."""
    values = np.ascontiguousarray(data, dtype=np.float64)
    if values.ndim != 2:
        raise DataError(f"data must be a 2-D matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DataError("data contains non-finite entries")
    return values


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DirectedProximityGraph:
    """Weighted digraph in CSR form.

    Out-edges of node ``i`` are ``indices[indptr[i]:indptr[i+1]]`` with
    distances ``weights[...]``. ``added`` flags edges inserted by
    :func:`connect_components`; they are ordinary edges for everything
    downstream and the flag only serves auditing.
    """

    n_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    added: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "indptr", _frozen(self.indptr, np.int64))
        object.__setattr__(self, "indices", _frozen(self.indices, np.int64))
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))
        added = np.zeros(len(self.indices), bool) if self.added is None else self.added
        object.__setattr__(self, "added", _frozen(added, bool))
        n = self.n_nodes
        if self.indptr.shape != (n + 1,) or self.indptr[-1] != len(self.indices):
            raise GraphError("inconsistent CSR structure")
        if len(self.weights) != len(self.indices) or len(self.added) != len(self.indices):
            raise GraphError("indices, weights and flags must align")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise GraphError("edge target out of range")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise GraphError("edge distances must be finite and >= 0")
        if np.any(self.indices == self.sources()):
            raise GraphError("self-edges are not allowed")

    @classmethod
    def from_edges(cls, n_nodes, sources, targets, weights, added=None):
        """Build from edge arrays; edges are sorted by (source, target)."""
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        added = np.zeros(len(sources), bool) if added is None else np.asarray(added, bool)
        order = np.lexsort((targets, sources))
        sources, targets = sources[order], targets[order]
        if len(sources) > 1:
            dup = (sources[1:] == sources[:-1]) & (targets[1:] == targets[:-1])
            if np.any(dup):
                raise GraphError("duplicate edges")
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, sources + 1, 1)
        return cls(n_nodes, np.cumsum(indptr), targets, weights[order], added[order])

    @property
    def n_edges(self):
        return len(self.indices)

    def out_degree(self):
        return np.diff(self.indptr)

    def sources(self):
        return np.repeat(np.arange(self.n_nodes), np.diff(self.indptr))

    def out_edges(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return list(zip(self.indices[lo:hi].tolist(), self.weights[lo:hi].tolist()))

    def edge_set(self):
        return set(zip(self.sources().tolist(), self.indices.tolist()))

    def to_scipy(self):
        """CSR matrix view; explicit zero distances are kept as edges."""
        return sp.csr_matrix(
            (self.weights.copy(), self.indices.copy(), self.indptr.copy()),
            shape=(self.n_nodes, self.n_nodes),
        )

    def to_dense(self, fill=np.inf):
        out = np.full((self.n_nodes, self.n_nodes), fill)
        out[self.sources(), self.indices] = self.weights
        return out

    def with_weights(self, weights):
        return DirectedProximityGraph(self.n_nodes, self.indptr, self.indices, weights, self.added)


def knn_exact(data, k):
    """Exact directed kNN graph; ties go to the lower index."""
    x = as_data_matrix(data)
    n = x.shape[0]
    if not 1 <= k < n:
        raise GraphError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    indices = np.empty((n, k), dtype=np.int64)
    weights = np.empty((n, k))
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        dist = cdist(x[lo:hi], x)
        dist[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        # stable sort keeps index order among equal distances
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        indices[lo:hi] = order
        weights[lo:hi] = np.take_along_axis(dist, order, axis=1)
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return _sorted_rows(n, indptr, indices.ravel(), weights.ravel())


def _sorted_rows(n, indptr, indices, weights, added=None):
    # store rows ordered by target index so that equal graphs compare equal
    sources = np.repeat(np.arange(n), np.diff(indptr))
    order = np.lexsort((indices, sources))
    added = None if added is None else added[order]
    return DirectedProximityGraph(n, indptr, indices[order], weights[order], added)


@numba.njit(cache=True)
def _heap_push(idx, dist, flag, row, j, d, is_new):
    k = idx.shape[1]
    if d > dist[row, 0] or (d == dist[row, 0] and j > idx[row, 0]):
        return 0
    for t in range(k):
        if idx[row, t] == j:
            return 0
    # replace the root (current worst) and sift down
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        if left >= k:
            break
        child = left
        if right < k and (
            dist[row, right] > dist[row, left]
            or (dist[row, right] == dist[row, left] and idx[row, right] > idx[row, left])
        ):
            child = right
        if dist[row, child] < d or (dist[row, child] == d and idx[row, child] < j):
            break
        idx[row, pos] = idx[row, child]
        dist[row, pos] = dist[row, child]
        flag[row, pos] = flag[row, child]
        pos = child
    idx[row, pos] = j
    dist[row, pos] = d
    flag[row, pos] = is_new
    return 1


@numba.njit(cache=True)
def _sqdist(x, i, j):
    s = 0.0
    for t in range(x.shape[1]):
        diff = x[i, t] - x[j, t]
        s += diff * diff
    return s


@numba.njit(cache=True)
def _nn_descent(x, k, seed, max_iters, sample_rate, delta):
    np.random.seed(seed)
    n = x.shape[0]
    idx = np.full((n, k), -1, dtype=np.int64)
    dist = np.full((n, k), np.inf)
    flag = np.zeros((n, k), dtype=np.bool_)
    for i in range(n):
        filled = 0
        while filled < k:
            j = np.random.randint(0, n)
            if j != i:
                filled += _heap_push(idx, dist, flag, i, j, _sqdist(x, i, j), True)
    n_sample = max(1, int(sample_rate * k))
    cap = 2 * n_sample
    for _ in range(max_iters):
        new_c = np.full((n, cap), -1, dtype=np.int64)
        old_c = np.full((n, cap), -1, dtype=np.int64)
        n_new = np.zeros(n, dtype=np.int64)
        n_old = np.zeros(n, dtype=np.int64)
        for i in range(n):
            taken = 0
            for t in range(k):
                j = idx[i, t]
                if flag[i, t]:
                    if taken >= n_sample:
                        continue
                    taken += 1
                    flag[i, t] = False
                    if n_new[i] < cap:
                        new_c[i, n_new[i]] = j
                        n_new[i] += 1
                    if n_new[j] < cap:
                        new_c[j, n_new[j]] = i
                        n_new[j] += 1
                else:
                    if n_old[i] < cap:
                        old_c[i, n_old[i]] = j
                        n_old[i] += 1
                    if n_old[j] < cap:
                        old_c[j, n_old[j]] = i
                        n_old[j] += 1
        updates = 0
        for v in range(n):
            for a in range(n_new[v]):
                p = new_c[v, a]
                for b in range(a + 1, n_new[v]):
                    q = new_c[v, b]
                    if p == q:
                        continue
                    d = _sqdist(x, p, q)
                    updates += _heap_push(idx, dist, flag, p, q, d, True)
                    updates += _heap_push(idx, dist, flag, q, p, d, True)
                for b in range(n_old[v]):
                    q = old_c[v, b]
                    if p == q:
                        continue
                    d = _sqdist(x, p, q)
                    updates += _heap_push(idx, dist, flag, p, q, d, True)
                    updates += _heap_push(idx, dist, flag, q, p, d, True)
        if updates <= delta * n * k:
            break
    return idx, dist


def knn_descent(data, k, seed=0, max_iters=10, sample_rate=0.5, delta=0.001):
    """Approximate kNN graph by nearest-neighbour descent.

    Deterministic for a given seed. Falls back to :func:`knn_exact`
    when ``N <= k + 1``.
    """
    x = as_data_matrix(data)
    n = x.shape[0]
    if not 1 <= k < n:
        raise GraphError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    if n <= k + 1:
        return knn_exact(x, k)
    idx, _ = _nn_descent(x, k, int(seed) % (2**32), int(max_iters), float(sample_rate), delta)
    # recompute distances the same way knn_exact does
    d = np.linalg.norm(x[idx] - x[:, None, :], axis=2)
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return _sorted_rows(n, indptr, idx.ravel(), d.ravel())


def knn_graph(data, k, method="auto", seed=0):
    """kNN graph: exact below 4096 points, NN-descent above (``auto``)."""
    if method == "auto":
        method = "exact" if len(data) < 4096 else "descent"
    if method == "exact":
        return knn_exact(data, k)
    if method == "descent":
        return knn_descent(data, k, seed=seed)
    raise ValueError(f"unknown kNN method {method!r}")


def geodesic_extend(graph, mode="full", k_plus=None):
    """Directed shortest-path distances over the graph.

    ``mode="full"`` returns a dense N x N matrix with ``inf`` for
    unreachable pairs. ``mode="truncate"`` keeps, per node, the ``k_plus``
    smallest finite distances (self excluded, ties to the lower index) and
    returns a new graph.
    """
    dense = dijkstra(graph.to_scipy(), directed=True)
    if mode == "full":
        return dense
    if mode != "truncate":
        raise ValueError(f"unknown extension mode {mode!r}")
    if k_plus is None or k_plus < 1:
        raise ValueError("truncate mode needs k_plus >= 1")
    n = graph.n_nodes
    np.fill_diagonal(dense, np.inf)
    order = np.argsort(dense, axis=1, kind="stable")[:, :k_plus]
    picked = np.take_along_axis(dense, order, axis=1)
    keep = np.isfinite(picked)
    counts = keep.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return _sorted_rows(n, indptr, order[keep], picked[keep])


def connect_components(graph, data):
    """Join weak components by greedily adding the closest cross pair.

    Repeatedly links the globally closest pair of points lying in
    different components with a bidirectional Euclidean edge. Returns the
    input unchanged when it is already weakly connected.
    """
    x = as_data_matrix(data)
    n = graph.n_nodes
    if x.shape[0] != n:
        raise DataError("data and graph sizes differ")
    n_comp, comp = connected_components(graph.to_scipy(), directed=True, connection="weak")
    if n_comp == 1:
        return graph
    # closest pair between every two components
    best = np.full((n_comp, n_comp), np.inf)
    best_pair = np.zeros((n_comp, n_comp, 2), dtype=np.int64)
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        dist = cdist(x[members], x)
        for c2 in range(c + 1, n_comp):
            others = np.flatnonzero(comp == c2)
            block = dist[:, others]
            flat = int(np.argmin(block))
            a, b = divmod(flat, len(others))
            best[c, c2] = block[a, b]
            best_pair[c, c2] = (members[a], others[b])
    cand = [
        (best[c, c2], *sorted(best_pair[c, c2].tolist()), c, c2)
        for c in range(n_comp)
        for c2 in range(c + 1, n_comp)
    ]
    cand.sort()
    parent = list(range(n_comp))

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    new_src, new_dst, new_w = [], [], []
    for w, i, j, c, c2 in cand:
        r, r2 = find(c), find(c2)
        if r == r2:
            continue
        parent[r2] = r
        new_src += [i, j]
        new_dst += [j, i]
        new_w += [w, w]
    src = np.concatenate([graph.sources(), new_src])
    dst = np.concatenate([graph.indices, new_dst])
    wts = np.concatenate([graph.weights, new_w])
    added = np.concatenate([graph.added, np.ones(len(new_src), bool)])
    return DirectedProximityGraph.from_edges(n, src, dst, wts, added)


def add_reverse_edges(graph):
    """Complete missing reverse edges (j, i) with the weight of (i, j).

    Removes binary asymmetry only; reciprocal pairs keep their own
    weights. New edges are flagged in ``added``.
    """
    n = graph.n_nodes
    src = graph.sources()
    keys = src * n + graph.indices
    rev = graph.indices * n + src
    missing = ~np.isin(rev, keys)
    if not np.any(missing):
        return graph
    return DirectedProximityGraph.from_edges(
        n,
        np.concatenate([src, graph.indices[missing]]),
        np.concatenate([graph.indices, src[missing]]),
        np.concatenate([graph.weights, graph.weights[missing]]),
        np.concatenate([graph.added, np.ones(int(missing.sum()), bool)]),
    )


def is_weakly_connected(graph):
    return connected_components(graph.to_scipy(), directed=True, connection="weak")[0] == 1


def write_graph(graph, path):
    """Edge-list text format: ``#nodes N`` then ``i<TAB>j<TAB>distance``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes {graph.n_nodes}\n")
        for i, j, w in zip(graph.sources(), graph.indices, graph.weights):
            fh.write(f"{i}\t{j}\t{w:.17g}\n")


def read_graph(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "#nodes":
            raise DataError("missing '#nodes N' header", line=1)
        n = int(header[1])
        src, dst, wts = [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DataError("expected i<TAB>j<TAB>distance", line=lineno)
            try:
                src.append(int(parts[0]))
                dst.append(int(parts[1]))
                wts.append(float(parts[2]))
            except ValueError as exc:
                raise DataError(str(exc), line=lineno) from None
    return DirectedProximityGraph.from_edges(n, src, dst, wts)
