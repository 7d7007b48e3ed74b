"""Deterministic initialisations and the lift into a Randers space."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .errors import DataError, GraphError
from .geometry import RandersSpace
from .graph import as_data_matrix

SPECTRAL_SCALE = 10.0
_DENSE_EIGH_MAX = 2000


@dataclass(frozen=True, eq=False)
class Embedding:
    """N x m coordinates together with the space they live in."""

    coords: np.ndarray
    space: RandersSpace

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != self.space.dim:
            raise ValueError(f"coords shape {coords.shape} does not match dim {self.space.dim}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("embedding coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def euclidean(cls, coords):
        coords = np.asarray(coords, dtype=np.float64)
        return cls(coords, RandersSpace.euclidean(coords.shape[1]))

    @property
    def n_points(self):
        return self.coords.shape[0]


def _fix_signs(vectors):
    # make the largest-magnitude entry of every column positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca_init(data, dim):
    """Centered data projected on the top ``dim`` principal directions."""
    x = as_data_matrix(data)
    if dim > x.shape[1]:
        raise DataError(f"dim={dim} exceeds the data dimension {x.shape[1]}")
    xc = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    loadings = _fix_signs(vt[:dim].T)
    coords = xc @ loadings
    # directions with no variance give exact zeros rather than rounding noise
    tiny = s[:dim] <= max(x.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    coords[:, tiny] = 0.0
    return Embedding.euclidean(coords)


def _smallest_eigvecs(lap, count):
    n = lap.shape[0]
    if n <= _DENSE_EIGH_MAX:
        dense = lap.toarray() if sp.issparse(lap) else lap
        vals, vecs = np.linalg.eigh(dense)
        return vals[:count], vecs[:, :count]
    try:
        vals, vecs = eigsh(
            lap, count, which="SM", ncv=max(2 * count + 1, int(np.sqrt(n))),
            tol=1e-4, v0=np.ones(n), maxiter=n * 5,
        )
    except Exception:
        vals, vecs = np.linalg.eigh(lap.toarray())
    order = np.argsort(vals)
    return vals[order][:count], vecs[:, order][:, :count]


def spectral_init(p, dim):
    """Laplacian-eigenmap coordinates of a symmetric affinity, max-abs 10.

    Uses the symmetric normalised Laplacian and drops the trivial
    eigenvector.
    """
    w = p.to_scipy() if hasattr(p, "to_scipy") else sp.csr_matrix(np.asarray(p, dtype=float))
    n = w.shape[0]
    if dim + 1 > n:
        raise DataError(f"dim={dim} needs at least {dim + 1} points")
    n_comp, _ = connected_components(w, directed=False)
    if n_comp > 1:
        raise GraphError(
            f"affinity graph has {n_comp} components; run connect_components first"
        )
    deg = np.asarray(w.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    lap = sp.identity(n, format="csr") - inv_sqrt @ w @ inv_sqrt
    _, vecs = _smallest_eigvecs(lap, dim + 1)
    coords = _fix_signs(vecs[:, 1 : dim + 1])
    coords = coords * (SPECTRAL_SCALE / np.abs(coords).max())
    return Embedding.euclidean(coords)


def double_center(sq):
    """-1/2 J S J for a matrix of squared distances S."""
    row = sq.mean(axis=1, keepdims=True)
    col = sq.mean(axis=0, keepdims=True)
    return -0.5 * (sq - row - col + sq.mean())


def isomap_embed(dist, dim):
    """Classical scaling of a symmetric distance matrix.

    Negative eigenvalues contribute nothing.
    """
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DataError("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise DataError("distance matrix has non-finite entries; is the graph connected?")
    scale = np.abs(d).max() if d.size else 0.0
    if np.abs(d - d.T).max(initial=0.0) > 1e-12 * max(scale, 1.0):
        raise DataError("distance matrix is asymmetric; symmetrise it first")
    if dim > d.shape[0]:
        raise DataError("dim exceeds the number of points")
    gram = double_center(d * d)
    vals, vecs = np.linalg.eigh(gram)
    vals, vecs = vals[::-1][:dim], vecs[:, ::-1][:, :dim]
    coords = _fix_signs(vecs) * np.sqrt(np.maximum(vals, 0.0))
    return Embedding.euclidean(coords)


def lift_rotation(omega):
    """Rotation matrix R with R e_m = omega / ||omega||."""
    omega = np.asarray(omega, dtype=np.float64)
    m = omega.shape[0]
    norm = np.linalg.norm(omega)
    if norm == 0.0:
        raise ValueError("omega = 0 has no asymmetry axis to align with")
    if not np.any(omega[:-1]) and omega[-1] > 0:
        return np.eye(m)
    a = np.zeros(m)
    a[-1] = 1.0
    b = omega / norm
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        # half turn in the (e_1, e_m) plane
        rot = np.eye(m)
        rot[0, 0] = rot[-1, -1] = -1.0
        return rot
    k = np.outer(b, a) - np.outer(a, b)
    return np.eye(m) + k + (k @ k) / (1.0 + c)


def finsler_lift(base, space):
    """Append a zero coordinate, then rotate the new axis onto omega."""
    if not base.space.is_euclidean:
        raise ValueError("base embedding must be Euclidean")
    if space.dim != base.space.dim + 1:
        raise ValueError(f"target dim {space.dim} must be base dim {base.space.dim} + 1")
    if space.is_euclidean:
        raise ValueError("omega = 0 has no asymmetry axis to align with")
    coords = np.hstack([base.coords, np.zeros((base.n_points, 1))])
    rot = lift_rotation(space.omega)
    if rot is not None and not np.array_equal(rot, np.eye(space.dim)):
        coords = coords @ rot.T
    return Embedding(coords, space)
