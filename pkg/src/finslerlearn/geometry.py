"""The canonical Randers space: d(x, y) = ||y - x|| + omega . (y - x)."""
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair, InvalidDrift

EPS_DIST = 1e-12


@dataclass(frozen=True, eq=False)
class RandersSpace:
    """Constant-drift Randers metric on R^dim.

    ``omega = 0`` is the Euclidean special case. Construction validates
    ``||omega|| < 1``.
    """

    dim: int
    omega: np.ndarray

    def __post_init__(self):
        omega = np.array(self.omega, dtype=np.float64).reshape(-1)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        if omega.shape[0] != self.dim:
            raise ValueError(f"omega has length {omega.shape[0]}, expected {self.dim}")
        validate_space(self)

    @classmethod
    def euclidean(cls, dim):
        return cls(dim, np.zeros(dim))

    @classmethod
    def along_last_axis(cls, dim, magnitude):
        omega = np.zeros(dim)
        omega[-1] = magnitude
        return cls(dim, omega)

    @property
    def omega_norm(self):
        return float(np.linalg.norm(self.omega))

    @property
    def is_euclidean(self):
        return not np.any(self.omega)

    def __eq__(self, other):
        if not isinstance(other, RandersSpace):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.omega, other.omega)

    def __hash__(self):
        return hash((self.dim, self.omega.tobytes()))

    def __repr__(self):
        return f"RandersSpace(dim={self.dim}, omega={self.omega.tolist()})"


def validate_space(space):
    """Raise InvalidDrift unless the drift is strictly inside the unit ball."""
    omega = np.asarray(space.omega, dtype=np.float64)
    if not np.all(np.isfinite(omega)):
        raise InvalidDrift("omega must be finite")
    norm = np.linalg.norm(omega)
    if norm >= 1.0:
        raise InvalidDrift(f"||omega|| = {norm:.6g} must be < 1")


def _pair(space, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (space.dim,) or y.shape != (space.dim,):
        raise ValueError(
            f"points must have shape ({space.dim},), got {x.shape} and {y.shape}"
        )
    return x, y


def randers_distance(space, x, y):
    """Directed distance from ``x`` to ``y``."""
    x, y = _pair(space, x, y)
    delta = y - x
    return float(np.sqrt(delta @ delta) + space.omega @ delta)


def randers_distance_grad(space, x, y):
    """Gradients of d(x, y) with respect to ``x`` and ``y``.

    The two gradients are exact negatives of each other. Raises
    DegeneratePair when the points coincide (within EPS_DIST).
    """
    x, y = _pair(space, x, y)
    delta = y - x
    norm = np.sqrt(delta @ delta)
    if norm <= EPS_DIST:
        raise DegeneratePair("gradient undefined for coincident points")
    grad_y = delta / norm + space.omega
    return -grad_y, grad_y


def pairwise_deltas(coords):
    """``delta[i, j] = y_j - y_i`` and the Euclidean lengths ``d[i, j]``."""
    delta = coords[None, :, :] - coords[:, None, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
    return delta, dist


def pairwise_randers(coords, omega):
    """Dense matrix of directed distances ``d_F[i, j] = d(y_i, y_j)``.

    Also returns the Euclidean part and the drift part so callers can
    reuse them.
    """
    delta, dist = pairwise_deltas(coords)
    drift = delta @ omega
    return dist + drift, dist, drift
