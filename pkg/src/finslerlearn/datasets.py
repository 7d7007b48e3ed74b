"""Synthetic toy data and CSV ingestion."""
import csv

import numpy as np

from .errors import DataError


def gen_disk(n):
    """Uniform polar grid on the unit disk: 20 angles by n/20 radii.

    Radii are k/R for k = 1..R, so the centre is not sampled and the
    Cartesian density grows towards it.
    """
    if n <= 0 or n % 20:
        raise DataError(f"n must be a positive multiple of 20, got {n}")
    n_radii = n // 20
    radii = np.arange(1, n_radii + 1) / n_radii
    angles = 2.0 * np.pi * np.arange(20) / 20
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    rr, aa = rr.ravel(), aa.ravel()
    return np.column_stack([rr * np.cos(aa), rr * np.sin(aa)])


def swiss_roll_grid(n_target):
    return int(np.floor(2.5 * np.sqrt(n_target))), int(np.floor(0.4 * np.sqrt(n_target)))


def gen_swiss_roll(n_target):
    """Grid-sampled Swiss roll; returns the points and their (u, v) parameters.

    x = (s cos s, 20 v, s sin s) with s = 3 pi (u + 1/2) over a
    floor(2.5 sqrt(n)) by floor(0.4 sqrt(n)) grid on the unit square.
    """
    if n_target < 25:
        raise DataError("n_target must be at least 25")
    n_u, n_v = swiss_roll_grid(n_target)
    u, v = np.meshgrid(np.linspace(0.0, 1.0, n_u), np.linspace(0.0, 1.0, n_v), indexing="ij")
    u, v = u.ravel(), v.ravel()
    s = 3.0 * np.pi * (u + 0.5)
    x = np.column_stack([s * np.cos(s), 20.0 * v, s * np.sin(s)])
    return x, np.column_stack([u, v])


def swiss_roll_intrinsic(uv):
    """Isometric chart of the roll: (arc length along the spiral, height)."""
    s = 3.0 * np.pi * (uv[:, 0] + 0.5)
    arc = 0.5 * (s * np.sqrt(s * s + 1.0) + np.arcsinh(s))
    return np.column_stack([arc, 20.0 * uv[:, 1]])


def exp_quantile(p, lam):
    """p-quantile of Exp(lam): -ln(1 - p) / lam."""
    return -np.log1p(-p) / lam


def squash_covariance(a, eig_scale, eps):
    """B sigma_s(L) B^T + eps I from the eigendecomposition of A A^T."""
    vals, vecs = np.linalg.eigh(a @ a.T)
    squashed = eig_scale / (1.0 + np.exp(-vals))
    cov = (vecs * squashed) @ vecs.T + eps * np.eye(a.shape[0])
    return 0.5 * (cov + cov.T)


def gen_persistence(n=500, C=5, lambda_exp=1.0, p_exp=0.99, eig_scale=0.1, eps=1e-5,
                    seed=0, n_features=10, return_params=False):
    """Gaussian mixture whose class sizes decay exponentially.

    Soft labels c ~ Exp(lambda) become integer labels
    clip(floor(c * C / q), 0, C - 1) with q the p-quantile, so about a
    fraction p of the mass covers the C classes. Means are uniform in the
    unit cube; covariances have sigmoid-squashed spectra.
    """
    if C < 2 or not 0 < p_exp < 1:
        raise DataError("need C >= 2 and 0 < p_exp < 1")
    rng = np.random.default_rng(seed)
    soft = rng.exponential(1.0 / lambda_exp, size=n)
    q = exp_quantile(p_exp, lambda_exp)
    labels = np.clip(np.floor(soft * C / q), 0, C - 1).astype(np.int64)
    means = rng.uniform(0.0, 1.0, size=(C, n_features))
    covs = np.stack([
        squash_covariance(rng.uniform(0.0, 1.0, size=(n_features, n_features)), eig_scale, eps)
        for _ in range(C)
    ])
    x = np.empty((n, n_features))
    for c in range(C):
        idx = np.flatnonzero(labels == c)
        if len(idx):
            x[idx] = rng.multivariate_normal(means[c], covs[c], size=len(idx), method="eigh")
    if return_params:
        return x, labels, means, covs
    return x, labels


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if row and any(cell.strip() for cell in row):
                yield lineno, [cell.strip() for cell in row]


def load_points_csv(path):
    """Numeric CSV to an N x n matrix; a non-numeric first line is a header."""
    rows = []
    width = None
    for lineno, row in _read_rows(path):
        if not rows and width is None and not all(_is_number(c) for c in row):
            width = len(row)
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataError(f"expected {width} columns, found {len(row)}", line=lineno)
        try:
            values = [float(c) for c in row]
        except ValueError:
            bad = next(c for c in row if not _is_number(c))
            raise DataError(f"non-numeric cell {bad!r}", line=lineno) from None
        if not all(np.isfinite(values)):
            raise DataError("non-finite value", line=lineno)
        rows.append(values)
    if not rows:
        raise DataError(f"no data rows in {path}")
    return np.array(rows, dtype=np.float64)


def load_labels_csv(path, return_names=False):
    """One label per line (first column). Integer labels are kept;
    anything else is interned to 0..K-1 in sorted order."""
    cells = [(lineno, row[0]) for lineno, row in _read_rows(path)]
    if not cells:
        raise DataError(f"no labels in {path}")
    ints = [c for _, c in cells if _is_int(c)]
    if len(ints) == len(cells) - 1 and not _is_int(cells[0][1]):
        cells = cells[1:]
    raw = [c for _, c in cells]
    if all(_is_int(c) for c in raw):
        labels = np.array([int(c) for c in raw], dtype=np.int64)
        names = None
    else:
        names, labels = np.unique(np.array(raw), return_inverse=True)
        labels = labels.astype(np.int64)
    return (labels, names) if return_names else labels


def _is_int(cell):
    try:
        int(cell)
    except ValueError:
        return False
    return True


def write_points_csv(path, x, header=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        for row in np.asarray(x):
            writer.writerow([f"{v:.17g}" for v in row])


def write_labels_csv(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for v in labels:
            fh.write(f"{v}\n")


def load_iris():
    """Iris (150 x 4, 3 classes) from the copy bundled with scikit-learn."""
    from sklearn.datasets import load_iris as _load

    bunch = _load()
    return np.asarray(bunch.data, dtype=np.float64), np.asarray(bunch.target, dtype=np.int64)
