"""Clustering, label-agreement scores, cluster-shape scores and kNN accuracy."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn import metrics
from sklearn.cluster import KMeans
from sklearn.model_selection import RepeatedStratifiedKFold
from sklearn.neighbors import KNeighborsClassifier

from .errors import DataError
from .init import Embedding

LABEL_SCORES = ("ami", "ari", "nmi", "hom", "com", "vm", "fmi")
SHAPE_SCORES = ("sil", "dbi", "chi")
ALL_SCORES = LABEL_SCORES + SHAPE_SCORES + ("knn",)

BOUNDS = {
    "ami": (-1.0, 1.0), "ari": (-1.0, 1.0), "nmi": (0.0, 1.0), "hom": (0.0, 1.0),
    "com": (0.0, 1.0), "vm": (0.0, 1.0), "fmi": (0.0, 1.0), "sil": (-1.0, 1.0),
    "dbi": (0.0, np.inf), "chi": (0.0, np.inf), "knn": (0.0, 1.0),
}


@dataclass
class ScoreReport:
    scores: dict
    method: str = ""
    dataset: str = ""
    seed: int | None = None
    omega_norm: float = 0.0
    dim: int | None = None
    extra: dict = field(default_factory=dict)

    def within_bounds(self, tol=1e-12):
        for name, value in self.scores.items():
            lo, hi = BOUNDS.get(name, (-np.inf, np.inf))
            if not (np.isfinite(value) and lo - tol <= value <= hi + tol):
                return False
        return True

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _coords(c):
    return c.coords if isinstance(c, Embedding) else np.asarray(c, dtype=np.float64)


def _labels_pair(true_labels, pred_labels):
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.shape != p.shape or t.ndim != 1:
        raise DataError(f"label arrays differ in shape: {t.shape} vs {p.shape}")
    return t, p


def kmeans(coords, k, seed=0, n_init=10, return_inertia=False):
    """k-means++ seeded Lloyd iterations, best inertia over ``n_init`` runs."""
    x = _coords(coords)
    if not 1 <= k <= len(x):
        raise DataError(f"k={k} must lie in [1, N={len(x)}]")
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed).fit(x)
    labels = km.labels_.astype(np.int64)
    return (labels, float(km.inertia_)) if return_inertia else labels


def inertia(coords, labels):
    x = _coords(coords)
    total = 0.0
    for c in np.unique(labels):
        pts = x[labels == c]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def score_ami(true_labels, pred_labels):
    """Adjusted mutual information with the max-entropy normaliser."""
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.adjusted_mutual_info_score(t, p, average_method="max"))


def score_ari(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.adjusted_rand_score(t, p))


def score_nmi(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.normalized_mutual_info_score(t, p))


def score_hom(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.homogeneity_score(t, p))


def score_com(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.completeness_score(t, p))


def score_vmeasure(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.v_measure_score(t, p))


def score_fmi(true_labels, pred_labels):
    t, p = _labels_pair(true_labels, pred_labels)
    return float(metrics.fowlkes_mallows_score(t, p))


def _shape_args(coords, pred_labels):
    x = _coords(coords)
    p = np.asarray(pred_labels)
    if len(p) != len(x):
        raise DataError("coords and labels differ in length")
    if len(np.unique(p)) < 2:
        raise DataError("cluster-shape scores need at least two clusters")
    return x, p


def score_silhouette(coords, pred_labels):
    return float(metrics.silhouette_score(*_shape_args(coords, pred_labels)))


def score_dbi(coords, pred_labels):
    return float(metrics.davies_bouldin_score(*_shape_args(coords, pred_labels)))


def score_chi(coords, pred_labels):
    return float(metrics.calinski_harabasz_score(*_shape_args(coords, pred_labels)))


def knn_cv_accuracy(coords, labels, k_nn=5, folds=5, repeats=2, seed=0):
    """Mean accuracy of a k-NN classifier over repeated stratified folds."""
    x = _coords(coords)
    y = np.asarray(labels)
    if len(y) != len(x):
        raise DataError("coords and labels differ in length")
    counts = np.unique(y, return_counts=True)[1]
    if counts.min() < folds:
        raise DataError(f"smallest class has {counts.min()} members, fewer than {folds} folds")
    splitter = RepeatedStratifiedKFold(n_splits=folds, n_repeats=repeats, random_state=seed)
    accs = []
    for train, test in splitter.split(x, y):
        clf = KNeighborsClassifier(n_neighbors=k_nn).fit(x[train], y[train])
        accs.append(float(np.mean(clf.predict(x[test]) == y[test])))
    return float(np.mean(accs))


_LABEL_FNS = {
    "ami": score_ami, "ari": score_ari, "nmi": score_nmi, "hom": score_hom,
    "com": score_com, "vm": score_vmeasure, "fmi": score_fmi,
}
_SHAPE_FNS = {"sil": score_silhouette, "dbi": score_dbi, "chi": score_chi}


def score_partition(coords, true_labels, pred_labels, names=ALL_SCORES, knn_seed=0):
    """Requested scores for one predicted partition."""
    out = {}
    for name in names:
        if name in _LABEL_FNS:
            out[name] = _LABEL_FNS[name](true_labels, pred_labels)
        elif name in _SHAPE_FNS:
            out[name] = _SHAPE_FNS[name](coords, pred_labels)
        elif name == "knn":
            out[name] = knn_cv_accuracy(coords, true_labels, seed=knn_seed)
        else:
            raise DataError(f"unknown score {name!r}")
    return out


def evaluate_embedding(coords, true_labels, names=ALL_SCORES, kmeans_seeds=(0,), **meta):
    """k-means with as many clusters as labels, scores averaged over seeds."""
    true_labels = np.asarray(true_labels)
    k = len(np.unique(true_labels))
    runs = [score_partition(coords, true_labels, kmeans(coords, k, seed=s), names)
            for s in kmeans_seeds]
    scores = {name: float(np.mean([r[name] for r in runs])) for name in names}
    return ScoreReport(scores=scores, **meta)
