"""Named embedding methods assembled from the graph, scale, p, init and optimiser stages.

Euclidean methods embed in R^m. Finsler methods embed in the Randers space
R^(m+1) with omega = omega_mag * e_(m+1), starting from an m-dimensional
Euclidean initialisation lifted by one axis. A Finsler method with
omega_mag = 0 runs its Euclidean twin in R^m.
"""
from dataclasses import dataclass, field

import numpy as np

from . import dissim, graph as graphs
from .dissim import SymRule
from .errors import FinslerError
from .evaluation import LABEL_SCORES, evaluate_embedding
from .geometry import RandersSpace
from .init import Embedding, finsler_lift, isomap_embed, pca_init, spectral_init
from .mds import MdsGdConfig, StressProblem, run_finsler_mds_gd, run_smacof
from .tsne import TsneConfig, run_tsne
from .umap import UmapConfig, run_umap

EUCLIDEAN_METHODS = ("tsne", "umap", "isomap")
FINSLER_METHODS = ("finsler-tsne", "finsler-umap", "finsler-mds-gd", "finsler-smacof")
METHODS = EUCLIDEAN_METHODS + FINSLER_METHODS
PRESETS = {"extended-finsler-umap": ("finsler-umap", {"kplus": 50})}
TWINS = {"finsler-tsne": "tsne", "finsler-umap": "umap"}
DEFAULT_OMEGA = 0.1
TSNE_INIT_STD = 1e-4

DEFAULTS = {
    "k": None,
    "perplexity": 30.0,
    "min_dist": 0.1,
    "spread": 1.0,
    "epochs": None,
    "learning_rate": None,
    "neg_samples": 5,
    "kplus": None,
    "geodesic": None,
    "local_metric": None,
    "knn_method": "auto",
    "plain_gd": False,
    "symmetric_updates": False,
    "smacof_steps": 100,
    "same_dim": False,
    "threads": 1,
}


class MethodError(FinslerError, ValueError):
    """Unknown method or incompatible method settings."""


@dataclass
class RunResult:
    embedding: Embedding
    trace: np.ndarray | None
    meta: dict = field(default_factory=dict)


def _resolved(name, hp):
    base = name.replace("finsler-", "")
    out = dict(hp)
    if out["k"] is None:
        out["k"] = 15
    if out["epochs"] is None:
        out["epochs"] = {"tsne": 1000, "umap": 200}.get(base, 100)
    if out["learning_rate"] is None:
        out["learning_rate"] = {"tsne": 200.0, "umap": 1.0}.get(base, 0.1)
    if out["geodesic"] is None:
        if base in ("isomap", "mds-gd", "smacof"):
            out["geodesic"] = "full"
        else:
            out["geodesic"] = "truncate" if out["kplus"] else "none"
    if out["local_metric"] is None:
        out["local_metric"] = "raw" if name == "isomap" else "scaled"
    return out


def _check(name, hp):
    base = name.replace("finsler-", "")
    if base in ("tsne", "umap"):
        if hp["geodesic"] == "full":
            raise MethodError(f"{name} supports geodesic truncation only (set kplus)")
        if hp["geodesic"] == "truncate" and not hp["kplus"]:
            raise MethodError("geodesic truncation needs kplus")
        if hp["geodesic"] == "none" and hp["kplus"]:
            raise MethodError("kplus requires geodesic truncation")
    else:
        if hp["kplus"]:
            raise MethodError(f"{name} uses full geodesic extension; kplus does not apply")
        if hp["geodesic"] != "full":
            raise MethodError(f"{name} needs full geodesic extension")
        if hp["local_metric"] not in ("raw", "scaled"):
            raise MethodError("local_metric must be 'raw' or 'scaled'")
    if hp["plain_gd"] and base != "tsne":
        raise MethodError("plain_gd only applies to t-SNE methods")
    if hp["symmetric_updates"] and base != "umap":
        raise MethodError("symmetric_updates only applies to UMAP methods")


@dataclass(frozen=True, eq=False)
class Pipeline:
    """A resolved method: name, base dimension m, target space and settings."""

    name: str
    dim: int
    omega_mag: float
    space: RandersSpace
    hyperparams: dict

    @property
    def finsler(self):
        return not self.space.is_euclidean

    def describe(self):
        return {
            "method": self.name, "dim": self.dim, "omega": self.omega_mag,
            "target_dim": self.space.dim, "omega_vector": self.space.omega.tolist(),
            **{k: v for k, v in sorted(self.hyperparams.items())},
        }

    def run(self, data, seed=0):
        x = graphs.as_data_matrix(data)
        hp = self.hyperparams
        if hp["threads"] and hp["threads"] > 1:
            import numba

            numba.set_num_threads(min(int(hp["threads"]), numba.config.NUMBA_NUM_THREADS))
        base = self.name.replace("finsler-", "")
        if base == "tsne":
            return self._run_tsne(x, seed)
        if base == "umap":
            return self._run_umap(x, seed)
        return self._run_stress(x, seed)

    def _graph(self, x, k, seed):
        hp = self.hyperparams
        if k >= len(x):
            raise MethodError(f"k={k} must be below N={len(x)}")
        g = graphs.knn_graph(x, k, method=hp["knn_method"], seed=seed)
        g = graphs.connect_components(g, x)
        meta = {"n_added_edges": int(g.added.sum())}
        if hp["geodesic"] == "truncate":
            g = graphs.geodesic_extend(g, "truncate", k_plus=int(hp["kplus"]))
        return g, meta

    def _base_init(self, emb):
        if not self.finsler:
            return emb
        return finsler_lift(emb, self.space)

    def _init_dim(self):
        return self.space.dim - 1 if self.finsler else self.space.dim

    def _run_tsne(self, x, seed):
        hp = self.hyperparams
        k = min(len(x) - 1, int(3 * hp["perplexity"]) + 1)
        g, meta = self._graph(x, k, seed)
        scales = dissim.perplexity_scales(g, hp["perplexity"])
        p_row = dissim.tsne_p(g, scales)
        if self.finsler:
            p = p_row.scaled(1.0 / len(x), dissim.Normalization.GLOBAL_SUM_1)
        else:
            p = dissim.symmetrise(p_row, SymRule.TSNE_MEAN)
        init = pca_init(x, self._init_dim())
        col0 = init.coords[:, 0].std()
        coords = init.coords / col0 * TSNE_INIT_STD if col0 > 0 else init.coords
        init = self._base_init(Embedding.euclidean(coords))
        config = TsneConfig(perplexity=hp["perplexity"], epochs=hp["epochs"],
                            learning_rate=hp["learning_rate"], plain_gd=hp["plain_gd"], seed=seed)
        emb, trace = run_tsne(p, config, init, self.space)
        meta.update(graph_k=k, degenerate_rows=int(scales.degenerate.sum()),
                    asymmetry=dissim.asymmetry_measure(p))
        return RunResult(emb, trace, meta)

    def _run_umap(self, x, seed):
        hp = self.hyperparams
        g, meta = self._graph(x, hp["k"], seed)
        k_eff = int(hp["kplus"]) if hp["geodesic"] == "truncate" else hp["k"]
        scales = dissim.umap_scales(g, k_eff)
        p_asym = dissim.umap_p(g, scales)
        p_sym = dissim.symmetrise(p_asym, SymRule.UMAP_FUZZY_UNION)
        init = self._base_init(spectral_init(p_sym, self._init_dim()))
        p = p_asym if self.finsler else p_sym
        config = UmapConfig(k=hp["k"], min_dist=hp["min_dist"], spread=hp["spread"],
                            epochs=hp["epochs"], neg_samples=hp["neg_samples"],
                            learning_rate=hp["learning_rate"], seed=seed,
                            symmetric_updates=hp["symmetric_updates"],
                            parallel=bool(hp["threads"] and hp["threads"] > 1))
        emb = run_umap(p, config, init, self.space)
        meta.update(degenerate_rows=int(scales.degenerate.sum()),
                    asymmetry=dissim.asymmetry_measure(p))
        return RunResult(emb, None, meta)

    def target_dissimilarities(self, x, seed=0):
        """Dense geodesic targets D (asymmetric when locally rescaled)."""
        hp = self.hyperparams
        g, meta = self._graph(x, hp["k"], seed)
        full = graphs.add_reverse_edges(g)
        if hp["local_metric"] == "scaled":
            scales = dissim.umap_scales(g, hp["k"])
            full = dissim.scale_by_source(full, scales)
            meta["sigma"] = scales.sigma
        d = graphs.geodesic_extend(full, "full")
        return d, meta

    def _run_stress(self, x, seed):
        hp = self.hyperparams
        d, meta = self.target_dissimilarities(x, seed)
        d_sym = 0.5 * (d + d.T)
        base = isomap_embed(d_sym, self._init_dim())
        if self.name == "isomap":
            return RunResult(base, None, meta)
        init = self._base_init(base)
        problem = StressProblem.unit_weights(d, self.space)
        if self.name == "finsler-mds-gd":
            config = MdsGdConfig(learning_rate=hp["learning_rate"], epochs=hp["epochs"], seed=seed)
            emb, trace = run_finsler_mds_gd(problem, init, config)
        else:
            emb, trace = run_smacof(problem, init, steps=hp["smacof_steps"], finsler=True)
        meta["D"] = d
        return RunResult(emb, trace, meta)


def build_method(name, dim=2, omega_mag=None, hyperparams=None):
    """Resolve a method name, base dimension and drift magnitude into a Pipeline.

    ``hyperparams["same_dim"]`` keeps Finsler methods in R^m (ablation).
    A Finsler method with ``omega_mag == 0`` resolves to its Euclidean twin.
    """
    hp = dict(DEFAULTS)
    if name in PRESETS:
        name, preset = PRESETS[name]
        hp.update(preset)
    unknown = set(hyperparams or {}) - set(DEFAULTS)
    if unknown:
        raise MethodError(f"unknown hyperparameters: {sorted(unknown)}")
    hp.update({k: v for k, v in (hyperparams or {}).items() if v is not None})
    if name not in METHODS:
        raise MethodError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    if dim < 1:
        raise MethodError("dim must be positive")
    if name in EUCLIDEAN_METHODS:
        if omega_mag:
            raise MethodError(f"{name} is Euclidean; omega must be 0")
        omega_mag = 0.0
    elif omega_mag is None:
        omega_mag = DEFAULT_OMEGA
    if not 0.0 <= omega_mag < 1.0:
        raise MethodError("omega magnitude must lie in [0, 1)")
    if name in FINSLER_METHODS and omega_mag == 0.0:
        name = TWINS.get(name, name)
    hp = _resolved(name, hp)
    _check(name, hp)
    if name in FINSLER_METHODS and omega_mag > 0:
        target = dim if hp["same_dim"] else dim + 1
        if target < 2:
            raise MethodError("Finsler embeddings need at least two dimensions")
        space = RandersSpace.along_last_axis(target, omega_mag)
    else:
        space = RandersSpace.euclidean(dim)
    return Pipeline(name, dim, float(omega_mag), space, hp)


@dataclass
class SweepReport:
    method: str
    rows: list
    best_magnitude: float

    def as_dict(self):
        return {"method": self.method, "rows": self.rows, "best_magnitude": self.best_magnitude}


def default_scorer(result, labels, seed):
    return evaluate_embedding(result.embedding.coords, labels, names=LABEL_SCORES,
                              kmeans_seeds=(seed,)).scores


def omega_sweep(method, data, labels, magnitudes=(0.001, 0.01, 0.1, 0.5), seeds=(0,),
                dim=2, hyperparams=None, score_fn=None):
    """Run every magnitude x seed and pick the magnitude with highest mean AMI."""
    score_fn = score_fn or default_scorer
    rows = []
    for mag in magnitudes:
        pipe = build_method(method, dim, mag, hyperparams)
        per_seed = [score_fn(pipe.run(data, seed=s), labels, s) for s in seeds]
        names = sorted(per_seed[0])
        mean = {n: float(np.mean([r[n] for r in per_seed])) for n in names}
        rows.append({"magnitude": float(mag), "mean": mean, "per_seed": per_seed})
    best = max(range(len(rows)), key=lambda r: (rows[r]["mean"]["ami"], -r))
    return SweepReport(method, rows, rows[best]["magnitude"])
