import numpy as np
import pytest

from finslerlearn import dissim
from finslerlearn.pipeline import MethodError, RunResult, build_method, omega_sweep


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(0)
    centres = np.array([[0, 0, 0], [6, 0, 0], [0, 6, 0]], dtype=float)
    x = np.concatenate([rng.normal(c, 0.5, size=(20, 3)) for c in centres])
    return x, np.repeat(np.arange(3), 20)


class TestBuild:
    def test_finsler_umap(self):
        pipe = build_method("finsler-umap", 2, 0.01)
        assert pipe.space.dim == 3
        np.testing.assert_array_equal(pipe.space.omega, [0, 0, 0.01])
        assert pipe.hyperparams["geodesic"] == "none"

    def test_tsne(self):
        pipe = build_method("tsne", 2)
        assert pipe.space.dim == 2 and pipe.space.is_euclidean
        assert pipe.hyperparams["perplexity"] == 30.0

    def test_isomap(self):
        pipe = build_method("isomap", 2)
        assert pipe.hyperparams["geodesic"] == "full"
        assert pipe.hyperparams["local_metric"] == "raw"

    def test_preset(self):
        pipe = build_method("extended-finsler-umap", 2, 0.1)
        assert pipe.name == "finsler-umap"
        assert pipe.hyperparams["kplus"] == 50 and pipe.hyperparams["geodesic"] == "truncate"
        assert pipe.hyperparams["k"] == 15

    def test_default_omega_and_same_dim(self):
        assert build_method("finsler-tsne", 2).omega_mag == 0.1
        assert build_method("finsler-tsne", 2, 0.3, {"same_dim": True}).space.dim == 2

    def test_zero_omega_resolves_to_twin(self):
        assert build_method("finsler-tsne", 2, 0.0).name == "tsne"
        assert build_method("finsler-umap", 2, 0.0).name == "umap"
        assert build_method("finsler-mds-gd", 2, 0.0).space.is_euclidean

    @pytest.mark.parametrize("args", [
        ("nope", 2, None), ("tsne", 2, 0.1), ("finsler-umap", 2, 1.0), ("finsler-umap", 2, -0.1),
        ("tsne", 0, None), ("finsler-tsne", 1, 0.1, {"same_dim": True}),
    ])
    def test_errors(self, args):
        with pytest.raises(MethodError):
            build_method(*args)

    @pytest.mark.parametrize("name, hp", [
        ("umap", {"geodesic": "full"}), ("umap", {"geodesic": "truncate"}),
        ("isomap", {"kplus": 20}), ("umap", {"plain_gd": True}),
        ("tsne", {"symmetric_updates": True}), ("tsne", {"bogus": 1}),
    ])
    def test_incompatible(self, name, hp):
        with pytest.raises(MethodError):
            build_method(name, 2, None, hp)


class TestRun:
    @pytest.mark.parametrize("finsler, twin, hp", [
        ("finsler-tsne", "tsne", {"epochs": 60, "perplexity": 5.0}),
        ("finsler-umap", "umap", {"epochs": 40}),
    ])
    def test_zero_omega_twin(self, blobs, finsler, twin, hp):
        x, _ = blobs
        a = build_method(finsler, 2, 0.0, hp).run(x, seed=3)
        b = build_method(twin, 2, None, hp).run(x, seed=3)
        assert np.array_equal(a.embedding.coords, b.embedding.coords)

    @pytest.mark.parametrize("name, hp", [
        ("finsler-tsne", {"epochs": 60, "perplexity": 5.0}),
        ("finsler-umap", {"epochs": 40}),
        ("finsler-mds-gd", {"epochs": 20, "k": 8}),
        ("finsler-smacof", {"smacof_steps": 5, "k": 8}),
        ("isomap", {"k": 8}),
    ])
    def test_shapes_and_determinism(self, blobs, name, hp):
        x, _ = blobs
        pipe = build_method(name, 2, None, hp)
        a, b = pipe.run(x, seed=1), pipe.run(x, seed=1)
        assert a.embedding.coords.shape == (60, pipe.space.dim)
        assert np.all(np.isfinite(a.embedding.coords))
        assert np.array_equal(a.embedding.coords, b.embedding.coords)

    def test_finsler_tsne_skips_symmetrise(self, blobs, monkeypatch):
        def boom(*_, **__):
            raise AssertionError("symmetrise called")

        monkeypatch.setattr(dissim, "symmetrise", boom)
        build_method("finsler-tsne", 2, 0.3, {"epochs": 5, "perplexity": 5.0}).run(blobs[0])
        with pytest.raises(AssertionError):
            build_method("tsne", 2, None, {"epochs": 5, "perplexity": 5.0}).run(blobs[0])

    def test_finsler_umap_optimises_asymmetric_p(self, blobs, monkeypatch):
        import finslerlearn.pipeline as pl

        seen = {}
        real = pl.run_umap

        def spy(p, config, init, space=None):
            seen["asym"] = dissim.asymmetry_measure(p)
            return real(p, config, init, space)

        monkeypatch.setattr(pl, "run_umap", spy)
        build_method("finsler-umap", 2, 0.3, {"epochs": 5}).run(blobs[0])
        assert seen["asym"] > 0
        build_method("umap", 2, None, {"epochs": 5}).run(blobs[0])
        assert seen["asym"] == 0

    def test_k_too_large(self):
        with pytest.raises(MethodError):
            build_method("umap", 2, None, {"k": 10}).run(np.random.default_rng(0).normal(size=(8, 2)))


class TestSweep:
    @staticmethod
    def mock(table):
        def score(result, labels, seed):
            return {"ami": table[result.meta["mag"]] + 0.01 * seed, "ari": 0.0}
        return score

    @pytest.fixture
    def stub_run(self, monkeypatch):
        import finslerlearn.pipeline as pl

        def fake_run(self, data, seed=0):
            return RunResult(None, None, {"mag": self.omega_mag})

        monkeypatch.setattr(pl.Pipeline, "run", fake_run)

    def test_argmax(self, stub_run):
        report = omega_sweep("finsler-umap", None, None, magnitudes=(0.01, 0.5), seeds=(0, 1),
                             score_fn=self.mock({0.01: 0.2, 0.5: 0.7}))
        assert report.best_magnitude == 0.5
        assert report.rows[1]["mean"]["ami"] == pytest.approx(0.705)
        report = omega_sweep("finsler-umap", None, None, magnitudes=(0.01, 0.5),
                             score_fn=self.mock({0.01: 0.9, 0.5: 0.7}))
        assert report.best_magnitude == 0.01

    def test_tie_takes_first(self, stub_run):
        report = omega_sweep("finsler-umap", None, None, magnitudes=(0.1, 0.5),
                             score_fn=self.mock({0.1: 0.4, 0.5: 0.4}))
        assert report.best_magnitude == 0.1

    def test_single_magnitude(self, stub_run):
        report = omega_sweep("finsler-umap", None, None, magnitudes=(0.1,),
                             score_fn=self.mock({0.1: 0.3}))
        assert len(report.rows) == 1 and report.best_magnitude == 0.1
        assert report.as_dict()["method"] == "finsler-umap"

    def test_real_sweep_deterministic(self, blobs):
        x, y = blobs
        hp = {"epochs": 20}
        a = omega_sweep("finsler-umap", x, y, magnitudes=(0.01, 0.5), hyperparams=hp)
        b = omega_sweep("finsler-umap", x, y, magnitudes=(0.01, 0.5), hyperparams=hp)
        assert a.as_dict() == b.as_dict()
        assert a.best_magnitude in (0.01, 0.5)
