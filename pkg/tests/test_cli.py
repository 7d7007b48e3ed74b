import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from finslerlearn.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from finslerlearn.datasets import load_iris, load_labels_csv, load_points_csv, write_points_csv
from finslerlearn.exports import read_embedding_tsv, read_manifest, read_trace_tsv


@pytest.fixture
def blob_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(c, 0.4, size=(15, 3)) for c in ([0, 0, 0], [5, 0, 0])])
    path = tmp_path / "pts.csv"
    write_points_csv(path, x)
    (tmp_path / "labels.csv").write_text("\n".join(["0"] * 15 + ["1"] * 15) + "\n")
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestGenerate:
    def test_disk(self, tmp_path):
        assert run("generate", "disk", "--n", 300, "-o", tmp_path / "d.csv") == EXIT_OK
        assert load_points_csv(tmp_path / "d.csv").shape == (300, 2)

    def test_swissroll(self, tmp_path):
        assert run("generate", "swissroll", "--n", 2000, "-o", tmp_path / "s.csv") == EXIT_OK
        assert load_points_csv(tmp_path / "s.csv").shape == (1887, 3)
        assert load_points_csv(tmp_path / "s_uv.csv").shape == (1887, 2)

    def test_persistence(self, tmp_path):
        out = tmp_path / "p.csv"
        assert run("generate", "persistence", "--n", 500, "--classes", 5, "--seed", 7,
                   "-o", out) == EXIT_OK
        assert load_points_csv(out).shape == (500, 10)
        assert set(load_labels_csv(tmp_path / "p_labels.csv")) <= set(range(5))

    @pytest.mark.parametrize("argv", [
        ("disk", "--n", 310), ("swissroll", "--n", 10), ("persistence", "--classes", 1),
        ("persistence", "--p-exp", 1.5), ("cube",),
    ])
    def test_bad_params(self, tmp_path, argv):
        assert run("generate", *argv, "-o", tmp_path / "x.csv") == EXIT_USAGE


class TestEmbed:
    def test_tsv_and_manifest(self, tmp_path, blob_csv):
        out = tmp_path / "e.tsv"
        code = run("embed", blob_csv, "--method", "finsler-tsne", "--omega", 0.3,
                   "--perplexity", 5, "--epochs", 50, "-o", out)
        assert code == EXIT_OK
        header = out.read_text().splitlines()[0]
        assert header == "id\tcoord_1\tcoord_2\tcoord_3"
        assert read_embedding_tsv(out).shape == (30, 3)
        manifest = read_manifest(tmp_path / "e.json")
        assert manifest["settings"]["hyperparams"] == {"perplexity": 5.0, "epochs": 50}
        assert manifest["resolved"]["target_dim"] == 3
        assert len(manifest["points_hash"]) == 40
        assert len(read_trace_tsv(manifest["trace"])) == 50

    def test_rerun_from_manifest(self, tmp_path, blob_csv):
        out = tmp_path / "e.tsv"
        run("embed", blob_csv, "--method", "finsler-umap", "--epochs", 30, "--k", 5, "-o", out)
        first = out.read_bytes()
        out.unlink()
        assert run("embed", "--from-manifest", tmp_path / "e.json") == EXIT_OK
        assert out.read_bytes() == first

    def test_manifest_detects_changed_points(self, tmp_path, blob_csv):
        out = tmp_path / "e.tsv"
        run("embed", blob_csv, "--method", "isomap", "--k", 5, "-o", out)
        blob_csv.write_text(blob_csv.read_text() + "1,2,3\n")
        assert run("embed", "--from-manifest", tmp_path / "e.json") == EXIT_DATA

    def test_zero_omega_twin(self, tmp_path, blob_csv):
        common = ("--perplexity", 5, "--epochs", 40, "--seed", 2)
        run("embed", blob_csv, "--method", "finsler-tsne", "--omega", 0, *common, "-o", tmp_path / "a.tsv")
        run("embed", blob_csv, "--method", "tsne", *common, "-o", tmp_path / "b.tsv")
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()

    def test_iris_finsler_umap(self, tmp_path):
        x, _ = load_iris()
        write_points_csv(tmp_path / "iris.csv", x)
        assert run("embed", tmp_path / "iris.csv", "--method", "finsler-umap", "--epochs", 20,
                   "-o", tmp_path / "i.tsv") == EXIT_OK
        assert read_embedding_tsv(tmp_path / "i.tsv").shape == (150, 3)

    def test_threads_env(self, tmp_path, blob_csv, monkeypatch):
        monkeypatch.setenv("FINSLER_THREADS", "x")
        assert run("embed", blob_csv, "--method", "umap", "-o", tmp_path / "e.tsv") == EXIT_USAGE

    @pytest.mark.parametrize("extra", [
        ("--method", "tsne", "--omega", 0.2), ("--method", "umap", "--geodesic", "full"),
        ("--method", "isomap", "--kplus", 20), ("--method", "nope"), (),
    ])
    def test_usage_errors(self, tmp_path, blob_csv, extra):
        assert run("embed", blob_csv, *extra, "-o", tmp_path / "e.tsv") == EXIT_USAGE

    def test_data_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3\n")
        assert run("embed", bad, "--method", "umap", "-o", tmp_path / "e.tsv") == EXIT_DATA
        assert run("embed", tmp_path / "missing.csv", "--method", "umap",
                   "-o", tmp_path / "e.tsv") == EXIT_DATA

    def test_numerical_failure(self, tmp_path, blob_csv):
        code = run("embed", blob_csv, "--method", "tsne", "--perplexity", 5,
                   "--learning-rate", 1e300, "--epochs", 50, "-o", tmp_path / "e.tsv")
        assert code == EXIT_NUMERIC


class TestEvalPlot:
    @pytest.fixture
    def embedded(self, tmp_path, blob_csv):
        run("embed", blob_csv, "--method", "umap", "--k", 5, "--epochs", 200, "-o", tmp_path / "e.tsv")
        return tmp_path / "e.tsv"

    def test_eval_identical_labels(self, tmp_path, embedded, capsys):
        labels = tmp_path / "labels.csv"
        code = run("eval", embedded, labels, "--pred", labels, "--scores", "ami,ari,nmi,hom,com,vm,fmi")
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert all(v == pytest.approx(1.0) for v in report["scores"].values())

    def test_eval_kmeans(self, tmp_path, embedded):
        out = tmp_path / "r.json"
        assert run("eval", embedded, tmp_path / "labels.csv", "--kmeans-seeds", "0,1",
                   "-o", out) == EXIT_OK
        assert json.loads(out.read_text())["scores"]["ami"] == pytest.approx(1.0)

    def test_eval_errors(self, tmp_path, embedded):
        assert run("eval", embedded, tmp_path / "nope.csv") == EXIT_DATA
        (tmp_path / "short.csv").write_text("0\n1\n")
        assert run("eval", embedded, tmp_path / "short.csv") == EXIT_DATA
        assert run("eval", embedded, tmp_path / "labels.csv", "--scores", "xyz") == EXIT_USAGE

    def test_plot_2d(self, tmp_path, embedded):
        out = tmp_path / "p.svg"
        assert run("plot", embedded, "--labels", tmp_path / "labels.csv", "-o", out) == EXIT_OK
        root = ET.parse(out).getroot()
        assert root.tag.endswith("svg")

    def test_plot_3d_two_panels(self, tmp_path, blob_csv):
        run("embed", blob_csv, "--method", "finsler-umap", "--k", 5, "--epochs", 10,
            "-o", tmp_path / "f.tsv")
        out = tmp_path / "f.svg"
        assert run("plot", tmp_path / "f.tsv", "--color-by", "z", "-o", out) == EXIT_OK
        text = out.read_text()
        ET.fromstring(text)
        assert "top view" in text and "side view" in text

    def test_plot_deterministic(self, tmp_path, embedded):
        run("plot", embedded, "-o", tmp_path / "a.svg")
        run("plot", embedded, "-o", tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_plot_color_needs_labels(self, tmp_path, embedded):
        assert run("plot", embedded, "--color-by", "labels", "-o", tmp_path / "p.svg") == EXIT_USAGE
