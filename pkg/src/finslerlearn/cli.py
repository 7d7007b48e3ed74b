"""Command-line interface: generate, embed, eval, plot.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, exports
from .errors import ConvergenceError, DataError, FinslerError, GraphError, NumericalError
from .evaluation import ALL_SCORES, ScoreReport, evaluate_embedding, score_partition
from .pipeline import METHODS, PRESETS, MethodError, build_method

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _sibling(path, suffix):
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def cmd_generate(args):
    out = args.out
    if args.kind == "disk":
        if args.n % 20:
            raise UsageError("disk needs --n divisible by 20")
        datasets.write_points_csv(out, datasets.gen_disk(args.n), header=["x", "y"])
        return [out]
    if args.kind == "swissroll":
        if args.n < 25:
            raise UsageError("swissroll needs --n >= 25")
        x, uv = datasets.gen_swiss_roll(args.n)
        datasets.write_points_csv(out, x, header=["x", "y", "z"])
        uv_path = args.uv_out or _sibling(out, "_uv.csv")
        datasets.write_points_csv(uv_path, uv, header=["u", "v"])
        return [out, uv_path]
    if args.classes < 2 or not 0 < args.p_exp < 1 or args.n < 1:
        raise UsageError("persistence needs --classes >= 2, 0 < --p-exp < 1, --n >= 1")
    x, labels = datasets.gen_persistence(
        n=args.n, C=args.classes, lambda_exp=args.lambda_exp, p_exp=args.p_exp,
        eig_scale=args.eig_scale, eps=args.eps, seed=args.seed, n_features=args.features,
    )
    datasets.write_points_csv(out, x)
    labels_path = args.labels_out or _sibling(out, "_labels.csv")
    datasets.write_labels_csv(labels_path, labels)
    return [out, labels_path]


_HP_FLAGS = ("k", "perplexity", "min_dist", "epochs", "kplus", "geodesic", "learning_rate",
             "neg_samples", "plain_gd", "symmetric_updates", "local_metric", "same_dim",
             "smacof_steps")


def _threads(args):
    env = os.environ.get("FINSLER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError("FINSLER_THREADS must be an integer") from None
    return args.threads


def _embed_settings(args):
    if args.from_manifest:
        manifest = exports.read_manifest(args.from_manifest)
        settings = dict(manifest["settings"])
        points = manifest["points"]
        if exports.git_blob_hash(points) != manifest["points_hash"]:
            raise DataError(f"{points} changed since the manifest was written")
        out = args.out or manifest["output"]
        return points, settings, out
    if not args.points or not args.method:
        raise UsageError("embed needs POINTS and --method (or --from-manifest)")
    if not args.out:
        raise UsageError("embed needs --out")
    hp = {name: getattr(args, name) for name in _HP_FLAGS}
    hp = {k: v for k, v in hp.items() if v not in (None, False)}
    settings = {"method": args.method, "dim": args.dim, "omega": args.omega,
                "seed": args.seed, "hyperparams": hp}
    return args.points, settings, args.out


def cmd_embed(args):
    points, settings, out = _embed_settings(args)
    hp = dict(settings["hyperparams"])
    hp["threads"] = _threads(args)
    try:
        pipe = build_method(settings["method"], settings["dim"], settings["omega"], hp)
    except MethodError as exc:
        raise UsageError(str(exc)) from None
    x = datasets.load_points_csv(points)
    result = pipe.run(x, seed=settings["seed"])
    exports.write_embedding_tsv(out, result.embedding.coords)
    trace_path = None
    if result.trace is not None:
        trace_path = _sibling(out, ".trace.tsv")
        exports.write_trace_tsv(trace_path, result.trace)
    manifest = {
        "version": exports.MANIFEST_VERSION,
        "command": "embed",
        "points": str(Path(points).resolve()),
        "points_hash": exports.git_blob_hash(points),
        "settings": settings,
        "resolved": pipe.describe(),
        "output": str(Path(out).resolve()),
        "trace": str(Path(trace_path).resolve()) if trace_path else None,
        "summary": {k: v for k, v in result.meta.items() if np.isscalar(v)},
    }
    manifest_path = args.manifest or _sibling(out, ".json")
    if not args.from_manifest or args.manifest:
        exports.write_manifest(manifest_path, manifest)
    return [out] + ([trace_path] if trace_path else [])


def _parse_list(text, cast, name):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {name} list: {text!r}") from None


def cmd_eval(args):
    coords = exports.read_embedding_tsv(args.embedding)
    if not Path(args.labels).exists():
        raise DataError(f"labels file {args.labels} not found")
    labels = datasets.load_labels_csv(args.labels)
    if len(labels) != len(coords):
        raise DataError(f"{len(labels)} labels for {len(coords)} points")
    names = _parse_list(args.scores, str, "score") if args.scores else list(ALL_SCORES)
    unknown = set(names) - set(ALL_SCORES)
    if unknown:
        raise UsageError(f"unknown scores {sorted(unknown)}; choose from {', '.join(ALL_SCORES)}")
    seeds = _parse_list(args.kmeans_seeds, int, "seed")
    meta = {"method": args.method or "", "dataset": args.dataset or "",
            "seed": seeds[0] if seeds else None, "dim": int(coords.shape[1])}
    if args.pred:
        pred = datasets.load_labels_csv(args.pred)
        if len(pred) != len(labels):
            raise DataError("prediction and truth differ in length")
        report = ScoreReport(scores=score_partition(coords, labels, pred, names), **meta)
    else:
        report = evaluate_embedding(coords, labels, names=names, kmeans_seeds=seeds, **meta)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return [args.out] if args.out else []


def cmd_plot(args):
    from .plotting import plot_embedding

    coords = exports.read_embedding_tsv(args.embedding)
    labels = None
    if args.labels:
        labels = datasets.load_labels_csv(args.labels)
        if len(labels) != len(coords):
            raise DataError(f"{len(labels)} labels for {len(coords)} points")
    color_by = args.color_by or ("labels" if labels is not None else "none")
    if color_by == "labels" and labels is None:
        raise UsageError("--color-by labels needs --labels")
    plot_embedding(coords, args.out, labels=labels, color_by=color_by, omega_axis=args.omega_axis)
    return [args.out]


def build_parser():
    parser = argparse.ArgumentParser(prog="finslerlearn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    gen.add_argument("kind", choices=["disk", "swissroll", "persistence"])
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--classes", type=int, default=5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--lambda-exp", type=float, default=1.0)
    gen.add_argument("--p-exp", type=float, default=0.99)
    gen.add_argument("--eig-scale", type=float, default=0.1)
    gen.add_argument("--eps", type=float, default=1e-5)
    gen.add_argument("--features", type=int, default=10)
    gen.add_argument("--out", "-o", required=True)
    gen.add_argument("--labels-out")
    gen.add_argument("--uv-out")
    gen.set_defaults(func=cmd_generate)

    emb = sub.add_parser("embed", help="run an embedding method on a points CSV")
    emb.add_argument("points", nargs="?")
    emb.add_argument("--method", choices=list(METHODS) + list(PRESETS))
    emb.add_argument("--dim", type=int, default=2)
    emb.add_argument("--omega", type=float, default=None)
    emb.add_argument("--k", type=int)
    emb.add_argument("--perplexity", type=float)
    emb.add_argument("--min-dist", type=float)
    emb.add_argument("--epochs", type=int)
    emb.add_argument("--learning-rate", type=float)
    emb.add_argument("--neg-samples", type=int)
    emb.add_argument("--seed", type=int, default=0)
    emb.add_argument("--kplus", type=int)
    emb.add_argument("--geodesic", choices=["none", "truncate", "full"])
    emb.add_argument("--local-metric", choices=["raw", "scaled"])
    emb.add_argument("--smacof-steps", type=int)
    emb.add_argument("--plain-gd", action="store_true")
    emb.add_argument("--symmetric-updates", action="store_true")
    emb.add_argument("--same-dim", action="store_true",
                     help="keep Finsler methods in R^dim instead of R^(dim+1)")
    emb.add_argument("--threads", type=int, default=1)
    emb.add_argument("--from-manifest")
    emb.add_argument("--manifest", help="manifest path (default: <out stem>.json)")
    emb.add_argument("--out", "-o")
    emb.set_defaults(func=cmd_embed)

    ev = sub.add_parser("eval", help="cluster an embedding and score it against labels")
    ev.add_argument("embedding")
    ev.add_argument("labels")
    ev.add_argument("--pred", help="use these predicted labels instead of k-means")
    ev.add_argument("--scores", help=f"comma list from {','.join(ALL_SCORES)}")
    ev.add_argument("--kmeans-seeds", default="0")
    ev.add_argument("--method")
    ev.add_argument("--dataset")
    ev.add_argument("--out", "-o")
    ev.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="scatter plot of an embedding as SVG")
    pl.add_argument("embedding")
    pl.add_argument("--labels")
    pl.add_argument("--color-by", choices=["labels", "z", "none"])
    pl.add_argument("--omega-axis", type=int, default=-1)
    pl.add_argument("--out", "-o", required=True)
    pl.set_defaults(func=cmd_plot)
    return parser


_GEN_DEFAULT_N = {"disk": 300, "swissroll": 2000, "persistence": 500}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "generate" and args.n is None:
        args.n = _GEN_DEFAULT_N[args.kind]
    try:
        written = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, GraphError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FinslerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path in written:
        if path:
            print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
