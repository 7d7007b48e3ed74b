"""File formats: embedding TSV, loss traces, run manifests, content hashes."""
import hashlib
import json

import numpy as np

from .errors import DataError

MANIFEST_VERSION = 1


def git_blob_hash(path):
    """SHA-1 of ``blob <size>\\0<content>``, as git computes object ids."""
    with open(path, "rb") as fh:
        data = fh.read()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def format_float(v):
    return f"{float(v):.17g}"


def write_embedding_tsv(path, coords):
    coords = np.asarray(coords)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\t" + "\t".join(f"coord_{t + 1}" for t in range(coords.shape[1])) + "\n")
        for i, row in enumerate(coords):
            fh.write(f"{i}\t" + "\t".join(format_float(v) for v in row) + "\n")


def read_embedding_tsv(path):
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if lineno == 1 and parts[0] == "id":
                continue
            if not line.strip():
                continue
            try:
                ids.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            except ValueError:
                raise DataError("malformed embedding row", line=lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise DataError("ragged embedding row", line=lineno)
    if not rows:
        raise DataError(f"no coordinates in {path}")
    coords = np.array(rows, dtype=np.float64)
    order = np.argsort(ids, kind="stable")
    return coords[order]


def write_trace_tsv(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\tloss\n")
        for epoch, value in enumerate(trace):
            fh.write(f"{epoch}\t{format_float(value)}\n")


def read_trace_tsv(path):
    data = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    return data[:, 1]


def write_manifest(path, manifest):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest
