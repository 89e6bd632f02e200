"""On-disk formats: Matrix Market instance files with a JSON metadata
sidecar, and plain-text observed vectors.

The matrix file is coordinate-format Matrix Market ("matrix coordinate
real general", 1-indexed) so instances can be inspected and exchanged
with standard tools.  The sidecar `<stem>.meta.json` records the problem
size, the generator name, the seed and any generator tags.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .qubo import QuboInstance

MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_instance(path: str | os.PathLike, instance: QuboInstance) -> None:
    """Write A to a Matrix Market file and its metadata to a sidecar.

    Values are written with repr(float), which round-trips float64
    exactly through the reader.
    """
    path = os.fspath(path)
    lines = [MM_HEADER, f"{instance.k} {instance.k} {instance.nnz}"]
    for r, c, v in zip(instance.rows, instance.cols, instance.vals):
        lines.append(f"{r + 1} {c + 1} {float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {
        "k": instance.k,
        "generator": instance.meta.get("generator"),
        "seed": instance.meta.get("seed"),
        "tags": instance.meta.get("tags", {}),
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def read_instance(path: str | os.PathLike) -> QuboInstance:
    """Read a Matrix Market instance and its sidecar metadata.

    Malformed input raises ValueError naming the file and line.  A missing
    sidecar is tolerated (meta stays empty); a malformed one is not.
    """
    path = os.fspath(path)
    with open(path) as fh:
        raw = fh.read().splitlines()

    def fail(lineno: int, why: str):
        raise ValueError(f"{path}:{lineno}: {why}")

    if not raw:
        fail(1, "empty file, expected a Matrix Market header")
    if raw[0].strip() != MM_HEADER:
        fail(1, f"bad header {raw[0]!r}, expected {MM_HEADER!r}")

    lineno = 1
    body = []
    for text in raw[1:]:
        lineno += 1
        stripped = text.strip()
        if not stripped or stripped.startswith("%"):
            continue
        body.append((lineno, stripped))
    if not body:
        fail(lineno, "missing size line")

    size_lineno, size_line = body[0]
    parts = size_line.split()
    if len(parts) != 3:
        fail(size_lineno, f"size line needs 3 fields, got {len(parts)}")
    try:
        n_rows, n_cols, nnz = (int(p) for p in parts)
    except ValueError:
        fail(size_lineno, f"non-integer size line {size_line!r}")
    if n_rows != n_cols:
        fail(size_lineno, f"matrix must be square, got {n_rows} x {n_cols}")
    if len(body) - 1 != nnz:
        fail(size_lineno, f"size line promises {nnz} entries, found {len(body) - 1}")

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for idx, (entry_lineno, entry) in enumerate(body[1:]):
        parts = entry.split()
        if len(parts) != 3:
            fail(entry_lineno, f"entry needs 3 fields, got {len(parts)}")
        try:
            r, c = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            fail(entry_lineno, f"malformed entry {entry!r}")
        if not (1 <= r <= n_rows and 1 <= c <= n_cols):
            fail(entry_lineno, f"index ({r}, {c}) outside 1..{n_rows}")
        rows[idx], cols[idx], vals[idx] = r - 1, c - 1, v

    meta = {}
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as err:
                raise ValueError(f"{sidecar}: invalid JSON: {err}") from err
        if not isinstance(loaded, dict):
            raise ValueError(f"{sidecar}: expected a JSON object")
        if "k" in loaded and loaded["k"] != n_rows:
            raise ValueError(
                f"{sidecar}: metadata says k={loaded['k']}, matrix is {n_rows}"
            )
        meta = {key: loaded.get(key) for key in ("generator", "seed", "tags")}
    return QuboInstance(k=n_rows, rows=rows, cols=cols, vals=vals, meta=meta)


def _sidecar_path(path: str) -> str:
    stem, ext = os.path.splitext(path)
    return (stem if ext else path) + ".meta.json"


def write_vector(path: str | os.PathLike, b: np.ndarray) -> None:
    """Write a vector as one repr(float) per line."""
    with open(os.fspath(path), "w") as fh:
        for v in np.asarray(b, dtype=np.float64):
            fh.write(f"{float(v)!r}\n")


def read_vector(path: str | os.PathLike) -> np.ndarray:
    """Read a one-number-per-line vector; blank lines are ignored."""
    path = os.fspath(path)
    out = []
    with open(path) as fh:
        for lineno, text in enumerate(fh, start=1):
            stripped = text.strip()
            if not stripped:
                continue
            try:
                out.append(float(stripped))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number {stripped!r}")
    return np.array(out, dtype=np.float64)
