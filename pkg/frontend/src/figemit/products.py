"""Readers for the simulation's persisted data products.

The formats are the upstream package's external interface:

* array products: ``<name>.raw`` little-endian payload (real64/complex128)
  plus a ``<name>.meta`` text sidecar (dtype, shape, axis lines);
* tables: UTF-8 tab-separated text, header line prefixed ``#``;
* ``manifest.tsv``: name, path, sha256, bytes per product file;
* ``run_summary.txt``: ``key = value`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MissingProduct(Exception):
    """Manifest entry or product file absent."""


class AxisMismatch(Exception):
    """Product lacks the axes the figure kind requires."""


_DTYPES = {"real64": np.dtype("<f8"), "complex128": np.dtype("<c16")}


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    spacing: float
    size: int

    def values(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.size)

    @property
    def end(self) -> float:
        return self.start + self.spacing * (self.size - 1)


def _parse_axis(text: str) -> Axis:
    kv = dict(tok.split("=", 1) for tok in text.split())
    return Axis(name=kv["name"], start=float(kv["start"]),
                spacing=float(kv["spacing"]), size=int(kv["size"]))


def read_array(meta_path: Path):
    meta_path = Path(meta_path)
    if not meta_path.exists():
        raise MissingProduct(str(meta_path))
    meta: dict = {}
    axes = []
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("axis"):
            axes.append(_parse_axis(val))
        else:
            meta[key] = val
    shape = tuple(int(s) for s in meta["shape"].split())
    raw = meta_path.with_suffix(".raw")
    if not raw.exists():
        raise MissingProduct(str(raw))
    arr = np.fromfile(raw, dtype=_DTYPES[meta["dtype"]]).reshape(shape)
    return arr, axes, meta


def read_table(path: Path):
    path = Path(path)
    if not path.exists():
        raise MissingProduct(str(path))
    columns, rows = [], []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        if line.startswith("#"):
            if not columns:
                columns = line[1:].split("\t")
            continue
        rows.append(line.split("\t"))
    return columns, rows


def read_float_table(path: Path):
    columns, rows = read_table(path)
    numeric = []
    for r in rows:
        try:
            numeric.append([float(c) for c in r])
        except ValueError:
            numeric.append([float("nan")] * len(r))
    data = np.asarray(numeric) if numeric else np.empty((0, len(columns)))
    return columns, data


@dataclass
class Manifest:
    directory: Path
    names: dict   # product name -> list of relative paths

    def path(self, name: str, suffix: str) -> Path:
        for rel in self.names.get(name, ()):
            if rel.endswith(suffix):
                return self.directory / rel
        raise MissingProduct(f"{name}{suffix} not in manifest")

    def array(self, name: str):
        return read_array(self.path(name, ".meta"))

    def table(self, name: str):
        return read_float_table(self.path(name, ".tsv"))

    def names_with_prefix(self, prefix: str):
        return sorted(n for n in self.names if n.startswith(prefix))

    def summary(self) -> dict:
        out = {}
        path = self.path("run_summary", ".txt")
        for line in path.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                key, val = (s.strip() for s in line.split("=", 1))
                out[key] = val
        return out


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise MissingProduct(str(path))
    names: dict = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        names.setdefault(parts[0], []).append(parts[1])
    return Manifest(directory=path.parent, names=names)


def snapshot_times(man: Manifest, prefix: str):
    """Times encoded in product names like ``<prefix>0000...<t>``."""
    out = []
    for name in man.names_with_prefix(prefix):
        tail = name[len(prefix):]
        tail = tail.split("_")[0]
        try:
            out.append((float(tail), name))
        except ValueError:
            continue
    return sorted(out)
