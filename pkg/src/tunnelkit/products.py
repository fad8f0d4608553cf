"""Persisted data products: raw arrays with text sidecars, tables, manifest.

Array product = two files:

* ``<name>.raw``  raw little-endian payload (real64 or complex128)
* ``<name>.meta`` text sidecar: name, dtype, shape, one ``axisN`` line per
  dimension (axis name, start, spacing, size, unit), the creation config
  digest, and any extra scalar metadata.

Tables are UTF-8 tab-separated text, header line prefixed ``#``, numbers
written with 17 significant digits so golden files are stable.

Every file a run writes is listed in ``manifest.tsv`` (name, path, sha256,
bytes); an unlisted file in the output directory is a defect the test
suite checks for.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingProduct

MANIFEST_NAME = "manifest.tsv"

_DTYPES = {"real64": np.dtype("<f8"), "complex128": np.dtype("<c16")}


@dataclass(frozen=True)
class AxisMeta:
    name: str
    start: float
    spacing: float
    size: int
    unit: str = "a.u."

    def line(self) -> str:
        return (f"name={self.name} start={self.start:.17g} "
                f"spacing={self.spacing:.17g} size={self.size} unit={self.unit}")

    @staticmethod
    def from_line(text: str) -> "AxisMeta":
        kv = dict(tok.split("=", 1) for tok in text.split())
        return AxisMeta(name=kv["name"], start=float(kv["start"]),
                        spacing=float(kv["spacing"]), size=int(kv["size"]),
                        unit=kv.get("unit", "a.u."))

    def values(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.size)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt_float(x: float, precision: int = 17) -> str:
    return format(float(x), f".{precision}g")


def write_array(outdir, name: str, arr: np.ndarray, axes, config_sha256: str = "",
                extra: dict | None = None) -> list:
    """Write payload + sidecar; returns the two relative paths."""
    outdir = Path(outdir)
    if arr.ndim != len(axes):
        raise ValueError("one AxisMeta per array dimension required")
    for d, ax in enumerate(axes):
        if arr.shape[d] != ax.size:
            raise ValueError(f"axis {d} size {ax.size} != array dim {arr.shape[d]}")
    if np.iscomplexobj(arr):
        kind, payload = "complex128", np.ascontiguousarray(arr, dtype="<c16")
    else:
        kind, payload = "real64", np.ascontiguousarray(arr, dtype="<f8")
    raw_rel, meta_rel = f"{name}.raw", f"{name}.meta"
    with open(outdir / raw_rel, "wb") as fh:
        fh.write(payload.tobytes())
    lines = [
        f"name = {name}",
        f"dtype = {kind}",
        "endian = little",
        f"shape = {' '.join(str(s) for s in arr.shape)}",
    ]
    for d, ax in enumerate(axes):
        lines.append(f"axis{d} = {ax.line()}")
    lines.append(f"config_sha256 = {config_sha256}")
    for key in sorted(extra or {}):
        val = (extra or {})[key]
        sval = fmt_float(val) if isinstance(val, float) else str(val)
        lines.append(f"{key} = {sval}")
    with open(outdir / meta_rel, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return [raw_rel, meta_rel]


def read_array(meta_path):
    """Load an array product; returns (array, axes list, meta dict)."""
    meta_path = Path(meta_path)
    if not meta_path.exists():
        raise MissingProduct(f"no sidecar at {meta_path}")
    meta: dict = {}
    axes = []
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("axis"):
            axes.append(AxisMeta.from_line(val))
        else:
            meta[key] = val
    dtype = _DTYPES[meta["dtype"]]
    shape = tuple(int(s) for s in meta["shape"].split())
    raw_path = meta_path.with_suffix(".raw")
    if not raw_path.exists():
        raise MissingProduct(f"no payload at {raw_path}")
    nbytes = os.path.getsize(raw_path)
    expected = int(np.prod(shape)) * dtype.itemsize
    if nbytes != expected:
        raise MissingProduct(
            f"payload {raw_path} has {nbytes} bytes, expected {expected}")
    arr = np.fromfile(raw_path, dtype=dtype).reshape(shape)
    return arr, axes, meta


def write_table(outdir, name: str, columns, rows, precision: int = 17) -> list:
    """Tab-separated text table with a '#'-prefixed header line."""
    rel = f"{name}.tsv"
    with open(Path(outdir) / rel, "w", encoding="utf-8") as fh:
        fh.write("#" + "\t".join(columns) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(fmt_float(v, precision))
                else:
                    cells.append(str(v))
            fh.write("\t".join(cells) + "\n")
    return [rel]


def read_table(path):
    """Returns (columns, list of row tuples of strings)."""
    path = Path(path)
    if not path.exists():
        raise MissingProduct(f"no table at {path}")
    columns, rows = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if not columns:
                    columns = line[1:].split("\t")
                continue
            rows.append(tuple(line.split("\t")))
    return columns, rows


def read_table_floats(path):
    columns, rows = read_table(path)
    data = np.array([[float(c) for c in r] for r in rows]) if rows else np.empty((0, len(columns)))
    return columns, data


def write_polylines(outdir, name: str, polylines, precision: int = 17) -> list:
    """Contour polylines: (z, rho) pairs, one blank-line-separated block each."""
    rel = f"{name}.txt"
    with open(Path(outdir) / rel, "w", encoding="utf-8") as fh:
        fh.write("#z\trho\n")
        for k, poly in enumerate(polylines):
            if k:
                fh.write("\n")
            for zz, rr in poly:
                fh.write(f"{fmt_float(zz, precision)}\t{fmt_float(rr, precision)}\n")
    return [rel]


def write_text(outdir, relname: str, content: str) -> list:
    with open(Path(outdir) / relname, "w", encoding="utf-8") as fh:
        fh.write(content)
    return [relname]


class ProductWriter:
    """Accumulates products for one run and writes the closing manifest."""

    def __init__(self, outdir, config_text: str = "", precision: int = 17):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.precision = precision
        self.config_sha256 = hashlib.sha256(config_text.encode()).hexdigest()
        self.entries: list = []   # (name, relpath)
        if config_text:
            self._register("config.resolved",
                           write_text(self.outdir, "config.resolved.cfg", config_text))

    def _register(self, name: str, relpaths) -> None:
        for rel in relpaths:
            self.entries.append((name, rel))

    def array(self, name: str, arr, axes, **extra):
        self._register(name, write_array(self.outdir, name, arr, axes,
                                         config_sha256=self.config_sha256,
                                         extra=extra))
        return name

    def table(self, name: str, columns, rows):
        self._register(name, write_table(self.outdir, name, columns, rows,
                                         precision=self.precision))
        return name

    def polylines(self, name: str, polys):
        self._register(name, write_polylines(self.outdir, name, polys,
                                             precision=self.precision))
        return name

    def text(self, name: str, relname: str, content: str):
        self._register(name, write_text(self.outdir, relname, content))
        return name

    def summary(self, data: dict):
        lines = []
        for key in sorted(data):
            val = data[key]
            sval = fmt_float(val, self.precision) if isinstance(val, (float, np.floating)) else str(val)
            lines.append(f"{key} = {sval}")
        return self.text("run_summary", "run_summary.txt", "\n".join(lines) + "\n")

    def finish(self) -> Path:
        rows = []
        for name, rel in sorted(self.entries, key=lambda e: e[1]):
            path = self.outdir / rel
            rows.append((name, rel, sha256_file(path), os.path.getsize(path)))
        mpath = self.outdir / MANIFEST_NAME
        with open(mpath, "w", encoding="utf-8") as fh:
            fh.write("#name\tpath\tsha256\tbytes\n")
            for name, rel, digest, nbytes in rows:
                fh.write(f"{name}\t{rel}\t{digest}\t{nbytes}\n")
        return mpath


def read_manifest(path):
    """Returns list of dicts with keys name/path/sha256/bytes."""
    columns, rows = read_table(Path(path))
    out = []
    for r in rows:
        out.append({"name": r[0], "path": r[1], "sha256": r[2], "bytes": int(r[3])})
    return out


def verify_manifest(outdir) -> dict:
    """Recompute checksums; returns {'mismatched': [...], 'orphans': [...]}."""
    outdir = Path(outdir)
    mpath = outdir / MANIFEST_NAME
    if not mpath.exists():
        raise MissingProduct(f"no manifest at {mpath}")
    entries = read_manifest(mpath)
    mismatched = []
    listed = set()
    for e in entries:
        p = outdir / e["path"]
        listed.add(e["path"])
        if not p.exists() or sha256_file(p) != e["sha256"]:
            mismatched.append(e["path"])
    orphans = []
    for p in sorted(outdir.rglob("*")):
        if p.is_dir():
            continue
        rel = str(p.relative_to(outdir))
        if rel == MANIFEST_NAME:
            continue
        if rel not in listed:
            orphans.append(rel)
    return {"mismatched": mismatched, "orphans": orphans}


def load_manifest_arrays(manifest_path, prefix: str):
    """Load all array products whose name starts with ``prefix``, sorted by name."""
    mdir = Path(manifest_path).parent
    out = []
    seen = set()
    for e in read_manifest(manifest_path):
        if e["name"].startswith(prefix) and e["name"] not in seen:
            seen.add(e["name"])
            meta_rel = e["name"] + ".meta"
            out.append((e["name"], mdir / meta_rel))
    out.sort(key=lambda t: t[0])
    return [(name, *read_array(p)) for name, p in out]
