"""Fabricate analytic data products in the documented upstream formats.

Everything here writes files directly (raw little-endian payloads, text
sidecars, tab-separated tables, manifest); the fabricated run mimics what
the simulation pipeline persists, with analytically known content: a
Gaussian ground state, boosted-Gaussian Wigner maps at three snapshot
times, matching QMF tables, and three straight-line trajectories.
"""

import hashlib
from pathlib import Path

import numpy as np
import pytest

SNAP_TIMES = (150.0, 160.0, 170.0)
Z_EXIT = 10.0


def _fmt(x):
    return format(float(x), ".17g")


class RunBuilder:
    def __init__(self, outdir: Path):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.entries = []

    def _add(self, name, rel):
        self.entries.append((name, rel))

    def array(self, name, arr, axes, **extra):
        if np.iscomplexobj(arr):
            kind, payload = "complex128", arr.astype("<c16")
        else:
            kind, payload = "real64", arr.astype("<f8")
        (self.outdir / f"{name}.raw").write_bytes(payload.tobytes())
        lines = [f"name = {name}", f"dtype = {kind}", "endian = little",
                 f"shape = {' '.join(str(s) for s in arr.shape)}"]
        for d, (axname, start, spacing) in enumerate(axes):
            lines.append(f"axis{d} = name={axname} start={_fmt(start)} "
                         f"spacing={_fmt(spacing)} size={arr.shape[d]} unit=a.u.")
        lines.append("config_sha256 = fabricated")
        for key in sorted(extra):
            lines.append(f"{key} = {_fmt(extra[key])}")
        (self.outdir / f"{name}.meta").write_text("\n".join(lines) + "\n")
        self._add(name, f"{name}.raw")
        self._add(name, f"{name}.meta")

    def table(self, name, columns, rows):
        lines = ["#" + "\t".join(columns)]
        for row in rows:
            lines.append("\t".join(_fmt(v) if isinstance(v, float) else str(v)
                                    for v in row))
        (self.outdir / f"{name}.tsv").write_text("\n".join(lines) + "\n")
        self._add(name, f"{name}.tsv")

    def text(self, name, relname, content):
        (self.outdir / relname).write_text(content)
        self._add(name, relname)

    def finish(self):
        lines = ["#name\tpath\tsha256\tbytes"]
        for name, rel in sorted(self.entries, key=lambda e: e[1]):
            path = self.outdir / rel
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            lines.append(f"{name}\t{rel}\t{digest}\t{path.stat().st_size}")
        mpath = self.outdir / "manifest.tsv"
        mpath.write_text("\n".join(lines) + "\n")
        return mpath


def build_analytic_run(outdir: Path):
    """Analytic-oracle products: Gaussian state and its exact Wigner maps."""
    rb = RunBuilder(outdir)
    z = np.linspace(-16.0, 16.0, 161)
    dz = z[1] - z[0]
    rho = (np.arange(48) + 0.5) * 0.25
    psi = (np.pi**-0.25 * np.exp(-z[:, None] ** 2 / 2)
           * np.exp(-rho[None, :] ** 2 / 2)).astype(complex)
    rb.array("psi_ground", psi, [("z", z[0], dz), ("rho", rho[0], 0.25)], time=0.0)

    p = np.linspace(-4.0, 4.0, 129)
    dp = p[1] - p[0]
    for k, t in zip((0.0, 0.25, 0.5), SNAP_TIMES):
        rb.array(f"psi_t{t:015.6f}",
                 (psi * np.exp(1j * k * z)[:, None]).astype(complex),
                 [("z", z[0], dz), ("rho", rho[0], 0.25)], time=t)
        w = (1 / np.pi) * np.exp(-z[:, None] ** 2 - (p[None, :] - k) ** 2)
        rb.array(f"wigner_t{t:015.6f}_w00", w,
                 [("z", z[0], dz), ("p_z", p[0], dp)], time=t)
        p0 = np.exp(-z**2) / np.sqrt(np.pi)
        mask = (p0 >= 1e-8).astype(float)
        rb.table(f"qmf_t{t:015.6f}", ("z", "P0", "P1", "qmf", "mask"),
                 [(zz, pp, pp * k, k, mm) for zz, pp, mm in zip(z, p0, mask)])

    times = np.arange(145.0, 171.0, 1.0)
    for fam, (v, pz) in (("simple_man", (0.3, 0.0)), ("qmf", (0.45, 0.25)),
                         ("qmf_coulomb", (0.42, 0.2))):
        rows = [(float(t), 0.0, Z_EXIT + v * (t - 145.0), 0.0, pz) for t in times]
        rb.table(f"traj_{fam}", ("t", "x", "z", "p_x", "p_z"), rows)

    theta = np.linspace(0.0, np.pi, 33)
    contour = [(2.0 * np.cos(a), 2.0 * np.sin(a)) for a in theta]
    lines = ["#z\trho"] + [f"{_fmt(zz)}\t{_fmt(rr)}" for zz, rr in contour]
    rb.text("tunnel_contour_t_i", "tunnel_contour_t_i.txt", "\n".join(lines) + "\n")

    rb.text("run_summary", "run_summary.txt",
            f"geometry.z_exit = {_fmt(Z_EXIT)}\ngroundstate.ip = 0.5\n")
    return rb.finish()


@pytest.fixture(scope="session")
def analytic_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("fab")
    return build_analytic_run(out)
