"""Deterministic renderers for the four figure kinds.

Every renderer is a pure function of (products, request): fixed figure
geometry, fixed dpi, no timestamps, metadata pinned, so repeated renders
of the same inputs are byte-identical.  The only value transformations
performed here are clamping and base-10 logarithms; each image gets a
text sidecar recording the styling actually used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .products import AxisMismatch, Manifest, MissingProduct, snapshot_times  # noqa: E402

KINDS = ("density_log", "wigner_surface", "trajectory_overlay", "phasespace_panel")

LOG_FLOOR = 1e-12
DPI = 110
FIGSIZE = (6.4, 4.2)

TRAJ_STYLES = {
    "simple_man": {"color": "white", "linestyle": "--", "label": "simple man"},
    "qmf": {"color": "red", "linestyle": "-", "label": "qmf seeded"},
    "qmf_coulomb": {"color": "gold", "linestyle": "-", "label": "qmf + coulomb"},
}


@dataclass(frozen=True)
class FigureRequest:
    kind: str
    manifest: Path
    out: Path
    product: str = ""            # explicit product name (density/wigner kinds)
    colormap: str = ""
    clamp: tuple = ()            # (vmin, vmax) after any log transform
    size: tuple = FIGSIZE        # inches at fixed dpi
    log_floor: float = LOG_FLOOR
    times: tuple = ()            # phasespace_panel: restrict snapshot times

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


def _save(fig, out: Path, sidecar_lines):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=DPI, metadata={"Software": "figemit"})
    plt.close(fig)
    side = out.with_suffix(out.suffix + ".txt")
    side.write_text("\n".join(sidecar_lines) + "\n", encoding="utf-8")
    return out


def _require_axes(axes, names):
    got = tuple(a.name for a in axes)
    if got != tuple(names):
        raise AxisMismatch(f"expected axes {names}, product has {got}")


def _density_map(ax, arr, axes, colormap, clamp, floor):
    dens = (arr.real**2 + arr.imag**2) if np.iscomplexobj(arr) else np.abs(arr)
    logd = np.log10(np.maximum(dens, floor))
    vmin, vmax = clamp if clamp else (float(logd.min()), float(logd.max()))
    extent = (axes[0].start, axes[0].end, axes[1].start, axes[1].end)
    im = ax.imshow(logd.T, origin="lower", extent=extent, aspect="auto",
                   cmap=colormap or "viridis", vmin=vmin, vmax=vmax)
    return im, vmin, vmax


def render_density_log(req: FigureRequest, man: Manifest) -> Path:
    name = req.product or "psi_ground"
    arr, axes, meta = man.array(name)
    _require_axes(axes, ("z", "rho"))
    fig, ax = plt.subplots(figsize=req.size)
    im, vmin, vmax = _density_map(ax, arr, axes, req.colormap, req.clamp,
                                  req.log_floor)
    fig.colorbar(im, ax=ax, label="log10 density")
    ax.set_xlabel("z (a.u.)")
    ax.set_ylabel("rho (a.u.)")
    ax.set_title(f"log10 |psi|^2, t = {float(meta.get('time', 0.0)):g}")
    return _save(fig, req.out, [
        f"kind = density_log", f"product = {name}",
        f"log_floor = {req.log_floor:.6g}",
        f"clamp = {vmin:.6g} {vmax:.6g}",
        f"colormap = {req.colormap or 'viridis'}",
    ])


def render_wigner_surface(req: FigureRequest, man: Manifest) -> Path:
    name = req.product
    if not name:
        found = man.names_with_prefix("wigner_t")
        if not found:
            raise MissingProduct("no wigner_t* products in manifest")
        name = found[0]
    arr, axes, meta = man.array(name)
    _require_axes(axes, ("z", "p_z"))
    w = arr.real
    lim = max(abs(float(w.min())), abs(float(w.max())))
    vmin, vmax = req.clamp if req.clamp else (-lim, lim)
    fig, ax = plt.subplots(figsize=req.size)
    extent = (axes[0].start, axes[0].end, axes[1].start, axes[1].end)
    im = ax.imshow(w.T, origin="lower", extent=extent, aspect="auto",
                   cmap=req.colormap or "RdBu_r", vmin=vmin, vmax=vmax)
    fig.colorbar(im, ax=ax, label="W(z, p_z)")
    ax.set_xlabel("z (a.u.)")
    ax.set_ylabel("p_z (a.u.)")
    ax.set_title(f"Wigner function, t = {float(meta.get('time', 0.0)):g}")
    return _save(fig, req.out, [
        f"kind = wigner_surface", f"product = {name}",
        f"clamp = {vmin:.6g} {vmax:.6g}",
        f"colormap = {req.colormap or 'RdBu_r'}",
    ])


def render_trajectory_overlay(req: FigureRequest, man: Manifest) -> Path:
    name = req.product
    if not name:
        snaps = snapshot_times(man, "psi_t")
        if not snaps:
            raise MissingProduct("no psi_t* snapshot products in manifest")
        name = snaps[-1][1]
    arr, axes, meta = man.array(name)
    _require_axes(axes, ("z", "rho"))
    t_snap = float(meta.get("time", 0.0))
    fig, ax = plt.subplots(figsize=req.size)
    im, vmin, vmax = _density_map(ax, arr, axes, req.colormap, req.clamp,
                                  req.log_floor)
    fig.colorbar(im, ax=ax, label="log10 density")
    for fam in sorted(TRAJ_STYLES):
        try:
            cols, data = man.table(f"traj_{fam}")
        except MissingProduct:
            continue
        sel = data[:, 0] <= t_snap + 1e-9
        if not sel.any():
            continue
        style = TRAJ_STYLES[fam]
        ax.plot(data[sel, 2], np.abs(data[sel, 1]), lw=1.4, **style)
    for cname in man.names_with_prefix("tunnel_contour"):
        path = man.path(cname, ".txt")
        block = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.startswith("#"):
                continue
            if not line.strip():
                if block:
                    poly = np.asarray(block)
                    ax.plot(poly[:, 0], poly[:, 1], color="blue", lw=1.0)
                    block = []
                continue
            block.append([float(v) for v in line.split("\t")])
        if block:
            poly = np.asarray(block)
            ax.plot(poly[:, 0], poly[:, 1], color="blue", lw=1.0)
    ax.set_xlabel("z (a.u.)")
    ax.set_ylabel("rho (a.u.)")
    ax.set_title(f"trajectories over density, t = {t_snap:g}")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, req.out, [
        f"kind = trajectory_overlay", f"product = {name}",
        f"log_floor = {req.log_floor:.6g}",
        f"clamp = {vmin:.6g} {vmax:.6g}",
        f"colormap = {req.colormap or 'viridis'}",
    ])


def _panel_times(req: FigureRequest, man: Manifest):
    have = snapshot_times(man, "wigner_t")
    if not have:
        raise MissingProduct("no wigner_t* products in manifest")
    if not req.times:
        return have
    out = []
    for want in req.times:
        best = min(have, key=lambda tn: abs(tn[0] - want))
        if abs(best[0] - want) > 1e-6:
            raise MissingProduct(f"no wigner product at t = {want:g}")
        out.append(best)
    return out


def _timestamped(out: Path, t: float) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_t{t:015.6f}{out.suffix}")


def render_phasespace_panel(req: FigureRequest, man: Manifest) -> list:
    """One panel per snapshot: Wigner map, QMF curve, trajectory families,
    and vertical markers at the ion core and the tunnel exit."""
    summary = man.summary()
    z_exit = float(summary.get("geometry.z_exit", "nan"))
    outputs = []
    for t, name in _panel_times(req, man):
        arr, axes, meta = man.array(name)
        _require_axes(axes, ("z", "p_z"))
        w = arr.real
        lim = max(abs(float(w.min())), abs(float(w.max())))
        vmin, vmax = req.clamp if req.clamp else (-lim, lim)
        fig, ax = plt.subplots(figsize=req.size)
        extent = (axes[0].start, axes[0].end, axes[1].start, axes[1].end)
        im = ax.imshow(w.T, origin="lower", extent=extent, aspect="auto",
                       cmap=req.colormap or "RdBu_r", vmin=vmin, vmax=vmax)
        fig.colorbar(im, ax=ax, label="W(z, p_z)")
        qname = f"qmf_t{t:015.6f}"
        cols, data = man.table(qname)
        mask = data[:, 4] > 0.5
        ax.plot(data[mask, 0], data[mask, 3], color="black", lw=1.4,
                label="quantum momentum")
        for fam in sorted(TRAJ_STYLES):
            try:
                tcols, tdata = man.table(f"traj_{fam}")
            except MissingProduct:
                continue
            sel = tdata[:, 0] <= t + 1e-9
            if not sel.any():
                continue
            ax.plot(tdata[sel, 2], tdata[sel, 4], lw=1.4, **TRAJ_STYLES[fam])
        ax.axvline(0.0, color="black", linestyle="--", lw=0.9)
        if np.isfinite(z_exit):
            ax.axvline(z_exit, color="black", linestyle="--", lw=0.9)
        ax.set_xlabel("z (a.u.)")
        ax.set_ylabel("p_z (a.u.)")
        ax.set_title(f"phase space, t = {t:g}")
        ax.legend(loc="upper right", fontsize=8)
        out = _timestamped(req.out, t)
        outputs.append(_save(fig, out, [
            f"kind = phasespace_panel", f"product = {name}",
            f"time = {t:.6f}",
            f"clamp = {vmin:.6g} {vmax:.6g}",
            f"colormap = {req.colormap or 'RdBu_r'}",
            f"markers = 0 {z_exit:.6g}",
        ]))
    return outputs


def render(req: FigureRequest, man: Manifest):
    """Dispatch on kind; returns the written path(s)."""
    if req.kind == "density_log":
        return [render_density_log(req, man)]
    if req.kind == "wigner_surface":
        return [render_wigner_surface(req, man)]
    if req.kind == "trajectory_overlay":
        return [render_trajectory_overlay(req, man)]
    return render_phasespace_panel(req, man)
