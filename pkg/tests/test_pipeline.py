import shutil
from pathlib import Path

import numpy as np
import pytest

from tunnelkit.config import parse_config
from tunnelkit.pipeline import run_pipeline
from tunnelkit.products import (read_array, read_manifest, read_table_floats,
                                verify_manifest)

MICRO = """
pulse.E0 = 0.4
pulse.omega = 0.5
potential.kind = soft_core
potential.Z = 2
potential.a = 1
grid.z_min = -18
grid.z_max = 18
grid.n_z = 121
grid.rho_max = 9
grid.n_rho = 30
groundstate.dt_imag = 0.02
groundstate.tol = 1e-9
propagation.dt = 0.05
propagation.snapshot_times = 10 14 16 18
propagation.absorber = mask
propagation.absorber_width = 3
phase_space.window_width = 30
phase_space.p0_floor = 1e-14
trajectories.t_i = 16
trajectories.dt = 0.002
reconstruction.prior_model = zero_exit
"""


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    cfg = parse_config(MICRO)
    out = tmp_path_factory.mktemp("micro")
    result = run_pipeline(cfg, outdir=out)
    return cfg, result


def test_structural_contract(micro_run):
    _, result = micro_run
    entries = read_manifest(result.manifest)
    names = {e["name"] for e in entries}
    assert "psi_ground" in names
    assert sum(1 for n in names if n.startswith("psi_t")) >= 1
    assert sum(1 for n in names if n.startswith("wigner_t")) >= 1
    assert sum(1 for n in names if n.startswith("traj_")) >= 3
    assert "roundtrip" in names
    assert "run_summary" in names


def test_manifest_complete_no_orphans(micro_run):
    _, result = micro_run
    report = verify_manifest(result.outdir)
    assert report["mismatched"] == []
    assert report["orphans"] == []


def test_snapshot_products_readable(micro_run):
    _, result = micro_run
    arr, axes, meta = read_array(result.outdir / "psi_t00000016.000000.meta")
    assert arr.shape == (121, 30)
    assert arr.dtype == np.complex128
    assert axes[0].name == "z"
    assert abs(float(meta["time"]) - 16.0) <= 0.025 + 1e-12


def test_trajectory_table_format(micro_run):
    _, result = micro_run
    cols, data = read_table_floats(result.outdir / "traj_simple_man.tsv")
    assert cols == ["t", "x", "z", "p_x", "p_z"]
    assert data[0, 0] == pytest.approx(16.0)
    # simple-man starts at the exit with zero momentum
    assert data[0, 3] == 0.0 and data[0, 4] == 0.0
    assert data[0, 2] == pytest.approx(result.summary["geometry.z_exit"])


def test_roundtrip_table(micro_run):
    from tunnelkit.products import read_table

    _, result = micro_run
    cols, rows = read_table(result.outdir / "roundtrip.tsv")
    assert "err_t_i" in cols
    assert len(rows) >= 3
    ok_rows = [r for r in rows if r[-1] == "ok"]
    assert ok_rows, "at least one family must reconstruct"
    i = cols.index("err_t_i")
    for r in ok_rows:
        if r[0] == "simple_man":
            assert float(r[i]) < 1e-3


def test_pipeline_determinism(micro_run, tmp_path):
    cfg, result = micro_run
    out2 = tmp_path / "again"
    result2 = run_pipeline(cfg, outdir=out2)
    m1 = read_manifest(result.manifest)
    m2 = read_manifest(result2.manifest)
    assert [(e["path"], e["sha256"]) for e in m1] == \
        [(e["path"], e["sha256"]) for e in m2]


def test_zero_field_run_skips_marked(tmp_path):
    cfg = parse_config(MICRO.replace("pulse.E0 = 0.4", "pulse.E0 = 0")
                       .replace("trajectories.t_i = 16", "trajectories.t_i = 0"))
    result = run_pipeline(cfg, outdir=tmp_path / "zero")
    assert result.skipped.get("trajectories") == "skipped: no field"
    assert result.skipped.get("reconstruction") == "skipped: no field"
    assert result.summary["skipped.trajectories"] == "skipped: no field"
    entries = read_manifest(result.manifest)
    names = {e["name"] for e in entries}
    assert sum(1 for n in names if n.startswith("psi_t")) >= 1  # pipeline completed


def test_snapshot_spill(tmp_path):
    cfg = parse_config(MICRO + "\ncompute.memory_budget_bytes = 200000\n")
    result = run_pipeline(cfg, outdir=tmp_path / "spill")
    assert result.summary["propagation.snapshot_spill"] == "true"
    # products identical in content to the in-memory run path
    arr, _, _ = read_array(Path(result.outdir) / "psi_t00000016.000000.meta")
    assert np.isfinite(arr).all()


def test_onset_metrics_recorded(micro_run):
    _, result = micro_run
    s = result.summary
    assert "onset.outgoing_t0" in s
    assert "onset.time" in s
    cols, data = read_table_floats(result.outdir / "snapshot_metrics.tsv")
    assert cols[:3] == ["t_requested", "t_actual", "norm"]
    assert data.shape[0] == 4
