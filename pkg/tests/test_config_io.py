import numpy as np
import pytest

from tunnelkit.config import (RunConfig, config_digest, load_config,
                              parse_config, serialize_config, validate)
from tunnelkit.errors import ConfigError, MissingProduct
from tunnelkit.products import (AxisMeta, ProductWriter, read_array,
                                read_manifest, read_table, read_table_floats,
                                verify_manifest, write_array, write_table)

GOOD = """
pulse.E0 = 0.14
pulse.omega = 0.2
potential.kind = soft_core
potential.Z = 2
potential.a = 1
grid.z_min = -20
grid.z_max = 20
grid.n_z = 161
grid.rho_max = 10
grid.n_rho = 40
propagation.dt = 0.02
propagation.snapshot_times = 10 20 30
propagation.absorber = none
trajectories.t_i = 30
"""


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.pulse.E0 == 0.14
    assert cfg.potential.kind == "soft_core"
    assert cfg.propagation.snapshot_times == (10.0, 20.0, 30.0)
    assert cfg.trajectories.t_i == 30.0


def test_roundtrip_identity():
    cfg = parse_config(GOOD)
    text = serialize_config(cfg)
    cfg2 = parse_config(text)
    assert cfg == cfg2
    assert serialize_config(cfg2) == text
    assert config_digest(cfg) == config_digest(cfg2)


def test_roundtrip_precision():
    cfg = parse_config(GOOD + "\ngroundstate.tol = 1.2345678901234567e-11\n")
    cfg2 = parse_config(serialize_config(cfg))
    assert cfg2.groundstate.tol == cfg.groundstate.tol  # bit-exact


def test_all_errors_reported_not_just_first():
    bad = GOOD + "\ngrid.n_z = 4\npulse.omega = -1\npropagation.scheme_order = 3\n"
    with pytest.raises(ConfigError) as exc_info:
        parse_config(bad)
    problems = exc_info.value.problems
    paths = [p for p, _ in problems]
    assert "grid.n_z" in paths or ("grid.n_z", "duplicate key") in problems
    # duplicate keys are flagged at parse time here
    assert len(problems) >= 2


def test_validation_message_cites_path():
    bad = GOOD.replace("grid.n_z = 161", "grid.n_z = 4")
    with pytest.raises(ConfigError) as exc_info:
        parse_config(bad)
    msgs = [f"{p}: {r}" for p, r in exc_info.value.problems]
    assert any(m.startswith("grid.n_z: must be >= 8") for m in msgs)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc_info:
        parse_config(GOOD + "\nnot.a.key = 1\n")
    assert any(p == "not.a.key" for p, _ in exc_info.value.problems)


def test_snapshot_time_bounds_checked():
    with pytest.raises(ConfigError) as exc_info:
        parse_config(GOOD.replace("= 10 20 30", "= 10 9999"))
    assert any(p == "propagation.snapshot_times" for p, _ in exc_info.value.problems)


def test_t_i_requires_nearby_snapshot():
    with pytest.raises(ConfigError) as exc_info:
        parse_config(GOOD.replace("trajectories.t_i = 30", "trajectories.t_i = 12.7"))
    assert any(p == "trajectories.t_i" for p, _ in exc_info.value.problems)


def test_defaults_valid():
    validate(RunConfig())  # must not raise


def test_array_product_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
    axes = [AxisMeta("z", -1.0, 0.25, 7), AxisMeta("rho", 0.1, 0.2, 5)]
    write_array(tmp_path, "test_arr", arr, axes, config_sha256="abc",
                extra={"time": 1.5})
    out, axes2, meta = read_array(tmp_path / "test_arr.meta")
    assert np.array_equal(out, arr)
    assert meta["config_sha256"] == "abc"
    assert float(meta["time"]) == 1.5
    assert axes2[0].name == "z" and axes2[1].size == 5
    assert np.allclose(axes2[0].values(), -1.0 + 0.25 * np.arange(7))


def test_array_payload_size_checked(tmp_path):
    arr = np.zeros((4, 4))
    write_array(tmp_path, "trunc", arr, [AxisMeta("a", 0, 1, 4), AxisMeta("b", 0, 1, 4)])
    with open(tmp_path / "trunc.raw", "ab") as fh:
        fh.write(b"xx")
    with pytest.raises(MissingProduct):
        read_array(tmp_path / "trunc.meta")


def test_table_roundtrip(tmp_path):
    rows = [(1.0, -0.5, "ok"), (2.0, 0.25, "bad")]
    write_table(tmp_path, "tbl", ("t", "v", "s"), rows)
    cols, got = read_table(tmp_path / "tbl.tsv")
    assert cols == ["t", "v", "s"]
    assert got[0][2] == "ok"
    # float reads on a purely numeric table
    write_table(tmp_path, "num", ("a", "b"), [(1.25, 2.5)])
    _, data = read_table_floats(tmp_path / "num.tsv")
    assert data[0, 1] == 2.5


def test_manifest_lists_everything(tmp_path):
    pw = ProductWriter(tmp_path, "pulse.E0 = 0.1\n")
    pw.array("a1", np.ones((3, 3)), [AxisMeta("x", 0, 1, 3), AxisMeta("y", 0, 1, 3)])
    pw.table("t1", ("c",), [(1.0,)])
    pw.summary({"k": 1.0})
    mpath = pw.finish()
    entries = read_manifest(mpath)
    paths = {e["path"] for e in entries}
    assert {"a1.raw", "a1.meta", "t1.tsv", "run_summary.txt",
            "config.resolved.cfg"} <= paths
    report = verify_manifest(tmp_path)
    assert report["mismatched"] == []
    assert report["orphans"] == []


def test_manifest_detects_orphans_and_corruption(tmp_path):
    pw = ProductWriter(tmp_path, "x.y = 1\n")
    pw.table("t1", ("c",), [(1.0,)])
    pw.finish()
    (tmp_path / "stray.txt").write_text("not listed")
    with open(tmp_path / "t1.tsv", "a") as fh:
        fh.write("tampered\n")
    report = verify_manifest(tmp_path)
    assert "stray.txt" in report["orphans"]
    assert "t1.tsv" in report["mismatched"]


def test_sidecar_hash_matches_config_digest(tmp_path):
    cfg = parse_config(GOOD)
    text = serialize_config(cfg)
    pw = ProductWriter(tmp_path, text)
    pw.array("arr", np.zeros(4), [AxisMeta("x", 0, 1, 4)])
    _, _, meta = read_array(tmp_path / "arr.meta")
    assert meta["config_sha256"] == config_digest(cfg)


def test_load_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(GOOD)
    cfg = load_config(path)
    assert cfg.pulse.omega == 0.2
