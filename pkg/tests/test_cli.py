"""End-to-end command-line runs in temporary directories."""

import json
import os

import numpy as np
import pytest

from hyperweno.cli import _parse_value, instance_from_config, main, parse_config


def run_cli(*argv) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny but complete pipeline: data, checkpoint, rollout, record."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    ckpt = root / "model.hwck"
    assert (
        run_cli(
            "gen-data", "--benchmark", "burgers1", "--out", str(data),
            "--n-traj", "3", "--mesh-levels", "32", "--seed", "7",
        )
        == 0
    )
    assert (
        run_cli(
            "train", "--benchmark", "burgers1", "--data", str(data),
            "--scheme", "hcfcnn", "--out", str(ckpt),
            "--epochs", "3", "--L", "10", "--K", "2", "--seed", "7",
        )
        == 0
    )
    cfg = root / "instance.cfg"
    cfg.write_text("benchmark = burgers1\n# fixed test parameters\n")
    return {"root": root, "data": data, "ckpt": ckpt, "instance": cfg}


# ---------------------------------------------------------------------------
# config parsing


def test_parse_value_forms():
    assert _parse_value("3.5") == 3.5
    assert _parse_value("true") is True
    assert _parse_value("-0.3, 1.0") == [-0.3, 1.0]
    assert _parse_value("sine") == "sine"


def test_parse_config_and_instance(tmp_path):
    path = tmp_path / "i.cfg"
    path.write_text(
        "benchmark = burgers1\nfamily = sine\nparams = -0.3, 1.0\nextrapolation = true\n"
    )
    inst = instance_from_config(parse_config(path))
    assert inst.family == "sine"
    assert inst.params == (-0.3, 1.0)
    assert inst.extrapolation


def test_parse_config_rejects_garbage(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("this line has no equals\n")
    with pytest.raises(Exception):
        parse_config(path)


def test_instance_defaults_to_fixed_test(tmp_path):
    path = tmp_path / "i.cfg"
    path.write_text("benchmark = shallow\n")
    inst = instance_from_config(parse_config(path))
    assert inst.params == (1.949816, 1.090143, 0.046399, 0.019732, -0.068796)


# ---------------------------------------------------------------------------
# subcommands


def test_gen_data_writes_manifest(workspace):
    manifest = json.loads((workspace["data"] / "manifest.json").read_text())
    assert manifest["benchmark"] == "burgers1"
    assert len(manifest["files"]) == 3
    for entry in manifest["files"]:
        assert (workspace["data"] / entry["path"]).exists()


def test_gen_data_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert (
            run_cli(
                "gen-data", "--benchmark", "burgers1", "--out", str(tmp_path / sub),
                "--n-traj", "2", "--mesh-levels", "32", "--seed", "3",
            )
            == 0
        )
    for name in os.listdir(tmp_path / "a"):
        if name.endswith(".hwtrj"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_writes_checkpoint_and_history(workspace):
    assert workspace["ckpt"].exists()
    loss_csv = workspace["ckpt"].parent / (workspace["ckpt"].name + ".loss.csv")
    lines = loss_csv.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss,wall_seconds"
    assert len(lines) == 4  # header + 3 epochs


def test_rollout_and_diagnose(workspace, tmp_path):
    out = tmp_path / "sol.csv"
    record = tmp_path / "run.hwtrj"
    code = run_cli(
        "rollout", "--ckpt", str(workspace["ckpt"]), "--instance",
        str(workspace["instance"]), "--mesh", "64", "--T", "1.0",
        "--out", str(out), "--record", str(record),
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,component_0,t"
    assert len(lines) == 65  # header + final snapshot
    last = lines[-1].split(",")
    assert float(last[2]) == pytest.approx(1.0)

    diag = tmp_path / "cons.csv"
    assert run_cli("diagnose", "--rollout", str(record), "--out", str(diag)) == 0
    rows = diag.read_text().strip().splitlines()
    assert rows[0] == "t,C_q0"
    values = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.all(values[:, 1] <= 1e-12)


def test_rollout_csv_is_deterministic(workspace, tmp_path):
    outs = []
    for sub in ("r1.csv", "r2.csv"):
        out = tmp_path / sub
        run_cli(
            "rollout", "--ckpt", str(workspace["ckpt"]), "--instance",
            str(workspace["instance"]), "--mesh", "32", "--T", "0.5",
            "--out", str(out),
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_reference_and_converge_classical(workspace, tmp_path):
    ref_csv = tmp_path / "ref.csv"
    assert (
        run_cli(
            "reference", "--benchmark", "burgers1", "--mesh", "64",
            "--T", "0.5", "--out", str(ref_csv),
        )
        == 0
    )
    assert ref_csv.read_text().startswith("x,component_0,t")

    conv = tmp_path / "conv.csv"
    code = run_cli(
        "converge", "--benchmark", "burgers1", "--scheme", "classical",
        "--T", "0.5", "--meshes", "32,64,128", "--dt-power", "0.6667",
        "--out", str(conv),
    )
    assert code == 0
    rows = conv.read_text().strip().splitlines()
    assert rows[0] == "N,mse,order"
    orders = [float(r.split(",")[2]) for r in rows[2:]]
    # smooth pre-shock run: rates well above four in the RMSE convention
    assert all(o >= 4.0 for o in orders)


def test_bench_cost_params_column(workspace, tmp_path):
    out = tmp_path / "cost.csv"
    code = run_cli(
        "bench-cost", "--ckpt", str(workspace["ckpt"]), "--meshes", "32,64",
        "--benchmark", "burgers1", "--T", "0.5", "--out", str(out),
    )
    assert code == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "N,params,wall_seconds"
    for row, n in zip(rows[1:], (32, 64)):
        cells, params, wall = (float(v) for v in row.split(","))
        assert cells == n and params == n * 78
        assert wall > 0


# ---------------------------------------------------------------------------
# failure modes


def test_missing_checkpoint_exit_code(workspace, tmp_path):
    code = run_cli(
        "rollout", "--ckpt", str(tmp_path / "nope.hwck"), "--instance",
        str(workspace["instance"]), "--mesh", "32", "--T", "0.1",
        "--out", str(tmp_path / "x.csv"),
    )
    assert code == 3


def test_corrupt_checkpoint_exit_code(workspace, tmp_path):
    bad = tmp_path / "bad.hwck"
    bad.write_bytes(b"garbage")
    code = run_cli(
        "rollout", "--ckpt", str(bad), "--instance", str(workspace["instance"]),
        "--mesh", "32", "--T", "0.1", "--out", str(tmp_path / "x.csv"),
    )
    assert code == 4


def test_diagnose_rejects_flux_free_trajectory(workspace, tmp_path):
    # dataset files are version 1 (no flux log)
    manifest = json.loads((workspace["data"] / "manifest.json").read_text())
    traj = workspace["data"] / manifest["files"][0]["path"]
    code = run_cli("diagnose", "--rollout", str(traj), "--out", str(tmp_path / "d.csv"))
    assert code == 4


def test_unknown_flag_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("rollout", "--does-not-exist", "1")
    assert exc.value.code == 2


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPERWENO_SEED", "21")
    import importlib

    from hyperweno import cli as cli_module

    importlib.reload(cli_module)
    parser = cli_module._build_parser()
    args = parser.parse_args(["gen-data", "--benchmark", "burgers1", "--out", "x"])
    assert args.seed == 21
    monkeypatch.delenv("HYPERWENO_SEED")
    importlib.reload(cli_module)
