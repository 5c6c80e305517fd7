import json

import pytest

from ac_estimates.cli import build_parser, main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_example(capsys):
    code, out, err = _run(capsys, "constants", "--n", "2", "--K", "2")
    assert code == 0 and err == ""
    report = json.loads(out)
    assert report["constants"]["N"] == 2.0 and report["constants"]["A"] == 0.0
    assert report["passed"] is None and len(report["config_hash"]) == 64


def test_constants_with_bound(capsys):
    code, out, _ = _run(capsys, "constants", "--n", "3", "--K", "5", "--R", "2")
    report = json.loads(out)
    assert code == 0 and report["constants"]["A"] > 0
    assert set(report["bound"]["components"]) == {"explicit", "inv_R2", "sqrtK_over_R"}


def test_verify_closed_example(capsys):
    code, out, err = _run(capsys, "verify", "--check", "closed", "--preset", "allen_cahn", "--kappa", "1")
    assert code == 0 and "PASS closed" in err
    report = json.loads(out)
    assert report["closed"]["passed"] and report["config"]["geometry"]["warp"]["kind"] == "spherical"


def test_missing_and_malformed_config_exit_1(capsys, tmp_path):
    code, out, err = _run(capsys, "sweep", "--config", str(tmp_path / "missing.json"))
    assert code == 1 and out == "" and "cannot read config" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{\"seed\": ")
    code, _, err = _run(capsys, "sweep", "--config", str(bad))
    assert code == 1 and "line 1" in err


def test_invalid_field_exit_1(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": {"geometries": [{"dim": 2}], "radii": [1, -1], "boundaries": [0.5]}}))
    code, _, err = _run(capsys, "sweep", "--config", str(cfg))
    assert code == 1 and "sweep.radii[1]" in err


def test_unused_flag_and_verify_without_check_exit_1(capsys):
    assert _run(capsys, "kquant", "--delta", "0.1")[0] == 1
    code, _, err = _run(capsys, "verify")
    assert code == 1 and "at least one check" in err


def test_failed_check_exits_2(capsys, tmp_path):
    # supercritical Lane-Emden-type exponents are outside every covered case
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"equation": {"a": 1.0, "b": 1.0, "s": 10.0, "t": 11.0}, "params": {"dims": [3]}}))
    code, out, err = _run(capsys, "verify", "--config", str(cfg), "--check", "oracle")
    assert code == 2 and "FAIL oracle" in err
    assert json.loads(out)["oracle"][0]["passed"] is False


def test_solver_error_exits_1(capsys):
    code, _, err = _run(capsys, "jflow", "--warp", "hyperbolic", "--convention", "as-written", "--R", "2",
                        "--T", "1")
    assert code == 1 and "error" in err


def test_argparse_rejects_unknown_check():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["verify", "--check", "everything"])
    assert info.value.code == 2


def test_solve_writes_outputs(capsys, tmp_path):
    code, out, _ = _run(capsys, "solve", "--warp", "hyperbolic", "--R", "2", "--boundary", "0.5",
                        "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    names = sorted(p.split("/")[-1] for p in summary["outputs"])
    assert names == ["solve-profile.csv", "solve-profile.png", "solve.json"]
    header = (tmp_path / "solve-profile.csv").read_text().splitlines()[0]
    assert header == "r,u,config_hash"
    report = json.loads((tmp_path / "solve.json").read_text())
    assert report["half_ball"]["inf_u"] > 0


def test_polar_solve_from_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"R": 1.0, "family": {"kind": "exp-sin"}},
                               "solver": {"polar_shape": [48, 16]}}))
    code, out, _ = _run(capsys, "solve", "--config", str(cfg), "--format", "json")
    assert code == 0 and json.loads(out)["solution"]["kind"] == "polar"


def test_verify_identity_and_liouville_outputs(capsys, tmp_path):
    code, out, err = _run(capsys, "verify", "--check", "identity", "--check", "liouville", "--warp",
                          "hyperbolic", "--out", str(tmp_path))
    assert code == 0 and "PASS identity" in err and "PASS liouville" in err
    for name in ("plot-identity-order.csv", "plot-identity-order.png",
                 "plot-liouville-convergence.csv", "plot-liouville-convergence.png"):
        assert (tmp_path / name).stat().st_size > 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert all(r["components"]["threshold"] is not None for r in report["liouville"])


def test_jflow_and_kquant(capsys, tmp_path):
    code, out, err = _run(capsys, "jflow", "--warp", "hyperbolic", "--R", "2", "--T", "0.5",
                          "--out", str(tmp_path))
    assert code == 0 and "PASS jflow" in err
    assert (tmp_path / "plot-jflow-decay.png").exists()
    code, out, _ = _run(capsys, "kquant", "--warp", "hyperbolic", "--R", "2", "--p", "2")
    assert code == 0 and json.loads(out)["k_quantity"]["k"] == pytest.approx(4.0, abs=1e-10)


SWEEP_CFG = {"sweep": {"geometries": [{"dim": 2, "warp": {"kind": "euclidean"}},
                                      {"dim": 2, "warp": {"kind": "hyperbolic"}}],
                       "radii": [1, 2], "boundaries": [0.5, 2.0]},
             "solver": {"nodes_per_unit": 64}, "check": ["gradient-bound", "harnack"]}


def _sweep_dir(capsys, tmp_path, name, workers):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(SWEEP_CFG))
    out_dir = tmp_path / name
    code, _, err = _run(capsys, "sweep", "--config", str(cfg), "--out", str(out_dir), "--workers", str(workers))
    assert code == 0, err
    return {p.name: p.read_bytes() for p in out_dir.iterdir()}


def test_sweep_outputs_are_byte_identical(capsys, tmp_path):
    first = _sweep_dir(capsys, tmp_path, "a", 1)
    again = _sweep_dir(capsys, tmp_path, "b", 1)
    parallel = _sweep_dir(capsys, tmp_path, "c", 2)
    assert {"sweep.json", "sweep-members.csv", "plot-bound-vs-R.csv", "plot-bound-vs-R.png"} <= set(first)
    assert first == again == parallel
