import json

import pytest

from ac_estimates.config import (
    PARAM_DEFAULTS,
    ConfigError,
    RunConfig,
    build_run_config,
    expand_sweep,
    read_json,
)
from ac_estimates.equations import EquationSpec


def test_defaults_are_filled_in():
    cfg = build_run_config("constants")
    assert cfg.params == PARAM_DEFAULTS["constants"]
    assert cfg.geometry == {"dim": 2, "warp": {"kind": "euclidean"}}
    assert cfg.equation == {"preset": "allen_cahn"}
    assert cfg.output == {"dir": None, "format": "csv"}
    assert cfg.seed == 0 and cfg.workers is None
    assert cfg.nodes_per_unit == 512 and cfg.polar_shape == (256, 128)


def test_hash_ignores_output_and_workers():
    a = build_run_config("solve")
    b = build_run_config("solve", workers=4, out_dir="/tmp/x", fmt="json")
    assert a.hash == b.hash and len(a.hash) == 64
    assert build_run_config("solve", seed=1).hash != a.hash
    assert build_run_config("solve", overrides={"params": {"R": 2.0}}).hash != a.hash


def test_overrides_replace_only_given_leaves():
    file_cfg = {"params": {"R": 3.0, "boundary": 0.7}}
    cfg = build_run_config("solve", file_cfg, {"params": {"R": 5.0, "boundary": None}})
    assert cfg.params["R"] == 5.0 and cfg.params["boundary"] == 0.7


def test_read_json_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        read_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "seed": 1,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3 column 3"):
        read_json(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        read_json(arr)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"seed": 3}))
    assert read_json(good) == {"seed": 3}


SWEEP = {"geometries": [{"dim": 2, "warp": {"kind": "euclidean"}}], "radii": [1.0, 2.0],
         "boundaries": [0.5]}


@pytest.mark.parametrize("file_cfg,path", [
    ({"sweep": dict(SWEEP, radii=[1.0, -2.0])}, "sweep.radii[1]"),
    ({"sweep": dict(SWEEP, geometries=[{"dim": 2, "r_max": 3.0}])}, "sweep.geometries[0].r_max"),
    ({"sweep": dict(SWEEP, boundaries=[{"kind": "spiral"}])}, "sweep.boundaries[0]"),
    ({"sweep": dict(SWEEP, extra=1)}, "sweep"),
    ({"geometry": {"warp": {"kind": "euclidean"}}}, "geometry.dim"),
    ({"geometry": {"dim": 2, "r_max": 0}}, "geometry.r_max"),
    ({"solver": {"tol": -1.0}}, "solver.tol"),
    ({"solver": {"polar_shape": [64]}}, "solver.polar_shape"),
    ({"solver": {"max_iter": 2.5}}, "solver.max_iter"),
    ({"params": {"R": -1.0}}, "params.R"),
    ({"check": ["bogus"]}, "check[0]"),
    ({"seed": -1}, "seed"),
    ({"output": {"format": "xml"}}, "output.format"),
])
def test_errors_carry_field_paths(file_cfg, path):
    with pytest.raises(ConfigError) as info:
        build_run_config("sweep" if "sweep" in file_cfg else "solve", file_cfg)
    assert info.value.path == path


def test_unknown_fields_rejected():
    with pytest.raises(ConfigError, match="unknown top-level"):
        build_run_config("solve", {"geometri": {}})
    with pytest.raises(ConfigError, match="unknown parameters"):
        build_run_config("solve", {"params": {"kappa": 1.0}})
    with pytest.raises(ConfigError):
        build_run_config("solve", {"solver": {"damping": 0.5}})
    with pytest.raises(ConfigError):
        build_run_config("nonsense")


def test_check_rules():
    with pytest.raises(ConfigError, match="at least one check"):
        build_run_config("verify")
    assert build_run_config("verify", {"check": "closed"}).check == ("closed",)
    with pytest.raises(ConfigError, match="sweep supports only"):
        build_run_config("sweep", {"check": ["closed"]})
    assert build_run_config("sweep", {"check": ["harnack"]}).check == ("harnack",)


def test_equation_and_geometry_validated_eagerly():
    with pytest.raises(ConfigError) as info:
        build_run_config("solve", {"equation": {"preset": "no_such_preset"}})
    assert info.value.path == "equation"
    with pytest.raises(ConfigError) as info:
        build_run_config("solve", {"geometry": {"dim": 2, "warp": {"kind": "custom", "expr": "r+"}}})
    assert info.value.path == "geometry"


def test_expand_sweep_replicates_fourier_families():
    cfg = dict(SWEEP, boundaries=[0.5, {"kind": "fourier", "value": 1.0, "amplitude": 0.5}], seeds=[1, 2, 3])
    out = expand_sweep(cfg)
    assert "seeds" not in out and "seeds" in cfg
    assert out["boundaries"][0] == 0.5
    assert [b["seed"] for b in out["boundaries"][1:]] == [1, 2, 3]
    assert expand_sweep(SWEEP) == SWEEP


def test_run_config_builders():
    cfg = build_run_config("solve", {"geometry": {"dim": 3, "warp": {"kind": "hyperbolic"}},
                                     "solver": {"tol": 1e-9, "nodes_per_unit": 64}})
    assert isinstance(cfg, RunConfig)
    geo = cfg.build_geometry(r_max=2.0)
    assert geo.n == 3 and geo.r_max == 2.0
    assert cfg.newton.tol == 1e-9 and cfg.nodes_per_unit == 64
    assert cfg.build_equation().to_config() == EquationSpec.allen_cahn().to_config()
