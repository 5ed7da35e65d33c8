import json

import pytest

from minksob.cli import RunConfig, UsageError, main, parse_config


def _run(tmp_path, *args):
    out = tmp_path / "out.txt"
    code = main([*args, "--out", str(out)])
    return code, out.read_text() if out.exists() else None


def test_verify_flat(tmp_path):
    code, text = _run(tmp_path, "verify", "--variant", "thm1.1", "--surface", "flat_disk:n=2,R=1,h=0.05",
                      "--density", "constant:1")
    assert code == 0
    assert json.loads(text)["ratio"] == pytest.approx(3**0.5, rel=0.01)


def test_verify_hypothesis_violation(tmp_path):
    code, _ = _run(tmp_path, "verify", "--variant", "thm1.1", "--surface", "spacelike_graph:eps=0.3,w=2")
    assert code == 2


@pytest.mark.parametrize("args", [
    ["verify", "--surface", "flat_disk:R"],
    ["verify", "--surface", "blob:1"],
    ["verify", "--variant", "thm7"],
    ["volume", "--r"],
    ["volume", "--r", "1,x"],
    ["frobnicate"],
    ["verify", "--variant", "thm1.3", "--surface", "flat_disk"],
])
def test_usage_errors(tmp_path, args):
    assert main(args) == 64


def test_volume_csv(tmp_path):
    code, text = _run(tmp_path, "volume", "--surface", "flat_disk", "--r", "10", "20", "--samples", "5000")
    lines = text.strip().splitlines()
    assert code == 0
    assert lines[0].startswith("r,estimate,ci_low,ci_high,samples,seed")
    assert len(lines) == 4 and lines[-1].startswith("inf")


def test_fuzz_zero_trials(tmp_path):
    code, text = _run(tmp_path, "fuzz", "--variant", "thm1.2", "--trials", "0")
    assert code == 0 and json.loads(text) == []


def test_deterministic_outputs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    args = ["fuzz", "--variant", "thm1.2", "--trials", "3", "--seed", "7", "--resolution", "0.1"]
    assert _run(a, *args) == _run(b, *args)
    vol = ["volume", "--surface", "hyperboloid_cap", "--variant", "thm1.2", "--r", "5", "--samples", "4000"]
    assert _run(a, *vol) == _run(b, *vol)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"variant": "thm1.2", "surface": "hyperboloid_cap", "r": [5, 10], "samples": 100}))
    config = parse_config(["volume", "--config", str(cfg), "--samples", "200"])
    assert config.variant == "thm1.2" and config.r == [5.0, 10.0] and config.samples == 200
    assert RunConfig.from_dict(config.to_dict()) == config
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["verify", "--config", str(cfg)]) == 64


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig("volume", r=[])


def test_mesh_and_solve_dumps(tmp_path):
    code, text = _run(tmp_path, "mesh", "--surface", "flat_disk:h=0.2")
    assert code == 0 and set(json.loads(text)) == {"n", "m", "vertices", "simplices"}
    code, text = _run(tmp_path, "solve", "--surface", "flat_disk:h=0.2")
    assert code == 0 and json.loads(text)["lambda"] == pytest.approx(1.0, rel=0.05)
