import json

import numpy as np
import pytest

from hamport.cli import ScenarioConfig, main
from hamport.diagnostics import assess_trajectories
from hamport.discretize import read_matrix_dump
from hamport.errors import ConfigError
from hamport.simulate import load_trajectory

SIM_INI = """\
[model]
preset = string_linear_pd

[grid]
n = 24
dt = 0.05
T = 3

[disturbance]
kind = windowed_noise  # seeded noise path
amplitude = 0.4
window = 1.0

[ensemble]
count = 3
seed = 5

[analyses]
run = simulate
epsilon = 0.5
"""


def write(tmp_path, text, name="scenario.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_roundtrip():
    cfg = ScenarioConfig.from_string(SIM_INI, "a.ini")
    again = ScenarioConfig.from_string(cfg.to_ini(), "b.ini")
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()
    assert cfg.get("disturbance", "kind") == "windowed_noise"
    assert cfg.get("grid", "T") == 3.0


def test_config_inline_arrays_roundtrip():
    text = ("[model]\nplant = inline\nP0 = [[0, 0], [0, 0]]\nP1 = [[0, 1], [1, 0]]\n"
            "W_B1 = [[0, 0, 1, 0]]\nW_B2 = [[0, 1, 0, 0]]\nW_C = [[1, 0, 0, 0]]\n"
            "H = [[1, 0], [0, 1]]\n[controller]\nname = linear_pd\nS_c = 2.5\n")
    cfg = ScenarioConfig.from_string(text)
    assert ScenarioConfig.from_string(cfg.to_ini()) == cfg


def test_unknown_key_reports_line():
    text = "[model]\npreset = string_linear_pd\n\n[grid]\nn = 20\nsteps = 4\n"
    with pytest.raises(ConfigError, match=r"x\.ini:6: unknown key 'steps'"):
        ScenarioConfig.from_string(text, "x.ini")


def test_unknown_section_and_bad_value():
    with pytest.raises(ConfigError, match="unknown section"):
        ScenarioConfig.from_string("[mesh]\nn = 3\n")
    with pytest.raises(ConfigError, match=r":4: \[grid\] n"):
        ScenarioConfig.from_string("[model]\npreset = string_linear_pd\n[grid]\nn = many\n")


def test_overrides():
    cfg = ScenarioConfig.from_string(SIM_INI).with_overrides(["grid.n=30", "controller.S_c=2"])
    assert cfg.get("grid", "n") == 30
    assert cfg.get("controller", "S_c") == 2.0
    with pytest.raises(ConfigError):
        cfg.with_overrides(["grid.cells=3"])
    with pytest.raises(ConfigError):
        cfg.with_overrides(["nonsense"])


def test_conditions_pass_exit_zero(tmp_path, capsys):
    p = write(tmp_path, "[model]\npreset = string_linear_pd\n[analyses]\nrun = conditions\n")
    out = tmp_path / "out"
    assert main(["--config", str(p), "--out", str(out)]) == 0
    rep = json.loads((out / "conditions.json").read_text())
    assert rep["derived"]["overall"]["status"] == "pass"
    assert "exit status 0" in capsys.readouterr().out


def test_negative_feedthrough_exit_two(tmp_path, capsys):
    p = write(tmp_path, "[model]\npreset = string_linear_pd\n")
    out = tmp_path / "out"
    code = main(["--config", str(p), "--out", str(out), "--analyses", "conditions",
                 "--override", "controller.S_c=-1"])
    assert code == 2
    rep = json.loads((out / "conditions.json").read_text())
    v = rep["verdicts"]["feedthrough_positive"]
    assert v["status"] == "fail"
    assert v["constants"]["varsigma"] == -1.0
    assert v["witness"] == {"u": [1.0], "uSu": -1.0}
    assert "FAIL" in capsys.readouterr().out


def test_malformed_config_exit_one(tmp_path, capsys):
    p = write(tmp_path, "[model]\npreset = string_linear_pd\nrho = abc\n")
    assert main(["--config", str(p), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "scenario.ini:3" in err and "rho" in err
    assert main(["--config", str(tmp_path / "missing.ini")]) == 1


def test_simulate_artifacts_and_determinism(tmp_path):
    p = write(tmp_path, SIM_INI)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(p), "--out", str(a), "--seed", "7", "--jobs", "2"]) == 0
    assert main(["--config", str(p), "--out", str(b), "--seed", "7", "--jobs", "1"]) == 0
    files = sorted(f.name for f in a.iterdir())
    assert files == sorted(f.name for f in b.iterdir())
    assert {"traj_0.csv", "traj_2.csv", "traj_0_energy.csv", "stability.json"} <= set(files)
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_stability_json_reproducible_from_files(tmp_path):
    p = write(tmp_path, SIM_INI)
    out = tmp_path / "o"
    assert main(["--config", str(p), "--out", str(out)]) == 0
    stab = json.loads((out / "stability.json").read_text())
    trajs = [load_trajectory(out / f"traj_{i}.csv", out / f"traj_{i}_energy.csv")
             for i in range(3)]
    rep = assess_trajectories(trajs, 1.0, stab["epsilon"])
    assert rep.dissipation_max_residual == stab["dissipation_max_residual"]
    assert rep.ugs_margin == stab["ugs_margin"]
    assert rep.convergence_times == stab["convergence_times"]
    assert rep.verdicts == stab["verdicts"]


def test_matrix_dump_option(tmp_path):
    p = write(tmp_path, SIM_INI + "\n[output]\ndump_matrices = true\n")
    out = tmp_path / "o"
    assert main(["--config", str(p), "--out", str(out), "--override", "ensemble.count=1"]) == 0
    mats = read_matrix_dump(out / "matrices.txt")
    assert mats["A_d"].shape == (24 * 2 + 2, 24 * 2 + 2)
    assert np.all(np.diag(mats["M"]) > 0)


def test_seed_changes_noise(tmp_path):
    p = write(tmp_path, SIM_INI.replace("count = 3", "count = 1").replace("seed = 5\n", ""))
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--config", str(p), "--out", str(a), "--seed", "1"])
    main(["--config", str(p), "--out", str(b), "--seed", "2"])
    assert (a / "traj_0.csv").read_bytes() != (b / "traj_0.csv").read_bytes()
