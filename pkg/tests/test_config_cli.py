import json
import subprocess
import sys

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from aqclab.cli import main, run_config
from aqclab.config import KINDS, ConfigError, ExperimentConfig, build_family
from aqclab.gaps import gap_sweep
from aqclab.io import read_csv, sha256
from aqclab.builders import gh1_family, separable_pair

SAT_CNF = """c small satisfiable instance
p cnf 5 6
1 -2 3 0
-1 2 4 0
2 3 -5 0
-3 4 5 0
1 -4 -5 0
-2 -3 4 0
"""


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- config -------------------------------------------------------------------------------

def test_config_yaml_round_trip():
    cfg = ExperimentConfig(kind="gh1-search", n=6, target=3, seed=2**63, grid=41)
    text = cfg.to_yaml()
    again = ExperimentConfig.from_yaml(text)
    assert again == cfg
    assert again.to_yaml() == text


configs = st.builds(
    ExperimentConfig,
    kind=st.sampled_from(["separable", "grover-search", "gh1-search", "shift-search"]),
    n=st.integers(1, 24), seed=st.integers(0, 2**64 - 1), grid=st.integers(3, 500),
    tol=st.floats(1e-14, 1e-2), threads=st.integers(1, 8),
    target=st.one_of(st.none(), st.integers(0, 1)))


@given(configs)
def test_serialization_is_idempotent(cfg):
    once = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert once == cfg
    assert ExperimentConfig.from_yaml(once.to_yaml()).to_yaml() == once.to_yaml()


def test_validation_lists_every_bad_field():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"kind": "evolve", "n": 99, "grid": 1, "f_star": 2.0})
    assert set(info.value.fields) >= {"n", "grid", "f_star", "family", "T"}


def test_unknown_and_missing_fields():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"kind": "separable", "n": 3, "colour": "red"})
    assert info.value.fields == ["colour"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml("kind: [unclosed")


def test_sat_family_needs_instance():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig(kind="sat-gap", n=5)
    assert "clauses" in info.value.fields


def test_build_family_variants(tmp_path):
    (tmp_path / "f.cnf").write_text(SAT_CNF)
    fam = build_family(ExperimentConfig(kind="sat-gap", cnf=str(tmp_path / "f.cnf")))
    assert fam.n == 5 and fam.h1.diag.min() == 0
    fam = build_family(ExperimentConfig(kind="random-final", n=4, target=3, law=[1, 4]))
    assert fam.h1.diag[3] == 0 and fam.target == 3
    fam = build_family(ExperimentConfig(kind="shift-search", n=3, base="sat", clauses=5,
                                        target=1))
    assert fam.h1.diag[1] == 0
    with pytest.raises(ConfigError):
        build_family(ExperimentConfig(kind="grover-search", n=3, couplings=[1, 1]))


# -- CLI -------------------------------------------------------------------------------------

def test_separable_run_writes_manifest(tmp_path, capsys):
    out = tmp_path / "sep"
    code, stdout, _ = run(["separable", "--n", 8, "--grid", 21, "--out", out], capsys)
    assert code == 0
    assert json.loads(stdout)["status"] == "ok"
    header, rows = read_csv(out / "profile.csv")
    gaps = np.array([float(r[header.index("gap")]) for r in rows])
    assert abs(gaps.min() - 0.5**0.5) <= 1e-4
    m = json.loads((out / "manifest.json").read_text())
    assert {"config", "versions", "seeds", "wall_time_s", "outputs"} <= set(m)
    for name in ("profile.csv", "profile.json", "closed_form.csv", "config.yaml"):
        assert m["outputs"][name]["sha256"] == sha256(out / name)
    assert ExperimentConfig.load(out / "config.yaml").to_dict() == m["config"]


def test_every_float_artifact_is_in_manifest(tmp_path, capsys):
    out = tmp_path / "gh1"
    assert run(["gh1-search", "--n", 5, "--grid", 21, "--out", out], capsys)[0] == 0
    listed = set(json.loads((out / "manifest.json").read_text())["outputs"])
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert on_disk == listed


def test_sat_gap_with_cnf(tmp_path, capsys):
    cnf = tmp_path / "inst.cnf"
    cnf.write_text(SAT_CNF)
    out = tmp_path / "sat"
    code, _, _ = run(["sat-gap", "--cnf", cnf, "--grid", 11, "--out", out], capsys)
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["summary"]["min_energy"] == 0
    assert m["summary"]["variables"] == 5


def test_config_file_with_relative_cnf(tmp_path, capsys):
    (tmp_path / "inst.cnf").write_text(SAT_CNF)
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"kind": "sat-gap", "cnf": "inst.cnf", "grid": 5}))
    assert run(["run", "--config", cfg, "--out", tmp_path / "o"], capsys)[0] == 0


def test_rerun_is_bit_identical(tmp_path, capsys):
    hashes = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        argv = ["sat-gap", "--n", 6, "--clauses", 20, "--seed", 11, "--grid", 11, "--out", out]
        assert run(argv, capsys)[0] == 0
        m = json.loads((out / "manifest.json").read_text())
        hashes.append({k: v["sha256"] for k, v in m["outputs"].items()})
    assert hashes[0] == hashes[1]


def test_compare_profiles_cli(tmp_path, capsys):
    a = gap_sweep(separable_pair(6), 11).to_json(tmp_path / "a.json")
    b = gap_sweep(gh1_family(separable_pair(6), 0), 11).to_json(tmp_path / "b.json")
    code, stdout, _ = run(["compare", a, a], capsys)
    assert code == 0 and json.loads(stdout)["max_abs_difference"] == 0
    code, _, _ = run(["compare", a, b, "--out", tmp_path / "r.json"], capsys)
    assert json.loads((tmp_path / "r.json").read_text())["g_min_ratio"] > 1


def test_compare_grid_mismatch(tmp_path, capsys):
    a = gap_sweep(separable_pair(3), 11).to_json(tmp_path / "a.json")
    b = gap_sweep(separable_pair(3), 21).to_json(tmp_path / "b.json")
    code, _, err = run(["compare", a, b], capsys)
    assert code == 2 and "different grids" in json.loads(err)["message"]


@pytest.mark.parametrize("argv, code, fields", [
    (["evolve", "--n", 3], 2, ["T", "family"]),
    (["separable", "--n", 40], 2, ["n"]),
    (["sat-gap", "--cnf", "/nonexistent.cnf"], 2, ["cnf"]),
])
def test_usage_errors(tmp_path, capsys, argv, code, fields):
    out = tmp_path / "err"
    got, _, err = run(argv + ["--out", out], capsys)
    rec = json.loads(err)
    assert got == code and rec["status"] == "error"
    assert set(fields) <= set(rec["fields"])
    assert json.loads((out / "error.json").read_text()) == rec


def test_format_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 3 1\n1 1 2 0\n")
    code, _, err = run(["sat-gap", "--cnf", bad, "--out", tmp_path / "o"], capsys)
    assert code == 4 and json.loads(err)["line"] == 2


def test_solver_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"kind": "evolve", "family": "grover", "n": 4, "T": 50.0,
                                   "evolve_tol": 1e-300}))
    code, _, err = run(["run", "--config", cfg, "--out", tmp_path / "o"], capsys)
    # step size collapses before reaching the requested accuracy
    assert code == 3 and json.loads(err)["type"] == "IntegratorError"


def test_kind_mismatch(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"kind": "separable", "n": 3}))
    code, _, err = run(["grover-search", "--config", cfg], capsys)
    assert code == 2 and json.loads(err)["fields"] == ["kind"]


def test_every_kind_has_a_subcommand():
    from aqclab.cli import build_parser
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(KINDS) | {"run", "compare"} == set(sub)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "aqclab.cli", "separable", "--n", "2", "--grid",
                           "5", "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "manifest.json").exists()


def test_run_config_returns_manifest(tmp_path):
    m = run_config(ExperimentConfig(kind="grover-search", n=4, grid=11), tmp_path / "g")
    assert m["status"] == "ok" and m["seeds"] == {"seed": 0}
