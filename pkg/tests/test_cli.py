import csv
import json

import numpy as np
import pytest

from chdbc.cli import main
from chdbc.config import ConfigError, RunConfig, initial_field, parse_config
from chdbc.assembly import assemble, weighted_mass
from chdbc.io import read_checkpoint
from chdbc.mesh import load_mesh

BASE = """
[mesh]
kind = "disk"
n_boundary = 16
refinement = 0

[model]
beta = 1.5
L = 0.5
tau = 0.01
t_end = 0.2

[study]
L_grid = [0.1, 0.01]
T_star = 0.1
sample_every = 5

[omega]
t_max = 0.5

[stationary]
starts = 2

[ineq]
samples = 100
L_grid = [0.0, 0.01, 1.0]
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(BASE)
    return path


def _rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_sha256=") and "version=" in lines[0]
    return list(csv.DictReader(lines[1:]))


def test_simulate_outputs(config, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--out", str(out), "-q"]) == 0
    rows = _rows(out / "trajectory.csv")
    assert list(rows[0]) == ["t", "energy", "mass", "dissipation_rate", "velocity_dual_norm", "newton_iters"]
    assert len(rows) == 21
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mass_drift"] <= 1e-10
    assert summary["u_min"] <= summary["u_max"]
    assert (out / "final.chk").exists() and (out / "checkpoints" / "state_00000000.chk").exists()
    energies = [float(r["energy"]) for r in rows]
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))


def test_constant_datum_gives_constant_energy(config, tmp_path):
    # with equal potentials a constant is stationary only for beta = 1 (or a zero of F')
    config.write_text(BASE.replace("beta = 1.5", "beta = 1.0") + '\n[initial]\nkind = "constant"\nvalue = 0.3\n')
    out = tmp_path / "c"
    assert main(["simulate", str(config), "--out", str(out), "-q"]) == 0
    energies = {r["energy"] for r in _rows(out / "trajectory.csv")}
    assert len(energies) == 1


def test_every_subcommand_runs(config, tmp_path):
    expected = {
        "limit-study": "limit_study.csv",
        "omega-limit": "omega_limit.csv",
        "stationary": "stationary.csv",
        "ineq-scan": "ineq_scan.csv",
        "mesh-gen": "mesh_stats.csv",
    }
    for cmd, name in expected.items():
        out = tmp_path / cmd
        assert main([cmd, "--config", str(config), "--out", str(out), "-q"]) == 0, cmd
        assert _rows(out / name)
        assert json.loads((out / "summary.json").read_text())["command"] == cmd
    summary = json.loads((tmp_path / "limit-study" / "summary.json").read_text())
    assert "fitted_order" in summary
    assert len(_rows(tmp_path / "ineq-scan" / "ineq_scan.csv")) == 300
    assert json.loads((tmp_path / "ineq-scan" / "summary.json").read_text())["max_ratio"] > 0
    pt = read_checkpoint(tmp_path / "stationary" / "stationary_000.chk")
    assert pt.lam is not None


def test_mesh_gen_round_trip(tmp_path):
    cfg = tmp_path / "m.toml"
    cfg.write_text('[mesh]\nkind = "disk"\nradius = 1.0\nn_boundary = 64\nrefinement = 1\n')
    assert main(["mesh-gen", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    mesh = load_mesh(tmp_path / "o" / "mesh.txt")
    assert mesh.n_boundary == 128


def test_limit_study_is_deterministic(config, tmp_path):
    for k in (1, 2):
        assert main(["limit-study", str(config), "--seed", "7", "--threads", "1", "--out", str(tmp_path / str(k)), "-q"]) == 0
    assert (tmp_path / "1" / "limit_study.csv").read_bytes() == (tmp_path / "2" / "limit_study.csv").read_bytes()
    assert main(["limit-study", str(config), "--seed", "8", "--out", str(tmp_path / "3"), "-q"]) == 0
    assert (tmp_path / "3" / "limit_study.csv").read_bytes() != (tmp_path / "1" / "limit_study.csv").read_bytes()


@pytest.mark.parametrize(
    "extra",
    [
        '[mesh]\nkind = "file"\npath = "missing.txt"\n',
        "[model]\nbogus = 1\n",
        "[nonsense]\n",
        "[model]\ntau = -1.0\n",
        "[model]\nL = \"big\"\n",
        "[model]\npotential = { f1 = [1, 0, -1, 0, 1] }\n",
        "[ineq]\nL_grid = []\n",
        "not toml at all [",
    ],
)
def test_config_errors_exit_2_without_outputs(tmp_path, extra):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(extra)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "-q"]) == 2
    assert not out.exists()


def test_missing_config_and_bad_flags(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(tmp_path / "none.toml"), "--out", str(out)]) == 2
    assert main(["simulate", "--threads", "0", "--out", str(out)]) == 2
    assert not out.exists()


def test_numerical_failure_exits_3_and_keeps_checkpoint(tmp_path):
    cfg = tmp_path / "f.toml"
    cfg.write_text(
        '[mesh]\nn_boundary = 12\nrefinement = 0\n'
        '[model]\ntau = 1.0\nt_end = 3.0\n'
        '[initial]\namplitude = 3.0\n'
        '[solver]\nnewton_max_iter = 1\nnewton_tol = 1e-15\n'
        '[output]\ncheckpoint_every = 1\n'
    )
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "--out", str(out), "-q"]) == 3
    assert (out / "checkpoints" / "state_00000000.chk").exists()
    assert json.loads((out / "summary.json").read_text())["status"].startswith("failed")


def test_random_datum_hits_target_mass():
    cfg = parse_config({"initial": {"kind": "random", "mean": 0.25, "amplitude": 0.5, "seed": 3},
                        "mesh": {"n_boundary": 16, "refinement": 0}, "model": {"beta": 2.0}})
    ops = assemble(cfg.build_mesh())
    u = initial_field(cfg, ops)
    target = 0.25 * (2.0 * ops.mesh.bulk_area + ops.mesh.boundary_length)
    assert weighted_mass(ops, u, 2.0) == pytest.approx(target, abs=1e-13)
    assert np.array_equal(u, initial_field(cfg, ops))


def test_config_digest_and_seed():
    a = parse_config({})
    assert isinstance(a, RunConfig)
    assert a.digest() == parse_config({}).digest()
    assert a.with_seed(5).digest() != a.digest()
    with pytest.raises(ConfigError):
        parse_config({"model": {"tau": 2.0, "t_end": 1.0}})
