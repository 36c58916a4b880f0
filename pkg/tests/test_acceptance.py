"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the
"acceptance criteria" section of the terminal summary (and on stdout with
``-s``).  Numbers in each line are the measured quantities.
"""
import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import ACCEPTANCE_LINES

from chdbc.assembly import assemble, coupling_form, pair_mass, pair_stiffness
from chdbc.cli import main as cli_main
from chdbc.dynlab import interpolation_scan, omega_limit, smoothing_probe
from chdbc.elliptic import build_sl, dual_norm, sigma_of, solve_sl
from chdbc.mesh import generate_disk, generate_rectangle, generate_square
from chdbc.potentials import PotentialPair, double_well
from chdbc.stationary import solve_stationary, stationarity_residual
from chdbc.stepper import ModelParams, make_system, run, step

DATA = Path(__file__).parent / "data"
POTS = PotentialPair.same(double_well())


def report(number, title, passed, detail):
    line = "criterion %d %s  %s: %s" % (number, "PASS" if passed else "FAIL", title, detail)
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def disk():
    """1345-node disk used for the time-dependent criteria."""
    return assemble(generate_disk(1.0, 64, 1))


def _random_datum(ops, seed, mean=0.0, amplitude=0.3):
    return mean + amplitude * np.random.default_rng(seed).uniform(-1.0, 1.0, ops.n_nodes)


# ---------------------------------------------------------------------------


def test_criterion_1_mass_conservation(disk):
    start = time.perf_counter()
    worst = 0.0
    for beta in (1.0, 2.0):
        for L in (0.0, 1e-2, 1.0):
            sys_ = make_system(disk, POTS, ModelParams(beta, L, 1e-3))
            u0 = _random_datum(disk, 1, mean=0.2)
            lg = run(sys_, u0, 1.0)
            assert len(lg.reports) == 1000
            m = lg.masses
            worst = max(worst, float(np.max(np.abs(m - m[0])) / abs(m[0])))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 120
    report(1, "mass conservation", ok, "max relative drift %.2e over 6 x 1000 steps (<= 1e-10), %.0f s (< 120 s)"
           % (worst, elapsed))
    assert ok


def test_criterion_2_energy_dissipation(disk):
    worst_rise, worst_budget, n_runs = -np.inf, -np.inf, 0
    for tau in (1e-4, 1e-3, 1e-2):
        for L in (0.0, 1.0):
            sys_ = make_system(disk, POTS, ModelParams(1.0, L, tau))
            lg = run(sys_, _random_datum(disk, 2), 200 * tau)
            e = lg.energies
            worst_rise = max(worst_rise, float(np.max(np.diff(e))))
            dissipated = tau * sum(r.dissipation_rate for r in lg.reports)
            steps = len(lg.reports)
            worst_budget = max(worst_budget, dissipated - (e[0] - e[-1]) - 1e-8 * steps)
            n_runs += 1
    ok = worst_rise <= 1e-10 and worst_budget <= 0
    report(2, "energy dissipation", ok, "largest step energy change %.2e (<= 1e-10); "
           "tau*sum(diss) - (E0-Eend) - 1e-8*steps = %.2e (<= 0) over %d runs" % (worst_rise, worst_budget, n_runs))
    assert ok


def _dense_sl_oracle(ops, beta, L, phi, psi):
    n, nb = ops.n_nodes, ops.n_boundary
    A = (pair_stiffness(ops) + coupling_form(ops, sigma_of(L), beta)).toarray()
    B = pair_mass(ops).toarray()
    Z = sla.null_space(np.hstack([ops.T.toarray(), -beta * np.eye(nb)])) if L == 0 else np.eye(n + nb)
    s = Z @ np.linalg.pinv(Z.T @ A @ Z, rcond=1e-12) @ (-Z.T @ B @ np.concatenate([phi, psi]))
    kernel = np.concatenate([np.full(n, beta), np.ones(nb)])
    w = np.concatenate([beta * ops.M_bulk_lumped, ops.M_surf_lumped])
    s -= (w @ s) / (w @ kernel) * kernel
    return s, np.sqrt(-np.concatenate([phi, psi]) @ B @ s)


def test_criterion_3_sl_oracle():
    rng = np.random.default_rng(3)
    worst_sol, worst_norm, cases = 0.0, 0.0, 0
    for mesh in (generate_disk(1.0, 12, 0), generate_square(1.0, 6)):
        ops = assemble(mesh)
        assert ops.n_nodes <= 50
        for beta in (1.0, 2.0):
            for L in (0.0, 0.5, 1.0):
                sl = build_sl(ops, beta, L)
                for _ in range(5):
                    phi, psi = rng.standard_normal(ops.n_nodes), rng.standard_normal(ops.n_boundary)
                    shift = sl.mean(phi, psi) / (beta * ops.mesh.bulk_area + ops.mesh.boundary_length)
                    phi, psi = phi - shift, psi - shift
                    mu, theta = solve_sl(sl, phi, psi)
                    s, nrm = _dense_sl_oracle(ops, beta, L, phi, psi)
                    err = np.max(np.abs(np.concatenate([mu, theta]) - s)) / np.max(np.abs(s))
                    worst_sol = max(worst_sol, err)
                    worst_norm = max(worst_norm, abs(dual_norm(sl, phi, psi) - nrm) / nrm)
                    cases += 1
    ok = worst_sol <= 1e-10 and worst_norm <= 1e-10
    report(3, "S^L oracle equivalence", ok, "%d cases, max relative solution error %.1e, dual-norm error %.1e (<= 1e-10)"
           % (cases, worst_sol, worst_norm))
    assert ok


def test_criterion_4_uniform_interpolation_constant():
    stored = json.loads((DATA / "interpolation_constant.json").read_text())
    ops = assemble(generate_disk(**stored["mesh"]))
    details, ok = [], True
    for beta in (1.0, 2.0):
        c_hat = stored["constants"][repr(beta)]
        scans = [interpolation_scan(ops, beta, [0.0, 1e-2, 1.0], samples=100, seed=seed) for seed in (11, 12, 13)]
        top = max(sc.max_ratio for sc in scans)
        spread = max(sc.spread for sc in scans)
        ok &= spread < 10.0 and top <= 1.05 * c_hat
        details.append("beta=%g: max %.4f vs stored %.4f, spread across L %.3f" % (beta, top, c_hat, spread))
    report(4, "uniform interpolation constant", ok, "; ".join(details) + " (spread < 10, max <= 1.05 x stored)")
    assert ok


def test_criterion_5_stationary_set(disk):
    sys_ = make_system(disk, POTS, ModelParams(1.0, 1.0, 1e-2))
    meas = disk.mesh.bulk_area + disk.mesh.boundary_length
    worst_res, worst_lam = 0.0, 0.0
    points = []
    for c in (-1.0, -0.6, -0.2, 0.0, 0.3, 0.7, 1.0):
        guess = c + 0.01 * np.sin(3 * disk.mesh.nodes[:, 0])
        pt = solve_stationary(sys_, guess, c * meas, tol=1e-13)
        assert np.max(np.abs(pt.field - c)) < 1e-10
        worst_res = max(worst_res, pt.residual_norm, stationarity_residual(sys_, pt.field))
        worst_lam = max(worst_lam, abs(pt.lam - (c**3 - c)))
        points.append((sys_, pt))
    # nonconstant points on a two-phase domain, with nonzero multiplier
    slab = assemble(generate_rectangle(4.0, 2.0, 32, 16))
    slab_sys = make_system(slab, POTS, ModelParams(1.0, 1.0, 0.1))
    x = slab.mesh.nodes[:, 0]
    for shift in (0.0, 0.2):
        points.append((slab_sys, solve_stationary(slab_sys, shift + np.tanh((x - 2.0) / np.sqrt(2)))))
    worst_fixed = 0.0
    for base, pt in points:
        for L in (0.0, 1e-2, 1.0):
            moved = step(base.with_params(L=L), pt.field).u
            worst_fixed = max(worst_fixed, float(np.max(np.abs(moved - pt.field))))
    ok = worst_res <= 1e-12 and worst_lam <= 1e-12 and worst_fixed <= 1e-9
    report(5, "stationary set", ok, "constants: residual %.1e (<= 1e-12), |lambda - F'(c)| %.1e; "
           "stepper fixed-point error %.1e over %d points x 3 L (<= 1e-9)"
           % (worst_res, worst_lam, worst_fixed, len(points)))
    assert ok


def test_criterion_6_omega_limit():
    start = time.perf_counter()
    ops = assemble(generate_rectangle(4.0, 2.0, 32, 16))
    sys_ = make_system(ops, POTS, ModelParams(1.0, 1.0, 0.1))
    plateaued, worst_dist, t_last, fixed = 0, 0.0, 0.0, 0.0
    for seed in range(5):
        res = omega_limit(sys_, _random_datum(ops, seed), stop_threshold=1e-9, t_max=200.0)
        if res.converged:
            plateaued += 1
            worst_dist = max(worst_dist, res.distance_L2)
            t_last = max(t_last, res.t_final)
            assert np.all(np.diff(res.energy_history) <= 1e-10)
            for L in (0.0, 1e-2):
                moved = step(sys_.with_params(L=L), res.matched_stationary.field).u
                fixed = max(fixed, float(np.max(np.abs(moved - res.matched_stationary.field))))
    elapsed = time.perf_counter() - start
    ok = plateaued == 5 and worst_dist <= 1e-6 and elapsed < 600
    detail = "%d/5 seeds reached velocity <= 1e-9 by t = %.1f (<= 200); max L2 distance to refined point %.1e (<= 1e-6); " \
             "refined points fixed to %.1e; %.0f s (< 600 s)" % (plateaued, t_last, worst_dist, fixed, elapsed)
    if plateaued < 5:
        # no rate is available for this convergence, so a missing plateau is reported rather than asserted
        report(6, "omega-limit convergence", False, detail + " [non-plateau reported]")
    else:
        report(6, "omega-limit convergence", ok, detail)
    assert worst_dist <= 1e-6 and elapsed < 600


LIMIT_CONFIG = """
[mesh]
kind = "disk"
radius = 1.0
n_boundary = 64
refinement = 1

[model]
beta = 1.0
tau = 1e-3

[initial]
kind = "random"
mean = 0.0
amplitude = 0.3

[study]
L_grid = [1e-1, 1e-2, 1e-3, 1e-4]
T_star = 1.0
sample_every = 10
"""


@pytest.fixture(scope="module")
def limit_runs(tmp_path_factory):
    """Two identical single-thread limit studies through the command line."""
    root = tmp_path_factory.mktemp("limit")
    cfg = root / "limit.toml"
    cfg.write_text(LIMIT_CONFIG)
    outs, times = [], []
    for k in (1, 2):
        out = root / ("run%d" % k)
        t0 = time.perf_counter()
        assert cli_main(["limit-study", "--config", str(cfg), "--seed", "2024", "--threads", "1",
                         "--out", str(out), "-q"]) == 0
        times.append(time.perf_counter() - t0)
        outs.append(out)
    return outs, times


def test_criterion_7_L_to_zero(limit_runs):
    outs, times = limit_runs
    summary = json.loads((outs[0] / "summary.json").read_text())
    e2 = summary["errors_L2"]
    decreasing = all(b < a for a, b in zip(e2, e2[1:]))
    with open(outs[0] / "limit_study.csv") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    assert len(rows) == 4 * 101
    ok = decreasing and summary["fitted_order_L2"] >= 0.25 and summary["fitted_order_H1"] >= 1 / 6 and times[0] < 300
    report(7, "L -> 0 robustness", ok, "L2 errors %s (strictly decreasing: %s); fitted order L2 %.3f (>= 0.25), "
           "H1 %.3f (>= 1/6); %.0f s (< 300 s)" % (", ".join("%.2e" % e for e in e2), decreasing,
                                                    summary["fitted_order_L2"], summary["fitted_order_H1"], times[0]))
    assert ok


def test_criterion_8_smoothing(disk):
    sys_ = make_system(disk, POTS, ModelParams(1.0, 1.0, 1e-2))
    details, ok = [], True
    for seed in (21, 22, 23):
        rough = np.random.default_rng(seed).uniform(-1.0, 1.0, disk.n_nodes)
        probe = smoothing_probe(sys_, rough, t_end=10.0, t_min=0.1, sample_every=1)
        ok &= probe.bounded
        w = probe.weighted[probe.window]
        details.append("seed %d: C* = %.3g (at t=0.1: %.3g)" % (seed, probe.constant, w[0]))
    report(8, "smoothing", ok, "; ".join(details) + " (weighted H2 proxy on [0.1, 10] within 10x its t=0.1 value)")
    assert ok


def test_criterion_9_determinism(limit_runs):
    outs, _ = limit_runs
    a = (outs[0] / "limit_study.csv").read_bytes()
    b = (outs[1] / "limit_study.csv").read_bytes()
    ok = a == b and len(a) > 0
    report(9, "determinism", ok, "two single-thread limit studies with seed 2024: CSVs bit-identical = %s (%d bytes)"
           % (a == b, len(a)))
    assert ok
