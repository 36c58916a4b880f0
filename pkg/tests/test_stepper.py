import numpy as np
import pytest

from chdbc.assembly import weighted_mass
from chdbc.dynlab import l2_norm
from chdbc.elliptic import energy, lb_inner_norm
from chdbc.potentials import PotentialPair, quadratic_well
from chdbc.stepper import (
    ModelParams,
    NewtonError,
    NewtonSettings,
    make_system,
    run,
    step,
    velocity_dual_norm,
)


def _datum(ops, seed=0, mean=0.1, amp=0.4):
    return mean + amp * np.random.default_rng(seed).uniform(-1, 1, ops.n_nodes)


@pytest.mark.parametrize("L", [0.0, 1e-2, 1.0])
@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_single_step_laws(disk_ops, dw_pair, L, beta):
    sys_ = make_system(disk_ops, dw_pair, ModelParams(beta, L, 1e-2))
    u0 = _datum(disk_ops)
    res = step(sys_, u0)
    rep = res.report
    m0 = weighted_mass(disk_ops, u0, beta)
    assert abs(rep.weighted_mass - m0) <= 1e-12 * max(1, abs(m0))
    assert rep.energy_after + sys_.tau * rep.dissipation_rate <= rep.energy_before + 1e-10
    assert rep.newton_residual <= 1e-12 or rep.newton_iters < sys_.newton.max_iter
    # the reduced potential reproduces the stored pair
    norm = lb_inner_norm(disk_ops, res.mu, res.theta, beta, 0.0 if L == 0 else 1 / L)
    assert norm**2 == pytest.approx(rep.dissipation_rate, rel=1e-10)
    if L == 0:
        np.testing.assert_allclose(disk_ops.trace(res.mu), beta * res.theta, rtol=0, atol=1e-13)


@pytest.mark.parametrize("L", [0.0, 0.5])
def test_velocity_norm_equals_dissipation_norm(disk_ops, dw_pair, L):
    sys_ = make_system(disk_ops, dw_pair, ModelParams(1.5, L, 5e-3))
    u0 = _datum(disk_ops, 3)
    res = step(sys_, u0)
    vel = velocity_dual_norm(sys_, u0, res.u)
    assert vel == pytest.approx(np.sqrt(res.report.dissipation_rate), rel=1e-8)


def test_constant_states_are_fixed(disk_ops, dw_pair):
    for c in (-1.0, 0.0, 0.35):
        sys_ = make_system(disk_ops, dw_pair, ModelParams(1.0, 1.0, 1e-1))
        u = np.full(disk_ops.n_nodes, c)
        res = step(sys_, u)
        assert np.max(np.abs(res.u - u)) < 1e-13
        assert res.report.dissipation_rate < 1e-12


def test_linear_regime_relaxes_to_mean(disk_ops):
    pots = PotentialPair.same(quadratic_well(0.0))
    sys_ = make_system(disk_ops, pots, ModelParams(1.0, 1.0, 0.5))
    u0 = _datum(disk_ops, 5, mean=0.2)
    lg = run(sys_, u0, 40.0)
    c = weighted_mass(disk_ops, u0, 1.0) / (disk_ops.mesh.bulk_area + disk_ops.mesh.boundary_length)
    assert np.max(np.abs(lg.final - c)) < 1e-6
    assert np.all(np.diff(lg.energies) <= 1e-12)


def test_first_order_in_time(square_ops, dw_pair):
    u0 = _datum(square_ops, 7, amp=0.2)
    T = 0.02

    def final(tau):
        return run(make_system(square_ops, dw_pair, ModelParams(1.0, 1.0, tau)), u0, T).final

    ref = final(T / 256)
    errs = [l2_norm(square_ops, final(T / k) - ref) for k in (4, 8, 16)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all((orders > 0.8) & (orders < 1.2)), orders


def test_small_L_tracks_locked_model(disk_ops, dw_pair):
    u0 = _datum(disk_ops, 11)
    a = run(make_system(disk_ops, dw_pair, ModelParams(1.0, 0.0, 1e-2)), u0, 0.5).final
    b = run(make_system(disk_ops, dw_pair, ModelParams(1.0, 1e-8, 1e-2)), u0, 0.5).final
    assert l2_norm(disk_ops, a - b) <= 1e-4


def test_run_observers_and_snapshots(small_ops, dw_pair):
    sys_ = make_system(small_ops, dw_pair, ModelParams(1.0, 1.0, 1e-2))
    u0 = _datum(small_ops)
    lg = run(sys_, u0, 0.1, snapshot_every=5)
    assert len(lg.times) == 10 and lg.times[-1] == pytest.approx(0.1)
    assert sorted(lg.snapshots) == pytest.approx([0.0, 0.05, 0.1])
    assert len(lg.energies) == len(lg.masses) == 11
    seen = []
    lg = run(sys_, u0, 0.1, observers=[lambda k, t, u, rep, vel: seen.append(k) or k == 3])
    assert lg.stopped_early and seen == [1, 2, 3]


def test_newton_failure_is_reported(small_ops, dw_pair):
    sys_ = make_system(small_ops, dw_pair, ModelParams(1.0, 1.0, 1.0), NewtonSettings(max_iter=1, tol=1e-15))
    with pytest.raises(NewtonError) as info:
        step(sys_, _datum(small_ops, amp=2.0))
    assert info.value.iterate is not None


def test_parameter_validation():
    for kw in (dict(beta=0.0), dict(L=-1.0), dict(tau=0.0)):
        with pytest.raises(ValueError):
            ModelParams(**kw)


def test_with_params_rebuilds(small_ops, dw_pair):
    sys_ = make_system(small_ops, dw_pair, ModelParams(1.0, 1.0, 1e-2))
    other = sys_.with_params(L=0.0)
    assert other.L == 0.0 and other.tau == sys_.tau
    assert other.n_q == small_ops.n_nodes
    assert sys_.n_q == small_ops.n_nodes + small_ops.n_boundary


def test_mass_mismatch_rejected_by_velocity(small_ops, dw_pair):
    sys_ = make_system(small_ops, dw_pair, ModelParams())
    u = _datum(small_ops)
    with pytest.raises(ValueError, match="mass"):
        velocity_dual_norm(sys_, u, u + 1.0)


def test_energy_law_over_a_run(disk_ops, dw_pair):
    sys_ = make_system(disk_ops, dw_pair, ModelParams(2.0, 1e-2, 1e-2))
    u0 = _datum(disk_ops, 2)
    lg = run(sys_, u0, 1.0)
    e = lg.energies
    assert np.all(np.diff(e) <= 1e-10)
    diss = sum(r.dissipation_rate for r in lg.reports) * sys_.tau
    assert diss <= e[0] - e[-1] + 1e-8 * len(lg.reports)
    assert energy(disk_ops, dw_pair, lg.final) == pytest.approx(e[-1])
