"""Convex-splitting implicit Euler for the bulk-surface Cahn-Hilliard system.

One step solves, for ``(u¹, q)`` with chemical potentials ``(μ, θ) = Q q``::

    Qᵀ B Tr (u¹ - u⁰) + τ Qᵀ A_L Q q                        = 0
    Trᵀ B Q q - K u¹ - M_h[F1'(u¹) + F2'(u⁰)] - Tᵀ M_h,Γ[G1'(v¹) + G2'(v⁰)] = 0

where ``Tr u = (u, u|_Γ)``, ``B`` is the pair mass, ``A_L`` the
``(·,·)_{L,β}`` form and ``M_h`` lumped masses.  Testing the first block
with the constant pair ``(β, 1)`` gives exact weighted-mass conservation;
testing with ``q`` and the second with ``u¹ - u⁰`` gives the discrete
energy law ``E(u¹) + τ‖(μ,θ)‖²_{L,β} ≤ E(u⁰)`` whenever ``F2``, ``G2`` are
concave.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FemOperators, weighted_mass
from .elliptic import SlSystem, build_sl, dual_norm, energy, project_zero_mean
from .potentials import PotentialError, PotentialPair, eval_nodal

log = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "NewtonSettings",
    "StepSystem",
    "StepReport",
    "StepResult",
    "TrajectoryLog",
    "NewtonError",
    "make_system",
    "step",
    "run",
    "velocity_dual_norm",
]


class NewtonError(RuntimeError):
    def __init__(self, msg, residual=np.nan, iterate=None):
        super().__init__(msg)
        self.residual = residual
        self.iterate = iterate


@dataclass(frozen=True)
class ModelParams:
    beta: float = 1.0
    L: float = 1.0
    tau: float = 1e-3

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.L >= 0:
            raise ValueError("L must be non-negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-12
    max_iter: int = 50
    # relative update size treated as convergence at round-off level
    step_tol: float = 1e-14
    # reuse a factorized Jacobian while it contracts the residual at least this fast
    reuse_rate: float = 0.25


@dataclass(frozen=True)
class StepReport:
    energy_before: float
    energy_after: float
    weighted_mass: float
    dissipation_rate: float
    newton_iters: int
    newton_residual: float
    dt: float


@dataclass(frozen=True)
class StepResult:
    u: np.ndarray
    mu: np.ndarray
    theta: np.ndarray
    report: StepReport
    q: np.ndarray  # reduced chemical potential, reusable as a Newton start


@dataclass
class StepSystem:
    ops: FemOperators
    pots: PotentialPair
    params: ModelParams
    newton: NewtonSettings
    sl: SlSystem
    G: sp.csr_matrix  # Qᵀ B Tr
    H: sp.csr_matrix  # Trᵀ B Q
    J0: sp.csr_matrix = field(repr=False)
    K_full: sp.csr_matrix = field(repr=False)
    J0_abs: sp.csr_matrix = field(default=None, repr=False)
    _lu: object = field(default=None, repr=False)

    @property
    def beta(self):
        return self.params.beta

    @property
    def L(self):
        return self.params.L

    @property
    def tau(self):
        return self.params.tau

    @property
    def n_q(self):
        return self.sl.n_q

    def with_params(self, **changes) -> "StepSystem":
        p = self.params
        new = ModelParams(**{**dict(beta=p.beta, L=p.L, tau=p.tau), **changes})
        return make_system(self.ops, self.pots, new, self.newton)


def make_system(ops: FemOperators, pots: PotentialPair, params: ModelParams,
                newton: NewtonSettings | None = None) -> StepSystem:
    newton = newton or NewtonSettings()
    sl = build_sl(ops, params.beta, params.L)
    n = ops.n_nodes
    Tr = sp.vstack([sp.identity(n), ops.T]).tocsr()
    G = (sl.Q.T @ sl.B @ Tr).tocsr()
    H = G.T.tocsr()
    K_full = ops.K_full
    J0 = sp.bmat([[G, params.tau * sl.Aq], [-K_full, H]], format="csr")
    return StepSystem(ops, pots, params, newton, sl, G, H, J0, K_full, abs(J0).tocsr())


def _nonlinear(sys: StepSystem, u, u_old):
    """Explicit/implicit potential terms and the diagonal of their Jacobian."""
    ops, pots = sys.ops, sys.pots
    v, v_old = ops.trace(u), ops.trace(u_old)
    bulk = ops.M_bulk_lumped * (eval_nodal(pots.F, "f1'", u) + eval_nodal(pots.F, "f2'", u_old))
    surf = ops.M_surf_lumped * (eval_nodal(pots.G, "f1'", v) + eval_nodal(pots.G, "f2'", v_old))
    d = ops.M_bulk_lumped * eval_nodal(pots.F, "f1''", u)
    ds = ops.M_surf_lumped * eval_nodal(pots.G, "f1''", v)
    val = bulk.copy()
    val[ops.mesh.boundary_nodes] += surf
    d[ops.mesh.boundary_nodes] += ds
    return val, d


def _residual(sys: StepSystem, u, q, u_old):
    nl, d = _nonlinear(sys, u, u_old)
    r1 = sys.G @ (u - u_old) + sys.tau * (sys.sl.Aq @ q)
    r2 = sys.H @ q - sys.K_full @ u - nl
    return np.concatenate([r1, r2]), d


def _roundoff_floor(sys: StepSystem, u, q, u_old):
    """Residual size that floating point cannot resolve at this iterate.

    Sums of large terms (e.g. the coupling penalty ``1/L`` for tiny ``L``)
    cancel only to a few ulps of the term magnitudes.
    """
    au = np.abs(u)
    terms = sys.J0_abs @ np.concatenate([au + np.abs(u_old), np.abs(q)])
    terms[sys.n_q:] += sys.ops.lumped_full * (au**3 + au)
    return 64 * np.finfo(float).eps * float(np.max(terms))


def _factor(sys: StepSystem, d):
    n, nq = sys.ops.n_nodes, sys.n_q
    J = sys.J0 - sp.diags(d, -nq, shape=(nq + n, n + nq), format="csr")
    try:
        sys._lu = spla.splu(J.tocsc())
    except RuntimeError as exc:
        sys._lu = None
        raise NewtonError("singular Newton matrix") from exc
    return sys._lu


def _solve_step(sys: StepSystem, u_old, q_guess=None):
    """Newton iteration for one step.

    The last factorized Jacobian is reused while it contracts the residual
    by at least ``reuse_rate`` per iteration; otherwise the Jacobian is
    rebuilt at the current iterate.  After two consecutive non-decreasing
    residuals with a fresh Jacobian, updates are damped by step halving.
    """
    n, nq = sys.ops.n_nodes, sys.n_q
    s = sys.newton
    u = u_old.copy()
    q = np.zeros(nq) if q_guess is None else q_guess.copy()
    res, d = _residual(sys, u, q, u_old)
    rnorm = np.max(np.abs(res))
    tol = max(s.tol, _roundoff_floor(sys, u, q, u_old))
    worse = 0
    damped = False
    it = 0
    fresh = False
    while rnorm > tol:
        if it >= s.max_iter:
            raise NewtonError("Newton did not converge in %d iterations (residual %.3e)" % (it, rnorm),
                              rnorm, u)
        it += 1
        if sys._lu is None:
            _factor(sys, d)
            fresh = True
        delta = sys._lu.solve(-res)
        lam = 1.0
        while True:
            u_new, q_new = u + lam * delta[:n], q + lam * delta[n:]
            try:
                res_new, d_new = _residual(sys, u_new, q_new, u_old)
                rn_new = np.max(np.abs(res_new))
            except PotentialError:
                rn_new = np.inf
            if not damped or rn_new < rnorm or lam < 1e-4:
                break
            lam *= 0.5
        if not fresh and not rn_new <= s.reuse_rate * rnorm:
            # stale Jacobian: rebuild here and retry from the current iterate
            sys._lu = None
            continue
        if not np.isfinite(rn_new):
            raise NewtonError("non-finite Newton iterate", rnorm, u)
        worse = worse + 1 if rn_new >= rnorm else 0
        if worse >= 2:
            damped = True
        small = np.max(np.abs(lam * delta)) <= s.step_tol * (1.0 + np.max(np.abs(np.concatenate([u, q]))))
        u, q, res, d, rnorm = u_new, q_new, res_new, d_new, rn_new
        tol = max(s.tol, _roundoff_floor(sys, u, q, u_old))
        if fresh and rnorm > tol:
            # Jacobian now lags the iterate; let the contraction test decide on reuse
            fresh = False
        if small:
            break
    return u, q, it, rnorm


def step(sys: StepSystem, u, q_guess=None) -> StepResult:
    """Advance one time step from the nodal field ``u``."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NewtonError("non-finite state")
    e0 = energy(sys.ops, sys.pots, u)
    u1, q, iters, rnorm = _solve_step(sys, u, q_guess)
    pair = sys.sl.Q @ q
    n = sys.ops.n_nodes
    mu, theta = pair[:n], pair[n:]
    diss = float(q @ (sys.sl.Aq @ q))
    rep = StepReport(
        energy_before=e0,
        energy_after=energy(sys.ops, sys.pots, u1),
        weighted_mass=weighted_mass(sys.ops, u1, sys.beta),
        dissipation_rate=max(diss, 0.0),
        newton_iters=iters,
        newton_residual=float(rnorm),
        dt=sys.tau,
    )
    return StepResult(u1, mu, theta, rep, q)


def velocity_dual_norm(sys: StepSystem, u_old, u_new, tau: float | None = None) -> float:
    """``‖((u¹-u⁰)/τ, (v¹-v⁰)/τ)‖_{L,β,*}`` for two states of equal weighted mass."""
    tau = sys.tau if tau is None else tau
    u_old = np.asarray(u_old, dtype=float)
    u_new = np.asarray(u_new, dtype=float)
    m0 = weighted_mass(sys.ops, u_old, sys.beta)
    m1 = weighted_mass(sys.ops, u_new, sys.beta)
    if abs(m1 - m0) > 1e-10 * max(1.0, abs(m0)):
        raise ValueError("states differ in weighted mass (%.3e vs %.3e)" % (m0, m1))
    # the remaining mean difference is round-off
    du = project_zero_mean(sys.ops, (u_new - u_old) / tau, sys.beta)
    return dual_norm(sys.sl, du, sys.ops.trace(du))


@dataclass
class TrajectoryLog:
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    velocity: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    initial_energy: float = np.nan
    initial_mass: float = np.nan
    final: np.ndarray | None = None
    stopped_early: bool = False

    @property
    def energies(self) -> np.ndarray:
        return np.array([self.initial_energy] + [r.energy_after for r in self.reports])

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.initial_mass] + [r.weighted_mass for r in self.reports])


Observer = Callable[[int, float, np.ndarray, StepReport, float], object]


def run(sys: StepSystem, u0, t_end: float, observers: Sequence[Observer] = (),
        snapshot_every: int | None = None, t0: float = 0.0) -> TrajectoryLog:
    """Step from ``u0`` up to ``t_end``.

    Observers are called as ``obs(n, t, u, report, velocity)`` after each
    step; a truthy return value stops the run.  Snapshots of ``u`` are kept
    every ``snapshot_every`` steps (and at ``t0``).
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed the start time")
    n_steps = max(1, int(round((t_end - t0) / sys.tau)))
    u = np.asarray(u0, dtype=float).copy()
    log_ = TrajectoryLog(initial_energy=energy(sys.ops, sys.pots, u),
                         initial_mass=weighted_mass(sys.ops, u, sys.beta))
    if snapshot_every:
        log_.snapshots[t0] = u.copy()
    q = None
    for k in range(1, n_steps + 1):
        res = step(sys, u, q)
        t = t0 + k * sys.tau
        vel = velocity_dual_norm(sys, u, res.u)
        u = res.u
        q = res.q
        log_.times.append(t)
        log_.reports.append(res.report)
        log_.velocity.append(vel)
        if snapshot_every and k % snapshot_every == 0:
            log_.snapshots[t] = u.copy()
        if any([bool(obs(k, t, u, res.report, vel)) for obs in observers]):
            log_.stopped_early = True
            break
    log_.final = u
    return log_

