"""Numerical experiments on the long-time and small-``L`` behaviour.

* :func:`limit_study` compares ``L > 0`` trajectories with the ``L = 0``
  trajectory from the same datum and fits the convergence order in ``L``.
* :func:`omega_limit` runs to a velocity plateau and refines the end state
  into a stationary point.
* :func:`smoothing_probe` tracks an H² proxy along a trajectory from rough
  data.
* :func:`semidistance` evaluates Hausdorff semidistances between finite
  sets of states.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FemOperators, weighted_mass
from .elliptic import SlSystem, build_sl, dual_norm, interpolation_ratio, project_zero_mean
from .stationary import StationaryError, StationaryPoint, solve_stationary
from .stepper import StepSystem, run

log = logging.getLogger(__name__)

__all__ = [
    "LimitStudyResult",
    "OmegaLimitResult",
    "SemidistanceReport",
    "SmoothingProbe",
    "l2_norm",
    "h1_norm",
    "h2_proxy",
    "fit_order",
    "limit_study",
    "omega_limit",
    "smoothing_probe",
    "semidistance",
    "InterpolationScan",
    "random_zero_mean_field",
    "interpolation_scan",
]


# ---------------------------------------------------------------------------
# norms of trace-coupled fields


def l2_norm(ops: FemOperators, u) -> float:
    u = np.asarray(u, dtype=float)
    v = ops.trace(u)
    return float(np.sqrt(max(u @ (ops.M_bulk @ u) + v @ (ops.M_surf @ v), 0.0)))


def h1_norm(ops: FemOperators, u) -> float:
    u = np.asarray(u, dtype=float)
    v = ops.trace(u)
    val = u @ ((ops.M_bulk + ops.K_bulk) @ u) + v @ ((ops.M_surf + ops.K_surf) @ v)
    return float(np.sqrt(max(val, 0.0)))


def h2_proxy(ops: FemOperators, u) -> float:
    """L² size of the discrete Laplacian pair ``(-Δu, -Δ_Γ v + ∂ₙu)``.

    The pair is represented nodally as ``W⁻¹ (K + Tᵀ K_Γ T) u`` with ``W``
    the lumped bulk-plus-surface mass, and measured in the ``W`` norm.
    """
    u = np.asarray(u, dtype=float)
    w = ops.lumped_full
    r = ops.K_full @ u
    return float(np.sqrt(r @ (r / w)))


# ---------------------------------------------------------------------------
# L -> 0


@dataclass
class LimitStudyResult:
    L_grid: list
    errors_L2: list
    errors_H1: list
    fitted_order_L2: float
    fitted_order_H1: float
    T_star: float
    points_used_L2: int = 0
    points_used_H1: int = 0
    samples: list = field(default_factory=list)  # (L, t, err_L2, err_H1)

    def summary(self) -> dict:
        return {
            "T_star": self.T_star,
            "L_grid": list(self.L_grid),
            "errors_L2": list(self.errors_L2),
            "errors_H1": list(self.errors_H1),
            "fitted_order": self.fitted_order_L2,
            "fitted_order_L2": self.fitted_order_L2,
            "fitted_order_H1": self.fitted_order_H1,
            "points_used_L2": self.points_used_L2,
            "points_used_H1": self.points_used_H1,
        }


def fit_order(L_values, errors, r2_min: float = 0.98):
    """Least-squares slope of ``log(err)`` against ``log(L)``.

    Largest-``L`` points are dropped until the fit reaches ``r2_min`` (at
    least two points are kept).  Returns ``(order, n_points_used)``.
    """
    L_values = np.asarray(L_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    order = np.argsort(L_values)
    x_all, y_all = np.log(L_values[order]), np.log(errors[order])
    n = len(x_all)
    if n < 2:
        raise ValueError("need at least two points to fit an order")
    for k in range(n, 1, -1):
        x, y = x_all[:k], y_all[:k]
        slope, icpt = np.polyfit(x, y, 1)
        ss_res = np.sum((y - (slope * x + icpt)) ** 2)
        ss_tot = np.sum((y - y.mean()) ** 2)
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        if r2 >= r2_min or k == 2:
            return float(slope), k
    raise AssertionError("unreachable")


def _trajectory(system: StepSystem, u0, T_star, sample_every):
    lg = run(system, u0, T_star, snapshot_every=sample_every)
    return lg.snapshots


def limit_study(system: StepSystem, u0, L_grid, T_star: float = 1.0, sample_every: int = 10,
                threads: int = 1) -> LimitStudyResult:
    """Sup-in-time distance between ``L``-trajectories and the ``L = 0`` one.

    ``system`` fixes mesh, potentials, ``β`` and ``τ``; its own ``L`` is
    ignored.  Errors are sampled every ``sample_every`` steps.
    """
    L_grid = sorted((float(L) for L in L_grid), reverse=True)
    if any(L < 0 for L in L_grid):
        raise ValueError("L values must be non-negative")
    ops = system.ops
    u0 = np.asarray(u0, dtype=float)
    systems = [system.with_params(L=0.0)] + [system.with_params(L=L) for L in L_grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(lambda s: _trajectory(s, u0, T_star, sample_every), systems))

    else:
        trajs = [_trajectory(s, u0, T_star, sample_every) for s in systems]
    ref = trajs[0]
    times = sorted(ref)
    errs2, errs1, rows = [], [], []
    for L, traj in zip(L_grid, trajs[1:]):
        e2 = e1 = 0.0
        for t in times:
            diff = traj[t] - ref[t]
            a, b = l2_norm(ops, diff), h1_norm(ops, diff)
            rows.append((L, t, a, b))
            e2, e1 = max(e2, a), max(e1, b)
        errs2.append(e2)
        errs1.append(e1)
    positive = [i for i, L in enumerate(L_grid) if L > 0 and errs2[i] > 0 and errs1[i] > 0]
    if len(positive) >= 2:
        o2, k2 = fit_order([L_grid[i] for i in positive], [errs2[i] for i in positive])
        o1, k1 = fit_order([L_grid[i] for i in positive], [errs1[i] for i in positive])
    else:
        o2 = o1 = float("nan")
        k2 = k1 = 0
    return LimitStudyResult(L_grid, errs2, errs1, o2, o1, float(T_star), k2, k1, rows)


# ---------------------------------------------------------------------------
# long-time limit


@dataclass
class OmegaLimitResult:
    final_state: np.ndarray
    matched_stationary: StationaryPoint | None
    distance_L2: float
    velocity_norm_final: float
    energy_history: np.ndarray
    t_final: float
    converged: bool
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    velocity_history: np.ndarray = field(default_factory=lambda: np.zeros(0))


def omega_limit(system: StepSystem, u0, stop_threshold: float = 1e-9, t_max: float = 200.0) -> OmegaLimitResult:
    """Run until the velocity dual norm drops below ``stop_threshold``.

    The end state is refined by :func:`solve_stationary`.  Reaching ``t_max``
    first is reported through ``converged=False``; it is not an error.
    """
    if not stop_threshold > 0:
        raise ValueError("stop_threshold must be positive")
    lg = run(system, u0, t_max, observers=[lambda k, t, u, rep, vel: vel <= stop_threshold])
    final = lg.final
    try:
        st = solve_stationary(system, final, weighted_mass(system.ops, final, system.beta))
        dist = l2_norm(system.ops, st.field - final)
    except StationaryError as exc:
        log.warning("stationary refinement failed: %s", exc)
        st, dist = None, float("nan")
    v_final = lg.velocity[-1]
    return OmegaLimitResult(
        final_state=final,
        matched_stationary=st,
        distance_L2=dist,
        velocity_norm_final=v_final,
        energy_history=lg.energies,
        t_final=lg.times[-1],
        converged=bool(v_final <= stop_threshold and st is not None),
        times=np.array([0.0] + lg.times),
        velocity_history=np.array(lg.velocity),
    )


# ---------------------------------------------------------------------------
# smoothing


@dataclass
class SmoothingProbe:
    times: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    t_min: float
    growth_factor: float

    @property
    def weighted(self) -> np.ndarray:
        """``H2_proxy(t) (t/(1+t))^{1/2}``."""
        t = self.times
        return self.h2 * np.sqrt(t / (1.0 + t))

    @property
    def window(self) -> np.ndarray:
        return self.times >= self.t_min * (1 - 1e-12)

    @property
    def constant(self) -> float:
        """Smallest constant bounding the weighted proxy on ``t >= t_min``."""
        return float(np.max(self.weighted[self.window]))

    @property
    def bounded(self) -> bool:
        """Weighted proxy stays within ``growth_factor`` of its value at ``t_min``."""
        w = self.weighted[self.window]
        if not np.all(np.isfinite(w)):
            return False
        return bool(np.max(w) <= self.growth_factor * w[0] + 1e-12)

    def rows(self):
        return list(zip(self.times.tolist(), self.h1.tolist(), self.h2.tolist(), self.weighted.tolist()))


def smoothing_probe(system: StepSystem, rough, t_end: float = 10.0, t_min: float = 0.1,
                    sample_every: int = 1, growth_factor: float = 10.0) -> SmoothingProbe:
    ops = system.ops
    lg = run(system, rough, t_end, snapshot_every=sample_every)
    times = np.array(sorted(lg.snapshots))
    h1 = np.array([h1_norm(ops, lg.snapshots[t]) for t in times])
    h2 = np.array([h2_proxy(ops, lg.snapshots[t]) for t in times])
    return SmoothingProbe(times, h1, h2, t_min, growth_factor)


# ---------------------------------------------------------------------------
# Hausdorff semidistance


@dataclass(frozen=True)
class SemidistanceReport:
    dist_AB: float
    dist_BA: float
    dist_sym: float
    norm: str


def _pairwise(ops: FemOperators, A, B, norm, sl: SlSystem | None):
    D = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
            if norm == "L2":
                D[i, j] = l2_norm(ops, diff)
            elif norm == "H1":
                D[i, j] = h1_norm(ops, diff)
            else:
                diff = project_zero_mean(ops, diff, sl.beta)  # masses agree up to round-off
                D[i, j] = dual_norm(sl, diff, ops.trace(diff))
    return D


def semidistance(ops: FemOperators, set_A, set_B, norm: str = "L2", sl: SlSystem | None = None) -> SemidistanceReport:
    """``sup_a inf_b d(a, b)`` both ways, for finite sets of nodal states.

    ``norm`` is ``"L2"``, ``"H1"`` or ``"dual"``; the dual norm needs an
    :class:`SlSystem` and states of equal weighted mass.
    """
    A, B = list(set_A), list(set_B)
    if not A or not B:
        raise ValueError("sets must be non-empty")
    n = ops.n_nodes
    for s in A + B:
        if np.shape(s) != (n,):
            raise ValueError("state does not match the mesh (%s vs %d nodes)" % (np.shape(s), n))
    if norm not in ("L2", "H1", "dual"):
        raise ValueError("norm must be 'L2', 'H1' or 'dual'")
    if norm == "dual":
        if sl is None:
            raise ValueError("dual norm needs an SlSystem")
        masses = [weighted_mass(ops, s, sl.beta) for s in A + B]
        if np.ptp(masses) > 1e-10 * max(1.0, np.max(np.abs(masses))):
            raise ValueError("dual-norm distance needs states of equal weighted mass")
    D = _pairwise(ops, A, B, norm, sl)
    ab = float(D.min(axis=1).max())
    ba = float(D.min(axis=0).max())
    return SemidistanceReport(ab, ba, max(ab, ba), norm)


# ---------------------------------------------------------------------------
# interpolation-inequality scans


def random_zero_mean_field(ops: FemOperators, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Nodal noise, smoothed at a random length scale, shifted to zero weighted mass.

    The smoothing solve ``(W + s K) u = W noise`` with ``s`` log-uniform in
    ``[1e-4, 1]`` spreads samples from grid-scale roughness to a few smooth
    modes, which is where the interpolation ratio tends to peak.
    """
    noise = rng.uniform(-1.0, 1.0, ops.n_nodes)
    s = 10.0 ** rng.uniform(-4.0, 0.0)
    w = ops.lumped_full
    u = spla.spsolve((sp.diags(w) + s * ops.K_full).tocsc(), w * noise)
    return project_zero_mean(ops, u, beta)


@dataclass
class InterpolationScan:
    L_grid: list
    beta: float
    rows: list  # (L, sample index, ratio)

    @property
    def max_by_L(self) -> dict:
        out = {}
        for L, _, r in self.rows:
            out[L] = max(out.get(L, 0.0), r)
        return out

    @property
    def max_ratio(self) -> float:
        return max(r for _, _, r in self.rows)

    @property
    def spread(self) -> float:
        """Largest over smallest per-``L`` maximum."""
        vals = list(self.max_by_L.values())
        return max(vals) / min(vals)


def interpolation_scan(ops: FemOperators, beta: float, L_grid, samples: int = 100, seed: int = 0,
                       threads: int = 1) -> InterpolationScan:
    """Sample the interpolation ratio on the same random fields for every ``L``."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    fields = [random_zero_mean_field(ops, beta, rng) for _ in range(samples)]
    L_grid = [float(L) for L in L_grid]

    def scan(L):
        sl = build_sl(ops, beta, L)
        return [(L, i, interpolation_ratio(sl, f)) for i, f in enumerate(fields)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(scan, L_grid))
    else:
        parts = [scan(L) for L in L_grid]
    return InterpolationScan(L_grid, float(beta), [row for part in parts for row in part])
