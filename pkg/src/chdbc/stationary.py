"""Stationary points at prescribed weighted mass.

A stationary point solves, weakly on trace-coupled test functions,

    -Δu + F'(u) = βλ in Ω,   -Δ_Γ v + G'(v) + ∂ₙu = λ on Γ,   β∫u + ∫v = m,

with the Lagrange multiplier ``λ``.  The problem does not involve ``L``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import mass_functional, weighted_mass
from .elliptic import energy, mean_constant
from .potentials import PotentialError, eval_nodal
from .stepper import StepSystem

__all__ = [
    "StationaryPoint",
    "StationaryError",
    "solve_stationary",
    "stationarity_residual",
    "multiplier",
    "multi_start",
]


class StationaryError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class StationaryPoint:
    field: np.ndarray
    lam: float
    residual_norm: float
    energy: float
    iterations: int = 0
    converged: bool = True

    @property
    def lambda_(self):
        return self.lam


def _gradient(sys: StepSystem, u):
    """Discrete ``E'(u)`` as a vector over bulk nodes, and its potential Hessian diagonal."""
    ops, pots = sys.ops, sys.pots
    v = ops.trace(u)
    g = sys.K_full @ u + ops.M_bulk_lumped * eval_nodal(pots.F, "f'", u)
    g[ops.mesh.boundary_nodes] += ops.M_surf_lumped * eval_nodal(pots.G, "f'", v)
    d = ops.M_bulk_lumped * pots.F.f_second(u)
    d[ops.mesh.boundary_nodes] += ops.M_surf_lumped * pots.G.f_second(v)
    return g, d


def multiplier(sys: StepSystem, u) -> float:
    """``λ = (∫_Ω F'(u) + ∫_Γ G'(v)) / (β|Ω| + |Γ|)`` with nodal quadrature."""
    ops, pots = sys.ops, sys.pots
    num = ops.M_bulk_lumped @ eval_nodal(pots.F, "f'", u) + ops.M_surf_lumped @ eval_nodal(pots.G, "f'", ops.trace(u))
    return float(num / mean_constant(ops, sys.beta))


def stationarity_residual(sys: StepSystem, u) -> float:
    """Size of ``E'(u) - λ(u) c`` measured in the lumped dual L² norm.

    ``c`` is the weighted-mass functional; with ``λ`` from the mean formula
    the residual annihilates constants, so it vanishes exactly at discrete
    stationary points.
    """
    u = np.asarray(u, dtype=float)
    g, _ = _gradient(sys, u)
    r = g - multiplier(sys, u) * mass_functional(sys.ops, sys.beta)
    w = sys.ops.lumped_full
    return float(np.sqrt(r @ (r / w)))


def solve_stationary(sys: StepSystem, guess, m: float | None = None, tol: float = 1e-10,
                     max_iter: int = 50) -> StationaryPoint:
    """Bordered Newton solve for ``(u, λ)`` at weighted mass ``m``.

    ``m`` defaults to the mass of ``guess``.  Raises :class:`StationaryError`
    on divergence (``err.best`` holds the best iterate) or a singular
    Jacobian.
    """
    ops = sys.ops
    u = np.array(guess, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("guess must be finite")
    if m is None:
        m = weighted_mass(ops, u, sys.beta)
    c = mass_functional(ops, sys.beta)
    n = len(u)
    lam = multiplier(sys, u)
    border_col = sp.csr_matrix(-c[:, None])
    border_row = sp.csr_matrix(c[None, :])

    def residual(u, lam):
        g, d = _gradient(sys, u)
        return np.append(g - lam * c, c @ u - m), d

    try:
        res, d = residual(u, lam)
    except PotentialError as exc:
        raise StationaryError(str(exc)) from exc
    rnorm = np.max(np.abs(res))
    best = StationaryPoint(u.copy(), lam, rnorm, np.nan, 0, False)
    it = 0
    while rnorm > tol or it == 0:
        if it >= max_iter:
            raise StationaryError("stationary Newton did not converge (residual %.3e)" % best.residual_norm,
                                  best=best)
        it += 1
        J = sp.bmat([[sys.K_full + sp.diags(d), border_col], [border_row, None]], format="csc")
        try:
            delta = spla.splu(J).solve(-res)
        except RuntimeError as exc:
            raise StationaryError("singular Jacobian at a degenerate critical point; "
                                  "perturb the guess", best=best) from exc
        if not np.all(np.isfinite(delta)):
            raise StationaryError("singular Jacobian at a degenerate critical point; "
                                  "perturb the guess", best=best)
        step = 1.0
        while True:
            try:
                new_res, new_d = residual(u + step * delta[:n], lam + step * delta[n])
                new_norm = np.max(np.abs(new_res))
            except PotentialError:
                new_norm = np.inf
            if new_norm < rnorm or step < 1e-3 or rnorm <= tol:
                break
            step *= 0.5
        if not np.isfinite(new_norm):
            raise StationaryError("non-finite stationary iterate", best=best)
        u, lam = u + step * delta[:n], lam + step * delta[n]
        res, d, rnorm = new_res, new_d, new_norm
        if rnorm < best.residual_norm:
            best = StationaryPoint(u.copy(), lam, rnorm, np.nan, it, False)
        if np.max(np.abs(step * delta)) < 1e-15 * (1 + np.max(np.abs(u))) and rnorm > tol:
            raise StationaryError("stationary Newton stagnated (residual %.3e)" % rnorm, best=best)
    return StationaryPoint(u, float(lam), float(rnorm), energy(ops, sys.pots, u), it, True)


def multi_start(sys: StepSystem, guesses, m: float, tol: float = 1e-10, same_tol: float = 1e-6,
                threads: int = 1):
    """Solve from every guess at mass ``m`` and keep distinct converged points.

    Two points count as the same when their nodal values agree to
    ``same_tol`` in max norm.  Failed starts are skipped.  The result is
    sorted by energy, so it does not depend on ``threads``.
    """
    guesses = [np.asarray(g, dtype=float) for g in guesses]

    def attempt(g):
        try:
            return solve_stationary(sys, g, m, tol=tol)
        except StationaryError:
            return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(attempt, guesses))
    else:
        found = [attempt(g) for g in guesses]
    distinct: list[StationaryPoint] = []
    for pt in found:
        if pt is None:
            continue
        if all(np.max(np.abs(pt.field - q.field)) > same_tol for q in distinct):
            distinct.append(pt)
    distinct.sort(key=lambda p: (p.energy, float(p.field.sum())))
    return distinct
