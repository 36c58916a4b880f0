"""Coupled bulk-surface elliptic solver, dual norms and the free energy.

Chemical-potential pairs ``(μ, θ)`` live on ``N + B`` unknowns (bulk nodes,
then boundary slots).  For ``L > 0`` they are independent; for ``L = 0`` the
constraint ``μ|_Γ = βθ`` is built in through a basis matrix ``Q`` whose
columns are (interior μ values, θ values), with boundary μ set to ``β θ``.
Every solver in the package works in these reduced coordinates ``q`` with
``(μ, θ) = Q q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FemOperators, coupling_form, pair_mass, pair_stiffness
from .potentials import PotentialPair, eval_nodal

__all__ = [
    "SlSystem",
    "SlError",
    "sigma_of",
    "potential_basis",
    "build_sl",
    "solve_sl",
    "dual_norm",
    "dual_inner",
    "lb_inner_norm",
    "energy",
    "interpolation_ratio",
    "project_zero_mean",
    "mean_constant",
]


class SlError(ValueError):
    pass


def sigma_of(L: float) -> float:
    if L < 0:
        raise ValueError("L must be non-negative")
    return 1.0 / L if L > 0 else 0.0


def potential_basis(ops: FemOperators, beta: float, L: float) -> sp.csr_matrix:
    """Basis ``Q`` of the discrete chemical-potential space."""
    n, nb = ops.n_nodes, ops.n_boundary
    if L > 0:
        return sp.identity(n + nb, format="csr")
    interior = ops.mesh.interior_nodes
    ni = len(interior)
    bnodes = ops.mesh.boundary_nodes
    slot = np.arange(nb)
    rows = np.concatenate([interior, bnodes, n + slot])
    cols = np.concatenate([np.arange(ni), ni + slot, ni + slot])
    vals = np.concatenate([np.ones(ni), np.full(nb, float(beta)), np.ones(nb)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + nb, ni + nb))


def mean_constant(ops: FemOperators, beta: float) -> float:
    """``β|Ω| + |Γ|``, the weighted mass of the constant field 1."""
    return beta * ops.mesh.bulk_area + ops.mesh.boundary_length


def project_zero_mean(ops: FemOperators, u, beta: float) -> np.ndarray:
    """Shift a nodal field by a constant so its weighted mass vanishes."""
    u = np.asarray(u, dtype=float)
    m = beta * ops.M_bulk_lumped @ u + ops.M_surf_lumped @ ops.trace(u)
    return u - m / mean_constant(ops, beta)


@dataclass
class SlSystem:
    """Factorized saddle system for the solution operator ``S^L``."""

    ops: FemOperators
    beta: float
    L: float
    sigma: float
    Q: sp.csr_matrix
    A: sp.csr_matrix  # (·,·)_{L,β} on stacked pairs
    B: sp.csr_matrix  # L² pairing on stacked pairs
    Aq: sp.csr_matrix
    cq: np.ndarray  # weighted-mean functional in q coordinates
    _lu: object = field(repr=False)

    @property
    def n_q(self) -> int:
        return self.Q.shape[1]

    def mean(self, phi, psi) -> float:
        return float(self.beta * self.ops.M_bulk_lumped @ phi + self.ops.M_surf_lumped @ psi)


def build_sl(ops: FemOperators, beta: float, L: float) -> SlSystem:
    if not beta > 0:
        raise ValueError("beta must be positive")
    sigma = sigma_of(L)
    Q = potential_basis(ops, beta, L)
    A = (pair_stiffness(ops) + coupling_form(ops, sigma, beta)).tocsr()
    B = pair_mass(ops)
    Aq = (Q.T @ A @ Q).tocsr()
    c = np.concatenate([beta * ops.M_bulk_lumped, ops.M_surf_lumped])
    cq = Q.T @ c
    saddle = sp.bmat([[Aq, sp.csr_matrix(cq[:, None])], [sp.csr_matrix(cq[None, :]), None]], format="csc")
    try:
        lu = spla.splu(saddle)
    except RuntimeError as exc:
        raise SlError("singular elliptic system; check the mesh") from exc
    return SlSystem(ops, float(beta), float(L), sigma, Q, A, B, Aq, cq, lu)


def solve_sl(sys: SlSystem, phi, psi, check=True):
    """Apply ``S^L`` to a zero-weighted-mean pair ``(φ, ψ)``.

    Returns the bulk and boundary parts of the solution.  For ``L = 0`` the
    boundary bulk values equal ``β`` times the surface values exactly.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ops = sys.ops
    scale = sys.beta * ops.M_bulk_lumped @ np.abs(phi) + ops.M_surf_lumped @ np.abs(psi)
    if abs(sys.mean(phi, psi)) > 1e-10 * scale + 1e-300:
        raise SlError("rhs not in H^-1_beta: weighted mean %.3e" % sys.mean(phi, psi))
    rhs = -(sys.Q.T @ (sys.B @ np.concatenate([phi, psi])))
    sol = sys._lu.solve(np.append(rhs, 0.0))
    q = sol[:-1]
    if check:
        res = sys.Aq @ q + sol[-1] * sys.cq - rhs
        ref = np.abs(sys.Aq) @ np.abs(q) + np.abs(rhs)
        if np.max(np.abs(res)) > 1e-10 * max(np.max(ref), 1e-300):
            raise SlError("elliptic solve residual too large")
    s = sys.Q @ q
    n = ops.n_nodes
    return s[:n], s[n:]


def dual_inner(sys: SlSystem, f, g) -> float:
    """``((f), (g))_{L,β,*}`` for pairs given as ``(bulk, boundary)`` tuples."""
    s_bulk, s_surf = solve_sl(sys, *g)
    return float(-(f[0] @ (sys.ops.M_bulk @ s_bulk) + f[1] @ (sys.ops.M_surf @ s_surf)))


def dual_norm(sys: SlSystem, phi, psi) -> float:
    return float(np.sqrt(max(dual_inner(sys, (np.asarray(phi), np.asarray(psi)), (phi, psi)), 0.0)))


def lb_inner_norm(ops: FemOperators, mu, theta, beta: float, sigma: float) -> float:
    """``‖(μ, θ)‖_{L,β}`` with ``σ = 1/L`` (0 for ``L = 0``)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    mu = np.asarray(mu, dtype=float)
    theta = np.asarray(theta, dtype=float)
    jump = beta * theta - ops.trace(mu)
    val = mu @ (ops.K_bulk @ mu) + theta @ (ops.K_surf @ theta) + sigma * jump @ (ops.M_surf @ jump)
    return float(np.sqrt(max(val, 0.0)))


def energy(ops: FemOperators, pots: PotentialPair, u) -> float:
    """Ginzburg-Landau energy of the trace-coupled field ``u``.

    Gradient terms use exact P1 quadrature, potentials nodal (lumped)
    quadrature.
    """
    u = np.asarray(u, dtype=float)
    v = ops.trace(u)
    val = (
        0.5 * u @ (ops.K_bulk @ u)
        + ops.M_bulk_lumped @ eval_nodal(pots.F, "f", u)
        + 0.5 * v @ (ops.K_surf @ v)
        + ops.M_surf_lumped @ eval_nodal(pots.G, "f", v)
    )
    return float(val)


def interpolation_ratio(sys: SlSystem, u) -> float:
    """``‖(u,v)‖²_{L²} / (‖(∇u, ∇_Γ v)‖_{L²} ‖(u,v)‖_{L,β,*})`` for zero-mean ``u``."""
    ops = sys.ops
    u = np.asarray(u, dtype=float)
    v = ops.trace(u)
    l2sq = u @ (ops.M_bulk @ u) + v @ (ops.M_surf @ v)
    grad = np.sqrt(max(u @ (ops.K_bulk @ u) + v @ (ops.K_surf @ v), 0.0))
    dual = dual_norm(sys, u, v)
    if grad * dual <= 1e-300:
        raise ValueError("interpolation ratio undefined for constant fields")
    return float(l2sq / (grad * dual))
