"""P1 bulk and boundary-loop finite element operators.

Bulk matrices live on all mesh nodes; surface matrices live on the boundary
loop, indexed by boundary slot (position in ``mesh.boundary_nodes``).  The
sparse ``trace`` matrix maps a bulk nodal vector to its boundary values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import BulkSurfaceMesh, MeshError, edge_lengths, triangle_areas

__all__ = [
    "FemOperators",
    "assemble",
    "weighted_mass",
    "coupling_form",
    "stack",
]


@dataclass(frozen=True)
class FemOperators:
    mesh: BulkSurfaceMesh
    M_bulk: sp.csr_matrix
    K_bulk: sp.csr_matrix
    M_surf: sp.csr_matrix
    K_surf: sp.csr_matrix
    M_bulk_lumped: np.ndarray
    M_surf_lumped: np.ndarray
    trace_index: np.ndarray  # bulk node -> boundary slot, -1 in the interior
    T: sp.csr_matrix  # (B, N) restriction to the boundary

    @property
    def n_nodes(self) -> int:
        return self.M_bulk.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.M_surf.shape[0]

    def trace(self, u):
        """Boundary values of a nodal field, in boundary-slot order."""
        return np.asarray(u)[..., self.mesh.boundary_nodes]

    @property
    def K_full(self) -> sp.csr_matrix:
        """Stiffness of ``E``'s quadratic part on trace-coupled fields."""
        return (self.K_bulk + self.T.T @ self.K_surf @ self.T).tocsr()

    @property
    def lumped_full(self) -> np.ndarray:
        """Lumped mass of the pair ``(u, u|_Γ)``, per bulk node."""
        w = self.M_bulk_lumped.copy()
        w[self.mesh.boundary_nodes] += self.M_surf_lumped
        return w


def _bulk_element_matrices(nodes, tris):
    p = nodes[tris]
    area = triangle_areas(nodes, tris)
    # gradients of barycentric coordinates: grad(l_i) = rot90(p_{i+2} - p_{i+1}) / (2A)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area)[:, None, None]
    K = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    M = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return M, K, area


def _scatter(local, conn, n):
    rows = np.repeat(conn, conn.shape[1], axis=1).ravel()
    cols = np.tile(conn, (1, conn.shape[1])).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: BulkSurfaceMesh) -> FemOperators:
    """Assemble bulk and surface mass/stiffness matrices with exact P1 quadrature."""
    nodes, tris = mesh.nodes, mesh.triangles
    n, nb = mesh.n_nodes, mesh.n_boundary
    Me, Ke, area = _bulk_element_matrices(nodes, tris)
    if np.any(area < 1e-14 * mesh.bulk_area):
        raise MeshError("degenerate triangle (area %.3e)" % area.min())
    M = _scatter(Me, tris, n)
    K = _scatter(Ke, tris, n)

    h = edge_lengths(nodes, mesh.boundary_edges)
    slots = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb])
    Ms_e = h[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    Ks_e = (1.0 / h)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    Ms = _scatter(Ms_e, slots, nb)
    Ks = _scatter(Ks_e, slots, nb)

    trace_index = -np.ones(n, dtype=np.int64)
    trace_index[mesh.boundary_nodes] = np.arange(nb)
    T = sp.csr_matrix((np.ones(nb), (np.arange(nb), mesh.boundary_nodes)), shape=(nb, n))
    return FemOperators(
        mesh=mesh,
        M_bulk=M,
        K_bulk=K,
        M_surf=Ms,
        K_surf=Ks,
        M_bulk_lumped=np.asarray(M.sum(axis=1)).ravel(),
        M_surf_lumped=np.asarray(Ms.sum(axis=1)).ravel(),
        trace_index=trace_index,
        T=T,
    )


def weighted_mass(ops: FemOperators, u, beta: float) -> float:
    """``β ∫_Ω u + ∫_Γ u|_Γ`` for a nodal field ``u``."""
    u = np.asarray(u, dtype=float)
    return float(beta * ops.M_bulk_lumped @ u + ops.M_surf_lumped @ ops.trace(u))


def mass_functional(ops: FemOperators, beta: float) -> np.ndarray:
    """Vector ``c`` with ``c @ u == weighted_mass(ops, u, beta)``."""
    c = beta * ops.M_bulk_lumped.copy()
    c[ops.mesh.boundary_nodes] += ops.M_surf_lumped
    return c


def stack(ops: FemOperators, mu, theta) -> np.ndarray:
    return np.concatenate([np.asarray(mu, dtype=float), np.asarray(theta, dtype=float)])


def coupling_form(ops: FemOperators, sigma: float, beta: float) -> sp.csr_matrix:
    """Matrix of ``σ ∫_Γ (βθ - μ)(βξ - w)`` on stacked ``(μ, θ)`` unknowns."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    n, nb = ops.n_nodes, ops.n_boundary
    # D maps (mu, theta) to beta*theta - mu|_Γ
    D = sp.hstack([-ops.T, beta * sp.identity(nb)]).tocsr()
    C = sigma * (D.T @ ops.M_surf @ D)
    return sp.csr_matrix(C, shape=(n + nb, n + nb))


def pair_mass(ops: FemOperators) -> sp.csr_matrix:
    """Block-diagonal ``L²(Ω) × L²(Γ)`` mass on stacked pairs."""
    return sp.block_diag([ops.M_bulk, ops.M_surf], format="csr")


def pair_stiffness(ops: FemOperators) -> sp.csr_matrix:
    return sp.block_diag([ops.K_bulk, ops.K_surf], format="csr")
