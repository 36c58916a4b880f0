"""Meshes and the bulk-surface operators.

A P1 triangulation carries the bulk field; its boundary loop carries the
surface field.  Boundary nodes are shared, so the trace of a bulk vector is
just an index selection.
"""
import numpy as np

from chdbc import assemble, generate_disk
from chdbc.elliptic import build_sl, dual_norm, project_zero_mean

mesh = generate_disk(radius=1.0, n_boundary=32, refinement=1)
print("disk: %d nodes, %d triangles, %d boundary nodes" % (mesh.n_nodes, len(mesh.triangles), mesh.n_boundary))
print("area %.6f (pi = %.6f), perimeter %.6f (2 pi = %.6f)" % (mesh.bulk_area, np.pi, mesh.boundary_length, 2 * np.pi))

ops = assemble(mesh)

# Linear functions are reproduced exactly by the stiffness matrix.
x = mesh.nodes[:, 0]
print("grad energy of u = x: %.12f (expected area %.12f)" % (x @ ops.K_bulk @ x, mesh.bulk_area))

# The negative-order norm used to measure velocities.  Locking the chemical
# potentials together (L = 0) stiffens the problem, so the norm shrinks.
u = project_zero_mean(ops, np.cos(2 * np.pi * x), beta=1.0)
for L in (1.0, 1e-2, 0.0):
    print("L = %-5g dual norm of a cosine bump: %.6f" % (L, dual_norm(build_sl(ops, 1.0, L), u, ops.trace(u))))
