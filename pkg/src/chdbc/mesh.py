"""Bulk-surface triangulations of planar domains.

A :class:`BulkSurfaceMesh` is a P1 triangulation of a polygonal domain
together with the ordered boundary loop.  Bulk and surface unknowns share
node indices on the boundary, which is how the trace condition ``u|_Γ = v``
is realized throughout the package.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "BulkSurfaceMesh",
    "MeshError",
    "generate_disk",
    "generate_square",
    "generate_rectangle",
    "load_mesh",
    "save_mesh",
    "mesh_to_text",
    "parse_mesh",
]


class MeshError(ValueError):
    """Raised for malformed or inconsistent meshes."""


@dataclass(frozen=True)
class BulkSurfaceMesh:
    """Triangulated domain with its boundary polyline.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary_edges : (B, 2) int array, a single closed loop in traversal order
    boundary_nodes : (B,) int array, ``boundary_edges[:, 0]``
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_nodes: np.ndarray = field(init=False)
    bulk_area: float = field(init=False)
    boundary_length: float = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64)
        for arr in (nodes, tris, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", edges)
        bnodes = edges[:, 0].copy()
        bnodes.setflags(write=False)
        object.__setattr__(self, "boundary_nodes", bnodes)
        object.__setattr__(self, "bulk_area", float(triangle_areas(nodes, tris).sum()))
        object.__setattr__(self, "boundary_length", float(edge_lengths(nodes, edges).sum()))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_nodes)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted row-wise."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_nodes - len(self.edges()) + len(self.triangles)

    def digest(self) -> str:
        """Short content hash used to tie checkpoints to a mesh."""
        return hashlib.sha256(mesh_to_text(self).encode()).hexdigest()[:16]

    def validate(self) -> None:
        """Check all topological invariants, raising :class:`MeshError`."""
        _check_topology(self.nodes, self.triangles, self.boundary_edges)


def triangle_areas(nodes, triangles):
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def edge_lengths(nodes, edges):
    return np.linalg.norm(nodes[edges[:, 1]] - nodes[edges[:, 0]], axis=1)


# ---------------------------------------------------------------------------
# topology helpers


def _free_edges(triangles):
    """Edges used by exactly one triangle, with their orientation in that triangle."""
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: an edge is shared by more than two triangles")
    once = counts[inverse] == 1
    return directed[once]


def _order_loop(directed_edges):
    """Chain directed boundary edges into one closed loop."""
    if len(directed_edges) < 3:
        raise MeshError("boundary loop incomplete")
    succ = {}
    for a, b in directed_edges:
        a, b = int(a), int(b)
        if a in succ:
            raise MeshError("non-manifold boundary: node %d starts two boundary edges" % a)
        succ[a] = b
    if sorted(succ) != sorted(succ.values()):
        raise MeshError("boundary loop incomplete")
    start = int(directed_edges[0][0])
    loop = [start]
    cur = succ[start]
    while cur != start:
        loop.append(cur)
        cur = succ[cur]
        if len(loop) > len(succ):
            raise MeshError("boundary loop incomplete")
    if len(loop) != len(succ):
        raise MeshError("multiple boundary loops (%d of %d boundary edges in first loop)" % (len(loop), len(succ)))
    loop = np.array(loop, dtype=np.int64)
    return np.column_stack([loop, np.roll(loop, -1)])


def _check_topology(nodes, triangles, boundary_edges, require_order=True):
    """Validate a triangulation; return the ordered boundary loop."""
    n = len(nodes)
    if nodes.ndim != 2 or nodes.shape[1] != 2 or n < 3:
        raise MeshError("nodes must be an (N, 2) array with N >= 3")
    if not np.all(np.isfinite(nodes)):
        raise MeshError("non-finite node coordinates")
    if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
        raise MeshError("triangles must be a non-empty (T, 3) array")
    if triangles.min() < 0 or triangles.max() >= n:
        raise MeshError("triangle references a node index out of range")
    t = np.sort(triangles, axis=1)
    if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]):
        raise MeshError("triangle with a repeated node index")
    areas = triangle_areas(nodes, triangles)
    if np.any(areas <= 0):
        raise MeshError("inverted or degenerate triangle (index %d)" % int(np.argmin(areas)))
    used = np.zeros(n, dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        raise MeshError("node %d is not used by any triangle" % int(np.flatnonzero(~used)[0]))
    loop = _order_loop(_free_edges(triangles))
    declared = {tuple(sorted(map(int, e))) for e in boundary_edges}
    found = {tuple(sorted(map(int, e))) for e in loop}
    if declared != found:
        raise MeshError("declared boundary edges do not match the free edges of the triangulation")
    be = np.asarray(boundary_edges)
    if len(be) != len(loop):
        raise MeshError("duplicated boundary edges")
    if require_order:
        if np.any(be[:, 1] != np.roll(be[:, 0], -1)) or np.any(be[:, 0] != np.roll(loop[:, 0], -int(np.argmax(loop[:, 0] == be[0, 0])))):
            raise MeshError("boundary edges are not an ordered counterclockwise loop")
        return be
    shift = int(np.argmax(loop[:, 0] == be[0, 0])) if be[0, 0] in loop[:, 0] else 0
    return np.roll(loop, -shift, axis=0)


def _build(nodes, triangles) -> BulkSurfaceMesh:
    triangles = np.asarray(triangles, dtype=np.int64)
    loop = _order_loop(_free_edges(triangles))
    mesh = BulkSurfaceMesh(np.asarray(nodes, dtype=float), triangles, loop)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# generators


def _zip_rings(inner, outer, inner_angles, outer_angles):
    """Triangulate the annulus strip between two closed rings of nodes."""
    tris = []
    ni, no = len(inner), len(outer)
    if ni == 1:
        c = inner[0]
        for j in range(no):
            tris.append((c, outer[j], outer[(j + 1) % no]))
        return tris
    # unwrap angles so both rings start at the same place and advance monotonically
    a_in = np.append(inner_angles, inner_angles[0] + 2 * np.pi)
    a_out = np.append(outer_angles, outer_angles[0] + 2 * np.pi)
    i = j = 0
    while i < ni or j < no:
        if j < no and (i == ni or a_out[j + 1] <= a_in[i + 1]):
            tris.append((inner[i % ni], outer[j], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i % ni], outer[j % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def _refine(nodes, triangles, radius=None):
    """Split each triangle into four; boundary midpoints go onto the circle if ``radius``."""
    nodes = [tuple(p) for p in nodes]
    free = {tuple(sorted(map(int, e))) for e in _free_edges(triangles)}
    mid = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in mid:
            p = 0.5 * (np.asarray(nodes[a]) + np.asarray(nodes[b]))
            if radius is not None and key in free:
                p = p * (radius / np.linalg.norm(p))
            mid[key] = len(nodes)
            nodes.append(tuple(p))
        return mid[key]

    new = []
    for a, b, c in triangles.tolist():
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.array(nodes), np.array(new, dtype=np.int64)


def generate_disk(radius: float = 1.0, n_boundary: int = 32, refinement: int = 0) -> BulkSurfaceMesh:
    """Triangulate the regular ``n_boundary``-gon inscribed in a disk.

    Interior nodes are placed on concentric rings with roughly the boundary
    spacing and stitched ring to ring.  Each refinement splits every triangle
    into four and projects new boundary nodes onto the circle, so the boundary
    becomes the inscribed ``2**refinement * n_boundary``-gon.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if int(n_boundary) != n_boundary or n_boundary < 8:
        raise ValueError("n_boundary must be an integer >= 8")
    if int(refinement) != refinement or refinement < 0:
        raise ValueError("refinement must be a non-negative integer")
    n = int(n_boundary)
    n_rings = max(1, int(round(n / (2 * np.pi))))
    coords = [(0.0, 0.0)]
    rings, ring_angles = [np.array([0])], [np.array([0.0])]
    for k in range(1, n_rings + 1):
        m = n if k == n_rings else max(6, int(round(n * k / n_rings)))
        # stagger alternate rings by half a step to avoid slivers
        offset = 0.0 if k == n_rings else (np.pi / m) * (k % 2)
        ang = offset + 2 * np.pi * np.arange(m) / m
        r = radius * k / n_rings
        start = len(coords)
        coords += list(zip(r * np.cos(ang), r * np.sin(ang)))
        rings.append(np.arange(start, start + m))
        ring_angles.append(ang)
    tris = []
    for k in range(n_rings):
        tris += _zip_rings(rings[k], rings[k + 1], ring_angles[k], ring_angles[k + 1])
    nodes, tris = np.array(coords), np.array(tris, dtype=np.int64)
    for _ in range(int(refinement)):
        nodes, tris = _refine(nodes, tris, radius=radius)
    return _build(nodes, tris)


def generate_rectangle(width: float = 1.0, height: float = 1.0, nx: int = 8, ny: int = 8) -> BulkSurfaceMesh:
    """Uniform right-triangle mesh of ``[0, width] x [0, height]`` with ``nx`` by ``ny`` cells."""
    if not (width > 0 and height > 0):
        raise ValueError("width and height must be positive")
    for k in (nx, ny):
        if int(k) != k or k < 2:
            raise ValueError("cell counts must be integers >= 2")
    nx, ny = int(nx), int(ny)
    X, Y = np.meshgrid(np.linspace(0.0, width, nx + 1), np.linspace(0.0, height, ny + 1))
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return _build(nodes, tris)


def generate_square(side: float = 1.0, n_per_side: int = 8) -> BulkSurfaceMesh:
    """Uniform right-triangle mesh of ``[0, side]^2`` with ``n_per_side`` cells per edge."""
    if not side > 0:
        raise ValueError("side must be positive")
    if int(n_per_side) != n_per_side or n_per_side < 2:
        raise ValueError("n_per_side must be an integer >= 2")
    return generate_rectangle(side, side, n_per_side, n_per_side)


# ---------------------------------------------------------------------------
# text format


def mesh_to_text(mesh: BulkSurfaceMesh) -> str:
    lines = ["bsmesh 1", "nodes %d" % mesh.n_nodes]
    lines += ["%r %r" % (float(x), float(y)) for x, y in mesh.nodes]
    lines.append("triangles %d" % len(mesh.triangles))
    lines += ["%d %d %d" % tuple(t) for t in mesh.triangles]
    lines.append("boundary %d" % len(mesh.boundary_edges))
    lines += ["%d %d" % tuple(e) for e in mesh.boundary_edges]
    return "\n".join(lines) + "\n"


def save_mesh(mesh: BulkSurfaceMesh, path) -> None:
    Path(path).write_text(mesh_to_text(mesh))


def _section(lines, pos, name, width, conv):
    if pos >= len(lines):
        raise MeshError("parse error: missing '%s' section" % name)
    head = lines[pos].split()
    if len(head) != 2 or head[0] != name:
        raise MeshError("parse error: expected '%s <count>' at line %d" % (name, pos + 1))
    try:
        count = int(head[1])
    except ValueError:
        raise MeshError("parse error: bad count at line %d" % (pos + 1)) from None
    rows = []
    for k in range(pos + 1, pos + 1 + count):
        if k >= len(lines):
            raise MeshError("parse error: section '%s' truncated" % name)
        parts = lines[k].split()
        if len(parts) != width:
            raise MeshError("parse error: expected %d values at line %d" % (width, k + 1))
        try:
            rows.append([conv(p) for p in parts])
        except ValueError:
            raise MeshError("parse error: bad value at line %d" % (k + 1)) from None
    return rows, pos + 1 + count


def parse_mesh(text: str) -> BulkSurfaceMesh:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0].split() != ["bsmesh", "1"]:
        raise MeshError("parse error: missing 'bsmesh 1' header")
    nodes, pos = _section(lines, 1, "nodes", 2, float)
    tris, pos = _section(lines, pos, "triangles", 3, int)
    bnd, pos = _section(lines, pos, "boundary", 2, int)
    if pos != len(lines):
        raise MeshError("parse error: trailing content at line %d" % (pos + 1))
    nodes = np.array(nodes, dtype=float).reshape(-1, 2)
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    bnd = np.array(bnd, dtype=np.int64).reshape(-1, 2)
    if len(tris) and np.any(np.sort(tris, axis=1)[:, 1:] == np.sort(tris, axis=1)[:, :-1]):
        raise MeshError("parse error: triangle with a duplicated node index")
    loop = _check_topology(nodes, tris, bnd, require_order=False)
    return BulkSurfaceMesh(nodes, tris, loop)


def load_mesh(path) -> BulkSurfaceMesh:
    """Read and validate a ``bsmesh 1`` text file."""
    return parse_mesh(Path(path).read_text())
