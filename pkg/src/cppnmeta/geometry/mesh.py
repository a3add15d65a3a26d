"""Triangular meshes of the material region of a labelled field.

Two meshers are provided:

``structured`` (default)
    Cuts a fixed background triangulation of the sampling grid along the
    piecewise-linear level set. Square cells use four triangles around the
    cell centre and rhombic cells are split along their short diagonal, so
    the background is invariant under every point operation of the plane
    group and the resulting mesh inherits the design's symmetry exactly.

``delaunay``
    Delaunay triangulation of material grid points plus boundary points;
    triangles whose centroid falls in void (bilinear field below the
    threshold) are dropped. Cocircular lattice points make the diagonal
    choice arbitrary, so this mesher does not preserve symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from ..errors import EmptyDesignError, MeshingError
from .field import PointCloud, SampledField, _snap_to_edges, bilinear, boundary_crossings

PERIODIC_TOL = 1e-9


@dataclass(frozen=True)
class TriangularMesh:
    vertices: np.ndarray  # (V, 2) Cartesian
    frac: np.ndarray  # (V, 2) fractional cell coordinates
    triangles: np.ndarray  # (T, 3), counter-clockwise
    edge_pairs: np.ndarray  # (P, 2) slave, master
    cell: np.ndarray

    @property
    def cell_area(self) -> float:
        return float(abs(np.linalg.det(self.cell)))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def volume_fraction(self) -> float:
        return self.area() / self.cell_area

    @property
    def master(self) -> np.ndarray:
        """Index of the master vertex for every vertex (itself if unpaired)."""
        out = np.arange(len(self.vertices))
        if len(self.edge_pairs):
            out[self.edge_pairs[:, 0]] = self.edge_pairs[:, 1]
        return out


def periodic_pairs(frac: np.ndarray, tol: float = PERIODIC_TOL) -> np.ndarray:
    """Pair every vertex with the lowest-indexed vertex at a lattice-equivalent position."""
    if len(frac) == 0:
        return np.zeros((0, 2), dtype=int)
    reduced = np.mod(frac, 1.0)
    reduced[np.abs(reduced - 1.0) < tol] = 0.0
    keys = np.round(reduced / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    master = first[inverse]
    slaves = np.nonzero(master != np.arange(len(frac)))[0]
    return np.stack([slaves, master[slaves]], axis=1).astype(int)


def _finish(frac: np.ndarray, triangles: np.ndarray, cell: np.ndarray,
            min_area_frac: float = 1e-12) -> TriangularMesh:
    # crossings that land on the same grid vertex from two edges are one vertex
    keys = np.round(frac / PERIODIC_TOL).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    tris = first[inverse.reshape(-1)][np.asarray(triangles, dtype=int).reshape(-1, 3)]
    verts = frac @ cell.T
    p = verts[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    cell_area = abs(np.linalg.det(cell))
    tris = tris[np.abs(area) > min_area_frac * cell_area]
    if len(tris) == 0:
        raise EmptyDesignError("no material triangles")
    used = np.unique(tris)
    remap = -np.ones(len(verts), dtype=int)
    remap[used] = np.arange(len(used))
    frac = frac[used]
    return TriangularMesh(frac @ cell.T, frac, remap[tris], periodic_pairs(frac), cell)


# ---------------------------------------------------------------- structured


def _background(cloud: PointCloud, values: np.ndarray, rhombic: bool):
    """Background vertices (frac coords, values) and CCW triangles."""
    n, m = cloud.resolution, cloud.m
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    gid = lambda i, j: i * n + j  # noqa: E731
    c0, c1, c2, c3 = gid(ii, jj), gid(ii + 1, jj), gid(ii + 1, jj + 1), gid(ii, jj + 1)
    frac = (np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), -1) / m).reshape(-1, 2)
    vals = values.reshape(-1)
    if rhombic:
        tris = np.concatenate([
            np.stack([c0, c1, c3], -1).reshape(-1, 3),
            np.stack([c1, c2, c3], -1).reshape(-1, 3),
        ])
        return frac, vals, tris
    cid = n * n + ii * m + jj
    cfrac = (np.stack([ii, jj], -1).reshape(-1, 2) + 0.5) / m
    cval = 0.25 * (values[:-1, :-1] + values[1:, :-1] + values[1:, 1:] + values[:-1, 1:]).reshape(-1)
    tris = np.concatenate([
        np.stack([cid, c0, c1], -1).reshape(-1, 3),
        np.stack([cid, c1, c2], -1).reshape(-1, 3),
        np.stack([cid, c2, c3], -1).reshape(-1, 3),
        np.stack([cid, c3, c0], -1).reshape(-1, 3),
    ])
    return np.concatenate([frac, cfrac]), np.concatenate([vals, cval]), tris


def structured_mesh(sampled: SampledField, cloud: PointCloud, rhombic: bool = False,
                    snap_tol: float = 1e-12) -> TriangularMesh:
    """Clip the background triangulation against ``normalized >= threshold``."""
    t = sampled.threshold
    frac, vals, tris = _background(cloud, sampled.normalized, rhombic)
    mat = vals >= t
    k = mat[tris].sum(axis=1)
    if not np.any(k):
        raise EmptyDesignError("no material vertices")

    full = tris[k == 3]
    cut = tris[(k == 1) | (k == 2)]

    # one boundary vertex per cut background edge
    edges = np.concatenate([cut[:, [0, 1]], cut[:, [1, 2]], cut[:, [2, 0]]])
    ekey = np.sort(edges, axis=1)
    crossing = mat[ekey[:, 0]] != mat[ekey[:, 1]]
    ukeys = np.unique(ekey[crossing], axis=0)
    p = np.where(mat[ukeys[:, 0]], ukeys[:, 0], ukeys[:, 1])
    q = np.where(mat[ukeys[:, 0]], ukeys[:, 1], ukeys[:, 0])
    rho = (vals[p] - t) / (vals[p] - vals[q])
    bfrac = _snap_to_edges((1 - rho)[:, None] * frac[p] + rho[:, None] * frac[q])
    bid = len(frac) + np.arange(len(ukeys))
    bid = np.where(rho <= snap_tol, p, bid)  # crossing sits on the material vertex
    lookup = {(int(a), int(b)): int(c) for (a, b), c in zip(ukeys, bid)}

    base = np.concatenate([frac, bfrac])
    extra = []
    next_id = len(frac) + len(ukeys)
    out = [full]
    for tri in cut:
        poly = []
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if mat[a]:
                poly.append(int(a))
            if mat[a] != mat[b]:
                poly.append(lookup[(min(a, b), max(a, b))])
        if len(poly) == 3:
            out.append(np.array([poly]))
        else:
            # quad: fan around its centroid so mirror-symmetric cuts stay symmetric
            extra.append(base[poly].mean(axis=0))
            c = next_id
            next_id += 1
            out.append(np.array([[c, poly[s], poly[(s + 1) % 4]] for s in range(4)]))
    coords = np.concatenate([base, np.array(extra).reshape(-1, 2)])
    return _finish(coords, np.concatenate(out), cloud.cell)


# ---------------------------------------------------------------- delaunay


def delaunay_triangles(points: np.ndarray) -> np.ndarray:
    """Delaunay triangles of a 2D point set; degenerate input raises MeshingError."""
    points = np.asarray(points, float)
    if len(points) < 3:
        raise MeshingError("need at least three points to triangulate")
    try:
        tri = Delaunay(points)
    except (QhullError, ValueError) as exc:
        raise MeshingError(f"degenerate point set: {exc}") from exc
    return tri.simplices


def delaunay_mesh(sampled: SampledField, cloud: PointCloud) -> TriangularMesh:
    grid = cloud.frac.reshape(-1, 2)
    mat = (sampled.labels == 1).reshape(-1)
    bfrac, *_ = boundary_crossings(sampled, cloud)
    pts = np.concatenate([grid[mat], bfrac])
    # canonical order and de-duplication make the result order independent
    keys = np.round(pts / PERIODIC_TOL).astype(np.int64)
    _, keep = np.unique(keys, axis=0, return_index=True)
    pts = pts[np.sort(keep)]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    tris = delaunay_triangles(pts @ cloud.cell.T)
    centroid = pts[tris].mean(axis=1)
    inside = bilinear(sampled.normalized, centroid) >= sampled.threshold
    return _finish(pts, tris[inside], cloud.cell)


MESHERS = {"structured": structured_mesh, "delaunay": delaunay_mesh}


def build_mesh(sampled: SampledField, cloud: PointCloud, method: str = "structured",
               rhombic: bool | None = None) -> TriangularMesh:
    if sampled.labels is None or not np.any(sampled.labels == 1):
        raise EmptyDesignError("no material to mesh")
    if rhombic is None:
        rhombic = not np.allclose(cloud.cell, np.eye(2))
    if method == "structured":
        return structured_mesh(sampled, cloud, rhombic=rhombic)
    if method == "delaunay":
        return delaunay_mesh(sampled, cloud)
    raise ValueError(f"unknown mesher {method!r}")
