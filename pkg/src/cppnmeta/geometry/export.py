"""Mesh files and SVG drawings of a unit cell and its tessellation."""

from __future__ import annotations

import gzip
import json
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh import TriangularMesh


def write_off(mesh: TriangularMesh, path) -> None:
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    lines += [f"{x:.12g} {y:.12g} 0" for x, y in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path) -> tuple[np.ndarray, np.ndarray]:
    tokens = Path(path).read_text().split()
    if tokens[0] != "OFF":
        raise ValueError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos:pos + 3 * nv], float).reshape(nv, 3)[:, :2]
    pos += 3 * nv
    faces = np.array(tokens[pos:pos + 4 * nf], int).reshape(nf, 4)[:, 1:]
    return verts, faces


def mesh_to_dict(mesh: TriangularMesh) -> dict:
    return {
        "format": "periodic-tri-mesh",
        "version": 1,
        "cell": mesh.cell.tolist(),
        "vertices": mesh.vertices.tolist(),
        "frac": mesh.frac.tolist(),
        "triangles": mesh.triangles.tolist(),
        "periodic_pairs": mesh.edge_pairs.tolist(),
    }


def mesh_from_dict(data: dict) -> TriangularMesh:
    return TriangularMesh(
        np.array(data["vertices"], float).reshape(-1, 2),
        np.array(data["frac"], float).reshape(-1, 2),
        np.array(data["triangles"], int).reshape(-1, 3),
        np.array(data["periodic_pairs"], int).reshape(-1, 2),
        np.array(data["cell"], float),
    )


def write_mesh_json(mesh: TriangularMesh, path) -> None:
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(json.dumps(mesh_to_dict(mesh)).encode("utf-8"))


def read_mesh_json(path) -> TriangularMesh:
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        return mesh_from_dict(json.load(fh))


# ---------------------------------------------------------------- svg


def _merge_vertices(vertices: np.ndarray, triangles: np.ndarray, tol=1e-9):
    keys = np.round(vertices / tol).astype(np.int64)
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return vertices[first], inv.reshape(-1)[triangles]


def triangle_groups(triangles: np.ndarray) -> np.ndarray:
    """Label of the edge-connected group of every triangle."""
    nt = len(triangles)
    edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    owner = np.tile(np.arange(nt), 3)
    _, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    inv_s, own_s = inv[order], owner[order]
    same = inv_s[1:] == inv_s[:-1]
    g = coo_matrix((np.ones(int(same.sum())), (own_s[:-1][same], own_s[1:][same])), shape=(nt, nt))
    return connected_components(g, directed=False)[1]


def boundary_loops(triangles: np.ndarray) -> list[list[int]]:
    """Closed loops of directed boundary edges of a consistently oriented triangle set."""
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    present = {(int(a), int(b)) for a, b in directed}
    succ: dict[int, list[int]] = {}
    for a, b in directed:
        a, b = int(a), int(b)
        if (b, a) not in present:
            succ.setdefault(a, []).append(b)
    for v in succ:
        succ[v].sort(reverse=True)
    loops = []
    for start in sorted(succ):
        while succ.get(start):
            loop = [start]
            cur = succ[start].pop()
            while cur != start:
                loop.append(cur)
                cur = succ[cur].pop()
            loops.append(loop)
    return loops


def _tile(mesh: TriangularMesh, reps: int):
    verts, tris = [], []
    a1, a2 = mesh.cell[:, 0], mesh.cell[:, 1]
    off = 0
    for i in range(reps):
        for j in range(reps):
            verts.append(mesh.vertices + i * a1 + j * a2)
            tris.append(mesh.triangles + off)
            off += len(mesh.vertices)
    return _merge_vertices(np.concatenate(verts), np.concatenate(tris))


def _panel_paths(verts: np.ndarray, tris: np.ndarray, to_px) -> list[str]:
    labels = triangle_groups(tris)
    paths = []
    for g in np.unique(labels):
        d = []
        for loop in boundary_loops(tris[labels == g]):
            pts = [to_px(verts[v]) for v in loop]
            d.append("M" + " L".join(f"{x:.3f},{y:.3f}" for x, y in pts) + " Z")
        paths.append(" ".join(d))
    return paths


def render_svg(mesh: TriangularMesh, path=None, size: float = 240.0, fill: str = "#1f3b5a") -> str:
    """Unit cell (left) and 3 x 3 tessellation (right); one path per material group."""
    corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]]) @ mesh.cell.T
    span = np.ptp(corners, axis=0)
    scale_cell = size / span.max()
    scale_tile = size / (3 * span.max())
    pad = 10.0
    height = size * span[1] / span.max() + 2 * pad

    def mapper(scale, x0):
        lo = corners.min(axis=0)
        return lambda p: (x0 + (p[0] - lo[0]) * scale, pad + (lo[1] + span[1] - p[1]) * scale)

    panels = [
        ("cell", *_merge_vertices(mesh.vertices, mesh.triangles), mapper(scale_cell, pad)),
        ("tiling", *_tile(mesh, 3), mapper(scale_tile, 2 * pad + size)),
    ]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * size + 3 * pad:.0f}" height="{height:.0f}">',
    ]
    for name, verts, tris, to_px in panels:
        out.append(f"<g id={quoteattr(name)}>")
        outline = [to_px(p) for p in corners[[0, 1, 3, 2]]]
        out.append('<polygon class="cell" fill="none" stroke="#999" points="'
                   + " ".join(f"{x:.3f},{y:.3f}" for x, y in outline) + '"/>')
        for d in _panel_paths(verts, tris, to_px):
            out.append(f'<path class="material" fill="{fill}" fill-rule="nonzero" d="{d}"/>')
        out.append("</g>")
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
