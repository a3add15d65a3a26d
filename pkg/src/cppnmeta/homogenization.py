"""Periodic homogenization of a meshed unit cell with constant-strain triangles.

Plane stress, unit thickness, Voigt order ``(xx, yy, xy)`` with engineering
shear strain. Periodicity is imposed by substituting every slave vertex by
its master; rigid translations are removed by pinning the lowest master.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import ConfigError, DegenerateTensorError, SolverFailure
from .geometry.mesh import TriangularMesh

RESIDUAL_TOL = 1e-10
RATIO_SENTINEL = 1e9


@dataclass(frozen=True)
class BaseMaterial:
    youngs_modulus: float = 1.0
    poisson_ratio: float = 0.3

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise ConfigError("youngs_modulus must be positive")
        if not -1 < self.poisson_ratio < 1:
            raise ConfigError("poisson_ratio must lie in (-1, 1)")

    def stiffness(self) -> np.ndarray:
        e, nu = self.youngs_modulus, self.poisson_ratio
        return e / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])


@dataclass(frozen=True)
class ElasticTensor:
    c: np.ndarray
    s: np.ndarray
    e_avg: float
    nu_avg: float

    @classmethod
    def from_stiffness(cls, c: np.ndarray) -> "ElasticTensor":
        """Wrap a stiffness matrix. A singular ``c`` (e.g. a laminate with no
        transverse stiffness) gets NaN compliance and NaN ``E``, ``nu``."""
        c = 0.5 * (c + c.T)
        scale = np.linalg.norm(c)
        if scale > 0 and np.linalg.cond(c) < 1e12:
            s = np.linalg.inv(c)
            e, nu = elastic_constants(s)
        else:
            s = np.full((3, 3), np.nan)
            e = nu = float("nan")
        return cls(c, s, e, nu)

    @property
    def invertible(self) -> bool:
        return bool(np.all(np.isfinite(self.s)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.c))

    def components(self) -> dict[str, float]:
        c = self.c
        return {
            "C11": float(c[0, 0]), "C12": float(c[0, 1]), "C13": float(c[0, 2]),
            "C22": float(c[1, 1]), "C23": float(c[1, 2]), "C33": float(c[2, 2]),
            "E": self.e_avg, "nu": self.nu_avg,
        }

    def isotropy_residual(self) -> float:
        c = self.c
        return abs(c[2, 2] - 0.5 * (c[0, 0] - c[0, 1])) / self.norm


def elastic_constants(s: np.ndarray) -> tuple[float, float]:
    """Average Young's modulus and Poisson's ratio from a compliance matrix."""
    s = np.asarray(s, float)
    if s[0, 0] == 0 or s[1, 1] == 0:
        raise DegenerateTensorError("zero diagonal compliance")
    e = 0.5 * (1.0 / s[0, 0] + 1.0 / s[1, 1])
    nu = -0.5 * (s[1, 0] / s[0, 0] + s[0, 1] / s[1, 1])
    return float(e), float(nu)


def strain_displacement(vertices: np.ndarray, triangles: np.ndarray):
    """CST strain-displacement matrices ``(T, 3, 6)`` and triangle areas."""
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    B = np.zeros((len(triangles), 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    B /= (2 * area)[:, None, None]
    return B, area


def _check_edge_connected(tris_m: np.ndarray):
    """All triangles must be linked through shared edges (after periodic tying)."""
    nt = len(tris_m)
    edges = np.sort(np.concatenate([tris_m[:, [0, 1]], tris_m[:, [1, 2]], tris_m[:, [2, 0]]]), axis=1)
    owner = np.tile(np.arange(nt), 3)
    _, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    inv_s, own_s = inv[order], owner[order]
    same = inv_s[1:] == inv_s[:-1]
    a, b = own_s[:-1][same], own_s[1:][same]
    g = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(nt, nt))
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise SolverFailure(f"mesh splits into {ncomp} edge-connected pieces")


def homogenize(mesh: TriangularMesh, material: BaseMaterial = BaseMaterial()) -> ElasticTensor:
    """Effective Voigt stiffness of the periodic cell.

    Solves the three unit-strain cell problems for the periodic fluctuation
    and averages the mutual strain energy over the full cell area (voids
    contribute nothing).
    """
    D = material.stiffness()
    master = mesh.master
    uniq, compact = np.unique(master, return_inverse=True)
    compact = compact.reshape(-1)
    tris_m = compact[mesh.triangles]
    _check_edge_connected(tris_m)

    B, area = strain_displacement(mesh.vertices, mesh.triangles)
    if np.any(area <= 0):
        raise SolverFailure("mesh has non-positive triangle areas")
    ndof = 2 * len(uniq)
    dofs = np.empty((len(tris_m), 6), dtype=int)
    dofs[:, 0::2] = 2 * tris_m
    dofs[:, 1::2] = 2 * tris_m + 1

    DB = np.einsum("ij,tjk->tik", D, B)
    Ke = np.einsum("tji,tjk->tik", B, DB) * area[:, None, None]
    rows = np.repeat(dofs, 6, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, 6)).reshape(-1)
    K = sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(ndof, ndof)).tocsc()

    # right-hand sides: f_k = -sum_e A B^T D e_k
    strains = np.eye(3)
    Fe = -np.einsum("tji,jk->tik", DB, strains) * area[:, None, None]  # (T, 6, 3)
    F = np.zeros((ndof, 3))
    np.add.at(F, dofs.reshape(-1), Fe.reshape(-1, 3))

    free = np.arange(2, ndof)  # master 0 pinned
    Kf = K[free][:, free].tocsc()
    try:
        lu = splu(Kf)
        U = np.zeros((ndof, 3))
        U[free] = lu.solve(F[free])
    except RuntimeError as exc:
        raise SolverFailure(f"singular cell problem: {exc}") from exc
    if not np.all(np.isfinite(U)):
        raise SolverFailure("non-finite displacements")
    res = np.linalg.norm(Kf @ U[free] - F[free])
    scale = max(np.linalg.norm(F[free]), 1e-300)
    if np.linalg.norm(F[free]) > 0 and res > RESIDUAL_TOL * scale:
        raise SolverFailure(f"relative residual {res / scale:.2e} above tolerance")

    # total strain per triangle for each load case: (T, 3, 3) columns = cases
    ue = U[dofs]  # (T, 6, 3)
    eps = strains[None] + np.einsum("tij,tjk->tik", B, ue)
    C = np.einsum("tji,jk,tkl,t->il", eps, D, eps, area) / mesh.cell_area
    return ElasticTensor.from_stiffness(C)


PROPERTIES = ("E", "nu", "C11", "C22", "C33", "C12", "C13", "C23", "C11/C12")
DIRECTIONS = ("maximize", "minimize")


def property_value(tensor: ElasticTensor, name: str) -> float:
    comps = tensor.components()
    if name == "C11/C12":
        c12 = comps["C12"]
        if abs(c12) < 1e-12:
            return RATIO_SENTINEL
        return comps["C11"] / c12
    if name not in comps:
        raise ConfigError(f"unknown property {name!r}; choose from {PROPERTIES}")
    return comps[name]


def validate_objectives(objectives: Sequence[tuple[str, str]]):
    for name, direction in objectives:
        if name not in PROPERTIES:
            raise ConfigError(f"unknown property {name!r}; choose from {PROPERTIES}")
        if direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def fitness_vector(tensor: ElasticTensor, objectives: Sequence[tuple[str, str]]) -> list[float]:
    """Objective values in the minimization convention (maximized ones negated)."""
    validate_objectives(objectives)
    out = []
    for name, direction in objectives:
        v = property_value(tensor, name)
        if not np.isfinite(v):
            raise DegenerateTensorError(f"property {name} undefined for a singular tensor")
        out.append(-v if direction == "maximize" else v)
    return out
