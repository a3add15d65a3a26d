"""Sampling a genome on a point cloud and turning intensities into labels."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..cppn import Genome, evaluate_batch
from ..errors import DegenerateFieldError, EmptyDesignError
from .symmetry import SymmetryGroup

DEFAULT_RESOLUTION = 35
DEFAULT_THRESHOLD = 0.5

# 8-neighbour offsets, each undirected pair listed once
NEIGHBOR_OFFSETS_8 = ((1, 0), (0, 1), (1, 1), (1, -1))
NEIGHBOR_OFFSETS_4 = ((1, 0), (0, 1))


@dataclass(frozen=True)
class PointCloud:
    """Closed ``n x n`` grid over the unit cell, edges included.

    Index ``(i, j)`` sits at fractional coordinates ``(i, j) / (n - 1)``;
    the last row and column duplicate the first ones by translation.
    """

    resolution: int
    cell: np.ndarray
    neighbors: tuple[tuple[int, int], ...] = NEIGHBOR_OFFSETS_8

    def __post_init__(self):
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")

    @property
    def m(self) -> int:
        return self.resolution - 1

    @property
    def spacing(self) -> float:
        return 1.0 / self.m

    @property
    def frac(self) -> np.ndarray:
        n = self.resolution
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return np.stack([ii, jj], axis=-1) / self.m

    @property
    def points(self) -> np.ndarray:
        """``(n, n, 2)`` Cartesian coordinates."""
        return self.frac @ self.cell.T

    def to_cartesian(self, frac) -> np.ndarray:
        return np.asarray(frac) @ self.cell.T

    def pairs(self):
        """Adjacent index pairs ``(p, q)`` of the closed grid as two ``(k, 2)`` arrays."""
        n = self.resolution
        ps, qs = [], []
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        for di, dj in self.neighbors:
            qi, qj = ii + di, jj + dj
            ok = (qi >= 0) & (qi < n) & (qj >= 0) & (qj < n)
            ps.append(np.stack([ii[ok], jj[ok]], axis=1))
            qs.append(np.stack([qi[ok], qj[ok]], axis=1))
        return np.concatenate(ps), np.concatenate(qs)


def make_cloud(group: SymmetryGroup, resolution: int = DEFAULT_RESOLUTION,
               connectivity: int = 8) -> PointCloud:
    offsets = NEIGHBOR_OFFSETS_8 if connectivity == 8 else NEIGHBOR_OFFSETS_4
    return PointCloud(resolution, group.cell, offsets)


@dataclass(frozen=True)
class SampledField:
    """Intensity field on a :class:`PointCloud`, filled in stage by stage."""

    raw: np.ndarray
    normalized: np.ndarray | None = None
    labels: np.ndarray | None = None
    boundary_points: np.ndarray | None = None
    threshold: float = DEFAULT_THRESHOLD
    patch_evaluations: int = field(default=0, compare=False)

    @property
    def material(self) -> np.ndarray:
        return self.labels == 1

    def volume_fraction_estimate(self) -> float:
        """Share of material grid points on the periodic grid."""
        return float(np.mean(self.labels[:-1, :-1] == 1))


def _wrap_closed(values: np.ndarray) -> np.ndarray:
    """Extend an ``m x m`` periodic array to the closed ``(m+1) x (m+1)`` grid."""
    return np.pad(values, ((0, 1), (0, 1)), mode="wrap")


def sample_patch(genome: Genome, group: SymmetryGroup, cloud: PointCloud) -> SampledField:
    """Evaluate the CPPN once per orbit and copy the value to every orbit member.

    The network is fed the Cartesian coordinates of each orbit's
    representative inside the fundamental patch.
    """
    m = cloud.m
    reps = group.representatives(m)
    flat = reps[..., 0] * m + reps[..., 1]
    unique, inverse = np.unique(flat, return_inverse=True)
    rep_frac = np.stack([unique // m, unique % m], axis=1) / m
    values = evaluate_batch(genome, cloud.to_cartesian(rep_frac))
    raw = values[inverse.reshape(m, m)]
    return SampledField(raw=_wrap_closed(raw), patch_evaluations=len(unique))


def normalize(sampled: SampledField) -> SampledField:
    """Min-max scale the raw field onto ``[0, 1]``."""
    raw = np.asarray(sampled.raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise DegenerateFieldError("field contains non-finite values")
    lo, hi = float(raw.min()), float(raw.max())
    if not hi > lo:
        raise DegenerateFieldError("constant field cannot be normalized")
    norm = (raw - lo) / (hi - lo)
    # pin the extremes exactly; rounding can otherwise leave 1 - eps
    norm[raw == lo] = 0.0
    norm[raw == hi] = 1.0
    return replace(sampled, normalized=norm)


def label(sampled: SampledField, threshold: float = DEFAULT_THRESHOLD) -> SampledField:
    """Material (+1) where ``normalized >= threshold``, void (-1) elsewhere."""
    labels = np.where(sampled.normalized >= threshold, 1, -1).astype(np.int8)
    if not np.any(labels == 1):
        raise EmptyDesignError("no material above threshold")
    return replace(sampled, labels=labels, threshold=threshold)


def interpolate_crossing(xp, xq, vp, vq, threshold):
    """Point on segment p-q where the linear interpolant equals ``threshold``.

    ``rho = |vp - T| / |vp - vq|`` measured from ``p``.
    """
    vp, vq = np.asarray(vp, float), np.asarray(vq, float)
    rho = np.abs(vp - threshold) / np.abs(vp - vq)
    xp, xq = np.asarray(xp, float), np.asarray(xq, float)
    return (1.0 - rho)[..., None] * xp + rho[..., None] * xq, rho


def _snap_to_edges(frac: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    frac = frac.copy()
    frac[np.abs(frac) < tol] = 0.0
    frac[np.abs(frac - 1.0) < tol] = 1.0
    return frac


def boundary_crossings(sampled: SampledField, cloud: PointCloud):
    """Boundary points with their grid pairs.

    Returns ``(frac_points, p_index, q_index, rho)``, with ``p`` the
    material end of each adjacent pair.
    """
    t = sampled.threshold
    v = sampled.normalized
    a, b = cloud.pairs()
    va, vb = v[a[:, 0], a[:, 1]], v[b[:, 0], b[:, 1]]
    fwd = (va >= t) & (vb < t)
    bwd = (vb >= t) & (va < t)
    p = np.concatenate([a[fwd], b[bwd]])
    q = np.concatenate([b[fwd], a[bwd]])
    if len(p) == 0:
        return np.zeros((0, 2)), p, q, np.zeros(0)
    frac, rho = interpolate_crossing(
        p / cloud.m, q / cloud.m, v[p[:, 0], p[:, 1]], v[q[:, 0], q[:, 1]], t
    )
    return _snap_to_edges(frac), p, q, rho


def extract_boundary(sampled: SampledField, cloud: PointCloud) -> SampledField:
    """Attach Cartesian boundary points for every material/void neighbour pair."""
    frac, *_ = boundary_crossings(sampled, cloud)
    return replace(sampled, boundary_points=cloud.to_cartesian(frac))


def bilinear(values: np.ndarray, frac: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a closed-grid array at fractional coordinates."""
    m = values.shape[0] - 1
    g = np.clip(np.asarray(frac, float) * m, 0.0, m)
    i0 = np.minimum(np.floor(g[..., 0]).astype(int), m - 1)
    j0 = np.minimum(np.floor(g[..., 1]).astype(int), m - 1)
    s, t = g[..., 0] - i0, g[..., 1] - j0
    return (
        values[i0, j0] * (1 - s) * (1 - t)
        + values[i0 + 1, j0] * s * (1 - t)
        + values[i0, j0 + 1] * (1 - s) * t
        + values[i0 + 1, j0 + 1] * s * t
    )


def develop(genome: Genome, group: SymmetryGroup, cloud: PointCloud,
            threshold: float = DEFAULT_THRESHOLD) -> SampledField:
    """Run sampling, normalization, labelling and boundary extraction."""
    f = sample_patch(genome, group, cloud)
    f = normalize(f)
    f = label(f, threshold)
    return extract_boundary(f, cloud)
