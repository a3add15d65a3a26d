from pathlib import Path

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

import cppnmeta
from cppnmeta import cppn
from cppnmeta.errors import DegenerateFieldError, EmptyDesignError, InfeasibleDesign, MeshingError
from cppnmeta.geometry import (
    SampledField, build_mesh, check_constraints, develop, extract_boundary, get_group, label,
    make_cloud, normalize, sample_patch,
)
from cppnmeta.geometry.export import read_mesh_json, render_svg, write_mesh_json
from cppnmeta.geometry.field import bilinear, boundary_crossings
from cppnmeta.geometry.mesh import delaunay_triangles

from conftest import grow, passthrough, seeds
from oracles import brute_force_3x3

GENOMES = Path(cppnmeta.__file__).parent / "data" / "genomes"

TAGS = ("p1", "p2mm", "p4", "p4mm", "p31m")


def developed(seed, tag, resolution=21):
    group = get_group(tag)
    cloud = make_cloud(group, resolution)
    try:
        return group, cloud, develop(grow(seed), group, cloud)
    except InfeasibleDesign:
        return group, cloud, None


# ---------------------------------------------------------------- symmetry


@pytest.mark.parametrize("tag,size", [("p4mm", 8), ("p4", 4), ("p2mm", 4), ("p1", 1), ("p31m", 6)])
def test_orbit_sizes(tag, size):
    group = get_group(tag)
    assert group.order == size
    # a generic grid point has a full orbit
    assert len(group.orbit(3, 7, 40)) == size


@pytest.mark.parametrize("tag", TAGS)
def test_orbit_maps_form_a_group(tag):
    ops = get_group(tag).orbit_maps
    keys = {op.tobytes() for op in ops}
    for a in ops:
        for b in ops:
            assert (a @ b).tobytes() in keys
        assert abs(round(np.linalg.det(a))) == 1


@pytest.mark.parametrize("tag", ["p4mm", "p4", "p2mm", "p31m"])
def test_orbit_maps_preserve_the_metric(tag):
    # integer lattice maps are Euclidean isometries of the cell
    group = get_group(tag)
    a = group.cell
    for op in group.orbit_maps:
        r = a @ op @ np.linalg.inv(a)
        np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("tag", TAGS)
def test_representatives_tile_the_cell(tag):
    group = get_group(tag)
    m = 24
    reps = group.representatives(m)
    for i in range(m):
        for j in range(m):
            rep = tuple(reps[i, j])
            assert rep in group.orbit(i, j, m)
            assert group.in_patch(rep[0] / m, rep[1] / m)
    # every orbit is represented exactly once
    assert len({tuple(r) for r in reps.reshape(-1, 2)}) == len(
        {frozenset(group.orbit(i, j, m)) for i in range(m) for j in range(m)})


@given(seeds)
def test_p1_raw_equals_direct_evaluation(seed):
    g = grow(seed)
    group = get_group("p1")
    cloud = make_cloud(group, 15)
    raw = sample_patch(g, group, cloud).raw
    direct = cppn.evaluate_batch(g, cloud.points.reshape(-1, 2)).reshape(15, 15)
    np.testing.assert_array_equal(raw[:-1, :-1], direct[:-1, :-1])
    # the closing row and column are periodic copies
    np.testing.assert_array_equal(raw[-1], raw[0])
    np.testing.assert_array_equal(raw[:, -1], raw[:, 0])


@given(seeds)
def test_p4mm_mirror_and_p4_rotation(seed):
    g = grow(seed)
    n = 21
    raw = sample_patch(g, get_group("p4mm"), make_cloud(get_group("p4mm"), n)).raw
    np.testing.assert_array_equal(raw, raw.T)
    raw4 = sample_patch(g, get_group("p4"), make_cloud(get_group("p4"), n)).raw
    # (x, y) -> (-y, x) about the cell centre is a quarter turn of the closed grid
    np.testing.assert_array_equal(raw4, np.rot90(raw4))


@given(seeds, st.sampled_from(TAGS))
def test_symmetry_transfer_of_labels(seed, tag):
    group, cloud, f = developed(seed, tag)
    if f is None:
        return
    m = cloud.m
    lab = f.labels[:-1, :-1]
    for op in group.orbit_maps:
        for i in range(0, m, 3):
            for j in range(0, m, 2):
                a, b = (op @ np.array([i, j])) % m
                assert lab[a, b] == lab[i, j]


def test_patch_evaluation_count():
    g = passthrough()
    group = get_group("p4mm")
    f = sample_patch(g, group, make_cloud(group, 35))
    assert f.patch_evaluations < 35 * 35 / 6


# ---------------------------------------------------------------- normalize and label


def test_normalize_examples():
    f = normalize(SampledField(raw=np.array([2.0, 4.0, 6.0])))
    assert f.normalized.tolist() == [0.0, 0.5, 1.0]
    assert normalize(SampledField(raw=np.array([-5.0, 0.0]))).normalized.tolist() == [0.0, 1.0]
    with pytest.raises(DegenerateFieldError):
        normalize(SampledField(raw=np.array([1.0, 1.0, 1.0])))
    with pytest.raises(DegenerateFieldError):
        normalize(SampledField(raw=np.array([0.0, np.nan])))


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_normalize_monotone(values):
    v = np.array(values)
    if v.max() == v.min():
        return
    out = normalize(SampledField(raw=v)).normalized
    assert out.min() == 0.0 and out.max() == 1.0
    for a in range(len(v)):
        for b in range(len(v)):
            if v[a] < v[b]:
                assert out[a] <= out[b]
                # strict when the gap survives floating point scaling
                if (v[b] - v[a]) > 1e-9 * (v.max() - v.min()):
                    assert out[a] < out[b]


def test_label_examples():
    def lab(values):
        return label(SampledField(raw=None, normalized=np.array(values)), 0.5).labels.tolist()

    assert lab([0.4, 0.5, 0.6]) == [-1, 1, 1]
    assert lab([0.0, 1.0]) == [-1, 1]
    with pytest.raises(EmptyDesignError):
        lab([0.1, 0.2, 0.3])


# ---------------------------------------------------------------- boundary


def test_boundary_point_symmetric_case():
    cloud = make_cloud(get_group("p1"), 3)
    f = SampledField(raw=None, normalized=np.array([[0.9] * 3, [0.1] * 3, [0.9] * 3]), labels=None)
    f = label(f, 0.5)
    frac, p, q, rho = boundary_crossings(f, cloud)
    on_row = frac[np.isclose(frac[:, 1], 0.0)]
    assert any(np.allclose(x, (0.25, 0.0)) for x in on_row)
    assert np.allclose(rho, 0.5)


def test_boundary_rho_example():
    # p = (0, 0) with 0.6, q = (1, 0) with 0.1: crossing at rho = 0.2 from p
    from cppnmeta.geometry.field import interpolate_crossing

    x, rho = interpolate_crossing(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]),
                                  np.array([0.6]), np.array([0.1]), 0.5)
    assert rho[0] == pytest.approx(0.2, abs=1e-15)
    np.testing.assert_allclose(x[0], (0.2, 0.0), atol=1e-15)


def test_no_sign_change_gives_empty_boundary():
    cloud = make_cloud(get_group("p1"), 5)
    f = label(SampledField(raw=None, normalized=np.ones((5, 5))), 0.5)
    assert len(extract_boundary(f, cloud).boundary_points) == 0


@given(seeds, st.sampled_from(TAGS))
def test_boundary_points_on_the_level_set(seed, tag):
    group, cloud, f = developed(seed, tag)
    if f is None:
        return
    frac, p, q, rho = boundary_crossings(f, cloud)
    v = f.normalized
    vp, vq = v[p[:, 0], p[:, 1]], v[q[:, 0], q[:, 1]]
    # linear interpolant along each grid segment, evaluated at the emitted point
    s = np.linalg.norm(frac - p / cloud.m, axis=1) / np.linalg.norm((q - p) / cloud.m, axis=1)
    interp = vp + s * (vq - vp)
    assert np.all(np.abs(interp - f.threshold) < 1e-12)
    assert np.all((vp >= f.threshold) & (vq < f.threshold))


def _hausdorff(a, b):
    d = cdist(a, b)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


@pytest.mark.parametrize("seed", range(8))
def test_refinement_hausdorff(seed):
    g = grow(seed + 100)
    group = get_group("p4mm")
    try:
        coarse = develop(g, group, make_cloud(group, 21)).boundary_points
        fine = develop(g, group, make_cloud(group, 41)).boundary_points
    except InfeasibleDesign:
        return
    if len(coarse) == 0 or len(fine) == 0:
        return
    assert _hausdorff(coarse, fine) <= 1 / 20 + 1e-12


# ---------------------------------------------------------------- meshing


@pytest.mark.parametrize("method", ["structured", "delaunay"])
@pytest.mark.parametrize("tag", ["p1", "p31m"])
def test_full_cell_mesh_area(method, tag):
    group = get_group(tag)
    cloud = make_cloud(group, 11)
    f = label(SampledField(raw=None, normalized=np.ones((11, 11))), 0.5)
    f = extract_boundary(f, cloud)
    mesh = build_mesh(f, cloud, method, group.rhombic)
    assert mesh.area() == pytest.approx(group.cell_area, abs=1e-9)
    assert np.all(mesh.signed_areas() > 0)


@pytest.mark.parametrize("method", ["structured", "delaunay"])
def test_half_cell_mesh_area(method):
    # field 1 - x on [0, 1]: material where x <= 0.5
    group = get_group("p1")
    cloud = make_cloud(group, 35)
    g = passthrough(weight=-1.0)
    raw = cppn.evaluate_batch(g, cloud.points.reshape(-1, 2)).reshape(35, 35)
    f = extract_boundary(label(normalize(SampledField(raw=raw)), 0.5), cloud)
    mesh = build_mesh(f, cloud, method)
    assert abs(mesh.area() - 0.5) <= 1 / 34


def test_collinear_points_raise_meshing_error():
    with pytest.raises(MeshingError):
        delaunay_triangles(np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]))


def test_delaunay_area_invariant_under_point_order():
    rng = np.random.default_rng(0)
    pts = rng.random((40, 2))
    base = delaunay_triangles(pts)

    def area(p, t):
        d1, d2 = p[t[:, 1]] - p[t[:, 0]], p[t[:, 2]] - p[t[:, 0]]
        return np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]).sum() / 2

    perm = rng.permutation(40)
    assert area(pts[perm], delaunay_triangles(pts[perm])) == pytest.approx(area(pts, base), abs=1e-12)


@given(seeds, st.sampled_from(TAGS), st.sampled_from(["structured", "delaunay"]))
# two crossings landing on one void centre vertex
@example(3066, "p1", "structured")
def test_mesh_invariants(seed, tag, method):
    group, cloud, f = developed(seed, tag)
    if f is None:
        return
    try:
        mesh = build_mesh(f, cloud, method, group.rhombic)
    except InfeasibleDesign:
        return
    assert np.all(mesh.signed_areas() > 0)
    assert set(np.unique(mesh.triangles)) == set(range(len(mesh.vertices)))
    assert mesh.area() <= group.cell_area * (1 + 1e-12)
    # every slave sits at a lattice translate of its master
    for s, m in mesh.edge_pairs:
        d = mesh.frac[s] - mesh.frac[m]
        assert np.allclose(d, np.round(d), atol=1e-9) and np.any(np.round(d) != 0)
    # centroids of the structured mesh lie in material
    if method == "structured":
        cen = mesh.frac[mesh.triangles].mean(axis=1)
        assert np.all(bilinear(f.normalized, cen) >= f.threshold - 0.5)


@given(seeds)
def test_mesh_area_invariant_under_grid_transpose(seed):
    # reordering the input (mirror x <-> y) leaves the area unchanged
    group, cloud, f = developed(seed, "p1")
    if f is None:
        return
    ft = label(SampledField(raw=f.raw.T, normalized=f.normalized.T), f.threshold)
    ft = extract_boundary(ft, cloud)
    for method in ("structured", "delaunay"):
        a = build_mesh(f, cloud, method).area()
        b = build_mesh(ft, cloud, method).area()
        assert a == pytest.approx(b, abs=1e-12)


# ---------------------------------------------------------------- constraints


def _grid_field(mask):
    return SampledField(raw=None, normalized=mask.astype(float), labels=np.where(mask, 1, -1))


def test_constraints_full_cell():
    cloud = make_cloud(get_group("p1"), 9)
    assert check_constraints(_grid_field(np.ones((9, 9), bool)), cloud).cv == 0


def test_constraints_two_blobs():
    cloud = make_cloud(get_group("p1"), 13)
    mask = np.zeros((13, 13), bool)
    mask[2:4, 2:4] = True
    mask[8:10, 8:10] = True
    r = check_constraints(_grid_field(mask), cloud)
    assert r.interior_components == 2 and not r.x_connected and not r.y_connected
    assert r.cv >= 3


def test_constraints_stripe():
    cloud = make_cloud(get_group("p1"), 13)
    mask = np.zeros((13, 13), bool)
    mask[:, 5:8] = True  # spans the x direction, stays off the y edges
    r = check_constraints(_grid_field(mask), cloud)
    assert (r.interior_components, r.x_connected, r.y_connected, r.cv) == (1, True, False, 1)
    assert brute_force_3x3(mask.astype(int) * 2 - 1) == (1, True, False)


@given(seeds, st.sampled_from(TAGS))
def test_constraints_match_flood_fill(seed, tag):
    group, cloud, f = developed(seed, tag, 15)
    if f is None:
        return
    r = check_constraints(f, cloud)
    assert (r.interior_components, r.x_connected, r.y_connected) == brute_force_3x3(f.labels)
    assert r.cv == (r.interior_components - 1) + (not r.x_connected) + (not r.y_connected)


# ---------------------------------------------------------------- export


def test_mesh_json_round_trip(tmp_path):
    group = get_group("p4mm")
    cloud = make_cloud(group, 21)
    f = develop(cppn.loads(GENOMES.joinpath("plate_hole.json").read_text()), group, cloud)
    mesh = build_mesh(f, cloud)
    write_mesh_json(mesh, tmp_path / "m.json.gz")
    back = read_mesh_json(tmp_path / "m.json.gz")
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)


def test_svg_one_path_per_material_group():
    import xml.etree.ElementTree as ET

    group = get_group("p1")
    cloud = make_cloud(group, 21)
    # stripes centred on x = 0, 1/2, 1 of each cell
    x = cloud.points[..., 0]
    raw = np.cos(4 * np.pi * x)
    f = extract_boundary(label(normalize(SampledField(raw=raw)), 0.6), cloud)
    mesh = build_mesh(f, cloud)
    root = ET.fromstring(render_svg(mesh))
    ns = "{http://www.w3.org/2000/svg}"
    cell, tiling = root.findall(f"{ns}g")
    assert len(cell.findall(f"{ns}path")) == 3
    # half stripes on shared cell edges merge: centres 0, 0.5, ..., 3
    assert len(tiling.findall(f"{ns}path")) == 7
