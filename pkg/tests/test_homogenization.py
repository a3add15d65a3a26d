from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import cppnmeta
from cppnmeta import cppn
from cppnmeta.errors import ConfigError, DegenerateTensorError, InfeasibleDesign, SolverFailure
from cppnmeta.geometry import build_mesh, check_constraints, develop, get_group, make_cloud
from cppnmeta.homogenization import (
    RATIO_SENTINEL, BaseMaterial, ElasticTensor, elastic_constants, fitness_vector, homogenize,
    property_value,
)

from conftest import grow, passthrough, seeds

GENOMES = Path(cppnmeta.__file__).parent / "data" / "genomes"


def plane_stress(e=1.0, nu=0.3):
    return e / (1 - nu * nu) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])


def full_cell_mesh(tag="p1", n=9):
    group = get_group(tag)
    cloud = make_cloud(group, n)
    return build_mesh(develop(passthrough(), group, cloud, threshold=0.0), cloud, rhombic=group.rhombic)


def plate_hole():
    return cppn.loads((GENOMES / "plate_hole.json").read_text())


def dense_oracle(mesh, e=1.0, nu=0.3):
    """Dense KKT solve: periodic fluctuation tied by Lagrange multipliers,
    C from the area-averaged stress of each unit-strain load case."""
    D = plane_stress(e, nu)
    V = len(mesh.vertices)
    K = np.zeros((2 * V, 2 * V))
    Bs, areas = [], []
    for tri in mesh.triangles:
        xy = mesh.vertices[tri]
        # gradients of the linear shape functions from [1 x y] interpolation
        M = np.column_stack([np.ones(3), xy])
        grads = np.linalg.inv(M)[1:]  # rows: d/dx, d/dy of each N_i
        B = np.zeros((3, 6))
        B[0, 0::2] = grads[0]
        B[1, 1::2] = grads[1]
        B[2, 0::2] = grads[1]
        B[2, 1::2] = grads[0]
        area = 0.5 * abs(np.linalg.det(M))
        idx = np.ravel([[2 * v, 2 * v + 1] for v in tri])
        K[np.ix_(idx, idx)] += area * B.T @ D @ B
        Bs.append((B, idx))
        areas.append(area)
    rows = []
    for s, m in mesh.edge_pairs:
        for k in range(2):
            r = np.zeros(2 * V)
            r[2 * s + k], r[2 * m + k] = 1.0, -1.0
            rows.append(r)
    pin = int(np.min(mesh.master))
    for k in range(2):
        r = np.zeros(2 * V)
        r[2 * pin + k] = 1.0
        rows.append(r)
    G = np.array(rows)
    n_c = len(G)
    kkt = np.block([[K, G.T], [G, np.zeros((n_c, n_c))]])
    C = np.zeros((3, 3))
    for case in range(3):
        eps0 = np.eye(3)[case]
        f = np.zeros(2 * V)
        for (B, idx), area in zip(Bs, areas):
            f[idx] -= area * B.T @ D @ eps0
        sol = np.linalg.lstsq(kkt, np.concatenate([f, np.zeros(n_c)]), rcond=None)[0]
        u = sol[:2 * V]
        sigma = np.zeros(3)
        for (B, idx), area in zip(Bs, areas):
            sigma += area * D @ (eps0 + B @ u[idx])
        C[:, case] = sigma / mesh.cell_area
    return C


# ---------------------------------------------------------------- homogenize


@pytest.mark.parametrize("tag", ["p1", "p31m"])
def test_full_material_identity(tag):
    t = homogenize(full_cell_mesh(tag, 11))
    ref = plane_stress()
    assert np.abs(t.c - ref).max() / np.abs(ref).max() < 1e-8
    assert t.e_avg == pytest.approx(1.0, abs=1e-8)
    assert t.nu_avg == pytest.approx(0.3, abs=1e-8)


@given(st.floats(0.1, 50.0))
def test_linear_in_base_modulus(k):
    group = get_group("p4mm")
    cloud = make_cloud(group, 15)
    mesh = build_mesh(develop(plate_hole(), group, cloud), cloud)
    c1 = homogenize(mesh, BaseMaterial(1.0, 0.3)).c
    ck = homogenize(mesh, BaseMaterial(k, 0.3)).c
    np.testing.assert_allclose(ck, k * c1, rtol=1e-9, atol=1e-12 * k)


def _small_meshes(count):
    out = []
    rng_seed = 0
    while len(out) < count:
        rng_seed += 1
        tag = ("p1", "p4mm", "p31m", "p2mm")[rng_seed % 4]
        group = get_group(tag)
        cloud = make_cloud(group, 8)
        try:
            f = develop(grow(rng_seed, 5), group, cloud)
            if not check_constraints(f, cloud).feasible:
                continue
            mesh = build_mesh(f, cloud, rhombic=group.rhombic)
            homogenize(mesh)
        except (InfeasibleDesign, SolverFailure):
            continue
        if len(mesh.vertices) <= 200:
            out.append(mesh)
    return out


@pytest.mark.parametrize("mesh", _small_meshes(10), ids=lambda m: f"{len(m.vertices)}v")
def test_matches_dense_oracle(mesh):
    got = homogenize(mesh).c
    want = dense_oracle(mesh)
    scale = np.linalg.norm(want)
    assert np.linalg.norm(got - want) / scale < 1e-6


def test_tensor_invariants_on_random_designs():
    for mesh in _small_meshes(6):
        t = homogenize(mesh)
        c = t.c
        scale = np.linalg.norm(c)
        assert np.abs(c - c.T).max() < 1e-9 * scale
        assert np.linalg.eigvalsh(c).min() > -1e-9 * scale
        if t.invertible:
            np.testing.assert_allclose(t.s @ c, np.eye(3), atol=1e-8)
            assert 0 < t.e_avg <= 1 / 0.91 * (1 + 1e-9)


def test_laminate_is_singular_and_exact():
    # material where y >= 1/2: a stripe along x of half the cell height
    group = get_group("p1")
    cloud = make_cloud(group, 35)
    t = homogenize(build_mesh(develop(passthrough(cppn.INPUT_Y), group, cloud), cloud))
    # a void laminate loaded along the layers carries w * E (free transverse contraction)
    assert t.c[0, 0] == pytest.approx(0.5, rel=1e-9)
    assert abs(t.c[1, 1]) < 1e-9 and not t.invertible
    with pytest.raises(DegenerateTensorError):
        fitness_vector(t, [("E", "maximize"), ("nu", "minimize")])
    assert fitness_vector(t, [("C11", "maximize"), ("C33", "minimize")])[0] == pytest.approx(-0.5)


def test_disconnected_mesh_is_solver_failure():
    # several separate stripes along y: each piece solves alone, together they are singular
    group = get_group("p1")
    cloud = make_cloud(group, 21)
    g = cppn.build_genome([(4, 0, 3, 12.0), (6, 3, 2, 1.0)], "linear", hidden=[(3, "sine", 0.0)])
    mesh = build_mesh(develop(g, group, cloud, threshold=0.95), cloud)
    with pytest.raises(SolverFailure):
        homogenize(mesh)


@pytest.mark.slow
def test_refinement_converges():
    group = get_group("p4mm")
    cs = []
    for n in (35, 69, 137):
        cloud = make_cloud(group, n)
        cs.append(homogenize(build_mesh(develop(plate_hole(), group, cloud), cloud)).c)
    d1, d2 = np.abs(cs[1] - cs[0]), np.abs(cs[2] - cs[1])
    resolved = d1 > 1e-12
    assert resolved.sum() >= 4
    assert np.all(d2[resolved] / d1[resolved] < 1)


# ---------------------------------------------------------------- constants and fitness


def test_elastic_constants_examples():
    e, nu = elastic_constants(np.array([[1, -0.3, 0], [-0.3, 1, 0], [0, 0, 2.6]]))
    assert (e, nu) == (pytest.approx(1.0, abs=1e-15), pytest.approx(0.3, abs=1e-15))
    e, nu = elastic_constants(np.array([[2, -0.5, 0], [-0.5, 1, 0], [0, 0, 1]]))
    assert e == pytest.approx(0.75, abs=1e-15) and nu == pytest.approx(0.375, abs=1e-15)
    assert elastic_constants(np.diag([2.0, 3.0, 1.0]))[1] == 0.0


def _tensor_with(e, nu):
    s = np.array([[1 / e, -nu / e, 0], [-nu / e, 1 / e, 0], [0, 0, 1.0]])
    return ElasticTensor.from_stiffness(np.linalg.inv(s))


def test_fitness_vector_examples():
    t = _tensor_with(0.5, -0.2)
    assert t.e_avg == pytest.approx(0.5) and t.nu_avg == pytest.approx(-0.2)
    np.testing.assert_allclose(fitness_vector(t, [("E", "maximize"), ("nu", "minimize")]), [-0.5, -0.2])
    c = np.array([[2.0, 0.4, 0.1], [0.4, 1.5, 0.2], [0.1, 0.2, 0.6]])
    t = ElasticTensor.from_stiffness(c)
    assert fitness_vector(t, [("C12", "maximize"), ("C13", "maximize")]) == [-0.4, -0.1]
    assert fitness_vector(t, []) == []
    assert property_value(t, "C11/C12") == pytest.approx(5.0)
    assert property_value(ElasticTensor.from_stiffness(np.eye(3)), "C11/C12") == RATIO_SENTINEL
    with pytest.raises(ConfigError):
        fitness_vector(t, [("G", "maximize")])
    with pytest.raises(ConfigError):
        fitness_vector(t, [("E", "upward")])


def test_isotropy_residual():
    assert ElasticTensor.from_stiffness(plane_stress()).isotropy_residual() < 1e-15
    assert ElasticTensor.from_stiffness(np.diag([1.0, 1.0, 1.0])).isotropy_residual() > 0.1


@given(seeds)
def test_p4mm_tetragonal_structure(seed):
    group = get_group("p4mm")
    cloud = make_cloud(group, 15)
    try:
        f = develop(grow(seed), group, cloud)
        if not check_constraints(f, cloud).feasible:
            return
        t = homogenize(build_mesh(f, cloud))
    except (InfeasibleDesign, SolverFailure):
        return
    c, n = t.c, t.norm
    assert abs(c[0, 0] - c[1, 1]) < 1e-6 * n
    assert abs(c[0, 2]) < 1e-6 * n and abs(c[1, 2]) < 1e-6 * n


def test_base_material_validation():
    with pytest.raises(ConfigError):
        BaseMaterial(0.0, 0.3)
    with pytest.raises(ConfigError):
        BaseMaterial(1.0, 1.0)
