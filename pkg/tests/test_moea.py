import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cppnmeta.errors import ConfigError
from cppnmeta.moea import (
    MetamaterialProblem, RveaConfig, SyntheticFrontProblem, adapt_reference_vectors, apd,
    hypervolume_2d, init_reference_vectors, non_dominated_mask, run, select, translate_objectives,
)
from cppnmeta.moea.reproduction import allocate, form_niches, local_count, plan_matings
from cppnmeta.moea.selection import assign
from cppnmeta.moea.vectors import ReferenceVectorSet, adaptation_due, divisions_for, simplex_lattice

from oracles import brute_select

S2 = math.sqrt(2) / 2


# ---------------------------------------------------------------- vectors


def test_reference_vector_examples():
    v = init_reference_vectors(2, 2)
    np.testing.assert_allclose(v.current, [[1, 0], [S2, S2], [0, 1]], atol=1e-15)
    v = init_reference_vectors(2, 1)
    np.testing.assert_allclose(v.current, [[1, 0], [0, 1]])
    np.testing.assert_allclose(v.gamma, [math.pi / 2] * 2)


@pytest.mark.parametrize("m,h", [(2, 5), (3, 4), (4, 3)])
def test_reference_vectors_unit_and_lattice_count(m, h):
    v = init_reference_vectors(m, h)
    np.testing.assert_allclose(np.linalg.norm(v.current, axis=1), 1.0, atol=1e-15)
    assert v.count == math.comb(h + m - 1, m - 1)
    lat = simplex_lattice(m, h)
    np.testing.assert_allclose(lat.sum(axis=1), 1.0)


def test_divisions_for():
    assert divisions_for(2, 100) == 99
    assert math.comb(divisions_for(3, 91) + 2, 2) <= 91


def test_translate_examples():
    f, z = translate_objectives([[1, 2], [3, 0]])
    assert z.tolist() == [1, 0] and f.tolist() == [[0, 2], [2, 0]]
    f, _ = translate_objectives([[4, -7]])
    assert f.tolist() == [[0, 0]]


# dyadic values keep the shift exact, so round-off cannot merge distinct points
@given(st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=2, max_size=20))
def test_translation_preserves_dominance(points):
    f = np.array(points, float) / 4
    g, _ = translate_objectives(f)
    np.testing.assert_array_equal(non_dominated_mask(f), non_dominated_mask(g))


# ---------------------------------------------------------------- APD


def test_apd_examples():
    assert apd([1, 1], [1, 0], math.pi / 4, 10, 10, 2.0, 2) == pytest.approx(3 * math.sqrt(2), abs=1e-12)
    assert apd([0.3, 0.4], [0, 1], 0.3, 0, 10, 2.0, 2) == pytest.approx(0.5, abs=1e-12)
    for t in (0, 3, 10):
        assert apd([1, 0], [1, 0], 0.5, t, 10, 2.0, 2) == pytest.approx(1.0, abs=1e-12)
    assert apd([0, 0], [1, 0], 0.5, 5, 10, 2.0, 2) == 0.0


# ---------------------------------------------------------------- selection


def test_select_feasible_beats_infeasible():
    v = init_reference_vectors(2, 1)
    # both on the first vector; infeasible one has the smaller APD
    keep = select(5, 10, [[0.1, 0.0], [5.0, 0.1]], [3.0, 0.0], v)
    assert keep.tolist() == [1]


def test_select_min_cv_when_all_infeasible():
    v = init_reference_vectors(2, 1)
    f = [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
    assert select(1, 10, f, [3.0, 1.0, 2.0], v).tolist() == [1]


@pytest.mark.parametrize("seed", range(20))
def test_select_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    v = init_reference_vectors(2, 1)
    f = rng.random((6, 2))
    t = int(rng.integers(0, 11))
    got = select(t, 10, f, np.zeros(6), v).tolist()
    assert got == brute_select(t, 10, f.tolist(), [0] * 6, v.current.tolist(), v.gamma.tolist())


@given(st.integers(0, 2**32 - 1))
def test_select_properties(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 4))
    v = init_reference_vectors(m, int(rng.integers(1, 4)))
    n = int(rng.integers(1, 15))
    f = rng.random((n, m))
    cv = np.where(rng.random(n) < 0.3, rng.integers(1, 4, n), 0).astype(float)
    keep = select(3, 10, f, cv, v)
    assert len(keep) <= v.count and len(set(keep.tolist())) == len(keep)
    idx, _ = assign(translate_objectives(f)[0], v.current)
    for k in keep:
        same = idx == idx[k]
        if np.any(cv[same] == 0):
            assert cv[k] == 0
    assert keep.tolist() == brute_select(3, 10, f.tolist(), cv.tolist(), v.current.tolist(),
                                         v.gamma.tolist())


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_select_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    v = init_reference_vectors(2, 3)
    f = np.vstack([[0.0, 0.0], rng.random((8, 2)) + 0.01])  # ideal point fixed at the origin
    keep = select(4, 10, f, np.zeros(9), v)
    idx, _ = assign(f, v.current)
    k = int(idx[1])
    g = f.copy()
    g[idx == k] *= c
    g[0] = 0.0
    idx2, _ = assign(g, v.current)
    assert np.array_equal(idx, idx2)
    keep2 = select(4, 10, g, np.zeros(9), v)
    assert keep.tolist() == keep2.tolist()


def test_assignment_tie_goes_to_lowest_index():
    v = ReferenceVectorSet.from_initial(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    idx, _ = assign(np.array([[1.0, 0.0]]), v.current)
    assert idx.tolist() == [0]


# ---------------------------------------------------------------- adaptation


def test_adaptation_examples():
    v = init_reference_vectors(2, 2)
    same = adapt_reference_vectors(v, np.array([[0.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(same.current, v.current, atol=1e-15)
    axes = init_reference_vectors(2, 1)
    out = adapt_reference_vectors(axes, np.array([[0.0, 0.0], [2.0, 1.0]]))
    np.testing.assert_allclose(out.current, axes.current)
    diag = ReferenceVectorSet.from_initial(np.array([[S2, S2]]))
    out = adapt_reference_vectors(diag, np.array([[0.0, 0.0], [3.0, 1.0]]))
    np.testing.assert_allclose(out.current[0], np.array([3, 1]) / math.sqrt(10), atol=1e-15)
    # adaptation always starts from the initial set
    out2 = adapt_reference_vectors(out, np.array([[0.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(out2.current[0], [S2, S2], atol=1e-15)


def test_adaptation_schedule():
    due = [g for g in range(1, 101) if adaptation_due(g, 100, 0.1)]
    assert due == list(range(10, 101, 10))


# ---------------------------------------------------------------- reproduction


def test_local_count_examples():
    assert local_count(500, 400, 800) == 250
    assert local_count(500, 0, 800) == 0
    assert local_count(500, 800, 800) == 500


@given(st.integers(0, 2**32 - 1))
def test_niches_partition_the_parents(seed):
    rng = np.random.default_rng(seed)
    v = init_reference_vectors(2, int(rng.integers(1, 12)))
    n = int(rng.integers(2, 30))
    f = rng.random((n, 2))
    niches = form_niches(f, v)
    members = sorted(itertools.chain.from_iterable(x.members for x in niches))
    assert members == list(range(n))
    assert all(len(x.members) >= 2 for x in niches)
    vecs = [k for x in niches for k in x.vectors]
    assert vecs == sorted(vecs)


@given(st.integers(1, 500), st.lists(st.integers(1, 50), min_size=1, max_size=10))
def test_allocate_sums(total, sizes):
    q = allocate(total, sizes)
    assert sum(q) == total and all(x >= 0 for x in q)


@given(st.integers(0, 2**32 - 1), st.integers(0, 20))
def test_plan_sizes(seed, t):
    rng = np.random.default_rng(seed)
    f = rng.random((12, 2))
    plans = plan_matings(t, 20, f, init_reference_vectors(2, 5), 12, rng)
    assert len(plans) == 12
    for p in plans:
        assert all(0 <= i < 12 for i in p) and len(set(p)) == len(p)


# ---------------------------------------------------------------- loop


def test_config_validation():
    with pytest.raises(ConfigError):
        RveaConfig(population_size=1)
    with pytest.raises(ConfigError):
        RveaConfig(adaptation_interval=0)


def test_zero_generations_returns_initial_population():
    res = run(RveaConfig(10, 0, seed=1), SyntheticFrontProblem())
    assert len(res.population) == 10 and res.evaluations == 10
    assert [ind.id for ind in res.population] == list(range(10))


def test_same_seed_same_stream():
    def stream(seed):
        out = []
        run(RveaConfig(12, 6, seed=seed), SyntheticFrontProblem(),
            on_evaluated=lambda i: out.append((i.id, i.parents, tuple(i.genome), i.fitness)))
        return out

    assert stream(4) == stream(4)
    assert stream(4) != stream(5)


def test_metamaterial_run_deterministic_across_threads():
    prob = MetamaterialProblem("p4", resolution=11)
    cfg = RveaConfig(8, 2, seed=2)

    def stream(threads):
        out = []
        run(cfg, prob, on_evaluated=lambda i: out.append((i.id, i.fitness, i.cv)), threads=threads)
        return out

    assert stream(1) == stream(2)


def test_hypervolume_of_archive_non_decreasing():
    pts, hv = [], []

    def on_gen(s):
        if s.generation % 10 == 0:
            hv.append(hypervolume_2d(pts, (1.1, 1.1)))

    run(RveaConfig(40, 60, seed=0), SyntheticFrontProblem(),
        on_evaluated=lambda i: pts.append(i.fitness), on_generation=on_gen)
    assert len(hv) == 7
    assert all(b >= a for a, b in zip(hv, hv[1:]))
    assert hv[-1] > hv[0]


def test_hypervolume_2d_oracle():
    rng = np.random.default_rng(0)
    pts = rng.random((30, 2))
    # Monte Carlo-free oracle: union of dominated boxes on a fine grid of the reference box
    ref = (1.1, 1.1)
    xs = np.linspace(0, 1.1, 1101)[:-1] + 0.0005
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    covered = np.zeros_like(X, dtype=bool)
    for p in pts:
        covered |= (X >= p[0]) & (Y >= p[1])
    assert hypervolume_2d(pts, ref) == pytest.approx(covered.mean() * 1.21, abs=5e-3)
    assert hypervolume_2d([[2.0, 0.0]], ref) == 0.0


def test_non_dominated_mask_brute_force():
    rng = np.random.default_rng(1)
    f = rng.integers(0, 6, (200, 2)).astype(float)
    mask = non_dominated_mask(f)
    for i in range(len(f)):
        dominated = any(np.all(f[j] <= f[i]) and np.any(f[j] < f[i]) for j in range(len(f)))
        assert mask[i] == (not dominated)
