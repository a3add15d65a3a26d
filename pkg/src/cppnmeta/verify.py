"""Built-in checks behind ``cppnmeta verify``.

Each check recomputes its expectation independently of the code under test
(analytic values, brute-force loops, explicit flood fills) and reports a
single pass/fail line.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import archive as arc, cppn
from .errors import InfeasibleDesign
from .geometry import build_mesh, check_constraints, develop, get_group, make_cloud
from .homogenization import homogenize
from .moea import (
    RveaConfig, SyntheticFrontProblem, apd, hypervolume_2d, init_reference_vectors, run, select,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_design_genome(rng: np.random.Generator, registry: cppn.InnovationRegistry,
                         steps: int = 5) -> cppn.Genome:
    """A random genome grown by a few structural mutations."""
    rates = cppn.MutationRates(add_connection=0.5, add_node=0.4)
    g = cppn.random_genome(rng, registry)
    for _ in range(int(rng.integers(1, steps + 1))):
        g = cppn.mutate(g, registry, rates, rng)
    return g


def feasible_tensors(tag: str, count: int, seed: int, resolution: int = 35, max_tries: int = 5000):
    group = get_group(tag)
    cloud = make_cloud(group, resolution)
    rng = np.random.default_rng(seed)
    reg = cppn.InnovationRegistry()
    out = []
    for _ in range(max_tries):
        if len(out) == count:
            break
        g = random_design_genome(rng, reg)
        try:
            f = develop(g, group, cloud)
            if not check_constraints(f, cloud).feasible:
                continue
            out.append(homogenize(build_mesh(f, cloud, "structured", group.rhombic)))
        except InfeasibleDesign:
            continue
    return out


# ---------------------------------------------------------------- checks


def check_identity():
    g = cppn.build_genome([(3, 0, 2, 1.0)])
    group = get_group("p1")
    cloud = make_cloud(group, 35)
    t = homogenize(build_mesh(develop(g, group, cloud, threshold=0.0), cloud))
    c_ref = np.array([[1, 0.3, 0], [0.3, 1, 0], [0, 0, 0.35]]) / 0.91
    err = np.abs(t.c - c_ref).max() / np.abs(c_ref).max()
    ok = err < 1e-8 and abs(t.e_avg - 1) < 1e-8 and abs(t.nu_avg - 0.3) < 1e-8
    return ok, f"max rel err {err:.1e}, E={t.e_avg:.10f}, nu={t.nu_avg:.10f}"


def check_laminate():
    g = cppn.build_genome([(3, 1, 2, 1.0)])  # field = y: stripe along x
    group = get_group("p1")
    cloud = make_cloud(group, 35)
    t = homogenize(build_mesh(develop(g, group, cloud), cloud))
    target = 0.5 / (1 - 0.3**2)
    rel = abs(t.c[0, 0] - target) / target
    return rel < 0.02, f"C11={t.c[0, 0]:.6f} target {target:.6f} rel {rel:.3%} (void rule w*E = 0.5)"


def check_symmetry(count: int):
    worst4 = worst31 = 0.0
    nus = []
    t4 = feasible_tensors("p4mm", count, 11)
    t31 = feasible_tensors("p31m", count, 12)
    for t in t4:
        c = t.c
        worst4 = max(worst4, max(abs(c[0, 0] - c[1, 1]), abs(c[0, 2]), abs(c[1, 2])) / t.norm)
    for t in t31:
        worst31 = max(worst31, t.isotropy_residual())
        nus.append(t.nu_avg)
    ok = len(t4) == count and len(t31) == count and worst4 < 1e-6 and worst31 < 0.02
    nu_ok = all(-1 < v < 1 for v in nus)
    return ok and nu_ok, (f"p4mm n={len(t4)} worst {worst4:.1e}; p31m n={len(t31)} worst {worst31:.1e}; "
                          f"nu in [{min(nus):.3f}, {max(nus):.3f}]")


def _brute_select(t, t_max, f, cv, v, gamma, alpha):
    n, m = len(f), len(f[0])
    z = [min(f[i][k] for i in range(n)) for k in range(m)]
    fp = [[f[i][k] - z[k] for k in range(m)] for i in range(n)]
    groups: dict[int, list[int]] = {}
    dist = {}
    for i in range(n):
        norm = math.sqrt(sum(x * x for x in fp[i]))
        best, best_cos = 0, -2.0
        for j in range(len(v)):
            c = sum(a * b for a, b in zip(fp[i], v[j])) / norm if norm > 0 else 0.0
            if c > best_cos:
                best, best_cos = j, c
        phi = math.acos(max(-1.0, min(1.0, best_cos))) if norm > 0 else 0.0
        dist[i] = norm * (1 + m * (t / t_max) ** alpha * phi / gamma[best])
        groups.setdefault(best, []).append(i)
    out = []
    for j in sorted(groups):
        members = groups[j]
        feas = [i for i in members if cv[i] == 0]
        pool, key = (feas, dist) if feas else (members, {i: cv[i] for i in members})
        out.append(min(pool, key=lambda i: (key[i], i)))
    return out


def check_select(instances: int):
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(instances):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(2, 5))
        vecs = init_reference_vectors(2, k - 1)
        f = rng.random((n, 2))
        cv = np.where(rng.random(n) < 0.4, rng.integers(1, 5, n), 0).astype(float)
        t_max = 10
        t = int(rng.integers(0, t_max + 1))
        got = select(t, t_max, f, cv, vecs, 2.0).tolist()
        want = _brute_select(t, t_max, f.tolist(), cv.tolist(), vecs.current.tolist(), vecs.gamma.tolist(), 2.0)
        bad += got != want
    return bad == 0, f"{instances - bad}/{instances} instances match"


def check_apd():
    cases = [
        (apd([1, 1], [1, 0], math.pi / 4, 10, 10, 2.0, 2), 3 * math.sqrt(2)),
        (apd([0.3, 0.4], [0, 1], 0.2, 0, 10, 2.0, 2), 0.5),
        (apd([1, 0], [1, 0], 0.5, 7, 10, 2.0, 2), 1.0),
    ]
    err = max(abs(a - b) for a, b in cases)
    return err < 1e-12, f"max abs err {err:.1e}"


def flood_fill_3x3(labels: np.ndarray):
    """Interior count and spanning flags by explicit BFS on a 3 x 3 tiling."""
    mat = labels == 1
    n = mat.shape[0]
    m = n - 1
    nb = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]

    def bfs(grid, seeds):
        seen = np.zeros_like(grid, dtype=bool)
        stack = list(seeds)
        for s in seeds:
            seen[s] = True
        while stack:
            i, j = stack.pop()
            for di, dj in nb:
                a, b = i + di, j + dj
                if 0 <= a < grid.shape[0] and 0 <= b < grid.shape[1] and grid[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    stack.append((a, b))
        return seen

    comps = 0
    seen = np.zeros_like(mat)
    for i in range(n):
        for j in range(n):
            if mat[i, j] and not seen[i, j]:
                comps += 1
                seen |= bfs(mat, [(i, j)])
    big = np.tile(mat[:-1, :-1], (3, 3))
    centre = (slice(m, 2 * m), slice(m, 2 * m))
    covered = np.zeros_like(big)
    x_conn = y_conn = False
    for i in range(m):
        for j in range(m):
            if big[m + i, m + j] and not covered[m + i, m + j]:
                reach = bfs(big, [(m + i, m + j)])
                covered |= reach
                # a point of the centre tile and its translate in the same component
                x_conn |= bool(np.any(reach[centre] & reach[2 * m:, m:2 * m]))
                y_conn |= bool(np.any(reach[centre] & reach[m:2 * m, 2 * m:]))
    return comps, x_conn, y_conn


def check_connectivity(count: int):
    rng = np.random.default_rng(9)
    reg = cppn.InnovationRegistry()
    bad = done = 0
    tags = ("p1", "p2mm", "p4", "p4mm", "p31m")
    while done < count:
        tag = tags[done % len(tags)]
        group = get_group(tag)
        cloud = make_cloud(group, 21)
        try:
            f = develop(random_design_genome(rng, reg), group, cloud)
        except InfeasibleDesign:
            continue
        r = check_constraints(f, cloud)
        comps, xc, yc = flood_fill_3x3(f.labels)
        bad += (r.interior_components, r.x_connected, r.y_connected) != (comps, xc, yc)
        done += 1
    return bad == 0, f"{count - bad}/{count} genomes agree"


def check_round_trip(count: int):
    rng = np.random.default_rng(21)
    reg = cppn.InnovationRegistry()
    group = get_group("p4mm")
    cloud = make_cloud(group, 35)
    kept = []
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "a.cma"
        with arc.ArchiveWriter(path) as w:
            for k in range(count):
                g = random_design_genome(rng, reg).with_key(k)
                try:
                    labels = develop(g, group, cloud).labels
                except InfeasibleDesign:
                    continue
                w.append(arc.ArchiveRecord("rt", 0, k, cppn.to_dict(g), "p4mm", 0.0, resolution=35))
                kept.append(labels)
            size = w.bytes_written / max(w.count, 1)
        records, _ = arc.read_archive(path)
        same = sum(np.array_equal(arc.reconstruct(r)[0].labels, lab) for r, lab in zip(records, kept))
    return same == len(kept) and size < 20480, f"{same}/{len(kept)} identical, mean record {size:.0f} B"


def check_similarity():
    a = cppn.build_genome([(3, 0, 2, 0.5), (4, 1, 2, -0.5)])
    b = cppn.build_genome([(3, 0, 2, 0.7), (4, 1, 2, -0.5)])
    ok = cppn.similarity(a, a) == 0.0 and abs(cppn.similarity(a, b) - 0.1) < 1e-12
    fams = []
    rng = np.random.default_rng(3)
    for base in (0.0, 5.0, 10.0):
        for _ in range(4):
            w = base + rng.uniform(-0.1, 0.1, 2)
            fams.append(cppn.build_genome([(3, 0, 2, w[0]), (4, 1, 2, w[1])]))
    got = arc.cluster_families(list(enumerate(fams)))
    expect = [tuple(range(k, k + 4)) for k in (0, 4, 8)]
    ok &= [f.members for f in got] == expect
    return ok, f"{len(got)} families"


def check_synthetic(seeds: int = 5):
    hv = []
    for s in range(seeds):
        pts = []
        run(RveaConfig(100, 200, seed=s), SyntheticFrontProblem(), on_evaluated=lambda i: pts.append(i.fitness))
        hv.append(hypervolume_2d(pts, (1.1, 1.1)))
    # area under 1.1 - (1 - sqrt(x)) on [0, 1] plus the strip x in [1, 1.1]
    exact = 0.1 + 2 / 3 + 0.11
    med = float(np.median(hv))
    return abs(med - exact) / exact < 0.05, f"median HV {med:.5f} vs {exact:.5f}"


def run_checks(full: bool = False, echo: Callable[[str], None] = print) -> list[CheckResult]:
    checks = [
        ("homogenization identity", check_identity),
        ("laminate C11", check_laminate),
        ("symmetry of C and nu bounds", lambda: check_symmetry(100 if full else 20)),
        ("select vs brute force", lambda: check_select(500 if full else 100)),
        ("APD hand values", check_apd),
        ("connectivity vs 3x3 flood fill", lambda: check_connectivity(200 if full else 40)),
        ("archive round trip", lambda: check_round_trip(1000 if full else 100)),
        ("similarity and clustering", check_similarity),
    ]
    if full:
        checks.append(("synthetic front hypervolume", check_synthetic))
    results = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - start)
        echo(f"[{'PASS' if res.passed else 'FAIL'}] {name}: {detail} ({res.seconds:.1f}s)")
        results.append(res)
    return results
