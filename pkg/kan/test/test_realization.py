import os
import sys
from math import comb

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", ".."))

from kan.cw import cp2, kan_group, rp3_like, s2_times_s2, surface
from kan.lie import geodesic_path, group_spec, random_loop, winding_loop
from kan.realization import (EndpointMismatchError, RealizationPoint, classify_component, coface_last,
                             complete_point, eta_maps, four_complex_point, hom_values, point_from_json,
                             point_to_json, primitive_decompose, primitive_recompose, pushforward, simplex_grid,
                             spine_loop, surface_point, surface_relator_value, tau, validate_point)
from kan.simplicial import MonotoneMap
from kan.words import BaseGen, GenRef, reduce


def surface_data(spec, ell, m, rng, n=0):
    """Holonomies w and a path e -> r(w) wound n extra times."""
    w = spec.random_element(rng, (2 * ell,))
    target = surface_relator_value(w, spec)
    path = winding_loop(spec, n, m) @ geodesic_path(target, spec, m)
    return w, path


def random_word(rng, gens, length, degree):
    letters = [(gens[rng.integers(len(gens))], int(rng.choice((-1, 1)))) for _ in range(length)]
    return reduce(letters, degree)


def random_monotone(rng, source, target):
    return MonotoneMap(source, target, tuple(sorted(int(v) for v in rng.integers(0, target + 1, source + 1))))


def test_simplex_grid():
    for q in range(4):
        for m in (1, 3, 8):
            grid = simplex_grid(q, m)
            assert len(grid) == comb(m + q, q)
            assert (grid.barycentric.sum(axis=1) == m).all()
            for j in range(q + 1):
                assert len(grid.on_face(j)) == (comb(m + q - 1, q - 1) if q else 0)
            for i, bary in enumerate(grid.barycentric):
                assert grid.locate(bary) == i
    grid = simplex_grid(2, 4)
    idx = simplex_grid(1, 4).push(MonotoneMap.coface(2, 2), grid)
    assert (grid.barycentric[idx][:, 2] == 0).all()
    assert simplex_grid(2, 4) is grid
    assert simplex_grid.cache_info().maxsize == 32
    idx = grid.push(MonotoneMap.codegeneracy(0, 1), simplex_grid(1, 4))
    np.testing.assert_array_equal(simplex_grid(1, 4).barycentric[idx][:, 1], grid.barycentric[:, 2])


def test_eta_maps():
    assert eta_maps((0.25, 0.25, 0.5)) == ((0.5, 0.5), (0.25, 0.75))
    assert eta_maps((1, 0, 0)) == ((1, 0), (1, 0))


def test_surface_point_validates():
    rng = np.random.default_rng(0)
    K = kan_group(surface(2))
    for variant in ("U1", "SU2", "SO3"):
        spec = group_spec(variant)
        w, path = surface_data(spec, 2, 32, rng)
        point = surface_point(K, spec, w, path)
        report = validate_point(point, K)
        assert report.passed, report.to_dict()

        broken = path.copy()
        broken[-1] = broken[-1] @ spec.exp(np.full(spec.algebra_dim, 0.1))
        report = validate_point(surface_point(K, spec, w, broken), K)
        assert not report.passed and report.coface > 0.05
        assert report.worst["coface"]["point"] == [32, 0]

        broken = path.copy()
        broken[0] = spec.exp(np.full(spec.algebra_dim, 0.1))
        report = validate_point(surface_point(K, spec, w, broken), K)
        assert not report.passed and report.boundary > 0.05


def test_membership_violation():
    rng = np.random.default_rng(1)
    K = kan_group(surface(1))
    spec = group_spec("SU2")
    w, path = surface_data(spec, 1, 16, rng)
    path = path.copy()
    path[5] = 1.01 * path[5]
    report = validate_point(surface_point(K, spec, w, path), K)
    assert report.membership > 1e-3 and not report.passed


def test_points_are_read_only():
    spec = group_spec("U1")
    K = kan_group(surface(1))
    point = complete_point(K, spec, 8)
    try:
        point.psi[1][0, 0, 0, 0] = 2.0
    except ValueError:
        pass
    else:
        assert False, "point arrays must be immutable"
    moved = point.replace(0, spec.exp(np.array([[[0.3], [0.4]]])))
    assert moved is not point and point.psi[0][0, 0, 0, 0] == 1.0
    try:
        RealizationPoint(spec, 8, (np.zeros((1, 2, 2, 2)),))
    except ValueError:
        pass
    else:
        assert False, "U(1) values are 1x1 matrices"


def test_complete_point_spine():
    rng = np.random.default_rng(2)
    K = kan_group(rp3_like())
    spec = group_spec("SU2")
    g = spec.random_element(rng, (1, 1))
    point = complete_point(K, spec, 12, {0: g})
    assert point.top_degree == 2
    report = validate_point(point, K)
    assert report.passed, report.to_dict()
    # psi_1 runs from x^2 on the last face to e on face 0
    grid1 = point.grid(1)
    assert spec.equal(point.psi[1][grid1.locate((12, 0)), 0], g[0, 0] @ g[0, 0], 1e-9)
    assert spec.equal(point.psi[1][grid1.locate((0, 12)), 0], spec.identity(), 1e-12)
    sigma = K.generators_by_name()["sigma"]
    assert spec.equal(spine_loop(K, point, sigma), spec.identity((len(grid1),)), 1e-9)


def test_four_complex_point_and_tau():
    spec = group_spec("SU2")
    m = 10
    K = kan_group(cp2())
    loop = winding_loop(spec, 1, m)[:, None]
    point = four_complex_point(K, spec, loop)
    report = validate_point(point, K)
    assert report.passed, report.to_dict()

    r = cp2().attach4["c"]
    values = tau(loop, r, spec)
    grid2 = simplex_grid(2, m)
    assert values.shape == (len(grid2), 2, 2)
    np.testing.assert_allclose(values, coface_last(K, point, 3)[:, 0], atol=1e-12)
    for j in range(3):
        assert spec.equal(values[grid2.on_face(j)], spec.identity(), 1e-9)

    u1 = group_spec("U1")
    values = tau(winding_loop(u1, 2, m)[:, None], r, u1)
    assert u1.equal(values, u1.identity((len(grid2),)), 1e-12)


def test_tau_two_spheres():
    rng = np.random.default_rng(3)
    spec = group_spec("SO3")
    m = 16
    loops = np.stack([random_loop(spec, rng, m, scale=0.3), winding_loop(spec, 1, m)], axis=1)
    Y = s2_times_s2()
    K = kan_group(Y)
    point = four_complex_point(K, spec, loops)
    assert validate_point(point, K).passed
    values = tau(loops, Y.attach4["c"], spec)
    grid2 = simplex_grid(2, m)
    for j in range(3):
        assert spec.equal(values[grid2.on_face(j)], spec.identity(), 1e-9)


def test_pushforward_is_functorial_on_words():
    rng = np.random.default_rng(4)
    K = kan_group(rp3_like())
    a, b = GenRef(BaseGen("a", 0)), GenRef(BaseGen("b", 0))
    for _ in range(200):
        source = int(rng.integers(0, 2))
        middle = int(rng.integers(0, 3))
        target = int(rng.integers(0, 3))
        phi = random_monotone(rng, source, middle)
        theta = random_monotone(rng, middle, target)
        hom = {g: random_word(rng, [a, b], 6, 0) for g in K.enumerate_generators(source)}
        once = pushforward(K, theta.compose(phi), hom)
        twice = pushforward(K, theta, pushforward(K, phi, hom))
        assert once == twice


def test_pushforward_matches_sampled_cofaces():
    rng = np.random.default_rng(5)
    K = kan_group(surface(1))
    spec = group_spec("SU2")
    w, path = surface_data(spec, 1, 8, rng)
    point = surface_point(K, spec, w, path)
    hom0 = hom_values(point, K, 0, 0)
    grid0, grid1 = point.grid(0), point.grid(1)
    for j in range(2):
        theta = MonotoneMap.coface(j, 1)
        pushed = pushforward(K, theta, hom0, spec)
        index = int(grid0.push(theta, grid1)[0])
        sampled = hom_values(point, K, 1, index)
        assert set(pushed) == set(sampled)
        for gen in pushed:
            assert spec.equal(pushed[gen], sampled[gen], 1e-9), (j, gen)


def test_primitive_decomposition():
    spec = group_spec("U1")
    K = kan_group(cp2())
    point = four_complex_point(K, spec, winding_loop(spec, 1, 6)[:, None])
    hom = hom_values(point, K, 3, 7)
    blocks = primitive_decompose(hom)
    assert sorted(blocks) == [1, 3]
    assert len(blocks[1]) == comb(3, 2)
    recomposed = primitive_recompose(blocks)
    assert set(recomposed) == set(hom) and all(recomposed[g] is hom[g] for g in hom)
    x1 = K.generators_by_name()["x1"]
    grid1, grid3 = point.grid(1), point.grid(3)
    for prefix, values in blocks[1].items():
        alpha = MonotoneMap.from_degeneracy(prefix, 3)
        image = int(grid3.push(alpha, grid1)[7])
        np.testing.assert_allclose(values[x1], point.psi[1][image, 0])


def test_classify_component():
    rng = np.random.default_rng(6)
    m = 128
    u1 = group_spec("U1")
    for n in (-2, 0, 3):
        w, path = surface_data(u1, 2, m, rng, n)
        assert classify_component(w, path, u1) == n

    so3 = group_spec("SO3")
    w, path = surface_data(so3, 1, m, rng)
    base = classify_component(w, path, so3)
    wound = winding_loop(so3, 1, m) @ path
    assert classify_component(w, wound, so3) == 1 - base
    assert classify_component(w, wound, so3, strategy="eager") == 1 - base

    u = np.stack([geodesic_path(g, so3, m) for g in w], axis=1)
    psi = surface_relator_value(np.moveaxis(u, 1, 0), so3)
    assert classify_component(w, psi, so3) == 0

    su2 = group_spec("SU2")
    w, path = surface_data(su2, 1, m, rng, 1)
    assert classify_component(w, path, su2) == 0

    try:
        classify_component(w, path[:-1], su2)
    except EndpointMismatchError:
        pass
    else:
        assert False, "the path must end at r(w)"
    try:
        classify_component(w, path, su2, strategy="spiral")
    except ValueError:
        pass
    else:
        assert False


def test_classification_is_stable_under_refinement_and_path_choice():
    rng = np.random.default_rng(9)
    u1 = group_spec("U1")
    for n in range(-3, 4):
        w = u1.random_element(rng, (2,))
        target = surface_relator_value(w, u1)
        for m in (64, 128, 256):
            path = winding_loop(u1, n, m) @ geodesic_path(target, u1, m)
            for strategy in ("geodesic", "eager"):
                assert classify_component(w, path, u1, strategy=strategy) == n, (n, m, strategy)

    so3 = group_spec("SO3")
    for ell in (1, 2):
        w = so3.random_element(rng, (2 * ell,))
        target = surface_relator_value(w, so3)
        classes = set()
        for n in range(4):
            for m in (64, 128, 256):
                path = winding_loop(so3, n, m) @ geodesic_path(target, so3, m)
                base = classify_component(w, path, so3)
                assert classify_component(w, path, so3, strategy="eager") == base
                classes.add((n % 2, base))
        # one class per parity of the extra winding, and the two parities differ
        assert len(classes) == 2 and len({c for _, c in classes}) == 2


def constructed_points(rng, count, m=8):
    groups = {"surface1": kan_group(surface(1)), "surface2": kan_group(surface(2)),
              "rp3like": kan_group(rp3_like()), "cp2": kan_group(cp2())}
    specs = [group_spec(v) for v in ("U1", "SU2", "SO3")]
    for i in range(count):
        spec = specs[i % 3]
        kind = ("surface1", "surface2", "rp3like", "cp2")[(i // 3) % 4]
        K = groups[kind]
        if kind.startswith("surface"):
            ell = int(kind[-1])
            w, path = surface_data(spec, ell, m, rng)
            yield K, surface_point(K, spec, w, path)
        elif kind == "rp3like":
            yield K, complete_point(K, spec, m, {0: spec.random_element(rng, (1, 1))})
        else:
            yield K, four_complex_point(K, spec, random_loop(spec, rng, m, scale=0.3)[:, None])


def test_validator_on_single_sample_perturbations():
    rng = np.random.default_rng(10)
    size = 1e-3
    for K, point in constructed_points(rng, 100):
        spec = point.spec
        report = validate_point(point, K)
        assert report.passed, report.to_dict()

        q = point.top_degree
        grid = point.grid(q)
        on_boundary = np.unique(np.concatenate([grid.on_face(j) for j in range(q + 1)]))
        index = int(rng.choice(on_boundary))
        column = int(rng.integers(point.psi[q].shape[1]))
        v = rng.normal(size=spec.algebra_dim)
        v *= size / np.linalg.norm(v)
        values = np.array(point.psi[q])
        values[index, column] = values[index, column] @ spec.exp(v)
        report = validate_point(point.replace(q, values), K)
        assert not report.passed
        assert size / 2 <= report.max_violation <= 2 * size, report.to_dict()


def test_tau_boundary_at_fine_resolution():
    rng = np.random.default_rng(11)
    m = 128
    r = cp2().attach4["c"]
    grid2 = simplex_grid(2, m)
    boundary = np.unique(np.concatenate([grid2.on_face(j) for j in range(3)]))
    su2 = group_spec("SU2")
    for _ in range(20):
        values = tau(random_loop(su2, rng, m)[:, None], r, su2)
        assert su2.distance(values[boundary], su2.identity()).max() <= 1e-10
    u1 = group_spec("U1")
    for _ in range(20):
        values = tau(random_loop(u1, rng, m, scale=2.0)[:, None], r, u1)
        np.testing.assert_allclose(values[:, 0, 0], 1.0, atol=1e-12)


def test_primitive_round_trips():
    rng = np.random.default_rng(12)
    spec = group_spec("SU2")
    m = 6
    K3, K4 = kan_group(rp3_like()), kan_group(cp2())
    cases = [(K3, complete_point(K3, spec, m, {0: spec.random_element(rng, (1, 1))})),
             (K4, four_complex_point(K4, spec, random_loop(spec, rng, m)[:, None]))]
    for _ in range(1000):
        K, point = cases[rng.integers(len(cases))]
        q = int(rng.integers(0, point.top_degree + 2))
        grid = point.grid(q)
        index = int(rng.integers(len(grid)))
        hom = hom_values(point, K, q, index)
        blocks = primitive_decompose(hom)
        assert sorted(blocks) == [k for k in range(q + 1) if K.basis(k)]
        for k, by_prefix in blocks.items():
            assert len(by_prefix) == comb(q, k)
            columns = {x: c for c, x in enumerate(K.basis(k))}
            for prefix, values in by_prefix.items():
                image = int(grid.push(MonotoneMap.from_degeneracy(prefix, q), point.grid(k))[index])
                for x, value in values.items():
                    np.testing.assert_array_equal(value, point.psi[k][image, columns[x]])
        recomposed = primitive_recompose(blocks)
        assert recomposed.keys() == hom.keys() and all(recomposed[g] is hom[g] for g in hom)


def test_point_json_round_trip():
    rng = np.random.default_rng(7)
    for Y in (surface(1), rp3_like(), cp2()):
        K = kan_group(Y)
        spec = group_spec("SU2")
        if Y.cells_of(1):
            point = complete_point(K, spec, 6, {0: spec.random_element(rng, (1, len(K.basis(0))))})
        else:
            point = four_complex_point(K, spec, winding_loop(spec, 1, 6)[:, None])
        restored = point_from_json(point_to_json(point, K), K)
        assert restored.resolution == point.resolution and restored.spec == spec
        for a, b in zip(point.psi, restored.psi):
            np.testing.assert_allclose(a, b)
    data = point_to_json(point, K)
    data["degrees"][1]["generators"] = ["y"]
    try:
        point_from_json(data, K)
    except ValueError:
        pass
    else:
        assert False, "generator names must match the complex"


if __name__ == "__main__":
    test_simplex_grid()
    test_eta_maps()
    test_surface_point_validates()
    test_membership_violation()
    test_points_are_read_only()
    test_complete_point_spine()
    test_four_complex_point_and_tau()
    test_tau_two_spheres()
    test_pushforward_is_functorial_on_words()
    test_pushforward_matches_sampled_cofaces()
    test_primitive_decomposition()
    test_classify_component()
    test_classification_is_stable_under_refinement_and_path_choice()
    test_validator_on_single_sample_perturbations()
    test_tau_boundary_at_fine_resolution()
    test_primitive_round_trips()
    test_point_json_round_trip()
    print("[*] realization: all tests passed")
