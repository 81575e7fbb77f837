import numpy as np
import pytest

from magspec.domain import (ScalarField, VectorField2D, build_domain, centered_domain, check_collar,
                            curl, gradient, zero_vector)
from magspec.presets import sample_preset, sample_scalar, sample_vector


def test_node_counts():
    d = build_domain(1, 1, 9, 9, 0.2)
    assert d.size == 81
    assert d.n_boundary == 32
    assert d.n_interior == 49


def test_index_sets_partition_grid():
    d = build_domain(2, 1, 13, 9, 0.2)
    allnodes = np.sort(np.concatenate([d.interior, d.boundary]))
    assert np.array_equal(allnodes, np.arange(d.size))


def test_collar_excludes_center():
    d = build_domain(1, 1, 65, 65, 0.15)
    assert not d.collar.reshape(d.shape)[32, 32]
    assert d.collar.reshape(d.shape)[0, 32]


def test_perimeter_weights():
    d = build_domain(2, 1, 33, 17, 0.3)
    assert abs(d.weights.sum() - 6.0) < 1e-12 * 6


def test_boundary_normals_unit():
    d = build_domain(1.5, 1, 21, 15, 0.2)
    assert np.allclose(np.linalg.norm(d.normals, axis=1), 1.0, atol=0, rtol=0)


@pytest.mark.parametrize("args", [(0, 1, 9, 9, 0.1), (1, 1, 7, 9, 0.1), (1, 1, 9, 9, 0.5),
                                  (1, 1, 9, 9, 0.0)])
def test_invalid_domains_rejected(args):
    with pytest.raises(ValueError):
        build_domain(*args)


def test_zero_preset():
    d = build_domain(1, 1, 17, 17, 0.1)
    A, V = sample_preset(d, "zero")
    assert not A.a1.any() and not A.a2.any() and not np.any(V.values)


def test_interior_bump_vanishes_on_collar():
    d = centered_domain(1, 1, 33, 33, 0.1)
    A = sample_vector(d, {"kind": "bump", "center": [0.05, 0.0], "radius": 0.3}, require_collar=True)
    assert np.all(A.a1[d.collar] == 0) and np.all(A.a2[d.collar] == 0)


def test_bump_touching_collar_refused():
    d = centered_domain(1, 1, 33, 33, 0.1)
    with pytest.raises(ValueError):
        sample_vector(d, {"kind": "bump", "radius": 0.45}, require_collar=True)


def _gradient_curl(N):
    d = centered_domain(1, 1, N, N, 0.1)
    # a C^5 bump; the C-infinity exp bump is still pre-asymptotic on these grids
    A = sample_vector(d, {"kind": "gradient", "radius": 0.35, "amplitude": 0.5,
                          "profile": "power", "power": 6})
    return np.max(np.abs(curl(A).values)), d.h


def test_gradient_preset_curl_second_order():
    c1, h1 = _gradient_curl(33)
    c2, h2 = _gradient_curl(65)
    assert c2 < c1 / 3.5
    assert c2 < 500 * h2**2


def test_curl_of_zero():
    d = build_domain(1, 1, 9, 9, 0.2)
    assert not np.any(curl(zero_vector(d)).values)


def test_curl_of_windowed_rotation():
    d = centered_domain(1, 1, 65, 65, 0.1)
    A = sample_vector(d, {"kind": "rotation", "r_in": 0.2, "r_out": 0.35})
    X, Y = d.mesh()
    inside = np.hypot(X, Y) < 0.2 - 2 * d.h
    assert np.max(np.abs(curl(A).values[inside] - 1.0)) < 1e-10


def test_curl_linear(rng):
    d = build_domain(1, 1, 12, 10, 0.2)
    a, b = rng.standard_normal(2)
    F = VectorField2D(d, *rng.standard_normal((2, *d.shape)))
    G = VectorField2D(d, *rng.standard_normal((2, *d.shape)))
    lhs = curl(F.scaled(a) + G.scaled(b)).values
    rhs = a * curl(F).values + b * curl(G).values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-10 * np.max(np.abs(rhs)))


def test_check_collar_reports():
    d = centered_domain(1, 1, 33, 33, 0.1)
    A1 = sample_vector(d, {"kind": "swirl", "radius": 0.3})
    assert check_collar(A1, A1, d).max_difference == 0
    assert check_collar(A1, zero_vector(d), d).passed
    A3 = sample_vector(d, {"kind": "bump", "radius": 0.5})
    rep = check_collar(A1, A3, d)
    assert rep.max_difference > 0 and not rep.passed


def test_gradient_of_constant_vanishes():
    d = build_domain(1, 1, 9, 9, 0.2)
    g = gradient(sample_scalar(d, {"kind": "constant", "value": 3.0}))
    assert not g.a1.any() and not g.a2.any()


def test_field_shape_checked():
    d = build_domain(1, 1, 9, 9, 0.2)
    with pytest.raises(ValueError):
        ScalarField(d, np.zeros((8, 9)))
    with pytest.raises(ValueError):
        VectorField2D(d, np.zeros((9, 9)), np.zeros((9, 9)) + 0j)
