import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magspec.domain import centered_domain
from magspec.hamiltonian import assemble, eigensolve
from magspec.presets import sample_preset, sample_scalar, sample_vector, vector_sampler
from magspec.recovery import (FourierGrid, RecoverySource, SweepConfig, _fit_inverse_tau,
                              fourier_grid, ray_transform_identity, recover_curl,
                              recover_potential, uniqueness_sweep)

from conftest import operator_pair

POWER4 = {"profile": "power", "power": 4}
SWIRL4 = {"kind": "swirl", "center": [0.01, -0.01], "radius": 0.38, "amplitude": 0.3, **POWER4}
VBUMP4 = {"kind": "bump", "center": [0.01, -0.01], "radius": 0.38, "amplitude": 2.0, **POWER4}


def test_ray_identity_zero_field():
    assert ray_transform_identity([1.0, 2.0], vector_sampler("zero")) == (0j, 0j)


def test_ray_identity_bump():
    s = vector_sampler({"kind": "swirl", "center": [0.05, -0.1], "radius": 0.3, "amplitude": 0.8})
    lhs, rhs = ray_transform_identity([2.0, -3.0], s)
    assert abs(lhs - rhs) < 1e-3 * abs(lhs)


def test_ray_identity_pure_gauge():
    s = vector_sampler({"kind": "gradient", "center": [0.0, 0.1], "radius": 0.3, "amplitude": 0.5})
    lhs, rhs = ray_transform_identity([1.5, 2.5], s)
    assert abs(rhs) < 1e-6 and abs(lhs) < 1e-6


@settings(max_examples=15, deadline=None)
@given(cx=st.floats(-0.2, 0.2), cy=st.floats(-0.2, 0.2), R=st.floats(0.1, 0.3),
       amp=st.floats(-1.5, 1.5), dx=st.floats(-1, 1), dy=st.floats(-1, 1),
       k=st.floats(0.5, 6.0), th=st.floats(0, 2 * np.pi))
def test_ray_identity_random_bumps(cx, cy, R, amp, dx, dy, k, th):
    s = vector_sampler({"kind": "sum", "terms": [
        {"kind": "swirl", "center": [cx, cy], "radius": R, "amplitude": amp},
        {"kind": "bump", "center": [-cy, cx], "radius": R, "direction": [dx, dy]}]})
    lhs, rhs = ray_transform_identity(k * np.array([np.cos(th), np.sin(th)]), s)
    assert abs(lhs - rhs) <= 1e-3 * max(abs(lhs), 1e-6)


def test_fourier_grid_symmetrize():
    g = FourierGrid(1.0, 2)
    rng = np.random.default_rng(3)
    g.values = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    g.symmetrize()
    assert g.asymmetry > 0
    assert np.array_equal(g.values, np.conj(g.values[::-1, ::-1]))


def test_fourier_grid_validation():
    with pytest.raises(ValueError):
        FourierGrid(1.0, 0)
    with pytest.raises(ValueError):
        FourierGrid(-1.0, 2)


def test_inverse_of_synthetic_data_is_identity():
    """Exact coefficients of a trigonometric polynomial are inverted exactly."""
    d = centered_domain(1, 1, 33, 33, 0.1)
    g = fourier_grid(d, half=3)
    X, Y = d.mesh()
    k = g.step
    f = 1.0 + 0.5 * np.cos(k * X) - 0.25 * np.sin(k * (2 * X - 3 * Y))
    c = g.half
    P2 = g.period**2
    g.values[c, c] = 1.0 * P2
    g.values[c + 1, c] = g.values[c - 1, c] = 0.25 * P2
    g.values[c + 2, c - 3] = 0.125j * P2
    g.values[c - 2, c + 3] = -0.125j * P2
    out, imag = g.inverse(d)
    assert np.max(np.abs(out - f)) < 1e-12 and imag < 1e-12


def test_fit_inverse_tau_exact():
    taus = [8.0, 16.0, 32.0]
    vals = [2.0 - 1j + (3.0 + 0.5j) / t for t in taus]
    assert abs(_fit_inverse_tau(taus, vals) - (2.0 - 1j)) < 1e-13


@pytest.fixture(scope="module")
def d65():
    return centered_domain(1, 1, 65, 65, 0.1)


def test_curl_of_identical_pair_is_zero(d65):
    op1, op2 = operator_pair(d65, {"A": SWIRL4}, {"A": SWIRL4})
    rep = recover_curl(RecoverySource(op1, op2), fourier_grid(d65, half=3))
    assert np.max(np.abs(rep.estimate.values)) < 1e-8


def test_curl_gauge_null(d65):
    G = {"kind": "gradient", "center": [0.05, 0.0], "radius": 0.3, "amplitude": 0.05, **POWER4}
    op1, op2 = operator_pair(d65, {"A": SWIRL4}, {"A": {"kind": "sum", "terms": [SWIRL4, G]}})
    rep = recover_curl(RecoverySource(op1, op2), fourier_grid(d65, half=4))
    ref_swirl = recover_curl(RecoverySource(op1, operator_pair(d65, "zero")[0]),
                             fourier_grid(d65, half=4))
    assert rep.estimate_norm() < 1e-2 * ref_swirl.estimate_norm()


def test_potential_of_identical_pair_is_zero(d65):
    op1, op2 = operator_pair(d65, {"V": VBUMP4}, {"V": VBUMP4})
    rep = recover_potential(RecoverySource(op1, op2), fourier_grid(d65, half=3))
    assert np.max(np.abs(rep.estimate.values)) < 1e-8


def test_potential_requires_equal_A(d65):
    op1, op2 = operator_pair(d65, {"A": SWIRL4}, "zero")
    with pytest.raises(ValueError):
        recover_potential(RecoverySource(op1, op2), fourier_grid(d65, half=1))


def test_ladder_rejects_unresolvable_frequencies(d65):
    op1, op2 = operator_pair(d65, {"V": VBUMP4})
    src = RecoverySource(op1, op2, mode="direct")
    assert src.ladder([1.0, 1.0]) == [8.0, 16.0, 32.0]
    with pytest.raises(ValueError):
        src.ladder([30.0, 0.0])
    with pytest.raises(ValueError):
        RecoverySource(op1, op2, mode="spectral")
    with pytest.raises(ValueError):
        RecoverySource(op1, op2, mode="psychic")


def test_sweep_identical_operators_zero():
    d = centered_domain(1, 1, 33, 33, 0.1)
    op = operator_pair(d, {"A": SWIRL4, "V": VBUMP4})[0]
    spec = eigensolve(op, 40)
    rep = uniqueness_sweep(op, op, spec, spec, SweepConfig(K=40, verify_gauge_data=False))
    assert rep.passed
    st = {s.name: s.metrics for s in rep.stages}
    assert st["spectral_data"]["max_eigen_gap"] == 0
    assert st["curl"]["relative_curl"] == 0 and st["potential"]["relative_potential"] == 0


def test_sweep_detects_different_fields():
    d = centered_domain(1, 1, 33, 33, 0.1)
    op1, op2 = operator_pair(d, {"A": SWIRL4, "V": VBUMP4}, "zero")
    s1, s2 = eigensolve(op1, 40), eigensolve(op2, 40)
    rep = uniqueness_sweep(op1, op2, s1, s2, SweepConfig(K=40, verify_gauge_data=False))
    assert not rep.passed
    st = {s.name: s for s in rep.stages}
    assert st["spectral_data"].metrics["max_eigen_gap"] > 0.1
    assert not st["curl"].passed
