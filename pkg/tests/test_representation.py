import numpy as np
import pytest

from magspec.ansatz import isozaki_params
from magspec.domain import ScalarField, centered_domain
from magspec.hamiltonian import eigensolve
from magspec.presets import sample_preset, sample_scalar, sample_vector
from magspec.representation import (build_ansatz, check_resolution, electric_limit_target,
                                    magnetic_limit_target, identity_residual, scattering_pair,
                                    tau_sweep)

from conftest import REFERENCE, SWIRL, operator_pair


def test_identical_operators_scatter_identically(small_pair):
    op = small_pair[0]
    S1, S2 = scattering_pair(op, op, isozaki_params([2.0, 1.0], 8.0))
    assert S1 == S2


def test_free_pair(small):
    op1, op2 = operator_pair(small, "zero", "zero")
    S1, S2 = scattering_pair(op1, op2, isozaki_params([1.0, 2.0], 8.0))
    assert S1 - S2 == 0 and np.isfinite(S1)


def test_resolution_precondition(small):
    check_resolution(small, 16.0)
    with pytest.raises(ValueError, match="tau_max"):
        check_resolution(small, 16.5)


def test_bookkeeping_and_resolvent_bound(small_pair):
    t = identity_residual(*small_pair, isozaki_params([2.0, 1.0], 8.0))
    for j in (1, 2):
        parts = t.terms[j]
        assert t.rhs(j) == parts["volume_A"] + parts["volume_V"] + parts["boundary"] + parts["resolvent"]
        assert abs(parts["resolvent"]) <= t.resolvent_bound[j]


def test_free_ansatz_has_no_cross_symbol(small):
    op1, op2 = operator_pair(small, {"V": REFERENCE["V"]}, "zero")
    fr = isozaki_params([2.0, 1.0], 8.0)
    t = identity_residual(op1, op2, fr, build_ansatz(op1, op2, fr, mode="electric"))
    assert np.max(np.abs(t.q["q12"])) == 0


def test_identity_residual_second_order():
    res = []
    for N in (33, 65):
        d = centered_domain(1, 1, N, N, 0.1)
        t = identity_residual(*operator_pair(d, REFERENCE), isozaki_params([2.5, 2.5], 8.0))
        res.append(max(t.rel_residual(1), t.rel_residual(2)))
    assert res[1] < res[0] / 3


def test_magnetic_target_vanishes_for_equal_potentials(small):
    A = sample_vector(small, SWIRL)
    assert magnetic_limit_target(isozaki_params([2.0, 1.0], 8.0), A, A) == 0


def test_magnetic_target_converged_in_quadrature():
    vals = []
    fr = isozaki_params([2.5, 2.5], 8.0)
    for N in (129, 257):
        d = centered_domain(1, 1, N, N, 0.1)
        A1 = sample_vector(d, SWIRL)
        A2 = sample_vector(d, "zero")
        vals.append(magnetic_limit_target(fr, A1, A2))
    assert abs(vals[1] - vals[0]) < 1e-6 * abs(vals[1])


def test_electric_target_basic(small):
    V = sample_scalar(small, REFERENCE["V"])
    Z = sample_scalar(small, "zero")
    assert electric_limit_target([1.0, 2.0], V, V) == 0
    a = electric_limit_target([1.5, -2.0], V, Z)
    b = electric_limit_target([-1.5, 2.0], V, Z)
    assert abs(a - np.conj(b)) < 1e-14 * abs(a)


def test_electric_target_refuses_different_A(small):
    A1, V1 = sample_preset(small, REFERENCE)
    A2, V2 = sample_preset(small, "zero")
    with pytest.raises(ValueError):
        electric_limit_target([1.0, 1.0], V1, V2, A1, A2)


def test_electric_target_matches_fft():
    d = centered_domain(1, 1, 65, 65, 0.1)
    V = sample_scalar(d, {"kind": "gaussian", "center": [0.05, -0.02], "sigma": 0.07,
                          "amplitude": 1.5})
    Z = sample_scalar(d, "zero")
    M = 256
    F = np.fft.fft2(np.real(V.values), s=(M, M)) * d.cell_area
    for m, n in ((3, 0), (5, -7), (-2, 4)):
        xi = 2 * np.pi * np.array([m, n]) / (M * d.h)
        oracle = F[m % M, n % M] * np.exp(-1j * (xi @ np.array(d.origin)))
        assert abs(electric_limit_target(xi, V, Z) - oracle) < 1e-6 * abs(oracle)


def test_sweep_identical_operators(small_pair):
    op = small_pair[0]
    t = tau_sweep(op, op, [2.0, 1.0], [8.0, 16.0])
    assert all(m == 0 for m in t.measured) and all(x == 0 for x in t.target)


@pytest.mark.parametrize("taus", [[8.0, 8.0], [16.0, 8.0], [8.0, 64.0]])
def test_sweep_rejects_bad_ladders(small_pair, taus):
    with pytest.raises(ValueError):
        tau_sweep(*small_pair, [2.0, 1.0], taus)


@pytest.mark.parametrize("mode", ["magnetic", "electric"])
def test_spectral_route_equals_direct_with_full_spectra(tiny, tiny_pair, mode):
    if mode == "magnetic":
        op1, op2 = tiny_pair
    else:
        op1, op2 = operator_pair(tiny, {"V": {"kind": "bump", "radius": 0.25, "amplitude": 3.0}})
    s1, s2 = eigensolve(op1, op1.n), eigensolve(op2, op2.n)
    taus = [2.0, 3.0, 4.0]
    a = tau_sweep(op1, op2, [1.0, 1.0], taus, mode=mode)
    b = tau_sweep(op1, op2, [1.0, 1.0], taus, mode=mode, source="spectral", spec1=s1, spec2=s2)
    direct = np.array(a.measured)
    assert np.all(np.abs(np.array(b.measured) - direct) < 1e-6 * np.abs(direct))
    assert b.meta["tail_indicator"] == [0.0, 0.0, 0.0]


def test_sweep_threads_do_not_change_results(small_pair):
    a = tau_sweep(*small_pair, [2.0, 1.0], [8.0, 12.0, 16.0], threads=1)
    b = tau_sweep(*small_pair, [2.0, 1.0], [8.0, 12.0, 16.0], threads=3)
    assert a.rows() == b.rows()
