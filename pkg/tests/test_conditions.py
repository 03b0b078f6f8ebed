import dataclasses

import numpy as np
import numpy.testing as npt
import pytest

from hamport.conditions import (FAIL, INDETERMINATE, PASS, ConditionSetupError,
                                UnsupportedOrderError, boundary_observability_constant, certify,
                                check_boundary_observability, check_controller_basic,
                                check_equilibrium_uniqueness, check_feedthrough,
                                check_impedance_passivity, check_strict_damping,
                                check_structure, check_surjectivity, estimate_quasi_constants,
                                kernel_basis)
from hamport.core import Controller, EnergyDensity, PortHamiltonianSystem
from hamport.errors import InterconnectionError, ModelError
from hamport.models import controller_library, vibrating_string


def scalar_controller(potential, grad, damping, S_c=1.0):
    return Controller([[1.0]], [[1.0]], [[S_c]], potential, grad, damping)


def quadratic(v):
    return 0.5 * float(v @ v)


def identity(v):
    return np.asarray(v, dtype=float)


def with_P0(system, P0):
    return dataclasses.replace(system, P=(np.asarray(P0, dtype=float),) + tuple(system.P[1:]))


def transport(P0=0.0, P1=1.0):
    # scalar first-order system with one boundary input and no constraint row
    return PortHamiltonianSystem(([[P0]], [[P1]]), np.zeros((0, 2)), [[1.0, 0.0]], [[0.0, 1.0]],
                                 EnergyDensity.constant([[1.0]]))


# ---------------------------------------------------------------- structure

def test_structure_presets(string, beam):
    assert check_structure(string).status == PASS
    assert check_structure(beam).status == PASS


def test_structure_antidissipative_P0():
    v = check_structure(transport(P0=1.0))
    assert v.status == FAIL
    w = v.witness["zeroth_order_dissipative"]
    assert w["eigenvalue"] == pytest.approx(2.0)
    # the witness re-evaluates as a violation
    vec = w["vector"]
    assert vec @ (2.0 * np.eye(1)) @ vec > 1e-6


def test_structure_singular_leading_coefficient():
    v = check_structure(transport(P1=0.0))
    assert v.status == FAIL
    assert "leading_coefficient_invertible" in v.witness


def test_structure_parity_violation(string):
    bad = dataclasses.replace(string, P=(string.P[0], np.array([[0.0, 1.0], [-1.0, 0.0]])))
    v = check_structure(bad)
    assert v.status == FAIL
    assert v.witness["coefficient_parity"]["order"] == 1


# ---------------------------------------------------------------- passivity

def test_passivity_string_energy_preserving(string):
    v = check_impedance_passivity(string, n=400)
    assert v.status == PASS
    assert v.constants["energy_preserving"]
    assert v.constants["max_abs_relative_residual"] < 1e-6


def test_passivity_beam_energy_preserving(beam):
    v = check_impedance_passivity(beam, n=400)
    assert v.passed and v.constants["energy_preserving"]


def test_passivity_damped_string_not_preserving(string):
    v = check_impedance_passivity(with_P0(string, -np.eye(2)), n=400)
    assert v.status == PASS
    assert not v.constants["energy_preserving"]
    # every sampled residual is strictly negative
    assert v.constants["max_relative_residual"] < -1e-3


def test_passivity_antidamped_fails_with_trace_witness(string):
    v = check_impedance_passivity(with_P0(string, np.eye(2)), n=200)
    assert v.status == FAIL
    z = v.witness["trace"]
    npt.assert_allclose(string.W_B1 @ z, 0.0, atol=1e-9)
    assert v.witness["residual"] > v.tol * v.witness["scale"]


def test_passivity_setup_errors(string):
    with pytest.raises(ConditionSetupError):
        check_impedance_passivity(string, n_tests=0)
    # non-finite constraint rows never reach the check
    with pytest.raises(ModelError):
        dataclasses.replace(string, W_B1=np.array([[np.nan, 0.0, 1.0, 0.0]]))


def test_passivity_deterministic(string):
    a = check_impedance_passivity(string, seed=3, n=100)
    b = check_impedance_passivity(string, seed=3, n=100)
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------- surjectivity

def test_surjectivity_presets(string, beam):
    vs, vb = check_surjectivity(string), check_surjectivity(beam)
    assert vs.passed and vs.constants["rank"] == 3
    assert vb.passed and vb.constants["rank"] == 6


def test_surjectivity_duplicated_row(string):
    bad = dataclasses.replace(string, W_C=string.W_B2.copy())
    v = check_surjectivity(bad)
    assert v.status == FAIL
    assert v.constants["rank"] == string.m * string.N
    npt.assert_allclose(v.witness["left_null_vector"] @ bad.W, 0.0, atol=1e-12)


def test_surjectivity_no_constraints():
    assert check_surjectivity(transport()).passed


# ---------------------------------------------------------------- observability

def test_observability_string(string, frozen):
    kb = boundary_observability_constant(string, "b")
    ka = boundary_observability_constant(string, "a")
    assert kb == pytest.approx(1.0, abs=1e-12)
    assert ka == pytest.approx(0.0, abs=1e-12)
    npt.assert_allclose([kb, ka], [frozen["observability"]["kappa_b"],
                                   frozen["observability"]["kappa_a"]], atol=1e-6)
    assert check_boundary_observability(string).passed


def test_observability_zero_forms(string):
    z = dataclasses.replace(string, W_B2=np.zeros((1, 4)), W_C=np.zeros((1, 4)))
    assert boundary_observability_constant(z, "a") == 0.0
    assert boundary_observability_constant(z, "b") == 0.0
    assert check_boundary_observability(z).status == FAIL


def test_observability_beam_positive(beam):
    assert boundary_observability_constant(beam, "b") > 0.1


def test_observability_errors(string):
    with pytest.raises(ConditionSetupError):
        boundary_observability_constant(string, "c")
    second = PortHamiltonianSystem(([[0.0]], [[1.0]], [[-1.0]]), [[1.0, 0, 0, 0]],
                                   [[0, 1.0, 0, 0]], [[0, 0, 1.0, 0]],
                                   EnergyDensity.constant([[1.0]]))
    with pytest.raises(UnsupportedOrderError):
        boundary_observability_constant(second, "b")


def test_kernel_basis_orthonormal(rng):
    M = rng.standard_normal((2, 5))
    Z = kernel_basis(M)
    assert Z.shape == (5, 3)
    npt.assert_allclose(M @ Z, 0.0, atol=1e-12)
    npt.assert_allclose(Z.T @ Z, np.eye(3), atol=1e-12)


# ---------------------------------------------------------------- controller checks

def test_controller_basic_pass():
    assert check_controller_basic(scalar_controller(quadratic, identity, identity)).passed


def test_controller_basic_negative_potential():
    c = scalar_controller(lambda v: -float(v @ v), lambda v: -2 * v, identity)
    v = check_controller_basic(c)
    assert v.status == FAIL
    w = v.witness["potential_positive"]
    npt.assert_allclose(np.abs(w["v"]), [1.0])
    assert w["P"] == -1.0


def test_controller_basic_negative_damping():
    c = scalar_controller(quadratic, identity, lambda w: -w)
    v = check_controller_basic(c)
    w = v.witness["damping_nonnegative"]
    assert w["wR"] == -1.0
    npt.assert_allclose(np.abs(w["w"]), [1.0])


def test_controller_basic_wrong_gradient():
    v = check_controller_basic(scalar_controller(quadratic, lambda v: 2 * v, identity))
    assert "gradient_consistent" in v.witness


def test_controller_basic_library(library_controller):
    assert check_controller_basic(library_controller).passed


def test_feedthrough_witness():
    c = controller_library("linear_pd", {"S_c": -1.0})
    v = check_feedthrough(c)
    assert v.status == FAIL
    npt.assert_allclose(np.abs(v.witness["u"]), [1.0])
    assert v.witness["uSu"] == -1.0


# ---------------------------------------------------------------- quasi constants

def test_quasi_constants_linear(frozen):
    q = estimate_quasi_constants(controller_library("linear_pd", {"D": 2.0}))
    assert q.passed
    ref = frozen["quasi"]
    npt.assert_allclose(q.as_tuple(), [ref["c1_low"], ref["c1_high"], ref["c2_low"],
                                       ref["c2_high"]], rtol=1e-12)


def test_quasi_upper_constant_not_sharp_still_valid(rng):
    # c1_high = 1 is admissible for P = |v|^2/2 (the sharp value is 1/2)
    c = controller_library("linear_pd")
    for v in rng.standard_normal((200, 1)) * 5:
        assert 1.0 * float(v @ c.grad(v)) >= c.potential(v)
        assert 0.5 * float(v @ c.grad(v)) >= c.potential(v) - 1e-14


def test_quasi_linear_fails_for_saturation():
    q = estimate_quasi_constants(controller_library("saturating_damper_pd"))
    assert q.quadratic.passed
    assert q.linear.status == FAIL
    vals = q.linear.witness["c2_high"]["values"]
    assert vals[-1] > vals[0]


def test_quasi_quartic_potential():
    q = estimate_quasi_constants(controller_library("quartic_pd"))
    assert q.passed
    assert 0.25 <= q.c1_high <= 0.5
    assert q.c1_low == pytest.approx(0.5, rel=1e-4)


# ---------------------------------------------------------------- strict damping

def test_strict_damping_saturating(frozen):
    sd = check_strict_damping(controller_library("saturating_damper_pd"),
                              delta_grid=(1.0,))
    assert sd.passed and sd.delta == 1.0
    assert sd.c_low >= frozen["strict_damping"]["c_low"] - 1e-12
    assert sd.c_high >= frozen["strict_damping"]["c_high"] - 1e-12


def test_strict_damping_linear():
    sd = check_strict_damping(scalar_controller(quadratic, identity, identity),
                              delta_grid=(0.5,))
    assert sd.passed
    assert sd.c_low == pytest.approx(1.0)
    assert sd.c_high == pytest.approx(0.25)


def test_strict_damping_zero():
    sd = check_strict_damping(scalar_controller(quadratic, identity, lambda w: 0.0 * w))
    assert sd.damping.status == FAIL and sd.delta is None


def test_input_injectivity_fails():
    c = Controller(np.eye(2), np.ones((2, 2)), np.eye(2), quadratic, identity, identity)
    assert check_strict_damping(c).injectivity.status == FAIL


# ---------------------------------------------------------------- equilibria

@pytest.mark.parametrize("name", ["linear_pd", "quartic_pd"])
def test_unique_critical_point(name):
    assert check_equilibrium_uniqueness(controller_library(name)).status == PASS


def test_double_well_has_extra_critical_points(frozen):
    c = scalar_controller(lambda v: float((v @ v - 1) ** 2 - 1), lambda v: 4 * (v @ v - 1) * v,
                          identity)
    v = check_equilibrium_uniqueness(c)
    assert v.status == FAIL
    wells = [p for p in frozen["double_well"]["critical_points"] if p != 0.0]
    assert min(abs(v.witness["v"][0] - p) for p in wells) < 1e-8


# ---------------------------------------------------------------- report

def test_certify_string_linear(string):
    rep = certify(string, controller_library("linear_pd"))
    assert rep.passed
    assert rep["approximate_observability"].passed
    assert rep["uniform_iss_hypotheses"].passed
    assert rep.constants["kappa_b"] == pytest.approx(1.0)
    assert rep.constants["varsigma"] == 1.0


def test_certify_string_saturating(string):
    rep = certify(string, controller_library("saturating_damper_pd"))
    assert rep["weak_iss_hypotheses"].passed
    assert rep["uniform_iss_hypotheses"].status == FAIL


def test_certify_derivation_requires_preservation(string):
    rep = certify(with_P0(string, -np.eye(2)), controller_library("linear_pd"))
    assert rep["approximate_observability"].status == INDETERMINATE


def test_certify_deterministic(string):
    c = controller_library("quartic_pd")
    assert certify(string, c, seed=5).to_json() == certify(string, c, seed=5).to_json()


def test_certify_k_mismatch(string):
    with pytest.raises(InterconnectionError):
        certify(string, controller_library("linear_pd", {"k": 2}))


@pytest.mark.parametrize("t1,t2", [(1e-9, 1e-6), (1e-6, 1e-3)])
def test_tolerance_monotone(string, t1, t2):
    sysm = with_P0(string, -1e-7 * np.eye(2))
    v1 = check_impedance_passivity(sysm, tol=t1, n=100)
    v2 = check_impedance_passivity(sysm, tol=t2, n=100)
    assert (not v1.passed) or v2.passed
    assert v1.constants["energy_preserving"] <= v2.constants["energy_preserving"]
