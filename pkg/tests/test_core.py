import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hamport.core import (BoundaryTrace, ClosedLoopState, Controller, EnergyDensity,
                          PortHamiltonianSystem, apply_boundary_ops, boundary_trace,
                          closed_loop_energy, controller_output, controller_rhs, energy,
                          interconnection_maps, l2_norm_sq, quadrature_weights)
from hamport.errors import (InputError, InterconnectionError, ModelError, ResolutionError)
from hamport.models import controller_library, vibrating_string

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def scalar_system(N=1, H=1.0):
    P = [np.zeros((1, 1)), np.array([[1.0]])]
    if N == 2:
        P.append(np.array([[-1.0]]))
    rows = 2 * N
    W_B1 = np.eye(rows)[: N - 1]
    W_B2 = np.eye(rows)[[N - 1]]
    W_C = np.eye(rows)[[0]]
    return PortHamiltonianSystem(tuple(P), W_B1.reshape(-1, rows), W_B2, W_C,
                                 EnergyDensity.constant([[H]]))


def pd_controller(K=2.0, S_c=3.0, D=1.0):
    return Controller([[K]], [[1.0]], [[S_c]], lambda v: 0.5 * float(v @ v), lambda v: v,
                      lambda w: D * w)


# ---------------------------------------------------------------- energy

def test_energy_zero_state(string):
    z = np.linspace(0, 1, 51)
    assert energy(string, np.zeros((51, 2)), z) == 0.0


def test_energy_constant_density(frozen):
    sysm = PortHamiltonianSystem((np.zeros((2, 2)), [[0, 1], [1, 0]]), [[0, 0, 1, 0]],
                                 [[0, 1, 0, 0]], [[1, 0, 0, 0]],
                                 EnergyDensity.constant(np.diag([2.0, 3.0])))
    z = np.linspace(0, 1, 11)
    npt.assert_allclose(energy(sysm, np.ones((11, 2)), z), frozen["energy"]["const_diag23"],
                        rtol=1e-14)


def test_energy_string_sine_converges_quadratically(string, frozen):
    errs = []
    for n in (51, 101, 201):
        z = np.linspace(0, 1, n)
        x = np.stack([np.sin(np.pi * z), np.zeros(n)], axis=1)
        errs.append(abs(energy(string, x, z) - frozen["energy"]["string_sine"]))
    # trapezoid is exact for sin^2 on a full period up to roundoff
    assert max(errs) < 1e-14


def test_energy_simpson_matches_trapezoid_order(string):
    z = np.linspace(0, 1, 41)
    x = np.stack([z**3, np.exp(z)], axis=1)
    exact = 0.5 * (1 / 7 + (np.e**2 - 1) / 2)
    assert abs(energy(string, x, z, "simpson") - exact) < abs(energy(string, x, z) - exact)


def test_energy_dimension_mismatch(string):
    with pytest.raises(InputError):
        energy(string, np.zeros((11, 3)), np.linspace(0, 1, 11))
    with pytest.raises(InputError):
        energy(string, np.zeros((11, 2)), np.linspace(0, 0.5, 11))


@given(arrays(float, (21, 2), elements=finite))
def test_energy_bounded_by_density_bounds(x):
    s = vibrating_string(rho=lambda z: 1.5 + 0.5 * np.sin(3 * z), T=2.0)
    z = np.linspace(0, 1, 21)
    E = energy(s, x, z)
    nrm = l2_norm_sq(x, z)
    assert 0.5 * s.H.m_low * nrm - 1e-12 <= E <= 0.5 * s.H.m_high * nrm + 1e-12


def test_quadrature_weights_sum_to_length():
    z = np.linspace(-1, 2, 31)
    npt.assert_allclose(quadrature_weights(z).sum(), 3.0, rtol=1e-14)
    npt.assert_allclose(quadrature_weights(z, "simpson").sum(), 3.0, rtol=1e-14)


# ---------------------------------------------------------------- traces

def test_trace_constant_field(string):
    z = np.linspace(0, 1, 11)
    c = np.array([0.7, -1.3])
    # H = I for the default string, so Hx = x
    tr = boundary_trace(string, np.tile(c, (11, 1)), z)
    npt.assert_allclose(tr.z, [c[0], c[1], c[0], c[1]], atol=1e-14)
    npt.assert_allclose(tr.block("b"), c, atol=1e-14)


def test_trace_linear_scalar():
    s = scalar_system(1)
    z = np.linspace(0, 1, 9)
    npt.assert_allclose(boundary_trace(s, z, z).z, [1.0, 0.0], atol=1e-14)


def test_trace_second_order_quadratic(frozen):
    s = scalar_system(2)
    z = np.linspace(0, 1, 21)
    npt.assert_allclose(boundary_trace(s, z**2, z).z, frozen["trace"]["zeta_squared_N2"],
                        atol=1e-10)


def test_trace_needs_resolution():
    s = scalar_system(2)
    with pytest.raises(ResolutionError):
        boundary_trace(s, np.zeros(5), np.linspace(0, 1, 5))


def test_trace_length_invariant():
    with pytest.raises(InputError):
        BoundaryTrace(np.zeros(3), 2, 1)


# ---------------------------------------------------------------- boundary operators

def test_boundary_ops_zero(string):
    u, y, bc = apply_boundary_ops(string, np.zeros(4))
    assert not np.any(u) and not np.any(y) and not np.any(bc)


def test_boundary_ops_string_rows(string, frozen):
    ref = frozen["string_rows"]
    u, y, bc = apply_boundary_ops(string, [1.0, 5.0, 0.0, 7.0])
    npt.assert_array_equal(u, [ref["u"]])
    npt.assert_array_equal(y, [ref["y"]])
    npt.assert_array_equal(bc, [ref["bc"]])
    _, _, bc = apply_boundary_ops(string, [0.0, 0.0, 3.0, 0.0])
    npt.assert_array_equal(bc, [ref["bc_violation"]])


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), finite, finite)
def test_boundary_ops_linear(z1, z2, a, b):
    s = vibrating_string()
    lhs = apply_boundary_ops(s, a * z1 + b * z2)
    f1, f2 = apply_boundary_ops(s, z1), apply_boundary_ops(s, z2)
    for l, p, q in zip(lhs, f1, f2):
        npt.assert_allclose(l, a * p + b * q, atol=1e-12 * (1 + np.abs(l).max()))


# ---------------------------------------------------------------- controller

def test_controller_rhs_zero():
    c = pd_controller()
    v1d, v2d = controller_rhs(c, [0.0], [0.0], [0.0])
    assert v1d[0] == 0.0 and v2d[0] == 0.0


def test_controller_rhs_values(frozen):
    c = pd_controller(K=2.0)
    v1d, v2d = controller_rhs(c, [1.0], [1.0], [0.0])
    npt.assert_array_equal(np.concatenate([v1d, v2d]), frozen["controller"]["rhs"])
    v1d, v2d = controller_rhs(c, [0.0], [0.0], [5.0])
    npt.assert_array_equal(np.concatenate([v1d, v2d]), [0.0, 5.0])


def test_controller_output(frozen):
    c = pd_controller(K=2.0, S_c=3.0)
    npt.assert_array_equal(controller_output(c, [0.0], [0.0]), [0.0])
    npt.assert_array_equal(controller_output(c, [1.0], [1.0]), [frozen["controller"]["output"]])
    npt.assert_array_equal(controller_output(c, [0.7], [0.0]), [1.4])


def test_controller_nonfinite_gradient():
    c = Controller([[1.0]], [[1.0]], [[1.0]], lambda v: float(v @ v),
                   lambda v: np.full_like(v, np.nan) if np.any(v) else v, lambda w: w)
    with pytest.raises(ModelError):
        controller_rhs(c, [1.0], [0.0], [0.0])


@pytest.mark.parametrize("kwargs", [
    {"K": [[-1.0]]},
    {"K": [[1.0, 2.0], [0.0, 1.0]], "B_c": [[1.0], [0.0]]},
    {"potential": lambda v: 1.0 + float(v @ v)},
    {"damping": lambda w: w + 1.0},
])
def test_controller_invariants(kwargs):
    base = dict(K=[[1.0]], B_c=[[1.0]], S_c=[[1.0]], potential=lambda v: float(v @ v),
                grad_potential=lambda v: 2 * v, damping=lambda w: w)
    base.update(kwargs)
    with pytest.raises(ModelError):
        Controller(**base)


def test_varsigma_uses_symmetric_part():
    c = controller_library("linear_pd", {"k": 2, "S_c": [[1.0, 4.0], [-4.0, 2.0]]})
    assert c.varsigma == pytest.approx(1.0)


def test_controller_passivity_identity(rng):
    # d/dt E_c = u_c^T y_c - u_c^T S_c u_c - (K v2)^T R(K v2) along smooth solutions
    from scipy.integrate import solve_ivp
    c = controller_library("quartic_pd", {"K": 1.5, "S_c": 2.0, "D": 0.7})

    def u_c(t):
        return np.array([np.sin(2 * t)])

    def f(t, v):
        a, b = controller_rhs(c, v[:1], v[1:], u_c(t))
        return np.concatenate([a, b])

    ts = np.linspace(0, 2, 2001)
    sol = solve_ivp(f, (0, 2), [0.3, -0.2], t_eval=ts, rtol=1e-11, atol=1e-12)
    E = np.array([c.energy(v[:1], v[1:]) for v in sol.y.T])
    dE = np.gradient(E, ts, edge_order=2)
    rhs = []
    for t, v in zip(ts, sol.y.T):
        uc = u_c(t)
        yc = controller_output(c, v[1:], uc)
        Kv2 = c.K @ v[1:]
        rhs.append(float(uc @ yc - uc @ c.S_c @ uc - Kv2 @ c.damp(Kv2)))
    npt.assert_allclose(dE[5:-5], np.array(rhs)[5:-5], atol=1e-5)


# ---------------------------------------------------------------- closed loop

def test_closed_loop_energy_zero(string):
    z = np.linspace(0, 1, 11)
    st0 = ClosedLoopState(np.zeros((11, 2)), [0.0], [0.0])
    assert closed_loop_energy(string, pd_controller(), st0, z) == 0.0


def test_closed_loop_energy_controller_part(string, frozen):
    z = np.linspace(0, 1, 11)
    st0 = ClosedLoopState(np.zeros((11, 2)), [2.0], [1.0])
    E = closed_loop_energy(string, pd_controller(K=2.0), st0, z)
    assert E == frozen["controller"]["closed_loop_energy"]


def test_closed_loop_energy_additive(string, frozen):
    z = np.linspace(0, 1, 201)
    x = np.stack([np.sin(np.pi * z), np.zeros_like(z)], axis=1)
    st0 = ClosedLoopState(x, [0.0], [0.0])
    npt.assert_allclose(closed_loop_energy(string, pd_controller(), st0, z),
                        frozen["energy"]["string_sine"], rtol=1e-12)
    st1 = ClosedLoopState(x, [0.4], [-1.1])
    c = pd_controller()
    assert closed_loop_energy(string, c, st1, z) == energy(string, x, z) + c.energy([0.4], [-1.1])


def test_closed_loop_state_rejects_nan():
    with pytest.raises(InputError):
        ClosedLoopState(np.array([[np.nan, 0.0]]), [0.0], [0.0])


def test_interconnection_input(string, frozen):
    ic = interconnection_maps(string, pd_controller(K=2.0, S_c=3.0))
    z = np.array([1.0, 5.0, 0.0, 7.0])
    npt.assert_array_equal(ic.input_from_trace(z, [1.0]), [frozen["string_rows"]["closed_loop_input"]])
    npt.assert_array_equal(ic.output_from_trace(z), string.W_C @ z)
    # silent controller: v2 = 0 and C x = 0
    z0 = np.array([0.0, 5.0, 0.0, 7.0])
    npt.assert_array_equal(ic.input_from_trace(z0, [0.0]), string.W_B2 @ z0)


def test_interconnection_recovers_feedback(string):
    c = pd_controller(K=2.0, S_c=3.0)
    ic = interconnection_maps(string, c)
    zg = np.linspace(0, 1, 41)
    x = np.stack([np.cos(zg), zg**2], axis=1)
    st0 = ClosedLoopState(x, [0.1], [0.5])
    d = ic.input_map(st0, zg)
    u = ic.plant_input(d, st0, zg)
    npt.assert_allclose(u, string.W_B2 @ boundary_trace(string, x, zg).z, atol=1e-13)


def test_interconnection_dimension_mismatch(string):
    with pytest.raises(InterconnectionError):
        interconnection_maps(string, controller_library("linear_pd", {"k": 2}))


def test_density_bounds_validated():
    with pytest.raises(ModelError):
        EnergyDensity(lambda z: np.eye(1), 1, 0.0, 1.0)
