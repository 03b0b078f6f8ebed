import json

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamport.diagnostics import (StabilityReport, assess_trajectories, contraction_from_energy,
                                 convergence_time, default_tau, dissipation_residual,
                                 dissipation_tolerance, fit_contraction, gain_curve,
                                 norm_equivalence, self_convergence, tail_settled, ugs_check,
                                 wave_speeds)
from hamport.discretize import discretize_closed_loop
from hamport.errors import InputError
from hamport.models import (controller_library, random_initial_state, smooth_bump_state,
                            vibrating_string)
from hamport.simulate import simulate


def model_for(name="linear_pd", n=40, **params):
    return discretize_closed_loop(vibrating_string(), controller_library(name, params), n)


def x0_of(model, seed=0):
    return model.from_state(random_initial_state(model.system, model.controller, model.zeta,
                                                 np.random.default_rng(seed)))


@pytest.fixture(scope="module")
def linear():
    return model_for()


@pytest.fixture(scope="module")
def zero_traj(linear):
    return simulate(linear, np.zeros(linear.size), {"kind": "zero"}, 1.0, 0.05)


# ---------------------------------------------------------------- dissipation and UGS

def test_zero_trajectory_checks(zero_traj):
    assert dissipation_residual(zero_traj) == 0.0
    assert convergence_time(zero_traj, 1e-6) == 0.0
    assert ugs_check(zero_traj, 1.0).margin == 0.0


def test_dissipation_residual_small(linear):
    tr = simulate(linear, x0_of(linear), {"kind": "exp_decay", "amplitude": 1.0}, 2.0, 0.01)
    assert dissipation_residual(tr) <= dissipation_tolerance(tr)


def test_ugs_step_disturbance(linear):
    # ||d||^2 = 12 with varsigma = 1 gives E(t) <= E(0) + 3
    tr = simulate(linear, x0_of(linear, 1), {"kind": "truncated_step", "amplitude": 2.0,
                                             "duration": 3.0}, 4.0, 0.01)
    assert tr.d_norm2[-1] == 12.0
    assert np.all(tr.E_total <= tr.E_total[0] + 3.0 + 1e-8)
    chk = ugs_check(tr, 1.0)
    assert chk.passed and chk.margin >= 0


def test_ugs_undisturbed_margin_monotone(linear):
    tr = simulate(linear, x0_of(linear, 2), {"kind": "zero"}, 2.0, 0.02)
    chk = ugs_check(tr, 1.0)
    npt.assert_allclose(chk.margin, np.min(tr.E_total[0] - tr.E_total), atol=1e-15)


@given(st.floats(0.1, 5.0))
def test_ugs_disturbance_term_quadratic(c):
    m = model_for(n=20)
    sig = {"kind": "truncated_step", "amplitude": c, "duration": 0.2}
    sig2 = dict(sig, amplitude=2 * c)
    a = simulate(m, np.zeros(m.size), sig, 0.3, 0.05)
    b = simulate(m, np.zeros(m.size), sig2, 0.3, 0.05)
    npt.assert_allclose(b.d_norm2, 4 * a.d_norm2, rtol=1e-14)


def test_ugs_errors(zero_traj):
    with pytest.raises(InputError):
        ugs_check(zero_traj, 0.0)


def test_convergence_time_none_and_errors(linear):
    tr = simulate(linear, x0_of(linear), {"kind": "zero"}, 0.5, 0.05)
    assert convergence_time(tr, 1e-12) is None
    assert convergence_time(tr, 1e6) == 0.0
    with pytest.raises(InputError):
        convergence_time(tr, 0.0)


def test_convergence_time_exp_decay():
    m = model_for(n=60)
    x0 = x0_of(m, 3)
    tr = simulate(m, x0, {"kind": "exp_decay", "amplitude": 0.2, "rate": 1.0}, 60.0, 0.02,
                  store_every=10**9)
    t = convergence_time(tr, 1e-4 * tr.norm[0])
    assert t is not None and t < 60.0
    assert np.all(tr.norm[tr.t >= t] < 1e-4 * tr.norm[0])


# ---------------------------------------------------------------- norm equivalence

def test_norm_equivalence_quadratic():
    ne = norm_equivalence(controller=controller_library("linear_pd"))
    r = np.array([0.01, 0.3, 1.0, 7.0, 500.0])
    npt.assert_allclose(ne.psi_low(r), 0.5 * r**2, rtol=1e-12)
    npt.assert_allclose(ne.psi_high(r), 0.5 * r**2, rtol=1e-12)
    assert ne.psi_low(0.0) == 0.0 and ne.psi_high(0.0) == 0.0
    npt.assert_allclose(ne.psi_low_inv(0.5 * r**2), r, rtol=1e-10)


def test_norm_equivalence_quartic():
    ne = norm_equivalence(controller=controller_library("quartic_pd"))
    r = np.geomspace(1e-2, 50, 20)
    assert np.all(ne.psi_low(r) >= 0.5 * r**2 * (1 - 1e-12))
    # upper envelope picks up alpha r^4 with alpha = 1/4
    exact = 0.5 * r**2 + 0.25 * r**4
    assert np.all(ne.psi_high(r) >= exact * (1 - 1e-12))
    npt.assert_allclose(ne.psi_high(r[-5:]), exact[-5:], rtol=1e-2)
    assert np.all(np.diff(ne.psi_high(r)) > 0) and np.all(np.diff(ne.psi_low(r)) > 0)


def test_norm_equivalence_bounds_states(rng):
    m = model_for("quartic_pd", n=20)
    ne = norm_equivalence(m)
    for _ in range(30):
        x = rng.standard_normal(m.size) * rng.uniform(0.01, 5)
        E, r = m.energy(x), m.norm(x)
        assert ne.psi_low(r) * (1 - 1e-9) <= E <= ne.psi_high(r) * (1 + 1e-9)


def test_gauges_formulae():
    ne = norm_equivalence(controller=controller_library("linear_pd"))
    ne.varsigma = 1.0
    # quadratic envelopes: sigma(r) = sqrt(2) r, gamma(r) = r / sqrt(varsigma)
    npt.assert_allclose(ne.sigma_low(3.0), np.sqrt(2) * 3.0, rtol=1e-10)
    npt.assert_allclose(ne.gamma_low(2.0), 2.0, rtol=1e-10)
    npt.assert_allclose(ne.gamma_bar(2.0), np.sqrt(4 * 0.26 * 4.0), rtol=1e-10)


def test_gamma_bar_image_quadruples():
    ne = norm_equivalence(controller=controller_library("quartic_pd"))
    ne.varsigma = 1.0
    for r in (0.1, 1.0, 3.0):
        npt.assert_allclose(ne.psi_low(ne.gamma_bar(2 * r)), 4 * ne.psi_low(ne.gamma_bar(r)),
                            rtol=1e-9)


# ---------------------------------------------------------------- contraction

def test_wave_speed_and_tau(string):
    assert wave_speeds(string) == (1.0, 1.0)
    assert default_tau(string) == 4.0


def test_contraction_from_exact_exponential():
    t = np.linspace(0, 10, 1001)
    bf, bs = contraction_from_energy(t, np.exp(-0.3 * t), 2.0)
    npt.assert_allclose([bf, bs], np.exp(-0.6), rtol=1e-9)


def test_contraction_floor_window():
    t = np.linspace(0, 10, 1001)
    E = np.maximum(np.exp(-5 * t), 1e-20)
    bf, _ = contraction_from_energy(t, E, 1.0)
    npt.assert_allclose(bf, np.exp(-5), rtol=1e-6)


def test_fit_contraction_linear():
    m = model_for(n=50)
    fit = fit_contraction(m, [x0_of(m, s) for s in range(3)] + [np.zeros(m.size)], 30.0, 0.02)
    assert fit.passed and fit.beta < 1 and fit.excluded == 1
    assert np.all(np.isfinite(fit.decay_times))
    beta, tau = fit
    assert tau == 4.0
    json.dumps(fit.to_dict())


def test_fit_contraction_undamped_flagged():
    m = discretize_closed_loop(vibrating_string(), None, 40, dissipation=0.0)
    z = m.zeta
    x = np.stack([np.sin(np.pi * z) ** 4, np.zeros_like(z)], axis=1).reshape(-1)
    fit = fit_contraction(m, [x], 12.0, 0.02)
    assert fit.beta > 0.99
    assert not np.isfinite(fit.decay_times[0])


def test_fit_contraction_bad_tau(linear):
    with pytest.raises(InputError):
        fit_contraction(linear, [x0_of(linear)], 3.0)


def test_beta_monotone_in_damping():
    betas = []
    for D in (1.0, 1.4, 2.0):
        m = model_for(n=40, D=D)
        betas.append(fit_contraction(m, [x0_of(m, 4)], 24.0, 0.02).beta)
    assert betas[0] >= betas[1] >= betas[2]


# ---------------------------------------------------------------- gain curve

def test_tail_settled():
    t = np.linspace(0, 10, 101)
    assert tail_settled(t, np.ones_like(t), 2.0)
    assert not tail_settled(t, np.exp(-t), 2.0)


def test_gain_curve_zero_amplitude(tmp_path):
    m = model_for(n=40)
    gc = gain_curve(m, [0.0, 0.5], {"kind": "truncated_step", "amplitude": 1.0, "duration": 2.0},
                    tail_window=5.0, T=60.0, dt=0.02, n_replicates=1)
    assert gc.tail_sup[0] < 1e-6
    assert gc.status == "pass"
    npt.assert_allclose(gc.d_norm, [0.0, np.sqrt(0.5)], rtol=1e-14)
    gc.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "d_norm,tail_sup,bound" and len(lines) == 3


def test_gain_curve_errors(linear):
    with pytest.raises(InputError):
        gain_curve(linear, [1.0], {"kind": "zero"}, tail_window=5.0, T=4.0)


# ---------------------------------------------------------------- convergence order

def test_self_convergence_order():
    s = vibrating_string()
    c = controller_library("linear_pd")
    res = self_convergence(s, c, lambda z: smooth_bump_state(s, c, z), {"kind": "zero"},
                           101, 0.01, 1.0)
    assert res.nodes == (101, 201, 401)
    assert res.order > 1.8


# ---------------------------------------------------------------- report

def test_assess_and_report(linear):
    trs = [simulate(linear, x0_of(linear, s), {"kind": "exp_decay", "amplitude": 0.3}, 30.0,
                    0.05, store_every=10**9) for s in range(2)]
    rep = assess_trajectories(trs, 1.0, 1e-3, names=["a", "b"])
    assert rep.verdicts == {"dissipation": "pass", "ugs": "pass", "convergence": "pass"}
    assert rep.passed
    d = json.loads(rep.to_json())
    assert d["trajectories"] == ["a", "b"] and len(d["convergence_times"]) == 2


def test_report_defaults():
    rep = StabilityReport()
    assert rep.passed and json.loads(rep.to_json())["gain_curve"] is None
