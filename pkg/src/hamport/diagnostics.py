"""Stability verdicts computed from trajectories and ensembles.

Everything here is post-processing: the functions read :class:`Trajectory`
objects (or run undisturbed/disturbed simulations through
:func:`~hamport.simulate.simulate`) and compare them with the energy bounds
of the closed loop:

* dissipation: ``E(t2) - E(t1) <= int d^T y``,
* uniform global stability: ``E(t) <= E(0) + ||d||^2 / (4 varsigma)``,
* contraction: ``E(tau) <= beta E(0)`` for undisturbed runs,
* asymptotic gain: ``limsup ||x(t)|| <= psi_low^{-1}(2 C ||d||^2)``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import ClosedLoopState, Controller
from .discretize import FiniteModel, discretize_closed_loop
from .errors import InputError
from .models import random_initial_state
from .signals import make_signal
from .simulate import Trajectory, simulate

ENERGY_FLOOR = 1e-14
GAIN_MARGIN = 0.01


# ---------------------------------------------------------------- trajectory checks

def dissipation_residual(traj: Trajectory) -> float:
    """Largest per-step violation ``[E(t_{n+1}) - E(t_n) - int d^T y]_+``.

    The supply integral is the midpoint value stored in ``traj.supply``.
    """
    if len(traj.t) < 2:
        return 0.0
    viol = np.diff(traj.E_total) - traj.supply[1:]
    return float(max(0.0, np.max(viol)))


def dissipation_tolerance(traj: Trajectory, rel: float = 1e-8, abs_: float = 1e-12) -> float:
    """Pass threshold ``rel * E(0) + abs_`` used with :func:`dissipation_residual`."""
    return rel * float(traj.E_total[0]) + abs_


@dataclass
class UGSCheck:
    """Margin of the energy bound ``E(0) + ||d||^2 / (4 varsigma) - E(t)``."""

    margin: float
    scale: float
    worst_time: float
    passed: bool


def ugs_check(traj: Trajectory, varsigma: float, rel_tol: float = 1e-8) -> UGSCheck:
    """Check ``E(t) <= E(0) + ||d||_{[0,t]}^2 / (4 varsigma)`` at every sample.

    ``scale`` is the largest right-hand side, so the tolerance is relative to
    the size of the bound.
    """
    if not varsigma > 0:
        raise InputError(f"varsigma must be positive, got {varsigma}")
    d2 = np.asarray(traj.d_norm2, float)
    if np.any(~np.isfinite(d2)):
        raise InputError("trajectory has no disturbance norm (signal norm unavailable)")
    bound = traj.E_total[0] + d2 / (4.0 * varsigma)
    slack = bound - traj.E_total
    i = int(np.argmin(slack))
    scale = float(max(np.max(np.abs(bound)), 1e-300))
    margin = float(slack[i])
    return UGSCheck(margin, scale, float(traj.t[i]), margin >= -rel_tol * scale)


def convergence_time(traj: Trajectory, eps: float):
    """First grid time after which ``||x(t)||_M < eps`` for the rest of the run.

    Returns ``None`` if the final sample is not below ``eps``.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    above = np.flatnonzero(traj.norm >= eps)
    if above.size == 0:
        return float(traj.t[0])
    last = int(above[-1])
    if last == len(traj.t) - 1:
        return None
    return float(traj.t[last + 1])


# ---------------------------------------------------------------- norm equivalence

def _loglog_interp(r, grid, vals):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    lr, lg, lv = np.log(r[pos]), np.log(grid), np.log(vals)
    res = np.interp(lr, lg, lv)
    lo = lr < lg[0]
    res[lo] = lv[0] + 2.0 * (lr[lo] - lg[0])
    if len(grid) > 1:
        slope = max((lv[-1] - lv[-2]) / (lg[-1] - lg[-2]), 1e-3)
        hi = lr > lg[-1]
        res[hi] = lv[-1] + slope * (lr[hi] - lg[-1])
    out[pos] = np.exp(res)
    return out if out.ndim else float(out)


@dataclass
class NormEquivalence:
    """Sampled envelopes ``psi_low(r) <= E(x) <= psi_high(r)`` for ``||x|| = r``.

    Between grid radii the envelopes are interpolated linearly in log-log
    coordinates; below the grid they are continued quadratically and above
    it with the last log-log slope. Both are strictly increasing with value
    0 at 0.
    """

    radii: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    c_low: float
    c_high: float
    varsigma: float = float("nan")

    def psi_low(self, r):
        return _loglog_interp(r, self.radii, self.lower)

    def psi_high(self, r):
        return _loglog_interp(r, self.radii, self.upper)

    def psi_low_inv(self, E):
        """Inverse of ``psi_low`` by bisection."""
        E = np.asarray(E, dtype=float)
        out = np.zeros_like(E)
        for idx, e in np.ndenumerate(E):
            if e <= 0:
                continue
            if not np.isfinite(e):
                out[idx] = np.inf
                continue
            hi = float(self.radii[-1])
            while float(self.psi_low(hi)) < e:
                hi *= 2.0
            lo = 0.0
            out[idx] = brentq(lambda r: float(self.psi_low(r)) - e, lo, hi,
                              xtol=1e-300, rtol=1e-15)
        return out if out.ndim else float(out)

    def sigma_low(self, r):
        """``psi_low^{-1}(2 psi_high(r))``, the initial-state gauge of the stability bound."""
        return self.psi_low_inv(2.0 * self.psi_high(r))

    def gamma_low(self, r, varsigma: float | None = None):
        """``psi_low^{-1}(r^2 / (2 varsigma))``, the disturbance gauge of the stability bound."""
        vs = self.varsigma if varsigma is None else varsigma
        return self.psi_low_inv(np.asarray(r, float) ** 2 / (2.0 * vs))

    def gamma_bar(self, r, C: float | None = None):
        """Asymptotic gain ``psi_low^{-1}(2 C r^2)``; ``C`` defaults to ``1/(4 varsigma) + 0.01``."""
        if C is None:
            C = 1.0 / (4.0 * self.varsigma) + GAIN_MARGIN
        return self.psi_low_inv(2.0 * C * np.asarray(r, float) ** 2)

    def iss_bound(self, t, x0_norm: float, d_norm: float, beta: float, tau: float,
                  C: float | None = None):
        """``psi_low^{-1}((2/beta) beta^(t/tau) psi_high(|x0|)) + gamma_bar(|d|)``."""
        t = np.asarray(t, dtype=float)
        decay = (2.0 / beta) * beta ** (t / tau) * float(self.psi_high(x0_norm))
        return self.psi_low_inv(decay) + self.gamma_bar(d_norm, C)

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "lower": self.lower.tolist(),
                "upper": self.upper.tolist(), "c_low": self.c_low, "c_high": self.c_high}


def _strict(vals, increasing_from_right: bool):
    vals = np.array(vals, dtype=float)
    if increasing_from_right:
        vals = np.minimum.accumulate(vals[::-1])[::-1]
    else:
        vals = np.maximum.accumulate(vals)
    # break ties so the envelope is strictly increasing
    for i in range(1, len(vals)):
        if vals[i] <= vals[i - 1]:
            if increasing_from_right:
                vals[i - 1] = vals[i] * (1 - 1e-12)
            else:
                vals[i] = vals[i - 1] * (1 + 1e-12)
    if increasing_from_right:
        for i in range(len(vals) - 1, 0, -1):
            if vals[i - 1] >= vals[i]:
                vals[i - 1] = vals[i] * (1 - 1e-12)
    return vals


def norm_equivalence(model: FiniteModel | None = None, controller: Controller | None = None,
                     n_samples: int = 200, radius_grid=None, seed: int = 0,
                     n_radial: int = 33) -> NormEquivalence:
    """Extremal closed-loop energy over states of prescribed norm.

    With ``||x~||^2 = ||x||_X^2 + |v1|^2 + v2^T K v2`` and
    ``E = ||x||_X^2 / 2 + P(v1) + v2^T K v2 / 2``, a state of norm ``r`` has
    ``E = r^2 / 2 + P(v1) - |v1|^2 / 2`` with ``|v1| <= r``. The extremes
    over the state space therefore reduce to extremes of
    ``g(v1) = P(v1) - |v1|^2 / 2`` over the ball of radius ``r``, which are
    sampled along ``n_samples`` random directions and ``n_radial`` radii
    (including the centre and the sphere).
    """
    if controller is None and model is not None:
        controller = model.controller
    if radius_grid is None:
        radius_grid = np.geomspace(1e-3, 1e2, 26)
    radii = np.sort(np.asarray(radius_grid, dtype=float))
    if radii.size == 0 or np.any(radii <= 0):
        raise InputError("radius_grid must contain positive radii")
    lo_raw, hi_raw = 0.5 * radii**2, 0.5 * radii**2
    varsigma = float("nan")
    if controller is not None:
        varsigma = controller.varsigma
        mc = controller.m_c
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_samples, mc))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.vstack([dirs, np.eye(mc), -np.eye(mc)])
        fracs = np.linspace(0.0, 1.0, n_radial)
        lo_raw, hi_raw = lo_raw.copy(), hi_raw.copy()
        for i, r in enumerate(radii):
            gmin, gmax = 0.0, 0.0  # centre: g(0) = P(0) = 0
            for s in fracs[1:]:
                for u in dirs:
                    v = r * s * u
                    g = float(controller.potential(v)) - 0.5 * float(v @ v)
                    gmin, gmax = min(gmin, g), max(gmax, g)
            lo_raw[i] += gmin
            hi_raw[i] += gmax
    if np.any(lo_raw <= 0):
        raise InputError("sampled energy vanishes on a sphere; the potential is not coercive")
    lower = _strict(lo_raw, increasing_from_right=True)
    upper = _strict(hi_raw, increasing_from_right=False)
    return NormEquivalence(radii, lower, upper, float(np.min(lower / radii**2)),
                           float(np.max(upper / radii**2)), varsigma)


# ---------------------------------------------------------------- contraction

def wave_speeds(system, n_samples: int = 201):
    """Smallest and largest nonzero characteristic speed ``|eig(P1 H)|`` over the interval."""
    if system.N != 1:
        raise InputError("wave speeds are defined for first-order systems")
    zeta = np.linspace(system.a, system.b, n_samples)
    Hs = system.H(zeta)
    sp = np.concatenate([np.abs(np.linalg.eigvals(system.P[1] @ H)) for H in Hs])
    sp = sp[sp > 1e-12 * max(sp.max(), 1e-300)]
    return float(sp.min()), float(sp.max())


def default_tau(system) -> float:
    """Two round trips of the slowest wave: ``4 (b - a) / c_min``."""
    c_min, _ = wave_speeds(system)
    return 4.0 * (system.b - system.a) / c_min


@dataclass
class ContractionFit:
    """Contraction factor ``beta`` over time ``tau`` fitted from undisturbed runs.

    ``beta_fit[i]`` comes from the log-energy slope over the tail of run
    ``i`` and ``beta_step[i]`` is the worst observed ratio
    ``E(t + tau) / E(t)``. The reported ``beta`` is the maximum of both over
    all runs, so the bound ``E(t) <= beta^(t/tau - 1) E(0)`` holds on every
    sampled trajectory.
    """

    beta: float
    tau: float
    beta_fit: np.ndarray
    beta_step: np.ndarray
    decay_times: np.ndarray
    horizon: float
    excluded: int = 0

    def __iter__(self):
        yield self.beta
        yield self.tau

    @property
    def betas(self) -> np.ndarray:
        return np.maximum(self.beta_fit, self.beta_step)

    @property
    def passed(self) -> bool:
        return bool(self.betas.size > 0 and np.all(self.betas < 1.0))

    def to_dict(self) -> dict:
        return {"beta": self.beta, "tau": self.tau, "beta_fit": self.beta_fit.tolist(),
                "beta_step": self.beta_step.tolist(),
                "decay_times": [None if not np.isfinite(v) else float(v)
                                for v in self.decay_times],
                "horizon": self.horizon, "excluded": self.excluded, "passed": self.passed}


def contraction_from_energy(t, E, tau: float, floor: float = ENERGY_FLOOR):
    """``(beta_fit, beta_step)`` for one undisturbed energy history."""
    t, E = np.asarray(t, float), np.asarray(E, float)
    E0 = E[0]
    valid = E > floor * E0
    # only the window before the energy first hits the floor
    stop = int(np.argmin(valid)) if not np.all(valid) else len(E)
    t, E = t[:stop], E[:stop]
    dt = t[1] - t[0] if len(t) > 1 else tau
    j = int(round(tau / dt))
    beta_step = float(np.max(E[j:] / E[:-j])) if 0 < j < len(E) else float("nan")
    half = len(E) // 2
    if len(E) - half >= 3:
        slope = float(np.polyfit(t[half:], np.log(E[half:]), 1)[0])
        beta_fit = math.exp(slope * tau)
    else:
        beta_fit = float("nan")
    if not np.isfinite(beta_step):
        beta_step = beta_fit
    if not np.isfinite(beta_fit):
        beta_fit = beta_step
    return beta_fit, beta_step


def fit_contraction(model: FiniteModel, x0_set, horizon: float, dt: float = 0.01,
                    tau: float | None = None, decay_level: float = 1e-6,
                    **sim_kw) -> ContractionFit:
    """Fit ``(beta, tau)`` from undisturbed runs started at each state of ``x0_set``.

    Zero initial states are excluded. ``decay_times[i]`` is the first time
    the energy of run ``i`` drops below ``decay_level * E(0)`` (``inf`` if it
    never does within the horizon).
    """
    if tau is None:
        tau = default_tau(model.system)
    if not 0 < tau < horizon:
        raise InputError(f"need 0 < tau < horizon, got tau={tau}, horizon={horizon}")
    zero = {"kind": "zero", "k": model.k}
    fits, steps, times = [], [], []
    excluded = 0
    for x0 in x0_set:
        x0 = model.from_state(x0) if isinstance(x0, ClosedLoopState) else np.asarray(x0, float)
        if model.energy(x0) <= 0.0:
            excluded += 1
            continue
        tr = simulate(model, x0, zero, horizon, dt, store_every=10**9, **sim_kw)
        bf, bs = contraction_from_energy(tr.t, tr.E_total, tau)
        fits.append(bf)
        steps.append(bs)
        below = np.flatnonzero(tr.E_total < decay_level * tr.E_total[0])
        times.append(float(tr.t[below[0]]) if below.size else float("inf"))
    fits, steps = np.array(fits), np.array(steps)
    beta = float(np.max(np.maximum(fits, steps))) if fits.size else float("nan")
    return ContractionFit(beta, float(tau), fits, steps, np.array(times), float(horizon),
                          excluded)


# ---------------------------------------------------------------- asymptotic gain

@dataclass
class GainCurve:
    """Tail-sup norms against disturbance size, with the asymptotic-gain bound."""

    amplitudes: np.ndarray
    d_norm: np.ndarray
    tail_sup: np.ndarray
    bound: np.ndarray
    settled: np.ndarray
    tail_window: float
    C: float
    eps_num: float

    @property
    def status(self) -> str:
        """``fail`` when a settled tail exceeds the bound, ``indeterminate`` when only
        unsettled tails do."""
        above = self.tail_sup > self.bound
        if np.any(above & self.settled):
            return "fail"
        return "indeterminate" if np.any(above) else "pass"

    def to_dict(self) -> dict:
        return {"amplitudes": self.amplitudes.tolist(), "d_norm": self.d_norm.tolist(),
                "tail_sup": self.tail_sup.tolist(), "bound": self.bound.tolist(),
                "settled": [bool(s) for s in self.settled], "tail_window": self.tail_window,
                "C": self.C, "eps_num": self.eps_num, "status": self.status}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d_norm", "tail_sup", "bound"])
            for row in zip(self.d_norm, self.tail_sup, self.bound):
                w.writerow([format(float(v), ".17g") for v in row])


def _signal_for(family, amplitude, k):
    if callable(family):
        return make_signal(family(amplitude))
    spec = dict(family)
    base = np.atleast_1d(np.asarray(spec.get("amplitude", 1.0), float))
    spec["amplitude"] = (amplitude * base).tolist() if base.size > 1 else amplitude * float(base[0])
    spec.setdefault("k", k)
    return make_signal(spec)


def tail_settled(t, E, tail_window: float, threshold: float = 0.1) -> bool:
    """Settling test: the energy is roughly stationary over the trailing window.

    The least-squares slope of ``E`` over the window, times the window
    length and divided by the largest energy in it, must stay below
    ``threshold`` in absolute value.
    """
    t, E = np.asarray(t, float), np.asarray(E, float)
    sel = t >= t[-1] - tail_window
    Et = E[sel]
    top = float(np.max(Et))
    if top <= 1e-30 or np.count_nonzero(sel) < 3:
        return True
    slope = float(np.polyfit(t[sel], Et, 1)[0])
    return abs(slope) * tail_window / top <= threshold


def gain_curve(model: FiniteModel, amplitudes, signal_family, tail_window: float, seed: int = 0,
               T: float | None = None, dt: float = 0.01, n_replicates: int = 2,
               replicate_amplitude: float = 1.0, norm_equiv: NormEquivalence | None = None,
               C: float | None = None, eps_num: float = 1e-6,
               settle_threshold: float = 0.1) -> GainCurve:
    """Tail-sup of ``||x~(t)||_M`` per disturbance amplitude, compared with ``gamma_bar``.

    For each amplitude the disturbance is ``signal_family`` scaled by it
    (a spec dict whose ``amplitude`` entry is multiplied, or a callable
    ``amplitude -> signal``). Runs start from zero and from
    ``n_replicates`` seeded random states; the tail sup is the largest norm
    over the last ``tail_window`` of all runs. The bound is
    ``psi_low^{-1}(2 C ||d||_2^2) + eps_num`` with ``C = 1/(4 varsigma) + 0.01``.
    """
    if model.controller is None:
        raise InputError("gain curves need a controller")
    varsigma = model.controller.varsigma
    if C is None:
        C = 1.0 / (4.0 * varsigma) + GAIN_MARGIN
    if T is None:
        c_min, _ = wave_speeds(model.system)
        T = 50.0 * (model.system.b - model.system.a) / c_min
    if not 0 < tail_window < T:
        raise InputError("need 0 < tail_window < T")
    if norm_equiv is None:
        norm_equiv = norm_equivalence(model, seed=seed)
    rng = np.random.default_rng(seed)
    starts = [np.zeros(model.size)]
    for _ in range(n_replicates):
        st = random_initial_state(model.system, model.controller, model.zeta, rng,
                                  amplitude=replicate_amplitude)
        starts.append(model.from_state(st))
    amps = np.asarray(amplitudes, dtype=float)
    dn, tails, bounds, settled = [], [], [], []
    for a in amps:
        sig = _signal_for(signal_family, a, model.k)
        d_norm = float(sig.norm())
        tail, ok = 0.0, True
        for x0 in starts:
            tr = simulate(model, x0, sig, T, dt, store_every=10**9)
            sel = tr.t >= tr.t[-1] - tail_window
            tail = max(tail, float(np.max(tr.norm[sel])))
            ok = ok and tail_settled(tr.t, tr.E_total, tail_window, settle_threshold)
        dn.append(d_norm)
        tails.append(tail)
        bounds.append(float(norm_equiv.gamma_bar(d_norm, C)) + eps_num)
        settled.append(ok)
    return GainCurve(amps, np.array(dn), np.array(tails), np.array(bounds), np.array(settled),
                     float(tail_window), float(C), float(eps_num))


# ---------------------------------------------------------------- convergence order

@dataclass
class SelfConvergence:
    """Differences between successive refinements and the observed order."""

    nodes: tuple
    dts: tuple
    errors: np.ndarray

    @property
    def order(self) -> float:
        return float(np.log2(self.errors[0] / self.errors[1]))


def self_convergence(system, controller, initial, signal, n: int, dt: float, T: float,
                     levels: int = 3, **sim_kw) -> SelfConvergence:
    """Observed order from runs at ``(n, dt)``, ``(2n - 1, dt/2)``, ``(4n - 3, dt/4)``.

    Node counts are chosen so each grid contains the coarser ones. The
    error between levels ``l`` and ``l + 1`` is the sup over the coarse
    time grid of the coarse-grid ``M``-norm of the difference, after
    restricting the fine solution to the coarse nodes.

    ``initial`` maps a node array ``zeta`` to a :class:`ClosedLoopState`.
    """
    if levels < 3:
        raise InputError("self-convergence needs at least three levels")
    nodes = [(n - 1) * 2**l + 1 for l in range(levels)]
    dts = [dt / 2**l for l in range(levels)]
    coarse = discretize_closed_loop(system, controller, nodes[0])
    every0 = 1
    sols = []
    for l, (nl, dl) in enumerate(zip(nodes, dts)):
        mdl = coarse if l == 0 else discretize_closed_loop(system, controller, nl)
        x0 = mdl.from_state(initial(mdl.zeta))
        tr = simulate(mdl, x0, signal, T, dl, store_every=every0 * 2**l, **sim_kw)
        sols.append((mdl, tr.states))
    errs = []
    for l in range(levels - 1):
        (m1, s1), (m2, s2) = sols[l], sols[l + 1]
        r1 = 2**l
        k = min(len(s1), len(s2))
        worst = 0.0
        for a, b in zip(s1[:k], s2[:k]):
            diff = _restrict(m1, a, r1) - _restrict(m2, b, 2 * r1)
            worst = max(worst, coarse.norm(diff))
        errs.append(worst)
    return SelfConvergence(tuple(nodes), tuple(dts), np.array(errs))


def _restrict(model, xt, stride):
    x, v1, v2 = model.split(xt)
    return np.concatenate([x[::stride].reshape(-1), v1, v2])


# ---------------------------------------------------------------- report

@dataclass
class StabilityReport:
    """Collected stability verdicts with references to the trajectories behind them."""

    dissipation_max_residual: float | None = None
    dissipation_tolerance: float | None = None
    ugs_margin: float | None = None
    ugs_scale: float | None = None
    contraction: ContractionFit | None = None
    gain: GainCurve | None = None
    convergence_times: list = field(default_factory=list)
    epsilon: float | None = None
    varsigma: float | None = None
    verdicts: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {"dissipation_max_residual": self.dissipation_max_residual,
                "dissipation_tolerance": self.dissipation_tolerance,
                "ugs_margin": self.ugs_margin, "ugs_scale": self.ugs_scale,
                "contraction": None if self.contraction is None else self.contraction.to_dict(),
                "gain_curve": None if self.gain is None else self.gain.to_dict(),
                "convergence_times": self.convergence_times, "epsilon": self.epsilon,
                "varsigma": self.varsigma, "verdicts": dict(self.verdicts),
                "trajectories": list(self.trajectories)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def assess_trajectories(trajs, varsigma: float, eps_rel: float = 1e-3, names=None,
                        report: StabilityReport | None = None) -> StabilityReport:
    """Dissipation, UGS and convergence verdicts for a list of trajectories.

    The convergence threshold is ``eps_rel`` times each run's initial norm.
    """
    rep = report if report is not None else StabilityReport()
    rep.varsigma = float(varsigma)
    rep.epsilon = float(eps_rel)
    worst_diss, worst_tol_ratio, tol_at = 0.0, -np.inf, 0.0
    margins, scales, ugs_ok = [], [], True
    times = []
    for tr in trajs:
        r = dissipation_residual(tr)
        tol = dissipation_tolerance(tr)
        if r / tol > worst_tol_ratio:
            worst_tol_ratio, worst_diss, tol_at = r / tol, r, tol
        if varsigma > 0 and np.all(np.isfinite(tr.d_norm2)):
            u = ugs_check(tr, varsigma)
            margins.append(u.margin / u.scale)
            scales.append(u.scale)
            ugs_ok = ugs_ok and u.passed
        x0n = float(tr.norm[0])
        times.append(convergence_time(tr, eps_rel * x0n) if x0n > 0 else float(tr.t[0]))
    rep.dissipation_max_residual = float(worst_diss)
    rep.dissipation_tolerance = float(tol_at)
    rep.verdicts["dissipation"] = "pass" if worst_tol_ratio <= 1.0 else "fail"
    if margins:
        i = int(np.argmin(margins))
        rep.ugs_margin = float(margins[i] * scales[i])
        rep.ugs_scale = float(scales[i])
        rep.verdicts["ugs"] = "pass" if ugs_ok else "fail"
    rep.convergence_times = times
    rep.verdicts["convergence"] = "pass" if all(t is not None for t in times) else "fail"
    if names is not None:
        rep.trajectories = list(names)
    return rep
