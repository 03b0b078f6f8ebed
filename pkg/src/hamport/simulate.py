"""Implicit-midpoint time integration of the semidiscrete closed loop.

One step solves for the midpoint ``y = (x_k + x_{k+1}) / 2`` of

    x_{k+1} - x_k = dt [A_d y + F_bar(x_k, x_{k+1}) + G_d d_bar]

where ``d_bar`` is the exact average of ``d`` over the step and ``F_bar``
uses the discrete gradient of the potential. The discrete energy then obeys

    E(x_{k+1}) - E(x_k) = dt [d_bar^T y* - y*^T S_c y* - (K v2)^T R(K v2) + q_h]

up to the Newton tolerance, with every term evaluated at the midpoint. Since
``dt |d_bar|^2 <= int |d|^2`` over the step, the energy bound with the
coefficient ``1 / (4 varsigma)`` holds at every grid time.

Newton iterations factor ``I - dt/2 A_d`` once per step size and handle the
controller nonlinearity, which only touches the ``v2`` rows, by a low-rank
(Woodbury) correction.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ClosedLoopState
from .discretize import FiniteModel
from .errors import AlignmentError, InputError, StepFailure
from .signals import DisturbanceSignal, make_signal

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_ITER = 25
MAX_HALVINGS = 10
DG_THRESHOLD = 1e-4


def _discrete_gradient(controller, a, b):
    """Gonzalez discrete gradient of the potential between ``a`` and ``b``."""
    mid = 0.5 * (a + b)
    g = controller.grad(mid)
    diff = b - a
    nrm2 = float(diff @ diff)
    # the correction is O(|diff|^2) and dominated by roundoff for tiny steps
    if nrm2 <= (DG_THRESHOLD * max(1.0, float(np.linalg.norm(mid)))) ** 2:
        return g
    corr = float(controller.potential(b)) - float(controller.potential(a)) - float(g @ diff)
    return g + (corr / nrm2) * diff


@dataclass
class StepInfo:
    """Per-step bookkeeping returned by :func:`step_implicit_midpoint`."""

    iterations: int = 0
    supply: float = 0.0
    dissipation: float = 0.0
    remainder: float = 0.0
    energy_change: float = 0.0
    balance_residual: float = 0.0
    substeps: int = 1
    d_bar: np.ndarray | None = None
    y_mid: np.ndarray | None = None


def _midpoint_solve(model: FiniteModel, xk, t0, t1, signal, tol, max_iter, sampling):
    dt = t1 - t0
    if sampling == "average":
        dbar = signal.average(t0, t1)
    elif sampling == "midpoint":
        dbar = np.atleast_1d(signal.value(t0 + 0.5 * dt))
    else:
        raise InputError(f"unknown disturbance sampling {sampling!r}")
    lu, Z = model.midpoint_factor(dt)
    nx, mc = model.nx, model.m_c
    c = model.controller
    forcing = xk + 0.5 * dt * (model.G_d @ dbar)

    def fbar(y):
        out = np.zeros(model.size)
        if c is None:
            return out
        v1k, v1m, v2m = xk[nx:nx + mc], y[nx:nx + mc], y[nx + mc:]
        v1n = 2.0 * v1m - v1k
        out[nx + mc:] = v1m - _discrete_gradient(c, v1k, v1n) - c.damp(c.K @ v2m)
        return out

    scale = max(1.0, float(np.max(np.abs(xk))), float(np.max(np.abs(dbar), initial=0.0)))
    # predictor: nonlinearity frozen at x_k
    y = lu.solve(forcing + 0.5 * dt * model.nonlinear(xk))
    if c is None:
        return y, dbar, 1
    Sz = Z[nx:, :]  # (2 m_c, m_c) rows of Z for (v1, v2)
    for it in range(1, max_iter + 1):
        res = y - 0.5 * dt * (model.A_d @ y) - forcing - 0.5 * dt * fbar(y)
        if not np.all(np.isfinite(res)):
            raise StepFailure(f"non-finite residual at t={t0}")
        if float(np.max(np.abs(res))) <= tol * scale:
            return y, dbar, it
        Js = model.nonlinear_jacobian_block(y[nx:nx + mc], y[nx + mc:])
        d0 = lu.solve(-res)
        small = np.eye(mc) - 0.5 * dt * Js @ Sz
        cvec = np.linalg.solve(small, 0.5 * dt * Js @ d0[nx:])
        y = y + d0 + Z @ cvec
    res = y - 0.5 * dt * (model.A_d @ y) - forcing - 0.5 * dt * fbar(y)
    if float(np.max(np.abs(res))) <= tol * scale:
        return y, dbar, max_iter
    raise StepFailure(f"Newton did not converge at t={t0} (residual {np.max(np.abs(res)):.3e})")


def _step_terms(model, y, dbar):
    """Supply, dissipation and remainder rates at the midpoint."""
    ys = model.Cy @ y + model.Dy @ dbar
    supply = float(dbar @ ys)
    diss = 0.0
    if model.controller is not None:
        c = model.controller
        Kv2 = c.K @ y[model.nx + model.m_c:]
        diss = float(ys @ c.S_c @ ys) + float(Kv2 @ c.damp(Kv2))
    zs, delta = model.corrected_trace(y, dbar)
    sysm = model.system
    rem = -float(delta @ model.Sigma @ delta) - (float((sysm.W_B2 @ zs) @ ys)
                                                  - float(zs @ model.Sigma @ zs))
    rem -= model.artificial_dissipation(y)
    P0s = sysm.P[0] + sysm.P[0].T
    if np.any(P0s):
        e = np.einsum("nij,nj->ni", model.Hn, y[:model.nx].reshape(model.n, model.m))
        rem += 0.5 * float(np.sum(model.weights * np.einsum("ni,ij,nj->n", e, P0s, e)))
    return supply, diss, rem, ys


def step_implicit_midpoint(model: FiniteModel, state, t: float, dt: float, signal,
                           newton_tol: float = NEWTON_TOL, max_iter: int = MAX_ITER,
                           max_halvings: int = 0, sampling: str = "average",
                           info: StepInfo | None = None) -> np.ndarray:
    """Advance ``state`` from ``t`` to ``t + dt``.

    Parameters
    ----------
    model
        Assembled closed loop.
    state
        State vector or :class:`~hamport.core.ClosedLoopState`.
    signal
        Disturbance (signal object or spec dict).
    max_halvings
        On Newton failure the step is redone as two half steps, recursively
        up to this depth.
    sampling
        ``"average"`` (exact cell average, default) or ``"midpoint"``.
    info
        Optional :class:`StepInfo` filled with the energy bookkeeping.

    Raises
    ------
    StepFailure
        If Newton fails after all halvings.
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    signal = make_signal(signal)
    xk = model.from_state(state) if isinstance(state, ClosedLoopState) \
        else np.asarray(state, dtype=float)
    return _advance(model, xk, t, t + dt, signal, newton_tol, max_iter, max_halvings, sampling,
                    info if info is not None else StepInfo())


def _advance(model, xk, t0, t1, signal, tol, max_iter, halvings, sampling, info):
    try:
        y, dbar, iters = _midpoint_solve(model, xk, t0, t1, signal, tol, max_iter, sampling)
    except StepFailure:
        if halvings <= 0:
            raise
        log.info("halving step at t=%g (dt=%g)", t0, t1 - t0)
        tm = 0.5 * (t0 + t1)
        first, second = StepInfo(), StepInfo()
        xm = _advance(model, xk, t0, tm, signal, tol, max_iter, halvings - 1, sampling, first)
        xn = _advance(model, xm, tm, t1, signal, tol, max_iter, halvings - 1, sampling, second)
        for key in ("iterations", "supply", "dissipation", "remainder", "energy_change",
                    "balance_residual", "substeps"):
            setattr(info, key, getattr(first, key) + getattr(second, key))
        info.d_bar, info.y_mid = second.d_bar, second.y_mid
        return xn
    xn = 2.0 * y - xk
    dt = t1 - t0
    supply, diss, rem, ys = _step_terms(model, y, dbar)
    dE = model.energy(xn) - model.energy(xk)
    info.iterations = iters
    info.supply = dt * supply
    info.dissipation = dt * diss
    info.remainder = dt * rem
    info.energy_change = dE
    info.balance_residual = dE - dt * (supply - diss + rem)
    info.substeps = 1
    info.d_bar = dbar
    info.y_mid = ys
    return xn


@dataclass
class Trajectory:
    """Time series produced by :func:`simulate`.

    Arrays indexed by grid time have ``len(t)`` entries; per-step quantities
    (supply, balance residuals, iterations) are stored with a leading zero so
    that entry ``i`` refers to the step ending at ``t[i]``. Full states are
    kept every ``store_every`` steps in ``states`` at ``state_index``.
    """

    t: np.ndarray
    E_total: np.ndarray
    E_plant: np.ndarray
    E_ctrl: np.ndarray
    norm: np.ndarray
    y: np.ndarray
    d: np.ndarray
    supply: np.ndarray
    balance_residual: np.ndarray
    d_norm2: np.ndarray
    iterations: np.ndarray
    states: np.ndarray
    state_index: np.ndarray
    status: str = "ok"
    message: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("E_total", "E_plant", "E_ctrl", "norm", "y", "d", "supply",
                     "balance_residual", "d_norm2", "iterations"):
            if len(getattr(self, name)) != n:
                raise InputError(f"trajectory array {name} has the wrong length")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise InputError("trajectory time grid must be strictly increasing")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def cumulative_supply(self) -> np.ndarray:
        return np.cumsum(self.supply)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, i: int) -> np.ndarray:
        """Stored state at grid index ``i``."""
        hit = np.flatnonzero(self.state_index == i)
        if hit.size == 0:
            raise AlignmentError(f"state at index {i} was not stored")
        return self.states[hit[0]]

    def to_csv(self, path) -> None:
        """Write ``t, E_total, E_plant, E_ctrl, norm_state, y_*, d_*, balance_residual``."""
        k = self.y.shape[1]
        header = (["t", "E_total", "E_plant", "E_ctrl", "norm_state"]
                  + [f"y_{i + 1}" for i in range(k)] + [f"d_{i + 1}" for i in range(k)]
                  + ["balance_residual"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(len(self.t)):
                row = [self.t[i], self.E_total[i], self.E_plant[i], self.E_ctrl[i], self.norm[i],
                       *self.y[i], *self.d[i], self.balance_residual[i]]
                w.writerow([format(float(v), ".17g") for v in row])

    def to_bookkeeping_csv(self, path) -> None:
        """Write the per-step energy bookkeeping ``t, supply, d_norm2, iterations``.

        Together with :meth:`to_csv` this is enough for
        :func:`load_trajectory` to rebuild every diagnostic exactly.
        """
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "supply", "d_norm2", "iterations"])
            for i in range(len(self.t)):
                w.writerow([format(float(self.t[i]), ".17g"), format(float(self.supply[i]), ".17g"),
                            format(float(self.d_norm2[i]), ".17g"), str(int(self.iterations[i]))])

    def summary(self) -> dict:
        """Final norm, largest balance residual, disturbance norm and a log-energy decay fit."""
        E = self.E_total
        pos = E > 1e-14 * max(E[0], 1e-300)
        slope = None
        if np.count_nonzero(pos) >= 3 and E[0] > 0:
            tt = self.t[pos]
            slope = float(np.polyfit(tt, np.log(E[pos]), 1)[0])
        return {"final_norm": float(self.norm[-1]), "initial_energy": float(E[0]),
                "final_energy": float(E[-1]),
                "max_balance_residual": float(np.max(np.abs(self.balance_residual))),
                "d_norm": float(np.sqrt(self.d_norm2[-1])), "energy_decay_rate": slope,
                "status": self.status, "steps": int(len(self.t) - 1)}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def load_trajectory(path, bookkeeping_path=None) -> Trajectory:
    """Read a trajectory written by :meth:`Trajectory.to_csv`.

    If ``bookkeeping_path`` is given (see :meth:`Trajectory.to_bookkeeping_csv`)
    supply, disturbance norm and iteration counts are restored too, otherwise
    they are NaN/zero. States are not stored in the CSV.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
    k = sum(1 for h in header if h.startswith("y_"))
    if header[:5] != ["t", "E_total", "E_plant", "E_ctrl", "norm_state"] or \
            header[-1] != "balance_residual" or len(header) != 6 + 2 * k:
        raise InputError(f"{path} is not a trajectory CSV")
    n = len(data)
    supply, d2 = np.full(n, np.nan), np.full(n, np.nan)
    iters = np.zeros(n, dtype=int)
    if bookkeeping_path is not None:
        with open(bookkeeping_path, newline="") as fh:
            extra = list(csv.reader(fh))[1:]
        if len(extra) != n:
            raise InputError("bookkeeping file does not match the trajectory")
        supply = np.array([float(r[1]) for r in extra])
        d2 = np.array([float(r[2]) for r in extra])
        iters = np.array([int(r[3]) for r in extra])
    return Trajectory(data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4],
                      data[:, 5:5 + k], data[:, 5 + k:5 + 2 * k], supply, data[:, -1], d2, iters,
                      np.zeros((0, 0)), np.zeros(0, dtype=int), meta={"source": str(path)})


def simulate(model: FiniteModel, x0, signal, T: float, dt: float,
             newton_tol: float = NEWTON_TOL, max_iter: int = MAX_ITER,
             max_halvings: int = MAX_HALVINGS, store_every: int = 1,
             sampling: str = "average") -> Trajectory:
    """Integrate the closed loop on the uniform grid ``t_i = i dt`` up to ``T``.

    ``T`` is rounded up to a whole number of steps. On a step failure the
    partial trajectory is returned with ``status = "step_failure"``.
    """
    if not T > 0 or not dt > 0 or dt > T * (1 + 1e-12):
        raise InputError("need T > 0 and 0 < dt <= T")
    signal = make_signal(signal)
    if signal.k != model.k:
        raise InputError(f"signal has {signal.k} components, model expects {model.k}")
    x = model.from_state(x0) if isinstance(x0, ClosedLoopState) else np.array(x0, dtype=float)
    if x.shape != (model.size,):
        raise InputError(f"initial state has shape {x.shape}, expected ({model.size},)")
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    k = model.k
    t = np.arange(steps + 1) * dt
    Et, Ep, Ec, nrm = (np.zeros(steps + 1) for _ in range(4))
    Y, Dv = np.zeros((steps + 1, k)), np.zeros((steps + 1, k))
    supply, resid, d2 = np.zeros(steps + 1), np.zeros(steps + 1), np.zeros(steps + 1)
    iters = np.zeros(steps + 1, dtype=int)
    stored, stored_idx = [], []

    def record(i, xs):
        Ep[i], Ec[i] = model.energy_parts(xs)
        Et[i] = Ep[i] + Ec[i]
        nrm[i] = model.norm(xs)
        Dv[i] = signal.value(t[i])
        Y[i] = model.output(xs, Dv[i])
        try:
            d2[i] = signal.norm2(t[i])
        except NotImplementedError:
            d2[i] = np.nan
        if i % store_every == 0 or i == steps:
            stored.append(xs.copy())
            stored_idx.append(i)

    record(0, x)
    status, message = "ok", ""
    last = steps
    info = StepInfo()
    for i in range(steps):
        try:
            x = _advance(model, x, t[i], t[i + 1], signal, newton_tol, max_iter, max_halvings,
                         sampling, info)
        except StepFailure as exc:
            status, message, last = "step_failure", str(exc), i
            log.warning("simulation stopped: %s", exc)
            break
        supply[i + 1] = info.supply
        resid[i + 1] = info.balance_residual
        iters[i + 1] = info.iterations
        record(i + 1, x)
    if status != "ok":
        sl = slice(0, last + 1)
        t, Et, Ep, Ec, nrm, Y, Dv = t[sl], Et[sl], Ep[sl], Ec[sl], nrm[sl], Y[sl], Dv[sl]
        supply, resid, d2, iters = supply[sl], resid[sl], d2[sl], iters[sl]
        if not stored_idx or stored_idx[-1] != last:
            stored.append(x.copy())
            stored_idx.append(last)
    meta = {"dt": dt, "T": T, "n": model.n, "scheme": model.scheme, "sampling": sampling,
            "newton_tol": newton_tol}
    return Trajectory(t, Et, Ep, Ec, nrm, Y, Dv, supply, resid, d2, iters, np.array(stored),
                      np.array(stored_idx), status, message, meta)


# ---------------------------------------------------------------- solution-map contracts

def _steps_of(s, dt):
    q = s / dt
    j = int(round(q))
    if abs(q - j) > 1e-9 * max(1.0, abs(q)):
        raise AlignmentError(f"time {s} is not a multiple of dt={dt}")
    return j


def cocycle_check(model: FiniteModel, x0, signal, s: float, t: float, dt: float, **kw) -> float:
    """``|| x(t+s; x0, d) - x(t; x(s; x0, d), d(s + .)) ||_M``."""
    signal = make_signal(signal)
    js, jt = _steps_of(s, dt), _steps_of(t, dt)
    x0v = model.from_state(x0) if isinstance(x0, ClosedLoopState) else np.asarray(x0, float)
    if jt == 0:
        return 0.0
    full = simulate(model, x0v, signal, (js + jt) * dt, dt, store_every=js + jt, **kw)
    if js == 0:
        xs = x0v
    else:
        xs = simulate(model, x0v, signal, js * dt, dt, store_every=js, **kw).final_state
    second = simulate(model, xs, signal.shift(js * dt), jt * dt, dt, store_every=jt, **kw)
    return model.norm(full.final_state - second.final_state)


def causality_check(model: FiniteModel, x0, signal, t_cut: float, T: float, dt: float,
                    **kw) -> float:
    """Largest deviation on ``[0, t_cut]`` caused by truncating ``d`` after ``t_cut``.

    States are compared up to and including ``t_cut``; outputs only before
    it, since ``y(t_cut)`` carries the feedthrough of ``d(t_cut)`` itself.
    Returns 0.0 exactly when the two trajectories agree bit for bit.
    """
    signal = make_signal(signal)
    j = _steps_of(t_cut, dt)
    a = simulate(model, x0, signal, T, dt, **kw)
    b = simulate(model, x0, signal.truncate(t_cut), T, dt, **kw)
    ia = a.state_index <= j
    diff = a.states[ia] - b.states[b.state_index <= j]
    y_diff = a.y[:j] - b.y[:j]
    return float(max(np.max(np.abs(diff)), np.max(np.abs(y_diff), initial=0.0)))


@dataclass
class ContinuityResult:
    """Distance-to-perturbation ratios for shrinking perturbations."""

    scales: np.ndarray
    distances: np.ndarray
    perturbations: np.ndarray
    ratios: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.ratios.max() / max(self.ratios.min(), 1e-300))


def continuity_ratio(model: FiniteModel, x0, signal, tau: float, dt: float, seed: int = 0,
                     scales=(1e-2, 1e-3), **kw) -> ContinuityResult:
    """Sup-norm trajectory distance over ``[0, tau]`` relative to the data perturbation.

    The initial state is perturbed along a random direction and the
    disturbance by tabulated noise, both scaled by each entry of ``scales``.
    A bounded ratio as the scale shrinks reflects continuity of the solution
    map with a finite local Lipschitz constant.
    """
    from .signals import Scaled, Sum, windowed_noise
    signal = make_signal(signal)
    rng = np.random.default_rng(seed)
    x0v = model.from_state(x0) if isinstance(x0, ClosedLoopState) else np.asarray(x0, float)
    dx = rng.standard_normal(model.size)
    dx /= model.norm(dx)
    noise = windowed_noise(1.0, _steps_of(tau, dt) * dt, int(rng.integers(2**31)), dt, model.k)
    noise = Scaled(noise, 1.0 / max(noise.norm(), 1e-300))
    base = simulate(model, x0v, signal, tau, dt, **kw)
    dists, perts = [], []
    for s in scales:
        pert = simulate(model, x0v + s * dx, Sum(signal, Scaled(noise, s)), tau, dt, **kw)
        dist = max(model.norm(a - b) for a, b in zip(base.states, pert.states))
        dists.append(dist)
        perts.append(2.0 * s)
    dists, perts = np.array(dists), np.array(perts)
    return ContinuityResult(np.asarray(scales, float), dists, perts, dists / perts)
