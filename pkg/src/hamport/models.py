"""Example plants, a controller library and named scenario presets.

Coefficients may be given as numbers, sympy expressions in :data:`ZETA`, or
plain callables. Numbers and sympy expressions keep a symbolic energy density
so that :func:`pde_residual_check` can work exactly; callables only support
the sampled mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .core import ClosedLoopState, Controller, EnergyDensity, PortHamiltonianSystem, fd_weights
from .errors import InputError, ModelError

ZETA = sp.Symbol("zeta", real=True)
TIME = sp.Symbol("t", real=True)

N_SAMPLE = 1001


def _coefficient(value, name, a, b):
    """Return ``(numeric callable, sympy expr or None)`` and validate positivity."""
    if callable(value) and not isinstance(value, sp.Basic):
        expr = None
        func = value
    else:
        expr = sp.sympify(value)
        free = expr.free_symbols - {ZETA}
        if free:
            raise ModelError(f"coefficient {name} depends on unknown symbols {free}")
        lam = sp.lambdify(ZETA, expr, "numpy")
        func = lambda z, _f=lam: np.broadcast_to(np.asarray(_f(z), dtype=float), np.shape(z))
    samples = np.asarray(func(np.linspace(a, b, N_SAMPLE)), dtype=float)
    if not np.all(np.isfinite(samples)) or samples.min() <= 0.0:
        raise ModelError(f"coefficient {name} must be positive and finite on [{a}, {b}]")
    return func, expr, float(samples.min()), float(samples.max())


def _diagonal_density(entries, a, b):
    """Diagonal energy density from ``[(func, expr, lo, hi), ...]``."""
    funcs = [e[0] for e in entries]
    m = len(entries)

    def H(z):
        z = np.atleast_1d(z)
        out = np.zeros((z.size, m, m))
        for i, f in enumerate(funcs):
            out[:, i, i] = np.asarray(f(z), dtype=float)
        return out

    exprs = [e[1] for e in entries]
    symbolic = sp.diag(*exprs) if all(e is not None for e in exprs) else None
    return EnergyDensity(H, m, min(e[2] for e in entries), max(e[3] for e in entries),
                         True, symbolic)


def vibrating_string(rho=1.0, T=1.0, a: float = 0.0, b: float = 1.0) -> PortHamiltonianSystem:
    """Vibrating string clamped at ``a`` with force input at ``b``.

    State ``x = (rho w_t, w_zeta)`` and ``H = diag(1/rho, T)``. The input is the
    force ``T w_zeta(b)``, the output the velocity ``w_t(b)``.

    Parameters
    ----------
    rho, T
        Mass density and Young's modulus; numbers, sympy expressions in
        :data:`ZETA` or callables.
    a, b
        Interval endpoints.
    """
    r = _coefficient(rho, "rho", a, b)
    t = _coefficient(T, "T", a, b)
    inv_rho = (lambda z, _f=r[0]: 1.0 / np.asarray(_f(z), dtype=float),
               None if r[1] is None else 1 / r[1], 1.0 / r[3], 1.0 / r[2])
    H = _diagonal_density([inv_rho, t], a, b)
    P1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    P0 = np.zeros((2, 2))
    # trace z = (w_t(b), T w_z(b), w_t(a), T w_z(a))
    W_B1 = np.array([[0.0, 0.0, 1.0, 0.0]])
    W_B2 = np.array([[0.0, 1.0, 0.0, 0.0]])
    W_C = np.array([[1.0, 0.0, 0.0, 0.0]])
    meta = {"kind": "string", "rho": r[1], "T": t[1], "rho_func": r[0], "T_func": t[0]}
    return PortHamiltonianSystem((P0, P1), W_B1, W_B2, W_C, H, a, b, "vibrating_string", meta)


def timoshenko_beam(rho=1.0, EI=1.0, I_r=1.0, K_shear=1.0,
                    a: float = 0.0, b: float = 1.0) -> PortHamiltonianSystem:
    """Timoshenko beam clamped at ``a`` with force and moment inputs at ``b``.

    State ``x = (w_zeta - phi, rho w_t, phi_zeta, I_r phi_t)`` and
    ``H = diag(K, 1/rho, EI, 1/I_r)``. Inputs are the shear force and the
    bending moment at ``b`` (in that order), outputs the matching velocity
    and angular velocity.
    """
    k = _coefficient(K_shear, "K_shear", a, b)
    r = _coefficient(rho, "rho", a, b)
    ei = _coefficient(EI, "EI", a, b)
    ir = _coefficient(I_r, "I_r", a, b)

    def inv(c):
        return (lambda z, _f=c[0]: 1.0 / np.asarray(_f(z), dtype=float),
                None if c[1] is None else 1 / c[1], 1.0 / c[3], 1.0 / c[2])

    H = _diagonal_density([k, inv(r), ei, inv(ir)], a, b)
    P1 = np.zeros((4, 4))
    P1[0, 1] = P1[1, 0] = P1[2, 3] = P1[3, 2] = 1.0
    P0 = np.zeros((4, 4))
    P0[0, 3] = -1.0
    P0[3, 0] = 1.0
    # trace z = (e(b), e(a)) with e = (shear force, velocity, moment, angular velocity)
    W_B1 = np.zeros((2, 8))
    W_B1[0, 5] = W_B1[1, 7] = 1.0
    W_B2 = np.zeros((2, 8))
    W_B2[0, 0] = W_B2[1, 2] = 1.0
    W_C = np.zeros((2, 8))
    W_C[0, 1] = W_C[1, 3] = 1.0
    meta = {"kind": "timoshenko", "rho": r[1], "EI": ei[1], "I_r": ir[1], "K_shear": k[1],
            "rho_func": r[0], "EI_func": ei[0], "I_r_func": ir[0], "K_shear_func": k[0]}
    return PortHamiltonianSystem((P0, P1), W_B1, W_B2, W_C, H, a, b, "timoshenko_beam", meta)


# ---------------------------------------------------------------- manufactured solutions

@dataclass(frozen=True)
class PDEResidual:
    """Result of :func:`pde_residual_check`.

    ``consistency`` compares the first-order residual ``x_t - sum P_l d^l(Hx)``
    with the second-order PDE residual embedded in the momentum rows; it
    vanishes for *any* smooth fields iff the first-order form reproduces the
    PDE. ``ph_residual`` and ``pde_residual`` vanish only on actual solutions.
    """

    consistency: float
    ph_residual: float
    pde_residual: float
    mode: str

    @property
    def max_residual(self) -> float:
        return max(self.consistency, self.pde_residual)


def manufactured_family(name: str) -> dict:
    """Named manufactured fields ``{"w": expr, "phi": expr}`` in ``TIME`` and ``ZETA``.

    ``standing_wave`` is an exact solution of the unit string,
    ``constant`` solves every example, ``polynomial`` is a generic
    non-solution used for consistency checks and ``decoupled`` has ``phi = 0``.
    """
    t, z = TIME, ZETA
    if name == "standing_wave":
        return {"w": sp.sin(sp.pi * z) * sp.cos(sp.pi * t), "phi": sp.Integer(0)}
    if name == "constant":
        return {"w": sp.Integer(3), "phi": sp.Integer(0)}
    if name == "polynomial":
        return {"w": z**3 * t**2 + 2 * z * t - z**2, "phi": z**2 * t**3 - t * z + 1}
    if name == "decoupled":
        return {"w": z**3 * t**2 + 2 * z * t - z**2, "phi": sp.Integer(0)}
    raise InputError(f"unknown manufactured family {name!r}")


def _pde_fields(system):
    """Symbolic state, first-order residual and embedded PDE residual builders."""
    meta = system.meta
    kind = meta.get("kind")
    if kind == "string":
        rho, T = meta["rho"], meta["T"]

        def build(w, phi):
            x = sp.Matrix([rho * sp.diff(w, TIME), sp.diff(w, ZETA)])
            R = rho * sp.diff(w, TIME, 2) - sp.diff(T * sp.diff(w, ZETA), ZETA)
            return x, sp.Matrix([R, 0]), [R]
        return build
    if kind == "timoshenko":
        rho, EI, I_r, K = meta["rho"], meta["EI"], meta["I_r"], meta["K_shear"]

        def build(w, phi):
            x = sp.Matrix([sp.diff(w, ZETA) - phi, rho * sp.diff(w, TIME),
                           sp.diff(phi, ZETA), I_r * sp.diff(phi, TIME)])
            R1 = rho * sp.diff(w, TIME, 2) - sp.diff(K * (sp.diff(w, ZETA) - phi), ZETA)
            R2 = (I_r * sp.diff(phi, TIME, 2) - sp.diff(EI * sp.diff(phi, ZETA), ZETA)
                  - K * (sp.diff(w, ZETA) - phi))
            return x, sp.Matrix([0, R1, 0, R2]), [R1, R2]
        return build
    raise ModelError("pde_residual_check needs a system built by vibrating_string or timoshenko_beam")


def _diff_matrix(zg, width=5):
    # fourth-order differences, one-sided near the ends, so that nested
    # derivatives keep second-order accuracy up to the boundary
    n = zg.size
    D = np.zeros((n, n))
    for i in range(n):
        lo = min(max(i - width // 2, 0), n - width)
        D[i, lo:lo + width] = fd_weights(zg[i], zg[lo:lo + width], 1)
    return D


def pde_residual_check(system: PortHamiltonianSystem, family="polynomial", mode: str = "exact",
                       n: int = 201, t: float = 0.3, dt: float = 1e-4) -> PDEResidual:
    """Validate the first-order port-Hamiltonian form against the second-order PDE.

    Parameters
    ----------
    system
        A string or Timoshenko system from this module.
    family
        Name accepted by :func:`manufactured_family` or a dict with sympy
        expressions ``w`` and ``phi``.
    mode
        ``"exact"`` differentiates symbolically (requires symbolic
        coefficients); ``"sampled"`` uses second-order finite differences on
        ``n`` nodes with time step ``dt`` and is accurate to ``O(h^2)``.
    t
        Time at which the residuals are evaluated.
    """
    fields = manufactured_family(family) if isinstance(family, str) else dict(family)
    w = sp.sympify(fields.get("w", 0))
    phi = sp.sympify(fields.get("phi", 0))
    build = _pde_fields(system)
    zg = np.linspace(system.a, system.b, n)

    if mode == "exact":
        if system.H.symbolic is None:
            raise ModelError("exact mode needs symbolic coefficients")
        x, embed, pde = build(w, phi)
        e = system.H.symbolic * x
        rhs = sum((sp.Matrix(system.P[l]) * sp.diff(e, ZETA, l) for l in range(len(system.P))),
                  sp.zeros(system.m, 1))
        R_ph = sp.diff(x, TIME) - rhs

        def peak(exprs):
            vals = [np.abs(np.broadcast_to(sp.lambdify(ZETA, sp.simplify(ex.subs(TIME, t)),
                                                       "numpy")(zg), zg.shape))
                    for ex in exprs]
            return float(max(np.max(v) for v in vals)) if vals else 0.0

        return PDEResidual(peak(list(R_ph - embed)), peak(list(R_ph)), peak(pde), "exact")

    if mode != "sampled":
        raise InputError(f"unknown mode {mode!r}")
    # sampled: only pointwise values of w, phi (and of the coefficients) are used
    wf = sp.lambdify((TIME, ZETA), w, "numpy")
    pf = sp.lambdify((TIME, ZETA), phi, "numpy")

    def val(f, tt):
        return np.broadcast_to(np.asarray(f(tt, zg), dtype=float), zg.shape).copy()

    D = _diff_matrix(zg)

    def dz(f):
        return D @ f

    def dt_(f, tt, order):
        if order == 1:
            return (val(f, tt + dt) - val(f, tt - dt)) / (2 * dt)
        return (val(f, tt + dt) - 2 * val(f, tt) + val(f, tt - dt)) / dt**2

    def state(tt):
        W, Ph = val(wf, tt), val(pf, tt)
        Wt = dt_(wf, tt, 1)
        Pt = dt_(pf, tt, 1)
        return W, Ph, Wt, Pt

    meta = system.meta
    Hn = system.H(zg)
    W, Ph, Wt, Pt = state(t)
    Wtt, Ptt = dt_(wf, t, 2), dt_(pf, t, 2)
    if meta["kind"] == "string":
        rho, T = meta["rho_func"](zg), meta["T_func"](zg)

        def xs(tt):
            W_, _, Wt_, _ = state(tt)
            return np.stack([rho * Wt_, dz(W_)], axis=1)
        pde = [rho * Wtt - dz(T * dz(W))]
        embed = np.stack([pde[0], np.zeros_like(W)], axis=1)
    else:
        rho, EI, I_r, K = (meta[k + "_func"](zg) for k in ("rho", "EI", "I_r", "K_shear"))

        def xs(tt):
            W_, P_, Wt_, Pt_ = state(tt)
            return np.stack([dz(W_) - P_, rho * Wt_, dz(P_), I_r * Pt_], axis=1)
        R1 = rho * Wtt - dz(K * (dz(W) - Ph))
        R2 = I_r * Ptt - dz(EI * dz(Ph)) - K * (dz(W) - Ph)
        pde = [R1, R2]
        embed = np.stack([np.zeros_like(W), R1, np.zeros_like(W), R2], axis=1)
    x_now = xs(t)
    x_t = (xs(t + dt) - xs(t - dt)) / (2 * dt)
    e = np.einsum("nij,nj->ni", Hn, x_now)
    rhs = np.zeros_like(e)
    de = e
    for P_l in system.P:
        rhs += de @ P_l.T
        de = np.apply_along_axis(dz, 0, de)
    R_ph = x_t - rhs
    return PDEResidual(float(np.max(np.abs(R_ph - embed))), float(np.max(np.abs(R_ph))),
                       float(max(np.max(np.abs(r)) for r in pde)), "sampled")


# ---------------------------------------------------------------- controllers

CONTROLLER_NAMES = ("linear_pd", "quartic_pd", "saturating_damper_pd")


def _mat(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(n)
    if arr.ndim == 1:
        return np.diag(arr)
    if arr.shape != (n, n):
        raise InputError(f"{name} must be scalar, diagonal or {n}x{n}")
    return arr


def controller_library(name: str, params: dict | None = None) -> Controller:
    """Build a named controller.

    Parameters
    ----------
    name
        ``linear_pd`` (``P = v^T Q v / 2``, ``R = D w``), ``quartic_pd``
        (adds ``alpha |v|^4`` to the potential) or ``saturating_damper_pd``
        (``R = c w / (1 + |w|)`` with a quadratic plus optional quartic
        potential).
    params
        Optional keys ``k`` (port dimension, default 1), ``m_c`` (default
        ``k``), ``K``, ``B_c``, ``S_c``, ``Q``, ``D``, ``alpha``, ``c``.
        Matrices may be scalars (times identity) or diagonals.
    """
    p = dict(params or {})
    unknown = set(p) - {"k", "m_c", "K", "B_c", "S_c", "Q", "D", "alpha", "c"}
    if unknown:
        raise InputError(f"unknown controller parameters {sorted(unknown)}")
    if name not in CONTROLLER_NAMES:
        raise InputError(f"unknown controller {name!r}; choose from {CONTROLLER_NAMES}")
    k = int(p.get("k", 1))
    m_c = int(p.get("m_c", k))
    K = _mat(p.get("K", 1.0), m_c, "K")
    B_c = np.asarray(p.get("B_c", np.eye(m_c, k)), dtype=float)
    if B_c.ndim == 0:
        B_c = float(B_c) * np.eye(m_c, k)
    B_c = B_c.reshape(m_c, k)
    S_c = _mat(p.get("S_c", 1.0), k, "S_c")
    Q = _mat(p.get("Q", 1.0), m_c, "Q")
    alpha = float(p.get("alpha", 0.25 if name == "quartic_pd" else 0.0))
    if name == "linear_pd":
        alpha = 0.0

    def potential(v):
        s = float(v @ v)
        return 0.5 * float(v @ Q @ v) + alpha * s * s

    def grad(v):
        return Q @ v + 4.0 * alpha * float(v @ v) * v

    def hess(v):
        return Q + 4.0 * alpha * (float(v @ v) * np.eye(v.size) + 2.0 * np.outer(v, v))

    if name == "saturating_damper_pd":
        c = float(p.get("c", 1.0))
        if c <= 0:
            raise InputError("saturation gain c must be positive")

        def damping(w):
            return c * w / (1.0 + np.sqrt(w @ w))

        def jac(w):
            r = np.sqrt(w @ w)
            if r == 0.0:
                return c * np.eye(w.size)
            return c * (np.eye(w.size) / (1.0 + r) - np.outer(w, w) / (r * (1.0 + r) ** 2))
        params_out = {"Q": Q, "alpha": alpha, "c": c}
    else:
        D = _mat(p.get("D", 1.0), m_c, "D")

        def damping(w):
            return D @ w

        def jac(w):
            return D
        params_out = {"Q": Q, "alpha": alpha, "D": D}

    return Controller(K, B_c, S_c, potential, grad, damping, hess, jac, name, params_out)


# ---------------------------------------------------------------- presets

def random_initial_state(system: PortHamiltonianSystem, controller: Controller, zeta,
                         rng: np.random.Generator, n_modes: int = 4,
                         amplitude: float = 1.0) -> ClosedLoopState:
    """Smooth random closed-loop state.

    Each plant component is a random combination of the first ``n_modes``
    sine modes with ``1/j^2`` decay, so it vanishes at both endpoints and is
    compatible with homogeneous boundary data. Controller states are
    Gaussian with standard deviation ``amplitude / 2``.
    """
    zeta = np.asarray(zeta, dtype=float)
    s = (zeta - system.a) / (system.b - system.a)
    j = np.arange(1, n_modes + 1)
    modes = np.sin(np.pi * np.outer(s, j))
    coef = rng.standard_normal((n_modes, system.m)) / j[:, None] ** 2
    x = amplitude * modes @ coef
    v1 = 0.5 * amplitude * rng.standard_normal(controller.m_c)
    v2 = 0.5 * amplitude * rng.standard_normal(controller.m_c)
    return ClosedLoopState(x, v1, v2)


def smooth_bump_state(system: PortHamiltonianSystem, controller: Controller | None, zeta,
                      center: float | None = None, width: float | None = None,
                      weights=None) -> ClosedLoopState:
    """Compactly supported ``cos^8`` bump with zero controller state.

    The bump lives strictly inside the interval, so the state satisfies the
    boundary relations (and their first time derivatives) for ``d = 0``.
    This makes it the natural smooth datum for convergence studies.
    ``weights`` scales the bump per plant component (default ``1, 1/2, ...``).
    """
    zeta = np.asarray(zeta, dtype=float)
    L = system.b - system.a
    center = system.a + 0.5 * L if center is None else float(center)
    width = 0.3 * L if width is None else float(width)
    if center - width <= system.a or center + width >= system.b:
        raise InputError("bump support must lie strictly inside the interval")
    u = (zeta - center) / width
    bump = np.where(np.abs(u) < 1.0, np.cos(0.5 * np.pi * np.clip(u, -1.0, 1.0)) ** 8, 0.0)
    if weights is None:
        weights = 1.0 / np.arange(1, system.m + 1)
    x = np.outer(bump, np.asarray(weights, dtype=float))
    m_c = 0 if controller is None else controller.m_c
    return ClosedLoopState(x, np.zeros(m_c), np.zeros(m_c))


@dataclass(frozen=True, eq=False)
class ScenarioPreset:
    """Named bundle of plant, controller and default simulation settings."""

    name: str
    system: PortHamiltonianSystem
    controller: Controller
    initial_state: Callable = random_initial_state
    signal: dict = field(default_factory=lambda: {"kind": "truncated_step", "amplitude": 0.5,
                                                  "duration": 2.0})
    n: int = 100
    dt: float = 0.01
    T: float = 20.0
    regime: str = "uniform"


PRESET_NAMES = ("string_linear_pd", "string_quartic_pd", "string_saturating_pd",
                "timoshenko_linear_pd", "timoshenko_saturating_pd")


def preset(name: str) -> ScenarioPreset:
    """Return a named scenario preset (see :data:`PRESET_NAMES`)."""
    if name == "string_linear_pd":
        return ScenarioPreset(name, vibrating_string(), controller_library("linear_pd"))
    if name == "string_quartic_pd":
        return ScenarioPreset(name, vibrating_string(), controller_library("quartic_pd"))
    if name == "string_saturating_pd":
        return ScenarioPreset(name, vibrating_string(),
                              controller_library("saturating_damper_pd"), regime="weak",
                              T=60.0)
    if name == "timoshenko_linear_pd":
        return ScenarioPreset(name, timoshenko_beam(), controller_library("linear_pd", {"k": 2}),
                              signal={"kind": "truncated_step", "amplitude": [0.5, 0.2],
                                      "duration": 2.0})
    if name == "timoshenko_saturating_pd":
        return ScenarioPreset(name, timoshenko_beam(),
                              controller_library("saturating_damper_pd", {"k": 2}),
                              signal={"kind": "truncated_step", "amplitude": [0.5, 0.2],
                                      "duration": 2.0}, regime="weak", T=60.0)
    raise InputError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
