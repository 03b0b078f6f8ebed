"""Boundary-controlled port-Hamiltonian plant, dynamic controller and closed loop.

All objects are immutable once constructed and every function here is pure.
States of the plant are sampled on a spatial grid ``zeta`` as an ``(n, m)``
array; boundary traces follow the ``(b-block, a-block)`` ordering, each block
stacking ``Hx, d(Hx), ..., d^{N-1}(Hx)`` at that endpoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, InterconnectionError, ModelError, ResolutionError

SYM_TOL = 1e-12


def _as_matrix(value, name, shape=None):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if shape is not None and arr.shape != shape:
        raise ModelError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class EnergyDensity:
    """Matrix-valued energy density ``zeta -> H(zeta)``.

    Parameters
    ----------
    func
        Callable taking a 1-D array of positions and returning either an
        ``(n, m, m)`` array or a single ``(m, m)`` matrix (constant density).
    m
        State dimension.
    m_low, m_high
        Declared bounds ``m_low * I <= H <= m_high * I``. They are not trusted;
        :func:`hamport.conditions.check_structure` verifies them by sampling.
    absolutely_continuous
        Declared smoothness of ``H``.
    symbolic
        Optional symbolic representation (e.g. a sympy matrix in ``zeta``) used
        for exact manufactured-solution checks.
    """

    func: Callable
    m: int
    m_low: float
    m_high: float
    absolutely_continuous: bool = True
    symbolic: object = None

    def __post_init__(self):
        if not (0.0 < self.m_low <= self.m_high < np.inf):
            raise ModelError(f"need 0 < m_low <= m_high < inf, got {self.m_low}, {self.m_high}")

    def __call__(self, zeta):
        z = np.asarray(zeta, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        H = np.asarray(self.func(z), dtype=float)
        if H.shape == (self.m, self.m):
            H = np.broadcast_to(H, (z.size, self.m, self.m))
        if H.shape != (z.size, self.m, self.m):
            raise ModelError(f"energy density returned shape {H.shape}")
        return H[0] if scalar else H

    @classmethod
    def constant(cls, H, symbolic=None):
        H = _as_matrix(H, "H")
        if H.shape[0] != H.shape[1]:
            raise ModelError("constant energy density must be square")
        eig = np.linalg.eigvalsh(0.5 * (H + H.T))
        return cls(lambda z, _H=H: _H, H.shape[0], float(eig.min()), float(eig.max()),
                   True, symbolic)


@dataclass(frozen=True, eq=False)
class PortHamiltonianSystem:
    """Linear port-Hamiltonian system of order ``N`` on ``(a, b)``.

    ``P`` holds ``(P_0, ..., P_N)``. The boundary matrices act on the trace
    vector of length ``2 m N``: ``W_B1`` encodes the homogeneous boundary
    conditions, ``W_B2`` the control input and ``W_C`` the observation.

    Structural hypotheses (parity of ``P_l``, dissipativity of ``P_0``,
    invertibility of ``P_N``, bounds of ``H``) are *not* enforced here so that
    violating systems can be built and diagnosed; see
    :func:`hamport.conditions.check_structure`.
    """

    P: tuple
    W_B1: np.ndarray
    W_B2: np.ndarray
    W_C: np.ndarray
    H: EnergyDensity
    a: float = 0.0
    b: float = 1.0
    name: str = "phs"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = tuple(_as_matrix(p, f"P_{i}") for i, p in enumerate(self.P))
        if len(P) < 2:
            raise ModelError("need at least P_0 and P_1 (order N >= 1)")
        m = P[0].shape[0]
        for i, p in enumerate(P):
            if p.shape != (m, m):
                raise ModelError(f"P_{i} has shape {p.shape}, expected {(m, m)}")
        N = len(P) - 1
        W_B2 = np.atleast_2d(np.asarray(self.W_B2, dtype=float))
        k = W_B2.shape[0]
        if not 1 <= k <= m * N:
            raise ModelError(f"port dimension k={k} outside 1..{m * N}")
        W_B1 = np.asarray(self.W_B1, dtype=float).reshape(m * N - k, 2 * m * N)
        W_B2 = _as_matrix(W_B2, "W_B2", (k, 2 * m * N))
        W_C = _as_matrix(self.W_C, "W_C", (k, 2 * m * N))
        if not np.all(np.isfinite(W_B1)):
            raise ModelError("W_B1 has non-finite entries")
        if not self.a < self.b:
            raise ModelError(f"need a < b, got ({self.a}, {self.b})")
        if self.H.m != m:
            raise ModelError(f"energy density dimension {self.H.m} != m={m}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "W_B1", W_B1)
        object.__setattr__(self, "W_B2", W_B2)
        object.__setattr__(self, "W_C", W_C)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def N(self) -> int:
        return len(self.P) - 1

    @property
    def m(self) -> int:
        return self.P[0].shape[0]

    @property
    def k(self) -> int:
        return self.W_B2.shape[0]

    @property
    def W(self) -> np.ndarray:
        """Stacked boundary matrix ``[W_B1; W_B2; W_C]``."""
        return np.vstack([self.W_B1, self.W_B2, self.W_C])

    def boundary_form(self) -> np.ndarray:
        """Symmetric matrix of the boundary power for ``N = 1``.

        For ``N = 1`` integration by parts gives
        ``<x, A x> = z^T S z + int (Hx)^T P_0 (Hx)`` with
        ``S = 1/2 diag(P_1, -P_1)`` on the trace ``z = (Hx(b), Hx(a))``.
        """
        if self.N != 1:
            raise ModelError("boundary_form is only defined for N = 1")
        P1 = 0.5 * (self.P[1] + self.P[1].T)
        Z = np.zeros_like(P1)
        return 0.5 * np.block([[P1, Z], [Z, -P1]])


@dataclass(frozen=True, eq=False)
class Controller:
    """Finite-dimensional nonlinear controller.

    ``v1' = K v2``, ``v2' = -grad P(v1) - R(K v2) + B_c u_c``,
    ``y_c = B_c^T K v2 + S_c u_c``, with energy ``P(v1) + v2^T K v2 / 2``.

    ``hess_potential`` and ``jac_damping`` are optional analytic Jacobians
    used by the implicit integrator; finite differences are used otherwise.
    """

    K: np.ndarray
    B_c: np.ndarray
    S_c: np.ndarray
    potential: Callable
    grad_potential: Callable
    damping: Callable
    hess_potential: Optional[Callable] = None
    jac_damping: Optional[Callable] = None
    name: str = "controller"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        K = _as_matrix(self.K, "K")
        m_c = K.shape[0]
        if K.shape != (m_c, m_c):
            raise ModelError("K must be square")
        B_c = np.asarray(self.B_c, dtype=float)
        if B_c.ndim < 2:
            B_c = B_c.reshape(m_c, -1)
        B_c = _as_matrix(B_c, "B_c")
        if B_c.shape[0] != m_c:
            raise ModelError(f"B_c has {B_c.shape[0]} rows, expected m_c={m_c}")
        k = B_c.shape[1]
        S_c = _as_matrix(self.S_c, "S_c", (k, k))
        if np.max(np.abs(K - K.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(K).max()):
            raise ModelError("K must be symmetric")
        if np.linalg.eigvalsh(K).min() <= 0.0:
            raise ModelError("K must be positive definite")
        zero = np.zeros(m_c)
        if float(self.potential(zero)) != 0.0:
            raise ModelError("potential must vanish at 0")
        if np.any(np.asarray(self.damping(zero), dtype=float) != 0.0):
            raise ModelError("damping must vanish at 0")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "B_c", B_c)
        object.__setattr__(self, "S_c", S_c)

    @property
    def m_c(self) -> int:
        return self.K.shape[0]

    @property
    def k(self) -> int:
        return self.B_c.shape[1]

    @property
    def varsigma(self) -> float:
        """Smallest eigenvalue of the symmetric part of the feedthrough."""
        return float(np.linalg.eigvalsh(0.5 * (self.S_c + self.S_c.T)).min())

    def grad(self, v1):
        g = np.asarray(self.grad_potential(np.asarray(v1, dtype=float)), dtype=float)
        if not np.all(np.isfinite(g)):
            raise ModelError(f"non-finite potential gradient at v1={v1}")
        return g

    def damp(self, w):
        r = np.asarray(self.damping(np.asarray(w, dtype=float)), dtype=float)
        if not np.all(np.isfinite(r)):
            raise ModelError(f"non-finite damping at w={w}")
        return r

    def hess(self, v1, eps=1e-6):
        v1 = np.asarray(v1, dtype=float)
        if self.hess_potential is not None:
            return np.atleast_2d(np.asarray(self.hess_potential(v1), dtype=float))
        return _fd_jacobian(self.grad, v1, eps)

    def damp_jac(self, w, eps=1e-6):
        w = np.asarray(w, dtype=float)
        if self.jac_damping is not None:
            return np.atleast_2d(np.asarray(self.jac_damping(w), dtype=float))
        return _fd_jacobian(self.damp, w, eps)

    def energy(self, v1, v2) -> float:
        v2 = np.asarray(v2, dtype=float)
        return float(self.potential(np.asarray(v1, dtype=float))) + 0.5 * float(v2 @ self.K @ v2)


def _fd_jacobian(f, x, eps):
    n = x.size
    J = np.empty((np.asarray(f(x)).size, n))
    for j in range(n):
        step = eps * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * step)
    return J


@dataclass(frozen=True)
class BoundaryTrace:
    """Trace vector ``z`` of length ``2 m N``, b-block first."""

    z: np.ndarray
    m: int
    N: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        if z.size != 2 * self.m * self.N:
            raise InputError(f"trace length {z.size} != 2*m*N = {2 * self.m * self.N}")
        object.__setattr__(self, "z", z)

    def block(self, eta: str) -> np.ndarray:
        """Trace block at endpoint ``'a'`` or ``'b'``."""
        h = self.m * self.N
        if eta == "b":
            return self.z[:h]
        if eta == "a":
            return self.z[h:]
        raise InputError(f"endpoint must be 'a' or 'b', got {eta!r}")

    def values(self, eta: str) -> np.ndarray:
        """``(Hx)(eta)`` without derivatives."""
        return self.block(eta)[: self.m]


@dataclass(frozen=True, eq=False)
class ClosedLoopState:
    """Closed-loop state ``(x, v1, v2)`` with ``x`` sampled on a grid."""

    x: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        v1 = np.atleast_1d(np.asarray(self.v1, dtype=float))
        v2 = np.atleast_1d(np.asarray(self.v2, dtype=float))
        for name, arr in (("x", x), ("v1", v1), ("v2", v2)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"closed-loop state component {name} is not finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)


# ---------------------------------------------------------------- quadrature

def quadrature_weights(zeta, rule: str = "trapezoid") -> np.ndarray:
    """Weights of a composite quadrature rule on the nodes ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    n = zeta.size
    if n < 2:
        raise InputError("need at least two nodes")
    dz = np.diff(zeta)
    if np.any(dz <= 0):
        raise InputError("grid must be strictly increasing")
    if rule == "trapezoid":
        w = np.zeros(n)
        w[:-1] += 0.5 * dz
        w[1:] += 0.5 * dz
        return w
    if rule == "simpson":
        if n % 2 == 0 or not np.allclose(dz, dz[0], rtol=1e-10, atol=0.0):
            raise InputError("simpson rule needs an odd number of uniform nodes")
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * dz[0] / 3.0
    raise InputError(f"unknown quadrature rule {rule!r}")


def _check_grid(system, x, zeta):
    zeta = np.asarray(zeta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape != (zeta.size, system.m):
        raise InputError(f"state has shape {x.shape}, expected {(zeta.size, system.m)}")
    scale = system.b - system.a
    if abs(zeta[0] - system.a) > 1e-12 * scale or abs(zeta[-1] - system.b) > 1e-12 * scale:
        raise InputError("grid does not cover [a, b]")
    return x, zeta


def effort(system: PortHamiltonianSystem, x, zeta) -> np.ndarray:
    """Nodal values of ``H x``."""
    x, zeta = _check_grid(system, x, zeta)
    return np.einsum("nij,nj->ni", system.H(zeta), x)


def energy(system: PortHamiltonianSystem, x, zeta, quadrature: str = "trapezoid") -> float:
    """Plant energy ``1/2 int x^T H x`` by composite quadrature."""
    x, zeta = _check_grid(system, x, zeta)
    e = np.einsum("nij,nj->ni", system.H(zeta), x)
    w = quadrature_weights(zeta, quadrature)
    return 0.5 * float(np.sum(w * np.einsum("ni,ni->n", x, e)))


def l2_norm_sq(x, zeta, quadrature: str = "trapezoid") -> float:
    """Unweighted squared L2 norm by quadrature."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = quadrature_weights(zeta, quadrature)
    return float(np.sum(w * np.sum(x * x, axis=1)))


# ---------------------------------------------------------------- traces

def fd_weights(x0: float, nodes, deriv: int) -> np.ndarray:
    """Finite-difference weights for the ``deriv``-th derivative at ``x0``.

    Exact for polynomials of degree ``len(nodes) - 1``.
    """
    nodes = np.asarray(nodes, dtype=float)
    p = nodes.size
    if deriv >= p:
        raise ResolutionError(f"{p} nodes cannot resolve derivative order {deriv}")
    scale = np.max(np.abs(nodes - x0)) or 1.0
    d = (nodes - x0) / scale
    V = np.vander(d, p, increasing=True).T
    rhs = np.zeros(p)
    rhs[deriv] = np.prod(np.arange(1, deriv + 1))
    return np.linalg.solve(V, rhs) / scale**deriv


def trace_stencils(zeta, N: int):
    """One-sided second-order stencils ``(idx_b, w_b, idx_a, w_a)`` per derivative order."""
    zeta = np.asarray(zeta, dtype=float)
    n = zeta.size
    if n < 2 * N + 2:
        raise ResolutionError(f"need at least {2 * N + 2} nodes for order N={N}, got {n}")
    out = []
    for l in range(N):
        width = 1 if l == 0 else l + 2
        idx_b = np.arange(n - width, n)
        idx_a = np.arange(0, width)
        w_b = fd_weights(zeta[-1], zeta[idx_b], l)
        w_a = fd_weights(zeta[0], zeta[idx_a], l)
        out.append((idx_b, w_b, idx_a, w_a))
    return out


def boundary_trace(system: PortHamiltonianSystem, x, zeta) -> BoundaryTrace:
    """Boundary trace of ``Hx`` via one-sided second-order differences."""
    e = effort(system, x, zeta)
    blocks_b, blocks_a = [], []
    for idx_b, w_b, idx_a, w_a in trace_stencils(zeta, system.N):
        blocks_b.append(w_b @ e[idx_b])
        blocks_a.append(w_a @ e[idx_a])
    return BoundaryTrace(np.concatenate(blocks_b + blocks_a), system.m, system.N)


def apply_boundary_ops(system: PortHamiltonianSystem, z):
    """Return ``(u, y, bc_residual) = (W_B2 z, W_C z, W_B1 z)``."""
    z = z.z if isinstance(z, BoundaryTrace) else np.asarray(z, dtype=float).ravel()
    if z.size != 2 * system.m * system.N:
        raise InputError(f"trace length {z.size} != {2 * system.m * system.N}")
    return system.W_B2 @ z, system.W_C @ z, system.W_B1 @ z


# ---------------------------------------------------------------- controller

def controller_rhs(controller: Controller, v1, v2, u_c):
    """Time derivative ``(v1', v2')`` of the controller state."""
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    v2 = np.atleast_1d(np.asarray(v2, dtype=float))
    u_c = np.atleast_1d(np.asarray(u_c, dtype=float))
    Kv2 = controller.K @ v2
    dv2 = -controller.grad(v1) - controller.damp(Kv2) + controller.B_c @ u_c
    return Kv2, dv2


def controller_output(controller: Controller, v2, u_c) -> np.ndarray:
    """``y_c = B_c^T K v2 + S_c u_c``."""
    v2 = np.atleast_1d(np.asarray(v2, dtype=float))
    u_c = np.atleast_1d(np.asarray(u_c, dtype=float))
    return controller.B_c.T @ (controller.K @ v2) + controller.S_c @ u_c


def closed_loop_energy(system, controller, state: ClosedLoopState, zeta,
                       quadrature: str = "trapezoid") -> float:
    """``E(x) + P(v1) + v2^T K v2 / 2``."""
    return energy(system, state.x, zeta, quadrature) + controller.energy(state.v1, state.v2)


@dataclass(frozen=True, eq=False)
class Interconnection:
    """Boundary input/output maps of the feedback loop ``u_c = y``, ``u = d - y_c``."""

    system: PortHamiltonianSystem
    controller: Controller

    def input_from_trace(self, z, v2) -> np.ndarray:
        """``B x + B_c^T K v2 + S_c C x`` evaluated on a trace."""
        u, y, _ = apply_boundary_ops(self.system, z)
        c = self.controller
        return u + c.B_c.T @ (c.K @ np.atleast_1d(v2)) + c.S_c @ y

    def output_from_trace(self, z) -> np.ndarray:
        return apply_boundary_ops(self.system, z)[1]

    def input_map(self, state: ClosedLoopState, zeta) -> np.ndarray:
        return self.input_from_trace(boundary_trace(self.system, state.x, zeta), state.v2)

    def output_map(self, state: ClosedLoopState, zeta) -> np.ndarray:
        return self.output_from_trace(boundary_trace(self.system, state.x, zeta))

    def plant_input(self, d, state: ClosedLoopState, zeta) -> np.ndarray:
        """Plant input ``u = d - y_c`` with ``u_c = y``."""
        y = self.output_map(state, zeta)
        return np.atleast_1d(d) - controller_output(self.controller, state.v2, y)


def interconnection_maps(system: PortHamiltonianSystem, controller: Controller) -> Interconnection:
    if system.k != controller.k:
        raise InterconnectionError(
            f"plant port dimension k={system.k} != controller input dimension {controller.k}")
    return Interconnection(system, controller)
