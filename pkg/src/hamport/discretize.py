"""Energy-consistent spatial discretization of the closed loop.

The default scheme (``"sbp-sat"``, order ``N = 1``) uses the second-order
summation-by-parts operator ``D = W^{-1} Q`` with trapezoid weights ``W`` and
``Q + Q^T = diag(-1, 0, ..., 0, 1)``. With ``e = Hx`` the plant part of the
energy rate collapses to the boundary form ``z^T S z`` with
``S = 1/2 diag(P_1, -P_1)`` and ``z = (e_b, e_a)``.

Boundary relations ``W_B1 z = 0`` and ``B~ x~ = d`` are written as
``L z = r`` with ``L = [W_B1; W_B2 + S_c W_C]`` and
``r = [0; d - B_c^T K v2]``. The nodal trace is corrected along the incoming
characteristic directions, ``z* = z + delta`` with
``delta = Pi (r - L z)`` and ``Pi = V_in (L V_in)^{-1}``, so that ``L z* = r``
exactly. The penalty ``2 S delta`` is injected at the two boundary nodes; the
factor 2 is the unique scaling that cancels the cross term, giving

    dE/dt = d^T y* - y*^T S_c y* - (K v2)^T R(K v2)
            + sum_j w_j e_j^T P_0 e_j - delta^T S delta - (u*^T y* - z*^T S z*)

with ``y* = W_C z*`` and ``u* = W_B2 z*``. The last three terms are
nonpositive (the last one for impedance-passive plants), so the semidiscrete
closed loop inherits the passivity of the continuous one. An optional
artificial dissipation on the effort (see :func:`discretize_closed_loop`)
adds one more nonpositive term ``-s c_max |D2 e|^2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .core import ClosedLoopState, Controller, PortHamiltonianSystem, fd_weights, trace_stencils
from .errors import (AssemblyError, InputError, InterconnectionError, NumericError,
                     ResolutionError, UnsupportedOrderError)

SCHEMES = ("sbp-sat", "central")
MIN_NODES = 16
DEFAULT_DISSIPATION = 0.02


def sbp_operator(n: int, h: float):
    """Second-order SBP pair ``(D, w)`` on ``n`` uniform nodes with spacing ``h``."""
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    main = np.zeros(n)
    main[0], main[-1] = -0.5, 0.5
    Q = sps.diags([np.full(n - 1, -0.5), main, np.full(n - 1, 0.5)], [-1, 0, 1], format="csr")
    D = sps.diags(1.0 / w) @ Q
    return D.tocsr(), w


def _incoming_basis(P1):
    """Columns spanning the incoming characteristic directions at ``b`` then ``a``."""
    m = P1.shape[0]
    lam, V = np.linalg.eigh(0.5 * (P1 + P1.T))
    Vp, Vn = V[:, lam > 0], V[:, lam < 0]
    V_in = np.zeros((2 * m, Vp.shape[1] + Vn.shape[1]))
    V_in[:m, :Vp.shape[1]] = Vp
    V_in[m:, Vp.shape[1]:] = Vn
    return V_in


@dataclass(eq=False)
class FiniteModel:
    """Semidiscrete closed loop ``x~' = A_d x~ + F(x~) + G_d d``.

    The state vector stacks the nodal plant values (node-major, ``m`` per
    node), then ``v1`` and ``v2``. ``C_d`` is the raw collocated output
    ``W_C z`` of the nodal trace; the boundary-consistent output used for
    feedback and energy bookkeeping is ``y* = Cy x~ + Dy d``.

    Attributes
    ----------
    M
        Norm matrix ``blockdiag(w_j H_j, I, K)`` of ``||x||_X^2 + |v1|^2 + v2^T K v2``.
    """

    system: PortHamiltonianSystem
    controller: Controller | None
    n: int
    h: float
    zeta: np.ndarray
    weights: np.ndarray
    A_d: sps.csr_matrix
    G_d: np.ndarray
    C_d: np.ndarray
    Cy: np.ndarray
    Dy: np.ndarray
    M: sps.csr_matrix
    scheme: str
    order: int
    # internal operators for bookkeeping
    Hn: np.ndarray = field(repr=False, default=None)
    T_x: np.ndarray = field(repr=False, default=None)
    Pi: np.ndarray = field(repr=False, default=None)
    L: np.ndarray = field(repr=False, default=None)
    J: np.ndarray = field(repr=False, default=None)
    Sigma: np.ndarray = field(repr=False, default=None)
    AD: sps.csr_matrix = field(repr=False, default=None)
    ad_coef: float = 0.0
    _cache: dict = field(repr=False, default_factory=dict)

    # ---- layout
    @property
    def m(self) -> int:
        return self.system.m

    @property
    def k(self) -> int:
        return self.system.k

    @property
    def m_c(self) -> int:
        return 0 if self.controller is None else self.controller.m_c

    @property
    def nx(self) -> int:
        return self.n * self.m

    @property
    def size(self) -> int:
        return self.nx + 2 * self.m_c

    def split(self, xt):
        xt = np.asarray(xt, dtype=float)
        if xt.shape != (self.size,):
            raise InputError(f"state vector has shape {xt.shape}, expected ({self.size},)")
        nx, mc = self.nx, self.m_c
        return xt[:nx].reshape(self.n, self.m), xt[nx:nx + mc], xt[nx + mc:]

    def pack(self, x, v1=None, v2=None) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.nx:
            raise InputError(f"plant state has {x.size} entries, expected {self.nx}")
        v1 = np.zeros(self.m_c) if v1 is None else np.atleast_1d(np.asarray(v1, dtype=float))
        v2 = np.zeros(self.m_c) if v2 is None else np.atleast_1d(np.asarray(v2, dtype=float))
        if v1.size != self.m_c or v2.size != self.m_c:
            raise InputError("controller state dimension mismatch")
        return np.concatenate([x, v1, v2])

    def from_state(self, state: ClosedLoopState) -> np.ndarray:
        return self.pack(state.x, state.v1, state.v2)

    def to_state(self, xt) -> ClosedLoopState:
        x, v1, v2 = self.split(xt)
        return ClosedLoopState(x.copy(), v1.copy(), v2.copy())

    # ---- evaluation
    def nonlinear(self, xt) -> np.ndarray:
        """``F(x~) = (0, 0, v1 - grad P(v1) - R(K v2))``."""
        out = np.zeros(self.size)
        if self.controller is None:
            return out
        _, v1, v2 = self.split(xt)
        c = self.controller
        out[self.nx + self.m_c:] = v1 - c.grad(v1) - c.damp(c.K @ v2)
        return out

    def nonlinear_jacobian_block(self, v1, v2) -> np.ndarray:
        """Jacobian of the ``v2`` rows of ``F`` w.r.t. ``(v1, v2)`` (``m_c x 2 m_c``)."""
        c = self.controller
        return np.hstack([np.eye(self.m_c) - c.hess(v1), -c.damp_jac(c.K @ v2) @ c.K])

    def _disturbance(self, d):
        d = np.zeros(self.k) if d is None else np.atleast_1d(np.asarray(d, dtype=float))
        if d.size != self.k:
            raise InputError(f"disturbance has {d.size} components, expected {self.k}")
        return d

    def rhs(self, xt, d=None) -> np.ndarray:
        d = self._disturbance(d)
        return self.A_d @ xt + self.nonlinear(xt) + self.G_d @ d

    def linearization(self) -> np.ndarray:
        """Dense ``A_d + DF(0)``."""
        A = self.A_d.toarray()
        if self.controller is not None:
            r = self.nx + self.m_c
            A[r:, self.nx:] += self.nonlinear_jacobian_block(np.zeros(self.m_c),
                                                             np.zeros(self.m_c))
        return A

    def trace(self, xt) -> np.ndarray:
        """Nodal trace ``z = (e(b), e(a))``."""
        return self.T_x @ np.asarray(xt)[:self.nx]

    def boundary_data(self, xt, d=None) -> np.ndarray:
        d = self._disturbance(d)
        r = self.J @ d
        if self.controller is not None:
            _, _, v2 = self.split(xt)
            r = r - self.J @ (self.controller.B_c.T @ (self.controller.K @ v2))
        return r

    def corrected_trace(self, xt, d=None):
        """``(z*, delta)`` with ``L z* = r`` exactly."""
        z = self.trace(xt)
        r = self.boundary_data(xt, d)
        delta = self.Pi @ (r - self.L @ z)
        return z + delta, delta

    def output(self, xt, d=None) -> np.ndarray:
        """Boundary-consistent output ``y* = W_C z*``."""
        return self.Cy @ xt + self.Dy @ self._disturbance(d)

    def raw_output(self, xt) -> np.ndarray:
        """Collocated output of the nodal trace, ``C_d x~``."""
        return self.C_d @ xt

    @property
    def Mx(self):
        """Plant block ``blockdiag(w_j H_j)`` of the norm matrix."""
        if "Mx" not in self._cache:
            self._cache["Mx"] = self.M[:self.nx, :self.nx].tocsr()
        return self._cache["Mx"]

    def energy_parts(self, xt):
        """``(E_plant, E_ctrl)``."""
        x = np.asarray(xt)[:self.nx]
        Ep = 0.5 * float(x @ (self.Mx @ x))
        if self.controller is None:
            return Ep, 0.0
        _, v1, v2 = self.split(xt)
        return Ep, self.controller.energy(v1, v2)

    def energy(self, xt) -> float:
        Ep, Ec = self.energy_parts(xt)
        return Ep + Ec

    def energy_gradient(self, xt) -> np.ndarray:
        g = np.zeros(self.size)
        g[:self.nx] = self.Mx @ np.asarray(xt)[:self.nx]
        if self.controller is not None:
            _, v1, v2 = self.split(xt)
            g[self.nx:self.nx + self.m_c] = self.controller.grad(v1)
            g[self.nx + self.m_c:] = self.controller.K @ v2
        return g

    def norm(self, xt) -> float:
        """Closed-loop norm ``sqrt(x~^T M x~)``."""
        xt = np.asarray(xt)
        return float(np.sqrt(max(float(xt @ (self.M @ xt)), 0.0)))

    def balance_terms(self, xt, d=None) -> dict:
        """Closed-form terms of the semidiscrete energy identity.

        Returns the energy rate ``grad E . rhs`` evaluated through the
        assembled operators together with every term of the identity
        evaluated from the corrected trace.
        """
        d = self._disturbance(d)
        xt = np.asarray(xt, dtype=float)
        rate = float(self.energy_gradient(xt) @ self.rhs(xt, d))
        zs, delta = self.corrected_trace(xt, d)
        sysm = self.system
        y = sysm.W_C @ zs
        u = sysm.W_B2 @ zs
        x = xt[:self.nx].reshape(self.n, self.m)
        e = np.einsum("nij,nj->ni", self.Hn, x)
        interior = float(np.sum(self.weights * np.einsum("ni,ij,nj->n", e, sysm.P[0], e)))
        jump = float(delta @ self.Sigma @ delta)
        artificial = self.artificial_dissipation(xt)
        defect = float(u @ y - zs @ self.Sigma @ zs)
        supply = float(d @ y)
        feed = damp = 0.0
        if self.controller is not None:
            c = self.controller
            _, _, v2 = self.split(xt)
            Kv2 = c.K @ v2
            feed = float(y @ c.S_c @ y)
            damp = float(Kv2 @ c.damp(Kv2))
        closed = supply - feed - damp + interior - jump - defect - artificial
        scale = abs(supply) + abs(feed) + abs(damp) + abs(interior) + abs(jump) + abs(defect) \
            + abs(artificial) + abs(float(u @ y))
        return {"rate": rate, "closed_form": closed, "supply": supply, "feedthrough": feed,
                "damping": damp, "interior": interior, "jump": jump, "passivity_defect": defect,
                "artificial": artificial, "remainder": interior - jump - defect - artificial,
                "scale": scale, "y": y}

    def artificial_dissipation(self, xt) -> float:
        """Energy drained by the artificial dissipation, ``s c_max |D2 e|^2 >= 0``."""
        if self.AD is None:
            return 0.0
        x = np.asarray(xt, dtype=float)[:self.nx].reshape(self.n, self.m)
        e = np.einsum("nij,nj->ni", self.Hn, x).reshape(-1)
        r = self.AD @ e
        return self.ad_coef * float(r @ r)

    def midpoint_factor(self, dt: float):
        """Cached sparse LU of ``I - dt/2 A_d``."""
        key = ("lu", float(dt))
        if key not in self._cache:
            from scipy.sparse.linalg import splu
            A0 = (sps.identity(self.size, format="csc") - 0.5 * dt * self.A_d).tocsc()
            try:
                lu = splu(A0)
            except RuntimeError as exc:
                raise NumericError(f"midpoint matrix is singular for dt={dt}") from exc
            U = np.zeros((self.size, self.m_c))
            if self.m_c:
                U[self.nx + self.m_c:, :] = np.eye(self.m_c)
            Z = lu.solve(U) if self.m_c else U
            self._cache[key] = (lu, Z)
        return self._cache[key]


def _controller_blocks(controller, k):
    if controller is None:
        return 0, None
    if controller.k != k:
        raise InterconnectionError(
            f"plant port dimension k={k} != controller input dimension {controller.k}")
    return controller.m_c, controller


def discretize_closed_loop(system: PortHamiltonianSystem, controller: Controller | None, n: int,
                           scheme: str = "sbp-sat",
                           dissipation: float = DEFAULT_DISSIPATION) -> FiniteModel:
    """Assemble the semidiscrete closed loop on ``n`` uniform nodes.

    Parameters
    ----------
    system
        Plant.
    controller
        Controller, or ``None`` for the plant alone with ``u = d``.
    n
        Number of nodes (at least 16).
    scheme
        ``"sbp-sat"`` (default, ``N = 1`` only) or ``"central"``
        (experimental, any ``N``, no energy guarantee).
    dissipation
        Relative strength ``s`` of the artificial dissipation
        ``-s c_max W^{-1} (D2^T D2 (x) I) e`` acting on the effort, where
        ``D2`` is the undivided second difference and ``c_max`` the largest
        characteristic speed. It removes the undamped odd-even grid modes of
        the collocated scheme, is ``O(h^3)`` on smooth solutions and enters
        the energy rate as ``-s c_max |D2 e|^2 <= 0``. Only used by
        ``"sbp-sat"``; ``0`` gives the purely skew interior operator.
    """
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if n < MIN_NODES:
        raise ResolutionError(f"need at least {MIN_NODES} nodes, got {n}")
    m_c, controller = _controller_blocks(controller, system.k)
    if scheme == "sbp-sat" and system.N != 1:
        raise UnsupportedOrderError("the sbp-sat scheme needs N = 1; use scheme='central'")
    m, k = system.m, system.k
    zeta = np.linspace(system.a, system.b, n)
    h = float(zeta[1] - zeta[0])
    Hn = system.H(zeta)
    Hn = 0.5 * (Hn + np.transpose(Hn, (0, 2, 1)))
    Hblk = sps.block_diag(list(Hn), format="csr")
    nx = n * m
    size = nx + 2 * m_c

    L = np.vstack([system.W_B1, system.W_B2 + (controller.S_c @ system.W_C if controller
                                                else 0.0)])
    J = np.zeros((L.shape[0], k))
    J[system.W_B1.shape[0]:, :] = np.eye(k)

    if scheme == "sbp-sat":
        D, w = sbp_operator(n, h)
        T_e = np.zeros((2 * m, nx))
        T_e[:m, (n - 1) * m:] = np.eye(m)
        T_e[m:, :m] = np.eye(m)
        T_x = np.asarray((Hblk.T @ T_e.T).T)
        P1, P0 = system.P[1], system.P[0]
        Sigma = system.boundary_form()
        V_in = _incoming_basis(P1)
        LV = L @ V_in
        if LV.shape[0] != LV.shape[1]:
            raise AssemblyError("incoming characteristic count does not match boundary rows")
        s = np.linalg.svd(LV, compute_uv=False)
        if s.min() <= 1e-12 * max(1.0, s.max()):
            raise AssemblyError("boundary relation is not solvable along the incoming "
                                f"characteristics (smallest singular value {s.min():.3e})")
        Pi = V_in @ np.linalg.inv(LV)
        E_sat = np.zeros((nx, 2 * m))
        E_sat[(n - 1) * m:, :m] = np.eye(m) / w[-1]
        E_sat[:m, m:] = np.eye(m) / w[0]
        Pen = E_sat @ (2.0 * Sigma)
        A_plant = (sps.kron(D, sps.csr_matrix(P1)) + sps.kron(sps.identity(n), sps.csr_matrix(P0))) @ Hblk
        A_xx = A_plant - sps.csr_matrix(Pen @ Pi @ L @ T_x)
        if dissipation < 0:
            raise InputError("dissipation must be nonnegative")
        AD, ad_coef = None, 0.0
        if dissipation > 0:
            speed = max(float(np.max(np.abs(np.linalg.eigvals(P1 @ Hj)))) for Hj in Hn)
            ad_coef = float(dissipation) * speed
            D2 = sps.diags([np.ones(n - 2), -2.0 * np.ones(n - 2), np.ones(n - 2)], [0, 1, 2],
                           shape=(n - 2, n))
            AD = sps.kron(D2, sps.identity(m), format="csr")
            A_xx = A_xx - ad_coef * (sps.diags(np.repeat(1.0 / w, m)) @ (AD.T @ AD) @ Hblk)
        G_x = Pen @ Pi @ J
        corr = np.eye(2 * m) - Pi @ L
        Cy_x = system.W_C @ corr @ T_x
        order = 2
    else:
        warnings.warn("the central scheme is experimental and carries no energy guarantee",
                      stacklevel=2)
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        stencils = trace_stencils(zeta, system.N)
        T_e = np.zeros((2 * m * system.N, nx))
        for l, (idx_b, w_b, idx_a, w_a) in enumerate(stencils):
            for i in range(m):
                T_e[l * m + i, idx_b * m + i] = w_b
                T_e[m * system.N + l * m + i, idx_a * m + i] = w_a
        T_x = np.asarray((Hblk.T @ T_e.T).T)
        # least-norm correction of the nodal effort so that L z = r holds exactly
        LT = L @ T_e
        C = np.linalg.pinv(LT)
        if np.linalg.matrix_rank(LT) < L.shape[0]:
            raise AssemblyError("boundary relation cannot be imposed on the nodal values")
        Pi = T_e @ C
        Sigma = np.zeros((2 * m * system.N, 2 * m * system.N))
        A_plant = sps.csr_matrix((nx, nx))
        corr_e = np.eye(nx) - C @ L @ T_e
        for l, P in enumerate(system.P):
            Dl = _central_derivative(zeta, l)
            A_plant = A_plant + sps.kron(Dl, sps.csr_matrix(P))
        A_plant = A_plant.toarray()
        A_xx = sps.csr_matrix(A_plant @ corr_e @ Hblk.toarray())
        G_x = A_plant @ C @ J
        Pen = A_plant @ C
        Cy_x = system.W_C @ (T_x - Pi @ L @ T_x)
        AD, ad_coef = None, 0.0
        order = 2

    blocks = sps.lil_matrix((size, size))
    blocks[:nx, :nx] = A_xx
    G_d = np.zeros((size, k))
    G_d[:nx] = G_x
    Cy = np.zeros((k, size))
    Cy[:, :nx] = Cy_x
    Dy = system.W_C @ Pi @ J
    if controller is not None:
        K, B_c = controller.K, controller.B_c
        fb = J @ B_c.T @ K
        if scheme == "sbp-sat":
            blocks[:nx, nx + m_c:] = -Pen @ Pi @ fb
        else:
            blocks[:nx, nx + m_c:] = -Pen @ fb
        Cy[:, nx + m_c:] = -system.W_C @ Pi @ fb
        blocks[nx:nx + m_c, nx + m_c:] = K
        blocks[nx + m_c:, nx:nx + m_c] = -np.eye(m_c)
        blocks[nx + m_c:, :] = blocks[nx + m_c:, :].toarray() + B_c @ Cy
        G_d[nx + m_c:] = B_c @ Dy
    C_d = np.zeros((k, size))
    C_d[:, :nx] = system.W_C @ T_x
    Mblocks = [sps.diags(np.repeat(w, m)) @ Hblk]
    if controller is not None:
        Mblocks += [sps.identity(m_c), sps.csr_matrix(controller.K)]
    M = sps.block_diag(Mblocks, format="csr")
    return FiniteModel(system, controller, n, h, zeta, w, blocks.tocsr(), G_d, C_d, Cy, Dy, M,
                       scheme, order, Hn, T_x, Pi, L, J, Sigma, AD, ad_coef)


def _central_derivative(zeta, l):
    """Sparse ``l``-th derivative, centered inside and one-sided near the ends."""
    n = zeta.size
    if l == 0:
        return sps.identity(n, format="csr")
    width = l + 1 + (l + 1) % 2 + 1 if l > 1 else 3
    rows, cols, vals = [], [], []
    for i in range(n):
        lo = min(max(i - width // 2, 0), n - width)
        idx = np.arange(lo, lo + width)
        wts = fd_weights(zeta[i], zeta[idx], l)
        rows += [i] * width
        cols += list(idx)
        vals += list(wts)
    return sps.csr_matrix((vals, (rows, cols)), shape=(n, n))


def discrete_generator_spectrum(model: FiniteModel) -> np.ndarray:
    """Eigenvalues of ``A_d + DF(0)``, sorted by decreasing real part."""
    A = model.linearization()
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigensolver did not converge") from exc
    order = np.lexsort((ev.imag, -ev.real))
    return ev[order]


def oscillation_frequencies(eigenvalues, count: int | None = None, max_damping: float = 0.1,
                            tol: float = 1e-9) -> np.ndarray:
    """Imaginary parts of the lightly damped modes in increasing order.

    The penalty terms create strongly damped parasitic modes with small
    imaginary parts; only eigenvalues with damping ratio
    ``-Re(lambda) / |lambda| <= max_damping`` are kept.
    """
    ev = np.asarray(eigenvalues)
    keep = (ev.imag > tol) & (-ev.real <= max_damping * np.abs(ev))
    f = np.sort(ev.imag[keep])
    return f if count is None else f[:count]


@dataclass
class BalanceCheck:
    """Result of :func:`verify_semidiscrete_balance`.

    ``boundary_residual`` is the largest relative mismatch between the
    assembled energy rate and its closed-form identity; ``remainder`` the
    largest signed interior/boundary remainder ``q_h`` (nonpositive for
    dissipative plants) and ``dissipativity`` the largest
    ``x~^T M A_d x~ / ||x~||_M^2`` of the linear part.
    """

    boundary_residual: float
    abs_residual: float
    remainder: float
    dissipativity: float
    n_states: int


def verify_semidiscrete_balance(model: FiniteModel, n_random_states: int = 50, seed: int = 0,
                                state_scale: float = 1.0, d_scale: float = 1.0) -> BalanceCheck:
    """Compare the assembled energy rate with the closed-form identity on random states."""
    rng = np.random.default_rng(seed)
    worst_rel = worst_abs = 0.0
    worst_q = -np.inf
    worst_diss = -np.inf
    for _ in range(n_random_states):
        xt = state_scale * rng.standard_normal(model.size)
        d = d_scale * rng.standard_normal(model.k)
        t = model.balance_terms(xt, d)
        err = abs(t["rate"] - t["closed_form"])
        worst_abs = max(worst_abs, err)
        worst_rel = max(worst_rel, err / max(t["scale"], 1e-300))
        worst_q = max(worst_q, t["remainder"])
        nrm = float(xt @ (model.M @ xt))
        worst_diss = max(worst_diss, float(xt @ (model.M @ (model.A_d @ xt))) / nrm)
    if n_random_states == 0:
        worst_q = worst_diss = 0.0
    return BalanceCheck(worst_rel, worst_abs, worst_q, worst_diss, n_random_states)


def write_matrix_dump(model: FiniteModel, path) -> None:
    """Write ``A_d``, ``G_d``, ``C_d`` and ``M`` as dense plain-text blocks.

    Each block starts with a header line ``# <name> <rows> <cols>`` followed
    by ``rows`` lines of row-major values in ``%.17g``. A leading comment
    records the scheme, node count and dissipation coefficient.
    """
    with open(path, "w") as fh:
        fh.write(f"# hamport matrix dump scheme={model.scheme} n={model.n} h={model.h:.17g} "
                 f"ad_coef={model.ad_coef:.17g}\n")
        for name, mat in (("A_d", model.A_d), ("G_d", model.G_d), ("C_d", model.C_d),
                          ("M", model.M)):
            dense = mat.toarray() if sps.issparse(mat) else np.asarray(mat)
            fh.write(f"# {name} {dense.shape[0]} {dense.shape[1]}\n")
            np.savetxt(fh, dense, fmt="%.17g")


def read_matrix_dump(path) -> dict:
    """Inverse of :func:`write_matrix_dump`."""
    out, name, rows, buf = {}, None, 0, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# hamport"):
                continue
            if line.startswith("# "):
                parts = line[2:].split()
                name, rows, cols = parts[0], int(parts[1]), int(parts[2])
                buf = []
                if rows == 0:
                    out[name] = np.zeros((0, cols))
                continue
            buf.append([float(v) for v in line.split()])
            if len(buf) == rows:
                out[name] = np.array(buf)
    return out
