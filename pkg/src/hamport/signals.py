"""Square-integrable disturbance signals with exact norms.

Every signal provides its value, exact cell averages (used by the time
integrator), the exact squared norm ``||d||^2_{[0,t]}``, time shifts and
truncation. Noise is tabulated as a piecewise-constant path, so shifting by a
multiple of the table step re-indexes the table and is bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SignalSpecError

ALIGN_TOL = 1e-9
SIGNAL_KINDS = ("zero", "truncated_step", "exp_decay", "windowed_noise", "concat", "tabulated")


class DisturbanceSignal:
    """Base class; ``k`` is the number of components."""

    kind = "base"
    k: int

    def value(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def integral(self, t0: float, t1: float) -> np.ndarray:
        """``int_{t0}^{t1} d(s) ds`` for ``0 <= t0 <= t1``."""
        raise NotImplementedError

    def average(self, t0: float, t1: float) -> np.ndarray:
        """Cell average over ``[t0, t1]``."""
        return self.integral(t0, t1) / (t1 - t0)

    def norm2(self, t: float = np.inf) -> float:
        """Exact ``||d||^2_{[0, t], 2}``."""
        raise NotImplementedError

    def norm(self, t: float = np.inf) -> float:
        return float(np.sqrt(self.norm2(t)))

    def shift(self, s: float) -> "DisturbanceSignal":
        """The signal ``d(s + .)``."""
        if s < 0:
            raise SignalSpecError("shift must be nonnegative")
        if s == 0:
            return self
        return Shifted(self, float(s))

    def truncate(self, t_cut: float) -> "DisturbanceSignal":
        """``d`` on ``[0, t_cut)`` and zero afterwards."""
        return Concat(self, Zero(self.k), float(t_cut))

    def scaled(self, c: float) -> "DisturbanceSignal":
        return Scaled(self, float(c))

    def __call__(self, t):
        return self.value(t)


def _vec(amplitude, k):
    a = np.atleast_1d(np.asarray(amplitude, dtype=float))
    if k is not None and a.size == 1 and k > 1:
        a = np.full(k, float(a[0]))
    if not np.all(np.isfinite(a)):
        raise SignalSpecError("amplitude must be finite")
    return a


@dataclass(frozen=True, eq=False)
class Zero(DisturbanceSignal):
    k: int = 1
    kind = "zero"

    def value(self, t):
        return np.zeros(self.k)

    def integral(self, t0, t1):
        return np.zeros(self.k)

    def average(self, t0, t1):
        return np.zeros(self.k)

    def norm2(self, t=np.inf):
        return 0.0

    def shift(self, s):
        return self


@dataclass(frozen=True, eq=False)
class TruncatedStep(DisturbanceSignal):
    """Constant ``A`` on ``[start, start + duration)``."""

    amplitude: np.ndarray
    duration: float
    start: float = 0.0
    kind = "truncated_step"

    @property
    def k(self):
        return self.amplitude.size

    def _overlap(self, t0, t1):
        return max(0.0, min(t1, self.start + self.duration) - max(t0, self.start))

    def value(self, t):
        return self.amplitude.copy() if self.start <= t < self.start + self.duration \
            else np.zeros(self.k)

    def integral(self, t0, t1):
        return self.amplitude * self._overlap(t0, t1)

    def average(self, t0, t1):
        if self.start <= t0 and t1 <= self.start + self.duration:
            return self.amplitude.copy()
        return self.amplitude * (self._overlap(t0, t1) / (t1 - t0))

    def norm2(self, t=np.inf):
        return float(self.amplitude @ self.amplitude) * self._overlap(0.0, t)

    def shift(self, s):
        if s < 0:
            raise SignalSpecError("shift must be nonnegative")
        return TruncatedStep(self.amplitude, self.duration, self.start - s) if s else self


@dataclass(frozen=True, eq=False)
class ExpDecay(DisturbanceSignal):
    """``A exp(-rate (t - start))`` for ``t >= start``."""

    amplitude: np.ndarray
    rate: float
    start: float = 0.0
    kind = "exp_decay"

    @property
    def k(self):
        return self.amplitude.size

    def value(self, t):
        if t < self.start:
            return np.zeros(self.k)
        return self.amplitude * np.exp(-self.rate * (t - self.start))

    def _prim(self, t):
        # int_start^t exp(-rate (s - start)) ds
        return -np.expm1(-self.rate * (t - self.start)) / self.rate

    def integral(self, t0, t1):
        t0, t1 = max(t0, self.start), max(t1, self.start)
        return self.amplitude * (self._prim(t1) - self._prim(t0))

    def norm2(self, t=np.inf):
        lo = max(0.0, self.start)
        if t <= lo:
            return 0.0
        total = float(self.amplitude @ self.amplitude)

        def F(u):
            if np.isinf(u):
                return 1.0 / (2 * self.rate)
            return -np.expm1(-2 * self.rate * u) / (2 * self.rate)
        return total * (F(t - self.start) - F(lo - self.start))

    def shift(self, s):
        if s < 0:
            raise SignalSpecError("shift must be nonnegative")
        return ExpDecay(self.amplitude, self.rate, self.start - s) if s else self


@dataclass(frozen=True, eq=False)
class Tabulated(DisturbanceSignal):
    """Piecewise-constant path: ``values[j]`` on ``[t0 + j dt, t0 + (j+1) dt)``, zero elsewhere."""

    values: np.ndarray
    dt: float
    t0: float = 0.0
    kind = "tabulated"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if not np.all(np.isfinite(v)):
            raise SignalSpecError("tabulated values must be finite")
        if not self.dt > 0:
            raise SignalSpecError("table step must be positive")
        object.__setattr__(self, "values", v)

    @property
    def k(self):
        return self.values.shape[1]

    def _index(self, t):
        return int(np.floor((t - self.t0) / self.dt))

    def value(self, t):
        j = self._index(t)
        if 0 <= j < len(self.values):
            return self.values[j].copy()
        return np.zeros(self.k)

    def _aligned(self, t):
        q = (t - self.t0) / self.dt
        j = int(round(q))
        return j if abs(q - j) <= ALIGN_TOL else None

    def integral(self, t0, t1):
        j0, j1 = self._aligned(t0), self._aligned(t1)
        if j0 is not None and j1 == j0 + 1:
            return self.dt * self.value(self.t0 + (j0 + 0.5) * self.dt)
        out = np.zeros(self.k)
        n = len(self.values)
        lo = max(self._index(t0), 0)
        hi = min(self._index(t1), n - 1)
        for j in range(lo, hi + 1):
            a = max(t0, self.t0 + j * self.dt)
            b = min(t1, self.t0 + (j + 1) * self.dt)
            if b > a:
                out += self.values[j] * (b - a)
        return out

    def average(self, t0, t1):
        j0, j1 = self._aligned(t0), self._aligned(t1)
        if j0 is not None and j1 == j0 + 1:
            return self.value(self.t0 + (j0 + 0.5) * self.dt)
        return self.integral(t0, t1) / (t1 - t0)

    def norm2(self, t=np.inf):
        sq = np.einsum("ij,ij->i", self.values, self.values)
        n = len(self.values)
        starts = self.t0 + np.arange(n) * self.dt
        ends = starts + self.dt
        lo = np.maximum(starts, 0.0)
        hi = np.minimum(ends, t)
        return float(np.sum(sq * np.clip(hi - lo, 0.0, None)))

    def shift(self, s):
        if s < 0:
            raise SignalSpecError("shift must be nonnegative")
        if s == 0:
            return self
        q = s / self.dt
        j = int(round(q))
        if abs(q - j) <= ALIGN_TOL and self.t0 == 0.0:
            return Tabulated(self.values[j:] if j < len(self.values) else
                             np.zeros((0, self.k)), self.dt, 0.0)
        return Tabulated(self.values, self.dt, self.t0 - s)


@dataclass(frozen=True, eq=False)
class Concat(DisturbanceSignal):
    """``u`` on ``[0, tau)`` followed by ``v(. - tau)``."""

    first: DisturbanceSignal
    second: DisturbanceSignal
    tau: float
    kind = "concat"

    def __post_init__(self):
        if self.first.k != self.second.k:
            raise SignalSpecError("concatenated signals need equal dimensions")
        if self.tau < 0:
            raise SignalSpecError("splice time must be nonnegative")

    @property
    def k(self):
        return self.first.k

    def value(self, t):
        return self.first.value(t) if t < self.tau else self.second.value(t - self.tau)

    def integral(self, t0, t1):
        if t1 <= self.tau:
            return self.first.integral(t0, t1)
        if t0 >= self.tau:
            return self.second.integral(t0 - self.tau, t1 - self.tau)
        return self.first.integral(t0, self.tau) + self.second.integral(0.0, t1 - self.tau)

    def average(self, t0, t1):
        if t1 <= self.tau:
            return self.first.average(t0, t1)
        if t0 >= self.tau:
            return self.second.average(t0 - self.tau, t1 - self.tau)
        return self.integral(t0, t1) / (t1 - t0)

    def norm2(self, t=np.inf):
        if t <= self.tau:
            return self.first.norm2(t)
        return self.first.norm2(self.tau) + self.second.norm2(t - self.tau)


@dataclass(frozen=True, eq=False)
class Shifted(DisturbanceSignal):
    """``base(s + .)`` for signals without an exact shift."""

    base: DisturbanceSignal
    s: float
    kind = "shifted"

    @property
    def k(self):
        return self.base.k

    def value(self, t):
        return self.base.value(t + self.s)

    def integral(self, t0, t1):
        return self.base.integral(t0 + self.s, t1 + self.s)

    def average(self, t0, t1):
        return self.base.average(t0 + self.s, t1 + self.s)

    def norm2(self, t=np.inf):
        return self.base.norm2(t + self.s) - self.base.norm2(self.s)


@dataclass(frozen=True, eq=False)
class Scaled(DisturbanceSignal):
    base: DisturbanceSignal
    c: float
    kind = "scaled"

    @property
    def k(self):
        return self.base.k

    def value(self, t):
        return self.c * self.base.value(t)

    def integral(self, t0, t1):
        return self.c * self.base.integral(t0, t1)

    def average(self, t0, t1):
        return self.c * self.base.average(t0, t1)

    def norm2(self, t=np.inf):
        return self.c * self.c * self.base.norm2(t)

    def shift(self, s):
        return Scaled(self.base.shift(s), self.c)


@dataclass(frozen=True, eq=False)
class Sum(DisturbanceSignal):
    """Pointwise sum of two signals; the norm is evaluated on a fine quadrature."""

    first: DisturbanceSignal
    second: DisturbanceSignal
    kind = "sum"

    @property
    def k(self):
        return self.first.k

    def value(self, t):
        return self.first.value(t) + self.second.value(t)

    def integral(self, t0, t1):
        return self.first.integral(t0, t1) + self.second.integral(t0, t1)

    def average(self, t0, t1):
        return self.first.average(t0, t1) + self.second.average(t0, t1)

    def norm2(self, t=np.inf):
        raise NotImplementedError("norm of a sum is not available in closed form")

    def shift(self, s):
        return Sum(self.first.shift(s), self.second.shift(s))


def windowed_noise(amplitude, window: float, seed: int, dt: float = 0.01, k: int | None = None,
                   ) -> Tabulated:
    """Gaussian white-noise path on ``[0, window)``, tabulated with step ``dt``."""
    amp = _vec(amplitude, k)
    if window < 0 or dt <= 0:
        raise SignalSpecError("window must be nonnegative and dt positive")
    n = int(round(window / dt))
    if abs(n * dt - window) > ALIGN_TOL * max(1.0, window):
        raise SignalSpecError("noise window must be a multiple of the table step")
    rng = np.random.default_rng(seed)
    return Tabulated(rng.standard_normal((n, amp.size)) * amp, dt, 0.0)


def make_signal(spec) -> DisturbanceSignal:
    """Build a signal from a dict (or pass a signal through).

    Keys: ``kind`` plus ``amplitude``, ``duration``, ``rate``, ``start``,
    ``window``, ``seed``, ``dt``, ``k``, ``values``, ``first``, ``second``,
    ``tau`` as applicable.
    """
    if isinstance(spec, DisturbanceSignal):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SignalSpecError("signal spec must be a dict with a 'kind' key")
    kind = spec["kind"]
    k = spec.get("k")
    k = None if k is None else int(k)
    for key in ("duration", "rate", "window", "dt", "tau"):
        if key in spec:
            val = float(spec[key])
            if not np.isfinite(val) or val < 0:
                raise SignalSpecError(f"{key} must be finite and nonnegative, got {spec[key]}")
    if kind == "zero":
        return Zero(k or 1)
    if kind == "truncated_step":
        return TruncatedStep(_vec(spec.get("amplitude", 1.0), k), float(spec.get("duration", 1.0)),
                             float(spec.get("start", 0.0)))
    if kind == "exp_decay":
        rate = float(spec.get("rate", 1.0))
        if rate <= 0:
            raise SignalSpecError("exp_decay rate must be positive for a square-integrable signal")
        return ExpDecay(_vec(spec.get("amplitude", 1.0), k), rate, float(spec.get("start", 0.0)))
    if kind == "windowed_noise":
        if "seed" not in spec:
            raise SignalSpecError("windowed_noise needs a seed")
        return windowed_noise(spec.get("amplitude", 1.0), float(spec.get("window", 1.0)),
                              int(spec["seed"]), float(spec.get("dt", 0.01)), k)
    if kind == "tabulated":
        return Tabulated(np.asarray(spec["values"], dtype=float), float(spec["dt"]),
                         float(spec.get("t0", 0.0)))
    if kind == "concat":
        return Concat(make_signal(spec["first"]), make_signal(spec["second"]), float(spec["tau"]))
    raise SignalSpecError(f"unknown signal kind {kind!r}; choose from {SIGNAL_KINDS}")
