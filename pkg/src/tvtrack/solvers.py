"""
Online first-order methods as single-step state machines.

Each method has a state dataclass, an ``*_init`` constructor and a
``*_step(state, ..., oracle, t)`` transition that consumes exactly one
gradient of ``f_t`` (or of a stale ``f_tau``, for OLNM) and returns the next
state. The small :class:`Solver` wrappers bundle parameters with these
functions so drivers can treat all methods uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

PRESETS = ("custom", "ogd", "polyak", "nesterov")


@dataclass(frozen=True)
class AlgParams:
    """Step-size ``alpha``, momentum ``beta`` and extrapolation-length ``eta``."""

    alpha: float
    beta: float = 0.0
    eta: float = 0.0
    preset: str = "custom"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0 or self.eta < 0:
            raise ValueError("beta and eta must be nonnegative")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")

    @classmethod
    def ogd(cls, alpha):
        return cls(alpha, 0.0, 0.0, "ogd")

    @classmethod
    def ogd_optimal(cls, mu, L):
        return cls.ogd(2.0 / (mu + L))

    @classmethod
    def polyak(cls, mu, L):
        sl, sm = math.sqrt(L), math.sqrt(mu)
        return cls(4.0 / (sl + sm) ** 2, ((sl - sm) / (sl + sm)) ** 2, 0.0, "polyak")

    @classmethod
    def nesterov(cls, mu, L):
        sl, sm = math.sqrt(L), math.sqrt(mu)
        b = (sl - sm) / (sl + sm)
        return cls(1.0 / L, b, b, "nesterov")


@dataclass(frozen=True)
class AlgState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray
    t: int = 0


def alg_init(x0, params: AlgParams, x_prev=None) -> AlgState:
    """Start ``ALG`` at ``x0``; ``x_prev`` defaults to ``x0`` (no initial velocity)."""
    x0 = np.array(x0, dtype=float)
    xp = x0.copy() if x_prev is None else np.array(x_prev, dtype=float)
    return AlgState(x0, xp, x0 + params.eta * (x0 - xp), 0)


def alg_step(state: AlgState, params: AlgParams, oracle, t=None) -> AlgState:
    """One step of ``ALG(alpha, beta, eta)`` against ``f_t``.

    ``x' = x - alpha grad f_t(y) + beta (x - x_prev)`` and
    ``y' = x' + eta (x' - x)``. Non-finite gradients are passed through so the
    driver can flag divergence.
    """
    t = state.t if t is None else t
    g = oracle.grad(t, state.y)
    x = state.x_curr
    x_new = x - params.alpha * g + params.beta * (x - state.x_prev)
    y_new = x_new + params.eta * (x_new - x)
    return AlgState(x_new, x, y_new, t + 1)


VARIANTS = ("faithful", "every_step")


@dataclass(frozen=True)
class OlnmState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a_t: float
    T: int
    t: int = 0
    variant: str = "faithful"

    @property
    def stale_index(self):
        return self.T * (self.t // self.T)


def olnm_restart_length(kappa) -> int:
    """Long-step length ``floor((2 + sqrt 2) sqrt kappa)``.

    The upper bound needs ``T > 2 sqrt(kappa)``; values below 3 are rejected.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    T = int(math.floor((2.0 + math.sqrt(2.0)) * math.sqrt(kappa)))
    if T < 3:
        raise ValueError(f"restart length {T} < 3 for kappa={kappa}")
    return T


def olnm_init(x0, T, variant="faithful") -> OlnmState:
    if int(T) < 1:
        raise ValueError("T must be a positive integer")
    if variant not in VARIANTS:
        raise ValueError(f"unknown OLNM variant {variant!r}")
    x0 = np.array(x0, dtype=float)
    return OlnmState(x0, x0.copy(), x0.copy(), 1.0, int(T), 0, variant)


def olnm_step(state: OlnmState, oracle, t=None, L=None) -> OlnmState:
    """One step of the online long-step Nesterov method.

    The gradient is always taken of the stale function ``f_{T floor(t/T)}``.
    Momentum is rebuilt from ``a = 1`` at every multiple of ``T``, which is
    also the only time the output iterate ``x`` moves in the ``faithful``
    variant. ``every_step`` copies ``z`` into ``x`` after each step.
    """
    t = state.t if t is None else t
    L = oracle.profile.L if L is None else L
    T = state.T
    tau = T * (t // T)
    z_new = state.y - oracle.grad(tau, state.y) / L
    if (t + 1) % T:
        a_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.a_t ** 2))
        y_new = z_new + ((state.a_t - 1.0) / a_new) * (z_new - state.z)
        x_new = z_new if state.variant == "every_step" else state.x
    else:
        a_new = 1.0
        y_new = z_new
        x_new = z_new
    return replace(state, x=x_new, y=y_new, z=z_new, a_t=a_new, t=t + 1)


@dataclass(frozen=True)
class OrgdParams:
    delta: float
    x_c: np.ndarray
    L: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def step_size(self):
        return 2.0 / (self.L + 2.0 * self.delta)


@dataclass(frozen=True)
class OrgdState:
    x: np.ndarray
    t: int = 0


def orgd_init(x0) -> OrgdState:
    return OrgdState(np.array(x0, dtype=float), 0)


def orgd_step(state: OrgdState, params: OrgdParams, oracle, t=None) -> OrgdState:
    """``x' = x - 2/(L + 2 delta) (grad f_t(x) + delta (x - x_c))``."""
    t = state.t if t is None else t
    g = oracle.grad(t, state.x)
    x_new = state.x - params.step_size * (g + params.delta * (state.x - params.x_c))
    return OrgdState(x_new, t + 1)


class Solver:
    """Uniform wrapper: ``init(x0)``, ``step(state, oracle, t)``, ``output(state)``."""

    name = "solver"

    def init(self, x0, **kwargs):
        raise NotImplementedError

    def step(self, state, oracle, t):
        raise NotImplementedError

    def output(self, state):
        raise NotImplementedError


class Alg(Solver):
    def __init__(self, params: AlgParams, name: Optional[str] = None):
        self.params = params
        self.name = name or (params.preset if params.preset != "custom" else "alg")

    def init(self, x0, x_prev=None):
        return alg_init(x0, self.params, x_prev=x_prev)

    def step(self, state, oracle, t):
        return alg_step(state, self.params, oracle, t)

    def output(self, state):
        return state.x_curr


class Olnm(Solver):
    def __init__(self, T: int, variant="faithful", L=None, name=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown OLNM variant {variant!r}")
        self.T = int(T)
        self.variant = variant
        self.L = L
        self.name = name or ("olnm" if variant == "faithful" else "olnm_every_step")

    def init(self, x0, **_):
        return olnm_init(x0, self.T, self.variant)

    def step(self, state, oracle, t):
        return olnm_step(state, oracle, t, L=self.L)

    def output(self, state):
        return state.x


class Orgd(Solver):
    def __init__(self, params: OrgdParams, name="orgd"):
        self.params = params
        self.name = name

    def init(self, x0, **_):
        return orgd_init(x0)

    def step(self, state, oracle, t):
        return orgd_step(state, self.params, oracle, t)

    def output(self, state):
        return state.x


class Abstain(Solver):
    """Non-tracking baseline ``x_t = x_c`` for all ``t``; never queries the oracle."""

    name = "abstain"

    def __init__(self, x_c):
        self.x_c = np.array(x_c, dtype=float)

    def init(self, x0=None, **_):
        return OrgdState(self.x_c.copy(), 0)

    def step(self, state, oracle, t):
        return OrgdState(state.x, t + 1)

    def output(self, state):
        return state.x
