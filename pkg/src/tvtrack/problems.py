"""
Time-varying problem oracles.

A problem is a sequence of smooth convex functions ``f_t`` indexed by the
integer time ``t >= 0``. Every oracle here exposes the same small surface:

    value_and_grad(t, x) -> (f_t(x), grad f_t(x))
    minimizer(t)         -> x_t^*   (``None`` when not known in closed form)

and carries the class constants ``(L, mu, sigma)`` in a
:class:`SmoothnessProfile`. Oracles are immutable after construction, so one
instance can be shared by any number of solver runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SmoothnessProfile:
    """Class constants of a function sequence.

    Parameters
    ----------
    L : float
        Strong-smoothness constant (gradient Lipschitz constant).
    mu : float
        Strong-convexity constant, ``0 <= mu <= L``.
    sigma : float
        Bound on the per-step minimizer drift ``||x_{t+1}^* - x_t^*||``.
    """

    L: float
    mu: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive and finite, got {self.L}")
        if not (0 <= self.mu <= self.L):
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def kappa(self) -> Optional[float]:
        return self.L / self.mu if self.mu > 0 else None

    @classmethod
    def from_kappa(cls, L, kappa, sigma=0.0):
        return cls(L=L, mu=L / kappa, sigma=sigma)


class FunctionSequenceOracle:
    """Base class for time-indexed smooth convex problems.

    Subclasses implement :meth:`value_and_grad` and, when the minimizer
    trajectory is known exactly, :meth:`minimizer` with ``analytic = True``.
    """

    analytic = False

    def __init__(self, profile: SmoothnessProfile, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.profile = profile
        self.dimension = int(dimension)

    def value_and_grad(self, t, x):
        raise NotImplementedError

    def grad(self, t, x):
        return self.value_and_grad(t, x)[1]

    def value(self, t, x):
        return self.value_and_grad(t, x)[0]

    def minimizer(self, t):
        return None

    def min_value(self, t):
        xs = self.minimizer(t)
        return None if xs is None else self.value(t, xs)

    def check_point(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(
                f"expected a point of shape ({self.dimension},), got {x.shape}")
        if t < 0:
            raise ValueError(f"time index must be >= 0, got {t}")
        return x


def oracle_eval(oracle: FunctionSequenceOracle, t: int, x):
    """Evaluate ``(f_t(x), grad f_t(x))`` after validating ``t`` and ``x``."""
    x = oracle.check_point(t, x)
    value, grad = oracle.value_and_grad(int(t), x)
    return float(value), np.asarray(grad, dtype=float)


class QuadraticSequence(FunctionSequenceOracle):
    """``f_t(x) = 1/2 (x - m_t)^T H_t (x - m_t)`` with diagonal ``H_t``.

    Subclasses provide ``curvature(t)`` (the diagonal of ``H_t``) and
    ``center(t)`` (the minimizer ``m_t``).
    """

    analytic = True

    def curvature(self, t):
        raise NotImplementedError

    def center(self, t):
        raise NotImplementedError

    def value_and_grad(self, t, x):
        h = self.curvature(t)
        r = x - self.center(t)
        g = h * r
        return 0.5 * float(r @ g), g

    def minimizer(self, t):
        return self.center(t)

    def min_value(self, t):
        return 0.0

    def hessian(self, t):
        return np.diag(self.curvature(t))


class TranslatingQuadratic(QuadraticSequence):
    """Quadratic whose minimizer slides along ``e_1`` at speed ``sigma``.

    ``H = diag(mu, L, ..., L)`` and ``x_t^* = x0 + (t sigma + xi) e_1``,
    where ``xi = ((1 - beta) / (alpha mu) + eta) sigma`` is the distance at
    which ``ALG(alpha, beta, eta)`` started from ``x0`` trails the minimizer.
    """

    def __init__(self, profile, alg_params, x0=None, d=2, xi=None):
        if profile.mu <= 0:
            raise ValueError("translating quadratic needs mu > 0")
        alpha, beta, eta = _alg_triple(alg_params)
        if alpha <= 0:
            raise ValueError(f"step-size must be positive, got {alpha}")
        super().__init__(profile, d)
        self.alg_params = alg_params
        self.x0 = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
        if self.x0.shape != (d,):
            raise ValueError("x0 has the wrong dimension")
        if xi is None:
            xi = ((1.0 - beta) / (alpha * profile.mu) + eta) * profile.sigma
        self.xi = float(xi)
        self.direction = np.zeros(d)
        self.direction[0] = 1.0
        self._h = np.full(d, float(profile.L))
        self._h[0] = profile.mu

    def curvature(self, t):
        return self._h

    def center(self, t):
        return self.x0 + (t * self.profile.sigma + self.xi) * self.direction

    @property
    def previous_iterate(self):
        """Iterate ``x_{-1}`` that keeps momentum methods on the trailing orbit.

        The trailing identity needs ``x_{-1} - x_{-1}^* = -xi e_1`` with
        ``x_{-1}^* = x0 + (xi - sigma) e_1``, i.e. ``x_{-1} = x0 - sigma e_1``.
        """
        return self.x0 - self.profile.sigma * self.direction


class RotatingQuadratic(QuadraticSequence):
    """Two-dimensional quadratic alternating ``diag(L, mu)`` and ``diag(mu, L)``.

    The minimizer is the origin for all ``t``, so the sequence belongs to the
    class for every ``sigma >= 0``.
    """

    def __init__(self, mu, L, sigma=0.0):
        if mu <= 0:
            raise ValueError("rotating quadratic needs mu > 0")
        super().__init__(SmoothnessProfile(L=L, mu=mu, sigma=sigma), 2)
        self._even = np.array([L, mu], dtype=float)
        self._odd = np.array([mu, L], dtype=float)
        self._zero = np.zeros(2)

    def curvature(self, t):
        return self._even if t % 2 == 0 else self._odd

    def center(self, t):
        return self._zero


class OnlineNesterovFunction(FunctionSequenceOracle):
    """Adversarial sequence built from Nesterov's tridiagonal worst case.

    With ``gamma = (sqrt(kappa) - 1) / (sqrt(kappa) + 1)`` and
    ``gamma^c = sigma sqrt((1 + gamma) / (1 - gamma))``, ``f_t`` acts as
    ``a I`` on the first ``t`` coordinates and as
    ``(L - mu)/4 * tridiag(-1, 2, -1) + mu I`` on the rest. The exact
    minimizer in l2(N) is ``gamma^c`` on the first ``t`` coordinates and
    ``gamma^(i - t + c)`` for ``i > t``, so it advances by exactly ``sigma``
    per step. Here the operator is truncated to ``d`` coordinates and
    translated so a method started at ``x0`` sees the unshifted problem.
    """

    analytic = True

    def __init__(self, profile, a_param=None, x0_shift=None, d=1000):
        kappa = profile.kappa
        if kappa is None or kappa <= 1:
            raise ValueError("online Nesterov function needs kappa > 1")
        L, mu, sigma = profile.L, profile.mu, profile.sigma
        if a_param is None:
            a_param = 0.5 * (L + mu)
        if not (mu <= a_param <= L):
            raise ValueError(f"a must lie in [mu, L] = [{mu}, {L}], got {a_param}")
        if sigma <= 0:
            raise ValueError("online Nesterov function needs sigma > 0")
        super().__init__(profile, d)
        sk = math.sqrt(kappa)
        self.gamma = (sk - 1.0) / (sk + 1.0)
        self.gamma_c = sigma * math.sqrt((1 + self.gamma) / (1 - self.gamma))
        self.c_exponent = math.log(self.gamma_c) / math.log(self.gamma)
        self.a = float(a_param)
        self.q = 0.25 * (L - mu)
        self.shift = np.zeros(d) if x0_shift is None else np.array(x0_shift, dtype=float)
        if self.shift.shape != (d,):
            raise ValueError("x0_shift has the wrong dimension")
        # gamma^(j + c) for tail offset j = 1..d
        self._tail = self.gamma_c * self.gamma ** np.arange(1, d + 1)

    def _apply(self, t, u):
        """Return ``H_t u`` for the block operator."""
        t = min(t, self.dimension)
        out = np.empty_like(u)
        out[:t] = self.a * u[:t]
        y = u[t:]
        ty = (2.0 * self.q + self.profile.mu) * y
        ty[1:] -= self.q * y[:-1]
        ty[:-1] -= self.q * y[1:]
        out[t:] = ty
        return out

    def _linear(self, t):
        t = min(t, self.dimension)
        g = np.zeros(self.dimension)
        g[:t] = self.a * self.gamma_c
        if t < self.dimension:
            g[t] = self.q * self.gamma_c
        return g

    def value_and_grad(self, t, x):
        u = x - self.shift
        hu = self._apply(t, u)
        lin = self._linear(t)
        return 0.5 * float(u @ hu) - float(u @ lin), hu - lin

    def minimizer(self, t):
        d = self.dimension
        xs = np.full(d, self.gamma_c)
        if t < d:
            xs[t:] = self._tail[: d - t]
        return xs + self.shift

    def truncation_residual(self, t):
        """Gradient norm of ``f_t`` at :meth:`minimizer` due to truncation.

        Only the last row of the tail block is affected; the residual is
        ``(L - mu)/4 * gamma^(d + 1 - t + c)``.
        """
        if t >= self.dimension:
            return 0.0
        return self.q * self.gamma_c * self.gamma ** (self.dimension + 1 - t)

    def lower_bound(self):
        """``(sqrt(kappa) - 1) sigma / 2`` in l2(N)."""
        return 0.5 * (math.sqrt(self.profile.kappa) - 1.0) * self.profile.sigma

    def truncated_lower_bound(self, t):
        """Norm of the minimizer tail beyond coordinate ``t``.

        Any first-order method started at the shift leaves coordinates
        ``i > t`` untouched, so its iterate error is at least this value in
        the truncated space.
        """
        tail = self.minimizer(t)[t:] - self.shift[t:]
        return float(np.linalg.norm(tail))

    def hessian(self, t):
        d = self.dimension
        return np.column_stack([self._apply(t, col) for col in np.eye(d)])


def _alg_triple(params):
    if hasattr(params, "alpha"):
        return float(params.alpha), float(params.beta), float(params.eta)
    alpha, beta, eta = params
    return float(alpha), float(beta), float(eta)


def make_translating_quadratic(profile, alg_params, x0=None, d=2):
    """Build the translating adversary for ``ALG(alpha, beta, eta)``.

    Parameters
    ----------
    profile : SmoothnessProfile
        Needs ``mu > 0``; ``sigma`` is the translation speed.
    alg_params : AlgParams or tuple
        ``(alpha, beta, eta)`` the adversary is built against.
    x0 : array_like, optional
        Initial point of the method, zero by default.
    d : int
        Ambient dimension, at least 1.

    Returns
    -------
    TranslatingQuadratic
    """
    return TranslatingQuadratic(profile, alg_params, x0=x0, d=d)


def make_rotating_quadratic(mu, L):
    return RotatingQuadratic(mu, L)


def make_online_nesterov_function(profile, a_param=None, x0_shift=None, d=1000):
    return OnlineNesterovFunction(profile, a_param=a_param, x0_shift=x0_shift, d=d)


class Regularized(FunctionSequenceOracle):
    """``f_t + delta/2 ||x - x_c||^2`` wrapped around another oracle."""

    def __init__(self, base: FunctionSequenceOracle, delta: float, x_c=None):
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        p = base.profile
        super().__init__(SmoothnessProfile(L=p.L + delta, mu=p.mu + delta, sigma=0.0),
                         base.dimension)
        self.base = base
        self.delta = float(delta)
        self.x_c = np.zeros(base.dimension) if x_c is None else np.asarray(x_c, dtype=float)

    def value_and_grad(self, t, x):
        v, g = self.base.value_and_grad(t, x)
        r = x - self.x_c
        return v + 0.5 * self.delta * float(r @ r), g + self.delta * r


class RecordingOracle(FunctionSequenceOracle):
    """Pass-through oracle that logs every call.

    Used to confirm which time indices a solver queries and that it only
    sees gradients. Any access to the minimizer trajectory is recorded in
    ``peeked`` so tests can assert it stays empty.
    """

    def __init__(self, base: FunctionSequenceOracle):
        super().__init__(base.profile, base.dimension)
        self.base = base
        self.calls: list[tuple[int, np.ndarray]] = []
        self.gradients: list[np.ndarray] = []
        self.peeked: list[int] = []

    def value_and_grad(self, t, x):
        v, g = self.base.value_and_grad(t, x)
        self.calls.append((t, np.array(x, copy=True)))
        self.gradients.append(np.array(g, copy=True))
        return v, g

    def minimizer(self, t):
        self.peeked.append(t)
        return self.base.minimizer(t)

    @property
    def indices(self):
        return [t for t, _ in self.calls]


@dataclass
class SecantCheck:
    lipschitz_ratio: float
    monotone_ratio: float
    pairs: int = field(default=0)


def secant_constants(oracle, t, rng, pairs=1000, scale=1.0, center=None):
    """Largest Lipschitz ratio and smallest monotonicity ratio over random pairs.

    Returns ``max ||g(x)-g(y)|| / ||x-y||`` and
    ``min <g(x)-g(y), x-y> / ||x-y||^2`` over ``pairs`` Gaussian pairs.
    """
    d = oracle.dimension
    c = np.zeros(d) if center is None else center
    lip, mono = 0.0, math.inf
    for _ in range(pairs):
        x = c + scale * rng.standard_normal(d)
        y = c + scale * rng.standard_normal(d)
        gx = oracle.grad(t, x)
        gy = oracle.grad(t, y)
        dx = x - y
        nn = float(dx @ dx)
        lip = max(lip, float(np.linalg.norm(gx - gy)) / math.sqrt(nn))
        mono = min(mono, float((gx - gy) @ dx) / nn)
    return SecantCheck(lipschitz_ratio=lip, monotone_ratio=mono, pairs=pairs)


def central_difference_gradient(oracle, t, x, h=1e-6):
    """Central finite-difference gradient of ``f_t`` at ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        step = h * max(1.0, abs(x[i]))
        e[i] = step
        g[i] = (oracle.value(t, x + e) - oracle.value(t, x - e)) / (2 * step)
    return g
