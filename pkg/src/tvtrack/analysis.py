"""
Tracking-error bounds, stability of momentum methods, and empirical estimators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .problems import FunctionSequenceOracle, RotatingQuadratic, SmoothnessProfile
from .solvers import Alg, AlgParams, Olnm, Solver, olnm_restart_length

DIVERGENCE_CAP = 1e9


# --------------------------------------------------------------------------
# closed-form bounds

@dataclass(frozen=True)
class DeltaInfo:
    """Regularization summary used by the ORGD and abstain bounds."""

    delta: float
    sigma: float
    R: float
    R0: Optional[float] = None


@dataclass(frozen=True)
class BoundSet:
    """Evaluated bounds; ``None`` marks a bound that does not apply."""

    ogd_upper: Optional[float]
    ogd_optimal: Optional[float]
    lower_bound: Optional[float]
    olnm_upper: Optional[float]
    orgd_upper: Optional[float]
    abstain_upper: Optional[float]
    orgd_any_delta: Optional[float] = None
    olnm_c: Optional[float] = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def olnm_bound_coefficient(c):
    """``2c(c-1)/(c-2)`` for ``c > 2``."""
    if c <= 2:
        raise ValueError("OLNM bound needs c > 2")
    return 2.0 * c * (c - 1.0) / (c - 2.0)


def evaluate_bounds(profile: SmoothnessProfile, alg_params: Optional[AlgParams] = None,
                    T: Optional[int] = None, delta_info: Optional[DeltaInfo] = None) -> BoundSet:
    """Evaluate every tracking bound that applies to ``profile``.

    Parameters
    ----------
    profile : SmoothnessProfile
    alg_params : AlgParams, optional
        Step-size for the OGD bound; it applies only for
        ``0 < alpha <= 2 / (mu + L)``.
    T : int, optional
        OLNM long-step length; defaults to the restart-length rule when
        ``kappa`` is known. The bound needs ``T > 2 sqrt(kappa)``.
    delta_info : DeltaInfo, optional
        ``sigma(delta)``, ``R(delta)`` and optionally ``R(0)``.

    Returns
    -------
    BoundSet
    """
    L, mu, sigma = profile.L, profile.mu, profile.sigma
    kappa = profile.kappa
    ogd_upper = ogd_optimal = lower = olnm = c = None
    if kappa is not None:
        ogd_optimal = 0.5 * (kappa + 1.0) * sigma
        lower = 0.5 * (math.sqrt(kappa) - 1.0) * sigma
        if alg_params is not None and alg_params.beta == 0 and alg_params.eta == 0:
            if 0 < alg_params.alpha <= 2.0 / (mu + L) * (1 + 1e-12):
                ogd_upper = sigma / (alg_params.alpha * mu)
        if T is None:
            try:
                T = olnm_restart_length(kappa)
            except ValueError:
                T = None
        if T is not None:
            c = T / math.sqrt(kappa)
            if c > 2:
                olnm = olnm_bound_coefficient(c) * math.sqrt(kappa) * sigma
    orgd = abstain = orgd_any = None
    if delta_info is not None:
        orgd = 2.0 * math.sqrt(2.0) * L * math.sqrt(delta_info.sigma * delta_info.R)
        if delta_info.delta > 0:
            d = delta_info.delta
            orgd_any = d * delta_info.R + L * (L + 2 * d) * delta_info.sigma / (2 * d)
        if delta_info.R0 is not None:
            abstain = L * delta_info.R0
    return BoundSet(ogd_upper, ogd_optimal, lower, olnm, orgd, abstain, orgd_any, c)


# --------------------------------------------------------------------------
# rotating-quadratic stability

@dataclass(frozen=True)
class StabilityReport:
    a_plus: float
    a_minus: float
    b_plus: float
    b_minus: float
    rho: float
    rho_dense: float
    stable: bool
    polyak_closed_form: Optional[float] = None
    trace: float = 0.0
    det: float = 0.0

    @property
    def closed_form_gap(self):
        """Relative gap between the Polyak closed form and the true radius."""
        if self.polyak_closed_form is None:
            return None
        return abs(self.polyak_closed_form - self.rho) / self.rho


def two_step_matrix(alpha, beta, eta, mu, L):
    """4x4 map ``[x_{2t}; x_{2t+1}] -> [x_{2t+2}; x_{2t+3}]`` on the rotating quadratic."""
    ap = (1 + beta) - (1 + eta) * alpha * L
    am = (1 + beta) - (1 + eta) * alpha * mu
    bp = -beta + eta * alpha * L
    bm = -beta + eta * alpha * mu
    return np.array([
        [bm, 0.0, am, 0.0],
        [0.0, bp, 0.0, ap],
        [ap * bm, 0.0, ap * am + bp, 0.0],
        [0.0, am * bp, 0.0, ap * am + bm],
    ])


def spectral_radius_2x2(trace, det):
    """Largest root magnitude of ``lambda^2 - trace lambda + det``."""
    disc = trace * trace - 4.0 * det
    if disc >= 0:
        r = math.sqrt(disc)
        return max(abs(trace + r), abs(trace - r)) / 2.0
    return math.sqrt(det)


def polyak_closed_form(kappa):
    return 6.0 * ((math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)) ** 2


def rotating_spectral_radius(alpha, beta, eta, mu, L) -> StabilityReport:
    """Spectral radius of ALG's two-step map on the rotating quadratic.

    ``rho`` comes from the trace and determinant of the 2x2 block; it is
    cross-checked against a dense eigen-solve of the full 4x4 matrix
    (``rho_dense``). ``polyak_closed_form`` is filled in only when the
    parameters are the Polyak preset for ``(mu, L)``.
    """
    if not (0 < mu <= L):
        raise ValueError("need 0 < mu <= L")
    ap = (1 + beta) - (1 + eta) * alpha * L
    am = (1 + beta) - (1 + eta) * alpha * mu
    bp = -beta + eta * alpha * L
    bm = -beta + eta * alpha * mu
    tr = ap * am + bp + bm
    det = bp * bm
    rho = spectral_radius_2x2(tr, det)
    rho_dense = float(np.max(np.abs(np.linalg.eigvals(two_step_matrix(alpha, beta, eta, mu, L)))))
    polyak = AlgParams.polyak(mu, L)
    closed = None
    if (eta == 0 and math.isclose(alpha, polyak.alpha, rel_tol=1e-12)
            and math.isclose(beta, polyak.beta, rel_tol=1e-12, abs_tol=1e-15)):
        closed = polyak_closed_form(L / mu)
    return StabilityReport(ap, am, bp, bm, rho, rho_dense, rho < 1, closed, tr, det)


def measure_two_step_growth(params: AlgParams, mu, L, x0, max_steps=10_000,
                            cap=DIVERGENCE_CAP):
    """Run ALG on the rotating quadratic and measure the per-two-step growth.

    Returns ``(factor, diverged_at)`` where ``factor`` is the geometric mean of
    ``||z_{k+1}|| / ||z_k||`` over the second half of the recorded pairs
    ``z_k = [x_{2k}; x_{2k+1}]`` and ``diverged_at`` is the first step at which
    ``||x_t||`` exceeded ``cap`` (``None`` if never).
    """
    oracle = RotatingQuadratic(mu, L)
    solver = Alg(params)
    state = solver.init(x0)
    xs = [state.x_curr]
    diverged_at = None
    for t in range(max_steps):
        state = solver.step(state, oracle, t)
        x = state.x_curr
        xs.append(x)
        n = float(np.linalg.norm(x))
        if not math.isfinite(n) or n > cap:
            diverged_at = t + 1
            break
    pairs = len(xs) // 2
    z = np.array([np.linalg.norm(np.r_[xs[2 * k], xs[2 * k + 1]]) for k in range(pairs)])
    z = z[np.isfinite(z) & (z > 0)]
    if len(z) < 4:
        return math.nan, diverged_at
    k0 = len(z) // 2
    k1 = len(z) - 1
    factor = (z[k1] / z[k0]) ** (1.0 / (k1 - k0))
    return float(factor), diverged_at


# --------------------------------------------------------------------------
# tracking

class LimsupEstimate(NamedTuple):
    value: float
    converged: bool


def estimate_limsup(series, window=100, rel_tol=1e-3, cap=DIVERGENCE_CAP) -> LimsupEstimate:
    """Estimate ``limsup`` of an error series by its max over the trailing window.

    The estimate counts as converged when the max over the last two windows
    agrees with the max over the last window to ``rel_tol``. A series with
    non-finite entries or entries above ``cap`` yields ``(inf, False)``.
    """
    s = np.asarray(series, dtype=float)
    if s.size == 0:
        raise ValueError("empty series")
    if window < 1:
        raise ValueError("window must be >= 1")
    if not np.all(np.isfinite(s)) or (cap is not None and np.max(s) > cap):
        return LimsupEstimate(math.inf, False)
    last = float(np.max(s[-window:]))
    if s.size < 2 * window:
        return LimsupEstimate(last, False)
    both = float(np.max(s[-2 * window:]))
    scale = max(abs(last), abs(both))
    converged = abs(both - last) <= rel_tol * scale if scale > 0 else True
    return LimsupEstimate(last, bool(converged))


METRICS = ("iterate_error", "function_error", "gradient_error")


@dataclass
class TrackingReport:
    """Per-step errors of one run plus their limsup estimates."""

    solver: str
    series: dict
    limsup: dict
    converged: dict
    window: int
    horizon: int
    diverged: bool = False
    diverged_at: Optional[int] = None
    final_iterate: Optional[np.ndarray] = field(default=None, repr=False)

    def metric(self, name):
        return self.series.get(name)


def track(solver: Solver, oracle: FunctionSequenceOracle, horizon: int, x0,
          x_prev=None, window=100, rel_tol=1e-3, cap=DIVERGENCE_CAP,
          eval_oracle=None, limsup_upto=None) -> TrackingReport:
    """Run ``solver`` for ``horizon`` steps and record its tracking errors.

    Errors at time ``t`` compare the solver's output iterate ``x_t`` (before
    it consumes ``f_t``) with ``f_t``. Iterate and function errors are only
    recorded when the oracle knows its minimizers. The run stops early once
    ``||x_t||`` exceeds ``cap`` or turns non-finite.

    ``limsup_upto`` truncates the series used for the limsup estimate, e.g.
    to take the max over a specific cycle.
    """
    ev = oracle if eval_oracle is None else eval_oracle
    kwargs = {} if x_prev is None else {"x_prev": x_prev}
    state = solver.init(np.asarray(x0, dtype=float), **kwargs)
    have_min = ev.minimizer(0) is not None
    it_err, fn_err, gr_err = [], [], []
    diverged_at = None
    x = solver.output(state)
    for t in range(horizon):
        x = solver.output(state)
        n = float(np.linalg.norm(x))
        if not math.isfinite(n) or n > cap:
            diverged_at = t
            break
        v, g = ev.value_and_grad(t, x)
        gr_err.append(float(np.linalg.norm(g)))
        if have_min:
            xs = ev.minimizer(t)
            it_err.append(float(np.linalg.norm(x - xs)))
            fn_err.append(float(v - ev.min_value(t)))
        state = solver.step(state, oracle, t)
    series = {"gradient_error": np.array(gr_err)}
    if have_min:
        series["iterate_error"] = np.array(it_err)
        series["function_error"] = np.array(fn_err)
    limsup, conv = {}, {}
    for name, s in series.items():
        if diverged_at is not None:
            limsup[name], conv[name] = math.inf, False
        elif s.size:
            use = s if limsup_upto is None else s[:limsup_upto]
            est = estimate_limsup(use, window, rel_tol, cap=None)
            limsup[name], conv[name] = est.value, est.converged
    return TrackingReport(solver.name, series, limsup, conv, window, horizon,
                          diverged_at is not None, diverged_at, np.array(x))


def fit_through_origin(x, y):
    """Least-squares slope of ``y ~ c x`` with no intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(x @ y / (x @ x))


def error_inequalities(oracle, t, x):
    """Slacks of the three standard error inequalities at ``x`` (all >= 0 when they hold).

    Returns the triple
    ``L||x - x*|| - ||g||``, ``L/2 ||x - x*||^2 - (f - f*)`` and
    ``2L (f - f*) - ||g||^2``.
    """
    L = oracle.profile.L
    xs = oracle.minimizer(t)
    v, g = oracle.value_and_grad(t, x)
    gap = v - oracle.min_value(t)
    dist = float(np.linalg.norm(x - xs))
    gn = float(np.linalg.norm(g))
    return (L * dist - gn, 0.5 * L * dist * dist - gap, 2.0 * L * gap - gn * gn)


# --------------------------------------------------------------------------
# regularization

def batch_nesterov(grad: Callable, x0, L, mu, tol=1e-10, max_iter=100_000):
    """Constant-momentum Nesterov method for a ``mu``-strongly convex, ``L``-smooth map.

    ``grad`` may act on a stack of points (shape ``(m, d)``); iteration stops
    when every row's gradient norm is at most ``tol``.
    """
    q = math.sqrt(mu / L)
    beta = (1 - q) / (1 + q)
    x = np.array(x0, dtype=float)
    y = x.copy()
    for _ in range(max_iter):
        g = grad(y)
        x_new = y - g / L
        y = x_new + beta * (x_new - x)
        x = x_new
        if np.max(np.linalg.norm(np.atleast_2d(grad(x)), axis=-1)) <= tol:
            return x
    warnings.warn("batch_nesterov hit max_iter before reaching tolerance", RuntimeWarning)
    return x


def regularized_trajectory(oracle, delta, x_c, horizon, tol=1e-10):
    """Minimizers of ``f_t + delta/2 ||. - x_c||^2`` for ``t = 0..horizon``.

    Uses the oracle's own ``regularized_minimizers`` when available, the
    analytic minimizer when ``delta == 0`` and ``f_t`` is strongly convex,
    and the batch Nesterov method otherwise.
    """
    x_c = np.asarray(x_c, dtype=float)
    own = getattr(oracle, "regularized_minimizers", None)
    if own is not None:
        return own(delta, x_c, horizon=horizon, tol=tol)
    if delta == 0:
        if oracle.analytic and oracle.profile.mu > 0:
            return np.array([oracle.minimizer(t) for t in range(horizon + 1)])
        raise ValueError("delta = 0 needs strong convexity or a closed form")
    L, mu = oracle.profile.L + delta, oracle.profile.mu + delta
    out = []
    for t in range(horizon + 1):
        g = lambda x, t=t: oracle.grad(t, x) + delta * (x - x_c)
        out.append(batch_nesterov(g, x_c, L, mu, tol=tol))
    return np.array(out)


def drift_and_radius(trajectory, x_c):
    steps = np.linalg.norm(np.diff(trajectory, axis=0), axis=1)
    sigma = float(steps.max()) if steps.size else 0.0
    R = float(np.linalg.norm(trajectory - x_c, axis=1).max())
    return sigma, R


class RegularizationEnsemble:
    """Ensemble-averaged ``sigma(delta)`` and ``R(delta)`` over fixed problem instances.

    Averages are taken separately over the instances, matching the fixed-point
    equation written with expectations of ``sigma`` and ``R``.
    """

    def __init__(self, oracles: Sequence[FunctionSequenceOracle], horizon, x_c=None,
                 L=None, tol=1e-10):
        if not oracles:
            raise ValueError("empty ensemble")
        self.oracles = list(oracles)
        self.horizon = int(horizon)
        d = self.oracles[0].dimension
        self.x_c = np.zeros(d) if x_c is None else np.asarray(x_c, dtype=float)
        self.L = self.oracles[0].profile.L if L is None else L
        self.tol = tol
        self._cache = {}

    def per_instance(self, delta):
        key = float(delta)
        if key not in self._cache:
            self._cache[key] = np.array([
                drift_and_radius(regularized_trajectory(o, key, self.x_c, self.horizon, self.tol),
                                 self.x_c)
                for o in self.oracles])
        return self._cache[key]

    def sigma_R(self, delta):
        s, r = self.per_instance(delta).mean(axis=0)
        return float(s), float(r)

    def stderr(self, delta):
        v = self.per_instance(delta)
        if len(v) < 2:
            return 0.0, 0.0
        s, r = v.std(axis=0, ddof=1) / math.sqrt(len(v))
        return float(s), float(r)

    def h(self, delta):
        s, r = self.sigma_R(delta)
        return s / r - 2.0 * (delta / self.L) ** 2


@dataclass
class RegularizationCurve:
    deltas: np.ndarray
    sigma: np.ndarray
    R: np.ndarray
    L: float
    delta_star: Optional[float] = None

    @property
    def h(self):
        return self.sigma / self.R - 2.0 * (self.deltas / self.L) ** 2

    def h_at(self, delta):
        return float(np.interp(delta, self.deltas, self.h))

    def monotone_violation(self):
        """Largest relative increase of ``R`` between consecutive grid points."""
        inc = np.diff(self.R) / np.maximum(self.R[:-1], 1e-300)
        return float(max(inc.max(initial=0.0), 0.0))


def default_delta_grid(L, points=32, lo=1e-4):
    return L * np.geomspace(lo, 1.0, points)


def estimate_regularization_curve(problem_ensemble, delta_grid=None, horizon=None,
                                  replications=None, x_c=None, L=None, tol=1e-10,
                                  monotone_tol=1e-6) -> RegularizationCurve:
    """Estimate ``sigma(delta)`` and ``R(delta)`` on a grid of regularization weights.

    Parameters
    ----------
    problem_ensemble : RegularizationEnsemble, sequence of oracles, or callable
        A callable is treated as ``seed -> oracle`` and instantiated for
        ``replications`` seeds ``0..replications-1``.
    delta_grid : array_like, optional
        Defaults to 32 log-spaced values in ``[1e-4 L, L]``.
    horizon : int
        Last time index included in the suprema.
    """
    if isinstance(problem_ensemble, RegularizationEnsemble):
        ens = problem_ensemble
    else:
        if callable(problem_ensemble):
            if not replications:
                raise ValueError("a factory ensemble needs replications >= 1")
            oracles = [problem_ensemble(i) for i in range(replications)]
        else:
            oracles = list(problem_ensemble)
            if replications:
                oracles = oracles[:replications]
        if horizon is None:
            raise ValueError("horizon is required")
        ens = RegularizationEnsemble(oracles, horizon, x_c=x_c, L=L, tol=tol)
    if delta_grid is None:
        delta_grid = default_delta_grid(ens.L)
    deltas = np.sort(np.asarray(delta_grid, dtype=float))
    if deltas.size == 0:
        raise ValueError("empty delta grid")
    vals = np.array([ens.sigma_R(dl) for dl in deltas])
    curve = RegularizationCurve(deltas, vals[:, 0], vals[:, 1], ens.L)
    if curve.monotone_violation() > monotone_tol:
        warnings.warn("R(delta) increases on the grid beyond tolerance", RuntimeWarning)
    return curve


def solve_delta_fixed_point(curve_or_callable, L, tol=1e-6, delta_lo=None, max_iter=200):
    """Find ``delta`` in ``(0, L]`` with ``h(delta) = 0`` by bisection.

    ``curve_or_callable`` is either a :class:`RegularizationCurve` (``h`` is
    interpolated linearly on its grid) or a callable ``delta -> h(delta)``.
    If ``h`` does not change sign on ``[delta_lo, L]`` the grid point with the
    smallest ``|h|`` is returned with a warning.
    """
    if isinstance(curve_or_callable, RegularizationCurve):
        curve = curve_or_callable
        h = curve.h_at
        positive = curve.deltas[curve.deltas > 0]
        lo = float(positive[0]) if delta_lo is None else delta_lo
        grid = positive
    else:
        h = curve_or_callable
        lo = 1e-4 * L if delta_lo is None else delta_lo
        grid = np.geomspace(lo, L, 32)
    hi = float(L)
    h_lo, h_hi = h(lo), h(hi)
    if not (h_lo > 0 >= h_hi):
        warnings.warn("h has no sign change on [delta_lo, L]; returning the grid minimizer of |h|",
                      RuntimeWarning)
        vals = np.abs([h(g) for g in grid])
        return float(grid[int(np.argmin(vals))])
    if abs(h_hi) <= tol:
        return hi
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if abs(hm) <= tol:
            return mid
        if hm > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    return mid
