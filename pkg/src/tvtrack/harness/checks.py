"""
Named verification checks.

Every check returns a :class:`CheckResult`; multi-part checks carry their
sub-results in ``parts`` and pass only if every part passes. ``scale``
selects the replication count (``"desk"`` = 50, ``"paper"`` = 200).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .. import analysis
from ..analysis import (RegularizationEnsemble, error_inequalities, fit_through_origin,
                        measure_two_step_growth, polyak_closed_form, rotating_spectral_radius,
                        spectral_radius_2x2, track, two_step_matrix)
from ..problems import (OnlineNesterovFunction, RecordingOracle, Regularized,
                        RotatingQuadratic, SmoothnessProfile, TranslatingQuadratic,
                        central_difference_gradient)
from ..solvers import (Abstain, Alg, AlgParams, Olnm, Orgd, OrgdParams,
                       olnm_restart_length)
from ..synthetic import (LeastSquaresSequenceSpec, LogisticSequenceSpec,
                         build_least_squares_sequence, build_logistic_sequence, make_rng,
                         sample_haar_orthogonal)
from . import experiments
from .config import PAPER_SCALE_REPS, ExperimentConfig

DESK_REPS = 50
FIT_KAPPAS = tuple(float(k) for k in np.geomspace(10.0, 500.0, 8))
LS_KAPPAS = tuple(float(k) for k in np.geomspace(10.0, 1e4, 7))
OLNM_COEF = 6.0 + 4.0 * math.sqrt(2.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: object = None
    bound: object = None
    tolerance: object = None
    details: dict = field(default_factory=dict)
    parts: list = field(default_factory=list)

    def part(self, name) -> "CheckResult":
        for p in self.parts:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_json(self):
        out = {"name": self.name, "passed": bool(self.passed),
               "measured": _plain(self.measured), "bound": _plain(self.bound),
               "tolerance": _plain(self.tolerance)}
        if self.details:
            out["details"] = _plain(self.details)
        if self.parts:
            out["parts"] = [p.to_json() for p in self.parts]
        return out

    def line(self):
        return (f"{'PASS' if self.passed else 'FAIL'} {self.name}: measured={_short(self.measured)}"
                f" bound={_short(self.bound)} tolerance={_short(self.tolerance)}")


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    return v


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_short(x)}" for k, x in v.items()) + "}"
    return str(v)


def _combine(name, parts, **kw):
    return CheckResult(name, all(p.passed for p in parts), parts=parts, **kw)


def _reps(scale):
    return PAPER_SCALE_REPS if scale == "paper" else DESK_REPS


def _within(measured, target, rel):
    return abs(measured - target) <= rel * abs(target)


# --------------------------------------------------------------------------
# bounds on constructed instances

def ogd_tightness(scale="desk") -> CheckResult:
    """OGD on its own translating adversary trails at exactly ``sigma / (alpha mu)``."""
    L, kappa, sigma, horizon = 1.0, 500.0, 1.0, 10_000
    mu = L / kappa
    prof = SmoothnessProfile(L=L, mu=mu, sigma=sigma)
    parts = []
    for label, alpha in (("alpha=1/L", 1.0 / L), ("alpha=2/(mu+L)", 2.0 / (mu + L))):
        start = time.perf_counter()
        params = AlgParams.ogd(alpha)
        o = TranslatingQuadratic(prof, params)
        rep = track(Alg(params), o, horizon, np.zeros(2), window=100)
        elapsed = time.perf_counter() - start
        target = sigma / (alpha * mu)
        err = float(np.max(np.abs(rep.series["iterate_error"] - target)) / target)
        parts.append(CheckResult(f"exact_trailing[{label}]", err <= 1e-9, err, target, 1e-9,
                                 {"xi": o.xi}))
        parts.append(CheckResult(f"runtime[{label}]", elapsed < 1.0, elapsed, 1.0, None))
    return _combine("ogd_tightness", parts)


def two_step_convergence(scale="desk", seed=0) -> CheckResult:
    """OGD with ``alpha = 1/L`` solves the static rotating quadratic in two steps."""
    rng = make_rng(seed)
    worst = 0.0
    for kappa in (2.0, 10.0, 1e3):
        o = RotatingQuadratic(1.0 / kappa, 1.0)
        solver = Alg(AlgParams.ogd(1.0))
        for _ in range(100):
            x0 = rng.standard_normal(2) * 10.0 ** rng.uniform(-3, 3)
            s = solver.init(x0)
            s = solver.step(solver.step(s, o, 0), o, 1)
            worst = max(worst, float(np.linalg.norm(s.x_curr) / np.linalg.norm(x0)))
    return CheckResult("two_step_convergence", worst <= 1e-12, worst, 1e-12, None)


def polyak_divergence(scale="desk", seed=0) -> CheckResult:
    """Polyak's preset on the rotating quadratic: divergence, growth rate, and stability at kappa=5."""
    rng = make_rng(seed)
    parts = []
    x0 = rng.standard_normal(2)
    for kappa in (6.0, 10.0, 100.0):
        mu, L = 1.0 / kappa, 1.0
        params = AlgParams.polyak(mu, L)
        _, hit = measure_two_step_growth(params, mu, L, x0, max_steps=10_000, cap=1e6)
        parts.append(CheckResult(f"diverges[kappa={kappa:g}]", hit is not None,
                                 hit, 10_000, None, {"cap": 1e6}))
        factor, _ = measure_two_step_growth(params, mu, L, x0, max_steps=2_000, cap=1e250)
        closed = polyak_closed_form(kappa)
        rep = rotating_spectral_radius(params.alpha, params.beta, params.eta, mu, L)
        gap = abs(factor - closed) / closed
        parts.append(CheckResult(f"growth_matches_closed_form[kappa={kappa:g}]", gap <= 0.01,
                                 factor, closed, 0.01,
                                 {"relative_gap": gap, "two_step_spectral_radius": rep.rho}))
    mu, L = 0.2, 1.0
    params = AlgParams.polyak(mu, L)
    factor, hit = measure_two_step_growth(params, mu, L, x0, max_steps=10_000, cap=1e6)
    rho = rotating_spectral_radius(params.alpha, params.beta, params.eta, mu, L).rho
    parts.append(CheckResult("stable[kappa=5]", hit is None and rho < 1, rho, 1.0, None,
                             {"measured_growth": factor}))
    return _combine("polyak_divergence", parts)


def _adversarial_nesterov(kappa=500.0, a="quarter", d=1000, sigma=1.0, L=1.0):
    mu = L / kappa
    av = 0.25 * (L - mu) if a == "quarter" else 0.5 * (L + mu)
    return OnlineNesterovFunction(SmoothnessProfile(L=L, mu=mu, sigma=sigma), a_param=av, d=d)


def large_step_ogd_optimality(scale="desk") -> CheckResult:
    """OGD with ``alpha = 4/(L - mu)`` attains the universal lower bound on the online Nesterov function."""
    o = _adversarial_nesterov()
    L, mu = o.profile.L, o.profile.mu
    rep = track(Alg(AlgParams.ogd(4.0 / (L - mu))), o, 600, np.zeros(o.dimension), window=100)
    target = o.lower_bound()
    measured = rep.limsup["iterate_error"]
    gap = abs(measured - target) / target
    return CheckResult("large_step_ogd_optimality", gap <= 1e-4, measured, target, 1e-4,
                       {"relative_gap": gap})


def _all_solvers(o, x0):
    L, mu = o.profile.L, o.profile.mu
    kappa = L / mu
    T = olnm_restart_length(kappa)
    return [
        Alg(AlgParams.ogd(1.0 / L), "ogd_inverse_L"),
        Alg(AlgParams.ogd_optimal(mu, L), "ogd_optimal"),
        Alg(AlgParams.ogd(4.0 / (L - mu)), "ogd_large"),
        Alg(AlgParams.polyak(mu, L), "polyak"),
        Alg(AlgParams.nesterov(mu, L), "nesterov"),
        Olnm(T, "faithful"),
        Olnm(T, "every_step"),
        Orgd(OrgdParams(0.1 * L, x0, L)),
        Abstain(x0),
    ]


def universal_lower_bound(scale="desk") -> CheckResult:
    """Every implemented method errs by at least ``(sqrt(kappa) - 1) sigma / 2``."""
    o = _adversarial_nesterov()
    horizon = 600
    x0 = np.zeros(o.dimension)
    bound = o.lower_bound()
    slack = max(0.0, bound - o.truncated_lower_bound(horizon))
    parts = []
    for solver in _all_solvers(o, x0):
        rep = track(solver, o, horizon, x0, window=100)
        m = rep.limsup["iterate_error"]
        parts.append(CheckResult(f"above_bound[{solver.name}]", m >= bound - slack - 1e-12,
                                 m, bound, slack))
    return _combine("universal_lower_bound", parts, bound=bound, tolerance=slack)


# --------------------------------------------------------------------------
# sweeps

@lru_cache(maxsize=None)
def _sweep_fits(problem, solvers, reps, horizon, limsup="window", cycle=5, a="mid",
                kappas=FIT_KAPPAS):
    cfg = ExperimentConfig(problem=problem, seed=0, L=1.0, sigma=1.0, solvers=solvers,
                           horizon=horizon, replications=reps, random_x0=True, a=a,
                           limsup=limsup, cycle=cycle, sweep_param="kappa",
                           sweep_values=kappas, series="none")
    rows, diverged, fits = experiments.sweep(cfg)
    per_point = {}
    for r in rows:
        if r.metric_name == "limsup_estimate" and r.replication == -1 and \
                r.flags.startswith("mean;of=iterate_error"):
            solver = r.run_id.split(".")[1]
            per_point.setdefault(solver, {})[r.t] = r.value
    maxima = {}
    for r in rows:
        if r.metric_name == "limsup_estimate" and r.replication >= 0 and \
                "of=iterate_error" in r.flags:
            solver = r.run_id.split(".")[1]
            maxima.setdefault(solver, {})
            maxima[solver][r.t] = max(maxima[solver].get(r.t, 0.0), r.value)
    return fits, per_point, maxima


def _olnm_series_max(o, T, horizon, x0):
    rep = track(Olnm(T, "faithful"), o, horizon, x0, window=max(T, 100))
    return float(np.max(rep.series["iterate_error"]))


def olnm_upper_bound(scale="desk") -> CheckResult:
    """Faithful OLNM stays under ``(6 + 4 sqrt 2) sqrt(kappa) sigma``; fitted constants match."""
    reps = _reps(scale)
    parts = []
    worst = 0.0
    for kappa in (25.0, 100.0, 500.0):
        T = olnm_restart_length(kappa)
        bound = OLNM_COEF * math.sqrt(kappa)
        prof = SmoothnessProfile(L=1.0, mu=1.0 / kappa, sigma=1.0)
        tq = TranslatingQuadratic(prof, AlgParams.ogd(1.0), xi=0.0)
        onf = _adversarial_nesterov(kappa, a="mid")
        for label, o, horizon in (("translating", tq, 60 * T), ("online_nesterov", onf, 600)):
            m = _olnm_series_max(o, T, horizon, np.zeros(o.dimension))
            worst = max(worst, m / bound)
            parts.append(CheckResult(f"sup_below_bound[{label},kappa={kappa:g}]", m <= bound,
                                     m, bound, None, {"T": T}))
    fits_t, _, _ = _sweep_fits("translating", ("olnm",), reps, 1, "cycle", 60)
    fits_n, _, _ = _sweep_fits("online_nesterov", ("olnm",), reps, 600)
    for label, fit, target in (("online_nesterov", fits_n["olnm"], 2.491),
                               ("translating", fits_t["olnm"], 7.21)):
        parts.append(CheckResult(f"fit_constant[{label}]", _within(fit, target, 0.15),
                                 fit, target, 0.15, {"replications": reps}))
    return _combine("olnm_upper_bound", parts, details={"worst_ratio": worst})


def online_nesterov_slopes(scale="desk") -> CheckResult:
    """Fitted ``sqrt(kappa)`` constants of OGD and online Nesterov on the online Nesterov function."""
    reps = _reps(scale)
    fits, _, _ = _sweep_fits("online_nesterov", ("ogd", "nesterov"), reps, 600)
    parts = [CheckResult(f"fit_constant[{s}]", _within(fits[s], target, 0.15), fits[s],
                         target, 0.15, {"replications": reps})
             for s, target in (("ogd", 0.481), ("nesterov", 1.101))]
    return _combine("online_nesterov_slopes", parts)


def least_squares_ordering(scale="desk") -> CheckResult:
    """Random-walk least squares: Nesterov < OLNM(every step) < OGD, with separated bands."""
    reps = _reps(scale)
    cfg = ExperimentConfig(problem="least_squares", seed=0, L=1.0, sigma=1.0,
                           solvers=("nesterov", "olnm_every_step", "ogd"), replications=reps,
                           limsup="cycle", cycle=5, sweep_param="kappa",
                           sweep_values=LS_KAPPAS, fit="none", series="none")
    rows, _, _ = experiments.sweep(cfg)
    mean, err = {}, {}
    for r in rows:
        if r.metric_name == "limsup_estimate" and r.replication == -1 and \
                "of=iterate_error" in r.flags:
            s = r.run_id.split(".")[1]
            (mean if r.flags.startswith("mean") else err)[(s, r.t)] = r.value
    parts = []
    for k in LS_KAPPAS:
        n, o, g = (mean[(s, k)] for s in ("nesterov", "olnm_every_step", "ogd"))
        en, eo, eg = (err[(s, k)] for s in ("nesterov", "olnm_every_step", "ogd"))
        vals = {"nesterov": n, "olnm_every_step": o, "ogd": g}
        parts.append(CheckResult(f"nesterov_below_olnm[kappa={k:g}]", n < o, vals, None, None))
        parts.append(CheckResult(f"olnm_below_ogd[kappa={k:g}]", o < g, vals, None, None))
        if k >= 100:
            se = {"stderr": {"nesterov": en, "olnm_every_step": eo, "ogd": eg}}
            parts.append(CheckResult(f"separated_bands_nesterov_olnm[kappa={k:g}]",
                                     n + 2 * en < o - 2 * eo, vals, se, "2 stderr"))
            parts.append(CheckResult(f"separated_bands_olnm_ogd[kappa={k:g}]",
                                     o + 2 * eo < g - 2 * eg, vals, se, "2 stderr"))
    return _combine("least_squares_ordering", parts, details={"replications": reps})


def logistic_regularization(scale="desk", horizon=200) -> CheckResult:
    """Fixed-point regularization weight, ORGD and abstain bounds, and method ordering on logistic data."""
    reps = _reps(scale)
    cfg = ExperimentConfig(problem="logistic", seed=0, L=1.0, solvers=("ogd", "orgd", "abstain"),
                           horizon=horizon, replications=reps, series="none")
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        delta, ens = experiments.fixed_point_delta(cfg)
    h = ens.h(delta)
    s, R = ens.sigma_R(delta)
    ratio = s / R
    results = {r.solver: r for r in experiments.execute(cfg)}
    gmean = {k: v.summary.mean["gradient_error"] for k, v in results.items()}
    gerr = {k: v.summary.stderr["gradient_error"] for k, v in results.items()}
    orgd_bound = results["orgd"].bounds.orgd_upper
    abstain_bound = results["abstain"].bounds.abstain_upper
    parts = [
        CheckResult("fixed_point_root", abs(h) <= 1e-6, abs(h), 0.0, 1e-6,
                    {"delta_star": delta, "delta_over_L": delta / ens.L}),
        CheckResult("drift_radius_ratio", abs(ratio - 0.5) <= 0.1, ratio, 0.5, 0.1,
                    {"sigma": s, "R": R, "horizon": horizon}),
        CheckResult("orgd_bound", gmean["orgd"] <= orgd_bound, gmean["orgd"], orgd_bound, None),
        CheckResult("abstain_bound", gmean["abstain"] <= abstain_bound, gmean["abstain"],
                    abstain_bound, None),
        CheckResult("ogd_not_worse_than_orgd",
                    gmean["ogd"] <= gmean["orgd"] + 2 * math.hypot(gerr["ogd"], gerr["orgd"]),
                    gmean, None, "2 stderr"),
        CheckResult("orgd_below_abstain", gmean["orgd"] < gmean["abstain"], gmean, None, None),
    ]
    return _combine("logistic_regularization", parts, details={"replications": reps})


# --------------------------------------------------------------------------
# property suites

def _analytic_oracles(rng):
    kappa = 50.0
    prof = SmoothnessProfile(L=2.0, mu=2.0 / kappa, sigma=0.7)
    return [
        ("translating", TranslatingQuadratic(prof, AlgParams.nesterov(prof.mu, prof.L), d=3)),
        ("rotating", RotatingQuadratic(0.1, 3.0, sigma=0.0)),
        ("online_nesterov", OnlineNesterovFunction(prof, d=60)),
        ("least_squares", build_least_squares_sequence(
            LeastSquaresSequenceSpec(kappa=kappa, horizon=30, seed=int(rng.integers(1 << 30)),
                                     noise_std=0.0))),
    ]


def error_inequality_chain(scale="desk", seed=0) -> CheckResult:
    """``||g|| <= L||x - x*||``, ``f - f* <= L/2 ||x - x*||^2`` and ``||g||^2 <= 2L(f - f*)``."""
    rng = make_rng(seed)
    worst = math.inf
    for _, o in _analytic_oracles(rng):
        for _ in range(200):
            t = int(rng.integers(0, 30))
            x = o.minimizer(t) + rng.standard_normal(o.dimension) * 10.0 ** rng.uniform(-2, 1)
            slacks = error_inequalities(o, t, x)
            scale_ = max(1.0, abs(o.value(t, x)))
            worst = min(worst, min(slacks) / scale_)
    return CheckResult("error_inequality_chain", worst >= -1e-10, worst, 0.0, 1e-10)


def spectral_crosscheck(scale="desk", seed=0) -> CheckResult:
    """2x2 trace/determinant radius equals the 4x4 eigen-solve on 1000 random tuples."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(1000):
        L = 10.0 ** rng.uniform(-1, 2)
        mu = L / 10.0 ** rng.uniform(0, 4)
        alpha = rng.uniform(0.01, 4.0) / L
        beta, eta = rng.uniform(0, 1.0, 2)
        rep = rotating_spectral_radius(alpha, beta, eta, mu, L)
        worst = max(worst, abs(rep.rho - rep.rho_dense) / max(1.0, rep.rho))
    return CheckResult("spectral_crosscheck", worst <= 1e-10, worst, 0.0, 1e-10)


def gradient_finite_difference(scale="desk", seed=0) -> CheckResult:
    """Oracle gradients agree with central differences to ``1e-6`` relative."""
    rng = make_rng(seed)
    oracles = _analytic_oracles(rng)
    oracles.append(("logistic", build_logistic_sequence(
        LogisticSequenceSpec(L_target=1.0, horizon=30, seed=int(rng.integers(1 << 30))))))
    worst = 0.0
    for _, o in oracles:
        for _ in range(20):
            t = int(rng.integers(0, 30))
            x = rng.standard_normal(o.dimension)
            g = o.grad(t, x)
            fd = central_difference_gradient(o, t, x)
            worst = max(worst, float(np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g))))
    return CheckResult("gradient_finite_difference", worst <= 1e-6, worst, 0.0, 1e-6)


def haar_orthogonality(scale="desk", seed=0) -> CheckResult:
    """Sampled Haar matrices are orthogonal to ``1e-12``."""
    rng = make_rng(seed)
    worst = 0.0
    for n in (1, 2, 5, 20, 100):
        for _ in range(10):
            Q = sample_haar_orthogonal(n, rng)
            worst = max(worst, float(np.max(np.abs(Q.T @ Q - np.eye(n)))))
    return CheckResult("haar_orthogonality", worst <= 1e-12, worst, 0.0, 1e-12)


def drift_bounds(scale="desk", seed=0) -> CheckResult:
    """Consecutive minimizers of every analytic oracle move at most ``sigma``."""
    rng = make_rng(seed)
    worst = 0.0
    for _, o in _analytic_oracles(rng):
        xs = np.array([o.minimizer(t) for t in range(31)])
        steps = np.linalg.norm(np.diff(xs, axis=0), axis=1)
        sigma = o.profile.sigma
        excess = float(np.max(steps - sigma)) / max(sigma, 1.0)
        worst = max(worst, excess)
    return CheckResult("drift_bounds", worst <= 1e-12, worst, 0.0, 1e-12)


def olnm_stale_gradients(scale="desk") -> CheckResult:
    """OLNM queries only ``f_{T floor(t/T)}`` at step ``t``."""
    prof = SmoothnessProfile(L=1.0, mu=0.01, sigma=1.0)
    T = olnm_restart_length(prof.kappa)
    bad = 0
    for variant in ("faithful", "every_step"):
        rec = RecordingOracle(OnlineNesterovFunction(prof, d=200))
        track(Olnm(T, variant), rec, 5 * T + 3, np.zeros(200), eval_oracle=rec.base)
        expected = [T * (t // T) for t in range(5 * T + 3)]
        bad += sum(a != b for a, b in zip(rec.indices, expected)) + abs(len(rec.indices) - len(expected))
    return CheckResult("olnm_stale_gradients", bad == 0, bad, 0, None, {"T": T})


def orgd_equivalence(scale="desk", seed=0) -> CheckResult:
    """ORGD equals OGD with step ``2/(L + 2 delta)`` on the regularized sequence."""
    rng = make_rng(seed)
    worst = 0.0
    for _, o in _analytic_oracles(rng):
        x0 = rng.standard_normal(o.dimension)
        x_c = rng.standard_normal(o.dimension)
        L = o.profile.L
        delta = rng.uniform(0.01, 1.0) * L
        a = Orgd(OrgdParams(delta, x_c, L))
        b = Alg(AlgParams.ogd(2.0 / (L + 2 * delta)))
        reg = Regularized(o, delta, x_c)
        sa, sb = a.init(x0), b.init(x0)
        for t in range(30):
            sa, sb = a.step(sa, o, t), b.step(sb, reg, t)
            diff = np.linalg.norm(a.output(sa) - b.output(sb)) / max(1.0, np.linalg.norm(a.output(sa)))
            worst = max(worst, float(diff))
    return CheckResult("orgd_equivalence", worst <= 1e-12, worst, 0.0, 1e-12)


CHECKS: dict = {
    "ogd_tightness": ogd_tightness,
    "two_step_convergence": two_step_convergence,
    "polyak_divergence": polyak_divergence,
    "large_step_ogd_optimality": large_step_ogd_optimality,
    "universal_lower_bound": universal_lower_bound,
    "olnm_upper_bound": olnm_upper_bound,
    "online_nesterov_slopes": online_nesterov_slopes,
    "least_squares_ordering": least_squares_ordering,
    "logistic_regularization": logistic_regularization,
    "error_inequality_chain": error_inequality_chain,
    "spectral_crosscheck": spectral_crosscheck,
    "gradient_finite_difference": gradient_finite_difference,
    "haar_orthogonality": haar_orthogonality,
    "drift_bounds": drift_bounds,
    "olnm_stale_gradients": olnm_stale_gradients,
    "orgd_equivalence": orgd_equivalence,
}


def describe(name):
    doc = (CHECKS[name].__doc__ or "").strip().splitlines()
    return doc[0] if doc else name


def run_check(name, scale="desk") -> CheckResult:
    if name not in CHECKS:
        raise KeyError(name)
    return CHECKS[name](scale=scale)
