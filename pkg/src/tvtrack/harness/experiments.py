"""
Build problems and solvers from an :class:`ExperimentConfig` and turn runs
into CSV rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .. import analysis
from ..analysis import DeltaInfo, RegularizationEnsemble, evaluate_bounds, track
from ..problems import (OnlineNesterovFunction, RotatingQuadratic, SmoothnessProfile,
                        TranslatingQuadratic)
from ..solvers import (Abstain, Alg, AlgParams, Olnm, Orgd, OrgdParams,
                       olnm_restart_length)
from ..synthetic import (LeastSquaresSequenceSpec, LogisticSequenceSpec,
                         build_least_squares_sequence, build_logistic_sequence,
                         export_instance_csv, make_rng, replicate)
from .config import ConfigError, ExperimentConfig
from .csvio import CsvRow

ALG_FAMILY = ("ogd", "polyak", "nesterov", "alg")


def kappa_of(cfg: ExperimentConfig) -> Optional[float]:
    mu = cfg.mu_value
    if cfg.problem == "logistic":
        return None
    if mu is None:
        raise ConfigError(f"problem {cfg.problem!r} needs mu or kappa")
    return cfg.L / mu


def alg_params(cfg: ExperimentConfig, name: str, mu: float, L: float) -> AlgParams:
    if name == "ogd":
        step = cfg.ogd_step
        if step == "optimal":
            alpha = 2.0 / (mu + L)
        elif step == "inverse_L":
            alpha = 1.0 / L
        elif step == "large":
            alpha = 4.0 / (L - mu)
        else:
            try:
                alpha = float(step)
            except ValueError as exc:
                raise ConfigError(f"bad ogd_step {step!r}") from exc
        return AlgParams.ogd(alpha)
    if name in ("polyak", "nesterov"):
        if mu <= 0:
            raise ConfigError(f"{name} preset needs mu > 0")
        return AlgParams.polyak(mu, L) if name == "polyak" else AlgParams.nesterov(mu, L)
    if name == "alg":
        return AlgParams(cfg.alpha, cfg.beta, cfg.eta)
    raise ValueError(name)


def restart_length(cfg: ExperimentConfig, kappa) -> Optional[int]:
    if cfg.olnm_T != "auto":
        try:
            return int(cfg.olnm_T)
        except ValueError as exc:
            raise ConfigError(f"bad olnm_T {cfg.olnm_T!r}") from exc
    if kappa is None:
        return None
    return olnm_restart_length(kappa)


def a_value(cfg, mu, L):
    if cfg.a == "mid":
        return 0.5 * (L + mu)
    if cfg.a == "quarter":
        return 0.25 * (L - mu)
    try:
        return float(cfg.a)
    except ValueError as exc:
        raise ConfigError(f"bad a {cfg.a!r}") from exc


@dataclass
class Instance:
    oracle: object
    x0: np.ndarray
    x_prev: Optional[np.ndarray] = None


def build_instance(cfg: ExperimentConfig, solver: str, seed: int) -> Instance:
    """Problem instance for one replication of ``solver``."""
    rng = make_rng(seed)
    L, mu, sigma = cfg.L, cfg.mu_value, cfg.sigma
    p = cfg.problem
    if p == "translating":
        d = cfg.d or 2
        prof = SmoothnessProfile(L=L, mu=mu, sigma=sigma)
        x0 = rng.standard_normal(d) if cfg.random_x0 else np.zeros(d)
        own = solver in ALG_FAMILY and cfg.translating_xi == "own"
        params = alg_params(cfg, solver, mu, L) if own else AlgParams.ogd(1.0 / L)
        o = TranslatingQuadratic(prof, params, x0=x0, d=d, xi=None if own else 0.0)
        return Instance(o, x0, o.previous_iterate if own else None)
    if p == "rotating":
        o = RotatingQuadratic(mu, L, sigma=sigma)
        x0 = rng.standard_normal(2) if cfg.random_x0 else np.ones(2)
        return Instance(o, x0)
    if p == "online_nesterov":
        d = cfg.d or 1000
        prof = SmoothnessProfile(L=L, mu=mu, sigma=sigma)
        shift = rng.standard_normal(d) if cfg.random_x0 else np.zeros(d)
        o = OnlineNesterovFunction(prof, a_param=a_value(cfg, mu, L), x0_shift=shift, d=d)
        return Instance(o, shift)
    if p == "least_squares":
        spec = LeastSquaresSequenceSpec(kappa=L / mu, horizon=horizon_for(cfg), seed=seed,
                                        n=cfg.n, d=cfg.d or 5, sigma=sigma,
                                        noise_std=cfg.noise_std)
        o = build_least_squares_sequence(spec)
        return Instance(o, o.minimizer(0).copy())
    if p == "logistic":
        spec = LogisticSequenceSpec(L_target=L, horizon=cfg.horizon, seed=seed, n=cfg.n,
                                    d=cfg.d or 5, flips_per_step=cfg.flips_per_step)
        o = build_logistic_sequence(spec)
        return Instance(o, np.zeros(o.dimension))
    raise ConfigError(p)


def horizon_for(cfg: ExperimentConfig) -> int:
    """Run length; in ``cycle`` mode it is ``cycle * T`` so the target cycle is complete."""
    if cfg.limsup == "cycle":
        T = restart_length(cfg, kappa_of(cfg))
        if T is None:
            raise ConfigError("limsup = cycle needs a restart length")
        return cfg.cycle * T
    return cfg.horizon


def window_for(cfg: ExperimentConfig) -> int:
    kappa = kappa_of(cfg)
    T = restart_length(cfg, kappa) if kappa is not None or cfg.olnm_T != "auto" else None
    if cfg.limsup == "cycle":
        return T
    if cfg.window != "auto":
        try:
            return int(cfg.window)
        except ValueError as exc:
            raise ConfigError(f"bad window {cfg.window!r}") from exc
    return max(T or 0, 100)


def primary_metric(cfg: ExperimentConfig) -> str:
    if cfg.metric != "auto":
        return cfg.metric
    return "gradient_error" if cfg.problem == "logistic" else "iterate_error"


def regularization_ensemble(cfg: ExperimentConfig, x_c_zero=True) -> RegularizationEnsemble:
    oracles = [build_instance(cfg, "orgd", cfg.seed + i).oracle for i in range(cfg.replications)]
    d = oracles[0].dimension
    return RegularizationEnsemble(oracles, horizon_for(cfg), x_c=np.zeros(d), L=cfg.L)


def fixed_point_delta(cfg: ExperimentConfig):
    """``delta*`` and the ensemble it was computed on."""
    ens = regularization_ensemble(cfg)
    delta = analysis.solve_delta_fixed_point(ens.h, ens.L, tol=1e-6)
    return delta, ens


def build_solver(cfg: ExperimentConfig, name: str, instance: Instance, delta=None):
    o = instance.oracle
    L, mu = cfg.L, cfg.mu_value or 0.0
    if cfg.problem in ("least_squares", "logistic"):
        L, mu = o.profile.L, o.profile.mu
    if name in ALG_FAMILY:
        return Alg(alg_params(cfg, name, mu, L), name=name)
    if name in ("olnm", "olnm_every_step"):
        T = restart_length(cfg, L / mu if mu > 0 else None)
        if T is None:
            raise ConfigError("OLNM needs kappa or an explicit olnm_T")
        return Olnm(T, "faithful" if name == "olnm" else "every_step", L=L, name=name)
    x_c = instance.x0 if cfg.x_c == "x0" else np.zeros(o.dimension)
    if name == "orgd":
        if delta is None:
            if cfg.orgd_delta == "auto":
                raise ConfigError("orgd_delta = auto must be resolved before building solvers")
            delta = float(cfg.orgd_delta)
        return Orgd(OrgdParams(delta, x_c, L))
    if name == "abstain":
        return Abstain(x_c)
    raise ConfigError(name)


class Experiment:
    """Picklable ``seed -> TrackingReport`` for one solver and config."""

    def __init__(self, cfg: ExperimentConfig, solver: str, delta=None):
        self.cfg = cfg
        self.solver = solver
        self.delta = delta

    def __call__(self, seed):
        cfg = self.cfg
        inst = build_instance(cfg, self.solver, seed)
        solver = build_solver(cfg, self.solver, inst, self.delta)
        horizon = horizon_for(cfg)
        report = track(solver, inst.oracle, horizon, inst.x0, x_prev=inst.x_prev,
                       window=window_for(cfg), rel_tol=cfg.rel_tol, cap=cfg.divergence_cap)
        report.solver = self.solver
        return report


@dataclass
class SolverResult:
    solver: str
    summary: object
    bounds: object
    rho: Optional[float] = None
    delta: Optional[float] = None


def _resolve_delta(cfg: ExperimentConfig):
    if "orgd" not in cfg.solvers and "abstain" not in cfg.solvers:
        return None, None
    if cfg.orgd_delta != "auto":
        return float(cfg.orgd_delta), None
    if "orgd" not in cfg.solvers:
        return None, None
    return fixed_point_delta(cfg)


def execute(cfg: ExperimentConfig):
    """Run every configured solver; returns a list of :class:`SolverResult`."""
    if cfg.seed is None:
        raise ConfigError("seed is mandatory")
    kappa = kappa_of(cfg)
    delta, ens = _resolve_delta(cfg)
    results = []
    for name in cfg.solvers:
        summary = replicate(Experiment(cfg, name, delta), cfg.replications, cfg.seed,
                            workers=cfg.workers)
        profile = build_instance(cfg, name, cfg.seed).oracle.profile
        ap = None
        if name in ALG_FAMILY and profile.mu >= 0:
            try:
                ap = alg_params(cfg, name, profile.mu, profile.L)
            except ConfigError:
                ap = None
        info = _delta_info(cfg, name, delta, ens)
        T = None
        if kappa is not None:
            try:
                T = restart_length(cfg, kappa)
            except ValueError:
                T = None
        bounds = evaluate_bounds(profile if cfg.problem != "logistic" else
                                 SmoothnessProfile(L=profile.L), ap, T, info)
        if name != "orgd":
            bounds = replace(bounds, orgd_upper=None, orgd_any_delta=None)
        rho = None
        if cfg.problem == "rotating" and ap is not None:
            rho = analysis.rotating_spectral_radius(ap.alpha, ap.beta, ap.eta,
                                                    profile.mu, profile.L).rho
        results.append(SolverResult(name, summary, bounds, rho, delta if name == "orgd" else None))
    return results


def _delta_info(cfg, name, delta, ens):
    if name not in ("orgd", "abstain"):
        return None
    if ens is None and cfg.problem == "logistic":
        ens = regularization_ensemble(cfg)
    if ens is not None:
        lo = 1e-4 * ens.L
        R0 = ens.sigma_R(lo)[1]
        if delta is None:
            return DeltaInfo(0.0, 0.0, R0, R0)
        s, R = ens.sigma_R(delta)
        return DeltaInfo(delta, s, R, R0)
    # strongly convex closed-form problems: x_t^*(0) is the minimizer itself
    inst = build_instance(cfg, name, cfg.seed)
    o = inst.oracle
    if not o.analytic:
        return None
    x_c = inst.x0 if cfg.x_c == "x0" else np.zeros(o.dimension)
    traj = np.array([o.minimizer(t) for t in range(horizon_for(cfg) + 1)])
    R0 = float(np.linalg.norm(traj - x_c, axis=1).max())
    return DeltaInfo(0.0, 0.0, R0, R0)


def run_id(cfg: ExperimentConfig, solver: str, tag: str = "") -> str:
    base = f"{cfg.problem}.{solver}"
    if tag:
        base += f".{tag}"
    return f"{base}.{cfg.digest()}"


def result_rows(cfg: ExperimentConfig, results, t_value=None, tag="", series=None):
    """CSV rows for a batch of solver results (series, per-rep limsup, aggregates, bounds)."""
    series = cfg.series if series is None else series
    rows = []
    for res in results:
        rid = run_id(cfg, res.solver, tag)
        summ = res.summary
        for rep, report in enumerate(summ.reports):
            if series == "all" or (series == "first" and rep == 0):
                for metric in ("iterate_error", "function_error", "gradient_error"):
                    s = report.series.get(metric)
                    if s is None:
                        continue
                    for t, v in enumerate(s):
                        rows.append(CsvRow(rid, rep, t, metric, v))
            for metric, v in report.limsup.items():
                flags = [f"of={metric}", f"converged={int(report.converged[metric])}"]
                if report.diverged:
                    flags.append(f"diverged@{report.diverged_at}")
                rows.append(CsvRow(rid, rep, t_value, "limsup_estimate", v, ";".join(flags)))
        for metric in sorted(summ.mean):
            extra = ";diverged" if summ.any_diverged else ""
            rows.append(CsvRow(rid, -1, t_value, "limsup_estimate", summ.mean[metric],
                               f"mean;of={metric}{extra}"))
            rows.append(CsvRow(rid, -1, t_value, "limsup_estimate", summ.stderr[metric],
                               f"stderr;of={metric}{extra}"))
        for name, v in res.bounds.as_dict().items():
            if v is None or name == "olnm_c":
                continue
            rows.append(CsvRow(rid, -1, t_value, "bound_value", v, f"bound={name}"))
        if res.rho is not None:
            rows.append(CsvRow(rid, -1, t_value, "rho", res.rho, ""))
        if res.delta is not None:
            rows.append(CsvRow(rid, -1, t_value, "bound_value", res.delta, "bound=delta_star"))
    return rows


def run(cfg: ExperimentConfig):
    """Execute ``cfg``; returns ``(rows, diverged)``."""
    results = execute(cfg)
    if cfg.export_instance and cfg.problem in ("least_squares", "logistic"):
        inst = build_instance(cfg, cfg.solvers[0], cfg.seed)
        prefix = cfg.output_path[:-4] if cfg.output_path.endswith(".csv") else cfg.output_path
        export_instance_csv(inst.oracle, prefix)
    diverged = any(r.summary.any_diverged for r in results)
    return result_rows(cfg, results), diverged


def grid_config(cfg: ExperimentConfig, value: float) -> ExperimentConfig:
    p = cfg.sweep_param
    if p == "kappa":
        return replace(cfg, kappa=value, mu=None)
    if p == "mu":
        return replace(cfg, mu=value, kappa=None)
    if p == "L":
        return replace(cfg, L=value)
    return replace(cfg, sigma=value)


def sweep(cfg: ExperimentConfig):
    """Sweep ``sweep_param`` over ``sweep_values``; returns ``(rows, diverged, fits)``.

    Each grid point gets the same summary rows as :func:`run` (with ``t``
    set to the grid value). Per solver, the mean limsup of the primary
    metric is regressed through the origin on ``sqrt(kappa)`` (or
    ``kappa``) and reported as a ``fit_constant`` row.
    """
    if cfg.sweep_param is None or not cfg.sweep_values:
        raise ConfigError("sweep needs sweep_param and a nonempty sweep_values")
    metric = primary_metric(cfg)
    rows, diverged = [], False
    pts = {s: ([], []) for s in cfg.solvers}
    for value in cfg.sweep_values:
        gcfg = grid_config(cfg, value)
        results = execute(gcfg)
        rows.extend(result_rows(gcfg, results, t_value=value, tag=f"grid{value:.17g}",
                                series="none"))
        kappa = kappa_of(gcfg)
        for r in results:
            diverged |= r.summary.any_diverged
            if kappa is not None and metric in r.summary.mean:
                x = math.sqrt(kappa) if cfg.fit == "sqrt_kappa" else kappa
                pts[r.solver][0].append(x)
                pts[r.solver][1].append(r.summary.mean[metric])
    fits = {}
    if cfg.fit != "none":
        for s, (xs, ys) in pts.items():
            if not xs:
                continue
            c = analysis.fit_through_origin(xs, ys)
            fits[s] = c
            flags = f"fit={cfg.fit};of={metric};points={len(xs)}"
            if len(xs) < 2:
                flags += ";insufficient_points"
            rows.append(CsvRow(run_id(cfg, s, "fit"), -1, None, "fit_constant", c, flags))
    return rows, diverged, fits
