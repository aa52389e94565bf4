"""
Data-driven time-varying problems: random-walk least squares and
label-flipping logistic regression, plus Monte-Carlo replication.

All randomness flows from a counter-based Philox generator seeded with the
spec's ``seed``, so an instance is a pure function of its spec.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .problems import FunctionSequenceOracle, SmoothnessProfile


def make_rng(seed) -> np.random.Generator:
    """Generator used throughout the package: Philox keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_haar_orthogonal(n, rng):
    """Haar-distributed orthogonal ``n x n`` matrix.

    QR of a standard Gaussian matrix, with columns multiplied by the signs of
    ``diag(R)`` so the factorization is unique and the law is exactly Haar.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _design_matrix(n, d, singular_values, rng):
    U = sample_haar_orthogonal(n, rng)
    V = sample_haar_orthogonal(d, rng)
    return (U[:, :d] * singular_values) @ V.T


def unit_sphere(d, rng):
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


# --------------------------------------------------------------------------
# least squares

@dataclass(frozen=True)
class LeastSquaresSequenceSpec:
    kappa: float
    horizon: int
    seed: int
    n: int = 20
    d: int = 5
    sigma: float = 1.0
    noise_std: float = 1e-3

    def __post_init__(self):
        if self.d > self.n:
            raise ValueError("need d <= n for a full-column-rank design")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")


class LeastSquaresSequence(FunctionSequenceOracle):
    """``f_t(x) = 1/2 ||A x - b_t||^2`` with fixed ``A`` and moving outputs."""

    analytic = True

    def __init__(self, A, B, walk, sigma):
        s = np.linalg.svd(A, compute_uv=False)
        super().__init__(SmoothnessProfile(L=float(s[0] ** 2), mu=float(s[-1] ** 2),
                                           sigma=float(sigma)), A.shape[1])
        self.A = A
        self.B = B
        self.walk = walk
        self._gram = A.T @ A
        self._minimizers = np.linalg.solve(self._gram, A.T @ B.T).T

    @property
    def horizon(self):
        return self.B.shape[0] - 1

    def _row(self, t):
        if t > self.horizon:
            raise ValueError(f"t={t} beyond the generated horizon {self.horizon}")
        return self.B[t]

    def value_and_grad(self, t, x):
        r = self.A @ x - self._row(t)
        return 0.5 * float(r @ r), self.A.T @ r

    def minimizer(self, t):
        self._row(t)
        return self._minimizers[t]

    def min_value(self, t):
        r = self.A @ self._minimizers[t] - self.B[t]
        return 0.5 * float(r @ r)

    def regularized_minimizers(self, delta, x_c, horizon=None, tol=None):
        h = self.horizon if horizon is None else horizon
        M = self._gram + delta * np.eye(self.dimension)
        rhs = self.A.T @ self.B[: h + 1].T + delta * np.asarray(x_c)[:, None]
        return np.linalg.solve(M, rhs).T


def build_least_squares_sequence(spec: LeastSquaresSequenceSpec) -> LeastSquaresSequence:
    """Random-walk least-squares instance.

    ``A = U diag(s) V^T`` with Haar ``U``, ``V`` and singular values equally
    spaced on ``[1/sqrt(kappa), 1]``. The walk starts at the all-ones vector
    and moves by ``sigma`` times a uniform unit vector per step; outputs get
    fresh i.i.d. Gaussian noise of standard deviation ``noise_std``.
    """
    rng = make_rng(spec.seed)
    s = np.linspace(1.0 / math.sqrt(spec.kappa), 1.0, spec.d)[::-1]
    A = _design_matrix(spec.n, spec.d, s, rng)
    walk = np.empty((spec.horizon + 1, spec.d))
    walk[0] = 1.0
    for t in range(spec.horizon):
        walk[t + 1] = walk[t] + spec.sigma * unit_sphere(spec.d, rng)
    noise = spec.noise_std * rng.standard_normal((spec.horizon + 1, spec.n))
    B = walk @ A.T + noise
    return LeastSquaresSequence(A, B, walk, spec.sigma)


# --------------------------------------------------------------------------
# logistic regression

@dataclass(frozen=True)
class LogisticSequenceSpec:
    L_target: float
    horizon: int
    seed: int
    n: int = 20
    d: int = 5
    flips_per_step: int = 1

    def __post_init__(self):
        if self.d > self.n:
            raise ValueError("need d <= n")
        if not self.L_target > 0:
            raise ValueError("L_target must be positive")
        if not (0 <= self.flips_per_step <= self.n):
            raise ValueError("flips_per_step must lie in [0, n]")


class LogisticSequence(FunctionSequenceOracle):
    """``f_t(x) = (1/n) sum_i log(1 + exp(-b_i^(t) <a_i, x>))``.

    The profile uses ``L = ||A||^2 / 4`` and ``mu = 0``; ``sigma`` is unknown
    (``nan``) because the unregularized minimizer has no closed form and may
    not exist.
    """

    def __init__(self, A, labels, flips):
        L = float(np.linalg.norm(A, 2) ** 2 / 4.0)
        super().__init__(SmoothnessProfile(L=L, mu=0.0, sigma=math.nan), A.shape[1])
        self.A = A
        self.labels = labels
        self.flips = flips
        self.n = A.shape[0]
        # Hessian is at most A^T A / (4n)
        self.curvature_bound = L / self.n

    @property
    def horizon(self):
        return self.labels.shape[0] - 1

    def _row(self, t):
        if t > self.horizon:
            raise ValueError(f"t={t} beyond the generated horizon {self.horizon}")
        return self.labels[t]

    def value_and_grad(self, t, x):
        b = self._row(t)
        m = b * (self.A @ x)
        v = float(np.mean(np.logaddexp(0.0, -m)))
        g = -(self.A.T @ (b * expit(-m))) / self.n
        return v, g

    def _stack_value(self, X, B, delta, x_c):
        m = B * (X @ self.A.T)
        r = X - x_c
        return np.mean(np.logaddexp(0.0, -m), axis=1) + 0.5 * delta * np.sum(r * r, axis=1)

    def regularized_minimizers(self, delta, x_c, horizon=None, tol=1e-10, max_iter=200):
        """Minimizers of ``f_t + delta/2 ||x - x_c||^2`` for all ``t <= horizon``.

        Damped Newton iteration applied to every time index at once, with a
        per-row Armijo backtracking line search.
        """
        if delta <= 0:
            raise ValueError("logistic regularized minimizers need delta > 0")
        h = self.horizon if horizon is None else horizon
        B = self.labels[: h + 1]
        A, n, d = self.A, self.n, self.dimension
        x_c = np.asarray(x_c, dtype=float)
        X = np.tile(x_c, (B.shape[0], 1))
        eye = np.eye(d)
        for _ in range(max_iter):
            m = B * (X @ A.T)
            p = expit(-m)
            G = -((B * p) @ A) / n + delta * (X - x_c)
            if np.max(np.linalg.norm(G, axis=1)) <= tol:
                return X
            w = p * (1.0 - p) / n
            H = np.einsum("mk,ki,kj->mij", w, A, A) + delta * eye
            D = np.linalg.solve(H, G[..., None])[..., 0]
            slope = np.sum(G * D, axis=1)
            F0 = self._stack_value(X, B, delta, x_c)
            step = np.ones(B.shape[0])
            for _ in range(40):
                Xn = X - step[:, None] * D
                Fn = self._stack_value(Xn, B, delta, x_c)
                ok = Fn <= F0 - 1e-4 * step * slope + 1e-15 * np.abs(F0)
                if ok.all():
                    break
                step = np.where(ok, step, 0.5 * step)
            X = Xn
        return X


def build_logistic_sequence(spec: LogisticSequenceSpec) -> LogisticSequence:
    """Label-flipping logistic instance.

    Singular values are uniform on (0, 1) and rescaled so the realized
    maximum equals ``2 sqrt(L_target)``; initial labels are Rademacher and
    ``flips_per_step`` distinct labels, chosen uniformly, flip at each step.
    """
    rng = make_rng(spec.seed)
    s = rng.uniform(0.0, 1.0, spec.d)
    s *= 2.0 * math.sqrt(spec.L_target) / s.max()
    A = _design_matrix(spec.n, spec.d, s, rng)
    labels = np.empty((spec.horizon + 1, spec.n))
    labels[0] = rng.choice([-1.0, 1.0], size=spec.n)
    flips = np.empty((spec.horizon, spec.flips_per_step), dtype=int)
    for t in range(spec.horizon):
        idx = rng.choice(spec.n, size=spec.flips_per_step, replace=False)
        flips[t] = idx
        labels[t + 1] = labels[t]
        labels[t + 1, idx] *= -1.0
    return LogisticSequence(A, labels, flips)


def export_instance_csv(oracle, prefix):
    """Write ``<prefix>.A.csv`` (design matrix) and ``<prefix>.b.csv`` (one row per t)."""
    B = oracle.B if hasattr(oracle, "B") else oracle.labels
    paths = []
    for suffix, M in (("A", oracle.A), ("b", B)):
        path = f"{prefix}.{suffix}.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            for row in M:
                w.writerow([f"{v:.17g}" for v in row])
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# replication

@dataclass
class ReplicationSummary:
    solver: str
    n_reps: int
    mean: dict
    stderr: dict
    diverged: list = field(default_factory=list)
    reports: list = field(default_factory=list, repr=False)

    @property
    def any_diverged(self):
        return any(self.diverged)


def replicate(experiment: Callable, n_reps: int, seed: int, workers: Optional[int] = None,
              keep_reports=True) -> ReplicationSummary:
    """Average tracking reports over independent replications.

    ``experiment(seed)`` must return a :class:`~tvtrack.analysis.TrackingReport`;
    replication ``i`` uses seed ``seed + i``. With ``workers > 1`` replications
    run in a process pool (``experiment`` must then be picklable); results are
    reduced in replication order either way.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    seeds = [seed + i for i in range(n_reps)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(experiment, seeds))
    else:
        reports = [experiment(s) for s in seeds]
    names = reports[0].limsup.keys()
    mean, stderr = {}, {}
    for name in names:
        v = np.array([r.limsup[name] for r in reports])
        mean[name] = float(v.mean())
        if n_reps == 1:
            stderr[name] = 0.0
        elif np.all(np.isfinite(v)):
            stderr[name] = float(v.std(ddof=1) / math.sqrt(n_reps))
        else:
            stderr[name] = math.inf
    return ReplicationSummary(reports[0].solver, n_reps, mean, stderr,
                              [r.diverged for r in reports],
                              reports if keep_reports else [])
