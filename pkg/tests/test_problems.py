import math

import numpy as np
import pytest

from tvtrack.problems import (OnlineNesterovFunction, RecordingOracle, Regularized,
                              RotatingQuadratic, SmoothnessProfile, TranslatingQuadratic,
                              central_difference_gradient, make_translating_quadratic,
                              oracle_eval, secant_constants)
from tvtrack.solvers import Alg, AlgParams
from tvtrack.synthetic import make_rng


def test_profile_validation():
    with pytest.raises(ValueError):
        SmoothnessProfile(L=0.0)
    with pytest.raises(ValueError):
        SmoothnessProfile(L=1.0, mu=2.0)
    with pytest.raises(ValueError):
        SmoothnessProfile(L=1.0, sigma=-1.0)
    assert SmoothnessProfile(L=1.0).kappa is None
    assert SmoothnessProfile.from_kappa(2.0, 8.0).mu == 0.25


def test_oracle_eval_rejects_bad_points():
    o = RotatingQuadratic(0.1, 1.0)
    with pytest.raises(ValueError):
        oracle_eval(o, 0, np.zeros(3))
    with pytest.raises(ValueError):
        oracle_eval(o, -1, np.zeros(2))


def test_translating_trailing_distance_formula():
    prof = SmoothnessProfile(L=1.0, mu=0.01, sigma=2.0)
    o = TranslatingQuadratic(prof, AlgParams(0.5, 0.3, 0.2))
    # xi = ((1 - beta) / (alpha mu) + eta) sigma
    assert o.xi == pytest.approx((0.7 / 0.005 + 0.2) * 2.0, rel=1e-15)
    assert np.allclose(o.minimizer(3) - o.minimizer(2), [2.0, 0.0])
    assert np.allclose(o.hessian(0), np.diag([0.01, 1.0]))


def test_translating_rejects_degenerate():
    with pytest.raises(ValueError):
        TranslatingQuadratic(SmoothnessProfile(L=1.0), AlgParams.ogd(1.0))
    with pytest.raises(ValueError):
        make_translating_quadratic(SmoothnessProfile(L=1.0, mu=0.1), (0.0, 0.0, 0.0))


@pytest.mark.parametrize("params", [AlgParams.nesterov(0.01, 1.0), AlgParams.polyak(0.5, 1.0),
                                    AlgParams(0.3, 0.2, 0.5)])
def test_momentum_methods_trail_exactly_with_matched_previous_iterate(params):
    prof = SmoothnessProfile(L=1.0, mu=0.5 if params.preset == "polyak" else 0.01, sigma=1.0)
    o = TranslatingQuadratic(prof, params, d=3)
    solver = Alg(params)
    state = solver.init(np.zeros(3), x_prev=o.previous_iterate)
    for t in range(200):
        err = np.linalg.norm(solver.output(state) - o.minimizer(t))
        assert err == pytest.approx(o.xi, rel=1e-9)
        state = solver.step(state, o, t)


def test_rotating_alternates():
    o = RotatingQuadratic(0.2, 3.0)
    assert np.allclose(o.hessian(0), np.diag([3.0, 0.2]))
    assert np.allclose(o.hessian(1), np.diag([0.2, 3.0]))
    assert np.allclose(o.minimizer(7), 0.0)
    with pytest.raises(ValueError):
        RotatingQuadratic(0.0, 1.0)


def _onf(kappa=25.0, d=200, a=None, sigma=1.0, L=1.0):
    prof = SmoothnessProfile(L=L, mu=L / kappa, sigma=sigma)
    return OnlineNesterovFunction(prof, a_param=a, d=d)


def test_online_nesterov_minimizer_is_stationary_up_to_truncation():
    o = _onf()
    for t in (0, 1, 5, 50):
        g = o.grad(t, o.minimizer(t))
        assert np.linalg.norm(g) == pytest.approx(o.truncation_residual(t), rel=1e-6, abs=1e-14)


def test_online_nesterov_minimizer_against_dense_solve():
    # independent oracle: solve H_t x = b_t with the dense matrix
    o = _onf(kappa=9.0, d=60)
    for t in (0, 3, 10):
        H = o.hessian(t)
        b = o._linear(t)
        x_dense = np.linalg.solve(H, b)
        assert np.allclose(x_dense, o.minimizer(t), atol=(o.gamma ** (60 - t)) * 10)


def test_online_nesterov_drift_and_constants():
    o = _onf(kappa=100.0, sigma=0.5, d=400)
    steps = [np.linalg.norm(o.minimizer(t + 1) - o.minimizer(t)) for t in range(100)]
    assert np.allclose(steps, 0.5, rtol=1e-10)
    assert o.lower_bound() == pytest.approx(0.5 * (10 - 1) * 0.5)
    assert o.truncated_lower_bound(10) == pytest.approx(o.lower_bound(), rel=1e-12)
    eig = np.linalg.eigvalsh(o.hessian(5))
    assert eig.min() >= o.profile.mu - 1e-12 and eig.max() <= o.profile.L + 1e-12


def test_online_nesterov_validation():
    with pytest.raises(ValueError):
        _onf(kappa=1.0)
    with pytest.raises(ValueError):
        _onf(a=2.0)
    with pytest.raises(ValueError):
        _onf(sigma=0.0)


def test_online_nesterov_shift_invariance():
    prof = SmoothnessProfile(L=1.0, mu=0.04, sigma=1.0)
    shift = make_rng(3).standard_normal(50)
    a = OnlineNesterovFunction(prof, d=50)
    b = OnlineNesterovFunction(prof, d=50, x0_shift=shift)
    x = make_rng(4).standard_normal(50)
    assert np.allclose(a.grad(4, x), b.grad(4, x + shift))
    assert np.allclose(a.minimizer(4) + shift, b.minimizer(4))


def test_secant_constants_on_quadratic():
    o = _onf(kappa=20.0, d=30)
    s = secant_constants(o, 3, make_rng(0), pairs=500)
    assert s.lipschitz_ratio <= o.profile.L + 1e-12
    assert s.monotone_ratio >= o.profile.mu - 1e-12


def test_central_differences_match():
    o = _onf(kappa=20.0, d=10)
    x = make_rng(1).standard_normal(10)
    assert np.allclose(central_difference_gradient(o, 2, x), o.grad(2, x), atol=1e-6)


def test_regularized_wrapper():
    base = RotatingQuadratic(0.1, 1.0)
    x_c = np.array([1.0, -2.0])
    r = Regularized(base, 0.5, x_c)
    x = np.array([0.3, 0.4])
    assert np.allclose(r.grad(0, x), base.grad(0, x) + 0.5 * (x - x_c))
    assert r.profile.L == 1.5 and r.profile.mu == pytest.approx(0.6)


def test_recording_oracle_logs_indices():
    rec = RecordingOracle(RotatingQuadratic(0.1, 1.0))
    rec.grad(3, np.ones(2))
    rec.grad(1, np.ones(2))
    assert rec.indices == [3, 1]
    assert rec.peeked == []
    rec.minimizer(2)
    assert rec.peeked == [2]
