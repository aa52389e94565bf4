import math

import numpy as np
import pytest

from tvtrack.problems import (OnlineNesterovFunction, RecordingOracle, Regularized,
                              RotatingQuadratic, SmoothnessProfile)
from tvtrack.solvers import (Abstain, Alg, AlgParams, Olnm, Orgd, OrgdParams, alg_init,
                             alg_step, olnm_init, olnm_restart_length, olnm_step)
from tvtrack.synthetic import make_rng


def test_presets():
    p = AlgParams.polyak(1.0, 9.0)
    assert p.alpha == pytest.approx(4.0 / 16.0)
    assert p.beta == pytest.approx(0.25)
    n = AlgParams.nesterov(1.0, 9.0)
    assert (n.alpha, n.beta, n.eta) == pytest.approx((1 / 9, 0.5, 0.5))
    assert AlgParams.ogd_optimal(1.0, 9.0).alpha == pytest.approx(0.2)
    with pytest.raises(ValueError):
        AlgParams(0.0)
    with pytest.raises(ValueError):
        AlgParams(1.0, beta=-0.1)


def test_alg_step_by_hand():
    o = RotatingQuadratic(0.5, 2.0)
    p = AlgParams(0.1, 0.3, 0.4)
    s = alg_init(np.array([1.0, 1.0]), p, x_prev=np.array([0.0, 2.0]))
    # y0 = x0 + eta (x0 - x_prev)
    assert np.allclose(s.y, [1.4, 0.6])
    g = np.array([2.0 * 1.4, 0.5 * 0.6])
    x1 = np.array([1.0, 1.0]) - 0.1 * g + 0.3 * np.array([1.0, -1.0])
    s1 = alg_step(s, p, o)
    assert np.allclose(s1.x_curr, x1)
    assert np.allclose(s1.y, x1 + 0.4 * (x1 - [1.0, 1.0]))
    assert s1.t == 1


def test_restart_length_rule():
    assert olnm_restart_length(100) == 34
    assert olnm_restart_length(500) == 76
    assert olnm_restart_length(1) == 3
    with pytest.raises(ValueError):
        olnm_restart_length(0.5)


def _reference_olnm(grad, L, T, x0, steps):
    """Textbook restarted FISTA on stale functions, written out independently."""
    x = z = y = np.array(x0, dtype=float)
    outputs = [x.copy()]
    for k in range(steps // T):
        tau = k * T
        a = 1.0
        y = z = x.copy()
        for j in range(T):
            z_new = y - grad(tau, y) / L
            a_new = (1 + math.sqrt(1 + 4 * a * a)) / 2
            y = z_new + (a - 1) / a_new * (z_new - z)
            z, a = z_new, a_new
            if j < T - 1:
                outputs.append(x.copy())
        x = z.copy()
        outputs.append(x.copy())
    return outputs


def test_olnm_matches_restarted_fista():
    prof = SmoothnessProfile(L=1.0, mu=0.01, sigma=1.0)
    o = OnlineNesterovFunction(prof, d=120)
    T = olnm_restart_length(prof.kappa)
    ref = _reference_olnm(o.grad, 1.0, T, np.zeros(120), 4 * T)
    s = olnm_init(np.zeros(120), T)
    got = [s.x]
    for t in range(4 * T):
        s = olnm_step(s, o, t)
        got.append(s.x)
    assert len(got) == len(ref)
    for a, b in zip(got, ref):
        assert np.allclose(a, b, atol=1e-12)


def test_olnm_every_step_outputs_z():
    o = RotatingQuadratic(0.1, 1.0)
    s = olnm_init(np.ones(2), 5, "every_step")
    for t in range(12):
        s = olnm_step(s, o, t)
        assert np.array_equal(s.x, s.z)


def test_olnm_stale_indices_and_no_peeking():
    prof = SmoothnessProfile(L=1.0, mu=1 / 16, sigma=1.0)
    rec = RecordingOracle(OnlineNesterovFunction(prof, d=40))
    solver = Olnm(olnm_restart_length(16))
    s = solver.init(np.zeros(40))
    for t in range(40):
        s = solver.step(s, rec, t)
    T = solver.T
    assert rec.indices == [T * (t // T) for t in range(40)]
    assert rec.peeked == []


def test_olnm_validation():
    with pytest.raises(ValueError):
        olnm_init(np.zeros(2), 0)
    with pytest.raises(ValueError):
        Olnm(5, variant="other")


def test_orgd_is_ogd_on_regularized():
    o = RotatingQuadratic(0.1, 1.0)
    x_c = np.array([0.5, -0.5])
    delta = 0.3
    a = Orgd(OrgdParams(delta, x_c, 1.0))
    b = Alg(AlgParams.ogd(2.0 / (1.0 + 2 * delta)))
    reg = Regularized(o, delta, x_c)
    sa, sb = a.init(np.array([2.0, 1.0])), b.init(np.array([2.0, 1.0]))
    for t in range(25):
        sa, sb = a.step(sa, o, t), b.step(sb, reg, t)
        assert np.allclose(a.output(sa), b.output(sb), rtol=0, atol=1e-12)
    assert OrgdParams(delta, x_c, 1.0).step_size == pytest.approx(2 / 1.6)


def test_orgd_validation():
    with pytest.raises(ValueError):
        OrgdParams(-1.0, np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        OrgdParams(0.1, np.zeros(2), 0.0)


def test_abstain_never_queries():
    rec = RecordingOracle(RotatingQuadratic(0.1, 1.0))
    x_c = np.array([3.0, 4.0])
    solver = Abstain(x_c)
    s = solver.init(np.zeros(2))
    for t in range(10):
        s = solver.step(s, rec, t)
        assert np.array_equal(solver.output(s), x_c)
    assert rec.calls == []


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_gradients_pass_through():
    o = RotatingQuadratic(0.1, 1.0)
    s = alg_init(np.array([np.inf, 0.0]), AlgParams.ogd(1.0))
    s = alg_step(s, AlgParams.ogd(1.0), o)
    assert not np.all(np.isfinite(s.x_curr))
