"""
Acceptance suite: each criterion at its stated tolerance.

Every criterion maps to one named check in ``tvtrack.harness.checks``;
sub-parts get their own test so a failing part does not hide the others.
A PASS/FAIL line per criterion is printed in the terminal summary (and
by ``python3 tests/test_acceptance.py``).
"""

from functools import lru_cache

import pytest

from tvtrack.harness.checks import run_check

CRITERIA = [
    (1, "OGD tightness on the translating adversary", ["ogd_tightness"]),
    (2, "two-step convergence on the rotating quadratic", ["two_step_convergence"]),
    (3, "Polyak divergence on the rotating quadratic", ["polyak_divergence"]),
    (4, "large-step OGD optimality", ["large_step_ogd_optimality"]),
    (5, "universal lower bound for every solver", ["universal_lower_bound"]),
    (6, "OLNM upper bound and fitted constants", ["olnm_upper_bound"]),
    (7, "online Nesterov function slopes", ["online_nesterov_slopes"]),
    (8, "least-squares ordering", ["least_squares_ordering"]),
    (9, "logistic regularization", ["logistic_regularization"]),
    (10, "property suites", ["error_inequality_chain", "spectral_crosscheck",
                             "gradient_finite_difference", "haar_orthogonality", "drift_bounds",
                             "olnm_stale_gradients", "orgd_equivalence"]),
]


@lru_cache(maxsize=None)
def result(name):
    return run_check(name)


def summary_lines():
    lines = []
    for num, title, names in CRITERIA:
        res = [result(n) for n in names]
        ok = all(r.passed for r in res)
        failing = [p.name for r in res for p in (r.parts or [r]) if not p.passed]
        tail = f"  failing: {', '.join(failing)}" if failing else ""
        lines.append(f"{'PASS' if ok else 'FAIL'} criterion {num:>2} {title}{tail}")
        for r in res:
            for p in r.parts or [r]:
                lines.append(f"      {p.line()}")
    return lines


def _assert(res):
    assert res.passed, res.line()


def _parts(name, prefix):
    return [p for p in result(name).parts if p.name.startswith(prefix)]


# 1
@pytest.mark.parametrize("label", ["alpha=1/L", "alpha=2/(mu+L)"])
def test_ogd_tightness_exact(label):
    _assert(result("ogd_tightness").part(f"exact_trailing[{label}]"))


@pytest.mark.parametrize("label", ["alpha=1/L", "alpha=2/(mu+L)"])
def test_ogd_tightness_runtime(label):
    _assert(result("ogd_tightness").part(f"runtime[{label}]"))


# 2
def test_two_step_convergence():
    _assert(result("two_step_convergence"))


# 3
@pytest.mark.parametrize("kappa", ["6", "10", "100"])
def test_polyak_diverges(kappa):
    _assert(result("polyak_divergence").part(f"diverges[kappa={kappa}]"))


@pytest.mark.parametrize("kappa", ["6", "10", "100"])
def test_polyak_growth_matches_closed_form(kappa):
    _assert(result("polyak_divergence").part(f"growth_matches_closed_form[kappa={kappa}]"))


def test_polyak_stable_at_kappa_5():
    _assert(result("polyak_divergence").part("stable[kappa=5]"))


# 4
def test_large_step_ogd_optimality():
    _assert(result("large_step_ogd_optimality"))


# 5
def test_universal_lower_bound():
    for p in result("universal_lower_bound").parts:
        _assert(p)


# 6
def test_olnm_sup_below_bound():
    for p in _parts("olnm_upper_bound", "sup_below_bound"):
        _assert(p)


@pytest.mark.parametrize("problem", ["online_nesterov", "translating"])
def test_olnm_fit_constant(problem):
    _assert(result("olnm_upper_bound").part(f"fit_constant[{problem}]"))


# 7
@pytest.mark.parametrize("solver", ["ogd", "nesterov"])
def test_online_nesterov_slope(solver):
    _assert(result("online_nesterov_slopes").part(f"fit_constant[{solver}]"))


# 8
@pytest.mark.parametrize("prefix", ["nesterov_below_olnm", "olnm_below_ogd",
                                    "separated_bands_nesterov_olnm", "separated_bands_olnm_ogd"])
def test_least_squares_ordering(prefix):
    parts = _parts("least_squares_ordering", prefix)
    assert parts
    bad = [p.line() for p in parts if not p.passed]
    assert not bad, "\n".join(bad)


# 9
@pytest.mark.parametrize("part", ["fixed_point_root", "drift_radius_ratio", "orgd_bound",
                                  "abstain_bound", "ogd_not_worse_than_orgd",
                                  "orgd_below_abstain"])
def test_logistic_regularization(part):
    _assert(result("logistic_regularization").part(part))


# 10
@pytest.mark.parametrize("name", CRITERIA[-1][2])
def test_property_suite(name):
    _assert(result(name))


if __name__ == "__main__":
    for line in summary_lines():
        print(line)
