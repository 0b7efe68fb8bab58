import logging
from types import SimpleNamespace

import numpy as np
import pytest

from normsol.constants import ProblemParams
from normsol.errors import ParameterError, RegimeError
from normsol.flow import local_minimize, mountain_pass
from normsol.grid import default_grid, gaussian_pair, make_grid
from normsol.verify import (CONTRADICTION, CheckResult, check_energy_orderings, check_eta_scalings,
                            check_fiber_identity, check_fiber_structure, check_monotonicity,
                            check_report_identities, classify_probe_run, eta_exponents, fit_slope,
                            nonexistence_probe, summary_table)

SUB = ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0)
DEFOC = ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0, omega1=-1.0, omega2=-1.0)


def test_eta_exponent_table():
    assert eta_exponents(5, 3.0)["mass"] == (2.0, False)
    assert eta_exponents(4, 3.0)["mass"] == (2.0, True)
    assert eta_exponents(4, 3.0)["p_norm"] == (1.0, False)
    assert eta_exponents(3, 2.5)["p_norm"] == (1.25, False)
    assert eta_exponents(3, 4.0)["p_norm"] == (1.0, False)
    assert eta_exponents(3, 3.0)["p_norm"] == (1.5, True)
    with pytest.raises(ParameterError):
        eta_exponents(3, 6.0)


def test_fit_slope_exact_power():
    eps = np.geomspace(1e-3, 1e-1, 9)
    assert fit_slope(eps, 3 * eps**1.7) == pytest.approx(1.7, rel=1e-12)


def test_eta_span_requirements():
    with pytest.raises(ParameterError, match="decades"):
        check_eta_scalings(5, 3.0, np.geomspace(0.01, 0.1, 12))
    with pytest.raises(ParameterError):
        check_eta_scalings(5, 3.0, [0.01, 0.1, 1.0])


def test_eta_slopes_n5():
    res = {c.name.split("_")[1]: c for c in check_eta_scalings(5, 3.0, np.geomspace(0.003, 0.3, 12))}
    assert res["mass"].passed and res["mass"].lhs == pytest.approx(2.0, abs=0.1)
    assert all(c.passed for c in res.values())


def test_eta_slow_row_n3_small_eps():
    # the eps^{p/2} row for N=3, p < 3 carries an eps^{3-p} relative correction,
    # so it is checked at smaller eps on a grid with a finer core
    g = make_grid(3, 1e7, 8192, "log-stretched", core=1e-6)
    res = check_eta_scalings(3, 2.5, np.geomspace(1e-4, 1e-2, 12), g)
    assert all(c.passed for c in res), summary_table(res)


def _rep(energy, scale=1.0):
    return SimpleNamespace(energy=energy, scale=scale)


def test_orderings_synthetic():
    out = {c.name: c for c in check_energy_orderings(SUB, {"m_ab": _rep(-0.06), "l_ab": _rep(11.0)})}
    assert all(c.passed for c in out.values())
    assert set(out) == {"m_negative", "m_below_scalar_levels", "l_positive", "m_below_l",
                        "l_below_m_plus_threshold"}
    out = {c.name: c for c in check_energy_orderings(SUB, {"m_ab": _rep(0.5)})}
    assert not out["m_negative"].passed


def test_orderings_from_solves():
    g = default_grid(3)
    reps = {"m_ab": local_minimize(SUB, gaussian_pair(g, 1, 1)), "l_ab": mountain_pass(SUB, gaussian_pair(g, 1, 1))}
    checks = check_energy_orderings(SUB, reps)
    assert checks and all(c.passed for c in checks)
    for r in reps.values():
        assert all(c.passed for c in check_report_identities(SUB, r))


def test_monotonicity():
    good = {(a, b): -(a + b) for a in (1, 2) for b in (1, 2)}
    assert check_monotonicity(good).passed
    bad = dict(good)
    bad[(2, 2)] = 0.0
    c = check_monotonicity(bad)
    assert not c.passed and c.lhs == pytest.approx(3.0)
    assert check_monotonicity({(1, 1): 0.0}).passed


def _probe_rep(converged, l1, l2, neg=False):
    g = default_grid(3)
    s = gaussian_pair(g, 1, 1)
    if neg:
        s = s.replace(s.u.values - 0.1 * s.u.values.max(), s.v.values, renormalize=False)
    return SimpleNamespace(converged=converged, lambda1=l1, lambda2=l2, scale=1.0, state=s)


def test_classify_probe_run():
    assert classify_probe_run(SUB, _probe_rep(False, 1, 1))[1] is False
    assert classify_probe_run(SUB, _probe_rep(True, 1, 1))[1] is True
    assert classify_probe_run(SUB, _probe_rep(True, 1, -1))[1] is False
    assert classify_probe_run(SUB, _probe_rep(True, 1, 1, neg=True))[1] is False


def test_probe_flags_contradiction(monkeypatch, caplog):
    import normsol.flow as flow
    monkeypatch.setattr(flow, "mountain_pass", lambda *a, **k: _probe_rep(True, 1.0, 1.0))
    with caplog.at_level(logging.ERROR):
        c = nonexistence_probe(DEFOC, [0])
    assert not c.passed and CONTRADICTION in c.details and CONTRADICTION in caplog.text


def test_probe_defocusing_single_seed():
    c = nonexistence_probe(DEFOC, [0], budget=100)
    assert c.passed and CONTRADICTION not in c.details
    assert "evidence" in c.details


def test_probe_not_applicable():
    with pytest.raises(RegimeError):
        nonexistence_probe(ProblemParams(N=5, p=10 / 3, alpha=5 / 3, beta=5 / 3, nu=1.0, a=1, b=1), [0])
    with pytest.raises(RegimeError):
        nonexistence_probe(SUB, [0])


def test_fiber_checks_small():
    c = check_fiber_structure(SUB, 20)
    assert c.passed and c.lhs == 1.0 and c.details.startswith("20/20")
    c = check_fiber_identity(SUB, 3)
    assert c.passed and c.lhs <= 1e-4


def test_check_result_and_table():
    c = CheckResult("x", "ref", True, 1.0, 2.0, 0.0, "d")
    assert c.to_dict()["name"] == "x"
    assert "PASS" in summary_table([c])
