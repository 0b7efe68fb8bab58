import math

import numpy as np
import pytest

from normsol.constants import ProblemParams, compute_constants
from normsol.errors import BudgetError, ParameterError, RegimeError, ThresholdError
from normsol.fiber import random_torus_state
from normsol.flow import (Reduction, bubble_blended_seed, critical_explicit, descend, local_minimize,
                          mountain_pass, newton_refine, repulsive_minimize)
from normsol.functional import energy, multiplier_identity_residual, scalar_energy_pair
from normsol.grid import default_grid, gaussian_pair
from normsol.scalar import e_of_a

GRID = default_grid(3)
SUB = ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0)


@pytest.fixture(scope="module")
def m_rep():
    return local_minimize(SUB, gaussian_pair(GRID, 1.0, 1.0))


@pytest.fixture(scope="module")
def l_rep():
    return mountain_pass(SUB, gaussian_pair(GRID, 1.0, 1.0))


def _identities(params, rep):
    assert rep.converged
    assert abs(rep.pohozaev_residual) <= 1e-5 * rep.scale
    assert abs(rep.identity_residual) <= 1e-4 * rep.scale
    assert max(rep.state.mass_errors()) <= 1e-8
    assert rep.tangent_gradient_norm <= rep.diagnostics["tol"]


def test_local_minimizer(m_rep):
    _identities(SUB, m_rep)
    e = e_of_a(3, 2.5, 1.0).energy
    assert m_rep.energy < e < 0
    assert m_rep.lambda1 > 0 and m_rep.lambda2 > 0
    assert math.sqrt(2 * energy(SUB, m_rep.state).kinetic) < compute_constants(SUB).r0
    assert np.all(m_rep.state.u.values >= 0)


def test_mountain_pass_level(m_rep, l_rep):
    _identities(SUB, l_rep)
    c = compute_constants(SUB)
    assert m_rep.energy < 0 < l_rep.energy
    assert l_rep.energy < m_rep.energy + c.sobolev_pair**1.5 / 3
    assert l_rep.level_name == "l_ab" and m_rep.level_name == "m_ab"
    assert l_rep.lambda1 > 0 and l_rep.lambda2 > 0


def test_plain_projected_descent_agrees(m_rep):
    rep = local_minimize(SUB, gaussian_pair(GRID, 1.0, 1.0, width=4.0), project_every=0)
    assert rep.converged
    assert rep.energy == pytest.approx(m_rep.energy, rel=1e-6)


def test_descent_energy_non_increasing():
    seed = random_torus_state(GRID, 1.0, 1.0, np.random.default_rng(3))
    rep = descend(SUB, seed, Reduction("none"), "m_ab", budget=200, raise_on_failure=False,
                  record_history=True, use_newton=False)
    J = [h[1] for h in rep.diagnostics["history"]]
    assert all(b <= a for a, b in zip(J, J[1:]))


def test_repulsive_level():
    p = ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=-1.0, a=1.0, b=1.5)
    rep = repulsive_minimize(p, gaussian_pair(GRID, 1.0, 1.5))
    _identities(p, rep)
    ea, eb = e_of_a(3, 2.5, 1.0).energy, e_of_a(3, 2.5, 1.5).energy
    assert rep.energy < 0 and rep.energy <= ea + eb + 1e-4 * rep.scale
    assert rep.lambda1 > 0 and rep.lambda2 > 0


def test_decoupled_local_minimizer_matches_scalar():
    p = SUB.replace(nu=0.0, b=1.5)
    rep = local_minimize(p, gaussian_pair(GRID, 1.0, 1.5))
    eu, ev = scalar_energy_pair(p, rep.state)
    assert eu == pytest.approx(e_of_a(3, 2.5, 1.0).energy, rel=1e-3)
    assert ev == pytest.approx(e_of_a(3, 2.5, 1.5).energy, rel=1e-3)


def test_supercritical_level_below_threshold():
    p = ProblemParams(N=3, p=4.0, alpha=3.0, beta=3.0, nu=10.0, a=1.0, b=1.0)
    rep = mountain_pass(p, gaussian_pair(GRID, 1.0, 1.0))
    _identities(p, rep)
    thr = 10.0 ** -0.5 * compute_constants(p).sobolev_pair ** 1.5 / 3
    assert 0 < rep.energy < thr
    assert rep.energy < e_of_a(3, 4.0, 1.0).energy


def test_newton_refine_recovers_solution(m_rep):
    s = m_rep.state
    pert = s.replace(s.u.values * (1 + 0.01 * np.exp(-GRID.nodes)), s.v.values)
    out, hist, ok = newton_refine(SUB, pert)
    assert ok and hist[-1] < 1e-8 * hist[0]
    assert energy(SUB, out).total == pytest.approx(m_rep.energy, rel=1e-7)
    assert abs(multiplier_identity_residual(SUB, out)) <= 1e-6 * m_rep.scale


def test_regime_errors():
    sup = ProblemParams(N=3, p=4.0, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0)
    with pytest.raises(RegimeError):
        local_minimize(sup, gaussian_pair(GRID, 1, 1))
    with pytest.raises(ThresholdError):
        local_minimize(SUB.with_masses(1e3, 1e3), gaussian_pair(GRID, 1e3, 1e3))
    with pytest.raises(RegimeError):
        repulsive_minimize(SUB, gaussian_pair(GRID, 1, 1))
    with pytest.raises(RegimeError):
        mountain_pass(SUB.replace(nu=-1.0), gaussian_pair(GRID, 1, 1))
    with pytest.raises(RegimeError):
        mountain_pass(SUB.replace(nu=0.0), gaussian_pair(GRID, 1, 1))


def test_budget_error_carries_report():
    with pytest.raises(BudgetError) as exc:
        local_minimize(SUB, gaussian_pair(GRID, 1.0, 1.0, width=5.0), budget=2, use_newton=False)
    assert exc.value.report.iterations == 2 and not exc.value.report.converged


def test_critical_explicit_errors():
    with pytest.raises(RegimeError, match="no positive normalized solution"):
        critical_explicit(ProblemParams(N=4, p=4.0, alpha=2.0, beta=2.0, nu=1.0, a=1.0, b=1.0))
    with pytest.raises(ParameterError, match="a\\|x2\\| = b\\|x1\\|"):
        critical_explicit(ProblemParams(N=5, p=10 / 3, alpha=5 / 3, beta=5 / 3, nu=2.0, a=1.0, b=2.0))
    with pytest.raises(RegimeError):
        critical_explicit(SUB)


def test_critical_explicit_matched_ratio():
    from normsol.constants import fmax_solve
    F, x1, x2 = fmax_solve(1.0, 5 / 3, 5 / 3)
    p = ProblemParams(N=5, p=10 / 3, alpha=5 / 3, beta=5 / 3, nu=1.0, a=x1 / x2, b=1.0)
    rep = critical_explicit(p)
    lvl = rep.diagnostics["predicted_level"]
    assert rep.energy == pytest.approx(lvl, rel=1e-2)
    assert abs(rep.lambda1) <= 1e-3 * rep.scale and abs(rep.lambda2) <= 1e-3 * rep.scale
    assert rep.state.u.l2() == pytest.approx(p.a, rel=1e-8)


def test_bubble_blended_seed_masses():
    s = bubble_blended_seed(GRID, 0.5, 2.0)
    assert max(s.mass_errors()) <= 1e-12


def test_report_serializes(m_rep):
    d = m_rep.to_dict()
    assert d["level_name"] == "m_ab" and d["mass_u"] == pytest.approx(1.0)
