import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from normsol.constants import ProblemParams
from normsol.errors import ConstraintError
from normsol.fiber import random_torus_state
from normsol.flow import critical_explicit
from normsol.functional import (FiberMap, energy, fiber, fiber_derivs, gradient, integrals, multiplier_identity_residual,
                                multipliers, pohozaev, scalar_energy_pair, scale)
from normsol.grid import RadialField, StatePair, default_grid, dilate, gaussian_pair, make_grid
from normsol.scalar import scalar_energy

GRID = default_grid(3)
SUB = ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0)
ASYM = ProblemParams(N=3, p=3.0, alpha=2.5, beta=3.5, nu=0.7, a=0.8, b=1.3)


def _state(params, seed):
    return random_torus_state(GRID, params.a, params.b, np.random.default_rng(seed))


def test_mass_check():
    s = _state(SUB, 0)
    bad = StatePair(s.u.scaled(1.01), s.v, SUB.a, SUB.b)
    with pytest.raises(ConstraintError):
        energy(SUB, bad)


def test_zero_state_energy():
    z = RadialField(GRID, np.zeros(GRID.M))
    e = energy(SUB, StatePair(z, z, 1.0, 1.0), check_mass=False)
    assert e.total == 0.0 and e.kinetic == 0.0


def test_breakdown_sums():
    s = _state(ASYM, 1)
    e = energy(ASYM, s)
    assert e.total == e.kinetic - e.selfterm - e.coupling
    assert set(e.to_dict()) == {"kinetic", "selfterm", "coupling", "total"}


def test_decoupled_energy_is_sum_of_scalar_energies():
    p0 = SUB.replace(nu=0.0)
    s = _state(p0, 2)
    eu, ev = scalar_energy_pair(p0, s)
    assert energy(p0, s).total == pytest.approx(eu + ev, rel=1e-14)
    assert eu == pytest.approx(scalar_energy(s.u, 2.5), rel=1e-14)


@pytest.mark.parametrize("params", [SUB, ASYM])
def test_gradient_finite_differences(params, rng):
    s = _state(params, 3)
    gu, gv = gradient(params, s)
    r = GRID.nodes
    for _ in range(5):
        pu = np.exp(-((r - rng.uniform(0, 3)) / rng.uniform(0.5, 2)) ** 2)
        pv = np.exp(-((r - rng.uniform(0, 3)) / rng.uniform(0.5, 2)) ** 2)
        dirder = gu.inner(RadialField(GRID, pu)) + gv.inner(RadialField(GRID, pv))
        vals = []
        for h in (1e-3, 5e-4):
            plus = s.replace(s.u.values + h * pu, s.v.values + h * pv, renormalize=False)
            minus = s.replace(s.u.values - h * pu, s.v.values - h * pv, renormalize=False)
            vals.append((energy(params, plus, False).total - energy(params, minus, False).total) / (2 * h))
        err = [abs(v - dirder) for v in vals]
        # second-order agreement: halving h quarters the error
        assert err[1] <= 1e-4 * abs(dirder)
        assert err[0] / err[1] == pytest.approx(4.0, rel=0.05)


def test_gradient_decouples_without_coupling():
    p0 = SUB.replace(nu=0.0)
    s = _state(p0, 4)
    gu, _ = gradient(p0, s)
    from normsol.grid import laplacian_radial
    expect = -laplacian_radial(s.u).values - np.abs(s.u.values) ** 0.5 * s.u.values
    assert np.allclose(gu.values, expect, rtol=1e-13, atol=1e-15)


def test_gradient_weights_unit_is_plain():
    s = _state(ASYM, 5)
    g0 = gradient(ASYM, s)
    g1 = gradient(ASYM, s, weights=((1.0, 1.0, 1.0), (1.0, 1.0, 1.0)))
    assert np.array_equal(g0[0].values, g1[0].values)


@pytest.mark.parametrize("params", [SUB, ASYM])
def test_pohozaev_is_fiber_slope_at_zero(params):
    s = _state(params, 6)
    fm = FiberMap.from_state(params, s)
    assert fm.d1(0.0) == pytest.approx(pohozaev(params, s), rel=1e-10)
    assert fiber(params, s, 0.0) == pytest.approx(energy(params, s).total, rel=1e-14)
    d1, d2 = fiber_derivs(params, s, 0.0)
    assert d1 == pytest.approx(pohozaev(params, s), rel=1e-10)


@given(st.floats(-3.0, 3.0))
def test_fiber_derivatives_match_finite_differences(t):
    fm = FiberMap(K=2.0, Q=1.5, R=0.7, nu=1.3, p=3.0, pg=1.5, crit=6.0)
    h = 1e-5
    assert fm.d1(t) == pytest.approx((fm.value(t + h) - fm.value(t - h)) / (2 * h), rel=1e-6, abs=1e-8)
    assert fm.d2(t) == pytest.approx((fm.d1(t + h) - fm.d1(t - h)) / (2 * h), rel=1e-6, abs=1e-8)
    assert fm.G(t) * math.exp(2 * t) == pytest.approx(fm.d1(t), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("t", [-0.6, -0.2, 0.3, 0.8])
def test_fiber_value_matches_dilated_energy(t):
    s = _state(SUB, 7)
    fm = FiberMap.from_state(SUB, s)
    assert fm.value(t) == pytest.approx(energy(SUB, dilate(s, t)).total, rel=1e-4)
    assert fm.d1(t) == pytest.approx(pohozaev(SUB, dilate(s, t)), abs=1e-4 * fm.scale(t))


def test_pohozaev_quadratic_for_small_amplitude():
    s = _state(SUB, 8)
    vals = []
    for c in (1e-3, 5e-4):
        sc = s.replace(c * s.u.values, c * s.v.values, renormalize=False)
        vals.append(pohozaev(SUB, sc, check_mass=False))
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=1e-2)


@given(st.integers(0, 10**6))
def test_identity_residual_is_minus_pohozaev(seed):
    s = _state(ASYM, seed)
    assert multiplier_identity_residual(ASYM, s) == pytest.approx(-pohozaev(ASYM, s), rel=1e-9,
                                                                  abs=1e-12 * scale(ASYM, s))


@given(st.integers(0, 10**6))
def test_energy_sign_flip_even_exponents(seed):
    p = ProblemParams(N=4, p=3.0, alpha=2.0, beta=2.0, nu=1.0, a=1.0, b=1.0)
    g = default_grid(4)
    s = random_torus_state(g, 1.0, 1.0, np.random.default_rng(seed))
    flipped = StatePair(s.u.scaled(-1.0), s.v, 1.0, 1.0)
    assert energy(p, flipped).total == pytest.approx(energy(p, s).total, rel=1e-14)


def test_integrals_are_cached():
    s = _state(SUB, 9)
    assert integrals(SUB, s) is integrals(SUB, s)


def test_explicit_critical_pair_is_stationary():
    # nu = 2: symmetric maximizer, so a = b matches the required mass ratio
    params = ProblemParams(N=5, p=10 / 3, alpha=5 / 3, beta=5 / 3, nu=2.0, a=1.0, b=1.0)
    rep = critical_explicit(params)
    s = rep.state
    sc = scale(params, s)
    assert abs(pohozaev(params, s)) <= 1e-4 * sc
    l1, l2 = multipliers(params, s)
    assert abs(l1) <= 1e-3 * sc and abs(l2) <= 1e-3 * sc
    assert energy(params, s).total == pytest.approx(rep.diagnostics["predicted_level"], rel=1e-2)
