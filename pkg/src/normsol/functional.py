"""Energy, gradient, Pohozaev functional, fiber map and multipliers.

All quantities are grid quadratures.  The energy is built from three
integrals

    K = |grad u|^2 + |grad v|^2
    Q = omega1 |u|_p^p + omega2 |v|_p^p
    R = int |u|^alpha |v|^beta

and the fiber map along t * (u, v) only needs these numbers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConstraintError
from .grid import RadialField, StatePair, laplacian_radial

MASS_TOL = 1e-8


@dataclass(frozen=True)
class Integrals:
    K: float
    Q1: float       # |u|_p^p
    Q2: float       # |v|_p^p
    R: float

    def Q(self, params):
        return params.omega1 * self.Q1 + params.omega2 * self.Q2


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    selfterm: float
    coupling: float
    total: float

    def to_dict(self):
        return asdict(self)


def _check_masses(params, state):
    ea = abs(state.u.l2() / params.a - 1.0)
    eb = abs(state.v.l2() / params.b - 1.0)
    if max(ea, eb) > MASS_TOL:
        raise ConstraintError(f"state masses deviate from (a, b) by ({ea:.2e}, {eb:.2e})")


def integrals(params, state, check_mass=True):
    """K, |u|_p^p, |v|_p^p and R, cached on the state per exponent triple."""
    if check_mass:
        _check_masses(params, state)
    key = ("KQR", params.p, params.alpha, params.beta)
    hit = state._cache.get(key)
    if hit is not None:
        return hit
    u, v = state.u, state.v
    W = u.grid.weights
    au, av = np.abs(u.values), np.abs(v.values)
    out = Integrals(K=u.grad_sq() + v.grad_sq(),
                    Q1=float(np.dot(W, au**params.p)),
                    Q2=float(np.dot(W, av**params.p)),
                    R=float(np.dot(W, au**params.alpha * av**params.beta)))
    state._cache[key] = out
    return out


def energy(params, state, check_mass=True):
    """I(u, v) split into its three terms."""
    ints = integrals(params, state, check_mass)
    kin = 0.5 * ints.K
    selfterm = ints.Q(params) / params.p
    coup = params.nu * ints.R / params.crit
    return EnergyBreakdown(kinetic=kin, selfterm=selfterm, coupling=coup, total=kin - selfterm - coup)


def _signed_power(x, e):
    # |x|^{e-1} x without the 0 * inf hazard of |x|^{e-2} x for e < 2
    return np.sign(x) * np.abs(x) ** (e - 1.0)


def gradient(params, state, check_mass=True, weights=None):
    """Unconstrained derivative of I in the weighted inner product.

    Returns fields (g_u, g_v) with dI = <g_u, du> + <g_v, dv>.  Powers
    |u|^{alpha-2} u are evaluated as sign(u)|u|^{alpha-1}, which is finite
    for alpha > 1, so no floor is needed at zeros of u.

    ``weights`` optionally rescales the kinetic, self and coupling parts,
    one triple per component; with (e^{2t}, e^{p g t}, e^{2* t}) this is the
    derivative of the fiber value Phi_w(t) at fixed t.
    """
    if check_mass:
        _check_masses(params, state)
    (ku, qu, ru), (kv, qv, rv) = weights if weights is not None else ((1, 1, 1), (1, 1, 1))
    u, v = state.u.values, state.v.values
    au, av = np.abs(u), np.abs(v)
    c = params.nu / params.crit
    gu = (-ku * laplacian_radial(state.u).values - qu * params.omega1 * _signed_power(u, params.p)
          - ru * c * params.alpha * _signed_power(u, params.alpha) * av**params.beta)
    gv = (-kv * laplacian_radial(state.v).values - qv * params.omega2 * _signed_power(v, params.p)
          - rv * c * params.beta * au**params.alpha * _signed_power(v, params.beta))
    g = state.grid
    return RadialField(g, gu), RadialField(g, gv)


def pohozaev(params, state, check_mass=True):
    """P = K - gamma_p Q - nu R."""
    ints = integrals(params, state, check_mass)
    return ints.K - params.gamma * ints.Q(params) - params.nu * ints.R


def scale(params, state_or_ints, check_mass=True):
    """Magnitude used for relative tolerances: sum of the absolute P terms."""
    ints = state_or_ints if isinstance(state_or_ints, Integrals) else integrals(params, state_or_ints, check_mass)
    g = params.gamma
    return (ints.K + g * (abs(params.omega1) * ints.Q1 + abs(params.omega2) * ints.Q2)
            + abs(params.nu) * ints.R)


@dataclass(frozen=True)
class FiberMap:
    """Phi(t) = e^{2t} K/2 - e^{p g t} Q/p - nu e^{2* t} R/2* from fixed integrals."""

    K: float
    Q: float
    R: float
    nu: float
    p: float
    pg: float
    crit: float

    @classmethod
    def from_state(cls, params, state, check_mass=True):
        ints = integrals(params, state, check_mass)
        return cls(K=ints.K, Q=ints.Q(params), R=ints.R, nu=params.nu, p=params.p,
                   pg=params.p * params.gamma, crit=params.crit)

    def value(self, t):
        return (math.exp(2 * t) * self.K / 2 - math.exp(self.pg * t) * self.Q / self.p
                - self.nu * math.exp(self.crit * t) * self.R / self.crit)

    def d1(self, t):
        return (math.exp(2 * t) * self.K - self.pg / self.p * math.exp(self.pg * t) * self.Q
                - self.nu * math.exp(self.crit * t) * self.R)

    def d2(self, t):
        return (2 * math.exp(2 * t) * self.K - self.pg**2 / self.p * math.exp(self.pg * t) * self.Q
                - self.crit * self.nu * math.exp(self.crit * t) * self.R)

    def G(self, t):
        """e^{-2t} Phi'(t)."""
        return (self.K - self.pg / self.p * math.exp((self.pg - 2) * t) * self.Q
                - self.nu * math.exp((self.crit - 2) * t) * self.R)

    def scale(self, t=0.0):
        return (math.exp(2 * t) * self.K + self.pg / self.p * math.exp(self.pg * t) * abs(self.Q)
                + abs(self.nu) * math.exp(self.crit * t) * abs(self.R))


def fiber(params, state, t):
    return FiberMap.from_state(params, state).value(t)


def fiber_derivs(params, state, t):
    fm = FiberMap.from_state(params, state)
    return fm.d1(t), fm.d2(t)


def multipliers(params, state, grads=None):
    """lambda_i = -<g_i, u_i> / |u_i|^2 from the unconstrained gradient."""
    gu, gv = grads if grads is not None else gradient(params, state)
    l1 = -gu.inner(state.u) / state.u.mass_sq()
    l2 = -gv.inner(state.v) / state.v.mass_sq()
    return l1, l2


def multiplier_identity_residual(params, state, lams=None):
    """lambda1 a^2 + lambda2 b^2 - (1 - gamma_p) Q at the state."""
    l1, l2 = multipliers(params, state) if lams is None else lams
    ints = integrals(params, state)
    return l1 * state.u.mass_sq() + l2 * state.v.mass_sq() - (1.0 - params.gamma) * ints.Q(params)


def scalar_energy_pair(params, state):
    """(E(u), E(v)) with E(w) = |grad w|^2/2 - omega |w|_p^p / p."""
    ints = integrals(params, state, check_mass=False)
    return (0.5 * state.u.grad_sq() - params.omega1 * ints.Q1 / params.p,
            0.5 * state.v.grad_sq() - params.omega2 * ints.Q2 / params.p)
