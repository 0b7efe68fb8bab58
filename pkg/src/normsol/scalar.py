"""Scalar ground state Z and the quantities derived from it.

Z is the positive radial decaying solution of

    -Z'' - (N-1)/r Z' + Z = Z^{p-1},   Z'(0) = 0,

found by shooting on Z(0).  From Z we get the sharp Gagliardo-Nirenberg
constant and, by rescaling, the normalized scalar solution u_p with mass a
and its energy e(a).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .constants import gamma_p, mass_critical_exponent
from .errors import ParameterError, RegimeError, ShootingError
from .grid import RadialField, RadialGrid, critical_exponent, make_grid, unit_sphere_area

R_START = 1e-4
R_END = 60.0
TAIL_LEVEL = 1e-12


def _rhs(N, p):
    def f(r, y):
        z, dz = y[0], y[1]
        az = abs(z)
        w = r ** (N - 1)
        return [dz,
                -(N - 1) / r * dz + z - az ** (p - 2) * z,
                w * z * z,
                w * dz * dz,
                w * az**p]
    return f


def _start(N, p, z0):
    # series Z = z0 + c r^2 with c = (z0 - z0^{p-1}) / (2N)
    c = (z0 - z0 ** (p - 1)) / (2.0 * N)
    r = R_START
    rn = r**N / N
    return [z0 + c * r * r, 2.0 * c * r, z0 * z0 * rn, 0.0, z0**p * rn]


def _crossing(r, y):
    return y[0]


_crossing.terminal = True
_crossing.direction = -1


def _turning(r, y):
    return y[1]


_turning.terminal = True
_turning.direction = 1


def _shoot(N, p, z0, dense=False):
    sol = solve_ivp(_rhs(N, p), (R_START, R_END), _start(N, p, z0), method="DOP853",
                    rtol=1e-12, atol=1e-18, events=(_crossing, _turning), dense_output=dense)
    if sol.t_events[0].size:
        kind = "over"
    elif sol.t_events[1].size:
        kind = "under"
    else:
        kind = "under" if sol.y[0, -1] > 0 else "over"
    return kind, sol


@dataclass(frozen=True, eq=False)
class ScalarGroundState:
    """Ground state profile with its integrals (over R^N).

    ``Z`` samples the profile on a uniform grid reaching ``r_cut``, the
    radius where the shooting solution has decayed to about 1e-12 Z(0).
    """

    N: int
    p: float
    z0: float
    Z: RadialField
    mass_sq: float
    grad_sq: float
    p_norm: float
    r_cut: float
    _dense: object = None

    def profile(self, r):
        """Evaluate Z(r) and Z'(r); exponential tail beyond ``r_cut``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        z = np.empty_like(r)
        dz = np.empty_like(r)
        inner = r <= self.r_cut
        small = r < R_START
        mid = inner & ~small
        if np.any(mid):
            y = self._dense(r[mid])
            z[mid], dz[mid] = y[0], y[1]
        if np.any(small):
            c = (self.z0 - self.z0 ** (self.p - 1)) / (2.0 * self.N)
            z[small] = self.z0 + c * r[small] ** 2
            dz[small] = 2.0 * c * r[small]
        out = ~inner
        if np.any(out):
            zc = float(self._dense(self.r_cut)[0])
            k = (self.N - 1) / 2.0
            ro = r[out]
            z[out] = zc * (self.r_cut / ro) ** k * np.exp(-(ro - self.r_cut))
            dz[out] = -z[out] * (1.0 + k / ro)
        return z, dz

    @property
    def gamma(self):
        return gamma_p(self.N, self.p)


@functools.lru_cache(maxsize=64)
def solve_Z(N, p, tol=1e-14):
    """Shoot for the ground state of -Z'' - (N-1)Z'/r + Z = Z^{p-1}.

    Bisects on Z(0) between undershooting profiles (Z' turns positive while
    Z > 0) and overshooting ones (Z crosses zero).
    """
    if N < 3:
        raise ParameterError("N must be >= 3")
    q = critical_exponent(N)
    if not 2.0 < p < q:
        raise ParameterError(f"p must lie in (2, {q:g})")
    lo = 1.0 + 1e-9
    if _shoot(N, p, lo)[0] != "under":
        raise ShootingError(f"Z(0) = {lo} does not undershoot")
    hi = 2.0
    while _shoot(N, p, hi)[0] != "over":
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise ShootingError(f"no overshoot found for Z(0) in [1, {hi:g}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= tol * hi:
            break
        if _shoot(N, p, mid)[0] == "under":
            lo = mid
        else:
            hi = mid
    z0 = lo
    kind, sol = _shoot(N, p, z0, dense=True)
    z = sol.y[0]
    # accuracy is lost once the separatrix error e^r * dz0 takes over; stop
    # where Z has decayed to TAIL_LEVEL (or at the turning point, if sooner)
    below = np.nonzero(z < TAIL_LEVEL * z0)[0]
    r_end = sol.t[-1] if kind == "under" else sol.t_events[0][0]
    if below.size:
        r_cut = float(optimize.brentq(lambda r: sol.sol(r)[0] - TAIL_LEVEL * z0,
                                      sol.t[below[0] - 1], sol.t[below[0]], xtol=1e-12))
    else:
        r_cut = float(r_end)
    if r_cut < 10.0:
        raise ShootingError(f"profile only reliable up to r = {r_cut:.3g}")
    ints = sol.sol(r_cut)
    omega = unit_sphere_area(N)
    mass, grad, pn = omega * ints[2], omega * ints[3], omega * ints[4]
    grid = make_grid(N, r_cut, 4096, "uniform")
    zf = RadialField(grid, sol.sol(np.maximum(grid.nodes, R_START))[0])
    return ScalarGroundState(N=N, p=p, z0=z0, Z=zf, mass_sq=float(mass), grad_sq=float(grad),
                             p_norm=float(pn), r_cut=r_cut, _dense=sol.sol)


def gn_quotient(mass_sq, grad_sq, p_norm, N, p):
    """|u|_p / (|u|_2^{1-g} |grad u|_2^{g}) from the three integrals."""
    g = gamma_p(N, p)
    return p_norm ** (1.0 / p) / (mass_sq ** ((1.0 - g) / 2.0) * grad_sq ** (g / 2.0))


@functools.lru_cache(maxsize=64)
def gn_constant(N, p):
    """Sharp constant C(N, p) of |u|_p <= C |u|_2^{1-g} |grad u|_2^{g}, attained at Z."""
    z = solve_Z(N, p)
    return gn_quotient(z.mass_sq, z.grad_sq, z.p_norm, N, p)


def gn_constant_closed_form(N, p):
    """C(N, p) from |Z|_2 alone, using the two integral identities satisfied by Z."""
    z = solve_Z(N, p)
    g = gamma_p(N, p)
    inv = g ** (g / 2.0) * (1.0 - g) ** (1.0 / p - g / 2.0) * z.mass_sq ** ((1.0 - 2.0 / p) / 2.0)
    return 1.0 / inv


def gn_constant_variational(N, p, grid=None, width=1.0, maxiter=20000):
    """Independent estimate of C(N, p) by maximizing the quotient on a grid.

    L-BFGS on the nodal values of u; the quotient is scale invariant, so
    only the profile shape matters.
    """
    if grid is None:
        grid = make_grid(N, 40.0, 2048, "uniform")
    g = gamma_p(N, p)
    W = grid.weights
    c = grid.face_coeff
    e1 = p * (1.0 - g) / 2.0
    e2 = p * g / 2.0

    def neg_log_quotient(x):
        d = np.diff(np.append(x, 0.0))
        G = float(np.dot(c, d * d))
        Mq = float(np.dot(W, x * x))
        ax = np.abs(x)
        P = float(np.dot(W, ax**p))
        val = -(math.log(P) - e1 * math.log(Mq) - e2 * math.log(G))
        # gradient of the Dirichlet form: (A x)_i
        cd = c * d
        Ax = -cd + np.concatenate(([0.0], cd[:-1]))
        grad = -(p * W * ax ** (p - 2) * x / P - e1 * 2 * W * x / Mq - e2 * 2 * Ax / G)
        return val, grad

    x0 = np.exp(-0.5 * (grid.nodes / width) ** 2)
    res = optimize.minimize(neg_log_quotient, x0, jac=True, method="L-BFGS-B",
                            options=dict(maxiter=maxiter, maxfun=2 * maxiter, ftol=1e-15, gtol=1e-12, maxcor=30))
    return math.exp(-res.fun) ** (1.0 / p), RadialField(grid, res.x)


@dataclass(frozen=True)
class NormalizedScalar:
    """Normalized scalar solution with mass a."""

    a: float
    energy: float
    lam: float
    profile: RadialField | None


def e_of_a(N, p, a, grid: RadialGrid | None = None):
    """Least energy e(a) of the scalar problem, the solution u_p and its multiplier.

    u_p(x) = lam^{1/(p-2)} Z(sqrt(lam) x) with lam fixed by |u_p|_2 = a.  The
    energy and lam are exact in the continuum; when ``grid`` is given the
    profile is sampled on it and renormalized to mass a there.
    """
    if abs(p - mass_critical_exponent(N)) <= 1e-12 * p:
        raise RegimeError("e(a) is not defined by scaling in the mass-critical case")
    if not a > 0:
        raise ParameterError("mass must be positive")
    z = solve_Z(N, p)
    k = 2.0 / (p - 2.0) - N / 2.0
    lam = (a * a / z.mass_sq) ** (1.0 / k)
    g = gamma_p(N, p)
    energy = lam ** (p / (p - 2.0) - N / 2.0) * z.p_norm * (p * g - 2.0) / (2.0 * p)
    prof = None
    if grid is not None:
        vals = lam ** (1.0 / (p - 2.0)) * z.profile(math.sqrt(lam) * grid.nodes)[0]
        prof = RadialField(grid, vals).normalized(a)
    return NormalizedScalar(a=a, energy=float(energy), lam=float(lam), profile=prof)


def scalar_energy(field, p):
    """E(u) = |grad u|^2/2 - |u|_p^p/p on the grid."""
    return 0.5 * field.grad_sq() - field.lp_pow(p) / p
