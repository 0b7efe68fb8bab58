"""Problem parameters, regime classification and closed-form constants.

The Gagliardo-Nirenberg constant ``C(N, p)`` is kept in root form,
|u|_p <= C |u|_2^{1-g} |grad u|_2^{g}.  Every threshold that enters through
|u|_p^p (the coefficient A of h, C0 and a0) uses its p-th power.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .errors import ExistenceThresholdError, ParameterError, RegimeError, ThresholdError
from .grid import critical_exponent

SCAN_POINTS = 4096


class Regime(str, enum.Enum):
    MASS_SUBCRITICAL = "MASS_SUBCRITICAL"
    MASS_CRITICAL = "MASS_CRITICAL"
    MASS_SUPERCRITICAL = "MASS_SUPERCRITICAL"
    FULLY_CRITICAL = "FULLY_CRITICAL"
    REPULSIVE = "REPULSIVE"
    DEFOCUSING = "DEFOCUSING"


def mass_critical_exponent(N):
    return 2.0 + 4.0 / N


def _close(x, y, tol=1e-12):
    return abs(x - y) <= tol * max(1.0, abs(y))


def gamma_p(N, p):
    """Scaling exponent N(p-2)/(2p) of the p-norm under mass-preserving dilation."""
    if N < 3:
        raise ParameterError(f"dimension must be >= 3, got {N}")
    q = critical_exponent(N)
    if not (2.0 < p <= q * (1 + 1e-14)):
        raise ParameterError(f"p must lie in (2, {q:g}], got {p}")
    if _close(p, q):
        return 1.0
    return N * (p - 2.0) / (2.0 * p)


@dataclass(frozen=True)
class ProblemParams:
    """Full parameter set of the coupled system.

    ``nu = 0`` is accepted: it decouples the system into two scalar
    problems and is used as an oracle for the solvers.
    """

    N: int
    p: float
    alpha: float
    beta: float
    nu: float
    a: float
    b: float
    omega1: float = 1.0
    omega2: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ParameterError(f"N must be an integer >= 3, got {self.N}")
        q = critical_exponent(self.N)
        if abs(self.alpha + self.beta - q) > 1e-12 * q:
            raise ParameterError(
                f"coupling exponents need alpha + beta = 2* = {q:.12g}, got {self.alpha + self.beta:.12g}")
        if not (self.alpha > 1 and self.beta > 1):
            raise ParameterError("coupling exponents need alpha > 1 and beta > 1")
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("masses a, b must be positive")
        gamma_p(self.N, self.p)   # range check on p

    @property
    def crit(self):
        """Sobolev exponent 2*."""
        return critical_exponent(self.N)

    @property
    def gamma(self):
        return gamma_p(self.N, self.p)

    @property
    def regime(self):
        return classify_regime(self.N, self.p, self.nu, self.omega1, self.omega2)

    def with_masses(self, a, b):
        d = asdict(self)
        d.update(a=a, b=b)
        return ProblemParams(**d)

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ProblemParams(**d)


def classify_regime(N, p, nu, omega1=1.0, omega2=1.0):
    """Regime tag; sign conditions take precedence over the exponent ranges."""
    if omega1 < 0 and omega2 < 0:
        return Regime.DEFOCUSING
    if nu < 0:
        return Regime.REPULSIVE
    q = critical_exponent(N)
    if _close(p, q):
        return Regime.FULLY_CRITICAL
    pbar = mass_critical_exponent(N)
    if _close(p, pbar):
        return Regime.MASS_CRITICAL
    return Regime.MASS_SUBCRITICAL if p < pbar else Regime.MASS_SUPERCRITICAL


def _infer_dimension(alpha, beta):
    s = alpha + beta
    if not s > 2:
        raise ParameterError("alpha + beta must exceed 2")
    N = 2.0 * s / (s - 2.0)
    n = round(N)
    if abs(N - n) > 1e-9 or n < 3:
        raise ParameterError(f"alpha + beta = {s:g} is not 2N/(N-2) for an integer N >= 3")
    return n


def sobolev_pair_constant(alpha, beta, S, N=None):
    """((alpha/beta)^{beta/2*} + (beta/alpha)^{alpha/2*}) * S."""
    if N is None:
        N = _infer_dimension(alpha, beta)
    q = critical_exponent(N)
    if abs(alpha + beta - q) > 1e-12 * q:
        raise ParameterError(f"alpha + beta must equal 2* = {q:g}")
    if not (alpha > 1 and beta > 1):
        raise ParameterError("alpha and beta must exceed 1")
    return ((alpha / beta) ** (beta / q) + (beta / alpha) ** (alpha / q)) * S


# ---------------------------------------------------------------------------
# thresholds of the mass-subcritical and mass-supercritical theory

def subcritical_exponent_bound(N):
    """Upper limit on p for the two-solution result: 2+4/N (N <= 4), 2+2/(N-2) (N >= 5)."""
    return mass_critical_exponent(N) if N <= 4 else 2.0 + 2.0 / (N - 2.0)


def c0_threshold(params, gn, s_pair):
    """Threshold C0 of the smallness condition in the mass-subcritical case.

    ``gn`` is the root-form GN constant; the formula uses its p-th power.
    """
    if params.regime is not Regime.MASS_SUBCRITICAL or not params.p < subcritical_exponent_bound(params.N):
        raise RegimeError("C0 is defined for the mass-subcritical range with p below "
                          f"{subcritical_exponent_bound(params.N):g}")
    g, p, q = params.gamma, params.p, params.crit
    pg = p * g
    cp = gn**p
    lead = min(1.0 / g, p * (q + 2.0 - pg) / (2.0 * q))
    num = (q - 2.0) * (2.0 - pg) ** ((2.0 - pg) / (q - 2.0)) * s_pair ** (q * (2.0 - pg) / (2.0 * (q - 2.0)))
    den = cp * (q - pg) ** ((q - pg) / (q - 2.0))
    return lead * num / den


def smallness_holds(params, c0):
    """Strict smallness test nu^{(2-p g)/(2*-2)} < C0 / (a^{p(1-g)} + b^{p(1-g)})."""
    g, p, q = params.gamma, params.p, params.crit
    if params.nu <= 0:
        return False
    lhs = params.nu ** ((2.0 - p * g) / (q - 2.0))
    e = p * (1.0 - g)
    return lhs < c0 / (params.a**e + params.b**e)


def a0_threshold(params, gn, s_pair):
    """Mass threshold a0(nu) of the mass-supercritical case.

    Chosen so that e(a0) = nu^{-(N-2)/2} S_{alpha,beta}^{N/2} / N.
    """
    if params.regime is not Regime.MASS_SUPERCRITICAL or params.nu <= 0:
        raise RegimeError("a0 is defined for the mass-supercritical regime with nu > 0")
    N, p, g = params.N, params.p, params.gamma
    pg = p * g
    cp = gn**p
    inner = 2.0 * p * g * params.nu ** (-(N - 2.0) / 2.0) * s_pair ** (N / 2.0) / (N * (pg - 2.0))
    return (inner ** ((2.0 - pg) / 2.0) / (g * cp)) ** (1.0 / (p * (1.0 - g)))


@dataclass(frozen=True)
class HCurve:
    """h(rho) = rho^2/2 - A rho^{p g} - B rho^{2*}."""

    A: float
    B: float
    pg: float
    crit: float

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        return 0.5 * rho**2 - self.A * rho**self.pg - self.B * rho**self.crit


def h_curve(params, gn, s_pair):
    """Lower bound of the energy on the torus as a function of |grad|."""
    if params.regime is not Regime.MASS_SUBCRITICAL or params.nu <= 0:
        raise RegimeError("h is defined in the mass-subcritical regime with nu > 0")
    p, g, q = params.p, params.gamma, params.crit
    e = p * (1.0 - g)
    A = gn**p * (params.a**e + params.b**e) / p
    B = params.nu * s_pair ** (-q / 2.0) / q
    return HCurve(A=A, B=B, pg=p * g, crit=q)


def rho_star_r0_r1(params, gn, s_pair):
    """Return (rho_*, R0, R1) for h.

    rho_* maximizes g(rho) = rho^{2-pg} - 2* B rho^{2*-pg}, where
    h'(rho) = rho^{pg-1} (g(rho) - pg A); under the
    smallness condition h(rho_*) > 0 and h has exactly the zeros R0 < rho_* < R1.
    """
    h = h_curve(params, gn, s_pair)
    pg, q, B = h.pg, h.crit, h.B
    rho_star = ((2.0 - pg) / (q * (q - pg) * B)) ** (1.0 / (q - 2.0))
    if not h(rho_star) > 0:
        raise ThresholdError(f"h(rho_*) = {float(h(rho_star)):.3e} <= 0: smallness condition fails")
    # h / rho^{pg} is monotone on each side of rho_*, so bracketing is safe
    k = lambda r: float(h(r)) / r**pg
    lo = rho_star
    while k(lo) > 0:
        lo *= 0.5
    hi = rho_star
    while k(hi) > 0:
        hi *= 2.0
    r0 = optimize.brentq(k, lo, rho_star, xtol=1e-15 * rho_star, rtol=1e-15, maxiter=500)
    r1 = optimize.brentq(k, rho_star, hi, xtol=1e-15 * rho_star, rtol=1e-15, maxiter=500)
    return rho_star, r0, r1


# ---------------------------------------------------------------------------
# fully critical data

def _fmax_parts(nu, alpha, beta):
    q = alpha + beta

    def F(th):
        c, s = np.abs(np.cos(th)), np.abs(np.sin(th))
        return c**q + s**q + nu * c**alpha * s**beta

    def dF(th):
        c, s = np.cos(th), np.sin(th)
        return (-q * c ** (q - 1) * s + q * s ** (q - 1) * c
                + nu * (beta * c ** (alpha + 1) * s ** (beta - 1) - alpha * c ** (alpha - 1) * s ** (beta + 1)))

    return F, dF


def fmax_solve(nu, alpha, beta):
    """Maximize |x1|^{2*} + |x2|^{2*} + nu |x1|^a |x2|^b on the unit circle.

    The function only depends on |x1|, |x2|, so the angle is restricted to
    [0, pi/2].  Returns (F_max, x1, x2) with x1, x2 >= 0; among tied maxima
    the one with the smallest angle is returned.
    """
    if not nu > 0:
        raise ParameterError("nu must be positive")
    _infer_dimension(alpha, beta)
    F, dF = _fmax_parts(nu, alpha, beta)
    th = np.linspace(0.0, 0.5 * math.pi, SCAN_POINTS + 1)
    vals = F(th)
    k = int(np.argmax(vals))
    best = th[k]
    if 0 < k < SCAN_POINTS:
        lo, hi = th[k - 1], th[k + 1]
        if dF(lo) > 0 > dF(hi):
            best = optimize.brentq(dF, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return float(F(best)), math.cos(best), math.sin(best)


def critical_level(N, nu, alpha, beta, S):
    """(1/N) F_max^{-(N-2)/2} S^{N/2}."""
    fmax = fmax_solve(nu, alpha, beta)[0]
    return fmax ** (-(N - 2.0) / 2.0) * S ** (N / 2.0) / N


def k0l0_solve(nu, N, max_iter=100):
    """Positive root of the symmetric-exponent algebraic system by damped Newton."""
    q = critical_exponent(N)
    h = q / 2.0
    c = nu / q

    def res(x):
        k, l = x
        return np.array([k ** (q - 2) + c * k ** (h - 2) * l**h - 1.0,
                         c * k**h * l ** (h - 2) + l ** (q - 2) - 1.0])

    def jac(x):
        k, l = x
        return np.array([
            [(q - 2) * k ** (q - 3) + c * (h - 2) * k ** (h - 3) * l**h, c * h * k ** (h - 2) * l ** (h - 1)],
            [c * h * k ** (h - 1) * l ** (h - 2), c * (h - 2) * k**h * l ** (h - 3) + (q - 2) * l ** (q - 3)],
        ])

    x = np.array([1.0, 1.0])
    r = res(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= 1e-14:
            break
        try:
            step = np.linalg.solve(jac(x), -r)
        except np.linalg.LinAlgError as exc:
            raise ExistenceThresholdError(f"singular Jacobian at {x}") from exc
        t = 1.0
        while t > 1e-12:
            trial = x + t * step
            if np.all(trial > 0):
                rt = res(trial)
                if np.max(np.abs(rt)) < np.max(np.abs(r)):
                    x, r = trial, rt
                    break
            t *= 0.5
        else:
            break
    if not (np.all(x > 0) and np.max(np.abs(r)) <= 1e-10):
        raise ExistenceThresholdError(
            f"no positive root found (residual {np.max(np.abs(r)):.2e}); nu may lie below the existence threshold")
    return float(x[0]), float(x[1])


# ---------------------------------------------------------------------------
# bundle

@dataclass(frozen=True)
class ConstantsBundle:
    gamma_p: float
    sobolev_S: float
    sobolev_pair: float
    gn_constant: float | None = None
    c0: float | None = None
    a0: float | None = None
    rho_star: float | None = None
    r0: float | None = None
    r1: float | None = None
    fmax: float | None = None
    xtilde: tuple | None = None
    smallness: bool | None = None

    def to_dict(self):
        d = asdict(self)
        if d["xtilde"] is not None:
            d["xtilde"] = list(d["xtilde"])
        return d


_cache = {}
_cache_lock = threading.Lock()


def compute_constants(params):
    """All constants that are defined for ``params``; undefined ones are None.

    Results are cached on the exact parameter values.
    """
    with _cache_lock:
        if params in _cache:
            return _cache[params]
    from .grid import sobolev_constant
    from .scalar import gn_constant

    N, p = params.N, params.p
    S = sobolev_constant(N)
    s_pair = sobolev_pair_constant(params.alpha, params.beta, S, N)
    out = dict(gamma_p=params.gamma, sobolev_S=S, sobolev_pair=s_pair)
    regime = params.regime
    if regime is not Regime.FULLY_CRITICAL:
        gn = gn_constant(N, p)
        out["gn_constant"] = gn
        if regime is Regime.MASS_SUBCRITICAL and p < subcritical_exponent_bound(N) and params.nu > 0:
            c0 = c0_threshold(params, gn, s_pair)
            out["c0"] = c0
            out["smallness"] = smallness_holds(params, c0)
            if out["smallness"]:
                out["rho_star"], out["r0"], out["r1"] = rho_star_r0_r1(params, gn, s_pair)
        if regime is Regime.MASS_SUPERCRITICAL and params.nu > 0:
            out["a0"] = a0_threshold(params, gn, s_pair)
    if params.nu > 0:
        fmax, x1, x2 = fmax_solve(params.nu, params.alpha, params.beta)
        out["fmax"] = fmax
        out["xtilde"] = (x1, x2)
    bundle = ConstantsBundle(**out)
    with _cache_lock:
        _cache[params] = bundle
    return bundle
