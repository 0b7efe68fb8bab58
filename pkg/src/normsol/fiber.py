"""Critical points of the fiber map and projections onto the Pohozaev set.

Phi'(t) = e^{2t} G(t) with

    G(t) = K - gamma_p Q e^{(p gamma_p - 2) t} - nu R e^{(2* - 2) t},

so roots are located on G, which stays O(1) over the whole scan window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .constants import Regime, compute_constants
from .errors import DilationRangeError, RegimeError, StructureViolation
from .functional import FiberMap, integrals, pohozaev, scale
from .grid import dilate, max_dilation

T_RANGE = 40.0
T_POINTS = 4096
FLOOR = 1e-300
ZERO_BAND = 1e-8


class Classification(str, enum.Enum):
    P_PLUS = "P_PLUS"
    P_ZERO = "P_ZERO"
    P_MINUS = "P_MINUS"
    OFF_MANIFOLD = "OFF_MANIFOLD"


@dataclass(frozen=True)
class FiberRoot:
    t: float
    phi: float
    phi2: float


@dataclass(frozen=True)
class FiberDiagnostics:
    regime: Regime
    roots: tuple
    t_plus: float | None
    t_minus: float | None
    classification: Classification
    expected: str | None = None
    consistent: bool = True
    notes: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "regime": self.regime.value,
            "roots": [{"t": r.t, "phi": r.phi, "phi2": r.phi2} for r in self.roots],
            "t_plus": self.t_plus,
            "t_minus": self.t_minus,
            "classification": self.classification.value,
            "expected": self.expected,
            "consistent": self.consistent,
            "notes": list(self.notes),
        }


def _floored_map(fm):
    # floors keep log-scale behaviour sane for vanishing integrals
    K = max(fm.K, FLOOR)
    Q = math.copysign(max(abs(fm.Q), FLOOR), fm.Q) if fm.Q != 0 else 0.0
    R = max(fm.R, FLOOR) if fm.nu != 0 else fm.R
    return FiberMap(K=K, Q=Q, R=R, nu=fm.nu, p=fm.p, pg=fm.pg, crit=fm.crit)


def roots_of_map(fm, t_range=T_RANGE, n=T_POINTS):
    """Roots of Phi' in [-t_range, t_range]: lattice sign scan then bisection."""
    fm = _floored_map(fm)
    ts = np.linspace(-t_range, t_range, n)
    a = fm.pg - 2.0
    b = fm.crit - 2.0
    with np.errstate(over="ignore"):
        G = fm.K - fm.pg / fm.p * fm.Q * np.exp(a * ts) - fm.nu * fm.R * np.exp(b * ts)
    s = np.sign(G)
    out = []
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        t = optimize.brentq(fm.G, ts[i], ts[i + 1], xtol=1e-12, rtol=1e-15, maxiter=200)
        out.append(FiberRoot(t=t, phi=fm.value(t), phi2=fm.d2(t)))
    for i in np.nonzero(s == 0)[0]:
        t = float(ts[i])
        out.append(FiberRoot(t=t, phi=fm.value(t), phi2=fm.d2(t)))
    out.sort(key=lambda r: r.t)
    return out


def expected_pattern(params, fm=None):
    """Root pattern promised by the structure results, or None when no claim applies.

    Patterns: "min,max" (two roots, local min first), "max" and "min".
    """
    reg = params.regime
    pbar = 2.0 + 4.0 / params.N
    if reg is Regime.MASS_SUBCRITICAL:
        if params.nu > 0:
            c = compute_constants(params)
            return "min,max" if c.smallness else None
        if params.nu == 0:
            return "min"
    if reg is Regime.MASS_CRITICAL and params.nu > 0 and fm is not None:
        return "max" if fm.K - fm.pg / fm.p * fm.Q > 0 else "none"
    if reg in (Regime.MASS_SUPERCRITICAL, Regime.FULLY_CRITICAL) and params.nu > 0:
        return "max"
    if reg is Regime.REPULSIVE and params.p < pbar and params.omega1 > 0 and params.omega2 > 0:
        return "min"
    if reg is Regime.DEFOCUSING and params.nu > 0:
        return "max"
    return None


def _pattern_of(roots):
    if not roots:
        return "none"
    return ",".join("min" if r.phi2 > 0 else "max" for r in roots)


def classify_map(fm, tol=ZERO_BAND):
    sc = fm.scale(0.0)
    if abs(fm.d1(0.0)) > tol * sc:
        return Classification.OFF_MANIFOLD
    d2 = fm.d2(0.0)
    if abs(d2) <= tol * sc:
        return Classification.P_ZERO
    return Classification.P_PLUS if d2 > 0 else Classification.P_MINUS


def fiber_critical_points(params, state, strict=True):
    """Locate and classify all critical points of t -> Phi(t).

    With ``strict`` a root pattern that disagrees with the structure result
    for the regime raises :class:`StructureViolation`.
    """
    fm = FiberMap.from_state(params, state)
    roots = roots_of_map(fm)
    expected = expected_pattern(params, fm)
    found = _pattern_of(roots)
    notes = []
    for r in roots:
        fm_s = fm.scale(r.t)
        if abs(fm.d1(r.t)) > 1e-10 * fm_s:
            notes.append(f"root t={r.t:.6g} has residual {abs(fm.d1(r.t)) / fm_s:.2e} of scale")
    consistent = expected is None or expected == found
    if not consistent:
        notes.append(f"expected {expected}, found {found}")
    if expected == "min,max" and any(abs(r.phi2) <= ZERO_BAND * fm.scale(r.t) for r in roots):
        consistent = False
        notes.append("degenerate root in dead band where the degenerate set should be empty")
    t_plus = t_minus = None
    mins = [r.t for r in roots if r.phi2 > 0]
    maxs = [r.t for r in roots if r.phi2 < 0]
    if mins:
        t_plus = mins[0]
    if maxs:
        t_minus = maxs[-1]
    diag = FiberDiagnostics(regime=params.regime, roots=tuple(roots), t_plus=t_plus, t_minus=t_minus,
                            classification=classify_map(fm), expected=expected,
                            consistent=consistent, notes=tuple(notes))
    if strict and not consistent:
        raise StructureViolation("; ".join(notes))
    return diag


def classify(params, state, tol=ZERO_BAND):
    return classify_map(FiberMap.from_state(params, state), tol)


def _project(params, state, kind):
    diag = fiber_critical_points(params, state, strict=False)
    t0 = diag.t_minus if kind == "minus" else diag.t_plus
    if t0 is None:
        raise RegimeError(f"fiber map has no {'maximum' if kind == 'minus' else 'minimum'} "
                          f"in regime {params.regime.value}")
    sc = scale(params, state)
    if abs(pohozaev(params, state)) <= 1e-13 * sc and abs(t0) < 1e-10:
        return state, 0.0
    # refine on the discrete P of the dilated, renormalized grid state; near a
    # maximum of Phi, P decreases through zero, near a minimum it increases
    sign = -1.0 if kind == "minus" else 1.0

    def f(t):
        return sign * pohozaev(params, dilate(state, t))

    tmax = max_dilation(state.grid)
    d = 1e-3 + 1e-3 * abs(t0)
    for _ in range(60):
        lo, hi = t0 - d, t0 + d
        if max(abs(lo), abs(hi)) > tmax:
            raise DilationRangeError(f"projection needs |t| ~ {abs(t0):.3g} beyond grid range")
        flo, fhi = f(lo), f(hi)
        if flo < 0 < fhi:
            break
        d *= 2.0
        if d > 1.0 + abs(t0):
            raise RegimeError("discrete Pohozaev root not bracketed near the fiber root")
    t = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    out = dilate(state, t)
    return out, t


def project_minus(params, state, return_t=False):
    """Dilate onto the fiber maximum (the P- point of the fiber)."""
    s, t = _project(params, state, "minus")
    return (s, t) if return_t else s


def project_plus(params, state, return_t=False):
    """Dilate onto the local fiber minimum (the P+ point, or the unique minimum)."""
    s, t = _project(params, state, "plus")
    return (s, t) if return_t else s


def random_torus_state(grid, a, b, rng, n_bumps=2):
    """Positive radial state built from Gaussian bumps, normalized to (a, b).

    Centres lie in [0, 3] and widths in [0.7, 3]; u and v share their bumps'
    positions loosely so the coupling integral is always positive.
    """
    from .grid import RadialField, StatePair

    r = grid.nodes

    def one():
        vals = np.zeros_like(r)
        for _ in range(n_bumps):
            c = rng.uniform(0.0, 3.0)
            w = rng.uniform(0.7, 3.0)
            amp = rng.uniform(0.2, 1.0)
            vals += amp * np.exp(-0.5 * ((r - c) / w) ** 2)
        return vals

    u = RadialField(grid, one()).normalized(a)
    v = RadialField(grid, one()).normalized(b)
    return StatePair(u, v, a, b)
