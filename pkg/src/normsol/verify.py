"""Checks that tie solver output back to the statements being reproduced.

Every check returns :class:`CheckResult` records with the two sides of the
inequality or identity that was tested, so a failing check can be read
without rerunning anything.  Nothing here mutates its inputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .constants import Regime, compute_constants
from .errors import NormsolError, ParameterError, RegimeError
from .fiber import expected_pattern, fiber_critical_points, random_torus_state
from .functional import FiberMap, pohozaev, scale
from .grid import (RadialField, bubble_values, critical_exponent, cutoff_bubble, default_grid,
                   dilate, make_grid)
from .scalar import e_of_a

log = logging.getLogger(__name__)

CONTRADICTION = "THEOREM CONTRADICTION"
ORDER_SLACK = 1e-4
SLOPE_TOL = 0.1
MIN_DECADES = 1.5


@dataclass
class CheckResult:
    name: str
    claim_ref: str
    passed: bool
    lhs: float
    rhs: float
    tolerance: float
    details: str = ""

    def to_dict(self):
        return asdict(self)


def _le(name, ref, lhs, rhs, tol, details=""):
    return CheckResult(name, ref, bool(lhs <= rhs + tol), float(lhs), float(rhs), float(tol), details)


# ---------------------------------------------------------------------------
# cutoff-bubble asymptotics

def eta_exponents(N, p):
    """Expected small-eps exponents of the cutoff-bubble quantities.

    Returns a dict row -> (exponent, divide_by_log).  Rows: ``gradient``
    (|grad eta|^2 against the full bubble), ``critical`` (|eta|_{2*}^{2*}
    likewise), ``mass`` (|eta|_2^2) and ``p_norm`` (|eta|_p^p).
    """
    q = critical_exponent(N)
    if not 2.0 < p < q:
        raise ParameterError(f"p must lie in (2, {q:g})")
    rows = {"gradient": (N - 2.0, False), "critical": (float(N), False)}
    if N >= 5:
        rows["mass"] = (2.0, False)
    elif N == 4:
        rows["mass"] = (2.0, True)
    else:
        rows["mass"] = (1.0, False)
    if N >= 4 or p > 3.0:
        rows["p_norm"] = (N - (N - 2.0) * p / 2.0, False)
    elif p < 3.0:
        rows["p_norm"] = (p / 2.0, False)
    else:
        rows["p_norm"] = (1.5, True)
    return rows


def eta_quantities(grid, eps, p):
    """The four cutoff-bubble quantities at one eps on one grid.

    The gradient and critical-norm rows are differences to the uncut bubble
    sampled on the same grid, so the quadrature error of the leading
    constant cancels.
    """
    N = grid.N
    q = critical_exponent(N)
    U = RadialField(grid, bubble_values(N, eps, grid.nodes))
    eta = cutoff_bubble(grid, eps)
    return {
        "gradient": abs(U.grad_sq() - eta.grad_sq()),
        "critical": abs(U.lp_pow(q) - eta.lp_pow(q)),
        "mass": eta.mass_sq(),
        "p_norm": eta.lp_pow(p),
    }


def fit_slope(eps, values, drop_ends=True):
    """Least-squares slope of log(values) against log(eps)."""
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if drop_ends:
        order = np.argsort(x)
        keep = order[1:-1]
        x, y = x[keep], y[keep]
    return float(np.polyfit(x, y, 1)[0])


def check_eta_scalings(N, p, eps_list, grid=None):
    """Regress the cutoff-bubble quantities on eps and compare slopes.

    Rows carrying a logarithmic factor are divided by |log eps| first.  The
    smallest and largest eps are dropped from the fit.
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))
    if eps.size < 5:
        raise ParameterError("need at least five eps values (two are dropped from the fit)")
    if math.log10(eps[-1] / eps[0]) < MIN_DECADES:
        raise ParameterError(f"eps values must span at least {MIN_DECADES} decades")
    if grid is None:
        grid = default_grid(N, "bubble")
    table = eta_exponents(N, p)
    samples = [eta_quantities(grid, e, p) for e in eps]
    out = []
    for row, (expo, with_log) in table.items():
        vals = np.array([s[row] for s in samples])
        if with_log:
            vals = vals / np.abs(np.log(eps))
        slope = fit_slope(eps, vals)
        out.append(CheckResult(
            name=f"eta_{row}_slope_N{N}_p{p:g}",
            claim_ref="cutoff bubble asymptotics",
            passed=bool(abs(slope - expo) <= SLOPE_TOL),
            lhs=slope, rhs=expo, tolerance=SLOPE_TOL,
            details=("log factor divided out; " if with_log else "")
                    + f"eps in [{eps[0]:.3g}, {eps[-1]:.3g}], {eps.size - 2} points fitted"))
    return out


# ---------------------------------------------------------------------------
# energy orderings

def _pair_threshold(params, consts):
    N = params.N
    return params.nu ** (-(N - 2.0) / 2.0) * consts.sobolev_pair ** (N / 2.0) / N


def check_energy_orderings(params, reports, constants=None):
    """Inequalities between the levels found for one parameter set.

    ``reports`` maps level names (``m_ab``, ``l_ab``, ``m_r_ab``) to
    :class:`~normsol.flow.SolveReport`.  Each inequality is tested with
    slack 1e-4 times the scale of the report involved.
    """
    consts = constants or compute_constants(params)
    reg = params.regime
    out = []
    m = reports.get("m_ab")
    l = reports.get("l_ab")
    mr = reports.get("m_r_ab")

    def e_pair():
        return e_of_a(params.N, params.p, params.a).energy, e_of_a(params.N, params.p, params.b).energy

    if reg is Regime.MASS_SUBCRITICAL:
        if m is not None:
            sl = ORDER_SLACK * m.scale
            out.append(_le("m_negative", "local minimum level is negative", m.energy, 0.0, sl))
            if params.omega1 > 0 and params.omega2 > 0:
                ea, eb = e_pair()
                out.append(_le("m_below_scalar_levels", "m(a,b) < min{e(a), e(b)}",
                               m.energy, min(ea, eb), sl, f"e(a)={ea:.10g}, e(b)={eb:.10g}"))
        if l is not None:
            sl = ORDER_SLACK * l.scale
            out.append(_le("l_positive", "mountain-pass level is positive", 0.0, l.energy, sl))
            if m is not None:
                out.append(_le("m_below_l", "m(a,b) < l(a,b)", m.energy, l.energy, sl))
                if params.nu > 0:
                    thr = _pair_threshold(params, consts)
                    out.append(_le("l_below_m_plus_threshold", "l(a,b) < m(a,b) + nu^{-(N-2)/2} S_ab^{N/2}/N",
                                   l.energy, m.energy + thr, sl, f"threshold={thr:.10g}"))
    elif reg in (Regime.MASS_SUPERCRITICAL, Regime.MASS_CRITICAL) and m is not None and params.nu > 0:
        sl = ORDER_SLACK * m.scale
        thr = _pair_threshold(params, consts)
        out.append(_le("m_positive", "0 < m(a,b)", 0.0, m.energy, sl))
        out.append(_le("m_below_threshold", "m(a,b) < nu^{-(N-2)/2} S_ab^{N/2}/N", m.energy, thr, sl,
                       f"threshold={thr:.10g}"))
        if reg is Regime.MASS_SUPERCRITICAL:
            ea, eb = e_pair()
            out.append(_le("m_below_scalar_levels", "m(a,b) < min{e(a), e(b)}", m.energy, min(ea, eb), sl,
                           f"e(a)={ea:.10g}, e(b)={eb:.10g}"))
    if mr is not None:
        sl = ORDER_SLACK * mr.scale
        ea, eb = e_pair()
        out.append(_le("m_r_negative", "repulsive level is negative", mr.energy, 0.0, sl))
        out.append(_le("m_r_below_sum", "m_r(a,b) <= e(a) + e(b)", mr.energy, ea + eb, sl,
                       f"e(a)={ea:.10g}, e(b)={eb:.10g}"))
        out.append(_le("sum_below_min", "e(a) + e(b) < min{e(a), e(b)}", ea + eb, min(ea, eb), 0.0))
    return out


def check_monotonicity(levels, slack=ORDER_SLACK):
    """m(a,b) <= m(a1,b1) + slack whenever a1 <= a and b1 <= b.

    ``levels`` maps (a, b) to the level found there.
    """
    worst = -math.inf
    pair = None
    keys = sorted(levels)
    for a, b in keys:
        for a1, b1 in keys:
            if a1 <= a and b1 <= b and (a1, b1) != (a, b):
                gap = levels[(a, b)] - levels[(a1, b1)]
                if gap > worst:
                    worst, pair = gap, ((a, b), (a1, b1))
    if pair is None:
        return CheckResult("mass_monotonicity", "m(a,b) <= m(a1,b1) for a1 <= a, b1 <= b",
                           True, 0.0, 0.0, slack, "fewer than two comparable mass pairs")
    return CheckResult("mass_monotonicity", "m(a,b) <= m(a1,b1) for a1 <= a, b1 <= b",
                       bool(worst <= slack), worst, 0.0, slack,
                       f"largest increase between {pair[1]} and {pair[0]}")


# ---------------------------------------------------------------------------
# nonexistence probes

def _probe_setup(params):
    reg = params.regime
    if reg is Regime.FULLY_CRITICAL:
        if params.N >= 5:
            raise RegimeError("fully critical with N >= 5 is an existence regime; probe not applicable")
        return make_grid(params.N, 1.0e7, 4096, "log-stretched", core=1e-4), False
    if reg is Regime.DEFOCUSING:
        return default_grid(params.N), params.N >= 5
    raise RegimeError(f"no nonexistence statement to probe in regime {reg.value}")


def classify_probe_run(params, rep, lam_tol=None):
    """Label one probe run; returns (label, is_contradiction).

    A contradiction is a converged, nonnegative state whose multipliers are
    both positive: the multiplier identity rules this out.
    """
    if lam_tol is None:
        lam_tol = 1e-4 * rep.scale / (params.a**2 + params.b**2)
    nonneg = min(float(np.min(rep.state.u.values)), float(np.min(rep.state.v.values))) >= 0.0
    total = rep.lambda1 * params.a**2 + rep.lambda2 * params.b**2
    sig = f"lambda=({rep.lambda1:.4g}, {rep.lambda2:.4g}), lambda1 a^2 + lambda2 b^2 = {total:.4g}"
    if not rep.converged:
        return f"not converged ({sig})", False
    if nonneg and rep.lambda1 > lam_tol and rep.lambda2 > lam_tol:
        return f"converged positive state with positive multipliers ({sig})", True
    return f"converged with sign-contradictory multipliers ({sig})", False


def nonexistence_probe(params, seeds, grid=None, budget=200):
    """Run the fiber-maximum descent from several seeds where no solution should exist.

    Failure to converge is evidence, not proof.  The check fails (and logs
    a THEOREM CONTRADICTION) only if some run converges to a positive state
    whose multipliers are consistent with an actual solution.
    """
    from .flow import mountain_pass

    g0, inconclusive = _probe_setup(params)
    grid = grid or g0
    notes = []
    hits = 0
    for s in seeds:
        rng = np.random.default_rng(s)
        seed = random_torus_state(grid, params.a, params.b, rng)
        try:
            rep = mountain_pass(params, seed, budget=budget, raise_on_failure=False)
        except NormsolError as exc:
            notes.append(f"seed {s}: solver error {type(exc).__name__}: {exc}")
            continue
        label, bad = classify_probe_run(params, rep)
        hits += bad
        notes.append(f"seed {s}: {label}")
    details = "; ".join(notes) + ". Failure to converge is evidence of nonexistence, not a proof."
    if inconclusive:
        details += " Inconclusive by design: the extra integrability hypothesis for N >= 5 is not visible on a grid."
    if hits:
        details = f"{CONTRADICTION}: {hits} run(s) converged to a positive solution. " + details
        log.error("%s in %s probe: %s", CONTRADICTION, params.regime.value, details)
    ref = ("no positive normalized solution for p = 2*, N = 3, 4" if params.regime is Regime.FULLY_CRITICAL
           else "lambda1 a^2 + lambda2 b^2 = (1 - gamma_p) Q < 0 when defocusing")
    return CheckResult(f"nonexistence_{params.regime.value}_N{params.N}", ref, hits == 0,
                       float(hits), 0.0, 0.0, details)


# ---------------------------------------------------------------------------
# fiber structure and identity

_PATTERN_TEXT = {"min,max": "two critical points (min then max)", "max": "one maximum",
                 "min": "one minimum", "none": "no critical point"}


def check_fiber_structure(params, n_samples, grid=None, seed=0):
    """Census of fiber root patterns over random torus states."""
    grid = grid or default_grid(params.N)
    rng = np.random.default_rng(seed)
    expected = None
    agree = 0
    notes = []
    for k in range(n_samples):
        st = random_torus_state(grid, params.a, params.b, rng)
        d = fiber_critical_points(params, st, strict=False)
        fm = FiberMap.from_state(params, st)
        expected = expected_pattern(params, fm)
        ok = d.consistent
        if ok and params.regime is Regime.REPULSIVE and expected == "min":
            ok = all(r.phi < 0 for r in d.roots)
            if not ok:
                notes.append(f"sample {k}: minimum value not negative")
        if expected is None:
            notes.append("no structure statement for this regime")
            break
        agree += ok
        if not ok and len(notes) < 5:
            notes.append(f"sample {k}: " + "; ".join(d.notes))
    if expected is None:
        return CheckResult(f"fiber_structure_{params.regime.value}", "fiber structure", True,
                           0.0, 0.0, 0.0, "; ".join(notes))
    frac = agree / n_samples
    return CheckResult(f"fiber_structure_{params.regime.value}",
                       f"fiber map has {_PATTERN_TEXT.get(expected, expected)}",
                       frac == 1.0, frac, 1.0, 0.0,
                       f"{agree}/{n_samples} samples agree" + ("; " + "; ".join(notes) if notes else ""))


def check_fiber_identity(params, n_states, ts=None, grid=None, seed=0, tol=1e-4):
    """Phi'(t) from the integrals against P of the dilated state.

    The derivative of the fiber map at t equals the Pohozaev functional of
    the dilated state; the two sides here use different discretizations
    (closed form versus interpolated dilation).
    """
    grid = grid or default_grid(params.N)
    ts = np.linspace(-1.0, 1.0, 101) if ts is None else np.asarray(ts, dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    where = None
    for k in range(n_states):
        st = random_torus_state(grid, params.a, params.b, rng)
        fm = FiberMap.from_state(params, st)
        for t in ts:
            d = dilate(st, float(t))
            err = abs(fm.d1(float(t)) - pohozaev(params, d)) / scale(params, d)
            if err > worst:
                worst, where = err, (k, float(t))
    return CheckResult("fiber_pohozaev_identity", "Phi'(t) = P(t * (u, v))", bool(worst <= tol),
                       worst, 0.0, tol,
                       f"max relative error over {n_states} states and {ts.size} t values"
                       + (f", attained at state {where[0]}, t={where[1]:.3g}" if where else ""))


# ---------------------------------------------------------------------------
# per-report identities

def check_report_identities(params, rep, tol=1e-4):
    """Pohozaev and multiplier identity residuals of one report."""
    sc = rep.scale
    return [
        CheckResult(f"{rep.level_name}_pohozaev", "P = 0 at solutions", abs(rep.pohozaev_residual) <= 1e-5 * sc,
                    abs(rep.pohozaev_residual), 0.0, 1e-5 * sc),
        CheckResult(f"{rep.level_name}_multiplier_identity",
                    "lambda1 a^2 + lambda2 b^2 = (1 - gamma_p)(omega1 |u|_p^p + omega2 |v|_p^p)",
                    abs(rep.identity_residual) <= tol * sc, abs(rep.identity_residual), 0.0, tol * sc),
    ]


def summary_table(checks):
    """Fixed-width human-readable table of check results."""
    width = max([len(c.name) for c in checks] + [4])
    lines = [f"{'name':<{width}}  result  {'lhs':>14}  {'rhs':>14}  {'tol':>10}"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.lhs:>14.6g}  "
                     f"{c.rhs:>14.6g}  {c.tolerance:>10.3g}")
    return "\n".join(lines)
