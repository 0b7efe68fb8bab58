"""Constrained solvers on the mass torus.

All iterative solvers share one engine: a Sobolev-preconditioned gradient
descent on the torus for a *reduced* functional

    J(w) = Phi_w(t_w),

where t_w is the selected critical point of the fiber map of w (fiber
maximum for the mountain-pass level, fiber minimum for the local and
repulsive minima).  J and its gradient come from the closed-form fiber
map, which needs only the integrals K, Q and R; dilation onto the fiber
point is applied sparingly since it needs interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import Regime, compute_constants, fmax_solve
from .errors import (BasinEscapeError, BudgetError, DilationRangeError, ParameterError, RegimeError,
                     SaddleSearchError, ThresholdError)
from .fiber import project_minus, project_plus, roots_of_map
from .functional import (FiberMap, energy, gradient, integrals, multiplier_identity_residual,
                         multipliers, pohozaev, scale)
from .grid import (RadialField, StatePair, bubble_values, dilate_field, max_dilation,
                   sobolev_constant, solve_shifted, stiffness_banded, stiffness_sparse)

ARMIJO = 1e-4
BUDGET = 50_000
TOL_FACTOR = 1e-6
MIN_STEP = 1e-16
MAX_STEP = 1e3
RESTART_EVERY = 50
RECENTER = 0.05
FINAL_T = 1e-7
MAX_POLISH = 8
NEWTON_MAXIT = 30
NEWTON_HANDOFF = 1e-3


@dataclass
class SolveReport:
    state: StatePair
    energy: float
    level_name: str
    pohozaev_residual: float
    lambda1: float
    lambda2: float
    tangent_gradient_norm: float
    iterations: int
    converged: bool
    scale: float = 0.0
    identity_residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "level_name": self.level_name,
            "energy": self.energy,
            "pohozaev_residual": self.pohozaev_residual,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "tangent_gradient_norm": self.tangent_gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "scale": self.scale,
            "identity_residual": self.identity_residual,
            "mass_u": self.state.u.l2(),
            "mass_v": self.state.v.l2(),
            "diagnostics": self.diagnostics,
        }


def build_report(params, state, level_name, tgn=float("nan"), iterations=0, converged=False,
                 diagnostics=None):
    """Evaluate energy, residuals and multipliers of a final state."""
    grads = gradient(params, state)
    lams = multipliers(params, state, grads)
    return SolveReport(
        state=state,
        energy=energy(params, state).total,
        level_name=level_name,
        pohozaev_residual=pohozaev(params, state),
        lambda1=lams[0],
        lambda2=lams[1],
        tangent_gradient_norm=tgn,
        iterations=iterations,
        converged=converged,
        scale=scale(params, state),
        identity_residual=multiplier_identity_residual(params, state, lams),
        diagnostics=dict(diagnostics or {}),
    )


# ---------------------------------------------------------------------------
# reduced functionals

@dataclass(frozen=True)
class Reduced:
    """Reduced value of a state and what is needed for its gradient."""

    J: float
    K: float            # kinetic integral at the fiber point
    ts: tuple           # fiber parameter per component
    weights: tuple      # (kinetic, self, coupling) factors per component


@dataclass(frozen=True)
class Reduction:
    """How a state is mapped onto its fiber critical point.

    kind is "minus" (fiber maximum), "plus" (first fiber minimum) or
    "none" (plain constrained descent of I).  With ``componentwise`` the two
    components are dilated independently, which is the right reduction
    when the coupling vanishes.
    """

    kind: str
    componentwise: bool = False

    def evaluate(self, params, state):
        """Closed-form reduced value, or None if the fiber point is absent."""
        pg, crit = params.p * params.gamma, params.crit
        if self.kind == "none":
            one = (1.0, 1.0, 1.0)
            return Reduced(energy(params, state, False).total, integrals(params, state, False).K,
                           (0.0, 0.0), (one, one))
        if self.componentwise:
            total = kin = 0.0
            ts = []
            for fm in _component_maps(params, state):
                t = _pick(roots_of_map(fm), self.kind)
                if t is None:
                    return None
                total += fm.value(t)
                kin += math.exp(2 * t) * fm.K
                ts.append(t)
            wts = tuple((math.exp(2 * t), math.exp(pg * t), 0.0) for t in ts)
            return Reduced(total, kin, tuple(ts), wts)
        fm = FiberMap.from_state(params, state, False)
        t = _pick(roots_of_map(fm), self.kind)
        if t is None:
            return None
        wt = (math.exp(2 * t), math.exp(pg * t), math.exp(crit * t))
        return Reduced(fm.value(t), math.exp(2 * t) * fm.K, (t, t), (wt, wt))

    def value(self, params, state):
        """(J, K at the fiber point); (None, None) if the fiber point is absent."""
        r = self.evaluate(params, state)
        return (None, None) if r is None else (r.J, r.K)

    def project(self, params, state):
        if self.kind == "none":
            return state
        if self.componentwise:
            return _project_components(params, state, self.kind)
        return project_minus(params, state) if self.kind == "minus" else project_plus(params, state)


def _pick(roots, kind):
    if kind == "minus":
        ts = [r.t for r in roots if r.phi2 < 0]
        return ts[-1] if ts else None
    ts = [r.t for r in roots if r.phi2 > 0]
    return ts[0] if ts else None


def _component_maps(params, state):
    ints = integrals(params, state, check_mass=False)
    pg = params.p * params.gamma
    return (FiberMap(K=state.u.grad_sq(), Q=params.omega1 * ints.Q1, R=0.0, nu=0.0, p=params.p,
                     pg=pg, crit=params.crit),
            FiberMap(K=state.v.grad_sq(), Q=params.omega2 * ints.Q2, R=0.0, nu=0.0, p=params.p,
                     pg=pg, crit=params.crit))


def _project_components(params, state, kind):
    from scipy import optimize

    out = []
    g = params.gamma
    for fld, fm, omega, mass in zip((state.u, state.v), _component_maps(params, state),
                                    (params.omega1, params.omega2), (state.a, state.b)):
        t0 = _pick(roots_of_map(fm), kind)
        if t0 is None:
            raise RegimeError("component fiber map has no suitable critical point")
        sign = -1.0 if kind == "minus" else 1.0

        def f(t, fld=fld, omega=omega, mass=mass):
            d = dilate_field(fld, t).normalized(mass)
            return sign * (d.grad_sq() - g * omega * d.lp_pow(params.p))

        dt = 1e-3 + 1e-3 * abs(t0)
        while not f(t0 - dt) < 0 < f(t0 + dt):
            dt *= 2.0
            if dt > 1.0 + abs(t0):
                raise RegimeError("component Pohozaev root not bracketed")
        t = optimize.brentq(f, t0 - dt, t0 + dt, xtol=1e-14, rtol=1e-15)
        out.append(dilate_field(fld, t).normalized(mass))
    return StatePair(out[0], out[1], state.a, state.b)


# ---------------------------------------------------------------------------
# descent engine

def _tangent_direction(state, grads, shifts):
    """Preconditioned, torus-tangent descent direction and its slope."""
    grid = state.grid
    dirs = []
    slope = 0.0
    for x, g, sigma in zip((state.u, state.v), grads, shifts):
        band = stiffness_banded(grid, sigma)
        z = solve_shifted(grid, sigma, g.values, band)
        y = solve_shifted(grid, sigma, x.values, band)
        W = grid.weights
        mu = np.dot(W, z * x.values) / np.dot(W, y * x.values)
        d = -(z - mu * y)
        dirs.append(d)
        slope += float(np.dot(W, g.values * d))
    return dirs, slope


def _shifts(params, state, grads, floor):
    lams = multipliers(params, state, grads)
    return tuple(max(lam, floor) for lam in lams), lams


def _tangent_norm(params, state, grads, floor):
    shifts, _ = _shifts(params, state, grads, floor)
    return math.sqrt(abs(_tangent_direction(state, grads, shifts)[1]))


def descend(params, seed, reduction, level_name, tol=None, budget=BUDGET, shift_floor=None,
            ball=None, escape=None, raise_on_failure=True, record_history=False, use_newton=True):
    """Minimize the reduced functional J(w) = Phi_w(t_w) from ``seed``.

    Iterates are not dilated at every step.  The derivative of J at w is
    the derivative of Phi_w(t) at fixed t = t_w (the t-derivative vanishes
    there), which is a reweighting of the gradient of I.  Dilation, which
    needs interpolation, is only applied to recentre (when |t_w| exceeds
    RECENTER) and before the final convergence test, which is done on the
    gradient of I itself.

    Once the gradient has dropped by NEWTON_HANDOFF the iterate is handed to
    :func:`newton_refine`.  Its result is kept only if it is a converged
    point of the same kind (see ``_accept_newton``); otherwise descent goes
    on to the full tolerance.

    Parameters
    ----------
    reduction : Reduction
        Which fiber critical point defines the reduced functional.
    tol : float, optional
        Absolute bound on the tangent gradient norm; default is
        1e-6 times the norm at the (projected) seed.
    ball, escape : float, optional
        Gradient-norm radii: steps ending outside ``ball`` are rejected and
        an iterate outside ``escape`` raises :class:`BasinEscapeError`.
    """
    w = reduction.project(params, seed.renormalized())
    red = reduction.evaluate(params, w)
    if shift_floor is None:
        shift_floor = 1e-2 * integrals(params, w).K / (w.a**2 + w.b**2)
    W = w.grid.weights
    it = 0
    tgn0 = None
    stalled = False
    rejected = restarts = recentres = polishes = 0
    newton = None
    failure = None
    step_log = []
    history = []
    prev = None      # (direction, gradient arrays, |tangent gradient|^2, slope) of the last step
    s_prev = 1.0
    target = None
    while True:
        grads = gradient(params, w, False, red.weights)
        shifts, _ = _shifts(params, w, grads, shift_floor)
        sd, sd_slope = _tangent_direction(w, grads, shifts)
        tgn = math.sqrt(abs(sd_slope))
        if tgn0 is None:
            tgn0 = tgn
            if tol is None:
                tol = TOL_FACTOR * tgn0
            target = max(tol, NEWTON_HANDOFF * tgn0) if use_newton else tol
        if record_history:
            history.append((it, red.J, tgn))
        if tgn <= target:
            if target > tol:
                # hand over to Newton on the discrete Euler-Lagrange system
                cand, nhist, _ = newton_refine(params, w)
                ok, ctgn = _accept_newton(params, reduction, w, red, cand, tol, shift_floor)
                newton = {"residuals": nhist, "accepted": ok}
                target = tol
                if ok:
                    w, tgn = cand, ctgn
                    break
                prev = None
                continue
            if reduction.kind == "none" or max(abs(t) for t in red.ts) <= FINAL_T:
                break
            if polishes >= MAX_POLISH:
                break
            # close to the fiber point: dilate once and keep descending
            polishes += 1
            try:
                w = reduction.project(params, w)
            except (RegimeError, DilationRangeError) as exc:
                failure = str(exc)
                stalled = True
                break
            red = reduction.evaluate(params, w)
            prev = None
            continue
        if it >= budget:
            break
        gvals = (grads[0].values, grads[1].values)
        dirs, slope = sd, sd_slope
        if prev is not None and it % RESTART_EVERY:
            # Polak-Ribiere+ with the old direction moved to the new tangent space
            d_old, g_old, gg_old, _ = prev
            num = -sd_slope - sum(float(np.dot(W, -q * go)) for q, go in zip(sd, g_old))
            beta = max(0.0, num / gg_old)
            if beta > 0.0:
                cand = []
                for q, do, x in zip(sd, d_old, (w.u.values, w.v.values)):
                    do = do - np.dot(W, do * x) / np.dot(W, x * x) * x
                    cand.append(q + beta * do)
                cslope = sum(float(np.dot(W, g * d)) for g, d in zip(gvals, cand))
                if cslope < 0.0:
                    dirs, slope = cand, cslope
                else:
                    restarts += 1
        if prev is None:
            s = 1.0
        else:
            # expected first-order decrease matched to the previous step
            s = min(MAX_STEP, max(MIN_STEP, 2.0 * s_prev * prev[3] / slope))
        accepted = False
        while s >= MIN_STEP:
            trial = w.replace(w.u.values + s * dirs[0], w.v.values + s * dirs[1])
            rt = reduction.evaluate(params, trial)
            if rt is not None and rt.J <= red.J + ARMIJO * s * slope:
                if ball is not None and math.sqrt(rt.K) > ball:
                    rejected += 1
                else:
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            if dirs is not sd:
                # conjugate direction failed; retry from steepest descent
                prev = None
                restarts += 1
                continue
            if target > tol:
                target = tgn      # let Newton try from here
                continue
            stalled = True
            break
        prev = (dirs, gvals, tgn * tgn, slope)
        s_prev = s
        w, red = trial, rt
        if max(abs(t) for t in red.ts) > RECENTER:
            try:
                w = reduction.project(params, w)
            except (RegimeError, DilationRangeError) as exc:
                # typically a state collapsing onto the innermost cells
                failure = str(exc)
                stalled = True
                break
            red = reduction.evaluate(params, w)
            recentres += 1
            prev = None
        if escape is not None and math.sqrt(red.K) > escape:
            raise BasinEscapeError(f"iterate left the gradient ball of radius {escape:.4g} "
                                   f"at iteration {it}")
        step_log.append(s)
        it += 1
    # positivity: the exact solutions are positive; remove roundoff-level negatives
    neg = max(float(np.max(-w.u.values)), float(np.max(-w.v.values)), 0.0)
    if newton is None or not newton["accepted"]:
        if neg > 0.0:
            w = w.clamped_nonnegative()
        if reduction.kind != "none" and failure is None:
            try:
                w = reduction.project(params, w)
            except (RegimeError, DilationRangeError) as exc:
                failure = str(exc)
        tgn = _tangent_norm(params, w, gradient(params, w), shift_floor)
    diag = {
        "initial_gradient_norm": tgn0,
        "tol": tol,
        "stalled": stalled,
        "rejected_ball_steps": rejected,
        "cg_restarts": restarts,
        "recentres": recentres,
        "polishes": polishes,
        "newton": newton,
        "projection_failure": failure,
        "clamped_negative_max": neg,
        "shift_floor": shift_floor,
        "median_step": float(np.median(step_log)) if step_log else None,
        "min_step": float(np.min(step_log)) if step_log else None,
        "reduction": reduction.kind + (" (componentwise)" if reduction.componentwise else ""),
    }
    if record_history:
        diag["history"] = history
    rep = build_report(params, w, level_name, tgn, it, False, diag)
    rep.converged = bool(tgn <= tol and abs(rep.pohozaev_residual) <= 1e-5 * rep.scale
                         and max(w.mass_errors()) <= 1e-8)
    if not rep.converged and raise_on_failure:
        if it >= budget:
            raise BudgetError(f"{level_name}: budget of {budget} iterations exhausted "
                              f"(gradient {tgn:.3e}, tol {tol:.3e})", rep)
        raise SaddleSearchError(f"{level_name}: line search stalled at gradient {tgn:.3e} "
                                f"(tol {tol:.3e}) after {it} iterations", rep)
    return rep


# ---------------------------------------------------------------------------
# Newton refinement

def _euler_lagrange(params, state, lams):
    """Weighted residual (W g_u + l1 W u, W g_v + l2 W v, mass defects)."""
    gu, gv = gradient(params, state, False)
    W = state.grid.weights
    u, v = state.u.values, state.v.values
    return np.concatenate((W * (gu.values + lams[0] * u), W * (gv.values + lams[1] * v),
                           [0.5 * (np.dot(W, u * u) - state.a**2),
                            0.5 * (np.dot(W, v * v) - state.b**2)]))


def _jacobian(params, state, lams):
    from scipy import sparse

    grid = state.grid
    W = grid.weights
    A = stiffness_sparse(grid)
    u, v = state.u.values, state.v.values
    au, av = np.abs(u), np.abs(v)
    al, be, p = params.alpha, params.beta, params.p
    c = params.nu / params.crit
    with np.errstate(divide="ignore", invalid="ignore"):
        duu = params.omega1 * (p - 1) * au ** (p - 2) + c * al * (al - 1) * au ** (al - 2) * av**be
        dvv = params.omega2 * (p - 1) * av ** (p - 2) + c * be * (be - 1) * au**al * av ** (be - 2)
        duv = c * al * be * np.sign(u) * au ** (al - 1) * np.sign(v) * av ** (be - 1)
    duu, dvv, duv = (np.nan_to_num(x, nan=0.0, posinf=0.0) for x in (duu, dvv, duv))
    Huu = A + sparse.diags(W * (lams[0] - duu))
    Hvv = A + sparse.diags(W * (lams[1] - dvv))
    Huv = sparse.diags(-W * duv)
    cu = sparse.csr_matrix((W * u)[:, None])
    cv = sparse.csr_matrix((W * v)[:, None])
    return sparse.bmat([[Huu, Huv, cu, None],
                        [Huv, Hvv, None, cv],
                        [cu.T, None, None, None],
                        [None, cv.T, None, None]], format="csc")


def _residual_norm(F, W):
    M = W.size
    r = np.concatenate((F[:M] / np.sqrt(W), F[M:2 * M] / np.sqrt(W)))
    return math.sqrt(float(np.dot(r, r)) + float(np.dot(F[2 * M:], F[2 * M:])))


def _accept_newton(params, reduction, w, red, cand, tol, shift_floor):
    """Check a Newton result against the descent iterate it started from.

    Accepted if it is finite, converged, nonnegative up to roundoff, sits on
    the same fiber branch near t = 0 and has not moved up in energy by more
    than the handoff accuracy would allow.
    """
    u, v = cand.u.values, cand.v.values
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        return False, None
    amp = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
    if min(float(np.min(u)), float(np.min(v))) < -1e-8 * amp:
        return False, None
    tgn = _tangent_norm(params, cand, gradient(params, cand), shift_floor)
    if not tgn <= tol:
        return False, None
    sc = scale(params, cand)
    if abs(pohozaev(params, cand)) > 1e-5 * sc:
        return False, None
    rc = reduction.evaluate(params, cand)
    if rc is None or max(abs(t) for t in rc.ts) > 1e-3:
        return False, None
    if energy(params, cand).total > red.J + 1e-6 * sc:
        return False, None
    return True, tgn


def newton_refine(params, state, maxit=NEWTON_MAXIT, rtol=1e-13):
    """Newton iteration on the discrete Euler-Lagrange system with masses.

    Unknowns are the nodal values of (u, v) and the multipliers.  Steps are
    damped by halving until the residual decreases.  Returns (state,
    history of residual norms, success flag).
    """
    from scipy.sparse.linalg import spsolve

    M = state.grid.M
    W = state.grid.weights
    lams = list(multipliers(params, state))
    F = _euler_lagrange(params, state, lams)
    r0 = res = _residual_norm(F, W)
    hist = [res]
    for _ in range(maxit):
        if res <= rtol * max(r0, 1e-300) or res < 1e-15:
            break
        dx = spsolve(_jacobian(params, state, lams), -F)
        if not np.all(np.isfinite(dx)):
            return state, hist, False
        s = 1.0
        while s > 1e-4:
            trial = StatePair(RadialField(state.grid, state.u.values + s * dx[:M]),
                              RadialField(state.grid, state.v.values + s * dx[M:2 * M]),
                              state.a, state.b)
            tl = [lams[0] + s * dx[2 * M], lams[1] + s * dx[2 * M + 1]]
            Ft = _euler_lagrange(params, trial, tl)
            rt = _residual_norm(Ft, W)
            if rt < res:
                break
            s *= 0.5
        else:
            return state, hist, False
        stagnant = rt > 0.5 * res and rt < 1e-6 * r0
        state, lams, F, res = trial, tl, Ft, rt
        hist.append(res)
        if stagnant:
            break
    return state.renormalized(), hist, True


# ---------------------------------------------------------------------------
# public solvers

def local_minimize(params, seed, tol=None, budget=BUDGET, project_every=1, **kw):
    """Local minimizer in the small-gradient ball (level m(a,b), negative).

    The reduced functional is the value at the first fiber minimum, which
    keeps the iterates on the P+ part of the Pohozaev set.  ``project_every=0``
    switches to plain projected descent of I.
    """
    reg = params.regime
    c = compute_constants(params)
    ball = escape = None
    if params.nu == 0 and reg is Regime.MASS_SUBCRITICAL:
        pass
    elif reg is Regime.MASS_SUBCRITICAL:
        if not c.smallness:
            raise ThresholdError("smallness condition on (nu, a, b) fails")
        ball, escape = c.r0, c.r1
        if math.sqrt(integrals(params, seed.renormalized()).K) >= c.r0 and project_every == 0:
            raise ParameterError("seed lies outside the gradient ball of radius R0")
    else:
        raise RegimeError(f"local_minimize needs the mass-subcritical regime, got {reg.value}")
    red = Reduction("plus" if project_every else "none")
    rep = descend(params, seed, red, "m_ab", tol=tol, budget=budget, ball=ball, escape=escape, **kw)
    if rep.converged and not rep.energy < 0:
        rep.diagnostics["warning"] = "converged level is not negative"
    return rep


def mountain_pass(params, seed, tol=None, budget=BUDGET, **kw):
    """Minimize I over the fiber maxima (level l(a,b), or m(a,b) when P = P-).

    Accepted regimes: mass-subcritical under the smallness condition,
    mass-critical, mass-supercritical and fully critical with nu > 0,
    defocusing with nu > 0 (nonexistence probes), and nu = 0 with p above
    2 + 4/N, where each component is dilated separately.
    """
    reg = params.regime
    componentwise = False
    if params.nu == 0:
        if params.p <= 2.0 + 4.0 / params.N:
            raise RegimeError("with nu = 0 the fiber maximum needs p > 2 + 4/N")
        componentwise = True
    elif reg is Regime.MASS_SUBCRITICAL:
        if not compute_constants(params).smallness:
            raise ThresholdError("smallness condition on (nu, a, b) fails")
    elif reg in (Regime.MASS_CRITICAL, Regime.MASS_SUPERCRITICAL, Regime.FULLY_CRITICAL,
                 Regime.DEFOCUSING):
        if params.nu <= 0:
            raise RegimeError("the fiber maximum needs nu > 0")
    else:
        raise RegimeError(f"mountain_pass is not defined in regime {reg.value}")
    level = "l_ab" if reg is Regime.MASS_SUBCRITICAL else "m_ab"
    return descend(params, seed, Reduction("minus", componentwise), level, tol=tol, budget=budget, **kw)


def repulsive_minimize(params, seed, tol=None, budget=BUDGET, **kw):
    """Minimize I over the unique fiber minima when the coupling is repulsive."""
    if params.regime is not Regime.REPULSIVE:
        raise RegimeError("repulsive_minimize needs nu < 0")
    if not (params.p <= params.alpha and params.p <= params.beta and params.p < 2 + 4 / params.N):
        raise RegimeError("repulsive case needs p <= alpha, beta and p < 2 + 4/N")
    if params.N != 3:
        raise RegimeError("repulsive case is stated for N = 3")
    return descend(params, seed, Reduction("plus"), "m_r_ab", tol=tol, budget=budget, **kw)


def _bubble_mass_sq(grid, eps, coef):
    return coef**2 * float(np.dot(grid.weights, bubble_values(grid.N, eps, grid.nodes) ** 2))


def critical_explicit(params, grid=None):
    """Explicit ground state for p = alpha + beta = 2*, N >= 5.

    Both components are multiples of one bubble U_eps0 with amplitudes
    x_i F_max^{-(N-2)/4}; eps0 is fixed by the mass of u.
    """
    from scipy import optimize
    from .grid import default_grid

    N = params.N
    if params.regime is not Regime.FULLY_CRITICAL:
        raise RegimeError("explicit construction needs p = 2*")
    if N in (3, 4):
        raise RegimeError("no positive normalized solution exists for N = 3, 4 when p = 2*")
    if params.nu <= 0:
        raise RegimeError("explicit construction needs nu > 0")
    fmax, x1, x2 = fmax_solve(params.nu, params.alpha, params.beta)
    if x1 == 0 or x2 == 0 or min(abs(x1), abs(x2)) < 1e-12:
        raise ParameterError("maximizer of F has a vanishing component")
    if abs(params.a * abs(x2) - params.b * abs(x1)) > 1e-8 * params.a * abs(x2):
        raise ParameterError(
            f"masses must satisfy a|x2| = b|x1| (a/b = {params.a / params.b:.10g}, "
            f"required {abs(x1) / abs(x2):.10g})")
    if grid is None:
        grid = default_grid(N, "bubble")
    amp = fmax ** (-(N - 2.0) / 4.0)
    cu, cv = x1 * amp, x2 * amp
    # |U_eps|_2 grows monotonically with eps (like eps for N >= 5)
    f = lambda le: math.log(_bubble_mass_sq(grid, math.exp(le), cu)) - 2.0 * math.log(params.a)
    lo, hi = -10.0, 10.0
    if not f(lo) < 0 < f(hi):
        raise ParameterError("mass a outside the range reachable on this grid")
    eps0 = math.exp(optimize.brentq(f, lo, hi, xtol=1e-14))
    U = bubble_values(N, eps0, grid.nodes)
    state = StatePair(RadialField(grid, cu * U), RadialField(grid, cv * U), params.a, params.b)
    level = fmax ** (-(N - 2.0) / 2.0) * sobolev_constant(N) ** (N / 2.0) / N
    rep = build_report(params, state, "critical_explicit", float("nan"), 0, True,
                       {"eps0": eps0, "fmax": fmax, "xtilde": [x1, x2], "predicted_level": level})
    return rep


# ---------------------------------------------------------------------------
# seeds

def bubble_blended_seed(grid, a, b, width=2.0, eps=0.2, weight=0.3):
    """Gaussian plus a small cutoff bubble in each component, mass fitted."""
    from .grid import cutoff_bubble, gaussian_field

    g = gaussian_field(grid, width).normalized(1.0)
    eta = cutoff_bubble(grid, eps).normalized(1.0)
    u = (g + eta.scaled(weight)).normalized(a)
    v = (g + eta.scaled(weight)).normalized(b)
    return StatePair(u, v, a, b)
