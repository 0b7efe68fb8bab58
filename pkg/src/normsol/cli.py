"""Command line: flat key=value configs, scenario dispatch and JSON/CSV output.

Exit status is 0 on success, 1 on operational errors and 2 when a fiber
structure violation or a theorem contradiction is flagged.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import ProblemParams, Regime, compute_constants, mass_critical_exponent
from .errors import (BudgetError, ConfigError, NormsolError, ParameterError, SaddleSearchError,
                     StructureViolation)
from .grid import critical_exponent, default_grid, make_grid, write_profiles_csv

log = logging.getLogger("normsol")

SCENARIOS = ("constants", "scalar", "fiber-scan", "ground-state", "mountain-pass", "repulsive",
             "critical", "verify", "sweep")
SUITES = ("structure", "identity", "eta", "orderings", "probe")
SEED_KINDS = ("gaussian", "bubble-blended", "random")
SOLVER_SCENARIOS = ("ground-state", "mountain-pass", "repulsive")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _choice(options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return conv


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError("expected an integer")
    return int(v)


# key -> (converter, default); None default means "required" for parameters
KEYS = {
    "N": (_int, None),
    "p": (float, None),
    "alpha": (float, None),
    "beta": (float, None),
    "nu": (float, None),
    "a": (float, None),
    "b": (float, None),
    "omega1": (float, 1.0),
    "omega2": (float, 1.0),
    "scenario": (_choice(SCENARIOS), None),
    # grid
    "rmax": (float, "auto"),
    "M": (_int, "auto"),
    "spacing": (_choice(("uniform", "log-stretched")), "auto"),
    "core": (float, "auto"),
    # solver
    "tol": (float, "auto"),
    "budget": (_int, 50000),
    "seed_kind": (_choice(SEED_KINDS), "gaussian"),
    "random_seed": (_int, 0),
    "width": (float, 2.0),
    # fiber scan
    "t_min": (float, -5.0),
    "t_max": (float, 5.0),
    "t_points": (_int, 201),
    # verify and sweep
    "suite": (_choice(SUITES), "structure"),
    "n_samples": (_int, 200),
    "n_states": (_int, 50),
    "probe_seeds": (_int, 5),
    "probe_budget": (_int, 200),
    "eps_min": (float, 0.003),
    "eps_max": (float, 0.3),
    "eps_points": (_int, 12),
    "sweep_a": (_floats, ()),
    "sweep_b": (_floats, ()),
    "sweep_solver": (_choice(SOLVER_SCENARIOS), "ground-state"),
    "out": (str, "."),
}
PARAM_KEYS = ("N", "p", "alpha", "beta", "nu", "a", "b", "omega1", "omega2")


@dataclass
class RunConfig:
    params: ProblemParams
    scenario: str
    grid: dict
    solver: dict
    options: dict
    out: str
    lines: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "params": asdict(self.params),
            "scenario": self.scenario,
            "grid": dict(self.grid),
            "solver": dict(self.solver),
            "options": {k: list(v) if isinstance(v, tuple) else v for k, v in self.options.items()},
        }


def _param_error_line(msg, lines):
    msg = msg.lower()
    for key, words in (("alpha", ("alpha", "coupling")), ("N", ("n must",)), ("a", ("mass",)),
                       ("p", ("p must", "exponent p"))):
        if any(w in msg for w in words) and key in lines:
            return lines[key]
    return lines.get("p")


def parse_config(text):
    """Parse flat ``key = value`` text into a validated :class:`RunConfig`.

    Blank lines and ``#`` comments are ignored.  Errors carry the line
    number of the offending entry.
    """
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", no)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", no)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", no)
        conv = KEYS[key][0]
        try:
            raw[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {key} = {value!r}: {exc}", no) from None
        lines[key] = no
    vals = {}
    for key, (_, default) in KEYS.items():
        if key in raw:
            vals[key] = raw[key]
        elif default is None:
            raise ConfigError(f"missing required key {key!r}")
        else:
            vals[key] = default
    try:
        params = ProblemParams(**{k: vals[k] for k in PARAM_KEYS})
    except ParameterError as exc:
        raise ConfigError(f"invalid parameters: {exc}", _param_error_line(str(exc), lines)) from None
    cfg = RunConfig(
        params=params,
        scenario=vals["scenario"],
        grid={k: vals[k] for k in ("rmax", "M", "spacing", "core")},
        solver={k: vals[k] for k in ("tol", "budget", "seed_kind", "random_seed", "width")},
        options={k: vals[k] for k in KEYS if k not in PARAM_KEYS and k not in
                 ("scenario", "rmax", "M", "spacing", "core", "tol", "budget", "seed_kind",
                  "random_seed", "width", "out")},
        out=vals["out"],
        lines=lines,
    )
    validate_scenario(cfg)
    return cfg


def scenario_requirement(params, scenario):
    """Reason the scenario is not defined for ``params``, or None if it is."""
    reg = params.regime
    N, p = params.N, params.p
    pbar = mass_critical_exponent(N)
    if scenario == "scalar":
        return None if p < critical_exponent(N) else "scalar ground state needs p < 2*"
    if scenario == "ground-state":
        if reg is not Regime.MASS_SUBCRITICAL:
            return f"ground-state needs the mass-subcritical regime (2 < p < 2 + 4/N), got {reg.value}"
        if params.nu > 0 and not compute_constants(params).smallness:
            c = compute_constants(params)
            return (f"smallness hypothesis on (nu, a, b) fails: C0 = {c.c0:.6g} for the "
                    "mass-subcritical local minimum")
        return None
    if scenario == "mountain-pass":
        if params.nu == 0:
            return None if p > pbar else "with nu = 0 the fiber maximum needs p > 2 + 4/N"
        if reg is Regime.MASS_SUBCRITICAL:
            if not compute_constants(params).smallness:
                return "smallness hypothesis on (nu, a, b) fails for the mass-subcritical mountain pass"
            return None
        if reg in (Regime.MASS_CRITICAL, Regime.MASS_SUPERCRITICAL, Regime.FULLY_CRITICAL,
                   Regime.DEFOCUSING):
            return None if params.nu > 0 else "the fiber maximum needs nu > 0"
        return f"mountain-pass is not defined in regime {reg.value}"
    if scenario == "repulsive":
        if reg is not Regime.REPULSIVE:
            return "repulsive needs nu < 0"
        if N != 3:
            return "repulsive existence is stated for N = 3"
        if not (p <= params.alpha and p <= params.beta and p < pbar):
            return "repulsive existence needs p <= alpha, beta < 2* and p < 2 + 4/N"
        return None
    if scenario == "critical":
        if reg is not Regime.FULLY_CRITICAL:
            return "critical needs p = alpha + beta = 2*"
        if N in (3, 4):
            return "no positive normalized solution exists for N = 3, 4 when p = 2* (nonexistence theorem)"
        if params.nu <= 0:
            return "critical construction needs nu > 0"
        return None
    return None


def validate_scenario(cfg):
    if cfg.scenario == "sweep":
        if not cfg.options["sweep_a"] or not cfg.options["sweep_b"]:
            raise ConfigError("sweep needs sweep_a and sweep_b lists", cfg.lines.get("scenario"))
        for a in cfg.options["sweep_a"]:
            for b in cfg.options["sweep_b"]:
                why = scenario_requirement(cfg.params.with_masses(a, b), cfg.options["sweep_solver"])
                if why:
                    raise ConfigError(f"sweep cell (a={a:g}, b={b:g}): {why}", cfg.lines.get("sweep_a"))
        return
    if cfg.scenario == "verify" and cfg.options["suite"] == "probe":
        reg = cfg.params.regime
        ok = (reg is Regime.FULLY_CRITICAL and cfg.params.N in (3, 4)) or reg is Regime.DEFOCUSING
        if not ok:
            raise ConfigError("probe suite needs p = 2* with N = 3, 4, or the defocusing regime",
                              cfg.lines.get("suite"))
        return
    why = scenario_requirement(cfg.params, cfg.scenario)
    if why:
        raise ConfigError(why, cfg.lines.get("scenario"))


# ---------------------------------------------------------------------------
# execution

def build_grid(cfg, kind="subcritical"):
    g = cfg.grid
    if all(g[k] == "auto" for k in ("rmax", "M", "spacing", "core")):
        return default_grid(cfg.params.N, kind)
    base = default_grid(cfg.params.N, kind)
    rmax = base.rmax if g["rmax"] == "auto" else g["rmax"]
    M = base.M if g["M"] == "auto" else g["M"]
    spacing = base.spacing if g["spacing"] == "auto" else g["spacing"]
    core = (base.core or None) if g["core"] == "auto" else g["core"]
    return make_grid(cfg.params.N, rmax, M, spacing, core=core if spacing == "log-stretched" else None)


def make_seed(cfg, grid, params=None):
    from .fiber import random_torus_state
    from .flow import bubble_blended_seed
    from .grid import gaussian_pair

    pr = params or cfg.params
    kind = cfg.solver["seed_kind"]
    if kind == "gaussian":
        return gaussian_pair(grid, pr.a, pr.b, cfg.solver["width"])
    if kind == "bubble-blended":
        return bubble_blended_seed(grid, pr.a, pr.b, cfg.solver["width"])
    return random_torus_state(grid, pr.a, pr.b, np.random.default_rng(cfg.solver["random_seed"]))


def _tol(cfg):
    return None if cfg.solver["tol"] == "auto" else cfg.solver["tol"]


def _solve(cfg, scenario, params, grid):
    from .flow import local_minimize, mountain_pass, repulsive_minimize

    fn = {"ground-state": local_minimize, "mountain-pass": mountain_pass,
          "repulsive": repulsive_minimize}[scenario]
    seed = make_seed(cfg, grid, params)
    return fn(params, seed, tol=_tol(cfg), budget=cfg.solver["budget"])


def _report_dict(rep):
    d = rep.to_dict()
    d["diagnostics"] = {k: v for k, v in d["diagnostics"].items() if k != "history"}
    return d


def _write_profiles(rep, path):
    write_profiles_csv(path, rep.state.grid, {"u": rep.state.u.values, "v": rep.state.v.values})


def run_scenario(cfg, out_dir):
    """Execute the configured scenario; returns (result, checks, flagged)."""
    from . import verify
    from .fiber import fiber_critical_points
    from .functional import FiberMap
    from .scalar import e_of_a, gn_constant, gn_constant_closed_form, solve_Z

    pr = cfg.params
    sc = cfg.scenario
    checks = []
    flagged = False
    if sc == "constants":
        c = compute_constants(pr)
        return {"regime": pr.regime.value, "constants": c.to_dict()}, checks, False
    if sc == "scalar":
        z = solve_Z(pr.N, pr.p)
        res = {"z0": z.z0, "mass_sq": z.mass_sq, "grad_sq": z.grad_sq, "p_norm": z.p_norm,
               "r_cut": z.r_cut, "gn_constant": gn_constant(pr.N, pr.p),
               "gn_constant_closed_form": gn_constant_closed_form(pr.N, pr.p)}
        if pr.regime is not Regime.MASS_CRITICAL:
            res["e_a"] = e_of_a(pr.N, pr.p, pr.a).energy
            res["e_b"] = e_of_a(pr.N, pr.p, pr.b).energy
        write_profiles_csv(os.path.join(out_dir, "scalar_profile.csv"), z.Z.grid, {"Z": z.Z.values})
        return res, checks, False
    if sc == "fiber-scan":
        grid = build_grid(cfg)
        state = make_seed(cfg, grid)
        fm = FiberMap.from_state(pr, state)
        ts = np.linspace(cfg.options["t_min"], cfg.options["t_max"], cfg.options["t_points"])
        path = os.path.join(out_dir, "fiber_scan.csv")
        with open(path, "w", encoding="ascii") as fh:
            fh.write("t,phi,dphi,d2phi\n")
            for t in ts:
                t = float(t)
                fh.write(f"{t!r},{fm.value(t)!r},{fm.d1(t)!r},{fm.d2(t)!r}\n")
        diag = fiber_critical_points(pr, state, strict=True)
        return {"fiber": diag.to_dict(), "csv": os.path.basename(path)}, checks, False
    if sc in SOLVER_SCENARIOS:
        grid = build_grid(cfg)
        rep = _solve(cfg, sc, pr, grid)
        _write_profiles(rep, os.path.join(out_dir, "profiles.csv"))
        checks += verify.check_report_identities(pr, rep)
        checks += verify.check_energy_orderings(pr, {rep.level_name: rep})
        return {"report": _report_dict(rep)}, checks, False
    if sc == "critical":
        from .flow import critical_explicit

        rep = critical_explicit(pr)
        _write_profiles(rep, os.path.join(out_dir, "profiles.csv"))
        lvl = rep.diagnostics["predicted_level"]
        checks.append(verify.CheckResult("critical_level", "energy equals F_max^{-(N-2)/2} S^{N/2}/N",
                                         abs(rep.energy - lvl) <= 1e-2 * abs(lvl), rep.energy, lvl,
                                         1e-2 * abs(lvl)))
        checks += verify.check_report_identities(pr, rep)
        return {"report": _report_dict(rep)}, checks, False
    if sc == "verify":
        suite = cfg.options["suite"]
        if suite == "structure":
            checks.append(verify.check_fiber_structure(pr, cfg.options["n_samples"], build_grid(cfg),
                                                       seed=cfg.solver["random_seed"]))
        elif suite == "identity":
            checks.append(verify.check_fiber_identity(pr, cfg.options["n_states"], grid=build_grid(cfg),
                                                      seed=cfg.solver["random_seed"]))
        elif suite == "eta":
            eps = np.geomspace(cfg.options["eps_min"], cfg.options["eps_max"], cfg.options["eps_points"])
            checks += verify.check_eta_scalings(pr.N, pr.p, eps, build_grid(cfg, "bubble"))
        elif suite == "orderings":
            reports = {}
            grid = build_grid(cfg)
            kinds = {Regime.MASS_SUBCRITICAL: ("ground-state", "mountain-pass"),
                     Regime.MASS_SUPERCRITICAL: ("mountain-pass",),
                     Regime.MASS_CRITICAL: ("mountain-pass",),
                     Regime.REPULSIVE: ("repulsive",)}.get(pr.regime, ())
            for kind in kinds:
                rep = _solve(cfg, kind, pr, grid)
                reports[rep.level_name] = rep
                checks += verify.check_report_identities(pr, rep)
            checks += verify.check_energy_orderings(pr, reports)
        elif suite == "probe":
            base = cfg.solver["random_seed"]
            res = verify.nonexistence_probe(pr, range(base, base + cfg.options["probe_seeds"]),
                                            budget=cfg.options["probe_budget"])
            checks.append(res)
            flagged = not res.passed
        return {"suite": suite, "passed": all(c.passed for c in checks),
                "summary": verify.summary_table(checks)}, checks, flagged
    if sc == "sweep":
        return _run_sweep(cfg, out_dir)
    raise ConfigError(f"unknown scenario {sc!r}")


def _run_sweep(cfg, out_dir):
    from . import verify

    solver = cfg.options["sweep_solver"]
    cells = [(a, b) for a in cfg.options["sweep_a"] for b in cfg.options["sweep_b"]]
    grid = build_grid(cfg)

    def one(cell):
        a, b = cell
        pr = cfg.params.with_masses(a, b)
        try:
            rep = _solve(cfg, solver, pr, grid)
        except (BudgetError, SaddleSearchError) as exc:
            rep = exc.report
            if rep is None:
                raise
        d = {"a": a, "b": b, "report": _report_dict(rep)}
        path = os.path.join(out_dir, f"sweep_a{a:g}_b{b:g}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dumps(d))
        return d, rep

    with ThreadPoolExecutor(max_workers=max(1, cfg.options.get("threads", 1))) as pool:
        done = list(pool.map(one, cells))
    levels = {(d["a"], d["b"]): rep.energy for d, rep in done}
    checks = [verify.check_monotonicity(levels)]
    for (d, rep) in done:
        checks += verify.check_report_identities(cfg.params.with_masses(d["a"], d["b"]), rep)
    return {"cells": [d for d, _ in done]}, checks, False


def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, (np.floating,)):
        return _clean(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def _dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run(cfg, out_dir=None, threads=1):
    """Run a parsed config, write ``result.json`` and return the exit status."""
    out_dir = out_dir or cfg.out
    os.makedirs(out_dir, exist_ok=True)
    cfg.options["threads"] = threads
    status = 0
    error = None
    result, checks = None, []
    try:
        result, checks, flagged = run_scenario(cfg, out_dir)
        if flagged or any(verify_flag(c) for c in checks):
            status = 2
    except StructureViolation as exc:
        error = f"StructureViolation: {exc}"
        status = 2
    except (NormsolError, OSError) as exc:
        error = f"{type(exc).__module__}.{type(exc).__name__}: {exc}"
        rep = getattr(exc, "report", None)
        if rep is not None:
            result = {"report": _report_dict(rep)}
        status = 1
    doc = {"config": cfg.to_dict(), "result": result, "checks": [c.to_dict() for c in checks]}
    if error:
        doc["error"] = error
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        fh.write(_dumps(doc))
    if error:
        print(error, file=sys.stderr)
    if checks:
        from .verify import summary_table
        print(summary_table(checks))
    return status


def verify_flag(check):
    from .verify import CONTRADICTION
    return CONTRADICTION in check.details


def _override_scenario(text, scenario):
    # replace in place so line numbers in error messages stay valid
    lines = text.splitlines()
    for i, l in enumerate(lines):
        if l.split("#", 1)[0].split("=", 1)[0].strip() == "scenario":
            lines[i] = f"scenario = {scenario}"
            return "\n".join(lines) + "\n"
    return "\n".join(lines + [f"scenario = {scenario}"]) + "\n"


def main(argv=None):
    ap = argparse.ArgumentParser(prog="normsol", description="Normalized solutions of coupled radial systems")
    ap.add_argument("scenario", nargs="?", choices=SCENARIOS,
                    help="overrides the scenario given in the config file")
    ap.add_argument("--config", required=True, help="flat key=value configuration file")
    ap.add_argument("--out", help="output directory (default: the config's out key)")
    ap.add_argument("--seed", type=int, help="random seed (overrides random_seed)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        if args.scenario:
            text = _override_scenario(text, args.scenario)
        cfg = parse_config(text)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.solver["random_seed"] = args.seed
    return run(cfg, args.out, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
