"""Command-line front end: ``nlsground COMMAND CONFIG [--output-dir DIR]``.

The configuration is an INI file (see README for the full schema)::

    [potential]
    family = PowerSum
    terms = -0.25:4, 0.2:5      ; coefficient:exponent pairs

    [grid]
    N = 3
    r_max = 40
    M = 2000

    [minimize]
    rho = 30

Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration,
3 not converged while convergence was required, 4 aborted evolution.
Every failure prints one ``error code=<n> kind=<kind> reason=<text>`` line
on standard error.
"""
from __future__ import annotations

import argparse
import configparser
import math
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import reporting
from .dynamics import EvolutionAborted, EvolutionConfig, energy_of, evolve, mass_of, stability_experiment
from .functionals import diagnostics
from .grid import RadialGrid, build_grid, l2_norm_sq
from .minimizer import FlowConfig, minimize_on_sphere, scan_rho
from .potentials import Family, PotentialSpec, check_hypotheses

COMMANDS = ("check", "minimize", "scan", "identities", "evolve", "stability")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_ABORTED = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


# ----------------------------------------------------------------------
# config parsing


def _get(section, key, conv, default=..., required_msg=None):
    if section is None or key not in section:
        if default is ...:
            raise ConfigError(required_msg or f"missing key '{key}'")
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for '{key}': {raw!r} ({exc})") from None


def _int(raw: str) -> int:
    v = float(raw)
    if not v.is_integer():
        raise ValueError("not an integer")
    return int(v)


def _float(raw: str) -> float:
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _float_list(raw: str) -> list[float]:
    vals = [_float(t) for t in raw.replace(";", ",").split(",") if t.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _section(cp: configparser.ConfigParser, name: str, required: bool = True):
    if cp.has_section(name):
        return cp[name]
    if required:
        raise ConfigError(f"missing section [{name}]")
    return None


def parse_grid(cp) -> RadialGrid:
    s = _section(cp, "grid")
    N = _get(s, "N", _int, required_msg="missing key 'N' in [grid]")
    r_max = _get(s, "r_max", _float, required_msg="missing key 'r_max' in [grid]")
    M = _get(s, "M", _int, required_msg="missing key 'M' in [grid]")
    return build_grid(N, r_max, M)


def parse_potential(cp, N: int) -> PotentialSpec:
    s = _section(cp, "potential")
    fam = _get(s, "family", str, required_msg="missing key 'family' in [potential]")
    try:
        family = Family(fam)
    except ValueError:
        raise ConfigError(f"unknown potential family {fam!r}") from None
    if family is Family.POWER_SUM:
        raw = _get(s, "terms", str, required_msg="PowerSum needs 'terms'")
        terms = []
        for tok in raw.split(","):
            try:
                c, e = tok.split(":")
                terms.append((_float(c), _float(e)))
            except ValueError:
                raise ConfigError(f"bad PowerSum term {tok.strip()!r}; expected coefficient:exponent") from None
        return PotentialSpec.power_sum(terms, N)
    if family is Family.RATIONAL:
        return PotentialSpec.rational(_get(s, "p", _float), _get(s, "q", _float), N)
    if family is Family.PURE_POWER:
        return PotentialSpec.pure_power(_get(s, "exponent", _float), _get(s, "sign", _float, 1.0), N)
    return PotentialSpec.zero(N)


_FLOW_CONVERTERS = {"max_iters": _int, "rearrange_every": _int, "init_profile": str, "init_path": str}


def parse_flow(cp) -> FlowConfig:
    s = _section(cp, "flow", required=False)
    kwargs = {}
    known = {f.name for f in fields(FlowConfig)}
    if s is not None:
        for key in s:
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in [flow]")
            kwargs[key] = _get(s, key, _FLOW_CONVERTERS.get(key, _float))
    cfg = FlowConfig(**kwargs)
    cfg.validate()
    return cfg


def parse_rho(cp) -> float:
    s = _section(cp, "minimize")
    rho = _get(s, "rho", _float, required_msg="missing key 'rho' in [minimize]")
    if not rho > 0:
        raise ConfigError("rho must be positive")
    return rho


def parse_evolution(cp) -> EvolutionConfig:
    s = _section(cp, "evolution")
    cfg = EvolutionConfig(
        dt=_get(s, "dt", _float), T=_get(s, "T", _float),
        record_every=_get(s, "record_every", _int, 1),
        scheme=_get(s, "scheme", str, "StrangCN"),
        wall_tol=_get(s, "wall_tol", _float, 1e-6),
    )
    cfg.validate()
    return cfg


@dataclass
class InitialData:
    kind: str  # ground_state | gaussian | file
    amplitude: float = 1.0
    width: float = 1.0
    path: Optional[str] = None


def parse_initial(cp) -> InitialData:
    s = _section(cp, "initial", required=False)
    kind = _get(s, "kind", str, "ground_state")
    if kind not in ("ground_state", "gaussian", "file"):
        raise ConfigError(f"unknown initial kind {kind!r}")
    init = InitialData(kind, _get(s, "amplitude", _float, 1.0), _get(s, "width", _float, 1.0),
                       _get(s, "path", str, None))
    if kind == "file" and not init.path:
        raise ConfigError("initial kind 'file' needs 'path'")
    if kind == "gaussian" and not init.width > 0:
        raise ConfigError("gaussian width must be positive")
    return init


@dataclass
class RunConfig:
    command: str
    grid: RadialGrid
    potential: PotentialSpec
    flow: FlowConfig = field(default_factory=FlowConfig)
    rho: Optional[float] = None
    rho_list: list[float] = field(default_factory=list)
    thetas: list[float] = field(default_factory=list)
    scan_tol: float = 1e-6
    evolution: Optional[EvolutionConfig] = None
    initial: Optional[InitialData] = None
    deltas: list[float] = field(default_factory=list)
    profile_path: Optional[str] = None
    s_max: float = 10.0
    samples: int = 10_000


def load_config(command: str, path) -> RunConfig:
    """Read and validate every block ``command`` needs; no numerical work happens here."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        cp.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"unparsable config: {exc}".replace("\n", " ")) from None
    try:
        grid = parse_grid(cp)
        pot = parse_potential(cp, grid.N)
        run = RunConfig(command, grid, pot, flow=parse_flow(cp))
        if command == "check":
            s = _section(cp, "check", required=False)
            run.s_max = _get(s, "s_max", _float, 10.0)
            run.samples = _get(s, "samples", _int, 10_000)
            if not run.s_max > 0 or run.samples < 100:
                raise ConfigError("[check] needs s_max > 0 and samples >= 100")
        if command in ("minimize", "stability") or (command == "evolve"):
            run.initial = parse_initial(cp) if command == "evolve" else None
            if command != "evolve" or run.initial.kind == "ground_state":
                run.rho = parse_rho(cp)
        if command == "scan":
            s = _section(cp, "scan")
            run.rho_list = _get(s, "rho_list", _float_list)
            run.thetas = _get(s, "thetas", _float_list, [1.5, 2.0, 4.0])
            run.scan_tol = _get(s, "tol", _float, 1e-6)
            if any(b <= a for a, b in zip(run.rho_list, run.rho_list[1:])) or min(run.rho_list) <= 0:
                raise ConfigError("rho_list must be positive and strictly ascending")
            if any(t <= 1 for t in run.thetas):
                raise ConfigError("thetas must exceed 1")
        if command in ("evolve", "stability"):
            run.evolution = parse_evolution(cp)
        if command == "stability":
            s = _section(cp, "stability")
            run.deltas = _get(s, "deltas", _float_list)
            if any(d < 0 for d in run.deltas):
                raise ConfigError("deltas must be nonnegative")
        if command == "identities":
            s = _section(cp, "profile")
            run.profile_path = _get(s, "path", str, required_msg="missing key 'path' in [profile]")
            if not Path(run.profile_path).is_file():
                raise ConfigError(f"profile file {run.profile_path} not found")
        if command == "evolve" and run.initial.kind == "file" and not Path(run.initial.path).is_file():
            raise ConfigError(f"initial data file {run.initial.path} not found")
        if run.flow.init_profile == "file" and not Path(run.flow.init_path).is_file():
            raise ConfigError(f"init_path {run.flow.init_path} not found")
    except ConfigError:
        raise
    except ValueError as exc:  # domain errors from constructors and validate()
        raise ConfigError(str(exc)) from None
    return run


# ----------------------------------------------------------------------
# commands


def _ground_state(run: RunConfig, require: bool):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gs = minimize_on_sphere(run.grid, run.potential, run.rho, run.flow, record_history=False)
    if require and not gs.converged:
        raise NotConverged(f"verdict {gs.verdict.value} after {gs.iterations} iterations")
    return gs


def _context(run: RunConfig) -> dict:
    g = run.grid
    return {"potential": run.potential.to_dict(), "grid": {"N": g.N, "r_max": g.r_max, "M": g.M}}


def cmd_check(run, out: Path, args) -> dict:
    rep = check_hypotheses(run.potential, s_max=run.s_max, samples=run.samples)
    doc = {**_context(run), "hypotheses": rep.to_dict()}
    reporting.write_json(out / "hypotheses.json", doc, "hypotheses")
    return {"nonexistence_holds": rep.nonexistence_holds, "f1_holds": rep.f1_holds}


def cmd_minimize(run, out: Path, args) -> dict:
    gs = _ground_state(run, False)
    doc = {**_context(run), "ground_state": gs.to_dict()}
    reporting.write_json(out / "ground_state.json", doc, "ground_state")
    reporting.write_profile_csv(out / "profile.csv", run.grid, gs.u.values)
    if args.require_converged and not gs.converged:
        raise NotConverged(f"verdict {gs.verdict.value} after {gs.iterations} iterations")
    return {"verdict": gs.verdict.value, "j_value": gs.diagnostics.j_value, "lambda": gs.lam}


def cmd_scan(run, out: Path, args) -> dict:
    scan = scan_rho(run.grid, run.potential, run.rho_list, run.thetas, run.flow, tol=run.scan_tol)
    reporting.write_scan_csv(out / "scan.csv", scan)
    reporting.write_json(out / "scan.json", {**_context(run), "scan": scan.to_dict()}, "rho_scan")
    return {"rho_bar_estimate": scan.rho_bar_estimate,
            "subadditivity_failures": sum(not c.holds for c in scan.subadditivity_checks)}


def cmd_identities(run, out: Path, args) -> dict:
    u = reporting.read_profile_csv(run.profile_path, run.grid)
    diag = diagnostics(run.grid, run.potential, u)
    doc = {**_context(run), "profile": str(run.profile_path), "rho": math.sqrt(l2_norm_sq(run.grid, u)),
           "identities": diag.to_dict()}
    reporting.write_json(out / "identities.json", doc, "identities")
    return {"pde_residual": diag.pde_residual, "pohozaev_residual": diag.pohozaev_residual}


def cmd_evolve(run, out: Path, args) -> dict:
    init = run.initial
    g = run.grid
    if init.kind == "ground_state":
        psi0 = _ground_state(run, True).u.values
    elif init.kind == "gaussian":
        psi0 = init.amplitude * np.exp(-0.5 * (g.r / init.width) ** 2)
    else:
        psi0 = reporting.read_profile_csv(init.path, g)
    masses, energies = [], []
    tr = evolve(g, run.potential, psi0.astype(complex), run.evolution,
                callback=lambda n, t, p: (masses.append(mass_of(g, p)), energies.append(energy_of(g, run.potential, p))))
    reporting.write_trajectory_csv(out / "trajectory.csv", g, tr.times, tr.snapshots)
    m0, e0 = masses[0], energies[0]
    doc = {**_context(run), "initial": init.kind, "dt": run.evolution.dt, "T": run.evolution.T,
           "times": tr.times.tolist(), "mass_series": masses, "energy_series": energies,
           "max_rel_mass_drift": max(abs(m - m0) for m in masses) / m0 if m0 > 0 else 0.0,
           "max_energy_drift": max(abs(e - e0) for e in energies)}
    reporting.write_json(out / "evolution.json", doc, "evolution")
    return {"records": len(tr)}


def cmd_stability(run, out: Path, args) -> dict:
    gs = _ground_state(run, True)
    results = []
    for k, delta in enumerate(run.deltas):
        res = stability_experiment(run.grid, run.potential, gs, delta, run.evolution)
        reporting.write_stability_csv(out / f"stability_{k}.csv", res)
        results.append(res.to_dict())
    doc = {**_context(run), "ground_state": gs.to_dict(), "dt": run.evolution.dt, "T": run.evolution.T,
           "runs": results}
    reporting.write_json(out / "stability.json", doc, "stability")
    return {"excursion_ratios": [r["excursion_ratio"] for r in results]}


HANDLERS = {"check": cmd_check, "minimize": cmd_minimize, "scan": cmd_scan,
            "identities": cmd_identities, "evolve": cmd_evolve, "stability": cmd_stability}


def _fail(code: int, kind: str, reason) -> int:
    reason = " ".join(str(reason).split())
    print(f"error code={code} kind={kind} reason={reason}", file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nlsground", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="INI configuration file")
    ap.add_argument("--output-dir", default="nlsground_out", help="directory for report files")
    ap.add_argument("--require-converged", action="store_true",
                    help="exit 3 when the minimization does not converge")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "usage", exc)
    try:
        run = load_config(args.command, args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "validation", exc)
    try:
        out = reporting.ensure_dir(args.output_dir)
    except OSError as exc:
        return _fail(EXIT_CONFIG, "output", exc)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            summary = HANDLERS[args.command](run, out, args)
    except NotConverged as exc:
        return _fail(EXIT_NOT_CONVERGED, "not_converged", exc)
    except EvolutionAborted as exc:
        return _fail(EXIT_ABORTED, "aborted", exc)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        return _fail(EXIT_FAIL, type(exc).__name__, exc)
    if not args.quiet:
        for w in caught:
            print(f"warning kind={w.category.__name__} reason={' '.join(str(w.message).split())}",
                  file=sys.stderr)
        print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
