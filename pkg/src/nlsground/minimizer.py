"""Constrained minimization of J on the L2 sphere and the test sequences around it."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .functionals import IdentityDiagnostics, diagnostics, j_gradient
from .grid import (RadialField, RadialGrid, TruncationWarning, grad_norm_sq, l2_norm_sq,
                   outer_ratio, sphere_area, values_of)
from .potentials import PotentialSpec, check_hypotheses, evaluate

class Verdict(str, Enum):
    CONVERGED = "Converged"
    VANISHING = "Vanishing"
    ITER_LIMIT = "IterLimit"


# ----------------------------------------------------------------------
# explicit test profiles


def make_plateau(grid: RadialGrid, s0: float, R: float) -> np.ndarray:
    """s0 on [0, R], linear down to 0 on [R, R+1], 0 beyond."""
    if not R + 1.0 < grid.r_max:
        raise ValueError(f"plateau needs R + 1 < r_max, got R={R}, r_max={grid.r_max}")
    r = grid.r
    return s0 * np.clip(1.0 - (r - R), 0.0, 1.0)


def make_scaled_plateau(grid: RadialGrid, gamma: float, R: float) -> np.ndarray:
    """Height s = sqrt(gamma / R^N) on [0, R], linear down to 0 on [R, 2R]."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 2.0 * R < grid.r_max:
        raise ValueError(f"scaled plateau needs 2R < r_max, got R={R}, r_max={grid.r_max}")
    s = math.sqrt(gamma / R ** grid.N)
    return s * np.clip(2.0 - grid.r / R, 0.0, 1.0)


def make_gaussian(grid: RadialGrid, width: float) -> np.ndarray:
    return np.exp(-0.5 * (grid.r / width) ** 2)


def plateau_mass(N: int, s0: float, R: float) -> float:
    """Exact mass of the continuous plateau profile in R^N."""
    P = np.polynomial.polynomial
    # collar: int_0^1 (1 - t)^2 (R + t)^(N-1) dt
    integrand = P.polymul([1.0, -2.0, 1.0], P.polypow([R, 1.0], N - 1))
    collar = P.polyval(1.0, P.polyint(integrand))
    return sphere_area(N) * s0 ** 2 * (R ** N / N + collar)


# ----------------------------------------------------------------------
# rearrangement


def rearrange_decreasing(grid: RadialGrid, u) -> np.ndarray:
    """Radially nonincreasing rearrangement of |u| on the weighted grid.

    The values of |u|, sorted in decreasing order, are laid out along the
    volume coordinate V = |B_r| (each value occupying its own weight), and
    every cell receives the root-mean-square of the layout over its own
    volume slice.  Mass is preserved exactly; a field that is already
    nonincreasing is returned unchanged.  Other integrals of the values
    (such as the integral of F(u)) agree only to O(h^2) for smooth u: with
    unequal cell volumes no exactly equimeasurable grid function exists.
    """
    a = np.abs(values_of(grid, u)).astype(float)
    w = grid.weights
    order = np.argsort(-a, kind="stable")
    vals = a[order]
    src_edges = np.concatenate([[0.0], np.cumsum(w[order])])
    dst_edges = np.concatenate([[0.0], np.cumsum(w)])
    # cumulative integral of vals^2 along the volume coordinate, evaluated at dst edges
    cum_src = np.concatenate([[0.0], np.cumsum(w[order] * vals ** 2)])
    x = np.clip(dst_edges, 0.0, src_edges[-1])
    idx = np.clip(np.searchsorted(src_edges, x, side="right") - 1, 0, len(vals) - 1)
    cum_dst = cum_src[idx] + (x - src_edges[idx]) * vals[idx] ** 2
    cum_dst[-1] = cum_src[-1]
    cell_sq = np.diff(cum_dst) / w
    # running minimum removes roundoff wiggles between equal slices
    out = np.minimum.accumulate(np.sqrt(np.maximum(cell_sq, 0.0)))
    # an already sorted input maps cell-to-cell; return it bit-for-bit
    if np.array_equal(order, np.arange(len(a))):
        return a
    return out


# ----------------------------------------------------------------------
# gradient flow


@dataclass
class FlowConfig:
    initial_step: float = 0.5
    backtrack_factor: float = 0.5
    residual_tol: float = 1e-8
    max_iters: int = 200_000
    rearrange_every: int = 50
    init_profile: str = "gaussian"  # gaussian | plateau | scaled_plateau | file
    init_width: Optional[float] = None
    init_s0: Optional[float] = None
    init_R: Optional[float] = None
    init_gamma: float = 1.0
    init_path: Optional[str] = None
    omega_shift: float = 0.0
    growth_factor: float = 1.5
    max_step: float = 4.0

    def validate(self) -> None:
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if int(self.rearrange_every) != self.rearrange_every or self.rearrange_every < 0:
            raise ValueError("rearrange_every must be a nonnegative integer")
        if self.init_profile not in ("gaussian", "plateau", "scaled_plateau", "file"):
            raise ValueError(f"unknown init_profile {self.init_profile!r}")
        if self.init_profile == "file" and not self.init_path:
            raise ValueError("init_profile 'file' needs init_path")
        if not self.growth_factor >= 1.0:
            raise ValueError("growth_factor must be >= 1")


@dataclass
class GroundState:
    u: RadialField
    rho: float
    lam: float
    omega: float
    diagnostics: IdentityDiagnostics
    converged: bool
    verdict: Verdict
    iterations: int
    j_history: list[float] = field(default_factory=list, repr=False)
    mass_history: list[float] = field(default_factory=list, repr=False)
    notes: list[str] = field(default_factory=list)

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    def to_dict(self) -> dict:
        d = self.diagnostics
        return {
            "rho": self.rho,
            "lambda": self.lam,
            "omega": self.omega,
            "verdict": self.verdict.value,
            "converged": self.converged,
            "iterations": self.iterations,
            "j_value": d.j_value,
            "mass": d.mass,
            "lambda_ar": d.lambda_ar,
            "pde_residual": d.pde_residual,
            "pohozaev_residual": d.pohozaev_residual,
            "derrick_value": d.derrick_value,
            "gn_quotients": [[q, v] for q, v in d.gn_quotients],
            "notes": list(self.notes),
        }


def _normalize(grid: RadialGrid, u: np.ndarray, rho: float) -> np.ndarray:
    m = l2_norm_sq(grid, u)
    if m <= 0:
        raise ValueError("cannot normalize a zero field")
    return u * (rho / math.sqrt(m))


def initial_profile(grid: RadialGrid, pot: PotentialSpec, rho: float, cfg: FlowConfig) -> np.ndarray:
    kind = cfg.init_profile
    if kind == "gaussian":
        u = make_gaussian(grid, cfg.init_width or grid.r_max / 8.0)
    elif kind == "plateau":
        s0 = cfg.init_s0 if cfg.init_s0 is not None else min_point(pot)
        R = cfg.init_R if cfg.init_R is not None else grid.r_max / 4.0
        u = make_plateau(grid, s0, R)
    elif kind == "scaled_plateau":
        R = cfg.init_R if cfg.init_R is not None else grid.r_max / 4.0
        u = make_scaled_plateau(grid, cfg.init_gamma, R)
    else:
        from .reporting import read_profile_csv

        u = read_profile_csv(cfg.init_path, grid)
    return u


def min_point(pot: PotentialSpec, s_max: float = 10.0) -> float:
    """Location of the minimum of F on (0, s_max] (1.0 if F >= 0 there)."""
    rep = check_hypotheses(pot, s_max=s_max, samples=2000)
    return rep.f1_witness if rep.f1_witness is not None else 1.0


def _inner_peak(grid: RadialGrid, u: np.ndarray) -> float:
    return float(np.abs(u[: grid.M // 2]).max())


def _energy_and_scale(grid: RadialGrid, pot: PotentialSpec, u: np.ndarray) -> tuple[float, float]:
    kin = 0.5 * grad_norm_sq(grid, u)
    Fu = evaluate(pot, u, 0)
    return kin + float(grid.weights @ Fu), kin + float(grid.weights @ np.abs(Fu))


def _state(grid: RadialGrid, pot: PotentialSpec, u: np.ndarray, rho2: float):
    g = j_gradient(grid, pot, u)
    lam = float(grid.weights @ (g * u)) / rho2
    r = g - lam * u
    return g, lam, math.sqrt(float(grid.weights @ (r * r)))


def minimize_on_sphere(grid: RadialGrid, pot: PotentialSpec, rho: float,
                       cfg: Optional[FlowConfig] = None, u0=None,
                       record_history: bool = True) -> GroundState:
    """Minimize J over {||u||_2 = rho} by preconditioned projected gradient descent.

    Each step moves along the tangent-space gradient measured in the metric
    ``K + sigma W`` (``K`` the stiffness matrix, ``W`` the quadrature weights,
    ``sigma = max(-lambda, (pi/r_max)^2)``), retracts to the sphere by
    rescaling, and takes absolute values.  A step is accepted when it passes
    an Armijo test on J; once the predicted decrease drops below the
    roundoff level of J, a step that leaves J unchanged to roundoff is
    accepted only if it reduces the residual norm.  Rejected steps shrink by
    ``backtrack_factor``.
    """
    cfg = cfg or FlowConfig()
    cfg.validate()
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if grid.N != pot.dimension:
        raise ValueError("potential and grid dimensions differ")
    notes = []
    if check_hypotheses(pot, samples=1000).nonexistence_holds:
        notes.append("potential satisfies 0 <= 2F <= F's: no minimizer expected")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)

    u = values_of(grid, u0) if u0 is not None else initial_profile(grid, pot, rho, cfg)
    u = _normalize(grid, np.abs(np.asarray(u, dtype=float)), rho)
    w = grid.weights
    rho2 = rho * rho
    ab = grid.stiffness_banded()
    sigma_floor = (math.pi / grid.r_max) ** 2
    peak0 = float(u.max())

    J, J_scale = _energy_and_scale(grid, pot, u)
    g, lam, res = _state(grid, pot, u, rho2)
    tau = cfg.initial_step
    j_hist = [J] if record_history else []
    m_hist = [float(w @ (u * u))] if record_history else []
    verdict = Verdict.ITER_LIMIT
    k = 0
    while True:
        if res <= cfg.residual_tol * rho:
            verdict = Verdict.CONVERGED
            break
        if _inner_peak(grid, u) < 1e-8 * peak0:
            verdict = Verdict.VANISHING
            break
        if k >= cfg.max_iters:
            break

        pre = ab.copy()
        pre[1] += max(-lam, sigma_floor) * w
        sol = solveh_banded(pre, np.column_stack([w * g, w * u]))
        a, b = sol[:, 0], sol[:, 1]
        d = a - (float(w @ (u * a)) / float(w @ (u * b))) * b
        slope = float(w @ (g * d))
        floor = 1e-13 * J_scale

        accepted = None
        while tau > 1e-12:
            trial = np.abs(u - tau * d)
            trial *= rho / math.sqrt(float(w @ (trial * trial)))
            Jt, St = _energy_and_scale(grid, pot, trial)
            if Jt <= J - 1e-4 * tau * slope and tau * slope > floor:
                accepted = (trial, Jt, St, _state(grid, pot, trial, rho2))
                break
            if tau * slope <= floor and Jt <= J + floor:
                st = _state(grid, pot, trial, rho2)
                if st[2] < res:
                    accepted = (trial, Jt, St, st)
                    break
            tau *= cfg.backtrack_factor
        if accepted is None:
            notes.append(f"line search stalled at iteration {k}, residual {res:.3e}")
            break
        u, J, J_scale, (g, lam, res) = accepted
        k += 1
        tau = min(tau * cfg.growth_factor, cfg.max_step)

        if cfg.rearrange_every and k % cfg.rearrange_every == 0:
            ur = rearrange_decreasing(grid, u)
            ur *= rho / math.sqrt(float(w @ (ur * ur)))
            Jr, Sr = _energy_and_scale(grid, pot, ur)
            if Jr < J:
                u, J, J_scale = ur, Jr, Sr
                g, lam, res = _state(grid, pot, u, rho2)
        if record_history:
            j_hist.append(J)
            m_hist.append(float(w @ (u * u)))

    if verdict is not Verdict.VANISHING and lam >= 0.0:
        # a decaying solution on R^N needs lam < 0; this state leans on the wall
        verdict = Verdict.VANISHING
        notes.append(f"multiplier {lam:.3e} >= 0: mass spread to the truncation wall")
    if verdict is Verdict.CONVERGED and outer_ratio(grid, u) > 1e-8:
        notes.append(f"outer-grid magnitude {outer_ratio(grid, u):.3e} of peak")
        warnings.warn(notes[-1], TruncationWarning, stacklevel=2)

    diag = diagnostics(grid, pot, u)
    return GroundState(
        u=RadialField(u, grid), rho=float(rho), lam=diag.lambda_rayleigh,
        omega=diag.lambda_rayleigh - cfg.omega_shift, diagnostics=diag,
        converged=verdict is Verdict.CONVERGED, verdict=verdict, iterations=k,
        j_history=j_hist, mass_history=m_hist, notes=notes,
    )


# ----------------------------------------------------------------------
# threshold and subadditivity scan

MULTISTART = ("gaussian", "plateau", "scaled_plateau")


@dataclass
class SubadditivityCheck:
    theta: float
    rho: float
    lhs: float  # I(theta rho^2)
    rhs: float  # theta I(rho^2)
    holds: bool

    def as_tuple(self) -> tuple:
        return (self.theta, self.rho, self.lhs, self.rhs, self.holds)


@dataclass
class RhoScan:
    rho_values: list[float]
    i_values: list[float]
    lambda_values: list[float]
    verdicts: list[str]
    rho_bar_estimate: Optional[float]
    rho_bar_bracket: Optional[tuple[float, float]]
    subadditivity_checks: list[SubadditivityCheck]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rho_values": list(self.rho_values),
            "i_values": list(self.i_values),
            "lambda_values": list(self.lambda_values),
            "verdicts": list(self.verdicts),
            "rho_bar_estimate": self.rho_bar_estimate,
            "rho_bar_bracket": list(self.rho_bar_bracket) if self.rho_bar_bracket else None,
            "subadditivity_checks": [
                {"theta": c.theta, "rho": c.rho, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}
                for c in self.subadditivity_checks
            ],
            "notes": list(self.notes),
        }


def best_state(grid: RadialGrid, pot: PotentialSpec, rho: float,
               cfg: Optional[FlowConfig] = None) -> GroundState:
    """Lowest-J result over the fixed multistart set; ties keep the earlier start."""
    cfg = cfg or FlowConfig()
    best = None
    s_star = min_point(pot)
    for kind in MULTISTART:
        run_cfg = replace(cfg, init_profile=kind, init_s0=s_star)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gs = minimize_on_sphere(grid, pot, rho, run_cfg, record_history=False)
        if best is None or gs.diagnostics.j_value < best.diagnostics.j_value:
            best = gs
    return best


def scan_rho(grid: RadialGrid, pot: PotentialSpec, rho_list, thetas=(1.5, 2.0, 4.0),
             cfg: Optional[FlowConfig] = None, tol: float = 1e-6,
             bisect_rtol: float = 0.01, margin: float = 1e-6) -> RhoScan:
    """Sample I(rho^2) on ``rho_list``, locate the sign change and test subadditivity.

    ``rho_bar_estimate`` is the midpoint of a bracket ``[lo, hi]`` with
    ``I(lo^2) >= -tol > I(hi^2)`` and ``hi - lo <= bisect_rtol * hi``; it is
    None when no sampled value is negative or when the first one already is.
    A subadditivity check at ``(theta, rho)`` is recorded only when the state
    at ``rho`` is a converged minimizer with ``I < -tol``, and holds when
    ``theta I(rho^2) - I(theta rho^2) > margin * |theta I(rho^2)|``.
    """
    rhos = [float(r) for r in rho_list]
    if not rhos:
        raise ValueError("rho_list is empty")
    if any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho_list must be strictly ascending")
    if any(not r > 0 for r in rhos):
        raise ValueError("rho values must be positive")
    thetas = [float(t) for t in thetas]
    if any(not t > 1 for t in thetas):
        raise ValueError("thetas must exceed 1")
    cfg = cfg or FlowConfig()
    cfg.validate()

    cache: dict[float, GroundState] = {}

    def solve(rho):
        if rho not in cache:
            cache[rho] = best_state(grid, pot, rho, cfg)
        return cache[rho]

    states = [solve(r) for r in rhos]
    i_vals = [gs.diagnostics.j_value for gs in states]
    notes = []

    rho_bar, bracket = None, None
    neg = [k for k, v in enumerate(i_vals) if v < -tol]
    if neg:
        k = neg[0]
        if k == 0:
            notes.append("I < 0 already at the smallest sampled rho; no threshold bracketed")
        else:
            lo, hi = rhos[k - 1], rhos[k]
            while hi - lo > bisect_rtol * hi:
                mid = 0.5 * (lo + hi)
                if solve(mid).diagnostics.j_value < -tol:
                    hi = mid
                else:
                    lo = mid
            bracket = (lo, hi)
            rho_bar = 0.5 * (lo + hi)

    checks = []
    rho_top = rhos[-1]
    for theta in thetas:
        for rho, gs in zip(rhos, states):
            if theta * rho * rho > rho_top * rho_top * (1 + 1e-12):
                continue
            if not (gs.converged and gs.diagnostics.j_value < -tol):
                continue
            lhs = solve(math.sqrt(theta) * rho).diagnostics.j_value
            rhs = theta * gs.diagnostics.j_value
            checks.append(SubadditivityCheck(theta, rho, lhs, rhs, rhs - lhs > margin * abs(rhs)))

    return RhoScan(
        rho_values=rhos, i_values=i_vals, lambda_values=[gs.lam for gs in states],
        verdicts=[gs.verdict.value for gs in states], rho_bar_estimate=rho_bar,
        rho_bar_bracket=bracket, subadditivity_checks=checks, notes=notes,
    )
