"""Radial NLS time stepping and the orbital-stability experiment.

The equation ``i psi_t + Lap psi - F'(|psi|) psi/|psi| = 0`` is split into the
pointwise phase rotation ``psi -> psi exp(-i t F'(|psi|)/|psi|)`` and the free
flow ``i psi_t = -Lap psi``.  The free flow is stepped by Crank-Nicolson in
the weighted form ``(W + i dt/2 K) psi+ = (W - i dt/2 K) psi``, a Cayley
transform that is unitary in the quadrature norm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .grid import (ComplexField, RadialGrid, TruncationWarning, dirichlet, grad_norm_sq,
                   h1_norm_sq, values_of)
from .potentials import PotentialSpec, dF_over_s, evaluate


class EvolutionAborted(RuntimeError):
    """Raised when a run produces non-finite values or radiation reaches the wall."""

    def __init__(self, reason: str, time: float, step: int):
        super().__init__(f"{reason} at t={time:.6g} (step {step})")
        self.reason = reason
        self.time = time
        self.step = step


@dataclass
class EvolutionConfig:
    dt: float
    T: float
    record_every: int = 1
    scheme: str = "StrangCN"
    wall_tol: float = 1e-6

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def validate(self) -> None:
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if not self.dt < self.T:
            raise ValueError("need dt < T")
        if abs(self.n_steps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not a whole number of steps dt={self.dt}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if self.scheme != "StrangCN":
            raise ValueError(f"unknown scheme {self.scheme!r}")


class StrangCN:
    """One Strang step: half phase kick, Crank-Nicolson free step, half kick."""

    def __init__(self, grid: RadialGrid, pot: PotentialSpec, dt: float):
        self.grid, self.pot, self.dt = grid, pot, dt
        K = grid.stiffness()
        W = sparse.diags(grid.weights, format="csc")
        self._lu = splu((W + 0.5j * dt * K).tocsc())
        self._rhs = (W - 0.5j * dt * K).tocsr()

    def kick(self, psi: np.ndarray, tau: float) -> np.ndarray:
        return psi * np.exp(-1j * tau * dF_over_s(self.pot, np.abs(psi)))

    def free(self, psi: np.ndarray) -> np.ndarray:
        return self._lu.solve(self._rhs @ psi)

    def step(self, psi: np.ndarray) -> np.ndarray:
        half = 0.5 * self.dt
        return self.kick(self.free(self.kick(psi, half)), half)


@dataclass
class Trajectory:
    grid: RadialGrid
    times: np.ndarray
    snapshots: list[np.ndarray]
    dt: float

    def __len__(self):
        return len(self.times)

    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def _wall_ratio(grid: RadialGrid, psi: np.ndarray) -> float:
    dens = np.abs(psi) ** 2
    peak = dens.max()
    if peak == 0.0:
        return 0.0
    start = int(math.floor(0.9 * grid.M))
    return float(dens[start:].max() / peak)


def evolve(grid: RadialGrid, pot: PotentialSpec, psi0, cfg: EvolutionConfig,
           callback=None) -> Trajectory:
    """Propagate ``psi0`` to time ``cfg.T``; snapshots every ``record_every`` steps.

    ``callback(step, t, psi)`` is called at each recorded step, if given.
    Raises EvolutionAborted on non-finite values or when the density in the
    outer 10% of the grid exceeds ``cfg.wall_tol`` of the peak density.
    """
    cfg.validate()
    if grid.N != pot.dimension:
        raise ValueError("potential and grid dimensions differ")
    psi = np.array(values_of(grid, psi0), dtype=complex)
    if not np.all(np.isfinite(psi)):
        raise EvolutionAborted("non-finite initial data", 0.0, 0)
    if _wall_ratio(grid, psi) > 0.1 * cfg.wall_tol:
        warnings.warn(f"initial density {_wall_ratio(grid, psi):.3e} of peak near the wall",
                      TruncationWarning, stacklevel=2)
    stepper = StrangCN(grid, pot, cfg.dt)
    times = [0.0]
    snaps = [psi.copy()]
    if callback is not None:
        callback(0, 0.0, psi)
    for n in range(1, cfg.n_steps + 1):
        psi = stepper.step(psi)
        if n % cfg.record_every == 0 or n == cfg.n_steps:
            t = n * cfg.dt
            if not np.all(np.isfinite(psi)):
                raise EvolutionAborted("non-finite values", t, n)
            ratio = _wall_ratio(grid, psi)
            if ratio > cfg.wall_tol:
                raise EvolutionAborted(f"wall density {ratio:.3e} of peak exceeds {cfg.wall_tol:g}", t, n)
            times.append(t)
            snaps.append(psi.copy())
            if callback is not None:
                callback(n, t, psi)
    return Trajectory(grid, np.array(times), snaps, cfg.dt)


def mass_of(grid: RadialGrid, psi) -> float:
    v = values_of(grid, psi)
    return float(grid.weights @ (v.real ** 2 + v.imag ** 2))


def energy_of(grid: RadialGrid, pot: PotentialSpec, psi) -> float:
    """Integral of |grad psi|^2/2 + F(|psi|)."""
    v = values_of(grid, psi)
    kin = 0.5 * (grad_norm_sq(grid, v.real) + grad_norm_sq(grid, v.imag))
    return kin + float(grid.weights @ evaluate(pot, np.abs(v), 0))


def h1_inner(grid: RadialGrid, a, b) -> complex:
    """<a, b>_{H^1} = D(a, b) + integral of a conj(b)."""
    va, vb = values_of(grid, a), values_of(grid, b)
    return complex(dirichlet(grid, va, vb) + grid.weights @ (va * np.conj(vb)))


def orbit_distance(grid: RadialGrid, psi, u) -> float:
    """min over theta of ||psi - e^{i theta} u||_{H^1}, at theta = arg <psi, u>_{H^1}."""
    v = np.asarray(values_of(grid, psi), dtype=complex)
    ref = values_of(grid, u)
    z = h1_inner(grid, v, ref)
    phase = z / abs(z) if z != 0 else 1.0
    return math.sqrt(h1_norm_sq(grid, v - phase * ref))


def phase_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of the unwrapped phase of a complex time series."""
    ph = np.unwrap(np.angle(values))
    slope, _ = np.polyfit(times, ph, 1)
    return float(slope)


@dataclass
class StabilityResult:
    times: list[float]
    mass_series: list[float]
    energy_series: list[float]
    orbit_distance_series: list[float]
    delta: float
    delta0: float
    max_excursion: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        m0 = self.mass_series[0]
        e0 = self.energy_series[0]
        return {
            "delta": self.delta,
            "delta0": self.delta0,
            "max_excursion": self.max_excursion,
            "excursion_ratio": self.max_excursion / self.delta0 if self.delta > 0 else None,
            "max_rel_mass_drift": max(abs(m - m0) for m in self.mass_series) / m0,
            "max_energy_drift": max(abs(e - e0) for e in self.energy_series),
            "n_records": len(self.times),
            "notes": list(self.notes),
        }


def default_perturbation(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """Gaussian bump with the width of the profile's half-height radius."""
    half = u.max() / 2.0
    idx = int(np.argmax(u < half)) if np.any(u < half) else grid.M // 4
    width = max(grid.r[idx], 4.0 * grid.h)
    return np.exp(-0.5 * (grid.r / width) ** 2)


def seed_state(grid: RadialGrid, u: np.ndarray, rho: float, delta: float,
               perturbation: Optional[np.ndarray] = None) -> np.ndarray:
    """u + delta*||u||_{H^1}/||phi||_{H^1} * phi, rescaled back to mass rho^2."""
    phi = default_perturbation(grid, u) if perturbation is None else values_of(grid, perturbation)
    scale = math.sqrt(h1_norm_sq(grid, u) / h1_norm_sq(grid, phi))
    psi = (u + delta * scale * phi).astype(complex)
    return psi * (rho / math.sqrt(mass_of(grid, psi)))


def stability_experiment(grid: RadialGrid, pot: PotentialSpec, gs, delta: float,
                         cfg: EvolutionConfig, perturbation=None) -> StabilityResult:
    """Perturb a converged ground state by relative H^1 size ``delta`` and track the orbit distance."""
    if not gs.converged:
        raise ValueError(f"ground state not converged (verdict {gs.verdict.value})")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if gs.grid != grid:
        raise ValueError("ground state lives on a different grid")
    u = gs.u.values
    psi0 = seed_state(grid, u, gs.rho, delta, perturbation)
    times, masses, energies, dists = [], [], [], []

    def record(n, t, psi):
        times.append(t)
        masses.append(mass_of(grid, psi))
        energies.append(energy_of(grid, pot, psi))
        dists.append(orbit_distance(grid, psi, u))

    evolve(grid, pot, psi0, cfg, callback=record)
    return StabilityResult(
        times=times, mass_series=masses, energy_series=energies,
        orbit_distance_series=dists, delta=float(delta), delta0=dists[0],
        max_excursion=max(dists),
    )


def as_complex_field(grid: RadialGrid, psi) -> ComplexField:
    return ComplexField(values_of(grid, psi), grid)
