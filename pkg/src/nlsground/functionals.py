"""Energy, constrained gradient, Lagrange multiplier and solution identities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RadialGrid, apply_stiffness, grad_norm_sq, integrate, l2_norm_sq, values_of
from .potentials import PotentialSpec, critical_exponent, evaluate

_TINY = 1e-300


def _check_dims(grid: RadialGrid, pot: PotentialSpec) -> None:
    if grid.N != pot.dimension:
        raise ValueError(f"grid dimension {grid.N} != potential dimension {pot.dimension}")


def _mass(grid: RadialGrid, u: np.ndarray) -> float:
    m = l2_norm_sq(grid, u)
    if m <= 0.0:
        raise ZeroDivisionError("field has zero L2 norm")
    return m


def energy_J(grid: RadialGrid, pot: PotentialSpec, u) -> float:
    """J(u) = integral of |grad u|^2/2 + F(u)."""
    _check_dims(grid, pot)
    v = values_of(grid, u)
    return 0.5 * grad_norm_sq(grid, v) + float(integrate(grid, evaluate(pot, v, 0)))


def j_gradient(grid: RadialGrid, pot: PotentialSpec, u) -> np.ndarray:
    """L2 gradient of J: ``-Lap u + F'(u)``.

    ``integrate(j_gradient(u) * phi)`` is the exact directional derivative of
    the discrete J because the Laplacian is the stiffness matrix scaled by the
    quadrature weights.
    """
    _check_dims(grid, pot)
    v = values_of(grid, u)
    return apply_stiffness(grid, v) / grid.weights + evaluate(pot, v, 1)


def lagrange_multiplier(grid: RadialGrid, pot: PotentialSpec, u) -> float:
    """Rayleigh value [D(u,u) + int F'(u)u] / int u^2; makes the residual orthogonal to u."""
    _check_dims(grid, pot)
    v = values_of(grid, u)
    m = _mass(grid, v)
    return (grad_norm_sq(grid, v) + float(integrate(grid, evaluate(pot, v, 1) * v))) / m


def residual(grid: RadialGrid, pot: PotentialSpec, u, lam: float) -> np.ndarray:
    return j_gradient(grid, pot, u) - lam * values_of(grid, u)


def pde_residual(grid: RadialGrid, pot: PotentialSpec, u, lam: float) -> float:
    """L2 norm of -Lap u + F'(u) - lam u."""
    return float(np.sqrt(l2_norm_sq(grid, residual(grid, pot, u, lam))))


def wall_flux(grid: RadialGrid, u) -> float:
    """Dirichlet-wall term omega R^N |u'(R)|^2 / (N-2) of the Pohozaev identity on the ball B_{r_max}.

    On all of R^N this term is absent; on the truncated domain it is the exact
    defect carried by the boundary, so removing it leaves only discretization
    error.
    """
    v = values_of(grid, u)
    slope = v[-1] / grid.h
    return float(grid.omega * grid.r_max ** grid.N * abs(slope) ** 2 / (grid.N - 2))


def pohozaev_sides(grid: RadialGrid, pot: PotentialSpec, u, lam: float,
                   include_wall: bool = True) -> tuple[float, float]:
    """(||grad u||^2, 2N/(N-2) * int(lam u^2/2 - F(u)) [- wall flux])."""
    _check_dims(grid, pot)
    v = values_of(grid, u)
    N = grid.N
    lhs = grad_norm_sq(grid, v)
    rhs = 2.0 * N / (N - 2) * float(integrate(grid, 0.5 * lam * v * v - evaluate(pot, v, 0)))
    if include_wall:
        rhs -= wall_flux(grid, v)
    return lhs, rhs


def pohozaev_residual(grid: RadialGrid, pot: PotentialSpec, u, lam: float,
                      include_wall: bool = True) -> float:
    """|LHS - RHS| / max(|LHS|, |RHS|) of the dilation identity; 0 for u = 0."""
    lhs, rhs = pohozaev_sides(grid, pot, u, lam, include_wall)
    scale = max(abs(lhs), abs(rhs))
    if scale < _TINY:
        return 0.0
    return abs(lhs - rhs) / scale


def dilation_derivative(grid: RadialGrid, pot: PotentialSpec, u, lam: float) -> float:
    """Closed form of d/dsigma J_lam(u(./sigma)) at sigma = 1."""
    v = values_of(grid, u)
    N = grid.N
    return (0.5 * (N - 2) * grad_norm_sq(grid, v)
            - N * float(integrate(grid, 0.5 * lam * v * v - evaluate(pot, v, 0))))


def derrick_value(grid: RadialGrid, pot: PotentialSpec, u) -> float:
    """Integral of F'(u)u/2 - F(u)."""
    _check_dims(grid, pot)
    v = values_of(grid, u)
    return float(integrate(grid, 0.5 * evaluate(pot, v, 1) * v - evaluate(pot, v, 0)))


def ar_lambda(grid: RadialGrid, pot: PotentialSpec, u) -> float:
    """Multiplier from combining the Pohozaev and weak forms:
    (N-2)/(2 int u^2) * int(2* F(u) - F'(u) u)."""
    _check_dims(grid, pot)
    v = values_of(grid, u)
    N = grid.N
    m = _mass(grid, v)
    crit = critical_exponent(N)
    return 0.5 * (N - 2) / m * float(integrate(grid, crit * evaluate(pot, v, 0) - evaluate(pot, v, 1) * v))


def gn_quotient(grid: RadialGrid, u, q: float) -> float:
    """||u||_q / (||u||_2^(1-N/2+N/q) ||grad u||_2^(N/2-N/q)); invariant under dilation and scaling."""
    N = grid.N
    crit = critical_exponent(N)
    if not 2.0 <= q <= crit:
        raise ValueError(f"q={q} outside [2, 2*={crit:g}]")
    v = values_of(grid, u)
    l2 = np.sqrt(l2_norm_sq(grid, v))
    if l2 <= 0.0:
        raise ZeroDivisionError("zero field")
    a = 1.0 - N / 2.0 + N / q
    b = N / 2.0 - N / q
    lq = float(grid.weights @ np.abs(v) ** q) ** (1.0 / q)
    if b == 0.0:
        return lq / l2 ** a
    g = np.sqrt(grad_norm_sq(grid, v))
    if g <= 0.0:
        raise ZeroDivisionError("zero gradient")
    return lq / (l2 ** a * g ** b)


DEFAULT_GN_EXPONENTS = (3.0, 4.0, 5.0)


@dataclass
class IdentityDiagnostics:
    j_value: float
    mass: float
    lambda_rayleigh: float
    lambda_ar: float
    pde_residual: float
    pohozaev_residual: float
    derrick_value: float
    gn_quotients: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "j_value": self.j_value,
            "mass": self.mass,
            "lambda_rayleigh": self.lambda_rayleigh,
            "lambda_ar": self.lambda_ar,
            "pde_residual": self.pde_residual,
            "pohozaev_residual": self.pohozaev_residual,
            "derrick_value": self.derrick_value,
            "gn_quotients": [[q, v] for q, v in self.gn_quotients],
        }


def diagnostics(grid: RadialGrid, pot: PotentialSpec, u, gn_exponents=None) -> IdentityDiagnostics:
    v = values_of(grid, u)
    m = _mass(grid, v)
    lam = lagrange_multiplier(grid, pot, v)
    crit = critical_exponent(grid.N)
    qs = DEFAULT_GN_EXPONENTS if gn_exponents is None else gn_exponents
    gn = []
    for q in qs:
        if 2.0 <= q <= crit:
            try:
                gn.append((float(q), gn_quotient(grid, v, q)))
            except ZeroDivisionError:
                pass
    return IdentityDiagnostics(
        j_value=energy_J(grid, pot, v),
        mass=m,
        lambda_rayleigh=lam,
        lambda_ar=ar_lambda(grid, pot, v),
        pde_residual=pde_residual(grid, pot, v, lam),
        pohozaev_residual=pohozaev_residual(grid, pot, v, lam),
        derrick_value=derrick_value(grid, pot, v),
        gn_quotients=gn,
    )
