"""Radial finite-volume discretization of R^N.

Nodes sit at ``r_i = i*h`` for ``i = 0..M-1`` with ``h = r_max/M``; the
Dirichlet node ``r_M = r_max`` is implicit (``u(r_max) = 0``).  Node ``i`` owns
the spherical shell ``[r_{i-1/2}, r_{i+1/2}]`` (the ball ``[0, h/2]`` for the
origin), so the quadrature weight is the exact shell volume and the Laplacian
is the flux-form (conservative) operator

    (Lap u)_i = (1/w_i) * sum_{edges e at i} +-c_e (u_{e+1} - u_e),
    c_e = omega * r_{e+1/2}^(N-1) / h,

which makes ``integrate(-Lap(u) * v) == dirichlet(u, v)`` hold to roundoff.  At
the origin this reduces to ``2N (u_1 - u_0) / h^2``, the symmetric-extension
value of ``N u''(0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class UnsupportedDimensionError(ValueError):
    """Raised for N < 3 (critical exponents need N >= 3)."""


class GridMismatchError(ValueError):
    """Raised when a field does not live on the grid it is used with."""


class TruncationWarning(UserWarning):
    """The field is not small near the Dirichlet wall."""


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N, ``2 pi^(N/2) / Gamma(N/2)``."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    r_max: float
    M: int
    h: float = field(init=False)
    omega: float = field(init=False)
    r: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    edge_coeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise UnsupportedDimensionError(f"dimension N={self.N} unsupported, need N >= 3")
        if not (math.isfinite(self.r_max) and self.r_max > 0):
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if int(self.M) != self.M or self.M < 16:
            raise ValueError(f"M must be an integer >= 16, got {self.M}")
        N, M = int(self.N), int(self.M)
        h = self.r_max / M
        omega = sphere_area(N)
        r = h * np.arange(M, dtype=float)
        half = h * (np.arange(M + 1, dtype=float) - 0.5)
        half[0] = 0.0
        # half[i] = r_{i-1/2}; shell volumes between consecutive faces
        shells = omega / N * (half[1:] ** N - half[:-1] ** N)
        # edge e joins node e and e+1 (e = M-1 joins the Dirichlet node)
        edges = omega * (h * (np.arange(M, dtype=float) + 0.5)) ** (N - 1) / h
        for name, value in (("N", N), ("M", M), ("h", h), ("omega", omega), ("r", r),
                            ("weights", shells), ("edge_coeffs", edges)):
            object.__setattr__(self, name, value)
        for arr in (r, shells, edges):
            arr.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (self.N, self.r_max, self.M) == (other.N, other.r_max, other.M)

    def __hash__(self):
        return hash((self.N, self.r_max, self.M))

    @property
    def shape(self) -> tuple[int]:
        return (self.M,)

    def ball_volume(self, R: float) -> float:
        return self.omega * R ** self.N / self.N

    def stiffness(self) -> sparse.csc_matrix:
        """Symmetric positive definite matrix K with ``u.K.v = dirichlet(u, v)``."""
        c = self.edge_coeffs
        diag = c.copy()
        diag[1:] += c[:-1]
        off = -c[:-1]
        return sparse.diags([off, diag, off], [-1, 0, 1], format="csc")

    def stiffness_banded(self) -> np.ndarray:
        """K in LAPACK upper symmetric banded storage (2, M)."""
        c = self.edge_coeffs
        ab = np.zeros((2, self.M))
        ab[0, 1:] = -c[:-1]
        ab[1] = c
        ab[1, 1:] += c[:-1]
        return ab


def build_grid(N: int, r_max: float, M: int) -> RadialGrid:
    return RadialGrid(N, float(r_max), M)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Real profile ``u(r_i)`` bound to its grid."""

    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, v)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex wave ``psi(r_i)`` bound to its grid."""

    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        _check_shape(self.grid, v)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def _check_shape(grid: RadialGrid, v: np.ndarray) -> None:
    if v.shape != grid.shape:
        raise GridMismatchError(f"field of shape {v.shape} does not match grid with M={grid.M}")


def values_of(grid: RadialGrid, f) -> np.ndarray:
    """Unwrap a field (or plain array) and check it belongs to ``grid``."""
    if isinstance(f, (RadialField, ComplexField)):
        if f.grid != grid:
            raise GridMismatchError("field was built on a different grid")
        return f.values
    v = np.asarray(f)
    _check_shape(grid, v)
    return v


def integrate(grid: RadialGrid, f) -> float:
    """Quadrature of a radial function over R^N (real or complex)."""
    return grid.weights @ values_of(grid, f)


def _edge_diffs(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    # forward differences u_{e+1} - u_e with the Dirichlet node appended
    d = np.empty(grid.M, dtype=u.dtype)
    d[:-1] = u[1:] - u[:-1]
    d[-1] = -u[-1]
    return d


def dirichlet(grid: RadialGrid, u, v) -> float:
    """Discrete Dirichlet form, approximating the integral of grad u . grad v.

    For complex arguments this is sesquilinear in the second slot,
    ``sum c_e du_e conj(dv_e)``.
    """
    du = _edge_diffs(grid, values_of(grid, u))
    dv = _edge_diffs(grid, values_of(grid, v))
    return grid.edge_coeffs @ (du * np.conj(dv))


def apply_stiffness(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """``K u`` without forming the matrix."""
    flux = grid.edge_coeffs * _edge_diffs(grid, u)
    out = -flux
    out[1:] += flux[:-1]
    return out


def laplacian(grid: RadialGrid, u) -> np.ndarray:
    return -apply_stiffness(grid, values_of(grid, u)) / grid.weights


def grad_norm_sq(grid: RadialGrid, u) -> float:
    v = values_of(grid, u)
    d = _edge_diffs(grid, v)
    return float(grid.edge_coeffs @ (d.real ** 2 + d.imag ** 2 if np.iscomplexobj(d) else d * d))


def l2_norm_sq(grid: RadialGrid, u) -> float:
    v = values_of(grid, u)
    return float(grid.weights @ (np.abs(v) ** 2))


def h1_norm_sq(grid: RadialGrid, u) -> float:
    return grad_norm_sq(grid, u) + l2_norm_sq(grid, u)


def lq_norm(grid: RadialGrid, u, q: float) -> float:
    return float(grid.weights @ np.abs(values_of(grid, u)) ** q) ** (1.0 / q)


def outer_ratio(grid: RadialGrid, u, fraction: float = 0.1) -> float:
    """max |u| over the outer ``fraction`` of the grid divided by max |u|."""
    a = np.abs(values_of(grid, u))
    peak = a.max()
    if peak == 0.0:
        return 0.0
    start = int(math.floor((1.0 - fraction) * grid.M))
    return float(a[start:].max() / peak)


def check_truncation(grid: RadialGrid, u, threshold: float = 1e-8) -> bool:
    """Warn when the field has not decayed near the wall; returns True if clean."""
    ratio = outer_ratio(grid, u)
    if ratio > threshold:
        warnings.warn(f"field magnitude {ratio:.3e} of peak in outer 10% of grid",
                      TruncationWarning, stacklevel=2)
        return False
    return True


def sample(grid: RadialGrid, fn) -> np.ndarray:
    """Evaluate a callable of r at the grid nodes."""
    return np.asarray(fn(grid.r), dtype=float)
