"""Nonlinearities F(s) and sampled checks of their structural hypotheses.

All families are even functions of ``s`` built from powers of ``|s|`` with
exponents strictly above 2, so ``F(0) = F'(0) = F''(0) = 0`` holds by
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar


class Family(str, Enum):
    POWER_SUM = "PowerSum"
    RATIONAL = "Rational"
    PURE_POWER = "PurePower"
    ZERO = "Zero"


class PotentialError(ValueError):
    """Invalid potential parameters."""


class PreconditionError(ValueError):
    """An operation was called outside its domain."""


def critical_exponent(N: int) -> float:
    """Sobolev exponent 2* = 2N/(N-2)."""
    return 2.0 * N / (N - 2)


def subcritical_exponent(N: int) -> float:
    """L^2-critical growth 2 + 4/N."""
    return 2.0 + 4.0 / N


@dataclass(frozen=True)
class PotentialSpec:
    family: Family
    dimension: int = 3
    coefficients: tuple[tuple[float, float], ...] = ()
    p: Optional[float] = None
    q: Optional[float] = None
    power_sign: float = 1.0
    power_exponent: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        N = self.dimension
        if int(N) != N or N < 3:
            raise PotentialError(f"dimension_N must be an integer >= 3, got {N}")
        if self.family is Family.POWER_SUM:
            terms = tuple((float(c), float(e)) for c, e in self.coefficients)
            if not terms:
                raise PotentialError("PowerSum needs at least one (coefficient, exponent) term")
            object.__setattr__(self, "coefficients", terms)
        elif self.family is Family.RATIONAL:
            if self.p is None or self.q is None:
                raise PotentialError("Rational needs exponents p and q")
            if not self.p < self.q:
                raise PotentialError(f"Rational needs p < q, got p={self.p}, q={self.q}")
        elif self.family is Family.PURE_POWER:
            if self.power_exponent is None:
                raise PotentialError("PurePower needs power_exponent")
            if self.power_sign not in (1, -1, 1.0, -1.0):
                raise PotentialError(f"power_sign must be +1 or -1, got {self.power_sign}")
        crit = critical_exponent(N)
        for e in self.exponents:
            if not (math.isfinite(e) and 2.0 < e < crit):
                raise PotentialError(f"exponent {e} outside (2, 2*={crit:g}) for N={N}")

    # constructors -----------------------------------------------------

    @classmethod
    def power_sum(cls, terms, N: int = 3) -> "PotentialSpec":
        return cls(Family.POWER_SUM, N, coefficients=tuple(terms))

    @classmethod
    def rational(cls, p: float, q: float, N: int = 3) -> "PotentialSpec":
        return cls(Family.RATIONAL, N, p=float(p), q=float(q))

    @classmethod
    def pure_power(cls, exponent: float, sign: float = 1.0, N: int = 3) -> "PotentialSpec":
        return cls(Family.PURE_POWER, N, power_sign=float(sign), power_exponent=float(exponent))

    @classmethod
    def zero(cls, N: int = 3) -> "PotentialSpec":
        return cls(Family.ZERO, N)

    @classmethod
    def quartic_quintic(cls, N: int = 3) -> "PotentialSpec":
        """-|s|^4/4 + |s|^5/5."""
        return cls.power_sum([(-0.25, 4.0), (0.2, 5.0)], N)

    # ------------------------------------------------------------------

    @property
    def exponents(self) -> tuple[float, ...]:
        if self.family is Family.POWER_SUM:
            return tuple(e for _, e in self.coefficients)
        if self.family is Family.RATIONAL:
            return (self.p, self.q)
        if self.family is Family.PURE_POWER:
            return (self.power_exponent,)
        return ()

    def F(self, s):
        return evaluate(self, s, 0)

    def dF(self, s):
        return evaluate(self, s, 1)

    def d2F(self, s):
        return evaluate(self, s, 2)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "dimension_N": self.dimension}
        if self.family is Family.POWER_SUM:
            d["coefficients"] = [list(t) for t in self.coefficients]
        elif self.family is Family.RATIONAL:
            d["p"], d["q"] = self.p, self.q
        elif self.family is Family.PURE_POWER:
            d["power_sign"], d["power_exponent"] = self.power_sign, self.power_exponent
        return d


def evaluate(pot: PotentialSpec, s, order: int = 0):
    """F(s), F'(s) or F''(s) for scalar or array ``s``."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("F evaluated at a non-finite argument")
    a = np.abs(s_arr)
    sg = np.sign(s_arr)
    fam = pot.family
    if fam is Family.ZERO:
        out = np.zeros_like(a)
    elif fam is Family.POWER_SUM:
        out = np.zeros_like(a)
        for c, e in pot.coefficients:
            if order == 0:
                out += c * a ** e
            elif order == 1:
                out += c * e * a ** (e - 1)
            else:
                out += c * e * (e - 1) * a ** (e - 2)
        if order == 1:
            out *= sg
    elif fam is Family.PURE_POWER:
        e, sig = pot.power_exponent, pot.power_sign
        if order == 0:
            out = sig * a ** e / e
        elif order == 1:
            out = sig * sg * a ** (e - 1)
        else:
            out = sig * (e - 1) * a ** (e - 2)
    else:
        p, q = pot.p, pot.q
        d = q - p
        ad = a ** d
        D = 1.0 + ad
        if order == 0:
            out = -(a ** q) / D
        elif order == 1:
            out = -sg * a ** (q - 1) * (q + p * ad) / D ** 2
        else:
            num = (q * (q - 1) + p * (q - 1 + d) * ad) * D - 2.0 * d * ad * (q + p * ad)
            out = -(a ** (q - 2)) * num / D ** 3
    return out if out.ndim else float(out)


def dF_over_s(pot: PotentialSpec, s):
    """F'(|s|)/|s| with its limit 0 at s = 0 (every exponent exceeds 2)."""
    a = np.abs(np.asarray(s))
    fam = pot.family
    if fam is Family.ZERO:
        return np.zeros(a.shape)
    if fam is Family.POWER_SUM:
        out = np.zeros(a.shape)
        for c, e in pot.coefficients:
            out += c * e * a ** (e - 2)
        return out
    if fam is Family.PURE_POWER:
        return pot.power_sign * a ** (pot.power_exponent - 2)
    p, q = pot.p, pot.q
    ad = a ** (q - p)
    return -(a ** (q - 2)) * (q + p * ad) / (1.0 + ad) ** 2


# ----------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisReport:
    fp_holds: bool
    fp_exponents: Optional[tuple[float, float]]
    fp_constants: tuple[float, float]
    fp_prime_holds: bool
    fp_prime_constants: tuple[float, float]
    f0_holds: bool
    f0_certificate: Optional[tuple[float, float, float]]  # (c1, c2, gamma)
    f1_holds: bool
    f1_witness: Optional[float]
    f2_holds: bool
    f2_witness: Optional[float]
    coercivity_exponent_ok: bool
    nonexistence_holds: bool
    sample_range: tuple[float, float]
    sample_count: int
    dimension: int = 3
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def tup(x):
            return None if x is None else [float(v) for v in x]

        return {
            "dimension_N": self.dimension,
            "fp_holds": self.fp_holds,
            "fp_exponents": tup(self.fp_exponents),
            "fp_constants": tup(self.fp_constants),
            "fp_prime_holds": self.fp_prime_holds,
            "fp_prime_constants": tup(self.fp_prime_constants),
            "f0_holds": self.f0_holds,
            "f0_certificate": tup(self.f0_certificate),
            "f1_holds": self.f1_holds,
            "f1_witness": self.f1_witness,
            "f2_holds": self.f2_holds,
            "f2_witness": self.f2_witness,
            "coercivity_exponent_ok": self.coercivity_exponent_ok,
            "nonexistence_holds": self.nonexistence_holds,
            "sample_range": tup(self.sample_range),
            "sample_count": self.sample_count,
            "notes": list(self.notes),
        }


def sample_points(s_max: float, samples: int) -> np.ndarray:
    """Half log-spaced from 1e-7*s_max, half uniform, merged and sorted."""
    n_log = samples // 2
    pts = np.concatenate([
        np.geomspace(1e-7 * s_max, s_max, n_log),
        np.linspace(s_max / (samples - n_log), s_max, samples - n_log),
    ])
    return np.unique(pts)


def _tail_exponent_of_negative_part(pot: PotentialSpec) -> Optional[float]:
    """Growth exponent of max(-F, 0) as s -> infinity, None if F -> +inf or F = 0."""
    fam = pot.family
    if fam is Family.ZERO:
        return None
    if fam is Family.POWER_SUM:
        c_lead, e_lead = max(pot.coefficients, key=lambda t: t[1])
        lead = sum(c for c, e in pot.coefficients if e == e_lead)
        if lead > 0:
            return None
        return e_lead
    if fam is Family.PURE_POWER:
        return None if pot.power_sign > 0 else pot.power_exponent
    return pot.p


def _small_s_term(pot: PotentialSpec) -> Optional[tuple[float, float]]:
    """(coefficient, exponent) of the dominant term of F as s -> 0, None for F = 0."""
    fam = pot.family
    if fam is Family.ZERO:
        return None
    if fam is Family.POWER_SUM:
        sums: dict[float, float] = {}
        for c, e in pot.coefficients:
            sums[e] = sums.get(e, 0.0) + c
        live = sorted((e, c) for e, c in sums.items() if c != 0.0)
        return (live[0][1], live[0][0]) if live else None
    if fam is Family.PURE_POWER:
        return pot.power_sign / pot.power_exponent, pot.power_exponent
    return -1.0, pot.q


def _growth_constants(values: np.ndarray, s: np.ndarray, lo: float, hi: float) -> tuple[float, float]:
    """Smallest c with |values| <= c (s^lo + s^hi) on the samples, as (c, c)."""
    ratio = np.abs(values) / (s ** lo + s ** hi)
    c = float(ratio.max()) * (1.0 + 1e-9)
    return c, c


def check_hypotheses(pot: PotentialSpec, s_max: float = 10.0, samples: int = 10_000,
                     small_s: float = 0.1) -> HypothesisReport:
    """Decide the growth/sign hypotheses on F.

    Exponent conditions are read off the declared exponents; inequality
    conditions are decided on a dense sample of ``(0, s_max]``.  A negative
    answer means "not detected on the sampled range", never a proof.
    """
    if not (s_max > 0 and math.isfinite(s_max)):
        raise ValueError(f"s_max must be positive, got {s_max}")
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    N = pot.dimension
    crit = critical_exponent(N)
    sub = subcritical_exponent(N)
    for e in pot.exponents:
        if not 2.0 < e < crit:
            raise PotentialError(f"exponent {e} outside (2, 2*)")

    s = sample_points(s_max, samples)
    F = evaluate(pot, s, 0)
    dF = evaluate(pot, s, 1)
    d2F = evaluate(pot, s, 2)
    notes = []

    # (F_p) and its second-derivative variant
    exps = pot.exponents
    if exps:
        lo, hi = min(exps), max(exps)
        fp_exps = (lo, hi)
        fp_holds = 2.0 < lo <= hi < crit
        fp_c = _growth_constants(dF, s, lo - 1, hi - 1)
        fpp_c = _growth_constants(d2F, s, lo - 2, hi - 2)
    else:
        fp_exps, fp_holds, fp_c, fpp_c = None, True, (0.0, 0.0), (0.0, 0.0)

    # (F_0): smallest admissible gamma among 2 and the declared exponents
    tail = _tail_exponent_of_negative_part(pot)
    f0_cert = None
    for gamma in sorted({2.0, *[e for e in exps if e < sub]}):
        if tail is not None and tail > gamma:
            continue
        c = float(np.max(np.maximum(-F, 0.0) / (s ** 2 + s ** gamma))) * (1.0 + 1e-9)
        f0_cert = (c, c, gamma)
        break
    f0_holds = f0_cert is not None
    coercive = f0_holds and f0_cert[2] < sub

    # (F_1): refine the sampled minimum of F
    f1_witness = None
    k = int(np.argmin(F))
    if F[k] < 0:
        a = s[max(k - 1, 0)]
        b = s[min(k + 1, len(s) - 1)]
        res = minimize_scalar(lambda x: float(evaluate(pot, x, 0)), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        f1_witness = float(res.x) if res.fun <= F[k] else float(s[k])
    f1_holds = f1_witness is not None

    # (F_2): F(s) < -s^(2+eps) near 0 for some eps in (0, 4/N).  The window of
    # admissible eps comes from the leading small-s term c s^e0 (need c < 0 and
    # eps > e0 - 2); its midpoint is then checked on the samples of (0, cut],
    # shrinking cut by decades while at least 5 samples remain.
    f2_witness = None
    lead = _small_s_term(pot)
    if lead is not None and lead[0] < 0 and lead[1] - 2.0 < 4.0 / N:
        eps = 0.5 * (max(lead[1] - 2.0, 0.0) + 4.0 / N)
        cut = min(small_s, s_max)
        while np.count_nonzero(s <= cut) >= 5:
            small = s[s <= cut]
            if np.all(evaluate(pot, small, 0) < -small ** (2.0 + eps)):
                f2_witness = float(eps)
                if cut < small_s:
                    notes.append(f"(F2) verified on (0, {cut:.3g}] only")
                break
            cut /= 10.0
    f2_holds = f2_witness is not None
    if f2_holds and not f1_holds:
        f1_witness = float(s[np.argmin(F)])
        f1_holds = True

    # nonexistence: 0 <= 2F(s) <= F'(s) s
    tol = 1e-12 * np.maximum(np.abs(dF * s), 1e-300)
    nonex = bool(np.all(F >= 0.0) and np.all(2.0 * F <= dF * s + tol))
    if nonex:
        notes.append("0 <= 2F <= F's on the sampled range: no nontrivial solution expected")

    return HypothesisReport(
        fp_holds=fp_holds, fp_exponents=fp_exps, fp_constants=fp_c,
        fp_prime_holds=fp_holds, fp_prime_constants=fpp_c,
        f0_holds=f0_holds, f0_certificate=f0_cert,
        f1_holds=f1_holds, f1_witness=f1_witness,
        f2_holds=f2_holds, f2_witness=f2_witness,
        coercivity_exponent_ok=coercive, nonexistence_holds=nonex,
        sample_range=(float(s[0]), float(s[-1])), sample_count=int(len(s)),
        dimension=N, notes=notes,
    )


def coercivity_power(gamma: float, N: int) -> float:
    """Exponent gamma*N/2 - N of the gradient norm in the lower bound for J."""
    return gamma * N / 2.0 - N


def plateau_threshold(pot: PotentialSpec, grid, s0: float, R_start: float = 1.0,
                      factor: float = 2.0 ** 0.25) -> float:
    """Smallest R on a geometric sweep with J(plateau(s0, R)) < 0, inf if none fits."""
    if pot.dimension != grid.N:
        raise ValueError("potential and grid dimensions differ")
    if not evaluate(pot, s0, 0) < 0:
        raise PreconditionError(f"need F(s0) < 0, got F({s0}) = {evaluate(pot, s0, 0)}")
    from .functionals import energy_J
    from .minimizer import make_plateau

    R = R_start
    while R + 1.0 < grid.r_max:
        if energy_J(grid, pot, make_plateau(grid, s0, R)) < 0:
            return R
        R *= factor
    return math.inf
