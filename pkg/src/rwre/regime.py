"""Recurrence/transience classification from the convex mark-moment function.

rho(alpha) = E[sum of mark^alpha] is evaluated exactly on finite-support laws
and by Monte Carlo (with a frozen sample, so the function handed to the
optimizer is deterministic) on parametric laws.  The infimum of rho over
[0, 1], the drift rho'(1), and the crossing exponent kappa feed a sharp
decision table; Monte Carlo laws whose error bars straddle a boundary raise
Inconclusive instead of guessing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InconclusiveError, NonFiniteError
from .laws import DEFAULT_TOL_CRIT, MarkLaw

DEFAULT_MC_DRAWS = 200_000
DEFAULT_T_MAX = 64.0
_ALPHA_TOL = 1e-10
_ZERO_TOL = 1e-12


class Classification(enum.Enum):
    POSITIVE_RECURRENT = "PositiveRecurrent"
    RECURRENT_NULL_SUBCRITICAL = "RecurrentNull_SubCritical"
    CRITICAL_NULL_NEG_DRIFT = "CriticalNull_NegDrift"
    CRITICAL_NULL_ZERO_DRIFT = "CriticalNull_ZeroDrift"
    CRITICAL_POSITIVE_POS_DRIFT = "CriticalPositive_PosDrift"
    TRANSIENT = "Transient"
    UNBIASED_NULL_RECURRENT = "UnbiasedNullRecurrent"


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float = 0.0

    def __float__(self) -> float:
        return self.value


class RhoEvaluator:
    """Evaluates rho and rho' exactly (finite support) or on a frozen sample."""

    def __init__(self, law: MarkLaw, rng: np.random.Generator | None = None,
                 draws: int = DEFAULT_MC_DRAWS):
        self.law = law
        self.exact = law.is_finite_support
        self.draws = 0 if self.exact else draws
        if not self.exact:
            if rng is None:
                raise ValueError("parametric laws need an rng for Monte Carlo evaluation")
            counts, marks = law.sample_many(draws, rng)
            self._marks = np.asarray(marks)
            self._log_marks = np.log(self._marks)
            cum = np.cumsum(counts)
            self._seg = np.concatenate(([0], cum[:-1]))
            self._counts = counts
            self._n = draws

    def _per_litter(self, terms: np.ndarray) -> np.ndarray:
        if len(terms) == 0:
            return np.zeros(self._n)
        seg = np.minimum(self._seg, len(terms) - 1)
        vals = np.add.reduceat(terms, seg)
        vals[self._counts == 0] = 0.0
        return vals

    def rho(self, alpha: float) -> Estimate:
        if self.exact:
            v = self.law.rho_exact(alpha)
            if not math.isfinite(v):
                raise NonFiniteError(f"rho({alpha}) is not finite")
            return Estimate(v)
        vals = self._per_litter(self._marks ** alpha)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(self._n)))

    def rho_prime(self, alpha: float) -> Estimate:
        if self.exact:
            v = self.law.rho_prime_exact(alpha)
            if not math.isfinite(v):
                raise NonFiniteError(f"rho'({alpha}) is not finite")
            return Estimate(v)
        vals = self._per_litter(self._marks ** alpha * self._log_marks)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(self._n)))


def rho(law: MarkLaw, alpha: float, rng: np.random.Generator | None = None,
        draws: int = DEFAULT_MC_DRAWS) -> Estimate:
    """E[sum of mark^alpha]; exact (se = 0) for finite support, else MC mean +- SE."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return RhoEvaluator(law, rng, draws).rho(alpha)


def rho_prime(law: MarkLaw, alpha: float, rng: np.random.Generator | None = None,
              draws: int = DEFAULT_MC_DRAWS) -> Estimate:
    """d rho / d alpha = E[sum mark^alpha log(mark)]."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return RhoEvaluator(law, rng, draws).rho_prime(alpha)


def _golden_min(f, lo: float, hi: float, tol: float = _ALPHA_TOL) -> float:
    """Golden-section argmin of a convex scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def infimum_rho(law_or_ev, rng: np.random.Generator | None = None,
                draws: int = DEFAULT_MC_DRAWS) -> tuple[Estimate, float]:
    """(p, alpha_star): the minimum of rho over [0, 1] and its argmin.

    Boundary argmins are reported exactly; a constant rho reports
    alpha_star = 0 (tie rule).
    """
    ev = law_or_ev if isinstance(law_or_ev, RhoEvaluator) else RhoEvaluator(law_or_ev, rng, draws)
    a_star = _golden_min(lambda a: ev.rho(a).value, 0.0, 1.0)
    candidates = [0.0, 1.0, a_star]
    vals = [ev.rho(a) for a in candidates]
    pmin = min(v.value for v in vals)
    scale = max(1.0, abs(pmin))
    for a, v in zip(candidates, vals):
        if v.value <= pmin + _ZERO_TOL * scale:
            return v, a
    return vals[-1], a_star  # unreachable


def kappa(law_or_ev, rng: np.random.Generator | None = None,
          draws: int = DEFAULT_MC_DRAWS, t_max: float = DEFAULT_T_MAX) -> float:
    """The crossing exponent: the root of rho(t) = 1 on (1, t_max].

    Returns the bisected root when rho crosses 1, +infinity when rho stays
    at or below 1 up to t_max with rho'(t_max) <= 0 (convexity certificate),
    and 1 when rho exceeds 1 on all of (1, t_max].
    """
    ev = law_or_ev if isinstance(law_or_ev, RhoEvaluator) else RhoEvaluator(law_or_ev, rng, draws)

    def g(t: float) -> float:
        return ev.rho(t).value - 1.0

    def g_se(t: float) -> float:
        return ev.rho(t).se

    def check_conclusive(t: float, val: float) -> None:
        if not ev.exact and abs(val) <= 3.0 * g_se(t):
            raise InconclusiveError(
                f"rho({t}) = {1.0 + val} within 3 SE of 1; kappa undecidable"
            )

    t_lo = 1.0
    t_hi = t_max
    t_min = _golden_min(g, t_lo, t_hi)
    g_min = min(g(t_min), g(1.0), g(t_hi))
    if g_min > _ZERO_TOL:
        check_conclusive(t_min, g_min)
        return 1.0  # rho > 1 on all of (1, t_max]
    g1 = g(1.0)
    if g1 > _ZERO_TOL:
        check_conclusive(1.0, g1)
        # downward crossing between 1 and the argmin
        return _bisect(g, 1.0, t_min)
    ge = g(t_hi)
    if ge > _ZERO_TOL:
        check_conclusive(t_hi, ge)
        return _bisect(g, max(t_min, 1.0), t_hi)
    # no crossing within the horizon
    slope_end = ev.rho_prime(t_hi).value
    if slope_end <= _ZERO_TOL:
        return math.inf
    # convex and rising at the horizon: the crossing exists beyond it
    hi = t_hi
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 2.0 ** 20:
            return math.inf
    return _bisect(g, t_hi, hi)


def _bisect(g, lo: float, hi: float, tol: float = _ALPHA_TOL) -> float:
    glo = g(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0.0) == (glo > 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class RegimeReport:
    """Classification of the walk regime from the mark law."""

    rho_one: float
    rho_prime_one: float
    p: float
    alpha_star: float
    kappa: float
    classification: Classification
    method: str  # "exact" | "monte_carlo"
    draws: int = 0
    std_errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho_one": self.rho_one,
            "rho_prime_one": self.rho_prime_one,
            "p": self.p,
            "alpha_star": self.alpha_star,
            "kappa": "inf" if math.isinf(self.kappa) else self.kappa,
            "classification": self.classification.value,
            "method": self.method,
            "draws": self.draws,
            "std_errors": self.std_errors,
            "diagnostics": self.diagnostics,
        }


def classify(law: MarkLaw, rng: np.random.Generator | None = None,
             draws: int = DEFAULT_MC_DRAWS, tol_crit: float = DEFAULT_TOL_CRIT,
             t_max: float = DEFAULT_T_MAX) -> RegimeReport:
    """Apply the regime decision table.

    p > 1: transient.  p < 1: positive recurrent.  p = 1: the sign of rho'(1)
    splits null recurrence (negative or zero drift) from positive recurrence
    (positive drift, minimum attained at an interior alpha).  The degenerate
    unit-total-mark law is reported separately: the depth process is then an
    unbiased simple random walk.
    """
    ev = RhoEvaluator(law, rng, draws)
    r1 = ev.rho(1.0)
    rp1 = ev.rho_prime(1.0)
    p_est, alpha_star = infimum_rho(ev)
    kap = kappa(ev, t_max=t_max)

    def against(est: Estimate, target: float) -> int:
        """-1/0/+1 comparison with the criticality tolerance or 3 SE."""
        d = est.value - target
        tol = tol_crit if ev.exact else 3.0 * est.se
        if abs(d) <= tol:
            if not ev.exact:
                raise InconclusiveError(
                    f"estimate {est.value} within 3 SE of boundary {target}"
                )
            return 0
        return -1 if d < 0 else 1

    # A unit total mark at every litter forces rho'(1) <= 0 with equality only
    # for the all-ones law, whose depth process is an unbiased simple walk;
    # other unit-mass laws still classify through the table.
    degenerate = law.sum_marks_identically_one()
    side = against(p_est, 1.0)
    if side > 0:
        cls = Classification.TRANSIENT
    elif side < 0:
        cls = Classification.POSITIVE_RECURRENT
    else:
        drift = against(rp1, 0.0)
        if drift < 0:
            cls = Classification.CRITICAL_NULL_NEG_DRIFT
        elif drift == 0:
            cls = (Classification.UNBIASED_NULL_RECURRENT if degenerate
                   else Classification.CRITICAL_NULL_ZERO_DRIFT)
        else:
            cls = Classification.CRITICAL_POSITIVE_POS_DRIFT

    r_star = ev.rho(alpha_star).value
    rp_star = ev.rho_prime(alpha_star).value
    h2_biggins = alpha_star * rp_star / r_star < math.log(r_star) if r_star > 0 else None
    diagnostics = {
        "degenerate_unit_mass": degenerate,
        "h2_biggins": h2_biggins,
        "h2_moment": True if getattr(law, "max_offspring", None) is not None else None,
        "mean_offspring": law.mean_offspring,
    }
    std_errors = {}
    if not ev.exact:
        std_errors = {"rho_one": r1.se, "rho_prime_one": rp1.se, "p": p_est.se}
    return RegimeReport(
        rho_one=r1.value,
        rho_prime_one=rp1.value,
        p=p_est.value,
        alpha_star=alpha_star,
        kappa=kap,
        classification=cls,
        method="exact" if ev.exact else "monte_carlo",
        draws=ev.draws,
        std_errors=std_errors,
        diagnostics=diagnostics,
    )
