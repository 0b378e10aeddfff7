"""Mark distributions: the offspring/mark law q, its size-biased version, and the root mixture.

A law describes the joint draw (number of children, positive marks on the
children) attached independently to every vertex of a marked tree.  Laws come
in two flavours: finite support (an explicit list of atoms) and parametric
(a named offspring sampler combined with a named mark sampler).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ConfigError, NotCriticalError, UnboundedDensityError

DEFAULT_TOL_CRIT = 1e-9
_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Atom:
    """One finite-support outcome: ``n_children`` children carrying ``marks``."""

    prob: float
    n_children: int
    marks: tuple[float, ...]

    def __post_init__(self):
        if not (0.0 < self.prob <= 1.0):
            raise ConfigError(f"atom probability {self.prob} outside (0, 1]")
        if self.n_children < 0:
            raise ConfigError("negative child count")
        if len(self.marks) != self.n_children:
            raise ConfigError(
                f"atom lists {len(self.marks)} marks for {self.n_children} children"
            )
        if any(m <= 0.0 for m in self.marks):
            raise ConfigError("marks must be strictly positive")

    @property
    def sum_marks(self) -> float:
        return float(sum(self.marks))


@dataclass(frozen=True)
class FiniteSupportLaw:
    """Law supported on finitely many (count, marks) atoms."""

    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise ConfigError("finite-support law needs at least one atom")
        total = math.fsum(a.prob for a in self.atoms)
        if abs(total - 1.0) > _PROB_TOL:
            raise ConfigError(f"atom probabilities sum to {total!r}, not 1")

    # -- cached sampling tables ------------------------------------------------

    @cached_property
    def _probs(self) -> np.ndarray:
        return np.array([a.prob for a in self.atoms])

    @cached_property
    def _cum_probs(self) -> np.ndarray:
        c = np.cumsum(self._probs)
        c[-1] = 1.0
        return c

    @cached_property
    def _counts(self) -> np.ndarray:
        return np.array([a.n_children for a in self.atoms], dtype=np.int64)

    @cached_property
    def _marks_flat(self) -> np.ndarray:
        return np.array([m for a in self.atoms for m in a.marks])

    @cached_property
    def _offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self._counts)))

    @cached_property
    def _atom_marks(self) -> list[tuple[float, ...]]:
        return [a.marks for a in self.atoms]

    # -- queries ---------------------------------------------------------------

    @property
    def is_finite_support(self) -> bool:
        return True

    @property
    def max_offspring(self) -> int:
        return int(self._counts.max())

    @property
    def mean_offspring(self) -> float:
        return float(self._probs @ self._counts)

    def atom_sum_marks(self) -> np.ndarray:
        """Per-atom total mark weight."""
        return np.array([a.sum_marks for a in self.atoms])

    def sum_marks_identically_one(self, tol: float = _PROB_TOL) -> bool:
        return all(abs(a.sum_marks - 1.0) <= tol for a in self.atoms)

    def rho_exact(self, alpha: float) -> float:
        """E[sum of mark^alpha], evaluated exactly."""
        return math.fsum(a.prob * sum(m ** alpha for m in a.marks) for a in self.atoms)

    def rho_prime_exact(self, alpha: float) -> float:
        """d/dalpha of rho: E[sum mark^alpha * log(mark)]."""
        return math.fsum(
            a.prob * sum(m ** alpha * math.log(m) for m in a.marks) for a in self.atoms
        )

    # -- sampling ---------------------------------------------------------------

    def sample_atom_index(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cum_probs, rng.random(), side="right"))

    def sample(self, rng: np.random.Generator) -> tuple[int, tuple[float, ...]]:
        a = self.atoms[self.sample_atom_index(rng)]
        return a.n_children, a.marks

    def sample_many(self, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized draw of k outcomes: (counts, concatenated marks)."""
        idx = np.searchsorted(self._cum_probs, rng.random(k), side="right")
        counts = self._counts[idx]
        total = int(counts.sum())
        if total == 0:
            return counts, np.empty(0)
        cum = np.cumsum(counts)
        within = np.arange(total, dtype=np.int64) - np.repeat(cum - counts, counts)
        marks = self._marks_flat[np.repeat(self._offsets[idx], counts) + within]
        return counts, marks


# --------------------------------------------------------------------------
# Parametric laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OffspringSpec:
    """Offspring-count sampler: a fixed count or a finite categorical."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ConfigError("offspring values/probs mismatch")
        if any(v < 0 for v in self.values):
            raise ConfigError("negative offspring count")
        if abs(math.fsum(self.probs) - 1.0) > _PROB_TOL:
            raise ConfigError("offspring probabilities must sum to 1")

    @classmethod
    def fixed(cls, n: int) -> "OffspringSpec":
        return cls((int(n),), (1.0,))

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    @property
    def max_value(self) -> int:
        return max(self.values)

    @property
    def is_degenerate(self) -> bool:
        return len(self.values) == 1

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def sample(self, rng: np.random.Generator) -> int:
        return self.values[int(np.searchsorted(self._cum, rng.random(), side="right"))]

    def sample_many(self, k: int, rng: np.random.Generator) -> np.ndarray:
        vals = np.array(self.values, dtype=np.int64)
        return vals[np.searchsorted(self._cum, rng.random(k), side="right")]


@dataclass(frozen=True)
class MarkDistSpec:
    """Named mark sampler: uniform, log-uniform, or two-point."""

    kind: str  # "uniform" | "log_uniform" | "two_point"
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind in ("uniform", "log_uniform"):
            if len(self.params) != 2:
                raise ConfigError(f"{self.kind} needs (lo, hi)")
            lo, hi = self.params
            if not (0.0 < lo <= hi):
                raise ConfigError(f"{self.kind} needs 0 < lo <= hi")
        elif self.kind == "two_point":
            if len(self.params) != 3:
                raise ConfigError("two_point needs (a, b, p)")
            a, b, p = self.params
            if a <= 0 or b <= 0 or not (0.0 <= p <= 1.0):
                raise ConfigError("two_point needs positive values and p in [0,1]")
        else:
            raise ConfigError(f"unknown mark distribution {self.kind!r}")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "two_point":
            a, b, _ = self.params
            return min(a, b), max(a, b)
        return self.params[0], self.params[1]

    @property
    def is_degenerate(self) -> bool:
        lo, hi = self.support
        return lo == hi or (self.kind == "two_point" and self.params[2] in (0.0, 1.0))

    def point_value(self) -> float:
        """Single support point of a degenerate distribution."""
        if self.kind == "two_point":
            a, b, p = self.params
            if p == 0.0:
                return b
            return a
        return self.params[0]

    def moment(self, alpha: float) -> float:
        """E[A^alpha] in closed form."""
        if self.kind == "two_point":
            a, b, p = self.params
            return p * a ** alpha + (1 - p) * b ** alpha
        lo, hi = self.params
        if lo == hi:
            return lo ** alpha
        if self.kind == "uniform":
            return (hi ** (alpha + 1) - lo ** (alpha + 1)) / ((hi - lo) * (alpha + 1))
        span = math.log(hi / lo)
        if alpha == 0.0:
            return 1.0
        return (hi ** alpha - lo ** alpha) / (alpha * span)

    def log_moment(self, alpha: float) -> float:
        """E[A^alpha * log A] in closed form."""
        if self.kind == "two_point":
            a, b, p = self.params
            return p * a ** alpha * math.log(a) + (1 - p) * b ** alpha * math.log(b)
        lo, hi = self.params
        if lo == hi:
            return lo ** alpha * math.log(lo)
        if self.kind == "uniform":
            c = alpha + 1

            def anti(x):
                return x ** c * (c * math.log(x) - 1.0) / (c * c)

            return (anti(hi) - anti(lo)) / (hi - lo)
        span = math.log(hi / lo)
        if alpha == 0.0:
            return (math.log(hi) + math.log(lo)) / 2.0

        def anti_lu(x):
            return x ** alpha * (alpha * math.log(x) - 1.0) / (alpha * alpha)

        return (anti_lu(hi) - anti_lu(lo)) / span

    def sample_many(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, size=k)
        if self.kind == "log_uniform":
            lo, hi = self.params
            return np.exp(rng.uniform(math.log(lo), math.log(hi), size=k))
        a, b, p = self.params
        return np.where(rng.random(k) < p, a, b)


@dataclass(frozen=True)
class ParametricLaw:
    """Law with a named offspring sampler and i.i.d. or sibling-shared marks.

    ``mark_mode`` is "independent" (each child gets its own mark) or "shared"
    (every child of a vertex carries the same freshly drawn mark).  Marks must
    live inside the ellipticity window [eps0, 1/eps0].
    """

    offspring: OffspringSpec
    mark_mode: str
    marks: MarkDistSpec
    eps0: float
    n_max: int | None = None

    def __post_init__(self):
        if self.mark_mode not in ("independent", "shared"):
            raise ConfigError(f"unknown mark mode {self.mark_mode!r}")
        if not (0.0 < self.eps0 <= 1.0):
            raise ConfigError("eps0 must lie in (0, 1]")
        lo, hi = self.marks.support
        if lo < self.eps0 - 1e-15 or hi > 1.0 / self.eps0 + 1e-15:
            raise ConfigError(
                f"mark support [{lo}, {hi}] escapes the ellipticity window "
                f"[{self.eps0}, {1.0 / self.eps0}]"
            )

    @property
    def is_finite_support(self) -> bool:
        return False

    @property
    def max_offspring(self) -> int | None:
        if self.n_max is not None:
            return self.n_max
        return self.offspring.max_value

    @property
    def mean_offspring(self) -> float:
        return self.offspring.mean

    def sum_marks_identically_one(self, tol: float = _PROB_TOL) -> bool:
        if not (self.offspring.is_degenerate and self.marks.is_degenerate):
            return False
        n = self.offspring.values[0]
        return abs(n * self.marks.point_value() - 1.0) <= tol

    def rho_exact(self, alpha: float) -> float:
        # marks are independent of the count in both modes, so the mean factorizes
        return self.offspring.mean * self.marks.moment(alpha)

    def rho_prime_exact(self, alpha: float) -> float:
        return self.offspring.mean * self.marks.log_moment(alpha)

    def sample(self, rng: np.random.Generator) -> tuple[int, tuple[float, ...]]:
        n = self.offspring.sample(rng)
        if n == 0:
            return 0, ()
        if self.mark_mode == "shared":
            m = float(self.marks.sample_many(1, rng)[0])
            return n, (m,) * n
        return n, tuple(self.marks.sample_many(n, rng).tolist())

    def sample_many(self, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        counts = self.offspring.sample_many(k, rng)
        total = int(counts.sum())
        if total == 0:
            return counts, np.empty(0)
        if self.mark_mode == "shared":
            per_parent = self.marks.sample_many(k, rng)
            return counts, np.repeat(per_parent, counts)
        return counts, self.marks.sample_many(total, rng)


MarkLaw = Union[FiniteSupportLaw, ParametricLaw]


# --------------------------------------------------------------------------
# Size-biased law
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SizeBiasedLaw:
    """The law q reweighted by the total mark of the litter.

    Only defined at criticality (E[sum of marks] = 1).  Finite-support bases
    get exact reweighted atoms; parametric bases are sampled by rejection
    against the declared bound on the total mark.
    """

    base: MarkLaw
    atom_weights: tuple[float, ...] | None = None
    rejection_bound: float | None = None

    @cached_property
    def _cum_weights(self) -> np.ndarray | None:
        if self.atom_weights is None:
            return None
        c = np.cumsum(self.atom_weights)
        c[-1] = 1.0
        return c

    def sample(self, rng: np.random.Generator) -> tuple[int, tuple[float, ...]]:
        if self._cum_weights is not None:
            idx = int(np.searchsorted(self._cum_weights, rng.random(), side="right"))
            a = self.base.atoms[idx]
            return a.n_children, a.marks
        bound = self.rejection_bound
        while True:
            n, marks = self.base.sample(rng)
            s = sum(marks)
            if s > 0.0 and rng.random() * bound < s:
                return n, marks

    def sample_with_ray_child(
        self, rng: np.random.Generator
    ) -> tuple[int, tuple[float, ...], int]:
        """Draw a litter and pick one child with probability proportional to its mark."""
        n, marks = self.sample(rng)
        if n == 1:
            return n, marks, 0
        u = rng.random() * sum(marks)
        acc = 0.0
        for i, m in enumerate(marks):
            acc += m
            if u < acc:
                return n, marks, i
        return n, marks, n - 1


def size_bias(law: MarkLaw, tol_crit: float = DEFAULT_TOL_CRIT) -> SizeBiasedLaw:
    """Build the size-biased companion of ``law``; requires criticality.

    Raises NotCriticalError when E[sum of marks] differs from 1 beyond
    ``tol_crit``, and UnboundedDensityError when a parametric law has no
    usable offspring bound for rejection sampling.
    """
    rho_one = law.rho_exact(1.0)
    if abs(rho_one - 1.0) > tol_crit:
        raise NotCriticalError(
            f"size bias undefined: E[sum marks] = {rho_one!r} differs from 1"
        )
    if law.is_finite_support:
        raw = [a.prob * a.sum_marks for a in law.atoms]
        total = math.fsum(raw)
        weights = tuple(w / total for w in raw)
        return SizeBiasedLaw(base=law, atom_weights=weights)
    n_bound = law.max_offspring
    if n_bound is None:
        raise UnboundedDensityError(
            "parametric size bias needs a declared offspring bound (n_max)"
        )
    # sup(sum of marks) <= n_bound * sup(mark) <= n_bound / eps0
    bound = n_bound * min(law.marks.support[1], 1.0 / law.eps0)
    return SizeBiasedLaw(base=law, rejection_bound=bound)


def sample_root_mixture(
    law: MarkLaw, sb: SizeBiasedLaw, rng: np.random.Generator
) -> tuple[int, tuple[float, ...]]:
    """Draw from the even mixture of the base law and its size-biased version."""
    if rng.random() < 0.5:
        return law.sample(rng)
    return sb.sample(rng)


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


def law_from_config(cfg: dict) -> MarkLaw:
    """Build a law from a parsed config mapping.

    Finite form::

        kind = "finite"
        atoms = [[0.5, 2, [0.25, 0.25]], [0.5, 2, [0.75, 0.75]]]

    Parametric form::

        kind = "parametric"
        eps0 = 0.1
        n_max = 3                       # optional
        offspring = {fixed = 3}         # or {categorical = [[1, 0.5], [3, 0.5]]}
        marks = {mode = "shared", dist = "uniform", params = [0.25, 0.75]}
    """
    try:
        kind = cfg["kind"]
    except KeyError as exc:
        raise ConfigError("law config needs a 'kind' field") from exc
    if kind == "finite":
        try:
            atoms = tuple(
                Atom(prob=float(p), n_children=int(n), marks=tuple(float(m) for m in marks))
                for p, n, marks in cfg["atoms"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad finite-support atoms: {exc}") from exc
        return FiniteSupportLaw(atoms=atoms)
    if kind == "parametric":
        try:
            off_cfg = cfg["offspring"]
            if "fixed" in off_cfg:
                offspring = OffspringSpec.fixed(int(off_cfg["fixed"]))
            else:
                pairs = off_cfg["categorical"]
                offspring = OffspringSpec(
                    values=tuple(int(v) for v, _ in pairs),
                    probs=tuple(float(p) for _, p in pairs),
                )
            marks_cfg = cfg["marks"]
            dist = MarkDistSpec(
                kind=str(marks_cfg["dist"]),
                params=tuple(float(x) for x in marks_cfg["params"]),
            )
            mode = str(marks_cfg.get("mode", "independent"))
            return ParametricLaw(
                offspring=offspring,
                mark_mode=mode,
                marks=dist,
                eps0=float(cfg["eps0"]),
                n_max=int(cfg["n_max"]) if "n_max" in cfg else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad parametric law config: {exc}") from exc
    raise ConfigError(f"unknown law kind {kind!r}")


def load_law(path: str) -> MarkLaw:
    """Load a law config from a TOML or JSON file."""
    import json

    if path.endswith(".json"):
        with open(path, "rb") as fh:
            return law_from_config(json.load(fh))
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return law_from_config(tomllib.load(fh))
