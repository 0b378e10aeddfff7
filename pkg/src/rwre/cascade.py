"""Multiplicative cascades, the population martingale W, the harmonic
coordinate S, the walk martingale M_t with its quadratic variation, and the
diffusivity constants eta = E[W^2] and sigma^2 = E[G]/eta^2.

All W/S machinery requires a critical law: every identity here assumes the
mean total mark equals one.  W estimates are truncated at a configurable
relative depth; they are unbiased for the martingale limit at any truncation,
and one probe costs on the order of (mean offspring)^depth expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotCriticalError, TreeMismatchError, WrongDriftSignError
from .laws import DEFAULT_TOL_CRIT, MarkLaw
from .trees import (
    MarkedTree,
    RayedTree,
    generate_imt,
    generate_mt,
    level_ids,
    require_depth,
)
from .walk import Trajectory, run_walk

DEFAULT_W_DEPTH = 20


def _require_critical(law: MarkLaw, tol: float = DEFAULT_TOL_CRIT) -> None:
    r1 = law.rho_exact(1.0)
    if abs(r1 - 1.0) > tol:
        raise NotCriticalError(f"E[sum marks] = {r1!r}, not critical")


@dataclass
class CascadeSeries:
    """Level sums Y_n = sum over level n of C_x^alpha, n = 0..depth."""

    alpha: float
    values: list[float]
    normalized: list[float] | None


def cascade(tree: MarkedTree, alpha: float, depth: int,
            rho_alpha: float | None = None) -> CascadeSeries:
    """Exact level sums of C^alpha; normalized by rho(alpha)^n when available."""
    require_depth(tree, depth)
    cum = tree.cum
    values = [
        math.fsum(cum[v] ** alpha for v in level_ids(tree, n))
        for n in range(depth + 1)
    ]
    if rho_alpha is None and tree.law.is_finite_support:
        rho_alpha = tree.law.rho_exact(alpha)
    normalized = None
    if rho_alpha is not None:
        normalized = [y / rho_alpha ** n for n, y in enumerate(values)]
    return CascadeSeries(alpha=alpha, values=values, normalized=normalized)


def w_estimate(tree: MarkedTree, vertex: int, n_w: int = DEFAULT_W_DEPTH) -> float:
    """Truncated population martingale at ``vertex``: the total relative mark
    weight of its descendants ``n_w`` levels down (1.0 when n_w = 0)."""
    _require_critical(tree.law)
    if n_w == 0:
        return 1.0
    cur = [vertex]
    for _ in range(n_w):
        nxt = []
        for u in cur:
            if tree.n_children[u] < 0:
                tree.expand(u)
            nxt.extend(tree.children(u))
        cur = nxt
        if not cur:
            return 0.0
    cum = tree.cum
    return math.fsum(cum[x] for x in cur) / tree.cum[vertex]


class HarmonicFrame:
    """Memoized W and S values over one tree.

    S(root) = 0 and S(child) = S(parent) + W(child) everywhere, which on a
    rayed tree makes S decrease along the ray by the W of each vertex left
    behind.  S_ray sums W along the geodesic from a vertex to the ray, and
    w_star is the off-ray part of a ray vertex's W.
    """

    def __init__(self, tree: MarkedTree, n_w: int = DEFAULT_W_DEPTH):
        _require_critical(tree.law)
        self.tree = tree
        self.n_w = n_w
        self._w: dict[tuple[int, int], float] = {}
        self._s: dict[int, float] = {tree.root: 0.0}

    def w(self, v: int, depth: int | None = None) -> float:
        """Truncated W at v (memoized)."""
        k = self.n_w if depth is None else depth
        if k == 0:
            return 1.0
        key = (v, k)
        got = self._w.get(key)
        if got is not None:
            return got
        tree = self.tree
        if tree.n_children[v] < 0:
            tree.expand(v)
        mark = tree.mark
        val = math.fsum(mark[c] * self.w(c, k - 1) for c in tree.children(v))
        self._w[key] = val
        return val

    def _ray_s(self, u: int) -> float:
        """S at ray vertex v_k: S(v_k) = -(W(v_0) + ... + W(v_{k-1}))."""
        tree = self.tree
        k = -tree.level[u]  # ray vertex v_k sits at horocycle -k
        acc = 0.0
        for j in range(k):
            nxt = tree.ray[j + 1]
            known = self._s.get(nxt)
            if known is not None:
                acc = known
            else:
                acc = self._s[tree.ray[j]] - self.w(tree.ray[j])
                self._s[nxt] = acc
        return self._s[u]

    def s(self, v: int) -> float:
        """Harmonic coordinate: S(root) = 0 and S(child) = S(parent) + W(child)."""
        got = self._s.get(v)
        if got is not None:
            return got
        tree = self.tree
        rayed = isinstance(tree, RayedTree)
        chain = []
        u = v
        while u not in self._s:
            if rayed and tree.on_ray(u):
                self._s[u] = self._ray_s(u)
                break
            chain.append(u)
            p = tree.parent[u]
            if p < 0:
                raise TreeMismatchError(f"vertex {u} has no path to a known S value")
            u = p
        acc = self._s[u]
        for w_vtx in reversed(chain):
            acc = acc + self.w(w_vtx)
            self._s[w_vtx] = acc
        return acc

    def s_ray(self, v: int) -> float:
        """Sum of W along the off-ray geodesic from v down to the ray."""
        tree = self.tree
        if not isinstance(tree, RayedTree):
            raise TreeMismatchError("s_ray needs a rayed tree")
        acc = 0.0
        u = v
        while not tree.on_ray(u):
            acc += self.w(u)
            u = tree.parent[u]
        return acc

    def w_star(self, ray_index: int) -> float:
        """Off-ray part of W at ray vertex v_j: sum over fresh children of A*W."""
        tree = self.tree
        if not isinstance(tree, RayedTree):
            raise TreeMismatchError("w_star needs a rayed tree")
        while ray_index >= len(tree.ray):
            tree.extend_ray()
        v = tree.ray[ray_index]
        mark = tree.mark
        rc = tree.ray_child[v]
        return math.fsum(
            mark[c] * self.w(c, self.n_w - 1) for c in tree.children(v) if c != rc
        )

    def g(self, v: int) -> float:
        """Conditional squared martingale increment at v:
        omega(v, parent) W_v^2 + sum_children omega(v, child) W_child^2."""
        tree = self.tree
        if tree.n_children[v] < 0:
            tree.expand(v)
        p = tree.parent[v]
        if p < 0 and isinstance(tree, RayedTree):
            tree.extend_ray()
            p = tree.parent[v]
        s = tree.sum_marks[v]
        mark = tree.mark
        kids_term = math.fsum(mark[c] * self.w(c) ** 2 for c in tree.children(v))
        if p < 0:
            # reflected plain-tree root: no parent mass
            return kids_term / s if s > 0.0 else 0.0
        return (self.w(v) ** 2 + kids_term) / (1.0 + s)


def harmonic_frame(tree: MarkedTree, n_w: int = DEFAULT_W_DEPTH) -> HarmonicFrame:
    """Build a lazily-filled W/S frame over the tree."""
    return HarmonicFrame(tree, n_w)


def martingale_series(traj: Trajectory, frame: HarmonicFrame
                      ) -> tuple[list[float], list[float]]:
    """(M_t, V_t): M_t = S(X_t); V_t = running mean of G along the path."""
    if traj.tree is not frame.tree:
        raise TreeMismatchError("trajectory and frame belong to different trees")
    m_series = [frame.s(v) for v in traj.vertices]
    g_vals = [frame.g(v) for v in traj.vertices[:-1]]
    v_series = list(np.cumsum(g_vals) / np.arange(1, len(g_vals) + 1)) if g_vals else []
    return m_series, v_series


@dataclass
class MomentEstimate:
    value: float
    se: float


def estimate_eta(law: MarkLaw, replicas: int, n_w: int,
                 rng: np.random.Generator) -> MomentEstimate:
    """eta = E[W^2], sampled as the squared truncated root martingale over
    independent trees."""
    _require_critical(law)
    vals = np.empty(replicas)
    for j in range(replicas):
        t = generate_mt(law, n_w, rng)
        y = _partial_y(t, n_w)
        vals[j] = y * y
    return MomentEstimate(float(vals.mean()),
                          float(vals.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0)


def _partial_y(tree: MarkedTree, n: int) -> float:
    cum = tree.cum
    return math.fsum(cum[v] for v in level_ids(tree, n))


@dataclass
class Sigma2Estimate:
    sigma2: float
    se: float
    eta: float
    eta_se: float
    g_mean: float
    g_se: float
    method: str


def require_diffusive(law: MarkLaw) -> None:
    """Gate for the diffusive formulas: critical with negative drift, or the
    degenerate unit-total-mark law (a plain simple random walk)."""
    _require_critical(law)
    if law.sum_marks_identically_one():
        return
    if law.rho_prime_exact(1.0) >= -1e-12:
        raise WrongDriftSignError("sigma^2 requires rho'(1) < 0")


_check_drift = require_diffusive


def estimate_sigma2(law: MarkLaw, replicas: int, walk_steps: int, n_w: int,
                    rng: np.random.Generator, method: str = "root",
                    eta_replicas: int | None = None) -> Sigma2Estimate:
    """sigma^2 from E[G] = sigma^2 eta^2.

    method="root": average G at the root of fresh rayed environments.
    method="particle": time-average G along one walk (the environment seen
    from the particle), batched for the standard error.  Both share the same
    truncation depth so the leading truncation bias cancels in the ratio.
    """
    _check_drift(law)
    eta_replicas = replicas if eta_replicas is None else eta_replicas
    eta_est = estimate_eta(law, eta_replicas, n_w, rng)
    if method == "root":
        g_vals = np.empty(replicas)
        for j in range(replicas):
            t = generate_imt(law, 1, 0, rng)
            frame = HarmonicFrame(t, n_w)
            g_vals[j] = frame.g(t.root)
        g_mean = float(g_vals.mean())
        g_se = float(g_vals.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    elif method == "particle":
        t = generate_imt(law, 4, 0, rng)
        frame = HarmonicFrame(t, n_w)
        traj = run_walk(t, None, walk_steps, rng)
        g_vals = np.array([frame.g(v) for v in traj.vertices[:-1]])
        g_mean = float(g_vals.mean())
        nb = max(2, int(math.sqrt(len(g_vals))))
        batches = np.array_split(g_vals, nb)
        bm = np.array([b.mean() for b in batches])
        g_se = float(bm.std(ddof=1) / math.sqrt(nb))
    else:
        raise ValueError(f"unknown method {method!r}")
    eta = eta_est.value
    sigma2 = g_mean / (eta * eta)
    se = math.sqrt(
        (g_se / (eta * eta)) ** 2 + (2.0 * g_mean / eta ** 3 * eta_est.se) ** 2
    )
    return Sigma2Estimate(sigma2=sigma2, se=se, eta=eta, eta_se=eta_est.se,
                          g_mean=g_mean, g_se=g_se, method=method)
