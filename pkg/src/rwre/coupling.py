"""Excursion coupling between the plain-tree walk and a rayed-tree walk.

A plain-tree trajectory decomposes into excursions below the leaves of the
explored tree; the coupled construction replays those excursions verbatim
inside a fresh rayed environment, simulating only the bridging segments
between them.  Discrepancy functionals measure how little time and range the
two walks spend outside the shared excursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonExceededError
from .trees import MarkedTree, RayedTree, generate_imt
from .walk import Trajectory, step_once


@dataclass
class ExcursionDecomposition:
    """Stopping times and explored trees of a plain-tree walk.

    tau[i]/eta[i] are the i-th excursion's start and end (eta may be one
    shorter when the trajectory ends mid-excursion).  visited[i] lists the
    distinct vertices of excursion i in first-visit order; together with
    their offspring these form the explored tree T_i.
    """

    tree: MarkedTree
    traj: Trajectory
    tau: list[int]
    eta: list[int]
    visited: list[list[int]]

    @property
    def n_started(self) -> int:
        return len(self.tau)

    @property
    def n_completed(self) -> int:
        return len(self.eta)

    def excursion_length(self, i: int) -> int:
        return self.eta[i] - self.tau[i]

    def tree_size(self, i: int) -> int:
        """|T_i|: the excursion's visited vertices plus all their offspring.

        The final vertex of a trailing partial excursion may still be
        unexpanded (offspring unknown); it contributes no children here.
        """
        nch = self.tree.n_children
        return 1 + sum(max(nch[u], 0) for u in self.visited[i])

    def u_sizes(self) -> list[int]:
        """|U_0|, |U_1|, ...: cumulative explored-tree sizes (gluing identity)."""
        sizes = [1 + self.tree.n_children[self.tree.root]]
        for i in range(self.n_started):
            sizes.append(sizes[-1] + self.tree_size(i) - 1)
        return sizes


def decompose(tree: MarkedTree, traj: Trajectory) -> ExcursionDecomposition:
    """Split a root-started trajectory into explored-tree excursions."""
    verts = traj.vertices
    if not verts or verts[0] != tree.root:
        raise ValueError("decomposition needs a trajectory started at the root")
    nch = tree.n_children
    parent = tree.parent
    interior = {tree.root}
    tau: list[int] = []
    eta: list[int] = []
    visited: list[list[int]] = []
    cur: list[int] | None = None
    curset: set[int] = set()
    ret = -1
    for t, v in enumerate(verts):
        if cur is None:
            if v not in interior:
                tau.append(t)
                cur = [v]
                curset = {v}
                ret = parent[v]
        else:
            if v == ret:
                eta.append(t)
                for u in cur:
                    if nch[u] > 0:
                        interior.add(u)
                visited.append(cur)
                cur = None
            elif v not in curset:
                cur.append(v)
                curset.add(v)
    if cur is not None:
        visited.append(cur)
    return ExcursionDecomposition(tree=tree, traj=traj, tau=tau, eta=eta, visited=visited)


@dataclass
class CoupledPair:
    """A rayed environment and walk sharing the source walk's excursions."""

    decomp: ExcursionDecomposition
    tilde_tree: RayedTree
    tilde_path: list[int]
    tilde_tau: list[int]
    tilde_eta: list[int]
    n_glued: int = 0
    last_partial: bool = False
    budget_hit: bool = False
    _tilde_levels: list[int] = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> int:
        """Largest time t valid for both walks."""
        return min(self.decomp.traj.steps, len(self.tilde_path) - 1)

    def tilde_levels(self) -> list[int]:
        if len(self._tilde_levels) != len(self.tilde_path):
            lv = self.tilde_tree.level
            self._tilde_levels = [lv[v] for v in self.tilde_path]
        return self._tilde_levels


def _glue(tilde: RayedTree, tree: MarkedTree, visited: list[int], at: int) -> dict[int, int]:
    """Copy an explored tree into the rayed arena rooted at leaf ``at``.

    The glued vertex keeps its own mark and level; the copied tree supplies
    its offspring structure (marks included, also for unvisited offspring).
    """
    vmap = {visited[0]: at}
    mark = tree.mark
    for u in visited:
        if tree.n_children[u] < 0:
            continue  # trailing vertex of a partial excursion, offspring unknown
        tu = vmap[u]
        kids = tree.children(u)
        marks = [mark[c] for c in kids]
        ids = tilde._append_children(tu, marks)
        tilde.first_child[tu] = ids.start
        tilde.n_children[tu] = len(marks)
        tilde.sum_marks[tu] = tree.sum_marks[u]
        tilde._n_unexpanded -= 1
        for c, tc in zip(kids, ids):
            vmap[c] = tc
    return vmap


def build_coupled(
    decomp: ExcursionDecomposition,
    law,
    rng: np.random.Generator,
    max_steps: int | None = None,
) -> CoupledPair:
    """Build the coupled rayed walk: fresh bridging, copied excursions.

    The rayed walk starts at the root of a fresh rayed environment, walks on
    the explored part until it hits an unexplored leaf, receives the next
    source excursion there (identical path, identical length), steps back to
    the leaf's parent, and repeats.  Stops when the source excursions or the
    step budget run out; a trailing incomplete source excursion is copied and
    flagged.
    """
    tilde = generate_imt(law, 1, 0, rng)
    path = [tilde.root]
    tilde_tau: list[int] = []
    tilde_eta: list[int] = []
    budget = math.inf if max_steps is None else max_steps
    verts = decomp.traj.vertices
    pair = CoupledPair(decomp, tilde, path, tilde_tau, tilde_eta)
    pos = tilde.root
    for i in range(decomp.n_started):
        # bridge on the explored rayed tree until an unexplored leaf
        while True:
            if len(path) - 1 >= budget:
                pair.budget_hit = True
                return pair
            pos = step_once(tilde, pos, rng)
            path.append(pos)
            if tilde.n_children[pos] < 0:
                break
        tilde_tau.append(len(path) - 1)
        vmap = _glue(tilde, decomp.tree, decomp.visited[i], pos)
        pair.n_glued = i + 1
        complete = i < decomp.n_completed
        s0 = decomp.tau[i]
        s1 = decomp.eta[i] - 1 if complete else len(verts) - 1
        for s in range(s0 + 1, s1 + 1):
            if len(path) - 1 >= budget:
                pair.budget_hit = True
                pair.last_partial = True
                return pair
            path.append(vmap[verts[s]])
        if not complete:
            pair.last_partial = True
            return pair
        if len(path) - 1 >= budget:
            pair.budget_hit = True
            return pair
        pos = tilde.parent[vmap[verts[s0]]]
        path.append(pos)
        tilde_eta.append(len(path) - 1)
    return pair


@dataclass(frozen=True)
class Discrepancies:
    delta: int
    delta_alpha: int
    tilde_delta: int
    tilde_delta_alpha: int
    backtrack: float
    reflected: int


def discrepancies(pair: CoupledPair, alpha: float, t: int) -> Discrepancies:
    """Evaluate the coupling discrepancy functionals at time t.

    delta: source time outside excursions before t; delta_alpha restricts to
    moments at depth <= t^alpha (distance to the ray on the coupled side).
    backtrack: the largest upward move of the coupled walk between two ray
    visits (0 when fewer than two).  reflected: the coupled height above its
    running minimum.
    """
    if t > pair.horizon:
        raise HorizonExceededError(f"t={t} beyond coupled horizon {pair.horizon}")
    decomp = pair.decomp
    thresh = t ** alpha

    def gap_sums(tau, eta, dist, limit):
        i_t = sum(1 for x in tau if x <= limit)
        total = 0
        below = 0
        for i in range(i_t):
            lo = eta[i - 1] if i > 0 else 0
            hi = tau[i]
            total += hi - lo
            for s in range(lo, hi):
                if dist[s] <= thresh:
                    below += 1
        return total, below

    levels = decomp.traj.levels
    delta, delta_alpha = gap_sums(decomp.tau, decomp.eta, levels, t)

    tilde = pair.tilde_tree
    tpath = pair.tilde_path
    ray_attach = tilde.ray_attach
    tlv = pair.tilde_levels()
    tdist = [tlv[s] - tilde.level[ray_attach[tpath[s]]] for s in range(t + 1)]
    tilde_delta, tilde_delta_alpha = gap_sums(pair.tilde_tau, pair.tilde_eta, tdist, t)

    backtrack = 0.0
    min_ray_h = None
    min_h = tlv[0]
    reflected = 0
    for s in range(t + 1):
        h = tlv[s]
        if h < min_h:
            min_h = h
        if ray_attach[tpath[s]] == tpath[s]:
            if min_ray_h is not None and h - min_ray_h > backtrack:
                backtrack = h - min_ray_h
            if min_ray_h is None or h < min_ray_h:
                min_ray_h = h
    reflected = tlv[t] - min_h
    return Discrepancies(
        delta=delta,
        delta_alpha=delta_alpha,
        tilde_delta=tilde_delta,
        tilde_delta_alpha=tilde_delta_alpha,
        backtrack=backtrack,
        reflected=reflected,
    )


def couple_to_horizon(
    law,
    steps: int,
    tree_rng: np.random.Generator,
    walk_rng: np.random.Generator,
    tilde_rng: np.random.Generator,
    margin: float = 1.3,
    size_cap: int | None = None,
) -> CoupledPair:
    """Drive a source walk long enough that the coupled walk reaches ``steps``.

    The source walk extends (and the coupling rebuilds) until both horizons
    cover the target; extension continues the same random streams.
    """
    from .trees import MarkedTree
    from .walk import Walker

    tree = MarkedTree(law, tree_rng, size_cap)
    walker = Walker(tree, walk_rng)
    n = int(steps * margin) + 16
    walker.advance(n)
    while True:
        decomp = decompose(tree, walker.trajectory())
        pair = build_coupled(decomp, law, tilde_rng, max_steps=steps)
        if pair.horizon >= steps:
            return pair
        walker.advance(n)
        n *= 2
