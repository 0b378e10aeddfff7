"""Electrical and capacitated network computations on marked trees.

The edge into a vertex x carries conductance and capacity C_x (the cumulative
mark product).  Effective conductance and maximum flow to a level are computed
by the tree recursions with an exact +infinity boundary; independent oracles
(a Dirichlet linear solve and an augmenting-path max flow) guard them.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import SizeLimitError, UnexpandedError
from .trees import MarkedTree, require_depth

_INF = math.inf
ORACLE_VERTEX_LIMIT = 10_000


def _check_levels(tree: MarkedTree, n: int) -> None:
    if n < 1:
        raise ValueError("level must be >= 1")
    require_depth(tree, n)


def effective_conductance(tree: MarkedTree, n: int) -> float:
    """Effective conductance from the root to level n by series/parallel reduction.

    Vertices at level n are the grounded boundary (conductance +infinity below
    them); extinct branches contribute zero.
    """
    _check_levels(tree, n)
    level = tree.level
    cum = tree.cum
    ceff: dict[int, float] = {}
    for v in range(len(tree) - 1, -1, -1):
        lv = level[v]
        if lv > n:
            continue
        if lv == n:
            ceff[v] = _INF
            continue
        acc = 0.0
        for c in tree.children(v):
            ce = ceff[c]
            cc = cum[c]
            acc += cc if ce == _INF else cc * ce / (cc + ce) if ce > 0.0 else 0.0
        ceff[v] = acc
    return ceff[tree.root]


def max_flow(tree: MarkedTree, n: int) -> float:
    """Maximum flow from the root to level n with capacity C_x on the edge into x.

    Normalized recursion: M(v) = sum over children of A(child) * min(M(child), 1)
    with M = +infinity at level n; M(root) is the absolute max-flow value.
    """
    _check_levels(tree, n)
    level = tree.level
    mark = tree.mark
    m: dict[int, float] = {}
    for v in range(len(tree) - 1, -1, -1):
        lv = level[v]
        if lv > n:
            continue
        if lv == n:
            m[v] = _INF
            continue
        acc = 0.0
        for c in tree.children(v):
            mc = m[c]
            acc += mark[c] * (1.0 if mc > 1.0 else mc)
        m[v] = acc
    return m[tree.root]


def invariant_measure(tree: MarkedTree, v: int) -> float:
    """pi(x) = C_x * (1 + sum of children marks), normalized by pi(root) = 1 + sum A(e_i)."""
    if tree.n_children[v] < 0:
        raise UnexpandedError(f"vertex {v} is not expanded")
    return tree.cum[v] * (1.0 + tree.sum_marks[v])


def _truncated_ids(tree: MarkedTree, n: int) -> list[int]:
    level = tree.level
    ids = [v for v in range(len(tree)) if level[v] <= n]
    if len(ids) > ORACLE_VERTEX_LIMIT:
        raise SizeLimitError(
            f"oracle limited to {ORACLE_VERTEX_LIMIT} vertices, got {len(ids)}"
        )
    return ids


def conductance_oracle(tree: MarkedTree, n: int) -> float:
    """Effective conductance by solving the Dirichlet problem on the truncated tree.

    Root at potential 1, level-n vertices grounded; returns the current out of
    the root.  Independent of the series/parallel recursion.
    """
    _check_levels(tree, n)
    ids = _truncated_ids(tree, n)
    level = tree.level
    cum = tree.cum
    parent = tree.parent
    interior = [v for v in ids if 0 < level[v] < n]
    if not any(level[v] == n for v in ids):
        return 0.0
    index = {v: i for i, v in enumerate(interior)}
    rows, cols, vals = [], [], []
    b = np.zeros(len(interior))
    for v in interior:
        i = index[v]
        diag = 0.0
        # edge to the parent, conductance C_v
        cv = cum[v]
        diag += cv
        p = parent[v]
        if p == tree.root:
            b[i] += cv * 1.0
        elif level[p] > 0:
            rows.append(i)
            cols.append(index[p])
            vals.append(-cv)
        for c in tree.children(v):
            cc = cum[c]
            diag += cc
            if level[c] == n:
                pass  # grounded at potential 0
            else:
                rows.append(i)
                cols.append(index[c])
                vals.append(-cc)
        rows.append(i)
        cols.append(i)
        vals.append(diag)
    if interior:
        lap = scipy.sparse.csr_matrix(
            (vals, (rows, cols)), shape=(len(interior), len(interior))
        )
        phi = scipy.sparse.linalg.spsolve(lap, b)
    else:
        phi = np.zeros(0)
    current = 0.0
    for c in tree.children(tree.root):
        pot = 0.0 if level[c] == n else phi[index[c]]
        current += cum[c] * (1.0 - pot)
    return float(current)


def max_flow_oracle(tree: MarkedTree, n: int) -> float:
    """Max flow root -> level n by BFS augmenting paths (Edmonds-Karp)."""
    _check_levels(tree, n)
    ids = _truncated_ids(tree, n)
    level = tree.level
    cum = tree.cum
    sink = -2  # synthetic super-sink
    residual: dict[int, dict[int, float]] = {v: {} for v in ids}
    residual[sink] = {}

    def add_edge(u, v, cap):
        residual[u][v] = residual[u].get(v, 0.0) + cap
        residual[v].setdefault(u, 0.0)

    for v in ids:
        if v == tree.root:
            continue
        add_edge(tree.parent[v], v, cum[v])
        if level[v] == n:
            add_edge(v, sink, _INF)
    total = 0.0
    while True:
        # BFS for a shortest augmenting path
        prev = {tree.root: None}
        q = deque([tree.root])
        while q and sink not in prev:
            u = q.popleft()
            for w, cap in residual[u].items():
                if cap > 0.0 and w not in prev:
                    prev[w] = u
                    q.append(w)
        if sink not in prev:
            return total
        # bottleneck
        bottleneck = _INF
        w = sink
        while prev[w] is not None:
            u = prev[w]
            bottleneck = min(bottleneck, residual[u][w])
            w = u
        w = sink
        while prev[w] is not None:
            u = prev[w]
            residual[u][w] -= bottleneck
            residual[w][u] += bottleneck
            w = u
        total += bottleneck


def level_capacity(tree: MarkedTree, k: int) -> float:
    """Total capacity of the level-k antichain: sum of C_x over |x| = k."""
    level = tree.level
    cum = tree.cum
    return math.fsum(cum[v] for v in range(len(tree)) if level[v] == k)
