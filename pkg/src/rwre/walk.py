"""Nearest-neighbour random walks driven by the mark kernel.

Transition probabilities are recomputed from marks on the fly; the walk
expands the environment lazily on first arrival and extends the ray of a
rayed tree when it reaches the current top.  At the root of a plain tree the
walk reflects: it picks a child with probability proportional to its mark.
"""

from __future__ import annotations

import numpy as np

from .errors import ExtinctError, UnexpandedError
from .trees import MarkedTree, RayedTree, ShiftView, shift

_CHUNK = 4096


class Trajectory:
    """A walk path: vertex ids plus derived level series and hitting markers."""

    def __init__(self, vertices: list[int], tree: MarkedTree):
        self.vertices = vertices
        self.tree = tree
        self._levels: list[int] | None = None

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def steps(self) -> int:
        return len(self.vertices) - 1

    @property
    def levels(self) -> list[int]:
        """Depth (plain tree) or horocycle coordinate (rayed tree) along the path."""
        if self._levels is None or len(self._levels) != len(self.vertices):
            lv = self.tree.level
            self._levels = [lv[v] for v in self.vertices]
        return self._levels

    def first_passage(self) -> dict[int, int]:
        """First hitting time of each level value."""
        out: dict[int, int] = {}
        for t, lv in enumerate(self.levels):
            if lv not in out:
                out[lv] = t
        return out

    def start_returns(self) -> list[int]:
        """Times t > 0 at which the walk sits at its starting vertex."""
        x0 = self.vertices[0]
        return [t for t, v in enumerate(self.vertices) if t > 0 and v == x0]


def kernel(
    tree: MarkedTree, v: int, reflect_root: bool = True
) -> list[tuple[int, float]]:
    """Transition probabilities from v as (neighbour id, probability) pairs.

    On a plain tree the root either reflects onto its children (default) or,
    with ``reflect_root=False``, keeps the generic mark weights so that the
    listed probabilities sum to S/(1+S) and the artificial parent mass 1/(1+S)
    is simply not listed.  On a rayed tree every vertex has a parent (the ray
    is extended on demand) and the generic formula applies everywhere.
    """
    if tree.n_children[v] < 0:
        raise UnexpandedError(f"vertex {v} is not expanded")
    p = tree.parent[v]
    if p < 0 and isinstance(tree, RayedTree):
        tree.extend_ray()
        p = tree.parent[v]
    kids = tree.children(v)
    s = tree.sum_marks[v]
    if p < 0:
        if reflect_root:
            if s <= 0.0:
                raise ExtinctError("childless root has no moves under reflection")
            return [(c, tree.mark[c] / s) for c in kids]
        return [(c, tree.mark[c] / (1.0 + s)) for c in kids]
    denom = 1.0 + s
    out = [(p, 1.0 / denom)]
    out.extend((c, tree.mark[c] / denom) for c in kids)
    return out


class Walker:
    """Resumable walk; keeps its own uniform buffer so extensions continue the
    exact random stream a single longer run would have used."""

    def __init__(self, tree: MarkedTree, rng: np.random.Generator, start: int | None = None):
        self.tree = tree
        self.rng = rng
        self.x = tree.root if start is None else start
        self.path: list[int] = [self.x]
        self._buf: np.ndarray | None = None
        self._bi = 0
        self._rayed = isinstance(tree, RayedTree)

    def advance(self, k: int) -> None:
        tree = self.tree
        parent = tree.parent
        mark = tree.mark
        nch = tree.n_children
        first = tree.first_child
        smark = tree.sum_marks
        rayc = tree.ray_child
        expand = tree.expand
        rayed = self._rayed
        path = self.path
        app = path.append
        rng = self.rng
        buf = self._buf
        bi = self._bi
        x = self.x
        for _ in range(k):
            if nch[x] < 0:
                expand(x)
            if buf is None or bi == _CHUNK:
                buf = rng.random(_CHUNK)
                bi = 0
            u = buf[bi]
            bi += 1
            p = parent[x]
            if p < 0:
                if rayed:
                    tree.extend_ray()
                    p = parent[x]
                else:
                    s = smark[x]
                    if s <= 0.0:
                        self.x, self._buf, self._bi = x, buf, bi
                        raise ExtinctError("walk stranded at a childless root")
                    u *= s
                    f = first[x]
                    end = f + nch[x] - 1
                    c = f
                    while c < end:
                        u -= mark[c]
                        if u < 0.0:
                            break
                        c += 1
                    x = c
                    app(x)
                    continue
            s = smark[x]
            u *= 1.0 + s
            if u < 1.0:
                x = p
            else:
                u -= 1.0
                rc = rayc[x]
                n = nch[x]
                if rc >= 0:
                    if n == 1 or u < mark[rc]:
                        x = rc
                        app(x)
                        continue
                    u -= mark[rc]
                    n -= 1
                f = first[x]
                end = f + n - 1
                c = f
                while c < end:
                    u -= mark[c]
                    if u < 0.0:
                        break
                    c += 1
                x = c
            app(x)
        self.x, self._buf, self._bi = x, buf, bi

    def trajectory(self) -> Trajectory:
        return Trajectory(self.path, self.tree)


def step_once(tree: MarkedTree, x: int, rng: np.random.Generator) -> int:
    """One kernel step from an expanded vertex; scalar randomness, no buffering."""
    if tree.n_children[x] < 0:
        tree.expand(x)
    p = tree.parent[x]
    if p < 0:
        if isinstance(tree, RayedTree):
            tree.extend_ray()
            p = tree.parent[x]
        else:
            s = tree.sum_marks[x]
            if s <= 0.0:
                raise ExtinctError("walk stranded at a childless root")
            u = rng.random() * s
            f = tree.first_child[x]
            end = f + tree.n_children[x] - 1
            c = f
            while c < end:
                u -= tree.mark[c]
                if u < 0.0:
                    break
                c += 1
            return c
    s = tree.sum_marks[x]
    u = rng.random() * (1.0 + s)
    if u < 1.0:
        return p
    u -= 1.0
    rc = tree.ray_child[x]
    n = tree.n_children[x]
    if rc >= 0:
        if n == 1 or u < tree.mark[rc]:
            return rc
        u -= tree.mark[rc]
        n -= 1
    f = tree.first_child[x]
    end = f + n - 1
    c = f
    while c < end:
        u -= tree.mark[c]
        if u < 0.0:
            break
        c += 1
    return c


def run_walk(
    tree: MarkedTree,
    start: int | None,
    steps: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Run ``steps`` kernel steps from ``start`` (default: root)."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    w = Walker(tree, rng, start)
    if steps:
        w.advance(steps)
    return w.trajectory()


def environment_seen_from_particle(tree: MarkedTree, traj: Trajectory, t: int) -> ShiftView:
    """The tree re-rooted at the walk's position at time t."""
    if t >= len(traj):
        raise ValueError(f"time {t} beyond trajectory of length {len(traj)}")
    return shift(tree, traj.vertices[t])
