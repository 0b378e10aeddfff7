"""Tree arenas: lazily grown marked trees and rayed trees with hanging subtrees.

Vertices live in parallel arrays indexed by integer id.  ``level`` stores the
depth on a plain tree and the horocycle coordinate on a rayed tree (both obey
level(child) = level(parent) + 1).  An unexpanded vertex has n_children == -1;
expanding it consumes one draw from the tree's own random stream, so a tree is
reproducible from (law, seed) and the sequence of expansions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DepthUnavailableError,
    NotFrontierError,
    SizeLimitError,
    UnexpandedError,
)
from .laws import MarkLaw, SizeBiasedLaw, sample_root_mixture, size_bias

DEFAULT_SIZE_CAP = 100_000_000

_NAN = float("nan")


class MarkedTree:
    """Arena-backed marked tree grown from a single root."""

    def __init__(self, law: MarkLaw, rng: np.random.Generator, size_cap: int | None = None):
        self.law = law
        self.rng = rng
        self.size_cap = DEFAULT_SIZE_CAP if size_cap is None else int(size_cap)
        self.root = 0
        self.parent = [-1]
        self.mark = [_NAN]  # undefined at the root
        self.cum = [1.0]
        self.level = [0]
        self.first_child = [-1]
        self.n_children = [-1]  # -1 means unexpanded
        self.sum_marks = [0.0]
        self.ray_child = [-1]  # >= 0 only on ray vertices of RayedTree
        self.ray_attach = [0]
        self._n_unexpanded = 1
        self._level_blocks: list[tuple[int, int]] | None = None

    # -- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return len(self.parent)

    def is_expanded(self, v: int) -> bool:
        return self.n_children[v] >= 0

    @property
    def frontier(self) -> set[int]:
        """Ids of unexpanded vertices (derived view)."""
        nc = self.n_children
        return {v for v in range(len(nc)) if nc[v] < 0}

    @property
    def extinct(self) -> bool:
        """True when every lineage has died out (nothing left to expand)."""
        return self._n_unexpanded == 0

    def children(self, v: int) -> list[int]:
        n = self.n_children[v]
        if n < 0:
            raise UnexpandedError(f"vertex {v} is not expanded")
        rc = self.ray_child[v]
        out = [rc] if rc >= 0 else []
        f = self.first_child[v]
        out.extend(range(f, f + n - (rc >= 0)))
        return out

    def depth_of(self, v: int) -> int:
        return self.level[v]

    # -- growth ---------------------------------------------------------------

    def _new_vertex(self, parent: int, mark: float, cum: float, level: int, attach: int) -> int:
        vid = len(self.parent)
        if vid + 1 > self.size_cap:
            raise SizeLimitError(f"vertex cap {self.size_cap} exceeded")
        self.parent.append(parent)
        self.mark.append(mark)
        self.cum.append(cum)
        self.level.append(level)
        self.first_child.append(-1)
        self.n_children.append(-1)
        self.sum_marks.append(0.0)
        self.ray_child.append(-1)
        self.ray_attach.append(attach)
        self._n_unexpanded += 1
        return vid

    def _append_children(self, v: int, marks) -> range:
        """Create fresh child rows under v; caller finalizes v's child fields."""
        k = len(marks)
        base = len(self.parent)
        if base + k > self.size_cap:
            raise SizeLimitError(f"vertex cap {self.size_cap} exceeded")
        lv = self.level[v] + 1
        cv = self.cum[v]
        att = self.ray_attach[v]
        self.parent.extend([v] * k)
        self.mark.extend(marks)
        self.cum.extend([cv * m for m in marks])
        self.level.extend([lv] * k)
        self.first_child.extend([-1] * k)
        self.n_children.extend([-1] * k)
        self.sum_marks.extend([0.0] * k)
        self.ray_child.extend([-1] * k)
        self.ray_attach.extend([att] * k)
        self._n_unexpanded += k
        return range(base, base + k)

    def expand(self, v: int) -> None:
        """Reveal v's offspring with one fresh draw from the law."""
        if self.n_children[v] >= 0:
            raise NotFrontierError(f"vertex {v} is already expanded")
        n, marks = self.law.sample(self.rng)
        ids = self._append_children(v, list(marks))
        self.first_child[v] = ids.start
        self.n_children[v] = n
        self.sum_marks[v] = math.fsum(marks)
        self._n_unexpanded -= 1

    def _expand_id_block(self, start: int, stop: int) -> tuple[int, int]:
        """Vectorized expansion of the contiguous unexpanded ids [start, stop)."""
        k = stop - start
        counts, marks = self.law.sample_many(k, self.rng)
        total = int(counts.sum())
        base = len(self.parent)
        if base + total > self.size_cap:
            raise SizeLimitError(f"vertex cap {self.size_cap} exceeded")
        ids = np.arange(start, stop, dtype=np.int64)
        self.parent.extend(np.repeat(ids, counts).tolist())
        self.mark.extend(marks.tolist())
        cums = np.repeat(np.asarray(self.cum[start:stop]), counts) * marks
        self.cum.extend(cums.tolist())
        lv = self.level[start] + 1
        self.level.extend([lv] * total)
        self.first_child.extend([-1] * total)
        self.n_children.extend([-1] * total)
        self.sum_marks.extend([0.0] * total)
        self.ray_child.extend([-1] * total)
        att = self.ray_attach[start:stop]
        self.ray_attach.extend(np.repeat(np.asarray(att, dtype=np.int64), counts).tolist())
        starts = base + np.concatenate(([0], np.cumsum(counts[:-1], dtype=np.int64)))
        if total:
            # zero-count segments produce garbage entries; they are masked below
            seg = np.minimum(starts - base, total - 1)
            sums = np.add.reduceat(marks, seg)
        else:
            sums = np.zeros(k)
        cl = counts.tolist()
        sl = starts.tolist()
        for i in range(k):
            v = start + i
            self.first_child[v] = sl[i]
            self.n_children[v] = cl[i]
            self.sum_marks[v] = sums[i] if cl[i] else 0.0
        self._n_unexpanded += total - k
        return base, base + total


def expand_frontier(tree: MarkedTree, v: int) -> None:
    """Expand one frontier vertex (contract-checked alias of tree.expand)."""
    tree.expand(v)


def generate_mt(
    law: MarkLaw,
    depth: int,
    rng: np.random.Generator,
    size_cap: int | None = None,
) -> MarkedTree:
    """Materialize a marked tree down to ``depth`` levels.

    Every vertex above the target depth receives an independent draw from the
    law; extinction simply leaves nothing to expand and is reported through
    ``tree.extinct``, never resampled.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    t = MarkedTree(law, rng, size_cap)
    blocks = [(0, 1)]
    start, stop = 0, 1
    for _ in range(depth):
        if start == stop:
            break
        start, stop = t._expand_id_block(start, stop)
        blocks.append((start, stop))
    t._level_blocks = blocks
    return t


class RayedTree(MarkedTree):
    """Tree with a semi-infinite ray; ``level`` is the horocycle coordinate.

    The root v_0 sits at level 0; ray vertices v_1, v_2, ... sit at -1, -2, ...
    and each is drawn from the size-biased law with one child identified with
    the previous ray vertex, chosen proportionally to its mark.  The ray grows
    on demand (doubling) whenever the walk nears its top.
    """

    def __init__(
        self,
        law: MarkLaw,
        sb: SizeBiasedLaw,
        rng: np.random.Generator,
        size_cap: int | None = None,
    ):
        super().__init__(law, rng, size_cap)
        self.sb = sb
        self.ray = [0]

    def on_ray(self, v: int) -> bool:
        return self.ray_attach[v] == v

    def ray_distance(self, v: int) -> int:
        """Graph distance from v to the ray (0 on the ray itself)."""
        return self.level[v] - self.level[self.ray_attach[v]]

    def extend_ray(self, count: int | None = None) -> None:
        """Append ray vertices; default growth chunk doubles the current length."""
        if count is None:
            count = max(1, len(self.ray))
        for _ in range(count):
            below = self.ray[-1]
            n, marks, ridx = self.sb.sample_with_ray_child(self.rng)
            vid = self._new_vertex(
                parent=-1,
                mark=_NAN,
                cum=self.cum[below] / marks[ridx],
                level=self.level[below] - 1,
                attach=-1,
            )
            self._n_unexpanded -= 1  # ray vertices are born expanded
            self.ray_attach[vid] = vid
            self.mark[below] = marks[ridx]
            self.parent[below] = vid
            fresh = [m for i, m in enumerate(marks) if i != ridx]
            ids = self._append_children(vid, fresh)
            self.first_child[vid] = ids.start
            self.n_children[vid] = n
            self.ray_child[vid] = below
            self.sum_marks[vid] = math.fsum(marks)
            self.ray.append(vid)


def generate_imt(
    law: MarkLaw,
    ray_len: int,
    subtree_depth: int,
    rng: np.random.Generator,
    size_cap: int | None = None,
) -> RayedTree:
    """Build a rayed tree: ray of ``ray_len`` size-biased vertices, root children
    from the even mixture of the law and its size-biased version, hanging
    subtrees expanded to ``subtree_depth`` levels (lazily extendable)."""
    sb = size_bias(law)
    t = RayedTree(law, sb, rng, size_cap)
    n, marks = sample_root_mixture(law, sb, rng)
    ids = t._append_children(0, list(marks))
    t.first_child[0] = ids.start
    t.n_children[0] = n
    t.sum_marks[0] = math.fsum(marks)
    t._n_unexpanded -= 1
    t.extend_ray(ray_len)
    if subtree_depth > 0:
        v = 0
        while v < len(t):
            if t.n_children[v] < 0 and t.ray_distance(v) <= subtree_depth:
                t.expand(v)
            v += 1
    return t


@dataclass(frozen=True)
class ShiftView:
    """The tree re-rooted at a vertex, with the horocycle re-based to it."""

    tree: MarkedTree
    root: int

    def h(self, v: int) -> int:
        return self.tree.level[v] - self.tree.level[self.root]

    def parent_of(self, v: int) -> int:
        return self.tree.parent[v]

    def children(self, v: int) -> list[int]:
        return self.tree.children(v)

    def mark(self, v: int) -> float:
        return self.tree.mark[v]

    def n_children_of(self, v: int) -> int:
        return self.tree.n_children[v]

    @property
    def root_children(self) -> list[int]:
        return self.tree.children(self.root)


def shift(tree_or_view, v: int) -> ShiftView:
    """Re-root the tree at v; structure and marks are untouched."""
    tree = tree_or_view.tree if isinstance(tree_or_view, ShiftView) else tree_or_view
    if not (0 <= v < len(tree)):
        raise IndexError(f"vertex {v} not in tree")
    return ShiftView(tree=tree, root=v)


def require_depth(tree: MarkedTree, depth: int) -> None:
    """Raise DepthUnavailable unless every live lineage reaches ``depth``."""
    for v in range(len(tree)):
        if tree.n_children[v] < 0 and tree.level[v] < depth:
            raise DepthUnavailableError(
                f"vertex {v} at level {tree.level[v]} is unexpanded (need {depth})"
            )


def level_ids(tree: MarkedTree, depth: int) -> list[int]:
    """Ids of vertices at the given level (depth on MT trees)."""
    if tree._level_blocks is not None and depth < len(tree._level_blocks):
        a, b = tree._level_blocks[depth]
        return list(range(a, b))
    lv = tree.level
    return [v for v in range(len(tree)) if lv[v] == depth]


def dump_jsonl(tree: MarkedTree, stream) -> None:
    """Diagnostic dump: one JSON object per vertex."""
    key = "h" if isinstance(tree, RayedTree) else "depth"
    for v in range(len(tree)):
        mk = tree.mark[v]
        rec = {
            "id": v,
            "parent": tree.parent[v],
            key: tree.level[v],
            "mark": None if math.isnan(mk) else mk,
            "C": tree.cum[v],
        }
        stream.write(json.dumps(rec, sort_keys=True) + "\n")
