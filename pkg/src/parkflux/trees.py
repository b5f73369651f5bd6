"""Random rooted plane trees: unconditioned branching-process samples, exact
size-conditioned samples via the cycle lemma, height-truncated spine trees
with size-biased branching, subtree surgery (top / pruned), fringe statistics,
and an exhaustive small-tree enumerator used as an exactness oracle.

Trees live in arena form: nodes are integer indices, `parent` maps each node
to its parent (-1 at the root), and children are kept in planar order.  All
samplers emit nodes in an order where parents precede children, which the
parking pass exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from collections import deque

import numpy as np

from . import _kernels
from .distributions import (CRITICAL_TOL, LawHandle, NotCritical, make_law,
                            DistSpec, size_biased, check_offspring)

DEFAULT_CAP = 1_000_000
REJECTION_BUDGET = 10_000_000


class Delta1Offspring(ValueError):
    """Offspring law is the point mass at one child (the degenerate line)."""


class Inadmissible(ValueError):
    """No tree with the requested vertex count has positive probability."""


class RejectionBudgetExceeded(RuntimeError):
    """The conditioned sampler used up its attempt budget."""


class BadNode(IndexError):
    """Node index outside the tree."""


class TooLarge(ValueError):
    """Exhaustive enumeration requested beyond the supported size."""


@dataclass(frozen=True)
class OverflowMark:
    """Returned instead of a tree when generation hit the vertex cap; carries
    the number of vertices materialized before giving up."""

    partial_vertices: int


@dataclass(eq=False)
class Tree:
    """Rooted plane tree over nodes 0..n-1."""

    parent: np.ndarray
    root: int = 0
    child_start: np.ndarray | None = None
    child_list: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.parent.shape[0])

    def __len__(self) -> int:
        return self.n

    # -- children ----------------------------------------------------------

    def _ensure_children(self) -> None:
        if self.child_start is None:
            order = np.argsort(self.parent, kind="stable")
            # the root (parent -1) sorts first; drop it
            self.child_list = order[1:].astype(np.int64, copy=False)
            counts = np.bincount(self.parent[self.parent >= 0], minlength=self.n)
            self.child_start = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=self.child_start[1:])

    def children(self, v: int) -> np.ndarray:
        self._check_node(v)
        self._ensure_children()
        return self.child_list[self.child_start[v]:self.child_start[v + 1]]

    def degree(self, v: int) -> int:
        self._check_node(v)
        self._ensure_children()
        return int(self.child_start[v + 1] - self.child_start[v])

    def degrees(self) -> np.ndarray:
        self._ensure_children()
        return np.diff(self.child_start)

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise BadNode(f"node {v} not in tree of size {self.n}")

    # -- orders ------------------------------------------------------------

    def is_index_topological(self) -> bool:
        """True when every node's parent has a smaller index (root at 0)."""
        if self.root != 0:
            return False
        n = self.n
        if n == 1:
            return True
        return bool(np.all(self.parent[1:] < np.arange(1, n)))

    def topological_order(self) -> np.ndarray:
        """Nodes with parents before children; identity for sampler output."""
        if self.is_index_topological():
            return np.arange(self.n, dtype=np.int64)
        self._ensure_children()
        order = np.empty(self.n, dtype=np.int64)
        q = deque([self.root])
        i = 0
        while q:
            v = q.popleft()
            order[i] = v
            i += 1
            q.extend(self.children(v).tolist())
        if i != self.n:
            raise ValueError("disconnected parent structure")
        return order

    def preorder(self) -> np.ndarray:
        """Depth-first node order respecting planar order of children."""
        self._ensure_children()
        out = np.empty(self.n, dtype=np.int64)
        stack = [self.root]
        i = 0
        while stack:
            v = stack.pop()
            out[i] = v
            i += 1
            kids = self.children(v)
            stack.extend(kids[::-1].tolist())
        if i != self.n:
            raise ValueError("disconnected parent structure")
        return out

    def preorder_degrees(self) -> np.ndarray:
        self._ensure_children()
        return self.degrees()[self.preorder()]

    def shape_key(self) -> tuple[int, ...]:
        """Canonical encoding of the plane-tree shape."""
        return tuple(int(d) for d in self.preorder_degrees())

    def depths(self) -> np.ndarray:
        order = self.topological_order()
        d = np.zeros(self.n, dtype=np.int64)
        for v in order[1:] if self.is_index_topological() else order:
            p = self.parent[v]
            if p >= 0:
                d[v] = d[p] + 1
        return d

    def subtree_sizes(self) -> np.ndarray:
        order = self.topological_order()
        sz = np.ones(self.n, dtype=np.int64)
        for i in range(self.n - 1, -1, -1):
            v = order[i]
            p = self.parent[v]
            if p >= 0:
                sz[p] += sz[v]
        return sz

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_preorder_degrees(degs) -> "Tree":
        degs = np.ascontiguousarray(degs, dtype=np.int64)
        n = degs.shape[0]
        if n == 0:
            raise ValueError("empty degree sequence")
        s = np.cumsum(degs) - np.arange(1, n + 1)
        if s[-1] != -1 or np.any(s[:-1] < 0):
            raise ValueError("degree sequence is not a single preorder tree")
        parent = np.empty(n, dtype=np.int64)
        _kernels.parents_from_degrees(degs, 0, -1, parent)
        return Tree(parent=parent, root=0)

    @staticmethod
    def from_parent_array(parent, root: int | None = None) -> "Tree":
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        roots = np.nonzero(parent < 0)[0]
        if len(roots) != 1:
            raise ValueError(f"need exactly one root, found {len(roots)}")
        r = int(roots[0])
        if root is not None and root != r:
            raise ValueError("explicit root disagrees with parent array")
        t = Tree(parent=parent, root=r)
        t.topological_order()  # raises on cycles / disconnection
        return t

    def with_children_order(self, new_child_list) -> "Tree":
        """Same parent structure with an explicitly chosen planar order."""
        self._ensure_children()
        new_child_list = np.ascontiguousarray(new_child_list, dtype=np.int64)
        if new_child_list.shape != self.child_list.shape:
            raise ValueError("child list size mismatch")
        if np.any(self.parent[new_child_list] !=
                  self.parent[self.child_list]):
            raise ValueError("new order regroups children across parents")
        return Tree(parent=self.parent.copy(), root=self.root,
                    child_start=self.child_start.copy(),
                    child_list=new_child_list)


@dataclass(eq=False)
class PointedTree:
    tree: Tree
    point: int


@dataclass(eq=False)
class SpineTree:
    """A height-truncated surviving-tree sample: nodes 0..H form the spine
    from the root upward; everything else hangs off it in full branching
    subtrees."""

    tree: Tree
    spine: np.ndarray

    @property
    def height(self) -> int:
        return int(self.spine.shape[0]) - 1


# ---------------------------------------------------------------------------
# validation helpers


def _require_offspring(offspring: LawHandle, *, critical: bool) -> None:
    rep = check_offspring(offspring)
    if rep.is_delta1:
        raise Delta1Offspring("offspring law is the point mass at 1")
    if critical:
        if not rep.is_critical:
            raise NotCritical(f"offspring mean {offspring.mean!r} is not 1")
    else:
        if offspring.mean > 1.0 + CRITICAL_TOL:
            raise NotCritical(
                f"offspring mean {offspring.mean!r} > 1: generation does not "
                "terminate almost surely")


def admissible_size(offspring: LawHandle, n: int) -> bool:
    """Can a tree under this offspring law have exactly n vertices?"""
    if n < 1:
        return False
    if offspring.pmf(0) <= 0.0:
        return False
    if n == 1:
        return True
    support = offspring.support_upto()
    gens = np.array(sorted({int(k) for k in support if k >= 1}), dtype=np.int64)
    if gens.size == 0:
        return False
    if gens[0] == 1:
        return True
    reach = _kernels.reachable_sums(gens, n - 1)
    return bool(reach[n - 1])


# ---------------------------------------------------------------------------
# unconditioned sampling


def sample_gw(offspring: LawHandle, rng: np.random.Generator,
              cap: int = DEFAULT_CAP) -> Tree | OverflowMark:
    """One branching-process tree, or an OverflowMark past `cap` vertices."""
    _require_offspring(offspring, critical=False)
    degs = _sample_gw_degrees(offspring, rng, cap)
    if degs is None:
        return OverflowMark(partial_vertices=cap)
    return Tree.from_preorder_degrees(degs)


def _sample_gw_degrees(offspring: LawHandle, rng: np.random.Generator,
                       cap: int) -> np.ndarray | None:
    """Preorder child counts of one tree, or None on cap overflow."""
    chunk = 64
    buf = offspring.sample_n(rng, chunk)
    while True:
        c = np.cumsum(buf) - np.arange(1, buf.shape[0] + 1)
        hits = np.nonzero(c == -1)[0]
        if hits.size:
            n = int(hits[0]) + 1
            if n > cap:
                return None
            return buf[:n]
        if buf.shape[0] >= cap:
            return None
        chunk = min(2 * chunk, 1 << 20)
        buf = np.concatenate([buf, offspring.sample_n(rng, chunk)])


# ---------------------------------------------------------------------------
# size-conditioned sampling (cycle lemma)


def rotate_to_excursion(degs: np.ndarray) -> np.ndarray:
    """The unique cyclic rotation of a child-count sequence with total n-1
    whose walk first reaches -1 at the very end."""
    n = degs.shape[0]
    s = np.cumsum(degs) - np.arange(1, n + 1)
    if s[-1] != -1:
        raise ValueError("child counts must sum to n - 1")
    r = int(np.argmin(s)) + 1
    if r == n:
        return degs
    return np.concatenate([degs[r:], degs[:r]])


def conditioned_degrees(offspring: LawHandle, n: int, rng: np.random.Generator,
                        budget: int = REJECTION_BUDGET) -> np.ndarray:
    """Preorder child counts of an exact n-vertex conditioned sample.

    Draws n child counts i.i.d. conditioned on total n-1 (for poisson
    offspring by exact multinomial splitting, otherwise by rejection on the
    sum) and applies the cycle lemma.
    """
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if offspring.kind == "poisson":
        vec = rng.multinomial(n - 1, np.full(n, 1.0 / n)).astype(np.int64)
        return rotate_to_excursion(vec)
    attempts = 0
    rows = 32
    while attempts < budget:
        rows = max(1, min(rows, budget - attempts, (1 << 22) // n + 1))
        mat = offspring.sample_n(rng, (rows, n))
        sums = mat.sum(axis=1)
        hits = np.nonzero(sums == n - 1)[0]
        attempts += rows
        if hits.size:
            return rotate_to_excursion(mat[int(hits[0])])
        rows *= 2
    raise RejectionBudgetExceeded(
        f"no n={n} sample in {attempts} attempts "
        f"(success rate below {1.0 / attempts:.2e})")


def sample_gw_conditioned(offspring: LawHandle, n: int,
                          rng: np.random.Generator,
                          budget: int = REJECTION_BUDGET) -> Tree:
    """Exact sample of the tree conditioned to have n vertices."""
    _require_offspring(offspring, critical=True)
    if n < 1 or not admissible_size(offspring, n):
        raise Inadmissible(f"no tree with {n} vertices has positive mass")
    return Tree.from_preorder_degrees(conditioned_degrees(offspring, n, rng, budget))


# ---------------------------------------------------------------------------
# truncated spine trees


def sample_kesten_truncated(offspring: LawHandle, H: int,
                            rng: np.random.Generator, cap: int = DEFAULT_CAP,
                            graft_depth: int | None = None,
                            ) -> SpineTree | OverflowMark:
    """Spine of H+1 vertices; on each spine vertex, Y-1 independent
    unconditioned trees with Y size-biased, planar slot of the spine child
    uniform.  graft_depth, when given, forces graft vertices at that depth to
    be leaves (an estimator-side truncation; None reproduces the full law).
    """
    _require_offspring(offspring, critical=True)
    if H < 0:
        raise ValueError("truncation height must be >= 0")
    nu_bar = size_biased(offspring)
    return _sample_kesten(offspring, nu_bar, H, rng, cap, graft_depth)


def _sample_kesten(offspring: LawHandle, nu_bar: LawHandle, H: int,
                   rng: np.random.Generator, cap: int,
                   graft_depth: int | None,
                   materialize_planar: bool = True) -> SpineTree | OverflowMark:
    n_spine = H + 1
    if cap < n_spine:
        return OverflowMark(partial_vertices=0)
    y = nu_bar.sample_n(rng, n_spine)
    slots = rng.integers(0, y[:H], dtype=np.int64) if H > 0 else \
        np.empty(0, dtype=np.int64)
    counts = y - 1
    n_grafts = int(counts.sum())
    max_depth = _kernels.NO_DEPTH_LIMIT if graft_depth is None else graft_depth
    budget = cap - n_spine
    sizes = np.empty(n_grafts, dtype=np.int64)
    out_degs = np.empty(budget + 1, dtype=np.int64)
    stack_ws = np.empty(budget + 2, dtype=np.int64)
    done = 0
    opos = 0
    leftover = np.empty(0, dtype=np.int64)
    if graft_depth is not None:
        chunk = int(n_grafts * (graft_depth + 1) * 1.4) + 512
    else:
        chunk = n_grafts * 512 + 4096
    while done < n_grafts:
        draws = np.concatenate([leftover, offspring.sample_n(rng, chunk)])
        done, used, opos, overflowed = _kernels.collect_degrees_stream(
            draws, n_grafts, budget, max_depth, stack_ws, out_degs, sizes,
            done, opos)
        if overflowed:
            return OverflowMark(partial_vertices=n_spine + opos)
        leftover = draws[used:]
        chunk = min(2 * chunk, 1 << 22)
    n_total = n_spine + opos
    parent = np.empty(n_total, dtype=np.int64)
    parent[0] = -1
    if H > 0:
        parent[1:n_spine] = np.arange(H)
    graft_roots = np.repeat(np.arange(n_spine, dtype=np.int64), counts)
    _kernels.parents_from_packed_degrees(out_degs[:opos], sizes, graft_roots,
                                         n_spine, parent)
    tree = Tree(parent=parent, root=0)
    if materialize_planar:
        _attach_spine_planar_order(tree, n_spine, slots)
    return SpineTree(tree=tree, spine=np.arange(n_spine, dtype=np.int64))


def _attach_spine_planar_order(tree: Tree, n_spine: int,
                               slots: np.ndarray) -> None:
    """Move each spine child from the head of its parent's child block to its
    drawn planar slot."""
    tree._ensure_children()
    cl, cs = tree.child_list, tree.child_start
    for i in range(slots.shape[0]):
        a, b = cs[i], cs[i + 1]
        block = cl[a:b]
        # sampler layout puts the spine child (index i+1) first in the block
        pos = int(slots[i])
        if pos > 0:
            spine_child = block[0]
            block[:pos] = block[1:pos + 1]
            block[pos] = spine_child


# ---------------------------------------------------------------------------
# subtree surgery


def top(tree: Tree, v: int) -> Tree:
    """The subtree of descendants of v, re-rooted at v, planar order kept."""
    tree._check_node(v)
    degs = []
    stack = [v]
    tree._ensure_children()
    while stack:
        x = stack.pop()
        kids = tree.children(x)
        degs.append(len(kids))
        stack.extend(kids[::-1].tolist())
    return Tree.from_preorder_degrees(np.array(degs, dtype=np.int64))


def pruned(tree: Tree, v: int) -> PointedTree:
    """Everything except the strict descendants of v, pointed at v."""
    tree._check_node(v)
    tree._ensure_children()
    degs = []
    point = -1
    stack = [tree.root]
    while stack:
        x = stack.pop()
        if x == v:
            point = len(degs)
            degs.append(0)
            continue
        kids = tree.children(x)
        degs.append(len(kids))
        stack.extend(kids[::-1].tolist())
    return PointedTree(tree=Tree.from_preorder_degrees(
        np.array(degs, dtype=np.int64)), point=point)


def fringe_histogram(tree: Tree, max_size: int = 6) -> dict:
    """Empirical distribution of descendant subtrees over all nodes, keyed by
    preorder-degree shape for shapes of at most max_size vertices, with the
    rest pooled under 'other'."""
    if max_size > 6:
        raise ValueError("shape keys are only tabulated up to 6 vertices")
    sizes = tree.subtree_sizes()
    tree._ensure_children()
    hist: dict = {}
    n = tree.n
    small = np.nonzero(sizes <= max_size)[0]
    for v in small:
        key = _small_shape(tree, int(v))
        hist[key] = hist.get(key, 0) + 1
    other = n - small.shape[0]
    if other:
        hist["other"] = other
    return {k: c / n for k, c in hist.items()}


def _small_shape(tree: Tree, v: int) -> tuple[int, ...]:
    degs = []
    stack = [v]
    while stack:
        x = stack.pop()
        kids = tree.children(x)
        degs.append(len(kids))
        stack.extend(kids[::-1].tolist())
    return tuple(degs)


# ---------------------------------------------------------------------------
# exhaustive enumeration oracle


@dataclass
class EnumeratedEnsemble:
    trees: list
    probs: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def conditional_shape_probs(self) -> dict:
        tot = self.total_mass
        return {t.shape_key(): float(p) / tot
                for t, p in zip(self.trees, self.probs)}


def enumerate_trees(offspring: LawHandle, n: int) -> EnumeratedEnsemble:
    """All plane trees with exactly n vertices and positive mass, with their
    exact probabilities (product of the offspring pmf over child counts)."""
    if n > 8:
        raise TooLarge(f"enumeration supported up to 8 vertices, got {n}")
    if n < 1:
        raise ValueError("need n >= 1")
    degree_probs = [offspring.pmf(d) for d in range(n)]
    seqs: list[tuple[tuple[int, ...], float]] = []

    def rec(prefix: list[int], open_slots: int, prob: float) -> None:
        placed = len(prefix)
        if placed == n:
            if open_slots == 0:
                seqs.append((tuple(prefix), prob))
            return
        remaining = n - placed
        for d in range(n):
            p = degree_probs[d]
            if p <= 0.0:
                continue
            new_open = open_slots - 1 + d
            if new_open < 0:
                continue
            # every open slot still needs a vertex
            if new_open > remaining - 1:
                continue
            if remaining - 1 > 0 and new_open == 0:
                continue
            prefix.append(d)
            rec(prefix, new_open, prob * p)
            prefix.pop()

    rec([], 1, 1.0)
    trees = [Tree.from_preorder_degrees(np.array(s, dtype=np.int64))
             for s, _ in seqs]
    probs = np.array([p for _, p in seqs])
    return EnumeratedEnsemble(trees=trees, probs=probs)


# ---------------------------------------------------------------------------
# debug dump


def dump_tree(tree: Tree) -> str:
    """One line per node: `id parent child-count`, preorder ids, root first."""
    order = tree.preorder()
    pos = np.empty(tree.n, dtype=np.int64)
    pos[order] = np.arange(tree.n)
    degs = tree.degrees()
    lines = []
    for i, v in enumerate(order):
        p = tree.parent[v]
        lines.append(f"{i} {-1 if p < 0 else int(pos[p])} {int(degs[v])}")
    return "\n".join(lines) + "\n"
