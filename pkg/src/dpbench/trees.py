"""Hierarchies of noisy interval/box counts and their least-squares repair.

A tree node covers a half-open box of cells; children partition the parent
exactly and leaves tile the domain.  After measurement, inference combines
every node's noisy count into the generalized-least-squares estimate, which
is computed exactly by one upward (inverse-variance filtering) and one
downward (correction distribution) pass.  The two-pass form is the exact GLS
solution for tree-structured interval measurements at arbitrary per-node
noise scales; unmeasured nodes carry infinite variance and fall out of the
weighting naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MalformedTreeError(ValueError):
    """Children do not partition their parent, or leaves do not tile the domain."""


@dataclass
class TreeNode:
    box: tuple[tuple[int, int], ...]  # half-open [lo, hi) per axis
    depth: int
    children: list["TreeNode"] = field(default_factory=list)
    noisy: float = 0.0
    noise_scale: float = math.inf  # Laplace scale; inf marks an unmeasured node
    estimate: float = 0.0

    @property
    def size(self) -> int:
        n = 1
        for lo, hi in self.box:
            n *= hi - lo
        return n

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def measured(self) -> bool:
        return math.isfinite(self.noise_scale)


@dataclass
class NoisyTree:
    """A measured hierarchy over a 1D or 2D cell domain."""

    axis_sizes: tuple[int, ...]
    branching: int
    root: TreeNode

    def nodes(self) -> list[TreeNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(node.children))
        return out

    def levels(self) -> list[list[TreeNode]]:
        by_depth: list[list[TreeNode]] = []
        for node in self.nodes():
            while len(by_depth) <= node.depth:
                by_depth.append([])
            by_depth[node.depth].append(node)
        return by_depth

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes() if n.is_leaf]


def _split_axis(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    length = hi - lo
    parts = min(parts, length)
    base, rem = divmod(length, parts)
    bounds = [lo]
    for i in range(parts):
        bounds.append(bounds[-1] + base + (1 if i < rem else 0))
    return [(bounds[i], bounds[i + 1]) for i in range(parts)]


def _child_boxes(node: TreeNode, branching: int) -> list[tuple[tuple[int, int], ...]]:
    box = node.box
    k = len(box)
    if k == 1:
        return [(seg,) for seg in _split_axis(box[0][0], box[0][1], branching)]
    extents = [hi - lo for lo, hi in box]
    if branching == 2:
        # k-d style: alternate axes by depth, skipping exhausted ones
        axis = node.depth % 2
        if extents[axis] == 1:
            axis = 1 - axis
        segs = _split_axis(box[axis][0], box[axis][1], 2)
        return [
            tuple(seg if a == axis else box[a] for a in range(2)) for seg in segs
        ]
    g = max(2, round(math.sqrt(branching)))
    rows = _split_axis(box[0][0], box[0][1], g) if extents[0] > 1 else [box[0]]
    cols = _split_axis(box[1][0], box[1][1], g) if extents[1] > 1 else [box[1]]
    return [(r, c) for r in rows for c in cols]


def build_tree(
    axis_sizes: tuple[int, ...], branching: int, max_depth: int | None = None
) -> NoisyTree:
    """Recursively split the domain until single cells (or ``max_depth``)."""
    if branching < 2:
        raise ValueError("branching factor must be >= 2")
    root_box = tuple((0, s) for s in axis_sizes)

    def make(box, depth):
        node = TreeNode(box=box, depth=depth)
        if node.size == 1 or (max_depth is not None and depth >= max_depth):
            return node
        node.children = [make(b, depth + 1) for b in _child_boxes(node, branching)]
        return node

    return NoisyTree(tuple(axis_sizes), branching, make(root_box, 0))


def validate_tree(tree: NoisyTree) -> None:
    """Check the partition invariants; raises :class:`MalformedTreeError`."""
    for node in tree.nodes():
        if node.is_leaf:
            continue
        if sum(c.size for c in node.children) != node.size:
            raise MalformedTreeError("children do not partition their parent")
        for child in node.children:
            for (plo, phi), (clo, chi) in zip(node.box, child.box):
                if clo < plo or chi > phi:
                    raise MalformedTreeError("child extends beyond its parent")
    if sum(leaf.size for leaf in tree.leaves()) != tree.root.size:
        raise MalformedTreeError("leaves do not tile the domain")


def integral_image(cells: np.ndarray, axis_sizes: tuple[int, ...]) -> np.ndarray:
    grid = np.asarray(cells, dtype=np.float64).reshape(axis_sizes)
    if grid.ndim == 1:
        out = np.zeros(grid.size + 1)
        out[1:] = np.cumsum(grid)
        return out
    out = np.zeros((grid.shape[0] + 1, grid.shape[1] + 1))
    out[1:, 1:] = grid.cumsum(axis=0).cumsum(axis=1)
    return out


def box_total(integral: np.ndarray, box: tuple[tuple[int, int], ...]) -> float:
    if len(box) == 1:
        (lo, hi), = box
        return float(integral[hi] - integral[lo])
    (r0, r1), (c0, c1) = box
    return float(integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0])


def tree_least_squares(tree: NoisyTree) -> np.ndarray:
    """Consistent leaf estimates under generalized least squares.

    Sets ``estimate`` on every node; afterwards each internal node equals the
    sum of its children.  Returns the leaf estimates in leaf order.
    """
    validate_tree(tree)
    est: dict[int, float] = {}
    var: dict[int, float] = {}

    def upward(node: TreeNode) -> None:
        own_var = node.noise_scale**2 if node.measured else math.inf
        if node.is_leaf:
            est[id(node)] = node.noisy if node.measured else 0.0
            var[id(node)] = own_var
            return
        for child in node.children:
            upward(child)
        child_sum = sum(est[id(c)] for c in node.children)
        child_var = sum(var[id(c)] for c in node.children)
        if not node.measured:
            est[id(node)], var[id(node)] = child_sum, child_var
        elif math.isinf(child_var):
            est[id(node)], var[id(node)] = node.noisy, own_var
        elif child_var == 0.0:
            est[id(node)], var[id(node)] = child_sum, 0.0
        elif own_var == 0.0:
            est[id(node)], var[id(node)] = node.noisy, 0.0
        else:
            w_own, w_sum = 1.0 / own_var, 1.0 / child_var
            total = w_own + w_sum
            est[id(node)] = (node.noisy * w_own + child_sum * w_sum) / total
            var[id(node)] = 1.0 / total

    def downward(node: TreeNode, final: float) -> None:
        node.estimate = final
        if node.is_leaf:
            return
        children = node.children
        diff = final - sum(est[id(c)] for c in children)
        unmeasured = [c for c in children if math.isinf(var[id(c)])]
        corrections = []
        if unmeasured:
            # unmeasured subtrees absorb the whole correction, split evenly
            share = diff / len(unmeasured)
            corrections = [share if c in unmeasured else 0.0 for c in children]
        else:
            total_var = sum(var[id(c)] for c in children)
            if total_var == 0.0:
                corrections = [diff / len(children)] * len(children)
            else:
                corrections = [diff * var[id(c)] / total_var for c in children]
        # force the corrections to sum to diff bit-exactly
        corrections[-1] = diff - sum(corrections[:-1])
        for child, corr in zip(children, corrections):
            downward(child, est[id(child)] + corr)

    upward(tree.root)
    root_final = est[id(tree.root)] if not math.isinf(var[id(tree.root)]) else 0.0
    downward(tree.root, root_final)
    return np.array([leaf.estimate for leaf in tree.leaves()])


def spread_leaves(tree: NoisyTree) -> np.ndarray:
    """Cell estimates: each leaf's estimate divided uniformly over its box."""
    out = np.zeros(tree.axis_sizes, dtype=np.float64)
    for leaf in tree.leaves():
        value = leaf.estimate / leaf.size
        if len(leaf.box) == 1:
            (lo, hi), = leaf.box
            out[lo:hi] = value
        else:
            (r0, r1), (c0, c1) = leaf.box
            out[r0:r1, c0:c1] = value
    return out.reshape(-1)
