import numpy as np
import pytest

from dpbench.trees import (
    MalformedTreeError,
    NoisyTree,
    TreeNode,
    build_tree,
    spread_leaves,
    tree_least_squares,
    validate_tree,
)


def dense_gls_oracle(tree):
    """Brute-force weighted least squares over all measured nodes."""
    leaves = tree.leaves()
    index = {id(leaf): i for i, leaf in enumerate(leaves)}
    rows, values, weights = [], [], []
    for node in tree.nodes():
        if not node.measured:
            continue
        row = np.zeros(len(leaves))
        stack = [node]
        while stack:
            item = stack.pop()
            if item.is_leaf:
                row[index[id(item)]] = 1.0
            else:
                stack.extend(item.children)
        rows.append(row)
        values.append(node.noisy)
        weights.append(1.0 / node.noise_scale)
    a = np.array(rows) * np.array(weights)[:, None]
    b = np.array(values) * np.array(weights)
    solution, *_ = np.linalg.lstsq(a, b, rcond=None)
    return solution


def randomize(tree, seed, scale_range=(0.5, 2.0)):
    gen = np.random.default_rng(seed)
    for node in tree.nodes():
        node.noisy = float(gen.normal(scale=5.0))
        node.noise_scale = float(gen.uniform(*scale_range))
    return tree


class TestHandExample:
    def test_three_node_closed_form(self):
        # root measured 10, leaves 3 and 5, equal noise: solve the
        # constrained least squares by hand via the multiplier
        # lam = (z0 - z1 - z2) / 3 giving leaves [11/3, 17/3]
        tree = build_tree((2,), 2)
        tree.root.noisy, tree.root.noise_scale = 10.0, 1.0
        for leaf, z in zip(tree.root.children, (3.0, 5.0)):
            leaf.noisy, leaf.noise_scale = z, 1.0
        estimates = tree_least_squares(tree)
        assert np.allclose(estimates, [11 / 3, 17 / 3])
        assert tree.root.estimate == pytest.approx(28 / 3)


class TestInferenceProperties:
    @pytest.mark.parametrize("b", [2, 4, 16])
    @pytest.mark.parametrize("n", [37, 256, 1024])
    def test_parent_equals_children_sum(self, b, n):
        tree = randomize(build_tree((n,), b), seed=n * b)
        tree_least_squares(tree)
        for node in tree.nodes():
            if node.children:
                total = sum(child.estimate for child in node.children)
                assert abs(node.estimate - total) < 1e-9

    @pytest.mark.parametrize("b", [2, 4, 16])
    def test_matches_dense_gls(self, b):
        tree = randomize(build_tree((100,), b), seed=b)
        estimates = tree_least_squares(tree)
        assert np.max(np.abs(estimates - dense_gls_oracle(tree))) < 1e-8

    def test_uneven_noise_scales_match_oracle(self):
        tree = randomize(build_tree((64,), 2), seed=7, scale_range=(0.1, 10.0))
        estimates = tree_least_squares(tree)
        assert np.max(np.abs(estimates - dense_gls_oracle(tree))) < 1e-8

    def test_already_consistent_tree_unchanged(self):
        tree = build_tree((8,), 2)
        gen = np.random.default_rng(11)
        for node in tree.nodes():
            node.noise_scale = 1.0
        # assign leaves then propagate exact sums upward
        def fill(node):
            if node.is_leaf:
                node.noisy = float(gen.uniform(0, 10))
                return node.noisy
            node.noisy = sum(fill(child) for child in node.children)
            return node.noisy

        fill(tree.root)
        before = {id(n): n.noisy for n in tree.nodes()}
        tree_least_squares(tree)
        for node in tree.nodes():
            assert node.estimate == pytest.approx(before[id(node)], abs=1e-9)

    def test_exact_leaves_dominate_noisy_root(self):
        tree = build_tree((4,), 2)
        tree.root.noisy, tree.root.noise_scale = 100.0, 1.0
        leaf_values = [1.0, 2.0, 3.0, 4.0]
        for leaf, value in zip(tree.leaves(), leaf_values):
            leaf.noisy, leaf.noise_scale = value, 0.0
        for node in tree.nodes():
            if not node.is_leaf and node is not tree.root:
                node.noisy, node.noise_scale = 0.0, 1e6
        estimates = tree_least_squares(tree)
        assert np.array_equal(estimates, leaf_values)

    def test_unmeasured_subtree_spreads_uniformly(self):
        tree = build_tree((4,), 2)
        tree.root.noisy, tree.root.noise_scale = 8.0, 1.0
        estimates = tree_least_squares(tree)
        assert np.allclose(estimates, [2.0, 2.0, 2.0, 2.0])
        assert np.allclose(spread_leaves(tree), [2.0, 2.0, 2.0, 2.0])

    def test_malformed_tree_rejected(self):
        left = TreeNode(box=((0, 1),), depth=1)
        right = TreeNode(box=((1, 3),), depth=1)  # extends beyond the parent
        root = TreeNode(box=((0, 2),), depth=0, children=[left, right])
        tree = NoisyTree((2,), 2, root)
        with pytest.raises(MalformedTreeError):
            validate_tree(tree)

    def test_2d_tree_tiles_domain(self):
        tree = build_tree((6, 10), 4)
        validate_tree(tree)
        seen = np.zeros((6, 10), dtype=int)
        for leaf in tree.leaves():
            (r0, r1), (c0, c1) = leaf.box
            seen[r0:r1, c0:c1] += 1
        assert np.all(seen == 1)
