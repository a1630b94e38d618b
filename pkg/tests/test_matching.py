from __future__ import annotations

import random

import numpy as np
import pytest

from wrapmend.dom import DomTree, parse_html, parse_snippet, subtree_size
from wrapmend.matching import (
    DEFAULT_LABELER,
    Labeler,
    best_matches,
    match_tables,
    normalized_stm,
    simple_tree_matching,
    weighted_tree_matching,
)
from wrapmend import kernels

from conftest import build_node, build_tree, random_node, random_tree


# --- brute-force oracle -----------------------------------------------------
#
# Independent of the DP: enumerates every order-preserving injective child
# pairing explicitly and maximises over the sums.  Exponential, fine for the
# small trees it is used on.

def monotone_matchings(m, n):
    def rec(i, j):
        yield []
        for ii in range(i, m):
            for jj in range(j, n):
                for rest in rec(ii + 1, jj + 1):
                    yield [(ii, jj)] + rest

    return rec(0, 0)


def oracle_stm(a, b, labeler=DEFAULT_LABELER):
    if labeler.key(a) != labeler.key(b):
        return 0
    best = 0
    for matching in monotone_matchings(len(a.children), len(b.children)):
        total = sum(oracle_stm(a.children[i], b.children[j], labeler) for i, j in matching)
        best = max(best, total)
    return 1 + best


def oracle_wtm(a, b, labeler=DEFAULT_LABELER):
    if labeler.key(a) != labeler.key(b):
        return 0.0
    m, n = len(a.children), len(b.children)
    if m == 0 or n == 0:
        return 1.0
    best = 0.0
    for matching in monotone_matchings(m, n):
        total = sum(oracle_wtm(a.children[i], b.children[j], labeler) for i, j in matching)
        best = max(best, total)
    return best / max(m, n)


def t(src):
    return parse_snippet(src)


class TestSimpleTreeMatching:
    def test_identical_trees_count_all_nodes(self):
        a = t("<a><b></b><c></c></a>")
        assert simple_tree_matching(a, a) == 3

    def test_partial_overlap(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><b></b></a>")
        assert simple_tree_matching(a, b) == 2

    def test_root_label_mismatch_scores_zero(self):
        assert simple_tree_matching(t("<a></a>"), t("<b></b>")) == 0

    def test_order_preserving(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><c></c><b></b></a>")
        # only one of the two pairs can be kept without crossing
        assert simple_tree_matching(a, b) == 2

    def test_matches_oracle_on_random_trees(self):
        rng = random.Random(101)
        for _ in range(120):
            a = random_node(rng, max_depth=2, max_branch=2, labels=("a", "b", "c"))
            b = random_node(rng, max_depth=2, max_branch=2, labels=("a", "b", "c"))
            if rng.random() < 0.5:
                b.label = a.label
            assert simple_tree_matching(a, b) == oracle_stm(a, b)

    def test_normalized_range_and_value(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><b></b></a>")
        assert normalized_stm(a, b) == pytest.approx(0.8)
        assert normalized_stm(a, a) == 1.0
        assert normalized_stm(t("<a></a>"), t("<b></b>")) == 0.0


class TestWeightedTreeMatching:
    def test_dropped_sibling_halves_score(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><b></b></a>")
        assert weighted_tree_matching(a, b) == 0.5

    def test_identical_trees_score_one(self):
        a = t("<a><b></b><c><d></d></c></a>")
        assert weighted_tree_matching(a, a) == 1.0

    def test_single_nodes(self):
        assert weighted_tree_matching(t("<a></a>"), t("<a></a>")) == 1.0
        assert weighted_tree_matching(t("<a></a>"), t("<b></b>")) == 0.0

    def test_leaf_against_branch(self):
        # one side childless: the else branch contributes the root's weight
        a = t("<a></a>")
        b = t("<a><b></b><c></c></a>")
        assert weighted_tree_matching(a, b) == 1.0

    def test_reorder_costs_half(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><c></c><b></b></a>")
        assert weighted_tree_matching(a, b) == 0.5

    def test_nested_discount(self):
        a = t("<a><b><d></d></b><c></c></a>")
        b = t("<a><b><d></d></b></a>")
        assert weighted_tree_matching(a, b) == 0.5

    def test_matches_oracle_on_random_trees(self):
        rng = random.Random(202)
        for _ in range(120):
            a = random_node(rng, max_depth=2, max_branch=2, labels=("a", "b", "c"))
            b = random_node(rng, max_depth=2, max_branch=2, labels=("a", "b", "c"))
            if rng.random() < 0.5:
                b.label = a.label
            got = weighted_tree_matching(a, b)
            assert got == pytest.approx(oracle_wtm(a, b), abs=1e-12)

    def test_self_identity_random(self, rng):
        for _ in range(200):
            tree = random_tree(rng, max_depth=5, max_branch=4)
            assert abs(weighted_tree_matching(tree.root, tree.root) - 1.0) <= 1e-12

    def test_symmetry_random(self, rng):
        for _ in range(200):
            a = random_node(rng, max_depth=4, max_branch=3)
            b = random_node(rng, max_depth=4, max_branch=3)
            assert weighted_tree_matching(a, b) == weighted_tree_matching(b, a)

    def test_score_range(self, rng):
        for _ in range(200):
            a = random_node(rng, max_depth=4, max_branch=3)
            b = random_node(rng, max_depth=4, max_branch=3)
            s = weighted_tree_matching(a, b)
            assert 0.0 <= s <= 1.0 + 1e-12

    def test_stricter_labeler_never_raises_score(self, rng):
        loose = Labeler()
        strict = Labeler(use_element_name=True, use_class_attribute=True)
        for _ in range(100):
            a = random_node(rng, max_depth=3, max_branch=3, with_attrs=True)
            b = random_node(rng, max_depth=3, max_branch=3, with_attrs=True)
            assert (
                weighted_tree_matching(a, b, strict)
                <= weighted_tree_matching(a, b, loose) + 1e-12
            )


class TestLabeler:
    def test_at_least_one_component(self):
        with pytest.raises(ValueError):
            Labeler(use_element_name=False)

    def test_id_component_splits_labels(self):
        a = build_node("div", attrs={"id": "x"})
        b = build_node("div", attrs={"id": "y"})
        assert simple_tree_matching(a, b) == 1
        by_id = Labeler(use_id_attribute=True)
        assert simple_tree_matching(a, b, by_id) == 0

    def test_class_component(self):
        a = build_node("div", attrs={"class": "k"})
        b = build_node("div", attrs={"class": "k"})
        c = build_node("div")
        lab = Labeler(use_class_attribute=True)
        assert simple_tree_matching(a, b, lab) == 1
        assert simple_tree_matching(a, c, lab) == 0

    def test_round_trip(self):
        lab = Labeler(use_id_attribute=True)
        assert Labeler.from_dict(lab.to_dict()) == lab


class TestMatchTables:
    def test_shapes_and_border(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><b></b></a>")
        comp = match_tables(a, b)
        assert (comp.m, comp.n) == (2, 1)
        assert comp.M.shape == (3, 2)
        assert comp.W.shape == (2, 1)
        assert np.all(comp.M[0, :] == 0) and np.all(comp.M[:, 0] == 0)

    def test_monotone_tables(self, rng):
        for _ in range(50):
            a = random_node(rng, max_depth=3, max_branch=3)
            b = random_node(rng, max_depth=3, max_branch=3)
            b.label = a.label
            for algorithm in ("simple", "weighted"):
                comp = match_tables(a, b, algorithm=algorithm)
                assert np.all(np.diff(comp.M, axis=0) >= 0)
                assert np.all(np.diff(comp.M, axis=1) >= 0)

    def test_weighted_last_cell_is_score(self):
        a = t("<a><b></b><c></c></a>")
        b = t("<a><b></b></a>")
        comp = match_tables(a, b, algorithm="weighted")
        assert comp.M[-1, -1] == weighted_tree_matching(a, b)

    def test_unknown_algorithm_rejected(self):
        a = t("<a></a>")
        with pytest.raises(ValueError):
            match_tables(a, a, algorithm="fuzzy")


class TestBestMatches:
    def test_verbatim_subtree_scores_one(self):
        page = parse_html(
            "<html><body><div><p>x</p><p>y</p></div><div><p>z</p></div></body></html>"
        )
        stored = t("<div><p>a</p><p>b</p></div>")  # text is not part of the label
        ranked = best_matches(stored, page)
        assert ranked[0].score == 1.0
        assert ranked[0].rank == 1
        assert ranked[0].path == (0, 0)

    def test_scores_and_order(self):
        page = parse_html(
            "<html><body><div><p>x</p><p>y</p></div><div><p>z</p></div></body></html>"
        )
        stored = t("<div><p>a</p><p>b</p></div>")
        ranked = best_matches(stored, page)
        assert [c.path for c in ranked] == [(0, 0), (0, 1)]
        assert [c.score for c in ranked] == [1.0, 0.5]
        assert [c.rank for c in ranked] == [1, 2]

    def test_ties_break_by_document_order(self):
        page = parse_html("<html><body><div><p>x</p></div><div><p>y</p></div></body></html>")
        stored = t("<div><p>a</p></div>")
        ranked = best_matches(stored, page)
        assert [c.path for c in ranked] == [(0, 0), (0, 1)]
        assert ranked[0].score == ranked[1].score == 1.0

    def test_min_score_filters(self):
        page = parse_html(
            "<html><body><div><p>x</p><p>y</p></div><div><p>z</p></div></body></html>"
        )
        stored = t("<div><p>a</p><p>b</p></div>")
        assert len(best_matches(stored, page, min_score=0.6)) == 1
        assert best_matches(stored, page, min_score=1.5) == []

    def test_simple_algorithm_uses_normalized_scores(self):
        page = parse_html(
            "<html><body><div><p>x</p><p>y</p></div><div><p>z</p></div></body></html>"
        )
        stored = t("<div><p>a</p><p>b</p></div>")
        ranked = best_matches(stored, page, algorithm="simple")
        assert ranked[0].score == 1.0
        assert ranked[1].score == pytest.approx(0.8)

    def test_candidates_limited_to_matching_root_label(self):
        page = parse_html("<html><body><div></div><span></span></body></html>")
        stored = t("<span></span>")
        ranked = best_matches(stored, page)
        assert [c.path for c in ranked] == [(0, 1)]


class TestKernels:
    def test_weighted_kernel_matches_recursion(self, rng):
        for _ in range(40):
            page = random_tree(rng, max_depth=4, max_branch=3, with_attrs=True)
            stored = random_node(rng, max_depth=3, max_branch=3, with_attrs=True)
            scored = kernels.score_against_page(stored, page, DEFAULT_LABELER, "weighted")
            for path, score in scored:
                node = page.resolve(path)
                assert score == weighted_tree_matching(stored, node)

    def test_simple_kernel_matches_recursion(self, rng):
        for _ in range(40):
            page = random_tree(rng, max_depth=4, max_branch=3, with_attrs=True)
            stored = random_node(rng, max_depth=3, max_branch=3, with_attrs=True)
            scored = kernels.score_against_page(stored, page, DEFAULT_LABELER, "simple")
            for path, score in scored:
                node = page.resolve(path)
                assert score == pytest.approx(normalized_stm(stored, node), abs=1e-15)

    def test_pure_path_matches_jit_path(self, rng, monkeypatch):
        if not kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")
        intern = {}
        stored = random_node(rng, max_depth=3, max_branch=3)
        page = random_tree(rng, max_depth=4, max_branch=3)
        a = kernels.flatten(stored, DEFAULT_LABELER, intern)
        b = kernels.flatten(page.root, DEFAULT_LABELER, intern)

        monkeypatch.delenv(kernels.DISABLE_VAR, raising=False)
        jit_h = kernels.weighted_all_pairs(a, b)
        jit_s = kernels.simple_all_pairs(a, b)
        monkeypatch.setenv(kernels.DISABLE_VAR, "1")
        py_h = kernels.weighted_all_pairs(a, b)
        py_s = kernels.simple_all_pairs(a, b)

        assert np.array_equal(jit_h, py_h)
        assert np.array_equal(jit_s, py_s)

    def test_flatten_preorder_invariants(self, rng):
        tree = random_tree(rng, max_depth=4, max_branch=3)
        flat = kernels.flatten(tree.root, DEFAULT_LABELER, {})
        n = flat.labels.shape[0]
        assert flat.paths[0] == ()
        for u in range(n):
            for v in flat.child_idx[flat.child_ptr[u]:flat.child_ptr[u + 1]]:
                assert v > u  # preorder: children after parents
        assert int(flat.sizes[0]) == n
        assert int(flat.sizes[0]) == subtree_size(tree.root)
