"""Tree similarity for wrapper repair.

Two algorithms over element trees:

* simple_tree_matching: the classic top-down dynamic program.  Counts the
  nodes of the largest order- and ancestry-preserving mapping between two
  trees (label-equal pairs only).  Returns an integer count.

* weighted_tree_matching: the same alignment, but every matched node
  contributes 1/max(t', t'') where t', t'' are the sibling counts of the
  compared nodes in their respective trees.  A node's weight is thereby
  shared across its sibling group, which makes the final score relative:
  identical trees score exactly 1.0, and local changes discount the score
  in proportion to the size of the region they disturb rather than the
  raw node count.

The functions here are the plain recursive forms, used directly for
small inputs and as the reference the array kernels are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from wrapmend.dom import DomNode, DomTree, NodePath, enumerate_subtrees, subtree_size


@dataclass(frozen=True)
class Labeler:
    """Controls what counts as a node's label during matching.

    Components are compared in fixed order (element name, id attribute,
    class attribute); disabled or missing components contribute an empty
    segment, so enabling a flag only ever splits label classes further.
    """

    use_element_name: bool = True
    use_id_attribute: bool = False
    use_class_attribute: bool = False

    def __post_init__(self):
        if not (self.use_element_name or self.use_id_attribute or self.use_class_attribute):
            raise ValueError("at least one label component must be enabled")

    def key(self, node: DomNode) -> tuple:
        return (
            node.label if self.use_element_name else "",
            node.attributes.get("id", "") if self.use_id_attribute else "",
            node.attributes.get("class", "") if self.use_class_attribute else "",
        )

    def label_string(self, node: DomNode) -> str:
        return "|".join(self.key(node))

    def to_dict(self) -> dict:
        return {
            "element_name": self.use_element_name,
            "id_attribute": self.use_id_attribute,
            "class_attribute": self.use_class_attribute,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Labeler":
        return cls(
            use_element_name=d.get("element_name", True),
            use_id_attribute=d.get("id_attribute", False),
            use_class_attribute=d.get("class_attribute", False),
        )


DEFAULT_LABELER = Labeler()


@dataclass
class MatchComputation:
    """The DP tables for one root pair, kept for inspection and tests.

    M has shape (m+1, n+1) with a zero border; W has shape (m, n) and
    holds the pairwise child scores the alignment maximised over.
    """

    m: int
    n: int
    M: np.ndarray
    W: np.ndarray


@dataclass
class RankedCandidate:
    path: NodePath
    score: float
    rank: int = 0


def simple_tree_matching(a: DomNode, b: DomNode, labeler: Labeler = DEFAULT_LABELER) -> int:
    """Size of the largest top-down order-preserving mapping, roots included."""
    return _stm(a, b, labeler, {})


def _stm(a, b, labeler, memo) -> int:
    if labeler.key(a) != labeler.key(b):
        return 0
    k = (id(a), id(b))
    got = memo.get(k)
    if got is not None:
        return got
    m, n = len(a.children), len(b.children)
    row = [0] * (n + 1)
    for i in range(1, m + 1):
        prev, row = row, [0] * (n + 1)
        ca = a.children[i - 1]
        for j in range(1, n + 1):
            w = _stm(ca, b.children[j - 1], labeler, memo)
            row[j] = max(row[j - 1], prev[j], prev[j - 1] + w)
    memo[k] = out = 1 + row[n]
    return out


def weighted_tree_matching(a: DomNode, b: DomNode, labeler: Labeler = DEFAULT_LABELER) -> float:
    """Sibling-weighted similarity in [0, 1].

    The two arguments are compared as roots of their own trees, so the
    score does not depend on where either subtree sat in its source page;
    sibling counts weight the recursion below the roots.
    """
    return _wtm(a, b, labeler, {})


def _wtm(a, b, labeler, memo) -> float:
    # Context-free form: the caller divides by its own sibling-group size,
    # so this returns the score as if a and b were roots (t = 1).
    if labeler.key(a) != labeler.key(b):
        return 0.0
    m, n = len(a.children), len(b.children)
    if m == 0 or n == 0:
        return 1.0
    k = (id(a), id(b))
    got = memo.get(k)
    if got is not None:
        return got
    denom = float(max(m, n))
    row = [0.0] * (n + 1)
    for i in range(1, m + 1):
        prev, row = row, [0.0] * (n + 1)
        ca = a.children[i - 1]
        for j in range(1, n + 1):
            w = _wtm(ca, b.children[j - 1], labeler, memo) / denom
            row[j] = max(row[j - 1], prev[j], prev[j - 1] + w)
    memo[k] = out = row[n]
    return out


def normalized_stm(a: DomNode, b: DomNode, labeler: Labeler = DEFAULT_LABELER) -> float:
    """Simple matching scaled to [0, 1]: 2*STM / (|a| + |b|).

    Gives the simple algorithm a score comparable against thresholds and
    min_score, which are defined on the unit interval.
    """
    return 2.0 * _stm(a, b, labeler, {}) / (subtree_size(a) + subtree_size(b))


def match_tables(
    a: DomNode, b: DomNode, labeler: Labeler = DEFAULT_LABELER, algorithm: str = "weighted"
) -> MatchComputation:
    """Expose the root-level DP tables for one comparison."""
    _check_algorithm(algorithm)
    m, n = len(a.children), len(b.children)
    W = np.zeros((m, n), dtype=np.float64)
    memo: dict = {}
    if labeler.key(a) == labeler.key(b):
        denom = float(max(m, n)) if m and n else 1.0
        for i in range(m):
            for j in range(n):
                if algorithm == "weighted":
                    W[i, j] = _wtm(a.children[i], b.children[j], labeler, memo) / denom
                else:
                    W[i, j] = _stm(a.children[i], b.children[j], labeler, memo)
    M = np.zeros((m + 1, n + 1), dtype=np.float64)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            M[i, j] = max(M[i, j - 1], M[i - 1, j], M[i - 1, j - 1] + W[i - 1, j - 1])
    return MatchComputation(m=m, n=n, M=M, W=W)


def _check_algorithm(algorithm: str):
    if algorithm not in ("simple", "weighted"):
        raise ValueError("unknown algorithm %r" % (algorithm,))


def best_matches(
    stored: DomNode,
    page: DomTree,
    labeler: Labeler = DEFAULT_LABELER,
    algorithm: str = "weighted",
    min_score: float = 0.0,
) -> list:
    """Score the stored subtree against every same-label subtree of the page.

    Returns RankedCandidates sorted by score descending, ties broken by
    document order, ranks starting at 1.  Scores are weighted_tree_matching
    values or normalized_stm values depending on `algorithm`; both live in
    [0, 1], so min_score > 1 yields an empty list.
    """
    _check_algorithm(algorithm)
    from wrapmend import kernels  # deferred: importing numba is not free

    scored = kernels.score_against_page(stored, page, labeler, algorithm)
    picked = [(path, score) for path, score in scored if score >= min_score]
    picked.sort(key=lambda it: (-it[1], it[0]))
    return [RankedCandidate(path=p, score=s, rank=i + 1) for i, (p, s) in enumerate(picked)]
