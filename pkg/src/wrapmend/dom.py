"""Lenient HTML parsing into a positional DOM, plus a canonical serialization.

The parser is deliberately forgiving: real pages close tags implicitly,
interleave them wrongly, or stop mid-element, and a wrapper engine has to
produce *some* stable tree for all of them.  Recovery follows the common
browser conventions (void elements, implied end tags, synthesized html
root) without attempting full spec-grade tree construction.

Only elements become nodes.  Text is attached to its owning element with
runs of whitespace collapsed, so that parse -> serialize -> parse is a
fixed point even though the serializer indents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator, Optional

NodePath = tuple  # tuple[int, ...]; element-child indices from the root, () is the root


class ParseError(ValueError):
    pass


class PathError(LookupError):
    """A NodePath does not resolve inside the tree it was applied to."""


VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Raw-text elements: their content is not markup and html.parser will not
# decode entities inside them on a re-parse, so we drop it rather than emit
# text that cannot round-trip.  Extraction never targets script or CSS.
RAWTEXT_ELEMENTS = frozenset({"script", "style"})

# Start tags that implicitly close an open <p>.
_P_CLOSERS = frozenset(
    "address article aside blockquote details div dl fieldset figcaption "
    "figure footer form h1 h2 h3 h4 h5 h6 header hr main menu nav ol p pre "
    "section table ul".split()
)

# CLOSES_ON_START[tag] = labels popped from the open stack (repeatedly, while
# on top) when <tag> starts.  Mirrors the usual implied-end-tag rules.
CLOSES_ON_START: dict = {
    "li": {"li", "p"},
    "dt": {"dt", "dd", "p"},
    "dd": {"dt", "dd", "p"},
    "tr": {"tr", "td", "th", "p"},
    "td": {"td", "th", "p"},
    "th": {"td", "th", "p"},
    "tbody": {"tbody", "thead", "tfoot", "tr", "td", "th", "p"},
    "thead": {"tbody", "thead", "tfoot", "tr", "td", "th", "p"},
    "tfoot": {"tbody", "thead", "tfoot", "tr", "td", "th", "p"},
    "option": {"option"},
    "optgroup": {"option", "optgroup"},
}
for _tag in _P_CLOSERS:
    CLOSES_ON_START.setdefault(_tag, set()).add("p")


def _collapse_ws(s: str) -> str:
    return " ".join(s.split())


@dataclass(eq=False)
class DomNode:
    """One element.  Equality is structural (label, attributes, text,
    children); positional metadata is excluded so a detached copy of a
    subtree compares equal to the original."""

    label: str
    attributes: dict = field(default_factory=dict)
    text: str = ""
    children: list = field(default_factory=list)
    parent_path: Optional[NodePath] = None
    sibling_index: int = 0
    sibling_count: int = 1  # siblings including self; 1 for a root

    @property
    def degree(self) -> int:
        return len(self.children)

    @property
    def path(self) -> NodePath:
        if self.parent_path is None:
            return ()
        return self.parent_path + (self.sibling_index,)

    def __eq__(self, other):
        if not isinstance(other, DomNode):
            return NotImplemented
        return (
            self.label == other.label
            and self.attributes == other.attributes
            and self.text == other.text
            and self.children == other.children
        )

    # structural eq with identity hash: nodes are used as memo keys by id,
    # never as structural dict keys
    __hash__ = object.__hash__

    def __repr__(self):
        return "DomNode(%r, attrs=%r, text=%r, %d children)" % (
            self.label,
            self.attributes,
            self.text,
            len(self.children),
        )


@dataclass
class DomTree:
    root: DomNode
    source_id: str = ""
    node_count: int = 0

    def __post_init__(self):
        if self.node_count == 0:
            self.node_count = _freeze(self.root)

    def resolve(self, path: NodePath) -> DomNode:
        return resolve(self, path)

    def __eq__(self, other):
        if not isinstance(other, DomTree):
            return NotImplemented
        return self.root == other.root


def _freeze(root: DomNode) -> int:
    """Assign parent_path / sibling_index / sibling_count below root and
    return the subtree's node count.  Root is treated as having no siblings."""
    root.parent_path = None
    root.sibling_index = 0
    root.sibling_count = 1
    count = 0
    stack = [root]
    while stack:
        node = stack.pop()
        count += 1
        path = node.path
        n = len(node.children)
        for i, child in enumerate(node.children):
            child.parent_path = path
            child.sibling_index = i
            child.sibling_count = n
            stack.append(child)
    return count


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        # sentinel collects top-level content; resolved in finish()
        self.sentinel = DomNode("#document")
        self.stack = [self.sentinel]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        closers = CLOSES_ON_START.get(tag)
        if closers:
            while len(self.stack) > 1 and self.stack[-1].label in closers:
                self.stack.pop()
        attributes = {}
        for name, value in attrs:
            name = name.lower()
            if name not in attributes:  # first occurrence wins
                attributes[name] = value if value is not None else ""
        node = DomNode(tag, attributes)
        self.stack[-1].children.append(node)
        if tag not in VOID_ELEMENTS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        tag = tag.lower()
        self.handle_starttag(tag, attrs)
        if tag not in VOID_ELEMENTS and self.stack[-1].label == tag:
            self.stack.pop()

    def handle_endtag(self, tag):
        tag = tag.lower()
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].label == tag:
                del self.stack[i:]
                return
        # no matching open tag: ignore

    def handle_data(self, data):
        node = self.stack[-1]
        if node.label in RAWTEXT_ELEMENTS:
            return
        seg = _collapse_ws(data)
        if not seg:
            return
        node.text = node.text + " " + seg if node.text else seg

    # comments, doctype, processing instructions: dropped
    def handle_comment(self, data):
        pass

    def handle_decl(self, decl):
        pass

    def handle_pi(self, data):
        pass

    def finish(self, synthesize_root: bool) -> DomNode:
        top = self.sentinel.children
        if synthesize_root:
            if len(top) == 1 and top[0].label == "html" and not self.sentinel.text:
                return top[0]
            root = DomNode("html")
            root.children = top
            root.text = self.sentinel.text
            return root
        if len(top) != 1:
            raise ParseError("expected a single root element, got %d" % len(top))
        if self.sentinel.text:
            raise ParseError("unexpected text outside the root element")
        return top[0]


def parse_html(source, source_id: str = "") -> DomTree:
    """Parse a full page.  Never raises on malformed markup; an empty or
    element-free document yields a bare synthesized <html> root."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    builder = _TreeBuilder()
    builder.feed(source)
    builder.close()
    root = builder.finish(synthesize_root=True)
    return DomTree(root=root, source_id=source_id)


def parse_snippet(source) -> DomNode:
    """Parse a serialized subtree (one root element, e.g. a stored example).

    Raises ParseError when the snippet does not contain exactly one
    top-level element.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    builder = _TreeBuilder()
    builder.feed(source)
    builder.close()
    root = builder.finish(synthesize_root=False)
    _freeze(root)
    return root


_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;"}
_ATTR_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;"}


def _escape(s: str, table) -> str:
    return re.sub(r"[&<>\"]", lambda m: table.get(m.group(0), m.group(0)), s)


def serialize(node, indent: int = 2) -> str:
    """Canonical serialization: indented, lowercase tags, attributes in
    alphabetical order (serialization only; attribute order on the node is
    source order), text right after the open tag, void elements
    self-closed.  Feeding the output back to parse_html/parse_snippet
    reproduces the tree exactly."""
    if isinstance(node, DomTree):
        node = node.root
    lines = []
    _serialize_into(node, 0, indent, lines)
    return "\n".join(lines) + "\n"


def _serialize_into(node: DomNode, depth: int, indent: int, lines: list):
    pad = " " * (indent * depth)
    parts = [node.label]
    for name in sorted(node.attributes):
        parts.append('%s="%s"' % (name, _escape(node.attributes[name], _ATTR_ESCAPES)))
    open_tag = "<" + " ".join(parts) + ">"
    text = _escape(node.text, _TEXT_ESCAPES) if node.text else ""
    if node.label in VOID_ELEMENTS and not node.children and not node.text:
        lines.append(pad + "<" + " ".join(parts) + "/>")
        return
    if not node.children:
        lines.append("%s%s%s</%s>" % (pad, open_tag, text, node.label))
        return
    lines.append(pad + open_tag + text)
    for child in node.children:
        _serialize_into(child, depth + 1, indent, lines)
    lines.append("%s</%s>" % (pad, node.label))


def degree(node: DomNode) -> int:
    """Number of element children."""
    return len(node.children)


def sibling_count(node: DomNode) -> int:
    """Number of siblings including the node itself; 1 for a tree root."""
    return node.sibling_count


def resolve(tree, path: NodePath) -> DomNode:
    """Walk a path of child indices from the root.  () resolves to the root."""
    node = tree.root if isinstance(tree, DomTree) else tree
    for step in path:
        if step < 0 or step >= len(node.children):
            raise PathError("no node at path %r (failed at step %r)" % (path, step))
        node = node.children[step]
    return node


def resolve_in(node: DomNode, path: NodePath) -> DomNode:
    """Resolve a relative path below an arbitrary node (e.g. a stored
    example's residual path inside a matched candidate)."""
    return resolve(node, path)


def enumerate_subtrees(tree, label: Optional[str] = None):
    """All (path, node) pairs in document order, optionally filtered by label."""
    root = tree.root if isinstance(tree, DomTree) else tree
    out = []
    for path, node in _walk(root, ()):
        if label is None or node.label == label:
            out.append((path, node))
    return out


def _walk(node: DomNode, path: NodePath) -> Iterator:
    yield path, node
    for i, child in enumerate(node.children):
        yield from _walk(child, path + (i,))


def ancestor(tree, path: NodePath, levels: int):
    """Climb `levels` steps up from `path`, clamped at the root.

    Returns (ancestor_path, ancestor_node, residual_path) where
    residual_path leads from the ancestor back down to the original node.
    levels=0 returns the node itself with an empty residual.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    resolve(tree, path)  # validate before slicing
    cut = max(0, len(path) - levels)
    anc_path = path[:cut]
    residual = path[cut:]
    return anc_path, resolve(tree, anc_path), residual


def detach_subtree(node: DomNode) -> DomNode:
    """Deep copy re-rooted at the node: the copy has no parent and
    sibling_count 1, so it scores as a standalone tree."""
    copy = _copy_node(node)
    _freeze(copy)
    return copy


def _copy_node(node: DomNode) -> DomNode:
    return DomNode(
        label=node.label,
        attributes=dict(node.attributes),
        text=node.text,
        children=[_copy_node(c) for c in node.children],
    )


def subtree_size(node: DomNode) -> int:
    return 1 + sum(subtree_size(c) for c in node.children)


def subtree_text(node: DomNode) -> str:
    """Owned text of the node and all descendants, document order,
    space-joined.  Used for content-anchor detection."""
    parts = []
    for _, n in _walk(node, ()):
        if n.text:
            parts.append(n.text)
    return " ".join(parts)
