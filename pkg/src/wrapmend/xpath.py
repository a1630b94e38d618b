"""A small XPath dialect: enough to address nodes robustly, small enough
to generate, relax, and reason about mechanically.

Supported: child (/) and descendant (//) axes, name tests with *,
positional predicates [k], attribute equality [@a='v'], attribute
fragments [matches(@a,'regex')], and text equality [text()='v'].
Expressions are absolute or relative (leading ./ or .//, or a bare name).

Position predicates follow XPath proper: with the descendant axis they
apply per parent group, not over the flattened result.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from wrapmend.dom import DomTree, NodePath, resolve, subtree_text
from wrapmend.constraints import validate_results


class XPathError(ValueError):
    pass


class PlanExhausted(LookupError):
    """Every locator in a fallback plan failed its constraints."""

    def __init__(self, message, tried=()):
        super().__init__(message)
        self.tried = list(tried)


@dataclass(frozen=True)
class Position:
    index: int  # 1-based, within the step's per-parent candidate group


@dataclass(frozen=True)
class AttrEquals:
    name: str
    value: str


@dataclass(frozen=True)
class AttrFragment:
    name: str
    pattern: str


@dataclass(frozen=True)
class TextEquals:
    value: str


@dataclass(frozen=True)
class Step:
    axis: str  # "child" or "descendant"
    name: str  # element name or "*"
    predicates: tuple = ()

    def __post_init__(self):
        if self.axis not in ("child", "descendant"):
            raise XPathError("unknown axis %r" % (self.axis,))


@dataclass(frozen=True)
class XPathExpr:
    steps: tuple
    absolute: bool = True

    def to_string(self) -> str:
        parts = []
        for i, step in enumerate(self.steps):
            sep = "//" if step.axis == "descendant" else "/"
            if not self.absolute and i == 0:
                sep = ".//" if step.axis == "descendant" else ""
            parts.append(sep + _step_string(step))
        return "".join(parts)

    def __str__(self):
        return self.to_string()


def _quote(value: str) -> str:
    # XPath string literals have no escapes; pick whichever quote is free
    if "'" not in value:
        return "'%s'" % value
    if '"' not in value:
        return '"%s"' % value
    raise XPathError("cannot quote value containing both quote characters: %r" % value)


def _pred_string(pred) -> str:
    if isinstance(pred, Position):
        return "[%d]" % pred.index
    if isinstance(pred, AttrEquals):
        return "[@%s=%s]" % (pred.name, _quote(pred.value))
    if isinstance(pred, AttrFragment):
        return "[matches(@%s,%s)]" % (pred.name, _quote(pred.pattern))
    if isinstance(pred, TextEquals):
        return "[text()=%s]" % _quote(pred.value)
    raise XPathError("unknown predicate %r" % (pred,))


def _step_string(step: Step) -> str:
    return step.name + "".join(_pred_string(p) for p in step.predicates)


_NAME_RE = re.compile(r"[A-Za-z][\w-]*|\*")
_ATTR_EQ_RE = re.compile(r"@([A-Za-z][\w-]*)\s*=\s*(['\"])(.*)\2\s*$", re.S)
_MATCHES_RE = re.compile(r"matches\(\s*@([A-Za-z][\w-]*)\s*,\s*(['\"])(.*)\2\s*\)\s*$", re.S)
_TEXT_EQ_RE = re.compile(r"text\(\)\s*=\s*(['\"])(.*)\1\s*$", re.S)


def parse_xpath(text: str) -> XPathExpr:
    s = text.strip()
    if not s:
        raise XPathError("empty expression")
    absolute = False
    i = 0
    if s.startswith("."):
        if not s.startswith("./"):
            raise XPathError("expected ./ or .// in %r" % text)
        i = 1  # keep the slash(es) for axis detection
    elif s.startswith("/"):
        absolute = True
    steps = []
    first = True
    n = len(s)
    while i < n:
        if s.startswith("//", i):
            axis = "descendant"
            i += 2
        elif s.startswith("/", i):
            axis = "child"
            i += 1
        elif first and not absolute:
            axis = "child"
        else:
            raise XPathError("expected step separator at %d in %r" % (i, text))
        first = False
        m = _NAME_RE.match(s, i)
        if not m:
            raise XPathError("expected element name at %d in %r" % (i, text))
        name = m.group(0)
        i = m.end()
        predicates = []
        while i < n and s[i] == "[":
            inner, i = _scan_bracket(s, i, text)
            predicates.append(_parse_predicate(inner, text))
        steps.append(Step(axis=axis, name=name, predicates=tuple(predicates)))
    if not steps:
        raise XPathError("no steps in %r" % text)
    return XPathExpr(steps=tuple(steps), absolute=absolute)


def _scan_bracket(s, i, original):
    """Scan from '[' to its matching ']', honouring quoted strings."""
    j = i + 1
    quote = None
    while j < len(s):
        c = s[j]
        if quote:
            if c == quote:
                quote = None
        elif c in "'\"":
            quote = c
        elif c == "]":
            return s[i + 1:j], j + 1
        j += 1
    raise XPathError("unterminated predicate in %r" % original)


def _parse_predicate(inner: str, original: str):
    inner = inner.strip()
    if inner.isdigit():
        idx = int(inner)
        if idx < 1:
            raise XPathError("positions are 1-based in %r" % original)
        return Position(idx)
    m = _ATTR_EQ_RE.fullmatch(inner)
    if m:
        return AttrEquals(name=m.group(1).lower(), value=m.group(3))
    m = _MATCHES_RE.fullmatch(inner)
    if m:
        pattern = m.group(3)
        try:
            re.compile(pattern)
        except re.error as exc:
            raise XPathError("bad pattern %r: %s" % (pattern, exc))
        return AttrFragment(name=m.group(1).lower(), pattern=pattern)
    m = _TEXT_EQ_RE.fullmatch(inner)
    if m:
        return TextEquals(value=m.group(2))
    raise XPathError("unsupported predicate [%s] in %r" % (inner, original))


# --- evaluation --------------------------------------------------------------

_DOCUMENT = None  # pseudo context above the root, so /html selects the root


def evaluate(expr: XPathExpr, tree: DomTree, context_path: Optional[NodePath] = None) -> list:
    """Paths of all matching nodes, document order, no duplicates."""
    if expr.absolute:
        current = [_DOCUMENT]
    else:
        current = [tuple(context_path or ())]
    for step in expr.steps:
        seen = set()
        collected = []
        for ctx in current:
            for group in _candidate_groups(tree, ctx, step.axis):
                chosen = [
                    (p, node)
                    for p, node in group
                    if step.name == "*" or node.label == step.name
                ]
                for pred in step.predicates:
                    chosen = _filter_predicate(chosen, pred)
                for p, _ in chosen:
                    if p not in seen:
                        seen.add(p)
                        collected.append(p)
        current = sorted(collected)
    return [p for p in current if p is not _DOCUMENT]


def _children_group(tree, path, node):
    return [(path + (i,), c) for i, c in enumerate(node.children)]


def _candidate_groups(tree: DomTree, ctx, axis: str):
    """Candidate nodes for one step, grouped per parent: position
    predicates count within a group, exactly like child:: nodelists."""
    if ctx is _DOCUMENT:
        root_group = [((), tree.root)]
        if axis == "child":
            return [root_group]
        groups = [root_group]
        stack = [((), tree.root)]
    else:
        node = resolve(tree, ctx)
        if axis == "child":
            return [_children_group(tree, ctx, node)]
        groups = []
        stack = [(tuple(ctx), node)]
    while stack:
        path, node = stack.pop()
        group = _children_group(tree, path, node)
        if group:
            groups.append(group)
            stack.extend(group)
    groups.sort(key=lambda g: g[0][0])
    return groups


def _filter_predicate(group, pred):
    if isinstance(pred, Position):
        return [group[pred.index - 1]] if pred.index <= len(group) else []
    if isinstance(pred, AttrEquals):
        return [(p, n) for p, n in group if n.attributes.get(pred.name) == pred.value]
    if isinstance(pred, AttrFragment):
        rx = re.compile(pred.pattern)
        return [
            (p, n)
            for p, n in group
            if pred.name in n.attributes and rx.search(n.attributes[pred.name])
        ]
    if isinstance(pred, TextEquals):
        return [(p, n) for p, n in group if n.text == pred.value]
    raise XPathError("unknown predicate %r" % (pred,))


# --- anchors ------------------------------------------------------------------


@dataclass(frozen=True)
class AnchorPoint:
    path: NodePath
    kind: str  # "unique_id" | "outermost_table" | "main_content"
    relative: Optional[XPathExpr] = None  # filled in by plan generation


def detect_anchors(tree: DomTree) -> list:
    """Stable reference points on a page: elements with page-unique ids,
    tables that are not nested in other tables, and the main content
    block (deepest element holding at least half of the page's text)."""
    anchors = []
    nodes = _all_nodes(tree)

    id_count: dict = {}
    for _, node in nodes:
        v = node.attributes.get("id")
        if v:
            id_count[v] = id_count.get(v, 0) + 1
    for path, node in nodes:
        v = node.attributes.get("id")
        if v and id_count[v] == 1:
            anchors.append(AnchorPoint(path=path, kind="unique_id"))

    for path, node in nodes:
        if node.label == "table" and not _has_ancestor_label(tree, path, "table"):
            anchors.append(AnchorPoint(path=path, kind="outermost_table"))

    total = len(subtree_text(tree.root))
    if total > 0:
        best_path = ()
        for path, node in nodes:
            if len(subtree_text(node)) * 2 >= total and len(path) > len(best_path):
                best_path = path
        anchors.append(AnchorPoint(path=best_path, kind="main_content"))

    anchors.sort(key=lambda a: (a.path, a.kind))
    return anchors


def _all_nodes(tree: DomTree):
    out = []
    stack = [((), tree.root)]
    while stack:
        path, node = stack.pop()
        out.append((path, node))
        for i, c in enumerate(node.children):
            stack.append((path + (i,), c))
    out.sort(key=lambda it: it[0])
    return out


def _has_ancestor_label(tree, path, label) -> bool:
    node = tree.root
    for step in path:
        if node.label == label:
            return True
        node = node.children[step]
    return False


# --- fallback plans -----------------------------------------------------------


@dataclass(frozen=True)
class PlanEntry:
    expr: XPathExpr
    tag: str
    priority: int


@dataclass(frozen=True)
class FallbackPlan:
    best: XPathExpr
    best_tag: str = "positional"
    fallbacks: tuple = ()

    def to_dict(self) -> dict:
        return {
            "xpath_best": {"expr": self.best.to_string(), "tag": self.best_tag},
            "xpath_fallbacks": [
                {"expr": e.expr.to_string(), "tag": e.tag, "priority": e.priority}
                for e in self.fallbacks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FallbackPlan":
        best = d["xpath_best"]
        return cls(
            best=parse_xpath(best["expr"]),
            best_tag=best.get("tag", "positional"),
            fallbacks=tuple(
                PlanEntry(expr=parse_xpath(f["expr"]), tag=f["tag"], priority=f["priority"])
                for f in d.get("xpath_fallbacks", ())
            ),
        )


# priorities: lower tries first; gaps leave room for same-kind entries
PRIO_ID = 10
PRIO_ATTR = 20
PRIO_FRAGMENT = 30
PRIO_STRUCTURAL = 40
PRIO_ANCHOR = 50
PRIO_POSITIONAL = 60
PRIO_RELAX = 61
PRIO_TEXT = 70

# attribute equality candidates, in preference order; id handled separately
_ATTR_PREFERENCE = ("class", "name", "title", "href", "src")


def generate_plan(
    tree: DomTree,
    target: NodePath,
    use_text: bool = False,
    context_path: Optional[NodePath] = None,
    cohort=None,
) -> FallbackPlan:
    """Build a prioritized locator plan for one node.

    The plan's best locator is the highest-priority expression that
    matches the target uniquely on this page; everything else generated
    becomes the ordered fallback list.  With a context_path all
    expressions are relative to that node, otherwise absolute.

    A rule that legitimately matches several nodes (a record list) passes
    the full set as `cohort`; locators then must select exactly that set,
    and per-node heuristics (id, text, trailing index) adjust or drop out.
    """
    target = tuple(target)
    node = resolve(tree, target)
    relative = context_path is not None
    base = tuple(context_path) if relative else None
    if relative and (len(target) < len(base) or target[:len(base)] != base):
        raise XPathError("target %r is not inside context %r" % (target, base))
    wanted = sorted(tuple(p) for p in cohort) if cohort else [target]
    if target not in wanted:
        raise XPathError("target must be part of its own cohort")
    single = len(wanted) == 1

    entries = []

    def consider(expr, tag, priority):
        entries.append(PlanEntry(expr=expr, tag=tag, priority=priority))

    def unique(expr):
        return evaluate(expr, tree, base) == wanted

    def descendant_expr(step, *tail):
        return XPathExpr(steps=(step,) + tail, absolute=not relative)

    # 1. unique id
    own_id = node.attributes.get("id", "")
    if single and own_id and _quotable(own_id):
        expr = descendant_expr(
            Step("descendant", "*", (AttrEquals("id", own_id),))
        )
        if unique(expr):
            consider(expr, "id", PRIO_ID)

    # 2. attribute equality; 3. stable fragments of churned values.  A
    # fragment entry is added even when equality holds today: the volatile
    # part of the value is exactly what tends to change under it.
    prio_attr = PRIO_ATTR
    prio_frag = PRIO_FRAGMENT
    for attr in _ATTR_PREFERENCE:
        value = node.attributes.get(attr, "")
        if not value or not _quotable(value):
            continue
        expr = descendant_expr(
            Step("descendant", node.label, (AttrEquals(attr, value),))
        )
        if unique(expr):
            consider(expr, "attribute", prio_attr)
            prio_attr += 1
        for pattern in _fragment_patterns(value):
            fexpr = descendant_expr(
                Step("descendant", node.label, (AttrFragment(attr, pattern),))
            )
            if unique(fexpr):
                consider(fexpr, "fragment", prio_frag)
                prio_frag += 1
                break

    # 4. structural: the index-free tag path from the scope root
    tag_path = _tag_path_steps(tree, target, base)
    if tag_path:
        expr = XPathExpr(steps=tag_path, absolute=not relative)
        if unique(expr):
            consider(expr, "structural", PRIO_STRUCTURAL)

    # 5. anchor-relative
    prio_anchor = PRIO_ANCHOR
    for anchor in detect_anchors(tree):
        if prio_anchor >= PRIO_POSITIONAL:
            break
        if anchor.kind == "main_content":
            continue  # not expressible as a static locator
        apath = anchor.path
        if not (len(apath) < len(target) and target[:len(apath)] == apath):
            continue
        if base is not None and (len(apath) < len(base) or apath[:len(base)] != base):
            continue
        if anchor.kind == "unique_id":
            anchor_id = resolve(tree, apath).attributes["id"]
            if not _quotable(anchor_id):
                continue
            head = Step("descendant", "*", (AttrEquals("id", anchor_id),))
        else:
            head = Step("descendant", "table")
        tail = _cohort_tail(tree, apath, wanted)
        if tail is None:
            continue
        expr = XPathExpr(steps=(head,) + tail, absolute=not relative)
        if unique(expr):
            consider(expr, "anchor", prio_anchor)
            prio_anchor += 1

    # 6. the full positional path; for a single target it is unique by
    #    construction, and it seeds index relaxation at apply time
    pos_steps = _positional_steps(tree, wanted, base)
    if pos_steps:
        pos_expr = XPathExpr(steps=pos_steps, absolute=not relative)
        if unique(pos_expr):
            consider(pos_expr, "positional", PRIO_POSITIONAL)
            if any(isinstance(p, Position) for s in pos_steps for p in s.predicates):
                consider(pos_expr, "index_relaxation", PRIO_RELAX)

    # 7. text equality, opt-in
    if single and use_text and node.text and _quotable(node.text):
        expr = descendant_expr(Step("descendant", node.label, (TextEquals(node.text),)))
        consider(expr, "textual", PRIO_TEXT)

    entries.sort(key=lambda e: e.priority)
    best = None
    for e in entries:
        if unique(e.expr):
            best = e
            break
    if best is None:
        # target is the scope root itself: positional path is empty
        if target == (base or ()):
            raise XPathError("cannot build a plan for the scope root itself")
        raise XPathError("no unique locator found for %r" % (target,))
    rest = tuple(e for e in entries if e is not best)
    return FallbackPlan(best=best.expr, best_tag=best.tag, fallbacks=rest)


def _quotable(value: str) -> bool:
    return "'" not in value or '"' not in value


def _fragment_patterns(value: str):
    """Stable prefix/suffix regexes for a churned attribute value, longest
    first.  A fragment must be at least 3 chars and a proper substring."""
    out = []
    m = re.match(r"[A-Za-z][A-Za-z_-]{2,}", value)
    if m and len(m.group(0)) < len(value):
        out.append("^" + re.escape(m.group(0)))
    m = re.search(r"[A-Za-z][A-Za-z_-]{2,}$", value)
    if m and len(m.group(0)) < len(value):
        out.append(re.escape(m.group(0)) + "$")
    return out


def _position_of(tree, parent_node, index) -> Optional[int]:
    """1-based position of child `index` among same-label siblings, or None
    when the label is unambiguous (no index needed)."""
    label = parent_node.children[index].label
    same = [i for i, c in enumerate(parent_node.children) if c.label == label]
    if len(same) == 1:
        return None
    return same.index(index) + 1


def _steps_between(tree, top: NodePath, target: NodePath):
    """Child steps from `top` (exclusive) down to target, indexed where a
    label repeats among siblings."""
    steps = []
    node = resolve(tree, top)
    for depth in range(len(top), len(target)):
        idx = target[depth]
        pos = _position_of(tree, node, idx)
        child = node.children[idx]
        preds = (Position(pos),) if pos is not None else ()
        steps.append(Step("child", child.label, preds))
        node = child
    return tuple(steps)


def _cohort_tail(tree, top: NodePath, wanted):
    """Indexed child steps from `top` down to the cohort.  A single target
    gets a fully indexed path; a multi-node cohort must be same-label
    children of one parent and gets an index-free final step (None when
    that shape does not hold)."""
    if len(wanted) == 1:
        target = wanted[0]
        if not (len(top) <= len(target) and target[:len(top)] == top):
            return None
        return _steps_between(tree, top, target)
    parents = {p[:-1] for p in wanted}
    if len(parents) != 1 or any(not p for p in wanted):
        return None
    parent = parents.pop()
    if not (len(top) <= len(parent) and parent[:len(top)] == top):
        return None
    labels = {resolve(tree, p).label for p in wanted}
    if len(labels) != 1:
        return None
    return _steps_between(tree, top, parent) + (Step("child", labels.pop()),)


def _positional_steps(tree, wanted, base):
    if base is None:
        tail = _cohort_tail(tree, (), wanted)
        if tail is None:
            return None
        return (Step("child", tree.root.label),) + tail
    return _cohort_tail(tree, base, wanted)


def _tag_path_steps(tree, target: NodePath, base):
    if base is None:
        steps = [Step("child", tree.root.label)]
        top = ()
    else:
        steps = []
        top = base
    for s in _steps_between(tree, top, target):
        steps.append(Step(s.axis, s.name))
    return tuple(steps)


# --- plan application ---------------------------------------------------------


def relaxation_variants(expr: XPathExpr):
    """Progressively index-free copies of an expression: each variant drops
    one more Position predicate, rightmost first.  Result sets widen
    monotonically because positions only ever filter."""
    positions = [
        (si, pi)
        for si, step in enumerate(expr.steps)
        for pi, pred in enumerate(step.predicates)
        if isinstance(pred, Position)
    ]
    variants = []
    for k in range(1, len(positions) + 1):
        dropped = set(positions[len(positions) - k:])
        steps = []
        for si, step in enumerate(expr.steps):
            preds = tuple(
                p for pi, p in enumerate(step.predicates) if (si, pi) not in dropped
            )
            steps.append(Step(step.axis, step.name, preds))
        variants.append(XPathExpr(steps=tuple(steps), absolute=expr.absolute))
    return variants


def apply_plan(
    plan: FallbackPlan,
    tree: DomTree,
    constraints=(),
    context_path: Optional[NodePath] = None,
):
    """Try the best locator, then each fallback in priority order, until one
    yields results satisfying the constraints.

    Returns (paths, used_tag).  `constraints` may be one constraint or a
    list; with no constraints at all, any non-empty result is accepted.
    Raises PlanExhausted when every locator fails.
    """
    if constraints and not isinstance(constraints, (list, tuple)):
        constraints = [constraints]
    attempts = [(plan.best_tag, plan.best)]
    for entry in plan.fallbacks:
        if entry.tag == "index_relaxation":
            for variant in relaxation_variants(entry.expr):
                attempts.append((entry.tag, variant))
        else:
            attempts.append((entry.tag, entry.expr))
    tried = []
    for tag, expr in attempts:
        paths = evaluate(expr, tree, context_path)
        tried.append((tag, expr.to_string()))
        results = [(p, resolve(tree, p).text) for p in paths]
        if constraints:
            if not validate_results(results, constraints):
                return paths, tag
        elif paths:
            return paths, tag
    raise PlanExhausted("no locator satisfied the constraints", tried=tried)
