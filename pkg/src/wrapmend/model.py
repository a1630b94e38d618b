"""Wrapper data model: hierarchical rules, constraints, adaptation config.

A wrapper is a named, versioned tree of rules.  Each rule carries a
locator plan, integrity constraints (possibly inherited from the wrapper
level), and optionally the machinery that makes it self-repairing: an
adaptation config, a stored example subtree, and a learned template.

Wrapper values are immutable by convention: execution never mutates one,
adaptation builds a new value with a bumped version.  The JSON file
format is pinned by schema/wrapper-v1.schema.json, shipped with the
package and enforced on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import jsonschema

from wrapmend.dom import (
    DomNode,
    DomTree,
    ancestor,
    detach_subtree,
    parse_snippet,
    resolve,
    resolve_in,
    serialize,
)
from wrapmend.constraints import constraint_from_dict
from wrapmend.matching import DEFAULT_LABELER, Labeler
from wrapmend.template import TreeTemplate
from wrapmend.xpath import FallbackPlan


class WrapperFormatError(ValueError):
    """A wrapper file that does not conform to the shipped schema."""


TRIGGERS = ("top_down", "bottom_up", "process_flow")
ALGORITHMS = ("simple", "weighted")


@dataclass(frozen=True)
class AdaptationConfig:
    """Per-rule knobs for the self-repair pipeline.

    threshold is either a constant or a (low, high) interval the search
    may move within; last_chosen records where the previous adaptation
    settled.  ancestor_level None defers to the capture-time default
    (2 for leaf targets, 0 otherwise).
    """

    algorithm: str = "weighted"
    threshold: object = (0.4, 0.95)
    last_chosen: Optional[float] = None
    labeler: Labeler = DEFAULT_LABELER
    ancestor_level: Optional[int] = None
    triggers: frozenset = frozenset()
    update_stored: bool = True
    algorithm_order: tuple = ()
    cascade_opt_out: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError("unknown algorithm %r" % (self.algorithm,))
        thr = self.threshold
        if isinstance(thr, (int, float)) and not isinstance(thr, bool):
            thr = float(thr)
            if not 0.0 <= thr <= 1.0:
                raise ValueError("threshold %r outside [0, 1]" % (thr,))
        else:
            low, high = thr
            low, high = float(low), float(high)
            if not 0.0 <= low <= high <= 1.0:
                raise ValueError("bad threshold interval (%r, %r)" % (low, high))
            thr = (low, high)
        object.__setattr__(self, "threshold", thr)
        triggers = frozenset(self.triggers)
        unknown = triggers - set(TRIGGERS)
        if unknown:
            raise ValueError("unknown triggers %s" % (sorted(unknown),))
        object.__setattr__(self, "triggers", triggers)
        order = tuple(self.algorithm_order)
        for name in order:
            if name not in ALGORITHMS:
                raise ValueError("unknown algorithm %r in order" % (name,))
        object.__setattr__(self, "algorithm_order", order)
        if self.ancestor_level is not None and self.ancestor_level < 0:
            raise ValueError("ancestor_level must be non-negative")

    @property
    def interval(self) -> tuple:
        thr = self.threshold
        if isinstance(thr, tuple):
            return thr
        return (thr, thr)

    def algorithms(self) -> tuple:
        """Algorithms in trial order."""
        return self.algorithm_order or (self.algorithm,)

    def to_dict(self) -> dict:
        thr = self.threshold
        if isinstance(thr, tuple):
            tdict = {"low": thr[0], "high": thr[1]}
        else:
            tdict = {"constant": thr}
        return {
            "algorithm": self.algorithm,
            "threshold": tdict,
            "last_chosen": self.last_chosen,
            "labeler": self.labeler.to_dict(),
            "ancestor_level": self.ancestor_level,
            "triggers": sorted(self.triggers),
            "update_stored": self.update_stored,
            "algorithm_order": list(self.algorithm_order),
            "cascade_opt_out": self.cascade_opt_out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdaptationConfig":
        tdict = d["threshold"]
        if "constant" in tdict:
            threshold = float(tdict["constant"])
        else:
            threshold = (float(tdict["low"]), float(tdict["high"]))
        return cls(
            algorithm=d["algorithm"],
            threshold=threshold,
            last_chosen=d.get("last_chosen"),
            labeler=Labeler.from_dict(d.get("labeler", {})),
            ancestor_level=d.get("ancestor_level"),
            triggers=frozenset(d.get("triggers", ())),
            update_stored=d.get("update_stored", True),
            algorithm_order=tuple(d.get("algorithm_order", ())),
            cascade_opt_out=d.get("cascade_opt_out", False),
        )


@dataclass
class StoredExample:
    """A captured result subtree plus where the target sits inside it.

    For leaf targets the subtree is rooted a few ancestors up so that
    similarity search has context to work with; residual_path walks from
    the stored root back down to the actual target.
    """

    subtree: DomNode
    residual_path: tuple = ()
    captured_from: str = ""
    captured_at: str = ""

    def __post_init__(self):
        self.residual_path = tuple(self.residual_path)
        try:
            resolve_in(self.subtree, self.residual_path)
        except LookupError:
            raise ValueError(
                "residual_path %r does not resolve inside the stored subtree"
                % (self.residual_path,)
            )

    def target(self) -> DomNode:
        return resolve_in(self.subtree, self.residual_path)

    def to_dict(self) -> dict:
        return {
            "html": serialize(self.subtree),
            "residual_path": list(self.residual_path),
            "captured_from": self.captured_from,
            "captured_at": self.captured_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StoredExample":
        return cls(
            subtree=parse_snippet(d["html"]),
            residual_path=tuple(d.get("residual_path", ())),
            captured_from=d.get("captured_from", ""),
            captured_at=d.get("captured_at", ""),
        )


@dataclass
class Rule:
    name: str
    plan: FallbackPlan
    constraints: tuple = ()
    adaptation: Optional[AdaptationConfig] = None
    stored_example: Optional[StoredExample] = None
    template: Optional[TreeTemplate] = None
    children: tuple = ()  # evaluated relative to each match of this rule

    def __post_init__(self):
        if not self.name or "/" in self.name:
            raise ValueError("bad rule name %r" % (self.name,))
        self.constraints = tuple(self.constraints)
        self.children = tuple(self.children)
        names = [c.name for c in self.children]
        if len(names) != len(set(names)):
            raise ValueError("duplicate child rule names under %r" % (self.name,))

    def to_dict(self) -> dict:
        d = {"name": self.name}
        d.update(self.plan.to_dict())
        d["constraints"] = [c.to_dict() for c in self.constraints]
        d["adaptation"] = self.adaptation.to_dict() if self.adaptation else None
        d["stored_example"] = (
            self.stored_example.to_dict() if self.stored_example else None
        )
        d["template"] = self.template.to_dict() if self.template else None
        d["children"] = [c.to_dict() for c in self.children]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        return cls(
            name=d["name"],
            plan=FallbackPlan.from_dict(d),
            constraints=tuple(
                constraint_from_dict(c) for c in d.get("constraints", ())
            ),
            adaptation=(
                AdaptationConfig.from_dict(d["adaptation"])
                if d.get("adaptation")
                else None
            ),
            stored_example=(
                StoredExample.from_dict(d["stored_example"])
                if d.get("stored_example")
                else None
            ),
            template=(
                TreeTemplate.from_dict(d["template"]) if d.get("template") else None
            ),
            children=tuple(cls.from_dict(c) for c in d.get("children", ())),
        )


@dataclass
class Wrapper:
    name: str
    version: int = 1
    root_rules: tuple = ()
    constraints: tuple = ()  # wrapper-level defaults, inherited by rules

    def __post_init__(self):
        if not self.name:
            raise ValueError("wrapper name must be non-empty")
        if not isinstance(self.version, int) or self.version < 1:
            raise ValueError("version must be an integer >= 1")
        self.root_rules = tuple(self.root_rules)
        self.constraints = tuple(self.constraints)
        names = [r.name for r in self.root_rules]
        if len(names) != len(set(names)):
            raise ValueError("duplicate root rule names")
        for path, rule in self.iter_rules():
            # a violated constraint is what triggers repair, so a rule
            # that can adapt must have something to violate
            if rule.adaptation is not None and not self.effective_constraints(rule):
                raise ValueError(
                    "rule %r has adaptation configured but no constraints" % (path,)
                )

    def iter_rules(self):
        """Yield ("parent/child" path, Rule) pairs, depth first."""

        def walk(rules, prefix):
            for rule in rules:
                path = prefix + "/" + rule.name if prefix else rule.name
                yield path, rule
                yield from walk(rule.children, path)

        yield from walk(self.root_rules, "")

    def find_rule(self, path: str) -> Rule:
        for candidate, rule in self.iter_rules():
            if candidate == path:
                return rule
        raise KeyError(path)

    def effective_constraints(self, rule: Rule) -> tuple:
        """Rule-level constraints, falling back to the wrapper defaults."""
        return rule.constraints if rule.constraints else self.constraints

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "constraints": [c.to_dict() for c in self.constraints],
            "rules": [r.to_dict() for r in self.root_rules],
        }


def capture_example(
    tree: DomTree, target, ancestor_level: Optional[int] = None, captured_at: str = ""
) -> StoredExample:
    """Capture the subtree a rule should remember for similarity search.

    Leaf targets store the tree rooted ancestor_level levels up (default
    2) with a residual path back down; non-leaf targets default to the
    target subtree itself.  Levels clamp at the root.
    """
    node = resolve(tree, target)
    if ancestor_level is None:
        ancestor_level = 2 if not node.children else 0
    _, anc_node, residual = ancestor(tree, tuple(target), ancestor_level)
    return StoredExample(
        subtree=detach_subtree(anc_node),
        residual_path=residual,
        captured_from=tree.source_id,
        captured_at=captured_at,
    )


_schema_cache = None


def _schema() -> dict:
    global _schema_cache
    if _schema_cache is None:
        text = (
            resources.files("wrapmend")
            .joinpath("schema/wrapper-v1.schema.json")
            .read_text("utf-8")
        )
        _schema_cache = json.loads(text)
    return _schema_cache


def wrapper_to_dict(wrapper: Wrapper) -> dict:
    return wrapper.to_dict()


def wrapper_from_dict(d: dict) -> Wrapper:
    """Build a Wrapper from its file dict; schema-validated."""
    try:
        jsonschema.validate(d, _schema())
    except jsonschema.ValidationError as e:
        raise WrapperFormatError("schema violation: %s" % (e.message,))
    try:
        return Wrapper(
            name=d["name"],
            version=d["version"],
            root_rules=tuple(Rule.from_dict(r) for r in d.get("rules", ())),
            constraints=tuple(
                constraint_from_dict(c) for c in d.get("constraints", ())
            ),
        )
    except ValueError as e:
        raise WrapperFormatError(str(e))


def wrapper_json(wrapper: Wrapper) -> str:
    """Canonical file text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(wrapper_to_dict(wrapper), indent=2, sort_keys=True) + "\n"


def save_wrapper(wrapper: Wrapper, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(wrapper_json(wrapper))


def load_wrapper(path) -> Wrapper:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise WrapperFormatError("not valid JSON: %s" % (e,))
    return wrapper_from_dict(d)
