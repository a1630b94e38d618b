"""Wrapper execution and the self-repair loop.

Rules are evaluated top-down.  Each rule applies its locator plan per
parent context and validates the results against its effective
constraints; a violation triggers the adaptation pipeline:

  1. template rescue: if the rule has a learned template and its matches
     satisfy the constraints, use them; the rule itself is unchanged.
  2. similarity search: the stored example subtree is scored against
     every same-labeled subtree of the page, and candidate thresholds
     inside the configured interval are tried highest-first until the
     admitted set passes full validation (aggregate cardinality across
     parent contexts, residual resolution, datatypes).
  3. the template is generalized/refined with the matched subtrees.
  4. if configured, the stored example and locator plan are regenerated
     from the top-ranked match and the chosen threshold is written back.

Failures feed the trigger cascade: bottom_up refreshes the parent rule
once per execution and retries, process_flow advances to the next bundle
page and retries from plan application, and a successful adaptation with
top_down re-attributes any resulting child adaptations.  The input
wrapper value is never modified; accumulated rule changes produce a new
wrapper with version + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

from wrapmend.constraints import (
    CardinalityConstraint,
    DatatypeConstraint,
    validate_results,
)
from wrapmend.dom import DomTree, PathError, detach_subtree, resolve
from wrapmend.matching import best_matches
from wrapmend.model import Rule, StoredExample, Wrapper
from wrapmend.template import GeneralizeError, generalize, refine, template_match
from wrapmend.xpath import PlanExhausted, XPathError, apply_plan, generate_plan


class Unsatisfiable(ValueError):
    """No threshold in the allowed range satisfies the constraint."""


class AdaptationFailed(Exception):
    """Raised by adapt_rule; carries the failure report."""

    def __init__(self, report):
        super().__init__("; ".join(report.notes) or "adaptation failed")
        self.report = report


@dataclass
class ExecutionContext:
    """A snapshot bundle: the primary page plus alternates standing in
    for other windows/tabs.  current is advanced by process_flow."""

    pages: tuple
    current: int = 0
    clock: object = None  # callable returning an ISO timestamp string

    def __post_init__(self):
        self.pages = tuple(self.pages)
        if not self.pages:
            raise ValueError("page bundle must be non-empty")
        if not 0 <= self.current < len(self.pages):
            raise ValueError("current index out of range")

    @property
    def page(self) -> DomTree:
        return self.pages[self.current]

    def now(self) -> str:
        if self.clock is not None:
            return self.clock()
        return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class ExtractionResult:
    rule_name: str
    matches: tuple = ()  # of (NodePath, text)
    children: tuple = ()  # per match: tuple of child ExtractionResults
    status: str = "ok"  # ok | adapted | failed

    def to_dict(self) -> dict:
        out = {"rule": self.rule_name, "status": self.status, "matches": []}
        for i, (path, text) in enumerate(self.matches):
            kids = self.children[i] if i < len(self.children) else ()
            out["matches"].append(
                {
                    "path": list(path),
                    "text": text,
                    "children": [c.to_dict() for c in kids],
                }
            )
        return out


@dataclass
class AdaptationReport:
    rule_name: str
    trigger: str  # constraint_violation | top_down | bottom_up | process_flow
    algorithm: Optional[str] = None
    candidates: tuple = ()
    chosen_threshold: Optional[float] = None
    template_action: str = "none"  # created | refined | none
    config_delta: dict = field(default_factory=dict)
    resolved: tuple = ()  # final target paths after residual resolution
    succeeded: bool = True
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_name,
            "trigger": self.trigger,
            "algorithm": self.algorithm,
            "candidates": [
                {"path": list(c.path), "score": c.score, "rank": c.rank}
                for c in self.candidates
            ],
            "chosen_threshold": self.chosen_threshold,
            "template_action": self.template_action,
            "config_delta": self.config_delta,
            "resolved": [list(p) for p in self.resolved],
            "succeeded": self.succeeded,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class Directive:
    kind: str  # adapt | adapt_parent | retry | advance_page
    rule_path: Optional[str] = None
    trigger: Optional[str] = None


def threshold_search(scores, constraint, threshold):
    """Highest threshold whose admitted prefix satisfies the cardinality
    constraint.  Candidates are the distinct scores inside the allowed
    interval plus the interval endpoints.  Returns (threshold, admitted
    count).  Score order does not affect the result."""
    if not isinstance(constraint, CardinalityConstraint):
        raise ValueError("threshold_search needs a cardinality constraint")
    if isinstance(threshold, tuple):
        low, high = threshold
    else:
        low = high = threshold
    candidates = sorted(
        {s for s in scores if low <= s <= high} | {low, high}, reverse=True
    )
    for t in candidates:
        admitted = sum(1 for s in scores if s >= t)
        if constraint.admits(admitted):
            return t, admitted
    raise Unsatisfiable(
        "no threshold in [%g, %g] admits a set satisfying %s"
        % (low, high, constraint.kind)
    )


def _config_summary(rule: Rule) -> dict:
    cfg = rule.adaptation
    thr = cfg.threshold
    return {
        "xpath_best": rule.plan.best.to_string(),
        "threshold": {"low": thr[0], "high": thr[1]}
        if isinstance(thr, tuple)
        else {"constant": thr},
        "last_chosen": cfg.last_chosen,
    }


def adapt_rule(
    rule: Rule,
    ctx: ExecutionContext,
    *,
    constraints=None,
    context_paths=None,
    trigger: str = "constraint_violation",
    force: bool = False,
    rule_path: Optional[str] = None,
):
    """Run the repair pipeline for one rule.  Returns (new rule, report);
    the rule comes back identical when a template rescue sufficed.
    Raises AdaptationFailed when nothing in the allowed threshold range
    satisfies the constraints."""
    name = rule_path or rule.name
    cfg = rule.adaptation

    def failure(notes, candidates=(), algorithm=None):
        return AdaptationFailed(
            AdaptationReport(
                rule_name=name,
                trigger=trigger,
                algorithm=algorithm,
                candidates=tuple(candidates),
                succeeded=False,
                notes=tuple(notes),
            )
        )

    if cfg is None:
        raise failure(["rule has no adaptation config"])
    if constraints is None:
        constraints = rule.constraints
    page = ctx.page
    card = [c for c in constraints if isinstance(c, CardinalityConstraint)]
    data = [c for c in constraints if isinstance(c, DatatypeConstraint)]
    ctxs = None
    if context_paths is not None:
        ctxs = [tuple(c) for c in context_paths if c is not None]
        if len(ctxs) != len(list(context_paths)):
            ctxs = None  # a document context admits everything
    parents = len(ctxs) if ctxs is not None else 1

    def within(path) -> bool:
        if ctxs is None:
            return True
        return any(path[: len(c)] == c for c in ctxs)

    def counts_ok(n: int) -> bool:
        for c in card:
            lo = c.min_count * parents
            hi = None if c.max_count is None else c.max_count * parents
            if n < lo or (hi is not None and n > hi):
                return False
        return True

    def texts_ok(results) -> bool:
        return not validate_results(results, data)

    # 1. template rescue: shape knowledge may localize the data without
    # touching the rule at all
    if rule.template is not None and not force:
        spots = [
            p
            for p in template_match(rule.template, page, cfg.labeler)
            if within(p)
        ]
        targets = []
        for p in spots:
            t = tuple(p) + (rule.stored_example.residual_path if rule.stored_example else ())
            try:
                node = resolve(page, t)
            except PathError:
                continue
            targets.append((t, node.text))
        if targets and counts_ok(len(targets)) and texts_ok(targets):
            report = AdaptationReport(
                rule_name=name,
                trigger=trigger,
                resolved=tuple(t for t, _ in targets),
                succeeded=True,
                notes=("template matched; no further action",),
            )
            return rule, report

    stored = rule.stored_example
    if stored is None:
        raise failure(["no stored example to search with"])
    low, high = cfg.interval

    chosen = None
    winner = None  # (algorithm, usable, resolved)
    last_usable = []
    last_algorithm = None
    for algorithm in cfg.algorithms():
        ranked = best_matches(
            stored.subtree, page, cfg.labeler, algorithm=algorithm, min_score=low
        )
        usable = [c for c in ranked if within(c.path)]
        last_usable, last_algorithm = usable, algorithm
        thresholds = sorted(
            {c.score for c in usable if low <= c.score <= high} | {low, high},
            reverse=True,
        )
        for t in thresholds:
            admitted = [c for c in usable if c.score >= t]
            resolved = []
            for c in admitted:
                target = tuple(c.path) + stored.residual_path
                try:
                    node = resolve(page, target)
                except PathError:
                    continue  # matched subtree too shallow for the residual
                resolved.append((c, target, node))
            results = [(target, node.text) for _, target, node in resolved]
            if resolved and counts_ok(len(results)) and texts_ok(results):
                chosen = t
                winner = (algorithm, usable, resolved)
                break
        if winner:
            break
    if winner is None:
        raise failure(
            ["no threshold in [%g, %g] yields results satisfying the constraints" % (low, high)],
            candidates=last_usable,
            algorithm=last_algorithm,
        )

    algorithm, usable, resolved = winner
    notes = []

    # 2. fold the matched shapes into the template
    new_template = rule.template
    template_action = "none"
    matched_roots = [resolve(page, c.path) for c, _, _ in resolved]
    try:
        if new_template is None:
            new_template = generalize(stored.subtree, matched_roots[0], cfg.labeler)
            for m in matched_roots[1:]:
                new_template = refine(new_template, m, cfg.labeler)
            template_action = "created"
        else:
            before = new_template
            for m in matched_roots:
                new_template = refine(new_template, m, cfg.labeler)
            template_action = "refined" if new_template is not before else "none"
    except GeneralizeError as e:
        new_template = rule.template
        template_action = "none"
        notes.append("template not updated: %s" % (e,))

    # 3. re-anchor the stored example and plan on the top match
    new_stored = stored
    new_plan = rule.plan
    targets = [target for _, target, _ in resolved]
    if cfg.update_stored:
        top = resolved[0]
        new_stored = StoredExample(
            subtree=detach_subtree(resolve(page, top[0].path)),
            residual_path=stored.residual_path,
            captured_from=page.source_id,
            captured_at=ctx.now(),
        )
        plan_context = None
        plan_targets = targets
        if ctxs is not None:
            plan_context = next(
                c for c in ctxs if top[1][: len(c)] == c
            )
            plan_targets = [t for t in targets if t[: len(plan_context)] == plan_context]
        try:
            new_plan = generate_plan(
                page,
                top[1],
                context_path=plan_context,
                cohort=plan_targets if len(plan_targets) > 1 else None,
            )
        except XPathError as e:
            notes.append("plan kept: %s" % (e,))

    # 4. write the settled threshold back into the config
    new_threshold = cfg.threshold if isinstance(cfg.threshold, tuple) else chosen
    new_cfg = replace(cfg, threshold=new_threshold, last_chosen=chosen)

    new_rule = replace(
        rule,
        plan=new_plan,
        stored_example=new_stored,
        template=new_template,
        adaptation=new_cfg,
    )
    report = AdaptationReport(
        rule_name=name,
        trigger=trigger,
        algorithm=algorithm,
        candidates=tuple(usable),
        chosen_threshold=chosen,
        template_action=template_action,
        config_delta={
            "before": _config_summary(rule),
            "after": _config_summary(new_rule),
        },
        resolved=tuple(targets),
        succeeded=True,
        notes=tuple(notes),
    )
    return new_rule, report


def trigger_cascade(
    wrapper: Wrapper, rule: Rule, outcome: str, ctx: ExecutionContext, rule_path=None
):
    """Directives implied by an adaptation outcome; pure data.

    outcome "adapted" with top_down configured: one adapt directive per
    descendant rule that has adaptation and has not opted out (the
    executor re-evaluates them first and adapts only the violated).
    outcome "failed" with bottom_up: force-adapt the parent, then retry;
    with process_flow: advance to the next bundle page and retry.
    """
    if rule_path is None:
        for p, r in wrapper.iter_rules():
            if r is rule:
                rule_path = p
                break
        else:
            rule_path = rule.name
    cfg = rule.adaptation
    if cfg is None:
        return []
    directives = []
    if outcome == "adapted":
        if "top_down" in cfg.triggers:
            prefix = rule_path + "/"
            for p, r in wrapper.iter_rules():
                if p.startswith(prefix) and r.adaptation is not None:
                    if not r.adaptation.cascade_opt_out:
                        directives.append(Directive("adapt", p, "top_down"))
        return directives
    if outcome == "failed":
        if "bottom_up" in cfg.triggers and "/" in rule_path:
            parent_path = rule_path.rsplit("/", 1)[0]
            directives.append(Directive("adapt_parent", parent_path, "bottom_up"))
            directives.append(Directive("retry", rule_path, None))
        if "process_flow" in cfg.triggers and ctx.current + 1 < len(ctx.pages):
            directives.append(Directive("advance_page", None, "process_flow"))
            directives.append(Directive("retry", rule_path, None))
        return directives
    return []


class _Executor:
    def __init__(self, wrapper: Wrapper, ctx: ExecutionContext, max_cascade_depth: int):
        self.wrapper = wrapper
        self.ctx = ctx
        self.max_depth = max_cascade_depth
        self.reports = []
        self.changed = {}  # rule path -> adapted Rule
        self.attempts = {}  # rule path -> adaptation attempts
        self.forced_parents = set()

    def run(self):
        return [
            self._eval(rule, rule.name, [None], "constraint_violation")[0]
            for rule in self.wrapper.root_rules
        ]

    # -- adaptation bookkeeping

    def _budget(self) -> int:
        return self.max_depth * len(self.ctx.pages)

    def _adapt(self, rule, rule_path, contexts, trigger, force=False):
        if self.attempts.get(rule_path, 0) >= self._budget():
            report = AdaptationReport(
                rule_name=rule_path,
                trigger=trigger,
                succeeded=False,
                notes=("adaptation attempt budget exhausted",),
            )
            self.reports.append(report)
            raise AdaptationFailed(report)
        self.attempts[rule_path] = self.attempts.get(rule_path, 0) + 1
        constraints = self.wrapper.effective_constraints(rule)
        try:
            new_rule, report = adapt_rule(
                rule,
                self.ctx,
                constraints=constraints,
                context_paths=contexts,
                trigger=trigger,
                force=force,
                rule_path=rule_path,
            )
        except AdaptationFailed as e:
            self.reports.append(e.report)
            raise
        self.reports.append(report)
        if new_rule is not rule:
            self.changed[rule_path] = new_rule
        return new_rule, report

    def _repair(self, rule, rule_path, contexts, trigger):
        """Adapt with process_flow page advances.  Returns (status, per-context
        match lists) with status "failed" when everything is exhausted."""
        while True:
            current = self.changed.get(rule_path, rule)
            try:
                _, report = self._adapt(current, rule_path, contexts, trigger)
                return "adapted", self._partition(report.resolved, contexts)
            except AdaptationFailed:
                directives = trigger_cascade(
                    self.wrapper, current, "failed", self.ctx, rule_path=rule_path
                )
                if any(d.kind == "advance_page" for d in directives):
                    self.ctx.current += 1
                    # the alternate page may satisfy the plan as-is
                    ok, per_ctx = self._apply_contexts(current, contexts)
                    if ok:
                        return "ok", per_ctx
                    continue
                return "failed", None

    def _apply_contexts(self, rule, contexts):
        """Plan results per context; a violated context yields None (an
        empty list is a legitimate result under min_count 0)."""
        constraints = self.wrapper.effective_constraints(rule)
        per_ctx = []
        ok = True
        for c in contexts:
            try:
                paths, _ = apply_plan(
                    rule.plan, self.ctx.page, constraints, context_path=c
                )
                per_ctx.append(paths)
            except (PlanExhausted, PathError):
                per_ctx.append(None)
                ok = False
        return ok, per_ctx

    def _partition(self, targets, contexts):
        out = []
        for c in contexts:
            if c is None:
                mine = sorted(tuple(t) for t in targets)
            else:
                c = tuple(c)
                mine = sorted(tuple(t) for t in targets if tuple(t)[: len(c)] == c)
            out.append(mine)
        return out

    # -- evaluation

    def _eval(self, rule, rule_path, contexts, attribution):
        """Evaluate one rule under the given parent contexts.  Returns a
        list of ExtractionResults aligned with contexts."""
        rule = self.changed.get(rule_path, rule)
        if not contexts:
            return []
        ok, per_ctx = self._apply_contexts(rule, contexts)
        statuses = ["ok"] * len(contexts)
        if not ok:
            repaired = None
            if rule.adaptation is not None:
                status, fixed = self._repair(rule, rule_path, contexts, attribution)
                if status != "failed":
                    repaired = (status, fixed)
                    rule = self.changed.get(rule_path, rule)
            if repaired is not None:
                status, per_ctx = repaired
                statuses = [status] * len(contexts)
            else:
                # salvage the contexts the plan still satisfies
                statuses = [
                    "ok" if paths is not None else "failed" for paths in per_ctx
                ]
                per_ctx = [paths if paths is not None else [] for paths in per_ctx]
        if all(s == "failed" for s in statuses):
            return [
                ExtractionResult(rule_name=rule.name, status="failed")
                for _ in contexts
            ]

        for attempt in (0, 1):
            adapted = any(s == "adapted" for s in statuses)
            flat = [p for paths in per_ctx for p in paths]
            child_results = {}
            for child in rule.children:
                child_path = rule_path + "/" + child.name
                child_results[child.name] = self._eval(
                    child, child_path, flat, self._attr_for(rule, rule_path, adapted, child)
                )
            if attempt == 1 or not self._needs_parent_refresh(rule, child_results):
                break
            # a child exhausted its own repair and asked for the parent:
            # force a similarity refresh of this rule, then retry children
            if rule.adaptation is None or rule_path in self.forced_parents:
                break
            self.forced_parents.add(rule_path)
            try:
                _, report = self._adapt(
                    rule, rule_path, contexts, "bottom_up", force=True
                )
            except AdaptationFailed:
                break
            per_ctx = self._partition(report.resolved, contexts)
            statuses = ["adapted"] * len(contexts)
            rule = self.changed.get(rule_path, rule)

        page = self.ctx.page
        results = []
        flat_index = 0
        for paths, status in zip(per_ctx, statuses):
            matches = []
            kids = []
            for p in paths:
                try:
                    text = resolve(page, p).text
                except PathError:
                    text = ""
                matches.append((tuple(p), text))
                kids.append(
                    tuple(
                        child_results[child.name][flat_index]
                        for child in rule.children
                        if child_results.get(child.name)
                    )
                )
                flat_index += 1
            results.append(
                ExtractionResult(
                    rule_name=rule.name,
                    matches=tuple(matches),
                    children=tuple(kids),
                    status=status,
                )
            )
        return results

    def _attr_for(self, rule, rule_path, adapted, child):
        if not adapted:
            return "constraint_violation"
        directives = trigger_cascade(
            self.wrapper, rule, "adapted", self.ctx, rule_path=rule_path
        )
        child_path = rule_path + "/" + child.name
        for d in directives:
            if d.kind == "adapt" and d.rule_path == child_path:
                return "top_down"
        return "constraint_violation"

    def _needs_parent_refresh(self, rule, child_results) -> bool:
        for child in rule.children:
            results = child_results.get(child.name) or []
            if not results:
                continue
            if all(r.status == "failed" for r in results):
                cfg = child.adaptation
                if cfg is not None and "bottom_up" in cfg.triggers:
                    return True
        return False

    def build_wrapper(self):
        if not self.changed:
            return None

        def rebuild(rule, path):
            base = self.changed.get(path, rule)
            kids = tuple(rebuild(c, path + "/" + c.name) for c in rule.children)
            return replace(base, children=kids)

        return Wrapper(
            name=self.wrapper.name,
            version=self.wrapper.version + 1,
            root_rules=tuple(rebuild(r, r.name) for r in self.wrapper.root_rules),
            constraints=self.wrapper.constraints,
        )


def execute_wrapper(wrapper: Wrapper, ctx: ExecutionContext, max_cascade_depth: int = 3):
    """Returns (results per root rule, adaptation reports, new wrapper or
    None when nothing changed)."""
    executor = _Executor(wrapper, ctx, max_cascade_depth)
    results = executor.run()
    return results, executor.reports, executor.build_wrapper()
