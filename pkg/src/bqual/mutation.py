"""Fault-injection harness.

Faults live at the transition-system level: a plan inserts transitions
that the machine never derived and removes transitions it did derive.
The edited relation is then re-traversed from the initial states (the
same ever-expanding search a fresh derivation would do), and the edits
themselves are masked out before the changed system is judged against the
invariant.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .bmachine import Predicate
from .explorer import DomainMap, ExplorationResult, compile_predicate
from .lts import (
    State,
    Transition,
    labels_of,
    sorted_transitions,
    transition_from_json,
    transition_to_json,
)
from .metrics import (
    NotComputable,
    fault_analysability,
    fault_tolerance,
    functional_analysability,
    modularity_of,
    recoverability,
    weighted_modularity,
)

_MAX_DRAW_ATTEMPTS = 200_000


class MutationError(ValueError):
    pass


@dataclass(frozen=True)
class MutationPlan:
    extra: frozenset
    missing: frozenset
    seed: int
    n_extra: int
    n_missing: int
    label_scope: str | None = None


@dataclass(frozen=True)
class ChangedSystem:
    t_changed: frozenset
    u_changed: frozenset
    u_ok: frozenset
    u_violating: frozenset


def validate_plan(plan: MutationPlan, t_derived: frozenset) -> None:
    overlap = plan.extra & t_derived
    if overlap:
        raise MutationError(
            f"extra transition {next(iter(overlap))!r} is already derived"
        )
    stray = plan.missing - t_derived
    if stray:
        raise MutationError(
            f"missing transition {next(iter(stray))!r} is not derived"
        )
    if plan.extra & plan.missing:
        raise MutationError("a transition cannot be both extra and missing")
    if plan.label_scope is not None:
        off_label = {
            t for t in plan.extra | plan.missing if t.label != plan.label_scope
        }
        if off_label:
            raise MutationError(
                f"plan is scoped to {plan.label_scope!r} but touches "
                f"{next(iter(off_label)).label!r}"
            )


def generate_plan(
    result: ExplorationResult,
    domains: DomainMap,
    labels: Iterable[str],
    n_extra: int,
    n_missing: int,
    seed: int,
    label_scope: str | None = None,
) -> MutationPlan:
    """Draw a random plan, fully determined by ``seed``.

    Removals are sampled uniformly without replacement from the derived
    transitions; insertions combine a reachable pre-state, a label, and a
    post-state drawn from the product of the variable domains, rejecting
    anything already derived or already drawn.
    """
    rng = random.Random(seed)
    order = result.variable_order

    pool = (
        [t for t in result.transitions if t.label == label_scope]
        if label_scope is not None
        else list(result.transitions)
    )
    pool = sorted_transitions(pool)
    if n_missing > len(pool):
        raise MutationError(
            f"cannot remove {n_missing} of {len(pool)} eligible transitions"
        )
    missing = frozenset(rng.sample(pool, n_missing)) if n_missing else frozenset()

    label_pool = [label_scope] if label_scope is not None else sorted(set(labels))
    if n_extra and not label_pool:
        raise MutationError("no labels to draw extra transitions from")
    states = sorted(result.states, key=State.sort_key)
    value_pools = [domains[name].values() for name in order]

    product_size = 1
    for values in value_pools:
        product_size *= len(values)
    space = len(states) * len(label_pool) * product_size
    label_set = set(label_pool)
    occupied = sum(
        1
        for t in result.transitions
        if t.label in label_set
        and all(domains[name].contains(v) for name, v in zip(order, t.post.values))
    )
    if n_extra > space - occupied:
        raise MutationError(
            f"cannot draw {n_extra} distinct extra transitions from a space "
            f"of {space} with {occupied} already derived"
        )

    extra: set[Transition] = set()
    attempts = 0
    while len(extra) < n_extra:
        attempts += 1
        if attempts > max(_MAX_DRAW_ATTEMPTS, 100 * n_extra):
            raise MutationError(
                "too many rejected draws while generating extra transitions"
            )
        pre = rng.choice(states)
        label = rng.choice(label_pool)
        post = State(order, tuple(rng.choice(values) for values in value_pools))
        candidate = Transition(pre, label, post)
        if candidate in result.transitions or candidate in extra:
            continue
        extra.add(candidate)

    plan = MutationPlan(
        extra=frozenset(extra),
        missing=missing,
        seed=seed,
        n_extra=n_extra,
        n_missing=n_missing,
        label_scope=label_scope,
    )
    validate_plan(plan, result.transitions)
    return plan


def apply_plan(
    result: ExplorationResult, plan: MutationPlan, invariant: Predicate
) -> ChangedSystem:
    """Edit the transition relation, re-derive reachability, and mask.

    The traversal mirrors exploration: it starts from the machine's
    initial states and never walks out of an invariant-violating state.
    Inside the masked set a transition is violating when its post-state
    breaks the invariant or has no outgoing transition there.
    """
    validate_plan(plan, result.transitions)
    relation = (result.transitions | plan.extra) - plan.missing

    # Traversal order cannot influence the resulting sets, so adjacency
    # lists stay in insertion order.
    outgoing: dict[State, list[Transition]] = {}
    for t in relation:
        outgoing.setdefault(t.pre, []).append(t)

    holds = compile_predicate(invariant)
    order = result.variable_order
    inv_ok: dict[State, bool] = {}

    def satisfies(state: State) -> bool:
        ok = inv_ok.get(state)
        if ok is None:
            ok = inv_ok[state] = holds(dict(zip(order, state.values)))
        return ok

    t_changed: set[Transition] = set()
    visited = set(result.initial_states)
    queue = sorted(result.initial_states, key=State.sort_key)
    cursor = 0
    while cursor < len(queue):
        state = queue[cursor]
        cursor += 1
        if not satisfies(state):
            continue
        for t in outgoing.get(state, ()):
            t_changed.add(t)
            if t.post not in visited:
                visited.add(t.post)
                queue.append(t.post)

    u_changed = frozenset((t_changed | plan.missing) - plan.extra)
    assert u_changed == (frozenset(t_changed) | plan.missing) - plan.extra

    has_outgoing = {t.pre for t in u_changed}
    u_violating = frozenset(
        t for t in u_changed if not satisfies(t.post) or t.post not in has_outgoing
    )
    return ChangedSystem(
        t_changed=frozenset(t_changed),
        u_changed=u_changed,
        u_ok=u_changed - u_violating,
        u_violating=u_violating,
    )


_TRIAL_METRICS = (
    "fault_tolerance",
    "recoverability",
    "functional_analysability",
    "fault_analysability",
)


@dataclass
class TrialOutcome:
    means: dict
    exclusions: dict
    trials: int


def trial_metrics(
    result: ExplorationResult, changed: ChangedSystem
) -> tuple[dict, dict]:
    """The four fault-injection metrics for one applied plan; returns
    ``(values, reasons)`` where a non-computable metric appears as None."""
    values: dict = {}
    reasons: dict = {}
    for name in _TRIAL_METRICS:
        try:
            values[name] = _TRIAL_FUNCS[name](result, changed)
        except NotComputable as exc:
            values[name] = None
            reasons[name] = exc.reason
    return values, reasons


def run_trials(
    result: ExplorationResult,
    domains: DomainMap,
    invariant: Predicate,
    trial_count: int,
    n_extra: int,
    n_missing: int,
    seed: int,
    labels: Iterable[str] | None = None,
) -> TrialOutcome:
    """Average the fault-injection metrics over seeded trials.

    Trial ``i`` uses seed ``seed ^ i``.  A trial whose denominator is empty
    for some metric is excluded from that metric's mean, and the exclusion
    is counted; a metric excluded in every trial comes back as None.
    """
    if trial_count < 1:
        raise MutationError("trial count must be at least 1")
    label_pool = labels if labels is not None else labels_of(result.transitions)
    sums: dict[str, Fraction] = {name: Fraction(0) for name in _TRIAL_METRICS}
    counts: dict[str, int] = {name: 0 for name in _TRIAL_METRICS}
    exclusions: dict[str, int] = {name: 0 for name in _TRIAL_METRICS}
    for i in range(trial_count):
        plan = generate_plan(
            result, domains, label_pool, n_extra, n_missing, seed ^ i
        )
        changed = apply_plan(result, plan, invariant)
        for name in _TRIAL_METRICS:
            try:
                value = _TRIAL_FUNCS[name](result, changed)
            except NotComputable:
                exclusions[name] += 1
                continue
            sums[name] += value
            counts[name] += 1
    means = {
        name: (sums[name] / counts[name] if counts[name] else None)
        for name in _TRIAL_METRICS
    }
    return TrialOutcome(means=means, exclusions=exclusions, trials=trial_count)


_TRIAL_FUNCS = {
    "fault_tolerance": lambda result, changed: fault_tolerance(
        changed.u_changed, changed.u_violating
    ),
    "recoverability": lambda result, changed: recoverability(
        changed.u_ok, result.transitions
    ),
    "functional_analysability": lambda result, changed: functional_analysability(
        result.transitions, changed.u_changed
    ),
    "fault_analysability": lambda result, changed: fault_analysability(
        result.violating, changed.u_violating
    ),
}


def _op_seed(seed: int, op: str) -> int:
    return (seed ^ zlib.crc32(op.encode("utf-8"))) & 0xFFFFFFFFFFFFFFFF


def modularity_sweep(
    result: ExplorationResult,
    domains: DomainMap,
    invariant: Predicate,
    per_op_counts: Mapping[str, tuple[int, int]],
    seed: int,
) -> tuple[dict, Fraction]:
    """Per-operation modularity from label-scoped plans, plus the
    transition-share-weighted total."""
    ops = sorted(labels_of(result.transitions))
    missing = [op for op in ops if op not in per_op_counts]
    if missing:
        raise MutationError(f"no mutation counts for operation {missing[0]!r}")
    per_op: dict[str, Fraction] = {}
    for op in ops:
        n_extra, n_missing = per_op_counts[op]
        plan = generate_plan(
            result,
            domains,
            [op],
            n_extra,
            n_missing,
            _op_seed(seed, op),
            label_scope=op,
        )
        changed = apply_plan(result, plan, invariant)
        per_op[op] = modularity_of(op, result.transitions, changed.t_changed)
    return per_op, weighted_modularity(per_op, result.transitions)


# --- plan files ----------------------------------------------------------------


def plan_to_json(plan: MutationPlan) -> dict:
    obj = {
        "extra": [transition_to_json(t) for t in sorted_transitions(plan.extra)],
        "missing": [transition_to_json(t) for t in sorted_transitions(plan.missing)],
        "seed": plan.seed,
    }
    if plan.label_scope is not None:
        obj["label_scope"] = plan.label_scope
    return obj


def plan_from_json(
    obj: Mapping,
    variable_order: Iterable[str],
    element_sets: Mapping[str, str] | None = None,
) -> MutationPlan:
    order = tuple(variable_order)
    for key in ("extra", "missing"):
        if key not in obj or not isinstance(obj[key], list):
            raise MutationError(f"plan is missing the {key!r} transition list")
    extra = frozenset(
        transition_from_json(item, order, element_sets) for item in obj["extra"]
    )
    missing = frozenset(
        transition_from_json(item, order, element_sets) for item in obj["missing"]
    )
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise MutationError("plan seed must be an integer")
    label_scope = obj.get("label_scope")
    if label_scope is not None and not isinstance(label_scope, str):
        raise MutationError("label_scope must be an operation name")
    return MutationPlan(
        extra=extra,
        missing=missing,
        seed=seed,
        n_extra=len(extra),
        n_missing=len(missing),
        label_scope=label_scope,
    )


def load_plan(
    path,
    variable_order: Iterable[str],
    element_sets: Mapping[str, str] | None = None,
) -> MutationPlan:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MutationError(f"{path}: invalid JSON ({exc.msg})") from exc
    return plan_from_json(obj, variable_order, element_sets)
