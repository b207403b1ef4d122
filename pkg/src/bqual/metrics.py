"""The quality equations, computed in exact rational arithmetic.

Every ratio metric raises NotComputable instead of dividing by zero; the
report layer turns that into a "not-computed" field with the reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .alignment import DEFAULT_SIZE_GUARD, similarity
from .bmachine import Predicate
from .explorer import ExplorationResult, check_goal
from .lts import labels_of, pairs_of, set_size


class NotComputable(ValueError):
    """A metric's denominator is empty for these inputs."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class RequirementSpec:
    """Required transitions plus the projections the metrics consume."""

    required_transitions: frozenset

    @property
    def required_pairs(self) -> frozenset:
        return pairs_of(self.required_transitions)

    @property
    def required_operations(self) -> frozenset:
        return labels_of(self.required_transitions)


@dataclass(frozen=True)
class GoalSpec:
    goals: tuple[tuple[str, Predicate], ...]


# --- functional suitability ---------------------------------------------------


def tfcomp(t_derived: frozenset, t_required: frozenset) -> Fraction:
    """Share of the required transitions that were derived."""
    if not t_required:
        raise NotComputable("no required transitions")
    return Fraction(len(t_derived & t_required), len(t_required))


def pfcomp(
    t_derived: frozenset,
    t_required: frozenset,
    variable_order: Iterable[str],
    *,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> Fraction:
    """Alignment score against the required set, relative to its size."""
    if not t_required:
        raise NotComputable("no required transitions")
    order = tuple(variable_order)
    aligned = similarity(t_derived, t_required, order, size_guard=size_guard)
    return Fraction(aligned.total_agreement, set_size(t_required, order))


def tfcorr(t_derived: frozenset, t_required: frozenset) -> Fraction:
    """Share of the derived transitions that were required."""
    if not t_derived:
        raise NotComputable("no derived transitions")
    return Fraction(len(t_derived & t_required), len(t_derived))


def pfcorr(
    t_derived: frozenset,
    t_required: frozenset,
    variable_order: Iterable[str],
    *,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> Fraction:
    if not t_derived:
        raise NotComputable("no derived transitions")
    order = tuple(variable_order)
    aligned = similarity(t_derived, t_required, order, size_guard=size_guard)
    return Fraction(aligned.total_agreement, set_size(t_derived, order))


def tfappr(t_derived: frozenset, t_required: frozenset) -> Fraction:
    """Like tfcomp but over label-erased pre/post pairs."""
    if not t_required:
        raise NotComputable("no required transitions")
    p_derived = pairs_of(t_derived)
    p_required = pairs_of(t_required)
    return Fraction(len(p_derived & p_required), len(p_required))


def pfappr(
    t_derived: frozenset,
    t_required: frozenset,
    variable_order: Iterable[str],
    *,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> Fraction:
    if not t_required:
        raise NotComputable("no required transitions")
    order = tuple(variable_order)
    p_derived = pairs_of(t_derived)
    p_required = pairs_of(t_required)
    aligned = similarity(p_derived, p_required, order, size_guard=size_guard)
    return Fraction(aligned.total_agreement, set_size(p_required, order))


# --- security and reliability --------------------------------------------------


def invariant_satisfiability(result: ExplorationResult) -> Fraction:
    """Share of derived transitions that trigger no violation."""
    if not result.transitions:
        raise NotComputable("no derived transitions")
    return Fraction(len(result.ok), len(result.transitions))


def availability(result: ExplorationResult, f_required: frozenset) -> Fraction:
    """Share of required operations that never trigger a violation."""
    if not f_required:
        raise NotComputable("no required operations")
    clean = labels_of(result.transitions) - labels_of(result.violating)
    return Fraction(len(clean & f_required), len(f_required))


def accountability(result: ExplorationResult) -> Fraction:
    """Share of derived states with at most one ingoing transition."""
    if not result.states:
        raise NotComputable("no derived states")
    ingoing: dict = {}
    for t in result.transitions:
        ingoing[t.post] = ingoing.get(t.post, 0) + 1
    traceable = sum(1 for s in result.states if ingoing.get(s, 0) <= 1)
    return Fraction(traceable, len(result.states))


def fault_tolerance(u_changed: frozenset, u_violating: frozenset) -> Fraction:
    """One minus the violating share of the masked changed set."""
    if not u_changed:
        raise NotComputable("masked changed set is empty")
    return 1 - Fraction(len(u_violating), len(u_changed))


def recoverability(u_ok: frozenset, t_derived: frozenset) -> Fraction:
    """Share of the intended transitions that the changed system keeps
    deriving without violations."""
    if not t_derived:
        raise NotComputable("no derived transitions")
    return Fraction(len(u_ok & t_derived), len(t_derived))


# --- maintainability ------------------------------------------------------------


def functional_analysability(t_derived: frozenset, u_changed: frozenset) -> Fraction:
    """One minus the Jaccard similarity of derived and masked-changed sets."""
    union = t_derived | u_changed
    if not union:
        raise NotComputable("both transition sets are empty")
    return 1 - Fraction(len(t_derived & u_changed), len(union))


def fault_analysability(t_violating: frozenset, u_violating: frozenset) -> Fraction:
    """One minus the Jaccard similarity of the violating subsets; when
    neither side violates anything the change exposed no difference, which
    counts as zero analysability."""
    union = t_violating | u_violating
    if not union:
        return Fraction(0)
    return 1 - Fraction(len(t_violating & u_violating), len(union))


def modularity_of(op: str, t_derived: frozenset, t_delta: frozenset) -> Fraction:
    """Jaccard similarity of the two sets with ``op``'s transitions removed."""
    keep_derived = frozenset(t for t in t_derived if t.label != op)
    keep_delta = frozenset(t for t in t_delta if t.label != op)
    union = keep_derived | keep_delta
    if not union:
        raise NotComputable(f"no transitions outside operation {op!r}")
    return Fraction(len(keep_derived & keep_delta), len(union))


def weighted_modularity(per_op: Mapping[str, Fraction], t_derived: frozenset) -> Fraction:
    """Per-operation modularity weighted by each operation's share of the
    derived transitions."""
    if not t_derived:
        raise NotComputable("no derived transitions")
    counts: dict[str, int] = {}
    for t in t_derived:
        counts[t.label] = counts.get(t.label, 0) + 1
    missing = [label for label in counts if label not in per_op]
    if missing:
        raise NotComputable(f"no modularity value for operation {sorted(missing)[0]!r}")
    total = len(t_derived)
    return sum(
        (Fraction(count, total) * per_op[label] for label, count in counts.items()),
        Fraction(0),
    )


def reusability(t_derived: frozenset) -> Fraction:
    """One minus operations per derived transition."""
    if not t_derived:
        raise NotComputable("no derived transitions")
    return 1 - Fraction(len(labels_of(t_derived)), len(t_derived))


# --- performance efficiency and usability ----------------------------------------


def capacity(result: ExplorationResult) -> int:
    return len(result.states) + len(result.transitions)


def goal_appropriateness(result: ExplorationResult, goals: GoalSpec) -> Fraction:
    """Share of goal predicates satisfied by some derived state."""
    if not goals.goals:
        raise NotComputable("no goal predicates")
    achieved = sum(1 for _, pred in goals.goals if check_goal(result, pred))
    return Fraction(achieved, len(goals.goals))


def learnability(n_words: int, n_limit: int) -> Fraction:
    """One minus the capped word count relative to the word limit."""
    if n_limit <= 0:
        raise NotComputable("word limit must be positive")
    return 1 - Fraction(min(n_words, n_limit), n_limit)


# --- the report value object -----------------------------------------------------

#: Characteristics the source equations cover only indirectly; each maps to
#: the computed metrics that measure it.
DERIVED_CHARACTERISTICS = {
    "maturity": ["tfcomp", "tfcorr", "invariant_satisfiability"],
    "confidentiality": ["invariant_satisfiability"],
    "integrity": ["invariant_satisfiability"],
    "authenticity": ["invariant_satisfiability"],
    "non_repudiation": ["availability"],
    "user_error_protection": ["invariant_satisfiability", "availability"],
    "appropriateness_recognisability": ["tfappr", "pfappr", "goal_appropriateness"],
    "modifiability": [
        "functional_analysability",
        "fault_analysability",
        "recoverability",
        "modularity",
        "learnability",
    ],
    "testability": ["cpu_seconds"],
    "time_behaviour": ["cpu_seconds"],
    "resource_utilisation": ["peak_memory_bytes"],
}

#: Table layout: groups of four metrics per row.
REPORT_GROUPS = (
    ("tfcomp", "pfcomp", "tfcorr", "pfcorr"),
    ("tfappr", "pfappr", "invariant_satisfiability", "availability"),
    ("accountability", "fault_tolerance", "recoverability", "functional_analysability"),
    ("fault_analysability", "modularity", "reusability", "cpu_seconds"),
    ("peak_memory_bytes", "capacity", "goal_appropriateness", "learnability"),
)

RATIO_METRICS = (
    "tfcomp",
    "pfcomp",
    "tfcorr",
    "pfcorr",
    "tfappr",
    "pfappr",
    "invariant_satisfiability",
    "availability",
    "accountability",
    "fault_tolerance",
    "recoverability",
    "functional_analysability",
    "fault_analysability",
    "modularity",
    "reusability",
    "goal_appropriateness",
    "learnability",
)


@dataclass
class QualityReport:
    """The full metric vector plus provenance.

    Ratio fields hold exact Fractions when computed and None otherwise;
    ``reasons`` records why a field was skipped.
    """

    machine_name: str
    metrics: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)
    per_operation_modularity: dict = field(default_factory=dict)
    capacity: int | None = None
    cpu_seconds: float | None = None
    peak_memory_bytes: int | None = None
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    trial_exclusions: dict = field(default_factory=dict)

    def set_metric(self, name: str, value) -> None:
        self.metrics[name] = value

    def mark_not_computed(self, name: str, reason: str) -> None:
        self.metrics[name] = None
        self.reasons[name] = reason

    def value(self, name: str):
        return self.metrics.get(name)
