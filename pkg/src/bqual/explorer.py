"""Bounded explicit-state exploration.

Variable domains are read off the invariant's membership conjuncts, the
initialisation and operations are compiled to closures, and the state
space is derived breadth-first.  A transition is classified as violating
when its post-state breaks the invariant or has no outgoing transition
(deadlock-freeness is checked always, as an inherent invariant).
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass

from .bmachine import (
    And,
    AnyChoice,
    Assign,
    BinaryExpr,
    BoolLit,
    BoundRef,
    Comparison,
    EnumLit,
    IntLit,
    MachineAST,
    Not,
    Or,
    Precondition,
    Predicate,
    RangeMembership,
    Select,
    Sequence,
    SetMembership,
    Skip,
    TruePredicate,
    VarRef,
    bound_references,
    conjuncts,
    free_variables,
)
from .lts import (
    FALSE,
    KIND_BOOL,
    KIND_ENUM,
    KIND_INT,
    TRUE,
    State,
    Transition,
    Value,
    boolval,
    enumval,
    intval,
)
from .bmachine import BOOL_SET

DEFAULT_MAX_STATES = 100_000
DEFAULT_MAX_TRANSITIONS = 5_000_000


class ExplorerError(ValueError):
    pass


class DomainError(ExplorerError):
    """A variable or bound identifier has no enumerable finite domain."""


class EvalTypeError(ExplorerError):
    """An operator was applied to values of the wrong kind."""


class UnboundVariableError(ExplorerError):
    """A variable was read before any assignment gave it a value."""


class InitialisationError(ExplorerError):
    """The initialisation produced no states or partial states."""


# --- domains ----------------------------------------------------------------


@dataclass(frozen=True)
class IntRangeDomain:
    low: int
    high: int

    def values(self) -> tuple[Value, ...]:
        return tuple(intval(n) for n in range(self.low, self.high + 1))

    def contains(self, value: Value) -> bool:
        return value.kind == KIND_INT and self.low <= value.payload <= self.high

    def __len__(self):
        return self.high - self.low + 1

    def describe(self) -> str:
        return f"{self.low}..{self.high}"


@dataclass(frozen=True)
class BoolDomain:
    def values(self) -> tuple[Value, ...]:
        return (FALSE, TRUE)

    def contains(self, value: Value) -> bool:
        return value.kind == KIND_BOOL

    def __len__(self):
        return 2

    def describe(self) -> str:
        return BOOL_SET


@dataclass(frozen=True)
class EnumDomain:
    set_name: str
    elements: tuple[str, ...]

    def values(self) -> tuple[Value, ...]:
        return tuple(enumval(self.set_name, e) for e in self.elements)

    def contains(self, value: Value) -> bool:
        return value.kind == KIND_ENUM and value.payload[0] == self.set_name and (
            value.payload[1] in self.elements
        )

    def __len__(self):
        return len(self.elements)

    def describe(self) -> str:
        return self.set_name


Domain = IntRangeDomain | BoolDomain | EnumDomain
DomainMap = dict


def _domain_from_membership(pred, name: str, ref_type, machine: MachineAST):
    """Match ``name : low..high`` or ``name : SET`` with a literal subject."""
    if isinstance(pred, RangeMembership) and pred.expr == ref_type(name):
        if not isinstance(pred.low, IntLit) or not isinstance(pred.high, IntLit):
            raise DomainError(
                f"domain bounds for {name!r} must be integer literals"
            )
        if pred.low.value > pred.high.value:
            raise DomainError(
                f"empty domain {pred.low.value}..{pred.high.value} for {name!r}"
            )
        return IntRangeDomain(pred.low.value, pred.high.value)
    if isinstance(pred, SetMembership) and pred.expr == ref_type(name):
        if pred.set_name == BOOL_SET:
            return BoolDomain()
        for set_name, elements in machine.sets:
            if set_name == pred.set_name:
                if not elements:
                    raise DomainError(f"enumerated set {set_name!r} is empty")
                return EnumDomain(set_name, elements)
        raise DomainError(f"unknown set {pred.set_name!r}")
    return None


def infer_domains(machine: MachineAST) -> DomainMap:
    """One finite domain per variable, from the first top-level membership
    conjunct of the invariant whose subject is that variable."""
    parts = conjuncts(machine.invariant)
    domains: DomainMap = {}
    for name in machine.variables:
        for pred in parts:
            domain = _domain_from_membership(pred, name, VarRef, machine)
            if domain is not None:
                domains[name] = domain
                break
        else:
            raise DomainError(
                f"variable {name!r} has no membership conjunct in the invariant"
            )
    return domains


def _bound_domains(any_node: AnyChoice, machine: MachineAST | None) -> list:
    context = machine if machine is not None else _EMPTY_MACHINE
    parts = conjuncts(any_node.where)
    out = []
    for name in any_node.identifiers:
        for pred in parts:
            domain = _domain_from_membership(pred, name, BoundRef, context)
            if domain is not None:
                out.append(domain)
                break
        else:
            raise DomainError(
                f"bound identifier {name!r} has no membership conjunct in WHERE"
            )
    return out


_EMPTY_MACHINE = MachineAST(
    name="",
    sets=(),
    variables=(),
    invariant=TruePredicate(),
    initialisation=Skip(),
    operations=(),
)


# --- compilation to closures -------------------------------------------------


def compile_expression(expr):
    if isinstance(expr, IntLit):
        v = intval(expr.value)
        return lambda env: v
    if isinstance(expr, BoolLit):
        v = boolval(expr.value)
        return lambda env: v
    if isinstance(expr, EnumLit):
        v = enumval(expr.set_name, expr.element)
        return lambda env: v
    if isinstance(expr, (VarRef, BoundRef)):
        name = expr.name

        def read(env):
            try:
                return env[name]
            except KeyError:
                raise UnboundVariableError(
                    f"variable {name!r} read before assignment"
                ) from None

        return read
    if isinstance(expr, BinaryExpr):
        left = compile_expression(expr.left)
        right = compile_expression(expr.right)
        op = expr.op

        def arith(env):
            a = left(env)
            b = right(env)
            if a.kind != KIND_INT or b.kind != KIND_INT:
                raise EvalTypeError(
                    f"arithmetic {op!r} needs integers, got {a.kind} and {b.kind}"
                )
            if op == "+":
                return intval(a.payload + b.payload)
            if op == "-":
                return intval(a.payload - b.payload)
            return intval(a.payload * b.payload)

        return arith
    raise TypeError(f"not an expression: {type(expr).__name__}")


_ORDER_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compile_predicate(pred):
    if isinstance(pred, TruePredicate):
        return lambda env: True
    if isinstance(pred, Comparison):
        left = compile_expression(pred.left)
        right = compile_expression(pred.right)
        op = pred.op
        if op in ("=", "/="):
            want = op == "="

            def equality(env):
                a = left(env)
                b = right(env)
                if a.kind != b.kind:
                    raise EvalTypeError(
                        f"cannot compare {a.kind} with {b.kind}"
                    )
                return (a == b) is want

            return equality
        cmp = _ORDER_OPS[op]

        def ordering(env):
            a = left(env)
            b = right(env)
            if a.kind != KIND_INT or b.kind != KIND_INT:
                raise EvalTypeError(
                    f"ordering {op!r} needs integers, got {a.kind} and {b.kind}"
                )
            return cmp(a.payload, b.payload)

        return ordering
    if isinstance(pred, RangeMembership):
        subject = compile_expression(pred.expr)
        low = compile_expression(pred.low)
        high = compile_expression(pred.high)

        def in_range(env):
            v = subject(env)
            lo = low(env)
            hi = high(env)
            if v.kind != KIND_INT or lo.kind != KIND_INT or hi.kind != KIND_INT:
                raise EvalTypeError("range membership needs integers")
            return lo.payload <= v.payload <= hi.payload

        return in_range
    if isinstance(pred, SetMembership):
        subject = compile_expression(pred.expr)
        set_name = pred.set_name
        if set_name == BOOL_SET:
            return lambda env: subject(env).kind == KIND_BOOL

        def in_set(env):
            v = subject(env)
            return v.kind == KIND_ENUM and v.payload[0] == set_name

        return in_set
    if isinstance(pred, And):
        left = compile_predicate(pred.left)
        right = compile_predicate(pred.right)
        return lambda env: left(env) and right(env)
    if isinstance(pred, Or):
        left = compile_predicate(pred.left)
        right = compile_predicate(pred.right)
        return lambda env: left(env) or right(env)
    if isinstance(pred, Not):
        inner = compile_predicate(pred.inner)
        return lambda env: not inner(env)
    raise TypeError(f"not a predicate: {type(pred).__name__}")


def compile_substitution(sub, machine: MachineAST | None = None):
    """Compile to ``fn(env) -> list-of-envs``; every returned env is a fresh
    dict extending ``env`` with the substitution's effects."""
    if isinstance(sub, Assign):
        var = sub.variable
        value_of = compile_expression(sub.expr)

        def assign(env):
            out = env.copy()
            out[var] = value_of(env)
            return (out,)

        return assign
    if isinstance(sub, Sequence):
        if all(isinstance(step, Assign) for step in sub.steps):
            compiled = [(s.variable, compile_expression(s.expr)) for s in sub.steps]

            def fused(env):
                out = env.copy()
                for var, value_of in compiled:
                    out[var] = value_of(out)
                return (out,)

            return fused
        steps = [compile_substitution(s, machine) for s in sub.steps]

        def chained(env):
            envs = (env,)
            for step in steps:
                envs = [after for current in envs for after in step(current)]
            return envs

        return chained
    if isinstance(sub, Precondition):
        guard = compile_predicate(sub.guard)
        body = compile_substitution(sub.body, machine)
        return lambda env: body(env) if guard(env) else ()
    if isinstance(sub, Select):
        branches = [
            (compile_predicate(guard), compile_substitution(body, machine))
            for guard, body in sub.branches
        ]

        def select(env):
            out = []
            for guard, body in branches:
                if guard(env):
                    out.extend(body(env))
            return out

        return select
    if isinstance(sub, AnyChoice):
        identifiers = sub.identifiers
        domains = _bound_domains(sub, machine)
        valuations = list(itertools.product(*(d.values() for d in domains)))
        where = compile_predicate(sub.where)
        body = compile_substitution(sub.body, machine)
        # When the guard only constrains the bound identifiers it can be
        # decided once here instead of once per (state, valuation).
        if not free_variables(sub.where) and bound_references(sub.where) <= set(
            identifiers
        ):
            valuations = [
                vals
                for vals in valuations
                if where(dict(zip(identifiers, vals)))
            ]

            def any_prefiltered(env):
                out = []
                for vals in valuations:
                    inner = env.copy()
                    for name, v in zip(identifiers, vals):
                        inner[name] = v
                    out.extend(body(inner))
                return out

            return any_prefiltered

        def any_general(env):
            out = []
            for vals in valuations:
                inner = env.copy()
                for name, v in zip(identifiers, vals):
                    inner[name] = v
                if where(inner):
                    out.extend(body(inner))
            return out

        return any_general
    if isinstance(sub, Skip):
        return lambda env: (env,)
    raise TypeError(f"not a substitution: {type(sub).__name__}")


def enumerate_substitution(
    sub,
    state: State,
    domains: DomainMap | None = None,
    machine: MachineAST | None = None,
):
    """All post-states a substitution can reach from ``state``.

    ``domains`` is accepted for symmetry with :func:`explore`; bound
    identifiers take their domains from their own WHERE predicate, so the
    machine's domain map is not consulted.  ``machine`` is only needed when
    a WHERE constrains a bound identifier to a declared enumerated set.
    """
    run = compile_substitution(sub, machine)
    env = dict(zip(state.variables, state.values))
    order = state.variables
    out = set()
    for result in run(env):
        out.add(State(order, tuple(result[v] for v in order)))
    return out


# --- metering ----------------------------------------------------------------


class _MemorySampler:
    """Best-effort peak resident-set sampler on a background thread."""

    def __init__(self, interval: float = 0.01):
        self.interval = interval
        self.peak = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        try:
            import psutil

            self._process = psutil.Process()
        except Exception:  # pragma: no cover - psutil is a declared dependency
            self._process = None

    def _sample(self) -> None:
        if self._process is not None:
            try:
                rss = self._process.memory_info().rss
            except Exception:  # pragma: no cover
                return
            if rss > self.peak:
                self.peak = rss

    def _run(self) -> None:
        while not self._stop.wait(self.interval):
            self._sample()

    def __enter__(self):
        self._sample()
        if self._process is not None:
            self._thread = threading.Thread(target=self._run, daemon=True)
            self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self._sample()
        if self.peak == 0:
            # Fallback: lifetime peak RSS of the process (kilobytes on Linux).
            import resource

            self.peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
        return False


# --- exploration --------------------------------------------------------------


@dataclass
class ExplorationResult:
    machine_name: str
    variable_order: tuple[str, ...]
    initial_states: frozenset
    states: frozenset
    transitions: frozenset
    ok: frozenset
    violating: frozenset
    deadlock_states: frozenset
    truncated: bool
    cpu_seconds: float
    peak_memory_bytes: int

    @property
    def metering(self) -> dict:
        return {
            "cpu_seconds": self.cpu_seconds,
            "peak_memory_bytes": self.peak_memory_bytes,
        }


def explore(
    machine: MachineAST,
    *,
    max_states: int = DEFAULT_MAX_STATES,
    max_transitions: int = DEFAULT_MAX_TRANSITIONS,
    meter_memory: bool = True,
) -> ExplorationResult:
    """Breadth-first derivation of the machine's transition system.

    States that violate the invariant are recorded but never expanded;
    ``truncated`` reports whether a limit cut the run short.
    """
    infer_domains(machine)  # every variable must have an enumerable domain
    order = machine.variables
    invariant = compile_predicate(machine.invariant)
    init = compile_substitution(machine.initialisation, machine)
    ops = [
        (name, compile_substitution(body, machine))
        for name, body in machine.operations
    ]

    sampler = _MemorySampler() if meter_memory else None
    started = time.process_time()
    if sampler is not None:
        sampler.__enter__()
    try:
        init_envs = init({})
        initial: list[State] = []
        seen_init = set()
        for env in init_envs:
            missing = [v for v in order if v not in env]
            if missing:
                raise InitialisationError(
                    f"initialisation does not assign {missing[0]!r}"
                )
            state = State(order, tuple(env[v] for v in order))
            if state not in seen_init:
                seen_init.add(state)
                initial.append(state)
        if not initial:
            raise InitialisationError("initialisation is unsatisfiable")

        pool: dict[tuple, State] = {s.values: s for s in initial}
        inv_ok: dict[State, bool] = {}
        states: set[State] = set(initial)
        transitions: set[Transition] = set()
        frontier = list(initial)
        cursor = 0
        truncated = False

        for s in initial:
            inv_ok[s] = invariant(dict(zip(order, s.values)))

        while cursor < len(frontier):
            state = frontier[cursor]
            cursor += 1
            if not inv_ok[state]:
                continue  # violating states are terminal
            env = dict(zip(order, state.values))
            for label, run in ops:
                for result in run(env):
                    values = tuple(result[v] for v in order)
                    post = pool.get(values)
                    is_new = post is None
                    if is_new:
                        post = State(order, values)
                        if len(states) >= max_states:
                            truncated = True
                            continue
                    if len(transitions) >= max_transitions:
                        truncated = True
                        continue
                    if is_new:
                        pool[values] = post
                        states.add(post)
                        inv_ok[post] = invariant(result)
                        frontier.append(post)
                    transitions.add(Transition(state, label, post))
    finally:
        cpu_seconds = time.process_time() - started
        peak = 0
        if sampler is not None:
            sampler.__exit__(None, None, None)
            peak = sampler.peak

    has_outgoing = {t.pre for t in transitions}
    violating = frozenset(
        t
        for t in transitions
        if not inv_ok[t.post] or t.post not in has_outgoing
    )
    all_transitions = frozenset(transitions)
    return ExplorationResult(
        machine_name=machine.name,
        variable_order=order,
        initial_states=frozenset(initial),
        states=frozenset(states),
        transitions=all_transitions,
        ok=all_transitions - violating,
        violating=violating,
        deadlock_states=frozenset(states) - frozenset(has_outgoing),
        truncated=truncated,
        cpu_seconds=cpu_seconds,
        peak_memory_bytes=peak,
    )


def check_goal(result: ExplorationResult, goal: Predicate) -> bool:
    """True when some derived state satisfies the goal predicate."""
    declared = set(result.variable_order)
    undeclared = free_variables(goal) - declared
    if undeclared:
        raise EvalTypeError(
            f"goal references undeclared variable {sorted(undeclared)[0]!r}"
        )
    if bound_references(goal):
        raise EvalTypeError("goal predicates cannot use bound identifiers")
    holds = compile_predicate(goal)
    order = result.variable_order
    return any(holds(dict(zip(order, s.values))) for s in result.states)


def serialize_result(result: ExplorationResult) -> dict:
    """Summary block plus canonical transition objects, canonically sorted."""
    from .lts import sorted_transitions, transition_to_json

    return {
        "machine": result.machine_name,
        "variables": list(result.variable_order),
        "summary": {
            "initial_states": len(result.initial_states),
            "states": len(result.states),
            "transitions": len(result.transitions),
            "ok_transitions": len(result.ok),
            "violating_transitions": len(result.violating),
            "deadlock_states": len(result.deadlock_states),
            "truncated": result.truncated,
        },
        "metering": result.metering,
        "transitions": [
            dict(transition_to_json(t), violates=(t in result.violating))
            for t in sorted_transitions(result.transitions)
        ],
    }
