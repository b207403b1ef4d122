"""Core value types for labelled transition systems.

States, transitions and state pairs are immutable, hashable and safe to
share between workers.  Machines can reach millions of transitions, so the
types cache their hashes and intern common values.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Union

KIND_BOOL = "bool"
KIND_ENUM = "enum"
KIND_INT = "int"


class StructureError(ValueError):
    """A state or transition does not bind the expected variable set."""


class Value:
    """A machine-domain value: an integer, a boolean, or an element of an
    enumerated set.

    Equality is exact: two values are equal only when they have the same
    kind and the same payload, so an integer never equals a boolean or an
    enumerated element.  ``sort_key`` gives a deterministic total order
    (kind first, then payload).
    """

    __slots__ = ("kind", "payload", "_hash")

    def __init__(self, kind: str, payload):
        self.kind = kind
        self.payload = payload
        self._hash = hash((kind, payload))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Value):
            return NotImplemented
        return self.kind == other.kind and self.payload == other.payload

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return self._hash

    def sort_key(self):
        if self.kind == KIND_BOOL:
            return (self.kind, (int(self.payload),))
        if self.kind == KIND_INT:
            return (self.kind, (self.payload,))
        return (self.kind, self.payload)

    def to_json(self):
        """JSON form: integers and booleans as themselves, enumerated
        elements as their element-name string."""
        if self.kind == KIND_ENUM:
            return self.payload[1]
        return self.payload

    def __repr__(self):
        if self.kind == KIND_ENUM:
            return self.payload[1]
        if self.kind == KIND_BOOL:
            return "TRUE" if self.payload else "FALSE"
        return str(self.payload)


_INT_CACHE: dict[int, Value] = {}
_ENUM_CACHE: dict[tuple[str, str], Value] = {}
TRUE = Value(KIND_BOOL, True)
FALSE = Value(KIND_BOOL, False)


def intval(n: int) -> Value:
    v = _INT_CACHE.get(n)
    if v is None:
        v = _INT_CACHE[n] = Value(KIND_INT, n)
    return v


def boolval(flag: bool) -> Value:
    return TRUE if flag else FALSE


def enumval(set_name: str, element: str) -> Value:
    key = (set_name, element)
    v = _ENUM_CACHE.get(key)
    if v is None:
        v = _ENUM_CACHE[key] = Value(KIND_ENUM, key)
    return v


def value_from_json(item, element_sets: Mapping[str, str] | None = None) -> Value:
    """Decode a JSON scalar into a Value.

    ``element_sets`` maps enumerated element names to their set names; it is
    required to decode strings.  Booleans are checked before integers
    because bool is an int subclass.
    """
    if isinstance(item, bool):
        return boolval(item)
    if isinstance(item, int):
        return intval(item)
    if isinstance(item, str):
        if not element_sets or item not in element_sets:
            raise StructureError(f"unknown enumerated element {item!r}")
        return enumval(element_sets[item], item)
    raise StructureError(f"cannot decode value of type {type(item).__name__}")


class State:
    """A total assignment of the machine's variables, ordered by the
    declaration order of the variables."""

    __slots__ = ("variables", "values", "_hash")

    def __init__(self, variables: tuple[str, ...], values: tuple[Value, ...]):
        if len(variables) != len(values):
            raise StructureError(
                f"{len(variables)} variables but {len(values)} values"
            )
        self.variables = variables
        self.values = values
        self._hash = hash((variables, values))

    @classmethod
    def from_mapping(
        cls, assignment: Mapping[str, Value], variable_order: Iterable[str]
    ) -> "State":
        order = tuple(variable_order)
        extra = [v for v in assignment if v not in order]
        if extra:
            raise StructureError(f"state binds undeclared variable {extra[0]!r}")
        missing = [v for v in order if v not in assignment]
        if missing:
            raise StructureError(f"state is missing variable {missing[0]!r}")
        return cls(order, tuple(assignment[v] for v in order))

    def get(self, name: str) -> Value:
        try:
            return self.values[self.variables.index(name)]
        except ValueError:
            raise StructureError(f"state does not bind variable {name!r}") from None

    def as_dict(self) -> dict[str, Value]:
        return dict(zip(self.variables, self.values))

    @property
    def bindings(self) -> tuple[tuple[str, Value], ...]:
        return tuple(zip(self.variables, self.values))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, State):
            return NotImplemented
        return self.variables == other.variables and self.values == other.values

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return tuple(v.sort_key() for v in self.values)

    def __repr__(self):
        inner = ",".join(repr(v) for v in self.values)
        return f"({inner})"


def _require_same_variables(pre: State, post: State, what: str) -> None:
    if pre.variables is post.variables or pre.variables == post.variables:
        return
    missing = set(pre.variables) - set(post.variables)
    extra = set(post.variables) - set(pre.variables)
    detail = []
    if missing:
        detail.append(f"post-state is missing {sorted(missing)}")
    if extra:
        detail.append(f"post-state adds {sorted(extra)}")
    raise StructureError(f"{what} binds mismatched variables: " + "; ".join(detail))


class Transition:
    """A labelled step ``[pre, operation, post]``; both states bind the
    identical variable set."""

    __slots__ = ("pre", "label", "post", "_hash")

    def __init__(self, pre: State, label: str, post: State):
        _require_same_variables(pre, post, "transition")
        self.pre = pre
        self.label = label
        self.post = post
        self._hash = hash((pre, label, post))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            self.label == other.label
            and self.pre == other.pre
            and self.post == other.post
        )

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return self._hash

    def pair(self) -> "StatePair":
        return StatePair(self.pre, self.post)

    def sort_key(self):
        return (self.pre.sort_key(), self.label, self.post.sort_key())

    def __repr__(self):
        return f"[{self.pre!r},{self.label},{self.post!r}]"


class StatePair:
    """A transition with its operation label erased."""

    __slots__ = ("pre", "post", "_hash")

    def __init__(self, pre: State, post: State):
        _require_same_variables(pre, post, "state pair")
        self.pre = pre
        self.post = post
        self._hash = hash((pre, post))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, StatePair):
            return NotImplemented
        return self.pre == other.pre and self.post == other.post

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (self.pre.sort_key(), self.post.sort_key())

    def __repr__(self):
        return f"[{self.pre!r},{self.post!r}]"


# Transition sets are plain (frozen)sets: duplicate-free, with cheap
# union/intersection/difference in C.
TransitionSet = frozenset
FlatList = tuple
Element = Union[Transition, StatePair]


def _state_values(state: State, variable_order: tuple[str, ...]) -> tuple[Value, ...]:
    if state.variables is variable_order or state.variables == variable_order:
        return state.values
    declared = set(variable_order)
    bound = set(state.variables)
    for name in variable_order:
        if name not in bound:
            raise StructureError(f"state is missing variable {name!r}")
    for name in state.variables:
        if name not in declared:
            raise StructureError(f"state binds undeclared variable {name!r}")
    lookup = state.as_dict()
    return tuple(lookup[v] for v in variable_order)


def flatten_transition(t: Transition, variable_order: Iterable[str]) -> FlatList:
    """Flatten to ``(pre values..., label, post values...)`` -- 2N+1 tokens
    for N variables, values in declaration order."""
    order = tuple(variable_order)
    return _state_values(t.pre, order) + (t.label,) + _state_values(t.post, order)


def flatten_pair(p: StatePair, variable_order: Iterable[str]) -> FlatList:
    """Flatten to ``(pre values..., post values...)`` -- 2N tokens."""
    order = tuple(variable_order)
    return _state_values(p.pre, order) + _state_values(p.post, order)


def flatten(element: Element, variable_order: Iterable[str]) -> FlatList:
    if isinstance(element, Transition):
        return flatten_transition(element, variable_order)
    if isinstance(element, StatePair):
        return flatten_pair(element, variable_order)
    raise TypeError(f"cannot flatten {type(element).__name__}")


def set_size(elements: Iterable[Element], variable_order: Iterable[str]) -> int:
    """Total number of tokens over all flattened elements."""
    order = tuple(variable_order)
    return sum(len(flatten(e, order)) for e in elements)


def pairs_of(transitions: Iterable[Transition]) -> frozenset:
    """Label-erasing projection; duplicates collapse."""
    return frozenset(t.pair() for t in transitions)


def labels_of(transitions: Iterable[Transition]) -> frozenset:
    """The distinct operation labels appearing in a transition set."""
    return frozenset(t.label for t in transitions)


def token_sort_key(token):
    """Deterministic ordering key for a flattened token (Value or label)."""
    if isinstance(token, Value):
        return ("v",) + token.sort_key()
    return ("label", token)


def flat_sort_key(flat: FlatList):
    return tuple(token_sort_key(tok) for tok in flat)


def transition_to_json(t: Transition) -> dict:
    """Canonical JSON object: {"pre": {...}, "op": name, "post": {...}}."""
    return {
        "pre": {name: value.to_json() for name, value in t.pre.bindings},
        "op": t.label,
        "post": {name: value.to_json() for name, value in t.post.bindings},
    }


def transition_from_json(
    obj: Mapping,
    variable_order: Iterable[str],
    element_sets: Mapping[str, str] | None = None,
) -> Transition:
    """Decode the canonical JSON object against a known variable order."""
    order = tuple(variable_order)
    for key in ("pre", "op", "post"):
        if key not in obj:
            raise StructureError(f"transition object is missing {key!r}")
    if not isinstance(obj["op"], str):
        raise StructureError("transition 'op' must be a string")

    def decode_state(mapping: Mapping) -> State:
        decoded = {
            name: value_from_json(item, element_sets) for name, item in mapping.items()
        }
        return State.from_mapping(decoded, order)

    return Transition(decode_state(obj["pre"]), obj["op"], decode_state(obj["post"]))


def sorted_transitions(transitions: Iterable[Transition]) -> list[Transition]:
    return sorted(transitions, key=Transition.sort_key)


def write_transitions_jsonl(transitions: Iterable[Transition], stream) -> int:
    """Write one canonical JSON object per line, canonically sorted.
    Returns the number of lines written."""
    import json

    count = 0
    for t in sorted_transitions(transitions):
        stream.write(json.dumps(transition_to_json(t), separators=(", ", ": ")))
        stream.write("\n")
        count += 1
    return count


def read_transitions_jsonl(
    stream,
    variable_order: Iterable[str],
    element_sets: Mapping[str, str] | None = None,
) -> frozenset:
    """Read canonical transition JSON lines; blank lines are ignored."""
    import json

    order = tuple(variable_order)
    out = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StructureError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        try:
            out.add(transition_from_json(obj, order, element_sets))
        except StructureError as exc:
            raise StructureError(f"line {lineno}: {exc}") from exc
    return frozenset(out)
