"""AST for the bounded machine language, plus the pretty-printer.

All nodes are frozen dataclasses, so machines compare structurally; the
printer emits source that parses back to an equal AST.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

BOOL_SET = "BOOL"

COMPARISON_OPS = ("=", "/=", "<", "<=", ">", ">=")
ARITHMETIC_OPS = ("+", "-", "*")


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class EnumLit:
    set_name: str
    element: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class BoundRef:
    name: str


@dataclass(frozen=True)
class BinaryExpr:
    op: str  # one of ARITHMETIC_OPS
    left: "Expression"
    right: "Expression"


Expression = Union[IntLit, BoolLit, EnumLit, VarRef, BoundRef, BinaryExpr]


# --- predicates ------------------------------------------------------------


@dataclass(frozen=True)
class TruePredicate:
    pass


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARISON_OPS
    left: Expression
    right: Expression


@dataclass(frozen=True)
class RangeMembership:
    expr: Expression
    low: Expression
    high: Expression


@dataclass(frozen=True)
class SetMembership:
    expr: Expression
    set_name: str


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Not:
    inner: "Predicate"


Predicate = Union[TruePredicate, Comparison, RangeMembership, SetMembership, And, Or, Not]


# --- substitutions ---------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    variable: str
    expr: Expression


@dataclass(frozen=True)
class Sequence:
    steps: tuple["Substitution", ...]


@dataclass(frozen=True)
class Precondition:
    guard: Predicate
    body: "Substitution"


@dataclass(frozen=True)
class Select:
    branches: tuple[tuple[Predicate, "Substitution"], ...]


@dataclass(frozen=True)
class AnyChoice:
    identifiers: tuple[str, ...]
    where: Predicate
    body: "Substitution"


@dataclass(frozen=True)
class Skip:
    pass


Substitution = Union[Assign, Sequence, Precondition, Select, AnyChoice, Skip]


@dataclass(frozen=True)
class MachineAST:
    name: str
    sets: tuple[tuple[str, tuple[str, ...]], ...]
    variables: tuple[str, ...]
    invariant: Predicate
    initialisation: Substitution
    operations: tuple[tuple[str, Substitution], ...]

    @property
    def operation_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.operations)

    @property
    def element_sets(self) -> dict[str, str]:
        """Map each enumerated element name to its set name."""
        out: dict[str, str] = {}
        for set_name, elements in self.sets:
            for element in elements:
                out[element] = set_name
        return out


# --- structural helpers ----------------------------------------------------


def conjuncts(pred: Predicate) -> list[Predicate]:
    """Flatten the top-level conjunction tree."""
    if isinstance(pred, And):
        return conjuncts(pred.left) + conjuncts(pred.right)
    return [pred]


def free_variables(node) -> frozenset:
    """Machine variables referenced anywhere inside a predicate or
    expression (bound identifiers excluded)."""
    out: set[str] = set()
    _collect_refs(node, out, VarRef)
    return frozenset(out)


def bound_references(node) -> frozenset:
    out: set[str] = set()
    _collect_refs(node, out, BoundRef)
    return frozenset(out)


def _collect_refs(node, out: set, ref_type) -> None:
    if isinstance(node, ref_type):
        out.add(node.name)
    elif isinstance(node, BinaryExpr):
        _collect_refs(node.left, out, ref_type)
        _collect_refs(node.right, out, ref_type)
    elif isinstance(node, Comparison):
        _collect_refs(node.left, out, ref_type)
        _collect_refs(node.right, out, ref_type)
    elif isinstance(node, RangeMembership):
        _collect_refs(node.expr, out, ref_type)
        _collect_refs(node.low, out, ref_type)
        _collect_refs(node.high, out, ref_type)
    elif isinstance(node, SetMembership):
        _collect_refs(node.expr, out, ref_type)
    elif isinstance(node, (And, Or)):
        _collect_refs(node.left, out, ref_type)
        _collect_refs(node.right, out, ref_type)
    elif isinstance(node, Not):
        _collect_refs(node.inner, out, ref_type)


def assigned_variables(sub: Substitution) -> frozenset:
    """Every machine variable written somewhere inside a substitution."""
    if isinstance(sub, Assign):
        return frozenset({sub.variable})
    if isinstance(sub, Sequence):
        out: frozenset = frozenset()
        for step in sub.steps:
            out |= assigned_variables(step)
        return out
    if isinstance(sub, Precondition):
        return assigned_variables(sub.body)
    if isinstance(sub, Select):
        out = frozenset()
        for _, body in sub.branches:
            out |= assigned_variables(body)
        return out
    if isinstance(sub, AnyChoice):
        return assigned_variables(sub.body)
    if isinstance(sub, Skip):
        return frozenset()
    raise TypeError(f"not a substitution: {type(sub).__name__}")


# --- pretty-printer --------------------------------------------------------

_EXPR_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def expr_to_source(expr: Expression) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, EnumLit):
        return expr.element
    if isinstance(expr, (VarRef, BoundRef)):
        return expr.name
    if isinstance(expr, BinaryExpr):
        prec = _EXPR_PRECEDENCE[expr.op]
        left = expr_to_source(expr.left)
        if isinstance(expr.left, BinaryExpr) and _EXPR_PRECEDENCE[expr.left.op] < prec:
            left = f"({left})"
        right = expr_to_source(expr.right)
        if isinstance(expr.right, BinaryExpr) and _EXPR_PRECEDENCE[expr.right.op] <= prec:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not an expression: {type(expr).__name__}")


def pred_to_source(pred: Predicate, _level: int = 0) -> str:
    # levels: 0 = or, 1 = and, 2 = atom; right operands of a chain get
    # parentheses so right-nested trees survive the left-associative parse
    if isinstance(pred, Or):
        right = pred_to_source(pred.right, 0)
        if isinstance(pred.right, Or):
            right = f"({right})"
        text = f"{pred_to_source(pred.left, 0)} or {right}"
        return f"({text})" if _level > 0 else text
    if isinstance(pred, And):
        right = pred_to_source(pred.right, 1)
        if isinstance(pred.right, And):
            right = f"({right})"
        text = f"{pred_to_source(pred.left, 1)} & {right}"
        return f"({text})" if _level > 1 else text
    if isinstance(pred, Not):
        return f"not({pred_to_source(pred.inner, 0)})"
    if isinstance(pred, Comparison):
        return f"{expr_to_source(pred.left)} {pred.op} {expr_to_source(pred.right)}"
    if isinstance(pred, RangeMembership):
        return (
            f"{expr_to_source(pred.expr)} : "
            f"{expr_to_source(pred.low)}..{expr_to_source(pred.high)}"
        )
    if isinstance(pred, SetMembership):
        return f"{expr_to_source(pred.expr)} : {pred.set_name}"
    if isinstance(pred, TruePredicate):
        return "0 = 0"
    raise TypeError(f"not a predicate: {type(pred).__name__}")


def subst_to_source(sub: Substitution) -> str:
    if isinstance(sub, Assign):
        return f"{sub.variable} := {expr_to_source(sub.expr)}"
    if isinstance(sub, Sequence):
        return "; ".join(subst_to_source(s) for s in sub.steps)
    if isinstance(sub, Precondition):
        return f"PRE {pred_to_source(sub.guard)} THEN {subst_to_source(sub.body)} END"
    if isinstance(sub, Select):
        parts = []
        for i, (guard, body) in enumerate(sub.branches):
            head = "SELECT" if i == 0 else "WHEN"
            parts.append(f"{head} {pred_to_source(guard)} THEN {subst_to_source(body)}")
        return " ".join(parts) + " END"
    if isinstance(sub, AnyChoice):
        ids = ", ".join(sub.identifiers)
        return (
            f"ANY {ids} WHERE {pred_to_source(sub.where)} "
            f"THEN {subst_to_source(sub.body)} END"
        )
    if isinstance(sub, Skip):
        return "skip"
    raise TypeError(f"not a substitution: {type(sub).__name__}")


def machine_to_source(machine: MachineAST) -> str:
    lines = [f"MACHINE {machine.name}"]
    if machine.sets:
        decls = "; ".join(
            f"{name} = {{{', '.join(elements)}}}" for name, elements in machine.sets
        )
        lines.append(f"SETS {decls}")
    lines.append(f"VARIABLES {', '.join(machine.variables)}")
    lines.append(f"INVARIANT {pred_to_source(machine.invariant)}")
    lines.append(f"INITIALISATION {subst_to_source(machine.initialisation)}")
    lines.append("OPERATIONS")
    op_lines = [
        f"  {name} = {subst_to_source(body)}" for name, body in machine.operations
    ]
    lines.append(";\n".join(op_lines))
    lines.append("END")
    return "\n".join(lines) + "\n"
