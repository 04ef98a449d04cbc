"""AST node types for the supported Solidity subset.

Every node carries a :class:`SourceSpan`. Constructs outside the subset are
kept as opaque nodes with their raw text and span, never dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..source import SourceSpan


@dataclass(frozen=True)
class Node:
    span: SourceSpan


# --- expressions ---

@dataclass(frozen=True)
class Expr(Node):
    pass


@dataclass(frozen=True)
class Identifier(Expr):
    name: str


@dataclass(frozen=True)
class Literal(Expr):
    kind: str  # number | string | bool | hex
    value: str


@dataclass(frozen=True)
class MemberAccess(Expr):
    obj: Expr
    member: str


@dataclass(frozen=True)
class IndexAccess(Expr):
    base: Expr
    index: Expr | None


@dataclass(frozen=True)
class CallExpr(Expr):
    callee: Expr
    args: tuple[Expr, ...]
    # call options like {value: x} on external calls
    options: tuple[tuple[str, Expr], ...] = ()


@dataclass(frozen=True)
class NewExpr(Expr):
    type_text: str


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str
    operand: Expr
    prefix: bool = True


@dataclass(frozen=True)
class Conditional(Expr):
    condition: Expr
    then_expr: Expr
    else_expr: Expr


@dataclass(frozen=True)
class TupleExpr(Expr):
    items: tuple[Expr, ...]


# --- statements ---

@dataclass(frozen=True)
class Statement(Node):
    pass


@dataclass(frozen=True)
class ExprStatement(Statement):
    expr: Expr


@dataclass(frozen=True)
class Assignment(Statement):
    target: Expr
    op: str  # "=", "+=", "-=", ...
    value: Expr


@dataclass(frozen=True)
class VarDeclStatement(Statement):
    type_text: str
    name: str
    initializer: Expr | None


@dataclass(frozen=True)
class IfStatement(Statement):
    condition: Expr
    then_body: tuple[Statement, ...]
    else_body: tuple[Statement, ...] | None


@dataclass(frozen=True)
class ForStatement(Statement):
    init: Statement | None
    condition: Expr | None
    update: Statement | None
    body: tuple[Statement, ...]


@dataclass(frozen=True)
class WhileStatement(Statement):
    condition: Expr
    body: tuple[Statement, ...]


@dataclass(frozen=True)
class ReturnStatement(Statement):
    value: Expr | None


@dataclass(frozen=True)
class EmitStatement(Statement):
    call: CallExpr


@dataclass(frozen=True)
class Block(Statement):
    statements: tuple[Statement, ...]


@dataclass(frozen=True)
class BreakStatement(Statement):
    pass


@dataclass(frozen=True)
class ContinueStatement(Statement):
    pass


@dataclass(frozen=True)
class OpaqueStatement(Statement):
    """Unsupported construct, retained verbatim (assembly, try/catch, ...)."""
    text: str


# --- declarations ---

@dataclass(frozen=True)
class Param(Node):
    type_text: str
    name: str  # may be "" for unnamed params


@dataclass(frozen=True)
class ModifierInvocation(Node):
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class StateVarDecl(Node):
    name: str
    type_text: str
    visibility: str  # public | private | internal | external | "" (default)
    mutability: str  # "", "constant" or "immutable"
    initializer: Expr | None


@dataclass(frozen=True)
class FunctionDecl(Node):
    name: str
    kind: str  # function | constructor | modifier | receive | fallback
    params: tuple[Param, ...]
    returns: tuple[Param, ...]
    visibility: str
    mutability: str  # "", view, pure, payable
    modifiers: tuple[ModifierInvocation, ...]
    body: tuple[Statement, ...] | None  # None when unimplemented

    @property
    def param_types(self) -> tuple[str, ...]:
        return tuple(p.type_text for p in self.params)

    def signature(self) -> str:
        return f"{self.name}({','.join(self.param_types)})"


@dataclass(frozen=True)
class OpaqueDecl(Node):
    """Contract member outside the subset (struct, event, using, ...)."""
    keyword: str
    text: str


@dataclass(frozen=True)
class ContractDecl(Node):
    name: str
    kind: str  # contract | interface | library
    inheritance: tuple[str, ...]
    state_vars: tuple[StateVarDecl, ...]
    functions: tuple[FunctionDecl, ...]
    others: tuple[OpaqueDecl, ...] = ()


@dataclass(frozen=True)
class ImportDirective(Node):
    path: str


@dataclass(frozen=True)
class Ast(Node):
    imports: tuple[ImportDirective, ...]
    contracts: tuple[ContractDecl, ...]
    others: tuple[OpaqueDecl, ...] = ()


def strip_spans(node):
    """Structure of a node as nested tuples with spans removed.

    Used to compare nodes for structural equality independent of their
    position in the file.
    """
    if isinstance(node, Node):
        fields = []
        for name in node.__dataclass_fields__:
            if name == "span":
                continue
            fields.append(strip_spans(getattr(node, name)))
        return (type(node).__name__, tuple(fields))
    if isinstance(node, tuple):
        return tuple(strip_spans(item) for item in node)
    return node


def walk_expr(expr: Expr):
    """Yield ``expr`` and every sub-expression, depth first."""
    yield expr
    if isinstance(expr, MemberAccess):
        yield from walk_expr(expr.obj)
    elif isinstance(expr, IndexAccess):
        yield from walk_expr(expr.base)
        if expr.index is not None:
            yield from walk_expr(expr.index)
    elif isinstance(expr, CallExpr):
        yield from walk_expr(expr.callee)
        for arg in expr.args:
            yield from walk_expr(arg)
        for _, value in expr.options:
            yield from walk_expr(value)
    elif isinstance(expr, BinaryOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, UnaryOp):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Conditional):
        yield from walk_expr(expr.condition)
        yield from walk_expr(expr.then_expr)
        yield from walk_expr(expr.else_expr)
    elif isinstance(expr, TupleExpr):
        for item in expr.items:
            yield from walk_expr(item)


def walk_statements(body):
    """Yield every statement in ``body``, recursing into nested bodies."""
    for stmt in body or ():
        yield stmt
        if isinstance(stmt, IfStatement):
            yield from walk_statements(stmt.then_body)
            if stmt.else_body is not None:
                yield from walk_statements(stmt.else_body)
        elif isinstance(stmt, ForStatement):
            if stmt.init is not None:
                yield from walk_statements((stmt.init,))
            if stmt.update is not None:
                yield from walk_statements((stmt.update,))
            yield from walk_statements(stmt.body)
        elif isinstance(stmt, WhileStatement):
            yield from walk_statements(stmt.body)
        elif isinstance(stmt, Block):
            yield from walk_statements(stmt.statements)
