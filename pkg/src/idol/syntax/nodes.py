"""Span-annotated AST nodes.

Every node records the character span of its full syntactic extent in the
original source. Child spans nest strictly inside their parent and siblings
never overlap; the reprint check in the parser module relies on this to
guarantee lossless round-trips. Nodes never store normalized text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

Span = tuple[int, int]


@dataclass
class Node:
    kind: str
    span: Span

    def children(self) -> list["Node"]:
        out: list[Node] = []
        for name in getattr(self, "_child_fields", ()):
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, list):
                out.extend(v for v in value if isinstance(v, Node))
            elif isinstance(value, Node):
                out.append(value)
        return out

    def text(self, source: str) -> str:
        return source[self.span[0]:self.span[1]]


def walk(node: Node) -> Iterator[Node]:
    """Yield node and all descendants in source (pre)order."""
    yield node
    for child in node.children():
        yield from walk(child)


# --------------------------------------------------------------------------
# types


@dataclass
class TypeName(Node):
    name: str  # canonical-ish source text for elementary types; raw otherwise
    _child_fields = ()


@dataclass
class MappingType(TypeName):
    key: TypeName = None  # type: ignore[assignment]
    value: TypeName = None  # type: ignore[assignment]
    _child_fields = ("key", "value")


@dataclass
class ArrayType(TypeName):
    base: TypeName = None  # type: ignore[assignment]
    length: Optional["Node"] = None
    _child_fields = ("base", "length")


# --------------------------------------------------------------------------
# expressions


@dataclass
class Identifier(Node):
    name: str = ""
    _child_fields = ()


@dataclass
class NumberLiteral(Node):
    raw: str = ""
    is_hex: bool = False
    unit: Optional[str] = None
    _child_fields = ()


@dataclass
class StringLiteral(Node):
    _child_fields = ()


@dataclass
class BoolLiteral(Node):
    value: bool = False
    _child_fields = ()


@dataclass
class ElementaryTypeExpr(Node):
    """An elementary type name in expression position (conversions, abi args)."""
    name: str = ""
    _child_fields = ()


@dataclass
class TupleExpr(Node):
    items: list[Node] = field(default_factory=list)
    _child_fields = ("items",)


@dataclass
class UnaryOp(Node):
    op: str = ""
    operand: Node = None  # type: ignore[assignment]
    prefix: bool = True
    _child_fields = ("operand",)


@dataclass
class BinaryOp(Node):
    op: str = ""
    left: Node = None  # type: ignore[assignment]
    right: Node = None  # type: ignore[assignment]
    _child_fields = ("left", "right")


@dataclass
class Conditional(Node):
    cond: Node = None  # type: ignore[assignment]
    then_expr: Node = None  # type: ignore[assignment]
    else_expr: Node = None  # type: ignore[assignment]
    _child_fields = ("cond", "then_expr", "else_expr")


@dataclass
class Assignment(Node):
    op: str = "="
    lhs: Node = None  # type: ignore[assignment]
    rhs: Node = None  # type: ignore[assignment]
    _child_fields = ("lhs", "rhs")


@dataclass
class FunctionCall(Node):
    callee: Node = None  # type: ignore[assignment]
    args: list[Node] = field(default_factory=list)
    _child_fields = ("callee", "args")


@dataclass
class IndexAccess(Node):
    base: Node = None  # type: ignore[assignment]
    index: Optional[Node] = None
    _child_fields = ("base", "index")


@dataclass
class MemberAccess(Node):
    obj: Node = None  # type: ignore[assignment]
    member: str = ""
    _child_fields = ("obj",)


@dataclass
class NewExpr(Node):
    type_name: TypeName = None  # type: ignore[assignment]
    _child_fields = ("type_name",)


# --------------------------------------------------------------------------
# statements


@dataclass
class Block(Node):
    statements: list[Node] = field(default_factory=list)
    _child_fields = ("statements",)


@dataclass
class VarDecl(Node):
    """Local variable declaration statement, e.g. `uint256 x = y + 1;`."""
    decl_type: TypeName = None  # type: ignore[assignment]
    location: Optional[str] = None
    name: str = ""
    name_span: Span = (0, 0)
    init: Optional[Node] = None
    _child_fields = ("decl_type", "init")


@dataclass
class ExprStatement(Node):
    expr: Node = None  # type: ignore[assignment]
    _child_fields = ("expr",)


@dataclass
class If(Node):
    cond: Node = None  # type: ignore[assignment]
    then_stmt: Node = None  # type: ignore[assignment]
    else_stmt: Optional[Node] = None
    _child_fields = ("cond", "then_stmt", "else_stmt")


@dataclass
class While(Node):
    cond: Node = None  # type: ignore[assignment]
    body: Node = None  # type: ignore[assignment]
    _child_fields = ("cond", "body")


@dataclass
class DoWhile(Node):
    body: Node = None  # type: ignore[assignment]
    cond: Node = None  # type: ignore[assignment]
    _child_fields = ("body", "cond")


@dataclass
class For(Node):
    init: Optional[Node] = None
    cond: Optional[Node] = None
    post: Optional[Node] = None
    body: Node = None  # type: ignore[assignment]
    _child_fields = ("init", "cond", "post", "body")


@dataclass
class Return(Node):
    value: Optional[Node] = None
    _child_fields = ("value",)


@dataclass
class Break(Node):
    _child_fields = ()


@dataclass
class Continue(Node):
    _child_fields = ()


@dataclass
class Emit(Node):
    call: Node = None  # type: ignore[assignment]
    _child_fields = ("call",)


@dataclass
class OpaqueStatement(Node):
    """assembly / unchecked / try blocks: kept verbatim, excluded from mutation."""
    construct: str = ""
    _child_fields = ()


# --------------------------------------------------------------------------
# declarations


@dataclass
class Param(Node):
    decl_type: TypeName = None  # type: ignore[assignment]
    location: Optional[str] = None
    name: str = ""
    _child_fields = ("decl_type",)


@dataclass
class FunctionDef(Node):
    name: str = ""
    is_constructor: bool = False
    params: list[Param] = field(default_factory=list)
    returns_params: list[Param] = field(default_factory=list)
    mutability: Optional[str] = None  # pure | view | payable | None
    visibility: Optional[str] = None
    is_modifier: bool = False
    body: Optional[Block] = None
    header_span: Span = (0, 0)
    _child_fields = ("params", "returns_params", "body")


@dataclass
class StateVar(Node):
    decl_type: TypeName = None  # type: ignore[assignment]
    name: str = ""
    is_constant: bool = False
    init: Optional[Node] = None
    _child_fields = ("decl_type", "init")


@dataclass
class OpaqueMember(Node):
    """struct/enum/event/error/using declarations: kept verbatim."""
    construct: str = ""
    _child_fields = ()


@dataclass
class Contract(Node):
    name: str = ""
    contract_kind: str = "contract"  # contract | interface | library | abstract
    members: list[Node] = field(default_factory=list)
    body_start: int = 0  # offset of the opening brace
    body_end: int = 0    # offset of the closing brace
    _child_fields = ("members",)


@dataclass
class Pragma(Node):
    value: str = ""
    _child_fields = ()


@dataclass
class SourceFile(Node):
    items: list[Node] = field(default_factory=list)
    _child_fields = ("items",)


def ast_to_dict(node: Node) -> dict:
    """JSON-friendly dump (for the debug flag), spans included."""
    out: dict = {"kind": node.kind, "span": list(node.span)}
    for name in ("name", "op", "raw", "value", "construct", "member", "unit"):
        if hasattr(node, name):
            v = getattr(node, name)
            if isinstance(v, (str, bool, int)) and v != "":
                out[name] = v
    kids = [ast_to_dict(c) for c in node.children()]
    if kids:
        out["children"] = kids
    return out
