"""Conservative purity and write-set analysis for mutation applicability.

Purity here is judged syntactically: built-in arithmetic/comparison/bitwise
operators, reads of locals, reads of state variables that the relevant region
does not write, and keccak256/abi.encode* over pure arguments. Anything else
(external calls, assignments, opaque regions) poisons purity. False negatives
only shrink the site set; false positives would break the equivalence
guarantee, so every doubtful case answers "impure".
"""

from __future__ import annotations

from dataclasses import dataclass, field

from idol.syntax import nodes as N
from idol.syntax.tokens import IDENT, tokenize

PURE_BUILTIN_CALLEES = frozenset({"keccak256", "addmod", "mulmod"})
PURE_ABI_MEMBERS = frozenset({"encode", "encodePacked", "encodeWithSelector",
                              "encodeWithSignature"})


@dataclass
class WriteEffects:
    """Names a region may assign, plus coarse poison flags."""
    names: set[str] = field(default_factory=set)
    all_state: bool = False   # some call/opaque region may write any state var
    unknown: bool = False     # region not analyzable at all (poison everything)

    def update(self, other: "WriteEffects") -> None:
        self.names |= other.names
        self.all_state = self.all_state or other.all_state
        self.unknown = self.unknown or other.unknown


def _lvalue_base_name(expr: N.Node) -> str | None:
    while isinstance(expr, (N.IndexAccess, N.MemberAccess)):
        expr = expr.base if isinstance(expr, N.IndexAccess) else expr.obj
    if isinstance(expr, N.Identifier):
        return expr.name
    return None


def _assembly_write_targets(text: str) -> set[str]:
    """Identifiers assigned with `:=` inside an inline assembly block.

    Yul can only modify Solidity locals through `name := expr`; storage is
    covered separately by the all_state flag.
    """
    targets: set[str] = set()
    try:
        toks = tokenize(text)
    except Exception:
        return {"*unparseable*"}
    for i, tok in enumerate(toks):
        if tok.text == ":=" and i > 0 and toks[i - 1].kind == IDENT:
            targets.add(toks[i - 1].text)
    return targets


def write_effects(node: N.Node, source: str) -> WriteEffects:
    """Everything `node` (a statement or expression subtree) may write."""
    eff = WriteEffects()
    _collect_writes(node, source, eff)
    return eff


def _collect_writes(node: N.Node, source: str, eff: WriteEffects) -> None:
    if isinstance(node, N.OpaqueStatement):
        if node.construct == "assembly":
            eff.names |= _assembly_write_targets(node.text(source))
            eff.all_state = True
        else:
            # unchecked / try bodies are not analyzed
            eff.unknown = True
        return
    if isinstance(node, N.VarDecl):
        # a nested declaration shadows (or at least redefines) the name
        eff.names.add(node.name)
        if node.init is not None:
            _collect_writes(node.init, source, eff)
        return
    if isinstance(node, N.Assignment):
        base = _lvalue_base_name(node.lhs)
        eff.names.add(base if base is not None else "*unknown-lvalue*")
        if base is None:
            eff.unknown = True
        _collect_writes(node.rhs, source, eff)
        # index/member sub-expressions of the lhs may contain reads with writes
        if not isinstance(node.lhs, N.Identifier):
            _collect_writes(node.lhs, source, eff)
        return
    if isinstance(node, N.UnaryOp) and node.op in ("++", "--", "delete"):
        base = _lvalue_base_name(node.operand)
        eff.names.add(base if base is not None else "*unknown-lvalue*")
        if base is None:
            eff.unknown = True
        _collect_writes(node.operand, source, eff)
        return
    if isinstance(node, N.FunctionCall):
        if not _is_pure_callee(node.callee):
            # user or unknown function: cannot write caller locals, but may
            # write arbitrary state
            eff.all_state = True
        for arg in node.args:
            _collect_writes(arg, source, eff)
        _collect_writes(node.callee, source, eff)
        return
    for child in node.children():
        _collect_writes(child, source, eff)


def _is_pure_callee(callee: N.Node) -> bool:
    if isinstance(callee, N.Identifier):
        return callee.name in PURE_BUILTIN_CALLEES or callee.name in ("require", "assert")
    if isinstance(callee, N.MemberAccess) and isinstance(callee.obj, N.Identifier):
        return callee.obj.name == "abi" and callee.member in PURE_ABI_MEMBERS
    if isinstance(callee, N.ElementaryTypeExpr):
        return True  # type conversion
    return False


@dataclass
class Scope:
    """Name environment of one function body."""
    locals_: dict[str, str] = field(default_factory=dict)   # name -> elementary type or ""
    state: dict[str, str] = field(default_factory=dict)

    def is_local(self, name: str) -> bool:
        return name in self.locals_

    def is_state(self, name: str) -> bool:
        return name in self.state


def _type_label(t: N.TypeName | None) -> str:
    if isinstance(t, (N.MappingType, N.ArrayType)):
        return ""
    return t.name if t is not None else ""


def build_scope(contract: N.Contract, fn: N.FunctionDef) -> Scope:
    scope = Scope()
    for member in contract.members:
        if isinstance(member, N.StateVar):
            scope.state[member.name] = _type_label(member.decl_type)
    for p in fn.params + fn.returns_params:
        if p.name:
            scope.locals_[p.name] = _type_label(p.decl_type)
    if fn.body is not None:
        for n in _walk_skipping_opaque(fn.body):
            if isinstance(n, N.VarDecl):
                scope.locals_[n.name] = _type_label(n.decl_type)
    return scope


def _walk_skipping_opaque(node: N.Node):
    yield node
    if isinstance(node, N.OpaqueStatement):
        return
    for child in node.children():
        yield from _walk_skipping_opaque(child)


def free_identifiers(expr: N.Node) -> set[str]:
    """Variable names read by an expression (callee names of builtins excluded)."""
    out: set[str] = set()
    _collect_free(expr, out)
    return out


def _collect_free(expr: N.Node, out: set[str]) -> None:
    if isinstance(expr, N.Identifier):
        out.add(expr.name)
        return
    if isinstance(expr, N.FunctionCall):
        if not _is_pure_callee(expr.callee):
            _collect_free(expr.callee, out)
        elif isinstance(expr.callee, N.MemberAccess):
            pass  # abi.encode*: no variable read in the callee
        for arg in expr.args:
            _collect_free(arg, out)
        return
    if isinstance(expr, N.MemberAccess):
        _collect_free(expr.obj, out)
        return
    for child in expr.children():
        _collect_free(child, out)


def is_pure_expr(expr: N.Node, scope: Scope, region_writes: WriteEffects | None = None) -> bool:
    """True when re-evaluating `expr` anywhere in the region yields the same
    value and has no side effects (gas aside)."""
    writes = region_writes or WriteEffects()
    if writes.unknown:
        return False
    return _pure(expr, scope, writes)


def _pure(expr: N.Node, scope: Scope, writes: WriteEffects) -> bool:
    if isinstance(expr, (N.NumberLiteral, N.BoolLiteral, N.StringLiteral,
                         N.ElementaryTypeExpr)):
        return True
    if isinstance(expr, N.Identifier):
        name = expr.name
        if name in writes.names:
            return False
        if scope.is_local(name):
            return True
        if scope.is_state(name):
            return not writes.all_state
        return False
    if isinstance(expr, N.IndexAccess):
        if expr.index is None:
            return False
        base = _lvalue_base_name(expr.base)
        if base is None or base in writes.names:
            return False
        if scope.is_state(base) and writes.all_state:
            return False
        if not (scope.is_local(base) or scope.is_state(base)):
            return False
        return _pure(expr.index, scope, writes)
    if isinstance(expr, N.MemberAccess):
        if expr.member == "length":
            base = _lvalue_base_name(expr.obj)
            if base is None or base in writes.names:
                return False
            if scope.is_state(base) and writes.all_state:
                return False
            return scope.is_local(base) or scope.is_state(base)
        return False
    if isinstance(expr, N.UnaryOp):
        if expr.op in ("++", "--", "delete"):
            return False
        return _pure(expr.operand, scope, writes)
    if isinstance(expr, N.BinaryOp):
        return _pure(expr.left, scope, writes) and _pure(expr.right, scope, writes)
    if isinstance(expr, N.Conditional):
        return (_pure(expr.cond, scope, writes)
                and _pure(expr.then_expr, scope, writes)
                and _pure(expr.else_expr, scope, writes))
    if isinstance(expr, N.TupleExpr):
        return all(_pure(item, scope, writes) for item in expr.items)
    if isinstance(expr, N.FunctionCall):
        callee = expr.callee
        ok = (isinstance(callee, N.ElementaryTypeExpr)
              or (isinstance(callee, N.Identifier) and callee.name in PURE_BUILTIN_CALLEES)
              or (isinstance(callee, N.MemberAccess)
                  and isinstance(callee.obj, N.Identifier)
                  and callee.obj.name == "abi" and callee.member in PURE_ABI_MEMBERS))
        if not ok:
            return False
        return all(_pure(arg, scope, writes) for arg in expr.args)
    return False


def is_integer_type(label: str) -> bool:
    if label in ("uint", "int"):
        return True
    for prefix in ("uint", "int"):
        if label.startswith(prefix) and label[len(prefix):].isdigit():
            return True
    return False


def infer_type(expr: N.Node, scope: Scope) -> str | None:
    """Minimal type inference; None means "not confidently known"."""
    if isinstance(expr, N.Identifier):
        label = scope.locals_.get(expr.name) or scope.state.get(expr.name) or ""
        return label or None
    if isinstance(expr, N.BoolLiteral):
        return "bool"
    if isinstance(expr, N.NumberLiteral):
        return None  # polymorphic rational constant
    if isinstance(expr, N.TupleExpr) and expr.kind == "paren":
        return infer_type(expr.items[0], scope)
    if isinstance(expr, N.FunctionCall):
        if isinstance(expr.callee, N.ElementaryTypeExpr):
            return expr.callee.name
        if isinstance(expr.callee, N.Identifier) and expr.callee.name == "keccak256":
            return "bytes32"
        return None
    if isinstance(expr, N.UnaryOp):
        if expr.op == "!":
            return "bool"
        if expr.op in ("-", "~", "+"):
            return infer_type(expr.operand, scope)
        return None
    if isinstance(expr, N.BinaryOp):
        if expr.op in ("<", ">", "<=", ">=", "==", "!=", "&&", "||"):
            return "bool"
        left = infer_type(expr.left, scope)
        right = infer_type(expr.right, scope)
        if expr.op in ("<<", ">>", "**"):
            return left
        if left is not None and right is not None:
            return left if left == right else None
        return left if right is None else right
    if isinstance(expr, N.Conditional):
        t1 = infer_type(expr.then_expr, scope)
        t2 = infer_type(expr.else_expr, scope)
        if t1 is not None and t2 is not None:
            return t1 if t1 == t2 else None
        return t1 if t2 is None else t2
    return None
