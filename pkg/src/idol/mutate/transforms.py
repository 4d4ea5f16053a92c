"""Site discovery and edit construction for each transformation kind.

Each kind knows how to find applicable sites on a parsed unit and how to turn
one site into an EditSet. All replacement text is built from exact source
slices so that unmutated bytes survive untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from idol.mutate import analysis as A
from idol.syntax import nodes as N
from idol.syntax.edits import EditSet
from idol.syntax.tokens import tokenize

Span = tuple[int, int]


@dataclass
class Site:
    kind: str
    anchor: Span
    bindings: dict[str, Span] = field(default_factory=dict)
    source_sha: str = ""
    data: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": list(self.anchor),
            "bindings": {k: list(v) for k, v in self.bindings.items()},
            "source_sha": self.source_sha,
            "data": {k: v for k, v in self.data.items()},
        }


def _line_indent(source: str, pos: int) -> str:
    nl = source.rfind("\n", 0, pos)
    start = nl + 1
    end = start
    while end < len(source) and source[end] in " \t":
        end += 1
    return source[start:end]


def _tokens_equal(source: str, a: Span, b: Span) -> bool:
    ta = [t.text for t in tokenize(source[a[0]:a[1]])]
    tb = [t.text for t in tokenize(source[b[0]:b[1]])]
    return ta == tb


def _iter_function_contexts(ast: N.SourceFile):
    for item in ast.items:
        if not isinstance(item, N.Contract):
            continue
        for member in item.members:
            if isinstance(member, N.FunctionDef) and member.body is not None \
                    and not member.is_modifier:
                yield item, member


def _blocks_in(body: N.Block):
    """All blocks reachable without entering opaque statements."""
    stack = [body]
    while stack:
        blk = stack.pop()
        yield blk
        for stmt in blk.statements:
            stack.extend(_nested_blocks(stmt))


def _nested_blocks(stmt: N.Node) -> list[N.Block]:
    if isinstance(stmt, N.Block):
        return [stmt]
    if isinstance(stmt, N.If):
        out = _nested_blocks(stmt.then_stmt)
        if stmt.else_stmt is not None:
            out += _nested_blocks(stmt.else_stmt)
        return out
    if isinstance(stmt, (N.While, N.DoWhile)):
        return _nested_blocks(stmt.body)
    if isinstance(stmt, N.For):
        return _nested_blocks(stmt.body)
    return []


def _region_writes(loop: N.Node, source: str) -> A.WriteEffects:
    eff = A.WriteEffects()
    if isinstance(loop, (N.While, N.DoWhile)):
        eff.update(A.write_effects(loop.body, source))
        eff.update(A.write_effects(loop.cond, source))
    elif isinstance(loop, N.For):
        eff.update(A.write_effects(loop.body, source))
        if loop.cond is not None:
            eff.update(A.write_effects(loop.cond, source))
        if loop.post is not None:
            eff.update(A.write_effects(loop.post, source))
    return eff


# --------------------------------------------------------------------------
# ReverseLICM


def discover_licm(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    for contract, fn in _iter_function_contexts(ast):
        scope = A.build_scope(contract, fn)
        for block in _blocks_in(fn.body):
            stmts = block.statements
            for idx, stmt in enumerate(stmts):
                if not isinstance(stmt, (N.While, N.For)) or idx == 0:
                    continue
                if not isinstance(getattr(stmt, "body", None), N.Block):
                    continue
                writes = _region_writes(stmt, source)
                if writes.unknown:
                    continue
                group: list[tuple[str, Span, Span]] = []  # (var, stmt span, rhs span)
                taken: set[str] = set()
                j = idx - 1
                while j >= 0:
                    prev = stmts[j]
                    binding = _licm_binding(prev, scope, writes, source, taken)
                    if binding is None:
                        break
                    group.append(binding)
                    taken.add(binding[0])
                    j -= 1
                if not group:
                    continue
                group.reverse()
                body: N.Block = stmt.body
                site = Site(
                    kind="ReverseLICM",
                    anchor=stmt.span,
                    bindings={"body": body.span,
                              **{f"stmt{i}": g[1] for i, g in enumerate(group)},
                              **{f"rhs{i}": g[2] for i, g in enumerate(group)}},
                    data={"vars": [g[0] for g in group], "count": len(group)},
                )
                sites.append(site)
    return sites


def _licm_binding(stmt: N.Node, scope: A.Scope, writes: A.WriteEffects,
                  source: str, taken: set[str]) -> tuple[str, Span, Span] | None:
    """Qualify one pre-loop statement as `v = e;` duplicable into the loop."""
    if isinstance(stmt, N.ExprStatement) and isinstance(stmt.expr, N.Assignment) \
            and stmt.expr.op == "=" and isinstance(stmt.expr.lhs, N.Identifier):
        var = stmt.expr.lhs.name
        rhs = stmt.expr.rhs
    elif isinstance(stmt, N.VarDecl) and stmt.init is not None:
        var = stmt.name
        rhs = stmt.init
    else:
        return None
    if var in taken or not scope.is_local(var):
        return None
    if var in writes.names:
        return None
    if not A.is_pure_expr(rhs, scope, writes):
        return None
    deps = A.free_identifiers(rhs)
    if var in deps:
        return None  # self-referential assignment is not idempotent
    if deps & writes.names:
        return None
    return var, stmt.span, rhs.span


def apply_licm(source: str, site: Site) -> EditSet:
    body_lo, _ = site.bindings["body"]
    count = site.data["count"]
    pieces: list[str] = []
    # indentation of the first body line, or the loop line plus one level
    first_stmt_indent = None
    brace_line_indent = _line_indent(source, site.anchor[0])
    after_brace = source[body_lo + 1:]
    m = re.match(r"\n([ \t]*)\S", after_brace)
    if m:
        first_stmt_indent = m.group(1)
    indent = first_stmt_indent if first_stmt_indent is not None else brace_line_indent + "    "
    for i in range(count):
        var = site.data["vars"][i]
        stmt_span = site.bindings[f"stmt{i}"]
        rhs_span = site.bindings[f"rhs{i}"]
        stmt_text = source[stmt_span[0]:stmt_span[1]]
        if stmt_text.rstrip().endswith(";") and "=" in stmt_text and not _is_decl(stmt_text):
            text = stmt_text.strip()
        else:
            text = f"{var} = {source[rhs_span[0]:rhs_span[1]]};"
        pieces.append("\n" + indent + text)
    edits = EditSet()
    edits.add((body_lo + 1, body_lo + 1), "".join(pieces))
    return edits


def _is_decl(stmt_text: str) -> bool:
    first = stmt_text.split(None, 1)[0] if stmt_text.split() else ""
    from idol.syntax.tokens import is_elementary_type_name
    return is_elementary_type_name(first) or first == "mapping"


# --------------------------------------------------------------------------
# ReverseLoopInversion


def discover_loop_inversion(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    for contract, fn in _iter_function_contexts(ast):
        scope = A.build_scope(contract, fn)
        for block in _blocks_in(fn.body):
            for stmt in block.statements:
                site = _match_inversion(stmt, scope, source)
                if site is not None:
                    sites.append(site)
    return sites


def _match_inversion(stmt: N.Node, scope: A.Scope, source: str) -> Site | None:
    if not isinstance(stmt, N.If) or stmt.else_stmt is not None:
        return None
    inner = stmt.then_stmt
    if isinstance(inner, N.Block):
        if len(inner.statements) != 1:
            return None
        inner = inner.statements[0]
    if not isinstance(inner, N.DoWhile):
        return None
    if not _tokens_equal(source, stmt.cond.span, inner.cond.span):
        return None
    if not A.is_pure_expr(stmt.cond, scope):
        return None
    return Site(
        kind="ReverseLoopInversion",
        anchor=stmt.span,
        bindings={"guard_cond": stmt.cond.span,
                  "do_body": inner.body.span,
                  "do_cond": inner.cond.span},
    )


def apply_loop_inversion(source: str, site: Site) -> EditSet:
    cond_lo, cond_hi = site.bindings["guard_cond"]
    body_lo, body_hi = site.bindings["do_body"]
    replacement = f"while ({source[cond_lo:cond_hi]}) {source[body_lo:body_hi]}"
    edits = EditSet()
    edits.add(site.anchor, replacement)
    return edits


# --------------------------------------------------------------------------
# ReverseCSE


def discover_cse(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    for contract, fn in _iter_function_contexts(ast):
        scope = A.build_scope(contract, fn)
        for block in _blocks_in(fn.body):
            stmts = block.statements
            for idx, stmt in enumerate(stmts):
                decl = _cse_decl(stmt, scope, source)
                if decl is None:
                    continue
                var, rhs, decl_type = decl
                deps = A.free_identifiers(rhs) | {var}
                state_deps = {d for d in A.free_identifiers(rhs) if scope.is_state(d)}
                uses: list[Span] = []
                _scan_uses(stmts[idx + 1:], var, deps, state_deps, scope, source, uses)
                if not uses:
                    continue
                sites.append(Site(
                    kind="ReverseCSE",
                    anchor=stmt.span,
                    bindings={"rhs": rhs.span,
                              **{f"use{i}": u for i, u in enumerate(uses)}},
                    data={"var": var, "uses": len(uses)},
                ))
    return sites


def _cse_decl(stmt: N.Node, scope: A.Scope, source: str):
    """Match `T t = e;` (or `t = e;` on a declared local) with exactly-typed pure e."""
    if isinstance(stmt, N.VarDecl) and stmt.init is not None and stmt.location is None:
        var, rhs = stmt.name, stmt.init
        decl_type = A._type_label(stmt.decl_type)
    elif isinstance(stmt, N.ExprStatement) and isinstance(stmt.expr, N.Assignment) \
            and stmt.expr.op == "=" and isinstance(stmt.expr.lhs, N.Identifier):
        var, rhs = stmt.expr.lhs.name, stmt.expr.rhs
        decl_type = scope.locals_.get(var, "")
    else:
        return None
    if not scope.is_local(var) or not decl_type:
        return None
    if not A.is_pure_expr(rhs, scope):
        return None
    if isinstance(rhs, N.Identifier):
        return None  # replacing a use with another bare name adds nothing
    inferred = A.infer_type(rhs, scope)
    if inferred != decl_type:
        return None  # exact type match keeps checked-arithmetic widths identical
    return var, rhs, decl_type


def _scan_uses(stmts: list[N.Node], var: str, deps: set[str], state_deps: set[str],
               scope: A.Scope, source: str, uses: list[Span]) -> bool:
    """Collect replaceable uses in execution order; returns False once killed."""
    for stmt in stmts:
        if isinstance(stmt, (N.Break, N.Continue)):
            return False
        if isinstance(stmt, N.Return):
            if stmt.value is not None:
                _collect_reads(stmt.value, var, uses)
            return False
        if isinstance(stmt, N.OpaqueStatement):
            eff = A.write_effects(stmt, source)
            if eff.unknown or (eff.names & deps) or (state_deps and eff.all_state):
                return False
            continue
        if isinstance(stmt, N.If):
            if not _stmt_kills(stmt.cond, deps, state_deps, source):
                _collect_reads(stmt.cond, var, uses)
            else:
                return False
            then_alive = _scan_uses(_as_stmts(stmt.then_stmt), var, deps, state_deps,
                                    scope, source, uses)
            else_alive = True
            if stmt.else_stmt is not None:
                else_alive = _scan_uses(_as_stmts(stmt.else_stmt), var, deps, state_deps,
                                        scope, source, uses)
            if not (then_alive and else_alive):
                return False
            continue
        if isinstance(stmt, (N.While, N.DoWhile, N.For)):
            eff = _region_writes(stmt, source)
            if isinstance(stmt, N.For) and stmt.init is not None:
                eff.update(A.write_effects(stmt.init, source))
            if eff.unknown or (eff.names & deps) or (state_deps and eff.all_state):
                return False
            # loop writes nothing relevant: uses inside see unchanged values
            for span in _loop_exprs(stmt):
                _collect_reads(span, var, uses)
            inner = _as_stmts(stmt.body)
            if not _scan_uses(inner, var, deps, state_deps, scope, source, uses):
                return False
            continue
        if isinstance(stmt, N.Block):
            if not _scan_uses(stmt.statements, var, deps, state_deps, scope, source, uses):
                return False
            continue
        # simple statement: collect reads that happen before any kill it performs
        kills = _stmt_kills(stmt, deps, state_deps, source)
        if kills and isinstance(stmt, N.ExprStatement) \
                and isinstance(stmt.expr, N.Assignment) and stmt.expr.op == "=":
            # rhs evaluates before the store
            _collect_reads(stmt.expr.rhs, var, uses)
            return False
        if kills:
            return False
        _collect_reads(stmt, var, uses)
    return True


def _as_stmts(stmt: N.Node) -> list[N.Node]:
    return stmt.statements if isinstance(stmt, N.Block) else [stmt]


def _loop_exprs(stmt: N.Node) -> list[N.Node]:
    out = []
    if isinstance(stmt, (N.While, N.DoWhile)):
        out.append(stmt.cond)
    elif isinstance(stmt, N.For):
        out.extend(x for x in (stmt.cond, stmt.post) if x is not None)
    return out


def _stmt_kills(stmt: N.Node, deps: set[str], state_deps: set[str], source: str) -> bool:
    eff = A.write_effects(stmt, source)
    return eff.unknown or bool(eff.names & deps) or bool(state_deps and eff.all_state)


def _collect_reads(node: N.Node, var: str, uses: list[Span]) -> None:
    if isinstance(node, N.Assignment):
        _collect_reads(node.rhs, var, uses)
        if isinstance(node.lhs, (N.IndexAccess, N.MemberAccess)):
            _collect_reads(node.lhs, var, uses)
        return
    if isinstance(node, N.UnaryOp) and node.op in ("++", "--", "delete"):
        return
    if isinstance(node, N.Identifier) and node.name == var:
        uses.append(node.span)
        return
    if isinstance(node, N.OpaqueStatement):
        return
    for child in node.children():
        _collect_reads(child, var, uses)


def apply_cse(source: str, site: Site) -> EditSet:
    rhs_lo, rhs_hi = site.bindings["rhs"]
    replacement = f"({source[rhs_lo:rhs_hi]})"
    edits = EditSet()
    for i in range(site.data["uses"]):
        edits.add(site.bindings[f"use{i}"], replacement)
    return edits


# --------------------------------------------------------------------------
# LiteralObfuscation


_DECIMAL_RE = re.compile(r"\A[0-9][0-9_]*\Z")


def discover_literal_obfuscation(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    for _contract, fn in _iter_function_contexts(ast):
        _literal_sites(fn.body, sites)
    for item in ast.items:
        if isinstance(item, N.Contract):
            for member in item.members:
                if isinstance(member, N.StateVar) and member.init is not None \
                        and not member.is_constant:
                    _literal_sites(member.init, sites)
    sites.sort(key=lambda s: s.anchor[0])
    return sites


def _literal_sites(node: N.Node, sites: list[Site]) -> None:
    if isinstance(node, (N.OpaqueStatement, N.TypeName)):
        return
    if isinstance(node, N.NumberLiteral):
        if not node.is_hex and node.unit is None and _DECIMAL_RE.match(node.raw):
            sites.append(Site(kind="LiteralObfuscation", anchor=node.span,
                              data={"raw": node.raw}))
        return
    for child in node.children():
        _literal_sites(child, sites)


def apply_literal_obfuscation(source: str, site: Site) -> EditSet:
    raw = site.data["raw"]
    parity = site.data.get("draw", 0) % 2
    replacement = f"({raw} + 0)" if parity == 0 else f"({raw} * 1)"
    edits = EditSet()
    edits.add(site.anchor, replacement)
    return edits


# --------------------------------------------------------------------------
# KeccakDuplication


_HOISTABLE = (N.ExprStatement, N.VarDecl, N.Return, N.Emit)


def discover_keccak_duplication(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    ordinal_base = _next_fresh_ordinal(source, "__idol_h")
    for contract, fn in _iter_function_contexts(ast):
        scope = A.build_scope(contract, fn)
        for block in _blocks_in(fn.body):
            for stmt in block.statements:
                if not isinstance(stmt, _HOISTABLE):
                    continue
                for call, always in _keccak_calls(stmt, True):
                    if not always:
                        continue
                    arg = call.args[0]
                    if not A.is_pure_expr(arg, scope):
                        continue
                    deps = A.free_identifiers(arg)
                    eff = A.write_effects(stmt, source)
                    if eff.unknown or (deps & eff.names):
                        continue
                    state_deps = {d for d in deps if scope.is_state(d)}
                    if state_deps and eff.all_state:
                        continue
                    sites.append(Site(
                        kind="KeccakDuplication",
                        anchor=call.span,
                        bindings={"stmt": stmt.span, "call": call.span},
                        data={"ordinal": ordinal_base + len(sites)},
                    ))
    return sites


def _keccak_calls(node: N.Node, always: bool):
    """Yield (call, always_evaluated) for keccak256 calls under a statement."""
    if isinstance(node, N.OpaqueStatement):
        return
    if isinstance(node, N.FunctionCall) and isinstance(node.callee, N.Identifier) \
            and node.callee.name == "keccak256" and len(node.args) == 1:
        yield node, always
        for arg in node.args:
            yield from _keccak_calls(arg, always)
        return
    if isinstance(node, N.Conditional):
        yield from _keccak_calls(node.cond, always)
        yield from _keccak_calls(node.then_expr, False)
        yield from _keccak_calls(node.else_expr, False)
        return
    if isinstance(node, N.BinaryOp) and node.op in ("&&", "||"):
        yield from _keccak_calls(node.left, always)
        yield from _keccak_calls(node.right, False)
        return
    for child in node.children():
        yield from _keccak_calls(child, always)


def _next_fresh_ordinal(source: str, prefix: str) -> int:
    found = re.findall(re.escape(prefix) + r"(\d+)", source)
    return max((int(x) for x in found), default=-1) + 1


def apply_keccak_duplication(source: str, site: Site) -> EditSet:
    stmt_lo, _ = site.bindings["stmt"]
    call_lo, call_hi = site.bindings["call"]
    n = site.data["ordinal"]
    call_text = source[call_lo:call_hi]
    indent = _line_indent(source, stmt_lo)
    name_a, name_b = f"__idol_h{n}a", f"__idol_h{n}b"
    hoist = (f"bytes32 {name_a} = {call_text};\n{indent}"
             f"bytes32 {name_b} = {call_text};\n{indent}")
    edits = EditSet()
    edits.add((stmt_lo, stmt_lo), hoist)
    edits.add((call_lo, call_hi), f"({name_a} == {name_b} ? {name_a} : {name_b})")
    return edits


# --------------------------------------------------------------------------
# FunctionOutlining


_OUTLINE_OPS = frozenset({"+", "-", "*", "/", "%", "**", "&", "|", "^", "<<", ">>"})
_OUTLINE_CMP = frozenset({"<", ">", "<=", ">=", "==", "!="})


def discover_function_outlining(ast: N.SourceFile, source: str) -> list[Site]:
    sites: list[Site] = []
    ordinal_base = _next_fresh_ordinal(source, "__idol_out")
    for contract, fn in _iter_function_contexts(ast):
        scope = A.build_scope(contract, fn)
        for call in _calls_in_body(fn.body):
            for arg in call.args:
                info = _outline_candidate(arg, scope)
                if info is None:
                    continue
                ret_type, free_vars = info
                sites.append(Site(
                    kind="FunctionOutlining",
                    anchor=arg.span,
                    bindings={"expr": arg.span,
                              "contract_close": (contract.body_end - 1, contract.body_end - 1)},
                    data={"ordinal": ordinal_base + len(sites),
                          "ret_type": ret_type,
                          "params": [[name, scope.locals_[name]] for name in free_vars]},
                ))
    return sites


def _calls_in_body(body: N.Block):
    for node in _walk_no_opaque(body):
        if isinstance(node, N.FunctionCall):
            yield node


def _walk_no_opaque(node: N.Node):
    if isinstance(node, N.OpaqueStatement):
        return
    yield node
    for child in node.children():
        yield from _walk_no_opaque(child)


def _outline_candidate(expr: N.Node, scope: A.Scope):
    """A pure binary expression over same-typed integer locals (literals ok)."""
    if not isinstance(expr, N.BinaryOp):
        return None
    top_cmp = expr.op in _OUTLINE_CMP
    if not top_cmp and expr.op not in _OUTLINE_OPS:
        return None
    names: list[str] = []
    if not _outline_scan(expr, scope, names, top_level=True):
        return None
    if not names:
        return None
    seen: list[str] = []
    for name in names:
        if name not in seen:
            seen.append(name)
    label = scope.locals_[seen[0]]
    if any(scope.locals_[n] != label for n in seen):
        return None
    if not A.is_integer_type(label):
        return None
    if not A.is_pure_expr(expr, scope):
        return None
    ret_type = "bool" if top_cmp else label
    return ret_type, seen


def _outline_scan(node: N.Node, scope: A.Scope, names: list[str], top_level: bool = False) -> bool:
    if isinstance(node, N.BinaryOp):
        if node.op in _OUTLINE_CMP:
            if not top_level:
                return False
            return (_outline_scan(node.left, scope, names)
                    and _outline_scan(node.right, scope, names))
        if node.op not in _OUTLINE_OPS:
            return False
        return (_outline_scan(node.left, scope, names)
                and _outline_scan(node.right, scope, names))
    if isinstance(node, N.TupleExpr) and node.kind == "paren":
        return _outline_scan(node.items[0], scope, names)
    if isinstance(node, N.Identifier):
        if not scope.is_local(node.name) or not scope.locals_[node.name]:
            return False
        names.append(node.name)
        return True
    if isinstance(node, N.NumberLiteral):
        return not node.is_hex and node.unit is None and _DECIMAL_RE.match(node.raw) is not None
    return False


def apply_function_outlining(source: str, site: Site) -> EditSet:
    expr_lo, expr_hi = site.bindings["expr"]
    close_pos = site.bindings["contract_close"][0]
    n = site.data["ordinal"]
    name = f"__idol_out{n}"
    params = site.data["params"]
    param_list = ", ".join(f"{label} {pname}" for pname, label in params)
    arg_list = ", ".join(pname for pname, _ in params)
    expr_text = source[expr_lo:expr_hi]
    fn_text = (f"\n    function {name}({param_list}) private pure "
               f"returns ({site.data['ret_type']}) {{\n"
               f"        return {expr_text};\n"
               f"    }}\n")
    edits = EditSet()
    edits.add((expr_lo, expr_hi), f"{name}({arg_list})")
    edits.add((close_pos, close_pos), fn_text)
    return edits
