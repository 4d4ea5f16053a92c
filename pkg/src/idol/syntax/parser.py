"""Recursive-descent parser for the Solidity grammar subset.

Supported: contracts, state variables, functions/constructors/modifiers,
elementary types, mappings, arrays, the usual control flow, expressions,
require/revert, events/emit, keccak256/abi.encode* calls. Inline assembly,
unchecked and try blocks are kept as opaque spans (never mutated); genuinely
out-of-subset constructs raise UnsupportedConstructError so the corpus layer
can flag the unit instead of mutating code it does not understand.
"""

from __future__ import annotations

from idol.syntax import nodes as N
from idol.syntax.tokens import (
    EOF,
    IDENT,
    NUMBER,
    PUNCT,
    STRING,
    Token,
    UNIT_SUFFIXES,
    is_elementary_type_name,
    line_col,
    tokenize,
)


class ParseError(Exception):
    def __init__(self, message: str, source: str, pos: int):
        line, col = line_col(source, pos)
        super().__init__(f"{message} at line {line}, column {col}")
        self.pos = pos
        self.line = line
        self.col = col


class UnsupportedConstructError(ParseError):
    """Input is valid Solidity but outside the mutable grammar subset."""

    def __init__(self, construct: str, source: str, pos: int):
        super().__init__(f"unsupported construct: {construct}", source, pos)
        self.construct = construct


_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>="}

# binary operator precedence, higher binds tighter
_BINARY_PREC = {
    "**": 100,
    "*": 90, "/": 90, "%": 90,
    "+": 80, "-": 80,
    "<<": 70, ">>": 70,
    "&": 60,
    "^": 55,
    "|": 50,
    "<": 40, ">": 40, "<=": 40, ">=": 40,
    "==": 35, "!=": 35,
    "&&": 30,
    "||": 25,
}

_VISIBILITY = {"public", "private", "internal", "external"}
_MUTABILITY = {"pure", "view", "payable"}
_LOCATIONS = {"memory", "calldata", "storage"}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    # ---- token helpers ----

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != STRING

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != EOF:
            self.i += 1
        return tok

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {self.peek().text!r}",
                             self.source, self.peek().start)
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != IDENT:
            raise ParseError(f"expected identifier, found {tok.text!r}",
                             self.source, tok.start)
        return self.advance()

    def unsupported(self, construct: str, pos: int | None = None):
        raise UnsupportedConstructError(
            construct, self.source, self.peek().start if pos is None else pos)

    def skip_balanced_braces(self) -> Token:
        """Consume a `{ ... }` region, returning the closing brace token."""
        self.expect("{")
        depth = 1
        while depth > 0:
            tok = self.advance()
            if tok.kind == EOF:
                raise ParseError("unbalanced braces", self.source, tok.start)
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
                if depth == 0:
                    return tok
        raise AssertionError("unreachable")

    def skip_to_semicolon(self) -> Token:
        while not self.at(";"):
            if self.peek().kind == EOF:
                raise ParseError("missing ';'", self.source, self.peek().start)
            self.advance()
        return self.advance()

    # ---- top level ----

    def parse_file(self) -> N.SourceFile:
        items: list[N.Node] = []
        while not self.at_kind(EOF):
            tok = self.peek()
            if tok.text == "pragma":
                items.append(self.parse_pragma())
            elif tok.text in ("contract", "abstract"):
                items.append(self.parse_contract())
            elif tok.text in ("interface", "library"):
                items.append(self.parse_opaque_toplevel(tok.text))
            elif tok.text in ("struct", "enum", "error", "event", "using", "type"):
                items.append(self.parse_opaque_member())
            elif tok.text == "import":
                self.unsupported("import directive")
            elif tok.text == "function":
                self.unsupported("free function")
            else:
                raise ParseError(f"unexpected token {tok.text!r} at top level",
                                 self.source, tok.start)
        return N.SourceFile("source", (0, len(self.source)), items=items)

    def parse_pragma(self) -> N.Pragma:
        start = self.expect("pragma").start
        end_tok = self.skip_to_semicolon()
        return N.Pragma("pragma", (start, end_tok.end),
                        value=self.source[start:end_tok.end])

    def parse_opaque_toplevel(self, construct: str) -> N.OpaqueMember:
        start = self.advance().start
        while not self.at("{"):
            if self.peek().kind == EOF:
                raise ParseError(f"malformed {construct}", self.source, start)
            self.advance()
        end_tok = self.skip_balanced_braces()
        return N.OpaqueMember("opaque_member", (start, end_tok.end), construct=construct)

    def parse_contract(self) -> N.Contract:
        start = self.peek().start
        kind = "contract"
        if self.accept("abstract"):
            kind = "abstract"
        self.expect("contract")
        name = self.expect_ident().text
        # inheritance list and anything else before the body is kept as a gap
        while not self.at("{"):
            if self.peek().kind == EOF:
                raise ParseError("contract body missing", self.source, start)
            self.advance()
        body_start = self.expect("{").start
        members: list[N.Node] = []
        while not self.at("}"):
            if self.peek().kind == EOF:
                raise ParseError("unterminated contract body", self.source, start)
            members.append(self.parse_member())
        body_end = self.expect("}").end
        return N.Contract("contract", (start, body_end), name=name, contract_kind=kind,
                          members=members, body_start=body_start, body_end=body_end)

    # ---- contract members ----

    def parse_member(self) -> N.Node:
        tok = self.peek()
        if tok.text in ("function", "constructor", "receive", "fallback", "modifier"):
            return self.parse_function()
        if tok.text in ("struct", "enum", "event", "error", "using"):
            return self.parse_opaque_member()
        if tok.text == "mapping" or (tok.kind == IDENT and is_elementary_type_name(tok.text)):
            return self.parse_state_var()
        if tok.kind == IDENT and tok.text not in ("if", "for", "while", "do"):
            # user-defined type state variable (struct/contract typed) is out of subset
            self.unsupported(f"state variable of non-elementary type {tok.text!r}")
        raise ParseError(f"unexpected token {tok.text!r} in contract body",
                         self.source, tok.start)

    def parse_opaque_member(self) -> N.OpaqueMember:
        tok = self.peek()
        start = tok.start
        construct = tok.text
        self.advance()
        if construct in ("struct", "enum"):
            while not self.at("{"):
                self.advance()
            end_tok = self.skip_balanced_braces()
        else:  # event, error, using, type alias: semicolon-terminated
            end_tok = self.skip_to_semicolon()
        return N.OpaqueMember("opaque_member", (start, end_tok.end), construct=construct)

    def parse_type(self) -> N.TypeName:
        tok = self.peek()
        base: N.TypeName
        if tok.text == "mapping":
            start = self.advance().start
            self.expect("(")
            key = self.parse_type()
            self.expect("=>")
            value = self.parse_type()
            end = self.expect(")").end
            base = N.MappingType("mapping_type", (start, end), name="mapping",
                                 key=key, value=value)
        elif tok.kind == IDENT and is_elementary_type_name(tok.text):
            self.advance()
            name = tok.text
            end = tok.end
            if name == "address" and self.at("payable"):
                end = self.advance().end
                name = "address payable"
            base = N.TypeName("type", (tok.start, end), name=name)
        else:
            self.unsupported(f"type {tok.text!r}")
        while self.at("["):
            self.advance()
            length = None
            if not self.at("]"):
                length = self.parse_expression()
            end = self.expect("]").end
            base = N.ArrayType("array_type", (base.span[0], end), name="array",
                               base=base, length=length)
        return base

    def parse_state_var(self) -> N.StateVar:
        start = self.peek().start
        decl_type = self.parse_type()
        is_constant = False
        while self.peek().kind == IDENT and self.peek().text in (
                "public", "private", "internal", "constant", "immutable", "override"):
            if self.peek().text in ("constant", "immutable"):
                is_constant = True
            self.advance()
        name = self.expect_ident().text
        init = None
        if self.accept("="):
            init = self.parse_expression()
        end = self.expect(";").end
        return N.StateVar("state_var", (start, end), decl_type=decl_type, name=name,
                          is_constant=is_constant, init=init)

    def parse_function(self) -> N.FunctionDef:
        start = self.peek().start
        head = self.advance().text  # function | constructor | receive | fallback | modifier
        is_constructor = head == "constructor"
        is_modifier = head == "modifier"
        if head == "function" or is_modifier:
            name = self.expect_ident().text
        else:
            name = head
        params: list[N.Param] = []
        if self.at("("):
            params = self.parse_param_list()
        elif not is_modifier:
            self.expect("(")
        returns_params: list[N.Param] = []
        mutability = None
        visibility = None
        # header trailer: visibility, mutability, virtual/override, modifier
        # invocations, returns(...) in any order
        while True:
            tok = self.peek()
            if tok.text == "returns":
                self.advance()
                returns_params = self.parse_param_list(allow_nameless=True)
                continue
            if tok.kind == IDENT and tok.text in _VISIBILITY:
                visibility = self.advance().text
                continue
            if tok.kind == IDENT and tok.text in _MUTABILITY:
                mutability = self.advance().text
                continue
            if tok.kind == IDENT and tok.text in ("virtual", "override"):
                self.advance()
                if self.at("("):
                    self.skip_parenthesized()
                continue
            if tok.kind == IDENT:  # modifier invocation
                self.advance()
                if self.at("("):
                    self.skip_parenthesized()
                continue
            break
        header_end = self.peek().start
        body = None
        if self.at("{"):
            body = self.parse_block()
            end = body.span[1]
        else:
            end = self.expect(";").end
        return N.FunctionDef("function", (start, end), name=name,
                             is_constructor=is_constructor, params=params,
                             returns_params=returns_params, mutability=mutability,
                             visibility=visibility, is_modifier=is_modifier,
                             body=body, header_span=(start, header_end))

    def skip_parenthesized(self) -> None:
        self.expect("(")
        depth = 1
        while depth > 0:
            tok = self.advance()
            if tok.kind == EOF:
                raise ParseError("unbalanced parentheses", self.source, tok.start)
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1

    def parse_param_list(self, allow_nameless: bool = False) -> list[N.Param]:
        self.expect("(")
        params: list[N.Param] = []
        while not self.at(")"):
            pstart = self.peek().start
            decl_type = self.parse_type()
            location = None
            if self.peek().kind == IDENT and self.peek().text in _LOCATIONS:
                location = self.advance().text
            pname = ""
            pend = self.tokens[self.i - 1].end
            if self.peek().kind == IDENT and self.peek().text not in (",", ")"):
                tok = self.expect_ident()
                pname = tok.text
                pend = tok.end
            elif not allow_nameless and not pname:
                pass  # solidity allows nameless params everywhere; keep them
            params.append(N.Param("param", (pstart, pend), decl_type=decl_type,
                                  location=location, name=pname))
            if not self.accept(","):
                break
        self.expect(")")
        return params

    # ---- statements ----

    def parse_block(self) -> N.Block:
        start = self.expect("{").start
        statements: list[N.Node] = []
        while not self.at("}"):
            if self.peek().kind == EOF:
                raise ParseError("unterminated block", self.source, start)
            statements.append(self.parse_statement())
        end = self.expect("}").end
        return N.Block("block", (start, end), statements=statements)

    def parse_statement(self) -> N.Node:
        tok = self.peek()
        text = tok.text
        if text == "{":
            return self.parse_block()
        if text == "if":
            return self.parse_if()
        if text == "while":
            return self.parse_while()
        if text == "do":
            return self.parse_do_while()
        if text == "for":
            return self.parse_for()
        if text == "return":
            start = self.advance().start
            value = None
            if not self.at(";"):
                value = self.parse_expression()
            end = self.expect(";").end
            return N.Return("return", (start, end), value=value)
        if text == "break":
            start = self.advance().start
            end = self.expect(";").end
            return N.Break("break", (start, end))
        if text == "continue":
            start = self.advance().start
            end = self.expect(";").end
            return N.Continue("continue", (start, end))
        if text == "emit":
            start = self.advance().start
            call = self.parse_expression()
            end = self.expect(";").end
            return N.Emit("emit", (start, end), call=call)
        if text == "assembly":
            start = self.advance().start
            while not self.at("{"):  # optional dialect string / flags
                self.advance()
            end_tok = self.skip_balanced_braces()
            return N.OpaqueStatement("opaque_stmt", (start, end_tok.end),
                                     construct="assembly")
        if text == "unchecked":
            start = self.advance().start
            end_tok = self.skip_balanced_braces()
            return N.OpaqueStatement("opaque_stmt", (start, end_tok.end),
                                     construct="unchecked")
        if text == "try":
            return self.parse_try_opaque()
        if text == "(" and self._looks_like_tuple_decl():
            self.unsupported("tuple declaration")
        if text == "mapping" or (tok.kind == IDENT and is_elementary_type_name(text)):
            return self.parse_var_decl()
        # expression statement
        start = tok.start
        expr = self.parse_expression()
        end = self.expect(";").end
        return N.ExprStatement("expr_stmt", (start, end), expr=expr)

    def _looks_like_tuple_decl(self) -> bool:
        tok1 = self.peek(1)
        tok2 = self.peek(2)
        return (tok1.kind == IDENT and is_elementary_type_name(tok1.text)
                and tok2.kind == IDENT)

    def parse_try_opaque(self) -> N.OpaqueStatement:
        start = self.expect("try").start
        while not self.at("{"):
            if self.peek().kind == EOF:
                raise ParseError("malformed try statement", self.source, start)
            self.advance()
        end_tok = self.skip_balanced_braces()
        while self.at("catch"):
            self.advance()
            while not self.at("{"):
                self.advance()
            end_tok = self.skip_balanced_braces()
        return N.OpaqueStatement("opaque_stmt", (start, end_tok.end), construct="try")

    def parse_var_decl(self) -> N.VarDecl:
        start = self.peek().start
        decl_type = self.parse_type()
        location = None
        if self.peek().kind == IDENT and self.peek().text in _LOCATIONS:
            location = self.advance().text
        name_tok = self.expect_ident()
        init = None
        if self.accept("="):
            init = self.parse_expression()
        end = self.expect(";").end
        return N.VarDecl("var_decl", (start, end), decl_type=decl_type,
                         location=location, name=name_tok.text,
                         name_span=name_tok.span, init=init)

    def parse_if(self) -> N.If:
        start = self.expect("if").start
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        then_stmt = self.parse_statement()
        else_stmt = None
        end = then_stmt.span[1]
        if self.at("else"):
            self.advance()
            else_stmt = self.parse_statement()
            end = else_stmt.span[1]
        return N.If("if", (start, end), cond=cond, then_stmt=then_stmt,
                    else_stmt=else_stmt)

    def parse_while(self) -> N.While:
        start = self.expect("while").start
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        body = self.parse_statement()
        return N.While("while", (start, body.span[1]), cond=cond, body=body)

    def parse_do_while(self) -> N.DoWhile:
        start = self.expect("do").start
        body = self.parse_statement()
        self.expect("while")
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        end = self.expect(";").end
        return N.DoWhile("do_while", (start, end), body=body, cond=cond)

    def parse_for(self) -> N.For:
        start = self.expect("for").start
        self.expect("(")
        init = None
        if not self.at(";"):
            tok = self.peek()
            if tok.text == "mapping" or (tok.kind == IDENT and is_elementary_type_name(tok.text)):
                init = self.parse_var_decl()  # consumes the ';'
            else:
                expr = self.parse_expression()
                end_tok = self.expect(";")
                init = N.ExprStatement("expr_stmt", (expr.span[0], end_tok.end), expr=expr)
        else:
            self.advance()
        cond = None
        if not self.at(";"):
            cond = self.parse_expression()
        self.expect(";")
        post = None
        if not self.at(")"):
            post = self.parse_expression()
        self.expect(")")
        body = self.parse_statement()
        return N.For("for", (start, body.span[1]), init=init, cond=cond,
                     post=post, body=body)

    # ---- expressions ----

    def parse_expression(self) -> N.Node:
        return self.parse_assignment()

    def parse_assignment(self) -> N.Node:
        lhs = self.parse_conditional()
        tok = self.peek()
        if tok.kind == PUNCT and tok.text in _ASSIGN_OPS:
            op = self.advance().text
            rhs = self.parse_assignment()
            return N.Assignment("assignment", (lhs.span[0], rhs.span[1]),
                                op=op, lhs=lhs, rhs=rhs)
        return lhs

    def parse_conditional(self) -> N.Node:
        cond = self.parse_binary(0)
        if self.at("?"):
            self.advance()
            then_expr = self.parse_expression()
            self.expect(":")
            else_expr = self.parse_expression()
            return N.Conditional("conditional", (cond.span[0], else_expr.span[1]),
                                 cond=cond, then_expr=then_expr, else_expr=else_expr)
        return cond

    def parse_binary(self, min_prec: int) -> N.Node:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            prec = _BINARY_PREC.get(tok.text) if tok.kind == PUNCT else None
            if prec is None or prec < min_prec:
                return left
            op = self.advance().text
            # ** is right-associative, everything else left
            right = self.parse_binary(prec if op == "**" else prec + 1)
            left = N.BinaryOp("binary_op", (left.span[0], right.span[1]),
                              op=op, left=left, right=right)

    def parse_unary(self) -> N.Node:
        tok = self.peek()
        if tok.kind == PUNCT and tok.text in ("!", "~", "-", "+", "++", "--"):
            self.advance()
            operand = self.parse_unary()
            return N.UnaryOp("unary_op", (tok.start, operand.span[1]),
                             op=tok.text, operand=operand, prefix=True)
        if tok.text == "delete":
            self.advance()
            operand = self.parse_unary()
            return N.UnaryOp("unary_op", (tok.start, operand.span[1]),
                             op="delete", operand=operand, prefix=True)
        return self.parse_postfix()

    def parse_postfix(self) -> N.Node:
        expr = self.parse_primary()
        while True:
            tok = self.peek()
            if tok.text == "." and tok.kind == PUNCT:
                self.advance()
                member = self.expect_ident()
                expr = N.MemberAccess("member_access", (expr.span[0], member.end),
                                      obj=expr, member=member.text)
            elif tok.text == "[" and tok.kind == PUNCT:
                self.advance()
                index = None
                if not self.at("]"):
                    index = self.parse_expression()
                end = self.expect("]").end
                expr = N.IndexAccess("index_access", (expr.span[0], end),
                                     base=expr, index=index)
            elif tok.text == "(" and tok.kind == PUNCT:
                args, end = self.parse_call_args()
                expr = N.FunctionCall("call", (expr.span[0], end), callee=expr, args=args)
            elif tok.text in ("++", "--") and tok.kind == PUNCT:
                self.advance()
                expr = N.UnaryOp("unary_op", (expr.span[0], tok.end),
                                 op=tok.text, operand=expr, prefix=False)
            elif tok.text == "{" and tok.kind == PUNCT:
                self.unsupported("call options block")
            else:
                return expr

    def parse_call_args(self) -> tuple[list[N.Node], int]:
        self.expect("(")
        args: list[N.Node] = []
        while not self.at(")"):
            args.append(self.parse_expression())
            if not self.accept(","):
                break
        end = self.expect(")").end
        return args, end

    def parse_primary(self) -> N.Node:
        tok = self.peek()
        if tok.kind == NUMBER:
            self.advance()
            is_hex = tok.text[:2].lower() == "0x"
            unit = None
            end = tok.end
            nxt = self.peek()
            if nxt.kind == IDENT and nxt.text in UNIT_SUFFIXES:
                unit = self.advance().text
                end = nxt.end
            return N.NumberLiteral("number", (tok.start, end), raw=tok.text,
                                   is_hex=is_hex, unit=unit)
        if tok.kind == STRING:
            self.advance()
            return N.StringLiteral("string", tok.span)
        if tok.text in ("true", "false"):
            self.advance()
            return N.BoolLiteral("bool", tok.span, value=tok.text == "true")
        if tok.text == "new":
            start = self.advance().start
            type_name = self.parse_type()
            return N.NewExpr("new", (start, type_name.span[1]), type_name=type_name)
        if tok.kind == IDENT and is_elementary_type_name(tok.text):
            self.advance()
            return N.ElementaryTypeExpr("type_expr", tok.span, name=tok.text)
        if tok.kind == IDENT:
            self.advance()
            return N.Identifier("identifier", tok.span, name=tok.text)
        if tok.text == "(":
            start = self.advance().start
            items = [self.parse_expression()]
            while self.accept(","):
                items.append(self.parse_expression())
            end = self.expect(")").end
            if len(items) == 1:
                return N.TupleExpr("paren", (start, end), items=items)
            return N.TupleExpr("tuple", (start, end), items=items)
        if tok.text == "[":
            start = self.advance().start
            items = []
            while not self.at("]"):
                items.append(self.parse_expression())
                if not self.accept(","):
                    break
            end = self.expect("]").end
            return N.TupleExpr("array_literal", (start, end), items=items)
        raise ParseError(f"unexpected token {tok.text!r} in expression",
                         self.source, tok.start)


def parse(source: str) -> N.SourceFile:
    """Parse source into a span-annotated AST covering the whole file."""
    return _Parser(source).parse_file()


class SpanDisciplineError(Exception):
    pass


def reprint(ast: N.Node, source: str) -> str:
    """Rebuild the source from the AST's span tiling.

    Equals the input byte-for-byte whenever spans nest and order correctly;
    violations raise SpanDisciplineError.
    """
    def emit(node: N.Node) -> str:
        lo, hi = node.span
        if not (0 <= lo <= hi <= len(source)):
            raise SpanDisciplineError(f"{node.kind} span {node.span} out of bounds")
        parts: list[str] = []
        pos = lo
        for child in node.children():
            clo, chi = child.span
            if clo < pos or chi > hi:
                raise SpanDisciplineError(
                    f"{child.kind} span {child.span} escapes {node.kind} span {node.span}")
            parts.append(source[pos:clo])
            parts.append(emit(child))
            pos = chi
        parts.append(source[pos:hi])
        return "".join(parts)

    return emit(ast)
