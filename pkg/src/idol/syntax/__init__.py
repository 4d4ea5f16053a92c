"""Solidity grammar-subset parsing and lossless span-based rewriting."""

from idol.syntax.edits import EditSet, OverlappingEditsError, apply_edits
from idol.syntax.nodes import (
    Block,
    Contract,
    DoWhile,
    ExprStatement,
    For,
    FunctionCall,
    FunctionDef,
    Identifier,
    If,
    Node,
    NumberLiteral,
    OpaqueStatement,
    SourceFile,
    VarDecl,
    While,
    ast_to_dict,
    walk,
)
from idol.syntax.parser import (
    ParseError,
    UnsupportedConstructError,
    parse,
    reprint,
)
from idol.syntax.tokens import Token, tokenize

__all__ = [
    "Block",
    "Contract",
    "DoWhile",
    "EditSet",
    "ExprStatement",
    "For",
    "FunctionCall",
    "FunctionDef",
    "Identifier",
    "If",
    "Node",
    "NumberLiteral",
    "OpaqueStatement",
    "OverlappingEditsError",
    "ParseError",
    "SourceFile",
    "Token",
    "UnsupportedConstructError",
    "VarDecl",
    "While",
    "apply_edits",
    "ast_to_dict",
    "parse",
    "reprint",
    "tokenize",
    "walk",
]
