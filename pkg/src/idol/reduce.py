"""Test-case reduction and report replay.

Reduction is greedy delta debugging over AST-aligned chunks (contract members
first, then statements): a removal is kept when the reduced source still
compiles under every matrix config and still produces a divergence with the
same field kind and config pair. Terminates at 1-minimality over the chunk
granularity.
"""

from __future__ import annotations

import re

from idol import compile as C
from idol import oracle as O
from idol.execute import ExecutionHarnessError, plan_calls, run
from idol.syntax import nodes as N
from idol.syntax import parse
from idol.syntax.parser import ParseError

_LABEL_RE = re.compile(r"\A(O0|opt-runs(\d+))(-viair)?\Z")


def config_from_label(label: str, solc_path: str, evm_version: str) -> C.CompileConfig:
    m = _LABEL_RE.match(label)
    if not m:
        raise ValueError(f"unparseable config label {label!r}")
    optimize = m.group(1) != "O0"
    runs = int(m.group(2)) if m.group(2) else 200
    pipeline = "via-ir" if m.group(3) else "legacy"
    return C.CompileConfig(optimize=optimize, runs=runs, pipeline=pipeline,
                           solc_path=solc_path, evm_version=evm_version)


def _label_key(label: str) -> tuple:
    m = _LABEL_RE.match(label)
    if not m:
        raise ValueError(f"unparseable config label {label!r}")
    return (bool(m.group(3)), m.group(1) != "O0",
            int(m.group(2)) if m.group(2) else 0)


def _matrix_from_report(report: dict) -> list[C.CompileConfig]:
    labels = sorted(report["artifact_fingerprints"], key=_label_key)
    return [config_from_label(lb, report["solc_path"], report["evm_version"])
            for lb in labels]


def replay_verdict(source: str, report: dict, cache_dir: str | None = None,
                   compile_timeout: float = 60.0) -> O.Verdict | None:
    """Compile + execute `source` per the report's embedded configuration and
    return the cross-config verdict; None when any config fails to compile."""
    matrix = _matrix_from_report(report)
    artifacts = []
    for cfg in matrix:
        result = C.compile_source(source, report["parent_path"], cfg,
                                  cache_dir=cache_dir, timeout=compile_timeout)
        if not result.ok:
            return None
        artifacts.append(result.artifact)
    plan = plan_calls(artifacts[0].abi, report["plan_seed"],
                      rounds=report["plan_rounds"])
    try:
        traces = [run(a, plan) for a in artifacts]
    except ExecutionHarnessError:
        return None
    return O.compare(traces)


def _matches_signature(verdict: O.Verdict | None, report: dict) -> bool:
    if verdict is None or verdict.kind != O.DIVERGENCE or verdict.detail is None:
        return False
    sig = report["signature"]
    return (verdict.detail.field == sig["field"]
            and list(verdict.detail.config_pair) == sig["config_pair"])


def _member_chunks(source: str) -> list[tuple[int, int]]:
    try:
        ast = parse(source)
    except ParseError:
        return []
    chunks: list[tuple[int, int]] = []
    for item in ast.items:
        if not isinstance(item, N.Contract):
            continue
        for member in item.members:
            if isinstance(member, N.FunctionDef) and member.is_constructor:
                continue
            chunks.append(member.span)
    return chunks


def _statement_chunks(source: str) -> list[tuple[int, int]]:
    try:
        ast = parse(source)
    except ParseError:
        return []
    chunks: list[tuple[int, int]] = []
    for item in ast.items:
        if not isinstance(item, N.Contract):
            continue
        for member in item.members:
            if isinstance(member, N.FunctionDef) and member.body is not None:
                _collect_stmt_spans(member.body, chunks)
    return chunks


def _collect_stmt_spans(block: N.Block, chunks: list[tuple[int, int]]) -> None:
    for stmt in block.statements:
        chunks.append(stmt.span)
        for inner in (getattr(stmt, "body", None), getattr(stmt, "then_stmt", None),
                      getattr(stmt, "else_stmt", None)):
            if isinstance(inner, N.Block):
                _collect_stmt_spans(inner, chunks)


def _remove_span(source: str, span: tuple[int, int]) -> str:
    return source[:span[0]] + source[span[1]:]


def reduce_report(report: dict, cache_dir: str | None = None,
                  compile_timeout: float = 60.0) -> str | None:
    """Minimized reproducer for a behavioral finding, or None when the
    divergence is not reproducible at reduction start (original retained)."""
    if report.get("classification") != O.CLASS_BEHAVIORAL:
        raise ValueError("reduction only applies to behavioral findings")
    source = report["mutant_source"]

    def predicate(candidate: str) -> bool:
        verdict = replay_verdict(candidate, report, cache_dir=cache_dir,
                                 compile_timeout=compile_timeout)
        return _matches_signature(verdict, report)

    if not predicate(source):
        return None

    for chunker in (_member_chunks, _statement_chunks, _member_chunks,
                    _statement_chunks):
        changed = True
        while changed:
            changed = False
            for span in sorted(chunker(source), key=lambda s: s[0] - s[1]):
                candidate = _remove_span(source, span)
                if predicate(candidate):
                    source = candidate
                    changed = True
                    break
    return source
