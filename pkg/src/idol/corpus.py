"""Corpus ingestion, validation and deterministic sampling.

A corpus is a directory of UTF-8 ``.sol`` files. Ingest parses and
O0-compiles every file, producing an index whose serialized form is
byte-identical across runs on the same tree. Sampling is a pure function of
(index, seed, n).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from idol.rng import SplitMix64
from idol.syntax import parse
from idol.syntax.parser import ParseError

VALID = "valid"
UNSUPPORTED = "unsupported"
COMPILE_FAILED = "compile-failed"


def content_id(source: str) -> str:
    """Stable content hash used as a SourceUnit id."""
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SourceUnit:
    id: str
    path: str
    source: str
    pragma_range: str = ""

    @property
    def byte_len(self) -> int:
        return len(self.source.encode("utf-8"))

    @classmethod
    def from_source(cls, source: str, path: str = "<memory>") -> "SourceUnit":
        return cls(id=content_id(source), path=path, source=source,
                   pragma_range=_extract_pragma(source))


def _extract_pragma(source: str) -> str:
    for line in source.splitlines():
        stripped = line.strip()
        if stripped.startswith("pragma solidity"):
            return stripped[len("pragma solidity"):].rstrip(";").strip()
    return ""


@dataclass
class IndexEntry:
    unit_id: str
    path: str
    status: str  # valid | unsupported | compile-failed
    reason: str = ""
    byte_len: int = 0


@dataclass
class CorpusIndex:
    root: str
    solc_version: str
    entries: list[IndexEntry] = field(default_factory=list)
    units: dict[str, SourceUnit] = field(default_factory=dict)

    def valid_entries(self) -> list[IndexEntry]:
        return [e for e in self.entries if e.status == VALID]

    def unit(self, unit_id: str) -> SourceUnit:
        return self.units[unit_id]

    def to_jsonable(self) -> dict:
        return {
            "root": self.root,
            "solc_version": self.solc_version,
            "entries": [
                {"id": e.unit_id, "path": e.path, "status": e.status,
                 "reason": e.reason, "byte_len": e.byte_len}
                for e in self.entries
            ],
        }

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_jsonable(), indent=2, sort_keys=True) + "\n")


class CorpusError(Exception):
    """Fatal configuration problem (missing root, unusable validator)."""


def ingest(root: str | Path, validator_config) -> CorpusIndex:
    """Index every .sol file under root, in lexicographic path order.

    Files that fail to parse under the grammar subset are marked unsupported;
    files that parse but do not compile under the validator configuration are
    marked compile-failed. Contracts requiring constructor arguments are
    unsupported (the executor cannot synthesize them).
    """
    from idol import compile as C

    rootp = Path(root)
    if not rootp.is_dir():
        raise CorpusError(f"corpus root {root} does not exist or is not a directory")
    solc_version = C.solc_version(validator_config.solc_path)
    index = CorpusIndex(root=str(rootp), solc_version=solc_version)
    for path in sorted(rootp.rglob("*.sol"), key=lambda p: str(p.relative_to(rootp))):
        rel = str(path.relative_to(rootp))
        try:
            source = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            index.entries.append(IndexEntry("", rel, UNSUPPORTED,
                                            reason=f"unreadable: {exc}"))
            continue
        unit = SourceUnit(id=content_id(source), path=rel, source=source,
                          pragma_range=_extract_pragma(source))
        try:
            parse(source)
        except ParseError as exc:
            index.entries.append(IndexEntry(unit.id, rel, UNSUPPORTED,
                                            reason=str(exc), byte_len=unit.byte_len))
            index.units[unit.id] = unit
            continue
        result = C.compile_source(source, rel, validator_config)
        if not result.ok:
            index.entries.append(IndexEntry(unit.id, rel, COMPILE_FAILED,
                                            reason=result.error_summary(),
                                            byte_len=unit.byte_len))
        elif result.artifact.constructor_inputs > 0:
            index.entries.append(IndexEntry(unit.id, rel, UNSUPPORTED,
                                            reason="constructor requires arguments",
                                            byte_len=unit.byte_len))
        else:
            index.entries.append(IndexEntry(unit.id, rel, VALID, byte_len=unit.byte_len))
        index.units[unit.id] = unit
    return index


def sample(index: CorpusIndex, seed: int, n: int) -> list[SourceUnit]:
    """Deterministic draw of n valid units; wraps around when n exceeds the
    valid count (the report notes the wraparound)."""
    if n < 0:
        raise ValueError("sample size must be >= 0")
    valid = index.valid_entries()
    if not valid or n == 0:
        return []
    rng = SplitMix64(seed)
    order = list(range(len(valid)))
    # Fisher-Yates with the campaign PRNG
    for i in range(len(order) - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    out: list[SourceUnit] = []
    for k in range(n):
        entry = valid[order[k % len(order)]]
        out.append(index.unit(entry.unit_id))
    return out
