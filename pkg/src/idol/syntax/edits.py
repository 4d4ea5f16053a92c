"""Span-based source edits.

An EditSet is a collection of disjoint (span, replacement) pairs. Application
is order-independent because spans never overlap; bytes outside the edited
spans are preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Span = tuple[int, int]


class OverlappingEditsError(Exception):
    pass


@dataclass
class EditSet:
    edits: list[tuple[Span, str]] = field(default_factory=list)

    def add(self, span: Span, replacement: str) -> None:
        self.edits.append((span, replacement))

    def validate(self, source_len: int) -> None:
        ordered = sorted(self.edits, key=lambda e: e[0])
        prev_end = 0
        for (lo, hi), _ in ordered:
            if lo > hi or lo < 0 or hi > source_len:
                raise OverlappingEditsError(f"edit span ({lo}, {hi}) out of bounds")
            if lo < prev_end:
                raise OverlappingEditsError(f"edit span ({lo}, {hi}) overlaps a prior edit")
            prev_end = hi

    def to_jsonable(self) -> list[dict]:
        return [{"start": lo, "end": hi, "replacement": text}
                for (lo, hi), text in sorted(self.edits, key=lambda e: e[0])]

    @classmethod
    def from_jsonable(cls, data: list[dict]) -> "EditSet":
        return cls([((d["start"], d["end"]), d["replacement"]) for d in data])


def apply_edits(source: str, edits: EditSet) -> str:
    """Return source with every edit span replaced; rejects overlaps up front."""
    edits.validate(len(source))
    out = source
    for (lo, hi), replacement in sorted(edits.edits, key=lambda e: e[0], reverse=True):
        out = out[:lo] + replacement + out[hi:]
    return out
