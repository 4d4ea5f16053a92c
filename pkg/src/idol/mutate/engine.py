"""Transformation engine: site discovery, application, provenance.

Sites are discovered fresh on each (possibly already mutated) source text;
applying a site to any other text is refused as stale. Everything here is a
pure function of its inputs, so units can be mutated from any number of
workers concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from idol.corpus import SourceUnit, content_id
from idol.mutate import transforms as T
from idol.rng import SplitMix64, mix_seed
from idol.mutate.transforms import Site
from idol.syntax import apply_edits, parse
from idol.syntax.edits import EditSet
from idol.syntax.parser import ParseError


class TransformKind(enum.Enum):
    REVERSE_LICM = "ReverseLICM"
    REVERSE_LOOP_INVERSION = "ReverseLoopInversion"
    REVERSE_CSE = "ReverseCSE"
    LITERAL_OBFUSCATION = "LiteralObfuscation"
    KECCAK_DUPLICATION = "KeccakDuplication"
    FUNCTION_OUTLINING = "FunctionOutlining"

    @classmethod
    def from_name(cls, name: str) -> "TransformKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown transform kind {name!r}")


ALL_KINDS = tuple(TransformKind)

_DISCOVER = {
    TransformKind.REVERSE_LICM: T.discover_licm,
    TransformKind.REVERSE_LOOP_INVERSION: T.discover_loop_inversion,
    TransformKind.REVERSE_CSE: T.discover_cse,
    TransformKind.LITERAL_OBFUSCATION: T.discover_literal_obfuscation,
    TransformKind.KECCAK_DUPLICATION: T.discover_keccak_duplication,
    TransformKind.FUNCTION_OUTLINING: T.discover_function_outlining,
}

_APPLY = {
    TransformKind.REVERSE_LICM: T.apply_licm,
    TransformKind.REVERSE_LOOP_INVERSION: T.apply_loop_inversion,
    TransformKind.REVERSE_CSE: T.apply_cse,
    TransformKind.LITERAL_OBFUSCATION: T.apply_literal_obfuscation,
    TransformKind.KECCAK_DUPLICATION: T.apply_keccak_duplication,
    TransformKind.FUNCTION_OUTLINING: T.apply_function_outlining,
}

_KIND_ORDER = {kind: i for i, kind in enumerate(TransformKind)}


class StaleSiteError(Exception):
    """The site was discovered on a different source text."""


@dataclass
class TransformApplication:
    kind: TransformKind
    site: Site
    edits: EditSet
    parent_id: str      # id of the source the edits apply to (previous stage)
    mutant_id: str      # id of the resulting source
    seed: int

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind.value,
            "site": self.site.to_jsonable(),
            "edits": self.edits.to_jsonable(),
            "parent_id": self.parent_id,
            "mutant_id": self.mutant_id,
            "seed": self.seed,
        }


@dataclass
class MutantUnit:
    unit: SourceUnit
    origin_id: str
    applications: list[TransformApplication] = field(default_factory=list)

    @property
    def id(self) -> str:
        return self.unit.id

    @property
    def source(self) -> str:
        return self.unit.source

    def kinds(self) -> list[str]:
        return [app.kind.value for app in self.applications]

    def to_jsonable(self) -> dict:
        return {
            "id": self.unit.id,
            "origin_id": self.origin_id,
            "source": self.unit.source,
            "applications": [app.to_jsonable() for app in self.applications],
        }


def discover_sites(ast, source: str, kind: TransformKind) -> list[Site]:
    """Deterministic source-order site list for one kind."""
    sites = _DISCOVER[kind](ast, source)
    sha = content_id(source)
    for site in sites:
        site.source_sha = sha
    sites.sort(key=lambda s: s.anchor[0])
    return sites


def discover_all_sites(source: str, kinds=ALL_KINDS) -> list[Site]:
    ast = parse(source)
    sites: list[Site] = []
    for kind in kinds:
        sites.extend(discover_sites(ast, source, kind))
    sites.sort(key=lambda s: (s.anchor[0], _KIND_ORDER[TransformKind.from_name(s.kind)]))
    return sites


def apply_transform(source: str, kind: TransformKind, site: Site,
                    parent_unit: SourceUnit | None = None, seed: int = 0) -> MutantUnit:
    """Apply one discovered site to exactly the text it was discovered on."""
    if site.source_sha and site.source_sha != content_id(source):
        raise StaleSiteError(
            f"site for {site.kind} at {site.anchor} was discovered on different source")
    if site.kind != kind.value:
        raise ValueError(f"site kind {site.kind} does not match {kind.value}")
    edits = _APPLY[kind](source, site)
    mutated = apply_edits(source, edits)
    parent_id = content_id(source)
    app = TransformApplication(kind=kind, site=site, edits=edits,
                               parent_id=parent_id, mutant_id=content_id(mutated),
                               seed=seed)
    path = parent_unit.path if parent_unit is not None else "<memory>"
    origin = parent_unit.id if parent_unit is not None else parent_id
    return MutantUnit(unit=SourceUnit.from_source(mutated, path=path),
                      origin_id=origin, applications=[app])


def mutate_unit(unit: SourceUnit, seed: int, budget: int,
                kinds=ALL_KINDS, max_transforms: int = 3) -> list[MutantUnit]:
    """Produce up to `budget` mutants, each applying 1..max_transforms
    transformations drawn by the seeded PRNG, rediscovering sites after every
    application. Deterministic in (unit, seed, budget, kinds)."""
    rng = SplitMix64(mix_seed(seed, unit.id))
    mutants: list[MutantUnit] = []
    seen: set[str] = {unit.id}
    for _ in range(max(budget, 0)):
        n_apps = 1 + rng.below(max_transforms) if max_transforms > 1 else 1
        source = unit.source
        apps: list[TransformApplication] = []
        for _ in range(n_apps):
            try:
                sites = discover_all_sites(source, kinds)
            except ParseError:
                break  # a mutation produced unparseable output: engine defect,
                       # surfaced by the equivalence/compile gates downstream
            if not sites:
                break
            site = sites[rng.below(len(sites))]
            site.data["draw"] = rng.next()
            kind = TransformKind.from_name(site.kind)
            step = apply_transform(source, kind, site, parent_unit=unit, seed=seed)
            apps.extend(step.applications)
            source = step.source
        if apps and content_id(source) not in seen:
            seen.add(content_id(source))
            mutants.append(MutantUnit(unit=SourceUnit.from_source(source, path=unit.path),
                                      origin_id=unit.id, applications=apps))
    return mutants


def replay(parent_source: str, mutant: MutantUnit) -> str:
    """Re-apply recorded edits; must reproduce the mutant byte-for-byte."""
    source = parent_source
    for app in mutant.applications:
        if content_id(source) != app.parent_id:
            raise StaleSiteError("replay chain broken: stage hash mismatch")
        source = apply_edits(source, app.edits)
        if content_id(source) != app.mutant_id:
            raise StaleSiteError("replay chain broken: result hash mismatch")
    return source
