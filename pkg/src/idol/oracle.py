"""Cross-configuration trace comparison, equivalence gating, dedup signatures.

The unoptimized configuration is the comparison baseline; a divergence names
the config pair rather than blaming one side. Out-of-gas poisons only the
affected call. Mutant nonequivalence at O0 is a harness defect, never a
compiler finding, and fails the campaign loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from idol.execute import ExecutionTrace

AGREE = "agree"
DIVERGENCE = "divergence"
INCONCLUSIVE = "inconclusive"

EXIT_OK = 0
EXIT_BEHAVIORAL = 10
EXIT_COMPILE_DIVERGENCE = 11
EXIT_NONEQUIVALENCE = 20

_CALL_FIELDS = ("status", "return_data", "logs", "storage_digest")


class OracleError(Exception):
    """Harness misuse (mismatched plans etc.), never a finding."""


@dataclass
class DivergenceDetail:
    call_index: int               # -1 means deployment
    config_pair: tuple[str, str]  # (baseline label, other label)
    field: str                    # deploy_outcome | status | return_data | logs | storage_digest
    selector: str                 # function selector hex, or "deploy"
    baseline_value: str
    other_value: str

    def to_jsonable(self) -> dict:
        return {"call_index": self.call_index, "config_pair": list(self.config_pair),
                "field": self.field, "selector": self.selector,
                "baseline_value": self.baseline_value, "other_value": self.other_value}


@dataclass
class Verdict:
    kind: str
    detail: DivergenceDetail | None = None
    inconclusive_reason: str = ""

    def to_jsonable(self) -> dict:
        return {"kind": self.kind,
                "detail": self.detail.to_jsonable() if self.detail else None,
                "inconclusive_reason": self.inconclusive_reason}


def _canon(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _is_oog(record) -> bool:
    return record.status == "failure" and record.failure_kind == "out_of_gas"


def compare(traces: list[ExecutionTrace]) -> Verdict:
    """Compare every non-baseline trace against traces[0] (the O0 baseline).

    Returns the first divergence in matrix order; out-of-gas at a compared
    position makes that call inconclusive and comparison continues.
    """
    if len(traces) < 2:
        raise OracleError("compare needs a baseline plus at least one other trace")
    baseline = traces[0]
    if any(t.plan_hash != baseline.plan_hash for t in traces):
        raise OracleError("traces were produced from different call plans")
    poisoned = False
    for other in traces[1:]:
        pair = (baseline.config_label, other.config_label)
        base_deploy, other_deploy = baseline.deploy_outcome, other.deploy_outcome
        if base_deploy.get("kind") == "out_of_gas" or other_deploy.get("kind") == "out_of_gas":
            poisoned = True
            continue
        if base_deploy != other_deploy:
            return Verdict(DIVERGENCE, DivergenceDetail(
                -1, pair, "deploy_outcome", "deploy",
                _canon(base_deploy), _canon(other_deploy)))
        if len(baseline.calls) != len(other.calls):
            raise OracleError("trace lengths differ despite equal plans")
        for i, (brec, orec) in enumerate(zip(baseline.calls, other.calls)):
            if _is_oog(brec) or _is_oog(orec):
                poisoned = True
                continue
            for fieldname in _CALL_FIELDS:
                bval = _canon(getattr(brec, fieldname))
                oval = _canon(getattr(orec, fieldname))
                if fieldname == "status" and brec.status == orec.status == "failure" \
                        and brec.failure_kind != orec.failure_kind:
                    bval += ":" + brec.failure_kind
                    oval += ":" + orec.failure_kind
                if bval != oval:
                    return Verdict(DIVERGENCE, DivergenceDetail(
                        i, pair, fieldname, brec.selector, bval, oval))
    if poisoned:
        return Verdict(INCONCLUSIVE, inconclusive_reason="out_of_gas poisoning")
    return Verdict(AGREE)


EQUIVALENT = "equivalent"
NONEQUIVALENT = "nonequivalent"


def check_mutant_equivalence(parent_trace: ExecutionTrace,
                             mutant_trace: ExecutionTrace) -> tuple[str, DivergenceDetail | None]:
    """Byte-wise comparison of the O0 traces of parent and mutant.

    Nonequivalence quarantines the transformation: it is a defect in the
    mutator, not in the compiler.
    """
    if parent_trace.plan_hash != mutant_trace.plan_hash:
        raise OracleError("equivalence check requires the identical call plan")
    if parent_trace.canonical() == mutant_trace.canonical():
        return EQUIVALENT, None
    pair = ("parent-O0", "mutant-O0")
    if parent_trace.deploy_outcome != mutant_trace.deploy_outcome:
        return NONEQUIVALENT, DivergenceDetail(
            -1, pair, "deploy_outcome", "deploy",
            _canon(parent_trace.deploy_outcome), _canon(mutant_trace.deploy_outcome))
    for i, (prec, mrec) in enumerate(zip(parent_trace.calls, mutant_trace.calls)):
        for fieldname in ("status", "failure_kind", "return_data", "logs", "storage_digest"):
            pval = _canon(getattr(prec, fieldname))
            mval = _canon(getattr(mrec, fieldname))
            if pval != mval:
                return NONEQUIVALENT, DivergenceDetail(
                    i, pair, fieldname if fieldname != "failure_kind" else "status",
                    prec.selector, pval, mval)
    return NONEQUIVALENT, DivergenceDetail(
        -1, pair, "trace", "deploy", "structural difference", "structural difference")


@dataclass(frozen=True)
class BugSignature:
    solc_version: str
    config_pair: tuple[str, str]
    field: str
    selector: str
    diff_hash: str

    def key(self) -> str:
        return "|".join((self.solc_version, self.config_pair[0], self.config_pair[1],
                         self.field, self.selector, self.diff_hash))

    def file_stem(self) -> str:
        return hashlib.sha256(self.key().encode()).hexdigest()[:16]

    def to_jsonable(self) -> dict:
        return {"solc_version": self.solc_version, "config_pair": list(self.config_pair),
                "field": self.field, "selector": self.selector,
                "diff_hash": self.diff_hash, "key": self.key()}


def signature(verdict: Verdict, solc_version: str) -> BugSignature:
    """Stable dedup key for one divergence; refuses non-divergence verdicts."""
    if verdict.kind != DIVERGENCE or verdict.detail is None:
        raise OracleError("signature() requires a divergence verdict")
    d = verdict.detail
    diff = hashlib.sha256(
        (d.baseline_value + "\x00" + d.other_value).encode()).hexdigest()[:16]
    return BugSignature(solc_version=solc_version, config_pair=d.config_pair,
                        field=d.field, selector=d.selector, diff_hash=diff)


CLASS_BEHAVIORAL = "behavioral"
CLASS_COMPILE_DIVERGENCE = "compile-divergence"
CLASS_NONEQUIVALENCE = "mutant-nonequivalence"


@dataclass
class BugReport:
    classification: str
    signature: BugSignature
    verdict: Verdict
    parent_id: str
    parent_path: str
    parent_source: str
    mutant_id: str
    mutant_source: str
    provenance: list[dict] = field(default_factory=list)   # TransformApplications
    artifact_fingerprints: dict = field(default_factory=dict)  # label -> fp
    traces: dict = field(default_factory=dict)              # label -> trace json
    plan_seed: int = 0
    plan_rounds: int = 0
    solc_path: str = ""
    solc_version: str = ""
    evm_version: str = "istanbul"
    duplicates: int = 0
    minimized_source: str | None = None

    def to_jsonable(self) -> dict:
        return {
            "classification": self.classification,
            "signature": self.signature.to_jsonable(),
            "verdict": self.verdict.to_jsonable(),
            "parent_id": self.parent_id,
            "parent_path": self.parent_path,
            "parent_source": self.parent_source,
            "mutant_id": self.mutant_id,
            "mutant_source": self.mutant_source,
            "provenance": self.provenance,
            "artifact_fingerprints": self.artifact_fingerprints,
            "traces": self.traces,
            "plan_seed": self.plan_seed,
            "plan_rounds": self.plan_rounds,
            "solc_path": self.solc_path,
            "solc_version": self.solc_version,
            "evm_version": self.evm_version,
            "duplicates": self.duplicates,
            "minimized_source": self.minimized_source,
        }
