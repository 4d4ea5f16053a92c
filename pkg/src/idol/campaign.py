"""End-to-end campaign pipeline: sample -> mutate -> compile matrix ->
execute -> compare, with persistence, resumption and reporting.

Work unit is one sampled corpus unit (with all of its mutants); workers may
finish in any order but the report is assembled in canonical order, so equal
(corpus, seed, solc, flags) implies byte-equal reports modulo the timing
section.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

from idol import compile as C
from idol import corpus as CORPUS
from idol import oracle as O
from idol.execute import ExecutionTrace, ExecutionHarnessError, plan_calls, run
from idol.mutate import TransformKind, mutate_unit
from idol.mutate.engine import discover_all_sites
from idol.rng import SplitMix64, mix_seed
from idol.syntax.parser import ParseError


@dataclass
class CampaignConfig:
    corpus_root: str
    solc_paths: list[str]
    seed: int = 0
    units: int = 100
    budget: int = 2
    kinds: list[str] = field(default_factory=lambda: [k.value for k in TransformKind])
    jobs: int = 0  # 0 = cpu count
    out_dir: str = "idol-out"
    rounds: int = 2
    max_transforms: int = 3
    evm_version: str = "istanbul"
    runs_list: list[int] = field(default_factory=lambda: [1, 200])
    pipelines: list[str] = field(default_factory=lambda: ["legacy"])
    include_unoptimized: bool = True
    compile_timeout: float = 60.0
    reduce_findings: bool = False
    cache_audit: bool = True

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def echo(self) -> dict:
        """Reproducibility header: everything except the output directory."""
        data = asdict(self)
        data.pop("out_dir")
        data.pop("jobs")  # parallelism must not influence results
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def from_toml(cls, path: str | Path) -> "CampaignConfig":
        data = _load_toml(Path(path))
        return cls.from_dict(data)


def _load_toml(path: Path) -> dict:
    try:
        import tomllib  # python >= 3.11
        return tomllib.loads(path.read_text())
    except ModuleNotFoundError:
        return _parse_flat_toml(path.read_text())


def _parse_flat_toml(text: str) -> dict:
    """Minimal flat TOML reader (scalars and homogeneous arrays), enough for
    campaign config files on pythons without tomllib."""
    out: dict = {}
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = _toml_value(value.strip())
    return out


def _toml_value(token: str):
    if token.startswith("[") and token.endswith("]"):
        inner = token[1:-1].strip()
        if not inner:
            return []
        return [_toml_value(part.strip()) for part in inner.split(",")]
    if token.startswith('"') and token.endswith('"'):
        return token[1:-1]
    if token in ("true", "false"):
        return token == "true"
    try:
        return int(token)
    except ValueError:
        try:
            return float(token)
        except ValueError:
            return token


MODE_IDOL = "idol"
MODE_DOL = "dol"


def _matrix_for(config: CampaignConfig, solc_path: str) -> list[C.CompileConfig]:
    return C.config_matrix(solc_path, evm_version=config.evm_version,
                           runs_list=tuple(config.runs_list),
                           include_unoptimized=config.include_unoptimized,
                           pipelines=tuple(config.pipelines))


def _campaign_fingerprint(config: CampaignConfig, solc_version: str, mode: str) -> str:
    blob = json.dumps({"echo": config.echo(), "solc_version": solc_version,
                       "mode": mode}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# worker


def _compile_cached(source: str, path: str, cfg: C.CompileConfig, cache_dir: str,
                    timeout: float, audit_seed: int | None,
                    counts: dict) -> C.CompileResult:
    result = C.compile_source(source, path, cfg, cache_dir=cache_dir, timeout=timeout)
    counts["compiles"] += 1
    if result.cached:
        counts["cache_hits"] += 1
        if audit_seed is not None:
            key = C._cache_key(source, cfg, C.solc_version(cfg.solc_path))
            if SplitMix64(mix_seed(audit_seed, key)).below(100) == 0:
                counts["cache_audits"] += 1
                fresh = C.compile_source(source, path, cfg, cache_dir=None,
                                         timeout=timeout)
                same = (fresh.ok == result.ok and
                        (not fresh.ok or fresh.artifact.deploy_bytecode
                         == result.artifact.deploy_bytecode))
                if not same:
                    raise RuntimeError(f"compile cache audit mismatch for {key}")
    if not result.ok:
        if result.failure_kind == "timeout":
            counts["compile_timeouts"] += 1
        else:
            counts["compile_failures"] += 1
    return result


def process_unit(payload: dict) -> dict:
    """Worker entry point: full pipeline for one unit. Pure in its payload."""
    unit = CORPUS.SourceUnit(id=payload["unit_id"], path=payload["path"],
                             source=payload["source"])
    mode = payload["mode"]
    seed = payload["seed"]
    cache_dir = payload["cache_dir"]
    timeout = payload["compile_timeout"]
    audit_seed = seed if payload["cache_audit"] else None
    matrix = [C.CompileConfig(solc_path=payload["solc_path"], **cfg)
              for cfg in payload["matrix"]]
    kinds = tuple(TransformKind.from_name(k) for k in payload["kinds"])
    version = C.solc_version(payload["solc_path"])

    counts = {"compiles": 0, "compile_failures": 0, "compile_timeouts": 0,
              "cache_hits": 0, "cache_audits": 0, "executions": 0}
    result: dict = {"unit_id": unit.id, "path": unit.path, "source": unit.source,
                    "status": "ok", "error": "", "counts": counts, "mutants": [],
                    "sites_by_kind": {}}

    try:
        sites = discover_all_sites(unit.source, kinds)
        by_kind: dict[str, int] = {}
        for s in sites:
            by_kind[s.kind] = by_kind.get(s.kind, 0) + 1
        result["sites_by_kind"] = by_kind
    except ParseError as exc:
        result["status"] = "error"
        result["error"] = f"parse: {exc}"
        return result

    # parent O0 compile + trace (shared by the equivalence gate)
    o0 = matrix[0]
    parent_compile = _compile_cached(unit.source, unit.path, o0, cache_dir,
                                     timeout, audit_seed, counts)
    counts["compiles"] -= 1  # parent compiles are accounted separately
    counts["parent_compiles"] = 1
    if not parent_compile.ok:
        result["status"] = "error"
        result["error"] = f"parent O0 compile failed: {parent_compile.error_summary()}"
        return result
    plan = plan_calls(parent_compile.artifact.abi,
                      mix_seed(seed, "plan:" + unit.id), rounds=payload["rounds"])
    try:
        parent_trace = run(parent_compile.artifact, plan)
        counts["executions"] += 1
    except ExecutionHarnessError as exc:
        result["status"] = "error"
        result["error"] = f"parent execution: {exc}"
        return result

    if mode == MODE_DOL:
        variants = [{"id": unit.id, "source": unit.source, "kinds": [],
                     "provenance": [], "identity": True}]
    else:
        mutants = mutate_unit(unit, seed, payload["budget"], kinds=kinds,
                              max_transforms=payload["max_transforms"])
        variants = [{"id": m.id, "source": m.source, "kinds": m.kinds(),
                     "provenance": [a.to_jsonable() for a in m.applications],
                     "identity": False}
                    for m in mutants]

    for variant in variants:
        entry: dict = {"mutant_id": variant["id"], "kinds": variant["kinds"],
                       "source": variant["source"],
                       "provenance": variant["provenance"],
                       "compiles": {}, "equivalence": None,
                       "equivalence_detail": None, "verdict": None,
                       "traces": None, "plan_seed": plan.seed,
                       "plan_rounds": plan.rounds}
        result["mutants"].append(entry)

        artifacts: dict[str, C.CompiledArtifact | None] = {}
        for cfg in matrix:
            if variant["identity"] and cfg.label == o0.label:
                comp = parent_compile
                counts["compiles"] += 1  # identity reuses the cached parent artifact
            else:
                comp = _compile_cached(variant["source"], unit.path, cfg, cache_dir,
                                       timeout, audit_seed, counts)
            artifacts[cfg.label] = comp.artifact if comp.ok else None
            entry["compiles"][cfg.label] = {
                "ok": comp.ok, "kind": comp.failure_kind,
                "message": comp.error_summary() if not comp.ok else "",
                "fingerprint": comp.artifact.fingerprint() if comp.ok else ""}

        # equivalence gate (IDOL mode only)
        if not variant["identity"]:
            mutant_o0 = artifacts[o0.label]
            if mutant_o0 is None:
                entry["equivalence"] = O.NONEQUIVALENT
                entry["equivalence_detail"] = {
                    "call_index": -1, "config_pair": ["parent-O0", "mutant-O0"],
                    "field": "compile", "selector": "compile",
                    "baseline_value": "ok",
                    "other_value": entry["compiles"][o0.label]["message"]}
                continue
            try:
                mutant_trace = run(mutant_o0, plan)
                counts["executions"] += 1
            except ExecutionHarnessError as exc:
                result["status"] = "error"
                result["error"] = f"mutant execution: {exc}"
                continue
            status, detail = O.check_mutant_equivalence(parent_trace, mutant_trace)
            entry["equivalence"] = status
            if status == O.NONEQUIVALENT:
                entry["equivalence_detail"] = detail.to_jsonable() if detail else None
                entry["traces"] = {"parent-O0": parent_trace.to_jsonable(),
                                   "mutant-O0": mutant_trace.to_jsonable()}
                continue
        else:
            mutant_trace = parent_trace

        # compile divergence?
        oks = [label for label, a in artifacts.items() if a is not None]
        fails = [label for label, a in artifacts.items() if a is None]
        if fails and oks:
            first_fail = fails[0]
            entry["verdict"] = {
                "kind": O.DIVERGENCE,
                "detail": {"call_index": -1,
                           "config_pair": [oks[0], first_fail],
                           "field": "compile", "selector": "compile",
                           "baseline_value": "compiles",
                           "other_value": (entry["compiles"][first_fail]["kind"] + ": "
                                           + entry["compiles"][first_fail]["message"])},
                "inconclusive_reason": "", "compile_divergence": True}
            continue
        if not oks:
            continue  # nothing compiled anywhere: parent-level problem, recorded above

        traces: dict[str, ExecutionTrace] = {}
        failed = False
        for cfg in matrix:
            artifact = artifacts[cfg.label]
            if variant["identity"] and cfg.label == o0.label:
                traces[cfg.label] = parent_trace
                counts["executions"] += 1
                continue
            if not variant["identity"] and cfg.label == o0.label:
                traces[cfg.label] = mutant_trace
                continue
            try:
                traces[cfg.label] = run(artifact, plan)
                counts["executions"] += 1
            except ExecutionHarnessError as exc:
                result["status"] = "error"
                result["error"] = f"execution under {cfg.label}: {exc}"
                failed = True
                break
        if failed:
            continue
        ordered = [traces[cfg.label] for cfg in matrix]
        verdict = O.compare(ordered)
        entry["verdict"] = verdict.to_jsonable()
        if verdict.kind == O.DIVERGENCE:
            entry["traces"] = {label: t.to_jsonable() for label, t in traces.items()}
    return result


# ---------------------------------------------------------------------------
# orchestration


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = tempfile.NamedTemporaryFile("w", dir=path.parent, prefix=".tmp-",
                                      delete=False)
    try:
        tmp.write(text)
        tmp.close()
        os.replace(tmp.name, path)
    except OSError:
        try:
            os.unlink(tmp.name)
        except OSError:
            pass
        raise


def run_campaign(config: CampaignConfig, mode: str = MODE_IDOL) -> dict:
    """Execute the full pipeline and return the report (also persisted)."""
    started = time.time()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache_dir = str(out / "cache")

    report: dict = {"mode": mode, "config": config.echo(), "solc": {},
                    "counts": {}, "per_kind": {}, "findings": [],
                    "unit_statuses": [], "corpus": {}, "exit_code": 0,
                    "timing": {}}

    all_findings: dict[str, O.BugReport] = {}
    totals = {"units_sampled": 0, "units_processed": 0, "units_errored": 0,
              "mutants": 0, "compiles": 0, "parent_compiles": 0,
              "compile_failures": 0, "compile_timeouts": 0, "cache_hits": 0,
              "cache_audits": 0, "executions": 0,
              "agree": 0, "divergence": 0, "inconclusive": 0,
              "equivalence_checked": 0, "nonequivalent": 0,
              "behavioral_findings": 0, "compile_divergences": 0,
              "wraparound": False}
    per_kind: dict[str, dict] = {k.value: {"sites": 0, "applied": 0,
                                           "equivalence_pass": 0,
                                           "equivalence_fail": 0}
                                 for k in TransformKind if k.value in config.kinds}

    for solc_path in config.solc_paths:
        version = C.solc_version(solc_path)
        report["solc"][solc_path] = version
        matrix = _matrix_for(config, solc_path)
        validator = matrix[0]
        index = CORPUS.ingest(config.corpus_root, validator)
        index.write(out / "corpus.index.json")
        report["corpus"] = {"root": str(config.corpus_root),
                            "files": len(index.entries),
                            "valid": len(index.valid_entries()),
                            "unsupported": sum(1 for e in index.entries
                                               if e.status == CORPUS.UNSUPPORTED),
                            "compile_failed": sum(1 for e in index.entries
                                                  if e.status == CORPUS.COMPILE_FAILED)}
        sampled = CORPUS.sample(index, config.seed, config.units)
        totals["units_sampled"] += len(sampled)
        totals["wraparound"] = totals["wraparound"] or (
            0 < len(index.valid_entries()) < config.units)

        fp = _campaign_fingerprint(config, version, mode)
        state_dir = out / "state" / fp
        state_dir.mkdir(parents=True, exist_ok=True)

        unique: dict[str, CORPUS.SourceUnit] = {}
        occurrences: dict[str, int] = {}
        for u in sampled:
            unique.setdefault(u.id, u)
            occurrences[u.id] = occurrences.get(u.id, 0) + 1

        pending: list[dict] = []
        done: dict[str, dict] = {}
        for uid, u in unique.items():
            state_file = state_dir / f"{uid}.json"
            if state_file.is_file():
                try:
                    done[uid] = json.loads(state_file.read_text())
                    continue
                except json.JSONDecodeError:
                    pass
            pending.append({
                "unit_id": u.id, "path": u.path, "source": u.source,
                "seed": config.seed, "budget": config.budget,
                "kinds": list(config.kinds), "rounds": config.rounds,
                "max_transforms": config.max_transforms,
                "matrix": [{"optimize": m.optimize, "runs": m.runs,
                            "pipeline": m.pipeline, "evm_version": m.evm_version}
                           for m in matrix],
                "solc_path": solc_path, "cache_dir": cache_dir,
                "compile_timeout": config.compile_timeout, "mode": mode,
                "cache_audit": config.cache_audit,
            })

        if pending:
            jobs = min(config.effective_jobs(), len(pending))
            if jobs <= 1:
                results = map(process_unit, pending)
                for res in results:
                    done[res["unit_id"]] = res
                    _atomic_write(state_dir / f"{res['unit_id']}.json",
                                  json.dumps(res, sort_keys=True))
            else:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    for res in pool.map(process_unit, pending, chunksize=1):
                        done[res["unit_id"]] = res
                        _atomic_write(state_dir / f"{res['unit_id']}.json",
                                      json.dumps(res, sort_keys=True))

        # canonical assembly order: corpus path, then id
        ordered_ids = sorted(unique, key=lambda uid: (unique[uid].path, uid))
        for uid in ordered_ids:
            res = done[uid]
            mult = occurrences[uid]
            _merge_unit_result(res, mult, totals, per_kind, all_findings,
                               solc_path, version, config, report)

    findings = [all_findings[k] for k in sorted(all_findings)]

    if config.reduce_findings and findings:
        from idol.reduce import reduce_report
        for finding in findings:
            if finding.classification == O.CLASS_BEHAVIORAL:
                finding.minimized_source = reduce_report(
                    finding.to_jsonable(), cache_dir=cache_dir,
                    compile_timeout=config.compile_timeout)

    totals["behavioral_findings"] = sum(
        1 for f in findings if f.classification == O.CLASS_BEHAVIORAL)
    totals["compile_divergences"] = sum(
        1 for f in findings if f.classification == O.CLASS_COMPILE_DIVERGENCE)

    if totals["nonequivalent"] > 0:
        exit_code = O.EXIT_NONEQUIVALENCE
    elif totals["behavioral_findings"] > 0:
        exit_code = O.EXIT_BEHAVIORAL
    elif totals["compile_divergences"] > 0:
        exit_code = O.EXIT_COMPILE_DIVERGENCE
    else:
        exit_code = O.EXIT_OK

    # cache statistics are operational (they differ under resume), so they
    # live with the timing data that determinism comparisons strip
    cache_stats = {"cache_hits": totals.pop("cache_hits"),
                   "cache_audits": totals.pop("cache_audits")}
    report["counts"] = totals
    report["per_kind"] = per_kind
    report["findings"] = [f.to_jsonable() for f in findings]
    report["exit_code"] = exit_code
    report["timing"] = {"wall_clock_seconds": round(time.time() - started, 3),
                        **cache_stats}

    findings_dir = out / "findings"
    for f in findings:
        stem = f.signature.file_stem()
        _atomic_write(findings_dir / f"{stem}.json",
                      json.dumps(f.to_jsonable(), indent=2, sort_keys=True))
        if f.minimized_source is not None:
            _atomic_write(findings_dir / f"{stem}.min.sol", f.minimized_source)
    _atomic_write(out / "campaign.json", json.dumps(report, indent=2, sort_keys=True))
    return report


def run_dol_baseline(config: CampaignConfig) -> dict:
    """The conventional approach: no mutation, units themselves compared
    across the optimizer matrix."""
    return run_campaign(config, mode=MODE_DOL)


def _merge_unit_result(res: dict, multiplicity: int, totals: dict,
                       per_kind: dict, all_findings: dict,
                       solc_path: str, version: str, config: CampaignConfig,
                       report: dict) -> None:
    totals["units_processed"] += multiplicity
    report["unit_statuses"].append({"path": res["path"], "unit_id": res["unit_id"],
                                    "status": res["status"], "error": res["error"],
                                    "mutants": len(res["mutants"]),
                                    "occurrences": multiplicity})
    if res["status"] != "ok":
        totals["units_errored"] += multiplicity
    for kind, n in res.get("sites_by_kind", {}).items():
        if kind in per_kind:
            per_kind[kind]["sites"] += n * multiplicity
    for key in ("compiles", "parent_compiles", "compile_failures",
                "compile_timeouts", "cache_hits", "cache_audits", "executions"):
        totals[key] += res["counts"].get(key, 0) * multiplicity

    for entry in res["mutants"]:
        totals["mutants"] += multiplicity
        for kind in entry["kinds"]:
            if kind in per_kind:
                per_kind[kind]["applied"] += multiplicity
        if entry["equivalence"] is not None:
            totals["equivalence_checked"] += multiplicity
            passed = entry["equivalence"] == O.EQUIVALENT
            for kind in set(entry["kinds"]):
                if kind in per_kind:
                    per_kind[kind]["equivalence_pass" if passed
                                   else "equivalence_fail"] += multiplicity
            if not passed:
                totals["nonequivalent"] += multiplicity
                detail = entry["equivalence_detail"] or {}
                sig = O.BugSignature(
                    solc_version=version,
                    config_pair=tuple(detail.get("config_pair",
                                                 ["parent-O0", "mutant-O0"])),
                    field=detail.get("field", "trace"),
                    selector=detail.get("selector", "deploy"),
                    diff_hash=hashlib.sha256(
                        (detail.get("baseline_value", "") + "\x00"
                         + detail.get("other_value", "")).encode()).hexdigest()[:16])
                _record_finding(all_findings, O.CLASS_NONEQUIVALENCE, sig, entry,
                                res, solc_path, version, config)
                continue
        verdict = entry["verdict"]
        if verdict is None:
            continue
        if verdict["kind"] == O.AGREE:
            totals["agree"] += multiplicity
        elif verdict["kind"] == O.INCONCLUSIVE:
            totals["inconclusive"] += multiplicity
        elif verdict["kind"] == O.DIVERGENCE:
            totals["divergence"] += multiplicity
            detail = verdict["detail"]
            is_compile = verdict.get("compile_divergence", False)
            sig = O.BugSignature(
                solc_version=version,
                config_pair=tuple(detail["config_pair"]),
                field=detail["field"],
                selector=detail["selector"],
                diff_hash=hashlib.sha256(
                    (detail["baseline_value"] + "\x00"
                     + detail["other_value"]).encode()).hexdigest()[:16])
            cls = O.CLASS_COMPILE_DIVERGENCE if is_compile else O.CLASS_BEHAVIORAL
            _record_finding(all_findings, cls, sig, entry, res, solc_path,
                            version, config)


def _record_finding(all_findings: dict, classification: str, sig: O.BugSignature,
                    entry: dict, res: dict, solc_path: str, version: str,
                    config: CampaignConfig) -> None:
    key = sig.key()
    if key in all_findings:
        all_findings[key].duplicates += 1
        return
    verdict_json = entry.get("verdict") or {
        "kind": O.DIVERGENCE, "detail": entry.get("equivalence_detail"),
        "inconclusive_reason": ""}
    detail = verdict_json.get("detail") or {}
    verdict = O.Verdict(
        kind=verdict_json["kind"],
        detail=O.DivergenceDetail(
            call_index=detail.get("call_index", -1),
            config_pair=tuple(detail.get("config_pair", ["?", "?"])),
            field=detail.get("field", "?"),
            selector=detail.get("selector", "?"),
            baseline_value=detail.get("baseline_value", ""),
            other_value=detail.get("other_value", "")) if detail else None,
        inconclusive_reason=verdict_json.get("inconclusive_reason", ""))
    all_findings[key] = O.BugReport(
        classification=classification,
        signature=sig,
        verdict=verdict,
        parent_id=res["unit_id"],
        parent_path=res["path"],
        parent_source=_parent_source_of(entry, res),
        mutant_id=entry["mutant_id"],
        mutant_source=entry["source"],
        provenance=entry["provenance"],
        artifact_fingerprints={label: c["fingerprint"]
                               for label, c in entry["compiles"].items()},
        traces=entry["traces"] or {},
        plan_seed=entry["plan_seed"],
        plan_rounds=entry["plan_rounds"],
        solc_path=solc_path,
        solc_version=version,
        evm_version=config.evm_version)


def _parent_source_of(entry: dict, res: dict) -> str:
    # the worker does not echo the parent source per mutant; reconstruct from
    # provenance replay being unnecessary, campaign keeps the sampled source
    return res.get("source", "")
