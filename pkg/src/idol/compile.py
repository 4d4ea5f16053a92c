"""Driving the external solc binary across the optimizer configuration matrix.

solc is invoked through its JSON standard interface with deterministic
settings (metadata hash suppressed), and every result is cached on disk keyed
by (source hash, config fingerprint, exact solc version) so re-runs never
re-invoke the compiler.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TIMEOUT = 60.0

_version_cache: dict[str, str] = {}


class SolcInvocationError(Exception):
    """solc could not be executed at all (bad path, broken binary)."""


@dataclass(frozen=True)
class CompileConfig:
    optimize: bool
    runs: int = 200
    pipeline: str = "legacy"  # legacy | via-ir
    solc_path: str = "solc"
    evm_version: str = "istanbul"

    @property
    def label(self) -> str:
        if not self.optimize:
            base = "O0"
        else:
            base = f"opt-runs{self.runs}"
        return base + ("-viair" if self.pipeline == "via-ir" else "")

    def fingerprint(self) -> str:
        blob = json.dumps({
            "optimize": self.optimize,
            "runs": self.runs,
            "pipeline": self.pipeline,
            "evm_version": self.evm_version,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_jsonable(self) -> dict:
        return {"optimize": self.optimize, "runs": self.runs,
                "pipeline": self.pipeline, "evm_version": self.evm_version,
                "label": self.label}


@dataclass
class CompiledArtifact:
    config: CompileConfig
    contract_name: str
    deploy_bytecode: bytes
    runtime_bytecode: bytes
    abi: list
    solc_version: str
    diagnostics: str = ""
    method_identifiers: dict[str, str] = field(default_factory=dict)

    @property
    def constructor_inputs(self) -> int:
        for entry in self.abi:
            if entry.get("type") == "constructor":
                return len(entry.get("inputs", []))
        return 0

    def fingerprint(self) -> str:
        return hashlib.sha256(self.deploy_bytecode + b"|" + self.runtime_bytecode).hexdigest()[:16]


@dataclass
class CompileResult:
    ok: bool
    artifact: CompiledArtifact | None = None
    failure_kind: str = ""  # "error" | "timeout"
    message: str = ""
    cached: bool = False

    def error_summary(self) -> str:
        return self.message.splitlines()[0] if self.message else self.failure_kind


def solc_version(solc_path: str) -> str:
    """Exact version string reported by the binary, cached per path."""
    if solc_path in _version_cache:
        return _version_cache[solc_path]
    try:
        proc = subprocess.run([solc_path, "--version"], capture_output=True,
                              text=True, timeout=60)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise SolcInvocationError(f"cannot run {solc_path} --version: {exc}") from exc
    m = re.search(r"Version:\s*(\S+)", proc.stdout)
    if proc.returncode != 0 or not m:
        raise SolcInvocationError(
            f"{solc_path} --version failed (rc={proc.returncode}): {proc.stderr[:500]}")
    _version_cache[solc_path] = m.group(1)
    return m.group(1)


def config_matrix(solc_path: str, evm_version: str = "istanbul",
                  runs_list: tuple[int, ...] = (1, 200),
                  include_unoptimized: bool = True,
                  pipelines: tuple[str, ...] = ("legacy",)) -> list[CompileConfig]:
    """Default: the three reference configs O0, opt/runs=1, opt/runs=200.

    Enabling a second pipeline yields the cross product, legacy configs first.
    """
    matrix: list[CompileConfig] = []
    for pipeline in pipelines:
        if include_unoptimized:
            matrix.append(CompileConfig(optimize=False, runs=200, pipeline=pipeline,
                                        solc_path=solc_path, evm_version=evm_version))
        for runs in runs_list:
            matrix.append(CompileConfig(optimize=True, runs=runs, pipeline=pipeline,
                                        solc_path=solc_path, evm_version=evm_version))
    return matrix


def _standard_json_input(source: str, path: str, config: CompileConfig) -> dict:
    settings: dict = {
        "optimizer": {"enabled": config.optimize, "runs": config.runs},
        "evmVersion": config.evm_version,
        "metadata": {"bytecodeHash": "none"},
        "outputSelection": {"*": {"*": [
            "abi", "evm.bytecode.object", "evm.deployedBytecode.object",
            "evm.methodIdentifiers",
        ]}},
    }
    if config.pipeline == "via-ir":
        settings["viaIR"] = True
    return {"language": "Solidity",
            "sources": {path: {"content": source}},
            "settings": settings}


_CONTRACT_DECL_RE = re.compile(r"\bcontract\s+([A-Za-z_$][A-Za-z0-9_$]*)")


def _pick_contract(source: str, contracts: dict) -> tuple[str, dict] | None:
    """Deployable contract appearing last in the source (the conventional
    "main" contract of generated single-file corpora)."""
    deployable = {name: data for name, data in contracts.items()
                  if data.get("evm", {}).get("bytecode", {}).get("object")}
    if not deployable:
        return None
    last: tuple[int, str] | None = None
    for m in _CONTRACT_DECL_RE.finditer(source):
        if m.group(1) in deployable:
            pos = (m.start(), m.group(1))
            if last is None or pos > last:
                last = pos
    name = last[1] if last else sorted(deployable)[-1]
    return name, deployable[name]


def _cache_key(source: str, config: CompileConfig, version: str) -> str:
    h = hashlib.sha256()
    h.update(source.encode("utf-8"))
    h.update(b"|")
    h.update(config.fingerprint().encode())
    h.update(b"|")
    h.update(version.encode())
    return h.hexdigest()[:40]


def _result_to_jsonable(result: CompileResult) -> dict:
    out: dict = {"ok": result.ok, "failure_kind": result.failure_kind,
                 "message": result.message}
    if result.artifact is not None:
        a = result.artifact
        out["artifact"] = {
            "contract_name": a.contract_name,
            "deploy_bytecode": a.deploy_bytecode.hex(),
            "runtime_bytecode": a.runtime_bytecode.hex(),
            "abi": a.abi,
            "solc_version": a.solc_version,
            "diagnostics": a.diagnostics,
            "method_identifiers": a.method_identifiers,
        }
    return out


def _result_from_jsonable(data: dict, config: CompileConfig) -> CompileResult:
    artifact = None
    if "artifact" in data:
        a = data["artifact"]
        artifact = CompiledArtifact(
            config=config,
            contract_name=a["contract_name"],
            deploy_bytecode=bytes.fromhex(a["deploy_bytecode"]),
            runtime_bytecode=bytes.fromhex(a["runtime_bytecode"]),
            abi=a["abi"],
            solc_version=a["solc_version"],
            diagnostics=a.get("diagnostics", ""),
            method_identifiers=a.get("method_identifiers", {}),
        )
    return CompileResult(ok=data["ok"], artifact=artifact,
                         failure_kind=data.get("failure_kind", ""),
                         message=data.get("message", ""), cached=True)


def compile_source(source: str, path: str, config: CompileConfig,
                   cache_dir: str | Path | None = None,
                   timeout: float = DEFAULT_TIMEOUT) -> CompileResult:
    """Compile one source file under one configuration, cache-backed."""
    version = solc_version(config.solc_path)
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / (_cache_key(source, config, version) + ".json")
        if cache_file.is_file():
            try:
                return _result_from_jsonable(json.loads(cache_file.read_text()), config)
            except (json.JSONDecodeError, KeyError, ValueError):
                pass  # corrupt cache entry: recompile and overwrite
    result = _invoke_solc(source, path, config, version, timeout)
    if cache_file is not None and result.failure_kind != "timeout":
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = tempfile.NamedTemporaryFile("w", dir=cache_file.parent,
                                          prefix=".tmp-", suffix=".json", delete=False)
        try:
            json.dump(_result_to_jsonable(result), tmp)
            tmp.close()
            os.replace(tmp.name, cache_file)
        except OSError:
            try:
                os.unlink(tmp.name)
            except OSError:
                pass
    return result


def _invoke_solc(source: str, path: str, config: CompileConfig, version: str,
                 timeout: float) -> CompileResult:
    request = json.dumps(_standard_json_input(source, path, config))
    try:
        proc = subprocess.run([config.solc_path, "--standard-json"],
                              input=request.encode("utf-8"), capture_output=True,
                              timeout=timeout)
    except subprocess.TimeoutExpired:
        return CompileResult(ok=False, failure_kind="timeout",
                             message=f"solc exceeded {timeout}s wall clock")
    except OSError as exc:
        raise SolcInvocationError(f"cannot execute {config.solc_path}: {exc}") from exc
    if proc.returncode != 0:
        return CompileResult(ok=False, failure_kind="error",
                             message=f"solc exited {proc.returncode}: "
                                     f"{proc.stderr.decode('utf-8', 'replace')[:2000]}")
    try:
        output = json.loads(proc.stdout.decode("utf-8"))
    except json.JSONDecodeError as exc:
        return CompileResult(ok=False, failure_kind="error",
                             message=f"unparseable solc output: {exc}")
    errors = [e for e in output.get("errors", []) if e.get("severity") == "error"]
    warnings = [e.get("formattedMessage", "") for e in output.get("errors", [])
                if e.get("severity") != "error"]
    if errors:
        return CompileResult(ok=False, failure_kind="error",
                             message=errors[0].get("formattedMessage",
                                                   errors[0].get("message", "error")))
    contracts = output.get("contracts", {}).get(path, {})
    picked = _pick_contract(source, contracts)
    if picked is None:
        return CompileResult(ok=False, failure_kind="error",
                             message="no deployable contract in output")
    name, data = picked
    evm = data["evm"]
    artifact = CompiledArtifact(
        config=config,
        contract_name=name,
        deploy_bytecode=bytes.fromhex(evm["bytecode"]["object"]),
        runtime_bytecode=bytes.fromhex(evm.get("deployedBytecode", {}).get("object", "")),
        abi=data.get("abi", []),
        solc_version=version,
        diagnostics="".join(warnings)[:4000],
        method_identifiers=evm.get("methodIdentifiers", {}) or {},
    )
    if not artifact.deploy_bytecode:
        return CompileResult(ok=False, failure_kind="error",
                             message="empty deploy bytecode")
    return CompileResult(ok=True, artifact=artifact)


def compile_unit(unit, config: CompileConfig, cache_dir=None,
                 timeout: float = DEFAULT_TIMEOUT) -> CompileResult:
    """Compile a SourceUnit or MutantUnit."""
    source = unit.source
    path = getattr(unit, "path", None) or getattr(unit.unit, "path", "input.sol")
    return compile_source(source, path, config, cache_dir=cache_dir, timeout=timeout)
