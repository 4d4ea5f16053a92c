"""Deterministic deployment and exercising of compiled artifacts.

The call plan is a pure function of (ABI, seed, plan parameters) and is
shared verbatim by every optimizer configuration of the same unit; traces
record exactly the observables optimization must preserve (status, return
data, logs, storage digest) and exclude gas by design.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from idol import abi as ABI
from idol.evm import Env, Evm, EvmError, SUCCESS
from idol.rng import SplitMix64, mix_seed

# fixed sender/address pools: some arbitrary but pinned constants
SENDER_POOL = (
    0x1000000000000000000000000000000000000001,
    0x2000000000000000000000000000000000000002,
    0x3000000000000000000000000000000000000003,
    0x4000000000000000000000000000000000000004,
)
CONTRACT_ADDRESS = 0x000000000000000000000000000000000A11CE00
INITIAL_BALANCE = 10 ** 20
CALL_GAS = 1 << 31

BYTES_LEN_POOL = (0, 1, 31, 32, 33)
ARRAY_LEN_POOL = (0, 1, 2, 3)


class ExecutionHarnessError(Exception):
    """A defect in the harness or its inputs, never a compiler finding."""


@dataclass
class PlannedCall:
    name: str
    signature: str
    selector: str  # hex
    calldata: str  # hex, selector included
    sender: int

    def to_jsonable(self) -> dict:
        return {"name": self.name, "signature": self.signature,
                "selector": self.selector, "calldata": self.calldata,
                "sender": f"{self.sender:040x}"}


@dataclass
class CallPlan:
    seed: int
    rounds: int
    calls: list[PlannedCall] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    env: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {"seed": self.seed, "rounds": self.rounds,
                "calls": [c.to_jsonable() for c in self.calls],
                "skipped": self.skipped, "env": self.env}

    def plan_hash(self) -> str:
        blob = json.dumps(self.to_jsonable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:32]

    def selector_set(self) -> set[str]:
        return {c.selector for c in self.calls}


def _env_jsonable(env: Env) -> dict:
    return {"number": env.number, "timestamp": env.timestamp,
            "chain_id": env.chain_id, "coinbase": f"{env.coinbase:040x}",
            "gas_limit": env.gas_limit}


def _draw_uint(rng: SplitMix64, bits: int) -> int:
    value = 0
    for _ in range((bits + 63) // 64):
        value = (value << 64) | rng.next()
    return value & ((1 << bits) - 1)


def _int_pool_value(rng: SplitMix64, bits: int, signed: bool):
    if signed:
        type_max = (1 << (bits - 1)) - 1
        pool = (0, 1, 2, type_max, type_max - 1)
    else:
        type_max = (1 << bits) - 1
        pool = (0, 1, 2, type_max, type_max - 1)
    pick = rng.below(len(pool) + 1)
    if pick < len(pool):
        value = pool[pick]
    else:
        value = _draw_uint(rng, bits)
        if signed and value > (1 << (bits - 1)) - 1:
            value -= 1 << bits
    return value


def _gen_value(type_str: str, rng: SplitMix64, round_index: int):
    shape = ABI.parse_type(type_str)
    if shape[0] == "array":
        _, base, length = shape
        count = length if length is not None else ARRAY_LEN_POOL[rng.below(len(ARRAY_LEN_POOL))]
        return [_gen_value(base, rng, round_index) for _ in range(count)]
    name = shape[1]
    if name == "bool":
        return round_index % 2 == 1  # both values guaranteed across rounds
    if name == "address":
        return SENDER_POOL[rng.below(len(SENDER_POOL))]
    if name in ("bytes", "string"):
        n = BYTES_LEN_POOL[rng.below(len(BYTES_LEN_POOL))]
        raw = bytes((rng.next() & 0xFF) for _ in range(n))
        if name == "string":
            return "".join(chr(0x20 + b % 0x5F) for b in raw)
        return raw
    if name.startswith("bytes"):
        n = int(name[5:])
        return bytes((rng.next() & 0xFF) for _ in range(n))
    if name.startswith("uint"):
        return _int_pool_value(rng, int(name[4:] or "256"), signed=False)
    if name.startswith("int"):
        return _int_pool_value(rng, int(name[3:] or "256"), signed=True)
    raise ABI.UnsupportedAbiType(name)


def plan_calls(abi: list, seed: int, rounds: int = 2) -> CallPlan:
    """Type-directed, boundary-biased plan covering every ABI function once
    per round, in ABI declaration order."""
    rng = SplitMix64(mix_seed(seed, "callplan"))
    plan = CallPlan(seed=seed, rounds=rounds, env=_env_jsonable(Env()))
    skipped: set[str] = set()
    for round_index in range(rounds):
        for entry in ABI.abi_functions(abi):
            try:
                signature = ABI.canonical_signature(entry)
            except KeyError:
                continue
            if signature in skipped:
                continue
            try:
                types = [inp["type"] for inp in entry.get("inputs", [])]
                values = [_gen_value(t, rng, round_index) for t in types]
                calldata = ABI.function_selector(entry) + ABI.encode_arguments(types, values)
            except ABI.UnsupportedAbiType:
                skipped.add(signature)
                continue
            sender = SENDER_POOL[rng.below(len(SENDER_POOL))]
            plan.calls.append(PlannedCall(
                name=entry["name"], signature=signature,
                selector=ABI.function_selector(entry).hex(),
                calldata=calldata.hex(), sender=sender))
    plan.skipped = sorted(skipped)
    return plan


@dataclass
class CallRecord:
    name: str
    selector: str
    status: str            # success | revert | failure
    failure_kind: str
    return_data: str       # hex
    logs: list[dict]
    storage_digest: str

    def to_jsonable(self) -> dict:
        return {"name": self.name, "selector": self.selector, "status": self.status,
                "failure_kind": self.failure_kind, "return_data": self.return_data,
                "logs": self.logs, "storage_digest": self.storage_digest}

    @classmethod
    def from_jsonable(cls, d: dict) -> "CallRecord":
        return cls(name=d["name"], selector=d["selector"], status=d["status"],
                   failure_kind=d["failure_kind"], return_data=d["return_data"],
                   logs=d["logs"], storage_digest=d["storage_digest"])


@dataclass
class ExecutionTrace:
    plan_hash: str
    config_label: str
    deploy_outcome: dict
    calls: list[CallRecord] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {"plan_hash": self.plan_hash, "config_label": self.config_label,
                "deploy_outcome": self.deploy_outcome,
                "calls": [c.to_jsonable() for c in self.calls],
                "skipped": self.skipped}

    def canonical(self) -> str:
        """Serialization used for byte-exact comparisons; the config label is
        excluded so traces of different configs can be compared directly."""
        body = self.to_jsonable()
        body.pop("config_label")
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_jsonable(cls, d: dict) -> "ExecutionTrace":
        return cls(plan_hash=d["plan_hash"], config_label=d.get("config_label", ""),
                   deploy_outcome=d["deploy_outcome"],
                   calls=[CallRecord.from_jsonable(c) for c in d["calls"]],
                   skipped=d.get("skipped", []))


def storage_digest(storage: dict[int, int]) -> str:
    """Order-insensitive digest of the nonzero storage slots."""
    blob = ";".join(f"{k:x}:{v:x}" for k, v in sorted(storage.items()))
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def _artifact_selectors(artifact) -> set[str]:
    out = set()
    for entry in ABI.abi_functions(artifact.abi):
        try:
            out.add(ABI.function_selector(entry).hex())
        except ABI.UnsupportedAbiType:
            continue
    return out


def run(artifact, plan: CallPlan) -> ExecutionTrace:
    """Deploy and execute the plan against one artifact, deterministically."""
    if not plan.selector_set() <= _artifact_selectors(artifact):
        raise ExecutionHarnessError(
            "call plan selectors do not match the artifact ABI")
    balances = {addr: INITIAL_BALANCE for addr in SENDER_POOL}
    evm = Evm(env=Env(), address=CONTRACT_ADDRESS, balances=balances)
    trace = ExecutionTrace(plan_hash=plan.plan_hash(),
                           config_label=artifact.config.label,
                           deploy_outcome={}, skipped=list(plan.skipped))
    try:
        deploy = evm.deploy(artifact.deploy_bytecode, SENDER_POOL[0], gas=CALL_GAS)
    except EvmError as exc:
        raise ExecutionHarnessError(f"deploy: {exc}") from exc
    if deploy.status != SUCCESS:
        trace.deploy_outcome = {"status": deploy.status,
                                "kind": deploy.failure_kind,
                                "data": deploy.return_data.hex()}
        return trace
    trace.deploy_outcome = {"status": "success", "kind": "",
                            "data": storage_digest(evm.storage)}
    for call in plan.calls:
        try:
            outcome = evm.call(bytes.fromhex(call.calldata), call.sender, gas=CALL_GAS)
        except EvmError as exc:
            raise ExecutionHarnessError(f"call {call.signature}: {exc}") from exc
        trace.calls.append(CallRecord(
            name=call.name,
            selector=call.selector,
            status=outcome.status,
            failure_kind=outcome.failure_kind,
            return_data=outcome.return_data.hex(),
            logs=[log.to_jsonable() for log in outcome.logs],
            storage_digest=storage_digest(evm.storage)))
    return trace
