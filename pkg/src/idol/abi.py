"""ABI encoding of call arguments and selector derivation.

Covers the value types, bytes/string and (nested) arrays the corpus grammar
can produce. Tuples and function-typed parameters are unsupported; the call
planner skips functions using them and notes the skip in the plan.
"""

from __future__ import annotations

import re

from idol.keccak import keccak256


class AbiError(Exception):
    pass


class UnsupportedAbiType(AbiError):
    pass


_ARRAY_RE = re.compile(r"\A(.*)\[(\d*)\]\Z")


def parse_type(type_str: str):
    """Return ("array", base, length|None) or ("elem", canonical_name)."""
    m = _ARRAY_RE.match(type_str)
    if m:
        return ("array", m.group(1), int(m.group(2)) if m.group(2) else None)
    if type_str.startswith("(") or type_str == "tuple" or type_str == "function":
        raise UnsupportedAbiType(type_str)
    if type_str in ("uint", "int"):
        type_str += "256"
    return ("elem", type_str)


def is_dynamic(type_str: str) -> bool:
    shape = parse_type(type_str)
    if shape[0] == "array":
        _, base, length = shape
        return length is None or is_dynamic(base)
    name = shape[1]
    return name in ("bytes", "string")


def _encode_int(value: int, bits: int, signed: bool) -> bytes:
    if signed:
        lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
        if not lo <= value <= hi:
            raise AbiError(f"int{bits} out of range: {value}")
        return (value & ((1 << 256) - 1)).to_bytes(32, "big")
    if not 0 <= value < (1 << bits):
        raise AbiError(f"uint{bits} out of range: {value}")
    return value.to_bytes(32, "big")


def encode_value(type_str: str, value) -> bytes:
    """Encoding of one (possibly dynamic) value, without an offset head."""
    shape = parse_type(type_str)
    if shape[0] == "array":
        _, base, length = shape
        items = list(value)
        if length is not None and len(items) != length:
            raise AbiError(f"{type_str} expects {length} items, got {len(items)}")
        body = encode_arguments([base] * len(items), items)
        if length is None:
            return len(items).to_bytes(32, "big") + body
        return body

    name = shape[1]
    if name == "bool":
        return (1 if value else 0).to_bytes(32, "big")
    if name == "address":
        return int(value).to_bytes(32, "big")
    if name in ("bytes", "string"):
        raw = value.encode("utf-8") if isinstance(value, str) else bytes(value)
        padded = raw + b"\x00" * (-len(raw) % 32)
        return len(raw).to_bytes(32, "big") + padded
    m = re.match(r"\Abytes(\d+)\Z", name)
    if m:
        n = int(m.group(1))
        raw = bytes(value)
        if len(raw) != n:
            raise AbiError(f"{name} expects {n} bytes, got {len(raw)}")
        return raw + b"\x00" * (32 - n)
    m = re.match(r"\A(u?)int(\d+)\Z", name)
    if m:
        return _encode_int(int(value), int(m.group(2)), m.group(1) == "")
    raise UnsupportedAbiType(name)


def encode_arguments(types: list[str], values: list) -> bytes:
    """Standard head/tail encoding of an argument tuple."""
    if len(types) != len(values):
        raise AbiError("types/values length mismatch")
    heads: list[bytes] = []
    tails: list[bytes] = []
    head_size = 32 * len(types)
    for t, v in zip(types, values):
        enc = encode_value(t, v)
        if is_dynamic(t):
            offset = head_size + sum(len(x) for x in tails)
            heads.append(offset.to_bytes(32, "big"))
            tails.append(enc)
        else:
            heads.append(enc)
    return b"".join(heads) + b"".join(tails)


def canonical_signature(entry: dict) -> str:
    types = ",".join(inp["type"] for inp in entry.get("inputs", []))
    return f"{entry['name']}({types})"


def function_selector(entry: dict) -> bytes:
    return keccak256(canonical_signature(entry).encode("ascii"))[:4]


def abi_functions(abi: list) -> list[dict]:
    """Callable function entries in ABI order."""
    return [e for e in abi if e.get("type") == "function"]
