"""Minimal deterministic EVM for exercising compiled artifacts in-process.

Implements the full Istanbul opcode set for a single-contract world: no
message-call or create opcodes (the grammar subset cannot produce them; if
encountered they raise EvmError, which the campaign records as a harness
error rather than a finding). Gas metering follows the Istanbul cost table
closely enough to terminate runaway loops deterministically; exact gas is
deliberately not an observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from idol.keccak import keccak256

U256 = (1 << 256) - 1
SIGN_BIT = 1 << 255

SUCCESS = "success"
REVERT = "revert"
FAILURE = "failure"

OUT_OF_GAS = "out_of_gas"
INVALID_OPCODE = "invalid_opcode"
INVALID_JUMP = "invalid_jump"
STACK_UNDERFLOW = "stack_underflow"
STACK_OVERFLOW = "stack_overflow"


class EvmError(Exception):
    """Internal fault: the bytecode needs behavior this EVM does not model."""


@dataclass(frozen=True)
class Env:
    number: int = 1
    timestamp: int = 1
    chain_id: int = 1
    coinbase: int = 0x00000000000000000000000000000000C0FFEE00
    gas_limit: int = 1 << 31
    gas_price: int = 0


@dataclass
class LogEntry:
    topics: list[int]
    data: bytes

    def to_jsonable(self) -> dict:
        return {"topics": [f"{t:064x}" for t in self.topics],
                "data": self.data.hex()}


@dataclass
class CallOutcome:
    status: str
    failure_kind: str = ""
    return_data: bytes = b""
    logs: list[LogEntry] = field(default_factory=list)


def _to_signed(x: int) -> int:
    return x - (1 << 256) if x & SIGN_BIT else x


def _mem_words(n: int) -> int:
    return (n + 31) >> 5


def _mem_cost(words: int) -> int:
    return 3 * words + (words * words >> 9)


_UNSUPPORTED = {0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF4: "DELEGATECALL",
                0xF5: "CREATE2", 0xFA: "STATICCALL", 0xFF: "SELFDESTRUCT"}

# istanbul base gas costs for the non-push/dup/swap opcodes handled generically
_GAS = {
    0x00: 0, 0x01: 3, 0x02: 5, 0x03: 3, 0x04: 5, 0x05: 5, 0x06: 5, 0x07: 5,
    0x08: 8, 0x09: 8, 0x0A: 10, 0x0B: 5,
    0x10: 3, 0x11: 3, 0x12: 3, 0x13: 3, 0x14: 3, 0x15: 3, 0x16: 3, 0x17: 3,
    0x18: 3, 0x19: 3, 0x1A: 3, 0x1B: 3, 0x1C: 3, 0x1D: 3,
    0x20: 30,
    0x30: 2, 0x31: 700, 0x32: 2, 0x33: 2, 0x34: 2, 0x35: 3, 0x36: 2, 0x37: 3,
    0x38: 2, 0x39: 3, 0x3A: 2, 0x3B: 700, 0x3C: 700, 0x3D: 2, 0x3E: 3, 0x3F: 700,
    0x40: 20, 0x41: 2, 0x42: 2, 0x43: 2, 0x44: 2, 0x45: 2, 0x46: 1, 0x47: 5,
    0x50: 2, 0x51: 3, 0x52: 3, 0x53: 3, 0x54: 800, 0x56: 8, 0x57: 10,
    0x58: 2, 0x59: 2, 0x5A: 2, 0x5B: 1,
    0xF3: 0, 0xFD: 0, 0xFE: 0,
}


class Evm:
    """One contract account plus a fixed environment."""

    def __init__(self, env: Env | None = None,
                 address: int = 0x000000000000000000000000000000000A11CE00,
                 balances: dict[int, int] | None = None):
        self.env = env or Env()
        self.address = address
        self.code = b""
        self.storage: dict[int, int] = {}
        self.balances: dict[int, int] = dict(balances or {})

    # -- public entry points -------------------------------------------------

    def deploy(self, initcode: bytes, sender: int, gas: int | None = None) -> CallOutcome:
        outcome = self._execute(initcode, b"", sender, gas)
        if outcome.status == SUCCESS:
            self.code = outcome.return_data
        return outcome

    def call(self, data: bytes, sender: int, gas: int | None = None) -> CallOutcome:
        """Execute one external call; state changes roll back unless it succeeds."""
        snapshot = dict(self.storage)
        outcome = self._execute(self.code, data, sender, gas)
        if outcome.status != SUCCESS:
            self.storage = snapshot
        return outcome

    # -- interpreter ---------------------------------------------------------

    def _execute(self, code: bytes, calldata: bytes, caller: int,
                 gas: int | None) -> CallOutcome:
        gas_left = self.env.gas_limit if gas is None else gas
        stack: list[int] = []
        memory = bytearray()
        logs: list[LogEntry] = []
        returndata = b""
        pc = 0
        n = len(code)
        valid_jumps = _jumpdests(code)
        env = self.env
        storage = self.storage

        def fail(kind: str) -> CallOutcome:
            return CallOutcome(FAILURE, failure_kind=kind)

        def expand(offset: int, size: int) -> int | None:
            """Charge memory expansion; returns cost or None on absurd sizes."""
            if size == 0:
                return 0
            end = offset + size
            if end > (1 << 32):  # beyond any plausible gas budget
                return None
            old_words = _mem_words(len(memory))
            new_words = _mem_words(end)
            if new_words <= old_words:
                return 0
            cost = _mem_cost(new_words) - _mem_cost(old_words)
            memory.extend(b"\x00" * (new_words * 32 - len(memory)))
            return cost

        while True:
            if pc >= n:
                return CallOutcome(SUCCESS, return_data=b"")  # implicit STOP
            op = code[pc]
            pc += 1

            # PUSH1..PUSH32
            if 0x60 <= op <= 0x7F:
                width = op - 0x5F
                gas_left -= 3
                if gas_left < 0:
                    return fail(OUT_OF_GAS)
                if len(stack) >= 1024:
                    return fail(STACK_OVERFLOW)
                stack.append(int.from_bytes(code[pc:pc + width], "big"))
                pc += width
                continue
            # DUP1..DUP16
            if 0x80 <= op <= 0x8F:
                depth = op - 0x7F
                gas_left -= 3
                if gas_left < 0:
                    return fail(OUT_OF_GAS)
                if len(stack) < depth:
                    return fail(STACK_UNDERFLOW)
                if len(stack) >= 1024:
                    return fail(STACK_OVERFLOW)
                stack.append(stack[-depth])
                continue
            # SWAP1..SWAP16
            if 0x90 <= op <= 0x9F:
                depth = op - 0x8F
                gas_left -= 3
                if gas_left < 0:
                    return fail(OUT_OF_GAS)
                if len(stack) < depth + 1:
                    return fail(STACK_UNDERFLOW)
                stack[-1], stack[-depth - 1] = stack[-depth - 1], stack[-1]
                continue

            if op in _UNSUPPORTED:
                raise EvmError(f"unsupported opcode {_UNSUPPORTED[op]}")

            base = _GAS.get(op)
            if base is None and not (0xA0 <= op <= 0xA4) and op != 0x55:
                return fail(INVALID_OPCODE)  # undefined in istanbul
            if base is not None:
                gas_left -= base
                if gas_left < 0:
                    return fail(OUT_OF_GAS)

            try:
                if op == 0x00:  # STOP
                    return CallOutcome(SUCCESS, return_data=b"", logs=logs)
                elif op == 0x01:
                    a, b = stack.pop(), stack.pop()
                    stack.append((a + b) & U256)
                elif op == 0x02:
                    a, b = stack.pop(), stack.pop()
                    stack.append((a * b) & U256)
                elif op == 0x03:
                    a, b = stack.pop(), stack.pop()
                    stack.append((a - b) & U256)
                elif op == 0x04:
                    a, b = stack.pop(), stack.pop()
                    stack.append(a // b if b else 0)
                elif op == 0x05:  # SDIV
                    a, b = _to_signed(stack.pop()), _to_signed(stack.pop())
                    if b == 0:
                        stack.append(0)
                    else:
                        q = abs(a) // abs(b)
                        stack.append((-q if (a < 0) != (b < 0) else q) & U256)
                elif op == 0x06:
                    a, b = stack.pop(), stack.pop()
                    stack.append(a % b if b else 0)
                elif op == 0x07:  # SMOD
                    a, b = _to_signed(stack.pop()), _to_signed(stack.pop())
                    if b == 0:
                        stack.append(0)
                    else:
                        r = abs(a) % abs(b)
                        stack.append((-r if a < 0 else r) & U256)
                elif op == 0x08:  # ADDMOD
                    a, b, m = stack.pop(), stack.pop(), stack.pop()
                    stack.append((a + b) % m if m else 0)
                elif op == 0x09:  # MULMOD
                    a, b, m = stack.pop(), stack.pop(), stack.pop()
                    stack.append((a * b) % m if m else 0)
                elif op == 0x0A:  # EXP
                    a, b = stack.pop(), stack.pop()
                    gas_left -= 50 * ((b.bit_length() + 7) // 8)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    stack.append(pow(a, b, 1 << 256))
                elif op == 0x0B:  # SIGNEXTEND
                    k, x = stack.pop(), stack.pop()
                    if k >= 31:
                        stack.append(x)
                    else:
                        bit = 8 * k + 7
                        mask = (1 << (bit + 1)) - 1
                        if x & (1 << bit):
                            stack.append((x | ~mask) & U256)
                        else:
                            stack.append(x & mask)
                elif op == 0x10:
                    a, b = stack.pop(), stack.pop()
                    stack.append(1 if a < b else 0)
                elif op == 0x11:
                    a, b = stack.pop(), stack.pop()
                    stack.append(1 if a > b else 0)
                elif op == 0x12:
                    a, b = stack.pop(), stack.pop()
                    stack.append(1 if _to_signed(a) < _to_signed(b) else 0)
                elif op == 0x13:
                    a, b = stack.pop(), stack.pop()
                    stack.append(1 if _to_signed(a) > _to_signed(b) else 0)
                elif op == 0x14:
                    a, b = stack.pop(), stack.pop()
                    stack.append(1 if a == b else 0)
                elif op == 0x15:
                    stack.append(1 if stack.pop() == 0 else 0)
                elif op == 0x16:
                    a, b = stack.pop(), stack.pop()
                    stack.append(a & b)
                elif op == 0x17:
                    a, b = stack.pop(), stack.pop()
                    stack.append(a | b)
                elif op == 0x18:
                    a, b = stack.pop(), stack.pop()
                    stack.append(a ^ b)
                elif op == 0x19:
                    stack.append(stack.pop() ^ U256)
                elif op == 0x1A:  # BYTE
                    i, x = stack.pop(), stack.pop()
                    stack.append((x >> (8 * (31 - i))) & 0xFF if i < 32 else 0)
                elif op == 0x1B:  # SHL
                    shift, v = stack.pop(), stack.pop()
                    stack.append((v << shift) & U256 if shift < 256 else 0)
                elif op == 0x1C:  # SHR
                    shift, v = stack.pop(), stack.pop()
                    stack.append(v >> shift if shift < 256 else 0)
                elif op == 0x1D:  # SAR
                    shift, v = stack.pop(), stack.pop()
                    sv = _to_signed(v)
                    if shift >= 256:
                        stack.append(0 if sv >= 0 else U256)
                    else:
                        stack.append((sv >> shift) & U256)
                elif op == 0x20:  # KECCAK256
                    offset, size = stack.pop(), stack.pop()
                    cost = expand(offset, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 6 * _mem_words(size)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    stack.append(int.from_bytes(
                        keccak256(bytes(memory[offset:offset + size])), "big"))
                elif op == 0x30:
                    stack.append(self.address)
                elif op == 0x31:  # BALANCE
                    stack.append(self.balances.get(stack.pop(), 0))
                elif op == 0x32:  # ORIGIN
                    stack.append(caller)
                elif op == 0x33:  # CALLER
                    stack.append(caller)
                elif op == 0x34:  # CALLVALUE (the harness always sends 0)
                    stack.append(0)
                elif op == 0x35:  # CALLDATALOAD
                    i = stack.pop()
                    stack.append(int.from_bytes(
                        calldata[i:i + 32].ljust(32, b"\x00"), "big") if i < len(calldata) else 0)
                elif op == 0x36:
                    stack.append(len(calldata))
                elif op == 0x37:  # CALLDATACOPY
                    dest, src, size = stack.pop(), stack.pop(), stack.pop()
                    cost = expand(dest, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 3 * _mem_words(size)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    chunk = calldata[src:src + size] if src < len(calldata) else b""
                    memory[dest:dest + size] = chunk.ljust(size, b"\x00")
                elif op == 0x38:
                    stack.append(len(code))
                elif op == 0x39:  # CODECOPY
                    dest, src, size = stack.pop(), stack.pop(), stack.pop()
                    cost = expand(dest, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 3 * _mem_words(size)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    chunk = code[src:src + size] if src < len(code) else b""
                    memory[dest:dest + size] = chunk.ljust(size, b"\x00")
                elif op == 0x3A:  # GASPRICE
                    stack.append(env.gas_price)
                elif op == 0x3B:  # EXTCODESIZE
                    addr = stack.pop()
                    stack.append(len(self.code) if addr == self.address else 0)
                elif op == 0x3C:  # EXTCODECOPY
                    addr, dest, src, size = (stack.pop(), stack.pop(),
                                             stack.pop(), stack.pop())
                    cost = expand(dest, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 3 * _mem_words(size)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    ext = self.code if addr == self.address else b""
                    chunk = ext[src:src + size] if src < len(ext) else b""
                    memory[dest:dest + size] = chunk.ljust(size, b"\x00")
                elif op == 0x3D:
                    stack.append(len(returndata))
                elif op == 0x3E:  # RETURNDATACOPY
                    dest, src, size = stack.pop(), stack.pop(), stack.pop()
                    if src + size > len(returndata):
                        return fail(INVALID_OPCODE)
                    cost = expand(dest, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 3 * _mem_words(size)
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    memory[dest:dest + size] = returndata[src:src + size]
                elif op == 0x3F:  # EXTCODEHASH
                    addr = stack.pop()
                    if addr == self.address and self.code:
                        stack.append(int.from_bytes(keccak256(self.code), "big"))
                    else:
                        stack.append(0)
                elif op == 0x40:  # BLOCKHASH
                    stack.pop()
                    stack.append(0)
                elif op == 0x41:
                    stack.append(env.coinbase)
                elif op == 0x42:
                    stack.append(env.timestamp)
                elif op == 0x43:
                    stack.append(env.number)
                elif op == 0x44:  # DIFFICULTY
                    stack.append(0)
                elif op == 0x45:
                    stack.append(env.gas_limit)
                elif op == 0x46:
                    stack.append(env.chain_id)
                elif op == 0x47:  # SELFBALANCE
                    stack.append(self.balances.get(self.address, 0))
                elif op == 0x50:
                    stack.pop()
                elif op == 0x51:  # MLOAD
                    offset = stack.pop()
                    cost = expand(offset, 32)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    stack.append(int.from_bytes(memory[offset:offset + 32], "big"))
                elif op == 0x52:  # MSTORE
                    offset, value = stack.pop(), stack.pop()
                    cost = expand(offset, 32)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    memory[offset:offset + 32] = value.to_bytes(32, "big")
                elif op == 0x53:  # MSTORE8
                    offset, value = stack.pop(), stack.pop()
                    cost = expand(offset, 1)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    memory[offset] = value & 0xFF
                elif op == 0x54:  # SLOAD
                    stack.append(storage.get(stack.pop(), 0))
                elif op == 0x55:  # SSTORE (simplified flat costs, no refunds)
                    key, value = stack.pop(), stack.pop()
                    gas_left -= 20000 if (value != 0 and storage.get(key, 0) == 0) else 5000
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    if value == 0:
                        storage.pop(key, None)
                    else:
                        storage[key] = value
                elif op == 0x56:  # JUMP
                    dest = stack.pop()
                    if dest not in valid_jumps:
                        return fail(INVALID_JUMP)
                    pc = dest
                elif op == 0x57:  # JUMPI
                    dest, condition = stack.pop(), stack.pop()
                    if condition:
                        if dest not in valid_jumps:
                            return fail(INVALID_JUMP)
                        pc = dest
                elif op == 0x58:
                    stack.append(pc - 1)
                elif op == 0x59:
                    stack.append(len(memory))
                elif op == 0x5A:  # GAS
                    stack.append(max(gas_left, 0))
                elif op == 0x5B:  # JUMPDEST
                    pass
                elif 0xA0 <= op <= 0xA4:  # LOG0..LOG4
                    topic_count = op - 0xA0
                    offset, size = stack.pop(), stack.pop()
                    topics = [stack.pop() for _ in range(topic_count)]
                    cost = expand(offset, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost + 375 + 375 * topic_count + 8 * size
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    logs.append(LogEntry(topics, bytes(memory[offset:offset + size])))
                elif op == 0xF3:  # RETURN
                    offset, size = stack.pop(), stack.pop()
                    cost = expand(offset, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    return CallOutcome(SUCCESS,
                                       return_data=bytes(memory[offset:offset + size]),
                                       logs=logs)
                elif op == 0xFD:  # REVERT
                    offset, size = stack.pop(), stack.pop()
                    cost = expand(offset, size)
                    if cost is None:
                        return fail(OUT_OF_GAS)
                    gas_left -= cost
                    if gas_left < 0:
                        return fail(OUT_OF_GAS)
                    return CallOutcome(REVERT,
                                       return_data=bytes(memory[offset:offset + size]))
                elif op == 0xFE:  # INVALID
                    return fail(INVALID_OPCODE)
                else:
                    return fail(INVALID_OPCODE)
            except IndexError:
                return fail(STACK_UNDERFLOW)
            if len(stack) > 1024:
                return fail(STACK_OVERFLOW)


def _jumpdests(code: bytes) -> set[int]:
    dests: set[int] = set()
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        if op == 0x5B:
            dests.add(i)
            i += 1
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5F + 1
        else:
            i += 1
    return dests
