"""Keccak-256 (the pre-NIST padding variant used by the EVM).

Pure-Python implementation of the 1600-bit permutation with the rate/padding
parameters of Ethereum's keccak256. Results are memoized because the same
inputs recur constantly during a campaign (storage slot derivation, repeated
calls across optimizer configurations of the same contract).
"""

from __future__ import annotations

from functools import lru_cache

_M64 = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rotation offsets and lane permutation for the rho+pi steps, in walk order
_ROTATIONS = (1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14,
              27, 41, 56, 8, 25, 43, 62, 18, 39, 61, 20, 44)
_PI_LANES = (10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4,
             15, 23, 19, 13, 12, 2, 20, 14, 22, 9, 6, 1)

_RATE = 136  # bytes; 1088-bit rate for the 256-bit variant


def _permute(state: list[int]) -> None:
    for rc in _ROUND_CONSTANTS:
        # theta
        parity = [state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20]
                  for x in range(5)]
        for x in range(5):
            t = parity[(x + 4) % 5] ^ (
                ((parity[(x + 1) % 5] << 1) | (parity[(x + 1) % 5] >> 63)) & _M64)
            for y in range(0, 25, 5):
                state[x + y] ^= t
        # rho + pi
        t = state[1]
        for i in range(24):
            j = _PI_LANES[i]
            t, state[j] = state[j], ((t << _ROTATIONS[i]) | (t >> (64 - _ROTATIONS[i]))) & _M64
        # chi
        for y in range(0, 25, 5):
            row = state[y:y + 5]
            for x in range(5):
                state[y + x] = row[x] ^ ((row[(x + 1) % 5] ^ _M64) & row[(x + 2) % 5])
        # iota
        state[0] ^= rc


@lru_cache(maxsize=1 << 16)
def keccak256(data: bytes) -> bytes:
    """Keccak-256 digest of ``data`` (EVM semantics, not NIST SHA3-256)."""
    state = [0] * 25
    padded = bytearray(data)
    pad_len = _RATE - (len(padded) % _RATE)
    padded += b"\x00" * pad_len
    padded[len(data)] ^= 0x01
    padded[-1] ^= 0x80
    for block in range(0, len(padded), _RATE):
        for lane in range(17):
            off = block + lane * 8
            state[lane] ^= int.from_bytes(padded[off:off + 8], "little")
        _permute(state)
    return b"".join(state[i].to_bytes(8, "little") for i in range(4))


def selector(signature: str) -> bytes:
    """4-byte function selector for a canonical ABI signature string."""
    return keccak256(signature.encode("ascii"))[:4]
