"""Nilsimsa locality-sensitive digest (256 bits)."""
from dataclasses import dataclass

import numpy as np

from ..kernels import nilsimsa_accumulate

_BIT_WEIGHTS = (1 << np.arange(8)).astype(np.uint8)


@dataclass(frozen=True)
class NilsimsaDigest:
    digest: bytes  # 32 bytes, most significant accumulator byte first

    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text: str) -> "NilsimsaDigest":
        raw = bytes.fromhex(text)
        if len(raw) != 32:
            raise ValueError("a Nilsimsa digest is exactly 32 bytes")
        return cls(raw)

    def popcount(self) -> int:
        return int.from_bytes(self.digest, "big").bit_count()

    def __str__(self):
        return self.hex()


def digest_from_accumulators(acc: np.ndarray, total: int) -> NilsimsaDigest:
    """Threshold accumulators at their mean and pack the bits.

    Bit i lives in byte i >> 3 at position i & 7; the byte order is then
    reversed, which is the established hex rendering of the digest.
    """
    bits = (acc * 256 > total).astype(np.uint8).reshape(32, 8)
    code = (bits * _BIT_WEIGHTS).sum(axis=1).astype(np.uint8)
    return NilsimsaDigest(code[::-1].tobytes())


def nilsimsa_digest(data) -> NilsimsaDigest:
    if isinstance(data, str):
        data = data.encode("utf-8")
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    acc = nilsimsa_accumulate(buf)
    return digest_from_accumulators(acc, int(acc.sum()))


def hamming_similarity(a: NilsimsaDigest, b: NilsimsaDigest) -> int:
    """Agreeing bit positions minus 128, so identical digests score 128."""
    diff = int.from_bytes(a.digest, "big") ^ int.from_bytes(b.digest, "big")
    return 128 - diff.bit_count()
