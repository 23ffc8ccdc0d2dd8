"""Online near-duplicate tagging: quantized profile -> Nilsimsa code -> register."""
from .nilsimsa import NilsimsaDigest, hamming_similarity, nilsimsa_digest
from .profile import TextProfile, build_profile
from .register import (DedupVerdict, MemoryRegister, RegisterUnavailable, SqliteRegister,
                       check_and_record)


def dedup_code(profile: TextProfile) -> str:
    return nilsimsa_digest(profile.canonical_string.encode("utf-8")).hex()


def open_register(path=None):
    """A persistent register at ``path``, or an in-memory one when ``path`` is None."""
    return MemoryRegister() if path is None else SqliteRegister(path)


__all__ = [
    "DedupVerdict", "MemoryRegister", "NilsimsaDigest", "RegisterUnavailable", "SqliteRegister",
    "TextProfile", "build_profile", "check_and_record", "dedup_code", "hamming_similarity",
    "nilsimsa_digest", "open_register",
]
