"""Quantized term profiles.

Tokens whose frequency falls below the quantization step vanish and the
rest are rounded down to a multiple of it, so small edits to a document
usually leave its profile untouched.
"""
from collections import Counter
from dataclasses import dataclass
from typing import Tuple

from ..textutil import tokenize


@dataclass(frozen=True)
class TextProfile:
    entries: Tuple[Tuple[str, int], ...]

    @property
    def canonical_string(self) -> str:
        return " ".join(f"{tok}:{q}" for tok, q in self.entries)

    def __len__(self):
        return len(self.entries)


def build_profile(body: str, quant_rate: float = 0.01, min_quant: int = 2) -> TextProfile:
    if not 0 < quant_rate <= 1:
        raise ValueError(f"quant_rate must be in (0, 1], got {quant_rate}")
    if min_quant < 2:
        raise ValueError(f"min_quant must be >= 2, got {min_quant}")
    counts = Counter(tokenize(body))
    if not counts:
        return TextProfile(())
    quant = max(min_quant, int(max(counts.values()) * quant_rate))
    entries = []
    for tok, freq in counts.items():
        q = (freq // quant) * quant
        if q > 0:
            entries.append((tok, q))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return TextProfile(tuple(entries))
