"""Training-set bootstrapping: seed expansion, boolean retrieval, pool sampling.

Picking the final query terms from the expansion candidates stays a manual
step; these helpers produce the candidates and run the resulting query.
"""
import logging
import random
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from ..textutil import tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingTable:
    words: Tuple[str, ...]
    vectors: np.ndarray  # shape (len(words), dim)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    @classmethod
    def from_dict(cls, table: Mapping[str, Sequence[float]]):
        words = tuple(w.lower() for w in table)
        vecs = np.array([list(v) for v in table.values()], dtype=np.float64)
        if len(words) and vecs.ndim != 2:
            raise ValueError("embedding vectors must share one dimension")
        return cls(words, vecs.reshape(len(words), -1))


def load_word2vec_text(path) -> EmbeddingTable:
    """Read the word2vec text format: a "count dim" header, then "word v1 .. vd"."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: first line must be '<count> <dimension>'")
        count, dim = int(header[0]), int(header[1])
        words, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} components")
            words.append(parts[0].lower())
            rows.append([float(x) for x in parts[1:]])
    if len(words) != count:
        log.warning("%s: header announces %d vectors, found %d", path, count, len(words))
    return EmbeddingTable(tuple(words), np.array(rows, dtype=np.float64).reshape(len(words), dim))


@dataclass(frozen=True)
class Expansion:
    neighbours: Dict[str, List[Tuple[str, float]]]
    missing: Tuple[str, ...]


def expand_seeds(seeds: Iterable[str], table: EmbeddingTable, top_k: int = 10) -> Expansion:
    if len(table) == 0:
        raise ValueError("empty embedding table")
    norms = np.linalg.norm(table.vectors, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = table.vectors / safe[:, None]
    index = {w: i for i, w in enumerate(table.words)}
    out, missing = {}, []
    for seed in seeds:
        key = seed.lower()
        if key not in index:
            missing.append(seed)
            continue
        i = index[key]
        sims = unit @ unit[i]
        # 12-decimal rounding makes float noise count as a tie
        ranked = sorted((j for j in range(len(table)) if j != i),
                        key=lambda j: (-round(float(sims[j]), 12), table.words[j]))
        out[seed] = [(table.words[j], float(sims[j])) for j in ranked[:top_k]]
    if missing:
        log.warning("seeds missing from the embedding table: %s", ", ".join(missing))
    return Expansion(out, tuple(missing))


@dataclass(frozen=True)
class BooleanQuery:
    """OR of AND-groups over lowercase terms."""
    groups: Tuple[Tuple[str, ...], ...]

    def __post_init__(self):
        if not self.groups or any(not g for g in self.groups):
            raise ValueError("a boolean query needs at least one non-empty group")

    @classmethod
    def parse(cls, text: str) -> "BooleanQuery":
        """One group per line (or per ``OR``); terms inside a group are ANDed."""
        groups = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            for part in re.split(r"\bOR\b", line):
                terms = [t for t in part.replace("(", " ").replace(")", " ").split()
                         if t != "AND"]
                if terms:
                    groups.append(tuple(t.lower() for t in terms))
        return cls(tuple(groups))

    def matches(self, tokens: set) -> bool:
        return any(all(t in tokens for t in g) for g in self.groups)


def boolean_retrieve(query: BooleanQuery, corpus: Mapping[str, str]) -> set:
    """Doc ids matching the query, via a postings index over the corpus."""
    postings: Dict[str, set] = {}
    for doc_id, text in corpus.items():
        for tok in set(tokenize(text)):
            postings.setdefault(tok, set()).add(doc_id)
    result = set()
    for group in query.groups:
        sets = sorted((postings.get(t, set()) for t in group), key=len)
        hit = set(sets[0])
        for s in sets[1:]:
            hit &= s
        result |= hit
    return result


def sample_training_pool(matches: Iterable[str], n: int, seed: int) -> List[str]:
    """Seeded uniform sample without replacement, returned sorted by doc id."""
    pool = sorted(matches)
    if n >= len(pool):
        return pool
    rng = random.Random(seed)
    for i in reversed(range(1, len(pool))):
        j = rng.randrange(i + 1)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:n])
