"""TF-IDF unigram features with a vocabulary frozen at training time."""
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

import numpy as np

from ..textutil import tokenize

STOPWORDS_IT = frozenset("""
a ad al alla alle allo agli ai anche avere aveva c che chi ci come con contro cui da dal
dalla dalle dallo dagli dai degli dei del della delle dello di dove e ed era essere fa gli
ha hanno i il in io la le lei lo loro lui ma mi ne nei nel nella nelle nello negli noi non
nostro o per perché più poi quale quando quello questa questi questo se sono sta su sua sue
sui sul sulla sulle suo tra tu tutti tutto un una uno vi voi è
""".split())

STOPWORDS_EN = frozenset("""
a about after all also an and any are as at be been but by can could did do does for from
had has have he her his how i if in into is it its may more most no not of on or other our
out over said she so some than that the their them then there these they this to up was we
were what when which who will with would you
""".split())

DEFAULT_STOPWORDS = STOPWORDS_IT | STOPWORDS_EN


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: strictly increasing ``indices`` with matching ``values``."""
    indices: np.ndarray
    values: np.ndarray

    def as_dict(self) -> Dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def dot(self, dense: np.ndarray) -> float:
        return float(np.dot(self.values, dense[self.indices])) if self.indices.size else 0.0

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))


@dataclass(frozen=True)
class Vocabulary:
    terms: Dict[str, int]
    idf: np.ndarray
    stopwords: frozenset = DEFAULT_STOPWORDS

    def __len__(self):
        return len(self.terms)

    @classmethod
    def fit(cls, texts: Iterable[str], stopwords=DEFAULT_STOPWORDS, min_df: int = 1):
        df = Counter()
        n_docs = 0
        for text in texts:
            n_docs += 1
            df.update({t for t in tokenize(text) if t not in stopwords})
        kept = sorted(t for t, c in df.items() if c >= min_df)
        terms = {t: i for i, t in enumerate(kept)}
        idf = np.array([math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in kept])
        return cls(terms, idf, frozenset(stopwords))


def featurize(text: str, vocab: Vocabulary) -> FeatureVector:
    return featurize_counts(Counter(tokenize(text)), vocab)


def featurize_counts(counts: Dict[str, int], vocab: Vocabulary) -> FeatureVector:
    """Same as ``featurize`` from precomputed token counts (shareable across models)."""
    terms = vocab.terms
    inverse = {terms[t]: c for t, c in counts.items() if t in terms}
    if not inverse:
        return FeatureVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    idx = np.array(sorted(inverse), dtype=np.int64)
    vals = np.array([inverse[i] for i in idx], dtype=np.float64) * vocab.idf[idx]
    return FeatureVector(idx, vals / np.sqrt(np.dot(vals, vals)))


@dataclass(frozen=True)
class CSRMatrix:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_features: int

    @property
    def n_rows(self):
        return self.indptr.shape[0] - 1

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector], n_features: int):
        lengths = [v.indices.size for v in vectors]
        indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if vectors:
            indices = np.concatenate([v.indices for v in vectors]).astype(np.int64)
            data = np.concatenate([v.values for v in vectors]).astype(np.float64)
        else:
            indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
        return cls(indptr, indices, data, n_features)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        rows = [FeatureVector(np.flatnonzero(r).astype(np.int64), r[np.flatnonzero(r)])
                for r in dense]
        return cls.from_vectors(rows, dense.shape[1])

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_features))
        for i in range(self.n_rows):
            sl = slice(self.indptr[i], self.indptr[i + 1])
            out[i, self.indices[sl]] = self.data[sl]
        return out
