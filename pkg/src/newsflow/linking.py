"""Company mention linking against a gazetteer.

Mentions are spotted by greedy leftmost-longest matching of token n-grams
against normalized aliases, each mention is resolved to the candidate with
the highest confidence, and annotations below the threshold are dropped.

Confidence is a convex combination of three features:

* commonness ``P(entity | alias)`` taken from the gazetteer,
* cosine similarity between the entity's context terms and the document,
* a heuristic company-NER score (capitalisation, legal suffix, cue words).
"""
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .textutil import token_spans

DEFAULT_LEGAL_SUFFIXES = ("S.p.A.", "SpA", "S.r.l.", "Srl", "Inc.", "Ltd.")
DEFAULT_CUE_WORDS = ("azienda", "company", "società", "gruppo")
DEFAULT_LAMBDA = (0.5, 0.3, 0.2)
MAX_NGRAM = 6

# lowercase connectors allowed inside a capitalised company name
_CONNECTORS = frozenset({"di", "del", "della", "dei", "degli", "delle", "e", "de", "da",
                         "of", "and", "the", "la", "il", "lo", "le", "d"})
# characters that may separate two tokens of one name
_JOINABLE_GAP = set(" \t.&'-")


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class GazetteerEntry:
    entity_id: str
    canonical_name: str
    aliases: Tuple[str, ...] = ()
    alias_commonness: Dict[str, float] = field(default_factory=dict)
    context_terms: Dict[str, float] = field(default_factory=dict)
    entity_type: str = "company"

    @classmethod
    def from_record(cls, rec):
        try:
            etype = rec.get("entity_type", "company")
            if etype not in ("company", "generic"):
                raise ValueError(f"entity_type must be company or generic, got {etype!r}")
            return cls(
                entity_id=str(rec["entity_id"]),
                canonical_name=str(rec["canonical_name"]),
                aliases=tuple(str(a) for a in rec.get("aliases", ())),
                alias_commonness={str(k): float(v)
                                  for k, v in rec.get("alias_commonness", {}).items()},
                context_terms={str(k).lower(): float(v)
                               for k, v in rec.get("context_terms", {}).items()},
                entity_type=etype,
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise GazetteerError(str(exc)) from exc

    def to_record(self):
        return {
            "entity_id": self.entity_id,
            "canonical_name": self.canonical_name,
            "aliases": list(self.aliases),
            "alias_commonness": dict(self.alias_commonness),
            "context_terms": dict(self.context_terms),
            "entity_type": self.entity_type,
        }


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    surface: str
    matched_alias: str


@dataclass(frozen=True)
class CandidateAnnotation:
    mention: Mention
    entity_id: str
    commonness: float
    context_sim: float
    ner_score: float
    confidence: float


@dataclass(frozen=True)
class Annotation:
    mention: Mention
    entity_id: str
    confidence: float

    def to_record(self):
        return {"start": self.mention.start, "end": self.mention.end,
                "surface": self.mention.surface, "entity_id": self.entity_id,
                "confidence": self.confidence}


def _suffix_patterns(suffixes):
    pats = []
    for s in suffixes:
        toks = tuple(t.lower() for _, _, t in token_spans(s))
        if toks:
            pats.append((toks, s.rstrip().endswith(".")))
    # longest first so "s p a" is tried before shorter patterns
    return sorted(pats, key=lambda p: -len(p[0]))


def _strip_suffix(tokens, patterns):
    for pat, _ in patterns:
        n = len(pat)
        if len(tokens) > n and tuple(tokens[-n:]) == pat:
            return tuple(tokens[:-n]), pat
    return tuple(tokens), None


class Gazetteer:
    """Alias dictionary keyed by normalized token tuples. Immutable after build."""

    def __init__(self, entries: Sequence[GazetteerEntry],
                 legal_suffixes: Sequence[str] = DEFAULT_LEGAL_SUFFIXES,
                 cue_words: Sequence[str] = DEFAULT_CUE_WORDS,
                 idf: Optional[Dict[str, float]] = None,
                 max_ngram: int = MAX_NGRAM):
        self.entries = {}
        self.legal_suffixes = tuple(legal_suffixes)
        self.suffix_patterns = _suffix_patterns(self.legal_suffixes)
        self.cue_words = frozenset(w.lower() for w in cue_words)
        self.idf = dict(idf or {})
        self.max_ngram = max_ngram
        self._context_norm = {}
        explicit: Dict[tuple, Dict[str, Optional[float]]] = {}
        for e in entries:
            if e.entity_id in self.entries:
                raise GazetteerError(f"duplicate entity_id {e.entity_id!r}")
            self.entries[e.entity_id] = e
            for alias in (e.canonical_name, *e.aliases, *e.alias_commonness):
                key = self.normalize(alias)
                if not key:
                    continue
                value = e.alias_commonness.get(alias)
                if value is not None and not 0 < value <= 1:
                    raise GazetteerError(f"commonness for alias {alias!r} must be in (0, 1]")
                slot = explicit.setdefault(key, {})
                prev = slot.get(e.entity_id)
                if value is not None and (prev is None or value > prev):
                    slot[e.entity_id] = value
                else:
                    slot.setdefault(e.entity_id, None)
            self._context_norm[e.entity_id] = math.sqrt(
                sum(w * w for w in e.context_terms.values()))
        self.aliases: Dict[tuple, List[Tuple[str, float]]] = {}
        for key, slot in explicit.items():
            given = sum(v for v in slot.values() if v is not None)
            missing = [k for k, v in slot.items() if v is None]
            if given > 1 + 1e-9:
                raise GazetteerError(
                    f"commonness for alias {' '.join(key)!r} sums to {given:.3g} > 1")
            if missing:
                share = (1.0 - given) / len(missing)
                if share <= 1e-12:
                    raise GazetteerError(
                        f"no commonness mass left for alias {' '.join(key)!r}")
                for k in missing:
                    slot[k] = share
            self.aliases[key] = sorted(slot.items())
        # a key always starts with the token the spotter is positioned on
        self.first_tokens = frozenset(k[0] for k in self.aliases)

    def normalize(self, text: str) -> tuple:
        toks = [t.lower() for _, _, t in token_spans(text)]
        return _strip_suffix(toks, self.suffix_patterns)[0]

    def candidates(self, key) -> List[Tuple[GazetteerEntry, float]]:
        if isinstance(key, str):
            key = self.normalize(key)
        return [(self.entries[eid], c) for eid, c in self.aliases.get(tuple(key), ())]

    def context_norm(self, entity_id):
        return self._context_norm[entity_id]

    def __len__(self):
        return len(self.entries)


def load_gazetteer(path, **kwargs) -> Gazetteer:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entries.append(GazetteerEntry.from_record(json.loads(line)))
            except (json.JSONDecodeError, GazetteerError) as exc:
                raise GazetteerError(f"{path}:{lineno}: {exc}") from exc
    try:
        return Gazetteer(entries, **kwargs)
    except GazetteerError as exc:
        raise GazetteerError(f"{path}: {exc}") from exc


def write_gazetteer(entries, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def _gap_joinable(text, a, b):
    return all(ch in _JOINABLE_GAP for ch in text[a:b])


def spot_mentions(text: str, gazetteer: Gazetteer, tokens=None) -> List[Mention]:
    tokens = token_spans(text) if tokens is None else tokens
    lowered = [t.lower() for _, _, t in tokens]
    mentions = []
    i, n_tok = 0, len(tokens)
    first = gazetteer.first_tokens
    while i < n_tok:
        if lowered[i] not in first:
            i += 1
            continue
        found = None
        limit = min(gazetteer.max_ngram, n_tok - i)
        # longest joinable window starting at i
        span = 1
        while span < limit and _gap_joinable(text, tokens[i + span - 1][1], tokens[i + span][0]):
            span += 1
        for n in range(span, 0, -1):
            key, stripped = _strip_suffix(lowered[i:i + n], gazetteer.suffix_patterns)
            if key and key in gazetteer.aliases:
                found = (n, key, stripped)
                break
        if found is None:
            i += 1
            continue
        n, key, stripped = found
        start, end = tokens[i][0], tokens[i + n - 1][1]
        if stripped is not None and end < len(text) and text[end] == ".":
            dotted = any(pat == stripped and dot for pat, dot in gazetteer.suffix_patterns)
            if dotted:
                end += 1
        mentions.append(Mention(start, end, text[start:end], " ".join(key)))
        i += n
    return mentions


def _token_range(tokens, mention):
    first = next((k for k, t in enumerate(tokens) if t[1] > mention.start), len(tokens))
    last = first
    while last < len(tokens) and tokens[last][0] < mention.end:
        last += 1
    return first, last


def ner_company_score(text: str, mention: Mention, gazetteer: Gazetteer, tokens=None) -> float:
    """Heuristic company-NER feature in [0, 1].

    +0.4 when the mention's name words are capitalised (connectors such as
    "di" and the legal suffix itself excepted), +0.4 when a legal suffix starts inside the mention or within
    the two tokens after it, +0.2 when a cue word lies within five tokens.
    """
    tokens = token_spans(text) if tokens is None else tokens
    i, j = _token_range(tokens, mention)
    inside = [t for _, _, t in tokens[i:j]]
    name_len = len(_strip_suffix([t.lower() for t in inside], gazetteer.suffix_patterns)[0])
    tenths = 0
    words = [t for t in inside[:name_len] if t.lower() not in _CONNECTORS]
    if words and all(t[0].isupper() or t[0].isdigit() for t in words) and any(
            t[0].isupper() for t in words):
        tenths += 4
    lowered = [t.lower() for _, _, t in tokens]
    for k in range(i, min(j + 2, len(tokens))):
        if any(tuple(lowered[k:k + len(pat)]) == pat for pat, _ in gazetteer.suffix_patterns):
            tenths += 4
            break
    window = lowered[max(0, i - 5):i] + lowered[j:j + 5]
    if any(w in gazetteer.cue_words for w in window):
        tenths += 2
    return min(tenths, 10) / 10


def doc_term_vector(text: str, idf: Optional[Dict[str, float]] = None, tokens=None):
    toks = token_spans(text) if tokens is None else tokens
    counts = Counter(t.lower() for _, _, t in toks)
    if idf:
        return {t: c * idf.get(t, 1.0) for t, c in counts.items()}
    return {t: float(c) for t, c in counts.items()}


def _vector_norm(vec):
    return math.sqrt(sum(w * w for w in vec.values()))


def context_similarity(entry: GazetteerEntry, doc_vector, doc_norm=None, entry_norm=None):
    if doc_norm is None:
        doc_norm = _vector_norm(doc_vector)
    if entry_norm is None:
        entry_norm = _vector_norm(entry.context_terms)
    if doc_norm == 0 or entry_norm == 0:
        return 0.0
    dot = sum(w * doc_vector.get(t, 0.0) for t, w in entry.context_terms.items())
    return min(1.0, max(0.0, dot / (doc_norm * entry_norm)))


def check_lambda(lam):
    lam = tuple(float(x) for x in lam)
    if len(lam) != 3 or any(x < 0 for x in lam) or abs(sum(lam) - 1.0) > 1e-9:
        raise ValueError(f"lambda must be three non-negative weights summing to 1, got {lam}")
    return lam


def confidence_of(commonness, context_sim, ner_score, lam=DEFAULT_LAMBDA):
    l1, l2, l3 = lam
    return min(1.0, max(0.0, l1 * commonness + l2 * context_sim + l3 * ner_score))


def best_candidate(cands: Sequence[CandidateAnnotation]) -> CandidateAnnotation:
    """Highest confidence; ties go to higher commonness, then smaller entity_id."""
    return min(cands, key=lambda c: (-c.confidence, -c.commonness, c.entity_id))


def disambiguate(mention: Mention, candidates, doc_vector, ner_score: float,
                 lam=DEFAULT_LAMBDA, doc_norm=None, gazetteer: Optional[Gazetteer] = None):
    if not candidates:
        raise ValueError("disambiguate needs at least one candidate")
    lam = check_lambda(lam)
    if doc_norm is None:
        doc_norm = _vector_norm(doc_vector)
    scored = []
    for entry, commonness in candidates:
        enorm = gazetteer.context_norm(entry.entity_id) if gazetteer is not None else None
        sim = context_similarity(entry, doc_vector, doc_norm, enorm)
        scored.append(CandidateAnnotation(mention, entry.entity_id, commonness, sim, ner_score,
                                          confidence_of(commonness, sim, ner_score, lam)))
    return best_candidate(scored)


def annotate(text: str, gazetteer: Gazetteer, threshold: float = 0.0, lam=DEFAULT_LAMBDA,
             include_generic: bool = False) -> List[Annotation]:
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return [Annotation(c.mention, c.entity_id, c.confidence)
            for c in score_mentions(text, gazetteer, lam, include_generic)
            if c.confidence >= threshold]


def score_mentions(text: str, gazetteer: Gazetteer, lam=DEFAULT_LAMBDA,
                   include_generic: bool = False) -> List[CandidateAnnotation]:
    """Best candidate for every spotted mention, before thresholding."""
    lam = check_lambda(lam)
    tokens = token_spans(text)
    mentions = spot_mentions(text, gazetteer, tokens)
    if not mentions:
        return []
    vec = doc_term_vector(text, gazetteer.idf, tokens)
    norm = _vector_norm(vec)
    out = []
    for m in mentions:
        ner = ner_company_score(text, m, gazetteer, tokens)
        best = disambiguate(m, gazetteer.candidates(m.matched_alias.split()), vec, ner, lam,
                            norm, gazetteer)
        if include_generic or gazetteer.entries[best.entity_id].entity_type == "company":
            out.append(best)
    return out


# --------------------------------------------------------------------------
# Threshold tuning
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdReport:
    threshold: float
    precision: float
    recall: float
    f_beta: float
    beta: float
    sweep: Tuple[Tuple[float, float, float, float], ...]


def f_beta(p: float, r: float, beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not (0 <= p <= 1 and 0 <= r <= 1):
        raise ValueError("precision and recall must lie in [0, 1]")
    if p == 0 and r == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def confusion_at(confidences, gold, tau):
    """(true positives, predicted positives, gold positives) at threshold tau."""
    pred = confidences >= tau
    return int(np.sum(pred & gold)), int(np.sum(pred)), int(np.sum(gold))


def precision_recall(tp, predicted, positives):
    p = tp / predicted if predicted else 0.0
    r = tp / positives if positives else 0.0
    return p, r


def tune_threshold(scored: Sequence[Tuple[float, bool]], beta: float = 0.5) -> ThresholdReport:
    if not scored:
        raise ValueError("tune_threshold needs at least one scored annotation")
    conf = np.array([float(c) for c, _ in scored])
    gold = np.array([bool(g) for _, g in scored])
    positives = int(gold.sum())
    if positives == 0:
        raise ValueError("no gold positives: recall is undefined")
    taus = np.unique(np.concatenate([conf, [0.0, 1.0]]))
    order = np.argsort(-conf, kind="stable")
    sorted_conf = conf[order]
    cum_tp = np.concatenate([[0], np.cumsum(gold[order])])
    rows = []
    best = None
    for tau in taus:
        # number of confidences >= tau in the descending array
        k = int(np.searchsorted(-sorted_conf, -tau, side="right"))
        tp, predicted = int(cum_tp[k]), k
        p, r = precision_recall(tp, predicted, positives)
        f = f_beta(p, r, beta)
        rows.append((float(tau), p, r, f))
        if best is None or f >= best[3]:
            best = rows[-1]
    return ThresholdReport(best[0], best[1], best[2], best[3], beta, tuple(rows))
