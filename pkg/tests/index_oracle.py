"""Random index corpora and a linear-scan search oracle shared by tests."""
import math
import random
import re
from collections import Counter
from datetime import datetime, timedelta, timezone

from newsflow.index import IndexedDoc, QueryRequest

WORDS = ("banca fusione utile ricavi accordo borsa azioni dividendo mercato crescita "
         "investimento rete energia gas contratto fabbrica lavoro tagli prestito debito").split()
COMPANIES = [f"E{i}" for i in range(12)]
EVENTS = ["acquisition", "bankruptcy", "layoffs", "profit", "partnership"]
SOURCES = ["ansa", "sole", "repubblica", "corriere"]
T0 = datetime(2016, 1, 1, tzinfo=timezone.utc)


def random_doc(rng: random.Random, item_id: str) -> IndexedDoc:
    title = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 5)))
    body = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 40)))
    ann = tuple((c, round(rng.random(), 3)) for c in rng.sample(COMPANIES, rng.randint(0, 3)))
    ev = tuple((c, round(0.5 + rng.random() / 2, 3)) for c in rng.sample(EVENTS, rng.randint(0, 2)))
    return IndexedDoc(
        item_id=item_id, title=title, body=body, source_name=rng.choice(SOURCES),
        # coarse timestamps so that published_at ties exercise the item_id tie-break
        published_at=T0 + timedelta(days=rng.randint(0, 200)),
        is_good=rng.random() < 0.8, is_duplicate=rng.random() < 0.1,
        annotations=ann, events=ev, indexed_at=T0)


def random_corpus(seed: int, n: int):
    rng = random.Random(seed)
    return [random_doc(rng, f"{i:032x}") for i in rng.sample(range(10 * n), n)]


def random_request(rng: random.Random, size=None) -> QueryRequest:
    q = " ".join(rng.sample(WORDS, rng.randint(1, 3))) if rng.random() < 0.6 else None
    lo = hi = None
    if rng.random() < 0.3:
        a, b = sorted(rng.sample(range(0, 220), 2))
        lo, hi = T0 + timedelta(days=a), T0 + timedelta(days=b)
    return QueryRequest(
        q=q,
        company=rng.choice(COMPANIES) if rng.random() < 0.3 else None,
        event=rng.choice(EVENTS) if rng.random() < 0.3 else None,
        from_=lo, to=hi,
        include_duplicates=rng.random() < 0.3,
        include_low_quality=rng.random() < 0.3,
        page=0, size=100 if size is None else size)


def _toks(s):
    return [t.lower() for t in re.findall(r"[^\W_]+", s)]


def oracle_search(docs, req: QueryRequest):
    """Naive linear scan: returns (total, ranked item ids, facets)."""
    n = len(docs)
    stats = {}
    for d in docs:
        tt, bt = _toks(d.title), _toks(d.body)
        tf = Counter(bt)
        for t in tt:
            tf[t] += 2
        stats[d.item_id] = (tf, 2 * len(tt) + len(bt))
    avgdl = sum(dl for _, dl in stats.values()) / n if n else 0.0
    terms = list(dict.fromkeys(_toks(req.q))) if req.q else []

    rows = []
    for d in docs:
        if d.is_duplicate and not req.include_duplicates:
            continue
        if not d.is_good and not req.include_low_quality:
            continue
        if req.company and req.company not in [e for e, _ in d.annotations]:
            continue
        if req.event and req.event not in [c for c, _ in d.events]:
            continue
        if req.from_ and d.published_at < req.from_:
            continue
        if req.to and d.published_at > req.to:
            continue
        tf, dl = stats[d.item_id]
        if terms and not any(tf[t] for t in terms):
            continue
        score = 0.0
        for t in terms:
            if tf[t]:
                df = sum(1 for s in stats.values() if s[0][t])
                idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
                score += idf * tf[t] * 2.2 / (tf[t] + 1.2 * (0.25 + 0.75 * dl / avgdl))
        rows.append((score, d))

    if terms:
        rows.sort(key=lambda r: (-r[0], r[1].item_id))
    else:
        rows.sort(key=lambda r: (-r[1].published_at.timestamp(), r[1].item_id))
    facets = {"company": Counter(), "event": Counter(), "source": Counter(), "month": Counter()}
    for _, d in rows:
        for e in {e for e, _ in d.annotations}:
            facets["company"][e] += 1
        for c in {c for c, _ in d.events}:
            facets["event"][c] += 1
        facets["source"][d.source_name] += 1
        facets["month"][f"{d.published_at.year:04d}-{d.published_at.month:02d}"] += 1
    return len(rows), [d.item_id for _, d in rows], {k: dict(v) for k, v in facets.items()}, \
        [s for s, _ in rows]
