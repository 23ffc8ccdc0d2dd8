"""Deterministic synthetic Italian-flavoured news corpus.

The generator plants three kinds of ground truth:

* company mentions drawn from a generated gazetteer (some aliases are shared
  with a ``generic`` entity so disambiguation has work to do),
* event vocabulary for the ten event categories,
* exact duplicates: a copy of an earlier article republished by another
  source. A copy always lands in the same chunk as its original, after it,
  so the original is registered first whatever the worker interleaving.

Company-name tokens and filler words come from disjoint pools, so a mention
can only appear where it was planted.
"""
import json
import os
import random
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from html import escape
from itertools import accumulate, product
from typing import Dict, List, Optional, Sequence

from .cleanse import item_id_for
from .events import CATEGORIES
from .linking import DEFAULT_CUE_WORDS, GazetteerEntry, write_gazetteer
from .pipeline.chunks import ChunkStore

EVENT_VOCAB: Dict[str, Sequence[str]] = {
    "layoffs": ("licenziamenti", "esuberi", "licenzia", "ridimensionamento", "cassintegrati"),
    "strikes": ("sciopero", "scioperi", "picchetto", "mobilitazione", "astensione"),
    "shutdowns": ("chiusura", "serrata", "dismissione", "cessazione", "smantellamento"),
    "material_damages": ("incendio", "alluvione", "crollo", "esplosione", "allagamento"),
    "financial_losses": ("perdita", "perdite", "passivo", "svalutazione", "disavanzo"),
    "frauds": ("frode", "truffa", "raggiro", "riciclaggio", "falsificazione"),
    "legal_issues": ("denuncia", "tribunale", "sentenza", "ricorso", "indagati"),
    "mergers_acquisitions": ("acquisizione", "fusione", "incorporazione", "opa", "rilevamento"),
    "product_launches": ("lancio", "debutto", "presentazione", "anteprima", "commercializzazione"),
    "management_changes": ("nomina", "dimissioni", "insediamento", "successore", "avvicendamento"),
}

SECTORS = {
    "banca": ("banca", "credito", "prestiti", "sportelli", "mutui", "risparmio"),
    "energia": ("energia", "gas", "rete", "impianti", "elettricità", "rinnovabili"),
    "auto": ("auto", "veicoli", "motori", "stabilimento", "componenti", "concessionari"),
    "alimentare": ("alimentare", "latte", "pasta", "vino", "distribuzione", "supermercati"),
    "telecom": ("telefonia", "fibra", "abbonati", "antenne", "dati", "operatore"),
    "moda": ("moda", "tessuti", "collezione", "boutique", "stilisti", "abbigliamento"),
    "trasporti": ("trasporti", "treni", "logistica", "porto", "merci", "flotta"),
    "costruzioni": ("cantiere", "cemento", "appalto", "edilizia", "infrastrutture", "opere"),
}
GENERIC_CONTEXT = ("vacanza", "spiaggia", "montagna", "turisti", "festa", "paese", "sagra")

_BASE_FILLER = """
il lo la i gli le un una di a da in con su per tra fra e o ma anche come più meno
molto poco sempre ancora già oggi ieri domani anno anni mese mesi settimana giorno
mercato mercati azioni titoli borsa indice punti quota quote investitori analisti
milioni miliardi euro prezzo prezzi crescita calo rialzo ribasso trimestre semestre
ricavi utile fatturato margine margini bilancio conti risultati previsioni stime
piano strategia obiettivi progetto progetti sviluppo investimenti clienti prodotti
servizi vendite ordini produzione domanda offerta settore comparto filiera territorio
regione provincia comune città nord sud centro italia europa estero export import
governo ministero regole norme tasse fisco incentivi bonus sostegno politica economia
lavoro lavoratori dipendenti personale occupazione contratti salari formazione
tecnologia digitale innovazione ricerca dati rete sistema sistemi piattaforma
secondo spiega sottolinea aggiunge ricorda conferma prevede stima valuta punta
nuovo nuova nuovi nuove grande grandi primo prima ultimo ultima importante forte
nel nella nei negli nelle del della dei degli delle al alla ai agli alle dal dalla
""".split()

_SYLLABLES = ["".join(p) for p in product("bcdfglmnprstvz", "aeiou")]
_FORBIDDEN = None


def _forbidden():
    global _FORBIDDEN
    if _FORBIDDEN is None:
        words = set(_BASE_FILLER) | set(DEFAULT_CUE_WORDS) | set(GENERIC_CONTEXT)
        for vocab in EVENT_VOCAB.values():
            words.update(vocab)
        for vocab in SECTORS.values():
            words.update(vocab)
        words.update({"spa", "srl", "s", "p", "a", "r", "l", "inc", "ltd"})
        _FORBIDDEN = words
    return _FORBIDDEN


def _word_pools(n_name: int, n_filler: int):
    """Disjoint pools of pseudo-words for company names and filler text."""
    rng = random.Random(0x5EDA)  # fixed: pools do not depend on the corpus seed
    forbidden = _forbidden()
    seen, pool = set(), []
    while len(pool) < n_name + n_filler:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(rng.choice((2, 3, 3))))
        if w not in seen and w not in forbidden:
            seen.add(w)
            pool.append(w)
    return pool[:n_name], pool[n_name:]


NAME_WORDS, PSEUDO_FILLER = _word_pools(300, 500)
_EVENT_WORDS = {w for vocab in EVENT_VOCAB.values() for w in vocab}
FILLER = tuple(w for w in _BASE_FILLER if w not in _EVENT_WORDS) + tuple(PSEUDO_FILLER)
# Zipf-like word frequencies (function words first), as in real text
_FILLER_CUM = tuple(accumulate(1.0 / (r + 10) for r in range(len(FILLER))))
SOURCES = ("ansa", "ilsole24ore", "repubblica", "corriere", "lastampa", "ilgiornale",
           "ilmessaggero", "milanofinanza")
SUFFIXES = ("S.p.A.", "SpA", "S.r.l.", "")
T0 = datetime(2016, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Company:
    entity_id: str
    name: str
    sector: str
    shared_alias: Optional[str] = None


def make_gazetteer(n_companies: int = 80, n_ambiguous: int = 12, seed: int = 0):
    """Companies (``C###``) and a few generic place names (``G###``) that share
    a one-word alias with an ambiguous company."""
    rng = random.Random(seed * 7919 + 1)
    words = list(NAME_WORDS)
    rng.shuffle(words)
    sectors = sorted(SECTORS)
    companies, entries = [], []
    for i in range(n_companies):
        if i < n_ambiguous:
            name = words.pop().capitalize()
        else:
            name = f"{words.pop().capitalize()} {words.pop().capitalize()}"
        comp = Company(f"C{i:03d}", name, sectors[i % len(sectors)],
                       shared_alias=name if i < n_ambiguous else None)
        companies.append(comp)
        ctx = {t: 1.0 for t in SECTORS[comp.sector]}
        ctx[comp.sector] = 2.0
        aliases = [f"{name} S.p.A."] if i % 2 == 0 else [f"{name} S.r.l."]
        commonness = {name: 0.7} if comp.shared_alias else {}
        entries.append(GazetteerEntry(comp.entity_id, name, tuple(aliases), commonness, ctx,
                                      "company"))
        if comp.shared_alias:
            entries.append(GazetteerEntry(f"G{i:03d}", name, (), {name: 0.3},
                                          {t: 1.0 for t in GENERIC_CONTEXT}, "generic"))
    return companies, entries


def _filler(rng, k):
    return rng.choices(FILLER, cum_weights=_FILLER_CUM, k=k)


def _sentence(rng, n_min=8, n_max=18, extra=()):
    words = _filler(rng, rng.randint(n_min, n_max))
    for w in extra:
        words.insert(rng.randint(1, len(words)), w)
    if rng.random() < 0.3:
        words.insert(rng.randint(1, len(words)), f"{rng.randint(2, 999)},{rng.randint(0, 9)}")
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


_MENTION_TEMPLATES = (
    "La società {m} ha comunicato nuovi dati su {s1} e {s2}.",
    "Secondo fonti vicine al gruppo {m}, cresce l'attenzione su {s1} e {s2}.",
    "{m} punta su {s1} e {s2} per il prossimo anno.",
    "L'azienda {m} conferma gli obiettivi su {s1}, con nuovi {s2}.",
    "Nel settore {s1} il gruppo {m} resta tra i protagonisti del comparto {s2}.",
)
_GENERIC_TEMPLATES = (
    "Molti turisti in vacanza a {m} per la sagra di paese.",
    "A {m} la festa in montagna richiama turisti da tutta la regione.",
)


def _mention_sentence(rng, comp: Company):
    suffix = rng.choice(SUFFIXES)
    surface = f"{comp.name} {suffix}".strip()
    s1, s2 = rng.sample(SECTORS[comp.sector], 2)
    return rng.choice(_MENTION_TEMPLATES).format(m=surface, s1=s1, s2=s2), surface


def _render_html(rng, title, paragraphs, source, when):
    nav = "".join(f'<li><a href="/{w}">{w.capitalize()}</a></li>'
                  for w in ("economia", "finanza", "mercati", "lavoro", "tecnologia"))
    body = "".join(f"<p>{escape(p)}</p>\n" for p in paragraphs)
    return (
        "<!DOCTYPE html>\n<html lang=\"it\"><head><meta charset=\"utf-8\">"
        f"<title>{escape(title)} | {source}</title>"
        "<script>window.dataLayer=window.dataLayer||[];</script></head>\n<body>"
        f"<nav><ul>{nav}</ul></nav>\n"
        f'<div class="adv"><a href="/abbonati">Abbonati</a></div>\n'
        f"<article><h1>{escape(title)}</h1>\n"
        f'<p class="date">{when:%d/%m/%Y}</p>\n{body}</article>\n'
        f"<footer><p>&copy; {when.year} {source} - P.IVA {rng.randint(10**9, 10**10 - 1)}"
        "</p></footer></body></html>"
    )


def _article(rng, companies, categories, low_quality, max_bytes=2900):
    """Returns (title, paragraphs, planted company mentions, planted events)."""
    events = []
    if not low_quality and rng.random() < 0.6:
        events = rng.sample(list(categories), rng.choice((1, 1, 2)))
    mentions = []
    n_mentions = 0 if low_quality else rng.choice((0, 1, 1, 2, 2, 3))
    chosen = [rng.choice(companies) for _ in range(n_mentions)]

    title_words = _filler(rng, rng.randint(4, 9))
    if events:
        title_words.insert(1, rng.choice(EVENT_VOCAB[events[0]]))
    title = " ".join(title_words).capitalize()

    if low_quality:
        return title, [_sentence(rng, 6, 12)], [], []

    sentences = []
    for comp in chosen:
        s, surface = _mention_sentence(rng, comp)
        sentences.append(s)
        mentions.append({"entity_id": comp.entity_id, "surface": surface})
    for cat in events:
        for w in rng.sample(list(EVENT_VOCAB[cat]), rng.randint(2, 3)):
            sentences.append(_sentence(rng, extra=(w,)))
    if rng.random() < 0.1:
        generic = [c for c in companies if c.shared_alias]
        if generic:
            g = rng.choice(generic)
            sentences.append(rng.choice(_GENERIC_TEMPLATES).format(m=g.name))
    target = rng.randint(700, max_bytes - 900)
    while sum(len(s) + 1 for s in sentences) < target:
        sentences.append(_sentence(rng))
    rng.shuffle(sentences)
    paragraphs, i = [], 0
    while i < len(sentences):
        k = rng.randint(2, 4)
        paragraphs.append(" ".join(sentences[i:i + k]))
        i += k
    return title, paragraphs, mentions, sorted(events)


def generate_items(size: int, categories: Sequence[str] = CATEGORIES,
                   duplicate_rate: float = 0.1, seed: int = 0, chunk_size: int = 1000,
                   low_quality_rate: float = 0.05, companies=None):
    """In-memory generation. Returns (records, truth) in stream order.

    ``truth[i]`` holds the item id, planted mentions and events, and
    ``duplicate_of`` for planted copies.
    """
    if not 0 <= duplicate_rate < 1:
        raise ValueError("duplicate_rate must be in [0, 1)")
    for c in categories:
        if c not in EVENT_VOCAB:
            raise ValueError(f"unknown category {c!r}")
    rng = random.Random(seed)
    if companies is None:
        companies, _ = make_gazetteer(seed=seed)
    n_dup = round(size * duplicate_rate)
    eligible = [p for p in range(size) if p % chunk_size != 0]
    if n_dup > len(eligible):
        raise ValueError("too many duplicates for the chunk layout")
    dup_slots = set(rng.sample(eligible, n_dup))

    records, truth = [], []
    chunk_originals: List[int] = []
    for pos in range(size):
        if pos % chunk_size == 0:
            chunk_originals = []
        when = T0 + timedelta(minutes=7 * pos + rng.randint(0, 6))
        if pos in dup_slots and chunk_originals:
            src_pos = rng.choice(chunk_originals)
            orig = records[src_pos]
            source = rng.choice([s for s in SOURCES if s != orig["source_name"]])
            url = f"https://www.{source}.it/economia/{when:%Y/%m}/ripresa-{pos:06d}.html"
            rec = dict(orig, source_name=source, source_url=url,
                       fetched_at=when.strftime("%Y-%m-%dT%H:%M:%SZ"))
            t = dict(truth[src_pos], item_id=item_id_for(url, rec["html"]),
                     duplicate_of=truth[src_pos]["item_id"])
            records.append(rec)
            truth.append(t)
            continue
        low = rng.random() < low_quality_rate
        title, paragraphs, mentions, events = _article(rng, companies, categories, low)
        source = rng.choice(SOURCES)
        url = f"https://www.{source}.it/economia/{when:%Y/%m}/articolo-{pos:06d}.html"
        html = _render_html(rng, title, paragraphs, source, when)
        rec = {"source_url": url, "source_name": source,
               "fetched_at": when.strftime("%Y-%m-%dT%H:%M:%SZ"), "html": html,
               "language": "it"}
        if rng.random() < 0.7:
            rec["title"] = title
        records.append(rec)
        truth.append({"item_id": item_id_for(url, html), "mentions": mentions,
                      "events": events, "low_quality": low, "duplicate_of": None})
        if not low:
            chunk_originals.append(pos)
    return records, truth


def labeled_docs(category: str, n: int, seed: int = 0, positive_rate: float = 0.3):
    """Short labelled documents for one category; positives carry 2-4 of its
    planted words, negatives none (but may carry other categories' words)."""
    rng = random.Random(f"{seed}:{category}")
    others = [c for c in EVENT_VOCAB if c != category]
    docs = []
    for i in range(n):
        label = rng.random() < positive_rate
        extra = []
        if label:
            extra += rng.sample(list(EVENT_VOCAB[category]), rng.randint(2, 4))
        if rng.random() < 0.5:
            extra += rng.sample(list(EVENT_VOCAB[rng.choice(others)]), 2)
        words = _filler(rng, rng.randint(40, 90))
        for w in extra:
            words.insert(rng.randint(0, len(words)), w)
        docs.append({"doc_id": f"{category}-{i:05d}", "text": " ".join(words), "label": label})
    return docs


def gen_corpus(out_dir, size: int = 1000, categories: Sequence[str] = CATEGORIES,
               duplicate_rate: float = 0.1, seed: int = 0, chunk_size: int = 1000,
               docs_per_category: int = 200, low_quality_rate: float = 0.05) -> dict:
    """Write chunks, an item file, the gazetteer, labels and ground truth.

    Layout under ``out_dir``: ``chunks/``, ``items.jsonl``, ``gazetteer.jsonl``,
    ``labels/<category>.jsonl``, ``truth.jsonl`` and ``manifest.json``.
    """
    os.makedirs(out_dir, exist_ok=True)
    companies, entries = make_gazetteer(seed=seed)
    records, truth = generate_items(size, categories, duplicate_rate, seed, chunk_size,
                                    low_quality_rate, companies)
    write_gazetteer(entries, os.path.join(out_dir, "gazetteer.jsonl"))
    store = ChunkStore(os.path.join(out_dir, "chunks"), max_items=max(chunk_size, 1))
    keys = [store.write_chunk(records[i:i + chunk_size], "gen", seq, T0)
            for seq, i in enumerate(range(0, len(records), chunk_size))]
    with open(os.path.join(out_dir, "items.jsonl"), "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "truth.jsonl"), "w", encoding="utf-8") as fh:
        for t in truth:
            fh.write(json.dumps(t, ensure_ascii=False, sort_keys=True) + "\n")
    label_dir = os.path.join(out_dir, "labels")
    os.makedirs(label_dir, exist_ok=True)
    for cat in categories:
        with open(os.path.join(label_dir, f"{cat}.jsonl"), "w", encoding="utf-8") as fh:
            for d in labeled_docs(cat, docs_per_category, seed):
                fh.write(json.dumps(d, ensure_ascii=False, sort_keys=True) + "\n")
    dups = [{"item_id": t["item_id"], "original_item_id": t["duplicate_of"]}
            for t in truth if t["duplicate_of"]]
    manifest = {
        "size": size, "seed": seed, "duplicate_rate": duplicate_rate,
        "categories": list(categories), "chunk_size": chunk_size,
        "docs_per_category": docs_per_category, "chunk_keys": keys,
        "duplicates": dups,
        "planted_mentions": sum(len(t["mentions"]) for t in truth),
        "event_counts": dict(sorted(Counter(e for t in truth for e in t["events"]).items())),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
