import json
import random
import threading
import urllib.error
import urllib.request
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import pytest

from newsflow.index import (IndexedDoc, IndexStorageError, NewsIndex, QueryError,
                            QueryRequest, bm25_term, facet_counts, serve)

from index_oracle import COMPANIES, EVENTS, random_corpus, random_request, oracle_search

TS = datetime(2016, 7, 1, 12, tzinfo=timezone.utc)


def doc(i, title="t", body="b", **kw):
    base = dict(item_id=f"id{i:03d}", title=title, body=body, source_name="ansa",
                published_at=TS, is_good=True, is_duplicate=False)
    base.update(kw)
    return IndexedDoc(**base)


def all_pages(index, req, size):
    out, page = [], 0
    while True:
        r = index.search(replace(req, page=page, size=size))
        if not r.hits:
            return out
        out.extend(h["item_id"] for h in r.hits)
        page += 1


@pytest.fixture(scope="module")
def corpus():
    docs = random_corpus(7, 400)
    idx = NewsIndex()
    for d in docs:
        idx.upsert(d)
    return docs, idx


def test_empty_index():
    r = NewsIndex().search(QueryRequest())
    assert r.total == 0 and r.hits == []
    assert all(v == {} for v in r.facets.values())


def test_insert_then_find_and_replace():
    idx = NewsIndex()
    idx.upsert(doc(1, body="primo testo"))
    assert idx.get("id001").body == "primo testo"
    idx.upsert(doc(1, body="secondo testo"))
    assert len(idx) == 1 and idx.get("id001").body == "secondo testo"
    assert idx.search(QueryRequest(q="primo")).total == 0
    assert idx.search(QueryRequest(q="secondo")).total == 1


def test_cardinality_with_repeated_ids():
    rng = random.Random(1)
    ids = [f"id{i}" for i in range(900)] + [f"id{rng.randrange(900)}" for _ in range(100)]
    idx = NewsIndex()
    for i, item_id in enumerate(ids):
        idx.upsert(replace(doc(0), item_id=item_id, body=f"v{i}"))
    assert len(idx) == len(set(ids)) == 900


def test_company_filter_containment():
    idx = NewsIndex()
    for i in range(10):
        ann = (("E1", 0.9),) if i in (2, 5, 7) else (("E2", 0.4),)
        idx.upsert(doc(i, annotations=ann))
    r = idx.search(QueryRequest(company="E1"))
    assert r.total == 3
    assert sorted(h["item_id"] for h in r.hits) == ["id002", "id005", "id007"]


def test_default_exclusions():
    idx = NewsIndex()
    idx.upsert(doc(1))
    idx.upsert(doc(2, is_duplicate=True))
    idx.upsert(doc(3, is_good=False))
    assert idx.search(QueryRequest()).total == 1
    assert idx.search(QueryRequest(include_duplicates=True)).total == 2
    assert idx.search(QueryRequest(include_duplicates=True, include_low_quality=True)).total == 3


def test_facets_small():
    f = facet_counts([doc(1, annotations=(("E1", 0.9), ("E2", 0.5)), events=(("profit", 0.7),))])
    assert f == {"company": {"E1": 1, "E2": 1}, "event": {"profit": 1},
                 "source": {"ansa": 1}, "month": {"2016-07": 1}}


def test_facets_match_tally(corpus):
    docs, _ = corpus
    f = facet_counts(docs[:500])
    _, _, expected, _ = oracle_search(docs[:500], QueryRequest(include_duplicates=True,
                                                               include_low_quality=True))
    assert f == expected


def test_request_validation():
    with pytest.raises(QueryError):
        QueryRequest(size=101)
    with pytest.raises(QueryError):
        QueryRequest(page=-1)
    with pytest.raises(QueryError):
        QueryRequest.from_params({"from": "01/07/2016"})
    with pytest.raises(QueryError):
        QueryRequest.from_params({"include_duplicates": "maybe"})
    r = QueryRequest.from_params({"from": "2016-07-01", "to": "2016-07-01", "size": "5"})
    assert r.from_ <= TS <= r.to and r.size == 5


def test_no_query_sorts_by_date_then_id():
    idx = NewsIndex()
    idx.upsert(doc(3, published_at=TS))
    idx.upsert(doc(1, published_at=TS))
    idx.upsert(doc(2, published_at=datetime(2017, 1, 1, tzinfo=timezone.utc)))
    assert [h["item_id"] for h in idx.search(QueryRequest()).hits] == ["id002", "id001", "id003"]


def test_search_matches_oracle(corpus):
    docs, idx = corpus
    rng = random.Random(11)
    for _ in range(60):
        req = random_request(rng)
        r = idx.search(req)
        total, ranked, facets, scores = oracle_search(docs, req)
        assert r.total == total
        assert r.facets == facets
        assert [h["item_id"] for h in r.hits] == ranked[:100]
        if req.q:
            assert [h["score"] for h in r.hits] == scores[:100]


def test_hits_satisfy_filters(corpus):
    _, idx = corpus
    rng = random.Random(5)
    for _ in range(30):
        req = random_request(rng)
        for h in idx.search(req).hits:
            d = idx.get(h["item_id"])
            assert req.company is None or req.company in d.companies
            assert req.event is None or req.event in d.categories
            assert req.include_duplicates or not d.is_duplicate
            assert req.include_low_quality or d.is_good
            assert req.from_ is None or d.published_at >= req.from_
            assert req.to is None or d.published_at <= req.to


def test_pagination_consistency(corpus):
    _, idx = corpus
    rng = random.Random(3)
    for size in (1, 7, 25, 100):
        req = random_request(rng)
        full = idx.search(replace(req, size=100))
        pages = all_pages(idx, req, size)
        assert len(pages) == full.total == len(set(pages))
        assert pages[:100] == [h["item_id"] for h in full.hits]


def test_facet_equals_filtered_total(corpus):
    _, idx = corpus
    rng = random.Random(9)
    for _ in range(10):
        req = replace(random_request(rng), company=None, event=None)
        r = idx.search(req)
        for value, count in r.facets["company"].items():
            assert idx.search(replace(req, company=value)).total == count
        for value, count in r.facets["event"].items():
            assert idx.search(replace(req, event=value)).total == count
        if req.from_ is None and req.to is None:
            for month, count in r.facets["month"].items():
                y, m = map(int, month.split("-"))
                lo = datetime(y, m, 1, tzinfo=timezone.utc)
                hi = datetime(y + m // 12, m % 12 + 1, 1, tzinfo=timezone.utc)
                sub = idx.search(replace(req, from_=lo, to=hi - timedelta(microseconds=1)))
                assert sub.total == count


def test_bm25_monotone_in_tf():
    rng = random.Random(0)
    for _ in range(500):
        n = rng.randint(1, 1000)
        df = rng.randint(1, n)
        dl = rng.randint(1, 500)
        avgdl = rng.uniform(1, 500)
        tf = rng.randint(0, 50)
        assert bm25_term(tf + 1, df, n, dl, avgdl) >= bm25_term(tf, df, n, dl, avgdl)


def test_title_weighted_twice():
    idx = NewsIndex()
    idx.upsert(doc(1, title="fusione", body="altro testo qui"))
    idx.upsert(doc(2, title="altro", body="fusione testo qui"))
    hits = idx.search(QueryRequest(q="fusione")).hits
    assert hits[0]["item_id"] == "id001" and hits[0]["score"] > hits[1]["score"]


def test_persistence_replay(tmp_path, corpus):
    docs, _ = corpus
    path = tmp_path / "index.jsonl"
    idx = NewsIndex(path)
    idx.upsert_many(docs[:50])
    idx.upsert(replace(docs[0], body="sostituito"))
    again = NewsIndex(path)
    assert again.dump() == idx.dump()
    assert again.get(docs[0].item_id).body == "sostituito"
    idx.compact()
    assert NewsIndex(path).dump() == idx.dump()
    assert sum(1 for _ in open(path)) == 50


def test_torn_tail_is_ignored(tmp_path):
    path = tmp_path / "index.jsonl"
    idx = NewsIndex(path)
    idx.upsert(doc(1))
    with open(path, "a") as fh:
        fh.write('{"item_id": "id002", "tit')
    assert len(NewsIndex(path)) == 1


def test_append_after_torn_tail_keeps_new_record(tmp_path):
    path = tmp_path / "index.jsonl"
    NewsIndex(path).upsert(doc(1))
    with open(path, "a") as fh:
        fh.write('{"item_id": "id002", "tit')  # writer died mid-line
    restarted = NewsIndex(path)
    restarted.upsert(doc(3))
    assert [d.item_id for d in NewsIndex(path).docs()] == [doc(1).item_id, doc(3).item_id]


def test_refresh_follows_another_writer(tmp_path):
    path = tmp_path / "index.jsonl"
    writer = NewsIndex(path)
    writer.upsert(doc(1))
    reader = NewsIndex(path)
    writer.upsert_many([doc(2), doc(3)])
    assert reader.refresh() == 2 and reader.dump() == writer.dump()
    writer.upsert(replace(doc(2), title="riscritto"))
    reader.refresh()
    writer.compact()  # shorter file with different bytes at the reader's offset
    writer.upsert_many([doc(4), doc(5), doc(6)])
    reader.refresh()
    assert reader.dump() == writer.dump()


def test_storage_failure_leaves_index_unchanged(tmp_path):
    path = tmp_path / "gone" / "index.jsonl"
    (tmp_path / "gone").mkdir()
    idx = NewsIndex(path)
    idx.upsert(doc(1))
    before = idx.dump()
    (tmp_path / "gone" / "index.jsonl").unlink()
    (tmp_path / "gone").rmdir()
    with pytest.raises(IndexStorageError):
        idx.upsert(doc(2))
    assert idx.dump() == before


def _get(port, path):
    try:
        with urllib.request.urlopen(f"http://127.0.0.1:{port}{path}", timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


@pytest.fixture
def server(corpus):
    docs, _ = corpus
    idx = NewsIndex()
    idx.upsert_many(docs[:200])
    srv = serve(idx, 0, background=True)
    yield srv, idx, docs
    srv.stop()


def test_http_endpoints(server):
    srv, idx, _ = server
    assert _get(srv.port, "/health") == (200, {"status": "ok"})
    status, body = _get(srv.port, "/news?company=E1&size=100")
    expected = json.loads(json.dumps(idx.search(QueryRequest(company="E1", size=100)).to_json()))
    assert status == 200 and body == expected
    assert _get(srv.port, "/news?from=yesterday")[0] == 400
    assert _get(srv.port, "/news?size=500")[0] == 400
    status, body = _get(srv.port, "/news?bogus=1")
    assert status == 400 and "error" in body


def test_http_concurrent_reads_during_indexing(server):
    srv, idx, docs = server
    stop = threading.Event()

    def writer():
        for d in docs[200:]:
            if stop.is_set():
                return
            idx.upsert(d)

    rng = random.Random(4)
    paths = []
    for _ in range(50):
        params = ["size=100", "include_duplicates=true", "include_low_quality=true"]
        if rng.random() < 0.5:
            params.append(f"company={rng.choice(COMPANIES)}")
        if rng.random() < 0.5:
            params.append(f"event={rng.choice(EVENTS)}")
        if rng.random() < 0.5:
            params.append("q=banca+utile")
        paths.append("/news?" + "&".join(params))
    results = [None] * len(paths)

    def reader(i):
        results[i] = _get(srv.port, paths[i])

    w = threading.Thread(target=writer)
    w.start()
    readers = [threading.Thread(target=reader, args=(i,)) for i in range(len(paths))]
    for t in readers:
        t.start()
    for t in readers:
        t.join()
    stop.set()
    w.join()
    for status, body in results:
        assert status == 200
        assert len(body["hits"]) == min(body["total"], 100)
        # every result has exactly one source and one month, so these facets sum to total
        assert sum(body["facets"]["source"].values()) == body["total"]
        assert sum(body["facets"]["month"].values()) == body["total"]
