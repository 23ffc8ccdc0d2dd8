"""Faceted search over enriched news items."""
from .server import NewsServer, serve
from .store import (B, K1, MAX_PAGE_SIZE, TITLE_WEIGHT, IndexedDoc, IndexStorageError,
                    NewsIndex, QueryError, QueryRequest, QueryResponse, bm25_term,
                    doc_term_stats, facet_counts, passes_filters, query_terms)


def upsert(index: NewsIndex, doc: IndexedDoc):
    index.upsert(doc)


def search(index: NewsIndex, req: QueryRequest) -> QueryResponse:
    return index.search(req)


__all__ = [
    "B", "K1", "MAX_PAGE_SIZE", "TITLE_WEIGHT", "IndexedDoc", "IndexStorageError", "NewsIndex",
    "NewsServer", "QueryError", "QueryRequest", "QueryResponse", "bm25_term", "doc_term_stats",
    "facet_counts", "passes_filters", "query_terms", "search", "serve", "upsert",
]
