"""Business-news stream processor: cleanse, deduplicate, link companies,
classify events and serve the result through a faceted search index."""

__version__ = "0.1.0"
