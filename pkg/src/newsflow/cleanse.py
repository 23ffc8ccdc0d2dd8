"""HTML cleansing and quality measures.

Content extraction works on *segments*: maximal runs of text between two
block-level tag boundaries. Each segment records its own visible text and
the characters of markup that fell inside it. A segment is kept when
``text / (text + markup) >= block_density``; the body is the contiguous run
of kept segments carrying the most text.
"""
import hashlib
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html import unescape
from html.parser import HTMLParser
from typing import Optional
from urllib.parse import urlparse

log = logging.getLogger(__name__)

BLOCK_TAGS = frozenset({
    "address", "article", "aside", "blockquote", "body", "dd", "details", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "html", "li", "main", "ol", "p", "pre", "section", "summary", "table",
    "tbody", "td", "tfoot", "th", "thead", "tr", "ul", "br",
})
HEADINGS = frozenset({"h1", "h2", "h3", "h4", "h5", "h6"})
DROPPED_TAGS = frozenset({"script", "style", "nav", "noscript", "template", "iframe", "svg",
                          "head", "title"})
VOID_TAGS = frozenset({"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
                       "meta", "source", "track", "wbr"})

_HSPACE = re.compile(r"[^\S\n]+")
_PARA_BREAK = re.compile(r"\n[^\S\n]*\n\s*")
_TAG = re.compile(r"<[^>]*>?")


class RecordError(ValueError):
    """A chunk line that is not a valid news-item record."""


@dataclass(frozen=True)
class RawNewsItem:
    source_url: str
    source_name: str
    fetched_at: datetime
    html: str = ""
    declared_title: Optional[str] = None
    language: Optional[str] = None

    @classmethod
    def from_record(cls, rec: dict) -> "RawNewsItem":
        if not isinstance(rec, dict):
            raise RecordError("record is not a JSON object")
        url = rec.get("source_url")
        if not isinstance(url, str) or not url:
            raise RecordError("missing source_url")
        parsed = urlparse(url)
        if not parsed.scheme or not parsed.netloc:
            raise RecordError(f"source_url is not absolute: {url!r}")
        try:
            fetched = parse_timestamp(rec["fetched_at"])
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(f"bad fetched_at: {exc}") from exc
        html = rec.get("html") or ""
        title = rec.get("title")
        lang = rec.get("language")
        if not isinstance(html, str) or not (title is None or isinstance(title, str)):
            raise RecordError("html and title must be strings")
        if lang is not None and not (isinstance(lang, str) and len(lang) == 2):
            raise RecordError(f"language must be a 2-letter code, got {lang!r}")
        return cls(url, str(rec.get("source_name") or ""), fetched, html, title, lang)

    def to_record(self) -> dict:
        rec = {
            "source_url": self.source_url,
            "source_name": self.source_name,
            "fetched_at": format_timestamp(self.fetched_at),
            "html": self.html,
        }
        if self.declared_title is not None:
            rec["title"] = self.declared_title
        if self.language is not None:
            rec["language"] = self.language
        return rec


@dataclass(frozen=True)
class CleanNewsItem:
    raw: RawNewsItem
    title: str
    body: str
    item_id: str
    parse_degraded: bool = False

    @property
    def source_url(self):
        return self.raw.source_url

    @property
    def source_name(self):
        return self.raw.source_name

    @property
    def fetched_at(self):
        return self.raw.fetched_at


@dataclass(frozen=True)
class QualityThresholds:
    min_length: int = 350
    min_density: float = 0.25
    require_title: bool = True


@dataclass(frozen=True)
class QualityMeasures:
    content_length: int
    text_density: float
    paragraph_count: int
    has_title: bool
    is_good: bool
    parse_degraded: bool = False


def parse_timestamp(value) -> datetime:
    if isinstance(value, datetime):
        ts = value
    else:
        text = str(value).strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def item_id_for(source_url: str, html: str) -> str:
    """Stable 128-bit id over the source URL and a digest of the raw content."""
    content = hashlib.sha256(html.encode("utf-8")).digest()
    h = hashlib.blake2b(digest_size=16)
    h.update(source_url.encode("utf-8"))
    h.update(b"\x00")
    h.update(content)
    return h.hexdigest()


def normalize_block_text(text: str) -> str:
    """Collapse horizontal whitespace; keep blank-line paragraph breaks."""
    paras = _PARA_BREAK.split(text.strip())
    out = []
    for p in paras:
        p = _HSPACE.sub(" ", p.replace("\n", " ")).strip()
        if p:
            out.append(p)
    return "\n\n".join(out)


@dataclass
class _Segment:
    tag: str
    text: list = field(default_factory=list)
    markup: int = 0

    def joined(self):
        return normalize_block_text("".join(self.text))


class _SegmentParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.segments = []
        self.current = _Segment("#root")
        self.blocks = ["#root"]
        self.skip_depth = 0
        self.heading = None
        self._heading_buf = None

    def _boundary(self, tag):
        self.segments.append(self.current)
        self.current = _Segment(tag)

    def handle_starttag(self, tag, attrs):
        raw = self.get_starttag_text() or f"<{tag}>"
        if tag == "body":
            self.skip_depth = 0  # an unclosed <head> must not swallow the page
        if self.skip_depth or tag in DROPPED_TAGS:
            if tag in DROPPED_TAGS and tag not in VOID_TAGS:
                self.skip_depth += 1
            self.current.markup += len(raw)
            return
        if tag in BLOCK_TAGS:
            self._boundary(tag)
            if tag not in VOID_TAGS:
                self.blocks.append(tag)
        self.current.markup += len(raw)
        if tag in HEADINGS and self.heading is None:
            self._heading_buf = []

    def handle_startendtag(self, tag, attrs):
        raw = self.get_starttag_text() or f"<{tag}/>"
        if not self.skip_depth and tag in BLOCK_TAGS:
            self._boundary(tag)
        self.current.markup += len(raw)

    def handle_endtag(self, tag):
        size = len(tag) + 3
        if self.skip_depth:
            if tag in DROPPED_TAGS:
                self.skip_depth -= 1
            self.current.markup += size
            return
        self.current.markup += size
        if tag in HEADINGS and self._heading_buf is not None:
            self.heading = normalize_block_text("".join(self._heading_buf)) or None
            self._heading_buf = None
        if tag in BLOCK_TAGS and tag in self.blocks:
            while self.blocks and self.blocks.pop() != tag:
                pass
            self._boundary(self.blocks[-1] if self.blocks else "#root")

    def handle_data(self, data):
        if self.skip_depth:
            self.current.markup += len(data)
            return
        self.current.text.append(data)
        if self._heading_buf is not None:
            self._heading_buf.append(data)

    def handle_comment(self, data):
        self.current.markup += len(data) + 7

    def handle_decl(self, decl):
        self.current.markup += len(decl) + 3

    def handle_pi(self, data):
        self.current.markup += len(data) + 3

    def finish(self):
        self.close()
        self.segments.append(self.current)
        return self.segments


def _best_run(segments, block_density):
    best, best_len = [], 0
    run, run_len = [], 0
    for seg in segments:
        text = seg.joined()
        if not text:
            continue
        visible = len(text)
        if visible / (visible + seg.markup) >= block_density:
            run.append(text)
            run_len += visible
            if run_len > best_len:
                best, best_len = list(run), run_len
        else:
            run, run_len = [], 0
    return best


def _strip_tags(html):
    text = _TAG.sub(" ", re.sub(r"(?is)<(script|style)\b.*?</\1\s*>", " ", html))
    return normalize_block_text(unescape(text).replace("<", " ").replace(">", " "))


def extract_content(raw: RawNewsItem, block_density: float = 0.25) -> CleanNewsItem:
    degraded = False
    heading = None
    try:
        parser = _SegmentParser()
        parser.feed(raw.html)
        segments = parser.finish()
        heading = parser.heading
        body = "\n\n".join(_best_run(segments, block_density))
    except Exception as exc:  # html.parser is lenient; anything here is a real defect in the input
        log.warning("HTML parse failed for %s, falling back to tag stripping: %s",
                    raw.source_url, exc)
        body = _strip_tags(raw.html)
        degraded = True
    if raw.declared_title:
        title = normalize_block_text(raw.declared_title).replace("\n\n", " ")
    else:
        title = (heading or "").replace("\n\n", " ")
    return CleanNewsItem(raw, title, body, item_id_for(raw.source_url, raw.html), degraded)


def compute_measures(clean: CleanNewsItem, raw: RawNewsItem,
                     thresholds: QualityThresholds = QualityThresholds()) -> QualityMeasures:
    length = len(clean.body)
    density = min(1.0, length / len(raw.html)) if raw.html else 0.0
    paragraphs = clean.body.count("\n\n") + 1 if clean.body else 0
    has_title = bool(clean.title)
    good = judge(length, density, has_title, thresholds)
    return QualityMeasures(length, density, paragraphs, has_title, good, clean.parse_degraded)


def judge(content_length: int, text_density: float, has_title: bool,
          thresholds: QualityThresholds = QualityThresholds()) -> bool:
    return (content_length >= thresholds.min_length and text_density >= thresholds.min_density
            and (has_title or not thresholds.require_title))
