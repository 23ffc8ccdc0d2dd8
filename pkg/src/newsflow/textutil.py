"""Tokenisation shared by the profile, classifier and index code."""
import re

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text):
    """Lowercase alphanumeric runs; anything else is a boundary."""
    return _TOKEN_RE.findall(text.lower())


def token_spans(text):
    """(start, end, token) for each alphanumeric run, case preserved."""
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]
