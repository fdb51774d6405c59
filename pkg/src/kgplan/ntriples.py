"""Canonical N-Triples line construction and validation.

The canonical form used throughout the toolkit: percent-encoded IRIs in
angle brackets, plain (untyped, untagged) literals, single space
separators, and a `` .`` terminator.  Byte-identical output files are the
equivalence notion for plans, so every writer goes through these helpers.
"""

from __future__ import annotations

import re
from functools import lru_cache
from urllib.parse import quote

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_ECHAR = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}

_LINE_RE = re.compile(
    r'^<[^<>"{}|^`\\\x00-\x20]*> '
    r'<[^<>"{}|^`\\\x00-\x20]*> '
    r'(<[^<>"{}|^`\\\x00-\x20]*>|"(?:[^"\\\n\r]|\\.)*") \.$'
)


@lru_cache(maxsize=131072)
def encode_iri_part(raw: str) -> str:
    """Percent-encode a raw cell value for inclusion in an IRI template.

    Cached: real tables repeat key and category values heavily.
    """
    return quote(raw, safe="")


def escape_literal(raw: str) -> str:
    return "".join(_ECHAR.get(ch, ch) for ch in raw)


def iri_term(iri: str) -> str:
    return f"<{iri}>"


def literal_term(value: str) -> str:
    return f'"{escape_literal(value)}"'


def triple_line(subject_iri: str, predicate_iri: str, obj_term: str) -> str:
    """Build one canonical N-Triples line; ``obj_term`` is already rendered."""
    return f"<{subject_iri}> <{predicate_iri}> {obj_term} ."


def is_valid_line(line: str) -> bool:
    """Re-parse check used by the output validators."""
    return _LINE_RE.match(line) is not None


def local_name(iri: str) -> str:
    """Last path segment of an IRI, used for readable labels."""
    for sep in ("#", "/"):
        if sep in iri:
            tail = iri.rsplit(sep, 1)[1]
            if tail:
                return tail
    return iri
