"""Minimal Turtle reader for the accepted [R2]RML vocabulary.

This is not a general Turtle parser.  It understands exactly what the
mapping extractor needs: ``@prefix`` directives, IRI refs, prefixed names,
double-quoted literals, the ``a`` keyword, blank node property lists, and
``;`` / ``,`` predicate-object notation.  Everything else is rejected with
a positioned syntax error so malformed mapping documents fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass


class TurtleSyntaxError(Exception):
    """Malformed Turtle input; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Iri:
    value: str


@dataclass(frozen=True)
class Literal:
    value: str


@dataclass(frozen=True)
class BlankNode:
    label: str


Term = Iri | Literal | BlankNode

_PN_LOCAL_EXTRA = "_-.%"


class _Tokenizer:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str) -> TurtleSyntaxError:
        return TurtleSyntaxError(message, self.line, self.col)

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_punct(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected '{ch}'")
        self._advance()

    def try_punct(self, ch: str) -> bool:
        if self.peek() == ch:
            self._advance()
            return True
        return False

    def read_iriref(self) -> str:
        # caller saw '<'
        self._advance()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] != ">":
            if self.text[self.pos] in "\n\r":
                raise self.error("unterminated IRI reference")
            self._advance()
        if self.pos >= len(self.text):
            raise self.error("unterminated IRI reference")
        value = self.text[start:self.pos]
        self._advance()
        return value

    def read_string(self) -> str:
        # caller saw '"'
        self._advance()
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string literal")
            ch = self.text[self.pos]
            if ch == '"':
                self._advance()
                return "".join(out)
            if ch == "\\":
                self._advance()
                if self.pos >= len(self.text):
                    raise self.error("unterminated escape sequence")
                esc = self.text[self.pos]
                mapped = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\"}.get(esc)
                if mapped is None:
                    raise self.error(f"unsupported escape '\\{esc}'")
                out.append(mapped)
                self._advance()
            elif ch in "\n\r":
                raise self.error("newline in string literal")
            else:
                out.append(ch)
                self._advance()

    def read_word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isalnum() or ch in _PN_LOCAL_EXTRA or ch == ":":
                self._advance()
            else:
                break
        # a name cannot end with '.'; give the dot back as punctuation
        while self.pos > start and self.text[self.pos - 1] == ".":
            self.pos -= 1
            self.col -= 1
        if self.pos == start:
            raise self.error(f"unexpected character {self.text[self.pos]!r}")
        return self.text[start:self.pos]


class TurtleDocument:
    """Parsed document: a triple list in document order plus prefixes."""

    def __init__(self) -> None:
        self.prefixes: dict[str, str] = {}
        self.triples: list[tuple[Term, str, Term]] = []
        self._blank_counter = 0

    def objects(self, subject: Term, predicate: str) -> list[Term]:
        return [o for s, p, o in self.triples if s == subject and p == predicate]

    def subjects(self) -> list[Term]:
        seen: list[Term] = []
        for s, _, _ in self.triples:
            if s not in seen:
                seen.append(s)
        return seen


def parse_turtle(text: str) -> TurtleDocument:
    """Parse ``text`` into triples, raising :class:`TurtleSyntaxError` on bad input."""
    doc = TurtleDocument()
    tok = _Tokenizer(text)

    def fresh_blank() -> BlankNode:
        doc._blank_counter += 1
        return BlankNode(f"b{doc._blank_counter}")

    def resolve_pname(word: str) -> str:
        prefix, _, local = word.partition(":")
        if prefix not in doc.prefixes:
            raise tok.error(f"undeclared prefix '{prefix}:'")
        return doc.prefixes[prefix] + local

    def read_verb() -> str:
        ch = tok.peek()
        if ch == "<":
            return tok.read_iriref()
        word = tok.read_word()
        if word == "a":
            return "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
        if ":" not in word:
            raise tok.error(f"expected predicate, got '{word}'")
        return resolve_pname(word)

    def read_object() -> Term:
        ch = tok.peek()
        if ch == "<":
            return Iri(tok.read_iriref())
        if ch == '"':
            return Literal(tok.read_string())
        if ch == "[":
            tok.take_punct("[")
            node = fresh_blank()
            if not tok.try_punct("]"):
                read_predicate_object_list(node)
                tok.take_punct("]")
            return node
        word = tok.read_word()
        if ":" not in word:
            raise tok.error(f"expected object, got '{word}'")
        return Iri(resolve_pname(word))

    def read_predicate_object_list(subject: Term) -> None:
        while True:
            verb = read_verb()
            while True:
                doc.triples.append((subject, verb, read_object()))
                if not tok.try_punct(","):
                    break
            if not tok.try_punct(";"):
                return
            # a dangling ';' before ']' or '.' is tolerated
            if tok.peek() in ("]", "."):
                return

    def read_directive() -> None:
        tok._advance()  # consume '@'
        word = tok.read_word()
        if word != "prefix":
            raise tok.error(f"unsupported directive '@{word}'")
        name = tok.read_word()
        if not name.endswith(":"):
            raise tok.error("malformed prefix declaration")
        if tok.peek() != "<":
            raise tok.error("expected IRI in prefix declaration")
        iri = tok.read_iriref()
        tok.take_punct(".")
        doc.prefixes[name[:-1]] = iri

    while not tok.at_end():
        ch = tok.peek()
        if ch == "@":
            read_directive()
            continue
        if ch == "<":
            subject: Term = Iri(tok.read_iriref())
        elif ch == "[":
            tok.take_punct("[")
            subject = fresh_blank()
            if not tok.try_punct("]"):
                read_predicate_object_list(subject)
                tok.take_punct("]")
        else:
            word = tok.read_word()
            if ":" not in word:
                raise tok.error(f"expected subject, got '{word}'")
            subject = Iri(resolve_pname(word))
        read_predicate_object_list(subject)
        tok.take_punct(".")

    return doc
