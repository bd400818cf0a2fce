"""Streaming line-oriented N-Triples reader and writer.

Terms are kept in a compact canonical form: IRIs without the angle
brackets, blank nodes with their ``_:`` prefix, literals with their
surrounding quotes plus any language tag or ``^^<datatype>`` suffix.
Escape sequences are decoded on input and re-escaped on output, so
parse -> format -> parse is the identity.

Malformed statements are skipped and reported by default; a strict mode
aborts on the first error.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True)
class RawTriple:
    subject: str
    predicate: str
    object: str


class ParseError(ValueError):
    def __init__(self, message: str, line_no: int = 0, line: str = ""):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.message = message
        self.line_no = line_no
        self.line = line


_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
          '"': '"', "'": "'", "\\": "\\"}

IRI = "iri"
BNODE = "bnode"
LITERAL = "literal"


def _decode_escape(s: str, i: int, line_no: int):
    # s[i] == "\\"; returns (char, next index)
    if i + 1 >= len(s):
        raise ParseError("dangling backslash", line_no, s)
    c = s[i + 1]
    if c in _ECHAR:
        return _ECHAR[c], i + 2
    if c == "u" or c == "U":
        n = 4 if c == "u" else 8
        hexpart = s[i + 2:i + 2 + n]
        if len(hexpart) != n:
            raise ParseError(f"truncated \\{c} escape", line_no, s)
        try:
            return chr(int(hexpart, 16)), i + 2 + n
        except ValueError:
            raise ParseError(f"bad \\{c} escape {hexpart!r}", line_no, s) from None
    raise ParseError(f"unknown escape \\{c}", line_no, s)


def _scan_iri(s: str, i: int, line_no: int):
    # s[i] == "<"; IRIs admit only \u/\U escapes
    parts: list[str] = []
    i += 1
    while i < len(s):
        c = s[i]
        if c == ">":
            return "".join(parts), i + 1
        if c == "\\":
            if i + 1 < len(s) and s[i + 1] not in ("u", "U"):
                raise ParseError("only \\u/\\U escapes are allowed in IRIs", line_no, s)
            ch, i = _decode_escape(s, i, line_no)
            parts.append(ch)
            continue
        if c in ' "{}|^`' or ord(c) <= 0x20:
            raise ParseError(f"character {c!r} not allowed in IRI", line_no, s)
        parts.append(c)
        i += 1
    raise ParseError("unterminated IRI", line_no, s)


def _scan_bnode(s: str, i: int, line_no: int):
    # s[i:i+2] == "_:"
    j = i + 2
    if j >= len(s) or s[j] in " \t.":
        raise ParseError("empty blank node label", line_no, s)
    while j < len(s):
        c = s[j]
        if c in " \t":
            break
        if c == ".":
            # a dot is part of the label only when more label follows
            if j + 1 < len(s) and s[j + 1] not in " \t.":
                j += 1
                continue
            break
        j += 1
    return s[i:j], j


def _scan_literal(s: str, i: int, line_no: int):
    # s[i] == '"'
    parts: list[str] = []
    i += 1
    while True:
        if i >= len(s):
            raise ParseError("unterminated literal", line_no, s)
        c = s[i]
        if c == '"':
            i += 1
            break
        if c == "\\":
            ch, i = _decode_escape(s, i, line_no)
            parts.append(ch)
            continue
        parts.append(c)
        i += 1
    lexical = "".join(parts)
    if i < len(s) and s[i] == "@":
        j = i + 1
        while j < len(s) and (s[j].isalnum() or s[j] == "-"):
            j += 1
        tag = s[i + 1:j]
        if not tag or not tag[0].isalpha():
            raise ParseError("malformed language tag", line_no, s)
        return f'"{lexical}"@{tag}', j
    if s.startswith("^^", i):
        if i + 2 >= len(s) or s[i + 2] != "<":
            raise ParseError("datatype must be an IRI", line_no, s)
        dtype, j = _scan_iri(s, i + 2, line_no)
        return f'"{lexical}"^^<{dtype}>', j
    return f'"{lexical}"', i


def _scan_term(s: str, i: int, line_no: int):
    c = s[i]
    if c == "<":
        text, j = _scan_iri(s, i, line_no)
        return text, IRI, j
    if c == '"':
        text, j = _scan_literal(s, i, line_no)
        return text, LITERAL, j
    if c == "_" and s.startswith("_:", i):
        text, j = _scan_bnode(s, i, line_no)
        return text, BNODE, j
    raise ParseError(f"unexpected character {c!r} at column {i}", line_no, s)


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i] in " \t":
        i += 1
    return i


def parse_line(line: str, line_no: int = 0) -> RawTriple | None:
    """One statement line -> RawTriple; None for blank/comment lines."""
    i = _skip_ws(line, 0)
    if i >= len(line) or line[i] == "#":
        return None
    subject, kind, i = _scan_term(line, i, line_no)
    if kind == LITERAL:
        raise ParseError("literal cannot be a subject", line_no, line)
    i = _skip_ws(line, i)
    predicate, kind, i = _scan_term(line, i, line_no)
    if kind != IRI:
        raise ParseError("predicate must be an IRI", line_no, line)
    i = _skip_ws(line, i)
    obj, _, i = _scan_term(line, i, line_no)
    i = _skip_ws(line, i)
    if i >= len(line) or line[i] != ".":
        raise ParseError("statement not terminated by '.'", line_no, line)
    i = _skip_ws(line, i + 1)
    if i < len(line) and line[i] != "#":
        raise ParseError("trailing junk after '.'", line_no, line)
    return RawTriple(subject, predicate, obj)


def iter_triples(lines: Iterable, *, strict: bool = False,
                 errors: list | None = None) -> Iterator[RawTriple]:
    """Parse an iterable of text or bytes lines, skipping and reporting bad ones.

    Diagnostics are appended to `errors` when given; strict mode raises on
    the first malformed line instead.
    """
    for line_no, line in enumerate(lines, 1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                err = ParseError(f"invalid UTF-8 ({exc.reason})", line_no, repr(line))
                if strict:
                    raise err from None
                if errors is not None:
                    errors.append(err)
                continue
        line = line.rstrip("\r\n")
        try:
            triple = parse_line(line, line_no)
        except ParseError as err:
            if strict:
                raise
            if errors is not None:
                errors.append(err)
            continue
        if triple is not None:
            yield triple


def open_source(path: str, gzip_mode: str = "auto") -> io.BufferedIOBase:
    """Open an N-Triples file for binary reading, transparently gunzipping.

    gzip_mode: "auto" decides by the .gz suffix, "on"/"off" force it.
    """
    if gzip_mode not in ("auto", "on", "off"):
        raise ValueError(f"bad gzip mode {gzip_mode!r}")
    use_gzip = gzip_mode == "on" or (gzip_mode == "auto" and path.endswith(".gz"))
    return gzip.open(path, "rb") if use_gzip else open(path, "rb")


def iter_file(path: str, *, gzip_mode: str = "auto", strict: bool = False,
              errors: list | None = None) -> Iterator[RawTriple]:
    with open_source(path, gzip_mode) as src:
        yield from iter_triples(src, strict=strict, errors=errors)


# -- formatting (canonical output) -----------------------------------------


def _escape_literal(s: str) -> str:
    return (s.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r"))


def _escape_iri(s: str) -> str:
    out = []
    for c in s:
        if c in ' "{}|^`<>\\' or ord(c) <= 0x20:
            out.append(f"\\u{ord(c):04X}" if ord(c) <= 0xFFFF else f"\\U{ord(c):08X}")
        else:
            out.append(c)
    return "".join(out)


def format_term(term: str) -> str:
    """Canonical N-Triples spelling of a stored term."""
    if term.startswith('"'):
        end = term.rindex('"')
        lexical = term[1:end]
        suffix = term[end + 1:]
        if suffix.startswith("^^<") and suffix.endswith(">"):
            suffix = f"^^<{_escape_iri(suffix[3:-1])}>"
        return f'"{_escape_literal(lexical)}"{suffix}'
    if term.startswith("_:"):
        return term
    return f"<{_escape_iri(term)}>"


def format_triple(t: RawTriple) -> str:
    return (f"{format_term(t.subject)} {format_term(t.predicate)} "
            f"{format_term(t.object)} .")
