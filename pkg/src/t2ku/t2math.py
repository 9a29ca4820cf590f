"""Tokenizer and parser for T2Math proposition documents.

A T2Math document has up to three sections, in this fixed order:

    Let <declarations separated by top-level commas>
    Suppose that <premises separated by top-level periods/semicolons>
    Prove that <conclusions separated by top-level periods/semicolons>

``Prove that`` is mandatory; the other two sections are optional. Math
spans are delimited by dollar signs and are opaque at this level: the
separators inside ``$...$`` never split sentences. ``\\$`` is a literal
dollar, inside and outside math spans.

All offsets in this module are byte offsets into the UTF-8 encoding of the
source. Every delimiter the scanner cares about is ASCII, so a multi-byte
character can never be split across spans.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import T2MathError

SECTION_KEYWORDS = (
    ("Let", "declaration"),
    ("Suppose that", "premise"),
    ("Prove that", "conclusion"),
)
KEYWORD_TEXTS = tuple(k for k, _ in SECTION_KEYWORDS)
KEYWORD_SECTION = dict(SECTION_KEYWORDS)

# Sentence separators, per section kind.
DECLARATION_SEPARATORS = frozenset(b",")
STATEMENT_SEPARATORS = frozenset(b".;")
PUNCTUATION_BYTES = frozenset(b".,;")


@dataclass(frozen=True)
class MathSpan:
    """One ``$...$`` region. ``raw`` excludes the delimiters; ``byte_range``
    covers the whole region including both dollars."""

    raw: str
    byte_range: tuple[int, int]


@dataclass(frozen=True)
class ClassifiedSpan:
    byte_range: tuple[int, int]
    kind: str  # keyword | math | text | punctuation


@dataclass(frozen=True)
class Sentence:
    text: str
    spans: tuple[MathSpan, ...]
    section: str | None  # declaration | premise | conclusion | None when standalone
    byte_range: tuple[int, int] = (0, 0)  # into the originating source


@dataclass(frozen=True)
class Proposition:
    declarations: tuple[Sentence, ...]
    premises: tuple[Sentence, ...]
    conclusions: tuple[Sentence, ...]
    source: str

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return self.declarations + self.premises + self.conclusions

    def to_dict(self) -> dict:
        def sent(s: Sentence) -> dict:
            return {
                "text": s.text,
                "section": s.section,
                "byte_range": list(s.byte_range),
                "spans": [{"raw": m.raw, "byte_range": list(m.byte_range)} for m in s.spans],
            }

        return {
            "declarations": [sent(s) for s in self.declarations],
            "premises": [sent(s) for s in self.premises],
            "conclusions": [sent(s) for s in self.conclusions],
        }


@dataclass
class _Scan:
    """Raw scan of a document: math spans plus top-level single-byte marks."""

    data: bytes
    math: list[tuple[int, int]] = field(default_factory=list)
    punctuation: list[int] = field(default_factory=list)
    keywords: list[tuple[int, int, str]] = field(default_factory=list)


def _is_line_leading(data: bytes, pos: int) -> bool:
    """True when only whitespace separates ``pos`` from the preceding newline
    (or the document start)."""
    i = pos - 1
    while i >= 0:
        b = data[i]
        if b == 0x0A:
            return True
        if chr(b) not in (" ", "\t", "\r"):
            return False
        i -= 1
    return True


def _keyword_at(data: bytes, pos: int) -> str | None:
    for kw in ("Suppose that", "Prove that", "Let"):
        enc = kw.encode()
        end = pos + len(enc)
        if data[pos:end] == enc:
            # Require a separator after the keyword so e.g. "Lettuce" is text.
            if end == len(data) or chr(data[end]).isspace():
                return kw
    return None


def _scan(source: str) -> _Scan:
    data = source.encode("utf-8")
    scan = _Scan(data=data)
    i, n = 0, len(data)
    in_math = False
    math_start = -1
    while i < n:
        b = data[i]
        if b == 0x5C and i + 1 < n:  # backslash escapes the next byte
            i += 2
            continue
        if b == 0x24:  # $
            if in_math:
                scan.math.append((math_start, i + 1))
                in_math = False
            else:
                in_math = True
                math_start = i
            i += 1
            continue
        if not in_math:
            if b in PUNCTUATION_BYTES:
                scan.punctuation.append(i)
            elif _is_line_leading(data, i):
                kw = _keyword_at(data, i)
                if kw is not None:
                    scan.keywords.append((i, i + len(kw.encode()), kw))
                    i += len(kw.encode())
                    continue
        i += 1
    if in_math:
        raise T2MathError(
            "E_UNTERMINATED_MATH",
            "opening dollar sign has no closing dollar sign",
            offset=math_start,
        )
    return scan


def tokenize(source: str) -> list[ClassifiedSpan]:
    """Classify every byte of ``source`` into keyword/math/text/punctuation
    spans. The spans tile the document: disjoint and covering every byte."""
    scan = _scan(source)
    n = len(scan.data)
    marks: list[tuple[int, int, str]] = []
    marks.extend((a, b, "math") for a, b in scan.math)
    marks.extend((p, p + 1, "punctuation") for p in scan.punctuation)
    marks.extend((a, b, "keyword") for a, b, _ in scan.keywords)
    marks.sort()
    out: list[ClassifiedSpan] = []
    pos = 0
    for a, b, kind in marks:
        if a > pos:
            out.append(ClassifiedSpan((pos, a), "text"))
        out.append(ClassifiedSpan((a, b), kind))
        pos = b
    if pos < n:
        out.append(ClassifiedSpan((pos, n), "text"))
    return out


def _math_spans_between(scan: _Scan, start: int, end: int) -> tuple[MathSpan, ...]:
    spans = []
    for a, b in scan.math:
        if a >= start and b <= end:
            raw = scan.data[a + 1 : b - 1].decode("utf-8")
            spans.append(MathSpan(raw=raw, byte_range=(a, b)))
    return tuple(spans)


def _trim(data: bytes, start: int, end: int) -> tuple[int, int]:
    while start < end and chr(data[start]).isspace():
        start += 1
    while end > start and chr(data[end - 1]).isspace():
        end -= 1
    return start, end


def _split_section(
    scan: _Scan, section: str, start: int, end: int, separators: frozenset
) -> list[Sentence]:
    """Cut [start, end) at top-level separator bytes; each sentence keeps its
    trailing separator. Whitespace-only pieces are dropped."""
    cuts = [p for p in scan.punctuation if start <= p < end and scan.data[p] in separators]
    sentences = []
    pos = start
    for cut in cuts + [end - 1]:
        seg_end = min(cut + 1, end)
        a, b = _trim(scan.data, pos, seg_end)
        pos = seg_end
        if a >= b:
            continue
        text = scan.data[a:b].decode("utf-8")
        stripped = text.rstrip(".,; \t\n\r")
        if not stripped or _only_keyword(stripped):
            continue
        sentences.append(
            Sentence(
                text=text,
                spans=_math_spans_between(scan, a, b),
                section=section,
                byte_range=(a, b),
            )
        )
    return sentences


def _only_keyword(text: str) -> bool:
    return text.strip() in KEYWORD_TEXTS


def parse(source: str) -> Proposition:
    """Parse a full T2Math document into a Proposition.

    Raises E_NO_CONCLUSION when the ``Prove that`` section is missing or
    empty, E_SECTION_ORDER when sections repeat or appear out of order, and
    propagates E_UNTERMINATED_MATH from the scanner.
    """
    scan = _scan(source)
    order = {"Let": 0, "Suppose that": 1, "Prove that": 2}
    seen: list[str] = []
    for _, _, kw in scan.keywords:
        if kw in seen:
            raise T2MathError("E_SECTION_ORDER", f"repeated section keyword {kw!r}", keyword=kw)
        if seen and order[kw] < order[seen[-1]]:
            raise T2MathError(
                "E_SECTION_ORDER",
                f"section {kw!r} may not follow {seen[-1]!r}",
                keyword=kw,
            )
        seen.append(kw)
    if "Prove that" not in seen:
        raise T2MathError("E_NO_CONCLUSION", "document has no 'Prove that' section")
    if scan.keywords:
        head, _ = _trim(scan.data, 0, scan.keywords[0][0])
        if head < scan.keywords[0][0]:
            raise T2MathError(
                "E_SECTION_ORDER",
                "content before the first section keyword",
                offset=head,
            )

    sections: dict[str, list[Sentence]] = {"declaration": [], "premise": [], "conclusion": []}
    bounds = [kw_start for kw_start, _, _ in scan.keywords] + [len(scan.data)]
    for idx, (kw_start, _, kw) in enumerate(scan.keywords):
        section = KEYWORD_SECTION[kw]
        seps = DECLARATION_SEPARATORS if section == "declaration" else STATEMENT_SEPARATORS
        sections[section] = _split_section(scan, section, kw_start, bounds[idx + 1], seps)

    if not sections["conclusion"]:
        raise T2MathError("E_NO_CONCLUSION", "'Prove that' section contains no sentence")
    return Proposition(
        declarations=tuple(sections["declaration"]),
        premises=tuple(sections["premise"]),
        conclusions=tuple(sections["conclusion"]),
        source=source,
    )


def sentence_from_text(text: str, section: str | None = None) -> Sentence:
    """Build a standalone Sentence from raw text (rule examples, ad-hoc
    translation). The section is inferred from a leading keyword when not
    given explicitly."""
    scan = _scan(text)
    if section is None:
        stripped = text.lstrip()
        for kw, sec in SECTION_KEYWORDS:
            if stripped.startswith(kw) and (
                len(stripped) == len(kw) or stripped[len(kw)].isspace()
            ):
                section = sec
                break
    a, b = _trim(scan.data, 0, len(scan.data))
    return Sentence(
        text=scan.data[a:b].decode("utf-8"),
        spans=_math_spans_between(scan, a, b),
        section=section,
        byte_range=(a, b),
    )


def strip_keyword_and_terminator(sentence: Sentence) -> tuple[str, int]:
    """Remove a leading section keyword and one trailing terminator from the
    sentence text. Returns the stripped text and the byte offset of its start
    relative to ``sentence.text``."""
    data = sentence.text.encode("utf-8")
    start, end = 0, len(data)
    while start < end and chr(data[start]).isspace():
        start += 1
    kw = _keyword_at(data, start)
    if kw is not None:
        start += len(kw.encode())
    while end > start and chr(data[end - 1]).isspace():
        end -= 1
    if end > start and data[end - 1] in PUNCTUATION_BYTES:
        # Math regions always end with a dollar, so a trailing separator byte
        # is necessarily outside every span.
        end -= 1
    while end > start and chr(data[end - 1]).isspace():
        end -= 1
    while start < end and chr(data[start]).isspace():
        start += 1
    return data[start:end].decode("utf-8"), start
