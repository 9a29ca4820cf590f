"""Bidirectional bridge between T2Math sentences and frame-logic clauses.

Forward direction: a sentence's math spans are replaced by the integers
1000, 1001, ... and the result is matched against restricted patterns.
Captured integers map back to span-derived ``var_`` identifiers which are
substituted into a clause template at ``#{n}`` references:

    pattern   \\d+ be an equivalence relation on \\d+
    template  #{1}:EquivalenceRelation[base_set->#{2}].

    "Let $\\sim$ be an equivalence relation on $S$."
        -> var_sim:EquivalenceRelation[base_set->var_S].

Patterns are not regular expressions. The restricted subset is: literal
characters, backslash-escaped punctuation, ``\\s+`` (flexible whitespace)
and the capture slots ``\\d+`` / ``\\w+`` (optionally parenthesized).
Slots match by maximal munch with no backtracking, which keeps matching
linear in the sentence length whatever the rule authors write.

Span subpatterns decompose the raw text inside a span (e.g. splitting
``x*x=e``); their captures continue the ``#{n}`` numbering after the
top-level slots and are substituted as raw text, so templates can build
identifiers like ``var_#{4}`` out of them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import BridgeError, FormulaError
from .logic import (
    Atom,
    Clause,
    Compound,
    Constant,
    Frame,
    Membership,
    Predicate,
    Term,
    Variable,
    parse_formula,
    parse_program,
    print_formula,
    print_term,
)
from .t2math import Sentence, sentence_from_text, strip_keyword_and_terminator

SPAN_BASE = 1000  # integer substitution starts here to dodge literal digits

_WORD_CHARS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_")
_TEMPLATE_REF = re.compile(r"#\{(\d+)\}")


# ---------------------------------------------------------------------------
# Restricted pattern matcher
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Element:
    kind: str  # lit | digits | word | ws
    text: str = ""


class Matcher:
    """Compiled restricted pattern: anchored full match, maximal munch."""

    def __init__(self, pattern: str, elements: list[_Element]):
        self.pattern = pattern
        self.elements = elements
        self.slots = sum(1 for e in elements if e.kind in ("digits", "word"))

    def match(self, text: str) -> list[str] | None:
        pos = 0
        captures: list[str] = []
        for el in self.elements:
            if el.kind == "lit":
                if not text.startswith(el.text, pos):
                    return None
                pos += len(el.text)
            elif el.kind == "ws":
                start = pos
                while pos < len(text) and text[pos].isspace():
                    pos += 1
                if pos == start:
                    return None
            else:
                chars = "0123456789" if el.kind == "digits" else _WORD_CHARS
                start = pos
                while pos < len(text) and text[pos] in chars:
                    pos += 1
                if pos == start:
                    return None
                captures.append(text[start:pos])
        if pos != len(text):
            return None
        return captures


def compile_pattern(pattern_text: str) -> Matcher:
    """Compile a restricted pattern; anything outside the subset raises
    E_PATTERN_UNSUPPORTED."""
    elements: list[_Element] = []
    literal: list[str] = []

    def flush() -> None:
        if literal:
            elements.append(_Element("lit", "".join(literal)))
            literal.clear()

    def unsupported(what: str, at: int) -> BridgeError:
        return BridgeError(
            "E_PATTERN_UNSUPPORTED",
            f"{what} is outside the restricted pattern subset",
            pattern=pattern_text,
            offset=at,
        )

    i, n = 0, len(pattern_text)
    while i < n:
        ch = pattern_text[i]
        if ch == "\\":
            if i + 1 >= n:
                raise unsupported("trailing backslash", i)
            nxt = pattern_text[i + 1]
            if nxt in "dsw":
                if i + 2 >= n or pattern_text[i + 2] != "+":
                    raise unsupported(f"'\\{nxt}' without '+'", i)
                flush()
                kind = {"d": "digits", "s": "ws", "w": "word"}[nxt]
                elements.append(_Element(kind))
                i += 3
                continue
            if nxt.isalnum():
                raise unsupported(f"escape '\\{nxt}'", i)
            literal.append(nxt)
            i += 2
            continue
        if ch == "(":
            m = re.match(r"\((\\[dw])\+\)", pattern_text[i:])
            if not m:
                raise unsupported("group syntax other than '(\\d+)'/'(\\w+)'", i)
            flush()
            elements.append(_Element("digits" if m.group(1) == "\\d" else "word"))
            i += m.end()
            continue
        if ch in ")*+?|[]{}^$":
            raise unsupported(f"metacharacter {ch!r}", i)
        literal.append(ch)
        i += 1
    flush()
    return Matcher(pattern_text, elements)


# ---------------------------------------------------------------------------
# Span substitution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpanEntry:
    raw: str
    var_name: str


@dataclass
class SpanMap:
    """Per-sentence map from substituted decimal literals to the original
    span text and the derived variable identifier."""

    entries: dict[str, SpanEntry] = field(default_factory=dict)

    def raw_for_var(self, identifier: str) -> str | None:
        for entry in self.entries.values():
            if entry.var_name == identifier:
                return entry.raw
        return None

    def merged_with(self, other: "SpanMap") -> "SpanMap":
        merged = dict(self.entries)
        offset = SPAN_BASE + len(merged)
        for k, entry in enumerate(other.entries.values()):
            merged[str(offset + k)] = entry
        return SpanMap(merged)

    def to_dict(self) -> dict:
        return {
            key: {"raw": e.raw, "var": e.var_name} for key, e in self.entries.items()
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpanMap":
        return cls(
            {key: SpanEntry(raw=v["raw"], var_name=v["var"]) for key, v in data.items()}
        )


def var_name_of(span_raw: str, index: int = 0, taken: set[str] | None = None) -> str:
    """Derive a ``var_`` identifier from raw span text: strip backslashes,
    dollars, braces and whitespace, keep word characters. An empty result
    falls back to ``var_x<index>``; collisions within a sentence get ``_2``,
    ``_3`` suffixes."""
    kept = "".join(ch for ch in span_raw if ch in _WORD_CHARS)
    base = f"var_{kept}" if kept else f"var_x{index}"
    if taken is None:
        return base
    name, k = base, 1
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    taken.add(name)
    return name


def substitute_spans(sentence: Sentence) -> tuple[str, SpanMap]:
    """Strip the section keyword and trailing terminator, then replace the
    k-th math span with the decimal literal 1000+k."""
    stripped, rel_start = strip_keyword_and_terminator(sentence)
    data = stripped.encode("utf-8")
    base = sentence.byte_range[0] + rel_start
    pieces: list[str] = []
    entries: dict[str, SpanEntry] = {}
    taken: set[str] = set()
    pos = 0
    for k, span in enumerate(sentence.spans):
        a = span.byte_range[0] - base
        b = span.byte_range[1] - base
        if a < 0 or b > len(data):
            continue  # span was inside the stripped keyword/terminator region
        key = str(SPAN_BASE + len(entries))
        pieces.append(data[pos:a].decode("utf-8"))
        pieces.append(key)
        entries[key] = SpanEntry(raw=span.raw, var_name=var_name_of(span.raw, k, taken))
        pos = b
    pieces.append(data[pos:].decode("utf-8"))
    return "".join(pieces), SpanMap(entries)


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReversePart:
    clause_pattern: str  # clause text with ?1, ?2, ... slot variables
    sentence_template: str  # text with #{n} references, usually inside $...$


@dataclass
class PatternRule:
    id: str
    pattern: str
    template: str
    section: str = "any"  # declaration | premise | conclusion | any
    span_subpatterns: dict[int, str] = field(default_factory=dict)
    examples: list[str] = field(default_factory=list)
    reverse: ReversePart | None = None

    def __post_init__(self) -> None:
        self._matcher = compile_pattern(self.pattern)
        self._subs = {
            slot: compile_pattern(p) for slot, p in sorted(self.span_subpatterns.items())
        }
        self._reverse_clause = (
            parse_formula(self.reverse.clause_pattern) if self.reverse else None
        )
        total = self._matcher.slots + sum(m.slots for m in self._subs.values())
        for ref in _TEMPLATE_REF.finditer(self.template):
            n = int(ref.group(1))
            if not 1 <= n <= total:
                raise BridgeError(
                    "E_TEMPLATE_SYNTAX",
                    f"template references capture #{{{n}}} but the rule has {total}",
                    rule_id=self.id,
                )
        for slot in self.span_subpatterns:
            if not 1 <= slot <= self._matcher.slots:
                raise BridgeError(
                    "E_PATTERN_UNSUPPORTED",
                    f"span subpattern for slot {slot} has no matching capture",
                    rule_id=self.id,
                )

    def matches_section(self, section: str | None) -> bool:
        return self.section == "any" or section is None or self.section == section

    def to_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "section": self.section,
            "pattern": self.pattern,
            "template": self.template,
            "examples": list(self.examples),
        }
        if self.span_subpatterns:
            out["span_subpatterns"] = {str(k): v for k, v in self.span_subpatterns.items()}
        if self.reverse:
            out["reverse"] = {
                "clause_pattern": self.reverse.clause_pattern,
                "sentence_template": self.reverse.sentence_template,
            }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PatternRule":
        reverse = None
        if data.get("reverse"):
            reverse = ReversePart(
                clause_pattern=data["reverse"]["clause_pattern"],
                sentence_template=data["reverse"]["sentence_template"],
            )
        return cls(
            id=data["id"],
            section=data.get("section", "any"),
            pattern=data["pattern"],
            template=data["template"],
            span_subpatterns={
                int(k): v for k, v in (data.get("span_subpatterns") or {}).items()
            },
            examples=list(data.get("examples", [])),
            reverse=reverse,
        )


# ---------------------------------------------------------------------------
# Translation results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Translated:
    clauses: tuple[Clause, ...]
    span_map: SpanMap
    rule_id: str


@dataclass(frozen=True)
class Candidate:
    rule_id: str
    clauses: tuple[Clause, ...]


@dataclass(frozen=True)
class Ambiguous:
    candidates: tuple[Candidate, ...]
    span_map: SpanMap


@dataclass(frozen=True)
class Unparsed:
    sentence: Sentence


TranslationResult = Translated | Ambiguous | Unparsed


def _instantiate(rule: PatternRule, captures: dict[int, str]) -> tuple[Clause, ...]:
    def repl(m: re.Match) -> str:
        return captures[int(m.group(1))]

    text = _TEMPLATE_REF.sub(repl, rule.template)
    try:
        clauses = parse_program(text)
    except FormulaError as exc:
        raise BridgeError(
            "E_TEMPLATE_SYNTAX",
            f"instantiated template is not a valid clause: {exc.message}",
            rule_id=rule.id,
            template=text,
        ) from exc
    return tuple(clauses)


def _try_rule(rule: PatternRule, text: str, span_map: SpanMap) -> tuple[Clause, ...] | None:
    top = rule._matcher.match(text)
    if top is None:
        return None
    captures: dict[int, str] = {}
    for idx, value in enumerate(top, start=1):
        entry = span_map.entries.get(value)
        captures[idx] = entry.var_name if entry else value
    next_ref = rule._matcher.slots + 1
    for slot, sub in rule._subs.items():
        raw = top[slot - 1]
        entry = span_map.entries.get(raw)
        inner = sub.match(entry.raw if entry else raw)
        if inner is None:
            return None
        for value in inner:
            captures[next_ref] = value
            next_ref += 1
    return _instantiate(rule, captures)


def apply_forward(rules: list[PatternRule], sentence: Sentence) -> TranslationResult:
    """Translate one sentence. Exactly one distinct clause output across the
    matching rules gives Translated; two or more give Ambiguous; none gives
    Unparsed. Rules producing identical clause sets count once."""
    text, span_map = substitute_spans(sentence)
    candidates: list[Candidate] = []
    seen_outputs: set[frozenset] = set()
    for rule in rules:
        if not rule.matches_section(sentence.section):
            continue
        clauses = _try_rule(rule, text, span_map)
        if clauses is None:
            continue
        key = frozenset(print_formula(c) for c in clauses)
        if key in seen_outputs:
            continue
        seen_outputs.add(key)
        candidates.append(Candidate(rule_id=rule.id, clauses=clauses))
    if not candidates:
        return Unparsed(sentence)
    if len(candidates) == 1:
        only = candidates[0]
        return Translated(clauses=only.clauses, span_map=span_map, rule_id=only.rule_id)
    return Ambiguous(candidates=tuple(candidates), span_map=span_map)


# ---------------------------------------------------------------------------
# Edit-time validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleOutcome:
    example: str
    status: str  # ok | no_match | ambiguous
    error: str | None = None
    clashing_rule_id: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"example": self.example, "status": self.status}
        if self.error:
            out["error"] = self.error
        if self.clashing_rule_id:
            out["clashing_rule_id"] = self.clashing_rule_id
        return out


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    outcomes: tuple[ExampleOutcome, ...]

    def first_error(self) -> ExampleOutcome | None:
        for o in self.outcomes:
            if o.status != "ok":
                return o
        return None

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "examples": [o.to_dict() for o in self.outcomes]}


def _output_of(rule: PatternRule, sentence: Sentence) -> frozenset | None:
    text, span_map = substitute_spans(sentence)
    if not rule.matches_section(sentence.section):
        return None
    clauses = _try_rule(rule, text, span_map)
    if clauses is None:
        return None
    return frozenset(print_formula(c) for c in clauses)


def validate_rule(existing_rules: list[PatternRule], new_rule: PatternRule) -> ValidationReport:
    """Edit-time check. Every example of the new rule must match the rule
    itself and must not match an existing rule with a different output; the
    registered examples of existing rules must likewise not start matching
    the new rule with a different output. Any failure rejects the rule."""
    if not new_rule.examples:
        return ValidationReport(
            accepted=False,
            outcomes=(
                ExampleOutcome(
                    example="", status="no_match", error="E_EXAMPLE_NO_MATCH"
                ),
            ),
        )
    outcomes: list[ExampleOutcome] = []
    for example in new_rule.examples:
        sentence = sentence_from_text(example)
        own = _output_of(new_rule, sentence)
        if own is None:
            outcomes.append(
                ExampleOutcome(example=example, status="no_match", error="E_EXAMPLE_NO_MATCH")
            )
            continue
        clash = None
        for rule in existing_rules:
            theirs = _output_of(rule, sentence)
            if theirs is not None and theirs != own:
                clash = rule.id
                break
        if clash:
            outcomes.append(
                ExampleOutcome(
                    example=example,
                    status="ambiguous",
                    error="E_EDIT_TIME_AMBIGUITY",
                    clashing_rule_id=clash,
                )
            )
        else:
            outcomes.append(ExampleOutcome(example=example, status="ok"))
    # The soundness guarantee needs the other direction too: an old example
    # must not become ambiguous because of the new rule.
    for rule in existing_rules:
        for example in rule.examples:
            sentence = sentence_from_text(example)
            theirs = _output_of(rule, sentence)
            ours = _output_of(new_rule, sentence)
            if theirs is not None and ours is not None and ours != theirs:
                outcomes.append(
                    ExampleOutcome(
                        example=example,
                        status="ambiguous",
                        error="E_EDIT_TIME_AMBIGUITY",
                        clashing_rule_id=rule.id,
                    )
                )
    accepted = all(o.status == "ok" for o in outcomes)
    return ValidationReport(accepted=accepted, outcomes=tuple(outcomes))


# ---------------------------------------------------------------------------
# Reverse bridge
# ---------------------------------------------------------------------------


def _match_term(pattern: Term, target: Term, binding: dict[str, Term]) -> bool:
    """One-way structural match; pattern variables bind, target terms are
    opaque (a target variable only matches itself)."""
    if isinstance(pattern, Variable):
        bound = binding.get(pattern.name)
        if bound is None:
            binding[pattern.name] = target
            return True
        return bound == target
    if isinstance(pattern, Constant):
        return pattern == target
    return (
        isinstance(target, Compound)
        and pattern.functor == target.functor
        and len(pattern.args) == len(target.args)
        and all(_match_term(p, t, binding) for p, t in zip(pattern.args, target.args))
    )


def _match_atom(pattern: Atom, target: Atom, binding: dict[str, Term]) -> bool:
    if isinstance(pattern, Predicate):
        return (
            isinstance(target, Predicate)
            and pattern.name == target.name
            and len(pattern.args) == len(target.args)
            and all(_match_term(p, t, binding) for p, t in zip(pattern.args, target.args))
        )
    if isinstance(pattern, Membership):
        return (
            isinstance(target, Membership)
            and pattern.cls == target.cls
            and _match_term(pattern.instance, target.instance, binding)
        )
    return (
        isinstance(target, Frame)
        and pattern.attribute == target.attribute
        and _match_term(pattern.instance, target.instance, binding)
        and _match_term(pattern.value, target.value, binding)
    )


def _match_clause(pattern: Clause, target: Clause) -> dict[str, Term] | None:
    if len(pattern.head) != len(target.head) or len(pattern.body) != len(target.body):
        return None
    binding: dict[str, Term] = {}
    for p, t in zip(pattern.head + pattern.body, target.head + target.body):
        if not _match_atom(p, t, binding):
            return None
    return binding


def _render_slot(term: Term, span_map: SpanMap | None) -> str:
    name = print_term(term)
    if span_map is not None:
        raw = span_map.raw_for_var(name)
        if raw is not None:
            return raw
    return name[4:] if name.startswith("var_") else name.lstrip("?")


def apply_reverse(
    rules: list[PatternRule], clause: Clause, span_map: SpanMap | None = None
) -> str:
    """Render a clause back to sentence text. The first registered reverse
    rule whose clause pattern matches wins; with no reverse rule the clause's
    canonical text is the fallback."""
    for rule in rules:
        if rule._reverse_clause is None:
            continue
        binding = _match_clause(rule._reverse_clause, clause)
        if binding is None:
            continue

        def repl(m: re.Match) -> str:
            term = binding.get(f"?{m.group(1)}")
            if term is None:
                return m.group(0)
            return _render_slot(term, span_map)

        return _TEMPLATE_REF.sub(repl, rule.reverse.sentence_template)
    return print_formula(clause)


# ---------------------------------------------------------------------------
# Rule sets
# ---------------------------------------------------------------------------


class RuleSet:
    """Ordered, immutable-snapshot rule collection. Registration validates
    and returns a new snapshot, so translations in flight keep their view."""

    def __init__(self, rules: tuple[PatternRule, ...] = ()):
        self.rules = tuple(rules)
        self._by_id = {r.id: r for r in self.rules}

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, rule_id: str) -> PatternRule | None:
        return self._by_id.get(rule_id)

    def with_rule(self, rule: PatternRule, validate: bool = True) -> "RuleSet":
        if rule.id in self._by_id:
            raise BridgeError("E_EDIT_TIME_AMBIGUITY", f"rule id {rule.id!r} already exists",
                              rule_id=rule.id)
        if validate:
            report = validate_rule(list(self.rules), rule)
            if not report.accepted:
                worst = report.first_error()
                raise BridgeError(
                    worst.error or "E_EXAMPLE_NO_MATCH",
                    f"rule {rule.id!r} rejected by example validation",
                    rule_id=rule.id,
                    report=report.to_dict(),
                )
        return RuleSet(self.rules + (rule,))

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.rules], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RuleSet":
        data = json.loads(text)
        return cls(tuple(PatternRule.from_dict(item) for item in data))
