"""Frame-logic clause model: terms, atoms, clauses, and the shared-namespace
symbol registry.

The textual syntax is a small Horn fragment with frame molecules:

    p(a, f(b)).
    head(?X) :- body1(?X), body2(?X, c).
    ?P:nonabelian_group[order->8].
    falsum :- p(?X), q(?X).

A molecule ``t:C[a1->v1, a2->v2]`` is the conjunction of one membership atom
``t:C`` and one attribute frame per arrow. In clause bodies molecules expand
to flat atom lists; in a clause head the grouping is kept so the clause
prints back byte-exactly.

Variables are written ``?name`` or with the ``var_`` prefix (the form the
sentence bridge emits). Everything else is a constant, class, attribute,
predicate, or functor; all of those share one namespace tracked by
``SymbolRegistry``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import FormulaError

FALSUM = "falsum"

_IDENT_RE = re.compile(r"[A-Za-z0-9_]+")


def is_variable_name(name: str) -> bool:
    return name.startswith("?") or name.startswith("var_")


# ---------------------------------------------------------------------------
# Terms and atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str  # surface form, e.g. "?P" or "var_sim"


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple


Term = Variable | Constant | Compound


@dataclass(frozen=True)
class Predicate:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Membership:
    instance: Term
    cls: str


@dataclass(frozen=True)
class Frame:
    instance: Term
    attribute: str
    value: Term


Atom = Predicate | Membership | Frame


@dataclass(frozen=True)
class Clause:
    """``head :- body`` with an empty body for facts.

    ``head`` holds one atom in the common case. Molecule syntax produces a
    multi-atom head (one membership plus attribute frames over a single
    instance term); the grouping is preserved so printing is exact. A
    constraint has the empty head tuple and prints as ``falsum``.
    """

    head: tuple  # tuple of Atom; empty tuple means falsum
    body: tuple = ()
    id: str | None = None
    provenance: str | None = None

    @property
    def is_constraint(self) -> bool:
        return not self.head

    @property
    def is_fact(self) -> bool:
        return not self.body

    def same_formula(self, other: "Clause") -> bool:
        return self.head == other.head and self.body == other.body


def term_is_ground(t: Term) -> bool:
    if isinstance(t, Variable):
        return False
    if isinstance(t, Compound):
        return all(term_is_ground(a) for a in t.args)
    return True


def atom_is_ground(a: Atom) -> bool:
    return all(term_is_ground(t) for t in _atom_terms(a))


def _atom_terms(a: Atom) -> tuple:
    if isinstance(a, Predicate):
        return a.args
    if isinstance(a, Membership):
        return (a.instance,)
    return (a.instance, a.value)


def term_variables(t: Term, acc: set | None = None) -> set:
    acc = set() if acc is None else acc
    if isinstance(t, Variable):
        acc.add(t.name)
    elif isinstance(t, Compound):
        for a in t.args:
            term_variables(a, acc)
    return acc


def atom_variables(a: Atom) -> set:
    acc: set = set()
    for t in _atom_terms(a):
        term_variables(t, acc)
    return acc


def clause_variables(c: Clause) -> set:
    acc: set = set()
    for a in c.head + c.body:
        acc |= atom_variables(a)
    return acc


def term_depth(t: Term) -> int:
    if isinstance(t, Compound):
        return 1 + max(term_depth(a) for a in t.args)
    return 0


def range_restriction_error(c: Clause) -> str | None:
    """Return a description when the clause violates range restriction:
    facts must have ground heads, and a rule's head variables must all occur
    in its body. Constraints are exempt."""
    if c.is_constraint:
        return None
    if c.is_fact:
        for a in c.head:
            if not atom_is_ground(a):
                return f"fact head is not ground: {print_atom(a)}"
        return None
    body_vars: set = set()
    for a in c.body:
        body_vars |= atom_variables(a)
    for a in c.head:
        loose = atom_variables(a) - body_vars
        if loose:
            return f"head variables {sorted(loose)} do not occur in the body"
    return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> FormulaError:
        return FormulaError("E_SYNTAX", message, offset=self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, s: str) -> bool:
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str) -> None:
        if not self.eat(s):
            raise self.error(f"expected {s!r}")

    def ident(self) -> str:
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected an identifier")
        self.pos = m.end()
        return m.group()


class _ArityTracker:
    """Catches one name being used at two arities inside a single parse."""

    def __init__(self) -> None:
        self.seen: dict[str, int] = {}

    def check(self, name: str, arity: int, reader: _Reader) -> None:
        prev = self.seen.setdefault(name, arity)
        if prev != arity:
            raise FormulaError(
                "E_ARITY_CLASH",
                f"{name!r} used with arity {arity} after arity {prev}",
                offset=reader.pos,
                identifier=name,
            )


def _parse_term(r: _Reader, arities: _ArityTracker) -> Term:
    r.skip_ws()
    if r.eat("?"):
        name = "?" + r.ident()
        return Variable(name)
    name = r.ident()
    if r.peek() == "(":
        args = _parse_args(r, arities)
        arities.check(name, len(args), r)
        return Compound(name, tuple(args))
    if is_variable_name(name):
        return Variable(name)
    return Constant(name)


def _parse_args(r: _Reader, arities: _ArityTracker) -> list:
    r.expect("(")
    args = [_parse_term(r, arities)]
    r.skip_ws()
    while r.eat(","):
        args.append(_parse_term(r, arities))
        r.skip_ws()
    r.expect(")")
    return args


def _parse_molecule_or_atom(r: _Reader, arities: _ArityTracker) -> list:
    """One body item: a predicate atom or a frame molecule. Returns the flat
    atom list the item denotes."""
    r.skip_ws()
    start = r.pos
    term = _parse_term(r, arities)
    r.skip_ws()
    atoms: list = []
    if r.peek() == ":" and not r.text.startswith(":-", r.pos):
        r.expect(":")
        r.skip_ws()
        cls = r.ident()
        if is_variable_name(cls):
            raise r.error("class position requires a constant identifier")
        atoms.append(Membership(term, cls))
        r.skip_ws()
    if r.peek() == "[":
        r.expect("[")
        while True:
            r.skip_ws()
            attr = r.ident()
            if is_variable_name(attr):
                raise r.error("attribute position requires a constant identifier")
            r.skip_ws()
            r.expect("->")
            value = _parse_term(r, arities)
            atoms.append(Frame(term, attr, value))
            r.skip_ws()
            if not r.eat(","):
                break
        r.expect("]")
    if atoms:
        return atoms
    # Plain atom: the parsed term must be a bare name or a compound.
    if isinstance(term, Compound):
        arities.check(term.functor, len(term.args), r)
        return [Predicate(term.functor, term.args)]
    if isinstance(term, Constant):
        return [Predicate(term.name, ())]
    r.pos = start
    raise r.error("a variable alone is not an atom")


def _parse_clause(r: _Reader, arities: _ArityTracker) -> Clause:
    r.skip_ws()
    start = r.pos
    if r.eat(FALSUM):
        nxt = r.peek()
        if nxt and (nxt.isalnum() or nxt == "_"):
            r.pos = start  # falsum was a prefix of a longer identifier
            head: tuple = tuple(_parse_molecule_or_atom(r, arities))
        else:
            head = ()
    else:
        head = tuple(_parse_molecule_or_atom(r, arities))
    r.skip_ws()
    body: list = []
    if r.eat(":-"):
        while True:
            body.extend(_parse_molecule_or_atom(r, arities))
            r.skip_ws()
            if not r.eat(","):
                break
    r.skip_ws()
    r.expect(".")
    clause = Clause(head=head, body=tuple(body))
    if clause.is_constraint and clause.is_fact:
        raise FormulaError("E_SYNTAX", "a falsum fact is forbidden", offset=start)
    if FALSUM in symbols_of(clause) or any(
        isinstance(a, Predicate) and a.name == FALSUM for a in clause.head + clause.body
    ):
        raise FormulaError(
            "E_SYNTAX", "falsum is reserved for the bare constraint head", offset=start
        )
    _check_head_shape(clause, r)
    return clause


def _check_head_shape(clause: Clause, r: _Reader) -> None:
    if len(clause.head) <= 1:
        return
    first = clause.head[0]
    rest = clause.head[1:]
    instance = first.instance if isinstance(first, (Membership, Frame)) else None
    ok = instance is not None and all(
        isinstance(a, Frame) and a.instance == instance for a in rest
    )
    if not ok:
        raise r.error("multi-atom heads must form one frame molecule")


def parse_formula(text: str) -> Clause:
    """Parse one clause. The trailing period is required."""
    r = _Reader(text)
    arities = _ArityTracker()
    clause = _parse_clause(r, arities)
    r.skip_ws()
    if r.pos != len(r.text):
        raise r.error("trailing content after clause")
    return clause


def parse_program(text: str) -> list[Clause]:
    """Parse a sequence of clauses; ``#``-prefixed lines are comments."""
    stripped = "\n".join(
        line for line in text.splitlines() if not line.lstrip().startswith("#")
    )
    r = _Reader(stripped)
    arities = _ArityTracker()
    clauses = []
    while True:
        r.skip_ws()
        if r.pos == len(r.text):
            return clauses
        clauses.append(_parse_clause(r, arities))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_term(t: Term) -> str:
    if isinstance(t, Variable):
        return t.name
    if isinstance(t, Constant):
        return t.name
    return f"{t.functor}({','.join(print_term(a) for a in t.args)})"


def print_atom(a: Atom) -> str:
    if isinstance(a, Predicate):
        if not a.args:
            return a.name
        return f"{a.name}({','.join(print_term(t) for t in a.args)})"
    if isinstance(a, Membership):
        return f"{print_term(a.instance)}:{a.cls}"
    return f"{print_term(a.instance)}[{a.attribute}->{print_term(a.value)}]"


def _print_molecule_run(atoms: list) -> str:
    """Render a membership-plus-frames run over one instance term."""
    first = atoms[0]
    if isinstance(first, Membership):
        text = f"{print_term(first.instance)}:{first.cls}"
        frames = atoms[1:]
    else:
        text = print_term(first.instance)
        frames = atoms
    if frames:
        inner = ", ".join(f"{f.attribute}->{print_term(f.value)}" for f in frames)
        text += f"[{inner}]"
    return text


def _coalesce(atoms: tuple) -> list[str]:
    """Group flat atoms back into molecule runs for printing. Greedy and
    order-preserving, so printing then parsing restores the same flat list."""
    out: list[str] = []
    i = 0
    while i < len(atoms):
        a = atoms[i]
        if isinstance(a, Predicate):
            out.append(print_atom(a))
            i += 1
            continue
        run = [a]
        j = i + 1
        while (
            j < len(atoms)
            and isinstance(atoms[j], Frame)
            and atoms[j].instance == a.instance
        ):
            run.append(atoms[j])
            j += 1
        out.append(_print_molecule_run(run))
        i = j
    return out


def print_formula(c: Clause) -> str:
    """Canonical clause text: molecule runs re-formed, ``", "`` between body
    items, no space inside argument lists, trailing period."""
    head = FALSUM if c.is_constraint else ", ".join(_coalesce(c.head))
    if c.is_fact:
        return f"{head}."
    return f"{head} :- {', '.join(_coalesce(c.body))}."


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------


def _term_symbols(t: Term, acc: set) -> None:
    if isinstance(t, Constant):
        acc.add(t.name)
    elif isinstance(t, Compound):
        acc.add(t.functor)
        for a in t.args:
            _term_symbols(a, acc)


def symbols_of(c: Clause) -> set[str]:
    """All predicate/class/attribute/constant/functor names in the clause;
    variables and the reserved falsum head are excluded."""
    acc: set = set()
    for a in c.head + c.body:
        if isinstance(a, Predicate):
            acc.add(a.name)
        elif isinstance(a, Membership):
            acc.add(a.cls)
        else:
            acc.add(a.attribute)
        for t in _atom_terms(a):
            _term_symbols(t, acc)
    return acc


def clause_symbol_kinds(c: Clause) -> list[tuple[str, str, int | None]]:
    """(identifier, kind, arity) for every symbol occurrence in the clause,
    the way the registry should record them."""
    out: list[tuple[str, str, int | None]] = []

    def walk_term(t: Term) -> None:
        if isinstance(t, Constant):
            out.append((t.name, "constant", None))
        elif isinstance(t, Compound):
            out.append((t.functor, "functor", len(t.args)))
            for a in t.args:
                walk_term(a)

    for a in c.head + c.body:
        if isinstance(a, Predicate):
            out.append((a.name, "predicate", len(a.args)))
        elif isinstance(a, Membership):
            out.append((a.cls, "class", None))
        else:
            out.append((a.attribute, "attribute", None))
        for t in _atom_terms(a):
            walk_term(t)
    return out


@dataclass
class SymbolEntry:
    identifier: str
    kind: str  # predicate | class | attribute | constant | functor
    arity: int | None
    doc: str = ""
    co_occurrence: dict[str, int] = field(default_factory=dict)


class SymbolRegistry:
    """Single shared namespace: one (kind, arity) per identifier.

    Co-occurrence counts accumulate as clauses are asserted; they back both
    the editor search and the relevance ranking's 2-hop reachability.
    """

    def __init__(self) -> None:
        self.entries: dict[str, SymbolEntry] = {}

    def __contains__(self, identifier: str) -> bool:
        return identifier in self.entries

    def register(
        self, identifier: str, kind: str, arity: int | None = None, doc: str = ""
    ) -> SymbolEntry:
        if not identifier:
            raise FormulaError("E_SYNTAX", "empty identifier")
        entry = self.entries.get(identifier)
        if entry is not None:
            if entry.kind != kind or entry.arity != arity:
                raise FormulaError(
                    "E_NAMESPACE_CLASH",
                    f"{identifier!r} already registered as {entry.kind}"
                    f"/{entry.arity}, not {kind}/{arity}",
                    identifier=identifier,
                )
            if doc and not entry.doc:
                entry.doc = doc
            return entry
        entry = SymbolEntry(identifier=identifier, kind=kind, arity=arity, doc=doc)
        self.entries[identifier] = entry
        return entry

    def register_clause(self, clause: Clause) -> None:
        """Register every symbol of the clause and update co-occurrence."""
        for identifier, kind, arity in clause_symbol_kinds(clause):
            self.register(identifier, kind, arity)
        names = sorted(symbols_of(clause))
        for a in names:
            counts = self.entries[a].co_occurrence
            for b in names:
                if a != b:
                    counts[b] = counts.get(b, 0) + 1

    def neighbors(self, identifier: str, limit: int = 8) -> list[str]:
        entry = self.entries.get(identifier)
        if entry is None:
            return []
        ranked = sorted(entry.co_occurrence.items(), key=lambda kv: (-kv[1], kv[0]))
        return [name for name, _ in ranked[:limit]]

    def search(self, query: str, limit: int = 20) -> list[dict]:
        """Case-insensitive substring search over identifiers and docs,
        ranked exact > prefix > substring > doc hit."""
        q = query.lower()
        hits = []
        for name in sorted(self.entries):
            entry = self.entries[name]
            lower = name.lower()
            if not q:
                rank = 3
            elif lower == q:
                rank = 0
            elif lower.startswith(q):
                rank = 1
            elif q in lower:
                rank = 2
            elif q in entry.doc.lower():
                rank = 3
            else:
                continue
            hits.append((rank, name, entry))
        hits.sort(key=lambda h: (h[0], h[1]))
        return [
            {
                "identifier": name,
                "kind": entry.kind,
                "arity": entry.arity,
                "doc": entry.doc,
                "neighbors": self.neighbors(name),
            }
            for _, name, entry in hits[:limit]
        ]
