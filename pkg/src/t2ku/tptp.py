"""TPTP first-order-form export with relevance-based axiom selection.

Clauses map to FOF formulas the obvious way: membership becomes a unary
predicate, an attribute frame a binary one, a rule a universally closed
implication. A whole goal becomes a single conjecture

    fof(goal, conjecture, (h1 & ... & hk) => c).

Axiom selection is symbol-triggered: a symbol triggers a clause when its
global occurrence count is within ``tolerance`` times the rarest symbol of
that clause, and selection alternates trigger/collect hops outward from the
goal symbols. Rare symbols therefore pull in their defining clauses while
ubiquitous ones stop expanding, which is what keeps exported problems small
enough for external provers.

``validate_fof`` parses the emitted subset back and is the closure check on
every export.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import T2kuError
from .kb import KnowledgeBase
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
    symbols_of,
)


@dataclass(frozen=True)
class SelectionParams:
    max_axioms: int = 64
    max_hops: int = 3
    tolerance: float = 1.5

    def __post_init__(self) -> None:
        if self.max_axioms < 1 or self.max_hops < 1 or self.tolerance < 1:
            raise T2kuError("E_LIMITS", "selection parameters out of range")


@dataclass(frozen=True)
class FofFormula:
    role: str  # axiom | hypothesis | conjecture
    name: str
    body: str

    def render(self) -> str:
        return f"fof({self.name}, {self.role}, {self.body})."


class MangleTable:
    """Injective source-identifier to TPTP-name mapping, per export."""

    def __init__(self) -> None:
        self.forward: dict[str, str] = {}
        self.taken: set[str] = set()

    def mangle(self, identifier: str, role: str = "constant") -> str:
        if identifier in self.forward:
            return self.forward[identifier]
        if identifier.isdigit():
            base = f"n{identifier}"
        else:
            base = identifier[0].lower() + identifier[1:]
            base = re.sub(r"[^A-Za-z0-9_]", "_", base)
            if base[0].isdigit() or base[0] == "_":
                base = "p_" + base
        name, k = base, 1
        while name in self.taken:
            k += 1
            name = f"{base}_{k}"
        self.forward[identifier] = name
        self.taken.add(name)
        return name

    def mangle_variable(self, name: str) -> str:
        stripped = name.lstrip("?")
        stripped = re.sub(r"[^A-Za-z0-9_]", "_", stripped) or "X"
        return stripped[0].upper() + stripped[1:]


def _term_to_fof(t: Term, table: MangleTable, vars_seen: dict[str, str]) -> str:
    if isinstance(t, Variable):
        if t.name not in vars_seen:
            candidate = table.mangle_variable(t.name)
            while candidate in vars_seen.values():
                candidate += "0"
            vars_seen[t.name] = candidate
        return vars_seen[t.name]
    if isinstance(t, Constant):
        return table.mangle(t.name)
    args = ", ".join(_term_to_fof(a, table, vars_seen) for a in t.args)
    return f"{table.mangle(t.functor, 'functor')}({args})"


def _atom_to_fof(a: Atom, table: MangleTable, vars_seen: dict[str, str]) -> str:
    if isinstance(a, Predicate):
        if not a.args:
            return table.mangle(a.name, "predicate")
        args = ", ".join(_term_to_fof(t, table, vars_seen) for t in a.args)
        return f"{table.mangle(a.name, 'predicate')}({args})"
    if isinstance(a, Membership):
        return f"{table.mangle(a.cls, 'class')}({_term_to_fof(a.instance, table, vars_seen)})"
    return (
        f"{table.mangle(a.attribute, 'attribute')}"
        f"({_term_to_fof(a.instance, table, vars_seen)}, "
        f"{_term_to_fof(a.value, table, vars_seen)})"
    )


def clause_to_fof_body(clause: Clause, table: MangleTable) -> str:
    """The quantified formula text for one clause."""
    vars_seen: dict[str, str] = {}
    heads = [_atom_to_fof(a, table, vars_seen) for a in clause.head] or ["$false"]
    bodies = [_atom_to_fof(a, table, vars_seen) for a in clause.body]
    head = heads[0] if len(heads) == 1 else "(" + " & ".join(heads) + ")"
    if not bodies:
        core = head
    else:
        antecedent = " & ".join(bodies)
        core = f"({antecedent}) => {head}"
    if vars_seen:
        quantified = ", ".join(sorted(set(vars_seen.values())))
        return f"! [{quantified}] : ({core})"
    return core


def to_fof(
    clause: Clause,
    table: MangleTable | None = None,
    name: str | None = None,
    role: str = "axiom",
    seq: int = 1,
) -> FofFormula:
    table = table or MangleTable()
    if name is None:
        if clause.is_constraint:
            lead = "falsum"
        else:
            first = clause.head[0]
            lead = (
                first.name
                if isinstance(first, Predicate)
                else first.cls if isinstance(first, Membership) else first.attribute
            )
        # Formula names are fully lowered snake case, unlike predicate names
        # which only lower their first letter.
        name = f"ax_{table.mangle(lead).lower()}_{seq}"
    return FofFormula(role=role, name=name, body=clause_to_fof_body(clause, table))


def select_axioms(
    goal_symbols: set[str], kb: KnowledgeBase, params: SelectionParams | None = None
) -> list[str]:
    """Symbol-trigger selection. Returns clause ids ordered earliest hop
    first, ties by ascending id, truncated to ``max_axioms``."""
    params = params or SelectionParams()
    occ: dict[str, int] = {}
    clause_syms: dict[str, set[str]] = {}
    for cid, clause in kb.clauses.items():
        syms = symbols_of(clause)
        clause_syms[cid] = syms
        for s in syms:
            occ[s] = occ.get(s, 0) + 1

    def triggers(symbol: str, cid: str) -> bool:
        syms = clause_syms[cid]
        if symbol not in syms:
            return False
        rarest = min(occ[s] for s in syms)
        return occ[symbol] <= params.tolerance * rarest

    selected: dict[str, int] = {}  # clause id -> hop
    frontier = {s for s in goal_symbols if s in occ}
    for hop in range(1, params.max_hops + 1):
        if not frontier:
            break
        new_ids = []
        for cid in clause_syms:
            if cid in selected:
                continue
            if any(triggers(s, cid) for s in frontier):
                selected[cid] = hop
                new_ids.append(cid)
        frontier = set()
        for cid in new_ids:
            frontier |= clause_syms[cid]
    ordered = sorted(selected, key=lambda cid: (selected[cid], cid))
    return ordered[: params.max_axioms]


def export_problem(goal, kb: KnowledgeBase, params: SelectionParams | None = None) -> str:
    """Render a goal plus relevance-selected axioms as a TPTP document."""
    params = params or SelectionParams()
    table = MangleTable()
    selected = select_axioms(goal.symbols(), kb, params)
    lines = [
        "% t2ku export",
        f"% axioms selected: {len(selected)} of {len(kb.clauses)}"
        f" (max_axioms={params.max_axioms}, max_hops={params.max_hops},"
        f" tolerance={params.tolerance})",
    ]
    for seq, cid in enumerate(selected, start=1):
        lines.append(to_fof(kb.clauses[cid], table, role="axiom", seq=seq).render())
    hyp_bodies = [clause_to_fof_body(h, table) for h in goal.hypotheses]
    conc_vars: dict[str, str] = {}
    conc_bodies = [_atom_to_fof(a, table, conc_vars) for a in goal.conclusions]
    conclusion = conc_bodies[0] if len(conc_bodies) == 1 else "(" + " & ".join(conc_bodies) + ")"
    if hyp_bodies:
        wrapped = [b if _is_atomic(b) else f"({b})" for b in hyp_bodies]
        body = f"({' & '.join(wrapped)}) => {conclusion}"
    else:
        body = conclusion
    lines.append(FofFormula(role="conjecture", name="goal", body=body).render())
    return "\n".join(lines) + "\n"


def _is_atomic(body: str) -> bool:
    return re.fullmatch(r"[a-z][A-Za-z0-9_]*(\([^()]*\))?", body) is not None


# ---------------------------------------------------------------------------
# Validating parser for the emitted subset
# ---------------------------------------------------------------------------


@dataclass
class FofProblem:
    formulas: list[tuple[str, str, "FofNode"]] = field(default_factory=list)

    def by_name(self, name: str) -> "FofNode | None":
        for fname, _, node in self.formulas:
            if fname == name:
                return node
        return None


@dataclass(frozen=True)
class FofNode:
    """Parsed formula tree: op in {forall, imp, and, or, not, atom, false}."""

    op: str
    children: tuple = ()
    atom: str = ""
    var_list: tuple = ()

    def atoms(self) -> list[str]:
        if self.op == "atom":
            return [self.atom]
        out: list[str] = []
        for c in self.children:
            out.extend(c.atoms())
        return out


class _FofReader:
    def __init__(self, text: str, line: int):
        self.text = text
        self.pos = 0
        self.line = line

    def fail(self, message: str) -> "_FofError":
        return _FofError(self.line, message)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def eat(self, s: str) -> bool:
        self.skip()
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str) -> None:
        if not self.eat(s):
            raise self.fail(f"expected {s!r}")

    def name(self, upper_ok: bool) -> str:
        self.skip()
        m = re.match(r"[A-Za-z][A-Za-z0-9_]*", self.text[self.pos :])
        if not m:
            raise self.fail("expected a name")
        word = m.group()
        if word[0].isupper() and not upper_ok:
            raise self.fail(f"{word!r} must not start uppercase here")
        if word[0].islower() and upper_ok:
            raise self.fail(f"{word!r} must start uppercase here")
        self.pos += len(word)
        return word


class _FofError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(message)
        self.line = line
        self.message = message


def _parse_fof_formula(r: _FofReader) -> FofNode:
    return _parse_imp(r)


def _parse_imp(r: _FofReader) -> FofNode:
    left = _parse_or(r)
    if r.eat("=>"):
        right = _parse_imp(r)
        return FofNode(op="imp", children=(left, right))
    return left


def _parse_or(r: _FofReader) -> FofNode:
    items = [_parse_and(r)]
    while r.eat("|"):
        items.append(_parse_and(r))
    if len(items) == 1:
        return items[0]
    return FofNode(op="or", children=tuple(items))


def _parse_and(r: _FofReader) -> FofNode:
    items = [_parse_unary(r)]
    while True:
        r.skip()
        if r.text.startswith("&", r.pos):
            r.pos += 1
            items.append(_parse_unary(r))
        else:
            break
    if len(items) == 1:
        return items[0]
    return FofNode(op="and", children=tuple(items))


def _parse_unary(r: _FofReader) -> FofNode:
    r.skip()
    if r.eat("~"):
        return FofNode(op="not", children=(_parse_unary(r),))
    if r.eat("!"):
        r.expect("[")
        var_list = [r.name(upper_ok=True)]
        while r.eat(","):
            var_list.append(r.name(upper_ok=True))
        r.expect("]")
        r.expect(":")
        return FofNode(op="forall", children=(_parse_unary(r),), var_list=tuple(var_list))
    if r.eat("("):
        inner = _parse_imp(r)
        r.expect(")")
        return inner
    if r.eat("$false"):
        return FofNode(op="false")
    return _parse_atom(r)


def _parse_atom(r: _FofReader) -> FofNode:
    start = r.pos
    r.name(upper_ok=False)
    if r.eat("("):
        depth = 1
        while depth and r.pos < len(r.text):
            _parse_term_token(r)
            r.skip()
            if r.eat(","):
                continue
            if r.eat(")"):
                depth -= 1
                break
        if depth:
            raise r.fail("unbalanced parentheses in atom")
    return FofNode(op="atom", atom=r.text[start : r.pos].strip())


def _parse_term_token(r: _FofReader) -> None:
    r.skip()
    m = re.match(r"[A-Za-z][A-Za-z0-9_]*", r.text[r.pos :])
    if not m:
        raise r.fail("expected a term")
    r.pos += len(m.group())
    if r.eat("("):
        while True:
            _parse_term_token(r)
            r.skip()
            if r.eat(","):
                continue
            r.expect(")")
            break


def validate_fof(document: str) -> list[dict]:
    """Parse the emitted FOF subset; returns findings (empty means valid)."""
    findings: list[dict] = []
    buffer = ""
    buffer_line = 0
    for lineno, line in enumerate(document.splitlines(), start=1):
        stripped = line.strip()
        if not buffer and (not stripped or stripped.startswith("%")):
            continue
        if not buffer:
            buffer_line = lineno
        buffer += (" " if buffer else "") + stripped
        if not stripped.endswith("."):
            continue
        statement, buffer = buffer, ""
        if statement.count("(") != statement.count(")"):
            findings.append({"line": buffer_line, "error": "unbalanced parentheses"})
            continue
        m = re.match(r"fof\(\s*([A-Za-z0-9_]+)\s*,\s*([a-z_]+)\s*,", statement)
        if not m:
            findings.append({"line": buffer_line, "error": "not a fof statement"})
            continue
        name, role = m.group(1), m.group(2)
        if not re.fullmatch(r"[a-z][a-z0-9_]*", name):
            findings.append({"line": buffer_line, "error": f"bad formula name {name!r}"})
            continue
        if role not in ("axiom", "hypothesis", "conjecture"):
            findings.append({"line": buffer_line, "error": f"unknown role {role!r}"})
            continue
        inner = statement[m.end() : -2].strip()  # drop ').' terminator
        reader = _FofReader(inner, buffer_line)
        try:
            _parse_fof_formula(reader)
            reader.skip()
            if reader.pos != len(reader.text):
                raise reader.fail("trailing content in formula")
        except _FofError as exc:
            findings.append({"line": exc.line, "error": exc.message})
    if buffer:
        if buffer.count("(") != buffer.count(")"):
            findings.append({"line": buffer_line, "error": "unbalanced parentheses"})
        else:
            findings.append(
                {"line": buffer_line, "error": "statement missing final period"}
            )
    return findings


def parse_fof_document(document: str) -> FofProblem:
    """Parse a known-valid document into formula trees (test helper and the
    basis for conjecture-structure checks)."""
    problem = FofProblem()
    statement = ""
    for line in document.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        statement += (" " if statement else "") + stripped
        if not stripped.endswith("."):
            continue
        m = re.match(r"fof\(\s*([A-Za-z0-9_]+)\s*,\s*([a-z_]+)\s*,", statement)
        if m:
            reader = _FofReader(statement[m.end() : -2].strip(), 0)
            problem.formulas.append((m.group(1), m.group(2), _parse_fof_formula(reader)))
        statement = ""
    return problem
