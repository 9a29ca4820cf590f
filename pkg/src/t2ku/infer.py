"""The built-in inference engine.

``normalize`` turns a parsed proposition plus bridge rules into a Goal:
span-derived ``var_`` identifiers become fresh constants (``c_G``, ``c_e``,
...), template-authored ``?`` variables stay universal, declaration and
premise clauses become hypotheses, conclusion clauses become ground goal
atoms.

``prove`` then runs two phases under one shared budget:

 1. a consistency pass: bounded forward chaining over hypotheses plus the
    knowledge base; a fired ``falsum`` constraint yields Inconsistent with
    a derivation witness;
 2. backward chaining with iterative deepening and occurs-check
    unification; the first depth that closes every conclusion gives the
    minimal-depth proof.

Anything else is Unknown, shipped with relevance-ranked facts so the caller
always has something to show. Budget exhaustion never raises; it flags the
Unknown verdict instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .bridge import Ambiguous, PatternRule, SpanMap, Translated, Unparsed, apply_forward, apply_reverse
from .errors import InferError
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
    atom_is_ground,
    parse_formula,
    print_atom,
    print_formula,
    range_restriction_error,
    symbols_of,
    term_depth,
)
from .proofcheck import CONJUNCTION, FALSUM_ATOM, HYPOTHESIS, ProofNode, proof_from_dict
from .t2math import Proposition, Sentence


@dataclass(frozen=True)
class Limits:
    max_depth: int = 8
    step_budget: int = 1_000_000  # unification attempts across the whole call
    time_budget: float = 10.0  # seconds
    term_depth: int = 2  # forward-chaining term nesting cap

    def __post_init__(self) -> None:
        if min(self.max_depth, self.step_budget, self.term_depth) < 1 or self.time_budget <= 0:
            raise InferError("E_LIMITS", "all limits must be positive")


@dataclass
class Goal:
    hypotheses: tuple[Clause, ...]
    conclusions: tuple[Atom, ...]
    span_map: SpanMap

    def symbols(self) -> set[str]:
        acc: set[str] = set()
        for h in self.hypotheses:
            acc |= symbols_of(h)
        for c in self.conclusions:
            acc |= symbols_of(Clause(head=(c,)))
        return acc

    def to_dict(self) -> dict:
        return {
            "hypotheses": [print_formula(h) for h in self.hypotheses],
            "conclusions": [print_atom(c) for c in self.conclusions],
            "span_map": self.span_map.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Goal":
        hypotheses = tuple(parse_formula(t) for t in data["hypotheses"])
        conclusions = []
        for text in data["conclusions"]:
            clause = parse_formula(text + ".")
            conclusions.extend(clause.head)
        return cls(
            hypotheses=hypotheses,
            conclusions=tuple(conclusions),
            span_map=SpanMap.from_dict(data.get("span_map", {})),
        )


@dataclass
class Verdict:
    kind: str  # proved | inconsistent | unknown
    proof: ProofNode | None = None
    relevant: list[str] = field(default_factory=list)
    budget_exhausted: bool = False
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "budget_exhausted": self.budget_exhausted,
                     "stats": self.stats}
        if self.proof is not None:
            out["proof"] = self.proof.to_dict()
        if self.kind == "unknown":
            out["relevant"] = self.relevant
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(
            kind=data["kind"],
            proof=proof_from_dict(data["proof"]) if data.get("proof") else None,
            relevant=list(data.get("relevant", [])),
            budget_exhausted=bool(data.get("budget_exhausted", False)),
            stats=dict(data.get("stats", {})),
        )

    @property
    def conclusive(self) -> bool:
        return self.kind in ("proved", "inconsistent")


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _rewrite_term(t: Term, mapping: dict[str, Constant]) -> Term:
    if isinstance(t, Variable):
        return mapping.get(t.name, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_rewrite_term(a, mapping) for a in t.args))
    return t


def _rewrite_atom(a: Atom, mapping: dict[str, Constant]) -> Atom:
    if isinstance(a, Predicate):
        return Predicate(a.name, tuple(_rewrite_term(t, mapping) for t in a.args))
    if isinstance(a, Membership):
        return Membership(_rewrite_term(a.instance, mapping), a.cls)
    return Frame(_rewrite_term(a.instance, mapping), a.attribute,
                 _rewrite_term(a.value, mapping))


def _freshen(name: str, kb: KnowledgeBase, allocated: dict[str, Constant]) -> Constant:
    """Map a ``var_`` identifier to a proposition-scoped constant, avoiding
    anything already registered in the knowledge base."""
    if name in allocated:
        return allocated[name]
    base = "c_" + (name[4:] if name.startswith("var_") else name.lstrip("?"))
    candidate, k = base, 1
    existing = {c.name for c in allocated.values()}
    while candidate in kb.registry.entries or candidate in existing:
        k += 1
        candidate = f"{base}_{k}"
    constant = Constant(candidate)
    allocated[name] = constant
    return constant


def _collect_translation(
    rules: list[PatternRule],
    sentence: Sentence,
    index: int,
    choices: dict[int, int] | None,
) -> Translated:
    result = apply_forward(rules, sentence)
    if isinstance(result, Unparsed):
        raise InferError(
            "E_UNTRANSLATED", f"no rule translates: {sentence.text}",
            sentence=sentence.text, sentence_index=index,
        )
    if isinstance(result, Ambiguous):
        choice = (choices or {}).get(index)
        if choice is None or not 0 <= choice < len(result.candidates):
            raise InferError(
                "E_UNRESOLVED_AMBIGUITY",
                f"{len(result.candidates)} readings for: {sentence.text}",
                sentence=sentence.text, sentence_index=index,
                candidates=len(result.candidates),
            )
        picked = result.candidates[choice]
        return Translated(clauses=picked.clauses, span_map=result.span_map,
                          rule_id=picked.rule_id)
    return result


def normalize(
    proposition: Proposition,
    rules: list[PatternRule],
    kb: KnowledgeBase,
    choices: dict[int, int] | None = None,
) -> Goal:
    """Translate every sentence and split the clauses into hypotheses and
    goal conclusions. ``choices`` resolves ambiguous sentences by global
    sentence index (the disambiguation endpoint's contract)."""
    sentences = list(proposition.sentences)
    translated: list[tuple[Sentence, Translated]] = []
    span_map = SpanMap()
    for index, sentence in enumerate(sentences):
        result = _collect_translation(rules, sentence, index, choices)
        translated.append((sentence, result))
        span_map = span_map.merged_with(result.span_map)

    allocated: dict[str, Constant] = {}
    hypotheses: list[Clause] = []
    conclusions: list[Atom] = []
    for sentence, result in translated:
        for clause in result.clauses:
            mapping = {
                name: _freshen(name, kb, allocated)
                for name in _clause_var_names(clause)
                if name.startswith("var_")
            }
            head = tuple(_rewrite_atom(a, mapping) for a in clause.head)
            body = tuple(_rewrite_atom(a, mapping) for a in clause.body)
            grounded = Clause(head=head, body=body)
            violation = range_restriction_error(grounded)
            if violation is not None:
                raise InferError(
                    "E_UNTRANSLATED",
                    f"translated clause breaks range restriction: {violation}",
                    sentence=sentence.text,
                    clause=print_formula(grounded),
                )
            if sentence.section == "conclusion":
                if grounded.body or grounded.is_constraint:
                    raise InferError(
                        "E_UNTRANSLATED",
                        "a conclusion must translate to fact clauses",
                        sentence=sentence.text,
                    )
                for atom in grounded.head:
                    if not atom_is_ground(atom):
                        raise InferError(
                            "E_UNTRANSLATED",
                            f"conclusion is not ground: {print_atom(atom)}",
                            sentence=sentence.text,
                        )
                    conclusions.append(atom)
            else:
                hypotheses.append(grounded)

    # The remapped span map lets the outline renderer recover original span
    # text from the fresh constant names.
    remapped = SpanMap(
        {
            key: type(entry)(raw=entry.raw, var_name=allocated[entry.var_name].name)
            if entry.var_name in allocated
            else entry
            for key, entry in span_map.entries.items()
        }
    )
    return Goal(hypotheses=tuple(hypotheses), conclusions=tuple(conclusions),
                span_map=remapped)


def _clause_var_names(clause: Clause) -> set[str]:
    from .logic import clause_variables

    return clause_variables(clause)


# ---------------------------------------------------------------------------
# Unification (occurs check on)
# ---------------------------------------------------------------------------


class _Budget:
    __slots__ = ("steps", "limit", "deadline", "exhausted")

    def __init__(self, limits: Limits):
        self.steps = 0
        self.limit = limits.step_budget
        self.deadline = time.monotonic() + limits.time_budget
        self.exhausted = False

    def spend(self) -> bool:
        """Account one unification attempt; False when the budget is gone."""
        self.steps += 1
        if self.steps > self.limit:
            self.exhausted = True
            return False
        if self.steps % 1024 == 0 and time.monotonic() > self.deadline:
            self.exhausted = True
            return False
        return True


def _walk(t: Term, subst: dict[str, Term]) -> Term:
    while isinstance(t, Variable) and t.name in subst:
        t = subst[t.name]
    return t


def _occurs(name: str, t: Term, subst: dict[str, Term]) -> bool:
    t = _walk(t, subst)
    if isinstance(t, Variable):
        return t.name == name
    if isinstance(t, Compound):
        return any(_occurs(name, a, subst) for a in t.args)
    return False


def _unify_terms(a: Term, b: Term, subst: dict[str, Term]) -> bool:
    a, b = _walk(a, subst), _walk(b, subst)
    if isinstance(a, Variable):
        if isinstance(b, Variable) and a.name == b.name:
            return True
        if _occurs(a.name, b, subst):
            return False
        subst[a.name] = b
        return True
    if isinstance(b, Variable):
        return _unify_terms(b, a, subst)
    if isinstance(a, Constant) or isinstance(b, Constant):
        return a == b
    return (
        a.functor == b.functor
        and len(a.args) == len(b.args)
        and all(_unify_terms(x, y, subst) for x, y in zip(a.args, b.args))
    )


def unify_atoms(a: Atom, b: Atom, subst: dict[str, Term]) -> dict[str, Term] | None:
    trial = dict(subst)
    if isinstance(a, Predicate) and isinstance(b, Predicate):
        if a.name != b.name or len(a.args) != len(b.args):
            return None
        if all(_unify_terms(x, y, trial) for x, y in zip(a.args, b.args)):
            return trial
        return None
    if isinstance(a, Membership) and isinstance(b, Membership):
        if a.cls == b.cls and _unify_terms(a.instance, b.instance, trial):
            return trial
        return None
    if isinstance(a, Frame) and isinstance(b, Frame):
        if (
            a.attribute == b.attribute
            and _unify_terms(a.instance, b.instance, trial)
            and _unify_terms(a.value, b.value, trial)
        ):
            return trial
        return None
    return None


def _resolve_term(t: Term, subst: dict[str, Term]) -> Term:
    t = _walk(t, subst)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_resolve_term(a, subst) for a in t.args))
    return t


def resolve_atom(a: Atom, subst: dict[str, Term]) -> Atom:
    if isinstance(a, Predicate):
        return Predicate(a.name, tuple(_resolve_term(t, subst) for t in a.args))
    if isinstance(a, Membership):
        return Membership(_resolve_term(a.instance, subst), a.cls)
    return Frame(_resolve_term(a.instance, subst), a.attribute,
                 _resolve_term(a.value, subst))


def _rename_clause(clause: Clause, suffix: int) -> Clause:
    mapping: dict[str, Variable] = {}

    def ren_term(t: Term) -> Term:
        if isinstance(t, Variable):
            if t.name not in mapping:
                mapping[t.name] = Variable(f"?_r{suffix}_{len(mapping)}")
            return mapping[t.name]
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(ren_term(a) for a in t.args))
        return t

    def ren_atom(a: Atom) -> Atom:
        if isinstance(a, Predicate):
            return Predicate(a.name, tuple(ren_term(t) for t in a.args))
        if isinstance(a, Membership):
            return Membership(ren_term(a.instance), a.cls)
        return Frame(ren_term(a.instance), a.attribute, ren_term(a.value))

    return Clause(
        head=tuple(ren_atom(a) for a in clause.head),
        body=tuple(ren_atom(a) for a in clause.body),
        id=clause.id,
        provenance=clause.provenance,
    )


# ---------------------------------------------------------------------------
# Forward chaining (consistency pass)
# ---------------------------------------------------------------------------


def _atom_key(a: Atom) -> tuple:
    if isinstance(a, Predicate):
        return ("p", a.name, len(a.args))
    if isinstance(a, Membership):
        return ("m", a.cls)
    return ("f", a.attribute)


def _max_atom_depth(a: Atom) -> int:
    if isinstance(a, Predicate):
        return max((term_depth(t) for t in a.args), default=0)
    if isinstance(a, Membership):
        return term_depth(a.instance)
    return max(term_depth(a.instance), term_depth(a.value))


@dataclass
class _Derivation:
    justification: str  # clause id or "hypothesis"
    premises: tuple  # atoms


def _forward_consistency(
    clauses: list[Clause], limits: Limits, budget: _Budget
) -> ProofNode | None:
    """Naive fixpoint over the ground facts; returns a falsum witness when a
    constraint fires. Derived facts deeper than the term-depth cap are
    discarded, which keeps function symbols from running away."""
    facts: dict[tuple, list[Atom]] = {}
    derivation: dict[Atom, _Derivation] = {}

    def justification_of(clause: Clause) -> str:
        return clause.id or HYPOTHESIS

    def add_fact(atom: Atom, deriv: _Derivation) -> bool:
        if atom in derivation or _max_atom_depth(atom) > limits.term_depth:
            return False
        derivation[atom] = deriv
        facts.setdefault(_atom_key(atom), []).append(atom)
        return True

    def witness(atom: Atom) -> ProofNode:
        deriv = derivation[atom]
        return ProofNode(
            atom=atom,
            justification=deriv.justification,
            children=tuple(witness(p) for p in deriv.premises),
        )

    rules: list[Clause] = []
    for idx, clause in enumerate(clauses):
        if clause.is_fact and not clause.is_constraint:
            for atom in clause.head:
                add_fact(atom, _Derivation(justification_of(clause), ()))
        else:
            rules.append(_rename_clause(clause, idx))

    changed = True
    while changed and not budget.exhausted:
        changed = False
        for rule in rules:
            # Enumerate every body match of this rule against current facts.
            stack: list[tuple[tuple, dict, list]] = [(rule.body, {}, [])]
            matches: list[tuple[dict, tuple]] = []
            while stack:
                body, subst, premises = stack.pop()
                if budget.exhausted:
                    break
                if not body:
                    matches.append((subst, tuple(premises)))
                    continue
                first, rest = body[0], body[1:]
                for fact in facts.get(_atom_key(first), []):
                    if not budget.spend():
                        break
                    bound = unify_atoms(first, fact, subst)
                    if bound is not None:
                        stack.append((rest, bound, premises + [fact]))
            for subst, premises in matches:
                if rule.is_constraint:
                    return ProofNode(
                        atom=FALSUM_ATOM,
                        justification=rule.id or HYPOTHESIS,
                        children=tuple(witness(p) for p in premises),
                    )
                for head in rule.head:
                    instance = resolve_atom(head, subst)
                    if add_fact(instance, _Derivation(rule.id or HYPOTHESIS, premises)):
                        changed = True
    return None


# ---------------------------------------------------------------------------
# Backward chaining (iterative deepening)
# ---------------------------------------------------------------------------


def _keep_shallower(found: dict, answer: Atom, proof: ProofNode) -> None:
    key = _canonical_atom(answer)
    prev = found.get(key)
    if prev is None or proof.depth() < prev[1].depth():
        found[key] = (answer, proof)


def _canonical_atom(atom: Atom) -> str:
    names: dict[str, str] = {}

    def canon_term(t: Term) -> str:
        if isinstance(t, Variable):
            return names.setdefault(t.name, f"_{len(names)}")
        if isinstance(t, Constant):
            return t.name
        return f"{t.functor}({','.join(canon_term(a) for a in t.args)})"

    if isinstance(atom, Predicate):
        return f"p:{atom.name}({','.join(canon_term(t) for t in atom.args)})"
    if isinstance(atom, Membership):
        return f"m:{canon_term(atom.instance)}:{atom.cls}"
    return f"f:{canon_term(atom.instance)}[{atom.attribute}->{canon_term(atom.value)}]"


class _Prover:
    """Depth-layered tabled resolution.

    ``answers(goal, d)`` enumerates every instance of ``goal`` provable with
    a tree of depth at most ``d``, eagerly, and memoizes the complete list
    per canonical goal form and depth. Depth strictly decreases down any
    derivation path, so an entry can never recursively need itself and each
    is computed exactly once. Range-restricted clauses keep every answer
    ground; non-ground answers are renamed apart at replay as a safety net.
    Tables survive across the iterative-deepening sweep, which makes the
    deeper iterations reuse all shallower work.
    """

    def __init__(self, clauses: list[Clause], limits: Limits, budget: _Budget):
        self.limits = limits
        self.budget = budget
        self.rename_counter = 0
        self.index: dict[tuple, list[Clause]] = {}
        for clause in clauses:
            if clause.is_constraint:
                continue  # constraints never help prove a positive atom
            for atom in clause.head:
                self.index.setdefault(_atom_key(atom), []).append(clause)
        self.table: dict[tuple[str, int], list[tuple[Atom, ProofNode]]] = {}

    def _fresh_suffix(self) -> int:
        self.rename_counter += 1
        return self.rename_counter

    def answers(self, goal: Atom, depth: int) -> list[tuple[Atom, ProofNode]]:
        """All provable instances of ``goal`` within ``depth``, with proof
        witnesses. Incomplete results (budget ran out) are never memoized."""
        if depth < 1 or self.budget.exhausted:
            return []
        key = (_canonical_atom(goal), depth)
        cached = self.table.get(key)
        if cached is not None:
            return cached
        found: dict[str, tuple[Atom, ProofNode]] = {}
        for clause in self.index.get(_atom_key(goal), []):
            if self.budget.exhausted:
                break
            renamed = _rename_clause(clause, self._fresh_suffix())
            justification = clause.id or HYPOTHESIS
            for head in renamed.head:
                if not self.budget.spend():
                    break
                bound = unify_atoms(head, goal, {})
                if bound is None:
                    continue
                if renamed.is_fact:
                    answer = resolve_atom(goal, bound)
                    _keep_shallower(found, answer, ProofNode(answer, justification, ()))
                    continue
                if depth < 2:
                    continue
                for final, children in self._join(renamed.body, bound, depth - 1):
                    answer = resolve_atom(goal, final)
                    _keep_shallower(
                        found, answer, ProofNode(answer, justification, children)
                    )
        result = list(found.values())
        if not self.budget.exhausted:
            self.table[key] = result
        return result

    def _join(self, body: tuple, subst: dict, depth: int) -> list[tuple[dict, tuple]]:
        """Solve a body conjunction left to right against the answer tables."""
        if not body:
            return [(subst, ())]
        first, rest = body[0], body[1:]
        out: list[tuple[dict, tuple]] = []
        resolved = resolve_atom(first, subst)
        for answer, proof in self.answers(resolved, depth):
            if not self.budget.spend():
                break
            if not atom_is_ground(answer):
                suffix = self._fresh_suffix()
                holder = _rename_clause(Clause(head=(answer,)), suffix)
                answer = holder.head[0]
            bound = unify_atoms(resolved, answer, subst)
            if bound is None:
                continue
            for final, nodes in self._join(rest, bound, depth):
                out.append((final, (proof,) + nodes))
        return out

    def prove_conjunction(self, conclusions: tuple, depth: int):
        """First proof of all conclusions within ``depth``, or None."""
        for final, nodes in self._join(conclusions, {}, depth):
            return nodes
        return None


def prove(goal: Goal, kb: KnowledgeBase, limits: Limits | None = None) -> Verdict:
    """Three-way verdict: Inconsistent when the hypotheses fire a constraint
    against the knowledge base, Proved with a minimal-depth tree when
    iterative deepening closes all conclusions, Unknown with relevant facts
    otherwise."""
    limits = limits or Limits()
    budget = _Budget(limits)
    started = time.monotonic()
    pool = list(kb.clauses.values()) + [
        Clause(head=h.head, body=h.body, id=None) for h in goal.hypotheses
    ]

    def stats(depth_reached: int) -> dict:
        return {
            "depth_reached": depth_reached,
            "steps": budget.steps,
            "millis": int((time.monotonic() - started) * 1000),
        }

    witness = _forward_consistency(pool, limits, budget)
    if witness is not None:
        return Verdict(kind="inconsistent", proof=witness, stats=stats(witness.depth()))

    prover = _Prover(pool, limits, budget)
    for depth in range(1, limits.max_depth + 1):
        if budget.exhausted:
            break
        nodes = prover.prove_conjunction(goal.conclusions, depth)
        if nodes is not None:
            if len(goal.conclusions) == 1:
                proof: ProofNode = nodes[0]
            else:
                proof = ProofNode(
                    atom=Predicate("goal", ()), justification=CONJUNCTION, children=nodes
                )
            return Verdict(kind="proved", proof=proof, stats=stats(depth))
    return Verdict(
        kind="unknown",
        relevant=kb.relevant_facts(goal.symbols(), 20) if kb.clauses else [],
        budget_exhausted=budget.exhausted,
        stats=stats(limits.max_depth),
    )


# ---------------------------------------------------------------------------
# Outline rendering
# ---------------------------------------------------------------------------


def render_outline(
    proof: ProofNode,
    rules: list[PatternRule],
    span_map: SpanMap | None = None,
    kb: KnowledgeBase | None = None,
    hypotheses: tuple[Clause, ...] = (),
) -> str:
    """Numbered post-order steps, two spaces of indent per tree depth, each
    step rendered through the reverse bridge with the clause text fallback,
    citing the justifying clause and its provenance annotation if any."""
    lines: list[str] = []
    counter = [0]

    def justifying_molecule(node: ProofNode) -> Clause | None:
        """The full fact molecule behind a leaf, when the node's atom is just
        one piece of it; reverse rules usually match whole molecules."""
        if node.children:
            return None
        if node.justification == HYPOTHESIS:
            pool = hypotheses
        elif kb is not None and node.justification in kb.clauses:
            pool = (kb.clauses[node.justification],)
        else:
            return None
        for clause in pool:
            if clause.is_fact and len(clause.head) > 1 and node.atom in clause.head:
                return Clause(head=clause.head)
        return None

    def render_step(node: ProofNode) -> str:
        step = Clause(head=(node.atom,))
        text = apply_reverse(rules, step, span_map)
        if text == print_formula(step):
            molecule = justifying_molecule(node)
            if molecule is not None:
                alt = apply_reverse(rules, molecule, span_map)
                if alt != print_formula(molecule):
                    return alt
        return text

    def emit(node: ProofNode, depth: int) -> None:
        for child in node.children:
            emit(child, depth if node.justification == CONJUNCTION else depth + 1)
        if node.justification == CONJUNCTION:
            return
        counter[0] += 1
        citation = node.justification
        if kb is not None and node.justification in kb.clauses:
            prov = kb.clauses[node.justification].provenance
            if prov:
                citation = f"{node.justification}; annotation {prov}"
        lines.append(f"{'  ' * depth}{counter[0]}. {render_step(node)}  [{citation}]")

    emit(proof, 0)
    return "\n".join(lines)
