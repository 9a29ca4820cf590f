"""Shared test machinery: fixture rule sets, the independent forward-chaining
oracle, random generators, and a manual clock for protocol tests."""

from __future__ import annotations

import itertools
import random

from t2ku.bridge import PatternRule, ReversePart
from t2ku.logic import (
    Clause,
    Compound,
    Constant,
    Frame,
    Membership,
    Predicate,
    Variable,
    clause_variables,
)


class ManualClock:
    def __init__(self, t: float = 1000.0):
        self.t = t

    def __call__(self) -> float:
        return self.t

    def advance(self, dt: float) -> None:
        self.t += dt


# ---------------------------------------------------------------------------
# Fixture rules
# ---------------------------------------------------------------------------


def equivalence_rules() -> list[PatternRule]:
    let_rule = PatternRule(
        id="eq_rel_let",
        section="declaration",
        pattern=r"\d+ be an equivalence relation on \d+",
        template="#{1}:EquivalenceRelation[base_set->#{2}].",
        examples=[r"Let $\sim$ be an equivalence relation on $S$."],
    )
    is_rule = PatternRule(
        id="eq_rel_is",
        section="any",
        pattern=r"\d+ is an equivalence relation on \d+",
        template="#{1}:EquivalenceRelation[base_set->#{2}].",
        examples=[r"$\sim$ is an equivalence relation on $S$"],
        reverse=ReversePart(
            clause_pattern="?1:EquivalenceRelation[base_set->?2].",
            sentence_template="$#{1}$ is an equivalence relation on $#{2}$",
        ),
    )
    return [let_rule, is_rule]


def group_rules() -> list[PatternRule]:
    return [
        PatternRule(
            id="group_decl",
            section="declaration",
            pattern=r"\d+ be a group",
            template="#{1}:Group.",
            examples=["Let $G$ be a group"],
        ),
        PatternRule(
            id="identity_decl",
            section="declaration",
            pattern=r"\d+ be the identity of \d+",
            template="#{2}[identity->#{1}].",
            examples=["Let $e$ be the identity of $G$"],
        ),
        PatternRule(
            id="binop_decl",
            section="declaration",
            pattern=r"\d+ be the binary operation of \d+",
            template="#{2}[operation->#{1}].",
            examples=["Let $*$ be the binary operation of $G$"],
        ),
        PatternRule(
            id="square_premise",
            section="premise",
            pattern=r"\d+ for all \d+",
            span_subpatterns={1: r"(\w+)\*(\w+)=(\w+)", 2: r"(\w+)\\in (\w+)"},
            template="product(?#{3},?#{4},var_#{5}) :- member(?#{3}, var_#{7}).",
            examples=[r"Suppose that $x*x=e$ for all $x\in G$."],
        ),
        PatternRule(
            id="commutative_concl",
            section="conclusion",
            pattern=r"\d+ is commutative",
            template="commutative(#{1}).",
            examples=["Prove that $G$ is commutative."],
        ),
    ]


def holds_rules() -> list[PatternRule]:
    return [
        PatternRule(
            id="hold_decl",
            section="declaration",
            pattern=r"\d+ hold",
            template="holds(#{1}).",
            examples=["Let $p$ hold."],
        ),
        PatternRule(
            id="holds_concl",
            section="conclusion",
            pattern=r"\d+ holds",
            template="holds(#{1}).",
            examples=["Prove that $p$ holds."],
        ),
    ]


def ambiguity_rules() -> list[PatternRule]:
    """Two rules that both validate (their examples are disjoint) yet share
    sentences outside any example, which is where run-time ambiguity lives."""
    return [
        PatternRule(
            id="amb_property_at",
            section="premise",
            pattern=r"\d+ \w+ at \d+",
            template="at_point(#{1},#{2},#{3}).",
            examples=["Suppose that $f$ peaks at $x$."],
        ),
        PatternRule(
            id="amb_vanishing",
            section="premise",
            pattern=r"\d+ vanishes \w+ \d+",
            template="vanishing(#{1},#{2},#{3}).",
            examples=["Suppose that $f$ vanishes near $x$."],
        ),
        PatternRule(
            id="function_decl",
            section="declaration",
            pattern=r"\d+ be a function",
            template="#{1}:Function.",
            examples=["Let $f$ be a function."],
        ),
        PatternRule(
            id="continuous_concl",
            section="conclusion",
            pattern=r"\d+ is continuous",
            template="continuous(#{1}).",
            examples=["Prove that $f$ is continuous."],
        ),
    ]


AMBIGUOUS_SOURCE = (
    "Let $f$ be a function.\n"
    "Suppose that $f$ vanishes at $x$.\n"
    "Prove that $f$ is continuous.\n"
)

GROUP_SOURCE = (
    "Let $G$ be a group,\n"
    "    $e$ be the identity of $G$,\n"
    "    $*$ be the binary operation of $G$.\n"
    "Suppose that\n"
    "    $x*x=e$ for all $x\\in G$.\n"
    "Prove that\n"
    "    $G$ is commutative.\n"
)

EXPONENT2_AXIOMS = [
    "elem(identity).",
    "product(identity,?X,?X) :- elem(?X).",
    "product(?X,identity,?X) :- elem(?X).",
    "product(?X,?V,?W) :- product(?X,?Y,?U), product(?Y,?Z,?V), product(?U,?Z,?W).",
    "product(?U,?Z,?W) :- product(?X,?Y,?U), product(?Y,?Z,?V), product(?X,?V,?W).",
]

EXPONENT2_HYPOTHESES = [
    "elem(a).",
    "elem(b).",
    "elem(c).",
    "product(?x,?x,identity) :- elem(?x).",
    "product(a,b,c).",
]


# ---------------------------------------------------------------------------
# Independent forward-chaining oracle
# ---------------------------------------------------------------------------


def _substitute_atom(atom, subst):
    def sub_term(t):
        if isinstance(t, Variable):
            return subst[t.name]
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(sub_term(a) for a in t.args))
        return t

    if isinstance(atom, Predicate):
        return Predicate(atom.name, tuple(sub_term(t) for t in atom.args))
    if isinstance(atom, Membership):
        return Membership(sub_term(atom.instance), atom.cls)
    return Frame(sub_term(atom.instance), atom.attribute, sub_term(atom.value))


def forward_fixpoint(clauses: list[Clause]) -> tuple[set, dict]:
    """Enumerative least fixpoint for function-free, range-restricted clause
    sets: every rule is grounded over every combination of known constants.
    Rounds evaluate against a frozen snapshot, so ``layer[atom] + 1`` is the
    minimal proof-tree depth of the atom. Deliberately brute force."""
    constants: set[str] = set()
    for clause in clauses:
        for atom in clause.head + clause.body:
            terms = (
                atom.args
                if isinstance(atom, Predicate)
                else (atom.instance,) if isinstance(atom, Membership)
                else (atom.instance, atom.value)
            )
            for t in terms:
                if isinstance(t, Constant):
                    constants.add(t.name)
    pool = [Constant(name) for name in sorted(constants)]

    facts: set = set()
    layer: dict = {}
    for clause in clauses:
        if clause.is_fact and not clause.is_constraint:
            for atom in clause.head:
                if atom not in facts:
                    facts.add(atom)
                    layer[atom] = 0
    rules = [c for c in clauses if c.body and not c.is_constraint]

    round_no = 0
    while True:
        round_no += 1
        snapshot = frozenset(facts)
        added = []
        for rule in rules:
            names = sorted(clause_variables(rule))
            for combo in itertools.product(pool, repeat=len(names)):
                subst = dict(zip(names, combo))
                if all(_substitute_atom(b, subst) in snapshot for b in rule.body):
                    for h in rule.head:
                        inst = _substitute_atom(h, subst)
                        if inst not in facts:
                            added.append(inst)
                            facts.add(inst)
                            layer[inst] = round_no
        if not added:
            return facts, layer


def fired_constraints(clauses: list[Clause]) -> bool:
    """Oracle for inconsistency: does any falsum constraint fire over the
    fixpoint of the non-constraint clauses?"""
    facts, _ = forward_fixpoint([c for c in clauses if not c.is_constraint])
    constants = sorted({t.name for a in facts for t in _atom_constants(a)})
    pool = [Constant(n) for n in constants]
    for clause in clauses:
        if not clause.is_constraint:
            continue
        names = sorted(clause_variables(clause))
        for combo in itertools.product(pool, repeat=len(names)):
            subst = dict(zip(names, combo))
            if all(_substitute_atom(b, subst) in facts for b in clause.body):
                return True
    return False


def _atom_constants(atom):
    terms = (
        atom.args
        if isinstance(atom, Predicate)
        else (atom.instance,) if isinstance(atom, Membership)
        else (atom.instance, atom.value)
    )
    out = []
    for t in terms:
        if isinstance(t, Constant):
            out.append(t)
        elif isinstance(t, Compound):
            stack = list(t.args)
            while stack:
                x = stack.pop()
                if isinstance(x, Constant):
                    out.append(x)
                elif isinstance(x, Compound):
                    stack.extend(x.args)
    return out


# ---------------------------------------------------------------------------
# Random generators
# ---------------------------------------------------------------------------


def random_function_free_kb(rng: random.Random) -> tuple[list[Clause], list]:
    """A small function-free, range-restricted clause set plus candidate goal
    atoms (a mix of derivable and underivable ones, by construction unknown)."""
    n_constants = rng.randint(2, 6)
    constants = [Constant(f"k{i}") for i in range(n_constants)]
    predicates = [("p", 1), ("q", 2), ("r", rng.choice([1, 2, 3])), ("s", 2)]
    predicates = predicates[: rng.randint(2, 4)]
    var_names = ["?A", "?B", "?C"]

    def random_ground_atom():
        name, arity = rng.choice(predicates)
        return Predicate(name, tuple(rng.choice(constants) for _ in range(arity)))

    clauses: list[Clause] = []
    n_clauses = rng.randint(3, 12)
    for _ in range(n_clauses):
        if rng.random() < 0.45:
            clauses.append(Clause(head=(random_ground_atom(),)))
            continue
        n_body = rng.randint(1, 3)
        n_vars = rng.randint(1, 3)
        body_vars = [Variable(v) for v in var_names[:n_vars]]
        body = []
        used_vars: set[str] = set()
        for _ in range(n_body):
            name, arity = rng.choice(predicates)
            args = []
            for _ in range(arity):
                if rng.random() < 0.6:
                    v = rng.choice(body_vars)
                    args.append(v)
                    used_vars.add(v.name)
                else:
                    args.append(rng.choice(constants))
            body.append(Predicate(name, tuple(args)))
        if not used_vars:
            first = body[0]
            body[0] = Predicate(first.name, (body_vars[0],) + first.args[1:])
            used_vars.add(body_vars[0].name)
        name, arity = rng.choice(predicates)
        head_pool = [Variable(n) for n in sorted(used_vars)] + list(constants)
        head = Predicate(name, tuple(rng.choice(head_pool) for _ in range(arity)))
        clauses.append(Clause(head=(head,), body=tuple(body)))

    goals = [  # candidate conclusions to probe
        Predicate(name, tuple(rng.choice(constants) for _ in range(arity)))
        for name, arity in [rng.choice(predicates) for _ in range(3)]
    ]
    return clauses, goals


def random_document(rng: random.Random) -> str:
    """A syntactically wild but scanner-valid T2Math document for tiling
    fuzz tests: math spans stay balanced, escapes included."""
    pieces = []
    words = ["alpha", "beta", "Let", "gamma", "Prove that", "x", "8", ",", ".", ";",
             " ", "\n", "\t", "\\$", "Suppose that", "éé", "中"]
    for _ in range(rng.randint(0, 40)):
        if rng.random() < 0.25:
            inner = "".join(
                rng.choice(["x", "y", "*", "=", "\\sim", "\\$", " ", "8"])
                for _ in range(rng.randint(0, 6))
            )
            pieces.append(f"${inner}$")
        else:
            pieces.append(rng.choice(words))
    return "".join(pieces)
