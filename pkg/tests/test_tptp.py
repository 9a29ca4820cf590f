from __future__ import annotations

import random

import pytest

from helpers import random_function_free_kb
from t2ku.bridge import SpanMap
from t2ku.infer import Goal
from t2ku.kb import KnowledgeBase
from t2ku.logic import parse_formula
from t2ku.proofcheck import parse_atom_text
from t2ku.tptp import (
    MangleTable,
    SelectionParams,
    export_problem,
    parse_fof_document,
    select_axioms,
    to_fof,
    validate_fof,
)

EXAMPLE1 = (
    "either_true(isomorphic(?P,D_8),isomorphic(?P,Q_8)) :- "
    "?P:nonabelian_group[order->8]."
)


# ---------------------------------------------------------------------------
# mangle
# ---------------------------------------------------------------------------


def test_mangle_lowers_first_letter():
    assert MangleTable().mangle("EquivalenceRelation") == "equivalenceRelation"


def test_mangle_underscores():
    assert MangleTable().mangle("D_8") == "d_8"


def test_mangle_integer_constants():
    assert MangleTable().mangle("8") == "n8"


def test_mangle_collision_suffix():
    table = MangleTable()
    assert table.mangle("Order") == "order"
    assert table.mangle("order") == "order_2"
    assert table.mangle("order") == "order_2"  # stable per export


def test_mangle_injective_fuzz():
    rng = random.Random(4)
    alphabet = "AaBb_8"
    table = MangleTable()
    names = set()
    for _ in range(300):
        ident = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 5)))
        names.add(ident)
    mangled = [table.mangle(n) for n in sorted(names)]
    assert len(set(mangled)) == len(names)


# ---------------------------------------------------------------------------
# to_fof
# ---------------------------------------------------------------------------


def test_to_fof_minimal_fact():
    assert to_fof(parse_formula("p(a).")).render() == "fof(ax_p_1, axiom, p(a))."


def test_to_fof_example1():
    rendered = to_fof(parse_formula(EXAMPLE1)).render()
    assert rendered == (
        "fof(ax_either_true_1, axiom, ! [P] : ((nonabelian_group(P) & order(P, n8))"
        " => either_true(isomorphic(P, d_8), isomorphic(P, q_8))))."
    )


def test_to_fof_constraint_is_false_head():
    rendered = to_fof(parse_formula("falsum :- p(?X).")).render()
    assert "$false" in rendered
    assert "p(X)" in rendered


def test_to_fof_molecule_fact_conjunction():
    rendered = to_fof(parse_formula("g:Group[order->8].")).render()
    assert "(group(g) & order(g, n8))" in rendered


# ---------------------------------------------------------------------------
# select_axioms
# ---------------------------------------------------------------------------


def _selection_kb() -> KnowledgeBase:
    """Ten clauses; a three-clause core reachable from the goal symbols at
    one hop, the rest living on an unrelated busy symbol. The shared
    constant u1 keeps the fact's rarest-symbol bar low enough for core_a
    to trigger it."""
    kb = KnowledgeBase()
    kb.assert_clause(parse_formula("core_a(u1)."))                       # c0001
    kb.assert_clause(parse_formula("core_b(u1) :- core_a(u1)."))         # c0002
    kb.assert_clause(parse_formula("core_a(?X) :- core_b(?X), core_c(?X)."))  # c0003
    for i in range(7):
        kb.assert_clause(parse_formula(f"busy(m{i})."))
    return kb


def test_select_axioms_exact_core_at_one_hop():
    kb = _selection_kb()
    selected = select_axioms({"core_a", "core_c"}, kb, SelectionParams(max_hops=1))
    assert selected == ["c0001", "c0002", "c0003"]


def test_select_axioms_no_shared_symbols():
    kb = _selection_kb()
    assert select_axioms({"zzz"}, kb) == []


def test_select_axioms_truncates_to_max_axioms():
    kb = _selection_kb()
    selected = select_axioms(
        {"core_a", "core_c"}, kb, SelectionParams(max_axioms=2, max_hops=1)
    )
    assert selected == ["c0001", "c0002"]


def test_selection_params_rejects_zero():
    with pytest.raises(Exception):
        SelectionParams(max_axioms=0)


def test_select_axioms_monotonicity_random():
    rng = random.Random(21)
    for _ in range(50):
        clauses, goals = random_function_free_kb(rng)
        kb = KnowledgeBase()
        for clause in clauses:
            kb.assert_clause(clause)
        goal_symbols = {"p", "q"} | {c.name for c in (goals[0].args or ())}
        base = select_axioms(goal_symbols, kb, SelectionParams(max_axioms=4, max_hops=1))
        more_hops = select_axioms(goal_symbols, kb, SelectionParams(max_axioms=4, max_hops=3))
        more_axioms = select_axioms(goal_symbols, kb, SelectionParams(max_axioms=16, max_hops=1))
        assert set(base) <= set(more_hops)
        assert set(base) <= set(more_axioms)


def test_selection_soundness_trigger_chain():
    kb = _selection_kb()
    params = SelectionParams()
    selected = select_axioms({"core_a"}, kb, params)
    # replay the trigger relation: every selected clause must be reachable
    occ: dict[str, int] = {}
    syms = {}
    for cid, clause in kb.clauses.items():
        from t2ku.logic import symbols_of

        syms[cid] = symbols_of(clause)
        for s in syms[cid]:
            occ[s] = occ.get(s, 0) + 1
    frontier = {"core_a"}
    reached = set()
    for _ in range(params.max_hops):
        newly = set()
        for cid in kb.clauses:
            if cid in reached:
                continue
            for s in frontier:
                if s in syms[cid] and occ[s] <= params.tolerance * min(
                    occ[x] for x in syms[cid]
                ):
                    newly.add(cid)
                    break
        reached |= newly
        frontier = set().union(*(syms[c] for c in newly)) if newly else set()
    assert set(selected) <= reached


# ---------------------------------------------------------------------------
# export_problem / validate_fof
# ---------------------------------------------------------------------------


def _field_goal_and_kb():
    kb = KnowledgeBase()
    for text in [
        "perfect(?E) :- alg_ext(?E,?F), perfect(?F).",
        "alg_ext(e1,f1).",
        "perfect(f1).",
    ]:
        kb.assert_clause(parse_formula(text))
    goal = Goal(hypotheses=(), conclusions=(parse_atom_text("perfect(e1)"),),
                span_map=SpanMap())
    return goal, kb


def test_export_field_problem():
    goal, kb = _field_goal_and_kb()
    doc = export_problem(goal, kb)
    assert doc.count("fof(") == 4  # 3 axioms + 1 conjecture
    assert validate_fof(doc) == []
    assert "fof(goal, conjecture, perfect(e1))." in doc


def test_export_empty_kb_conjecture_only():
    goal = Goal(hypotheses=(), conclusions=(parse_atom_text("p(a)"),), span_map=SpanMap())
    doc = export_problem(goal, KnowledgeBase())
    assert doc.count("fof(") == 1
    assert validate_fof(doc) == []


def test_export_exponent2_matches_reference_statement(exponent2_kb, exponent2_hypotheses):
    goal = Goal(
        hypotheses=exponent2_hypotheses,
        conclusions=(parse_atom_text("product(b,a,c)"),),
        span_map=SpanMap(),
    )
    doc = export_problem(goal, exponent2_kb)
    assert validate_fof(doc) == []
    conjecture = parse_fof_document(doc).by_name("goal")
    # (hyps) => product(b, a, c)
    assert conjecture.op == "imp"
    antecedent, consequent = conjecture.children
    assert consequent.atom == "product(b, a, c)"
    atoms = antecedent.atoms()
    assert "product(a, b, c)" in atoms
    assert "product(X, X, identity)" in atoms  # the squared-element hypothesis


def test_validate_fof_reports_unbalanced():
    findings = validate_fof("fof(x, axiom, p(a)")
    assert findings and findings[0]["line"] == 1
    assert "unbalanced" in findings[0]["error"]


def test_validate_fof_rejects_uppercase_predicate():
    findings = validate_fof("fof(x, axiom, P(a)).")
    assert findings and "uppercase" in findings[0]["error"]


def test_validate_fof_rejects_bad_role():
    findings = validate_fof("fof(x, lemma, p(a)).")
    assert findings and "role" in findings[0]["error"]


def test_closure_fuzz():
    rng = random.Random(31)
    for _ in range(40):
        clauses, goals = random_function_free_kb(rng)
        kb = KnowledgeBase()
        for clause in clauses:
            kb.assert_clause(clause)
        goal = Goal(
            hypotheses=tuple(
                c for c in clauses[:2] if c.is_fact
            ),
            conclusions=(goals[0],),
            span_map=SpanMap(),
        )
        doc = export_problem(goal, kb)
        assert validate_fof(doc) == [], doc
