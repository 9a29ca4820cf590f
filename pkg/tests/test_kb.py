from __future__ import annotations

import json
import random

import pytest

from helpers import ManualClock, equivalence_rules
from t2ku.errors import KbError
from t2ku.kb import AnnotationRecord, KnowledgeBase, Page, Publication, Store, revision_id
from t2ku.logic import parse_formula, symbols_of

EXAMPLE1 = (
    "either_true(isomorphic(?P,D_8),isomorphic(?P,Q_8)) :- "
    "?P:nonabelian_group[order->8]."
)


def test_assert_example1_registers_seven_symbols():
    kb = KnowledgeBase()
    report = kb.assert_clause(parse_formula(EXAMPLE1))
    assert len(kb.clauses) == 1
    assert len(kb.registry.entries) == 7
    assert not report.duplicate


def test_assert_duplicate_gets_fresh_id_and_flag():
    kb = KnowledgeBase()
    first = kb.assert_clause(parse_formula("p(a)."))
    second = kb.assert_clause(parse_formula("p(a)."))
    assert first.clause_id != second.clause_id
    assert second.duplicate and not first.duplicate
    assert len(kb.clauses) == 2


def test_assert_range_restriction():
    kb = KnowledgeBase()
    with pytest.raises(KbError) as exc:
        kb.assert_clause(parse_formula("p(?X)."))
    assert exc.value.code == "E_RANGE_RESTRICTION"


def test_assert_namespace_clash_propagates():
    kb = KnowledgeBase()
    kb.assert_clause(parse_formula("p(a)."))
    with pytest.raises(Exception) as exc:
        kb.assert_clause(parse_formula("p(a,b)."))
    assert getattr(exc.value, "code", "") == "E_NAMESPACE_CLASH"


def test_registry_closure_over_asserted_clauses():
    kb = KnowledgeBase()
    for text in [EXAMPLE1, "p(a).", "q(b) :- p(b)."]:
        kb.assert_clause(parse_formula(text))
    for clause in kb.clauses.values():
        assert symbols_of(clause) <= set(kb.registry.entries)


# ---------------------------------------------------------------------------
# relevant_facts
# ---------------------------------------------------------------------------


def _field_kb() -> KnowledgeBase:
    kb = KnowledgeBase()
    for text in [
        "perfect(?E) :- alg_ext(?E,?F), perfect(?F).",
        "alg_ext(e1,f1).",
        "perfect(f1).",
        "q(z).",
    ]:
        kb.assert_clause(parse_formula(text))
    return kb


def test_relevant_facts_example():
    kb = _field_kb()
    ranked = kb.relevant_facts({"perfect", "alg_ext"}, 10)
    assert ranked == ["c0001", "c0003", "c0002"]  # q(z) unreachable, excluded


def test_relevant_facts_empty_kb():
    assert KnowledgeBase().relevant_facts({"p"}, 5) == []


def test_relevant_facts_no_overlap_no_reachability():
    kb = _field_kb()
    assert kb.relevant_facts({"unrelated_symbol"}, 5) == []


def test_relevant_facts_two_hop_reachability():
    kb = KnowledgeBase()
    kb.assert_clause(parse_formula("a_b(x1) :- bridge_ab(x1)."))  # a-side
    kb.assert_clause(parse_formula("bridge_bc(x2) :- bridge_ab(x2)."))
    kb.assert_clause(parse_formula("far(x3) :- bridge_bc(x3)."))
    kb.assert_clause(parse_formula("island(x9)."))
    ranked = kb.relevant_facts({"a_b"}, 10)
    ids = set(ranked)
    assert "c0001" in ids  # direct overlap
    assert "c0002" in ids and "c0003" in ids  # 1 and 2 hops out
    assert "c0004" not in ids


def test_relevant_facts_k_prefix_monotonicity():
    kb = _field_kb()
    rng = random.Random(11)
    for _ in range(20):
        syms = set(rng.sample(["perfect", "alg_ext", "q", "z", "e1", "f1"], 2))
        previous = None
        for k in range(1, 6):
            current = kb.relevant_facts(syms, k)
            if previous is not None:
                assert current[: len(previous)] == previous
            previous = current


# ---------------------------------------------------------------------------
# pages / toc
# ---------------------------------------------------------------------------


def _store_with_book() -> Store:
    store = Store(clock=ManualClock())
    store.add_publication(Publication(id="book1", title="Algebra"))
    return store


def test_toc_orders_by_rank_then_title():
    store = _store_with_book()
    store.add_page(Page(id="A", publication_id="book1", title="root"))
    store.add_page(Page(id="B", publication_id="book1", title="late", parent="A", rank=1))
    store.add_page(Page(id="C", publication_id="book1", title="early", parent="A", rank=0))
    toc = store.toc("book1")
    assert [n.page_id for n in toc] == ["A"]
    assert [n.page_id for n in toc[0].children] == ["C", "B"]


def test_toc_single_root():
    store = _store_with_book()
    store.add_page(Page(id="A", publication_id="book1", title="root"))
    assert [n.page_id for n in store.toc("book1")] == ["A"]


def test_toc_cycle_rejected():
    store = _store_with_book()
    store.add_page(Page(id="A", publication_id="book1", title="a"))
    store.add_page(Page(id="B", publication_id="book1", title="b", parent="A"))
    with pytest.raises(KbError) as exc:
        store.edit_page(Page(id="A", publication_id="book1", title="a", parent="B"))
    assert exc.value.code == "E_PAGE_CYCLE"
    # the rejected edit must not corrupt the store
    assert [n.page_id for n in store.toc("book1")] == ["A"]


def test_toc_random_forests_never_error():
    rng = random.Random(5)
    for _ in range(30):
        store = _store_with_book()
        ids: list[str] = []
        for i in range(rng.randint(1, 12)):
            parent = rng.choice(ids) if ids and rng.random() < 0.7 else None
            page = Page(
                id=f"p{i}", publication_id="book1", title=f"t{rng.randint(0, 3)}",
                parent=parent, rank=rng.randint(0, 3),
            )
            store.add_page(page)
            ids.append(page.id)
        toc = store.toc("book1")
        seen: list[str] = []
        stack = list(toc)
        while stack:
            node = stack.pop()
            seen.append(node.page_id)
            stack.extend(node.children)
        assert sorted(seen) == sorted(ids)  # every page exactly once


def test_annotations_validate_range_and_clauses():
    store = _store_with_book()
    store.add_page(Page(id="A", publication_id="book1", title="a", body="hello world"))
    report = store.assert_text("p(a).")
    store.add_annotation(
        AnnotationRecord(id="a1", page_id="A", byte_range=(0, 5),
                         clause_ids=[report.clause_id])
    )
    with pytest.raises(KbError):
        store.add_annotation(
            AnnotationRecord(id="a2", page_id="A", byte_range=(0, 999),
                             clause_ids=[report.clause_id])
        )
    with pytest.raises(KbError):
        store.add_annotation(
            AnnotationRecord(id="a3", page_id="A", byte_range=(0, 5), clause_ids=[])
        )


# ---------------------------------------------------------------------------
# revisions
# ---------------------------------------------------------------------------


def test_commit_chain_and_parent_links():
    store = Store(clock=ManualClock())
    store.assert_text("p(a).")
    first = store.commit("alice", "add p")
    store.assert_text("q(b).")
    second = store.commit("alice", "add q")
    assert len(store.history) == 2
    assert second.parent == first.id
    assert store.verify_history()


def test_empty_commit_rejected():
    store = Store(clock=ManualClock())
    with pytest.raises(KbError) as exc:
        store.commit("alice", "nothing")
    assert exc.value.code == "E_EMPTY_COMMIT"


def test_verify_after_random_commit_sequences():
    rng = random.Random(9)
    for _ in range(25):
        clock = ManualClock()
        store = Store(clock=clock)
        for i in range(rng.randint(1, 8)):
            store.assert_text(f"p(k{i}).")
            if rng.random() < 0.3:
                store.add_publication(Publication(id=f"pub{i}", title=f"t{i}"))
            clock.advance(rng.random() * 100)
            store.commit(f"author{i % 3}", f"step {i}")
        assert store.verify_history()


def test_single_byte_corruption_detected():
    store = Store(clock=ManualClock())
    store.assert_text("p(a).")
    store.commit("alice", "add")
    rev = store.history[0]
    rev.changeset[0]["clause"] = rev.changeset[0]["clause"].replace("p(a)", "p(b)")
    assert not store.verify_history()


def test_revision_id_is_tamper_evident():
    rid = revision_id(None, "alice", 1000.0, "deadbeef")
    assert rid != revision_id(None, "alice", 1000.0, "deadbeee")
    assert rid != revision_id(None, "alice", 1001.0, "deadbeef")
    assert rid != revision_id("x", "alice", 1000.0, "deadbeef")


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_save_load_roundtrip(tmp_path):
    clock = ManualClock()
    store = Store(clock=clock)
    store.assert_text(EXAMPLE1)
    store.assert_text("p(a).", provenance="a1")
    store.add_publication(Publication(id="book1", title="Algebra", authors=["A. Author"]))
    store.add_page(Page(id="A", publication_id="book1", title="ch1", body="text here"))
    store.add_annotation(
        AnnotationRecord(id="a1", page_id="A", byte_range=(0, 4), clause_ids=["c0002"])
    )
    for rule in equivalence_rules():
        store.add_rule(rule)
    store.commit("alice", "seed")
    store.save(tmp_path)

    loaded = Store.load(tmp_path)
    assert len(loaded.kb.clauses) == 2
    assert loaded.kb.clauses["c0002"].provenance == "a1"
    assert len(loaded.kb.registry.entries) >= 7
    assert loaded.publications["book1"].title == "Algebra"
    assert loaded.pages["A"].body == "text here"
    assert loaded.annotations["a1"].byte_range == (0, 4)
    assert len(loaded.rules) == 2
    assert loaded.verify_history()
    assert loaded.head_revision == store.head_revision
    # fresh ids continue after the loaded ones
    report = loaded.assert_text("q(b).")
    assert report.clause_id == "c0003"


def test_export_import_clause_file():
    store = Store(clock=ManualClock())
    store.assert_text("p(a).")
    store.assert_text(EXAMPLE1)
    text = store.export_clauses()
    other = Store(clock=ManualClock())
    reports = other.import_clauses(text)
    assert len(reports) == 2
    assert {str(c.head) for c in other.kb.clauses.values()} == {
        str(c.head) for c in store.kb.clauses.values()
    }


def test_revlog_files_written(tmp_path):
    store = Store(clock=ManualClock())
    store.assert_text("p(a).")
    rev = store.commit("alice", "add")
    store.save(tmp_path)
    path = tmp_path / "revlog" / f"{rev.id}.json"
    assert path.exists()
    data = json.loads(path.read_text())
    assert data["changeset_hash"] == rev.changeset_hash
