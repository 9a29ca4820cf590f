"""The versioned store for both layers: formal clauses with provenance, and
the literature side (publications, pages, annotations), plus bridge rules.

Mutations go through a single Store owner and accumulate as pending changes;
``commit`` seals them into a content-addressed revision whose id is the hash
of (parent, author, timestamp, change-set hash). Corrupting any byte of a
persisted change-set breaks the chain, which ``verify_history`` detects.

Persistence is one directory:

    clauses.kbt         clause-per-line text, ``#`` comments, ``#:`` id tags
    publications.json   pages.json   annotations.json   rules.json
    revlog/<hash>.json  one file per revision
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .bridge import PatternRule, RuleSet
from .errors import KbError
from .logic import (
    Clause,
    SymbolRegistry,
    parse_formula,
    print_formula,
    range_restriction_error,
    symbols_of,
)


@dataclass
class Publication:
    id: str
    title: str
    authors: list[str] = field(default_factory=list)
    year: int | None = None
    source_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "authors": self.authors,
            "year": self.year,
            "source_ref": self.source_ref,
        }


@dataclass
class Page:
    id: str
    publication_id: str
    title: str
    body: str = ""
    parent: str | None = None
    rank: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "publication_id": self.publication_id,
            "title": self.title,
            "body": self.body,
            "parent": self.parent,
            "rank": self.rank,
        }


@dataclass
class AnnotationRecord:
    id: str
    page_id: str
    byte_range: tuple[int, int]
    clause_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "page_id": self.page_id,
            "byte_range": list(self.byte_range),
            "clause_ids": self.clause_ids,
        }


@dataclass
class Revision:
    id: str
    parent: str | None
    author: str
    timestamp: float
    message: str
    changeset: list[dict]
    changeset_hash: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "parent": self.parent,
            "author": self.author,
            "timestamp": self.timestamp,
            "message": self.message,
            "changeset": self.changeset,
            "changeset_hash": self.changeset_hash,
        }


def _hash_changeset(changeset: list[dict]) -> str:
    canonical = json.dumps(changeset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def revision_id(parent: str | None, author: str, timestamp: float, changeset_hash: str) -> str:
    material = json.dumps(
        [parent, author, timestamp, changeset_hash], separators=(",", ":")
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AssertReport:
    clause_id: str
    duplicate: bool


@dataclass(frozen=True)
class TocNode:
    page_id: str
    children: tuple

    def flatten(self) -> list[str]:
        out = [self.page_id]
        for child in self.children:
            out.extend(child.flatten())
        return out


class KnowledgeBase:
    """Clauses plus the shared symbol registry. Owned by a Store; reads may
    happen from any thread, mutations only through the owner."""

    def __init__(self) -> None:
        self.clauses: dict[str, Clause] = {}
        self.registry = SymbolRegistry()
        self._next = 1

    def __len__(self) -> int:
        return len(self.clauses)

    def fresh_id(self) -> str:
        cid = f"c{self._next:04d}"
        self._next += 1
        return cid

    def assert_clause(self, clause: Clause, provenance: str | None = None) -> AssertReport:
        err = range_restriction_error(clause)
        if err is not None:
            raise KbError("E_RANGE_RESTRICTION", err, clause=print_formula(clause))
        self.registry.register_clause(clause)  # raises E_NAMESPACE_CLASH untouched
        duplicate = any(clause.same_formula(c) for c in self.clauses.values())
        cid = self.fresh_id()
        stored = Clause(head=clause.head, body=clause.body, id=cid, provenance=provenance)
        self.clauses[cid] = stored
        return AssertReport(clause_id=cid, duplicate=duplicate)

    def remove_clause(self, clause_id: str) -> Clause:
        if clause_id not in self.clauses:
            raise KbError("E_RANGE_RESTRICTION", f"no clause {clause_id!r}")
        return self.clauses.pop(clause_id)

    # -- relevance ----------------------------------------------------------

    def relevant_facts(self, goal_symbols: set[str], k: int) -> list[str]:
        """Rank clauses by Jaccard similarity of symbol sets against the
        goal; zero-score clauses reachable within two co-occurrence hops are
        appended after all positive scores. At most ``k`` ids, and the result
        for k is always a prefix of the result for k+1."""
        if k < 1:
            raise KbError("E_RANGE_RESTRICTION", "k must be >= 1")
        reach = set(goal_symbols)
        for _ in range(2):
            grown = set(reach)
            for name in reach:
                entry = self.registry.entries.get(name)
                if entry:
                    grown |= set(entry.co_occurrence)
            reach = grown
        scored = []
        for cid, clause in self.clauses.items():
            syms = symbols_of(clause)
            if not syms:
                continue
            inter = len(syms & goal_symbols)
            union = len(syms | goal_symbols)
            score = inter / union if union else 0.0
            if score > 0:
                scored.append((0, -score, len(syms), cid))
            elif syms & reach:
                scored.append((1, 0.0, len(syms), cid))
        scored.sort()
        return [cid for _, _, _, cid in scored[:k]]


class Store:
    """The single-writer versioned store uniting clauses, literature records
    and bridge rules, with an append-only revision log."""

    def __init__(self, clock=time.time) -> None:
        self.kb = KnowledgeBase()
        self.publications: dict[str, Publication] = {}
        self.pages: dict[str, Page] = {}
        self.annotations: dict[str, AnnotationRecord] = {}
        self.rules = RuleSet()
        self.history: list[Revision] = []
        self.pending: list[dict] = []
        self.clock = clock

    @property
    def head_revision(self) -> str | None:
        return self.history[-1].id if self.history else None

    # -- clause layer --------------------------------------------------------

    def assert_clause(self, clause: Clause, provenance: str | None = None) -> AssertReport:
        report = self.kb.assert_clause(clause, provenance)
        self.pending.append(
            {
                "op": "assert_clause",
                "id": report.clause_id,
                "clause": print_formula(clause),
                "provenance": provenance,
            }
        )
        return report

    def assert_text(self, text: str, provenance: str | None = None) -> AssertReport:
        return self.assert_clause(parse_formula(text), provenance)

    def remove_clause(self, clause_id: str) -> None:
        clause = self.kb.remove_clause(clause_id)
        self.pending.append(
            {"op": "remove_clause", "id": clause_id, "clause": print_formula(clause)}
        )

    # -- literature layer ----------------------------------------------------

    def add_publication(self, pub: Publication) -> None:
        if pub.id in self.publications:
            raise KbError("E_NAMESPACE_CLASH", f"publication {pub.id!r} exists")
        self.publications[pub.id] = pub
        self.pending.append({"op": "add_publication", "record": pub.to_dict()})

    def add_page(self, page: Page) -> None:
        if page.id in self.pages:
            raise KbError("E_NAMESPACE_CLASH", f"page {page.id!r} exists")
        if page.parent is not None and page.parent not in self.pages:
            raise KbError("E_PAGE_CYCLE", f"parent page {page.parent!r} does not exist")
        self.pages[page.id] = page
        try:
            self.toc(page.publication_id)
        except KbError:
            del self.pages[page.id]
            raise
        self.pending.append({"op": "add_page", "record": page.to_dict()})

    def edit_page(self, page: Page) -> None:
        if page.id not in self.pages:
            raise KbError("E_PAGE_CYCLE", f"no page {page.id!r}")
        previous = self.pages[page.id]
        self.pages[page.id] = page
        try:
            self.toc(page.publication_id)
        except KbError:
            self.pages[page.id] = previous
            raise
        self.pending.append({"op": "edit_page", "record": page.to_dict()})

    def add_annotation(self, ann: AnnotationRecord) -> None:
        page = self.pages.get(ann.page_id)
        if page is None:
            raise KbError("E_PAGE_CYCLE", f"no page {ann.page_id!r}")
        if not ann.clause_ids:
            raise KbError("E_RANGE_RESTRICTION", "annotation needs at least one clause")
        start, end = ann.byte_range
        if not (0 <= start < end <= len(page.body.encode("utf-8"))):
            raise KbError("E_RANGE_RESTRICTION", "annotation range outside page body")
        self.annotations[ann.id] = ann
        self.pending.append({"op": "add_annotation", "record": ann.to_dict()})

    def toc(self, publication_id: str) -> list[TocNode]:
        """Depth-first page tree, siblings ordered by (rank, title). Raises
        E_PAGE_CYCLE naming a page on any parent cycle."""
        pages = [p for p in self.pages.values() if p.publication_id == publication_id]
        by_id = {p.id: p for p in pages}
        for page in pages:
            seen = {page.id}
            cursor = page
            while cursor.parent is not None and cursor.parent in by_id:
                if cursor.parent in seen:
                    raise KbError(
                        "E_PAGE_CYCLE",
                        f"page {page.id!r} is on a parent cycle",
                        page_id=page.id,
                    )
                seen.add(cursor.parent)
                cursor = by_id[cursor.parent]
        children: dict[str | None, list[Page]] = {}
        for page in pages:
            parent = page.parent if page.parent in by_id else None
            children.setdefault(parent, []).append(page)

        def build(parent: str | None) -> list[TocNode]:
            ordered = sorted(children.get(parent, []), key=lambda p: (p.rank, p.title))
            return [TocNode(page_id=p.id, children=tuple(build(p.id))) for p in ordered]

        return build(None)

    # -- rules ----------------------------------------------------------------

    def add_rule(self, rule: PatternRule, validate: bool = True) -> None:
        self.rules = self.rules.with_rule(rule, validate=validate)
        self.pending.append({"op": "add_rule", "record": rule.to_dict()})

    # -- revisions -------------------------------------------------------------

    def commit(self, author: str, message: str) -> Revision:
        if not self.pending:
            raise KbError("E_EMPTY_COMMIT", "no pending changes to commit")
        changeset = self.pending
        self.pending = []
        cs_hash = _hash_changeset(changeset)
        timestamp = float(self.clock())
        parent = self.head_revision
        rev = Revision(
            id=revision_id(parent, author, timestamp, cs_hash),
            parent=parent,
            author=author,
            timestamp=timestamp,
            message=message,
            changeset=changeset,
            changeset_hash=cs_hash,
        )
        self.history.append(rev)
        return rev

    def verify_history(self) -> bool:
        parent = None
        for rev in self.history:
            if rev.parent != parent:
                return False
            if _hash_changeset(rev.changeset) != rev.changeset_hash:
                return False
            if revision_id(rev.parent, rev.author, rev.timestamp, rev.changeset_hash) != rev.id:
                return False
            parent = rev.id
        return True

    # -- persistence -------------------------------------------------------------

    def export_clauses(self) -> str:
        lines = ["# t2ku knowledge base export"]
        for cid, clause in self.kb.clauses.items():
            tag = f"#: {cid}"
            if clause.provenance:
                tag += f" prov={clause.provenance}"
            lines.append(tag)
            lines.append(print_formula(clause))
        return "\n".join(lines) + "\n"

    def import_clauses(self, text: str) -> list[AssertReport]:
        """Read a clause-per-line file. ``#:`` directives carry ids from a
        previous export; ids are reassigned on import, provenance is kept."""
        reports = []
        provenance: str | None = None
        for line in text.splitlines():
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#:"):
                provenance = None
                for part in stripped[2:].split():
                    if part.startswith("prov="):
                        provenance = part[5:]
                continue
            if stripped.startswith("#"):
                continue
            reports.append(self.assert_clause(parse_formula(stripped), provenance))
            provenance = None
        return reports

    def save(self, data_dir: str | Path) -> None:
        root = Path(data_dir)
        root.mkdir(parents=True, exist_ok=True)
        (root / "clauses.kbt").write_text(self.export_clauses(), encoding="utf-8")
        (root / "publications.json").write_text(
            json.dumps([p.to_dict() for p in self.publications.values()], indent=2),
            encoding="utf-8",
        )
        (root / "pages.json").write_text(
            json.dumps([p.to_dict() for p in self.pages.values()], indent=2),
            encoding="utf-8",
        )
        (root / "annotations.json").write_text(
            json.dumps([a.to_dict() for a in self.annotations.values()], indent=2),
            encoding="utf-8",
        )
        (root / "rules.json").write_text(self.rules.to_json(), encoding="utf-8")
        revdir = root / "revlog"
        revdir.mkdir(exist_ok=True)
        for rev in self.history:
            path = revdir / f"{rev.id}.json"
            if not path.exists():
                path.write_text(json.dumps(rev.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, data_dir: str | Path, clock=time.time) -> "Store":
        root = Path(data_dir)
        store = cls(clock=clock)
        clauses = root / "clauses.kbt"
        if clauses.exists():
            store._load_clauses(clauses.read_text(encoding="utf-8"))
        pubs = root / "publications.json"
        if pubs.exists():
            for item in json.loads(pubs.read_text(encoding="utf-8")):
                store.publications[item["id"]] = Publication(
                    id=item["id"],
                    title=item["title"],
                    authors=item.get("authors", []),
                    year=item.get("year"),
                    source_ref=item.get("source_ref", ""),
                )
        pages = root / "pages.json"
        if pages.exists():
            for item in json.loads(pages.read_text(encoding="utf-8")):
                store.pages[item["id"]] = Page(
                    id=item["id"],
                    publication_id=item["publication_id"],
                    title=item["title"],
                    body=item.get("body", ""),
                    parent=item.get("parent"),
                    rank=item.get("rank", 0),
                )
        anns = root / "annotations.json"
        if anns.exists():
            for item in json.loads(anns.read_text(encoding="utf-8")):
                store.annotations[item["id"]] = AnnotationRecord(
                    id=item["id"],
                    page_id=item["page_id"],
                    byte_range=tuple(item["byte_range"]),
                    clause_ids=item["clause_ids"],
                )
        rules = root / "rules.json"
        if rules.exists():
            store.rules = RuleSet.from_json(rules.read_text(encoding="utf-8"))
        revdir = root / "revlog"
        if revdir.is_dir():
            revs = []
            for path in revdir.glob("*.json"):
                item = json.loads(path.read_text(encoding="utf-8"))
                revs.append(
                    Revision(
                        id=item["id"],
                        parent=item.get("parent"),
                        author=item["author"],
                        timestamp=item["timestamp"],
                        message=item["message"],
                        changeset=item["changeset"],
                        changeset_hash=item["changeset_hash"],
                    )
                )
            store.history = _chain_order(revs)
        store.pending = []
        return store

    def _load_clauses(self, text: str) -> None:
        """Restore clauses keeping their exported ids."""
        pending_id: str | None = None
        provenance: str | None = None
        for line in text.splitlines():
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#:"):
                parts = stripped[2:].split()
                pending_id = parts[0] if parts else None
                provenance = None
                for part in parts[1:]:
                    if part.startswith("prov="):
                        provenance = part[5:]
                continue
            if stripped.startswith("#"):
                continue
            clause = parse_formula(stripped)
            self.kb.registry.register_clause(clause)
            cid = pending_id or self.kb.fresh_id()
            self.kb.clauses[cid] = Clause(
                head=clause.head, body=clause.body, id=cid, provenance=provenance
            )
            number = int(cid[1:]) if cid[1:].isdigit() else 0
            self.kb._next = max(self.kb._next, number + 1)
            pending_id = provenance = None


def _chain_order(revs: list[Revision]) -> list[Revision]:
    """Order loaded revisions by their parent chain."""
    by_parent = {rev.parent: rev for rev in revs}
    ordered = []
    cursor = by_parent.get(None)
    while cursor is not None:
        ordered.append(cursor)
        cursor = by_parent.get(cursor.id)
    if len(ordered) != len(revs):
        raise KbError("E_EMPTY_COMMIT", "revision log is not a single chain")
    return ordered
