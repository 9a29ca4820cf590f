from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import (  # noqa: E402
    EXPONENT2_AXIOMS,
    EXPONENT2_HYPOTHESES,
    ambiguity_rules,
    equivalence_rules,
    group_rules,
    holds_rules,
)
from t2ku.kb import KnowledgeBase, Store  # noqa: E402
from t2ku.logic import parse_formula  # noqa: E402


@pytest.fixture
def eq_rules():
    return equivalence_rules()


@pytest.fixture
def grp_rules():
    return group_rules()


@pytest.fixture
def exponent2_kb() -> KnowledgeBase:
    kb = KnowledgeBase()
    for text in EXPONENT2_AXIOMS:
        kb.assert_clause(parse_formula(text))
    return kb


@pytest.fixture
def exponent2_hypotheses():
    return tuple(parse_formula(text) for text in EXPONENT2_HYPOTHESES)


@pytest.fixture
def full_rule_store() -> Store:
    """A store loaded with every fixture rule family, the way the service
    would boot it from rules.json."""
    store = Store()
    for rule in (
        equivalence_rules() + group_rules() + holds_rules() + ambiguity_rules()
    ):
        store.add_rule(rule, validate=False)
    return store


_acceptance_results: list[tuple[str, str]] = []


def record_acceptance(label: str, passed: bool) -> None:
    _acceptance_results.append((label, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _acceptance_results:
        terminalreporter.write_line(f"{status}  {label}")
