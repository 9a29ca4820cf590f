"""Proof trees and the structural proof checker.

The checker is the trust boundary: externally submitted proofs and our own
search results both pass through it. It shares only the clause data model
with the prover and re-implements matching from scratch, so a search bug
cannot vouch for itself.

A node is valid when its atom is an instance of one head atom of the
justifying clause and its children line up 1:1 with the clause body under
the same substitution. Justification is either a knowledge-base clause id
or the literal string "hypothesis" (checked against the goal's hypothesis
clauses). A multi-conclusion proof may carry a synthetic "conjunction" root
whose children prove the individual conclusions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

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
    print_atom,
)

HYPOTHESIS = "hypothesis"
CONJUNCTION = "conjunction"
FALSUM_ATOM = Predicate("falsum", ())


@dataclass(frozen=True)
class ProofNode:
    atom: Atom
    justification: str  # clause id | "hypothesis" | "conjunction"
    children: tuple = ()

    def depth(self) -> int:
        if self.justification == CONJUNCTION:
            return max((c.depth() for c in self.children), default=0)
        return 1 + max((c.depth() for c in self.children), default=0)

    def size(self) -> int:
        base = 0 if self.justification == CONJUNCTION else 1
        return base + sum(c.size() for c in self.children)

    def to_dict(self) -> dict:
        return {
            "atom": print_atom(self.atom),
            "justification": self.justification,
            "children": [c.to_dict() for c in self.children],
        }


def _instance_term(pattern: Term, target: Term, binding: dict) -> bool:
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
        and all(_instance_term(p, t, binding) for p, t in zip(pattern.args, target.args))
    )


def _instance_atom(pattern: Atom, target: Atom, binding: dict) -> bool:
    if isinstance(pattern, Predicate):
        return (
            isinstance(target, Predicate)
            and pattern.name == target.name
            and len(pattern.args) == len(target.args)
            and all(_instance_term(p, t, binding) for p, t in zip(pattern.args, target.args))
        )
    if isinstance(pattern, Membership):
        return (
            isinstance(target, Membership)
            and pattern.cls == target.cls
            and _instance_term(pattern.instance, target.instance, binding)
        )
    return (
        isinstance(target, Frame)
        and isinstance(pattern, Frame)
        and pattern.attribute == target.attribute
        and _instance_term(pattern.instance, target.instance, binding)
        and _instance_term(pattern.value, target.value, binding)
    )


def _node_fits_clause(node: ProofNode, clause: Clause, expect_falsum: bool) -> bool:
    heads = clause.head if clause.head else (FALSUM_ATOM,)
    if clause.is_constraint and not expect_falsum:
        return False
    for head in heads:
        binding: dict = {}
        if not _instance_atom(head, node.atom, binding):
            continue
        if len(node.children) != len(clause.body):
            continue
        trial = dict(binding)
        if all(
            _instance_atom(b, child.atom, trial)
            for b, child in zip(clause.body, node.children)
        ):
            return True
    return False


@dataclass
class CheckResult:
    ok: bool
    errors: list[str] = field(default_factory=list)


def check_proof(
    root: ProofNode,
    kb_clauses: dict[str, Clause],
    hypotheses: tuple[Clause, ...] = (),
    conclusions: tuple[Atom, ...] | None = None,
) -> CheckResult:
    """Validate a proof tree bottom-up. ``conclusions``, when given, pins the
    root: either a single conclusion proved directly or a conjunction node
    whose children's atoms equal the conclusion list."""
    errors: list[str] = []

    def visit(node: ProofNode, is_root: bool) -> None:
        if node.justification == CONJUNCTION:
            if not is_root:
                errors.append("conjunction node below the root")
                return
            for child in node.children:
                visit(child, False)
            return
        expect_falsum = node.atom == FALSUM_ATOM
        if node.justification == HYPOTHESIS:
            if not any(_node_fits_clause(node, h, expect_falsum) for h in hypotheses):
                errors.append(f"no hypothesis justifies {print_atom(node.atom)}")
        else:
            clause = kb_clauses.get(node.justification)
            if clause is None:
                errors.append(f"unknown clause id {node.justification!r}")
            elif not _node_fits_clause(node, clause, expect_falsum):
                errors.append(
                    f"{print_atom(node.atom)} is not an instance of clause "
                    f"{node.justification} with matching children"
                )
        for child in node.children:
            visit(child, False)

    visit(root, True)

    if conclusions is not None:
        if root.justification == CONJUNCTION:
            proved = tuple(c.atom for c in root.children)
        else:
            proved = (root.atom,)
        if tuple(conclusions) != proved:
            errors.append("proof root does not match the goal conclusions")
    return CheckResult(ok=not errors, errors=errors)


def parse_atom_text(text: str) -> Atom:
    from .logic import parse_formula

    if text == "falsum":
        return FALSUM_ATOM
    clause = parse_formula(text + ".")
    return clause.head[0]


def proof_from_dict(data: dict) -> ProofNode:
    """Rebuild a proof tree from its wire form."""
    return ProofNode(
        atom=parse_atom_text(data["atom"]),
        justification=data["justification"],
        children=tuple(proof_from_dict(c) for c in data.get("children", [])),
    )
