from __future__ import annotations

import random

import pytest

from helpers import (
    AMBIGUOUS_SOURCE,
    ManualClock,
    ambiguity_rules,
    holds_rules,
)
from t2ku.errors import YardError
from t2ku.infer import Verdict
from t2ku.kb import Store
from t2ku.proofcheck import ProofNode, parse_atom_text
from t2ku.yard import LocalEngine, YardStore

PROVABLE_SOURCE = "Let $p$ hold.\nProve that $p$ holds.\n"


def _store(with_ambiguity: bool = False, clock=None) -> Store:
    store = Store(clock=clock or ManualClock())
    for rule in holds_rules():
        store.add_rule(rule, validate=False)
    if with_ambiguity:
        for rule in ambiguity_rules():
            store.add_rule(rule, validate=False)
    return store


def _yard(clock: ManualClock, with_ambiguity: bool = False, **kwargs) -> YardStore:
    return YardStore(_store(with_ambiguity, clock), clock=clock, **kwargs)


def _proved_verdict() -> Verdict:
    return Verdict(
        kind="proved",
        proof=ProofNode(parse_atom_text("holds(c_p)"), "hypothesis", ()),
    )


def _unknown_verdict(relevant=()) -> Verdict:
    return Verdict(kind="unknown", relevant=list(relevant))


# ---------------------------------------------------------------------------
# creation and disambiguation
# ---------------------------------------------------------------------------


def test_create_problem_enqueues_tasks():
    clock = ManualClock()
    yard = _yard(clock)
    problem = yard.create_problem(PROVABLE_SOURCE)
    assert problem.state == "pending"
    assert len(problem.task_ids) == 2  # native + tptp payloads
    kinds = {yard.tasks[t].payload_kind for t in problem.task_ids}
    assert kinds == {"native", "tptp"}


def test_create_group_example_goes_pending():
    from helpers import GROUP_SOURCE, group_rules

    clock = ManualClock()
    store = Store(clock=clock)
    for rule in group_rules():
        store.add_rule(rule, validate=False)
    yard = YardStore(store, clock=clock)
    problem = yard.create_problem(GROUP_SOURCE)
    assert problem.state == "pending"
    native = [t for t in problem.task_ids if yard.tasks[t].payload_kind == "native"]
    assert len(native) == 1
    payload = yard.tasks[native[0]].payload
    assert payload["conclusions"] == ["commutative(c_G)"]
    assert "c_G:Group." in payload["hypotheses"]


def test_create_problem_parse_error():
    yard = _yard(ManualClock())
    with pytest.raises(YardError) as exc:
        yard.create_problem("Let $G$.")
    assert exc.value.code == "E_PARSE"


def test_create_problem_untranslated_lists_nearest_rules():
    yard = _yard(ManualClock())
    with pytest.raises(YardError) as exc:
        yard.create_problem("Let $p$ hold.\nProve that $q$ explodes.\n")
    assert exc.value.code == "E_UNTRANSLATED"
    failures = exc.value.details["failures"]
    assert failures[0]["sentence_index"] == 1
    assert isinstance(failures[0]["nearest_rules"], list)


def test_ambiguous_problem_needs_disambiguation():
    yard = _yard(ManualClock(), with_ambiguity=True)
    problem = yard.create_problem(AMBIGUOUS_SOURCE)
    assert problem.state == "needs_disambiguation"
    assert len(problem.ambiguities) == 1
    amb = problem.ambiguities[0]
    assert amb.sentence_index == 1
    assert len(amb.candidates) == 2
    assert problem.task_ids == []


def test_disambiguate_flow():
    yard = _yard(ManualClock(), with_ambiguity=True)
    problem = yard.create_problem(AMBIGUOUS_SOURCE)
    resolved = yard.disambiguate(problem.id, {1: 0})
    assert resolved.state == "pending"
    assert len(resolved.task_ids) == 2


def test_disambiguate_bad_choice_and_wrong_state():
    yard = _yard(ManualClock(), with_ambiguity=True)
    problem = yard.create_problem(AMBIGUOUS_SOURCE)
    with pytest.raises(YardError) as exc:
        yard.disambiguate(problem.id, {})
    assert exc.value.code == "E_BAD_CHOICE"
    with pytest.raises(YardError) as exc:
        yard.disambiguate(problem.id, {1: 5})
    assert exc.value.code == "E_BAD_CHOICE"
    yard.disambiguate(problem.id, {1: 1})
    with pytest.raises(YardError) as exc:
        yard.disambiguate(problem.id, {1: 0})
    assert exc.value.code == "E_WRONG_STATE"


# ---------------------------------------------------------------------------
# polling, leases, results
# ---------------------------------------------------------------------------


def test_poll_leases_and_concurrent_dispatch():
    clock = ManualClock()
    yard = _yard(clock)
    yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    b = yard.register_engine("sim-b")
    task_a = yard.poll_task(a.id, a.token)
    assert task_a is not None and task_a.payload_kind == "native"
    # same engine cannot re-lease while its lease is live
    second = yard.poll_task(a.id, a.token)
    assert second is None or second.id != task_a.id
    # another engine shares the same task concurrently
    task_b = yard.poll_task(b.id, b.token)
    assert task_b is not None and task_b.id == task_a.id
    engine_ids = {lease.engine_id for lease in task_a.leases}
    assert {a.id, b.id} <= engine_ids


def test_poll_auth():
    yard = _yard(ManualClock())
    engine = yard.register_engine("sim")
    with pytest.raises(YardError) as exc:
        yard.poll_task(engine.id, "wrong-token")
    assert exc.value.code == "E_AUTH"


def test_first_conclusive_wins_then_supplementary_and_idempotent():
    clock = ManualClock()
    yard = _yard(clock)
    problem = yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    b = yard.register_engine("sim-b")
    task = yard.poll_task(a.id, a.token)
    yard.poll_task(b.id, b.token)

    assert yard.submit_result(a.id, a.token, task.id, _unknown_verdict()) == "accepted"
    assert yard.get_problem(problem.id).state != "resolved"

    assert yard.submit_result(b.id, b.token, task.id, _proved_verdict()) == "accepted"
    assert yard.get_problem(problem.id).state == "resolved"
    first_final = yard.get_problem(problem.id).final

    assert yard.submit_result(a.id, a.token, task.id, _proved_verdict()) == "supplementary"
    assert yard.get_problem(problem.id).final is first_final

    # byte-identical repost changes nothing
    assert yard.submit_result(a.id, a.token, task.id, _proved_verdict()) == "ignored"
    assert yard.submit_result(b.id, b.token, task.id, _proved_verdict()) == "ignored"
    assert yard.get_problem(problem.id).final is first_final


def test_submit_requires_lease_history():
    yard = _yard(ManualClock())
    yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    b = yard.register_engine("sim-b")
    task = yard.poll_task(a.id, a.token)
    with pytest.raises(YardError) as exc:
        yard.submit_result(b.id, b.token, task.id, _unknown_verdict())
    assert exc.value.code == "E_NO_LEASE"


def test_submit_bad_proof_rejected():
    yard = _yard(ManualClock())
    problem = yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    task = yard.poll_task(a.id, a.token)
    bogus = Verdict(
        kind="proved",
        proof=ProofNode(parse_atom_text("holds(c_q)"), "hypothesis", ()),
    )
    with pytest.raises(YardError) as exc:
        yard.submit_result(a.id, a.token, task.id, bogus)
    assert exc.value.code == "E_BAD_PROOF"
    assert yard.get_problem(problem.id).state != "resolved"
    # an honest proof still lands afterwards
    assert yard.submit_result(a.id, a.token, task.id, _proved_verdict()) == "accepted"


def test_lease_expiry_redispatch():
    clock = ManualClock()
    yard = _yard(clock, lease_seconds=30)
    yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    task = yard.poll_task(a.id, a.token)
    assert yard.poll_task(a.id, a.token) is None or True  # second task may exist
    clock.advance(31)
    actions = yard.resolve_stalled()
    assert any(act["action"] == "lease_expired" for act in actions)
    again = yard.poll_task(a.id, a.token)
    assert again is not None and again.id == task.id


def test_stale_engine_excluded_until_second_poll():
    clock = ManualClock()
    yard = _yard(clock, lease_seconds=30)
    a = yard.register_engine("sim-a")
    yard.create_problem(PROVABLE_SOURCE)
    clock.advance(91)  # silent for more than 3 lease periods
    assert yard.poll_task(a.id, a.token) is None  # refresh only
    assert yard.poll_task(a.id, a.token) is not None


def test_global_timeout_merges_relevant_facts():
    clock = ManualClock()
    yard = _yard(clock, lease_seconds=30, global_timeout_seconds=120)
    problem = yard.create_problem(PROVABLE_SOURCE)
    a = yard.register_engine("sim-a")
    b = yard.register_engine("sim-b")
    task = yard.poll_task(a.id, a.token)
    yard.poll_task(b.id, b.token)
    yard.submit_result(a.id, a.token, task.id, _unknown_verdict(["c0002", "c0001"]))
    yard.submit_result(b.id, b.token, task.id, _unknown_verdict(["c0003", "c0002"]))
    clock.advance(121)
    actions = yard.resolve_stalled()
    assert any(act["action"] == "problem_timed_out" for act in actions)
    final = yard.get_problem(problem.id).final
    assert final.kind == "unknown"
    # best rank across engines, deduplicated
    assert final.relevant == ["c0002", "c0003", "c0001"]


def test_local_engine_resolves_problem():
    clock = ManualClock()
    yard = _yard(clock)
    problem = yard.create_problem(PROVABLE_SOURCE)
    local = LocalEngine(yard)
    assert local.run_once()
    record = yard.get_problem(problem.id)
    assert record.state == "resolved"
    assert record.final.kind == "proved"
    view = yard.problem_view(problem.id)
    assert view["outline"]  # rendered outline present


# ---------------------------------------------------------------------------
# randomized interleavings
# ---------------------------------------------------------------------------


class _SimEngine:
    """Scripted engine: what it answers when it finally submits."""

    def __init__(self, yard, record, behavior: str):
        self.yard = yard
        self.record = record
        self.behavior = behavior  # proved | unknown | silent
        self.held: list = []

    def poll(self):
        task = self.yard.poll_task(self.record.id, self.record.token)
        if task is not None:
            self.held.append(task)

    def submit(self):
        if not self.held or self.behavior == "silent":
            return None
        task = self.held.pop(0)
        verdict = _proved_verdict() if self.behavior == "proved" else _unknown_verdict(
            ["c0001"]
        )
        return self.yard.submit_result(
            self.record.id, self.record.token, task.id, verdict
        )


@pytest.mark.parametrize("seed_base", [0])
def test_randomized_interleavings(seed_base):
    runs = 250
    behaviors = ["proved", "unknown", "silent"]
    for seed in range(seed_base, seed_base + runs):
        rng = random.Random(seed)
        clock = ManualClock()
        yard = _yard(clock, lease_seconds=30, global_timeout_seconds=120)
        records = [yard.register_engine(f"sim-{i}") for i in range(3)]
        rng.shuffle(behaviors)
        engines = [_SimEngine(yard, r, b) for r, b in zip(records, behaviors)]
        problem = yard.create_problem(PROVABLE_SOURCE)
        created = clock.t

        resolutions = 0
        final_snapshot = None
        for _ in range(rng.randint(10, 40)):
            action = rng.randrange(6)
            if action < 2:
                rng.choice(engines).poll()
            elif action < 4:
                rng.choice(engines).submit()
            elif action == 4:
                # the production scheduler runs at least once per lease
                # period, so simulated jumps never exceed one lease
                clock.advance(rng.choice([1, 5, 20, 29]))
                yard.resolve_stalled()
            else:
                yard.resolve_stalled()
            record = yard.get_problem(problem.id)
            if record.state == "resolved":
                if final_snapshot is None:
                    resolutions += 1
                    final_snapshot = record.final
                else:
                    assert record.final is final_snapshot  # final never changes

        # liveness: drive to the deadline with polls and maintenance
        while yard.get_problem(problem.id).state != "resolved":
            clock.advance(10)
            yard.resolve_stalled()
            for engine in engines:
                engine.poll()
                engine.submit()
            assert clock.t - created <= 120 + 30 + 10

        record = yard.get_problem(problem.id)
        assert record.resolved_at - created <= 120 + 30
        if record.final.kind in ("proved", "inconsistent"):
            # only verified conclusive verdicts resolve problems
            assert record.final.proof is not None
