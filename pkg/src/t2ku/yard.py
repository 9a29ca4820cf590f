"""The engine yard: brokering proving tasks to registered inference engines.

Dispatch is pull-only. Engines poll for work; the poll doubles as the
heartbeat. A poll hands out a time-bounded lease, and several engines may
hold live leases on one task at the same time; the first conclusive verdict
whose proof tree passes the structural checker resolves the problem, later
conclusive results are kept as supplementary. Expired leases make a task
dispatchable again, and problems that outlive the global timeout resolve as
Unknown with the merged relevant facts of everything the engines reported.

All state lives behind one lock and a totally ordered mutation sequence;
time is injected so the whole protocol runs under a simulated clock in
tests. One local engine record exists from the start and is served by
``LocalEngine``, an in-process worker that runs the built-in prover.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
import time
from dataclasses import dataclass, field

from .bridge import Ambiguous, Unparsed, apply_forward, apply_reverse
from .errors import InferError, T2kuError, T2MathError, YardError
from .infer import Goal, Limits, Verdict, normalize, prove, render_outline
from .kb import Store
from .logic import print_formula
from .proofcheck import check_proof
from .t2math import parse
from .tptp import SelectionParams, export_problem

STALE_LEASE_PERIODS = 3


@dataclass
class EngineRecord:
    id: str
    name: str
    token: str
    capabilities: set[str]
    last_seen: float
    local: bool = False


@dataclass
class LeaseEntry:
    engine_id: str
    expires_at: float


@dataclass
class ResultEntry:
    engine_id: str
    verdict: Verdict
    received_at: float
    disposition: str  # accepted | supplementary | ignored | rejected


@dataclass
class Task:
    id: str
    problem_id: str
    payload_kind: str  # native | tptp
    payload: dict | str
    created_at: float
    leases: list[LeaseEntry] = field(default_factory=list)
    past_engines: set[str] = field(default_factory=set)
    results: list[ResultEntry] = field(default_factory=list)

    def live_lease_for(self, engine_id: str, now: float) -> LeaseEntry | None:
        for lease in self.leases:
            if lease.engine_id == engine_id and lease.expires_at > now:
                return lease
        return None


@dataclass
class SentenceAmbiguity:
    sentence_index: int
    sentence: str
    candidates: list[dict]  # {rule_id, clauses: [text], rendered: [text]}


@dataclass
class ProblemRecord:
    id: str
    source: str
    state: str  # needs_disambiguation | pending | dispatched | resolved
    created_at: float
    choices: dict[int, int] = field(default_factory=dict)
    ambiguities: list[SentenceAmbiguity] = field(default_factory=list)
    goal: Goal | None = None
    final: Verdict | None = None
    resolved_at: float | None = None
    task_ids: list[str] = field(default_factory=list)


class YardStore:
    """Serialized state machine over problems, engines and tasks."""

    def __init__(
        self,
        store: Store,
        clock=time.time,
        lease_seconds: float = 30.0,
        global_timeout_seconds: float = 120.0,
        limits: Limits | None = None,
        selection: SelectionParams | None = None,
    ):
        self.store = store
        self.clock = clock
        self.lease_seconds = lease_seconds
        self.global_timeout_seconds = global_timeout_seconds
        self.limits = limits or Limits()
        self.selection = selection or SelectionParams()
        self.engines: dict[str, EngineRecord] = {}
        self.problems: dict[str, ProblemRecord] = {}
        self.tasks: dict[str, Task] = {}
        self._lock = threading.RLock()
        self._counter = 0
        self.local_engine = self._register_unlocked("local", {"native"}, local=True)

    # -- helpers -------------------------------------------------------------

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}{self._counter:04d}"

    def _register_unlocked(self, name: str, capabilities: set[str], local: bool) -> EngineRecord:
        engine = EngineRecord(
            id=self._next_id("e"),
            name=name,
            token=secrets.token_hex(16),
            capabilities=set(capabilities),
            last_seen=float(self.clock()),
            local=local,
        )
        self.engines[engine.id] = engine
        return engine

    def _auth(self, engine_id: str, token: str) -> EngineRecord:
        engine = self.engines.get(engine_id)
        if engine is None or engine.token != token:
            raise YardError("E_AUTH", "unknown engine or bad token")
        return engine

    def engine_by_token(self, token: str) -> EngineRecord | None:
        with self._lock:
            for engine in self.engines.values():
                if engine.token == token:
                    return engine
            return None

    # -- engines ---------------------------------------------------------------

    def register_engine(self, name: str, capabilities: set[str] | None = None) -> EngineRecord:
        with self._lock:
            caps = set(capabilities or {"native"}) & {"native", "tptp"} or {"native"}
            return self._register_unlocked(name, caps, local=False)

    def is_stale(self, engine: EngineRecord, now: float) -> bool:
        return now - engine.last_seen > STALE_LEASE_PERIODS * self.lease_seconds

    # -- problems ----------------------------------------------------------------

    def create_problem(self, source: str) -> ProblemRecord:
        with self._lock:
            now = float(self.clock())
            try:
                proposition = parse(source)
            except T2MathError as exc:
                raise YardError("E_PARSE", exc.message, cause=exc.to_dict()) from exc
            problem = ProblemRecord(
                id=self._next_id("p"),
                source=source,
                state="pending",
                created_at=now,
            )
            self._translate_and_enqueue(problem, proposition, {})
            self.problems[problem.id] = problem
            return problem

    def _translate_and_enqueue(self, problem, proposition, choices: dict[int, int]) -> None:
        rules = list(self.store.rules)
        ambiguities: list[SentenceAmbiguity] = []
        failures: list[dict] = []
        for index, sentence in enumerate(proposition.sentences):
            if index in choices:
                continue
            result = apply_forward(rules, sentence)
            if isinstance(result, Unparsed):
                failures.append(
                    {
                        "sentence": sentence.text,
                        "sentence_index": index,
                        "nearest_rules": _nearest_rules(rules, sentence.text),
                    }
                )
            elif isinstance(result, Ambiguous):
                ambiguities.append(
                    SentenceAmbiguity(
                        sentence_index=index,
                        sentence=sentence.text,
                        candidates=[
                            {
                                "rule_id": cand.rule_id,
                                "clauses": [print_formula(c) for c in cand.clauses],
                                "rendered": [
                                    apply_reverse(rules, c, result.span_map)
                                    for c in cand.clauses
                                ],
                            }
                            for cand in result.candidates
                        ],
                    )
                )
        if failures:
            raise YardError(
                "E_UNTRANSLATED", "some sentences have no translation", failures=failures
            )
        if ambiguities:
            problem.state = "needs_disambiguation"
            problem.ambiguities = ambiguities
            return
        try:
            goal = normalize(proposition, rules, self.store.kb, choices)
        except InferError as exc:
            raise YardError(exc.code, exc.message, cause=exc.to_dict()) from exc
        problem.goal = goal
        problem.state = "pending"
        problem.ambiguities = []
        now = float(self.clock())
        native = Task(
            id=self._next_id("t"),
            problem_id=problem.id,
            payload_kind="native",
            payload=goal.to_dict(),
            created_at=now,
        )
        tptp_task = Task(
            id=self._next_id("t"),
            problem_id=problem.id,
            payload_kind="tptp",
            payload=export_problem(goal, self.store.kb, self.selection),
            created_at=now,
        )
        for task in (native, tptp_task):
            self.tasks[task.id] = task
            problem.task_ids.append(task.id)

    def disambiguate(self, problem_id: str, choices: dict[int, int]) -> ProblemRecord:
        with self._lock:
            problem = self._problem(problem_id)
            if problem.state != "needs_disambiguation":
                raise YardError(
                    "E_WRONG_STATE", f"problem is {problem.state}", state=problem.state
                )
            for amb in problem.ambiguities:
                choice = choices.get(amb.sentence_index)
                if choice is None:
                    raise YardError(
                        "E_BAD_CHOICE",
                        f"sentence {amb.sentence_index} needs a choice",
                        sentence_index=amb.sentence_index,
                    )
                if not 0 <= choice < len(amb.candidates):
                    raise YardError(
                        "E_BAD_CHOICE",
                        f"candidate {choice} out of range for sentence {amb.sentence_index}",
                        sentence_index=amb.sentence_index,
                    )
            extraneous = set(choices) - {a.sentence_index for a in problem.ambiguities}
            if extraneous:
                raise YardError(
                    "E_BAD_CHOICE",
                    f"choices given for unambiguous sentences {sorted(extraneous)}",
                )
            problem.choices = dict(choices)
            proposition = parse(problem.source)
            self._translate_and_enqueue(problem, proposition, problem.choices)
            return problem

    def _problem(self, problem_id: str) -> ProblemRecord:
        problem = self.problems.get(problem_id)
        if problem is None:
            raise YardError("E_WRONG_STATE", f"no problem {problem_id!r}")
        return problem

    def get_problem(self, problem_id: str) -> ProblemRecord:
        with self._lock:
            return self._problem(problem_id)

    # -- dispatch ---------------------------------------------------------------

    def poll_task(self, engine_id: str, token: str) -> Task | None:
        """The heartbeat. Returns the oldest dispatchable task for this
        engine and takes a lease on it. An engine polling after going stale
        is only refreshed; it receives work again on its next poll."""
        with self._lock:
            engine = self._auth(engine_id, token)
            now = float(self.clock())
            was_stale = self.is_stale(engine, now)
            engine.last_seen = now
            if was_stale:
                return None
            for task in sorted(self.tasks.values(), key=lambda t: (t.created_at, t.id)):
                problem = self.problems.get(task.problem_id)
                if problem is None or problem.state == "resolved":
                    continue
                if task.payload_kind not in engine.capabilities:
                    continue
                if task.live_lease_for(engine.id, now) is not None:
                    continue
                task.leases.append(
                    LeaseEntry(engine_id=engine.id, expires_at=now + self.lease_seconds)
                )
                task.past_engines.add(engine.id)
                if problem.state == "pending":
                    problem.state = "dispatched"
                return task
            return None

    def submit_result(self, engine_id: str, token: str, task_id: str, verdict: Verdict) -> str:
        with self._lock:
            engine = self._auth(engine_id, token)
            task = self.tasks.get(task_id)
            if task is None:
                raise YardError("E_NO_LEASE", f"no task {task_id!r}")
            if engine.id not in task.past_engines:
                raise YardError("E_NO_LEASE", "engine never held a lease on this task")
            problem = self._problem(task.problem_id)
            now = float(self.clock())
            fingerprint = (engine.id, _verdict_fingerprint(verdict))
            for prior in task.results:
                if (
                    prior.engine_id,
                    _verdict_fingerprint(prior.verdict),
                ) == fingerprint and prior.disposition != "rejected":
                    return "ignored"
            if verdict.conclusive:
                self._check_submitted_proof(problem, verdict)
            if verdict.conclusive and problem.state != "resolved":
                disposition = "accepted"
                self._resolve(problem, verdict, now)
            elif verdict.conclusive:
                disposition = "supplementary"
            else:
                disposition = "accepted"
            task.results.append(
                ResultEntry(
                    engine_id=engine.id,
                    verdict=verdict,
                    received_at=now,
                    disposition=disposition,
                )
            )
            return disposition

    def _check_submitted_proof(self, problem: ProblemRecord, verdict: Verdict) -> None:
        if verdict.proof is None:
            raise YardError("E_BAD_PROOF", "conclusive verdict carries no proof tree")
        hypotheses = problem.goal.hypotheses if problem.goal else ()
        conclusions = problem.goal.conclusions if problem.goal else None
        expected = conclusions if verdict.kind == "proved" else None
        result = check_proof(verdict.proof, self.store.kb.clauses, hypotheses, expected)
        if not result.ok:
            raise YardError("E_BAD_PROOF", "; ".join(result.errors))

    def _resolve(self, problem: ProblemRecord, verdict: Verdict, now: float) -> None:
        problem.final = verdict
        problem.state = "resolved"
        problem.resolved_at = now

    # -- maintenance -----------------------------------------------------------

    def resolve_stalled(self, now: float | None = None) -> list[dict]:
        """Expire leases, make leaseless tasks dispatchable again, and time
        out problems past the global deadline as Unknown with the merged
        relevant facts from every engine report."""
        with self._lock:
            now = float(self.clock()) if now is None else float(now)
            actions: list[dict] = []
            for task in self.tasks.values():
                expired = [l for l in task.leases if l.expires_at <= now]
                if not expired:
                    continue
                task.leases = [l for l in task.leases if l.expires_at > now]
                for lease in expired:
                    actions.append(
                        {"action": "lease_expired", "task": task.id, "engine": lease.engine_id}
                    )
                problem = self.problems.get(task.problem_id)
                if not task.leases and problem and problem.state != "resolved":
                    actions.append({"action": "requeued", "task": task.id})
            for problem in self.problems.values():
                if problem.state not in ("pending", "dispatched"):
                    continue
                if now - problem.created_at < self.global_timeout_seconds:
                    continue
                merged = self._merged_relevant(problem)
                self._resolve(
                    problem,
                    Verdict(kind="unknown", relevant=merged, budget_exhausted=False,
                            stats={"timed_out": True}),
                    now,
                )
                actions.append({"action": "problem_timed_out", "problem": problem.id})
            return actions

    def _merged_relevant(self, problem: ProblemRecord) -> list[str]:
        """Union of engines' relevant-facts lists, ranked by best position
        across reports, deduplicated by clause id."""
        best: dict[str, int] = {}
        for task_id in problem.task_ids:
            for entry in self.tasks[task_id].results:
                for position, cid in enumerate(entry.verdict.relevant):
                    if cid not in best or position < best[cid]:
                        best[cid] = position
        return sorted(best, key=lambda cid: (best[cid], cid))

    # -- views -------------------------------------------------------------------

    def problem_view(self, problem_id: str) -> dict:
        with self._lock:
            problem = self._problem(problem_id)
            out: dict = {
                "id": problem.id,
                "source": problem.source,
                "state": problem.state,
                "created_at": problem.created_at,
                "resolved_at": problem.resolved_at,
                "choices": {str(k): v for k, v in problem.choices.items()},
            }
            if problem.ambiguities:
                out["ambiguities"] = [
                    {
                        "sentence_index": a.sentence_index,
                        "sentence": a.sentence,
                        "candidates": a.candidates,
                    }
                    for a in problem.ambiguities
                ]
            if problem.final is not None:
                out["verdict"] = problem.final.to_dict()
                if problem.final.proof is not None:
                    out["outline"] = render_outline(
                        problem.final.proof,
                        list(self.store.rules),
                        problem.goal.span_map if problem.goal else None,
                        self.store.kb,
                        problem.goal.hypotheses if problem.goal else (),
                    )
                if problem.final.kind == "unknown":
                    out["relevant_rendered"] = [
                        {
                            "clause_id": cid,
                            "clause": print_formula(self.store.kb.clauses[cid]),
                            "rendered": apply_reverse(
                                list(self.store.rules),
                                self.store.kb.clauses[cid],
                                problem.goal.span_map if problem.goal else None,
                            ),
                        }
                        for cid in problem.final.relevant
                        if cid in self.store.kb.clauses
                    ]
            return out


def _verdict_fingerprint(verdict: Verdict) -> str:
    payload = verdict.to_dict()
    payload.pop("stats", None)
    return json.dumps(payload, sort_keys=True)


def _nearest_rules(rules, sentence_text: str, limit: int = 3) -> list[dict]:
    """Rank rules by shared literal words with the failing sentence."""
    words = set(re.findall(r"[A-Za-z]+", sentence_text.lower()))
    scored = []
    for rule in rules:
        rule_words = set(re.findall(r"[A-Za-z]+", rule.pattern.lower()))
        shared = len(words & rule_words)
        if shared:
            scored.append((-shared, rule.id, rule.pattern))
    scored.sort()
    return [
        {"rule_id": rid, "pattern": pattern, "shared_words": -neg}
        for neg, rid, pattern in scored[:limit]
    ]



class LocalEngine:
    """In-process engine serving native tasks with the built-in prover."""

    def __init__(self, yard: YardStore, poll_interval: float = 0.2):
        self.yard = yard
        self.engine = yard.local_engine
        self.poll_interval = poll_interval
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def run_once(self) -> bool:
        """Poll once; prove and submit if a task was leased."""
        task = self.yard.poll_task(self.engine.id, self.engine.token)
        if task is None:
            return False
        goal = Goal.from_dict(task.payload)
        verdict = prove(goal, self.yard.store.kb, self.yard.limits)
        self.yard.submit_result(self.engine.id, self.engine.token, task.id, verdict)
        return True

    def run_forever(self) -> None:
        while not self._stop.is_set():
            worked = False
            try:
                worked = self.run_once()
                self.yard.resolve_stalled()
            except T2kuError:
                pass  # a competing engine may have resolved the problem first
            if not worked:
                self._stop.wait(self.poll_interval)

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
