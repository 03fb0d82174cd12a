"""Guided exploration driver.

Two priority queues drive it: Q holds event sequences to apply (one-event
partial sequences that extend a known state, and complete sequences from
the solver), L holds symbolic summaries waiting for the solver. Q is
drained first; when it is empty the best eligible summary in L is solved
and its candidate sequences go back into Q.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
import time
from dataclasses import dataclass, field

from apex.appir import GUI_TRANSITION_APIS, App, Event, entry_events
from apex.errors import EventNotEnabled, IntegrityError, Unsupported
from apex.gui_model import EventSummary, GuiModel, state_id_of, update_model
from apex.ipcfg import (
    EMPTY_PATH,
    Ipcfg,
    Path,
    build_ipcfg,
    enumerate_paths,
    executed_path,
    has_gui_transition,
    static_reach,
)
from apex.runtime import ConcreteLayout, RuntimeState, apply_event, extract_events, new_state
from apex.solver import UNSAT, decide, solve_summary
from apex.symexec import summary_effects

log = logging.getLogger(__name__)

Target = tuple  # (method sig, instruction index)


@dataclass
class Budget:
    max_events: int | None = None
    max_seconds: float | None = None
    seed: int = 42
    loop_bound: int = 1
    max_paths: int = 256
    call_depth: int = 8
    domain_bound: int = 64
    recursion_bound: int = 3
    k_max: int = 16
    str_len_bound: int = 16
    penalty_window: int = 3
    max_attempts: int = 5

    def to_json(self) -> dict:
        return dict(vars(self))


@dataclass
class SequenceCandidate:
    events: list
    kind: str  # "partial" or "complete"
    source_state: str | None = None  # for partial candidates
    handler: str | None = None  # handler of the final event, when known
    priority: tuple = ()
    insertion_index: int = 0
    for_summary: str | None = None  # symbolic summary this candidate was solved for


@dataclass
class QueueLEntry:
    summary: EventSummary
    priority: tuple
    penalty_until: int = 0
    insertion_index: int = 0


# -- priorities --


def _handler_graph(handler, app: App, cache: dict | None, depth: int = 8) -> Ipcfg | None:
    if not handler or handler not in app.methods:
        return None
    if cache is not None and handler in cache:
        return cache[handler]
    g = build_ipcfg(handler, app, depth)
    if cache is not None:
        cache[handler] = g
    return g


def priority_event_seq(
    c: SequenceCandidate, targets, app: App, graphs: dict | None = None
) -> tuple:
    """(partial?, targets reachable from the handler, GUI-transition code?, -insertion)."""
    g = _handler_graph(c.handler, app, graphs)
    reach = static_reach(g, targets) if g is not None else 0
    gui = 1 if g is not None and has_gui_transition(g) else 0
    return (1 if c.kind == "partial" else 0, reach, gui, -c.insertion_index)


def priority_summary(sigma: EventSummary, targets, app: App, insertion_index: int = 0) -> tuple:
    """(targets on the path, start/finish on the path?, sput+iput count, -insertion)."""
    stmts = set(sigma.path.statements)
    on_path = sum(1 for t in targets if tuple(t) in stmts)
    gui = 0
    writes = 0
    for sig, idx in sigma.path.statements:
        ins = app.methods[sig].body[idx]
        if ins.op == "api" and ins.args[0] in GUI_TRANSITION_APIS:
            gui = 1
        elif ins.op in ("sput", "iput"):
            writes += 1
    return (on_path, gui, writes, -insertion_index)


def penalize(
    entry: QueueLEntry, current_iteration: int, window: int = 3, max_attempts: int = 5
) -> QueueLEntry:
    """Bench a summary that failed to solve; retire it after ``max_attempts``."""
    s = entry.summary
    s.solve_attempts += 1
    entry.penalty_until = current_iteration + window
    if s.solve_attempts >= max_attempts and not s.retired:
        s.retired = f"unsolved after {s.solve_attempts} attempts"
    return entry


class SequenceQueue:
    """Max-priority queue; priorities end in -insertion so ties are FIFO."""

    def __init__(self):
        self._heap: list = []

    def push(self, c: SequenceCandidate) -> None:
        heapq.heappush(self._heap, (tuple(-x for x in c.priority), c.insertion_index, c))

    def pop(self) -> SequenceCandidate:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


class SummaryQueue:
    def __init__(self):
        self.entries: list[QueueLEntry] = []

    def push(self, e: QueueLEntry) -> None:
        self.entries.append(e)

    def dequeue(self, iteration: int) -> QueueLEntry | None:
        """Best entry whose penalty has expired; removed from the queue."""
        best = None
        for e in self.entries:
            if e.penalty_until > iteration:
                continue
            if best is None or e.priority > best.priority:
                best = e
        if best is not None:
            self.entries.remove(best)
        return best

    def next_eligible(self) -> int | None:
        if not self.entries:
            return None
        return min(e.penalty_until for e in self.entries)

    def discard(self, sid: str) -> None:
        self.entries = [e for e in self.entries if e.summary.id != sid]

    def __len__(self) -> int:
        return len(self.entries)


# -- history and coverage --


@dataclass
class HistoryRecord:
    iteration: int
    kind: str  # partial, complete, replay
    sequence: list  # event texts
    dst: str | None
    handlers: list
    log_digest: str
    new_instructions: int
    events_total: int
    error: str | None = None

    def to_json(self) -> dict:
        return dict(vars(self))


@dataclass
class ExplorationHistory:
    records: list = field(default_factory=list)
    target_hits: list = field(default_factory=list)  # (target, sequence, iteration)
    best_witness: dict = field(default_factory=dict)  # target -> shortest hitting sequence
    retirements: list = field(default_factory=list)  # (summary id, label, reason)
    covered_blocks: set = field(default_factory=set)  # (sig, block start)
    curve: list = field(default_factory=list)  # (events applied, covered instructions)


@dataclass
class CoverageReport:
    covered_instructions: int
    total_instructions: int
    per_method: dict  # sig -> [covered, total]
    targets_hit: list
    targets_total: int

    @property
    def ratio(self) -> float:
        return self.covered_instructions / self.total_instructions if self.total_instructions else 0.0

    def to_json(self) -> dict:
        return {
            "covered_instructions": self.covered_instructions,
            "total_instructions": self.total_instructions,
            "instruction_coverage": round(self.ratio, 6),
            "per_method": {k: list(v) for k, v in sorted(self.per_method.items())},
            "targets_hit": [f"{s}:{i}" for s, i in self.targets_hit],
            "targets_total": self.targets_total,
        }


def block_sizes(app: App) -> dict:
    out = {}
    for sig, m in app.methods.items():
        for start, end in m.blocks:
            out[(sig, start)] = end - start
    return out


def covered_statements(app: App, blocks) -> set:
    out = set()
    for sig, start in blocks:
        m = app.methods[sig]
        for s, e in m.blocks:
            if s == start:
                out.update((sig, i) for i in range(s, e))
    return out


def coverage(history, app: App, targets=()) -> CoverageReport:
    """Instruction coverage of every entered block, per method and overall."""
    blocks = history.covered_blocks if isinstance(history, ExplorationHistory) else set(history)
    stmts = covered_statements(app, blocks)
    per = {}
    for sig, m in app.methods.items():
        per[sig] = [sum(1 for s, _ in stmts if s == sig), len(m.body)]
    hit = sorted(tuple(t) for t in targets if tuple(t) in stmts)
    return CoverageReport(len(stmts), app.instruction_count(), per, hit, len(list(targets)))


# -- the driver --


class _OutOfEvents(Exception):
    """The event budget ran out in the middle of a sequence."""


class Explorer:
    def __init__(self, app: App, targets=(), budget: Budget | None = None):
        self.app = app
        self.targets = [tuple(t) for t in targets]
        self.budget = budget or Budget()
        self.model = GuiModel(app.name)
        self.history = ExplorationHistory()
        self.q = SequenceQueue()
        self.l = SummaryQueue()
        self.graphs: dict = {}
        self.iteration = 0
        self.events_applied = 0
        self.inserted = 0
        self.l_inserted = 0
        self.live: RuntimeState | None = None
        self.live_seq: list = []
        self.queued_partials: set = set()
        self.queued_complete: set = set()
        self.enumerated: set = set()
        self.expanded_states: set = set()
        self.pending: dict = {}  # symbolic summary id -> [outstanding candidates, entry]
        self.stats = {
            "sequences_applied": 0,
            "partial_applied": 0,
            "complete_applied": 0,
            "replays": 0,
            "symbolic_created": 0,
            "solved": 0,
            "solve_attempts": 0,
            "penalties": 0,
            "retired": 0,
            "sequence_failures": 0,
            "crashes": 0,
            "concrete_summaries_created": 0,
        }
        self._sizes = block_sizes(app)
        self._t0 = None

    # budget

    def exhausted(self) -> bool:
        b = self.budget
        if b.max_events is not None and self.events_applied >= b.max_events:
            return True
        if b.max_seconds is not None and time.monotonic() - self._t0 > b.max_seconds:
            return True
        return False

    def graph(self, sig: str) -> Ipcfg:
        g = _handler_graph(sig, self.app, self.graphs, self.budget.call_depth)
        assert g is not None
        return g

    # queue helpers

    def push_candidate(self, c: SequenceCandidate) -> None:
        c.insertion_index = self.inserted
        self.inserted += 1
        c.priority = priority_event_seq(c, self.targets, self.app, self.graphs)
        self.q.push(c)

    def push_summary(self, s: EventSummary) -> None:
        idx = self.l_inserted
        self.l_inserted += 1
        entry = QueueLEntry(s, priority_summary(s, self.targets, self.app, idx), 0, idx)
        self.l.push(entry)

    def run(self):
        self._t0 = time.monotonic()
        for e in entry_events(self.app):
            act = self.app.activity(e.target)
            self.push_candidate(
                SequenceCandidate([e], "complete", handler=act.callback("onCreate") if act else None)
            )
            self.queued_complete.add((e.text(),))
        while not self.exhausted():
            self._drain()
            if self.exhausted() or not self._witness_phase():
                break
        report = coverage(self.history, self.app, self.targets)
        return self.model, self.history, report

    def _drain(self) -> None:
        while (len(self.q) or len(self.l)) and not self.exhausted():
            self.iteration += 1
            if len(self.q):
                try:
                    self.apply_candidate(self.q.pop())
                except _OutOfEvents:
                    return
                continue
            entry = self.l.dequeue(self.iteration)
            if entry is None:
                # Every summary is benched; skip ahead to the first expiry.
                self.iteration = max(self.iteration, self.l.next_eligible() - 1)
                continue
            self.solve(entry)

    def _witness_phase(self) -> bool:
        """Ask the solver for shorter sequences reaching already-hit targets.

        Returns True when at least one new candidate was queued.
        """
        pushed = False
        for t in self.targets:
            best = self.history.best_witness.get(t)
            if best is None or len(best) <= 1:
                continue
            for s in sorted(self.model.concrete(), key=lambda x: x.id):
                stmts = set(s.path.statements)
                for cb in s.callbacks:
                    stmts.update(cb.statements)
                if t not in stmts:
                    continue
                seqs = solve_summary(
                    self.model,
                    s,
                    self.app,
                    self.budget.recursion_bound,
                    self.budget.domain_bound,
                    self.budget.k_max,
                    self.budget.str_len_bound,
                )
                for seq in seqs:
                    key = tuple(e.text() for e in seq)
                    if len(key) >= len(best) or key in self.queued_complete:
                        continue
                    self.queued_complete.add(key)
                    self.push_candidate(SequenceCandidate(list(seq), "complete", handler=s.handler))
                    pushed = True
        return pushed

    # L phase

    def solve(self, entry: QueueLEntry) -> None:
        s = entry.summary
        current = self.model.summaries.get(s.id)
        if current is not None and current.status == "concrete":
            return
        self.stats["solve_attempts"] += 1
        try:
            _, pc = summary_effects(s, self.app)
        except (Unsupported, IntegrityError) as exc:
            self.retire(s, f"symbolic execution failed: {exc}")
            return
        if decide(pc, self.budget.domain_bound, self.budget.str_len_bound).status == UNSAT:
            self.retire(s, "infeasible path constraint")
            return
        reasons: list = []
        seqs = solve_summary(
            self.model,
            s,
            self.app,
            self.budget.recursion_bound,
            self.budget.domain_bound,
            self.budget.k_max,
            self.budget.str_len_bound,
            reasons,
        )
        fresh = []
        for seq in seqs:
            key = tuple(e.text() for e in seq)
            if key in self.queued_complete:
                continue
            self.queued_complete.add(key)
            fresh.append(seq)
        if not fresh:
            self.fail_summary(entry, reasons[0] if reasons else "no satisfying summary chain")
            return
        self.pending[s.id] = [len(fresh), entry]
        for seq in fresh:
            self.push_candidate(
                SequenceCandidate(list(seq), "complete", handler=s.handler, for_summary=s.id)
            )

    def fail_summary(self, entry: QueueLEntry, reason: str) -> None:
        penalize(entry, self.iteration, self.budget.penalty_window, self.budget.max_attempts)
        self.stats["penalties"] += 1
        s = entry.summary
        log.debug("penalized %s (%s)", s.label(), reason)
        if s.solve_attempts >= self.budget.max_attempts:
            self.retire(s, f"unsolved after {s.solve_attempts} attempts: {reason}")
        else:
            self.l.push(entry)

    def retire(self, s: EventSummary, reason: str) -> None:
        s.retired = reason
        self.stats["retired"] += 1
        self.history.retirements.append((s.id, s.label(), reason))
        log.info("retired %s: %s", s.label(), reason)

    # Q phase

    def _fresh(self) -> None:
        self.live = new_state(self.app, self.budget.seed)
        self.live_seq = []

    def _step(self, e: Event):
        """Apply one event to the live state and account for it."""
        if self.budget.max_events is not None and self.events_applied >= self.budget.max_events:
            raise _OutOfEvents
        before = self.live.layout
        res = apply_event(self.live, e)
        self.events_applied += 1
        self.live_seq.append(e)
        blocks = res.log.blocks()
        new = self._record_blocks(blocks)
        self._note_witnesses(blocks)
        return before, res, new

    def _record_blocks(self, blocks) -> int:
        new = 0
        cov = self.history.covered_blocks
        for b in blocks:
            if b not in cov:
                cov.add(b)
                new += self._sizes.get(b, 0)
        if new:
            total = self.history.curve[-1][1] + new if self.history.curve else new
            self.history.curve.append((self.events_applied, total))
            self._note_targets()
        return new

    def _note_targets(self) -> None:
        stmts = covered_statements(self.app, self.history.covered_blocks)
        hit = {t for t, _, _ in self.history.target_hits}
        for t in self.targets:
            if t in stmts and t not in hit:
                self.history.target_hits.append((t, [e.text() for e in self.live_seq], self.iteration))

    def _note_witnesses(self, blocks) -> None:
        if not self.targets:
            return
        stmts = covered_statements(self.app, blocks)
        best = self.history.best_witness
        for t in self.targets:
            if t in stmts and (t not in best or len(self.live_seq) < len(best[t])):
                best[t] = [e.text() for e in self.live_seq]

    def _live_state_id(self) -> str | None:
        if self.live is None:
            return None
        return state_id_of(self.live.layout.pairs())

    def _replay_to(self, state_id: str) -> bool:
        witness = self.model.states[state_id].witness
        self._fresh()
        self.stats["replays"] += 1
        try:
            for e in witness:
                _, res, _ = self._step(e)
                if res.crash:
                    return False
        except EventNotEnabled:
            return False
        return self._live_state_id() == state_id

    def apply_candidate(self, c: SequenceCandidate) -> None:
        self.stats["sequences_applied"] += 1
        if c.kind == "partial":
            self.stats["partial_applied"] += 1
            if self._live_state_id() != c.source_state:
                if not self._replay_to(c.source_state):
                    self._failure(c, "could not reach source state")
                    return
            events = c.events
        else:
            self.stats["complete_applied"] += 1
            self._fresh()
            events = c.events
        prefix_before = None
        try:
            for i, e in enumerate(events):
                prefix_before = self._live_state_id() if i else None
                before, res, new = self._step(e)
        except EventNotEnabled as exc:
            self._blame(events, i, prefix_before)
            self._failure(c, f"event {i} not enabled: {exc}")
            return
        src = None if e.is_entry else state_id_of(before.pairs())
        if src is not None and src not in self.model.states:
            self._add_state(before, tuple(self.live_seq[:-1]))
        self._summarize(c, e, src, before, res, new)

    def _add_state(self, layout: ConcreteLayout, witness: tuple) -> None:
        sid, is_new = self.model.add_state(layout, False, witness)
        if is_new:
            self._expand_state(sid, layout)

    def _blame(self, events, i, state_before_failed) -> None:
        if i == 0 or state_before_failed is None:
            return
        prev = events[i - 1]
        for t in self.model.transitions:
            s = self.model.summaries[t[1]]
            if s.event.descriptor == prev.descriptor and t[2] != state_before_failed:
                self.model.failures[t] = self.model.failures.get(t, 0) + 1

    def _failure(self, c: SequenceCandidate, reason: str) -> None:
        self.stats["sequence_failures"] += 1
        self.history.records.append(
            HistoryRecord(
                self.iteration,
                c.kind,
                [e.text() for e in c.events],
                None,
                [],
                "",
                0,
                self.events_applied,
                reason,
            )
        )
        self._candidate_done(c, None)

    def _candidate_done(self, c: SequenceCandidate, summary_id: str | None) -> None:
        if c.for_summary is None or c.for_summary not in self.pending:
            return
        slot = self.pending[c.for_summary]
        if summary_id == c.for_summary:
            del self.pending[c.for_summary]
            self.stats["solved"] += 1
            return
        slot[0] -= 1
        if slot[0] <= 0:
            del self.pending[c.for_summary]
            entry = slot[1]
            if self.model.summaries[entry.summary.id].status != "concrete":
                self.fail_summary(entry, "solver candidates did not execute the path")

    def _summarize(self, c, e: Event, src, before: ConcreteLayout, res, new: int) -> None:
        digest = hashlib.sha1(res.log.to_text().encode()).hexdigest()[:12]
        if res.crash:
            self.stats["crashes"] += 1
            self.history.records.append(
                HistoryRecord(
                    self.iteration,
                    c.kind,
                    [x.text() for x in self.live_seq],
                    src,
                    [],
                    digest,
                    new,
                    self.events_applied,
                    f"crash: {res.crash}",
                )
            )
            self._candidate_done(c, None)
            return
        segments = res.log.segments()
        if res.primary:
            path = executed_path(segments[0][1], self.graph(res.primary))
            rest = segments[1:]
        else:
            path = EMPTY_PATH
            rest = segments
        callbacks = tuple(executed_path(seg, self.graph(root)) for root, seg in rest)
        activity = e.target if e.is_entry else before.activity
        summary = EventSummary(
            e,
            path,
            "concrete",
            src,
            activity,
            res.primary,
            callbacks,
            tuple(self.live_seq),
        )
        self.stats["concrete_summaries_created"] += 1
        was = self.model.summaries.get(summary.id)
        _, dst, is_new = update_model(self.model, summary, src, res.layout, res.handlers)
        if was is not None and was.status == "symbolic":
            self.l.discard(summary.id)
        self.history.records.append(
            HistoryRecord(
                self.iteration,
                c.kind,
                [x.text() for x in self.live_seq],
                dst,
                list(res.handlers),
                digest,
                new,
                self.events_applied,
            )
        )
        self._candidate_done(c, summary.id)
        if is_new or dst not in self.expanded_states:
            self._expand_state(dst, res.layout)
        self._add_symbolic(summary, e, src, activity)

    def _expand_state(self, sid: str, layout: ConcreteLayout) -> None:
        self.expanded_states.add(sid)
        for e in extract_events(layout, self.live):
            key = (sid, e.descriptor)
            if key in self.queued_partials:
                continue
            self.queued_partials.add(key)
            handler = None
            for desc, h in sorted(self.model.states[sid].pairs):
                if desc == e.descriptor:
                    handler = h
            self.push_candidate(SequenceCandidate([e], "partial", sid, handler))

    def _add_symbolic(self, summary: EventSummary, e: Event, src, activity) -> None:
        if not summary.handler or summary.path.is_empty:
            return
        key = (src, e.descriptor)
        if key in self.enumerated:
            return
        self.enumerated.add(key)
        g = self.graph(summary.handler)
        paths = enumerate_paths(g, self.budget.loop_bound, self.budget.max_paths)
        for p in paths:
            if p == summary.path:
                continue
            sigma = EventSummary(e, p, "symbolic", src, activity, summary.handler)
            if sigma.id in self.model.summaries:
                continue
            self.model.add_summary(sigma)
            self.stats["symbolic_created"] += 1
            self.push_summary(sigma)


def explore(app: App, targets=(), budget: Budget | None = None):
    """Run guided exploration; returns (model, history, coverage report)."""
    return Explorer(app, targets, budget).run()


def run_explorer(app: App, targets=(), budget: Budget | None = None) -> Explorer:
    """Like ``explore`` but returns the driver, for access to queue statistics."""
    ex = Explorer(app, targets, budget)
    ex.run()
    return ex
