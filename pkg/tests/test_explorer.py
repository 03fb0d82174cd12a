from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from apps import COUNTER, FIG2, LOOPY, TWO_BUTTON
from conftest import CORPUS, corpus_app, corpus_targets
from apex.appir import Event, parse_app
from apex.explorer import (
    Budget,
    ExplorationHistory,
    QueueLEntry,
    SequenceCandidate,
    SequenceQueue,
    SummaryQueue,
    coverage,
    penalize,
    run_explorer,
)
from apex.gui_model import EventSummary
from apex.ipcfg import Path
from apex.runtime import apply_sequence


def _entry(n, prio=(0,)):
    s = EventSummary(Event("tap", f"w{n}"), Path(None, ()), "symbolic", f"s{n}")
    return QueueLEntry(s, prio, 0, n)


def test_penalize_benches_then_retires():
    e = _entry(0)
    penalize(e, 10, window=3, max_attempts=2)
    assert e.penalty_until == 13 and e.summary.solve_attempts == 1 and e.summary.retired is None
    penalize(e, 20, window=3, max_attempts=2)
    assert e.summary.retired and e.penalty_until == 23


def test_summary_queue_skips_benched_entries():
    q = SummaryQueue()
    a, b = _entry(0, (2, 0)), _entry(1, (1, -1))
    a.penalty_until = 5
    q.push(a)
    q.push(b)
    assert q.dequeue(1) is b
    assert q.dequeue(1) is None and q.next_eligible() == 5
    assert q.dequeue(5) is a and len(q) == 0


def test_sequence_queue_ties_are_fifo():
    q = SequenceQueue()
    for i in range(4):
        q.push(SequenceCandidate([Event("back")], "partial", priority=(1, 0, 0, -i), insertion_index=i))
    q.push(SequenceCandidate([Event("back")], "complete", priority=(0, 5, 1, -9), insertion_index=9))
    assert [q.pop().insertion_index for _ in range(5)] == [0, 1, 2, 3, 9]


def test_coverage_bounds():
    app = parse_app(FIG2)
    assert coverage(ExplorationHistory(), app).covered_instructions == 0
    every = {(sig, s) for sig, m in app.methods.items() for s, _ in m.blocks}
    full = coverage(every, app)
    assert full.ratio == 1.0 and full.total_instructions == 16


def test_coverage_fig2_increase_side():
    app = parse_app(FIG2)
    res = apply_sequence(app, [Event("launch", "A", None, {}), Event("tap", "b")])
    assert res.layout.activity == "A"
    ex = run_explorer(app)
    report = coverage(ex.history, app)
    assert (report.covered_instructions, report.total_instructions) == (10, 16)
    assert report.per_method["A.decrease"] == [0, 5]
    # the decrease side needs v <= 0, which no sequence establishes
    assert [label.split("/")[0] for _, label, _ in ex.history.retirements] == ["tap b"]


def test_two_button_reaches_guarded_activity():
    ex = run_explorer(parse_app(TWO_BUTTON))
    assert "B" in {s.activity for s in ex.model.states.values()}
    assert coverage(ex.history, ex.app).ratio == 1.0
    assert ex.stats["solved"] == 1


def test_counter_needs_three_increments():
    ex = run_explorer(parse_app(COUNTER))
    done = [s for s in ex.model.states.values() if s.activity == "Done"]
    assert [e.text() for e in done[0].witness] == ["launch A", "tap inc", "tap inc", "tap inc", "tap go"]


def test_self_loop_button_keeps_one_state():
    ex = run_explorer(parse_app(LOOPY))
    assert len(ex.model.states) == 1
    src = next(iter(ex.model.states))
    assert all(t[2] == src for t in ex.model.transitions)
    assert ex.stats["crashes"] == 1  # unbounded recursion in A.rec


def test_event_budget_is_strict():
    for n in range(10):
        ex = run_explorer(parse_app(COUNTER), budget=Budget(max_events=n))
        assert ex.events_applied == min(n, 8)


def test_targets_are_recorded_with_witnesses():
    app = corpus_app("dragon")
    targets = corpus_targets("dragon")
    assert len(targets) == 5
    ex = run_explorer(app, targets)
    hit = {t for t, _, _ in ex.history.target_hits}
    assert hit == set(targets)
    for t in targets:
        witness = ex.history.best_witness[t]
        assert len(witness) <= len(next(seq for x, seq, _ in ex.history.target_hits if x == t))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CORPUS), st.integers(0, 60), st.integers(1, 5))
def test_explorer_properties(name, max_events, seed):
    app = corpus_app(name)
    ex = run_explorer(app, corpus_targets(name), Budget(max_events=max_events, seed=seed))
    assert ex.events_applied <= max_events
    curve = ex.history.curve
    assert all(a[0] <= b[0] and a[1] < b[1] for a, b in zip(curve, curve[1:]))
    report = coverage(ex.history, app)
    assert (curve[-1][1] if curve else 0) == report.covered_instructions
    # one concrete summary per applied sequence that ran to completion without crashing
    ok = [r for r in ex.history.records if r.kind != "replay" and r.error is None]
    assert ex.stats["concrete_summaries_created"] == len(ok)
    for src, sid, dst in ex.model.transitions:
        assert ex.model.summaries[sid].status == "concrete"
