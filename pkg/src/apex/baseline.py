"""Random event baseline for coverage comparison.

Fires uniformly random enabled events without looking at any model. The
initial launch is not charged to the budget; neither is the restart after a
crash. Text inputs get fresh random strings.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass, field

from apex.appir import App, Event, entry_events
from apex.explorer import ExplorationHistory, coverage
from apex.runtime import apply_event, extract_events, new_state

TEXT_LEN = 8


@dataclass
class BaselineResult:
    history: ExplorationHistory
    report: object  # CoverageReport
    events_applied: int = 0
    restarts: int = 0
    crashes: int = 0
    trace: list = field(default_factory=list)  # event texts, in order


def _choices(st, app: App) -> list[Event]:
    if not st.stack:
        return entry_events(app)
    out = []
    for e in extract_events(st.layout, st):
        if e.kind == "text-input":
            e = e.with_payload(None)
        out.append(e)
    out.append(Event("back", None))
    out.extend(entry_events(app))
    return out


def run_random(app: App, event_budget: int, seed: int = 42, targets=()) -> BaselineResult:
    rng = random.Random(seed)
    hist = ExplorationHistory()
    st = new_state(app, seed)
    result = BaselineResult(hist, None)

    def record(res) -> None:
        before = len(hist.covered_blocks)
        hist.covered_blocks.update(res.log.blocks())
        if len(hist.covered_blocks) != before:
            hist.curve.append((result.events_applied, coverage(hist, app).covered_instructions))

    def boot() -> None:
        nonlocal st
        st = new_state(app, seed)
        record(apply_event(st, entry_events(app)[0]))

    boot()
    while result.events_applied < event_budget:
        e = rng.choice(_choices(st, app))
        if e.kind == "text-input":
            text = "".join(rng.choice(string.ascii_lowercase) for _ in range(TEXT_LEN))
            e = e.with_payload(text)
        res = apply_event(st, e)
        result.events_applied += 1
        result.trace.append(e.text())
        record(res)
        if res.crash:
            result.crashes += 1
            result.restarts += 1
            boot()
    result.report = coverage(hist, app, targets)
    return result
