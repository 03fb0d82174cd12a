"""The constraint-aware GUI model.

States are layouts up to equivalence of their (event, handler) sets.
Transitions are labeled with event summaries, i.e. an event paired with the
execution path its handler took, so one event can label several edges.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field

from apex.appir import Event, parse_event
from apex.errors import NoModelPath
from apex.ipcfg import Path
from apex.runtime import ConcreteLayout, WidgetState

SCHEMA = "model.v1"


def canonical_pairs(layout: ConcreteLayout) -> frozenset:
    return layout.pairs()


def _pairs_json(pairs) -> list:
    return sorted([list(desc), handler] for desc, handler in pairs)


def state_id_of(pairs) -> str:
    blob = json.dumps(_pairs_json(pairs), separators=(",", ":"))
    return "s" + hashlib.sha1(blob.encode()).hexdigest()[:10]


def layout_equivalent(l1: ConcreteLayout, l2: ConcreteLayout) -> bool:
    """Every event of one layout has a counterpart with the same handler in the other."""
    p1, p2 = l1.pairs(), l2.pairs()
    return all(x in p2 for x in p1) and all(x in p1 for x in p2)


@dataclass
class GuiState:
    id: str
    pairs: frozenset
    representative: ConcreteLayout
    is_initial: bool = False
    witness: tuple = ()  # event sequence that first reached the state

    @property
    def activity(self) -> str | None:
        return self.representative.activity


@dataclass(eq=False)
class EventSummary:
    """An event paired with the path its handler took (or would take)."""

    event: Event
    path: Path
    status: str  # "concrete" or "symbolic"
    src: str | None = None  # source state id; None for entry events
    activity: str | None = None  # foreground activity at the source
    handler: str | None = None
    callbacks: tuple = ()  # paths of lifecycle callbacks that followed
    witness: tuple = ()  # full event sequence that executed this summary
    solve_attempts: int = 0
    retired: str | None = None

    @property
    def key(self) -> tuple:
        return (self.src, self.event.descriptor, self.path)

    @property
    def id(self) -> str:
        blob = json.dumps(
            [self.src, list(self.event.descriptor), self.path.label()], separators=(",", ":")
        )
        return "e" + hashlib.sha1(blob.encode()).hexdigest()[:10]

    def label(self) -> str:
        return f"{self.event.text()}/{self.path.digest()}"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "src": self.src,
            "activity": self.activity,
            "event": self.event.text(),
            "handler": self.handler,
            "path": self.path.to_json(),
            "callbacks": [c.to_json() for c in self.callbacks],
            "witness": [e.text() for e in self.witness],
            "solve_attempts": self.solve_attempts,
            "retired": self.retired,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EventSummary":
        return cls(
            parse_event(d["event"]),
            Path.from_json(d["path"]),
            d["status"],
            d["src"],
            d["activity"],
            d["handler"],
            tuple(Path.from_json(c) for c in d["callbacks"]),
            tuple(parse_event(e) for e in d["witness"]),
            d["solve_attempts"],
            d["retired"],
        )


@dataclass
class GuiModel:
    app_name: str = ""
    states: dict = field(default_factory=dict)  # id -> GuiState, creation order
    summaries: dict = field(default_factory=dict)  # id -> EventSummary, creation order
    transitions: list = field(default_factory=list)  # (src, summary id, dst), creation order
    theta: dict = field(default_factory=dict)  # (state id, descriptor) -> [handler sigs]
    lam: dict = field(default_factory=dict)  # handler sig -> [Path]
    failures: dict = field(default_factory=dict)  # transition -> failed replays
    _tset: set = field(default_factory=set, repr=False)

    @property
    def initial(self) -> list[str]:
        return [s.id for s in self.states.values() if s.is_initial]

    def concrete(self) -> list[EventSummary]:
        return [s for s in self.summaries.values() if s.status == "concrete"]

    def summary_by_key(self, key) -> EventSummary | None:
        for s in self.summaries.values():
            if s.key == key:
                return s
        return None

    def transitions_of(self, sid: str) -> list[tuple]:
        return [t for t in self.transitions if t[1] == sid]

    def add_state(self, layout: ConcreteLayout, initial: bool, witness: tuple) -> tuple[str, bool]:
        pairs = layout.pairs()
        sid = state_id_of(pairs)
        if sid in self.states:
            if initial:
                self.states[sid].is_initial = True
            return sid, False
        self.states[sid] = GuiState(sid, pairs, layout, initial, tuple(witness))
        for desc, handler in sorted(pairs, key=lambda x: (x[0], x[1])):
            self.theta[(sid, desc)] = [handler]
        return sid, True

    def add_summary(self, s: EventSummary) -> EventSummary:
        existing = self.summaries.get(s.id)
        if existing is None:
            self.summaries[s.id] = s
            return s
        if existing.status == "symbolic" and s.status == "concrete":
            s.solve_attempts = existing.solve_attempts
            self.summaries[s.id] = s
            return s
        return existing


def update_model(
    m: GuiModel,
    summary: EventSummary,
    src: str | None,
    observed_layout: ConcreteLayout,
    handlers: list | None = None,
) -> tuple[GuiModel, str, bool]:
    """Insert the transition ``src --summary--> state(observed_layout)``; idempotent."""
    summary.src = src
    stored = m.add_summary(summary)
    dst, is_new = m.add_state(observed_layout, src is None, summary.witness)
    t = (src, stored.id, dst)
    if t not in m._tset:
        m._tset.add(t)
        m.transitions.append(t)
    if handlers is not None:
        m.theta[(src, summary.event.descriptor)] = list(handlers)
    if stored.handler and not stored.path.is_empty:
        paths = m.lam.setdefault(stored.handler, [])
        if stored.path not in paths:
            paths.append(stored.path)
    return m, dst, is_new


def find_path(m: GuiModel, goal: str) -> list[Event]:
    """Shortest event sequence from an entry event to ``goal`` over concrete transitions."""
    return [m.summaries[t[1]].event for t in find_route(m, goal)]


def find_route(m: GuiModel, goal: str) -> list[tuple]:
    """The transitions behind ``find_path``; ties break on state id, then summary id."""
    if goal not in m.states:
        raise NoModelPath(f"unknown state {goal}")

    def order(t):
        return (m.failures.get(t, 0) > 0, t[2], t[1])

    entries = sorted((t for t in m.transitions if t[0] is None), key=order)
    out_edges: dict = {}
    for t in m.transitions:
        if t[0] is not None:
            out_edges.setdefault(t[0], []).append(t)
    for v in out_edges.values():
        v.sort(key=order)
    prev: dict = {}
    queue = deque()
    for t in entries:
        if t[2] not in prev:
            prev[t[2]] = t
            queue.append(t[2])
    while queue:
        s = queue.popleft()
        if s == goal:
            break
        for t in out_edges.get(s, []):
            if t[2] not in prev:
                prev[t[2]] = t
                queue.append(t[2])
    if goal not in prev:
        raise NoModelPath(f"state {goal} is not reachable in the model")
    chain = []
    s = goal
    while True:
        t = prev[s]
        chain.append(t)
        if t[0] is None:
            break
        s = t[0]
    chain.reverse()
    return chain


def bridge(m: GuiModel, start: str, goal: str) -> list[EventSummary] | None:
    """Shortest list of concrete summaries leading from ``start`` to ``goal``."""
    if start == goal:
        return []
    out_edges: dict = {}
    for t in m.transitions:
        if t[0] is not None:
            out_edges.setdefault(t[0], []).append(t)
    for v in out_edges.values():
        v.sort(key=lambda t: (m.failures.get(t, 0) > 0, t[2], t[1]))
    prev = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in out_edges.get(s, []):
            if t[2] not in prev:
                prev[t[2]] = t
                if t[2] == goal:
                    queue.clear()
                    break
                queue.append(t[2])
    if goal not in prev:
        return None
    chain = []
    s = goal
    while prev[s] is not None:
        chain.append(m.summaries[prev[s][1]])
        s = prev[s][0]
    chain.reverse()
    return chain


def _layout_json(l: ConcreteLayout) -> dict:
    return {
        "activity": l.activity,
        "widgets": [[w.id, w.kind, [list(b) for b in w.bindings]] for w in l.widgets],
        "texts": [list(t) for t in l.texts],
        "receivers": [list(r) for r in l.receivers],
    }


def _layout_from_json(d: dict) -> ConcreteLayout:
    return ConcreteLayout(
        d["activity"],
        tuple(WidgetState(w[0], w[1], tuple(tuple(b) for b in w[2])) for w in d["widgets"]),
        tuple(tuple(t) for t in d["texts"]),
        tuple(tuple(r) for r in d["receivers"]),
    )


def model_to_dict(m: GuiModel) -> dict:
    states = [
        {
            "id": s.id,
            "initial": s.is_initial,
            "pairs": _pairs_json(s.pairs),
            "representative": _layout_json(s.representative),
            "witness": [e.text() for e in s.witness],
        }
        for s in sorted(m.states.values(), key=lambda s: s.id)
    ]
    order = {sid: i for i, sid in enumerate(m.summaries)}
    summaries = []
    for sid, s in m.summaries.items():
        d = s.to_json()
        d["order"] = order[sid]
        summaries.append(d)
    summaries.sort(key=lambda d: d["id"])
    transitions = sorted(
        ([t[0], t[1], t[2], m.failures.get(t, 0)] for t in m.transitions),
        key=lambda t: (t[0] or "", t[1], t[2]),
    )
    theta = sorted(
        [[k[0], list(k[1]), v] for k, v in m.theta.items()],
        key=lambda x: (x[0] or "", x[1]),
    )
    lam = [[sig, [p.to_json() for p in m.lam[sig]]] for sig in sorted(m.lam)]
    return {
        "schema": SCHEMA,
        "app": m.app_name,
        "states": states,
        "summaries": summaries,
        "transitions": transitions,
        "theta": theta,
        "lambda": lam,
    }


def export_model(m: GuiModel, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(model_to_dict(m), indent=1, sort_keys=True) + "\n"
    if fmt == "dot":
        return _to_dot(m)
    raise ValueError(f"unknown model format {fmt!r}")


def parse_model(text: str) -> GuiModel:
    d = json.loads(text)
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported model schema {d.get('schema')!r}")
    m = GuiModel(d["app"])
    for s in d["states"]:
        layout = _layout_from_json(s["representative"])
        pairs = frozenset((tuple(p[0]), p[1]) for p in s["pairs"])
        m.states[s["id"]] = GuiState(
            s["id"], pairs, layout, s["initial"], tuple(parse_event(e) for e in s["witness"])
        )
    for sd in sorted(d["summaries"], key=lambda x: x["order"]):
        s = EventSummary.from_json(sd)
        m.summaries[sd["id"]] = s
    for src, sid, dst, fails in d["transitions"]:
        t = (src, sid, dst)
        m.transitions.append(t)
        m._tset.add(t)
        if fails:
            m.failures[t] = fails
    for sid, desc, handlers in d["theta"]:
        m.theta[(sid, tuple(desc))] = list(handlers)
    for sig, paths in d["lambda"]:
        m.lam[sig] = [Path.from_json(p) for p in paths]
    return m


def _to_dot(m: GuiModel) -> str:
    lines = [f'digraph "{m.app_name}" {{', '  entry [shape=point];']
    for s in sorted(m.states.values(), key=lambda s: s.id):
        shape = "doublecircle" if s.is_initial else "circle"
        lines.append(f'  "{s.id}" [label="{s.id}\\n{s.activity}", shape={shape}];')
    for src, sid, dst in sorted(m.transitions, key=lambda t: (t[0] or "", t[1], t[2])):
        label = m.summaries[sid].label().replace('"', '\\"')
        a = f'"{src}"' if src else "entry"
        lines.append(f'  {a} -> "{dst}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
