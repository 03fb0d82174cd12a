"""Concrete interpreter standing in for an instrumented device.

It boots an app, applies events, runs handler bytecode and the implicit
lifecycle callbacks an activity transition causes, and records an
instrumentation log of method starts/returns and basic-block entries.
"""

from __future__ import annotations

import copy
import logging
import random
import string
from dataclasses import dataclass, field

from apex.appir import (
    API_CATALOG,
    UNMODELED_RESULTS,
    WIDGET_EVENT_BINDING,
    App,
    Event,
    arith,
    compare,
)
from apex.errors import EventNotEnabled, IntegrityError, RuntimeTrap
from apex.expr import EvalError, str_apply

log = logging.getLogger(__name__)

MAX_STEPS = 100_000
MAX_FRAMES = 64
MAX_TRANSITIONS = 32
TEXT_LEN = 8
BUILTIN_TEXT_HANDLER = "ui.setText"


@dataclass(frozen=True)
class ObjRef:
    id: int


@dataclass
class HeapObject:
    cls: str
    fields: dict = field(default_factory=dict)


@dataclass
class Heap:
    statics: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)
    next_id: int = 1


@dataclass(frozen=True)
class WidgetState:
    id: str
    kind: str
    bindings: tuple[tuple[str, str], ...]

    def handler(self, binding: str) -> str | None:
        for k, sig in self.bindings:
            if k == binding:
                return sig
        return None


@dataclass(frozen=True)
class ConcreteLayout:
    """Snapshot of the foreground GUI plus the app's registered receivers."""

    activity: str | None
    widgets: tuple[WidgetState, ...] = ()
    texts: tuple[tuple[str, str], ...] = ()
    receivers: tuple[tuple[str, str], ...] = ()

    def widget(self, wid: str) -> WidgetState | None:
        for w in self.widgets:
            if w.id == wid:
                return w
        return None

    def text_of(self, wid: str) -> str:
        for k, v in self.texts:
            if k == wid:
                return v
        return ""

    def pairs(self) -> frozenset:
        """The (event-descriptor, handler) set that defines layout equivalence."""
        out = set()
        for w in self.widgets:
            for kind in ("tap", "long-tap"):
                sig = w.handler(WIDGET_EVENT_BINDING[kind])
                if sig:
                    out.add(((kind, w.id), sig))
            if w.kind == "textfield":
                out.add((("text-input", w.id), w.handler("text") or BUILTIN_TEXT_HANDLER))
        for action, sig in self.receivers:
            out.add((("dynamic-broadcast", action), sig))
        return frozenset(out)


@dataclass
class ActivityInstance:
    activity: str
    widgets: list  # list of [id, kind, dict binding->sig]
    texts: dict = field(default_factory=dict)

    def snapshot(self, receivers) -> ConcreteLayout:
        ws = tuple(
            WidgetState(wid, kind, tuple(sorted(b.items()))) for wid, kind, b in self.widgets
        )
        return ConcreteLayout(self.activity, ws, tuple(sorted(self.texts.items())), tuple(receivers))

    def find(self, wid: str):
        for w in self.widgets:
            if w[0] == wid:
                return w
        return None


@dataclass(frozen=True)
class LogEntry:
    kind: str  # "S" start, "R" return, "B" block enter, "REG" receiver, "X" crash
    sig: str
    arg: object = None

    def text(self) -> str:
        if self.kind == "B":
            return f"B {self.sig} {self.arg}"
        if self.kind == "REG":
            return f"REG {self.arg} {self.sig}"
        if self.kind == "X":
            return f"X {self.sig} {self.arg}"
        return f"{self.kind} {self.sig}"


@dataclass
class ExecLog:
    entries: list = field(default_factory=list)

    def to_text(self) -> str:
        return "".join(e.text() + "\n" for e in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "ExecLog":
        out = []
        for line in text.splitlines():
            parts = line.split(" ", 2)
            if not parts or not parts[0]:
                continue
            kind = parts[0]
            if kind == "B":
                out.append(LogEntry("B", parts[1], int(parts[2])))
            elif kind == "REG":
                out.append(LogEntry("REG", parts[2], parts[1]))
            elif kind == "X":
                out.append(LogEntry("X", parts[1], parts[2] if len(parts) > 2 else ""))
            elif kind in ("S", "R"):
                out.append(LogEntry(kind, parts[1]))
            else:
                raise IntegrityError(f"bad log line {line!r}")
        return cls(out)

    @property
    def crashed(self) -> bool:
        return any(e.kind == "X" for e in self.entries)

    def segments(self) -> list[tuple[str, list[LogEntry]]]:
        """Split into (root sig, entries of that root invocation) in order."""
        out = []
        depth = 0
        cur: list = []
        root = None
        for e in self.entries:
            if e.kind == "S":
                if depth == 0:
                    root = e.sig
                    cur = []
                depth += 1
                cur.append(e)
            elif e.kind == "R":
                if depth == 0:
                    raise IntegrityError(f"unbalanced log: return from {e.sig} without start")
                cur.append(e)
                depth -= 1
                if depth == 0:
                    out.append((root, cur))
            elif e.kind == "X":
                if depth:
                    cur.append(e)
                    out.append((root, cur))
                depth = 0
            elif depth:
                cur.append(e)
        if depth:
            raise IntegrityError("unbalanced log: unterminated method")
        return out

    def blocks(self) -> list[tuple[str, int]]:
        return [(e.sig, e.arg) for e in self.entries if e.kind == "B"]


def event_handler_of(log: ExecLog) -> list[str]:
    """Roots of the method-call forest, in order."""
    if log.crashed:
        raise IntegrityError("log contains a crash marker")
    return [root for root, _ in log.segments()]


@dataclass
class RuntimeState:
    app: App
    rng_seed: int = 42
    stack: list = field(default_factory=list)  # list[ActivityInstance]
    heap: Heap = field(default_factory=Heap)
    receivers: list = field(default_factory=list)  # list[(action, sig)]
    text_cache: dict = field(default_factory=dict)
    crashed: bool = False
    events_applied: int = 0

    @property
    def current_activity(self) -> str | None:
        return self.stack[-1].activity if self.stack else None

    @property
    def layout(self) -> ConcreteLayout:
        if not self.stack:
            return ConcreteLayout(None, (), (), tuple(self.receivers))
        return self.stack[-1].snapshot(self.receivers)

    def static(self, sig: str):
        if sig in self.heap.statics:
            return self.heap.statics[sig]
        return self.app.static_default(sig)


@dataclass
class EventResult:
    layout: ConcreteLayout
    handlers: list
    log: ExecLog
    primary: str | None = None  # the handler bound to the event itself
    crash: str | None = None


@dataclass
class SequenceResult:
    layout: ConcreteLayout
    handlers: list
    log: ExecLog
    blocks: set
    state: RuntimeState
    primary: str | None = None
    crash: str | None = None


def new_state(app: App, seed: int = 42) -> RuntimeState:
    st = RuntimeState(app=app, rng_seed=seed)
    _reset(st)
    return st


def _reset(st: RuntimeState) -> None:
    st.stack = []
    st.heap = Heap()
    for s in st.app.manifest.statics:
        st.heap.statics[s.sig] = s.default
    st.receivers = []
    st.crashed = False


def _instance(app: App, aid: str) -> ActivityInstance:
    act = app.activity(aid)
    widgets = [[w.id, w.kind, dict(w.bindings)] for w in act.layout.widgets]
    return ActivityInstance(aid, widgets)


def random_text(seed: int, activity: str | None, widget: str) -> str:
    rng = random.Random(f"{seed}:{activity}:{widget}")
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(TEXT_LEN))


class _Interpreter:
    def __init__(self, st: RuntimeState, log: ExecLog):
        self.st = st
        self.app = st.app
        self.log = log
        self.steps = 0
        self.pending: list = []
        self.leaders = {sig: frozenset(m.leaders) for sig, m in self.app.methods.items()}

    def run_root(self, sig: str, args: list, extras: dict) -> None:
        self.extras = extras
        self.call(sig, args, 0)

    def call(self, sig: str, args: list, depth: int):
        if depth >= MAX_FRAMES:
            raise RuntimeTrap("stack overflow")
        m = self.app.methods.get(sig)
        if m is None:
            raise RuntimeTrap(f"no such method {sig}")
        regs: list = [None] * m.reg_count
        for i, a in enumerate(args[: m.param_count]):
            regs[i] = a
        leaders = self.leaders[sig]
        self.log.entries.append(LogEntry("S", sig))
        pc = 0
        self.log.entries.append(LogEntry("B", sig, 0))
        last_result = None
        body = m.body
        while True:
            self.steps += 1
            if self.steps > MAX_STEPS:
                raise RuntimeTrap("step limit exceeded")
            ins = body[pc]
            op, a = ins.op, ins.args
            nxt = pc + 1
            if op == "const":
                regs[a[0]] = a[1]
            elif op == "move":
                regs[a[0]] = self._read(regs, a[1])
            elif op == "binop":
                try:
                    regs[a[1]] = arith(a[0], self._read(regs, a[2]), self._read(regs, a[3]))
                except ZeroDivisionError:
                    raise RuntimeTrap("division by zero") from None
                except TypeError as exc:
                    raise RuntimeTrap(str(exc)) from None
            elif op in ("if", "ifz"):
                lhs = self._read(regs, a[1])
                rhs = self._read(regs, a[2]) if op == "if" else 0
                if isinstance(lhs, ObjRef) or isinstance(rhs, ObjRef):
                    if a[0] not in ("==", "!="):
                        raise RuntimeTrap("ordering on object references")
                try:
                    taken = compare(a[0], lhs, rhs)
                except TypeError as exc:
                    raise RuntimeTrap(str(exc)) from None
                if taken:
                    nxt = ins.target
            elif op == "goto":
                nxt = ins.target
            elif op == "sget":
                regs[a[0]] = self.st.static(a[1])
            elif op == "sput":
                self.st.heap.statics[a[1]] = self._read(regs, a[0])
            elif op == "iget":
                obj = self._obj(regs, a[1])
                regs[a[0]] = obj.fields.get(a[2], 0)
            elif op == "iput":
                obj = self._obj(regs, a[1])
                obj.fields[a[2]] = self._read(regs, a[0])
            elif op == "new":
                heap = self.st.heap
                ref = ObjRef(heap.next_id)
                heap.next_id += 1
                heap.objects[ref.id] = HeapObject(a[1])
                regs[a[0]] = ref
            elif op == "aget":
                obj = self._obj(regs, a[1])
                regs[a[0]] = obj.fields.get(self._index(regs, a[2]), 0)
            elif op == "aput":
                obj = self._obj(regs, a[1])
                obj.fields[self._index(regs, a[2])] = self._read(regs, a[0])
            elif op == "invoke":
                vals = [self._read(regs, r) for r in a[1]]
                last_result = self.call(a[0], vals, depth + 1)
            elif op == "move_result":
                regs[a[0]] = last_result
            elif op == "api":
                vals = [self._read(regs, r) for r in a[1]]
                last_result = self.api(a[0], vals)
            elif op == "return":
                result = self._read(regs, a[0]) if a[0] is not None else None
                self.log.entries.append(LogEntry("R", sig))
                return result
            else:  # pragma: no cover - parser rejects unknown ops
                raise RuntimeTrap(f"unknown instruction {op}")
            if nxt >= len(body):
                raise RuntimeTrap("fell off the end of the method")
            if nxt in leaders:
                self.log.entries.append(LogEntry("B", sig, nxt))
            pc = nxt

    def _read(self, regs, r):
        v = regs[r]
        if v is None:
            raise RuntimeTrap(f"read of uninitialized register v{r}")
        return v

    def _obj(self, regs, r) -> HeapObject:
        v = self._read(regs, r)
        if not isinstance(v, ObjRef):
            raise RuntimeTrap(f"v{r} does not hold an object")
        return self.st.heap.objects[v.id]

    def _index(self, regs, r) -> int:
        v = self._read(regs, r)
        if isinstance(v, (str, ObjRef)) or isinstance(v, bool) or v < 0:
            raise RuntimeTrap(f"bad array index {v!r}")
        return v

    def api(self, name: str, vals: list):
        st = self.st
        if name in UNMODELED_RESULTS:
            return UNMODELED_RESULTS[name]
        if name == "ui.startActivity":
            if not isinstance(vals[0], str) or st.app.activity(vals[0]) is None:
                raise RuntimeTrap(f"startActivity of unknown activity {vals[0]!r}")
            self.pending.append(("start", vals[0]))
            return None
        if name == "ui.finish":
            self.pending.append(("finish", None))
            return None
        if name in ("ui.setHandler", "ui.setText", "ui.getText"):
            if not st.stack:
                raise RuntimeTrap(f"{name} without a foreground activity")
            w = st.stack[-1].find(vals[0]) if isinstance(vals[0], str) else None
            if w is None:
                raise RuntimeTrap(f"{name}: no widget {vals[0]!r}")
            if name == "ui.setHandler":
                if vals[1] not in st.app.methods:
                    raise RuntimeTrap(f"setHandler to unknown method {vals[1]!r}")
                w[2]["click"] = vals[1]
                return None
            if w[1] != "textfield":
                raise RuntimeTrap(f"{name} on non-textfield {vals[0]}")
            if name == "ui.getText":
                return st.stack[-1].texts.get(vals[0], "")
            if not isinstance(vals[1], str):
                raise RuntimeTrap("setText needs a string")
            st.stack[-1].texts[vals[0]] = vals[1]
            return None
        if name == "intent.getExtra":
            return self.extras.get(vals[0], "")
        if name.startswith("str."):
            try:
                return str_apply(name[4:], vals)
            except EvalError as exc:
                raise RuntimeTrap(str(exc)) from None
        if name == "sys.registerReceiver":
            action, sig = vals
            if not isinstance(action, str) or sig not in st.app.methods:
                raise RuntimeTrap("registerReceiver needs an action string and a method")
            if (action, sig) not in st.receivers:
                st.receivers.append((action, sig))
            self.log.entries.append(LogEntry("REG", sig, action))
            return None
        if name == "log.print":
            return None
        raise RuntimeTrap(f"api {name} has no implementation")  # pragma: no cover

    def drain_transitions(self) -> None:
        st = self.st
        rounds = 0
        while self.pending:
            rounds += 1
            if rounds > MAX_TRANSITIONS:
                raise RuntimeTrap("activity transition loop")
            kind, aid = self.pending.pop(0)
            old = st.stack[-1] if st.stack else None
            if old is not None:
                self._callback(old.activity, "onPause")
                self._callback(old.activity, "onStop")
            if kind == "start":
                st.stack.append(_instance(st.app, aid))
                self._callback(aid, "onCreate")
            elif st.stack:
                st.stack.pop()
                if not st.stack:
                    st.receivers = []

    def _callback(self, aid: str, name: str) -> None:
        sig = self.app.activity(aid).callback(name)
        if sig:
            self.run_root(sig, [], {})


def boot(app: App, seed: int = 42, entry: Event | None = None):
    """Fresh start through ``entry`` (default: main launch); returns (state, layout, log)."""
    st = new_state(app, seed)
    entry = entry or Event("launch", app.manifest.main_activity, None, {})
    res = apply_event(st, entry)
    return st, res.layout, res.log


def is_enabled(st: RuntimeState, e: Event) -> bool:
    app = st.app
    if e.kind == "launch":
        return e.target == app.manifest.main_activity
    if e.kind == "intent-broadcast":
        return (e.target, e.action) in app.manifest.intent_filters
    if not st.stack:
        return False
    if e.kind == "back":
        return True
    if e.kind == "dynamic-broadcast":
        return any(a == e.target for a, _ in st.receivers)
    w = st.stack[-1].find(e.target)
    if w is None:
        return False
    if e.kind == "text-input":
        return w[1] == "textfield"
    return WIDGET_EVENT_BINDING[e.kind] in w[2]


def apply_event(st: RuntimeState, e: Event) -> EventResult:
    if not is_enabled(st, e):
        raise EventNotEnabled(f"event not enabled: {e.text()}")
    st.events_applied += 1
    log = ExecLog()
    interp = _Interpreter(st, log)
    saved = (copy.deepcopy(st.stack), copy.deepcopy(st.heap), list(st.receivers))
    primary = None
    try:
        if e.is_entry:
            _reset(st)
            st.stack.append(_instance(st.app, e.target))
            primary = st.app.activity(e.target).callback("onCreate")
            if primary:
                interp.run_root(primary, [], e.extras())
        elif e.kind == "back":
            interp.pending.append(("finish", None))
        elif e.kind == "dynamic-broadcast":
            sigs = [sig for a, sig in st.receivers if a == e.target]
            primary = sigs[0]
            for sig in sigs:
                interp.run_root(sig, [e.target], e.extras())
        else:
            inst = st.stack[-1]
            w = inst.find(e.target)
            if e.kind == "text-input":
                text = e.payload if isinstance(e.payload, str) else random_text(
                    st.rng_seed, inst.activity, e.target
                )
                inst.texts[e.target] = text
            primary = w[2].get(WIDGET_EVENT_BINDING[e.kind])
            if primary:
                interp.run_root(primary, [e.target], {})
        interp.drain_transitions()
    except RuntimeTrap as trap:
        log.entries.append(LogEntry("X", primary or e.kind, str(trap)))
        if e.is_entry:
            _reset(st)
            st.crashed = True
        else:
            st.stack, st.heap, st.receivers = saved
        log_roots = []
        return EventResult(st.layout, log_roots, log, primary, str(trap))
    return EventResult(st.layout, event_handler_of(log), log, primary)


def apply_sequence(app: App, seq: list[Event], seed: int = 42, state: RuntimeState | None = None):
    """Apply ``seq``; a leading entry event (or no state) means a fresh boot."""
    if not seq:
        raise ValueError("empty event sequence")
    if state is None or seq[0].is_entry:
        state = new_state(app, seed)
    blocks: set = set()
    res = None
    for i, e in enumerate(seq):
        try:
            res = apply_event(state, e)
        except EventNotEnabled:
            raise EventNotEnabled(f"event not enabled: {e.text()}", index=i) from None
        blocks.update(res.log.blocks())
    return SequenceResult(res.layout, res.handlers, res.log, blocks, state, res.primary, res.crash)


def extract_events(layout: ConcreteLayout, state: RuntimeState) -> list[Event]:
    """Events enabled by ``layout``: widget events, text inputs, then broadcasts."""
    out = []
    for w in layout.widgets:
        if w.handler("click"):
            out.append(Event("tap", w.id))
        if w.handler("longclick"):
            out.append(Event("long-tap", w.id))
        if w.kind == "textfield":
            key = (layout.activity, w.id)
            if key not in state.text_cache:
                state.text_cache[key] = random_text(state.rng_seed, layout.activity, w.id)
            out.append(Event("text-input", w.id, None, state.text_cache[key]))
    seen = set()
    for action, _ in layout.receivers:
        if action not in seen:
            seen.add(action)
            out.append(Event("dynamic-broadcast", action, None, {}))
    return out
