"""The miniature event-driven app IR: types, value semantics, ``.mapp`` parser.

A ``.mapp`` file has three kinds of sections::

    APP counter
    MANIFEST
      main Main
      filter Nest action.HATCH
      static Main.count int 0
    END
    ACTIVITY Main
      lifecycle onCreate Main.onCreate
      widget inc button click=Main.onInc
      widget name textfield
    END
    METHOD Main.onInc params=1 regs=2
      0: sget v0 Main.count
      1: const v1 1
      2: binop + v0 v0 v1
      3: sput v0 Main.count
      4: return
    END

Index prefixes (``3:``) are optional but must match the position when given.
``#`` starts a comment outside string literals.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Union

from apex.errors import ParseError

Value = Union[int, str, bool]

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

LIFECYCLE = ("onCreate", "onPause", "onStop")
WIDGET_KINDS = ("button", "textfield", "list-item")
BINDING_KINDS = ("click", "longclick", "text")
BINOPS = ("+", "-", "*", "/")
CMPS = ("==", "!=", "<", "<=", ">", ">=")
STATIC_SORTS = ("int", "bool", "str", "obj")

# name -> (arity, result sort or None, symbolically modeled)
API_CATALOG: dict[str, tuple[int, str | None, bool]] = {
    "ui.startActivity": (1, None, True),
    "ui.finish": (0, None, True),
    "ui.setHandler": (2, None, True),
    "ui.setText": (2, None, True),
    "ui.getText": (1, "str", True),
    "intent.getExtra": (1, "str", True),
    "str.equals": (2, "bool", True),
    "str.length": (1, "int", True),
    "str.concat": (2, "str", True),
    "sys.registerReceiver": (2, None, True),
    "log.print": (1, None, True),
    "net.fetch": (0, "int", False),
    "sys.battery": (0, "int", False),
}
API_CATALOG_VERSION = 1

# Concrete results of the unmodeled APIs; they ignore their arguments.
UNMODELED_RESULTS: dict[str, Value] = {"net.fetch": -1, "sys.battery": 100}

GUI_TRANSITION_APIS = ("ui.startActivity", "ui.finish")

EVENT_KINDS = (
    "launch",
    "intent-broadcast",
    "tap",
    "long-tap",
    "text-input",
    "back",
    "dynamic-broadcast",
)
ENTRY_KINDS = ("launch", "intent-broadcast")
WIDGET_EVENT_BINDING = {"tap": "click", "long-tap": "longclick", "text-input": "text"}


# -- value semantics shared by the interpreter and the symbolic evaluator --


def wrap64(x: int) -> int:
    return ((x - INT_MIN) % 2**64) + INT_MIN


def arith(op: str, a: Value, b: Value) -> int:
    if isinstance(a, str) or isinstance(b, str):
        raise TypeError(f"arithmetic on string operand: {a!r} {op} {b!r}")
    a, b = int(a), int(b)
    if op == "+":
        return wrap64(a + b)
    if op == "-":
        return wrap64(a - b)
    if op == "*":
        return wrap64(a * b)
    if op == "/":
        if b == 0:
            raise ZeroDivisionError("division by zero")
        q = abs(a) // abs(b)
        return wrap64(q if (a < 0) == (b < 0) else -q)
    raise ValueError(f"unknown operator {op}")


def compare(op: str, a: Value, b: Value) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if isinstance(a, str) != isinstance(b, str):
        raise TypeError(f"ordering between {a!r} and {b!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison {op}")


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


# -- IR types --


@dataclass(frozen=True)
class Instr:
    """One instruction; ``args`` layout depends on ``op`` (see ``OPERANDS``)."""

    op: str
    args: tuple = ()

    @property
    def is_branch(self) -> bool:
        return self.op in ("if", "ifz", "goto")

    @property
    def target(self) -> int | None:
        if self.op in ("if", "ifz", "goto"):
            return self.args[-1]
        return None

    def registers(self) -> list[int]:
        kinds = OPERANDS[self.op]
        regs = []
        for kind, arg in zip(kinds, self.args):
            if kind == "reg":
                regs.append(arg)
            elif kind == "regs":
                regs.extend(arg)
            elif kind == "optreg" and arg is not None:
                regs.append(arg)
        return regs

    def text(self) -> str:
        parts = [self.op]
        for kind, arg in zip(OPERANDS[self.op], self.args):
            if kind in ("reg",):
                parts.append(f"v{arg}")
            elif kind == "optreg":
                if arg is not None:
                    parts.append(f"v{arg}")
            elif kind == "regs":
                parts.extend(f"v{r}" for r in arg)
            elif kind == "lit":
                parts.append(format_value(arg))
            else:
                parts.append(str(arg))
        return " ".join(parts)


# Operand kinds per instruction form.
OPERANDS: dict[str, tuple[str, ...]] = {
    "const": ("reg", "lit"),
    "move": ("reg", "reg"),
    "binop": ("binop", "reg", "reg", "reg"),
    "if": ("cmp", "reg", "reg", "target"),
    "ifz": ("cmp", "reg", "target"),
    "goto": ("target",),
    "sget": ("reg", "name"),
    "sput": ("reg", "name"),
    "iget": ("reg", "reg", "name"),
    "iput": ("reg", "reg", "name"),
    "new": ("reg", "name"),
    "aget": ("reg", "reg", "reg"),
    "aput": ("reg", "reg", "reg"),
    "invoke": ("name", "regs"),
    "move_result": ("reg",),
    "api": ("name", "regs"),
    "return": ("optreg",),
}


@dataclass(frozen=True)
class Method:
    sig: str
    param_count: int
    reg_count: int
    body: tuple[Instr, ...]
    leaders: tuple[int, ...] = ()

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """Block boundaries as ``(start, end)`` half-open ranges, in order."""
        bounds = list(self.leaders) + [len(self.body)]
        return [(bounds[i], bounds[i + 1]) for i in range(len(self.leaders))]

    def block_index(self, instr_index: int) -> int:
        lo = 0
        for i, start in enumerate(self.leaders):
            if start <= instr_index:
                lo = i
            else:
                break
        return lo


def compute_leaders(body: tuple[Instr, ...] | list[Instr]) -> tuple[int, ...]:
    leaders = {0}
    for i, ins in enumerate(body):
        if ins.is_branch:
            leaders.add(ins.target)
            if i + 1 < len(body):
                leaders.add(i + 1)
        elif ins.op == "return" and i + 1 < len(body):
            leaders.add(i + 1)
    return tuple(sorted(x for x in leaders if x < len(body)))


@dataclass(frozen=True)
class Widget:
    id: str
    kind: str
    bindings: tuple[tuple[str, str], ...] = ()  # (binding kind, method sig)

    def handler(self, binding: str) -> str | None:
        for k, sig in self.bindings:
            if k == binding:
                return sig
        return None


@dataclass(frozen=True)
class LayoutDecl:
    widgets: tuple[Widget, ...] = ()

    def widget(self, wid: str) -> Widget | None:
        for w in self.widgets:
            if w.id == wid:
                return w
        return None


@dataclass(frozen=True)
class Activity:
    id: str
    layout: LayoutDecl = field(default_factory=LayoutDecl)
    lifecycle: tuple[tuple[str, str], ...] = ()  # (callback name, sig)

    def callback(self, name: str) -> str | None:
        for k, sig in self.lifecycle:
            if k == name:
                return sig
        return None


@dataclass(frozen=True)
class StaticDecl:
    sig: str
    sort: str
    default: Value | None


@dataclass(frozen=True)
class Manifest:
    main_activity: str
    intent_filters: tuple[tuple[str, str], ...] = ()
    statics: tuple[StaticDecl, ...] = ()


@dataclass(frozen=True)
class App:
    name: str
    manifest: Manifest
    activities: tuple[Activity, ...]
    methods: dict[str, Method]

    def activity(self, aid: str) -> Activity | None:
        for a in self.activities:
            if a.id == aid:
                return a
        return None

    def static_sort(self, sig: str) -> str:
        for s in self.manifest.statics:
            if s.sig == sig:
                return s.sort
        return "int"

    def static_default(self, sig: str) -> Value | None:
        for s in self.manifest.statics:
            if s.sig == sig:
                return s.default
        return 0

    def instruction_count(self) -> int:
        return sum(len(m.body) for m in self.methods.values())

    def string_literals(self) -> list[str]:
        """Every string constant in method bodies and static defaults, sorted."""
        out = set()
        for m in self.methods.values():
            for ins in m.body:
                if ins.op == "const" and isinstance(ins.args[1], str):
                    out.add(ins.args[1])
        for s in self.manifest.statics:
            if isinstance(s.default, str):
                out.add(s.default)
        return sorted(out)


@dataclass(frozen=True)
class Event:
    kind: str
    target: str | None = None
    action: str | None = None
    payload: object = None  # str for text-input, dict[str, str] extras otherwise

    @property
    def descriptor(self) -> tuple:
        """Identity used by handler mapping; payloads are excluded."""
        if self.kind == "intent-broadcast":
            return (self.kind, self.target, self.action)
        return (self.kind, self.target)

    @property
    def is_entry(self) -> bool:
        return self.kind in ENTRY_KINDS

    def extras(self) -> dict:
        return dict(self.payload) if isinstance(self.payload, dict) else {}

    def text(self) -> str:
        parts = [self.kind]
        if self.target is not None:
            parts.append(self.target)
        if self.action is not None:
            parts.append(self.action)
        if self.payload not in (None, {}):
            parts.append(json.dumps(self.payload, sort_keys=True))
        return " ".join(parts)

    def with_payload(self, payload) -> "Event":
        return Event(self.kind, self.target, self.action, payload)


def parse_event(line: str) -> Event:
    """Parse one ``kind target [action] [payload-json]`` line."""
    line = line.strip()
    head, _, rest = line.partition(" ")
    kind = head
    if kind not in EVENT_KINDS:
        raise ParseError(f"unknown event kind {kind!r}")
    rest = rest.strip()
    target = action = payload = None
    if kind == "back":
        if rest:
            raise ParseError("back takes no operands")
        return Event("back")
    target, _, rest = rest.partition(" ")
    if not target:
        raise ParseError(f"{kind} needs a target")
    rest = rest.strip()
    if kind == "intent-broadcast":
        action, _, rest = rest.partition(" ")
        if not action:
            raise ParseError("intent-broadcast needs an action")
        rest = rest.strip()
    if rest:
        try:
            payload = json.loads(rest)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad payload json: {exc}") from None
        if kind == "text-input":
            if not isinstance(payload, str):
                raise ParseError("text-input payload must be a string")
        elif not (isinstance(payload, dict) and all(isinstance(v, str) for v in payload.values())):
            raise ParseError("extras payload must map keys to strings")
    elif kind in ("launch", "intent-broadcast", "dynamic-broadcast"):
        payload = {}
    return Event(kind, target, action, payload)


def entry_events(app: App) -> list[Event]:
    out = [Event("launch", app.manifest.main_activity, None, {})]
    for aid, action in app.manifest.intent_filters:
        out.append(Event("intent-broadcast", aid, action, {}))
    return out


# -- parser --

_IDENT = re.compile(r"^[A-Za-z_$][\w$.\-]*$")
_REG = re.compile(r"^v(\d+)$")


def _strip_comment(line: str) -> str:
    in_str = False
    esc = False
    for i, ch in enumerate(line):
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return line[:i]
    return line


def _tokens(text: str, lineno: int) -> list[str]:
    toks: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            if text[j] == '"':
                j += 1
                while j < n and text[j] != '"':
                    j += 2 if text[j] == "\\" else 1
                if j >= n:
                    raise ParseError("unterminated string literal", lineno, i + 1)
            j += 1
        toks.append(text[i:j])
        i = j
    return toks


def _parse_literal(tok: str, lineno: int) -> Value:
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok.startswith('"'):
        try:
            val = json.loads(tok)
        except json.JSONDecodeError:
            raise ParseError(f"bad string literal {tok}", lineno, 1) from None
        if not isinstance(val, str):
            raise ParseError(f"bad string literal {tok}", lineno, 1)
        return val
    try:
        val = int(tok, 0)
    except ValueError:
        raise ParseError(f"bad literal {tok!r}", lineno, 1) from None
    if not INT_MIN <= val <= INT_MAX:
        raise ParseError(f"integer literal out of 64-bit range: {tok}", lineno, 1)
    return val


def _parse_instr(toks: list[str], lineno: int) -> Instr:
    op = toks[0]
    if op not in OPERANDS:
        raise ParseError(f"unknown instruction {op!r}", lineno, 1)
    kinds = OPERANDS[op]
    operands = toks[1:]
    args: list = []
    pos = 0
    for kind in kinds:
        if kind == "regs":
            regs = []
            for tok in operands[pos:]:
                m = _REG.match(tok)
                if not m:
                    raise ParseError(f"expected register, got {tok!r}", lineno, 1)
                regs.append(int(m.group(1)))
            pos = len(operands)
            args.append(tuple(regs))
            continue
        if kind == "optreg":
            if pos < len(operands):
                m = _REG.match(operands[pos])
                if not m:
                    raise ParseError(f"expected register, got {operands[pos]!r}", lineno, 1)
                args.append(int(m.group(1)))
                pos += 1
            else:
                args.append(None)
            continue
        if pos >= len(operands):
            raise ParseError(f"{op}: missing operand ({kind})", lineno, 1)
        tok = operands[pos]
        pos += 1
        if kind == "reg":
            m = _REG.match(tok)
            if not m:
                raise ParseError(f"expected register, got {tok!r}", lineno, 1)
            args.append(int(m.group(1)))
        elif kind == "lit":
            args.append(_parse_literal(tok, lineno))
        elif kind == "binop":
            if tok not in BINOPS:
                raise ParseError(f"unknown arithmetic operator {tok!r}", lineno, 1)
            args.append(tok)
        elif kind == "cmp":
            if tok not in CMPS:
                raise ParseError(f"unknown comparison {tok!r}", lineno, 1)
            args.append(tok)
        elif kind == "target":
            try:
                args.append(int(tok))
            except ValueError:
                raise ParseError(f"branch target must be an index, got {tok!r}", lineno, 1) from None
        elif kind == "name":
            if not _IDENT.match(tok):
                raise ParseError(f"bad name {tok!r}", lineno, 1)
            args.append(tok)
    if pos != len(operands):
        raise ParseError(f"{op}: too many operands", lineno, 1)
    return Instr(op, tuple(args))


def parse_app(text: str) -> App:
    """Parse and validate ``.mapp`` source; raises ``ParseError`` on any defect."""
    try:
        return _parse_app(text)
    except ParseError:
        raise
    except Exception as exc:  # parse is total: never leak an internal crash
        raise ParseError(f"malformed input: {exc}") from None


def _parse_app(text: str) -> App:
    if not isinstance(text, str):
        raise ParseError("input must be text")
    name = "app"
    main = None
    filters: list[tuple[str, str]] = []
    statics: list[StaticDecl] = []
    activities: list[Activity] = []
    methods: dict[str, Method] = {}
    method_lines: dict[str, int] = {}
    handler_refs: list[tuple[str, int]] = []

    section = None
    cur: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        toks = _tokens(line, lineno)
        head = toks[0]
        if section is None:
            if head == "APP":
                if len(toks) != 2:
                    raise ParseError("APP takes one name", lineno, 1)
                name = toks[1]
            elif head == "MANIFEST":
                if main is not None or len(toks) != 1:
                    raise ParseError("duplicate or malformed MANIFEST", lineno, 1)
                section = "manifest"
            elif head == "ACTIVITY":
                if len(toks) != 2 or not _IDENT.match(toks[1]):
                    raise ParseError("ACTIVITY takes one identifier", lineno, 1)
                section = "activity"
                cur = {"id": toks[1], "widgets": [], "lifecycle": [], "line": lineno}
            elif head == "METHOD":
                section = "method"
                cur = _method_header(toks, lineno)
            else:
                raise ParseError(f"unexpected {head!r} outside a section", lineno, 1)
            continue
        if head == "END":
            if section == "activity":
                aid = cur["id"]
                if any(a.id == aid for a in activities):
                    raise ParseError(f"duplicate activity id {aid}", cur["line"], 1)
                activities.append(
                    Activity(aid, LayoutDecl(tuple(cur["widgets"])), tuple(cur["lifecycle"]))
                )
            elif section == "method":
                m = _finish_method(cur)
                if m.sig in methods:
                    raise ParseError(f"duplicate method {m.sig}", cur["line"], 1)
                methods[m.sig] = m
                method_lines[m.sig] = cur["line"]
            elif section == "manifest" and main is None:
                raise ParseError("manifest declares no main activity", lineno, 1)
            section = None
            continue
        if section == "manifest":
            if head == "main" and len(toks) == 2:
                if main is not None:
                    raise ParseError("duplicate main activity", lineno, 1)
                main = toks[1]
            elif head == "filter" and len(toks) == 3:
                if (toks[1], toks[2]) in filters:
                    raise ParseError(f"duplicate intent filter {toks[2]} on {toks[1]}", lineno, 1)
                filters.append((toks[1], toks[2]))
            elif head == "static" and len(toks) in (3, 4):
                sort = toks[2]
                if sort not in STATIC_SORTS:
                    raise ParseError(f"unknown static sort {sort!r}", lineno, 1)
                default = _parse_literal(toks[3], lineno) if len(toks) == 4 else None
                if default is None and sort != "obj":
                    default = {"int": 0, "bool": False, "str": ""}[sort]
                if any(s.sig == toks[1] for s in statics):
                    raise ParseError(f"duplicate static {toks[1]}", lineno, 1)
                statics.append(StaticDecl(toks[1], sort, default))
            else:
                raise ParseError(f"bad manifest line {line!r}", lineno, 1)
        elif section == "activity":
            if head == "lifecycle" and len(toks) == 3:
                if toks[1] not in LIFECYCLE:
                    raise ParseError(f"unknown lifecycle callback {toks[1]!r}", lineno, 1)
                if any(k == toks[1] for k, _ in cur["lifecycle"]):
                    raise ParseError(f"duplicate lifecycle callback {toks[1]}", lineno, 1)
                cur["lifecycle"].append((toks[1], toks[2]))
                handler_refs.append((toks[2], lineno))
            elif head == "widget" and len(toks) >= 3:
                wid, kind = toks[1], toks[2]
                if kind not in WIDGET_KINDS:
                    raise ParseError(f"unknown widget kind {kind!r}", lineno, 1)
                if any(w.id == wid for w in cur["widgets"]):
                    raise ParseError(f"duplicate widget id {wid}", lineno, 1)
                bindings = []
                for tok in toks[3:]:
                    bkind, eq, sig = tok.partition("=")
                    if not eq or bkind not in BINDING_KINDS:
                        raise ParseError(f"bad handler binding {tok!r}", lineno, 1)
                    if bkind == "text" and kind != "textfield":
                        raise ParseError("text binding only allowed on textfields", lineno, 1)
                    if any(b == bkind for b, _ in bindings):
                        raise ParseError(f"duplicate {bkind} binding on {wid}", lineno, 1)
                    bindings.append((bkind, sig))
                    handler_refs.append((sig, lineno))
                cur["widgets"].append(Widget(wid, kind, tuple(bindings)))
            else:
                raise ParseError(f"bad activity line {line!r}", lineno, 1)
        elif section == "method":
            m = re.match(r"^(\d+):$", head)
            if m:
                idx = int(m.group(1))
                toks = toks[1:]
                if idx != len(cur["body"]):
                    raise ParseError(
                        f"index prefix {idx} does not match position {len(cur['body'])}", lineno, 1
                    )
                if not toks:
                    raise ParseError("missing instruction", lineno, 1)
            cur["body"].append(_parse_instr(toks, lineno))
            cur["lines"].append(lineno)
    if section is not None:
        raise ParseError(f"unterminated {section} section (missing END)")
    if main is None:
        raise ParseError("no MANIFEST with a main activity")

    app = App(name, Manifest(main, tuple(filters), tuple(statics)), tuple(activities), methods)
    _validate(app, handler_refs, method_lines)
    return app


def _method_header(toks: list[str], lineno: int) -> dict:
    if len(toks) < 2 or not _IDENT.match(toks[1]):
        raise ParseError("METHOD needs a signature", lineno, 1)
    params = 0
    regs = None
    for tok in toks[2:]:
        key, eq, val = tok.partition("=")
        if not eq or key not in ("params", "regs") or not val.isdigit():
            raise ParseError(f"bad method attribute {tok!r}", lineno, 1)
        if key == "params":
            params = int(val)
        else:
            regs = int(val)
    if regs is None:
        regs = params
    if params > regs:
        raise ParseError("params exceed register count", lineno, 1)
    return {"sig": toks[1], "params": params, "regs": regs, "body": [], "lines": [], "line": lineno}


def _finish_method(cur: dict) -> Method:
    body = tuple(cur["body"])
    sig = cur["sig"]
    if not body:
        raise ParseError(f"method {sig} has an empty body", cur["line"], 1)
    for ins, lineno in zip(body, cur["lines"]):
        for r in ins.registers():
            if r >= cur["regs"]:
                raise ParseError(f"register v{r} out of range (regs={cur['regs']})", lineno, 1)
        t = ins.target
        if t is not None and not 0 <= t < len(body):
            raise ParseError(f"invalid branch target {t}", lineno, 1)
        if ins.op == "api":
            name, args = ins.args
            if name not in API_CATALOG:
                raise ParseError(f"api {name!r} is not in the catalog", lineno, 1)
            if len(args) != API_CATALOG[name][0]:
                raise ParseError(f"api {name} takes {API_CATALOG[name][0]} arguments", lineno, 1)
    last = body[-1]
    if last.op not in ("return", "goto"):
        raise ParseError(f"method {sig} can fall off its end", cur["lines"][-1], 1)
    return Method(sig, cur["params"], cur["regs"], body, compute_leaders(body))


def _validate(app: App, handler_refs: list[tuple[str, int]], method_lines: dict[str, int]) -> None:
    ids = {a.id for a in app.activities}
    if app.manifest.main_activity not in ids:
        raise ParseError(f"main activity {app.manifest.main_activity} is not declared")
    for aid, _ in app.manifest.intent_filters:
        if aid not in ids:
            raise ParseError(f"intent filter names unknown activity {aid}")
    for sig, lineno in handler_refs:
        if sig not in app.methods:
            raise ParseError(f"unresolved handler reference {sig}", lineno, 1)
    for m in app.methods.values():
        for ins in m.body:
            if ins.op == "invoke":
                callee, args = ins.args
                if callee not in app.methods:
                    raise ParseError(
                        f"unresolved method reference {callee}", method_lines[m.sig], 1
                    )
                if len(args) != app.methods[callee].param_count:
                    raise ParseError(
                        f"invoke {callee} passes {len(args)} args, expects "
                        f"{app.methods[callee].param_count}",
                        method_lines[m.sig],
                        1,
                    )


def serialize_app(app: App) -> str:
    """Normalized ``.mapp`` text; ``parse_app(serialize_app(a)) == a``."""
    out = [f"APP {app.name}", "MANIFEST", f"  main {app.manifest.main_activity}"]
    for aid, action in app.manifest.intent_filters:
        out.append(f"  filter {aid} {action}")
    for s in app.manifest.statics:
        line = f"  static {s.sig} {s.sort}"
        if s.default is not None:
            line += f" {format_value(s.default)}"
        out.append(line)
    out.append("END")
    for a in app.activities:
        out.append(f"ACTIVITY {a.id}")
        for name, sig in a.lifecycle:
            out.append(f"  lifecycle {name} {sig}")
        for w in a.layout.widgets:
            binds = "".join(f" {k}={sig}" for k, sig in w.bindings)
            out.append(f"  widget {w.id} {w.kind}{binds}")
        out.append("END")
    for m in app.methods.values():
        out.append(f"METHOD {m.sig} params={m.param_count} regs={m.reg_count}")
        for i, ins in enumerate(m.body):
            out.append(f"  {i}: {ins.text()}")
        out.append("END")
    return "\n".join(out) + "\n"


def load_app(path) -> App:
    with open(path, encoding="utf-8") as fh:
        return parse_app(fh.read())
