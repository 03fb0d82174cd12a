"""Path-wise symbolic execution over expression ASTs.

Executing a path yields the symbolic state (global locations mapped to
expressions over their pre-state symbols) and the path constraint (the
branch conditions the path takes, in order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from apex.apimodels import ApiContext, apply_api
from apex.appir import App, Event, Instr
from apex.errors import IntegrityError, Unsupported
from apex.expr import (
    INPUT,
    INSTANCE,
    STATIC,
    TRUE,
    BinOp,
    Lit,
    NewObj,
    Sym,
    SymExpr,
    conj,
    negate,
    simplify,
    to_sexpr,
)
from apex.ipcfg import Path

__all__ = [
    "KEYWORDS",
    "PathConstraint",
    "SymState",
    "canonical_keyword",
    "constraint_of_summary",
    "instruction_ast",
    "simplify",
    "sym_execute",
    "summary_effects",
]

KEYWORDS = (
    "$const",
    "$move",
    "$binop",
    "$if",
    "$goto",
    "$sget",
    "$sput",
    "$iget",
    "$iput",
    "$new",
    "$aget",
    "$aput",
    "$invoke",
    "$move-result",
    "$api",
    "$return",
    "=",
)

_FAMILY = {
    "const": "$const",
    "move": "$move",
    "binop": "$binop",
    "if": "$if",
    "ifz": "$if",
    "goto": "$goto",
    "sget": "$sget",
    "sput": "$sput",
    "iget": "$iget",
    "iput": "$iput",
    "new": "$new",
    "aget": "$aget",
    "aput": "$aput",
    "invoke": "$invoke",
    "move_result": "$move-result",
    "api": "$api",
    "return": "$return",
}

STORES = ("sput", "iput", "aput")


def canonical_keyword(i: Instr) -> str:
    return _FAMILY[i.op]


def instruction_ast(i: Instr) -> tuple:
    """Nested-tuple AST of one instruction; stores are rooted at ``=``."""
    a = i.args
    if i.op == "sput":
        return ("=", ("$static-field", a[1]), ("$reg", a[0]))
    if i.op == "iput":
        return ("=", ("$instance-field", ("$reg", a[1]), a[2]), ("$reg", a[0]))
    if i.op == "aput":
        return ("=", ("$aget", ("$reg", a[1]), ("$reg", a[2])), ("$reg", a[0]))
    kw = canonical_keyword(i)
    if i.op == "sget":
        return (kw, ("$reg", a[0]), ("$static-field", a[1]))
    if i.op == "iget":
        return (kw, ("$reg", a[0]), ("$instance-field", ("$reg", a[1]), a[2]))
    if i.op == "aget":
        return (kw, ("$reg", a[0]), ("$reg", a[1]), ("$reg", a[2]))
    return (kw,) + tuple(a)


@dataclass
class SymState:
    """Symbolic global state; unwritten locations are their own pre-state symbols.

    ``objects`` keys are ("static", sig) for the object a static held before
    the path, or ("new", site) for objects allocated on the path.
    """

    statics: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)
    texts: dict = field(default_factory=dict)
    effects: list = field(default_factory=list)

    def copy(self) -> "SymState":
        return SymState(
            dict(self.statics),
            {k: dict(v) for k, v in self.objects.items()},
            dict(self.texts),
            list(self.effects),
        )

    def static(self, sig: str, app: App) -> SymExpr:
        if sig in self.statics:
            return self.statics[sig]
        return Sym(STATIC, sig, 0, app.static_sort(sig))

    def resolve(self, key: tuple) -> SymExpr | None:
        """Post-state value of the location named by pre-state symbol ``key``.

        None means the path leaves the location unchanged.
        """
        kind, sig, gen = key
        if gen != 0:
            return None
        if kind == STATIC:
            return self.statics.get(sig)
        if kind == INSTANCE:
            base, _, fname = sig.rpartition(".")
            ref = self.statics.get(base)
            if ref is None:
                fields = self.objects.get(("static", base), {})
                return fields.get(fname)
            if isinstance(ref, NewObj):
                return self.objects.get(("new", ref.site), {}).get(fname, Lit(0))
            if isinstance(ref, Sym) and ref.kind == STATIC:
                fields = self.objects.get(("static", ref.sig), {})
                if fname in fields:
                    return fields[fname]
                return Sym(INSTANCE, f"{ref.sig}.{fname}", 0, "int")
            return Lit(0)
        if kind == INPUT and sig.startswith("text:"):
            return self.texts.get(sig[5:])
        return None

    def written(self) -> list[tuple]:
        """Pre-state keys of every location this state may have changed, sorted."""
        keys = set()
        for sig in self.statics:
            keys.add((STATIC, sig, 0))
        bases = set(self.statics)
        bases.update(s for kind, s in self.objects if kind == "static")
        for base in bases:
            ref = self.statics.get(base)
            if ref is None:
                obj = ("static", base)
            elif isinstance(ref, NewObj):
                obj = ("new", ref.site)
            elif isinstance(ref, Sym) and ref.kind == STATIC:
                obj = ("static", ref.sig)
            else:
                continue
            for fname in self.objects.get(obj, {}):
                keys.add((INSTANCE, f"{base}.{fname}", 0))
        for k in self.texts:
            keys.add((INPUT, f"text:{k}", 0))
        return sorted(keys, key=lambda k: (k[0], k[1]))

    def to_text(self) -> list[str]:
        out = []
        for key in self.written():
            loc = Sym(key[0], key[1], 0)
            out.append(f"(= {to_sexpr(loc)} {to_sexpr(self.resolve(key))})")
        for eff in self.effects:
            out.append("(" + " ".join([eff[0]] + [to_sexpr(a) for a in eff[1:]]) + ")")
        return out


@dataclass
class PathConstraint:
    conjuncts: list = field(default_factory=list)

    @property
    def expr(self) -> SymExpr:
        return conj(self.conjuncts)

    def add(self, c: SymExpr) -> None:
        c = simplify(c)
        if c == TRUE:
            return
        self.conjuncts.append(c)

    def to_sexpr(self) -> str:
        if not self.conjuncts:
            return "true"
        return to_sexpr(self.expr)


class _Frame:
    __slots__ = ("sig", "regs", "last", "site")

    def __init__(self, sig: str, regs: dict, site=None):
        self.sig = sig
        self.regs = regs
        self.last = None
        self.site = site  # (caller sig, call index) or None for the root


def sym_execute(
    s0: SymState,
    p: Path,
    app: App,
    *,
    activity: str | None = None,
    params: list | None = None,
    symbolic_extras: bool = False,
) -> tuple[SymState, PathConstraint]:
    """Interpret ``p`` from ``s0``; handler parameters are concrete (``params``)."""
    st = s0.copy()
    pc = PathConstraint()
    if p.is_empty:
        return st, pc
    stmts = p.statements
    if stmts[0] != (p.method, 0):
        raise IntegrityError(f"path does not start at {p.method}:0")
    root = app.methods.get(p.method)
    if root is None:
        raise IntegrityError(f"path root {p.method} is not a method")
    regs = {}
    for i, v in enumerate((params or [])[: root.param_count]):
        regs[i] = v
    frames = [_Frame(p.method, regs)]
    allocs = 0
    n = len(stmts)
    for k, (sig, idx) in enumerate(stmts):
        fr = frames[-1]
        if sig != fr.sig:
            raise IntegrityError(f"statement {sig}:{idx} outside current frame {fr.sig}")
        m = app.methods[sig]
        if not 0 <= idx < len(m.body):
            raise IntegrityError(f"statement {sig}:{idx} out of range")
        ins = m.body[idx]
        nxt = stmts[k + 1] if k + 1 < n else None
        op, a = ins.op, ins.args
        r = fr.regs

        def rd(reg):
            if reg not in r:
                raise Unsupported(f"read of uninitialized register v{reg} in {sig}:{idx}")
            return r[reg]

        expect = (sig, idx + 1)
        if op == "const":
            r[a[0]] = Lit(a[1])
        elif op == "move":
            r[a[0]] = rd(a[1])
        elif op == "binop":
            r[a[1]] = simplify(BinOp(a[0], rd(a[2]), rd(a[3])))
        elif op in ("if", "ifz"):
            cond = BinOp(a[0], rd(a[1]), rd(a[2]) if op == "if" else Lit(0))
            target = ins.target
            if nxt is None:
                raise IntegrityError(f"path ends at branch {sig}:{idx}")
            if target != idx + 1:
                if nxt == (sig, target):
                    pc.add(cond)
                elif nxt == (sig, idx + 1):
                    pc.add(negate(cond))
            expect = nxt
        elif op == "goto":
            expect = (sig, ins.target)
        elif op == "sget":
            r[a[0]] = st.static(a[1], app)
        elif op == "sput":
            st.statics[a[1]] = rd(a[0])
        elif op in ("iget", "iput", "aget", "aput"):
            obj = _object_key(rd(a[1]), f"{sig}:{idx}")
            if op in ("iget", "iput"):
                fname = a[2]
            else:
                index = rd(a[2])
                if not (isinstance(index, Lit) and type(index.value) is int):
                    raise Unsupported(f"symbolic array index at {sig}:{idx}")
                fname = f"[{index.value}]"
            fields = st.objects.setdefault(obj, {})
            if op in ("iput", "aput"):
                fields[fname] = rd(a[0])
            elif fname in fields:
                r[a[0]] = fields[fname]
            elif obj[0] == "new":
                r[a[0]] = Lit(0)
            else:
                r[a[0]] = Sym(INSTANCE, f"{obj[1]}.{fname}", 0, "int")
        elif op == "new":
            r[a[0]] = NewObj(f"{a[1]}@{sig}:{idx}#{allocs}")
            st.objects[("new", r[a[0]].site)] = {}
            allocs += 1
        elif op == "invoke":
            callee = app.methods[a[0]]
            if nxt != (a[0], 0):
                raise Unsupported(f"call to {a[0]} at {sig}:{idx} is not expanded on this path")
            args = [rd(x) for x in a[1]]
            frames.append(_Frame(a[0], dict(enumerate(args[: callee.param_count])), (sig, idx)))
            expect = nxt
        elif op == "move_result":
            if fr.last is None:
                raise Unsupported(f"move_result without a value at {sig}:{idx}")
            r[a[0]] = fr.last
        elif op == "api":
            ctx = ApiContext(st, activity, symbolic_extras, f"{sig}:{idx}")
            fr.last = apply_api(a[0], [rd(x) for x in a[1]], ctx)
        elif op == "return":
            value = rd(a[0]) if a[0] is not None else None
            frames.pop()
            if not frames:
                if nxt is not None:
                    raise IntegrityError("path continues after the root returns")
                return st, pc
            caller_sig, site = fr.site
            frames[-1].last = value
            expect = (caller_sig, site + 1)
        else:  # pragma: no cover - every opcode is handled above
            raise Unsupported(f"instruction {op}")
        if nxt is None:
            raise IntegrityError(f"path ends before {p.method} returns")
        if nxt != expect:
            raise IntegrityError(f"path step {sig}:{idx} -> {nxt[0]}:{nxt[1]} is not a graph edge")
    raise IntegrityError("path ended without returning")  # pragma: no cover


def _object_key(ref: SymExpr, where: str) -> tuple:
    if isinstance(ref, NewObj):
        return ("new", ref.site)
    if isinstance(ref, Sym) and ref.kind == STATIC:
        return ("static", ref.sig)
    raise Unsupported(f"object access through {to_sexpr(ref)} at {where}")


def _activity_of_callback(app: App, sig: str) -> str | None:
    for act in app.activities:
        for _, s in act.lifecycle:
            if s == sig:
                return act.id
    return None


def summary_effects(summary, app: App) -> tuple[SymState, PathConstraint]:
    """Symbolic state and constraint for one event summary, memoized on it.

    Covers the text a text-input event stores, the primary handler path and
    (for concrete summaries) the lifecycle callback paths that followed.
    Errors are cached too, so an unsupported summary fails fast next time.
    """
    cached = getattr(summary, "_effects", None)
    if cached is not None:
        if isinstance(cached, Exception):
            raise cached
        return cached
    try:
        result = _summary_effects(summary, app)
    except (Unsupported, IntegrityError) as exc:
        summary._effects = exc
        raise
    summary._effects = result
    return result


def _summary_effects(summary, app: App):
    ev: Event = summary.event
    st = SymState()
    activity = summary.activity
    if ev.kind == "text-input":
        st.texts[f"{activity}.{ev.target}"] = Sym(INPUT, f"payload:{ev.target}", 0, "str")
    pc = PathConstraint()
    if not summary.path.is_empty:
        if ev.is_entry:
            params, extras, act = [], True, ev.target
        elif ev.kind == "dynamic-broadcast":
            params, extras, act = [Lit(ev.target)], True, activity
        else:
            params, extras, act = [Lit(ev.target)], False, activity
        st, pc = sym_execute(
            st, summary.path, app, activity=act, params=params, symbolic_extras=extras
        )
    for cb in summary.callbacks:
        cb_act = _activity_of_callback(app, cb.method) or activity
        st, cpc = sym_execute(st, cb, app, activity=cb_act)
        for c in cpc.conjuncts:
            pc.add(c)
    return st, pc


def constraint_of_summary(summary, app: App) -> tuple[SymState, PathConstraint]:
    return summary_effects(summary, app)
