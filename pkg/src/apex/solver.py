"""Constraint solving over event summaries.

``decide`` is a bounded decision procedure for the small constraints path
conditions produce. ``solve_summary`` turns a symbolic summary into event
sequences: it looks for concrete summaries whose symbolic post-state makes
the target's path constraint true, chains backwards while pre-state
symbols remain, and routes the chain through the GUI model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

from apex.apimodels import MODELS as API_MODELS  # noqa: F401  (re-export)
from apex.apimodels import API_MODELS_VERSION  # noqa: F401
from apex.appir import App, Event
from apex.errors import IntegrityError, NoModelPath, Unsupported
from apex.expr import (
    API_RETURN,
    FALSE,
    INPUT,
    INSTANCE,
    STATIC,
    TRUE,
    BinOp,
    EvalError,
    Lit,
    StrOp,
    Sym,
    SymExpr,
    conj,
    evaluate,
    rebuild,
    simplify,
    symbols,
    to_sexpr,
    walk,
)
from apex.gui_model import GuiModel, bridge, find_route
from apex.symexec import PathConstraint, summary_effects

log = logging.getLogger(__name__)

SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"

DEFAULT_DOMAIN_BOUND = 64
DEFAULT_RECURSION_BOUND = 3
DEFAULT_K_MAX = 16
DEFAULT_STR_LEN = 16
# Above this many strings per variable the exhaustive string fallback is skipped.
STRING_FALLBACK_LIMIT = 20_000
FRESH_CHARS = "zyxwvutsrq"


@dataclass
class SolveResult:
    status: str
    assignment: dict = field(default_factory=dict)  # symbol key -> value
    reason: str = ""
    residual: SymExpr | None = None
    pending: tuple = ()  # pre-state location symbols left in the residual

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    def assignment_text(self) -> dict:
        out = {}
        for (kind, sig, gen), v in sorted(self.assignment.items()):
            out[f"{kind} {sig}" + (f"@{gen}" if gen else "")] = v
        return out


# -- decision procedure --


def _conjuncts(e: SymExpr) -> list[SymExpr]:
    if isinstance(e, BinOp) and e.op == "and":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _holds(c: SymExpr, env: dict) -> bool:
    try:
        return evaluate(c, env) is True
    except EvalError:
        return False


def _infer_sort(sym: Sym, e: SymExpr) -> str:
    if sym.sort in ("bool", "str", "obj"):
        return sym.sort
    for node in walk(e):
        if isinstance(node, StrOp) and any(
            isinstance(a, Sym) and a.key == sym.key for a in node.args
        ):
            return "str"
        if isinstance(node, BinOp) and node.op in ("==", "!="):
            pair = (node.left, node.right)
            for a, b in (pair, pair[::-1]):
                if isinstance(a, Sym) and a.key == sym.key:
                    if isinstance(b, Lit) and isinstance(b.value, str):
                        return "str"
    return "int"


def _string_literals(e: SymExpr) -> list[str]:
    return sorted(
        {n.value for n in walk(e) if isinstance(n, Lit) and isinstance(n.value, str)}
    )


def _fresh_chars(lits: list[str], n: int) -> list[str]:
    used = set("".join(lits))
    return [c for c in FRESH_CHARS if c not in used][:n]


def string_candidates(lits: list[str], str_len_bound: int) -> list[str]:
    """Constructive candidates: literals, their prefixes/suffixes, literals padded
    with a fresh char, runs of one char."""
    out: list[str] = [""]
    seen = {""}

    def add(s):
        if len(s) <= str_len_bound and s not in seen:
            seen.add(s)
            out.append(s)

    for lit in lits:
        add(lit)
    for lit in lits:
        for i in range(1, len(lit)):
            add(lit[:i])
            add(lit[i:])
    for lit in lits:
        for f in _fresh_chars(lits, 2):
            add(lit + f)
            add(f + lit)
    chars = sorted(set("".join(lits)))
    for k in range(1, str_len_bound + 1):
        for c in _fresh_chars(lits, 2) + chars:
            add(c * k)
    return out


def _all_strings(alphabet: list[str], max_len: int):
    for n in range(max_len + 1):
        for t in product(alphabet, repeat=n):
            yield "".join(t)


def _string_space(lits: list[str], str_len_bound: int) -> tuple[list[str], int]:
    alphabet = sorted(set("".join(lits))) + _fresh_chars(lits, 2)
    total = sum(len(alphabet) ** n for n in range(str_len_bound + 1))
    return alphabet, total


_DEFAULTS = {"int": 0, "bool": False, "str": ""}


def decide(
    c,
    domain_bound: int = DEFAULT_DOMAIN_BOUND,
    str_len_bound: int = DEFAULT_STR_LEN,
) -> SolveResult:
    """Decide a conjunction over a bounded domain.

    Integers range over [-domain_bound, domain_bound] (ascending scan), booleans
    over {false, true}, strings over constructive candidates first and then,
    when small enough, every string of length <= str_len_bound over the
    literal characters plus two fresh ones. Conjuncts mentioning an
    unmodeled API result make the answer UNKNOWN unless the rest is UNSAT.
    """
    e = c.expr if isinstance(c, PathConstraint) else c
    original = e
    e = simplify(e)
    parts = [p for p in _conjuncts(e) if p != TRUE]
    if any(p == FALSE for p in parts):
        return SolveResult(UNSAT, residual=e)
    opaque = [p for p in parts if any(s.kind == API_RETURN for s in symbols(p))]
    rest = [p for p in parts if p not in opaque]
    res = _search(rest, domain_bound, str_len_bound)
    res.residual = e
    if res.status == SAT:
        # Symbols simplified away are unconstrained; keep the assignment total.
        for s in symbols(original):
            if s.key not in res.assignment:
                res.assignment[s.key] = _DEFAULTS.get(_infer_sort(s, original), 0)
    if opaque and res.status != UNSAT:
        return SolveResult(UNKNOWN, reason=f"unmodeled api: {to_sexpr(opaque[0])}", residual=e)
    return res


def _search(parts: list[SymExpr], domain_bound: int, str_len_bound: int) -> SolveResult:
    whole = conj(parts)
    syms = sorted(symbols(whole), key=lambda s: s.key)
    sorts = {s.key: _infer_sort(s, whole) for s in syms}
    if any(sorts[s.key] == "obj" for s in syms):
        bad = next(s for s in syms if sorts[s.key] == "obj")
        return SolveResult(UNKNOWN, reason=f"object-valued symbol {to_sexpr(bad)}")
    keys = [s.key for s in syms]
    # Each conjunct is checked as soon as its last symbol is assigned.
    check_at: dict = {k: [] for k in keys}
    ground = []
    for p in parts:
        ps = [s.key for s in symbols(p)]
        if not ps:
            ground.append(p)
        else:
            last = max(ps, key=keys.index)
            check_at[last].append(p)
    if not all(_holds(p, {}) for p in ground):
        return SolveResult(UNSAT)
    lits = _string_literals(whole)
    unary = {k: [p for p in parts if [s.key for s in symbols(p)] == [k]] for k in keys}

    def domain(k, exhaustive):
        sort = sorts[k]
        if sort == "bool":
            vals = [False, True]
        elif sort == "str":
            if exhaustive:
                alphabet, _ = _string_space(lits, str_len_bound)
                vals = _all_strings(alphabet, str_len_bound)
            else:
                vals = string_candidates(lits, str_len_bound)
        else:
            vals = range(-domain_bound, domain_bound + 1)
        return [v for v in vals if all(_holds(p, {k: v}) for p in unary[k])]

    def run(exhaustive):
        doms = [domain(k, exhaustive) for k in keys]
        env: dict = {}

        def bt(i):
            if i == len(keys):
                return True
            k = keys[i]
            for v in doms[i]:
                env[k] = v
                if all(_holds(p, env) for p in check_at[k]):
                    if bt(i + 1):
                        return True
            env.pop(k, None)
            return False

        return dict(env) if bt(0) else None

    found = run(False)
    if found is not None:
        return SolveResult(SAT, found)
    if any(sorts[k] == "str" for k in keys):
        _, total = _string_space(lits, str_len_bound)
        if total > STRING_FALLBACK_LIMIT:
            return SolveResult(UNKNOWN, reason="string search space exceeds the bound")
        found = run(True)
        if found is not None:
            return SolveResult(SAT, found)
    return SolveResult(UNSAT)


# -- composing summaries --


def _is_location(s: Sym) -> bool:
    return s.gen == 0 and (
        s.kind in (STATIC, INSTANCE) or (s.kind == INPUT and s.sig.startswith("text:"))
    )


def _is_event_local(s: Sym) -> bool:
    return s.is_param or s.kind == API_RETURN


def shift_event_symbols(e: SymExpr, by: int = 1) -> SymExpr:
    """Push event parameters and API results one event later in the chain."""

    def fn(node):
        if isinstance(node, Sym) and _is_event_local(node):
            return Sym(node.kind, node.sig, node.gen + by, node.sort)
        return None

    return rebuild(e, fn)


def substitute_post(e: SymExpr, state) -> SymExpr:
    def fn(node):
        if isinstance(node, Sym) and _is_location(node):
            return state.resolve(node.key)
        return None

    return rebuild(e, fn)


def compose(s, goal: SymExpr, app: App) -> SymExpr:
    """The condition before ``s`` under which running ``s`` leaves ``goal`` true."""
    st, pc = summary_effects(s, app)
    g = substitute_post(shift_event_symbols(goal), st)
    return simplify(conj([pc.expr, g]))


def writes_any(s, goal: SymExpr, app: App) -> bool:
    try:
        st, _ = summary_effects(s, app)
    except (Unsupported, IntegrityError):
        return False
    for sym in symbols(goal):
        if _is_location(sym):
            v = st.resolve(sym.key)
            if v is not None and v != sym:
                return True
    return False


def boot_env(app: App, e: SymExpr) -> dict:
    """Concrete values of ``e``'s location symbols right after a fresh start."""
    env = {}
    for s in symbols(e):
        if not _is_location(s):
            continue
        if s.kind == STATIC:
            v = app.static_default(s.sig)
            if v is not None:
                env[s.key] = v
        elif s.kind == INSTANCE:
            env[s.key] = 0
        else:
            env[s.key] = ""
    return env


def close(e: SymExpr, env: dict) -> SymExpr:
    def fn(node):
        if isinstance(node, Sym) and node.key in env:
            return Lit(env[node.key])
        return None

    return simplify(rebuild(e, fn))


def pending_locations(e: SymExpr) -> tuple:
    return tuple(s for s in symbols(e) if _is_location(s))


def satisfies(s, c, app: App, pre_env: dict | str | None = None, **kw) -> SolveResult:
    """Does running ``s`` establish ``c``?

    ``c``'s location symbols are replaced by ``s``'s post-state; the result
    is conjoined with ``s``'s own path constraint. Pre-state symbols that
    remain are reported in ``pending``; with ``pre_env`` ("boot" or a dict of
    symbol key -> value) they are fixed before deciding.
    """
    goal = c.expr if isinstance(c, PathConstraint) else c
    residual = compose(s, goal, app)
    pending = pending_locations(residual)
    if pre_env == "boot":
        pre_env = boot_env(app, residual)
    if pre_env:
        residual = close(residual, pre_env)
    res = decide(residual, **kw)
    res.residual = residual
    res.pending = pending
    log.debug("satisfies %s -> %s: %s", s.label(), res.status, to_sexpr(residual))
    return res


def repetition_expand(s, residual, k_max: int, app: App, env: dict | None = None) -> int | None:
    """Smallest k <= k_max such that k runs of self-loop ``s`` make ``residual`` true.

    Only affine effects (x -> x + c) on the constrained locations qualify.
    ``env`` defaults to the values after a fresh start.
    """
    goal = residual.expr if isinstance(residual, PathConstraint) else residual
    st, _ = summary_effects(s, app)
    for sym in pending_locations(goal):
        v = st.resolve(sym.key)
        if v is not None and not _affine_in(v, sym):
            return None
    g = goal
    for k in range(k_max + 1):
        if k:
            g = compose(s, g, app)
            if g == FALSE:
                return None
        closed = close(g, env if env is not None else boot_env(app, g))
        if decide(closed).is_sat:
            return k
    return None


def _affine_in(v: SymExpr, sym: Sym) -> bool:
    v = simplify(v)
    if v == sym:
        return True
    return (
        isinstance(v, BinOp)
        and v.op in ("+", "-")
        and v.left == sym
        and isinstance(v.right, Lit)
        and type(v.right.value) is int
    )


# -- sequence search --


@dataclass
class SolverConfig:
    domain_bound: int = DEFAULT_DOMAIN_BOUND
    recursion_bound: int = DEFAULT_RECURSION_BOUND
    k_max: int = DEFAULT_K_MAX
    str_len_bound: int = DEFAULT_STR_LEN


@dataclass
class SolveOutcome:
    sequences: list
    reasons: list  # why candidate branches failed (UNKNOWN reasons first)


def _fill(events: list[Event], assignment: dict) -> list[Event]:
    out = []
    for i, ev in enumerate(events):
        if ev.kind == "text-input":
            key = (INPUT, f"payload:{ev.target}", i)
            if key in assignment:
                ev = ev.with_payload(str(assignment[key]))
        elif ev.is_entry or ev.kind == "dynamic-broadcast":
            extras = ev.extras()
            changed = False
            for (kind, sig, gen), v in assignment.items():
                if kind == INPUT and gen == i and sig.startswith("extra:"):
                    extras[sig[6:]] = str(v)
                    changed = True
            if changed:
                ev = ev.with_payload(dict(sorted(extras.items())))
        out.append(ev)
    return out


class _Search:
    def __init__(self, m: GuiModel, app: App, cfg: SolverConfig):
        self.m = m
        self.app = app
        self.cfg = cfg
        self.reasons: list[str] = []
        self.routes: dict = {}

    def decide(self, e):
        res = decide(e, self.cfg.domain_bound, self.cfg.str_len_bound)
        if res.status == UNKNOWN:
            self.reasons.append(res.reason)
        return res

    def compose(self, s, goal):
        try:
            return compose(s, goal, self.app)
        except (Unsupported, IntegrityError) as exc:
            self.reasons.append(str(exc))
            return FALSE

    def route(self, state):
        if state not in self.routes:
            try:
                ts = find_route(self.m, state)
                self.routes[state] = [self.m.summaries[t[1]] for t in ts]
            except NoModelPath:
                self.routes[state] = None
        return self.routes[state]

    def base(self, goal, state, chain) -> list[Event] | None:
        """Close ``goal`` at ``state`` by routing there from a fresh start."""
        if state is None:
            route = []
        else:
            route = self.route(state)
            if route is None:
                return None
        g = goal
        for s in reversed(route):
            g = self.compose(s, g)
            if g == FALSE:
                return None
        g = close(g, boot_env(self.app, g))
        res = self.decide(g)
        log.debug("base %s at %s -> %s", to_sexpr(g), state, res.status)
        if not res.is_sat:
            return None
        events = [s.event for s in route] + [s.event for s in chain]
        return _fill(events, res.assignment)

    def run(self, sigma) -> list[list[Event]]:
        try:
            _, pc = summary_effects(sigma, self.app)
        except (Unsupported, IntegrityError) as exc:
            self.reasons.append(str(exc))
            return []
        found: list = []
        frontier = [(pc.expr, sigma.src, [sigma])]
        seen = set()
        for depth in range(self.cfg.recursion_bound + 1):
            nxt = []
            for goal, state, chain in frontier:
                seq = self.base(goal, state, chain)
                if seq is not None:
                    found.append(seq)
                    continue
                if depth == self.cfg.recursion_bound or state is None:
                    continue
                for child in self.expand(goal, state, chain):
                    key = (to_sexpr(child[0]), child[1], tuple(s.id for s in child[2]))
                    if key in seen:
                        continue
                    seen.add(key)
                    if child[3]:
                        found.append(child[3])
                    else:
                        nxt.append(child[:3])
            if found:
                break
            frontier = nxt
        uniq = {}
        for seq in found:
            uniq.setdefault(tuple(e.text() for e in seq), seq)
        return [uniq[k] for k in sorted(uniq, key=lambda k: (len(k), k))]

    def expand(self, goal, state, chain):
        """Children (goal', state', chain', solved-sequence-or-None)."""
        m, app = self.m, self.app
        for s in m.concrete():
            if not writes_any(s, goal, app):
                continue
            for src, _, dst in m.transitions_of(s.id):
                br = bridge(m, dst, state)
                if br is None:
                    continue
                g = goal
                for b in reversed(br):
                    g = self.compose(b, g)
                g1 = self.compose(s, g)
                if g1 == FALSE:
                    continue
                new_chain = [s] + br + chain
                if src is None:
                    seq = self.base(g1, None, new_chain)
                    if seq is not None:
                        yield (g1, None, new_chain, seq)
                    continue
                if src == dst == state and not br:
                    # A self-loop: try repeating it before chaining further.
                    gk, k = g1, 1
                    while k <= self.cfg.k_max:
                        seq = self.base(gk, state, [s] * k + chain)
                        if seq is not None:
                            yield (gk, state, [s] * k + chain, seq)
                            break
                        k += 1
                        gk = self.compose(s, gk)
                        if gk == FALSE:
                            break
                yield (g1, src, new_chain, None)


def solve_summary(
    m: GuiModel,
    sigma,
    app: App,
    recursion_bound: int = DEFAULT_RECURSION_BOUND,
    domain_bound: int = DEFAULT_DOMAIN_BOUND,
    k_max: int = DEFAULT_K_MAX,
    str_len_bound: int = DEFAULT_STR_LEN,
    reasons: list | None = None,
) -> list[list[Event]]:
    """Candidate event sequences expected to drive execution down ``sigma``'s path.

    Shortest first, then by event text; empty when nothing satisfies the
    constraint within the recursion bound.
    """
    cfg = SolverConfig(domain_bound, recursion_bound, k_max, str_len_bound)
    search = _Search(m, app, cfg)
    out = search.run(sigma)
    if reasons is not None:
        reasons.extend(search.reasons)
    log.debug("solve %s: %d candidate(s)", sigma.label(), len(out))
    return out
