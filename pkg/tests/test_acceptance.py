"""Acceptance criteria 1-9, one test each.

Every test records a PASS/FAIL line that conftest prints in the terminal
summary. Run directly with ``python3 tests/test_acceptance.py`` or through
pytest.
"""

from __future__ import annotations

import copy
import itertools
import os
import random
import subprocess
import sys
import time
from pathlib import Path as FsPath

import pytest

from conftest import ACCEPTANCE, CORPUS, corpus_app, corpus_targets, explored
from apex.appir import Event, entry_events
from apex.baseline import run_random
from apex.explorer import (
    Budget,
    QueueLEntry,
    SequenceCandidate,
    SequenceQueue,
    SummaryQueue,
    coverage,
    covered_statements,
    penalize,
    priority_event_seq,
    priority_summary,
    run_explorer,
)
from apex.expr import INPUT, STATIC, BinOp, Lit, Not, StrOp, Sym
from apex.gui_model import EventSummary
from apex.harness import check_model
from apex.ipcfg import Path
from apex.runtime import new_state, random_text, apply_event
from apex.solver import SAT, UNSAT, decide
from apex.appir import parse_app


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    assert ok, detail


# -- 1: two-branch precision --


def test_criterion_1_two_branch_precision():
    app = corpus_app("fig1")
    t0 = time.monotonic()
    ex = run_explorer(app)
    elapsed = time.monotonic() - t0
    m = ex.model
    launch_dst = {dst for src, sid, dst in m.transitions if src is None}
    assert len(launch_dst) == 1
    init = launch_dst.pop()
    outs = {}
    for src, sid, dst in m.transitions:
        s = m.summaries[sid]
        if src == init and s.event.descriptor == ("tap", "e1"):
            outs[s.path.root_indices()] = m.states[dst].activity
    expected = {(0, 1, 2, 3, 4, 5, 6, 11): "A2", (0, 1, 7, 8, 9, 10, 11): "A3"}
    # The branch the initial heap does not take must come from a solver sequence.
    via_solver = [
        r for r in ex.history.records
        if r.kind == "complete" and r.dst is not None and m.states[r.dst].activity == "A2"
    ]
    ok = outs == expected and elapsed < 5.0 and len(m.states) == 3 and bool(via_solver)
    record(1, ok, f"e1 transitions {sorted(outs.items())}, {len(m.states)} states, {elapsed:.2f}s")


# -- 2: guarded targets --


def test_criterion_2_guarded_targets():
    app = corpus_app("dragon")
    targets = corpus_targets("dragon")
    t0 = time.monotonic()
    ex = run_explorer(app, targets, Budget())
    elapsed = time.monotonic() - t0
    best = ex.history.best_witness
    replay_ok = True
    for t, seq_text in best.items():
        from apex.appir import parse_event

        st = new_state(app, 42)
        blocks = set()
        for line in seq_text:
            blocks.update(apply_event(st, parse_event(line)).log.blocks())
        replay_ok &= t in covered_statements(app, blocks)
    lengths = [len(best[t]) for t in targets if t in best]
    hit = len(lengths)
    ok = hit == 5 and max(lengths) <= 6 and replay_ok and elapsed < 60.0
    record(2, ok, f"targets {hit}/5, max witness {max(lengths, default=0)}, {elapsed:.2f}s")


# -- 3: brute-force oracle --

ORACLE_DEPTH = 4


def _oracle_pairs(st) -> frozenset:
    """(event descriptor, handler) pairs of the foreground GUI, computed from raw state."""
    out = set()
    if st.stack:
        inst = st.stack[-1]
        for wid, kind, bindings in inst.widgets:
            if "click" in bindings:
                out.add((("tap", wid), bindings["click"]))
            if "longclick" in bindings:
                out.add((("long-tap", wid), bindings["longclick"]))
            if kind == "textfield":
                out.add((("text-input", wid), bindings.get("text", "ui.setText")))
    for action, sig in st.receivers:
        out.add((("dynamic-broadcast", action), sig))
    return frozenset(out)


def _oracle_alphabet(app, seed: int) -> list[Event]:
    lits = app.string_literals()
    events = list(entry_events(app))
    for act in app.activities:
        for w in act.layout.widgets:
            events.append(Event("tap", w.id))
            events.append(Event("long-tap", w.id))
            if w.kind == "textfield":
                for text in sorted(set(lits) | {random_text(seed, act.id, w.id)}):
                    events.append(Event("text-input", w.id, None, text))
    for lit in lits:
        events.append(Event("dynamic-broadcast", lit, None, {}))
    return events


def _projection(log) -> tuple:
    return tuple(
        (root, tuple((e.sig, e.arg) for e in seg if e.kind == "B")) for root, seg in log.segments()
    )


def brute_force(app, seed: int = 42, depth: int = ORACLE_DEPTH):
    """All (src pairs, descriptor, block projection, dst pairs) reachable in <= depth events."""
    from apex.errors import EventNotEnabled

    alphabet = _oracle_alphabet(app, seed)
    transitions = set()
    states = set()
    frontier = [new_state(app, seed)]
    for _ in range(depth):
        nxt = []
        for st in frontier:
            src = _oracle_pairs(st) if st.stack else None
            for e in alphabet:
                s2 = copy.deepcopy(st)
                try:
                    res = apply_event(s2, e)
                except EventNotEnabled:
                    continue
                if res.crash:
                    continue
                dst = _oracle_pairs(s2)
                states.add(dst)
                transitions.add((None if e.is_entry else src, e.descriptor, _projection(res.log), dst))
                nxt.append(s2)
        frontier = nxt
    return states, transitions


def model_transitions(ex, app) -> set:
    m = ex.model
    out = set()
    for src, sid, dst in m.transitions:
        s = m.summaries[sid]
        proj = []
        if s.handler:
            proj.append((s.handler, s.path.block_entries(app)))
        proj.extend((cb.method, cb.block_entries(app)) for cb in s.callbacks)
        src_pairs = m.states[src].pairs if src is not None else None
        out.add((src_pairs, s.event.descriptor, tuple(proj), m.states[dst].pairs))
    return out


def test_criterion_3_brute_force_oracle():
    checked = []
    ok = True
    for name in CORPUS:
        app = corpus_app(name)
        states, oracle = brute_force(app)
        if len(states) > 4:
            continue
        mine = model_transitions(explored(name), app)
        checked.append(f"{name}({len(oracle)})")
        if mine != oracle:
            ok = False
            checked[-1] += f" missing={len(oracle - mine)} extra={len(mine - oracle)}"
    ok = ok and len(checked) >= 3
    record(3, ok, "exact transition sets on " + ", ".join(checked))


# -- 4: concolic soundness --


def test_criterion_4_concolic_soundness():
    total = 0
    bad = []
    for name in CORPUS:
        app = corpus_app(name)
        for r in check_model(explored(name).model, app):
            total += 1
            if not r.ok:
                bad.append(f"{name}:{r.summary_id}:{r.reason}")
    record(4, total > 0 and not bad, f"{total - len(bad)}/{total} concrete summaries sound {bad[:3]}")


# -- 5: guided vs random --

GUARDED = ("dragon", "login")


def test_criterion_5_guided_beats_random():
    worst_gap = {}
    ok = True
    for name in CORPUS:
        app = corpus_app(name)
        for seed in range(1, 6):
            ex = run_explorer(app, corpus_targets(name), Budget(seed=seed))
            guided = coverage(ex.history, app).ratio
            rnd = run_random(app, ex.events_applied, seed).report.ratio
            gap = 100.0 * (guided - rnd)
            worst_gap[name] = min(worst_gap.get(name, gap), gap)
            if guided < rnd or (name in GUARDED and gap < 10.0):
                ok = False
    detail = ", ".join(f"{n} min gap {g:.1f}pp" for n, g in sorted(worst_gap.items()))
    record(5, ok, detail)


# -- 6: solver vs exhaustive enumeration --

DOMAIN = 4
STR_LEN = 3
STR_POOL = ("", "a", "ab", "ba", "abc", "cab")


def _ev(e, env):
    """Reference evaluator; independent of the solver and the expression module."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Sym):
        return env[e.sig]
    if isinstance(e, Not):
        return not _ev(e.child, env)
    if isinstance(e, StrOp):
        vals = [_ev(a, env) for a in e.args]
        if e.op == "equals":
            return vals[0] == vals[1]
        if e.op == "length":
            return len(vals[0])
        return vals[0] + vals[1]
    a, b = _ev(e.left, env), _ev(e.right, env)
    return {
        "and": lambda: a and b,
        "+": lambda: a + b,
        "-": lambda: a - b,
        "*": lambda: a * b,
        "==": lambda: a == b,
        "!=": lambda: a != b,
        "<": lambda: a < b,
        "<=": lambda: a <= b,
        ">": lambda: a > b,
        ">=": lambda: a >= b,
    }[e.op]()


X = Sym(STATIC, "C.x", 0, "int")
Y = Sym(STATIC, "C.y", 0, "int")
B = Sym(STATIC, "C.b", 0, "bool")
S = Sym(INPUT, "payload:s", 0, "str")


def _int_term(rng, vars_):
    r = rng.random()
    v = rng.choice(vars_)
    if r < 0.4:
        return v
    if r < 0.55:
        return Lit(rng.randint(-6, 6))
    op = rng.choice("+-*")
    if op == "*":
        return BinOp("*", Lit(rng.randint(-2, 3)), v)
    return BinOp(op, v, rng.choice([Lit(rng.randint(-3, 3)), rng.choice(vars_)]))


def _atom(rng, theme):
    cmp = rng.choice(["==", "!=", "<", "<=", ">", ">="])
    if theme == "int" or (theme == "mixed" and rng.random() < 0.5):
        vs = [X, Y] if theme == "int" else [X]
        return BinOp(cmp, _int_term(rng, vs), _int_term(rng, vs))
    if theme == "mixed":
        return B if rng.random() < 0.5 else Not(B)
    r = rng.random()
    lit = Lit(rng.choice(STR_POOL))
    if r < 0.3:
        eq = StrOp("equals", (S, lit))
        return eq if rng.random() < 0.6 else Not(eq)
    if r < 0.6:
        return BinOp(cmp, StrOp("length", (S,)), Lit(rng.randint(0, 5)))
    if r < 0.8:
        return StrOp("equals", (StrOp("concat", (S, lit)), Lit(rng.choice(STR_POOL))))
    return BinOp(cmp, StrOp("length", (StrOp("concat", (S, S)),)), Lit(rng.randint(0, 7)))


def random_constraint(rng):
    theme = rng.choice(["int", "mixed", "str"])
    parts = [_atom(rng, theme) for _ in range(rng.randint(1, 3))]
    e = parts[0]
    for p in parts[1:]:
        e = BinOp("and", e, p)
    return e


def _syms(e, out):
    if isinstance(e, Sym):
        out[e.sig] = e
    for name in ("left", "right", "child"):
        if hasattr(e, name):
            _syms(getattr(e, name), out)
    for a in getattr(e, "args", ()):
        _syms(a, out)
    return out


def _lits(e, out):
    if isinstance(e, Lit) and isinstance(e.value, str):
        out.add(e.value)
    for name in ("left", "right", "child"):
        if hasattr(e, name):
            _lits(getattr(e, name), out)
    for a in getattr(e, "args", ()):
        _lits(a, out)
    return out


def exhaustive(e) -> bool:
    syms = _syms(e, {})
    chars = sorted(set("".join(_lits(e, set()))))
    alphabet = chars + [c for c in "#%&" if c not in chars][:2]
    strings = ["".join(t) for n in range(STR_LEN + 1) for t in itertools.product(alphabet, repeat=n)]
    doms = []
    for sig in sorted(syms):
        sort = syms[sig].sort
        doms.append([False, True] if sort == "bool" else strings if sort == "str" else range(-DOMAIN, DOMAIN + 1))
    names = sorted(syms)
    return any(_ev(e, dict(zip(names, vals))) is True for vals in itertools.product(*doms))


def test_criterion_6_solver_vs_enumeration():
    rng = random.Random(2024)
    mismatches = []
    unsound = []
    counts = {SAT: 0, UNSAT: 0}
    for i in range(1000):
        c = random_constraint(rng)
        res = decide(c, DOMAIN, STR_LEN)
        truth = exhaustive(c)
        if res.status not in counts or (res.status == SAT) != truth:
            mismatches.append(i)
            continue
        counts[res.status] += 1
        if res.status == SAT:
            env = {k[1]: v for k, v in res.assignment.items()}
            if _ev(c, env) is not True:
                unsound.append(i)
    ok = not mismatches and not unsound
    record(
        6,
        ok,
        f"{counts[SAT]} SAT / {counts[UNSAT]} UNSAT agree, {len(mismatches)} mismatches, {len(unsound)} unsound",
    )


# -- 7: priority rules --

PRIORITY_APP = """
APP prio
MANIFEST
main A
static A.f int 0
static A.g int 0
END
ACTIVITY A
widget t button click=A.onTarget
widget p button click=A.onPlain
widget s button click=A.onStart
widget w1 button click=A.onWrite1
widget w2 button click=A.onWrite2
widget w3 button click=A.onWrite3
END
ACTIVITY B
END
METHOD A.onTarget params=1 regs=2
const v1 1
sput v1 A.f
return
END
METHOD A.onPlain params=1 regs=2
const v1 1
return
END
METHOD A.onStart params=1 regs=2
const v1 "B"
api ui.startActivity v1
return
END
METHOD A.onWrite1 params=1 regs=2
const v1 1
sput v1 A.f
return
END
METHOD A.onWrite2 params=1 regs=2
const v1 1
sput v1 A.f
sput v1 A.g
return
END
METHOD A.onWrite3 params=1 regs=2
const v1 1
sput v1 A.f
sput v1 A.g
sput v1 A.f
return
END
"""


def _order_q(app, targets, cands):
    q = SequenceQueue()
    for i, c in enumerate(cands):
        c.insertion_index = i
        c.priority = priority_event_seq(c, targets, app)
        q.push(c)
    return [q.pop().handler for _ in cands]


def _summary(app, handler, wid):
    n = len(app.methods[handler].body)
    return EventSummary(Event("tap", wid), Path(handler, tuple((handler, i) for i in range(n))), "symbolic", "s0", "A", handler)


def _order_l(app, targets, handlers, iteration=1, penalized=()):
    lq = SummaryQueue()
    for i, (h, wid) in enumerate(handlers):
        s = _summary(app, h, wid)
        e = QueueLEntry(s, priority_summary(s, targets, app, i), 0, i)
        if h in penalized:
            penalize(e, 0, 3, 5)
        lq.push(e)
    out = []
    while True:
        e = lq.dequeue(iteration)
        if e is None:
            break
        out.append(e.summary.handler)
    return out


def test_criterion_7_priority_rules():
    app = parse_app(PRIORITY_APP)
    tgt = [("A.onTarget", 1)]
    checks = {}
    checks["partial beats complete"] = _order_q(
        app, [], [SequenceCandidate([Event("tap", "p")], "complete", handler="A.onPlain"),
                  SequenceCandidate([Event("tap", "p")], "partial", "s0", "A.onWrite1")]
    ) == ["A.onWrite1", "A.onPlain"]
    checks["target count"] = _order_q(
        app, tgt, [SequenceCandidate([Event("tap", "p")], "partial", "s0", "A.onPlain"),
                   SequenceCandidate([Event("tap", "t")], "partial", "s0", "A.onTarget")]
    ) == ["A.onTarget", "A.onPlain"]
    checks["gui transition code"] = _order_q(
        app, [], [SequenceCandidate([Event("tap", "p")], "partial", "s0", "A.onPlain"),
                  SequenceCandidate([Event("tap", "s")], "partial", "s0", "A.onStart")]
    ) == ["A.onStart", "A.onPlain"]
    checks["fifo tie"] = _order_q(
        app, [], [SequenceCandidate([Event("tap", "p")], "partial", "s0", "A.onPlain"),
                  SequenceCandidate([Event("tap", "w1")], "partial", "s0", "A.onWrite1")]
    ) == ["A.onPlain", "A.onWrite1"]
    checks["summary target on path"] = _order_l(
        app, tgt, [("A.onWrite3", "w3"), ("A.onTarget", "t")]
    ) == ["A.onTarget", "A.onWrite3"]
    checks["start beats writes"] = _order_l(
        app, [], [("A.onWrite3", "w3"), ("A.onStart", "s")]
    ) == ["A.onStart", "A.onWrite3"]
    checks["more writes first"] = _order_l(
        app, [], [("A.onWrite1", "w1"), ("A.onWrite2", "w2")]
    ) == ["A.onWrite2", "A.onWrite1"]
    checks["penalty skip window"] = (
        _order_l(app, [], [("A.onWrite2", "w2"), ("A.onWrite1", "w1")], 2, {"A.onWrite2"}) == ["A.onWrite1"]
        and _order_l(app, [], [("A.onWrite2", "w2"), ("A.onWrite1", "w1")], 3, {"A.onWrite2"})
        == ["A.onWrite2", "A.onWrite1"]
    )
    failed = [k for k, v in checks.items() if not v]
    record(7, not failed, f"{len(checks) - len(failed)}/{len(checks)} rules hold {failed}")


# -- 8: determinism --


def _corpus_run(out: FsPath, hashseed: str) -> None:
    env = dict(os.environ, PYTHONHASHSEED=hashseed)
    src = str(FsPath(__file__).resolve().parents[1] / "src")
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
    subprocess.run(
        [sys.executable, "-m", "apex", "corpus", "--out", str(out)],
        check=True, env=env, capture_output=True, timeout=600,
    )


def test_criterion_8_determinism(tmp_path):
    _corpus_run(tmp_path / "a", "1")
    _corpus_run(tmp_path / "b", "2024")
    differing = []
    compared = 0
    for name in CORPUS:
        for f in ("model.json", "report.json"):
            compared += 1
            if (tmp_path / "a" / name / f).read_bytes() != (tmp_path / "b" / name / f).read_bytes():
                differing.append(f"{name}/{f}")
    record(8, not differing, f"{compared - len(differing)}/{compared} files byte-identical {differing}")


# -- 9: termination --


def test_criterion_9_termination():
    times = {}
    ok = True
    for name in CORPUS:
        app = corpus_app(name)
        t0 = time.monotonic()
        ex = run_explorer(app, corpus_targets(name), Budget(max_seconds=None, max_events=None))
        times[name] = time.monotonic() - t0
        ok &= len(ex.q) == 0 and len(ex.l) == 0 and times[name] < 120.0
    record(9, ok, ", ".join(f"{n} {t:.2f}s" for n, t in sorted(times.items())))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
