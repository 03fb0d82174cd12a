"""Concolic soundness checks for concrete event summaries.

A concrete summary is replayed from a fresh start along its witness. The
final event must execute the recorded path again, its path constraint must
evaluate true under the concrete pre-state, and every location the symbolic
post-state writes must evaluate to the value the runtime produced.
"""

from __future__ import annotations

from dataclasses import dataclass

from apex.appir import UNMODELED_RESULTS, App
from apex.errors import EventNotEnabled, IntegrityError, Unsupported
from apex.expr import API_RETURN, INPUT, INSTANCE, STATIC, EvalError, NewObj, evaluate, symbols
from apex.ipcfg import DEFAULT_CALL_DEPTH, EMPTY_PATH, build_ipcfg, executed_path
from apex.apimodels import api_of_symbol
from apex.runtime import ObjRef, RuntimeState, apply_event, new_state, random_text
from apex.symexec import summary_effects


@dataclass
class ConcolicCheck:
    summary_id: str
    ok: bool
    reason: str = ""


def _fail(sid: str, reason: str) -> ConcolicCheck:
    return ConcolicCheck(sid, False, reason)


def _payload_text(st: RuntimeState, e) -> str:
    if isinstance(e.payload, str):
        return e.payload
    return random_text(st.rng_seed, st.current_activity, e.target)


def _instance_field(st: RuntimeState, base: str, fname: str):
    ref = st.static(base)
    if not isinstance(ref, ObjRef):
        raise EvalError(f"{base} does not hold an object")
    return st.heap.objects[ref.id].fields.get(fname, 0)


def _pre_env(st: RuntimeState, e, syms) -> dict:
    """Concrete pre-state values for every symbol of one summary."""
    env = {}
    top = st.stack[-1] if st.stack else None
    for s in syms:
        try:
            if s.kind == STATIC:
                env[s.key] = st.static(s.sig)
            elif s.kind == INSTANCE:
                base, _, fname = s.sig.rpartition(".")
                env[s.key] = _instance_field(st, base, fname)
            elif s.kind == API_RETURN:
                env[s.key] = UNMODELED_RESULTS[api_of_symbol(s)]
            elif s.kind == INPUT and s.sig.startswith("text:"):
                act, _, wid = s.sig[5:].rpartition(".")
                if top is not None and top.activity == act:
                    env[s.key] = top.texts.get(wid, "")
                else:
                    env[s.key] = ""  # a freshly created instance starts empty
            elif s.kind == INPUT and s.sig.startswith("payload:"):
                env[s.key] = _payload_text(st, e)
            elif s.kind == INPUT and s.sig.startswith("extra:"):
                env[s.key] = e.extras().get(s.sig[6:], "")
        except EvalError:
            continue
    return env


def _text_instance(pre_top, post: RuntimeState, act: str):
    if pre_top is not None and pre_top.activity == act:
        for inst in post.stack:
            if inst is pre_top:
                return inst
    if post.stack and post.stack[-1].activity == act:
        return post.stack[-1]
    return None


def check_summary(summary, app: App, seed: int = 42, call_depth: int = DEFAULT_CALL_DEPTH) -> ConcolicCheck:
    sid = summary.id
    if summary.status != "concrete" or not summary.witness:
        return _fail(sid, "summary has no witness")
    st = new_state(app, seed)
    *prefix, last = summary.witness
    try:
        for e in prefix:
            res = apply_event(st, e)
            if res.crash:
                return _fail(sid, f"witness prefix crashed: {res.crash}")
    except EventNotEnabled as exc:
        return _fail(sid, f"witness prefix failed: {exc}")
    try:
        state, pc = summary_effects(summary, app)
    except (Unsupported, IntegrityError) as exc:
        return _fail(sid, f"symbolic execution failed: {exc}")
    locations = state.written()
    needed = list(symbols(pc.expr))
    for key in locations:
        v = state.resolve(key)
        if v is not None:
            needed.extend(symbols(v))
    pre_top = st.stack[-1] if st.stack else None
    env = _pre_env(st, last, needed)
    next_id = st.heap.next_id
    try:
        res = apply_event(st, last)
    except EventNotEnabled as exc:
        return _fail(sid, f"final event not enabled: {exc}")
    if res.crash:
        return _fail(sid, f"final event crashed: {res.crash}")

    segments = res.log.segments()
    if res.primary:
        path = executed_path(segments[0][1], build_ipcfg(res.primary, app, call_depth))
        rest = segments[1:]
    else:
        path, rest = EMPTY_PATH, segments
    callbacks = tuple(executed_path(seg, build_ipcfg(root, app, call_depth)) for root, seg in rest)
    if path != summary.path or callbacks != tuple(summary.callbacks):
        return _fail(sid, "replay executed a different path")

    try:
        if evaluate(pc.expr, env) is not True:
            return _fail(sid, "path constraint is false under the concrete pre-state")
    except EvalError as exc:
        return _fail(sid, f"path constraint not evaluable: {exc}")

    allocated: dict = {}  # allocation site -> concrete object id
    for key in locations:
        sym_val = state.resolve(key)
        kind, sig, _ = key
        if kind == STATIC:
            concrete = st.static(sig)
        elif kind == INSTANCE:
            base, _, fname = sig.rpartition(".")
            try:
                concrete = _instance_field(st, base, fname)
            except EvalError as exc:
                return _fail(sid, f"post-state {sig}: {exc}")
        else:
            act, _, wid = sig[5:].rpartition(".")
            inst = _text_instance(pre_top, st, act)
            if inst is None:
                continue  # the instance holding the text is gone
            concrete = inst.texts.get(wid, "")
        if isinstance(sym_val, NewObj):
            if not isinstance(concrete, ObjRef) or concrete.id < next_id:
                return _fail(sid, f"post-state {sig}: expected a new object, got {concrete!r}")
            if allocated.setdefault(sym_val.site, concrete.id) != concrete.id:
                return _fail(sid, f"post-state {sig}: allocation site maps to two objects")
            continue
        try:
            value = evaluate(sym_val, env)
        except EvalError as exc:
            return _fail(sid, f"post-state {sig} not evaluable: {exc}")
        if type(value) is not type(concrete) or value != concrete:
            return _fail(sid, f"post-state {sig}: symbolic {value!r} != concrete {concrete!r}")
    return ConcolicCheck(sid, True)


def check_model(model, app: App, seed: int = 42, call_depth: int = DEFAULT_CALL_DEPTH) -> list[ConcolicCheck]:
    """Check every concrete summary, in id order."""
    return [
        check_summary(s, app, seed, call_depth)
        for s in sorted(model.concrete(), key=lambda s: s.id)
    ]
