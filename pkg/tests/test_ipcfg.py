from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apps import FIG2, LOOPY, MINIMAL
from conftest import CORPUS, corpus_app
from apex.appir import Event, parse_app
from apex.errors import IntegrityError
from apex.gui_model import EventSummary
from apex.ipcfg import (
    Path,
    build_cfg,
    build_ipcfg,
    enumerate_paths,
    executed_path,
    get_symbolic_paths,
    has_gui_transition,
    static_reach,
)
from apex.runtime import ExecLog, LogEntry, apply_event, boot


def test_cfg_straight_line():
    app = parse_app(FIG2)
    cfg = build_cfg(app.methods["A.increase"])
    assert len(cfg.blocks) == 1 and not cfg.edges


def test_cfg_two_paths_and_loop():
    app = parse_app(FIG2)
    cfg = build_cfg(app.methods["A.onClick"])
    assert sorted(cfg.edges) == [(0, 1), (0, 2), (1, 3), (2, 3)]
    loop = build_cfg(parse_app(LOOPY).methods["A.onLoop"])
    assert (2, 1) in loop.edges  # back-edge to the loop header


def test_ipcfg_inlines_callees():
    app = parse_app(FIG2)
    g = build_ipcfg("A.onClick", app)
    paths = enumerate_paths(g)
    assert len(paths) == 2
    methods = [{s for s, _ in p.statements} for p in paths]
    assert {"A.onClick", "A.increase"} in methods and {"A.onClick", "A.decrease"} in methods
    assert not paths.truncated


def test_ipcfg_without_invokes_equals_cfg():
    app = parse_app(MINIMAL)
    g = build_ipcfg("A1.onClick", app)
    assert g.statements() == {("A1.onClick", 0)}
    assert enumerate_paths(g) == [Path("A1.onClick", (("A1.onClick", 0),))]


def test_recursion_bound():
    app = parse_app(LOOPY)
    g = build_ipcfg("A.rec", app, call_depth_bound=2)
    contexts = {ctx for ctx, _, _ in g.nodes}
    assert max(len(c) for c in contexts) == 2
    assert g.opaque and g.diagnostics


def test_loop_bound():
    app = parse_app(LOOPY)
    g = build_ipcfg("A.onLoop", app)
    assert len(enumerate_paths(g, loop_bound=1)) == 2
    assert len(enumerate_paths(g, loop_bound=2)) == 3
    assert enumerate_paths(g, loop_bound=3, max_paths=2).truncated


def test_executed_path_increase_side():
    app = parse_app(FIG2)
    st_, _, _ = boot(app)
    res = apply_event(st_, Event("tap", "b"))
    assert [b for b in res.log.blocks() if b[0] == "A.onClick"] == [("A.onClick", 0), ("A.onClick", 2), ("A.onClick", 5)]
    p = executed_path(res.log, build_ipcfg("A.onClick", app))
    assert p.root_indices() == (0, 1, 2, 3, 5)
    assert ("A.increase", 3) in p.statements


def test_executed_path_mismatch():
    app = parse_app(FIG2)
    log = ExecLog([LogEntry("S", "A.onClick"), LogEntry("B", "A.onClick", 0), LogEntry("B", "A.onClick", 9), LogEntry("R", "A.onClick")])
    with pytest.raises(IntegrityError):
        executed_path(log, build_ipcfg("A.onClick", app))


def test_symbolic_paths_fig1():
    app = corpus_app("fig1")
    st_, _, _ = boot(app)
    st_.heap.statics["A1.cond"] = 1
    res = apply_event(st_, Event("tap", "e1"))
    g = build_ipcfg("A1.onClick", app)
    p = executed_path(res.log.segments()[0][1], g)
    assert p.label() == "A1.onClick:{0,1,2,3,4,5,6,11}"
    s = EventSummary(Event("tap", "e1"), p, "concrete", None, "A1", "A1.onClick")
    sym = get_symbolic_paths(s, g)
    assert [x.path.label() for x in sym] == ["A1.onClick:{0,1,7,8,9,10,11}"]
    assert all(x.status == "symbolic" for x in sym)


def test_static_reach_and_gui_flag():
    app = corpus_app("fig1")
    g = build_ipcfg("A1.onClick", app)
    assert static_reach(g, [("A1.onClick", 8), ("A1.onToggle", 0)]) == 1
    assert has_gui_transition(g)
    assert not has_gui_transition(build_ipcfg("A1.onToggle", app))


def test_dot_export():
    g = build_ipcfg("A.onClick", parse_app(FIG2))
    dot = g.to_dot()
    assert dot.startswith("digraph") and "A.increase" in dot


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CORPUS), st.data())
def test_path_properties(name, data):
    app = corpus_app(name)
    sig = data.draw(st.sampled_from(sorted(app.methods)))
    m = app.methods[sig]
    cfg = build_cfg(m)
    covered = [i for s, e in m.blocks for i in range(s, e)]
    assert covered == list(range(len(m.body)))  # blocks partition the body
    g = build_ipcfg(sig, app)
    paths = enumerate_paths(g)
    edges = set(g.edges)
    for p in paths:
        nodes = _nodes_of(p, g)
        assert nodes[0] == g.entry
        assert g.instr(nodes[-1]).op == "return" and nodes[-1][0] == ()
        assert all((a, b) in edges for a, b in zip(nodes, nodes[1:]))
    if paths and not paths.truncated:
        s = EventSummary(Event("tap", "w"), paths[0], "concrete", None, None, sig)
        sym = get_symbolic_paths(s, g)
        assert len(sym) + 1 == len(paths)
        assert paths[0] not in [x.path for x in sym]
    assert cfg.method == sig


def _nodes_of(p: Path, g):
    """Re-derive the node walk of a path by following IPCFG edges."""
    walk = [g.entry]
    for stmt in p.statements[1:]:
        nxt = [n for n in g.succ[walk[-1]] if (n[1], n[2]) == stmt]
        assert len(nxt) == 1
        walk.append(nxt[0])
    return walk
