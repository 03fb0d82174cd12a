"""Control flow graphs, bounded path enumeration and executed-path recovery.

Inter-procedural graphs are statement-level: a node is
``(call string, method, instruction index)``. Calls are inlined up to a
depth bound; API calls are never expanded.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

from apex.appir import App, Method
from apex.errors import IntegrityError

log = logging.getLogger(__name__)

DEFAULT_LOOP_BOUND = 1
DEFAULT_MAX_PATHS = 256
DEFAULT_CALL_DEPTH = 8


@dataclass(frozen=True)
class Cfg:
    method: str
    blocks: tuple[tuple[int, tuple[int, int]], ...]  # (block index, (start, end))
    edges: tuple[tuple[int, int], ...]

    def to_dot(self) -> str:
        lines = [f'digraph "{self.method}" {{']
        for b, (s, e) in self.blocks:
            lines.append(f'  b{b} [label="B{b} [{s},{e})"];')
        for a, b in self.edges:
            lines.append(f"  b{a} -> b{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_cfg(m: Method) -> Cfg:
    blocks = tuple(enumerate(m.blocks))
    start_to_block = {s: i for i, (s, _) in blocks}
    edges = []
    for i, (s, e) in blocks:
        last = m.body[e - 1]
        succ = []
        if last.op == "goto":
            succ.append(last.target)
        elif last.op in ("if", "ifz"):
            succ.extend([e, last.target])
        elif last.op != "return":
            succ.append(e)
        for t in sorted(set(succ)):
            if t in start_to_block:
                edges.append((i, start_to_block[t]))
    return Cfg(m.sig, blocks, tuple(edges))


Node = tuple  # (ctx: tuple[(caller sig, call index), ...], sig, idx)


@dataclass(frozen=True)
class Path:
    """An execution path of a root method as (method, instruction index) steps."""

    method: str
    statements: tuple[tuple[str, int], ...]

    @property
    def is_empty(self) -> bool:
        return not self.statements

    def label(self) -> str:
        parts = [str(i) if s == self.method else f"{s}:{i}" for s, i in self.statements]
        return f"{self.method}:{{{','.join(parts)}}}"

    def digest(self) -> str:
        return hashlib.sha1(self.label().encode()).hexdigest()[:12]

    def block_entries(self, app: App) -> tuple[tuple[str, int], ...]:
        """Projection onto block entries, as an instrumented log would record them."""
        leaders = {}
        out = []
        for s, i in self.statements:
            if s not in leaders:
                leaders[s] = frozenset(app.methods[s].leaders)
            if i in leaders[s]:
                out.append((s, i))
        return tuple(out)

    def root_indices(self) -> tuple[int, ...]:
        return tuple(i for s, i in self.statements if s == self.method)

    def to_json(self) -> dict:
        return {"method": self.method, "statements": [[s, i] for s, i in self.statements]}

    @classmethod
    def from_json(cls, d: dict) -> "Path":
        return cls(d["method"], tuple((s, i) for s, i in d["statements"]))


EMPTY_PATH = Path("", ())


class PathList(list):
    """A list of paths that also reports whether enumeration was cut short."""

    truncated: bool = False


@dataclass
class Ipcfg:
    root: str
    app: App
    call_depth_bound: int
    nodes: list = field(default_factory=list)
    succ: dict = field(default_factory=dict)  # node -> sorted successor list
    opaque: set = field(default_factory=set)  # invoke nodes left unexpanded
    diagnostics: list = field(default_factory=list)

    @property
    def entry(self) -> Node:
        return ((), self.root, 0)

    @property
    def edges(self) -> list[tuple[Node, Node]]:
        return [(n, s) for n in self.nodes for s in self.succ[n]]

    def statements(self) -> set[tuple[str, int]]:
        return {(sig, idx) for _, sig, idx in self.nodes}

    def instr(self, node: Node):
        return self.app.methods[node[1]].body[node[2]]

    def to_dot(self) -> str:
        ids = {n: f"n{i}" for i, n in enumerate(self.nodes)}
        lines = [f'digraph "{self.root}" {{']
        for n in self.nodes:
            ctx = "/".join(f"{s}@{i}" for s, i in n[0])
            label = f"{n[1]}:{n[2]} {self.instr(n).text()}"
            if ctx:
                label = f"[{ctx}] " + label
            lines.append(f"  {ids[n]} [label={_dot_quote(label)}];")
        for a, b in self.edges:
            lines.append(f"  {ids[a]} -> {ids[b]};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def build_ipcfg(root: str, app: App, call_depth_bound: int = DEFAULT_CALL_DEPTH) -> Ipcfg:
    if root not in app.methods:
        raise KeyError(f"no such method {root}")
    g = Ipcfg(root, app, call_depth_bound)
    seen = set()
    work = [g.entry]
    while work:
        node = work.pop()
        if node in seen:
            continue
        seen.add(node)
        ctx, sig, idx = node
        ins = app.methods[sig].body[idx]
        succ: list = []
        if ins.op == "goto":
            succ.append((ctx, sig, ins.target))
        elif ins.op in ("if", "ifz"):
            for t in sorted({idx + 1, ins.target}):
                succ.append((ctx, sig, t))
        elif ins.op == "return":
            if ctx:
                caller, site = ctx[-1]
                succ.append((ctx[:-1], caller, site + 1))
        elif ins.op == "invoke":
            callee = ins.args[0]
            if len(ctx) + 1 <= call_depth_bound:
                succ.append((ctx + ((sig, idx),), callee, 0))
            else:
                g.opaque.add(node)
                g.diagnostics.append(
                    f"call to {callee} at {sig}:{idx} not expanded (depth bound {call_depth_bound})"
                )
                succ.append((ctx, sig, idx + 1))
        else:
            succ.append((ctx, sig, idx + 1))
        g.succ[node] = succ
        work.extend(reversed(succ))
    g.nodes = sorted(seen, key=_node_key)
    for d in g.diagnostics:
        log.debug(d)
    return g


def _node_key(n: Node):
    return (len(n[0]), n[0], n[1], n[2])


def _is_back_edge(a: Node, b: Node) -> bool:
    return a[0] == b[0] and a[1] == b[1] and b[2] <= a[2]


def enumerate_paths(
    g: Ipcfg, loop_bound: int = DEFAULT_LOOP_BOUND, max_paths: int = DEFAULT_MAX_PATHS
) -> PathList:
    """Entry-to-return paths, each back edge taken at most ``loop_bound`` times."""
    out = PathList()
    counts: dict = {}
    trail: list = [g.entry]
    # Iterative DFS; each frame is (node, successor cursor).
    stack = [(g.entry, 0)]
    while stack:
        node, k = stack[-1]
        succ = g.succ[node]
        if not succ:
            if not node[0]:  # return from the root
                if len(out) >= max_paths:
                    out.truncated = True
                    break
                out.append(Path(g.root, tuple((s, i) for _, s, i in trail)))
            _pop(stack, trail, counts)
            continue
        if k >= len(succ):
            _pop(stack, trail, counts)
            continue
        stack[-1] = (node, k + 1)
        nxt = succ[k]
        if _is_back_edge(node, nxt):
            key = (node, nxt)
            if counts.get(key, 0) >= loop_bound:
                continue
            counts[key] = counts.get(key, 0) + 1
        stack.append((nxt, 0))
        trail.append(nxt)
    if out.truncated:
        g.diagnostics.append(f"path enumeration for {g.root} truncated at {max_paths}")
        log.info("path enumeration for %s truncated at %d", g.root, max_paths)
    return out


def _pop(stack, trail, counts) -> None:
    node, _ = stack.pop()
    trail.pop()
    if stack:
        prev = stack[-1][0]
        if _is_back_edge(prev, node):
            counts[(prev, node)] -= 1


def _root_segment(entries: list, root: str) -> list:
    depth = 0
    start = None
    for i, e in enumerate(entries):
        if e.kind == "S":
            if depth == 0 and e.sig == root and start is None:
                start = i
            depth += 1
        elif e.kind == "R":
            depth -= 1
            if depth == 0 and start is not None:
                return entries[start : i + 1]
    raise IntegrityError(f"log has no complete invocation of {root}")


def executed_path(log_or_entries, g: Ipcfg) -> Path:
    """Recover the path whose block-entry projection matches the log."""
    entries = getattr(log_or_entries, "entries", log_or_entries)
    seg = _root_segment(list(entries), g.root)
    blocks = []
    depth = -1
    for e in seg:
        if e.kind == "S":
            depth += 1
        elif e.kind == "R":
            depth -= 1
        elif e.kind == "B" and depth <= g.call_depth_bound:
            blocks.append((e.sig, e.arg))
    app = g.app
    leaders = {sig: frozenset(m.leaders) for sig, m in app.methods.items()}
    node = g.entry
    k = 0
    trail = []
    limit = len(seg) * 64 + 1024
    while True:
        ctx, sig, idx = node
        trail.append((sig, idx))
        if len(trail) > limit:
            raise IntegrityError("executed path walk did not terminate")
        if idx in leaders[sig]:
            if k >= len(blocks) or blocks[k] != (sig, idx):
                got = blocks[k] if k < len(blocks) else None
                raise IntegrityError(f"log block {got} does not match graph node {sig}:{idx}")
            k += 1
        succ = g.succ.get(node)
        if succ is None:
            raise IntegrityError(f"node {sig}:{idx} not in graph")
        if not succ:
            break
        if len(succ) == 1:
            node = succ[0]
            continue
        if k >= len(blocks):
            raise IntegrityError(f"log ends before branch at {sig}:{idx}")
        nxt = [s for s in succ if (s[1], s[2]) == blocks[k]]
        if not nxt:
            raise IntegrityError(f"log block {blocks[k]} is not a successor of {sig}:{idx}")
        node = nxt[0]
    if k != len(blocks):
        raise IntegrityError(f"log has {len(blocks) - k} unmatched block entries")
    return Path(g.root, tuple(trail))


def get_symbolic_paths(summary, g: Ipcfg, bounds: dict | None = None) -> list:
    """One symbolic summary per enumerated path other than the executed one."""
    from apex.gui_model import EventSummary

    bounds = bounds or {}
    paths = enumerate_paths(
        g, bounds.get("loop_bound", DEFAULT_LOOP_BOUND), bounds.get("max_paths", DEFAULT_MAX_PATHS)
    )
    return [
        EventSummary(summary.event, p, "symbolic", src=summary.src)
        for p in paths
        if p != summary.path
    ]


def static_reach(g: Ipcfg, targets) -> int:
    """How many targets are statements of the graph."""
    stmts = g.statements()
    return sum(1 for t in targets if tuple(t) in stmts)


def has_gui_transition(g: Ipcfg) -> bool:
    from apex.appir import GUI_TRANSITION_APIS

    for n in g.nodes:
        ins = g.instr(n)
        if ins.op == "api" and ins.args[0] in GUI_TRANSITION_APIS:
            return True
    return False
