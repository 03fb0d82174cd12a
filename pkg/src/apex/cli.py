"""Command-line frontend: explore, target, replay, baseline and corpus runs."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path as FsPath

from apex.appir import App, parse_app, parse_event, serialize_app
from apex.baseline import run_random
from apex.errors import ApexError, EventNotEnabled, ParseError
from apex.explorer import Budget, coverage, covered_statements, run_explorer
from apex.gui_model import export_model, state_id_of
from apex.ipcfg import build_ipcfg, executed_path
from apex.plotting import plot_coverage, step_points, write_coverage_csv
from apex.runtime import apply_event, new_state

REPORT_SCHEMA = "report.v1"
EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT = 0, 1, 2

log = logging.getLogger("apex")


class InputError(Exception):
    pass


# -- inputs --


def corpus_names() -> list[str]:
    root = resources.files("apex") / "corpus"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".mapp"))


def _corpus_file(name: str, suffix: str):
    p = resources.files("apex") / "corpus" / f"{name}{suffix}"
    return p if p.is_file() else None


def resolve_app(name: str) -> tuple[App, str | None]:
    """Load an app from a path or a bundled corpus name; returns (app, corpus name)."""
    p = FsPath(name)
    corpus = None
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    else:
        f = _corpus_file(name, ".mapp")
        if f is None:
            raise InputError(f"no such app file or corpus app: {name}")
        text = f.read_text(encoding="utf-8")
        corpus = name
    try:
        return parse_app(text), corpus
    except ApexError as exc:
        raise InputError(f"{name}: {exc}") from None


def parse_targets(text: str, app: App) -> list[tuple[str, int]]:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sig, sep, idx = line.rpartition(":")
        if not sep or not idx.isdigit():
            raise InputError(f"targets line {n}: expected methodSig:instrIndex, got {line!r}")
        m = app.methods.get(sig)
        if m is None:
            raise InputError(f"targets line {n}: unknown method {sig}")
        if int(idx) >= len(m.body):
            raise InputError(f"targets line {n}: {sig} has no instruction {idx}")
        out.append((sig, int(idx)))
    return out


def resolve_targets(arg: str | None, app: App, corpus: str | None) -> list[tuple[str, int]]:
    if arg is None:
        if corpus is not None and _corpus_file(corpus, ".targets") is not None:
            return parse_targets(_corpus_file(corpus, ".targets").read_text(encoding="utf-8"), app)
        return []
    p = FsPath(arg)
    if not p.is_file():
        raise InputError(f"no such targets file: {arg}")
    return parse_targets(p.read_text(encoding="utf-8"), app)


def read_sequence(text: str) -> list:
    events = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            events.append(parse_event(line))
        except ParseError as exc:
            raise InputError(f"sequence line {n}: {exc.message}") from None
    return events


def write_sequence(path: FsPath, events, header: str) -> None:
    lines = [f"# {header}"] + [e if isinstance(e, str) else e.text() for e in events]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- commands --


def _budget(args) -> Budget:
    return Budget(
        max_events=args.max_events,
        max_seconds=args.max_seconds,
        seed=args.seed,
        loop_bound=args.loop_bound,
        max_paths=args.max_paths,
        domain_bound=args.domain_bound,
        recursion_bound=args.recursion_bound,
        penalty_window=args.penalty_window,
    )


def _target_name(t) -> str:
    return f"{t[0]}:{t[1]}"


def build_report(ex, app: App, targets) -> dict:
    cov = coverage(ex.history, app, targets)
    first = {tuple(t): it for t, _, it in ex.history.target_hits}
    per_target = []
    for t in targets:
        w = ex.history.best_witness.get(tuple(t))
        per_target.append(
            {
                "target": _target_name(t),
                "hit": w is not None,
                "witness": w or [],
                "witness_length": len(w) if w else 0,
                "first_hit_iteration": first.get(tuple(t)),
            }
        )
    lengths = [p["witness_length"] for p in per_target if p["hit"]]
    return {
        "schema": REPORT_SCHEMA,
        "app": app.name,
        "budget": ex.budget.to_json(),
        "coverage": cov.to_json(),
        "targets": per_target,
        "max_witness_length": max(lengths) if lengths else 0,
        "states": len(ex.model.states),
        "transitions": len(ex.model.transitions),
        "events_applied": ex.events_applied,
        "iterations": ex.iteration,
        "queue_stats": dict(sorted(ex.stats.items())),
        "retirements": [
            {"summary": sid, "label": label, "reason": reason}
            for sid, label, reason in ex.history.retirements
        ],
    }


def _write_json(path: FsPath, data: dict) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_curves(out: FsPath, curves: dict, app: App) -> None:
    total = app.instruction_count()
    write_coverage_csv(out / "coverage.csv", curves, total)
    plot_coverage(out / "coverage.png", curves, total, app.name)


def explore_to_dir(app: App, targets, budget: Budget, out: FsPath, baseline: bool = True):
    """Run the explorer and write every artifact into ``out``; returns the report."""
    ex = run_explorer(app, targets, budget)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(export_model(ex.model, "json"), encoding="utf-8")
    (out / "model.dot").write_text(export_model(ex.model, "dot"), encoding="utf-8")
    report = build_report(ex, app, targets)
    _write_json(out / "report.json", report)
    seq_dir = out / "sequences"
    seq_dir.mkdir(exist_ok=True)
    for old in seq_dir.glob("*.txt"):
        old.unlink()
    for i, (src, sid, dst) in enumerate(sorted(ex.model.transitions, key=lambda t: (t[0] or "", t[1], t[2]))):
        s = ex.model.summaries[sid]
        write_sequence(
            seq_dir / f"transition-{i:03d}.txt", s.witness, f"{src or 'entry'} -{sid}-> {dst}"
        )
    for p in report["targets"]:
        if p["hit"]:
            sig, idx = p["target"].rsplit(":", 1)
            write_sequence(seq_dir / f"target-{sig}-{idx}.txt", p["witness"], f"target {p['target']}")
    curves = {"guided": step_points(ex.history.curve, ex.events_applied)}
    if baseline:
        rnd = run_random(app, ex.events_applied, budget.seed)
        curves["random"] = step_points(rnd.history.curve, rnd.events_applied)
    _write_curves(out, curves, app)
    return report


def cmd_explore(args, require_targets: bool = False) -> int:
    app, corpus = resolve_app(args.app)
    targets = resolve_targets(args.targets, app, corpus)
    if require_targets and not targets:
        raise InputError("target mode needs --targets (or a corpus app with bundled targets)")
    out = FsPath(args.out or f"apex-out/{app.name}")
    report = explore_to_dir(app, targets, _budget(args), out)
    cov = report["coverage"]
    print(f"app {app.name}: {report['states']} states, {report['transitions']} transitions")
    print(
        f"coverage {cov['covered_instructions']}/{cov['total_instructions']} "
        f"({100 * cov['instruction_coverage']:.1f}%) after {report['events_applied']} events"
    )
    for p in report["targets"]:
        status = f"hit, witness length {p['witness_length']}" if p["hit"] else "not reached"
        print(f"target {p['target']}: {status}")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_target(args) -> int:
    return cmd_explore(args, require_targets=True)


def cmd_replay(args) -> int:
    app, _ = resolve_app(args.app)
    p = FsPath(args.sequence)
    if not p.is_file():
        raise InputError(f"no such sequence file: {args.sequence}")
    events = read_sequence(p.read_text(encoding="utf-8"))
    if not events:
        raise InputError("empty sequence file")
    st = new_state(app, args.seed)
    blocks: set = set()
    res = None
    for i, e in enumerate(events):
        try:
            res = apply_event(st, e)
        except EventNotEnabled as exc:
            print(f"event {i} not enabled: {e.text()} ({exc})")
            return EXIT_FAIL
        if res.crash:
            print(f"event {i} crashed: {e.text()} ({res.crash})")
            return EXIT_FAIL
        prev = len(covered_statements(app, blocks))
        blocks.update(res.log.blocks())
    total = len(covered_statements(app, blocks))
    print(f"final layout {state_id_of(res.layout.pairs())} ({res.layout.activity or 'no activity'})")
    segments = res.log.segments()
    if res.primary:
        path = executed_path(segments[0][1], build_ipcfg(res.primary, app, args.call_depth))
        print(f"final event path {path.label()}")
        rest = segments[1:]
    else:
        print("final event path (no handler)")
        rest = segments
    for root, seg in rest:
        print(f"callback path {executed_path(seg, build_ipcfg(root, app, args.call_depth)).label()}")
    print(f"coverage {total}/{app.instruction_count()} instructions, final event added {total - prev}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    app, corpus = resolve_app(args.app)
    targets = resolve_targets(args.targets, app, corpus)
    budget = args.max_events if args.max_events is not None else 1000
    res = run_random(app, budget, args.seed, targets)
    report = {
        "schema": REPORT_SCHEMA,
        "app": app.name,
        "mode": "baseline-random",
        "seed": args.seed,
        "event_budget": budget,
        "coverage": res.report.to_json(),
        "events_applied": res.events_applied,
        "restarts": res.restarts,
    }
    if args.out:
        out = FsPath(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", report)
        _write_curves(out, {"random": step_points(res.history.curve, res.events_applied)}, app)
    cov = report["coverage"]
    print(
        f"random baseline on {app.name}: {cov['covered_instructions']}/{cov['total_instructions']} "
        f"({100 * cov['instruction_coverage']:.1f}%) after {res.events_applied} events"
    )
    return EXIT_OK


def cmd_parse(args) -> int:
    app, _ = resolve_app(args.app)
    sys.stdout.write(serialize_app(app))
    return EXIT_OK


def cmd_corpus(args) -> int:
    root = FsPath(args.out or "apex-out")
    for name in corpus_names():
        app, _ = resolve_app(name)
        targets = resolve_targets(None, app, name)
        report = explore_to_dir(app, targets, _budget(args), root / name)
        cov = report["coverage"]
        hit = sum(1 for p in report["targets"] if p["hit"])
        print(
            f"{name}: coverage {100 * cov['instruction_coverage']:.1f}%, "
            f"targets {hit}/{len(report['targets'])}, max witness {report['max_witness_length']}"
        )
    return EXIT_OK


# -- parser --


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-events", type=int, default=None)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--loop-bound", type=int, default=1)
    p.add_argument("--max-paths", type=int, default=256)
    p.add_argument("--domain-bound", type=int, default=64)
    p.add_argument("--recursion-bound", type=int, default=3)
    p.add_argument("--penalty-window", type=int, default=3)
    p.add_argument("--targets", default=None, help="file of methodSig:instrIndex lines")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apex", description="Concolic event-sequence generation for .mapp apps.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, fn, desc in (
        ("explore", cmd_explore, "explore an app and write model, report and sequences"),
        ("target", cmd_target, "explore towards code targets (requires targets)"),
        ("baseline", cmd_baseline, "random event baseline"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("app", help="path to a .mapp file or a bundled corpus name")
        _common(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("corpus", help="explore every bundled corpus app")
    _common(p)
    p.set_defaults(func=cmd_corpus)
    p = sub.add_parser("parse", help="validate an app and print its normalized form")
    p.add_argument("app")
    p.set_defaults(func=cmd_parse)
    p = sub.add_parser("replay", help="apply an event sequence file")
    p.add_argument("app")
    p.add_argument("sequence")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--call-depth", type=int, default=8)
    p.set_defaults(func=cmd_replay)
    sub.add_parser("list", help="list bundled corpus apps").set_defaults(
        func=lambda args: print("\n".join(corpus_names())) or EXIT_OK
    )
    return ap


def main(argv=None) -> int:
    level = os.environ.get("APEX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"apex: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
