from __future__ import annotations

from functools import lru_cache
from importlib import resources

import pytest

from apex.appir import parse_app
from apex.explorer import Budget, run_explorer

CORPUS = ("dragon", "fig1", "login", "notes", "sensor")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def corpus_text(name: str) -> str:
    return (resources.files("apex") / "corpus" / f"{name}.mapp").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def corpus_app(name: str):
    return parse_app(corpus_text(name))


@lru_cache(maxsize=None)
def corpus_targets(name: str) -> tuple:
    f = resources.files("apex") / "corpus" / f"{name}.targets"
    if not f.is_file():
        return ()
    out = []
    for line in f.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            sig, _, idx = line.rpartition(":")
            out.append((sig, int(idx)))
    return tuple(out)


@lru_cache(maxsize=None)
def explored(name: str, seed: int = 42):
    """Explorer run on a corpus app with its bundled targets; shared across tests."""
    app = corpus_app(name)
    return run_explorer(app, corpus_targets(name), Budget(seed=seed))


@pytest.fixture
def fig1():
    return corpus_app("fig1")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
