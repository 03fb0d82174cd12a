"""Symbolic transfer functions for the platform API catalog.

Each model takes the symbolic argument list and the executor's context and
returns the symbolic result (or None). APIs without a model yield a fresh
``$api-return`` symbol, which the decision procedure reports as UNKNOWN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from apex.appir import API_CATALOG
from apex.errors import Unsupported
from apex.expr import API_RETURN, INPUT, Lit, StrOp, Sym, SymExpr

API_MODELS_VERSION = 1


@dataclass
class ApiContext:
    """What a model may read or change while a path is being executed."""

    state: object  # symexec.SymState
    activity: str | None
    symbolic_extras: bool = False
    site: str = ""  # "sig:idx", used to name fresh symbols


def _lit_str(e: SymExpr, what: str) -> str:
    if isinstance(e, Lit) and isinstance(e.value, str):
        return e.value
    raise Unsupported(f"{what} must be a constant string")


def _start_activity(args, ctx):
    ctx.state.effects.append(("ui.startActivity", args[0]))
    return None


def _finish(args, ctx):
    ctx.state.effects.append(("ui.finish",))
    return None


def _set_handler(args, ctx):
    ctx.state.effects.append(("ui.setHandler", args[0], args[1]))
    return None


def _text_key(args, ctx) -> str:
    if ctx.activity is None:
        raise Unsupported("text access without a foreground activity")
    return f"{ctx.activity}.{_lit_str(args[0], 'widget id')}"


def _set_text(args, ctx):
    ctx.state.texts[_text_key(args, ctx)] = args[1]
    return None


def _get_text(args, ctx):
    key = _text_key(args, ctx)
    if key in ctx.state.texts:
        return ctx.state.texts[key]
    return Sym(INPUT, f"text:{key}", 0, "str")


def _get_extra(args, ctx):
    key = _lit_str(args[0], "extra key")
    if not ctx.symbolic_extras:
        return Lit("")
    return Sym(INPUT, f"extra:{key}", 0, "str")


def _register(args, ctx):
    ctx.state.effects.append(("sys.registerReceiver", args[0], args[1]))
    return None


def _nothing(args, ctx):
    return None


def _str(op: str):
    def model(args, ctx):
        return StrOp(op, tuple(args))

    return model


MODELS: dict[str, Callable] = {
    "ui.startActivity": _start_activity,
    "ui.finish": _finish,
    "ui.setHandler": _set_handler,
    "ui.setText": _set_text,
    "ui.getText": _get_text,
    "intent.getExtra": _get_extra,
    "str.equals": _str("equals"),
    "str.length": _str("length"),
    "str.concat": _str("concat"),
    "sys.registerReceiver": _register,
    "log.print": _nothing,
}


def apply_api(name: str, args: list, ctx: ApiContext) -> SymExpr | None:
    model = MODELS.get(name)
    if model is not None:
        return model(args, ctx)
    arity, sort, _ = API_CATALOG[name]
    if sort is None:
        return None
    return Sym(API_RETURN, f"{name}#{ctx.site}", 0, sort)


def api_of_symbol(sym: Sym) -> str:
    """The API name behind an ``$api-return`` symbol."""
    return sym.sig.split("#", 1)[0]
