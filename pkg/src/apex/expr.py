"""Symbolic expression ASTs, simplification and evaluation.

Symbols are keyed by ``(kind, signature, generation)``. ``kind`` is one of
``$static-field``, ``$instance-field``, ``$api-return`` or ``$input``.
The generation counts how many events back the symbol's value was read,
so chained event summaries compose without name clashes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Union

from apex.appir import arith, compare, wrap64

STATIC = "$static-field"
INSTANCE = "$instance-field"
API_RETURN = "$api-return"
INPUT = "$input"
SYMBOL_KINDS = (STATIC, INSTANCE, API_RETURN, INPUT)

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
STR_OPS = ("concat", "equals", "length")


@dataclass(frozen=True, eq=False)
class Lit:
    value: Union[int, str, bool]

    # 1 == True in Python; literals of different types must stay distinct.
    def __eq__(self, other):
        return (
            isinstance(other, Lit)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self):
        return hash((type(self.value).__name__, self.value))


@dataclass(frozen=True)
class Sym:
    kind: str
    sig: str
    gen: int = 0
    sort: str = "int"

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.kind, self.sig, self.gen)

    @property
    def is_param(self) -> bool:
        """Event parameters (text payloads, intent extras) are free choices."""
        return self.kind == INPUT and (self.sig.startswith("payload:") or self.sig.startswith("extra:"))


@dataclass(frozen=True)
class BinOp:
    op: str  # arithmetic, comparison, or "and"
    left: "SymExpr"
    right: "SymExpr"


@dataclass(frozen=True)
class StrOp:
    op: str
    args: tuple["SymExpr", ...]


@dataclass(frozen=True)
class Not:
    child: "SymExpr"


@dataclass(frozen=True)
class NewObj:
    """An object allocated on the path; ``site`` is unique per allocation."""

    site: str


SymExpr = Union[Lit, Sym, BinOp, StrOp, Not, NewObj]

TRUE = Lit(True)
FALSE = Lit(False)


def children(e: SymExpr) -> tuple:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, StrOp):
        return e.args
    if isinstance(e, Not):
        return (e.child,)
    return ()


def walk(e: SymExpr) -> Iterator[SymExpr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def symbols(e: SymExpr) -> list[Sym]:
    seen: dict = {}
    for node in walk(e):
        if isinstance(node, Sym) and node.key not in seen:
            seen[node.key] = node
    return list(seen.values())


def rebuild(e: SymExpr, fn: Callable[[SymExpr], SymExpr | None]) -> SymExpr:
    """Bottom-up rewrite; ``fn`` returns a replacement or None to keep the node."""
    rep = fn(e)
    if rep is not None:
        return rep
    if isinstance(e, BinOp):
        return BinOp(e.op, rebuild(e.left, fn), rebuild(e.right, fn))
    if isinstance(e, StrOp):
        return StrOp(e.op, tuple(rebuild(a, fn) for a in e.args))
    if isinstance(e, Not):
        return Not(rebuild(e.child, fn))
    return e


def substitute(e: SymExpr, mapping: Mapping[tuple, SymExpr]) -> SymExpr:
    def fn(node):
        if isinstance(node, Sym):
            return mapping.get(node.key)
        return None

    return rebuild(e, fn)


def shift_generation(e: SymExpr, by: int) -> SymExpr:
    def fn(node):
        if isinstance(node, Sym):
            return Sym(node.kind, node.sig, node.gen + by, node.sort)
        return None

    return rebuild(e, fn)


def negate(e: SymExpr) -> SymExpr:
    if isinstance(e, BinOp) and e.op in NEGATED:
        return BinOp(NEGATED[e.op], e.left, e.right)
    if isinstance(e, Not):
        return e.child
    if isinstance(e, Lit) and isinstance(e.value, bool):
        return Lit(not e.value)
    return Not(e)


def conj(parts: list[SymExpr]) -> SymExpr:
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = BinOp("and", out, p)
    return out


class EvalError(Exception):
    pass


def evaluate(e: SymExpr, env: Mapping[tuple, object]) -> object:
    """Evaluate under ``env`` (symbol key -> value); missing symbols raise EvalError."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Sym):
        try:
            return env[e.key]
        except KeyError:
            raise EvalError(f"unbound symbol {e.sig}") from None
    if isinstance(e, Not):
        v = evaluate(e.child, env)
        if not isinstance(v, bool):
            raise EvalError("negation of a non-boolean")
        return not v
    if isinstance(e, BinOp):
        if e.op == "and":
            a = evaluate(e.left, env)
            if a is False:
                return False
            return bool(a) and bool(evaluate(e.right, env))
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        try:
            if e.op in ARITH_OPS:
                return arith(e.op, a, b)
            return compare(e.op, a, b)
        except (TypeError, ZeroDivisionError, ValueError) as exc:
            raise EvalError(str(exc)) from None
    if isinstance(e, StrOp):
        vals = [evaluate(a, env) for a in e.args]
        return str_apply(e.op, vals)
    if isinstance(e, NewObj):
        raise EvalError("allocation has no scalar value")
    raise EvalError(f"cannot evaluate {e!r}")


def str_apply(op: str, vals: list) -> object:
    if op == "equals":
        return vals[0] == vals[1]
    if op == "length":
        if not isinstance(vals[0], str):
            raise EvalError("length of a non-string")
        return len(vals[0])
    if op == "concat":
        return _as_str(vals[0]) + _as_str(vals[1])
    raise EvalError(f"unknown string op {op}")


def _as_str(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, str)):
        return str(v)
    raise EvalError(f"cannot append {v!r}")


def simplify(e: SymExpr) -> SymExpr:
    """Constant folding, double negation, identity laws; semantics preserving."""
    if isinstance(e, (Lit, Sym, NewObj)):
        return e
    if isinstance(e, Not):
        c = simplify(e.child)
        if isinstance(c, Lit) and isinstance(c.value, bool):
            return Lit(not c.value)
        if isinstance(c, Not):
            return c.child
        if isinstance(c, BinOp) and c.op in NEGATED:
            return BinOp(NEGATED[c.op], c.left, c.right)
        return Not(c)
    if isinstance(e, StrOp):
        args = tuple(simplify(a) for a in e.args)
        if all(isinstance(a, Lit) for a in args):
            try:
                return Lit(str_apply(e.op, [a.value for a in args]))
            except EvalError:
                pass
        if e.op == "equals" and args[0] == args[1] and isinstance(args[0], (Sym, Lit)):
            return TRUE
        if e.op == "concat":
            for i, other in ((0, 1), (1, 0)):
                if args[i] == Lit(""):
                    if _is_stringy(args[other]):
                        return args[other]
        return StrOp(e.op, args)
    assert isinstance(e, BinOp)
    left = simplify(e.left)
    right = simplify(e.right)
    if e.op == "and":
        if left == FALSE or right == FALSE:
            return FALSE
        if left == TRUE:
            return right
        if right == TRUE:
            return left
        return BinOp("and", left, right)
    if isinstance(left, Lit) and isinstance(right, Lit):
        try:
            if e.op in ARITH_OPS:
                return Lit(arith(e.op, left.value, right.value))
            return Lit(compare(e.op, left.value, right.value))
        except (TypeError, ZeroDivisionError, ValueError):
            return BinOp(e.op, left, right)
    if e.op == "+":
        if _is_int_lit(right, 0) and _is_int_expr(left):
            return left
        if _is_int_lit(left, 0) and _is_int_expr(right):
            return right
        # (x + c1) + c2 -> x + (c1 + c2)
        if isinstance(right, Lit) and _is_int_lit(right) and isinstance(left, BinOp):
            if left.op in ("+", "-") and _is_int_lit(left.right):
                c1 = left.right.value if left.op == "+" else -left.right.value
                return simplify(BinOp("+", left.left, Lit(wrap64(c1 + right.value))))
    if e.op == "-" and _is_int_lit(right, 0) and _is_int_expr(left):
        return left
    if e.op == "-" and _is_int_lit(right) and isinstance(left, BinOp) and left.op in ("+", "-"):
        if _is_int_lit(left.right):
            c1 = left.right.value if left.op == "+" else -left.right.value
            return simplify(BinOp("+", left.left, Lit(wrap64(c1 - right.value))))
    if e.op == "*":
        if _is_int_lit(right, 1) and _is_int_expr(left):
            return left
        if _is_int_lit(left, 1) and _is_int_expr(right):
            return right
    if e.op == "/" and _is_int_lit(right, 1) and _is_int_expr(left):
        return left
    if e.op in ("==", "!=") and isinstance(right, Lit) and isinstance(right.value, bool):
        # b == true -> b, b == false -> not b (only for boolean-valued left sides)
        if _is_bool_expr(left):
            keep = (e.op == "==") == right.value
            return left if keep else simplify(Not(left))
    if left == right and isinstance(left, Sym) and left.sort in ("int", "str"):
        if e.op in ("==", "<=", ">="):
            return TRUE
        if e.op in ("!=", "<", ">"):
            return FALSE
    return BinOp(e.op, left, right)


def _is_int_lit(e: SymExpr, value: int | None = None) -> bool:
    if not (isinstance(e, Lit) and isinstance(e.value, int) and not isinstance(e.value, bool)):
        return False
    return value is None or e.value == value


def _is_int_expr(e: SymExpr) -> bool:
    """True only when ``e`` is statically an integer (bools excluded)."""
    if isinstance(e, Lit):
        return _is_int_lit(e)
    if isinstance(e, Sym):
        return e.sort == "int"
    if isinstance(e, BinOp):
        return e.op in ARITH_OPS
    if isinstance(e, StrOp):
        return e.op == "length"
    return False


def _is_bool_expr(e: SymExpr) -> bool:
    if isinstance(e, Lit):
        return isinstance(e.value, bool)
    if isinstance(e, Sym):
        return e.sort == "bool"
    if isinstance(e, BinOp):
        return e.op in CMP_OPS or e.op == "and"
    if isinstance(e, StrOp):
        return e.op == "equals"
    return isinstance(e, Not)


def _is_stringy(e: SymExpr) -> bool:
    if isinstance(e, Lit):
        return isinstance(e.value, str)
    if isinstance(e, Sym):
        return e.sort == "str"
    if isinstance(e, StrOp):
        return e.op == "concat"
    return False


def to_sexpr(e: SymExpr) -> str:
    """S-expression text used in reports and golden tests."""
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(e, Sym):
        gen = f"@{e.gen}" if e.gen else ""
        return f"({e.kind} {e.sig}{gen})"
    if isinstance(e, BinOp):
        return f"({e.op} {to_sexpr(e.left)} {to_sexpr(e.right)})"
    if isinstance(e, StrOp):
        return f"(str.{e.op} " + " ".join(to_sexpr(a) for a in e.args) + ")"
    if isinstance(e, Not):
        return f"(not {to_sexpr(e.child)})"
    if isinstance(e, NewObj):
        return f"(new {e.site})"
    raise TypeError(e)


def state_expression(location: Sym, value: SymExpr) -> str:
    """A symbolic-state entry rendered with the ``=`` root."""
    return f"(= {to_sexpr(location)} {to_sexpr(value)})"
