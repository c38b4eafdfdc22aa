"""Arithmetic expressions for custom potentials.

Grammar: numbers, variables, ``pi``, the binary operators ``+ - * / ^``
(``^`` is right-associative and binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)``), unary ``+``/``-``, and the functions ``abs``,
``sqrt``, ``exp``, ``log``. Parsing goes through :mod:`ast` after mapping
``^`` to ``**`` (Python gives ``**`` exactly these precedence rules); the
tree is then checked against a whitelist, so nothing else can run.
Evaluation is numpy-vectorized.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {"abs": np.abs, "sqrt": np.sqrt, "exp": np.exp, "log": np.log}
CONSTANTS = {"pi": np.pi}

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide,
           ast.Pow: np.power}
_UNARY = {ast.USub: np.negative, ast.UAdd: np.positive}
_ALLOWED_CHARS = re.compile(r"[0-9A-Za-z_.+\-*/^() \t]")


def _translate(text):
    """Replace ``^`` by ``**`` and keep a map from new offsets to original ones."""
    out, where = [], []
    for pos, ch in enumerate(text):
        if ch == "*" and text[pos + 1:pos + 2] == "*":
            raise ExpressionError("use '^' for powers", pos, text)
        if ch == "^":
            out.append("**")
            where.extend([pos, pos])
        else:
            out.append(ch)
            where.append(pos)
    where.append(len(text))
    return "".join(out), where


@dataclass(frozen=True)
class Expression:
    """A parsed expression in the variables ``variables``."""

    text: str
    variables: tuple
    tree: ast.Expression
    offsets: tuple

    def __call__(self, *args, **kwargs):
        env = dict(CONSTANTS)
        if args:
            if len(args) != len(self.variables):
                raise TypeError(f"expected {len(self.variables)} arguments, got {len(args)}")
            env.update(zip(self.variables, args))
        env.update(kwargs)
        with np.errstate(all="ignore"):
            return self._eval(self.tree.body, env)

    def at_points(self, x):
        """Evaluate on an array of shape (..., d) whose last axis is x1..xd."""
        x = np.asarray(x, dtype=float)
        return self(*[x[..., k] for k in range(x.shape[-1])])

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](self._eval(node.args[0], env))
        raise AssertionError(type(node).__name__)  # excluded by _check


def _check(node, text, offsets, variables):
    def fail(msg, n):
        col = getattr(n, "col_offset", 0)
        raise ExpressionError(msg, offsets[min(col, len(offsets) - 1)], text)

    for n in ast.walk(node):
        if isinstance(n, (ast.Expression, ast.Load)) or type(n) in _BINOPS or type(n) in _UNARY:
            continue
        if isinstance(n, ast.Constant):
            if isinstance(n.value, bool) or not isinstance(n.value, (int, float)):
                fail("only real number literals are allowed", n)
        elif isinstance(n, ast.Name):
            if n.id in FUNCTIONS:
                continue  # checked through its Call node
            if n.id not in variables and n.id not in CONSTANTS:
                fail(f"unknown name '{n.id}' (allowed: {', '.join(variables + tuple(CONSTANTS))})", n)
        elif isinstance(n, ast.BinOp):
            if type(n.op) not in _BINOPS:
                fail("unsupported operator", n)
        elif isinstance(n, ast.UnaryOp):
            if type(n.op) not in _UNARY:
                fail("unsupported unary operator", n)
        elif isinstance(n, ast.Call):
            if not isinstance(n.func, ast.Name) or n.func.id not in FUNCTIONS:
                fail(f"unknown function (allowed: {', '.join(FUNCTIONS)})", n)
            if len(n.args) != 1 or n.keywords:
                fail(f"{n.func.id} takes exactly one argument", n)
        else:
            fail(f"unsupported syntax ({type(n).__name__})", n)
    for n in ast.walk(node):
        if isinstance(n, ast.Name) and n.id in FUNCTIONS:
            parents = [p for p in ast.walk(node) if isinstance(p, ast.Call) and p.func is n]
            if not parents:
                fail(f"function '{n.id}' used without arguments", n)


def parse(text: str, variables) -> Expression:
    """Parse ``text`` with the given variable names; errors carry a 0-based position."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 0, text if isinstance(text, str) else "")
    variables = tuple(variables)
    for pos, ch in enumerate(text):
        if not _ALLOWED_CHARS.fullmatch(ch):
            raise ExpressionError(f"unexpected character {ch!r}", pos, text)
    src, offsets = _translate(text)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        col = (exc.offset or 1) - 1
        raise ExpressionError("syntax error", offsets[min(max(col, 0), len(offsets) - 1)], text) from None
    _check(tree, text, offsets, variables)
    return Expression(text, variables, tree, tuple(offsets))


def coordinate_names(d: int) -> tuple:
    return tuple(f"x{k + 1}" for k in range(d))


def parse_potential(text: str, d: int) -> Expression:
    """An expression in x1..xd."""
    return parse(text, coordinate_names(d))


def parse_component(text: str) -> Expression:
    """A one-dimensional expression in ``y``."""
    return parse(text, ("y",))
