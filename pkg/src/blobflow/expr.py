"""A tiny arithmetic expression language for custom energy densities.

Grammar: the variable ``x``, numeric constants, ``+ - * / ^`` (``**`` is
accepted as a synonym for ``^``), unary minus and the functions ``log`` and
``exp``.  Expressions compile to vectorised numpy callables.
"""
from __future__ import annotations

import ast
import operator
from typing import Callable

import numpy as np

from .errors import ConfigError

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_FUNCS = {"log": np.log, "exp": np.exp}


def _build(node: ast.AST) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(node, ast.Expression):
        return _build(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda x: np.full_like(x, c)
    if isinstance(node, ast.Name):
        if node.id != "x":
            raise ConfigError(f"unknown variable {node.id!r}; only 'x' is allowed")
        return lambda x: x
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        op = _BINARY[type(node.op)]
        left, right = _build(node.left), _build(node.right)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one argument")
        fn, arg = _FUNCS[node.func.id], _build(node.args[0])
        return lambda x: fn(arg(x))
    raise ConfigError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")


def compile_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Parse ``text`` and return a function of a float array ``x``.

    >>> f = compile_expression("x^2 + 2*log(x)")
    >>> float(f(np.asarray(1.0)))
    1.0
    """
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("expression must be a non-empty string")
    try:
        # '^' is rewritten so that it binds like exponentiation, not xor
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    fn = _build(tree)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.asarray(fn(x), dtype=float)

    evaluate.source = text
    return evaluate
