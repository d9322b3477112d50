"""Safe parsing of height expressions such as ``"0.2*x*(1-r^2)"``.

Only arithmetic, a handful of numpy functions, the constants ``pi`` and
``e`` and the variables ``r``, ``x``, ``y`` are accepted; ``^`` means power.
The result is a vectorised callable ``height(r, x, y)``.
"""

from __future__ import annotations

import ast
import operator

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("r", "x", "y")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


class ExpressionError(ValueError):
    pass


def _compile(node):
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id in VARIABLES:
            name = node.id
            return lambda env: env[name]
        if node.id in CONSTANTS:
            v = CONSTANTS[node.id]
            return lambda env: v
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        a, b = _compile(node.left), _compile(node.right)
        return lambda env: op(a(env), b(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        a = _compile(node.operand)
        return lambda env: op(a(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("only calls to " + ", ".join(sorted(FUNCTIONS)) + " are allowed")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        fn = FUNCTIONS[node.func.id]
        a = _compile(node.args[0])
        return lambda env: fn(a(env))
    raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def parse_height(text: str):
    """Compile ``text`` into ``height(r, x, y)``; raises :class:`ExpressionError`."""
    if not text or not text.strip():
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    fn = _compile(tree)

    def height(r, x, y):
        with np.errstate(all="ignore"):
            out = fn({"r": np.asarray(r, dtype=float), "x": np.asarray(x, dtype=float), "y": np.asarray(y, dtype=float)})
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(r))

    height.expression = text
    return height
