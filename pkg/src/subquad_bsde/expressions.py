"""Tiny arithmetic expression language for custom generators and coefficients.

Grammar: + - * / ^ (power), abs(x), min(a,b), max(a,b), ln(x), exp(x),
ind(x) (1 where x > 0 else 0), numeric literals, and a caller-supplied set of
variable names.  Parsed through Python's ast with a strict node whitelist, so
no attribute access, calls to arbitrary names, or statements can sneak in.
"""

from __future__ import annotations

import ast

import numpy as np

_FUNCTIONS = {
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "ln": np.log,
    "exp": np.exp,
    "ind": lambda x: (np.asarray(x) > 0).astype(float),
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _compile_node(node, variables):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, variables)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed, got {node.value!r}")
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        if node.id not in variables:
            raise ExpressionError(f"unknown variable {node.id!r} (have {sorted(variables)})")
        name = node.id
        return lambda env: env[name]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile_node(node.operand, variables)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _compile_node(node.left, variables)
        right = _compile_node(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only abs/min/max/ln/exp/ind calls are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        fn = _FUNCTIONS[node.func.id]
        args = [_compile_node(a, variables) for a in node.args]
        expected = 2 if node.func.id in ("min", "max") else 1
        if len(args) != expected:
            raise ExpressionError(f"{node.func.id} takes {expected} argument(s)")
        return lambda env: fn(*(a(env) for a in args))
    raise ExpressionError(f"disallowed syntax: {ast.dump(node)}")


def compile_expression(text: str, variables):
    """Compile ``text`` into a function env-dict -> ndarray/scalar.

    ``variables`` is the set of names the expression may reference; the
    returned callable expects an env mapping each used name to a value.
    """
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from None
    return _compile_node(tree, frozenset(variables))


def compile_time_function(text: str):
    """Compile an expression of the single variable t into a plain callable."""
    fn = compile_expression(text, {"t"})
    return lambda t: fn({"t": t})
