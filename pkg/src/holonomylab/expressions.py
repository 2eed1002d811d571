"""Tiny arithmetic expression language.

Norms, vector fields, and curves can be given on the command line or in config
files as strings like ``"sqrt(y1^2 + sin(x1)^2 * y2^2)"``.  We parse them with
the stdlib ``ast`` module against a strict whitelist: binary ``+ - * / ^``,
unary minus, parentheses, the functions sqrt/sin/cos/exp/log, the constant
``pi``, numeric literals, and exactly the variable names declared by the
caller.  Anything else is rejected, so config files cannot smuggle in
attribute access or calls.

Evaluation is generic over the operand type: floats, numpy arrays, and jets
all work because only arithmetic dunders and the five named functions are
ever applied.
"""

from __future__ import annotations

import ast
import math
import numbers

import numpy as np

from .jets import Jet

__all__ = ["Expression", "ExpressionError", "parse_expression"]

_FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}


class ExpressionError(ValueError):
    """Raised for syntax the mini-language does not accept."""


def _apply_function(name: str, value):
    if isinstance(value, Jet):
        return getattr(value, name)()
    return getattr(np, name)(value)


class Expression:
    """A parsed expression over a fixed tuple of variable names.

    Call with positional values in declaration order, or use `evaluate` with
    a name-to-value mapping.  Values may be numbers, arrays, or jets.
    """

    def __init__(self, text: str, variables: tuple[str, ...], tree: ast.expr):
        self.text = text
        self.variables = variables
        self._tree = tree

    def __repr__(self):
        return f"Expression({self.text!r}, variables={self.variables})"

    def evaluate(self, env: dict):
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise ExpressionError(f"missing values for {missing}")
        return self._eval(self._tree, env)

    def __call__(self, *values):
        if len(values) != len(self.variables):
            raise ExpressionError(
                f"expected {len(self.variables)} values for {self.variables}, got {len(values)}"
            )
        return self._eval(self._tree, dict(zip(self.variables, values)))

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            kind = type(node.op)
            if kind in _BINOPS:
                return _BINOPS[kind](self._eval(node.left, env), self._eval(node.right, env))
            if kind is ast.Pow:
                base = self._eval(node.left, env)
                exponent = self._eval(node.right, env)
                if isinstance(exponent, Jet):
                    raise ExpressionError("exponents must be numbers, not expressions in variables")
                return base ** exponent
            raise ExpressionError(f"operator {kind.__name__} is not allowed")
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -self._eval(node.operand, env)
            if isinstance(node.op, ast.UAdd):
                return self._eval(node.operand, env)
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return math.pi
            return env[node.id]
        if isinstance(node, ast.Call):
            return _apply_function(node.func.id, self._eval(node.args[0], env))
        raise ExpressionError(f"node {type(node).__name__} is not allowed")


def _validate(node, variables: tuple[str, ...]) -> None:
    # names acting as function heads are checked by the Call branch, not as variables
    heads = {
        id(sub.func)
        for sub in ast.walk(node)
        if isinstance(sub, ast.Call) and isinstance(sub.func, ast.Name)
    }
    for sub in ast.walk(node):
        if isinstance(sub, (ast.Expression, ast.Load)):
            continue
        elif isinstance(sub, ast.BinOp):
            if type(sub.op) not in (*_BINOPS, ast.Pow):
                raise ExpressionError(f"operator {type(sub.op).__name__} is not allowed")
        elif isinstance(sub, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)):
            continue
        elif isinstance(sub, ast.UnaryOp):
            if not isinstance(sub.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"operator {type(sub.op).__name__} is not allowed")
        elif isinstance(sub, ast.Constant):
            if not isinstance(sub.value, numbers.Real) or isinstance(sub.value, bool):
                raise ExpressionError(f"literal {sub.value!r} is not a number")
        elif isinstance(sub, ast.Name):
            if id(sub) in heads:
                continue
            if sub.id != "pi" and sub.id not in variables:
                raise ExpressionError(
                    f"unknown name {sub.id!r}; allowed: {', '.join(variables)} and pi"
                )
        elif isinstance(sub, ast.Call):
            if not isinstance(sub.func, ast.Name) or sub.func.id not in _FUNCTIONS:
                raise ExpressionError(
                    f"only {', '.join(_FUNCTIONS)} may be called"
                )
            if len(sub.args) != 1 or sub.keywords:
                raise ExpressionError(f"{sub.func.id} takes exactly one argument")
        else:
            raise ExpressionError(f"syntax {type(sub).__name__} is not allowed")


def parse_expression(text: str, variables) -> Expression:
    """Parse `text` into an Expression over exactly `variables`.

    `^` is accepted as a synonym for exponentiation.  Raises ExpressionError
    for malformed input, names outside `variables` (plus `pi`), calls to
    anything but sqrt/sin/cos/exp/log, and non-numeric literals.
    """
    variables = tuple(variables)
    seen = set()
    for v in variables:
        if not v.isidentifier() or v in seen or v == "pi" or v in _FUNCTIONS:
            raise ExpressionError(f"bad variable name {v!r}")
        seen.add(v)
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _validate(tree, variables)
    return Expression(text, variables, tree.body)
