"""Small arithmetic expressions over chart coordinates.

Used by the command line to describe Hamiltonians and central actions
without writing Python.  The grammar is Python's expression syntax
restricted to numbers, the operators ``+ - * / **``, parentheses, the
functions in :data:`FUNCTIONS` and the names in :data:`CONSTANTS` plus
the coordinate names of the space and the time ``t``.

>>> f = compile_expression("-cos(theta)", "sphere")
>>> float(f(np.array([0.0, 0.0, 1.0])))
-1.0
"""

from __future__ import annotations

import ast

import numpy as np

from . import spaces as sp
from .errors import InvalidSpec

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "asin": np.arcsin,
    "acos": np.arccos,
    "atan": np.arctan,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_UNARY = {ast.USub: np.negative, ast.UAdd: np.positive}


def coordinate_names(space):
    """Names usable in expressions on ``space`` (besides ``t``)."""
    space = sp.get_space(space)
    if space in (sp.PLANE, sp.TORUS):
        return ("p", "q")
    if space is sp.SPHERE:
        return ("theta", "phi", "x", "y", "z")
    return ("rho", "phi", "x", "y", "z")


def _coordinates(space, m):
    if space in (sp.PLANE, sp.TORUS):
        return {"p": m[..., 0], "q": m[..., 1]}
    a, b = space.to_chart(m)
    first = "theta" if space is sp.SPHERE else "rho"
    return {first: a, "phi": b, "x": m[..., 0], "y": m[..., 1], "z": m[..., 2]}


class _Checker(ast.NodeVisitor):
    def __init__(self, names):
        self.names = names

    def generic_visit(self, node):
        raise InvalidSpec(f"unsupported syntax in expression: {type(node).__name__}")

    def visit_Expression(self, node):
        self.visit(node.body)

    def visit_Constant(self, node):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise InvalidSpec(f"unsupported literal {node.value!r}")

    def visit_Name(self, node):
        if node.id not in self.names and node.id not in CONSTANTS:
            raise InvalidSpec(f"unknown name {node.id!r}; allowed: {sorted(self.names) + sorted(CONSTANTS)}")

    def visit_BinOp(self, node):
        if type(node.op) not in _BINOPS:
            raise InvalidSpec(f"unsupported operator {type(node.op).__name__}")
        self.visit(node.left)
        self.visit(node.right)

    def visit_UnaryOp(self, node):
        if type(node.op) not in _UNARY:
            raise InvalidSpec(f"unsupported operator {type(node.op).__name__}")
        self.visit(node.operand)

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise InvalidSpec("only the functions " + ", ".join(sorted(FUNCTIONS)) + " may be called")
        if node.keywords or len(node.args) != 1:
            raise InvalidSpec(f"{node.func.id} takes exactly one argument")
        self.visit(node.args[0])


def _evaluate(node, env):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_evaluate(node.left, env), _evaluate(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_evaluate(node.operand, env))
    return FUNCTIONS[node.func.id](_evaluate(node.args[0], env))


class Expression:
    """A parsed expression, callable as ``expr(m, t=0.0)`` on points of ``space``."""

    def __init__(self, text, space):
        self.text = str(text)
        self.space = sp.get_space(space)
        try:
            self._tree = ast.parse(self.text.strip(), mode="eval")
        except SyntaxError as exc:
            raise InvalidSpec(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        names = set(coordinate_names(self.space)) | {"t"}
        _Checker(names).visit(self._tree)
        self.uses_time = any(isinstance(n, ast.Name) and n.id == "t" for n in ast.walk(self._tree))

    def __repr__(self):
        return f"Expression({self.text!r}, {self.space.name})"

    def __call__(self, m, t=0.0):
        m = np.asarray(m, dtype=float)
        env = _coordinates(self.space, m)
        env["t"] = float(t)
        with np.errstate(all="ignore"):
            out = _evaluate(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), m.shape[:-1]).copy()


def compile_expression(text, space):
    return Expression(text, space)
