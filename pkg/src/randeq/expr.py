"""Drift functions from configuration, without loading code.

A drift is given either as a list of component formulas in the variables
``x0, x1, ...`` (``x`` is accepted when n == 1), or as an affine map::

    drift: ["-x0 - x0**3", "-x1 - x1**3"]
    drift: {affine: {matrix: [[0.25]], offset: [0.5]}}

Formulas may use ``+ - * /``, powers with a constant exponent, numeric
constants and the functions ``sin cos tanh exp``.  Anything else is
rejected at parse time.  Evaluation works on a single state of shape (n,)
or a batch of shape (N, n).
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

import numpy as np

from .expm import rowmat

__all__ = ["ExpressionError", "Formula", "VectorField", "Affine", "compile_field"]

_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "exp": np.exp}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide}


class ExpressionError(ValueError):
    pass


def _constant(node) -> float | None:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _constant(node.operand)
        if v is not None:
            return -v if isinstance(node.op, ast.USub) else v
    return None


class Formula:
    """One scalar component, compiled to a closure over numpy ufuncs."""

    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        self._fn = self._build(tree.body)

    def _var(self, name: str):
        if name == "x" and self.n == 1:
            i = 0
        elif name.startswith("x") and name[1:].isdigit():
            i = int(name[1:])
            if i >= self.n:
                raise ExpressionError(f"{self.text!r}: variable {name} out of range for n={self.n}")
        else:
            raise ExpressionError(f"{self.text!r}: unknown name {name!r}")
        return lambda x: x[..., i]

    def _build(self, node):
        c = _constant(node)
        if c is not None:
            return lambda x: np.full(x.shape[:-1], c)
        if isinstance(node, ast.Name):
            return self._var(node.id)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = self._build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda x: np.negative(inner(x))
            return inner
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                p = _constant(node.right)
                if p is None:
                    raise ExpressionError(f"{self.text!r}: exponent must be a constant")
                base = self._build(node.left)
                if p == int(p) and p >= 0:
                    k = int(p)
                    return lambda x: _ipow(base(x), k)
                return lambda x: np.power(base(x), p)
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ExpressionError(f"{self.text!r}: operator {type(node.op).__name__} not allowed")
            left, right = self._build(node.left), self._build(node.right)
            return lambda x: op(left(x), right(x))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError(f"{self.text!r}: only {sorted(_FUNCS)} may be called")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{self.text!r}: {node.func.id} takes one argument")
            fn, arg = _FUNCS[node.func.id], self._build(node.args[0])
            return lambda x: fn(arg(x))
        raise ExpressionError(f"{self.text!r}: unsupported syntax {type(node).__name__}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._fn(x)


def _ipow(v, k):
    # repeated multiplication keeps integer powers exact where numpy's pow may not be
    out = np.ones_like(v)
    for _ in range(k):
        out = out * v
    return out


@dataclass(frozen=True)
class VectorField:
    """Componentwise formulas R^n -> R^n."""

    components: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_compiled", [Formula(c, len(self.components)) for c in self.components])

    @property
    def n(self) -> int:
        return len(self.components)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([f(x) for f in self._compiled], axis=-1)

    def describe(self) -> str:
        return "[" + ", ".join(self.components) + "]"


@dataclass(frozen=True)
class Affine:
    """``x -> M x + b``."""

    matrix: np.ndarray
    offset: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return rowmat(x, self.matrix) + self.offset

    def describe(self) -> str:
        return f"affine(M={self.matrix.tolist()}, b={self.offset.tolist()})"


def compile_field(node, n: int):
    """Build a vector field from a config node (list of formulas or ``{affine: ...}``)."""
    if isinstance(node, str):
        node = [node]
    if isinstance(node, (list, tuple)):
        if len(node) != n:
            raise ExpressionError(f"drift has {len(node)} components, state dimension is {n}")
        return VectorField(tuple(str(c) for c in node))
    if isinstance(node, dict) and set(node) == {"affine"}:
        spec = node["affine"]
        M = np.atleast_2d(np.asarray(spec.get("matrix", np.zeros((n, n))), dtype=float))
        b = np.asarray(spec.get("offset", np.zeros(n)), dtype=float).reshape(-1)
        if M.shape != (n, n) or b.shape != (n,):
            raise ExpressionError(f"affine drift needs a {n}x{n} matrix and length-{n} offset")
        return Affine(M, b)
    raise ExpressionError(f"cannot build a drift from {node!r}")
