"""Small arithmetic grammar for truth functions on [0,1]^d.

Accepted: variables x1..xd (plain ``x`` aliases x1), numeric literals,
``+ - * /``, ``**`` or ``pow(a, b)``, ``exp`` and ``log``, parentheses.
Expressions compile to vectorised callables over (m, d) point arrays
and are picklable (only the source string is carried).
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError

_FUNCTIONS = {"exp": np.exp, "log": np.log, "pow": np.power}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _validate(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate(node.left)
        _validate(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only exp, log and pow calls are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        expected = 2 if node.func.id == "pow" else 1
        if len(node.args) != expected:
            raise ExpressionError(f"{node.func.id} takes {expected} argument(s)")
        for arg in node.args:
            _validate(arg)
    elif isinstance(node, ast.Name):
        name = node.id
        if name == "x":
            return
        if not (name.startswith("x") and name[1:].isdigit() and int(name[1:]) >= 1):
            raise ExpressionError(f"unknown name {name!r}; variables are x1..xd")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} not allowed")
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not allowed")


def _evaluate(node: ast.AST, cols: dict[str, np.ndarray]):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, cols)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](
            _evaluate(node.left, cols), _evaluate(node.right, cols)
        )
    if isinstance(node, ast.UnaryOp):
        val = _evaluate(node.operand, cols)
        return -val if isinstance(node.op, ast.USub) else +val
    if isinstance(node, ast.Call):
        args = [_evaluate(a, cols) for a in node.args]
        return _FUNCTIONS[node.func.id](*args)
    if isinstance(node, ast.Name):
        name = "x1" if node.id == "x" else node.id
        if name not in cols:
            raise ExpressionError(
                f"expression uses {node.id!r} but the design has {len(cols)} dimension(s)"
            )
        return cols[name]
    if isinstance(node, ast.Constant):
        return float(node.value)
    raise ExpressionError(f"cannot evaluate {type(node).__name__}")


@dataclass(frozen=True)
class Expression:
    """Compiled truth function; callable on (m, d) arrays of points."""

    text: str
    _tree: ast.Expression = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        source = (
            self.text.replace("−", "-").replace("·", "*").replace("^", "**")
        )
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        _validate(tree)
        object.__setattr__(self, "_tree", tree)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        cols = {f"x{k + 1}": pts[:, k] for k in range(pts.shape[1])}
        result = _evaluate(self._tree, cols)
        return np.broadcast_to(np.asarray(result, dtype=float), (pts.shape[0],)).copy()

    def __getstate__(self):
        return {"text": self.text}

    def __setstate__(self, state):
        object.__setattr__(self, "text", state["text"])
        self.__post_init__()

    def gradient(self, x0, h: float = 1e-6) -> np.ndarray:
        """Central finite-difference partial derivatives at ``x0``."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        grad = np.empty_like(x0)
        for k in range(len(x0)):
            hi = x0.copy()
            lo = x0.copy()
            hi[k] += h
            lo[k] -= h
            grad[k] = (self(hi[None, :])[0] - self(lo[None, :])[0]) / (2 * h)
        return grad
