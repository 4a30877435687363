"""Minimal scalar reverse-mode automatic differentiation.

Expressions are built symbolically as acyclic graphs of :class:`Node` objects
owned by a :class:`Graph`; a forward pass binds input values and evaluates
every node, a backward pass accumulates gradients by reverse traversal.
Graphs are cheap and are meant to be rebuilt per batch rather than reused as
tapes.  A graph instance is single-threaded during forward/backward; distinct
instances are independent.

The op set is deliberately tiny: const, input, add, mul, neg, exp, log,
log1p, logsigmoid, and n-ary sum.  That is exactly enough to express every
loss family in :mod:`prefalign.losses` plus tabular softmax log-probabilities,
with logsigmoid kept primitive for numerical stability in both passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

from .losses import DomainError, Family, LossParams
from .losses import sigmoid as _sigmoid
from .losses import logsigmoid as _logsigmoid

__all__ = [
    "Node",
    "Graph",
    "GraphError",
    "exp",
    "log",
    "log1p",
    "logsigmoid",
    "nsum",
    "log_odds_expr",
    "align_loss_expr",
    "loss_graph",
    "GradEntry",
    "GradReport",
    "grad_check",
]

OPS = ("const", "input", "add", "mul", "neg", "exp", "log", "log1p", "logsigmoid", "sum")


class GraphError(RuntimeError):
    """Graph used out of order (e.g. backward before forward)."""


class Node:
    """One scalar operation in an expression graph."""

    __slots__ = ("graph", "index", "op", "operands", "value", "grad", "name")

    def __init__(
        self,
        graph: "Graph",
        index: int,
        op: str,
        operands: Tuple["Node", ...] = (),
        name: Optional[str] = None,
        value: Optional[float] = None,
    ) -> None:
        self.graph = graph
        self.index = index
        self.op = op
        self.operands = operands
        self.name = name
        self.value = value  # set by forward (fixed at build time for const)
        self.grad = 0.0  # set by backward

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<node #{self.index} {self.op}{label}>"

    def _lift(self, other) -> "Node":
        if isinstance(other, Node):
            if other.graph is not self.graph:
                raise GraphError("cannot mix nodes from different graphs")
            return other
        return self.graph.const(float(other))

    def __add__(self, other) -> "Node":
        return self.graph._add_node("add", (self, self._lift(other)))

    __radd__ = __add__

    def __neg__(self) -> "Node":
        return self.graph._add_node("neg", (self,))

    def __sub__(self, other) -> "Node":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Node":
        return self._lift(other) + (-self)

    def __mul__(self, other) -> "Node":
        return self.graph._add_node("mul", (self, self._lift(other)))

    __rmul__ = __mul__


class Graph:
    """An expression graph: nodes in construction (hence topological) order."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.inputs: Dict[str, Node] = {}
        self.output: Optional[Node] = None
        self._forward_done = False

    def _add_node(self, op, operands=(), name=None, value=None) -> Node:
        node = Node(self, len(self.nodes), op, tuple(operands), name, value)
        self.nodes.append(node)
        self._forward_done = False
        return node

    def var(self, name: str) -> Node:
        """Register a named input node."""
        if name in self.inputs:
            raise GraphError(f"duplicate input name {name!r}")
        node = self._add_node("input", name=name)
        self.inputs[name] = node
        return node

    def const(self, value: float) -> Node:
        return self._add_node("const", value=float(value))

    def set_output(self, node: Node) -> None:
        if node.graph is not self:
            raise GraphError("output node belongs to a different graph")
        self.output = node

    def forward(self, inputs: Mapping[str, float]) -> float:
        """Bind input values, evaluate every node, return the output value."""
        if self.output is None:
            raise GraphError("no output node set")
        unknown = set(inputs) - set(self.inputs)
        if unknown:
            raise ValueError(f"unknown input name(s): {sorted(unknown)}")
        missing = set(self.inputs) - set(inputs)
        if missing:
            raise ValueError(f"unbound input(s): {sorted(missing)}")
        for node in self.nodes:
            op = node.op
            if op == "const":
                pass
            elif op == "input":
                node.value = float(inputs[node.name])
            elif op == "add":
                node.value = node.operands[0].value + node.operands[1].value
            elif op == "mul":
                node.value = node.operands[0].value * node.operands[1].value
            elif op == "neg":
                node.value = -node.operands[0].value
            elif op == "exp":
                try:
                    node.value = math.exp(node.operands[0].value)
                except OverflowError:
                    raise DomainError(f"exp overflow at {node!r}") from None
            elif op == "log":
                v = node.operands[0].value
                if v <= 0.0:
                    raise DomainError(f"log of non-positive value {v!r} at {node!r}")
                node.value = math.log(v)
            elif op == "log1p":
                v = node.operands[0].value
                if v <= -1.0:
                    raise DomainError(f"log1p of value {v!r} <= -1 at {node!r}")
                node.value = math.log1p(v)
            elif op == "logsigmoid":
                node.value = _logsigmoid(node.operands[0].value)
            elif op == "sum":
                node.value = math.fsum(operand.value for operand in node.operands)
            else:  # pragma: no cover - construction guards op names
                raise GraphError(f"unknown op {op!r}")
        self._forward_done = True
        return self.output.value

    def backward(self) -> Dict[str, float]:
        """Reverse-mode gradient accumulation; returns gradients per input."""
        if not self._forward_done:
            raise GraphError("backward() requires a completed forward() pass")
        for node in self.nodes:
            node.grad = 0.0
        self.output.grad = 1.0
        for node in reversed(self.nodes):
            g = node.grad
            if g == 0.0:
                continue
            op = node.op
            if op == "add":
                a, b = node.operands
                a.grad += g
                b.grad += g
            elif op == "mul":
                a, b = node.operands
                a.grad += g * b.value
                b.grad += g * a.value
            elif op == "neg":
                node.operands[0].grad -= g
            elif op == "exp":
                node.operands[0].grad += g * node.value
            elif op == "log":
                node.operands[0].grad += g / node.operands[0].value
            elif op == "log1p":
                node.operands[0].grad += g / (1.0 + node.operands[0].value)
            elif op == "logsigmoid":
                node.operands[0].grad += g * _sigmoid(-node.operands[0].value)
            elif op == "sum":
                for operand in node.operands:
                    operand.grad += g
        return {name: node.grad for name, node in self.inputs.items()}


def _unary(op: str, x: Node) -> Node:
    return x.graph._add_node(op, (x,))


def exp(x: Node) -> Node:
    return _unary("exp", x)


def log(x: Node) -> Node:
    return _unary("log", x)


def log1p(x: Node) -> Node:
    return _unary("log1p", x)


def logsigmoid(x: Node) -> Node:
    return _unary("logsigmoid", x)


def nsum(terms: Iterable[Node]) -> Node:
    """N-ary sum node."""
    terms = tuple(terms)
    if not terms:
        raise GraphError("nsum needs at least one term")
    return terms[0].graph._add_node("sum", terms)


def log_odds_expr(logp: Node) -> Node:
    """Graph expression for log(p / (1 - p)) given logp: logp - log1p(-exp(logp))."""
    return logp - log1p(-exp(logp))


def align_loss_expr(logp_w: Node, logp_l: Node) -> Node:
    """Graph expression for the absolute-likelihood alignment loss."""
    return -logsigmoid(log_odds_expr(logp_w)) - logsigmoid(-log_odds_expr(logp_l))


def loss_graph(params: LossParams) -> Graph:
    """Build the selected loss family as a graph over named logp inputs.

    Inputs are ``logp_w`` and ``logp_l``; the reference-dependent families add
    ``ref_logp_w`` and ``ref_logp_l``.
    """
    g = Graph()
    lw = g.var("logp_w")
    ll = g.var("logp_l")
    family = params.family
    if family is Family.SFT:
        out = -lw
    elif family is Family.ASFT:
        out = -lw + params.beta * align_loss_expr(lw, ll)
    elif family is Family.BT:
        out = -logsigmoid(params.beta * (lw - ll))
    elif family is Family.ORPO:
        out = -lw + params.lam * (-logsigmoid(log_odds_expr(lw) - log_odds_expr(ll)))
    elif family is Family.DPO:
        rw = g.var("ref_logp_w")
        rl = g.var("ref_logp_l")
        out = -logsigmoid(params.alpha * (lw - rw) - params.alpha * (ll - rl))
    elif family is Family.IPO:
        rw = g.var("ref_logp_w")
        rl = g.var("ref_logp_l")
        d = (lw - rw) - (ll - rl) - 1.0 / (2.0 * params.tau)
        out = d * d
    else:  # pragma: no cover
        raise ValueError(f"unknown loss family: {family!r}")
    g.set_output(out)
    return g


@dataclass(frozen=True)
class GradEntry:
    """Analytic vs central-finite-difference gradient for one input."""

    name: str
    analytic: float
    numeric: float
    abs_err: float
    rel_err: float


@dataclass(frozen=True)
class GradReport:
    entries: Tuple[GradEntry, ...]

    @property
    def max_abs_err(self) -> float:
        return max(entry.abs_err for entry in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max(entry.rel_err for entry in self.entries)


def grad_check(graph: Graph, inputs: Mapping[str, float], h: float = 1e-6) -> GradReport:
    """Compare reverse-mode gradients against central finite differences.

    Inputs must sit at least ``h`` inside every domain constraint; a domain
    violation during probing propagates as :class:`DomainError`.  Relative
    error uses a ``max(1, |analytic|)`` denominator.
    """
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"h must be a positive finite step, got {h!r}")
    graph.forward(inputs)
    analytic = graph.backward()
    entries = []
    for name in graph.inputs:
        shifted = dict(inputs)
        shifted[name] = inputs[name] + h
        f_plus = graph.forward(shifted)
        shifted[name] = inputs[name] - h
        f_minus = graph.forward(shifted)
        numeric = (f_plus - f_minus) / (2.0 * h)
        abs_err = abs(analytic[name] - numeric)
        rel_err = abs_err / max(1.0, abs(analytic[name]))
        entries.append(GradEntry(name, analytic[name], numeric, abs_err, rel_err))
    # restore the unshifted evaluation so node values match `inputs` again
    graph.forward(inputs)
    graph.backward()
    return GradReport(tuple(entries))
