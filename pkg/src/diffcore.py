# -*- coding: utf-8 -*-
"""
Reverse-mode differentiation over dense float64 arrays of rank <= 2.

Every op returns a new Tensor; when gradients are enabled and an input
requires them, the result remembers its parents and a closure mapping the
output gradient to one gradient per parent. `backward` walks that graph once
in reverse topological order.
"""

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ContractError, DimensionError, NumericError

log = logging.getLogger(__name__)

DTYPE = np.float64
MASK_FILL_VALUE = -1e30

_grad_mode = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad():
    """Builds no graph inside the block (per thread); used for inference and finite differences."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "op", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None, op: str = "leaf"):
        value = np.asarray(value, dtype=DTYPE)
        if value.ndim > 2:
            raise DimensionError(f"Tensor rank {value.ndim} > 2 is not supported")
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.parents: Tuple["Tensor", ...] = ()
        self.backward_fn: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self.op = op
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(op={self.op}{label}, shape={self.shape})"

    # Operator sugar for the common cases
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence[float]]


def as_tensor(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, name: Optional[str] = None) -> Tensor:
    return Tensor(np.array(value, dtype=DTYPE), requires_grad=True, name=name)


def _result(op: str, value: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"Non-finite value produced by op '{op}'")
    out = Tensor(value, op=op)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not compatible")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- Forward ops ---

def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a.value, b.value)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.value + b.value, (a, b), backward)


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ContractError("add_n needs at least one tensor")
    tensors = [as_tensor(t) for t in tensors]
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise DimensionError(f"add_n: shape {t.shape} differs from {shape}")
    value = tensors[0].value.copy()
    for t in tensors[1:]:
        value = value + t.value

    def backward(g):
        return tuple(g for _ in tensors)

    return _result("add_n", value, tensors, backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a.value, b.value)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.value - b.value, (a, b), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a.value, b.value)

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _result("mul", a.value * b.value, (a, b), backward)


def scalar_mul(a: TensorLike, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def backward(g):
        return (g * c,)

    return _result("scalar_mul", a.value * c, (a,), backward)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = np.matmul(a.value, b.value)
    except ValueError:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    av, bv = a.value, b.value

    def backward(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _result("matmul", np.asarray(value, dtype=DTYPE), (a, b), backward)


def concat(tensors: Sequence[TensorLike]) -> Tensor:
    """Concatenates vectors end to end."""
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors:
        if t.value.ndim != 1:
            raise DimensionError(f"concat expects vectors, got shape {t.shape}")
    sizes = [t.shape[0] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(tensors)))

    return _result("concat", np.concatenate([t.value for t in tensors]), tensors, backward)


def stack(tensors: Sequence[TensorLike]) -> Tensor:
    """Stacks equal-length vectors as the rows of a matrix."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("stack needs at least one vector")
    width = tensors[0].shape
    for t in tensors:
        if t.value.ndim != 1 or t.shape != width:
            raise DimensionError(f"stack expects vectors of shape {width}, got {t.shape}")

    def backward(g):
        return tuple(g[i] for i in range(len(tensors)))

    return _result("stack", np.stack([t.value for t in tensors]), tensors, backward)


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)

    def backward(g):
        return (g * (1.0 - y * y),)

    return _result("tanh", y, (a,), backward)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    y = _stable_sigmoid(np.atleast_1d(a.value)).reshape(a.shape)

    def backward(g):
        return (g * y * (1.0 - y),)

    return _result("sigmoid", y, (a,), backward)


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        y = np.exp(a.value)

    def backward(g):
        return (g * y,)

    return _result("exp", y, (a,), backward)


def _softmax_values(x: np.ndarray) -> np.ndarray:
    shifted = np.exp(x - x.max())
    return shifted / shifted.sum()


def softmax(a: TensorLike) -> Tensor:
    """Softmax of a vector, computed with max-subtraction."""
    a = as_tensor(a)
    if a.value.ndim != 1:
        raise DimensionError(f"softmax expects a vector, got shape {a.shape}")
    y = _softmax_values(a.value)

    def backward(g):
        return (y * (g - np.dot(g, y)),)

    return _result("softmax", y, (a,), backward)


def masked_fill(a: TensorLike, positions, value: float = MASK_FILL_VALUE) -> Tensor:
    """Replaces entries where `positions` is True by a constant; those entries get no gradient."""
    a = as_tensor(a)
    positions = np.asarray(positions, dtype=bool)
    if positions.shape != a.shape:
        raise DimensionError(f"masked_fill: mask shape {positions.shape} differs from {a.shape}")
    out = np.where(positions, DTYPE(value), a.value)

    def backward(g):
        return (np.where(positions, 0.0, g),)

    return _result("masked_fill", out, (a,), backward)


def embedding_lookup(table: Tensor, index: int) -> Tensor:
    if table.value.ndim != 2:
        raise DimensionError(f"embedding table must be a matrix, got shape {table.shape}")
    rows = table.shape[0]
    if not 0 <= index < rows:
        raise DimensionError(f"embedding index {index} outside table of {rows} rows")

    def backward(g):
        full = np.zeros_like(table.value)
        full[index] = g
        return (full,)

    return _result("embedding_lookup", table.value[index].copy(), (table,), backward)


def dropout(a: TensorLike, p: float, rng: Optional[np.random.Generator], train: bool = True) -> Tensor:
    """Inverted dropout; identity when p == 0 or outside training."""
    a = as_tensor(a)
    if not train or p <= 0.0:
        return a
    if rng is None:
        raise ContractError("dropout with p > 0 needs a random generator")
    keep = (rng.random(a.shape) >= p).astype(DTYPE) / (1.0 - p)

    def backward(g):
        return (g * keep,)

    return _result("dropout", a.value * keep, (a,), backward)


def sum_all(a: TensorLike) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (np.full(a.shape, g, dtype=DTYPE),)

    return _result("sum", np.asarray(a.value.sum(), dtype=DTYPE), (a,), backward)


def dot(a: TensorLike, b: TensorLike) -> Tensor:
    return matmul(a, b)


def cross_entropy(logits: TensorLike, target: int) -> Tensor:
    """Negative log-probability of `target` under softmax(logits)."""
    logits = as_tensor(logits)
    if logits.value.ndim != 1:
        raise DimensionError(f"cross_entropy expects a vector of logits, got shape {logits.shape}")
    if not 0 <= target < logits.shape[0]:
        raise DimensionError(f"target {target} outside {logits.shape[0]} classes")
    z = logits.value
    m = z.max()
    log_norm = m + np.log(np.exp(z - m).sum())
    probs = np.exp(z - log_norm)

    def backward(g):
        grad = probs.copy()
        grad[target] -= 1.0
        return (g * grad,)

    return _result("cross_entropy", np.asarray(log_norm - z[target], dtype=DTYPE), (logits,), backward)


def log_softmax_values(logits: np.ndarray) -> np.ndarray:
    """Plain numpy log-softmax used at inference time."""
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))


# --- Backward ---

def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> Dict[str, np.ndarray]:
    """Accumulates d(loss)/d(node) into every node's `.grad`; returns gradients of named leaves."""
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    order = _topological_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        parent_grads = node.backward_fn(node.grad)
        for parent, g in zip(node.parents, parent_grads):
            if g is None or not parent.requires_grad:
                continue
            g = np.asarray(g, dtype=DTYPE).reshape(parent.shape)
            parent.grad = g.copy() if parent.grad is None else parent.grad + g
    gradients: Dict[str, np.ndarray] = {}
    for node in order:
        if node.backward_fn is None and node.name is not None:
            gradients[node.name] = node.grad if node.grad is not None else np.zeros_like(node.value)
    return gradients


# --- Gradient checking ---

def grad_check(
    builder: Callable[[Dict[str, Tensor]], Tensor],
    inputs: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Max relative error between analytic gradients and central differences.

    `builder` maps named parameters to a scalar loss. With `max_coords`, each
    parameter is checked on at most that many randomly chosen coordinates.
    """
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    base = {name: np.array(value, dtype=DTYPE) for name, value in inputs.items()}
    params = {name: parameter(value, name=name) for name, value in base.items()}
    loss = builder(params)
    analytic = backward(loss)

    def evaluate(values: Dict[str, np.ndarray]) -> float:
        with no_grad():
            result = builder({name: Tensor(v, name=name) for name, v in values.items()}).item()
        if not np.isfinite(result):
            raise NumericError("Non-finite loss during finite differences")
        return result

    worst = 0.0
    worst_at = None
    for name, value in base.items():
        grad = analytic.get(name, np.zeros_like(value))
        coords = list(np.ndindex(value.shape)) if value.ndim else [()]
        if max_coords is not None and len(coords) > max_coords:
            picker = rng if rng is not None else np.random.default_rng(0)
            chosen = picker.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(chosen)]
        for idx in coords:
            plus = dict(base)
            minus = dict(base)
            plus[name] = value.copy()
            minus[name] = value.copy()
            plus[name][idx] += eps
            minus[name][idx] -= eps
            numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * eps)
            a = float(grad[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst:
                worst, worst_at = err, (name, idx, a, numeric)
    if worst_at is not None:
        log.debug("Worst gradient coordinate %s%s: analytic=%.6e numeric=%.6e", worst_at[0], worst_at[1], worst_at[2], worst_at[3])
    return worst


# --- ADADELTA ---

@dataclass
class AdadeltaState:
    rho: float = 0.95
    eps: float = 1e-6
    avg_sq_grad: Dict[str, np.ndarray] = field(default_factory=dict)
    avg_sq_update: Dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: Mapping[str, np.ndarray]) -> "AdadeltaState":
        for name, value in params.items():
            if name not in self.avg_sq_grad:
                self.avg_sq_grad[name] = np.zeros_like(value, dtype=DTYPE)
                self.avg_sq_update[name] = np.zeros_like(value, dtype=DTYPE)
        return self


def adadelta_step(
    params: Dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdadeltaState,
    rho: Optional[float] = None,
    eps: Optional[float] = None,
    lr: float = 1.0,
) -> Tuple[Dict[str, np.ndarray], AdadeltaState]:
    """One ADADELTA update, in place. Parameters without a gradient see a zero gradient."""
    rho = state.rho if rho is None else rho
    eps = state.eps if eps is None else eps
    state.ensure(params)
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        elif g.shape != value.shape:
            raise DimensionError(f"Gradient for {name} has shape {g.shape}, parameter has {value.shape}")
        eg = state.avg_sq_grad[name]
        ex = state.avg_sq_update[name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        update = -np.sqrt(ex + eps) / np.sqrt(eg + eps) * g
        ex *= rho
        ex += (1.0 - rho) * update * update
        value += lr * update
    return params, state
