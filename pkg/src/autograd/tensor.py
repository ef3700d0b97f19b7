"""
Dense tensors with define-by-run reverse-mode differentiation.

Every differentiable operation returns a new Tensor that remembers its parent
tensors and a closure mapping the output gradient to one gradient per parent.
`backward(loss)` orders the recorded operations topologically (a `Graph`) and
walks them once in reverse, accumulating gradients additively.

Gradient tracking is per thread: `no_grad()` only affects the calling thread,
so read-only evaluation can share parameters across worker threads.
"""
import logging
import threading
from contextlib import contextmanager

import numpy as np

from ..utils.exceptions import ContractError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

DTYPES = {'float64': np.float64, 'float32': np.float32}

_default_dtype = np.float64
_state = threading.local()


def set_default_dtype(name):
    """Selects the program-wide floating point precision ('float64' or 'float32')."""
    global _default_dtype
    if name not in DTYPES:
        raise ContractError(f"Unsupported precision '{name}'. Choose one of {sorted(DTYPES)}.")
    _default_dtype = DTYPES[name]
    logger.debug(f"Default tensor precision set to {name}")


def get_default_dtype():
    return _default_dtype


def is_grad_enabled():
    return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
    """Disables graph recording for the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _check_finite(data, op):
    if not np.all(np.isfinite(data)):
        raise NumericalError(f"Operation '{op}' produced non-finite values.")


class Tensor:
    """A numpy array plus optional gradient and the operation that produced it."""

    __slots__ = ('data', 'grad', 'requires_grad', '_parents', '_backward', '_op', 'name')

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _op='leaf'):
        array = np.asarray(data, dtype=_default_dtype)
        if 0 in array.shape:
            raise ShapeError(f"Tensor extents must be positive, got shape {array.shape}.")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(array) if self.requires_grad and not _parents else None
        self._parents = _parents
        self._backward = None
        self._op = _op
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return not self._parents

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def __repr__(self):
        label = f", name='{self.name}'" if self.name else ''
        return f"Tensor(shape={self.shape}, op='{self._op}', requires_grad={self.requires_grad}{label})"


def tensor(data, requires_grad=False, name=None):
    return Tensor(data, requires_grad=requires_grad, name=name)


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(data, parents, backward_fn, op):
    """
    Wraps the output of a forward computation and records it in the graph.

    `backward_fn(grad_out)` must return one array (or None) per parent.
    """
    _check_finite(data, op)
    track = is_grad_enabled() and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data, _op=op)
    out = Tensor(data, requires_grad=True, _parents=tuple(parents), _op=op)
    out._backward = backward_fn
    return out


class Graph:
    """Operations reachable from a root tensor, in topological order."""

    def __init__(self, root):
        self.root = root
        self.nodes = self._topological_order(root)

    @staticmethod
    def _topological_order(root):
        # Iterative post-order DFS; LSTM recurrences are far deeper than the recursion limit.
        order = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def __len__(self):
        return len(self.nodes)

    def backward(self):
        for node in self.nodes:
            if not node.is_leaf:
                node.grad = None
        self.root.grad = np.ones_like(self.root.data)

        for node in reversed(self.nodes):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, grad in zip(node._parents, parent_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.array(grad, dtype=parent.data.dtype)
                else:
                    parent.grad += grad


def backward(loss):
    """Populates `.grad` of every tensor requiring gradients reachable from `loss`."""
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}.")
    if not loss.requires_grad:
        raise ContractError("backward() needs a loss produced by a recorded graph.")
    graph = Graph(loss)
    logger.debug(f"Backward pass over {len(graph)} recorded tensors")
    graph.backward()
    return graph


def _require_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes differ, {a.shape} vs {b.shape}.")


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, 'add')
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, 'sub')
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, 'mul')
    return make_result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), 'mul')


def scale(a, factor):
    factor = float(factor)
    return make_result(a.data * factor, (a,), lambda g: (g * factor,), 'scale')


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects two matrices, got shapes {a.shape} and {b.shape}.")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}.")
    return make_result(a.data @ b.data, (a, b),
                       lambda g: (g @ b.data.T, a.data.T @ g), 'matmul')


def transpose(a):
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}.")
    return make_result(a.data.T, (a,), lambda g: (g.T,), 'transpose')


def reshape(a, shape):
    original = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"Cannot reshape {original} to {shape}: {e}")
    return make_result(data, (a,), lambda g: (g.reshape(original),), 'reshape')


def take(a, index):
    """Basic or advanced indexing; gradients scatter back with np.add.at."""
    data = a.data[index]

    def _backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return make_result(data, (a,), _backward, 'take')


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor.")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result(data, tuple(tensors), _backward, 'concat')


def total(a):
    """Sum of all elements as a scalar tensor."""
    shape = a.shape
    return make_result(np.sum(a.data), (a,), lambda g: (np.full(shape, g, dtype=a.data.dtype),), 'sum')


def zeros(shape, requires_grad=False, name=None):
    return Tensor(np.zeros(shape), requires_grad=requires_grad, name=name)


def ones(shape, requires_grad=False, name=None):
    return Tensor(np.ones(shape), requires_grad=requires_grad, name=name)
