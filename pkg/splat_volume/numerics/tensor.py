"""
Dense tensors with reverse-mode differentiation.

Every operation returns a new :class:`Tensor`. When one of its operands
requires a gradient, the result remembers its parents together with a
closure mapping the upstream gradient to one gradient per parent.
:meth:`Tensor.backward` walks that graph in reverse topological order and
accumulates gradients into the leaves (tensors created with
``requires_grad=True``).

Broadcasting follows numpy's trailing-dimension rules; gradients flowing
into a broadcast operand are summed back to its shape.
"""
import contextlib
import math

import numpy as np

from splat_volume.exceptions import GradientError, ShapeError

_STATE = {"dtype": np.float64, "grad_enabled": True}

GELU_K = math.sqrt(2.0 / math.pi)


def get_default_dtype():
    """Return the numpy scalar type new tensors are created with."""
    return _STATE["dtype"]


def set_default_dtype(dtype):
    """
    Switch between 64-bit (test/deterministic) and 32-bit (training) tensors.
    """
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported tensor dtype {dtype}, use float32 or float64")
    _STATE["dtype"] = dtype.type


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the default dtype."""
    previous = _STATE["dtype"]
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _STATE["dtype"] = previous


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    previous = _STATE["grad_enabled"]
    _STATE["grad_enabled"] = False
    try:
        yield
    finally:
        _STATE["grad_enabled"] = previous


def is_grad_enabled():
    return _STATE["grad_enabled"]


class Tensor:
    """
    A dense array plus the bookkeeping needed for reverse-mode differentiation.
    """

    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, parents=(), backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=_STATE["dtype"])
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = op
        self._parents = tuple(parents)
        self._backward = backward

    # -- introspection ---------------------------------------------------

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
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self):
        return self.shape[0]

    # -- differentiation -------------------------------------------------

    def backward(self, seed=None):
        """
        Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf that requires grad.

        A non-scalar root needs an explicit ``seed`` of its own shape.
        """
        if not self.requires_grad:
            raise GradientError("backward() called on a tensor that does not require grad")
        if seed is None:
            if self.data.size != 1:
                raise GradientError(
                    f"backward() on a non-scalar tensor of shape {self.shape} needs an explicit seed"
                )
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            if seed.shape != self.shape:
                raise ShapeError(f"backward seed of shape {seed.shape} does not match tensor shape {self.shape}")

        order = _topological_order(self)
        grads = {id(self): seed}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = np.array(grad, dtype=node.data.dtype) if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)


def as_tensor(value):
    """Wrap arrays and scalars as constant tensors; tensors pass through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_op(data, parents, backward, op):
    """
    Create the result of a custom operation.

    ``backward`` receives the upstream gradient and returns one gradient (or
    ``None``) per parent, in order. The graph is only recorded when grad mode is
    on and some parent requires grad.
    """
    parents = tuple(parents)
    if _STATE["grad_enabled"] and any(parent.requires_grad for parent in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward, op=op)
    return Tensor(data, op=op)


def _topological_order(root):
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
        for parent in node._parents:  # pylint: disable=protected-access
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible "
            "(trailing dimensions must be equal or 1)"
        ) from e


# -- elementwise binary ----------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return make_op(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return make_op(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(grad):
        return _unbroadcast(grad * b.data, a.shape), _unbroadcast(grad * a.data, b.shape)

    return make_op(a.data * b.data, (a, b), backward, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def backward(grad):
        return _unbroadcast(grad / b.data, a.shape), _unbroadcast(-grad * out / b.data, b.shape)

    return make_op(out, (a, b), backward, "div")


def neg(a):
    a = as_tensor(a)
    return make_op(-a.data, (a,), lambda grad: (-grad,), "neg")


def power(a, exponent):
    """Raise to a constant scalar power."""
    a = as_tensor(a)
    exponent = float(exponent)

    def backward(grad):
        return (grad * exponent * a.data ** (exponent - 1.0),)

    return make_op(a.data ** exponent, (a,), backward, "pow")


def where(condition, a, b):
    """Select from ``a`` where the constant boolean ``condition`` holds, else from ``b``."""
    a, b = as_tensor(a), as_tensor(b)
    condition = np.asarray(condition, dtype=bool)

    def backward(grad):
        return (
            _unbroadcast(np.where(condition, grad, 0.0), a.shape),
            _unbroadcast(np.where(condition, 0.0, grad), b.shape),
        )

    return make_op(np.where(condition, a.data, b.data), (a, b), backward, "where")


# -- linear algebra and shape ----------------------------------------------


def matmul(a, b):
    """Batched matrix product over the last two axes, broadcasting leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise ShapeError(f"matmul: batch dimensions of {a.shape} and {b.shape} do not broadcast") from e

    def backward(grad):
        grad_a = grad @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ grad
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return make_op(a.data @ b.data, (a, b), backward, "matmul")


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from e
    return make_op(out, (a,), lambda grad: (grad.reshape(a.shape),), "reshape")


def transpose(a, axes=None):
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} are not a permutation for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return make_op(np.transpose(a.data, axes), (a,), lambda grad: (np.transpose(grad, inverse),), "transpose")


def swapaxes(a, axis1, axis2):
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(a, axes)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(s != r for i, (s, r) in enumerate(zip(t.shape, reference)) if i != axis):
            raise ShapeError(
                f"concat: shapes {reference} and {t.shape} differ outside axis {axis}"
            )
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(grad):
        return tuple(np.split(grad, splits, axis=axis))

    return make_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis % (t.ndim + 1)] + (1,) + t.shape[axis % (t.ndim + 1):]) for t in tensors]
    return concat(expanded, axis=axis)


def _is_basic_index(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def getitem(a, key):
    """Basic slicing and integer-array gathering; the backward scatters-adds."""
    a = as_tensor(a)
    if isinstance(key, Tensor):
        key = key.data.astype(np.int64)
    out = a.data[key]
    basic = _is_basic_index(key)

    def backward(grad):
        full = np.zeros_like(a.data)
        if basic:
            full[key] += grad
        else:
            np.add.at(full, key, grad)
        return (full,)

    return make_op(np.array(out), (a,), backward, "getitem")


# -- elementwise unary -----------------------------------------------------


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_op(out, (a,), lambda grad: (grad * out,), "exp")


def log(a):
    a = as_tensor(a)
    return make_op(np.log(a.data), (a,), lambda grad: (grad / a.data,), "log")


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_op(out, (a,), lambda grad: (grad * 0.5 / out,), "sqrt")


def absolute(a):
    a = as_tensor(a)
    return make_op(np.abs(a.data), (a,), lambda grad: (grad * np.sign(a.data),), "abs")


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    positive = x >= 0
    z = np.exp(-np.abs(x))
    out = np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z))
    return make_op(out, (a,), lambda grad: (grad * out * (1.0 - out),), "sigmoid")


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_op(out, (a,), lambda grad: (grad * (1.0 - out * out),), "tanh")


def relu(a):
    a = as_tensor(a)
    return make_op(np.maximum(a.data, 0.0), (a,), lambda grad: (grad * (a.data > 0),), "relu")


def gelu(a):
    """GELU, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    inner = GELU_K * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(grad):
        d_inner = GELU_K * (1.0 + 3.0 * 0.044715 * x * x)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner),)

    return make_op(out, (a,), backward, "gelu")


def clamp(a, low=None, high=None):
    """Clip to [low, high]; gradient passes where the input was inside the range."""
    a = as_tensor(a)
    lo = -np.inf if low is None else low
    hi = np.inf if high is None else high
    inside = (a.data >= lo) & (a.data <= hi)
    return make_op(np.clip(a.data, lo, hi), (a,), lambda grad: (grad * inside,), "clamp")


# -- reductions ------------------------------------------------------------


def _expand_reduced(grad, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(grad, shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        grad = np.expand_dims(grad, axes)
    return np.broadcast_to(grad, shape)


def tensor_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def backward(grad):
        return (_expand_reduced(grad, a.shape, axis, keepdims),)

    return make_op(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))

    def backward(grad):
        return (_expand_reduced(grad, a.shape, axis, keepdims) / count,)

    return make_op(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward, "mean")


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(grad):
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)

    return make_op(out, (a,), backward, "softmax")


def cumsum(a, axis=-1, exclusive=False):
    """Running sum along ``axis``; ``exclusive`` drops the current element."""
    a = as_tensor(a)
    out = np.cumsum(a.data, axis=axis)
    if exclusive:
        out = out - a.data

    def backward(grad):
        reverse = np.flip(np.cumsum(np.flip(grad, axis=axis), axis=axis), axis=axis)
        return (reverse - grad if exclusive else reverse,)

    return make_op(out, (a,), backward, "cumsum")


# -- small vector helpers --------------------------------------------------


def dot(a, b, axis=-1, keepdims=False):
    return tensor_sum(mul(a, b), axis=axis, keepdims=keepdims)


def cross(a, b):
    """Cross product over a trailing axis of size 3."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != 3 or b.shape[-1] != 3:
        raise ShapeError(f"cross: trailing axis must be 3, got {a.shape} and {b.shape}")
    ax, ay, az = a[..., 0:1], a[..., 1:2], a[..., 2:3]
    bx, by, bz = b[..., 0:1], b[..., 1:2], b[..., 2:3]
    return concat([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def normalize(a, axis=-1, eps=1e-12):
    """Scale to unit length along ``axis``."""
    a = as_tensor(a)
    return a / sqrt(tensor_sum(a * a, axis=axis, keepdims=True) + eps)
