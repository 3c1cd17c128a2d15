"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations are recorded on the active :class:`Tape` (entered with ``with Tape() as tape:``)
whenever one of their inputs is tracked, i.e. either ``requires_grad`` or produced by a
recorded operation. Outside a tape every operation is a plain numpy computation.

Elementwise operations only broadcast scalars (0-d tensors and Python numbers). Any other
shape mismatch raises :class:`~uqrank.globals.errors.ShapeError`; use
:func:`broadcast_to` to expand explicitly.
"""
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from uqrank.globals.errors import DomainError, ShapeError, UsageError

ArrayLike = Union[np.ndarray, float, int, Sequence]
Operand = Union["Tensor", float, int]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
GraphFn = Callable[["Tensor", "Tensor"], Tuple[Optional["Tensor"], ...]]

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("uqrank_active_tape", default=None)


class Tensor:
    """
    Dense n-dimensional float64 array with an optional gradient slot.

    Attributes:
        data: Row-major float64 values
        requires_grad: Whether :meth:`Tape.backward` fills ``grad`` for this tensor
        grad: Accumulated gradient, same shape as ``data``, or None
    """

    __array_priority__ = 1000

    def __init__(self, data: ArrayLike, requires_grad: bool = False) -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._recorded = False

    @property
    def tracked(self) -> bool:
        """True if gradients can flow into this tensor on the active tape."""
        return self.requires_grad or self._recorded

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        """Copy of the values."""
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same values, cut from the tape."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # arithmetic
    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    # method forms of common ops
    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis, keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            return reshape(self, shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)


@dataclass
class Operation:
    """
    One recorded operation: inputs, output and the local backward rule.

    ``graph`` is the same rule written with tensor operations, taking the incoming
    gradient and the output; ops without it cannot be differentiated twice.
    """

    name: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn
    graph: Optional[GraphFn] = None


class Tape:
    """
    Ordered record of operations, in creation (and therefore topological) order.

    A tape is confined to one thread. Enter it as a context manager to make it the
    active tape; nesting restores the previous tape on exit.
    """

    def __init__(self) -> None:
        self.operations: List[Operation] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.operations)

    def record(self, operation: Operation) -> None:
        self.operations.append(operation)

    def _propagate(self, loss: Tensor) -> Dict[int, np.ndarray]:
        if loss.size != 1:
            raise UsageError(f"gradient needs a scalar loss, got shape {loss.shape}")
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for op in reversed(self.operations):
            g = grads.get(id(op.output))
            if g is None:
                continue
            for tensor, local in zip(op.inputs, op.backward(g)):
                if local is None or not tensor.tracked:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + local
                else:
                    grads[key] = local
        return grads

    def gradient(self, loss: Tensor, wrt: Sequence[Tensor]) -> List[np.ndarray]:
        """
        Gradients of a scalar loss with respect to the given tensors.

        ``grad`` slots are left untouched. Tensors the loss does not depend on get zeros.

        Args:
            loss: Scalar tensor recorded on this tape
            wrt: Leaf or intermediate tensors

        Returns:
            One array per entry of ``wrt``, shaped like it.

        Raises:
            UsageError: If ``loss`` is not a scalar
        """
        grads = self._propagate(loss)
        return [grads.get(id(t), np.zeros_like(t.data)).copy() for t in wrt]

    def graph_gradient(self, loss: Tensor, wrt: Sequence[Tensor]) -> List[Tensor]:
        """
        Gradients of a scalar loss as tensors recorded on this tape.

        The returned gradients can themselves be differentiated: a later
        :meth:`gradient` or :meth:`backward` also flows through the gradient computation.
        Only operations between ``wrt`` and ``loss`` are visited.

        Raises:
            UsageError: If ``loss`` is not a scalar, or an operation on the way has no
                tensor form of its backward rule
        """
        if loss.size != 1:
            raise UsageError(f"gradient needs a scalar loss, got shape {loss.shape}")
        reached = {id(t) for t in wrt}
        path = []
        for op in list(self.operations):
            if any(id(t) in reached for t in op.inputs):
                reached.add(id(op.output))
                path.append(op)
        grads: Dict[int, Tensor] = {}
        if id(loss) in reached:
            grads[id(loss)] = Tensor(np.ones_like(loss.data))
        token = _ACTIVE_TAPE.set(self)
        try:
            for op in reversed(path):
                g = grads.get(id(op.output))
                if g is None:
                    continue
                if op.graph is None:
                    raise UsageError(f"{op.name} cannot be differentiated twice")
                for tensor, local in zip(op.inputs, op.graph(g, op.output)):
                    if local is None or id(tensor) not in reached:
                        continue
                    key = id(tensor)
                    grads[key] = grads[key] + local if key in grads else local
        finally:
            _ACTIVE_TAPE.reset(token)
        return [grads.get(id(t), Tensor(np.zeros_like(t.data))) for t in wrt]

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(t) into ``t.grad`` for every ``requires_grad`` tensor reached."""
        grads = self._propagate(loss)
        seen = set()
        for op in self.operations:
            for t in op.inputs:
                if t.requires_grad and id(t) not in seen and id(t) in grads:
                    seen.add(id(t))
                    t.grad = grads[id(t)].copy() if t.grad is None else t.grad + grads[id(t)]


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(
    name: str,
    data: np.ndarray,
    inputs: Tuple[Tensor, ...],
    backward: BackwardFn,
    graph: Optional[GraphFn] = None,
) -> Tensor:
    out = Tensor(data)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.tracked for t in inputs):
        out._recorded = True
        tape.record(Operation(name, inputs, out, backward, graph))
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum())
    return grad


def _unbroadcast_graph(grad: "Tensor", shape: Tuple[int, ...]) -> "Tensor":
    if grad.shape == shape or len(shape) != 0:
        return grad
    return tsum(grad)


def _keep_axis(t: "Tensor", axis: int, shape: Tuple[int, ...]) -> "Tensor":
    kept = tuple(1 if i == axis else n for i, n in enumerate(shape))
    return t if t.shape == kept else reshape(t, kept)


def _check_pair(name: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} do not match")


# elementwise
def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_pair("add", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    def graph(g: Tensor, out: Tensor):
        return _unbroadcast_graph(g, a.shape), _unbroadcast_graph(g, b.shape)

    return _result("add", a.data + b.data, (a, b), backward, graph)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_pair("sub", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    def graph(g: Tensor, out: Tensor):
        return _unbroadcast_graph(g, a.shape), _unbroadcast_graph(neg(g), b.shape)

    return _result("sub", a.data - b.data, (a, b), backward, graph)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_pair("mul", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    def graph(g: Tensor, out: Tensor):
        return _unbroadcast_graph(g * b, a.shape), _unbroadcast_graph(g * a, b.shape)

    return _result("mul", a.data * b.data, (a, b), backward, graph)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_pair("div", a, b)
    if np.any(b.data == 0):
        raise DomainError("div: division by zero")
    out = a.data / b.data

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        )

    def graph(g: Tensor, result: Tensor):
        return (
            _unbroadcast_graph(g / b, a.shape),
            _unbroadcast_graph(neg(g) * result / b, b.shape),
        )

    return _result("div", out, (a, b), backward, graph)


def neg(a: Operand) -> Tensor:
    a = as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,), lambda g, out: (neg(g),))


def exp(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result("exp", out, (a,), lambda g: (g * out,), lambda g, res: (g * res,))


def log(a: Operand) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log: non-positive input")
    return _result(
        "log", np.log(a.data), (a,), lambda g: (g / a.data,), lambda g, out: (g / a,)
    )


def tanh(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(
        "tanh",
        out,
        (a,),
        lambda g: (g * (1.0 - out * out),),
        lambda g, res: (g * (1.0 - square(res)),),
    )


def relu(a: Operand) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(np.float64)
    return _result(
        "relu",
        np.maximum(a.data, 0.0),
        (a,),
        lambda g: (g * mask,),
        lambda g, out: (g * Tensor(mask),),
    )


def sigmoid(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(
        "sigmoid",
        out,
        (a,),
        lambda g: (g * out * (1.0 - out),),
        lambda g, res: (g * res * (1.0 - res),),
    )


def softplus(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    slope = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(
        "softplus", out, (a,), lambda g: (g * slope,), lambda g, res: (g * sigmoid(a),)
    )


def sqrt(a: Operand) -> Tensor:
    """Square root; the gradient at 0 is taken as 0."""
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt: negative input")
    out = np.sqrt(a.data)
    positive = (out > 0).astype(np.float64)

    def backward(g: np.ndarray):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g * 0.5 / safe, 0.0),)

    def graph(g: Tensor, res: Tensor):
        return (g * Tensor(0.5 * positive) / (res + Tensor(1.0 - positive)),)

    return _result("sqrt", out, (a,), backward, graph)


def square(a: Operand) -> Tensor:
    a = as_tensor(a)
    return _result(
        "square",
        a.data * a.data,
        (a,),
        lambda g: (2.0 * g * a.data,),
        lambda g, out: (g * a * 2.0,),
    )


def maximum(a: Operand, floor: float) -> Tensor:
    """Elementwise ``max(a, floor)`` against a constant."""
    a = as_tensor(a)
    mask = (a.data >= floor).astype(np.float64)
    return _result(
        "maximum",
        np.maximum(a.data, floor),
        (a,),
        lambda g: (g * mask,),
        lambda g, out: (g * Tensor(mask),),
    )


def grad_reverse(a: Operand, lam: float) -> Tensor:
    """Identity on the forward pass; multiplies the incoming gradient by ``-lam``.

    Raises:
        UsageError: If ``lam`` is not positive
    """
    if lam <= 0:
        raise UsageError(f"grad_reverse needs lambda > 0, got {lam}")
    a = as_tensor(a)
    return _result(
        "grad_reverse",
        a.data.copy(),
        (a,),
        lambda g: (-lam * g,),
        lambda g, out: (g * (-lam),),
    )


# linear algebra
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an ``m x k`` (or length ``k``) tensor with a ``k x n`` tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim != 2:
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")

    def backward(g: np.ndarray):
        if a.ndim == 1:
            return g @ b.data.T, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    def graph(g: Tensor, out: Tensor):
        if a.ndim == 1:
            outer = matmul(reshape(a, (a.shape[0], 1)), reshape(g, (1, g.shape[0])))
            return matmul(g, transpose(b)), outer
        return matmul(g, transpose(b)), matmul(transpose(a), g)

    return _result("matmul", a.data @ b.data, (a, b), backward, graph)


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """
    2-D cross-correlation of a ``c_in x h x w`` input with ``c_out x c_in x k x k`` kernels.

    Output size is ``(h + 2*pad - k) // stride + 1`` per spatial axis.

    Raises:
        ShapeError: On rank or channel mismatch, or a non-positive output size
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if x.ndim != 3 or kernels.ndim != 4:
        raise ShapeError(f"conv2d: expected c x h x w input and 4-d kernels, got {x.shape}")
    c_out, c_in, k, k2 = kernels.shape
    c, h, w = x.shape
    if c != c_in or k != k2:
        raise ShapeError(f"conv2d: input {x.shape} does not fit kernels {kernels.shape}")
    if stride < 1 or pad < 0:
        raise ShapeError("conv2d: stride must be >= 1 and pad >= 0")
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (w + 2 * pad - k) // stride + 1
    if k > h + 2 * pad or k > w + 2 * pad or h_out <= 0 or w_out <= 0:
        raise ShapeError(f"conv2d: kernel {k} does not fit input {x.shape} with pad {pad}")

    padded = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((c, k, k, h_out, w_out))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = padded[
                :, i : i + stride * h_out : stride, j : j + stride * w_out : stride
            ]
    flat_cols = cols.reshape(c * k * k, h_out * w_out)
    flat_kernels = kernels.data.reshape(c_out, c * k * k)
    out = (flat_kernels @ flat_cols).reshape(c_out, h_out, w_out)

    def backward(g: np.ndarray):
        flat_g = g.reshape(c_out, h_out * w_out)
        grad_kernels = (flat_g @ flat_cols.T).reshape(kernels.shape)
        grad_cols = (flat_kernels.T @ flat_g).reshape(c, k, k, h_out, w_out)
        grad_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                grad_padded[
                    :, i : i + stride * h_out : stride, j : j + stride * w_out : stride
                ] += grad_cols[:, i, j]
        return grad_padded[:, pad : pad + h, pad : pad + w], grad_kernels

    return _result("conv2d", out, (x, kernels), backward)


# reductions
def _check_axis(name: str, a: Tensor, axis: Optional[int]) -> Optional[int]:
    if axis is None:
        return None
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"{name}: axis {axis} out of range for shape {a.shape}")
    return axis % a.ndim


def tsum(a: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axis = _check_axis("sum", a, axis)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    def graph(g: Tensor, res: Tensor):
        if axis is not None:
            g = _keep_axis(g, axis, a.shape)
        return (broadcast_to(g, a.shape),)

    return _result("sum", out, (a,), backward, graph)


def mean(a: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axis = _check_axis("mean", a, axis)
    count = a.size if axis is None else a.shape[axis]
    return tsum(a, axis, keepdims) / float(count)


def softmax(a: Operand, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    axis = _check_axis("softmax", a, axis)
    shifted = np.exp(a.data - a.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    def graph(g: Tensor, res: Tensor):
        inner = broadcast_to(tsum(g * res, axis, keepdims=True), a.shape)
        return (res * (g - inner),)

    return _result("softmax", out, (a,), backward, graph)


def logsumexp(a: Operand, axis: int = -1, keepdims: bool = False) -> Tensor:
    """``log(sum(exp(a)))`` along ``axis``, stabilized by subtracting the maximum."""
    a = as_tensor(a)
    axis = _check_axis("logsumexp", a, axis)
    peak = a.data.max(axis=axis, keepdims=True)
    total = np.exp(a.data - peak).sum(axis=axis, keepdims=True)
    out_keep = peak + np.log(total)
    weights = np.exp(a.data - out_keep)
    out = out_keep if keepdims else np.squeeze(out_keep, axis=axis)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    def graph(g: Tensor, res: Tensor):
        level = broadcast_to(_keep_axis(res, axis, a.shape), a.shape)
        return (broadcast_to(_keep_axis(g, axis, a.shape), a.shape) * exp(a - level),)

    return _result("logsumexp", out, (a,), backward, graph)


def log_softmax(a: Operand, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    axis = _check_axis("log_softmax", a, axis)
    peak = a.data.max(axis=axis, keepdims=True)
    out = a.data - peak - np.log(np.exp(a.data - peak).sum(axis=axis, keepdims=True))
    probs = np.exp(out)

    def backward(g: np.ndarray):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    def graph(g: Tensor, res: Tensor):
        return (g - exp(res) * broadcast_to(tsum(g, axis, keepdims=True), a.shape),)

    return _result("log_softmax", out, (a,), backward, graph)


def pool2d(x: Operand, size: int = 2, mode: str = "max") -> Tensor:
    """Non-overlapping ``size x size`` pooling of a ``c x h x w`` tensor (``max`` or ``avg``).

    Trailing rows and columns that do not fill a window are dropped.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"pool2d: expected c x h x w, got {x.shape}")
    if mode not in ("max", "avg"):
        raise UsageError(f"pool2d: unknown mode {mode!r}")
    c, h, w = x.shape
    h_out, w_out = h // size, w // size
    if h_out == 0 or w_out == 0:
        raise ShapeError(f"pool2d: window {size} larger than input {x.shape}")
    cropped = x.data[:, : h_out * size, : w_out * size]
    windows = (
        cropped.reshape(c, h_out, size, w_out, size)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h_out, w_out, size * size)
    )
    if mode == "max":
        winner = windows.argmax(axis=-1)[..., None]
        out = np.take_along_axis(windows, winner, axis=-1)[..., 0]
    else:
        out = windows.mean(axis=-1)

    def backward(g: np.ndarray):
        if mode == "max":
            grad_windows = np.zeros_like(windows)
            np.put_along_axis(grad_windows, winner, g[..., None], axis=-1)
        else:
            grad_windows = np.repeat(g[..., None] / (size * size), size * size, axis=-1)
        grad = np.zeros_like(x.data)
        grad[:, : h_out * size, : w_out * size] = (
            grad_windows.reshape(c, h_out, w_out, size, size)
            .transpose(0, 1, 3, 2, 4)
            .reshape(c, h_out * size, w_out * size)
        )
        return (grad,)

    return _result(f"{mode}_pool2d", out, (x,), backward)


def max_pool2d(x: Operand, size: int = 2) -> Tensor:
    return pool2d(x, size, "max")


def avg_pool2d(x: Operand, size: int = 2) -> Tensor:
    return pool2d(x, size, "avg")


# shape manipulation
def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"reshape: {a.shape} -> {tuple(shape)}: {e}") from e
    return _result(
        "reshape",
        out,
        (a,),
        lambda g: (g.reshape(a.shape),),
        lambda g, res: (reshape(g, a.shape),),
    )


def transpose(a: Operand, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    perm = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(perm) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {perm} invalid for shape {a.shape}")
    inverse = tuple(int(i) for i in np.argsort(perm))
    return _result(
        "transpose",
        a.data.transpose(perm),
        (a,),
        lambda g: (g.transpose(inverse),),
        lambda g, res: (transpose(g, inverse),),
    )


def broadcast_to(a: Operand, shape: Sequence[int]) -> Tensor:
    """Expand ``a`` to ``shape`` under numpy broadcasting; the backward pass sums back."""
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape).copy()
    except ValueError as e:
        raise ShapeError(f"broadcast_to: {a.shape} -> {shape}") from e
    lead = len(shape) - a.ndim
    kept = tuple(i for i, n in enumerate(a.shape) if n == 1 and shape[lead + i] != 1)

    def backward(g: np.ndarray):
        grad = g.sum(axis=tuple(range(lead))) if lead else g
        if kept:
            grad = grad.sum(axis=kept, keepdims=True)
        return (grad.reshape(a.shape),)

    def graph(g: Tensor, res: Tensor):
        for _ in range(lead):
            g = tsum(g, 0)
        for i in kept:
            g = tsum(g, i, keepdims=True)
        return (reshape(g, a.shape),)

    return _result("broadcast_to", out, (a,), backward, graph)


def _scatter(g: Tensor, index, shape: Tuple[int, ...]) -> Tensor:
    """Adjoint of :func:`getitem`: a zero tensor of ``shape`` with ``g`` added at ``index``."""
    out = np.zeros(shape)
    np.add.at(out, index, g.data)
    return _result(
        "scatter",
        out,
        (g,),
        lambda h: (np.array(h[index]),),
        lambda h, res: (getitem(h, index),),
    )


def getitem(a: Operand, index) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate in the backward pass."""
    a = as_tensor(a)
    if isinstance(index, Tensor):
        index = index.data.astype(np.int64)
    try:
        out = a.data[index]
    except IndexError as e:
        raise ShapeError(f"index {index!r} out of range for shape {a.shape}") from e

    def backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    def graph(g: Tensor, res: Tensor):
        return (_scatter(g, index, a.shape),)

    return _result("getitem", np.array(out), (a,), backward, graph)


def _slice_along(axis: int, part) -> tuple:
    return (slice(None),) * axis + (part,)


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    if not parts:
        raise ShapeError("concat: nothing to concatenate")
    try:
        out = np.concatenate([t.data for t in parts], axis=axis)
    except (ValueError, IndexError) as e:
        raise ShapeError(f"concat: {[t.shape for t in parts]} along axis {axis}") from e
    axis = axis % out.ndim
    bounds = np.cumsum([t.shape[axis] for t in parts])[:-1]
    starts = [0, *(int(b) for b in bounds)]
    stops = [*(int(b) for b in bounds), out.shape[axis]]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    def graph(g: Tensor, res: Tensor):
        return tuple(
            getitem(g, _slice_along(axis, slice(lo, hi))) for lo, hi in zip(starts, stops)
        )

    return _result("concat", out, parts, backward, graph)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    if not parts:
        raise ShapeError("stack: nothing to stack")
    if len({t.shape for t in parts}) != 1:
        raise ShapeError(f"stack: shapes differ {[t.shape for t in parts]}")
    out = np.stack([t.data for t in parts], axis=axis)
    axis = axis % out.ndim

    def backward(g: np.ndarray):
        return tuple(np.moveaxis(g, axis, 0))

    def graph(g: Tensor, res: Tensor):
        return tuple(getitem(g, _slice_along(axis, i)) for i in range(len(parts)))

    return _result("stack", out, parts, backward, graph)


# recurrent cell
@dataclass
class LSTMWeights:
    """Parameters of one LSTM cell, gates ordered input, forget, output, candidate.

    Attributes:
        w_x: ``in x 4H`` input weights
        w_h: ``H x 4H`` recurrent weights
        b: ``4H`` bias
    """

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]


def lstm_cell(
    x: Tensor, h_prev: Tensor, c_prev: Tensor, weights: LSTMWeights
) -> Tuple[Tensor, Tensor]:
    """
    One LSTM step for a single row (``x`` of shape ``in``) or a batch (``B x in``).

    Returns:
        ``(h, c)`` with the shape of ``h_prev``.

    Raises:
        ShapeError: If input, state and weight sizes disagree
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    hidden = weights.hidden_size
    if (
        weights.w_x.ndim != 2
        or weights.w_x.shape[1] != 4 * hidden
        or weights.w_h.shape != (hidden, 4 * hidden)
        or weights.b.shape != (4 * hidden,)
    ):
        raise ShapeError("lstm_cell: weight partitions do not agree")
    if h_prev.shape != c_prev.shape or h_prev.shape[-1] != hidden:
        raise ShapeError(f"lstm_cell: state shapes {h_prev.shape}, {c_prev.shape} vs H={hidden}")
    if x.shape[-1] != weights.w_x.shape[0] or x.shape[:-1] != h_prev.shape[:-1]:
        raise ShapeError(f"lstm_cell: input {x.shape} does not fit weights {weights.w_x.shape}")
    gates = matmul(x, weights.w_x) + matmul(h_prev, weights.w_h)
    gates = gates + broadcast_to(weights.b, gates.shape)
    i = sigmoid(gates[..., 0:hidden])
    f = sigmoid(gates[..., hidden : 2 * hidden])
    o = sigmoid(gates[..., 2 * hidden : 3 * hidden])
    candidate = tanh(gates[..., 3 * hidden : 4 * hidden])
    c = f * c_prev + i * candidate
    h = o * tanh(c)
    return h, c


def lstm_unroll(
    xs: Sequence[Tensor],
    weights: LSTMWeights,
    h0: Optional[Tensor] = None,
    c0: Optional[Tensor] = None,
) -> Tuple[Tensor, Tensor]:
    """Run :func:`lstm_cell` over a sequence of single-row inputs from zero (or given) state."""
    if not xs:
        raise ShapeError("lstm_unroll: empty sequence")
    hidden = weights.hidden_size
    h = h0 if h0 is not None else Tensor(np.zeros(hidden))
    c = c0 if c0 is not None else Tensor(np.zeros(hidden))
    for x in xs:
        h, c = lstm_cell(x, h, c, weights)
    return h, c
