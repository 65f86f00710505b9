"""Minimal reverse-mode autodiff over dense real tensors.

Just enough machinery to express small 1-D conv nets and differentiate
losses with respect to network *inputs* as well as parameters. Storage
is float32 by default (float64 supported for gradient checking);
explicit reductions accumulate in float64.

Every op validates shapes up front and checks its output for NaN/Inf:
producing a non-finite value raises immediately instead of poisoning
the graph.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import ValidationError

_FLOAT_DTYPES = (np.float32, np.float64)

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that disables graph recording on this thread."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"{op}: produced non-finite values")


class Tensor:
    """A dense real array with optional reverse-mode gradient tracking.

    Leaves created with ``requires_grad=True`` accumulate into ``.grad``
    on every ``backward`` call; op outputs carry the recorded parents
    and a closure that maps the output adjoint to parent adjoints.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES else np.float32
        arr = np.asarray(data, dtype=dtype)
        if not np.isfinite(arr).all():
            raise ValidationError("tensor data contains non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents, backward_fn, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        if _grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)


class ComputeGraph:
    """Ancestors of a root tensor in topological order (parents first).

    Only nodes that can route gradient to a ``requires_grad`` leaf are
    included: constant subgraphs record no parents and are pruned
    automatically. The graph is acyclic by construction (ops only ever
    consume already-existing tensors).
    """

    def __init__(self, root: Tensor):
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
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
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.nodes = order


def backward(root: Tensor) -> None:
    """Populate ``.grad`` on every requires_grad leaf reachable from ``root``.

    ``root`` must be scalar. Adjoints are kept in a scratch table during
    the traversal; only leaves accumulate persistently, so calling
    backward twice exactly doubles leaf gradients.
    """
    if root.data.size != 1:
        raise ValidationError(f"backward root must be scalar, got shape {root.shape}")
    graph = ComputeGraph(root)
    adjoints: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(graph.nodes):
        g = adjoints.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            continue
        for parent, contrib in node._backward(g):
            acc = adjoints.get(id(parent))
            if acc is None:
                adjoints[id(parent)] = np.zeros_like(parent.data)
                acc = adjoints[id(parent)]
            acc += contrib


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"{op}: shape mismatch {a.shape} vs {b.shape}")
    if a.data.dtype != b.data.dtype:
        raise ValidationError(f"{op}: dtype mismatch {a.data.dtype} vs {b.data.dtype}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")

    def _bw(g):
        out = []
        if a.requires_grad:
            out.append((a, g))
        if b.requires_grad:
            out.append((b, g))
        return out

    return Tensor._from_op(a.data + b.data, (a, b), _bw, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")

    def _bw(g):
        out = []
        if a.requires_grad:
            out.append((a, g))
        if b.requires_grad:
            out.append((b, -g))
        return out

    return Tensor._from_op(a.data - b.data, (a, b), _bw, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")

    def _bw(g):
        out = []
        if a.requires_grad:
            out.append((a, g * b.data))
        if b.requires_grad:
            out.append((b, g * a.data))
        return out

    return Tensor._from_op(a.data * b.data, (a, b), _bw, "mul")


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def _bw(g):
        return [(a, g * c)] if a.requires_grad else []

    return Tensor._from_op(a.data * c, (a,), _bw, "scalar_mul")


def relu(x: Tensor) -> Tensor:
    def _bw(g):
        return [(x, g * (x.data > 0))] if x.requires_grad else []

    return Tensor._from_op(np.maximum(x.data, 0), (x,), _bw, "relu")


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each [B, C] row of a [B, C, L] tensor to zero mean and
    unit variance over its length axis. No batch statistics and no
    learned parameters, so the result is independent of batch
    composition and of input scale."""
    if x.data.ndim != 3:
        raise ValidationError(f"instance_norm: expected [B,C,L], got {x.shape}")
    x64 = x.data.astype(np.float64, copy=False)
    mean = x64.mean(axis=2, keepdims=True)
    var = x64.var(axis=2, keepdims=True)
    sigma = np.sqrt(var + eps)
    normed = ((x64 - mean) / sigma).astype(x.data.dtype)

    def _bw(g):
        if not x.requires_grad:
            return []
        g64 = g.astype(np.float64, copy=False)
        n64 = normed.astype(np.float64, copy=False)
        g_mean = g64.mean(axis=2, keepdims=True)
        proj = (g64 * n64).mean(axis=2, keepdims=True)
        dx = (g64 - g_mean - n64 * proj) / sigma
        return [(x, dx.astype(x.data.dtype))]

    return Tensor._from_op(normed, (x,), _bw, "instance_norm")


def flatten(x: Tensor) -> Tensor:
    """Collapse all trailing axes: [B, ...] -> [B, D]."""
    if x.data.ndim < 2:
        raise ValidationError(f"flatten: need >= 2 dims, got shape {x.shape}")
    in_shape = x.shape
    out = x.data.reshape(in_shape[0], -1)

    def _bw(g):
        return [(x, g.reshape(in_shape))] if x.requires_grad else []

    return Tensor._from_op(out, (x,), _bw, "flatten")


def mean_over_batch(x: Tensor) -> Tensor:
    """Mean over axis 0, accumulated in float64."""
    if x.data.ndim < 1 or x.shape[0] == 0:
        raise ValidationError(f"mean_over_batch: need nonempty batch axis, got shape {x.shape}")
    batch = x.shape[0]
    out = np.mean(x.data, axis=0, dtype=np.float64).astype(x.data.dtype)

    def _bw(g):
        if not x.requires_grad:
            return []
        return [(x, np.broadcast_to(g / batch, x.shape))]

    return Tensor._from_op(out, (x,), _bw, "mean_over_batch")


def sum_of_squares(x: Tensor) -> Tensor:
    """Scalar sum of squared entries, accumulated in float64."""
    x64 = x.data.astype(np.float64, copy=False)
    total = np.asarray(np.sum(x64 * x64), dtype=x.data.dtype)

    def _bw(g):
        return [(x, (2.0 * g) * x.data)] if x.requires_grad else []

    return Tensor._from_op(total, (x,), _bw, "sum_of_squares")


def _conv_out_len(length: int, kernel: int, stride: int, padding: int) -> int:
    out = (length + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ValidationError(
            f"conv1d/pool window does not fit: L={length}, k={kernel}, "
            f"stride={stride}, padding={padding}"
        )
    return out


def conv1d(
    x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Cross-correlation of [B, C, L] with [F, C, k] filters -> [B, F, L']."""
    if x.data.ndim != 3 or weight.data.ndim != 3:
        raise ValidationError(
            f"conv1d: expected x [B,C,L] and weight [F,C,k], got {x.shape} and {weight.shape}"
        )
    batch, in_ch, length = x.shape
    filters, w_ch, kernel = weight.shape
    if in_ch != w_ch:
        raise ValidationError(f"conv1d: channel mismatch, x {x.shape} vs weight {weight.shape}")
    if bias is not None and bias.shape != (filters,):
        raise ValidationError(f"conv1d: bias shape {bias.shape} != ({filters},)")
    out_len = _conv_out_len(length, kernel, stride, padding)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    windows = np.lib.stride_tricks.sliding_window_view(xp, kernel, axis=2)[:, :, ::stride, :]
    out = np.tensordot(windows, weight.data, axes=([1, 3], [1, 2]))  # [B, L', F]
    out = np.ascontiguousarray(out.transpose(0, 2, 1))
    if bias is not None:
        out += bias.data[None, :, None]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def _bw(g):
        contribs = []
        if x.requires_grad:
            # scatter g*w back onto the (padded) input, one kernel tap at a time
            tap = np.tensordot(g, weight.data, axes=([1], [0]))  # [B, L', C, k]
            dxp = np.zeros_like(xp)
            for j in range(kernel):
                dxp[:, :, j : j + stride * out_len : stride] += tap[:, :, :, j].transpose(0, 2, 1)
            dx = dxp[:, :, padding : padding + length] if padding else dxp
            contribs.append((x, dx))
        if weight.requires_grad:
            contribs.append((weight, np.tensordot(g, windows, axes=([0, 2], [0, 2]))))
        if bias is not None and bias.requires_grad:
            contribs.append((bias, np.sum(g, axis=(0, 2), dtype=np.float64).astype(g.dtype)))
        return contribs

    return Tensor._from_op(out, parents, _bw, "conv1d")


def max_pool1d(x: Tensor, width: int, stride: int) -> Tensor:
    """Max over sliding windows along the last axis of [B, C, L].

    The forward pass is a strided running maximum; the argmax needed for
    routing gradients is computed lazily inside the backward closure, so
    constant (no-grad) forwards never pay for it.
    """
    if x.data.ndim != 3:
        raise ValidationError(f"max_pool1d: expected [B,C,L], got {x.shape}")
    if width < 1 or stride < 1:
        raise ValidationError(f"max_pool1d: width={width}, stride={stride} must be >= 1")
    batch, channels, length = x.shape
    out_len = _conv_out_len(length, width, stride, 0)
    out = x.data[:, :, 0 : stride * out_len : stride].copy()
    for j in range(1, width):
        np.maximum(out, x.data[:, :, j : j + stride * out_len : stride], out=out)

    def _bw(g):
        if not x.requires_grad:
            return []
        windows = np.lib.stride_tricks.sliding_window_view(x.data, width, axis=2)[:, :, ::stride, :]
        argmax = np.argmax(windows, axis=3)
        dx = np.zeros_like(x.data)
        positions = argmax + np.arange(out_len)[None, None, :] * stride
        b_idx = np.arange(batch)[:, None, None]
        c_idx = np.arange(channels)[None, :, None]
        if stride >= width:
            dx[b_idx, c_idx, positions] += g  # windows disjoint: no index collisions
        else:
            np.add.at(dx, (b_idx, c_idx, positions), g)
        return [(x, dx)]

    return Tensor._from_op(out, (x,), _bw, "max_pool1d")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map [B, D] @ [D, E] (+ bias [E]) -> [B, E]."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValidationError(
            f"linear: incompatible shapes x {x.shape} vs weight {weight.shape}"
        )
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValidationError(f"linear: bias shape {bias.shape} != ({weight.shape[1]},)")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def _bw(g):
        contribs = []
        if x.requires_grad:
            contribs.append((x, g @ weight.data.T))
        if weight.requires_grad:
            contribs.append((weight, x.data.T @ g))
        if bias is not None and bias.requires_grad:
            contribs.append((bias, np.sum(g, axis=0, dtype=np.float64).astype(g.dtype)))
        return contribs

    return Tensor._from_op(out, parents, _bw, "linear")


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of [B, C] logits against integer labels [B]."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ValidationError(
            f"softmax_cross_entropy: logits {logits.shape} vs labels {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValidationError("softmax_cross_entropy: label out of range")
    batch = logits.shape[0]
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(z), axis=1))
    losses = log_norm - z[np.arange(batch), labels]
    out = np.asarray(losses.mean(), dtype=logits.data.dtype)

    def _bw(g):
        if not logits.requires_grad:
            return []
        probs = np.exp(z - log_norm[:, None])
        probs[np.arange(batch), labels] -= 1.0
        return [(logits, (float(g) / batch) * probs.astype(logits.data.dtype))]

    return Tensor._from_op(out, (logits,), _bw, "softmax_cross_entropy")
