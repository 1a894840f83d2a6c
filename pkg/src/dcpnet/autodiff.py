"""Dense-tensor math with reverse-mode differentiation.

A deliberately small define-by-run engine: every forward op allocates a
new `Tensor` node holding the float64 result and a closure that routes
the incoming gradient to its parents.  The op catalogue is fixed to what
the collaborative-perception network needs (matmul, 1x1 / strided 3x3
convolution, sigmoid, relu, softmax, add, scale, concat, reshape,
pooling, nearest upsampling, cross-entropy).  All backward passes are
validated against central finite differences (see `grad_check`).

Compute is float64 throughout; float32 appears only at the wire /
file-format boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, InputError, ShapeError

__all__ = [
    "Tensor",
    "add",
    "mul",
    "affine",
    "scale_by",
    "sum_all",
    "mean_over",
    "matmul",
    "transpose2d",
    "reshape",
    "concat",
    "take1d",
    "relu",
    "sigmoid",
    "softmax",
    "conv1x1",
    "conv2d",
    "upsample_nearest",
    "cross_entropy",
    "backward",
    "grad_check",
]


class Tensor:
    """A float64 array plus its place in the computation graph.

    Leaf tensors (parameters, inputs) have no parents.  Interior nodes
    carry a `_backward` closure that adds d(loss)/d(parent) into each
    parent's `.grad` given d(loss)/d(self).
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # small conveniences used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Tensor(shape={list(self.shape)})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def bw(g):
        a.accumulate(g)
        b.accumulate(g)

    out._backward = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data, (a, b))

    def bw(g):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    out._backward = bw
    return out


def affine(x: Tensor, scale: float, shift: float) -> Tensor:
    """scale * x + shift with constant coefficients."""
    out = Tensor(scale * x.data + shift, (x,))

    def bw(g):
        x.accumulate(scale * g)

    out._backward = bw
    return out


def scale_by(x: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a scalar tensor (the scalar stays in the graph)."""
    if s.size != 1:
        raise ShapeError(f"scale_by: scale has shape {s.shape}, expected scalar")
    sv = float(s.data.reshape(()))
    out = Tensor(x.data * sv, (x, s))

    def bw(g):
        x.accumulate(g * sv)
        s.accumulate(np.sum(g * x.data).reshape(s.shape))

    out._backward = bw
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.sum(x.data).reshape(()), (x,))

    def bw(g):
        x.accumulate(np.full_like(x.data, float(g)))

    out._backward = bw
    return out


def mean_over(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Mean over the given axes (used for global average pooling)."""
    axes = tuple(sorted(ax % x.data.ndim for ax in axes))
    count = 1
    for ax in axes:
        count *= x.shape[ax]
    out = Tensor(np.mean(x.data, axis=axes), (x,))

    def bw(g):
        x.accumulate(np.broadcast_to(np.expand_dims(g, axes), x.shape) / count)

    out._backward = bw
    return out


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: {x.shape} -> {shape}")
    out = Tensor(x.data.reshape(shape), (x,))

    def bw(g):
        x.accumulate(g.reshape(x.shape))

    out._backward = bw
    return out


def concat(parts: list[Tensor], axis: int) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty input list")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            p.accumulate(g[tuple(idx)])

    out._backward = bw
    return out


def take1d(x: Tensor, i: int) -> Tensor:
    """Scalar view of element i of a 1-D tensor (stays in the graph)."""
    if x.data.ndim != 1:
        raise ShapeError(f"take1d: got shape {x.shape}")
    out = Tensor(x.data[i].reshape(()), (x,))

    def bw(g):
        full = np.zeros_like(x.data)
        full[i] = float(g)
        x.accumulate(full)

    out._backward = bw
    return out


def transpose2d(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeError(f"transpose2d: got shape {x.shape}")
    out = Tensor(x.data.T, (x,))

    def bw(g):
        x.accumulate(g.T)

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), (x,))

    def bw(g):
        x.accumulate(g * mask)

    out._backward = bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    # split by sign to avoid overflow in exp
    s = np.empty_like(x.data)
    pos = x.data >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s, (x,))

    def bw(g):
        x.accumulate(g * s * (1.0 - s))

    out._backward = bw
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    ax = axis % x.data.ndim if x.data.ndim else 0
    if x.data.ndim == 0:
        raise ShapeError("softmax: scalar input")
    shifted = x.data - np.max(x.data, axis=ax, keepdims=True)
    e = np.exp(shifted)
    p = e / np.sum(e, axis=ax, keepdims=True)
    out = Tensor(p, (x,))

    def bw(g):
        inner = np.sum(g * p, axis=ax, keepdims=True)
        x.accumulate(p * (g - inner))

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# linear maps


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: need 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims disagree, {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    out._backward = bw
    return out


def conv1x1(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-pixel linear map on an H x W x C grid: equivalent to a matmul
    on the flattened HW x C matrix."""
    if x.data.ndim != 3 or w.data.ndim != 2:
        raise ShapeError(f"conv1x1: got x {x.shape}, w {w.shape}")
    h, wd, c = x.shape
    cin, cout = w.shape
    if c != cin or b.shape != (cout,):
        raise ShapeError(f"conv1x1: x {x.shape}, w {w.shape}, b {b.shape}")
    out = Tensor(x.data.reshape(h * wd, c) @ w.data + b.data, (x, w, b))
    out.data = out.data.reshape(h, wd, cout)

    def bw(g):
        gf = g.reshape(h * wd, cout)
        x.accumulate((gf @ w.data.T).reshape(x.shape))
        w.accumulate(x.data.reshape(h * wd, c).T @ gf)
        b.accumulate(gf.sum(axis=0))

    out._backward = bw
    return out


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    h, w, c = x.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    cols = np.empty((ho, wo, kh, kw, c), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j, :] = xp[i : i + stride * ho : stride, j : j + stride * wo : stride, :]
    return cols.reshape(ho * wo, kh * kw * c), ho, wo


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D convolution on H x W x Cin with a kh x kw x Cin x Cout kernel."""
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: got x {x.shape}, w {w.shape}")
    kh, kw, cin, cout = w.shape
    if x.shape[2] != cin or b.shape != (cout,):
        raise ShapeError(f"conv2d: x {x.shape}, w {w.shape}, b {b.shape}")
    cols, ho, wo = _im2col(x.data, kh, kw, stride, pad)
    wf = w.data.reshape(kh * kw * cin, cout)
    out = Tensor((cols @ wf + b.data).reshape(ho, wo, cout), (x, w, b))

    def bw(g):
        gf = g.reshape(ho * wo, cout)
        w.accumulate((cols.T @ gf).reshape(w.shape))
        b.accumulate(gf.sum(axis=0))
        # scatter-add of d(cols) back onto the padded input
        dcols = (gf @ wf.T).reshape(ho, wo, kh, kw, cin)
        h, wd, _ = x.shape
        dxp = np.zeros((h + 2 * pad, wd + 2 * pad, cin))
        for i in range(kh):
            for j in range(kw):
                dxp[i : i + stride * ho : stride, j : j + stride * wo : stride, :] += dcols[:, :, i, j, :]
        x.accumulate(dxp[pad : pad + h, pad : pad + wd, :] if pad else dxp)

    out._backward = bw
    return out


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Replicate each pixel of an H x W x C grid into a factor x factor block."""
    if x.data.ndim != 3:
        raise ShapeError(f"upsample_nearest: got shape {x.shape}")
    out = Tensor(np.repeat(np.repeat(x.data, factor, axis=0), factor, axis=1), (x,))
    h, w, c = x.shape

    def bw(g):
        x.accumulate(g.reshape(h, factor, w, factor, c).sum(axis=(1, 3)))

    out._backward = bw
    return out


def cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean over pixels of -log softmax(logits)[target class].

    `logits` is H x W x K; `target` an integer H x W class mask.
    """
    if logits.data.ndim != 3:
        raise ShapeError(f"cross_entropy: logits shape {logits.shape}")
    h, w, k = logits.shape
    target = np.asarray(target)
    if target.shape != (h, w):
        raise ShapeError(f"cross_entropy: target shape {target.shape} vs logits {logits.shape}")
    if target.min() < 0 or target.max() >= k:
        raise InputError(f"cross_entropy: class ids outside [0, {k})")
    z = logits.data - np.max(logits.data, axis=2, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=2))
    picked = np.take_along_axis(z, target[:, :, None], axis=2)[:, :, 0]
    out = Tensor(np.mean(lse - picked).reshape(()), (logits,))

    def bw(g):
        p = np.exp(z - lse[:, :, None])
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, target[:, :, None], 1.0, axis=2)
        logits.accumulate(float(g) * (p - onehot) / (h * w))

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# reverse pass and verification


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, iter(root._parents))]
    seen.add(id(root))
    while stack:
        node, it = stack[-1]
        advanced = False
        for parent in it:
            if id(parent) not in seen:
                seen.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def backward(loss: Tensor) -> None:
    """Reverse-topological gradient accumulation from a scalar loss.

    Calling backward twice on the same loss node raises ContractError;
    rebuild the graph per forward pass instead.
    """
    if loss.size != 1:
        raise ContractError(f"backward: loss has shape {loss.shape}, expected scalar")
    if getattr(loss, "grad", None) is not None:
        raise ContractError("backward: called twice on the same loss node")
    order = _toposort(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps the parameter list to a scalar Tensor and must rebuild the
    graph on every call.  Relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise InputError("grad_check: eps must be positive")
    for p in params:
        p.grad = None
    loss = f(params)
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = f(params).item()
            flat[idx] = orig - eps
            lo = f(params).item()
            flat[idx] = orig
            numeric = (hi - lo) / (2.0 * eps)
            an = a.reshape(-1)[idx]
            rel = abs(an - numeric) / max(abs(an), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
