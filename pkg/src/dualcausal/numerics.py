"""Dense float64 tensors with reverse-mode gradients.

Only the operations the pipeline needs are provided. Every op accepts an
optional leading batch shape (``x`` of shape ``(..., L, D)``) so that a
mini-batch of episodes runs through one graph.

Gradients are recorded on a tape of parent links; ``Tensor.backward`` walks
the tape in reverse topological order. ``no_grad`` disables recording, which
is what finite-difference evaluation uses.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericDomainError, ShapeError

__all__ = [
    "Tensor",
    "Param",
    "MHSAParams",
    "no_grad",
    "as_tensor",
    "add",
    "mul",
    "matmul",
    "sum_",
    "mean",
    "exp",
    "log",
    "sigmoid",
    "reshape",
    "swapaxes",
    "broadcast_to",
    "take",
    "concat",
    "softmax_temp",
    "log_softmax",
    "layer_norm",
    "linear",
    "mhsa_block",
    "mhsa_attention",
    "cross_entropy",
    "binary_cross_entropy_with_logits",
    "grad_check",
    "LN_EPS",
]

LN_EPS = 1e-5

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericDomainError(f"non-finite values in {what}")
    return arr


class Tensor:
    """An immutable float64 array plus (optionally) its place on the tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if seed is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.data)
        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): seed}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _tracks(parent):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


class Param(Tensor):
    """A named learnable leaf; ``grad`` always has the value's shape."""

    __slots__ = ("name",)

    def __init__(self, value, name: str):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape})"


def _tracks(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and _tracks(p):
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(_tracks(p) for p in parents):
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise -----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from exc
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}") from exc
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def exp(x: Tensor) -> Tensor:
    out = _finite(np.exp(x.data), "exp")
    return _make(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    if (x.data <= 0).any():
        raise NumericDomainError("log of a non-positive value")
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def sigmoid(x: Tensor) -> Tensor:
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


# linear algebra / reductions ---------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs operands with at least two axes")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner extents differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), backward)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(np.asarray(out), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(x: Tensor, shape) -> Tensor:
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def swapaxes(x: Tensor, a1: int, a2: int) -> Tensor:
    return _make(np.swapaxes(x.data, a1, a2), (x,), lambda g: (np.swapaxes(g, a1, a2),))


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError as exc:
        raise ShapeError(f"cannot broadcast {x.shape} to {tuple(shape)}") from exc
    return _make(out, (x,), lambda g: (_unbroadcast(g, x.shape),))


def take(x: Tensor, idx) -> Tensor:
    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(np.asarray(x.data[idx]), (x,), backward)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"cannot concatenate shapes {[x.shape for x in xs]}") from exc
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(xs), backward)


# normalizations ------------------------------------------------------------

def softmax_temp(logits, tau: float = 1.0, axis: int = -1) -> Tensor:
    """Temperature softmax along ``axis`` with max subtraction."""
    logits = as_tensor(logits)
    if not tau > 0:
        raise InvalidArgumentError(f"temperature must be positive, got {tau}")
    _finite(logits.data, "softmax input")
    z = logits.data / tau
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return ((out * (g - (g * out).sum(axis=axis, keepdims=True))) / tau,)

    return _make(out, (logits,), backward)


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    _finite(logits.data, "log_softmax input")
    z = logits.data - logits.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    soft = np.exp(out)
    return _make(out, (logits,), lambda g: (g - soft * g.sum(axis=axis, keepdims=True),))


def layer_norm(x, gain, bias, eps: float = LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit (population) variance.

    A constant slice has zero variance and maps to ``bias``.
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"gain/bias must have shape ({d},), got {gain.shape}, {bias.shape}")
    if eps < 0:
        raise InvalidArgumentError("eps must be non-negative")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    denom = var + eps
    # eps=0 with a constant slice: treat as zero output, not 0/0
    inv = np.divide(1.0, np.sqrt(denom), out=np.zeros_like(denom), where=denom > 0)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gx_hat = g * gain.data
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _make(out, (x, gain, bias), backward)


def linear(x, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias``; ``weight`` is (out, in)."""
    x = as_tensor(x)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
    squeeze = x.ndim == 1
    if squeeze:
        x = reshape(x, (1, -1))
    out = matmul(x, swapaxes(weight, 0, 1))
    if bias is not None:
        out = add(out, bias)
    return reshape(out, (weight.shape[0],)) if squeeze else out


# attention -------------------------------------------------------------------

@dataclass
class MHSAParams:
    """Parameters of one pre-norm residual attention block.

    There is no key bias: it adds a per-query constant to the attention logits
    and cancels in the softmax.
    """

    wq: Param
    wk: Param
    wv: Param
    wo: Param
    bq: Param
    bv: Param
    bo: Param
    ln_gain: Param
    ln_bias: Param

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, prefix: str = "blk", scale: float | None = None):
        s = 1.0 / math.sqrt(dim) if scale is None else scale
        mk = lambda n: Param(rng.normal(0.0, s, (dim, dim)), f"{prefix}.{n}")  # noqa: E731
        zb = lambda n: Param(np.zeros(dim), f"{prefix}.{n}")  # noqa: E731
        return cls(
            wq=mk("wq"), wk=mk("wk"), wv=mk("wv"), wo=mk("wo"),
            bq=zb("bq"), bv=zb("bv"), bo=zb("bo"),
            ln_gain=Param(np.ones(dim), f"{prefix}.ln_gain"),
            ln_bias=zb("ln_bias"),
        )

    def params(self) -> list[Param]:
        return [self.wq, self.wk, self.wv, self.wo, self.bq, self.bv, self.bo,
                self.ln_gain, self.ln_bias]


def _attend(x: Tensor, params: MHSAParams, heads: int, pos: Tensor | None):
    if heads < 1 or x.shape[-1] % heads:
        raise InvalidArgumentError(f"model width {x.shape[-1]} not divisible by {heads} heads")
    *lead, length, dim = x.shape
    dh = dim // heads
    h = layer_norm(x, params.ln_gain, params.ln_bias)
    if pos is not None:
        if pos.shape != (length, dim):
            raise ShapeError(f"positional embedding {pos.shape} does not match ({length}, {dim})")
        h = add(h, pos)

    def split(t):
        t = reshape(t, (*lead, length, heads, dh))
        return swapaxes(t, -3, -2)  # (..., heads, L, dh)

    q = split(linear(h, params.wq, params.bq))
    k = split(linear(h, params.wk))
    v = split(linear(h, params.wv, params.bv))
    att = softmax_temp(matmul(q, swapaxes(k, -1, -2)), tau=math.sqrt(dh), axis=-1)
    ctx = swapaxes(matmul(att, v), -3, -2)
    ctx = reshape(ctx, (*lead, length, dim))
    return add(x, linear(ctx, params.wo, params.bo)), att


def mhsa_block(x, params: MHSAParams, heads: int, pos: Tensor | None = None) -> Tensor:
    """One block: ``x + Attention(LN(x) + pos)`` with ``heads`` heads; ``x`` is (..., L, D)."""
    return _attend(as_tensor(x), params, heads, pos)[0]


def mhsa_attention(x, params: MHSAParams, heads: int, pos: Tensor | None = None) -> np.ndarray:
    """Attention weights (..., heads, L, L) that ``mhsa_block`` would use."""
    with no_grad():
        return _attend(as_tensor(x), params, heads, pos)[1].data


# losses -----------------------------------------------------------------------

def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under softmax(logits)."""
    targets = np.asarray(targets, dtype=np.int64)
    lp = log_softmax(logits, axis=-1)
    n = targets.shape[0]
    picked = take(lp, (np.arange(n), targets))
    return mul(sum_(picked), -1.0 / n)


def binary_cross_entropy_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean (over all entries) logistic loss against 0/1 ``targets``."""
    y = np.asarray(targets, dtype=np.float64)
    z = logits.data
    _finite(z, "logits")
    out = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)
    return _make(np.asarray(out.mean()), (logits,), lambda g: (g * (p - y) / n,))


# verification -----------------------------------------------------------------

def grad_check(loss_fn: Callable[[], Tensor], params: Iterable[Param], step: float = 1e-5,
               max_entries: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Largest relative error between tape gradients and central differences.

    ``loss_fn`` takes no arguments and reads the current values of ``params``.
    The error for one entry is ``|a - n| / max(1e-8, |a| + |n|)``. With
    ``max_entries`` set, each parameter larger than that is checked on a random
    subset of that many entries drawn from ``rng``.
    """
    if not step > 0:
        raise InvalidArgumentError("step must be positive")
    if max_entries is not None and max_entries < 1:
        raise InvalidArgumentError("max_entries must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise NumericDomainError("loss is not finite")
    loss.backward()
    worst = 0.0
    with no_grad():
        for p in params:
            analytic = p.grad.copy()
            flat = p.data.reshape(-1)
            entries = range(flat.size)
            if max_entries is not None and flat.size > max_entries:
                entries = np.sort(rng.choice(flat.size, max_entries, replace=False))
            for i in entries:
                orig = flat[i]
                flat[i] = orig + step
                up = float(loss_fn().data)
                flat[i] = orig - step
                down = float(loss_fn().data)
                flat[i] = orig
                if not (math.isfinite(up) and math.isfinite(down)):
                    raise NumericDomainError(f"loss not finite while perturbing {p.name}[{i}]")
                num = (up - down) / (2.0 * step)
                a = analytic.reshape(-1)[i]
                err = abs(a - num) / max(1e-8, abs(a) + abs(num))
                worst = max(worst, err)
    for p in params:
        p.zero_grad()
    return worst
