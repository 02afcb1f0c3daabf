"""Reverse-mode automatic differentiation over dense numpy arrays.

A Tensor wraps an ndarray and records the backward closure of the op that
produced it.  Calling .backward() on a scalar output topologically sorts the
graph and accumulates gradients into every tensor with requires_grad set.

All math is float64.  Shapes follow numpy broadcasting; gradients of
broadcast operands are reduced back to the operand shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadKernel, IndexOutOfRange, NonFinite, ShapeMismatch


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    # collapse leading axes numpy added
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    # collapse axes that were stretched from size 1
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "name")

    def __init__(self, data, requires_grad=False, _prev=(), name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._prev = _prev
        self.name = name

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without grad needs a scalar output")
            grad = np.ones_like(self.data)
        # iterative DFS: recursion depth is unbounded on long chains
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.data.shape)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        # closures reference their own output node, forming cycles that keep
        # whole graphs alive until a gc pass; a graph is single-shot, so drop
        # the edges now and let refcounting free intermediates promptly
        for node in reversed(topo):
            node._backward = None
            node._prev = ()

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, self.requires_grad or other.requires_grad,
                     _prev=(self, other))

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad, self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(out.grad, other.data.shape)
        out._backward = _bw
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, self.requires_grad or other.requires_grad,
                     _prev=(self, other))

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad * other.data, self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(out.grad * self.data, other.data.shape)
        out._backward = _bw
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else Tensor(other) * -1.0)

    def __rsub__(self, other):
        return Tensor(other) + (-self)

    def __truediv__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self * other ** -1.0

    def __rtruediv__(self, other):
        return Tensor(other) * self ** -1.0

    def __pow__(self, p):
        assert isinstance(p, (int, float)), "only scalar exponents"
        out = Tensor(self.data ** p, self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * p * self.data ** (p - 1)
        out._backward = _bw
        return out

    def __matmul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeMismatch("matmul operands must be at least 2-D")
        if self.data.shape[-1] != other.data.shape[-2]:
            raise ShapeMismatch(f"matmul {self.data.shape} @ {other.data.shape}")
        out = Tensor(self.data @ other.data, self.requires_grad or other.requires_grad,
                     _prev=(self, other))

        def _bw():
            if self.requires_grad:
                self.grad += _unbroadcast(out.grad @ other.data.swapaxes(-1, -2),
                                          self.data.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(self.data.swapaxes(-1, -2) @ out.grad,
                                           other.data.shape)
        out._backward = _bw
        return out

    # -- elementwise functions -------------------------------------------

    def exp(self):
        out = Tensor(np.exp(self.data), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * out.data
        out._backward = _bw
        return out

    def log(self):
        out = Tensor(np.log(self.data), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad / self.data
        out._backward = _bw
        return out

    def tanh(self):
        out = Tensor(np.tanh(self.data), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * (1.0 - out.data * out.data)
        out._backward = _bw
        return out

    def sigmoid(self):
        # tanh form is overflow-free on both sides
        out = Tensor(0.5 * (1.0 + np.tanh(0.5 * self.data)), self.requires_grad,
                     _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * out.data * (1.0 - out.data)
        out._backward = _bw
        return out

    def softplus(self):
        out = Tensor(np.logaddexp(0.0, self.data), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad * 0.5 * (1.0 + np.tanh(0.5 * self.data))
        out._backward = _bw
        return out

    # -- reductions -------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), self.requires_grad,
                     _prev=(self,))

        def _bw():
            if self.requires_grad:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self.grad += np.broadcast_to(g, self.data.shape)
        out._backward = _bw
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ops --------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad.reshape(self.data.shape)
        out._backward = _bw
        return out

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        out = Tensor(self.data.transpose(axes), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += out.grad.transpose(inv)
        out._backward = _bw
        return out

    def __getitem__(self, idx):
        out = Tensor(self.data[idx], self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                np.add.at(self.grad, idx, out.grad)
        out._backward = _bw
        return out

    def flip(self, axis):
        out = Tensor(np.flip(self.data, axis=axis), self.requires_grad, _prev=(self,))

        def _bw():
            if self.requires_grad:
                self.grad += np.flip(out.grad, axis=axis)
        out._backward = _bw
        return out


class Parameter(Tensor):
    """A named, trainable tensor.  Gradient is zeroed at step start."""

    __slots__ = ()

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


# -- free-function graph ops ---------------------------------------------


def concat(tensors, axis=0):
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    req = any(t.requires_grad for t in tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), req,
                 _prev=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(lo, hi)
                t.grad += out.grad[tuple(sl)]
    out._backward = _bw
    return out


def stack(tensors, axis=0):
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    req = any(t.requires_grad for t in tensors)
    out = Tensor(np.stack([t.data for t in tensors], axis=axis), req,
                 _prev=tuple(tensors))

    def _bw():
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.grad += np.take(out.grad, i, axis=axis)
    out._backward = _bw
    return out


def pad_edge(x: Tensor, axis: int, before: int, after: int) -> Tensor:
    """Replicate-pad x along axis."""
    if before == 0 and after == 0:
        return x
    xm = np.moveaxis(x.data, axis, 0)
    parts = []
    if before:
        parts.append(np.broadcast_to(xm[0], (before,) + xm.shape[1:]))
    parts.append(xm)
    if after:
        parts.append(np.broadcast_to(xm[-1], (after,) + xm.shape[1:]))
    data = np.moveaxis(np.concatenate(parts, axis=0), 0, axis)
    out = Tensor(data, x.requires_grad, _prev=(x,))
    n = xm.shape[0]

    def _bw():
        if x.requires_grad:
            gm = np.moveaxis(out.grad, axis, 0)
            gx = gm[before:before + n].copy()
            if before:
                gx[0] += gm[:before].sum(axis=0)
            if after:
                gx[-1] += gm[before + n:].sum(axis=0)
            x.grad += np.moveaxis(gx, 0, axis)
    out._backward = _bw
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map with weight layout (out, in): y = x @ W^T + b."""
    if x.shape[-1] != weight.shape[-1]:
        raise ShapeMismatch(f"linear: x {x.shape} vs weight {weight.shape}")
    y = x @ weight.transpose()
    if bias is not None:
        y = y + bias
    return y


def embedding_lookup(table: Tensor, idx) -> Tensor:
    """Row gather; gradient scatters to the selected rows only."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexOutOfRange(f"index outside [0, {table.shape[0]})")
    out = Tensor(table.data[idx], table.requires_grad, _prev=(table,))

    def _bw():
        if table.requires_grad:
            np.add.at(table.grad, idx, out.grad)
    out._backward = _bw
    return out


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "tanh":
        return x.tanh()
    if kind == "sigmoid":
        return x.sigmoid()
    if kind == "silu":
        return x * x.sigmoid()
    if kind == "gelu":
        # tanh approximation
        c = float(np.sqrt(2.0 / np.pi))
        return x * 0.5 * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
    raise ShapeMismatch(f"unknown activation {kind!r}")


def softmax_lastdim(x: Tensor) -> Tensor:
    # shift by a detached max: softmax is shift-invariant so the grad is exact
    shifted = x - Tensor(x.data.max(axis=-1, keepdims=True))
    e = shifted.exp()
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    xn = xc * (var + eps) ** -0.5
    return xn * gain + shift


def multi_head_attention(q, k, v, wq, wk, wv, wo, heads,
                         bq=None, bv=None, bo=None, mask=None,
                         return_attn=False):
    """Scaled dot-product attention with input/output projections.

    q: (..., Lq, d); k, v: (..., Lk, d).  Self-attention passes one source for
    all three; cross-attention passes distinct sources.  The key projection
    carries no bias: softmax is invariant to a constant score shift, so a key
    bias would be an inert parameter.  return_attn=True additionally returns
    the post-softmax weights as a plain array for inspection.
    """
    d = q.shape[-1]
    if d % heads != 0:
        raise ShapeMismatch(f"d={d} not divisible by heads={heads}")
    dh = d // heads

    def split(t):
        # (..., L, d) -> (..., heads, L, dh)
        s = t.shape[:-2] + (t.shape[-2], heads, dh)
        perm = tuple(range(len(s) - 3)) + (len(s) - 2, len(s) - 3, len(s) - 1)
        return t.reshape(s).transpose(perm)

    qh = split(linear(q, wq, bq))
    kh = split(linear(k, wk))
    vh = split(linear(v, wv, bv))
    scores = (qh @ kh.transpose(tuple(range(kh.ndim - 2)) + (kh.ndim - 1, kh.ndim - 2))
              ) * (1.0 / np.sqrt(dh))
    if mask is not None:
        scores = scores + Tensor(np.where(mask, 0.0, -1e30))
    attn = softmax_lastdim(scores)
    ctx = attn @ vh  # (..., heads, Lq, dh)
    perm = tuple(range(ctx.ndim - 3)) + (ctx.ndim - 2, ctx.ndim - 3, ctx.ndim - 1)
    merged = ctx.transpose(perm).reshape(ctx.shape[:-3] + (ctx.shape[-2], d))
    out = linear(merged, wo, bo)
    if return_attn:
        return out, attn.data.copy()
    return out


def scan_recurrence(a: Tensor, b: Tensor) -> Tensor:
    """Linear recurrence h_t = a_t * h_{t-1} + b_t along axis 1, h_0 = 0.

    a, b: (B, L, ...) with identical shapes.  Fused: the backward pass runs
    the adjoint recurrence G_{t-1} = g_{t-1} + a_t * G_t in one loop.
    """
    if a.shape != b.shape:
        raise ShapeMismatch(f"scan_recurrence {a.shape} vs {b.shape}")
    L = a.shape[1]
    h = np.empty_like(b.data)
    h[:, 0] = b.data[:, 0]
    for t in range(1, L):
        h[:, t] = a.data[:, t] * h[:, t - 1] + b.data[:, t]
    out = Tensor(h, a.requires_grad or b.requires_grad, _prev=(a, b))

    def _bw():
        G = out.grad[:, L - 1].copy()
        da = np.zeros_like(a.data) if a.requires_grad else None
        db = np.zeros_like(b.data) if b.requires_grad else None
        for t in range(L - 1, -1, -1):
            if db is not None:
                db[:, t] = G
            if da is not None and t > 0:
                da[:, t] = G * h[:, t - 1]
            if t > 0:
                G = out.grad[:, t - 1] + a.data[:, t] * G
        if a.requires_grad:
            a.grad += da
        if b.requires_grad:
            b.grad += db
    out._backward = _bw
    return out


def lstm_layer(x: Tensor, w: Tensor, u: Tensor, bias: Tensor,
               reverse: bool = False, extra: Tensor | None = None) -> Tensor:
    """Single-direction LSTM over (B, L, in) -> (B, L, d).

    w: (4d, in), u: (4d, d), bias: (4d,); gate order i, f, g, o.  Zero initial
    state.  reverse=True runs right-to-left within the window (output stays in
    input time order).  Fused backward-through-time.

    extra (B, L, 4d), when given, is added to the gate preactivations.  This
    is the block-matrix form of concatenating a second feature stream to x:
    [x ; s] @ [W | W_s]^T == x @ W^T + s @ W_s^T, so a caller can realize
    per-step input concatenation without changing the shape of w.
    """
    B, L, _ = x.shape
    d4, d = u.shape
    if w.shape[0] != d4 or bias.shape[0] != d4 or d4 != 4 * d:
        raise ShapeMismatch("lstm_layer weight shapes disagree")
    if extra is not None and extra.shape != (B, L, d4):
        raise ShapeMismatch(f"extra {extra.shape} != {(B, L, d4)}")
    xd = x.data[:, ::-1] if reverse else x.data
    xw = xd @ w.data.T + bias.data  # (B, L, 4d)
    if extra is not None:
        xw = xw + (extra.data[:, ::-1] if reverse else extra.data)
    ig = np.empty((B, L, d)); fg = np.empty((B, L, d))
    gg = np.empty((B, L, d)); og = np.empty((B, L, d))
    cs = np.empty((B, L, d)); tc = np.empty((B, L, d))
    hs = np.empty((B, L, d))
    hp = np.zeros((B, d)); cp = np.zeros((B, d))
    ut = u.data.T
    for t in range(L):
        z = xw[:, t] + hp @ ut
        ig[:, t] = 0.5 * (1.0 + np.tanh(0.5 * z[:, :d]))
        fg[:, t] = 0.5 * (1.0 + np.tanh(0.5 * z[:, d:2 * d]))
        gg[:, t] = np.tanh(z[:, 2 * d:3 * d])
        og[:, t] = 0.5 * (1.0 + np.tanh(0.5 * z[:, 3 * d:]))
        cs[:, t] = fg[:, t] * cp + ig[:, t] * gg[:, t]
        tc[:, t] = np.tanh(cs[:, t])
        hs[:, t] = og[:, t] * tc[:, t]
        hp = hs[:, t]; cp = cs[:, t]
    hout = hs[:, ::-1] if reverse else hs
    prev = (x, w, u, bias) + ((extra,) if extra is not None else ())
    req = any(t.requires_grad for t in prev)
    out = Tensor(hout.copy(), req, _prev=prev)

    def _bw():
        go = out.grad[:, ::-1] if reverse else out.grad
        dh_next = np.zeros((B, d)); dc_next = np.zeros((B, d))
        dz_all = np.empty((B, L, 4 * d))
        for t in range(L - 1, -1, -1):
            dh = go[:, t] + dh_next
            dc = dc_next + dh * og[:, t] * (1.0 - tc[:, t] ** 2)
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((B, d))
            di = dc * gg[:, t]
            df = dc * c_prev
            dg = dc * ig[:, t]
            do = dh * tc[:, t]
            dz = dz_all[:, t]
            dz[:, :d] = di * ig[:, t] * (1.0 - ig[:, t])
            dz[:, d:2 * d] = df * fg[:, t] * (1.0 - fg[:, t])
            dz[:, 2 * d:3 * d] = dg * (1.0 - gg[:, t] ** 2)
            dz[:, 3 * d:] = do * og[:, t] * (1.0 - og[:, t])
            dh_next = dz @ u.data
            dc_next = dc * fg[:, t]
        if x.requires_grad:
            gx = dz_all @ w.data
            x.grad += gx[:, ::-1] if reverse else gx
        if w.requires_grad:
            w.grad += np.einsum("blk,bli->ki", dz_all, xd)
        if u.requires_grad:
            hprev = np.concatenate([np.zeros((B, 1, d)), hs[:, :-1]], axis=1)
            u.grad += np.einsum("blk,bld->kd", dz_all, hprev)
        if bias.requires_grad:
            bias.grad += dz_all.sum(axis=(0, 1))
        if extra is not None and extra.requires_grad:
            extra.grad += dz_all[:, ::-1] if reverse else dz_all
    out._backward = _bw
    return out


def moving_avg_decompose(x: Tensor, kernel: int):
    """Centered moving average with replicate padding; returns (trend, seasonal).

    trend + seasonal == x exactly (seasonal is defined as the difference).
    """
    if kernel < 1 or kernel % 2 == 0:
        raise BadKernel(f"kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return x, x - x
    half = kernel // 2
    L = x.shape[1]
    xp = pad_edge(x, axis=1, before=half, after=half)
    acc = xp[:, 0:L]
    for j in range(1, kernel):
        acc = acc + xp[:, j:j + L]
    trend = acc * (1.0 / kernel)
    return trend, x - trend


@dataclass
class SelectiveScanParams:
    """Parameters of one selective-scan channel block.

    A = -exp(log_A) keeps the state transition strictly stable; W_delta/b_delta
    produce the per-step discretization Delta; W_B and W_C make the input and
    output maps input-dependent; skip_d is the direct passthrough term.
    """
    log_A: Tensor    # (d, N)
    w_delta: Tensor  # (d, d)
    b_delta: Tensor  # (d,)
    w_b: Tensor      # (N, d)
    w_c: Tensor      # (N, d)
    skip_d: Tensor   # (d,)


def selective_scan(u: Tensor, p: SelectiveScanParams) -> Tensor:
    """Input-dependent linear state recurrence over (B, L, d).

    Per step: Delta_t = softplus(W_delta u_t + b_delta);
    h_t = exp(Delta_t (x) A) . h_{t-1} + (Delta_t (x) B_t) . u_t with
    B_t = W_B u_t, C_t = W_C u_t, h_0 = 0; y_t = <C_t, h_t> + D . u_t.
    Zero-order hold discretizes A; the input path uses the Euler form.
    """
    B, L, d = u.shape
    if p.log_A.shape[0] != d:
        raise ShapeMismatch(f"scan params d={p.log_A.shape[0]} vs input d={d}")
    N = p.log_A.shape[1]
    delta = linear(u, p.w_delta, p.b_delta).softplus()       # (B, L, d)
    A = -(p.log_A.exp())                                     # (d, N), strictly negative
    dA = (delta.reshape(B, L, d, 1) * A).exp()               # (B, L, d, N)
    Bt = linear(u, p.w_b)                                    # (B, L, N)
    dBu = delta.reshape(B, L, d, 1) * Bt.reshape(B, L, 1, N) * u.reshape(B, L, d, 1)
    h = scan_recurrence(dA, dBu)                             # (B, L, d, N)
    Ct = linear(u, p.w_c)                                    # (B, L, N)
    y = (h * Ct.reshape(B, L, 1, N)).sum(axis=3) + p.skip_d * u
    assert_finite(y.data, "selective_scan")
    return y


def grad_check(fn, inputs, eps: float = 1e-5, rng=None, max_checks=None) -> float:
    """Max relative error between reverse-mode and central finite differences.

    fn maps the input tensors to a scalar Tensor.  Checks every element, or a
    random sample of max_checks elements per input when given an rng.
    """
    for t in inputs:
        t.requires_grad = True
    out = fn(*inputs)
    out.backward()
    analytic = [t.grad.copy() for t in inputs]
    worst = 0.0
    for t, g in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        idxs = range(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idxs = sorted(rng.choice(flat.size, size=max_checks, replace=False))
        for i in idxs:
            keep = flat[i]
            flat[i] = keep + eps
            fp = float(fn(*inputs).data)
            flat[i] = keep - eps
            fm = float(fn(*inputs).data)
            flat[i] = keep
            fd = (fp - fm) / (2.0 * eps)
            a = g.reshape(-1)[i]
            rel = abs(a - fd) / max(1e-8, abs(a) + abs(fd))
            worst = max(worst, rel)
    return worst


def assert_finite(arr: np.ndarray, where: str):
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite values in {where}")
