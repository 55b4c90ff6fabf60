"""Dense float64 tensors with a recorded gradient tape.

Every operation below computes its forward value with numpy and, when a
Tape is active and an input requires gradients, appends a record to the
tape.  ``backward(loss)`` walks the records in reverse, accumulating
vector-Jacobian products into ``Tensor.grad`` buffers.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "TapeError",
    "backward",
    "grad_check",
    "GradCheckReport",
    "matmul",
    "add",
    "scale",
    "elementwise_mul",
    "leaky_relu",
    "softmax",
    "layer_norm",
    "embedding_gather",
    "mean_pool",
    "concat",
    "dot",
    "exp",
    "log",
    "absolute",
    "mse_loss",
    "cross_entropy_loss",
    "transpose",
    "swapaxes",
    "reshape",
    "gather_pairs",
    "masked_row_logsumexp",
    "circular_conv",
    "l2_normalize_rows",
]


class ShapeError(ValueError):
    """Operands do not conform for the requested operation."""


class TapeError(RuntimeError):
    """Tape misuse: nested activation, backward without records, etc."""


class Tensor:
    """A dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._tape: "Tape | None" = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"


_STATE = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_STATE, "tape", None)


class Tape:
    """Ordered record of primitive applications within one execution context.

    Records are appended in forward execution order, so the list is already
    topologically sorted; the reverse walk in ``backward`` therefore visits
    each node exactly once.
    """

    def __init__(self):
        self._records: list[tuple[str, Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise TapeError("a Tape is already active in this thread")
        _STATE.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _STATE.tape = None

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        if loss.shape != ():
            raise ShapeError(
                f"backward requires a scalar loss, got shape {loss.shape}"
            )
        if not self._records:
            raise TapeError("backward called on an empty tape")
        loss.grad = np.ones((), dtype=np.float64)
        for _op, out, inputs, vjp in reversed(self._records):
            g = out.grad
            if g is None:
                continue
            for t, gi in zip(inputs, vjp(g)):
                if gi is None or not t.requires_grad:
                    continue
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += gi
        self._records.clear()


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on everything the loss depends on, then clear the tape."""
    tape = loss._tape
    if tape is None:
        raise TapeError("loss was not recorded on a tape")
    tape.backward(loss)


def _record(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._tape = tape
        tape._records.append((op, out, inputs, vjp))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Undo numpy broadcasting: sum over the axes that were expanded.
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _require_finite(op: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{op}: input contains non-finite values")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    def vjp(g):
        bt = np.swapaxes(b.data, -1, -2)
        at = np.swapaxes(a.data, -1, -2)
        return g @ bt, at @ g

    return _record("matmul", a.data @ b.data, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record("add", out, (a, b), vjp)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record("scale", a.data * c, (a,), lambda g: (g * c,))


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"elementwise_mul: shapes {a.shape} and {b.shape} do not broadcast")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record("elementwise_mul", out, (a, b), vjp)


def leaky_relu(x: Tensor, negative_slope: float = 0.01) -> Tensor:
    mask = np.where(x.data > 0, 1.0, negative_slope)
    return _record("leaky_relu", x.data * mask, (x,), lambda g: (g * mask,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    _require_finite("softmax", x.data)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return ((g - inner) * y,)

    return _record("softmax", y, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, axis: int = -1,
               eps: float = 1e-5) -> Tensor:
    n = x.shape[axis]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} "
            f"do not match axis extent {n}"
        )
    xm = np.moveaxis(x.data, axis, -1)
    mu = xm.mean(axis=-1, keepdims=True)
    var = xm.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xm - mu) * inv
    y = np.moveaxis(gain.data * xhat + bias.data, -1, axis)

    def vjp(g):
        gm = np.moveaxis(g, axis, -1)
        gx_hat = gm * gain.data
        # d/dx of (x - mu) / sqrt(var + eps), all statistics along the last axis
        term = gx_hat - gx_hat.mean(axis=-1, keepdims=True) \
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        gx = np.moveaxis(term * inv, -1, axis)
        red = tuple(range(gm.ndim - 1))
        return gx, (gm * xhat).sum(axis=red), gm.sum(axis=red)

    return _record("layer_norm", y, (x, gain, bias), vjp)


def embedding_gather(table: Tensor, ids) -> Tensor:
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"embedding_gather: ids must be 1-D, got {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ValueError(
            f"embedding_gather: id out of range for table with {table.shape[0]} rows"
        )

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _record("embedding_gather", table.data[idx], (table,), vjp)


def mean_pool(x: Tensor, axis: int) -> Tensor:
    n = x.shape[axis]

    def vjp(g):
        return (np.repeat(np.expand_dims(g / n, axis), n, axis=axis),)

    return _record("mean_pool", x.data.mean(axis=axis), (x,), vjp)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty input list")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record("concat", np.concatenate([t.data for t in tensors], axis=axis),
                   tuple(tensors), vjp)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot: need equal-length vectors, got {a.shape} and {b.shape}")
    return _record("dot", np.dot(a.data, b.data), (a, b),
                   lambda g: (g * b.data, g * a.data))


def exp(x: Tensor) -> Tensor:
    _require_finite("exp", x.data)
    y = np.exp(x.data)
    return _record("exp", y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    _require_finite("log", x.data)
    if np.any(x.data <= 0):
        raise ValueError("log: input must be strictly positive")
    return _record("log", np.log(x.data), (x,), lambda g: (g / x.data,))


def absolute(x: Tensor) -> Tensor:
    s = np.sign(x.data)
    return _record("absolute", np.abs(x.data), (x,), lambda g: (g * s,))


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    n = max(pred.data.size, 1)

    def vjp(g):
        d = g * 2.0 * diff / n
        return d, -d

    return _record("mse_loss", np.mean(diff * diff), (pred, target), vjp)


def cross_entropy_loss(logits: Tensor, labels) -> Tensor:
    _require_finite("cross_entropy_loss", logits.data)
    squeeze = logits.ndim == 1
    z = logits.data[None, :] if squeeze else logits.data
    if z.ndim != 2:
        raise ShapeError(f"cross_entropy_loss: logits must be 1-D or 2-D, got {logits.shape}")
    y = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    if y.shape != (z.shape[0],):
        raise ShapeError(
            f"cross_entropy_loss: {z.shape[0]} rows of logits but {y.shape} labels"
        )
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise ValueError(f"cross_entropy_loss: label out of range 0..{z.shape[1] - 1}")
    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(z.shape[0])
    loss = -logp[rows, y].mean()

    def vjp(g):
        gz = np.exp(logp)
        gz[rows, y] -= 1.0
        gz *= g / z.shape[0]
        return (gz[0] if squeeze else gz,)

    return _record("cross_entropy_loss", np.float64(loss), (logits,), vjp)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got {x.shape}")
    return _record("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


def swapaxes(x: Tensor, ax1: int, ax2: int) -> Tensor:
    return _record("swapaxes", np.swapaxes(x.data, ax1, ax2).copy(), (x,),
                   lambda g: (np.swapaxes(g, ax1, ax2),))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = x.shape
    return _record("reshape", x.data.reshape(shape).copy(), (x,),
                   lambda g: (g.reshape(orig),))


def gather_pairs(x: Tensor, rows, cols) -> Tensor:
    r = np.asarray(rows, dtype=np.intp)
    c = np.asarray(cols, dtype=np.intp)
    if x.ndim != 2 or r.shape != c.shape or r.ndim != 1:
        raise ShapeError("gather_pairs: need a matrix and equal-length index vectors")

    def vjp(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (r, c), g)
        return (gx,)

    return _record("gather_pairs", x.data[r, c], (x,), vjp)


def masked_row_logsumexp(x: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise log(sum(exp(x))) over entries where ``mask`` is True."""
    if x.ndim != 2 or mask.shape != x.shape:
        raise ShapeError("masked_row_logsumexp: mask must match a 2-D input")
    if not mask.any(axis=1).all():
        raise ValueError("masked_row_logsumexp: a row has no unmasked entries")
    neg = np.where(mask, x.data, -np.inf)
    m = neg.max(axis=1, keepdims=True)
    e = np.exp(neg - m)
    s = e.sum(axis=1, keepdims=True)
    out = (m + np.log(s)).ravel()

    def vjp(g):
        return (g[:, None] * e / s,)

    return _record("masked_row_logsumexp", out, (x,), vjp)


def circular_conv(a: Tensor, b: Tensor) -> Tensor:
    """Circular convolution via the discrete Fourier transform."""
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"circular_conv: need equal-length vectors, got {a.shape} and {b.shape}")
    fa = np.fft.fft(a.data)
    fb = np.fft.fft(b.data)
    out = np.fft.ifft(fa * fb).real

    def vjp(g):
        fg = np.fft.fft(g)
        ga = np.fft.ifft(fg * np.conj(fb)).real
        gb = np.fft.ifft(fg * np.conj(fa)).real
        return ga, gb

    return _record("circular_conv", out, (a, b), vjp)


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"l2_normalize_rows: expected a matrix, got {x.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    norms = np.maximum(norms, eps)
    y = x.data / norms

    def vjp(g):
        inner = (g * y).sum(axis=1, keepdims=True)
        return ((g - y * inner) / norms,)

    return _record("l2_normalize_rows", y, (x,), vjp)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_index: tuple[int, ...]
    analytic_at_worst: float
    numeric_at_worst: float
    tol: float
    passed: bool


def grad_check(fn, point, eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward against central finite differences of ``fn``.

    ``fn`` maps one Tensor to a scalar Tensor.  The error at each element is
    |analytic - numeric| / (max(|analytic|, |numeric|) + 1), i.e. relative
    for large gradients and absolute for vanishing ones.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"grad_check: eps {eps} outside [1e-7, 1e-3]")
    x = Tensor(np.array(point, dtype=np.float64), requires_grad=True)
    with Tape() as tape:
        out = fn(x)
        if out.shape != ():
            raise ShapeError(f"grad_check: fn must return a scalar, got {out.shape}")
        tape.backward(out)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    numeric = np.zeros_like(analytic)
    flat = x.data.ravel()
    num_flat = numeric.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(fn(Tensor(x.data)).data)
        flat[i] = orig - eps
        f_minus = float(fn(Tensor(x.data)).data)
        flat[i] = orig
        num_flat[i] = (f_plus - f_minus) / (2.0 * eps)

    denom = np.maximum(np.abs(analytic), np.abs(numeric)) + 1.0
    err = np.abs(analytic - numeric) / denom
    worst = np.unravel_index(int(np.argmax(err)), err.shape) if err.size else ()
    worst_err = float(err[worst]) if err.size else 0.0
    return GradCheckReport(
        max_rel_error=worst_err,
        worst_index=tuple(int(i) for i in worst),
        analytic_at_worst=float(analytic[worst]) if err.size else 0.0,
        numeric_at_worst=float(numeric[worst]) if err.size else 0.0,
        tol=tol,
        passed=worst_err <= tol,
    )
