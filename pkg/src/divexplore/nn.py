"""Small dense networks with hand-written backprop, optimizers and the
probability/distance helpers used by the agent losses.

Arrays are float64 numpy arrays. Weights are stored as (fan_in, fan_out)
so a batch ``x`` of shape (B, fan_in) maps to ``x @ W + b``.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")
KL_FLOOR = 1e-10
_LOG_KL_FLOOR = float(np.log(KL_FLOOR))

_MAGIC = b"DVXMLP"
_FORMAT_VERSION = 1


class ShapeError(ValueError):
    pass


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, a, grad):
    # grad w.r.t. pre-activation given grad w.r.t. activation output
    if name == "tanh":
        return grad * (1.0 - a * a)
    if name == "relu":
        return grad * (z > 0.0)
    return grad


class Mlp:
    """Feed-forward network.

    ``layers`` is a list of ``(W, b, activation)``. ``params`` exposes the
    flat ``[W0, b0, W1, b1, ...]`` list that gradients and optimizers use.
    """

    def __init__(self, layers):
        if not layers:
            raise ShapeError("an Mlp needs at least one layer")
        parsed = []
        prev = None
        for k, (w, b, act) in enumerate(layers):
            w = np.array(w, dtype=np.float64, ndmin=2)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if act not in ACTIVATIONS:
                raise ValueError(f"layer {k}: unknown activation {act!r}")
            if w.shape[1] != b.shape[0]:
                raise ShapeError(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if prev is not None and w.shape[0] != prev:
                raise ShapeError(f"layer {k}: input dim {w.shape[0]} does not chain with previous output {prev}")
            prev = w.shape[1]
            parsed.append((w, b, act))
        # one contiguous buffer; weights and biases are views into it
        self.flat = np.empty(sum(w.size + b.size for w, b, _ in parsed))
        self.weights, self.biases, self.activations = [], [], []
        off = 0
        for w, b, act in parsed:
            wv = self.flat[off : off + w.size].reshape(w.shape)
            off += w.size
            bv = self.flat[off : off + b.size]
            off += b.size
            wv[...] = w
            bv[...] = b
            self.weights.append(wv)
            self.biases.append(bv)
            self.activations.append(act)
        self._cache = None

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, hidden="tanh", output="identity"):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
        layers = []
        n = len(sizes) - 1
        for k in range(n):
            fan_in, fan_out = sizes[k], sizes[k + 1]
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            layers.append((w, b, output if k == n - 1 else hidden))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def num_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        return Mlp([(w.copy(), b.copy(), a) for w, b, a in zip(self.weights, self.biases, self.activations)])

    def load_params_from(self, other: "Mlp") -> None:
        if [p.shape for p in self.params] != [p.shape for p in other.params]:
            raise ShapeError("nets are not structurally identical")
        self.flat[...] = other.flat

    def forward(self, x, cache=True) -> np.ndarray:
        """Evaluate the net. 1-D input gives 1-D output; 2-D input is a batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"input shape {x.shape[1:] if not single else x.shape[1:]} does not match input_dim {self.input_dim}")
        xs, zs = [x], []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            h = _act(act, z)
            zs.append(z)
            xs.append(h)
        if cache:
            self._cache = (xs, zs, single)
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_out, input_grad=False):
        """Backprop ``grad_out`` (dLoss/dOutput) through the last cached forward.

        Returns gradients aligned with ``params``; with ``input_grad=True``
        returns ``(grads, dLoss/dInput)``.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        xs, zs, single = self._cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != xs[-1].shape:
            raise ShapeError(f"output gradient shape {g.shape} vs output {xs[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            g = _act_grad(self.activations[k], zs[k], xs[k + 1], g)
            grads[2 * k] = xs[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or input_grad:
                g = g @ self.weights[k].T
        if input_grad:
            return grads, (g[0] if single else g)
        return grads

    # -- checkpoint format -------------------------------------------------
    # magic, u32 version, u32 layer count, then per layer u32 in, u32 out,
    # u8 activation code; then per layer row-major W followed by b as
    # little-endian float64.

    def to_bytes(self) -> bytes:
        head = [_MAGIC, struct.pack("<II", _FORMAT_VERSION, len(self.weights))]
        for w, act in zip(self.weights, self.activations):
            head.append(struct.pack("<IIB", w.shape[0], w.shape[1], ACTIVATIONS.index(act)))
        body = [np.ascontiguousarray(p, dtype="<f8").tobytes() for p in self.params]
        return b"".join(head + body)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Mlp":
        if data[: len(_MAGIC)] != _MAGIC:
            raise ValueError("not an Mlp checkpoint (bad magic)")
        off = len(_MAGIC)
        version, n = struct.unpack_from("<II", data, off)
        off += 8
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = []
        for _ in range(n):
            fi, fo, code = struct.unpack_from("<IIB", data, off)
            off += 9
            dims.append((fi, fo, ACTIVATIONS[code]))
        layers = []
        for fi, fo, act in dims:
            w = np.frombuffer(data, dtype="<f8", count=fi * fo, offset=off).reshape(fi, fo)
            off += 8 * fi * fo
            b = np.frombuffer(data, dtype="<f8", count=fo, offset=off)
            off += 8 * fo
            layers.append((w.astype(np.float64), b.astype(np.float64), act))
        if off != len(data):
            raise ValueError("trailing bytes in checkpoint")
        return cls(layers)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_bytes(Path(path).read_bytes())


def save_nets(path, nets: dict) -> None:
    """Write several named nets into one checkpoint file."""
    chunks = [struct.pack("<I", len(nets))]
    for name, net in nets.items():
        key = name.encode("utf-8")
        blob = net.to_bytes()
        chunks.append(struct.pack("<I", len(key)) + key + struct.pack("<Q", len(blob)) + blob)
    Path(path).write_bytes(b"".join(chunks))


def load_nets(path) -> dict:
    data = Path(path).read_bytes()
    (n,) = struct.unpack_from("<I", data, 0)
    off = 4
    out = {}
    for _ in range(n):
        (klen,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off : off + klen].decode("utf-8")
        off += klen
        (blen,) = struct.unpack_from("<Q", data, off)
        off += 8
        out[name] = Mlp.from_bytes(data[off : off + blen])
        off += blen
    return out


# -- optimizers ---------------------------------------------------------------


class Optimizer:
    """SGD or Adam over one flat parameter vector, updated in place.

    ``params`` is normally ``net.flat``; gradients may be passed flat or as
    the per-layer list returned by ``Mlp.backward``.
    """

    def __init__(self, params, kind="adam", lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not isinstance(params, np.ndarray) or params.ndim != 1:
            raise TypeError("Optimizer expects a flat parameter vector (e.g. net.flat)")
        self.params = params
        self.kind = kind
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        if kind == "adam":
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)

    def step(self, grads) -> None:
        g = grads if isinstance(grads, np.ndarray) else np.concatenate([np.ravel(x) for x in grads])
        if g.shape != self.params.shape:
            raise ShapeError(f"gradient size {g.shape} vs parameters {self.params.shape}")
        self.t += 1
        if self.lr == 0.0:
            return
        p = self.params
        if self.kind == "sgd":
            p -= self.lr * g
            return
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * g
        self.v *= b2
        self.v += (1.0 - b2) * (g * g)
        m_hat = self.m / (1.0 - b1**self.t)
        v_hat = self.v / (1.0 - b2**self.t)
        p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- probability and distance primitives -------------------------------------


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis, stabilised by max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise ValueError("log_softmax of an empty vector")
    s = z - z.max(axis=-1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def kl_divergence(p, q) -> float:
    """KL(p || q) with 0*log(0/q) = 0 and q floored at 1e-10."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"kl_divergence: length mismatch {p.shape} vs {q.shape}")
    mask = p > 0
    pm = p[mask]
    return float(np.sum(pm * (np.log(pm) - np.log(np.maximum(q[mask], KL_FLOOR)))))


def softmax_kl(logits_p, logits_q):
    """Row-wise KL(softmax(logits_p) || softmax(logits_q)) and its gradient
    w.r.t. ``logits_p`` (``logits_q`` is treated as a constant).

    Returns ``(kl, p, dkl_dlogits)`` with kl of shape (B,).
    """
    logp = log_softmax(logits_p)
    logq = np.maximum(log_softmax(logits_q), _LOG_KL_FLOOR)
    p = np.exp(logp)
    diff = logp - logq
    kl = np.sum(p * diff, axis=-1)
    grad = p * (diff - kl[..., None])
    return kl, p, grad


def entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return -np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=-1)


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


# -- finite-difference oracle ------------------------------------------------


def numeric_gradient(params, loss_fn: Callable[[], float], h=1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params``
    (perturbed in place and restored)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a, dtype=np.float64)
        n = np.asarray(n, dtype=np.float64)
        if a.size == 0:
            continue
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradient_check(net: Mlp, x, scalar_loss, h=1e-5) -> float:
    """Compare backprop gradients with central differences.

    ``scalar_loss(output) -> (loss, dloss/doutput)``.
    """
    if net.num_params() >= 10_000:
        raise ValueError("gradient_check is meant for nets with fewer than 1e4 parameters")
    out = net.forward(x)
    _, dout = scalar_loss(out)
    analytic = net.backward(dout)
    numeric = numeric_gradient(net.params, lambda: scalar_loss(net.forward(x, cache=False))[0], h=h)
    return max_relative_error(analytic, numeric)
