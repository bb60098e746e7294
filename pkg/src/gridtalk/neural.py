"""Minimal neural-network core: dense, LSTM, and 1-D conv/pool layers with
exact backpropagation, Adam, parameter checkpointing, and finite-difference
gradient checking.

Everything is plain numpy. Networks run in float64 by default (the
reproducibility and gradient-check setting); float32 halves memory for long
training runs. A ``QNetwork`` is a sequence encoder (LSTM, dense-on-flattened,
or conv stack) whose output is concatenated with auxiliary turn features and
fed through a three-layer fully connected head ending in linear Q-values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes


class NeuralError(Exception):
    pass


class ShapeError(NeuralError):
    """Input or parameter shapes that do not fit the network spec."""


class NonFiniteGradientError(NeuralError):
    """A gradient block went NaN/inf; carries the parameter name."""


class CheckpointError(NeuralError):
    """Unreadable, truncated, or incompatible checkpoint file."""


def resolve_dtype(name: str) -> np.dtype:
    if name == "f64":
        return np.dtype(np.float64)
    if name == "f32":
        return np.dtype(np.float32)
    raise ValueError(f"unknown dtype {name!r}; use 'f32' or 'f64'")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # piecewise form avoids exp overflow for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Layers


class Dense:
    """Fully connected layer, optionally with a ReLU on top."""

    def __init__(self, n_in: int, n_out: int, activation: str, rng: np.random.Generator, dtype):
        if activation not in ("linear", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        limit = math.sqrt(6.0 / (n_in + n_out))
        self.W = rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self.activation = activation

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def forward(self, x: np.ndarray):
        z = x @ self.W + self.b
        y = np.maximum(z, 0) if self.activation == "relu" else z
        return y, (x, z)

    def backward(self, dy: np.ndarray, cache):
        x, z = cache
        dz = dy * (z > 0) if self.activation == "relu" else dy
        grads = {"W": x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.W.T, grads


class LSTM:
    """Single-layer LSTM over (batch, time, features) with per-sample lengths.

    Gate order in the packed weight matrices is input, forget, candidate,
    output. Steps at or beyond a sample's length leave its hidden and cell
    state untouched, so the returned hidden state is each sample's state at
    its own final step.
    """

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator, dtype):
        self.n_in = n_in
        self.hidden = hidden
        lim_x = math.sqrt(6.0 / (n_in + 4 * hidden))
        lim_h = math.sqrt(6.0 / (hidden + 4 * hidden))
        self.Wx = rng.uniform(-lim_x, lim_x, size=(n_in, 4 * hidden)).astype(dtype)
        self.Wh = rng.uniform(-lim_h, lim_h, size=(hidden, 4 * hidden)).astype(dtype)
        self.b = np.zeros(4 * hidden, dtype=dtype)

    def params(self) -> dict[str, np.ndarray]:
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b}

    def forward(self, x: np.ndarray, lengths: np.ndarray):
        B, T, _ = x.shape
        H = self.hidden
        dtype = self.Wx.dtype
        h = np.zeros((B, H), dtype=dtype)
        c = np.zeros((B, H), dtype=dtype)
        steps = []
        for t in range(T):
            active = (lengths > t)[:, None]
            xt = x[:, t, :]
            z = xt @ self.Wx + h @ self.Wh + self.b
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H : 2 * H])
            g = np.tanh(z[:, 2 * H : 3 * H])
            o = _sigmoid(z[:, 3 * H :])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((xt, h, c, i, f, g, o, tc, active))
            h = np.where(active, h_new, h)
            c = np.where(active, c_new, c)
        return h, (steps, x.shape)

    def backward(self, dh_out: np.ndarray, cache):
        steps, x_shape = cache
        B, T, _ = x_shape
        H = self.hidden
        dWx = np.zeros_like(self.Wx)
        dWh = np.zeros_like(self.Wh)
        db = np.zeros_like(self.b)
        dx = np.zeros(x_shape, dtype=self.Wx.dtype)
        dh = dh_out.copy()
        dc = np.zeros_like(dh_out)
        for t in reversed(range(T)):
            xt, h_prev, c_prev, i, f, g, o, tc, active = steps[t]
            dh_a = np.where(active, dh, 0)
            dc_a = np.where(active, dc, 0)
            do = dh_a * tc
            dc_new = dc_a + dh_a * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [
                    dc_new * g * i * (1.0 - i),
                    dc_new * c_prev * f * (1.0 - f),
                    dc_new * i * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            dWx += xt.T @ dz
            dWh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t, :] = dz @ self.Wx.T
            dh = np.where(active, dz @ self.Wh.T, dh)
            dc = np.where(active, dc_new * f, dc)
        return dx, {"Wx": dWx, "Wh": dWh, "b": db}


class Conv1D:
    """Valid (no padding) 1-D convolution along the time axis, with ReLU."""

    def __init__(self, n_in: int, filters: int, kernel: int, rng: np.random.Generator, dtype):
        self.kernel = kernel
        limit = math.sqrt(6.0 / (kernel * n_in + filters))
        self.W = rng.uniform(-limit, limit, size=(kernel, n_in, filters)).astype(dtype)
        self.b = np.zeros(filters, dtype=dtype)

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def forward(self, x: np.ndarray):
        B, T, _ = x.shape
        t_out = T - self.kernel + 1
        if t_out < 1:
            raise ShapeError(f"conv kernel {self.kernel} does not fit sequence length {T}")
        z = np.broadcast_to(self.b, (B, t_out, self.b.shape[0])).copy()
        for k in range(self.kernel):
            z += x[:, k : k + t_out, :] @ self.W[k]
        y = np.maximum(z, 0)
        return y, (x, z)

    def backward(self, dy: np.ndarray, cache):
        x, z = cache
        t_out = z.shape[1]
        dz = dy * (z > 0)
        dW = np.zeros_like(self.W)
        dx = np.zeros_like(x)
        for k in range(self.kernel):
            dW[k] = np.einsum("btc,btf->cf", x[:, k : k + t_out, :], dz)
            dx[:, k : k + t_out, :] += dz @ self.W[k].T
        return dx, {"W": dW, "b": dz.sum(axis=(0, 1))}


class MaxPool1D:
    """Non-overlapping max pooling along time; a trailing remainder shorter
    than the pool size is dropped."""

    def __init__(self, pool: int):
        self.pool = pool

    def forward(self, x: np.ndarray):
        B, T, C = x.shape
        t_out = T // self.pool
        if t_out < 1:
            raise ShapeError(f"pool size {self.pool} does not fit sequence length {T}")
        xr = x[:, : t_out * self.pool, :].reshape(B, t_out, self.pool, C)
        idx = xr.argmax(axis=2)
        out = np.take_along_axis(xr, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return out, (x.shape, idx)

    def backward(self, dy: np.ndarray, cache):
        x_shape, idx = cache
        B, T, C = x_shape
        t_out = idx.shape[1]
        dxr = np.zeros((B, t_out, self.pool, C), dtype=dy.dtype)
        np.put_along_axis(dxr, idx[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[:, : t_out * self.pool, :] = dxr.reshape(B, t_out * self.pool, C)
        return dx


# ---------------------------------------------------------------------------
# Encoders (the architecture variants ahead of the shared head)


class LSTMEncoder:
    def __init__(self, spec: "NetworkSpec", rng, dtype):
        self.lstm = LSTM(spec.turn_width, spec.hidden, rng, dtype)
        self.out_width = spec.hidden

    def params(self):
        return {f"lstm.{k}": v for k, v in self.lstm.params().items()}

    def forward(self, x, lengths):
        return self.lstm.forward(x, lengths)

    def backward(self, dh, cache):
        _, grads = self.lstm.backward(dh, cache)
        return {f"lstm.{k}": v for k, v in grads.items()}


class DenseEncoder:
    """Flattens the padded history and applies one hidden dense layer."""

    def __init__(self, spec: "NetworkSpec", rng, dtype):
        self.n_flat = spec.turn_limit * spec.turn_width
        self.dense = Dense(self.n_flat, spec.hidden, "relu", rng, dtype)
        self.out_width = spec.hidden

    def params(self):
        return {f"dense.{k}": v for k, v in self.dense.params().items()}

    def forward(self, x, lengths):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.n_flat:
            raise ShapeError(f"expected flattened width {self.n_flat}, got {flat.shape[1]}")
        return self.dense.forward(flat)

    def backward(self, dh, cache):
        _, grads = self.dense.backward(dh, cache)
        return {f"dense.{k}": v for k, v in grads.items()}


class ConvEncoder:
    """Two conv+pool blocks over the padded history, then flatten."""

    def __init__(self, spec: "NetworkSpec", rng, dtype):
        f1, f2 = spec.conv_filters
        self.conv1 = Conv1D(spec.turn_width, f1, spec.kernel, rng, dtype)
        self.pool1 = MaxPool1D(spec.pool)
        self.conv2 = Conv1D(f1, f2, spec.kernel, rng, dtype)
        self.pool2 = MaxPool1D(spec.pool)
        t = spec.turn_limit
        t = (t - spec.kernel + 1) // spec.pool
        t = (t - spec.kernel + 1) // spec.pool
        if t < 1:
            raise ShapeError("turn limit too small for the conv/pool stack")
        self.out_width = t * f2

    def params(self):
        out = {}
        for name, layer in (("conv1", self.conv1), ("conv2", self.conv2)):
            for k, v in layer.params().items():
                out[f"{name}.{k}"] = v
        return out

    def forward(self, x, lengths):
        y1, c1 = self.conv1.forward(x)
        p1, cp1 = self.pool1.forward(y1)
        y2, c2 = self.conv2.forward(p1)
        p2, cp2 = self.pool2.forward(y2)
        B = x.shape[0]
        return p2.reshape(B, -1), (c1, cp1, c2, cp2, p2.shape)

    def backward(self, dh, cache):
        c1, cp1, c2, cp2, p2_shape = cache
        dp2 = dh.reshape(p2_shape)
        dy2 = self.pool2.backward(dp2, cp2)
        dp1, g2 = self.conv2.backward(dy2, c2)
        dy1 = self.pool1.backward(dp1, cp1)
        _, g1 = self.conv1.backward(dy1, c1)
        out = {f"conv1.{k}": v for k, v in g1.items()}
        out.update({f"conv2.{k}": v for k, v in g2.items()})
        return out


# ---------------------------------------------------------------------------
# Network spec and the Q-network container


@dataclass(frozen=True)
class NetworkSpec:
    """Complete architecture description; a checkpoint header serializes this
    and a fresh network can be rebuilt from it."""

    arch: str  # lstm | dnn | cnn
    turn_width: int = 19
    aux_width: int = 31
    actions: int = 9
    turn_limit: int = 30
    hidden: int = 64
    head_hidden: tuple[int, int] = (32, 32)
    conv_filters: tuple[int, int] = (64, 32)
    kernel: int = 3
    pool: int = 2
    dtype: str = "f64"

    def __post_init__(self):
        if self.arch not in ("lstm", "dnn", "cnn"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        resolve_dtype(self.dtype)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["head_hidden"] = list(self.head_hidden)
        out["conv_filters"] = list(self.conv_filters)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "NetworkSpec":
        obj = dict(obj)
        obj["head_hidden"] = tuple(obj["head_hidden"])
        obj["conv_filters"] = tuple(obj["conv_filters"])
        return cls(**obj)


_ENCODERS = {"lstm": LSTMEncoder, "dnn": DenseEncoder, "cnn": ConvEncoder}


class QNetwork:
    """Sequence encoder + aux concat + fully connected head -> Q-values.

    Forward is pure given the parameters; frozen networks are safe for
    concurrent readers. Parameter mutation (Adam, checkpoint load, target
    sync) is single-writer.
    """

    def __init__(self, spec: NetworkSpec, seed=0):
        self.spec = spec
        self.dtype = resolve_dtype(spec.dtype)
        rng = np.random.default_rng(seed)
        self.encoder = _ENCODERS[spec.arch](spec, rng, self.dtype)
        head_in = self.encoder.out_width + spec.aux_width
        h1, h2 = spec.head_hidden
        self.head = [
            Dense(head_in, h1, "relu", rng, self.dtype),
            Dense(h1, h2, "relu", rng, self.dtype),
            Dense(h2, spec.actions, "linear", rng, self.dtype),
        ]

    def params(self) -> dict[str, np.ndarray]:
        out = {f"enc.{k}": v for k, v in self.encoder.params().items()}
        for i, layer in enumerate(self.head):
            for k, v in layer.params().items():
                out[f"head.{i}.{k}"] = v
        return out

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params().values())

    def _check_inputs(self, x, lengths, aux):
        if x.ndim != 3 or x.shape[2] != self.spec.turn_width:
            raise ShapeError(f"history batch must be (B, T, {self.spec.turn_width}), got {x.shape}")
        if self.spec.arch in ("dnn", "cnn") and x.shape[1] != self.spec.turn_limit:
            raise ShapeError(
                f"{self.spec.arch} input must be padded to {self.spec.turn_limit} turns, got {x.shape[1]}"
            )
        if aux.shape != (x.shape[0], self.spec.aux_width):
            raise ShapeError(f"aux batch must be (B, {self.spec.aux_width}), got {aux.shape}")
        if lengths.shape != (x.shape[0],):
            raise ShapeError("lengths must be one int per batch row")

    def forward(self, x: np.ndarray, lengths: np.ndarray, aux: np.ndarray):
        """Batch forward pass. Returns (q, cache); pass the cache to
        ``backward``."""
        self._check_inputs(x, lengths, aux)
        enc_out, enc_cache = self.encoder.forward(x, lengths)
        h = np.concatenate([enc_out, aux], axis=1)
        head_caches = []
        for layer in self.head:
            h, cache = layer.forward(h)
            head_caches.append(cache)
        return h, (enc_cache, head_caches, enc_out.shape[1])

    def backward(self, cache, dq: np.ndarray) -> dict[str, np.ndarray]:
        """Exact gradients of a scalar loss with output gradient ``dq``."""
        enc_cache, head_caches, enc_width = cache
        grads: dict[str, np.ndarray] = {}
        d = dq
        for i in reversed(range(len(self.head))):
            d, layer_grads = self.head[i].backward(d, head_caches[i])
            for k, v in layer_grads.items():
                grads[f"head.{i}.{k}"] = v
        denc = d[:, :enc_width]
        for k, v in self.encoder.backward(denc, enc_cache).items():
            grads[f"enc.{k}"] = v
        return grads

    def copy_params_from(self, other: "QNetwork") -> None:
        mine, theirs = self.params(), other.params()
        if list(mine) != list(theirs):
            raise ShapeError("parameter layout mismatch between networks")
        for name, arr in mine.items():
            arr[...] = theirs[name]

    def clone(self) -> "QNetwork":
        twin = QNetwork(self.spec, seed=0)
        twin.copy_params_from(self)
        return twin


def q_regression_loss(net: QNetwork, x, lengths, aux, actions, targets):
    """MSE on the taken action's Q-value, other actions masked out.

    Returns (loss, grads, q).
    """
    q, cache = net.forward(x, lengths, aux)
    rows = np.arange(q.shape[0])
    diff = q[rows, actions] - np.asarray(targets, dtype=q.dtype)
    loss = float(np.mean(diff * diff))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * diff / q.shape[0]
    grads = net.backward(cache, dq)
    return loss, grads, q


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most
    ``max_norm``; returns the pre-clip norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Optimizer state; moment arrays are keyed like the parameter dict."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            self.m.setdefault(name, np.zeros_like(p))
            self.v.setdefault(name, np.zeros_like(p))


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place."""
    state.ensure(params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter block {name!r}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_MAGIC = b"GTCKPT1\n"


def save_params(
    net: QNetwork,
    adam: AdamState | None,
    path: str | Path,
    *,
    episode: int = 0,
    rng_state: dict | None = None,
) -> None:
    """Write magic, a one-line JSON header, then raw little-endian parameter
    blocks in spec order followed by Adam first/second moment blocks."""
    params = net.params()
    names = list(params)
    if adam is not None:
        adam.ensure(params)
    header = {
        "format_version": 1,
        "spec": net.spec.to_dict(),
        "dtype": net.spec.dtype,
        "params": [[name, list(params[name].shape)] for name in names],
        "adam": None
        if adam is None
        else {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps, "step": adam.step},
        "episode": episode,
        "rng_state": rng_state,
    }
    wire = "<f8" if net.spec.dtype == "f64" else "<f4"
    chunks = [CHECKPOINT_MAGIC, json.dumps(header, separators=(",", ":")).encode("utf-8"), b"\n"]
    for name in names:
        chunks.append(np.ascontiguousarray(params[name], dtype=wire).tobytes())
    if adam is not None:
        for moments in (adam.m, adam.v):
            for name in names:
                chunks.append(np.ascontiguousarray(moments[name], dtype=wire).tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_params(path: str | Path, *, expect_spec: NetworkSpec | None = None):
    """Rebuild (net, adam, meta) from a checkpoint. Refuses version, spec, or
    size mismatches; ``meta`` carries episode count and saved RNG state."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    body = raw[len(CHECKPOINT_MAGIC) :]
    nl = body.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(body[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != 1:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    spec = NetworkSpec.from_dict(header["spec"])
    if expect_spec is not None and spec != expect_spec:
        raise CheckpointError(
            f"{path}: checkpoint spec ({spec.arch}, {spec.dtype}) does not match the expected "
            f"spec ({expect_spec.arch}, {expect_spec.dtype})"
        )
    net = QNetwork(spec, seed=0)
    params = net.params()
    declared = header["params"]
    if [n for n, _ in declared] != list(params):
        raise CheckpointError(f"{path}: parameter layout does not match the spec")
    for name, shape in declared:
        if tuple(shape) != params[name].shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name!r}: file says {shape}, spec needs "
                f"{list(params[name].shape)}"
            )
    wire = np.dtype("<f8" if spec.dtype == "f64" else "<f4")
    blob = body[nl + 1 :]
    n_blocks = 1 + (2 if header["adam"] is not None else 0)
    expected = n_blocks * sum(params[n].size for n in params) * wire.itemsize
    if len(blob) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes of blocks, found {len(blob)}")

    offset = 0

    def take(name: str) -> np.ndarray:
        nonlocal offset
        size = params[name].size * wire.itemsize
        arr = np.frombuffer(blob, dtype=wire, count=params[name].size, offset=offset)
        offset += size
        return arr.reshape(params[name].shape).astype(net.dtype)

    for name in params:
        params[name][...] = take(name)
    adam = None
    if header["adam"] is not None:
        a = header["adam"]
        adam = AdamState(lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], step=a["step"])
        adam.m = {name: take(name).copy() for name in params}
        adam.v = {name: take(name).copy() for name in params}
    meta = {"episode": header.get("episode", 0), "rng_state": header.get("rng_state")}
    return net, adam, meta


# ---------------------------------------------------------------------------
# Finite-difference gradient checking


def finite_difference_gradients(loss_fn, params: dict[str, np.ndarray], h: float = 1e-5):
    """Central-difference gradient of ``loss_fn()`` w.r.t. every parameter
    entry. ``loss_fn`` must recompute the loss from the live parameter arrays
    each call. Only meaningful in float64."""
    numeric = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            lp = loss_fn()
            flat_p[i] = orig - h
            lm = loss_fn()
            flat_p[i] = orig
            flat_g[i] = (lp - lm) / (2.0 * h)
        numeric[name] = g
    return numeric


def max_relative_error(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray], floor: float = 1e-3
) -> float:
    """Worst per-parameter relative error. The denominator floor keeps noise
    on near-zero gradients from counting as disagreement."""
    worst = 0.0
    for name, ga in analytic.items():
        gn = numeric[name]
        denom = np.maximum(np.abs(ga) + np.abs(gn), floor)
        worst = max(worst, float(np.max(np.abs(ga - gn) / denom)))
    return worst


def gradient_check(net: QNetwork, x, lengths, aux, actions, targets, h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences for the
    masked Q-regression loss on one batch."""
    _, analytic, _ = q_regression_loss(net, x, lengths, aux, actions, targets)

    def loss_fn():
        q, _ = net.forward(x, lengths, aux)
        rows = np.arange(q.shape[0])
        diff = q[rows, actions] - targets
        return float(np.mean(diff * diff))

    numeric = finite_difference_gradients(loss_fn, net.params(), h=h)
    return max_relative_error(analytic, numeric)
