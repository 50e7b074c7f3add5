"""Dense feed-forward networks with exact reverse-mode gradients and Adam.

Everything is float64 and purely functional: parameters live in a single
flat vector, and every operation returns fresh arrays so that repeated
calls with the same inputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("sigmoid", "tanh", "linear")
INIT_SCHEMES = ("he", "xavier")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one fully-connected net.

    layer_dims lists the input dimension first and the output dimension
    last, so the number of weight layers is ``len(layer_dims) - 1``.
    """

    layer_dims: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"
    init_scheme: str = "he"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2:
            raise ConfigurationError("layer_dims needs at least input and output dims")
        if any(d < 1 for d in self.layer_dims):
            raise ConfigurationError(f"all layer dims must be >= 1, got {self.layer_dims}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigurationError(f"unknown output activation {self.output_activation!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigurationError(f"unknown init scheme {self.init_scheme!r}")

    @property
    def depth(self) -> int:
        """Number of weight layers."""
        return len(self.layer_dims) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "init_scheme": self.init_scheme,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(
            layer_dims=tuple(d["layer_dims"]),
            hidden_activation=d.get("hidden_activation", "relu"),
            output_activation=d.get("output_activation", "linear"),
            init_scheme=d.get("init_scheme", "he"),
        )


def param_count(spec: MlpSpec) -> int:
    """Total number of weights and biases: sum of d_in*d_out + d_out per layer."""
    dims = spec.layer_dims
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class MlpParams:
    """One concrete network: a spec plus its flat float64 parameter vector."""

    spec: MlpSpec
    flat: np.ndarray

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.ndim != 1 or self.flat.shape[0] != param_count(self.spec):
            raise InputError(
                f"flat vector has length {self.flat.shape}, "
                f"expected ({param_count(self.spec)},)"
            )

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, self.flat.copy())


def _layer_slices(spec: MlpSpec):
    """Yield (weight_slice, bias_slice, out_dim, in_dim) per layer, in order."""
    dims = spec.layer_dims
    off = 0
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        w_sl = slice(off, off + n_in * n_out)
        off += n_in * n_out
        b_sl = slice(off, off + n_out)
        off += n_out
        yield w_sl, b_sl, n_out, n_in


def unflatten(params: MlpParams) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) views, W of shape (out, in)."""
    out = []
    for w_sl, b_sl, n_out, n_in in _layer_slices(params.spec):
        out.append((params.flat[w_sl].reshape(n_out, n_in), params.flat[b_sl]))
    return out


def flatten(spec: MlpSpec, layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Inverse of :func:`unflatten`; the round trip is bit-exact."""
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    flat = np.concatenate(parts)
    if flat.shape[0] != param_count(spec):
        raise InputError("layer shapes inconsistent with spec")
    return flat


def init_mlp(spec: MlpSpec, seed) -> MlpParams:
    """Draw weights per the spec's init scheme; biases are zero.

    he: N(0, 2/fan_in); xavier: N(0, 2/(fan_in+fan_out)). Deterministic in seed.
    """
    rng = np.random.default_rng(seed)
    flat = np.zeros(param_count(spec))
    for w_sl, b_sl, n_out, n_in in _layer_slices(spec):
        if spec.init_scheme == "he":
            std = np.sqrt(2.0 / n_in)
        else:
            std = np.sqrt(2.0 / (n_in + n_out))
        flat[w_sl] = rng.normal(0.0, std, size=n_in * n_out)
    return MlpParams(spec, flat)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow warnings for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return _sigmoid(z)
    return z  # linear


def _activation_deriv(z: np.ndarray, a: np.ndarray, name: str) -> np.ndarray:
    """Derivative of the activation, given pre-activation z and output a."""
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)  # linear


def forward_batch(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Forward pass for a batch: x of shape (n, in_dim) -> (n, out_dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.in_dim:
        raise InputError(
            f"expected input shape (n, {params.spec.in_dim}), got {x.shape}"
        )
    layers = unflatten(params)
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w.T + b
        name = (
            params.spec.output_activation
            if i == len(layers) - 1
            else params.spec.hidden_activation
        )
        a = _activate(z, name)
    return a


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"expected a 1-d input, got shape {x.shape}")
    return forward_batch(params, x[None, :])[0]


def backward_batch(
    params: MlpParams, x: np.ndarray, out_grads: np.ndarray
) -> np.ndarray:
    """Gradient of sum_i <out_grads[i], forward(params, x[i])> w.r.t. flat.

    Exact reverse-mode differentiation; shapes (n, in_dim) and (n, out_dim).
    """
    x = np.asarray(x, dtype=np.float64)
    out_grads = np.asarray(out_grads, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.in_dim:
        raise InputError(f"expected input shape (n, {params.spec.in_dim}), got {x.shape}")
    if out_grads.shape != (x.shape[0], params.spec.out_dim):
        raise InputError(
            f"expected out_grads shape {(x.shape[0], params.spec.out_dim)}, "
            f"got {out_grads.shape}"
        )
    layers = unflatten(params)
    n_layers = len(layers)

    # forward, caching pre-activations and activations
    acts = [x]
    zs = []
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w.T + b
        name = (
            params.spec.output_activation
            if i == n_layers - 1
            else params.spec.hidden_activation
        )
        a = _activate(z, name)
        zs.append(z)
        acts.append(a)

    grad = np.zeros_like(params.flat)
    slices = list(_layer_slices(params.spec))
    delta = out_grads * _activation_deriv(
        zs[-1], acts[-1], params.spec.output_activation
    )
    for i in range(n_layers - 1, -1, -1):
        w, _ = layers[i]
        w_sl, b_sl, _, _ = slices[i]
        grad[w_sl] = (delta.T @ acts[i]).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if i > 0:
            # acts[i] is the activated output of layer i-1, matching zs[i-1]
            delta = (delta @ w) * _activation_deriv(
                zs[i - 1], acts[i], params.spec.hidden_activation
            )
    return grad


def backward(params: MlpParams, x: np.ndarray, out_grad: np.ndarray) -> np.ndarray:
    """Gradient of <out_grad, forward(params, x)> w.r.t. the flat vector."""
    x = np.asarray(x, dtype=np.float64)
    out_grad = np.asarray(out_grad, dtype=np.float64)
    if x.ndim != 1 or out_grad.ndim != 1:
        raise InputError("backward expects 1-d input and output-gradient vectors")
    return backward_batch(params, x[None, :], out_grad[None, :])


def param_l2_norm(params: MlpParams) -> float:
    """Euclidean norm of the flat parameter vector."""
    return float(np.linalg.norm(params.flat))


def project_to_ball(params: MlpParams, radius: float) -> MlpParams:
    """Rescale the flat vector onto the 2-norm ball of the given radius.

    A no-op (same values) when the vector is already inside the ball; used
    as the optional weight-constraint switch during training.
    """
    if radius <= 0:
        raise InputError("projection radius must be > 0")
    norm = param_l2_norm(params)
    if norm <= radius:
        return MlpParams(params.spec, params.flat.copy())
    return MlpParams(params.spec, params.flat * (radius / norm))


@dataclass
class AdamState:
    """First/second moment accumulators and hyperparameters for Adam."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.m.shape != self.v.shape:
            raise InputError("m and v must have the same shape")
        if self.t < 0:
            raise InputError("step counter must be >= 0")

    def to_dict(self) -> dict:
        return {
            "m": self.m.tolist(),
            "v": self.v.tolist(),
            "t": self.t,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        return cls(
            m=np.array(d["m"], dtype=np.float64),
            v=np.array(d["v"], dtype=np.float64),
            t=int(d["t"]),
            lr=float(d["lr"]),
            beta1=float(d["beta1"]),
            beta2=float(d["beta2"]),
            eps=float(d["eps"]),
        )


def adam_init(n_params: int, lr: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Fresh optimizer state with zero moments."""
    return AdamState(
        m=np.zeros(n_params), v=np.zeros(n_params), t=0,
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(
    state: AdamState, params: MlpParams, grads: np.ndarray
) -> tuple[AdamState, MlpParams]:
    """One bias-corrected Adam update; returns fresh (state, params)."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.flat.shape or state.m.shape != params.flat.shape:
        raise InputError("gradient / state length does not match parameter vector")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_flat = params.flat - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(
        m=m, v=v, t=t, lr=state.lr, beta1=state.beta1,
        beta2=state.beta2, eps=state.eps,
    )
    return new_state, MlpParams(params.spec, new_flat)
