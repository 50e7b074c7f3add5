"""Branch/trunk operator model: h(s, p) = <Branch(s), Trunk(p)>.

Holds the model container, its empirical risk and exact gradients, the
weight-Lipschitz machinery (Monte Carlo estimate and analytic bound), and
checkpoint I/O.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import InputError

BOUNDED_OUTPUTS = ("sigmoid", "tanh")


@dataclass
class DeepONetModel:
    """A branch net and a trunk net sharing output dimension q."""

    branch: nn.MlpParams
    trunk: nn.MlpParams

    def __post_init__(self):
        if self.branch.spec.out_dim != self.trunk.spec.out_dim:
            raise InputError(
                f"branch q={self.branch.spec.out_dim} != trunk q={self.trunk.spec.out_dim}"
            )

    @property
    def q(self) -> int:
        return self.branch.spec.out_dim

    @property
    def c_bound(self) -> float:
        """Sup-norm bound on branch/trunk outputs: 1 for sigmoid/tanh gates."""
        if (
            self.branch.spec.output_activation in BOUNDED_OUTPUTS
            and self.trunk.spec.output_activation in BOUNDED_OUTPUTS
        ):
            return 1.0
        return math.inf

    def copy(self) -> "DeepONetModel":
        return DeepONetModel(self.branch.copy(), self.trunk.copy())


@dataclass
class Dataset:
    """Training triples (s_i, p_i, y_i) stored as arrays, plus metadata.

    s has shape (n, m), p has shape (n, d2), y has shape (n,). B bounds the
    labels: |y_i| <= B, measured as max|y| unless the generator overrode it.
    """

    s: np.ndarray
    p: np.ndarray
    y: np.ndarray
    B: float
    sensor_grid: np.ndarray
    noise_std: float = 0.0
    seed: int | None = None
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.sensor_grid = np.asarray(self.sensor_grid, dtype=np.float64)
        if self.s.ndim != 2 or self.p.ndim != 2 or self.y.ndim != 1:
            raise InputError("s and p must be 2-d, y 1-d")
        if not (self.s.shape[0] == self.p.shape[0] == self.y.shape[0]):
            raise InputError("s, p, y row counts disagree")
        if self.sensor_grid.shape[0] != self.s.shape[1]:
            raise InputError("sensor grid length != sensor count m")
        if self.noise_std < 0:
            raise InputError("noise_std must be >= 0")
        if self.y.size and np.max(np.abs(self.y)) > self.B:
            raise InputError("label bound B violated: max|y| > B")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.s.shape[1]

    @property
    def d2(self) -> int:
        return self.p.shape[1]

    def take(self, indices) -> "Dataset":
        """Row subset sharing the metadata (B stays the original bound)."""
        return Dataset(
            s=self.s[indices],
            p=self.p[indices],
            y=self.y[indices],
            B=self.B,
            sensor_grid=self.sensor_grid,
            noise_std=self.noise_std,
            seed=self.seed,
            generator=self.generator,
        )


def don_forward(model: DeepONetModel, s: np.ndarray, p: np.ndarray) -> float:
    """Scalar model output <Branch(s), Trunk(p)> for one (s, p) pair."""
    b = nn.forward(model.branch, s)
    t = nn.forward(model.trunk, p)
    return float(b @ t)


def don_forward_batch(model: DeepONetModel, s: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vector of model outputs for row-aligned batches s (n, m), p (n, d2)."""
    b = nn.forward_batch(model.branch, s)
    t = nn.forward_batch(model.trunk, p)
    return np.einsum("ij,ij->i", b, t)


def empirical_risk(model: DeepONetModel, dataset: Dataset) -> float:
    """Mean squared residual (1/n) sum_i (y_i - h(s_i, p_i))^2."""
    if dataset.n == 0:
        raise InputError("empirical risk of an empty dataset is undefined")
    h = don_forward_batch(model, dataset.s, dataset.p)
    r = dataset.y - h
    return float(np.mean(r * r))


def loss_grads(
    model: DeepONetModel, batch: Dataset
) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact gradient of the batch empirical risk w.r.t. both flat vectors.

    Per sample, the residual r_i = h_i - y_i feeds (2/n) r_i * Trunk(p_i)
    into the branch output and (2/n) r_i * Branch(s_i) into the trunk output.
    """
    if batch.n == 0:
        raise InputError("cannot take gradients on an empty batch")
    b_out = nn.forward_batch(model.branch, batch.s)
    t_out = nn.forward_batch(model.trunk, batch.p)
    h = np.einsum("ij,ij->i", b_out, t_out)
    r = h - batch.y
    loss = float(np.mean(r * r))
    scale = 2.0 / batch.n
    branch_grads = nn.backward_batch(model.branch, batch.s, (scale * r)[:, None] * t_out)
    trunk_grads = nn.backward_batch(model.trunk, batch.p, (scale * r)[:, None] * b_out)
    return branch_grads, trunk_grads, loss


def _uniform_in_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Uniform draw from the Euclidean ball of the given radius."""
    z = rng.standard_normal(dim)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        return np.zeros(dim)
    r = radius * rng.uniform() ** (1.0 / dim)
    return z * (r / norm)


def estimate_J(
    spec: nn.MlpSpec,
    weight_bound: float,
    input_domain: tuple[np.ndarray, np.ndarray],
    pairs: int,
    seed,
    inputs_per_pair: int = 8,
) -> float:
    """Monte Carlo lower estimate of the weight-Lipschitz constant.

    Samples weight pairs uniformly in the 2-norm ball of radius
    ``weight_bound`` and inputs uniformly in the box ``input_domain``
    (lo, hi vectors); returns the max of ||f_w1(x) - f_w2(x)||_inf /
    ||w1 - w2||. This is a lower bound on the true constant.
    """
    if pairs < 1:
        raise InputError("need at least one weight pair")
    lo = np.asarray(input_domain[0], dtype=np.float64)
    hi = np.asarray(input_domain[1], dtype=np.float64)
    if lo.shape != (spec.in_dim,) or hi.shape != (spec.in_dim,):
        raise InputError("input box must be (lo, hi) vectors of the input dim")
    rng = np.random.default_rng(seed)
    dim = nn.param_count(spec)
    best = 0.0
    for _ in range(pairs):
        w1 = _uniform_in_ball(rng, dim, weight_bound)
        w2 = _uniform_in_ball(rng, dim, weight_bound)
        dw = np.linalg.norm(w1 - w2)
        xs = rng.uniform(lo, hi, size=(inputs_per_pair, spec.in_dim))
        if dw == 0.0:
            continue  # degenerate pair
        f1 = nn.forward_batch(nn.MlpParams(spec, w1), xs)
        f2 = nn.forward_batch(nn.MlpParams(spec, w2), xs)
        ratio = float(np.max(np.abs(f1 - f2))) / dw
        best = max(best, ratio)
    return best


def j_upper_bound(W: float, p: int, Q: int, depth: int, R: float) -> float:
    """Analytic weight-Lipschitz bound (W sqrt(pQ))^(2 depth) * Q * R * sqrt(p).

    Evaluated in log space; returns +inf when the value overflows float64.
    """
    if W < 1.0:
        raise InputError("the analytic bound requires W >= 1")
    if p < 1 or Q < 1 or depth < 1 or R <= 0:
        raise InputError("p, Q, depth must be >= 1 and R > 0")
    log_val = (
        2.0 * depth * (math.log(W) + 0.5 * math.log(p * Q))
        + math.log(Q)
        + math.log(R)
        + 0.5 * math.log(p)
    )
    if log_val > 709.0:  # exp overflow threshold for float64
        return math.inf
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "donlab-checkpoint-v1"


def save_checkpoint(
    model: DeepONetModel,
    path,
    seeds: dict | None = None,
    adam_branch: nn.AdamState | None = None,
    adam_trunk: nn.AdamState | None = None,
    epoch: int = 0,
) -> None:
    """Write the model (and optionally optimizer state) as round-trip-exact JSON."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "q": model.q,
        "seeds": seeds or {},
        "epoch": epoch,
        "branch": {"spec": model.branch.spec.to_dict(), "flat": model.branch.flat.tolist()},
        "trunk": {"spec": model.trunk.spec.to_dict(), "flat": model.trunk.flat.tolist()},
        "adam_branch": adam_branch.to_dict() if adam_branch is not None else None,
        "adam_trunk": adam_trunk.to_dict() if adam_trunk is not None else None,
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path):
    """Read a checkpoint; returns (model, adam_branch, adam_trunk, epoch, seeds)."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"{path} is not a donlab checkpoint")
    model = DeepONetModel(
        branch=nn.MlpParams(
            nn.MlpSpec.from_dict(payload["branch"]["spec"]),
            np.array(payload["branch"]["flat"], dtype=np.float64),
        ),
        trunk=nn.MlpParams(
            nn.MlpSpec.from_dict(payload["trunk"]["spec"]),
            np.array(payload["trunk"]["flat"], dtype=np.float64),
        ),
    )
    ab = payload.get("adam_branch")
    at = payload.get("adam_trunk")
    return (
        model,
        nn.AdamState.from_dict(ab) if ab else None,
        nn.AdamState.from_dict(at) if at else None,
        int(payload.get("epoch", 0)),
        payload.get("seeds", {}),
    )
