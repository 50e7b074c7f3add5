"""Fixed-ratio scaling experiments.

Builds (q, n) grids at a fixed q / n^e ratio, sizes branch/trunk widths to
a near-constant parameter budget, trains each cell with mini-batch Adam,
and reports per-seed monotonicity of the best training loss along q.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import nn
from .datagen import AdrConfig, GrfConfig, build_adr_dataset
from .deeponet import Dataset, DeepONetModel, empirical_risk, loss_grads
from .errors import ConfigurationError, InputError, NumericalError

VALID_EXPONENTS = (0.5, 2.0 / 3.0, 1.0 / 6.0)


@dataclass
class ExperimentPlan:
    """Full description of one fixed-ratio suite."""

    exponent: float
    anchor_q: int
    anchor_n: int
    q_list: list[int]
    target_params: int
    depth: int = 5
    branch_in: int = 40
    trunk_in: int = 2
    epochs: int = 120
    batch_size: int = 256
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    adr: AdrConfig = field(default_factory=AdrConfig)
    grf_length_scale: float = 1e-3
    grf_jitter: float = 1e-10
    noise_std: float = 0.0
    points_per_function: int = 100
    hidden_activation: str = "relu"
    output_activation: str = "tanh"
    lr: float = 0.001
    param_tolerance: float = 0.05

    def __post_init__(self):
        if not any(math.isclose(self.exponent, e) for e in VALID_EXPONENTS):
            raise ConfigurationError(
                f"exponent must be one of 1/2, 2/3, 1/6; got {self.exponent}"
            )
        if self.anchor_n < 1 or self.anchor_q < 1:
            raise ConfigurationError("anchor (q0, n0) must be positive")
        if not self.q_list or sorted(self.q_list) != list(self.q_list):
            raise ConfigurationError("q_list must be non-empty and increasing")
        if self.depth < 2:
            raise ConfigurationError("depth must be >= 2 weight layers")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("bad epochs / batch size")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adr"] = {"D": self.adr.D, "k": self.adr.k, "nx": self.adr.nx, "nt": self.adr.nt}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        exponent = d.pop("exponent")
        if isinstance(exponent, str):
            num, _, den = exponent.partition("/")
            exponent = float(num) / float(den) if den else float(num)
        if "anchor" in d:
            q0, n0 = d.pop("anchor")
            d["anchor_q"], d["anchor_n"] = int(q0), int(n0)
        adr = d.pop("adr", {})
        return cls(exponent=float(exponent), adr=AdrConfig(**adr), **d)


def make_plan(anchor: tuple[int, int], q_list, exponent: float) -> list[tuple[int, int]]:
    """(q, n) pairs with n_i = round(n0 * (q_i / q0)^(1/e))."""
    q0, n0 = anchor
    if q0 < 1 or n0 < 1:
        raise InputError("anchor (q0, n0) must be positive")
    if exponent <= 0:
        raise InputError("exponent must be positive")
    out = []
    for q in q_list:
        n = int(math.floor(n0 * (q / q0) ** (1.0 / exponent) + 0.5))
        out.append((int(q), n))
    return out


def architecture_params(width: int, q: int, depth: int = 5,
                        branch_in: int = 40, trunk_in: int = 2) -> int:
    """Total parameter count of a branch+trunk pair at uniform hidden width.

    With depth weight layers per net this is
    2 (depth-2) w^2 + (branch_in + trunk_in + 2 (depth-2) + 2) w + 2 w q + 2 q,
    which for depth 5, inputs 40 and 2 reduces to 6 w^2 + 50 w + 2 w q + 2 q.
    """
    hid = depth - 2
    return (
        2 * hid * width * width
        + (branch_in + trunk_in + 2 * hid + 2) * width
        + 2 * width * q
        + 2 * q
    )


def size_architecture(target_params: int, q: int, depth: int = 5,
                      branch_in: int = 40, trunk_in: int = 2) -> int:
    """Integer hidden width minimizing |params - target_params|."""
    if depth < 2:
        raise InputError("depth must be >= 2")
    if q < 1 or target_params < 1:
        raise InputError("q and target_params must be positive")
    if architecture_params(1, q, depth, branch_in, trunk_in) > target_params:
        raise ConfigurationError(
            f"target {target_params} below the smallest model at q={q}"
        )
    a = 2 * (depth - 2)
    b = branch_in + trunk_in + 2 * (depth - 2) + 2 + 2 * q
    c = 2 * q - target_params
    if a == 0:
        w_star = -c / b
    else:
        w_star = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    candidates = {max(1, math.floor(w_star)), max(1, math.ceil(w_star))}
    return min(
        candidates,
        key=lambda w: (
            abs(architecture_params(w, q, depth, branch_in, trunk_in) - target_params),
            w,
        ),
    )


@dataclass
class PlannedCell:
    q: int
    n: int
    width: int
    param_count: int


def plan_cells(plan: ExperimentPlan) -> list[PlannedCell]:
    """Resolve the plan into concrete cells, enforcing the plan invariants."""
    pairs = make_plan((plan.anchor_q, plan.anchor_n), plan.q_list, plan.exponent)
    ns = [n for _, n in pairs]
    if sorted(ns) != ns or len(set(ns)) != len(ns):
        raise ConfigurationError("n values must be strictly increasing with q")
    cells = []
    for q, n in pairs:
        w = size_architecture(plan.target_params, q, plan.depth,
                              plan.branch_in, plan.trunk_in)
        count = architecture_params(w, q, plan.depth, plan.branch_in, plan.trunk_in)
        if abs(count - plan.target_params) > plan.param_tolerance * plan.target_params:
            raise ConfigurationError(
                f"cell q={q}: {count} params misses target {plan.target_params} "
                f"by more than {plan.param_tolerance:.0%}"
            )
        cells.append(PlannedCell(q=q, n=n, width=w, param_count=count))
    return cells


@dataclass
class CellResult:
    q: int
    n: int
    width: int
    param_count: int
    seed: int
    loss_curve: list[float]
    final_loss: float
    best_loss: float
    wall_time: float
    failed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SuiteResult:
    plan: ExperimentPlan
    cells: list[CellResult]

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if c.failed]


def train_deeponet(
    model: DeepONetModel,
    dataset: Dataset,
    epochs: int,
    batch_size: int,
    seed: int,
    lr: float = 0.001,
    adam_branch: nn.AdamState | None = None,
    adam_trunk: nn.AdamState | None = None,
    start_epoch: int = 0,
    weight_ball: float | None = None,
) -> tuple[DeepONetModel, nn.AdamState, nn.AdamState, list[float]]:
    """Mini-batch Adam training; logs full-dataset risk at each epoch end.

    The per-epoch shuffle is seeded by (seed, epoch index), so resuming from
    a checkpointed (model, optimizer state, epoch) continues the exact same
    trajectory as an uninterrupted run. With ``weight_ball`` set, both flat
    vectors are projected back onto that 2-norm ball after every step
    (bound-faithful mode); by default the norms are unconstrained and just
    reported by the callers.
    """
    if adam_branch is None:
        adam_branch = nn.adam_init(model.branch.flat.size, lr=lr)
    if adam_trunk is None:
        adam_trunk = nn.adam_init(model.trunk.flat.size, lr=lr)
    model = model.copy()
    curve = []
    n = dataset.n
    for epoch in range(start_epoch, start_epoch + epochs):
        perm = np.random.default_rng([seed, epoch]).permutation(n)
        for lo in range(0, n, batch_size):
            batch = dataset.take(perm[lo : lo + batch_size])
            gb, gt, _ = loss_grads(model, batch)
            adam_branch, model.branch = nn.adam_step(adam_branch, model.branch, gb)
            adam_trunk, model.trunk = nn.adam_step(adam_trunk, model.trunk, gt)
            if weight_ball is not None:
                model.branch = nn.project_to_ball(model.branch, weight_ball)
                model.trunk = nn.project_to_ball(model.trunk, weight_ball)
        loss = empirical_risk(model, dataset)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite training loss at epoch {epoch}")
        curve.append(loss)
    return model, adam_branch, adam_trunk, curve


def build_cell_dataset(plan: ExperimentPlan, n: int, seed) -> Dataset:
    """Generation for one cell: enough source functions, truncated to exactly n."""
    grf = GrfConfig(
        grid=plan.adr.x_grid,
        length_scale=plan.grf_length_scale,
        jitter=plan.grf_jitter,
    )
    ppf = plan.points_per_function
    num_functions = math.ceil(n / ppf)
    ds = build_adr_dataset(
        grf=grf,
        adr=plan.adr,
        sensor_count=plan.branch_in,
        num_functions=num_functions,
        points_per_function=ppf,
        noise_std=plan.noise_std,
        seed=seed,
    )
    if ds.n == n:
        return ds
    sub = ds.take(np.arange(n))
    sub.B = float(np.max(np.abs(sub.y)))
    return sub


def _cell_model(plan: ExperimentPlan, q: int, width: int, seed) -> DeepONetModel:
    common = dict(
        hidden_activation=plan.hidden_activation,
        output_activation=plan.output_activation,
        init_scheme="he",
    )
    hidden = [width] * (plan.depth - 1)
    bspec = nn.MlpSpec(tuple([plan.branch_in] + hidden + [q]), **common)
    tspec = nn.MlpSpec(tuple([plan.trunk_in] + hidden + [q]), **common)
    return DeepONetModel(
        branch=nn.init_mlp(bspec, seed=[seed, 1]),
        trunk=nn.init_mlp(tspec, seed=[seed, 2]),
    )


def run_cell(cell: PlannedCell, plan: ExperimentPlan, seed: int) -> CellResult:
    """Train one (q, n, width) cell; failures are captured, not raised."""
    t0 = time.perf_counter()
    try:
        dataset = build_cell_dataset(plan, cell.n, seed=[seed, cell.q, cell.n])
        model = _cell_model(plan, cell.q, cell.width, seed)
        _, _, _, curve = train_deeponet(
            model, dataset, plan.epochs, plan.batch_size, seed=seed, lr=plan.lr
        )
    except Exception as exc:  # noqa: BLE001 - failed cells must not abort the suite
        return CellResult(
            q=cell.q, n=cell.n, width=cell.width, param_count=cell.param_count,
            seed=seed, loss_curve=[], final_loss=float("nan"),
            best_loss=float("nan"), wall_time=time.perf_counter() - t0,
            failed=True, error=f"{type(exc).__name__}: {exc}",
        )
    return CellResult(
        q=cell.q, n=cell.n, width=cell.width, param_count=cell.param_count,
        seed=seed, loss_curve=curve,
        final_loss=curve[-1] if curve else float("nan"),
        best_loss=min(curve) if curve else float("nan"),
        wall_time=time.perf_counter() - t0,
    )


def run_suite(plan: ExperimentPlan, max_workers: int = 1) -> SuiteResult:
    """All cells x seeds; results are keyed by (q, n, seed), order-independent."""
    cells = plan_cells(plan)
    jobs = [(cell, seed) for cell in cells for seed in plan.seeds]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda cs: run_cell(cs[0], plan, cs[1]), jobs))
    else:
        results = [run_cell(cell, plan, seed) for cell, seed in jobs]
    results.sort(key=lambda r: (r.q, r.n, r.seed))
    return SuiteResult(plan=plan, cells=results)


def check_monotonic(suite: SuiteResult) -> dict:
    """Per-seed verdict: is best_loss non-increasing along increasing q?

    Failed cells are excluded from their seed's sequence (and reported);
    a seed with no usable cells casts no vote in the majority verdict.
    """
    per_seed = {}
    votes = []
    for seed in suite.plan.seeds:
        rows = sorted(
            (c for c in suite.cells if c.seed == seed and not c.failed),
            key=lambda c: c.q,
        )
        excluded = [c.q for c in suite.cells if c.seed == seed and c.failed]
        losses = [c.best_loss for c in rows]
        monotone = all(b <= a for a, b in zip(losses, losses[1:]))
        usable = len(rows) >= 1
        per_seed[str(seed)] = {
            "qs": [c.q for c in rows],
            "best_losses": losses,
            "monotone": monotone if usable else None,
            "excluded_failed_qs": excluded,
        }
        if usable:
            votes.append(monotone)
    majority = bool(votes) and sum(votes) * 2 > len(votes)
    return {
        "per_seed": per_seed,
        "seeds_counted": len(votes),
        "majority_monotone": majority,
    }


def emit_plot_data(suite: SuiteResult, out_dir) -> tuple[Path, Path]:
    """Long-format curves CSV and a per-cell summary CSV; emission is
    deterministic, so re-emitting the same suite is byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = out_dir / "curves.csv"
    summary = out_dir / "summary.csv"
    with curves.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "n", "seed", "epoch", "loss"])
        for cell in suite.cells:
            for epoch, loss in enumerate(cell.loss_curve):
                w.writerow([cell.q, cell.n, cell.seed, epoch, repr(float(loss))])
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "n", "seed", "best_loss", "final_loss"])
        for cell in suite.cells:
            w.writerow([
                cell.q, cell.n, cell.seed,
                repr(float(cell.best_loss)), repr(float(cell.final_loss)),
            ])
    return curves, summary
