"""Synthetic data generation.

Gaussian-random-field forcing functions (RBF kernel, Cholesky sampling),
a reaction-diffusion reference solver on the unit space-time square, a
forced-pendulum integrator, dataset assembly, and CSV round-trip I/O.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .deeponet import Dataset
from .errors import (
    ConfigurationError,
    DivergenceError,
    FormatError,
    InputError,
    NumericalError,
)

BLOWUP_LIMIT = 1e10


# ---------------------------------------------------------------------------
# Gaussian random fields
# ---------------------------------------------------------------------------

@dataclass
class GrfConfig:
    """Mean-zero Gaussian field on a fixed grid with RBF covariance."""

    grid: np.ndarray
    length_scale: float
    jitter: float = 1e-10

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.ndim != 1 or self.grid.size < 1:
            raise ConfigurationError("grid must be a non-empty 1-d vector")
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigurationError("grid must be strictly increasing")
        if self.grid[0] < 0.0 or self.grid[-1] > 1.0:
            raise ConfigurationError("grid must lie in [0, 1]")
        if self.length_scale <= 0:
            raise ConfigurationError("length_scale must be > 0")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be >= 0")


def rbf_kernel(x1: float, x2: float, l: float) -> float:
    """exp(-|x1 - x2|^2 / (2 l^2)); always in (0, 1]."""
    if l <= 0:
        raise InputError("length scale must be > 0")
    d = x1 - x2
    return math.exp(-(d * d) / (2.0 * l * l))


def kernel_matrix(grid: np.ndarray, l: float) -> np.ndarray:
    """RBF kernel matrix of a 1-d grid."""
    if l <= 0:
        raise InputError("length scale must be > 0")
    g = np.asarray(grid, dtype=np.float64)
    d = g[:, None] - g[None, :]
    return np.exp(-(d * d) / (2.0 * l * l))


def grf_cholesky(config: GrfConfig) -> np.ndarray:
    """Lower Cholesky factor of K + jitter*I."""
    k = kernel_matrix(config.grid, config.length_scale)
    k[np.diag_indices_from(k)] += config.jitter
    try:
        return np.linalg.cholesky(k)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"kernel matrix is not positive definite at jitter={config.jitter}; "
            "raise the jitter"
        ) from exc


def sample_grf(config: GrfConfig, seed) -> np.ndarray:
    """One field draw f = L z with z iid standard normal; deterministic in seed."""
    chol = grf_cholesky(config)
    rng = np.random.default_rng(seed)
    return chol @ rng.standard_normal(config.grid.size)


def sample_grf_batch(config: GrfConfig, count: int, seed) -> np.ndarray:
    """count independent draws as rows of a (count, len(grid)) array."""
    chol = grf_cholesky(config)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((config.grid.size, count))
    return (chol @ z).T


# ---------------------------------------------------------------------------
# Reaction-diffusion solver: u_t = D u_xx + k u^2 + f(x) on [0,1]^2
# ---------------------------------------------------------------------------

@dataclass
class AdrConfig:
    """Diffusion coefficient, reaction rate, and uniform grid resolution."""

    D: float = 0.01
    k: float = 0.01
    nx: int = 101
    nt: int = 101

    def __post_init__(self):
        if self.D < 0:
            raise ConfigurationError("diffusion coefficient must be >= 0")
        if self.nx < 3 or self.nt < 3:
            raise ConfigurationError("nx and nt must be >= 3")

    @property
    def x_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx)

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nt)


@dataclass
class PdeSolution:
    """Solution array u (nx, nt) with its grids and the source vector f."""

    u: np.ndarray
    x_grid: np.ndarray
    t_grid: np.ndarray
    f: np.ndarray


def solve_adr(f: np.ndarray, config: AdrConfig) -> PdeSolution:
    """Second-order solve with zero initial data and zero Dirichlet walls.

    Diffusion is treated by Crank-Nicolson, the reaction + source by an
    explicit trapezoidal (Heun) predictor-corrector, with one tridiagonal
    solve per stage. Exact for D = k = 0 (then u = f * t).
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (config.nx,):
        raise InputError(f"f must have shape ({config.nx},), got {f.shape}")
    nx, nt = config.nx, config.nt
    dx = 1.0 / (nx - 1)
    dt = 1.0 / (nt - 1)
    r = config.D * dt / (2.0 * dx * dx)
    ni = nx - 2
    f_int = f[1:-1]

    # banded form of I - r*T with T the second-difference stencil
    ab = np.zeros((3, ni))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r

    u = np.zeros((nx, nt))
    cur = np.zeros(nx)
    for j in range(1, nt):
        ui = cur[1:-1]
        lin = ui + r * (cur[:-2] - 2.0 * ui + cur[2:])
        g0 = config.k * ui * ui + f_int
        pred = solve_banded((1, 1), ab, lin + dt * g0)
        g1 = config.k * pred * pred + f_int
        new = solve_banded((1, 1), ab, lin + 0.5 * dt * (g0 + g1))
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > BLOWUP_LIMIT:
            raise DivergenceError(
                f"solution blew up at time step {j} (t={j * dt:.4g})"
            )
        cur = np.zeros(nx)
        cur[1:-1] = new
        u[1:-1, j] = new
    return PdeSolution(u=u, x_grid=config.x_grid, t_grid=config.t_grid, f=f)


# ---------------------------------------------------------------------------
# Forced pendulum: d(y, v)/dt = (v, -k sin(y) + f(t))
# ---------------------------------------------------------------------------

def solve_pendulum(
    k: float, f_samples: np.ndarray, y0: float, v0: float, t_end: float = 1.0
) -> np.ndarray:
    """Classical RK4 for the forced pendulum; returns y on the sample grid.

    f_samples lives on the uniform grid over [0, t_end]; the forcing is
    linearly interpolated between samples (midpoint value = average).
    """
    f = np.asarray(f_samples, dtype=np.float64)
    if f.ndim != 1 or f.size < 2:
        raise InputError("need at least two forcing samples")
    n = f.size
    h = t_end / (n - 1)
    f_mid = 0.5 * (f[:-1] + f[1:])
    y = np.empty(n)
    y[0] = y0
    yy, vv = float(y0), float(v0)
    for i in range(n - 1):
        f0, fm, f1 = f[i], f_mid[i], f[i + 1]
        k1y = vv
        k1v = -k * math.sin(yy) + f0
        k2y = vv + 0.5 * h * k1v
        k2v = -k * math.sin(yy + 0.5 * h * k1y) + fm
        k3y = vv + 0.5 * h * k2v
        k3v = -k * math.sin(yy + 0.5 * h * k2y) + fm
        k4y = vv + h * k3v
        k4v = -k * math.sin(yy + h * k3y) + f1
        yy += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        vv += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        y[i + 1] = yy
    return y


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

def sensor_indices(n_grid: int, m: int) -> np.ndarray:
    """m distinct, evenly spread indices into a grid of n_grid nodes."""
    if m > n_grid:
        raise ConfigurationError(f"cannot place {m} sensors on {n_grid} grid nodes")
    if m < 1:
        raise ConfigurationError("need at least one sensor")
    if m == 1:
        return np.array([0])
    return np.floor(np.linspace(0.0, n_grid - 1, m) + 0.5).astype(int)


def build_adr_dataset(
    grf: GrfConfig,
    adr: AdrConfig,
    sensor_count: int,
    num_functions: int,
    points_per_function: int,
    noise_std: float,
    seed: int,
) -> Dataset:
    """n = num_functions * points_per_function triples from the PDE solver.

    Each source draw is restricted to the sensor subgrid for the branch
    input; query points are uniformly sampled grid nodes (x_j, t_k); labels
    are solver values there plus optional Gaussian noise.
    """
    if noise_std < 0:
        raise ConfigurationError("noise_std must be >= 0")
    if num_functions < 1 or points_per_function < 1:
        raise ConfigurationError("num_functions and points_per_function must be >= 1")
    x_grid = adr.x_grid
    if grf.grid.size != adr.nx or not np.allclose(grf.grid, x_grid):
        raise ConfigurationError("GRF grid must coincide with the solver x grid")
    idx = sensor_indices(adr.nx, sensor_count)

    chol = grf_cholesky(grf)
    rng = np.random.default_rng(seed)
    t_grid = adr.t_grid
    n = num_functions * points_per_function
    s = np.empty((n, sensor_count))
    p = np.empty((n, 2))
    y = np.empty(n)
    row = 0
    for _ in range(num_functions):
        fvec = chol @ rng.standard_normal(adr.nx)
        sol = solve_adr(fvec, adr)
        jx = rng.integers(0, adr.nx, size=points_per_function)
        jt = rng.integers(0, adr.nt, size=points_per_function)
        z = rng.standard_normal(points_per_function)
        sl = slice(row, row + points_per_function)
        s[sl] = fvec[idx]
        p[sl, 0] = x_grid[jx]
        p[sl, 1] = t_grid[jt]
        y[sl] = sol.u[jx, jt] + noise_std * z
        row += points_per_function
    return Dataset(
        s=s,
        p=p,
        y=y,
        B=float(np.max(np.abs(y))),
        sensor_grid=x_grid[idx],
        noise_std=noise_std,
        seed=seed,
        generator={
            "kind": "adr",
            "D": adr.D,
            "k": adr.k,
            "nx": adr.nx,
            "nt": adr.nt,
            "length_scale": grf.length_scale,
            "jitter": grf.jitter,
            "num_functions": num_functions,
            "points_per_function": points_per_function,
        },
    )


def build_pendulum_dataset(
    grf: GrfConfig,
    pend_k: float,
    sensor_count: int,
    num_functions: int,
    points_per_function: int,
    noise_std: float,
    seed: int,
    y0: float = 0.0,
    v0: float = 0.0,
    forcing_scale: float = 1.0,
) -> Dataset:
    """Triples (forcing at sensor times, query time, pendulum angle).

    The forcing is forcing_scale times a GRF draw on the config's time grid
    (scale 0 gives the unforced pendulum); labels come from the RK4
    integration at uniformly sampled grid times.
    """
    if noise_std < 0:
        raise ConfigurationError("noise_std must be >= 0")
    if num_functions < 1 or points_per_function < 1:
        raise ConfigurationError("num_functions and points_per_function must be >= 1")
    t_grid = grf.grid
    nt = t_grid.size
    if nt < 2:
        raise ConfigurationError("time grid needs at least two nodes")
    if not (np.isclose(t_grid[0], 0.0) and np.isclose(t_grid[-1], 1.0)):
        raise ConfigurationError("pendulum time grid must span [0, 1]")
    if np.max(np.abs(np.diff(t_grid) - np.diff(t_grid)[0])) > 1e-12:
        raise ConfigurationError("pendulum time grid must be uniform")
    idx = sensor_indices(nt, sensor_count)

    chol = grf_cholesky(grf)
    rng = np.random.default_rng(seed)
    n = num_functions * points_per_function
    s = np.empty((n, sensor_count))
    p = np.empty((n, 1))
    y = np.empty(n)
    row = 0
    for _ in range(num_functions):
        fvec = forcing_scale * (chol @ rng.standard_normal(nt))
        traj = solve_pendulum(pend_k, fvec, y0, v0, t_end=1.0)
        jt = rng.integers(0, nt, size=points_per_function)
        z = rng.standard_normal(points_per_function)
        sl = slice(row, row + points_per_function)
        s[sl] = fvec[idx]
        p[sl, 0] = t_grid[jt]
        y[sl] = traj[jt] + noise_std * z
        row += points_per_function
    return Dataset(
        s=s,
        p=p,
        y=y,
        B=float(np.max(np.abs(y))),
        sensor_grid=t_grid[idx],
        noise_std=noise_std,
        seed=seed,
        generator={
            "kind": "pendulum",
            "pend_k": pend_k,
            "y0": y0,
            "v0": v0,
            "forcing_scale": forcing_scale,
            "nt": nt,
            "length_scale": grf.length_scale,
            "jitter": grf.jitter,
            "num_functions": num_functions,
            "points_per_function": points_per_function,
        },
    )


# ---------------------------------------------------------------------------
# CSV I/O (round-trip exact at float64 via shortest-representation text)
# ---------------------------------------------------------------------------

def _sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Columns s_0..s_{m-1}, p_0..p_{d2-1}, y plus a metadata sidecar JSON."""
    path = Path(path)
    header = (
        [f"s_{i}" for i in range(dataset.m)]
        + [f"p_{i}" for i in range(dataset.d2)]
        + ["y"]
    )
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(dataset.n):
            row = (
                [repr(float(v)) for v in dataset.s[i]]
                + [repr(float(v)) for v in dataset.p[i]]
                + [repr(float(dataset.y[i]))]
            )
            w.writerow(row)
    meta = {
        "B": dataset.B,
        "m": dataset.m,
        "d2": dataset.d2,
        "noise_std": dataset.noise_std,
        "seed": dataset.seed,
        "sensor_grid": [float(v) for v in dataset.sensor_grid],
        "generator": dataset.generator,
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=1))


def read_dataset_csv(path) -> Dataset:
    """Inverse of :func:`write_dataset_csv`; exact float64 round trip."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"dataset file {path} is empty") from None
        m = sum(1 for c in header if c.startswith("s_"))
        d2 = sum(1 for c in header if c.startswith("p_"))
        expected = [f"s_{i}" for i in range(m)] + [f"p_{i}" for i in range(d2)] + ["y"]
        if m < 1 or d2 < 1 or header != expected:
            raise FormatError(f"unexpected header in {path}: {header}")
        s_rows, p_rows, y_rows = [], [], []
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(
                    f"{path}:{ln}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: non-numeric value ({exc})") from exc
            s_rows.append(vals[:m])
            p_rows.append(vals[m : m + d2])
            y_rows.append(vals[m + d2])
    s = np.array(s_rows, dtype=np.float64).reshape(len(s_rows), m)
    p = np.array(p_rows, dtype=np.float64).reshape(len(p_rows), d2)
    y = np.array(y_rows, dtype=np.float64)

    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if meta.get("m") != m or meta.get("d2") != d2:
            raise FormatError(f"sidecar {sidecar} disagrees with the CSV header")
        return Dataset(
            s=s,
            p=p,
            y=y,
            B=float(meta["B"]),
            sensor_grid=np.array(meta["sensor_grid"], dtype=np.float64),
            noise_std=float(meta.get("noise_std", 0.0)),
            seed=meta.get("seed"),
            generator=meta.get("generator", {}),
        )
    b = float(np.max(np.abs(y))) if y.size else 0.0
    return Dataset(s=s, p=p, y=y, B=b, sensor_grid=np.full(m, np.nan))
