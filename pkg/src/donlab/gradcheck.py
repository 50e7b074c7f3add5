"""Central finite-difference oracles for gradient verification.

These only ever call forward evaluations, so they are independent of the
reverse-mode code paths they are used to check.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .deeponet import Dataset, DeepONetModel, empirical_risk

DEFAULT_STEP = 1e-6


def fd_gradient(fun, x0: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (fun(xp) - fun(xm)) / (2.0 * step)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Sup-norm error normalized by the sup norm of the oracle gradient."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


def fd_backward(params: nn.MlpParams, x: np.ndarray, out_grad: np.ndarray,
                step: float = DEFAULT_STEP) -> np.ndarray:
    """FD gradient of <out_grad, forward(params, x)> w.r.t. the flat vector."""

    def fun(flat):
        return float(out_grad @ nn.forward(nn.MlpParams(params.spec, flat), x))

    return fd_gradient(fun, params.flat, step)


def fd_loss_grads(model: DeepONetModel, batch: Dataset,
                  step: float = DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray]:
    """FD gradients of the batch empirical risk w.r.t. both flat vectors."""

    def risk_branch(flat):
        m = DeepONetModel(nn.MlpParams(model.branch.spec, flat), model.trunk)
        return empirical_risk(m, batch)

    def risk_trunk(flat):
        m = DeepONetModel(model.branch, nn.MlpParams(model.trunk.spec, flat))
        return empirical_risk(m, batch)

    return (
        fd_gradient(risk_branch, model.branch.flat, step),
        fd_gradient(risk_trunk, model.trunk.flat, step),
    )
