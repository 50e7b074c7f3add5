"""Closed-form bound evaluators and empirical verifiers.

Covers covering-number bounds for weight balls, the two data-dependent
lower bounds on the branch/trunk output dimension q (general bounded-output
classes, and the sigmoid-gate specialization), the risk perturbation bound
under weight covering, and Monte Carlo / brute-force checkers for each.

All products with parameter-count exponents are evaluated as sums of
logarithms; the "+2" inside the big logarithm goes through log-sum-exp.
The n^(1/4) prefactor is computed as sqrt(sqrt(n)) so that scaling n by 16
doubles the result exactly in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .deeponet import DeepONetModel, Dataset, empirical_risk, j_upper_bound
from .errors import InputError

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class FunctionClassSpec:
    """Capacity description of the branch/trunk classes.

    d_b, d_t are parameter counts; w_b, w_t the 2-norm weight bounds;
    c the sup-norm output bound; q the common output dimension. The
    input-Lipschitz constants l_b, l_t are carried as metadata only.
    """

    d_b: int
    d_t: int
    w_b: float
    w_t: float
    q: int
    c: float = 1.0
    l_b: float | None = None
    l_t: float | None = None

    def __post_init__(self):
        if self.d_b < 1 or self.d_t < 1:
            raise InputError("parameter counts must be >= 1")
        if self.w_b < 1.0 or self.w_t < 1.0:
            raise InputError("weight-norm bounds must be >= 1")
        if self.c < 1.0:
            raise InputError("output sup-norm bound must be >= 1")
        if not 1 <= self.q <= min(self.d_b, self.d_t):
            raise InputError("q must satisfy 1 <= q <= min(d_b, d_t)")


@dataclass(frozen=True)
class BoundInputs:
    """Everything the q lower bounds consume."""

    n: int
    epsilon: float
    delta: float
    label_bound: float
    fclass: FunctionClassSpec
    j: float
    sigma2: float
    alpha: float = 0.5
    j_source: str = "analytic"  # "estimated" | "analytic"

    def __post_init__(self):
        if self.n < 1:
            raise InputError("n must be >= 1")
        if self.epsilon <= 0:
            raise InputError("epsilon must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise InputError("delta must lie strictly in (0, 1)")
        if self.label_bound <= 0:
            raise InputError("label bound must be > 0")
        if self.j <= 0:
            raise InputError("J must be > 0")
        if self.sigma2 < 0:
            raise InputError("sigma2 must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie strictly in (0, 1)")
        if self.j_source not in ("estimated", "analytic"):
            raise InputError("j_source must be 'estimated' or 'analytic'")


@dataclass
class BoundReport:
    """Result of a q lower-bound evaluation, with the log-space breakdown."""

    q_lower: float
    threshold: float
    log_cover_terms: dict
    which_theorem: str
    j_source: str

    def to_dict(self) -> dict:
        return {
            "q_lower": self.q_lower,
            "q_lower_ceil": int(math.ceil(self.q_lower)),
            "threshold": self.threshold,
            "log_cover_terms": self.log_cover_terms,
            "which_theorem": self.which_theorem,
            "j_source": self.j_source,
        }


def log_covering_number_ball(theta: float, W: float, d: int) -> float:
    """Log of the covering-number bound (2 W sqrt(d) / theta)^d, floored at 0."""
    if theta <= 0:
        raise InputError("covering scale theta must be > 0")
    if W <= 0 or d < 1:
        raise InputError("need W > 0 and d >= 1")
    val = d * (LOG2 + math.log(W) + 0.5 * math.log(d) - math.log(theta))
    return max(val, 0.0)


def _fourth_root(x: float) -> float:
    # sqrt is correctly rounded, so x -> 16x maps the result to exactly 2x
    return math.sqrt(math.sqrt(x))


def _as_float(n: int) -> float:
    """Parameter counts beyond float range become the +inf sentinel."""
    try:
        return float(n)
    except OverflowError:
        return math.inf


def q_lower_bound_general(inputs: BoundInputs) -> BoundReport:
    """Lower bound on q for bounded-output branch/trunk classes.

    q_lower = n^(1/4) * (eps^2 / (288 B^2) / (ln(A + 2) + ln(2/(1-delta))))^(1/4)
    with ln A = (d_b+d_t) ln(4 min(d_b,d_t)^2 / eps)
             + d_b ln(w_b sqrt(d_b)) + d_t ln(w_t sqrt(d_t)).
    The threshold is sigma^2 - eps (1 + c J (B + 2 c^2)).
    """
    fc = inputs.fclass
    eps = inputs.epsilon
    b = inputs.label_bound
    dmin = min(fc.d_b, fc.d_t)
    db, dt = _as_float(fc.d_b), _as_float(fc.d_t)
    # math.log accepts arbitrarily large ints; only the count factors can
    # overflow, in which case the product term becomes the +inf sentinel
    log_prod = (
        (db + dt) * (math.log(4.0) + 2.0 * math.log(dmin) - math.log(eps))
        + db * (math.log(fc.w_b) + 0.5 * math.log(fc.d_b))
        + dt * (math.log(fc.w_t) + 0.5 * math.log(fc.d_t))
    )
    log_plus2 = float(np.logaddexp(log_prod, LOG2))
    log_conf = LOG2 - math.log1p(-inputs.delta)
    denom = log_plus2 + log_conf
    factor = eps * eps / (288.0 * b * b) / denom
    q_lower = _fourth_root(inputs.n) * _fourth_root(factor)
    threshold = inputs.sigma2 - eps * (1.0 + fc.c * inputs.j * (b + 2.0 * fc.c * fc.c))
    return BoundReport(
        q_lower=q_lower,
        threshold=threshold,
        log_cover_terms={
            "log_product": log_prod,
            "log_product_plus_2": log_plus2,
            "log_confidence": log_conf,
            "log_denominator": denom,
        },
        which_theorem="general",
        j_source=inputs.j_source,
    )


def alpha_prime(alpha: float) -> float:
    """(alpha/2) ln(1/alpha) + ((1-alpha)/2) ln(1/(1-alpha))."""
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie strictly in (0, 1)")
    return -0.5 * (alpha * math.log(alpha) + (1.0 - alpha) * math.log1p(-alpha))


def q_lower_bound_sigmoid(inputs: BoundInputs) -> BoundReport:
    """Specialization for branch and trunk ending in sigmoid gates (c = 1).

    Requires a common weight bound w = w_b = w_t; with s = d_b + d_t the
    denominator logarithm becomes
    ln(2 + e^(-s alpha') (4 min(d_b,d_t)^2 / eps * w sqrt(s))^s).
    The threshold specializes to sigma^2 - eps (1 + J (B + 2)).
    """
    fc = inputs.fclass
    if fc.c != 1.0:
        raise InputError("the sigmoid-gate bound assumes output bound c = 1")
    if fc.w_b != fc.w_t:
        raise InputError("the sigmoid-gate bound assumes a common weight bound")
    eps = inputs.epsilon
    b = inputs.label_bound
    w = fc.w_b
    s = fc.d_b + fc.d_t
    dmin = min(fc.d_b, fc.d_t)
    ap = alpha_prime(inputs.alpha)
    log_term = _as_float(s) * (
        -ap + math.log(4.0) + 2.0 * math.log(dmin) - math.log(eps)
        + math.log(w) + 0.5 * math.log(s)
    )
    log_plus2 = float(np.logaddexp(LOG2, log_term))
    log_conf = LOG2 - math.log1p(-inputs.delta)
    denom = log_plus2 + log_conf
    factor = eps * eps / (288.0 * b * b) / denom
    q_lower = _fourth_root(inputs.n) * _fourth_root(factor)
    threshold = inputs.sigma2 - eps * (1.0 + inputs.j * (b + 2.0))
    return BoundReport(
        q_lower=q_lower,
        threshold=threshold,
        log_cover_terms={
            "alpha_prime": ap,
            "log_product": log_term,
            "log_product_plus_2": log_plus2,
            "log_confidence": log_conf,
            "log_denominator": denom,
        },
        which_theorem="sigmoid",
        j_source=inputs.j_source,
    )


def perturbation_bound(q: int, c: float, j: float, theta: float, b: float) -> float:
    """Risk increment bound q c J theta (B + 2 q c^2) under a theta-cover move."""
    if q < 1 or c <= 0 or j <= 0 or b <= 0:
        raise InputError("q, c, J, B must be positive")
    if theta < 0:
        raise InputError("theta must be >= 0")
    return q * c * j * theta * (b + 2.0 * q * c * c)


@dataclass
class PerturbationReport:
    max_observed: float
    bound: float
    holds: bool
    j_used: float
    trials: int

    def to_dict(self) -> dict:
        return {
            "max_observed": self.max_observed,
            "bound": self.bound,
            "holds": self.holds,
            "j_used": self.j_used,
            "trials": self.trials,
        }


def analytic_j_for_model(
    model: DeepONetModel, dataset: Dataset, theta: float
) -> float:
    """Analytic weight-Lipschitz constant valid on the theta/2 ball around the model.

    Uses the layered-net bound with Q = 1 (each parameter appears once in a
    dense net), R the largest input 2-norm in the dataset, and the entrywise
    weight bound max(1, |w|_inf + theta/2) so original and perturbed nets
    both qualify.
    """
    js = []
    for params, inputs in ((model.branch, dataset.s), (model.trunk, dataset.p)):
        p = nn.param_count(params.spec)
        depth = params.spec.depth
        r = float(np.max(np.linalg.norm(inputs, axis=1)))
        if r <= 0:
            r = 1.0
        w = max(1.0, float(np.max(np.abs(params.flat))) + theta / 2.0)
        js.append(j_upper_bound(w, p, 1, depth, r))
    return max(js)


def verify_perturbation(
    model: DeepONetModel,
    theta: float,
    dataset: Dataset,
    trials: int,
    seed,
    j: float | None = None,
) -> PerturbationReport:
    """Empirical check of the risk perturbation bound.

    Perturbs branch and trunk weights by random vectors of norm <= theta/2
    and compares the empirical-risk increment against the bound. With the
    analytic J (the default) a violation indicates an implementation bug.
    """
    if theta < 0:
        raise InputError("theta must be >= 0")
    if trials < 1:
        raise InputError("need at least one trial")
    c = model.c_bound
    if not math.isfinite(c):
        raise InputError("perturbation check needs bounded output activations")
    if j is None:
        j = analytic_j_for_model(model, dataset, theta)
    bound = perturbation_bound(model.q, c, j, theta, dataset.B)
    base = empirical_risk(model, dataset)
    rng = np.random.default_rng(seed)
    db_dim = model.branch.flat.size
    dt_dim = model.trunk.flat.size
    max_observed = -math.inf
    for _ in range(trials):
        db = _ball_draw(rng, db_dim, theta / 2.0)
        dt = _ball_draw(rng, dt_dim, theta / 2.0)
        pert = DeepONetModel(
            branch=nn.MlpParams(model.branch.spec, model.branch.flat + db),
            trunk=nn.MlpParams(model.trunk.spec, model.trunk.flat + dt),
        )
        increment = empirical_risk(pert, dataset) - base
        if increment > max_observed:
            max_observed = increment
    return PerturbationReport(
        max_observed=max_observed,
        bound=bound,
        holds=bool(max_observed <= bound),
        j_used=j,
        trials=trials,
    )


def _ball_draw(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    z = rng.standard_normal(dim)
    norm = np.linalg.norm(z)
    if norm == 0.0 or radius == 0.0:
        return np.zeros(dim)
    return z * (radius * rng.uniform() ** (1.0 / dim) / norm)


def verify_cover_bruteforce(d: int, w: float, theta: float, probes: int, seed) -> bool:
    """Constructive covering check for the weight ball bound in d <= 3.

    Builds a centered uniform grid on [-w, w]^d whose cardinality stays
    within the ceiling of the (2 w sqrt(d) / theta)^d bound, then verifies
    that uniform random probes all lie within theta of some grid point.
    """
    if not 1 <= d <= 3:
        raise InputError("brute-force cover check supports d in {1, 2, 3}")
    if w <= 0 or theta <= 0 or probes < 1:
        raise InputError("need w > 0, theta > 0, probes >= 1")
    per_axis = max(1, math.ceil(w * math.sqrt(d) / theta))
    allowed = math.ceil((2.0 * w * math.sqrt(d) / theta) ** d)
    if per_axis**d > max(allowed, 1):
        return False
    h = 2.0 * w / per_axis
    rng = np.random.default_rng(seed)
    x = rng.uniform(-w, w, size=(probes, d))
    cell = np.clip(np.floor((x + w) / h), 0, per_axis - 1)
    centers = -w + (cell + 0.5) * h
    dist2 = np.sum((x - centers) ** 2, axis=1)
    return bool(np.all(dist2 <= theta * theta))


@dataclass
class HoeffdingReport:
    empirical_tail: float
    bound: float
    std_err: float
    holds: bool
    trials: int

    def to_dict(self) -> dict:
        return {
            "empirical_tail": self.empirical_tail,
            "bound": self.bound,
            "std_err": self.std_err,
            "holds": self.holds,
            "trials": self.trials,
        }


def hoeffding_mc_check(
    a: float, b: float, n: int, t: float, trials: int, seed
) -> HoeffdingReport:
    """Monte Carlo check of the mean-deviation tail bound exp(-2 n t^2 / (b-a)^2).

    Samples `trials` means of n iid uniform[a, b] draws; the empirical tail
    P(mean - E >= t) must not exceed the bound by more than three Monte
    Carlo standard errors.
    """
    if b <= a:
        raise InputError("need a < b")
    if n < 1 or trials < 1:
        raise InputError("n and trials must be >= 1")
    if t < 0:
        raise InputError("t must be >= 0")
    bound = math.exp(-2.0 * n * t * t / ((b - a) ** 2))
    mean = 0.5 * (a + b)
    rng = np.random.default_rng(seed)
    exceed = 0
    left = trials
    chunk = max(1, int(5e6) // n)
    while left > 0:
        take = min(chunk, left)
        means = rng.uniform(a, b, size=(take, n)).mean(axis=1)
        exceed += int(np.count_nonzero(means - mean >= t))
        left -= take
    emp = exceed / trials
    se = math.sqrt(emp * (1.0 - emp) / trials)
    return HoeffdingReport(
        empirical_tail=emp,
        bound=bound,
        std_err=se,
        holds=bool(emp <= bound + 3.0 * se),
        trials=trials,
    )
