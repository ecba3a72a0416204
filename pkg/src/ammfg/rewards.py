"""Running and terminal rewards for a trader facing the crowd's flow.

With the crowd trading at mean rate m(t) (cumulative C(t)), the pool price
drifts at

    gamma(t) = k0 * m(t) * ((1+phi)*x0 - 2*phi*C) / ((x0-C)^2 * (x0-phi*C)^2)

and a trader holding inventory x while trading at rate a collects

    f(t, x, a) = x*gamma(t) + lam(t, a) - h(t, x),

where lam is the transaction-cost term and h a running inventory cost. The
original cost is lam = -a * spread_factor(phi) * D(t) with
D = k0 / ((x0-C)*(x0-phi*C))^e; it couples the control to the crowd's flow
through D, which breaks the separability most verification arguments need.
Two separable surrogates bracket it for a >= 0:

    LOWER   -(1/2) * (eps*(a*c)^2 + D^2/eps)   (Young's inequality, scale eps)
    UPPER   -a * c * k0 / (x0 + T*M)^(2e)      (worst constant denominator)

so LOWER <= ORIGINAL <= UPPER pointwise, and the induced optimal values
sandwich the original one. The terminal reward is -l(x), a liquidation
penalty. All formulas broadcast over numpy arrays.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AdmissibilityError, DomainError, UsageError
from .grids import ControlBounds, Grids, MeanControlPath, make_path
from .pool import PoolParams, spread_factor
from .streams import substream


class Variant(enum.Enum):
    ORIGINAL = "f"
    LOWER = "f1"
    UPPER = "f2"


@dataclass(frozen=True)
class RewardKind:
    """Which running reward to use, plus its two knobs.

    young_eps scales the Young split in LOWER (1 reproduces the plain
    inequality with equal weights). denom_exp is the exponent e on the
    lam-family denominators: 2 matches the displayed running reward, 1 the
    Ito-consistent variant in which D(t) is exactly the aggregate price.
    """

    variant: Variant = Variant.ORIGINAL
    young_eps: float = 1.0
    denom_exp: int = 2

    def __post_init__(self):
        if self.young_eps <= 0:
            raise DomainError(f"young_eps must be > 0, got {self.young_eps}")
        if self.denom_exp not in (1, 2):
            raise DomainError(f"denom_exp must be 1 or 2, got {self.denom_exp}")

    @property
    def tag(self) -> str:
        """Interface label: f, f1, or f2."""
        return self.variant.value

    @classmethod
    def from_tag(cls, tag: str, young_eps: float = 1.0, denom_exp: int = 2) -> "RewardKind":
        for v in Variant:
            if v.value == tag:
                return cls(v, young_eps, denom_exp)
        raise UsageError(f"unknown reward tag {tag!r}; expected one of f, f1, f2")


@dataclass(frozen=True)
class CostSpec:
    """Running cost h(t, x), terminal cost l(x), and their growth constant c1.

    c1 must satisfy |h| + |l| <= c1*exp(c1*|x|) on the state range in use;
    check_cost_growth verifies this on a sampled grid rather than trusting it.
    """

    h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    l: Callable[[np.ndarray], np.ndarray]
    c1: float = 1.0

    def __post_init__(self):
        if self.c1 <= 0:
            raise DomainError(f"c1 must be > 0, got {self.c1}")


def quadratic_costs(running: float = 0.5, terminal: float = 0.5, c1: float = 1.0) -> CostSpec:
    """h = running*x^2, l = terminal*x^2. The defaults pair with c1 = 1."""
    return CostSpec(h=lambda t, x: running * np.square(x),
                    l=lambda x: terminal * np.square(x), c1=c1)


def check_cost_growth(costs: CostSpec, grids: Grids, n_t_samples: int = 16) -> float:
    """Max of (|h|+|l|)/(c1*exp(c1*|x|)) over a (t, x) sample grid.

    Raises DomainError if the bound fails anywhere on the grid.
    """
    x = grids.x_nodes()
    ratios = []
    for t in np.linspace(0.0, grids.horizon, n_t_samples):
        num = np.abs(costs.h(t, x)) + np.abs(costs.l(x))
        ratios.append(num / (costs.c1 * np.exp(costs.c1 * np.abs(x))))
    worst = float(np.max(ratios))
    if worst > 1.0:
        raise DomainError(
            f"|h|+|l| exceeds c1*exp(c1|x|) on the grid (max ratio {worst:.3g}); raise c1"
        )
    return worst


@dataclass(frozen=True)
class BoundConstants:
    """Admissibility floor and the growth-bound constant.

    bound dominates |terminal| + |running reward| inside c*exp(c*|x|):
    c = max(c1, 2*k0*M*(x0+T*M)/eps0^4, k0*M*spread_factor/eps0^(2e)).
    horizon is carried so the UPPER denominator (x0 + T*M) is formable.
    """

    m_bound: float
    eps0: float
    bound: float
    horizon: float


def bound_constant(params: PoolParams, costs: CostSpec, bounds: ControlBounds,
                   horizon: float, denom_exp: int = 2) -> BoundConstants:
    m = bounds.magnitude
    eps0 = params.x0 - horizon * m
    if eps0 <= 0:
        raise AdmissibilityError(
            f"bounds magnitude {m} inadmissible for x0={params.x0}, T={horizon}"
        )
    drift_term = 2.0 * params.k0 * m * (params.x0 + horizon * m) / eps0**4
    cost_term = params.k0 * m * spread_factor(params.phi) / eps0 ** (2 * denom_exp)
    return BoundConstants(m_bound=m, eps0=eps0,
                          bound=max(costs.c1, drift_term, cost_term), horizon=horizon)


# --- running-reward pieces ------------------------------------------------

def drift_kernel(t, path: MeanControlPath, params: PoolParams):
    """Price sensitivity to flow: gamma(t) = m(t) * drift_kernel(t).

    k0 * ((1+phi)*x0 - 2*phi*C) / ((x0-C)^2 * (x0-phi*C)^2); always squared
    denominators (this is the derivative of the aggregate price in the
    cumulative flow, independent of denom_exp).
    """
    c = path.cumulative_at(t)
    num = (1.0 + params.phi) * params.x0 - 2.0 * params.phi * c
    den = (params.x0 - c) ** 2 * (params.x0 - params.phi * c) ** 2
    return params.k0 * num / den


def gamma(t, path: MeanControlPath, params: PoolParams):
    """Price drift induced by the crowd's flow at time t (array-friendly)."""
    return path.value_at(t) * drift_kernel(t, path, params)


def d_factor(t, path: MeanControlPath, params: PoolParams, kind: RewardKind):
    """D(t) = k0 / ((x0-C)*(x0-phi*C))^e; for e=1 this is the aggregate price."""
    c = path.cumulative_at(t)
    den = (params.x0 - c) * (params.x0 - params.phi * c)
    return params.k0 / den**kind.denom_exp


def lambda_orig(a, t, path: MeanControlPath, params: PoolParams, kind: RewardKind):
    """-a * spread_factor(phi) * D(t): the flow-coupled transaction cost."""
    return -np.asarray(a) * spread_factor(params.phi) * d_factor(t, path, params, kind)


def lambda_lower(a, t, path: MeanControlPath, params: PoolParams, kind: RewardKind):
    """Young lower bound -(1/2)*(eps*(a*c)^2 + D(t)^2/eps), eps = young_eps."""
    ac = np.asarray(a) * spread_factor(params.phi)
    d = d_factor(t, path, params, kind)
    return -0.5 * (kind.young_eps * ac**2 + d**2 / kind.young_eps)


def lambda_upper(a, params: PoolParams, consts: BoundConstants, kind: RewardKind):
    """Constant-denominator upper bound -a*c*k0/(x0+T*M)^(2e). Valid for a >= 0."""
    worst = (params.x0 + consts.horizon * consts.m_bound) ** (2 * kind.denom_exp)
    return -np.asarray(a) * spread_factor(params.phi) * params.k0 / worst


def reward(kind: RewardKind, t, x, a, path: MeanControlPath, params: PoolParams,
           costs: CostSpec, consts: BoundConstants | None = None):
    """x*gamma(t) + lam_kind(t, a) - h(t, x), broadcast over (t, x, a).

    UPPER needs the bound constants for its worst-case denominator; pass the
    result of bound_constant (a UsageError reminds you if you forget).
    """
    base = np.asarray(x) * gamma(t, path, params) - costs.h(t, np.asarray(x))
    if kind.variant is Variant.ORIGINAL:
        lam = lambda_orig(a, t, path, params, kind)
    elif kind.variant is Variant.LOWER:
        lam = lambda_lower(a, t, path, params, kind)
    else:
        if consts is None:
            raise UsageError("reward(kind=UPPER, ...) requires consts=bound_constant(...)")
        lam = lambda_upper(a, params, consts, kind)
    return base + lam


def terminal_reward(x, costs: CostSpec):
    """-l(x): liquidation penalty enters the objective with a minus sign."""
    return -costs.l(np.asarray(x))


# --- growth-bound audit ---------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    max_ratio: float
    bound: float
    n_samples: int
    violations: int
    worst_sample: tuple[float, float, float]  # (t, x, a)


def check_growth_bound(kind: RewardKind, n_samples: int, seed: int, *,
                       grids: Grids, bounds: ControlBounds, params: PoolParams,
                       costs: CostSpec,
                       consts: BoundConstants | None = None) -> GrowthReport:
    """Sample (t, x, a, m-path) uniformly and audit |g| + |f| <= c*exp(c*|x|).

    Samples are grouped into batches sharing a random admissible flow path
    (values i.i.d. uniform on the control interval). Returns the max observed
    ratio and the count of violations; the caller decides what to do with a
    nonzero count.
    """
    if consts is None:
        consts = bound_constant(params, costs, bounds, grids.horizon, kind.denom_exp)
    rng = substream(seed, "growth", kind.tag)
    n_paths = max(1, min(64, n_samples // 256))
    per = -(-n_samples // n_paths)  # ceil
    max_ratio = 0.0
    worst = (0.0, 0.0, 0.0)
    violations = 0
    total = 0
    for _ in range(n_paths):
        vals = rng.uniform(bounds.a_min, bounds.a_max, grids.n_t + 1)
        path = make_path(vals, grids, bounds, params.x0)
        m = min(per, n_samples - total)
        if m <= 0:
            break
        t = rng.uniform(0.0, grids.horizon, m)
        x = rng.uniform(grids.x_min, grids.x_max, m)
        a = rng.uniform(bounds.a_min, bounds.a_max, m)
        f = reward(kind, t, x, a, path, params, costs, consts)
        g = terminal_reward(x, costs)
        ratio = (np.abs(g) + np.abs(f)) / (consts.bound * np.exp(consts.bound * np.abs(x)))
        i = int(np.argmax(ratio))
        if ratio[i] > max_ratio:
            max_ratio = float(ratio[i])
            worst = (float(t[i]), float(x[i]), float(a[i]))
        violations += int(np.sum(ratio > 1.0))
        total += m
    return GrowthReport(max_ratio=max_ratio, bound=consts.bound, n_samples=total,
                        violations=violations, worst_sample=worst)
