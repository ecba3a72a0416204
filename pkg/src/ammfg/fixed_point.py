"""Damped Picard iteration for the mean-field equilibrium.

The equilibrium map sends a candidate mean path m to the mean path induced
by best-responding to it: Phi(m) = propagate(solve_hjb(m)). Iterates are
damped, m_{k+1} = (1-damping)*m_k + damping*Phi(m_k), with the Monte Carlo
noise inside Phi frozen across iterations (common random numbers), so the
iteration runs on a deterministic map and the residual sup_t |m_{k+1} - m_k|
is meaningful below the Monte Carlo scale.

Convergence of this iteration is an empirical matter, not a theorem;
a run that exhausts max_iters reports converged=False and still returns its
last iterate, policy, and value. A run that does stop is re-certified with
one extra best-response + propagate round.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import ControlBounds, Grids, InitialLaw, MeanControlPath, make_path
from .errors import DomainError, UsageError
from .pool import PoolParams
from .rewards import CostSpec, RewardKind
from .solver import LawFlow, Policy, ValueReport, evaluate, propagate, solve_hjb


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    tol: float = 1e-3
    max_iters: int = 200

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"damping must be in (0, 1], got {self.damping}")
        if self.tol <= 0:
            raise DomainError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class EquilibriumResult:
    kind: RewardKind
    path: MeanControlPath
    policy: Policy
    value: ValueReport
    residuals: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    post_residual: float = float("nan")
    flow: LawFlow | None = None


def residual(current: MeanControlPath, proposed: MeanControlPath) -> float:
    """sup_t |m - m_hat| on a shared time grid (UsageError on mismatch)."""
    return current.sup_distance(proposed)


def solve_mfg(kind: RewardKind, grids: Grids, bounds: ControlBounds, params: PoolParams,
              costs: CostSpec, law0: InitialLaw, fp: FixedPointConfig,
              seed: int | None = None, init: MeanControlPath | None = None,
              reward_fn=None) -> EquilibriumResult:
    """Damped Picard iteration from ``init`` (default: the zero path).

    The returned policy is the best response to the final iterate (one extra
    solver round), and the reported value evaluates that policy against it.
    converged requires both the in-loop residual and the post-certification
    residual damping*sup|Phi(m*) - m*| to sit at or below tol.
    """
    seed = grids.seed if seed is None else seed
    if init is None:
        path = make_path(np.zeros(grids.n_t + 1), grids, bounds, params.x0)
    else:
        if init.times.shape != (grids.n_t + 1,):
            raise UsageError("init path does not match the time grid")
        path = init

    residuals: list[float] = []
    hit_tol = False
    iterations = 0
    for _ in range(fp.max_iters):
        policy = solve_hjb(path, kind, grids, bounds, params, costs, reward_fn=reward_fn)
        induced, _ = propagate(policy, grids, bounds, params, law0, seed=seed)
        mixed = (1.0 - fp.damping) * path.values + fp.damping * induced.values
        nxt = make_path(mixed, grids, bounds, params.x0)
        res = residual(path, nxt)
        residuals.append(res)
        path = nxt
        iterations += 1
        if res <= fp.tol:
            hit_tol = True
            break

    # certification round: best response to the final iterate, and one more
    # pass through the map to confirm the iterate is actually stationary
    policy = solve_hjb(path, kind, grids, bounds, params, costs, reward_fn=reward_fn)
    induced, flow = propagate(policy, grids, bounds, params, law0, seed=seed)
    post = fp.damping * residual(path, induced)
    value = evaluate(policy, path, kind, grids, bounds, params, costs, law0,
                     seed=seed, reward_fn=reward_fn)
    return EquilibriumResult(kind=kind, path=path, policy=policy, value=value,
                             residuals=residuals, converged=hit_tol and post <= fp.tol,
                             iterations=iterations, post_residual=post, flow=flow)
