"""Best response to a fixed crowd flow: dynamic programming and evaluation.

solve_hjb runs backward induction on the (time, inventory) lattice with an
exhaustive search over the control grid. The Gaussian shock is integrated
with Gauss-Hermite quadrature, the continuation value is piecewise-linear in
x with clamped ends (queries beyond the grid read the edge value), and
argmax ties break toward the control of smallest magnitude, then toward the
smaller value.

propagate pushes a particle ensemble forward under the policy
(Euler-Maruyama) and reads off the induced mean control path. evaluate is
the matching strong-form Monte Carlo estimate of the policy's objective;
girsanov_evaluate estimates the same number under the driftless measure,
reweighting each path by the discrete Girsanov density. The two routes agree
within Monte Carlo error, which is the package's standing cross-check on the
simulation layer.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .grids import ControlBounds, Grids, InitialLaw, MeanControlPath, make_path
from .pool import PoolParams
from .rewards import (BoundConstants, CostSpec, RewardKind, Variant, bound_constant,
                      gamma, lambda_lower, lambda_orig, lambda_upper, reward,
                      terminal_reward)
from .streams import substream


@dataclass(frozen=True)
class Policy:
    """Feedback control table a*(t_k, x_j) with the value surface behind it.

    controls has shape (n_t, n_x): row k applies on [t_k, t_{k+1}). values
    has shape (n_t+1, n_x) with values[n_t] the terminal reward; it is None
    for hand-built policies that never went through the solver.

    switches has shape (n_t, n_x-1). Where finite, cell j of row k contains
    a sharp control switch at relative position switches[k, j] in (0, 1):
    queries left of it read the left node's control, queries right of it the
    right node's. The solver fills it from the indifference point of the two
    competing controls, so the switching curve of a bang-bang policy is
    located to sub-cell accuracy instead of snapping to the nearest node
    (snapping makes the induced mean flow a step function of the crowd path,
    which can lock the equilibrium iteration into a two-cycle). NaN cells
    fall back to linear interpolation.
    """

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    controls: np.ndarray
    values: np.ndarray | None = None
    switches: np.ndarray | None = None

    def control_at(self, k: int, x) -> np.ndarray:
        """Policy at step k, piecewise linear in x, clamped at the grid edges."""
        if self.switches is None:
            return np.interp(x, self.x_nodes, self.controls[k])
        nodes = self.x_nodes
        c = self.controls[k]
        u = (np.asarray(x, dtype=float) - nodes[0]) / (nodes[1] - nodes[0])
        u = np.clip(u, 0.0, len(nodes) - 1.0)
        j = np.minimum(u.astype(np.int64), len(nodes) - 2)
        frac = u - j
        sw = self.switches[k][j]
        ramp = c[j] * (1.0 - frac) + c[j + 1] * frac
        sharp = np.where(frac < sw, c[j], c[j + 1])
        return np.where(np.isnan(sw), ramp, sharp)

    def value_at_start(self, x) -> np.ndarray:
        if self.values is None:
            raise UsageError("policy carries no value surface")
        return np.interp(x, self.x_nodes, self.values[0])


@dataclass(frozen=True)
class LawFlow:
    """Particle trajectories (n_t+1, n_particles) plus optional path weights."""

    times: np.ndarray
    particles: np.ndarray
    weights: np.ndarray | None = None
    exit_fraction: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.particles)):
            raise NumericalError("non-finite particle states")
        if self.weights is not None:
            n = self.weights.size
            mean = float(np.mean(self.weights))
            se = float(np.std(self.weights) / np.sqrt(n)) if n > 1 else 0.0
            if se > 0 and abs(mean - 1.0) > 3.0 * se:
                warnings.warn(
                    f"importance weights average {mean:.6g} (3se={3 * se:.2g} from 1)",
                    stacklevel=2,
                )


@dataclass(frozen=True)
class ValueReport:
    """Monte Carlo value estimate with its error budget.

    stderr is the i.i.d. standard error; bias_budget is the declared
    discretization allowance O(dt + dx^2) scaled by the value magnitude.
    weight_mean/weight_stderr are present only for weak-form estimates.
    """

    value: float
    stderr: float
    n_paths: int
    bias_budget: float = 0.0
    weight_mean: float | None = None
    weight_stderr: float | None = None


def _quad_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    # probabilists' Gauss-Hermite: nodes are standard-normal abscissae
    z, w = np.polynomial.hermite_e.hermegauss(n)
    return z, w / w.sum()


def _uniform_spacing(nodes: np.ndarray) -> float:
    d = np.diff(nodes)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise UsageError("state grid must be uniform")
    return float(d[0])


class _InterpPlan:
    """Precomputed clamped-linear interpolation for a fixed query set."""

    def __init__(self, x_nodes: np.ndarray, points: np.ndarray):
        dx = _uniform_spacing(x_nodes)
        u = (np.clip(points, x_nodes[0], x_nodes[-1]) - x_nodes[0]) / dx
        self.idx = np.minimum(u.astype(np.int64), len(x_nodes) - 2)
        self.frac = u - self.idx
        self.shape = points.shape

    def apply(self, values: np.ndarray) -> np.ndarray:
        return values[self.idx] * (1.0 - self.frac) + values[self.idx + 1] * self.frac


def _check_path(path: MeanControlPath, grids: Grids) -> None:
    if path.times.shape != (grids.n_t + 1,) or abs(path.times[-1] - grids.horizon) > 1e-12:
        raise UsageError("flow path does not match the time grid")


def _lam_table(kind: RewardKind, path: MeanControlPath, a: np.ndarray,
               params: PoolParams, consts: BoundConstants) -> np.ndarray:
    """Transaction-cost term on (time node, control node)."""
    t = path.times[:, None]
    if kind.variant is Variant.ORIGINAL:
        return lambda_orig(a[None, :], t, path, params, kind)
    if kind.variant is Variant.LOWER:
        return lambda_lower(a[None, :], t, path, params, kind)
    lam = lambda_upper(a, params, consts, kind)
    return np.broadcast_to(lam, (path.times.size, a.size)).copy()


def solve_hjb(path: MeanControlPath, kind: RewardKind, grids: Grids,
              bounds: ControlBounds, params: PoolParams, costs: CostSpec,
              reward_fn=None) -> Policy:
    """Backward induction for the best response to ``path``.

    reward_fn, when given, replaces the built-in running reward; it is called
    as reward_fn(t, x_col, a_row, path) and must broadcast to (n_x, n_a).
    The terminal reward is always -l(x).
    """
    _check_path(path, grids)
    t = grids.t_nodes()
    x = grids.x_nodes()
    a = bounds.grid(grids.n_a)
    dt = grids.dt
    consts = bound_constant(params, costs, bounds, grids.horizon, kind.denom_exp)

    # tie-break order: smallest |a| first, then smaller a; argmax picks the
    # first maximal entry, so scanning in this order implements the rule
    order = np.lexsort((a, np.abs(a)))
    a_ord = a[order]

    z, w = _quad_nodes(grids.n_quad)
    shift = dt * a_ord[None, :, None] + params.sigma * np.sqrt(dt) * z[None, None, :]
    plan = _InterpPlan(x, x[:, None, None] + shift)

    if reward_fn is None:
        gam = gamma(t, path, params)
        base = x[None, :] * gam[:, None] - costs.h(t[:, None], x[None, :])
        lam = _lam_table(kind, path, a, params, consts)[:, order]

    values = np.empty((grids.n_t + 1, grids.n_x))
    controls = np.empty((grids.n_t, grids.n_x))
    switches = np.full((grids.n_t, grids.n_x - 1), np.nan)
    values[-1] = terminal_reward(x, costs)
    rows = np.arange(grids.n_x)
    cells = np.arange(grids.n_x - 1)
    da = a[1] - a[0] if grids.n_a > 1 else 0.0
    for k in range(grids.n_t - 1, -1, -1):
        cont = (plan.apply(values[k + 1]) * w).sum(axis=2)
        if reward_fn is None:
            q = (base[k][:, None] + lam[k][None, :]) * dt + cont
        else:
            fk = np.broadcast_to(
                np.asarray(reward_fn(t[k], x[:, None], a_ord[None, :], path), dtype=float),
                (grids.n_x, grids.n_a),
            )
            q = fk * dt + cont
        best = order[np.argmax(q, axis=1)]
        q_nat = np.empty_like(q)
        q_nat[:, order] = q
        values[k] = q_nat[rows, best]
        controls[k] = a[best]
        # sub-grid vertex of the parabola through the argmax and its
        # neighbours; only at strict interior maxima, so exact ties and
        # boundary (bang-bang) solutions keep their grid point. The vertex
        # offset is < da/2 by construction, hence stays inside the bounds.
        # Without this the best-response map jumps by da under tiny changes
        # of the crowd path and the damped fixed-point iteration can lock
        # into a two-cycle above tolerance.
        interior = (best > 0) & (best < grids.n_a - 1)
        if da > 0 and np.any(interior):
            lo = q_nat[rows, np.maximum(best - 1, 0)]
            hi = q_nat[rows, np.minimum(best + 1, grids.n_a - 1)]
            denom = 2.0 * values[k] - lo - hi
            strict = interior & (lo < values[k]) & (hi < values[k]) & (denom > 0)
            offset = np.where(strict, (hi - lo) / np.where(denom > 0, 2.0 * denom, 1.0), 0.0)
            controls[k] += offset * da
        # where the argmax jumps between neighbouring x-nodes, place the
        # switch at the indifference point of the two competing controls
        # (Q is linear in x within a cell, so the crossing is exact)
        bl, br = best[:-1], best[1:]
        jump = (bl != br) & (np.abs(a[bl] - a[br]) > 1.5 * da)
        if np.any(jump):
            idx = cells[jump]
            dl = q_nat[idx, bl[idx]] - q_nat[idx, br[idx]]
            dr = q_nat[idx + 1, bl[idx]] - q_nat[idx + 1, br[idx]]
            span = dl - dr
            s = np.where(span > 0, dl / np.where(span > 0, span, 1.0), 0.5)
            switches[k, idx] = np.clip(s, 0.0, 1.0)
        if not np.all(np.isfinite(values[k])):
            raise NumericalError(f"non-finite value surface at step {k}")
    return Policy(t_nodes=t, x_nodes=x, controls=controls, values=values,
                  switches=switches)


def propagate(policy: Policy, grids: Grids, bounds: ControlBounds, params: PoolParams,
              law0: InitialLaw, seed: int | None = None) -> tuple[MeanControlPath, LawFlow]:
    """Euler-Maruyama ensemble under the policy; returns (induced mean path, flow).

    States clamp to the grid box (matching the solver's clamped continuation
    reads); the fraction of particles ever clamped is reported and warns
    above 1%. The mean path's last node repeats the final interval's mean so
    the n_t+1-node trapezoid convention applies.
    """
    seed = grids.seed if seed is None else seed
    n, n_t, dt = grids.n_particles, grids.n_t, grids.dt
    xs = law0.sample(n, substream(seed, "law0"))
    noise = substream(seed, "propagate").standard_normal((n_t, n))
    particles = np.empty((n_t + 1, n))
    particles[0] = np.clip(xs, grids.x_min, grids.x_max)
    m_hat = np.empty(n_t + 1)
    ever_out = np.zeros(n, dtype=bool)
    scale = params.sigma * np.sqrt(dt)
    for k in range(n_t):
        a = policy.control_at(k, particles[k])
        m_hat[k] = a.mean()
        nxt = particles[k] + a * dt + scale * noise[k]
        ever_out |= (nxt < grids.x_min) | (nxt > grids.x_max)
        particles[k + 1] = np.clip(nxt, grids.x_min, grids.x_max)
    m_hat[n_t] = m_hat[n_t - 1]
    exit_fraction = float(ever_out.mean())
    if exit_fraction > 0.01:
        warnings.warn(f"{exit_fraction:.1%} of particles hit the state-grid edges; "
                      "widen [x_min, x_max]", stacklevel=2)
    path = make_path(m_hat, grids, bounds, params.x0)
    flow = LawFlow(times=grids.t_nodes(), particles=particles, exit_fraction=exit_fraction)
    return path, flow


def _running_rewards(kind, t_k, xk, ak, path, params, costs, consts, reward_fn):
    if reward_fn is not None:
        return np.asarray(reward_fn(t_k, xk, ak, path), dtype=float)
    return reward(kind, t_k, xk, ak, path, params, costs, consts)


def evaluate(policy: Policy, path: MeanControlPath, kind: RewardKind, grids: Grids,
             bounds: ControlBounds, params: PoolParams, costs: CostSpec,
             law0: InitialLaw, seed: int | None = None, reward_fn=None,
             stream_label: str = "evaluate") -> ValueReport:
    """Strong-form Monte Carlo estimate of the policy's objective.

    Left-endpoint sampling of the running reward (O(dt) bias, declared in
    bias_budget together with the O(dx^2) interpolation term). Two calls with
    the same grids/seed share every random number, so estimates for different
    reward kinds are paired.
    """
    _check_path(path, grids)
    seed = grids.seed if seed is None else seed
    n, n_t, dt = grids.n_particles, grids.n_t, grids.dt
    consts = bound_constant(params, costs, bounds, grids.horizon, kind.denom_exp)
    xs = np.clip(law0.sample(n, substream(seed, stream_label + "-x0")),
                 grids.x_min, grids.x_max)
    noise = substream(seed, stream_label).standard_normal((n_t, n))
    total = np.zeros(n)
    scale = params.sigma * np.sqrt(dt)
    t = grids.t_nodes()
    for k in range(n_t):
        a = policy.control_at(k, xs)
        total += _running_rewards(kind, t[k], xs, a, path, params, costs, consts, reward_fn) * dt
        xs = np.clip(xs + a * dt + scale * noise[k], grids.x_min, grids.x_max)
    total += terminal_reward(xs, costs)
    if not np.all(np.isfinite(total)):
        raise NumericalError("non-finite path objective in evaluate")
    value = float(total.mean())
    stderr = float(total.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    dx = _uniform_spacing(grids.x_nodes())
    budget = (dt + dx**2) * max(1.0, abs(value))
    return ValueReport(value=value, stderr=stderr, n_paths=n, bias_budget=budget)


def girsanov_evaluate(policy: Policy, path: MeanControlPath, kind: RewardKind,
                      grids: Grids, bounds: ControlBounds, params: PoolParams,
                      costs: CostSpec, law0: InitialLaw, seed: int | None = None,
                      reward_fn=None) -> ValueReport:
    """Weak-form estimate: driftless paths reweighted by the Girsanov density.

    Simulates dX = sigma dW, evaluates the policy's control along the
    driftless path, and weights each path by
    exp(sum (a/sigma) dW - 1/2 sum (a/sigma)^2 dt). Requires sigma > 0.
    Agreement with evaluate (within combined Monte Carlo error) is the
    package's independent check that drift handling is correct.
    """
    _check_path(path, grids)
    if params.sigma <= 0:
        raise DomainError("girsanov_evaluate needs sigma > 0")
    seed = grids.seed if seed is None else seed
    n, n_t, dt = grids.n_particles, grids.n_t, grids.dt
    consts = bound_constant(params, costs, bounds, grids.horizon, kind.denom_exp)
    xs = np.clip(law0.sample(n, substream(seed, "girsanov-x0")),
                 grids.x_min, grids.x_max)
    noise = substream(seed, "girsanov").standard_normal((n_t, n))
    total = np.zeros(n)
    logw = np.zeros(n)
    t = grids.t_nodes()
    sig = params.sigma
    for k in range(n_t):
        a = policy.control_at(k, xs)
        total += _running_rewards(kind, t[k], xs, a, path, params, costs, consts, reward_fn) * dt
        dw = np.sqrt(dt) * noise[k]
        logw += (a / sig) * dw - 0.5 * (a / sig) ** 2 * dt
        xs = xs + sig * dw
    total += terminal_reward(xs, costs)
    weights = np.exp(logw)
    est = weights * total
    if not np.all(np.isfinite(est)):
        raise NumericalError("non-finite weighted objective in girsanov_evaluate")
    value = float(est.mean())
    stderr = float(est.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    dx = _uniform_spacing(grids.x_nodes())
    return ValueReport(value=value, stderr=stderr, n_paths=n,
                       bias_budget=(dt + dx**2) * max(1.0, abs(value)),
                       weight_mean=float(weights.mean()),
                       weight_stderr=float(weights.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0)


def constant_policy(level: float, grids: Grids, bounds: ControlBounds) -> Policy:
    """Policy pinned at one control value everywhere (tests and baselines)."""
    if not bounds.a_min <= level <= bounds.a_max:
        raise UsageError(f"constant control {level} outside [{bounds.a_min}, {bounds.a_max}]")
    return Policy(t_nodes=grids.t_nodes(), x_nodes=grids.x_nodes(),
                  controls=np.full((grids.n_t, grids.n_x), float(level)))
