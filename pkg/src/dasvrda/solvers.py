"""Doubly accelerated variance-reduced dual averaging solvers.

The family combines four ingredients:

* an inner stage (:func:`one_stage_accsvrda`) that runs ``m`` accelerated
  dual-averaging steps on variance-reduced gradients, anchored at a
  snapshot point where the full gradient was computed once;
* outer momentum across stages (:func:`outer_momentum`) with weights
  controlled by a parameter ``gamma > 1`` (the analysis assumes
  ``gamma >= 3``);
* optional restarting for strongly convex objectives, either on a fixed
  schedule (:func:`run_dasvrda_sc`) or adaptively from observed progress
  (:func:`run_dasvrda_adaptive`);
* an optional warm-up phase with geometrically growing inner loops
  (:func:`run_dasvrda_warm`) that removes the dependence of the complexity
  on the initial objective gap.

:func:`one_stage_dasvrg` is the non-accelerated dual-averaging sibling:
identical inner loop except that its prox step starts from the previous
dual point rather than the stage's starting point, and uses the plain
current gradient estimate instead of the running weighted average.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .problem import Problem, default_prox, objective
from .baselines import ProxFn, StageHook, InnerHook, _resolve_prox
from .sampling import RngStream, SamplingScheme, draw_batch, make_anchor, vr_gradient


# ---------------------------------------------------------------------------
# Momentum schedules.


def theta_inner(k: int) -> float:
    """Inner momentum weight: ``(k+1)/2`` for ``k >= 0``, zero for ``k = -1``."""
    if k < 0:
        return 0.0
    return (k + 1) / 2.0


def theta_pair(k: int) -> float:
    """Product of consecutive inner weights, ``theta_k * theta_{k-1}``.

    Equals ``k (k+1) / 4`` for ``k >= 1`` and zero otherwise; computed
    directly from ``k`` so lazy updates can evaluate it for arbitrary gaps
    without accumulating rounding error.
    """
    if k < 1:
        return 0.0
    return k * (k + 1) / 4.0


def theta_outer(gamma: float, s: int) -> float:
    """Outer momentum weight ``(1 - 1/gamma) * (s + 2) / 2`` for ``s >= 0``."""
    if s < 0:
        raise ValueError(f"stage index must be nonnegative, got {s}")
    return (1.0 - 1.0 / gamma) * (s + 2) / 2.0


def gamma_star(m: int, b: int) -> float:
    """Momentum parameter minimizing the stage-complexity constant.

    Minimizes ``(1 + gamma (m+1)/b) / (1 - 1/gamma)**2`` over ``gamma``;
    the closed form is the positive root of the resulting quadratic and is
    always greater than 3.
    """
    if m < 1 or b < 1:
        raise ValueError(f"need m >= 1 and b >= 1, got m={m}, b={b}")
    return (3.0 + math.sqrt(9.0 + 8.0 * b / (m + 1))) / 2.0


def eta_default(gamma: float, m: int, b: int, mean_smoothness: float) -> float:
    """Theory step size ``1 / ((1 + gamma (m+1)/b) * L)``.

    ``mean_smoothness`` should be the average of the per-example smoothness
    constants when sampling proportionally to them, or the maximum when
    sampling uniformly / by partition.
    """
    if mean_smoothness <= 0:
        raise ValueError(f"smoothness constant must be positive, got {mean_smoothness}")
    if m < 1 or b < 1 or gamma <= 0:
        raise ValueError(f"invalid schedule parameters m={m}, b={b}, gamma={gamma}")
    return 1.0 / ((1.0 + gamma * (m + 1) / b) * mean_smoothness)


def _check_gamma(gamma: float) -> None:
    if gamma <= 1:
        raise ValueError(f"momentum parameter must exceed 1, got gamma={gamma}")
    if gamma < 3:
        warnings.warn(
            f"gamma={gamma} is below 3, outside the regime covered by the "
            "convergence analysis; proceeding anyway",
            RuntimeWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# Inner stages.


def one_stage_accsvrda(
    problem: Problem,
    y_start: np.ndarray,
    x_anchor: np.ndarray,
    eta: float,
    m: int,
    b: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    prox: Optional[ProxFn] = None,
    on_iterate: Optional[InnerHook] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One accelerated dual-averaging stage with variance reduction.

    Starting from ``y_start`` (both primal and dual iterates) and anchored
    at ``x_anchor`` (one full gradient), runs ``m`` iterations::

        y_k    = (1 - 1/theta_k) x_{k-1} + (1/theta_k) z_{k-1}
        g_k    = variance-reduced gradient at y_k
        gbar_k = (1 - 1/theta_k) gbar_{k-1} + (1/theta_k) g_k
        z_k    = prox_{eta theta_k theta_{k-1} R}(z_0 - eta theta_k theta_{k-1} gbar_k)
        x_k    = (1 - 1/theta_k) x_{k-1} + (1/theta_k) z_k

    and returns ``(x_m, z_m)``.  The dual update always steps from the
    stage's starting point ``z_0``, not from ``z_{k-1}``.
    """
    if m < 1:
        raise ValueError(f"need at least one inner iteration, got m={m}")
    prox = _resolve_prox(problem, prox)
    anchor = make_anchor(problem, x_anchor)
    x = np.asarray(y_start, dtype=np.float64).copy()
    z = x.copy()
    z0 = x.copy()
    g_bar = np.zeros_like(x)
    for k in range(1, m + 1):
        idx = draw_batch(scheme, rng, b)
        inv = 1.0 / theta_inner(k)
        y = (1.0 - inv) * x + inv * z
        g = vr_gradient(problem, anchor, scheme, y, idx)
        g_bar = (1.0 - inv) * g_bar + inv * g
        step = eta * theta_pair(k)
        z = prox(z0 - step * g_bar, step)
        x = (1.0 - inv) * x + inv * z
        if on_iterate is not None:
            on_iterate(
                k,
                {"x": x.copy(), "z": z.copy(), "y": y.copy(), "g": g.copy(),
                 "g_bar": g_bar.copy()},
            )
    return x, z


def one_stage_dasvrg(
    problem: Problem,
    y_start: np.ndarray,
    x_anchor: np.ndarray,
    eta: float,
    m: int,
    b: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    prox: Optional[ProxFn] = None,
    on_iterate: Optional[InnerHook] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Non-accelerated sibling of :func:`one_stage_accsvrda`.

    Same interpolation and gradient estimator, but the dual step moves from
    the previous dual point using only the newest gradient::

        z_k = prox_{eta theta_{k-1} R}(z_{k-1} - eta theta_{k-1} g_k)

    For ``m = 1`` the two stages coincide; they differ from the second
    iteration on.
    """
    if m < 1:
        raise ValueError(f"need at least one inner iteration, got m={m}")
    prox = _resolve_prox(problem, prox)
    anchor = make_anchor(problem, x_anchor)
    x = np.asarray(y_start, dtype=np.float64).copy()
    z = x.copy()
    for k in range(1, m + 1):
        idx = draw_batch(scheme, rng, b)
        inv = 1.0 / theta_inner(k)
        y = (1.0 - inv) * x + inv * z
        g = vr_gradient(problem, anchor, scheme, y, idx)
        step = eta * theta_inner(k - 1)
        z = prox(z - step * g, step)
        x = (1.0 - inv) * x + inv * z
        if on_iterate is not None:
            on_iterate(k, {"x": x.copy(), "z": z.copy(), "y": y.copy(), "g": g.copy()})
    return x, z


OneStageFn = Callable[..., tuple[np.ndarray, np.ndarray]]


# ---------------------------------------------------------------------------
# Outer loop (non-strongly-convex variant).


@dataclass
class OuterState:
    """Everything the outer momentum step needs from previous stages."""

    x_prev: np.ndarray    # latest stage output
    x_prev2: np.ndarray   # the one before it
    z_prev: np.ndarray    # latest dual output
    stage: int            # index of the stage about to run


def outer_momentum(state: OuterState, gamma: float, s: int) -> np.ndarray:
    """Lookahead point for stage ``s`` from the two previous stage outputs
    and the previous dual point."""
    th_prev = theta_outer(gamma, s - 1)
    th = theta_outer(gamma, s)
    return (
        state.x_prev
        + ((th_prev - 1.0) / th) * (state.x_prev - state.x_prev2)
        + (th_prev / th) * (state.z_prev - state.x_prev)
    )


def _stage_cost(problem: Problem, m: int, b: int) -> int:
    return problem.n + m * b


def run_dasvrda_ns(
    problem: Problem,
    x0: np.ndarray,
    z0: np.ndarray,
    gamma: float,
    m: int,
    b: int,
    n_stages: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    eta: Optional[float] = None,
    prox: Optional[ProxFn] = None,
    one_stage: Optional[OneStageFn] = None,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
) -> np.ndarray:
    """Momentum over variance-reduced dual-averaging stages; returns the
    last stage output.

    This is the general convex variant: no restarts, outer weights growing
    linearly in the stage index.  ``eta`` defaults to the theory step size
    with the mean smoothness constant.
    """
    _check_gamma(gamma)
    if eta is None:
        eta = eta_default(gamma, m, b, problem.mean_smoothness)
    if one_stage is None:
        one_stage = one_stage_accsvrda
    x0 = np.asarray(x0, dtype=np.float64).copy()
    z0 = np.asarray(z0, dtype=np.float64).copy()
    state = OuterState(x_prev=x0, x_prev2=z0.copy(), z_prev=z0, stage=1)
    cost = _stage_cost(problem, m, b)
    spent = 0
    for s in range(1, n_stages + 1):
        if budget is not None and spent + cost > budget:
            break
        y = outer_momentum(state, gamma, s)
        x_new, z_new = one_stage(
            problem, y, state.x_prev, eta, m, b, scheme, rng, prox=prox
        )
        state.x_prev2 = state.x_prev
        state.x_prev = x_new
        state.z_prev = z_new
        state.stage = s + 1
        spent += cost
        if on_stage is not None:
            on_stage(s, x_new, cost, False)
    return state.x_prev


# ---------------------------------------------------------------------------
# Restarted variants for strongly convex objectives.


def run_dasvrda_sc(
    problem: Problem,
    x0: np.ndarray,
    gamma: float,
    m: int,
    b: int,
    n_stages: int,
    n_restarts: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    eta: Optional[float] = None,
    prox: Optional[ProxFn] = None,
    one_stage: Optional[OneStageFn] = None,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
) -> np.ndarray:
    """Fixed-schedule restarting: ``n_restarts`` runs of ``n_stages`` stages
    each, every run started from the previous run's output.

    For strongly convex objectives, choosing ``n_stages`` via
    :func:`choose_S_for_rho` makes every restart contract the expected
    objective gap by a fixed factor.  Stage hooks see a global stage index
    and a restart flag on the first stage of every run after the first.
    """
    _check_gamma(gamma)
    if n_restarts < 1:
        raise ValueError(f"need at least one restart, got {n_restarts}")
    if eta is None:
        eta = eta_default(gamma, m, b, problem.mean_smoothness)
    x = np.asarray(x0, dtype=np.float64).copy()
    cost = _stage_cost(problem, m, b)
    spent = 0
    global_stage = 0
    for t in range(1, n_restarts + 1):
        if budget is not None and spent + cost > budget:
            break

        def relay(s: int, xs: np.ndarray, evals: int, restarted: bool) -> None:
            nonlocal global_stage
            global_stage += 1
            if on_stage is not None:
                on_stage(global_stage, xs, evals, s == 1 and t > 1)

        remaining = None if budget is None else budget - spent
        x = run_dasvrda_ns(
            problem, x, x, gamma, m, b, n_stages, scheme, rng,
            eta=eta, prox=prox, one_stage=one_stage, on_stage=relay,
            budget=remaining,
        )
        spent = cost * global_stage
    return x


def restart_rho(gamma: float, eta: float, m: int, mu: float, n_stages: int) -> float:
    """Guaranteed per-restart contraction factor of the expected gap when the
    objective is ``mu``-strongly convex."""
    if mu <= 0:
        raise ValueError(f"strong convexity constant must be positive, got {mu}")
    if eta <= 0 or m < 1 or n_stages < 1:
        raise ValueError(
            f"invalid parameters eta={eta}, m={m}, n_stages={n_stages}"
        )
    base = (1.0 - 1.0 / gamma) ** 2
    return 4.0 * (base + 4.0 / (eta * (m + 1) * m * mu)) / (base * (n_stages + 2) ** 2)


def choose_S_for_rho(
    gamma: float, eta: float, m: int, mu: float, target_rho: float
) -> int:
    """Smallest stage count per restart whose guaranteed contraction factor
    is at most ``target_rho``."""
    if mu <= 0:
        raise ValueError(f"strong convexity constant must be positive, got {mu}")
    if not 0.0 < target_rho < 1.0:
        raise ValueError(f"target contraction must be in (0, 1), got {target_rho}")
    base = (1.0 - 1.0 / gamma) ** 2
    c = 4.0 * (base + 4.0 / (eta * (m + 1) * m * mu)) / (base * target_rho)
    s = max(1, math.ceil(math.sqrt(c) - 2.0))
    while restart_rho(gamma, eta, m, mu, s) > target_rho:
        s += 1
    while s > 1 and restart_rho(gamma, eta, m, mu, s - 1) <= target_rho:
        s -= 1
    return s


# ---------------------------------------------------------------------------
# Adaptive restarting.


@dataclass
class RestartState:
    """Inputs of the restart tests.

    The function test compares consecutive stage objectives; the gradient
    test asks whether the momentum direction about to be taken points
    against the progress just made (positive inner product between
    ``y_curr - x_curr`` and ``y_next - x_curr``).
    """

    objective_prev: Optional[float] = None
    objective_curr: Optional[float] = None
    y_curr: Optional[np.ndarray] = None
    x_curr: Optional[np.ndarray] = None
    y_next: Optional[np.ndarray] = None


def adaptive_restart_check(kind: str, state: RestartState) -> bool:
    if kind == "function":
        if state.objective_prev is None or state.objective_curr is None:
            raise ValueError("function restart test needs both objectives")
        return state.objective_curr > state.objective_prev
    if kind == "gradient":
        if state.y_curr is None or state.x_curr is None or state.y_next is None:
            raise ValueError("gradient restart test needs y_curr, x_curr, y_next")
        return float(
            (state.y_curr - state.x_curr) @ (state.y_next - state.x_curr)
        ) > 0.0
    raise ValueError(f"unknown restart test {kind!r}")


def run_dasvrda_adaptive(
    problem: Problem,
    x0: np.ndarray,
    gamma: float,
    m: int,
    b: int,
    n_stages: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    kind: str = "gradient",
    eta: Optional[float] = None,
    prox: Optional[ProxFn] = None,
    one_stage: Optional[OneStageFn] = None,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
) -> np.ndarray:
    """Momentum outer loop with heuristic restarts; no strong convexity
    constant required.

    When the chosen test fires after a stage, the momentum history
    collapses onto that stage's output (both previous outputs and the dual
    point), and the stage counter driving the outer weights rewinds to the
    start.  ``n_stages`` counts total stages across restarts.  The function
    test charges one extra full pass per stage for the objective it
    monitors; the gradient test is free (the lookahead point it inspects is
    reused for the next stage).
    """
    _check_gamma(gamma)
    if kind not in ("function", "gradient"):
        raise ValueError(f"unknown restart test {kind!r}")
    if eta is None:
        eta = eta_default(gamma, m, b, problem.mean_smoothness)
    if one_stage is None:
        one_stage = one_stage_accsvrda
    x0 = np.asarray(x0, dtype=np.float64).copy()
    state = OuterState(x_prev=x0, x_prev2=x0.copy(), z_prev=x0.copy(), stage=1)
    p_prev = objective(problem, x0) if kind == "function" else None
    cost = _stage_cost(problem, m, b) + (problem.n if kind == "function" else 0)
    spent = 0
    s_local = 0
    y = None
    for s_global in range(1, n_stages + 1):
        if budget is not None and spent + cost > budget:
            break
        s_local += 1
        if y is None:
            y = outer_momentum(state, gamma, s_local)
        x_new, z_new = one_stage(
            problem, y, state.x_prev, eta, m, b, scheme, rng, prox=prox
        )
        fired = False
        if kind == "function":
            p_new = objective(problem, x_new)
            fired = adaptive_restart_check(
                "function",
                RestartState(objective_prev=p_prev, objective_curr=p_new),
            )
            p_prev = p_new
            y = None
            if not fired:
                state.x_prev2 = state.x_prev
                state.x_prev = x_new
                state.z_prev = z_new
        else:
            trial = OuterState(
                x_prev=x_new, x_prev2=state.x_prev, z_prev=z_new,
                stage=s_local + 1,
            )
            y_next = outer_momentum(trial, gamma, s_local + 1)
            fired = adaptive_restart_check(
                "gradient",
                RestartState(y_curr=y, x_curr=x_new, y_next=y_next),
            )
            if not fired:
                state = trial
                y = y_next
        if fired:
            state = OuterState(
                x_prev=x_new, x_prev2=x_new.copy(), z_prev=x_new.copy(), stage=1
            )
            s_local = 0
            y = None
        spent += cost
        if on_stage is not None:
            on_stage(s_global, x_new, cost, fired)
    return state.x_prev


# ---------------------------------------------------------------------------
# Warm-started variant.


def warm_start_schedule(gamma: float, m0: int, n_warm: int) -> list[int]:
    """Geometrically growing warm-up loop lengths.

    ``m_u = ceil(sqrt(gamma * (m_{u-1} + 1) * m_{u-1}))``, starting from
    ``m0``; roughly multiplies by ``sqrt(gamma)`` per step.
    """
    if m0 < 1:
        raise ValueError(f"warm-up loop length must be positive, got {m0}")
    if n_warm < 0:
        raise ValueError(f"warm-up stage count must be nonnegative, got {n_warm}")
    out = []
    prev = m0
    for _ in range(n_warm):
        prev = math.ceil(math.sqrt(gamma * (prev + 1) * prev))
        out.append(prev)
    return out


def warm_final_loop_length(gamma: float, m_last: int) -> int:
    """Inner loop length of the momentum phase following the warm-up."""
    return math.ceil(math.sqrt((m_last + 1) * m_last) / (1.0 - 1.0 / gamma))


def default_warm_start(
    problem: Problem,
    gamma: float,
    m: int,
    b: int,
    *,
    gap_estimate: Optional[float] = None,
    dist_sq_estimate: Optional[float] = None,
) -> tuple[int, int]:
    """Default ``(m0, n_warm)`` for :func:`run_dasvrda_warm`.

    With estimates of the initial objective gap and the squared distance to
    the minimizer, ``m0`` balances the two terms of the stage bound;
    without them it falls back to the most conservative start, ``m0 = 1``.
    Always clipped into ``[1, m]``, with enough warm-up stages to grow the
    loop length back to ``m``.
    """
    if gap_estimate is not None and dist_sq_estimate is not None:
        if gap_estimate <= 0 or dist_sq_estimate < 0:
            raise ValueError("estimates must be positive gap, nonnegative distance")
        lbar = problem.mean_smoothness
        raw = math.ceil(
            math.sqrt(
                (1.0 + gamma * (m + 1) / b) * lbar * dist_sq_estimate / gap_estimate
            )
        )
        m0 = min(max(1, raw), m)
    else:
        m0 = 1
    if m0 >= m:
        n_warm = 0
    else:
        n_warm = max(0, math.ceil(math.log(m / m0) / math.log(math.sqrt(gamma))))
    return m0, n_warm


def run_dasvrda_warm(
    problem: Problem,
    x0: np.ndarray,
    gamma: float,
    m0: int,
    m: int,
    b: int,
    n_warm: int,
    n_stages: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    eta: Optional[float] = None,
    prox: Optional[ProxFn] = None,
    one_stage: Optional[OneStageFn] = None,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
) -> np.ndarray:
    """Warm-up stages with growing inner loops, then the momentum phase.

    Each warm-up stage is a single inner stage started at the previous dual
    point and anchored at the previous output; no outer momentum is applied
    until the loop length has grown to its final value.  Stage hooks see
    warm-up stages first (flagged unrestarted), then the momentum stages.
    """
    _check_gamma(gamma)
    lengths = warm_start_schedule(gamma, m0, n_warm)
    m_final = warm_final_loop_length(gamma, lengths[-1] if lengths else m0)
    if eta is None:
        eta = eta_default(gamma, m_final, b, problem.mean_smoothness)
    if one_stage is None:
        one_stage = one_stage_accsvrda
    x = np.asarray(x0, dtype=np.float64).copy()
    z = x.copy()
    spent = 0
    stage = 0
    for m_u in lengths:
        cost = _stage_cost(problem, m_u, b)
        if budget is not None and spent + cost > budget:
            return x
        x, z = one_stage(problem, z, x, eta, m_u, b, scheme, rng, prox=prox)
        spent += cost
        stage += 1
        if on_stage is not None:
            on_stage(stage, x, cost, False)
    warm_stages = stage

    def relay(s: int, xs: np.ndarray, evals: int, restarted: bool) -> None:
        if on_stage is not None:
            on_stage(warm_stages + s, xs, evals, restarted)

    remaining = None if budget is None else budget - spent
    return run_dasvrda_ns(
        problem, x, z, gamma, m_final, b, n_stages, scheme, rng,
        eta=eta, prox=prox, one_stage=one_stage, on_stage=relay, budget=remaining,
    )
