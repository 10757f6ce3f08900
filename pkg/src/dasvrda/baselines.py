"""Reference first-order methods: proximal gradient, accelerated proximal
gradient, and minibatch prox-SVRG.

These share the problem/sampling plumbing with the dual-averaging solvers
and serve both as benchmark baselines and as ingredients of the
high-accuracy reference solutions.

Conventions shared by every runner in the package:

* ``on_stage(stage, x, evals, restarted)`` is invoked once per outer stage
  with the stage iterate and the number of component-gradient evaluations
  that stage consumed (one full pass costs ``n``, one inner iteration
  costs ``b``).
* ``budget`` is a cap on total evaluations; a runner stops before starting
  a stage it cannot afford, so it never overdraws.
* ``prox`` optionally replaces the problem's elastic-net proximal map by a
  user callback ``prox(z, scale)``.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .problem import Problem, default_prox, full_gradient
from .sampling import RngStream, SamplingScheme, draw_batch, make_anchor, vr_gradient

StageHook = Callable[[int, np.ndarray, int, bool], None]
ProxFn = Callable[[np.ndarray, float], np.ndarray]


def _resolve_prox(problem: Problem, prox: Optional[ProxFn]) -> ProxFn:
    return prox if prox is not None else default_prox(problem)


def one_stage_pg(
    problem: Problem, x: np.ndarray, eta: float, *, prox: Optional[ProxFn] = None
) -> np.ndarray:
    """One proximal gradient step ``prox_{eta R}(x - eta * grad F(x))``."""
    prox = _resolve_prox(problem, prox)
    return prox(x - eta * full_gradient(problem, x), eta)


def run_pg(
    problem: Problem,
    x0: np.ndarray,
    eta: float,
    n_stages: int,
    *,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
    prox: Optional[ProxFn] = None,
) -> np.ndarray:
    """Proximal gradient descent; returns the average of the stage iterates."""
    prox = _resolve_prox(problem, prox)
    x = np.asarray(x0, dtype=np.float64).copy()
    total = np.zeros_like(x)
    done = 0
    spent = 0
    for s in range(1, n_stages + 1):
        if budget is not None and spent + problem.n > budget:
            break
        x = one_stage_pg(problem, x, eta, prox=prox)
        spent += problem.n
        total += x
        done += 1
        if on_stage is not None:
            on_stage(s, x, problem.n, False)
    return total / done if done else x


def run_apg(
    problem: Problem,
    x0: np.ndarray,
    eta: float,
    n_stages: int,
    *,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
    prox: Optional[ProxFn] = None,
) -> np.ndarray:
    """Accelerated proximal gradient with momentum weights (s+1)/2.

    The lookahead point is ``x_s + ((theta_{s-1}-1)/theta_s) (x_s - x_{s-1})``
    with ``theta_0 = 0``; returns the last iterate.
    """
    prox = _resolve_prox(problem, prox)
    x = np.asarray(x0, dtype=np.float64).copy()
    x_prev = x.copy()
    theta_prev = 0.0
    spent = 0
    for s in range(1, n_stages + 1):
        if budget is not None and spent + problem.n > budget:
            break
        theta = (s + 1) / 2.0
        y = x + ((theta_prev - 1.0) / theta) * (x - x_prev)
        x_prev = x
        x = prox(y - eta * full_gradient(problem, y), eta)
        theta_prev = theta
        spent += problem.n
        if on_stage is not None:
            on_stage(s, x, problem.n, False)
    return x


InnerHook = Callable[[int, dict], None]


def one_stage_svrg(
    problem: Problem,
    x_anchor: np.ndarray,
    eta: float,
    m: int,
    b: int,
    scheme: SamplingScheme,
    rng: RngStream,
    *,
    prox: Optional[ProxFn] = None,
    on_iterate: Optional[InnerHook] = None,
) -> np.ndarray:
    """One SVRG stage: ``m`` prox steps with variance-reduced gradients.

    Anchored at ``x_anchor``; returns the average of the inner iterates.
    """
    if m < 1:
        raise ValueError(f"need at least one inner iteration, got m={m}")
    prox = _resolve_prox(problem, prox)
    anchor = make_anchor(problem, x_anchor)
    x = anchor.x.copy()
    total = np.zeros_like(x)
    for k in range(1, m + 1):
        idx = draw_batch(scheme, rng, b)
        g = vr_gradient(problem, anchor, scheme, x, idx)
        x = prox(x - eta * g, eta)
        total += x
        if on_iterate is not None:
            on_iterate(k, {"x": x.copy(), "g": g.copy()})
    return total / m


def run_svrg(
    problem: Problem,
    x0: np.ndarray,
    eta: float,
    m: int,
    b: int,
    scheme: SamplingScheme,
    rng: RngStream,
    n_stages: int,
    *,
    on_stage: Optional[StageHook] = None,
    budget: Optional[int] = None,
    prox: Optional[ProxFn] = None,
) -> np.ndarray:
    """Multi-stage SVRG; each stage re-anchors at the previous stage's
    average, and the overall output averages the stage outputs."""
    x = np.asarray(x0, dtype=np.float64).copy()
    total = np.zeros_like(x)
    done = 0
    spent = 0
    cost = problem.n + m * b
    for s in range(1, n_stages + 1):
        if budget is not None and spent + cost > budget:
            break
        x = one_stage_svrg(problem, x, eta, m, b, scheme, rng, prox=prox)
        spent += cost
        total += x
        done += 1
        if on_stage is not None:
            on_stage(s, x, cost, False)
    return total / done if done else x
