"""Benchmark harness: resolve a run configuration, execute one solver with
evaluation accounting, and emit a trace.

Accounting charges component-gradient evaluations only: ``n`` per full
pass (stage anchors, objective checks of the function-restart test),
``b`` per inner iteration.  Objectives recorded in the trace are
instrumentation and are not charged.  A run stops before a stage its
budget cannot cover.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .baselines import run_apg, run_pg, run_svrg
from .data_io import SyntheticSpec, generate_synthetic, load_libsvm, normalize_rows
from .lazy import lazy_one_stage_accsvrda
from .losses import Logistic, SmoothedHinge, Squared
from .problem import (
    Dataset,
    ElasticNet,
    Problem,
    dataset_summary,
    make_problem,
    objective,
)
from .reference import load_reference, problem_fingerprint
from .sampling import IidUniform, IidWeighted, Partition, make_rng, smoothness_weighted
from .solvers import (
    choose_S_for_rho,
    default_warm_start,
    eta_default,
    gamma_star,
    one_stage_dasvrg,
    run_dasvrda_adaptive,
    run_dasvrda_ns,
    run_dasvrda_sc,
    run_dasvrda_warm,
)
from .trace import TraceRecord, write_trace

ALGORITHMS = (
    "pg",
    "apg",
    "svrg",
    "dasvrda-ns",
    "dasvrda-sc",
    "dasvrda-ar-f",
    "dasvrda-ar-g",
    "dasvrda-warm",
    "dasvrg",
)

SAMPLINGS = ("uniform", "weighted", "partition")

#: Many stages; practical runs are stopped by the evaluation budget.
_UNBOUNDED = 10**9


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Everything needed to reproduce one benchmark run.

    Exactly one of ``data_path`` / ``synthetic`` selects the dataset.
    Optional fields default per algorithm at resolution time; see
    :func:`resolve`.
    """

    algo: str
    loss: str = "squared"
    l1: float = 0.0
    l2: float = 0.0
    data_path: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    dim: Optional[int] = None
    normalize: bool = False
    batch: int = 1
    epoch_len: Optional[int] = None
    gamma: Optional[float] = None
    eta: Optional[float] = None
    stages: Optional[int] = None
    restarts: Optional[int] = None
    warm_m0: Optional[int] = None
    warm_stages: Optional[int] = None
    sampling: str = "uniform"
    lipschitz: Optional[str] = None
    lazy: str = "auto"
    seed: int = 0
    budget: Optional[int] = None
    trace_path: Optional[str] = None
    ref_path: Optional[str] = None
    target_rho: float = 0.5


@dataclass
class ResolvedRun:
    problem: Problem
    config: RunConfig
    m: int
    gamma: Optional[float]
    eta: float
    stages: int
    restarts: int
    scheme: object
    use_lazy: bool
    ref_objective: Optional[float]
    header: dict = field(default_factory=dict)


@dataclass
class RunResult:
    x: np.ndarray
    records: list[TraceRecord]
    header: dict
    diverged: bool


def parse_loss(text: str):
    if text == "squared":
        return Squared()
    if text == "logistic":
        return Logistic()
    if text.startswith("smoothed-hinge"):
        _, _, tail = text.partition(":")
        if not tail:
            raise ConfigError("smoothed-hinge needs a width, e.g. smoothed-hinge:0.5")
        try:
            nu = float(tail)
        except ValueError:
            raise ConfigError(f"bad smoothed-hinge width {tail!r}") from None
        try:
            return SmoothedHinge(nu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown loss {text!r}")


def parse_synthetic(text: str) -> SyntheticSpec:
    """Parse ``kind:key=value,...``, e.g. ``lasso:n=200,d=50,density=0.3``."""
    kind, _, tail = text.partition(":")
    fields = {}
    if tail:
        for part in tail.split(","):
            key, sep, value = part.partition("=")
            if not sep:
                raise ConfigError(f"bad synthetic parameter {part!r}")
            fields[key.strip()] = value.strip()
    ints = {"n", "d", "sparsity", "seed"}
    floats = {"density", "noise"}
    kwargs = {}
    for key, value in fields.items():
        try:
            if key in ints:
                kwargs[key] = int(value)
            elif key in floats:
                kwargs[key] = float(value)
            else:
                raise ConfigError(f"unknown synthetic parameter {key!r}")
        except ValueError:
            raise ConfigError(f"bad value for synthetic {key}: {value!r}") from None
    if "n" not in kwargs or "d" not in kwargs:
        raise ConfigError("synthetic spec needs at least n and d")
    try:
        return SyntheticSpec(kind=kind, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_dataset(config: RunConfig) -> Dataset:
    if (config.data_path is None) == (config.synthetic is None):
        raise ConfigError("exactly one of data_path/synthetic must be given")
    loss = parse_loss(config.loss)
    classification = not isinstance(loss, Squared)
    if config.data_path is not None:
        try:
            data = load_libsvm(
                config.data_path, dim=config.dim, binary_labels=classification
            )
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    else:
        data, _ = generate_synthetic(config.synthetic)
    if config.normalize:
        data = normalize_rows(data)
    return data


def resolve(config: RunConfig) -> ResolvedRun:
    """Fill in every defaulted parameter and validate the combination."""
    if config.algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {config.algo!r}")
    if config.sampling not in SAMPLINGS:
        raise ConfigError(f"unknown sampling {config.sampling!r}")
    if config.lazy not in ("auto", "on", "off"):
        raise ConfigError(f"lazy must be auto/on/off, got {config.lazy!r}")
    if config.l1 < 0 or config.l2 < 0:
        raise ConfigError("regularization weights must be nonnegative")
    if config.budget is None and config.stages is None:
        raise ConfigError("need a budget or an explicit stage count")
    if config.budget is not None and config.budget < 1:
        raise ConfigError(f"budget must be positive, got {config.budget}")

    data = _load_dataset(config)
    loss = parse_loss(config.loss)
    try:
        problem = make_problem(data, loss, ElasticNet(config.l1, config.l2))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n, b = problem.n, config.batch
    if not 1 <= b <= n:
        raise ConfigError(f"batch size {b} out of range for n={n}")

    is_dasvrda = config.algo.startswith("dasvrda") or config.algo == "dasvrg"
    if config.epoch_len is not None:
        m = config.epoch_len
        if m < 1:
            raise ConfigError(f"epoch length must be positive, got {m}")
    elif config.algo == "svrg":
        m = max(1, (2 * n) // b)
    else:
        m = max(1, n // b)

    try:
        if config.sampling == "uniform":
            scheme = IidUniform(n)
        elif config.sampling == "weighted":
            scheme = smoothness_weighted(problem)
        else:
            scheme = Partition(n, b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    lipschitz = config.lipschitz
    if lipschitz is None:
        lipschitz = "max" if config.sampling == "partition" else "mean"
    if lipschitz not in ("mean", "max"):
        raise ConfigError(f"lipschitz must be mean or max, got {lipschitz!r}")
    smooth = (
        problem.mean_smoothness if lipschitz == "mean" else problem.max_smoothness
    )

    gamma = config.gamma
    if gamma is None and is_dasvrda:
        gamma = gamma_star(m, b)
    eta = config.eta
    if eta is None:
        if is_dasvrda:
            eta = eta_default(gamma, m, b, smooth)
        elif config.algo == "svrg":
            eta = 1.0 / (10.0 * smooth)
        else:
            eta = 1.0 / smooth
    if eta <= 0:
        raise ConfigError(f"step size must be positive, got {eta}")

    stages = config.stages
    restarts = config.restarts
    if config.algo == "dasvrda-sc":
        if stages is None:
            if config.l2 <= 0:
                raise ConfigError(
                    "dasvrda-sc needs --stages, or positive l2 so the stage "
                    "count per restart can be derived from the target "
                    "contraction"
                )
            stages = choose_S_for_rho(gamma, eta, m, config.l2, config.target_rho)
        if restarts is None:
            restarts = _UNBOUNDED if config.budget is not None else 1
    else:
        if restarts is not None:
            raise ConfigError(f"--restarts only applies to dasvrda-sc")
        restarts = 1
        if stages is None:
            stages = _UNBOUNDED
    if stages < 1:
        raise ConfigError(f"stage count must be positive, got {stages}")
    if restarts < 1:
        raise ConfigError(f"restart count must be positive, got {restarts}")

    summary = dataset_summary(data)
    sparse_enough = summary["density"] < 0.25
    elastic = config.l1 > 0 or config.l2 > 0
    if config.lazy == "on":
        use_lazy = True
    elif config.lazy == "off":
        use_lazy = False
    else:
        use_lazy = sparse_enough and elastic
    if use_lazy and not (config.algo.startswith("dasvrda")):
        use_lazy = False  # lazy path only implements the dual-averaging stage

    ref_objective = None
    if config.ref_path is not None:
        payload = load_reference(config.ref_path)
        if payload is None:
            raise ConfigError(f"cannot read reference file {config.ref_path}")
        if payload["fingerprint"] != problem_fingerprint(problem):
            raise ConfigError(
                f"reference {config.ref_path} was computed for a different "
                "problem"
            )
        ref_objective = float(payload["objective"])

    header = {
        "version": __version__,
        "algo": config.algo,
        "loss": config.loss,
        "l1": config.l1,
        "l2": config.l2,
        "data": config.data_path
        or f"synthetic:{config.synthetic.kind}:seed={config.synthetic.seed}",
        "normalize": config.normalize,
        "n": n,
        "d": problem.d,
        "nnz": summary["nnz"],
        "batch": b,
        "epoch_len": m if config.algo not in ("pg", "apg") else None,
        "gamma": gamma,
        "eta": eta,
        "stages": None if stages == _UNBOUNDED else stages,
        "restarts": None
        if restarts == _UNBOUNDED
        else (restarts if config.algo == "dasvrda-sc" else None),
        "warm_m0": config.warm_m0,
        "warm_stages": config.warm_stages,
        "sampling": config.sampling,
        "lipschitz": lipschitz,
        "lazy": use_lazy,
        "seed": config.seed,
        "generator": "pcg64",
        "budget": config.budget,
        "reference": config.ref_path,
    }
    return ResolvedRun(
        problem=problem,
        config=config,
        m=m,
        gamma=gamma,
        eta=eta,
        stages=stages,
        restarts=restarts,
        scheme=scheme,
        use_lazy=use_lazy,
        ref_objective=ref_objective,
        header=header,
    )


class _Diverged(Exception):
    pass


def run_experiment(config: RunConfig) -> RunResult:
    """Execute one configured run and (optionally) write its trace file."""
    run = resolve(config)
    problem = run.problem
    cfg = run.config
    rng = make_rng(cfg.seed)
    x0 = np.zeros(problem.d)
    records: list[TraceRecord] = []
    t0 = time.perf_counter()
    ref = run.ref_objective
    n = problem.n

    averaged_output = cfg.algo in ("pg", "svrg")
    avg_sum = np.zeros(problem.d)
    avg_count = 0
    evals_total = 0
    diverged = False

    def record(stage: int, point: np.ndarray, evals: int, restarted: bool) -> None:
        nonlocal evals_total, avg_sum, avg_count, diverged
        evals_total += evals
        if averaged_output and stage > 0:
            avg_sum += point
            avg_count += 1
            measured = avg_sum / avg_count
        else:
            measured = point
        p = objective(problem, measured)
        records.append(
            TraceRecord(
                stage=stage,
                evals=evals_total,
                evals_over_n=evals_total / n,
                objective=p,
                gap=None if ref is None else p - ref,
                seconds=time.perf_counter() - t0,
                restarted=restarted,
            )
        )
        if not np.isfinite(p):
            diverged = True
            raise _Diverged

    record(0, x0, 0, False)
    one_stage = lazy_one_stage_accsvrda if run.use_lazy else None
    common = dict(on_stage=record, budget=cfg.budget)
    try:
        if cfg.algo == "pg":
            x = run_pg(problem, x0, run.eta, run.stages, **common)
        elif cfg.algo == "apg":
            x = run_apg(problem, x0, run.eta, run.stages, **common)
        elif cfg.algo == "svrg":
            x = run_svrg(
                problem, x0, run.eta, run.m, cfg.batch, run.scheme, rng,
                run.stages, **common,
            )
        elif cfg.algo == "dasvrda-ns":
            x = run_dasvrda_ns(
                problem, x0, x0, run.gamma, run.m, cfg.batch, run.stages,
                run.scheme, rng, eta=run.eta, one_stage=one_stage, **common,
            )
        elif cfg.algo == "dasvrda-sc":
            x = run_dasvrda_sc(
                problem, x0, run.gamma, run.m, cfg.batch, run.stages,
                run.restarts, run.scheme, rng, eta=run.eta,
                one_stage=one_stage, **common,
            )
        elif cfg.algo in ("dasvrda-ar-f", "dasvrda-ar-g"):
            kind = "function" if cfg.algo.endswith("f") else "gradient"
            x = run_dasvrda_adaptive(
                problem, x0, run.gamma, run.m, cfg.batch, run.stages,
                run.scheme, rng, kind=kind, eta=run.eta,
                one_stage=one_stage, **common,
            )
        elif cfg.algo == "dasvrda-warm":
            m0 = cfg.warm_m0
            n_warm = cfg.warm_stages
            if m0 is None and n_warm is None:
                m0, n_warm = default_warm_start(problem, run.gamma, run.m, cfg.batch)
            elif m0 is None:
                m0 = 1
            elif n_warm is None:
                n_warm = (
                    0
                    if m0 >= run.m
                    else math.ceil(
                        math.log(run.m / m0) / math.log(math.sqrt(run.gamma))
                    )
                )
            x = run_dasvrda_warm(
                problem, x0, run.gamma, m0, run.m, cfg.batch, n_warm,
                run.stages, run.scheme, rng, eta=run.eta,
                one_stage=one_stage, **common,
            )
        elif cfg.algo == "dasvrg":
            x = run_dasvrda_ns(
                problem, x0, x0, run.gamma, run.m, cfg.batch, run.stages,
                run.scheme, rng, eta=run.eta, one_stage=one_stage_dasvrg,
                **common,
            )
        else:  # pragma: no cover - guarded by resolve()
            raise ConfigError(f"unknown algorithm {cfg.algo!r}")
    except _Diverged:
        x = x0

    if averaged_output and avg_count and not diverged:
        x = avg_sum / avg_count
    if cfg.trace_path is not None:
        write_trace(cfg.trace_path, run.header, records)
    return RunResult(x=x, records=records, header=run.header, diverged=diverged)


def learning_rate_grid(base: float = 1.0) -> list[float]:
    """The sweep grid {1,2,5} x 10^p, p in {-2..2}, scaled by ``base``."""
    return sorted(base * c * 10.0**p for p in range(-2, 3) for c in (1, 2, 5))


def restart_interval_grid() -> list[int]:
    """Stage counts per restart for sweeping fixed-schedule restarts:
    {1,2,5} x 10^k, k in {0,1,2}."""
    return sorted(c * 10**k for k in range(0, 3) for c in (1, 2, 5))


def evals_to_gap(records: list[TraceRecord], threshold: float) -> Optional[float]:
    """First ``evals_over_n`` at which the recorded gap reaches the
    threshold, or None if it never does."""
    for rec in records:
        if rec.gap is not None and rec.gap <= threshold:
            return rec.evals_over_n
    return None
