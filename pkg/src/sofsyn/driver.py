"""Generation loop of the memetic optimizer.

Each generation samples a population, scores it, optionally refines every
offspring with the elitist (1+1) strategy (the refined points replace the
originals before sorting), tracks the best point ever evaluated, and then
advances the sampling distribution. Candidate scoring and refinement are
independent per offspring and may run on a thread pool; results are
gathered in candidate order and every candidate owns an RNG substream
derived from (seed, generation, index), so the outcome is a pure function
of the configuration regardless of thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cma import (
    CmaParams,
    ResetLimits,
    default_params,
    init_state,
    maybe_reset,
    refresh_basis,
    sample_population,
    update_covariance,
    update_mean,
    update_paths,
    update_step_size,
)
from .errors import ConfigError, EigenSolveError
from .local import default_local_params, run_local
from .model import PlantRealization, validate_plant
from .objectives import Evaluation, FitnessConfig, ObjectiveKind, PenaltyMode, evaluate

__all__ = ["SolverConfig", "GenerationRecord", "RunResult", "solve", "solve_raw"]

# spawn-key stream ids; keep stable so seeds reproduce across versions
_GLOBAL_STREAM = 0
_LOCAL_STREAM = 1


@dataclass(frozen=True)
class SolverConfig:
    """Everything that determines a run besides the problem itself.

    ``t_max`` counts global sample evaluations; each refined offspring
    additionally spends ``t_s`` local evaluations, which are charged
    against ``t_max`` only when ``charge_local_to_budget`` is set.
    """

    objective: ObjectiveKind = ObjectiveKind.HINF_NORM
    t_max: int = 10000
    t_s: int = 10
    beta: float = 1e-10
    infeasible_penalty: float = 1e5
    penalty_mode: PenaltyMode = PenaltyMode.GUIDED
    stability_tol: float = 1e-9
    norm_rel_tol: float = 1e-6
    seed: int = 0
    initial_mean: Optional[Sequence[float]] = None
    sigma0: float = 0.3
    local_search_enabled: bool = True
    refine_top_k: Optional[int] = None
    charge_local_to_budget: bool = False
    threads: int = 1
    reset_limits: ResetLimits = field(default_factory=ResetLimits)

    def __post_init__(self):
        if self.t_max < 1:
            raise ConfigError("t_max must be positive")
        if self.t_s < 1:
            raise ConfigError("t_s must be positive")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.refine_top_k is not None and self.refine_top_k < 0:
            raise ConfigError("refine_top_k must be nonnegative")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")

    def fitness_config(self) -> FitnessConfig:
        return FitnessConfig(
            beta=self.beta,
            infeasible_penalty=self.infeasible_penalty,
            penalty_mode=self.penalty_mode,
            stability_tol=self.stability_tol,
            norm_rel_tol=self.norm_rel_tol,
        )


@dataclass(frozen=True)
class GenerationRecord:
    """One history row: state of the run after a generation completed."""

    generation: int
    best_fitness: float
    sigma: float
    feasible_fraction: float
    global_evals: int
    local_evals: int


@dataclass(frozen=True)
class RunResult:
    best_alpha: np.ndarray
    best_fitness: float
    best_objective: float
    feasible: bool
    global_evals: int
    local_evals: int
    history: tuple[GenerationRecord, ...]
    wall_time: float


def _candidate_rng(seed: int, generation: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_LOCAL_STREAM, generation, index))
    return np.random.Generator(np.random.PCG64(ss))


class _BestTracker:
    """Records the best full evaluation seen by a wrapped fitness stream."""

    def __init__(self, alpha: np.ndarray, evaluation: Evaluation):
        self.alpha = alpha
        self.evaluation = evaluation

    def wrap(self, eval_fn):
        def fitness(x):
            ev = eval_fn(x)
            if ev.fitness > self.evaluation.fitness:
                self.alpha = np.array(x, dtype=float)
                self.evaluation = ev
            return ev.fitness

        return fitness


def _run(
    eval_fn: Callable[[np.ndarray], Evaluation],
    n: int,
    config: SolverConfig,
    progress: Optional[Callable[[GenerationRecord], None]] = None,
) -> RunResult:
    params: CmaParams = default_params(n)
    if config.t_max < params.p:
        raise ConfigError(
            f"t_max={config.t_max} is below the population size p={params.p} for n={n}"
        )
    local_params = default_local_params(n)

    if config.initial_mean is None:
        mean0 = np.zeros(n)
    else:
        mean0 = np.asarray(config.initial_mean, dtype=float)
        if mean0.shape != (n,):
            raise ConfigError(f"initial_mean must have length {n}, got shape {mean0.shape}")

    state = init_state(mean0, config.sigma0)
    rng_global = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(_GLOBAL_STREAM,)))
    )

    charge_local = config.charge_local_to_budget and config.local_search_enabled
    cost_per_offspring = 1 + (config.t_s if charge_local else 0)

    best_alpha: Optional[np.ndarray] = None
    best_ev: Optional[Evaluation] = None
    global_evals = 0
    local_evals = 0
    history: list[GenerationRecord] = []
    generation = 0

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    t_start = time.perf_counter()
    try:
        while True:
            used = global_evals + (local_evals if charge_local else 0)
            if used >= config.t_max:
                break
            remaining = config.t_max - used
            k = min(params.p, max(1, math.ceil(remaining / cost_per_offspring)))

            sigma_gen = state.sigma
            candidates = sample_population(state, params, rng_global, count=k)

            rows = list(candidates)
            if pool is not None:
                evals = list(pool.map(eval_fn, rows))
            else:
                evals = [eval_fn(row) for row in rows]
            global_evals += k

            if config.local_search_enabled:
                if config.refine_top_k is None:
                    refine_idx = list(range(k))
                else:
                    order0 = sorted(
                        range(k), key=lambda i: (-evals[i].fitness, i)
                    )
                    refine_idx = sorted(order0[: config.refine_top_k])

                def refine(i: int):
                    tracker = _BestTracker(candidates[i], evals[i])
                    alpha_opt, fit_opt, used_evals = run_local(
                        candidates[i],
                        evals[i].fitness,
                        sigma_gen,
                        config.t_s,
                        tracker.wrap(eval_fn),
                        _candidate_rng(config.seed, generation, i),
                        local_params,
                    )
                    return alpha_opt, tracker.evaluation, used_evals

                if pool is not None:
                    refined = list(pool.map(refine, refine_idx))
                else:
                    refined = [refine(i) for i in refine_idx]
                for i, (alpha_opt, ev_opt, used_evals) in zip(refine_idx, refined):
                    candidates[i] = alpha_opt
                    evals[i] = ev_opt
                    local_evals += used_evals

            order = sorted(range(k), key=lambda i: (-evals[i].fitness, i))
            top = order[0]
            if best_ev is None or evals[top].fitness > best_ev.fitness:
                best_ev = evals[top]
                best_alpha = np.array(candidates[top], dtype=float)

            record = GenerationRecord(
                generation=generation,
                best_fitness=best_ev.fitness,
                sigma=sigma_gen,
                feasible_fraction=sum(ev.feasible for ev in evals) / k,
                global_evals=global_evals,
                local_evals=local_evals,
            )
            history.append(record)
            if progress is not None:
                progress(record)

            if k == params.p:
                # full generation: advance the sampling distribution
                try:
                    sorted_top = np.asarray([candidates[i] for i in order[: params.mu]])
                    new_mean = update_mean(sorted_top, params)
                    path_sigma, path_cov, h_sigma = update_paths(state, new_mean, params)
                    new_cov = update_covariance(
                        state, sorted_top, state.mean, path_cov, h_sigma, params
                    )
                    new_sigma = update_step_size(state, path_sigma, params)
                    state.mean = new_mean
                    state.path_sigma = path_sigma
                    state.path_cov = path_cov
                    state.cov = new_cov
                    state.sigma = new_sigma
                except EigenSolveError:
                    # degenerate update (e.g. overflowed covariance): force a reset
                    state.sigma = math.inf
                state.generation += 1
                maybe_reset(state, config.reset_limits, best_alpha)
                refresh_basis(state)
            generation += 1
    finally:
        if pool is not None:
            pool.shutdown()

    assert best_alpha is not None and best_ev is not None
    return RunResult(
        best_alpha=best_alpha,
        best_fitness=best_ev.fitness,
        best_objective=best_ev.objective,
        feasible=best_ev.feasible,
        global_evals=global_evals,
        local_evals=local_evals,
        history=tuple(history),
        wall_time=time.perf_counter() - t_start,
    )


def solve(
    plant: PlantRealization,
    config: SolverConfig = SolverConfig(),
    progress: Optional[Callable[[GenerationRecord], None]] = None,
) -> RunResult:
    """Synthesize a static output feedback gain for ``plant``.

    The decision vector is the column-major flattening of the gain matrix;
    use :func:`sofsyn.model.unflatten_gain` to recover the matrix from
    ``RunResult.best_alpha``.
    """
    validate_plant(plant)
    fitness_cfg = config.fitness_config()
    kind = config.objective

    def eval_fn(alpha: np.ndarray) -> Evaluation:
        return evaluate(plant, alpha, kind, fitness_cfg)

    return _run(eval_fn, plant.dims.n, config, progress)


def solve_raw(
    fitness_fn: Callable[[np.ndarray], float],
    n: int,
    config: SolverConfig = SolverConfig(),
    progress: Optional[Callable[[GenerationRecord], None]] = None,
) -> RunResult:
    """Run the optimizer on an arbitrary scalar fitness (maximization).

    Every point is treated as feasible and the reported objective is the
    negated fitness. Intended for testing and for using the optimizer
    outside the control-synthesis setting.
    """

    def eval_fn(alpha: np.ndarray) -> Evaluation:
        value = float(fitness_fn(alpha))
        return Evaluation(
            fitness=value,
            objective=-value,
            gain_norm=float(np.linalg.norm(alpha)),
            feasible=True,
        )

    return _run(eval_fn, n, config, progress)
