"""Penalized fitness for gain synthesis, in maximization convention.

For a decision vector ``alpha`` (the flattened gain) the raw objective is
either the closed-loop H-infinity norm or the closed-loop spectral
abscissa. Feasible points score

    fitness = -(objective + beta * ||alpha||_2)

so maximizing fitness minimizes the gain-penalized objective. Points whose
closed loop is unstable are handled per objective: the H-infinity norm is
undefined there, so they receive a large negative penalty; the spectral
abscissa is always finite, so it is scored directly and only flagged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .analysis import STABILITY_TOL, _real_eig, hinf_norm, spectral_abscissa
from .errors import SofsynError
from .model import ClosedLoopRealization, PlantRealization, close_loop, unflatten_gain

__all__ = [
    "ObjectiveKind",
    "PenaltyMode",
    "FitnessConfig",
    "Evaluation",
    "gain_norm",
    "feasibility",
    "evaluate",
]


class ObjectiveKind(enum.Enum):
    HINF_NORM = "hinf"
    SPECTRAL_ABSCISSA = "sa"


class PenaltyMode(enum.Enum):
    """How infeasible H-infinity candidates are scored.

    STRICT assigns the flat penalty. GUIDED additionally subtracts the
    positive part of the spectral abscissa so that, within an entirely
    infeasible population, less unstable candidates still rank higher and
    selection keeps a useful gradient toward the feasible set.
    """

    STRICT = "strict"
    GUIDED = "guided"


@dataclass(frozen=True)
class FitnessConfig:
    """Weights and tolerances entering the fitness."""

    beta: float = 1e-10
    infeasible_penalty: float = 1e5
    penalty_mode: PenaltyMode = PenaltyMode.GUIDED
    stability_tol: float = STABILITY_TOL
    norm_rel_tol: float = 1e-6

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.infeasible_penalty <= 0:
            raise ValueError("infeasible_penalty must be positive")


@dataclass(frozen=True)
class Evaluation:
    """One scored candidate.

    ``objective`` is the raw objective value (math.inf when the H-infinity
    norm is undefined for an unstable loop); ``fitness`` is the
    maximization-convention score actually used for selection.
    """

    fitness: float
    objective: float
    gain_norm: float
    feasible: bool


def gain_norm(alpha) -> float:
    """Euclidean norm of the decision vector."""
    return float(np.linalg.norm(np.asarray(alpha, dtype=float)))


def feasibility(plant: PlantRealization, alpha, tol: float = STABILITY_TOL) -> bool:
    """True iff the closed loop under the gain encoded by ``alpha`` is Hurwitz."""
    dims = plant.dims
    F = unflatten_gain(alpha, dims.n_u, dims.n_y)
    return spectral_abscissa(close_loop(plant, F).A_F) < -tol


def evaluate(
    plant: PlantRealization,
    alpha,
    kind: ObjectiveKind,
    cfg: FitnessConfig = FitnessConfig(),
) -> Evaluation:
    """Score one decision vector. Deterministic; never raises on an
    unstable or numerically failing candidate (those become penalized
    evaluations so the optimizer can keep running)."""
    alpha = np.asarray(alpha, dtype=float)
    dims = plant.dims
    norm_a = gain_norm(alpha)
    finite = bool(np.all(np.isfinite(alpha)))
    if finite:
        F = unflatten_gain(alpha, dims.n_u, dims.n_y)
        FC = F @ plant.C
        A_F = plant.A + plant.B @ FC
        finite = bool(np.all(np.isfinite(A_F)))
    if not finite:
        # overflowed candidate: rank below everything, never selected
        return Evaluation(
            fitness=-math.inf, objective=math.inf, gain_norm=norm_a, feasible=False
        )
    wr, _ = _real_eig(A_F)
    abscissa = float(wr.max())
    feasible = bool(abscissa < -cfg.stability_tol)

    if kind is ObjectiveKind.SPECTRAL_ABSCISSA:
        return Evaluation(
            fitness=-(abscissa + cfg.beta * norm_a),
            objective=abscissa,
            gain_norm=norm_a,
            feasible=feasible,
        )

    if feasible:
        try:
            cl = ClosedLoopRealization(
                A_F=A_F, B1=plant.B1, C_F=plant.C1 + plant.D12 @ FC, D11=plant.D11
            )
            objective = hinf_norm(cl, rel_tol=cfg.norm_rel_tol).value
        except SofsynError:
            objective = None
        if objective is not None:
            return Evaluation(
                fitness=-(objective + cfg.beta * norm_a),
                objective=objective,
                gain_norm=norm_a,
                feasible=True,
            )
        # norm computation failed despite a stable loop: score as infeasible

    fitness = -cfg.infeasible_penalty
    if cfg.penalty_mode is PenaltyMode.GUIDED:
        fitness -= max(0.0, abscissa)
    return Evaluation(
        fitness=fitness,
        objective=math.inf,
        gain_norm=norm_a,
        feasible=False,
    )
