"""Plant and closed-loop state-space data, and the gain <-> decision-vector maps.

The open-loop plant is

    dx/dt = A x + B1 w + B u
    z     = C1 x + D11 w + D12 u
    y     = C x

and a static output feedback u = F y closes the loop to

    dx/dt = (A + B F C) x + B1 w
    z     = (C1 + D12 F C) x + D11 w.

Decision vectors stack the gain matrix F column-major (the usual vec
operator), so a candidate vector has length n_u * n_y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonFiniteEntryError

__all__ = [
    "Dims",
    "PlantRealization",
    "ClosedLoopRealization",
    "validate_plant",
    "close_loop",
    "flatten_gain",
    "unflatten_gain",
]


@dataclass(frozen=True)
class Dims:
    """Signal dimensions of a plant.

    Attributes
    ----------
    n_x : int
        Number of states.
    n_w : int
        Number of exogenous inputs (disturbances, noise).
    n_u : int
        Number of control inputs.
    n_y : int
        Number of measured outputs available for feedback.
    n_z : int
        Number of performance outputs.
    """

    n_x: int
    n_w: int
    n_u: int
    n_y: int
    n_z: int

    def __post_init__(self):
        for name in ("n_x", "n_w", "n_u", "n_y", "n_z"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise DimensionMismatchError(f"{name} must be a positive integer, got {value!r}")

    @property
    def n(self) -> int:
        """Decision-space dimension, n_u * n_y."""
        return self.n_u * self.n_y


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-d matrix, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class PlantRealization:
    """The seven matrices of an open-loop plant plus a name for reporting.

    Shapes: A (n_x, n_x), B1 (n_x, n_w), B (n_x, n_u), C1 (n_z, n_x),
    D11 (n_z, n_w), D12 (n_z, n_u), C (n_y, n_x).
    """

    A: np.ndarray
    B1: np.ndarray
    B: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C: np.ndarray
    name: str = "unnamed"

    def __post_init__(self):
        for field in ("A", "B1", "B", "C1", "D11", "D12", "C"):
            object.__setattr__(self, field, _as_matrix(getattr(self, field), field))

    @property
    def dims(self) -> Dims:
        return Dims(
            n_x=self.A.shape[0],
            n_w=self.B1.shape[1],
            n_u=self.B.shape[1],
            n_y=self.C.shape[0],
            n_z=self.C1.shape[0],
        )


@dataclass(frozen=True)
class ClosedLoopRealization:
    """State-space data of the closed loop from w to z."""

    A_F: np.ndarray
    B1: np.ndarray
    C_F: np.ndarray
    D11: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_F", _as_matrix(self.A_F, "A_F"))
        object.__setattr__(self, "B1", _as_matrix(self.B1, "B1"))
        object.__setattr__(self, "C_F", _as_matrix(self.C_F, "C_F"))
        object.__setattr__(self, "D11", _as_matrix(self.D11, "D11"))
        n_x = self.A_F.shape[0]
        if self.A_F.shape != (n_x, n_x):
            raise DimensionMismatchError(f"A_F must be square, got {self.A_F.shape}")
        if self.B1.shape[0] != n_x:
            raise DimensionMismatchError(f"B1 has {self.B1.shape[0]} rows, expected {n_x}")
        if self.C_F.shape[1] != n_x:
            raise DimensionMismatchError(f"C_F has {self.C_F.shape[1]} columns, expected {n_x}")
        if self.D11.shape != (self.C_F.shape[0], self.B1.shape[1]):
            raise DimensionMismatchError(
                f"D11 shape {self.D11.shape} inconsistent with C_F/B1 "
                f"({self.C_F.shape[0]}x{self.B1.shape[1]} expected)"
            )
        for field in ("A_F", "B1", "C_F", "D11"):
            if not np.all(np.isfinite(getattr(self, field))):
                raise NonFiniteEntryError(f"{field} contains non-finite entries")


def validate_plant(plant: PlantRealization) -> PlantRealization:
    """Check shape consistency and finiteness of all plant matrices.

    Returns the plant unchanged on success.

    Raises
    ------
    DimensionMismatchError
        Naming the first offending matrix.
    NonFiniteEntryError
        If any entry is NaN or infinite.
    """
    n_x = plant.A.shape[0]
    if plant.A.shape != (n_x, n_x):
        raise DimensionMismatchError(f"A must be square, got {plant.A.shape}")
    n_w = plant.B1.shape[1]
    n_u = plant.B.shape[1]
    n_y = plant.C.shape[0]
    n_z = plant.C1.shape[0]
    expected = {
        "B1": (n_x, n_w),
        "B": (n_x, n_u),
        "C1": (n_z, n_x),
        "D11": (n_z, n_w),
        "D12": (n_z, n_u),
        "C": (n_y, n_x),
    }
    for name, shape in expected.items():
        actual = getattr(plant, name).shape
        if actual != shape:
            raise DimensionMismatchError(f"{name} has shape {actual}, expected {shape}")
    for name in ("A", "B1", "B", "C1", "D11", "D12", "C"):
        if not np.all(np.isfinite(getattr(plant, name))):
            raise NonFiniteEntryError(f"{name} contains non-finite entries")
    # triggers the Dims invariant checks (all counts >= 1)
    plant.dims
    return plant


def close_loop(plant: PlantRealization, gain: np.ndarray) -> ClosedLoopRealization:
    """Close the loop with the static output feedback u = gain * y.

    A_F = A + B F C and C_F = C1 + D12 F C; B1 and D11 pass through.
    """
    F = np.asarray(gain, dtype=float)
    dims = plant.dims
    if F.shape != (dims.n_u, dims.n_y):
        raise DimensionMismatchError(
            f"gain has shape {F.shape}, expected ({dims.n_u}, {dims.n_y})"
        )
    FC = F @ plant.C
    return ClosedLoopRealization(
        A_F=plant.A + plant.B @ FC,
        B1=plant.B1.copy(),
        C_F=plant.C1 + plant.D12 @ FC,
        D11=plant.D11.copy(),
    )


def flatten_gain(gain: np.ndarray) -> np.ndarray:
    """Stack a gain matrix into a decision vector, column by column."""
    return np.asarray(gain, dtype=float).flatten(order="F")


def unflatten_gain(alpha: np.ndarray, n_u: int, n_y: int) -> np.ndarray:
    """Inverse of :func:`flatten_gain`."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != n_u * n_y:
        raise DimensionMismatchError(
            f"decision vector has length {alpha.size}, expected {n_u * n_y}"
        )
    return alpha.reshape((n_u, n_y), order="F")
