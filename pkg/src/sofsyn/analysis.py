"""Eigenvalue and frequency-domain analysis of closed loops.

Two independent routes to the H-infinity norm live here:

* :func:`hinf_norm` -- production path: bisection on gamma using the
  Hamiltonian-matrix test from the bounded real lemma (gamma exceeds the
  norm iff the Hamiltonian has no purely imaginary eigenvalues).
* :func:`hinf_norm_grid` -- oracle path: dense frequency sampling with
  golden-section refinement around the sampled peak. A certified lower
  bound on the true norm; kept independent of the bisection code so the
  two can cross-check each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgeev

from .errors import (
    BracketError,
    DimensionMismatchError,
    EigenSolveError,
    InstabilityError,
    NonFiniteEntryError,
    SingularResolventError,
)
from .model import ClosedLoopRealization

__all__ = [
    "StabilityReport",
    "HinfResult",
    "FrequencyGrid",
    "DEFAULT_GRID",
    "spectral_abscissa",
    "is_hurwitz",
    "freq_response",
    "hinf_norm_grid",
    "hinf_norm",
]

#: Default margin below zero required of the abscissa for "Hurwitz".
STABILITY_TOL = 1e-9

#: An eigenvalue lam counts as purely imaginary when |Re lam| <= this * (1 + |lam|).
IMAG_AXIS_RTOL = 1e-7


@dataclass(frozen=True)
class StabilityReport:
    """Spectral abscissa of a matrix and the resulting Hurwitz verdict."""

    abscissa: float
    hurwitz: bool


@dataclass(frozen=True)
class HinfResult:
    """Outcome of the bisection H-infinity computation.

    Attributes
    ----------
    value : float
        The computed norm (relative accuracy per the requested tolerance).
    peak_frequency : float
        Frequency (rad/s, >= 0) at which the gain is largest among the
        candidate frequencies examined; 0 for DC-dominated responses.
    iterations : int
        Number of gamma-bisection rounds performed.
    """

    value: float
    peak_frequency: float
    iterations: int


def _check_square_finite(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteEntryError("matrix contains non-finite entries")
    return M


def _real_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(real parts, imaginary parts) of the eigenvalues of a real matrix.

    Thin dgeev wrapper used on the hot paths; callers must pass finite
    square input.
    """
    wr, wi, _, _, info = dgeev(M, compute_vl=0, compute_vr=0, overwrite_a=0)
    if info != 0:
        raise EigenSolveError(f"dgeev failed to converge (info={info})")
    return wr, wi


def spectral_abscissa(M) -> float:
    """Largest real part over the eigenvalues of a square real matrix."""
    M = _check_square_finite(M)
    wr, _ = _real_eig(M)
    return float(wr.max())


def is_hurwitz(M, tol: float = STABILITY_TOL) -> StabilityReport:
    """Stability verdict: Hurwitz iff the abscissa is below ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    abscissa = spectral_abscissa(M)
    return StabilityReport(abscissa=abscissa, hurwitz=bool(abscissa < -tol))


def freq_response(cl: ClosedLoopRealization, omega: float) -> np.ndarray:
    """Transfer matrix G(jw) = C_F (jw I - A_F)^-1 B1 + D11 at one frequency."""
    n_x = cl.A_F.shape[0]
    M = 1j * omega * np.eye(n_x) - cl.A_F
    try:
        X = np.linalg.solve(M, cl.B1.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise SingularResolventError(
            f"jw*I - A_F is singular at omega={omega!r}"
        ) from exc
    return cl.C_F @ X + cl.D11


def _max_gains(cl: ClosedLoopRealization, omegas: np.ndarray) -> np.ndarray:
    """Largest singular value of G(jw) for a batch of frequencies."""
    omegas = np.asarray(omegas, dtype=float)
    n_x = cl.A_F.shape[0]
    M = 1j * omegas[:, None, None] * np.eye(n_x) - cl.A_F
    rhs = np.broadcast_to(cl.B1.astype(complex), (omegas.size, *cl.B1.shape))
    X = np.linalg.solve(M, rhs)
    G = cl.C_F @ X + cl.D11
    return np.linalg.svd(G, compute_uv=False)[..., 0]


@dataclass(frozen=True)
class FrequencyGrid:
    """Sampling scheme used by the grid oracle.

    Logarithmically spaced points between ``omega_min`` and ``omega_max``
    (``points_per_decade`` per decade), optionally including w = 0, with
    golden-section refinement around the sampled argmax.
    """

    omega_min: float = 1e-4
    omega_max: float = 1e4
    points_per_decade: int = 400
    include_zero: bool = True
    refine: bool = True

    def frequencies(self) -> np.ndarray:
        lo = np.log10(self.omega_min)
        hi = np.log10(self.omega_max)
        count = int(round(self.points_per_decade * (hi - lo))) + 1
        omegas = np.logspace(lo, hi, count)
        if self.include_zero:
            omegas = np.concatenate(([0.0], omegas))
        return omegas


DEFAULT_GRID = FrequencyGrid()

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float, max_iter: int = 120) -> tuple[float, float]:
    """Golden-section maximization of a scalar function on [a, b]."""
    tol = 1e-12 * max(1.0, abs(b))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def hinf_norm_grid(cl: ClosedLoopRealization, grid: FrequencyGrid = DEFAULT_GRID) -> float:
    """Grid-oracle estimate of the H-infinity norm (a lower bound on the sup).

    Raises
    ------
    InstabilityError
        If A_F is not Hurwitz (abscissa >= 0).
    """
    abscissa = spectral_abscissa(cl.A_F)
    if abscissa >= 0:
        raise InstabilityError(f"closed loop is unstable (abscissa {abscissa:.6g})")
    omegas = grid.frequencies()
    gains = _max_gains(cl, omegas)
    k = int(np.argmax(gains))
    best = float(gains[k])
    if grid.refine:
        a = omegas[k - 1] if k > 0 else omegas[k]
        b = omegas[k + 1] if k + 1 < omegas.size else omegas[k]
        if b > a:
            _, refined = _golden_max(lambda w: float(_max_gains(cl, np.array([w]))[0]), a, b)
            best = max(best, refined)
    return best


def _hamiltonian_builder(cl: ClosedLoopRealization):
    """Factory for gamma -> Hamiltonian matrix of the bounded-real test.

    The returned callable reuses one output buffer and the gamma-independent
    blocks; it requires gamma > sigma_max(D11) so that
    R = gamma^2 I - D11' D11 > 0.
    """
    A, B, C, D = cl.A_F, cl.B1, cl.C_F, cl.D11
    n = A.shape[0]
    H = np.empty((2 * n, 2 * n))

    if not D.any():
        # no feedthrough: H = [[A, B B'/g^2], [-C'C, -A']]
        BBt = B @ B.T
        H[:n, :n] = A
        H[n:, :n] = -(C.T @ C)
        H[n:, n:] = -A.T

        def build(gamma: float) -> np.ndarray:
            H[:n, n:] = BBt / (gamma * gamma)
            return H

        return build

    DT = D.T.copy()
    BT = B.T.copy()
    DtD = DT @ D
    I_w = np.eye(B.shape[1])
    I_z = np.eye(C.shape[0])

    def build(gamma: float) -> np.ndarray:
        R = gamma * gamma * I_w - DtD
        Rinv_DT = np.linalg.solve(R, DT)
        Rinv_BT = np.linalg.solve(R, BT)
        Acl = A + B @ (Rinv_DT @ C)
        H[:n, :n] = Acl
        H[:n, n:] = B @ Rinv_BT
        H[n:, :n] = -C.T @ ((I_z + D @ Rinv_DT) @ C)
        H[n:, n:] = -Acl.T
        return H

    return build


def _hamiltonian(cl: ClosedLoopRealization, gamma: float) -> np.ndarray:
    """Hamiltonian matrix of the bounded-real test at level gamma."""
    return _hamiltonian_builder(cl)(gamma).copy()


def _imaginary_axis_freqs(H: np.ndarray) -> np.ndarray:
    """Nonnegative frequencies of eigenvalues of H lying on the imaginary axis."""
    wr, wi = _real_eig(H)
    on_axis = np.abs(wr) <= IMAG_AXIS_RTOL * (1.0 + np.hypot(wr, wi))
    return np.abs(wi[on_axis])


def hinf_norm(cl: ClosedLoopRealization, rel_tol: float = 1e-6) -> HinfResult:
    """H-infinity norm by gamma bisection with the Hamiltonian eigenvalue test.

    The bracket starts at [max(sigma_max(D11), probe estimate), 2x that
    estimate], where the probe estimate samples the gain at w = 0, at the
    resonant frequencies of A_F, and on a short logarithmic sweep. The
    upper end is doubled until the Hamiltonian test certifies it. The
    returned value has relative accuracy ``rel_tol``.

    Raises
    ------
    InstabilityError
        If A_F is not Hurwitz.
    BracketError
        If no certifiable upper bound is found (pathological conditioning).
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    A_F = _check_square_finite(cl.A_F)
    wr, wi = _real_eig(A_F)
    abscissa = float(wr.max())
    if abscissa >= 0:
        raise InstabilityError(f"closed loop is unstable (abscissa {abscissa:.6g})")

    d_norm = float(np.linalg.svd(cl.D11, compute_uv=False)[0])

    pole_freqs = np.abs(wi)
    probes = np.unique(
        np.concatenate(([0.0], pole_freqs[pole_freqs > 0], np.logspace(-4, 4, 33)))
    )
    probe_gains = _max_gains(cl, probes)
    probe_peak = int(np.argmax(probe_gains))
    probe_max = float(probe_gains[probe_peak])

    lo = max(d_norm, probe_max)
    if lo == 0.0:
        # gain is zero everywhere it was sampled and there is no feedthrough
        return HinfResult(value=0.0, peak_frequency=0.0, iterations=0)
    hi = 2.0 * lo

    build = _hamiltonian_builder(cl)
    crossings = np.array([])
    for _ in range(64):
        freqs = _imaginary_axis_freqs(build(hi))
        if freqs.size == 0:
            break
        crossings = freqs
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketError(
            f"no certified upper bound for the norm below gamma={hi:.6g}"
        )

    iterations = 0
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        freqs = _imaginary_axis_freqs(build(mid))
        if freqs.size > 0:
            lo = mid
            crossings = freqs
        else:
            hi = mid
        iterations += 1

    value = 0.5 * (lo + hi)

    candidates = [0.0, float(probes[probe_peak])]
    if crossings.size > 0:
        freqs = np.sort(crossings)
        candidates.extend(freqs.tolist())
        candidates.extend((0.5 * (freqs[:-1] + freqs[1:])).tolist())
    candidates = np.unique(np.asarray(candidates))
    peak_frequency = float(candidates[np.argmax(_max_gains(cl, candidates))])

    return HinfResult(value=value, peak_frequency=peak_frequency, iterations=iterations)
