"""Smeared field observables, their localization, and bipartite no-signalling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import linregress

from .wavepacket import Tabulated

#: profile values below this fraction of the peak count as rounding noise
NOISE_FLOOR = 1e-13
R2_THRESHOLD = 0.9


@dataclass(frozen=True)
class SmearingProfile:
    """Smearing function sampled on a strictly increasing 1d grid.

    ``tail_metric`` is the largest ``|value|`` outside ``window`` over the
    largest inside it.
    """

    grid: np.ndarray
    values: np.ndarray
    tail_metric: float
    window: tuple[float, float]

    @classmethod
    def build(cls, grid, values, window=None) -> "SmearingProfile":
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be matching 1d arrays")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        if window is None:
            span = grid[-1] - grid[0]
            window = (grid[0] + 0.25 * span, grid[-1] - 0.25 * span)
        return cls(grid, values, tail_metric(grid, values, window),
                   (float(window[0]), float(window[1])))


def _split(grid, window):
    a, b = window
    if not (grid[0] <= a < b <= grid[-1]):
        raise ValueError("window must lie inside the grid")
    inside = (grid >= a) & (grid <= b)
    return inside, ~inside


def tail_metric(grid, values, window) -> float:
    values = np.asarray(values, dtype=float)
    inside, outside = _split(np.asarray(grid, dtype=float), window)
    if not outside.any():
        raise ValueError("empty tail sample")
    peak = np.max(np.abs(values[inside]))
    if peak == 0:
        return math.inf if np.any(values[outside]) else 0.0
    return float(np.max(np.abs(values[outside])) / peak)


def _dot(k, x):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = np.asarray(x, dtype=float)
    if k.size == 1:
        return k[0] * x.reshape(-1)
    if x.ndim != 2 or x.shape[1] != k.size:
        raise ValueError("multi-dimensional momenta need an (N, d) point array")
    return x @ k


def smearing_FG(k, x_grid, L: float | None = None):
    """Smearings of a single plane-wave mode.

    ``F = (2w)^(1/2) N cos(k.x)`` and ``G = (2/w)^(1/2) N sin(k.x)`` with
    ``N = (2 pi)^(-d/2)``, or ``L^(-d/2)`` in a box of side ``L``.  Returns
    the raw arrays for ``d > 1`` (points given as an ``(N, d)`` array) and
    :class:`SmearingProfile` objects in one dimension.
    """
    kv = np.atleast_1d(np.asarray(k, dtype=float))
    w = float(np.linalg.norm(kv))
    if w == 0:
        raise ValueError("|k| must be positive")
    d = kv.size
    norm = (2 * math.pi) ** (-d / 2) if L is None else L ** (-d / 2)
    phase = _dot(kv, x_grid)
    F = math.sqrt(2 * w) * norm * np.cos(phase)
    G = math.sqrt(2 / w) * norm * np.sin(phase)
    if d > 1:
        return F, G
    return SmearingProfile.build(x_grid, F), SmearingProfile.build(x_grid, G)


def _packet_phases(psi_tilde: Tabulated, x):
    x = np.asarray(x, dtype=float)
    k = psi_tilde.k
    w = np.abs(k)
    amp = psi_tilde.weights * psi_tilde.amplitude
    # rows: positions, columns: momenta
    waves = np.exp(1j * np.outer(x, k)) * amp[None, :] / math.sqrt(2 * math.pi)
    return waves, w


def smearing_JK(psi_tilde: Tabulated, x_grid, window=None, norm_tol: float = 1e-6):
    """Smearings ``J`` (momentum-like) and ``K`` (field-like) of a 1d packet.

    ``J = int dk (2 pi)^(-1/2) (w/2)^(1/2) [e^{ikx} psi~ + c.c.]`` and
    ``K = -i int dk (2 pi)^(-1/2) (2w)^(-1/2) [e^{ikx} psi~ - c.c.]``,
    both by the trapezoid rule on the packet's own table.  ``K`` then equals
    twice the imaginary part of the tabulated ``psi(0, x)``.
    """
    n2 = float(np.sum(psi_tilde.weights * np.abs(psi_tilde.amplitude) ** 2))
    if abs(n2 - 1) > norm_tol:
        raise ValueError(f"momentum amplitude not normalised (norm^2 = {n2:.9g})")
    waves, w = _packet_phases(psi_tilde, x_grid)
    inv = np.divide(1.0, np.sqrt(2 * w), out=np.zeros_like(w), where=w > 0)
    J = 2 * (waves.real @ np.sqrt(w / 2))
    K = 2 * (waves.imag @ inv)
    return (SmearingProfile.build(x_grid, J, window),
            SmearingProfile.build(x_grid, K, window))


@dataclass(frozen=True)
class LocalizationReport:
    tail_metric: float
    decay_classification: str
    slope: float | None = None
    r_squared: float | None = None


def _envelope(x, v, bins=24):
    """Binned maxima of ``|v|``, which tames the zeros of an oscillating profile."""
    edges = np.linspace(np.min(x), np.max(x), bins + 1)
    cx, cv = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (x >= lo) & (x <= hi)
        if sel.any():
            j = np.argmax(v[sel])
            cx.append(x[sel][j])
            cv.append(v[sel][j])
    return np.array(cx), np.array(cv)


def localization_report(profile: SmearingProfile, window) -> LocalizationReport:
    """Classify the decay of a profile outside ``window``.

    ``bounded`` when every tail sample is exactly zero; ``exponential-tail``
    when the log of the tail envelope, against distance from the window,
    fits a negative slope with ``R^2 > 0.9`` (samples under ``1e-13`` of the
    peak are rounding noise and dropped); otherwise ``non-decaying``.
    """
    x, v = profile.grid, np.abs(profile.values)
    inside, outside = _split(x, window)
    metric = tail_metric(x, profile.values, window)
    if not np.any(v[outside]):
        return LocalizationReport(metric, "bounded")
    a, b = window
    dist = np.where(x < a, a - x, x - b)[outside]
    tail = v[outside]
    cx, cv = _envelope(dist, tail)
    keep = cv > NOISE_FLOOR * np.max(v)
    if keep.sum() >= 3:
        X, Yl = cx[keep], np.log(cv[keep])
        if np.ptp(Yl) == 0:
            return LocalizationReport(metric, "non-decaying", 0.0, 0.0)
        fit = linregress(X, Yl)
        slope, r2 = fit.slope, fit.rvalue ** 2
        if slope < 0 and r2 > R2_THRESHOLD:
            return LocalizationReport(metric, "exponential-tail", float(slope), float(r2))
        return LocalizationReport(metric, "non-decaying", float(slope), float(r2))
    if keep.sum() < 3 and cv.size >= 3:
        # the tail drops straight to rounding level: faster than any fit can see
        return LocalizationReport(metric, "exponential-tail")
    return LocalizationReport(metric, "non-decaying")


# --------------------------------------------------------------------------
# bipartite no-signalling


def _hermitian(A, tol=1e-12):
    return np.linalg.norm(A - A.conj().T) <= tol * max(1.0, np.linalg.norm(A))


@dataclass(frozen=True)
class BipartiteSystem:
    dimA: int
    dimB: int
    A: np.ndarray
    B: np.ndarray
    rho0: np.ndarray

    def __post_init__(self):
        A, B, rho = (np.asarray(m, dtype=complex) for m in (self.A, self.B, self.rho0))
        if A.shape != (self.dimA, self.dimA) or B.shape != (self.dimB, self.dimB):
            raise ValueError("operator shapes do not match the factor dimensions")
        n = self.dimA * self.dimB
        if rho.shape != (n, n):
            raise ValueError("state does not live on the tensor product")
        if not (_hermitian(A) and _hermitian(B)):
            raise ValueError("A and B must be Hermitian")
        if not _hermitian(rho) or abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("rho0 must be Hermitian with unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("rho0 must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "rho0", rho)

    @classmethod
    def random(cls, rng: np.random.Generator, dimA: int, dimB: int) -> "BipartiteSystem":
        A = random_hermitian(rng, dimA)
        B = random_hermitian(rng, dimB)
        return cls(dimA, dimB, A, B, random_density(rng, dimA * dimB))


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (M + M.conj().T) / 2


def random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = M @ M.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(M)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _expi(H, lam):
    e, V = np.linalg.eigh(H)
    return (V * np.exp(1j * lam * e)) @ V.conj().T


def partial_trace_A(rho: np.ndarray, dimA: int, dimB: int) -> np.ndarray:
    return np.einsum("ijik->jk", rho.reshape(dimA, dimB, dimA, dimB))


def trace_norm(M: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def bipartite_no_signalling(system: BipartiteSystem, U1: np.ndarray,
                            lambda_samples: Sequence[float],
                            A_prime: np.ndarray | None = None) -> float:
    """Largest change of the reduced state on B caused by choosing ``U1``.

    For each ``lambda`` the state ``(U x 1) rho0 (U x 1)^dag`` is acted on by
    ``exp(i lambda A_op) exp(i lambda 1 x B)``, with ``A_op = A x 1`` unless a
    nonlocal ``A_prime`` on the whole product is given.  The return value is
    the largest trace-norm distance between the reduced states on B for
    ``U = U1`` and ``U = 1``.
    """
    dA, dB = system.dimA, system.dimB
    U1 = np.asarray(U1, dtype=complex)
    if U1.shape != (dA, dA):
        raise ValueError("U1 must act on subsystem A")
    if np.linalg.norm(U1.conj().T @ U1 - np.eye(dA)) > 1e-12:
        raise ValueError("U1 is not unitary")
    IA, IB = np.eye(dA), np.eye(dB)
    A_op = np.kron(system.A, IB) if A_prime is None else np.asarray(A_prime, dtype=complex)
    if A_op.shape != (dA * dB, dA * dB) or not _hermitian(A_op):
        raise ValueError("A_prime must be Hermitian on the product space")
    B_op = np.kron(IA, system.B)
    worst = 0.0
    for lam in lambda_samples:
        V = _expi(A_op, lam) @ _expi(B_op, lam)
        reduced = []
        for U in (IA, U1):
            W = V @ np.kron(U, IB)
            reduced.append(partial_trace_A(W @ system.rho0 @ W.conj().T, dA, dB))
        worst = max(worst, trace_norm(reduced[1] - reduced[0]))
    return worst
