"""Two oscillator detectors coupled to a single field mode.

The Schrodinger-picture Hamiltonian on ``(0, T]`` is

    H = sum_i w_i d_i^dag d_i + Omega f^dag f
        + sum_i lambda_i (d_i + d_i^dag)(f e^{i Omega x_i} + f^dag e^{-i Omega x_i}),

which reproduces the interaction-picture couplings
``lambda_i (d_i e^{-i w_i t} + h.c.)(f e^{i Omega (x_i - t)} + h.c.)``.
Because ``H`` is quadratic, the Heisenberg equations for the operator vector
``v = (d1, d1^dag, d2, d2^dag, f, f^dag)`` close: ``dv/dt = M v`` with a
constant 6x6 generator ``M``, so ``v(T) = expm(M T) v(0)``.

Energy of detector 1: ``d1^dag d1`` commutes with the free evolution of
detector 1, so its interaction-picture expectation at ``T`` equals the
Schrodinger-picture one.  Writing ``d1(T) = sum_j E[0, j] v_j``, the vacuum
expectation of ``d1(T)^dag d1(T)`` picks up only the creation-operator
coefficients ``beta_j = E[0, j]`` for ``j`` in ``{1, 3, 5}``:
``<d1^dag d1>_T = sum_j |beta_j|^2``, and ``E1 = w1 (<d1^dag d1>_T + 1/2)``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

#: labels of the Heisenberg operator vector
LABELS = ("d1", "d1^dag", "d2", "d2^dag", "f", "f^dag")
SYMPLECTIC_TOL = 1e-10
CONVERGENCE_TOL = 1e-4
PARITY_TOL = 1e-10
DEFAULT_GRID = (0.0, 0.01, -0.01, 0.02, -0.02, 0.03, -0.03)

# canonical pairing K_ab = [v_a, v_b]
_K = np.zeros((6, 6))
for _a in (0, 2, 4):
    _K[_a, _a + 1] = 1.0
    _K[_a + 1, _a] = -1.0


class SymplecticError(ArithmeticError):
    """The linear evolution does not preserve the canonical commutators."""


class TruncationWarning(UserWarning):
    """Raising the Fock truncation by two moved E1 by more than the tolerance."""


class FitError(ArithmeticError):
    """The lambda2 grid cannot identify the quadratic coefficient."""


@dataclass(frozen=True)
class LinearHeisenberg:
    pass


@dataclass(frozen=True)
class TruncatedFock:
    n_det: int
    n_field: int

    def __post_init__(self):
        if self.n_det < 2 or self.n_field < 2:
            raise ValueError("truncations must keep at least two levels")


Backend = Union[LinearHeisenberg, TruncatedFock]


@dataclass(frozen=True)
class DetectorTriadModel:
    w1: float = 1.0
    w2: float = 1.0
    Omega: float = 1.0
    x1: float = 0.0
    x2: float = 2 * math.pi
    lambda1: float = 0.5
    lambda2: float = 0.0
    T: float = math.sqrt(2) * math.pi
    backend: Backend = LinearHeisenberg()

    def __post_init__(self):
        for name in ("w1", "w2", "Omega", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("x1", "x2", "lambda1", "lambda2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def coupling(self, i: int, t: float) -> float:
        """Step switching: zero for ``t <= 0`` and ``t > T``."""
        lam = _pick(i, self.lambda1, self.lambda2)
        return lam if 0.0 < t <= self.T else 0.0

    def with_(self, **changes) -> "DetectorTriadModel":
        return replace(self, **changes)


def _pick(i, a, b):
    if i == 1:
        return a
    if i == 2:
        return b
    raise ValueError("detector index must be 1 or 2")


def reference_model(**changes) -> DetectorTriadModel:
    """``w1 = w2 = Omega = 1``, ``lambda1 = 1/2``, ``x1 = 0``, ``x2 = 2 pi``, ``T = sqrt(2) pi``."""
    return DetectorTriadModel(**changes)


# --------------------------------------------------------------------------
# linear backend


def heisenberg_generator(model: DetectorTriadModel) -> np.ndarray:
    """Generator ``M`` of ``dv/dt = M v`` for ``v = (d1, d1^dag, d2, d2^dag, f, f^dag)``."""
    M = np.zeros((6, 6), dtype=complex)
    M[4, 4] = -1j * model.Omega
    M[5, 5] = 1j * model.Omega
    for a, w, lam, x in ((0, model.w1, model.lambda1, model.x1),
                         (2, model.w2, model.lambda2, model.x2)):
        ph = cmath.exp(1j * model.Omega * x)
        M[a, a] = -1j * w
        M[a + 1, a + 1] = 1j * w
        # d' = i[H, d] = -i w d - i lam (f ph + f^dag ph*)
        M[a, 4] += -1j * lam * ph
        M[a, 5] += -1j * lam * ph.conjugate()
        M[a + 1, 4] += 1j * lam * ph
        M[a + 1, 5] += 1j * lam * ph.conjugate()
        # f' = -i Omega f - i lam ph* (d + d^dag)
        M[4, a] += -1j * lam * ph.conjugate()
        M[4, a + 1] += -1j * lam * ph.conjugate()
        M[5, a] += 1j * lam * ph
        M[5, a + 1] += 1j * lam * ph
    return M


@dataclass(frozen=True)
class ModeVector:
    """Linear Heisenberg map ``v(T) = coefficients @ v(0)``."""

    coefficients: np.ndarray
    labels: tuple[str, ...] = LABELS

    def symplectic_defect(self) -> float:
        E = self.coefficients
        return float(np.max(np.abs(E @ _K @ E.T - _K)))

    def number_expectation(self, mode: int = 0) -> float:
        """Vacuum ``<v_a(T)^dag v_a(T)>`` for annihilator row ``a = 2*mode``."""
        beta = self.coefficients[2 * mode, 1::2]
        return float(np.sum(np.abs(beta) ** 2))


def evolve_linear(model: DetectorTriadModel) -> ModeVector:
    """Exact ``expm(M T)`` (Pade scaling-and-squaring) with a symplectic check."""
    if not isinstance(model.backend, LinearHeisenberg):
        raise ValueError("evolve_linear needs the LinearHeisenberg backend")
    E = scipy.linalg.expm(heisenberg_generator(model) * model.T)
    mv = ModeVector(E)
    defect = mv.symplectic_defect()
    if defect > SYMPLECTIC_TOL:
        raise SymplecticError(f"canonical pairing violated by {defect:.3g}")
    return mv


# --------------------------------------------------------------------------
# truncated Fock backend


def _ladder(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr")


def _operators(backend: TruncatedFock):
    """Sparse ``d1, d2, f`` on the ordering detector1 x detector2 x field."""
    nd, nf = backend.n_det, backend.n_field
    I_d, I_f = sp.identity(nd, format="csr"), sp.identity(nf, format="csr")
    a_d, a_f = _ladder(nd), _ladder(nf)
    d1 = sp.kron(sp.kron(a_d, I_d), I_f, format="csr")
    d2 = sp.kron(sp.kron(I_d, a_d), I_f, format="csr")
    f = sp.kron(sp.kron(I_d, I_d), a_f, format="csr")
    return d1, d2, f


def _fock_backend(model: DetectorTriadModel, default=TruncatedFock(3, 3)) -> TruncatedFock:
    return model.backend if isinstance(model.backend, TruncatedFock) else default


def schrodinger_hamiltonian(model: DetectorTriadModel) -> sp.csr_matrix:
    """Sparse Schrodinger-picture Hamiltonian during the switched-on period."""
    d1, d2, f = _operators(_fock_backend(model))
    H = model.w1 * (d1.T @ d1) + model.w2 * (d2.T @ d2) + model.Omega * (f.T @ f)
    for lam, d, x in ((model.lambda1, d1, model.x1), (model.lambda2, d2, model.x2)):
        if lam:
            ph = cmath.exp(1j * model.Omega * x)
            H = H + lam * (d + d.T) @ (ph * f + ph.conjugate() * f.T)
    return H.tocsr()


def _interaction_operator(model: DetectorTriadModel, i: int, t: float, lam: float):
    d1, d2, f = _operators(_fock_backend(model))
    d = _pick(i, d1, d2)
    w = _pick(i, model.w1, model.w2)
    x = _pick(i, model.x1, model.x2)
    det = cmath.exp(-1j * w * t) * d + cmath.exp(1j * w * t) * d.T
    ph = cmath.exp(1j * model.Omega * (x - t))
    fld = ph * f + ph.conjugate() * f.T
    return (lam * (det @ fld)).toarray()


def interaction_hamiltonian(model: DetectorTriadModel, i: int, t: float) -> np.ndarray:
    """``lambda_i(t)(d_i e^{-i w_i t} + h.c.)(f e^{i Omega (x_i - t)} + h.c.)``.

    Dense matrix on the detector1 x detector2 x field tensor basis; zero
    outside the switching support.
    """
    if not isinstance(model.backend, TruncatedFock):
        raise ValueError("interaction_hamiltonian needs the TruncatedFock backend")
    return _interaction_operator(model, i, t, model.coupling(i, t))


def commutator_factor(model: DetectorTriadModel, t1: float, t2: float) -> tuple[float, float]:
    """``sin(Omega_mu (X1 - X2)^mu)`` and ``||[h1(t1), h2(t2)]||``.

    ``Omega_mu dX^mu = -Omega (t1 - t2) + Omega (x1 - x2)``.  The norm is the
    spectral norm of the commutator of the coupling-stripped interactions
    ``h_i = H_i / lambda_i`` on the truncated space (3 levels per oscillator
    unless the model carries a Fock backend), so it does not vanish merely
    because a coupling is switched off.  The full commutator equals
    ``2 i lambda1 lambda2 sin(...)`` times ``A1 A2 [f, f^dag]``.
    """
    phase = -model.Omega * (t1 - t2) + model.Omega * (model.x1 - model.x2)
    h1 = _interaction_operator(model, 1, t1, 1.0)
    h2 = _interaction_operator(model, 2, t2, 1.0)
    norm = float(np.linalg.norm(h1 @ h2 - h2 @ h1, 2))
    return math.sin(phase), norm


def _fock_energy(model: DetectorTriadModel, backend: TruncatedFock) -> float:
    model = model.with_(backend=backend)
    H = schrodinger_hamiltonian(model)
    v = np.zeros(H.shape[0], dtype=complex)
    v[0] = 1.0
    w = expm_multiply(-1j * model.T * H.tocsc(), v)
    d1, _, _ = _operators(backend)
    n1 = np.vdot(w, d1.T @ (d1 @ w)).real
    return model.w1 * (n1 + 0.5)


def detector_energy(model: DetectorTriadModel, *, check_convergence: bool = True) -> float:
    """``E1(T) = w1 (<d1^dag d1>_T + 1/2)`` from the free ground state.

    With the Fock backend and ``check_convergence``, the energy is also
    computed with both truncations raised by two, and a
    :class:`TruncationWarning` is emitted if it moves by more than 1e-4.
    """
    if isinstance(model.backend, LinearHeisenberg):
        return model.w1 * (evolve_linear(model).number_expectation(0) + 0.5)
    b = model.backend
    e = _fock_energy(model, b)
    if check_convergence:
        e2 = _fock_energy(model, TruncatedFock(b.n_det + 2, b.n_field + 2))
        if abs(e2 - e) > CONVERGENCE_TOL:
            warnings.warn(f"E1 not converged at n_det={b.n_det}, n_field={b.n_field}: "
                          f"raising both by 2 changes it by {e2 - e:.3g}",
                          TruncationWarning, stacklevel=2)
    return e


@dataclass(frozen=True)
class SignalFit:
    c0: float
    c2: float
    c4: float
    lambda2: tuple[float, ...]
    energies: tuple[float, ...]
    parity_defect: float


def signal_fit(model: DetectorTriadModel,
               lambda2_grid: Sequence[float] = DEFAULT_GRID) -> SignalFit:
    """Least-squares ``E1(lambda2) = c0 + c2 lambda2^2 + c4 lambda2^4`` on the grid."""
    grid = [float(v) for v in lambda2_grid]
    nonzero = {abs(v) for v in grid if v != 0.0}
    if 0.0 not in grid or len([v for v in grid if v != 0.0]) < 2:
        raise FitError("grid needs 0 and at least two nonzero values")
    if max(nonzero) > 0.05:
        raise FitError("grid values must satisfy |lambda2| <= 0.05")
    energies = [detector_energy(model.with_(lambda2=v), check_convergence=False) for v in grid]
    table = dict(zip(grid, energies))
    parity = max((abs(table[v] - table[-v]) for v in grid if -v in table), default=0.0)
    if parity > PARITY_TOL:
        raise FitError(f"E1 is not even in lambda2 (defect {parity:.3g})")
    lam2 = np.array(grid) ** 2
    n_terms = 3 if len(nonzero) >= 2 else 2
    A = np.vander(lam2, n_terms, increasing=True)
    # scale columns so the condition number measures identifiability only
    scale = np.max(np.abs(A), axis=0)
    As = A / scale
    if np.linalg.cond(As) > 1e10:
        raise FitError("ill-conditioned fit")
    coef, *_ = np.linalg.lstsq(As, np.array(energies), rcond=None)
    coef = coef / scale
    c4 = float(coef[2]) if n_terms == 3 else 0.0
    return SignalFit(float(coef[0]), float(coef[1]), c4, tuple(grid),
                     tuple(energies), parity)


def signal_coefficient(model: DetectorTriadModel,
                       lambda2_grid: Sequence[float] = DEFAULT_GRID) -> float:
    """The ``lambda2^2`` coefficient of ``E1``, the superluminal signal strength."""
    return signal_fit(model, lambda2_grid).c2


def effective_smearing(model: DetectorTriadModel, i: int, x_grid, L: float):
    """Spatial smearings ``F_i, G_i`` equivalent to detector ``i``'s coupling.

    ``F_i = (2 Omega)^(1/2) L^(-1/2) cos(Omega (x - x_i))`` and
    ``G_i = (2/Omega)^(1/2) L^(-1/2) sin(Omega (x - x_i))``.  Returns the two
    profiles and a localization report for ``F_i`` over the middle half of
    the grid.
    """
    from .smearing import SmearingProfile, localization_report

    if not L > 0:
        raise ValueError("box length must be positive")
    x = np.asarray(x_grid, dtype=float)
    xi = _pick(i, model.x1, model.x2)
    W = model.Omega
    F = math.sqrt(2 * W / L) * np.cos(W * (x - xi))
    G = math.sqrt(2 / (W * L)) * np.sin(W * (x - xi))
    lo, hi = x[0] + 0.25 * (x[-1] - x[0]), x[-1] - 0.25 * (x[-1] - x[0])
    Fp = SmearingProfile.build(x, F, (lo, hi))
    Gp = SmearingProfile.build(x, G, (lo, hi))
    return Fp, Gp, localization_report(Fp, (lo, hi))
