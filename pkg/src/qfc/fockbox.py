"""Truncated Fock space of a few box modes and the intervention protocol engine."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .spacetime import SpacetimePoint

ATOL = 1e-12


class TruncatedFockModel:
    """Box modes ``k`` of side ``L`` with total occupation at most ``n_max``.

    The basis is every occupation tuple with ``sum(n) <= n_max``, ordered by
    total occupation and then lexicographically, so index 0 is the vacuum
    and indices ``1..m`` are the one-particle states ``a_j^dag |0>``.
    """

    def __init__(self, L: float, modes: Sequence[Sequence[float]], n_max: int):
        if not L > 0:
            raise ValueError("box side must be positive")
        modes = [tuple(float(c) for c in np.atleast_1d(k)) for k in modes]
        if not modes:
            raise ValueError("need at least one mode")
        d = len(modes[0])
        if any(len(k) != d for k in modes):
            raise ValueError("modes must share one dimension")
        if len(set(modes)) != len(modes):
            raise ValueError("modes must be distinct")
        if any(math.hypot(*k) == 0 for k in modes):
            raise ValueError("the zero mode is excluded")
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        self.L = float(L)
        self.d = d
        self.modes = modes
        self.n_max = int(n_max)
        self.omega = np.array([math.hypot(*k) for k in modes])
        m = len(modes)
        basis = []
        for total in range(n_max + 1):
            for combo in itertools.combinations_with_replacement(range(m), total):
                occ = [0] * m
                for j in combo:
                    occ[j] += 1
                basis.append(tuple(occ))
        # combinations_with_replacement yields each multiset once
        self.basis = basis
        self.index = {occ: i for i, occ in enumerate(basis)}
        expected = math.comb(n_max + m, m)
        if len(basis) != expected:
            raise AssertionError(f"basis size {len(basis)} != {expected}")
        self._lower = [self._annihilator(j) for j in range(m)]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def _annihilator(self, j: int) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        for col, occ in enumerate(self.basis):
            if occ[j] == 0:
                continue
            lowered = list(occ)
            lowered[j] -= 1
            a[self.index[tuple(lowered)], col] = math.sqrt(occ[j])
        return a

    def annihilation(self, j: int) -> np.ndarray:
        return self._lower[j]

    def creation(self, j: int) -> np.ndarray:
        return self._lower[j].T

    def mode_index(self, k: Sequence[float]) -> int:
        key = tuple(float(c) for c in np.atleast_1d(k))
        try:
            return self.modes.index(key)
        except ValueError:
            raise ValueError(f"mode {key} is not in the model") from None

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def one_particle(self, coeffs: Sequence[complex] | int) -> np.ndarray:
        """``sum_j c_j a_j^dag |0>``; an int selects a single mode."""
        if isinstance(coeffs, (int, np.integer)):
            c = np.zeros(self.n_modes, dtype=complex)
            c[coeffs] = 1.0
        else:
            c = np.asarray(coeffs, dtype=complex)
            if c.shape != (self.n_modes,):
                raise ValueError("one coefficient per mode expected")
        v = np.zeros(self.dim, dtype=complex)
        v[1:1 + self.n_modes] = c
        return v

    def plane_wave(self, j: int, X: SpacetimePoint) -> complex:
        """``u_k(X) = exp(i k_mu X^mu)`` for mode ``j``."""
        if X.d != self.d:
            raise ValueError("dimension mismatch")
        phase = -self.omega[j] * X.t + sum(a * b for a, b in zip(self.modes[j], X.x))
        return cmath.exp(1j * phase)

    def mode_wavefunction(self, j: int, X: SpacetimePoint) -> complex:
        """``<0|phi(X)|1_j> = L^(-d/2) (2 w_j)^(-1/2) u_j(X)``."""
        return self.L ** (-self.d / 2) / math.sqrt(2 * self.omega[j]) * self.plane_wave(j, X)


def field_operator(model: TruncatedFockModel, X: SpacetimePoint) -> np.ndarray:
    """Truncated ``phi(X) = L^(-d/2) sum_k (2w)^(-1/2) (a u + a^dag u*)``."""
    phi = np.zeros((model.dim, model.dim), dtype=complex)
    for j in range(model.n_modes):
        coef = model.L ** (-model.d / 2) / math.sqrt(2 * model.omega[j])
        u = model.plane_wave(j, X)
        a = model.annihilation(j)
        phi += coef * (u * a + np.conj(u) * a.T)
    return phi


def is_hermitian(A: np.ndarray, tol: float = ATOL) -> bool:
    return bool(np.linalg.norm(A - A.conj().T) <= tol)


def is_unitary(U: np.ndarray, tol: float = ATOL) -> bool:
    return bool(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])) <= tol)


def hermitian_expi(H: np.ndarray, lam: float) -> np.ndarray:
    """``exp(i lam H)`` for Hermitian ``H`` by eigendecomposition."""
    e, V = np.linalg.eigh(H)
    return (V * np.exp(1j * lam * e)) @ V.conj().T


def unitary_kick(model: TruncatedFockModel, X: SpacetimePoint, lam: float) -> np.ndarray:
    return hermitian_expi(field_operator(model, X), lam)


@dataclass(frozen=True)
class RotationSpec:
    one_particle_a: np.ndarray
    one_particle_b: np.ndarray
    C: complex
    D: complex
    theta: float = 0.0

    def validate(self, tol: float = ATOL) -> None:
        if abs(abs(self.C) ** 2 + abs(self.D) ** 2 - 1) > tol:
            raise ValueError("|C|^2 + |D|^2 must equal 1")
        a, b = self.one_particle_a, self.one_particle_b
        if abs(np.vdot(a, a) - 1) > tol or abs(np.vdot(b, b) - 1) > tol:
            raise ValueError("rotation states must be normalised")
        if abs(np.vdot(a, b)) > tol:
            raise ValueError("rotation states must be orthogonal")


def rotation_unitary(model: TruncatedFockModel, spec: RotationSpec) -> np.ndarray:
    """Rotate within span{|1>, |1'>} and act as the identity on its complement."""
    spec.validate()
    a = np.asarray(spec.one_particle_a, dtype=complex)
    b = np.asarray(spec.one_particle_b, dtype=complex)
    if a.shape != (model.dim,) or b.shape != (model.dim,):
        raise ValueError("rotation states do not live in this model")
    C, D = complex(spec.C), complex(spec.D)
    aa, ab = np.outer(a, a.conj()), np.outer(a, b.conj())
    ba, bb = np.outer(b, a.conj()), np.outer(b, b.conj())
    block = C * aa + D * ab - D.conjugate() * ba + C.conjugate() * bb
    return cmath.exp(1j * spec.theta) * block + (np.eye(model.dim) - aa - bb)


def sequential_probability(state: np.ndarray, projectors: Sequence[np.ndarray]) -> float:
    """``Tr(P_n...P_1 rho P_1...P_n)``, or ``||P_n...P_1 psi||^2`` for a vector."""
    state = np.asarray(state)
    for P in projectors:
        if P.shape[0] != state.shape[0]:
            raise ValueError("dimension mismatch")
    if state.ndim == 1:
        v = state
        for P in projectors:
            v = P @ v
        return float(np.vdot(v, v).real)
    rho = state
    for P in projectors:
        rho = P @ rho @ P.conj().T
    return float(np.trace(rho).real)


def complete_family(projectors: Sequence[np.ndarray], tol: float = ATOL) -> list[np.ndarray]:
    """Check orthogonality and completeness of a projector list."""
    projectors = [np.asarray(P, dtype=complex) for P in projectors]
    dim = projectors[0].shape[0]
    for a, Pa in enumerate(projectors):
        for b, Pb in enumerate(projectors):
            target = Pa if a == b else np.zeros_like(Pa)
            if np.linalg.norm(Pa @ Pb - target) > tol:
                raise ValueError(f"projectors {a} and {b} are not orthogonal projectors")
    if np.linalg.norm(sum(projectors) - np.eye(dim)) > tol:
        raise ValueError("projectors do not sum to the identity")
    return projectors


def binary_measurement(state: np.ndarray) -> list[np.ndarray]:
    """``{B, 1 - B}`` with ``B = |state><state|``."""
    v = np.asarray(state, dtype=complex)
    v = v / np.linalg.norm(v)
    B = np.outer(v, v.conj())
    return [B, np.eye(v.size) - B]


# --------------------------------------------------------------------------
# protocols


@dataclass(frozen=True)
class Kick:
    X: SpacetimePoint
    lam: float


@dataclass(frozen=True)
class IdealMeasure:
    projectors: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class Rotate:
    spec: RotationSpec


@dataclass(frozen=True)
class MeasureField:
    Y: SpacetimePoint


Step = Union[Kick, IdealMeasure, Rotate, MeasureField]


@dataclass
class Protocol:
    steps: list[Step]
    initial_state: np.ndarray

    def with_kick(self, index: int, lam: float) -> "Protocol":
        steps = list(self.steps)
        kick = steps[index]
        if not isinstance(kick, Kick):
            raise ValueError(f"step {index} is not a kick")
        steps[index] = Kick(kick.X, lam)
        return Protocol(steps, self.initial_state)


@dataclass
class ProtocolResult:
    expectation: float
    branches: dict[tuple[int, ...], float] = field(default_factory=dict)
    trace: float = 1.0


def _as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def run_protocol(model: TruncatedFockModel, protocol: Protocol) -> ProtocolResult:
    """Apply the steps in order and return ``Tr(phi(Y) rho_final)``.

    Each ideal measurement splits every branch into one sub-branch per
    projector.  Branch weights are the joint outcome probabilities of the
    sequential rule; the expectation uses their sum (the non-selective
    update ``rho -> sum_b P_b rho P_b``).
    """
    steps = protocol.steps
    if not steps or not isinstance(steps[-1], MeasureField):
        raise ValueError("a protocol must end with a field measurement")
    branches: dict[tuple[int, ...], np.ndarray] = {(): _as_density(protocol.initial_state)}
    if branches[()].shape != (model.dim, model.dim):
        raise ValueError("initial state does not live in this model")
    for step in steps[:-1]:
        if isinstance(step, (Kick, Rotate)):
            if isinstance(step, Kick):
                U = unitary_kick(model, step.X, step.lam)
            else:
                U = rotation_unitary(model, step.spec)
            branches = {key: U @ rho @ U.conj().T for key, rho in branches.items()}
        elif isinstance(step, IdealMeasure):
            projectors = complete_family(step.projectors)
            branches = {key + (b,): P @ rho @ P
                        for key, rho in branches.items()
                        for b, P in enumerate(projectors)}
        elif isinstance(step, MeasureField):
            raise ValueError("the field measurement must be the final step")
        else:
            raise TypeError(f"unknown step {step!r}")
    phi_y = field_operator(model, steps[-1].Y)
    rho = sum(branches.values())
    weights = {key: float(np.trace(r).real) for key, r in branches.items()}
    return ProtocolResult(float(np.trace(phi_y @ rho).real), weights,
                          float(np.trace(rho).real))


def signal_derivative(model: TruncatedFockModel, protocol: Protocol,
                      kick_index: int | None = None, h: float = 1e-4,
                      richardson: bool = True) -> float:
    """Central difference of the final expectation in the kick strength.

    The derivative is taken around the kick's own ``lam`` (zero for a
    signalling test).  ``kick_index`` defaults to the first kick.  The
    differences at ``h`` and ``h/2`` are combined by one Richardson step,
    which cancels the ``O(h^2)`` error (about 1e-9 at ``h = 1e-4``).
    """
    if kick_index is None:
        kick_index = next(i for i, s in enumerate(protocol.steps) if isinstance(s, Kick))
    lam0 = protocol.steps[kick_index].lam

    def central(step):
        up = run_protocol(model, protocol.with_kick(kick_index, lam0 + step)).expectation
        down = run_protocol(model, protocol.with_kick(kick_index, lam0 - step)).expectation
        return (up - down) / (2 * step)

    if not richardson:
        return central(h)
    return (4 * central(h / 2) - central(h)) / 3


def rotation_signal(model: TruncatedFockModel, state: np.ndarray, X: SpacetimePoint,
                    U: np.ndarray, Y: SpacetimePoint) -> float:
    """``2 Im <psi| phi(X) U^dag phi(Y) U |psi>``."""
    left = field_operator(model, X) @ np.asarray(state)
    right = U.conj().T @ field_operator(model, Y) @ U @ np.asarray(state)
    # <psi|phi(X) = (phi(X)|psi>)^dag since phi is Hermitian
    return 2 * np.vdot(left, right).imag


def analytic_box_signal(model: TruncatedFockModel, k: Sequence[float],
                        k_prime: Sequence[float], X: SpacetimePoint,
                        Y: SpacetimePoint) -> float:
    """Closed-form rotation signal between two single-mode states."""
    j, jp = model.mode_index(k), model.mode_index(k_prime)
    w, wp = model.omega[j], model.omega[jp]

    def kx(idx, P):
        return -model.omega[idx] * P.t + sum(a * b for a, b in zip(model.modes[idx], P.x))

    return model.L ** (-model.d) / math.sqrt(w * wp) * (
        math.sin(kx(jp, Y) - kx(j, X)) - math.sin(kx(j, Y) - kx(jp, X)))


def opposite_mode_signal(L: float, k: Sequence[float], X: SpacetimePoint,
                         Y: SpacetimePoint) -> float:
    """The ``k' = -k`` case of :func:`analytic_box_signal` in product form."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    w = float(np.linalg.norm(k))
    d = k.size
    ksum = float(k @ (np.array(Y.x) + np.array(X.x)))
    return -2 * L ** (-d) / w * math.cos(w * (Y.t - X.t)) * math.sin(ksum)


# --------------------------------------------------------------------------
# JSON


def _point(v, d):
    v = [float(c) for c in v]
    if len(v) != d + 1:
        raise ValueError(f"point {v} does not have {d} spatial coordinates")
    return SpacetimePoint(v[0], tuple(v[1:]))


def _cplx(v):
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _one_particle_from(doc, model):
    if isinstance(doc, dict) and "mode" in doc:
        return model.one_particle(int(doc["mode"]))
    coeffs = [_cplx(c) for c in doc]
    return model.one_particle(coeffs)


def protocol_from_json(doc: dict) -> tuple[TruncatedFockModel, Protocol]:
    """Parse ``{"model": {...}, "initial": ..., "steps": [...]}``.

    Step kinds are ``kick`` (``X``, ``lambda``), ``measure`` (``states``: list
    of one-particle states; the complement projector is added), ``rotate``
    (``a``, ``b``, ``C``, ``D``, ``theta``) and ``field`` (``Y``).  One-particle
    states are ``{"mode": j}`` or a per-mode coefficient list; complex
    numbers are ``[re, im]`` pairs.
    """
    m = doc["model"]
    model = TruncatedFockModel(float(m["L"]), m["modes"], int(m.get("n_max", 3)))
    init = doc.get("initial", "vacuum")
    if init == "vacuum":
        state = model.vacuum()
    elif isinstance(init, dict) and "one_particle" in init:
        state = _one_particle_from(init["one_particle"], model)
    else:
        raise ValueError(f"unrecognised initial state {init!r}")
    d = model.d
    steps: list[Step] = []
    for s in doc["steps"]:
        kind = s.get("kind")
        if kind == "kick":
            steps.append(Kick(_point(s["X"], d), float(s.get("lambda", 0.0))))
        elif kind == "measure":
            vecs = [_one_particle_from(v, model) for v in s["states"]]
            projs = [np.outer(v, v.conj()) for v in vecs]
            projs.append(np.eye(model.dim) - sum(projs))
            steps.append(IdealMeasure(tuple(projs)))
        elif kind == "rotate":
            spec = RotationSpec(_one_particle_from(s["a"], model),
                                _one_particle_from(s["b"], model),
                                _cplx(s.get("C", 0.0)), _cplx(s.get("D", -1.0)),
                                float(s.get("theta", 0.0)))
            steps.append(Rotate(spec))
        elif kind == "field":
            steps.append(MeasureField(_point(s["Y"], d)))
        else:
            raise ValueError(f"unknown step kind {kind!r}")
    return model, Protocol(steps, state)
