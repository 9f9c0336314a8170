"""One-particle wavefunctions psi(xi) = <0|phi(xi)|1> of a free massless scalar.

Conventions: mostly-plus metric, ``k_mu xi^mu = -|k| t + k.x``, and the
continuum field normalisation

    psi(t, x) = int d^dk (2|k|)^(-1/2) (2 pi)^(-d/2) exp(i k_mu xi^mu) psit(k)

for a momentum amplitude ``psit`` with unit L2 norm.  A Gaussian packet has
``psit(k) = (pi sigma^2)^(-d/4) exp(-(k - k0)^2 / (2 sigma^2))``.
"""

from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import mpmath
import numpy as np

from .quadrature import gauss_kronrod
from .spacetime import Interval, SpacetimePoint, classify_interval
from .specfun import scaled_pcfd

log = logging.getLogger(__name__)

#: Gaussian tail cut for radial / 1d integrals, in units of sigma
TAIL_SIGMAS = 12.0
#: default infrared cutoff for 1+1d packets, as a fraction of k0
EPSILON_FRACTION = 1e-3


@dataclass(frozen=True)
class SingleMomentum:
    k: tuple[float, ...]
    L: float

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        object.__setattr__(self, "k", k)
        if not self.L > 0:
            raise ValueError("box side must be positive")

    @property
    def d(self) -> int:
        return len(self.k)


@dataclass(frozen=True)
class Gaussian:
    """Gaussian packet around mean momentum ``k0``.

    ``epsilon`` is the infrared cutoff (1+1d only); ``None`` picks
    ``EPSILON_FRACTION * |k0|``.
    """

    k0: tuple[float, ...]
    sigma: float
    epsilon: float | None = None

    def __post_init__(self):
        k0 = tuple(float(v) for v in np.atleast_1d(self.k0))
        object.__setattr__(self, "k0", k0)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if math.hypot(*k0) < 3 * self.sigma:
            warnings.warn(f"|k0| = {math.hypot(*k0):g} is not large compared to "
                          f"sigma = {self.sigma:g}", stacklevel=2)

    @property
    def d(self) -> int:
        return len(self.k0)

    @property
    def cutoff(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return EPSILON_FRACTION * math.hypot(*self.k0)

    def amplitude(self, k: np.ndarray) -> np.ndarray:
        """``psit(k)`` on an array of shape (..., d) (or (...) when d = 1)."""
        k = np.asarray(k, dtype=float)
        if self.d == 1 and (k.ndim == 0 or k.shape[-1] != 1):
            k = k[..., None]
        dk2 = ((k - np.array(self.k0)) ** 2).sum(axis=-1)
        return (math.pi * self.sigma ** 2) ** (-self.d / 4) * np.exp(
            -dk2 / (2 * self.sigma ** 2))


@dataclass(frozen=True)
class Tabulated:
    """Momentum amplitude sampled on a uniform 1d grid.

    Integrals over the table use the trapezoid rule, which is spectrally
    accurate when the amplitude has decayed to rounding level at both ends.
    """

    k: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        amp = np.asarray(self.amplitude, dtype=complex)
        if k.ndim != 1 or k.shape != amp.shape or k.size < 2:
            raise ValueError("need matching 1d grid and amplitude arrays")
        steps = np.diff(k)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("momentum grid must be uniform")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "amplitude", amp)

    @property
    def d(self) -> int:
        return 1

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.k.size, self.k[1] - self.k[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @classmethod
    def from_gaussian(cls, packet: Gaussian, n: int = 1024,
                      width: float = 8.0) -> "Tabulated":
        if packet.d != 1:
            raise ValueError("tabulation is one-dimensional")
        k0 = packet.k0[0]
        k = np.linspace(k0 - width * packet.sigma, k0 + width * packet.sigma, n)
        return cls(k, packet.amplitude(k))


WavePacket = Union[SingleMomentum, Gaussian, Tabulated]


@dataclass(frozen=True)
class ClosedFormTerms:
    v_plus: complex
    v_minus: complex
    D_plus: complex
    D_minus: complex


@dataclass(frozen=True)
class SignalSample:
    X: SpacetimePoint
    Y: SpacetimePoint
    psiX: complex
    psiY: complex
    S: float
    spacelike: bool


def norm_squared(packet: WavePacket) -> float:
    """``int |psit(k)|^2 d^dk`` by quadrature."""
    if isinstance(packet, Tabulated):
        return float(np.sum(packet.weights * np.abs(packet.amplitude) ** 2))
    if isinstance(packet, SingleMomentum):
        return 1.0
    s = packet.sigma
    one_axis = []
    for c in packet.k0:
        res = gauss_kronrod(lambda k: np.exp(-(k - c) ** 2 / s ** 2),
                            c - TAIL_SIGMAS * s, c + TAIL_SIGMAS * s, panels=8,
                            rtol=1e-13)
        one_axis.append(res.value.real / math.sqrt(math.pi * s * s))
    return float(np.prod(one_axis))


# --------------------------------------------------------------------------
# wavefunctions


def psi_single_momentum(packet: SingleMomentum, xi: SpacetimePoint) -> complex:
    """Box-normalised plane wave ``L^(-d/2) (2 w)^(-1/2) exp(i k_mu xi^mu)``."""
    if xi.d != packet.d:
        raise ValueError("dimension mismatch")
    w = math.hypot(*packet.k)
    if w == 0:
        raise ValueError("the zero mode is excluded")
    phase = -w * xi.t + sum(a * b for a, b in zip(packet.k, xi.x))
    return packet.L ** (-packet.d / 2) / math.sqrt(2 * w) * cmath.exp(1j * phase)


def psi_1d(packet: Gaussian, Y: SpacetimePoint, rtol: float = 1e-11) -> complex:
    """Right-moving 1+1d Gaussian packet with support on ``k > epsilon``."""
    if packet.d != 1 or Y.d != 1:
        raise ValueError("psi_1d needs d = 1")
    eps = packet.cutoff
    if not eps > 0:
        raise ValueError("the 1+1d packet needs a positive infrared cutoff")
    k0, s = packet.k0[0], packet.sigma
    if k0 <= 0:
        raise ValueError("psi_1d describes right movers (k0 > 0)")
    # for right movers k_mu Y^mu = k (z - t)
    u = Y.x[0] - Y.t
    norm = (math.pi * s * s) ** -0.25 / math.sqrt(4 * math.pi)
    lo = max(eps, k0 - TAIL_SIGMAS * s)
    hi = k0 + TAIL_SIGMAS * s

    def f(k):
        return norm / np.sqrt(k) * np.exp(-(k - k0) ** 2 / (2 * s * s) + 1j * k * u)

    width = 1.0 / (4.0 * max(1.0, abs(u)))
    res = gauss_kronrod(f, lo, hi, panels=max(8, int((hi - lo) / width)), rtol=rtol)
    if not res.converged:
        log.warning("psi_1d quadrature did not converge at %s", Y)
    return res.value


def _check_axis(packet: Gaussian):
    if packet.d != 3 or packet.k0[0] != 0 or packet.k0[1] != 0:
        raise ValueError("closed form needs d = 3 and k0 along the z axis")


def psi_3d_closed_form(packet: Gaussian, t: float, z: float,
                       rtol: float = 1e-12) -> tuple[complex, ClosedFormTerms]:
    """On-axis 3+1d Gaussian packet via parabolic cylinder functions.

    Both ``exp(v**2/4) D_{-3/2}(v)`` products are carried in log form so that
    neither the Gaussian prefactor nor the D factor overflows on its own.
    """
    _check_axis(packet)
    k0, s = packet.k0[2], packet.sigma
    a = k0 / (s * s)
    v_plus = 1j * s * (t + (z - 1j * a))
    v_minus = 1j * s * (t - (z - 1j * a))
    res_p = scaled_pcfd(-1.5, v_plus, rtol=rtol)
    res_m = scaled_pcfd(-1.5, v_minus, rtol=rtol)
    log_pre = -k0 * k0 / (2 * s * s) - math.log(4 * math.pi ** 0.75)
    denom = a + 1j * z
    value = (cmath.exp(log_pre + res_m.log_scaled)
             - cmath.exp(log_pre + res_p.log_scaled)) / denom
    terms = ClosedFormTerms(v_plus, v_minus,
                            _safe_exp(res_p.log_scaled - v_plus * v_plus / 4),
                            _safe_exp(res_m.log_scaled - v_minus * v_minus / 4))
    return value, terms


def _safe_exp(w: complex) -> complex:
    if w.real > 700:
        return complex(math.inf, 0.0)
    return cmath.exp(w)


_GL_CACHE: dict[tuple[int, int], list] = {}


def _gl_nodes(degree: int, prec: int):
    key = (degree, prec)
    if key not in _GL_CACHE:
        gl = mpmath.calculus.quadrature.GaussLegendre(mpmath.mp)
        _GL_CACHE[key] = gl.calc_nodes(degree, prec)
    return _GL_CACHE[key]


def _radial_sum(t, z, k0, s, panels, degree):
    mp = mpmath.mp
    nodes = _gl_nodes(degree, mp.prec)
    umax = mp.sqrt(k0 + TAIL_SIGMAS * s)
    h = umax / panels
    two_s2 = 2 * s * s
    total = mp.mpc(0)
    for p in range(panels):
        c = (p + mp.mpf(0.5)) * h
        for x, w in nodes:
            u = c + h / 2 * x
            k = u * u
            grow = mp.expj(k * (z - t)) * mp.exp(-(k - k0) ** 2 / two_s2)
            decay = mp.expj(-k * (z + t)) * mp.exp(-(k + k0) ** 2 / two_s2)
            total += w * u * u * (grow - decay)
    return total * h  # h/2 from the panel map, 2 from dk = 2u du


def psi_3d_quadrature(packet: Gaussian, t: float, z: float,
                      rtol: float = 1e-8, dps: int = 50) -> complex:
    """Independent oracle for the on-axis 3+1d packet.

    The angular integral is done analytically, ``int_{-1}^{1} exp(a mu) dmu =
    2 sinh(a)/a`` with ``a = k (k0/sigma^2 + i z)``, leaving a radial integral
    over ``(0, k0 + 12 sigma]``.  It is evaluated in ``dps``-digit arithmetic
    with composite Gauss-Legendre on ``k = u^2``, doubling the panel count
    until two successive sums agree to ``rtol``.  The extra digits absorb the
    cancellation between the two exponentials of the sinh far from the
    packet, where |psi| drops twenty orders of magnitude below its peak.
    """
    _check_axis(packet)
    with mpmath.workdps(dps):
        k0 = mpmath.mpf(packet.k0[2])
        s = mpmath.mpf(packet.sigma)
        t_ = mpmath.mpf(t)
        z_ = mpmath.mpf(z)
        span = float(abs(t) + abs(z) + 1) * float(k0 + TAIL_SIGMAS * s)
        panels = max(8, int(span / 12))
        prev = _radial_sum(t_, z_, k0, s, panels, 4)
        for _ in range(8):
            panels *= 2
            cur = _radial_sum(t_, z_, k0, s, panels, 4)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            prev = cur
        else:
            raise ArithmeticError(f"radial oracle did not converge at t={t}, z={z}")
        pre = (mpmath.pi * s * s) ** mpmath.mpf(-0.75) * (2 * mpmath.pi) ** mpmath.mpf(-1.5)
        pre *= 2 * mpmath.pi / mpmath.sqrt(2)
        value = pre * cur / (k0 / (s * s) + 1j * z_)
        return complex(value)


def psi_cubature(packet: Gaussian, xi: SpacetimePoint, n: int = 48) -> complex:
    """Tensor Gauss-Hermite cubature for a Gaussian packet at any point.

    A slow spot check for points off the z axis (``n**d`` nodes).  The
    ``1/sqrt(2|k|)`` factor is treated as smooth, so the packet must sit
    well away from ``k = 0`` and the point near the packet (the rule cannot
    resolve cancellation to far-tail values).
    """
    if xi.d != packet.d:
        raise ValueError("dimension mismatch")
    x1, w1 = np.polynomial.hermite.hermgauss(n)
    d = packet.d
    grids = np.meshgrid(*([x1] * d), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.prod(np.meshgrid(*([w1] * d), indexing="ij"), axis=0).ravel()
    s = packet.sigma
    k = np.array(packet.k0) + math.sqrt(2) * s * u
    kn = np.linalg.norm(k, axis=-1)
    phase = -kn * xi.t + k @ np.array(xi.x)
    # psit(k) dk = (pi s^2)^(-d/4) (sqrt(2) s)^d exp(-u^2) du
    pre = (math.pi * s * s) ** (-d / 4) * (math.sqrt(2) * s) ** d * (2 * math.pi) ** (-d / 2)
    return complex(pre * np.sum(w * np.exp(1j * phase) / np.sqrt(2 * kn)))


def psi_tabulated(packet: Tabulated, xi: SpacetimePoint) -> complex:
    """1+1d wavefunction of a tabulated amplitude (trapezoid over the grid)."""
    if xi.d != 1:
        raise ValueError("tabulated packets are one-dimensional")
    k = packet.k
    w = np.abs(k)
    phase = -w * xi.t + k * xi.x[0]
    # an exact k = 0 node carries an integrable 1/sqrt(k) singularity; drop it
    inv = np.divide(1.0, np.sqrt(4 * math.pi * w), out=np.zeros_like(w), where=w > 0)
    integrand = packet.amplitude * np.exp(1j * phase) * inv
    return complex(np.sum(packet.weights * integrand))


def psi(packet: WavePacket, xi: SpacetimePoint) -> complex:
    """Dispatch to the evaluator appropriate for the packet kind."""
    if isinstance(packet, SingleMomentum):
        return psi_single_momentum(packet, xi)
    if isinstance(packet, Tabulated):
        return psi_tabulated(packet, xi)
    if packet.d == 1:
        return psi_1d(packet, xi)
    if packet.d == 3:
        if xi.x[0] != 0 or xi.x[1] != 0:
            raise ValueError("3+1d packets are evaluated on the z axis only")
        return psi_3d_closed_form(packet, xi.t, xi.x[2])[0]
    raise ValueError(f"unsupported dimension {packet.d}")


def signal_strength(X: SpacetimePoint, Y: SpacetimePoint,
                    packet: WavePacket) -> SignalSample:
    """``S(X, Y) = -Im(conj(psi(X)) psi(Y))`` together with the causal flag."""
    psi_x = psi(packet, X)
    psi_y = psi(packet, Y)
    S = -(psi_x.conjugate() * psi_y).imag
    kind, _ = classify_interval(X, Y)
    return SignalSample(X, Y, psi_x, psi_y, S, kind is Interval.SPACELIKE)


# --------------------------------------------------------------------------
# large-t fall-off


@dataclass(frozen=True)
class FalloffFit:
    exponent: float
    gamma_hat: float
    t: np.ndarray
    envelope: np.ndarray
    im_psi: np.ndarray


def falloff_fit(packet: Gaussian, delta: float, t_range: Sequence[float],
                n_samples: int = 16) -> FalloffFit:
    """Fit the power law of the superluminal signal just outside the light cone.

    Samples ``psi(t, z = t + delta)`` on a log-spaced grid.  The envelope is
    the analytic modulus ``|psi|`` of the closed form times the explicit
    carrier factor ``|cos(k0 delta)|``; its log is fitted against ``log t``.
    ``gamma_hat`` is the amplitude of ``envelope * t / (sqrt(k0/sigma)
    |cos(k0 delta)|)`` with the slope pinned to -1.
    """
    _check_axis(packet)
    k0, s = packet.k0[2], packet.sigma
    if not 0 < delta < 1 / s:
        raise ValueError("delta must lie in (0, 1/sigma)")
    t_min, t_max = float(t_range[0]), float(t_range[1])
    if t_min < 5 * k0 / s ** 2:
        raise ValueError(f"t_min must be at least 5 k0/sigma^2 = {5 * k0 / s ** 2:g}")
    t = np.geomspace(t_min, t_max, int(n_samples))
    values = np.array([psi_3d_closed_form(packet, ti, ti + delta)[0] for ti in t])
    carrier = abs(math.cos(k0 * delta))
    env = np.abs(values) * carrier
    ok = env > 0
    if ok.sum() < 4:
        raise ValueError("degenerate fit: fewer than 4 usable samples")
    slope, _ = np.polyfit(np.log(t[ok]), np.log(env[ok]), 1)
    scale = math.sqrt(k0 / s)
    if carrier > 0:
        gamma_hat = float(np.exp(np.mean(np.log(env[ok] * t[ok]))) / (scale * carrier))
    else:
        gamma_hat = math.nan
    return FalloffFit(float(slope), gamma_hat, t, env, values.imag)
