"""Parabolic cylinder function D_nu(z) of negative order and complex argument.

For nu < 0,

    D_nu(z) = exp(-z**2/4) / Gamma(-nu) * I(z),
    I(z)    = int_0^inf s**(-nu-1) exp(-s**2/2 - z*s) ds.

I(z) is an entire function of z, and the integration ray may be rotated to
``s = r*exp(i*phi)`` for any ``|phi| < pi/4`` without changing its value.
The ray is chosen per argument so that the integrand never grows by more
than the answer does: for ``|Re z| < |Im z|`` it is the ray on which
``Re(z*exp(i*phi)) = 0`` (no exponential growth at all), otherwise the ray
through the saddle ``s = -z``.  On the real axis, by contrast, the integral
for ``z = -a + i*y`` cancels down by a factor ``exp(-y**2/2)``, which wipes
out every significant digit once ``|y| > 9``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_kronrod

#: largest |Im z| handled by quadrature before the precision flag is raised
IMAG_WINDOW = 600.0
#: |z| beyond which the asymptotic series is used as a fallback
ASYMPTOTIC_RADIUS = 30.0
_PHI_CAP = math.pi / 4 - 0.1
_TAIL_LOG = 50.0


class PrecisionLossError(ArithmeticError):
    """The oscillation count of exp(-z*s) exceeds the quadrature budget."""


@dataclass(frozen=True)
class PCFDResult:
    """Value of ``exp(z**2/4) * D_nu(z)`` stored as ``mantissa * exp(log_scale)``."""

    nu: float
    z: complex
    mantissa: complex
    log_scale: float
    error: float
    converged: bool
    method: str

    @property
    def log_scaled(self) -> complex:
        """Complex logarithm of ``exp(z**2/4) * D_nu(z)``."""
        return cmath.log(self.mantissa) + self.log_scale

    @property
    def value(self) -> complex:
        return cmath.exp(self.log_scaled - self.z * self.z / 4)


def _check(nu, z):
    if not nu < 0:
        raise ValueError(f"integral representation needs nu < 0, got {nu}")
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite argument {z}")
    return z


def ray_angle(z: complex) -> float:
    """Rotation angle of the integration ray for argument ``z``."""
    p, y = z.real, z.imag
    arg = math.atan2(y, p)
    # rays with Re(z e^{i phi}) >= 0 show no exponential growth
    lo, hi = -math.pi / 2 - arg, math.pi / 2 - arg
    lo, hi = max(lo, -_PHI_CAP), min(hi, _PHI_CAP)
    if lo <= hi:
        return min(max(-arg, lo), hi)
    # saddle-through ray; only reached for Re z < 0 and |Im z| < |Re z|
    phi = math.atan(y / p)
    return min(max(phi, -_PHI_CAP), _PHI_CAP)


def _integral(nu: float, z: complex, rtol: float, max_depth: int):
    phi = ray_angle(z)
    rot = cmath.exp(1j * phi)
    rot2 = rot * rot
    zr = z * rot
    cos2 = rot2.real
    c = -zr.real
    r_peak = max(0.0, c / cos2)
    log_scale = c * r_peak - 0.5 * r_peak * r_peak * cos2
    # distance past the peak at which the integrand has dropped by e^-TAIL
    slope = max(0.0, -c)
    reach = (math.sqrt(slope * slope + 2.0 * _TAIL_LOG * cos2) - slope) / cos2
    r_max = r_peak + reach * (1.0 - 0.1 * nu)
    freq = abs(zr.imag) + r_max * abs(rot2.imag)
    r_split = min(1.0, 1.0 / max(1.0, abs(z)))
    power = -2.0 * nu - 1.0

    def head(u):
        # s = u**2 e^{i phi}; removes the endpoint singularity of s**(-nu-1)
        r = u * u
        return 2.0 * u ** power * np.exp(-0.5 * r * r * rot2 - zr * r - log_scale)

    def tail(r):
        return r ** (-nu - 1.0) * np.exp(-0.5 * r * r * rot2 - zr * r - log_scale)

    h_res = gauss_kronrod(head, 0.0, math.sqrt(r_split), panels=4,
                          rtol=rtol, max_depth=max_depth)
    width = 1.0 / (4.0 * max(1.0, freq))
    n_panels = max(1, int(math.ceil((r_max - r_split) / width)))
    t_res = gauss_kronrod(tail, r_split, r_max, panels=n_panels,
                          rtol=rtol, max_depth=max_depth)
    mantissa = (h_res.value + t_res.value) * cmath.exp(-1j * phi * nu)
    error = h_res.error + t_res.error
    converged = h_res.converged and t_res.converged
    return mantissa, log_scale, error, converged


def scaled_pcfd(nu: float, z: complex, *, method: str = "auto",
                rtol: float = 1e-12, max_depth: int = 30) -> PCFDResult:
    """``exp(z**2/4) * D_nu(z)`` in overflow-safe mantissa/log form.

    ``method`` is ``"quadrature"``, ``"asymptotic"`` or ``"auto"``.  Auto uses
    quadrature inside the window ``|Im z| <= IMAG_WINDOW`` and falls back to
    the asymptotic series outside it.

    Raises
    ------
    ValueError
        If ``nu >= 0`` or ``z`` is not finite.
    PrecisionLossError
        If quadrature is requested outside the window, or the asymptotic
        series is requested where it does not apply.
    """
    z = _check(nu, z)
    if method == "auto":
        method = "quadrature" if abs(z.imag) <= IMAG_WINDOW else "asymptotic"
    if method == "quadrature":
        if abs(z.imag) > IMAG_WINDOW:
            raise PrecisionLossError(
                f"|Im z| = {abs(z.imag):g} exceeds the quadrature window {IMAG_WINDOW:g}")
        mant, log_scale, err, conv = _integral(nu, z, rtol, max_depth)
        log_gamma = math.lgamma(-nu)
        return PCFDResult(nu, z, mant, log_scale - log_gamma,
                          err / max(abs(mant), 1e-300), conv, "quadrature")
    if method == "asymptotic":
        if abs(z) <= ASYMPTOTIC_RADIUS or abs(cmath.phase(z)) >= 0.75 * math.pi:
            raise PrecisionLossError(
                f"asymptotic series not valid at z = {z}")
        series = _asymptotic_series(nu, z)
        return PCFDResult(nu, z, series, 0.0, abs(_next_term(nu, z)), True,
                          "asymptotic")
    raise ValueError(f"unknown method {method!r}")


def _asymptotic_series(nu, z):
    # z**nu * sum_{s<=2} (-1)^s (-nu)_{2s} / (s! (2 z^2)^s)
    w = 1.0 / (2.0 * z * z)
    t1 = -nu * (1.0 - nu) * w
    t2 = (-nu) * (1.0 - nu) * (2.0 - nu) * (3.0 - nu) * w * w / 2.0
    return cmath.exp(nu * cmath.log(z)) * (1.0 - t1 + t2)


def _next_term(nu, z):
    w = 1.0 / (2.0 * z * z)
    poch = 1.0
    for j in range(6):
        poch *= j - nu
    return poch * w ** 3 / 6.0


def parabolic_cylinder_D(nu: float, z: complex, *, method: str = "auto",
                         rtol: float = 1e-12, max_depth: int = 30) -> complex:
    """Parabolic cylinder function D_nu(z) for nu < 0.

    >>> round(parabolic_cylinder_D(-1.5, 0).real, 6)
    1.162737
    """
    return scaled_pcfd(nu, z, method=method, rtol=rtol, max_depth=max_depth).value


def pcfd_asymptotic(nu: float, z: complex) -> complex:
    """Leading large-|z| form exp(-z**2/4) z**nu (1 + O(z**-2)) to second order."""
    return scaled_pcfd(nu, z, method="asymptotic").value
