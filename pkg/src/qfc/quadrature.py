"""Vectorised adaptive Gauss-Kronrod (G7/K15) quadrature for complex integrands.

The integrand is evaluated on whole batches of panels at once, so ``f`` must
accept a numpy array of abscissae and return an array of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# QUADPACK qk15 abscissae (positive half, descending) and weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point node set on [-1, 1] and matching weight rows
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:14:2] = _WG[2::-1]


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    n_panels: int
    converged: bool


class QuadratureError(ArithmeticError):
    """Raised when the adaptive budget is exhausted before reaching tolerance."""


def _rule(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = np.asarray(f(x))
    k = half * (y @ _KW)
    g = half * (y @ _GW)
    resabs = np.abs(half) * (np.abs(y) @ _KW)
    return k, np.abs(k - g), resabs


def gauss_kronrod(f, a, b, *, panels=1, rtol=1e-10, atol=0.0, max_depth=40,
                  max_panels=2_000_000):
    """Integrate ``f`` over ``[a, b]``.

    The interval is first cut into ``panels`` equal pieces.  While the summed
    Kronrod-Gauss error estimate exceeds the tolerance, every panel carrying
    more than its equal share of the tolerance is bisected.  A panel is never
    split more than ``max_depth`` times; ``converged`` is False when that
    depth or the total panel budget ran out first.

    The tolerance is ``max(atol, rtol*|I|, 50*eps*integral(|f|))``, so
    integrals that cancel to below double-precision resolution of the
    integrand stop at the rounding floor instead of refining forever.
    """
    a = float(a)
    b = float(b)
    if b == a:
        return QuadResult(0.0, 0.0, 0, True)
    edges = np.linspace(a, b, int(panels) + 1)
    lo, hi = edges[:-1], edges[1:]
    depth = np.zeros(lo.size, dtype=int)
    k, err, resabs = _rule(f, lo, hi)
    n_used = lo.size
    eps = np.finfo(float).eps
    while True:
        total = k.sum()
        tol = max(atol, rtol * abs(total), 50.0 * eps * resabs.sum())
        if err.sum() <= tol:
            return QuadResult(complex(total), float(err.sum()), n_used, True)
        split = (err > tol / err.size) & (depth < max_depth)
        if not split.any() or n_used > max_panels:
            return QuadResult(complex(total), float(err.sum()), n_used, False)
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_depth = np.concatenate([depth[split], depth[split]]) + 1
        nk, nerr, nabs = _rule(f, new_lo, new_hi)
        n_used += new_lo.size
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        depth = np.concatenate([depth[keep], new_depth])
        k = np.concatenate([k[keep], nk])
        err = np.concatenate([err[keep], nerr])
        resabs = np.concatenate([resabs[keep], nabs])
