"""Minkowski geometry and causal ordering of intervention regions.

Metric signature is mostly plus.  Regions are closed: balls are Euclidean
balls in (t, x) coordinates, slabs are ``t0 <= t <= t1`` over all of space.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

#: relative tolerance for null-boundary decisions
TOL_GEOM = 1e-12


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", x)
        if len(x) < 1:
            raise ValueError("spatial dimension must be at least 1")
        if not all(math.isfinite(v) for v in (self.t, *x)):
            raise ValueError("coordinates must be finite")

    @classmethod
    def of(cls, t: float, *x: float) -> "SpacetimePoint":
        return cls(t, tuple(x))

    @property
    def d(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array((self.t, *self.x))

    def __add__(self, other: "SpacetimePoint") -> "SpacetimePoint":
        _same_dim(self.d, other.d)
        return SpacetimePoint(self.t + other.t,
                              tuple(a + b for a, b in zip(self.x, other.x)))

    def __sub__(self, other: "SpacetimePoint") -> "SpacetimePoint":
        _same_dim(self.d, other.d)
        return SpacetimePoint(self.t - other.t,
                              tuple(a - b for a, b in zip(self.x, other.x)))

    def scaled(self, a: float) -> "SpacetimePoint":
        return SpacetimePoint(a * self.t, tuple(a * v for v in self.x))


class Interval(enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


def _same_dim(d1, d2):
    if d1 != d2:
        raise ValueError(f"dimension mismatch: {d1} vs {d2}")


def classify_interval(X: SpacetimePoint, Y: SpacetimePoint,
                      tol: float = TOL_GEOM) -> tuple[Interval, int]:
    """Classify the separation of ``Y`` from ``X``.

    Returns the interval type and the sign of ``Y.t - X.t`` (-1, 0 or 1).
    """
    _same_dim(X.d, Y.d)
    dt = Y.t - X.t
    dx2 = sum((b - a) ** 2 for a, b in zip(X.x, Y.x))
    dt2 = dt * dt
    if abs(dt2 - dx2) <= tol * max(1.0, dt2 + dx2):
        kind = Interval.NULL
    elif dx2 > dt2:
        kind = Interval.SPACELIKE
    else:
        kind = Interval.TIMELIKE
    return kind, int(np.sign(dt))


def minkowski_dot(a: SpacetimePoint, b: SpacetimePoint) -> float:
    """Mostly-plus inner product ``-a.t b.t + a.x . b.x``."""
    _same_dim(a.d, b.d)
    return -a.t * b.t + sum(p * q for p, q in zip(a.x, b.x))


# --------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    center: SpacetimePoint
    radius: float
    label: str = ""

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def d(self) -> int:
        return self.center.d


@dataclass(frozen=True)
class PointLike:
    center: SpacetimePoint
    label: str = ""

    @property
    def d(self) -> int:
        return self.center.d

    radius = 0.0


@dataclass(frozen=True)
class Slab:
    t0: float
    t1: float
    d: int
    label: str = ""

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ValueError("slab needs t0 < t1")
        if self.d < 1:
            raise ValueError("spatial dimension must be at least 1")


Region = Union[Ball, PointLike, Slab]


def _t_range(r: Region) -> tuple[float, float]:
    if isinstance(r, Slab):
        return r.t0, r.t1
    return r.center.t - r.radius, r.center.t + r.radius


def _cone_distance(pt: float, rho: float) -> float:
    """Euclidean distance from (pt, |x| = rho) to the past cone of the origin.

    Negative values are the (inward) distance to the cone boundary for points
    inside the cone, so ``_cone_distance(pt, rho) <= -R`` means a ball of
    radius R sits entirely inside.
    """
    if pt > rho:
        return math.hypot(pt, rho)  # nearest point is the apex
    return (pt + rho) / math.sqrt(2.0)


def _relative(a: Region, b: Region) -> tuple[float, float, float]:
    """Offset of centre ``a`` from centre ``b``: (dt, |dx|, combined radius)."""
    dt = a.center.t - b.center.t
    rho = math.dist(a.center.x, b.center.x)
    return dt, rho, a.radius + b.radius


def _slack(*vals: float) -> float:
    return TOL_GEOM * max(1.0, *(abs(v) for v in vals))


def region_precedes(A: Region, B: Region) -> bool:
    """True iff some point of ``A`` lies in the causal past of some point of ``B``."""
    _same_dim(A.d, B.d)
    if isinstance(A, Slab) or isinstance(B, Slab):
        # slabs are spatially unbounded: only the time ranges matter
        a_lo, _ = _t_range(A)
        _, b_hi = _t_range(B)
        return a_lo <= b_hi + _slack(a_lo, b_hi)
    # A - B is a Euclidean ball around cA - cB; it must meet J^-(0)
    dt, rho, radius = _relative(A, B)
    return _cone_distance(dt, rho) <= radius + _slack(dt, rho, radius)


def fully_precedes(A: Region, B: Region) -> bool:
    """True iff every point of ``A`` lies in the causal past of every point of ``B``."""
    _same_dim(A.d, B.d)
    if isinstance(A, Slab) or isinstance(B, Slab):
        return False
    dt, rho, radius = _relative(A, B)
    return _cone_distance(dt, rho) <= -radius + _slack(dt, rho, radius)


def spacelike_separated(A: Region, B: Region) -> bool:
    """No point of either region is causally related to a point of the other."""
    return not region_precedes(A, B) and not region_precedes(B, A)


# --------------------------------------------------------------------------
# ordering


@dataclass
class CausalOrderResult:
    relation: np.ndarray
    acyclic: bool
    linear_extension: tuple[int, ...] | None
    raw: np.ndarray = field(repr=False, default=None)


def precedence_matrix(regions: Sequence[Region]) -> np.ndarray:
    if not regions:
        raise ValueError("need at least one region")
    d = regions[0].d
    for r in regions:
        _same_dim(d, r.d)
    n = len(regions)
    rel = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for k in range(n):
            rel[j, k] = region_precedes(regions[j], regions[k])
    return rel


def transitive_closure(rel: np.ndarray) -> np.ndarray:
    """Warshall's algorithm on a boolean adjacency matrix."""
    out = np.array(rel, dtype=bool, copy=True)
    for m in range(out.shape[0]):
        out |= np.outer(out[:, m], out[m, :])
    return out


def stable_topological_sort(rel: np.ndarray) -> tuple[int, ...] | None:
    """Kahn's algorithm, always emitting the smallest available index."""
    n = rel.shape[0]
    edges = rel & ~np.eye(n, dtype=bool)
    indeg = edges.sum(axis=0)
    ready = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        j = heapq.heappop(ready)
        order.append(j)
        for k in np.flatnonzero(edges[j]):
            indeg[k] -= 1
            if indeg[k] == 0:
                heapq.heappush(ready, int(k))
    return tuple(order) if len(order) == n else None


def causal_order(regions: Sequence[Region]) -> CausalOrderResult:
    raw = precedence_matrix(regions)
    rel = transitive_closure(raw)
    n = rel.shape[0]
    mutual = rel & rel.T & ~np.eye(n, dtype=bool)
    acyclic = not mutual.any()
    ext = stable_topological_sort(rel) if acyclic else None
    return CausalOrderResult(rel, acyclic, ext, raw)


class Rule(enum.Enum):
    PARTIAL_ORDER_BEFORE_CLOSURE = "partial-order-before-closure"
    PAIRWISE_SPACELIKE_OR_FULLY_ORDERED = "pairwise-spacelike-or-fully-ordered"


@dataclass(frozen=True)
class RestrictionVerdict:
    rule: Rule
    passed: bool
    offending: tuple[int, int] | None = None
    reason: str = ""


def validate_restriction(regions: Sequence[Region], rule: Rule) -> RestrictionVerdict:
    """Check one of the two stricter admissibility rules for a labelled region list.

    Labels are list positions.  The first rule asks that the raw precedence
    relation already be a partial order (antisymmetric and transitive)
    before any closure is taken; the second that each pair ``j < k`` be
    either entirely spacelike or have all of ``O_j`` in the causal past of
    all of ``O_k``.
    """
    rule = Rule(rule)
    raw = precedence_matrix(regions)
    n = raw.shape[0]
    if rule is Rule.PARTIAL_ORDER_BEFORE_CLOSURE:
        for j in range(n):
            for k in range(j + 1, n):
                if raw[j, k] and raw[k, j]:
                    return RestrictionVerdict(rule, False, (j, k), "not antisymmetric")
        for j in range(n):
            for m in range(n):
                if not raw[j, m]:
                    continue
                for k in range(n):
                    if raw[m, k] and not raw[j, k]:
                        return RestrictionVerdict(
                            rule, False, (j, k),
                            f"not transitive: {j} precedes {m} precedes {k}")
        return RestrictionVerdict(rule, True)
    for j in range(n):
        for k in range(j + 1, n):
            A, B = regions[j], regions[k]
            if spacelike_separated(A, B) or fully_precedes(A, B):
                continue
            return RestrictionVerdict(rule, False, (j, k),
                                      "neither spacelike nor fully ordered")
    return RestrictionVerdict(rule, True)


# --------------------------------------------------------------------------
# JSON


def region_from_dict(doc: dict, d: int) -> Region:
    """Build a region from ``{"kind": "ball"|"slab"|"point", ...}``.

    Centres are ``[t, x1, ..., xd]`` lists.
    """
    kind = doc.get("kind")
    label = str(doc.get("label", ""))
    if kind in ("ball", "point"):
        c = [float(v) for v in doc["center"]]
        if len(c) != d + 1:
            raise ValueError(f"centre {c} does not have {d} spatial coordinates")
        center = SpacetimePoint(c[0], tuple(c[1:]))
        if kind == "ball":
            return Ball(center, float(doc["radius"]), label)
        return PointLike(center, label)
    if kind == "slab":
        return Slab(float(doc["t0"]), float(doc["t1"]), d, label)
    raise ValueError(f"unknown region kind {kind!r}")


def regions_from_json(doc: dict) -> list[Region]:
    d = int(doc["d"])
    if d < 1:
        raise ValueError("d must be positive")
    regions = [region_from_dict(r, d) for r in doc["regions"]]
    if not regions:
        raise ValueError("need at least one region")
    return regions
