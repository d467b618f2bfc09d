"""Concrete Lie groupoids over the torus and the tangent-groupoid gluing.

Variants: the pair groupoid ``M x M``, the tangent bundle ``TM`` (fibrewise
addition), a matrix group ``G`` over a point, and the product ``M x M x G``.
``compose(a, b)`` requires ``range(a) == source(b)``; for the pair groupoid
``(x, y) o (y, z) = (x, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import HbarOutOfRange, NotComposable, VariantMismatch
from .fields import grid_points
from .group import GroupElement, _reunitarize, dagger, get_group
from .torus import POINT_TOL, TangentVector, TorusPoint, geodesic_exp, shortest_displacement


@dataclass(frozen=True, eq=False)
class Pair:
    x: TorusPoint
    y: TorusPoint


@dataclass(frozen=True, eq=False)
class Tangent:
    v: TangentVector


@dataclass(frozen=True, eq=False)
class Group:
    g: GroupElement


@dataclass(frozen=True, eq=False)
class Product:
    pair: Pair
    g: GroupElement


GroupoidElement = Union[Pair, Tangent, Group, Product]

# the unit space of a group groupoid is a single point
POINT = None


def source(a: GroupoidElement):
    if isinstance(a, Pair):
        return a.x
    if isinstance(a, Tangent):
        return a.v.base
    if isinstance(a, Group):
        return POINT
    return a.pair.x


def range_(a: GroupoidElement):
    if isinstance(a, Pair):
        return a.y
    if isinstance(a, Tangent):
        return a.v.base
    if isinstance(a, Group):
        return POINT
    return a.pair.y


def _same_unit(p, q, tol) -> bool:
    if p is POINT or q is POINT:
        return p is q
    return p.close_to(q, tol)


def compose(a: GroupoidElement, b: GroupoidElement, tol: float = POINT_TOL) -> GroupoidElement:
    if type(a) is not type(b):
        raise VariantMismatch(f"cannot compose {type(a).__name__} with {type(b).__name__}")
    if not _same_unit(range_(a), source(b), tol):
        raise NotComposable("range of the first element differs from source of the second")
    if isinstance(a, Pair):
        return Pair(a.x, b.y)
    if isinstance(a, Tangent):
        return Tangent(TangentVector(a.v.base, a.v.v + b.v.v))
    if isinstance(a, Group):
        return Group(a.g @ b.g)
    return Product(Pair(a.pair.x, b.pair.y), a.g @ b.g)


def inverse(a: GroupoidElement) -> GroupoidElement:
    if isinstance(a, Pair):
        return Pair(a.y, a.x)
    if isinstance(a, Tangent):
        return Tangent(TangentVector(a.v.base, -a.v.v))
    if isinstance(a, Group):
        return Group(a.g.inverse())
    return Product(Pair(a.pair.y, a.pair.x), a.g.inverse())


def identity_like(a: GroupoidElement, at=None) -> GroupoidElement:
    """Unit of ``a``'s groupoid at ``at`` (default: the source of ``a``)."""
    x = source(a) if at is None else at
    if isinstance(a, Pair):
        return Pair(x, x)
    if isinstance(a, Tangent):
        return Tangent(TangentVector(x, np.zeros(x.d)))
    eye = GroupElement(a.g.group, np.eye(a.g.group.matrix_dim))
    if isinstance(a, Group):
        return Group(eye)
    return Product(Pair(x, x), eye)


def element_distance(a: GroupoidElement, b: GroupoidElement) -> float:
    """Max-norm discrepancy between two elements of the same variant."""
    if type(a) is not type(b):
        raise VariantMismatch("elements of different groupoids")
    if isinstance(a, Pair):
        return max(_pt(a.x, b.x), _pt(a.y, b.y))
    if isinstance(a, Tangent):
        return max(_pt(a.v.base, b.v.base), float(np.max(np.abs(a.v.v - b.v.v))))
    if isinstance(a, Group):
        return float(np.max(np.abs(a.g.m - b.g.m)))
    return max(element_distance(a.pair, b.pair), float(np.max(np.abs(a.g.m - b.g.m))))


def _pt(p: TorusPoint, q: TorusPoint) -> float:
    return float(np.max(np.abs(shortest_displacement(p.coords, q.coords))))


# ---------------------------------------------------------------------------
# tangent groupoid of M


@dataclass(frozen=True, eq=False)
class AtZero:
    v: TangentVector


@dataclass(frozen=True, eq=False)
class AtHbar:
    x: TorusPoint
    y: TorusPoint
    hbar: float

    def __post_init__(self):
        if not 0.0 < self.hbar <= 1.0:
            raise HbarOutOfRange(f"hbar must lie in (0, 1], got {self.hbar}")


TangentGroupoidPoint = Union[AtZero, AtHbar]


def glue(p: AtZero, hbar: float) -> AtHbar:
    """Follow the point ``(x, V, 0)`` out to ``(x, exp(hbar V), hbar)``."""
    if not isinstance(p, AtZero):
        raise TypeError("glue starts from a point of the zero fibre")
    if not 0.0 < hbar <= 1.0:
        raise HbarOutOfRange(f"hbar must lie in (0, 1], got {hbar}")
    x = p.v.base
    return AtHbar(x, geodesic_exp(x, p.v, hbar), hbar)


@dataclass(frozen=True, eq=False)
class HaarSystem:
    """Uniform counting measure on an ``n**d`` grid, total mass 1."""

    grid_points: np.ndarray
    weight: float

    @classmethod
    def uniform(cls, n: int, d: int) -> "HaarSystem":
        pts = grid_points(n, d)
        return cls(pts, 1.0 / len(pts))

    def integrate(self, values) -> np.ndarray:
        return self.weight * np.sum(values, axis=0)


# ---------------------------------------------------------------------------
# batched axiom checks
#
# Arrays mirror the typed variants: Pair -> (x, y), Tangent -> (base, v),
# Group -> (g,), Product -> (x, y, g); the composition rules are the same.

VARIANTS = ("pair", "tangent", "group", "product")


def _mul(group, a, b):
    return _reunitarize(group, a @ b)


def _batch_compose(kind, group, a, b, tol=POINT_TOL):
    if kind == "group":
        return (_mul(group, a[0], b[0]),)
    gap = np.max(np.abs(shortest_displacement(a[1] if kind != "tangent" else a[0], b[0])))
    if gap > tol:
        raise NotComposable(f"range/source mismatch {gap:.3g}")
    if kind == "pair":
        return (a[0], b[1])
    if kind == "tangent":
        return (a[0], a[1] + b[1])
    return (a[0], b[1], _mul(group, a[2], b[2]))


def _batch_inverse(kind, a):
    if kind == "pair":
        return (a[1], a[0])
    if kind == "tangent":
        return (a[0], -a[1])
    if kind == "group":
        return (dagger(a[0]),)
    return (a[1], a[0], dagger(a[2]))


def _batch_unit(kind, group, x, n):
    eye = group.identity((n,))
    if kind == "pair":
        return (x, x)
    if kind == "tangent":
        return (x, np.zeros_like(x))
    if kind == "group":
        return (eye,)
    return (x, x, eye)


_POINT_SLOTS = {"pair": (0, 1), "tangent": (0,), "group": (), "product": (0, 1)}


def _batch_distance(kind, a, b) -> float:
    out = 0.0
    for i, (u, v) in enumerate(zip(a, b)):
        diff = shortest_displacement(u, v) if i in _POINT_SLOTS[kind] else u - v
        out = max(out, float(np.max(np.abs(diff))))
    return out


def random_composable(kind, group, d, n, rng):
    """Three arrays of composable elements ``a, b, c`` (range(a) = source(b), ...)."""
    pts = [rng.uniform(0, 1, (n, d)) for _ in range(4)]
    hs = [group.haar(rng, n) for _ in range(3)]
    if kind == "pair":
        return [(pts[i], pts[i + 1]) for i in range(3)]
    if kind == "tangent":
        return [(pts[0], rng.normal(size=(n, d))) for _ in range(3)]
    if kind == "group":
        return [(h,) for h in hs]
    return [(pts[i], pts[i + 1], hs[i]) for i in range(3)]


def axiom_defects(group, d: int, n: int, seed: int = 0) -> dict:
    """Max defects of associativity, units and inverses per variant on ``n`` random tuples."""
    group = get_group(group)
    rng = np.random.default_rng(seed)
    out = {}
    for kind in VARIANTS:
        a, b, c = random_composable(kind, group, d, n, rng)
        comp = lambda u, v: _batch_compose(kind, group, u, v)  # noqa: E731
        src = a[0]
        rng_a = a[1] if kind in ("pair", "product") else a[0]
        assoc = _batch_distance(kind, comp(comp(a, b), c), comp(a, comp(b, c)))
        left = _batch_distance(kind, comp(_batch_unit(kind, group, src, n), a), a)
        right = _batch_distance(kind, comp(a, _batch_unit(kind, group, rng_a, n)), a)
        inv = _batch_inverse(kind, a)
        inv_l = _batch_distance(kind, comp(a, inv), _batch_unit(kind, group, src, n))
        inv_r = _batch_distance(kind, comp(inv, a), _batch_unit(kind, group, rng_a, n))
        out[kind] = {
            "associativity": assoc,
            "identity": max(left, right),
            "inverse": max(inv_l, inv_r),
        }
    return out
