"""The flat unit torus T^d (d = 1, 2): points, tangent vectors, curves, graphs.

Coordinates live in [0, 1).  Curves are stored as *lifts* to R^d so that a
geodesic that wraps around the torus is unambiguous.  Two refinement systems
of embedded graphs are provided: dyadic axis-aligned lattices and repeated
barycentric subdivision of a fixed triangulation of T^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import BaseMismatch, NotInvertible

POINT_TOL = 1e-12


def wrap(c) -> np.ndarray:
    """Reduce coordinates into [0, 1)."""
    c = np.mod(np.asarray(c, dtype=float), 1.0)
    return np.where(c >= 1.0, 0.0, c)


def shortest_displacement(x, y) -> np.ndarray:
    """Displacement from x to y in (-1/2, 1/2]; antipodal ties take +1/2."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    d = d - np.floor(d + 0.5)
    d = np.where(d <= -0.5, d + 1.0, d)
    return d


def torus_distance(x, y) -> np.ndarray:
    return np.linalg.norm(shortest_displacement(x, y), axis=-1)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorusPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if c.ndim != 1 or c.size not in (1, 2) or not np.all(np.isfinite(c)):
            raise ValueError(f"torus point needs 1 or 2 finite coordinates, got {self.coords!r}")
        object.__setattr__(self, "coords", _readonly(wrap(c)))

    @property
    def d(self) -> int:
        return self.coords.size

    def close_to(self, other: "TorusPoint", tol: float = POINT_TOL) -> bool:
        return other.d == self.d and float(torus_distance(self.coords, other.coords)) <= tol

    def __repr__(self):
        return f"TorusPoint({self.coords.tolist()})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: TorusPoint
    v: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if v.shape != (self.base.d,) or not np.all(np.isfinite(v)):
            raise ValueError("tangent vector dimension must match its base point")
        object.__setattr__(self, "v", _readonly(v))

    def __repr__(self):
        return f"TangentVector({self.base.coords.tolist()}, {self.v.tolist()})"


def geodesic_exp(x: TorusPoint, V: TangentVector, t: float) -> TorusPoint:
    """Flat-metric exponential: ``x + t V`` reduced mod 1."""
    if not V.base.close_to(x):
        raise BaseMismatch("tangent vector is not based at x")
    return TorusPoint(x.coords + t * V.v)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Affine curve ``t -> start + t * displacement`` for t in [0, 1]."""

    start: np.ndarray
    displacement: np.ndarray
    kind: str = field(default="geodesic", init=False)

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.start, dtype=float))
        d = np.atleast_1d(np.asarray(self.displacement, dtype=float))
        if s.shape != d.shape:
            raise ValueError("start and displacement dimensions differ")
        object.__setattr__(self, "start", _readonly(s))
        object.__setattr__(self, "displacement", _readonly(d))

    @property
    def d(self) -> int:
        return self.start.size

    def position(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return self.start + t * self.displacement

    def velocity(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.displacement, t.shape + (self.d,))

    @property
    def end(self) -> np.ndarray:
        return self.start + self.displacement

    def reversed(self) -> "Geodesic":
        return Geodesic(self.end, -self.displacement)


@dataclass(frozen=True, eq=False)
class Sampled:
    """Polyline through lifted points, parametrised uniformly per segment."""

    points: np.ndarray
    kind: str = field(default="sampled", init=False)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape[0] < 2:
            raise ValueError("sampled curve needs at least two points")
        gaps = np.diff(p, axis=0)
        unwrapped = gaps - np.round(gaps)
        if np.any(np.abs(unwrapped) >= 0.5):
            raise ValueError("consecutive sample gaps must be < 0.5 per coordinate")
        lift = np.concatenate([p[:1], p[:1] + np.cumsum(unwrapped, axis=0)], axis=0)
        object.__setattr__(self, "points", _readonly(lift))

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def _segment(self, t):
        m = self.points.shape[0] - 1
        s = np.clip(np.asarray(t, dtype=float) * m, 0.0, m)
        j = np.minimum(np.floor(s).astype(int), m - 1)
        return j, s - j, m

    def position(self, t) -> np.ndarray:
        j, frac, _ = self._segment(t)
        p0, p1 = self.points[j], self.points[j + 1]
        return p0 + frac[..., None] * (p1 - p0)

    def velocity(self, t) -> np.ndarray:
        j, _, m = self._segment(t)
        return m * (self.points[j + 1] - self.points[j])

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def displacement(self) -> np.ndarray:
        return self.end - self.start

    def reversed(self) -> "Sampled":
        return Sampled(self.points[::-1])


Curve = Union[Geodesic, Sampled]


def curve_to_dict(c: Curve) -> dict:
    if isinstance(c, Geodesic):
        return {"kind": "geodesic", "start": c.start.tolist(), "displacement": c.displacement.tolist()}
    return {"kind": "sampled", "points": c.points.tolist()}


def curve_from_dict(d: dict) -> Curve:
    if d["kind"] == "geodesic":
        return Geodesic(d["start"], d["displacement"])
    if d["kind"] == "sampled":
        return Sampled(d["points"])
    raise ValueError(f"unknown curve kind {d['kind']!r}")


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    curve: Curve


@dataclass(frozen=True, eq=False)
class Graph:
    vertices: tuple[TorusPoint, ...]
    edges: tuple[Edge, ...]
    level: int = 1

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        for k, e in enumerate(self.edges):
            tail, head = self.vertices[e.tail].coords, self.vertices[e.head].coords
            if torus_distance(wrap(e.curve.start), tail) > POINT_TOL or torus_distance(
                wrap(e.curve.end), head
            ) > POINT_TOL:
                raise ValueError(f"edge {k} curve does not join its tail and head vertices")

    @property
    def d(self) -> int:
        return self.vertices[0].d

    def __len__(self) -> int:
        return len(self.edges)

    def vertex_array(self) -> np.ndarray:
        return np.array([v.coords for v in self.vertices])

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "dimension": self.d,
            "vertices": [v.coords.tolist() for v in self.vertices],
            "edges": [[e.tail, e.head, curve_to_dict(e.curve)] for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        verts = [TorusPoint(c) for c in d["vertices"]]
        edges = [Edge(int(t), int(h), curve_from_dict(c)) for t, h, c in d["edges"]]
        return cls(verts, edges, int(d.get("level", 1)))


@dataclass(frozen=True, eq=False)
class GraphSystem:
    """Graphs ``graphs[0], graphs[1], ...`` with ``refinement[n][e]`` listing the
    level-(n+1) edges whose concatenation, in order, is edge ``e`` of level n."""

    graphs: tuple[Graph, ...]
    refinement: tuple[tuple[tuple[int, ...], ...], ...]
    kind: str = "custom"
    cell_counts: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(
            self, "refinement", tuple(tuple(tuple(c) for c in r) for r in self.refinement)
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "graphs": [g.to_dict() for g in self.graphs],
            "refinement": [[list(c) for c in r] for r in self.refinement],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSystem":
        return cls(
            [Graph.from_dict(g) for g in d["graphs"]],
            [[tuple(c) for c in r] for r in d["refinement"]],
            d.get("kind", "custom"),
        )


def _lattice_graph(d: int, n: int) -> Graph:
    L = 2**n
    idx = np.array(np.unravel_index(np.arange(L**d), (L,) * d)).T
    verts = [TorusPoint(i / L) for i in idx]
    edges = []
    for vi, i in enumerate(idx):
        for mu in range(d):
            j = i.copy()
            j[mu] = (j[mu] + 1) % L
            head = int(np.ravel_multi_index(j, (L,) * d))
            disp = np.zeros(d)
            disp[mu] = 1.0 / L
            edges.append(Edge(vi, head, Geodesic(i / L, disp)))
    return Graph(verts, edges, level=n)


def lattice_system(d: int, levels: int) -> GraphSystem:
    """Dyadic lattices: level n has 2**n vertices per side, edges along +axes.

    Edge ``v * d + mu`` leaves vertex ``v`` in direction ``mu``.
    """
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    graphs = [_lattice_graph(d, n) for n in range(1, levels + 1)]
    refinement = []
    for n in range(1, levels):
        L, Lf = 2**n, 2 ** (n + 1)
        rows = []
        for e in range(len(graphs[n - 1].edges)):
            v, mu = divmod(e, d)
            i = np.array(np.unravel_index(v, (L,) * d))
            w = 2 * i
            w2 = w.copy()
            w2[mu] += 1
            a = int(np.ravel_multi_index(w, (Lf,) * d)) * d + mu
            b = int(np.ravel_multi_index(w2 % Lf, (Lf,) * d)) * d + mu
            rows.append((a, b))
        refinement.append(rows)
    return GraphSystem(graphs, refinement, kind="lattice")


class _MeshBuilder:
    def __init__(self):
        self.coords: list[np.ndarray] = []
        self.vkey: dict = {}
        self.edges: list[tuple[int, int, np.ndarray, np.ndarray]] = []
        self.ekey: dict = {}

    @staticmethod
    def _key(c):
        return tuple(int(round(x * 1e9)) % 10**9 for x in wrap(c))

    def vertex(self, c) -> int:
        k = self._key(c)
        if k not in self.vkey:
            self.vkey[k] = len(self.coords)
            self.coords.append(wrap(c))
        return self.vkey[k]

    def _ekey(self, a, b, disp):
        return (a, b) + tuple(int(round(x * 1e9)) for x in disp)

    def find(self, p, q):
        a, b = self.vertex(p), self.vertex(q)
        return self.ekey.get(self._ekey(a, b, np.asarray(q) - np.asarray(p)))

    def edge(self, p, q, oriented: bool = False) -> int:
        """Register the segment p -> q (lifted).  Unless ``oriented``, the tail is
        the endpoint whose reduced coordinates are lexicographically smaller."""
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        found = self.find(p, q)
        if found is not None:
            return found
        a, b = self.vertex(p), self.vertex(q)
        if not oriented and tuple(self.coords[b]) < tuple(self.coords[a]):
            p, q, a, b = q, p, b, a
        k = len(self.edges)
        self.edges.append((a, b, p, q - p))
        self.ekey[self._ekey(a, b, q - p)] = k
        self.ekey[self._ekey(b, a, p - q)] = k
        return k

    def graph(self, level: int) -> Graph:
        verts = [TorusPoint(c) for c in self.coords]
        edges = [Edge(a, b, Geodesic(s, dsp)) for a, b, s, dsp in self.edges]
        return Graph(verts, edges, level=level)


def triangulation_system(levels: int) -> GraphSystem:
    """Barycentric refinement of the 8-triangle triangulation of T^2.

    Level 1 splits each cell of a 2x2 square grid along its main diagonal.
    Split edges keep their parent's orientation; new edges are oriented
    lexicographically by vertex coordinates.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    mb = _MeshBuilder()
    tris = []
    counts = []
    for i in range(2):
        for j in range(2):
            p00 = np.array([i, j]) / 2.0
            p10, p01, p11 = p00 + [0.5, 0], p00 + [0, 0.5], p00 + [0.5, 0.5]
            tris += [(p00, p10, p11), (p00, p11, p01)]
    for t in tris:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            mb.edge(t[a], t[b])
    graphs = [mb.graph(1)]
    counts.append(len(tris))
    refinement = []
    for level in range(2, levels + 1):
        old = mb
        mb = _MeshBuilder()
        for c in old.coords:
            mb.vertex(c)
        rows = []
        for a, b, s, dsp in old.edges:
            m = s + dsp / 2
            rows.append((mb.edge(s, m, oriented=True), mb.edge(m, s + dsp, oriented=True)))
        new_tris = []
        for p0, p1, p2 in tris:
            bc = (p0 + p1 + p2) / 3
            corners = (p0, p1, p2)
            for a in range(3):
                pa, pb = corners[a], corners[(a + 1) % 3]
                mid = (pa + pb) / 2
                mb.edge(bc, pa)
                mb.edge(bc, mid)
                new_tris += [(pa, mid, bc), (mid, pb, bc)]
        tris = new_tris
        counts.append(len(tris))
        graphs.append(mb.graph(level))
        refinement.append(rows)
    return GraphSystem(graphs, refinement, kind="triangulation", cell_counts=tuple(counts))


# ---------------------------------------------------------------------------
# diffeomorphisms


@dataclass(frozen=True, eq=False)
class Translation:
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", _readonly(np.atleast_1d(self.offset)))

    @property
    def d(self) -> int:
        return self.offset.size

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.offset

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.d), x.shape[:-1] + (self.d, self.d))

    def check(self):
        return None


@dataclass(frozen=True, eq=False)
class Shear:
    """``x -> x + eps * s(x)`` with ``s(x) = sum_j amp_j * sin(2 pi k_j . x + phase_j)``."""

    eps: float
    wavevectors: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray = None

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
        a = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        ph = np.zeros(k.shape[0]) if self.phases is None else np.asarray(self.phases, dtype=float)
        if k.shape != a.shape or ph.shape != (k.shape[0],):
            raise ValueError("wavevectors, amplitudes, phases must align")
        if not np.allclose(k, np.round(k)):
            raise ValueError("wavevectors must be integer for periodicity")
        object.__setattr__(self, "wavevectors", _readonly(k))
        object.__setattr__(self, "amplitudes", _readonly(a))
        object.__setattr__(self, "phases", _readonly(ph))

    @property
    def d(self) -> int:
        return self.wavevectors.shape[1]

    def _arg(self, x):
        return 2 * np.pi * np.asarray(x, dtype=float) @ self.wavevectors.T + self.phases

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.eps * np.sin(self._arg(x)) @ self.amplitudes

    def jacobian(self, x) -> np.ndarray:
        c = np.cos(self._arg(x))
        ds = 2 * np.pi * np.einsum("...j,ja,jb->...ab", c, self.amplitudes, self.wavevectors)
        return np.eye(self.d) + self.eps * ds

    def check(self, n: int = 64):
        g = (np.stack(np.meshgrid(*[np.arange(n) / n] * self.d, indexing="ij"), -1)).reshape(-1, self.d)
        c = np.cos(self._arg(g))
        ds = 2 * np.pi * np.einsum("...j,ja,jb->...ab", c, self.amplitudes, self.wavevectors)
        bound = np.max(np.linalg.norm(self.eps * ds, ord=2, axis=(-2, -1)))
        if bound >= 1:
            raise NotInvertible(f"shear derivative bound {bound:.3g} >= 1")


Diffeo = Union[Translation, Shear]


def identity_diffeo(d: int) -> Translation:
    return Translation(np.zeros(d))


def apply_diffeo(sigma: Diffeo, p, samples: int = 64):
    """Push a point, tangent vector or curve forward along ``sigma``.

    Tangent vectors map to ``(sigma(x), dsigma_x V)``.  Geodesics stay
    geodesics under translations; otherwise a curve becomes a Sampled
    polyline through ``samples + 1`` mapped points.
    """
    sigma.check()
    if isinstance(p, TorusPoint):
        return TorusPoint(sigma(p.coords))
    if isinstance(p, TangentVector):
        x = p.base.coords
        return TangentVector(TorusPoint(sigma(x)), sigma.jacobian(x) @ p.v)
    if isinstance(p, Geodesic) and isinstance(sigma, Translation):
        return Geodesic(sigma(p.start), p.displacement)
    if isinstance(p, Sampled):
        return Sampled(sigma(p.points))
    if isinstance(p, Geodesic):
        t = np.linspace(0.0, 1.0, samples + 1)
        return Sampled(sigma(p.position(t)))
    raise TypeError(f"cannot apply a diffeomorphism to {type(p).__name__}")
