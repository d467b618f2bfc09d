"""Cylinder functions on G^|E| over a graph system, Haar integration, and the
measure-consistency and density experiments.

A cylinder function is an expression tree.  Leaves are constants and edge
words ``h_{e1}^{s1} h_{e2}^{s2} ...`` (matrix valued); scalar nodes take the
trace or a matrix entry of a word and combine scalars with real part,
conjugation, modulus squared, sums and products.  Refinement substitutes each
edge by the ordered product of its children, matching the holonomy
composition rule ``Hol(parent) = Hol(child_1) Hol(child_2)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoRefinement
from .group import LieGroupSpec, dagger, get_group
from .holonomy import HolonomyAssignment, hol_graph, surjectivity_construct
from .torus import Graph, GraphSystem

# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True)
class Const:
    c: complex

    def value(self, env, S):
        return np.full(S, complex(self.c))

    def bound(self, N):
        return abs(self.c)


@dataclass(frozen=True)
class Word:
    """Ordered product of edge holonomies; ``letters`` are ``(edge, +1 or -1)``."""

    letters: tuple

    def matrix(self, env, S, N):
        out = np.broadcast_to(np.eye(N, dtype=complex), (S, N, N))
        for e, s in self.letters:
            m = env[e] if s > 0 else dagger(env[e])
            out = out @ m
        return out


@dataclass(frozen=True)
class Trace:
    word: Word

    def value(self, env, S):
        N = _fibre(env)
        return np.einsum("saa->s", self.word.matrix(env, S, N))

    def bound(self, N):
        return float(N)


@dataclass(frozen=True)
class Entry:
    word: Word
    a: int
    b: int

    def value(self, env, S):
        N = _fibre(env)
        return self.word.matrix(env, S, N)[:, self.a, self.b]

    def bound(self, N):
        return 1.0


@dataclass(frozen=True)
class Real:
    x: object

    def value(self, env, S):
        return self.x.value(env, S).real.astype(complex)

    def bound(self, N):
        return self.x.bound(N)


@dataclass(frozen=True)
class Conj:
    x: object

    def value(self, env, S):
        return np.conj(self.x.value(env, S))

    def bound(self, N):
        return self.x.bound(N)


@dataclass(frozen=True)
class Abs2:
    x: object

    def value(self, env, S):
        return (np.abs(self.x.value(env, S)) ** 2).astype(complex)

    def bound(self, N):
        return self.x.bound(N) ** 2


@dataclass(frozen=True)
class Add:
    terms: tuple

    def value(self, env, S):
        return sum((t.value(env, S) for t in self.terms), np.zeros(S, dtype=complex))

    def bound(self, N):
        return sum(t.bound(N) for t in self.terms)


@dataclass(frozen=True)
class Mul:
    factors: tuple

    def value(self, env, S):
        out = np.ones(S, dtype=complex)
        for f in self.factors:
            out = out * f.value(env, S)
        return out

    def bound(self, N):
        b = 1.0
        for f in self.factors:
            b *= f.bound(N)
        return b


def _fibre(env) -> int:
    for m in env.values():
        return m.shape[-1]
    return 1


def _children(node):
    if isinstance(node, (Trace, Entry)):
        return (node.word,)
    if isinstance(node, (Real, Conj, Abs2)):
        return (node.x,)
    if isinstance(node, Add):
        return node.terms
    if isinstance(node, Mul):
        return node.factors
    return ()


def _slots(node) -> set:
    if isinstance(node, Word):
        return {e for e, _ in node.letters}
    out = set()
    for c in _children(node):
        out |= _slots(c)
    return out


def _substitute(node, rows):
    if isinstance(node, Word):
        letters = []
        for e, s in node.letters:
            kids = [(c, 1) for c in rows[e]]
            letters.extend(kids if s > 0 else [(c, -1) for c, _ in reversed(kids)])
        return Word(tuple(letters))
    if isinstance(node, Trace):
        return Trace(_substitute(node.word, rows))
    if isinstance(node, Entry):
        return Entry(_substitute(node.word, rows), node.a, node.b)
    if isinstance(node, (Real, Conj, Abs2)):
        return type(node)(_substitute(node.x, rows))
    if isinstance(node, Add):
        return Add(tuple(_substitute(t, rows) for t in node.terms))
    if isinstance(node, Mul):
        return Mul(tuple(_substitute(t, rows) for t in node.factors))
    return node


def node_to_dict(node) -> dict:
    if isinstance(node, Const):
        return {"op": "const", "re": complex(node.c).real, "im": complex(node.c).imag}
    if isinstance(node, Word):
        return {"op": "word", "letters": [[int(e), int(s)] for e, s in node.letters]}
    if isinstance(node, Trace):
        return {"op": "trace", "word": node_to_dict(node.word)}
    if isinstance(node, Entry):
        return {"op": "entry", "word": node_to_dict(node.word), "a": node.a, "b": node.b}
    if isinstance(node, (Real, Conj, Abs2)):
        return {"op": type(node).__name__.lower(), "x": node_to_dict(node.x)}
    if isinstance(node, Add):
        return {"op": "add", "terms": [node_to_dict(t) for t in node.terms]}
    if isinstance(node, Mul):
        return {"op": "mul", "factors": [node_to_dict(t) for t in node.factors]}
    raise TypeError(f"unknown node {node!r}")


def node_from_dict(d: dict):
    op = d["op"]
    if op == "const":
        return Const(complex(d["re"], d["im"]))
    if op == "word":
        return Word(tuple((int(e), int(s)) for e, s in d["letters"]))
    if op == "trace":
        return Trace(node_from_dict(d["word"]))
    if op == "entry":
        return Entry(node_from_dict(d["word"]), int(d["a"]), int(d["b"]))
    if op in ("real", "conj", "abs2"):
        return {"real": Real, "conj": Conj, "abs2": Abs2}[op](node_from_dict(d["x"]))
    if op == "add":
        return Add(tuple(node_from_dict(t) for t in d["terms"]))
    if op == "mul":
        return Mul(tuple(node_from_dict(t) for t in d["factors"]))
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# cylinder functions


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    level: int
    expr: object
    group: LieGroupSpec
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "group", get_group(self.group))
        if isinstance(self.expr, Word):
            raise TypeError("a cylinder function is scalar; wrap words in Trace or Entry")

    @property
    def slots(self) -> list[int]:
        return sorted(_slots(self.expr))

    def bound(self) -> float:
        return float(self.expr.bound(self.group.matrix_dim))

    def __call__(self, values) -> np.ndarray:
        """Evaluate on edge values ``(E, N, N)`` or a batch ``(S, E, N, N)``."""
        v = np.asarray(values, dtype=complex)
        single = v.ndim == 3
        if single:
            v = v[None]
        env = {e: v[:, e] for e in self.slots}
        out = self.expr.value(env, v.shape[0])
        return out[0] if single else out

    def evaluate_slots(self, env: dict, S: int) -> np.ndarray:
        return self.expr.value(env, S)

    def __mul__(self, other: "CylinderFunction") -> "CylinderFunction":
        _same_level(self, other)
        return CylinderFunction(self.level, Mul((self.expr, other.expr)), self.group)

    def __add__(self, other: "CylinderFunction") -> "CylinderFunction":
        _same_level(self, other)
        return CylinderFunction(self.level, Add((self.expr, other.expr)), self.group)

    def to_dict(self) -> dict:
        return {"name": self.name, "level": self.level, "group": self.group.id, "expr": node_to_dict(self.expr)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CylinderFunction":
        return cls(int(d["level"]), node_from_dict(d["expr"]), d["group"], d.get("name", ""))


def _same_level(a: CylinderFunction, b: CylinderFunction):
    if a.level != b.level or a.group != b.group:
        raise ValueError("cylinder functions at different levels or over different groups")


def const(level: int, group, c: complex) -> CylinderFunction:
    return CylinderFunction(level, Const(c), group, "const")


def re_trace(level: int, group, letters, scale: float = 1.0) -> CylinderFunction:
    letters = tuple((int(e), int(s)) for e, s in letters)
    return CylinderFunction(level, Mul((Const(scale), Real(Trace(Word(letters))))), group, "re_trace")


def abs2_trace(level: int, group, letters, scale: float = 1.0) -> CylinderFunction:
    letters = tuple((int(e), int(s)) for e, s in letters)
    return CylinderFunction(level, Mul((Const(scale), Abs2(Trace(Word(letters))))), group, "abs2_trace")


def _level_index(system: GraphSystem, level: int) -> int:
    # levels are named by refinement depth (lattice level n has 2**n vertices per side)
    for i, g in enumerate(system.graphs):
        if g.level == level:
            return i
    raise NoRefinement(f"system has no graph at level {level}")


def _graph_at(system: GraphSystem, level: int) -> Graph:
    return system.graphs[_level_index(system, level)]


def pullback(f: CylinderFunction, system: GraphSystem) -> CylinderFunction:
    """Express ``f`` on the next level by substituting children products."""
    idx = _level_index(system, f.level)
    if idx >= len(system.refinement):
        raise NoRefinement(f"no refinement data below level {f.level}")
    rows = system.refinement[idx]
    return CylinderFunction(f.level + 1, _substitute(f.expr, rows), f.group, f.name)


def compose_assignment(values: np.ndarray, rows) -> np.ndarray:
    """Parent edge values from child values along the refinement map."""
    out = []
    for kids in rows:
        m = values[kids[0]]
        for c in kids[1:]:
            m = m @ values[c]
        out.append(m)
    return np.array(out)


def gauge_act_assignment(values: np.ndarray, graph: Graph, vertex_values: np.ndarray) -> np.ndarray:
    """``h_e -> g(tail) h_e g(head)^-1``."""
    tails = np.array([e.tail for e in graph.edges])
    heads = np.array([e.head for e in graph.edges])
    g = np.asarray(vertex_values)
    return g[..., tails, :, :] @ values @ dagger(g[..., heads, :, :])


# ---------------------------------------------------------------------------
# Monte-Carlo integration


@dataclass
class Estimate:
    mean: complex
    stderr: float
    samples: int

    def to_dict(self) -> dict:
        return {"mean_re": self.mean.real, "mean_im": self.mean.imag, "stderr": self.stderr, "samples": self.samples}


def haar_integrate(f: CylinderFunction, samples: int, seed: int, chunk: int = 20000) -> Estimate:
    """Product-Haar Monte Carlo over the slots ``f`` depends on."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    slots = f.slots
    total = 0j
    sq = 0.0
    vals = []
    for lo in range(0, samples, chunk):
        S = min(chunk, samples - lo)
        env = {e: f.group.haar(rng, S) for e in slots}
        vals.append(f.evaluate_slots(env, S))
    v = np.concatenate(vals)
    total = v.mean()
    sq = np.var(v.real, ddof=1) + np.var(v.imag, ddof=1)
    return Estimate(complex(total), float(np.sqrt(sq / samples)), samples)


@dataclass
class ConsistencyReport:
    name: str
    level: int
    coarse: dict
    fine: dict
    defect: float
    combined_stderr: float
    allowance: float
    passed: bool
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


# functions constant on the group (|h|^2 for U(1)) have zero variance; their
# sample means still differ by rounding
ROUNDOFF_FLOOR = 1e-12


def consistency_check(f: CylinderFunction, system: GraphSystem, samples: int, seed: int) -> ConsistencyReport:
    """Compare the integrals of ``f`` and of its pullback, with independent streams.

    Passes when the difference is within three combined standard errors
    plus :data:`ROUNDOFF_FLOOR`.
    """
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    a = haar_integrate(f, samples, int(s1.generate_state(1)[0]))
    b = haar_integrate(pullback(f, system), samples, int(s2.generate_state(1)[0]))
    defect = abs(a.mean - b.mean)
    comb = float(np.hypot(a.stderr, b.stderr))
    allowance = 3 * comb + ROUNDOFF_FLOOR
    return ConsistencyReport(
        f.name, f.level, a.to_dict(), b.to_dict(), float(defect), comb, allowance, bool(defect <= allowance), seed
    )


# ---------------------------------------------------------------------------
# density experiment


@dataclass
class DensityReport:
    group: str
    d: int
    level: int
    trials: int
    distances: list
    refined_distances: list
    threshold: float
    passed: bool
    seed: int

    @property
    def max_distance(self) -> float:
        return max(self.distances)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["max_distance"] = self.max_distance
        return out




def density_experiment(
    system: GraphSystem,
    level: int,
    trials: int,
    seed: int,
    group="U1",
    threshold: float = 1e-4,
    steps: int = 1024,
    identity_targets: bool = False,
) -> DensityReport:
    """Hit random targets on a lattice level with smooth connections.

    ``distances`` are measured with the construction's quadrature; the
    ``refined_distances`` recheck each hit with twice as many steps.
    """
    group = get_group(group)
    graph = _graph_at(system, level)
    E = len(graph.edges)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    dist, refined = [], []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        vals = group.identity((E,)) if identity_targets else group.haar(rng, E)
        targets = HolonomyAssignment(graph, vals, group)
        A = surjectivity_construct(graph, targets, steps=steps)
        dist.append(float(np.max(group.distance(hol_graph(A, graph, steps).values, vals))))
        refined.append(float(np.max(group.distance(hol_graph(A, graph, 2 * steps).values, vals))))
    return DensityReport(
        group.id, graph.d, level, trials, dist, refined, threshold, bool(max(dist) <= threshold), seed
    )
