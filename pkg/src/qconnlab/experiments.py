"""The ten report-producing experiments behind the command line.

Every runner takes a resolved config mapping and returns an :class:`Outcome`:
a table for ``results.csv``, named tolerance checks, extra report fields and
an optional log-log plot.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import EXPERIMENTS
from .gauge import GaugeField
from .group import get_group, opnorm
from .groupoid import axiom_defects
from .holonomy import SmoothConnection, gauge_transform, holonomy
from .oprep import Grid, gauge_conjugate, random_kernel, trace
from .projlim import (
    Abs2,
    Add,
    Const,
    CylinderFunction,
    Mul,
    Real,
    Trace,
    Word,
    abs2_trace,
    consistency_check,
    const,
    density_experiment,
    re_trace,
)
from .qconn import (
    compatibility_check,
    exact_holonomy,
    fit_slope,
    gauge_act_hbar,
    glue_check,
    product_check,
    random_samples,
    trivial,
)
from .sdq import (
    CotangentTorus,
    Symbol,
    dirac_defect,
    embed_qconnection,
    gaussian_envelope,
    norm_continuity,
    random_symbol,
)
from .torus import lattice_system, triangulation_system

log = logging.getLogger(__name__)

EXPERIMENTS_COLUMNS = {k: v.columns for k, v in EXPERIMENTS.items()}


@dataclass
class Check:
    name: str
    invariant: str
    value: float
    tolerance: float
    sense: str = "max"  # "max": value <= tolerance; "min": value >= tolerance

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.tolerance if self.sense == "max" else self.value >= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "invariant": self.invariant,
            "value": self.value if math.isfinite(self.value) else None,
            "tolerance": self.tolerance,
            "sense": self.sense,
            "passed": self.passed,
        }


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    series: dict  # label -> (xs, ys)


@dataclass
class Outcome:
    columns: tuple
    rows: list
    checks: list
    details: dict = field(default_factory=dict)
    plot: Plot | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# tolerances, each tied to the invariant it tests

AXIOM_TOL = 1e-12
COMPOSITION_TOL = 1e-12
QUADRATURE_ORDER = 1.9
COVARIANCE_TOL = 1e-6
TRACE_TOL = 1e-12
EXACT_TOL = 1e-12
GLUE_ORDER = 1.9
DERIVATIVE_TOL = 1e-6
FD_ORDER = 1.9
DIRAC_EXACT_TOL = 1e-8
DIRAC_ORDER = 0.9
NORM_TOL = 0.05
MASS_TOL = 1e-10
EQUIVARIANCE_TOL = 1e-8
CONCENTRATION = 0.99


def _max_dist(group, a, b) -> float:
    return float(np.max(group.distance(a, b)))


# ---------------------------------------------------------------------------


def run_axioms(cfg: dict) -> Outcome:
    res = axiom_defects(cfg["group"], cfg["dimension"], cfg["samples"], cfg["seed"])
    rows, checks = [], []
    for variant, defs in res.items():
        for axiom, v in defs.items():
            rows.append([variant, axiom, v])
        checks.append(Check(f"{variant}_axioms", "groupoid_core.axioms", max(defs.values()), AXIOM_TOL))
    return Outcome(EXPERIMENTS_COLUMNS["axioms"], rows, checks, {"defects": res})


def run_holonomy_refine(cfg: dict) -> Outcome:
    """Parent-edge holonomy at ``2s`` steps against the ordered product of its
    children at ``s`` steps each (identical quadrature nodes), and the change
    between ``s`` and ``2s`` steps on the finest level."""
    group = get_group(cfg["group"])
    A = SmoothConnection.random(group, cfg["dimension"], cfg["band"], cfg["scale"], cfg["seed"])
    system = lattice_system(cfg["dimension"], cfg["levels"])
    rows, comp, dbl = [], [], []
    for s in cfg["steps"]:
        c = 0.0
        for lvl, refinement in enumerate(system.refinement):
            parent, child = system.graphs[lvl], system.graphs[lvl + 1]
            for e, kids in zip(parent.edges, refinement):
                prod = group.identity()
                for k in kids:
                    prod = prod @ holonomy(A, child.edges[k].curve, s).m
                c = max(c, _max_dist(group, holonomy(A, e.curve, len(kids) * s).m, prod))
        fine = system.graphs[-1].edges
        h1 = np.array([holonomy(A, e.curve, s).m for e in fine])
        h2 = np.array([holonomy(A, e.curve, 2 * s).m for e in fine])
        dd = _max_dist(group, h1, h2)
        comp.append(c)
        dbl.append(dd)
        rows.append([s, c, dd])
    steps = [float(s) for s in cfg["steps"]]
    order = -fit_slope(steps, dbl)
    checks = [
        Check("composition", "holonomy.refinement_composition", max(comp), COMPOSITION_TOL),
        Check("step_doubling_order", "holonomy.quadrature_order", order, QUADRATURE_ORDER, "min"),
    ]
    plot = Plot("step doubling", "steps", "defect", {"doubling": (steps, dbl)})
    return Outcome(EXPERIMENTS_COLUMNS["holonomy-refine"], rows, checks, {"doubling_order": order}, plot)


def _gauge_for(group, d: int, band: int, seed: int) -> GaugeField:
    g = GaugeField.random(group, d, band, 0.5, seed)
    if group.id == "U1":
        g = GaugeField.winding(d, [1] * d) * g
    return g


def run_gauge_check(cfg: dict) -> Outcome:
    group = get_group(cfg["group"])
    d, band, seed, S = cfg["dimension"], cfg["band"], cfg["seed"], cfg["samples"]
    A = SmoothConnection.random(group, d, band, 0.5, seed)
    g = _gauge_for(group, d, band, seed + 1)
    rows = []

    # holonomy covariance on the level-2 lattice edges
    Ag = gauge_transform(A, g)
    edges = lattice_system(d, 2).graphs[-1]
    verts = edges.vertex_array()
    gv = g(verts)
    cov = []
    for i, e in enumerate(edges.edges):
        lhs = holonomy(Ag, e.curve, cfg["steps"]).m
        rhs = gv[e.tail] @ holonomy(A, e.curve, cfg["steps"]).m @ gv[e.head].conj().T
        cov.append(float(opnorm(lhs - rhs)))
        rows.append(["holonomy_covariance", i, cov[-1]])

    # trace invariance of random kernels under random gauge fields
    grid = Grid(cfg["grid"], d)
    tr = []
    for i in range(S):
        K = random_kernel(grid, group.matrix_dim, seed + 10 + i)
        gi = _gauge_for(group, d, band, seed + 10 + S + i)
        tr.append(abs(trace(gauge_conjugate(K, gi)) - trace(K)))
        rows.append(["trace_invariance", i, tr[-1]])

    # compatibility of the hbar-level action with the connection action
    q = exact_holonomy(A)
    rep = compatibility_check(g, q, random_samples(d, S, seed + 2), seed=seed + 2)
    for h, v in zip(rep.steps, rep.defects):
        rows.append(["compatibility_fd", h, v])
    rows.append(["compatibility_richardson", 0, rep.richardson_defect])
    checks = [
        Check("holonomy_covariance", "holonomy.gauge_covariance", max(cov), COVARIANCE_TOL),
        Check("trace_invariance", "op_rep.trace_gauge_invariance", max(tr), TRACE_TOL),
    ]
    if group.id == "U1":
        checks.append(Check("compatibility", "qconn.gauge_compatibility", rep.richardson_defect, DERIVATIVE_TOL))
    else:
        checks.append(Check("compatibility_order", "qconn.gauge_compatibility", rep.fitted_order, FD_ORDER, "min"))
    plot = Plot("gauge compatibility", "step", "defect", {"central difference": (rep.steps, rep.defects)})
    return Outcome(EXPERIMENTS_COLUMNS["gauge-check"], rows, checks, {"compatibility": rep.to_dict()}, plot)


def run_glue_check(cfg: dict) -> Outcome:
    group = get_group(cfg["group"])
    d, seed = cfg["dimension"], cfg["seed"]
    kind = cfg["connection"]
    if kind == "trivial":
        q = trivial(group, d)
    elif kind == "constant":
        comps = np.random.default_rng(seed).standard_normal((d, group.dim))
        q = exact_holonomy(SmoothConnection.constant(group, d, comps), cfg["steps"])
    else:
        q = exact_holonomy(SmoothConnection.random(group, d, cfg["band"], 1.0, seed), cfg["steps"])
    rep = glue_check(q, random_samples(d, cfg["samples"], seed + 1), cfg["hbars"], seed + 1)
    rows = [list(r) for r in zip(rep.hbars, rep.gluing, rep.diagonal, rep.roundtrip)]
    checks = [
        Check("diagonal", "qconn.diagonal_identity", max(rep.diagonal), EXACT_TOL),
        Check("roundtrip", "qconn.inverse_symmetry", max(rep.roundtrip), EXACT_TOL),
    ]
    if kind in ("trivial", "constant"):
        checks.append(Check("gluing", "qconn.gluing_law_exact", rep.max_gluing, EXACT_TOL))
    else:
        checks.append(Check("gluing_order", "qconn.gluing_law_order", rep.gluing_slope, GLUE_ORDER, "min"))
    plot = Plot("gluing defect", "hbar", "defect", {"gluing": (rep.hbars, rep.gluing)})
    return Outcome(EXPERIMENTS_COLUMNS["glue-check"], rows, checks, {"glue": rep.to_dict()}, plot)


def run_product_check(cfg: dict) -> Outcome:
    group = get_group(cfg["group"])
    d, band, seed = cfg["dimension"], cfg["band"], cfg["seed"]
    q1 = exact_holonomy(SmoothConnection.random(group, d, band, 0.5, seed))
    q2 = exact_holonomy(SmoothConnection.random(group, d, band, 0.5, seed + 1))
    rep = product_check(q1, q2, random_samples(d, cfg["samples"], seed + 2), seed=seed + 2)
    rows = [list(r) for r in zip(rep.steps, rep.defects)] + [[0.0, rep.richardson_defect]]
    checks = [Check("richardson", "qconn.product_derivative", rep.richardson_defect, DERIVATIVE_TOL)]
    plot = Plot("product derivative", "step", "defect", {"central difference": (rep.steps, rep.defects)})
    return Outcome(EXPERIMENTS_COLUMNS["product-check"], rows, checks, {"product": rep.to_dict()}, plot)


def cylinder_suite(group, level: int) -> list[CylinderFunction]:
    """Six cylinder functions: a constant, characters and mixed words.

    The first two graph levels both carry at least two edges.  For SU(2)
    ``tr h`` is the spin-1/2 character and ``|tr h|^2 - 1`` the spin-1
    character; both integrate to zero.
    """
    group = get_group(group)
    h0 = Trace(Word(((0, 1),)))
    loop = Word(((0, 1), (1, -1)))
    return [
        const(level, group, 1.0),
        replace(re_trace(level, group, [(0, 1)]), name="chi_half"),
        CylinderFunction(level, Add((Abs2(h0), Const(-1.0))), group, "chi_one"),
        replace(abs2_trace(level, group, loop.letters), name="abs2_loop"),
        CylinderFunction(level, Mul((Real(Trace(loop)), Real(Trace(Word(((1, 1),)))))), group, "mixed_product"),
        replace(re_trace(level + 1, group, [(0, 1), (2, 1), (1, -1)], 0.5), name="fine_word"),
    ]


def run_measure_consistency(cfg: dict) -> Outcome:
    d, levels = cfg["dimension"], cfg["levels"]
    system = lattice_system(d, levels) if cfg["system"] == "lattice" else triangulation_system(levels)
    base = system.graphs[0].level
    rows, reports = [], []
    seeds = np.random.SeedSequence(cfg["seed"]).generate_state(6)
    for f, s in zip(cylinder_suite(cfg["group"], base), seeds):
        rep = consistency_check(f, system, cfg["samples"], int(s))
        reports.append(rep)
        rows.append([f.name, f.level, rep.coarse["mean_re"], rep.fine["mean_re"], rep.defect, rep.combined_stderr])
    # defect as a fraction of its allowance (three combined stderrs plus a round-off floor)
    worst = max(r.defect / r.allowance for r in reports)
    checks = [Check("allowance_fraction", "projlim.measure_consistency", float(worst), 1.0)]
    return Outcome(
        EXPERIMENTS_COLUMNS["measure-consistency"], rows, checks, {"reports": [r.to_dict() for r in reports]}
    )


def run_density(cfg: dict) -> Outcome:
    system = lattice_system(cfg["dimension"], cfg["level"])
    rep = density_experiment(
        system, cfg["level"], cfg["trials"], cfg["seed"], cfg["group"], cfg["threshold"], cfg["steps"]
    )
    rows = [[i, a, b] for i, (a, b) in enumerate(zip(rep.distances, rep.refined_distances))]
    checks = [Check("max_distance", "projlim.density", rep.max_distance, cfg["threshold"])]
    return Outcome(EXPERIMENTS_COLUMNS["density"], rows, checks, {"density": rep.to_dict()})


def dirac_pairs(d: int, band: int, count: int, seed: int):
    """Exact pairs (p-linear against x-only, bracket quantises exactly) and
    random band-limited pairs with a Gaussian momentum envelope."""
    base = CotangentTorus(d)
    cos1 = Symbol.x_mode(base, [1] + [0] * (d - 1), 0.5) + Symbol.x_mode(base, [-1] + [0] * (d - 1), 0.5)
    qb = [max(band, 1)] + [0] * (d - 1)
    sin_b = Symbol.x_mode(base, qb, -0.5j) + Symbol.x_mode(base, [-v for v in qb], 0.5j)
    p0 = Symbol.momentum(base, 0)
    exact = [
        ("p_cos", "exact", p0.with_name("p"), cos1.with_name("cos")),
        ("pcos_sin", "exact", (p0 + cos1).with_name("p+cos"), sin_b.with_name("sin")),
    ]
    generic = []
    for k in range(count):
        f = random_symbol(d, band, 2, 1.5, seed + 2 * k).with_name(f"f{k}")
        g = random_symbol(d, band, 2, 1.5, seed + 2 * k + 1).with_name(f"g{k}")
        generic.append((f"generic{k}", "generic", f, g))
    return exact + generic


def run_dirac_sweep(cfg: dict) -> Outcome:
    n, hbars = cfg["grid"], cfg["hbars"]
    rows, checks, series, reps = [], [], {}, {}
    exact_max = 0.0
    for label, kind, f, g in dirac_pairs(cfg["dimension"], cfg["band"], cfg["pairs"], cfg["seed"]):
        log.info("dirac pair %s", label)
        rep = dirac_defect(f, g, hbars, n, cfg["iters"], cfg["seed"])
        reps[label] = rep.to_dict()
        for h, v, a in zip(rep.hbars, rep.defects, rep.adjoint_defects):
            rows.append([label, kind, h, v, a])
        if kind == "exact":
            exact_max = max(exact_max, max(rep.defects))
        else:
            series[label] = (rep.hbars, rep.defects)
            checks.append(Check(f"{label}_slope", "sdq.dirac_condition_order", rep.fitted_slope, DIRAC_ORDER, "min"))
    checks.insert(0, Check("exact_pairs", "sdq.dirac_condition_exact", exact_max, DIRAC_EXACT_TOL))
    plot = Plot("Dirac-condition defect", "hbar", "defect", series)
    return Outcome(EXPERIMENTS_COLUMNS["dirac-sweep"], rows, checks, {"pairs": reps}, plot)


def norm_suite(d: int = 1) -> list[Symbol]:
    """Five fixed symbols: the unit, a plane wave, a momentum Gaussian, a
    modulated Gaussian and a gentle real mixture."""
    base = CotangentTorus(d)
    e = [1] + [0] * (d - 1)
    me = [-v for v in e]
    e2 = [2] + [0] * (d - 1)
    me2 = [-v for v in e2]
    G = gaussian_envelope(base, 1.5)
    cos1 = Symbol.x_mode(base, e, 0.5) + Symbol.x_mode(base, me, 0.5)
    sin2 = Symbol.x_mode(base, e2, -0.5j) + Symbol.x_mode(base, me2, 0.5j)
    mix = Symbol.constant(base, 0.6) + cos1 * 0.3 + sin2 * 0.1
    return [
        Symbol.constant(base, 1.0, "one"),
        Symbol.x_mode(base, e, 1.0, "plane_wave"),
        G.with_name("gaussian"),
        (cos1 * G).with_name("cos_gaussian"),
        (mix * G).with_name("mixture"),
    ]


def run_norm_continuity(cfg: dict) -> Outcome:
    n, hbars = cfg["grid"], cfg["hbars"]
    rows, checks, series, reps = [], [], {}, {}
    h_min = min(hbars)
    for f in norm_suite(cfg["dimension"]):
        log.info("norm continuity %s", f.name)
        rep = norm_continuity(f, hbars, n, cfg["iters"], cfg["seed"])
        reps[f.name] = rep.to_dict()
        for h, v, dv in zip(rep.hbars, rep.norms, rep.defects):
            rows.append([f.name, h, v, rep.sup_norm, dv])
        at_min = rep.defects[rep.hbars.index(h_min)]
        checks.append(Check(f"{f.name}_at_min_hbar", "sdq.norm_continuity", at_min, NORM_TOL))
        series[f.name] = (rep.hbars, [max(v, 1e-17) for v in rep.defects])
    plot = Plot("norm defect", "hbar", "| |Q f| - sup|f| |", series)
    return Outcome(EXPERIMENTS_COLUMNS["norm-continuity"], rows, checks, {"symbols": reps}, plot)


def _test_function(theta):
    return np.cos(theta) + 0.5 * np.sin(2 * theta) + 0.25 * np.cos(3 * theta + 0.3)


def run_embed_smear(cfg: dict) -> Outcome:
    group = get_group("U1")
    d, seed, hbar = cfg["dimension"], cfg["seed"], cfg["hbar"]
    grid = Grid(cfg["grid"], d)
    q = exact_holonomy(SmoothConnection.random(group, d, cfg["band"], 1.0, seed))
    g = _gauge_for(group, d, cfg["band"], seed + 1)
    F = embed_qconnection(q, hbar, grid, cfg["group_grid"], cfg["width"])
    Fg = embed_qconnection(gauge_act_hbar(g, q), hbar, grid, cfg["group_grid"], cfg["width"])

    mass = float(np.max(np.abs(F.mass() - 1.0)))
    phase = np.angle(g(grid.points)[:, 0, 0])
    shift = phase[:, None] - phase[None, :]  # g(x) h g(y)^-1 adds phi(x) - phi(y)
    theta = F.angles
    P = grid.size
    ix, iy = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    pulled = F.density(ix[..., None], iy[..., None], theta[None, None, :] - shift[..., None])
    pointwise = float(np.max(np.abs(Fg.values - pulled)))
    # Haar invariance: int F_g(h) psi(h) dh = int F(h) psi(g(x) h g(y)^-1) dh
    lhs = np.mean(Fg.values * _test_function(theta), axis=-1)
    rhs = np.mean(F.values * _test_function(theta[None, None, :] + shift[..., None]), axis=-1)
    integral = float(np.max(np.abs(lhs - rhs)))
    conc = F.concentration(3.0)
    rows = [["mass", mass], ["equivariance_pointwise", pointwise], ["equivariance_integral", integral], ["concentration", conc]]
    checks = [
        Check("mass", "sdq.embedding_normalisation", mass, MASS_TOL),
        Check("equivariance", "sdq.embedding_gauge_equivariance", max(pointwise, integral), EQUIVARIANCE_TOL),
        Check("concentration", "sdq.embedding_concentration", conc, CONCENTRATION, "min"),
    ]
    return Outcome(EXPERIMENTS_COLUMNS["embed-smear"], rows, checks)


RUNNERS = {
    "axioms": run_axioms,
    "holonomy-refine": run_holonomy_refine,
    "gauge-check": run_gauge_check,
    "glue-check": run_glue_check,
    "product-check": run_product_check,
    "measure-consistency": run_measure_consistency,
    "density": run_density,
    "dirac-sweep": run_dirac_sweep,
    "norm-continuity": run_norm_continuity,
    "embed-smear": run_embed_smear,
}


def run_experiment(cfg: dict) -> Outcome:
    return RUNNERS[cfg["experiment"]](cfg)

