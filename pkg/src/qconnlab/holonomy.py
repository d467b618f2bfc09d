"""Band-limited connections on T^d and their holonomies.

Ordering convention: the transport along a curve solves ``U' = U A(gamma) gamma'``,
so the midpoint product places earlier parameter values on the left,

    Hol(gamma) = exp(dt A(t_1)) exp(dt A(t_2)) ... exp(dt A(t_n)),

and holonomies compose as ``Hol(first then second) = Hol(first) Hol(second)``.
With this ordering the gauge action ``A -> g A g^-1 + g d(g^-1)`` transforms
holonomies as ``Hol -> g(tail) Hol g(head)^-1``, which is the two-point rule
used for q-connections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ive

from .errors import BandOverflow, BaseMismatch, GroupMismatch, UnsupportedGraph
from .fields import BandField, fit_band_field, grid_points, mode_range
from .gauge import GaugeField
from .group import AlgebraElement, GroupElement, LieGroupSpec, dagger, get_group, opnorm, ordered_product
from .torus import Geodesic, Graph, TangentVector, TorusPoint, Sampled

DEFAULT_STEPS = 256


@dataclass(frozen=True, eq=False)
class SmoothConnection:
    """``A_mu(x) = sum_j field[mu, j](x) * basis_j``."""

    group: LieGroupSpec
    field: BandField

    def __post_init__(self):
        object.__setattr__(self, "group", get_group(self.group))
        if self.field.comp_shape != (self.field.d, self.group.dim):
            raise ValueError("connection field must have components (d, dim g)")

    @property
    def d(self) -> int:
        return self.field.d

    @property
    def band(self) -> int:
        return self.field.band

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, group, d: int) -> "SmoothConnection":
        group = get_group(group)
        return cls(group, BandField.zeros((d, group.dim), d, 0))

    @classmethod
    def constant(cls, group, d: int, components) -> "SmoothConnection":
        """Constant connection; ``components[mu, j]`` in algebra coordinates."""
        group = get_group(group)
        c = np.asarray(components, dtype=float).reshape(d, group.dim)
        return cls(group, BandField(d, 0, c.reshape((d, group.dim) + (1,) * d).astype(complex)))

    @classmethod
    def random(cls, group, d: int, band: int = 1, scale: float = 1.0, seed: int = 0) -> "SmoothConnection":
        group = get_group(group)
        rng = np.random.default_rng(seed)
        shape = (d, group.dim) + (2 * band + 1,) * d
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return cls(group, BandField(d, band, scale * c / np.sqrt(c[0, 0].size)))

    def __add__(self, other: "SmoothConnection") -> "SmoothConnection":
        if other.group != self.group or other.d != self.d:
            raise GroupMismatch("cannot add connections over different groups or bases")
        return SmoothConnection(self.group, self.field + other.field)

    # -- evaluation ---------------------------------------------------------
    def matrices(self, points) -> np.ndarray:
        """``A_mu(x)`` as matrices, shape ``(P, d, N, N)``."""
        return self.group.from_components(self.field(points))

    def pair(self, points, vectors) -> np.ndarray:
        """``sum_mu A_mu(x) V^mu`` for arrays of points and vectors."""
        comps = self.field(points)  # (P, d, dim)
        v = np.asarray(vectors, dtype=float).reshape(-1, self.d)
        return self.group.from_components(np.einsum("pmj,pm->pj", comps, v))

    def evaluate(self, x: TorusPoint, V: TangentVector) -> AlgebraElement:
        if not V.base.close_to(x):
            raise BaseMismatch("tangent vector is not based at x")
        return AlgebraElement(self.group, self.pair(x.coords[None], V.v[None])[0])

    def to_dict(self) -> dict:
        return {"group": self.group.id, "dimension": self.d, "band": self.band, "coefficients": self.field.to_list()}

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothConnection":
        group = get_group(d["group"])
        return cls(group, BandField.from_list(int(d["dimension"]), int(d["band"]), d["coefficients"]))


@dataclass(frozen=True, eq=False)
class HolonomyAssignment:
    graph: Graph
    values: np.ndarray  # (|edges|, N, N)
    group: LieGroupSpec

    def __post_init__(self):
        if len(self.values) != len(self.graph.edges):
            raise ValueError("one holonomy value per edge required")

    def __getitem__(self, e: int) -> GroupElement:
        return GroupElement(self.group, self.values[e])

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {
            "group": self.group.id,
            "values": {str(e): [[[z.real, z.imag] for z in row] for row in m] for e, m in enumerate(self.values)},
        }

    @classmethod
    def from_dict(cls, graph: Graph, d: dict) -> "HolonomyAssignment":
        group = get_group(d["group"])
        vals = np.array(
            [[[complex(*z) for z in row] for row in d["values"][str(e)]] for e in range(len(graph.edges))]
        )
        return cls(graph, vals, group)


# ---------------------------------------------------------------------------
# transport


def _transport(group: LieGroupSpec, increments: np.ndarray) -> np.ndarray:
    """Ordered product of ``exp`` of increments along axis 1: ``(C, n, N, N) -> (C, N, N)``."""
    if group.id == "U1":
        return np.exp(increments.sum(axis=1))
    return ordered_product(group.exp(increments), axis=1)


def _midpoints(steps: int) -> np.ndarray:
    return (np.arange(steps) + 0.5) / steps


def geodesic_holonomies(A: SmoothConnection, starts, displacements, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Holonomies along the affine curves ``start + t * disp``, shape ``(C, N, N)``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    starts = np.asarray(starts, dtype=float).reshape(-1, A.d)
    disps = np.asarray(displacements, dtype=float).reshape(-1, A.d)
    C = starts.shape[0]
    t = _midpoints(steps)
    out = np.empty((C, A.group.matrix_dim, A.group.matrix_dim), dtype=complex)
    chunk = max(1, 2**20 // (steps * max(1, (2 * A.band + 1) ** (A.d - 1))))
    for lo in range(0, C, chunk):
        s, dsp = starts[lo : lo + chunk], disps[lo : lo + chunk]
        pts = s[:, None, :] + t[None, :, None] * dsp[:, None, :]
        comps = A.field(pts.reshape(-1, A.d)).reshape(len(s), steps, A.d, A.group.dim)
        inc = np.einsum("csmj,cm->csj", comps, dsp) / steps
        out[lo : lo + chunk] = _transport(A.group, A.group.from_components(inc))
    return out


def _axis_holonomy(A: SmoothConnection, start, axis: int, length: float, steps: int) -> np.ndarray:
    """Fast path for a geodesic parallel to a coordinate axis."""
    b = A.field.restrict_axis(start, axis)[axis]  # (dim, M)
    k = mode_range(A.band)
    t = _midpoints(steps) * length
    vals = (b @ np.exp(2j * np.pi * np.outer(k, t))).real.T  # (steps, dim)
    inc = A.group.from_components(vals * (length / steps))
    return _transport(A.group, inc[None])[0]


def _curve_holonomy(A: SmoothConnection, curve, steps: int) -> np.ndarray:
    if isinstance(curve, Geodesic):
        nz = np.flatnonzero(curve.displacement)
        if nz.size == 0:
            return A.group.identity()
        if nz.size == 1:
            return _axis_holonomy(A, curve.start, int(nz[0]), float(curve.displacement[nz[0]]), steps)
        return geodesic_holonomies(A, curve.start, curve.displacement, steps)[0]
    if isinstance(curve, Sampled):
        t = _midpoints(steps)
        comps = A.field(curve.position(t))
        inc = np.einsum("smj,sm->sj", comps, curve.velocity(t)) / steps
        return _transport(A.group, A.group.from_components(inc)[None])[0]
    raise TypeError(f"unsupported curve type {type(curve).__name__}")


def holonomy(A: SmoothConnection, gamma, steps: int = DEFAULT_STEPS) -> GroupElement:
    """Midpoint-rule path-ordered exponential of ``A`` along ``gamma``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return GroupElement(A.group, _curve_holonomy(A, gamma, steps))


def hol_graph(A: SmoothConnection, gamma: Graph, steps: int = DEFAULT_STEPS) -> HolonomyAssignment:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    vals = np.array([_curve_holonomy(A, e.curve, steps) for e in gamma.edges])
    return HolonomyAssignment(gamma, vals, A.group)


# ---------------------------------------------------------------------------
# gauge transformation


def _gauge_transformed_components(A: SmoothConnection, g: GaugeField, pts, a_comps, grid=None):
    if grid is None:
        gv, dg = g.with_derivative(pts)
    else:
        gv, dg = g.on_grid(grid, pts)
    ginv = dagger(gv)
    a = A.group.from_components(a_comps)  # (P, d, N, N)
    new = gv[:, None] @ a @ ginv[:, None] - dg @ ginv[:, None]
    return A.group.components(new)


def gauge_transform(
    A: SmoothConnection,
    g: GaugeField,
    band: int | None = None,
    tol: float = 1e-8,
    return_residual: bool = False,
):
    """``A_mu -> g A_mu g^-1 + g d_mu(g^-1)``, refitted to a Fourier band.

    With ``band=None`` the band is grown until the refit residual (measured on
    a half-cell-shifted grid) reaches round-off, then trimmed to the smallest
    band that keeps it.  Raises :class:`BandOverflow` if the residual exceeds
    ``tol``.
    """
    if g.group != A.group or g.d != A.d:
        raise GroupMismatch("gauge field and connection disagree on group or base")
    d = A.d
    candidates = [band] if band is not None else [b for b in (8, 16, 32, 64, 96) if b >= A.band] or [A.band]
    if d == 1 and band is None:
        candidates += [128, 256]
    best = None
    for K in candidates:
        n = 2 * K + 1
        pts = grid_points(n, d)
        vals = _gauge_transformed_components(A, g, pts, A.field.on_grid(n), grid=n)
        fitted = fit_band_field(vals, n, d, K)
        shifted = grid_points(n, d, 0.5)
        exact = _gauge_transformed_components(A, g, shifted, A.field.on_grid(n, 0.5))
        resid = float(np.max(np.abs(fitted.on_grid(n, 0.5) - exact)))
        best = (fitted, resid)
        if resid <= 1e-12:
            break
    fitted, resid = best
    if resid > tol:
        raise BandOverflow(f"gauge-transformed connection not resolved: residual {resid:.3g} > {tol:g}")
    fitted = _trim(fitted, max(resid, 1e-14))
    out = SmoothConnection(A.group, fitted)
    return (out, resid) if return_residual else out


def _trim(f: BandField, budget: float) -> BandField:
    """Smallest band whose discarded coefficients sum to at most ``budget``."""
    K = f.band
    mag = np.abs(f.coeffs).reshape(-1, *f.coeffs.shape[-f.d :]).sum(0)
    for k in range(K):
        inner = mag[(slice(K - k, K + k + 1),) * f.d].sum()
        if mag.sum() - inner <= budget:
            sl = (Ellipsis,) + (slice(K - k, K + k + 1),) * f.d
            return BandField(f.d, k, f.coeffs[sl])
    return f


# ---------------------------------------------------------------------------
# surjectivity of Hol_Gamma on lattice graphs


def _lattice_layout(gamma: Graph):
    d = gamma.d
    L = int(round(len(gamma.vertices) ** (1.0 / d)))
    if L < 2 or L**d != len(gamma.vertices):
        raise UnsupportedGraph("vertex count is not that of a square lattice")
    h = 1.0 / L
    seen = set()
    layout = []
    for k, e in enumerate(gamma.edges):
        c = e.curve
        if not isinstance(c, Geodesic):
            raise UnsupportedGraph(f"edge {k} is not a geodesic segment")
        nz = np.flatnonzero(np.abs(c.displacement) > 1e-12)
        if nz.size != 1 or abs(c.displacement[nz[0]] - h) > 1e-12:
            raise UnsupportedGraph(f"edge {k} is not a positive lattice step")
        idx = np.round(c.start * L)
        if np.max(np.abs(c.start * L - idx)) > 1e-9:
            raise UnsupportedGraph(f"edge {k} does not start on a lattice vertex")
        key = (tuple((idx % L).astype(int)), int(nz[0]))
        if key in seen:
            raise UnsupportedGraph(f"edge {k} overlaps another edge")
        seen.add(key)
        layout.append((int(nz[0]), np.mod(idx, L) * h))
    return L, h, layout


def _bump_profile(L: int) -> np.ndarray:
    """Fourier ratios ``I_k(kappa)/I_0(kappa)`` of a von Mises bump of width h/8."""
    kappa = (4.0 * L / np.pi) ** 2
    r = [1.0]
    while r[-1] > 1e-17:
        k = len(r)
        r.append(ive(k, kappa) / ive(0, kappa))
    return np.array(r[:-1])


def _bump_connection(group, d, L, h, layout, X) -> SmoothConnection:
    r = _bump_profile(L)
    Kb = len(r) - 1
    K = max(Kb, L // 2)
    k = mode_range(K)
    ratio = np.zeros(2 * K + 1)
    ratio[np.abs(k) <= Kb] = r[np.abs(k[np.abs(k) <= Kb])]
    trans = np.where(np.abs(k) < L / 2, 1.0 / L, np.where(np.abs(k) == L / 2, 0.5 / L, 0.0))
    coeffs = np.zeros((d, group.dim) + (2 * K + 1,) * d, dtype=complex)
    for mu in range(d):
        sel = [i for i, (m, _) in enumerate(layout) if m == mu]
        if not sel:
            continue
        starts = np.array([layout[i][1] for i in sel])
        centre = starts[:, mu] + h / 2
        along = ratio[None, :] * np.exp(-2j * np.pi * np.outer(centre, k))
        Xs = X[sel]
        if d == 1:
            coeffs[mu] = Xs.T @ along
        else:
            nu = 1 - mu
            across = trans[None, :] * np.exp(-2j * np.pi * np.outer(starts[:, nu], k))
            spec = "ej,ea,eb->jab" if mu == 0 else "ej,ea,eb->jba"
            coeffs[mu] = np.einsum(spec, Xs, along, across)
    return SmoothConnection(group, BandField(d, K, coeffs))


def surjectivity_construct(
    gamma: Graph,
    targets: HolonomyAssignment,
    steps: int = 1024,
    max_iter: int = 20,
    tol: float = 1e-12,
) -> SmoothConnection:
    """Build a connection whose edge holonomies on a lattice graph hit ``targets``.

    Each edge carries a bump 1-form: a von Mises profile along the edge times
    a trigonometric interpolant across it that vanishes on every other
    parallel lattice line.  The profiles are entire in Fourier space and are
    truncated below 1e-17, so the field is band-limited.  Leakage of each
    bump onto neighbouring edges is removed by fixed-point correction of the
    edge generators, measured with the same ``steps`` used for checking.
    """
    group = targets.group
    L, h, layout = _lattice_layout(gamma)
    target_logs = group.components(group.log(targets.values, strict=False))
    X = target_logs.copy()
    A = _bump_connection(group, gamma.d, L, h, layout, X)
    for _ in range(max_iter):
        H = hol_graph(A, gamma, steps).values
        if np.max(opnorm(H - targets.values)) <= tol:
            break
        if group.id == "U1":
            delta = np.angle(targets.values[:, 0, 0] / H[:, 0, 0])[:, None]
        else:
            delta = target_logs - group.components(group.log(H, strict=False))
        X = X + delta
        A = _bump_connection(group, gamma.d, L, h, layout, X)
    return A
