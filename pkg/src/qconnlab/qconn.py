"""q-connections: pairs ``(A_0, hbar -> A_hbar)`` over the tangent groupoid of T^d.

A family is a rule ``(xs, ys, hbar) -> (P, N, N)`` evaluated lazily, so checks
can probe arbitrary ``(x, V, hbar)``.  The gluing law asks that
``A_hbar(x, x + hbar V)`` leave the identity with velocity ``A_0(x, V)``.

Derivatives in hbar are taken through ``F(h) = A_|h|(x, x + h V)``, which is
smooth through ``h = 0`` for the families built here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import BandOverflow, GroupMismatch, HbarOutOfRange
from .fields import fit_band_field, grid_points
from .gauge import GaugeField
from .group import dagger, opnorm
from .holonomy import DEFAULT_STEPS, SmoothConnection, gauge_transform, geodesic_holonomies
from .torus import Diffeo, TangentVector, TorusPoint, Translation, shortest_displacement, wrap

FamilyRule = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

EXACT_HOLONOMY = "ExactHolonomy"
CUSTOM = "Custom"

# central-difference stencil for hbar-derivatives at 0
FD_STEPS = (1e-2, 5e-3, 2.5e-3)

# defects below this are treated as exact zeros when fitting slopes
SLOPE_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class QConnection:
    a0: SmoothConnection
    family: FamilyRule
    family_kind: str = CUSTOM

    @property
    def group(self):
        return self.a0.group

    @property
    def d(self) -> int:
        return self.a0.d

    def __call__(self, xs, ys, hbar: float) -> np.ndarray:
        """``A_hbar(x, y)`` for rows of ``xs`` and ``ys``; shape ``(P, N, N)``."""
        if not 0.0 < hbar <= 1.0:
            raise HbarOutOfRange(f"hbar must lie in (0, 1], got {hbar}")
        xs = np.asarray(xs, dtype=float).reshape(-1, self.d)
        ys = np.asarray(ys, dtype=float).reshape(-1, self.d)
        return self.family(xs, ys, hbar)

    def at(self, x: TorusPoint, y: TorusPoint, hbar: float) -> np.ndarray:
        return self(x.coords, y.coords, hbar)[0]

    def a0_pair(self, xs, vs) -> np.ndarray:
        return self.a0.pair(xs, vs)


def exact_holonomy(a0: SmoothConnection, steps: int = DEFAULT_STEPS) -> QConnection:
    """Embed a connection: ``A_hbar(x, y)`` is its holonomy along the shortest geodesic."""

    def rule(xs, ys, hbar):
        return geodesic_holonomies(a0, xs, shortest_displacement(xs, ys), steps)

    return QConnection(a0, rule, EXACT_HOLONOMY)


def custom(a0: SmoothConnection, rule: FamilyRule) -> QConnection:
    return QConnection(a0, rule, CUSTOM)


def trivial(group, d: int) -> QConnection:
    return exact_holonomy(SmoothConnection.zero(group, d), steps=1)


# ---------------------------------------------------------------------------
# samples and fitting


def random_samples(d: int, n: int, seed: int = 0, vmax: float = 0.25):
    """``n`` base points and tangent vectors with components in ``[-vmax, vmax]``.

    Keeping ``hbar V`` well inside the injectivity domain (components below
    1/2) is what makes ``exp(hbar V)`` the geodesic endpoint for all hbar <= 1.
    """
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, (n, d)), rng.uniform(-vmax, vmax, (n, d))


def _sample_arrays(samples, d: int):
    if isinstance(samples, tuple) and len(samples) == 2 and isinstance(samples[0], np.ndarray):
        xs, vs = samples
    else:
        xs = np.array([x.coords for x, _ in samples])
        vs = np.array([v.v for _, v in samples])
    return np.asarray(xs, dtype=float).reshape(-1, d), np.asarray(vs, dtype=float).reshape(-1, d)


def fit_slope(hs, defects, floor: float = SLOPE_FLOOR) -> float:
    """Least-squares slope of ``log defect`` against ``log h``; NaN if fewer than two usable points."""
    hs = np.asarray(hs, dtype=float)
    dv = np.asarray(defects, dtype=float)
    ok = dv > floor
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[ok]), np.log(dv[ok]), 1)[0])


def _fmt(x: float):
    return None if not np.isfinite(x) else float(x)


# ---------------------------------------------------------------------------
# gluing


@dataclass
class GlueReport:
    hbars: list
    gluing: list
    diagonal: list
    roundtrip: list
    gluing_slope: float
    diagonal_slope: float
    roundtrip_slope: float
    samples: int
    seed: int | None = None

    @property
    def max_gluing(self) -> float:
        return max(self.gluing)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("gluing_slope", "diagonal_slope", "roundtrip_slope"):
            out[k] = _fmt(out[k])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def glue_check(q: QConnection, samples, hbars, seed: int | None = None) -> GlueReport:
    """Max defects of the gluing law, ``A(x,x) -> I`` and ``A(x,y)A(y,x) -> I`` per hbar."""
    xs, vs = _sample_arrays(samples, q.d)
    eye = q.group.identity()
    glu, diag, rt = [], [], []
    for h in hbars:
        if not 0.0 < h <= 1.0:
            raise HbarOutOfRange(f"hbar must lie in (0, 1], got {h}")
        ys = wrap(xs + h * vs)
        fwd = q(xs, ys, h)
        target = q.group.exp(h * q.a0_pair(xs, vs))
        glu.append(float(np.max(opnorm(fwd - target))))
        diag.append(float(np.max(opnorm(q(xs, xs, h) - eye))))
        rt.append(float(np.max(opnorm(fwd @ q(ys, xs, h) - eye))))
    hb = [float(h) for h in hbars]
    return GlueReport(
        hb, glu, diag, rt, fit_slope(hb, glu), fit_slope(hb, diag), fit_slope(hb, rt), len(xs), seed
    )


# ---------------------------------------------------------------------------
# derivative at hbar = 0


def _signed_family(q: QConnection, xs, vs, h: float) -> np.ndarray:
    """``F(h) = A_|h|(x, x + h V)``."""
    return q(xs, wrap(xs + h * vs), abs(h))


def central_differences(q: QConnection, xs, vs, hs=FD_STEPS) -> np.ndarray:
    """Central-difference estimates of ``dF/dh(0)``, shape ``(len(hs), P, N, N)``."""
    return np.stack([(_signed_family(q, xs, vs, h) - _signed_family(q, xs, vs, -h)) / (2 * h) for h in hs])


def richardson(estimates, ratio: float = 2.0, order: int = 2) -> np.ndarray:
    """Repeated Richardson extrapolation of a central-difference sequence with step ratio ``ratio``."""
    cur = list(estimates)
    p = order
    while len(cur) > 1:
        f = ratio**p
        cur = [(f * cur[i + 1] - cur[i]) / (f - 1) for i in range(len(cur) - 1)]
        p += 2
    return cur[0]


@dataclass
class DerivativeReport:
    steps: list
    defects: list
    fitted_order: float
    richardson_defect: float
    samples: int
    seed: int | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fitted_order"] = _fmt(out["fitted_order"])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def derivative_check(q: QConnection, reference: SmoothConnection, samples, hs=FD_STEPS, seed=None) -> DerivativeReport:
    """Compare ``dF/dh(0)`` of ``q``'s family with ``reference(x, V)``."""
    xs, vs = _sample_arrays(samples, q.d)
    hs = [float(h) for h in hs]
    ref = reference.pair(xs, vs)
    est = central_differences(q, xs, vs, hs)
    defects = [float(np.max(opnorm(e - ref))) for e in est]
    ratios = np.array(hs[:-1]) / np.array(hs[1:])
    if len(hs) > 1 and not np.allclose(ratios, ratios[0]):
        raise ValueError("Richardson extrapolation needs a geometric step sequence")
    rich = richardson(est, ratios[0] if len(hs) > 1 else 2.0)
    return DerivativeReport(hs, defects, fit_slope(hs, defects), float(np.max(opnorm(rich - ref))), len(xs), seed)


# ---------------------------------------------------------------------------
# algebraic operations


def _same_group(a: QConnection, b):
    if a.group != b.group or a.d != b.d:
        raise GroupMismatch("q-connections over different groups or bases")


def q_product(q1: QConnection, q2: QConnection) -> QConnection:
    """Pointwise product ``A_hbar A'_hbar``; the ``hbar = 0`` level is ``A_0 + A'_0``."""
    _same_group(q1, q2)

    def rule(xs, ys, hbar):
        return q1.family(xs, ys, hbar) @ q2.family(xs, ys, hbar)

    return QConnection(q1.a0 + q2.a0, rule, CUSTOM)


def product_check(q1: QConnection, q2: QConnection, samples, hs=FD_STEPS, seed=None) -> DerivativeReport:
    return derivative_check(q_product(q1, q2), q1.a0 + q2.a0, samples, hs, seed)


def gauge_act_hbar(g: GaugeField, q: QConnection, band: int | None = None) -> QConnection:
    """``(g A_hbar)(x, y) = g(x) A_hbar(x, y) g(y)^-1``; ``A_0`` transforms as a connection."""
    if g.group != q.group or g.d != q.d:
        raise GroupMismatch("gauge field and q-connection disagree on group or base")

    def rule(xs, ys, hbar):
        return g(xs) @ q.family(xs, ys, hbar) @ dagger(g(ys))

    return QConnection(gauge_transform(q.a0, g, band=band), rule, CUSTOM)


def compatibility_check(g: GaugeField, q: QConnection, samples, hbars=FD_STEPS, seed=None) -> DerivativeReport:
    """Derivative at 0 of the acted family against the acted ``A_0``."""
    acted = gauge_act_hbar(g, q)
    return derivative_check(acted, acted.a0, samples, hbars, seed)


# ---------------------------------------------------------------------------
# diffeomorphisms


def _pullback_components(a0: SmoothConnection, sigma: Diffeo, pts) -> np.ndarray:
    # A'_mu(x) = sum_nu A_nu(sigma x) d_mu sigma^nu(x)
    comps = a0.field(wrap(sigma(pts)))  # (P, d, dim)
    jac = sigma.jacobian(pts)  # (P, nu, mu)
    return np.einsum("pnj,pnm->pmj", comps, jac)


def pullback_connection(a0: SmoothConnection, sigma: Diffeo, tol: float = 1e-10) -> SmoothConnection:
    """``sigma^* A_0`` refitted to a Fourier band (exact for translations)."""
    sigma.check()
    if isinstance(sigma, Translation):
        return SmoothConnection(a0.group, a0.field.translated(sigma.offset))
    d = a0.d
    bands = (8, 16, 32, 48) if d == 2 else (16, 32, 64, 128, 256)
    resid = np.inf
    for K in bands:
        n = 2 * K + 1
        fitted = fit_band_field(_pullback_components(a0, sigma, grid_points(n, d)), n, d, K)
        shifted = grid_points(n, d, 0.5)
        resid = float(np.max(np.abs(fitted.on_grid(n, 0.5) - _pullback_components(a0, sigma, shifted))))
        if resid <= tol:
            return SmoothConnection(a0.group, fitted)
    raise BandOverflow(f"pulled-back connection not resolved: residual {resid:.3g} > {tol:g}")


def diff_act(sigma: Diffeo, q: QConnection) -> QConnection:
    """``(sigma A_hbar)(x, y) = A_hbar(sigma x, sigma y)``; ``A_0`` is pulled back."""
    if sigma.d != q.d:
        raise ValueError("diffeomorphism and q-connection live on different tori")
    a0 = pullback_connection(q.a0, sigma)

    def rule(xs, ys, hbar):
        return q.family(wrap(sigma(xs)), wrap(sigma(ys)), hbar)

    return QConnection(a0, rule, CUSTOM)


def pointwise_distance(q1: QConnection, q2: QConnection, xs, ys, hbar: float) -> float:
    _same_group(q1, q2)
    return float(np.max(opnorm(q1(xs, ys, hbar) - q2(xs, ys, hbar))))


def as_samples(xs, vs) -> list:
    """Typed ``(TorusPoint, TangentVector)`` pairs from arrays."""
    out = []
    for x, v in zip(np.asarray(xs), np.asarray(vs)):
        p = TorusPoint(x)
        out.append((p, TangentVector(p, v)))
    return out
