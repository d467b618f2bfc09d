"""Smooth gauge transformations ``g: T^d -> G``.

A gauge field is an ordered product of factors ``C * exp(2 pi i w.x) * exp(Phi(x))``
where ``C`` is a constant group element, ``w`` an integer winding vector (U(1)
only; SU(2) is simply connected) and ``Phi`` a band-limited algebra-valued
field.  Products of gauge fields concatenate their factors, so the action
law ``g.(h.q) = (gh).q`` can be checked without refitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GroupMismatch
from .fields import BandField
from .group import LieGroupSpec, dagger, get_group


@dataclass(frozen=True, eq=False)
class GaugeFactor:
    const: np.ndarray
    winding: np.ndarray
    phi: BandField | None  # components: algebra coordinates


@dataclass(frozen=True, eq=False)
class GaugeField:
    group: LieGroupSpec
    d: int
    factors: tuple[GaugeFactor, ...] = ()

    # -- constructors -------------------------------------------------------
    @classmethod
    def identity(cls, group, d: int) -> "GaugeField":
        return cls(get_group(group), d, ())

    @classmethod
    def constant(cls, group, d: int, m) -> "GaugeField":
        group = get_group(group)
        return cls(group, d, (GaugeFactor(np.asarray(m, dtype=complex), np.zeros(d), None),))

    @classmethod
    def winding(cls, d: int, w) -> "GaugeField":
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if w.shape != (d,) or not np.allclose(w, np.round(w)):
            raise ValueError("winding must be an integer d-vector")
        group = get_group("U1")
        return cls(group, d, (GaugeFactor(np.eye(1, dtype=complex), w, None),))

    @classmethod
    def from_field(cls, group, phi: BandField, const=None) -> "GaugeField":
        group = get_group(group)
        if phi.comp_shape != (group.dim,):
            raise ValueError("phi must have one component per algebra basis element")
        c = np.eye(group.matrix_dim, dtype=complex) if const is None else np.asarray(const, dtype=complex)
        return cls(group, phi.d, (GaugeFactor(c, np.zeros(phi.d), phi),))

    @classmethod
    def random(cls, group, d: int, band: int = 1, scale: float = 0.5, seed: int = 0) -> "GaugeField":
        group = get_group(group)
        rng = np.random.default_rng(seed)
        M = 2 * band + 1
        c = rng.standard_normal((group.dim,) + (M,) * d) + 1j * rng.standard_normal((group.dim,) + (M,) * d)
        phi = BandField(d, band, scale * c / M**d)
        const = group.haar(rng, 1)[0]
        return cls.from_field(group, phi, const)

    def __mul__(self, other: "GaugeField") -> "GaugeField":
        if other.group != self.group or other.d != self.d:
            raise GroupMismatch("gauge fields over different groups or bases")
        return GaugeField(self.group, self.d, self.factors + other.factors)

    # -- evaluation ---------------------------------------------------------
    def _factor(self, f: GaugeFactor, pts, phi_vals, dphi_vals):
        grp = self.group
        P = pts.shape[0]
        wind = np.exp(2j * np.pi * pts @ f.winding)[:, None, None]
        if f.phi is None:
            e = grp.identity((P,))
            de = np.zeros((P, self.d) + e.shape[1:], dtype=complex)
        else:
            x = grp.from_components(phi_vals)
            e = grp.exp(x)
            dx = grp.from_components(dphi_vals)  # (P, d, N, N)
            de = grp.dexp(x[:, None], dx)
        val = f.const @ (wind * e)
        dval = f.const @ (wind[:, None] * (de + 2j * np.pi * f.winding[None, :, None, None] * e[:, None]))
        return val, dval

    def _evaluate(self, pts, grid: int | None, need_derivative: bool):
        grp = self.group
        P = pts.shape[0]
        g = grp.identity((P,))
        dg = np.zeros((P, self.d) + g.shape[1:], dtype=complex)
        for f in self.factors:
            if f.phi is None:
                pv = dv = None
            elif grid is None:
                pv = f.phi(pts)
                dv = np.stack([f.phi.derivative(a)(pts) for a in range(self.d)], 1) if need_derivative else None
            else:
                pv = f.phi.on_grid(grid)
                dv = (
                    np.stack([f.phi.derivative(a).on_grid(grid) for a in range(self.d)], 1)
                    if need_derivative
                    else None
                )
            if dv is None and f.phi is not None:
                dv = np.zeros((P, self.d, grp.dim))
            val, dval = self._factor(f, pts, pv, dv)
            dg = dg @ val[:, None] + g[:, None] @ dval
            g = g @ val
        return g, dg

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return self._evaluate(pts, None, False)[0]

    def with_derivative(self, points):
        """Values ``g(x)`` and partials ``d_mu g(x)`` with shape ``(P, d, N, N)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return self._evaluate(pts, None, True)

    def on_grid(self, n: int, points: np.ndarray):
        """Values and partials on the row-major ``n**d`` grid ``points``."""
        return self._evaluate(points, n, True)

    def inverse_values(self, points) -> np.ndarray:
        return dagger(self(points))
