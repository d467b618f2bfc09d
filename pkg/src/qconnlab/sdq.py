"""Strict deformation quantisation on T*T^d, g* and their product.

Symbols are finite sums of terms

    e^{2 pi i q.x} * P(p, mu) * exp(-a |p|^2),

with ``P`` a polynomial in the momenta ``p`` and the dual-algebra coordinates
``mu`` (``mu_i = mu(b_i)`` for the orthonormal algebra basis ``b_i``), and
``a >= 0`` an optional Gaussian envelope that makes the symbol vanish at
infinity.

Weyl quantisation on the torus acts on Fourier modes ``e_k = e^{2 pi i k x}``:

    Q_hbar(f) e_k = sum_q f_q(2 pi hbar (k + q/2)) e_{k+q},

truncated to the ``n**d`` grid modes.  ``Q_hbar(f)`` is returned as a kernel
whose ``apply`` is this operator.

Brackets and commutators follow the kernel algebra: the convolution product
``K_f * K_g`` acts as ``Q(g) o Q(f)``.  In that algebra the Dirac condition
``(i hbar)^-1 (K_f * K_g - K_g * K_f) ~ K_{f,g}`` holds with

    {f, g} = sum_mu (d_p f d_x g - d_x f d_p g)       on T*M,
    {f, g}(mu) = sum c_ij^k mu_k d_i f d_j g         on g*,

where ``p`` quantises to ``-i hbar d/dx`` and a linear ``mu_X`` to
``-i hbar`` times the derivative along ``g -> g exp(tX)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from itertools import product as iproduct

import numpy as np

from .errors import (
    BandOverflow,
    DegreeOverflow,
    GridMismatch,
    HbarNotAdmissible,
    NonlinearSymbol,
    UnsupportedGroup,
    WidthTooSmallForGrid,
)
from .group import LieGroupSpec, get_group
from .oprep import Grid, Kernel, convolve, involution, operator_norm, trace
from .qconn import fit_slope

MAX_DEGREE = 6


# ---------------------------------------------------------------------------
# phase spaces


@dataclass(frozen=True)
class CotangentTorus:
    d: int

    @property
    def nx(self) -> int:
        return self.d

    @property
    def nmu(self) -> int:
        return 0


@dataclass(frozen=True)
class DualAlgebra:
    group: LieGroupSpec

    @property
    def nx(self) -> int:
        return 0

    @property
    def nmu(self) -> int:
        return self.group.dim


@dataclass(frozen=True)
class ProductBase:
    d: int
    group: LieGroupSpec

    @property
    def nx(self) -> int:
        return self.d

    @property
    def nmu(self) -> int:
        return self.group.dim


Base = CotangentTorus | DualAlgebra | ProductBase


# ---------------------------------------------------------------------------
# symbols


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


def _poly_diff(a: dict, i: int) -> dict:
    out: dict = {}
    for e, c in a.items():
        if e[i]:
            f = list(e)
            f[i] -= 1
            out[tuple(f)] = out.get(tuple(f), 0) + c * e[i]
    return out


def _poly_shift(a: dict, i: int, c0: complex) -> dict:
    # c0 * v_i * a
    out = {}
    for e, c in a.items():
        f = list(e)
        f[i] += 1
        out[tuple(f)] = c0 * c
    return out


def _poly_add(a: dict, b: dict, s: complex = 1.0) -> dict:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0) + s * c
    return out


@dataclass(frozen=True, eq=False)
class Symbol:
    """``terms[(q, a)] = {exponents: coefficient}``; exponents list the
    powers of ``(p_1..p_d, mu_1..mu_dim)``."""

    base: Base
    terms: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        clean = {}
        nv = self.base.nx + self.base.nmu
        for (q, a), poly in self.terms.items():
            q = tuple(int(v) for v in q)
            if len(q) != self.base.nx:
                raise ValueError(f"x-mode {q} has wrong length for {self.base}")
            if a < 0:
                raise ValueError("envelope exponent must be >= 0")
            if self.base.nx == 0 and a != 0:
                raise ValueError("an envelope needs momentum variables")
            p = {}
            for e, c in poly.items():
                e = tuple(int(v) for v in e)
                if len(e) != nv:
                    raise ValueError(f"exponent {e} has wrong length")
                if c != 0:
                    p[e] = p.get(e, 0) + complex(c)
            p = {e: c for e, c in p.items() if c != 0}
            if p:
                key = (q, float(a))
                clean[key] = _poly_add(clean.get(key, {}), p)
        if any(sum(e) > MAX_DEGREE for poly in clean.values() for e in poly):
            raise DegreeOverflow(f"polynomial degree exceeds {MAX_DEGREE}")
        object.__setattr__(self, "terms", clean)

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, base) -> "Symbol":
        return cls(base, {})

    @classmethod
    def constant(cls, base, c: complex = 1.0, name: str = "") -> "Symbol":
        nv = base.nx + base.nmu
        return cls(base, {((0,) * base.nx, 0.0): {(0,) * nv: c}}, name)

    @classmethod
    def momentum(cls, base, mu: int = 0, c: complex = 1.0, name: str = "") -> "Symbol":
        e = [0] * (base.nx + base.nmu)
        e[mu] = 1
        return cls(base, {((0,) * base.nx, 0.0): {tuple(e): c}}, name)

    @classmethod
    def x_mode(cls, base, q, c: complex = 1.0, name: str = "") -> "Symbol":
        q = tuple(np.atleast_1d(q).astype(int))
        return cls(base, {(q, 0.0): {(0,) * (base.nx + base.nmu): c}}, name)

    @classmethod
    def coordinate(cls, base, i: int, c: complex = 1.0, name: str = "") -> "Symbol":
        """Dual-algebra coordinate ``mu_i``."""
        e = [0] * (base.nx + base.nmu)
        e[base.nx + i] = 1
        return cls(base, {((0,) * base.nx, 0.0): {tuple(e): c}}, name)

    def with_name(self, name: str) -> "Symbol":
        return Symbol(self.base, self.terms, name)

    # -- structure ----------------------------------------------------------
    @property
    def band(self) -> int:
        return max((max((abs(v) for v in q), default=0) for q, _ in self.terms), default=0)

    @property
    def degree(self) -> int:
        return max((sum(e) for poly in self.terms.values() for e in poly), default=0)

    def p_degree(self) -> int:
        nx = self.base.nx
        return max((sum(e[:nx]) for poly in self.terms.values() for e in poly), default=0)

    def mu_degree(self) -> int:
        nx = self.base.nx
        return max((sum(e[nx:]) for poly in self.terms.values() for e in poly), default=0)

    def has_envelope(self) -> bool:
        return any(a > 0 for _, a in self.terms)

    def _same(self, other: "Symbol"):
        if other.base != self.base:
            raise ValueError(f"symbols live on different phase spaces: {self.base} vs {other.base}")

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other: "Symbol") -> "Symbol":
        self._same(other)
        t = dict(self.terms)
        for k, p in other.terms.items():
            t[k] = _poly_add(t.get(k, {}), p)
        return Symbol(self.base, t)

    def __neg__(self) -> "Symbol":
        return self.scaled(-1)

    def __sub__(self, other: "Symbol") -> "Symbol":
        return self + (-other)

    def scaled(self, s: complex) -> "Symbol":
        return Symbol(self.base, {k: {e: s * c for e, c in p.items()} for k, p in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Symbol):
            return self.scaled(other)
        self._same(other)
        t: dict = {}
        for (q1, a1), p1 in self.terms.items():
            for (q2, a2), p2 in other.terms.items():
                key = (tuple(x + y for x, y in zip(q1, q2)), a1 + a2)
                t[key] = _poly_add(t.get(key, {}), _poly_mul(p1, p2))
        return Symbol(self.base, t)

    __rmul__ = scaled

    def conj(self) -> "Symbol":
        """Pointwise complex conjugate ``f*``."""
        return Symbol(
            self.base,
            {(tuple(-v for v in q), a): {e: np.conj(c) for e, c in p.items()} for (q, a), p in self.terms.items()},
        )

    def real_part(self) -> "Symbol":
        return (self + self.conj()).scaled(0.5)

    def is_real(self, tol: float = 1e-14) -> bool:
        return self.distance(self.conj()) <= tol

    def distance(self, other: "Symbol") -> float:
        """Max coefficient difference (exact for identical term layouts)."""
        diff = (self - other).terms
        return max((abs(c) for p in diff.values() for c in p.values()), default=0.0)

    # -- derivatives --------------------------------------------------------
    def dx(self, mu: int) -> "Symbol":
        return Symbol(
            self.base,
            {(q, a): {e: 2j * np.pi * q[mu] * c for e, c in p.items()} for (q, a), p in self.terms.items()},
        )

    def dp(self, mu: int) -> "Symbol":
        t = {}
        for (q, a), p in self.terms.items():
            new = _poly_diff(p, mu)
            if a:
                new = _poly_add(new, _poly_shift(p, mu, -2.0 * a))
            t[(q, a)] = new
        return Symbol(self.base, t)

    def dmu(self, i: int) -> "Symbol":
        return Symbol(self.base, {k: _poly_diff(p, self.base.nx + i) for k, p in self.terms.items()})

    def times_mu(self, k: int) -> "Symbol":
        return Symbol(self.base, {key: _poly_shift(p, self.base.nx + k, 1.0) for key, p in self.terms.items()})

    # -- evaluation ---------------------------------------------------------
    def _poly_values(self, poly: dict, vars_: np.ndarray) -> np.ndarray:
        out = np.zeros(vars_.shape[0], dtype=complex)
        for e, c in poly.items():
            out += c * np.prod(vars_ ** np.asarray(e), axis=1)
        return out

    def mode_profile(self, q, p, mu=None) -> np.ndarray:
        """``f_q(p, mu)``: the coefficient of ``e^{2 pi i q.x}`` at the given momenta."""
        q = tuple(int(v) for v in np.atleast_1d(q)) if self.base.nx else ()
        vars_ = self._vars(p, mu)
        out = np.zeros(vars_.shape[0], dtype=complex)
        nx = self.base.nx
        for (qq, a), poly in self.terms.items():
            if qq != q:
                continue
            v = self._poly_values(poly, vars_)
            if a:
                v = v * np.exp(-a * np.sum(vars_[:, :nx] ** 2, axis=1))
            out += v
        return out

    def _vars(self, p, mu) -> np.ndarray:
        parts = []
        n = None
        if self.base.nx:
            p = np.asarray(p, dtype=float).reshape(-1, self.base.nx)
            parts.append(p)
            n = len(p)
        if self.base.nmu:
            mu = np.asarray(mu, dtype=float).reshape(-1, self.base.nmu)
            parts.append(mu)
            n = len(mu) if n is None else n
        return np.concatenate(parts, axis=1) if parts else np.zeros((1, 0))

    def __call__(self, x=None, p=None, mu=None) -> np.ndarray:
        vars_ = self._vars(p, mu)
        nx = self.base.nx
        xs = np.asarray(x, dtype=float).reshape(-1, nx) if nx else np.zeros((vars_.shape[0], 0))
        out = np.zeros(vars_.shape[0], dtype=complex)
        for (q, a), poly in self.terms.items():
            v = self._poly_values(poly, vars_)
            if a:
                v = v * np.exp(-a * np.sum(vars_[:, :nx] ** 2, axis=1))
            if nx:
                v = v * np.exp(2j * np.pi * xs @ np.asarray(q, dtype=float))
            out += v
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base": _base_dict(self.base),
            "terms": [
                {"q": list(q), "a": a, "poly": [[list(e), [c.real, c.imag]] for e, c in sorted(p.items())]}
                for (q, a), p in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Symbol":
        base = _base_from_dict(d["base"])
        terms = {}
        for t in d["terms"]:
            terms[(tuple(t["q"]), float(t["a"]))] = {tuple(e): complex(*c) for e, c in t["poly"]}
        return cls(base, terms, d.get("name", ""))


def _base_dict(b) -> dict:
    if isinstance(b, CotangentTorus):
        return {"kind": "CotangentTorus", "d": b.d}
    if isinstance(b, DualAlgebra):
        return {"kind": "DualAlgebra", "group": b.group.id}
    return {"kind": "Product", "d": b.d, "group": b.group.id}


def _base_from_dict(d: dict):
    if d["kind"] == "CotangentTorus":
        return CotangentTorus(int(d["d"]))
    if d["kind"] == "DualAlgebra":
        return DualAlgebra(get_group(d["group"]))
    return ProductBase(int(d["d"]), get_group(d["group"]))


def gaussian_envelope(base, width: float) -> Symbol:
    """``exp(-|p|^2 / (2 width^2))``."""
    nv = base.nx + base.nmu
    return Symbol(base, {((0,) * base.nx, 1.0 / (2 * width**2)): {(0,) * nv: 1.0}})


def random_symbol(
    d: int = 1, band: int = 1, degree: int = 2, width: float | None = 1.5, seed: int = 0, real: bool = True
) -> Symbol:
    """Random band-limited symbol on T*T^d, polynomial of ``degree`` in p
    times an optional Gaussian envelope of the given momentum width."""
    rng = np.random.default_rng(seed)
    base = CotangentTorus(d)
    a = 0.0 if width is None else 1.0 / (2 * width**2)
    terms: dict = {}
    exps = [e for e in iproduct(range(degree + 1), repeat=d) if sum(e) <= degree]
    for q in iproduct(range(-band, band + 1), repeat=d):
        c = rng.standard_normal(len(exps)) + 1j * rng.standard_normal(len(exps))
        terms[(q, a)] = {e: v / len(exps) for e, v in zip(exps, c)}
    s = Symbol(base, terms)
    return s.real_part() if real else s


# ---------------------------------------------------------------------------
# Poisson brackets


def poisson_bracket(f: Symbol, g: Symbol) -> Symbol:
    f._same(g)
    base = f.base
    out = Symbol.zero(base)
    for mu in range(base.nx):
        out = out + f.dp(mu) * g.dx(mu) - f.dx(mu) * g.dp(mu)
    if base.nmu:
        c = base.group.structure_constants
        dfs = [f.dmu(i) for i in range(base.nmu)]
        dgs = [g.dmu(j) for j in range(base.nmu)]
        for i, j, k in zip(*np.nonzero(c)):
            out = out + (dfs[i] * dgs[j]).times_mu(k).scaled(c[i, j, k])
    return out


# ---------------------------------------------------------------------------
# Weyl quantisation on the torus


def admissible_hbar(hbar: float, n: int, tol: float = 1e-12) -> int:
    """Return ``m`` with ``hbar = 1/m`` and ``1 <= m <= n/2``; raise otherwise."""
    if not 0.0 < hbar <= 1.0:
        raise HbarNotAdmissible(f"hbar={hbar} outside (0, 1]")
    m = round(1.0 / hbar)
    if abs(1.0 / m - hbar) > tol * hbar:
        raise HbarNotAdmissible(f"hbar={hbar} is not of the form 1/m")
    if m > n // 2:
        raise HbarNotAdmissible(f"hbar=1/{m} too small for an {n}-point grid (need m <= {n // 2})")
    return m


def _modes(n: int, margin: int = 0) -> np.ndarray:
    return np.arange(-(n // 2) - margin, n - n // 2 + margin)


def _mode_operator(f: Symbol, hbar: float, n: int, margin: int, convention: str) -> np.ndarray:
    """Dense matrix of ``Q_hbar(f)`` on the modes ``_modes(n, margin)`` per axis."""
    d = f.base.nx
    ks1 = _modes(n, margin)
    M = len(ks1)
    ks = np.stack(np.meshgrid(*[ks1] * d, indexing="ij"), -1).reshape(-1, d)
    T = np.zeros((M**d, M**d), dtype=complex)
    lo = ks1[0]
    for q in {q for q, _ in f.terms}:
        qa = np.asarray(q)
        tgt = ks + qa
        ok = np.all((tgt >= lo) & (tgt < lo + M), axis=1)
        src = np.flatnonzero(ok)
        tidx = np.ravel_multi_index(tuple((tgt[ok] - lo).T), (M,) * d)
        kk = ks[ok]
        if convention == "weyl":
            p = 2 * np.pi * hbar * (kk + qa / 2.0)
        elif convention == "left":
            p = 2 * np.pi * hbar * kk
        else:
            raise ValueError(f"unknown convention {convention!r}")
        T[tidx, src] += f.mode_profile(q, p)
    return T


def _fourier_matrix(n: int, d: int) -> np.ndarray:
    ks = _modes(n)
    E1 = np.exp(2j * np.pi * np.outer(np.arange(n), ks) / n)
    E = E1
    for _ in range(d - 1):
        E = np.kron(E, E1)
    return E


def mode_to_kernel(T: np.ndarray, n: int, d: int, hbar=None) -> Kernel:
    """Kernel whose ``apply`` is the mode-space operator ``T``."""
    E = _fourier_matrix(n, d)
    G = E @ T @ E.conj().T / n**d  # operator on grid values
    K = n**d * G.T
    return Kernel(Grid(n, d), K[:, :, None, None], hbar)


def kernel_to_mode(K: Kernel) -> np.ndarray:
    n, d = K.grid.n, K.grid.d
    E = _fourier_matrix(n, d)
    G = K.values[:, :, 0, 0].T / n**d
    return E.conj().T @ G @ E / n**d


def _check_cotangent(f: Symbol, n: int):
    if not isinstance(f.base, CotangentTorus):
        raise ValueError("quantize_pair needs a symbol on the cotangent bundle of the torus")
    if 2 * f.band >= n:
        raise BandOverflow(f"symbol band {f.band} aliases on an {n}-point grid")


def quantize_pair(f: Symbol, hbar: float, grid: Grid | int, convention: str = "weyl") -> Kernel:
    """Weyl quantisation ``Q_hbar(f)`` as a scalar kernel on the grid."""
    grid = grid if isinstance(grid, Grid) else Grid(int(grid), f.base.nx)
    if grid.d != f.base.nx:
        raise GridMismatch("grid dimension differs from the symbol's base")
    _check_cotangent(f, grid.n)
    admissible_hbar(hbar, grid.n)
    T = _mode_operator(f, hbar, grid.n, 0, convention)
    return mode_to_kernel(T, grid.n, grid.d, hbar)


def symbol_recovery_defect(f: Symbol, hbar: float, grid: Grid | int) -> float:
    """Read the mode profiles back off ``Q_hbar(f)`` and compare with ``f``.

    The matrix element between ``e_k`` and ``e_{k+q}`` is ``f_q`` sampled at
    ``2 pi hbar (k + q/2)``; modes outside the band must vanish.
    """
    grid = grid if isinstance(grid, Grid) else Grid(int(grid), f.base.nx)
    T = kernel_to_mode(quantize_pair(f, hbar, grid))
    expect = _mode_operator(f, hbar, grid.n, 0, "weyl")
    return float(np.max(np.abs(T - expect)))


def symbol_samples_from_kernel(K: Kernel, hbar: float, q) -> tuple[np.ndarray, np.ndarray]:
    """Momenta and recovered values of ``f_q`` from a one-dimensional kernel."""
    if K.grid.d != 1:
        raise ValueError("sample recovery implemented for d = 1")
    T = kernel_to_mode(K)
    ks = _modes(K.grid.n)
    q = int(np.atleast_1d(q)[0])
    idx = np.flatnonzero((ks + q >= ks[0]) & (ks + q <= ks[-1]))
    p = 2 * np.pi * hbar * (ks[idx] + q / 2.0)
    return p, T[idx + q, idx]


# ---------------------------------------------------------------------------
# group quantisation


def _linear_parts(X: Symbol) -> tuple[complex, np.ndarray]:
    if not isinstance(X.base, DualAlgebra):
        raise ValueError("expected a symbol on the dual of the Lie algebra")
    if X.degree >= 2:
        raise NonlinearSymbol("only affine symbols on g* have a fixed quantisation")
    nmu = X.base.nmu
    c0 = 0j
    c1 = np.zeros(nmu, dtype=complex)
    for _, poly in X.terms.items():
        for e, c in poly.items():
            if sum(e) == 0:
                c0 += c
            else:
                c1[int(np.argmax(e))] += c
    return c0, c1


def quantize_group(X: Symbol, hbar: float, group_grid: int) -> Kernel:
    """``Q_hbar(c0 + c.mu) = c0 - i hbar c.D`` on a uniform U(1) grid.

    ``D`` differentiates along ``g -> g exp(t b)``; on ``e^{ik theta}`` the
    coordinate ``mu`` quantises to multiplication by ``hbar k``.
    """
    if X.base.group.id != "U1":
        raise UnsupportedGroup("operator realisation on the group is implemented for U(1) only")
    if not 0.0 < hbar <= 1.0:
        raise HbarNotAdmissible(f"hbar={hbar} outside (0, 1]")
    c0, c1 = _linear_parts(X)
    ks = _modes(group_grid)
    T = np.diag(c0 + c1[0] * hbar * ks)
    return mode_to_kernel(T, group_grid, 1, hbar)


def su2_sector_dirac_defect(X: Symbol, Y: Symbol, hbar: float) -> float:
    """Dirac defect for affine symbols on su(2)* on the matrix-coefficient sector.

    On the span of the coefficient functions ``g -> g_ab`` the derivative along
    ``g exp(tZ)`` sends ``sum M_ab g_ab`` to ``sum (M Z^T)_ab g_ab``.  Products
    are taken in the kernel-algebra order (``A * B`` means "A then B"), and
    the defect vanishes up to round-off.
    """
    grp = X.base.group
    if grp.id != "SU2" or Y.base != X.base:
        raise ValueError("expects two symbols on su(2)*")

    def op(S: Symbol) -> np.ndarray:
        c0, c1 = _linear_parts(S)
        Z = np.einsum("j,jab->ab", c1, grp.algebra_basis)
        # vec(M Z^T) = (I kron Z) vec(M) for row-major vec
        return c0 * np.eye(4) - 1j * hbar * np.kron(np.eye(2), Z)

    A, B = op(X), op(Y)
    C = op(poisson_bracket(X, Y))
    # "A then B" is the matrix B @ A
    defect = (B @ A - A @ B) / (1j * hbar) - C
    return float(np.linalg.norm(defect, ord=2))


def quantize_product(f: Symbol, h: Symbol, hbar: float, n: int) -> Kernel:
    """Separable symbol ``f(x, p) h(mu)`` on T*T^1 x u(1)*: the tensor kernel."""
    if f.base.nx != 1:
        raise ValueError("product quantisation is implemented over the circle")
    K1 = quantize_pair(f, hbar, Grid(n, 1)).values[:, :, 0, 0]
    K2 = quantize_group(h, hbar, n).values[:, :, 0, 0]
    P = n * n
    # (x, theta) row-major on the n x n grid
    vals = np.einsum("xy,st->xsyt", K1, K2).reshape(P, P)
    return Kernel(Grid(n, 2), vals[:, :, None, None], hbar)


# ---------------------------------------------------------------------------
# Dirac condition


@dataclass
class DefectReport:
    hbars: list
    defects: list
    fitted_slope: float
    symbol_ids: tuple
    adjoint_defects: list
    grid: int
    norm_iters: int
    seed: int

    def __post_init__(self):
        if len(self.hbars) != len(self.defects) or any(v < 0 for v in self.defects):
            raise ValueError("defects must be non-negative and aligned with hbars")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["symbol_ids"] = list(self.symbol_ids)
        out["fitted_slope"] = None if not np.isfinite(self.fitted_slope) else self.fitted_slope
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hbar", "defect", "adjoint_defect"])
        for h, v, a in zip(self.hbars, self.defects, self.adjoint_defects):
            w.writerow([f"{h:.17g}", f"{v:.17g}", f"{a:.17g}"])
        return buf.getvalue()


def dirac_operator(f: Symbol, g: Symbol, hbar: float, n: int) -> Kernel:
    """Kernel of ``(i hbar)^-1 (K_f * K_g - K_g * K_f) - K_{f,g}`` on the grid.

    The commutator is formed on a mode range widened by the symbol bands and
    then compressed to the grid modes, so intermediate modes are not lost to
    truncation.
    """
    _check_cotangent(f, n)
    _check_cotangent(g, n)
    admissible_hbar(hbar, n)
    d = f.base.nx
    margin = max(f.band, g.band)
    Tf = _mode_operator(f, hbar, n, margin, "weyl")
    Tg = _mode_operator(g, hbar, n, margin, "weyl")
    # kernel product K_f * K_g corresponds to the operator Tg @ Tf
    comm = (Tg @ Tf - Tf @ Tg) / (1j * hbar)
    M = n + 2 * margin
    inner = np.ravel_multi_index(
        tuple(np.stack(np.meshgrid(*[np.arange(margin, margin + n)] * d, indexing="ij"), 0).reshape(d, -1)), (M,) * d
    )
    D = comm[np.ix_(inner, inner)] - _mode_operator(poisson_bracket(f, g), hbar, n, 0, "weyl")
    return mode_to_kernel(D, n, d, hbar)


def dirac_defect(
    f: Symbol, g: Symbol, hbars, grid: Grid | int, iters: int = 200, seed: int = 0
) -> DefectReport:
    n = grid.n if isinstance(grid, Grid) else int(grid)
    defects, adj = [], []
    for h in hbars:
        defects.append(operator_norm(dirac_operator(f, g, h, n), iters, seed))
        Kf = quantize_pair(f, h, Grid(n, f.base.nx))
        Kfs = quantize_pair(f.conj(), h, Grid(n, f.base.nx))
        adj.append(float(np.max(np.abs(involution(Kf).values - Kfs.values))) / n ** f.base.nx)
    hb = [float(h) for h in hbars]
    return DefectReport(hb, defects, fit_slope(hb, defects), (f.name, g.name), adj, n, iters, seed)


def kernel_commutator(K1: Kernel, K2: Kernel) -> Kernel:
    return convolve(K1, K2) - convolve(K2, K1)


# ---------------------------------------------------------------------------
# continuous-field norms


def sup_norm(f: Symbol, n: int, hbars, oversample: int = 4) -> float:
    """``sup |f|`` over an oversampled x grid and the momenta the grids resolve."""
    d = f.base.nx
    xs1 = np.arange(oversample * n) / (oversample * n)
    pmax = np.pi * n * max(hbars)
    ps1 = np.linspace(-pmax, pmax, 2 * oversample * n + 1)
    if d == 1:
        X, Pm = np.meshgrid(xs1, ps1, indexing="ij")
        return float(np.max(np.abs(f(X.reshape(-1, 1), Pm.reshape(-1, 1)))))
    xs = np.stack(np.meshgrid(*[xs1[::oversample]] * d, indexing="ij"), -1).reshape(-1, d)
    ps = np.stack(np.meshgrid(*[ps1[::oversample]] * d, indexing="ij"), -1).reshape(-1, d)
    best = 0.0
    for p in ps:
        best = max(best, float(np.max(np.abs(f(xs, np.broadcast_to(p, xs.shape))))))
    return best


@dataclass
class NormReport:
    hbars: list
    norms: list
    sup_norm: float
    defects: list
    fitted_slope: float
    symbol_id: str
    grid: int

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fitted_slope"] = None if not np.isfinite(self.fitted_slope) else self.fitted_slope
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def norm_continuity(f: Symbol, hbars, grid: Grid | int, iters: int = 200, seed: int = 0) -> NormReport:
    n = grid.n if isinstance(grid, Grid) else int(grid)
    norms = [operator_norm(quantize_pair(f, h, Grid(n, f.base.nx)), iters, seed) for h in hbars]
    s = sup_norm(f, n, hbars)
    defects = [abs(v - s) for v in norms]
    hb = [float(h) for h in hbars]
    return NormReport(hb, norms, s, defects, fit_slope(hb, defects), f.name, n)


# ---------------------------------------------------------------------------
# smeared embedding of q-connections


@dataclass(frozen=True, eq=False)
class SmearedKernel:
    """``F(x, y, h_j)`` on grid pairs and the uniform U(1) grid ``h_j = e^{2 pi i j / ng}``."""

    grid: Grid
    ng: int
    width: float
    centers: np.ndarray  # (P, P) angles of A_hbar(x, y)
    norm: np.ndarray  # (P, P) normalisers Z
    values: np.ndarray  # (P, P, ng)
    hbar: float

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.ng) / self.ng

    def mass(self) -> np.ndarray:
        """Haar integral over the group fibre for every ``(x, y)``."""
        return self.values.mean(axis=-1)

    def density(self, ix, iy, theta) -> np.ndarray:
        """``F`` at arbitrary group angles for the grid pair ``(ix, iy)``."""
        c = self.centers[ix, iy]
        return np.exp(-_angle_dist(theta, c) ** 2 / (2 * self.width**2)) / self.norm[ix, iy]

    def concentration(self, k: float = 3.0) -> float:
        """Smallest fibre mass within ``k * width`` of the graph point."""
        near = _angle_dist(self.angles[None, None, :], self.centers[..., None]) <= k * self.width
        return float(np.min(np.where(near, self.values, 0.0).mean(axis=-1)))


def _angle_dist(a, b) -> np.ndarray:
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def embed_qconnection(q, hbar: float, grid: Grid, group_grid: int, mollifier_width: float) -> SmearedKernel:
    """Gaussian smearing of the graph of ``A_hbar`` in M x M x U(1)."""
    if q.group.id != "U1":
        raise UnsupportedGroup("smeared embedding implemented for U(1)")
    if mollifier_width <= 0:
        raise ValueError("mollifier width must be positive")
    spacing = 2 * np.pi / group_grid
    if mollifier_width < 2 * spacing:
        raise WidthTooSmallForGrid(f"width {mollifier_width:g} < 2 x group spacing {spacing:g}")
    pts = grid.points
    P = grid.size
    vals = q(np.repeat(pts, P, axis=0), np.tile(pts, (P, 1)), hbar)[:, 0, 0]
    centers = np.angle(vals).reshape(P, P)
    theta = 2 * np.pi * np.arange(group_grid) / group_grid
    raw = np.exp(-_angle_dist(theta[None, None, :], centers[..., None]) ** 2 / (2 * mollifier_width**2))
    Z = raw.mean(axis=-1)
    return SmearedKernel(grid, group_grid, mollifier_width, centers, Z, raw / Z[..., None], hbar)


def kernel_trace_real(K: Kernel) -> float:
    return trace(K).real
