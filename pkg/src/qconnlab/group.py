"""Numerics for the compact groups U(1) and SU(2) in their defining representation.

All array routines accept stacks of matrices with shape ``(..., N, N)`` and are
vectorised over the leading axes.  The typed wrappers :class:`GroupElement`
and :class:`AlgebraElement` validate a single matrix and are what the public
operations :func:`exp_map`, :func:`log_map` and :func:`bracket` exchange.

The Lie algebra carries the invariant inner product ``<X, Y> = -tr(XY)``;
basis elements are orthonormal with respect to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GroupMismatch, OutOfPrincipalDomain

# distance from the cut locus at which the principal logarithm is refused
CUT_LOCUS_TOL = 1e-9

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True, eq=False)
class LieGroupSpec:
    id: str
    matrix_dim: int
    algebra_basis: np.ndarray = field(repr=False)
    structure_constants: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.algebra_basis.shape[0]

    def __eq__(self, other):
        return isinstance(other, LieGroupSpec) and other.id == self.id

    def __hash__(self):
        return hash(self.id)

    def identity(self, shape=()) -> np.ndarray:
        eye = np.eye(self.matrix_dim, dtype=complex)
        return np.broadcast_to(eye, tuple(shape) + eye.shape).copy()

    # -- coordinates --------------------------------------------------------
    def from_components(self, c) -> np.ndarray:
        """Map real coordinates ``(..., dim)`` to algebra matrices ``(..., N, N)``."""
        c = np.asarray(c, dtype=float)
        return np.einsum("...j,jab->...ab", c, self.algebra_basis)

    def components(self, x) -> np.ndarray:
        """Real coordinates of algebra matrices w.r.t. the orthonormal basis."""
        x = np.asarray(x, dtype=complex)
        return -np.einsum("jba,...ab->...j", self.algebra_basis, x).real

    def inner(self, x, y) -> np.ndarray:
        return -np.einsum("...ab,...ba->...", x, y).real

    # -- exponential and logarithm -------------------------------------------
    def exp(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if self.id == "U1":
            return np.exp(x)
        theta = np.sqrt(np.maximum(-np.einsum("...ab,...ba->...", x, x).real / 2.0, 0.0))
        c = np.cos(theta)[..., None, None]
        s = np.sinc(theta / np.pi)[..., None, None]
        return c * np.eye(2) + s * x

    def dexp(self, x, xdot) -> np.ndarray:
        """Directional derivative ``d/dt exp(x + t xdot)`` at t = 0."""
        x = np.asarray(x, dtype=complex)
        xdot = np.asarray(xdot, dtype=complex)
        if self.id == "U1":
            return np.exp(x) * xdot
        theta2 = np.maximum(-np.einsum("...ab,...ba->...", x, x).real / 2.0, 0.0)
        theta = np.sqrt(theta2)
        q = -np.einsum("...ab,...ba->...", x, xdot).real / 2.0
        s = np.sinc(theta / np.pi)
        small = theta < 1e-3
        safe = np.where(small, 1.0, theta)
        t = np.where(
            small,
            -1.0 / 3.0 + theta2 / 30.0 - theta2**2 / 840.0,
            (safe * np.cos(safe) - np.sin(safe)) / safe**3,
        )
        return (-s * q)[..., None, None] * np.eye(2) + (t * q)[..., None, None] * x + s[..., None, None] * xdot

    def log(self, g, strict: bool = True) -> np.ndarray:
        """Principal logarithm.

        With ``strict=False`` elements on the cut locus map to one of their
        (non-unique) preimages instead of raising.
        """
        g = np.asarray(g, dtype=complex)
        if self.id == "U1":
            ang = np.angle(g)
            if strict and np.any(np.abs(ang) > np.pi - CUT_LOCUS_TOL):
                raise OutOfPrincipalDomain("U(1) element at angle pi has no principal log")
            return 1j * ang
        c = np.einsum("...aa->...", g).real / 2.0
        y = (g - np.conj(np.swapaxes(g, -1, -2))) / 2.0
        y = y - np.einsum("...aa->...", y)[..., None, None] / 2.0 * np.eye(2)
        s = np.sqrt(np.maximum(-np.einsum("...ab,...ba->...", y, y).real / 2.0, 0.0))
        theta = np.arctan2(s, c)
        cut = theta > np.pi - CUT_LOCUS_TOL
        if strict and np.any(cut):
            raise OutOfPrincipalDomain("SU(2) element on the cut locus (rotation angle pi)")
        ratio = np.where(s > 1e-300, theta / np.where(s > 1e-300, s, 1.0), 1.0)
        out = ratio[..., None, None] * y
        if np.any(cut):
            # -I and its neighbourhood: any unit axis works at exactly -I
            degenerate = cut & (s < 1e-12)
            out = np.where(degenerate[..., None, None], np.pi * np.sqrt(2.0) * self.algebra_basis[2], out)
        return out

    def haar(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` Haar-distributed matrices, shape ``(n, N, N)``."""
        if self.id == "U1":
            theta = rng.uniform(-np.pi, np.pi, size=n)
            return np.exp(1j * theta)[:, None, None]
        q = rng.standard_normal((n, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        return quaternion_to_su2(q)

    def distance(self, g, h) -> np.ndarray:
        """Bi-invariant geodesic distance ``|log(g^-1 h)|`` for the trace form."""
        rel = np.conj(np.swapaxes(g, -1, -2)) @ h
        if self.id == "U1":
            return np.abs(np.angle(rel[..., 0, 0]))
        # rel = cos(t) I + sin(t) i n.sigma; atan2 keeps small angles accurate
        c = np.einsum("...aa->...", rel).real / 2.0
        traceless = rel - c[..., None, None] * np.eye(2)
        s = np.sqrt(np.sum(np.abs(traceless) ** 2, axis=(-2, -1)) / 2.0)
        return np.sqrt(2.0) * np.arctan2(s, c)


def quaternion_to_su2(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    m[..., 0, 0] = a + 1j * d
    m[..., 0, 1] = c + 1j * b
    m[..., 1, 0] = -c + 1j * b
    m[..., 1, 1] = a - 1j * d
    return m


def _make_u1() -> LieGroupSpec:
    basis = np.array([[[1j]]], dtype=complex)
    return LieGroupSpec("U1", 1, basis, np.zeros((1, 1, 1)))


def _make_su2() -> LieGroupSpec:
    basis = -1j * _PAULI / np.sqrt(2.0)
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return LieGroupSpec("SU2", 2, basis, np.sqrt(2.0) * eps)


U1 = _make_u1()
SU2 = _make_su2()
GROUPS = {"U1": U1, "SU2": SU2}


def get_group(name) -> LieGroupSpec:
    if isinstance(name, LieGroupSpec):
        return name
    try:
        return GROUPS[str(name).upper()]
    except KeyError:
        raise ValueError(f"unknown group {name!r}; expected one of {sorted(GROUPS)}") from None


def dagger(m) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def opnorm(m) -> np.ndarray:
    """Spectral norm of each matrix in a stack."""
    m = np.asarray(m)
    if m.shape[-1] == 1:
        return np.abs(m[..., 0, 0])
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def ordered_product(mats, axis: int = 0) -> np.ndarray:
    """Product ``M_0 M_1 ... M_{n-1}`` along ``axis`` by pairwise reduction."""
    m = np.moveaxis(np.asarray(mats), axis, 0)
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            tail = m[-1:]
            m = np.concatenate([m[0:-1:2] @ m[1::2], tail], axis=0)
        else:
            m = m[0::2] @ m[1::2]
    return m[0]


# ---------------------------------------------------------------------------
# typed single-element API


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: LieGroupSpec
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        n = self.group.matrix_dim
        if m.shape != (n, n):
            raise ValueError(f"expected {n}x{n} matrix, got shape {m.shape}")
        if np.max(np.abs(dagger(m) @ m - np.eye(n))) > 1e-12:
            raise ValueError("matrix is not unitary to 1e-12")
        if self.group.id == "SU2" and abs(np.linalg.det(m) - 1) > 1e-12:
            raise ValueError("SU(2) element must have unit determinant")
        object.__setattr__(self, "m", m)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        _same_group(self.group, other.group)
        return GroupElement(self.group, _reunitarize(self.group, self.m @ other.m))

    def inverse(self) -> "GroupElement":
        return GroupElement(self.group, dagger(self.m))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    group: LieGroupSpec
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=complex)
        n = self.group.matrix_dim
        if x.shape != (n, n):
            raise ValueError(f"expected {n}x{n} matrix, got shape {x.shape}")
        if np.max(np.abs(dagger(x) + x)) > 1e-12:
            raise ValueError("algebra element must be anti-Hermitian")
        if self.group.id == "SU2" and abs(np.trace(x)) > 1e-12:
            raise ValueError("su(2) element must be traceless")
        object.__setattr__(self, "x", x)

    def __add__(self, other):
        _same_group(self.group, other.group)
        return AlgebraElement(self.group, self.x + other.x)

    def __neg__(self):
        return AlgebraElement(self.group, -self.x)

    def __mul__(self, s: float):
        return AlgebraElement(self.group, float(s) * self.x)

    __rmul__ = __mul__


def _same_group(a: LieGroupSpec, b: LieGroupSpec):
    if a != b:
        raise GroupMismatch(f"{a.id} vs {b.id}")


def _reunitarize(group: LieGroupSpec, m):
    # guards against drift in long products; a no-op at machine precision
    if group.id == "U1":
        return m / np.abs(m)
    a = (m[..., 0, 0] + np.conj(m[..., 1, 1])) / 2
    b = (m[..., 0, 1] - np.conj(m[..., 1, 0])) / 2
    nrm = np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)
    a, b = a / nrm, b / nrm
    out = np.empty_like(m)
    out[..., 0, 0], out[..., 0, 1] = a, b
    out[..., 1, 0], out[..., 1, 1] = -np.conj(b), np.conj(a)
    return out


def exp_map(X: AlgebraElement) -> GroupElement:
    return GroupElement(X.group, _reunitarize(X.group, X.group.exp(X.x)))


def log_map(g: GroupElement) -> AlgebraElement:
    """Principal logarithm; raises :class:`OutOfPrincipalDomain` on the cut locus."""
    x = g.group.log(g.m)
    return AlgebraElement(g.group, (x - dagger(x)) / 2)


def bracket(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    _same_group(X.group, Y.group)
    return AlgebraElement(X.group, X.x @ Y.x - Y.x @ X.x)


def haar_sample(spec: LieGroupSpec, rng_seed: int, n: int) -> list[GroupElement]:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    return [GroupElement(spec, m) for m in spec.haar(rng, n)]
