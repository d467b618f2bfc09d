"""Discretised two-point kernels acting on L^2(T^d, C^N).

Vectors ``phi(x)`` are rows and kernels act from the right:

    (K phi)(y) = (1/P) sum_x phi(x) K(x, y),      P = n**d,

so that ``convolve(K1, K2)(x, z) = (1/P) sum_y K1(x, y) K2(y, z)`` acts as
``apply(K2) o apply(K1)``.  This matches the holonomy convention (transport of
a row vector along x -> y -> z multiplies ``A(x, y) A(y, z)``) and makes the
two-point gauge rule ``g(x) K(x, y) g(y)^-1`` a unitary conjugation.

Internally a kernel is the block matrix ``B[(x, a), (y, b)] = K(x, y)[a, b]``;
the operator is right multiplication by ``B / P``.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatch, GroupMismatch, HbarOutOfRange
from .fields import grid_points
from .gauge import GaugeField
from .group import dagger

_HEADER = struct.Struct("<qqq")


@dataclass(frozen=True)
class Grid:
    n: int
    d: int

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.n, self.d)

    @property
    def weight(self) -> float:
        return 1.0 / self.size


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray  # (P, N)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.size:
            raise GridMismatch(f"expected {self.grid.size} grid values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def norm(self) -> float:
        return float(np.sqrt(self.grid.weight * np.sum(np.abs(self.values) ** 2)))

    def inner(self, other: "GridFunction") -> complex:
        """``<self, other>``, conjugate-linear in ``self``."""
        return complex(self.grid.weight * np.vdot(self.values, other.values))


@dataclass(frozen=True, eq=False)
class Kernel:
    grid: Grid
    values: np.ndarray  # (P, P, N, N), values[x, y] = K(x, y)
    hbar_tag: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        P = self.grid.size
        if v.ndim != 4 or v.shape[:2] != (P, P) or v.shape[2] != v.shape[3]:
            raise GridMismatch(f"kernel shape {v.shape} inconsistent with {P} grid points")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel has non-finite entries")
        if self.hbar_tag is not None and not 0.0 < self.hbar_tag <= 1.0:
            raise HbarOutOfRange(f"hbar tag must lie in (0, 1], got {self.hbar_tag}")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[2]

    @property
    def P(self) -> int:
        return self.grid.size

    def block(self) -> np.ndarray:
        P, N = self.P, self.N
        return self.values.transpose(0, 2, 1, 3).reshape(P * N, P * N)

    @classmethod
    def from_block(cls, grid: Grid, B: np.ndarray, N: int, hbar_tag=None) -> "Kernel":
        P = grid.size
        return cls(grid, B.reshape(P, N, P, N).transpose(0, 2, 1, 3), hbar_tag)

    def __add__(self, other: "Kernel") -> "Kernel":
        _check(self, other)
        return Kernel(self.grid, self.values + other.values, _tag(self, other))

    def __sub__(self, other: "Kernel") -> "Kernel":
        _check(self, other)
        return Kernel(self.grid, self.values - other.values, _tag(self, other))

    def scaled(self, s: complex) -> "Kernel":
        return Kernel(self.grid, s * self.values, self.hbar_tag)


def _check(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"grids {a.grid} and {b.grid} differ")
    if a.N != b.N:
        raise GridMismatch(f"fibre dimensions {a.N} and {b.N} differ")


def _tag(a: Kernel, b: Kernel):
    return a.hbar_tag if a.hbar_tag == b.hbar_tag else None


# ---------------------------------------------------------------------------
# constructors


def zero_kernel(grid: Grid, N: int = 1) -> Kernel:
    return Kernel(grid, np.zeros((grid.size, grid.size, N, N), dtype=complex))


def discrete_identity(grid: Grid, N: int = 1) -> Kernel:
    """``P * I * [x == y]``: the unit of the discrete convolution algebra."""
    P = grid.size
    v = np.zeros((P, P, N, N), dtype=complex)
    v[np.arange(P), np.arange(P)] = P * np.eye(N)
    return Kernel(grid, v)


def random_kernel(grid: Grid, N: int, seed: int = 0) -> Kernel:
    rng = np.random.default_rng(seed)
    shape = (grid.size, grid.size, N, N)
    return Kernel(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def materialize(q, hbar: float, grid: Grid) -> Kernel:
    """Sample ``A_hbar(x, y)`` of a q-connection on all grid pairs."""
    if not 0.0 < hbar <= 1.0:
        raise HbarOutOfRange(f"hbar must lie in (0, 1], got {hbar}")
    if q.d != grid.d:
        raise GridMismatch("grid dimension differs from the base of the q-connection")
    pts = grid.points
    P = grid.size
    xs = np.repeat(pts, P, axis=0)
    ys = np.tile(pts, (P, 1))
    vals = q(xs, ys, hbar)
    N = vals.shape[-1]
    return Kernel(grid, vals.reshape(P, P, N, N), hbar)


# ---------------------------------------------------------------------------
# algebra


def apply(K: Kernel, phi: GridFunction) -> GridFunction:
    if K.grid != phi.grid:
        raise GridMismatch("kernel and function live on different grids")
    if K.N != phi.N:
        raise GridMismatch(f"kernel fibre {K.N} vs function fibre {phi.N}")
    out = np.einsum("xa,xyab->yb", phi.values, K.values) / K.P
    return GridFunction(K.grid, out)


def convolve(K1: Kernel, K2: Kernel) -> Kernel:
    _check(K1, K2)
    B = K1.block() @ K2.block() / K1.P
    return Kernel.from_block(K1.grid, B, K1.N, _tag(K1, K2))


def involution(K: Kernel) -> Kernel:
    """``K*(x, y) = K(y, x)^dagger``; the adjoint of ``apply(K)``."""
    return Kernel(K.grid, dagger(K.values.transpose(1, 0, 2, 3)), K.hbar_tag)


def trace(K: Kernel) -> complex:
    P = K.P
    diag = K.values[np.arange(P), np.arange(P)]
    return complex(np.einsum("paa->", diag) / P)


def gauge_conjugate(K: Kernel, g: GaugeField) -> Kernel:
    """``K'(x, y) = g(x) K(x, y) g(y)^-1`` on the grid."""
    if g.d != K.grid.d:
        raise GridMismatch("gauge field and kernel live over different tori")
    if g.group.matrix_dim != K.N:
        raise GroupMismatch(f"gauge group acts on C^{g.group.matrix_dim}, kernel on C^{K.N}")
    gv = g(K.grid.points)
    vals = gv[:, None] @ K.values @ dagger(gv)[None, :]
    return Kernel(K.grid, vals, K.hbar_tag)


def operator_norm(K: Kernel, iters: int = 200, seed: int = 0) -> float:
    """Power iteration on ``T* T`` for ``T = apply(K)``.

    The estimate ``|T v_k|`` with ``v_k`` the normalised k-th iterate never
    decreases with ``iters``.  The weighted inner product rescales both sides
    equally, so the plain Euclidean structure gives the same norm.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    M = K.block() / K.P
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = v @ M
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w @ dagger(M)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return est
        v /= nv
    return float(np.linalg.norm(v @ M))


def operator_norm_exact(K: Kernel) -> float:
    """Largest singular value by dense SVD; an oracle for :func:`operator_norm`."""
    return float(np.linalg.norm(K.block() / K.P, ord=2))


# ---------------------------------------------------------------------------
# persistence


def export_binary(K: Kernel, path) -> tuple[Path, Path]:
    """Write ``path`` (binary) and ``path.json`` (sidecar).

    Layout: little-endian int64 header ``(n, d, N)`` followed by the values
    ``K[x, y, a, b]`` in row-major order as float64 ``(re, im)`` pairs, with
    grid points enumerated row-major.
    """
    path = Path(path)
    body = np.ascontiguousarray(K.values).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(K.grid.n, K.grid.d, K.N))
        fh.write(body.tobytes())
    side = path.with_name(path.name + ".json")
    meta = {
        "n": K.grid.n,
        "d": K.grid.d,
        "N": K.N,
        "hbar_tag": K.hbar_tag,
        "header": "int64 n, int64 d, int64 N (little-endian)",
        "layout": "K[x, y, a, b] row-major, complex as float64 (re, im) pairs",
        "bytes": _HEADER.size + body.nbytes,
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def import_binary(path) -> Kernel:
    path = Path(path)
    raw = path.read_bytes()
    n, d, N = _HEADER.unpack_from(raw)
    grid = Grid(int(n), int(d))
    P = grid.size
    vals = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(P, P, N, N)
    side = path.with_name(path.name + ".json")
    tag = json.loads(side.read_text()).get("hbar_tag") if side.exists() else None
    return Kernel(grid, vals.copy(), tag)


def export_scalars_csv(rows, path, columns=("label", "trace_re", "trace_im", "norm")) -> Path:
    """CSV of per-kernel traces and norms; ``rows`` are dicts keyed by ``columns``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
    return path


def _cell(v):
    return f"{v:.17g}" if isinstance(v, float) else v
