"""Real band-limited fields on T^d stored by their Fourier coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_CHUNK = 4096


def mode_range(band: int) -> np.ndarray:
    return np.arange(-band, band + 1)


def grid_points(n: int, d: int, offset: float = 0.0) -> np.ndarray:
    """Row-major uniform grid on T^d, shape ``(n**d, d)``."""
    axes = [(np.arange(n) + offset) / n] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)


def hermitian_part(c: np.ndarray, d: int) -> np.ndarray:
    """Project coefficients so the represented field is real."""
    flipped = np.conj(np.flip(c, axis=tuple(range(c.ndim - d, c.ndim))))
    return (c + flipped) / 2


@dataclass(frozen=True, eq=False)
class BandField:
    """Field ``T^d -> R^m``; ``coeffs[..., k_1+K, ..., k_d+K]`` multiplies
    ``exp(2 pi i k.x)``.  Leading axes of ``coeffs`` index the m components."""

    d: int
    band: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        M = 2 * self.band + 1
        if c.shape[c.ndim - self.d :] != (M,) * self.d:
            raise ValueError(f"coefficient mode axes must be {(M,) * self.d}, got {c.shape}")
        c = hermitian_part(c, self.d)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def comp_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[: self.coeffs.ndim - self.d]

    @classmethod
    def zeros(cls, comp_shape, d: int, band: int = 0) -> "BandField":
        return cls(d, band, np.zeros(tuple(comp_shape) + (2 * band + 1,) * d, dtype=complex))

    def padded(self, band: int) -> "BandField":
        if band < self.band:
            raise ValueError("cannot pad to a smaller band")
        p = band - self.band
        pad = [(0, 0)] * len(self.comp_shape) + [(p, p)] * self.d
        return BandField(self.d, band, np.pad(self.coeffs, pad))

    def __add__(self, other: "BandField") -> "BandField":
        K = max(self.band, other.band)
        return BandField(self.d, K, self.padded(K).coeffs + other.padded(K).coeffs)

    def scaled(self, s: float) -> "BandField":
        return BandField(self.d, self.band, s * self.coeffs)

    def derivative(self, axis: int) -> "BandField":
        k = mode_range(self.band)
        shape = [1] * self.d
        shape[axis] = -1
        return BandField(self.d, self.band, self.coeffs * (2j * np.pi * k.reshape(shape)))

    def translated(self, offset) -> "BandField":
        """Field ``x -> f(x + offset)``."""
        c = self.coeffs
        k = mode_range(self.band)
        for ax, o in enumerate(np.atleast_1d(offset)):
            shape = [1] * self.d
            shape[ax] = -1
            c = c * np.exp(2j * np.pi * k * o).reshape(shape)
        return BandField(self.d, self.band, c)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, points) -> np.ndarray:
        """Values at ``points`` of shape ``(P, d)``; returns ``(P, *comp_shape)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        nc = len(self.comp_shape)
        flat = self.coeffs.reshape((-1,) + (2 * self.band + 1,) * self.d)
        out = np.empty((pts.shape[0], flat.shape[0]))
        k = mode_range(self.band)
        for lo in range(0, pts.shape[0], _CHUNK):
            p = pts[lo : lo + _CHUNK]
            e = [np.exp(2j * np.pi * p[:, a, None] * k) for a in range(self.d)]
            if self.d == 1:
                v = e[0] @ flat.T
            else:
                t = np.einsum("pa,mab->pmb", e[0], flat)
                v = np.einsum("pmb,pb->pm", t, e[1])
            out[lo : lo + _CHUNK] = v.real
        return out.reshape((pts.shape[0],) + self.comp_shape) if nc else out[:, 0]

    def on_grid(self, n: int, offset: float = 0.0) -> np.ndarray:
        """Values on the ``n**d`` grid (row-major), by inverse FFT.

        Requires ``n >= 2*band + 1``.  ``offset`` shifts every grid node by
        ``offset / n`` along each axis.
        """
        if n < 2 * self.band + 1:
            raise ValueError("grid too coarse for the band")
        f = self.translated([offset / n] * self.d) if offset else self
        c = f.coeffs
        nc = len(self.comp_shape)
        K = self.band
        full = np.zeros(self.comp_shape + (n,) * self.d, dtype=complex)
        idx = np.mod(mode_range(K), n)
        full[(Ellipsis,) + np.ix_(*([idx] * self.d))] = c
        axes = tuple(range(nc, nc + self.d))
        vals = np.fft.ifftn(full, axes=axes).real * n**self.d
        vals = np.moveaxis(vals.reshape(self.comp_shape + (n**self.d,)), -1, 0)
        return vals

    def restrict_axis(self, start, axis: int) -> np.ndarray:
        """1-D coefficients of ``t -> f(start + t e_axis)``; shape ``(*comp, M)``."""
        c = self.coeffs
        k = mode_range(self.band)
        nc = len(self.comp_shape)
        for ax in reversed(range(self.d)):
            if ax == axis:
                continue
            ph = np.exp(2j * np.pi * k * start[ax])
            c = np.tensordot(c, ph, axes=([nc + ax], [0]))
        return c * np.exp(2j * np.pi * k * start[axis])

    def to_list(self) -> dict:
        return {"re": self.coeffs.real.tolist(), "im": self.coeffs.imag.tolist()}

    @classmethod
    def from_list(cls, d: int, band: int, data: dict) -> "BandField":
        return cls(d, band, np.asarray(data["re"]) + 1j * np.asarray(data["im"]))


def fit_band_field(values: np.ndarray, n: int, d: int, band: int) -> BandField:
    """Interpolating fit of grid samples (row-major ``(n**d, *comp)``) to a band.

    ``n`` must be odd and ``band <= (n-1)//2``.
    """
    vals = np.asarray(values, dtype=float)
    comp = vals.shape[1:]
    grid = np.moveaxis(vals, 0, -1).reshape(comp + (n,) * d)
    axes = tuple(range(len(comp), len(comp) + d))
    hat = np.fft.fftn(grid, axes=axes) / n**d
    idx = np.mod(mode_range(band), n)
    c = hat[(Ellipsis,) + np.ix_(*([idx] * d))]
    return BandField(d, band, c)
