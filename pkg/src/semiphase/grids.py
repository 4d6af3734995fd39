"""Periodic spatial grids and the unitary spectral transform.

The transform convention is F[f](xi) = (2*pi)^(-d/2) * integral e^(-i x.xi) f(x) dx,
discretized on a box [-L, L)^d with the dual grid xi_k = pi*k/L, k in [-N/2, N/2).
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

_TWO_PI = 2.0 * np.pi

# thread count for the large 2D transforms; does not change results
FFT_WORKERS = 2


def _as_tuple(value, dim, name):
    if np.isscalar(value):
        return (value,) * dim
    value = tuple(value)
    if len(value) != dim:
        raise ValueError(f"{name} must be a scalar or a length-{dim} sequence")
    return value


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on the box center + [-L_i, L_i) per axis."""

    dim: int
    n: tuple
    half_extent: tuple
    center: tuple = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        for n in self.n:
            if n < 4 or (n & (n - 1)) != 0:
                raise ValueError(f"points per axis must be a power of two >= 4, got {n}")
        for L in self.half_extent:
            if L <= 0:
                raise ValueError("half_extent must be positive")
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.dim)

    @classmethod
    def create(cls, dim, n, half_extent, center=None):
        c = None if center is None else _as_tuple(center, dim, "center")
        return cls(dim, _as_tuple(n, dim, "n"), _as_tuple(half_extent, dim, "half_extent"), c)

    @property
    def shape(self):
        return self.n

    @property
    def spacing(self):
        return tuple(2.0 * L / n for n, L in zip(self.n, self.half_extent))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis(self, i):
        """Grid coordinates along axis i: c-L, c-L+h, ..., c+L-h."""
        n, L = self.n[i], self.half_extent[i]
        return self.center[i] - L + (2.0 * L / n) * np.arange(n)

    def meshes(self):
        """Dense coordinate meshes (X,) in 1D, (X1, X2) in 2D."""
        axes = [self.axis(i) for i in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumber_axis(self, i, ordered=False):
        """Dual-grid wavenumbers pi*k/L; FFT layout unless ordered=True."""
        n, L = self.n[i], self.half_extent[i]
        k = _TWO_PI * sfft.fftfreq(n, d=2.0 * L / n)
        return np.fft.fftshift(k) if ordered else k

    def wavenumber_meshes(self, ordered=False):
        axes = [self.wavenumber_axis(i, ordered) for i in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def laplacian_symbol(self):
        """|k|^2 on the (unshifted) dual grid."""
        ks = self.wavenumber_meshes(ordered=False)
        return sum(k ** 2 for k in ks)


def l2_norm_sq(grid, values):
    """Grid quadrature of sum_c |values|^2 over all components."""
    return float(np.sum(np.abs(values) ** 2).real * grid.cell_volume)


def l2_norm(grid, values):
    return np.sqrt(l2_norm_sq(grid, values))


def forward_spectral(grid, values):
    """Unitary transform of grid samples; coefficients on the ordered dual grid.

    Round trip with inverse_spectral is the identity to round-off, and the
    discrete Parseval identity holds exactly: sum |c|^2 dk = sum |f|^2 dx.
    On an off-center grid the coefficient phases are relative to the grid
    center (magnitudes are center-independent).
    """
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must be finite")
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    scale = grid.cell_volume * (_TWO_PI) ** (-grid.dim / 2.0)
    shifted = np.fft.ifftshift(values, axes=axes)
    coeffs = sfft.fftn(shifted, axes=axes, workers=FFT_WORKERS)
    return scale * np.fft.fftshift(coeffs, axes=axes)


def inverse_spectral(grid, coeffs):
    """Inverse of forward_spectral (samples on the spatial grid)."""
    coeffs = np.asarray(coeffs)
    axes = tuple(range(coeffs.ndim - grid.dim, coeffs.ndim))
    scale = grid.cell_volume * (_TWO_PI) ** (-grid.dim / 2.0)
    shifted = np.fft.ifftshift(coeffs / scale, axes=axes)
    values = sfft.ifftn(shifted, axes=axes, workers=FFT_WORKERS)
    return np.fft.fftshift(values, axes=axes)


def smooth_window(r, radius, edge):
    """C^3 compactly supported radial cutoff: 1 for r <= radius, 0 beyond radius+edge.

    Polynomial smoothstep of order 7 on the transition band.
    """
    r = np.asarray(r, dtype=float)
    t = np.clip((radius + edge - r) / edge, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)
