"""Wave fields, initial-data constructors, potentials, and the adiabatic frame
of the 2x2 conical-intersection potential V(x) = [[x1, x2], [x2, -x1]].

Fields are immutable by convention: operations return new arrays.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import SpatialGrid, forward_spectral, l2_norm, l2_norm_sq


class DegeneratePointError(ValueError):
    """Raised when the adiabatic frame is requested at (or too close to) x = 0."""


class ResolutionWarning(UserWarning):
    """Grid spacing does not resolve the local phase gradient."""


@dataclass(frozen=True)
class WaveField:
    """Complex samples of a 1- or 2-component wave function on a periodic grid.

    values has shape grid.shape for one component and (2,) + grid.shape for
    spinor fields.
    """

    grid: SpatialGrid
    values: np.ndarray
    eps: float = 1.0

    def __post_init__(self):
        if self.eps <= 0 or self.eps > 1:
            raise ValueError("eps must lie in (0, 1]")
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape and vals.shape != (2,) + self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def components(self):
        return 1 if self.values.shape == self.grid.shape else 2

    def norm_sq(self):
        return l2_norm_sq(self.grid, self.values)

    def norm(self):
        return l2_norm(self.grid, self.values)

    def density(self):
        """Position density: |psi|^2, summed over components."""
        if self.components == 1:
            return np.abs(self.values) ** 2
        return np.abs(self.values[0]) ** 2 + np.abs(self.values[1]) ** 2

    def spectrum(self):
        return forward_spectral(self.grid, self.values)

    def with_values(self, values):
        return WaveField(self.grid, values, self.eps)


@dataclass(frozen=True)
class GaussianProfile:
    """Isotropic Gaussian envelope exp(-|y|^2 / (2 w^2)) with amplitude A."""

    width: float = 1.0
    amplitude: float = 1.0
    dim: int = 1

    def __call__(self, *ys):
        r2 = sum(np.asarray(y) ** 2 for y in ys)
        return self.amplitude * np.exp(-r2 / (2.0 * self.width ** 2))

    def norm(self):
        """Exact L2 norm of the profile."""
        return abs(self.amplitude) * (np.pi * self.width ** 2) ** (self.dim / 4.0)

    def fourier(self, *ks):
        """Unitary Fourier transform, A * w^d * exp(-w^2 |k|^2 / 2)."""
        k2 = sum(np.asarray(k) ** 2 for k in ks)
        return self.amplitude * self.width ** self.dim * np.exp(-self.width ** 2 * k2 / 2.0)


def _eval_profile(profile, *coords):
    if callable(profile):
        return np.asarray(profile(*coords), dtype=np.complex128)
    return np.asarray(profile, dtype=np.complex128)


def check_phase_resolution(grid, grad_phase_over_eps_max, what="phase"):
    """Warn when the local wavenumber exceeds pi / (2 h)."""
    hmax = max(grid.spacing)
    if grad_phase_over_eps_max > np.pi / (2.0 * hmax):
        warnings.warn(
            f"{what} gradient {grad_phase_over_eps_max:.3g} exceeds pi/(2h) = "
            f"{np.pi / (2 * hmax):.3g}; the grid under-resolves the oscillation",
            ResolutionWarning,
            stacklevel=3,
        )


def build_wkb_data(grid, eps, amplitude, phase):
    """Oscillatory data a0(x) * exp(i phi0(x) / eps).

    amplitude and phase may be callables on the grid coordinates or sample
    arrays. Warns when the grid does not resolve grad(phi0)/eps.
    """
    coords = grid.meshes()
    a0 = _eval_profile(amplitude, *coords)
    phi0 = np.asarray(phase(*coords) if callable(phase) else phase, dtype=float)
    grads = np.gradient(phi0, *[grid.axis(i) for i in range(grid.dim)]) if grid.dim > 1 else [
        np.gradient(phi0, grid.axis(0))
    ]
    gmax = max(float(np.max(np.abs(g))) for g in grads)
    check_phase_resolution(grid, gmax / eps, what="WKB phase")
    return WaveField(grid, a0 * np.exp(1j * phi0 / eps), eps)


def build_wave_packet(
    grid,
    eps,
    beta,
    center,
    profile,
    quad_phase_rate=0.0,
    offset_exponent=0.5,
    offset=None,
    polarization=None,
    phase=0.0,
):
    """Concentrated packet eps^(-beta d/2) Phi((x-x0)/eps^beta) e^{i r0 |x - eps^alpha w0|^2 / (2 eps)}.

    polarization: None for a scalar field, '+'/'-' to multiply by the
    corresponding unit eigenvector field of the conical potential. phase adds
    a constant factor e^{i phase}.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not 0.0 < offset_exponent <= 0.5:
        raise ValueError("offset exponent alpha must lie in (0, 1/2]")
    d = grid.dim
    center = np.atleast_1d(np.asarray(center, dtype=float))
    offset = np.zeros(d) if offset is None else np.atleast_1d(np.asarray(offset, dtype=float))

    scale = eps ** beta
    width = scale * getattr(profile, "width", 1.0)
    if width < 4.0 * max(grid.spacing):
        raise ValueError(
            f"packet width {width:.3g} is under 4 grid spacings ({4 * max(grid.spacing):.3g})"
        )

    coords = grid.meshes()
    env = _eval_profile(profile, *[(c - x0) / scale for c, x0 in zip(coords, center)])
    vals = (eps ** (-beta * d / 2.0)) * env
    r0 = quad_phase_rate
    if r0 != 0.0:
        shift = (eps ** offset_exponent) * offset
        sq = sum((c - s) ** 2 for c, s in zip(coords, shift))
        vals = vals * np.exp(1j * r0 * sq / (2.0 * eps))
        # local wavenumber of the quadratic phase over the packet support
        reach = max(float(np.max(np.abs(c - x0))) for c, x0 in zip(coords, center))
        kmax = abs(r0) * min(reach, np.linalg.norm(center) + 5 * width + np.linalg.norm(shift))
        check_phase_resolution(grid, kmax / eps, what="packet phase")
    if phase != 0.0:
        vals = vals * np.exp(1j * phase)

    if polarization is None:
        return WaveField(grid, vals, eps)
    if d != 2:
        raise ValueError("polarized packets require a 2D grid")
    e1, e2 = eigenvector_field(coords[0], coords[1], polarization)
    return WaveField(grid, np.stack([vals * e1, vals * e2]), eps)


# ---------------------------------------------------------------------------
# adiabatic frame of V(x) = [[x1, x2], [x2, -x1]]

def conical_matrix(x1, x2):
    """The 2x2 potential entries as arrays (v11, v12) with v22 = -v11."""
    return np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)


def eigenvector_field(x1, x2, sign):
    """Unit eigenvector field E+/E- with the branch cut on the ray theta = pi.

    E+(x) = (cos(theta/2), sin(theta/2)), E-(x) = (-sin(theta/2), cos(theta/2)),
    where x = |x| (cos theta, sin theta), theta in (-pi, pi].
    """
    theta = np.arctan2(x2, x1)
    if sign in ("+", +1):
        return np.cos(theta / 2.0), np.sin(theta / 2.0)
    if sign in ("-", -1):
        return -np.sin(theta / 2.0), np.cos(theta / 2.0)
    raise ValueError("sign must be '+' or '-'")


def eigenframe_at(x, tol=1e-12):
    """Eigenvalues, projectors and eigenvectors of the conical potential at a point.

    Returns a dict with lambda_plus/lambda_minus, E_plus/E_minus (unit vectors),
    and P_plus/P_minus (2x2 projectors). Raises DegeneratePointError at |x| <= tol.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    if r <= tol:
        raise DegeneratePointError(f"adiabatic frame undefined at |x| = {r:.3g}")
    ep = np.array(eigenvector_field(x[0], x[1], "+"))
    em = np.array(eigenvector_field(x[0], x[1], "-"))
    v = np.array([[x[0], x[1]], [x[1], -x[0]]]) / r
    eye = np.eye(2)
    return {
        "lambda_plus": r,
        "lambda_minus": -r,
        "E_plus": ep,
        "E_minus": em,
        "P_plus": 0.5 * (eye + v),
        "P_minus": 0.5 * (eye - v),
    }


def apply_projector(field, sign):
    """Pointwise spectral projector Pi+/Pi- applied to a spinor field.

    At grid points with |x| = 0 the projector is taken as I/2 (the potential
    vanishes there; mode masses exclude a neighborhood of the origin anyway).
    """
    if field.components != 2:
        raise ValueError("projectors act on 2-component fields")
    x1, x2 = field.grid.meshes()
    r = np.hypot(x1, x2)
    safe = np.where(r > 0, r, 1.0)
    n1 = np.where(r > 0, x1 / safe, 0.0)
    n2 = np.where(r > 0, x2 / safe, 0.0)
    s = 1.0 if sign in ("+", +1) else -1.0
    u, v = field.values[0], field.values[1]
    out1 = 0.5 * ((1.0 + s * n1) * u + s * n2 * v)
    out2 = 0.5 * (s * n2 * u + (1.0 - s * n1) * v)
    return field.with_values(np.stack([out1, out2]))


# ---------------------------------------------------------------------------
# potential specifications

@dataclass(frozen=True)
class ScalarPotential:
    """Real scalar potential V(x), given as a callable on grid coordinates."""

    func: object

    def sample(self, grid):
        vals = np.asarray(self.func(*grid.meshes()), dtype=float)
        return np.broadcast_to(vals, grid.shape).copy()


@dataclass(frozen=True)
class TimeDependentPotential:
    """Real scalar potential V(t, x); evaluated at substep midpoints."""

    func: object

    def sample(self, grid, t):
        vals = np.asarray(self.func(t, *grid.meshes()), dtype=float)
        return np.broadcast_to(vals, grid.shape).copy()


@dataclass(frozen=True)
class ConicalPotential:
    """The fixed 2x2 matrix potential [[x1, x2], [x2, -x1]] on a 2D grid."""


@dataclass(frozen=True)
class EvenPotential1D:
    """Even short-range scattering potential U(x) in one dimension."""

    func: object

    def sample(self, grid):
        (x,) = grid.meshes()
        vals = np.asarray(self.func(x), dtype=float)
        edge = max(abs(vals[0]), abs(vals[-1]))
        if edge > 1e-12:
            raise ValueError(f"potential does not decay within the box (edge value {edge:.3g})")
        return vals


def harmonic_potential(omega=1.0):
    return ScalarPotential(lambda *xs: 0.5 * omega ** 2 * sum(np.asarray(x) ** 2 for x in xs))
