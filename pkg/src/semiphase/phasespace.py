"""Phase-space diagnostics: Wigner slices, Husimi densities, moments,
oscillation tests, adiabatic mode masses, and two-scale statistics of the
angular-momentum variable eta = (x ^ xi) / sqrt(eps).

Conventions: the Wigner transform is
    w[f](x, xi) = (2 pi)^(-d) * integral f(x - eps*e/2) conj(f)(x + eps*e/2) e^(i e.xi) de,
so a plane wave e^(i k0 x) concentrates at xi = eps*k0. Dense 2Dx2D Wigner
arrays are refused; 2D analysis goes through windowed (streamed) Husimi masses.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .fields import apply_projector
from .grids import forward_spectral

_MAX_DENSE_CELLS = 1 << 26


@dataclass(frozen=True)
class PhaseSpaceDensity:
    """Real samples of a Wigner or Husimi density on an (x, xi) product grid."""

    x: tuple          # tuple of x-coordinate arrays (one per selected axis set)
    xi: tuple         # tuple of xi-coordinate arrays
    values: np.ndarray
    eps: float
    kind: str         # "wigner" | "husimi"

    @property
    def cell_volume(self):
        vol = 1.0
        for arr in (*self.x, *self.xi):
            vol *= float(arr[1] - arr[0]) if len(arr) > 1 else 1.0
        return vol

    def total_mass(self):
        return float(np.sum(self.values) * self.cell_volume)


@dataclass(frozen=True)
class Observable:
    """Smooth test function a(x, xi) evaluated on phase-space sample points."""

    func: object

    def __call__(self, *args):
        return np.asarray(self.func(*args), dtype=float)


def gaussian_observable(x_center, xi_center, width):
    """Smooth bump (numerically compactly supported) centered in phase space."""

    def a(*args):
        half = len(args) // 2
        r2 = sum((np.asarray(c) - c0) ** 2 for c, c0 in zip(args[:half], np.atleast_1d(x_center)))
        r2 += sum(
            (np.asarray(c) - c0) ** 2 for c, c0 in zip(args[half:], np.atleast_1d(xi_center))
        )
        return np.exp(-r2 / (2.0 * width ** 2))

    return Observable(a)


def _check_eta_resolution(field):
    """The per-x correlation FFT aliases when the field occupies the outer
    half of the dual grid; reject such selections."""
    spec = np.abs(forward_spectral(field.grid, field.values)) ** 2
    axes = tuple(range(spec.ndim - field.grid.dim, spec.ndim))
    total = float(np.sum(spec))
    if total == 0.0:
        return
    for i, ax in enumerate(axes):
        n = field.grid.n[i]
        sl = [slice(None)] * spec.ndim
        sl[ax] = slice(n // 4, 3 * n // 4)
        inner = float(np.sum(spec[tuple(sl)]))
        if total - inner > 1e-6 * total:
            raise ValueError(
                "field spectrum occupies the outer half of the dual grid; the "
                "eta-range of the Wigner slice under-resolves the eps-scale correlation"
            )


def wigner_slice(field, x_select=None, eta_fraction=0.25):
    """Wigner transform at selected spatial points.

    For a 1D field, x_select is an array of grid indices (default: all);
    returns a PhaseSpaceDensity on the xi-grid of spacing pi*eps/(2L). For a
    2D field, x_select is a sequence of (i, j) index pairs. Two-component
    fields are reduced by the trace (sum of per-component transforms).

    The correlation window spans |offset| <= eta_fraction * period; the
    default half-window (0.25) suppresses the periodization ghosts that the
    full window (0.5) produces a half-period away from the support. Zeroing
    only nonzero offsets keeps the xi-moment identity exact either way.
    """
    grid, eps = field.grid, field.eps
    _check_eta_resolution(field)
    comps = field.values[None] if field.components == 1 else field.values

    if grid.dim == 1:
        n = grid.n[0]
        h = grid.spacing[0]
        idx = np.arange(n) if x_select is None else np.asarray(x_select, dtype=int)
        if idx.size * n > _MAX_DENSE_CELLS:
            raise MemoryError("requested Wigner slice is too large; select fewer points")
        m = np.rint(n * sfft.fftfreq(n)).astype(int)  # fft-layout offsets
        keep = (np.abs(m) < eta_fraction * n).astype(float)
        rows = np.zeros((idx.size, n))
        for comp in comps:
            f_minus = comp[(idx[:, None] - m[None, :]) % n]
            f_plus = comp[(idx[:, None] + m[None, :]) % n]
            kern = f_minus * np.conj(f_plus) * keep[None, :]
            w = n * sfft.ifft(kern, axis=1)
            rows += np.fft.fftshift(w, axes=1).real
        d_eta = 2.0 * h / eps
        rows *= d_eta / (2.0 * np.pi)
        xi = np.fft.fftshift(2.0 * np.pi * sfft.fftfreq(n, d=d_eta))
        return PhaseSpaceDensity((grid.axis(0)[idx],), (xi,), rows, eps, "wigner")

    # 2D: per-point eta-FFT
    pts = np.asarray(x_select, dtype=int)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("for 2D fields x_select must be a list of (i, j) index pairs")
    n1, n2 = grid.n
    if pts.shape[0] * n1 * n2 > _MAX_DENSE_CELLS:
        raise MemoryError("requested Wigner slice is too large; select fewer points")
    h1, h2 = grid.spacing
    m1 = np.rint(n1 * sfft.fftfreq(n1)).astype(int)[:, None]
    m2 = np.rint(n2 * sfft.fftfreq(n2)).astype(int)[None, :]
    keep = ((np.abs(m1) < eta_fraction * n1) & (np.abs(m2) < eta_fraction * n2)).astype(float)
    out = np.zeros((pts.shape[0], n1, n2))
    for comp in comps:
        for p, (i, j) in enumerate(pts):
            kern = (
                comp[(i - m1) % n1, (j - m2) % n2]
                * np.conj(comp[(i + m1) % n1, (j + m2) % n2])
                * keep
            )
            w = (n1 * n2) * sfft.ifft2(kern)
            out[p] += np.fft.fftshift(w).real
    d_eta1, d_eta2 = 2.0 * h1 / eps, 2.0 * h2 / eps
    out *= d_eta1 * d_eta2 / (2.0 * np.pi) ** 2
    xi1 = np.fft.fftshift(2.0 * np.pi * sfft.fftfreq(n1, d=d_eta1))
    xi2 = np.fft.fftshift(2.0 * np.pi * sfft.fftfreq(n2, d=d_eta2))
    x1 = grid.axis(0)[pts[:, 0]]
    x2 = grid.axis(1)[pts[:, 1]]
    return PhaseSpaceDensity((x1, x2), (xi1, xi2), out, eps, "wigner")


def density_moment(density_or_field):
    """Zeroth xi-moment of a Wigner density (= |psi|^2 as a discrete identity),
    or directly |psi|^2 for a field."""
    if hasattr(density_or_field, "density"):
        return density_or_field.density()
    dens = density_or_field
    d_xi = 1.0
    for arr in dens.xi:
        d_xi *= float(arr[1] - arr[0])
    axes = tuple(range(dens.values.ndim - len(dens.xi), dens.values.ndim))
    return np.sum(dens.values, axis=axes) * d_xi


def husimi(field, x_stride=None, window_halfwidth=None, pad=2):
    """Husimi density of a 1D field via coherent-state overlaps.

    H(x0, xi0) = |<g_{x0,xi0}, psi>|^2 / (2 pi eps) with the standard window of
    variance eps (so a coherent state maps to a Gaussian of variance eps in
    both x and xi). Nonnegative by construction; total mass equals ||psi||^2
    to the accuracy of the x0 Riemann sum (stride default ~ sqrt(eps)/2).
    """
    grid, eps = field.grid, field.eps
    if grid.dim != 1:
        raise ValueError("dense husimi is 1D; use two_scale_histogram for 2D statistics")
    n = grid.n[0]
    h = grid.spacing[0]
    root = np.sqrt(eps)
    if x_stride is None:
        x_stride = max(1, int(np.floor(0.5 * root / h)))
    if window_halfwidth is None:
        window_halfwidth = 6.5 * root
    mhalf = int(np.ceil(window_halfwidth / h))
    mlen = sfft.next_fast_len(pad * (2 * mhalf + 1))

    x = grid.axis(0)
    centers = np.arange(0, n, x_stride)
    offsets = np.arange(-mhalf, mhalf + 1)
    gauss = (np.pi * eps) ** (-0.25) * np.exp(-((offsets * h) ** 2) / (2.0 * eps))

    comps = field.values[None] if field.components == 1 else field.values
    out = np.zeros((centers.size, mlen))
    for comp in comps:
        windows = comp[(centers[:, None] + offsets[None, :]) % n] * gauss[None, :]
        spec = sfft.fft(windows, n=mlen, axis=1)
        out += np.abs(spec) ** 2
    out = np.fft.fftshift(out, axes=1)
    out *= h * h / (2.0 * np.pi * eps)
    k = np.fft.fftshift(2.0 * np.pi * sfft.fftfreq(mlen, d=h))
    return PhaseSpaceDensity((x[centers],), (eps * k,), out, eps, "husimi")


def pair_observable(density, observable):
    """Quadrature of density * a(x, xi) over the phase-space grid."""
    if len(density.x) == 2 and density.values.ndim == 3:
        # 2D point-selected slice: axes are (point, xi1, xi2)
        xi = np.meshgrid(*density.xi, indexing="ij")
        total = 0.0
        d_xi = float(np.prod([a[1] - a[0] for a in density.xi]))
        for p in range(density.values.shape[0]):
            a = observable(density.x[0][p], density.x[1][p], *xi)
            total += float(np.sum(density.values[p] * a)) * d_xi
        return total
    meshes = np.meshgrid(*density.x, *density.xi, indexing="ij")
    vals = observable(*meshes)
    return float(np.sum(density.values * vals) * density.cell_volume)


def eps_oscillatory_fraction(field, cutoff, radius):
    """Spectral mass fraction of (cutoff * field) beyond |k| >= radius/eps.

    Vanishing fractions as radius grows certify that oscillations live at
    wavelength >= eps. Warns and returns 0 when radius/eps exceeds the dual
    grid (the test is vacuous on this grid).
    """
    grid, eps = field.grid, field.eps
    coords = grid.meshes()
    phi = np.asarray(cutoff(*coords), dtype=float) if cutoff is not None else 1.0
    vals = field.values * phi
    spec = np.abs(forward_spectral(grid, vals)) ** 2
    ks = grid.wavenumber_meshes(ordered=True)
    k_abs = np.sqrt(sum(k ** 2 for k in ks))
    threshold = radius / eps
    if threshold > float(np.max(k_abs)):
        warnings.warn(
            f"radius/eps = {threshold:.3g} exceeds the dual-grid extent "
            f"{float(np.max(k_abs)):.3g}; returning 0",
            stacklevel=2,
        )
        return 0.0
    total = float(np.sum(spec))
    if total == 0.0:
        return 0.0
    outer = float(np.sum(spec[..., k_abs >= threshold]))
    return outer / total


def mode_masses(field, exclusion_radius):
    """(m_plus, m_minus, m_core): adiabatic mode masses outside |x| <= delta0
    and the mass inside. Sums exactly to ||psi||^2."""
    if field.components != 2 or field.grid.dim != 2:
        raise ValueError("mode masses require a 2-component field on a 2D grid")
    x1, x2 = field.grid.meshes()
    r = np.hypot(x1, x2)
    outside = r > exclusion_radius
    vol = field.grid.cell_volume
    plus = apply_projector(field, "+").values
    minus = apply_projector(field, "-").values
    dens_p = np.abs(plus[0]) ** 2 + np.abs(plus[1]) ** 2
    dens_m = np.abs(minus[0]) ** 2 + np.abs(minus[1]) ** 2
    dens = field.density()
    m_plus = float(np.sum(dens_p[outside]) * vol)
    m_minus = float(np.sum(dens_m[outside]) * vol)
    m_core = float(np.sum(dens[~outside]) * vol)
    return m_plus, m_minus, m_core


# ---------------------------------------------------------------------------
# two-scale statistics on J = {x ^ xi = 0}

@dataclass(frozen=True)
class TwoScaleHistogram:
    """Husimi mass binned by eta = (x ^ xi)/sqrt(eps), with +/- overflow bins."""

    edges: np.ndarray      # interior bin edges, length nbins+1
    weights: np.ndarray    # interior bin weights, length nbins
    overflow: np.ndarray   # (mass at eta < -eta_max, mass at eta > +eta_max)
    eps: float

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def total_weight(self):
        return float(np.sum(self.weights) + np.sum(self.overflow))

    def overflow_fraction(self):
        tot = self.total_weight()
        return float(np.sum(self.overflow) / tot) if tot > 0 else 0.0

    def normalized(self):
        """Interior weights as a probability density over eta."""
        bw = self.edges[1] - self.edges[0]
        tot = float(np.sum(self.weights))
        return self.weights / (tot * bw) if tot > 0 else self.weights


def two_scale_histogram(
    field,
    mode=None,
    eta_max=6.0,
    nbins=101,
    window_sigma=None,
    center_spacing=None,
    pad=2,
    support_tol=1e-8,
):
    """eta-statistics of a 2D field from streamed squeezed-window Husimi mass.

    The field (optionally projected on an adiabatic mode first) is tested
    against L2-normalized Gaussian windows of spatial scale window_sigma
    (default 3 sqrt(eps); the conjugate momentum blur is eps/(2 sigma), so the
    induced eta-blur is |x| sqrt(eps)/(2 sigma) plus |xi| sigma/sqrt(eps)).
    Husimi mass at each phase-space sample is accumulated into eta-bins;
    |eta| > eta_max lands in overflow bins. Warns when more than half of the
    mass overflows (concentration at eta = +/- infinity).
    """
    grid, eps = field.grid, field.eps
    if grid.dim != 2:
        raise ValueError("two-scale statistics require a 2D field")
    if mode is not None:
        if field.components != 2:
            raise ValueError("mode selection requires a 2-component field")
        field = apply_projector(field, mode)
    comps = field.values[None] if field.components == 1 else field.values

    s = window_sigma if window_sigma is not None else 3.0 * np.sqrt(eps)
    a = center_spacing if center_spacing is not None else 0.75 * s
    reach = 4.5 * s

    # bounding box of the field support, padded by the window reach
    dens = field.density()
    peak = float(np.max(dens))
    if peak == 0.0:
        edges = np.linspace(-eta_max, eta_max, nbins + 1)
        return TwoScaleHistogram(edges, np.zeros(nbins), np.zeros(2), eps)
    mask = dens > support_tol * peak
    x1ax, x2ax = grid.axis(0), grid.axis(1)
    i_any = np.where(np.any(mask, axis=1))[0]
    j_any = np.where(np.any(mask, axis=0))[0]
    lo1, hi1 = x1ax[i_any[0]] - reach, x1ax[i_any[-1]] + reach
    lo2, hi2 = x2ax[j_any[0]] - reach, x2ax[j_any[-1]] + reach

    h1, h2 = grid.spacing
    n1, n2 = grid.n
    c1 = np.arange(lo1, hi1 + a / 2, a)
    c2 = np.arange(lo2, hi2 + a / 2, a)

    # window sub-array: field support plus decay margin, fixed size
    i0, i1 = max(i_any[0] - int(reach / h1) - 1, 0), min(i_any[-1] + int(reach / h1) + 2, n1)
    j0, j1 = max(j_any[0] - int(reach / h2) - 1, 0), min(j_any[-1] + int(reach / h2) + 2, n2)
    sub = [comp[i0:i1, j0:j1] for comp in comps]
    xs1 = x1ax[i0:i1]
    xs2 = x2ax[j0:j1]
    m1 = sfft.next_fast_len(pad * xs1.size)
    m2 = sfft.next_fast_len(pad * xs2.size)
    k1 = 2.0 * np.pi * sfft.fftfreq(m1, d=h1)
    k2 = 2.0 * np.pi * sfft.fftfreq(m2, d=h2)
    xi1 = (eps * k1)[:, None]
    xi2 = (eps * k2)[None, :]

    edges = np.linspace(-eta_max, eta_max, nbins + 1)
    weights = np.zeros(nbins)
    overflow = np.zeros(2)
    norm = 1.0 / (2.0 * np.pi * s ** 2)          # |window|^2 normalization
    cell = (a * a) * (eps * (k1[1] - k1[0])) * (eps * (k2[1] - k2[0])) / (2.0 * np.pi * eps) ** 2

    X1 = xs1[:, None]
    X2 = xs2[None, :]
    bin_width = 2.0 * eta_max / nbins
    root_eps = np.sqrt(eps)
    for x0 in c1:
        g1 = np.exp(-((X1 - x0) ** 2) / (4.0 * s ** 2))
        for y0 in c2:
            g = g1 * np.exp(-((X2 - y0) ** 2) / (4.0 * s ** 2))
            hmass = np.zeros((m1, m2))
            for comp in sub:
                spec = sfft.fft2(comp * g, s=(m1, m2))
                hmass += np.abs(spec) ** 2
            flat = (hmass * ((h1 * h2) ** 2 * norm * cell)).ravel()
            eta = ((x0 * xi2 - y0 * xi1) / root_eps).ravel()
            neg = eta < -eta_max
            pos = eta > eta_max
            overflow[0] += float(np.sum(flat[neg]))
            overflow[1] += float(np.sum(flat[pos]))
            inside = ~(neg | pos)
            idx = np.minimum(((eta[inside] + eta_max) / bin_width).astype(int), nbins - 1)
            weights += np.bincount(idx, weights=flat[inside], minlength=nbins)

    hist = TwoScaleHistogram(edges, weights, overflow, eps)
    if hist.overflow_fraction() > 0.5:
        warnings.warn(
            "more than half of the two-scale mass lies beyond |eta| = "
            f"{eta_max}; the family concentrates at eta = +/- infinity",
            stacklevel=2,
        )
    return hist


def two_scale_limit_density(profile, x0, eta):
    """Limit eta-density of a width-sqrt(eps) packet at x0: the Fourier mass of
    the envelope along the line r*x0_hat + (eta/|x0|) x0_perp_hat, integrated
    over r. Returned unnormalized on the given eta grid."""
    x0 = np.asarray(x0, dtype=float)
    r0 = float(np.hypot(x0[0], x0[1]))
    u = x0 / r0
    uperp = np.array([-u[1], u[0]])
    eta = np.asarray(eta, dtype=float)
    if hasattr(profile, "fourier"):
        width = getattr(profile, "width", 1.0)
        rmax = 10.0 / width
        r = np.linspace(-rmax, rmax, 4001)
        vals = np.empty_like(eta)
        for i, e in enumerate(eta):
            k1 = r * u[0] + (e / r0) * uperp[0]
            k2 = r * u[1] + (e / r0) * uperp[1]
            vals[i] = np.trapezoid(np.abs(profile.fourier(k1, k2)) ** 2, r)
        return vals / r0
    raise TypeError("profile must expose a .fourier(k1, k2) transform")
