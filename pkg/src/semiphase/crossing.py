"""Landau-Zener laboratory: the reduced 2x2 avoided-crossing ODE, transfer
matrix extraction, out-mass predictions for two-packet crossing data, and the
full 2D spinor experiments.

The reduced model (eps/i) d_s u = [[s, z1], [z1, -s]] u is integrated in the
rescaled variable sigma = s/sqrt(eps), where it becomes eps-free with gap
lambda = z1/sqrt(eps): du/dsigma = i [[sigma, lambda], [lambda, -sigma]] u.
In/out amplitudes are read in the stripped frame that removes the phases
e^{+/- i sigma^2/2} |sigma|^{+/- i lambda^2/2}, so they plateau at the window
ends; the transfer law is a(lambda) = e^{-pi lambda^2 / 2}.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import ConicalPotential, GaussianProfile, build_wave_packet
from .grids import SpatialGrid
from .phasespace import mode_masses
from .propagate import HamiltonianSpec, StrangPropagator
from .rays import CrossingGeometry, detect_crossing, flow_mode, transfer_probability

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


class NonPlateauError(RuntimeError):
    """Stripped amplitudes did not settle over the averaging window (S too small)."""


@njit(cache=True)
def _dp45_segment(lam, s0, s1, u1, u2, rtol, atol):
    """Adaptive Dormand-Prince 5(4) from s0 to s1 for the rescaled 2x2 system."""
    h = (s1 - s0) * 1e-3
    if h == 0.0:
        return u1, u2, 0
    hmax = abs(s1 - s0)
    s = s0
    nev = 0
    f1a = 1j * (s * u1 + lam * u2)
    f1b = 1j * (lam * u1 - s * u2)
    while s < s1 - 1e-14 * max(1.0, abs(s1)):
        if s + h > s1:
            h = s1 - s
        # stages
        sa = s + 0.2 * h
        ya = u1 + h * 0.2 * f1a
        yb = u2 + h * 0.2 * f1b
        f2a = 1j * (sa * ya + lam * yb)
        f2b = 1j * (lam * ya - sa * yb)
        sa = s + 0.3 * h
        ya = u1 + h * (0.075 * f1a + 0.225 * f2a)
        yb = u2 + h * (0.075 * f1b + 0.225 * f2b)
        f3a = 1j * (sa * ya + lam * yb)
        f3b = 1j * (lam * ya - sa * yb)
        sa = s + 0.8 * h
        ya = u1 + h * ((44.0 / 45.0) * f1a - (56.0 / 15.0) * f2a + (32.0 / 9.0) * f3a)
        yb = u2 + h * ((44.0 / 45.0) * f1b - (56.0 / 15.0) * f2b + (32.0 / 9.0) * f3b)
        f4a = 1j * (sa * ya + lam * yb)
        f4b = 1j * (lam * ya - sa * yb)
        sa = s + (8.0 / 9.0) * h
        ya = u1 + h * (
            (19372.0 / 6561.0) * f1a
            - (25360.0 / 2187.0) * f2a
            + (64448.0 / 6561.0) * f3a
            - (212.0 / 729.0) * f4a
        )
        yb = u2 + h * (
            (19372.0 / 6561.0) * f1b
            - (25360.0 / 2187.0) * f2b
            + (64448.0 / 6561.0) * f3b
            - (212.0 / 729.0) * f4b
        )
        f5a = 1j * (sa * ya + lam * yb)
        f5b = 1j * (lam * ya - sa * yb)
        sa = s + h
        ya = u1 + h * (
            (9017.0 / 3168.0) * f1a
            - (355.0 / 33.0) * f2a
            + (46732.0 / 5247.0) * f3a
            + (49.0 / 176.0) * f4a
            - (5103.0 / 18656.0) * f5a
        )
        yb = u2 + h * (
            (9017.0 / 3168.0) * f1b
            - (355.0 / 33.0) * f2b
            + (46732.0 / 5247.0) * f3b
            + (49.0 / 176.0) * f4b
            - (5103.0 / 18656.0) * f5b
        )
        f6a = 1j * (sa * ya + lam * yb)
        f6b = 1j * (lam * ya - sa * yb)
        y5a = u1 + h * (
            (35.0 / 384.0) * f1a
            + (500.0 / 1113.0) * f3a
            + (125.0 / 192.0) * f4a
            - (2187.0 / 6784.0) * f5a
            + (11.0 / 84.0) * f6a
        )
        y5b = u2 + h * (
            (35.0 / 384.0) * f1b
            + (500.0 / 1113.0) * f3b
            + (125.0 / 192.0) * f4b
            - (2187.0 / 6784.0) * f5b
            + (11.0 / 84.0) * f6b
        )
        f7a = 1j * (sa * y5a + lam * y5b)
        f7b = 1j * (lam * y5a - sa * y5b)
        erra = h * (
            (71.0 / 57600.0) * f1a
            - (71.0 / 16695.0) * f3a
            + (71.0 / 1920.0) * f4a
            - (17253.0 / 339200.0) * f5a
            + (22.0 / 525.0) * f6a
            - (1.0 / 40.0) * f7a
        )
        errb = h * (
            (71.0 / 57600.0) * f1b
            - (71.0 / 16695.0) * f3b
            + (71.0 / 1920.0) * f4b
            - (17253.0 / 339200.0) * f5b
            + (22.0 / 525.0) * f6b
            - (1.0 / 40.0) * f7b
        )
        nev += 6
        sc_a = atol + rtol * max(abs(u1), abs(y5a))
        sc_b = atol + rtol * max(abs(u2), abs(y5b))
        err = math.sqrt(0.5 * ((abs(erra) / sc_a) ** 2 + (abs(errb) / sc_b) ** 2))
        if err <= 1.0:
            s += h
            u1, u2 = y5a, y5b
            f1a, f1b = f7a, f7b  # first-same-as-last
        fac = 0.9 * err ** (-0.2) if err > 0 else 5.0
        if fac < 0.2:
            fac = 0.2
        elif fac > 5.0:
            fac = 5.0
        h *= fac
        if h > hmax:
            h = hmax
    return u1, u2, nev


def _integrate_samples(lam, sigma_pts, u0, rtol, atol):
    u = np.empty((len(sigma_pts), 2), dtype=np.complex128)
    u1, u2 = complex(u0[0]), complex(u0[1])
    u[0, 0], u[0, 1] = u1, u2
    for i in range(1, len(sigma_pts)):
        u1, u2, _ = _dp45_segment(lam, sigma_pts[i - 1], sigma_pts[i], u1, u2, rtol, atol)
        u[i, 0], u[i, 1] = u1, u2
    return u


def _strip_phases(lam, sigma, u):
    theta = 0.5 * sigma ** 2 + 0.5 * lam ** 2 * np.log(np.abs(sigma))
    v = np.empty_like(u)
    v[:, 0] = u[:, 0] * np.exp(-1j * theta)
    v[:, 1] = u[:, 1] * np.exp(1j * theta)
    return v


@dataclass(frozen=True)
class NormalFormState:
    lam: float
    eps: float
    window: float              # S, in the unscaled variable
    sigma_window: float        # S / sqrt(eps)
    alpha_in: np.ndarray       # requested in-amplitudes
    alpha_meas: np.ndarray     # plateau average over the incoming window
    omega: np.ndarray          # plateau average over the outgoing window
    in_drift: float
    out_drift: float

    def norm_mismatch(self):
        return abs(float(np.sum(np.abs(self.omega) ** 2) - np.sum(np.abs(self.alpha_in) ** 2)))


def _theta(lam, sigma):
    return 0.5 * sigma ** 2 + 0.5 * lam ** 2 * np.log(np.abs(sigma))


def _theta_uniform_window(lam, s_inner, s_outer, per_period=8, max_periods=1024):
    """Sample points of a window [s_inner, s_outer] (positive branch) placed
    uniformly in the stripped phase theta over whole periods anchored at the
    outer end, so the leading oscillatory transient sums to zero exactly."""
    th_in, th_out = _theta(lam, s_inner), _theta(lam, s_outer)
    n_per = int(min(max_periods, np.floor((th_out - th_in) / (2.0 * np.pi))))
    if n_per < 1:
        return np.linspace(s_inner, s_outer, 64)
    thetas = th_out - 2.0 * np.pi * np.arange(n_per * per_period)[::-1] / per_period
    sig = np.sqrt(2.0 * np.maximum(thetas, 1.0))
    for _ in range(4):
        sig = sig - (_theta(lam, sig) - thetas) / (sig + 0.5 * lam ** 2 / sig)
    return sig


def _plateau(lam, sigma, v):
    """Plateau amplitudes over an averaging window.

    Least-squares fit of each stripped component against the asymptotic
    transient basis {1, sigma^-2, e^(-2i theta)/sigma, e^(+2i theta)/sigma}
    on theta-uniform samples; the sigma->infinity limit of the fit is the
    plateau. The drift diagnostic compares plain half-window means.
    """
    theta = _theta(lam, np.abs(sigma))
    ones = np.ones_like(sigma, dtype=np.complex128)
    osc_m = np.exp(-2j * theta) / sigma
    osc_p = np.exp(2j * theta) / sigma
    cols = [ones, osc_m, osc_p]
    # the secular sigma^-2 column is resolvable only when the window spans a
    # nontrivial range; elsewhere it is collinear with 1 and smaller than the
    # residual, so it is absorbed into the constant
    rel_span = float((np.max(np.abs(sigma)) - np.min(np.abs(sigma))) / np.max(np.abs(sigma)))
    sec = np.asarray(sigma, dtype=np.complex128) ** -2.0
    sec_mean = sec.mean()
    if rel_span > 0.05:
        cols.insert(1, sec - sec_mean)
    basis = np.column_stack(cols)
    out = np.empty(2, dtype=np.complex128)
    for c in (0, 1):
        coef, *_ = np.linalg.lstsq(basis, v[:, c], rcond=None)
        out[c] = coef[0] - (coef[1] * sec_mean if rel_span > 0.05 else 0.0)
    half = len(v) // 2
    drift = float(np.max(np.abs(v[half:].mean(axis=0) - v[:half].mean(axis=0))))
    return out, drift


def solve_normal_form(
    lam,
    eps,
    window=None,
    alpha=(1.0, 0.0),
    rtol=1e-12,
    atol=1e-14,
    drift_tol=0.01,
):
    """Integrate the avoided-crossing model across the window [-S, S].

    window is S in the unscaled variable (default 2 max(1, |lambda|), so the
    rescaled half-window is 2 max(1, |lambda|)/sqrt(eps)). In/out amplitudes
    are plateau values of the stripped state over the outer 10% on each side;
    half-window mean drifts above drift_tol raise NonPlateauError.
    """
    if eps <= 0 or eps > 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    S = 2.0 * max(1.0, abs(lam)) if window is None else float(window)
    if S < 10.0 * max(1.0, abs(lam)) * np.sqrt(eps):
        raise ValueError(
            f"window S = {S:g} below the minimum 10*max(1,|lam|)*sqrt(eps) = "
            f"{10 * max(1.0, abs(lam)) * np.sqrt(eps):g}"
        )
    big = S / np.sqrt(eps)
    # theta-uniform samples over the outer 10% windows; the incoming window is
    # the mirror image of the positive-branch sample set
    pos = _theta_uniform_window(lam, 0.9 * big, big)
    sin = -pos[::-1]
    sout = pos
    n_in = sin.size

    alpha = np.asarray(alpha, dtype=np.complex128)
    theta0 = _theta(lam, sin[0])
    u0 = np.array([alpha[0] * np.exp(1j * theta0), alpha[1] * np.exp(-1j * theta0)])

    pts = np.concatenate([sin, sout])
    u = _integrate_samples(float(lam), pts, u0, rtol, atol)
    v_in = _strip_phases(lam, sin, u[:n_in])
    v_out = _strip_phases(lam, sout, u[n_in:])

    alpha_meas, in_drift = _plateau(lam, sin, v_in)
    omega, out_drift = _plateau(lam, sout, v_out)
    scale = max(1.0, float(np.max(np.abs(alpha))))
    if max(in_drift, out_drift) > drift_tol * scale:
        raise NonPlateauError(
            f"stripped amplitudes drift by {max(in_drift, out_drift):.3g} "
            f"over the averaging window; increase the window S = {S:g}"
        )
    return NormalFormState(float(lam), float(eps), S, float(big), alpha, alpha_meas,
                           omega, in_drift, out_drift)


def transfer_amplitude_theory(lam):
    """Closed-form diagonal amplitude a(lambda) = exp(-pi lambda^2 / 2)."""
    return float(np.exp(-0.5 * np.pi * np.asarray(lam, dtype=float) ** 2))


@dataclass(frozen=True)
class TransferMatrix:
    matrix: np.ndarray       # measured 2x2 in->out map, phase-fixed
    a: float                 # real diagonal entry, in (0, 1]
    b: complex               # off-diagonal entry

    def unitarity_defect(self):
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(2), ord=2))


def extract_transfer(state_a, state_b):
    """Measured transfer matrix from two runs with independent in-vectors.

    Solves omega = M alpha with the *measured* in-plateaus: the injected state
    at -S carries an O(1/S) transient dressing, and the measured pair of the
    same solution cancels it.
    """
    a_mat = np.column_stack([state_a.alpha_meas, state_b.alpha_meas])
    w_mat = np.column_stack([state_a.omega, state_b.omega])
    det = np.linalg.det(a_mat)
    scale = np.linalg.norm(state_a.alpha_in) * np.linalg.norm(state_b.alpha_in)
    if abs(det) < 1e-3 * scale:
        raise ValueError("in-vectors are nearly parallel; transfer extraction ill-conditioned")
    m = w_mat @ np.linalg.inv(a_mat)
    phase = m[0, 0] / abs(m[0, 0])
    m = m / phase
    return TransferMatrix(m, float(m[0, 0].real), complex(m[1, 0]))


def measure_transfer_curve(lams, eps, window=None, **kwargs):
    """a_meas(lambda) via two-run extraction, with the closed-form target."""
    rows = []
    for lam in lams:
        sa = solve_normal_form(lam, eps, window, alpha=(1.0, 0.0), **kwargs)
        sb = solve_normal_form(lam, eps, window, alpha=(0.0, 1.0), **kwargs)
        tm = extract_transfer(sa, sb)
        rows.append((float(lam), float(eps), tm.a, transfer_amplitude_theory(lam)))
    return rows


# ---------------------------------------------------------------------------
# out-mass prediction for two-packet crossing data

@dataclass(frozen=True)
class OutMassPrediction:
    c_plus_out: float
    c_minus_out: float
    regime: str
    rho0: float = 0.0
    phi0: float = 0.0

    @property
    def total(self):
        return self.c_plus_out + self.c_minus_out


def predict_out_masses(
    alpha_plus,
    alpha_minus,
    eta_plus,
    eta_minus,
    c_plus_in,
    c_minus_in,
    xi_star_norm=1.0,
    rho0=0.0,
    phi0=0.0,
    phase=0.0,
    eta_tol=1e-9,
):
    """Out-mass table for concentrated two-mode data.

    alpha_+/- are the offset-scaling exponents in (0, 1/2]; for alpha < 1/2 the
    packet concentrates at eta = infinity (no transfer), for alpha = 1/2 at the
    finite eta_0 = -r0 (x0 ^ w0). The interference row (equal finite etas)
    carries the externally supplied amplitude rho0 and phase phi0 against the
    relative packet phase.
    """
    for a in (alpha_plus, alpha_minus):
        if not 0.0 < a <= 0.5:
            raise ValueError("offset exponents must lie in (0, 1/2]")
    tp = transfer_probability(eta_plus, xi_star_norm)
    tm = transfer_probability(eta_minus, xi_star_norm)
    half_p = alpha_plus == 0.5
    half_m = alpha_minus == 0.5
    if not half_p and not half_m:
        return OutMassPrediction(c_plus_in, c_minus_in, "no-transfer")
    if not half_p and half_m:
        return OutMassPrediction(
            c_plus_in + tm * c_minus_in, (1.0 - tm) * c_minus_in, "minus-transfers"
        )
    if half_p and not half_m:
        return OutMassPrediction(
            (1.0 - tp) * c_plus_in, c_minus_in + tp * c_plus_in, "plus-transfers"
        )
    if abs(eta_plus - eta_minus) > eta_tol:
        return OutMassPrediction(
            (1.0 - tp) * c_plus_in + tm * c_minus_in,
            (1.0 - tm) * c_minus_in + tp * c_plus_in,
            "cross-transfer",
        )
    t0 = tp
    coupling = rho0 * np.cos(phi0 - phase)
    return OutMassPrediction(
        (1.0 - t0) * c_plus_in + t0 * c_minus_in + coupling,
        (1.0 - t0) * c_minus_in + t0 * c_plus_in - coupling,
        "interference",
        rho0,
        phi0,
    )


# ---------------------------------------------------------------------------
# full 2D crossing experiments

@dataclass(frozen=True)
class PacketSpec:
    """One polarized packet of the crossing experiment."""

    mode: str                  # '+' or '-'
    x0: tuple
    r0: float                  # quadratic phase rate; xi0 = r0 * x0
    beta: float = 0.35
    width: float = 1.0         # envelope width in units of eps^beta
    alpha: float = 0.5         # offset-scaling exponent
    omega0: tuple = (0.0, 0.0)
    phase: float = 0.0
    amplitude: float = 1.0

    @property
    def eta0(self):
        """Concentration value -r0 (x0 ^ w0) at alpha = 1/2."""
        wedge = self.x0[0] * self.omega0[1] - self.x0[1] * self.omega0[0]
        return -self.r0 * wedge

    def eta_effective(self, eps):
        """Finite-eps concentration eta0 * eps^(alpha - 1/2); +/-inf-bound for alpha < 1/2."""
        return self.eta0 * eps ** (self.alpha - 0.5)


# closed-form reference geometry: both packets reach (0, (-1, 0)) at t* = sqrt(3) - 1
REFERENCE_MINUS = dict(x0=(1.0, 0.0), r0=-np.sqrt(3.0))
REFERENCE_PLUS = dict(x0=(2.0 * np.sqrt(3.0) - 3.0, 0.0), r0=-1.0 / np.sqrt(3.0))
T_STAR_REFERENCE = np.sqrt(3.0) - 1.0


@dataclass(frozen=True)
class CrossingExperimentConfig:
    eps: float
    packets: tuple
    n1: int = None
    n2: int = 256
    half_extent: tuple = (2.75, 1.25)
    dt_factor: float = 16.0        # dt = eps / dt_factor
    delta0: float = None           # exclusion radius, default 5 sqrt(eps)
    horizon_after: float = None    # run length past t*, default to the plateau end
    rho0: float = 0.0
    phi0: float = 0.0

    def resolved(self):
        eps = self.eps
        n1 = self.n1 if self.n1 is not None else (4096 if eps < 1.0 / 300.0 else 2048)
        delta0 = self.delta0 if self.delta0 is not None else 5.0 * np.sqrt(eps)
        root = np.sqrt(eps)
        s_lo = min(0.8, max(0.15, 13.0 * root))
        s_hi = min(1.0, max(0.25, 16.0 * root))
        horizon = self.horizon_after if self.horizon_after is not None else s_hi + 0.03
        return n1, delta0, (s_lo, s_hi), horizon


@dataclass
class CrossingRunResult:
    config: CrossingExperimentConfig
    geometry: CrossingGeometry
    times: np.ndarray
    m_plus: np.ndarray
    m_minus: np.ndarray
    m_core: np.ndarray
    masses_in: tuple
    plateau: tuple                 # (m_plus, m_minus) averaged over the window
    plateau_window: tuple
    prediction: OutMassPrediction
    boundary_mass_fraction: float

    @property
    def deviations(self):
        pred = (self.prediction.c_plus_out, self.prediction.c_minus_out)
        out = []
        for meas, p in zip(self.plateau, pred):
            out.append(abs(meas - p) / abs(p) if p != 0 else abs(meas - p))
        return tuple(out)

    @property
    def transferred_fraction(self):
        """Fraction of the total mass found in the opposite mode at the plateau."""
        total = self.masses_in[0] + self.masses_in[1]
        if self.masses_in[0] >= self.masses_in[1]:
            return self.plateau[1] / total
        return self.plateau[0] / total


def _crossing_geometry_of(packets):
    geoms = []
    for p in packets:
        traj = flow_mode(p.mode, np.asarray(p.x0), p.r0 * np.asarray(p.x0), dt=2e-4, t_max=4.0)
        geoms.append(detect_crossing(traj))
    t_stars = [g.t_star for g in geoms]
    if max(t_stars) - min(t_stars) > 0.02:
        raise ValueError(f"packet trajectories reach the crossing at different times: {t_stars}")
    xs = np.mean([g.xi_star for g in geoms], axis=0)
    return CrossingGeometry.from_momentum(float(np.mean(t_stars)), xs)


def run_crossing_experiment(config, record_dt=0.01, progress=None):
    """Evolve the packet data under the conical-potential spinor dynamics and
    compare plateau mode masses after the crossing with the predicted table."""
    eps = config.eps
    n1, delta0, (s_lo, s_hi), horizon = config.resolved()
    geom = _crossing_geometry_of(config.packets)
    grid = SpatialGrid.create(2, (n1, config.n2), config.half_extent)

    vals = None
    for p in config.packets:
        f = build_wave_packet(
            grid, eps, p.beta, p.x0,
            GaussianProfile(width=p.width, amplitude=p.amplitude, dim=2),
            quad_phase_rate=p.r0, offset_exponent=p.alpha, offset=p.omega0,
            polarization=p.mode, phase=p.phase,
        )
        vals = f.values if vals is None else vals + f.values
    from .fields import WaveField

    field = WaveField(grid, vals, eps)

    masses0 = mode_masses(field, delta0)
    t1 = geom.t_star + horizon
    dt = eps / config.dt_factor
    nsteps = int(np.ceil(t1 / dt))
    t1 = nsteps * dt

    obs_times = np.arange(0.0, t1 + record_dt / 2, record_dt)
    obs_times = np.round(obs_times / dt) * dt

    def observer(t, fld):
        return mode_masses(fld, delta0)

    prop = StrangPropagator(grid, eps, HamiltonianSpec(potential=ConicalPotential()))
    res = prop.run(field, 0.0, t1, dt, observer=observer, observe_times=obs_times,
                   record_mass_every=50)

    times = np.asarray([t for t, _ in res.observations])
    mp = np.asarray([m[0] for _, m in res.observations])
    mm = np.asarray([m[1] for _, m in res.observations])
    mc = np.asarray([m[2] for _, m in res.observations])

    window = (geom.t_star + s_lo, geom.t_star + s_hi)
    sel = (times >= window[0]) & (times <= window[1])
    plateau = (float(np.mean(mp[sel])), float(np.mean(mm[sel])))

    # boundary frame mass (outer 5% of the box) at the final time
    x1, x2 = grid.meshes()
    frame = (np.abs(x1) > 0.95 * grid.half_extent[0]) | (np.abs(x2) > 0.95 * grid.half_extent[1])
    dens = res.final.density()
    boundary = float(np.sum(dens[frame]) * grid.cell_volume / res.final.norm_sq())
    if boundary > 0.05:
        raise RuntimeError(f"{boundary:.1%} of the mass reached the box boundary")

    by_mode = {p.mode: p for p in config.packets}
    plus = by_mode.get("+")
    minus = by_mode.get("-")
    speed = float(np.linalg.norm(geom.xi_star))
    prediction = predict_out_masses(
        plus.alpha if plus else 0.25,
        minus.alpha if minus else 0.25,
        plus.eta_effective(eps) if plus else np.inf,
        minus.eta_effective(eps) if minus else np.inf,
        masses0[0],
        masses0[1],
        xi_star_norm=speed,
        rho0=config.rho0,
        phi0=config.phi0,
        phase=(minus.phase - plus.phase) if (plus and minus) else 0.0,
    )
    return CrossingRunResult(
        config, geom, times, mp, mm, mc, (masses0[0], masses0[1]),
        plateau, window, prediction, boundary,
    )
