"""Hamiltonian rays, Jacobians, particle transport of phase-space measures,
crossing detection with probabilistic mode branching, and WKB assembly.

Scalar rays solve xdot = xi, xidot = -grad V together with the variational
system for the seed Jacobian J_t(y) = det d x(t,y)/d y; mode rays solve the
two adiabatic flows of the conical potential, xidot = -/+ x/|x|.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

DELTA_STOP = 1e-3     # crossing-detection ball radius
V_MIN = 1e-2          # minimal transversal speed at a crossing
J_MIN = 0.1           # caustic horizon for eikonal validity


class CausticError(RuntimeError):
    """Ray map is no longer invertible (Jacobian below the horizon)."""


class NoCrossingError(RuntimeError):
    pass


class TangentialCrossingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RayPotential:
    """Smooth scalar potential with gradient and Hessian, vectorized over
    points of shape (n, d)."""

    value: object
    grad: object
    hess: object


def free_ray_potential(dim=1):
    return RayPotential(
        value=lambda x: np.zeros(x.shape[0]),
        grad=lambda x: np.zeros_like(x),
        hess=lambda x: np.zeros((x.shape[0], x.shape[1], x.shape[1])),
    )


def harmonic_ray_potential(dim=1, omega=1.0):
    w2 = omega ** 2

    def hess(x):
        n, d = x.shape
        h = np.zeros((n, d, d))
        for i in range(d):
            h[:, i, i] = w2
        return h

    return RayPotential(
        value=lambda x: 0.5 * w2 * np.sum(x ** 2, axis=1),
        grad=lambda x: w2 * x,
        hess=hess,
    )


def ray_potential_from_callable(v, dim=1, step=1e-5):
    """Finite-difference gradient/Hessian for a pointwise scalar callable."""

    def value(x):
        return np.asarray([v(*p) for p in x], dtype=float)

    def grad(x):
        g = np.zeros_like(x)
        for i in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[i] = step
            g[:, i] = (value(x + e) - value(x - e)) / (2 * step)
        return g

    def hess(x):
        n, d = x.shape
        h = np.zeros((n, d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = step
            h[:, :, i] = (grad(x + e) - grad(x - e)) / (2 * step)
        return 0.5 * (h + np.swapaxes(h, 1, 2))

    return RayPotential(value, grad, hess)


@dataclass
class RayBundle:
    """Rays y -> (x(t,y), xi(t,y), J_t(y)) with action and phase-shift integrals."""

    y: np.ndarray          # (n, d) seeds
    t: np.ndarray          # recorded times, shape (m,)
    x: np.ndarray          # (m, n, d)
    xi: np.ndarray         # (m, n, d)
    jac: np.ndarray        # (m, n)
    action: np.ndarray     # (m, n): integral of |xi|^2/2 - V along the ray
    gshift: np.ndarray     # (m, n): integral of the transport phase source
    caustic_time: float = None

    @property
    def caustic_flagged(self):
        return self.caustic_time is not None

    def at_final(self):
        return self.x[-1], self.xi[-1], self.jac[-1], self.action[-1], self.gshift[-1]


def flow_scalar(
    potential,
    y,
    xi0,
    t0,
    t1,
    dt,
    record_times=None,
    amp0_sq=None,
    f=None,
    linear_term=None,
    xi0_grad=None,
):
    """RK4 integration of the scalar Hamiltonian flow plus its variational system.

    y, xi0: seed positions/momenta, shape (n, d). The momentum seed Jacobian
    d xi0/d y is differenced along the seed line in 1D (pass xi0_grad
    explicitly for 2D seed meshes with y-dependent momenta). amp0_sq with f
    (or linear_term F0(t, x)) accumulates the transport phase-shift integral
    G = -int f(J_s^-1 |a0(y)|^2) ds (resp. -int F0 ds) along each ray.
    Flags a caustic when J changes sign or drops below J_MIN between steps.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    xi = np.asarray(xi0, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    xi = xi.copy()
    n, d = y.shape
    x = y.copy()
    m_jac = np.tile(np.eye(d), (n, 1, 1))
    p_jac = np.zeros((n, d, d))
    if xi0_grad is not None:
        p_jac[:] = np.asarray(xi0_grad, dtype=float).reshape(n, d, d)
    elif d == 1 and n > 2:
        # seed momentum profile differentiated along the 1D seed line
        p_jac[:, 0, 0] = np.gradient(xi[:, 0], y[:, 0])
    action = np.zeros(n)
    gshift = np.zeros(n)

    nsteps = int(round((t1 - t0) / dt)) if t1 > t0 else 0
    if nsteps > 0 and abs(nsteps * dt - (t1 - t0)) > 1e-9:
        raise ValueError("dt must divide t1 - t0")
    rec = sorted({int(round((t - t0) / dt)) for t in record_times} | {nsteps}) if record_times else [nsteps]

    def rhs(t, state):
        x_, xi_, m_, p_, _, _ = state
        hess = potential.hess(x_)
        dq = -f(np.abs(amp0_sq) / jac_of(m_)) if f is not None else (
            -linear_term(t, x_) if linear_term is not None else np.zeros(n)
        )
        return (
            xi_,
            -potential.grad(x_),
            p_,
            -np.einsum("nij,njk->nik", hess, m_),
            0.5 * np.sum(xi_ ** 2, axis=1) - potential.value(x_),
            dq,
        )

    def jac_of(m_):
        if d == 1:
            return m_[:, 0, 0]
        return m_[:, 0, 0] * m_[:, 1, 1] - m_[:, 0, 1] * m_[:, 1, 0]

    def step(t, state):
        k1 = rhs(t, state)
        s2 = tuple(a + 0.5 * dt * b for a, b in zip(state, k1))
        k2 = rhs(t + 0.5 * dt, s2)
        s3 = tuple(a + 0.5 * dt * b for a, b in zip(state, k2))
        k3 = rhs(t + 0.5 * dt, s3)
        s4 = tuple(a + dt * b for a, b in zip(state, k3))
        k4 = rhs(t + dt, s4)
        return tuple(
            a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4)
        )

    state = (x, xi, m_jac, p_jac, action, gshift)
    ts, xs, xis, jacs, acts, gs = [], [], [], [], [], []
    caustic_time = None

    def record(k, st):
        ts.append(t0 + k * dt)
        xs.append(st[0].copy())
        xis.append(st[1].copy())
        jacs.append(jac_of(st[2]).copy())
        acts.append(st[4].copy())
        gs.append(st[5].copy())

    if 0 in [r for r in rec] or nsteps == 0:
        record(0, state)
        rec = [r for r in rec if r != 0]
    prev_j = jac_of(state[2])
    for k in range(1, nsteps + 1):
        state = step(t0 + (k - 1) * dt, state)
        j = jac_of(state[2])
        if caustic_time is None and (np.any(np.sign(j) != np.sign(prev_j)) or np.any(j < J_MIN)):
            caustic_time = t0 + k * dt
        prev_j = j
        if k in rec:
            record(k, state)

    return RayBundle(
        y,
        np.asarray(ts),
        np.asarray(xs),
        np.asarray(xis),
        np.asarray(jacs),
        np.asarray(acts),
        np.asarray(gs),
        caustic_time,
    )


# ---------------------------------------------------------------------------
# adiabatic mode flows and crossing geometry

@dataclass(frozen=True)
class CrossingGeometry:
    t_star: float
    xi_star: np.ndarray
    tau_star: float        # |xi*|^2 / 2
    eta_scale: float       # |xi*|^(-3/2), converting eta to the reduced gap

    @classmethod
    def from_momentum(cls, t_star, xi_star):
        speed = float(np.linalg.norm(xi_star))
        return cls(float(t_star), np.asarray(xi_star, dtype=float), 0.5 * speed ** 2,
                   speed ** (-1.5))


@dataclass
class ModeTrajectory:
    sign: int                  # +1 or -1 mode label
    t: np.ndarray
    x: np.ndarray              # (m, 2)
    xi: np.ndarray             # (m, 2)
    stop_reason: str           # "crossing-ball" | "perigee" | "time"


def _mode_force(sign, x):
    r = np.linalg.norm(x)
    if r == 0.0:
        return np.zeros_like(x)
    return -sign * x / r


def flow_mode(sign, x0, xi0, dt=5e-4, t_max=5.0, delta_stop=DELTA_STOP):
    """Integrate one adiabatic mode trajectory until it enters the crossing
    ball |x| < delta_stop, passes its perigee, or reaches t_max."""
    sign = +1 if sign in ("+", +1) else -1
    x = np.asarray(x0, dtype=float).copy()
    xi = np.asarray(xi0, dtype=float).copy()
    if np.linalg.norm(x) == 0.0:
        raise ValueError("mode flow must start away from x = 0")
    ts, xs, xis = [0.0], [x.copy()], [xi.copy()]
    reason = "time"
    nsteps = int(np.ceil(t_max / dt))
    radial_prev = float(np.dot(x, xi))
    for k in range(1, nsteps + 1):
        k1x, k1v = xi, _mode_force(sign, x)
        x2, v2 = x + 0.5 * dt * k1x, xi + 0.5 * dt * k1v
        k2x, k2v = v2, _mode_force(sign, x2)
        x3, v3 = x + 0.5 * dt * k2x, xi + 0.5 * dt * k2v
        k3x, k3v = v3, _mode_force(sign, x3)
        x4, v4 = x + dt * k3x, xi + dt * k3v
        k4x, k4v = v4, _mode_force(sign, x4)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        xi = xi + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ts.append(k * dt)
        xs.append(x.copy())
        xis.append(xi.copy())
        r = float(np.linalg.norm(x))
        radial = float(np.dot(x, xi))
        if r < delta_stop:
            reason = "crossing-ball"
            break
        if radial_prev < 0.0 <= radial:
            reason = "perigee"
            break
        radial_prev = radial
    return ModeTrajectory(sign, np.asarray(ts), np.asarray(xs), np.asarray(xis), reason)


def detect_crossing(traj, delta_stop=DELTA_STOP, v_min=V_MIN):
    """Crossing time and momentum from the minimum of |x(t)|^2.

    Refines the parabola vertex of |x|^2 with two Newton steps on the radial
    momentum x.xi using the trajectory jet; rejects trajectories whose
    perigee stays outside the crossing ball, or with |xi*| < v_min.
    """
    radii = np.linalg.norm(traj.x, axis=1)
    if traj.stop_reason == "perigee" or np.min(radii) >= delta_stop:
        raise NoCrossingError(
            f"minimal |x| = {np.min(radii):.4g} stays outside the crossing ball {delta_stop:g}"
        )
    # anchor at the last sample outside the stop ball and refine on the frozen
    # anchor jet (the force is constant along the incoming ray up to the cone;
    # re-evaluating it past the vertex would pick up the flipped sign)
    i = len(traj.t) - 1
    if i > 0 and radii[i] < delta_stop:
        i -= 1
    t0, x0, xi0 = traj.t[i], traj.x[i], traj.xi[i]
    force = _mode_force(traj.sign, x0)
    tau = 0.0
    for _ in range(3):
        x = x0 + tau * xi0 + 0.5 * tau ** 2 * force
        xi = xi0 + tau * force
        p = float(np.dot(x, xi))
        dp = float(np.dot(xi, xi) + np.dot(x, force))
        if dp <= 0:
            break
        tau -= p / dp
    x = x0 + tau * xi0 + 0.5 * tau ** 2 * force
    xi = xi0 + tau * force
    t = t0 + tau
    speed = float(np.linalg.norm(xi))
    if speed < v_min:
        raise TangentialCrossingError(f"crossing speed {speed:.3g} below {v_min:g}")
    return CrossingGeometry.from_momentum(t, xi)


def transfer_probability(eta, xi_star_norm):
    """Mode-transfer probability exp(-pi |eta|^2 / |xi*|^3); zero at eta = inf."""
    if xi_star_norm <= 0:
        raise ValueError("|xi*| must be positive")
    eta = np.asarray(eta, dtype=float)
    out = np.exp(-np.pi * eta ** 2 / xi_star_norm ** 3)
    return float(out) if np.isscalar(eta) or out.ndim == 0 else out


# ---------------------------------------------------------------------------
# weighted particle ensembles

@dataclass
class ParticleEnsemble:
    """Weighted phase-space particles carrying mode labels and eta values."""

    y: np.ndarray         # (n, d) birth positions
    x: np.ndarray         # (n, d)
    xi: np.ndarray        # (n, d)
    weight: np.ndarray    # (n,)
    mode: np.ndarray      # (n,) int: 0 scalar, +1 / -1 adiabatic
    jac: np.ndarray       # (n,)
    action: np.ndarray    # (n,)
    eta: np.ndarray       # (n,) assigned at initialization (inf allowed)
    t: float = 0.0

    @classmethod
    def create(cls, x, xi, weight, mode=0, eta=0.0):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        n = x.shape[0]
        weight = np.broadcast_to(np.asarray(weight, dtype=float), (n,)).copy()
        mode = np.broadcast_to(np.asarray(mode, dtype=int), (n,)).copy()
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,)).copy()
        return cls(x.copy(), x.copy(), xi.copy(), weight, mode,
                   np.ones(n), np.zeros(n), eta)

    def total_weight(self):
        return float(np.sum(self.weight))

    def eta_now(self, eps):
        """Mid-flight eta = (x ^ xi)/sqrt(eps) for cross-checks (2D only)."""
        return (self.x[:, 0] * self.xi[:, 1] - self.x[:, 1] * self.xi[:, 0]) / np.sqrt(eps)

    def pair(self, observable):
        """Fixed-order weighted pairing sum_i w_i a(x_i, xi_i)."""
        vals = observable(*(list(self.x.T) + list(self.xi.T)))
        return float(np.dot(self.weight, np.asarray(vals, dtype=float)))


def branch_at_crossing(x, xi, weight, mode, eta, geometry, restart_delta=2 * DELTA_STOP):
    """Split one particle at a detected crossing into (kept, flipped) children.

    The flipped child carries weight T(eta) * w, the kept child (1 - T) * w;
    both restart just past the origin on their own mode flow, synchronized to
    the crossing time t*.
    """
    speed = float(np.linalg.norm(geometry.xi_star))
    t_prob = transfer_probability(eta, speed) if np.isfinite(eta) else 0.0
    dt_kick = restart_delta / speed
    xhat = geometry.xi_star / speed
    children = []
    for child_mode, w in ((mode, (1.0 - t_prob) * weight), (-mode, t_prob * weight)):
        x_new = geometry.xi_star * dt_kick - child_mode * 0.5 * dt_kick ** 2 * xhat
        xi_new = geometry.xi_star - child_mode * dt_kick * xhat
        children.append((x_new, xi_new, w, child_mode, geometry.t_star + dt_kick))
    return children


@dataclass(frozen=True)
class TwoModeDynamics:
    delta_stop: float = DELTA_STOP
    v_min: float = V_MIN
    branching: bool = True


def transport_ensemble(ens, dynamics, t1, dt, observables=(), record_times=()):
    """Advect an ensemble to t1; returns (ensemble, pairings).

    dynamics is a RayPotential (scalar Liouville transport) or TwoModeDynamics
    (adiabatic flows with probabilistic branching at crossings). pairings maps
    observable index -> list of (t, value); total weight is conserved exactly.
    """
    record = sorted(set(float(t) for t in record_times) | {t1})
    pairings = {i: [] for i in range(len(observables))}

    def note(t):
        for i, obs in enumerate(observables):
            pairings[i].append((t, ens.pair(obs)))

    if ens.t == 0.0 and (not record or record[0] > 0.0):
        note(0.0)

    if isinstance(dynamics, RayPotential):
        for t_next in record:
            n = int(round((t_next - ens.t) / dt))
            for _ in range(max(n, 0)):
                x, xi = ens.x, ens.xi
                k1x, k1v = xi, -dynamics.grad(x)
                k2x, k2v = xi + 0.5 * dt * k1v, -dynamics.grad(x + 0.5 * dt * k1x)
                k3x, k3v = xi + 0.5 * dt * k2v, -dynamics.grad(x + 0.5 * dt * k2x)
                k4x, k4v = xi + dt * k3v, -dynamics.grad(x + dt * k3x)
                ens.x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
                ens.xi = xi + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
                ens.t += dt
            ens.t = t_next
            note(t_next)
        return ens, pairings

    if not isinstance(dynamics, TwoModeDynamics):
        raise TypeError("dynamics must be a RayPotential or TwoModeDynamics")

    # two-mode transport: integrate each particle with crossing handling
    n0 = ens.x.shape[0]
    out = {"x": [], "xi": [], "w": [], "mode": [], "eta": [], "y": []}
    events = []

    def advance_particle(x, xi, w, mode, eta, y, t_from, t_to, depth=0):
        traj_t = t_from
        x, xi = x.copy(), xi.copy()
        nsteps = int(np.ceil((t_to - traj_t) / dt - 1e-12))
        for _ in range(nsteps):
            h = min(dt, t_to - traj_t)
            x_prev, xi_prev, t_prev = x, xi, traj_t
            k1x, k1v = xi, _mode_force(mode, x)
            x2, v2 = x + 0.5 * h * k1x, xi + 0.5 * h * k1v
            k2x, k2v = v2, _mode_force(mode, x2)
            x3, v3 = x + 0.5 * h * k2x, xi + 0.5 * h * k2v
            k3x, k3v = v3, _mode_force(mode, x3)
            x4, v4 = x + h * k3x, xi + h * k3v
            k4x, k4v = v4, _mode_force(mode, x4)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            xi = xi + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            traj_t += h
            r = float(np.linalg.norm(x))
            if dynamics.branching and r < dynamics.delta_stop and depth < 8:
                traj = ModeTrajectory(mode, np.asarray([t_prev, traj_t]),
                                      np.asarray([x_prev, x]), np.asarray([xi_prev, xi]),
                                      "crossing-ball")
                geom = detect_crossing(traj, dynamics.delta_stop, dynamics.v_min)
                events.append(geom)
                for cx, cxi, cw, cmode, ct in branch_at_crossing(
                    x, xi, w, mode, eta, geom, restart_delta=2 * dynamics.delta_stop
                ):
                    if cw > 0.0:
                        advance_particle(cx, cxi, cw, cmode, eta, y, ct, t_to, depth + 1)
                return
        out["x"].append(x)
        out["xi"].append(xi)
        out["w"].append(w)
        out["mode"].append(mode)
        out["eta"].append(eta)
        out["y"].append(y)

    for t_next in record:
        out = {"x": [], "xi": [], "w": [], "mode": [], "eta": [], "y": []}
        for i in range(ens.x.shape[0]):
            advance_particle(ens.x[i], ens.xi[i], float(ens.weight[i]), int(ens.mode[i]),
                             float(ens.eta[i]), ens.y[i], ens.t, t_next)
        ens = ParticleEnsemble(
            np.asarray(out["y"]), np.asarray(out["x"]), np.asarray(out["xi"]),
            np.asarray(out["w"]), np.asarray(out["mode"], dtype=int),
            np.ones(len(out["w"])), np.zeros(len(out["w"])),
            np.asarray(out["eta"]), t_next,
        )
        note(t_next)
    ens.events = events
    return ens, pairings


# ---------------------------------------------------------------------------
# eikonal solution and WKB assembly (1D)

@dataclass
class WkbSolution:
    grid: object
    t: float
    phi_eik: np.ndarray
    amplitude: np.ndarray     # J^(-1/2) a0(y(t,x)), real where a0 is real
    gshift: np.ndarray
    valid: np.ndarray         # mask where the ray map covers the grid
    bundle: RayBundle


def _ray_inputs_1d(phi0_grad, grid, seam=1.5):
    y = grid.axis(0)
    xi0 = np.asarray(phi0_grad(y), dtype=float)
    return y[:, None], xi0[:, None]


def solve_eikonal(phi0, phi0_grad, potential, grid, t, dt=None, return_bundle=True):
    """Phase of geometric optics: phi(t,x) = phi0(y) + int (|xi|^2/2 - V) ds
    along the ray through y = y(t,x), by cubic interpolation of the inverted
    1D ray map. Raises CausticError past the fold horizon."""
    if grid.dim != 1:
        raise NotImplementedError("eikonal assembly is implemented in 1D")
    if dt is None:
        dt = max(t / 400.0, 1e-4) if t > 0 else 1e-4
    y, xi0 = _ray_inputs_1d(phi0_grad, grid)
    if t == 0.0:
        x = grid.axis(0)
        phi = np.asarray(phi0(x), dtype=float)
        bundle = flow_scalar(potential, y, xi0, 0.0, 0.0, 1.0)
        return WkbSolution(grid, 0.0, phi, np.ones_like(phi), np.zeros_like(phi),
                           np.ones_like(phi, dtype=bool), bundle)
    bundle = flow_scalar(potential, y, xi0, 0.0, t, dt)
    if bundle.caustic_flagged:
        raise CausticError(f"caustic flagged at t = {bundle.caustic_time:.6g} <= {t}")
    x_t, _, jac_t, action_t, _ = bundle.at_final()
    x_rays = x_t[:, 0]
    if np.any(np.diff(x_rays) <= 0):
        raise CausticError("ray map is not monotone; caustic reached")
    phi_rays = np.asarray(phi0(y[:, 0]), dtype=float) + action_t
    x_grid = grid.axis(0)
    valid = (x_grid >= x_rays[0]) & (x_grid <= x_rays[-1])
    phi = np.full(x_grid.shape, np.nan)
    phi[valid] = CubicSpline(x_rays, phi_rays)(x_grid[valid])
    return WkbSolution(grid, t, phi, np.ones_like(phi), np.zeros_like(phi), valid, bundle)


def wkb_field(
    a0,
    phi0,
    phi0_grad,
    potential,
    grid,
    t,
    eps,
    f=None,
    linear_term=None,
    dt=None,
):
    """Geometric-optics field a(t,x) e^{i G(t,x)} e^{i phi_eik(t,x)/eps}.

    a = J^(-1/2) a0(y(t,x)); G integrates -f(J_s^-1 |a0(y)|^2) (or -F0(s, x(s)))
    along rays. Returns (WaveField, WkbSolution); the field is zero where the
    ray map does not cover the grid (amplitude decayed there by construction).
    """
    from .fields import WaveField

    if grid.dim != 1:
        raise NotImplementedError("WKB assembly is implemented in 1D")
    if dt is None:
        dt = max(t / 400.0, 1e-4) if t > 0 else 1e-4
    x_grid = grid.axis(0)
    if t == 0.0:
        amp = np.asarray(a0(x_grid), dtype=np.complex128)
        phi = np.asarray(phi0(x_grid), dtype=float)
        vals = amp * np.exp(1j * phi / eps)
        sol = WkbSolution(grid, 0.0, phi, amp, np.zeros_like(phi),
                          np.ones_like(phi, dtype=bool), None)
        return WaveField(grid, vals, eps), sol

    y, xi0 = _ray_inputs_1d(phi0_grad, grid)
    amp0 = np.asarray(a0(y[:, 0]), dtype=np.complex128)
    bundle = flow_scalar(
        potential, y, xi0, 0.0, t, dt,
        amp0_sq=np.abs(amp0) ** 2 if f is not None else None,
        f=f, linear_term=linear_term,
    )
    if bundle.caustic_flagged:
        raise CausticError(f"caustic flagged at t = {bundle.caustic_time:.6g} <= {t}")
    x_t, _, jac_t, action_t, g_t = bundle.at_final()
    x_rays = x_t[:, 0]
    if np.any(np.diff(x_rays) <= 0) or np.min(jac_t) < J_MIN:
        raise CausticError("ray map is not invertible; caustic reached")

    phi_rays = np.asarray(phi0(y[:, 0]), dtype=float) + action_t
    valid = (x_grid >= x_rays[0]) & (x_grid <= x_rays[-1])
    xq = x_grid[valid]
    phi = np.full(x_grid.shape, np.nan)
    phi[valid] = CubicSpline(x_rays, phi_rays)(xq)
    y_of_x = CubicSpline(x_rays, y[:, 0])(xq)
    jac_of_x = CubicSpline(x_rays, jac_t)(xq)
    g_of_x = CubicSpline(x_rays, g_t)(xq) if (f is not None or linear_term is not None) else np.zeros_like(xq)

    amp = np.zeros(x_grid.shape, dtype=np.complex128)
    amp[valid] = np.asarray(a0(y_of_x), dtype=np.complex128) / np.sqrt(jac_of_x)
    gshift = np.zeros(x_grid.shape)
    gshift[valid] = g_of_x
    vals = np.where(valid, amp * np.exp(1j * gshift) * np.exp(1j * np.where(valid, phi, 0.0) / eps), 0.0)
    sol = WkbSolution(grid, t, phi, amp, gshift, valid, bundle)
    return WaveField(grid, vals, eps), sol


def eikonal_residual(phi0, phi0_grad, potential, grid, t, dt=None, delta=1e-4, margin=0.1):
    """Sup-norm of d_t phi + |grad phi|^2/2 + V on interior valid points,
    by centered finite differences of two eikonal solves."""
    sol_m = solve_eikonal(phi0, phi0_grad, potential, grid, t - delta, dt)
    sol_p = solve_eikonal(phi0, phi0_grad, potential, grid, t + delta, dt)
    sol_0 = solve_eikonal(phi0, phi0_grad, potential, grid, t, dt)
    x = grid.axis(0)
    valid = sol_m.valid & sol_p.valid & sol_0.valid
    # trim the edges of the covered region
    idx = np.where(valid)[0]
    keep = idx[int(margin * idx.size): int((1 - margin) * idx.size)]
    dphi_dt = (sol_p.phi_eik[keep] - sol_m.phi_eik[keep]) / (2 * delta)
    grad = np.gradient(sol_0.phi_eik[valid], x[valid])
    grad_keep = grad[np.searchsorted(idx, keep)]
    v = potential.value(x[keep][:, None])
    return float(np.max(np.abs(dphi_dt + 0.5 * grad_keep ** 2 + v)))
