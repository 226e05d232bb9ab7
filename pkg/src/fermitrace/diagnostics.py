"""Trace-norm functionals probing semiclassical structure of density matrices.

The central object is the localization operator

    W_z^(n)(t) = (1 + |x(t) - z|^{4n})^{-1},   x(t) = x + 2 eps t (-i grad),

realized exactly as the conjugation of the static inverse-polynomial weight by
the free-flow Fourier multiplier.  On top of it sit the commutator, gradient,
mass and concentration functionals, a transported-localizer ratio for the
momentum-boosted mean-field flow, and small closed-form quantities (purity,
fluctuation number, spatial mass splits).

Scaled forms divide out the expected semiclassical size: commutator-type
entries carry eps^(dim-1), trace-type entries eps^dim; in three dimensions
these are the familiar eps^2 and eps^3 factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .hartree import Potential, PropagatorConfig, kinetic_symbol
from .operators import OperatorKernel
from .states import OnePDM


@dataclass(frozen=True)
class DomainWeight:
    """Quartic exterior weight X(z) = 1 + dist(z, box region)^4 on the torus."""

    grid: Grid
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    @classmethod
    def whole_box(cls, grid: Grid) -> "DomainWeight":
        return cls(grid, (0.0,) * grid.dim, tuple(grid.box_length))

    @classmethod
    def box(cls, grid: Grid, lower, upper) -> "DomainWeight":
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        if len(lo) != grid.dim or len(hi) != grid.dim:
            raise ValueError("region bounds must match the grid dimension")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("region upper bounds must dominate lower bounds")
        if any(h - l > b for l, h, b in zip(lo, hi, grid.box_length)):
            raise ValueError("region cannot exceed the torus")
        return cls(grid, lo, hi)

    def is_whole_box(self) -> bool:
        return all(l == 0.0 and h == b
                   for l, h, b in zip(self.lower, self.upper, self.grid.box_length))

    def distance(self, points) -> np.ndarray:
        """Periodic distance from each point to the region (0 inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        per_axis = np.empty_like(pts)
        for a in range(self.grid.dim):
            center = 0.5 * (self.lower[a] + self.upper[a])
            half = 0.5 * (self.upper[a] - self.lower[a])
            wrapped = pts[:, a] - center
            box = self.grid.box_length[a]
            wrapped -= box * np.round(wrapped / box)
            per_axis[:, a] = np.maximum(0.0, np.abs(wrapped) - half)
        d = np.linalg.norm(per_axis, axis=1)
        return d if np.asarray(points).ndim > 1 else d[0]

    def contains(self, points) -> np.ndarray:
        return np.atleast_1d(self.distance(points)) == 0.0

    def values_at(self, points) -> np.ndarray:
        """X(z) = 1 + dist(z, region)^4."""
        return 1.0 + np.asarray(self.distance(points)) ** 4

    def inflated(self, amount: float) -> "DomainWeight":
        if amount < 0:
            raise ValueError("inflation must be nonnegative")
        lo = tuple(l - amount for l in self.lower)
        hi = tuple(h + amount for h in self.upper)
        if any(h - l >= b for l, h, b in zip(lo, hi, self.grid.box_length)):
            return DomainWeight.whole_box(self.grid)
        return DomainWeight(self.grid, lo, hi)


def localization_weights(grid: Grid, z, n: int) -> np.ndarray:
    """Static site weights (1 + |x - z|^{4n})^{-1} with periodic distance."""
    if n < 1:
        raise ValueError("weight power must be >= 1")
    dist = grid.periodic_distance(grid.positions, z)
    return 1.0 / (1.0 + np.atleast_1d(dist) ** (4 * n))


@dataclass
class LocalizationOperator:
    """Inverse-polynomial weight in the freely evolved position."""

    grid: Grid
    center: tuple[float, ...]
    power: int
    time: float
    epsilon: float
    kernel: OperatorKernel = field(repr=False)

    def expectation(self, vec: np.ndarray) -> float:
        v = np.asarray(vec, dtype=complex).ravel()
        return float(np.vdot(v, self.kernel.mat @ v).real)


def localization_operator(grid: Grid, z, n: int, t: float, eps: float) -> LocalizationOperator:
    """W_z^(n)(t): the static weight conjugated along the free flow.

    The multiplier exp(+i eps t |k|^2) plays the free propagator; at t = 0 the
    operator is the diagonal weight itself.
    """
    w = localization_weights(grid, z, n)
    if t == 0.0:
        kern = OperatorKernel.position_multiplier(grid, w)
    else:
        phase = np.exp(1j * eps * t * grid.momentum_norms ** 2)
        mat = grid.conjugate_by_momentum_phase(np.diag(w.astype(complex)), phase)
        kern = OperatorKernel.from_matrix(grid, (mat + mat.conj().T) / 2.0)
    center = tuple(float(v) for v in np.atleast_1d(z))
    return LocalizationOperator(grid, center, n, t, eps, kern)


# --- closed-form oracle for the free-gas commutator --------------------------

def free_gas_commutator_count(grid: Grid, eps: float, p) -> int:
    """Number of dual modes where the Fermi ball and its p-shift disagree.

    Multiplication by exp(i p.x) permutes the discrete momentum modes by the
    lattice shift of p, so the commutator with a momentum-ball projector has
    exactly one singular value 1 per disagreeing mode.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    shape = grid.shape
    inball = (grid.momentum_norms <= 1.0 / eps + 1e-12).reshape(shape)
    shifts = []
    for a in range(grid.dim):
        step = 2.0 * math.pi / grid.box_length[a]
        s = p[a] / step
        if abs(s - round(s)) > 1e-9:
            raise ValueError("p must be a dual lattice vector")
        shifts.append(int(round(s)) % grid.points_per_axis)
    shifted = np.roll(inball, [-s for s in shifts], axis=tuple(range(grid.dim)))
    return int(np.count_nonzero(inball != shifted))


def momentum_phase_commutator(omega: OnePDM, p) -> OperatorKernel:
    """[exp(i p.x), omega] as an operator kernel."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    phase = np.exp(1j * omega.grid.positions @ p)
    comm = (phase[:, None] - phase[None, :]) * omega.entries
    return OperatorKernel(omega.grid, comm)


def commutator_with_function(omega: OnePDM, f_values: np.ndarray, z=None) -> float:
    """Trace norm of [omega, F_z(x)] for a site-sampled function F.

    With z given, F is translated so its origin sits at the grid point z
    (z must lie on the lattice).
    """
    grid = omega.grid
    vals = np.asarray(f_values, dtype=complex).reshape(grid.shape)
    if z is not None:
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        shifts = []
        for a in range(grid.dim):
            s = zz[a] / grid.spacing[a]
            if abs(s - round(s)) > 1e-9:
                raise ValueError("translation center must be a grid point")
            shifts.append(int(round(s)) % grid.points_per_axis)
        vals = np.roll(vals, shifts, axis=tuple(range(grid.dim)))
    fv = vals.ravel()
    comm = (fv[:, None] - fv[None, :]) * omega.entries
    return OperatorKernel(grid, comm).trace_norm()


# --- the assumption functionals ----------------------------------------------

@dataclass
class SemiclassicalReport:
    """Sampled suprema of the four structure functionals, raw and scaled."""

    epsilon: float
    power: int
    raw: dict
    scaled: dict
    samples: dict

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "power": self.power,
            "raw": dict(self.raw),
            "scaled": dict(self.scaled),
            "samples": self.samples,
        }


def _default_p_samples(grid: Grid, eps: float) -> np.ndarray:
    keep = grid.momentum_norms <= 1.0 / eps + 1e-12
    return grid.dual_momenta[keep]


def semiclassical_report(omega: OnePDM, eps: float, power: int = 2,
                         domain: DomainWeight | None = None,
                         z_stride: int = 1, p_samples=None,
                         t_window=(0.0,)) -> SemiclassicalReport:
    """Sampled suprema of the commutator, gradient, mass and concentration
    functionals of a state, each also in scaled form.

    comm : sup X(z) (1+|p|)^{-1} || W_z^(n)(t) [e^{ip.x}, omega] ||_tr  * eps^(dim-1)
    grad : sup X(z) sum_axes    || W_z^(n)(t) [eps grad, omega] ||_tr   * eps^(dim-1)
    mass : sup X(z)             || W_z^(n)(t) omega ||_tr               * eps^dim
    conc : sup_z                   tr( W_z^(1)(t) omega )               * eps^dim

    Suprema run over the recorded finite sample sets: grid points z on a
    stride, dual momenta p in the ball |p| <= 1/eps, and the given t window.
    """
    grid = omega.grid
    if z_stride < 1:
        raise ValueError("z_stride must be >= 1")
    dom = domain if domain is not None else DomainWeight.whole_box(grid)
    idx = np.arange(grid.n_sites).reshape(grid.shape)
    for a in range(grid.dim):
        idx = np.take(idx, np.arange(0, grid.points_per_axis, z_stride), axis=a)
    z_points = grid.positions[idx.ravel()]
    if p_samples is None:
        p_samples = _default_p_samples(grid, eps)
    p_samples = np.atleast_2d(np.asarray(p_samples, dtype=float))
    times = [float(t) for t in t_window]
    if len(z_points) == 0 or len(p_samples) == 0 or len(times) == 0:
        raise ValueError("empty sample set")

    xz = dom.values_at(z_points)
    m = omega.mat
    # [e^{ip.x}, omega] and [eps grad, omega] do not depend on (z, t); build once
    phases = np.exp(1j * (grid.positions @ p_samples.T))          # (n, n_p)
    pweights = 1.0 / (1.0 + np.linalg.norm(p_samples, axis=1))
    mk = grid.to_momentum_matrix(m)
    grad_comms = []
    for a in range(grid.dim):
        k_a = grid.dual_momenta[:, a]
        grad_comms.append(grid.to_position_matrix(
            1j * eps * (k_a[:, None] - k_a[None, :]) * mk))

    comm_sup = 0.0
    grad_sup = 0.0
    mass_sup = 0.0
    conc_sup = 0.0
    for t in times:
        for zi, z in enumerate(z_points):
            wmat = localization_operator(grid, z, power, t, eps).kernel.mat
            for pi in range(p_samples.shape[0]):
                ph = phases[:, pi]
                comm = (ph[:, None] - ph[None, :]) * m
                val = xz[zi] * pweights[pi] * _trace_norm(wmat @ comm)
                comm_sup = max(comm_sup, val)
            gval = sum(_trace_norm(wmat @ g) for g in grad_comms)
            grad_sup = max(grad_sup, xz[zi] * gval)
            mass_sup = max(mass_sup, xz[zi] * _trace_norm(wmat @ m))
            w1 = localization_operator(grid, z, 1, t, eps).kernel.mat
            conc_sup = max(conc_sup, float(np.trace(w1 @ m).real))

    raw = {"comm": comm_sup, "grad": grad_sup, "mass": mass_sup,
           "concentration": conc_sup}
    scaled = {
        "comm": comm_sup * eps ** (grid.dim - 1),
        "grad": grad_sup * eps ** (grid.dim - 1),
        "mass": mass_sup * eps ** grid.dim,
        "concentration": conc_sup * eps ** grid.dim,
    }
    samples = {
        "z": np.asarray(z_points).tolist(),
        "p": np.asarray(p_samples).tolist(),
        "t": times,
        "z_stride": z_stride,
        "domain_lower": list(dom.lower),
        "domain_upper": list(dom.upper),
    }
    return SemiclassicalReport(eps, power, raw, scaled, samples)


def _trace_norm(mat: np.ndarray) -> float:
    return float(np.linalg.svd(mat, compute_uv=False).sum())


# --- concentration in time ----------------------------------------------------

def concentration_series(trajectory, eps: float, z_stride: int = 1) -> dict:
    """sup_z tr(W_z^(1) omega_t) along a trajectory of (time, state) pairs.

    Uses the static localizer (diagonal weight), so the supremum reduces to a
    weighted sum over the density.  Values are reported raw and scaled by
    eps^dim; the first time the raw value exceeds twice its initial value is
    flagged (None when that never happens).
    """
    pairs = list(trajectory)
    if not pairs:
        raise ValueError("empty trajectory")
    grid = pairs[0][1].grid
    idx = np.arange(grid.n_sites).reshape(grid.shape)
    for a in range(grid.dim):
        idx = np.take(idx, np.arange(0, grid.points_per_axis, z_stride), axis=a)
    z_points = grid.positions[idx.ravel()]
    weights = np.stack([localization_weights(grid, z, 1) for z in z_points])
    times, raw = [], []
    for t, state in pairs:
        diag = state.mat.diagonal().real
        raw.append(float(np.max(weights @ diag)))
        times.append(float(t))
    raw_arr = np.asarray(raw)
    doubled = np.nonzero(raw_arr > 2.0 * raw_arr[0])[0]
    return {
        "times": times,
        "raw": raw_arr.tolist(),
        "scaled": (raw_arr * eps ** grid.dim).tolist(),
        "first_doubling_time": (times[int(doubled[0])] if doubled.size else None),
        "z_stride": z_stride,
    }


def exponential_envelope_constant(times, values, eps: float, dim: int) -> float:
    """Smallest C with values(t) <= C e^{C t} eps^{-dim} pointwise (bisection)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    scale = eps ** float(-dim)

    def fits(c: float) -> bool:
        return bool(np.all(v <= c * np.exp(c * t) * scale + 1e-15))

    hi = 1.0
    while not fits(hi):
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("no reasonable envelope constant")
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --- transported localizer under the boosted flow -----------------------------

def _probe_vectors(grid: Grid, n_probes: int, seed: int) -> np.ndarray:
    """Deterministic smooth random probes, unit l2 norm."""
    rng = np.random.default_rng(seed)
    envelope = 1.0 / (1.0 + grid.momentum_norms ** 2)
    probes = np.empty((n_probes, grid.n_sites), dtype=np.complex128)
    for k in range(n_probes):
        coeff = (rng.standard_normal(grid.n_sites)
                 + 1j * rng.standard_normal(grid.n_sites)) * envelope
        vec = grid.to_position_vector(coeff)
        probes[k] = vec / np.linalg.norm(vec)
    return probes


def localization_transport_ratio(potential: Potential, background: OnePDM,
                                 cfg: PropagatorConfig, z, power: int,
                                 t0: float, p, s: float, t: float,
                                 n_probes: int = 8, seed: int = 0) -> float:
    """Empirical constant of the transported-localizer bound.

    Probes ride the boosted mean-field flow (kinetic symbol
    eps^2(|k|^2 - p.k), mean field from the co-evolved background state);
    the ratio compares <phi_t, W_z^(n)(t0) phi_t> against the transported
    localizer <phi_s, W^(n)_{z + eps p (t-s)}(t0 + t - s) phi_s> and the
    maximum over the probe set is returned.
    """
    grid = background.grid
    eps, dt = cfg.eps, cfg.dt
    p = np.atleast_1d(np.asarray(p, dtype=float))
    for label, duration in (("s", s), ("t-s", t - s)):
        steps = duration / dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"interval {label} is not an integer number of steps")
    n_pre = int(round(s / dt))
    n_run = int(round((t - s) / dt))

    half_bg = np.exp(-1j * kinetic_symbol(grid, eps, cfg.relativistic) * (dt / (2.0 * eps)))
    boosted = kinetic_symbol(grid, eps, cfg.relativistic) - eps ** 2 * (grid.dual_momenta @ p)
    half_prob = np.exp(-1j * boosted * (dt / (2.0 * eps)))

    work = background.mat.copy()
    for _ in range(n_pre):
        work = _background_step(work, grid, potential, eps, dt, half_bg)[0]
    probes = _probe_vectors(grid, n_probes, seed)
    evolved = probes.copy()
    for _ in range(n_run):
        work, wfield = _background_step(work, grid, potential, eps, dt, half_bg)
        mid_phase = np.exp(-1j * wfield * (dt / eps))
        for k in range(n_probes):
            v = grid.apply_momentum_phase(evolved[k], half_prob)
            v = v * mid_phase
            evolved[k] = grid.apply_momentum_phase(v, half_prob)

    w_num = localization_operator(grid, z, power, t0, eps).kernel.mat
    z_shift = np.atleast_1d(np.asarray(z, dtype=float)) + eps * p * (t - s)
    w_den = localization_operator(grid, z_shift, power, t0 + (t - s), eps).kernel.mat
    ratio = 0.0
    for k in range(n_probes):
        num = float(np.vdot(evolved[k], w_num @ evolved[k]).real)
        den = float(np.vdot(probes[k], w_den @ probes[k]).real)
        ratio = max(ratio, num / den)
    return ratio


def _background_step(mat: np.ndarray, grid: Grid, potential: Potential,
                     eps: float, dt: float, half_phase: np.ndarray):
    """One Strang step of the plain flow; returns (new mat, mean field used)."""
    work = grid.conjugate_by_momentum_phase(mat, half_phase)
    dens = (eps ** grid.dim / grid.cell_volume) * work.diagonal().real
    wfield = potential.mean_field(dens)
    phase = np.exp(-1j * wfield * (dt / eps))
    work = phase[:, None] * work * phase.conj()[None, :]
    return grid.conjugate_by_momentum_phase(work, half_phase), wfield


# --- scalar functionals --------------------------------------------------------

def purity(omega: OnePDM) -> float:
    """tr omega(1 - omega), zero exactly on projectors."""
    m = omega.mat
    return float((np.trace(m) - np.trace(m @ m)).real)


def fluctuation_number(gamma: OnePDM, omega: OnePDM) -> float:
    """2 tr gamma (1 - omega)."""
    g, w = gamma.mat, omega.mat
    return float(2.0 * (np.trace(g) - np.trace(g @ w)).real)


def mass_outside(state: OnePDM, inside: np.ndarray) -> float:
    """Particle mass carried by sites outside the boolean mask."""
    inside = np.asarray(inside, dtype=bool).ravel()
    if inside.shape != (state.grid.n_sites,):
        raise ValueError("mask must cover the grid sites")
    diag = state.mat.diagonal().real
    return float(diag[~inside].sum())


def light_cone_leakage(state: OnePDM, region: DomainWeight, t: float,
                       speed: float = 1.0, margin: float = 0.0) -> float:
    """Mass outside the region inflated by speed*|t|*(1+margin)."""
    inflated = region.inflated(speed * abs(t) * (1.0 + margin))
    return mass_outside(state, inflated.contains(state.grid.positions))
