"""Mean-field propagation of one-particle density matrices.

The flow  i eps d omega/dt = [T + (V * rho_t)(x) - X_t, omega]  with
rho_t(x) = eps^dim omega_t(x;x) is integrated by Strang splitting

    exp(-i dt T / 2 eps) . exp(-i dt W / eps) . exp(-i dt T / 2 eps)

conjugating omega, with the mean field W evaluated from the density at the
kinetic half step.  Because the potential substep is diagonal in position it
leaves the density invariant, so that predictor density is self-consistent
for the whole substep and the scheme is time reversible and second order.
T is -eps^2 Laplacian, or sqrt(1 - eps^2 Laplacian) in the relativistic
variant; the exchange term X_t(x;y) = eps^dim V(x-y) omega_t(x;y) can be
switched on, at the cost of a dense matrix exponential per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .grid import Grid
from .operators import OperatorKernel
from .states import OnePDM


@dataclass(frozen=True)
class Potential:
    """Real even pair potential sampled on grid displacements."""

    grid: Grid
    values: np.ndarray
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def gaussian(cls, grid: Grid, strength: float = 1.0, width: float | None = None) -> "Potential":
        if width is None:
            width = min(grid.box_length) / 10.0
        disp = grid.minimal_image(grid.positions)
        vals = np.zeros(grid.n_sites)
        shifts = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * grid.dim), indexing="ij"))
        shifts = shifts.reshape(grid.dim, -1).T * np.asarray(grid.box_length)
        for s in shifts:
            vals += np.exp(-np.sum((disp + s) ** 2, axis=1) / (2.0 * width ** 2))
        return cls(grid, strength * vals)

    @classmethod
    def zero(cls, grid: Grid) -> "Potential":
        return cls(grid, np.zeros(grid.n_sites))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_sites,):
            raise ValueError("potential samples must match the grid")
        object.__setattr__(self, "values", vals)

    def fourier_coefficients(self) -> np.ndarray:
        """Series coefficients c_q with V(x) = sum_q c_q exp(iq.x)."""
        if "chat" not in self._cache:
            g = self.grid
            self._cache["chat"] = np.fft.fftn(self.values.reshape(g.shape)).ravel() / g.n_sites
        return self._cache["chat"]

    def symmetry_defect(self) -> float:
        """Max deviation of the coefficients from real and even."""
        c = self.fourier_coefficients()
        scale = max(1.0, np.abs(c).max())
        return float(np.abs(c.imag).max() / scale)

    def smoothness_report(self, max_order: int = 7) -> dict:
        """Weighted coefficient sums sum_q (1 + |q|^m) |c_q| for m <= max_order."""
        c = np.abs(self.fourier_coefficients())
        qn = self.grid.momentum_norms
        return {f"m{m}": float(np.sum((1.0 + qn ** m) * c)) for m in range(max_order + 1)}

    def mean_field(self, density: np.ndarray) -> np.ndarray:
        """(V * rho)(x_i) by FFT circular convolution with quadrature weight."""
        g = self.grid
        vhat = np.fft.fftn(self.values.reshape(g.shape))
        rhat = np.fft.fftn(np.asarray(density).reshape(g.shape))
        conv = np.fft.ifftn(vhat * rhat).real.ravel()
        return g.cell_volume * conv

    def displacement_table(self) -> np.ndarray:
        """V(x_i - x_j) as an (n, n) table, built once."""
        if "table" not in self._cache:
            g = self.grid
            multi = np.unravel_index(np.arange(g.n_sites), g.shape)
            diff = tuple((ax[:, None] - ax[None, :]) % g.points_per_axis for ax in multi)
            self._cache["table"] = self.values.reshape(g.shape)[diff]
        return self._cache["table"]


@dataclass(frozen=True)
class PropagatorConfig:
    """Stepping parameters for the mean-field flow."""

    eps: float
    dt: float
    relativistic: bool = False
    exchange: bool = False
    self_consistency_iters: int = 1

    def __post_init__(self):
        if self.eps <= 0 or self.dt == 0:
            raise ValueError("eps must be positive and dt nonzero")
        if self.self_consistency_iters < 1:
            raise ValueError("self_consistency_iters must be >= 1")


def kinetic_symbol(grid: Grid, eps: float, relativistic: bool = False) -> np.ndarray:
    """Kinetic dispersion over the dual lattice."""
    q2 = grid.momentum_norms ** 2
    if relativistic:
        return np.sqrt(1.0 + eps ** 2 * q2)
    return eps ** 2 * q2


def free_evolution_phase(grid: Grid, eps: float, t: float, relativistic: bool = False) -> np.ndarray:
    """Fourier multiplier of exp(-i T t / eps)."""
    return np.exp(-1j * kinetic_symbol(grid, eps, relativistic) * (t / eps))


def _density_scaled(mat: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    return (eps ** grid.dim / grid.cell_volume) * mat.diagonal().real


def _step_matrix(mat: np.ndarray, grid: Grid, potential: Potential,
                 cfg: PropagatorConfig) -> np.ndarray:
    half = np.exp(-1j * kinetic_symbol(grid, cfg.eps, cfg.relativistic) * (cfg.dt / (2.0 * cfg.eps)))
    work = grid.conjugate_by_momentum_phase(mat, half)
    w = potential.mean_field(_density_scaled(work, grid, cfg.eps))
    for _ in range(cfg.self_consistency_iters - 1):
        # the diagonal potential substep preserves the density, so the
        # fixed point is reached immediately; kept as a configurable check
        probe = np.exp(-1j * w * (cfg.dt / cfg.eps))
        trial = probe[:, None] * work * probe.conj()[None, :]
        w = potential.mean_field(_density_scaled(trial, grid, cfg.eps))
    if cfg.exchange:
        # kernel eps^d V(x-y) w(x;y) acts on value vectors with one extra
        # cell_volume from the quadrature sum, leaving eps^d * table * mat
        xmat = (cfg.eps ** grid.dim) * potential.displacement_table() * work
        h_half = np.diag(w.astype(complex)) - xmat
        u = expm(-1j * (cfg.dt / cfg.eps) * h_half)
        work = u @ work @ u.conj().T
    else:
        phase = np.exp(-1j * w * (cfg.dt / cfg.eps))
        work = phase[:, None] * work * phase.conj()[None, :]
    return grid.conjugate_by_momentum_phase(work, half)


def hartree_step(state: OnePDM, potential: Potential, cfg: PropagatorConfig) -> OnePDM:
    """One Strang step of the Hartree flow."""
    out = _step_matrix(state.mat, state.grid, potential, replace(cfg, exchange=False))
    return OnePDM.from_matrix(state.grid, out)


def hartree_fock_step(state: OnePDM, potential: Potential, cfg: PropagatorConfig) -> OnePDM:
    """One Strang step including the exchange term."""
    out = _step_matrix(state.mat, state.grid, potential, replace(cfg, exchange=True))
    return OnePDM.from_matrix(state.grid, out)


def relativistic_step(state: OnePDM, potential: Potential, cfg: PropagatorConfig) -> OnePDM:
    """One Strang step with the square-root kinetic dispersion."""
    out = _step_matrix(state.mat, state.grid, potential, replace(cfg, relativistic=True))
    return OnePDM.from_matrix(state.grid, out)


def evolve(state: OnePDM, potential: Potential, cfg: PropagatorConfig, t_final: float,
           callback=None) -> OnePDM:
    """Run the flow to t_final (an integer number of dt steps).

    callback(step_index, time, state) is invoked after every step when given;
    step 0 fires on the initial state before stepping.
    """
    n_steps = int(round(t_final / cfg.dt))
    if abs(n_steps * cfg.dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError(f"t_final {t_final} is not an integer multiple of dt {cfg.dt}")
    grid = state.grid
    mat = state.mat
    if callback is not None:
        callback(0, 0.0, OnePDM.from_matrix(grid, mat))
    for k in range(1, n_steps + 1):
        mat = _step_matrix(mat, grid, potential, cfg)
        if callback is not None:
            callback(k, k * cfg.dt, OnePDM.from_matrix(grid, mat))
    return OnePDM.from_matrix(grid, mat)


# --- observables ------------------------------------------------------------

def energy(state: OnePDM, potential: Potential, cfg: PropagatorConfig) -> float:
    """Conserved mean-field energy tr(T omega) + direct (+ exchange) terms."""
    grid = state.grid
    mat = state.mat
    sym = kinetic_symbol(grid, cfg.eps, cfg.relativistic)
    mom = grid.to_momentum_matrix(mat)
    kinetic = float(np.real(np.sum(sym * mom.diagonal())))
    dens = _density_scaled(mat, grid, cfg.eps)
    w = potential.mean_field(dens)
    direct = 0.5 * float(np.sum(w * dens)) * grid.cell_volume / cfg.eps ** grid.dim
    total = kinetic + direct
    if cfg.exchange:
        # -(eps^d/2) iint V(x-y) |omega(x;y)|^2 dx dy; the two quadrature
        # weights cancel the kernel normalization, leaving matrix entries
        table = potential.displacement_table()
        total -= 0.5 * cfg.eps ** grid.dim * float(np.sum(table * np.abs(mat) ** 2))
    return total


def total_momentum(state: OnePDM, eps: float) -> np.ndarray:
    """tr(-i eps grad omega), one component per axis."""
    grid = state.grid
    mom = grid.to_momentum_matrix(state.mat)
    occ = mom.diagonal().real
    return eps * (grid.dual_momenta.T @ occ)
