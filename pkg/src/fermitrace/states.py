"""Reduced one-particle density matrices: reference states and I/O.

States are OnePDM objects: hermitian kernels with spectrum in [0, 1] whose
trace is the particle number.  Three families are provided, a sharp momentum
ball (free gas), smeared phase-space quasi-projectors built from Gaussian
wave packets (coherent states), and Slater projectors from explicit orbitals.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .operators import OperatorKernel


class StateValidationError(ValueError):
    """Raised when a constructed state violates its contracts."""


def phase_space_cell_momentum(dim: int) -> float:
    """Radius coefficient kappa_d with |B_1| kappa_d^d = (2 pi)^d.

    With this choice a momentum ball of radius kappa_d rho^(1/d) holds
    exactly rho modes per unit volume in the continuum limit.
    """
    unit_ball = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}[dim]
    return 2.0 * math.pi / unit_ball ** (1.0 / dim)


class OnePDM(OperatorKernel):
    """One-particle density matrix on a grid."""

    def particle_number(self) -> float:
        return float(self.trace().real)

    def occupation_spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2.0)

    def purity_defect(self) -> float:
        """tr omega (1 - omega); zero exactly for projectors."""
        m = self.mat
        return float((np.trace(m) - np.trace(m @ m)).real)

    def density(self, eps: float) -> np.ndarray:
        """Scaled position density eps^dim * omega(x; x)."""
        return (eps ** self.grid.dim) * self.entries.diagonal().real.copy()

    def validate(self, tol: float = 1e-10) -> "OnePDM":
        scale = max(1.0, float(np.abs(self.mat).max()))
        if self.hermiticity_defect() > tol * scale:
            raise StateValidationError("state is not hermitian")
        ev = self.occupation_spectrum()
        if ev.min() < -tol or ev.max() > 1.0 + tol:
            raise StateValidationError(
                f"occupation spectrum outside [0,1]: [{ev.min():.3e}, {1 - ev.max():.3e}]")
        return self


# --- free gas ---------------------------------------------------------------

def fermi_mode_mask(grid: Grid, eps: float) -> np.ndarray:
    """Boolean mask over the dual lattice: |q| <= 1/eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return grid.momentum_norms <= 1.0 / eps + 1e-12


def free_fermi_gas(grid: Grid, eps: float) -> OnePDM:
    """Projector onto all dual modes with |q| <= 1/eps."""
    mask = fermi_mode_mask(grid, eps)
    if not mask.any():
        raise StateValidationError("Fermi ball contains no dual modes; decrease eps or enlarge the box")
    mat = grid.to_position_matrix(np.diag(mask.astype(complex)))
    return OnePDM.from_matrix(grid, mat)


def projector_from_modes(grid: Grid, mode_indices) -> OnePDM:
    """Projector onto an explicit set of dual modes."""
    diag = np.zeros(grid.n_sites, dtype=complex)
    diag[np.asarray(mode_indices, dtype=int)] = 1.0
    return OnePDM.from_matrix(grid, grid.to_position_matrix(np.diag(diag)))


def lowest_modes(grid: Grid, n_modes: int) -> np.ndarray:
    """Indices of the n kinetically lowest dual modes.

    Deterministic tie-break: sort by (|q|^2, q_1, ..., q_d) ascending.
    """
    if not 0 < n_modes <= grid.n_sites:
        raise ValueError("n_modes out of range")
    q = grid.dual_momenta
    keys = tuple(q[:, ax] for ax in reversed(range(grid.dim))) + (grid.momentum_norms ** 2,)
    order = np.lexsort(keys)
    return order[:n_modes]


# --- density profiles -------------------------------------------------------

@dataclass(frozen=True)
class DensityProfile:
    """Nonnegative target density with cell_volume * sum = n_particles."""

    grid: Grid
    values: np.ndarray
    n_particles: int

    @classmethod
    def uniform(cls, grid: Grid, n_particles: int) -> "DensityProfile":
        vals = np.full(grid.n_sites, n_particles / grid.volume)
        return cls(grid, vals, int(n_particles))

    @classmethod
    def bump(cls, grid: Grid, n_particles: int, center=None, width: float | None = None,
             floor: float = 0.0) -> "DensityProfile":
        """Smooth Gaussian bump profile, optionally on a constant floor."""
        if center is None:
            center = [b / 2.0 for b in grid.box_length]
        if width is None:
            width = min(grid.box_length) / 6.0
        d2 = grid.periodic_distance(grid.positions, center) ** 2
        vals = np.exp(-d2 / (2.0 * width ** 2)) + floor
        vals *= n_particles / (grid.cell_volume * vals.sum())
        return cls(grid, vals, int(n_particles))

    def gradient_scale(self) -> float:
        """max |rho|^(1/d) variation per unit length, reported by the harness."""
        g = self.grid
        v = (self.values ** (1.0 / g.dim)).reshape(g.shape)
        worst = 0.0
        for ax in range(g.dim):
            diff = np.abs(np.diff(v, axis=ax, append=np.take(v, [0], axis=ax)))
            worst = max(worst, float(diff.max()) / g.spacing[ax])
        return worst


# --- coherent states --------------------------------------------------------

def _periodized_gaussian(grid: Grid, delta: float) -> np.ndarray:
    """L2-normalized Gaussian of r.m.s. width delta centered at the origin."""
    disp = grid.minimal_image(grid.positions)
    vals = np.zeros(grid.n_sites)
    # sum the nearest images so the seam at L/2 stays smooth
    shifts = np.array(np.meshgrid(*([[-1.0, 0.0, 1.0]] * grid.dim), indexing="ij"))
    shifts = shifts.reshape(grid.dim, -1).T * np.asarray(grid.box_length)
    for s in shifts:
        vals += np.exp(-np.sum((disp + s) ** 2, axis=1) / (4.0 * delta ** 2))
    vals /= np.sqrt(grid.cell_volume * np.sum(vals ** 2))
    return vals


def coherent_state(grid: Grid, profile: DensityProfile, eps: float,
                   delta: float | None = None, rescale: bool = True) -> OnePDM:
    """Phase-space average of Gaussian wave packets below the local Fermi radius.

    omega = sum_{r,q} (cell_volume / volume) M(q, r) |f_{q,r}><f_{q,r}| with
    f_{q,r}(x) = exp(iq.x) g(x-r), g a Gaussian of width delta (default
    sqrt(eps)), and M the indicator of |q| <= kappa_d rho(r)^(1/d).  Dual
    modes exactly on the Fermi radius enter with weight 1/2, which keeps the
    trace at the continuum value when the radius hits the lattice exactly.
    """
    if delta is None:
        delta = math.sqrt(eps)
    if delta < max(grid.spacing):
        raise StateValidationError(
            f"packet width {delta:.3g} below grid spacing {max(grid.spacing):.3g}")
    g0 = _periodized_gaussian(grid, delta)
    qn = grid.momentum_norms
    kf = phase_space_cell_momentum(grid.dim) * profile.values ** (1.0 / grid.dim)
    n = grid.n_sites
    shape = grid.shape
    x = grid.positions
    mat = np.zeros((n, n), dtype=complex)
    weight = grid.cell_volume / grid.volume * grid.cell_volume
    site_multi = np.unravel_index(np.arange(n), shape)
    for r_idx in range(n):
        on_edge = np.abs(qn - kf[r_idx]) <= 1e-9 * max(1.0, kf[r_idx])
        inside = qn <= kf[r_idx] * (1.0 - 1e-9)
        m_weights = inside.astype(float) + 0.5 * on_edge
        sel = np.nonzero(m_weights)[0]
        if sel.size == 0:
            continue
        shift = tuple(int(ax[r_idx]) for ax in site_multi)
        g_r = np.roll(g0.reshape(shape), shift, axis=tuple(range(grid.dim))).ravel()
        waves = np.exp(1j * (x @ grid.dual_momenta[sel].T))  # (n, m_r)
        cols = waves * g_r[:, None]
        mat += (weight * cols * m_weights[sel][None, :]) @ cols.conj().T
    state = OnePDM.from_matrix(grid, (mat + mat.conj().T) / 2.0)
    tr = state.particle_number()
    target = float(profile.n_particles)
    if tr <= 0:
        raise StateValidationError("empty coherent state; profile too dilute for the dual lattice")
    if abs(tr - target) > 0.05 * target:
        raise StateValidationError(
            f"coherent trace {tr:.4f} off target {target} by more than 5%")
    if rescale:
        state = OnePDM(grid, state.entries * (target / tr))
    return state


# --- Slater projectors ------------------------------------------------------

def orthonormalize(grid: Grid, orbitals: np.ndarray) -> np.ndarray:
    """Gram-Schmidt in the quadrature inner product (QR on weighted columns)."""
    w = math.sqrt(grid.cell_volume)
    q, _ = np.linalg.qr(np.asarray(orbitals, dtype=complex) * w)
    return q / w


def slater_from_orbitals(grid: Grid, orbitals: np.ndarray, gram_tol: float = 1e-10) -> OnePDM:
    """Rank-N projector from N orthonormal orbital columns."""
    phi = np.asarray(orbitals, dtype=complex)
    if phi.ndim == 1:
        phi = phi[:, None]
    gram = grid.cell_volume * (phi.conj().T @ phi)
    if np.abs(gram - np.eye(phi.shape[1])).max() > gram_tol:
        raise StateValidationError("orbitals are not orthonormal; orthonormalize first")
    mat = grid.cell_volume * (phi @ phi.conj().T)
    return OnePDM.from_matrix(grid, mat)


def slater_many_body(grid: Grid, orbitals: np.ndarray, gram_tol: float = 1e-10):
    """Exact N-body amplitudes of the Slater determinant of the orbital columns.

    Companion to slater_from_orbitals: reducing the returned state to its
    one-particle density matrix recovers the projector onto the same orbitals.
    """
    from .manybody import ManyBodyState, slater_amplitudes
    phi = np.asarray(orbitals, dtype=complex)
    if phi.ndim == 1:
        phi = phi[:, None]
    gram = grid.cell_volume * (phi.conj().T @ phi)
    if np.abs(gram - np.eye(phi.shape[1])).max() > gram_tol:
        raise StateValidationError("orbitals are not orthonormal; orthonormalize first")
    return ManyBodyState(grid, phi.shape[1], slater_amplitudes(grid, phi))


def plane_wave_orbitals(grid: Grid, mode_indices) -> np.ndarray:
    """Normalized plane waves for the given dual modes, one per column."""
    q = grid.dual_momenta[np.asarray(mode_indices, dtype=int)]
    return np.exp(1j * (grid.positions @ q.T)) / math.sqrt(grid.volume)


def slater_lowest_modes(grid: Grid, n_particles: int) -> OnePDM:
    """Slater projector filling the n kinetically lowest modes."""
    return slater_from_orbitals(grid, plane_wave_orbitals(grid, lowest_modes(grid, n_particles)))


def gaussian_orbitals(grid: Grid, centers, width: float) -> np.ndarray:
    """Gaussian packets at the given centers, orthonormalized."""
    cols = []
    for c in centers:
        d2 = grid.periodic_distance(grid.positions, c) ** 2
        cols.append(np.exp(-d2 / (4.0 * width ** 2)))
    return orthonormalize(grid, np.stack(cols, axis=-1))


# --- harness-facing construction -------------------------------------------

def build_state(grid: Grid, eps: float, recipe: dict) -> OnePDM:
    """Build a state from a flat config table (see harness docs)."""
    kind = recipe.get("kind", "free_gas")
    if kind == "free_gas":
        return free_fermi_gas(grid, eps)
    if kind == "coherent":
        n = int(recipe.get("n_particles", round(grid.volume / eps ** grid.dim)))
        shape = recipe.get("profile", "uniform")
        if shape == "uniform":
            prof = DensityProfile.uniform(grid, n)
        elif shape == "bump":
            prof = DensityProfile.bump(grid, n, center=recipe.get("center"),
                                       width=recipe.get("width"), floor=recipe.get("floor", 0.0))
        else:
            raise ValueError(f"unknown profile {shape!r}")
        return coherent_state(grid, prof, eps, delta=recipe.get("delta"))
    if kind == "slater_lowest":
        n = int(recipe.get("n_particles", round(grid.volume / eps ** grid.dim)))
        return slater_lowest_modes(grid, n)
    if kind == "slater_gaussians":
        width = float(recipe.get("width", min(grid.box_length) / 12.0))
        return slater_from_orbitals(grid, gaussian_orbitals(grid, recipe["centers"], width))
    raise ValueError(f"unknown state kind {kind!r}")


# --- dumps ------------------------------------------------------------------

DUMP_DTYPE = np.dtype("<c16")


def save_state(prefix: str, state: OnePDM, extra: dict | None = None) -> None:
    """Write kernel entries as row-major complex128 (little endian) plus sidecar."""
    entries = np.ascontiguousarray(state.entries, dtype=DUMP_DTYPE)
    with open(f"{prefix}.bin", "wb") as fh:
        fh.write(entries.tobytes(order="C"))
    meta = {
        "format": "fermitrace-onepdm-v1",
        "dtype": "complex128-little-endian",
        "order": "row-major",
        "convention": "kernel-entries",
        "shape": list(entries.shape),
        "grid": state.grid.metadata(),
        "trace": state.particle_number(),
    }
    if extra:
        meta.update(extra)
    with open(f"{prefix}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_state(prefix: str) -> OnePDM:
    with open(f"{prefix}.json") as fh:
        meta = json.load(fh)
    grid = Grid.from_metadata(meta["grid"])
    raw = np.fromfile(f"{prefix}.bin", dtype=DUMP_DTYPE)
    entries = raw.reshape(meta["shape"])
    return OnePDM(grid, entries)
