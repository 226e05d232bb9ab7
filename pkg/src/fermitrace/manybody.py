"""Exact propagation of few-fermion states on small 1-d grids.

The N-particle space is spanned by occupation bitmasks over the grid sites,
kept in ascending numeric order.  Amplitudes form a plain l2-normalized
coefficient vector in that basis; the correspondence with first-quantized
wavefunction values is psi(x_{s_1}, ..., x_{s_N}) = c_S / sqrt(N! h^N) on
ascending tuples.  The Hamiltonian is

    H = sum_j T_j + eps^dim sum_{i<j} V(x_i - x_j)

with T the spectral kinetic matrix shared with the mean-field module, and
states evolve under exp(-i H t / eps) via Lanczos stepping with a dense
eigendecomposition double-check available for tiny dimensions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _ed
from .grid import Grid
from .hartree import Potential, kinetic_symbol
from .operators import OperatorKernel
from .states import OnePDM

BASIS_CAP = 200_000
MAX_PARTICLES = 5


class CapacityError(ValueError):
    """Raised when a requested exact computation exceeds the documented caps."""


class KacScaleError(ValueError):
    """Raised when the dilation factor is incommensurate with the grid."""


@lru_cache(maxsize=32)
def basis_masks(m: int, n: int) -> np.ndarray:
    """All n-subsets of m sites as bitmasks, ascending numeric order."""
    if not 0 <= n <= m:
        raise ValueError("need 0 <= n <= m")
    if math.comb(m, n) > BASIS_CAP:
        raise CapacityError(
            f"basis size C({m},{n}) = {math.comb(m, n)} exceeds cap {BASIS_CAP}")
    masks = np.fromiter((sum(1 << s for s in c) for c in combinations(range(m), n)),
                        dtype=np.uint64, count=math.comb(m, n))
    masks.sort()
    masks.setflags(write=False)
    return masks


@dataclass
class ManyBodyState:
    """Amplitudes over the fixed-N bitmask basis of a 1-d grid."""

    grid: Grid
    n_particles: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 1:
            raise CapacityError("exact evolution is limited to 1-d grids")
        if self.n_particles > MAX_PARTICLES:
            raise CapacityError(f"exact evolution capped at {MAX_PARTICLES} particles")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis_size,):
            raise ValueError("amplitude vector does not match the basis size")

    @property
    def masks(self) -> np.ndarray:
        return basis_masks(self.grid.n_sites, self.n_particles)

    @property
    def basis_size(self) -> int:
        return math.comb(self.grid.n_sites, self.n_particles)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "ManyBodyState":
        return ManyBodyState(self.grid, self.n_particles, self.amplitudes / self.norm())

    def overlap(self, other: "ManyBodyState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def wavefunction_value(self, sites) -> complex:
        """First-quantized value at the given site tuple (any order)."""
        sites = list(sites)
        if len(set(sites)) != len(sites):
            return 0.0
        order = np.argsort(sites)
        sign = _permutation_sign(order)
        mask = np.uint64(sum(1 << int(s) for s in sites))
        idx = int(np.searchsorted(self.masks, mask))
        if idx >= self.masks.size or self.masks[idx] != mask:
            raise ValueError("site tuple outside the grid")
        h = self.grid.cell_volume
        scale = math.sqrt(math.factorial(self.n_particles) * h ** self.n_particles)
        return sign * complex(self.amplitudes[idx]) / scale


def _permutation_sign(order) -> int:
    seen = [False] * len(order)
    sign = 1
    for start in range(len(order)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = int(order[j])
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def slater_amplitudes(grid: Grid, orbitals: np.ndarray) -> np.ndarray:
    """Coefficients of the Slater determinant of orthonormal orbital columns."""
    phi = np.asarray(orbitals, dtype=complex)
    n = phi.shape[1]
    masks = basis_masks(grid.n_sites, n)
    rows = np.nonzero(((masks[:, None] >> np.arange(grid.n_sites, dtype=np.uint64)[None, :])
                       & np.uint64(1)).astype(bool))
    site_table = rows[1].reshape(masks.size, n)
    sub = phi[site_table, :]          # (basis, n, n)
    dets = np.linalg.det(sub)
    return dets * grid.cell_volume ** (n / 2.0)


class ManyBodyHamiltonian:
    """Shared-convention exact Hamiltonian for small systems."""

    def __init__(self, grid: Grid, eps: float, potential: Potential,
                 relativistic: bool = False):
        if grid.dim != 1:
            raise CapacityError("exact evolution is limited to 1-d grids")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.grid = grid
        self.eps = eps
        self.potential = potential
        self.relativistic = relativistic
        sym = kinetic_symbol(grid, eps, relativistic)
        self.one_body = grid.to_position_matrix(np.diag(sym.astype(complex)))
        self.one_body = (self.one_body + self.one_body.conj().T) / 2.0
        self.pair = eps ** grid.dim * potential.displacement_table()
        self._mats: dict = {}
        self._bounds: dict = {}

    def matrix(self, n_particles: int) -> sp.csr_matrix:
        if n_particles not in self._mats:
            masks = basis_masks(self.grid.n_sites, n_particles)
            rows, cols, data = _ed.build_hamiltonian_parts(
                np.asarray(masks), self.one_body, self.pair)
            dim = masks.size
            mat = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
            self._mats[n_particles] = mat
        return self._mats[n_particles]

    def spectral_bounds(self, n_particles: int) -> tuple[float, float]:
        """Cheap (lo, hi) enclosure of the spectrum for substep control."""
        if n_particles not in self._bounds:
            h = self.matrix(n_particles)
            if h.shape[0] <= 400:
                ev = np.linalg.eigvalsh(h.toarray())
                self._bounds[n_particles] = (float(ev[0]), float(ev[-1]))
            else:
                try:
                    hi = float(spla.eigsh(h, k=1, which="LA", tol=1e-2,
                                          return_eigenvectors=False)[0])
                    lo = float(spla.eigsh(h, k=1, which="SA", tol=1e-2,
                                          return_eigenvectors=False)[0])
                    pad = 0.01 * (hi - lo) + 1e-9
                    self._bounds[n_particles] = (lo - pad, hi + pad)
                except spla.ArpackNoConvergence:
                    # Gershgorin fallback, coarse but safe
                    d = h.diagonal().real
                    off = np.abs(h).sum(axis=1).A1 - np.abs(d)
                    self._bounds[n_particles] = (float((d - off).min()),
                                                 float((d + off).max()))
        return self._bounds[n_particles]


def _expm_lanczos(hmat: sp.csr_matrix, shift: float, vec: np.ndarray, tau: float,
                  k_dim: int) -> tuple[np.ndarray, float]:
    """w = exp(-i tau (H - shift)) vec with an a posteriori error estimate."""
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        return vec.copy(), 0.0
    dim = vec.size
    k_dim = min(k_dim, dim)
    basis = np.zeros((k_dim, dim), dtype=np.complex128)
    alpha = np.zeros(k_dim)
    beta = np.zeros(k_dim)
    basis[0] = vec / nrm
    used = k_dim
    happy = False
    for j in range(k_dim):
        w = hmat @ basis[j] - shift * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        alpha[j] = float(np.vdot(basis[j], w).real)
        w -= alpha[j] * basis[j]
        # full reorthogonalization keeps the tridiagonal honest at long tau
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = float(np.linalg.norm(w))
        if j + 1 == k_dim:
            break
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
            used = j + 1
            happy = True
            break
        basis[j + 1] = w / beta[j]
    tri = np.diag(alpha[:used]) + np.diag(beta[:used - 1], 1) + np.diag(beta[:used - 1], -1)
    ev, evec = np.linalg.eigh(tri)
    small = evec @ (np.exp(-1j * tau * ev) * evec.conj().T[:, 0])
    out = nrm * (basis[:used].T @ small)
    err = 0.0 if happy else float(abs(beta[used - 1] * small[used - 1])) * nrm
    return out, err


def exact_evolve(state: ManyBodyState, hamiltonian: ManyBodyHamiltonian, t: float,
                 krylov_dim: int = 30, theta_max: float = 10.0,
                 local_tol: float = 1e-10) -> ManyBodyState:
    """Propagate exp(-i H t / eps) with Lanczos substeps.

    Substeps are sized so the shifted spectral radius times tau stays at or
    below theta_max; each substep additionally checks an a posteriori error
    estimate against local_tol and halves itself as needed.
    """
    if state.grid.metadata() != hamiltonian.grid.metadata():
        raise ValueError("state and hamiltonian live on different grids")
    h = hamiltonian.matrix(state.n_particles)
    lo, hi = hamiltonian.spectral_bounds(state.n_particles)
    shift = 0.5 * (lo + hi)
    radius = max(0.5 * (hi - lo), 1e-12)
    tau_total = t / hamiltonian.eps
    n_sub = max(1, int(math.ceil(radius * abs(tau_total) / theta_max)))
    vec = state.amplitudes.copy()
    remaining = [tau_total / n_sub] * n_sub
    depth_guard = 0
    while remaining:
        tau = remaining.pop()
        out, err = _expm_lanczos(h, shift, vec, tau, krylov_dim)
        if err > local_tol * max(1.0, np.linalg.norm(vec)) and depth_guard < 40:
            remaining.extend([tau / 2.0, tau / 2.0])
            depth_guard += 1
            continue
        vec = out * np.exp(-1j * tau * shift)
    return ManyBodyState(state.grid, state.n_particles, vec)


def dense_evolve(state: ManyBodyState, hamiltonian: ManyBodyHamiltonian,
                 t: float) -> ManyBodyState:
    """Reference propagation through a full eigendecomposition."""
    h = hamiltonian.matrix(state.n_particles)
    if h.shape[0] > 4096:
        raise CapacityError("dense reference capped at dimension 4096")
    ev, evec = np.linalg.eigh(h.toarray())
    phases = np.exp(-1j * ev * (t / hamiltonian.eps))
    vec = evec @ (phases * (evec.conj().T @ state.amplitudes))
    return ManyBodyState(state.grid, state.n_particles, vec)


def reduce_one_pdm(state: ManyBodyState) -> OnePDM:
    """Reduced one-particle density matrix of a normalized state."""
    g = _ed.one_pdm(np.asarray(state.masks), state.amplitudes, state.grid.n_sites)
    g = (g + g.conj().T) / 2.0
    return OnePDM.from_matrix(state.grid, g)


def convergence_distance(state: ManyBodyState, omega: OnePDM) -> dict:
    """Distance diagnostics between the exact 1-pdm and a mean-field state."""
    gamma = reduce_one_pdm(state)
    n = float(round(gamma.particle_number()))
    diff = OperatorKernel(state.grid, gamma.entries - omega.entries)
    hs = diff.hs_norm()
    tr = diff.trace_norm()
    cross = float(np.trace(gamma.mat @ omega.mat).real)
    fluct = 2.0 * (gamma.particle_number() - cross)
    if hs ** 2 > fluct + 1e-9:
        raise ArithmeticError(
            "squared HS distance exceeded the fluctuation number; "
            "inputs violate the projector/trace preconditions")
    return {
        "n_particles": n,
        "hs_distance": hs,
        "trace_distance": tr,
        "fluctuation_number": fluct,
        "hs_over_sqrt_n": hs / math.sqrt(n) if n else 0.0,
        "trace_over_n": tr / n if n else 0.0,
    }


def kac_equivalence_check(state: ManyBodyState, potential: Potential, eps: float,
                          t: float, krylov_dim: int = 30,
                          theta_max: float = 10.0) -> dict:
    """Compare the standard flow against the dilated slow-time flow.

    The dilated system lives on a box stretched by gamma = 1/eps with the
    same site count, unit kinetic coefficient, interaction
    gamma^{-dim} V(./gamma) sampled on the stretched grid, and runs to time
    gamma t.  For integer gamma the dilation is an exact relabeling of the
    amplitude basis, so the two amplitude vectors are compared directly.
    """
    gamma = round(1.0 / eps)
    if abs(gamma * eps - 1.0) > 1e-12 or gamma < 1:
        raise KacScaleError(
            f"dilation 1/eps = {1/eps} is not an integer; the stretched state "
            "does not fit the grid (aliasing)")
    grid = state.grid
    base_ham = ManyBodyHamiltonian(grid, eps, potential)
    base = exact_evolve(state, base_ham, t, krylov_dim, theta_max)

    grid_k = Grid(grid.dim, tuple(b * gamma for b in grid.box_length), grid.points_per_axis)
    pot_k = Potential(grid_k, potential.values * float(gamma) ** (-grid.dim))
    ham_k = ManyBodyHamiltonian(grid_k, 1.0, pot_k)
    state_k = ManyBodyState(grid_k, state.n_particles, state.amplitudes.copy())
    dilated = exact_evolve(state_k, ham_k, gamma * t, krylov_dim, theta_max)

    dist = float(np.linalg.norm(base.amplitudes - dilated.amplitudes))
    return {"gamma": float(gamma), "time": t, "l2_distance": dist,
            "overlap": abs(complex(np.vdot(base.amplitudes, dilated.amplitudes)))}


# --- dumps ------------------------------------------------------------------

RECORD_DTYPE = np.dtype([("index", "<u8"), ("amplitude", "<c16")])


def save_many_body(prefix: str, state: ManyBodyState, extra: dict | None = None) -> None:
    """Write (bitmask, amplitude) records plus a JSON header."""
    rec = np.empty(state.basis_size, dtype=RECORD_DTYPE)
    rec["index"] = state.masks
    rec["amplitude"] = state.amplitudes
    with open(f"{prefix}.bin", "wb") as fh:
        fh.write(rec.tobytes(order="C"))
    meta = {
        "format": "fermitrace-manybody-v1",
        "encoding": "occupied-site-bitmask",
        "record": "uint64-le index, complex128-le amplitude",
        "n_particles": state.n_particles,
        "n_records": int(state.basis_size),
        "grid": state.grid.metadata(),
        "norm": state.norm(),
    }
    if extra:
        meta.update(extra)
    with open(f"{prefix}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_many_body(prefix: str) -> ManyBodyState:
    with open(f"{prefix}.json") as fh:
        meta = json.load(fh)
    grid = Grid.from_metadata(meta["grid"])
    rec = np.fromfile(f"{prefix}.bin", dtype=RECORD_DTYPE)
    n = int(meta["n_particles"])
    masks = basis_masks(grid.n_sites, n)
    if not np.array_equal(rec["index"], masks):
        order = np.argsort(rec["index"])
        rec = rec[order]
        if not np.array_equal(rec["index"], masks):
            raise ValueError("record indices do not form the expected basis")
    return ManyBodyState(grid, n, rec["amplitude"].copy())
