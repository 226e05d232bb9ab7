"""Periodic position grids and their dual momentum lattices.

Everything downstream works on a uniform grid over a torus of side lengths
``box_length`` with ``points_per_axis`` sites per axis.  Vectors are sampled
function values at the sites, flattened in C order; the dual lattice carries
momenta 2*pi*k/L per axis in FFT ordering, flattened the same way.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised for invalid grid parameters."""


def _as_lengths(box_length, dim: int) -> tuple[float, ...]:
    if np.isscalar(box_length):
        lengths = (float(box_length),) * dim
    else:
        lengths = tuple(float(b) for b in box_length)
    if len(lengths) != dim:
        raise GridError(f"box_length needs {dim} entries, got {len(lengths)}")
    if any(b <= 0 for b in lengths):
        raise GridError("box lengths must be positive")
    return lengths


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a d-dimensional torus.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 to 3.
    box_length : float or sequence of float
        Torus side length per axis.
    points_per_axis : int
        Sites per axis; must be even so the dual lattice is symmetric
        around zero up to the single Nyquist mode.
    """

    dim: int
    box_length: tuple[float, ...]
    points_per_axis: int
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __init__(self, dim: int, box_length, points_per_axis: int):
        if dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {dim}")
        m = int(points_per_axis)
        if m <= 0 or m % 2 != 0:
            raise GridError(f"points_per_axis must be a positive even integer, got {points_per_axis}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "box_length", _as_lengths(box_length, dim))
        object.__setattr__(self, "points_per_axis", m)
        object.__setattr__(self, "_cache", {})

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def n_sites(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(b / self.points_per_axis for b in self.box_length)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box_length))

    @property
    def positions(self) -> np.ndarray:
        """Site coordinates, shape (n_sites, dim), C-order flattening."""
        if "positions" not in self._cache:
            axes = [np.arange(self.points_per_axis) * h for h in self.spacing]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._cache["positions"] = np.stack([m.ravel() for m in mesh], axis=-1)
        return self._cache["positions"]

    @property
    def dual_momenta(self) -> np.ndarray:
        """Dual lattice momenta 2*pi*k/L, shape (n_sites, dim), FFT ordering."""
        if "dual" not in self._cache:
            axes = [2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=h)
                    for h in self.spacing]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._cache["dual"] = np.stack([m.ravel() for m in mesh], axis=-1)
        return self._cache["dual"]

    @property
    def momentum_norms(self) -> np.ndarray:
        if "qnorm" not in self._cache:
            self._cache["qnorm"] = np.linalg.norm(self.dual_momenta, axis=1)
        return self._cache["qnorm"]

    def minimal_image(self, displacement: np.ndarray) -> np.ndarray:
        """Wrap displacements into [-L/2, L/2) per axis."""
        disp = np.asarray(displacement, dtype=float)
        box = np.asarray(self.box_length)
        return disp - box * np.round(disp / box)

    def periodic_distance(self, points: np.ndarray, z) -> np.ndarray:
        """Torus distance from each point to z."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        zz = np.asarray(z, dtype=float).reshape(1, self.dim)
        d = np.linalg.norm(self.minimal_image(pts - zz), axis=1)
        return d if np.asarray(points).ndim > 1 else d[0]

    # --- transforms -------------------------------------------------------
    # The unitary DFT U[k,i] = exp(-i q_k . x_i)/sqrt(n) maps site vectors to
    # momentum vectors; both representations use the plain l2 inner product
    # scaled by cell_volume on the position side (see operators.py).

    def to_momentum_vector(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values).reshape(self.shape)
        return np.fft.fftn(v).ravel() / np.sqrt(self.n_sites)

    def to_position_vector(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs).reshape(self.shape)
        return np.fft.ifftn(c).ravel() * np.sqrt(self.n_sites)

    def to_momentum_matrix(self, mat: np.ndarray) -> np.ndarray:
        """Conjugate an n x n matrix by the unitary DFT: U @ mat @ U^dagger."""
        n = self.n_sites
        t = np.asarray(mat).reshape(self.shape * 2)
        row_axes = tuple(range(self.dim))
        col_axes = tuple(range(self.dim, 2 * self.dim))
        out = np.fft.ifftn(np.fft.fftn(t, axes=row_axes), axes=col_axes)
        return out.reshape(n, n)

    def to_position_matrix(self, mat: np.ndarray) -> np.ndarray:
        n = self.n_sites
        t = np.asarray(mat).reshape(self.shape * 2)
        row_axes = tuple(range(self.dim))
        col_axes = tuple(range(self.dim, 2 * self.dim))
        out = np.fft.fftn(np.fft.ifftn(t, axes=row_axes), axes=col_axes)
        return out.reshape(n, n)

    def conjugate_by_momentum_phase(self, mat: np.ndarray, phase: np.ndarray) -> np.ndarray:
        """Return D mat D^dagger where D = U^dagger diag(phase) U.

        ``phase`` is a vector over the dual lattice (flattened like
        dual_momenta); D is the position-space matrix of the corresponding
        Fourier multiplier.  Valid for arbitrary phase functions, even ones
        without the k -> -k symmetry.
        """
        ph = np.asarray(phase).ravel()
        work = self.to_momentum_matrix(np.asarray(mat, dtype=complex))
        work *= ph[:, None]
        work *= ph.conj()[None, :]
        return self.to_position_matrix(work)

    def apply_momentum_phase(self, values: np.ndarray, phase: np.ndarray) -> np.ndarray:
        """Apply the Fourier multiplier diag(phase) to a site vector."""
        v = np.asarray(values).reshape(self.shape)
        ph = np.asarray(phase).reshape(self.shape)
        return np.fft.ifftn(np.fft.fftn(v) * ph).ravel()

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "box_length": list(self.box_length),
            "points_per_axis": self.points_per_axis,
        }

    @classmethod
    def from_metadata(cls, meta: dict) -> "Grid":
        return cls(int(meta["dim"]), meta["box_length"], int(meta["points_per_axis"]))
