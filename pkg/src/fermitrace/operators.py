"""Kernel operators on periodic grids, their transforms and norms.

An operator K acts on grid functions by quadrature,

    (K f)(x_i) = spacing^dim * sum_j entries[i, j] f(x_j),

so ``entries`` holds kernel values k(x_i; x_j).  The matrix
``mat = cell_volume * entries`` acts by plain matmul on value vectors and
carries the operator's spectral data: its singular values, eigenvalues and
trace are exactly those of the operator on the (quadrature-weighted) L2
space.  All norms below are computed from ``mat``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


class MonotonicityPreconditionError(ValueError):
    """Raised when |A|^2 <= |B|^2 fails beyond tolerance."""


@dataclass(frozen=True)
class NormReport:
    """Operator, Hilbert-Schmidt and trace norms of one operator."""

    operator: float
    hilbert_schmidt: float
    trace: float

    def as_dict(self) -> dict:
        return {
            "operator": self.operator,
            "hilbert_schmidt": self.hilbert_schmidt,
            "trace": self.trace,
        }


class OperatorKernel:
    """Dense kernel operator over a Grid.

    Parameters
    ----------
    grid : Grid
    entries : ndarray, shape (n_sites, n_sites)
        Kernel values k(x_i; x_j).
    space : str
        "position" or "momentum"; transforms toggle it.
    """

    __slots__ = ("grid", "entries", "space")

    def __init__(self, grid: Grid, entries: np.ndarray, space: str = "position"):
        entries = np.ascontiguousarray(entries, dtype=np.complex128)
        n = grid.n_sites
        if entries.shape != (n, n):
            raise ValueError(f"entries shape {entries.shape} does not match grid ({n} sites)")
        if space not in ("position", "momentum"):
            raise ValueError(f"unknown space {space!r}")
        self.grid = grid
        self.entries = entries
        self.space = space

    # --- constructors -----------------------------------------------------

    @classmethod
    def from_matrix(cls, grid: Grid, mat: np.ndarray, space: str = "position") -> "OperatorKernel":
        """Wrap a plain matrix acting on value vectors."""
        return cls(grid, np.asarray(mat) / grid.cell_volume, space)

    @classmethod
    def identity(cls, grid: Grid) -> "OperatorKernel":
        return cls.from_matrix(grid, np.eye(grid.n_sites, dtype=complex))

    @classmethod
    def position_multiplier(cls, grid: Grid, values: np.ndarray) -> "OperatorKernel":
        """Multiplication operator (K f)(x) = F(x) f(x) from samples F(x_i)."""
        return cls.from_matrix(grid, np.diag(np.asarray(values, dtype=complex)))

    @classmethod
    def momentum_multiplier(cls, grid: Grid, values: np.ndarray) -> "OperatorKernel":
        """Fourier multiplier with the given symbol samples on the dual lattice."""
        sym = np.asarray(values, dtype=complex).ravel()
        mat = grid.to_position_matrix(np.diag(sym))
        return cls.from_matrix(grid, mat)

    # --- representation ---------------------------------------------------

    @property
    def mat(self) -> np.ndarray:
        """Matrix acting on value vectors by plain matmul."""
        return self.entries * self.grid.cell_volume

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.mat @ np.asarray(values, dtype=complex)

    def to_momentum(self) -> "OperatorKernel":
        if self.space == "momentum":
            return self
        mat = self.grid.to_momentum_matrix(self.mat)
        return OperatorKernel.from_matrix(self.grid, mat, space="momentum")

    def to_position(self) -> "OperatorKernel":
        if self.space == "position":
            return self
        mat = self.grid.to_position_matrix(self.mat)
        return OperatorKernel.from_matrix(self.grid, mat, space="position")

    # --- algebra ------------------------------------------------------------

    def compose(self, other: "OperatorKernel") -> "OperatorKernel":
        if self.space != other.space:
            raise ValueError("cannot compose operators in different representations")
        return OperatorKernel.from_matrix(self.grid, self.mat @ other.mat, self.space)

    def __matmul__(self, other: "OperatorKernel") -> "OperatorKernel":
        return self.compose(other)

    def __add__(self, other: "OperatorKernel") -> "OperatorKernel":
        if self.space != other.space:
            raise ValueError("cannot add operators in different representations")
        return OperatorKernel(self.grid, self.entries + other.entries, self.space)

    def __sub__(self, other: "OperatorKernel") -> "OperatorKernel":
        if self.space != other.space:
            raise ValueError("cannot subtract operators in different representations")
        return OperatorKernel(self.grid, self.entries - other.entries, self.space)

    def __mul__(self, scalar: complex) -> "OperatorKernel":
        return OperatorKernel(self.grid, self.entries * scalar, self.space)

    __rmul__ = __mul__

    def adjoint(self) -> "OperatorKernel":
        return OperatorKernel(self.grid, self.entries.conj().T, self.space)

    def commutator(self, other: "OperatorKernel") -> "OperatorKernel":
        return self.compose(other) - other.compose(self)

    # --- scalars ------------------------------------------------------------

    def trace(self) -> complex:
        return complex(self.grid.cell_volume * np.trace(self.entries))

    def hermiticity_defect(self) -> float:
        return float(np.linalg.norm(self.entries - self.entries.conj().T, ord=2)
                     * self.grid.cell_volume)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self.hermiticity_defect() <= tol

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the operator (hermitian path if applicable)."""
        m = self.mat
        if np.allclose(m, m.conj().T, atol=1e-12 * max(1.0, np.abs(m).max())):
            return np.linalg.eigvalsh(m)
        return np.linalg.eigvals(m)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.mat, compute_uv=False)

    def norms(self) -> NormReport:
        s = self.singular_values()
        return NormReport(
            operator=float(s[0]) if s.size else 0.0,
            hilbert_schmidt=float(np.sqrt(np.sum(s ** 2))),
            trace=float(np.sum(s)),
        )

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.mat, ord=2))

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.mat))

    def trace_norm(self) -> float:
        return float(np.sum(self.singular_values()))


def apply_function_of_position(kernel: OperatorKernel, values: np.ndarray,
                               side: str = "left") -> OperatorKernel:
    """Compose a position-space kernel with a multiplication operator.

    side "left" scales row i by F(x_i) (computes F(x) K), "right" scales
    column j (computes K F(x)), "both" does both.  Exact composition, no
    quadrature factor enters.
    """
    if kernel.space != "position":
        raise ValueError("function application needs a position-space kernel")
    f = np.asarray(values, dtype=complex).ravel()
    if f.size != kernel.grid.n_sites:
        raise ValueError("sample vector length does not match grid")
    e = kernel.entries
    if side == "left":
        out = f[:, None] * e
    elif side == "right":
        out = e * f[None, :]
    elif side == "both":
        out = f[:, None] * e * f.conj()[None, :]
    else:
        raise ValueError(f"unknown side {side!r}")
    return OperatorKernel(kernel.grid, out, "position")


def monotonicity_check(a: OperatorKernel, b: OperatorKernel, c: OperatorKernel,
                       pre_tol: float = 1e-10, post_tol: float = 1e-10) -> bool:
    """Whether the domination inequality ||A C||_tr <= ||B C||_tr holds.

    Requires |A|^2 <= |B|^2 (as quadratic forms); raises
    MonotonicityPreconditionError when the smallest eigenvalue of
    B*B - A*A dips below -pre_tol.
    """
    am, bm, cm = a.mat, b.mat, c.mat
    gap = bm.conj().T @ bm - am.conj().T @ am
    lam = float(np.linalg.eigvalsh((gap + gap.conj().T) / 2.0).min())
    if lam < -pre_tol:
        raise MonotonicityPreconditionError(
            f"|A|^2 <= |B|^2 violated: min eig(B*B - A*A) = {lam:.3e}")
    lhs = float(np.sum(np.linalg.svd(am @ cm, compute_uv=False)))
    rhs = float(np.sum(np.linalg.svd(bm @ cm, compute_uv=False)))
    return lhs <= rhs + post_tol
