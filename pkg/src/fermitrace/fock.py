"""Lattice Fock space built from sparse Jordan-Wigner mode operators.

Fock basis index = occupation bitmask over the grid sites (bit i of the index
is the occupation of mode i), so fixed-N amplitude vectors from the exact
module embed verbatim.  Creation with ascending mode indices applied right to
left produces the basis state with a plus sign under this string convention.

Also houses the particle-hole (Bogoliubov-type) unitary attached to a rank-N
mode projector, built as a product of self-adjoint field factors
theta_j = a(f_j) + a*(f_j) over the occupied modes times a parity gauge.
"""
from __future__ import annotations

import math
from functools import cache

import numpy as np
import scipy.sparse as sp

from .hartree import PropagatorConfig, Potential, hartree_step
from .manybody import ManyBodyHamiltonian, ManyBodyState, CapacityError, exact_evolve, reduce_one_pdm
from .states import OnePDM

FOCK_SITE_CAP = 14          # sparse mode operators
DENSE_MAP_CAP = 2048        # materialized particle-hole unitaries
FLUCTUATION_CAP = 4096      # vector-path fluctuation tracking


def _check_sites(m: int) -> None:
    if not 1 <= m <= FOCK_SITE_CAP:
        raise CapacityError(f"Fock construction capped at {FOCK_SITE_CAP} modes, got {m}")


@cache
def annihilator(m: int, i: int) -> sp.csr_matrix:
    """Sparse a_i on the 2^m lattice Fock space (bit i of the index = mode i)."""
    _check_sites(m)
    if not 0 <= i < m:
        raise ValueError("mode index out of range")
    ident = sp.identity(2, format="csr")
    lower = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    zpar = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    factors = [ident] * (m - 1 - i) + [lower] + [zpar] * i
    op = factors[0]
    for f in factors[1:]:
        op = sp.kron(op, f, format="csr")
    return op


def creator(m: int, i: int) -> sp.csr_matrix:
    return annihilator(m, i).conjugate().transpose().tocsr()


def vacuum(m: int) -> np.ndarray:
    _check_sites(m)
    v = np.zeros(2 ** m, dtype=np.complex128)
    v[0] = 1.0
    return v


def mode_annihilator(m: int, f: np.ndarray) -> sp.csr_matrix:
    """a(f) = sum_i conj(f_i) a_i, antilinear in the mode vector."""
    f = np.asarray(f).ravel()
    out = sp.csr_matrix((2 ** m, 2 ** m), dtype=np.complex128)
    for i in range(m):
        if f[i] != 0:
            out = out + np.conjugate(f[i]) * annihilator(m, i)
    return out.tocsr()


def mode_creator(m: int, f: np.ndarray) -> sp.csr_matrix:
    return mode_annihilator(m, f).conjugate().transpose().tocsr()


def occupations(m: int) -> np.ndarray:
    """Particle number of every Fock basis index."""
    return np.bitwise_count(np.arange(2 ** m, dtype=np.uint64)).astype(np.float64)


def number_operator(m: int) -> sp.csr_matrix:
    _check_sites(m)
    return sp.diags(occupations(m)).tocsr()


def sector_indices(m: int, n: int) -> np.ndarray:
    return np.nonzero(occupations(m) == n)[0]


def d_gamma(m: int, j_mat: np.ndarray) -> sp.csr_matrix:
    """Second quantization sum_{x,y} J[x,y] a*_x a_y."""
    _check_sites(m)
    j_mat = np.asarray(j_mat)
    out = sp.csr_matrix((2 ** m, 2 ** m), dtype=np.complex128)
    for x in range(m):
        cx = creator(m, x)
        for y in range(m):
            if j_mat[x, y] != 0:
                out = out + j_mat[x, y] * (cx @ annihilator(m, y))
    return out.tocsr()


def pair_annihilation(m: int, j_mat: np.ndarray) -> sp.csr_matrix:
    """sum_{x,y} J[x,y] a_x a_y."""
    _check_sites(m)
    j_mat = np.asarray(j_mat)
    out = sp.csr_matrix((2 ** m, 2 ** m), dtype=np.complex128)
    for x in range(m):
        ax = annihilator(m, x)
        for y in range(m):
            if j_mat[x, y] != 0:
                out = out + j_mat[x, y] * (ax @ annihilator(m, y))
    return out.tocsr()


def pair_creation(m: int, j_mat: np.ndarray) -> sp.csr_matrix:
    """sum_{x,y} J[x,y] a*_x a*_y."""
    _check_sites(m)
    j_mat = np.asarray(j_mat)
    out = sp.csr_matrix((2 ** m, 2 ** m), dtype=np.complex128)
    for x in range(m):
        cx = creator(m, x)
        for y in range(m):
            if j_mat[x, y] != 0:
                out = out + j_mat[x, y] * (cx @ creator(m, y))
    return out.tocsr()


def pair_interaction_diagonal(m: int, pair: np.ndarray) -> np.ndarray:
    """Diagonal of sum_{i<j} pair[i,j] n_i n_j over the Fock basis."""
    bits = ((np.arange(2 ** m, dtype=np.uint64)[:, None]
             >> np.arange(m, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(np.float64)
    upper = np.triu(np.asarray(pair), 1)
    return np.einsum("bi,ij,bj->b", bits, upper, bits)


def second_quantized_hamiltonian(m: int, one_body: np.ndarray,
                                 pair: np.ndarray) -> sp.csr_matrix:
    """H = sum T[x,y] a*_x a_y + sum_{i<j} pair[i,j] n_i n_j on the full Fock space."""
    return (d_gamma(m, one_body) + sp.diags(pair_interaction_diagonal(m, pair))).tocsr()


def hamiltonian_fock(ham: ManyBodyHamiltonian) -> sp.csr_matrix:
    return second_quantized_hamiltonian(ham.grid.n_sites, ham.one_body, ham.pair)


def embed_state(state: ManyBodyState) -> np.ndarray:
    """Fixed-N amplitudes into the full Fock space; signs match by construction."""
    m = state.grid.n_sites
    _check_sites(m)
    vec = np.zeros(2 ** m, dtype=np.complex128)
    vec[state.masks.astype(np.int64)] = state.amplitudes
    return vec


def extract_sector(vec: np.ndarray, grid, n: int) -> ManyBodyState:
    from .manybody import basis_masks
    masks = basis_masks(grid.n_sites, n)
    return ManyBodyState(grid, n, np.asarray(vec)[masks.astype(np.int64)].copy())


def one_pdm_fock(vec: np.ndarray, m: int) -> np.ndarray:
    """Mode matrix G[x,y] = <a*_y a_x> of a normalized Fock vector."""
    avs = [annihilator(m, i) @ vec for i in range(m)]
    g = np.empty((m, m), dtype=np.complex128)
    for x in range(m):
        for y in range(m):
            g[x, y] = np.vdot(avs[y], avs[x])
    return (g + g.conj().T) / 2.0


# --- sector bounds ----------------------------------------------------------

def sector_bound_report(m: int, j_mat: np.ndarray, vec: np.ndarray) -> dict:
    """Evaluate five quadratic-operator bounds on a concrete Fock vector.

    Each entry is (lhs, rhs) with the guarantee lhs <= rhs:
      dg_expect : |<psi, dGamma(J) psi>|        <= ||J||_op  <psi, N psi>
      dg_opnorm : ||dGamma(J) psi||             <= ||J||_op  ||N psi||
      dg_hsnorm : ||dGamma(J) psi||             <= ||J||_HS  ||N^{1/2} psi||
      pair_ann  : ||sum J a a psi||             <= ||J||_HS  ||N^{1/2} psi||
      pair_cre  : ||sum J a* a* psi||           <= 2 ||J||_tr ||psi||
    """
    j_mat = np.asarray(j_mat, dtype=complex)
    vec = np.asarray(vec, dtype=complex)
    svals = np.linalg.svd(j_mat, compute_uv=False)
    op_norm, hs_norm, tr_norm = float(svals[0]), float(np.linalg.norm(svals)), float(svals.sum())
    occ = occupations(m)
    nvec = occ * vec
    sqrt_nvec = np.sqrt(occ) * vec
    dg = d_gamma(m, j_mat)
    dg_vec = dg @ vec
    ann_vec = pair_annihilation(m, j_mat) @ vec
    cre_vec = pair_creation(m, j_mat) @ vec
    return {
        "dg_expect": (abs(complex(np.vdot(vec, dg_vec))), op_norm * float(np.vdot(vec, nvec).real)),
        "dg_opnorm": (float(np.linalg.norm(dg_vec)), op_norm * float(np.linalg.norm(nvec))),
        "dg_hsnorm": (float(np.linalg.norm(dg_vec)), hs_norm * float(np.linalg.norm(sqrt_nvec))),
        "pair_ann": (float(np.linalg.norm(ann_vec)), hs_norm * float(np.linalg.norm(sqrt_nvec))),
        "pair_cre": (float(np.linalg.norm(cre_vec)), 2.0 * tr_norm * float(np.linalg.norm(vec))),
    }


# --- particle-hole unitary --------------------------------------------------

def _fix_column_phases(cols: np.ndarray) -> np.ndarray:
    out = cols.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        piv = out[k, j]
        if abs(piv) > 0:
            out[:, j] *= np.conjugate(piv) / abs(piv)
    return out


class BogoliubovMap:
    """Particle-hole unitary R attached to orthonormal modes f_1..f_m.

    R = theta_1 ... theta_N G with theta_j = a(f_j) + a*(f_j) and parity gauge
    G = prod_{j<=N} (1 - 2 n(f_j)) for even N, prod_{l>N} (1 - 2 n(f_l)) for
    odd N.  Then R Omega is the Slater state of the first N modes with a plus
    sign, R* a(f_j) R = a*(f_j) on occupied modes and a(f_l) on the rest, and
    R* = involution_sign * R with involution_sign = (-1)^(N(N-1)/2).
    """

    def __init__(self, orbitals: np.ndarray, n_occupied: int):
        orbitals = np.asarray(orbitals, dtype=complex)
        m = orbitals.shape[0]
        _check_sites(m)
        if orbitals.shape != (m, m):
            raise ValueError("orbitals must form a square mode frame")
        defect = np.linalg.norm(orbitals.conj().T @ orbitals - np.eye(m))
        if defect > 1e-8:
            raise ValueError(f"mode frame is not unitary (defect {defect:.2e})")
        if not 0 <= n_occupied <= m:
            raise ValueError("occupied count out of range")
        self.m = m
        self.n_occupied = n_occupied
        self.orbitals = orbitals
        self.projector_defect = 0.0
        self._matrix: np.ndarray | None = None
        self._factor_list: list[sp.csr_matrix] | None = None

    @classmethod
    def from_projector(cls, mode_matrix: np.ndarray, tol: float = 1e-7) -> "BogoliubovMap":
        """Build from a rank-N orthogonal mode projector (eigenvalues near 0/1)."""
        g = np.asarray(mode_matrix, dtype=complex)
        g = (g + g.conj().T) / 2.0
        ev, evec = np.linalg.eigh(g)
        defect = float(np.max(np.minimum(np.abs(ev), np.abs(ev - 1.0))))
        if defect > tol:
            raise ValueError(f"mode matrix is not a projector (eigenvalue defect {defect:.2e})")
        occ = ev > 0.5
        n = int(np.count_nonzero(occ))
        cols = np.concatenate([evec[:, occ][:, ::-1], evec[:, ~occ]], axis=1)
        obj = cls(_fix_column_phases(cols), n)
        obj.projector_defect = defect
        return obj

    @property
    def involution_sign(self) -> int:
        return -1 if (self.n_occupied * (self.n_occupied - 1) // 2) % 2 else 1

    def _field_factor(self, j: int) -> sp.csr_matrix:
        f = self.orbitals[:, j]
        a = mode_annihilator(self.m, f)
        return (a + a.conjugate().transpose()).tocsr()

    def _parity_factor(self, j: int) -> sp.csr_matrix:
        f = self.orbitals[:, j]
        a = mode_annihilator(self.m, f)
        num = a.conjugate().transpose() @ a
        return (sp.identity(2 ** self.m, format="csr") - 2.0 * num).tocsr()

    def _factors(self) -> list[sp.csr_matrix]:
        """R as the ordered product factors[0] @ factors[1] @ ..., all self-adjoint."""
        if self._factor_list is None:
            factors = [self._field_factor(j) for j in range(self.n_occupied)]
            if self.n_occupied % 2 == 0:
                factors += [self._parity_factor(j) for j in range(self.n_occupied)]
            else:
                factors += [self._parity_factor(l) for l in range(self.n_occupied, self.m)]
            self._factor_list = factors
        return self._factor_list

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            dim = 2 ** self.m
            if dim > DENSE_MAP_CAP:
                raise CapacityError(
                    f"dense particle-hole map capped at dimension {DENSE_MAP_CAP}")
            r = np.eye(dim, dtype=np.complex128)
            for fac in self._factors():
                # r @ fac with the sparse factor on the left of the transpose
                r = (fac.transpose() @ r.T).T
            self._matrix = r
        return self._matrix

    def forward(self, vec: np.ndarray) -> np.ndarray:
        """R vec via the factor product; rightmost factor acts first."""
        out = np.asarray(vec, dtype=complex).copy()
        for fac in reversed(self._factors()):
            out = fac @ out
        return out

    def backward(self, vec: np.ndarray) -> np.ndarray:
        """R* vec; the factors are self-adjoint so the order simply reverses."""
        out = np.asarray(vec, dtype=complex).copy()
        for fac in self._factors():
            out = fac @ out
        return out

    def reference_slater(self) -> np.ndarray:
        out = vacuum(self.m)
        for j in reversed(range(self.n_occupied)):
            out = mode_creator(self.m, self.orbitals[:, j]) @ out
        return out

    def slater_defect(self) -> float:
        return float(np.linalg.norm(self.forward(vacuum(self.m)) - self.reference_slater()))

    def unitarity_defect(self) -> float:
        r = self.matrix()
        return float(np.linalg.norm(r.conj().T @ r - np.eye(r.shape[0])))

    def involution_defect(self) -> float:
        r = self.matrix()
        return float(np.linalg.norm(r.conj().T - self.involution_sign * r))

    def self_adjoint_gap(self) -> float:
        r = self.matrix()
        return float(np.linalg.norm(r.conj().T - r))

    def conjugation_defect(self) -> float:
        r = self.matrix()
        worst = 0.0
        for j in range(self.m):
            a = mode_annihilator(self.m, self.orbitals[:, j]).toarray()
            lhs = r.conj().T @ a @ r
            rhs = a.conj().T if j < self.n_occupied else a
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
        return worst


def bogoliubov(omega) -> BogoliubovMap:
    """Particle-hole map of a projector given as an OnePDM or a mode matrix."""
    mode_matrix = omega.mat if hasattr(omega, "mat") else np.asarray(omega)
    return BogoliubovMap.from_projector(mode_matrix)


def fluctuation_number(vec: np.ndarray, bogo: BogoliubovMap) -> float:
    """<xi, N xi> with xi = R* vec."""
    xi = bogo.backward(vec)
    return float(np.vdot(xi, occupations(bogo.m) * xi).real)


def expected_fluctuation_number(gamma_mode: np.ndarray, omega_mode: np.ndarray) -> float:
    """2 tr gamma (1 - omega), the closed form of the fluctuation expectation."""
    g = np.asarray(gamma_mode)
    w = np.asarray(omega_mode)
    return float(2.0 * (np.trace(g) - np.trace(g @ w)).real)


def fluctuation_dynamics(state: ManyBodyState, omega: OnePDM, potential: Potential,
                         eps: float, dt: float, n_steps: int,
                         krylov_dim: int = 30) -> list[dict]:
    """Track <xi_t, N xi_t> along the coupled exact/mean-field flow.

    The exact state evolves under the N-body propagator, the reference
    projector under the Strang mean-field step (which preserves the projector
    property to roundoff), and at each step the fluctuation vector
    xi_t = R*_{omega_t} psi_t is measured against the closed form
    2 tr gamma_t (1 - omega_t).
    """
    m = state.grid.n_sites
    _check_sites(m)
    if 2 ** m > FLUCTUATION_CAP:
        raise CapacityError(f"fluctuation tracking capped at dimension {FLUCTUATION_CAP}")
    ham = ManyBodyHamiltonian(state.grid, eps, potential)
    cfg = PropagatorConfig(eps=eps, dt=dt)
    psi = state.normalized()
    w = omega
    rows = []
    for step in range(n_steps + 1):
        if step > 0:
            psi = exact_evolve(psi, ham, dt, krylov_dim)
            w = hartree_step(w, potential, cfg)
        gamma = reduce_one_pdm(psi)
        bogo = BogoliubovMap.from_projector(w.mat)
        vec = embed_state(psi)
        measured = fluctuation_number(vec, bogo)
        expected = expected_fluctuation_number(gamma.mat, w.mat)
        rows.append({
            "time": step * dt,
            "measured": measured,
            "expected": expected,
            "defect": abs(measured - expected),
            "projector_defect": bogo.projector_defect,
        })
    return rows
