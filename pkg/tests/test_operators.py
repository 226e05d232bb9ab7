"""Operator kernels: quadrature convention, algebra, norms, domination check."""
import numpy as np
import pytest

from fermitrace.grid import Grid
from fermitrace.operators import (MonotonicityPreconditionError, OperatorKernel,
                                  apply_function_of_position, monotonicity_check)


def _random_kernel(grid, rng, hermitian=False):
    n = grid.n_sites
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if hermitian:
        m = (m + m.conj().T) / 2.0
    return OperatorKernel.from_matrix(grid, m)


def test_quadrature_convention_identity():
    # identity operator has entries 1/h on the diagonal and trace n*h/h = n
    g = Grid(1, 2.0, 8)
    ident = OperatorKernel.identity(g)
    assert np.allclose(ident.entries, np.eye(8) / g.cell_volume)
    assert np.isclose(ident.trace().real, 8.0)
    v = np.arange(8.0)
    assert np.allclose(ident.apply(v), v)


def test_from_matrix_mat_roundtrip():
    g = Grid(1, 1.0, 6)
    rng = np.random.default_rng(0)
    m = rng.standard_normal((6, 6))
    k = OperatorKernel.from_matrix(g, m)
    assert np.allclose(k.mat, m)
    assert np.allclose(k.entries * g.cell_volume, m)


def test_position_multiplier_action():
    g = Grid(1, 2.0, 8)
    f = np.linspace(0.0, 1.0, 8)
    k = OperatorKernel.position_multiplier(g, f)
    v = np.ones(8, dtype=complex)
    assert np.allclose(k.apply(v), f)
    assert np.isclose(k.trace().real, f.sum())


def test_momentum_multiplier_diagonalizes_in_momentum():
    g = Grid(1, 2.0, 8)
    sym = g.momentum_norms ** 2
    k = OperatorKernel.momentum_multiplier(g, sym)
    km = k.to_momentum()
    assert np.allclose(km.mat, np.diag(sym), atol=1e-12)
    # eigenvalues of the multiplier are the symbol samples
    assert np.allclose(np.sort(k.eigenvalues().real), np.sort(sym), atol=1e-10)


def test_representation_roundtrip_preserves_norms():
    g = Grid(1, 1.5, 8)
    rng = np.random.default_rng(3)
    k = _random_kernel(g, rng)
    km = k.to_momentum()
    assert km.space == "momentum"
    assert np.isclose(k.hs_norm(), km.hs_norm())
    assert np.isclose(k.trace_norm(), km.trace_norm(), atol=1e-9)
    back = km.to_position()
    assert np.allclose(back.entries, k.entries, atol=1e-10)


def test_algebra_and_adjoint():
    g = Grid(1, 1.0, 6)
    rng = np.random.default_rng(4)
    a, b = _random_kernel(g, rng), _random_kernel(g, rng)
    assert np.allclose((a @ b).mat, a.mat @ b.mat)
    assert np.allclose((a + b).mat, a.mat + b.mat)
    assert np.allclose((a - b).mat, a.mat - b.mat)
    assert np.allclose((2.5 * a).mat, 2.5 * a.mat)
    assert np.allclose(a.adjoint().mat, a.mat.conj().T)
    comm = a.commutator(b)
    assert np.allclose(comm.mat, a.mat @ b.mat - b.mat @ a.mat)
    assert np.isclose(comm.trace(), 0.0, atol=1e-9)


def test_space_mismatch_raises():
    g = Grid(1, 1.0, 4)
    a = OperatorKernel.identity(g)
    b = a.to_momentum()
    for op in (lambda: a @ b, lambda: a + b, lambda: a - b):
        with pytest.raises(ValueError):
            op()


def test_norms_match_numpy():
    g = Grid(1, 2.0, 8)
    rng = np.random.default_rng(5)
    k = _random_kernel(g, rng)
    s = np.linalg.svd(k.mat, compute_uv=False)
    rep = k.norms()
    assert np.isclose(rep.operator, s[0])
    assert np.isclose(rep.hilbert_schmidt, np.sqrt((s ** 2).sum()))
    assert np.isclose(rep.trace, s.sum())
    assert np.isclose(k.operator_norm(), rep.operator)
    assert np.isclose(k.hs_norm(), rep.hilbert_schmidt)
    assert np.isclose(k.trace_norm(), rep.trace)
    assert set(rep.as_dict()) == {"operator", "hilbert_schmidt", "trace"}


def test_hermiticity_detection():
    g = Grid(1, 1.0, 6)
    rng = np.random.default_rng(6)
    h = _random_kernel(g, rng, hermitian=True)
    assert h.is_hermitian()
    skew = OperatorKernel.from_matrix(g, h.mat + 1e-3 * 1j * np.eye(6))
    assert not skew.is_hermitian()


def test_apply_function_of_position_sides():
    g = Grid(1, 2.0, 6)
    rng = np.random.default_rng(7)
    k = _random_kernel(g, rng)
    f = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert np.allclose(apply_function_of_position(k, f, "left").mat,
                       np.diag(f) @ k.mat)
    assert np.allclose(apply_function_of_position(k, f, "right").mat,
                       k.mat @ np.diag(f))
    assert np.allclose(apply_function_of_position(k, f, "both").mat,
                       np.diag(f) @ k.mat @ np.diag(f.conj()))
    with pytest.raises(ValueError):
        apply_function_of_position(k, f, "middle")
    with pytest.raises(ValueError):
        apply_function_of_position(k.to_momentum(), f)


def test_monotonicity_check_contraction_triples():
    # A = K B with a contraction K guarantees |A|^2 <= |B|^2
    g = Grid(1, 1.0, 6)
    rng = np.random.default_rng(8)
    n = g.n_sites
    for _ in range(25):
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        u, _, vh = np.linalg.svd(z)
        k = u @ np.diag(rng.uniform(0.0, 1.0, n)) @ vh
        bm = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        bm /= np.linalg.norm(bm, ord=2)
        cm = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = OperatorKernel.from_matrix(g, k @ bm)
        b = OperatorKernel.from_matrix(g, bm)
        c = OperatorKernel.from_matrix(g, cm)
        assert monotonicity_check(a, b, c)


def test_monotonicity_check_rejects_bad_precondition():
    g = Grid(1, 1.0, 4)
    a = OperatorKernel.from_matrix(g, 2.0 * np.eye(4, dtype=complex))
    b = OperatorKernel.identity(g)
    c = OperatorKernel.identity(g)
    with pytest.raises(MonotonicityPreconditionError):
        monotonicity_check(a, b, c)


def test_monotonicity_check_equality_edge():
    # A = B: lhs equals rhs, must pass at tolerance
    g = Grid(1, 1.0, 4)
    rng = np.random.default_rng(9)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a = OperatorKernel.from_matrix(g, m)
    c = OperatorKernel.from_matrix(g, rng.standard_normal((4, 4)))
    assert monotonicity_check(a, a, c)
