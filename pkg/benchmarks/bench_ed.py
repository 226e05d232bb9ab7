"""Timing comparison of the compiled and pure-python exact-kernel backends.

Runs build_hamiltonian_parts and one_pdm on identical inputs through both
implementations, checks they agree, and prints best-of-k wall times.  The
compiled extension mainly wins on the Hamiltonian assembly loop; the
one-particle reduction is numpy-bound in both, so expect a modest ratio there.

    python3 benchmarks/bench_ed.py --sites 16 --particles 4 --repeat 5
"""
from __future__ import annotations

import argparse
import time

import numpy as np
import scipy.sparse as sp

from fermitrace import _ed_py
from fermitrace.grid import Grid
from fermitrace.hartree import Potential, kinetic_symbol
from fermitrace.manybody import basis_masks

try:
    from fermitrace import _ed_cy
except ImportError:
    _ed_cy = None


def _best_of(fn, repeat: int) -> tuple[float, object]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _coo_dense(parts, dim):
    rows, cols, data = parts
    return sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).toarray()


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites", type=int, default=16)
    ap.add_argument("--particles", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=20250816)
    args = ap.parse_args()

    if _ed_cy is None:
        print("compiled extension not built; nothing to compare")
        return 1

    grid = Grid(1, 2.0, args.sites)
    eps = 0.5
    pot = Potential.gaussian(grid, 0.5, 0.2)
    sym = kinetic_symbol(grid, eps).astype(complex)
    one_body = grid.to_position_matrix(np.diag(sym))
    one_body = (one_body + one_body.conj().T) / 2.0
    pair = eps * pot.displacement_table()

    masks = basis_masks(args.sites, args.particles)
    dim = masks.size
    rng = np.random.default_rng(args.seed)
    amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    amps /= np.linalg.norm(amps)

    print(f"sites={args.sites} particles={args.particles} basis={dim}")
    print(f"{'kernel':<24}{'python [s]':>12}{'compiled [s]':>14}{'ratio':>8}")

    tp, parts_py = _best_of(
        lambda: _ed_py.build_hamiltonian_parts(masks, one_body, pair),
        args.repeat)
    tc, parts_cy = _best_of(
        lambda: _ed_cy.build_hamiltonian_parts(masks, one_body, pair),
        args.repeat)
    gap = np.abs(_coo_dense(parts_py, dim) - _coo_dense(parts_cy, dim)).max()
    assert gap < 1e-12, f"backends disagree on the Hamiltonian: {gap}"
    print(f"{'build_hamiltonian_parts':<24}{tp:>12.4f}{tc:>14.4f}{tp / tc:>8.1f}")

    tp, g_py = _best_of(lambda: _ed_py.one_pdm(masks, amps, args.sites),
                        args.repeat)
    tc, g_cy = _best_of(lambda: _ed_cy.one_pdm(masks, amps, args.sites),
                        args.repeat)
    gap = np.abs(g_py - g_cy).max()
    assert gap < 1e-12, f"backends disagree on the reduction: {gap}"
    print(f"{'one_pdm':<24}{tp:>12.4f}{tc:>14.4f}{tp / tc:>8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
