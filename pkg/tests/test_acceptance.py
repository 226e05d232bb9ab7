"""End-to-end checks of the shipped behavior, one printed line per check.

Each test exercises one guaranteed property at its stated tolerance and time
budget and prints a single PASS/FAIL line with the measured numbers, so a
full run reads as a checklist.  Grid sizes and seeds are frozen; reruns are
deterministic.
"""
import time

import numpy as np
import pytest

from fermitrace import fock
from fermitrace.diagnostics import (DomainWeight, free_gas_commutator_count,
                                    light_cone_leakage,
                                    momentum_phase_commutator, purity)
from fermitrace.grid import Grid
from fermitrace.harness import (SweepConfig, run_assumption_check,
                                run_convergence_study)
from fermitrace.hartree import Potential, PropagatorConfig, evolve
from fermitrace.manybody import (ManyBodyHamiltonian, dense_evolve,
                                 exact_evolve, kac_equivalence_check)
from fermitrace.operators import OperatorKernel, monotonicity_check
from fermitrace.states import (DensityProfile, coherent_state, free_fermi_gas,
                               gaussian_orbitals, lowest_modes, orthonormalize,
                               plane_wave_orbitals, slater_from_orbitals,
                               slater_many_body)

SEED = 20250816


def _line(ok: bool, name: str, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def _packet_state(grid: Grid):
    orbs = orthonormalize(grid, gaussian_orbitals(
        grid, [(0.7,), (1.3,)], width=0.18))
    return slater_from_orbitals(grid, orbs)


def test_hartree_flow_conserves_spectrum_trace_mixedness():
    budget = 10.0
    tic = time.perf_counter()
    grid = Grid(1, 2.0, 32)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    cfg = PropagatorConfig(0.5, 0.01)
    omega0 = _packet_state(grid)
    records = []

    def watch(step, t, state):
        records.append((np.sort(np.linalg.eigvalsh(state.mat)),
                        state.particle_number(), purity(state)))

    evolve(omega0, pot, cfg, 1.0, callback=watch)
    levels0, tr0, mix0 = records[0]
    drift_levels = max(np.abs(lv - levels0).max() for lv, _, _ in records)
    drift_tr = max(abs(tr - tr0) for _, tr, _ in records)
    drift_mix = max(abs(mx - mix0) for _, _, mx in records)
    elapsed = time.perf_counter() - tic
    ok = (len(records) == 101 and drift_levels <= 1e-9 and drift_tr <= 1e-9
          and drift_mix <= 1e-9 and elapsed <= budget)
    _line(ok, "conserved quantities over 100 steps",
          f"spectrum {drift_levels:.1e} trace {drift_tr:.1e} "
          f"mixedness {drift_mix:.1e} tol 1e-9 ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_free_gas_is_stationary():
    budget = 10.0
    tic = time.perf_counter()
    grid = Grid(1, 2.0, 32)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    cfg = PropagatorConfig(0.5, 0.02)
    omega0 = free_fermi_gas(grid, 0.5)
    omega_t = evolve(omega0, pot, cfg, 1.0)
    dist = (omega_t - omega0).hs_norm()
    elapsed = time.perf_counter() - tic
    ok = dist <= 1e-8 and elapsed <= budget
    _line(ok, "free-gas stationarity at t=1",
          f"hs distance {dist:.2e} tol 1e-8 ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_step_halving_error_ratio():
    budget = 30.0
    tic = time.perf_counter()
    grid = Grid(1, 2.0, 32)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    omega0 = _packet_state(grid)
    dt0, t_final = 0.0125, 0.5
    ratios = []
    for exchange in (False, True):
        sols = {div: evolve(omega0, pot,
                            PropagatorConfig(0.5, dt0 / div, exchange=exchange),
                            t_final)
                for div in (1, 2, 8)}
        e1 = (sols[1] - sols[8]).hs_norm()
        e2 = (sols[2] - sols[8]).hs_norm()
        ratios.append(e1 / e2)
    elapsed = time.perf_counter() - tic
    ok = all(3.2 <= r <= 4.8 for r in ratios) and elapsed <= budget
    _line(ok, "second-order step-halving ratio",
          f"direct {ratios[0]:.3f} exchange {ratios[1]:.3f} window [3.2, 4.8] "
          f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_lanczos_matches_dense_reference():
    budget = 10.0
    tic = time.perf_counter()
    grid = Grid(1, 1.0, 8)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    orbitals = plane_wave_orbitals(grid, lowest_modes(grid, 2))
    psi0 = slater_many_body(grid, orbitals)
    ham = ManyBodyHamiltonian(grid, 0.5, pot)
    via_lanczos = exact_evolve(psi0, ham, 0.2)
    via_dense = dense_evolve(psi0, ham, 0.2)
    dist = float(np.linalg.norm(via_lanczos.amplitudes - via_dense.amplitudes))
    elapsed = time.perf_counter() - tic
    ok = dist <= 1e-9 and elapsed <= budget
    _line(ok, "lanczos vs dense propagation",
          f"l2 distance {dist:.2e} tol 1e-9 ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


CONVERGE_CONFIG = {
    "grid": {"dim": 1, "box_length": 1.0, "points_per_axis": 24},
    "sweep": {"epsilons": [0.5, 0.3333333333333333, 0.25],
              "n_rule": "density"},
    "potential": {"shape": "gaussian", "strength": 0.5, "width": 0.15},
    "propagator": {"dt": 0.01, "exchange": True},
    "initial_state": {"kind": "slater", "well_depth": 4.0, "well_width": 0.3},
    "diagnostics": {"times": [0.0, 0.5], "z_stride": 4, "weight_power": 2},
    "run": {"seed": SEED, "workers": 1, "out_dir": "out"},
}


def test_mean_field_distance_shrinks_with_epsilon():
    budget = 600.0
    tic = time.perf_counter()
    report = run_convergence_study(SweepConfig.from_dict(CONVERGE_CONFIG))
    elapsed = time.perf_counter() - tic
    rows = [r for r in report["rows"] if r["time"] == 0.5]
    detail = " ".join(f"eps={r['epsilon']:.3g}:{r['hs_over_sqrt_n']:.3e}"
                      for r in rows)
    fit = report["fit"]
    ok = (report["all_passed"]
          and all(r["status"] == "ok" for r in report["rows"])
          and fit["monotone_decreasing_in_epsilon"] is True
          and elapsed <= budget)
    _line(ok, "normalized distance shrinks with epsilon",
          f"{detail} slope {fit['slope']:.3f} ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_fluctuation_number_closed_form():
    budget = 120.0
    tic = time.perf_counter()
    grid = Grid(1, 2.0, 10)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    orbitals = plane_wave_orbitals(grid, lowest_modes(grid, 2))
    psi0 = slater_many_body(grid, orbitals)
    omega0 = slater_from_orbitals(grid, orbitals)
    series = fock.fluctuation_dynamics(psi0, omega0, pot, 0.5,
                                       dt=0.02, n_steps=10)
    worst = max(row["defect"] for row in series)
    n_times = len({row["time"] for row in series})
    elapsed = time.perf_counter() - tic
    ok = worst <= 1e-8 and n_times >= 10 and elapsed <= budget
    _line(ok, "fluctuation-number identity along the flow",
          f"worst defect {worst:.2e} tol 1e-8 at {n_times} times "
          f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def _particle_hole_defects(n_occ: int, trials: int):
    rng = np.random.default_rng(SEED)
    m = 6
    worst = {"slater": 0.0, "unitarity": 0.0, "conjugation": 0.0, "gap": 0.0}
    signs = set()
    for _ in range(trials):
        x = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        q, _ = np.linalg.qr(x)
        bmap = fock.BogoliubovMap(q, n_occ)
        worst["slater"] = max(worst["slater"], bmap.slater_defect())
        worst["unitarity"] = max(worst["unitarity"], bmap.unitarity_defect())
        worst["conjugation"] = max(worst["conjugation"],
                                   bmap.conjugation_defect())
        worst["gap"] = max(worst["gap"], bmap.self_adjoint_gap())
        signs.add(bmap.involution_sign)
    return worst, signs


@pytest.mark.xfail(strict=True, reason=(
    "the product particle-hole map with positive Slater phase obeys "
    "R* = (-1)^(N(N-1)/2) R; at rank 2 the sign is -1, so R* = R is "
    "impossible alongside the conjugation and vacuum identities"))
def test_particle_hole_map_is_self_adjoint_at_rank_two():
    budget = 60.0
    tic = time.perf_counter()
    worst, _ = _particle_hole_defects(n_occ=2, trials=50)
    elapsed = time.perf_counter() - tic
    ok = (worst["slater"] <= 1e-10 and worst["unitarity"] <= 1e-10
          and worst["conjugation"] <= 1e-10 and worst["gap"] <= 1e-10
          and elapsed <= budget)
    _line(ok, "particle-hole map self-adjoint at rank 2",
          f"vacuum {worst['slater']:.1e} unitarity {worst['unitarity']:.1e} "
          f"conjugation {worst['conjugation']:.1e} self-adjoint gap "
          f"{worst['gap']:.1e} tol 1e-10; the gap is pinned at 2 because "
          f"R* = -R at rank 2 ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_particle_hole_map_true_identities():
    budget = 60.0
    tic = time.perf_counter()
    worst2, signs2 = _particle_hole_defects(n_occ=2, trials=25)
    worst4, signs4 = _particle_hole_defects(n_occ=4, trials=25)
    elapsed = time.perf_counter() - tic
    # R unitary with R-adjoint = -R makes the gap exactly 2 ||R||_F = 2^(m/2+1)
    full_gap = 2.0 * 2.0 ** 3
    ok = (worst2["slater"] <= 1e-10 and worst2["unitarity"] <= 1e-10
          and worst2["conjugation"] <= 1e-10
          and signs2 == {-1} and abs(worst2["gap"] - full_gap) <= 1e-10
          and signs4 == {1} and worst4["gap"] <= 1e-10
          and elapsed <= budget)
    _line(ok, "particle-hole map identities with the rank-dependent sign",
          f"rank 2: identities to {max(worst2['slater'], worst2['unitarity'], worst2['conjugation']):.1e}, "
          f"R* = -R (gap {worst2['gap']:.2f}); rank 4: R* = R "
          f"(gap {worst4['gap']:.1e}) ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_quadratic_operator_sector_bounds():
    budget = 60.0
    tic = time.perf_counter()
    rng = np.random.default_rng(SEED)
    m = 8
    dim = 2 ** m
    worst_slack: dict[str, float] = {}
    for _ in range(100):
        j = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        for name, (lhs, rhs) in fock.sector_bound_report(m, j, vec).items():
            slack = rhs - lhs
            worst_slack[name] = min(worst_slack.get(name, np.inf), slack)
    elapsed = time.perf_counter() - tic
    ok = (len(worst_slack) == 5
          and all(s >= -1e-10 for s in worst_slack.values())
          and elapsed <= budget)
    detail = " ".join(f"{k}:{v:.2e}" for k, v in sorted(worst_slack.items()))
    _line(ok, "quadratic-operator bounds on 100 pairs",
          f"worst slack {detail} ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_free_gas_commutator_counts():
    budget = 60.0
    tic = time.perf_counter()
    grid = Grid(1, 8.0, 64)
    dp = 2.0 * np.pi / 8.0
    worst, nonzero, n_checked = 0.0, 0, 0
    for eps in (0.5, 0.25):
        omega = free_fermi_gas(grid, eps)
        k_max = int(np.floor(1.0 / eps / dp))
        for k in range(-k_max, k_max + 1):
            p = (k * dp,)
            count = free_gas_commutator_count(grid, eps, p)
            tn = momentum_phase_commutator(omega, p).trace_norm()
            worst = max(worst, abs(tn - count))
            nonzero += count > 0
            n_checked += 1
    elapsed = time.perf_counter() - tic
    ok = worst <= 1e-8 and nonzero > 0 and elapsed <= budget
    _line(ok, "free-gas commutator trace norms count modes",
          f"{n_checked} duals ({nonzero} nonzero) worst gap {worst:.2e} "
          f"tol 1e-8 ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_coherent_state_mixedness_slope():
    budget = 120.0
    tic = time.perf_counter()
    grid = Grid(1, 8.0, 192)
    eps_list = [0.5, 0.25, 0.125, 0.0625]
    vals = []
    for eps in eps_list:
        n = round(8.0 / eps)
        coh = coherent_state(grid, DensityProfile.uniform(grid, n), eps)
        vals.append(purity(coh) / n)
    slope = float(np.polyfit(np.log(eps_list), np.log(vals), 1)[0])
    elapsed = time.perf_counter() - tic
    ok = 0.3 <= slope <= 0.7 and elapsed <= budget
    _line(ok, "coherent-state mixedness slope in epsilon",
          f"slope {slope:.3f} window [0.3, 0.7] "
          f"values {' '.join('%.3e' % v for v in vals)} "
          f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_relativistic_propagation_respects_light_cone():
    budget = 60.0
    tic = time.perf_counter()
    grid = Grid(1, 4.0, 48)
    pot = Potential.gaussian(grid, 0.5, 0.5)
    orbs = orthonormalize(grid, gaussian_orbitals(
        grid, [(1.9,), (2.0,), (2.1,)], width=0.12))
    omega0 = slater_from_orbitals(grid, orbs)
    region = DomainWeight.box(grid, (1.2,), (2.8,))
    cfg = PropagatorConfig(0.25, 0.01, relativistic=True)
    omega_t = evolve(omega0, pot, cfg, 0.5)
    leak = light_cone_leakage(omega_t, region, 0.5, margin=0.1)
    bound = 1e-3 * omega0.particle_number()
    elapsed = time.perf_counter() - tic
    ok = leak <= bound and elapsed <= budget
    _line(ok, "relativistic flow stays in the light cone",
          f"leaked mass {leak:.2e} bound {bound:.1e} "
          f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_slow_time_dilation_equivalence():
    budget = 60.0
    tic = time.perf_counter()
    grid = Grid(1, 1.0, 16)
    pot = Potential.gaussian(grid, 0.5, 0.15)
    orbitals = plane_wave_orbitals(grid, lowest_modes(grid, 2))
    psi0 = slater_many_body(grid, orbitals)
    result = kac_equivalence_check(psi0, pot, 0.5, 0.2)
    elapsed = time.perf_counter() - tic
    ok = result["l2_distance"] <= 1e-8 and elapsed <= budget
    _line(ok, "dilated slow-time flow matches the standard flow",
          f"l2 distance {result['l2_distance']:.2e} tol 1e-8 "
          f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


def test_trace_norm_domination_triples():
    budget = 30.0
    tic = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grid = Grid(1, 1.0, 12)
    n = grid.n_sites

    def kernel(mat):
        return OperatorKernel.from_matrix(grid, mat)

    passed = 0
    for trial in range(200):
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b /= np.linalg.svd(b, compute_uv=False)[0]
        if trial % 10 == 0:
            a = b.copy()
        elif trial % 10 == 5:
            a = rng.uniform(0.0, 1.0, n)[:, None] * b
        else:
            k = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            k /= np.linalg.svd(k, compute_uv=False)[0]
            a = k @ b
        c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        passed += monotonicity_check(kernel(a), kernel(b), kernel(c))
    elapsed = time.perf_counter() - tic
    ok = passed == 200 and elapsed <= budget
    _line(ok, "trace-norm domination on 200 triples",
          f"{passed}/200 hold ({elapsed:.1f}s/{budget:.0f}s)")
    assert ok


ASSUME_CONFIG = {
    "grid": {"dim": 1, "box_length": 4.0, "points_per_axis": 128},
    "sweep": {"epsilons": [0.5, 0.25, 0.125, 0.0625], "n_rule": "density"},
    "potential": {"shape": "gaussian", "strength": 0.5, "width": 0.15},
    "propagator": {"dt": 0.01},
    "initial_state": {"kind": "coherent", "profile": "bump",
                      "bump_width": 1.0, "bump_floor": 0.3},
    "diagnostics": {"times": [0.0, 0.5], "z_stride": 2, "weight_power": 2},
    "run": {"seed": SEED, "workers": 1, "out_dir": "out"},
}


def test_scaled_functionals_flat_across_epsilon():
    budget = 300.0
    tic = time.perf_counter()
    report = run_assumption_check(SweepConfig.from_dict(ASSUME_CONFIG))
    elapsed = time.perf_counter() - tic
    failing = [f"{c['state_kind']}/{c['functional']}"
               for c in report["checks"] if not c["passed"]]
    ok = report["all_passed"] and not failing and elapsed <= budget
    _line(ok, "scaled structure functionals flat within factor 3",
          (f"8/8 series flat" if not failing else
           f"failing: {', '.join(failing)}")
          + f" over eps {ASSUME_CONFIG['sweep']['epsilons']} "
            f"({elapsed:.1f}s/{budget:.0f}s)")
    assert ok
