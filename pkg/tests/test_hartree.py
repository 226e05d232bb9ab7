"""Mean-field propagation: conventions, conservation laws, exchange term."""
import numpy as np
import pytest

from fermitrace.grid import Grid
from fermitrace.hartree import (Potential, PropagatorConfig, energy, evolve,
                                free_evolution_phase, hartree_fock_step,
                                hartree_step, kinetic_symbol, relativistic_step,
                                total_momentum)
from fermitrace.states import (DensityProfile, coherent_state,
                               gaussian_orbitals, slater_from_orbitals,
                               slater_lowest_modes)


def test_kinetic_symbol_dispersions():
    g = Grid(1, 2.0, 8)
    q2 = g.momentum_norms ** 2
    assert np.allclose(kinetic_symbol(g, 0.5), 0.25 * q2)
    rel = kinetic_symbol(g, 0.5, relativistic=True)
    assert np.allclose(rel, np.sqrt(1.0 + 0.25 * q2))
    # group velocity |d omega / d(eps q)| stays below 1
    assert np.all(0.5 * g.momentum_norms / rel <= 1.0)


def test_propagator_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(eps=0.0, dt=0.1)
    with pytest.raises(ValueError):
        PropagatorConfig(eps=0.5, dt=0.0)
    with pytest.raises(ValueError):
        PropagatorConfig(eps=0.5, dt=0.1, self_consistency_iters=0)


def test_potential_gaussian_symmetry():
    g = Grid(1, 2.0, 32)
    v = Potential.gaussian(g, strength=0.7, width=0.2)
    assert v.symmetry_defect() < 1e-12
    table = v.displacement_table()
    assert np.allclose(table, table.T)              # even potential
    assert np.allclose(table.diagonal(), v.values[0])
    rep = v.smoothness_report(max_order=3)
    assert set(rep) == {"m0", "m1", "m2", "m3"}
    assert rep["m3"] >= rep["m0"] > 0.0


def test_mean_field_constant_density():
    # convolution with a constant equals the potential integral times rho
    g = Grid(1, 2.0, 32)
    v = Potential.gaussian(g, strength=0.5, width=0.2)
    rho = np.full(g.n_sites, 1.7)
    w = v.mean_field(rho)
    expect = 1.7 * g.cell_volume * v.values.sum()
    assert np.allclose(w, expect, atol=1e-12)


def test_mean_field_matches_direct_sum():
    g = Grid(1, 2.0, 16)
    v = Potential.gaussian(g, strength=0.5, width=0.3)
    rng = np.random.default_rng(0)
    rho = rng.uniform(0.5, 1.5, g.n_sites)
    direct = g.cell_volume * (v.displacement_table() @ rho)
    assert np.allclose(v.mean_field(rho), direct, atol=1e-12)


def test_zero_potential_evolution_is_free():
    g = Grid(1, 2.0, 16)
    eps, dt, t = 0.5, 0.05, 0.4
    omega = slater_from_orbitals(
        g, gaussian_orbitals(g, [(0.8,), (1.2,)], width=0.15))
    out = evolve(omega, Potential.zero(g), PropagatorConfig(eps, dt), t)
    phase = free_evolution_phase(g, eps, t)
    expect = g.conjugate_by_momentum_phase(omega.mat, phase)
    assert np.abs(out.mat - expect).max() < 1e-12


def test_evolve_conserves_trace_spectrum_energy_momentum():
    g = Grid(1, 2.0, 24)
    eps, dt = 0.5, 0.02
    cfg = PropagatorConfig(eps, dt)
    v = Potential.gaussian(g, strength=0.8, width=0.25)
    omega = slater_from_orbitals(
        g, gaussian_orbitals(g, [(0.7,), (1.3,)], width=0.15))
    e0 = energy(omega, v, cfg)
    p0 = total_momentum(omega, eps)
    ev0 = np.sort(omega.occupation_spectrum())
    out = evolve(omega, v, cfg, 0.5)
    assert abs(out.particle_number() - 2.0) < 1e-11
    assert out.hermiticity_defect() < 1e-11
    assert np.abs(np.sort(out.occupation_spectrum()) - ev0).max() < 1e-11
    assert out.purity_defect() < 1e-11                      # stays a projector
    assert abs(energy(out, v, cfg) - e0) < 5e-4 * max(1.0, abs(e0))
    assert np.abs(total_momentum(out, eps) - p0).max() < 1e-10


def test_evolve_callback_and_step_check():
    g = Grid(1, 1.0, 8)
    omega = slater_lowest_modes(g, 2)
    cfg = PropagatorConfig(0.5, 0.1)
    seen = []
    evolve(omega, Potential.zero(g), cfg, 0.3,
           callback=lambda k, t, s: seen.append((k, round(t, 10))))
    assert seen == [(0, 0.0), (1, 0.1), (2, 0.2), (3, 0.3)]
    with pytest.raises(ValueError):
        evolve(omega, Potential.zero(g), cfg, 0.25)


def test_free_gas_is_stationary_under_hartree():
    g = Grid(1, 2.0, 16)
    from fermitrace.states import free_fermi_gas
    eps = 0.5
    omega = free_fermi_gas(g, eps)
    v = Potential.gaussian(g, strength=0.8, width=0.3)
    out = evolve(omega, v, PropagatorConfig(eps, 0.05), 0.5)
    gap = out.mat - omega.mat
    assert np.sqrt((np.abs(gap) ** 2).sum()) < 1e-12


def test_exchange_cancels_direct_term_for_one_particle():
    # rank-1 projector: (V * rho) phi = X phi, so the mean-field generator
    # reduces to the kinetic term; any residual flags a mis-scaled exchange
    g = Grid(1, 2.0, 16)
    eps, dt, t = 0.5, 0.05, 0.4
    omega = slater_from_orbitals(g, gaussian_orbitals(g, [(1.0,)], width=0.2))
    v = Potential.gaussian(g, strength=1.5, width=0.3)
    out = evolve(omega, v, PropagatorConfig(eps, dt, exchange=True), t)
    phase = free_evolution_phase(g, eps, t)
    expect = g.conjugate_by_momentum_phase(omega.mat, phase)
    assert np.abs(out.mat - expect).max() < 1e-10


def test_exchange_energy_conserved():
    g = Grid(1, 2.0, 16)
    cfg = PropagatorConfig(0.5, 0.02, exchange=True)
    v = Potential.gaussian(g, strength=0.8, width=0.25)
    omega = slater_from_orbitals(
        g, gaussian_orbitals(g, [(0.7,), (1.3,)], width=0.15))
    e0 = energy(omega, v, cfg)
    out = evolve(omega, v, cfg, 0.4)
    assert abs(energy(out, v, cfg) - e0) < 5e-4 * max(1.0, abs(e0))
    assert out.purity_defect() < 1e-11


def test_single_steps_match_evolve_flags():
    g = Grid(1, 2.0, 12)
    v = Potential.gaussian(g, strength=0.5, width=0.3)
    omega = slater_lowest_modes(g, 2)
    base = PropagatorConfig(0.5, 0.05)
    assert np.allclose(
        hartree_step(omega, v, base).mat,
        evolve(omega, v, base, 0.05).mat)
    assert np.allclose(
        hartree_fock_step(omega, v, base).mat,
        evolve(omega, v, PropagatorConfig(0.5, 0.05, exchange=True), 0.05).mat)
    assert np.allclose(
        relativistic_step(omega, v, base).mat,
        evolve(omega, v, PropagatorConfig(0.5, 0.05, relativistic=True), 0.05).mat)


def test_self_consistency_iterations_are_fixed_point():
    # the diagonal substep preserves the density, so extra iterations no-op
    g = Grid(1, 2.0, 16)
    v = Potential.gaussian(g, strength=0.8, width=0.25)
    omega = slater_from_orbitals(
        g, gaussian_orbitals(g, [(0.7,), (1.3,)], width=0.15))
    a = evolve(omega, v, PropagatorConfig(0.5, 0.05), 0.2)
    b = evolve(omega, v, PropagatorConfig(0.5, 0.05, self_consistency_iters=3), 0.2)
    assert np.abs(a.mat - b.mat).max() < 1e-13


def test_strang_steps_are_time_reversible():
    g = Grid(1, 2.0, 16)
    v = Potential.gaussian(g, strength=0.8, width=0.25)
    omega = slater_from_orbitals(
        g, gaussian_orbitals(g, [(0.7,), (1.3,)], width=0.15))
    fwd = evolve(omega, v, PropagatorConfig(0.5, 0.05), 0.3)
    back = evolve(fwd, v, PropagatorConfig(0.5, -0.05), 0.3 * -1)
    assert np.abs(back.mat - omega.mat).max() < 1e-11


def test_coherent_state_occupations_stay_in_unit_interval():
    g = Grid(1, 4.0, 48)
    eps = 0.25
    omega = coherent_state(g, DensityProfile.uniform(g, 16), eps)
    v = Potential.gaussian(g, strength=0.5, width=0.3)
    out = evolve(omega, v, PropagatorConfig(eps, 0.05), 0.25)
    ev = out.occupation_spectrum()
    assert ev.min() > -1e-10
    assert ev.max() < 1.0 + 1e-8
    assert abs(out.particle_number() - 16.0) < 1e-9