"""Sweep configuration, study runners, and deterministic report emission.

Configs are single TOML documents with flat tables:

    [grid]
    dim = 1
    box_length = 1.0
    points_per_axis = 24

    [sweep]
    epsilons = [0.5, 0.3333333333333333, 0.25]
    n_rule = "fixed"            # fixed | density
    n_values = [2, 3, 4]        # fixed rule: one per epsilon

    [potential]
    shape = "gaussian"          # gaussian | zero
    strength = 0.5
    width = 0.2

    [propagator]
    dt = 0.025
    dispersion = "nonrelativistic"   # nonrelativistic | pseudo_relativistic
    exchange = false
    self_consistency_iters = 1

    [initial_state]
    kind = "slater"             # free_gas | coherent | slater | slater_lowest
    well_depth = 4.0            # slater kind: confining well parameters
    well_width = 0.3
    profile = "uniform"         # coherent kind: uniform | bump
    bump_width = 1.0            # bump profile only; floor adds a flat offset
    bump_floor = 0.3

    [diagnostics]
    times = [0.0, 0.25, 0.5]
    z_stride = 4
    weight_power = 2

    [run]
    seed = 20250816
    workers = 1
    out_dir = "out"

Reports are plain JSON-safe dicts with a "kind" discriminator, provenance
(config hash, package versions, never timestamps), per-row data, and
assertion outcomes; emit() writes report.json, report.csv with a fixed column
order, and per-curve CSV files under curves/.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:            # python < 3.11
    import tomli as tomllib

from . import __version__
from .diagnostics import concentration_series, purity, semiclassical_report
from .grid import Grid, GridError
from .hartree import Potential, PropagatorConfig, energy, evolve, kinetic_symbol
from .manybody import (BASIS_CAP, MAX_PARTICLES, CapacityError, KacScaleError,
                       ManyBodyHamiltonian, convergence_distance, exact_evolve,
                       kac_equivalence_check)
from .states import (OnePDM, StateValidationError, coherent_state,
                     DensityProfile, free_fermi_gas, lowest_modes,
                     plane_wave_orbitals, save_state, slater_from_orbitals,
                     slater_many_body)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent sweep configurations."""


_DISPERSIONS = ("nonrelativistic", "pseudo_relativistic")
_STATE_KINDS = ("free_gas", "coherent", "slater", "slater_lowest")
_N_RULES = ("fixed", "density")

CONVERGENCE_COLUMNS = ["epsilon", "n_particles", "time", "hs_over_sqrt_n",
                       "trace_over_n", "fluct_over_n", "purity_over_n",
                       "concentration_scaled", "energy", "status", "reason"]
ASSUMPTION_COLUMNS = ["state_kind", "epsilon", "functional", "raw", "scaled"]


@dataclass
class SweepConfig:
    """Validated contents of a sweep TOML document."""

    dim: int = 1
    box_length: float = 1.0
    points_per_axis: int = 24
    epsilons: tuple = (0.5, 0.25)
    n_rule: str = "fixed"
    n_values: tuple = (2, 2)
    potential_shape: str = "gaussian"
    potential_strength: float = 0.5
    potential_width: float | None = None
    dt: float = 0.025
    dispersion: str = "nonrelativistic"
    exchange: bool = False
    self_consistency_iters: int = 1
    state_kind: str = "slater_lowest"
    well_depth: float = 4.0
    well_width: float = 0.3
    profile: str = "uniform"
    bump_width: float | None = None
    bump_floor: float = 0.0
    times: tuple = (0.0, 0.25, 0.5)
    z_stride: int = 4
    weight_power: int = 2
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    kac_time: float = 0.2

    @classmethod
    def from_toml(cls, path: str) -> "SweepConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        grid = doc.get("grid", {})
        sweep = doc.get("sweep", {})
        pot = doc.get("potential", {})
        prop = doc.get("propagator", {})
        init = doc.get("initial_state", {})
        diag = doc.get("diagnostics", {})
        run = doc.get("run", {})
        kac = doc.get("kac", {})
        cfg = cls(
            dim=int(grid.get("dim", 1)),
            box_length=float(grid.get("box_length", 1.0)),
            points_per_axis=int(grid.get("points_per_axis", 24)),
            epsilons=tuple(float(e) for e in sweep.get("epsilons", (0.5, 0.25))),
            n_rule=str(sweep.get("n_rule", "fixed")),
            n_values=tuple(int(n) for n in sweep.get("n_values", (2, 2))),
            potential_shape=str(pot.get("shape", "gaussian")),
            potential_strength=float(pot.get("strength", 0.5)),
            potential_width=(float(pot["width"])
                             if pot.get("width") is not None else None),
            dt=float(prop.get("dt", 0.025)),
            dispersion=str(prop.get("dispersion", "nonrelativistic")),
            exchange=bool(prop.get("exchange", False)),
            self_consistency_iters=int(prop.get("self_consistency_iters", 1)),
            state_kind=str(init.get("kind", "slater_lowest")),
            well_depth=float(init.get("well_depth", 4.0)),
            well_width=float(init.get("well_width", 0.3)),
            profile=str(init.get("profile", "uniform")),
            bump_width=(float(init["bump_width"])
                        if init.get("bump_width") is not None else None),
            bump_floor=float(init.get("bump_floor", 0.0)),
            times=tuple(float(t) for t in diag.get("times", (0.0, 0.25, 0.5))),
            z_stride=int(diag.get("z_stride", 4)),
            weight_power=int(diag.get("weight_power", 2)),
            seed=int(run.get("seed", 0)),
            workers=int(run.get("workers", 1)),
            out_dir=str(run.get("out_dir", "out")),
            kac_time=float(kac.get("time", 0.2)),
        )
        cfg.validate()
        return cfg

    def __post_init__(self):
        if self.n_values is None:
            self.n_values = ()

    def validate(self) -> None:
        try:
            Grid(self.dim, self.box_length, self.points_per_axis)
        except GridError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.epsilons:
            raise ConfigError("epsilon list is empty")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon list must be strictly decreasing")
        if self.n_rule not in _N_RULES:
            raise ConfigError(f"n_rule must be one of {_N_RULES}")
        if self.n_rule == "fixed":
            if len(self.n_values) == 1:
                self.n_values = self.n_values * len(self.epsilons)
            if len(self.n_values) != len(self.epsilons):
                raise ConfigError("fixed n_rule needs one n per epsilon")
            if any(n < 1 for n in self.n_values):
                raise ConfigError("particle counts must be positive")
        if self.potential_shape not in ("gaussian", "zero"):
            raise ConfigError("potential shape must be gaussian or zero")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.dispersion not in _DISPERSIONS:
            raise ConfigError(f"dispersion must be one of {_DISPERSIONS}")
        if self.state_kind not in _STATE_KINDS:
            raise ConfigError(f"initial state kind must be one of {_STATE_KINDS}")
        if self.well_width <= 0:
            raise ConfigError("well_width must be positive")
        if self.profile not in ("uniform", "bump"):
            raise ConfigError("profile must be uniform or bump")
        if self.bump_width is not None and self.bump_width <= 0:
            raise ConfigError("bump_width must be positive")
        if self.bump_floor < 0:
            raise ConfigError("bump_floor must be nonnegative")
        if not self.times or any(t < 0 for t in self.times):
            raise ConfigError("diagnostic times must be nonnegative")
        if sorted(self.times) != list(self.times):
            raise ConfigError("diagnostic times must be ascending")
        for t in self.times:
            steps = t / self.dt
            if abs(steps - round(steps)) > 1e-9:
                raise ConfigError(f"time {t} is not an integer number of dt steps")
        if self.z_stride < 1 or self.weight_power < 1:
            raise ConfigError("z_stride and weight_power must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def cells(self) -> list[tuple[float, int]]:
        """(epsilon, n) pairs in declared order."""
        vol = self.box_length ** self.dim
        if self.n_rule == "fixed":
            return list(zip(self.epsilons, self.n_values))
        return [(e, max(1, round(vol * e ** (-self.dim)))) for e in self.epsilons]

    def grid(self) -> Grid:
        return Grid(self.dim, self.box_length, self.points_per_axis)

    def potential(self, grid: Grid) -> Potential:
        if self.potential_shape == "zero":
            return Potential.zero(grid)
        return Potential.gaussian(grid, self.potential_strength, self.potential_width)

    def density_profile(self, grid: Grid, n: int) -> DensityProfile:
        if self.profile == "bump":
            return DensityProfile.bump(grid, n, width=self.bump_width,
                                       floor=self.bump_floor)
        return DensityProfile.uniform(grid, n)

    def propagator(self, eps: float) -> PropagatorConfig:
        return PropagatorConfig(
            eps=eps, dt=self.dt,
            relativistic=(self.dispersion == "pseudo_relativistic"),
            exchange=self.exchange,
            self_consistency_iters=self.self_consistency_iters)

    def as_dict(self) -> dict:
        return {
            "grid": {"dim": self.dim, "box_length": self.box_length,
                     "points_per_axis": self.points_per_axis},
            "sweep": {"epsilons": list(self.epsilons), "n_rule": self.n_rule,
                      "n_values": list(self.n_values)},
            "potential": {"shape": self.potential_shape,
                          "strength": self.potential_strength,
                          "width": self.potential_width},
            "propagator": {"dt": self.dt, "dispersion": self.dispersion,
                           "exchange": self.exchange,
                           "self_consistency_iters": self.self_consistency_iters},
            "initial_state": {"kind": self.state_kind,
                              "well_depth": self.well_depth,
                              "well_width": self.well_width,
                              "profile": self.profile,
                              "bump_width": self.bump_width,
                              "bump_floor": self.bump_floor},
            "diagnostics": {"times": list(self.times), "z_stride": self.z_stride,
                            "weight_power": self.weight_power},
            "run": {"seed": self.seed, "workers": self.workers,
                    "out_dir": self.out_dir},
            "kac": {"time": self.kac_time},
        }

    def sha256(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _provenance(cfg: SweepConfig) -> dict:
    import scipy
    return {
        "config_sha256": cfg.sha256(),
        "package": f"fermitrace {__version__}",
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


# --- convergence study --------------------------------------------------------

def well_orbitals(grid: Grid, eps: float, n: int, depth: float = 4.0,
                  width: float = 0.3) -> np.ndarray:
    """Lowest n modes of the kinetic operator plus a centered Gaussian well.

    The well makes the one-body spectrum non-degenerate at every filling, so
    the Slater family varies smoothly across the sweep cells; depth and width
    set the number of bound levels.
    """
    sym = kinetic_symbol(grid, eps).astype(complex)
    kin = grid.to_position_matrix(np.diag(sym))
    kin = (kin + kin.conj().T) / 2.0
    center = [b / 2.0 for b in grid.box_length]
    d2 = grid.periodic_distance(grid.positions, center) ** 2
    trap = -depth * np.exp(-d2 / (2.0 * width ** 2))
    _, vecs = np.linalg.eigh(kin * grid.cell_volume + np.diag(trap))
    return vecs[:, :n] / math.sqrt(grid.cell_volume)


def _initial_pair(grid: Grid, eps: float, n: int, cfg: SweepConfig):
    """Mean-field state and the orbital columns whose Slater matches it."""
    h = grid.cell_volume
    kind = cfg.state_kind
    if kind == "slater":
        orbitals = well_orbitals(grid, eps, n, cfg.well_depth, cfg.well_width)
        return slater_from_orbitals(grid, orbitals), orbitals, n
    if kind == "slater_lowest":
        orbitals = plane_wave_orbitals(grid, lowest_modes(grid, n))
        return slater_from_orbitals(grid, orbitals), orbitals, n
    if kind == "free_gas":
        omega = free_fermi_gas(grid, eps)
        n_eff = int(round(omega.particle_number()))
        ev, evec = np.linalg.eigh(omega.mat)
        orbitals = evec[:, -n_eff:] / math.sqrt(h)
        return omega, orbitals, n_eff
    if kind == "coherent":
        omega = coherent_state(grid, cfg.density_profile(grid, n), eps)
        ev, evec = np.linalg.eigh(omega.mat)
        orbitals = evec[:, -n:] / math.sqrt(h)
        return omega, orbitals, n
    raise ConfigError(f"unknown state kind {kind!r}")


def _convergence_cell(payload: dict) -> dict:
    """One (epsilon, n) cell; returns rows or an explicit skip record."""
    cfg = SweepConfig.from_dict(payload["config"])
    eps = float(payload["epsilon"])
    n = int(payload["n_particles"])
    base = {"epsilon": eps, "n_particles": n}
    try:
        if n > MAX_PARTICLES:
            raise CapacityError(f"n = {n} exceeds the {MAX_PARTICLES}-particle cap")
        if math.comb(cfg.points_per_axis ** cfg.dim, n) > BASIS_CAP:
            raise CapacityError("exact basis exceeds the size cap")
        grid = cfg.grid()
        potential = cfg.potential(grid)
        pcfg = cfg.propagator(eps)
        omega, orbitals, n = _initial_pair(grid, eps, n, cfg)
        base["n_particles"] = n
        psi = slater_many_body(grid, orbitals)
        ham = ManyBodyHamiltonian(grid, eps, potential,
                                  relativistic=pcfg.relativistic)
        rows = []
        t_prev = 0.0
        for t in cfg.times:
            if t > t_prev:
                psi = exact_evolve(psi, ham, t - t_prev)
                omega = evolve(omega, potential, pcfg, t - t_prev)
                t_prev = t
            dist = convergence_distance(psi, omega)
            conc = concentration_series([(t, omega)], eps, cfg.z_stride)
            rows.append({**base, "time": t,
                         "hs_over_sqrt_n": dist["hs_over_sqrt_n"],
                         "trace_over_n": dist["trace_over_n"],
                         "fluct_over_n": dist["fluctuation_number"] / n,
                         "purity_over_n": purity(omega) / n,
                         "concentration_scaled": conc["scaled"][0],
                         "energy": energy(omega, potential, pcfg),
                         "status": "ok", "reason": ""})
        return {"rows": rows, "status": "ok"}
    except (CapacityError, StateValidationError) as exc:
        return {"rows": [{**base, "time": None, "hs_over_sqrt_n": None,
                          "trace_over_n": None, "fluct_over_n": None,
                          "purity_over_n": None, "concentration_scaled": None,
                          "energy": None, "status": "skipped",
                          "reason": str(exc)}],
                "status": "skipped"}


def run_convergence_study(cfg: SweepConfig) -> dict:
    """Exact-versus-mean-field distances over the epsilon sweep.

    Each cell pairs a mean-field initial state with the exact Slater state of
    the same orbitals, runs both flows, and reports normalized distances at
    the scheduled times.  The fit block records the log-log slope of the
    normalized Hilbert-Schmidt distance against epsilon at the final time.
    """
    payloads = [{"config": cfg.as_dict(), "epsilon": e, "n_particles": n}
                for e, n in cfg.cells()]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_convergence_cell, payloads))
    else:
        results = [_convergence_cell(p) for p in payloads]
    rows = [row for res in results for row in res["rows"]]

    t_fit = cfg.times[-1]
    fit_rows = [r for r in rows if r["status"] == "ok" and r["time"] == t_fit
                and r["hs_over_sqrt_n"] and r["hs_over_sqrt_n"] > 0]
    fit: dict = {"time": t_fit, "slope": None, "intercept": None,
                 "residual": None, "monotone_decreasing_in_epsilon": None}
    if len(fit_rows) >= 2:
        eps_arr = np.array([r["epsilon"] for r in fit_rows])
        val_arr = np.array([r["hs_over_sqrt_n"] for r in fit_rows])
        order = np.argsort(eps_arr)               # ascending eps
        eps_arr, val_arr = eps_arr[order], val_arr[order]
        # decreasing as a function of eps: larger eps maps to smaller value
        fit["monotone_decreasing_in_epsilon"] = bool(np.all(np.diff(val_arr) < 0))
        coeff, residual, *_ = np.polyfit(np.log(eps_arr), np.log(val_arr), 1, full=True)
        fit["slope"] = float(coeff[0])
        fit["intercept"] = float(coeff[1])
        fit["residual"] = float(residual[0]) if len(residual) else 0.0
    all_passed = all(res["status"] == "ok" for res in results)
    if fit["monotone_decreasing_in_epsilon"] is not None:
        all_passed = all_passed and fit["monotone_decreasing_in_epsilon"]
    return {"kind": "convergence", "config": cfg.as_dict(),
            "provenance": _provenance(cfg), "rows": rows, "fit": fit,
            "all_passed": all_passed}


# --- assumption checks ----------------------------------------------------------

def _flat_within_factor(values, factor: float = 3.0, floor: float = 1e-10) -> bool:
    vals = np.asarray(values, dtype=float)
    if float(np.max(np.abs(vals))) < floor:
        # identically-vanishing functional measured at roundoff level
        return True
    med = float(np.median(vals))
    if med == 0.0:
        return False
    return bool(np.all(vals <= factor * med) and np.all(vals >= med / factor))


def run_assumption_check(cfg: SweepConfig) -> dict:
    """Scaled structure functionals of the reference states across epsilon.

    For every epsilon the free-gas and coherent initial states are built on
    the configured grid and all four functionals evaluated; each scaled
    series must stay within a factor 3 of its median across the sweep.
    """
    grid = cfg.grid()
    vol = grid.volume
    reports: dict[str, list[dict]] = {"free_gas": [], "coherent": []}
    for eps in cfg.epsilons:
        free = free_fermi_gas(grid, eps)
        n = max(1, round(vol * eps ** (-grid.dim)))
        coh = coherent_state(grid, cfg.density_profile(grid, n), eps)
        for kind, state in (("free_gas", free), ("coherent", coh)):
            rep = semiclassical_report(state, eps, power=cfg.weight_power,
                                       z_stride=cfg.z_stride,
                                       t_window=cfg.times)
            reports[kind].append(rep.as_dict())
    checks = []
    for kind, series in reports.items():
        for functional in ("comm", "grad", "mass", "concentration"):
            values = [rep["scaled"][functional] for rep in series]
            checks.append({"state_kind": kind, "functional": functional,
                           "values": values,
                           "passed": _flat_within_factor(values)})
    return {"kind": "assumptions", "config": cfg.as_dict(),
            "provenance": _provenance(cfg), "reports": reports,
            "checks": checks,
            "all_passed": all(c["passed"] for c in checks)}


# --- operator-identity checks -----------------------------------------------------

def run_fock_checks(cfg: SweepConfig) -> dict:
    """Randomized identity suite on the small Fock space.

    Covers particle-hole map identities (with the involution sign recorded
    explicitly per particle number), the five quadratic-operator bounds, the
    canonical anticommutation relations, and the closed-form fluctuation
    identity along a short coupled run.
    """
    from . import fock

    rng = np.random.default_rng(cfg.seed)
    tol = 1e-10

    bog_rows = []
    m, n_occ, trials = 6, 2, 50
    for _ in range(trials):
        x = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        q, _ = np.linalg.qr(x)
        bmap = fock.BogoliubovMap(q, n_occ)
        bog_rows.append({
            "slater_defect": bmap.slater_defect(),
            "unitarity_defect": bmap.unitarity_defect(),
            "conjugation_defect": bmap.conjugation_defect(),
            "involution_defect": bmap.involution_defect(),
            "involution_sign": bmap.involution_sign,
            "self_adjoint_gap": bmap.self_adjoint_gap(),
        })
    bog_pass = all(r["slater_defect"] <= tol and r["unitarity_defect"] <= tol
                   and r["conjugation_defect"] <= tol
                   and r["involution_defect"] <= tol for r in bog_rows)

    lemma_worst = {}
    m_lemma, pairs = 8, 100
    dim = 2 ** m_lemma
    for _ in range(pairs):
        j = rng.standard_normal((m_lemma, m_lemma)) + 1j * rng.standard_normal((m_lemma, m_lemma))
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        rep = fock.sector_bound_report(m_lemma, j, vec)
        for name, (lhs, rhs) in rep.items():
            slack = rhs - lhs
            lemma_worst[name] = min(lemma_worst.get(name, np.inf), slack)
    lemma_pass = all(s >= -1e-10 for s in lemma_worst.values())

    car_defect = 0.0
    m_car = 6
    eye = np.eye(2 ** m_car)
    for i in range(m_car):
        ai = fock.annihilator(m_car, i).toarray()
        for j in range(m_car):
            aj = fock.annihilator(m_car, j).toarray()
            cj = aj.conj().T
            anti = ai @ cj + cj @ ai
            car_defect = max(car_defect, float(np.linalg.norm(anti - (eye if i == j else 0.0))))
            car_defect = max(car_defect, float(np.linalg.norm(ai @ aj + aj @ ai)))
    car_pass = car_defect <= tol

    grid = Grid(1, 2.0, 10)
    eps = 0.5
    potential = Potential.gaussian(grid, cfg.potential_strength, cfg.potential_width)
    orbitals = plane_wave_orbitals(grid, lowest_modes(grid, 2))
    omega0 = slater_from_orbitals(grid, orbitals)
    psi0 = slater_many_body(grid, orbitals)
    series = fock.fluctuation_dynamics(psi0, omega0, potential, eps,
                                       dt=0.02, n_steps=10)
    fluct_defect = max(row["defect"] for row in series)
    fluct_pass = fluct_defect <= 1e-8

    return {"kind": "fock-checks", "config": cfg.as_dict(),
            "provenance": _provenance(cfg),
            "bogoliubov": {"rows": bog_rows, "passed": bog_pass,
                           "modes": m, "rank": n_occ, "trials": trials},
            "lemma_bounds": {"worst_slack": {k: float(v) for k, v in lemma_worst.items()},
                             "pairs": pairs, "modes": m_lemma, "passed": lemma_pass},
            "car": {"worst_defect": car_defect, "modes": m_car, "passed": car_pass},
            "fluctuation": {"series": series, "worst_defect": fluct_defect,
                            "passed": fluct_pass},
            "all_passed": bog_pass and lemma_pass and car_pass and fluct_pass}


def run_kac_check(cfg: SweepConfig) -> dict:
    """Dilated slow-time flow against the standard flow on the first epsilon."""
    eps = cfg.epsilons[0]
    gamma = round(1.0 / eps)
    if abs(gamma * eps - 1.0) > 1e-12:
        raise ConfigError("kac check needs an epsilon whose inverse is an integer")
    grid = cfg.grid()
    potential = cfg.potential(grid)
    n = cfg.cells()[0][1]
    orbitals = plane_wave_orbitals(grid, lowest_modes(grid, n))
    psi0 = slater_many_body(grid, orbitals)
    try:
        result = kac_equivalence_check(psi0, potential, eps, cfg.kac_time)
    except KacScaleError as exc:
        raise ConfigError(str(exc)) from exc
    passed = result["l2_distance"] <= 1e-8
    return {"kind": "kac-check", "config": cfg.as_dict(),
            "provenance": _provenance(cfg), "result": result,
            "n_particles": n, "all_passed": passed}


def run_state_dump(cfg: SweepConfig) -> dict:
    """Build the first cell's mean-field state and persist it."""
    grid = cfg.grid()
    eps, n = cfg.cells()[0]
    state, _, _ = _initial_pair(grid, eps, n, cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    prefix = os.path.join(cfg.out_dir, "state")
    save_state(prefix, state, extra={"epsilon": eps})
    return {"kind": "state-dump", "config": cfg.as_dict(),
            "provenance": _provenance(cfg),
            "files": [prefix + ".bin", prefix + ".json"],
            "trace": float(state.particle_number()), "all_passed": True}


# --- emission ---------------------------------------------------------------------

def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else row.get(c, "")
                             for c in columns])


def emit(report: dict, out_dir: str) -> list[str]:
    """Write report.json, report.csv, and curves/*.csv; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    curves_dir = os.path.join(out_dir, "curves")
    os.makedirs(curves_dir, exist_ok=True)
    paths = []

    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(json_path)

    csv_path = os.path.join(out_dir, "report.csv")
    kind = report.get("kind")
    if kind == "convergence":
        _write_csv(csv_path, CONVERGENCE_COLUMNS, report["rows"])
        paths.append(csv_path)
        by_eps: dict[float, list[dict]] = {}
        for row in report["rows"]:
            if row["status"] == "ok":
                by_eps.setdefault(row["epsilon"], []).append(row)
        for k, (e, rows) in enumerate(sorted(by_eps.items(), reverse=True)):
            cpath = os.path.join(curves_dir, f"hs_eps{k}.csv")
            _write_csv(cpath, ["time", "hs_over_sqrt_n"],
                       [{"time": r["time"], "hs_over_sqrt_n": r["hs_over_sqrt_n"]}
                        for r in rows])
            paths.append(cpath)
        fit = report.get("fit", {})
        if fit.get("slope") is not None:
            t_fit = fit["time"]
            pts = [{"log_epsilon": math.log(r["epsilon"]),
                    "log_hs": math.log(r["hs_over_sqrt_n"])}
                   for r in report["rows"]
                   if r["status"] == "ok" and r["time"] == t_fit
                   and r["hs_over_sqrt_n"] and r["hs_over_sqrt_n"] > 0]
            cpath = os.path.join(curves_dir, "slope.csv")
            _write_csv(cpath, ["log_epsilon", "log_hs"], pts)
            paths.append(cpath)
    elif kind == "assumptions":
        rows = []
        for state_kind, series in report["reports"].items():
            for rep in series:
                for functional in ("comm", "grad", "mass", "concentration"):
                    rows.append({"state_kind": state_kind,
                                 "epsilon": rep["epsilon"],
                                 "functional": functional,
                                 "raw": rep["raw"][functional],
                                 "scaled": rep["scaled"][functional]})
        _write_csv(csv_path, ASSUMPTION_COLUMNS, rows)
        paths.append(csv_path)
        for state_kind, series in report["reports"].items():
            for functional in ("comm", "grad", "mass", "concentration"):
                cpath = os.path.join(curves_dir, f"scaled_{state_kind}_{functional}.csv")
                _write_csv(cpath, ["epsilon", "scaled"],
                           [{"epsilon": rep["epsilon"],
                             "scaled": rep["scaled"][functional]} for rep in series])
                paths.append(cpath)
    else:
        _write_csv(csv_path, ["key", "value"],
                   [{"key": "kind", "value": kind},
                    {"key": "all_passed", "value": report.get("all_passed")}])
        paths.append(csv_path)
    return paths
