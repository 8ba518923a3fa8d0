"""Declarative scenario runner for the chain experiments.

A scenario names a lattice (homogeneous coupling, quasiperiodic modulation,
or explicit arrays), a dephasing strength relative to the reference coupling,
an initial excitation pattern, a time grid, and which engine(s) to run:
the deterministic density-matrix solver, the stochastic unraveling, or both.
Built-in scenarios cover the headline experiments (ballistic/diffusive
spreading, dephasing-enhanced localization in the quasiperiodic chain at two
modulation ratios plus an L=89 sweep, and anomalous relaxation ordering of
four initial mixtures) so reproduction needs no config authoring.

Unit conventions at this boundary: config frequencies are plain MHz and are
multiplied by 2*pi into angular rad/us internally; config times are either
multiples of the inverse reference coupling ("inverse_j", i.e. the t axis is
J*t) or microseconds ("us"). Initial-state site indices are centered, with 0
the middle site of an odd chain.

Outputs per scenario run: one CSV per engine (columns t, n_0..n_{L-1}, W, M,
D at 12 significant digits), a YAML summary (config echo, fits, crossings,
integrator diagnostics), and optional self-contained SVG plots. Every number
in the summary is recomputable from the CSV columns alone. Reruns with the
same config produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml

from .errors import ConfigError
from .lattice import (GOLDEN_MEAN, LatticeSpec, QuasiperiodicSpec, center_index,
                      lattice_from_quasiperiodic)
from .lindblad import DensityMatrix, evolve
from .observables import (CrossingReport, ObservableSeries, PowerLawFit,
                          compute_observables, detect_mpemba_crossing,
                          fit_spreading_exponent)
from .trajectories import NoiseSpec, run_ensemble

DEFAULT_COUPLING_MHZ = 8.3
DEFAULT_SNAPSHOTS = 201
DEFAULT_N_TRAJ = 2000
DEFAULT_BASE_SEED = 20260811
MAX_DT_FACTOR = 0.05

ENGINES = ("lindblad", "trajectories", "both")
TIME_UNITS = ("inverse_j", "us")

CSV_FORMAT = "%.12g"


def mhz_to_angular(frequency_mhz: float) -> float:
    """Plain MHz to angular rad/us."""
    return 2.0 * np.pi * frequency_mhz


@dataclass(frozen=True)
class HomogeneousLattice:
    n_sites: int
    coupling_mhz: float = DEFAULT_COUPLING_MHZ

    def __post_init__(self):
        if self.n_sites < 2:
            raise ConfigError(f"lattice.sites must be >= 2, got {self.n_sites}")
        if not self.coupling_mhz > 0:
            raise ConfigError(f"lattice.coupling_mhz must be positive, got {self.coupling_mhz}")


@dataclass(frozen=True)
class QuasiperiodicLattice:
    n_sites: int
    kappa: float
    total_mhz: float = DEFAULT_COUPLING_MHZ
    alpha: float = GOLDEN_MEAN
    theta: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ConfigError(f"lattice.sites must be >= 2, got {self.n_sites}")
        if self.kappa < 0:
            raise ConfigError(f"lattice.kappa must be nonnegative, got {self.kappa}")
        if not self.total_mhz > 0:
            raise ConfigError(f"lattice.total_mhz must be positive, got {self.total_mhz}")


@dataclass(frozen=True)
class ExplicitLattice:
    detunings_mhz: tuple
    couplings_mhz: tuple

    def __post_init__(self):
        object.__setattr__(self, "detunings_mhz", tuple(float(x) for x in self.detunings_mhz))
        object.__setattr__(self, "couplings_mhz", tuple(float(x) for x in self.couplings_mhz))
        n = len(self.detunings_mhz)
        if n < 2:
            raise ConfigError("lattice.detunings_mhz needs at least 2 entries")
        if len(self.couplings_mhz) != n - 1:
            raise ConfigError(
                f"lattice.couplings_mhz must have {n - 1} entries, got {len(self.couplings_mhz)}"
            )

    @property
    def n_sites(self) -> int:
        return len(self.detunings_mhz)


Lattice = Union[HomogeneousLattice, QuasiperiodicLattice, ExplicitLattice]


@dataclass(frozen=True)
class NoiseConfig:
    """Trajectory-engine knobs. dt_factor scales the refresh cap: the refresh
    interval is dt_factor / max(||H||_inf, gamma)."""

    dt_factor: float = MAX_DT_FACTOR
    n_traj: int = DEFAULT_N_TRAJ
    base_seed: int = DEFAULT_BASE_SEED

    def __post_init__(self):
        if not 0 < self.dt_factor <= MAX_DT_FACTOR:
            raise ConfigError(
                f"noise.dt_factor must be in (0, {MAX_DT_FACTOR}], got {self.dt_factor}"
            )
        if self.n_traj < 1:
            raise ConfigError(f"noise.n_traj must be >= 1, got {self.n_traj}")
        if self.base_seed < 0:
            raise ConfigError("noise.base_seed must be nonnegative")


@dataclass(frozen=True)
class InitialState:
    """Excitation pattern: one site, or a uniform mixture over several.

    Indices are centered (0 is the middle site of an odd chain).
    """

    sites: tuple

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        if not self.sites:
            raise ConfigError("initial_state needs at least one site")
        if len(set(self.sites)) != len(self.sites):
            raise ConfigError("initial_state sites must be distinct")

    @classmethod
    def site(cls, j: int) -> "InitialState":
        return cls(sites=(j,))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    lattice: Lattice
    gamma_over_j: float
    initial_state: InitialState
    t_max: float
    n_snapshots: int = DEFAULT_SNAPSHOTS
    time_unit: str = "inverse_j"
    engine: str = "lindblad"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    fit_window: tuple | None = None
    m_eval_time: float | None = None

    def __post_init__(self):
        if not self.name:
            raise ConfigError("name must be non-empty")
        if self.gamma_over_j < 0:
            raise ConfigError(f"gamma_over_j must be nonnegative, got {self.gamma_over_j}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if self.n_snapshots < 2:
            raise ConfigError(f"n_snapshots must be >= 2, got {self.n_snapshots}")
        if self.time_unit not in TIME_UNITS:
            raise ConfigError(f"time_unit must be one of {TIME_UNITS}, got {self.time_unit!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        n = self.lattice.n_sites
        lo = -center_index(n)
        hi = n - 1 - center_index(n)
        for j in self.initial_state.sites:
            if not lo <= j <= hi:
                raise ConfigError(
                    f"initial_state site {j} outside centered range [{lo}, {hi}] for {n} sites"
                )
        if self.fit_window is not None:
            object.__setattr__(self, "fit_window",
                               (float(self.fit_window[0]), float(self.fit_window[1])))
            a, b = self.fit_window
            if not 0 <= a < b:
                raise ConfigError(f"fit_window must satisfy 0 <= t_a < t_b, got {self.fit_window}")
            if b > self.t_max:
                raise ConfigError(f"fit_window end {b} exceeds t_max {self.t_max}")
        if self.m_eval_time is not None and not 0 < self.m_eval_time <= self.t_max:
            raise ConfigError(
                f"m_eval_time must lie in (0, t_max], got {self.m_eval_time}"
            )

    @property
    def internal_sites(self) -> tuple:
        c = center_index(self.lattice.n_sites)
        return tuple(j + c for j in self.initial_state.sites)


def reference_coupling_mhz(lattice: Lattice) -> float:
    """The coupling scale J that gamma_over_j and inverse_j times refer to."""
    if isinstance(lattice, HomogeneousLattice):
        return lattice.coupling_mhz
    if isinstance(lattice, QuasiperiodicLattice):
        return lattice.total_mhz
    return max(abs(c) for c in lattice.couplings_mhz)


def build_lattice_spec(config: ScenarioConfig) -> LatticeSpec:
    """Realize the configured lattice in angular units (rad/us)."""
    lat = config.lattice
    gamma = config.gamma_over_j * mhz_to_angular(reference_coupling_mhz(lat))
    if isinstance(lat, HomogeneousLattice):
        return LatticeSpec.homogeneous(lat.n_sites, mhz_to_angular(lat.coupling_mhz), gamma)
    if isinstance(lat, QuasiperiodicLattice):
        qspec = QuasiperiodicSpec.from_kappa(
            lat.n_sites, lat.kappa, mhz_to_angular(lat.total_mhz),
            alpha=lat.alpha, theta=lat.theta,
        )
        return lattice_from_quasiperiodic(qspec, dephasing_rate=gamma)
    return LatticeSpec(
        detunings=np.array([mhz_to_angular(x) for x in lat.detunings_mhz]),
        couplings=np.array([mhz_to_angular(x) for x in lat.couplings_mhz]),
        dephasing_rates=np.full(lat.n_sites, gamma),
    )


# --------------------------------------------------------------------------
# Config (de)serialization: nested key-value YAML.
# --------------------------------------------------------------------------

def config_to_dict(config: ScenarioConfig) -> dict:
    lat = config.lattice
    if isinstance(lat, HomogeneousLattice):
        lattice = {"sites": lat.n_sites, "coupling_mhz": lat.coupling_mhz}
    elif isinstance(lat, QuasiperiodicLattice):
        lattice = {"sites": lat.n_sites,
                   "quasiperiodic": {"kappa": lat.kappa, "total_mhz": lat.total_mhz,
                                     "alpha": lat.alpha, "theta": lat.theta}}
    else:
        lattice = {"detunings_mhz": list(lat.detunings_mhz),
                   "couplings_mhz": list(lat.couplings_mhz)}
    sites = config.initial_state.sites
    initial = {"site": sites[0]} if len(sites) == 1 else {"sites": list(sites)}
    out = {
        "name": config.name,
        "lattice": lattice,
        "gamma_over_j": config.gamma_over_j,
        "initial_state": initial,
        "t_max": config.t_max,
        "n_snapshots": config.n_snapshots,
        "time_unit": config.time_unit,
        "engine": config.engine,
        "noise": {"dt_factor": config.noise.dt_factor, "n_traj": config.noise.n_traj,
                  "base_seed": config.noise.base_seed},
    }
    if config.fit_window is not None:
        out["fit_window"] = [config.fit_window[0], config.fit_window[1]]
    if config.m_eval_time is not None:
        out["m_eval_time"] = config.m_eval_time
    return out


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing field {context}{key}")
    return mapping[key]


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario config must be a mapping")
    lat_data = _require(data, "lattice", "")
    if not isinstance(lat_data, dict):
        raise ConfigError("lattice must be a mapping")
    ways = [k for k in ("coupling_mhz", "quasiperiodic", "couplings_mhz") if k in lat_data]
    if len(ways) != 1:
        raise ConfigError(
            "lattice must give exactly one of coupling_mhz, quasiperiodic, couplings_mhz"
        )
    if ways[0] == "coupling_mhz":
        lattice: Lattice = HomogeneousLattice(
            n_sites=int(_require(lat_data, "sites", "lattice.")),
            coupling_mhz=float(lat_data["coupling_mhz"]),
        )
    elif ways[0] == "quasiperiodic":
        qp = lat_data["quasiperiodic"]
        lattice = QuasiperiodicLattice(
            n_sites=int(_require(lat_data, "sites", "lattice.")),
            kappa=float(_require(qp, "kappa", "lattice.quasiperiodic.")),
            total_mhz=float(qp.get("total_mhz", DEFAULT_COUPLING_MHZ)),
            alpha=float(qp.get("alpha", GOLDEN_MEAN)),
            theta=float(qp.get("theta", 0.0)),
        )
    else:
        lattice = ExplicitLattice(
            detunings_mhz=tuple(_require(lat_data, "detunings_mhz", "lattice.")),
            couplings_mhz=tuple(lat_data["couplings_mhz"]),
        )
    init_data = _require(data, "initial_state", "")
    if isinstance(init_data, dict) and "site" in init_data:
        initial = InitialState.site(int(init_data["site"]))
    elif isinstance(init_data, dict) and "sites" in init_data:
        initial = InitialState(sites=tuple(int(s) for s in init_data["sites"]))
    else:
        raise ConfigError("initial_state must give 'site' or 'sites'")
    noise_data = data.get("noise", {})
    noise = NoiseConfig(
        dt_factor=float(noise_data.get("dt_factor", MAX_DT_FACTOR)),
        n_traj=int(noise_data.get("n_traj", DEFAULT_N_TRAJ)),
        base_seed=int(noise_data.get("base_seed", DEFAULT_BASE_SEED)),
    )
    window = data.get("fit_window")
    return ScenarioConfig(
        name=str(_require(data, "name", "")),
        lattice=lattice,
        gamma_over_j=float(_require(data, "gamma_over_j", "")),
        initial_state=initial,
        t_max=float(_require(data, "t_max", "")),
        n_snapshots=int(data.get("n_snapshots", DEFAULT_SNAPSHOTS)),
        time_unit=str(data.get("time_unit", "inverse_j")),
        engine=str(data.get("engine", "lindblad")),
        noise=noise,
        fit_window=None if window is None else (float(window[0]), float(window[1])),
        m_eval_time=None if data.get("m_eval_time") is None else float(data["m_eval_time"]),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)


# --------------------------------------------------------------------------
# Scenario execution.
# --------------------------------------------------------------------------

@dataclass
class EngineResult:
    series: ObservableSeries
    stderr: np.ndarray | None
    fit: PowerLawFit | None
    m_at_eval: float | None
    diagnostics: dict


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    engines: dict

    def primary_engine(self) -> str:
        return "lindblad" if "lindblad" in self.engines else "trajectories"

    def primary_series(self) -> ObservableSeries:
        return self.engines[self.primary_engine()].series


def _display_grid(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """(display times, physical times in us)."""
    t_disp = np.linspace(0.0, config.t_max, config.n_snapshots)
    if config.time_unit == "inverse_j":
        j_ref = mhz_to_angular(reference_coupling_mhz(config.lattice))
        return t_disp, t_disp / j_ref
    return t_disp, t_disp


def _postprocess(config: ScenarioConfig, t_disp: np.ndarray,
                 populations: np.ndarray, diagnostics: dict,
                 stderr: np.ndarray | None) -> EngineResult:
    series = compute_observables(t_disp, populations)
    fit = None
    if config.fit_window is not None:
        fit = fit_spreading_exponent(t_disp, series.integrated_moment, config.fit_window)
    m_at = None
    if config.m_eval_time is not None:
        idx = int(np.argmin(np.abs(t_disp - config.m_eval_time)))
        m_at = float(series.integrated_moment[idx])
        diagnostics["m_eval_time_used"] = float(t_disp[idx])
    return EngineResult(series=series, stderr=stderr, fit=fit, m_at_eval=m_at,
                        diagnostics=diagnostics)


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Run the configured engine(s) and derive all observables.

    Deterministic given the config (seeds included); engine failures
    propagate with the scenario name attached.
    """
    spec = build_lattice_spec(config)
    t_disp, t_us = _display_grid(config)
    engines: dict[str, EngineResult] = {}

    try:
        if config.engine in ("lindblad", "both"):
            start = time.perf_counter()
            rho0 = DensityMatrix.site_mixture(spec.n_sites, config.internal_sites)
            result = evolve(rho0, spec, t_us, keep_states=False)
            diag = {
                "wall_time_s": time.perf_counter() - start,
                "steps": result.stats.steps,
                "step_size_us": result.stats.step_size,
                "trace_renormalizations": result.stats.trace_renormalizations,
                "max_trace_drift": result.stats.max_trace_drift,
                "max_hermiticity_drift": result.stats.max_hermiticity_drift,
                "min_eigenvalue": result.stats.min_eigenvalue,
                "max_snapshot_trace_dev": result.stats.max_snapshot_trace_dev,
            }
            engines["lindblad"] = _postprocess(config, t_disp, result.populations, diag, None)

        if config.engine in ("trajectories", "both"):
            start = time.perf_counter()
            gamma = spec.dephasing_rates.max()
            scale = max(spec.hamiltonian_inf_norm(), gamma)
            dt = config.noise.dt_factor / scale if scale > 0 else float(t_us[-1])
            noise = NoiseSpec(gamma=float(gamma), dt=dt, n_traj=config.noise.n_traj,
                              base_seed=config.noise.base_seed)
            internal = config.internal_sites
            if len(internal) == 1:
                psi0 = np.zeros(spec.n_sites, dtype=complex)
                psi0[internal[0]] = 1.0
                ensemble = run_ensemble(psi0, spec, noise, t_us)
            else:
                ensemble = run_ensemble(list(internal), spec, noise, t_us)
            diag = {
                "wall_time_s": time.perf_counter() - start,
                "n_traj": ensemble.n_traj,
                "refresh_dt_us": noise.dt,
                "base_seed": noise.base_seed,
                "max_stderr": float(ensemble.stderr.max()),
            }
            engines["trajectories"] = _postprocess(
                config, t_disp, ensemble.mean_populations, diag, ensemble.stderr,
            )
    except Exception as exc:
        exc.add_note(f"while running scenario {config.name!r}")
        raise

    return ScenarioReport(config=config, engines=engines)


# --------------------------------------------------------------------------
# Composite studies: relaxation-ordering comparison and modulation sweep.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MpembaStudy:
    """Several initial states raced toward equilibrium on one lattice.

    reference names the state whose distance curve starts highest; crossings
    are detected between it and every other state.
    """

    name: str
    base: ScenarioConfig
    states: dict
    reference: str

    def __post_init__(self):
        if self.reference not in self.states:
            raise ConfigError(f"reference state {self.reference!r} not among states")


@dataclass
class MpembaReport:
    study: MpembaStudy
    reports: dict
    crossings: dict


def run_mpemba(study: MpembaStudy) -> MpembaReport:
    reports = {}
    for label, sites in study.states.items():
        cfg = replace(study.base, name=f"{study.name}_{label}",
                      initial_state=InitialState(sites=tuple(sites)))
        reports[label] = run_scenario(cfg)
    ref_series = reports[study.reference].primary_series()
    crossings = {}
    for label in study.states:
        if label == study.reference:
            continue
        other = reports[label].primary_series()
        crossings[label] = detect_mpemba_crossing(
            ref_series.times, ref_series.distance, other.distance,
        )
    return MpembaReport(study=study, reports=reports, crossings=crossings)


@dataclass(frozen=True)
class KappaSweepConfig:
    name: str
    n_sites: int = 89
    kappas: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    total_mhz: float = DEFAULT_COUPLING_MHZ
    gamma_over_j: float = 30.0
    t_max: float = 20.0
    n_snapshots: int = DEFAULT_SNAPSHOTS
    m_eval_time: float = 20.0
    alpha: float = GOLDEN_MEAN
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kappas", tuple(float(k) for k in self.kappas))

    def base_config(self) -> ScenarioConfig:
        return ScenarioConfig(
            name=self.name,
            lattice=QuasiperiodicLattice(n_sites=self.n_sites, kappa=self.kappas[0],
                                         total_mhz=self.total_mhz, alpha=self.alpha,
                                         theta=self.theta),
            gamma_over_j=self.gamma_over_j,
            initial_state=InitialState.site(0),
            t_max=self.t_max,
            n_snapshots=self.n_snapshots,
            m_eval_time=self.m_eval_time,
        )


@dataclass
class SweepRow:
    kappa: float
    m_coherent: float
    m_dephased: float

    @property
    def ratio(self) -> float:
        return self.m_coherent / self.m_dephased


@dataclass
class KappaSweepResult:
    name: str
    rows: list
    config: KappaSweepConfig | None = None


def sweep_kappa(base: ScenarioConfig, kappas: Sequence[float],
                with_and_without_noise: bool = True) -> list[SweepRow]:
    """Integrated moment at the evaluation time, per modulation ratio.

    For each kappa the dephased evolution runs at the base config's
    gamma_over_j; with_and_without_noise adds the coherent (gamma = 0)
    counterpart, otherwise the coherent column is NaN.
    """
    if not isinstance(base.lattice, QuasiperiodicLattice):
        raise ConfigError("sweep base config must use a quasiperiodic lattice")
    if base.m_eval_time is None:
        raise ConfigError("sweep base config must set m_eval_time")
    rows = []
    for kappa in kappas:
        if not 0 < kappa < 1:
            raise ConfigError(f"sweep kappa values must lie in (0, 1), got {kappa}")
        lattice = replace(base.lattice, kappa=float(kappa))
        m_coh = float("nan")
        if with_and_without_noise:
            cfg = replace(base, name=f"{base.name}_k{kappa:g}_coherent",
                          lattice=lattice, gamma_over_j=0.0)
            m_coh = run_scenario(cfg).engines["lindblad"].m_at_eval
        cfg = replace(base, name=f"{base.name}_k{kappa:g}_dephased", lattice=lattice)
        m_deph = run_scenario(cfg).engines["lindblad"].m_at_eval
        rows.append(SweepRow(kappa=float(kappa), m_coherent=m_coh, m_dephased=m_deph))
    return rows


def run_kappa_sweep(config: KappaSweepConfig) -> KappaSweepResult:
    rows = sweep_kappa(config.base_config(), config.kappas, with_and_without_noise=True)
    return KappaSweepResult(name=config.name, rows=rows, config=config)


# --------------------------------------------------------------------------
# Built-in scenarios.
# --------------------------------------------------------------------------

def builtin_scenarios() -> dict:
    """Compiled-in experiment presets, named after the figures they produce."""
    hom7 = HomogeneousLattice(n_sites=7)
    hom41 = HomogeneousLattice(n_sites=41)

    def qp7(kappa):
        return QuasiperiodicLattice(n_sites=7, kappa=kappa)

    entries: dict[str, object] = {
        "fig2_ballistic": ScenarioConfig(
            name="fig2_ballistic", lattice=hom7, gamma_over_j=0.0,
            initial_state=InitialState.site(0), t_max=4.0, fit_window=(0.2, 1.2)),
        "fig2_diffusive": ScenarioConfig(
            name="fig2_diffusive", lattice=hom7, gamma_over_j=30.0,
            initial_state=InitialState.site(0), t_max=30.0, fit_window=(3.0, 15.0)),
        "fig2_ballistic_l41": ScenarioConfig(
            name="fig2_ballistic_l41", lattice=hom41, gamma_over_j=0.0,
            initial_state=InitialState.site(0), t_max=10.0, fit_window=(1.0, 8.0)),
        "fig2_diffusive_l41": ScenarioConfig(
            name="fig2_diffusive_l41", lattice=hom41, gamma_over_j=30.0,
            initial_state=InitialState.site(0), t_max=35.0, fit_window=(5.0, 30.0)),
        "fig3_k03": ScenarioConfig(
            name="fig3_k03", lattice=qp7(0.3), gamma_over_j=0.0,
            initial_state=InitialState.site(0), t_max=6.0, m_eval_time=6.0),
        "fig3_k03_noise": ScenarioConfig(
            name="fig3_k03_noise", lattice=qp7(0.3), gamma_over_j=30.0,
            initial_state=InitialState.site(0), t_max=6.0, m_eval_time=6.0),
        "fig3_k07": ScenarioConfig(
            name="fig3_k07", lattice=qp7(0.7), gamma_over_j=0.0,
            initial_state=InitialState.site(0), t_max=6.0, m_eval_time=6.0),
        "fig3_k07_noise": ScenarioConfig(
            name="fig3_k07_noise", lattice=qp7(0.7), gamma_over_j=30.0,
            initial_state=InitialState.site(0), t_max=6.0, m_eval_time=6.0),
        "fig3b_sweep": KappaSweepConfig(name="fig3b_sweep"),
        "fig4_mpemba": MpembaStudy(
            name="fig4_mpemba",
            base=ScenarioConfig(
                name="fig4_mpemba", lattice=hom7, gamma_over_j=3.0,
                initial_state=InitialState.site(0), t_max=50.0),
            states={
                "rho1": (0,),
                "rho2": (2, 3),
                "rho3": (1, 2, 3),
                "rho4": (0, 1, 2, 3),
            },
            reference="rho1",
        ),
    }
    return entries


BUILTIN_DESCRIPTIONS = {
    "fig2_ballistic": "L=7 homogeneous chain, no dephasing: ballistic spreading (M ~ t)",
    "fig2_diffusive": "L=7 homogeneous chain, gamma/J=30: diffusive spreading (M ~ t^0.5)",
    "fig2_ballistic_l41": "L=41 ballistic exponent fit, boundary-free window Jt in [1, 8]",
    "fig2_diffusive_l41": "L=41 diffusive exponent fit, window Jt in [5, 30]",
    "fig3_k03": "L=7 quasiperiodic couplings kappa=0.3, coherent evolution",
    "fig3_k03_noise": "L=7 quasiperiodic kappa=0.3 with gamma/J=30 dephasing",
    "fig3_k07": "L=7 quasiperiodic couplings kappa=0.7, coherent evolution",
    "fig3_k07_noise": "L=7 quasiperiodic kappa=0.7 with gamma/J=30 dephasing",
    "fig3b_sweep": "L=89 sweep of M(Jt=20) vs kappa, with and without dephasing",
    "fig4_mpemba": "L=7, gamma/J=3: four initial mixtures raced to equilibrium",
}


def apply_overrides(entry, *, seed: int | None = None, engine: str | None = None,
                    n_traj: int | None = None):
    """Return a copy of a built-in entry with CLI-level overrides applied."""

    def patch_config(cfg: ScenarioConfig) -> ScenarioConfig:
        noise = cfg.noise
        if seed is not None:
            noise = replace(noise, base_seed=seed)
        if n_traj is not None:
            noise = replace(noise, n_traj=n_traj)
        out = replace(cfg, noise=noise)
        if engine is not None:
            out = replace(out, engine=engine)
        return out

    if isinstance(entry, ScenarioConfig):
        return patch_config(entry)
    if isinstance(entry, MpembaStudy):
        return replace(entry, base=patch_config(entry.base))
    if isinstance(entry, KappaSweepConfig):
        return entry
    raise ConfigError(f"unknown scenario entry type {type(entry).__name__}")


# --------------------------------------------------------------------------
# Output writers.
# --------------------------------------------------------------------------

def render_series_csv(series: ObservableSeries) -> str:
    n_sites = series.populations.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t"] + [f"n_{m}" for m in range(n_sites)] + ["W", "M", "D"])
    for k in range(series.times.size):
        row = [CSV_FORMAT % series.times[k]]
        row += [CSV_FORMAT % v for v in series.populations[k]]
        row += [CSV_FORMAT % series.second_moment[k],
                CSV_FORMAT % series.integrated_moment[k],
                CSV_FORMAT % series.distance[k]]
        writer.writerow(row)
    return buf.getvalue()


def read_series_csv(path: str | Path) -> dict:
    """Parse a scenario CSV back into arrays (inverse of render_series_csv)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    n_sites = len(header) - 4
    return {
        "times": data[:, 0],
        "populations": data[:, 1:1 + n_sites],
        "W": data[:, 1 + n_sites],
        "M": data[:, 2 + n_sites],
        "D": data[:, 3 + n_sites],
    }


def _plain(value):
    """Recursively convert numpy scalars/arrays for YAML serialization."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def _engine_summary(result: EngineResult) -> dict:
    out: dict = {}
    if result.fit is not None:
        out["fit"] = {"beta": result.fit.beta, "stderr": result.fit.stderr,
                      "n_points": result.fit.n_points}
    if result.m_at_eval is not None:
        out["m_at_eval"] = result.m_at_eval
    out["diagnostics"] = dict(result.diagnostics)
    return out


def report_summary(report: ScenarioReport) -> dict:
    return _plain({
        "config": config_to_dict(report.config),
        "engines": {name: _engine_summary(res) for name, res in report.engines.items()},
    })


class OutputWriter:
    """Collects target paths, refuses collisions unless forced, writes atomically
    enough for our purposes (full content per file)."""

    def __init__(self, outdir: str | Path, force: bool = False):
        self.outdir = Path(outdir)
        self.force = force
        self.written: list[Path] = []

    def _target(self, filename: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        target = self.outdir / filename
        if target.exists() and not self.force:
            raise ConfigError(f"refusing to overwrite existing output {target} (use --force)")
        return target

    def write_text(self, filename: str, content: str) -> Path:
        target = self._target(filename)
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        self.written.append(target)
        return target

    def write_yaml(self, filename: str, data: dict) -> Path:
        return self.write_text(filename, yaml.safe_dump(_plain(data), sort_keys=False))


def _write_engine_outputs(writer: OutputWriter, name: str, result: EngineResult,
                          time_label: str, formats: set[str]) -> None:
    from . import svgplot

    series = result.series
    if "csv" in formats:
        writer.write_text(f"{name}.csv", render_series_csv(series))
    if "svg" in formats:
        writer.write_text(f"{name}.heatmap.svg", svgplot.population_heatmap_svg(
            series.times, series.populations, title=name, xlabel=time_label))
        writer.write_text(f"{name}.m_loglog.svg", svgplot.line_plot_svg(
            series.times, [("M", series.integrated_moment)], time_label, "M",
            title=name, logx=True, logy=True))
        writer.write_text(f"{name}.distance.svg", svgplot.line_plot_svg(
            series.times, [("D", series.distance)], time_label, "D",
            title=name, logy=False))


def time_axis_label(config: ScenarioConfig) -> str:
    return "Jt" if config.time_unit == "inverse_j" else "t (us)"


def write_report(report: ScenarioReport, outdir: str | Path, *, force: bool = False,
                 formats: set[str] | None = None) -> list[Path]:
    formats = formats or {"csv"}
    writer = OutputWriter(outdir, force=force)
    label = time_axis_label(report.config)
    for engine, result in report.engines.items():
        _write_engine_outputs(writer, f"{report.config.name}.{engine}", result, label, formats)
    writer.write_yaml(f"{report.config.name}.summary.yaml", report_summary(report))
    return writer.written


def mpemba_summary(report: MpembaReport) -> dict:
    crossings = {}
    for label, crossing in report.crossings.items():
        crossings[f"{report.study.reference}_vs_{label}"] = {
            "crossed": crossing.crossed,
            "time": crossing.time,
            "sustained": crossing.sustained,
        }
    return _plain({
        "study": report.study.name,
        "reference": report.study.reference,
        "states": {k: list(v) for k, v in report.study.states.items()},
        "base_config": config_to_dict(report.study.base),
        "crossings": crossings,
        "engines": {
            label: {name: _engine_summary(res) for name, res in rep.engines.items()}
            for label, rep in report.reports.items()
        },
    })


def write_mpemba_report(report: MpembaReport, outdir: str | Path, *, force: bool = False,
                        formats: set[str] | None = None) -> list[Path]:
    formats = formats or {"csv"}
    writer = OutputWriter(outdir, force=force)
    label = time_axis_label(report.study.base)
    for state, rep in report.reports.items():
        for engine, result in rep.engines.items():
            _write_engine_outputs(writer, f"{report.study.name}.{state}.{engine}",
                                  result, label, formats)
    if "svg" in formats:
        from . import svgplot

        first = next(iter(report.reports.values()))
        times = first.primary_series().times
        curves = [(state, rep.primary_series().distance)
                  for state, rep in report.reports.items()]
        writer.write_text(f"{report.study.name}.distance.svg", svgplot.line_plot_svg(
            times, curves, label, "D", title=report.study.name))
    writer.write_yaml(f"{report.study.name}.summary.yaml", mpemba_summary(report))
    return writer.written


def render_sweep_csv(result: KappaSweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["kappa", "M_coherent", "M_dephased", "ratio"])
    for row in result.rows:
        writer.writerow([CSV_FORMAT % row.kappa, CSV_FORMAT % row.m_coherent,
                         CSV_FORMAT % row.m_dephased, CSV_FORMAT % row.ratio])
    return buf.getvalue()


def write_sweep_result(result: KappaSweepResult, outdir: str | Path, *,
                       force: bool = False, formats: set[str] | None = None) -> list[Path]:
    formats = formats or {"csv"}
    writer = OutputWriter(outdir, force=force)
    if "csv" in formats:
        writer.write_text(f"{result.name}.csv", render_sweep_csv(result))
    if "svg" in formats:
        from . import svgplot

        kappas = np.array([r.kappa for r in result.rows])
        writer.write_text(f"{result.name}.m_vs_kappa.svg", svgplot.line_plot_svg(
            kappas,
            [("coherent", np.array([r.m_coherent for r in result.rows])),
             ("dephased", np.array([r.m_dephased for r in result.rows]))],
            "kappa", "M", title=result.name, logy=True))
    summary = {
        "sweep": result.name,
        "rows": [{"kappa": r.kappa, "m_coherent": r.m_coherent,
                  "m_dephased": r.m_dephased, "ratio": r.ratio} for r in result.rows],
    }
    if result.config is not None:
        summary["config"] = {
            "n_sites": result.config.n_sites, "kappas": list(result.config.kappas),
            "total_mhz": result.config.total_mhz, "gamma_over_j": result.config.gamma_over_j,
            "t_max": result.config.t_max, "n_snapshots": result.config.n_snapshots,
            "m_eval_time": result.config.m_eval_time, "alpha": result.config.alpha,
            "theta": result.config.theta,
        }
    writer.write_yaml(f"{result.name}.summary.yaml", summary)
    return writer.written
