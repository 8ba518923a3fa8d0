import numpy as np
import pytest
import yaml

from dephasim.errors import ConfigError
from dephasim.experiments import (ExplicitLattice, HomogeneousLattice, InitialState,
                                  KappaSweepConfig, MpembaStudy, NoiseConfig,
                                  QuasiperiodicLattice, ScenarioConfig, apply_overrides,
                                  build_lattice_spec, builtin_scenarios, config_from_dict,
                                  config_to_dict, load_config, mhz_to_angular,
                                  read_series_csv, reference_coupling_mhz, render_series_csv,
                                  run_kappa_sweep, run_mpemba, run_scenario, save_config,
                                  sweep_kappa, write_mpemba_report, write_report,
                                  write_sweep_result)
from dephasim.observables import fit_spreading_exponent


def small_config(**overrides):
    base = dict(
        name="small",
        lattice=HomogeneousLattice(n_sites=5, coupling_mhz=8.3),
        gamma_over_j=2.0,
        initial_state=InitialState.site(0),
        t_max=4.0,
        n_snapshots=41,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


class TestConfigValidation:
    def test_gamma_nonnegative(self):
        with pytest.raises(ConfigError, match="gamma_over_j"):
            small_config(gamma_over_j=-1.0)

    def test_initial_site_range(self):
        with pytest.raises(ConfigError, match="centered range"):
            small_config(initial_state=InitialState.site(3))
        with pytest.raises(ConfigError, match="centered range"):
            small_config(initial_state=InitialState.site(-3))
        small_config(initial_state=InitialState.site(2))
        small_config(initial_state=InitialState.site(-2))

    def test_engine_and_unit(self):
        with pytest.raises(ConfigError, match="engine"):
            small_config(engine="qutip")
        with pytest.raises(ConfigError, match="time_unit"):
            small_config(time_unit="seconds")

    def test_fit_window(self):
        with pytest.raises(ConfigError, match="fit_window"):
            small_config(fit_window=(3.0, 1.0))
        with pytest.raises(ConfigError, match="fit_window"):
            small_config(fit_window=(1.0, 9.0))

    def test_m_eval_time(self):
        with pytest.raises(ConfigError, match="m_eval_time"):
            small_config(m_eval_time=5.0)

    def test_noise_fields(self):
        with pytest.raises(ConfigError, match="dt_factor"):
            NoiseConfig(dt_factor=0.2)
        with pytest.raises(ConfigError, match="n_traj"):
            NoiseConfig(n_traj=0)

    def test_duplicate_initial_sites(self):
        with pytest.raises(ConfigError, match="distinct"):
            InitialState(sites=(1, 1))

    def test_internal_site_mapping(self):
        cfg = small_config(
            lattice=HomogeneousLattice(n_sites=7),
            initial_state=InitialState(sites=(2, 3)),
        )
        assert cfg.internal_sites == (5, 6)


class TestUnits:
    def test_reference_coupling(self):
        assert reference_coupling_mhz(HomogeneousLattice(5, 8.3)) == 8.3
        assert reference_coupling_mhz(QuasiperiodicLattice(5, 0.3, total_mhz=8.3)) == 8.3
        assert reference_coupling_mhz(
            ExplicitLattice((0.0, 0.0, 0.0), (2.0, -5.0))) == 5.0

    def test_mhz_conversion(self):
        cfg = small_config(gamma_over_j=30.0)
        spec = build_lattice_spec(cfg)
        j = 2.0 * np.pi * 8.3
        assert np.allclose(spec.couplings, j)
        assert np.allclose(spec.dephasing_rates, 30.0 * j)
        assert mhz_to_angular(1.0) == pytest.approx(2.0 * np.pi)

    def test_quasiperiodic_split(self):
        cfg = small_config(lattice=QuasiperiodicLattice(n_sites=7, kappa=0.3, total_mhz=8.3),
                           initial_state=InitialState.site(0))
        spec = build_lattice_spec(cfg)
        j = 2.0 * np.pi * 8.3
        assert spec.couplings.max() == pytest.approx(j, rel=1e-12)  # cos=1 at center bond


class TestSerialization:
    @pytest.mark.parametrize("config", [
        small_config(),
        small_config(lattice=QuasiperiodicLattice(n_sites=7, kappa=0.7, total_mhz=8.3),
                     engine="both", fit_window=(0.5, 3.0), m_eval_time=4.0,
                     noise=NoiseConfig(dt_factor=0.02, n_traj=64, base_seed=9)),
        small_config(lattice=ExplicitLattice((0.0, 1.0, -1.0), (8.3, 4.0)),
                     initial_state=InitialState(sites=(-1, 0)), time_unit="us"),
    ])
    def test_round_trip_identity(self, config):
        once = config_from_dict(config_to_dict(config))
        assert once == config
        twice = config_from_dict(config_to_dict(once))
        assert twice == once

    def test_yaml_file_round_trip(self, tmp_path):
        cfg = small_config(fit_window=(0.5, 3.5))
        path = tmp_path / "scenario.yaml"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_missing_fields_named(self):
        with pytest.raises(ConfigError, match="lattice"):
            config_from_dict({"name": "x"})
        with pytest.raises(ConfigError, match="gamma_over_j"):
            config_from_dict({"name": "x", "lattice": {"sites": 3, "coupling_mhz": 1.0},
                              "initial_state": {"site": 0}, "t_max": 1.0})

    def test_exactly_one_lattice_description(self):
        with pytest.raises(ConfigError, match="exactly one"):
            config_from_dict({
                "name": "x",
                "lattice": {"sites": 3, "coupling_mhz": 1.0,
                            "quasiperiodic": {"kappa": 0.3}},
                "gamma_over_j": 0.0, "initial_state": {"site": 0}, "t_max": 1.0,
            })

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")


class TestRunScenario:
    def test_deterministic_lindblad(self):
        cfg = small_config()
        a = run_scenario(cfg).engines["lindblad"].series
        b = run_scenario(cfg).engines["lindblad"].series
        assert np.array_equal(a.populations, b.populations)
        assert np.max(np.abs(a.populations.sum(axis=1) - 1.0)) <= 1e-9

    def test_both_engines(self):
        cfg = small_config(engine="both", noise=NoiseConfig(n_traj=200, base_seed=3))
        report = run_scenario(cfg)
        assert set(report.engines) == {"lindblad", "trajectories"}
        traj = report.engines["trajectories"]
        assert traj.stderr is not None
        gap = np.max(np.abs(traj.series.populations
                            - report.engines["lindblad"].series.populations))
        assert gap <= 0.12

    def test_initial_mixture_population(self):
        cfg = small_config(lattice=HomogeneousLattice(n_sites=7),
                           initial_state=InitialState(sites=(2, 3)))
        report = run_scenario(cfg)
        start = report.engines["lindblad"].series.populations[0]
        assert np.allclose(start, [0, 0, 0, 0, 0, 0.5, 0.5], atol=1e-12)

    def test_fit_and_m_eval(self):
        cfg = small_config(
            lattice=HomogeneousLattice(n_sites=41),
            gamma_over_j=0.0,
            t_max=8.0, n_snapshots=161,
            fit_window=(1.0, 6.0), m_eval_time=8.0,
        )
        report = run_scenario(cfg)
        res = report.engines["lindblad"]
        assert res.fit.beta == pytest.approx(1.0, abs=0.05)
        assert res.m_at_eval == pytest.approx(8.0 / np.sqrt(2.0), rel=0.02)
        assert res.diagnostics["m_eval_time_used"] == pytest.approx(8.0)

    def test_scenario_name_attached_to_failures(self):
        # An unreachable fit window surfaces with the scenario name attached.
        cfg = small_config(name="doomed", gamma_over_j=0.0, fit_window=(0.1, 0.2))
        with pytest.raises(Exception) as excinfo:
            run_scenario(cfg)
        assert "doomed" in "".join(getattr(excinfo.value, "__notes__", []))


class TestBuiltins:
    def test_catalog_complete(self):
        entries = builtin_scenarios()
        for name in ("fig2_ballistic", "fig2_diffusive", "fig3_k03", "fig3_k03_noise",
                     "fig3_k07", "fig3_k07_noise", "fig3b_sweep", "fig4_mpemba"):
            assert name in entries

    def test_ballistic_preset_exponent(self):
        report = run_scenario(builtin_scenarios()["fig2_ballistic"])
        assert report.engines["lindblad"].fit.beta == pytest.approx(1.0, abs=0.05)

    def test_overrides(self):
        entry = builtin_scenarios()["fig2_ballistic"]
        patched = apply_overrides(entry, seed=99, engine="both", n_traj=50)
        assert patched.noise.base_seed == 99
        assert patched.noise.n_traj == 50
        assert patched.engine == "both"
        study = apply_overrides(builtin_scenarios()["fig4_mpemba"], seed=7)
        assert study.base.noise.base_seed == 7


class TestSweep:
    def test_small_sweep(self):
        base = ScenarioConfig(
            name="mini_sweep",
            lattice=QuasiperiodicLattice(n_sites=7, kappa=0.3, total_mhz=8.3),
            gamma_over_j=30.0,
            initial_state=InitialState.site(0),
            t_max=6.0, n_snapshots=61, m_eval_time=6.0,
        )
        rows = sweep_kappa(base, (0.3, 0.7))
        assert [r.kappa for r in rows] == [0.3, 0.7]
        for row in rows:
            assert row.m_coherent > row.m_dephased > 0
            assert row.ratio > 1.0
        # localization strengthens with the modulation ratio
        assert rows[1].m_dephased < rows[0].m_dephased

    def test_dephased_only(self):
        base = ScenarioConfig(
            name="mini_sweep",
            lattice=QuasiperiodicLattice(n_sites=5, kappa=0.3, total_mhz=8.3),
            gamma_over_j=10.0,
            initial_state=InitialState.site(0),
            t_max=3.0, n_snapshots=31, m_eval_time=3.0,
        )
        rows = sweep_kappa(base, (0.5,), with_and_without_noise=False)
        assert np.isnan(rows[0].m_coherent)
        assert rows[0].m_dephased > 0

    def test_kappa_domain(self):
        base = builtin_scenarios()["fig3b_sweep"].base_config()
        with pytest.raises(ConfigError, match="kappa"):
            sweep_kappa(base, (1.5,))

    def test_requires_quasiperiodic_base(self):
        with pytest.raises(ConfigError, match="quasiperiodic"):
            sweep_kappa(small_config(m_eval_time=4.0), (0.3,))

    def test_requires_eval_time(self):
        base = builtin_scenarios()["fig3b_sweep"].base_config()
        from dataclasses import replace
        with pytest.raises(ConfigError, match="m_eval_time"):
            sweep_kappa(replace(base, m_eval_time=None), (0.3,))


class TestMpemba:
    @pytest.fixture(scope="class")
    def small_study(self):
        base = ScenarioConfig(
            name="mini_mpemba",
            lattice=HomogeneousLattice(n_sites=7),
            gamma_over_j=3.0,
            initial_state=InitialState.site(0),
            t_max=20.0, n_snapshots=81,
        )
        return MpembaStudy(name="mini_mpemba", base=base,
                           states={"rho1": (0,), "rho4": (0, 1, 2, 3)},
                           reference="rho1")

    def test_crossing_detected(self, small_study):
        report = run_mpemba(small_study)
        assert set(report.reports) == {"rho1", "rho4"}
        crossing = report.crossings["rho4"]
        assert crossing.crossed and crossing.sustained
        d0 = report.reports["rho1"].primary_series().distance[0]
        assert d0 == pytest.approx(np.log(7.0), abs=1e-9)

    def test_reference_must_exist(self, small_study):
        with pytest.raises(ConfigError, match="reference"):
            MpembaStudy(name="bad", base=small_study.base, states={"a": (0,)},
                        reference="b")


class TestOutputs:
    def test_csv_schema_and_round_trip(self):
        cfg = small_config()
        report = run_scenario(cfg)
        text = render_series_csv(report.engines["lindblad"].series)
        lines = text.strip().split("\r\n")
        assert lines[0] == "t,n_0,n_1,n_2,n_3,n_4,W,M,D"
        assert len(lines) == 1 + cfg.n_snapshots

    def test_write_and_read_back(self, tmp_path):
        cfg = small_config(fit_window=(1.0, 4.0))
        report = run_scenario(cfg)
        written = write_report(report, tmp_path)
        names = {p.name for p in written}
        assert names == {"small.lindblad.csv", "small.summary.yaml"}
        data = read_series_csv(tmp_path / "small.lindblad.csv")
        series = report.engines["lindblad"].series
        assert np.allclose(data["populations"], series.populations, atol=1e-11)
        assert np.allclose(data["M"], series.integrated_moment, atol=1e-11)

        # every summary number is recomputable from the CSV columns
        summary = yaml.safe_load((tmp_path / "small.summary.yaml").read_text())
        refit = fit_spreading_exponent(data["times"], data["M"], cfg.fit_window)
        assert summary["engines"]["lindblad"]["fit"]["beta"] == pytest.approx(
            refit.beta, rel=1e-9)

    def test_refuses_overwrite_without_force(self, tmp_path):
        cfg = small_config()
        report = run_scenario(cfg)
        write_report(report, tmp_path)
        with pytest.raises(ConfigError, match="overwrite"):
            write_report(report, tmp_path)
        write_report(report, tmp_path, force=True)

    def test_byte_identical_rerun(self, tmp_path):
        cfg = small_config(engine="both", noise=NoiseConfig(n_traj=60, base_seed=4))
        first = write_report(run_scenario(cfg), tmp_path / "a")
        second = write_report(run_scenario(cfg), tmp_path / "b")
        for pa, pb in zip(sorted(first), sorted(second)):
            if pa.suffix == ".csv":
                assert pa.read_bytes() == pb.read_bytes()

    def test_svg_outputs(self, tmp_path):
        cfg = small_config()
        report = run_scenario(cfg)
        written = write_report(report, tmp_path, formats={"csv", "svg"})
        svgs = [p for p in written if p.suffix == ".svg"]
        assert len(svgs) == 3
        for p in svgs:
            content = p.read_text()
            assert content.startswith("<svg")
            assert content.rstrip().endswith("</svg>")

    def test_mpemba_outputs(self, tmp_path):
        base = ScenarioConfig(
            name="mini_mpemba", lattice=HomogeneousLattice(n_sites=5),
            gamma_over_j=3.0, initial_state=InitialState.site(0),
            t_max=8.0, n_snapshots=33)
        study = MpembaStudy(name="mini_mpemba", base=base,
                            states={"rho1": (0,), "rho2": (1, 2)}, reference="rho1")
        report = run_mpemba(study)
        written = write_mpemba_report(report, tmp_path, formats={"csv", "svg"})
        names = {p.name for p in written}
        assert "mini_mpemba.rho1.lindblad.csv" in names
        assert "mini_mpemba.summary.yaml" in names
        assert "mini_mpemba.distance.svg" in names
        summary = yaml.safe_load((tmp_path / "mini_mpemba.summary.yaml").read_text())
        assert "rho1_vs_rho2" in summary["crossings"]

    def test_sweep_outputs(self, tmp_path):
        config = KappaSweepConfig(name="mini", n_sites=5, kappas=(0.3, 0.6),
                                  gamma_over_j=10.0, t_max=3.0, n_snapshots=31,
                                  m_eval_time=3.0)
        result = run_kappa_sweep(config)
        written = write_sweep_result(result, tmp_path, formats={"csv", "svg"})
        names = {p.name for p in written}
        assert names == {"mini.csv", "mini.summary.yaml", "mini.m_vs_kappa.svg"}
        lines = (tmp_path / "mini.csv").read_text().strip().split("\r\n")
        assert lines[0] == "kappa,M_coherent,M_dephased,ratio"
        assert len(lines) == 3
