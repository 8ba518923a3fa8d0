"""Command-line entry point.

Subcommands: run a built-in or config-file scenario, run the modulation
sweep, execute the quick invariant suite, regenerate plots from an existing
CSV, and list built-in scenarios.

Exit codes: 0 success, 1 configuration/usage errors (message names the
offending field or file), 2 numerical failures (message carries the scenario
and time). The default output directory is taken from the DEPHASIM_OUTDIR
environment variable when set, otherwise ./results.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import (DataQualityError, DephasimError, FitDomainError,
                     IntegrationFailureError, SpecificationError)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse parser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _default_outdir() -> str:
    return os.environ.get("DEPHASIM_OUTDIR", "results")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=_default_outdir(),
                   help="output directory (default: $DEPHASIM_OUTDIR or ./results)")
    p.add_argument("--force", action="store_true",
                   help="overwrite existing output files")
    p.add_argument("--format", choices=("csv", "svg", "both"), default="csv",
                   help="which artifacts to emit (default: csv)")


def build_parser() -> _Parser:
    parser = _Parser(prog="dephasim",
                     description="Dephasing-assisted diffusive dynamics in 1D qubit chains")
    parser.add_argument("-v", "--verbose", action="store_true", help="chatty progress output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a built-in scenario or a YAML config file")
    run.add_argument("scenario", help="built-in name (see list-scenarios) or config path")
    run.add_argument("--seed", type=int, default=None, help="override the trajectory base seed")
    run.add_argument("--engine", choices=experiments.ENGINES, default=None,
                     help="override the configured engine")
    run.add_argument("--ntraj", type=int, default=None,
                     help="override the trajectory ensemble size")
    _add_output_args(run)

    sweep = sub.add_parser("sweep", help="modulation-ratio sweep of the integrated moment")
    sweep.add_argument("--kappas", default=None,
                       help="comma-separated ratios in (0,1), default 0.1,0.3,0.5,0.7,0.9")
    sweep.add_argument("--sites", type=int, default=89, help="chain length (default 89)")
    sweep.add_argument("--gamma-over-j", type=float, default=30.0,
                       help="dephasing rate over total coupling (default 30)")
    sweep.add_argument("--eval-time", type=float, default=20.0,
                       help="Jt at which M is recorded (default 20)")
    _add_output_args(sweep)

    validate = sub.add_parser("validate", help="run the quick invariant suite")
    validate.add_argument("--quick", action="store_true",
                          help="smaller trajectory ensemble (coarser tolerance)")

    plot = sub.add_parser("plot", help="render SVG plots from an existing scenario CSV")
    plot.add_argument("csv", help="path to a <scenario>.<engine>.csv file")
    plot.add_argument("--out", default=None,
                      help="output directory (default: alongside the CSV)")
    plot.add_argument("--force", action="store_true", help="overwrite existing plots")

    sub.add_parser("list-scenarios", help="list built-in scenarios")
    return parser


def _formats(name: str) -> set[str]:
    return {"csv", "svg"} if name == "both" else {name}


def _cmd_run(args) -> int:
    builtins = experiments.builtin_scenarios()
    if args.scenario in builtins:
        entry = experiments.apply_overrides(
            builtins[args.scenario], seed=args.seed, engine=args.engine, n_traj=args.ntraj)
    else:
        path = Path(args.scenario)
        if not path.exists():
            print(f"error: no built-in scenario or config file named {args.scenario!r}",
                  file=sys.stderr)
            return EXIT_CONFIG
        entry = experiments.apply_overrides(
            experiments.load_config(path), seed=args.seed, engine=args.engine,
            n_traj=args.ntraj)

    formats = _formats(args.format)
    if isinstance(entry, experiments.ScenarioConfig):
        report = experiments.run_scenario(entry)
        written = experiments.write_report(report, args.out, force=args.force, formats=formats)
    elif isinstance(entry, experiments.MpembaStudy):
        report = experiments.run_mpemba(entry)
        written = experiments.write_mpemba_report(report, args.out, force=args.force,
                                                  formats=formats)
    else:
        result = experiments.run_kappa_sweep(entry)
        written = experiments.write_sweep_result(result, args.out, force=args.force,
                                                 formats=formats)
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    kappas = (0.1, 0.3, 0.5, 0.7, 0.9)
    if args.kappas:
        try:
            kappas = tuple(float(x) for x in args.kappas.split(","))
        except ValueError:
            print(f"error: --kappas must be comma-separated numbers, got {args.kappas!r}",
                  file=sys.stderr)
            return EXIT_CONFIG
    config = experiments.KappaSweepConfig(
        name="kappa_sweep", n_sites=args.sites, kappas=kappas,
        gamma_over_j=args.gamma_over_j, t_max=args.eval_time,
        m_eval_time=args.eval_time)
    result = experiments.run_kappa_sweep(config)
    written = experiments.write_sweep_result(result, args.out, force=args.force,
                                             formats=_formats(args.format))
    for row in result.rows:
        print(f"kappa={row.kappa:g}  M_coherent={row.m_coherent:.6g}  "
              f"M_dephased={row.m_dephased:.6g}  ratio={row.ratio:.4g}")
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .lattice import LatticeSpec
    from .lindblad import DensityMatrix, evolve
    from .trajectories import (NoiseSpec, max_refresh_interval, run_ensemble,
                               sample_noise_step)

    checks: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str) -> None:
        checks.append((name, bool(ok), detail))

    # Coherent two-site oscillation against the closed form.
    spec = LatticeSpec.homogeneous(2, 1.0)
    t = np.linspace(0.0, 20.0, 201)
    pops = evolve(DensityMatrix.pure_site(2, 0), spec, t).populations
    err = float(np.max(np.abs(pops[:, 1] - np.sin(t) ** 2)))
    check("two_site_oscillation", err <= 1e-8, f"max err {err:.2e} (tol 1e-8)")

    # Strong dephasing against the two-level rate equation, hop rate 2J^2/G.
    spec = LatticeSpec.homogeneous(2, 1.0, dephasing_rate=30.0)
    t = np.linspace(0.0, 10.0, 201)
    pops = evolve(DensityMatrix.pure_site(2, 0), spec, t).populations
    rate = 2.0 * 1.0 / 30.0
    target = 0.5 * (1.0 + np.exp(-2.0 * rate * t))
    err = float(np.max(np.abs(pops[:, 0] - target)))
    check("strong_dephasing_rate_equation", err <= 1e-2, f"max err {err:.2e} (tol 1e-2)")

    # Snapshot invariants on a stiff run.
    spec = LatticeSpec.homogeneous(7, 1.0, dephasing_rate=30.0)
    t = np.linspace(0.0, 10.0, 101)
    result = evolve(DensityMatrix.pure_site(7, 3), spec, t)
    s = result.stats
    ok = (s.max_snapshot_trace_dev <= 1e-9 and s.max_hermiticity_drift <= 1e-10
          and s.min_eigenvalue >= -1e-8)
    check("snapshot_invariants", ok,
          f"trace {s.max_snapshot_trace_dev:.1e} herm {s.max_hermiticity_drift:.1e} "
          f"min_eig {s.min_eigenvalue:.1e}")

    # Noiseless unraveling reduces to the deterministic engine.
    spec = LatticeSpec.homogeneous(7, 1.0)
    t = np.linspace(0.0, 8.0, 81)
    ref = evolve(DensityMatrix.pure_site(7, 3), spec, t).populations
    psi0 = np.zeros(7, dtype=complex)
    psi0[3] = 1.0
    noise = NoiseSpec(gamma=0.0, dt=max_refresh_interval(spec, 0.0), n_traj=1, base_seed=1)
    ens = run_ensemble(psi0, spec, noise, t)
    err = float(np.max(np.abs(ens.mean_populations - ref)))
    check("noiseless_trajectory_limit", err <= 1e-8, f"max gap {err:.2e} (tol 1e-8)")

    # Finite-ensemble agreement between the two engines.
    n_traj = 400 if args.quick else 1500
    tol = 0.08 if args.quick else 0.05
    gamma = 3.0
    spec = LatticeSpec.homogeneous(7, 1.0, dephasing_rate=gamma)
    t = np.linspace(0.0, 10.0, 51)
    ref = evolve(DensityMatrix.pure_site(7, 3), spec, t).populations
    noise = NoiseSpec(gamma=gamma, dt=max_refresh_interval(spec, gamma),
                      n_traj=n_traj, base_seed=7)
    ens = run_ensemble(psi0, spec, noise, t)
    err = float(np.max(np.abs(ens.mean_populations - ref)))
    check("trajectory_vs_lindblad", err <= tol,
          f"sup gap {err:.3f} at n_traj={n_traj} (tol {tol})")

    # Noise sampler statistics.
    rng = np.random.Generator(np.random.Philox(key=2))
    draws = sample_noise_step(4.0, 0.01, 1_000_000, rng)
    var_rel = abs(float(np.var(draws)) / (4.0 / 0.01) - 1.0)
    pair = np.array([sample_noise_step(4.0, 0.01, 2, rng) for _ in range(50_000)])
    corr = abs(float(np.corrcoef(pair.T)[0, 1]))
    ok = var_rel <= 0.01 and corr <= 3.0 / np.sqrt(pair.shape[0])
    check("noise_sampler_statistics", ok,
          f"variance rel err {var_rel:.4f}, cross-corr {corr:.4f}")

    width = max(len(name) for name, _, _ in checks)
    failures = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{status}  {name:<{width}}  {detail}")
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def _cmd_plot(args) -> int:
    from . import svgplot

    csv_path = Path(args.csv)
    if not csv_path.exists():
        print(f"error: CSV file not found: {csv_path}", file=sys.stderr)
        return EXIT_CONFIG
    data = experiments.read_series_csv(csv_path)
    outdir = Path(args.out) if args.out else csv_path.parent
    stem = csv_path.stem
    writer = experiments.OutputWriter(outdir, force=args.force)
    writer.write_text(f"{stem}.heatmap.svg", svgplot.population_heatmap_svg(
        data["times"], data["populations"], title=stem, xlabel="t"))
    writer.write_text(f"{stem}.m_loglog.svg", svgplot.line_plot_svg(
        data["times"], [("M", data["M"])], "t", "M", title=stem, logx=True, logy=True))
    writer.write_text(f"{stem}.distance.svg", svgplot.line_plot_svg(
        data["times"], [("D", data["D"])], "t", "D", title=stem))
    for path in writer.written:
        print(path)
    return EXIT_OK


def _cmd_list() -> int:
    names = experiments.builtin_scenarios().keys()
    width = max(len(n) for n in names)
    for name in names:
        print(f"{name:<{width}}  {experiments.BUILTIN_DESCRIPTIONS.get(name, '')}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "plot":
            return _cmd_plot(args)
        if args.command == "list-scenarios":
            return _cmd_list()
        parser.error(f"unknown command {args.command!r}")
    except (IntegrationFailureError, FitDomainError, DataQualityError) as exc:
        notes = "; ".join(getattr(exc, "__notes__", []))
        suffix = f" ({notes})" if notes else ""
        print(f"numerical failure: {exc}{suffix}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SpecificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DephasimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
