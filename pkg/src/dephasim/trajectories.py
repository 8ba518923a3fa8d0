"""Stochastic unraveling of dephasing as white-noise frequency modulation.

Each trajectory is a pure state evolving under the chain Hamiltonian with an
extra random diagonal: site m picks up a frequency offset xi_m(t), drawn
independently per site as a zero-mean Gaussian that is refreshed every dt and
held constant in between. Choosing the variance as gamma/dt makes the
integrated phase variance over any interval equal gamma * interval, so the
ensemble average reproduces the element-wise dephasing of the density-matrix
engine in the dt -> 0 limit; the refresh cap dt <= 0.05 / max(||H||_inf, gamma)
bounds the discretization bias.

Within one refresh interval the Hamiltonian is constant, so each interval is
advanced by the exactly unitary symmetric splitting

    exp(-i xi dt/2) exp(-i H dt) exp(-i xi dt/2),

with exp(-i H dt) precomputed from one eigendecomposition. The splitting error
is O(dt^3) per interval, far below the O(dt) discretization bias of the noise
itself, and unitarity keeps per-trajectory norm drift at roundoff level, which
an explicit Runge-Kutta substep scheme could not guarantee at these step
counts.

Trajectory i of an ensemble owns a counter-based generator keyed by
base_seed + i, so results are reproducible bit for bit regardless of how
trajectories are batched; ensemble accumulation runs in fixed chunk order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrationFailureError, SpecificationError
from .lattice import LatticeSpec, build_hamiltonian

# Refresh cap: dt <= REFRESH_SAFETY / max(||H||_inf, gamma).
REFRESH_SAFETY = 0.05

# Trajectories propagated per batch. Fixed so that the floating-point
# reduction order, and hence the ensemble mean, is bit-reproducible.
_TRAJ_CHUNK = 4096

# Refresh steps of noise drawn per generator call (memory/overhead tradeoff;
# does not affect the per-trajectory stream).
_NOISE_BLOCK = 512

NORM_DRIFT_LIMIT = 1e-6


@dataclass
class NoiseSpec:
    """White-noise statistics plus ensemble bookkeeping.

    gamma: target effective dephasing rate (1/time).
    dt: noise refresh interval (time); capped at run time against the lattice.
    n_traj: ensemble size.
    base_seed: nonnegative seed; trajectory i uses base_seed + i.
    """

    gamma: float
    dt: float
    n_traj: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise SpecificationError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.dt > 0:
            raise SpecificationError(f"dt must be positive, got {self.dt}")
        if self.n_traj < 1:
            raise SpecificationError(f"n_traj must be at least 1, got {self.n_traj}")
        if self.base_seed < 0:
            raise SpecificationError("base_seed must be nonnegative")


@dataclass
class TrajectoryEnsemble:
    """Ensemble-averaged populations with per-bin standard errors."""

    times: np.ndarray
    mean_populations: np.ndarray
    stderr: np.ndarray
    n_traj: int


def max_refresh_interval(spec: LatticeSpec, gamma: float) -> float:
    """Largest admissible noise refresh interval for this lattice and rate."""
    scale = max(spec.hamiltonian_inf_norm(), gamma)
    return REFRESH_SAFETY / scale if scale > 0 else np.inf


def sample_noise_step(gamma: float, dt: float, n_sites: int,
                      rng: np.random.Generator) -> np.ndarray:
    """One refresh of site frequency offsets: iid N(0, gamma/dt) per site.

    Held piecewise-constant over the refresh interval by the caller. gamma=0
    returns exact zeros without consuming random numbers.
    """
    if gamma < 0:
        raise SpecificationError(f"gamma must be nonnegative, got {gamma}")
    if not dt > 0:
        raise SpecificationError(f"dt must be positive, got {dt}")
    if gamma == 0:
        return np.zeros(n_sites)
    return rng.standard_normal(n_sites) * np.sqrt(gamma / dt)


def _validated_times(t_grid) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise SpecificationError("t_grid must be a non-empty 1D sequence")
    if abs(times[0]) > 0:
        raise SpecificationError(f"t_grid must start at 0, got {times[0]}")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise SpecificationError("t_grid must be strictly increasing")
    return times


def _segment_plan(spec: LatticeSpec, times: np.ndarray, dt_max: float):
    """Split each snapshot interval into equal refresh steps and precompute
    the coherent propagator (transposed, for row-vector batches) per step size."""
    evals, vecs = np.linalg.eigh(build_hamiltonian(spec))
    cache: dict[float, np.ndarray] = {}
    plan = []
    for k in range(1, times.size):
        span = times[k] - times[k - 1]
        n_sub = max(1, int(np.ceil(span / dt_max - 1e-12))) if np.isfinite(dt_max) else 1
        dt = span / n_sub
        ut = cache.get(dt)
        if ut is None:
            u = (vecs * np.exp(-1j * evals * dt)) @ vecs.conj().T
            ut = np.ascontiguousarray(u.T)
            cache[dt] = ut
        plan.append((n_sub, dt, ut))
    return plan


def _propagate_chunk(psi: np.ndarray, gens: list, plan, gamma: float,
                     on_snapshot: Callable[[int, np.ndarray], None]) -> None:
    """Advance a (C, L) batch of trajectories through the whole plan.

    Trajectory i draws all of its noise from gens[i] in segment order, in
    blocks of at most _NOISE_BLOCK refresh steps, so its stream does not
    depend on how trajectories were grouped into chunks.
    """
    n_sites = psi.shape[1]
    for k, (n_sub, dt, ut) in enumerate(plan, start=1):
        if gamma > 0:
            coeff = -0.5j * dt * np.sqrt(gamma / dt)
            done = 0
            while done < n_sub:
                nblk = min(_NOISE_BLOCK, n_sub - done)
                block = np.empty((len(gens), nblk, n_sites))
                for i, gen in enumerate(gens):
                    block[i] = gen.standard_normal((nblk, n_sites))
                for s in range(nblk):
                    phase = np.exp(coeff * block[:, s, :])
                    psi = (phase * psi) @ ut
                    psi *= phase
                done += nblk
        else:
            for _ in range(n_sub):
                psi = psi @ ut
        on_snapshot(k, psi)


def evolve_trajectory(psi0: np.ndarray, spec: LatticeSpec, noise: NoiseSpec,
                      t_grid, seed: int) -> np.ndarray:
    """Populations |psi_m(t)|^2 of a single noise realization.

    Deterministic given (seed, spec, noise, t_grid); identical to trajectory
    i of run_ensemble when seed = base_seed + i.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim != 1 or psi0.size != spec.n_sites:
        raise SpecificationError(f"psi0 must be a length-{spec.n_sites} vector")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-9:
        raise SpecificationError(f"psi0 must be normalized, got |psi0|={norm:.12g}")
    if seed < 0:
        raise SpecificationError("seed must be nonnegative")
    times = _validated_times(t_grid)
    _check_refresh(spec, noise)
    plan = _segment_plan(spec, times, noise.dt)

    pops = np.empty((times.size, spec.n_sites))
    psi = psi0[None, :].copy()
    pops[0] = np.abs(psi[0]) ** 2
    gen = np.random.Generator(np.random.Philox(key=seed))

    def record(k, psi):
        pops[k] = np.abs(psi[0]) ** 2

    _propagate_chunk(psi, [gen], plan, noise.gamma, record)
    drift = np.max(np.abs(pops.sum(axis=1) - 1.0))
    if drift > NORM_DRIFT_LIMIT:
        k = int(np.argmax(np.abs(pops.sum(axis=1) - 1.0)))
        raise IntegrationFailureError(f"norm drift {drift:.3e}", time=float(times[k]))
    return pops


def _check_refresh(spec: LatticeSpec, noise: NoiseSpec) -> None:
    cap = max_refresh_interval(spec, noise.gamma)
    if noise.dt > cap * (1.0 + 1e-12):
        raise SpecificationError(
            f"noise refresh dt={noise.dt:.6g} exceeds cap {cap:.6g} "
            f"(need dt <= {REFRESH_SAFETY}/max(|H|_inf, gamma))"
        )


def run_ensemble(initial: np.ndarray | Sequence[int], spec: LatticeSpec, noise: NoiseSpec,
                 t_grid, *, branch_exact: bool = False) -> TrajectoryEnsemble:
    """Average noise.n_traj trajectories started from a pure or mixed state.

    initial is either a normalized state vector, or a sequence of site
    indices denoting a uniform mixture of localized starts; in the latter
    case each trajectory samples its start site from its own generator
    (before any noise draws). With branch_exact=True the mixture is instead
    expanded exactly: every site runs its own n_traj sub-ensemble and the
    branch means are combined with uniform weights (testing aid for small
    chains; n_traj in the result counts all accumulated trajectories).

    Means are accumulated in fixed chunk order, so repeated calls with the
    same inputs are bit-identical.
    """
    times = _validated_times(t_grid)
    _check_refresh(spec, noise)
    n = spec.n_sites

    pure = isinstance(initial, np.ndarray) and initial.ndim == 1 and np.issubdtype(
        initial.dtype, np.inexact
    )
    if pure:
        psi0 = np.asarray(initial, dtype=complex)
        if psi0.size != n:
            raise SpecificationError(f"initial state must have length {n}")
        if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
            raise SpecificationError("initial state must be normalized")
        sites = None
    else:
        sites = [int(s) for s in np.asarray(initial).ravel()]
        if not sites:
            raise SpecificationError("initial site mixture is empty")
        for s in sites:
            if not 0 <= s < n:
                raise SpecificationError(f"initial site {s} outside 0..{n - 1}")
        psi0 = None

    if branch_exact and sites is not None:
        return _run_branch_exact(sites, spec, noise, times)

    plan = _segment_plan(spec, times, noise.dt)
    sum1 = np.zeros((times.size, n))
    sum2 = np.zeros((times.size, n))
    max_norm_dev = 0.0

    for start in range(0, noise.n_traj, _TRAJ_CHUNK):
        count = min(_TRAJ_CHUNK, noise.n_traj - start)
        gens = [
            np.random.Generator(np.random.Philox(key=noise.base_seed + start + i))
            for i in range(count)
        ]
        psi = np.empty((count, n), dtype=complex)
        if psi0 is not None:
            psi[:] = psi0
        else:
            psi[:] = 0.0
            picks = np.array([sites[g.integers(len(sites))] for g in gens])
            psi[np.arange(count), picks] = 1.0

        pops = np.abs(psi) ** 2
        sum1[0] += pops.sum(axis=0)
        sum2[0] += np.square(pops).sum(axis=0)
        chunk_dev = [0.0]

        def record(k, psi):
            pops = np.abs(psi) ** 2
            sum1[k] += pops.sum(axis=0)
            sum2[k] += np.square(pops).sum(axis=0)
            dev = np.max(np.abs(pops.sum(axis=1) - 1.0))
            if dev > chunk_dev[0]:
                chunk_dev[0] = float(dev)

        _propagate_chunk(psi, gens, plan, noise.gamma, record)
        max_norm_dev = max(max_norm_dev, chunk_dev[0])

    if max_norm_dev > NORM_DRIFT_LIMIT:
        raise IntegrationFailureError(f"trajectory norm drift {max_norm_dev:.3e}")

    mean = sum1 / noise.n_traj
    if noise.n_traj > 1:
        var = (sum2 - sum1 ** 2 / noise.n_traj) / (noise.n_traj - 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / noise.n_traj)
    else:
        stderr = np.zeros_like(mean)
    return TrajectoryEnsemble(times=times, mean_populations=mean, stderr=stderr,
                              n_traj=noise.n_traj)


def _run_branch_exact(sites: list[int], spec: LatticeSpec, noise: NoiseSpec,
                      times: np.ndarray) -> TrajectoryEnsemble:
    n = spec.n_sites
    n_branches = len(sites)
    mean = np.zeros((times.size, n))
    var_of_mean = np.zeros((times.size, n))
    for b, site in enumerate(sites):
        psi0 = np.zeros(n, dtype=complex)
        psi0[site] = 1.0
        branch_noise = NoiseSpec(gamma=noise.gamma, dt=noise.dt, n_traj=noise.n_traj,
                                 base_seed=noise.base_seed + b * noise.n_traj)
        branch = run_ensemble(psi0, spec, branch_noise, times)
        mean += branch.mean_populations
        var_of_mean += branch.stderr ** 2
    mean /= n_branches
    stderr = np.sqrt(var_of_mean) / n_branches
    return TrajectoryEnsemble(times=times, mean_populations=mean, stderr=stderr,
                              n_traj=n_branches * noise.n_traj)
