"""Single-excitation tight-binding chains with optional quasiperiodic couplings.

A chain of L qubits restricted to the one-excitation sector is an L-dimensional
problem: basis state ``|1_m>`` has the excitation on site m. The Hamiltonian is
real symmetric tridiagonal, with on-site detunings on the diagonal and
nearest-neighbour coupling strengths on the off-diagonals (open boundaries).

Site indexing is 0-based internally. Where a symmetric, centered picture is
more natural (quasiperiodic coupling patterns, spreading moments), sites map to
centered indices ``j = m - (L-1)//2`` so the middle site of an odd chain is
``j = 0``.

All rates and frequencies are angular (rad / unit time). Interfaces that accept
plain MHz multiply by 2*pi at the boundary; see :mod:`dephasim.experiments`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecificationError

# Default incommensurate modulation frequency, (sqrt(5)-1)/2, kept at full
# double precision; no rational approximation is applied.
GOLDEN_MEAN = (np.sqrt(5.0) - 1.0) / 2.0


def center_index(n_sites: int) -> int:
    """Internal index of the chain center (middle site for odd length)."""
    return (n_sites - 1) // 2


def centered_positions(n_sites: int) -> np.ndarray:
    """Centered site coordinates j = m - (L-1)//2 for m = 0..L-1."""
    return np.arange(n_sites) - center_index(n_sites)


@dataclass
class LatticeSpec:
    """Physical description of one chain.

    detunings: L on-site angular frequencies (rad/time).
    couplings: L-1 bond strengths (rad/time); entry m couples sites m and m+1.
    dephasing_rates: L nonnegative pure-dephasing rates (1/time).
    """

    detunings: np.ndarray
    couplings: np.ndarray
    dephasing_rates: np.ndarray

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.couplings = np.asarray(self.couplings, dtype=float)
        self.dephasing_rates = np.asarray(self.dephasing_rates, dtype=float)
        n = self.detunings.size
        if n < 2:
            raise SpecificationError(f"need at least 2 sites, got {n}")
        if self.couplings.size != n - 1:
            raise SpecificationError(
                f"couplings must have length L-1={n - 1}, got {self.couplings.size}"
            )
        if self.dephasing_rates.size != n:
            raise SpecificationError(
                f"dephasing_rates must have length L={n}, got {self.dephasing_rates.size}"
            )
        if np.any(self.dephasing_rates < 0):
            raise SpecificationError("dephasing_rates must be nonnegative")
        for name in ("detunings", "couplings", "dephasing_rates"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise SpecificationError(f"{name} contains non-finite values")

    @property
    def n_sites(self) -> int:
        return self.detunings.size

    @classmethod
    def homogeneous(cls, n_sites: int, coupling: float, dephasing_rate: float = 0.0,
                    detuning: float = 0.0) -> "LatticeSpec":
        """Uniform chain: g_m = coupling, all detunings and rates equal."""
        return cls(
            detunings=np.full(n_sites, float(detuning)),
            couplings=np.full(n_sites - 1, float(coupling)),
            dephasing_rates=np.full(n_sites, float(dephasing_rate)),
        )

    def hamiltonian_inf_norm(self) -> float:
        """Max row sum of |H|; used to bound stable integrator steps."""
        pad_l = np.concatenate(([0.0], np.abs(self.couplings)))
        pad_r = np.concatenate((np.abs(self.couplings), [0.0]))
        return float(np.max(np.abs(self.detunings) + pad_l + pad_r))


@dataclass
class QuasiperiodicSpec:
    """Parameters of the cosine-modulated coupling pattern.

    Bond with centered index j gets strength ``a + b*cos(2*pi*alpha*j + theta)``.
    With kappa = b/a < 1 every generated coupling is strictly positive and all
    chain eigenstates remain spatially extended.
    """

    n_sites: int
    a: float
    b: float
    alpha: float = field(default=GOLDEN_MEAN)
    theta: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise SpecificationError(f"need at least 2 sites, got {self.n_sites}")
        if not self.a > 0:
            raise SpecificationError(f"mean coupling a must be positive, got {self.a}")
        if self.b < 0:
            raise SpecificationError(f"modulation b must be nonnegative, got {self.b}")

    @property
    def kappa(self) -> float:
        return self.b / self.a

    @classmethod
    def from_kappa(cls, n_sites: int, kappa: float, total: float,
                   alpha: float = GOLDEN_MEAN, theta: float = 0.0) -> "QuasiperiodicSpec":
        """Split a total strength a + b = total at modulation ratio kappa = b/a."""
        if kappa < 0:
            raise SpecificationError(f"kappa must be nonnegative, got {kappa}")
        if not total > 0:
            raise SpecificationError(f"total coupling must be positive, got {total}")
        a = total / (1.0 + kappa)
        return cls(n_sites=n_sites, a=a, b=kappa * a, alpha=alpha, theta=theta)


def quasiperiodic_couplings(qspec: QuasiperiodicSpec) -> np.ndarray:
    """Couplings for the L-1 bonds of a chain, modulated quasiperiodically.

    The bond between internal sites (m-1, m) is evaluated at the centered index
    of its right-hand site, j = m - (L-1)//2, which keeps the pattern centered
    on the middle of the chain.
    """
    m = np.arange(1, qspec.n_sites)
    j = m - center_index(qspec.n_sites)
    return qspec.a + qspec.b * np.cos(2.0 * np.pi * qspec.alpha * j + qspec.theta)


def lattice_from_quasiperiodic(qspec: QuasiperiodicSpec, dephasing_rate: float = 0.0,
                               detunings: np.ndarray | None = None) -> LatticeSpec:
    """Build a LatticeSpec with quasiperiodic couplings and uniform dephasing."""
    n = qspec.n_sites
    return LatticeSpec(
        detunings=np.zeros(n) if detunings is None else detunings,
        couplings=quasiperiodic_couplings(qspec),
        dephasing_rates=np.full(n, float(dephasing_rate)),
    )


def build_hamiltonian(spec: LatticeSpec) -> np.ndarray:
    """Dense L x L single-excitation Hamiltonian (real symmetric tridiagonal).

    H[m, m] = detuning of site m; H[m, m-1] = H[m-1, m] = coupling of bond
    (m-1, m). Open boundary conditions: no wraparound term.
    """
    h = np.diag(spec.detunings.astype(float))
    h += np.diag(spec.couplings, 1) + np.diag(spec.couplings, -1)
    return h


def inverse_participation_ratio(vectors: np.ndarray) -> np.ndarray:
    """IPR sum_x |v_x|^4 per column of a matrix of normalized vectors.

    Near 1/L for spatially extended states, near 1 for localized ones.
    """
    return np.sum(np.abs(vectors) ** 4, axis=0)


@dataclass
class SpectralReport:
    """Full diagonalization summary: ascending eigenvalues, orthonormal
    eigenvector columns, and one IPR value per eigenstate."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ipr: np.ndarray


def spectral_report(hamiltonian: np.ndarray, symmetry_tol: float = 1e-12) -> SpectralReport:
    """Diagonalize a symmetric Hamiltonian and report per-state IPR values."""
    h = np.asarray(hamiltonian, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise SpecificationError(f"hamiltonian must be square, got shape {h.shape}")
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.T)) > symmetry_tol * scale:
        raise SpecificationError("hamiltonian is not symmetric")
    eigenvalues, eigenvectors = np.linalg.eigh(h)
    return SpectralReport(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        ipr=inverse_participation_ratio(eigenvectors),
    )
