"""Independent reference solutions used to pin expected values in tests.

These deliberately avoid the code paths they check: the superoperator route
builds the full L^2 x L^2 generator and exponentiates it densely (viable for
L <= 8), and the closed forms are textbook two-level results.
"""

import numpy as np
from scipy.linalg import expm


def superoperator(hamiltonian: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Dense generator acting on row-major vec(rho).

    vec(A rho B) = (A kron B^T) vec(rho); the dephasing collapse operators
    are the on-site projectors scaled by sqrt(rate).
    """
    h = np.asarray(hamiltonian, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for m, rate in enumerate(np.asarray(rates, dtype=float)):
        p = np.zeros((n, n))
        p[m, m] = 1.0
        sup += rate * (np.kron(p, p) - 0.5 * (np.kron(p, eye) + np.kron(eye, p)))
    return sup


def superoperator_dissipator(rates: np.ndarray) -> np.ndarray:
    n = len(rates)
    return superoperator(np.zeros((n, n)), rates)


def propagate_superoperator(rho0: np.ndarray, hamiltonian: np.ndarray,
                            rates: np.ndarray, t: float) -> np.ndarray:
    """exp(S t) applied to vec(rho0), reshaped back to a matrix."""
    n = rho0.shape[0]
    sup = superoperator(hamiltonian, rates)
    return (expm(sup * t) @ np.asarray(rho0, dtype=complex).ravel()).reshape(n, n)


def rabi_site1_population(times: np.ndarray, coupling: float) -> np.ndarray:
    """Two-site coherent transfer from site 0: n_1(t) = sin^2(g t)."""
    return np.sin(coupling * np.asarray(times)) ** 2


def rate_equation_site0_population(times: np.ndarray, coupling: float,
                                   gamma: float) -> np.ndarray:
    """Two-level classical hopping at rate R = 2 g^2 / gamma from site 0.

    Adiabatic elimination of the coherence in the strong-dephasing limit
    gives dn0/dt = R (n1 - n0), hence n0 = (1 + exp(-2 R t)) / 2.
    """
    rate = 2.0 * coupling ** 2 / gamma
    return 0.5 * (1.0 + np.exp(-2.0 * rate * np.asarray(times)))


def exact_piecewise_propagation(psi0: np.ndarray, hamiltonian: np.ndarray,
                                offsets: np.ndarray, dt: float) -> np.ndarray:
    """Exactly propagate through a sequence of frozen diagonal offsets.

    offsets has shape (n_steps, L); step k applies exp(-i (H + diag(xi_k)) dt)
    via a fresh eigendecomposition. Returns the final state.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    h = np.asarray(hamiltonian, dtype=float)
    for xi in np.asarray(offsets, dtype=float):
        evals, vecs = np.linalg.eigh(h + np.diag(xi))
        psi = vecs @ (np.exp(-1j * evals * dt) * (vecs.conj().T @ psi))
    return psi
