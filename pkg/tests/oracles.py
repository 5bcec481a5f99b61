"""Dense reference implementations used as independent oracles.

Everything here is built the slow, obvious way: Kronecker products of 2x2
Pauli matrices (site N-1 leftmost, so site i is bit i of the index), scipy's
dense matrix exponential, full diagonalization, and explicit reduced density
matrices.
"""

import numpy as np
from scipy.linalg import expm

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(n_sites, factors):
    """Dense matrix of a product of single-site Paulis, ``factors = [(site, axis), ...]``."""
    axes = ["I"] * n_sites
    for site, axis in factors:
        axes[site] = axis
    out = np.ones((1, 1), dtype=complex)
    for site in reversed(range(n_sites)):
        out = np.kron(out, PAULI[axes[site]])
    return out


def dense_hamiltonian(terms, n_sites):
    h = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    for term in terms:
        h += term.coefficient * pauli_string(n_sites, term.factors)
    return h


def dense_evolve(terms, psi, n_sites, t):
    return expm(-1j * t * dense_hamiltonian(terms, n_sites)) @ psi


def random_state(n_sites, rng):
    v = rng.standard_normal(2**n_sites) + 1j * rng.standard_normal(2**n_sites)
    return v / np.linalg.norm(v)


def dense_expectation(psi, n_sites, site, axis):
    return np.vdot(psi, pauli_string(n_sites, [(site, axis)]) @ psi).real


def rho_left(psi, n_sites, cut):
    """Reduced density matrix of sites 0..cut-1, by explicit partial trace."""
    # index = high * 2**cut + low, with low holding sites 0..cut-1
    m = psi.reshape(2 ** (n_sites - cut), 2**cut)
    rho = np.zeros((2**cut, 2**cut), dtype=complex)
    for high in range(m.shape[0]):
        rho += np.outer(m[high], m[high].conj())
    return rho


def von_neumann(rho):
    p = np.linalg.eigvalsh(rho)
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def normal_equations(x, s):
    """Least-squares line through (x, s) from the 2x2 normal equations."""
    n = len(x)
    a = np.array([[np.dot(x, x), x.sum()], [x.sum(), n]])
    b = np.array([np.dot(x, s), s.sum()])
    return np.linalg.solve(a, b)


def pearson_squared(y, s):
    return float(np.corrcoef(y, s)[0, 1] ** 2)
