"""Exact state-vector dynamics for spin-1/2 chains.

States are plain 1-D complex numpy arrays of length ``2**n_sites``. Site ``i``
is bit ``i`` of the amplitude index; bit value 0 is spin up (Z = +1) and 1 is
spin down.

Hamiltonians are applied matrix-free. A term list is compiled once into a
:class:`PauliOperator`, which groups terms by their bit-flip mask so that
``H|psi>`` costs one strided pass over the state per distinct mask.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .models import PauliTerm

logger = logging.getLogger(__name__)

__all__ = [
    "EngineParams",
    "PauliOperator",
    "KrylovConvergenceError",
    "LanczosBreakdownError",
    "SizeLimitError",
    "apply_hamiltonian",
    "evolve",
    "propagate",
    "ground_state",
    "n_sites_of",
    "basis_state",
]

NORM_TOL = 1e-10


class KrylovConvergenceError(RuntimeError):
    """The Krylov propagator could not reach its tolerance within the subspace cap."""


class LanczosBreakdownError(RuntimeError):
    """Ground-state Lanczos failed after exhausting its restarts."""


class SizeLimitError(ValueError):
    """Requested chain exceeds the configured state-vector size cap."""


@dataclass(frozen=True)
class EngineParams:
    dt: float = 0.005
    krylov_dim: int = 20
    krylov_tol: float = 1e-12
    t_max: float = 5.0
    max_sites: int = 22

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.dt > self.t_max:
            raise ValueError(f"dt={self.dt} exceeds t_max={self.t_max}")
        if self.krylov_dim < 2:
            raise ValueError(f"krylov_dim must be >= 2, got {self.krylov_dim}")
        if not self.krylov_tol > 0:
            raise ValueError("krylov_tol must be positive")

    def check_size(self, n_sites: int) -> None:
        if n_sites > self.max_sites:
            raise SizeLimitError(
                f"n_sites={n_sites} exceeds the state-vector cap of {self.max_sites}; "
                "raise max_sites explicitly if the memory is available"
            )

    def steps_for(self, t: float) -> int:
        """Number of whole ``dt`` steps making up ``t``; rejects non-multiples."""
        if t < 0:
            raise ValueError(f"negative evolution time {t}")
        steps = round(t / self.dt)
        if abs(steps * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not an integer multiple of dt={self.dt}")
        return steps


def n_sites_of(psi: np.ndarray) -> int:
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    if psi.ndim != 1 or dim != 1 << n or n < 1:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def basis_state(bits: Sequence[int]) -> np.ndarray:
    """Computational basis state; ``bits[i]`` is the spin of site ``i`` (0 = up)."""
    index = sum(int(b) << i for i, b in enumerate(bits))
    psi = np.zeros(1 << len(bits), dtype=complex)
    psi[index] = 1.0
    return psi


class PauliOperator:
    """A real linear combination of Pauli strings, compiled for fast matvecs.

    For a term with flip mask ``m`` (bits carrying X or Y) and sign mask ``z``
    (bits carrying Z or Y), ``P|k> = i**n_y (-1)**popcount(k & z) |k ^ m>``.
    Terms sharing ``m`` are folded into one coefficient vector ``c_m`` so that
    ``(H psi)[j] = sum_m c_m[j] psi[j ^ m]``.
    """

    def __init__(self, terms: Iterable[PauliTerm], n_sites: int):
        terms = list(terms)
        for term in terms:
            if term.max_site >= n_sites:
                raise ValueError(
                    f"term {term.label()} touches site {term.max_site} but the state has {n_sites} sites"
                )
        self.n_sites = n_sites
        self.terms = tuple(terms)
        self.dim = 1 << n_sites
        self._shape = (2,) * n_sites

        idx = np.arange(self.dim, dtype=np.int64)
        grouped: dict[int, np.ndarray] = {}
        for term in terms:
            flip = 0
            sign_bits = []
            n_y = 0
            for site, axis in term.factors:
                if axis in ("X", "Y"):
                    flip |= 1 << site
                if axis in ("Z", "Y"):
                    sign_bits.append(site)
                n_y += axis == "Y"
            source = idx ^ flip
            parity = np.zeros(self.dim, dtype=np.int64)
            for site in sign_bits:
                parity ^= (source >> site) & 1
            phase = (1j) ** n_y * term.coefficient
            contribution = phase * (1 - 2 * parity)
            if flip in grouped:
                grouped[flip] = grouped[flip] + contribution
            else:
                grouped[flip] = contribution.astype(complex)

        self._diag = None
        self._flips: list[tuple[tuple[int, ...], object]] = []
        for flip in sorted(grouped):
            coeff = _compact(grouped[flip])
            if flip == 0:
                self._diag = coeff
                continue
            # tensor axis a holds bit n_sites - 1 - a
            axes = tuple(self.n_sites - 1 - b for b in range(self.n_sites) if flip >> b & 1)
            if isinstance(coeff, np.ndarray):
                coeff = coeff.reshape(self._shape)
            self._flips.append((axes, coeff))

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        if psi.shape != (self.dim,):
            raise ValueError(f"state has shape {psi.shape}, operator expects ({self.dim},)")
        if self._diag is None:
            out = np.zeros(self.dim, dtype=complex)
        else:
            out = np.asarray(self._diag * psi, dtype=complex)
        tensor = psi.reshape(self._shape)
        for axes, coeff in self._flips:
            out += (coeff * np.flip(tensor, axes)).reshape(-1)
        return out

    __matmul__ = matvec

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.matvec(psi)).real)

    def negated(self) -> "PauliOperator":
        return PauliOperator(
            [PauliTerm(-t.coefficient, t.factors) for t in self.terms], self.n_sites
        )


def _compact(values: np.ndarray):
    """Shrink a coefficient vector to a scalar or real array when possible."""
    if np.all(values.imag == 0):
        values = values.real
    if np.all(values == values[0]):
        return values[0].item()
    return np.ascontiguousarray(values)


OperatorLike = Union[PauliOperator, Sequence[PauliTerm]]


def _as_operator(terms: OperatorLike, n_sites: int) -> PauliOperator:
    if isinstance(terms, PauliOperator):
        if terms.n_sites != n_sites:
            raise ValueError(f"operator acts on {terms.n_sites} sites, state has {n_sites}")
        return terms
    return PauliOperator(terms, n_sites)


def apply_hamiltonian(terms: OperatorLike, psi: np.ndarray) -> np.ndarray:
    """Return ``H|psi>`` (unnormalized). ``psi`` is left untouched."""
    return _as_operator(terms, n_sites_of(psi)).matvec(psi)


def _krylov_step(op: PauliOperator, psi: np.ndarray, dt: float, m_max: int, tol: float) -> np.ndarray:
    """One Lanczos approximation of ``exp(-i H dt) psi``.

    The subspace grows until the a-posteriori error estimate
    ``beta_m * |e_m^T exp(-i dt T_m) e_1|`` drops below ``tol``.
    """
    beta0 = np.linalg.norm(psi)
    m_max = min(m_max, op.dim)
    basis = np.empty((m_max, op.dim), dtype=complex)
    basis[0] = psi / beta0
    alphas: list[float] = []
    betas: list[float] = []
    for j in range(m_max):
        w = op.matvec(basis[j])
        alpha = np.vdot(basis[j], w).real
        w -= alpha * basis[j]
        if j > 0:
            w -= betas[-1] * basis[j - 1]
        # full reorthogonalization; cheap at these subspace sizes
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        alphas.append(alpha)
        beta = np.linalg.norm(w)

        evals, evecs = _tridiag_eigh(alphas, betas)
        coeffs = evecs @ (np.exp(-1j * dt * evals) * evecs[0])
        happy = beta <= 1e-14 * max(1.0, abs(alpha))
        if happy or beta * abs(coeffs[-1]) < tol:
            return beta0 * (coeffs @ basis[: j + 1])
        if j + 1 < m_max:
            basis[j + 1] = w / beta
            betas.append(beta)
    raise KrylovConvergenceError(
        f"Krylov step did not converge: residual estimate {beta * abs(coeffs[-1]):.3e} "
        f"> tol {tol:.1e} at subspace dimension {m_max}"
    )


def _tridiag_eigh(alphas: list[float], betas: list[float]):
    k = len(alphas)
    T = np.diag(alphas)
    if k > 1:
        off = np.asarray(betas[: k - 1])
        T += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigh(T)


def propagate(
    terms: OperatorLike,
    psi: np.ndarray,
    params: EngineParams,
    n_steps: int,
    every: int = 1,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(step, state)`` at step 0 and every ``every`` steps up to ``n_steps``.

    Each step is a Krylov propagation over ``params.dt`` followed by
    renormalization. Yielded arrays are fresh; callers may keep them.
    """
    n = n_sites_of(psi)
    params.check_size(n)
    op = _as_operator(terms, n)
    state = np.array(psi, dtype=complex)
    yield 0, state.copy()
    for step in range(1, n_steps + 1):
        state = _krylov_step(op, state, params.dt, params.krylov_dim, params.krylov_tol)
        state /= np.linalg.norm(state)
        if step % every == 0:
            yield step, state.copy()


def evolve(terms: OperatorLike, psi: np.ndarray, params: EngineParams, t: float) -> np.ndarray:
    """Approximate ``exp(-i H t)|psi>`` with fixed ``params.dt`` Krylov steps."""
    n_steps = params.steps_for(t)
    if n_steps == 0:
        return np.array(psi, dtype=complex)
    state = psi
    for _, state in propagate(terms, psi, params, n_steps, every=n_steps):
        pass
    return state


def ground_state(
    terms: OperatorLike,
    n_sites: int,
    params: EngineParams = EngineParams(),
    *,
    tol: float = 1e-10,
    subspace: int | None = None,
    max_cycles: int = 500,
    max_restarts: int = 5,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair by explicitly restarted Lanczos with full reorthogonalization.

    Each cycle builds a Krylov basis of up to ``subspace`` vectors (default
    ``max(params.krylov_dim, 40)``) from the current Ritz vector. Converged
    when ``||H v - E v|| <= tol * max(1, |E|)``. A breakdown that does not
    yield a converged pair restarts from a fresh random vector, at most
    ``max_restarts`` times.
    """
    params.check_size(n_sites)
    op = _as_operator(terms, n_sites)
    dim = op.dim
    m_max = min(subspace or max(params.krylov_dim, 40), dim)
    rng = np.random.Generator(np.random.Philox(seed))

    def random_vector():
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    v = random_vector()
    restarts = 0
    energy = math.nan
    for _ in range(max_cycles):
        basis = np.empty((m_max, dim), dtype=complex)
        basis[0] = v
        alphas: list[float] = []
        betas: list[float] = []
        broke_down = False
        for j in range(m_max):
            w = op.matvec(basis[j])
            alpha = np.vdot(basis[j], w).real
            alphas.append(alpha)
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta = np.linalg.norm(w)
            if j + 1 == m_max:
                break
            if beta <= 1e-12 * max(1.0, abs(alpha)):
                broke_down = True
                break
            basis[j + 1] = w / beta
            betas.append(beta)
        evals, evecs = _tridiag_eigh(alphas, betas)
        energy = float(evals[0])
        v = evecs[:, 0] @ basis[: len(alphas)]
        v /= np.linalg.norm(v)
        residual = np.linalg.norm(op.matvec(v) - energy * v)
        if residual <= tol * max(1.0, abs(energy)):
            return energy, v
        if broke_down:
            restarts += 1
            logger.warning("Lanczos breakdown without convergence; restart %d", restarts)
            if restarts > max_restarts:
                raise LanczosBreakdownError(f"Lanczos broke down {restarts} times without converging")
            v = random_vector()
    raise LanczosBreakdownError(
        f"Lanczos did not converge within {max_cycles} cycles (last energy {energy:.12g})"
    )
