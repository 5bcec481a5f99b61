"""Single-site Pauli expectations along quench trajectories, plus entanglement entropy."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import EngineParams, PauliOperator, n_sites_of, propagate
from .models import ModelSpec, expand_terms
from .quench import (
    QuenchConfig,
    background_state,
    build_initial_state,
    encoding_basis,
    input_weights,
    product_state,
)

logger = logging.getLogger(__name__)

__all__ = [
    "ObservableGrid",
    "EntropySeries",
    "PropagationError",
    "pauli_expectation",
    "site_matrix_elements",
    "entanglement_entropy",
    "record_trajectory",
    "entropy_series",
]

AXES = ("X", "Y", "Z")


class PropagationError(RuntimeError):
    """Engine failure while evolving a specific instance."""

    def __init__(self, instance, cause: Exception):
        super().__init__(f"propagation failed for instance {instance}: {cause}")
        self.instance = instance


@dataclass
class ObservableGrid:
    """``values[k, i, m]`` is ``<O_i(times[m])>`` for instance ``k``."""

    values: np.ndarray
    times: np.ndarray
    axis: str
    meta: dict = field(default_factory=dict)

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]

    @property
    def dt_record(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


@dataclass
class EntropySeries:
    times: np.ndarray
    values: np.ndarray
    cut: int
    units: str = "nats"


def site_matrix_elements(bra: np.ndarray, ket: np.ndarray, axis: str) -> np.ndarray:
    """``<bra| sigma^axis_i |ket>`` for every site ``i``, as a complex array."""
    n = n_sites_of(ket)
    if bra.shape != ket.shape:
        raise ValueError("bra and ket dimensions differ")
    out = np.empty(n, dtype=complex)
    for i in range(n):
        # rows: spin of site i; columns: all other bits
        b = bra.reshape(-1, 2, 1 << i).transpose(1, 0, 2).reshape(2, -1)
        k = ket.reshape(-1, 2, 1 << i).transpose(1, 0, 2).reshape(2, -1)
        m = b.conj() @ k.T
        if axis == "X":
            out[i] = m[0, 1] + m[1, 0]
        elif axis == "Y":
            out[i] = -1j * m[0, 1] + 1j * m[1, 0]
        elif axis == "Z":
            out[i] = m[0, 0] - m[1, 1]
        else:
            raise ValueError(f"unknown axis {axis!r}")
    return out


def _site_expectations(psi: np.ndarray, axis: str) -> np.ndarray:
    vals = site_matrix_elements(psi, psi, axis)
    resid = np.max(np.abs(vals.imag))
    if resid > 1e-10:
        raise ArithmeticError(f"expectation has imaginary residual {resid:.2e}")
    return vals.real


def pauli_expectation(psi: np.ndarray, site: int, axis: str) -> float:
    n = n_sites_of(psi)
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} sites")
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    # single-site version of site_matrix_elements
    t = psi.reshape(-1, 2, 1 << site)
    up, down = t[:, 0, :], t[:, 1, :]
    if axis == "Z":
        val = complex(np.vdot(up, up) - np.vdot(down, down))
    elif axis == "X":
        val = np.vdot(up, down) + np.vdot(down, up)
    else:
        val = -1j * np.vdot(up, down) + 1j * np.vdot(down, up)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"expectation has imaginary residual {abs(val.imag):.2e}")
    return float(val.real)


def entanglement_entropy(psi: np.ndarray, cut: int) -> float:
    """Von Neumann entropy (nats) of sites ``0 .. cut-1`` against the rest."""
    n = n_sites_of(psi)
    if not 1 <= cut <= n - 1:
        raise ValueError(f"cut must lie in [1, {n - 1}], got {cut}")
    matrix = psi.reshape(1 << (n - cut), 1 << cut).T
    sv = np.linalg.svd(matrix, compute_uv=False)
    p = sv**2
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log(p))))


def _record_schedule(engine: EngineParams, dt_record: float, t_max: float) -> tuple[int, int, np.ndarray]:
    every = engine.steps_for(dt_record)
    if every == 0:
        raise ValueError("dt_record must be positive")
    n_steps = engine.steps_for(t_max)
    if n_steps % every:
        raise ValueError(f"t_max={t_max} is not a multiple of dt_record={dt_record}")
    n_records = n_steps // every + 1
    times = np.arange(n_records) * dt_record
    return n_steps, every, times


def _pair_trajectory(op, bra_state, ket_state, engine, n_steps, every, axis, sites):
    """Matrix elements AA, BB, AB over time for two simultaneously evolved states."""
    out = np.empty((3, len(sites), n_steps // every + 1), dtype=complex)
    stream_a = propagate(op, bra_state, engine, n_steps, every)
    stream_b = propagate(op, ket_state, engine, n_steps, every)
    for m, ((_, a), (_, b)) in enumerate(zip(stream_a, stream_b)):
        out[0, :, m] = site_matrix_elements(a, a, axis)[sites]
        out[1, :, m] = site_matrix_elements(b, b, axis)[sites]
        out[2, :, m] = site_matrix_elements(a, b, axis)[sites]
    return out


def record_trajectory(
    s_values,
    model: ModelSpec,
    quench: QuenchConfig,
    engine: EngineParams,
    axis: str = "X",
    dt_record: float = 0.05,
    t_max: float | None = None,
    sites=None,
    *,
    method: str = "superposition",
    workers: int = 1,
) -> ObservableGrid:
    """Evolve every input instance and record single-site expectations.

    ``method="superposition"`` evolves only the two encoding states (the
    central spin in each basis state) and reconstructs every instance
    exactly from linearity: with ``psi_k = a_k A + b_k B``,
    ``<O> = a^2 <A|O|A> + b^2 <B|O|B> + 2 a b Re<A|O|B>``.
    ``method="direct"`` evolves each instance on its own, distributing
    instances over ``workers`` threads.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    t_max = engine.t_max if t_max is None else t_max
    s_values = np.asarray(s_values, dtype=float)
    a_k, b_k = input_weights(s_values)
    n = model.n_sites
    engine.check_size(n)
    sites = np.arange(n) if sites is None else np.asarray(sites, dtype=int)
    n_steps, every, times = _record_schedule(engine, dt_record, t_max)
    op = PauliOperator(expand_terms(model), n)

    if method == "superposition":
        center = model.center
        bg = background_state(quench.background)
        pair = []
        for local in encoding_basis(quench.encoding):
            spins = [bg] * n
            spins[center] = local
            pair.append(product_state(spins))
        try:
            elems = _pair_trajectory(op, pair[0], pair[1], engine, n_steps, every, axis, sites)
        except Exception as exc:
            raise PropagationError("encoding basis pair", exc) from exc
        aa, bb, ab = elems[0].real, elems[1].real, elems[2].real
        values = (
            (a_k**2)[:, None, None] * aa
            + (b_k**2)[:, None, None] * bb
            + (2 * a_k * b_k)[:, None, None] * ab
        )
    elif method == "direct":
        values = np.empty((len(s_values), len(sites), len(times)))

        def run(k):
            psi = build_initial_state(float(s_values[k]), n, quench)
            try:
                for step, state in propagate(op, psi, engine, n_steps, every):
                    values[k, :, step // every] = _site_expectations(state, axis)[sites]
            except Exception as exc:
                raise PropagationError(k, exc) from exc

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, range(len(s_values))))
        else:
            for k in range(len(s_values)):
                run(k)
    else:
        raise ValueError(f"unknown method {method!r}")

    meta = {
        "model": model.to_dict(),
        "quench": quench.to_dict(),
        "engine": {"dt": engine.dt, "krylov_dim": engine.krylov_dim, "krylov_tol": engine.krylov_tol},
        "method": method,
        "dt_record": dt_record,
        "t_max": t_max,
        "sites": sites.tolist(),
    }
    return ObservableGrid(values=values, times=times, axis=axis, meta=meta)


def entropy_series(
    model: ModelSpec,
    quench: QuenchConfig,
    engine: EngineParams,
    s: float = 0.5,
    dt_record: float = 0.05,
    t_max: float | None = None,
    cut: int | None = None,
) -> EntropySeries:
    """Entanglement entropy over time for the single instance with input ``s``.

    ``cut`` defaults to the half-chain bond ``n_sites // 2``.
    """
    t_max = engine.t_max if t_max is None else t_max
    n = model.n_sites
    cut = n // 2 if cut is None else cut
    n_steps, every, times = _record_schedule(engine, dt_record, t_max)
    op = PauliOperator(expand_terms(model), n)
    psi = build_initial_state(s, n, quench)
    values = np.array([entanglement_entropy(state, cut) for _, state in propagate(op, psi, engine, n_steps, every)])
    return EntropySeries(times=times, values=values, cut=cut)
