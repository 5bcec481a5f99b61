"""Hamiltonian definitions for the open spin chains used in reservoir probing.

Four variants are supported, each expanded into a flat list of Pauli-string
terms with signs kept exactly as the models are conventionally written:

    TFIM          H = -J sum Z_i Z_{i+1} + g sum X_i
    ANNNI         H = -J sum Z_i Z_{i+1} - kappa sum Z_i Z_{i+2} + g sum X_i
    Cluster       H = -J_zz sum Z_i Z_{i+1} + J_zxz sum Z_i X_{i+1} Z_{i+2}
    ClusterField  H = sum [-J_zz Z_i Z_{i+1} - h_x X_i + J_zxz Z_i X_{i+1} Z_{i+2}]

Boundaries are open: a term of range r exists only when i + r < n_sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

__all__ = [
    "Variant",
    "PauliTerm",
    "ModelSpec",
    "expand_terms",
    "alpha_parametrization",
    "tfim_terms",
    "annni_terms",
    "cluster_terms",
    "cluster_field_terms",
]


class Variant(str, Enum):
    TFIM = "TFIM"
    ANNNI = "ANNNI"
    CLUSTER = "Cluster"
    CLUSTER_FIELD = "ClusterField"


COUPLING_NAMES: dict[Variant, tuple[str, ...]] = {
    Variant.TFIM: ("J", "g"),
    Variant.ANNNI: ("J", "kappa", "g"),
    Variant.CLUSTER: ("J_zz", "J_zxz"),
    Variant.CLUSTER_FIELD: ("J_zz", "J_zxz", "h_x"),
}

# J is the energy scale; everything else must be given explicitly.
COUPLING_DEFAULTS: dict[Variant, dict[str, float]] = {
    Variant.TFIM: {"J": 1.0},
    Variant.ANNNI: {"J": 1.0},
    Variant.CLUSTER: {"J_zz": 1.0},
    Variant.CLUSTER_FIELD: {},
}


@dataclass(frozen=True)
class PauliTerm:
    """A real coefficient times a product of single-site Pauli operators.

    ``factors`` is a tuple of ``(site, axis)`` with strictly increasing sites
    and ``axis`` one of ``"X"``, ``"Y"``, ``"Z"``.
    """

    coefficient: float
    factors: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not 1 <= len(self.factors) <= 3:
            raise ValueError(f"term must act on 1 to 3 sites, got {len(self.factors)}")
        sites = [s for s, _ in self.factors]
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise ValueError(f"site indices must be strictly increasing: {sites}")
        if sites[0] < 0:
            raise ValueError("negative site index")
        for _, axis in self.factors:
            if axis not in ("X", "Y", "Z"):
                raise ValueError(f"unknown Pauli axis {axis!r}")
        if not math.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    @property
    def max_site(self) -> int:
        return self.factors[-1][0]

    def label(self) -> str:
        return "".join(f"{axis}{site}" for site, axis in self.factors)


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    n_sites: int
    couplings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        variant = Variant(self.variant)
        object.__setattr__(self, "variant", variant)
        merged = dict(COUPLING_DEFAULTS[variant])
        merged.update({k: float(v) for k, v in self.couplings.items()})
        expected = set(COUPLING_NAMES[variant])
        unknown = set(merged) - expected
        missing = expected - set(merged)
        if unknown:
            raise ValueError(f"unknown couplings for {variant.value}: {sorted(unknown)}")
        if missing:
            raise ValueError(f"missing couplings for {variant.value}: {sorted(missing)}")
        for name, value in merged.items():
            if not math.isfinite(value):
                raise ValueError(f"coupling {name} must be finite, got {value}")
        object.__setattr__(self, "couplings", {k: merged[k] for k in COUPLING_NAMES[variant]})
        if self.n_sites < 3:
            raise ValueError(f"n_sites must be >= 3, got {self.n_sites}")
        if self.n_sites % 2 == 0:
            raise ValueError(f"n_sites must be odd so a central site exists, got {self.n_sites}")

    @property
    def center(self) -> int:
        return (self.n_sites - 1) // 2

    def with_coupling(self, **updates: float) -> "ModelSpec":
        couplings = dict(self.couplings)
        couplings.update(updates)
        return ModelSpec(self.variant, self.n_sites, couplings)

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "n_sites": self.n_sites, "couplings": dict(self.couplings)}


# Zero-coefficient families are omitted entirely, so e.g. ANNNI at kappa=0 is
# term-for-term identical to TFIM.

def _bonds(n_sites: int, coefficient: float, r: int) -> list[PauliTerm]:
    if coefficient == 0.0:
        return []
    return [PauliTerm(coefficient, ((i, "Z"), (i + r, "Z"))) for i in range(n_sites - r)]


def _field(n_sites: int, coefficient: float, axis: str = "X") -> list[PauliTerm]:
    if coefficient == 0.0:
        return []
    return [PauliTerm(coefficient, ((i, axis),)) for i in range(n_sites)]


def _zxz(n_sites: int, coefficient: float) -> list[PauliTerm]:
    if coefficient == 0.0:
        return []
    return [PauliTerm(coefficient, ((i, "Z"), (i + 1, "X"), (i + 2, "Z"))) for i in range(n_sites - 2)]


# The builders below accept any chain length >= 2 so the engine can be
# exercised on tiny systems; ModelSpec enforces the odd-length protocol rule.

def tfim_terms(n_sites: int, J: float = 1.0, g: float = 1.0) -> list[PauliTerm]:
    return _bonds(n_sites, -J, 1) + _field(n_sites, g)


def annni_terms(n_sites: int, J: float = 1.0, kappa: float = 0.5, g: float = 1.0) -> list[PauliTerm]:
    return _bonds(n_sites, -J, 1) + _bonds(n_sites, -kappa, 2) + _field(n_sites, g)


def cluster_terms(n_sites: int, J_zz: float = 1.0, J_zxz: float = 1.0) -> list[PauliTerm]:
    return _bonds(n_sites, -J_zz, 1) + _zxz(n_sites, J_zxz)


def cluster_field_terms(n_sites: int, J_zz: float, J_zxz: float, h_x: float) -> list[PauliTerm]:
    return _bonds(n_sites, -J_zz, 1) + _field(n_sites, -h_x) + _zxz(n_sites, J_zxz)


_BUILDERS = {
    Variant.TFIM: tfim_terms,
    Variant.ANNNI: annni_terms,
    Variant.CLUSTER: cluster_terms,
    Variant.CLUSTER_FIELD: cluster_field_terms,
}


def expand_terms(spec: ModelSpec) -> list[PauliTerm]:
    """Return the full Pauli-term list of ``spec``'s Hamiltonian."""
    return _BUILDERS[spec.variant](spec.n_sites, **spec.couplings)


def alpha_parametrization(J_zz: float, alpha: float) -> tuple[float, float]:
    """Map the cluster/field balance ``alpha`` to ``(J_zxz, h_x)``.

    ``J_zxz = (1 - J_zz) * alpha`` and ``h_x = (1 - J_zz) * (1 - alpha)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    scale = 1.0 - J_zz
    return scale * alpha, scale * (1.0 - alpha)
