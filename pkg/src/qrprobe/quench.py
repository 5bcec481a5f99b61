"""Input-parametrized initial product states for the local quench.

Instance ``k`` starts from the product state in which every site carries the
background spin state except the central one, which is rotated according to
a scalar input ``s_k`` drawn uniformly from [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Background",
    "Encoding",
    "QuenchConfig",
    "InputBatch",
    "PRNG_NAME",
    "sample_inputs",
    "local_state",
    "encoding_basis",
    "input_weights",
    "background_state",
    "product_state",
    "build_initial_state",
]

PRNG_NAME = "numpy.random.Philox-4x64"

SQRT_HALF = np.sqrt(0.5)


class Background(str, Enum):
    ALL_UP = "ALL_UP"
    ALL_PLUS_Y = "ALL_PLUS_Y"


class Encoding(str, Enum):
    X_BASIS = "X_BASIS"
    Y_BASIS = "Y_BASIS"


_ALLOWED = {(Background.ALL_UP, Encoding.X_BASIS), (Background.ALL_PLUS_Y, Encoding.Y_BASIS)}


@dataclass(frozen=True)
class QuenchConfig:
    background: Background = Background.ALL_UP
    encoding: Encoding = Encoding.X_BASIS

    def __post_init__(self):
        object.__setattr__(self, "background", Background(self.background))
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        if (self.background, self.encoding) not in _ALLOWED:
            raise ValueError(
                f"unsupported quench pairing ({self.background.value}, {self.encoding.value}); "
                "use (ALL_UP, X_BASIS) or (ALL_PLUS_Y, Y_BASIS)"
            )

    def to_dict(self) -> dict:
        return {"background": self.background.value, "encoding": self.encoding.value}


@dataclass(frozen=True)
class InputBatch:
    seed: int
    n_train: int
    n_test: int
    values: np.ndarray

    @property
    def train(self) -> np.ndarray:
        return self.values[: self.n_train]

    @property
    def test(self) -> np.ndarray:
        return self.values[self.n_train :]

    def __len__(self) -> int:
        return self.n_train + self.n_test


def sample_inputs(seed: int, n_train: int = 128, n_test: int = 128) -> InputBatch:
    """Draw ``n_train + n_test`` i.i.d. uniform inputs from a Philox stream."""
    if n_train < 2 or n_test < 2:
        raise ValueError(f"need at least 2 train and 2 test instances, got {n_train}/{n_test}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    rng = np.random.Generator(np.random.Philox(seed))
    values = rng.random(n_train + n_test)
    values.setflags(write=False)
    return InputBatch(seed, n_train, n_test, values)


def encoding_basis(encoding: Encoding) -> tuple[np.ndarray, np.ndarray]:
    """The two single-spin states whose superposition carries the input.

    X_BASIS gives ``|+>, |->``; Y_BASIS gives ``|+y>, |-y>``, all written in
    the ``(|up>, |down>)`` basis.
    """
    encoding = Encoding(encoding)
    if encoding is Encoding.X_BASIS:
        return (np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
                np.array([SQRT_HALF, -SQRT_HALF], dtype=complex))
    return (np.array([SQRT_HALF, 1j * SQRT_HALF]),
            np.array([SQRT_HALF, -1j * SQRT_HALF]))


def input_weights(s) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes ``(sqrt(1 - s), sqrt(s))`` on the two encoding states."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)) or np.any(np.isnan(s)):
        raise ValueError("input values must lie in [0, 1]")
    return np.sqrt(1.0 - s), np.sqrt(s)


def local_state(s: float, encoding: Encoding = Encoding.X_BASIS) -> np.ndarray:
    plus, minus = encoding_basis(encoding)
    a, b = input_weights(s)
    return a * plus + b * minus


def background_state(background: Background) -> np.ndarray:
    if Background(background) is Background.ALL_UP:
        return np.array([1.0, 0.0], dtype=complex)
    return np.array([SQRT_HALF, 1j * SQRT_HALF])


def product_state(spins: list[np.ndarray]) -> np.ndarray:
    """Tensor product with ``spins[i]`` on site ``i`` (bit ``i`` of the index)."""
    psi = np.ones(1, dtype=complex)
    for spin in spins:
        # higher sites are more significant bits, hence the outer position
        psi = np.kron(spin, psi)
    return psi


def build_initial_state(s: float, n_sites: int, config: QuenchConfig = QuenchConfig()) -> np.ndarray:
    if n_sites < 1 or n_sites % 2 == 0:
        raise ValueError(f"n_sites must be odd, got {n_sites}")
    center = (n_sites - 1) // 2
    bg = background_state(config.background)
    spins = [bg] * n_sites
    spins[center] = local_state(s, config.encoding)
    return product_state(spins)
