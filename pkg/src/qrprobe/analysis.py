"""Linear readout statistics over recorded observables.

For every site and recorded time, a two-weight readout ``y = w_O * x + w_c``
is fitted on the training instances by least squares and scored on the test
instances with the squared Pearson correlation between ``y`` and the true
inputs. Cells whose training observables barely vary (mean absolute
deviation under a threshold) are forced to zero, since any correlation there
would be fitted to numerical noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .observables import ObservableGrid
from .quench import InputBatch

__all__ = [
    "ReadoutWeights",
    "R2Grid",
    "SubsetSpec",
    "SweepResult",
    "DipLocation",
    "train_readout",
    "r_squared",
    "average_abs_deviation",
    "build_r2_grid",
    "mean_r2",
    "locate_dip",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 1e-5
PINV_RCOND = 1e-12
ZERO_VARIANCE = 1e-14


@dataclass(frozen=True)
class ReadoutWeights:
    w_O: float
    w_c: float

    def apply(self, x):
        return self.w_O * np.asarray(x) + self.w_c


@dataclass
class R2Grid:
    r2: np.ndarray
    delta: np.ndarray
    threshold: float
    zeroed_mask: np.ndarray
    times: np.ndarray
    sites: np.ndarray
    n_sites: int
    raw_r2: np.ndarray | None = None

    @property
    def center(self) -> int:
        return (self.n_sites - 1) // 2

    def rethreshold(self, threshold: float) -> "R2Grid":
        """Same readout, different deviation threshold; needs ``raw_r2``."""
        if self.raw_r2 is None:
            raise ValueError("grid was stored without unthresholded coefficients")
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        mask = self.delta < threshold
        return R2Grid(np.where(mask, 0.0, self.raw_r2), self.delta, threshold, mask,
                      self.times, self.sites, self.n_sites, self.raw_r2)


@dataclass(frozen=True)
class SubsetSpec:
    """Centered window of ``width`` sites and times ``t_lo < t <= t_hi``.

    With ``closed_lower`` the lower bound becomes ``t_lo <= t``.
    """

    width: int
    t_lo: float
    t_hi: float
    closed_lower: bool = False

    def __post_init__(self):
        if self.width < 1 or self.width % 2 == 0:
            raise ValueError(f"window width must be a positive odd number, got {self.width}")
        if self.t_hi <= self.t_lo:
            raise ValueError(f"empty time window ({self.t_lo}, {self.t_hi}]")

    def site_indices(self, n_sites: int) -> np.ndarray:
        if self.width > n_sites:
            raise ValueError(f"window of {self.width} sites exceeds chain of {n_sites}")
        center = (n_sites - 1) // 2
        half = self.width // 2
        return np.arange(center - half, center + half + 1)

    def time_mask(self, times: np.ndarray) -> np.ndarray:
        eps = 1e-9
        if self.t_hi > times[-1] + eps or self.t_lo < times[0] - eps:
            raise ValueError(
                f"time window [{self.t_lo}, {self.t_hi}] exceeds recorded range [{times[0]}, {times[-1]}]"
            )
        lower = times >= self.t_lo - eps if self.closed_lower else times > self.t_lo + eps
        return lower & (times <= self.t_hi + eps)


@dataclass
class SweepResult:
    parameter: str
    values: np.ndarray
    r2_mean: np.ndarray
    grids: list = field(default_factory=list)


@dataclass(frozen=True)
class DipLocation:
    value: float
    r2_min: float
    index: int
    interior: bool

    def __iter__(self):
        # unpacks like the (value, minimum) pair
        return iter((self.value, self.r2_min))


def train_readout(train_obs, train_s) -> ReadoutWeights:
    """Least-squares ``(w_O, w_c)`` via the pseudoinverse of ``[x, 1]``.

    If the design is rank-deficient at relative cutoff 1e-12 (observable
    constant over the training set) the readout degenerates to
    ``(0, mean(s))``.
    """
    x = np.asarray(train_obs, dtype=float)
    s = np.asarray(train_s, dtype=float)
    if x.shape != s.shape or x.ndim != 1:
        raise ValueError("train_obs and train_s must be 1-D arrays of equal length")
    if len(x) < 2:
        raise ValueError("need at least two training instances")
    design = np.column_stack([x, np.ones_like(x)])
    u, sv, vt = np.linalg.svd(design, full_matrices=False)
    if sv[-1] <= PINV_RCOND * sv[0]:
        return ReadoutWeights(0.0, float(np.mean(s)))
    w = vt.T @ ((u.T @ s) / sv)
    return ReadoutWeights(float(w[0]), float(w[1]))


def r_squared(outputs, targets) -> float:
    """Squared Pearson correlation ``cov(y, s)^2 / (var(y) var(s))``.

    Returns 0 when the outputs have (numerically) zero variance.
    """
    y = np.asarray(outputs, dtype=float)
    s = np.asarray(targets, dtype=float)
    if y.shape != s.shape or y.ndim != 1 or len(y) < 2:
        raise ValueError("outputs and targets must be 1-D arrays of equal length >= 2")
    ds = s - s.mean()
    var_s = np.mean(ds * ds)
    if var_s <= 0:
        raise ValueError("targets have zero variance; the input batch is malformed")
    dy = y - y.mean()
    var_y = np.mean(dy * dy)
    if var_y <= ZERO_VARIANCE:
        return 0.0
    cov = np.mean(dy * ds)
    # Cauchy-Schwarz bounds this by 1; clip only trims rounding
    return float(min(1.0, cov * cov / (var_y * var_s)))


def average_abs_deviation(train_obs) -> float:
    x = np.asarray(train_obs, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two values")
    return float(np.mean(np.abs(x - x.mean())))


def _raw_r2(values: np.ndarray, batch: InputBatch) -> tuple[np.ndarray, np.ndarray]:
    n_cells_site, n_times = values.shape[1:]
    train, test = values[: batch.n_train], values[batch.n_train :]
    raw = np.zeros((n_cells_site, n_times))
    delta = np.zeros((n_cells_site, n_times))
    for i in range(n_cells_site):
        for m in range(n_times):
            x_tr = train[:, i, m]
            delta[i, m] = average_abs_deviation(x_tr)
            weights = train_readout(x_tr, batch.train)
            raw[i, m] = r_squared(weights.apply(test[:, i, m]), batch.test)
    return raw, delta


def build_r2_grid(grid: ObservableGrid, batch: InputBatch, threshold: float = DEFAULT_THRESHOLD) -> R2Grid:
    """Per-cell determination coefficients with deviation thresholding.

    The unthresholded coefficients are kept on the result so other
    thresholds can be applied later via :meth:`R2Grid.rethreshold`.
    """
    if grid.n_instances != len(batch):
        raise ValueError(f"grid has {grid.n_instances} instances, batch has {len(batch)}")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    raw, delta = _raw_r2(grid.values, batch)
    mask = delta < threshold
    sites = np.asarray(grid.meta.get("sites", range(grid.n_sites)))
    n_sites = grid.meta.get("model", {}).get("n_sites", grid.n_sites)
    return R2Grid(np.where(mask, 0.0, raw), delta, threshold, mask, np.asarray(grid.times), sites, n_sites, raw)


def mean_r2(grid: R2Grid, subset: SubsetSpec) -> float:
    """Mean of ``r2`` over the window, zeroed cells included."""
    wanted = subset.site_indices(grid.n_sites)
    rows = np.searchsorted(grid.sites, wanted)
    if np.any(rows >= len(grid.sites)) or np.any(grid.sites[np.minimum(rows, len(grid.sites) - 1)] != wanted):
        raise ValueError("subset sites were not recorded")
    cols = subset.time_mask(grid.times)
    if not cols.any():
        raise ValueError("subset contains no recorded times")
    return float(grid.r2[np.ix_(rows, np.flatnonzero(cols))].mean())


def locate_dip(sweep: SweepResult) -> DipLocation:
    """Smallest ``r2_mean`` over the sweep; ties go to the smaller parameter.

    ``interior`` is False when the minimum sits at an end of the sweep
    (including sweeps too short to have an interior).
    """
    values = np.asarray(sweep.values, dtype=float)
    r2 = np.asarray(sweep.r2_mean, dtype=float)
    if len(values) == 0 or len(values) != len(r2):
        raise ValueError("sweep must hold equally many parameter values and means")
    order = np.argsort(values, kind="stable")
    best = order[0]
    for idx in order[1:]:
        if r2[idx] < r2[best]:
            best = idx
    rank = int(np.flatnonzero(order == best)[0])
    interior = 0 < rank < len(values) - 1
    return DipLocation(float(values[best]), float(r2[best]), int(best), interior)
