"""Experiment orchestration: configs, parameter sweeps, and on-disk artifacts.

One experiment is one TOML file and one output directory::

    <output>/
        manifest.json
        sweep.csv                     parameter, r2_mean, dip
        points/<param>=<value>/
            observables.npz           values[k, i, m], times, inputs
            r2.npz                    r2, raw_r2, delta, zeroed_mask, times, sites
            heatmap.csv               site_offset, time, r2, delta, masked
            entropy.csv               time, entropy
            point.json                fingerprint, r2_mean, file digests

Binary files are zip archives of ``.npy`` members written with a fixed
timestamp, so identical arrays always give identical bytes.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    DEFAULT_THRESHOLD,
    DipLocation,
    R2Grid,
    SubsetSpec,
    SweepResult,
    build_r2_grid,
    locate_dip,
    mean_r2,
)
from .engine import EngineParams
from .models import COUPLING_NAMES, ModelSpec, Variant, alpha_parametrization
from .observables import EntropySeries, ObservableGrid, entropy_series, record_trajectory
from .quench import PRNG_NAME, InputBatch, QuenchConfig, sample_inputs

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PointResult",
    "load_config",
    "run_point",
    "run_sweep",
    "export_heatmap",
    "export_outputs",
    "reanalyze",
    "read_npz",
    "write_npz",
    "load_point",
    "save_point",
]


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


@dataclass
class ExperimentConfig:
    model: ModelSpec
    sweep_parameter: str
    sweep_values: list[float]
    quench: QuenchConfig = field(default_factory=QuenchConfig)
    engine: EngineParams = field(default_factory=EngineParams)
    seed: int = 7
    n_train: int = 64
    n_test: int = 64
    axis: str = "X"
    dt_record: float = 0.05
    t_max: float = 5.0
    subset: SubsetSpec = field(default_factory=lambda: SubsetSpec(9, 0.0, 5.0))
    threshold: float = DEFAULT_THRESHOLD
    method: str = "superposition"
    output: Path = Path("qrp-output")

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.sweep_values:
            raise ConfigError("sweep values must be non-empty")
        if any(not math.isfinite(v) for v in self.sweep_values):
            raise ConfigError("sweep values must be finite")
        if len(set(self.sweep_values)) != len(self.sweep_values):
            raise ConfigError("sweep values must be distinct")
        allowed = set(COUPLING_NAMES[self.model.variant])
        if self.model.variant is Variant.CLUSTER_FIELD:
            allowed.add("alpha")
        if self.sweep_parameter not in allowed:
            raise ConfigError(
                f"cannot sweep {self.sweep_parameter!r} for {self.model.variant.value}; "
                f"choose from {sorted(allowed)}"
            )
        if self.axis not in ("X", "Y", "Z"):
            raise ConfigError(f"unknown observable axis {self.axis!r}")
        if self.method not in ("superposition", "direct"):
            raise ConfigError(f"unknown trajectory method {self.method!r}")
        if self.threshold < 0:
            raise ConfigError("threshold must be non-negative")
        if self.t_max > self.engine.t_max + 1e-12:
            raise ConfigError(f"observable t_max={self.t_max} exceeds engine t_max={self.engine.t_max}")
        try:
            self.engine.check_size(self.model.n_sites)
            every = self.engine.steps_for(self.dt_record)
            total = self.engine.steps_for(self.t_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if every == 0 or total % every:
            raise ConfigError(f"t_max={self.t_max} must be a positive multiple of dt_record={self.dt_record}")
        if self.subset.t_hi > self.t_max + 1e-9 or self.subset.t_lo < 0:
            raise ConfigError(
                f"analysis window ({self.subset.t_lo}, {self.subset.t_hi}] exceeds recorded range [0, {self.t_max}]"
            )
        if self.subset.width > self.model.n_sites:
            raise ConfigError(f"window of {self.subset.width} sites exceeds chain of {self.model.n_sites}")
        if self.n_train < 2 or self.n_test < 2:
            raise ConfigError("need at least 2 train and 2 test instances")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for value in self.sweep_values:
            try:
                self.model_at(value)
            except ValueError as exc:
                raise ConfigError(f"sweep value {value}: {exc}") from exc

    def model_at(self, value: float) -> ModelSpec:
        if self.sweep_parameter == "alpha":
            j_zxz, h_x = alpha_parametrization(self.model.couplings["J_zz"], value)
            return self.model.with_coupling(J_zxz=j_zxz, h_x=h_x)
        return self.model.with_coupling(**{self.sweep_parameter: value})

    def batch(self) -> InputBatch:
        return sample_inputs(self.seed, self.n_train, self.n_test)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "sweep": {"parameter": self.sweep_parameter, "values": list(self.sweep_values)},
            "quench": self.quench.to_dict(),
            "engine": {
                "dt": self.engine.dt,
                "krylov_dim": self.engine.krylov_dim,
                "krylov_tol": self.engine.krylov_tol,
                "max_sites": self.engine.max_sites,
            },
            "batch": {"seed": self.seed, "n_train": self.n_train, "n_test": self.n_test},
            "observable": {"axis": self.axis, "dt_record": self.dt_record, "t_max": self.t_max,
                           "method": self.method},
            "analysis": {
                "threshold": self.threshold,
                "window_sites": self.subset.width,
                "t_lo": self.subset.t_lo,
                "t_hi": self.subset.t_hi,
                "closed_lower": self.subset.closed_lower,
            },
            "output": {"directory": str(self.output)},
        }

    def fingerprint(self) -> str:
        """SHA-256 over everything that affects results (not the output path)."""
        data = self.to_dict()
        del data["output"]
        blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        try:
            model_d = data.pop("model")
            sweep_d = data.pop("sweep")
            parameter = str(sweep_d["parameter"])
            values = [float(v) for v in sweep_d["values"]]
            couplings = dict(model_d.get("couplings", {}))
            # the swept coupling is set per point; seed it so the base spec is complete
            if values and parameter == "alpha":
                j_zxz, h_x = alpha_parametrization(float(couplings.get("J_zz", 0.0)), values[0])
                couplings.setdefault("J_zxz", j_zxz)
                couplings.setdefault("h_x", h_x)
            elif values:
                couplings.setdefault(parameter, values[0])
            model = ModelSpec(model_d["variant"], int(model_d["n_sites"]), couplings)
            quench_d = data.pop("quench", {})
            engine_d = data.pop("engine", {})
            batch_d = data.pop("batch", {})
            obs_d = data.pop("observable", {})
            ana_d = data.pop("analysis", {})
            out_d = data.pop("output", {})
            if data:
                raise ConfigError(f"unknown config sections: {sorted(data)}")
            t_max = float(obs_d.get("t_max", 5.0))
            engine = EngineParams(t_max=t_max, **engine_d)
            subset = SubsetSpec(
                int(ana_d.get("window_sites", 9)),
                float(ana_d.get("t_lo", 0.0)),
                float(ana_d.get("t_hi", t_max)),
                bool(ana_d.get("closed_lower", False)),
            )
            output = Path(out_d.get("directory", "qrp-output"))
            if base_dir is not None and not output.is_absolute():
                output = base_dir / output
            return cls(
                model=model,
                sweep_parameter=parameter,
                sweep_values=values,
                quench=QuenchConfig(quench_d.get("background", "ALL_UP"), quench_d.get("encoding", "X_BASIS")),
                engine=engine,
                seed=int(batch_d.get("seed", 7)),
                n_train=int(batch_d.get("n_train", 64)),
                n_test=int(batch_d.get("n_test", 64)),
                axis=str(obs_d.get("axis", "X")),
                dt_record=float(obs_d.get("dt_record", 0.05)),
                t_max=t_max,
                subset=subset,
                threshold=float(ana_d.get("threshold", DEFAULT_THRESHOLD)),
                method=str(obs_d.get("method", "superposition")),
                output=output,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}") from exc


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# deterministic file I/O
# ---------------------------------------------------------------------------

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            member = io.BytesIO()
            np.lib.format.write_array(member, np.asarray(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH), member.getvalue())
    _atomic_write(Path(path), buf.getvalue())


def read_npz(path: Path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as data:
        return {k: data[k] for k in data.files}


def _csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode()


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def export_heatmap(grid: R2Grid, path: Path, binary_path: Path | None | bool = True) -> Path:
    """Write the long-form table plus a binary copy of the grid.

    The binary lands beside the table with a ``.npz`` suffix unless
    ``binary_path`` names another file; pass False to skip it.
    """
    path = Path(path)
    rows = []
    for row, site in enumerate(grid.sites):
        offset = int(site) - grid.center
        for m, t in enumerate(grid.times):
            rows.append([offset, _fmt(t), _fmt(grid.r2[row, m]), _fmt(grid.delta[row, m]),
                         int(grid.zeroed_mask[row, m])])
    _atomic_write(path, _csv_bytes(["site_offset", "time", "r2", "delta", "masked"], rows))
    if binary_path is True:
        binary_path = path.with_suffix(".npz")
    if binary_path:
        write_npz(Path(binary_path), _r2_arrays(grid))
    return path


def _r2_arrays(grid: R2Grid) -> dict[str, np.ndarray]:
    arrays = {
        "r2": grid.r2,
        "delta": grid.delta,
        "zeroed_mask": grid.zeroed_mask,
        "times": grid.times,
        "sites": np.asarray(grid.sites, dtype=np.int64),
        "threshold": np.array(grid.threshold),
        "n_sites": np.array(grid.n_sites, dtype=np.int64),
    }
    if grid.raw_r2 is not None:
        arrays["raw_r2"] = grid.raw_r2
    return arrays


def _r2_from_arrays(a: dict[str, np.ndarray]) -> R2Grid:
    return R2Grid(a["r2"], a["delta"], float(a["threshold"]), a["zeroed_mask"], a["times"],
                  a["sites"], int(a["n_sites"]), a.get("raw_r2"))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass
class PointResult:
    value: float
    observables: ObservableGrid
    r2: R2Grid
    entropy: EntropySeries
    r2_mean: float


def run_point(config: ExperimentConfig, value: float, workers: int = 1):
    """Run the full protocol at one sweep value.

    Returns ``(ObservableGrid, R2Grid, EntropySeries)``. The entropy series
    follows the single instance with input 0.5 across the half-chain cut.
    """
    model = config.model_at(value)
    batch = config.batch()
    engine = replace(config.engine, t_max=config.t_max)

    def trajectory():
        return record_trajectory(batch.values, model, config.quench, engine, config.axis,
                                 config.dt_record, config.t_max, method=config.method, workers=workers)

    def entropy():
        return entropy_series(model, config.quench, engine, 0.5, config.dt_record, config.t_max)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_obs, fut_ent = pool.submit(trajectory), pool.submit(entropy)
            grid, ent = fut_obs.result(), fut_ent.result()
    else:
        grid, ent = trajectory(), entropy()
    grid.meta["inputs_seed"] = batch.seed
    grid.meta["prng"] = PRNG_NAME
    r2 = build_r2_grid(grid, batch, config.threshold)
    return grid, r2, ent


def _point_dir(config: ExperimentConfig, value: float) -> Path:
    return config.output / "points" / f"{config.sweep_parameter}={value!r}"


POINT_FILES = ("observables.npz", "r2.npz", "heatmap.csv", "entropy.csv")


def save_point(config: ExperimentConfig, value: float, grid, r2, ent, batch) -> dict:
    """Persist one point's artifacts and its ``point.json`` record."""
    pdir = _point_dir(config, value)
    write_npz(pdir / "observables.npz", {"values": grid.values, "times": grid.times, "inputs": batch.values})
    export_heatmap(r2, pdir / "heatmap.csv", pdir / "r2.npz")
    _atomic_write(pdir / "entropy.csv",
                  _csv_bytes(["time", "entropy"], [[_fmt(t), _fmt(s)] for t, s in zip(ent.times, ent.values)]))
    record = {
        "value": value,
        "fingerprint": config.fingerprint(),
        "r2_mean": mean_r2(r2, config.subset),
        "entropy_cut": ent.cut,
        "files": {name: _sha256(pdir / name) for name in POINT_FILES},
    }
    _atomic_write(pdir / "point.json", (json.dumps(record, indent=2, sort_keys=True) + "\n").encode())
    return record


def _completed_point(config: ExperimentConfig, value: float) -> dict | None:
    pdir = _point_dir(config, value)
    try:
        record = json.loads((pdir / "point.json").read_text())
    except (OSError, ValueError):
        return None
    if record.get("fingerprint") != config.fingerprint():
        return None
    for name, digest in record.get("files", {}).items():
        if not (pdir / name).exists() or _sha256(pdir / name) != digest:
            return None
    return record


def load_point(config: ExperimentConfig, value: float) -> R2Grid:
    return _r2_from_arrays(read_npz(_point_dir(config, value) / "r2.npz"))


def _sweep_table(config: ExperimentConfig, values, means, dip: DipLocation | None) -> bytes:
    rows = []
    for v, m in zip(values, means):
        flag = int(dip is not None and v == dip.value)
        rows.append([_fmt(v), _fmt(m), flag])
    return _csv_bytes([config.sweep_parameter, "r2_mean", "dip"], rows)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_sweep(config: ExperimentConfig, *, resume: bool = False, workers: int = 1):
    """Run every sweep value, average, locate the dip, and persist everything.

    Failed points are recorded in the manifest and skipped; the sweep carries
    on. Returns ``(SweepResult, manifest_dict)``.
    """
    started = _now()
    config.output.mkdir(parents=True, exist_ok=True)
    batch = config.batch()
    values, means, grids, points, failures = [], [], [], [], []
    for value in config.sweep_values:
        record = _completed_point(config, value) if resume else None
        if record is not None:
            logger.info("skipping completed point %s=%s", config.sweep_parameter, value)
            r2 = load_point(config, value)
        else:
            try:
                grid, r2, ent = run_point(config, value, workers=workers)
            except Exception as exc:
                logger.error("point %s=%s failed: %s", config.sweep_parameter, value, exc)
                failures.append({"value": value, "error": f"{type(exc).__name__}: {exc}"})
                continue
            record = save_point(config, value, grid, r2, ent, batch)
        values.append(value)
        means.append(record["r2_mean"])
        grids.append(r2)
        pdir = _point_dir(config, value)
        points.append({
            "value": value,
            "r2_mean": record["r2_mean"],
            "files": {name: {"path": str((pdir / name).relative_to(config.output)), "sha256": digest}
                      for name, digest in record["files"].items()},
        })

    sweep = SweepResult(config.sweep_parameter, np.array(values), np.array(means), grids)
    dip = locate_dip(sweep) if values else None
    table = config.output / "sweep.csv"
    _atomic_write(table, _sweep_table(config, values, means, dip))
    manifest = {
        "config_fingerprint": config.fingerprint(),
        "config": config.to_dict(),
        "tool_version": __version__,
        "prng": PRNG_NAME,
        "started": started,
        "finished": _now(),
        "points": points,
        "failures": failures,
        "sweep_table": {"path": "sweep.csv", "sha256": _sha256(table)},
        "dip": None if dip is None else {
            "value": dip.value,
            "r2_mean": dip.r2_min,
            "interior": dip.interior,
            "note": "" if dip.interior else "no interior dip",
        },
    }
    _atomic_write(config.output / "manifest.json",
                  (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return sweep, manifest


def reanalyze(config: ExperimentConfig, threshold: float | None = None,
              subset: SubsetSpec | None = None) -> SweepResult:
    """Recompute the sweep averages from stored coefficients, no re-simulation."""
    threshold = config.threshold if threshold is None else threshold
    subset = config.subset if subset is None else subset
    values, means, grids = [], [], []
    for value in config.sweep_values:
        try:
            r2 = load_point(config, value)
        except FileNotFoundError:
            continue
        if threshold != r2.threshold:
            r2 = r2.rethreshold(threshold)
        values.append(value)
        means.append(mean_r2(r2, subset))
        grids.append(r2)
    return SweepResult(config.sweep_parameter, np.array(values), np.array(means), grids)


def export_outputs(config: ExperimentConfig, threshold: float | None = None) -> list[Path]:
    """Re-emit heatmaps and the sweep table from stored binaries.

    With a ``threshold`` different from the stored one, the heatmaps are
    rethresholded and written under ``export-<threshold>/`` instead of
    replacing the originals.
    """
    sweep = reanalyze(config, threshold)
    if not len(sweep.values):
        raise FileNotFoundError(f"no stored points under {config.output}")
    same = threshold is None or threshold == config.threshold
    root = config.output if same else config.output / f"export-{threshold:g}"
    written = []
    for value, grid in zip(sweep.values, sweep.grids):
        target = root / "points" / f"{config.sweep_parameter}={float(value)!r}" / "heatmap.csv"
        # with the stored threshold, r2.npz already is the binary
        export_heatmap(grid, target, binary_path=not same and target.with_name("r2.npz"))
        written.append(target)
    dip = locate_dip(sweep)
    table = root / "sweep.csv"
    _atomic_write(table, _sweep_table(config, sweep.values.tolist(), sweep.r2_mean.tolist(), dip))
    written.append(table)
    return written
