"""Dataset ingestion, standardization, ordering, and simulation.

A `SurvivalDataset` is an ordered sequence of (time, status) records with
optional covariate rows.  Status 1 means the event time was observed,
status 0 means it is right-censored at the recorded time.  Standardization
metadata (`scale_factor`, per-column covariate shift/scale) is carried on
the dataset so every downstream output can be mapped back to the original
units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DataError

__all__ = [
    "SurvivalDataset",
    "load_csv",
    "standardize",
    "permute",
    "observed_first_order",
    "original_order",
    "simulate_censored_exponential",
    "unscale_times",
    "unscale_density",
    "write_rows",
]


@dataclass(frozen=True)
class SurvivalDataset:
    times: np.ndarray  # positive reals, shape (n,)
    status: np.ndarray  # 1 observed / 0 right-censored, shape (n,)
    covariates: np.ndarray | None = None  # shape (n, d)
    scale_factor: float = 1.0  # total factor applied to raw times
    covariate_shift_scale: np.ndarray | None = None  # shape (d, 2): (mean, sd)
    perm: np.ndarray | None = None  # perm[i] = original index of record i

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        status = np.asarray(self.status, dtype=int)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)
        if times.ndim != 1 or status.shape != times.shape:
            raise DataError("times and status must be equal-length vectors")
        if times.size == 0:
            raise DataError("dataset is empty")
        if np.any(times <= 0):
            raise DataError("all times must be strictly positive")
        if not np.all((status == 0) | (status == 1)):
            raise DataError("status must be 0 (censored) or 1 (observed)")
        if self.covariates is not None:
            cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
            if cov.shape[0] != times.size:
                raise DataError("covariate matrix must have one row per record")
            object.__setattr__(self, "covariates", cov)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def n_observed(self) -> int:
        return int(self.status.sum())

    @property
    def censoring_fraction(self) -> float:
        return 1.0 - self.n_observed / self.n


def load_csv(path, time_col="time", status_col="status", covariate_cols=()):
    """Read a dataset from a comma-separated file with a header row.

    Required columns: `time_col` (positive decimal) and `status_col`
    (0/1).  Covariate columns are optional and selected by name.  Parse
    failures report the offending row number (1-based, excluding the
    header).
    """
    covariate_cols = list(covariate_cols)
    times, status, rows = [], [], []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        for col in [time_col, status_col, *covariate_cols]:
            if col not in reader.fieldnames:
                raise DataError(f"{path}: missing column {col!r}")
        for i, record in enumerate(reader, start=1):
            try:
                t = float(record[time_col])
            except (TypeError, ValueError):
                raise DataError(f"{path} row {i}: unparsable time {record[time_col]!r}")
            if not t > 0:
                raise DataError(f"{path} row {i}: time must be positive, got {t}")
            s = (record[status_col] or "").strip()
            if s not in ("0", "1"):
                raise DataError(f"{path} row {i}: status must be 0 or 1, got {s!r}")
            try:
                rows.append([float(record[c]) for c in covariate_cols])
            except (TypeError, ValueError):
                raise DataError(f"{path} row {i}: unparsable covariate value")
            times.append(t)
            status.append(int(s))
    if not times:
        raise DataError(f"{path}: no data rows")
    covariates = np.asarray(rows) if covariate_cols else None
    return SurvivalDataset(np.asarray(times), np.asarray(status), covariates)


def standardize(data: SurvivalDataset, scale_covariates: bool = True) -> SurvivalDataset:
    """Rescale times so the exponential-rate MLE equals one exactly.

    Times are multiplied by theta_hat = (number observed) / (sum of all
    recorded times); the factor is recorded in `scale_factor` so outputs
    can be reported in original units.  Covariates are z-scored per
    column by default (constant columns get sd 1), with the (mean, sd)
    pairs recorded for back-transformation.
    """
    k = data.n_observed
    if k < 1:
        raise DataError("standardization needs at least one observed event")
    theta_hat = k / float(data.times.sum())
    covariates = data.covariates
    shift_scale = data.covariate_shift_scale
    if covariates is not None and scale_covariates:
        mean = covariates.mean(axis=0)
        sd = covariates.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        covariates = (covariates - mean) / sd
        shift_scale = np.column_stack([mean, sd])
    return replace(
        data,
        times=data.times * theta_hat,
        covariates=covariates,
        scale_factor=data.scale_factor * theta_hat,
        covariate_shift_scale=shift_scale,
    )


def _reorder(data: SurvivalDataset, order: np.ndarray) -> SurvivalDataset:
    perm = order if data.perm is None else data.perm[order]
    return replace(
        data,
        times=data.times[order],
        status=data.status[order],
        covariates=None if data.covariates is None else data.covariates[order],
        perm=perm,
    )


def permute(data: SurvivalDataset, seed: int) -> SurvivalDataset:
    """Uniform random reordering of the records, seed-reproducible."""
    order = np.random.default_rng(seed).permutation(data.n)
    return _reorder(data, order)


def observed_first_order(data: SurvivalDataset) -> SurvivalDataset:
    """Reorder with all observed records before all censored ones
    (stable within each group)."""
    order = np.argsort(1 - data.status, kind="stable")
    return _reorder(data, order)


def original_order(data: SurvivalDataset) -> SurvivalDataset:
    """Undo any recorded permutation."""
    if data.perm is None:
        return data
    inverse = np.argsort(data.perm)
    restored = _reorder(data, inverse)
    return replace(restored, perm=None)


def simulate_censored_exponential(n, rate_y=1.0, rate_c=2.0, seed=0) -> SurvivalDataset:
    """Exponential survival times censored by independent exponential times.

    Records min(y, c) with status 1 when y < c.  The analytic censoring
    probability is rate_c / (rate_y + rate_c).
    """
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    if not (rate_y > 0 and rate_c > 0):
        raise ConfigurationError("rates must be positive")
    rng = np.random.default_rng(seed)
    y = rng.exponential(1.0 / rate_y, size=n)
    c = rng.exponential(1.0 / rate_c, size=n)
    times = np.minimum(y, c)
    # guard the measure-zero exact ties / zero draws
    times = np.maximum(times, 1e-300)
    return SurvivalDataset(times=times, status=(y < c).astype(int))


# ---------------------------------------------------------------------------
# Unit back-transformation and serialization
# ---------------------------------------------------------------------------

def unscale_times(values, scale_factor: float):
    """Map times/quantiles from the standardized scale back to input units."""
    return np.asarray(values, dtype=float) / scale_factor


def unscale_density(values, scale_factor: float):
    """Map density values back to input units (densities scale inversely)."""
    return np.asarray(values, dtype=float) * scale_factor


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path, header, rows) -> None:
    """Write a CSV with deterministic shortest-roundtrip float formatting."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
