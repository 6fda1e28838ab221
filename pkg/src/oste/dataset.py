"""Right-censored survival datasets: ingestion, validation, splitting, resampling.

Datasets are immutable after construction and safe to share across parallel
workers. All randomness flows through caller-supplied ``numpy.random.Generator``
instances; there is no hidden global state.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateSplitError, ParseError, ValidationError

__all__ = [
    "NUMERIC",
    "INTEGER",
    "CATEGORICAL",
    "Feature",
    "FeatureSchema",
    "SurvivalDataset",
    "DatasetConfig",
    "SplitIndices",
    "parse_csv",
    "serialize_csv",
    "split",
    "bootstrap",
]

NUMERIC = "numeric"
INTEGER = "integer"
CATEGORICAL = "categorical"
_KINDS = (NUMERIC, INTEGER, CATEGORICAL)


@dataclass(frozen=True)
class Feature:
    """One column of the feature matrix.

    ``kind`` is one of ``numeric`` (real-valued), ``integer`` (ordered
    integer codes, split like numerics), or ``categorical`` (unordered
    levels, stored as level indices into ``levels``).
    """

    name: str
    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("feature names must be nonempty")
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise ValidationError(f"categorical feature {self.name!r} needs >= 1 level")
            if len(set(self.levels)) != len(self.levels):
                raise ValidationError(f"duplicate levels for feature {self.name!r}")
            object.__setattr__(self, "levels", tuple(self.levels))
        elif self.levels is not None:
            raise ConfigError(f"levels are only valid for categorical features ({self.name!r})")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered collection of features with unique names."""

    features: tuple[Feature, ...]

    def __post_init__(self):
        feats = tuple(self.features)
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")
        object.__setattr__(self, "features", feats)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def __len__(self) -> int:
        return len(self.features)

    def to_dict(self) -> dict:
        out = {}
        for f in self.features:
            if f.kind == CATEGORICAL:
                out[f.name] = {"kind": f.kind, "levels": list(f.levels)}
            else:
                out[f.name] = f.kind
        return out


@dataclass(frozen=True)
class SurvivalDataset:
    """n right-censored observations over a fixed feature schema.

    ``X`` holds one float64 column per feature; categorical columns store
    level indices. ``times`` are nonnegative study times and ``status`` is
    True where the event was observed. Model fitting additionally requires
    at least one event; that is checked by the fitting routines rather
    than at construction.
    """

    schema: FeatureSchema
    X: np.ndarray
    times: np.ndarray
    status: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        times = np.asarray(self.times, dtype=float)
        status = np.asarray(self.status, dtype=bool)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise ValidationError("X must be 2-d with one column per schema feature")
        if times.shape != (X.shape[0],) or status.shape != (X.shape[0],):
            raise ValidationError("times and status must have one entry per row")
        if np.any(~np.isfinite(times)) or np.any(times < 0):
            raise ValidationError("times must be finite and >= 0")
        if np.any(~np.isfinite(X)):
            raise ValidationError("feature values must be finite (missing values are rejected)")
        for j, f in enumerate(self.schema.features):
            col = X[:, j]
            if f.kind == INTEGER and col.size and np.any(col != np.round(col)):
                raise ValidationError(f"feature {f.name!r} must hold integer values")
            if f.kind == CATEGORICAL and col.size:
                if np.any(col != np.round(col)) or col.min() < 0 or col.max() >= len(f.levels):
                    raise ValidationError(f"feature {f.name!r} holds codes outside its levels")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)
        for arr in (self.X, self.times, self.status):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    def subset(self, indices) -> "SurvivalDataset":
        """New dataset restricted to ``indices`` (repeats allowed)."""
        idx = np.asarray(indices, dtype=np.int64)
        return SurvivalDataset(self.schema, self.X[idx], self.times[idx], self.status[idx])


@dataclass(frozen=True)
class DatasetConfig:
    """Column-role map for CSV ingestion.

    ``features`` maps column names to a kind string or, for categoricals
    with pinned levels, ``{"kind": "categorical", "levels": [...]}``.
    ``event_value`` is the raw status-column string that means "event
    observed"; any other value is treated as censored. The encoding is
    always explicit, never inferred.
    """

    time_col: str
    status_col: str
    event_value: str
    features: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.time_col or not self.status_col:
            raise ConfigError("time_col and status_col are required")
        if not self.features:
            raise ConfigError("at least one feature column must be configured")
        for name, spec in self.features.items():
            kind = spec.get("kind") if isinstance(spec, dict) else spec
            if kind not in _KINDS:
                raise ConfigError(f"unknown feature kind {kind!r} for column {name!r}")

    @classmethod
    def from_json(cls, text: str) -> "DatasetConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        try:
            return cls(
                time_col=raw["time_col"],
                status_col=raw["status_col"],
                event_value=str(raw["event_value"]),
                features=dict(raw["features"]),
            )
        except KeyError as e:
            raise ConfigError(f"config is missing required key {e.args[0]!r}") from e

    def to_json(self) -> str:
        return json.dumps(
            {
                "time_col": self.time_col,
                "status_col": self.status_col,
                "event_value": self.event_value,
                "features": self.features,
            },
            indent=2,
            sort_keys=True,
        )


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/test row indices, optionally with a nested split.

    ``lb``/``lv`` partition ``train`` into a growing part and a
    selection-validation part when populated by the experiment harness.
    """

    train: np.ndarray
    test: np.ndarray
    lb: np.ndarray | None = None
    lv: np.ndarray | None = None

    def __post_init__(self):
        train = np.asarray(self.train, dtype=np.int64)
        test = np.asarray(self.test, dtype=np.int64)
        if np.intersect1d(train, test).size:
            raise ValidationError("train and test must be disjoint")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)
        if (self.lb is None) != (self.lv is None):
            raise ValidationError("lb and lv must be given together")
        if self.lb is not None:
            lb = np.asarray(self.lb, dtype=np.int64)
            lv = np.asarray(self.lv, dtype=np.int64)
            if np.intersect1d(lb, lv).size:
                raise ValidationError("lb and lv must be disjoint")
            both = np.sort(np.concatenate((lb, lv)))
            if not np.array_equal(both, np.sort(train)):
                raise ValidationError("lb and lv must partition train")
            object.__setattr__(self, "lb", lb)
            object.__setattr__(self, "lv", lv)


def _parse_float(raw, row, col):
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"row {row}: column {col!r} has non-numeric value {raw!r}") from None


def parse_csv(text: str, config: DatasetConfig) -> SurvivalDataset:
    """Build a validated dataset from RFC-4180-style CSV text.

    The CSV must have a header row naming every configured column. Rows
    are numbered from 1 (the header is row 0) in error messages.
    Categorical levels are inferred from the observed values (sorted
    lexicographically) unless pinned in the config. Missing (empty)
    cells are rejected: no imputation policy exists, so parsing fails
    loudly instead.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("CSV is empty") from None
    col_idx = {name: i for i, name in enumerate(header)}
    needed = [config.time_col, config.status_col, *config.features]
    for name in needed:
        if name not in col_idx:
            raise ConfigError(f"CSV is missing configured column {name!r}")

    feat_names = list(config.features)
    times, status = [], []
    raw_feats = {name: [] for name in feat_names}
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
        t = _parse_float(row[col_idx[config.time_col]], row_no, config.time_col)
        if not np.isfinite(t) or t < 0:
            raise ValidationError(f"row {row_no}: time must be finite and >= 0, got {t!r}")
        times.append(t)
        status.append(row[col_idx[config.status_col]] == config.event_value)
        for name in feat_names:
            raw = row[col_idx[name]]
            if raw == "":
                raise ValidationError(f"row {row_no}: column {name!r} is missing a value")
            raw_feats[name].append(raw)

    n = len(times)
    if n == 0:
        raise ParseError("CSV has a header but no data rows")

    features = []
    columns = []
    for name in feat_names:
        spec = config.features[name]
        kind = spec.get("kind") if isinstance(spec, dict) else spec
        raw_col = raw_feats[name]
        if kind == CATEGORICAL:
            supplied = spec.get("levels") if isinstance(spec, dict) else None
            if supplied is not None:
                levels = tuple(str(v) for v in supplied)
                lookup = {v: i for i, v in enumerate(levels)}
                codes = []
                for row_no, raw in enumerate(raw_col, start=1):
                    if raw not in lookup:
                        raise ValidationError(
                            f"row {row_no}: column {name!r} has unknown level {raw!r}"
                        )
                    codes.append(lookup[raw])
            else:
                levels = tuple(sorted(set(raw_col)))
                lookup = {v: i for i, v in enumerate(levels)}
                codes = [lookup[raw] for raw in raw_col]
            features.append(Feature(name, CATEGORICAL, levels))
            columns.append(np.asarray(codes, dtype=float))
        else:
            vals = []
            for row_no, raw in enumerate(raw_col, start=1):
                v = _parse_float(raw, row_no, name)
                if kind == INTEGER and v != round(v):
                    raise ValidationError(f"row {row_no}: column {name!r} must be an integer, got {raw!r}")
                vals.append(v)
            features.append(Feature(name, kind))
            columns.append(np.asarray(vals, dtype=float))

    schema = FeatureSchema(tuple(features))
    X = np.column_stack(columns) if columns else np.empty((n, 0))
    return SurvivalDataset(schema, X, np.asarray(times), np.asarray(status))


def serialize_csv(
    ds: SurvivalDataset,
    time_col: str = "time",
    status_col: str = "status",
    event_value: str = "1",
    censored_value: str = "0",
) -> str:
    """Inverse of :func:`parse_csv` up to float formatting (repr round-trips)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([time_col, status_col, *ds.schema.names])
    for i in range(ds.n):
        row = [repr(float(ds.times[i])), event_value if ds.status[i] else censored_value]
        for j, f in enumerate(ds.schema.features):
            v = ds.X[i, j]
            if f.kind == CATEGORICAL:
                row.append(f.levels[int(v)])
            elif f.kind == INTEGER:
                row.append(str(int(v)))
            else:
                row.append(repr(float(v)))
        writer.writerow(row)
    return buf.getvalue()


def config_for_roundtrip(
    ds: SurvivalDataset,
    time_col: str = "time",
    status_col: str = "status",
    event_value: str = "1",
) -> DatasetConfig:
    """Config under which ``parse_csv(serialize_csv(ds))`` reproduces ``ds``."""
    feats = {}
    for f in ds.schema.features:
        if f.kind == CATEGORICAL:
            feats[f.name] = {"kind": CATEGORICAL, "levels": list(f.levels)}
        else:
            feats[f.name] = f.kind
    return DatasetConfig(time_col, status_col, event_value, feats)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split(
    ds: SurvivalDataset,
    train_fraction: float,
    rng: np.random.Generator,
    indices=None,
) -> SplitIndices:
    """Uniformly random partition of rows into train and test parts.

    ``indices`` restricts the partition to a subset of rows (used for the
    nested growing/validation split); by default all rows take part. The
    train part receives ``round(train_fraction * n)`` rows and must
    contain at least one event, otherwise :class:`DegenerateSplitError`
    is raised and the caller re-draws. Deterministic given the generator
    state.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must be in (0, 1)")
    pool = np.arange(ds.n, dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
    n = pool.size
    k = _round_half_up(train_fraction * n)
    if k < 2:
        raise ConfigError(f"train part would have {k} rows; need at least 2")
    if k >= n:
        raise ConfigError("test part would be empty")
    perm = rng.permutation(n)
    train = np.sort(pool[perm[:k]])
    test = np.sort(pool[perm[k:]])
    if not ds.status[train].any():
        raise DegenerateSplitError("train part contains no events")
    return SplitIndices(train=train, test=test)


def bootstrap(ds_indices, rng: np.random.Generator):
    """Draw a bootstrap sample of ``ds_indices`` with replacement.

    Returns ``(in_bag, oob)``: ``in_bag`` is a multiset (repeats kept, in
    draw order) of the same size as the input, and ``oob`` is the sorted
    set of input indices never drawn. Deterministic given the generator
    state.
    """
    idx = np.asarray(ds_indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot bootstrap an empty index set")
    in_bag = rng.choice(idx, size=idx.size, replace=True)
    oob = np.setdiff1d(idx, in_bag)
    return in_bag, oob
