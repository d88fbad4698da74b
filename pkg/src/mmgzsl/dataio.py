"""Feature sets, seen/unseen splitting, the synthetic ordered-class generator and file I/O.

On-disk format (one feature set = two files)::

    <name>.json   {"format_version", "dim", "num_records", "class_range",
                   "modality", "seed_provenance"}
    <name>.feat   records: u32 LE id length, UTF-8 id, u32 LE class, dim x f32 LE
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, FeatureFormatError, ShapeError

FORMAT_VERSION = 1
MODALITIES = ("MRI", "DP")


@dataclass(frozen=True)
class LabeledFeature:
    feature: np.ndarray
    class_value: int
    modality: str
    sample_id: str


@dataclass
class FeatureSet:
    """Column-oriented collection of labeled features of one modality."""

    features: np.ndarray  # (n, dim) float64
    classes: np.ndarray  # (n,) int
    sample_ids: list[str]
    modality: str = "MRI"
    class_range: tuple[int, int] | None = None
    seed_provenance: object = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            self.features = self.features.reshape(len(self.sample_ids), -1)
        self.classes = np.asarray(self.classes, dtype=np.int64).reshape(-1)
        if not (len(self.features) == len(self.classes) == len(self.sample_ids)):
            raise ShapeError("features, classes and sample_ids differ in length")
        if self.modality not in MODALITIES:
            raise ConfigError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.class_range is None and len(self.classes):
            self.class_range = (int(self.classes.min()), int(self.classes.max()))
        if self.class_range is not None:
            self.class_range = (int(self.class_range[0]), int(self.class_range[1]))
            lo, hi = self.class_range
            if len(self.classes) and (self.classes.min() < lo or self.classes.max() > hi):
                raise DataError(f"class values outside declared range {self.class_range}")

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, index: Sequence[int] | np.ndarray) -> "FeatureSet":
        index = np.asarray(index, dtype=np.int64)
        return FeatureSet(self.features[index], self.classes[index],
                          [self.sample_ids[i] for i in index], self.modality,
                          self.class_range, self.seed_provenance)

    def records(self) -> Iterable[LabeledFeature]:
        for x, c, sid in zip(self.features, self.classes, self.sample_ids):
            yield LabeledFeature(x, int(c), self.modality, sid)


@dataclass
class PairedDataset:
    mri: FeatureSet
    dp: FeatureSet
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mri.sample_ids != self.dp.sample_ids:
            raise DataError("MRI and DP records must share sample ids in the same order")
        if not np.array_equal(self.mri.classes, self.dp.classes):
            raise DataError("paired records carry different class values")

    def __len__(self) -> int:
        return len(self.mri)

    def take(self, index) -> "PairedDataset":
        return PairedDataset(self.mri.take(index), self.dp.take(index), self.meta)


@dataclass
class SyntheticSpec:
    """Gaussian blobs with collinear, ordered centers plus a planted MRI->DP affine map.

    ``map_matrix``/``map_offset`` default to seed-derived values; the default
    offset makes every DP feature non-negative. ``mri_offset`` likewise defaults
    to a shift that makes every MRI feature non-negative.

    ``stddev_slope`` widens blobs with class value: class ``c`` has stddev
    ``within_class_stddev * (1 + stddev_slope * (c - 1))``. With the default 0
    the mixture is symmetric under reflection through its middle center, so an
    unpaired translation can only recover the planted map up to that flip.
    """

    num_classes: int = 5
    dim: int = 32
    samples_per_class: int = 200
    class_axis_separation: float = 3.0
    within_class_stddev: float = 1.0
    map_matrix: np.ndarray | None = None
    map_offset: np.ndarray | None = None
    map_noise_stddev: float = 0.0
    mri_offset: float | None = None
    dp_dim: int | None = None
    stddev_slope: float = 0.0
    seed: int = 0

    def validate(self):
        for name in ("num_classes", "dim", "samples_per_class"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.dim < 2:
            raise ConfigError("dim must be at least 2")
        for name in ("within_class_stddev", "map_noise_stddev", "stddev_slope"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.class_axis_separation <= 0:
            raise ConfigError("class_axis_separation must be positive")


def planted_map(dim: int, dp_dim: int, rng: np.random.Generator) -> np.ndarray:
    """A well-conditioned random matrix: orthogonal factors with singular values in [0.5, 1.5]."""
    q1, _ = np.linalg.qr(rng.standard_normal((dp_dim, dp_dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    k = min(dim, dp_dim)
    s = np.linspace(1.5, 0.5, k)
    return (q1[:, :k] * s) @ q2[:, :k].T


def generate_synthetic(spec: SyntheticSpec) -> PairedDataset:
    """Paired MRI/DP feature sets; ``meta`` records the planted geometry."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d, c_n, n = spec.dim, spec.num_classes, spec.samples_per_class
    dp_dim = spec.dp_dim or d
    axis = rng.standard_normal(d)
    axis /= np.linalg.norm(axis)
    class_values = np.arange(1, c_n + 1)
    steps = (class_values - (c_n + 1) / 2.0) * spec.class_axis_separation
    centers = steps[:, None] * axis[None, :]
    classes = np.repeat(class_values, n)
    widths = spec.within_class_stddev * (1.0 + spec.stddev_slope * (class_values - 1))
    noise = rng.standard_normal((c_n * n, d)) * widths[classes - 1, None]
    mri = centers[classes - 1] + noise
    if spec.mri_offset is None:
        shift = max(0.0, -float(mri.min())) + 0.5
    else:
        shift = float(spec.mri_offset)
    mri += shift
    centers = centers + shift

    a = planted_map(d, dp_dim, rng) if spec.map_matrix is None else np.asarray(spec.map_matrix, float)
    if a.shape != (dp_dim, d):
        raise ConfigError(f"map_matrix must have shape {(dp_dim, d)}")
    dp_clean = mri @ a.T
    dp_noise = rng.standard_normal(dp_clean.shape) * spec.map_noise_stddev
    if spec.map_offset is None:
        b = np.maximum(0.0, -(dp_clean + dp_noise).min(axis=0)) + 0.5
    else:
        b = np.asarray(spec.map_offset, dtype=np.float64)
    dp = dp_clean + b + dp_noise

    ids = [f"s{i:06d}" for i in range(len(classes))]
    rng_range = (1, c_n)
    meta = {"class_axis": axis, "centers": centers, "map_matrix": a, "map_offset": b,
            "class_values": class_values}
    return PairedDataset(FeatureSet(mri, classes, ids, "MRI", rng_range, spec.seed),
                         FeatureSet(dp, classes, list(ids), "DP", rng_range, spec.seed), meta)


@dataclass
class SplitSpec:
    seen_classes: Sequence[int]
    unseen_classes: Sequence[int] = ()
    train_fraction: float = 0.8
    seed: int = 0

    def validate(self, present: Iterable[int] = ()):
        seen, unseen = set(self.seen_classes), set(self.unseen_classes)
        if seen & unseen:
            raise ConfigError(f"seen and unseen classes overlap: {sorted(seen & unseen)}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        missing = set(int(c) for c in present) - seen - unseen
        if missing:
            raise ConfigError(f"classes {sorted(missing)} present in data but not in split spec")


@dataclass
class Split:
    """Index arrays into the dataset that was split."""

    train: np.ndarray
    test: np.ndarray
    unseen: np.ndarray


def split(dataset: FeatureSet | PairedDataset, spec: SplitSpec) -> Split:
    """Stratified train/test partition of seen classes; all unseen samples go to U."""
    fs = dataset.mri if isinstance(dataset, PairedDataset) else dataset
    spec.validate(np.unique(fs.classes))
    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for c in sorted(set(spec.seen_classes)):
        idx = np.flatnonzero(fs.classes == c)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(spec.train_fraction * len(idx)))
        train.append(np.sort(idx[:k]))
        test.append(np.sort(idx[k:]))
    unseen = np.flatnonzero(np.isin(fs.classes, list(spec.unseen_classes)))

    def cat(parts):
        return np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, np.int64)

    return Split(cat(train), cat(test), unseen.astype(np.int64))


def _paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (".json", ".feat"):
        path = path.with_suffix("")
    return path.with_suffix(".json"), path.with_suffix(".feat")


def save_features(dataset: FeatureSet, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.json`` and ``<path>.feat``. Features are stored as float32."""
    meta_path, feat_path = _paths(path)
    meta_path.parent.mkdir(parents=True, exist_ok=True)
    lo_hi = list(dataset.class_range) if dataset.class_range else None
    meta = {"format_version": FORMAT_VERSION, "dim": int(dataset.dim),
            "num_records": len(dataset), "class_range": lo_hi,
            "modality": dataset.modality, "seed_provenance": dataset.seed_provenance}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    feats = dataset.features.astype("<f4")
    with open(feat_path, "wb") as fh:
        for sid, c, row in zip(dataset.sample_ids, dataset.classes, feats):
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", int(c)))
            fh.write(row.tobytes())
    return meta_path, feat_path


def load_features(path: str | Path) -> FeatureSet:
    meta_path, feat_path = _paths(path)
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FeatureFormatError(f"malformed header {meta_path}: {exc}", offset=0) from exc
    required = ("format_version", "dim", "num_records", "class_range", "modality")
    missing = [k for k in required if k not in meta]
    if missing:
        raise FeatureFormatError(f"header {meta_path} lacks fields {missing}", offset=0)
    if meta["format_version"] != FORMAT_VERSION:
        raise FeatureFormatError(f"unsupported format_version {meta['format_version']}", offset=0)
    dim, count = int(meta["dim"]), int(meta["num_records"])
    if dim <= 0 or count < 0:
        raise FeatureFormatError(f"invalid dim/num_records in {meta_path}", offset=0)
    class_range = tuple(meta["class_range"]) if meta["class_range"] else None
    buf = feat_path.read_bytes()
    pos = 0
    ids, classes = [], []
    feats = np.empty((count, dim), dtype="<f4")
    row_bytes = 4 * dim
    for row in range(count):
        if pos + 4 > len(buf):
            raise FeatureFormatError("truncated payload (id length)", offset=pos, row=row)
        (n_id,) = struct.unpack_from("<I", buf, pos)
        if pos + 4 + n_id + 4 + row_bytes > len(buf):
            raise FeatureFormatError(
                f"record needs {4 + n_id + 4 + row_bytes} bytes, {len(buf) - pos} remain "
                f"(declared dim {dim})", offset=pos, row=row)
        try:
            sid = buf[pos + 4:pos + 4 + n_id].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FeatureFormatError("sample id is not valid UTF-8", offset=pos + 4, row=row) from exc
        pos += 4 + n_id
        (c,) = struct.unpack_from("<I", buf, pos)
        if class_range and not class_range[0] <= c <= class_range[1]:
            raise FeatureFormatError(f"class {c} outside declared range {list(class_range)}",
                                     offset=pos, row=row)
        pos += 4
        feats[row] = np.frombuffer(buf, dtype="<f4", count=dim, offset=pos)
        pos += row_bytes
        ids.append(sid)
        classes.append(c)
    if pos != len(buf):
        raise FeatureFormatError(
            f"{len(buf) - pos} trailing bytes after {count} records (dim mismatch?)", offset=pos)
    return FeatureSet(feats.astype(np.float64), np.asarray(classes, dtype=np.int64), ids,
                      meta["modality"], class_range, meta.get("seed_provenance"))


def export_csv(dataset: FeatureSet, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "class"] + [f"f{i}" for i in range(dataset.dim)])
        for sid, c, row in zip(dataset.sample_ids, dataset.classes, dataset.features.astype("<f4")):
            writer.writerow([sid, int(c)] + [repr(float(v)) for v in row])
    return path


def import_csv(path: str | Path, modality: str = "MRI",
               class_range: tuple[int, int] | None = None) -> FeatureSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["sample_id", "class"]:
            raise FeatureFormatError("CSV header must start with sample_id,class", row=0)
        dim = len(header) - 2
        if header[2:] != [f"f{i}" for i in range(dim)]:
            raise FeatureFormatError("CSV feature columns must be f0..f{D-1}", row=0)
        ids, classes, rows = [], [], []
        for lineno, rec in enumerate(reader, start=1):
            if len(rec) != dim + 2:
                raise FeatureFormatError(f"expected {dim} feature values, got {len(rec) - 2}",
                                         row=lineno)
            try:
                classes.append(int(rec[1]))
                rows.append([float(v) for v in rec[2:]])
            except ValueError as exc:
                raise FeatureFormatError(f"unparseable value: {exc}", row=lineno) from exc
            ids.append(rec[0])
    feats = np.asarray(rows, dtype=np.float32).astype(np.float64).reshape(len(rows), dim)
    return FeatureSet(feats, np.asarray(classes, dtype=np.int64), ids, modality, class_range)
