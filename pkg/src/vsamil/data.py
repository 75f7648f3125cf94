"""Bag-structured datasets: on-disk formats, converters, splits, scaling.

A bag is an unordered multiset of fixed-dimension instance vectors with a
binary label in {-1, +1}. The canonical on-disk format is JSONL with one
bag per line: ``{"bag_id": ..., "label": ..., "instances": [[...], ...]}``
plus an optional ``"split"`` key. Converters ingest flat CSV
(bag_id, label, f1..fp) and svmlight-style lines
(``label qid:bag_id index:value ...``).
"""

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, DataError

SPLIT_NAMES = {2: ("train", "test"), 3: ("train", "val", "test")}


@dataclass
class Bag:
    bag_id: str
    label: int
    instances: np.ndarray  # (n, p) float64, n >= 1

    def __post_init__(self):
        self.instances = np.ascontiguousarray(self.instances, dtype=np.float64)
        if self.instances.ndim != 2 or self.instances.shape[0] < 1:
            raise DataError(f"bag {self.bag_id!r}: needs a non-empty (n, p) instance matrix")
        if self.label not in (-1, 1):
            raise DataError(f"bag {self.bag_id!r}: label must be -1 or +1, got {self.label}")
        if not np.all(np.isfinite(self.instances)):
            raise DataError(f"bag {self.bag_id!r}: non-finite instance values")

    @property
    def size(self):
        return self.instances.shape[0]

    def __eq__(self, other):
        return (self.bag_id == other.bag_id and self.label == other.label
                and np.array_equal(self.instances, other.instances))


@dataclass
class MilDataset:
    name: str
    feature_dim: int
    bags: list
    split: dict = field(default_factory=dict)  # bag_id -> split name

    def __post_init__(self):
        for bag in self.bags:
            if bag.instances.shape[1] != self.feature_dim:
                raise DataError(
                    f"bag {bag.bag_id!r}: feature dim {bag.instances.shape[1]} "
                    f"!= dataset dim {self.feature_dim}")
        ids = [b.bag_id for b in self.bags]
        if len(set(ids)) != len(ids):
            raise DataError(f"dataset {self.name!r}: duplicate bag ids")
        if self.split:
            missing = set(ids) - set(self.split)
            extra = set(self.split) - set(ids)
            if missing or extra:
                raise DataError(
                    f"dataset {self.name!r}: split does not partition bag ids "
                    f"(missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})")

    def __eq__(self, other):
        return (self.name == other.name and self.feature_dim == other.feature_dim
                and self.split == other.split and self.bags == other.bags)

    def bags_in(self, split_name):
        if not self.split:
            raise DataError(f"dataset {self.name!r} has no split assignment")
        return [b for b in self.bags if self.split[b.bag_id] == split_name]

    def stacked_instances(self, split_name=None):
        """All instances as one (M, p) matrix plus (B+1,) bag offsets and labels."""
        bags = self.bags if split_name is None else self.bags_in(split_name)
        if not bags:
            raise DataError(f"dataset {self.name!r}: split {split_name!r} is empty")
        mats = [b.instances for b in bags]
        offsets = np.zeros(len(bags) + 1, dtype=np.int64)
        np.cumsum([m.shape[0] for m in mats], out=offsets[1:])
        labels = np.array([b.label for b in bags], dtype=np.int64)
        return np.vstack(mats), offsets, labels

    def class_counts(self):
        pos = sum(1 for b in self.bags if b.label == 1)
        return pos, len(self.bags) - pos


def _parse_label(raw, where):
    try:
        value = int(float(raw))
    except (TypeError, ValueError):
        raise DataError(f"{where}: label {raw!r} is not numeric") from None
    if value == 1:
        return 1
    if value in (-1, 0):
        return -1
    raise DataError(f"{where}: label must be one of -1, 0, +1; got {raw!r}")


# ---------------------------------------------------------------------------
# JSONL
# ---------------------------------------------------------------------------

def load_jsonl(path, name=None):
    bags = []
    split = {}
    feature_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:line {lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: invalid JSON ({exc.msg})") from None
            try:
                bag_id = str(record["bag_id"])
                label = record["label"]
                rows = record["instances"]
            except (KeyError, TypeError):
                raise DataError(f"{where}: record needs bag_id, label, instances") from None
            label = _parse_label(label, where)
            if not rows:
                raise DataError(f"{where}: empty bag")
            widths = {len(r) for r in rows}
            if len(widths) != 1:
                raise DataError(f"{where}: instances have mixed dimensions {sorted(widths)}")
            width = widths.pop()
            if feature_dim is None:
                feature_dim = width
            elif width != feature_dim:
                raise DataError(f"{where}: dimension {width} != dataset dimension {feature_dim}")
            try:
                bags.append(Bag(bag_id, label, np.asarray(rows, dtype=np.float64)))
            except DataError as exc:
                raise DataError(f"{where}: {exc}") from None
            if "split" in record:
                split[bag_id] = str(record["split"])
    if not bags:
        raise DataError(f"{path}: no bags found")
    if split and len(split) != len(bags):
        raise DataError(f"{path}: split key present on some lines but not all")
    return MilDataset(name or str(path), feature_dim, bags, split)


def save_jsonl(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        for bag in dataset.bags:
            record = {"bag_id": bag.bag_id, "label": bag.label,
                      "instances": bag.instances.tolist()}
            if dataset.split:
                record["split"] = dataset.split[bag.bag_id]
            fh.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# Converters
# ---------------------------------------------------------------------------

def _column_index(header, column, role):
    if isinstance(column, int) or (isinstance(column, str) and column.lstrip("-").isdigit()):
        idx = int(column)
        if not 0 <= idx < len(header):
            raise ConfigError(f"{role} column index {idx} out of range for {len(header)} columns")
        return idx
    try:
        return header.index(column)
    except ValueError:
        raise ConfigError(f"{role} column {column!r} not in header {header[:8]}...") from None


def convert_csv(path, bag_column="bag_id", label_column="label",
                drop_columns=(), name=None):
    """Group flat CSV rows into bags keyed by the bag column."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        bag_idx = _column_index(header, bag_column, "bag")
        label_idx = _column_index(header, label_column, "label")
        drop_idx = {_column_index(header, c, "drop") for c in drop_columns}
        drop_idx.update((bag_idx, label_idx))
        feat_idx = [i for i in range(len(header)) if i not in drop_idx]
        if not feat_idx:
            raise DataError(f"{path}: no feature columns left")

        order = []
        rows_by_bag = {}
        labels_by_bag = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:line {lineno}"
            if len(row) != len(header):
                raise DataError(f"{where}: {len(row)} fields, header has {len(header)}")
            bag_id = row[bag_idx].strip()
            label = _parse_label(row[label_idx], where)
            try:
                feats = [float(row[i]) for i in feat_idx]
            except ValueError:
                raise DataError(f"{where}: non-numeric feature value") from None
            if bag_id not in rows_by_bag:
                order.append(bag_id)
                rows_by_bag[bag_id] = []
                labels_by_bag[bag_id] = label
            elif labels_by_bag[bag_id] != label:
                raise DataError(
                    f"{where}: bag {bag_id!r} has conflicting labels "
                    f"{labels_by_bag[bag_id]} and {label}")
            rows_by_bag[bag_id].append(feats)

    if not order:
        raise DataError(f"{path}: no data rows")
    bags = [Bag(bid, labels_by_bag[bid], np.asarray(rows_by_bag[bid])) for bid in order]
    return MilDataset(name or str(path), len(feat_idx), bags)


def convert_svmlight(path, name=None):
    """Parse ``label qid:bag_id index:value ...`` lines (1-based indices)."""
    order = []
    rows_by_bag = {}
    labels_by_bag = {}
    max_index = 0
    parsed = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:line {lineno}"
            parts = line.split()
            if len(parts) < 2 or not parts[1].startswith("qid:"):
                raise DataError(f"{where}: expected 'label qid:bag_id index:value ...'")
            label = _parse_label(parts[0], where)
            bag_id = parts[1][4:]
            pairs = []
            for tok in parts[2:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataError(f"{where}: bad feature token {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{where}: feature indices are 1-based, got {idx}")
                pairs.append((idx, val))
                max_index = max(max_index, idx)
            parsed.append((where, bag_id, label, pairs))

    if not parsed:
        raise DataError(f"{path}: no data rows")
    for where, bag_id, label, pairs in parsed:
        row = np.zeros(max_index)
        for idx, val in pairs:
            row[idx - 1] = val
        if bag_id not in rows_by_bag:
            order.append(bag_id)
            rows_by_bag[bag_id] = []
            labels_by_bag[bag_id] = label
        elif labels_by_bag[bag_id] != label:
            raise DataError(f"{where}: bag {bag_id!r} has conflicting labels")
        rows_by_bag[bag_id].append(row)
    bags = [Bag(bid, labels_by_bag[bid], np.asarray(rows_by_bag[bid])) for bid in order]
    return MilDataset(name or str(path), max_index, bags)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def assign_splits(dataset, fractions, seed):
    """Stratified, seed-deterministic split; returns a new dataset.

    Per class, bag counts follow the fractions with the remainder going to
    the largest fractional parts, so e.g. 10+10 bags at (0.7, 0.15, 0.15)
    put exactly 7 of each class in train.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) not in SPLIT_NAMES:
        raise ConfigError(f"expected 2 or 3 split fractions, got {len(fractions)}")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be positive and sum to 1, got {fractions}")
    names = SPLIT_NAMES[len(fractions)]

    rng = np.random.default_rng(seed)
    assignment = {}
    for label in (1, -1):
        ids = [b.bag_id for b in dataset.bags if b.label == label]
        if len(ids) < len(fractions):
            raise DataError(
                f"class {label:+d} has {len(ids)} bags, fewer than {len(fractions)} splits")
        counts = _allocate(len(ids), fractions)
        perm = rng.permutation(len(ids))
        cursor = 0
        for split_name, count in zip(names, counts):
            for j in perm[cursor:cursor + count]:
                assignment[ids[j]] = split_name
            cursor += count
    return replace(dataset, split=assignment)


def _allocate(n, fractions):
    raw = [f * n for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    # every split gets at least one bag before remainders are handed out
    for i, c in enumerate(counts):
        if c == 0:
            counts[i] = 1
    while sum(counts) > n:
        counts[int(np.argmax(counts))] -= 1
    remainders = [r - np.floor(r) for r in raw]
    for _ in range(n - sum(counts)):
        i = int(np.argmax(remainders))
        counts[i] += 1
        remainders[i] = -1.0
    return counts


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

@dataclass
class Normalizer:
    mean: np.ndarray
    scale: np.ndarray  # reciprocal std, zeroed where the feature is constant

    STD_FLOOR = 1e-8

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) * self.scale

    def to_json(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["mean"]), np.asarray(doc["scale"]))


def fit_normalizer(dataset, split_name="train"):
    """Per-feature standardization fitted on one split's instances."""
    mat, _, _ = dataset.stacked_instances(split_name)
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)
    scale = np.where(std >= Normalizer.STD_FLOOR, 1.0 / np.where(std > 0, std, 1.0), 0.0)
    return Normalizer(mean, scale)


def apply_normalizer(normalizer, dataset):
    """Transform every bag in every split with the same fitted statistics."""
    bags = [Bag(b.bag_id, b.label, normalizer.transform(b.instances)) for b in dataset.bags]
    return replace(dataset, bags=bags)
