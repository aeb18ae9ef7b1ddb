"""Labeled click-histogram datasets for classifier training and evaluation.

Training data: per family, mean photon numbers drawn uniformly from a
range, one histogram of m shots each, shuffled and split 80/20 into
train and validation sets. Evaluation data: an even, inclusive sweep of
mean photon numbers with one histogram per grid point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sampling import (
    ClickHistogram,
    SampleSpec,
    derive_stream,
    histogram_header,
    histogram_row,
    sample_histogram,
)
from .states import DetectorConfig, click_distribution, params_for_mean

DATASET_FORMAT = "clickstats-dataset v1"

CLASSICAL_FAMILIES = frozenset({"coherent", "thermal"})

TRAINING_FAMILIES = ("coherent", "thermal", "fock", "squeezed")

# Reserved stream ids; per-row histogram streams are the global row index,
# so the auxiliary draws must live far outside any realistic row count.
_NBAR_STREAM_BASE = 2**40
_SPLIT_STREAM = 2**40 - 1

TRAIN_FRACTION = 0.8


class DatasetFormatError(ValueError):
    """Raised when a dataset file fails schema validation."""


@dataclass(frozen=True)
class DatasetRow:
    """One labeled histogram with its provenance."""

    hist: ClickHistogram
    label: int
    family: str
    nbar: float
    stream_id: int


@dataclass(frozen=True)
class LabeledDataset:
    """Rows plus the split they belong to (train, validation or eval)."""

    rows: tuple
    split: str

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.split not in ("train", "validation", "eval"):
            raise ValueError(f"unknown split tag {self.split!r}")

    def __len__(self):
        return len(self.rows)

    def features(self):
        """(rows, N+1) array of relative click frequencies."""
        if not self.rows:
            n_cols = 0
        else:
            n_cols = self.rows[0].hist.config.n_detectors + 1
        return np.array([row.hist.freqs for row in self.rows]).reshape(len(self.rows), n_cols)

    def labels(self):
        """Float vector of 0/1 class labels."""
        return np.array([row.label for row in self.rows], dtype=float)


def family_label(family):
    """0 for classical families (coherent, thermal), 1 otherwise."""
    tag, _ = _resolve_family(family)
    return 0 if tag in CLASSICAL_FAMILIES else 1


def _resolve_family(family):
    """Normalize a family argument to (base tag, photon-addition order).

    Accepts plain tags ("coherent", ..., "even_coherent"), the shorthand
    "npats1"/"npats2", or a ("npats", n) pair.
    """
    if isinstance(family, tuple):
        tag, n = family
        if tag != "npats":
            raise ValueError(f"only npats takes a (tag, n) pair, got {tag!r}")
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"photon-addition order must be a positive integer, got {n}")
        return "npats", int(n)
    if not isinstance(family, str):
        raise ValueError(f"family must be a string or (tag, n) pair, got {family!r}")
    if family.startswith("npats") and family != "npats":
        digits = family[len("npats"):]
        if not digits.isdigit() or int(digits) < 1:
            raise ValueError(f"malformed npats family name {family!r}")
        return "npats", int(digits)
    if family == "npats":
        return "npats", 1
    if family not in ("coherent", "thermal", "fock", "squeezed", "even_coherent"):
        raise ValueError(f"unknown family {family!r}")
    return family, None


def family_name(family):
    """Canonical display name ("npats2" for ("npats", 2), tag otherwise)."""
    tag, n = _resolve_family(family)
    return f"{tag}{n}" if tag == "npats" else tag


def _state_for(tag, n, nbar):
    if tag == "npats":
        return params_for_mean(tag, nbar, n=n)
    return params_for_mean(tag, nbar)


def generate_training_data(
    families=TRAINING_FAMILIES,
    points_per_family=1000,
    nbar_range=(1.0, 16.0),
    sample_size=1000,
    detector=None,
    seed=0,
):
    """Random-n̄ labeled histograms, split 80/20 into (train, validation).

    Every row's histogram comes from its own stream (the global row
    index), n̄ draws use one dedicated stream per family, and the split
    shuffle uses another, so the whole dataset is reproducible from the
    single master seed.
    """
    if not families:
        raise ValueError("families must be nonempty")
    lo, hi = float(nbar_range[0]), float(nbar_range[1])
    if not 0 <= lo <= hi:
        raise ValueError(f"bad nbar range [{lo}, {hi}]")
    detector = detector or DetectorConfig(16, 1.0)

    rows = []
    row_id = 0
    for fam_index, family in enumerate(families):
        tag, n = _resolve_family(family)
        label = family_label(family)
        nbar_rng = derive_stream(seed, _NBAR_STREAM_BASE + fam_index)
        for _ in range(points_per_family):
            nbar = float(nbar_rng.uniform(lo, hi))
            if tag == "npats":
                nbar = max(nbar, float(n))
            dist = click_distribution(_state_for(tag, n, nbar), detector)
            hist = sample_histogram(dist, SampleSpec(sample_size, seed, row_id))
            rows.append(
                DatasetRow(hist=hist, label=label, family=family_name(family),
                           nbar=nbar, stream_id=row_id)
            )
            row_id += 1

    order = derive_stream(seed, _SPLIT_STREAM).permutation(len(rows))
    n_train = round(TRAIN_FRACTION * len(rows))
    shuffled = [rows[i] for i in order]
    return (
        LabeledDataset(rows=shuffled[:n_train], split="train"),
        LabeledDataset(rows=shuffled[n_train:], split="validation"),
    )


def generate_evaluation_set(
    family,
    realizations=1000,
    nbar_range=(1.0, 16.0),
    sample_size=1000,
    detector=None,
    seed=0,
):
    """Even inclusive n̄ sweep with one histogram per grid point.

    For photon-added thermal states the sweep cannot go below the
    addition order n, so the grid is clipped from below at n.
    """
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    tag, n = _resolve_family(family)
    label = family_label(family)
    detector = detector or DetectorConfig(16, 1.0)
    lo, hi = float(nbar_range[0]), float(nbar_range[1])
    if tag == "npats":
        lo = max(lo, float(n))
    grid = np.linspace(lo, hi, realizations) if realizations > 1 else np.array([lo])

    rows = []
    for i, nbar in enumerate(grid):
        dist = click_distribution(_state_for(tag, n, float(nbar)), detector)
        hist = sample_histogram(dist, SampleSpec(sample_size, seed, i))
        rows.append(
            DatasetRow(hist=hist, label=label, family=family_name(family),
                       nbar=float(nbar), stream_id=i)
        )
    return LabeledDataset(rows=rows, split="eval")


def _dataset_header(n_detectors):
    return histogram_header(n_detectors) + ["label", "split"]


def write_dataset(dataset, path):
    """CSV dump with a schema line; exact float round trip via repr."""
    n_detectors = (
        dataset.rows[0].hist.config.n_detectors if dataset.rows else 16
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {DATASET_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(_dataset_header(n_detectors))
        for row in dataset.rows:
            writer.writerow(
                histogram_row(row.hist, row.stream_id, row.family, row.nbar)
                + [str(row.label), dataset.split]
            )


def read_dataset(path):
    """Load a dataset written by write_dataset, re-validating every row."""
    with open(path, encoding="utf-8", newline="") as fh:
        schema = fh.readline().strip()
        if schema != f"# {DATASET_FORMAT}":
            raise DatasetFormatError(f"unexpected schema line {schema!r}")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise DatasetFormatError("dataset file has no header row") from exc
        n_freq = len(header) - 8
        if n_freq < 1 or header != _dataset_header(n_freq - 1):
            raise DatasetFormatError(f"unexpected header {header!r}")

        rows = []
        split = None
        for record in reader:
            if len(record) != len(header):
                raise DatasetFormatError(
                    f"row has {len(record)} fields, expected {len(header)}"
                )
            try:
                stream_id = int(record[0])
                sample_size = int(record[1])
                n_detectors = int(record[2])
                eta = float(record[3])
                family = record[4]
                nbar = float(record[5])
                freqs = np.array([float(v) for v in record[6 : 6 + n_freq]])
                label = int(record[6 + n_freq])
                row_split = record[7 + n_freq]
            except ValueError as exc:
                raise DatasetFormatError(f"malformed row: {exc}") from exc
            if n_detectors != n_freq - 1:
                raise DatasetFormatError(
                    f"row says {n_detectors} detectors but file has {n_freq} bins"
                )
            if label not in (0, 1):
                raise DatasetFormatError(f"label must be 0 or 1, got {label}")
            if split is None:
                split = row_split
            elif row_split != split:
                raise DatasetFormatError(
                    f"mixed split tags in one file: {split!r} vs {row_split!r}"
                )
            config = DetectorConfig(n_detectors, eta)
            try:
                hist = ClickHistogram.from_freqs(freqs, sample_size, config)
            except ValueError as exc:
                raise DatasetFormatError(f"invalid histogram row: {exc}") from exc
            _resolve_family(family)  # reject unknown family names
            rows.append(
                DatasetRow(hist=hist, label=label, family=family,
                           nbar=nbar, stream_id=stream_id)
            )
    return LabeledDataset(rows=rows, split=split if split is not None else "train")
