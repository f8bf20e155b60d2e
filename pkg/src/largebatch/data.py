"""Datasets, batching, the small-loss filter and batch-size/LR schedules."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import Batch, as_tensor


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        inputs = as_tensor(self.inputs, "inputs")
        targets = as_tensor(self.targets, "targets")
        if inputs.shape[0] < 1:
            raise ValueError("dataset must have at least one sample")
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(
                f"inputs have {inputs.shape[0]} rows but targets have {targets.shape[0]}"
            )
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.targets.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    def full_batch(self) -> Batch:
        return Batch(self.inputs, self.targets, list(range(len(self))))


def one_hot(labels, n_classes) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


TEACHER_ACTIVATIONS = {"square": np.square, "tanh": np.tanh}


def gen_teacher_dataset(seed, n_samples, input_dim, n_classes, hidden=None,
                        activation="square", max_tries=50) -> Dataset:
    """Gaussian inputs labelled by the argmax of a random one-hidden-layer teacher.

    With the default ``square`` activation the labels are even functions of
    the input, so at a symmetric initialisation the expected first-layer
    gradient is zero and batch gradients are dominated by sampling noise.
    The teacher is re-drawn (deterministically) until every class appears.
    """
    if activation not in TEACHER_ACTIVATIONS:
        raise ValueError(f"unknown teacher activation {activation!r}")
    act = TEACHER_ACTIVATIONS[activation]
    if n_classes < 2 or n_samples < n_classes:
        raise ValueError("need n_samples >= n_classes >= 2")
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    hidden = hidden or 2 * input_dim
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, input_dim))
    for _ in range(max_tries):
        w1 = rng.standard_normal((input_dim, hidden)) / np.sqrt(input_dim)
        w2 = rng.standard_normal((hidden, n_classes)) / np.sqrt(hidden)
        labels = np.argmax(act(x @ w1) @ w2, axis=1)
        if np.unique(labels).size == n_classes:
            return Dataset(x, one_hot(labels, n_classes), f"teacher-s{seed}")
    raise ValueError(
        f"could not cover all {n_classes} classes with {n_samples} samples after {max_tries} teachers"
    )


def load_csv_dataset(path) -> Dataset:
    """Read ``x0,...,x{d-1},label`` rows; labels become one-hot columns."""
    path = Path(path)
    rows, labels = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        if d < 1 or header[-1] != "label" or header[:-1] != [f"x{i}" for i in range(d)]:
            raise ValueError(f"{path}:1: header must be x0,...,x{{d-1}},label")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                values = [float(cell) for cell in row[:-1]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
            if not all(math.isfinite(v) for v in values):
                raise ValueError(f"{path}:{lineno}: non-finite feature value")
            try:
                label = int(row[-1].strip())
            except ValueError:
                raise ValueError(f"{path}:{lineno}: label {row[-1]!r} is not an integer") from None
            if label < 0:
                raise ValueError(f"{path}:{lineno}: negative label {label}")
            rows.append(values)
            labels.append(label)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    n_classes = max(2, max(labels) + 1)
    return Dataset(np.array(rows), one_hot(labels, n_classes), path.stem)


def export_csv_dataset(dataset: Dataset, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(dataset.input_dim)] + ["label"])
        for x, label in zip(dataset.inputs, dataset.labels):
            # repr keeps the full double precision
            writer.writerow([repr(float(v)) for v in x] + [int(label)])
    return path


class Batcher:
    """Draws batches without replacement; each epoch is a fresh permutation.

    A batch never straddles two epochs, so the final batch of an epoch may be
    short when ``batch_size`` does not divide the dataset size.
    """

    def __init__(self, dataset: Dataset, seed=0):
        self.dataset = dataset
        self.rng = np.random.default_rng(seed)
        self.epoch = -1
        self._order = np.empty(0, dtype=np.int64)
        self._pos = 0

    def _new_epoch(self):
        self.epoch += 1
        self._order = self.rng.permutation(len(self.dataset))
        self._pos = 0

    @property
    def epoch_done(self) -> bool:
        return self._pos >= self._order.size

    def next_batch(self, batch_size) -> Batch:
        n = len(self.dataset)
        if not 1 <= batch_size <= n:
            raise ValueError(f"batch_size must be in [1, {n}], got {batch_size}")
        if self.epoch_done:
            self._new_epoch()
        ids = self._order[self._pos:self._pos + batch_size]
        self._pos += ids.size
        return Batch(self.dataset.inputs[ids], self.dataset.targets[ids], ids.tolist())

    def epoch_batches(self, batch_size):
        """Yield the batches of one complete epoch."""
        if not self.epoch_done:
            # drop the remainder of a partially consumed epoch
            self._pos = self._order.size
        while True:
            yield self.next_batch(batch_size)
            if self.epoch_done:
                return


def discard_small_loss(batch: Batch, per_sample_losses, ratio) -> Batch:
    """Keep the ceil((1 - ratio) * n) highest-loss samples, in batch order.

    Among equal losses the sample with the lower id survives.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"discard ratio must be in [0, 1), got {ratio}")
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    n = len(batch)
    if losses.shape != (n,):
        raise ValueError(f"expected {n} losses, got {losses.shape}")
    keep = math.ceil((1.0 - ratio) * n - 1e-9)
    if keep >= n:
        return batch
    ids = np.asarray(batch.sample_ids)
    # lexsort: last key is primary -> descending loss, then ascending id
    ranked = np.lexsort((ids, -losses))
    rows = np.sort(ranked[:keep])
    return batch.subset(rows.tolist())


@dataclass(frozen=True)
class DiscardPolicy:
    ratio: float
    start_epoch: int = 0
    stop_epoch: int | None = None  # exclusive; None means forever

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"discard ratio must be in [0, 1), got {self.ratio}")
        if self.start_epoch < 0 or (self.stop_epoch is not None and self.stop_epoch < self.start_epoch):
            raise ValueError("invalid discard epoch range")

    def active(self, epoch) -> bool:
        return epoch >= self.start_epoch and (self.stop_epoch is None or epoch < self.stop_epoch)


@dataclass(frozen=True)
class ScheduleSpec:
    phases: tuple  # ((start_epoch, batch_size, lr), ...)

    def __post_init__(self):
        phases = tuple((int(s), int(b), float(lr)) for s, b, lr in self.phases)
        if not phases or phases[0][0] != 0:
            raise ValueError("schedule must start with a phase at epoch 0")
        for (s0, _, _), (s1, _, _) in zip(phases, phases[1:]):
            if s1 <= s0:
                raise ValueError("phase start epochs must be strictly increasing")
        for _, b, lr in phases:
            if b < 1 or not lr > 0:
                raise ValueError(f"invalid phase batch_size={b} lr={lr}")
        object.__setattr__(self, "phases", phases)

    @classmethod
    def constant(cls, batch_size, lr):
        return cls(((0, batch_size, lr),))


def schedule_lookup(schedule: ScheduleSpec, epoch):
    """``(batch_size, lr)`` of the last phase starting at or before ``epoch``."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    current = schedule.phases[0]
    for phase in schedule.phases[1:]:
        if phase[0] > epoch:
            break
        current = phase
    return current[1], current[2]
