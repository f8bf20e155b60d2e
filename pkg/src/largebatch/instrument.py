"""Per-step, per-layer measurements and their CSV/JSON export."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields, astuple
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .optim import DEFAULT, OptimizerConfig, approx_radii
from .tensor import Network


@dataclass
class StatsRecord:
    step: int
    epoch: int
    layer: int
    batch_size: int
    lr: float
    mean_abs_grad: float
    mean_abs_param_stride: float
    normalized_param_stride: float
    mean_loss_stride: float
    normalized_loss_stride: float
    mean_loss: float
    curvature_median: Optional[float]
    curvature_p25: Optional[float]
    curvature_p75: Optional[float]
    survivors: int


FIELDS = [f.name for f in fields(StatsRecord)]
_INT_FIELDS = {"step", "epoch", "layer", "batch_size", "survivors"}


class CurvatureProfile(NamedTuple):
    median: Optional[float]
    p25: Optional[float]
    p75: Optional[float]
    excluded: int
    size: int


def _order_stat(sorted_values, q):
    # nearest-rank on the lower side; q=0.5 gives the lower median
    return float(sorted_values[int(math.floor(q * (sorted_values.size - 1)))])


def curvature_profile(net: Network, cfg: OptimizerConfig = DEFAULT):
    """Median and quartiles of ``|w/g|`` per layer, guarded entries excluded."""
    out = []
    for layer in net.layers:
        radii, guarded = approx_radii(layer.params(), layer.grads(), cfg)
        kept = np.sort(radii[~guarded])
        if kept.size == 0:
            out.append(CurvatureProfile(None, None, None, int(radii.size), int(radii.size)))
            continue
        out.append(CurvatureProfile(
            _order_stat(kept, 0.5), _order_stat(kept, 0.25), _order_stat(kept, 0.75),
            int(guarded.sum()), int(radii.size),
        ))
    return out


def measure_step(net: Network, lr, step=0, epoch=0, batch_size=0, survivors=None,
                 mean_loss=float("nan"), updates=None, cfg: OptimizerConfig = DEFAULT):
    """One :class:`StatsRecord` per layer for the gradients currently stored.

    ``lr`` is a scalar or one value per layer. ``updates`` are the update
    vectors the optimizer applied this step; without them the parameter
    stride is taken to be ``lr * |g|``, i.e. a plain SGD step.
    """
    lrs = list(lr) if np.ndim(lr) else [float(lr)] * len(net.layers)
    if len(lrs) != len(net.layers):
        raise ValueError("need one lr per layer")
    survivors = batch_size if survivors is None else survivors
    profile = curvature_profile(net, cfg)
    records = []
    for k, layer in enumerate(net.layers):
        if not layer.has_grad:
            raise ValueError(f"layer {k} has no gradients; run backward() first")
        g = layer.grads()
        layer_lr = float(lrs[k])
        mean_abs_grad = float(np.sum(np.abs(g)) / g.size)
        mean_sq_grad = float(np.mean(g * g))
        if updates is None:
            stride = layer_lr * mean_abs_grad
        else:
            stride = float(np.sum(np.abs(updates[k])) / g.size)
        prof = profile[k]
        records.append(StatsRecord(
            step=int(step), epoch=int(epoch), layer=k, batch_size=int(batch_size), lr=layer_lr,
            mean_abs_grad=mean_abs_grad,
            mean_abs_param_stride=stride,
            normalized_param_stride=stride / layer_lr if layer_lr > 0 else 0.0,
            mean_loss_stride=layer_lr * mean_sq_grad,
            normalized_loss_stride=mean_sq_grad,
            mean_loss=float(mean_loss),
            curvature_median=prof.median, curvature_p25=prof.p25, curvature_p75=prof.p75,
            survivors=int(survivors),
        ))
    return records


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(records, path):
    path = Path(path)
    try:
        fh = path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIELDS)
        for rec in records:
            writer.writerow([_fmt(v) for v in astuple(rec)])
    return path


def parse_csv(path):
    """Inverse of :func:`export_csv`."""
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            values = {}
            for name in FIELDS:
                cell = row[name]
                if name in _INT_FIELDS:
                    values[name] = int(cell)
                else:
                    values[name] = None if cell == "" else float(cell)
            records.append(StatsRecord(**values))
    return records


def write_json(obj, path):
    path = Path(path)
    with path.open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
