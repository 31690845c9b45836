"""File formats: grouped observations, block samples, measures, reports.

Grouped data is the two-column CSV ``group,value`` with group in {1, 2};
blocks use columns ``x11,x21,x12,x22`` (coordinates get ``_0``, ``_1``
suffixes beyond one dimension); measures use ``atom_0..atom_{d-1},weight``.
"""

from __future__ import annotations

import json

import numpy as np
import pandas as pd

from .errors import InputError
from .measures import DiscreteMeasure
from .moments import BlockSet
from .reporting import CorrelationReport


def write_grouped_csv(path, x1, x2):
    frame = pd.DataFrame({
        "group": [1] * len(x1) + [2] * len(x2),
        "value": list(np.asarray(x1, dtype=float)) + list(np.asarray(x2, dtype=float)),
    })
    frame.to_csv(path, index=False)


def read_grouped_csv(path):
    try:
        frame = pd.read_csv(path)
    except (FileNotFoundError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"cannot read grouped data from {path}: {exc}") from exc
    if not {"group", "value"}.issubset(frame.columns):
        raise InputError(f"{path}: grouped data needs 'group' and 'value' columns")
    groups = set(frame["group"].unique())
    if not groups.issubset({1, 2}):
        raise InputError(f"{path}: group column must contain only 1 and 2")
    x1 = frame.loc[frame["group"] == 1, "value"].to_numpy(dtype=float)
    x2 = frame.loc[frame["group"] == 2, "value"].to_numpy(dtype=float)
    return x1, x2


_BLOCK_COLS = ("x11", "x21", "x12", "x22")


def write_blocks_csv(path, blocks: BlockSet):
    data = {}
    for name in _BLOCK_COLS:
        col = np.asarray(getattr(blocks, name))
        if col.ndim == 1:
            data[name] = col
        else:
            for d in range(col.shape[1]):
                data[f"{name}_{d}"] = col[:, d]
    pd.DataFrame(data).to_csv(path, index=False)


def read_blocks_csv(path) -> BlockSet:
    frame = pd.read_csv(path)
    cols = {}
    for name in _BLOCK_COLS:
        if name in frame.columns:
            cols[name] = frame[name].to_numpy(dtype=float)
        else:
            suffixed = sorted(c for c in frame.columns if c.startswith(name + "_"))
            if not suffixed:
                raise InputError(f"{path}: missing block column {name}")
            cols[name] = frame[suffixed].to_numpy(dtype=float)
    return BlockSet(**cols)


def write_measure_csv(path, mu: DiscreteMeasure):
    data = {f"atom_{d}": mu.atoms[:, d] for d in range(mu.dim)}
    data["weight"] = mu.weights
    pd.DataFrame(data).to_csv(path, index=False)


def read_measure_csv(path) -> DiscreteMeasure:
    frame = pd.read_csv(path)
    atom_cols = sorted(c for c in frame.columns if c.startswith("atom_"))
    if not atom_cols or "weight" not in frame.columns:
        raise InputError(f"{path}: measure CSV needs atom_* and weight columns")
    atoms = frame[atom_cols].to_numpy(dtype=float)
    weights = frame["weight"].to_numpy(dtype=float)
    return DiscreteMeasure(atoms, weights, total_mass=float(weights.sum()))


def write_report_json(path, report: CorrelationReport):
    with open(path, "w") as fh:
        fh.write(report.to_json(indent=2))
        fh.write("\n")


def read_report_json(path) -> CorrelationReport:
    with open(path) as fh:
        return CorrelationReport.from_dict(json.load(fh))
