"""Result containers shared by the estimators and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class CorrelationReport:
    """Covariance, the two variances, and their ratio, plus provenance.

    ``corr`` is reported raw (never clamped); ``out_of_range`` flags the
    estimator landing slightly outside [-1, 1].  ``cross_subsampled``
    flags the O(M^2) cross sums having been subsampled for very large M.
    """

    cov: float
    var1: float
    var2: float
    corr: float | None
    method: str
    m: int
    r: int = 0
    seed: int | None = None
    kernel: str = ""
    runtime_ms: float = 0.0
    degenerate: bool = False
    out_of_range: bool = False
    cross_subsampled: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["corr"] is not None and not math.isfinite(d["corr"]):
            d["corr"] = None
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationReport":
        return cls(**d)


def finish_report(cov, var1, var2, *, method, m, r=0, seed=None, kernel="",
                  runtime_ms=0.0, cross_subsampled=False) -> CorrelationReport:
    """Assemble a report from raw moment estimates, flagging pathologies."""
    cov, var1, var2 = float(cov), float(var1), float(var2)
    degenerate = not (var1 > 0 and var2 > 0)
    corr = None if degenerate else cov / math.sqrt(var1 * var2)
    return CorrelationReport(
        cov=cov,
        var1=var1,
        var2=var2,
        corr=corr,
        method=method,
        m=int(m),
        r=int(r),
        seed=None if seed is None else int(seed),
        kernel=kernel,
        runtime_ms=float(runtime_ms),
        degenerate=bool(degenerate),
        out_of_range=bool(corr is not None and abs(corr) > 1.0),
        cross_subsampled=bool(cross_subsampled),
    )


@dataclass
class CltReport:
    """Log-log regression of estimator variance against the number of blocks."""

    m_grid: list[int]
    variances: list[float]
    slope: float | None
    intercept: float | None
    residuals: list[float] = field(default_factory=list)
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_variances(cls, m_grid, variances) -> "CltReport":
        m_grid = [int(m) for m in m_grid]
        variances = [float(v) for v in variances]
        if any(v <= 0 for v in variances):
            return cls(m_grid=m_grid, variances=variances, slope=None,
                       intercept=None, degenerate=True)
        logm = np.log(np.asarray(m_grid, dtype=float))
        logv = np.log(np.asarray(variances))
        slope, intercept = np.polyfit(logm, logv, 1)
        fitted = slope * logm + intercept
        return cls(
            m_grid=m_grid,
            variances=variances,
            slope=float(slope),
            intercept=float(intercept),
            residuals=[float(x) for x in (logv - fitted)],
        )
