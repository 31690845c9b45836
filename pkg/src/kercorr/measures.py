"""Discrete measures and the kernel integrals built on them.

A :class:`DiscreteMeasure` is a finite weighted atom set.  ``total_mass``
is carried explicitly so unnormalised intermediates (pooled realisations,
convex pieces before normalisation) never masquerade as probabilities.
All operations are pure; measures are immutable after construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, InputError
from .kernels import Kernel, SetwiseKernel, as_points
from .reporting import CorrelationReport, finish_report

_MASS_RTOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: np.ndarray
    weights: np.ndarray
    total_mass: float = 1.0

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        if atoms.ndim != 2:
            raise InputError("atoms must form an (n, d) array")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(atoms),):
            raise InputError("weights must align with atoms")
        if np.any(weights < 0):
            raise InputError("weights must be nonnegative")
        s = float(weights.sum())
        scale = max(abs(self.total_mass), 1.0)
        if abs(s - self.total_mass) > _MASS_RTOL * scale:
            raise InputError(
                f"weights sum to {s!r}, not the stated total mass {self.total_mass!r}"
            )
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "total_mass", float(self.total_mass))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= _MASS_RTOL

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        a = np.asarray(x, dtype=float).reshape(1, -1)
        return cls(a, np.ones(1))

    @classmethod
    def empirical(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if len(pts) == 0:
            raise InputError("empirical measure needs at least one point")
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def pooled(cls, measures) -> "DiscreteMeasure":
        """Concatenate atoms, keeping each realisation's weights.

        The result has total mass equal to the summed masses; it is the
        (unnormalised) sum of the inputs, which is exactly the mean
        measure up to a known scalar.
        """
        measures = list(measures)
        atoms = np.concatenate([m.atoms for m in measures])
        weights = np.concatenate([m.weights for m in measures])
        return cls(atoms, weights, total_mass=float(sum(m.total_mass for m in measures)))

    def scaled(self, factor: float) -> "DiscreteMeasure":
        if factor < 0:
            raise InputError("scaling factor must be nonnegative")
        return DiscreteMeasure(self.atoms, self.weights * factor, self.total_mass * factor)


def double_integral(k: Kernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact double sum of k against two discrete measures."""
    if mu.dim != k.dim or nu.dim != k.dim:
        raise InputError("measure dimension does not match the kernel")
    if isinstance(k, SetwiseKernel):
        return k.measure_mass(mu) * k.measure_mass(nu)
    return k.weighted_sum(mu.atoms, mu.weights, nu.atoms, nu.weights)


def diag_integral(k: Kernel, mu: DiscreteMeasure) -> float:
    """sum_a w_a k(x_a, x_a)."""
    if mu.dim != k.dim:
        raise InputError("measure dimension does not match the kernel")
    return float(mu.weights @ k.diag(mu.atoms))


def diag_minus_double(k: Kernel, mu: DiscreteMeasure) -> float:
    """int k(x,x) dmu - iint k dmu dmu for a probability measure mu.

    Equals half the double integral of the squared pseudo-metric, hence
    nonnegative; tiny negative rounding is clamped to zero.
    """
    if not mu.is_probability:
        raise InputError("diag_minus_double is defined for probability measures")
    value = diag_integral(k, mu) - double_integral(k, mu, mu)
    if value < 0:
        if value < -1e-8 * max(1.0, k.bound):
            raise InputError(f"kernel produced a negative spread {value!r}")
        value = 0.0
    return value


def dk2_double_integral(k: Kernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """iint d_k^2(x, y) dmu(x) dnu(y) for probability measures, via the
    expansion into diagonal and cross kernel integrals."""
    return (
        diag_integral(k, mu) * nu.total_mass
        + diag_integral(k, nu) * mu.total_mass
        - 2.0 * double_integral(k, mu, nu)
    )


def mc_discretize(p0_sampler, M: int, rng) -> DiscreteMeasure:
    """Monte-Carlo proxy for an arbitrary sampling distribution: M i.i.d.
    atoms with weight 1/M each."""
    if M < 1:
        raise InputError("mc_discretize needs M >= 1")
    draws = np.asarray(p0_sampler(rng, M), dtype=float)
    if draws.ndim == 1:
        draws = draws.reshape(-1, 1)
    if len(draws) != M:
        raise InputError("sampler returned the wrong number of draws")
    return DiscreteMeasure(draws, np.full(M, 1.0 / M))


def degeneracy_statistic(k: Kernel, points) -> float:
    """Mean squared pseudo-metric over all point pairs, n^-2 sum d_k^2.

    Zero exactly when the sample is indistinguishable under the kernel;
    bounded away from zero is the usable-data condition for posterior
    decay studies.
    """
    pts = as_points(points, k.dim)
    n = len(pts)
    if n < 1:
        raise InputError("degeneracy_statistic needs at least one point")
    mu = DiscreteMeasure(pts, np.full(n, 1.0 / n))
    return max(0.0, dk2_double_integral(k, mu, mu))


def _setwise_masses(k: SetwiseKernel, measures) -> np.ndarray:
    return np.array([k.measure_mass(m) for m in measures])


def moments_from_measure_pairs(k: Kernel, pairs, seed=None) -> CorrelationReport:
    """Moment estimates from sampled pairs of random-measure realisations.

    Uses the unbiased pairing of per-realisation embeddings: the diagonal
    term averages within-realisation double integrals and the cross term
    pools atoms across realisations, so the mean measure never needs a
    density estimate.
    """
    t0 = time.perf_counter()
    pairs = list(pairs)
    T = len(pairs)
    if T < 2:
        raise InputError("moments_from_measure_pairs needs at least 2 pairs")
    for mu, nu in pairs:
        if not (mu.is_probability and nu.is_probability):
            raise InputError("all measures must be probabilities")

    firsts = [p[0] for p in pairs]
    seconds = [p[1] for p in pairs]

    if isinstance(k, SetwiseKernel):
        # indicator reduction: every embedding is the scalar mass of A
        a = _setwise_masses(k, firsts)
        b = _setwise_masses(k, seconds)

        def u_stat(x, y):
            return float(x @ y) / (T - 1) - float(x.sum() * y.sum()) / (T * (T - 1))

        cov = u_stat(a, b)
        var1 = u_stat(a, a)
        var2 = u_stat(b, b)
    else:
        def u_stat(ms_a, ms_b):
            diag = sum(double_integral(k, ma, mb) for ma, mb in zip(ms_a, ms_b))
            pooled_a = DiscreteMeasure.pooled(ms_a)
            pooled_b = DiscreteMeasure.pooled(ms_b)
            cross = double_integral(k, pooled_a, pooled_b)
            return diag / (T - 1) - cross / (T * (T - 1))

        cov = u_stat(firsts, seconds)
        var1 = u_stat(firsts, firsts)
        var2 = u_stat(seconds, seconds)

    runtime_ms = 1000.0 * (time.perf_counter() - t0)
    if not (var1 > 0 and var2 > 0):
        raise DegenerateVarianceError(
            "estimated kernel variance is not positive; the random measure is "
            "deterministic under this kernel"
        )
    return finish_report(cov, var1, var2, method="measure_mc", m=T, seed=seed,
                         kernel=k.text, runtime_ms=runtime_ms)
