"""Bounded symmetric positive-definite kernels on R^d.

Every kernel exposes the same small surface: scalar evaluation, Gram
blocks, elementwise (paired) evaluation, the induced squared pseudo-metric

    d2(x, y) = k(x, x) - 2 k(x, y) + k(y, y),

and memory-safe weighted double sums.  A kernel object is immutable after
construction and safe to share across workers.  The upper bound ``bound``
is fixed at construction so downstream checks never re-derive it.

Kernels with a finite-dimensional feature map (linear, set-wise) expose it
through :meth:`Kernel.feature_map`, which lets the correlation estimator
collapse its O(M^2) cross sums to O(M) without changing the value.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# Largest number of kernel evaluations materialised at once by the
# chunked reductions (~128 MB of float64 intermediates).
_CHUNK_ELEMENTS = 2**24


def as_points(x, dim: int) -> np.ndarray:
    """Coerce scalars / flat arrays / (n, d) arrays to an (n, d) float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim == 1 else a.reshape(1, -1)
    if a.ndim != 2 or a.shape[1] != dim:
        raise InputError(f"expected points in R^{dim}, got array of shape {np.shape(x)}")
    return a


@dataclass(frozen=True)
class Kernel:
    """Base class; subclasses implement :meth:`gram` on (n, d) arrays."""

    dim: int = 1

    # property-table metadata (continuity, injectivity, characteristic,
    # c0-universal); overridden per subclass
    continuous = True
    injective = True
    characteristic = True
    c0_universal = True

    @property
    def bound(self) -> float:
        raise NotImplementedError

    @property
    def text(self) -> str:
        raise NotImplementedError

    def gram(self, X, Y) -> np.ndarray:
        """Full (n, m) Gram block; inputs are normalised internally."""
        raise NotImplementedError

    def eval(self, x, y) -> float:
        """k(x, y) for a single pair of points."""
        return float(self.gram(as_points(x, self.dim), as_points(y, self.dim))[0, 0])

    def elementwise(self, X, Y) -> np.ndarray:
        """k(x_i, y_i) along aligned rows of X and Y."""
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        if len(X) != len(Y):
            raise InputError("elementwise evaluation needs equally many points")
        out = np.empty(len(X))
        step = max(1, _CHUNK_ELEMENTS // max(1, self.dim))
        for i in range(0, len(X), step):
            out[i : i + step] = self._elementwise(X[i : i + step], Y[i : i + step])
        return out

    def _elementwise(self, X, Y) -> np.ndarray:
        # generic fallback: diagonal of the Gram block, computed pointwise
        return np.array([self.gram(X[i : i + 1], Y[i : i + 1])[0, 0] for i in range(len(X))])

    def diag(self, X) -> np.ndarray:
        """k(x, x) for each row of X."""
        return self.elementwise(X, X)

    def dk2(self, x, y) -> float:
        """Squared pseudo-metric induced by the kernel; nonnegative."""
        return float(self.dk2_gram(as_points(x, self.dim), as_points(y, self.dim))[0, 0])

    def dk2_gram(self, X, Y) -> np.ndarray:
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        return self.diag(X)[:, None] - 2.0 * self.gram(X, Y) + self.diag(Y)[None, :]

    def weighted_sum(self, X, wx, Y, wy) -> float:
        """sum_{a,b} wx_a wy_b k(x_a, y_b), chunked over both axes.

        Kernels with a finite feature map collapse the double sum to an
        inner product of weighted feature sums (identical value, linear
        cost)."""
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        wx = np.asarray(wx, dtype=float)
        wy = np.asarray(wy, dtype=float)
        if wx.shape != (len(X),) or wy.shape != (len(Y),):
            raise InputError("weights must align with atoms")
        fx = self.feature_map(X)
        if fx is not None:
            fy = self.feature_map(Y)
            return float((wx @ fx) @ (wy @ fy))
        step = max(1, _CHUNK_ELEMENTS // max(1, len(Y)))
        total = 0.0
        for i in range(0, len(X), step):
            block = self.gram(X[i : i + step], Y)
            total += float(wx[i : i + step] @ (block @ wy))
        return total

    def cross_sum(self, X, Y) -> float:
        """sum_{a,b} k(x_a, y_b) over all pairs."""
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        return self.weighted_sum(X, np.ones(len(X)), Y, np.ones(len(Y)))

    def feature_map(self, X):
        """(n, p) feature matrix with k(x, y) = <f(x), f(y)>, or None."""
        return None


def _sqdist(X, Y) -> np.ndarray:
    d = X[:, None, :] - Y[None, :, :]
    return np.einsum("nmd,nmd->nm", d, d)


@dataclass(frozen=True)
class GaussianKernel(Kernel):
    """exp(-||x - y||^2 / (2 sigma^2)); translation invariant, bound 1."""

    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise InputError("gaussian kernel needs sigma > 0")

    @property
    def bound(self) -> float:
        return 1.0

    @property
    def text(self) -> str:
        return f"gaussian:sigma={self.sigma:g}"

    def gram(self, X, Y):
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        return np.exp(_sqdist(X, Y) / (-2.0 * self.sigma**2))

    def _elementwise(self, X, Y):
        d = X - Y
        return np.exp(np.einsum("nd,nd->n", d, d) / (-2.0 * self.sigma**2))

    def diag(self, X):
        return np.ones(len(as_points(X, self.dim)))


@dataclass(frozen=True)
class LaplaceKernel(Kernel):
    """exp(-||x - y||_1 / beta); translation invariant, bound 1."""

    beta: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise InputError("laplace kernel needs beta > 0")

    @property
    def bound(self) -> float:
        return 1.0

    @property
    def text(self) -> str:
        return f"laplace:beta={self.beta:g}"

    def gram(self, X, Y):
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        l1 = np.abs(X[:, None, :] - Y[None, :, :]).sum(axis=2)
        return np.exp(-l1 / self.beta)

    def _elementwise(self, X, Y):
        return np.exp(-np.abs(X - Y).sum(axis=1) / self.beta)

    def diag(self, X):
        return np.ones(len(as_points(X, self.dim)))


@dataclass(frozen=True)
class LinearKernel(Kernel):
    """<x, y> on the box [low, high]^d.

    The kernel is only bounded on a bounded domain, so the domain is part
    of the spec and evaluation outside it is an input error rather than a
    silent clamp.
    """

    low: float = -1.0
    high: float = 1.0

    characteristic = False
    c0_universal = False

    def __post_init__(self):
        if not self.low < self.high:
            raise InputError("linear kernel needs low < high")

    @property
    def bound(self) -> float:
        return self.dim * max(abs(self.low), abs(self.high)) ** 2

    @property
    def text(self) -> str:
        return f"linear:domain=[{self.low:g},{self.high:g}]"

    def _check_domain(self, X):
        if np.any(X < self.low) or np.any(X > self.high):
            raise InputError(
                f"linear kernel point outside declared domain [{self.low:g},{self.high:g}]"
            )

    def gram(self, X, Y):
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        self._check_domain(X)
        self._check_domain(Y)
        return X @ Y.T

    def _elementwise(self, X, Y):
        self._check_domain(X)
        self._check_domain(Y)
        return np.einsum("nd,nd->n", X, Y)

    def feature_map(self, X):
        X = as_points(X, self.dim)
        self._check_domain(X)
        return X


@dataclass(frozen=True)
class SetwiseKernel(Kernel):
    """1_A(x) 1_A(y) for A a product of finite unions of half-open intervals.

    ``intervals`` holds, per coordinate, a tuple of (lo, hi) pairs; a point
    is in A when every coordinate lies in one of its [lo, hi) intervals.
    """

    intervals: tuple = (((0.0, 1.0),),)

    continuous = False
    injective = False
    characteristic = False
    c0_universal = False

    def __post_init__(self):
        if len(self.intervals) != self.dim:
            raise InputError("setwise kernel needs one interval union per coordinate")
        for union in self.intervals:
            for lo, hi in union:
                if not lo < hi:
                    raise InputError("setwise intervals need lo < hi")

    @classmethod
    def interval(cls, a: float, b: float) -> "SetwiseKernel":
        """One-dimensional kernel for the single interval [a, b)."""
        return cls(dim=1, intervals=(((float(a), float(b)),),))

    @property
    def bound(self) -> float:
        return 1.0

    @property
    def text(self) -> str:
        if self.dim == 1 and len(self.intervals[0]) == 1:
            (a, b), = self.intervals[0]
            return f"setwise:a={a:g},b={b:g}"
        parts = ";".join(
            ",".join(f"[{lo:g},{hi:g})" for lo, hi in union) for union in self.intervals
        )
        return f"setwise:intervals={parts}"

    def contains(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        inside = np.ones(len(X), dtype=bool)
        for coord, union in enumerate(self.intervals):
            col = X[:, coord]
            in_union = np.zeros(len(X), dtype=bool)
            for lo, hi in union:
                in_union |= (col >= lo) & (col < hi)
            inside &= in_union
        return inside

    def gram(self, X, Y):
        fx = self.contains(X).astype(float)
        fy = self.contains(Y).astype(float)
        return np.outer(fx, fy)

    def _elementwise(self, X, Y):
        return (self.contains(X) & self.contains(Y)).astype(float)

    def diag(self, X):
        return self.contains(X).astype(float)

    def feature_map(self, X):
        return self.contains(X).astype(float)[:, None]

    def measure_mass(self, mu) -> float:
        """mu(A) for a discrete measure; exact indicator sum."""
        return float(np.sum(np.asarray(mu.weights)[self.contains(mu.atoms)]))


@dataclass(frozen=True)
class MixtureGaussianKernel(Kernel):
    """Gaussian kernel smoothed both ways through Normal(x, s0^2) noise.

    Closed form: amplitude * exp(-||x1 - x2||^2 / (2 (2 s0^2 + sigma^2)))
    with amplitude sqrt(sigma^2 / (2 s0^2 + sigma^2)).  The degenerate case
    s0 = 0 recovers the plain Gaussian kernel.
    """

    s0: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.s0 < 0 or self.sigma <= 0:
            raise InputError("mixture gaussian kernel needs s0 >= 0 and sigma > 0")

    @property
    def lengthscale2(self) -> float:
        return 2.0 * self.s0**2 + self.sigma**2

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.sigma**2 / self.lengthscale2)

    @property
    def bound(self) -> float:
        return self.amplitude

    @property
    def text(self) -> str:
        return f"mixgauss:s0={self.s0:g},sigma={self.sigma:g}"

    def gram(self, X, Y):
        X = as_points(X, self.dim)
        Y = as_points(Y, self.dim)
        return self.amplitude * np.exp(_sqdist(X, Y) / (-2.0 * self.lengthscale2))

    def _elementwise(self, X, Y):
        d = X - Y
        return self.amplitude * np.exp(
            np.einsum("nd,nd->n", d, d) / (-2.0 * self.lengthscale2)
        )

    def diag(self, X):
        return np.full(len(as_points(X, self.dim)), self.amplitude)


def mixture_updated_gaussian(s0: float, sigma: float, dim: int = 1) -> MixtureGaussianKernel:
    """Kernel induced on mixing parameters by a Gaussian observation kernel
    under Normal(x, s0^2) component densities."""
    if s0 < 0 or sigma <= 0:
        raise InputError("mixture_updated_gaussian needs s0 >= 0 and sigma > 0")
    return MixtureGaussianKernel(dim=dim, s0=float(s0), sigma=float(sigma))


def mixture_kernel_mc(base: Kernel, sampler, L: int, x1, x2, rng) -> float:
    """Monte-Carlo estimate of the smoothed kernel at (x1, x2).

    ``sampler(rng, x, L)`` must return L draws from the component density
    at parameter x.  The estimate (1/L) sum_l k(Y1_l, Y2_l) with
    Y1_l ~ f(.; x1), Y2_l ~ f(.; x2) independent, is unbiased for the
    double integral of k against the two densities.
    """
    if L < 1:
        raise InputError("mixture_kernel_mc needs L >= 1")
    y1 = sampler(rng, x1, L)
    y2 = sampler(rng, x2, L)
    return float(np.mean(base.elementwise(y1, y2)))


@dataclass(frozen=True)
class MonteCarloMixtureKernel(Kernel):
    """Smoothed kernel evaluated by Monte Carlo instead of a closed form.

    Evaluation is randomised, so it takes an explicit random stream;
    parallel callers must use disjoint streams.  ``eval_mc`` canonicalises
    the argument order before sampling so single-pair evaluation is
    exactly symmetric.  ``gram_mc`` draws one set of component samples per
    point and averages per-draw Gram matrices, which keeps the estimated
    Gram matrix exactly positive semidefinite.
    """

    base: Kernel = field(default_factory=GaussianKernel)
    sampler: object = None
    family_id: str = "dirac"
    L: int = 100

    def __post_init__(self):
        if self.L < 1:
            raise InputError("monte-carlo mixture kernel needs L >= 1")

    @property
    def bound(self) -> float:
        return self.base.bound

    @property
    def text(self) -> str:
        return f"mixmc:base={self.base.text},family={self.family_id},L={self.L}"

    def eval_mc(self, x, y, rng) -> float:
        a = as_points(x, self.dim)[0]
        b = as_points(y, self.dim)[0]
        if tuple(b) < tuple(a):
            a, b = b, a
        return mixture_kernel_mc(self.base, self.sampler, self.L, a, b, rng)

    def gram_mc(self, X, rng) -> np.ndarray:
        X = as_points(X, self.dim)
        n = len(X)
        draws = [self.sampler(rng, X[i], self.L) for i in range(n)]
        out = np.zeros((n, n))
        for ell in range(self.L):
            pts = np.stack([as_points(draws[i], self.base.dim)[ell] for i in range(n)])
            out += self.base.gram(pts, pts)
        return out / self.L


def dirac_sampler(rng, x, L):
    """Component density degenerate at x; turns the mixture into the base kernel."""
    a = np.asarray(x, dtype=float).reshape(1, -1)
    return np.repeat(a, L, axis=0)


def normal_sampler(scale: float):
    """Component density Normal(x, scale^2) applied coordinatewise."""

    def sample(rng, x, L):
        a = np.asarray(x, dtype=float).reshape(1, -1)
        return a + scale * rng.standard_normal((L, a.shape[1]))

    return sample


_KV_RE = re.compile(r"^\s*([a-zA-Z_][a-zA-Z0-9_]*)\s*=\s*(.+?)\s*$")


def _parse_kv(body: str) -> dict:
    # domain=[-2,2] contains a comma, so split on commas not inside brackets
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    out = {}
    for part in parts:
        m = _KV_RE.match(part)
        if not m:
            raise InputError(f"malformed kernel parameter {part!r}")
        out[m.group(1)] = m.group(2)
    return out


def parse_kernel(text: str, dim: int = 1) -> Kernel:
    """Parse the textual kernel form used by CLI flags and reports.

    Examples: ``gaussian:sigma=1.0``, ``laplace:beta=1.0``,
    ``linear:domain=[-2,2]``, ``setwise:a=0,b=0.95``,
    ``mixgauss:s0=1.0,sigma=1.0``.
    """
    text = text.strip()
    name, _, body = text.partition(":")
    kv = _parse_kv(body) if body else {}
    try:
        if name == "gaussian":
            return GaussianKernel(dim=dim, sigma=float(kv.get("sigma", 1.0)))
        if name == "laplace":
            return LaplaceKernel(dim=dim, beta=float(kv.get("beta", 1.0)))
        if name == "linear":
            dom = kv.get("domain", "[-1,1]").strip()
            if not (dom.startswith("[") and dom.endswith("]")):
                raise InputError(f"malformed linear domain {dom!r}")
            lo, hi = (float(v) for v in dom[1:-1].split(","))
            return LinearKernel(dim=dim, low=lo, high=hi)
        if name == "setwise":
            a = float(kv.get("a", 0.0))
            b = float(kv.get("b", 1.0))
            if dim != 1:
                raise InputError("textual setwise kernels are one-dimensional")
            return SetwiseKernel.interval(a, b)
        if name == "mixgauss":
            return MixtureGaussianKernel(
                dim=dim, s0=float(kv.get("s0", 1.0)), sigma=float(kv.get("sigma", 1.0))
            )
    except ValueError as exc:
        raise InputError(f"could not parse kernel {text!r}: {exc}") from exc
    raise InputError(f"unknown kernel variant {name!r}")
