"""Gaussian hierarchical model for two groups, exact posterior and kernel
correlation, and the cross-model calibration solver.

The model: observations in group i are Normal(theta_i, s^2) given the
means, and (theta_1, theta_2) is a centred bivariate normal with common
scale tau^2 and correlation rho.  Viewing each group's law as the mixture
of the Gaussian density over delta_{theta_i} puts this model in the same
framework as the nonparametric one, with every moment a Gaussian
integral.

Calibration solves, in closed form, for the parameters of either model so
that three quantities match across models: the marginal observable
variance t^2, the common prior kernel variance v under a Gaussian kernel
of width sigma, and the prior kernel correlation xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import NormalBase
from .errors import DegenerateVarianceError, InfeasibleError, InputError, InternalError
from .hdp import HdpParams, prior_corr_closed, prior_lambda

_RESIDUAL_GUARD = 1e-9


@dataclass(frozen=True)
class GaussParams:
    s2: float
    tau2: float
    rho: float

    def __post_init__(self):
        if self.s2 <= 0 or self.tau2 <= 0:
            raise InputError("variances s2 and tau2 must be positive")
        if abs(self.rho) > 1:
            raise InputError("rho must lie in [-1, 1]")

    @property
    def t2(self) -> float:
        """Marginal observable variance."""
        return self.s2 + self.tau2


@dataclass(frozen=True)
class CalibrationTarget:
    """Common marginal variance t^2, kernel variance v, correlation xi,
    and the Gaussian kernel width sigma the moments refer to."""

    v: float
    xi: float
    t2: float
    sigma: float

    def __post_init__(self):
        if not 0 < self.v < 1:
            raise InputError("target kernel variance v must lie in (0, 1)")
        if not 0 <= self.xi <= 1:
            raise InputError("target kernel correlation xi must lie in [0, 1]")
        if self.t2 <= 0 or self.sigma <= 0:
            raise InputError("t2 and sigma must be positive")

    @property
    def sigma_star(self) -> float:
        """Feasibility bound: the system is solvable iff sigma < sigma*."""
        return math.sqrt(2.0) * math.sqrt(self.t2) / math.sqrt(1.0 / (1.0 - self.v) ** 2 - 1.0)

    @property
    def root_shrink(self) -> float:
        """sqrt(sigma^2 / (2 t^2 + sigma^2)), the recurring Gaussian factor."""
        return math.sqrt(self.sigma**2 / (2.0 * self.t2 + self.sigma**2))

    def require_feasible(self):
        if self.sigma >= self.sigma_star:
            raise InfeasibleError(
                f"kernel width sigma={self.sigma:g} is not below the feasibility "
                f"bound sigma*={self.sigma_star:g} for v={self.v:g}, t2={self.t2:g}"
            )


def default_sigma(v: float, t2: float) -> float:
    """sigma*/sqrt(2), the width used by default in model comparisons."""
    return CalibrationTarget(v=v, xi=0.5, t2=t2, sigma=1.0).sigma_star / math.sqrt(2.0)


def gauss_posterior(x1, x2, p: GaussParams):
    """Closed-form posterior mean vector and covariance matrix of
    (theta_1, theta_2) given the two groups' observations."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n1, n2 = len(x1), len(x2)
    xbar1 = float(x1.mean()) if n1 else 0.0
    xbar2 = float(x2.mean()) if n2 else 0.0
    s2, tau2, rho = p.s2, p.tau2, p.rho
    denom = s2**2 + (n1 + n2) * s2 * tau2 + n1 * n2 * tau2**2 * (1.0 - rho**2)
    a1 = s2 + n2 * tau2 * (1.0 - rho**2)
    a2 = s2 + n1 * tau2 * (1.0 - rho**2)
    sigma_star = (s2 * tau2 / denom) * np.array([[a1, s2 * rho], [s2 * rho, a2]])
    theta_star = (tau2 / denom) * np.array(
        [a1 * n1 * xbar1 + s2 * rho * n2 * xbar2,
         a2 * n2 * xbar2 + s2 * rho * n1 * xbar1]
    )
    return theta_star, sigma_star


def param_posterior_corr(n1: int, n2: int, p: GaussParams) -> float:
    """Posterior correlation of the two group means; depends on the data
    only through the sample sizes."""
    ratio = p.tau2 / p.s2 * (1.0 - p.rho**2)
    return p.rho / math.sqrt((1.0 + n1 * ratio) * (1.0 + n2 * ratio))


def gauss_variance_identity(a: float, b2: float, c2: float) -> float:
    """Spread of the kernel a*exp(-(x-y)^2/(2 b^2)) under Normal(0, c^2):
    int k(x,x) dP - iint k dP dP = a (1 - sqrt(b^2 / (2 c^2 + b^2)))."""
    if b2 <= 0:
        raise InputError("gauss_variance_identity needs b2 > 0")
    if c2 < 0:
        raise InputError("gauss_variance_identity needs c2 >= 0")
    return a * (1.0 - math.sqrt(b2 / (2.0 * c2 + b2)))


def kernel_corr_gauss_prior(p: GaussParams, sigma: float) -> float:
    """Prior kernel correlation of the two group laws under a Gaussian
    kernel of width sigma; a ratio of Gaussian integrals."""
    if sigma <= 0:
        raise InputError("sigma must be positive")
    if p.tau2 <= 0:
        raise DegenerateVarianceError("tau2 = 0 makes both kernel variances vanish")
    s2, tau2, rho = p.s2, p.tau2, p.rho
    sig2 = sigma**2

    def g(extra):
        return math.sqrt(sig2 / (extra + 2.0 * s2 + sig2))

    shared = g(2.0 * tau2)
    return (g(2.0 * tau2 * (1.0 - rho)) - shared) / (g(0.0) - shared)


def hdp_prior_kernel_variance(params: HdpParams, t2: float, sigma: float) -> float:
    """Prior kernel variance of each hDP group measure when the base is
    Normal(0, t^2) and the kernel is Gaussian with width sigma."""
    return prior_lambda(params) * gauss_variance_identity(1.0, sigma**2, t2)


def gauss_prior_kernel_variance(p: GaussParams, sigma: float) -> float:
    """Prior kernel variance of each group's law in the Gaussian model."""
    sig2 = sigma**2
    b2 = 2.0 * p.s2 + sig2
    return gauss_variance_identity(math.sqrt(sig2 / b2), b2, p.tau2)


def calibrate_gaussian(target: CalibrationTarget) -> GaussParams:
    """Solve (s^2, tau^2, rho) so the Gaussian model matches the target
    marginal variance, kernel variance, and kernel correlation."""
    target.require_feasible()
    shrink = target.root_shrink
    sig2 = target.sigma**2

    def spread(u):
        return sig2 / 2.0 * ((u + shrink) ** -2 - 1.0)

    s2 = spread(target.v)
    tau2 = target.t2 - s2
    if s2 <= 0 or tau2 <= 0:
        raise InfeasibleError(
            f"target (v={target.v:g}, t2={target.t2:g}, sigma={target.sigma:g}) "
            "does not admit positive variances"
        )
    rho = (target.t2 - spread(target.v * target.xi)) / tau2
    params = GaussParams(s2=s2, tau2=tau2, rho=rho)

    v_err = abs(gauss_prior_kernel_variance(params, target.sigma) - target.v)
    xi_err = abs(kernel_corr_gauss_prior(params, target.sigma) - target.xi)
    if max(v_err, xi_err) > _RESIDUAL_GUARD:
        raise InternalError(
            f"gaussian calibration residuals too large (v_err={v_err:g}, xi_err={xi_err:g})"
        )
    return params


def calibrate_hdp(target: CalibrationTarget) -> HdpParams:
    """Solve (c0, c) so the hDP with base Normal(0, t^2) matches the
    target kernel variance and correlation.  The endpoints xi in {0, 1}
    are genuine limits (a concentration diverges) and are rejected."""
    target.require_feasible()
    if not 0 < target.xi < 1:
        raise InfeasibleError(
            "xi in {0, 1} is a limit for the hDP: a concentration parameter diverges"
        )
    q = 1.0 - target.root_shrink
    c0 = q / (target.v * target.xi) - 1.0
    c = (q / target.v - 1.0) / (1.0 - target.xi)
    if c0 <= 0 or c <= 0:
        raise InfeasibleError(
            f"target (v={target.v:g}, xi={target.xi:g}) needs nonpositive concentrations"
        )
    params = HdpParams(c=c, c0=c0, p0=NormalBase(mu=0.0, var=target.t2))

    v_err = abs(hdp_prior_kernel_variance(params, target.t2, target.sigma) - target.v)
    xi_err = abs(prior_corr_closed(params) - target.xi)
    if max(v_err, xi_err) > _RESIDUAL_GUARD:
        raise InternalError(
            f"hDP calibration residuals too large (v_err={v_err:g}, xi_err={xi_err:g})"
        )
    return params


def calibration_report(target: CalibrationTarget) -> dict:
    """Both models' calibrated parameters plus recomputed residuals, in
    the JSON layout the CLI emits."""
    gauss = calibrate_gaussian(target)
    hdp = calibrate_hdp(target)
    return {
        "v": target.v,
        "xi": target.xi,
        "t2": target.t2,
        "sigma": target.sigma,
        "sigma_star": target.sigma_star,
        "models": {
            "gaussian": {
                "params": {"s2": gauss.s2, "tau2": gauss.tau2, "rho": gauss.rho},
                "residuals": {
                    "v_err": gauss_prior_kernel_variance(gauss, target.sigma) - target.v,
                    "xi_err": kernel_corr_gauss_prior(gauss, target.sigma) - target.xi,
                },
            },
            "hdp": {
                "params": {"c": hdp.c, "c0": hdp.c0, "p0": hdp.p0.text},
                "residuals": {
                    "v_err": hdp_prior_kernel_variance(hdp, target.t2, target.sigma) - target.v,
                    "xi_err": prior_corr_closed(hdp) - target.xi,
                },
            },
        },
    }


def gauss_predictive_sample(x1, x2, p: GaussParams, group: int, count: int, rng) -> np.ndarray:
    """i.i.d. draws from the one-step-ahead predictive of the requested
    group, Normal(theta*_i, s^2 + Sigma*_ii)."""
    if group not in (1, 2):
        raise InputError("group must be 1 or 2")
    theta_star, sigma_star = gauss_posterior(x1, x2, p)
    i = group - 1
    scale = math.sqrt(p.s2 + sigma_star[i, i])
    return theta_star[i] + scale * rng.standard_normal(count)


def gauss_model_blocks(p: GaussParams, m: int, rng):
    """m independent 2x2 blocks from the Gaussian model a priori:
    theta-pairs from the bivariate normal, two observations per group."""
    from .moments import BlockSet

    cov = p.tau2 * np.array([[1.0, p.rho], [p.rho, 1.0]])
    chol = np.linalg.cholesky(cov)
    theta = rng.standard_normal((m, 2)) @ chol.T
    s = math.sqrt(p.s2)
    return BlockSet(
        x11=theta[:, 0] + s * rng.standard_normal(m),
        x21=theta[:, 1] + s * rng.standard_normal(m),
        x12=theta[:, 0] + s * rng.standard_normal(m),
        x22=theta[:, 1] + s * rng.standard_normal(m),
    )
