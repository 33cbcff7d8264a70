"""Zero-inflated Poisson and negative binomial count distributions.

A zero-inflated distribution mixes a point mass at 0 (probability ``pi``)
with an ordinary count distribution. All log-pmf computations stay in log
space; the k = 0 mixture branch uses a two-term log-sum-exp so that small
``pi`` with large ``mu`` does not underflow.

``pi = 0`` is allowed (plain Poisson / negative binomial as a degenerate
case); ``pi = 1`` is not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln

__all__ = [
    "ZipParams",
    "ZinbParams",
    "zip_logpmf",
    "zinb_logpmf",
    "zi_mean",
    "sample_zip",
    "sample_zinb",
    "inv_log_link",
    "inv_logit_link",
]

# exp() saturation threshold; exp(700) is still a finite double.
_EXP_CLIP = 700.0


def inv_log_link(eta):
    """Inverse log link exp(eta), saturating instead of overflowing."""
    return np.exp(np.clip(eta, -_EXP_CLIP, _EXP_CLIP))


def inv_logit_link(eta):
    """Inverse logit link 1 / (1 + exp(-eta))."""
    return expit(eta)


def _check_counts(k) -> np.ndarray:
    k = np.asarray(k)
    if k.size and (np.any(k < 0) or not np.issubdtype(k.dtype, np.integer) and np.any(k != np.floor(k))):
        raise ValueError("counts must be non-negative integers")
    return k.astype(float)


def _check_zi(mu, pi, nu=None):
    mu = np.asarray(mu, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(mu <= 0) or not np.all(np.isfinite(mu)):
        raise ValueError("mu must be positive and finite")
    if np.any(pi < 0) or np.any(pi >= 1):
        raise ValueError("pi must lie in [0, 1)")
    if nu is None:
        return mu, pi
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0) or not np.all(np.isfinite(nu)):
        raise ValueError("nu must be positive and finite")
    return mu, pi, nu


def zip_logpmf(k, mu, pi):
    """Log pmf of the zero-inflated Poisson. Broadcasts over all arguments."""
    kf = _check_counts(k)
    mu, pi = _check_zi(mu, pi)
    with np.errstate(divide="ignore"):  # pi = 0 gives log(0) = -inf, fine in logaddexp
        log_pi = np.log(pi)
        log_1mpi = np.log1p(-pi)
    pois = kf * np.log(mu) - mu - gammaln(kf + 1)
    zero_branch = np.logaddexp(log_pi, log_1mpi - mu)
    out = np.where(kf == 0, zero_branch, log_1mpi + pois)
    return out if out.ndim else float(out)


def zinb_logpmf(k, mu, nu, pi):
    """Log pmf of the zero-inflated negative binomial (mean mu, dispersion nu)."""
    kf = _check_counts(k)
    mu, pi, nu = _check_zi(mu, pi, nu)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
        log_1mpi = np.log1p(-pi)
    # nu * log(nu / (mu + nu)) written as -nu * log1p(mu / nu): stable for
    # large nu, where the distribution approaches the Poisson.
    log_p0 = -nu * np.log1p(mu / nu)
    nb = (
        gammaln(kf + nu)
        - gammaln(nu)
        - gammaln(kf + 1)
        + kf * (np.log(mu) - np.log(mu + nu))
        + log_p0
    )
    zero_branch = np.logaddexp(log_pi, log_1mpi + log_p0)
    out = np.where(kf == 0, zero_branch, log_1mpi + nb)
    return out if out.ndim else float(out)


def zi_mean(mu, pi):
    """Mean of the mixture, (1 - pi) * mu."""
    mu, pi = _check_zi(mu, pi)
    out = (1.0 - pi) * mu
    return out if out.ndim else float(out)


def sample_zip(rng: np.random.Generator, mu, pi, size=None):
    """Draw zero-inflated Poisson counts. Deterministic given the generator state."""
    mu, pi = _check_zi(mu, pi)
    scalar = size is None and mu.ndim == 0 and pi.ndim == 0
    if size is None and not scalar:
        size = np.broadcast(mu, pi).shape
    structural = rng.random(size) < pi
    counts = rng.poisson(np.broadcast_to(mu, np.shape(structural)))
    out = np.where(structural, 0, counts)
    return int(out) if scalar else out


def sample_zinb(rng: np.random.Generator, mu, nu, pi, size=None):
    """Draw zero-inflated negative binomial counts via the gamma-Poisson mixture.

    Valid for non-integer nu: lambda = mu * Gamma(nu, 1/nu), then Poisson(lambda).
    """
    mu, pi, nu = _check_zi(mu, pi, nu)
    scalar = size is None and mu.ndim == 0 and pi.ndim == 0 and nu.ndim == 0
    if size is None and not scalar:
        size = np.broadcast(mu, nu, pi).shape
    structural = rng.random(size) < pi
    shape = np.shape(structural)
    lam = np.broadcast_to(mu, shape) * rng.gamma(
        np.broadcast_to(nu, shape), 1.0 / np.broadcast_to(nu, shape)
    )
    counts = rng.poisson(lam)
    out = np.where(structural, 0, counts)
    return int(out) if scalar else out


@dataclass(frozen=True)
class ZipParams:
    """Zero-inflated Poisson parameters: count expectation mu > 0, zero
    inflation probability pi in [0, 1)."""

    mu: float
    pi: float

    def __post_init__(self):
        _check_zi(self.mu, self.pi)

    def logpmf(self, k):
        return zip_logpmf(k, self.mu, self.pi)

    def mean(self) -> float:
        return (1.0 - self.pi) * self.mu

    def sample(self, rng: np.random.Generator, size=None):
        return sample_zip(rng, self.mu, self.pi, size=size)


@dataclass(frozen=True)
class ZinbParams:
    """Zero-inflated negative binomial parameters; smaller nu means more
    overdispersion in the count component."""

    mu: float
    nu: float
    pi: float

    def __post_init__(self):
        _check_zi(self.mu, self.pi, self.nu)

    def logpmf(self, k):
        return zinb_logpmf(k, self.mu, self.nu, self.pi)

    def mean(self) -> float:
        return (1.0 - self.pi) * self.mu

    def sample(self, rng: np.random.Generator, size=None):
        return sample_zinb(rng, self.mu, self.nu, self.pi, size=size)
