"""Bivariate copula kernels and the mixing-weight schedules.

Two families drive the sequential predictive update: the Clayton-mixture
kernel d_a / I_a on positive-support data and the Gaussian kernel
c_rho / H_rho paired with the log-normal base.  Each family exposes the
copula density and its partial integral in u,

    I(u, v) = int_0^u density(u', v) du',

which is what propagates the predictive CDF.

Numerics: the Clayton kernel is evaluated in log space, since
(1 - u)^(-1/a) explodes for small bandwidths as u -> 1.  Probability
arguments are clamped to [CLAMP_EPS, 1 - CLAMP_EPS] before use, except
that the partials map exact-0 and exact-1 inputs to exactly 0 and 1 (the
analytic limits), which keeps a CDF pinned at 0 on the time origin
through arbitrarily many updates.  The Clayton formulas are regular at
u = 0, so only their upper end is clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .distributions import LogNormalBaseParams, LomaxParams
from .errors import ConfigurationError

__all__ = [
    "CLAMP_EPS",
    "ClaytonFamily",
    "GaussianFamily",
    "CopulaFamily",
    "clayton_density",
    "clayton_partial",
    "gaussian_density",
    "gaussian_partial",
    "alpha_schedule",
    "alpha_regression",
    "family_density",
    "family_partial",
    "default_base",
    "check_family_base",
]

# Single global clamping constant so density and partial stay consistent.
CLAMP_EPS = 1e-10


@dataclass(frozen=True)
class ClaytonFamily:
    """Clayton-mixture kernel; smaller bandwidth = sharper updates.

    Any positive bandwidth is accepted; below roughly 0.05 the kernel's
    (1-u)^(-1/a) terms push float64 to its limits near u = 1.
    """

    bandwidth: float  # a > 0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class GaussianFamily:
    """Gaussian kernel; rho in (0, 1), larger rho = sharper updates."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")


CopulaFamily = ClaytonFamily | GaussianFamily


def _clamp_upper(u):
    # Clayton formulas are regular at u = 0, so only the upper end needs
    # protection; negative inputs are treated as the origin.
    return np.clip(np.asarray(u, dtype=float), 0.0, 1.0 - CLAMP_EPS)


def _clamp(u):
    return np.clip(np.asarray(u, dtype=float), CLAMP_EPS, 1.0 - CLAMP_EPS)


def _log_clayton_s(gu, gv):
    """log{(1-u)^(-1/a) + (1-v)^(-1/a) - 1} from g = -log(1-u)/a terms."""
    m = np.maximum(gu, gv)
    return m + np.log(np.exp(gu - m) + np.exp(gv - m) - np.exp(-m))


def clayton_density(u, v, a: float):
    """d_a(u, v); equals (a+1)/a exactly at the origin."""
    if not a > 0:
        raise ConfigurationError(f"bandwidth must be positive, got {a}")
    gu = -np.log1p(-_clamp_upper(u)) / a
    gv = -np.log1p(-_clamp_upper(v)) / a
    log_s = _log_clayton_s(gu, gv)
    return ((a + 1.0) / a) * np.exp((a + 1.0) * (gu + gv) - (a + 2.0) * log_s)


def clayton_partial(u, v, a: float):
    """I_a(u, v) = 1 - (1-v)^(-(a+1)/a) / s^(a+1); maps u = 0 -> 0, 1 -> 1."""
    if not a > 0:
        raise ConfigurationError(f"bandwidth must be positive, got {a}")
    u = np.asarray(u, dtype=float)
    gu = -np.log1p(-_clamp_upper(u)) / a
    gv = -np.log1p(-_clamp_upper(v)) / a
    log_s = _log_clayton_s(gu, gv)
    # log_s >= gv always, so the exponent is <= 0 and the result in [0, 1].
    inner = -np.expm1((a + 1.0) * (gv - log_s))
    return np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, inner))


def _gaussian_log_density_z(zu, zv, rho: float):
    """log c_rho as a function of the normal scores."""
    r2 = rho * rho
    return -0.5 * np.log1p(-r2) - (r2 * (zu * zu + zv * zv) - 2.0 * rho * zu * zv) / (
        2.0 * (1.0 - r2)
    )


def _check_rho(rho: float):
    if not 0.0 <= rho < 1.0:
        raise ConfigurationError(f"rho must lie in [0, 1), got {rho}")


def gaussian_density(u, v, rho: float):
    """c_rho(u, v); rho = 0 gives the independence copula (exactly 1)."""
    _check_rho(rho)
    zu = ndtri(_clamp(u))
    zv = ndtri(_clamp(v))
    return np.exp(_gaussian_log_density_z(zu, zv, rho))


def gaussian_partial(u, v, rho: float):
    """H_rho(u, v) = Phi({Phi^-1(u) - rho Phi^-1(v)} / sqrt(1 - rho^2))."""
    _check_rho(rho)
    u = np.asarray(u, dtype=float)
    zu = ndtri(_clamp(u))
    zv = ndtri(_clamp(v))
    inner = ndtr((zu - rho * zv) / np.sqrt(1.0 - rho * rho))
    return np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, inner))


# ---------------------------------------------------------------------------
# Mixing-weight schedules
# ---------------------------------------------------------------------------

def alpha_schedule(i):
    """Update weight for the i-th absorbed observation: (2 - 1/i) / (i + 1).

    O(1/i), which drives the update toward the independence copula and
    gives a consistent estimator.
    """
    i = np.asarray(i, dtype=float)
    if np.any(i < 1):
        raise ValueError("observation index starts at 1")
    return (2.0 - 1.0 / i) / (i + 1.0)


def alpha_regression(alpha_i, x, x_prime, rho_x: float):
    """Covariate-weighted update weight alpha_i(x, x').

    K is the product over covariate dimensions of the Gaussian copula
    density at (Phi(x_j), Phi(x'_j)); the normal scores are then the raw
    (pre-standardized) covariates themselves, so K is computed from them
    directly.  Returns alpha_i K / (1 - alpha_i + alpha_i K), in (0, 1)
    whenever alpha_i is.  rho_x = 0 returns alpha_i unchanged.

    `x_prime` may be a matrix of row vectors, giving one weight per row.
    """
    _check_rho(rho_x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.asarray(x_prime, dtype=float)
    single = xp.ndim <= 1
    xp = np.atleast_2d(xp)
    if x.shape[0] != xp.shape[1]:
        raise ValueError(
            f"covariate dimension mismatch: {x.shape[0]} vs {xp.shape[1]}"
        )
    if x.shape[0] == 0 or rho_x == 0.0:
        # K = 1: the weight is unchanged (independence limit).
        return float(alpha_i) if single else np.full(xp.shape[0], float(alpha_i))
    log_k = _gaussian_log_density_z(x[None, :], xp, rho_x).sum(axis=1)
    k = np.exp(log_k)
    out = alpha_i * k / (1.0 - alpha_i + alpha_i * k)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Family dispatch
# ---------------------------------------------------------------------------

def clayton_density_and_partial(u, v, a: float):
    """Fused (d_a, I_a) evaluation sharing the log transforms; bitwise
    identical to the separate functions but roughly half the work on the
    sampler hot paths."""
    if not a > 0:
        raise ConfigurationError(f"bandwidth must be positive, got {a}")
    u = np.asarray(u, dtype=float)
    gu = -np.log1p(-_clamp_upper(u)) / a
    gv = -np.log1p(-_clamp_upper(v)) / a
    log_s = _log_clayton_s(gu, gv)
    density = ((a + 1.0) / a) * np.exp((a + 1.0) * (gu + gv) - (a + 2.0) * log_s)
    inner = -np.expm1((a + 1.0) * (gv - log_s))
    partial = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, inner))
    return density, partial


def gaussian_density_and_partial(u, v, rho: float):
    """Fused (c_rho, H_rho) evaluation sharing the normal scores."""
    _check_rho(rho)
    u = np.asarray(u, dtype=float)
    zu = ndtri(_clamp(u))
    zv = ndtri(_clamp(v))
    density = np.exp(_gaussian_log_density_z(zu, zv, rho))
    inner = ndtr((zu - rho * zv) / np.sqrt(1.0 - rho * rho))
    partial = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, inner))
    return density, partial


def family_joint(family: CopulaFamily):
    """Fused (density, partial) evaluator for the update recursion."""
    if isinstance(family, ClaytonFamily):
        a = family.bandwidth
        return lambda u, v: clayton_density_and_partial(u, v, a)
    rho = family.rho
    return lambda u, v: gaussian_density_and_partial(u, v, rho)


def family_density(family: CopulaFamily):
    if isinstance(family, ClaytonFamily):
        a = family.bandwidth
        return lambda u, v: clayton_density(u, v, a)
    rho = family.rho
    return lambda u, v: gaussian_density(u, v, rho)


def family_partial(family: CopulaFamily):
    if isinstance(family, ClaytonFamily):
        a = family.bandwidth
        return lambda u, v: clayton_partial(u, v, a)
    rho = family.rho
    return lambda u, v: gaussian_partial(u, v, rho)


def default_base(family: CopulaFamily):
    """Base measure matched to the kernel: Lomax(a, 1) for Clayton,
    log-normal(0, 1/(1-rho)) for Gaussian."""
    if isinstance(family, ClaytonFamily):
        return LomaxParams(shape=family.bandwidth, scale=1.0)
    return LogNormalBaseParams(rho=family.rho)


def check_family_base(family: CopulaFamily, base):
    if isinstance(family, ClaytonFamily) and not isinstance(base, LomaxParams):
        raise ConfigurationError("Clayton kernel requires a Lomax base measure")
    if isinstance(family, GaussianFamily) and not isinstance(base, LogNormalBaseParams):
        raise ConfigurationError("Gaussian kernel requires a log-normal base measure")
