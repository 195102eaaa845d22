"""Sequential importance sampling over censored records, with SMC resampling.

The sampler walks the dataset in its stored order keeping B particles.  An
observed record multiplies each particle's weight by its current predictive
density there and absorbs the propagation value; a right-censored record
draws U ~ Uniform(P(c), 1) in CDF space per particle, multiplies the weight
by the predictive survival mass 1 - P(c), and absorbs U.  Whenever the
effective sample size of the weights drops below `ess_frac * B`, the
ensemble is systematically resampled and weights reset to uniform.

Weights are accumulated in log space (products of hundreds of densities
underflow otherwise).  The running marginal-likelihood estimate is the sum
over resampling segments of log-mean unnormalized weight, which reduces to
a single log-mean when no resampling fires, and to the prequential
log-likelihood when there is no censoring at all.

The loop is generic over a small particle-state "engine" so that the exact
conjugate predictive (see `parametric`) runs through the identical code
path as the copula predictive.  All randomness comes from counter-based
streams keyed by (seed, stream, record index), so results are bit-identical
regardless of execution order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import copulas, rng
from .copulas import CopulaFamily, alpha_regression, alpha_schedule
from .dataio import SurvivalDataset
from .distributions import base_cdf, base_pdf
from .errors import ConfigurationError, DegeneracyError
from .predictive import PredictiveFit

__all__ = [
    "Particle",
    "ParticleEnsemble",
    "impute_smc",
    "ess",
    "ess_from_log_weights",
    "systematic_indices",
    "systematic_resample",
    "log_marginal_likelihood",
]


# ---------------------------------------------------------------------------
# Weight diagnostics and resampling primitives
# ---------------------------------------------------------------------------

def ess(weights) -> float:
    """Effective sample size (sum w)^2 / sum w^2 of nonnegative weights.

    Exactly B for uniform weights and 1 when a single weight carries all
    the mass.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < 0):
        raise ValueError("weights must be nonnegative and nonempty")
    total = w.sum()
    if not total > 0:
        raise DegeneracyError("all weights are zero")
    return float(total * total / np.sum(w * w))


def ess_from_log_weights(log_weights) -> float:
    """ESS from unnormalized log weights (max-shifted for stability)."""
    lw = np.asarray(log_weights, dtype=float)
    m = np.max(lw)
    if not np.isfinite(m):
        raise DegeneracyError("all weights are zero")
    return ess(np.exp(lw - m))


def systematic_indices(weights, offset: float) -> np.ndarray:
    """Ancestor indices from one uniform offset and stride 1/B.

    Expected offspring count of particle j is B * w_j; uniform weights
    reproduce every particle exactly once.
    """
    w = np.asarray(weights, dtype=float)
    b = w.size
    positions = (offset + np.arange(b)) / b
    cumulative = np.cumsum(w)
    cumulative[-1] = 1.0  # guard rounding at the top end
    return np.searchsorted(cumulative, positions, side="right").clip(0, b - 1)


# ---------------------------------------------------------------------------
# Ensemble containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Particle:
    """Single-particle view: its fitted predictive state, unnormalized
    log weight, and the u drawn for each censored record index."""

    fit: PredictiveFit
    log_weight: float
    imputed_u: dict


@dataclass
class ParticleEnsemble:
    """Weighted particle system after one full pass over the data.

    `v_matrix[i, j]` is particle j's propagation value for record i, so a
    column is exactly the `vseq` of that particle's `PredictiveFit`.
    Traces are per processed record: the ESS of the weights after the
    record's update, and the number of distinct surviving ancestries.
    """

    family: CopulaFamily
    base: object
    rho_x: float | None
    times: np.ndarray
    status: np.ndarray
    covariates: np.ndarray | None
    perm: np.ndarray | None
    v_matrix: np.ndarray  # (n, B)
    log_weights: np.ndarray  # (B,)
    ess_trace: np.ndarray  # (n,)
    unique_trace: np.ndarray  # (n,)
    resample_steps: list = field(default_factory=list)
    log_z: float = 0.0
    imputed: dict = field(default_factory=dict)  # record index -> (B,) draws
    seed: int = 0
    ess_frac: float = 0.5

    @property
    def n_particles(self) -> int:
        return self.v_matrix.shape[1]

    @property
    def n_records(self) -> int:
        return self.v_matrix.shape[0]

    @property
    def weights(self) -> np.ndarray:
        lw = self.log_weights - logsumexp(self.log_weights)
        return np.exp(lw)

    @property
    def final_ess(self) -> float:
        return ess_from_log_weights(self.log_weights)

    def diagnostic_rows(self):
        """(step, ess, unique_particles, resampled) per record, 1-based."""
        fired = set(self.resample_steps)
        return [
            (i + 1, float(self.ess_trace[i]), int(self.unique_trace[i]), i in fired)
            for i in range(self.n_records)
        ]

    def particle(self, j: int) -> Particle:
        fit = PredictiveFit(
            family=self.family,
            base=self.base,
            vseq=self.v_matrix[:, j].copy(),
            xseq=self.covariates if self.rho_x is not None else None,
            rho_x=self.rho_x,
            perm=self.perm,
        )
        drawn = {i: float(u[j]) for i, u in self.imputed.items()}
        return Particle(fit=fit, log_weight=float(self.log_weights[j]),
                        imputed_u=drawn)

    @property
    def particles(self) -> list:
        return [self.particle(j) for j in range(self.n_particles)]


def log_marginal_likelihood(ensemble) -> float:
    """Marginal-likelihood estimate accumulated during the pass: the sum
    over resampling segments of log-mean unnormalized weight."""
    return float(ensemble.log_z)


def systematic_resample(ensemble: ParticleEnsemble, seed_or_rng) -> ParticleEnsemble:
    """One systematic-resampling pass over a finished ensemble: draws a
    single offset, reindexes the particles, and resets weights to uniform."""
    gen = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    idx = systematic_indices(ensemble.weights, gen.random())
    return ParticleEnsemble(
        family=ensemble.family,
        base=ensemble.base,
        rho_x=ensemble.rho_x,
        times=ensemble.times,
        status=ensemble.status,
        covariates=ensemble.covariates,
        perm=ensemble.perm,
        v_matrix=ensemble.v_matrix[:, idx].copy(),
        log_weights=np.zeros(ensemble.n_particles),
        ess_trace=ensemble.ess_trace,
        unique_trace=ensemble.unique_trace,
        resample_steps=list(ensemble.resample_steps),
        log_z=ensemble.log_z,
        imputed={i: u[idx].copy() for i, u in ensemble.imputed.items()},
        seed=ensemble.seed,
        ess_frac=ensemble.ess_frac,
    )


# ---------------------------------------------------------------------------
# Generic SMC loop
# ---------------------------------------------------------------------------

@dataclass
class _LoopResult:
    log_weights: np.ndarray
    log_z: float
    ess_trace: np.ndarray
    unique_trace: np.ndarray
    resample_steps: list
    imputed: dict


def run_smc_loop(engine, times, status, n_particles: int, ess_frac: float,
                 seed: int) -> _LoopResult:
    """Drive an engine through the records with IS weighting and
    ESS-triggered systematic resampling.

    The engine contract: eval_at(i, t) -> (density, cdf) arrays of shape
    (B,); absorb_observed(i, t, cdf); absorb_censored(i, c, u, cdf);
    select(idx) reindexes particle state.
    """
    if n_particles < 2:
        raise ConfigurationError("need at least 2 particles")
    if not 0.0 <= ess_frac <= 1.0:
        raise ConfigurationError("ess_frac must lie in [0, 1]")
    b = n_particles
    n = len(times)
    log_w = np.zeros(b)
    log_z = 0.0
    ancestry = np.arange(b)
    ess_trace = np.empty(n)
    unique_trace = np.empty(n, dtype=int)
    resample_steps: list = []
    imputed: dict = {}

    def _diag_rows(upto):
        fired = set(resample_steps)
        return [(i + 1, float(ess_trace[i]), int(unique_trace[i]), i in fired)
                for i in range(upto)]

    for i in range(n):
        t = float(times[i])
        dens, cdf = engine.eval_at(i, t)
        if status[i] == 1:
            with np.errstate(divide="ignore"):
                log_w += np.log(dens)
            engine.absorb_observed(i, t, cdf)
        else:
            dead = cdf >= 1.0 - copulas.CLAMP_EPS
            unif = rng.uniforms(seed, rng.STREAM_IMPUTE, i, b)
            u = cdf + (1.0 - cdf) * unif
            # keep draws strictly above P(c) and strictly below 1; dead
            # particles get a finite placeholder (their weight is zero)
            u = np.maximum(u, np.nextafter(cdf, 1.0))
            u = np.minimum(u, 1.0 - 1e-12)
            u = np.where(dead, 1.0 - 1e-12, u)
            with np.errstate(divide="ignore", invalid="ignore"):
                log_w += np.where(dead, -np.inf, np.log1p(-np.minimum(cdf, 1.0)))
            imputed[i] = u
            engine.absorb_censored(i, t, u, cdf)
        m = np.max(log_w)
        if not np.isfinite(m):
            raise DegeneracyError(
                f"all {b} particle weights vanished at record {i + 1}",
                diagnostics=_diag_rows(i),
            )
        ess_trace[i] = ess_from_log_weights(log_w)
        if ess_trace[i] < ess_frac * b:
            log_z += logsumexp(log_w) - np.log(b)
            shifted = np.exp(log_w - logsumexp(log_w))
            offset = float(rng.uniforms(seed, rng.STREAM_RESAMPLE, i, 1)[0])
            idx = systematic_indices(shifted, offset)
            engine.select(idx)
            ancestry = ancestry[idx]
            for key in imputed:
                imputed[key] = imputed[key][idx]
            log_w = np.zeros(b)
            resample_steps.append(i)
        unique_trace[i] = np.unique(ancestry).size
    log_z += logsumexp(log_w) - np.log(b)
    return _LoopResult(log_weights=log_w, log_z=float(log_z),
                       ess_trace=ess_trace, unique_trace=unique_trace,
                       resample_steps=resample_steps, imputed=imputed)


# ---------------------------------------------------------------------------
# Copula particle engine
# ---------------------------------------------------------------------------

class _CopulaEngine:
    """Vectorized particle state for the copula predictive: one shared
    covariate table, per-particle propagation values."""

    def __init__(self, family, base, rho_x, covariates, n_records, n_particles):
        self.joint_fn = copulas.family_joint(family)
        self.base = base
        self.rho_x = rho_x
        self.covariates = covariates
        self.v = np.empty((n_records, n_particles))
        self.steps = 0

    def _alphas(self, x_eval):
        out = []
        for j in range(self.steps):
            alpha = float(alpha_schedule(j + 1))
            if self.rho_x is not None:
                alpha = alpha_regression(alpha, x_eval, self.covariates[j],
                                         self.rho_x)
            out.append(alpha)
        return out

    def eval_at(self, i, t):
        dens = float(base_pdf(t, self.base))
        u = float(base_cdf(t, self.base))
        x_eval = self.covariates[i] if self.rho_x is not None else None
        dens = np.full(self.v.shape[1], dens)
        u = np.full(self.v.shape[1], u)
        for j, alpha in enumerate(self._alphas(x_eval)):
            v = self.v[j]
            d, i_part = self.joint_fn(u, v)
            dens = dens * ((1.0 - alpha) + alpha * d)
            u = (1.0 - alpha) * u + alpha * i_part
        return dens, u

    def _absorb(self, values):
        self.v[self.steps] = np.clip(values, copulas.CLAMP_EPS,
                                     1.0 - copulas.CLAMP_EPS)
        self.steps += 1

    def absorb_observed(self, i, t, cdf):
        self._absorb(cdf)

    def absorb_censored(self, i, c, u, cdf):
        self._absorb(u)

    def select(self, idx):
        self.v[: self.steps] = self.v[: self.steps][:, idx]


def impute_smc(data: SurvivalDataset, family: CopulaFamily, base=None,
               rho_x: float | None = None, n_particles: int = 2000,
               ess_frac: float = 0.5, seed: int = 0) -> ParticleEnsemble:
    """Impute right-censored records under the copula predictive.

    Processes records in the dataset's stored order.  Returns the full
    weighted ensemble with per-record ESS / unique-ancestry traces, the
    resampling step indices, and the accumulated marginal-likelihood
    estimate.
    """
    if base is None:
        base = copulas.default_base(family)
    if rho_x is not None and data.covariates is None:
        raise ConfigurationError("rho_x given but the dataset has no covariates")
    engine = _CopulaEngine(family, base, rho_x, data.covariates, data.n,
                           n_particles)
    result = run_smc_loop(engine, data.times, data.status, n_particles,
                          ess_frac, seed)
    return ParticleEnsemble(
        family=family,
        base=base,
        rho_x=rho_x,
        times=data.times,
        status=data.status,
        covariates=data.covariates,
        perm=data.perm,
        v_matrix=engine.v,
        log_weights=result.log_weights,
        ess_trace=result.ess_trace,
        unique_trace=result.unique_trace,
        resample_steps=result.resample_steps,
        log_z=result.log_z,
        imputed=result.imputed,
        seed=seed,
        ess_frac=ess_frac,
    )
