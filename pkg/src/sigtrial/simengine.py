"""Simulated trial generator with ground-truth sensitivity labels.

Subjects receive per-outcome sensitivity statuses drawn from the configured
cluster fractions; covariates come in four blocks (sensitive to outcome 1
only, to outcome 2 only, to both, to neither) drawn from equicorrelated
multivariate normals whose parameters depend on the subject's status;
binary responses follow per-outcome logistic models whose treatment-by-
covariate interaction is active only for sensitive subjects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, InvalidInput
from .scores import TrialDataset
from .statnum import RngStream, cholesky, equicorrelation_matrix

__all__ = ["GroundTruth", "ScenarioConfig", "gamma_coefficient", "simulate_dataset"]


@dataclass
class ScenarioConfig:
    """All parameters of one simulated scenario.

    ``cluster_fractions`` are the probabilities of the four subject statuses
    (S1, S2) = (0,0), (0,1), (1,0), (1,1).  Each of sens_params,
    nonsens_params and noise_params is (mean, variance, correlation).
    ``overlap_rule`` decides when the both-outcomes covariate block is drawn
    from the sensitive distribution: "either" (default) elevates it when
    S1 = 1 or S2 = 1, "s1" keys it on S1 alone.
    ``table2_literal`` keys every covariate block on S1 alone.
    """

    n_subjects: int
    n_covariates: int = 100
    k_sens1: int = 10
    k_sens2: int = 10
    n_overlap: int = 5
    cluster_fractions: tuple = (0.8, 0.0, 0.0, 0.2)
    control_rate: float = 0.25
    rr1: float = 0.7
    rr2: float = 0.7
    sens_params: tuple = (1.0, 0.25, 0.0)
    nonsens_params: tuple = (0.0, 0.01, 0.0)
    noise_params: tuple = (0.0, 0.25, 0.0)
    overlap_rule: str = "either"
    table2_literal: bool = False
    name: str = ""

    def validate(self):
        if self.n_subjects < 2:
            raise ConfigInvalid("n_subjects must be at least 2")
        if self.n_overlap > min(self.k_sens1, self.k_sens2):
            raise ConfigInvalid("n_overlap exceeds a sensitive-covariate count")
        if self.k_sens1 + self.k_sens2 - self.n_overlap > self.n_covariates:
            raise ConfigInvalid("sensitive covariates exceed the covariate count")
        fr = np.asarray(self.cluster_fractions, dtype=float)
        if fr.shape != (4,) or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
            raise ConfigInvalid("cluster_fractions must be 4 probabilities summing to 1")
        for rate, name in (
            (self.control_rate, "control_rate"),
            (self.rr1, "rr1"),
            (self.rr2, "rr2"),
        ):
            if not 0.0 < rate < 1.0:
                raise ConfigInvalid(f"{name} must lie in (0, 1)")
        for params, name in (
            (self.sens_params, "sens_params"),
            (self.nonsens_params, "nonsens_params"),
            (self.noise_params, "noise_params"),
        ):
            if len(params) != 3:
                raise ConfigInvalid(f"{name} must be (mean, variance, correlation)")
            if not params[1] > 0 or not 0.0 <= params[2] < 1.0:
                raise ConfigInvalid(f"{name} has an invalid variance or correlation")
        if self.overlap_rule not in ("s1", "either"):
            raise ConfigInvalid("overlap_rule must be 's1' or 'either'")

    def covariate_blocks(self):
        """Column index arrays: (overlap, only1, only2, noise)."""
        o = self.n_overlap
        k1, k2 = self.k_sens1, self.k_sens2
        overlap = np.arange(0, o)
        only1 = np.arange(o, k1)
        only2 = np.arange(k1, k1 + k2 - o)
        noise = np.arange(k1 + k2 - o, self.n_covariates)
        return overlap, only1, only2, noise

    def sensitive_sets(self):
        overlap, only1, only2, _ = self.covariate_blocks()
        sens1 = np.concatenate([overlap, only1])
        sens2 = np.concatenate([overlap, only2])
        return sens1, sens2


@dataclass
class GroundTruth:
    s1: np.ndarray
    s2: np.ndarray
    sensitive_covariates_1: np.ndarray
    sensitive_covariates_2: np.ndarray
    overlap_elevated: np.ndarray = field(default=None)

    @property
    def true_cluster(self) -> np.ndarray:
        return 1 + 2 * self.s1 + self.s2


def gamma_coefficient(mu: float, rr: float, k: int, theta: float) -> float:
    """Interaction coefficient giving treated sensitive subjects rate ``rr``
    when their k sensitive covariates have mean ``theta``."""
    if not 0.0 < rr < 1.0:
        raise InvalidInput(f"rr must lie in (0,1), got {rr}")
    if k < 1:
        raise InvalidInput(f"k must be at least 1, got {k}")
    if theta == 0.0:
        raise InvalidInput("theta must be nonzero")
    return (math.log(rr / (1.0 - rr)) - mu) / (k * theta)


def _draw_block(gen, n, d, mean_hi, cov_hi, mean_lo, cov_lo, hi_mask):
    """Draw an n x d block; rows with hi_mask use the (mean_hi, cov_hi)
    equicorrelated normal, others (mean_lo, cov_lo).  The same standard
    normals feed both transforms so stream consumption is status-free."""
    if d == 0:
        return np.empty((n, 0))
    z = gen.standard_normal((n, d))
    L_hi = cholesky(equicorrelation_matrix(d, cov_hi[0], cov_hi[1]))
    L_lo = cholesky(equicorrelation_matrix(d, cov_lo[0], cov_lo[1]))
    x_hi = mean_hi + z @ L_hi.T
    x_lo = mean_lo + z @ L_lo.T
    return np.where(hi_mask[:, None], x_hi, x_lo)


def simulate_dataset(config: ScenarioConfig, rng: RngStream):
    """Generate one trial dataset with its ground truth.

    Returns (TrialDataset, GroundTruth).  Deterministic per (config, rng).
    """
    config.validate()
    n = config.n_subjects
    gen = rng.child("simulate").generator

    # subject sensitivity statuses from the quadrant fractions
    quadrant = gen.choice(4, size=n, p=np.asarray(config.cluster_fractions, dtype=float))
    s1 = (quadrant >= 2).astype(np.int64)
    s2 = (quadrant % 2).astype(np.int64)

    # equal randomisation
    arm = (gen.random(n) < 0.5).astype(np.int64)

    overlap, only1, only2, noise = config.covariate_blocks()
    th, s_var, s_rho = config.sens_params
    nu, ns_var, ns_rho = config.nonsens_params
    eta_m, nz_var, nz_rho = config.noise_params
    sens_cov = (s_var, s_rho)
    nons_cov = (ns_var, ns_rho)

    if config.table2_literal:
        hi1 = hi2 = hi_overlap = s1 == 1
    else:
        hi1 = s1 == 1
        hi2 = s2 == 1
        if config.overlap_rule == "either":
            hi_overlap = (s1 == 1) | (s2 == 1)
        else:
            hi_overlap = s1 == 1

    X = np.empty((n, config.n_covariates))
    X[:, overlap] = _draw_block(
        gen, n, overlap.size, th, sens_cov, nu, nons_cov, hi_overlap
    )
    X[:, only1] = _draw_block(gen, n, only1.size, th, sens_cov, nu, nons_cov, hi1)
    X[:, only2] = _draw_block(gen, n, only2.size, th, sens_cov, nu, nons_cov, hi2)
    if noise.size:
        z = gen.standard_normal((n, noise.size))
        L = cholesky(equicorrelation_matrix(noise.size, nz_var, nz_rho))
        X[:, noise] = eta_m + z @ L.T

    mu = math.log(config.control_rate / (1.0 - config.control_rate))
    sens1, sens2 = config.sensitive_sets()
    gamma1 = gamma_coefficient(mu, config.rr1, config.k_sens1, th)
    gamma2 = gamma_coefficient(mu, config.rr2, config.k_sens2, th)

    omega1 = mu + gamma1 * arm * s1 * X[:, sens1].sum(axis=1)
    omega2 = mu + gamma2 * arm * s2 * X[:, sens2].sum(axis=1)
    p1 = 1.0 / (1.0 + np.exp(-omega1))
    p2 = 1.0 / (1.0 + np.exp(-omega2))
    y1 = (gen.random(n) < p1).astype(np.int64)
    y2 = (gen.random(n) < p2).astype(np.int64)

    dataset = TrialDataset(arm=arm, y1=y1, y2=y2, covariates=X)
    truth = GroundTruth(
        s1=s1,
        s2=s2,
        sensitive_covariates_1=sens1,
        sensitive_covariates_2=sens2,
        overlap_elevated=np.asarray(hi_overlap, dtype=np.int64),
    )
    return dataset, truth
