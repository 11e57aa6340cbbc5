"""Adaptive signature design with cross-validated bivariate risk scores.

Subject-level risk scores are built from per-covariate treatment-by-covariate
regressions (a bivariate odds-ratio model for two binary outcomes, or plain
logistic for one), pooled across cross-validation folds, and partitioned by
k-means into treatment-sensitive and non-sensitive groups.  Inference uses a
split significance level: a population test plus a permutation test of the
treatment-by-sensitivity interaction.  A simulation engine reproduces the
operating characteristics of the design under configurable scenarios.
"""

from ._backend import backend_name
from .bivglm import BivariateFit, fit_bivariate_or, plackett_joint
from .clustering import canonicalize, kmeans
from .glm import fit_logistic
from .inference import AlphaSplit, run_permutation_test
from .runner import run_campaign, run_replication
from .scores import TrialDataset, combine_marginal, cvrs2, cvrs_marginal, make_folds
from .simengine import ScenarioConfig, gamma_coefficient, simulate_dataset
from .statnum import RngStream, fisher_exact, two_proportion_test

__version__ = "0.1.0"

__all__ = [
    "AlphaSplit",
    "BivariateFit",
    "RngStream",
    "ScenarioConfig",
    "TrialDataset",
    "backend_name",
    "canonicalize",
    "combine_marginal",
    "cvrs2",
    "cvrs_marginal",
    "fisher_exact",
    "fit_bivariate_or",
    "fit_logistic",
    "gamma_coefficient",
    "kmeans",
    "make_folds",
    "plackett_joint",
    "run_campaign",
    "run_permutation_test",
    "run_replication",
    "simulate_dataset",
    "two_proportion_test",
    "__version__",
]
