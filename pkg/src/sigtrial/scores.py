"""Cross-validated risk scores and cluster memberships.

Builds per-subject scores by fitting single-covariate interaction models on
each training fold and scoring the held-out fold, then clusters the pooled
scores of all subjects with one k-means run and canonical labels.  Covers
the bivariate two-outcome scores, the marginal single-outcome scores, and
the four-group intersection of two marginal splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bivglm import fit_covariate_matrix
from .clustering import canonicalize, kmeans
from .errors import InvalidFoldCount, InvalidInput, LengthMismatch
from .glm import fit_single_covariate_interaction
from .statnum import RngStream

__all__ = [
    "ClusterAssignment",
    "CvResult",
    "FoldPlan",
    "TrialDataset",
    "combine_marginal",
    "cvrs2",
    "cvrs_marginal",
    "make_folds",
]


@dataclass
class TrialDataset:
    """Subjects with arm, two binary outcomes and a covariate matrix."""

    arm: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    covariates: np.ndarray
    covariate_names: list = field(default_factory=list)

    def __post_init__(self):
        self.arm = np.asarray(self.arm, dtype=np.int64)
        self.y1 = np.asarray(self.y1, dtype=np.int64)
        self.y2 = np.asarray(self.y2, dtype=np.int64)
        self.covariates = np.asarray(self.covariates, dtype=float)
        n = self.arm.shape[0]
        if self.y1.shape != (n,) or self.y2.shape != (n,):
            raise LengthMismatch("outcome arrays must match subject count")
        if self.covariates.ndim != 2 or self.covariates.shape[0] != n:
            raise LengthMismatch("covariate matrix must have one row per subject")
        if not np.all(np.isfinite(self.covariates)):
            raise InvalidInput("covariates must not contain missing values")
        for arr, name in ((self.arm, "arm"), (self.y1, "y1"), (self.y2, "y2")):
            if not np.all((arr == 0) | (arr == 1)):
                raise InvalidInput(f"{name} must be binary")
        if self.arm.min() == self.arm.max():
            raise InvalidInput("both arms must be present")
        if not self.covariate_names:
            self.covariate_names = [f"x{j+1}" for j in range(self.covariates.shape[1])]
        elif len(self.covariate_names) != self.covariates.shape[1]:
            raise LengthMismatch("covariate_names must match the covariate count")

    @property
    def n(self) -> int:
        return self.arm.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def outcome(self, outcome_index: int) -> np.ndarray:
        if outcome_index == 1:
            return self.y1
        if outcome_index == 2:
            return self.y2
        raise InvalidInput(f"outcome_index must be 1 or 2, got {outcome_index}")


@dataclass(frozen=True)
class FoldPlan:
    fold_of: np.ndarray  # subject -> fold index in {1..r}
    r: int


@dataclass
class ClusterAssignment:
    cluster_of: np.ndarray  # subject -> canonical cluster in {1..k}
    k: int


@dataclass
class CvResult:
    """Pooled scores and memberships, with per-fold coefficients for reports.

    ``scores`` has shape (n, 2) for the bivariate method and (n,) for the
    marginal method; ``fold_coefs`` has shape (r, J, 2) or (r, J).
    """

    scores: np.ndarray
    assignment: ClusterAssignment
    fold_coefs: np.ndarray


def make_folds(n: int, r: int, rng: RngStream) -> FoldPlan:
    """Uniformly random balanced partition into r folds (sizes differ <= 1)."""
    if not (isinstance(r, int) and 2 <= r <= n):
        raise InvalidFoldCount(f"need n >= r >= 2, got n={n}, r={r}")
    perm = rng.child("folds").generator.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % r + 1
    return FoldPlan(fold_of=fold_of, r=r)


def _pooled_cv(dataset, folds, k, rng, fit_fold, dim):
    n, J = dataset.n, dataset.n_covariates
    scores = np.zeros((n, dim)) if dim == 2 else np.zeros(n)
    fold_coefs = np.zeros((folds.r, J, dim)) if dim == 2 else np.zeros((folds.r, J))
    for l in range(1, folds.r + 1):
        test = folds.fold_of == l
        train = ~test
        coefs = fit_fold(train)  # (J, dim) or (J,)
        fold_coefs[l - 1] = coefs
        scores[test] = dataset.covariates[test] @ coefs
    result = kmeans(scores, k, rng.child("cluster"))
    labels = canonicalize(result.centroids)
    return CvResult(
        scores=scores,
        assignment=ClusterAssignment(cluster_of=labels.apply(result.assignment), k=k),
        fold_coefs=fold_coefs,
    )


def cvrs2(
    dataset: TrialDataset, folds: FoldPlan, k: int, rng: RngStream
) -> CvResult:
    """Bivariate cross-validated risk scores pooled across folds.

    Per fold: one bivariate odds-ratio fit per covariate on the training
    subjects, held-out subjects scored by the two interaction-coefficient
    sums.  The pooled scores of all subjects are then partitioned by one
    k-means run with canonical labels.  Degenerate fits contribute zero
    coefficients.
    """
    if k not in (2, 4):
        raise InvalidInput(f"k must be 2 or 4, got {k}")

    def fit_fold(train):
        return fit_covariate_matrix(
            dataset.covariates[train],
            dataset.arm[train],
            dataset.y1[train],
            dataset.y2[train],
        )

    return _pooled_cv(dataset, folds, k, rng, fit_fold, dim=2)


def cvrs_marginal(
    dataset: TrialDataset, outcome_index: int, folds: FoldPlan, rng: RngStream
) -> CvResult:
    """Single-outcome cross-validated risk scores (two clusters).

    Same skeleton as the bivariate method with a univariate logistic
    interaction fit per covariate and 1-D k-means with k = 2; canonical
    label 2 is the higher-score cluster.
    """
    y = dataset.outcome(outcome_index)

    def fit_fold(train):
        t = dataset.arm[train].astype(float)
        yy = y[train].astype(float)
        X = dataset.covariates[train]
        return np.array(
            [
                fit_single_covariate_interaction(X[:, j], t, yy)
                for j in range(X.shape[1])
            ]
        )

    return _pooled_cv(dataset, folds, 2, rng, fit_fold, dim=1)


def combine_marginal(c1: ClusterAssignment, c2: ClusterAssignment) -> ClusterAssignment:
    """Intersect two 2-cluster splits into the canonical 4-group labels:
    (non-sens, non-sens) -> 1, (non-sens, sens) -> 2, (sens, non-sens) -> 3,
    (sens, sens) -> 4."""
    if c1.k != 2 or c2.k != 2:
        raise InvalidInput("both assignments must have k = 2")
    if c1.cluster_of.shape != c2.cluster_of.shape:
        raise LengthMismatch("assignments must cover the same subjects")
    s1 = (c1.cluster_of == 2).astype(np.int64)
    s2 = (c2.cluster_of == 2).astype(np.int64)
    return ClusterAssignment(cluster_of=1 + 2 * s1 + s2, k=4)
