"""Hypothesis tests: trial population, sensitive group, and permutation.

The trial-population test compares arms over all subjects; the
sensitive-group test is Fisher's exact test within one cluster; the
permutation procedure reruns the full cross-validation pipeline for every
relabeled dataset and counts permuted interaction p-values at or below the
observed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .glm import interaction_wald_p
from .scores import (
    ClusterAssignment,
    TrialDataset,
    combine_marginal,
    cvrs2,
    cvrs_marginal,
    make_folds,
)
from .statnum import RngStream, TestResult, fisher_exact, two_proportion_test

__all__ = [
    "AlphaSplit",
    "overall_power_formula",
    "permutation_pvalue",
    "run_permutation_test",
    "sensitive_group_test",
    "trial_population_test",
]


@dataclass(frozen=True)
class AlphaSplit:
    """Significance-level split: trial population alpha1, sensitive group
    alpha2; the overall level is their sum."""

    alpha1: float = 0.04
    alpha2: float = 0.01

    @property
    def overall(self) -> float:
        return self.alpha1 + self.alpha2


def trial_population_test(dataset: TrialDataset, outcome_index: int) -> TestResult:
    """Two-proportion arm comparison over all subjects for one outcome."""
    y = dataset.outcome(outcome_index)
    treat = dataset.arm == 1
    return two_proportion_test(
        int(y[treat].sum()), int(treat.sum()),
        int(y[~treat].sum()), int((~treat).sum()),
    )


def sensitive_group_test(
    dataset: TrialDataset,
    assignment: ClusterAssignment,
    cluster: int,
    outcome_index: int,
) -> TestResult:
    """Fisher exact arm-by-response test restricted to one cluster.

    A cluster missing subjects on either arm is degenerate (p = 1)."""
    y = dataset.outcome(outcome_index)
    members = assignment.cluster_of == cluster
    if not np.any(members & (dataset.arm == 1)) or not np.any(
        members & (dataset.arm == 0)
    ):
        return TestResult(1.0, 0.0, "fisher_exact", degenerate=True)
    treat = members & (dataset.arm == 1)
    ctrl = members & (dataset.arm == 0)
    table = [
        [int(y[treat].sum()), int(treat.sum() - y[treat].sum())],
        [int(y[ctrl].sum()), int(ctrl.sum() - y[ctrl].sum())],
    ]
    return fisher_exact(table)


def permutation_pvalue(p0: float, p_star) -> float:
    """(1 + #{p* <= p0}) / (1 + #permutations)."""
    p_star = np.asarray(p_star, dtype=float)
    if p_star.size == 0:
        raise InvalidInput("p_star must be nonempty")
    return float((1 + np.sum(p_star <= p0)) / (1 + p_star.size))


def overall_power_formula(p_tp: float, p_sens: float) -> float:
    """Probability of a significant result in either the trial population or
    the sensitive group, p_tp + (1 - p_tp) * p_sens."""
    for p in (p_tp, p_sens):
        if not 0.0 <= p <= 1.0:
            raise InvalidInput(f"probability outside [0,1]: {p}")
    return p_tp + (1.0 - p_tp) * p_sens


def _interaction_pvalue(dataset, assignment, cluster, outcome_index):
    sensitive = (assignment.cluster_of == cluster).astype(np.int64)
    return interaction_wald_p(
        dataset.arm, sensitive, dataset.outcome(outcome_index)
    ).p_value


def _run_cv(dataset, method, k, r_folds, rng):
    """Per-outcome assignments for one full cross-validation run.

    The bivariate method yields one shared assignment.  The marginal method
    yields one 2-cluster assignment per outcome, or their 4-group
    intersection when k = 4.
    """
    folds = make_folds(dataset.n, r_folds, rng)
    if method == "cvrs2":
        a = cvrs2(dataset, folds, k, rng).assignment
        return a, a
    if method == "cvrs_marginal":
        c1 = cvrs_marginal(dataset, 1, folds, rng.child("m1")).assignment
        c2 = cvrs_marginal(dataset, 2, folds, rng.child("m2")).assignment
        if k == 4:
            combined = combine_marginal(c1, c2)
            return combined, combined
        return c1, c2
    raise InvalidInput(f"unknown method {method!r}")


def run_permutation_test(
    dataset: TrialDataset,
    method: str,
    k: int,
    cluster: int,
    n_perm: int,
    rng: RngStream,
    r_folds: int = 10,
) -> np.ndarray:
    """Permutation p-values per outcome for the designated sensitive cluster.

    The observed interaction p-values come from a full cross-validation run;
    each permutation redraws the treatment labels uniformly on its own
    deterministic stream, reruns the entire pipeline, and recomputes the
    interaction p-values.  Degenerate permutations contribute p* = 1.
    """
    if n_perm < 1:
        raise InvalidInput("n_perm must be at least 1")
    a1, a2 = _run_cv(dataset, method, k, r_folds, rng.child("observed"))
    p0 = np.array([
        _interaction_pvalue(dataset, a1, cluster, 1),
        _interaction_pvalue(dataset, a2, cluster, 2),
    ])

    p_star = np.ones((n_perm, 2))
    for q in range(1, n_perm + 1):
        perm_rng = rng.child("perm", q)
        perm = perm_rng.generator.permutation(dataset.n)
        permuted = TrialDataset(
            arm=dataset.arm[perm],
            y1=dataset.y1,
            y2=dataset.y2,
            covariates=dataset.covariates,
            covariate_names=list(dataset.covariate_names),
        )
        pa1, pa2 = _run_cv(permuted, method, k, r_folds, perm_rng)
        p_star[q - 1, 0] = _interaction_pvalue(permuted, pa1, cluster, 1)
        p_star[q - 1, 1] = _interaction_pvalue(permuted, pa2, cluster, 2)

    return np.array(
        [permutation_pvalue(p0[i], p_star[:, i]) for i in range(2)]
    )
