"""Simulation campaign driver.

One replication = simulate a dataset, run the cross-validated scoring, test,
and summarize.  Replications are keyed by (seed, replication index) streams,
so campaigns are reproducible at any worker count; results are reduced in
replication order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .inference import AlphaSplit, sensitive_group_test, trial_population_test
from .opchar import (
    OperatingCharacteristics,
    ReplicationResult,
    aggregate,
    classification_metrics,
    estimated_rates,
)
from .scores import combine_marginal, cvrs2, cvrs_marginal, make_folds
from .simengine import ScenarioConfig, simulate_dataset
from .statnum import RngStream

__all__ = ["ReplicationOutput", "run_campaign", "run_replication"]


@dataclass
class ReplicationOutput:
    """ReplicationResult plus the per-subject artifacts needed for score
    dumps (kept only when requested, to keep inter-process traffic small)."""

    result: ReplicationResult
    scores: np.ndarray | None = None
    cluster_of: np.ndarray | None = None
    true_cluster: np.ndarray | None = None


def run_replication(
    scenario: ScenarioConfig,
    method: str,
    k: int,
    r_folds: int,
    seed: int,
    rep_index: int,
    keep_scores: bool = False,
) -> ReplicationOutput:
    """Run one simulated replication on stream (seed, rep_index)."""
    rng = RngStream(seed, rep_index)
    dataset, truth = simulate_dataset(scenario, rng)
    folds = make_folds(dataset.n, r_folds, rng)

    if method == "cvrs2":
        cv = cvrs2(dataset, folds, k, rng)
        assignment = cv.assignment
        scores = cv.scores
    elif method == "cvrs_marginal":
        c1 = cvrs_marginal(dataset, 1, folds, rng.child("m1"))
        c2 = cvrs_marginal(dataset, 2, folds, rng.child("m2"))
        scores = np.column_stack([c1.scores, c2.scores])
        if k == 4:
            assignment = combine_marginal(c1.assignment, c2.assignment)
        else:
            assignment = c1.assignment
    else:
        raise ValueError(f"unknown method {method!r}")

    tp_p = np.array(
        [trial_population_test(dataset, i).p_value for i in (1, 2)]
    )
    sens_p = np.array(
        [
            [
                sensitive_group_test(dataset, assignment, c, i).p_value
                for c in range(1, k + 1)
            ]
            for i in (1, 2)
        ]
    )
    rates = estimated_rates(dataset, assignment)
    sens = np.empty(k)
    spec = np.empty(k)
    for c in range(1, k + 1):
        sens[c - 1], spec[c - 1] = classification_metrics(truth, assignment, c)

    result = ReplicationResult(
        tp_p=tp_p,
        sens_p=sens_p,
        est_rates=rates,
        sensitivity=sens,
        specificity=spec,
        k=k,
    )
    return ReplicationOutput(
        result=result,
        scores=scores if keep_scores else None,
        cluster_of=assignment.cluster_of if keep_scores else None,
        true_cluster=truth.true_cluster if keep_scores else None,
    )


def _worker(args):
    return run_replication(*args)


def run_campaign(
    scenario: ScenarioConfig,
    method: str,
    k: int,
    r_folds: int,
    seed: int,
    n_replications: int,
    alphas: AlphaSplit,
    threads: int = 1,
    dump_scores: int = 0,
) -> tuple[OperatingCharacteristics, list]:
    """Run a campaign; returns (aggregate, score dumps for the first
    ``dump_scores`` replications)."""
    jobs = [
        (scenario, method, k, r_folds, seed, rep, rep < dump_scores)
        for rep in range(n_replications)
    ]
    if threads <= 0:
        threads = os.cpu_count() or 1
    if threads == 1:
        outputs = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_worker, jobs, chunksize=4))
    oc = aggregate([o.result for o in outputs], alphas)
    dumps = [o for o in outputs[:dump_scores]]
    return oc, dumps
