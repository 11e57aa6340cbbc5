"""Replication-level aggregation into operating characteristics.

Turns per-replication test p-values, cluster assignments and ground truth
into the power, sensitivity/specificity and estimated-response-rate summary
of a simulation campaign.  All averages are computed from exact counts so
parallel reduction order cannot change the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .inference import AlphaSplit
from .scores import ClusterAssignment, TrialDataset
from .simengine import GroundTruth

__all__ = [
    "OperatingCharacteristics",
    "ReplicationResult",
    "aggregate",
    "classification_metrics",
    "estimated_rates",
    "truth_membership",
]


@dataclass
class ReplicationResult:
    """Everything one replication contributes to the aggregate.

    tp_p: (2,) trial-population p-values; sens_p: (2, k) Fisher p-values;
    est_rates: (k, 2) treated response rates (NaN when a cluster has no
    treated subjects); sens/spec: (k,) classification metrics (NaN when the
    truth class is empty).
    """

    tp_p: np.ndarray
    sens_p: np.ndarray
    est_rates: np.ndarray
    sensitivity: np.ndarray
    specificity: np.ndarray
    k: int


@dataclass
class OperatingCharacteristics:
    power_tp: np.ndarray  # (2,)
    power_sens: np.ndarray  # (2, k)
    power_overall: np.ndarray  # (2, k) empirical union
    sensitivity: np.ndarray  # (k,)
    specificity: np.ndarray  # (k,)
    est_rate: np.ndarray  # (k, 2)
    n_replications: int
    k: int
    mc_se: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(value):
            # absent cells serialize as null, never NaN
            if isinstance(value, list):
                return [clean(v) for v in value]
            if isinstance(value, float) and not np.isfinite(value):
                return None
            return value

        return {
            "n_replications": self.n_replications,
            "k": self.k,
            "power_tp": clean(self.power_tp.tolist()),
            "power_sens": clean(self.power_sens.tolist()),
            "power_overall": clean(self.power_overall.tolist()),
            "sensitivity": clean(self.sensitivity.tolist()),
            "specificity": clean(self.specificity.tolist()),
            "est_rate": clean(self.est_rate.tolist()),
            "mc_se": self.mc_se,
        }


def truth_membership(truth: GroundTruth, k: int, cluster: int) -> np.ndarray:
    """True membership of the designated cluster.

    k = 4 uses the quadrant map directly; k = 2 calls subjects sensitive
    exactly when they are sensitive to both outcomes (true cluster 4).
    """
    if k == 4:
        return truth.true_cluster == cluster
    if k == 2:
        if cluster == 2:
            return truth.true_cluster == 4
        return truth.true_cluster != 4
    raise InvalidInput(f"k must be 2 or 4, got {k}")


def classification_metrics(
    truth: GroundTruth, assignment: ClusterAssignment, cluster: int
) -> tuple:
    """(sensitivity, specificity) of predicting the designated cluster.

    Returns NaN for a metric whose truth class is empty."""
    pred = assignment.cluster_of == cluster
    actual = truth_membership(truth, assignment.k, cluster)
    n_pos = int(actual.sum())
    n_neg = int((~actual).sum())
    sens = float(np.sum(pred & actual) / n_pos) if n_pos else float("nan")
    spec = float(np.sum(~pred & ~actual) / n_neg) if n_neg else float("nan")
    return sens, spec


def estimated_rates(dataset: TrialDataset, assignment: ClusterAssignment) -> np.ndarray:
    """Treated response rate per cluster per outcome, shape (k, 2).

    Clusters without treated subjects get NaN (reported as absent)."""
    rates = np.full((assignment.k, 2), np.nan)
    treated = dataset.arm == 1
    for c in range(1, assignment.k + 1):
        cell = treated & (assignment.cluster_of == c)
        m = int(cell.sum())
        if m:
            rates[c - 1, 0] = float(dataset.y1[cell].sum() / m)
            rates[c - 1, 1] = float(dataset.y2[cell].sum() / m)
    return rates


def aggregate(results, alphas: AlphaSplit) -> OperatingCharacteristics:
    """Pool replications into powers, classification metrics and rates.

    power_tp is the rejection fraction at alpha1; power_sens at alpha2 per
    cluster; power_overall the per-replication union of the two events.
    NaN (absent) cells are excluded from metric and rate averages.
    """
    results = list(results)
    if not results:
        raise InvalidInput("need at least one replication")
    k = results[0].k
    R = len(results)
    tp_p = np.array([r.tp_p for r in results])  # (R, 2)
    sens_p = np.array([r.sens_p for r in results])  # (R, 2, k)
    tp_rej = tp_p <= alphas.alpha1
    sens_rej = sens_p <= alphas.alpha2
    overall = tp_rej[:, :, None] | sens_rej

    power_tp = tp_rej.sum(axis=0) / R
    power_sens = sens_rej.sum(axis=0) / R
    power_overall = overall.sum(axis=0) / R

    def nanavg(stack):
        with np.errstate(invalid="ignore"):
            return np.nanmean(stack, axis=0)

    sens = nanavg(np.array([r.sensitivity for r in results]))
    spec = nanavg(np.array([r.specificity for r in results]))
    rates = nanavg(np.array([r.est_rates for r in results]))

    def binom_se(p):
        return np.sqrt(np.asarray(p) * (1.0 - np.asarray(p)) / R)

    mc_se = {
        "power_tp": binom_se(power_tp).tolist(),
        "power_sens": binom_se(power_sens).tolist(),
        "power_overall": binom_se(power_overall).tolist(),
    }
    return OperatingCharacteristics(
        power_tp=power_tp,
        power_sens=power_sens,
        power_overall=power_overall,
        sensitivity=sens,
        specificity=spec,
        est_rate=rates,
        n_replications=R,
        k=k,
        mc_se=mc_se,
    )
