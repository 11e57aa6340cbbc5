import json

import numpy as np
import pytest

from sigtrial.errors import InvalidInput
from sigtrial.inference import AlphaSplit
from sigtrial.opchar import (
    ReplicationResult,
    aggregate,
    classification_metrics,
    estimated_rates,
    truth_membership,
)
from sigtrial.scores import ClusterAssignment, TrialDataset
from sigtrial.simengine import GroundTruth


def make_truth():
    return GroundTruth(
        s1=np.array([0, 0, 1, 1, 1, 0]),
        s2=np.array([0, 1, 0, 1, 1, 0]),
        sensitive_covariates_1=np.arange(2),
        sensitive_covariates_2=np.arange(2),
    )


class TestTruthMembership:
    def test_k4(self):
        truth = make_truth()
        assert np.array_equal(
            truth_membership(truth, 4, 4), [False, False, False, True, True, False]
        )
        assert np.array_equal(
            truth_membership(truth, 4, 1), [True, False, False, False, False, True]
        )

    def test_k2(self):
        truth = make_truth()
        assert np.array_equal(
            truth_membership(truth, 2, 2), [False, False, False, True, True, False]
        )
        assert np.array_equal(
            truth_membership(truth, 2, 1), [True, True, True, False, False, True]
        )

    def test_invalid_k(self):
        with pytest.raises(InvalidInput):
            truth_membership(make_truth(), 3, 1)


class TestClassificationMetrics:
    def test_hand_example(self):
        truth = make_truth()
        # predict subjects 3,4 as cluster 4 (truth: 3,4) -> perfect
        assignment = ClusterAssignment(np.array([1, 2, 3, 4, 4, 1]), 4)
        sens, spec = classification_metrics(truth, assignment, 4)
        assert sens == 1.0 and spec == 1.0
        # one miss, one false positive
        assignment = ClusterAssignment(np.array([4, 2, 3, 4, 1, 1]), 4)
        sens, spec = classification_metrics(truth, assignment, 4)
        assert sens == pytest.approx(0.5)
        assert spec == pytest.approx(3 / 4)

    def test_empty_truth_class_is_nan(self):
        truth = GroundTruth(
            s1=np.zeros(4, dtype=int), s2=np.zeros(4, dtype=int),
            sensitive_covariates_1=np.arange(1),
            sensitive_covariates_2=np.arange(1),
        )
        assignment = ClusterAssignment(np.array([1, 1, 2, 2]), 2)
        sens, spec = classification_metrics(truth, assignment, 2)
        assert np.isnan(sens) and spec == pytest.approx(0.5)


class TestEstimatedRates:
    def test_hand_example(self):
        ds = TrialDataset(
            arm=np.array([1, 1, 1, 1, 0, 0]),
            y1=np.array([1, 0, 1, 1, 1, 1]),
            y2=np.array([0, 0, 1, 0, 1, 1]),
            covariates=np.zeros((6, 1)),
        )
        assignment = ClusterAssignment(np.array([1, 1, 2, 2, 1, 2]), 2)
        rates = estimated_rates(ds, assignment)
        assert rates[0] == pytest.approx([0.5, 0.0])
        assert rates[1] == pytest.approx([1.0, 0.5])

    def test_untreated_cluster_nan(self):
        ds = TrialDataset(
            arm=np.array([1, 1, 0, 0]),
            y1=np.array([1, 0, 1, 0]),
            y2=np.array([0, 1, 0, 1]),
            covariates=np.zeros((4, 1)),
        )
        assignment = ClusterAssignment(np.array([1, 1, 2, 2]), 2)
        rates = estimated_rates(ds, assignment)
        assert np.all(np.isnan(rates[1]))


def fake_result(tp, sens, k=2, rates=None, cls=None):
    return ReplicationResult(
        tp_p=np.asarray(tp, dtype=float),
        sens_p=np.asarray(sens, dtype=float),
        est_rates=np.full((k, 2), 0.5) if rates is None else np.asarray(rates),
        sensitivity=np.ones(k) if cls is None else np.asarray(cls),
        specificity=np.ones(k) if cls is None else np.asarray(cls),
        k=k,
    )


class TestAggregate:
    def test_exact_counting(self):
        alphas = AlphaSplit(0.04, 0.01)
        results = [
            fake_result([0.03, 0.5], [[0.005, 0.5], [0.5, 0.5]]),
            fake_result([0.5, 0.03], [[0.5, 0.5], [0.005, 0.5]]),
            fake_result([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]),
            fake_result([0.04, 0.5], [[0.5, 0.01], [0.5, 0.5]]),
        ]
        oc = aggregate(results, alphas)
        assert oc.power_tp == pytest.approx([0.5, 0.25])
        # outcome 1, cluster 1: only rep 1 rejects at alpha2
        assert oc.power_sens[0, 0] == pytest.approx(0.25)
        assert oc.power_sens[0, 1] == pytest.approx(0.25)
        # union for outcome 1 cluster 1: reps 1 (both tests) and 4 (tp only)
        assert oc.power_overall[0, 0] == pytest.approx(0.5)

    def test_boundary_inclusive(self):
        alphas = AlphaSplit(0.04, 0.01)
        oc = aggregate([fake_result([0.04, 1.0], [[0.01, 1.0], [1.0, 1.0]])], alphas)
        assert oc.power_tp[0] == 1.0
        assert oc.power_sens[0, 0] == 1.0

    def test_nan_cells_excluded_from_averages(self):
        r1 = fake_result([1, 1], [[1, 1], [1, 1]],
                         rates=[[0.2, 0.2], [np.nan, np.nan]])
        r2 = fake_result([1, 1], [[1, 1], [1, 1]],
                         rates=[[0.4, 0.4], [0.6, 0.6]])
        oc = aggregate([r1, r2], AlphaSplit())
        assert oc.est_rate[0, 0] == pytest.approx(0.3)
        assert oc.est_rate[1, 0] == pytest.approx(0.6)

    def test_mc_se(self):
        results = [fake_result([0.01, 1.0], [[1, 1], [1, 1]]) for _ in range(8)]
        results += [fake_result([1.0, 1.0], [[1, 1], [1, 1]]) for _ in range(8)]
        oc = aggregate(results, AlphaSplit())
        assert oc.power_tp[0] == pytest.approx(0.5)
        assert oc.mc_se["power_tp"][0] == pytest.approx(np.sqrt(0.25 / 16))

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            aggregate([], AlphaSplit())

    def test_to_dict_serializes_nan_as_null(self):
        r = fake_result([1, 1], [[1, 1], [1, 1]],
                        rates=[[np.nan, np.nan], [0.5, 0.5]])
        oc = aggregate([r], AlphaSplit())
        payload = json.dumps(oc.to_dict())
        d = json.loads(payload)
        assert d["est_rate"][0][0] is None
        assert d["est_rate"][1][0] == 0.5
