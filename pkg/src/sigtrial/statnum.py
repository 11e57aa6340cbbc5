"""Numerical and statistical primitives.

Equicorrelated covariance handling, multivariate normal sampling, the
two-proportion z-test, Fisher's exact test, and a deterministic stream-keyed
random number generator used to make every replication and permutation
reproducible independently of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidInput, NotPositiveDefinite

__all__ = [
    "CovarianceSpec",
    "RngStream",
    "TestResult",
    "cholesky",
    "equicorrelation_matrix",
    "fisher_exact",
    "mvn_sample",
    "normal_sf2",
    "two_proportion_test",
]


@dataclass(frozen=True)
class CovarianceSpec:
    """Equicorrelated covariance: variance * [(1-corr) I + corr J]."""

    dim: int
    variance: float
    correlation: float

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput(f"dim must be positive, got {self.dim}")
        if not self.variance > 0:
            raise InvalidInput(f"variance must be positive, got {self.variance}")
        if not 0.0 <= self.correlation < 1.0:
            raise InvalidInput(
                f"correlation must lie in [0, 1), got {self.correlation}"
            )

    def matrix(self) -> np.ndarray:
        c = self.variance * self.correlation
        m = np.full((self.dim, self.dim), c)
        np.fill_diagonal(m, self.variance)
        return m


class RngStream:
    """Deterministic random stream keyed by (seed, stream_index).

    Equal keys give identical draw sequences on every run and platform;
    distinct keys give statistically independent streams.  ``child`` derives
    a sub-stream from an extended key, so concurrent tasks never share a
    generator.
    """

    def __init__(self, seed: int, stream_index: int = 0, _key: tuple = ()):
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        self._key = (self.stream_index,) + tuple(_key)
        self._gen = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._key)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, *key) -> "RngStream":
        """Derive an independent sub-stream; key parts are small ints/strings."""
        parts = tuple(
            p if isinstance(p, int) else _string_key(p) for p in key
        )
        return RngStream(self.seed, self.stream_index, self._key[1:] + parts)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self._key})"


def _string_key(s: str) -> int:
    # stable, platform-independent mapping of a short label to an int key
    h = 0
    for ch in str(s):
        h = (h * 131 + ord(ch)) % (2**31 - 1)
    return h


def equicorrelation_matrix(dim: int, variance: float, correlation: float) -> np.ndarray:
    return CovarianceSpec(dim, variance, correlation).matrix()


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == matrix.

    Raises NotPositiveDefinite when a pivot is non-positive.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix entries must be finite")
    if not np.allclose(a, a.T, atol=1e-10):
        raise InvalidInput("matrix must be symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def mvn_sample(
    mean: np.ndarray,
    chol_factor: np.ndarray,
    rng: RngStream,
    size: int | None = None,
) -> np.ndarray:
    """Draw mean + L z with z iid standard normal from the stream.

    With ``size`` given, returns a (size, d) array of independent draws.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = np.asarray(chol_factor, dtype=float)
    d = mean.shape[0]
    if L.shape != (d, d):
        raise DimensionMismatch(
            f"factor shape {L.shape} does not match mean dimension {d}"
        )
    gen = rng.generator
    if size is None:
        z = gen.standard_normal(d)
        return mean + L @ z
    z = gen.standard_normal((size, d))
    return mean + z @ L.T


@dataclass(frozen=True)
class TestResult:
    """p-value with its statistic and a degeneracy flag."""

    p_value: float
    statistic: float = float("nan")
    test_name: str = ""
    degenerate: bool = False


def normal_sf2(z: float) -> float:
    """Two-sided standard-normal tail probability, P(|Z| >= |z|)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def two_proportion_test(
    x1: int, n1: int, x2: int, n2: int, continuity_correction: bool = False
) -> TestResult:
    """Two-sided pooled-variance z-test for the difference of two proportions.

    Degenerate inputs (pooled proportion 0 or 1) give p = 1 with the
    degenerate flag set.  The continuity correction is off by default.
    """
    for x, n in ((x1, n1), (x2, n2)):
        if n < 1 or not 0 <= x <= n:
            raise InvalidInput(f"invalid counts x={x}, n={n}")
    pooled = (x1 + x2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        return TestResult(1.0, 0.0, "two_proportion", degenerate=True)
    p1, p2 = x1 / n1, x2 / n2
    diff = abs(p1 - p2)
    if continuity_correction:
        diff = max(0.0, diff - 0.5 * (1.0 / n1 + 1.0 / n2))
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = diff / se
    return TestResult(normal_sf2(z), z, "two_proportion")


def _log_hyper_pmf(x: int, m: int, n: int, k: int) -> float:
    # P(X = x) for X ~ Hypergeometric(total m+n, successes m, draws k)
    return (
        _lchoose(m, x)
        + _lchoose(n, k - x)
        - _lchoose(m + n, k)
    )


def _lchoose(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return (
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    )


def fisher_exact(table) -> TestResult:
    """Two-sided Fisher exact p-value for a 2x2 table.

    Probability-mass method: sums hypergeometric probabilities of all tables
    with the same margins whose probability does not exceed the observed
    table's probability (with 1e-7 relative slack).  Degenerate margins give
    p = 1.
    """
    t = np.asarray(table, dtype=np.int64)
    if t.shape != (2, 2):
        raise InvalidInput(f"expected 2x2 table, got shape {t.shape}")
    if np.any(t < 0):
        raise InvalidInput("counts must be nonnegative")
    a, b = int(t[0, 0]), int(t[0, 1])
    c, d = int(t[1, 0]), int(t[1, 1])
    total = a + b + c + d
    if total < 1:
        raise InvalidInput("table total must be at least 1")
    r1, c1 = a + b, a + c
    if r1 == 0 or r1 == total or c1 == 0 or c1 == total:
        return TestResult(1.0, float(a), "fisher_exact", degenerate=True)
    lo = max(0, r1 + c1 - total)
    hi = min(r1, c1)
    log_obs = _log_hyper_pmf(a, c1, total - c1, r1)
    cutoff = log_obs + math.log1p(1e-7)
    p = 0.0
    for x in range(lo, hi + 1):
        lp = _log_hyper_pmf(x, c1, total - c1, r1)
        if lp <= cutoff:
            p += math.exp(lp)
    return TestResult(min(p, 1.0), float(a), "fisher_exact")
