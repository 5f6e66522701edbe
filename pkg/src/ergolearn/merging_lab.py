"""Prediction races between a Bayesian belief and the true component.

A run samples one realization from the true component and, before each
outcome, scores the sup-norm distance between the belief's predictive and the
truth's own predictive.  Both are then updated on the realized outcome.  The
distance sequence is judged by its Cesàro means (weak merging) and by its tail
maximum (strong merging), both at a finite horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bayes_predictors import build_predictor
from .components import PATH_STREAM, PRNG_NAME, BernoulliComponent, build_component, make_rng
from .errors import ConfigError
from .process_core import CesaroTrace, Verdict, cesaro_means, full_density_limit_test

DEFAULT_EPSILON = 0.05
DEFAULT_TAIL_FRACTION = 0.5
DEFAULT_RECORD_THRESHOLD = 0.2
RECORD_TOL = 1e-9

# predictor kinds tied to one truth family
_REQUIRED_FAMILY = {
    "exchangeable": {"bernoulli"},
    "bernoulli_grid": {"bernoulli"},
    "hmm_grid": {"hmm"},
    "war_bayes": {"war"},
}


@dataclass
class MergingReport:
    N: int
    distances: CesaroTrace
    record_times: list
    verdict: Verdict
    metadata: dict
    path: np.ndarray = field(repr=False, default=None)
    predictions: np.ndarray = field(repr=False, default=None)

    @property
    def final_cesaro_mean(self) -> float:
        return self.distances.final_mean

    def trace_csv(self) -> str:
        lines = ["n,d_n,cesaro_mean"]
        for n, (d, m) in enumerate(zip(self.distances.values, self.distances.running_means)):
            lines.append(f"{n},{d:.17g},{m:.17g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "metadata": self.metadata,
            "final_cesaro_mean": self.final_cesaro_mean,
            "record_times": [[int(n), float(d)] for n, d in self.record_times],
            "verdict": self.verdict.as_dict(),
        }


def _records(values: np.ndarray, threshold: float) -> list:
    idx = np.flatnonzero(values >= threshold - RECORD_TOL)
    return [(int(n), float(values[n])) for n in idx]


def detect_record_times(report: MergingReport, threshold: float = DEFAULT_RECORD_THRESHOLD) -> list[int]:
    """Times ``n`` whose distance is at least ``threshold`` (up to 1e-9)."""
    return [n for n, _ in _records(report.distances.values, threshold)]


def _check_compatible(component, predictor_spec: dict) -> None:
    kind = predictor_spec.get("kind")
    allowed = _REQUIRED_FAMILY.get(kind)
    if allowed is not None and component.family not in allowed:
        raise ConfigError(
            [("predictor", f"predictor kind {kind!r} cannot predict a {component.family!r} truth")]
        )


def _race(truth, bayes, oracle, path: np.ndarray, keep_predictions: bool):
    n_steps = len(path)
    m = len(truth.alphabet)
    dist = np.empty(n_steps)
    preds = np.empty((n_steps, m)) if keep_predictions else None
    for n, a in enumerate(path.tolist()):
        p = bayes.predict()
        o = oracle.predict()
        if n == 0 and (len(p) != m or len(o) != m):
            raise ConfigError([("predictor", f"predictor alphabet size {len(p)} does not match truth alphabet size {m}")])
        dist[n] = np.max(np.abs(p - o))
        if keep_predictions:
            preds[n] = p
        bayes.update(a)
        oracle.update(a)
    return dist, preds


def _metadata(truth_spec, predictor_spec, N, seed, epsilon, tail_fraction, threshold, **extra) -> dict:
    meta = {
        "component": truth_spec,
        "predictor": predictor_spec,
        "N": int(N),
        "seed": int(seed),
        "epsilon": float(epsilon),
        "tail_fraction": float(tail_fraction),
        "record_threshold": float(threshold),
        "prng": PRNG_NAME,
        "numpy_version": np.__version__,
        "library_version": __version__,
        "thresholds_are_artifact_choices": True,
    }
    meta.update(extra)
    return meta


def run_merging_experiment(
    component_spec: dict,
    predictor_spec: dict,
    N: int,
    seed: int,
    epsilon: float = DEFAULT_EPSILON,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    record_threshold: float = DEFAULT_RECORD_THRESHOLD,
    keep_predictions: bool = False,
) -> MergingReport:
    """Race ``predictor_spec`` against the truth described by ``component_spec``.

    The distance at step ``n`` compares the two predictives for the outcome at
    ``n`` given outcomes ``0..n-1``.  A war truth without its own seed draws
    its labelling from ``seed`` (one draw from the uniform prior).
    """
    if N < 1:
        raise ConfigError([("N", f"horizon must be at least 1, got {N}")])
    truth = build_component(component_spec, seed=seed)
    _check_compatible(truth, predictor_spec)
    sampler = truth.sampler(make_rng(seed, PATH_STREAM))
    initial_hidden = sampler.initial_hidden
    path = sampler.sample_path(N)
    oracle = truth.oracle(initial_hidden)
    bayes = build_predictor(predictor_spec, truth, initial_hidden)
    dist, preds = _race(truth, bayes, oracle, path, keep_predictions)
    trace = cesaro_means(dist)
    return MergingReport(
        N=N,
        distances=trace,
        record_times=_records(dist, record_threshold),
        verdict=full_density_limit_test(trace, epsilon, tail_fraction),
        metadata=_metadata(truth.spec(), predictor_spec, N, seed, epsilon, tail_fraction, record_threshold),
        path=path,
        predictions=preds,
    )


class _PathOracle:
    """Knows the realization in advance: a point mass on the next outcome."""

    def __init__(self, path: np.ndarray, m: int):
        self.path = path
        self.m = m
        self.n = 0

    def predict(self) -> np.ndarray:
        out = np.zeros(self.m)
        out[self.path[self.n]] = 1.0
        return out

    def update(self, a: int) -> None:
        self.n += 1


def dirac_witness_experiment(
    N: int,
    seed: int,
    epsilon: float = DEFAULT_EPSILON,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    record_threshold: float = DEFAULT_RECORD_THRESHOLD,
    keep_predictions: bool = False,
) -> MergingReport:
    """Fair coin decomposed into point masses on its realizations.

    The parameter is the realization itself, so the "truth" predicts the next
    outcome with certainty while the fair-coin belief stays at (1/2, 1/2).
    Every distance is exactly 1/2 and nothing is ever learned.
    """
    if N < 1:
        raise ConfigError([("N", f"horizon must be at least 1, got {N}")])
    coin = BernoulliComponent(0.5)
    path = coin.sampler(make_rng(seed, PATH_STREAM)).sample_path(N)
    oracle = _PathOracle(path, 2)
    bayes = coin.oracle()
    dist, preds = _race(coin, bayes, oracle, path, keep_predictions)
    trace = cesaro_means(dist)
    return MergingReport(
        N=N,
        distances=trace,
        record_times=_records(dist, record_threshold),
        verdict=full_density_limit_test(trace, epsilon, tail_fraction),
        metadata=_metadata(
            {"family": "dirac", "parameters": {"base": coin.spec()}},
            {"kind": "constant", "weights": [0.5, 0.5]},
            N, seed, epsilon, tail_fraction, record_threshold,
        ),
        path=path,
        predictions=preds,
    )


# --------------------------------------------------------------------------
# Calibration
# --------------------------------------------------------------------------

MIN_CONFIDENT_SAMPLES = 30


@dataclass(frozen=True)
class CalibrationBin:
    symbol: int
    low: float
    high: float
    count: int
    mean_predicted: float
    empirical_frequency: float
    low_confidence: bool

    @property
    def center(self) -> float:
        return 0.5 * (self.low + self.high)


@dataclass
class CalibrationReport:
    bin_width: float
    N: int
    bins: list

    def for_symbol(self, a: int) -> list:
        return [b for b in self.bins if b.symbol == a]

    def active(self, min_count: int = 1) -> list:
        return [b for b in self.bins if b.count >= min_count]

    def to_csv(self) -> str:
        lines = ["symbol,bin_low,bin_high,count,mean_predicted,empirical_frequency,low_confidence"]
        for b in self.bins:
            mp = "" if b.count == 0 else f"{b.mean_predicted:.17g}"
            ef = "" if b.count == 0 else f"{b.empirical_frequency:.17g}"
            lines.append(f"{b.symbol},{b.low:.17g},{b.high:.17g},{b.count},{mp},{ef},{int(b.low_confidence)}")
        return "\n".join(lines) + "\n"


def calibration_test(predictions, realized, bin_width: float = 0.1) -> CalibrationReport:
    """Bin each symbol's predicted probability and compare with realized frequency.

    Bin ``j`` is ``[j*w, (j+1)*w)``; the last bin also takes probability 1.
    Bins holding fewer than 30 predictions are flagged low-confidence.
    """
    if not 0 < bin_width <= 1:
        raise ValueError(f"bin_width must lie in (0, 1], got {bin_width}")
    preds = np.asarray(predictions, dtype=np.float64)
    obs = np.asarray(realized, dtype=np.int64)
    if preds.ndim != 2 or preds.shape[0] != obs.shape[0]:
        raise ValueError("predictions must be (N, m) and match the realized outcomes")
    n_bins = max(1, math.ceil(1.0 / bin_width - 1e-9))
    bins = []
    for a in range(preds.shape[1]):
        p = preds[:, a]
        idx = np.clip(np.floor(p / bin_width + 1e-9).astype(np.int64), 0, n_bins - 1)
        hit = (obs == a).astype(np.float64)
        counts = np.bincount(idx, minlength=n_bins)
        sums = np.bincount(idx, weights=p, minlength=n_bins)
        hits = np.bincount(idx, weights=hit, minlength=n_bins)
        for j in range(n_bins):
            c = int(counts[j])
            bins.append(
                CalibrationBin(
                    symbol=a,
                    low=round(j * bin_width, 12),
                    high=min(1.0, round((j + 1) * bin_width, 12)),
                    count=c,
                    mean_predicted=float(sums[j] / c) if c else math.nan,
                    empirical_frequency=float(hits[j] / c) if c else math.nan,
                    low_confidence=c < MIN_CONFIDENT_SAMPLES,
                )
            )
    return CalibrationReport(bin_width=bin_width, N=int(obs.shape[0]), bins=bins)


def calibration_from_report(report: MergingReport, bin_width: float = 0.1) -> CalibrationReport:
    if report.predictions is None:
        raise ValueError("run the experiment with keep_predictions=True to calibrate it")
    return calibration_test(report.predictions, report.path, bin_width)

