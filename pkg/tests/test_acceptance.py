"""Numbered acceptance criteria.

Each test carries an ``acceptance`` marker; the conftest hook prints one
PASS/FAIL line per criterion at the end of the session.  Runtime budgets are
asserted inside the tests.
"""

import copy
import itertools
import json
import math
import time

import numpy as np
import pytest

from ergolearn.bayes_predictors import (
    ExchangeablePosterior,
    bernoulli_grid,
    exchangeable_predictive,
    mixture_predictive,
    rule_of_succession,
)
from ergolearn.cli import main
from ergolearn.components import BernoulliComponent, HiddenMarkovComponent, WarComponent, make_rng
from ergolearn.decisions import DecisionProblem, epsilon_optimality_gap
from ergolearn.empirical import block_frequencies, max_block_gap
from ergolearn.merging_lab import dirac_witness_experiment, run_merging_experiment
from ergolearn.process_core import BINARY, WAR_ALPHABET

from oracles import dirichlet_block_law

SEEDS = list(range(1, 21))


class Budget:
    def __init__(self, seconds, record_property):
        self.seconds = seconds
        self.record = record_property

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        self.record("elapsed", self.elapsed)
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def all_histories(n):
    """Every binary history of length n as rows of an (2**n, n) int array."""
    codes = np.arange(2**n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)


@pytest.mark.acceptance(1, "exchangeable predictive equals the block-law ratio, all histories of length <= 20")
def test_exchangeable_oracle_equivalence(record_property):
    with Budget(10, record_property):
        worst = 0.0
        count = 0
        for n in range(21):
            hist = all_histories(n)
            d = hist.sum(axis=1, dtype=np.int64)
            got1 = rule_of_succession(np.full_like(d, n), d)
            ratio1 = np.array([dirichlet_block_law(n + 1, j + 1) / dirichlet_block_law(n, j) for j in range(n + 1)])
            ratio0 = np.array([dirichlet_block_law(n + 1, j) / dirichlet_block_law(n, j) for j in range(n + 1)])
            worst = max(worst, np.max(np.abs(got1 - ratio1[d])), np.max(np.abs((1.0 - got1) - ratio0[d])))
            count += len(hist)
            # the scalar predictive on a sample of histories agrees with the vectorized rule
            for row in hist[:: max(1, len(hist) // 64)]:
                p = exchangeable_predictive(ExchangeablePosterior.from_history(row))
                assert abs(p[1] - ratio1[int(row.sum())]) < 1e-12
        assert count == 2**21 - 1
        assert worst < 1e-12


@pytest.mark.acceptance(2, "fine-grid Bernoulli mixture matches the exchangeable predictive within 0.002")
def test_fine_grid_coherence(record_property):
    with Budget(60, record_property):
        dec = bernoulli_grid(0.001)
        worst = 0.0
        for n in range(13):
            for row in all_histories(n):
                grid = mixture_predictive(dec, row)
                exact = exchangeable_predictive(ExchangeablePosterior.from_history(row))
                worst = max(worst, float(np.max(np.abs(grid - exact))))
        assert worst < 0.002


@pytest.mark.acceptance(3, "war process: nonzero distances are exactly 1/4, weak merging holds, strong fails")
def test_war_dichotomy(record_property):
    with Budget(120, record_property):
        late = 0
        for seed in SEEDS:
            r = run_merging_experiment({"family": "war", "parameters": {}}, {"kind": "war_bayes"}, 100_000, seed)
            d = r.distances.values
            nz = np.flatnonzero(d)
            assert np.all(d[nz] == 0.25), seed
            assert len(nz) <= 60, (seed, len(nz))
            assert r.final_cesaro_mean < 2e-4, seed
            assert r.verdict.weak, seed
            late += bool(np.any(nz > 100))
        assert late >= 15


@pytest.mark.acceptance(4, "HMM grid: median Cesaro mean falls from N=2e3 to N=2e4 and ends below 0.05")
def test_hmm_trend(record_property):
    truth = {"family": "hmm", "parameters": {"p": 0.9, "q": 0.8}}
    pred = {"kind": "hmm_grid", "step": 0.02}
    with Budget(600, record_property):
        short = [run_merging_experiment(truth, pred, 2_000, s).final_cesaro_mean for s in SEEDS]
        long = [run_merging_experiment(truth, pred, 20_000, s).final_cesaro_mean for s in SEEDS]
        m_short, m_long = float(np.median(short)), float(np.median(long))
        record_property("median_2e3", m_short)
        record_property("median_2e4", m_long)
        assert m_long < m_short
        assert m_long < 0.05


def _bruteforce_predictives(p, q, L):
    """P(next = G | o) for every length-L history o, by summing over all hidden paths.

    History and hidden-path bit t is the symbol at time t.  The last hidden
    state's one-step forecast is summed analytically; everything before it is
    plain enumeration.
    """
    n = 2**L
    h = np.arange(n, dtype=np.int64)
    if L == 0:
        return np.array([0.5 * (p * q + (1 - p) * (1 - q)) + 0.5 * ((1 - p) * q + p * (1 - q))])
    changes = np.array([bin(int(x)).count("1") for x in (h ^ (h >> 1)) & ((1 << (L - 1)) - 1)])
    chain = 0.5 * p ** (L - 1 - changes) * (1 - p) ** changes
    last = (h >> (L - 1)) & 1
    go_g = np.where(last == 1, p * q + (1 - p) * (1 - q), (1 - p) * q + p * (1 - q))
    popcount = np.array([bin(x).count("1") for x in range(n)], dtype=np.int64)
    emit = q ** (L - np.arange(L + 1)) * (1 - q) ** np.arange(L + 1)
    num = np.empty(n)
    den = np.empty(n)
    o = np.arange(n, dtype=np.int64)
    for start in range(0, n, 512):
        hs = h[start : start + 512]
        E = emit[popcount[hs[:, None] ^ o[None, :]]]
        w = chain[start : start + 512]
        num_part = (w * go_g[start : start + 512]) @ E
        den_part = w @ E
        if start == 0:
            num[:], den[:] = num_part, den_part
        else:
            num += num_part
            den += den_part
    return num / den


def _filter_predictives(p, q, L_max):
    """Forward-filter predictives for every history up to length L_max, keyed by (L, code)."""
    out = {}
    stack = [(0, 0, HiddenMarkovComponent(p, q).oracle())]
    while stack:
        L, code, f = stack.pop()
        out[(L, code)] = float(f.predict()[1])
        if L == L_max:
            continue
        for a in (0, 1):
            g = copy.copy(f)
            g.update(a)
            stack.append((L + 1, code | (a << L), g))
    return out


@pytest.mark.acceptance(5, "two-state forward filter matches hidden-path enumeration within 1e-10")
def test_filter_vs_enumeration(record_property):
    rng = np.random.default_rng(2024)
    with Budget(30, record_property):
        worst = 0.0
        for p, q in rng.uniform(0.5, 1.0, size=(50, 2)):
            p, q = float(max(p, 0.5001)), float(max(q, 0.5001))
            filt = _filter_predictives(p, q, 12)
            for L in range(13):
                brute = _bruteforce_predictives(p, q, L)
                got = np.array([filt[(L, c)] for c in range(2**L)])
                worst = max(worst, float(np.max(np.abs(got - brute))))
        record_property("max_error", worst)
        assert worst < 1e-10


@pytest.mark.acceptance(6, "ergodic block frequencies within 0.02 of exact laws on >= 18/20 seeds")
def test_ergodic_frequencies(record_property):
    with Budget(300, record_property):
        for make in (
            lambda s: BernoulliComponent(0.3),
            lambda s: HiddenMarkovComponent(0.9, 0.8),
            lambda s: WarComponent(seed=s),
        ):
            good = 0
            for seed in SEEDS:
                c = make(seed)
                path = c.sampler(make_rng(seed)).sample_path(100_000)
                m = len(c.alphabet)
                gap = max(max_block_gap(block_frequencies(path, k, m), c) for k in (1, 2, 3))
                good += gap < 0.02
            assert good >= 18, (c.family, good)


@pytest.mark.acceptance(7, "Dirac decomposition: distance 1/2 throughout, Cesaro mean exactly 0.5, weak verdict false")
def test_dirac_witness(record_property):
    with Budget(60, record_property):
        for seed in SEEDS:
            r = dirac_witness_experiment(10_000, seed)
            assert np.all(r.distances.values == 0.5)
            assert r.final_cesaro_mean == 0.5
            assert r.verdict.weak is False


@pytest.mark.acceptance(8, "decision gap bounded by twice the Cesaro mean plus 0.01, zero for the oracle belief")
def test_decision_gap(record_property):
    bern = lambda t: {"family": "bernoulli", "parameters": {"theta": t}}
    configs = [
        (DecisionProblem.matching(WAR_ALPHABET), {"kind": "war_bayes"}, {"family": "war", "parameters": {}}),
        (DecisionProblem.matching(BINARY), {"kind": "mixture", "components": [bern(0.3), bern(0.7)]}, bern(0.7)),
    ]
    with Budget(120, record_property):
        for problem, belief, truth in configs:
            r = epsilon_optimality_gap(problem, belief, truth, 10_000, SEEDS)
            assert r.gap >= -1e-12, (truth, r.gap)
            assert r.gap <= 2 * r.mean_cesaro + 0.01
            for run in r.runs:
                assert run.payoff_oracle - run.payoff_belief <= 2 * run.cesaro_mean + 0.01
            same = epsilon_optimality_gap(problem, {"kind": "oracle"}, truth, 10_000, SEEDS[:5])
            assert same.gap == 0.0
            assert all(run.payoff_oracle == run.payoff_belief for run in same.runs)


@pytest.mark.acceptance(9, "repeated CLI runs write byte-identical artifacts")
def test_reproducible_artifacts(record_property, tmp_path):
    bern = {"family": "bernoulli", "parameters": {"theta": 0.3}}
    war = {"family": "war", "parameters": {}}
    configs = {
        "merge": {"kind": "merge", "component": war, "predictor": {"kind": "war_bayes"}, "N": 20_000},
        "calibrate": {"kind": "calibrate", "component": bern, "predictor": {"kind": "exchangeable"},
                      "N": 5_000, "bin_width": 0.05},
        "freq": {"kind": "freq", "component": {"family": "hmm", "parameters": {"p": 0.9, "q": 0.8}}, "N": 20_000},
        "decide": {"kind": "decide", "component": war, "predictor": {"kind": "war_bayes"},
                   "problem": {"kind": "matching"}, "N": 5_000},
        "dirac": {"kind": "dirac-witness", "N": 5_000},
        "simulate": {"kind": "simulate", "component": war, "N": 1_000},
    }
    with Budget(120, record_property):
        for name, body in configs.items():
            cfg = tmp_path / f"{name}.json"
            cfg.write_text(json.dumps(dict(body, schema_version=1, seeds=[1, 2, 3])))
            outs = []
            for rep in ("a", "b"):
                out = tmp_path / f"{name}_{rep}"
                assert main(["run", str(cfg), "--out", str(out), "--quiet"]) == 0
                outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            assert outs[0] == outs[1], name
            assert "summary.json" in outs[0]
