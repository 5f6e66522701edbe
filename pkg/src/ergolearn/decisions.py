"""Finite decision problems scored by average payoff over a horizon.

Outcomes are not influenced by actions and payoffs add up over periods, so
the strategy that maximizes each period's expected payoff under a belief is
optimal for the average payoff under that same belief.  The comparisons below
therefore only ever pit two myopic strategies against each other: one acting
on the belief, one acting on the true component's predictive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bayes_predictors import build_predictor
from .components import PATH_STREAM, PRNG_NAME, build_component, make_rng
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """Actions and a payoff table ``payoff[symbol, action]`` with entries in [0, 1]."""

    actions: tuple
    payoff: np.ndarray

    def __post_init__(self):
        R = np.array(self.payoff, dtype=np.float64)
        actions = tuple(self.actions)
        if R.ndim != 2 or R.shape[1] != len(actions) or not actions:
            raise DomainError(f"payoff must be (symbols, {len(actions)}) for the given actions, got {R.shape}")
        if np.any(R < 0.0) or np.any(R > 1.0):
            raise DomainError("payoffs must lie in [0, 1]")
        R.setflags(write=False)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "payoff", R)

    @classmethod
    def matching(cls, alphabet) -> "DecisionProblem":
        """Guess the next outcome: payoff 1 for a correct guess, else 0."""
        m = len(alphabet)
        return cls(tuple(alphabet.symbols), np.eye(m))

    def to_dict(self) -> dict:
        return {"actions": list(self.actions), "payoff": self.payoff.tolist()}

    @classmethod
    def from_dict(cls, data: dict, alphabet=None) -> "DecisionProblem":
        if data.get("kind") == "matching":
            if alphabet is None:
                raise DomainError("a matching problem needs the outcome alphabet")
            return cls.matching(alphabet)
        return cls(tuple(data["actions"]), data["payoff"])


def greedy_action(problem: DecisionProblem, predictive) -> int:
    """Index of the action with the highest expected payoff; lowest index on ties."""
    expected = np.asarray(predictive, dtype=np.float64) @ problem.payoff
    return int(np.argmax(expected))


class GreedyStrategy:
    """Acts myopically on whatever ``predictor`` currently believes."""

    def __init__(self, problem: DecisionProblem, predictor):
        self.problem = problem
        self.predictor = predictor

    def act(self) -> int:
        return greedy_action(self.problem, self.predictor.predict())

    def update(self, a: int) -> None:
        self.predictor.update(a)


def greedy_strategy(problem: DecisionProblem, predictor_spec: dict, truth=None, initial_hidden=None) -> GreedyStrategy:
    return GreedyStrategy(problem, build_predictor(predictor_spec, truth, initial_hidden))


@dataclass
class PairedRun:
    seed: int
    payoff_belief: float
    payoff_oracle: float
    cesaro_mean: float
    disagreements: int


@dataclass
class GapResult:
    problem: DecisionProblem
    belief: dict
    truth: dict
    N: int
    seeds: list
    runs: list = field(default_factory=list)

    @property
    def V_belief(self) -> float:
        return float(np.mean([r.payoff_belief for r in self.runs]))

    @property
    def V_oracle(self) -> float:
        return float(np.mean([r.payoff_oracle for r in self.runs]))

    @property
    def gap(self) -> float:
        return float(np.mean([r.payoff_oracle - r.payoff_belief for r in self.runs]))

    @property
    def mean_cesaro(self) -> float:
        return float(np.mean([r.cesaro_mean for r in self.runs]))

    def summary(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "belief": self.belief,
            "truth": self.truth,
            "N": self.N,
            "seeds": list(self.seeds),
            "V_belief": self.V_belief,
            "V_oracle": self.V_oracle,
            "gap": self.gap,
            "mean_final_cesaro_mean": self.mean_cesaro,
            "per_seed": [
                {
                    "seed": r.seed,
                    "V_belief": r.payoff_belief,
                    "V_oracle": r.payoff_oracle,
                    "gap": r.payoff_oracle - r.payoff_belief,
                    "final_cesaro_mean": r.cesaro_mean,
                    "disagreements": r.disagreements,
                }
                for r in self.runs
            ],
            "metadata": {"prng": PRNG_NAME, "numpy_version": np.__version__, "library_version": __version__},
        }


def paired_run(problem: DecisionProblem, belief_spec: dict, truth_spec: dict, N: int, seed: int) -> PairedRun:
    """Replay one sampled path through the belief-greedy and oracle-greedy strategies."""
    if N < 1:
        raise DomainError(f"horizon must be at least 1, got {N}")
    truth = build_component(truth_spec, seed=seed)
    if problem.payoff.shape[0] != len(truth.alphabet):
        raise DomainError("payoff table rows do not match the truth's alphabet")
    sampler = truth.sampler(make_rng(seed, PATH_STREAM))
    h0 = sampler.initial_hidden
    path = sampler.sample_path(N)
    belief = build_predictor(belief_spec, truth, h0)
    oracle = truth.oracle(h0)
    R = problem.payoff
    total_b = total_o = dist_sum = 0.0
    disagreements = 0
    for a in path.tolist():
        pb, po = belief.predict(), oracle.predict()
        db, do = greedy_action(problem, pb), greedy_action(problem, po)
        total_b += R[a, db]
        total_o += R[a, do]
        disagreements += db != do
        dist_sum += float(np.max(np.abs(pb - po)))
        belief.update(a)
        oracle.update(a)
    return PairedRun(seed, total_b / N, total_o / N, dist_sum / N, int(disagreements))


def evaluate_VN(problem: DecisionProblem, predictor_spec: dict, truth_spec: dict, N: int, seeds) -> tuple[float, list]:
    """Monte Carlo average payoff of the greedy strategy for ``predictor_spec``.

    Returns the mean over seeds and the per-seed averages.
    """
    per_seed = []
    for seed in seeds:
        truth = build_component(truth_spec, seed=seed)
        sampler = truth.sampler(make_rng(seed, PATH_STREAM))
        strategy = greedy_strategy(problem, predictor_spec, truth, sampler.initial_hidden)
        path = sampler.sample_path(N)
        total = 0.0
        for a in path.tolist():
            total += problem.payoff[a, strategy.act()]
            strategy.update(a)
        per_seed.append(total / N)
    return float(np.mean(per_seed)), per_seed


def epsilon_optimality_gap(problem: DecisionProblem, belief_spec: dict, truth_spec: dict, N: int, seeds) -> GapResult:
    """``V_N(oracle greedy) - V_N(belief greedy)`` on shared sample paths."""
    result = GapResult(problem, belief_spec, truth_spec, N, list(seeds))
    for seed in seeds:
        result.runs.append(paired_run(problem, belief_spec, truth_spec, N, seed))
    return result
