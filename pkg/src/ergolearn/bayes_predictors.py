"""Exact Bayesian one-step predictives for the mixture laws of each family.

The agent's belief is a prior over a parameter set together with one
component law per parameter.  Its predictive after a history is the
posterior-weighted average of the component predictives, with posterior
weight proportional to ``prior(theta) * P_theta(history)``.

Three families get dedicated sufficient statistics:

* exchangeable binary sequences (uniform prior on the coin bias) reduce to
  counts, and the predictive is the rule of succession ``(d + 1) / (n + 2)``;
* the hidden Markov family is discretized to a ``(p, q)`` grid and carried as
  log-weights plus one two-state filter per grid point;
* the war family under a uniform prior on its labelling is carried as the
  table of labels deduced so far.

Posterior states are immutable values advanced by pure step functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .components import (
    HG,
    W,
    BernoulliComponent,
    ConstantPredictor,
    HiddenMarkovComponent,
    WarComponent,
    WarFilter,
    build_component,
)
from .errors import DomainError, InconsistentObservation
from .process_core import History, WAR_ALPHABET

# --------------------------------------------------------------------------
# Exchangeable binary law (uniform mixture of coins)
# --------------------------------------------------------------------------


def exchangeable_block_probability(block) -> float:
    """``1 / ((k + 1) * C(k, d))`` for a binary block of length k with d ones."""
    block = tuple(int(a) for a in block)
    k, d = len(block), sum(block)
    return 1.0 / ((k + 1) * math.comb(k, d))


@dataclass(frozen=True)
class ExchangeablePosterior:
    n: int = 0
    d: int = 0

    def __post_init__(self):
        if not 0 <= self.d <= self.n:
            raise DomainError(f"need 0 <= d <= n, got n={self.n}, d={self.d}")

    @classmethod
    def from_history(cls, history) -> "ExchangeablePosterior":
        outcomes = tuple(int(a) for a in history)
        return cls(len(outcomes), int(sum(outcomes)))

    def step(self, a: int) -> "ExchangeablePosterior":
        return ExchangeablePosterior(self.n + 1, self.d + int(a))

    def to_dict(self) -> dict:
        return {"family": "exchangeable", "n": self.n, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "ExchangeablePosterior":
        return cls(int(data["n"]), int(data["d"]))


def rule_of_succession(n, d):
    """``P(next = 1) = (d + 1) / (n + 2)``; works elementwise on arrays."""
    return (np.asarray(d, dtype=np.float64) + 1.0) / (np.asarray(n, dtype=np.float64) + 2.0)


def exchangeable_predictive(post: ExchangeablePosterior) -> np.ndarray:
    p1 = (post.d + 1) / (post.n + 2)
    return np.array([(post.n - post.d + 1) / (post.n + 2), p1])


class ExchangeablePredictor:
    def __init__(self):
        self.post = ExchangeablePosterior()

    def predict(self) -> np.ndarray:
        return exchangeable_predictive(self.post)

    def update(self, a: int) -> None:
        self.post = self.post.step(a)


# --------------------------------------------------------------------------
# Finite / gridded decompositions
# --------------------------------------------------------------------------


@dataclass
class Decomposition:
    """A finite parameter set with prior weights and one component per parameter."""

    parameters: list
    prior: np.ndarray
    components: list

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=np.float64)
        if not self.parameters:
            raise DomainError("a decomposition needs at least one parameter")
        if len(self.parameters) != len(self.components) or self.prior.shape != (len(self.parameters),):
            raise DomainError("parameters, prior and components must have equal length")
        if np.any(self.prior < 0) or abs(math.fsum(self.prior) - 1.0) > 1e-10:
            raise DomainError("prior must be a probability vector")
        alphabets = {c.alphabet for c in self.components}
        if len(alphabets) != 1:
            raise DomainError("all components must share one alphabet")

    def __len__(self):
        return len(self.parameters)

    @property
    def alphabet(self):
        return self.components[0].alphabet

    @property
    def family(self) -> Optional[str]:
        families = {c.family for c in self.components}
        return families.pop() if len(families) == 1 else None

    @classmethod
    def from_components(cls, components, prior=None) -> "Decomposition":
        components = list(components)
        if prior is None:
            prior = np.full(len(components), 1.0 / len(components))
        return cls([c.spec() for c in components], prior, components)


def bernoulli_grid(step: float = 0.001) -> Decomposition:
    """Uniform prior on the midpoints of ``[0, 1]`` cut into cells of width ``step``."""
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise DomainError(f"step must divide 1, got {step}")
    thetas = (np.arange(n) + 0.5) / n
    return Decomposition.from_components([BernoulliComponent(t) for t in thetas])


def hmm_grid_values(step: float = 0.02) -> np.ndarray:
    """``1/2 + k * step`` for ``k = 1, 2, ...`` strictly below 1."""
    n = int(round(0.5 / step))
    if n < 2 or abs(n * step - 0.5) > 1e-9:
        raise DomainError(f"step must divide 1/2, got {step}")
    return np.round(0.5 + step * np.arange(1, n), 12)


def hmm_grid(step: float = 0.02) -> Decomposition:
    values = hmm_grid_values(step)
    comps = [HiddenMarkovComponent(p, q) for p in values for q in values]
    return Decomposition.from_components(comps)


def observation_filter(component):
    """Predictor for ``component`` that sees observations only."""
    if isinstance(component, WarComponent):
        return WarFilter(component)
    return component.oracle()


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _normalize_log(log_w: np.ndarray) -> np.ndarray:
    top = np.max(log_w)
    if not np.isfinite(top):
        return log_w
    w = np.exp(log_w - top)
    return log_w - (top + math.log(w.sum()))


class MixturePredictor:
    """Sequential Bayes over a :class:`Decomposition`.

    All-Bernoulli and all-hidden-Markov decompositions are vectorized; other
    families fall back to one observation filter per component.
    """

    def __init__(self, dec: Decomposition):
        self.dec = dec
        self.history: list[int] = []
        family = dec.family
        if family == "bernoulli":
            thetas = np.array([c.theta for c in dec.components])
            self._table = np.stack([1.0 - thetas, thetas], axis=1)
            self._filters = None
            self._grid = None
            self.log_weights = _log(dec.prior)
        elif family == "hmm":
            self._grid = GridPosterior.initial(
                [(c.p, c.q) for c in dec.components], dec.prior
            )
            self._filters = None
        else:
            self._filters = [observation_filter(c) for c in dec.components]
            self._grid = None
            self.log_weights = _log(dec.prior)

    def weights(self) -> np.ndarray:
        if self._grid is not None:
            return self._grid.weights()
        w = np.exp(self.log_weights - np.max(self.log_weights))
        return w / w.sum()

    def _component_predictives(self) -> np.ndarray:
        if self._filters is None:
            return self._table
        return np.stack([f.predict() for f in self._filters])

    def predict(self) -> np.ndarray:
        if self._grid is not None:
            return grid_predictive(self._grid)
        return self.weights() @ self._component_predictives()

    def update(self, a: int) -> None:
        prefix = tuple(self.history) + (a,)
        if self._grid is not None:
            nxt = grid_posterior_step(self._grid, a)
            if not np.any(np.isfinite(nxt.log_weights)):
                raise InconsistentObservation(
                    f"inconsistent observation: history prefix {prefix} has zero probability "
                    "under every component",
                    prefix,
                )
            self._grid = nxt
        else:
            lik = self._component_predictives()[:, a]
            log_w = self.log_weights + _log(lik)
            if not np.any(np.isfinite(log_w)):
                raise InconsistentObservation(
                    f"inconsistent observation: history prefix {prefix} has zero probability "
                    "under every component",
                    prefix,
                )
            if self._filters is not None:
                for f, ok in zip(self._filters, lik > 0.0):
                    if ok:
                        f.update(a)
            self.log_weights = _normalize_log(log_w)
        self.history.append(a)


def _bernoulli_log_likelihood(thetas: np.ndarray, n: int, d: int) -> np.ndarray:
    ones = d * _log(thetas) if d else np.zeros_like(thetas)
    zeros = (n - d) * _log(1.0 - thetas) if n - d else np.zeros_like(thetas)
    return ones + zeros


def mixture_posterior(dec: Decomposition, history) -> np.ndarray:
    """Posterior weights over ``dec.parameters`` after ``history``."""
    outcomes = tuple(int(a) for a in (history.outcomes if isinstance(history, History) else history))
    if dec.family == "bernoulli":
        thetas = np.array([c.theta for c in dec.components])
        log_w = _log(dec.prior) + _bernoulli_log_likelihood(thetas, len(outcomes), int(sum(outcomes)))
        if np.any(np.isfinite(log_w)):
            w = np.exp(log_w - np.max(log_w))
            return w / w.sum()
        # fall through to the sequential scan, which names the first bad prefix
    mp = MixturePredictor(dec)
    for a in outcomes:
        mp.update(int(a))
    return mp.weights()


def mixture_predictive(dec: Decomposition, history) -> np.ndarray:
    """Bayesian predictive of the mixture after ``history``.

    Raises :class:`InconsistentObservation` naming the first prefix of
    ``history`` that every component rules out.
    """
    outcomes = tuple(int(a) for a in (history.outcomes if isinstance(history, History) else history))
    if dec.family == "bernoulli":
        w = mixture_posterior(dec, outcomes)
        thetas = np.array([c.theta for c in dec.components])
        p1 = float(w @ thetas)
        return np.array([1.0 - p1, p1])
    mp = MixturePredictor(dec)
    for a in outcomes:
        mp.update(int(a))
    return mp.predict()


# --------------------------------------------------------------------------
# Hidden Markov grid posterior
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridPosterior:
    """Posterior over a ``(p, q)`` grid.

    ``log_weights`` are normalized (log-sum-exp zero); ``filter_states`` holds,
    per grid point, the posterior over the last hidden state as ``[P(B), P(G)]``.
    """

    grid: np.ndarray
    log_weights: np.ndarray
    filter_states: np.ndarray

    @classmethod
    def initial(cls, grid, prior=None) -> "GridPosterior":
        grid = np.asarray(grid, dtype=np.float64).reshape(-1, 2)
        if np.any(grid <= 0.5) or np.any(grid > 1.0):
            raise DomainError("grid parameters must lie in (1/2, 1]")
        if prior is None:
            prior = np.full(len(grid), 1.0 / len(grid))
        states = np.full((len(grid), 2), 0.5)
        return cls(grid, _normalize_log(_log(np.asarray(prior, dtype=np.float64))), states)

    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - np.max(self.log_weights))
        return w / w.sum()

    def to_dict(self) -> dict:
        return {
            "family": "hmm_grid",
            "grid": self.grid.tolist(),
            "log_weights": [None if not np.isfinite(x) else float(x) for x in self.log_weights],
            "filter_states": self.filter_states.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridPosterior":
        lw = np.array([-np.inf if x is None else x for x in data["log_weights"]], dtype=np.float64)
        return cls(
            np.array(data["grid"], dtype=np.float64),
            lw,
            np.array(data["filter_states"], dtype=np.float64),
        )


def _grid_one_step(gp: GridPosterior) -> tuple[np.ndarray, np.ndarray]:
    """Per grid point: forecast of the next hidden state being G, and of observing G."""
    p, q = gp.grid[:, 0], gp.grid[:, 1]
    g = gp.filter_states[:, HG]
    g1 = p * g + (1.0 - p) * (1.0 - g)
    obs_g = q * g1 + (1.0 - q) * (1.0 - g1)
    return g1, obs_g


def grid_predictive(gp: GridPosterior) -> np.ndarray:
    _, obs_g = _grid_one_step(gp)
    pg = float(gp.weights() @ obs_g)
    return np.array([1.0 - pg, pg])


def grid_posterior_step(gp: GridPosterior, a: int) -> GridPosterior:
    """One forward-filter step at every grid point, then a Bayes reweighting.

    Grid points that assign the observation zero probability get weight
    ``-inf`` and keep their previous filter state.
    """
    q = gp.grid[:, 1]
    g1, obs_g = _grid_one_step(gp)
    if a == HG:
        lik = obs_g
        num = q * g1
    else:
        lik = 1.0 - obs_g
        num = (1.0 - q) * g1
    alive = lik > 0.0
    g_new = np.where(alive, num / np.where(alive, lik, 1.0), gp.filter_states[:, HG])
    states = np.stack([1.0 - g_new, g_new], axis=1)
    log_w = _normalize_log(gp.log_weights + _log(lik))
    return GridPosterior(gp.grid, log_w, states)


class HMMGridPredictor:
    def __init__(self, step: float = 0.02, grid=None):
        if grid is None:
            values = hmm_grid_values(step)
            grid = [(p, q) for p in values for q in values]
        self.posterior = GridPosterior.initial(grid)

    def predict(self) -> np.ndarray:
        return grid_predictive(self.posterior)

    def update(self, a: int) -> None:
        self.posterior = grid_posterior_step(self.posterior, a)


# --------------------------------------------------------------------------
# War process under a uniform prior on the labelling
# --------------------------------------------------------------------------

_EMPTY: Mapping[int, int] = MappingProxyType({})


@dataclass(frozen=True)
class WarPosterior:
    """What the agent has deduced about the labelling.

    ``learned`` maps gap lengths to deduced labels (alphabet indices);
    ``k_current`` is the current gap length, ``None`` until a war is seen;
    ``pre_war_history`` keeps the peaceful outcomes seen before the first war,
    which pin no labelling index because the initial gap is unknown.
    """

    learned: Mapping[int, int] = field(default_factory=lambda: _EMPTY)
    k_current: Optional[int] = None
    pre_war_history: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "family": "war",
            "learned": {str(k): WAR_ALPHABET.symbols[v] for k, v in sorted(self.learned.items())},
            "k_current": self.k_current,
            "pre_war_history": [WAR_ALPHABET.symbols[v] for v in self.pre_war_history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WarPosterior":
        learned = {int(k): WAR_ALPHABET.index(v) for k, v in data["learned"].items()}
        return cls(
            MappingProxyType(learned),
            data["k_current"],
            tuple(WAR_ALPHABET.index(v) for v in data["pre_war_history"]),
        )


_WAR_UNINFORMED = np.array([0.5, 0.25, 0.25])
_WAR_KNOWN = {1: np.array([0.5, 0.5, 0.0]), 2: np.array([0.5, 0.0, 0.5])}
for _arr in (_WAR_UNINFORMED, *_WAR_KNOWN.values()):
    _arr.setflags(write=False)


def war_bayes_predictive(wp: WarPosterior) -> np.ndarray:
    if wp.k_current is None:
        return _WAR_UNINFORMED
    label = wp.learned.get(wp.k_current + 1)
    if label is None:
        return _WAR_UNINFORMED
    return _WAR_KNOWN[label]


def war_posterior_step(wp: WarPosterior, a: int) -> WarPosterior:
    if a == W:
        return WarPosterior(wp.learned, 0, wp.pre_war_history)
    if wp.k_current is None:
        return WarPosterior(wp.learned, None, wp.pre_war_history + (a,))
    k = wp.k_current + 1
    known = wp.learned.get(k)
    if known is None:
        learned = dict(wp.learned)
        learned[k] = a
        return WarPosterior(MappingProxyType(learned), k, wp.pre_war_history)
    if known != a:
        raise InconsistentObservation(
            f"impossible observation: {WAR_ALPHABET.symbols[a]} after {k - 1} peaceful periods, "
            f"but label {k} was already deduced as {WAR_ALPHABET.symbols[known]}"
        )
    return WarPosterior(wp.learned, k, wp.pre_war_history)


class WarBayesPredictor:
    def __init__(self):
        self.posterior = WarPosterior()

    def predict(self) -> np.ndarray:
        return war_bayes_predictive(self.posterior)

    def update(self, a: int) -> None:
        self.posterior = war_posterior_step(self.posterior, a)


# --------------------------------------------------------------------------
# Construction from JSON-style records
# --------------------------------------------------------------------------

PREDICTOR_KINDS = ("oracle", "exchangeable", "mixture", "bernoulli_grid", "hmm_grid", "war_bayes", "constant")


def build_decomposition(spec: dict) -> Decomposition:
    kind = spec.get("kind")
    if kind == "mixture":
        comps = [build_component(c) for c in spec["components"]]
        return Decomposition.from_components(comps, spec.get("prior"))
    if kind == "bernoulli_grid":
        return bernoulli_grid(spec.get("step", 0.001))
    if kind == "hmm_grid":
        return hmm_grid(spec.get("step", 0.02))
    raise DomainError(f"predictor kind {kind!r} does not describe a decomposition")


def build_predictor(spec: dict, truth=None, initial_hidden=None):
    """Build a stateful predictor (``predict()`` / ``update(a)``) from a record.

    ``truth`` and ``initial_hidden`` are only consulted for ``kind="oracle"``.
    """
    kind = spec.get("kind")
    if kind == "oracle":
        if truth is None:
            raise DomainError("an oracle predictor needs the true component")
        return truth.oracle(initial_hidden)
    if kind == "exchangeable":
        return ExchangeablePredictor()
    if kind in ("mixture", "bernoulli_grid"):
        return MixturePredictor(build_decomposition(spec))
    if kind == "hmm_grid":
        return HMMGridPredictor(spec.get("step", 0.02))
    if kind == "war_bayes":
        return WarBayesPredictor()
    if kind == "constant":
        return ConstantPredictor(spec["weights"])
    raise DomainError(f"unknown predictor kind {kind!r}; expected one of {PREDICTOR_KINDS}")
