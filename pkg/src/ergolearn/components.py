"""Ergodic component laws: Bernoulli, hidden Markov, war, and finite Markov chains.

Each component offers three things:

* ``block_probability(block)`` -- the exact stationary probability of seeing
  ``block`` in consecutive periods;
* ``sampler(rng)`` -- a seeded generator of one realization, started from the
  stationary law of its hidden chain;
* ``oracle(...)`` -- the truth-side predictor, i.e. the one-step predictive of
  the component itself.

Randomness comes from numpy's ``Generator`` over the PCG64 bit generator.
Seeds are expanded with ``SeedSequence`` into independent named streams so that
the sampled path and the war parameter never share draws.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InconsistentObservation
from .process_core import BINARY, HMM_ALPHABET, WAR_ALPHABET, Alphabet

PRNG_NAME = "numpy.random.Generator(PCG64) seeded via SeedSequence(entropy=seed, spawn_key=(stream,))"

PATH_STREAM = 0
PARAMETER_STREAM = 1

BLOCK_LENGTH_BOUND = 25
WAR_HIDDEN_CAP = 60

# war alphabet indices
W, WB, WG = 0, 1, 2
# hidden Markov alphabet indices (hidden and observed share labels)
HB, HG = 0, 1


def make_rng(seed: int, stream: int = PATH_STREAM) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def _check_block(component, block) -> tuple[int, ...]:
    block = tuple(int(a) for a in block)
    if len(block) > BLOCK_LENGTH_BOUND:
        raise DomainError(
            f"block length {len(block)} exceeds the exact-probability bound "
            f"BLOCK_LENGTH_BOUND={BLOCK_LENGTH_BOUND}"
        )
    m = len(component.alphabet)
    for a in block:
        if not 0 <= a < m:
            raise DomainError(f"index {a} is not valid for alphabet {component.alphabet.symbols!r}")
    return block


def exact_block_probability(component, block) -> float:
    """Stationary probability of ``block`` under ``component`` (length <= 25)."""
    return component.block_probability(block)


def bernoulli_block_probability(component: "BernoulliComponent", block) -> float:
    return component.block_probability(block)


# --------------------------------------------------------------------------
# Bernoulli
# --------------------------------------------------------------------------


class BernoulliComponent:
    """I.i.d. coin with ``P(1) = theta``."""

    family = "bernoulli"
    alphabet = BINARY

    def __init__(self, theta: float):
        theta = float(theta)
        if not 0.0 <= theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {theta}")
        self.theta = theta

    def __repr__(self):
        return f"BernoulliComponent(theta={self.theta!r})"

    def spec(self) -> dict:
        return {"family": self.family, "parameters": {"theta": self.theta}}

    def block_probability(self, block) -> float:
        block = _check_block(self, block)
        d = sum(block)
        k = len(block)
        return self.theta**d * (1.0 - self.theta) ** (k - d)

    def sampler(self, rng: np.random.Generator) -> "BernoulliSampler":
        return BernoulliSampler(self, rng)

    def oracle(self, initial_hidden=None) -> "ConstantPredictor":
        return ConstantPredictor([1.0 - self.theta, self.theta])


class BernoulliSampler:
    def __init__(self, component: BernoulliComponent, rng: np.random.Generator):
        self.component = component
        self.rng = rng
        self.hidden = None
        self.initial_hidden = None

    def step(self) -> int:
        return int(self.rng.random() < self.component.theta)

    def sample_path(self, n: int) -> np.ndarray:
        return (self.rng.random(n) < self.component.theta).astype(np.int8)


class ConstantPredictor:
    """Predicts the same distribution at every step."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=np.float64)

    def predict(self) -> np.ndarray:
        return self.weights

    def update(self, a: int) -> None:
        pass


# --------------------------------------------------------------------------
# Hidden Markov (two hidden states, noisy signal)
# --------------------------------------------------------------------------


def _check_pq(p: float, q: float) -> None:
    if not (0.5 < p <= 1.0 and 0.5 < q <= 1.0):
        raise DomainError(f"need 1/2 < p, q <= 1; got p={p}, q={q}")


def hm_transition(h: int, p: float, q: float) -> np.ndarray:
    """Joint law of (next hidden, next observed) given current hidden state ``h``.

    Returns a 2x2 array indexed ``[h', a']``.  The previous observed symbol
    does not enter.
    """
    _check_pq(p, q)
    if h not in (HB, HG):
        raise DomainError(f"hidden state must be 0 (B) or 1 (G), got {h}")
    stay = np.array([1.0 - p, 1.0 - p])
    stay[h] = p
    signal = np.array([[q, 1.0 - q], [1.0 - q, q]])
    return stay[:, None] * signal


class HiddenMarkovComponent:
    """Observed noisy signal of a symmetric two-state hidden Markov chain.

    The hidden state persists with probability ``p``; the observation equals
    the hidden state with probability ``q``.
    """

    family = "hmm"
    alphabet = HMM_ALPHABET

    def __init__(self, p: float, q: float):
        p, q = float(p), float(q)
        _check_pq(p, q)
        self.p = p
        self.q = q

    def __repr__(self):
        return f"HiddenMarkovComponent(p={self.p!r}, q={self.q!r})"

    def spec(self) -> dict:
        return {"family": self.family, "parameters": {"p": self.p, "q": self.q}}

    @property
    def transition(self) -> np.ndarray:
        p = self.p
        return np.array([[p, 1.0 - p], [1.0 - p, p]])

    @property
    def emission(self) -> np.ndarray:
        q = self.q
        return np.array([[q, 1.0 - q], [1.0 - q, q]])

    def block_probability(self, block) -> float:
        block = _check_block(self, block)
        T, E = self.transition, self.emission
        alpha = np.array([0.5, 0.5])
        for a in block:
            alpha = (alpha @ T) * E[:, a]
        return float(alpha.sum())

    def sampler(self, rng: np.random.Generator) -> "HiddenMarkovSampler":
        return HiddenMarkovSampler(self, rng)

    def oracle(self, initial_hidden=None) -> "HiddenMarkovFilter":
        # The truth-side predictive conditions on observations only; the
        # hidden state stays latent exactly as it does for the component law.
        return HiddenMarkovFilter(self.p, self.q)


class HiddenMarkovSampler:
    """Holds the hidden state of the period just emitted (initially the one before time 0)."""

    def __init__(self, component: HiddenMarkovComponent, rng: np.random.Generator):
        self.component = component
        self.rng = rng
        self.hidden = HB if rng.random() < 0.5 else HG
        self.initial_hidden = self.hidden

    def step(self) -> int:
        c = self.component
        if self.rng.random() >= c.p:
            self.hidden = 1 - self.hidden
        a = self.hidden if self.rng.random() < c.q else 1 - self.hidden
        return a

    def sample_path(self, n: int, return_hidden: bool = False):
        c = self.component
        u = self.rng.random(2 * n).reshape(n, 2)
        flips = (u[:, 0] >= c.p).astype(np.int64)
        hidden = ((self.hidden + np.cumsum(flips)) % 2).astype(np.int8)
        errors = (u[:, 1] >= c.q).astype(np.int8)
        symbols = hidden ^ errors
        if n:
            self.hidden = int(hidden[-1])
        return (symbols, hidden) if return_hidden else symbols


class HiddenMarkovFilter:
    """Exact one-step predictive of a hidden Markov component given observations.

    ``g`` is the posterior probability that the last hidden state was G.
    """

    def __init__(self, p: float, q: float, g: float = 0.5):
        self.p = p
        self.q = q
        self.g = g

    def _hidden_forecast(self) -> float:
        return self.p * self.g + (1.0 - self.p) * (1.0 - self.g)

    def predict(self) -> np.ndarray:
        g1 = self._hidden_forecast()
        pg = self.q * g1 + (1.0 - self.q) * (1.0 - g1)
        return np.array([1.0 - pg, pg])

    def update(self, a: int) -> None:
        g1 = self._hidden_forecast()
        if a == HG:
            num, den = self.q * g1, self.q * g1 + (1.0 - self.q) * (1.0 - g1)
        else:
            num, den = (1.0 - self.q) * g1, (1.0 - self.q) * g1 + self.q * (1.0 - g1)
        if den <= 0.0:
            raise InconsistentObservation(f"observation {a} has zero probability under {self.p, self.q}")
        self.g = num / den


# --------------------------------------------------------------------------
# War process
# --------------------------------------------------------------------------


def war_stationary_hidden_init(rng: np.random.Generator) -> int:
    """Draw the periods-since-last-war counter from its stationary law.

    ``P(xi = k) = 2**-(k + 1)``: count fair failures before the first success.
    """
    k = 0
    while rng.random() >= 0.5:
        k += 1
    return k


class WarComponent:
    """War/peace process indexed by a B/G labelling of peaceful-gap lengths.

    Every period a war erupts with probability 1/2; otherwise the outcome is
    ``theta(k)`` where ``k`` is the number of peaceful periods since the last
    war.  ``theta`` is materialized lazily from a dedicated parameter stream,
    one fair draw per index in increasing order, so the realized labelling
    does not depend on how far it is probed.  ``theta_prefix`` pins the first
    values explicitly (given as ``"B"``/``"G"`` or 1/2 indices).
    """

    family = "war"
    alphabet = WAR_ALPHABET

    def __init__(self, seed: int | None = None, theta_prefix=()):
        self.seed = seed
        self._theta: list[int] = [self._as_index(x) for x in theta_prefix]
        self._n_pinned = len(self._theta)
        self._param_rng = make_rng(seed, PARAMETER_STREAM) if seed is not None else None

    @staticmethod
    def _as_index(x) -> int:
        if x in ("B", WB):
            return WB
        if x in ("G", WG):
            return WG
        raise DomainError(f"theta values must be 'B' or 'G', got {x!r}")

    def __repr__(self):
        return f"WarComponent(seed={self.seed!r}, materialized={len(self._theta)})"

    def spec(self) -> dict:
        params = {}
        if self._n_pinned:
            params["theta_prefix"] = [WAR_ALPHABET.symbols[v] for v in self._theta[: self._n_pinned]]
        out = {"family": self.family, "parameters": params}
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def materialize(self, k: int) -> None:
        """Ensure ``theta(1..k)`` exist."""
        missing = k - len(self._theta)
        if missing <= 0:
            return
        if self._param_rng is None:
            raise DomainError(f"theta({k}) is not pinned and the component has no seed")
        draws = self._param_rng.random(missing)
        self._theta.extend(WB if u < 0.5 else WG for u in draws)

    def theta(self, k: int) -> int:
        if k < 1:
            raise DomainError(f"theta is defined on positive integers, got {k}")
        if k > len(self._theta):
            self.materialize(k)
        return self._theta[k - 1]

    def theta_array(self, k: int) -> np.ndarray:
        """``theta(1..k)`` as an int8 array (index ``j`` holds ``theta(j + 1)``)."""
        self.materialize(k)
        return np.asarray(self._theta[:k], dtype=np.int8)

    def block_probability(self, block) -> float:
        """Forward summation over the hidden gap counter.

        Gap lengths are truncated at ``WAR_HIDDEN_CAP``: the top state carries
        the whole stationary tail mass ``2**-60`` and loops onto itself, which
        keeps the truncated chain exactly stationary.  A block of length at
        most 25 can only be affected through initial gaps of 35 or more, a
        mass below ``2**-35``.
        """
        block = _check_block(self, block)
        cap = WAR_HIDDEN_CAP
        alpha = war_stationary_vector(cap)
        emit = np.empty(cap + 1, dtype=np.int8)
        emit[0] = W
        emit[1:] = self.theta_array(cap)
        for a in block:
            alpha = _war_forward(alpha) * (emit == a)
        return float(alpha.sum())

    def sampler(self, rng: np.random.Generator) -> "WarSampler":
        return WarSampler(self, rng)

    def oracle(self, initial_hidden: int) -> "WarOracle":
        return WarOracle(self, initial_hidden)


def war_stationary_vector(cap: int = WAR_HIDDEN_CAP) -> np.ndarray:
    pi = np.array([2.0 ** -(k + 1) for k in range(cap + 1)])
    pi[cap] = 2.0**-cap
    return pi


def _war_forward(alpha: np.ndarray) -> np.ndarray:
    out = np.empty_like(alpha)
    out[0] = 0.5 * alpha.sum()
    out[1:] = 0.5 * alpha[:-1]
    out[-1] += 0.5 * alpha[-1]
    return out


class WarSampler:
    """Holds ``xi``, the gap counter of the period just emitted."""

    def __init__(self, component: WarComponent, rng: np.random.Generator):
        self.component = component
        self.rng = rng
        self.hidden = war_stationary_hidden_init(rng)
        self.initial_hidden = self.hidden

    def step(self) -> int:
        if self.rng.random() < 0.5:
            self.hidden = 0
            return W
        self.hidden += 1
        return self.component.theta(self.hidden)

    def sample_path(self, n: int, return_hidden: bool = False):
        war = self.rng.random(n) < 0.5
        idx = np.arange(n)
        last_reset = np.where(war, idx, -1 - self.hidden)
        np.maximum.accumulate(last_reset, out=last_reset)
        xi = idx - last_reset
        symbols = np.zeros(n, dtype=np.int8)
        if n:
            top = int(xi.max())
            theta = self.component.theta_array(max(top, 1))
            peace = xi > 0
            symbols[peace] = theta[xi[peace] - 1]
            self.hidden = int(xi[-1])
        return (symbols, xi) if return_hidden else symbols


class WarOracle:
    """Predictive of an agent who knows theta and tracks the gap counter.

    Before the first observed war the counter is read from the true initial
    hidden state; afterwards it is implied by the observations.
    """

    def __init__(self, component: WarComponent, initial_hidden: int):
        self.component = component
        self.xi = int(initial_hidden)

    def predict(self) -> np.ndarray:
        return war_oracle_predict(self.component, self.xi)

    def update(self, a: int) -> None:
        if a == W:
            self.xi = 0
            return
        self.xi += 1
        if self.component.theta(self.xi) != a:
            raise InconsistentObservation(
                f"observed {WAR_ALPHABET.symbols[a]} but theta({self.xi}) = "
                f"{WAR_ALPHABET.symbols[self.component.theta(self.xi)]}"
            )


def war_oracle_predict(component: WarComponent, xi: int) -> np.ndarray:
    """``(W: 1/2, theta(xi + 1): 1/2)``; materializes ``theta(xi + 1)``."""
    out = np.zeros(3)
    out[W] = 0.5
    out[component.theta(xi + 1)] = 0.5
    return out


class WarFilter:
    """Predictive of a single war component given observations only.

    Tracks the posterior of the gap counter (truncated as in
    :meth:`WarComponent.block_probability`).  Used when war components appear
    inside an explicit finite mixture.
    """

    def __init__(self, component: WarComponent):
        self.component = component
        cap = WAR_HIDDEN_CAP
        self.belief = war_stationary_vector(cap)
        self.emit = np.empty(cap + 1, dtype=np.int8)
        self.emit[0] = W
        self.emit[1:] = component.theta_array(cap)

    def predict(self) -> np.ndarray:
        fwd = _war_forward(self.belief)
        out = np.bincount(self.emit, weights=fwd, minlength=3)
        return out / out.sum()

    def update(self, a: int) -> None:
        post = _war_forward(self.belief) * (self.emit == a)
        total = post.sum()
        if total <= 0.0:
            raise InconsistentObservation(f"observation {WAR_ALPHABET.symbols[a]} impossible under {self.component!r}")
        self.belief = post / total


# --------------------------------------------------------------------------
# Finite Markov chain (harness baseline)
# --------------------------------------------------------------------------


class MarkovComponent:
    """Stationary irreducible aperiodic Markov chain on a finite alphabet."""

    family = "markov"

    def __init__(self, transition, symbols=None):
        P = np.array(transition, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise DomainError(f"transition must be a square matrix of size >= 2, got shape {P.shape}")
        if np.any(P < 0) or np.any(P > 1) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise DomainError("transition rows must be probability vectors")
        m = P.shape[0]
        if not _is_primitive(P):
            raise DomainError("transition matrix must be irreducible and aperiodic")
        self.transition = P
        self.alphabet = Alphabet(tuple(symbols) if symbols is not None else tuple(range(m)))
        if len(self.alphabet) != m:
            raise DomainError("symbols do not match the transition matrix size")
        self.stationary = _stationary_vector(P)

    def __repr__(self):
        return f"MarkovComponent(transition={self.transition.tolist()!r})"

    def spec(self) -> dict:
        return {
            "family": self.family,
            "parameters": {
                "transition": self.transition.tolist(),
                "symbols": list(self.alphabet.symbols),
            },
        }

    def block_probability(self, block) -> float:
        block = _check_block(self, block)
        if not block:
            return 1.0
        prob = self.stationary[block[0]]
        for a, b in zip(block, block[1:]):
            prob *= self.transition[a, b]
        return float(prob)

    def sampler(self, rng: np.random.Generator) -> "MarkovSampler":
        return MarkovSampler(self, rng)

    def oracle(self, initial_hidden=None) -> "MarkovPredictor":
        return MarkovPredictor(self)


def _is_primitive(P: np.ndarray) -> bool:
    m = P.shape[0]
    support = (P > 0).astype(np.int64)
    power = np.eye(m, dtype=np.int64)
    # Wielandt: a primitive m x m matrix has a positive power at (m-1)^2 + 1.
    for _ in range((m - 1) ** 2 + 1):
        power = np.minimum(power @ support, 1)
    return bool(np.all(power > 0))


def _stationary_vector(P: np.ndarray) -> np.ndarray:
    m = P.shape[0]
    A = np.vstack([P.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


class MarkovSampler:
    def __init__(self, component: MarkovComponent, rng: np.random.Generator):
        self.component = component
        self.rng = rng
        self.hidden = None
        self.initial_hidden = None
        self._cdf_init = np.cumsum(component.stationary)
        self._cdf_rows = np.cumsum(component.transition, axis=1)

    def step(self) -> int:
        cdf = self._cdf_init if self.hidden is None else self._cdf_rows[self.hidden]
        u = self.rng.random()
        a = min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
        self.hidden = a
        return a

    def sample_path(self, n: int) -> np.ndarray:
        return np.fromiter((self.step() for _ in range(n)), dtype=np.int8, count=n)


class MarkovPredictor:
    def __init__(self, component: MarkovComponent):
        self.component = component
        self.last = None

    def predict(self) -> np.ndarray:
        if self.last is None:
            return self.component.stationary
        return self.component.transition[self.last]

    def update(self, a: int) -> None:
        row = self.predict()
        if row[a] <= 0.0:
            raise InconsistentObservation(f"transition to {a} has zero probability")
        self.last = a


# --------------------------------------------------------------------------
# Construction from JSON-style records
# --------------------------------------------------------------------------

FAMILIES = ("bernoulli", "hmm", "war", "markov")


def build_component(spec: dict, seed: int | None = None):
    """Build a component from ``{"family", "parameters", "seed"}``.

    A ``seed`` inside the record wins over the ``seed`` argument; it only
    matters for families with a random parameter (war).
    """
    family = spec.get("family")
    params = spec.get("parameters", {}) or {}
    if family == "bernoulli":
        return BernoulliComponent(params["theta"])
    if family == "hmm":
        return HiddenMarkovComponent(params["p"], params["q"])
    if family == "war":
        s = spec.get("seed", seed)
        return WarComponent(seed=s, theta_prefix=params.get("theta_prefix", ()))
    if family == "markov":
        return MarkovComponent(params["transition"], params.get("symbols"))
    raise DomainError(f"unknown component family {family!r}; expected one of {FAMILIES}")
